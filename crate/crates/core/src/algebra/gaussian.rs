//! Gaussian rationals: complex numbers with exact rational real and imaginary parts.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An element of the field Q(i).
///
/// `BigRational` keeps both parts in lowest terms with a positive denominator,
/// so structural equality is value equality.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        Self::new(BigRational::from_integer(re.into()), BigRational::from_integer(im.into()))
    }

    pub fn from_fracs(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        Self::new(
            BigRational::new(re_num.into(), re_den.into()),
            BigRational::new(im_num.into(), im_den.into()),
        )
    }

    pub fn real(re: BigRational) -> Self {
        Self::new(re, BigRational::zero())
    }

    pub fn i() -> Self {
        Self::from_ints(0, 1)
    }

    /// `i^k` for any integer `k`.
    pub fn i_pow(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Self::one(),
            1 => Self::from_ints(0, 1),
            2 => Self::from_ints(-1, 0),
            _ => Self::from_ints(0, -1),
        }
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    /// |z|^2, an exact rational.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sqr();
        Some(Self::new(&self.re / &n, -(&self.im / &n)))
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Integer power allowing negative exponents; `None` for 0^-k.
    pub fn powi(&self, e: i64) -> Option<Self> {
        if e >= 0 {
            Some(self.pow(e as u64))
        } else {
            self.inv().map(|v| v.pow(e.unsigned_abs()))
        }
    }

    /// Total bit-size of the four integers that define this number.
    pub fn bits(&self) -> u64 {
        self.re.numer().bits() + self.re.denom().bits() + self.im.numer().bits() + self.im.denom().bits()
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(ratio_to_f64(&self.re), ratio_to_f64(&self.im))
    }

    /// The defining quadruple `[re_num, re_den, im_num, im_den]`.
    pub fn to_quad(&self) -> [BigInt; 4] {
        [
            self.re.numer().clone(),
            self.re.denom().clone(),
            self.im.numer().clone(),
            self.im.denom().clone(),
        ]
    }

    pub fn from_quad(q: [BigInt; 4]) -> Option<Self> {
        let [rn, rd, inum, id] = q;
        if rd.is_zero() || id.is_zero() {
            return None;
        }
        Some(Self::new(BigRational::new(rn, rd), BigRational::new(inum, id)))
    }

    /// Writes `self = g / q` with `g` a Gaussian integer (as a pair) and `q > 0`.
    pub(crate) fn to_gaussian_integer_over(&self) -> (BigInt, BigInt, BigInt) {
        let q = self.re.denom().lcm(self.im.denom());
        let a = self.re.numer() * (&q / self.re.denom());
        let b = self.im.numer() * (&q / self.im.denom());
        (a, b, q)
    }

    /// Some exact k-th root in Q(i), if one exists.
    ///
    /// Candidates come from rounding the floating-point roots to Gaussian
    /// integers (after clearing denominators); every candidate is verified by
    /// exact powering, so a returned value is always correct.
    pub fn nth_root(&self, k: u32) -> Option<Self> {
        if k == 0 {
            return None;
        }
        if k == 1 || self.is_zero() {
            return Some(self.clone());
        }
        // self = g / q  =>  self = (g q^(k-1)) / q^k, root = root(g q^(k-1)) / q.
        let (a, b, q) = self.to_gaussian_integer_over();
        let scale = num_traits::pow(q.clone(), (k - 1) as usize);
        let (ga, gb) = (a * &scale, b * &scale);
        let (ra, rb) = gaussian_int_nth_root(&ga, &gb, k)?;
        let qr = BigRational::from_integer(q);
        Some(Self::new(BigRational::from_integer(ra) / &qr, BigRational::from_integer(rb) / qr))
    }
}

fn gaussian_int_nth_root(a: &BigInt, b: &BigInt, k: u32) -> Option<(BigInt, BigInt)> {
    let target = GaussianRational::new(
        BigRational::from_integer(a.clone()),
        BigRational::from_integer(b.clone()),
    );
    // modulus via exact integer root of the norm when possible
    let norm = a * a + b * b;
    let r2 = norm.nth_root(k);
    let modulus = (r2.to_f64()?).sqrt();
    if !modulus.is_finite() {
        return None;
    }
    let angle = ratio_free_atan2(b, a)?;
    let mut best: Vec<(f64, BigInt, BigInt)> = Vec::new();
    for j in 0..k {
        let theta = (angle + 2.0 * std::f64::consts::PI * j as f64) / k as f64;
        let (s, c) = theta.sin_cos();
        for (dx, dy) in [(0i64, 0i64), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            let x = BigInt::from((modulus * c).round() as i128) + dx;
            let y = BigInt::from((modulus * s).round() as i128) + dy;
            let cand = GaussianRational::new(BigRational::from_integer(x.clone()), BigRational::from_integer(y.clone()));
            if cand.pow(k as u64) == target {
                let arg = (y.to_f64().unwrap_or(0.0)).atan2(x.to_f64().unwrap_or(0.0));
                let arg = if arg < -1e-12 { arg + 2.0 * std::f64::consts::PI } else { arg.max(0.0) };
                best.push((arg, x, y));
            }
        }
    }
    // smallest argument in [0, 2pi) gives a deterministic choice (positive reals first)
    best.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap_or(std::cmp::Ordering::Equal));
    best.into_iter().next().map(|(_, x, y)| (x, y))
}

fn ratio_free_atan2(b: &BigInt, a: &BigInt) -> Option<f64> {
    let (fa, fb) = (a.to_f64()?, b.to_f64()?);
    if fa.is_finite() && fb.is_finite() {
        Some(fb.atan2(fa))
    } else {
        None
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // numerator or denominator overflow f64: keep the top 60 bits of each
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let nshift = (nb - 60).max(0);
    let dshift = (db - 60).max(0);
    let n = r.numer() >> nshift as usize;
    let d = r.denom() >> dshift as usize;
    let base = n.to_f64().unwrap_or(0.0) / d.to_f64().unwrap_or(1.0);
    base * 2f64.powi((nshift - dshift).clamp(-2000, 2000) as i32)
}

impl Zero for GaussianRational {
    fn zero() -> Self {
        Self::new(BigRational::zero(), BigRational::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for GaussianRational {
    fn one() -> Self {
        Self::new(BigRational::one(), BigRational::zero())
    }
}

impl<'a> Add<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn add(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re + &o.re, &self.im + &o.im)
    }
}

impl<'a> Sub<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn sub(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re - &o.re, &self.im - &o.im)
    }
}

impl<'a> Mul<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn mul(self, o: &GaussianRational) -> GaussianRational {
        if self.im.is_zero() && o.im.is_zero() {
            return GaussianRational::real(&self.re * &o.re);
        }
        GaussianRational::new(
            &self.re * &o.re - &self.im * &o.im,
            &self.re * &o.im + &self.im * &o.re,
        )
    }
}

impl<'a> Div<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn div(self, o: &GaussianRational) -> GaussianRational {
        self * &o.inv().expect("division by zero Gaussian rational")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for GaussianRational {
            type Output = GaussianRational;
            fn $m(self, o: GaussianRational) -> GaussianRational {
                (&self).$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational::new(-self.re, -self.im)
    }
}

impl Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational::new(-self.re.clone(), -self.im.clone())
    }
}

impl AddAssign<&GaussianRational> for GaussianRational {
    fn add_assign(&mut self, o: &GaussianRational) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

impl SubAssign<&GaussianRational> for GaussianRational {
    fn sub_assign(&mut self, o: &GaussianRational) {
        self.re -= &o.re;
        self.im -= &o.im;
    }
}

impl MulAssign<&GaussianRational> for GaussianRational {
    fn mul_assign(&mut self, o: &GaussianRational) {
        *self = &*self * o;
    }
}

impl From<i64> for GaussianRational {
    fn from(v: i64) -> Self {
        Self::from_ints(v, 0)
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}i", self.im),
            (false, false) => {
                let sign = if self.im.is_negative() { '-' } else { '+' };
                write!(f, "({}{}{}i)", self.re, sign, self.im.abs())
            }
        }
    }
}

impl fmt::Debug for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_reduction_is_structural() {
        let a = GaussianRational::from_fracs(2, 4, -3, -6);
        let b = GaussianRational::from_fracs(1, 2, 1, 2);
        assert_eq!(a, b);
        assert_eq!(a.re.denom(), &BigInt::from(2));
    }

    #[test]
    fn field_inverse() {
        let z = GaussianRational::from_fracs(3, 2, -1, 5);
        let w = z.inv().unwrap();
        assert_eq!(&z * &w, GaussianRational::one());
        assert!(GaussianRational::zero().inv().is_none());
    }

    #[test]
    fn i_powers_cycle() {
        let i = GaussianRational::i();
        for k in -8..8 {
            assert_eq!(GaussianRational::i_pow(k), i.powi(k).unwrap());
        }
    }

    #[test]
    fn exact_roots() {
        let two = GaussianRational::from(2);
        assert!(two.nth_root(2).is_none());
        assert_eq!(GaussianRational::from(4).nth_root(2).unwrap(), two);
        // (1+i)^2 = 2i
        let r = GaussianRational::from_ints(0, 2).nth_root(2).unwrap();
        assert_eq!(r.pow(2), GaussianRational::from_ints(0, 2));
        // 27/8 has cube root 3/2
        let c = GaussianRational::from_fracs(27, 8, 0, 1).nth_root(3).unwrap();
        assert_eq!(c, GaussianRational::from_fracs(3, 2, 0, 1));
        // -1 has a square root i in Q(i)
        assert_eq!(GaussianRational::from(-1).nth_root(2).unwrap().pow(2), GaussianRational::from(-1));
    }

    #[test]
    fn huge_values_convert_to_float() {
        let big = BigRational::from_integer(BigInt::from(1) << 2000usize);
        let v = ratio_to_f64(&(BigRational::one() / &big * BigRational::from_integer(BigInt::from(1) << 1999usize)));
        assert!((v - 0.5).abs() < 1e-12);
    }
}
