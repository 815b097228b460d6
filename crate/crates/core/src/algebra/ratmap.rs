//! Reduced rational maps `e^{2 pi i t} * num/den` over Q(i).
//!
//! Roots of unity outside Q(i) (cube roots, for instance) never appear as
//! coefficients. They are carried as an exact angle `t` in `[0, 1/4)`; any
//! quarter turn is absorbed into the numerator, which makes the
//! representation unique and equality structural.

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::Serialize;

use super::gaussian::GaussianRational as Q;
use super::poly::Poly;
use crate::error::{Error, Result};

pub const DEFAULT_BIT_BUDGET: u64 = 1 << 20;

/// Upper bound on the total coefficient bit-size of any map produced by
/// composition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub bits: u64,
}

impl Budget {
    pub fn new(bits: u64) -> Self {
        Self { bits }
    }

    /// `RATSEMI_BUDGET_BITS` if set and valid, otherwise 2^20.
    pub fn from_env() -> Self {
        static CACHED: OnceLock<u64> = OnceLock::new();
        let bits = *CACHED.get_or_init(|| {
            std::env::var("RATSEMI_BUDGET_BITS")
                .ok()
                .and_then(|v| v.trim().parse::<u64>().ok())
                .filter(|&v| v > 0)
                .unwrap_or(DEFAULT_BIT_BUDGET)
        });
        Self { bits }
    }

    pub fn check(&self, f: &RatMap) -> Result<()> {
        let bits = f.bits();
        if bits > self.bits {
            Err(Error::CoefficientOverflowBudget { bits, cap: self.bits })
        } else {
            Ok(())
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::from_env()
    }
}

/// A rotation angle `t` in `[0, 1/4)`; the map multiplier is `e^{2 pi i t}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Twist(Ratio<i64>);

impl Twist {
    pub fn zero() -> Self {
        Twist(Ratio::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn angle(&self) -> Ratio<i64> {
        self.0
    }

    /// Splits an arbitrary angle (mod 1) into a canonical twist and a power
    /// of `i`.
    pub fn canonical(angle: Ratio<i64>) -> (Twist, i64) {
        let four = angle * 4;
        let q = four.floor();
        let r = (four - q) / 4;
        (Twist(r), q.to_integer().rem_euclid(4))
    }

    pub fn to_complex(&self) -> Complex64 {
        let a = *self.0.numer() as f64 / *self.0.denom() as f64;
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * a)
    }
}

impl fmt::Debug for Twist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of the Riemann sphere with exact coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtPoint {
    Finite(Q),
    Infinity,
}

/// `twist * num / den` with `gcd(num, den) = 1` and `den` monic.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RatMap {
    twist: Twist,
    num: Poly,
    den: Poly,
}

impl RatMap {
    /// Reduces `num/den`; rejects constants and a zero denominator.
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        let f = Self::reduce(Twist::zero(), num, den)?;
        if f.degree() == 0 {
            return Err(Error::ConstantMap);
        }
        Ok(f)
    }

    /// Like [`RatMap::new`] with a root-of-unity multiplier `e^{2 pi i angle}`.
    pub fn with_rotation(angle: Ratio<i64>, num: Poly, den: Poly) -> Result<Self> {
        let f = Self::new(num, den)?;
        Ok(f.rotate(angle))
    }

    pub fn poly(p: Poly) -> Result<Self> {
        Self::new(p, Poly::one())
    }

    pub fn identity() -> Self {
        Self { twist: Twist::zero(), num: Poly::z(), den: Poly::one() }
    }

    /// `e^{2 pi i k/n} z`.
    pub fn rotation(k: i64, n: i64) -> Self {
        Self::identity().rotate(Ratio::new(k, n))
    }

    /// `z^d`.
    pub fn power(d: usize) -> Self {
        Self::poly(Poly::monomial(Q::one(), d)).expect("nonconstant")
    }

    fn reduce(twist: Twist, num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Invalid("zero denominator".into()));
        }
        if num.is_zero() {
            return Ok(Self { twist: Twist::zero(), num, den: Poly::one() });
        }
        let (num, den) = if den.is_constant() {
            (num, den)
        } else {
            let g = Poly::gcd(&num, &den);
            if g.is_constant() {
                (num, den)
            } else {
                (num.div_exact(&g).expect("gcd"), den.div_exact(&g).expect("gcd"))
            }
        };
        let lead_inv = den.leading().inv().expect("nonzero");
        Ok(Self { twist, num: num.scale(&lead_inv), den: den.monic() })
    }

    /// Multiplies the map by `e^{2 pi i angle}`.
    pub fn rotate(&self, angle: Ratio<i64>) -> Self {
        let (twist, q) = Twist::canonical(self.twist.0 + angle);
        Self { twist, num: self.num.scale(&Q::i_pow(q)), den: self.den.clone() }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn twist(&self) -> Twist {
        self.twist
    }

    pub fn is_twisted(&self) -> bool {
        !self.twist.is_zero()
    }

    pub fn degree(&self) -> usize {
        self.num.degree().max(self.den.degree())
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    /// The polynomial when the map is one and carries no twist.
    pub fn as_poly(&self) -> Option<&Poly> {
        (self.is_polynomial() && !self.is_twisted()).then_some(&self.num)
    }

    pub fn bits(&self) -> u64 {
        self.num.bits() + self.den.bits()
    }

    /// The twist-free part `num/den`.
    pub fn untwisted(&self) -> Self {
        Self { twist: Twist::zero(), num: self.num.clone(), den: self.den.clone() }
    }

    /// `self o inner`, within the ambient budget.
    pub fn compose(&self, inner: &RatMap) -> Result<RatMap> {
        self.compose_within(inner, &Budget::default())
    }

    pub fn compose_within(&self, inner: &RatMap, budget: &Budget) -> Result<RatMap> {
        // self(beta * w) = beta^(j0 - j1) * self~(w) when the support allows it
        let beta = inner.twist.0;
        let (outer_num, a0) = pull_twist(&self.num, beta)?;
        let (outer_den, a1) = pull_twist(&self.den, beta)?;
        let angle = self.twist.0 + beta * (a0 - a1);
        let out = if outer_den.is_constant() && inner.is_polynomial() {
            let inner_poly = inner.num.scale(&inner.den.leading().inv().expect("nonzero"));
            let num = outer_num.compose(&inner_poly).scale(&outer_den.leading().inv().expect("nonzero"));
            Self { twist: Twist::zero(), num, den: Poly::one() }
        } else {
            let k = outer_num.degree().max(outer_den.degree());
            let num = homogeneous_compose(&outer_num, k, &inner.num, &inner.den);
            let den = homogeneous_compose(&outer_den, k, &inner.num, &inner.den);
            Self::reduce(Twist::zero(), num, den)?
        };
        let out = out.rotate(angle);
        budget.check(&out)?;
        Ok(out)
    }

    /// `n`-fold self-composition by binary powering. Iterates of one map
    /// commute, so each product puts the lower-degree factor outside, which
    /// keeps Horner's scheme cheap.
    pub fn iterate(&self, n: u32) -> Result<RatMap> {
        self.iterate_within(n, &Budget::default())
    }

    pub fn iterate_within(&self, n: u32, budget: &Budget) -> Result<RatMap> {
        if n == 0 {
            return Err(Error::Invalid("iterate count must be at least 1".into()));
        }
        let mut acc: Option<RatMap> = None;
        let mut base = self.clone();
        let mut e = n;
        loop {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) if a.degree() <= base.degree() => a.compose_within(&base, budget)?,
                    Some(a) => base.compose_within(&a, budget)?,
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.compose_within(&base, budget)?;
        }
        Ok(acc.expect("n >= 1"))
    }

    /// Exact quotient-rule derivative. The result may be a constant function
    /// (for affine maps), which is the one place a degree-0 value appears.
    pub fn derivative(&self) -> RatMap {
        let num = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        let den = &self.den * &self.den;
        let mut d = Self::reduce(Twist::zero(), num, den).expect("nonzero denominator");
        d.twist = self.twist;
        d
    }

    /// Exact evaluation; fails on twisted maps.
    pub fn eval(&self, x: &ExtPoint) -> Result<ExtPoint> {
        if self.is_twisted() {
            return Err(Error::NotRepresentable);
        }
        match x {
            ExtPoint::Finite(v) => {
                let d = self.den.eval(v);
                if d.is_zero() {
                    Ok(ExtPoint::Infinity)
                } else {
                    Ok(ExtPoint::Finite(&self.num.eval(v) / &d))
                }
            }
            ExtPoint::Infinity => Ok(self.value_at_infinity_exact()),
        }
    }

    fn value_at_infinity_exact(&self) -> ExtPoint {
        let (dn, dd) = (self.num.degree(), self.den.degree());
        if self.num.is_zero() {
            ExtPoint::Finite(Q::zero())
        } else if dn > dd {
            ExtPoint::Infinity
        } else if dn == dd {
            ExtPoint::Finite(&self.num.leading() / &self.den.leading())
        } else {
            ExtPoint::Finite(Q::zero())
        }
    }

    /// Floating-point coefficient data for numerical kernels.
    pub fn numeric(&self) -> NumericMap {
        let mult = self.twist.to_complex();
        NumericMap {
            num: self.num.to_complex().into_iter().map(|c| c * mult).collect(),
            den: self.den.to_complex(),
        }
    }
}

/// Rewrites `p(beta w)` as `beta^a * p~(w)` with `p~` over Q(i).
fn pull_twist(p: &Poly, beta: Ratio<i64>) -> Result<(Poly, i64)> {
    if beta.is_zero() || p.is_zero() {
        return Ok((p.clone(), 0));
    }
    let support = p.support();
    let j0 = support[0] as i64;
    let mut coeffs = Vec::with_capacity(p.coeffs().len());
    for (j, c) in p.coeffs().iter().enumerate() {
        if c.is_zero() {
            coeffs.push(Q::zero());
            continue;
        }
        // beta^(j - j0) must be a power of i
        let rel = beta * (j as i64 - j0) * 4;
        if !rel.is_integer() {
            return Err(Error::NotRepresentable);
        }
        coeffs.push(c * &Q::i_pow(rel.to_integer()));
    }
    Ok((Poly::new(coeffs), j0))
}

/// `sum_j c_j n^j d^(k-j)` for `p = sum_j c_j z^j`.
fn homogeneous_compose(p: &Poly, k: usize, n: &Poly, d: &Poly) -> Poly {
    let mut npow = vec![Poly::one()];
    for _ in 0..k {
        let next = npow.last().unwrap() * n;
        npow.push(next);
    }
    let mut dpow = vec![Poly::one()];
    for _ in 0..k {
        let next = dpow.last().unwrap() * d;
        dpow.push(next);
    }
    let mut acc = Poly::zero();
    for (j, c) in p.coeffs().iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        acc = &acc + &(&npow[j] * &dpow[k - j]).scale(c);
    }
    acc
}

/// Complex coefficient data of a map, lowest degree first.
#[derive(Clone, Debug)]
pub struct NumericMap {
    pub num: Vec<Complex64>,
    pub den: Vec<Complex64>,
}

impl NumericMap {
    pub fn degree(&self) -> usize {
        self.num.len().max(self.den.len()).saturating_sub(1)
    }
}

pub fn maps_equal(f: &RatMap, g: &RatMap) -> bool {
    f == g
}

pub fn compose(f: &RatMap, g: &RatMap) -> Result<RatMap> {
    f.compose(g)
}

pub fn iterate(f: &RatMap, n: u32) -> Result<RatMap> {
    f.iterate(n)
}

pub fn derivative(f: &RatMap) -> RatMap {
    f.derivative()
}

impl fmt::Display for RatMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_twisted() {
            write!(f, "e^(2pi i {:?})*", self.twist)?;
        }
        if self.den.is_one_poly() {
            write!(f, "({})", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

impl fmt::Debug for RatMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Poly {
    fn is_one_poly(&self) -> bool {
        self.degree() == 0 && self.leading().is_one()
    }
}

/// `z -> (a z + b) / (c z + d)` with `ad - bc != 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MobiusMap {
    pub a: Q,
    pub b: Q,
    pub c: Q,
    pub d: Q,
}

impl MobiusMap {
    pub fn new(a: Q, b: Q, c: Q, d: Q) -> Result<Self> {
        if (&(&a * &d) - &(&b * &c)).is_zero() {
            return Err(Error::Invalid("singular Mobius map".into()));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn identity() -> Self {
        Self { a: Q::one(), b: Q::zero(), c: Q::zero(), d: Q::one() }
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d.clone(), b: -&self.b, c: -&self.c, d: self.a.clone() }
    }

    /// `self o other`.
    pub fn then_after(&self, other: &MobiusMap) -> Self {
        Self {
            a: &(&self.a * &other.a) + &(&self.b * &other.c),
            b: &(&self.a * &other.b) + &(&self.b * &other.d),
            c: &(&self.c * &other.a) + &(&self.d * &other.c),
            d: &(&self.c * &other.b) + &(&self.d * &other.d),
        }
    }

    pub fn to_ratmap(&self) -> RatMap {
        RatMap::new(
            Poly::new(vec![self.b.clone(), self.a.clone()]),
            Poly::new(vec![self.d.clone(), self.c.clone()]),
        )
        .expect("invertible Mobius map is nonconstant")
    }
}

/// `z -> scale * z + shift`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AffineMap {
    pub scale: Q,
    pub shift: Q,
}

impl AffineMap {
    pub fn new(scale: Q, shift: Q) -> Result<Self> {
        if scale.is_zero() {
            return Err(Error::Invalid("affine scale must be nonzero".into()));
        }
        Ok(Self { scale, shift })
    }

    pub fn identity() -> Self {
        Self { scale: Q::one(), shift: Q::zero() }
    }

    pub fn inverse(&self) -> Self {
        let inv = self.scale.inv().expect("nonzero scale");
        Self { shift: -&(&self.shift * &inv), scale: inv }
    }

    pub fn to_mobius(&self) -> MobiusMap {
        MobiusMap { a: self.scale.clone(), b: self.shift.clone(), c: Q::zero(), d: Q::one() }
    }

    pub fn to_poly(&self) -> Poly {
        Poly::new(vec![self.shift.clone(), self.scale.clone()])
    }

    pub fn to_ratmap(&self) -> RatMap {
        RatMap::poly(self.to_poly()).expect("degree one")
    }
}

/// `m o f o m^{-1}`.
pub fn conjugate(f: &RatMap, m: &MobiusMap) -> Result<RatMap> {
    let mf = m.to_ratmap().compose(f)?;
    mf.compose(&m.inverse().to_ratmap())
}

/// Affine `A` and monic centered `A o P o A^{-1}`.
///
/// Centering is a translation by the mean of the roots; the scaling needs a
/// `(deg-1)`-th root of the leading coefficient, reported as `NeedsRadical`
/// when Q(i) has none.
pub fn normalize_centered(p: &Poly) -> Result<(AffineMap, Poly)> {
    let d = p.degree();
    if d < 2 {
        return Err(Error::Invalid("normalization needs degree >= 2".into()));
    }
    let lead = p.leading();
    let center = -&(&p.coeff(d - 1) / &(&lead * &Q::from(d as i64)));
    let a = lead.nth_root((d - 1) as u32).ok_or_else(|| Error::NeedsRadical {
        root: (d - 1) as u32,
        value: lead.to_string(),
    })?;
    // A(z) = a (z - center)
    let affine = AffineMap::new(a.clone(), -&(&a * &center))?;
    let conj = conjugate_poly(p, &affine);
    debug_assert!(conj.is_monic() && conj.coeff(d - 1).is_zero());
    Ok((affine, conj))
}

/// `A o P o A^{-1}` for an affine `A`, staying in polynomials.
pub fn conjugate_poly(p: &Poly, a: &AffineMap) -> Poly {
    let inv = a.inverse().to_poly();
    a.to_poly().compose(&p.compose(&inv))
}

/// Translation-only centering (always possible in Q(i)).
pub fn center_poly(p: &Poly) -> (AffineMap, Poly) {
    let d = p.degree();
    let center = -&(&p.coeff(d - 1) / &(&p.leading() * &Q::from(d as i64)));
    let t = AffineMap { scale: Q::one(), shift: -&center };
    let c = conjugate_poly(p, &t);
    (t, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[i64]) -> RatMap {
        RatMap::poly(Poly::from_ints(c)).unwrap()
    }

    fn p5() -> RatMap {
        poly(&[0, 0, 1, 0, 0, 1])
    }

    #[test]
    fn power_maps_compose() {
        let z2 = RatMap::power(2);
        assert_eq!(z2.compose(&z2).unwrap(), RatMap::power(4));
        assert_eq!(z2.iterate(3).unwrap(), RatMap::power(8));
    }

    #[test]
    fn inversion_is_involution() {
        let inv = RatMap::new(Poly::one(), Poly::z()).unwrap();
        assert_eq!(inv.compose(&inv).unwrap(), RatMap::identity());
    }

    #[test]
    fn rotation_by_cube_root_pulls_through() {
        // P(w z) = w^2 P(z) for P = z^5 + z^2
        let w = RatMap::rotation(1, 3);
        let lhs = p5().compose(&w).unwrap();
        let rhs = RatMap::rotation(2, 3).compose(&p5()).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, p5().rotate(Ratio::new(2, 3)));
    }

    #[test]
    fn twist_canonicalization_absorbs_quarter_turns() {
        let a = RatMap::rotation(1, 2);
        assert!(!a.is_twisted());
        assert_eq!(a, poly(&[0, -1]));
        let b = RatMap::rotation(5, 12); // 5/12 = 1/4 + 1/6
        assert_eq!(b.twist().angle(), Ratio::new(1, 6));
        assert_eq!(b.num().leading(), Q::i());
    }

    #[test]
    fn unrepresentable_twist_is_an_error() {
        // (z + z^2) o (w z): supports {1,2} with a cube root twist
        let f = poly(&[0, 1, 1]);
        assert_eq!(f.compose(&RatMap::rotation(1, 3)), Err(Error::NotRepresentable));
    }

    #[test]
    fn iterate_examples() {
        assert_eq!(poly(&[0, 0, -1]).iterate(2).unwrap(), poly(&[0, 0, 0, 0, -1]));
        assert_eq!(RatMap::power(2).compose(&poly(&[0, 0, -1])).unwrap(), RatMap::power(4));
        assert_eq!(poly(&[-2, 0, 1]).iterate(2).unwrap(), poly(&[2, 0, -4, 0, 1]));
        assert_eq!(poly(&[-2, 0, 1]).iterate(5).unwrap().degree(), 32);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(RatMap::power(3).derivative(), poly(&[0, 0, 3]));
        let inv = RatMap::new(Poly::one(), Poly::z()).unwrap();
        assert_eq!(inv.derivative(), RatMap::new(Poly::from_ints(&[-1]), Poly::from_ints(&[0, 0, 1])).unwrap());
    }

    #[test]
    fn conjugation_examples() {
        let m = AffineMap::new(Q::one(), Q::one()).unwrap().to_mobius();
        assert_eq!(conjugate(&RatMap::power(2), &m).unwrap(), poly(&[2, -2, 1]));
        let f = RatMap::new(Poly::from_ints(&[1, 0, 3]), Poly::from_ints(&[2, 1])).unwrap();
        assert_eq!(conjugate(&f, &MobiusMap::identity()).unwrap(), f);
        let m = MobiusMap::new(Q::from(2), Q::from(1), Q::from(1), Q::from(3)).unwrap();
        let back = conjugate(&conjugate(&f, &m).unwrap(), &m.inverse()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn normalization_examples() {
        let (a, q) = normalize_centered(&Poly::from_ints(&[0, 0, 1, 0, 0, 1])).unwrap();
        assert_eq!(a, AffineMap::identity());
        assert_eq!(q, Poly::from_ints(&[0, 0, 1, 0, 0, 1]));
        let (a, q) = normalize_centered(&Poly::from_ints(&[0, 2, 1])).unwrap();
        // (z+1)^2 - 1 shifted by z+1 on both sides is z^2
        assert_eq!(a.to_poly(), Poly::from_ints(&[1, 1]));
        assert_eq!(q, Poly::from_ints(&[0, 0, 1]));
        // 2z^2 is conjugate to z^2 by z -> 2z
        let (a, q) = normalize_centered(&Poly::from_ints(&[0, 0, 2])).unwrap();
        assert_eq!(a.to_poly(), Poly::from_ints(&[0, 2]));
        assert_eq!(q, Poly::from_ints(&[0, 0, 1]));
        // 2z^3 would need sqrt(2)
        assert!(matches!(
            normalize_centered(&Poly::from_ints(&[0, 0, 0, 2])),
            Err(Error::NeedsRadical { root: 2, .. })
        ));
    }

    #[test]
    fn budget_turns_growth_into_error() {
        let f = poly(&[3, 0, 7]);
        let tiny = Budget::new(64);
        assert!(matches!(f.iterate_within(4, &tiny), Err(Error::CoefficientOverflowBudget { .. })));
    }

    #[test]
    fn constants_rejected() {
        assert_eq!(RatMap::new(Poly::from_ints(&[3]), Poly::one()), Err(Error::ConstantMap));
        assert_eq!(
            RatMap::new(Poly::from_ints(&[0, 2]), Poly::from_ints(&[0, 1])),
            Err(Error::ConstantMap)
        );
    }
}
