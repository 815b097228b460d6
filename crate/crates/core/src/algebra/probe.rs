//! Modular fingerprints of compositions.
//!
//! Coefficients are reduced into GF(p^2) = GF(p)[i] with p = 2^61 - 1
//! (p = 3 mod 4, so i^2 = -1 has no root in GF(p)). Reduction is a ring
//! homomorphism on every coefficient whose denominator is a unit mod p, so
//! two compositions that disagree at a sample point where both are defined
//! are certainly different maps. Agreement proves nothing; callers then run
//! the exact check.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gaussian::GaussianRational as Q;
use super::ratmap::RatMap;

const P: u64 = (1 << 61) - 1;
// p^2 - 1 = 2 * (2^60 - 1) * 2^61
const P2_MINUS_1: u128 = (P as u128) * (P as u128) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fp2 {
    re: u64,
    im: u64,
}

fn add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= P {
        s - P
    } else {
        s
    }
}

fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + P - b
    }
}

fn mul(a: u64, b: u64) -> u64 {
    let prod = (a as u128) * (b as u128);
    let lo = (prod as u64) & P;
    let hi = (prod >> 61) as u64;
    add(lo, hi % P)
}

fn pow_fp(mut a: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(acc, a);
        }
        a = mul(a, a);
        e >>= 1;
    }
    acc
}

impl Fp2 {
    pub const ZERO: Fp2 = Fp2 { re: 0, im: 0 };
    pub const ONE: Fp2 = Fp2 { re: 1, im: 0 };
    pub const I: Fp2 = Fp2 { re: 0, im: 1 };

    fn add(self, o: Fp2) -> Fp2 {
        Fp2 { re: add(self.re, o.re), im: add(self.im, o.im) }
    }

    fn mul(self, o: Fp2) -> Fp2 {
        Fp2 {
            re: sub(mul(self.re, o.re), mul(self.im, o.im)),
            im: add(mul(self.re, o.im), mul(self.im, o.re)),
        }
    }

    fn inv(self) -> Option<Fp2> {
        let n = add(mul(self.re, self.re), mul(self.im, self.im));
        if n == 0 {
            return None;
        }
        let ninv = pow_fp(n, P - 2);
        Some(Fp2 { re: mul(self.re, ninv), im: mul(sub(0, self.im), ninv) })
    }

    fn pow(self, mut e: u128) -> Fp2 {
        let mut acc = Fp2::ONE;
        let mut base = self;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        acc
    }
}

fn reduce_int(b: &BigInt) -> u64 {
    let m = b.mod_floor(&BigInt::from(P));
    m.to_u64().expect("reduced below p")
}

fn reduce_q(q: &Q) -> Option<Fp2> {
    let rd = reduce_int(q.re.denom());
    let id = reduce_int(q.im.denom());
    if rd == 0 || id == 0 {
        return None;
    }
    let re = mul(reduce_int(q.re.numer()), pow_fp(rd, P - 2));
    let im = mul(reduce_int(q.im.numer()), pow_fp(id, P - 2));
    Some(Fp2 { re, im })
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// A map reduced into GF(p^2).
#[derive(Clone, Debug)]
pub struct ReducedMap {
    num: Vec<Fp2>,
    den: Vec<Fp2>,
}

impl ReducedMap {
    pub fn eval(&self, x: Fp2) -> Option<Fp2> {
        let horner = |c: &[Fp2]| c.iter().rev().fold(Fp2::ZERO, |acc, &a| acc.mul(x).add(a));
        let d = horner(&self.den);
        Some(horner(&self.num).mul(d.inv()?))
    }
}

/// Random evaluation points plus a root of unity compatible with every twist
/// the probe was built for.
pub struct Probe {
    points: Vec<Fp2>,
    zeta: Option<(u64, Fp2)>,
}

impl Probe {
    pub fn new(maps: &[&RatMap], points: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_1d);
        let pts = (0..points)
            .map(|_| Fp2 { re: rng.gen_range(1..P), im: rng.gen_range(0..P) })
            .collect();
        let mut order: u64 = 4;
        for f in maps {
            let den = *f.twist().angle().denom() as u64;
            order = order.lcm(&den.max(1));
        }
        let zeta = if P2_MINUS_1.is_multiple_of(order as u128) {
            primitive_root(order, &mut rng).map(|z| (order, z))
        } else {
            None
        };
        Probe { points: pts, zeta }
    }

    pub fn reduce(&self, f: &RatMap) -> Option<ReducedMap> {
        let angle = f.twist().angle();
        let mult = if angle.numer() == &0 {
            Fp2::ONE
        } else {
            let (order, z) = self.zeta?;
            let den = *angle.denom() as u64;
            if order % den != 0 {
                return None;
            }
            z.pow((*angle.numer() as u64 * (order / den)) as u128)
        };
        let num = f
            .num()
            .coeffs()
            .iter()
            .map(|c| reduce_q(c).map(|v| v.mul(mult)))
            .collect::<Option<Vec<_>>>()?;
        let den = f.den().coeffs().iter().map(reduce_q).collect::<Option<Vec<_>>>()?;
        Some(ReducedMap { num, den })
    }

    /// True only when `left^m` and `right^n` certainly differ.
    pub fn iterates_differ(&self, left: &RatMap, m: u32, right: &RatMap, n: u32) -> bool {
        let (Some(l), Some(r)) = (self.reduce(left), self.reduce(right)) else {
            return false;
        };
        self.points.iter().any(|&x| {
            let a = (0..m).try_fold(x, |acc, _| l.eval(acc));
            let b = (0..n).try_fold(x, |acc, _| r.eval(acc));
            matches!((a, b), (Some(a), Some(b)) if a != b)
        })
    }

    /// True only when the compositions `words_l[0] o words_l[1] o ...` and the
    /// same for `words_r` certainly differ.
    pub fn words_differ(&self, words_l: &[&RatMap], words_r: &[&RatMap]) -> bool {
        let reduce_all = |w: &[&RatMap]| w.iter().map(|f| self.reduce(f)).collect::<Option<Vec<_>>>();
        let (Some(l), Some(r)) = (reduce_all(words_l), reduce_all(words_r)) else {
            return false;
        };
        let run = |w: &[ReducedMap], x: Fp2| w.iter().rev().try_fold(x, |acc, f| f.eval(acc));
        self.points.iter().any(|&x| matches!((run(&l, x), run(&r, x)), (Some(a), Some(b)) if a != b))
    }
}

/// A primitive `order`-th root of unity mapping to `i` under `z -> z^(order/4)`.
fn primitive_root(order: u64, rng: &mut ChaCha8Rng) -> Option<Fp2> {
    let primes = prime_factors(order);
    for _ in 0..64 {
        let x = Fp2 { re: rng.gen_range(1..P), im: rng.gen_range(1..P) };
        let y = x.pow(P2_MINUS_1 / order as u128);
        if primes.iter().all(|&q| y.pow((order / q) as u128) != Fp2::ONE) {
            let quarter = y.pow((order / 4) as u128);
            return Some(if quarter == Fp2::I { y } else { y.inv()? });
        }
    }
    None
}
