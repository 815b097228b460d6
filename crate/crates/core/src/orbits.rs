//! Forward orbits and the dynamical intersection count.
//!
//! Three representations of an orbit:
//! - `Exact`: Gaussian-rational points, bit-exact, capped per point;
//! - `Float`: complex disks (center, radius) propagated with outward-rounded
//!   disk arithmetic, so two points are either certified distinct (disjoint
//!   disks), certified to agree within the matching precision, or ambiguous;
//! - `Exponent`: for monic monomials `z^d` from a start `z0` that is neither
//!   zero nor a root of unity, `f^j(z0) = z0^(d^j)` and equality of points is
//!   equality of exponents.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::One;
use serde::{Serialize, Serializer};

use crate::algebra::{ExtPoint, GaussianRational as Q, RatMap};
use crate::entropy::SpherePoint;
use crate::error::{Error, Result};

pub const DEFAULT_POINT_BITS: u64 = 1 << 16;
pub const DEFAULT_PRECISION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitMode {
    Exact,
    Float,
    Exponent,
}

#[derive(Clone, Copy, Debug)]
pub struct OrbitOptions {
    pub mode: OrbitMode,
    /// Cap on the bit size of a single exact orbit point.
    pub point_bits: u64,
    /// Chordal matching precision for float orbits.
    pub precision: f64,
}

impl OrbitOptions {
    pub fn new(mode: OrbitMode) -> Self {
        OrbitOptions { mode, point_bits: DEFAULT_POINT_BITS, precision: DEFAULT_PRECISION }
    }
}

/// A complex disk `|z - center| <= radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

const U: f64 = f64::EPSILON;

impl Disk {
    pub fn point(c: Complex64) -> Self {
        Disk { center: c, radius: 0.0 }
    }

    fn rounded(center: Complex64, radius: f64) -> Self {
        Disk { center, radius: radius * (1.0 + 4.0 * U) + 4.0 * U * center.norm() }
    }

    fn add(self, o: Disk) -> Disk {
        Disk::rounded(self.center + o.center, self.radius + o.radius)
    }

    fn mul(self, o: Disk) -> Disk {
        let r = self.center.norm() * o.radius + o.center.norm() * self.radius + self.radius * o.radius;
        Disk::rounded(self.center * o.center, r)
    }

    fn inv(self) -> Option<Disk> {
        let m = self.center.norm_sqr() - self.radius * self.radius;
        if !(m > 0.0) || !m.is_finite() {
            return None;
        }
        Some(Disk::rounded(self.center.conj() / m, self.radius / m))
    }

    /// Upper bound on the chordal radius of the disk.
    pub fn chordal_radius(&self) -> f64 {
        let inner = (self.center.norm() - self.radius).max(0.0);
        2.0 * self.radius / (1.0 + inner * inner)
    }

    fn is_finite(&self) -> bool {
        self.center.re.is_finite() && self.center.im.is_finite() && self.radius.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OrbitValue {
    Exact(ExtPoint),
    Float(Disk),
    /// The point `z0^e`.
    Exponent(BigUint),
}

impl Serialize for OrbitValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OrbitValue::Exact(ExtPoint::Infinity) => s.serialize_str("inf"),
            OrbitValue::Exact(ExtPoint::Finite(q)) => q.serialize(s),
            OrbitValue::Float(d) => [d.center.re, d.center.im, d.radius].serialize(s),
            OrbitValue::Exponent(e) => s.serialize_str(&e.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitRecord {
    pub mode: OrbitMode,
    pub points: Vec<OrbitValue>,
    pub horizon: usize,
}

/// `d` when `f = z^d` exactly.
pub fn monomial_degree(f: &RatMap) -> Option<usize> {
    let p = f.as_poly()?;
    let d = p.degree();
    (p.support() == vec![d] && p.leading() == Q::one()).then_some(d)
}

fn exponent_start_ok(z0: &ExtPoint) -> bool {
    match z0 {
        ExtPoint::Infinity => false,
        ExtPoint::Finite(q) => {
            // the only roots of unity in Q(i) are the powers of i
            *q != Q::from_ints(0, 0) && !(0..4).any(|k| *q == Q::i_pow(k))
        }
    }
}

fn float_map(f: &RatMap) -> (Vec<Disk>, Vec<Disk>) {
    let nm = f.numeric();
    let widen = |v: Vec<Complex64>| -> Vec<Disk> {
        v.into_iter().map(|c| Disk { center: c, radius: 4.0 * U * c.norm() }).collect()
    };
    (widen(nm.num), widen(nm.den))
}

fn horner_disk(c: &[Disk], x: Disk) -> Disk {
    c.iter().rev().fold(Disk::point(Complex64::new(0.0, 0.0)), |acc, &a| acc.mul(x).add(a))
}

fn to_disk(q: &Q) -> Disk {
    let c = q.to_complex();
    Disk { center: c, radius: 2.0 * U * c.norm() }
}

/// `z0, f(z0), ..., f^n(z0)`.
pub fn forward_orbit(f: &RatMap, z0: &ExtPoint, n: usize, mode: OrbitMode) -> Result<OrbitRecord> {
    forward_orbit_with(f, z0, n, &OrbitOptions::new(mode))
}

pub fn forward_orbit_with(f: &RatMap, z0: &ExtPoint, n: usize, opts: &OrbitOptions) -> Result<OrbitRecord> {
    if n == 0 {
        return Err(Error::Invalid("orbit horizon must be at least 1".into()));
    }
    let points = match opts.mode {
        OrbitMode::Exact => {
            let mut pts = vec![z0.clone()];
            for _ in 0..n {
                let next = f.eval(pts.last().unwrap())?;
                if let ExtPoint::Finite(q) = &next {
                    let bits = q.bits();
                    if bits > opts.point_bits {
                        return Err(Error::CoefficientOverflowBudget { bits, cap: opts.point_bits });
                    }
                }
                pts.push(next);
            }
            pts.into_iter().map(OrbitValue::Exact).collect()
        }
        OrbitMode::Float => {
            let ExtPoint::Finite(q) = z0 else {
                return Err(Error::Invalid("float orbits start at a finite point".into()));
            };
            let (num, den) = float_map(f);
            let mut x = to_disk(q);
            let mut pts = vec![OrbitValue::Float(x)];
            for _ in 0..n {
                let blowup = |d: Disk| Error::IntervalBlowup { radius: d.chordal_radius(), precision: opts.precision };
                let d = horner_disk(&den, x);
                let inv = d.inv().ok_or_else(|| blowup(d))?;
                x = horner_disk(&num, x).mul(inv);
                if !x.is_finite() || x.chordal_radius() >= opts.precision {
                    return Err(blowup(x));
                }
                pts.push(OrbitValue::Float(x));
            }
            pts
        }
        OrbitMode::Exponent => {
            let d = monomial_degree(f)
                .ok_or_else(|| Error::Invalid("exponent mode needs a monic monomial z^d".into()))?;
            if !exponent_start_ok(z0) {
                return Err(Error::Invalid("exponent mode needs z0 finite, nonzero and not a root of unity".into()));
            }
            let mut e = BigUint::one();
            let mut pts = vec![OrbitValue::Exponent(e.clone())];
            for _ in 0..n {
                e *= d;
                pts.push(OrbitValue::Exponent(e.clone()));
            }
            pts
        }
    };
    Ok(OrbitRecord { mode: opts.mode, points, horizon: n })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DipVerdict {
    #[serde(rename = "STRONG")]
    Strong,
    #[serde(rename = "WEAK")]
    Weak,
}

#[derive(Clone, Debug, Serialize)]
pub struct DipReport {
    pub mode: OrbitMode,
    pub horizon: usize,
    /// Distinct points shared by both orbits.
    pub count: usize,
    /// Pairs that could neither be certified equal nor distinct (float mode).
    pub ambiguous: usize,
    pub threshold: u64,
    pub verdict: DipVerdict,
    /// Either orbit revisits a point: `z0` is preperiodic and the intersection
    /// property is vacuous.
    pub periodic: bool,
    /// `(j, k)` with `P^j(z0) = Q^k(z0)`, first occurrence in each orbit.
    pub matches: Vec<(usize, usize)>,
}

enum Cmp {
    Equal,
    Distinct,
    Ambiguous,
}

fn compare_disks(a: &Disk, b: &Disk, precision: f64) -> Cmp {
    let (pa, pb) = (SpherePoint::Finite(a.center), SpherePoint::Finite(b.center));
    let d = pa.chordal(&pb);
    let (ra, rb) = (a.chordal_radius(), b.chordal_radius());
    if (a.center - b.center).norm() > a.radius + b.radius {
        Cmp::Distinct
    } else if d + ra + rb <= precision {
        Cmp::Equal
    } else {
        Cmp::Ambiguous
    }
}

/// Indices of first occurrences, plus whether a value repeats.
fn first_occurrences(pts: &[OrbitValue], precision: f64) -> (Vec<usize>, bool) {
    let mut firsts = Vec::new();
    let mut repeated = false;
    match pts.first() {
        Some(OrbitValue::Float(_)) => {
            for (i, p) in pts.iter().enumerate() {
                let OrbitValue::Float(a) = p else { unreachable!() };
                let dup = firsts.iter().any(|&j: &usize| {
                    let OrbitValue::Float(b) = &pts[j] else { unreachable!() };
                    matches!(compare_disks(a, b, precision), Cmp::Equal)
                });
                if dup {
                    repeated = true;
                } else {
                    firsts.push(i);
                }
            }
        }
        _ => {
            let mut seen: HashMap<Key, usize> = HashMap::new();
            for (i, p) in pts.iter().enumerate() {
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(key(p)) {
                    e.insert(i);
                    firsts.push(i);
                } else {
                    repeated = true;
                }
            }
        }
    }
    (firsts, repeated)
}

#[derive(PartialEq, Eq, Hash)]
enum Key<'a> {
    Point(&'a ExtPoint),
    Exp(&'a BigUint),
}

fn key(v: &OrbitValue) -> Key<'_> {
    match v {
        OrbitValue::Exact(p) => Key::Point(p),
        OrbitValue::Exponent(e) => Key::Exp(e),
        OrbitValue::Float(_) => unreachable!("float values are compared by disks"),
    }
}

/// Counts shared points of the forward orbits of `z0` under `p` and `q`.
pub fn dip_test(
    p: &RatMap,
    q: &RatMap,
    z0: &ExtPoint,
    horizon: usize,
    threshold: Option<u64>,
    opts: &OrbitOptions,
) -> Result<DipReport> {
    let (op, oq) = rayon::join(|| forward_orbit_with(p, z0, horizon, opts), || forward_orbit_with(q, z0, horizon, opts));
    let (op, oq) = (op?, oq?);
    let (fp, rep_p) = first_occurrences(&op.points, opts.precision);
    let (fq, rep_q) = first_occurrences(&oq.points, opts.precision);
    let mut matches = Vec::new();
    let mut ambiguous = 0;
    match opts.mode {
        OrbitMode::Float => {
            for &j in &fp {
                let OrbitValue::Float(a) = &op.points[j] else { unreachable!() };
                let mut found = None;
                for &k in &fq {
                    let OrbitValue::Float(b) = &oq.points[k] else { unreachable!() };
                    match compare_disks(a, b, opts.precision) {
                        Cmp::Equal if found.is_none() => found = Some(k),
                        Cmp::Ambiguous => ambiguous += 1,
                        _ => {}
                    }
                }
                if let Some(k) = found {
                    matches.push((j, k));
                }
            }
        }
        _ => {
            let index: HashMap<Key, usize> = fq.iter().map(|&k| (key(&oq.points[k]), k)).collect();
            for &j in &fp {
                if let Some(&k) = index.get(&key(&op.points[j])) {
                    matches.push((j, k));
                }
            }
        }
    }
    let threshold = threshold.unwrap_or((p.degree() * q.degree()) as u64);
    let count = matches.len();
    let verdict = if count as u64 > threshold { DipVerdict::Strong } else { DipVerdict::Weak };
    Ok(DipReport { mode: opts.mode, horizon, count, ambiguous, threshold, verdict, periodic: rep_p || rep_q, matches })
}

/// Picks the exponent representation when both maps are monic monomials and
/// `z0` allows it, otherwise exact arithmetic.
pub fn preferred_mode(p: &RatMap, q: &RatMap, z0: &ExtPoint) -> OrbitMode {
    if monomial_degree(p).is_some() && monomial_degree(q).is_some() && exponent_start_ok(z0) {
        OrbitMode::Exponent
    } else {
        OrbitMode::Exact
    }
}

/// Re-checks the matches of an exact-mode report by independent evaluation.
pub fn reverify_matches(p: &RatMap, q: &RatMap, z0: &ExtPoint, report: &DipReport) -> Result<bool> {
    if report.mode == OrbitMode::Float {
        return Ok(false);
    }
    for &(j, k) in &report.matches {
        let ok = match report.mode {
            OrbitMode::Exponent => {
                let (dp, dq) = (monomial_degree(p), monomial_degree(q));
                match (dp, dq) {
                    (Some(a), Some(b)) => BigUint::from(a).pow(j as u32) == BigUint::from(b).pow(k as u32),
                    _ => false,
                }
            }
            _ => {
                let walk = |f: &RatMap, steps: usize| -> Result<ExtPoint> {
                    (0..steps).try_fold(z0.clone(), |x, _| f.eval(&x))
                };
                walk(p, j)? == walk(q, k)?
            }
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}
