//! Exact decision procedures for functional equations between maps.
//!
//! Rotation groups are handled through exponent arithmetic on the support of
//! a monic centered polynomial: `P(lambda z) = lambda^r P(z)` holds for a
//! primitive `k`-th root `lambda` exactly when every support exponent is
//! congruent to `r` mod `k`. Every group claim is then confirmed by composing
//! with the twisted rotation map, so no radicals ever appear.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::algebra::probe::Probe;
use crate::algebra::ratmap::center_poly;
use crate::algebra::{normalize_centered, GaussianRational as Q, Poly, RatMap};
use crate::error::{Error, Result};
use crate::semigroup::cayley_ball;

/// The rotation `z -> e^{2 pi i k/n} z`, kept reduced with `0 <= k < n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Rotation {
    pub k: u64,
    pub n: u64,
}

impl Rotation {
    pub fn new(k: i64, n: u64) -> Self {
        assert!(n > 0, "rotation denominator must be positive");
        let k = k.rem_euclid(n as i64) as u64;
        let g = k.gcd(&n).max(1);
        if k == 0 {
            Rotation { k: 0, n: 1 }
        } else {
            Rotation { k: k / g, n: n / g }
        }
    }

    pub fn identity() -> Self {
        Rotation { k: 0, n: 1 }
    }

    pub fn is_identity(&self) -> bool {
        self.k == 0
    }

    /// Multiplicative order of the rotation.
    pub fn order(&self) -> u64 {
        self.n
    }

    pub fn then(&self, other: &Rotation) -> Rotation {
        let n = self.n.lcm(&other.n);
        Rotation::new((self.k * (n / self.n) + other.k * (n / other.n)) as i64, n)
    }

    pub fn pow(&self, e: u64) -> Rotation {
        Rotation::new(((self.k as u128 * e as u128) % self.n as u128) as i64, self.n)
    }

    pub fn inverse(&self) -> Rotation {
        Rotation::new(-(self.k as i64), self.n)
    }

    pub fn angle(&self) -> Ratio<i64> {
        Ratio::new(self.k as i64, self.n as i64)
    }

    pub fn to_map(&self) -> RatMap {
        RatMap::rotation(self.k as i64, self.n as i64)
    }
}

/// A finite cyclic group of rotations about `center` (in the coordinates of
/// the polynomial it was computed from).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RotationGroup {
    pub order: u64,
    pub center: Q,
}

impl RotationGroup {
    pub fn generator(&self) -> Rotation {
        Rotation::new(1, self.order)
    }

    pub fn element(&self, j: i64) -> Rotation {
        Rotation::new(j, self.order)
    }

    pub fn elements(&self) -> Vec<Rotation> {
        (0..self.order as i64).map(|j| self.element(j)).collect()
    }

    pub fn contains(&self, r: &Rotation) -> bool {
        self.order.is_multiple_of(r.n)
    }

    /// Index `j` with `r = generator^j`.
    pub fn index_of(&self, r: &Rotation) -> Option<u64> {
        self.contains(r).then(|| r.k * (self.order / r.n))
    }

    pub fn is_trivial(&self) -> bool {
        self.order == 1
    }
}

fn gcd_all(values: impl IntoIterator<Item = u64>) -> u64 {
    values.into_iter().fold(0, |g, v| g.gcd(&v))
}

fn require_centered(p: &Poly) -> Result<()> {
    let d = p.degree();
    if d < 2 {
        return Err(Error::Invalid("need degree >= 2".into()));
    }
    if !p.is_monic() || !p.coeff(d - 1).is_zero() {
        return Err(Error::NotCentered);
    }
    Ok(())
}

fn poly_map(p: &Poly) -> RatMap {
    RatMap::poly(p.clone()).expect("degree >= 2")
}

/// Confirms `P o rot = outer o P` by exact composition.
fn substitution_holds(p: &RatMap, rot: &Rotation, outer: &Rotation) -> Result<bool> {
    let lhs = p.compose(&rot.to_map())?;
    let rhs = outer.to_map().compose(p)?;
    Ok(lhs == rhs)
}

fn verified_group(p: &Poly, order: u64, image: impl Fn(&Rotation) -> Rotation) -> Result<RotationGroup> {
    let group = RotationGroup { order, center: Q::zero() };
    let g = group.generator();
    if !substitution_holds(&poly_map(p), &g, &image(&g))? {
        return Err(Error::Invalid(format!("substitution check failed for rotation group of order {order}")));
    }
    Ok(group)
}

/// `{lambda z : P(lambda z) = P(z)}` for monic centered `P`.
pub fn deck_group(p: &Poly) -> Result<RotationGroup> {
    require_centered(p)?;
    let order = gcd_all(p.support().into_iter().map(|j| j as u64));
    verified_group(p, order, |_| Rotation::identity())
}

/// `{lambda z : P(lambda z) = lambda P(z)}` for monic centered `P`.
pub fn aut_group(p: &Poly) -> Result<RotationGroup> {
    require_centered(p)?;
    let order = gcd_all(p.support().into_iter().map(|j| (j as i64 - 1).unsigned_abs()));
    verified_group(p, order, |r| *r)
}

/// `{lambda z : P(lambda z) = lambda^r P(z) for some r}`: the linear
/// symmetries of the Julia set of a monic centered non-power polynomial.
pub fn symmetry_group(p: &Poly) -> Result<RotationGroup> {
    require_centered(p)?;
    let support = p.support();
    if support.len() == 1 {
        return Err(Error::ExceptionalInput(format!(
            "z^{} has an infinite symmetry group",
            p.degree()
        )));
    }
    let top = p.degree() as u64;
    let order = gcd_all(support.iter().map(|&j| top - j as u64));
    let r = top % order;
    verified_group(p, order, |g| g.pow(r))
}

/// The multiplier `r` of the semiconjugacy action: `P o lambda = lambda^r o P`.
pub fn phi_multiplier(p: &Poly, group: &RotationGroup) -> u64 {
    p.degree() as u64 % group.order
}

/// The unique rotation `g'` with `P o g = g' o P`, for `g` in the symmetry
/// group of the monic centered `P`.
pub fn phi_action(p: &Poly, g: &Rotation) -> Result<Rotation> {
    let group = symmetry_group(p)?;
    if !group.contains(g) {
        return Err(Error::NotASymmetry { index: g.k as i64, order: g.n });
    }
    let image = g.pow(phi_multiplier(p, &group));
    if !substitution_holds(&poly_map(p), g, &image)? {
        return Err(Error::Invalid("semiconjugacy substitution failed".into()));
    }
    Ok(image)
}

/// `Q o R = Q o Q` and `R o Q = R o R`.
pub fn is_levin_pair(q: &RatMap, r: &RatMap) -> Result<bool> {
    check_degrees(q, r)?;
    let holds = q.compose(r)? == q.compose(q)? && r.compose(q)? == r.compose(r)?;
    debug_assert!(!holds || q.degree() == r.degree());
    Ok(holds)
}

pub fn commutes(p: &RatMap, q: &RatMap) -> Result<bool> {
    Ok(p.compose(q)? == q.compose(p)?)
}

fn check_degrees(p: &RatMap, q: &RatMap) -> Result<()> {
    if p.degree() < 2 || q.degree() < 2 {
        return Err(Error::Invalid("relation search needs degree >= 2 maps".into()));
    }
    Ok(())
}

fn exact_log(value: u64, base: u64) -> Option<u32> {
    let mut acc = base;
    let mut n = 1;
    while acc < value {
        acc = acc.checked_mul(base)?;
        n += 1;
    }
    (acc == value).then_some(n)
}

/// Smallest `(m, n)` by `deg P^m` with `P^m = Q^n` and `deg P^m <= max_degree`.
///
/// Only pairs with `(deg P)^m = (deg Q)^n` are examined. A modular
/// fingerprint discards most of them before any exact iterate is formed.
pub fn find_common_iterate(p: &RatMap, q: &RatMap, max_degree: u64) -> Result<Option<(u32, u32)>> {
    check_degrees(p, q)?;
    let (dp, dq) = (p.degree() as u64, q.degree() as u64);
    let probe = Probe::new(&[p, q], 3, 0x1234);
    let mut deg = dp;
    let mut m = 1u32;
    while deg <= max_degree {
        if let Some(n) = exact_log(deg, dq) {
            if !probe.iterates_differ(p, m, q, n) && p.iterate(m)? == q.iterate(n)? {
                return Ok(Some((m, n)));
            }
        }
        match deg.checked_mul(dp) {
            Some(next) => deg = next,
            None => break,
        }
        m += 1;
    }
    Ok(None)
}

/// Which alternative of the right-factor dichotomy a search landed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorBranch {
    /// `A = X o Z` and `B = Y o Z` with `deg Z > 1`.
    CommonRightFactor,
    /// `deg F > deg A = deg B`; no common right factor is promised.
    OuterDegreeDominates,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RightFactorReport {
    pub branch: FactorBranch,
    /// `(X, Y, Z)` when found.
    pub factor: Option<(Poly, Poly, Poly)>,
}

/// Expansion of `a` in powers of `z`, if every digit is a constant.
fn z_adic(a: &Poly, z: &Poly) -> Option<Poly> {
    let mut digits = Vec::new();
    let mut rest = a.clone();
    while rest.degree() >= z.degree() && !rest.is_zero() {
        let (q, r) = rest.div_rem(z);
        if !r.is_constant() {
            return None;
        }
        digits.push(r.coeff(0));
        rest = q;
    }
    if !rest.is_constant() {
        return None;
    }
    digits.push(rest.coeff(0));
    Some(Poly::new(digits))
}

/// Monic `Z` of degree `s` with `Z(0) = 0` whose `r`-th power matches the
/// top `s` coefficients of `a / lead(a)`; the only possible right factor of
/// that degree up to affine change.
fn approximate_root(a: &Poly, s: usize) -> Poly {
    let n = a.degree();
    let r = n / s;
    let target = a.monic();
    let mut coeffs = vec![Q::zero(); s + 1];
    coeffs[s] = Q::one();
    let inv_r = Q::from(r as i64).inv().expect("r >= 1");
    for t in 1..s {
        let current = Poly::new(coeffs.clone()).pow(r as u32);
        let delta = &target.coeff(n - t) - &current.coeff(n - t);
        coeffs[s - t] = &delta * &inv_r;
    }
    Poly::new(coeffs)
}

/// Common right factor of `A` and `B` given `F o A = F o B`, searching
/// `deg Z` from `deg A` down to 2.
pub fn common_right_factor(a: &Poly, b: &Poly, f: &Poly) -> Result<RightFactorReport> {
    if f.compose(a) != f.compose(b) {
        return Err(Error::HypothesisFail("F o A != F o B".into()));
    }
    let n = a.degree();
    let branch = if f.degree() > n { FactorBranch::OuterDegreeDominates } else { FactorBranch::CommonRightFactor };
    if n < 2 || b.degree() != n {
        return Ok(RightFactorReport { branch, factor: None });
    }
    // deg Z = deg A: B must be an affine image of A.
    let alpha = &b.leading() / &a.leading();
    let beta = b - &a.scale(&alpha);
    if beta.is_constant() {
        let y = Poly::new(vec![beta.coeff(0), alpha]);
        return Ok(RightFactorReport { branch, factor: Some((Poly::z(), y, a.clone())) });
    }
    for s in (2..n).rev().filter(|s| n.is_multiple_of(*s)) {
        let z = approximate_root(a, s);
        if let (Some(x), Some(y)) = (z_adic(a, &z), z_adic(b, &z)) {
            debug_assert_eq!(&x.compose(&z), a);
            return Ok(RightFactorReport { branch, factor: Some((x, y, z)) });
        }
    }
    Ok(RightFactorReport { branch, factor: None })
}

/// Outcome of the power/Chebyshev test.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Exceptional {
    PowerConjugate { degree: usize },
    /// Conjugate to `sign * T_d`; `parameter` is the `u` of the monic form
    /// `D_d(z, u)` with `D_d(w + u/w) = w^d + u^d w^-d`.
    ChebyshevConjugate { sign: i8, degree: usize, parameter: Q },
    NotExceptional,
    /// Not a power map; the Chebyshev test needed a radical normalization.
    Indeterminate { degree: usize, reason: String },
}

impl Exceptional {
    pub fn is_exceptional(&self) -> bool {
        matches!(self, Exceptional::PowerConjugate { .. } | Exceptional::ChebyshevConjugate { .. })
    }
}

pub fn is_exceptional_poly(p: &Poly) -> Result<Exceptional> {
    let d = p.degree();
    if d < 2 {
        return Err(Error::Invalid("exceptional test needs degree >= 2".into()));
    }
    let (_, centered) = center_poly(p);
    if centered.support() == vec![d] {
        return Ok(Exceptional::PowerConjugate { degree: d });
    }
    let q = match normalize_centered(p) {
        Ok((_, q)) => q,
        Err(Error::NeedsRadical { root, value }) => {
            return Ok(Exceptional::Indeterminate {
                degree: d,
                reason: format!("normalization needs a {root}-th root of {value}"),
            })
        }
        Err(e) => return Err(e),
    };
    let u = -&(&q.coeff(d - 2) / &Q::from(d as i64));
    let units = [Q::one(), -Q::one(), Q::i(), -Q::i()];
    if !units.contains(&u) || !u.pow((d - 1) as u64).is_one() {
        return Ok(Exceptional::NotExceptional);
    }
    // w^d P(w + u/w) = w^{2d} + u^d
    let shift = Poly::new(vec![u.clone(), Q::zero(), Q::one()]);
    let mut lhs = Poly::zero();
    for (j, c) in q.coeffs().iter().enumerate() {
        if !c.is_zero() {
            let term = &shift.pow(j as u32) * &Poly::monomial(c.clone(), d - j);
            lhs = &lhs + &term;
        }
    }
    let mut rhs = vec![Q::zero(); 2 * d + 1];
    rhs[0] = u.pow(d as u64);
    rhs[2 * d] = Q::one();
    if lhs != Poly::new(rhs) {
        return Ok(Exceptional::NotExceptional);
    }
    let sign = if d.is_multiple_of(2) || u.pow(((d - 1) / 2) as u64).is_one() { 1 } else { -1 };
    Ok(Exceptional::ChebyshevConjugate { sign, degree: d, parameter: u })
}

/// A map is exceptional when it is a polynomial conjugate to a power or
/// Chebyshev map; twisted polynomials are tested through their Q(i) part
/// only when untwisted.
pub fn map_is_exceptional(f: &RatMap) -> Result<Option<Exceptional>> {
    match f.as_poly() {
        Some(p) if p.degree() >= 2 => is_exceptional_poly(p).map(Some),
        _ => Ok(None),
    }
}

/// First `X` in the Cayley ball of `gens` with `X o A = X o B`, with its word.
pub fn approx_related(
    a: &RatMap,
    b: &RatMap,
    gens: &[RatMap],
    max_len: usize,
) -> Result<Option<(RatMap, Vec<usize>)>> {
    if gens.is_empty() {
        return Err(Error::Invalid("generator list is empty".into()));
    }
    let ball = cayley_ball(gens, max_len, u64::MAX)?;
    for el in ball.elements {
        if el.map.compose(a)? == el.map.compose(b)? {
            return Ok(Some((el.map, el.word)));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Levin,
    Commute,
    CommonIterate,
    RightFactor,
    Approx,
    Exceptional,
}

/// An identity between two exact maps that a report relies on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Identity {
    pub statement: String,
    pub lhs: RatMap,
    pub rhs: RatMap,
    pub equal: bool,
}

impl Identity {
    fn new(statement: impl Into<String>, lhs: RatMap, rhs: RatMap) -> Self {
        let equal = lhs == rhs;
        Identity { statement: statement.into(), lhs, rhs, equal }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelationReport {
    pub kind: RelationKind,
    pub holds: bool,
    /// Search bound, for bounded searches whose negative answer only means
    /// "absent within the bound".
    pub bound: Option<u64>,
    pub exponents: Option<(u32, u32)>,
    pub classification: Option<Exceptional>,
    pub identities: Vec<Identity>,
    pub verified: bool,
}

impl RelationReport {
    fn new(kind: RelationKind, holds: bool, identities: Vec<Identity>) -> Self {
        let mut r =
            RelationReport { kind, holds, bound: None, exponents: None, classification: None, identities, verified: false };
        r.verified = r.reverify();
        r
    }

    /// Recomputes every recorded identity.
    pub fn reverify(&self) -> bool {
        self.identities.iter().all(|id| (id.lhs == id.rhs) == id.equal)
    }
}

pub fn levin_report(q: &RatMap, r: &RatMap) -> Result<RelationReport> {
    check_degrees(q, r)?;
    let ids = vec![
        Identity::new("Q o R = Q o Q", q.compose(r)?, q.compose(q)?),
        Identity::new("R o Q = R o R", r.compose(q)?, r.compose(r)?),
    ];
    let holds = ids.iter().all(|i| i.equal);
    Ok(RelationReport::new(RelationKind::Levin, holds, ids))
}

pub fn commute_report(p: &RatMap, q: &RatMap) -> Result<RelationReport> {
    let id = Identity::new("P o Q = Q o P", p.compose(q)?, q.compose(p)?);
    let holds = id.equal;
    Ok(RelationReport::new(RelationKind::Commute, holds, vec![id]))
}

pub fn common_iterate_report(p: &RatMap, q: &RatMap, max_degree: u64) -> Result<RelationReport> {
    let found = find_common_iterate(p, q, max_degree)?;
    let ids = match found {
        Some((m, n)) => vec![Identity::new(format!("P^{m} = Q^{n}"), p.iterate(m)?, q.iterate(n)?)],
        None => Vec::new(),
    };
    let mut report = RelationReport::new(RelationKind::CommonIterate, found.is_some(), ids);
    report.bound = Some(max_degree);
    report.exponents = found;
    Ok(report)
}

pub fn exceptional_report(p: &Poly) -> Result<RelationReport> {
    let class = is_exceptional_poly(p)?;
    let mut report = RelationReport::new(RelationKind::Exceptional, class.is_exceptional(), Vec::new());
    report.classification = Some(class);
    Ok(report)
}
