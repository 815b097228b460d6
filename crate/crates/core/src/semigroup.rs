//! Finitely generated semigroups of maps: Cayley balls, ideal intersections,
//! the abstract Levin semigroup with its spherical averages, the structure of
//! the symmetry semigroup of a polynomial, and the virtually-cyclic
//! classifier.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::literal::{serialize_rational, serialize_rational_rows};
use crate::algebra::{normalize_centered, AffineMap, Poly, RatMap};
use crate::error::{Error, Result};
use crate::relations::{
    aut_group, deck_group, find_common_iterate, map_is_exceptional, phi_multiplier, symmetry_group, Exceptional,
    Identity, Rotation, RotationGroup,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallElement {
    pub map: RatMap,
    /// Generator indices; `[a, b]` means `g_a o g_b`.
    pub word: Vec<usize>,
}

impl BallElement {
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CayleyBall {
    /// Distinct elements in shortlex order of their minimal words.
    pub elements: Vec<BallElement>,
    pub generators: usize,
    pub max_len: usize,
}

impl CayleyBall {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn maps(&self) -> impl Iterator<Item = &RatMap> {
        self.elements.iter().map(|e| &e.map)
    }
}

/// Recomposes a word over `gens`.
pub fn compose_word(gens: &[RatMap], word: &[usize]) -> Result<RatMap> {
    let (first, rest) = word.split_first().ok_or_else(|| Error::Invalid("empty word".into()))?;
    let mut acc = gens[*first].clone();
    for &g in rest {
        acc = acc.compose(&gens[g])?;
    }
    Ok(acc)
}

/// All distinct elements of word length `<= max_len` and degree
/// `<= max_degree`, each with its shortlex-minimal word.
///
/// Breadth-first by length. A prefix of a minimal word is minimal, so only
/// newly found elements are extended; candidates are generated in lex order
/// and the first occurrence of each map wins.
pub fn cayley_ball(gens: &[RatMap], max_len: usize, max_degree: u64) -> Result<CayleyBall> {
    if gens.is_empty() {
        return Err(Error::Invalid("generator list is empty".into()));
    }
    if gens.iter().any(|g| g.degree() < 2) {
        return Err(Error::Invalid("generators must have degree >= 2".into()));
    }
    let mut seen: HashMap<RatMap, usize> = HashMap::new();
    let mut elements: Vec<BallElement> = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    for (i, g) in gens.iter().enumerate() {
        if max_len >= 1 && g.degree() as u64 <= max_degree && !seen.contains_key(g) {
            seen.insert(g.clone(), elements.len());
            frontier.push(elements.len());
            elements.push(BallElement { map: g.clone(), word: vec![i] });
        }
    }
    for _ in 1..max_len {
        let k = gens.len();
        let candidates: Vec<Result<Option<RatMap>>> = (0..frontier.len() * k)
            .into_par_iter()
            .map(|idx| {
                let (base, letter) = (&elements[frontier[idx / k]].map, &gens[idx % k]);
                if (base.degree() as u64).saturating_mul(letter.degree() as u64) > max_degree {
                    return Ok(None);
                }
                base.compose(letter).map(Some)
            })
            .collect();
        let mut next = Vec::new();
        for (idx, cand) in candidates.into_iter().enumerate() {
            let Some(map) = cand? else { continue };
            if seen.contains_key(&map) {
                continue;
            }
            let mut word = elements[frontier[idx / k]].word.clone();
            word.push(idx % k);
            seen.insert(map.clone(), elements.len());
            next.push(elements.len());
            elements.push(BallElement { map, word });
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(CayleyBall { elements, generators: gens.len(), max_len })
}

/// First `(A, B)` in ball order with `A o P = B o Q`.
pub fn ideal_intersection(
    p: &RatMap,
    q: &RatMap,
    gens: &[RatMap],
    max_len: usize,
) -> Result<Option<(BallElement, BallElement)>> {
    let ball = cayley_ball(gens, max_len, u64::MAX)?;
    let mut right: HashMap<RatMap, usize> = HashMap::new();
    for (i, b) in ball.elements.iter().enumerate() {
        right.entry(b.map.compose(q)?).or_insert(i);
    }
    for a in &ball.elements {
        if let Some(&j) = right.get(&a.map.compose(p)?) {
            return Ok(Some((a.clone(), ball.elements[j].clone())));
        }
    }
    Ok(None)
}

/// Canonical element `s_generator^exponent` of a semigroup with the Levin
/// relations `s_i s_j = s_i^2`; generators are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LevinIndex {
    pub generator: usize,
    pub exponent: u64,
}

impl LevinIndex {
    /// `(i, k) (j, q) = (i, k + q)`.
    pub fn mul(self, other: LevinIndex) -> LevinIndex {
        LevinIndex { generator: self.generator, exponent: self.exponent + other.exponent }
    }
}

/// A bounded function on the Levin semigroup, truncated to exponents
/// `1..=window`. `values[i][k - 1]` is the value at `(i + 1, k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevinFunction {
    #[serde(serialize_with = "serialize_rational_rows")]
    pub values: Vec<Vec<BigRational>>,
}

impl LevinFunction {
    pub fn new(values: Vec<Vec<BigRational>>) -> Result<Self> {
        let w = values.first().map(Vec::len).ok_or_else(|| Error::Invalid("no generators".into()))?;
        if values.iter().any(|row| row.len() != w) {
            return Err(Error::Invalid("all generators need the same window".into()));
        }
        Ok(Self { values })
    }

    pub fn constant(m: usize, window: usize, c: BigRational) -> Self {
        Self { values: vec![vec![c; window]; m] }
    }

    pub fn generators(&self) -> usize {
        self.values.len()
    }

    pub fn window(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, idx: LevinIndex) -> &BigRational {
        &self.values[idx.generator - 1][idx.exponent as usize - 1]
    }

    pub fn sup_norm(&self) -> BigRational {
        self.values.iter().flatten().map(|v| v.abs()).max().unwrap_or_else(BigRational::zero)
    }
}

/// `Theta_n phi (i, k) = [phi(i, k) + m sum_{q=1..n} phi(i, k + q)] / (mn + 1)`
/// for `k <= window - n`.
pub fn theta_average(n: usize, phi: &LevinFunction) -> Result<LevinFunction> {
    let (m, w) = (phi.generators(), phi.window());
    if w < n + 1 {
        return Err(Error::WindowTooSmall { needed: n + 1, have: w });
    }
    let mm = BigRational::from_integer(BigInt::from(m));
    let denom = BigRational::from_integer(BigInt::from(m * n + 1));
    let values = phi
        .values
        .iter()
        .map(|row| {
            // sliding window sum of row[k..k+n]
            let mut tail: BigRational = row[1..=n].iter().cloned().sum();
            (0..w - n)
                .map(|k| {
                    if k > 0 {
                        tail = &tail - &row[k] + &row[k + n];
                    }
                    (&row[k] + &mm * &tail) / &denom
                })
                .collect()
        })
        .collect();
    Ok(LevinFunction { values })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaDefect {
    /// `sup |r_h Theta_n phi - Theta_n phi|` over `k <= window - n - 1`.
    #[serde(serialize_with = "serialize_rational")]
    pub defect: BigRational,
    /// `2 m ||phi|| / (mn + 1)`.
    #[serde(serialize_with = "serialize_rational")]
    pub bound: BigRational,
    pub within_bound: bool,
    pub attains_bound: bool,
    pub argmax: LevinIndex,
}

/// Invariance defect of `Theta_n phi` under the right action of a generator.
///
/// By the product rule `r_h` shifts every exponent by one, whichever
/// generator `h` is; `h` is only range-checked.
pub fn theta_defect(n: usize, h: usize, phi: &LevinFunction) -> Result<ThetaDefect> {
    let (m, w) = (phi.generators(), phi.window());
    if h == 0 || h > m {
        return Err(Error::Invalid(format!("generator index {h} outside 1..={m}")));
    }
    if w < n + 2 {
        return Err(Error::WindowTooSmall { needed: n + 2, have: w });
    }
    let theta = theta_average(n, phi)?;
    let mut defect = BigRational::zero();
    let mut argmax = LevinIndex { generator: 1, exponent: 1 };
    for (i, row) in theta.values.iter().enumerate() {
        for k in 0..row.len() - 1 {
            let d = (&row[k + 1] - &row[k]).abs();
            if d > defect {
                defect = d;
                argmax = LevinIndex { generator: i + 1, exponent: k as u64 + 1 };
            }
        }
    }
    let bound = BigRational::from_integer(BigInt::from(2 * m)) * phi.sup_norm()
        / BigRational::from_integer(BigInt::from(m * n + 1));
    Ok(ThetaDefect { within_bound: defect <= bound, attains_bound: defect == bound, defect, bound, argmax })
}

/// How the family sits inside `E(T) = G(T) x| <T>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    /// Every member is `alpha o T^l` with `alpha` in `A(T)`: the family lies
    /// in `AE(T) = A(T) x| N`, the positive part of a virtually cyclic group.
    InsideAeT,
    /// Every member is `gamma o T^l` with `gamma` in `G(T)`, but some `gamma`
    /// has a component in the kernel `K`.
    InsideEtWithKernel,
    /// Some member is not of the form `gamma o T^l`.
    OutsideEt,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberForm {
    pub member: usize,
    /// `member = rotation o T^exponent` in normalized coordinates.
    pub rotation: Option<Rotation>,
    pub exponent: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    /// Index of the family member chosen as root.
    pub root_index: usize,
    /// Affine `A` with `T = A o root o A^{-1}` monic centered.
    pub normalization: AffineMap,
    pub root: Poly,
    pub group: RotationGroup,
    /// `T o lambda = lambda^multiplier o T`.
    pub multiplier: u64,
    /// `(j, Phi(j))` over generator powers `lambda^j`.
    pub action: Vec<(u64, u64)>,
    pub kernel_order: u64,
    pub aut_order: u64,
    /// Smallest `m >= 0` at which the images of `Phi^m` stabilize;
    /// `K = ker Phi^m` lies in `Deck(T^m)`.
    pub m: u32,
    /// Smallest `n >= 1` with `Phi^n = id` on the image; `A` lies in `Aut(T^n)`.
    pub n: u32,
    pub members: Vec<MemberForm>,
    pub embedding: Embedding,
    pub identities: Vec<Identity>,
    pub claims: Vec<Claim>,
    pub verified: bool,
}

/// A group-order containment checked on the exact groups.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Claim {
    pub statement: String,
    pub holds: bool,
}

fn pow_mod(base: u64, e: u32, modulus: u64) -> u64 {
    let mut acc = 1u128 % modulus as u128;
    for _ in 0..e {
        acc = acc * base as u128 % modulus as u128;
    }
    acc as u64
}

/// Index of the first untwisted, certified non-exceptional member, after
/// checking every member is a polynomial of degree >= 2.
pub fn check_admissible(family: &[RatMap]) -> Result<usize> {
    if family.is_empty() {
        return Err(Error::NotAdmissible("empty family".into()));
    }
    for (i, f) in family.iter().enumerate() {
        if !f.is_polynomial() || f.degree() < 2 {
            return Err(Error::NotAdmissible(format!("member {i} is not a polynomial of degree >= 2")));
        }
    }
    for (i, f) in family.iter().enumerate() {
        if matches!(map_is_exceptional(f)?, Some(Exceptional::NotExceptional)) {
            return Ok(i);
        }
    }
    Err(Error::NotAdmissible("no member is certified non-exceptional".into()))
}

fn choose_root(family: &[RatMap]) -> usize {
    (0..family.len())
        .min_by(|&a, &b| {
            let (fa, fb) = (&family[a], &family[b]);
            (fa.degree(), fa.is_twisted(), fa).cmp(&(fb.degree(), fb.is_twisted(), fb))
        })
        .expect("nonempty")
}

/// Root polynomial, symmetry group, semiconjugacy action and the
/// kernel/automorphism splitting of `G(T)`, with every claimed identity
/// re-checked by exact composition.
pub fn ep_structure(family: &[RatMap]) -> Result<StructureReport> {
    check_admissible(family)?;
    let root_index = choose_root(family);
    let root_map = &family[root_index];
    let root_poly = root_map.as_poly().ok_or(Error::NotRepresentable)?;
    let (normalization, t) = normalize_centered(root_poly)?;
    let group = symmetry_group(&t).map_err(|e| match e {
        Error::ExceptionalInput(msg) => Error::NotAdmissible(msg),
        other => other,
    })?;
    let k = group.order;
    let r = phi_multiplier(&t, &group);
    let action: Vec<(u64, u64)> = (0..k).map(|j| (j, j * r % k)).collect();

    let mut m = 0u32;
    while pow_mod(r, m, k).gcd(&k) != pow_mod(r, m + 1, k).gcd(&k) {
        m += 1;
    }
    let kernel_order = pow_mod(r, m, k).gcd(&k);
    let aut_order = k / kernel_order;
    let mut n = 1u32;
    while pow_mod(r, n, aut_order) != 1 % aut_order {
        n += 1;
    }

    let t_map = RatMap::poly(t.clone())?;
    let mut identities = Vec::new();
    let mut claims = Vec::new();
    let g = group.generator();
    identities.push(id(format!("T o g = g^{r} o T"), t_map.compose(&g.to_map())?, g.pow(r).to_map().compose(&t_map)?));
    if m >= 1 && kernel_order > 1 {
        let tm = t_map.iterate(m)?;
        let kappa = Rotation::new(1, kernel_order);
        identities.push(id(format!("T^{m} o kappa = T^{m}"), tm.compose(&kappa.to_map())?, tm.clone()));
        let deck = deck_group(tm.as_poly().expect("polynomial"))?;
        claims.push(Claim {
            statement: format!("K (order {kernel_order}) lies in Deck(T^{m}) (order {})", deck.order),
            holds: deck.order % kernel_order == 0,
        });
    }
    if aut_order > 1 {
        let tn = t_map.iterate(n)?;
        let alpha = Rotation::new(1, aut_order);
        identities.push(id(
            format!("T^{n} o alpha = alpha o T^{n}"),
            tn.compose(&alpha.to_map())?,
            alpha.to_map().compose(&tn)?,
        ));
        let aut = aut_group(tn.as_poly().expect("polynomial"))?;
        claims.push(Claim {
            statement: format!("A (order {aut_order}) lies in Aut(T^{n}) (order {})", aut.order),
            holds: aut.order % aut_order == 0,
        });
    }

    let conj_in = normalization.to_ratmap();
    let conj_out = normalization.inverse().to_ratmap();
    let mut members = Vec::new();
    for (i, f) in family.iter().enumerate() {
        let g = if normalization == AffineMap::identity() { f.clone() } else { conj_in.compose(&f.compose(&conj_out)?)? };
        members.push(decompose_member(i, &g, &t_map, &group)?);
    }
    let embedding = if members.iter().any(|mf| mf.rotation.is_none()) {
        Embedding::OutsideEt
    } else if members.iter().all(|mf| mf.rotation.is_some_and(|rot| group.index_of(&rot).unwrap() % kernel_order == 0))
    {
        Embedding::InsideAeT
    } else {
        Embedding::InsideEtWithKernel
    };
    let verified = identities.iter().all(|i| i.equal) && claims.iter().all(|c| c.holds);
    Ok(StructureReport {
        root_index,
        normalization,
        root: t,
        group,
        multiplier: r,
        action,
        kernel_order,
        aut_order,
        m,
        n,
        members,
        embedding,
        identities,
        claims,
        verified,
    })
}

fn id(statement: String, lhs: RatMap, rhs: RatMap) -> Identity {
    let equal = lhs == rhs;
    Identity { statement, lhs, rhs, equal }
}

fn decompose_member(index: usize, f: &RatMap, t: &RatMap, group: &RotationGroup) -> Result<MemberForm> {
    let none = MemberForm { member: index, rotation: None, exponent: None };
    let (df, dt) = (f.degree() as u64, t.degree() as u64);
    let mut l = 1u32;
    let mut d = dt;
    while d < df {
        d *= dt;
        l += 1;
    }
    if d != df {
        return Ok(none);
    }
    let tl = t.iterate(l)?;
    for rot in group.elements() {
        if rot.to_map().compose(&tl)? == *f {
            return Ok(MemberForm { member: index, rotation: Some(rot), exponent: Some(l) });
        }
    }
    Ok(none)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterateWitness {
    pub left: usize,
    pub right: usize,
    pub m: u32,
    pub n: u32,
    pub identity: Identity,
}

/// The equivalent conditions certified together once every pair of
/// generators has a common iterate.
pub const POSITIVE_CONDITIONS: [&str; 6] = [
    "every pair of generators has the dynamical intersection property",
    "every pair of generators has a common iterate (verified by the witnesses)",
    "every pair of semigroup elements has the dynamical intersection property",
    "every pair of semigroup elements of degree > 1 has a common iterate",
    "the semigroup is amenable and every right invariant mean is left invariant",
    "the semigroup embeds into a virtually cyclic group",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    #[serde(rename = "POSITIVE")]
    Positive {
        witnesses: Vec<IterateWitness>,
        conditions: Vec<String>,
        structure: Option<Box<StructureReport>>,
        structure_note: Option<String>,
    },
    /// Some pair had no common iterate within the degree bound. This is not
    /// a certified negative.
    #[serde(rename = "UNDETERMINED")]
    Undetermined { bound: u64, missing: Vec<(usize, usize)>, witnesses: Vec<IterateWitness> },
}

impl Verdict {
    pub fn is_positive(&self) -> bool {
        matches!(self, Verdict::Positive { .. })
    }

    /// Recomputes every common-iterate identity.
    pub fn reverify(&self) -> bool {
        let ws = match self {
            Verdict::Positive { witnesses, .. } | Verdict::Undetermined { witnesses, .. } => witnesses,
        };
        ws.iter().all(|w| w.identity.equal && w.identity.lhs == w.identity.rhs)
    }
}

/// Pairwise common-iterate test on the generators; all pairs succeeding
/// certifies the six equivalent conditions.
pub fn classify(family: &[RatMap], degree_budget: u64) -> Result<Verdict> {
    check_admissible(family)?;
    let pairs: Vec<(usize, usize)> =
        (0..family.len()).flat_map(|i| (i + 1..family.len()).map(move |j| (i, j))).collect();
    let results: Vec<Result<Option<(u32, u32)>>> =
        pairs.par_iter().map(|&(i, j)| find_common_iterate(&family[i], &family[j], degree_budget)).collect();
    let mut witnesses = Vec::new();
    let mut missing = Vec::new();
    for (&(i, j), res) in pairs.iter().zip(results) {
        match res? {
            Some((m, n)) => {
                let identity = id(format!("F{i}^{m} = F{j}^{n}"), family[i].iterate(m)?, family[j].iterate(n)?);
                witnesses.push(IterateWitness { left: i, right: j, m, n, identity });
            }
            None => missing.push((i, j)),
        }
    }
    if !missing.is_empty() {
        return Ok(Verdict::Undetermined { bound: degree_budget, missing, witnesses });
    }
    let (structure, structure_note) = match ep_structure(family) {
        Ok(s) => (Some(Box::new(s)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Verdict::Positive {
        witnesses,
        conditions: POSITIVE_CONDITIONS.iter().map(|s| s.to_string()).collect(),
        structure,
        structure_note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn map(c: &[i64]) -> RatMap {
        RatMap::poly(Poly::from_ints(c)).unwrap()
    }

    fn example() -> RatMap {
        map(&[0, 0, 1, 0, 0, 1])
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn balls_deduplicate() {
        let ball = cayley_ball(&[map(&[0, 0, 1]), map(&[0, 0, -1])], 3, u64::MAX).unwrap();
        let expected: Vec<RatMap> = vec![
            map(&[0, 0, 1]),
            map(&[0, 0, -1]),
            RatMap::power(4),
            map(&[0, 0, 0, 0, -1]),
            RatMap::power(8),
            map(&[0, 0, 0, 0, 0, 0, 0, 0, -1]),
        ];
        assert_eq!(ball.maps().cloned().collect::<Vec<_>>(), expected);
        assert_eq!(ball.elements[2].word, vec![0, 0]);
        assert_eq!(ball.elements[3].word, vec![1, 0]);

        let ball = cayley_ball(&[RatMap::power(2)], 3, u64::MAX).unwrap();
        assert_eq!(ball.len(), 3);
        let ball = cayley_ball(&[RatMap::power(2), RatMap::power(3)], 2, u64::MAX).unwrap();
        let degs: Vec<usize> = ball.maps().map(|m| m.degree()).collect();
        assert_eq!(degs, vec![2, 3, 4, 6, 9]);
    }

    #[test]
    fn ball_respects_degree_cap() {
        let ball = cayley_ball(&[RatMap::power(2), RatMap::power(3)], 4, 8).unwrap();
        assert!(ball.maps().all(|m| m.degree() <= 8));
        assert_eq!(ball.len(), 5); // z^2 z^3 z^4 z^6 z^8
    }

    #[test]
    fn ideal_intersections() {
        let (z2, mz2) = (map(&[0, 0, 1]), map(&[0, 0, -1]));
        let (a, b) = ideal_intersection(&z2, &mz2, &[z2.clone(), mz2.clone()], 2).unwrap().unwrap();
        assert_eq!((a.map, b.map), (z2.clone(), z2.clone()));
        let (a, b) = ideal_intersection(&mz2, &mz2, &[z2.clone(), mz2.clone()], 1).unwrap().unwrap();
        assert_eq!((a.word, b.word), (vec![0], vec![0]));
        let gens = [RatMap::power(2), RatMap::power(3)];
        let (a, b) = ideal_intersection(&gens[0], &gens[1], &gens, 2).unwrap().unwrap();
        assert_eq!((a.map, b.map), (RatMap::power(3), RatMap::power(2)));
    }

    #[test]
    fn theta_of_constants_and_indicators() {
        let one = LevinFunction::constant(3, 12, rat(1, 1));
        let th = theta_average(4, &one).unwrap();
        assert!(th.values.iter().flatten().all(|v| *v == rat(1, 1)));
        assert_eq!(theta_defect(4, 1, &one).unwrap().defect, rat(0, 1));

        let ind = LevinFunction::new(vec![vec![rat(1, 1); 8], vec![rat(0, 1); 8]]).unwrap();
        let th = theta_average(2, &ind).unwrap();
        assert!(th.values[0].iter().all(|v| *v == rat(1, 1)));
        assert!(th.values[1].iter().all(|v| v.is_zero()));
    }

    #[test]
    fn theta_matches_direct_sum() {
        // m = 1 reduces to a plain window average along one orbit
        let phi = LevinFunction::new(vec![(1..=10).map(|k| rat(k * k % 7, 3)).collect()]).unwrap();
        let th = theta_average(3, &phi).unwrap();
        for k in 0..th.window() {
            let direct: BigRational = (0..=3).map(|q| phi.values[0][k + q].clone()).sum::<BigRational>() / rat(4, 1);
            assert_eq!(th.values[0][k], direct);
        }
    }

    #[test]
    fn defect_bound_is_sharp() {
        // (1-m) phi(k+1) - phi(k) + m phi(k+n+1) reaches 2m when signs align
        let (m, n) = (2usize, 4usize);
        let mut row = vec![rat(0, 1); 10];
        row[0] = rat(-1, 1);
        row[1] = rat(-1, 1);
        row[n + 1] = rat(1, 1);
        let phi = LevinFunction::new(vec![row.clone(), row]).unwrap();
        let d = theta_defect(n, 2, &phi).unwrap();
        assert_eq!(d.bound, rat(4, 9));
        assert!(d.within_bound && d.attains_bound);
        assert_eq!(d.argmax, LevinIndex { generator: 1, exponent: 1 });
        assert_eq!(m, 2);
    }

    #[test]
    fn small_window_rejected() {
        let phi = LevinFunction::constant(1, 4, rat(1, 1));
        assert_eq!(theta_defect(3, 1, &phi), Err(Error::WindowTooSmall { needed: 5, have: 4 }));
    }

    #[test]
    fn example_structure() {
        let fam = [example(), example().rotate(Ratio::new(1, 3))];
        let s = ep_structure(&fam).unwrap();
        assert_eq!(s.root_index, 0);
        assert_eq!(s.group.order, 3);
        assert_eq!(s.multiplier, 2);
        assert_eq!((s.m, s.n), (0, 2));
        assert_eq!((s.kernel_order, s.aut_order), (1, 3));
        assert_eq!(s.members[1].rotation, Some(Rotation::new(1, 3)));
        assert_eq!(s.embedding, Embedding::InsideAeT);
        assert!(s.verified);
    }

    #[test]
    fn kernel_only_structure() {
        let s = ep_structure(&[map(&[0, 0, 0, 1, 0, 0, 1])]).unwrap();
        assert_eq!(s.group.order, 3);
        assert!(s.action.iter().all(|&(_, img)| img == 0));
        assert_eq!((s.m, s.n, s.kernel_order, s.aut_order), (1, 1, 3, 1));
        assert!(s.verified);
    }

    #[test]
    fn power_maps_are_not_admissible() {
        assert!(matches!(ep_structure(&[RatMap::power(2)]), Err(Error::NotAdmissible(_))));
        assert!(matches!(classify(&[map(&[0, 0, 1]), map(&[0, 0, -1])], 64), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn classifier_verdicts() {
        let fam = [example(), example().rotate(Ratio::new(1, 3))];
        let v = classify(&fam, 1000).unwrap();
        match &v {
            Verdict::Positive { witnesses, structure, .. } => {
                assert_eq!((witnesses[0].m, witnesses[0].n), (2, 2));
                assert!(structure.is_some());
            }
            other => panic!("expected positive, got {other:?}"),
        }
        assert!(v.reverify());
        let v = classify(&[example(), map(&[1, 0, 1, 0, 0, 1])], 5u64.pow(4)).unwrap();
        assert!(matches!(v, Verdict::Undetermined { bound: 625, .. }));
    }

    #[test]
    fn levin_cyclic_parts_are_disjoint() {
        let gens = [map(&[0, 0, 1]), map(&[0, 0, -1])];
        let cyclic = |g: &RatMap| -> Vec<RatMap> { (1..=5).map(|k| g.iterate(k).unwrap()).collect() };
        let (a, b) = (cyclic(&gens[0]), cyclic(&gens[1]));
        assert!(a.iter().all(|x| !b.contains(x)));
        let ball = cayley_ball(&gens, 5, u64::MAX).unwrap();
        assert!(a.iter().chain(&b).all(|x| ball.maps().any(|y| y == x)));
    }
}
