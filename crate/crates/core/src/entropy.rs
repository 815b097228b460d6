//! Lyubich operator and the measure of maximal entropy.
//!
//! Preimages are computed numerically with an Aberth–Ehrlich iteration;
//! measures are represented as weighted point clouds on the sphere built by
//! backward iteration (full preimage tree when it fits, otherwise independent
//! seeded random walks). Clouds are compared through a fixed dictionary of
//! chordal-coordinate monomials.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::algebra::probe::Probe;
use crate::algebra::{Poly, RatMap};
use crate::error::{Error, Result};
use crate::relations::is_levin_pair;

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 800;
const EPS: f64 = f64::EPSILON;

/// A point of the Riemann sphere in floating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn new(re: f64, im: f64) -> Self {
        SpherePoint::Finite(Complex64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(*z),
            SpherePoint::Infinity => None,
        }
    }

    /// Coordinates on the unit sphere (stereographic from the north pole).
    pub fn unit(&self) -> [f64; 3] {
        match self {
            SpherePoint::Infinity => [0.0, 0.0, 1.0],
            SpherePoint::Finite(z) => {
                let r = z.norm_sqr();
                if !r.is_finite() {
                    return [0.0, 0.0, 1.0];
                }
                [2.0 * z.re / (1.0 + r), 2.0 * z.im / (1.0 + r), (r - 1.0) / (r + 1.0)]
            }
        }
    }

    /// Euclidean distance between the images on the unit sphere (at most 2).
    pub fn chordal(&self, other: &SpherePoint) -> f64 {
        let (a, b) = (self.unit(), other.unit());
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }
}

impl Serialize for SpherePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SpherePoint::Infinity => s.serialize_str("inf"),
            SpherePoint::Finite(z) => [z.re, z.im].serialize(s),
        }
    }
}

fn horner(c: &[Complex64], x: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a)
}

fn horner_with_derivative(c: &[Complex64], x: Complex64) -> (Complex64, Complex64, f64) {
    let zero = Complex64::new(0.0, 0.0);
    let (mut p, mut dp, mut scale) = (zero, zero, 0.0);
    let ax = x.norm();
    for &a in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + a;
        scale = scale * ax + a.norm();
    }
    (p, dp, scale)
}

/// All roots of `sum c_k z^k` (lowest degree first, nonzero leading
/// coefficient), with multiplicity.
///
/// Converged roots satisfy `|p(x)| <= tol * sum |c_k||x|^k`; roots closer than
/// `10 tol` (relative) are merged to their mean.
pub fn aberth(coeffs: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let mut c: Vec<Complex64> = coeffs.to_vec();
    while c.last().is_some_and(|a| *a == zero) {
        c.pop();
    }
    if c.is_empty() {
        return Err(Error::Invalid("zero polynomial has no roots".into()));
    }
    let low = c.iter().take_while(|a| **a == zero).count();
    let mut roots = vec![zero; low];
    let c = &c[low..];
    let n = c.len() - 1;
    match n {
        0 => return Ok(roots),
        1 => {
            roots.push(-c[0] / c[1]);
            return Ok(roots);
        }
        _ => {}
    }

    let lead = c[n];
    let radius = (0..n)
        .map(|k| (c[k] / lead).norm().powf(1.0 / (n - k) as f64))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let center = -c[n - 1] / (lead * n as f64);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / n as f64 + 0.4 + 0.13 / n as f64;
            center + Complex64::from_polar(radius * (1.0 + 0.02 * k as f64 / n as f64), theta)
        })
        .collect();
    let mut done = vec![false; n];
    let goal = tol * 1e-3;
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        worst = 0.0;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (p, dp, scale) = horner_with_derivative(c, z[k]);
            let resid = if scale > 0.0 { p.norm() / scale } else { 0.0 };
            if resid <= goal || p == zero {
                done[k] = true;
                continue;
            }
            worst = worst.max(resid);
            let newton = if dp == zero { Complex64::new(1e-8 * (1.0 + z[k].norm()), 0.0) } else { p / dp };
            let mut repulse = zero;
            for j in 0..n {
                if j != k && z[j] != z[k] {
                    repulse += (z[k] - z[j]).inv();
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulse;
            let step = if denom == zero { newton } else { newton / denom };
            z[k] -= step;
            if step.norm() <= 4.0 * EPS * z[k].norm() {
                done[k] = true;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    let mut stalled = 0.0_f64;
    for &x in &z {
        let (p, _, scale) = horner_with_derivative(c, x);
        let resid = if scale > 0.0 { p.norm() / scale } else { 0.0 };
        stalled = stalled.max(resid);
    }
    if !(stalled <= tol) {
        return Err(Error::RootFindingStalled { iterations: MAX_ITERS, residual: stalled.max(worst) });
    }
    merge_clusters(&mut z, tol);
    roots.extend(z);
    Ok(roots)
}

fn merge_clusters(z: &mut [Complex64], tol: f64) {
    let n = z.len();
    let mut group: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if (z[i] - z[j]).norm() <= 10.0 * tol * (1.0 + z[i].norm()) {
                group[i] = group[j];
                break;
            }
        }
    }
    for g in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| group[i] == g).collect();
        if members.len() > 1 {
            let mean = members.iter().map(|&i| z[i]).sum::<Complex64>() / members.len() as f64;
            for i in members {
                z[i] = mean;
            }
        }
    }
}

/// Floating-point evaluator and preimage solver for one map.
#[derive(Clone, Debug)]
pub struct Preimager {
    num: Vec<Complex64>,
    den: Vec<Complex64>,
    dnum: Vec<Complex64>,
    dden: Vec<Complex64>,
    degree: usize,
    tol: f64,
}

fn poly_derivative(c: &[Complex64]) -> Vec<Complex64> {
    c.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect()
}

impl Preimager {
    pub fn new(f: &RatMap, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
        }
        let nm = f.numeric();
        let degree = nm.degree();
        let pad = |mut v: Vec<Complex64>| {
            v.resize(degree + 1, Complex64::new(0.0, 0.0));
            v
        };
        let (num, den) = (pad(nm.num), pad(nm.den));
        Ok(Preimager { dnum: poly_derivative(&num), dden: poly_derivative(&den), num, den, degree, tol })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn eval(&self, x: SpherePoint) -> SpherePoint {
        match x {
            SpherePoint::Infinity => {
                let (a, b) = (self.num[self.degree], self.den[self.degree]);
                if b.norm() == 0.0 {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite(a / b)
                }
            }
            SpherePoint::Finite(z) => {
                let d = horner(&self.den, z);
                if d.norm() == 0.0 {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::from(horner(&self.num, z) / d)
                }
            }
        }
    }

    /// `f'(z)` at a finite point (infinite at poles).
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let (n, d) = (horner(&self.num, z), horner(&self.den, z));
        let (dn, dd) = (horner(&self.dnum, z), horner(&self.dden, z));
        (dn * d - n * dd) / (d * d)
    }

    /// All solutions of `f(x) = y` with multiplicity; exactly `deg f` points.
    pub fn solve(&self, y: SpherePoint) -> Result<Vec<SpherePoint>> {
        let d = self.degree;
        let mut q: Vec<Complex64> = match y {
            SpherePoint::Infinity => self.den.clone(),
            SpherePoint::Finite(w) => {
                let mut q: Vec<Complex64> = self.num.iter().zip(&self.den).map(|(a, b)| a - w * b).collect();
                // cancellation in the top coefficients is a degree drop
                for k in (0..q.len()).rev() {
                    let scale = self.num[k].norm() + w.norm() * self.den[k].norm();
                    if q[k].norm() > 8.0 * EPS * scale {
                        break;
                    }
                    q[k] = Complex64::new(0.0, 0.0);
                }
                q
            }
        };
        while q.last().is_some_and(|a| a.norm() == 0.0) {
            q.pop();
        }
        if q.is_empty() {
            return Err(Error::Invalid("map is constant on the sphere".into()));
        }
        let finite = q.len() - 1;
        let mut out: Vec<SpherePoint> = aberth(&q, self.tol)?.into_iter().map(SpherePoint::Finite).collect();
        out.extend(std::iter::repeat_n(SpherePoint::Infinity, d - finite));
        Ok(out)
    }
}

/// Solutions of `f(x) = y`, with multiplicity, including infinity.
pub fn preimages(f: &RatMap, y: SpherePoint, tol: f64) -> Result<Vec<SpherePoint>> {
    Preimager::new(f, tol)?.solve(y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SamplingPlan {
    FullTree,
    Walks,
    Loaded,
}

#[derive(Clone, Debug, Serialize)]
pub struct CloudMeta {
    pub map: Option<RatMap>,
    pub start: SpherePoint,
    pub depth: usize,
    pub seed: u64,
    pub plan: SamplingPlan,
}

/// A probability measure given by weighted points on the sphere.
#[derive(Clone, Debug)]
pub struct MeasureCloud {
    pub points: Vec<SpherePoint>,
    pub weights: Vec<f64>,
    pub meta: CloudMeta,
}

impl MeasureCloud {
    /// Builds a cloud from raw points, normalizing positive weights to sum 1.
    pub fn from_points(points: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Invalid("cloud needs matching nonempty points and weights".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Invalid("cloud weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        let meta = CloudMeta { map: None, start: SpherePoint::Infinity, depth: 0, seed: 0, plan: SamplingPlan::Loaded };
        Ok(MeasureCloud { points, weights, meta })
    }

    fn uniform(points: Vec<SpherePoint>, meta: CloudMeta) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        MeasureCloud { points, weights, meta }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, phi: impl Fn(&SpherePoint) -> f64 + Sync) -> f64 {
        chunked_sum(&self.points, &self.weights, |p, w| w * phi(p), 0.0)
    }

    pub fn integrate_complex(&self, phi: &(dyn Fn(&SpherePoint) -> Complex64 + Sync)) -> Complex64 {
        chunked_sum(&self.points, &self.weights, |p, w| phi(p) * w, Complex64::new(0.0, 0.0))
    }
}

fn walk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SUM_CHUNK: usize = 4096;

// Sums over fixed-size chunks, combined in order, so results do not depend
// on how the thread pool splits the work.
fn chunked_sum<T: Sync, V>(items: &[T], weights: &[f64], f: impl Fn(&T, f64) -> V + Sync, zero: V) -> V
where
    V: Copy + Send + Sync + std::ops::Add<Output = V>,
{
    let partials: Vec<V> = items
        .par_chunks(SUM_CHUNK)
        .zip(weights.par_chunks(SUM_CHUNK))
        .map(|(xs, ws)| xs.iter().zip(ws).fold(zero, |acc, (x, &w)| acc + f(x, w)))
        .collect();
    partials.into_iter().fold(zero, |a, b| a + b)
}

/// The start point used when none is given: uniform in the disk `|z| <= 2`.
pub fn default_start(seed: u64) -> SpherePoint {
    let mut rng = walk_rng(seed, u64::MAX);
    let r = 2.0 * rng.gen::<f64>().sqrt();
    let t = rng.gen::<f64>() * std::f64::consts::TAU;
    SpherePoint::Finite(Complex64::from_polar(r, t))
}

/// True when `z0` is its own full preimage (the start would sample a point
/// mass rather than the maximal-entropy measure).
pub fn is_totally_invariant(solver: &Preimager, z0: SpherePoint) -> Result<bool> {
    let pre = solver.solve(z0)?;
    Ok(pre.iter().all(|x| x.chordal(&z0) <= 1e-9))
}

/// Approximates the maximal-entropy measure of `f` by backward iteration.
///
/// Uses the full depth-`depth` preimage tree when `deg^depth <= samples`,
/// otherwise `samples` independent random walks (uniform branch choice).
pub fn backward_measure(
    f: &RatMap,
    z0: Option<SpherePoint>,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<MeasureCloud> {
    if f.degree() < 2 {
        return Err(Error::Invalid("backward sampling needs degree >= 2".into()));
    }
    if samples == 0 || depth == 0 {
        return Err(Error::Invalid("depth and samples must be positive".into()));
    }
    if (depth as f64) * (samples as f64) > 1e10 {
        return Err(Error::Invalid(format!("sampling plan {samples} x {depth} exceeds budget")));
    }
    let solver = Preimager::new(f, DEFAULT_TOL)?;
    let start = z0.unwrap_or_else(|| default_start(seed));
    if is_totally_invariant(&solver, start)? {
        return Err(Error::AtomicTrap);
    }
    let deg = solver.degree();
    let full = (deg as f64).powi(depth as i32) <= samples as f64;
    let meta = CloudMeta {
        map: Some(f.clone()),
        start,
        depth,
        seed,
        plan: if full { SamplingPlan::FullTree } else { SamplingPlan::Walks },
    };
    let points = if full {
        let mut level = vec![start];
        for _ in 0..depth {
            let next: Result<Vec<Vec<SpherePoint>>> = level.par_iter().map(|&y| solver.solve(y)).collect();
            level = next?.into_iter().flatten().collect();
        }
        level
    } else {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = walk_rng(seed, i as u64);
                let mut y = start;
                for _ in 0..depth {
                    let pre = solver.solve(y)?;
                    y = pre[rng.gen_range(0..pre.len())];
                }
                Ok(y)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(MeasureCloud::uniform(points, meta))
}

/// `L_f(phi)(y)`: the average of `phi` over preimages of `y`.
pub fn lyubich_apply(f: &RatMap, phi: &(dyn Fn(&SpherePoint) -> Complex64 + Sync), y: SpherePoint) -> Result<Complex64> {
    let pre = preimages(f, y, DEFAULT_TOL)?;
    Ok(pre.iter().map(phi).sum::<Complex64>() / pre.len() as f64)
}

/// Cesàro averages `A_k = (1/k) sum_{i<k} L_f^i(phi)(y)` for `k = 1..=n`.
///
/// `L^i` is evaluated on the full preimage tree while it holds at most
/// `cap` points; deeper levels continue each point along one random branch.
pub fn cesaro_lyubich_with(
    f: &RatMap,
    phi: &(dyn Fn(&SpherePoint) -> Complex64 + Sync),
    y: SpherePoint,
    n: usize,
    cap: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::Invalid("need at least one Cesàro term".into()));
    }
    let solver = Preimager::new(f, DEFAULT_TOL)?;
    let mut population = vec![y];
    let mut sum = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ones = vec![1.0; population.len()];
        let level = chunked_sum(&population, &ones, |p, _| phi(p), Complex64::new(0.0, 0.0)) / population.len() as f64;
        sum += level;
        out.push(sum / (i + 1) as f64);
        if i + 1 == n {
            break;
        }
        let expand = population.len() * solver.degree() <= cap.max(1);
        population = population
            .par_iter()
            .enumerate()
            .map(|(j, &p)| {
                let pre = solver.solve(p)?;
                if expand {
                    Ok(pre)
                } else {
                    let mut rng = walk_rng(seed ^ (i as u64).wrapping_mul(0x9e37_79b9), j as u64);
                    Ok(vec![pre[rng.gen_range(0..pre.len())]])
                }
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
    }
    Ok(out)
}

pub fn cesaro_lyubich(
    f: &RatMap,
    phi: &(dyn Fn(&SpherePoint) -> Complex64 + Sync),
    y: SpherePoint,
    n: usize,
) -> Result<Vec<Complex64>> {
    cesaro_lyubich_with(f, phi, y, n, 1 << 14, 0)
}

/// Monomials `X^a Y^b Z^c` in unit-sphere coordinates, `c <= 1`, `a+b+c <= 6`.
#[derive(Clone, Debug)]
pub struct TestDictionary {
    exps: Vec<[u8; 3]>,
}

impl TestDictionary {
    pub fn standard() -> Self {
        let mut exps = Vec::new();
        for c in 0..=1u8 {
            for total in 0..=(6 - c) {
                for a in 0..=total {
                    exps.push([a, total - a, c]);
                }
            }
        }
        TestDictionary { exps }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn label(&self, i: usize) -> String {
        let [a, b, c] = self.exps[i];
        format!("X^{a}Y^{b}Z^{c}")
    }

    pub fn eval(&self, i: usize, p: &SpherePoint) -> f64 {
        let [x, y, z] = p.unit();
        let [a, b, c] = self.exps[i];
        x.powi(a as i32) * y.powi(b as i32) * z.powi(c as i32)
    }

    pub fn integrals(&self, mu: &MeasureCloud) -> Vec<f64> {
        let partials: Vec<Vec<f64>> = mu
            .points
            .par_chunks(SUM_CHUNK)
            .zip(mu.weights.par_chunks(SUM_CHUNK))
            .map(|(ps, ws)| {
                let mut acc = vec![0.0; self.len()];
                for (p, w) in ps.iter().zip(ws) {
                    for (i, slot) in acc.iter_mut().enumerate() {
                        *slot += w * self.eval(i, p);
                    }
                }
                acc
            })
            .collect();
        partials.iter().fold(vec![0.0; self.len()], |a, b| a.iter().zip(b).map(|(x, y)| x + y).collect())
    }
}

/// Per-function `|int phi dmu1 - int phi dmu2|` over the standard dictionary.
pub fn measure_distances(mu1: &MeasureCloud, mu2: &MeasureCloud) -> Vec<f64> {
    let dict = TestDictionary::standard();
    let (a, b) = (dict.integrals(mu1), dict.integrals(mu2));
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect()
}

pub fn measure_distance(mu1: &MeasureCloud, mu2: &MeasureCloud) -> f64 {
    measure_distances(mu1, mu2).into_iter().fold(0.0, f64::max)
}

/// `|int L_f(phi) dmu - int phi dmu|` for the first `count` dictionary
/// functions after the constant.
pub fn invariance_defects(f: &RatMap, mu: &MeasureCloud, count: usize) -> Result<Vec<f64>> {
    let solver = Preimager::new(f, DEFAULT_TOL)?;
    let dict = TestDictionary::standard();
    let idx: Vec<usize> = (1..dict.len()).take(count).collect();
    let pre: Vec<Vec<SpherePoint>> = mu.points.par_iter().map(|&y| solver.solve(y)).collect::<Result<_>>()?;
    Ok(idx
        .iter()
        .map(|&i| {
            let direct: f64 = mu.points.iter().zip(&mu.weights).map(|(p, w)| w * dict.eval(i, p)).sum();
            let pulled: f64 = pre
                .iter()
                .zip(&mu.weights)
                .map(|(xs, w)| w * xs.iter().map(|x| dict.eval(i, x)).sum::<f64>() / xs.len() as f64)
                .sum();
            (pulled - direct).abs()
        })
        .collect())
}

/// Kolmogorov–Smirnov distance of the point arguments from the uniform law.
pub fn angular_discrepancy(mu: &MeasureCloud) -> f64 {
    let mut u: Vec<(f64, f64)> = mu
        .points
        .iter()
        .zip(&mu.weights)
        .filter_map(|(p, w)| p.finite().map(|z| (z.arg().rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU, *w)))
        .collect();
    u.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = u.iter().map(|x| x.1).sum();
    let mut cdf = 0.0;
    let mut worst = 0.0_f64;
    for (x, w) in u {
        worst = worst.max((x - cdf / total).abs());
        cdf += w;
        worst = worst.max((cdf / total - x).abs());
    }
    worst
}

/// Wasserstein-1 distance between two weighted samples on the real line.
pub fn wasserstein1_line(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let norm = |v: &[(f64, f64)]| {
        let t: f64 = v.iter().map(|x| x.1).sum();
        v.iter().map(|&(x, w)| (x, w / t)).collect::<Vec<_>>()
    };
    let mut events: Vec<(f64, f64)> = norm(a);
    events.extend(norm(b).into_iter().map(|(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut diff = 0.0;
    let mut dist = 0.0;
    for w in events.windows(2) {
        diff += w[0].1;
        dist += diff.abs() * (w[1].0 - w[0].0);
    }
    dist
}

#[derive(Clone, Debug, Serialize)]
pub struct EqualMeasureBudget {
    pub max_degree: u64,
    pub depth: usize,
    pub samples: usize,
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for EqualMeasureBudget {
    fn default() -> Self {
        EqualMeasureBudget { max_degree: 1 << 12, depth: 12, samples: 20_000, seed: 0, epsilon: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Agreement {
    #[serde(rename = "AGREE-equal")]
    AgreeEqual,
    #[serde(rename = "AGREE-distinct")]
    AgreeDistinct,
    #[serde(rename = "DISAGREE")]
    Disagree,
    #[serde(rename = "UNDETERMINED")]
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct EqualMeasureReport {
    /// Exponents `(m, n)` with `P^m`, `Q^n` satisfying the Levin relations.
    pub levin: Option<(u32, u32)>,
    /// False when the symbolic search was cut short by a budget error.
    pub search_complete: bool,
    pub symbolic_note: Option<String>,
    pub distance: f64,
    pub epsilon: f64,
    pub numeric_equal: bool,
    pub agreement: Agreement,
}

/// Least `(m, n)` (by degree) with `deg P^m = deg Q^n <= max_degree` and the
/// Levin relations between `P^m` and `Q^n`.
pub fn find_levin_iterates(p: &RatMap, q: &RatMap, max_degree: u64) -> Result<Option<(u32, u32)>> {
    let (dp, dq) = (p.degree() as u64, q.degree() as u64);
    if dp < 2 || dq < 2 {
        return Err(Error::Invalid("Levin search needs degree >= 2".into()));
    }
    let probe = Probe::new(&[p, q], 4, 0x1e71);
    let mut m = 1u32;
    let mut degm = dp;
    while degm <= max_degree {
        let mut n = 1u32;
        let mut degn = dq;
        while degn < degm {
            degn = degn.saturating_mul(dq);
            n += 1;
        }
        if degn == degm && !levin_probe_rejects(&probe, p, m, q, n) && is_levin_pair(&p.iterate(m)?, &q.iterate(n)?)? {
            return Ok(Some((m, n)));
        }
        degm = degm.saturating_mul(dp);
        m += 1;
    }
    Ok(None)
}

// Q = P^m, R = Q'^n: the Levin relations compare Q o R with Q o Q and
// R o Q with R o R, all as words in the generators.
fn levin_probe_rejects(probe: &Probe, p: &RatMap, m: u32, q: &RatMap, n: u32) -> bool {
    fn word<'a>(a: u32, b: u32, first: &'a RatMap, second: &'a RatMap) -> Vec<&'a RatMap> {
        let mut w = vec![first; a as usize];
        w.extend(std::iter::repeat_n(second, b as usize));
        w
    }
    probe.words_differ(&word(m, n, p, q), &word(2 * m, 0, p, p))
        || probe.words_differ(&word(n, m, q, p), &word(2 * n, 0, q, q))
}

/// Runs the symbolic Levin-iterate search and the numeric measure comparison
/// side by side and reports whether they agree.
pub fn equal_measure_test(p: &RatMap, q: &RatMap, budget: &EqualMeasureBudget) -> Result<EqualMeasureReport> {
    let (levin, search_complete, symbolic_note) = match find_levin_iterates(p, q, budget.max_degree) {
        Ok(l) => (l, true, None),
        Err(e @ (Error::CoefficientOverflowBudget { .. } | Error::NotRepresentable)) => {
            (None, false, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let mu = backward_measure(p, None, budget.depth, budget.samples, budget.seed)?;
    let nu = backward_measure(q, None, budget.depth, budget.samples, budget.seed)?;
    let distance = measure_distance(&mu, &nu);
    let numeric_equal = distance <= budget.epsilon;
    let agreement = match (levin.is_some(), search_complete, numeric_equal) {
        (true, _, true) => Agreement::AgreeEqual,
        (true, _, false) => Agreement::Disagree,
        (false, false, _) => Agreement::Undetermined,
        (false, true, false) => Agreement::AgreeDistinct,
        (false, true, true) => Agreement::Disagree,
    };
    Ok(EqualMeasureReport { levin, search_complete, symbolic_note, distance, epsilon: budget.epsilon, numeric_equal, agreement })
}

/// `deg^-n log+ |P^n(z)|`, switching to logarithmic stepping once the orbit
/// is large enough that `P(w) ~ a_d w^d` to double precision.
pub fn green_escape(p: &Poly, z: Complex64, n: u32) -> f64 {
    let c = p.to_complex();
    let d = p.degree();
    if d < 1 {
        return 0.0;
    }
    let df = d as f64;
    let log_lead = c[d].norm().ln();
    // beyond this radius the lower-order terms are below round-off
    let lower: f64 = c[..d].iter().map(|a| a.norm()).sum();
    let switch = (lower / (c[d].norm() * EPS)).max(1e8).min(1e150);
    let mut w = z;
    let mut k = 0;
    while k < n && w.norm() < switch {
        w = horner(&c, w);
        k += 1;
    }
    let mut log_abs = w.norm().ln();
    let mut scale = df.powi(-(k as i32));
    for _ in k..n {
        log_abs = df * log_abs + log_lead;
        scale /= df;
    }
    if !log_abs.is_finite() {
        return if log_abs > 0.0 { f64::INFINITY } else { 0.0 };
    }
    scale * log_abs.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Poly;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn poly_map(coeffs: &[i64]) -> RatMap {
        RatMap::poly(Poly::from_ints(coeffs)).unwrap()
    }

    fn sorted(mut v: Vec<SpherePoint>) -> Vec<SpherePoint> {
        v.sort_by(|a, b| {
            let (a, b) = (a.finite().unwrap_or(c(1e300, 0.0)), b.finite().unwrap_or(c(1e300, 0.0)));
            a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
        });
        v
    }

    #[test]
    fn square_root_preimages() {
        let z2 = RatMap::power(2);
        let pre = sorted(preimages(&z2, SpherePoint::new(4.0, 0.0), DEFAULT_TOL).unwrap());
        assert!(pre[0].chordal(&SpherePoint::new(-2.0, 0.0)) < 1e-12);
        assert!(pre[1].chordal(&SpherePoint::new(2.0, 0.0)) < 1e-12);
        let pre = preimages(&z2, SpherePoint::new(0.0, 0.0), DEFAULT_TOL).unwrap();
        assert_eq!(pre, vec![SpherePoint::new(0.0, 0.0); 2]);
    }

    #[test]
    fn lattes_poles_with_degree_drop() {
        let num = Poly::from_ints(&[1, 0, 2, 0, 1]);
        let den = Poly::from_ints(&[0, -4, 0, 4]);
        let f = RatMap::new(num, den).unwrap();
        let pre = preimages(&f, SpherePoint::Infinity, DEFAULT_TOL).unwrap();
        assert_eq!(pre.len(), 4);
        assert_eq!(pre.iter().filter(|p| p.is_infinite()).count(), 1);
        for pole in [-1.0, 0.0, 1.0] {
            assert!(pre.iter().any(|p| p.chordal(&SpherePoint::new(pole, 0.0)) < 1e-10));
        }
    }

    #[test]
    fn aberth_multiple_root() {
        // (z - 1)^3 (z + 2)
        let coeffs = [c(-2.0, 0.0), c(5.0, 0.0), c(-3.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)];
        let roots = aberth(&coeffs, DEFAULT_TOL).unwrap();
        assert_eq!(roots.len(), 4);
        assert_eq!(roots.iter().filter(|r| (**r - c(1.0, 0.0)).norm() < 1e-4).count(), 3);
        assert!(roots.iter().any(|r| (*r + c(2.0, 0.0)).norm() < 1e-10));
    }

    #[test]
    fn lyubich_examples() {
        let z2 = RatMap::power(2);
        let one = |_: &SpherePoint| c(1.0, 0.0);
        let id = |p: &SpherePoint| p.finite().unwrap();
        assert!((lyubich_apply(&z2, &one, SpherePoint::new(0.7, 0.1)).unwrap() - 1.0).norm() < 1e-14);
        assert!(lyubich_apply(&z2, &id, SpherePoint::new(1.0, 0.0)).unwrap().norm() < 1e-14);
        let cheb = poly_map(&[-2, 0, 1]);
        assert!(lyubich_apply(&cheb, &id, SpherePoint::new(2.0, 0.0)).unwrap().norm() < 1e-12);
        let avgs = cesaro_lyubich(&cheb, &one, SpherePoint::new(0.3, 0.0), 8).unwrap();
        assert!(avgs.iter().all(|a| (a - 1.0).norm() < 1e-12));
    }

    #[test]
    fn cesaro_tail_matches_circle_average() {
        // circle average of Re z / (1 + |z|^2) is 0
        let phi = |p: &SpherePoint| match p {
            SpherePoint::Finite(z) => c(z.re / (1.0 + z.norm_sqr()), 0.0),
            SpherePoint::Infinity => c(0.0, 0.0),
        };
        let avgs = cesaro_lyubich(&RatMap::power(2), &phi, SpherePoint::new(0.8, 0.3), 60).unwrap();
        assert!(avgs.last().unwrap().norm() <= 0.01);
    }

    #[test]
    fn full_tree_on_the_circle() {
        let cloud = backward_measure(&RatMap::power(2), Some(SpherePoint::new(0.3, 0.2)), 12, 4096, 1).unwrap();
        assert_eq!(cloud.meta.plan, SamplingPlan::FullTree);
        assert_eq!(cloud.len(), 4096);
        let worst = cloud.points.iter().map(|p| (p.finite().unwrap().norm() - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-3);
        assert!(angular_discrepancy(&cloud) <= 0.02);
        assert!((cloud.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn totally_invariant_starts_are_rejected() {
        let err = backward_measure(&poly_map(&[-1, 0, 1]), Some(SpherePoint::Infinity), 4, 100, 0);
        assert_eq!(err.unwrap_err(), Error::AtomicTrap);
        let err = backward_measure(&RatMap::power(3), Some(SpherePoint::new(0.0, 0.0)), 4, 100, 0);
        assert_eq!(err.unwrap_err(), Error::AtomicTrap);
    }

    #[test]
    fn walks_are_seed_deterministic() {
        let f = poly_map(&[-1, 0, 1]);
        let a = backward_measure(&f, None, 10, 300, 5).unwrap();
        let b = backward_measure(&f, None, 10, 300, 5).unwrap();
        assert_eq!(a.meta.plan, SamplingPlan::Walks);
        assert_eq!(a.points, b.points);
        let c = backward_measure(&f, None, 10, 300, 6).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn dictionary_shape() {
        let d = TestDictionary::standard();
        assert_eq!(d.len(), 49);
        let probe = [SpherePoint::new(0.3, -2.0), SpherePoint::Infinity, SpherePoint::new(0.0, 0.0)];
        for i in 0..d.len() {
            for p in &probe {
                assert!(d.eval(i, p).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn levin_iterates_found() {
        let z2 = RatMap::power(2);
        let neg = poly_map(&[0, 0, -1]);
        assert_eq!(find_levin_iterates(&z2, &neg, 64).unwrap(), Some((1, 1)));
        assert_eq!(find_levin_iterates(&z2, &poly_map(&[-2, 0, 1]), 64).unwrap(), None);
        assert_eq!(find_levin_iterates(&z2, &RatMap::power(4), 64).unwrap(), Some((2, 1)));
    }

    #[test]
    fn green_function_closed_forms() {
        let z2 = Poly::from_ints(&[0, 0, 1]);
        for n in [1, 5, 30, 200] {
            assert!((green_escape(&z2, c(2.0, 0.0), n) - 2f64.ln()).abs() < 1e-12);
        }
        assert!(green_escape(&z2, Complex64::from_polar(1.0, 0.7), 40) < 1e-12);
        let cheb = Poly::from_ints(&[-2, 0, 1]);
        let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((green_escape(&cheb, c(3.0, 0.0), 30) - exact).abs() < 1e-6);
    }

    #[test]
    fn wasserstein_line_shift() {
        let a: Vec<(f64, f64)> = (0..100).map(|i| (i as f64 / 100.0, 1.0)).collect();
        let b: Vec<(f64, f64)> = a.iter().map(|&(x, w)| (x + 0.25, w)).collect();
        assert!((wasserstein1_line(&a, &b) - 0.25).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn preimage_count_and_round_trip(
            num in prop::collection::vec((-5i64..6, -5i64..6), 2..6),
            den in prop::collection::vec((-5i64..6, -5i64..6), 1..4),
            yr in -3.0f64..3.0,
            yi in -3.0f64..3.0,
        ) {
            use crate::algebra::GaussianRational as Q;
            let to_poly = |v: &[(i64, i64)]| Poly::new(v.iter().map(|&(a, b)| Q::from_ints(a, b)).collect());
            let Ok(f) = RatMap::new(to_poly(&num), to_poly(&den)) else { return Ok(()) };
            let solver = Preimager::new(&f, DEFAULT_TOL).unwrap();
            let y = SpherePoint::new(yr, yi);
            let pre = solver.solve(y).unwrap();
            prop_assert_eq!(pre.len(), f.degree());
            for x in pre {
                prop_assert!(solver.eval(x).chordal(&y) <= 10.0 * DEFAULT_TOL, "x={:?}", x);
            }
        }
    }
}
