//! Discretized Ruelle transfer operator and its Beltrami dual.
//!
//! Densities live on a square chart `[-L, L]^2` sampled at cell centers.
//! `R_*(phi)(y) = sum_{f(x) = y} phi(x) / f'(x)^2` is assembled once as a
//! sparse matrix: each target cell center is pulled back numerically and the
//! density is read at the preimages by bilinear interpolation. Mass whose
//! image leaves the chart is booked as leakage; preimages within half a cell
//! of a critical point are masked.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{ExtPoint, GaussianRational as Q, Poly, RatMap};
use crate::entropy::{aberth, MeasureCloud, Preimager, SpherePoint, DEFAULT_TOL};
use crate::error::{Error, Result};

pub const DEFAULT_EXTENT: f64 = 8.0;
pub const DEFAULT_RESOLUTION: usize = 512;
pub const MIN_RESOLUTION: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Chart {
    pub res: usize,
    pub extent: f64,
}

impl Chart {
    pub fn new(res: usize, extent: f64) -> Result<Self> {
        if res < MIN_RESOLUTION {
            return Err(Error::Invalid(format!("resolution {res} below {MIN_RESOLUTION}")));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Invalid(format!("chart extent must be positive, got {extent}")));
        }
        Ok(Chart { res, extent })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.extent / self.res as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.h() * self.h()
    }

    pub fn len(&self) -> usize {
        self.res * self.res
    }

    pub fn is_empty(&self) -> bool {
        self.res == 0
    }

    /// Center of cell `idx` (row-major, row = imaginary part).
    pub fn center(&self, idx: usize) -> Complex64 {
        let (i, j) = (idx % self.res, idx / self.res);
        let h = self.h();
        Complex64::new(-self.extent + h * (i as f64 + 0.5), -self.extent + h * (j as f64 + 0.5))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re.abs() < self.extent && z.im.abs() < self.extent
    }

    pub fn cell_of(&self, z: Complex64) -> Option<usize> {
        if !self.contains(z) {
            return None;
        }
        let h = self.h();
        let i = (((z.re + self.extent) / h) as usize).min(self.res - 1);
        let j = (((z.im + self.extent) / h) as usize).min(self.res - 1);
        Some(j * self.res + i)
    }

    /// Bilinear stencil at `z`: up to four `(cell, weight)` pairs; nodes off
    /// the grid are dropped.
    pub fn stencil(&self, z: Complex64) -> Vec<(usize, f64)> {
        let h = self.h();
        let fx = (z.re + self.extent) / h - 0.5;
        let fy = (z.im + self.extent) / h - 0.5;
        if !(fx > -1.0 && fy > -1.0 && fx < self.res as f64 && fy < self.res as f64) {
            return Vec::new();
        }
        let (i0, j0) = (fx.floor() as i64, fy.floor() as i64);
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let n = self.res as i64;
        [(0, 0, (1.0 - tx) * (1.0 - ty)), (1, 0, tx * (1.0 - ty)), (0, 1, (1.0 - tx) * ty), (1, 1, tx * ty)]
            .into_iter()
            .filter_map(|(di, dj, w)| {
                let (i, j) = (i0 + di, j0 + dj);
                (i >= 0 && j >= 0 && i < n && j < n && w > 0.0).then(|| ((j * n + i) as usize, w))
            })
            .collect()
    }

    fn interpolate(&self, cells: &[Complex64], z: Complex64) -> Complex64 {
        self.stencil(z).into_iter().map(|(k, w)| cells[k] * w).sum()
    }
}

/// An integrable density on the chart.
#[derive(Clone, Debug)]
pub struct GridDensity {
    pub chart: Chart,
    pub cells: Vec<Complex64>,
    /// Mass that has left the chart under operator application.
    pub leakage: f64,
}

impl GridDensity {
    pub fn zeros(chart: Chart) -> Self {
        GridDensity { chart, cells: vec![Complex64::new(0.0, 0.0); chart.len()], leakage: 0.0 }
    }

    pub fn from_fn(chart: Chart, f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        let cells = (0..chart.len()).into_par_iter().map(|k| f(chart.center(k))).collect();
        GridDensity { chart, cells, leakage: 0.0 }
    }

    pub fn l1_norm(&self) -> f64 {
        ordered_sum(self.cells.len(), |k| self.cells[k].norm(), 0.0) * self.chart.cell_area()
    }

    pub fn at(&self, z: Complex64) -> Complex64 {
        self.chart.interpolate(&self.cells, z)
    }

    pub fn scaled(&self, s: f64) -> Self {
        GridDensity { chart: self.chart, cells: self.cells.iter().map(|c| c * s).collect(), leakage: self.leakage * s }
    }

    /// `||self - other||_1`.
    pub fn distance(&self, other: &GridDensity) -> f64 {
        ordered_sum(self.cells.len(), |k| (self.cells[k] - other.cells[k]).norm(), 0.0) * self.chart.cell_area()
    }

    /// `<mu, phi> = int mu phi dA` (no conjugation).
    pub fn pair(&self, mu: &GridBeltrami) -> Complex64 {
        ordered_sum(self.cells.len(), |k| self.cells[k] * mu.cells[k], Complex64::new(0.0, 0.0)) * self.chart.cell_area()
    }
}

/// An essentially bounded function (Beltrami coefficient) on the chart.
#[derive(Clone, Debug)]
pub struct GridBeltrami {
    pub chart: Chart,
    pub cells: Vec<Complex64>,
    pub bound: f64,
}

impl GridBeltrami {
    pub fn from_fn(chart: Chart, f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        let cells: Vec<Complex64> = (0..chart.len()).into_par_iter().map(|k| f(chart.center(k))).collect();
        let bound = sup(&cells);
        GridBeltrami { chart, cells, bound }
    }

    pub fn sup_norm(&self) -> f64 {
        sup(&self.cells)
    }
}

// Fixed-size blocks combined in order: the result does not depend on how
// the thread pool splits the work, so reports are reproducible.
fn ordered_sum<V>(n: usize, f: impl Fn(usize) -> V + Sync, zero: V) -> V
where
    V: Copy + Send + Sync + std::ops::Add<Output = V>,
{
    const BLOCK: usize = 4096;
    let partials: Vec<V> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| (b * BLOCK..n.min((b + 1) * BLOCK)).fold(zero, |acc, k| acc + f(k)))
        .collect();
    partials.into_iter().fold(zero, |a, b| a + b)
}

fn sup(cells: &[Complex64]) -> f64 {
    cells.par_iter().map(|c| c.norm()).reduce(|| 0.0, f64::max)
}

/// Numerical critical points of `f` in the plane.
pub fn critical_points(f: &RatMap) -> Result<Vec<Complex64>> {
    let w = critical_polynomial(f);
    if w.degree() == 0 {
        return Ok(Vec::new());
    }
    aberth(&w.to_complex(), DEFAULT_TOL)
}

/// `N' D - N D'`, whose roots are the finite critical points.
pub fn critical_polynomial(f: &RatMap) -> Poly {
    let (n, d) = (f.num(), f.den());
    &(&n.derivative() * d) - &(n * &d.derivative())
}

/// The sparse matrix of `R_*` on one chart.
#[derive(Clone, Debug)]
pub struct RuelleOperator {
    pub chart: Chart,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<Complex64>,
    escapes: Vec<bool>,
    /// Preimage samples dropped next to critical points.
    pub masked: usize,
    /// Preimage samples outside the chart.
    pub outside: usize,
}

impl RuelleOperator {
    pub fn build(f: &RatMap, chart: Chart) -> Result<Self> {
        let solver = Preimager::new(f, DEFAULT_TOL)?;
        let crit = critical_points(f)?;
        let half = chart.h() / 2.0;
        let rows: Vec<(Vec<(u32, Complex64)>, usize, usize)> = (0..chart.len())
            .into_par_iter()
            .map(|k| {
                let y = SpherePoint::Finite(chart.center(k));
                let mut row: Vec<(u32, Complex64)> = Vec::with_capacity(4 * solver.degree());
                let (mut masked, mut outside) = (0, 0);
                for x in solver.solve(y)? {
                    let SpherePoint::Finite(x) = x else {
                        outside += 1;
                        continue;
                    };
                    if crit.iter().any(|c| (x - c).norm() < half) {
                        masked += 1;
                        continue;
                    }
                    let d = solver.derivative(x);
                    let w = (d * d).inv();
                    if !(w.re.is_finite() && w.im.is_finite()) {
                        masked += 1;
                        continue;
                    }
                    let st = chart.stencil(x);
                    if st.is_empty() {
                        outside += 1;
                    }
                    row.extend(st.into_iter().map(|(c, b)| (c as u32, w * b)));
                }
                Ok((row, masked, outside))
            })
            .collect::<Result<_>>()?;
        let escapes = (0..chart.len())
            .into_par_iter()
            .map(|k| match solver.eval(SpherePoint::Finite(chart.center(k))) {
                SpherePoint::Finite(w) => !chart.contains(w),
                SpherePoint::Infinity => true,
            })
            .collect();
        let mut offsets = Vec::with_capacity(chart.len() + 1);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        let (mut masked, mut outside) = (0, 0);
        offsets.push(0);
        for (row, m, o) in rows {
            masked += m;
            outside += o;
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        Ok(RuelleOperator { chart, offsets, cols, vals, escapes, masked, outside })
    }

    pub fn nonzeros(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, phi: &GridDensity) -> Result<GridDensity> {
        if phi.chart != self.chart {
            return Err(Error::Invalid("density and operator use different charts".into()));
        }
        let cells: Vec<Complex64> = (0..self.chart.len())
            .into_par_iter()
            .map(|k| {
                let (a, b) = (self.offsets[k], self.offsets[k + 1]);
                self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, v)| phi.cells[c as usize] * v).sum()
            })
            .collect();
        let leaked = ordered_sum(phi.cells.len(), |k| if self.escapes[k] { phi.cells[k].norm() } else { 0.0 }, 0.0)
            * self.chart.cell_area();
        Ok(GridDensity { chart: self.chart, cells, leakage: phi.leakage + leaked })
    }
}

pub fn ruelle_apply(f: &RatMap, phi: &GridDensity) -> Result<GridDensity> {
    RuelleOperator::build(f, phi.chart)?.apply(phi)
}

/// `B_f(mu) = mu(f) conj(f') / f'`, zero where `f'` vanishes or `f` leaves
/// the chart.
pub fn beltrami_apply(f: &RatMap, mu: &GridBeltrami) -> Result<GridBeltrami> {
    let solver = Preimager::new(f, DEFAULT_TOL)?;
    let chart = mu.chart;
    let cells: Vec<Complex64> = (0..chart.len())
        .into_par_iter()
        .map(|k| {
            let z = chart.center(k);
            let SpherePoint::Finite(w) = solver.eval(SpherePoint::Finite(z)) else {
                return Complex64::new(0.0, 0.0);
            };
            let d = solver.derivative(z);
            let n = d.norm();
            if n == 0.0 || !n.is_finite() {
                return Complex64::new(0.0, 0.0);
            }
            chart.interpolate(&mu.cells, w) * (d.conj() / d)
        })
        .collect();
    let bound = sup(&cells);
    Ok(GridBeltrami { chart, cells, bound })
}

#[derive(Clone, Debug, Serialize)]
pub struct CesaroRun {
    /// `||A_k phi||_1 / ||phi||_1` for `k = 1..=n`.
    pub cesaro_norms: Vec<f64>,
    /// `||R^k phi||_1 / ||phi||_1` for `k = 0..=n`.
    pub power_norms: Vec<f64>,
    #[serde(skip)]
    pub average: GridDensity,
}

/// Cesàro averages `A_k = (1/k) sum_{i<k} R_*^i phi`.
pub fn cesaro_ruelle(op: &RuelleOperator, phi: &GridDensity, n: usize) -> Result<CesaroRun> {
    let n0 = nonzero_norm(phi)?;
    let mut psi = phi.clone();
    let mut sum = GridDensity::zeros(phi.chart);
    let mut cesaro_norms = Vec::with_capacity(n);
    let mut power_norms = vec![1.0];
    for k in 1..=n {
        accumulate(&mut sum, &psi);
        psi = op.apply(&psi)?;
        power_norms.push(psi.l1_norm() / n0);
        cesaro_norms.push(sum.l1_norm() / k as f64 / n0);
    }
    let average = sum.scaled(1.0 / n.max(1) as f64);
    Ok(CesaroRun { cesaro_norms, power_norms, average })
}

fn accumulate(sum: &mut GridDensity, psi: &GridDensity) {
    sum.cells.par_iter_mut().zip(&psi.cells).for_each(|(s, p)| *s += p);
    sum.leakage += psi.leakage;
}

fn nonzero_norm(phi: &GridDensity) -> Result<f64> {
    let n0 = phi.l1_norm();
    if !(n0 > 0.0) {
        return Err(Error::Invalid("initial density must have positive L1 norm".into()));
    }
    Ok(n0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FixedPointVerdict {
    #[serde(rename = "FOUND")]
    Found,
    #[serde(rename = "DECAYED")]
    Decayed,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CandidateKind {
    Power,
    Cesaro,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointReport {
    pub verdict: FixedPointVerdict,
    /// Relative residual `||R phi - phi|| / ||phi||` of the best candidate.
    pub residual: f64,
    pub best: (CandidateKind, usize),
    /// Norm of the best candidate relative to the initial density.
    pub retention: f64,
    /// `||A_iters|| / ||phi0||`.
    pub final_cesaro_norm: f64,
    pub tol: f64,
    pub history: CesaroRun,
    pub leakage: f64,
    pub masked: usize,
}

pub const RETENTION_FLOOR: f64 = 0.3;
pub const DECAY_CEILING: f64 = 0.1;

/// Power iteration with Cesàro acceleration. Candidates are the iterates
/// `R^k phi0` and the averages `A_k`; the best is the smallest relative
/// residual among candidates that keep at least 30% of the initial norm.
pub fn fixed_point_search(op: &RuelleOperator, phi0: &GridDensity, iters: usize, tol: f64) -> Result<FixedPointReport> {
    let n0 = nonzero_norm(phi0)?;
    if iters == 0 {
        return Err(Error::Invalid("need at least one iteration".into()));
    }
    let mut psi = phi0.clone();
    let mut psi_norm = n0;
    let mut sum = GridDensity::zeros(phi0.chart);
    let mut best: Option<(f64, CandidateKind, usize, f64)> = None;
    let mut consider = |res: f64, kind, k, norm: f64| {
        if norm >= RETENTION_FLOOR * n0 && best.is_none_or(|b| res < b.0) {
            best = Some((res, kind, k, norm / n0));
        }
    };
    let (mut cesaro_norms, mut power_norms) = (Vec::with_capacity(iters), vec![1.0]);
    for k in 1..=iters {
        accumulate(&mut sum, &psi);
        let next = op.apply(&psi)?;
        // R(R^{k-1} phi) is the next iterate
        consider(next.distance(&psi) / psi_norm, CandidateKind::Power, k - 1, psi_norm);
        psi = next;
        psi_norm = psi.l1_norm();
        power_norms.push(psi_norm / n0);
        // R A_k - A_k = (R^k phi - phi) / k
        let a_norm = sum.l1_norm() / k as f64;
        cesaro_norms.push(a_norm / n0);
        if a_norm > 0.0 {
            consider(psi.distance(phi0) / k as f64 / a_norm, CandidateKind::Cesaro, k, a_norm);
        }
    }
    let final_cesaro_norm = *cesaro_norms.last().unwrap();
    let (residual, kind, k, retention) = best.unwrap_or((f64::INFINITY, CandidateKind::Power, 0, 0.0));
    let verdict = if residual <= tol {
        FixedPointVerdict::Found
    } else if final_cesaro_norm < DECAY_CEILING {
        FixedPointVerdict::Decayed
    } else {
        FixedPointVerdict::Inconclusive
    };
    let leakage = psi.leakage;
    let average = sum.scaled(1.0 / iters as f64);
    Ok(FixedPointReport {
        verdict,
        residual,
        best: (kind, k),
        retention,
        final_cesaro_norm,
        tol,
        history: CesaroRun { cesaro_norms, power_norms, average },
        leakage,
        masked: op.masked,
    })
}

/// The degree-4 duplication map `(z^2+1)^2 / (4z(z^2-1))` of the
/// lemniscatic Weierstrass function.
pub fn lattes_duplication_map() -> RatMap {
    RatMap::new(Poly::from_ints(&[1, 0, 2, 0, 1]), Poly::from_ints(&[0, -4, 0, 4])).expect("valid map")
}

#[derive(Clone, Debug, Serialize)]
pub struct PostcriticalCertificate {
    pub set: Vec<String>,
    pub critical_polynomial: String,
    pub infinity_critical: bool,
    /// Every critical value lies in the set.
    pub critical_values_inside: bool,
    /// The set is forward invariant.
    pub forward_invariant: bool,
}

impl PostcriticalCertificate {
    pub fn holds(&self) -> bool {
        self.critical_values_inside && self.forward_invariant
    }
}

fn infinity_local_degree(f: &RatMap) -> (usize, ExtPoint) {
    let (n, d) = (f.num(), f.den());
    if n.degree() > d.degree() {
        (n.degree() - d.degree(), ExtPoint::Infinity)
    } else {
        let p = if n.degree() == d.degree() { &n.leading() / &d.leading() } else { Q::from_ints(0, 0) };
        let rest = n - &d.scale(&p);
        let lost = if rest.is_zero() { d.degree() } else { d.degree() - rest.degree() };
        (lost, ExtPoint::Finite(p))
    }
}

/// Exact check that `set` contains every critical value of `f` and is
/// forward invariant, so `f` is postcritically finite with postcritical set
/// inside `set`.
///
/// Critical values are never computed: the squarefree part of `N'D - ND'`
/// must divide `prod_{p in set} (N - pD)` (with `D` standing for infinity).
pub fn postcritical_certificate(f: &RatMap, set: &[ExtPoint]) -> Result<PostcriticalCertificate> {
    if f.is_twisted() {
        return Err(Error::NotRepresentable);
    }
    let (n, d) = (f.num(), f.den());
    let w = critical_polynomial(f);
    let mut product = Poly::one();
    for p in set {
        let factor = match p {
            ExtPoint::Infinity => d.clone(),
            ExtPoint::Finite(v) => n - &d.scale(v),
        };
        product = &product * &factor;
    }
    let crit = w.squarefree();
    let mut inside = product.div_rem(&crit).1.is_zero();
    let (local, image) = infinity_local_degree(f);
    let infinity_critical = local >= 2;
    if infinity_critical {
        inside &= set.contains(&image);
    }
    let mut invariant = true;
    for p in set {
        invariant &= set.contains(&f.eval(p)?);
    }
    Ok(PostcriticalCertificate {
        set: set
            .iter()
            .map(|p| match p {
                ExtPoint::Finite(q) => q.to_string(),
                ExtPoint::Infinity => "inf".to_string(),
            })
            .collect(),
        critical_polynomial: w.to_string(),
        infinity_critical,
        critical_values_inside: inside,
        forward_invariant: invariant,
    })
}

/// The duplication map's certificate with postcritical set `{0, 1, -1, inf}`.
pub fn lattes_certificate() -> Result<PostcriticalCertificate> {
    let set = [
        ExtPoint::Finite(Q::from_ints(0, 0)),
        ExtPoint::Finite(Q::from_ints(1, 0)),
        ExtPoint::Finite(Q::from_ints(-1, 0)),
        ExtPoint::Infinity,
    ];
    postcritical_certificate(&lattes_duplication_map(), &set)
}

/// Density raster of a cloud: mass per cell divided by the cell area.
pub fn raster(cloud: &MeasureCloud, chart: Chart) -> GridDensity {
    let mut g = GridDensity::zeros(chart);
    let area = chart.cell_area();
    let mut outside = 0.0;
    for (p, w) in cloud.points.iter().zip(&cloud.weights) {
        match p.finite().and_then(|z| chart.cell_of(z)) {
            Some(k) => g.cells[k] += Complex64::new(w / area, 0.0),
            None => outside += w,
        }
    }
    g.leakage = outside;
    g
}

/// Fits a polynomial `p` of degree `<= degree` with `p(f(z)) ~ p(z) f'(z)^2 / deg f`
/// on the cloud points, by least squares (smallest right singular vector).
/// Coefficients are lowest degree first, normalized so the largest is 1.
pub fn fit_invariant_twist(f: &RatMap, cloud: &MeasureCloud, degree: usize, chart: Chart) -> Result<Vec<Complex64>> {
    let solver = Preimager::new(f, DEFAULT_TOL)?;
    let deg = solver.degree() as f64;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for p in &cloud.points {
        if rows.len() >= 4000 {
            break;
        }
        let Some(z) = p.finite().filter(|z| chart.contains(*z)) else { continue };
        let SpherePoint::Finite(w) = solver.eval(*p) else { continue };
        if !chart.contains(w) {
            continue;
        }
        let d2 = solver.derivative(z).powi(2) / deg;
        let row: Vec<Complex64> = (0..=degree).map(|k| w.powi(k as i32) - z.powi(k as i32) * d2).collect();
        let norm = row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            rows.push(row.into_iter().map(|c| c / norm).collect());
        }
    }
    if rows.len() <= degree {
        return Err(Error::Invalid("not enough cloud points inside the chart to fit a twist".into()));
    }
    let m = DMatrix::from_fn(rows.len(), degree + 1, |i, j| rows[i][j]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Invalid("singular value decomposition failed".into()))?;
    let smallest = svd.singular_values.argmin().0;
    let mut c: Vec<Complex64> = vt.row(smallest).iter().map(|x| x.conj()).collect();
    let big = c.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    for x in &mut c {
        *x /= big;
    }
    Ok(c)
}

/// `raster(cloud) * conj(p)/|p|` with `p` the fitted invariant twist.
pub fn twisted_candidate(f: &RatMap, cloud: &MeasureCloud, chart: Chart) -> Result<(GridDensity, Vec<Complex64>)> {
    let coeffs = fit_invariant_twist(f, cloud, 7, chart)?;
    let mut g = raster(cloud, chart);
    g.cells.par_iter_mut().enumerate().for_each(|(k, cell)| {
        let z = chart.center(k);
        let p = coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a);
        let n = p.norm();
        *cell *= if n > 0.0 { p.conj() / n } else { Complex64::new(0.0, 0.0) };
    });
    g.leakage = 0.0;
    Ok((g, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bump(center: Complex64, width: f64) -> impl Fn(Complex64) -> Complex64 + Sync {
        move |z| c((-(z - center).norm_sqr() / (width * width)).exp(), 0.0)
    }

    #[test]
    fn chart_geometry() {
        let ch = Chart::new(64, 2.0).unwrap();
        assert!(Chart::new(32, 2.0).is_err());
        assert_eq!(ch.cell_of(ch.center(1000)), Some(1000));
        let st = ch.stencil(ch.center(1000));
        assert_eq!(st, vec![(1000, 1.0)]);
    }

    #[test]
    fn identity_map_is_identity() {
        let ch = Chart::new(128, 2.0).unwrap();
        let phi = GridDensity::from_fn(ch, bump(c(0.2, -0.1), 0.5));
        let out = ruelle_apply(&RatMap::identity(), &phi).unwrap();
        assert!(out.distance(&phi) <= 1e-3 * phi.l1_norm());
    }

    #[test]
    fn translation_matches_closed_form() {
        let ch = Chart::new(256, 2.0).unwrap();
        let shift = RatMap::poly(Poly::new(vec![Q::from_fracs(1, 7, 1, 11), Q::from_ints(1, 0)])).unwrap();
        let phi = GridDensity::from_fn(ch, bump(c(0.0, 0.0), 0.4));
        let out = ruelle_apply(&shift, &phi).unwrap();
        let exact = GridDensity::from_fn(ch, |y| bump(c(0.0, 0.0), 0.4)(y - c(1.0 / 7.0, 1.0 / 11.0)));
        assert!(out.distance(&exact) <= 1e-3 * phi.l1_norm());
    }

    #[test]
    fn linearity() {
        let ch = Chart::new(64, 2.0).unwrap();
        let op = RuelleOperator::build(&RatMap::power(2), ch).unwrap();
        let a = GridDensity::from_fn(ch, bump(c(0.5, 0.1), 0.3));
        let b = GridDensity::from_fn(ch, |z| c(z.re, z.im * z.re) * 0.1);
        let mut comb = a.clone();
        for (x, y) in comb.cells.iter_mut().zip(&b.cells) {
            *x = *x * 2.0 - *y * c(0.0, 3.0);
        }
        let lhs = op.apply(&comb).unwrap();
        let (ra, rb) = (op.apply(&a).unwrap(), op.apply(&b).unwrap());
        let mut rhs = ra.clone();
        for (x, y) in rhs.cells.iter_mut().zip(&rb.cells) {
            *x = *x * 2.0 - *y * c(0.0, 3.0);
        }
        assert!(lhs.distance(&rhs) <= 1e-12 * (1.0 + rhs.l1_norm()));
    }

    #[test]
    fn beltrami_closed_form_for_powers() {
        let ch = Chart::new(128, 2.0).unwrap();
        let k = c(0.3, -0.4);
        for n in 2..=3 {
            let mu = GridBeltrami::from_fn(ch, |_| k);
            let out = beltrami_apply(&RatMap::power(n), &mu).unwrap();
            let mut worst = 0.0_f64;
            for idx in 0..ch.len() {
                let z = ch.center(idx);
                // stay where f(z) is well inside the chart
                if z.norm().powi(n as i32) > 1.5 {
                    continue;
                }
                let exact = k * (z.conj() / z).powi(n as i32 - 1);
                worst = worst.max((out.cells[idx] - exact).norm());
            }
            assert!(worst <= 1e-3, "n = {n}: {worst}");
            assert!(out.sup_norm() <= mu.sup_norm() * 1.01);
        }
        let zero = GridBeltrami::from_fn(ch, |_| c(0.0, 0.0));
        assert_eq!(beltrami_apply(&RatMap::power(2), &zero).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn duality_for_squaring() {
        let ch = Chart::new(256, 2.0).unwrap();
        let f = RatMap::power(2);
        let phi = GridDensity::from_fn(ch, bump(c(0.3, 0.4), 0.35));
        let mu = GridBeltrami::from_fn(ch, |z| c((2.0 * z.re).cos(), (3.0 * z.im).sin()) / (1.0 + z.norm_sqr()));
        let lhs = phi.pair(&beltrami_apply(&f, &mu).unwrap());
        let rhs = ruelle_apply(&f, &phi).unwrap().pair(&mu);
        assert!((lhs - rhs).norm() <= 1e-2 * mu.sup_norm() * phi.l1_norm(), "{lhs} vs {rhs}");
    }

    #[test]
    fn annulus_bump_contracts() {
        let ch = Chart::new(256, 2.5).unwrap();
        let phi = GridDensity::from_fn(ch, |z| {
            let r = z.norm();
            if r > 0.5 && r < 2.0 {
                c((PI * (r - 0.5) / 1.5).sin().powi(2), 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let out = ruelle_apply(&RatMap::power(2), &phi).unwrap();
        assert!(out.l1_norm() <= phi.l1_norm() * 1.02);
        assert!(out.leakage > 0.0);
    }

    #[test]
    fn lattes_is_postcritically_finite() {
        let f = lattes_duplication_map();
        assert_eq!(f.degree(), 4);
        let cert = lattes_certificate().unwrap();
        assert!(cert.holds());
        assert!(!cert.infinity_critical);
        // dropping a point breaks the certificate
        let partial = postcritical_certificate(&f, &[ExtPoint::Finite(Q::from_ints(0, 0)), ExtPoint::Infinity]).unwrap();
        assert!(!partial.holds());
        // z^2 - 1: 0 -> -1 -> 0
        let basilica = RatMap::poly(Poly::from_ints(&[-1, 0, 1])).unwrap();
        let set = [ExtPoint::Finite(Q::from_ints(0, 0)), ExtPoint::Finite(Q::from_ints(-1, 0)), ExtPoint::Infinity];
        assert!(postcritical_certificate(&basilica, &set).unwrap().holds());
    }

    #[test]
    fn zero_density_rejected() {
        let ch = Chart::new(64, 2.0).unwrap();
        let op = RuelleOperator::build(&RatMap::power(2), ch).unwrap();
        assert!(fixed_point_search(&op, &GridDensity::zeros(ch), 5, 0.05).is_err());
    }
}
