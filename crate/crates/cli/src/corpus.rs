//! Acceptance criteria AC1–AC10 over the fixture corpus.
//!
//! Each criterion loads its fixtures, runs the library, checks the stated
//! thresholds (runtime limits included) and returns a one-line outcome.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratsemi_core::algebra::{maps_equal, ExtPoint};
use ratsemi_core::entropy::{
    angular_discrepancy, backward_measure, equal_measure_test, invariance_defects, wasserstein1_line, Agreement,
    EqualMeasureBudget, MeasureCloud, SpherePoint,
};
use ratsemi_core::orbits::{dip_test, DipVerdict, OrbitMode, OrbitOptions};
use ratsemi_core::relations::{aut_group, commutes, find_common_iterate, is_levin_pair, symmetry_group};
use ratsemi_core::ruelle::{
    beltrami_apply, fixed_point_search, lattes_certificate, twisted_candidate, Chart, FixedPointVerdict, GridBeltrami,
    GridDensity, RuelleOperator, DEFAULT_EXTENT, RETENTION_FLOOR,
};
use ratsemi_core::semigroup::{cayley_ball, classify, ideal_intersection, theta_defect, Embedding, LevinFunction, Verdict};
use ratsemi_core::{Error, GaussianRational as Q, RatMap};
use serde::Serialize;

use crate::config::Filter;
use crate::io;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Symbolic,
    Numeric,
}

pub struct Criterion {
    pub id: &'static str,
    pub kind: Kind,
    pub fixtures: &'static [&'static str],
    /// Runtime limit, where the criterion states one.
    pub limit: Option<Duration>,
    run: fn(&Corpus) -> Result<Check, CliError>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: &'static str,
    pub kind: Kind,
    pub passed: bool,
    pub seconds: f64,
    pub detail: String,
}

/// Result of the checks inside one criterion.
pub struct Check {
    passed: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { passed: true, notes: Vec::new() }
    }

    fn expect(&mut self, ok: bool, note: impl Into<String>) {
        let note = note.into();
        if !ok {
            self.passed = false;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }
}

pub struct Corpus {
    dir: PathBuf,
    pub seed: u64,
}

impl Corpus {
    pub fn new(dir: impl Into<PathBuf>, seed: u64) -> Self {
        Corpus { dir: dir.into(), seed }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn maps(&self, name: &str) -> Result<Vec<RatMap>, CliError> {
        io::load_maps(&self.path(name))
    }

    fn map(&self, name: &str) -> Result<RatMap, CliError> {
        io::load_map(&self.path(name))
    }

    /// Fails with the first missing fixture among `criteria`.
    pub fn check_fixtures(&self, criteria: &[&Criterion]) -> Result<(), CliError> {
        for c in criteria {
            for f in c.fixtures {
                let p = self.path(f);
                if !p.is_file() {
                    return Err(CliError::MissingFixture(p));
                }
            }
        }
        Ok(())
    }
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: "AC1", kind: Kind::Symbolic, fixtures: &["rotated_quintic.json"], limit: Some(secs(1)), run: ac1 },
    Criterion { id: "AC2", kind: Kind::Symbolic, fixtures: &["sign_flip.json"], limit: None, run: ac2 },
    Criterion { id: "AC3", kind: Kind::Symbolic, fixtures: &[], limit: Some(secs(5)), run: ac3 },
    Criterion {
        id: "AC4",
        kind: Kind::Symbolic,
        fixtures: &["rotated_quintic.json", "power_family.json"],
        limit: Some(secs(10)),
        run: ac4,
    },
    Criterion { id: "AC5", kind: Kind::Symbolic, fixtures: &["sign_flip.json"], limit: None, run: ac5 },
    Criterion { id: "AC6", kind: Kind::Numeric, fixtures: &["z2.json", "chebyshev.json"], limit: Some(secs(30)), run: ac6 },
    Criterion { id: "AC7", kind: Kind::Numeric, fixtures: &["z2.json", "chebyshev.json"], limit: None, run: ac7 },
    Criterion {
        id: "AC8",
        kind: Kind::Numeric,
        fixtures: &["sign_flip.json", "z2.json", "chebyshev.json"],
        limit: None,
        run: ac8,
    },
    Criterion { id: "AC9", kind: Kind::Symbolic, fixtures: &["z2.json", "z3.json", "z4.json"], limit: Some(secs(1)), run: ac9 },
    Criterion {
        id: "AC10",
        kind: Kind::Numeric,
        fixtures: &["lattes.json", "basilica.json", "z2.json"],
        limit: Some(secs(600)),
        run: ac10,
    },
];

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub fn criterion(id: &str) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

pub fn select(filter: Filter) -> Vec<&'static Criterion> {
    CRITERIA
        .iter()
        .filter(|c| match filter {
            Filter::All => true,
            Filter::Symbolic => c.kind == Kind::Symbolic,
            Filter::Numeric => c.kind == Kind::Numeric,
        })
        .collect()
}

/// Runs one criterion. Library errors count as failures; missing or
/// unreadable fixtures are returned as errors.
pub fn run_criterion(c: &Criterion, corpus: &Corpus) -> Result<Outcome, CliError> {
    let t = Instant::now();
    let res = (c.run)(corpus);
    let elapsed = t.elapsed();
    let (mut passed, mut detail) = match res {
        Ok(check) => (check.passed, check.notes.join("; ")),
        Err(e @ (CliError::MissingFixture(_) | CliError::Io { .. })) => return Err(e),
        Err(e) => (false, format!("FAILED error: {e}")),
    };
    if let Some(limit) = c.limit.filter(|l| elapsed > *l) {
        passed = false;
        detail.push_str(&format!("; FAILED runtime {:.2}s over {}s", elapsed.as_secs_f64(), limit.as_secs()));
    }
    Ok(Outcome { id: c.id, kind: c.kind, passed, seconds: elapsed.as_secs_f64(), detail })
}

pub fn table(outcomes: &[Outcome]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(["criterion", "kind", "status", "seconds", "detail"]).map_err(err)?;
    for o in outcomes {
        let kind = match o.kind {
            Kind::Symbolic => "symbolic",
            Kind::Numeric => "numeric",
        };
        let status = if o.passed { "pass" } else { "fail" };
        w.write_record([o.id, kind, status, &format!("{:.3}", o.seconds), &o.detail]).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
}

fn ac1(c: &Corpus) -> Result<Check, CliError> {
    let family = c.maps("rotated_quintic.json")?;
    let p = &family[0];
    let poly = p.as_poly().ok_or(Error::NotAPolynomial)?;
    let p2 = p.iterate(2)?;
    let omega_p = RatMap::rotation(1, 3).compose(p)?;
    let mut ck = Check::new();
    let g = symmetry_group(poly)?;
    ck.expect(g.order == 3, format!("|G(P)| = {}", g.order));
    let aut = aut_group(poly)?;
    ck.expect(aut.is_trivial(), format!("|Aut(P)| = {}", aut.order));
    let aut2 = aut_group(p2.as_poly().ok_or(Error::NotAPolynomial)?)?;
    ck.expect(aut2.order == 3, format!("|Aut(P^2)| = {}", aut2.order));
    let c1 = commutes(&omega_p, p)?;
    ck.expect(!c1, format!("wP o P = P o wP: {c1}"));
    let c2 = commutes(&omega_p, &p2)?;
    ck.expect(c2, format!("wP o P^2 = P^2 o wP: {c2}"));
    Ok(ck)
}

fn ac2(c: &Corpus) -> Result<Check, CliError> {
    let maps = c.maps("sign_flip.json")?;
    let (p, q) = (&maps[0], &maps[1]);
    let mut ck = Check::new();
    let levin = is_levin_pair(p, q)?;
    ck.expect(levin, format!("Levin pair: {levin}"));
    let bound = 1 << 12;
    match find_common_iterate(p, q, bound)? {
        Some((m, n)) => {
            let eq = maps_equal(&p.iterate(m)?, &q.iterate(n)?);
            ck.expect((m, n) == (2, 2) && eq, format!("common iterate ({m}, {n}), witness equal: {eq}"));
        }
        None => {
            let (p2, q2) = (p.iterate(2)?, q.iterate(2)?);
            ck.expect(false, format!("no common iterate up to degree {bound}; P^2 = {p2}, Q^2 = {q2}"));
        }
    }
    Ok(ck)
}

fn ac3(c: &Corpus) -> Result<Check, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (mut within, mut attained) = (0, 0);
    let total = 200;
    for _ in 0..total {
        let m = rng.gen_range(1..=4usize);
        let n = rng.gen_range(1..=16usize);
        let window = n + 2 + rng.gen_range(0..8usize);
        let values = (0..m)
            .map(|_| {
                (0..window)
                    .map(|_| BigRational::new(BigInt::from(rng.gen_range(-50..=50i64)), BigInt::from(rng.gen_range(1..=9i64))))
                    .collect()
            })
            .collect();
        let phi = LevinFunction::new(values)?;
        let h = rng.gen_range(1..=m);
        let d = theta_defect(n, h, &phi)?;
        let bound = BigRational::from_integer(BigInt::from(2 * m)) * phi.sup_norm()
            / BigRational::from_integer(BigInt::from(m * n + 1));
        if d.defect <= bound && d.bound == bound {
            within += 1;
        }
        if d.attains_bound {
            attained += 1;
        }
    }
    let mut ck = Check::new();
    ck.expect(within == total, format!("{within}/{total} within 2m|phi|/(mn+1)"));
    ck.notes.push(format!("equality attained in {attained}/{total}"));
    Ok(ck)
}

fn ac4(c: &Corpus) -> Result<Check, CliError> {
    let family = c.maps("rotated_quintic.json")?;
    let mut ck = Check::new();
    let v = classify(&family, 1 << 12)?;
    ck.expect(v.is_positive(), "example family POSITIVE");
    ck.expect(v.reverify(), "witnesses re-verify");
    if let Verdict::Positive { witnesses, structure, conditions, .. } = &v {
        let mut all = true;
        for w in witnesses {
            all &= maps_equal(&family[w.left].iterate(w.m)?, &family[w.right].iterate(w.n)?);
        }
        ck.expect(all && !witnesses.is_empty(), format!("{} common-iterate witnesses recomputed", witnesses.len()));
        ck.expect(conditions.len() == 6, format!("{} equivalent conditions", conditions.len()));
        match structure {
            Some(s) => ck.expect(
                s.verified && s.embedding == Embedding::InsideAeT,
                format!("AE(T) data: |G| = {}, |A| = {}, |K| = {}, embedding {:?}", s.group.order, s.aut_order, s.kernel_order, s.embedding),
            ),
            None => ck.expect(false, "structure data missing"),
        }
    }
    let powers = c.maps("power_family.json")?;
    let rejected = matches!(classify(&powers, 1 << 12), Err(Error::NotAdmissible(_)));
    ck.expect(rejected, "power-map family NotAdmissible");
    Ok(ck)
}

fn ac5(c: &Corpus) -> Result<Check, CliError> {
    let gens = c.maps("sign_flip.json")?;
    let ball = cayley_ball(&gens, 3, u64::MAX)?;
    let elems: Vec<&RatMap> = ball.maps().collect();
    let (mut found, mut total) = (0, 0);
    for p in &elems {
        for q in &elems {
            total += 1;
            if let Some((a, b)) = ideal_intersection(p, q, &gens, 3)? {
                if maps_equal(&a.map.compose(p)?, &b.map.compose(q)?) {
                    found += 1;
                }
            }
        }
    }
    let mut ck = Check::new();
    ck.expect(found == total, format!("{found}/{total} pairs of the length-3 ball with verified witnesses"));
    Ok(ck)
}

fn arcsine_oracle(n: usize) -> Vec<(f64, f64)> {
    (0..n).map(|k| (2.0 * (std::f64::consts::TAU * (k as f64 + 0.5) / n as f64).cos(), 1.0)).collect()
}

fn clouds(c: &Corpus) -> Result<(MeasureCloud, MeasureCloud, RatMap, RatMap), CliError> {
    let (z2, cheb) = (c.map("z2.json")?, c.map("chebyshev.json")?);
    let circle = backward_measure(&z2, None, 12, 20_000, c.seed)?;
    let interval = backward_measure(&cheb, None, 14, 20_000, c.seed)?;
    Ok((circle, interval, z2, cheb))
}

fn ac6(c: &Corpus) -> Result<Check, CliError> {
    let (circle, interval, _, _) = clouds(c)?;
    let mut ck = Check::new();
    let radial = circle.points.iter().filter_map(SpherePoint::finite).map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    let finite = circle.points.iter().all(|p| p.finite().is_some());
    ck.expect(finite && radial <= 1e-3, format!("max ||z|-1| = {radial:.2e}"));
    let ang = angular_discrepancy(&circle);
    ck.expect(ang <= 0.02, format!("angular discrepancy {ang:.4}"));
    let xs: Vec<(f64, f64)> = interval
        .points
        .iter()
        .zip(&interval.weights)
        .map(|(p, w)| (p.finite().map_or(f64::INFINITY, |z| z.re), *w))
        .collect();
    let w1 = wasserstein1_line(&xs, &arcsine_oracle(20_000));
    ck.expect(w1 <= 0.02, format!("W1 to arcsine {w1:.4}"));
    Ok(ck)
}

fn ac7(c: &Corpus) -> Result<Check, CliError> {
    let (circle, interval, z2, cheb) = clouds(c)?;
    let mut ck = Check::new();
    for (name, f, mu) in [("z^2", &z2, &circle), ("z^2-2", &cheb, &interval)] {
        let d = invariance_defects(f, mu, 10)?;
        let worst = d.iter().copied().fold(0.0, f64::max);
        ck.expect(d.len() == 10 && worst <= 0.03, format!("{name}: max Lyubich defect {worst:.4} over {}", d.len()));
    }
    Ok(ck)
}

fn ac8(c: &Corpus) -> Result<Check, CliError> {
    let pair = c.maps("sign_flip.json")?;
    let (z2, cheb) = (c.map("z2.json")?, c.map("chebyshev.json")?);
    let budget = EqualMeasureBudget { seed: c.seed, ..EqualMeasureBudget::default() };
    let mut ck = Check::new();
    let r = equal_measure_test(&pair[0], &pair[1], &budget)?;
    ck.expect(
        r.agreement == Agreement::AgreeEqual && r.distance <= 0.02,
        format!("(z^2, -z^2): {:?}, distance {:.4}, Levin {:?}", r.agreement, r.distance, r.levin),
    );
    let r = equal_measure_test(&z2, &cheb, &budget)?;
    ck.expect(
        r.agreement == Agreement::AgreeDistinct && r.distance >= 0.2,
        format!("(z^2, z^2-2): {:?}, distance {:.4}", r.agreement, r.distance),
    );
    Ok(ck)
}

fn ac9(c: &Corpus) -> Result<Check, CliError> {
    let (z2, z3, z4) = (c.map("z2.json")?, c.map("z3.json")?, c.map("z4.json")?);
    let z0 = ExtPoint::Finite(Q::from_ints(2, 0));
    let opts = OrbitOptions::new(OrbitMode::Exponent);
    let mut ck = Check::new();
    let s = dip_test(&z2, &z4, &z0, 40, None, &opts)?;
    ck.expect(s.verdict == DipVerdict::Strong && s.count > 8, format!("(z^2, z^4): {:?} count {}", s.verdict, s.count));
    let w = dip_test(&z2, &z3, &z0, 40, None, &opts)?;
    ck.expect(w.verdict == DipVerdict::Weak && w.count == 1, format!("(z^2, z^3): {:?} count {}", w.verdict, w.count));
    Ok(ck)
}

fn ac10(c: &Corpus) -> Result<Check, CliError> {
    let mut ck = Check::new();
    let lattes = c.map("lattes.json")?;
    let cert = lattes_certificate()?;
    let same = maps_equal(&lattes, &ratsemi_core::ruelle::lattes_duplication_map());
    ck.expect(same && cert.holds(), format!("postcritical certificate {:?} (fixture matches: {same})", cert.set));
    if !ck.passed {
        return Ok(ck);
    }

    // duality on 20 random smooth fixtures for z^2
    let z2 = c.map("z2.json")?;
    let chart = Chart::new(256, 2.0)?;
    let op = RuelleOperator::build(&z2, chart)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let center = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let width = rng.gen_range(0.2..0.6);
        let (a, b, k) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..3.0));
        let phi = GridDensity::from_fn(chart, move |z| Complex64::new((-(z - center).norm_sqr() / (width * width)).exp(), 0.0));
        let mu = GridBeltrami::from_fn(chart, move |z| Complex64::new(a * (k * z.re).cos(), b * (k * z.im).sin()));
        let lhs = phi.pair(&beltrami_apply(&z2, &mu)?);
        let rhs = op.apply(&phi)?.pair(&mu);
        worst = worst.max((lhs - rhs).norm() / (mu.sup_norm() * phi.l1_norm()));
    }
    ck.expect(worst <= 1e-2, format!("duality residual {worst:.2e} over 20 fixtures"));

    let chart = Chart::new(512, DEFAULT_EXTENT)?;
    let start = Some(SpherePoint::new(0.3, 0.2));
    let cloud = backward_measure(&lattes, start, 10, 1 << 20, c.seed)?;
    let (phi0, _) = twisted_candidate(&lattes, &cloud, chart)?;
    let r = fixed_point_search(&RuelleOperator::build(&lattes, chart)?, &phi0, 40, 0.05)?;
    ck.expect(
        r.verdict == FixedPointVerdict::Found && r.residual <= 0.05 && r.retention >= RETENTION_FLOOR,
        format!("Lattes: {:?}, residual {:.4}, retention {:.3}", r.verdict, r.residual, r.retention),
    );

    let basilica = c.map("basilica.json")?;
    let cloud = backward_measure(&basilica, start, 18, 1 << 18, c.seed)?;
    let (phi0, _) = twisted_candidate(&basilica, &cloud, chart)?;
    let r = fixed_point_search(&RuelleOperator::build(&basilica, chart)?, &phi0, 40, 0.05)?;
    ck.expect(
        r.verdict == FixedPointVerdict::Decayed && r.final_cesaro_norm < 0.1,
        format!("z^2-1: {:?}, Cesaro norm {:.4} at 40", r.verdict, r.final_cesaro_norm),
    );
    Ok(ck)
}

pub fn fixtures_dir_default() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}
