//! One function per command. Each returns the JSON report text and the
//! artifacts to write; `run` does the writing.

use std::path::PathBuf;

use num_complex::Complex64;
use ratsemi_core::entropy::{
    backward_measure, equal_measure_test, measure_distances, EqualMeasureBudget, TestDictionary,
};
use ratsemi_core::orbits::{dip_test, preferred_mode, OrbitMode, OrbitOptions};
use ratsemi_core::relations::{
    common_iterate_report, commute_report, exceptional_report, levin_report, RelationReport,
};
use ratsemi_core::ruelle::{
    cesaro_ruelle, fixed_point_search, lattes_duplication_map, postcritical_certificate, twisted_candidate, Chart,
    GridDensity, RuelleOperator,
};
use ratsemi_core::semigroup::{classify, ep_structure, theta_defect, LevinFunction, StructureReport, Verdict};
use ratsemi_core::{Error, GaussianRational as Q, RatMap};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    Check, ClassifyArgs, CompareArgs, DipArgs, InitialDensity, MeasureArgs, OrbitModeArg, RelationsArgs, RuelleArgs,
    RuelleMode, RunConfig, StructureArgs, ThetaArgs,
};
use crate::io;
use crate::witness::{Report, Witness, SCHEMA};
use crate::CliError;

pub struct Output {
    pub report: String,
    pub artifacts: Vec<(PathBuf, Vec<u8>)>,
}

fn render<T: Serialize>(cfg: &RunConfig, result: T, witness: Witness) -> String {
    let report = Report { schema: SCHEMA, command: cfg.command.name(), config: cfg, result, witness };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    text
}

fn report_only(text: String) -> Output {
    Output { report: text, artifacts: Vec::new() }
}

fn relation_witness(w: &mut Witness, r: &RelationReport) {
    for id in &r.identities {
        w.push_explicit(id.statement.clone(), &id.lhs, &id.rhs, id.equal);
    }
}

pub fn relations(cfg: &RunConfig, a: &RelationsArgs) -> Result<Output, CliError> {
    let maps = io::load_maps(&a.maps)?;
    let mut w = Witness::with_maps(&maps);
    let report = match a.check {
        Check::Exceptional => {
            let mut reports = Vec::new();
            for f in &maps {
                let p = f.as_poly().ok_or(Error::NotAPolynomial)?;
                reports.push(exceptional_report(p)?);
            }
            return Ok(report_only(render(cfg, reports, w)));
        }
        _ if maps.len() != 2 => {
            return Err(CliError::Config(format!("{}: expected two maps, found {}", a.maps.display(), maps.len())));
        }
        Check::Levin => {
            let r = levin_report(&maps[0], &maps[1])?;
            let eq = |l: &RatMap, r: &RatMap| l == r;
            let (q, rr) = (&maps[0], &maps[1]);
            w.push_word("Q o R = Q o Q", vec![(0, 1), (1, 1)], vec![(0, 1), (0, 1)], eq(&q.compose(rr)?, &q.compose(q)?));
            w.push_word("R o Q = R o R", vec![(1, 1), (0, 1)], vec![(1, 1), (1, 1)], eq(&rr.compose(q)?, &rr.compose(rr)?));
            r
        }
        Check::Commute => {
            let r = commute_report(&maps[0], &maps[1])?;
            w.push_word("P o Q = Q o P", vec![(0, 1), (1, 1)], vec![(1, 1), (0, 1)], r.holds);
            r
        }
        Check::CommonIterate => {
            let r = common_iterate_report(&maps[0], &maps[1], a.max_degree)?;
            if let Some((m, n)) = r.exponents {
                w.push_word(format!("P^{m} = Q^{n}"), vec![(0, m)], vec![(1, n)], true);
            }
            r
        }
    };
    relation_witness(&mut w, &report);
    Ok(report_only(render(cfg, report, w)))
}

fn structure_witness(w: &mut Witness, s: &StructureReport) {
    for id in &s.identities {
        w.push_explicit(id.statement.clone(), &id.lhs, &id.rhs, id.equal);
    }
}

pub fn classify_cmd(cfg: &RunConfig, a: &ClassifyArgs) -> Result<Output, CliError> {
    let family = io::load_maps(&a.maps)?;
    let verdict = classify(&family, a.budget)?;
    let mut w = Witness::with_maps(&family);
    let ws = match &verdict {
        Verdict::Positive { witnesses, structure, .. } => {
            if let Some(s) = structure {
                structure_witness(&mut w, s);
            }
            witnesses
        }
        Verdict::Undetermined { witnesses, .. } => witnesses,
    };
    for it in ws {
        w.push_word(it.identity.statement.clone(), vec![(it.left, it.m)], vec![(it.right, it.n)], it.identity.equal);
    }
    Ok(report_only(render(cfg, verdict, w)))
}

pub fn structure(cfg: &RunConfig, a: &StructureArgs) -> Result<Output, CliError> {
    let family = io::load_maps(&a.maps)?;
    let s = ep_structure(&family)?;
    let mut w = Witness::with_maps(&family);
    structure_witness(&mut w, &s);
    Ok(report_only(render(cfg, s, w)))
}

fn rational_from_json(v: &Value) -> Result<num_rational::BigRational, CliError> {
    let bad = || CliError::Config(format!("bad rational {v}"));
    match v {
        Value::Number(n) => n.as_i64().map(|i| num_rational::BigRational::from_integer(i.into())).ok_or_else(bad),
        Value::String(s) => s.trim().parse().map_err(|_| bad()),
        _ => Err(bad()),
    }
}

pub fn theta(cfg: &RunConfig, a: &ThetaArgs) -> Result<Output, CliError> {
    let doc = io::read_json(&a.phi)?;
    let rows = doc
        .get("values")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Config(format!("{}: expected {{\"values\": [[...]]}}", a.phi.display())))?;
    let values = rows
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| CliError::Config("each row must be an array".into()))?
                .iter()
                .map(rational_from_json)
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let phi = LevinFunction::new(values)?;
    if phi.generators() != a.m {
        return Err(CliError::Config(format!("--m {} but phi has {} rows", a.m, phi.generators())));
    }
    let defects = (1..=a.m).map(|h| theta_defect(a.n, h, &phi)).collect::<Result<Vec<_>, _>>()?;
    let mut w = Witness::default();
    w.theta = Some(crate::witness::ThetaWitness {
        n: a.n,
        values: phi.values.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect(),
        defects: defects.iter().enumerate().map(|(i, d)| (i + 1, d.defect.to_string(), d.bound.to_string())).collect(),
    });
    let result = json!({
        "m": a.m,
        "n": a.n,
        "window": phi.window(),
        "defects": defects,
        "all_within_bound": defects.iter().all(|d| d.within_bound),
        "equality_pattern": defects.iter().map(|d| d.attains_bound).collect::<Vec<_>>(),
    });
    Ok(report_only(render(cfg, result, w)))
}

pub fn measure(cfg: &RunConfig, a: &MeasureArgs) -> Result<Output, CliError> {
    let f = io::load_map(&a.map)?;
    let z0 = a.z0.as_deref().map(io::parse_float_point).transpose()?;
    let cloud = backward_measure(&f, z0, a.depth, a.samples, cfg.seed)?;
    let mut artifacts = vec![(a.out.clone(), io::cloud_to_csv(&cloud)?)];
    if let Some(h) = &a.heatmap {
        artifacts.push((h.clone(), io::heatmap(&cloud)));
    }
    let at_infinity: f64 = cloud.points.iter().zip(&cloud.weights).filter(|(p, _)| p.is_infinite()).map(|(_, w)| w).sum();
    let result = json!({
        "points": cloud.len(),
        "meta": cloud.meta,
        "mass_at_infinity": at_infinity,
        "cloud": a.out,
        "heatmap": a.heatmap,
    });
    Ok(Output { report: render(cfg, result, Witness::with_maps(&[f])), artifacts })
}

pub fn measure_compare(cfg: &RunConfig, a: &CompareArgs) -> Result<Output, CliError> {
    if let Some(maps) = &a.maps {
        let (p, q) = io::load_pair(maps)?;
        let budget = EqualMeasureBudget {
            max_degree: a.max_degree,
            depth: a.depth,
            samples: a.samples,
            seed: cfg.seed,
            epsilon: a.epsilon,
        };
        let r = equal_measure_test(&p, &q, &budget)?;
        let mut w = Witness::with_maps(&[p.clone(), q.clone()]);
        if let Some((m, n)) = r.levin {
            let (pm, qn) = (p.iterate(m)?, q.iterate(n)?);
            let e1 = pm.compose(&qn)? == pm.compose(&pm)?;
            let e2 = qn.compose(&pm)? == qn.compose(&qn)?;
            w.push_word(format!("P^{m} o Q^{n} = P^{m} o P^{m}"), vec![(0, m), (1, n)], vec![(0, m), (0, m)], e1);
            w.push_word(format!("Q^{n} o P^{m} = Q^{n} o Q^{n}"), vec![(1, n), (0, m)], vec![(1, n), (1, n)], e2);
        }
        return Ok(report_only(render(cfg, r, w)));
    }
    let (pa, pb) = (a.a.as_ref().unwrap(), a.b.as_ref().unwrap());
    let (ma, mb) = (io::cloud_from_csv(pa)?, io::cloud_from_csv(pb)?);
    let dict = TestDictionary::standard();
    let d = measure_distances(&ma, &mb);
    let per: Vec<Value> = d.iter().enumerate().map(|(i, v)| json!({"function": dict.label(i), "gap": v})).collect();
    let result = json!({
        "distance": d.iter().copied().fold(0.0, f64::max),
        "gaps": per,
        "points": [ma.len(), mb.len()],
    });
    Ok(report_only(render(cfg, result, Witness::default())))
}

pub fn dip(cfg: &RunConfig, a: &DipArgs) -> Result<Output, CliError> {
    let (p, q) = io::load_pair(&a.maps)?;
    let z0 = io::parse_exact_point(&a.z0)?;
    let mode = match a.mode {
        Some(OrbitModeArg::Exact) => OrbitMode::Exact,
        Some(OrbitModeArg::Float) => OrbitMode::Float,
        Some(OrbitModeArg::Exponent) => OrbitMode::Exponent,
        None => preferred_mode(&p, &q, &z0),
    };
    let mut opts = OrbitOptions::new(mode);
    opts.precision = a.precision;
    let report = dip_test(&p, &q, &z0, a.horizon, a.threshold, &opts)?;
    let mut w = Witness::default();
    if mode != OrbitMode::Float {
        w.orbit = Some(Witness::orbit(&p, &q, &z0, &report));
    }
    let result = json!({"z0": io::point_to_json(&z0), "report": report});
    Ok(report_only(render(cfg, result, w)))
}

fn lattes_set() -> Vec<ratsemi_core::algebra::ExtPoint> {
    use ratsemi_core::algebra::ExtPoint;
    vec![
        ExtPoint::Finite(Q::from_ints(0, 0)),
        ExtPoint::Finite(Q::from_ints(1, 0)),
        ExtPoint::Finite(Q::from_ints(-1, 0)),
        ExtPoint::Infinity,
    ]
}

pub fn ruelle(cfg: &RunConfig, a: &RuelleArgs) -> Result<Output, CliError> {
    let f = io::load_map(&a.map)?;
    let chart = Chart::new(a.res, a.extent)?;
    let init = a.init.unwrap_or(match a.mode {
        RuelleMode::Fixedpoint => InitialDensity::Twisted,
        _ => InitialDensity::Bump,
    });
    let (phi0, twist) = match init {
        InitialDensity::Bump => {
            let c = Complex64::new(0.5, 0.5);
            (GridDensity::from_fn(chart, move |z| Complex64::new((-(z - c).norm_sqr()).exp(), 0.0)), None)
        }
        InitialDensity::Twisted => {
            let start = ratsemi_core::entropy::SpherePoint::new(0.3, 0.2);
            let cloud = backward_measure(&f, Some(start), a.depth, a.samples, cfg.seed)?;
            let (g, c) = twisted_candidate(&f, &cloud, chart)?;
            (g, Some(c.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()))
        }
    };
    let op = RuelleOperator::build(&f, chart)?;
    let mut w = Witness::with_maps(std::slice::from_ref(&f));
    let certificate = if f == lattes_duplication_map() {
        let set = lattes_set();
        let cert = postcritical_certificate(&f, &set)?;
        w.postcritical = Some(crate::witness::PostcriticalWitness {
            map: serde_json::to_value(&f).expect("serializable"),
            set: set.iter().map(io::point_to_json).collect(),
        });
        Some(cert)
    } else {
        None
    };
    let common = json!({
        "chart": chart,
        "initial": init,
        "initial_norm": phi0.l1_norm(),
        "twist_coefficients": twist,
        "nonzeros": op.nonzeros(),
        "masked_preimages": op.masked,
        "preimages_outside": op.outside,
        "postcritical_certificate": certificate,
    });
    let (result, grid) = match a.mode {
        RuelleMode::Apply => {
            let out = op.apply(&phi0)?;
            let r = json!({"common": common, "output_norm": out.l1_norm(), "leakage": out.leakage});
            (r, out)
        }
        RuelleMode::Cesaro => {
            let run = cesaro_ruelle(&op, &phi0, a.iters)?;
            let grid = run.average.clone();
            (json!({"common": common, "history": run, "leakage": grid.leakage}), grid)
        }
        RuelleMode::Fixedpoint => {
            let rep = fixed_point_search(&op, &phi0, a.iters, a.tol)?;
            let grid = rep.history.average.clone();
            (json!({"common": common, "search": rep}), grid)
        }
    };
    let report = render(cfg, result, w);
    // row 0 of the image is the top edge, the largest imaginary part
    let n = chart.res;
    let mags: Vec<f64> = (0..n * n).map(|k| grid.cells[(n - 1 - k / n) * n + k % n].norm()).collect();
    let artifacts = vec![
        (a.out.clone(), io::pgm(n, n, &io::grey(&mags))),
        (a.out.with_extension("json"), report.clone().into_bytes()),
    ];
    Ok(Output { report, artifacts })
}
