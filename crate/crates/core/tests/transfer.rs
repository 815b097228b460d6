use num_complex::Complex64;
use proptest::prelude::*;
use ratsemi_core::entropy::{backward_measure, SpherePoint};
use ratsemi_core::ruelle::{
    beltrami_apply, cesaro_ruelle, fixed_point_search, lattes_certificate, lattes_duplication_map, ruelle_apply,
    twisted_candidate, Chart, FixedPointVerdict, GridBeltrami, GridDensity, RuelleOperator,
    DEFAULT_EXTENT, RETENTION_FLOOR,
};
use ratsemi_core::{Poly, RatMap};

fn bump(center: Complex64, width: f64) -> impl Fn(Complex64) -> Complex64 + Sync {
    move |z| Complex64::new((-(z - center).norm_sqr() / (width * width)).exp(), 0.0)
}

// average 2x2 blocks of a fine grid onto the coarse one
fn coarsen(fine: &GridDensity, coarse: Chart) -> Vec<Complex64> {
    let n = coarse.res;
    (0..coarse.len())
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let at = |di, dj| fine.cells[(2 * j + dj) * fine.chart.res + 2 * i + di];
            (at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1)) / 4.0
        })
        .collect()
}

#[test]
fn refinement_is_stable() {
    let f = RatMap::power(2);
    let phi = bump(Complex64::new(0.4, -0.3), 0.5);
    let coarse = Chart::new(256, 2.0).unwrap();
    let fine = Chart::new(512, 2.0).unwrap();
    let a = ruelle_apply(&f, &GridDensity::from_fn(coarse, &phi)).unwrap();
    let b = ruelle_apply(&f, &GridDensity::from_fn(fine, &phi)).unwrap();
    let b_coarse = GridDensity { chart: coarse, cells: coarsen(&b, coarse), leakage: 0.0 };
    assert!((a.l1_norm() - b.l1_norm()).abs() <= 0.02 * b.l1_norm());
    assert!(a.distance(&b_coarse) <= 0.02 * b.l1_norm(), "{}", a.distance(&b_coarse) / b.l1_norm());
}

#[test]
fn lattes_has_invariant_density() {
    let f = lattes_duplication_map();
    assert!(lattes_certificate().unwrap().holds());
    let chart = Chart::new(512, DEFAULT_EXTENT).unwrap();
    let cloud = backward_measure(&f, Some(SpherePoint::new(0.3, 0.2)), 10, 1 << 20, 0).unwrap();
    let (phi0, coeffs) = twisted_candidate(&f, &cloud, chart).unwrap();
    // the fitted twist is z^3 - z up to scale
    let expected = [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    for (c, e) in coeffs.iter().zip(expected) {
        assert!((c - Complex64::new(e, 0.0)).norm() < 1e-6, "{coeffs:?}");
    }
    let op = RuelleOperator::build(&f, chart).unwrap();
    let r = fixed_point_search(&op, &phi0, 40, 0.05).unwrap();
    assert_eq!(r.verdict, FixedPointVerdict::Found, "residual {}", r.residual);
    assert!(r.residual <= 0.05 && r.retention >= RETENTION_FLOOR);
    assert!(r.history.power_norms.iter().all(|n| *n <= 1.0 + 1e-9));
}

#[test]
fn basilica_density_decays() {
    let f = RatMap::poly(Poly::from_ints(&[-1, 0, 1])).unwrap();
    let chart = Chart::new(512, DEFAULT_EXTENT).unwrap();
    let cloud = backward_measure(&f, Some(SpherePoint::new(0.3, 0.2)), 18, 1 << 18, 0).unwrap();
    let (phi0, _) = twisted_candidate(&f, &cloud, chart).unwrap();
    let op = RuelleOperator::build(&f, chart).unwrap();
    let r = fixed_point_search(&op, &phi0, 40, 0.05).unwrap();
    assert_eq!(r.verdict, FixedPointVerdict::Decayed, "residual {} norm {}", r.residual, r.final_cesaro_norm);
    assert!(r.final_cesaro_norm < 0.1);

    let smooth = GridDensity::from_fn(chart, bump(Complex64::new(0.5, 0.5), 1.0));
    let run = cesaro_ruelle(&op, &smooth, 40).unwrap();
    assert!(*run.cesaro_norms.last().unwrap() < 0.1);
    assert!(run.cesaro_norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

fn small_map() -> impl Strategy<Value = RatMap> {
    let coeff = -3i64..=3;
    (prop::collection::vec(coeff.clone(), 2..4), prop::collection::vec(coeff, 1..3), 0usize..2).prop_filter_map(
        "non-constant",
        |(mut n, d, poly)| {
            n.push(1);
            let den = if poly == 0 { Poly::one() } else { Poly::from_ints(&[d[0].max(1), d.get(1).copied().unwrap_or(1)]) };
            RatMap::new(Poly::from_ints(&n), den).ok().filter(|f| f.degree() >= 2)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn beltrami_pullback_does_not_grow(f in small_map(), a in -1.0f64..1.0, b in -1.0f64..1.0, k in 0.5f64..3.0) {
        let chart = Chart::new(64, 2.0).unwrap();
        let mu = GridBeltrami::from_fn(chart, |z| Complex64::new(a * (k * z.re).cos(), b * (k * z.im).sin()) * 0.7);
        let out = beltrami_apply(&f, &mu).unwrap();
        prop_assert!(out.sup_norm() <= mu.sup_norm() * 1.01 + 1e-15);
    }
}

#[test]
fn lattes_cloud_fills_the_plane() {
    let f = lattes_duplication_map();
    let cloud = backward_measure(&f, Some(SpherePoint::new(0.3, 0.2)), 10, 1 << 20, 0).unwrap();
    let n = 16;
    let mut mass = vec![0.0; n * n];
    for (p, w) in cloud.points.iter().zip(&cloud.weights) {
        if let Some(z) = p.finite().filter(|z| z.re.abs() < 2.0 && z.im.abs() < 2.0) {
            let i = ((z.re + 2.0) / 4.0 * n as f64) as usize;
            let j = ((z.im + 2.0) / 4.0 * n as f64) as usize;
            mass[j.min(n - 1) * n + i.min(n - 1)] += w;
        }
    }
    // oracle: the density is proportional to 1/|z^3 - z|; midpoint quadrature per cell
    let sub = 64;
    let h = 4.0 / (n * sub) as f64;
    let oracle: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let mut acc = 0.0;
            for a in 0..sub {
                for b in 0..sub {
                    let z = Complex64::new(-2.0 + h * ((i * sub + a) as f64 + 0.5), -2.0 + h * ((j * sub + b) as f64 + 0.5));
                    acc += 1.0 / (z * z * z - z).norm();
                }
            }
            acc
        })
        .collect();
    let (mt, ot): (f64, f64) = (mass.iter().sum(), oracle.iter().sum());
    let tv: f64 = mass.iter().zip(&oracle).map(|(m, o)| (m / mt - o / ot).abs()).sum::<f64>() / 2.0;
    let floor = oracle.iter().copied().fold(f64::INFINITY, f64::min) / ot;
    assert!(tv <= 0.02, "total variation {tv}");
    assert!(mass.iter().all(|m| m / mt >= 0.5 * floor));
}

#[test]
fn duality_on_random_fixtures() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let chart = Chart::new(256, 2.0).unwrap();
    let f = RatMap::power(2);
    let op = RuelleOperator::build(&f, chart).unwrap();
    for _ in 0..20 {
        let center = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let width = rng.gen_range(0.2..0.6);
        let (a, b, k) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..3.0));
        let phi = GridDensity::from_fn(chart, bump(center, width));
        let mu = GridBeltrami::from_fn(chart, |z| Complex64::new(a * (k * z.re).cos(), b * (k * z.im).sin()));
        let lhs = phi.pair(&beltrami_apply(&f, &mu).unwrap());
        let rhs = op.apply(&phi).unwrap().pair(&mu);
        assert!((lhs - rhs).norm() <= 1e-2 * mu.sup_norm() * phi.l1_norm(), "{lhs} vs {rhs}");
        assert!(op.apply(&phi).unwrap().l1_norm() <= 1.02 * phi.l1_norm());
    }
}

#[test]
fn identity_cesaro_norms_are_constant() {
    let chart = Chart::new(64, 2.0).unwrap();
    let op = RuelleOperator::build(&RatMap::identity(), chart).unwrap();
    let phi = GridDensity::from_fn(chart, bump(Complex64::new(0.0, 0.3), 0.4));
    let run = cesaro_ruelle(&op, &phi, 10).unwrap();
    assert!(run.cesaro_norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
}
