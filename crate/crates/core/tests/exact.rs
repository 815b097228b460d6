use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use ratsemi_core::algebra::{maps_equal, ExtPoint};
use ratsemi_core::orbits::{dip_test, preferred_mode, reverify_matches, DipVerdict, OrbitMode, OrbitOptions};
use ratsemi_core::relations::{aut_group, commutes, find_common_iterate, is_levin_pair, symmetry_group};
use ratsemi_core::semigroup::{
    cayley_ball, classify, ideal_intersection, theta_defect, LevinFunction, LevinIndex, Verdict,
};
use ratsemi_core::{Error, GaussianRational as Q, Poly, RatMap};

fn map(c: &[i64]) -> RatMap {
    RatMap::poly(Poly::from_ints(c)).unwrap()
}

fn example() -> RatMap {
    map(&[0, 0, 1, 0, 0, 1])
}

#[test]
fn example_symmetries() {
    let p = example();
    let pp = p.as_poly().unwrap().clone();
    let p2 = p.iterate(2).unwrap();
    assert_eq!(symmetry_group(&pp).unwrap().generator().order(), 3);
    assert!(aut_group(&pp).unwrap().is_trivial());
    assert_eq!(aut_group(p2.as_poly().unwrap()).unwrap().generator().order(), 3);
    let omega = RatMap::rotation(1, 3);
    let wp = omega.compose(&p).unwrap();
    assert!(!commutes(&wp, &p).unwrap());
    assert!(commutes(&wp, &p2).unwrap());
}

#[test]
fn sign_flip_is_levin_without_common_iterate() {
    let (a, b) = (map(&[0, 0, 1]), map(&[0, 0, -1]));
    assert!(is_levin_pair(&a, &b).unwrap());
    // the iterates are z^(2^n) and -z^(2^n), which never coincide
    assert_eq!(find_common_iterate(&a, &b, 1 << 12).unwrap(), None);
    for n in 1..=6 {
        assert!(maps_equal(&b.iterate(n).unwrap(), &map(&[0, -1]).compose(&a.iterate(n).unwrap()).unwrap()));
    }
    assert_eq!(find_common_iterate(&a, &RatMap::power(4), 64).unwrap(), Some((2, 1)));
    assert!(!is_levin_pair(&a, &map(&[-2, 0, 1])).unwrap());
}

#[test]
fn example_family_classifies_positive() {
    let p = example();
    let family = [p.clone(), RatMap::rotation(1, 3).compose(&p).unwrap()];
    let v = classify(&family, 1 << 12).unwrap();
    assert!(v.is_positive() && v.reverify());
    let Verdict::Positive { witnesses, structure, .. } = v else { unreachable!() };
    for w in &witnesses {
        let lhs = family[w.left].iterate(w.m).unwrap();
        assert!(maps_equal(&lhs, &family[w.right].iterate(w.n).unwrap()));
    }
    let s = structure.expect("structure data");
    assert!(s.verified);
    // A(T) is the whole symmetry group: Phi acts by squaring, a bijection mod 3
    assert_eq!((s.kernel_order, s.aut_order), (1, 3));
    assert_eq!(witnesses.len(), 1);
    assert_eq!((witnesses[0].m, witnesses[0].n), (2, 2));

    let powers = [RatMap::power(2), RatMap::power(3)];
    assert!(matches!(classify(&powers, 1 << 12), Err(Error::NotAdmissible(_))));
}

#[test]
fn ideal_witnesses_in_sign_flip_ball() {
    let gens = [map(&[0, 0, 1]), map(&[0, 0, -1])];
    let ball = cayley_ball(&gens, 3, u64::MAX).unwrap();
    let elems: Vec<RatMap> = ball.maps().cloned().collect();
    assert!(elems.len() >= 4);
    for p in &elems {
        for q in &elems {
            let (a, b) = ideal_intersection(p, q, &gens, 3).unwrap().expect("witness");
            assert!(maps_equal(&a.map.compose(p).unwrap(), &b.map.compose(q).unwrap()));
        }
    }
}

#[test]
fn dip_from_two() {
    let z0 = ExtPoint::Finite(Q::from_ints(2, 0));
    let (z2, z3, z4) = (RatMap::power(2), RatMap::power(3), RatMap::power(4));
    assert_eq!(preferred_mode(&z2, &z4, &z0), OrbitMode::Exponent);
    let opts = OrbitOptions::new(OrbitMode::Exponent);
    let strong = dip_test(&z2, &z4, &z0, 40, None, &opts).unwrap();
    assert_eq!(strong.verdict, DipVerdict::Strong);
    assert!(strong.count > 8);
    assert!(reverify_matches(&z2, &z4, &z0, &strong).unwrap());
    let weak = dip_test(&z2, &z3, &z0, 40, None, &opts).unwrap();
    assert_eq!((weak.verdict, weak.count), (DipVerdict::Weak, 1));
}

// direct oracle: average phi over s * w for w in the ball of length <= n,
// which in the Levin semigroup is the identity and every (j, q), q <= n
fn theta_direct(n: usize, phi: &LevinFunction, s: LevinIndex) -> BigRational {
    let m = phi.generators();
    let mut acc = phi.at(s).clone();
    for j in 1..=m {
        for q in 1..=n as u64 {
            acc += phi.at(s.mul(LevinIndex { generator: j, exponent: q }));
        }
    }
    acc / BigRational::from_integer(BigInt::from(m * n + 1))
}

fn levin_function() -> impl Strategy<Value = (usize, LevinFunction)> {
    (1usize..=4, 1usize..=16).prop_flat_map(|(m, n)| {
        let w = n + 2 + 3;
        prop::collection::vec(prop::collection::vec((-20i64..=20, 1i64..=5), w), m).prop_map(move |rows| {
            let values =
                rows.into_iter().map(|r| r.into_iter().map(|(a, b)| BigRational::new(a.into(), b.into())).collect()).collect();
            (n, LevinFunction::new(values).unwrap())
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn theta_defect_is_bounded((n, phi) in levin_function(), h in 1usize..=4) {
        let m = phi.generators();
        let h = 1 + (h - 1) % m;
        let d = theta_defect(n, h, &phi).unwrap();
        let bound = BigRational::from_integer(BigInt::from(2 * m)) * phi.sup_norm()
            / BigRational::from_integer(BigInt::from(m * n + 1));
        prop_assert_eq!(&d.bound, &bound);
        prop_assert!(d.defect <= bound);
        let mut oracle = BigRational::zero();
        for i in 1..=m {
            for k in 1..=(phi.window() - n - 1) as u64 {
                let s = LevinIndex { generator: i, exponent: k };
                let shifted = LevinIndex { generator: i, exponent: k + 1 };
                let diff = (theta_direct(n, &phi, shifted) - theta_direct(n, &phi, s)).abs();
                if diff > oracle {
                    oracle = diff;
                }
            }
        }
        prop_assert_eq!(d.defect, oracle);
    }
}
