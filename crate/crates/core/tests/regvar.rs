use proptest::prelude::*;

use zerocoupling::measures::{
    Cone, DiscreteMeasure, Discretization, HomogeneousMeasure, MeasureRef, Point,
};
use zerocoupling::monotone::ClosedFormGradient;
use zerocoupling::regvar::{
    check_coupling_homogeneity, check_gradient_homogeneity, fell_window_distance, m0_distance,
    median, portmanteau_check, rescaled_empirical, sample, scaled_subdifferential, split_seed,
    tail_coupling_experiment, Auxiliary, ExperimentConfig, HomogeneityCheck, ProductAnnulus,
    RVModel, SlowlyVarying, TestSet, Window, DEFAULT_MASTER_SEED,
};
use zerocoupling::transport::{solve_zero_coupling, Endpoint, Entry, SupportSet, ZeroCoupling};

fn norms(m: &DiscreteMeasure) -> Vec<f64> {
    m.atoms().iter().map(|a| a.point.norm()).collect()
}

#[test]
fn pareto_sample_quantiles() {
    let model = RVModel::spherical(2, 1.0).unwrap();
    let s = sample(&model, 20_000, split_seed(DEFAULT_MASTER_SEED, 0)).unwrap();
    let r = norms(&s);
    assert!((median(&r) - 2.0).abs() < 0.1, "median {}", median(&r));
    let beyond = r.iter().filter(|&&v| v > 10.0).count() as f64 / r.len() as f64;
    assert!((beyond - 0.1).abs() < 0.01, "fraction {beyond}");
    assert_eq!(
        s,
        sample(&model, 20_000, split_seed(DEFAULT_MASTER_SEED, 0)).unwrap()
    );
}

#[test]
fn seed_splitting() {
    assert_eq!(split_seed(7, 0), 7);
    assert_eq!(split_seed(0, 1), 0x9E37_79B9_7F4A_7C15);
    assert_ne!(
        split_seed(DEFAULT_MASTER_SEED, 1),
        split_seed(DEFAULT_MASTER_SEED, 2)
    );
}

#[test]
fn log_model_quantile_inverts_tail() {
    let h = HomogeneousMeasure::spherical(2, 1.5, 1.0).unwrap();
    let model = RVModel::new(&h, SlowlyVarying::Log).unwrap();
    for u in [0.9, 0.5, 0.1, 1e-3, 1e-8] {
        let r = model.radial_quantile(u);
        assert!((model.radial_tail(r) / u - 1.0).abs() < 1e-12);
    }
}

#[test]
fn auxiliary_function() {
    let pareto = RVModel::spherical(2, 2.0).unwrap();
    let aux = Auxiliary::for_model(&pareto, 10, 1).unwrap();
    assert_eq!(aux.eval(16.0), 4.0);

    let h = HomogeneousMeasure::spherical(2, 1.0, 1.0).unwrap();
    let model = RVModel::new(&h, SlowlyVarying::Log).unwrap();
    let aux = Auxiliary::for_model(&model, 200_000, 3).unwrap();
    for t in [10.0, 100.0] {
        let v = t * model.radial_tail(aux.eval(t));
        assert!((v - 1.0).abs() < 0.1, "t P(R > b(t)) = {v} at t = {t}");
    }
}

#[test]
fn rescaling_examples() {
    let m = DiscreteMeasure::from_pairs(
        2,
        vec![
            (vec![2.0, 0.0], 0.5),
            (vec![0.0, -4.0], 0.5),
            (vec![1e-13, 0.0], 0.5),
        ],
    )
    .unwrap();
    let r = rescaled_empirical(&m, 2.0, 2.0).unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(r.point(0).coords(), &[1.0, 0.0]);
    assert_eq!(r.point(1).coords(), &[0.0, -2.0]);
    assert_eq!(r.weight(0), 1.0);
    assert_eq!(r.meta.as_ref().unwrap().dropped, 1);
    assert!(rescaled_empirical(&m, 0.0, 1.0).is_err());
}

#[test]
fn scaled_subdifferential_example() {
    let s = SupportSet::from_coords(
        2,
        vec![
            (vec![2.0, 0.0], vec![4.0, 8.0]),
            (vec![0.0, 6.0], vec![0.0, 0.0]),
        ],
    )
    .unwrap();
    let t = scaled_subdifferential(&s, 2.0, 4.0).unwrap();
    assert_eq!(t.pairs()[0].0.coords(), &[1.0, 0.0]);
    assert_eq!(t.pairs()[0].1.coords(), &[1.0, 2.0]);
    assert_eq!(t.pairs()[1].0.coords(), &[0.0, 3.0]);
    assert!(scaled_subdifferential(&s, -1.0, 1.0).is_err());
}

#[test]
fn gradient_homogeneity_examples() {
    let pts: Vec<Point> = (1..=10)
        .map(|k| Point::new(vec![k as f64 * 0.3]).unwrap())
        .collect();
    let all = |_: &[f64]| true;

    let id = |p: &[f64]| p.to_vec();
    let map = ClosedFormGradient {
        dim: 1,
        grad: &id,
        in_domain: &all,
    };
    let psi = |x: &Point| x.norm_sq() / 2.0;
    let r =
        check_gradient_homogeneity(&map, Some(&psi), (1.0, 1.0), &pts, &[0.5, 2.0, 10.0], 1e-12)
            .unwrap();
    assert!(r.holds);

    // x ↦ x² is homogeneous of degree 2, matching α₁/α₂ = 2 only
    let sq = |p: &[f64]| vec![p[0] * p[0]];
    let pos = |p: &[f64]| p[0] > 0.0;
    let map = ClosedFormGradient {
        dim: 1,
        grad: &sq,
        in_domain: &pos,
    };
    assert!(
        check_gradient_homogeneity(&map, None, (2.0, 1.0), &pts, &[0.5, 2.0], 1e-12)
            .unwrap()
            .holds
    );
    let r = check_gradient_homogeneity(&map, None, (1.0, 1.0), &pts, &[0.5, 2.0], 1e-12).unwrap();
    assert!(!r.holds && r.max_grad_deviation > 0.1);
}

#[test]
fn fell_distance_examples() {
    let w = Window {
        r_lo: 1.0,
        r_hi: 3.0,
        y_max: 6.0,
    };
    let s =
        SupportSet::from_coords(1, vec![(vec![1.5], vec![1.5]), (vec![2.0], vec![2.0])]).unwrap();
    let shifted =
        SupportSet::from_coords(1, vec![(vec![1.5], vec![1.75]), (vec![2.0], vec![2.25])]).unwrap();
    let outside = SupportSet::from_coords(1, vec![(vec![10.0], vec![10.0])]).unwrap();
    assert_eq!(fell_window_distance(&s, &s, &w), 0.0);
    assert!((fell_window_distance(&s, &shifted, &w) - 0.25).abs() < 1e-15);
    assert_eq!(fell_window_distance(&s, &outside, &w), f64::INFINITY);
    assert_eq!(fell_window_distance(&outside, &outside, &w), 0.0);
}

#[test]
fn portmanteau_on_rescaled_sample() {
    let model = RVModel::spherical(2, 1.0).unwrap();
    let target = model.exponent_measure().clone();
    let sets = vec![
        TestSet {
            r_lo: 1.0,
            r_hi: 2.0,
            cone: None,
        },
        TestSet {
            r_lo: 1.0,
            r_hi: 4.0,
            cone: Some(Cone::new(Point::unit(2, 0), 0.5).unwrap()),
        },
    ];
    let s = sample(&model, 100_000, 5).unwrap();
    let seq: Vec<DiscreteMeasure> = [10.0, 100.0]
        .iter()
        .map(|&t| rescaled_empirical(&s, t, t).unwrap())
        .collect();
    let r = portmanteau_check(&seq, MeasureRef::Homogeneous(&target), &sets).unwrap();
    assert_eq!(r.errors.len(), 2);
    assert!(r.last_max < 0.1, "{r:?}");
    let bad = [TestSet {
        r_lo: 0.0,
        r_hi: 1.0,
        cone: None,
    }];
    assert!(portmanteau_check(&seq, MeasureRef::Homogeneous(&target), &bad).is_err());
}

fn identity(m: &DiscreteMeasure) -> ZeroCoupling {
    let entries = (0..m.len())
        .map(|k| Entry {
            src: Endpoint::Atom(k),
            dst: Endpoint::Atom(k),
            mass: m.weight(k),
        })
        .collect();
    ZeroCoupling::new(m.clone(), m.clone(), entries).unwrap()
}

#[test]
fn identity_coupling_is_homogeneous() {
    // 8 log-uniform cells per octave, so scaling by 2 maps cells onto cells
    let h = HomogeneousMeasure::spherical(2, 1.0, 1.0).unwrap();
    let m = h
        .discretize(
            1.0 / 16.0,
            16.0,
            &Discretization::quadrature(64).log_uniform(),
        )
        .unwrap();
    let check = HomogeneityCheck {
        alpha1: 1.0,
        alpha2: 1.0,
        lambdas: vec![2.0],
        annuli: vec![
            ProductAnnulus {
                x: (1.0, 2.0),
                y: (1.0, 2.0),
            },
            ProductAnnulus {
                x: (0.5, 4.0),
                y: (0.0, f64::INFINITY),
            },
            ProductAnnulus {
                x: (1.0, 2.0),
                y: (2.0, 4.0),
            },
        ],
        tol: 1e-9,
        support_tol: 1e-9,
        support_window: Some((0.5, 4.0)),
    };
    for g in [identity(&m), solve_zero_coupling(&m, &m, true).unwrap()] {
        let r = check_coupling_homogeneity(&g, &check).unwrap();
        assert!(r.holds, "{:?} {}", r.rows, r.support_ok);
    }
    // a plan that drifts outward breaks the mass law
    let r = check_coupling_homogeneity(
        &identity(&m),
        &HomogeneityCheck {
            alpha1: 1.0,
            alpha2: 2.0,
            ..check.clone()
        },
    )
    .unwrap();
    assert!(!r.holds);
}

#[test]
fn small_tail_experiment_is_deterministic() {
    let model = RVModel::spherical(2, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(400, vec![4.0, 20.0]);
    cfg.seeds = 3;
    cfg.reference_resolution = 24;
    let a = tail_coupling_experiment(&model, &model, &cfg).unwrap();
    assert_eq!(a.rows.len(), 6);
    assert_eq!(a.median_fell.len(), 2);
    assert!(a
        .rows
        .iter()
        .all(|r| r.m0_dist.is_finite() && r.cost >= 0.0 && r.left_residual >= 0.0));
    assert_eq!(a, tail_coupling_experiment(&model, &model, &cfg).unwrap());
    cfg.t_grid = vec![1000.0];
    assert!(tail_coupling_experiment(&model, &model, &cfg).is_err());
}

fn cloud() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(
        (prop::collection::vec(-8.0f64..8.0, 2), 0.01f64..1.0),
        1..15,
    )
    .prop_filter("atom at the origin", |v| {
        v.iter().all(|(x, _)| x.iter().any(|&c| c != 0.0))
    })
    .prop_map(|v| DiscreteMeasure::from_pairs(2, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn m0_is_a_pseudo_metric(a in cloud(), b in cloud(), c in cloud()) {
        let grid = [1.0, 2.0, 4.0];
        let d = |x: &DiscreteMeasure, y: &DiscreteMeasure| m0_distance(x, y, &grid).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-15);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!(d(&a, &b) >= 0.0);
    }
}
