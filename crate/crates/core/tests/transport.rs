use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zerocoupling::measures::DiscreteMeasure;
use zerocoupling::monotone::{is_cyclically_monotone, DEFAULT_TOL};
use zerocoupling::proper::{check_proper, residual_decomposition};
use zerocoupling::transport::{
    brute_force_min_cost, check_margins, coupling_cost, solve_zero_coupling, trivial_zero_coupling,
    Endpoint, Entry, ZeroCoupling,
};
use zerocoupling::Error;

fn line(pairs: &[(f64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::from_pairs(1, pairs.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
}

fn measure_strategy(
    max_atoms: usize,
) -> impl Strategy<Value = (usize, Vec<(Vec<f64>, f64)>, Vec<(Vec<f64>, f64)>)> {
    (1usize..=2).prop_flat_map(move |dim| {
        let atom = (prop::collection::vec(-3.0f64..3.0, dim), 0.1f64..2.0)
            .prop_filter("atom at the origin", |(x, _)| x.iter().any(|&c| c != 0.0));
        (
            Just(dim),
            prop::collection::vec(atom.clone(), 1..=max_atoms),
            prop::collection::vec(atom, 1..=max_atoms),
        )
    })
}

fn cost_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn reservoir_2x2_goes_through_origin() {
    let mu = line(&[(1.0, 1.0), (2.0, 1.0)]);
    let nu = line(&[(-1.0, 1.0), (-2.0, 1.0)]);
    let g = solve_zero_coupling(&mu, &nu, true).unwrap();
    assert!(cost_close(g.cost(), 10.0));
    let r = residual_decomposition(&g);
    assert!((r.left_residual - 2.0).abs() < 1e-12 && (r.right_residual - 2.0).abs() < 1e-12);
    assert!(!check_proper(&g, DEFAULT_TOL));
    let (c, _) = brute_force_min_cost(&mu, &nu, true).unwrap();
    assert!(cost_close(c, 10.0));
}

#[test]
fn balanced_line_is_order_preserving() {
    let mu = line(&[(1.0, 1.0), (2.0, 1.0)]);
    let nu = line(&[(1.5, 1.0), (3.0, 1.0)]);
    let g = solve_zero_coupling(&mu, &nu, false).unwrap();
    assert!(cost_close(g.cost(), 1.25));
    let mut pairs: Vec<(Endpoint, Endpoint)> = g.entries().iter().map(|e| (e.src, e.dst)).collect();
    pairs.sort();
    assert_eq!(
        pairs,
        vec![
            (Endpoint::Atom(0), Endpoint::Atom(0)),
            (Endpoint::Atom(1), Endpoint::Atom(1))
        ]
    );
}

#[test]
fn identical_measures_cost_nothing() {
    let mu = DiscreteMeasure::from_pairs(
        2,
        vec![
            (vec![1.0, 0.0], 0.5),
            (vec![-2.0, 1.0], 1.5),
            (vec![0.3, 3.0], 1.0),
        ],
    )
    .unwrap();
    let g = solve_zero_coupling(&mu, &mu, false).unwrap();
    assert_eq!(g.cost(), 0.0);
    assert!(check_proper(&g, 0.0));
}

#[test]
fn unbalanced_without_reservoir_is_rejected() {
    let mu = line(&[(1.0, 1.0)]);
    let nu = line(&[(2.0, 2.0)]);
    assert!(matches!(
        solve_zero_coupling(&mu, &nu, false),
        Err(Error::Unbalanced { .. })
    ));
    assert!(solve_zero_coupling(&mu, &nu, true).is_ok());
}

#[test]
fn empty_measures_give_empty_coupling() {
    let e = DiscreteMeasure::empty(2);
    let g = solve_zero_coupling(&e, &e, true).unwrap();
    assert!(g.entries().is_empty());
    assert_eq!(g.cost(), 0.0);
    assert_eq!(trivial_zero_coupling(&e, &e).unwrap().cost(), 0.0);
}

#[test]
fn trivial_coupling_of_2x2() {
    let mu = line(&[(1.0, 1.0), (2.0, 1.0)]);
    let nu = line(&[(-1.0, 1.0), (-2.0, 1.0)]);
    let g = trivial_zero_coupling(&mu, &nu).unwrap();
    assert_eq!(coupling_cost(&g), 10.0);
    let m = check_margins(&g);
    assert_eq!((m.max_left_violation, m.max_right_violation), (0.0, 0.0));
    let r = residual_decomposition(&g);
    assert_eq!((r.left_residual, r.right_residual), (2.0, 2.0));
}

#[test]
fn single_entry_cost() {
    let mu = DiscreteMeasure::from_pairs(2, vec![(vec![3.0, 4.0], 2.0)]).unwrap();
    let nu = DiscreteMeasure::empty(2);
    let g = ZeroCoupling::new(
        mu,
        nu,
        vec![Entry {
            src: Endpoint::Atom(0),
            dst: Endpoint::Origin,
            mass: 2.0,
        }],
    )
    .unwrap();
    assert_eq!(coupling_cost(&g), 50.0);
}

#[test]
fn one_by_one_is_a_single_arc() {
    let mu = line(&[(1.0, 2.0)]);
    let nu = line(&[(1.5, 2.0)]);
    let (c, g) = brute_force_min_cost(&mu, &nu, false).unwrap();
    assert!(cost_close(c, 0.5));
    assert_eq!(g.entries().len(), 1);
}

#[test]
fn brute_force_limit() {
    let mu = line(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)]);
    let nu = line(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)]);
    assert!(brute_force_min_cost(&mu, &nu, true).is_err());
}

/// Large instance on the sparse pricing path.
#[test]
fn large_sparse_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut side = |n: usize| {
        let pairs = (0..n)
            .map(|_| {
                let r = rng.random_range(0.0f64..1.0).powf(-1.0);
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                (vec![r * t.cos(), r * t.sin()], 1.0 / n as f64)
            })
            .collect();
        DiscreteMeasure::from_pairs(2, pairs).unwrap()
    };
    let (mu, nu) = (side(700), side(800));
    let g = solve_zero_coupling(&mu, &nu, true).unwrap();
    let m = check_margins(&g);
    assert!(m.max_left_violation <= 1e-9 && m.max_right_violation <= 1e-9);
    assert!(is_cyclically_monotone(&g.support().with_origin(), DEFAULT_TOL).ok);
    assert!(g.cost() <= trivial_zero_coupling(&mu, &nu).unwrap().cost());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn solver_matches_brute_force((dim, a, b) in measure_strategy(4), reservoir in any::<bool>()) {
        let mu = DiscreteMeasure::from_pairs(dim, a).unwrap();
        let mut nu = DiscreteMeasure::from_pairs(dim, b.clone()).unwrap();
        if !reservoir {
            // rescale so the masses agree
            let s = mu.total_mass() / nu.total_mass();
            nu = DiscreteMeasure::from_pairs(dim, b.into_iter().map(|(x, w)| (x, w * s)).collect()).unwrap();
        }
        let g = solve_zero_coupling(&mu, &nu, reservoir).unwrap();
        let (c, _) = brute_force_min_cost(&mu, &nu, reservoir).unwrap();
        prop_assert!(cost_close(g.cost(), c), "solver {} brute {}", g.cost(), c);
    }

    #[test]
    fn solver_output_invariants((dim, a, b) in measure_strategy(12)) {
        let mu = DiscreteMeasure::from_pairs(dim, a).unwrap();
        let nu = DiscreteMeasure::from_pairs(dim, b).unwrap();
        let g = solve_zero_coupling(&mu, &nu, true).unwrap();
        let m = check_margins(&g);
        prop_assert!(m.max_left_violation <= 1e-9 && m.max_right_violation <= 1e-9);
        prop_assert!(is_cyclically_monotone(&g.support().with_origin(), DEFAULT_TOL).ok);
        prop_assert!(g.cost() <= trivial_zero_coupling(&mu, &nu).unwrap().cost() * (1.0 + 1e-12));
        // every source atom appears in some entry
        for i in 0..mu.len() {
            prop_assert!(g.entries().iter().any(|e| e.src == Endpoint::Atom(i) && e.mass > 0.0));
        }
    }
}
