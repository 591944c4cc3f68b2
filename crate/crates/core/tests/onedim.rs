use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zerocoupling::measures::DiscreteMeasure;
use zerocoupling::monotone::{is_cyclically_monotone, DEFAULT_TOL};
use zerocoupling::onedim::{fixtures, solve_1d};
use zerocoupling::proper::residual_decomposition;
use zerocoupling::transport::{check_margins, solve_zero_coupling, Endpoint, ZeroCoupling};

fn random_line(rng: &mut ChaCha8Rng) -> DiscreteMeasure {
    let k = rng.random_range(1..=50);
    let spread = rng.random_range(0.5..5.0);
    // some instances live on one half-line only
    let bias = rng.random_range(-1.0..1.0);
    let pairs = (0..k)
        .map(|_| {
            let mut x: f64 = rng.random_range(-spread..spread) + bias * spread;
            if x == 0.0 {
                x = 1.0;
            }
            (vec![x], rng.random_range(0.05..1.0))
        })
        .collect();
    DiscreteMeasure::from_pairs(1, pairs).unwrap()
}

/// No atom-to-atom entry changes sign.
fn sign_separated(g: &ZeroCoupling) -> bool {
    g.entries().iter().all(|e| match (e.src, e.dst) {
        (Endpoint::Atom(i), Endpoint::Atom(j)) => {
            (g.sources().point(i).coords()[0] > 0.0) == (g.targets().point(j).coords()[0] > 0.0)
        }
        _ => true,
    })
}

#[test]
fn agrees_with_flow_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1D);
    let mut separated = 0;
    for _ in 0..100 {
        let (mu, nu) = (random_line(&mut rng), random_line(&mut rng));
        let a = solve_1d(&mu, &nu).unwrap();
        let b = solve_zero_coupling(&mu, &nu, true).unwrap();
        let scale = a.cost().max(1.0);
        assert!(
            a.cost() >= b.cost() - 1e-9 * scale,
            "1d {} flow {}",
            a.cost(),
            b.cost()
        );
        if sign_separated(&b) {
            separated += 1;
            assert!(
                (a.cost() - b.cost()).abs() <= 1e-9 * scale,
                "1d {} flow {}",
                a.cost(),
                b.cost()
            );
        }
        let m = check_margins(&a);
        assert!(m.max_left_violation <= 1e-9 && m.max_right_violation <= 1e-9);
        assert!(is_cyclically_monotone(&a.support().with_origin(), DEFAULT_TOL).ok);
        assert!(sign_separated(&a));
    }
    assert!(separated > 50, "only {separated} sign-separated optima");
}

#[test]
fn opposite_half_lines_go_through_origin() {
    let (mu, nu) = fixtures::sign_separated(40).unwrap();
    let g = solve_1d(&mu, &nu).unwrap();
    assert!(g
        .entries()
        .iter()
        .all(|e| e.src == Endpoint::Origin || e.dst == Endpoint::Origin));
    let r = residual_decomposition(&g);
    assert!((r.left_residual - 1.0).abs() < 1e-12 && (r.right_residual - 1.0).abs() < 1e-12);
}

#[test]
fn origin_routed_plan_beats_shift() {
    let routed = fixtures::origin_routed_plan(400).unwrap();
    let shift = fixtures::shift_plan(400).unwrap();
    assert!((routed.cost() - 2.0 / 3.0).abs() < 1e-5);
    assert!((shift.cost() - 1.0).abs() < 1e-12);
    let (mu, nu) = fixtures::shifted_intervals(400).unwrap();
    let flow = solve_zero_coupling(&mu, &nu, true).unwrap();
    assert!((flow.cost() - routed.cost()).abs() < 1e-9);
}

#[test]
fn rejects_higher_dimensions() {
    let m = DiscreteMeasure::from_pairs(2, vec![(vec![1.0, 0.0], 1.0)]).unwrap();
    assert!(solve_1d(&m, &m).is_err());
}
