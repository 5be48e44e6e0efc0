use ergm_core::blockmodel::{decompose_gradient_entry, DECOMPOSITION_BUDGET};
use ergm_core::counting::{gradient, inj_partial};
use ergm_core::fixedpoint::{phi_map, phi_scalar};
use ergm_core::model::slot_pairs;
use ergm_core::{Hamiltonian, SimpleGraph, SubgraphTerm, SymmetricMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixed_model(n: usize) -> Hamiltonian {
    let terms = vec![
        SubgraphTerm::new(SimpleGraph::complete(3), 0.8).unwrap(),
        SubgraphTerm::new(SimpleGraph::path(3), -0.5).unwrap(),
        SubgraphTerm::new(SimpleGraph::cycle(4), 0.3).unwrap(),
    ];
    Hamiltonian::new(n, -0.4, terms).unwrap()
}

fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(n, |_, _| rng.random::<f64>())
}

#[test]
fn single_coordinate_perturbation_bounds() {
    let n_vertices = 30;
    let model = mixed_model(n_vertices);
    let n = (n_vertices * (n_vertices - 1) / 2) as f64;
    let s: f64 = model
        .terms()
        .iter()
        .map(|t| t.weight().abs() * (t.edge_count() as f64).powi(2))
        .sum();
    let (shared, disjoint) = (2.0 * s / n.sqrt(), 6.0 * s / n);
    let pairs = slot_pairs(n_vertices);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let x = random_matrix(n_vertices, &mut rng);
        let (a, b) = pairs[rng.random_range(0..pairs.len())];
        let mut y = x.clone();
        y.set(a, b, rng.random::<f64>());
        let (gx, gy) = (gradient(&model, &x), gradient(&model, &y));
        for &(i, j) in &pairs {
            if (i, j) == (a, b) {
                continue;
            }
            let diff = (gx.get(i, j) - gy.get(i, j)).abs();
            let touches = i == a || i == b || j == a || j == b;
            let bound = if touches { shared } else { disjoint };
            assert!(
                diff <= bound + 1e-12,
                "({i},{j}) vs ({a},{b}): {diff} > {bound}"
            );
        }
    }
}

#[test]
fn extremes_are_monotone_for_positive_weights() {
    let terms = vec![
        SubgraphTerm::new(SimpleGraph::complete(3), 0.6).unwrap(),
        SubgraphTerm::new(SimpleGraph::path(3), 0.4).unwrap(),
    ];
    let model = Hamiltonian::new(25, -0.7, terms).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..30 {
        let x = random_matrix(25, &mut rng);
        let y = phi_map(&model, &x);
        assert!(y.min_off_diagonal() >= phi_scalar(&model, x.min_off_diagonal()) - 1e-12);
        assert!(y.max_off_diagonal() <= phi_scalar(&model, x.max_off_diagonal()) + 1e-12);
    }
}

#[test]
fn decomposition_matches_counting_exhaustively() {
    for h in [SimpleGraph::complete(3), SimpleGraph::path(3)] {
        for n in 3..=5 {
            let slots = n * (n - 1) / 2;
            for mask in 0..1u64 << slots {
                let x = SimpleGraph::from_mask(n, mask).to_matrix();
                for (i, j) in slot_pairs(n) {
                    let d = decompose_gradient_entry(&h, &x, i, j, DECOMPOSITION_BUDGET).unwrap();
                    let want = inj_partial(&h, &x, i, j);
                    assert!(
                        (d - want).abs() < 1e-10,
                        "{h:?} n={n} mask={mask} ({i},{j})"
                    );
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn tanh_is_contracting(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        prop_assert!((a.tanh() - b.tanh()).abs() <= (a - b).abs() + 1e-15);
    }

    #[test]
    fn product_difference_is_bounded_by_sum(
        pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..12)
    ) {
        let px: f64 = pairs.iter().map(|p| p.0).product();
        let py: f64 = pairs.iter().map(|p| p.1).product();
        let sum: f64 = pairs.iter().map(|p| (p.0 - p.1).abs()).sum();
        prop_assert!((px - py).abs() <= sum + 1e-12);
    }
}
