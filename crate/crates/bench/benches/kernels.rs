use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ergm_core::counting::{gradient, gradient_tuples, inj_count};
use ergm_core::fixedpoint::phi_map;
use ergm_core::oracle::{enumerate_exact, glauber_sample};
use ergm_core::twoblock::find_intersections;
use ergm_core::{Hamiltonian, SimpleGraph, SubgraphTerm, SymmetricMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn random_matrix(n: usize, seed: u64) -> SymmetricMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SymmetricMatrix::from_fn(n, |_, _| rng.random::<f64>())
}

fn mixed(n: usize) -> Hamiltonian {
    let terms = vec![
        SubgraphTerm::new(SimpleGraph::complete(3), 0.3).unwrap(),
        SubgraphTerm::new(SimpleGraph::path(3), 0.2).unwrap(),
        SubgraphTerm::new(SimpleGraph::cycle(4), 0.1).unwrap(),
    ];
    Hamiltonian::new(n, -0.5, terms).unwrap()
}

fn bench_gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("gradient");
    for n in [50, 200, 500] {
        let model = mixed(n);
        let x = random_matrix(n, 1);
        g.bench_with_input(BenchmarkId::new("closed_form", n), &n, |b, _| {
            b.iter(|| gradient(&model, black_box(&x)))
        });
    }
    let model = mixed(12);
    let x = random_matrix(12, 2);
    g.bench_function("tuples/12", |b| {
        b.iter(|| gradient_tuples(&model, black_box(&x)))
    });
    let model = Hamiltonian::edge_triangle(300, -0.5, 0.4).unwrap();
    let x = random_matrix(300, 3);
    g.bench_function("phi_map/300", |b| b.iter(|| phi_map(&model, black_box(&x))));
    g.finish();
}

fn bench_enumerate(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate");
    g.sample_size(10);
    for n in [5, 6, 7] {
        let model = mixed(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| enumerate_exact(black_box(&model)).unwrap())
        });
    }
    g.finish();
}

fn bench_glauber(c: &mut Criterion) {
    let model = Hamiltonian::edge_triangle(100, -0.5, 0.4).unwrap();
    let start = SimpleGraph::empty(100);
    c.bench_function("glauber/100x10k", |b| {
        b.iter(|| glauber_sample(&model, 10_000, 9, &start).unwrap())
    });
}

fn bench_counting(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 40;
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|_| rng.random::<f64>() < 0.3)
        .collect();
    let g = SimpleGraph::new(n, &edges).unwrap();
    for (name, h) in [
        ("k3", SimpleGraph::complete(3)),
        ("c4", SimpleGraph::cycle(4)),
        ("k4", SimpleGraph::complete(4)),
    ] {
        c.bench_function(&format!("inj_count/{name}/G(40,0.3)"), |b| {
            b.iter(|| inj_count(&h, black_box(&g)))
        });
    }
}

fn bench_twoblock(c: &mut Criterion) {
    let mut g = c.benchmark_group("twoblock");
    g.sample_size(10);
    g.bench_function("intersections/beta30", |b| {
        b.iter(|| find_intersections(black_box(30.0), 1000, 10_000).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    bench_gradient,
    bench_enumerate,
    bench_glauber,
    bench_counting,
    bench_twoblock
);
criterion_main!(benches);
