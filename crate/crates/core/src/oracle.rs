//! Exact enumeration for tiny graphs and a Glauber sampler for larger ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::counting::{gradient_entry, inj_count, inj_partial, term_scale};
use crate::error::{Error, Result};
use crate::model::{edge_slots, slot_pairs, Hamiltonian, SimpleGraph, SymmetricMatrix};

/// Largest `N` accepted by [`enumerate_exact`] (`2^21` graphs).
pub const MAX_ENUM_VERTICES: usize = 7;

/// Gray-code indices handled by one worker, each starting from a full evaluation.
const CHUNK: u64 = 1 << 14;

/// Graphs visited in reflected Gray-code order; consecutive masks differ in one slot.
#[derive(Clone, Debug)]
pub struct GrayWalk {
    next: u64,
    end: u64,
}

impl GrayWalk {
    pub fn new(bits: usize) -> Self {
        Self::range(0, 1u64 << bits)
    }

    pub fn range(start: u64, end: u64) -> Self {
        Self { next: start, end }
    }

    pub fn code(t: u64) -> u64 {
        t ^ (t >> 1)
    }
}

impl Iterator for GrayWalk {
    /// `(mask, slot flipped from the previous mask)`; the first item flips nothing.
    type Item = (u64, Option<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let t = self.next;
        self.next += 1;
        let flipped = (t > 0).then(|| t.trailing_zeros() as usize);
        Some((Self::code(t), flipped))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnumerationReport {
    pub n_vertices: usize,
    pub log_z: f64,
    #[serde(skip)]
    pub edge_marginals: SymmetricMatrix,
    /// `E[inj(H_i, G)]` for every term, in term order.
    pub expected_counts: Vec<f64>,
    pub expected_edges: f64,
    /// Sum of all normalized probabilities; 1 up to rounding.
    pub total_probability: f64,
    pub graphs: u64,
}

/// Hamiltonian state updated one slot at a time.
struct Walker<'a> {
    model: &'a Hamiltonian,
    scales: Vec<f64>,
    x: SymmetricMatrix,
    pairs: Vec<(usize, usize)>,
    counts: Vec<f64>,
    edges: usize,
}

impl<'a> Walker<'a> {
    fn at(model: &'a Hamiltonian, mask: u64) -> Self {
        let n = model.n_vertices();
        let g = SimpleGraph::from_mask(n, mask);
        let counts = model
            .terms()
            .iter()
            .map(|t| inj_count(t.pattern(), &g).value)
            .collect();
        Self {
            model,
            scales: model.terms().iter().map(|t| term_scale(t, n)).collect(),
            x: g.to_matrix(),
            pairs: slot_pairs(n),
            counts,
            edges: g.edge_count(),
        }
    }

    fn value(&self) -> f64 {
        let mut f = 2.0 * self.model.alpha() * self.edges as f64;
        for (s, c) in self.scales.iter().zip(&self.counts) {
            f += s * c;
        }
        f
    }

    /// Toggles a slot; each count moves by twice its partial derivative.
    fn flip(&mut self, slot: usize) {
        let (i, j) = self.pairs[slot];
        let adding = self.x.get(i, j) == 0.0;
        let sign = if adding { 1.0 } else { -1.0 };
        for (t, c) in self.model.terms().iter().zip(self.counts.iter_mut()) {
            if t.vertex_count() <= self.x.n_vertices() {
                *c += sign * 2.0 * inj_partial(t.pattern(), &self.x, i, j);
            }
        }
        self.x.set(i, j, if adding { 1.0 } else { 0.0 });
        if adding {
            self.edges += 1;
        } else {
            self.edges -= 1;
        }
    }
}

fn chunks(total: u64) -> Vec<(u64, u64)> {
    (0..total.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(total)))
        .collect()
}

/// Runs `visit` on every graph of a Gray-code range with its Hamiltonian value.
fn walk_range(model: &Hamiltonian, start: u64, end: u64, mut visit: impl FnMut(&Walker, f64)) {
    let mut w = Walker::at(model, GrayWalk::code(start));
    for (t, (_, flipped)) in GrayWalk::range(start, end).enumerate() {
        if t > 0 {
            w.flip(flipped.expect("only index 0 flips nothing"));
        }
        let f = w.value();
        visit(&w, f);
    }
}

/// Exact partition function and marginals by summing over all `2^(N(N-1)/2)` graphs.
pub fn enumerate_exact(model: &Hamiltonian) -> Result<EnumerationReport> {
    let n = model.n_vertices();
    if n > MAX_ENUM_VERTICES {
        return Err(Error::TooLarge {
            n,
            max: MAX_ENUM_VERTICES,
        });
    }
    let slots = edge_slots(n);
    let total = 1u64 << slots;
    let parts = chunks(total);

    // first pass: streaming log-sum-exp per chunk
    let partial: Vec<(f64, f64)> = parts
        .par_iter()
        .map(|&(a, b)| {
            let (mut max, mut sum) = (f64::NEG_INFINITY, 0.0);
            walk_range(model, a, b, |_, f| {
                if f > max {
                    sum = sum * (max - f).exp() + 1.0;
                    max = f;
                } else {
                    sum += (f - max).exp();
                }
            });
            (max, sum)
        })
        .collect();
    let max = partial
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let log_z = max
        + partial
            .iter()
            .map(|&(m, s)| s * (m - max).exp())
            .sum::<f64>()
            .ln();

    // second pass: probability-weighted statistics
    let terms = model.terms().len();
    let stats: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = parts
        .par_iter()
        .map(|&(a, b)| {
            let mut marg = vec![0.0; slots];
            let mut counts = vec![0.0; terms];
            let (mut edges, mut mass) = (0.0, 0.0);
            let pairs = slot_pairs(n);
            walk_range(model, a, b, |w, f| {
                let p = (f - log_z).exp();
                mass += p;
                edges += p * w.edges as f64;
                for (s, &(i, j)) in pairs.iter().enumerate() {
                    if w.x.get(i, j) != 0.0 {
                        marg[s] += p;
                    }
                }
                for (acc, c) in counts.iter_mut().zip(&w.counts) {
                    *acc += p * c;
                }
            });
            (marg, counts, edges, mass)
        })
        .collect();

    let mut marg = vec![0.0; slots];
    let mut expected_counts = vec![0.0; terms];
    let (mut expected_edges, mut total_probability) = (0.0, 0.0);
    for (m, c, e, t) in stats {
        for (a, b) in marg.iter_mut().zip(m) {
            *a += b;
        }
        for (a, b) in expected_counts.iter_mut().zip(c) {
            *a += b;
        }
        expected_edges += e;
        total_probability += t;
    }
    let mut edge_marginals = SymmetricMatrix::zeros(n);
    for (s, (i, j)) in slot_pairs(n).into_iter().enumerate() {
        edge_marginals.set(i, j, marg[s]);
    }
    Ok(EnumerationReport {
        n_vertices: n,
        log_z,
        edge_marginals,
        expected_counts,
        expected_edges,
        total_probability,
        graphs: total,
    })
}

/// `(1 + tanh(d)) / 2`, the heat-bath probability of an edge with partial derivative `d`.
pub fn heat_bath_probability(partial: f64) -> f64 {
    0.5 * (1.0 + partial.tanh())
}

/// Probability that a heat-bath update at `{i, j}` switches the edge on,
/// from the gradient of the multilinear extension at the 0/1 state `x`.
pub fn update_probability(model: &Hamiltonian, x: &SymmetricMatrix, i: usize, j: usize) -> f64 {
    heat_bath_probability(gradient_entry(model, x, i, j))
}

/// Single-edge heat-bath chain.
///
/// The update probability uses the gradient of the multilinear extension at
/// the current 0/1 state, which equals the discrete derivative there.
#[derive(Clone, Debug)]
pub struct GlauberChain<'a> {
    model: &'a Hamiltonian,
    x: SymmetricMatrix,
    pairs: Vec<(usize, usize)>,
    rng: ChaCha8Rng,
}

impl<'a> GlauberChain<'a> {
    pub fn new(model: &'a Hamiltonian, initial: &SimpleGraph, rng: ChaCha8Rng) -> Result<Self> {
        let n = model.n_vertices();
        if initial.n_vertices() != n {
            return Err(Error::DimensionMismatch {
                left: initial.n_vertices(),
                right: n,
            });
        }
        Ok(Self {
            model,
            x: initial.to_matrix(),
            pairs: slot_pairs(n),
            rng,
        })
    }

    /// One update; returns the slot visited and its new value.
    pub fn step(&mut self) -> (usize, bool) {
        let s = self.rng.random_range(0..self.pairs.len());
        let (i, j) = self.pairs[s];
        let p = update_probability(self.model, &self.x, i, j);
        let on = self.rng.random::<f64>() < p;
        self.x.set(i, j, if on { 1.0 } else { 0.0 });
        (s, on)
    }

    pub fn is_on(&self, slot: usize) -> bool {
        let (i, j) = self.pairs[slot];
        self.x.get(i, j) != 0.0
    }

    pub fn state(&self) -> SimpleGraph {
        let edges: Vec<_> = self
            .pairs
            .iter()
            .copied()
            .filter(|&(i, j)| self.x.get(i, j) != 0.0)
            .collect();
        SimpleGraph::new(self.x.n_vertices(), &edges).expect("state is a simple graph")
    }
}

/// Runs `steps` heat-bath updates from `initial`.
pub fn glauber_sample(
    model: &Hamiltonian,
    steps: usize,
    seed: u64,
    initial: &SimpleGraph,
) -> Result<SimpleGraph> {
    let mut chain = GlauberChain::new(model, initial, ChaCha8Rng::seed_from_u64(seed))?;
    for _ in 0..steps {
        chain.step();
    }
    Ok(chain.state())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalEstimate {
    pub mean: SymmetricMatrix,
    /// Chain-to-chain standard error of the mean; absent for a single chain.
    pub std_err: Option<SymmetricMatrix>,
    pub chains: usize,
    pub steps: usize,
    pub burnin: usize,
}

/// Time-averaged edge occupancy after `burnin`, averaged over seeded chains
/// started from the empty graph. Chain `c` uses stream `c` of the seed.
pub fn empirical_marginals(
    model: &Hamiltonian,
    chains: usize,
    steps: usize,
    burnin: usize,
    seed: u64,
) -> Result<MarginalEstimate> {
    if chains == 0 || steps == 0 {
        return Err(Error::InvalidModel(
            "need at least one chain and one step".into(),
        ));
    }
    let n = model.n_vertices();
    let slots = edge_slots(n);
    let start = SimpleGraph::empty(n);
    let per_chain: Result<Vec<Vec<f64>>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut chain = GlauberChain::new(model, &start, rng)?;
            for _ in 0..burnin {
                chain.step();
            }
            // occupancy integrated lazily: time since each slot last switched on
            let mut total = vec![0u64; slots];
            let mut since: Vec<Option<u64>> =
                (0..slots).map(|s| chain.is_on(s).then_some(0)).collect();
            for t in 1..=steps as u64 {
                let (s, on) = chain.step();
                match (since[s], on) {
                    (None, true) => since[s] = Some(t),
                    (Some(t0), false) => {
                        total[s] += t - t0;
                        since[s] = None;
                    }
                    _ => {}
                }
            }
            let end = steps as u64 + 1;
            Ok(total
                .iter()
                .zip(&since)
                .map(|(&acc, t0)| (acc + t0.map_or(0, |t0| end - t0)) as f64 / steps as f64)
                .collect())
        })
        .collect();
    let per_chain = per_chain?;
    let k = chains as f64;
    let pairs = slot_pairs(n);
    let mut mean = SymmetricMatrix::zeros(n);
    let mut se = SymmetricMatrix::zeros(n);
    for (s, &(i, j)) in pairs.iter().enumerate() {
        let m = per_chain.iter().map(|v| v[s]).sum::<f64>() / k;
        mean.set(i, j, m);
        if chains > 1 {
            let var = per_chain.iter().map(|v| (v[s] - m).powi(2)).sum::<f64>() / (k - 1.0);
            se.set(i, j, (var / k).sqrt());
        }
    }
    Ok(MarginalEstimate {
        mean,
        std_err: (chains > 1).then_some(se),
        chains,
        steps,
        burnin,
    })
}

/// `sum_{i,j} |X_ij - Y_ij|`.
pub fn one_norm_distance(x: &SymmetricMatrix, y: &SymmetricMatrix) -> Result<f64> {
    x.one_norm_distance(y)
}
