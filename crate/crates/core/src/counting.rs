//! Injective homomorphism counts, the multilinear Hamiltonian and its gradient.
//!
//! Two routes compute the gradient of a weighted pattern count:
//! closed forms for K2, the wedge, K3 and C4 (dense matrix algebra), and a
//! generic backtracking sum over distinct vertex tuples. The discrete
//! derivative on 0/1 graphs goes through integer `inj` counts instead, so
//! it shares no code with either polynomial route.

use rayon::prelude::*;

use crate::model::{
    edge_slots, falling_factorial, reduced_falling_factorial, slot_pairs, Hamiltonian, PatternKind,
    SimpleGraph, SubgraphTerm, SymmetricMatrix,
};

/// Result of an exact injective homomorphism count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InjCount {
    /// `None` if the count overflowed `u64`; `value` then holds a float total.
    pub exact: Option<u64>,
    pub value: f64,
    /// The pattern has more vertices than the host; the count is zero.
    pub oversized: bool,
}

/// Injective homomorphism density with its degeneracy flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Density {
    pub value: f64,
    pub oversized: bool,
}

/// Pattern vertices ordered so that every vertex after the first of its
/// component has an earlier neighbour.
fn search_order(h: &SimpleGraph) -> Vec<usize> {
    let m = h.n_vertices();
    let mut placed = vec![false; m];
    let mut order = Vec::with_capacity(m);
    while order.len() < m {
        // next: most links to placed vertices, then highest degree
        let next = (0..m)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| {
                let links = h.neighbors(v).filter(|&u| placed[u]).count();
                (links, h.degree(v), std::cmp::Reverse(v))
            })
            .expect("unplaced vertex exists");
        placed[next] = true;
        order.push(next);
    }
    order
}

/// Counts injective adjacency-preserving maps `V(H) -> V(G)`.
pub fn inj_count(h: &SimpleGraph, g: &SimpleGraph) -> InjCount {
    let (m, n) = (h.n_vertices(), g.n_vertices());
    if m > n {
        return InjCount {
            exact: Some(0),
            value: 0.0,
            oversized: true,
        };
    }
    let order = search_order(h);
    // back[p]: positions (in `order`) of earlier neighbours of order[p]
    let back: Vec<Vec<usize>> = order
        .iter()
        .enumerate()
        .map(|(p, &v)| (0..p).filter(|&q| h.has_edge(v, order[q])).collect())
        .collect();

    struct Search<'a> {
        g: &'a SimpleGraph,
        back: &'a [Vec<usize>],
        image: Vec<usize>,
        used: Vec<bool>,
        exact: Option<u64>,
        approx: f64,
    }

    impl Search<'_> {
        fn run(&mut self, p: usize) {
            let n = self.g.n_vertices();
            if p + 1 == self.back.len() {
                // last level: count candidates in bulk
                let c = (0..n).filter(|&v| self.admissible(p, v)).count() as u64;
                self.approx += c as f64;
                self.exact = self.exact.and_then(|e| e.checked_add(c));
                return;
            }
            for v in 0..n {
                if self.admissible(p, v) {
                    self.image[p] = v;
                    self.used[v] = true;
                    self.run(p + 1);
                    self.used[v] = false;
                }
            }
        }

        fn admissible(&self, p: usize, v: usize) -> bool {
            !self.used[v]
                && self.back[p]
                    .iter()
                    .all(|&q| self.g.has_edge(v, self.image[q]))
        }
    }

    let mut s = Search {
        g,
        back: &back,
        image: vec![0; m],
        used: vec![false; n],
        exact: Some(0),
        approx: 0.0,
    };
    if m > 0 {
        s.run(0);
    } else {
        s.exact = Some(1);
        s.approx = 1.0;
    }
    let value = match s.exact {
        Some(e) => e as f64,
        None => s.approx,
    };
    InjCount {
        exact: s.exact,
        value,
        oversized: false,
    }
}

/// `t(H, G) = inj(H, G) / (N (N-1) ... (N-m+1))`.
pub fn density_t(h: &SimpleGraph, g: &SimpleGraph) -> Density {
    let c = inj_count(h, g);
    if c.oversized {
        return Density {
            value: 0.0,
            oversized: true,
        };
    }
    Density {
        value: c.value / falling_factorial(g.n_vertices(), h.n_vertices()),
        oversized: false,
    }
}

// ---------------------------------------------------------------------------
// generic tuple route

/// Sum over injective extensions of `fixed` of the product of `X` over the
/// edges of `h`, leaving out `skip` (an unordered pattern edge).
fn tuple_sum(
    h: &SimpleGraph,
    x: &SymmetricMatrix,
    fixed: &[(usize, usize)],
    skip: Option<(usize, usize)>,
) -> f64 {
    let m = h.n_vertices();
    let n = x.n_vertices();
    if m > n {
        return 0.0;
    }
    let skipped = |a: usize, b: usize| match skip {
        Some((s, t)) => (a == s && b == t) || (a == t && b == s),
        None => false,
    };
    let mut image = vec![usize::MAX; m];
    let mut used = vec![false; n];
    let mut base = 1.0;
    for &(pv, hv) in fixed {
        if used[hv] {
            return 0.0;
        }
        image[pv] = hv;
        used[hv] = true;
    }
    for (k, &(a, _)) in fixed.iter().enumerate() {
        for &(b, _) in &fixed[..k] {
            if h.has_edge(a, b) && !skipped(a, b) {
                base *= x.get(image[a], image[b]);
            }
        }
    }
    if base == 0.0 {
        return 0.0;
    }

    // order the free vertices by links to already placed ones
    let mut placed: Vec<bool> = (0..m).map(|v| image[v] != usize::MAX).collect();
    let mut order = Vec::new();
    while order.len() + fixed.len() < m {
        let next = (0..m)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| (h.neighbors(v).filter(|&u| placed[u]).count(), h.degree(v)))
            .unwrap();
        placed[next] = true;
        order.push(next);
    }
    // links[p]: placed pattern vertices joined to order[p] by a counted edge
    let mut earlier: Vec<usize> = fixed.iter().map(|&(pv, _)| pv).collect();
    let mut links = Vec::with_capacity(order.len());
    for &v in &order {
        links.push(
            earlier
                .iter()
                .copied()
                .filter(|&u| h.has_edge(v, u) && !skipped(v, u))
                .collect::<Vec<_>>(),
        );
        earlier.push(v);
    }

    fn rec(
        p: usize,
        acc: f64,
        order: &[usize],
        links: &[Vec<usize>],
        image: &mut [usize],
        used: &mut [bool],
        x: &SymmetricMatrix,
    ) -> f64 {
        if p == order.len() {
            return acc;
        }
        let n = x.n_vertices();
        let v = order[p];
        let mut total = 0.0;
        for hv in 0..n {
            if used[hv] {
                continue;
            }
            let mut w = acc;
            for &u in &links[p] {
                w *= x.get(hv, image[u]);
                if w == 0.0 {
                    break;
                }
            }
            if w == 0.0 {
                continue;
            }
            image[v] = hv;
            used[hv] = true;
            total += rec(p + 1, w, order, links, image, used, x);
            used[hv] = false;
        }
        image[v] = usize::MAX;
        total
    }

    rec(0, base, &order, &links, &mut image, &mut used, x)
}

/// `sum_{q distinct} prod_{(l,l') in E(H)} X[q_l][q_l']` by tuple enumeration.
pub fn inj_weighted_tuples(h: &SimpleGraph, x: &SymmetricMatrix) -> f64 {
    tuple_sum(h, x, &[], None)
}

/// Half the partial derivative of the weighted count in the edge coordinate
/// `{i, j}`: `1/2 sum_{(a,b) in D(H)} sum_{q_a=i, q_b=j} prod_{other edges}`,
/// summing both orientations of every pattern edge.
pub fn inj_partial_tuples(h: &SimpleGraph, x: &SymmetricMatrix, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for &(a, b) in h.edges() {
        s += tuple_sum(h, x, &[(a, i), (b, j)], Some((a, b)));
        s += tuple_sum(h, x, &[(b, i), (a, j)], Some((a, b)));
    }
    0.5 * s
}

pub fn inj_gradient_tuples(h: &SimpleGraph, x: &SymmetricMatrix) -> SymmetricMatrix {
    fill_pairs(x.n_vertices(), |i, j| inj_partial_tuples(h, x, i, j))
}

fn fill_pairs(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> SymmetricMatrix {
    let pairs = slot_pairs(n);
    let vals: Vec<f64> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect();
    let mut out = SymmetricMatrix::zeros(n);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        out.set(i, j, v);
    }
    out
}

// ---------------------------------------------------------------------------
// closed forms

fn squared_row_norms(x: &SymmetricMatrix) -> Vec<f64> {
    x.as_array()
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum())
        .collect()
}

/// Full `inj_partial` matrix for a recognised pattern shape.
fn closed_gradient(kind: PatternKind, x: &SymmetricMatrix) -> Option<SymmetricMatrix> {
    let n = x.n_vertices();
    let a = x.as_array();
    let out = match kind {
        PatternKind::Edge => SymmetricMatrix::constant(n, 1.0),
        PatternKind::Triangle => {
            let sq = a.dot(a);
            SymmetricMatrix::from_fn(n, |i, j| 3.0 * sq[[i, j]])
        }
        PatternKind::Wedge => {
            let r = x.row_sums();
            SymmetricMatrix::from_fn(n, |i, j| r[i] + r[j] - 2.0 * a[[i, j]])
        }
        PatternKind::Square => {
            let cube = a.dot(&a.dot(a));
            let d = squared_row_norms(x);
            SymmetricMatrix::from_fn(n, |i, j| {
                let xij = a[[i, j]];
                4.0 * (cube[[i, j]] - xij * (d[i] + d[j]) + xij * xij * xij)
            })
        }
        PatternKind::General => return None,
    };
    Some(out)
}

fn closed_partial(kind: PatternKind, x: &SymmetricMatrix, i: usize, j: usize) -> Option<f64> {
    let a = x.as_array();
    let n = x.n_vertices();
    let v = match kind {
        PatternKind::Edge => 1.0,
        PatternKind::Triangle => 3.0 * a.row(i).dot(&a.row(j)),
        PatternKind::Wedge => a.row(i).sum() + a.row(j).sum() - 2.0 * a[[i, j]],
        PatternKind::Square => {
            // (X^3)_ij minus walks that revisit i or j
            let mut walks = 0.0;
            for k in 0..n {
                let xjk = a[[j, k]];
                if xjk == 0.0 {
                    continue;
                }
                walks += xjk * a.row(k).dot(&a.row(i));
            }
            let xij = a[[i, j]];
            let di = a.row(i).dot(&a.row(i));
            let dj = a.row(j).dot(&a.row(j));
            4.0 * (walks - xij * (di + dj) + xij * xij * xij)
        }
        PatternKind::General => return None,
    };
    Some(v)
}

/// Weighted injective count of `h` in `x`, closed form when available.
pub fn inj_weighted(h: &SimpleGraph, x: &SymmetricMatrix) -> f64 {
    let kind = PatternKind::classify(h);
    if h.n_vertices() > x.n_vertices() {
        return 0.0;
    }
    match kind {
        PatternKind::Edge => x.one_norm(),
        PatternKind::General => inj_weighted_tuples(h, x),
        _ => {
            // homogeneous multilinear: sum_{i != j} X_ij * partial_ij = |E| * value
            let g = closed_gradient(kind, x).unwrap();
            let s: f64 = x
                .off_diagonal()
                .zip(g.off_diagonal())
                .map(|(a, b)| a * b)
                .sum();
            2.0 * s / h.edge_count() as f64
        }
    }
}

/// `inj_partial` matrix of `h` at `x`, closed form when available.
pub fn inj_gradient(h: &SimpleGraph, x: &SymmetricMatrix) -> SymmetricMatrix {
    if h.n_vertices() > x.n_vertices() {
        return SymmetricMatrix::zeros(x.n_vertices());
    }
    closed_gradient(PatternKind::classify(h), x).unwrap_or_else(|| inj_gradient_tuples(h, x))
}

pub fn inj_partial(h: &SimpleGraph, x: &SymmetricMatrix, i: usize, j: usize) -> f64 {
    if h.n_vertices() > x.n_vertices() {
        return 0.0;
    }
    closed_partial(PatternKind::classify(h), x, i, j)
        .unwrap_or_else(|| inj_partial_tuples(h, x, i, j))
}

// ---------------------------------------------------------------------------
// Hamiltonian level

/// Multiplier turning `inj(H_i, .)` into the term `N(N-1) beta_i t(H_i, .)`.
pub fn term_scale(term: &SubgraphTerm, n: usize) -> f64 {
    let ff = reduced_falling_factorial(n, term.vertex_count());
    if ff == 0.0 {
        0.0
    } else {
        term.weight() / ff
    }
}

/// Value of the multilinear extension of `f` at `x`.
pub fn hamiltonian_value(model: &Hamiltonian, x: &SymmetricMatrix) -> f64 {
    let n = x.n_vertices();
    let mut f = model.alpha() * x.one_norm();
    for t in model.terms() {
        let s = term_scale(t, n);
        if s != 0.0 {
            f += s * inj_weighted(t.pattern(), x);
        }
    }
    f
}

/// Same value through the tuple route only (reference path, small `N`).
pub fn hamiltonian_value_tuples(model: &Hamiltonian, x: &SymmetricMatrix) -> f64 {
    let n = x.n_vertices();
    let mut f = model.alpha() * inj_weighted_tuples(&SimpleGraph::complete(2), x);
    for t in model.terms() {
        let s = term_scale(t, n);
        if s != 0.0 {
            f += s * inj_weighted_tuples(t.pattern(), x);
        }
    }
    f
}

/// `f(G)` on a simple graph from exact integer counts.
pub fn hamiltonian_value_graph(model: &Hamiltonian, g: &SimpleGraph) -> f64 {
    let n = g.n_vertices();
    let mut f = model.alpha() * 2.0 * g.edge_count() as f64;
    for t in model.terms() {
        let s = term_scale(t, n);
        if s != 0.0 {
            f += s * inj_count(t.pattern(), g).value;
        }
    }
    f
}

/// `grad f(X)` with zero diagonal.
pub fn gradient(model: &Hamiltonian, x: &SymmetricMatrix) -> SymmetricMatrix {
    let n = x.n_vertices();
    let mut acc = SymmetricMatrix::constant(n, model.alpha()).into_array();
    for t in model.terms() {
        let s = term_scale(t, n);
        if s != 0.0 {
            acc.scaled_add(s, inj_gradient(t.pattern(), x).as_array());
        }
    }
    SymmetricMatrix::from_array_unchecked(acc)
}

/// Gradient through the tuple route only.
pub fn gradient_tuples(model: &Hamiltonian, x: &SymmetricMatrix) -> SymmetricMatrix {
    let n = x.n_vertices();
    let mut acc = SymmetricMatrix::constant(n, model.alpha()).into_array();
    for t in model.terms() {
        let s = term_scale(t, n);
        if s != 0.0 {
            acc.scaled_add(s, inj_gradient_tuples(t.pattern(), x).as_array());
        }
    }
    SymmetricMatrix::from_array_unchecked(acc)
}

/// Single gradient entry `(grad f(X))_ij`.
pub fn gradient_entry(model: &Hamiltonian, x: &SymmetricMatrix, i: usize, j: usize) -> f64 {
    let n = x.n_vertices();
    let mut v = model.alpha();
    for t in model.terms() {
        let s = term_scale(t, n);
        if s != 0.0 {
            v += s * inj_partial(t.pattern(), x, i, j);
        }
    }
    v
}

/// Discrete derivative `(f(G + ij) - f(G - ij)) / 2`.
pub fn discrete_partial(model: &Hamiltonian, g: &SimpleGraph, i: usize, j: usize) -> f64 {
    assert!(i != j, "edge coordinate needs two distinct vertices");
    let plus = hamiltonian_value_graph(model, &g.with_edge(i, j, true));
    let minus = hamiltonian_value_graph(model, &g.with_edge(i, j, false));
    0.5 * (plus - minus)
}

/// First coordinate where a gradient routine disagrees with the discrete derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct GradMismatch {
    pub mask: u64,
    pub edge: (usize, usize),
    pub formula: f64,
    pub discrete: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub n_vertices: usize,
    pub graphs_checked: u64,
    pub coordinates_checked: u64,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub first_mismatch: Option<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Largest vertex count accepted by [`gradcheck_exhaustive`].
pub const GRADCHECK_MAX_VERTICES: usize = 6;

/// Compares `grad` with [`discrete_partial`] on every graph with `n` vertices.
///
/// The tolerance is `1e-9 * max(1, lip_bound)`.
pub fn gradcheck_exhaustive<F>(model: &Hamiltonian, n: usize, grad: F) -> GradCheckReport
where
    F: Fn(&Hamiltonian, &SymmetricMatrix) -> SymmetricMatrix,
{
    assert!(
        n <= GRADCHECK_MAX_VERTICES,
        "exhaustive check limited to small N"
    );
    let model = model.with_vertices(n).expect("n >= 2");
    let tolerance = 1e-9 * model.lip_bound().max(1.0);
    let pairs = slot_pairs(n);
    let slots = edge_slots(n);
    let mut report = GradCheckReport {
        n_vertices: n,
        graphs_checked: 0,
        coordinates_checked: 0,
        max_abs_diff: 0.0,
        tolerance,
        first_mismatch: None,
    };
    for mask in 0..(1u64 << slots) {
        let g = SimpleGraph::from_mask(n, mask);
        let gm = grad(&model, &g.to_matrix());
        for &(i, j) in &pairs {
            let d = discrete_partial(&model, &g, i, j);
            let diff = (gm.get(i, j) - d).abs();
            report.max_abs_diff = report.max_abs_diff.max(diff);
            report.coordinates_checked += 1;
            if diff > tolerance && report.first_mismatch.is_none() {
                report.first_mismatch = Some(GradMismatch {
                    mask,
                    edge: (i, j),
                    formula: gm.get(i, j),
                    discrete: d,
                });
            }
        }
        report.graphs_checked += 1;
    }
    report
}
