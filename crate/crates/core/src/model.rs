//! Graphs, weight matrices and subgraph-counting Hamiltonians.
//!
//! Norm convention: every one-norm in this crate is the double sum
//! `sum_{i,j} |X_ij|` over all ordered pairs, so an undirected edge
//! contributes twice. Thresholds are applied under this convention.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Number of edge slots `N(N-1)/2` on `n` vertices.
pub fn edge_slots(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Vertex pairs `(i, j)` with `i < j`, in lexicographic order. Position in
/// this list is the slot index used by bit masks in [`crate::oracle`].
pub fn slot_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(edge_slots(n));
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

/// A labeled simple graph on `n` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<bool>,
}

impl SimpleGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {n} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if g.has_edge(a, b) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            g.insert(a, b);
        }
        g.edges.sort_unstable();
        Ok(g)
    }

    /// Builds a pattern whose vertex set is `0..=max index`.
    pub fn from_edges(edges: &[(usize, usize)]) -> Result<Self> {
        let n = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        Self::new(n, edges)
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            adj: vec![false; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let pairs = slot_pairs(n);
        Self::new(n, &pairs).expect("complete graph is simple")
    }

    /// Path on `m` vertices (`m - 1` edges).
    pub fn path(m: usize) -> Self {
        let edges: Vec<_> = (1..m).map(|v| (v - 1, v)).collect();
        Self::new(m, &edges).expect("path is simple")
    }

    /// Cycle on `m >= 3` vertices.
    pub fn cycle(m: usize) -> Self {
        assert!(m >= 3, "cycle needs at least 3 vertices");
        let edges: Vec<_> = (0..m).map(|v| (v, (v + 1) % m)).collect();
        Self::new(m, &edges).expect("cycle is simple")
    }

    /// Graph on `n` vertices whose edges are the set bits of `mask`, using the
    /// slot order of [`slot_pairs`].
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let mut g = Self::empty(n);
        for (s, (a, b)) in slot_pairs(n).into_iter().enumerate() {
            if mask >> s & 1 == 1 {
                g.insert(a, b);
            }
        }
        g.edges.sort_unstable();
        g
    }

    fn insert(&mut self, a: usize, b: usize) {
        self.adj[a * self.n + b] = true;
        self.adj[b * self.n + a] = true;
        self.edges.push((a.min(b), a.max(b)));
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.adj[a * self.n + b]
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.n).filter(|&u| self.has_edge(v, u)).count()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&u| self.has_edge(v, u))
    }

    /// Returns a copy with edge `{a, b}` present or absent.
    pub fn with_edge(&self, a: usize, b: usize, present: bool) -> Self {
        let mut g = self.clone();
        let here = g.has_edge(a, b);
        if present && !here {
            g.insert(a, b);
            g.edges.sort_unstable();
        } else if !present && here {
            g.adj[a * g.n + b] = false;
            g.adj[b * g.n + a] = false;
            let key = (a.min(b), a.max(b));
            g.edges.retain(|&e| e != key);
        }
        g
    }

    pub fn to_matrix(&self) -> SymmetricMatrix {
        let mut m = SymmetricMatrix::zeros(self.n);
        for &(a, b) in &self.edges {
            m.set(a, b, 1.0);
        }
        m
    }
}

/// Symmetric real `N x N` matrix with zero diagonal.
///
/// Weight matrices (points of the continuous cube) have entries in `[0, 1]`;
/// gradients use the same type without the range restriction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    data: Array2<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            data: Array2::zeros((n, n)),
        }
    }

    /// `x` on every off-diagonal entry (`x` times the all-ones matrix with zero diagonal).
    pub fn constant(n: usize, x: f64) -> Self {
        Self::from_fn(n, |_, _| x)
    }

    /// Fills the upper triangle from `f(i, j)` (`i < j`) and mirrors it.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                data[[i, j]] = v;
                data[[j, i]] = v;
            }
        }
        Self { data }
    }

    /// Validates symmetry and zero diagonal exactly.
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::InvalidMatrix(format!(
                "matrix is {r}x{c}, not square"
            )));
        }
        for i in 0..r {
            if data[[i, i]] != 0.0 {
                return Err(Error::InvalidMatrix(format!(
                    "diagonal entry ({i}, {i}) is {} instead of 0",
                    data[[i, i]]
                )));
            }
            for j in (i + 1)..r {
                let (a, b) = (data[[i, j]], data[[j, i]]);
                if !a.is_finite() {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) is not finite"
                    )));
                }
                if a != b {
                    return Err(Error::InvalidMatrix(format!(
                        "asymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Array2::zeros((n, n));
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                data[[i, j]] = v;
            }
        }
        Self::from_array(data)
    }

    pub(crate) fn from_array_unchecked(data: Array2<f64>) -> Self {
        debug_assert_eq!(data.nrows(), data.ncols());
        Self { data }
    }

    pub fn n_vertices(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    ///
    /// # Panics
    /// If `i == j`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i != j, "diagonal entries are fixed at zero");
        self.data[[i, j]] = v;
        self.data[[j, i]] = v;
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.outer_iter().map(|r| r.to_vec()).collect()
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_vertices();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| self.data[[i, j]]))
    }

    pub fn is_in_unit_cube(&self) -> bool {
        self.off_diagonal().all(|v| (0.0..=1.0).contains(&v))
    }

    /// Returns the shared off-diagonal value if the matrix is constant.
    pub fn constant_value(&self) -> Option<f64> {
        let mut it = self.off_diagonal();
        let first = it.next()?;
        it.all(|v| v == first).then_some(first)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.off_diagonal().fold(f64::INFINITY, f64::min)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        self.off_diagonal().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Double-sum one-norm.
    pub fn one_norm(&self) -> f64 {
        2.0 * self.off_diagonal().map(f64::abs).sum::<f64>()
    }

    pub fn one_norm_distance(&self, other: &Self) -> Result<f64> {
        if self.n_vertices() != other.n_vertices() {
            return Err(Error::DimensionMismatch {
                left: self.n_vertices(),
                right: other.n_vertices(),
            });
        }
        let s: f64 = self
            .off_diagonal()
            .zip(other.off_diagonal())
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(2.0 * s)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let n = self.n_vertices();
        Self::from_fn(n, |i, j| f(self.data[[i, j]]))
    }

    /// Row sums (the weighted degrees).
    pub fn row_sums(&self) -> Vec<f64> {
        self.data.rows().into_iter().map(|r| r.sum()).collect()
    }
}

/// Recognised pattern shapes with closed-form counting polynomials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternKind {
    /// K2.
    Edge,
    /// Path on three vertices (two edges).
    Wedge,
    /// K3.
    Triangle,
    /// Four-cycle.
    Square,
    General,
}

impl PatternKind {
    pub fn classify(h: &SimpleGraph) -> Self {
        let (m, e) = (h.n_vertices(), h.edge_count());
        match (m, e) {
            (2, 1) => PatternKind::Edge,
            (3, 2) => PatternKind::Wedge,
            (3, 3) => PatternKind::Triangle,
            (4, 4) if (0..4).all(|v| h.degree(v) == 2) => PatternKind::Square,
            _ => PatternKind::General,
        }
    }
}

/// One `beta * N(N-1) t(H, X)` term of a Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgraphTerm {
    pattern: SimpleGraph,
    weight: f64,
    kind: PatternKind,
}

impl SubgraphTerm {
    pub fn new(pattern: SimpleGraph, weight: f64) -> Result<Self> {
        if pattern.n_vertices() < 2 || pattern.edge_count() == 0 {
            return Err(Error::InvalidModel(
                "pattern needs at least two vertices and one edge".into(),
            ));
        }
        if !weight.is_finite() {
            return Err(Error::InvalidModel(format!("non-finite weight {weight}")));
        }
        let kind = PatternKind::classify(&pattern);
        Ok(Self {
            pattern,
            weight,
            kind,
        })
    }

    pub fn pattern(&self) -> &SimpleGraph {
        &self.pattern
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    /// Pattern vertex count `m`.
    pub fn vertex_count(&self) -> usize {
        self.pattern.n_vertices()
    }

    /// `|E(H)|`.
    pub fn edge_count(&self) -> usize {
        self.pattern.edge_count()
    }
}

/// `f(X) = alpha * inj(K2, X) + N(N-1) * sum_i beta_i t(H_i, X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    n_vertices: usize,
    alpha: f64,
    terms: Vec<SubgraphTerm>,
}

impl Hamiltonian {
    pub fn new(n_vertices: usize, alpha: f64, terms: Vec<SubgraphTerm>) -> Result<Self> {
        if n_vertices < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least 2 vertices, got {n_vertices}"
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidModel(format!("non-finite alpha {alpha}")));
        }
        Ok(Self {
            n_vertices,
            alpha,
            terms,
        })
    }

    /// `alpha * inj(K2, X) + beta/(N-2) * inj(K3, X)`.
    pub fn edge_triangle(n_vertices: usize, alpha: f64, beta: f64) -> Result<Self> {
        let tri = SubgraphTerm::new(SimpleGraph::complete(3), beta)?;
        Self::new(n_vertices, alpha, vec![tri])
    }

    pub fn edge_only(n_vertices: usize, alpha: f64) -> Result<Self> {
        Self::new(n_vertices, alpha, Vec::new())
    }

    /// Same terms on a different vertex count.
    pub fn with_vertices(&self, n_vertices: usize) -> Result<Self> {
        Self::new(n_vertices, self.alpha, self.terms.clone())
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Edge-coordinate count `n = N(N-1)/2`.
    pub fn n_edges(&self) -> usize {
        edge_slots(self.n_vertices)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn terms(&self) -> &[SubgraphTerm] {
        &self.terms
    }

    /// Indices of terms whose pattern has more vertices than the host graph.
    /// Their counts are identically zero.
    pub fn oversized_terms(&self) -> Vec<usize> {
        self.terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.vertex_count() > self.n_vertices)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn all_weights_nonnegative(&self) -> bool {
        self.terms.iter().all(|t| t.weight >= 0.0)
    }

    /// `(|w|, |E|)` over the alpha term (as K2) and every pattern term.
    fn weighted_edge_counts(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once((self.alpha.abs(), 1.0)).chain(
            self.terms
                .iter()
                .map(|t| (t.weight.abs(), t.edge_count() as f64)),
        )
    }

    /// `C_beta = max{12 * sum |beta_i| |E_i|^2, 2}`, alpha entering as a K2 term.
    pub fn c_beta(&self) -> f64 {
        let s: f64 = self.weighted_edge_counts().map(|(w, e)| w * e * e).sum();
        (12.0 * s).max(2.0)
    }

    /// `S_beta = sum |beta_i| * C(|E_i|, 2)`.
    pub fn s_beta(&self) -> f64 {
        self.weighted_edge_counts()
            .map(|(w, e)| w * e * (e - 1.0) / 2.0)
            .sum()
    }

    /// Lipschitz constant `|alpha| + sum |beta_i| |E_i|` of the discrete Hamiltonian.
    pub fn lip_bound(&self) -> f64 {
        self.weighted_edge_counts().map(|(w, e)| w * e).sum()
    }

    /// One-norm Lipschitz constant of the gradient, `12 * sum |beta_i| |E_i|^2`.
    pub fn gradient_lipschitz(&self) -> f64 {
        12.0 * self
            .weighted_edge_counts()
            .map(|(w, e)| w * e * e)
            .sum::<f64>()
    }

    /// Sharper gradient constant `sum |beta_i| |E_i| (|E_i| - 1) = 2 S_beta`.
    pub fn gradient_contraction(&self) -> f64 {
        self.weighted_edge_counts()
            .map(|(w, e)| w * e * (e - 1.0))
            .sum()
    }
}

/// `(N-2)(N-3)...(N-m+1)`; the empty product is 1. Zero when `m > N`.
pub fn reduced_falling_factorial(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    (2..m).map(|k| (n - k) as f64).product()
}

/// `N(N-1)...(N-m+1)`; zero when `m > N`.
pub fn falling_factorial(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    (0..m).map(|k| (n - k) as f64).product()
}
