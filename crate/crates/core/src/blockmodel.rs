//! Compression of weight matrices into stochastic block models by random
//! orthogonal projection and greedy delta-net rounding.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hamiltonian, PatternKind, SimpleGraph, SymmetricMatrix};

/// Community assignment plus a symmetric `k x k` parameter matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockModel")]
pub struct BlockModel {
    assignment: Vec<usize>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawBlockModel {
    assignment: Vec<usize>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
}

impl TryFrom<RawBlockModel> for BlockModel {
    type Error = Error;

    fn try_from(raw: RawBlockModel) -> Result<Self> {
        BlockModel::new(raw.assignment, raw.p)
    }
}

impl BlockModel {
    pub fn new(assignment: Vec<usize>, p: Vec<Vec<f64>>) -> Result<Self> {
        let k = p.len();
        if k == 0 {
            return Err(Error::InvalidModel(
                "block model needs at least one community".into(),
            ));
        }
        if assignment.len() < 2 {
            return Err(Error::InvalidModel(
                "block model needs at least two vertices".into(),
            ));
        }
        for (a, row) in p.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidModel(format!(
                    "row {a} of P has {} entries, expected {k}",
                    row.len()
                )));
            }
            for (b, &v) in row.iter().enumerate() {
                if !v.is_finite() || v != p[b][a] {
                    return Err(Error::InvalidModel(format!(
                        "P is not symmetric and finite at ({a}, {b})"
                    )));
                }
            }
        }
        let mut used = vec![false; k];
        for (i, &c) in assignment.iter().enumerate() {
            if c >= k {
                return Err(Error::InvalidModel(format!(
                    "vertex {i} has community {c} >= {k}"
                )));
            }
            used[c] = true;
        }
        if let Some(c) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidModel(format!("community {c} is empty")));
        }
        Ok(Self { assignment, p })
    }

    pub fn n_vertices(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_communities(&self) -> usize {
        self.p.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn parameters(&self) -> &[Vec<f64>] {
        &self.p
    }

    /// `X*_ij = P[c_i][c_j]` off the diagonal.
    pub fn expand(&self) -> SymmetricMatrix {
        let c = &self.assignment;
        SymmetricMatrix::from_fn(self.n_vertices(), |i, j| self.p[c[i]][c[j]])
    }
}

/// Target dimension, net radius parameter and seed for a projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub target_dim: usize,
    pub delta: f64,
    pub seed: u64,
}

impl ProjectionConfig {
    /// `k = ceil(2 ln(1/delta) / (delta^2/2 - delta^3/3))`.
    pub fn default_dim(delta: f64) -> usize {
        (2.0 * (1.0 / delta).ln() / jl_rate(delta)).ceil() as usize
    }

    pub fn with_default_dim(delta: f64, seed: u64) -> Self {
        Self {
            target_dim: Self::default_dim(delta).max(1),
            delta,
            seed,
        }
    }
}

/// `delta^2/2 - delta^3/3`.
pub fn jl_rate(delta: f64) -> f64 {
    delta * delta / 2.0 - delta.powi(3) / 3.0
}

/// Upper bound on the probability that one vector's squared norm leaves
/// `[(1-delta), (1+delta)]` times its original value.
pub fn norm_failure_bound(k: usize, delta: f64) -> f64 {
    2.0 * (-(k as f64) * jl_rate(delta) / 2.0).exp()
}

/// Scaled projection `g(v) = sqrt(d/k) pi(v)` onto a random `k`-dimensional subspace.
#[derive(Clone, Debug)]
pub struct RandomProjection {
    /// Orthonormal rows spanning the subspace.
    basis: Array2<f64>,
    scale: f64,
}

impl RandomProjection {
    /// Draws the subspace from `seed`; `k` is clamped to `d`.
    pub fn new(d: usize, k: usize, seed: u64) -> Self {
        assert!(d >= 1 && k >= 1);
        let k = k.min(d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b: Array2<f64> = Array2::from_shape_fn((k, d), |_| StandardNormal.sample(&mut rng));
        // two Gram-Schmidt sweeps for orthogonality to working precision
        for _ in 0..2 {
            for r in 0..k {
                for s in 0..r {
                    let dot = b.row(r).dot(&b.row(s));
                    let prev = b.row(s).to_owned();
                    b.row_mut(r).scaled_add(-dot, &prev);
                }
                let norm = b.row(r).dot(&b.row(r)).sqrt();
                b.row_mut(r).mapv_inplace(|v| v / norm);
            }
        }
        Self {
            basis: b,
            scale: (d as f64 / k as f64).sqrt(),
        }
    }

    pub fn source_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let v = Array1::from(v.to_vec());
        (self.basis.dot(&v) * self.scale).to_vec()
    }

    /// Projects every column of `m`.
    pub fn apply_columns(&self, m: &Array2<f64>) -> Vec<Vec<f64>> {
        let out = self.basis.dot(m) * self.scale;
        out.axis_iter(Axis(1)).map(|c| c.to_vec()).collect()
    }
}

/// `v_i = column_i(X) / sqrt(N)`.
pub fn column_vectors(x: &SymmetricMatrix) -> Vec<Vec<f64>> {
    let s = (x.n_vertices() as f64).sqrt();
    x.as_array()
        .axis_iter(Axis(1))
        .map(|c| c.iter().map(|v| v / s).collect())
        .collect()
}

/// `g(v_i)` for every scaled column of `x`.
pub fn project_columns(x: &SymmetricMatrix, cfg: &ProjectionConfig) -> Vec<Vec<f64>> {
    let n = x.n_vertices();
    let proj = RandomProjection::new(n, cfg.target_dim, cfg.seed);
    let scaled = x.as_array() / (n as f64).sqrt();
    proj.apply_columns(&scaled)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn combine(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + sign * y).collect()
}

/// Whether `g` preserves `||w||^2` within a factor `1 +- delta`.
pub fn norm_preserved(w: &[f64], gw: &[f64], delta: f64) -> bool {
    let (a, b) = (norm_sq(w), norm_sq(gw));
    (1.0 - delta) * a <= b && b <= (1.0 + delta) * a
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalarProductCheck {
    /// Squared norms of `u`, `v`, `u + v`, `u - v` are all preserved.
    pub norm_conditions: bool,
    pub error: f64,
    /// `error <= 2 delta`.
    pub within_bound: bool,
}

/// Compares `<g(u), g(v)>` with `<u, v>`, given the images of a linear `g`.
pub fn scalar_product_error(
    u: &[f64],
    v: &[f64],
    gu: &[f64],
    gv: &[f64],
    delta: f64,
) -> ScalarProductCheck {
    let norm_conditions = norm_preserved(u, gu, delta)
        && norm_preserved(v, gv, delta)
        && norm_preserved(&combine(u, v, 1.0), &combine(gu, gv, 1.0), delta)
        && norm_preserved(&combine(u, v, -1.0), &combine(gu, gv, -1.0), delta);
    let error = (dot(gu, gv) - dot(u, v)).abs();
    ScalarProductCheck {
        norm_conditions,
        error,
        within_bound: error <= 2.0 * delta,
    }
}

/// Radius of the ball the net covers.
pub const NET_RADIUS: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaNet {
    pub points: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Inputs outside the radius-2 ball, pulled back onto its surface.
    pub clamped: usize,
    /// `(1 + 4/delta)^(k+1)`, the size of an optimal net.
    pub covering_bound: f64,
    /// `(1 + 8/delta)^(k+1)`, which bounds any delta-separated set in the ball.
    pub packing_bound: f64,
}

impl DeltaNet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Greedy first-fit net: each vector joins the lowest-index net point within
/// `delta`, or becomes a new net point.
pub fn delta_net_round(vectors: &[Vec<f64>], delta: f64) -> DeltaNet {
    let k = vectors.first().map_or(0, Vec::len);
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut assignment = Vec::with_capacity(vectors.len());
    let mut clamped = 0;
    for v in vectors {
        let r = norm_sq(v).sqrt();
        let v: Vec<f64> = if r > NET_RADIUS {
            clamped += 1;
            v.iter().map(|x| x * NET_RADIUS / r).collect()
        } else {
            v.clone()
        };
        match points.iter().position(|p| distance(p, &v) <= delta) {
            Some(a) => assignment.push(a),
            None => {
                assignment.push(points.len());
                points.push(v);
            }
        }
    }
    let e = (k + 1) as f64;
    let net = DeltaNet {
        covering_bound: (1.0 + 4.0 / delta).powf(e),
        packing_bound: (1.0 + 8.0 / delta).powf(e),
        points,
        assignment,
        clamped,
    };
    assert!(
        (net.len() as f64) <= net.packing_bound,
        "greedy net exceeds the packing bound"
    );
    net
}

/// Block approximation of a triangle-model iterate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockCompression {
    pub block: BlockModel,
    pub target_dim: usize,
    pub net_size: usize,
    pub clamped: usize,
    pub covering_bound: f64,
    pub packing_bound: f64,
}

/// Reads `(alpha, beta)` from a model counting only edges and triangles.
pub fn triangle_parameters(model: &Hamiltonian) -> Result<(f64, f64)> {
    let mut alpha = model.alpha();
    let mut beta = 0.0;
    for (i, t) in model.terms().iter().enumerate() {
        match t.kind() {
            PatternKind::Edge => alpha += t.weight(),
            PatternKind::Triangle => beta += t.weight(),
            other => {
                return Err(Error::NotTriangleModel(format!(
                    "term {i} has shape {other:?}"
                )))
            }
        }
    }
    Ok((alpha, beta))
}

/// Projects the scaled columns of `x`, rounds them to a delta-net and
/// returns the block model `P[a][b] = (1 + tanh(alpha + 3 beta N/(N-2) <w_a, w_b>)) / 2`.
pub fn block_approximation_triangle(
    model: &Hamiltonian,
    x: &SymmetricMatrix,
    cfg: &ProjectionConfig,
) -> Result<BlockCompression> {
    let (alpha, beta) = triangle_parameters(model)?;
    let n = x.n_vertices();
    if n != model.n_vertices() {
        return Err(Error::DimensionMismatch {
            left: n,
            right: model.n_vertices(),
        });
    }
    if n < 3 {
        return Err(Error::InvalidModel(
            "triangle compression needs N >= 3".into(),
        ));
    }
    if !x.is_in_unit_cube() {
        return Err(Error::InvalidMatrix("entries must lie in [0, 1]".into()));
    }
    let projected = project_columns(x, cfg);
    let net = delta_net_round(&projected, cfg.delta);
    let scale = 3.0 * beta * n as f64 / (n - 2) as f64;
    let k = net.len();
    let p: Vec<Vec<f64>> = net
        .points
        .iter()
        .map(|wa| {
            net.points
                .iter()
                .map(|wb| 0.5 * (1.0 + (alpha + scale * dot(wa, wb)).tanh()))
                .collect()
        })
        .collect();
    let block = BlockModel::new(net.assignment.clone(), p)?;
    Ok(BlockCompression {
        block,
        target_dim: cfg.target_dim.min(n),
        net_size: k,
        clamped: net.clamped,
        covering_bound: net.covering_bound,
        packing_bound: net.packing_bound,
    })
}

/// Default cap on the number of injective maps enumerated per oriented edge.
pub const DECOMPOSITION_BUDGET: u128 = 1 << 22;

/// `(1/2) sum_{e in D(H)} <v_i^e, u_j^e>`, the edge-coordinate derivative of
/// the weighted count of `h`, assembled from explicit scalar products.
///
/// The vectors are indexed by injective maps of the pattern minus the oriented
/// edge `(x, y)`. `v_i` vanishes on maps hitting `i` and `u_j` on maps hitting
/// `j`, which keeps only injective extensions.
pub fn decompose_gradient_entry(
    h: &SimpleGraph,
    x: &SymmetricMatrix,
    i: usize,
    j: usize,
    budget: u128,
) -> Result<f64> {
    let n = x.n_vertices();
    let m = h.n_vertices();
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidGraph(format!(
            "({i}, {j}) is not an edge coordinate of K_{n}"
        )));
    }
    if m > n {
        return Ok(0.0);
    }
    let free = m - 2;
    let size: u128 = (0..free).map(|t| (n - t) as u128).product();
    if size > budget {
        return Err(Error::SizeLimit { size, budget });
    }
    let mut total = 0.0;
    for &(p, q) in h.edges() {
        for (ex, ey) in [(p, q), (q, p)] {
            total += oriented_product(h, x, ex, ey, i, j);
        }
    }
    Ok(0.5 * total)
}

/// `<v_i^e, u_j^e>` for `e = (ex, ey)`.
fn oriented_product(
    h: &SimpleGraph,
    x: &SymmetricMatrix,
    ex: usize,
    ey: usize,
    i: usize,
    j: usize,
) -> f64 {
    let n = x.n_vertices();
    let rest: Vec<usize> = (0..h.n_vertices())
        .filter(|&a| a != ex && a != ey)
        .collect();
    let mut image = vec![0usize; rest.len()];
    let mut used = vec![false; n];
    let mut acc = 0.0;

    let entry = |image: &[usize], anchor: usize, pivot: usize| -> f64 {
        if image.contains(&pivot) {
            return 0.0;
        }
        let mut w = 1.0;
        for (t, &a) in rest.iter().enumerate() {
            if h.has_edge(anchor, a) {
                w *= x.get(pivot, image[t]);
            }
        }
        for s in 0..rest.len() {
            for t in 0..s {
                if h.has_edge(rest[s], rest[t]) {
                    w *= x.get(image[s], image[t]).sqrt();
                }
            }
        }
        w
    };

    fn walk(
        p: usize,
        image: &mut Vec<usize>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if p == image.len() {
            visit(image);
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                image[p] = v;
                walk(p + 1, image, used, visit);
                used[v] = false;
            }
        }
    }

    walk(0, &mut image, &mut used, &mut |img| {
        let v = entry(img, ex, i);
        if v != 0.0 {
            acc += v * entry(img, ey, j);
        }
    });
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{discrete_partial, inj_partial};

    #[test]
    fn default_dimension() {
        assert_eq!(ProjectionConfig::default_dim(0.3), 67);
    }

    #[test]
    fn full_dimension_is_isometry() {
        let n = 12;
        let x = SymmetricMatrix::from_fn(n, |i, j| ((i * 7 + j * 5) % 10) as f64 / 9.0);
        let cfg = ProjectionConfig {
            target_dim: n,
            delta: 0.2,
            seed: 3,
        };
        let g = project_columns(&x, &cfg);
        for (v, gv) in column_vectors(&x).iter().zip(&g) {
            assert!((norm_sq(v) - norm_sq(gv)).abs() < 1e-12);
        }
        // larger requests are clamped to the source dimension
        let big = ProjectionConfig {
            target_dim: 40,
            ..cfg
        };
        assert_eq!(project_columns(&x, &big)[0].len(), n);
    }

    #[test]
    fn constant_matrix_columns_stay_close() {
        let (n, xv) = (50, 0.4);
        let x = SymmetricMatrix::constant(n, xv);
        let cfg = ProjectionConfig {
            target_dim: 10,
            delta: 0.3,
            seed: 11,
        };
        let g = project_columns(&x, &cfg);
        let bound = 2.0 * xv * (n as f64 / 10.0).sqrt() / (n as f64).sqrt();
        for a in 0..n {
            for b in 0..a {
                assert!(distance(&g[a], &g[b]) <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn scalar_product_identity_map() {
        let u = vec![0.3, -0.2, 0.5];
        let v = vec![0.1, 0.6, -0.3];
        let c = scalar_product_error(&u, &v, &u, &v, 0.1);
        assert!(c.norm_conditions && c.within_bound);
        assert!(c.error < 1e-15);
    }

    #[test]
    fn net_examples() {
        let same = vec![vec![0.5, -0.1]; 7];
        let net = delta_net_round(&same, 0.1);
        assert_eq!(net.len(), 1);
        assert!(net.assignment.iter().all(|&a| a == 0));

        let line: Vec<Vec<f64>> = (0..=40).map(|t| vec![-2.0 + t as f64 * 0.1]).collect();
        assert_eq!(delta_net_round(&line, 4.0).len(), 1);
    }

    #[test]
    fn net_clamps_outside_points() {
        let net = delta_net_round(&[vec![3.0, 0.0], vec![0.0, 0.0]], 0.5);
        assert_eq!(net.clamped, 1);
        assert_eq!(net.points[0], vec![2.0, 0.0]);
    }

    #[test]
    fn block_model_expansion() {
        let b = BlockModel::new(vec![0, 1, 1, 0], vec![vec![0.2, 0.7], vec![0.7, 0.9]]).unwrap();
        let x = b.expand();
        assert_eq!(x.get(0, 3), 0.2);
        assert_eq!(x.get(1, 2), 0.9);
        assert_eq!(x.get(0, 1), 0.7);
        assert_eq!(x.get(2, 2), 0.0);
        assert!(BlockModel::new(vec![0, 0, 2], vec![vec![0.1; 3]; 3]).is_err());
        assert!(BlockModel::new(vec![0, 1], vec![vec![0.1, 0.2], vec![0.3, 0.1]]).is_err());
    }

    #[test]
    fn block_model_json_round_trip() {
        let b = BlockModel::new(vec![1, 0, 1], vec![vec![0.5, 0.25], vec![0.25, 0.75]]).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert!(s.contains("\"P\""));
        let back: BlockModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
        assert!(serde_json::from_str::<BlockModel>(r#"{"assignment":[0,1],"P":[[0.5]]}"#).is_err());
    }

    #[test]
    fn zero_beta_gives_one_community() {
        let m = Hamiltonian::edge_triangle(20, -0.4, 0.0).unwrap();
        let x = SymmetricMatrix::from_fn(20, |i, j| ((i * j) % 2) as f64);
        let cfg = ProjectionConfig::with_default_dim(0.3, 5);
        let c = block_approximation_triangle(&m, &x, &cfg).unwrap();
        let want = 0.5 * (1.0 + (-0.4f64).tanh());
        assert!(c
            .block
            .expand()
            .off_diagonal()
            .all(|v| (v - want).abs() < 1e-15));
    }

    #[test]
    fn non_triangle_model_rejected() {
        let t = crate::model::SubgraphTerm::new(SimpleGraph::path(3), 1.0).unwrap();
        let m = Hamiltonian::new(6, 0.0, vec![t]).unwrap();
        let x = SymmetricMatrix::zeros(6);
        let cfg = ProjectionConfig::with_default_dim(0.3, 1);
        assert!(matches!(
            block_approximation_triangle(&m, &x, &cfg),
            Err(Error::NotTriangleModel(_))
        ));
    }

    #[test]
    fn decomposition_of_edge_is_one() {
        let x = SymmetricMatrix::constant(4, 0.3);
        let v = decompose_gradient_entry(&SimpleGraph::complete(2), &x, 0, 2, DECOMPOSITION_BUDGET)
            .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn decomposition_triangle_on_k4() {
        let g = SimpleGraph::complete(4);
        let m = Hamiltonian::new(
            4,
            0.0,
            vec![crate::model::SubgraphTerm::new(SimpleGraph::complete(3), 1.0).unwrap()],
        )
        .unwrap();
        for (i, j) in [(0, 1), (2, 3), (1, 3)] {
            let d = decompose_gradient_entry(
                &SimpleGraph::complete(3),
                &g.to_matrix(),
                i,
                j,
                DECOMPOSITION_BUDGET,
            )
            .unwrap();
            // the term is scaled by 1/(N-2) in the Hamiltonian
            assert!((d / 2.0 - discrete_partial(&m, &g, i, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_matches_polynomial_on_weights() {
        let x = SymmetricMatrix::from_fn(6, |i, j| ((i * 5 + j * 3 + 1) % 7) as f64 / 6.0);
        for h in [
            SimpleGraph::path(3),
            SimpleGraph::cycle(4),
            SimpleGraph::path(4),
        ] {
            for (i, j) in [(0, 1), (4, 2)] {
                let d = decompose_gradient_entry(&h, &x, i, j, DECOMPOSITION_BUDGET).unwrap();
                assert!((d - inj_partial(&h, &x, i, j)).abs() < 1e-10, "{h:?}");
            }
        }
    }

    #[test]
    fn decomposition_zero_row() {
        let x = SymmetricMatrix::from_fn(5, |i, j| if i == 2 || j == 2 { 0.0 } else { 0.6 });
        let v = decompose_gradient_entry(&SimpleGraph::complete(3), &x, 2, 4, DECOMPOSITION_BUDGET)
            .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn decomposition_budget() {
        let x = SymmetricMatrix::constant(30, 0.5);
        let r = decompose_gradient_entry(&SimpleGraph::cycle(5), &x, 0, 1, 1000);
        assert!(matches!(
            r,
            Err(Error::SizeLimit {
                size: 24360,
                budget: 1000
            })
        ));
    }
}
