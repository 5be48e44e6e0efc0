//! The map `Phi(X) = (1 + tanh(grad f(X))) / 2`, its scalar restriction
//! `phi` to constant matrices, and the certificates built from them.

use serde::Serialize;

use crate::counting::gradient;
use crate::error::{Error, Result};
use crate::model::{Hamiltonian, SymmetricMatrix};
use crate::roots::scan_roots;

/// Samples used to isolate roots of `x = phi(x)` and to estimate `D`.
pub const DEFAULT_GRID: usize = 10_000;
/// Bisection width used when refining a bracketed root.
pub const ROOT_TOL: f64 = 1e-12;
/// Largest accepted `|x - phi(x)|` for a returned root.
pub const ROOT_CHECK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    BanachContraction,
    HighTemperature,
    Unknown,
}

/// `(weight, |E|)` for every term that contributes at this `N`, the
/// linear coefficient excluded.
fn scalar_terms(model: &Hamiltonian) -> Vec<(f64, i32)> {
    let n = model.n_vertices();
    model
        .terms()
        .iter()
        .filter(|t| t.vertex_count() <= n)
        .map(|t| (t.weight(), t.edge_count() as i32))
        .collect()
}

/// Scalar curve `phi(x) = (1 + tanh(u(x))) / 2` with
/// `u(x) = alpha + sum beta_i |E_i| x^(|E_i| - 1)`.
#[derive(Clone, Debug)]
pub struct ScalarCurve {
    alpha: f64,
    terms: Vec<(f64, i32)>,
}

impl ScalarCurve {
    pub fn new(model: &Hamiltonian) -> Self {
        Self {
            alpha: model.alpha(),
            terms: scalar_terms(model),
        }
    }

    pub fn u(&self, x: f64) -> f64 {
        self.alpha
            + self
                .terms
                .iter()
                .map(|&(b, e)| b * e as f64 * x.powi(e - 1))
                .sum::<f64>()
    }

    pub fn du(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .filter(|&&(_, e)| e >= 2)
            .map(|&(b, e)| b * (e * (e - 1)) as f64 * x.powi(e - 2))
            .sum()
    }

    pub fn phi(&self, x: f64) -> f64 {
        0.5 * (1.0 + self.u(x).tanh())
    }

    pub fn dphi(&self, x: f64) -> f64 {
        let t = self.u(x).tanh();
        0.5 * (1.0 - t * t) * self.du(x)
    }

    /// Upper bound for `|phi''|` on `[0, 1]`.
    pub fn second_derivative_bound(&self) -> f64 {
        let d1: f64 = self
            .terms
            .iter()
            .map(|&(b, e)| b.abs() * (e * (e - 1)) as f64)
            .sum();
        let d2: f64 = self
            .terms
            .iter()
            .map(|&(b, e)| b.abs() * (e * (e - 1) * (e - 2)) as f64)
            .sum();
        // phi'' = sech^2(u) (u'' - 2 tanh(u) u'^2) / 2
        0.5 * (d2 + 2.0 * d1 * d1)
    }

    fn nondecreasing(&self) -> bool {
        self.terms.iter().all(|&(b, e)| b >= 0.0 || e < 2)
    }
}

/// Applies `Phi` to `x`. Constant inputs use the scalar curve directly.
pub fn phi_map(model: &Hamiltonian, x: &SymmetricMatrix) -> SymmetricMatrix {
    if let Some(c) = x.constant_value() {
        return SymmetricMatrix::constant(x.n_vertices(), phi_scalar(model, c));
    }
    gradient(model, x).map(|g| 0.5 * (1.0 + g.tanh()))
}

/// `||X - Phi(X)||_1`.
pub fn residual(model: &Hamiltonian, x: &SymmetricMatrix) -> f64 {
    x.one_norm_distance(&phi_map(model, x))
        .expect("Phi preserves the dimension")
}

/// `5000 C^2 n^(15/16)` with `n = N(N-1)/2`.
pub fn membership_threshold(model: &Hamiltonian) -> f64 {
    let n = model.n_edges() as f64;
    5000.0 * model.c_beta().powi(2) * n.powf(15.0 / 16.0)
}

pub fn in_xf(model: &Hamiltonian, x: &SymmetricMatrix) -> bool {
    residual(model, x) <= membership_threshold(model)
}

pub fn phi_scalar(model: &Hamiltonian, x: f64) -> f64 {
    ScalarCurve::new(model).phi(x)
}

pub fn phi_derivative(model: &Hamiltonian, x: f64) -> f64 {
    ScalarCurve::new(model).dphi(x)
}

/// All roots of `x = phi(x)` in `[0, 1]`.
pub fn solve_constant(model: &Hamiltonian) -> Result<Vec<f64>> {
    solve_constant_with(model, DEFAULT_GRID)
}

pub fn solve_constant_with(model: &Hamiltonian, grid_points: usize) -> Result<Vec<f64>> {
    let curve = ScalarCurve::new(model);
    let roots = scan_roots(|x| x - curve.phi(x), 0.0, 1.0, grid_points, ROOT_TOL);
    for &r in &roots {
        let res = (r - curve.phi(r)).abs();
        if res > ROOT_CHECK {
            return Err(Error::ResidualRootCheck {
                root: r,
                residual: res,
            });
        }
    }
    Ok(roots)
}

/// Estimate of `D = sup_{x != x0} |phi(x) - x0| / |x - x0|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DEstimate {
    pub x0: f64,
    /// Maximum of the secant ratios on the grid and `|phi'(x0)|`.
    pub estimate: f64,
    pub derivative_at_root: f64,
    /// Rigorous bound `max |phi'|` on `[0, 1]`: grid maximum plus a
    /// second-derivative mesh correction.
    pub upper_certificate: f64,
    pub grid_points: usize,
}

/// Estimates `D` at the root `x0` from `grid_points` uniform samples.
///
/// Fails with [`Error::MultipleRoots`] unless `x = phi(x)` has exactly one root.
pub fn estimate_d(model: &Hamiltonian, x0: f64, grid_points: usize) -> Result<DEstimate> {
    let roots = solve_constant(model)?;
    if roots.len() != 1 {
        return Err(Error::MultipleRoots(roots.len()));
    }
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::InvalidModel(format!("x0 = {x0} outside [0, 1]")));
    }
    let grid_points = grid_points.max(2);
    let curve = ScalarCurve::new(model);
    let h = 1.0 / (grid_points - 1) as f64;
    let derivative_at_root = curve.dphi(x0).abs();
    let mut estimate = derivative_at_root;
    let mut max_slope: f64 = 0.0;
    for k in 0..grid_points {
        let x = (k as f64 * h).min(1.0);
        max_slope = max_slope.max(curve.dphi(x).abs());
        let dx = x - x0;
        if dx.abs() > 1e-9 {
            estimate = estimate.max(((curve.phi(x) - x0) / dx).abs());
        }
    }
    let upper_certificate = max_slope + 0.5 * h * curve.second_derivative_bound();
    Ok(DEstimate {
        x0,
        estimate,
        derivative_at_root,
        upper_certificate: upper_certificate.max(estimate),
        grid_points,
    })
}

/// Regime established by the available checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeCertificate {
    pub regime: Regime,
    pub s_beta: f64,
    pub roots: Vec<f64>,
    pub d: Option<DEstimate>,
}

pub fn uniqueness_certificate(model: &Hamiltonian) -> RegimeCertificate {
    let s_beta = model.s_beta();
    let roots = solve_constant(model).unwrap_or_default();
    let d = match roots.as_slice() {
        [x0] => estimate_d(model, *x0, DEFAULT_GRID).ok(),
        _ => None,
    };
    let regime = if s_beta < 1.0 {
        Regime::BanachContraction
    } else if model.all_weights_nonnegative()
        && ScalarCurve::new(model).nondecreasing()
        && d.is_some_and(|d| d.upper_certificate < 1.0)
    {
        Regime::HighTemperature
    } else {
        Regime::Unknown
    };
    RegimeCertificate {
        regime,
        s_beta,
        roots,
        d,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub x0_roots: Vec<f64>,
    /// Grid estimate of `D` when the root is unique.
    pub d_beta: Option<f64>,
    pub d_beta_upper: Option<f64>,
    pub s_beta: f64,
    pub regime: Regime,
    #[serde(skip)]
    pub final_matrix: Option<SymmetricMatrix>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl FixedPointReport {
    /// Report without an iterate, from the scalar checks alone.
    pub fn scalar(model: &Hamiltonian) -> Self {
        let cert = uniqueness_certificate(model);
        Self {
            x0_roots: cert.roots,
            d_beta: cert.d.map(|d| d.estimate),
            d_beta_upper: cert.d.map(|d| d.upper_certificate),
            s_beta: cert.s_beta,
            regime: cert.regime,
            final_matrix: None,
            iterations: 0,
            residual: 0.0,
            converged: false,
        }
    }
}

/// Iterates `X <- Phi(X)` until successive iterates are within `tol` in one-norm.
pub fn banach_iterate(
    model: &Hamiltonian,
    x_init: &SymmetricMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointReport> {
    if x_init.n_vertices() != model.n_vertices() {
        return Err(Error::DimensionMismatch {
            left: x_init.n_vertices(),
            right: model.n_vertices(),
        });
    }
    if !x_init.is_in_unit_cube() {
        return Err(Error::InvalidMatrix("entries must lie in [0, 1]".into()));
    }
    let (x, iterations) =
        iterate_phi(model, x_init.clone(), tol, max_iter).map_err(|(x, it, step)| {
            Error::NotConverged {
                iterations: it,
                residual: step,
                last: Box::new(x),
            }
        })?;
    let mut report = FixedPointReport::scalar(model);
    report.residual = residual(model, &x);
    report.final_matrix = Some(x);
    report.iterations = iterations;
    report.converged = true;
    Ok(report)
}

/// Returns the converged iterate and step count, or the last iterate, step
/// count and final step size.
fn iterate_phi(
    model: &Hamiltonian,
    mut x: SymmetricMatrix,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(SymmetricMatrix, usize), (SymmetricMatrix, usize, f64)> {
    let mut step = f64::INFINITY;
    for it in 1..=max_iter {
        let next = phi_map(model, &x);
        step = next.one_norm_distance(&x).expect("same dimension");
        x = next;
        if step <= tol {
            return Ok((x, it));
        }
    }
    Err((x, max_iter, step))
}

/// Scalar iterates from both ends of `[0, 1]` after `k` steps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichBounds {
    pub k: usize,
    pub x0: f64,
    pub lambda: f64,
    pub d_upper: f64,
    pub lower: f64,
    pub upper: f64,
    pub certified: bool,
}

impl SandwichBounds {
    pub fn interval(&self) -> (f64, f64) {
        (self.x0 - self.lambda, self.x0 + self.lambda)
    }
}

/// `k = ceil(log lambda / log D)` and the endpoints `phi^k(0)`, `phi^k(1)`.
///
/// Requires a high-temperature certificate; `D` is the upper certificate.
pub fn sandwich_bounds(model: &Hamiltonian, lambda: f64) -> Result<SandwichBounds> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::RegimeViolation(format!(
            "lambda = {lambda} not in (0, 1)"
        )));
    }
    if !model.all_weights_nonnegative() {
        return Err(Error::RegimeViolation("negative weight".into()));
    }
    let roots = solve_constant(model)?;
    let x0 = match roots.as_slice() {
        [x0] => *x0,
        _ => return Err(Error::MultipleRoots(roots.len())),
    };
    let d = estimate_d(model, x0, DEFAULT_GRID)?;
    if d.upper_certificate >= 1.0 {
        return Err(Error::RegimeViolation(format!(
            "derivative certificate {} is not below 1",
            d.upper_certificate
        )));
    }
    let k = if d.upper_certificate == 0.0 {
        1
    } else {
        ((lambda.ln() / d.upper_certificate.ln()).ceil() as usize).max(1)
    };
    let curve = ScalarCurve::new(model);
    let (mut lower, mut upper) = (0.0, 1.0);
    for _ in 0..k {
        lower = curve.phi(lower);
        upper = curve.phi(upper);
    }
    let certified = (lower - x0).abs() <= lambda && (upper - x0).abs() <= lambda;
    Ok(SandwichBounds {
        k,
        x0,
        lambda,
        d_upper: d.upper_certificate,
        lower,
        upper,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_alpha(p: f64) -> f64 {
        0.5 * (p / (1.0 - p)).ln()
    }

    fn tri(n: usize, alpha: f64, beta: f64) -> Hamiltonian {
        Hamiltonian::edge_triangle(n, alpha, beta).unwrap()
    }

    #[test]
    fn zero_model_maps_to_half() {
        let m = Hamiltonian::edge_only(6, 0.0).unwrap();
        let x = SymmetricMatrix::from_fn(6, |i, j| ((i + 2 * j) % 3) as f64 / 2.0);
        assert!(phi_map(&m, &x).off_diagonal().all(|v| v == 0.5));
        let t = tri(6, 0.0, 1.3);
        assert!(phi_map(&t, &SymmetricMatrix::zeros(6))
            .off_diagonal()
            .all(|v| v == 0.5));
    }

    #[test]
    fn edge_only_model_maps_to_p() {
        for p in [0.1, 0.3, 0.9] {
            let m = Hamiltonian::edge_only(5, p_alpha(p)).unwrap();
            let x = SymmetricMatrix::from_fn(5, |i, j| ((i * 3 + j) % 4) as f64 / 3.0);
            let y = phi_map(&m, &x);
            assert!(y.off_diagonal().all(|v| (v - p).abs() < 1e-14));
            assert!(residual(&m, &SymmetricMatrix::constant(5, p)) < 1e-13);
        }
    }

    #[test]
    fn residual_of_zero_under_triangle_model() {
        let n = 8;
        let r = residual(&tri(n, 0.0, 0.9), &SymmetricMatrix::zeros(n));
        assert!((r - (n * (n - 1)) as f64 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn membership_threshold_example() {
        let m = Hamiltonian::edge_only(10, 0.1).unwrap();
        assert_eq!(m.c_beta(), 2.0);
        let want = 5000.0 * 4.0 * 45f64.powf(0.9375);
        assert!((membership_threshold(&m) - want).abs() < 1e-6 * want);
        let t = tri(10, 0.0, 0.5);
        assert!(in_xf(&t, &SymmetricMatrix::zeros(10)));
    }

    #[test]
    fn scalar_curve_examples() {
        let zero = Hamiltonian::edge_only(4, 0.0).unwrap();
        assert_eq!(phi_scalar(&zero, 0.37), 0.5);
        let t = tri(9, 0.0, 0.8);
        for x in [0.0f64, 0.2, 0.9] {
            let want = 0.5 * (1.0 + (3.0 * 0.8 * x * x).tanh());
            assert!((phi_scalar(&t, x) - want).abs() < 1e-15);
        }
        let e = Hamiltonian::edge_only(4, p_alpha(0.3)).unwrap();
        assert!((phi_scalar(&e, 0.8) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = tri(9, -0.3, 1.7);
        for x in [0.1, 0.45, 0.8] {
            let h = 1e-6;
            let fd = (phi_scalar(&t, x + h) - phi_scalar(&t, x - h)) / (2.0 * h);
            assert!((phi_derivative(&t, x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_roots() {
        let zero = Hamiltonian::edge_only(4, 0.0).unwrap();
        let r = solve_constant(&zero).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-12);
        let e = Hamiltonian::edge_only(4, p_alpha(0.3)).unwrap();
        let r = solve_constant(&e).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn triangle_only_has_unique_root() {
        for a in [-10.0f64, -1.0, 0.0, 1.0, 10.0] {
            let m = tri(12, 0.0, a / 3.0);
            let roots = solve_constant(&m).unwrap();
            assert_eq!(roots.len(), 1, "alpha {a}: {roots:?}");
            // independent fine-grid sign-change count
            let f = |x: f64| x - 0.5 * (1.0 + (a * x * x).tanh());
            let changes = (0..200_000)
                .filter(|&k| {
                    let (x, y) = (k as f64 / 200_000.0, (k + 1) as f64 / 200_000.0);
                    f(x).signum() != f(y).signum()
                })
                .count();
            assert_eq!(changes, 1);
        }
    }

    #[test]
    fn constant_fixed_point_has_zero_residual() {
        let m = tri(15, 0.2, 0.7);
        let x0 = solve_constant(&m).unwrap()[0];
        assert!(residual(&m, &SymmetricMatrix::constant(15, x0)) < 1e-10);
    }

    #[test]
    fn d_estimates() {
        let zero = Hamiltonian::edge_only(4, 0.0).unwrap();
        let d = estimate_d(&zero, 0.5, 1000).unwrap();
        assert_eq!(d.estimate, 0.0);
        assert_eq!(d.upper_certificate, 0.0);
        let e = Hamiltonian::edge_only(4, p_alpha(0.7)).unwrap();
        let d = estimate_d(&e, 0.7, 1000).unwrap();
        assert!(d.estimate < 1e-12);

        let t = tri(9, 0.1, 0.6);
        let x0 = solve_constant(&t).unwrap()[0];
        let d = estimate_d(&t, x0, 2000).unwrap();
        // dense independent search for the secant supremum and max |phi'|
        let (mut sec, mut slope) = (0.0f64, 0.0f64);
        for k in 0..=400_000 {
            let x = k as f64 / 400_000.0;
            slope = slope.max(phi_derivative(&t, x).abs());
            if (x - x0).abs() > 1e-7 {
                sec = sec.max(((phi_scalar(&t, x) - x0) / (x - x0)).abs());
            }
        }
        assert!(d.estimate <= sec + 1e-9);
        assert!(d.estimate >= sec - 1e-4);
        assert!(d.upper_certificate >= slope);
    }

    #[test]
    fn multiple_roots_rejected() {
        // strong positive triangle weight with a negative edge term is bistable
        let m = tri(10, -3.0, 2.0);
        let roots = solve_constant(&m).unwrap();
        assert_eq!(roots.len(), 3, "{roots:?}");
        assert!(matches!(
            estimate_d(&m, roots[0], 1000),
            Err(Error::MultipleRoots(3))
        ));
        assert!(matches!(
            sandwich_bounds(&m, 1e-3),
            Err(Error::MultipleRoots(3))
        ));
    }

    #[test]
    fn regimes() {
        assert_eq!(
            uniqueness_certificate(&tri(10, 0.0, 0.2)).regime,
            Regime::BanachContraction
        );
        assert_eq!(
            uniqueness_certificate(&tri(10, 0.0, -5.0)).regime,
            Regime::Unknown
        );
        let c = uniqueness_certificate(&tri(10, -0.5, 0.4));
        assert!(c.s_beta > 1.0);
        assert_ne!(c.regime, Regime::BanachContraction);
        if c.regime == Regime::HighTemperature {
            assert_eq!(c.roots.len(), 1);
            assert!(c.d.unwrap().upper_certificate < 1.0);
        }
    }

    #[test]
    fn banach_from_edge_only_is_one_step() {
        let m = Hamiltonian::edge_only(6, p_alpha(0.2)).unwrap();
        let x = SymmetricMatrix::from_fn(6, |i, j| ((i + j) % 2) as f64);
        let r = banach_iterate(&m, &x, 1e-12, 10).unwrap();
        // first step lands on p; the second confirms it
        assert!(r.iterations <= 2);
        let f = r.final_matrix.unwrap();
        assert!(f.off_diagonal().all(|v| (v - 0.2).abs() < 1e-14));
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn banach_not_converged_reports_last_iterate() {
        let m = tri(8, 0.0, 0.2);
        let x = SymmetricMatrix::from_fn(8, |i, j| ((i * j) % 3) as f64 / 2.0);
        match banach_iterate(&m, &x, 0.0, 2) {
            Err(Error::NotConverged {
                iterations, last, ..
            }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last.n_vertices(), 8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sandwich_edge_only_needs_one_step() {
        let m = Hamiltonian::edge_only(6, p_alpha(0.4)).unwrap();
        let s = sandwich_bounds(&m, 1e-6).unwrap();
        assert_eq!(s.k, 1);
        assert!(s.certified);
    }

    #[test]
    fn sandwich_iterates_are_monotone() {
        let m = tri(10, 0.0, 0.1);
        let x0 = solve_constant(&m).unwrap()[0];
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let (nlo, nhi) = (phi_scalar(&m, lo), phi_scalar(&m, hi));
            assert!(nlo >= lo && nhi <= hi && nlo <= x0 + 1e-11 && nhi >= x0 - 1e-11);
            lo = nlo;
            hi = nhi;
        }
        assert!((hi - lo).abs() < 1e-12);
        assert!(sandwich_bounds(&m, 1e-3).unwrap().certified);
    }

    #[test]
    fn sandwich_rejects_negative_weights() {
        assert!(matches!(
            sandwich_bounds(&tri(10, 0.0, -1.0), 1e-3),
            Err(Error::RegimeViolation(_))
        ));
    }
}
