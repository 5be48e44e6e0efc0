//! Two-community fixed points of the negative-weight triangle model.
//!
//! Works with a positive parameter `beta` for the equation
//! `X = (1 - tanh(beta/(N-2) * offdiag(X^2))) / 2`, which is the original
//! triangle model with weight `-beta/3`. Writing `x` for the within-block
//! value and `y` for the cross-block value, the matrix equation reduces to
//!
//! * `g`: `tanh(beta/(N-2) * ((N-4)/2 x^2 + N/2 y^2)) = 1 - 2x`
//! * `h`: `tanh(beta x y) = 1 - 2y`
//!
//! and two-block solutions are intersections of the two curves.
//! Both relations are evaluated as `x = 1 / (1 + exp(2 z))`, which stays
//! accurate where `tanh` saturates.

use rayon::prelude::*;
use serde::Serialize;

use crate::blockmodel::BlockModel;
use crate::error::{Error, Result};
use crate::fixedpoint::residual;
use crate::model::Hamiltonian;
use crate::roots::bisect;

/// Intersections with `|x - y|` at most this are the constant solution.
pub const TRIVIAL_TOL: f64 = 1e-6;
pub const DEFAULT_GRID: usize = 10_000;

/// `(1 - tanh z) / 2`.
fn half_one_minus_tanh(z: f64) -> f64 {
    1.0 / (1.0 + (2.0 * z).exp())
}

fn check_params(beta: f64, n: usize) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if n % 2 == 1 {
        return Err(Error::OddN(n));
    }
    if n <= 4 {
        return Err(Error::InvalidModel(format!(
            "two-block system needs N > 4, got {n}"
        )));
    }
    Ok(())
}

/// The unique `y` with `tanh(beta x y) = 1 - 2y`.
pub fn h_curve(beta: f64, x: f64) -> f64 {
    bisect(|y| y - half_one_minus_tanh(beta * x * y), 0.0, 0.5, 0.0)
}

/// The two curves for one `(beta, N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Curves {
    pub beta: f64,
    pub n_vertices: usize,
    /// Left end of the domain of `g`, where `g = 1`.
    pub x1: f64,
    /// Right end of the domain of `g`, where `g = 0`.
    pub x2: f64,
}

impl Curves {
    pub fn new(beta: f64, n: usize) -> Result<Self> {
        check_params(beta, n)?;
        let mut c = Self {
            beta,
            n_vertices: n,
            x1: 0.0,
            x2: 0.5,
        };
        c.x1 = bisect(|x| x - c.g_rhs(x, 1.0), 0.0, 0.5, 0.0);
        c.x2 = bisect(|x| x - c.g_rhs(x, 0.0), 0.0, 0.5, 0.0);
        Ok(c)
    }

    /// `(1 - tanh(beta/(N-2) ((N-4)/2 x^2 + N/2 y^2))) / 2`.
    fn g_rhs(&self, x: f64, y: f64) -> f64 {
        let n = self.n_vertices as f64;
        let z = self.beta / (n - 2.0) * ((n - 4.0) / 2.0 * x * x + n / 2.0 * y * y);
        half_one_minus_tanh(z)
    }

    /// `g(x)`, absent outside `[x1, x2]`.
    pub fn g(&self, x: f64) -> Option<f64> {
        if x < self.x1 || x > self.x2 {
            return None;
        }
        if x == self.x1 {
            return Some(1.0);
        }
        if x == self.x2 {
            return Some(0.0);
        }
        Some(bisect(|y| x - self.g_rhs(x, y), 0.0, 1.0, 0.0))
    }

    pub fn h(&self, x: f64) -> f64 {
        h_curve(self.beta, x)
    }

    /// `g - h` on the domain of `g`.
    fn gap(&self, x: f64) -> f64 {
        self.g(x).expect("inside the domain") - self.h(x)
    }

    /// Sign changes of `g - h` on a uniform grid over `[x1, x2]`, refined by bisection.
    pub fn intersections(&self, grid_points: usize) -> Vec<Intersection> {
        let points = grid_points.max(2);
        let step = (self.x2 - self.x1) / (points - 1) as f64;
        let at = |k: usize| {
            if k + 1 == points {
                self.x2
            } else {
                self.x1 + step * k as f64
            }
        };
        let mut found: Vec<f64> = Vec::new();
        let mut a = at(0);
        let mut fa = self.gap(a);
        if fa == 0.0 {
            found.push(a);
        }
        for k in 1..points {
            let b = at(k);
            let fb = self.gap(b);
            if fb == 0.0 {
                found.push(b);
            } else if fa != 0.0 && (fa < 0.0) != (fb < 0.0) {
                found.push(bisect(|x| self.gap(x), a, b, 0.0));
            }
            a = b;
            fa = fb;
        }
        found
            .into_iter()
            .map(|x| {
                let y = self.h(x);
                Intersection {
                    x,
                    y,
                    trivial: (x - y).abs() <= TRIVIAL_TOL,
                }
            })
            .collect()
    }
}

/// `g(x)` for the given parameters, absent outside its domain.
pub fn g_curve(beta: f64, n: usize, x: f64) -> Result<Option<f64>> {
    Ok(Curves::new(beta, n)?.g(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Intersection {
    pub x: f64,
    pub y: f64,
    pub trivial: bool,
}

pub fn find_intersections(beta: f64, n: usize, grid_points: usize) -> Result<Vec<Intersection>> {
    Ok(Curves::new(beta, n)?.intersections(grid_points))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoBlockSolution {
    pub beta_transformed: f64,
    pub n_vertices: usize,
    /// Within-block value `alpha1 + alpha2`.
    pub x: f64,
    /// Cross-block value `alpha1 - alpha2`.
    pub y: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub trivial: bool,
}

impl TwoBlockSolution {
    pub fn new(beta_transformed: f64, n_vertices: usize, x: f64, y: f64) -> Self {
        Self {
            beta_transformed,
            n_vertices,
            x,
            y,
            alpha1: (x + y) / 2.0,
            alpha2: (x - y) / 2.0,
            trivial: (x - y).abs() <= TRIVIAL_TOL,
        }
    }

    pub fn from_intersection(beta: f64, n: usize, p: &Intersection) -> Self {
        Self::new(beta, n, p.x, p.y)
    }
}

/// Communities `{0..N/2}` and `{N/2..N}` with `P = [[x, y], [y, x]]`.
pub fn build_two_block(sol: &TwoBlockSolution) -> Result<BlockModel> {
    let n = sol.n_vertices;
    if n % 2 == 1 {
        return Err(Error::OddN(n));
    }
    let assignment = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    BlockModel::new(assignment, vec![vec![sol.x, sol.y], vec![sol.y, sol.x]])
}

/// Triangle model with weight `-beta/3` in the original convention.
pub fn original_model(beta_transformed: f64, n: usize) -> Result<Hamiltonian> {
    Hamiltonian::edge_triangle(n, 0.0, -beta_transformed / 3.0)
}

/// Fixed-point residual of the expanded two-block matrix.
pub fn verify_two_block(sol: &TwoBlockSolution) -> Result<f64> {
    let model = original_model(sol.beta_transformed, sol.n_vertices)?;
    let x = build_two_block(sol)?.expand();
    Ok(residual(&model, &x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub x: f64,
    pub y: f64,
    pub trivial: bool,
    pub residual: f64,
}

/// `beta_min, beta_min + step, ...` up to `beta_max` inclusive (with rounding slack).
pub fn beta_grid(beta_min: f64, beta_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(beta_min > 0.0 && beta_max >= beta_min && step > 0.0) {
        return Err(Error::InvalidModel(format!(
            "invalid beta range {beta_min}..{beta_max} step {step}"
        )));
    }
    let count = ((beta_max - beta_min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| beta_min + step * k as f64).collect())
}

/// One row per intersection for every `beta` in the range.
pub fn sweep(
    beta_min: f64,
    beta_max: f64,
    step: f64,
    n: usize,
    grid_points: usize,
) -> Result<Vec<SweepRow>> {
    let betas = beta_grid(beta_min, beta_max, step)?;
    check_params(betas[0], n)?;
    let rows: Result<Vec<Vec<SweepRow>>> = betas
        .par_iter()
        .map(|&beta| {
            find_intersections(beta, n, grid_points)?
                .iter()
                .map(|p| {
                    let sol = TwoBlockSolution::from_intersection(beta, n, p);
                    Ok(SweepRow {
                        beta,
                        x: p.x,
                        y: p.y,
                        trivial: p.trivial,
                        residual: verify_two_block(&sol)?,
                    })
                })
                .collect()
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub g: Option<f64>,
    pub h: f64,
}

/// `points` samples of both curves on `[0, 1/2]`.
pub fn sample_curves(beta: f64, n: usize, points: usize) -> Result<Vec<CurvePoint>> {
    let c = Curves::new(beta, n)?;
    let points = points.max(2);
    Ok((0..points)
        .map(|k| {
            let x = 0.5 * k as f64 / (points - 1) as f64;
            CurvePoint {
                x,
                g: c.g(x),
                h: c.h(x),
            }
        })
        .collect())
}
