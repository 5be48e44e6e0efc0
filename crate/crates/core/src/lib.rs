//! Fixed-point toolkit for exponential random graph models with subgraph terms.
//!
//! A model is a [`Hamiltonian`] `f(G) = alpha inj(K2, G) + N(N-1) sum beta_i t(H_i, G)`.
//! Its multilinear extension drives the map `Phi(X) = (1 + tanh(grad f(X))) / 2`
//! whose near-fixed points describe the typical structure of the model.
//!
//! * [`counting`]: injective homomorphism counts, `f` and its gradient
//! * [`fixedpoint`]: `Phi`, residuals, constant solutions and regime certificates
//! * [`blockmodel`]: projection and delta-net compression into block models
//! * [`twoblock`]: symmetry-broken two-community solutions of the triangle model
//! * [`oracle`]: exact enumeration and Glauber sampling
//! * [`io`]: JSON and CSV formats

pub mod blockmodel;
pub mod counting;
pub mod error;
pub mod fixedpoint;
pub mod io;
pub mod model;
pub mod oracle;
pub mod roots;
pub mod twoblock;

pub use blockmodel::{BlockModel, ProjectionConfig};
pub use error::{Error, Result};
pub use fixedpoint::{FixedPointReport, Regime};
pub use model::{Hamiltonian, PatternKind, SimpleGraph, SubgraphTerm, SymmetricMatrix};
pub use oracle::EnumerationReport;
pub use twoblock::TwoBlockSolution;
