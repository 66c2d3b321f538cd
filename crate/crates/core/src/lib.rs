//! Spectral distributions of selfadjoint polynomials and rational expressions
//! in free random variables.
//!
//! An expression is turned into a selfadjoint linear pencil, the pencil's
//! operator-valued Cauchy transform is computed by subordination and
//! semicircular fixed points, and the density follows by Stieltjes
//! inversion. A combinatorial moment oracle and a random-matrix harness
//! provide independent checks.

pub mod matalg;
pub mod ncexpr;
pub mod linearize;
pub mod oracle;
pub mod cauchy;
pub mod convolve;
pub mod density;
pub mod rmt;
pub mod pipeline;

pub use cauchy::{CauchyEvaluator, FreeVariableSpec, SolverError, WarmState};
pub use convolve::{convolve_pencil, pencil_evaluator, subordinate, PencilEvaluator, SubordinationState};
pub use density::{invert_stieltjes, scalar_cauchy, InversionOptions, SpectralDensity};
pub use linearize::{selfadjoint_pencil, LinearPencil, LinearRepresentation};
pub use matalg::{ComplexMatrix, MatError, C64};
pub use ncexpr::{parse, NCPolynomial, RationalExpr};
pub use oracle::CovarianceMap;
pub use pipeline::{JobConfig, JobReport, Mode, PipelineError};
pub use rmt::{EnsembleSpec, Histogram};
