//! Randomized block coordinate descent for `min_x f(x) + Ψ(x)` where `f` is a
//! least-squares or logistic loss over a sparse matrix and `Ψ` is a weighted
//! ℓ1 norm or zero.
//!
//! Two solver families are provided. [`driver::rcd_run`] minimizes an inexact
//! quadratic model on each sampled block and line-searches along the result;
//! [`driver::ucdc_run`] takes exact unit steps with a scalar Lipschitz curvature.
//!
//! ```
//! use rcd_core::{generate_l1ls, GeneratorParams, SolverConfig, SolverKind};
//!
//! let inst = generate_l1ls(&GeneratorParams::new(200, 50, 0.1, 1.0, 1)).unwrap();
//! let problem = inst.problem().unwrap();
//! let mut cfg = SolverConfig { max_iterations: 2000, ..Default::default() };
//! SolverKind::RcdV1.configure(&mut cfg, 2, rcd_core::driver::DEFAULT_RHO);
//! let run = SolverKind::RcdV1.run(&problem, &cfg).unwrap();
//! assert!(run.objective < run.trace[0].objective);
//! ```

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod probgen;
pub mod problem;
pub mod regularizer;
pub mod sampler;
pub mod smooth;
pub mod subsolver;

pub use driver::{
    full_residual, rcd_run, ucdc_run, Events, RunResult, SolverConfig, SolverKind, Termination,
    TraceRecord,
};
pub use error::{Error, Result};
pub use io::Instance;
pub use linalg::{BlockSelection, CscMatrix};
pub use model::{BlockModel, Curvature, HessianStrategy};
pub use probgen::{
    generate_l1ls, generate_logistic, read_libsvm, GeneratedInstance, GeneratorParams, LabeledData,
    LogisticParams,
};
pub use problem::Problem;
pub use regularizer::Regularizer;
pub use sampler::{BlockSampler, SamplingScheme};
pub use smooth::{LossKind, SmoothOracle};
pub use subsolver::{EtaRule, InexactMode, InexactnessPolicy, InnerMetric};
