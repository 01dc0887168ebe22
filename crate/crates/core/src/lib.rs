//! Nonparametric goodness-of-fit testing for parametric trend surfaces of
//! spatial data with correlated errors.

// `!(x > 0.0)` is how the validators reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense linear algebra reads better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod goftest;
pub mod io;
pub mod kernels;
pub mod numerics;
pub mod rng;
pub mod simulation;
pub mod smoothing;
pub mod trend;
pub mod variography;

pub use error::{Error, Result};
pub use kernels::{BandwidthMatrix, KernelFamily, KernelSpec};
pub use smoothing::{SpatialDataset, SurfaceEstimate};
pub use trend::{IterConfig, IterativeFit, TrendCoefficients, TrendModel};
pub use variography::{VariogramFamily, VariogramFit, VariogramModel};
pub use goftest::{
    bootstrap_test, bootstrap_test_multi, compute_tn, significance_trace, QuadratureGrid, StatisticOperator,
    TestConfig, TestReport, WeightFunction,
};
