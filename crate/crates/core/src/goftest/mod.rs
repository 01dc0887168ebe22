//! The test statistic `T_n`, its bootstrap calibration, the asymptotic normal
//! approximation and significance traces.

mod asymptotic;
mod bootstrap;
mod quadrature;
mod statistic;
mod trace;

pub use asymptotic::{asymptotic_constants, standardized_statistic, AsymptoticConstants, AsymptoticInputs, DesignDensity, ScalarField};
pub use bootstrap::{
    bootstrap_p_value, bootstrap_test, bootstrap_test_multi, AsymptoticSummary, NullFit, TestConfig, TestReport,
    MIN_REPLICATES,
};
pub use quadrature::{QuadratureGrid, WeightFunction, DEFAULT_QUAD_POINTS};
pub use statistic::{compute_tn, StatisticOperator};
pub use trace::{significance_trace, write_trace_csv, TraceEntry};
