use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{BandwidthMatrix, KernelSpec};
use crate::numerics::{cholesky, LowerTriangular};
use crate::rng::{replicate_seed, rng_from_seed};
use crate::smoothing::SpatialDataset;
use crate::trend::{
    design_matrix, fit_residual_variogram, iterative_fit, residuals_negligible, DesignMatrix, GlsSolver, IterConfig,
    IterativeFit, TrendModel,
};
use crate::variography::{covariance_matrix, VariogramFamily, VariogramModel};

use super::quadrature::{QuadratureGrid, WeightFunction};
use super::statistic::StatisticOperator;

/// Smallest admissible number of bootstrap replicates.
pub const MIN_REPLICATES: usize = 19;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Bootstrap replicates `B`.
    pub replicates: usize,
    /// Refit the variogram on every bootstrap sample instead of reusing the
    /// covariance estimated from the data.
    pub refit_variogram: bool,
    pub iter: IterConfig,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            replicates: 500,
            refit_variogram: false,
            iter: IterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSummary {
    pub b0: f64,
    pub b1: f64,
    pub v: f64,
    /// `(t_n - b0 - b1) / sqrt(v)`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub t_n: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub bandwidth: BandwidthMatrix,
    /// GLS trend coefficients under the null.
    pub beta: Vec<f64>,
    /// Variogram used to generate bootstrap errors.
    pub variogram: VariogramModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<AsymptoticSummary>,
    pub bootstrap_stats: Vec<f64>,
}

impl TestReport {
    /// Whether the null is rejected at level `alpha` (`p <= alpha`).
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// `(1 + #{T* >= t_n}) / (B + 1)`.
pub fn bootstrap_p_value(t_n: f64, stats: &[f64]) -> f64 {
    let exceed = stats.iter().filter(|&&t| t >= t_n).count();
    (1 + exceed) as f64 / (stats.len() + 1) as f64
}

/// Null fit and whitened residuals, shared by every bandwidth.
#[derive(Debug, Clone)]
pub struct NullFit {
    data: SpatialDataset,
    model: TrendModel,
    family: VariogramFamily,
    config: TestConfig,
    design: DesignMatrix,
    pub fit: IterativeFit,
    /// `m_β̂(X_i)`.
    pub fitted: Vec<f64>,
    /// `ε̂ = Z - m_β̂(X)`, zeroed when negligible.
    pub residuals: Vec<f64>,
    /// Variogram of `ε̂` defining `Σ̂ = L L'`.
    pub error_model: VariogramModel,
    factor: Option<LowerTriangular>,
    /// Centered `L^{-1} ε̂`.
    innovations: Vec<f64>,
    solver: Option<GlsSolver>,
}

fn snapped_residuals(z: &[f64], fitted: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = z.iter().zip(fitted).map(|(a, b)| a - b).collect();
    if residuals_negligible(&r, z) {
        vec![0.0; r.len()]
    } else {
        r
    }
}

impl NullFit {
    /// Steps 1-4 of the bootstrap: trend fit, `Σ̂` from the residuals, its
    /// Cholesky factor and the decorrelated, centered residuals.
    pub fn new(data: &SpatialDataset, model: &TrendModel, family: VariogramFamily, config: &TestConfig) -> Result<Self> {
        if config.replicates < MIN_REPLICATES {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_REPLICATES} bootstrap replicates, got {}",
                config.replicates
            )));
        }
        let fit = iterative_fit(model, data, family, &config.iter)?;
        let design = design_matrix(model, data.locations())?;
        let fitted = design.mul_vec(&fit.beta.beta);
        let residuals = snapped_residuals(data.responses(), &fitted);
        let exact = residuals.iter().all(|r| *r == 0.0);

        let (error_model, factor, innovations, solver) = if exact {
            (fit.variogram.model, None, vec![0.0; data.len()], None)
        } else {
            let (_, vfit) = fit_residual_variogram(data, &residuals, family, &config.iter)?;
            let l = cholesky(&covariance_matrix(&vfit.model, data.dim(), data.locations()))?;
            let mut e = l.solve_lower(&residuals);
            let mean = e.iter().sum::<f64>() / e.len() as f64;
            e.iter_mut().for_each(|v| *v -= mean);
            let solver = GlsSolver::new(model, data.locations(), &fit.sigma)?;
            (vfit.model, Some(l), e, Some(solver))
        };
        Ok(Self {
            data: data.clone(),
            model: model.clone(),
            family,
            config: config.clone(),
            design,
            fit,
            fitted,
            residuals,
            error_model,
            factor,
            innovations,
            solver,
        })
    }

    pub fn data(&self) -> &SpatialDataset {
        &self.data
    }

    pub fn is_exact(&self) -> bool {
        self.factor.is_none()
    }

    /// `T*` at every operator for bootstrap replicate `b` (steps 5-6 and the
    /// refit).
    fn replicate(&self, ops: &[StatisticOperator], seed: u64, b: usize) -> Result<Vec<f64>> {
        let (Some(l), Some(solver)) = (&self.factor, &self.solver) else {
            return Ok(vec![0.0; ops.len()]);
        };
        let n = self.data.len();
        let mut rng = rng_from_seed(replicate_seed(seed, b as u64));
        let e_star: Vec<f64> = (0..n).map(|_| self.innovations[rng.gen_range(0..n)]).collect();
        let eps = l.mul_vec(&e_star);
        let z_star: Vec<f64> = self.fitted.iter().zip(&eps).map(|(m, e)| m + e).collect();
        let beta_star = if self.config.refit_variogram {
            let star = self.data.with_responses(z_star.clone())?;
            iterative_fit(&self.model, &star, self.family, &self.config.iter)?.beta.beta
        } else {
            solver.fit(&z_star)?.beta
        };
        let delta = snapped_residuals(&z_star, &self.design.mul_vec(&beta_star));
        ops.iter().map(|op| op.value(&delta)).collect()
    }

    /// Steps 5-6: `B` resamples shared by all operators; one report per
    /// operator, in order.
    pub fn test(&self, ops: &[StatisticOperator], seed: u64) -> Result<Vec<TestReport>> {
        for op in ops {
            if op.len() != self.data.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.data.len(),
                    found: op.len(),
                });
            }
        }
        let t_obs: Vec<f64> = ops.iter().map(|op| op.value(&self.residuals)).collect::<Result<_>>()?;
        let big_b = self.config.replicates;
        let stars: Vec<Vec<f64>> = (0..big_b)
            .into_par_iter()
            .map(|b| self.replicate(ops, seed, b))
            .collect::<Result<_>>()?;
        ops.iter()
            .enumerate()
            .map(|(j, op)| {
                let stats: Vec<f64> = stars.iter().map(|s| s[j]).collect();
                let t_n = t_obs[j];
                if t_n > 0.0 && stats.iter().all(|t| *t == stats[0]) {
                    return Err(Error::BootstrapDegenerate(big_b));
                }
                Ok(TestReport {
                    t_n,
                    p_value: bootstrap_p_value(t_n, &stats),
                    replicates: big_b,
                    bandwidth: op.bandwidth().clone(),
                    beta: self.fit.beta.beta.clone(),
                    variogram: self.error_model,
                    asymptotic: None,
                    bootstrap_stats: stats,
                })
            })
            .collect()
    }
}

/// Bootstrap goodness-of-fit test at one bandwidth.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_test(
    data: &SpatialDataset,
    model: &TrendModel,
    family: VariogramFamily,
    k: &KernelSpec,
    h: &BandwidthMatrix,
    w: &WeightFunction,
    q: &QuadratureGrid,
    config: &TestConfig,
    seed: u64,
) -> Result<TestReport> {
    let mut reports = bootstrap_test_multi(data, model, family, k, std::slice::from_ref(h), w, q, config, seed)?;
    Ok(reports.remove(0))
}

/// Bootstrap test at several bandwidths sharing one set of resamples; entry
/// `j` equals `bootstrap_test` at `hs[j]` with the same seed.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_test_multi(
    data: &SpatialDataset,
    model: &TrendModel,
    family: VariogramFamily,
    k: &KernelSpec,
    hs: &[BandwidthMatrix],
    w: &WeightFunction,
    q: &QuadratureGrid,
    config: &TestConfig,
    seed: u64,
) -> Result<Vec<TestReport>> {
    if hs.is_empty() {
        return Err(Error::InvalidInput("no bandwidths given".into()));
    }
    let ops = hs
        .iter()
        .map(|h| StatisticOperator::new(data, k, h, w, q))
        .collect::<Result<Vec<_>>>()?;
    NullFit::new(data, model, family, config)?.test(&ops, seed)
}
