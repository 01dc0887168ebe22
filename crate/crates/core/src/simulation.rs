//! Gaussian random fields with exponential covariance and the Monte Carlo
//! harness for rejection proportions and the asymptotic approximation.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::goftest::{
    asymptotic_constants, standardized_statistic, AsymptoticInputs, DesignDensity, NullFit, QuadratureGrid,
    StatisticOperator, TestConfig, WeightFunction,
};
use crate::kernels::{BandwidthMatrix, KernelFamily, KernelSpec};
use crate::numerics::{cholesky, LowerTriangular, SymMatrix};
use crate::rng::{derive_seed, rng_from_seed, standard_normals, Stream};
use crate::smoothing::SpatialDataset;
use crate::trend::{iterative_fit, IterConfig, TrendModel};
use crate::variography::VariogramFamily;

/// Placement of `side × side` grid points in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridConvention {
    /// `i / (side - 1)`, including the edges.
    #[default]
    Endpoints,
    /// `(i + 0.5) / side`.
    CellCenters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Design {
    RegularGrid {
        side: usize,
        #[serde(default)]
        convention: GridConvention,
    },
    /// `n` independent uniform locations on the unit square, redrawn per
    /// replicate.
    UniformRandom { n: usize },
}

impl Design {
    pub fn size(&self) -> usize {
        match self {
            Self::RegularGrid { side, .. } => side * side,
            Self::UniformRandom { n } => *n,
        }
    }

    fn grid_locations(side: usize, convention: GridConvention) -> Vec<f64> {
        let coord = |i: usize| match convention {
            GridConvention::Endpoints => i as f64 / (side - 1) as f64,
            GridConvention::CellCenters => (i as f64 + 0.5) / side as f64,
        };
        (0..side)
            .flat_map(|i| (0..side).flat_map(move |j| [coord(i), coord(j)]))
            .collect()
    }
}

/// Mean surfaces `m(x) = β0 + β1 x1 + β2 x2 + c x1^3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendFamily {
    /// `2 + x1 + x2 + c x1^3`.
    M1,
    /// `3 + 2 x1 + x2 + c x1^3`.
    M2,
}

impl TrendFamily {
    /// Linear coefficients `(β0, β1, β2)`.
    pub fn null_beta(self) -> [f64; 3] {
        match self {
            Self::M1 => [2.0, 1.0, 1.0],
            Self::M2 => [3.0, 2.0, 1.0],
        }
    }

    pub fn eval(self, c: f64, x: &[f64]) -> f64 {
        let [b0, b1, b2] = self.null_beta();
        b0 + b1 * x[0] + b2 * x[1] + c * x[0].powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Correlation {
    /// `exp(-h / a_e)` with `a_e` from the scenario.
    ExponentialFixed,
    /// `exp(-λ n h)`: the range shrinks as `1 / (λ n)`.
    ExponentialShrinking { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub design: Design,
    pub trend: TrendFamily,
    /// Amplitude of the `x1^3` deviation; `0` is the null.
    pub c: f64,
    /// Error standard deviation.
    pub sigma: f64,
    /// Exponential range `a_e`.
    pub range: f64,
    /// Share of `σ^2` assigned to the nugget.
    #[serde(default)]
    pub nugget_frac: f64,
    #[serde(default = "default_correlation")]
    pub correlation: Correlation,
    /// Diagonals of the bandwidth matrices.
    pub bandwidths: Vec<Vec<f64>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_replicates")]
    pub bootstrap: usize,
    pub seed: u64,
    #[serde(default = "default_kernel")]
    pub kernel: KernelFamily,
    #[serde(default = "default_variogram")]
    pub variogram: VariogramFamily,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    #[serde(default)]
    pub refit_variogram: bool,
}

fn default_correlation() -> Correlation {
    Correlation::ExponentialFixed
}
fn default_alpha() -> f64 {
    0.05
}
fn default_replicates() -> usize {
    200
}
fn default_kernel() -> KernelFamily {
    KernelFamily::MultiplicativeTriweight
}
fn default_variogram() -> VariogramFamily {
    VariogramFamily::Exponential
}
fn default_quad_points() -> usize {
    crate::goftest::DEFAULT_QUAD_POINTS
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if let Design::RegularGrid { side, .. } = self.design {
            if side < 2 {
                return bad(format!("grid side must be at least 2, got {side}"));
            }
        }
        if self.design.size() < 25 {
            return bad(format!("design needs at least 25 locations, got {}", self.design.size()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return bad(format!("range must be positive, got {}", self.range));
        }
        if !(0.0..1.0).contains(&self.nugget_frac) {
            return bad(format!("nugget_frac must lie in [0, 1), got {}", self.nugget_frac));
        }
        if let Correlation::ExponentialShrinking { lambda } = self.correlation {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return bad(format!("lambda must be positive, got {lambda}"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.bootstrap < crate::goftest::MIN_REPLICATES {
            return bad(format!(
                "bootstrap must be at least {}, got {}",
                crate::goftest::MIN_REPLICATES,
                self.bootstrap
            ));
        }
        if !self.c.is_finite() {
            return bad("c must be finite".into());
        }
        if self.bandwidths.is_empty() {
            return bad("at least one bandwidth is required".into());
        }
        for h in &self.bandwidths {
            BandwidthMatrix::diagonal_from(h.clone())?;
            if h.len() != 2 {
                return bad(format!("bandwidths must have 2 entries, got {}", h.len()));
            }
        }
        if self.quad_points < 2 {
            return bad("quad_points must be at least 2".into());
        }
        Ok(())
    }

    pub fn bandwidth_matrices(&self) -> Result<Vec<BandwidthMatrix>> {
        self.bandwidths.iter().map(|h| BandwidthMatrix::diagonal_from(h.clone())).collect()
    }

    /// Effective exponential range for a design of `n` points.
    pub fn effective_range(&self, n: usize) -> f64 {
        match self.correlation {
            Correlation::ExponentialFixed => self.range,
            Correlation::ExponentialShrinking { lambda } => 1.0 / (lambda * n as f64),
        }
    }

    /// Error covariance `σ^2 [ν 1{h = 0} + (1 - ν) exp(-h / a)]` at the
    /// given locations.
    pub fn error_covariance(&self, locations: &[f64]) -> SymMatrix {
        let n = locations.len() / 2;
        let a = self.effective_range(n);
        let s2 = self.sigma * self.sigma;
        let (nugget, structured) = (s2 * self.nugget_frac, s2 * (1.0 - self.nugget_frac));
        SymMatrix::from_fn(n, |i, j| {
            if i == j {
                nugget + structured
            } else {
                let (p, q) = (&locations[2 * i..2 * i + 2], &locations[2 * j..2 * j + 2]);
                let h = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                structured * (-h / a).exp()
            }
        })
    }

    fn test_config(&self) -> TestConfig {
        TestConfig {
            replicates: self.bootstrap,
            refit_variogram: self.refit_variogram,
            iter: IterConfig::default(),
        }
    }
}

/// Parses a TOML scenario file and validates it.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1) as u64),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct FieldSample {
    pub dataset: SpatialDataset,
    /// Linear coefficients of the null part of the trend.
    pub true_beta: [f64; 3],
    pub replicate_index: usize,
    /// Seed the sample was drawn from.
    pub seed: u64,
}

/// Draws fields for one scenario; the covariance factor is computed once
/// when the design is fixed.
#[derive(Debug, Clone)]
pub struct FieldGenerator {
    cfg: ScenarioConfig,
    fixed: Option<(Vec<f64>, LowerTriangular)>,
}

impl FieldGenerator {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let fixed = match cfg.design {
            Design::RegularGrid { side, convention } => {
                let locs = Design::grid_locations(side, convention);
                let l = cholesky(&cfg.error_covariance(&locs))?;
                Some((locs, l))
            }
            Design::UniformRandom { .. } => None,
        };
        Ok(Self { cfg: cfg.clone(), fixed })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Grid locations, or `None` for random designs.
    pub fn fixed_locations(&self) -> Option<&[f64]> {
        self.fixed.as_ref().map(|(l, _)| l.as_slice())
    }

    /// Error vector `L z` and the locations of replicate `r`.
    pub fn errors(&self, r: usize) -> Result<(Vec<f64>, Vec<f64>, u64)> {
        let seed = derive_seed(self.cfg.seed, Stream::Field, r as u64);
        let mut rng = rng_from_seed(seed);
        match &self.fixed {
            Some((locs, l)) => {
                let z = standard_normals(&mut rng, locs.len() / 2);
                Ok((l.mul_vec(&z), locs.clone(), seed))
            }
            None => {
                let n = self.cfg.design.size();
                let locs: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
                let l = cholesky(&self.cfg.error_covariance(&locs))?;
                let z = standard_normals(&mut rng, n);
                Ok((l.mul_vec(&z), locs, seed))
            }
        }
    }

    /// `Z = m(X) + ε` for replicate `r`.
    pub fn sample(&self, r: usize) -> Result<FieldSample> {
        let (eps, locs, seed) = self.errors(r)?;
        let z: Vec<f64> = locs
            .chunks(2)
            .zip(&eps)
            .map(|(x, e)| self.cfg.trend.eval(self.cfg.c, x) + e)
            .collect();
        Ok(FieldSample {
            dataset: SpatialDataset::new(2, locs, z)?,
            true_beta: self.cfg.trend.null_beta(),
            replicate_index: r,
            seed,
        })
    }
}

/// One simulated dataset of scenario `cfg`; identical for identical
/// `(cfg, replicate_index)`.
pub fn generate_field(cfg: &ScenarioConfig, replicate_index: usize) -> Result<FieldSample> {
    FieldGenerator::new(cfg)?.sample(replicate_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagCheck {
    pub lag: f64,
    pub analytic: f64,
    pub empirical: f64,
    /// Monte Carlo standard error of `empirical`.
    pub standard_error: f64,
}

impl LagCheck {
    pub fn deviation(&self) -> f64 {
        (self.empirical - self.analytic).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceCheck {
    pub lags: Vec<LagCheck>,
    pub replicates: usize,
}

impl CovarianceCheck {
    pub fn max_abs_deviation(&self) -> f64 {
        self.lags.iter().map(LagCheck::deviation).fold(0.0, f64::max)
    }

    /// Largest deviation in units of its standard error.
    pub fn max_standardized_deviation(&self) -> f64 {
        self.lags
            .iter()
            .map(|l| if l.standard_error > 0.0 { l.deviation() / l.standard_error } else if l.deviation() == 0.0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Number of grid steps from the anchor point checked by
/// [`empirical_covariance_check`].
pub const CHECK_LAGS: usize = 5;

/// Monte Carlo covariance of the generated errors between a central grid
/// point and its neighbours `0..5` steps away along the first axis, against
/// the analytic covariance. Errors have known zero mean, so the estimate is
/// the mean of products.
pub fn empirical_covariance_check(cfg: &ScenarioConfig, replicates: usize) -> Result<CovarianceCheck> {
    if replicates < 200 {
        return Err(Error::InvalidInput(format!("covariance check needs at least 200 replicates, got {replicates}")));
    }
    let Design::RegularGrid { side, .. } = cfg.design else {
        return Err(Error::InvalidInput("covariance check needs a regular grid design".into()));
    };
    if side < CHECK_LAGS + 1 {
        return Err(Error::InvalidInput(format!("covariance check needs a grid side of at least {}", CHECK_LAGS + 1)));
    }
    let gen = FieldGenerator::new(cfg)?;
    let locs = gen.fixed_locations().expect("grid design").to_vec();
    let sigma = cfg.error_covariance(&locs);
    let row = (side - CHECK_LAGS) / 2;
    let col = side / 2;
    let anchor = row * side + col;
    let partners: Vec<usize> = (0..CHECK_LAGS).map(|k| (row + k) * side + col).collect();
    let products: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let (eps, _, _) = gen.errors(r)?;
            Ok(partners.iter().map(|&j| eps[anchor] * eps[j]).collect())
        })
        .collect::<Result<_>>()?;
    let rf = replicates as f64;
    let lags = partners
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let xs: Vec<f64> = products.iter().map(|p| p[k]).collect();
            let mean = xs.iter().sum::<f64>() / rf;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (rf - 1.0);
            let (p, q) = (&locs[2 * anchor..2 * anchor + 2], &locs[2 * j..2 * j + 2]);
            LagCheck {
                lag: ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt(),
                analytic: sigma.get(anchor, j),
                empirical: mean,
                standard_error: (var / rf).sqrt(),
            }
        })
        .collect();
    Ok(CovarianceCheck { lags, replicates })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sigma: f64,
    pub a_e: f64,
    pub c: f64,
    pub n: usize,
    pub h1: f64,
    pub h2: f64,
    pub rejections: usize,
    /// Denominator of `proportion`.
    pub replicates: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub replicate_index: usize,
    pub field_seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<ReplicateFailure>,
    /// Whether failed replicates were dropped from the denominators.
    pub failures_excluded: bool,
    pub grid_convention: Option<GridConvention>,
}

/// Share of failed replicates below which they are dropped from the
/// denominator; otherwise they count as non-rejections.
pub const FAILURE_EXCLUSION_LIMIT: f64 = 0.02;

/// Rejection proportions over `cfg.replicates` simulated datasets, one row
/// per bandwidth. Bootstrap resamples are shared across bandwidths within a
/// replicate.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let gen = FieldGenerator::new(cfg)?;
    let hs = cfg.bandwidth_matrices()?;
    let k = KernelSpec::new(cfg.kernel, 2)?;
    let w = WeightFunction::ConstantOne;
    let model = TrendModel::linear(2);
    let test_cfg = cfg.test_config();

    let build_ops = |data: &SpatialDataset| -> Result<Vec<StatisticOperator>> {
        let q = QuadratureGrid::bounding(2, data.locations(), cfg.quad_points)?;
        hs.iter().map(|h| StatisticOperator::new(data, &k, h, &w, &q)).collect()
    };
    let shared_ops = match gen.fixed_locations() {
        Some(_) => Some(build_ops(&gen.sample(0)?.dataset)?),
        None => None,
    };

    let outcomes: Vec<std::result::Result<Vec<bool>, ReplicateFailure>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Vec<bool>> {
                let sample = gen.sample(r)?;
                let local;
                let ops = match &shared_ops {
                    Some(ops) => ops,
                    None => {
                        local = build_ops(&sample.dataset)?;
                        &local
                    }
                };
                let null = NullFit::new(&sample.dataset, &model, cfg.variogram, &test_cfg)?;
                let reports = null.test(ops, derive_seed(cfg.seed, Stream::Bootstrap, r as u64))?;
                Ok(reports.iter().map(|rep| rep.rejects(cfg.alpha)).collect())
            };
            run().map_err(|e| {
                let failure = ReplicateFailure {
                    replicate_index: r,
                    field_seed: derive_seed(cfg.seed, Stream::Field, r as u64),
                    message: e.to_string(),
                };
                log::warn!(
                    "replicate {} (field seed {}) failed: {}",
                    failure.replicate_index,
                    failure.field_seed,
                    failure.message
                );
                failure
            })
        })
        .collect();

    let failures: Vec<ReplicateFailure> = outcomes.iter().filter_map(|o| o.as_ref().err().cloned()).collect();
    let failures_excluded = (failures.len() as f64) < FAILURE_EXCLUSION_LIMIT * cfg.replicates as f64;
    let denominator = if failures_excluded { cfg.replicates - failures.len() } else { cfg.replicates };
    let n = cfg.design.size();
    let rows = hs
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let rejections = outcomes.iter().filter(|o| matches!(o, Ok(v) if v[j])).count();
            ResultRow {
                sigma: cfg.sigma,
                a_e: cfg.effective_range(n),
                c: cfg.c,
                n,
                h1: h.diagonal()[0],
                h2: h.diagonal()[1],
                rejections,
                replicates: denominator,
                proportion: if denominator == 0 { f64::NAN } else { rejections as f64 / denominator as f64 },
            }
        })
        .collect();
    Ok(ScenarioResult {
        rows,
        failures,
        failures_excluded,
        grid_convention: match cfg.design {
            Design::RegularGrid { convention, .. } => Some(convention),
            Design::UniformRandom { .. } => None,
        },
    })
}

/// Writes rows with header `sigma,a_e,c,n,h1,h2,rejections,replicates,proportion`.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    if rows.is_empty() {
        wtr.write_record(["sigma", "a_e", "c", "n", "h1", "h2", "rejections", "replicates", "proportion"])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticSample {
    pub n: usize,
    /// `V^{-1/2} (T_n - b_0H)` per replicate.
    pub standardized: Vec<f64>,
    pub b0: f64,
    pub v: f64,
}

impl AsymptoticSample {
    pub fn mean(&self) -> f64 {
        self.standardized.iter().sum::<f64>() / self.standardized.len() as f64
    }

    pub fn ks_distance(&self) -> f64 {
        ks_distance_to_normal(&self.standardized)
    }
}

/// Kolmogorov–Smirnov distance between the empirical distribution of `xs`
/// and the standard normal.
pub fn ks_distance_to_normal(xs: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Standardized statistics on `side × side` grids with the error variance and
/// the design density treated as known. Requires shrinking exponential
/// correlation, for which `ρ_c = 1/λ`, and a single bandwidth.
pub fn asymptotic_study(cfg: &ScenarioConfig, sides: &[usize], replicates: usize) -> Result<Vec<AsymptoticSample>> {
    let Correlation::ExponentialShrinking { lambda } = cfg.correlation else {
        return Err(Error::InvalidInput("asymptotic study needs shrinking exponential correlation".into()));
    };
    if cfg.kernel != KernelFamily::Gaussian {
        return Err(Error::InvalidInput("asymptotic study needs the Gaussian kernel".into()));
    }
    if cfg.bandwidths.len() != 1 {
        return Err(Error::InvalidInput("asymptotic study takes exactly one bandwidth".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidInput("replicates must be at least 1".into()));
    }
    let h = BandwidthMatrix::diagonal_from(cfg.bandwidths[0].clone())?;
    let k = KernelSpec::gaussian(2);
    let w = WeightFunction::ConstantOne;
    let model = TrendModel::linear(2);
    sides
        .iter()
        .map(|&side| {
            let convention = match cfg.design {
                Design::RegularGrid { convention, .. } => convention,
                Design::UniformRandom { .. } => GridConvention::Endpoints,
            };
            let sub = ScenarioConfig {
                design: Design::RegularGrid { side, convention },
                ..cfg.clone()
            };
            let gen = FieldGenerator::new(&sub)?;
            let locs = gen.fixed_locations().expect("grid design");
            let q = QuadratureGrid::bounding(2, locs, cfg.quad_points)?;
            let inputs = AsymptoticInputs {
                sigma2: cfg.sigma * cfg.sigma,
                rho_c: 1.0 / lambda,
                density: DesignDensity::UniformOnDomain,
                g_dev: None,
            };
            let constants = asymptotic_constants(&inputs, &k, &h, &w, &q)?;
            let op = StatisticOperator::new(&gen.sample(0)?.dataset, &k, &h, &w, &q)?;
            let standardized = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let data = gen.sample(r)?.dataset;
                    let fit = iterative_fit(&model, &data, cfg.variogram, &IterConfig::default())?;
                    let fitted = fit.beta.fitted(data.locations());
                    let delta: Vec<f64> = data.responses().iter().zip(&fitted).map(|(z, m)| z - m).collect();
                    standardized_statistic(op.value(&delta)?, &constants)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(AsymptoticSample {
                n: side * side,
                standardized,
                b0: constants.b0,
                v: constants.v,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base() -> ScenarioConfig {
        parse_scenario(
            r#"
seed = 7
trend = "m1"
c = 0.0
sigma = 0.4
range = 0.2
bandwidths = [[0.8, 0.8]]
replicates = 20
bootstrap = 19

[design]
kind = "regular-grid"
side = 15
"#,
        )
        .unwrap()
    }

    #[test]
    fn config_defaults() {
        let cfg = base();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.kernel, KernelFamily::MultiplicativeTriweight);
        assert_eq!(cfg.variogram, VariogramFamily::Exponential);
        assert_eq!(cfg.correlation, Correlation::ExponentialFixed);
        assert_eq!(cfg.design, Design::RegularGrid { side: 15, convention: GridConvention::Endpoints });
    }

    #[test]
    fn config_validation() {
        let mut cfg = base();
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = base();
        cfg.design = Design::RegularGrid { side: 4, convention: GridConvention::Endpoints };
        assert!(cfg.validate().is_err());
        let mut cfg = base();
        cfg.nugget_frac = 1.0;
        assert!(cfg.validate().is_err());
        assert!(matches!(parse_scenario("seed = 1\nbogus = 2\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn grid_conventions() {
        assert_eq!(Design::grid_locations(3, GridConvention::Endpoints)[..6], [0.0, 0.0, 0.0, 0.5, 0.0, 1.0]);
        let c = Design::grid_locations(2, GridConvention::CellCenters);
        assert_eq!(c, vec![0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75]);
    }

    #[test]
    fn vanishing_noise_recovers_trend() {
        let mut cfg = base();
        cfg.sigma = 1e-8;
        cfg.c = 3.0;
        let s = generate_field(&cfg, 0).unwrap();
        for (x, z) in s.dataset.locations().chunks(2).zip(s.dataset.responses()) {
            assert_abs_diff_eq!(*z, TrendFamily::M1.eval(3.0, x), epsilon = 1e-6);
        }
    }

    #[test]
    fn fields_are_deterministic() {
        let cfg = base();
        let a = generate_field(&cfg, 3).unwrap();
        let b = generate_field(&cfg, 3).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_ne!(a.dataset, generate_field(&cfg, 4).unwrap().dataset);
    }

    #[test]
    fn error_covariance_entries() {
        let mut cfg = base();
        cfg.nugget_frac = 0.2;
        let s = cfg.error_covariance(&[0.0, 0.0, 0.1, 0.0]);
        assert_abs_diff_eq!(s.get(0, 0), 0.16, epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(0, 1), 0.16 * 0.8 * (-0.5_f64).exp(), epsilon = 1e-15);
        cfg.correlation = Correlation::ExponentialShrinking { lambda: 0.0005 };
        assert_abs_diff_eq!(cfg.effective_range(400), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.effective_range(2500), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn ks_distance_examples() {
        assert_abs_diff_eq!(ks_distance_to_normal(&[0.0]), 0.5, epsilon = 1e-12);
        let far: Vec<f64> = (0..100).map(|i| 10.0 + i as f64).collect();
        assert!(ks_distance_to_normal(&far) > 0.99);
    }

    #[test]
    fn results_csv_header() {
        let mut out = Vec::new();
        write_results_csv(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "sigma,a_e,c,n,h1,h2,rejections,replicates,proportion\n");
    }
}
