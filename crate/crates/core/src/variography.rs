//! Semivariogram estimation from residuals, parametric variogram families with
//! a nugget, weighted least squares fitting, and error covariance matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{nelder_mead, Bounds, SymMatrix};

/// Default number of equal-width lag bins.
pub const DEFAULT_BINS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariogramFamily {
    Exponential,
    Spherical,
    RationalQuadratic,
}

impl VariogramFamily {
    pub const ALL: [VariogramFamily; 3] = [
        VariogramFamily::Exponential,
        VariogramFamily::Spherical,
        VariogramFamily::RationalQuadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariogramFamily::Exponential => "exponential",
            VariogramFamily::Spherical => "spherical",
            VariogramFamily::RationalQuadratic => "rational-quadratic",
        }
    }
}

impl std::fmt::Display for VariogramFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for VariogramFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "exponential" | "exp" => Ok(Self::Exponential),
            "spherical" | "sph" => Ok(Self::Spherical),
            "rational-quadratic" | "rq" => Ok(Self::RationalQuadratic),
            other => Err(Error::InvalidInput(format!("unknown variogram family '{other}'"))),
        }
    }
}

/// Isotropic variogram model `θ = (c0, c1, a_e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub family: VariogramFamily,
    /// Nugget `c0`.
    pub nugget: f64,
    /// Partial sill `c1`.
    pub partial_sill: f64,
    /// Range `a_e`, entering the exponential as `exp(-h / a_e)`.
    pub range: f64,
}

impl VariogramModel {
    pub fn new(family: VariogramFamily, nugget: f64, partial_sill: f64, range: f64) -> Result<Self> {
        let finite = nugget.is_finite() && partial_sill.is_finite() && range.is_finite();
        if !finite || nugget < 0.0 || partial_sill < 0.0 || range <= 0.0 || nugget + partial_sill <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "invalid variogram parameters: nugget {nugget}, partial sill {partial_sill}, range {range}"
            )));
        }
        Ok(Self {
            family,
            nugget,
            partial_sill,
            range,
        })
    }

    /// Total sill `σ² = c0 + c1`.
    pub fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }

    /// Correlation function `ρ(h)` of the structured component.
    pub fn correlation(&self, h: f64) -> f64 {
        correlation(self, h)
    }

    /// Semivariance `γ(h)`; zero at the origin, `c0 + c1 (1 - ρ(h))` otherwise.
    pub fn semivariance(&self, h: f64) -> f64 {
        if h == 0.0 {
            0.0
        } else {
            self.nugget + self.partial_sill * (1.0 - self.correlation(h))
        }
    }
}

/// `ρ(h)` for the model's family: `exp(-h/a)`, `1/(1 + (h/a)^2)`, or the
/// spherical `1 - 1.5 (h/a) + 0.5 (h/a)^3` for `h < a` and 0 beyond.
pub fn correlation(model: &VariogramModel, h: f64) -> f64 {
    let r = h / model.range;
    match model.family {
        VariogramFamily::Exponential => (-r).exp(),
        VariogramFamily::RationalQuadratic => 1.0 / (1.0 + r * r),
        VariogramFamily::Spherical => {
            if r < 1.0 {
                1.0 - 1.5 * r + 0.5 * r * r * r
            } else {
                0.0
            }
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Error covariance matrix: `c0 + c1` on the diagonal, `c1 ρ(‖X_i - X_j‖)` off it.
/// `locations` is row-major `n × dim`.
pub fn covariance_matrix(model: &VariogramModel, dim: usize, locations: &[f64]) -> SymMatrix {
    let n = locations.len() / dim;
    let sill = model.sill();
    SymMatrix::from_fn(n, |i, j| {
        if i == j {
            sill
        } else {
            let h = distance(&locations[i * dim..(i + 1) * dim], &locations[j * dim..(j + 1) * dim]);
            model.partial_sill * correlation(model, h)
        }
    })
}

/// Half the largest pairwise distance.
pub fn default_max_lag(dim: usize, locations: &[f64]) -> f64 {
    let n = locations.len() / dim;
    let mut max = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            max = max.max(distance(
                &locations[i * dim..(i + 1) * dim],
                &locations[j * dim..(j + 1) * dim],
            ));
        }
    }
    0.5 * max
}

/// Binned Matheron semivariogram estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub bin_centers: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub pair_counts: Vec<usize>,
}

impl EmpiricalVariogram {
    pub fn new(bin_centers: Vec<f64>, gamma_hat: Vec<f64>, pair_counts: Vec<usize>) -> Result<Self> {
        if bin_centers.len() != gamma_hat.len() || bin_centers.len() != pair_counts.len() {
            return Err(Error::InvalidInput("empirical variogram columns differ in length".into()));
        }
        Ok(Self {
            bin_centers,
            gamma_hat,
            pair_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.bin_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_centers.is_empty()
    }

    /// Writes `lag,gamma,npairs` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["lag", "gamma", "npairs"]).map_err(io)?;
        for ((h, g), n) in self.bin_centers.iter().zip(&self.gamma_hat).zip(&self.pair_counts) {
            w.write_record([h.to_string(), g.to_string(), n.to_string()]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Matheron estimator `γ̂(h_j) = Σ (e_i - e_k)^2 / (2 N(h_j))` over `n_bins`
/// equal-width bins on `[0, max_lag]`; empty bins are dropped and bins are
/// reported at their midpoints.
pub fn empirical_semivariogram(
    dim: usize,
    locations: &[f64],
    residuals: &[f64],
    n_bins: usize,
    max_lag: f64,
) -> Result<EmpiricalVariogram> {
    let n = residuals.len();
    if dim == 0 || locations.len() != n * dim {
        return Err(Error::DimensionMismatch {
            expected: n * dim,
            found: locations.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput("need at least two observations".into()));
    }
    if n_bins < 2 || !(max_lag > 0.0 && max_lag.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need n_bins >= 2 and a positive max lag, got {n_bins} and {max_lag}"
        )));
    }
    let width = max_lag / n_bins as f64;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for i in 0..n {
        let xi = &locations[i * dim..(i + 1) * dim];
        for k in 0..i {
            let h = distance(xi, &locations[k * dim..(k + 1) * dim]);
            if h > max_lag {
                continue;
            }
            let bin = ((h / width) as usize).min(n_bins - 1);
            let diff = residuals[i] - residuals[k];
            sums[bin] += diff * diff;
            counts[bin] += 1;
        }
    }
    let mut emp = EmpiricalVariogram {
        bin_centers: Vec::new(),
        gamma_hat: Vec::new(),
        pair_counts: Vec::new(),
    };
    for b in 0..n_bins {
        if counts[b] > 0 {
            emp.bin_centers.push((b as f64 + 0.5) * width);
            emp.gamma_hat.push(sums[b] / (2.0 * counts[b] as f64));
            emp.pair_counts.push(counts[b]);
        }
    }
    if emp.is_empty() {
        return Err(Error::NoPairsInRange);
    }
    Ok(emp)
}

/// Cressie's weighted least squares criterion `Σ N(h_j) (γ̂(h_j)/γ_θ(h_j) - 1)^2`.
pub fn wls_objective(emp: &EmpiricalVariogram, model: &VariogramModel) -> f64 {
    let mut s = 0.0;
    for ((h, g), n) in emp.bin_centers.iter().zip(&emp.gamma_hat).zip(&emp.pair_counts) {
        let fitted = model.semivariance(*h);
        if !(fitted > 0.0) {
            return f64::INFINITY;
        }
        let r = g / fitted - 1.0;
        s += *n as f64 * r * r;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    pub objective: f64,
    /// Whether the winning optimizer run met its tolerance.
    pub converged: bool,
    /// Whether the partial sill or range sits on a bound, or the nugget on its
    /// upper bound.
    pub at_boundary: bool,
}

/// Search box for `θ`, with the range on a log scale.
#[derive(Debug, Clone, Copy)]
struct ParamBox {
    c0: (f64, f64),
    c1: (f64, f64),
    log_range: (f64, f64),
}

impl ParamBox {
    fn for_empirical(emp: &EmpiricalVariogram) -> Self {
        let g = &emp.gamma_hat;
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / g.len() as f64;
        let gmax = g.iter().cloned().fold(0.0_f64, f64::max);
        let scale = gmax.max(f64::MIN_POSITIVE);
        let c1_lo = (1e-8 * var).max(1e-12 * scale);
        let first = emp.bin_centers[0];
        let last = *emp.bin_centers.last().expect("nonempty");
        Self {
            c0: (0.0, 10.0 * scale),
            c1: (c1_lo, 10.0 * scale),
            log_range: ((first / 10.0).ln(), (10.0 * last).ln()),
        }
    }

    fn model_at(&self, family: VariogramFamily, t: &[f64]) -> VariogramModel {
        let lerp = |(lo, hi): (f64, f64), s: f64| lo + s * (hi - lo);
        VariogramModel {
            family,
            nugget: lerp(self.c0, t[0]),
            partial_sill: lerp(self.c1, t[1]),
            range: lerp(self.log_range, t[2]).exp(),
        }
    }

    fn unit_coords(&self, m: &VariogramModel) -> Vec<f64> {
        let inv = |(lo, hi): (f64, f64), v: f64| {
            if hi > lo {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        };
        vec![
            inv(self.c0, m.nugget),
            inv(self.c1, m.partial_sill),
            inv(self.log_range, m.range.ln()),
        ]
    }
}

/// Deterministic multi-start points in unit coordinates `(c0, c1, log range)`.
const MULTI_STARTS: [[f64; 3]; 5] = [
    [0.01, 0.09, 0.3],
    [0.05, 0.05, 0.5],
    [0.0, 0.12, 0.7],
    [0.08, 0.02, 0.2],
    [0.02, 0.15, 0.9],
];

const FIT_TOL: f64 = 1e-10;
const FIT_MAX_ITER: usize = 2000;

/// Minimizes [`wls_objective`] over `θ` with `c0 >= 0`,
/// `c1 >= 1e-8 var(γ̂)` and `a_e` in `[min lag / 10, 10 max lag]`.
///
/// The simplex search runs from `start` and from five fixed points spread over
/// the parameter box; the best objective wins.
pub fn fit_variogram_wls(
    emp: &EmpiricalVariogram,
    family: VariogramFamily,
    start: &VariogramModel,
) -> Result<VariogramFit> {
    if emp.len() < 3 {
        return Err(Error::VariogramFitFailed(format!(
            "need at least 3 lag bins, got {}",
            emp.len()
        )));
    }
    if emp.bin_centers.windows(2).any(|w| !(w[1] > w[0])) || emp.bin_centers[0] <= 0.0 {
        return Err(Error::VariogramFitFailed(
            "lag bins must be positive and strictly increasing".into(),
        ));
    }
    if emp.gamma_hat.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::VariogramFitFailed("semivariance estimates must be finite and >= 0".into()));
    }
    let pbox = ParamBox::for_empirical(emp);
    let unit = Bounds::new(vec![0.0; 3], vec![1.0; 3])?;
    let objective = |t: &[f64]| wls_objective(emp, &pbox.model_at(family, t));

    let mut starts = vec![pbox.unit_coords(&VariogramModel { family, ..*start })];
    starts.extend(MULTI_STARTS.iter().map(|s| s.to_vec()));
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for s in &starts {
        let r = nelder_mead(objective, s, &unit, FIT_TOL, FIT_MAX_ITER)?;
        if best.as_ref().is_none_or(|b| r.value < b.1) {
            best = Some((r.point, r.value, r.converged));
        }
    }
    let (t, value, converged) = best.expect("at least one start");
    if !value.is_finite() {
        return Err(Error::VariogramFitFailed("objective is not finite at any start".into()));
    }
    let mut model = pbox.model_at(family, &t);
    let mut objective_value = value;
    // The objective at the caller's start is an upper bound on the result.
    let start_value = wls_objective(emp, start);
    if start.family == family && start_value < objective_value {
        model = *start;
        objective_value = start_value;
    }
    let edge = |v: f64| v <= 1e-6 || v >= 1.0 - 1e-6;
    let tu = pbox.unit_coords(&model);
    let at_boundary = tu[0] >= 1.0 - 1e-6 || edge(tu[1]) || edge(tu[2]);
    if !converged {
        log::warn!("{family} variogram fit stopped at the iteration cap");
    }
    Ok(VariogramFit {
        model,
        objective: objective_value,
        converged,
        at_boundary,
    })
}

/// A reasonable starting model for `family` given empirical estimates:
/// nugget 10% and partial sill 90% of the mean semivariance, range one third
/// of the largest lag.
pub fn initial_model(emp: &EmpiricalVariogram, family: VariogramFamily) -> Result<VariogramModel> {
    let mean = emp.gamma_hat.iter().sum::<f64>() / emp.len().max(1) as f64;
    let last = emp.bin_centers.last().copied().unwrap_or(1.0);
    if !(mean > 0.0) {
        return Err(Error::VariogramFitFailed("semivariance estimates are all zero".into()));
    }
    VariogramModel::new(family, 0.1 * mean, 0.9 * mean, last / 3.0)
}
