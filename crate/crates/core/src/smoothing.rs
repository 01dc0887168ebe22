//! Multivariate local linear regression and the smoothed parametric fit.
//!
//! Both estimators are the same linear smoother applied to different response
//! vectors: the observed responses for the nonparametric fit, and the fitted
//! parametric values for its smoothed counterpart. [`smoother_weights_at`]
//! exposes the shared weight row.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{BandwidthMatrix, KernelSpec};
use crate::numerics::{dot, spd_solve, SymMatrix};

/// Spatial sample `{(X_i, Z_i)}` with locations stored row-major (`n × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset {
    dim: usize,
    locations: Vec<f64>,
    responses: Vec<f64>,
}

impl SpatialDataset {
    pub fn new(dim: usize, locations: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        if locations.len() != dim * responses.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * responses.len(),
                found: locations.len(),
            });
        }
        let n = responses.len();
        if n < dim + 2 {
            return Err(Error::InvalidInput(format!(
                "need at least {} observations in dimension {dim}, got {n}",
                dim + 2
            )));
        }
        if let Some(i) = locations.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate for observation {}",
                i / dim
            )));
        }
        if let Some(i) = responses.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite response for observation {i}")));
        }
        let data = Self {
            dim,
            locations,
            responses,
        };
        let dups = data.duplicate_locations();
        if dups > 0 {
            log::warn!("{dups} observations share a location with an earlier observation");
        }
        Ok(data)
    }

    /// Builds a dataset from per-point coordinate vectors.
    pub fn from_points(points: &[Vec<f64>], responses: Vec<f64>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("points have inconsistent dimension".into()));
        }
        Self::new(dim, points.concat(), responses)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.locations[i * self.dim..(i + 1) * self.dim]
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// Same locations with a new response vector.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        if responses.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: responses.len(),
            });
        }
        if responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite response".into()));
        }
        Ok(Self {
            dim: self.dim,
            locations: self.locations.clone(),
            responses,
        })
    }

    /// Per-axis `(min, max)` of the locations.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|j| {
                (0..self.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                    let v = self.locations[i * self.dim + j];
                    (lo.min(v), hi.max(v))
                })
            })
            .collect()
    }

    fn duplicate_locations(&self) -> usize {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.location(a)
                .iter()
                .zip(self.location(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx.windows(2)
            .filter(|w| self.location(w[0]) == self.location(w[1]))
            .count()
    }
}

/// A fitted surface evaluated at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceEstimate {
    pub dim: usize,
    /// Row-major `m × d` evaluation points.
    pub eval_points: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: BandwidthMatrix,
    pub kernel: KernelSpec,
}

fn check_dims(data: &SpatialDataset, k: &KernelSpec, h: &BandwidthMatrix, x: &[f64]) -> Result<()> {
    for found in [k.dim(), h.dim(), x.len()] {
        if found != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                found,
            });
        }
    }
    Ok(())
}

/// Weight row `w(x)` of the local linear smoother at `x`:
/// `m̂(x) = Σ_i w_i(x) Z_i` with `w(x)' = e_1'(X_x' W_x X_x)^{-1} X_x' W_x`.
///
/// The local design is expressed in bandwidth-scaled offsets `H^{-1}(X_i - x)`,
/// which leaves the intercept (and hence the weights) unchanged but keeps the
/// `(d+1) × (d+1)` system well conditioned. The common factor `|H|^{-1}` of
/// the kernel weights cancels and is omitted.
pub fn smoother_weights_at(
    data: &SpatialDataset,
    k: &KernelSpec,
    h: &BandwidthMatrix,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_dims(data, k, h, x)?;
    let d = data.dim();
    let p = d + 1;
    let n = data.len();
    let mut u = vec![0.0; d];
    let mut z = vec![0.0; p];
    let mut kernel_w = vec![0.0; n];
    let mut gram = vec![0.0; p * p];
    let mut support = 0usize;
    for i in 0..n {
        let loc = data.location(i);
        for j in 0..d {
            u[j] = (loc[j] - x[j]) / h.diagonal()[j];
        }
        let kw = k.eval_unchecked(&u);
        if kw <= 0.0 {
            continue;
        }
        support += 1;
        kernel_w[i] = kw;
        z[0] = 1.0;
        z[1..].copy_from_slice(&u);
        for a in 0..p {
            for b in 0..=a {
                gram[a * p + b] += kw * z[a] * z[b];
            }
        }
    }
    let insufficient = || Error::InsufficientLocalData { point: x.to_vec() };
    if support < p {
        return Err(insufficient());
    }
    for a in 0..p {
        for b in 0..a {
            gram[b * p + a] = gram[a * p + b];
        }
    }
    let gram = SymMatrix::from_row_major(p, gram).map_err(|_| insufficient())?;
    let mut e1 = vec![0.0; p];
    e1[0] = 1.0;
    let coef = spd_solve(&gram, &e1).map_err(|_| insufficient())?;

    let mut weights = vec![0.0; n];
    for i in 0..n {
        let kw = kernel_w[i];
        if kw == 0.0 {
            continue;
        }
        let loc = data.location(i);
        let mut lin = coef[0];
        for j in 0..d {
            lin += coef[j + 1] * (loc[j] - x[j]) / h.diagonal()[j];
        }
        weights[i] = kw * lin;
    }
    Ok(weights)
}

/// Local linear estimate `m̂^LL_H(x)`.
pub fn local_linear_at(
    data: &SpatialDataset,
    k: &KernelSpec,
    h: &BandwidthMatrix,
    x: &[f64],
) -> Result<f64> {
    let w = smoother_weights_at(data, k, h, x)?;
    Ok(dot(&w, data.responses()))
}

/// Smoothed parametric estimate: the local linear smoother at `x` applied to
/// the fitted parametric values at the data locations.
pub fn smooth_parametric_at(
    data: &SpatialDataset,
    fitted_values: &[f64],
    k: &KernelSpec,
    h: &BandwidthMatrix,
    x: &[f64],
) -> Result<f64> {
    if fitted_values.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: fitted_values.len(),
        });
    }
    let w = smoother_weights_at(data, k, h, x)?;
    Ok(dot(&w, fitted_values))
}

/// Weight rows at every point of a row-major `m × d` point set, in order.
pub fn smoother_rows(
    data: &SpatialDataset,
    k: &KernelSpec,
    h: &BandwidthMatrix,
    points: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let d = data.dim();
    if !points.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: points.len() % d,
        });
    }
    points
        .par_chunks(d)
        .map(|x| smoother_weights_at(data, k, h, x))
        .collect()
}

fn surface(
    data: &SpatialDataset,
    values_at_data: &[f64],
    k: &KernelSpec,
    h: &BandwidthMatrix,
    points: &[f64],
) -> Result<SurfaceEstimate> {
    let rows = smoother_rows(data, k, h, points)?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("no evaluation points".into()));
    }
    Ok(SurfaceEstimate {
        dim: data.dim(),
        eval_points: points.to_vec(),
        values: rows.iter().map(|w| dot(w, values_at_data)).collect(),
        bandwidth: h.clone(),
        kernel: k.clone(),
    })
}

/// Local linear surface evaluated at a row-major point set.
pub fn local_linear_surface(
    data: &SpatialDataset,
    k: &KernelSpec,
    h: &BandwidthMatrix,
    points: &[f64],
) -> Result<SurfaceEstimate> {
    surface(data, data.responses(), k, h, points)
}

/// Smoothed parametric surface evaluated at a row-major point set.
pub fn smooth_parametric_surface(
    data: &SpatialDataset,
    fitted_values: &[f64],
    k: &KernelSpec,
    h: &BandwidthMatrix,
    points: &[f64],
) -> Result<SurfaceEstimate> {
    if fitted_values.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: fitted_values.len(),
        });
    }
    surface(data, fitted_values, k, h, points)
}
