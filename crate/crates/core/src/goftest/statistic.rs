use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{BandwidthMatrix, KernelSpec};
use crate::numerics::{dot, householder_r};
use crate::smoothing::{smoother_weights_at, SpatialDataset};

use super::quadrature::{QuadratureGrid, WeightFunction};

fn check_inputs(data: &SpatialDataset, k: &KernelSpec, h: &BandwidthMatrix, w: &WeightFunction, q: &QuadratureGrid) -> Result<()> {
    for found in [k.dim(), h.dim(), q.dim()] {
        if found != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                found,
            });
        }
    }
    q.check_weight(w)
}

/// Smoother rows at the positive-weight nodes, each with its node factor
/// `w(x) · node_weight`.
fn weighted_rows(
    data: &SpatialDataset,
    k: &KernelSpec,
    h: &BandwidthMatrix,
    w: &WeightFunction,
    q: &QuadratureGrid,
) -> Result<Vec<(Vec<f64>, f64)>> {
    check_inputs(data, k, h, w, q)?;
    let active: Vec<(usize, f64)> = (0..q.len())
        .filter_map(|j| {
            let wx = w.eval(q.node(j));
            (wx > 0.0).then_some((j, wx * q.node_weight()))
        })
        .collect();
    active
        .par_iter()
        .map(|&(j, factor)| smoother_weights_at(data, k, h, q.node(j)).map(|row| (row, factor)))
        .collect()
}

/// `T_n = n |H|^{1/2} Σ_nodes (m̂(x) - m̂_β̂(x))^2 w(x) node_weight`, with the
/// nonparametric and smoothed parametric surfaces sharing each node's
/// smoother row.
pub fn compute_tn(
    data: &SpatialDataset,
    fitted_parametric: &[f64],
    k: &KernelSpec,
    h: &BandwidthMatrix,
    w: &WeightFunction,
    q: &QuadratureGrid,
) -> Result<f64> {
    if fitted_parametric.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: fitted_parametric.len(),
        });
    }
    let rows = weighted_rows(data, k, h, w, q)?;
    let sum: f64 = rows
        .iter()
        .map(|(row, factor)| {
            let diff = dot(row, data.responses()) - dot(row, fitted_parametric);
            diff * diff * factor
        })
        .sum();
    Ok(data.len() as f64 * h.sqrt_det() * sum)
}

#[derive(Debug, Clone)]
enum Form {
    /// Scaled smoother rows, `m × n`.
    Rows(Vec<f64>),
    /// Upper triangular `R` of the scaled rows, `n × n`.
    Triangular(Vec<f64>),
}

/// `T_n` as a quadratic form in the residual vector `δ = Z - m_β̂(X)`:
/// `T_n = ||A δ||^2` where row `j` of `A` is the smoother row at node `j`
/// scaled by `sqrt(n |H|^{1/2} w(x_j) node_weight)`.
///
/// Depends only on the locations, so one operator serves every response
/// vector observed at the same design. When there are at least as many nodes
/// as observations, `A` is replaced by the `R` factor of its QR decomposition,
/// which preserves `||A δ||` and costs `n^2 / 2` per evaluation.
#[derive(Debug, Clone)]
pub struct StatisticOperator {
    n: usize,
    bandwidth: BandwidthMatrix,
    form: Form,
}

impl StatisticOperator {
    pub fn new(
        data: &SpatialDataset,
        k: &KernelSpec,
        h: &BandwidthMatrix,
        w: &WeightFunction,
        q: &QuadratureGrid,
    ) -> Result<Self> {
        let n = data.len();
        let rows = weighted_rows(data, k, h, w, q)?;
        let scale = n as f64 * h.sqrt_det();
        let m = rows.len();
        let mut a = Vec::with_capacity(m * n);
        for (row, factor) in &rows {
            let s = (scale * factor).sqrt();
            a.extend(row.iter().map(|v| v * s));
        }
        let form = if m >= n {
            Form::Triangular(householder_r(a, m, n))
        } else {
            Form::Rows(a)
        };
        Ok(Self {
            n,
            bandwidth: h.clone(),
            form,
        })
    }

    pub fn bandwidth(&self) -> &BandwidthMatrix {
        &self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `||A δ||^2`.
    pub fn value(&self, delta: &[f64]) -> Result<f64> {
        if delta.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: delta.len(),
            });
        }
        let n = self.n;
        let s = match &self.form {
            Form::Rows(a) => a.chunks(n).map(|r| dot(r, delta).powi(2)).sum(),
            Form::Triangular(r) => (0..n).map(|i| dot(&r[i * n + i..(i + 1) * n], &delta[i..]).powi(2)).sum(),
        };
        Ok(s)
    }
}
