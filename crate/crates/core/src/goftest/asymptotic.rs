use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{BandwidthMatrix, KernelFamily, KernelSpec};

use super::quadrature::{QuadratureGrid, WeightFunction};

/// A real function on `R^d`.
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Design density `f` entering the bias and variance.
#[derive(Clone)]
pub enum DesignDensity {
    /// `f = 1 / volume(D)` on the quadrature domain.
    UniformOnDomain,
    Known(ScalarField),
    /// Fixed design: `f ≡ 1`.
    Fixed,
}

impl fmt::Debug for DesignDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UniformOnDomain => write!(f, "UniformOnDomain"),
            Self::Known(_) => write!(f, "Known(..)"),
            Self::Fixed => write!(f, "Fixed"),
        }
    }
}

#[derive(Clone)]
pub struct AsymptoticInputs {
    /// Error variance `σ^2`.
    pub sigma2: f64,
    /// `ρ_c = lim n ∫ ρ_n(x) dx`.
    pub rho_c: f64,
    pub density: DesignDensity,
    /// Deviation `g` of the local alternative `m = m_β + c_n g`; `None` under
    /// the null.
    pub g_dev: Option<ScalarField>,
}

impl fmt::Debug for AsymptoticInputs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsymptoticInputs")
            .field("sigma2", &self.sigma2)
            .field("rho_c", &self.rho_c)
            .field("density", &self.density)
            .field("g_dev", &self.g_dev.as_ref().map(|_| ".."))
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticConstants {
    pub b0: f64,
    pub b1: f64,
    pub v: f64,
}

/// Midpoint nodes per axis for the convolution `K_H * g`.
const CONVOLUTION_POINTS: usize = 40;
/// Truncation of the Gaussian kernel in standard deviations.
const GAUSSIAN_CUTOFF: f64 = 6.0;

/// `(K_H * g)(x) = ∫ K(u) g(x - H u) du`.
fn smoothed_deviation(k: &KernelSpec, h: &BandwidthMatrix, g: &ScalarField, x: &[f64], u_grid: &QuadratureGrid) -> f64 {
    let mut y = vec![0.0; x.len()];
    u_grid.integrate(|u| {
        for ((yi, xi), (ui, hi)) in y.iter_mut().zip(x).zip(u.iter().zip(h.diagonal())) {
            *yi = xi - hi * ui;
        }
        k.eval_unchecked(u) * g(&y)
    })
}

/// Bias `b_0H`, local-alternative bias `b_1H` and variance `V` of `T_n`:
///
/// `b0 = |H|^{-1/2} σ^2 K2(0) [∫ w/f + ρ_c ∫ w]`,
/// `b1 = ∫ (K_H * g)^2 w`,
/// `V = 2 σ^4 K4(0) [∫ w^2/f^2 + 2 ρ_c ∫ w^2/f + 4 ρ_c^2 ∫ w^2]`,
/// integrated over the quadrature domain.
pub fn asymptotic_constants(
    inputs: &AsymptoticInputs,
    k: &KernelSpec,
    h: &BandwidthMatrix,
    w: &WeightFunction,
    q: &QuadratureGrid,
) -> Result<AsymptoticConstants> {
    for found in [h.dim(), q.dim()] {
        if found != k.dim() {
            return Err(Error::DimensionMismatch {
                expected: k.dim(),
                found,
            });
        }
    }
    q.check_weight(w)?;
    if !(inputs.sigma2 > 0.0 && inputs.sigma2.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma2 must be positive, got {}", inputs.sigma2)));
    }
    if !(inputs.rho_c >= 0.0 && inputs.rho_c.is_finite()) {
        return Err(Error::InvalidInput(format!("rho_c must be nonnegative, got {}", inputs.rho_c)));
    }
    let uniform = 1.0 / q.volume();
    let mut density_error = None;
    let density = |x: &[f64]| -> f64 {
        match &inputs.density {
            DesignDensity::UniformOnDomain => uniform,
            DesignDensity::Fixed => 1.0,
            DesignDensity::Known(f) => f(x),
        }
    };
    // [∫w/f, ∫w, ∫w²/f², ∫w²/f, ∫w²]
    let mut sums = [0.0; 5];
    for j in 0..q.len() {
        let x = q.node(j);
        let wx = w.eval(x);
        if wx == 0.0 {
            continue;
        }
        let f = density(x);
        if !(f > 0.0 && f.is_finite()) {
            density_error.get_or_insert_with(|| x.to_vec());
            continue;
        }
        sums[0] += wx / f;
        sums[1] += wx;
        sums[2] += wx * wx / (f * f);
        sums[3] += wx * wx / f;
        sums[4] += wx * wx;
    }
    if let Some(x) = density_error {
        return Err(Error::InvalidInput(format!("design density is not positive at {x:?}")));
    }
    let nw = q.node_weight();
    let [iwf, iw, iw2f2, iw2f, iw2] = sums.map(|s| s * nw);
    let (s2, rho) = (inputs.sigma2, inputs.rho_c);
    let k2 = k.self_convolution_at_zero(2)?;
    let k4 = k.self_convolution_at_zero(4)?;
    let b0 = s2 * k2 * (iwf + rho * iw) / h.sqrt_det();
    let v = 2.0 * s2 * s2 * k4 * (iw2f2 + 2.0 * rho * iw2f + 4.0 * rho * rho * iw2);

    let b1 = match &inputs.g_dev {
        None => 0.0,
        Some(g) => {
            let radius = match k.family() {
                KernelFamily::MultiplicativeTriweight => 1.0,
                KernelFamily::Gaussian => GAUSSIAN_CUTOFF,
            };
            let u_grid = QuadratureGrid::midpoint(vec![(-radius, radius); k.dim()], CONVOLUTION_POINTS)?;
            q.integrate(|x| {
                let wx = w.eval(x);
                if wx == 0.0 {
                    0.0
                } else {
                    smoothed_deviation(k, h, g, x, &u_grid).powi(2) * wx
                }
            })
        }
    };
    Ok(AsymptoticConstants { b0, b1, v })
}

/// `(t_n - b0 - b1) / sqrt(v)`.
pub fn standardized_statistic(t_n: f64, constants: &AsymptoticConstants) -> Result<f64> {
    if !(constants.v > 0.0) {
        return Err(Error::NonpositiveVariance(constants.v));
    }
    Ok((t_n - constants.b0 - constants.b1) / constants.v.sqrt())
}
