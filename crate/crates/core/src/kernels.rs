//! Kernel densities, diagonal bandwidth matrices and the self-convolution
//! constants `K^(2)(0)` and `K^(4)(0)` used by the asymptotic approximation.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TRIWEIGHT_NORM: f64 = 35.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// Product of univariate triweights `(35/32)(1 - u^2)^3` on `[-1, 1]`.
    MultiplicativeTriweight,
    /// Standard multivariate normal density.
    Gaussian,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "triweight" | "multiplicative-triweight" => Ok(Self::MultiplicativeTriweight),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            other => Err(Error::InvalidInput(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A `d`-dimensional kernel together with its precomputed self-convolution
/// constants.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    k2_zero: f64,
    k4_zero: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("kernel dimension must be >= 1".into()));
        }
        let d = dim as i32;
        let (k2_zero, k4_zero) = match family {
            KernelFamily::Gaussian => ((4.0 * PI).powf(-0.5 * dim as f64), (8.0 * PI).powf(-0.5 * dim as f64)),
            KernelFamily::MultiplicativeTriweight => {
                let c = triweight_convolutions();
                (c.k2_zero.powi(d), c.k4_zero.powi(d))
            }
        };
        Ok(Self {
            family,
            dim,
            k2_zero,
            k4_zero,
        })
    }

    pub fn triweight(dim: usize) -> Self {
        Self::new(KernelFamily::MultiplicativeTriweight, dim).expect("dim >= 1")
    }

    pub fn gaussian(dim: usize) -> Self {
        Self::new(KernelFamily::Gaussian, dim).expect("dim >= 1")
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Half-width of the support along each axis, `None` for unbounded support.
    pub fn support_radius(&self) -> Option<f64> {
        match self.family {
            KernelFamily::MultiplicativeTriweight => Some(1.0),
            KernelFamily::Gaussian => None,
        }
    }

    /// `K(u)`.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u.len(),
            });
        }
        Ok(self.eval_unchecked(u))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, u: &[f64]) -> f64 {
        match self.family {
            KernelFamily::MultiplicativeTriweight => {
                let mut v = 1.0;
                for &x in u {
                    if x.abs() > 1.0 {
                        return 0.0;
                    }
                    let t = 1.0 - x * x;
                    v *= TRIWEIGHT_NORM * t * t * t;
                }
                v
            }
            KernelFamily::Gaussian => {
                let r2: f64 = u.iter().map(|x| x * x).sum();
                (2.0 * PI).powf(-0.5 * self.dim as f64) * (-0.5 * r2).exp()
            }
        }
    }

    /// `K_H(x) = |H|^{-1} K(H^{-1} x)`.
    pub fn eval_scaled(&self, h: &BandwidthMatrix, x: &[f64]) -> Result<f64> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: h.dim(),
            });
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let u: Vec<f64> = x.iter().zip(h.diagonal()).map(|(xi, hi)| xi / hi).collect();
        Ok(self.eval_unchecked(&u) / h.det())
    }

    /// `K^(j)(0)`, the `j`-fold convolution of `K` with itself at the origin,
    /// for `j` in {2, 4}.
    pub fn self_convolution_at_zero(&self, j: u32) -> Result<f64> {
        match j {
            2 => Ok(self.k2_zero),
            4 => Ok(self.k4_zero),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }
}

/// Diagonal positive-definite bandwidth matrix `H = diag(h_1, ..., h_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthMatrix {
    diagonal: Vec<f64>,
}

impl BandwidthMatrix {
    pub fn diagonal_from(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::InvalidInput("bandwidth needs at least one entry".into()));
        }
        if diagonal.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "bandwidth entries must be finite and positive, got {diagonal:?}"
            )));
        }
        Ok(Self { diagonal })
    }

    /// Scalar bandwidth `h I_d`.
    pub fn scalar(h: f64, dim: usize) -> Result<Self> {
        Self::diagonal_from(vec![h; dim])
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `|H|`.
    pub fn det(&self) -> f64 {
        self.diagonal.iter().product()
    }

    /// `|H|^{1/2}`.
    pub fn sqrt_det(&self) -> f64 {
        self.det().sqrt()
    }
}

impl std::fmt::Display for BandwidthMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "diag(")?;
        for (i, h) in self.diagonal.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{h}")?;
        }
        write!(f, ")")
    }
}

struct TriweightConvolutions {
    k2_zero: f64,
    k4_zero: f64,
}

fn univariate_triweight(u: f64) -> f64 {
    if u.abs() > 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u;
        TRIWEIGHT_NORM * t * t * t
    }
}

/// Composite Simpson rule on `[a, b]` with `2 * half_panels` panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, half_panels: usize) -> f64 {
    let m = 2 * half_panels;
    if m == 0 || b <= a {
        return 0.0;
    }
    let step = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * step);
    }
    s * step / 3.0
}

/// Univariate triweight self-convolutions by numeric convolution on a grid of
/// step 1/1024, computed once per process.
fn triweight_convolutions() -> &'static TriweightConvolutions {
    static CACHE: OnceLock<TriweightConvolutions> = OnceLock::new();
    CACHE.get_or_init(|| {
        const PER_UNIT: usize = 1024;
        // (k * k)(t) for t in [0, 2]: the integrand is a single polynomial on
        // [t - 1, 1], so Simpson is accurate far beyond the needed tolerance.
        let k2 = |t: f64| {
            let t = t.abs();
            let (a, b) = (t - 1.0, 1.0);
            let panels = (((b - a) * PER_UNIT as f64 / 2.0).ceil() as usize).max(1);
            simpson(|s| univariate_triweight(s) * univariate_triweight(t - s), a, b, panels)
        };
        let k2_zero = k2(0.0);
        // K^(4)(0) = (K2 * K2)(0) = ∫ K2(t)^2 dt, and K2 is even.
        let k4_zero = 2.0 * simpson(|t| k2(t).powi(2), 0.0, 2.0, PER_UNIT);
        TriweightConvolutions { k2_zero, k4_zero }
    })
}
