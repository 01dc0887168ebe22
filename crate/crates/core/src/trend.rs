//! Polynomial trend surfaces and the iterative least squares estimator:
//! ordinary least squares, a variogram fit to its residuals, then generalized
//! least squares with the fitted error covariance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, dot, householder_r, LowerTriangular, SymMatrix};
use crate::smoothing::SpatialDataset;
use crate::variography::{
    covariance_matrix, default_max_lag, empirical_semivariogram, fit_variogram_wls, initial_model,
    EmpiricalVariogram, VariogramFamily, VariogramFit, VariogramModel, DEFAULT_BINS,
};

/// Polynomial surface of total degree `<= degree` in `dim` variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendModel {
    dim: usize,
    degree: usize,
    /// Exponent vectors in graded-lexicographic order.
    #[serde(skip)]
    monomials: Vec<Vec<u32>>,
}

impl TrendModel {
    pub fn polynomial(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("trend dimension must be >= 1".into()));
        }
        let mut monomials = Vec::new();
        for total in 0..=degree as u32 {
            let mut current = vec![0u32; dim];
            push_exponents(total, 0, &mut current, &mut monomials);
        }
        Ok(Self {
            dim,
            degree,
            monomials,
        })
    }

    /// The linear surface `β0 + β1 x1 + ... + βd xd`.
    pub fn linear(dim: usize) -> Self {
        Self::polynomial(dim, 1).expect("dim >= 1")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions `p`.
    pub fn basis_size(&self) -> usize {
        self.monomials.len()
    }

    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monomials
    }

    /// Basis row at one location.
    pub fn basis_row(&self, x: &[f64]) -> Vec<f64> {
        self.monomials
            .iter()
            .map(|e| e.iter().zip(x).map(|(p, v)| v.powi(*p as i32)).product())
            .collect()
    }
}

fn push_exponents(remaining: u32, axis: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[axis] = e;
        push_exponents(remaining - e, axis + 1, current, out);
    }
    current[axis] = 0;
}

/// Row-major `n × p` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), beta)).collect()
    }
}

/// Evaluates the basis at every location; columns follow [`TrendModel::monomials`].
pub fn design_matrix(model: &TrendModel, locations: &[f64]) -> Result<DesignMatrix> {
    let d = model.dim();
    if !locations.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: locations.len() % d,
        });
    }
    let n = locations.len() / d;
    let p = model.basis_size();
    if n < p {
        return Err(Error::DegenerateDesign(format!(
            "{n} locations cannot determine {p} coefficients"
        )));
    }
    let data: Vec<f64> = locations.chunks(d).flat_map(|x| model.basis_row(x)).collect();
    let design = DesignMatrix { rows: n, cols: p, data };
    check_rank(&design)?;
    Ok(design)
}

fn check_rank(design: &DesignMatrix) -> Result<()> {
    let (n, p) = (design.rows, design.cols);
    let mut scaled = design.data.clone();
    for j in 0..p {
        let norm = (0..n).map(|i| scaled[i * p + j].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateDesign(format!("basis column {j} is identically zero")));
        }
        for i in 0..n {
            scaled[i * p + j] /= norm;
        }
    }
    let r = householder_r(scaled, n, p);
    for j in 0..p {
        if r[j * p + j].abs() <= 1e-10 {
            return Err(Error::DegenerateDesign(format!(
                "design columns are numerically collinear (rank < {p})"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCoefficients {
    pub model: TrendModel,
    pub beta: Vec<f64>,
}

impl TrendCoefficients {
    /// `m_β(x)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        dot(&self.model.basis_row(x), &self.beta)
    }

    /// `m_β` at every location.
    pub fn fitted(&self, locations: &[f64]) -> Vec<f64> {
        locations.chunks(self.model.dim()).map(|x| self.evaluate(x)).collect()
    }
}

/// Least squares through a Householder factorization of `[X | z]`.
fn least_squares(design: &DesignMatrix, z: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = (design.rows, design.cols);
    let mut aug = Vec::with_capacity(n * (p + 1));
    for i in 0..n {
        aug.extend_from_slice(design.row(i));
        aug.push(z[i]);
    }
    let w = p + 1;
    let r = householder_r(aug, n, w);
    let diag_max = (0..p).fold(0.0_f64, |m, j| m.max(r[j * w + j].abs()));
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let rjj = r[j * w + j];
        if rjj.abs() <= 1e-13 * diag_max || rjj == 0.0 {
            return Err(Error::DegenerateDesign("rank-deficient least squares system".into()));
        }
        let mut s = r[j * w + p];
        for k in j + 1..p {
            s -= r[j * w + k] * beta[k];
        }
        beta[j] = s / rjj;
    }
    Ok(beta)
}

fn check_dataset(model: &TrendModel, data: &SpatialDataset) -> Result<()> {
    if model.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: data.dim(),
        });
    }
    Ok(())
}

/// Ordinary least squares `argmin (Z - Xβ)'(Z - Xβ)`.
pub fn ols_fit(model: &TrendModel, data: &SpatialDataset) -> Result<TrendCoefficients> {
    check_dataset(model, data)?;
    let design = design_matrix(model, data.locations())?;
    Ok(TrendCoefficients {
        model: model.clone(),
        beta: least_squares(&design, data.responses())?,
    })
}

/// Generalized least squares with a fixed error covariance, prefactored for
/// repeated fits on the same locations.
#[derive(Debug, Clone)]
pub struct GlsSolver {
    model: TrendModel,
    factor: LowerTriangular,
    whitened: DesignMatrix,
}

impl GlsSolver {
    pub fn new(model: &TrendModel, locations: &[f64], sigma: &SymMatrix) -> Result<Self> {
        let design = design_matrix(model, locations)?;
        Self::from_design(model, &design, sigma)
    }

    fn from_design(model: &TrendModel, design: &DesignMatrix, sigma: &SymMatrix) -> Result<Self> {
        if sigma.order() != design.rows {
            return Err(Error::DimensionMismatch {
                expected: design.rows,
                found: sigma.order(),
            });
        }
        let factor = cholesky(sigma)?;
        let (n, p) = (design.rows, design.cols);
        let mut whitened = vec![0.0; n * p];
        for j in 0..p {
            let col: Vec<f64> = (0..n).map(|i| design.data[i * p + j]).collect();
            for (i, v) in factor.solve_lower(&col).into_iter().enumerate() {
                whitened[i * p + j] = v;
            }
        }
        Ok(Self {
            model: model.clone(),
            factor,
            whitened: DesignMatrix {
                rows: n,
                cols: p,
                data: whitened,
            },
        })
    }

    /// Cholesky factor `L` of the covariance.
    pub fn factor(&self) -> &LowerTriangular {
        &self.factor
    }

    /// `argmin (z - Xβ)' Σ^{-1} (z - Xβ)` via `L^{-1}` whitening.
    pub fn fit(&self, z: &[f64]) -> Result<TrendCoefficients> {
        if z.len() != self.whitened.rows {
            return Err(Error::DimensionMismatch {
                expected: self.whitened.rows,
                found: z.len(),
            });
        }
        let zw = self.factor.solve_lower(z);
        Ok(TrendCoefficients {
            model: self.model.clone(),
            beta: least_squares(&self.whitened, &zw)?,
        })
    }
}

/// Generalized least squares `argmin (Z - Xβ)' Σ^{-1} (Z - Xβ)`.
pub fn gls_fit(model: &TrendModel, data: &SpatialDataset, sigma: &SymMatrix) -> Result<TrendCoefficients> {
    check_dataset(model, data)?;
    GlsSolver::new(model, data.locations(), sigma)?.fit(data.responses())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterConfig {
    /// Number of variogram/GLS passes; 1 is exactly OLS → variogram → GLS.
    pub passes: usize,
    /// Relative coefficient change below which further passes stop.
    pub beta_tol: f64,
    pub n_bins: usize,
    /// Largest lag binned; half the maximum pairwise distance when `None`.
    pub max_lag: Option<f64>,
}

impl Default for IterConfig {
    fn default() -> Self {
        Self {
            passes: 1,
            beta_tol: 1e-6,
            n_bins: DEFAULT_BINS,
            max_lag: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterativeFit {
    pub beta: TrendCoefficients,
    pub ols: TrendCoefficients,
    pub variogram: VariogramFit,
    /// Semivariogram the final variogram was fitted to.
    pub empirical: Option<EmpiricalVariogram>,
    /// `Σ_θ̂` used in the last GLS step.
    pub sigma: SymMatrix,
    pub passes_run: usize,
    /// Set when the least squares residuals vanish; no variogram is fitted and
    /// `Σ` is the identity.
    pub exact_fit: bool,
}

/// Whether residuals are zero up to rounding relative to the responses.
pub fn residuals_negligible(residuals: &[f64], responses: &[f64]) -> bool {
    let scale = responses.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rmax = residuals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    rmax <= 1e-10 * scale.max(f64::MIN_POSITIVE)
}

/// Fits a variogram of `family` to residuals at the given locations.
pub fn fit_residual_variogram(
    data: &SpatialDataset,
    residuals: &[f64],
    family: VariogramFamily,
    config: &IterConfig,
) -> Result<(EmpiricalVariogram, VariogramFit)> {
    let max_lag = config
        .max_lag
        .unwrap_or_else(|| default_max_lag(data.dim(), data.locations()));
    let emp = empirical_semivariogram(data.dim(), data.locations(), residuals, config.n_bins, max_lag)?;
    let start = initial_model(&emp, family)?;
    let fit = fit_variogram_wls(&emp, family, &start)?;
    Ok((emp, fit))
}

/// Iterative least squares: OLS, a weighted least squares variogram fit to
/// the OLS residuals, then GLS with `Σ_θ̂`. Further passes refit the
/// variogram to the latest GLS residuals.
pub fn iterative_fit(
    model: &TrendModel,
    data: &SpatialDataset,
    family: VariogramFamily,
    config: &IterConfig,
) -> Result<IterativeFit> {
    check_dataset(model, data)?;
    if config.passes == 0 {
        return Err(Error::InvalidInput("iterative fit needs at least one pass".into()));
    }
    let design = design_matrix(model, data.locations())?;
    let ols = TrendCoefficients {
        model: model.clone(),
        beta: least_squares(&design, data.responses())?,
    };
    let residual = |beta: &[f64]| -> Vec<f64> {
        data.responses()
            .iter()
            .zip(design.mul_vec(beta))
            .map(|(z, m)| z - m)
            .collect()
    };
    let mut resid = residual(&ols.beta);

    if residuals_negligible(&resid, data.responses()) {
        let model_v = VariogramModel::new(family, 1.0, 0.0, 1.0)?;
        return Ok(IterativeFit {
            beta: ols.clone(),
            ols,
            variogram: VariogramFit {
                model: model_v,
                objective: 0.0,
                converged: true,
                at_boundary: false,
            },
            empirical: None,
            sigma: SymMatrix::identity(data.len()),
            passes_run: 0,
            exact_fit: true,
        });
    }

    let mut beta = ols.clone();
    let mut last = None;
    for pass in 1..=config.passes {
        let (emp, vfit) = fit_residual_variogram(data, &resid, family, config)
            .map_err(|e| match e {
                Error::VariogramFitFailed(_) | Error::NoPairsInRange => e,
                other => Error::VariogramFitFailed(other.to_string()),
            })?;
        let sigma = covariance_matrix(&vfit.model, data.dim(), data.locations());
        let solver = GlsSolver::from_design(model, &design, &sigma)?;
        let next = solver.fit(data.responses())?;
        let change = next
            .beta
            .iter()
            .zip(&beta.beta)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = next.beta.iter().map(|v| v * v).sum::<f64>().sqrt();
        beta = next;
        resid = residual(&beta.beta);
        last = Some((emp, vfit, sigma, pass));
        if pass > 1 && change <= config.beta_tol * norm.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let (emp, vfit, sigma, passes_run) = last.expect("at least one pass");
    Ok(IterativeFit {
        beta,
        ols,
        variogram: vfit,
        empirical: Some(emp),
        sigma,
        passes_run,
        exact_fit: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(side: usize, f: impl Fn(f64, f64) -> f64) -> SpatialDataset {
        let mut locs = Vec::new();
        let mut z = Vec::new();
        for i in 0..side {
            for j in 0..side {
                let (x, y) = (i as f64 / (side - 1) as f64, j as f64 / (side - 1) as f64);
                locs.extend([x, y]);
                z.push(f(x, y));
            }
        }
        SpatialDataset::new(2, locs, z).unwrap()
    }

    #[test]
    fn basis_order_is_graded_lex() {
        let m = TrendModel::polynomial(2, 2).unwrap();
        assert_eq!(
            m.monomials(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(TrendModel::linear(2).basis_size(), 3);
        assert_eq!(TrendModel::polynomial(3, 2).unwrap().basis_size(), 10);
    }

    #[test]
    fn design_rows() {
        let m = TrendModel::linear(2);
        let d = design_matrix(&m, &[0.0, 0.0, 2.0, 3.0, 1.0, 5.0]).unwrap();
        assert_eq!(d.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(d.row(1), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn identical_locations_are_degenerate() {
        let m = TrendModel::linear(2);
        assert!(matches!(
            design_matrix(&m, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
            Err(Error::DegenerateDesign(_))
        ));
    }

    #[test]
    fn ols_exact_family_and_constant() {
        let data = grid(6, |x, y| 2.0 + x + y);
        let b = ols_fit(&TrendModel::linear(2), &data).unwrap();
        for (got, want) in b.beta.iter().zip([2.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
        let data = grid(6, |_, _| 7.0);
        let b = ols_fit(&TrendModel::linear(2), &data).unwrap();
        for (got, want) in b.beta.iter().zip([7.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
    }

    /// 3x3 inverse by cofactors.
    fn inv3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (r1, r2) = ((j + 1) % 3, (j + 2) % 3);
                let (c1, c2) = ((i + 1) % 3, (i + 2) % 3);
                out[i][j] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
            }
        }
        out
    }

    /// `(X' W X)^{-1} X' W z` for diagonal `W`.
    fn weighted_normal_equations(pts: &[[f64; 2]], z: &[f64], w: &[f64]) -> [f64; 3] {
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for ((p, zi), wi) in pts.iter().zip(z).zip(w) {
            let row = [1.0, p[0], p[1]];
            for r in 0..3 {
                b[r] += wi * row[r] * zi;
                for c in 0..3 {
                    a[r][c] += wi * row[r] * row[c];
                }
            }
        }
        let inv = inv3(a);
        let mut out = [0.0; 3];
        for r in 0..3 {
            out[r] = (0..3).map(|c| inv[r][c] * b[c]).sum();
        }
        out
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        let pts = [[0.0, 0.0], [1.0, 0.2], [0.3, 1.0], [0.8, 0.9], [0.5, 0.4]];
        let z = [1.0, 2.5, 0.7, 3.1, 1.9];
        let data = SpatialDataset::from_points(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>(), z.to_vec()).unwrap();
        let b = ols_fit(&TrendModel::linear(2), &data).unwrap();
        let oracle = weighted_normal_equations(&pts, &z, &[1.0; 5]);
        for (got, want) in b.beta.iter().zip(oracle) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn gls_matches_weighted_oracle() {
        let pts = [[0.0, 0.0], [1.0, 0.1], [0.2, 1.0], [0.9, 0.8]];
        let z = [1.0, 2.2, 0.4, 3.0];
        let data = SpatialDataset::from_points(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>(), z.to_vec()).unwrap();
        let sigma = SymMatrix::from_diagonal(&[1.0, 1.0, 4.0, 4.0]);
        let b = gls_fit(&TrendModel::linear(2), &data, &sigma).unwrap();
        let oracle = weighted_normal_equations(&pts, &z, &[1.0, 1.0, 0.25, 0.25]);
        for (got, want) in b.beta.iter().zip(oracle) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn gls_with_scaled_identity_is_ols() {
        let data = grid(5, |x, y| (x * 3.0).sin() + y * y);
        let m = TrendModel::linear(2);
        let ols = ols_fit(&m, &data).unwrap();
        for c in [1.0, 4.0] {
            let gls = gls_fit(&m, &data, &SymMatrix::identity(data.len()).scaled(c)).unwrap();
            for (a, b) in gls.beta.iter().zip(&ols.beta) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn ols_residuals_orthogonal() {
        let data = grid(7, |x, y| (x * 5.0).cos() * y + 0.3 * x * x);
        let m = TrendModel::polynomial(2, 2).unwrap();
        let b = ols_fit(&m, &data).unwrap();
        let fitted = b.fitted(data.locations());
        let r: Vec<f64> = data.responses().iter().zip(&fitted).map(|(z, f)| z - f).collect();
        let design = design_matrix(&m, data.locations()).unwrap();
        let znorm = data.responses().iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..m.basis_size() {
            let s: f64 = (0..data.len()).map(|i| design.row(i)[j] * r[i]).sum();
            assert!(s.abs() <= 1e-7 * znorm);
        }
    }

    #[test]
    fn noiseless_iterative_fit_is_exact() {
        let data = grid(8, |x, y| 2.0 + x + y);
        let fit = iterative_fit(&TrendModel::linear(2), &data, VariogramFamily::Exponential, &IterConfig::default()).unwrap();
        assert!(fit.exact_fit);
        for (got, want) in fit.beta.beta.iter().zip([2.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn single_pass_is_three_step_composition() {
        let data = grid(9, |x, y| 1.0 + x - y + 0.2 * ((13.0 * x).sin() * (7.0 * y).cos()));
        let m = TrendModel::linear(2);
        let cfg = IterConfig::default();
        let fit = iterative_fit(&m, &data, VariogramFamily::Spherical, &cfg).unwrap();

        let ols = ols_fit(&m, &data).unwrap();
        let fitted = ols.fitted(data.locations());
        let r: Vec<f64> = data.responses().iter().zip(&fitted).map(|(z, f)| z - f).collect();
        let (_, vfit) = fit_residual_variogram(&data, &r, VariogramFamily::Spherical, &cfg).unwrap();
        let sigma = covariance_matrix(&vfit.model, 2, data.locations());
        let gls = gls_fit(&m, &data, &sigma).unwrap();
        assert_eq!(fit.ols.beta, ols.beta);
        assert_eq!(fit.variogram.model, vfit.model);
        assert_eq!(fit.beta.beta, gls.beta);
        assert_eq!(fit.passes_run, 1);
    }

    #[test]
    fn dimension_checks() {
        let data = grid(4, |x, _| x);
        assert!(ols_fit(&TrendModel::linear(3), &data).is_err());
        let sigma = SymMatrix::identity(3);
        assert!(gls_fit(&TrendModel::linear(2), &data, &sigma).is_err());
    }
}
