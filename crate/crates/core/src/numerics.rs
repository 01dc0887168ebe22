//! Dense linear algebra and a bounded Nelder–Mead minimizer.
//!
//! Everything here is dense and row-major. The largest systems in practice are
//! error covariance matrices of order n (a few thousand at most), so a
//! cache-aware Cholesky is all that is needed.

use crate::error::{Error, Result};

/// Relative pivot floor: a Cholesky pivot at or below `PIVOT_FLOOR * trace / order`
/// is treated as a loss of positive definiteness.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Ridge scale recommended for callers who opt into regularization,
/// relative to `trace / order`.
pub const RIDGE_SCALE: f64 = 1e-8;

/// Symmetric matrix with full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.data[i * order + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = *d;
        }
        m
    }

    /// Builds a matrix from row-major entries, checking symmetry within
    /// `1e-12` relative to the largest entry.
    pub fn from_row_major(order: usize, data: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("matrix order must be positive".into()));
        }
        if data.len() != order * order {
            return Err(Error::DimensionMismatch {
                expected: order * order,
                found: data.len(),
            });
        }
        let scale = data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..order {
            for j in 0..i {
                let (a, b) = (data[i * order + j], data[j * order + i]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { order, data })
    }

    /// Builds a symmetric matrix by evaluating `f(i, j)` on the lower triangle.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * order + j] = v;
                m.data[j * order + i] = v;
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            order: self.order,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Adds `ridge` to every diagonal entry.
    pub fn add_ridge(&mut self, ridge: f64) {
        for i in 0..self.order {
            self.data[i * self.order + i] += ridge;
        }
    }

    /// The explicit regularization amount `RIDGE_SCALE * trace / order`.
    pub fn default_ridge(&self) -> f64 {
        RIDGE_SCALE * self.trace() / self.order as f64
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.order);
        (0..self.order).map(|i| dot(self.row(i), x)).collect()
    }
}

/// Lower-triangular factor with full row-major storage (zeros above the diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    order: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    /// Nonzero part of row `i`, i.e. columns `0..=i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..i * self.order + i + 1]
    }

    pub fn identity(order: usize) -> Self {
        let mut data = vec![0.0; order * order];
        for i in 0..order {
            data[i * order + i] = 1.0;
        }
        Self { order, data }
    }

    /// `L · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.order);
        (0..self.order).map(|i| dot(self.row(i), &x[..=i])).collect()
    }

    /// `L · L'` as a symmetric matrix.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::from_fn(self.order, |i, j| {
            let k = i.min(j) + 1;
            dot(&self.row(i)[..k], &self.row(j)[..k])
        })
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.order);
        let mut y = Vec::with_capacity(self.order);
        for i in 0..self.order {
            let r = self.row(i);
            let s = b[i] - dot(&r[..i], &y);
            y.push(s / r[i]);
        }
        y
    }

    /// Solves `L' x = y` by back substitution.
    pub fn solve_upper_transposed(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.order);
        let n = self.order;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.get(i, i);
            let xi = x[i];
            let r = self.row(i);
            for (xk, lik) in x[..i].iter_mut().zip(&r[..i]) {
                *xk -= lik * xi;
            }
        }
        x
    }

    /// Solves `(L L') x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper_transposed(&self.solve_lower(b))
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0_f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

const CHOLESKY_BATCH: usize = 8;

/// Cholesky factorization `a = L L'`.
///
/// Fails with [`Error::NotPositiveDefinite`] when a pivot drops to or below
/// `PIVOT_FLOOR * trace(a) / order`; no regularization is applied here.
pub fn cholesky(a: &SymMatrix) -> Result<LowerTriangular> {
    let n = a.order;
    let floor = PIVOT_FLOOR * a.trace() / n as f64;
    let mut l = vec![0.0; n * n];

    // Row-oriented (Crout) factorization. Rows are processed in small batches
    // so each finished row is streamed from memory once per batch.
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + CHOLESKY_BATCH).min(n);
        let (done, batch) = l.split_at_mut(i0 * n);
        for j in 0..i0 {
            let lj = &done[j * n..j * n + j];
            let djj = done[j * n + j];
            for i in i0..i1 {
                let li = &mut batch[(i - i0) * n..(i - i0) * n + j + 1];
                let s = a.get(i, j) - dot(&li[..j], lj);
                li[j] = s / djj;
            }
        }
        for i in i0..i1 {
            for j in i0..=i {
                let (head, tail) = batch.split_at_mut((i - i0) * n);
                let li = &mut tail[..j + 1];
                let lj: &[f64] = if j == i {
                    &[]
                } else {
                    &head[(j - i0) * n..(j - i0) * n + j + 1]
                };
                if j == i {
                    let s = a.get(i, i) - dot(&li[..i], &li[..i]);
                    if !(s > floor) {
                        return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                    }
                    li[i] = s.sqrt();
                } else {
                    let s = a.get(i, j) - dot(&li[..j], &lj[..j]);
                    li[j] = s / lj[j];
                }
            }
        }
        i0 = i1;
    }
    Ok(LowerTriangular { order: n, data: l })
}

/// Solves `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn spd_solve(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.order {
        return Err(Error::DimensionMismatch {
            expected: a.order,
            found: b.len(),
        });
    }
    Ok(cholesky(a)?.solve(b))
}

/// Upper-triangular factor `R` of a Householder QR of the `rows × cols`
/// row-major matrix `a`, returned as `min(rows, cols) × cols` row-major.
/// `‖R x‖ = ‖A x‖` for every `x`.
pub fn householder_r(mut a: Vec<f64>, rows: usize, cols: usize) -> Vec<f64> {
    assert_eq!(a.len(), rows * cols);
    let k = rows.min(cols);
    // Work column-major for contiguous Householder updates.
    let mut c = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            c[j * rows + i] = a[i * cols + j];
        }
    }
    let mut v = vec![0.0; rows];
    for j in 0..k {
        let col = &c[j * rows..(j + 1) * rows];
        let norm = dot(&col[j..], &col[j..]).sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        v[j..].copy_from_slice(&col[j..]);
        v[j] -= alpha;
        let vnorm2 = dot(&v[j..], &v[j..]);
        if vnorm2 == 0.0 {
            continue;
        }
        for jj in j..cols {
            let cc = &mut c[jj * rows..(jj + 1) * rows];
            let f = 2.0 * dot(&v[j..], &cc[j..]) / vnorm2;
            for (x, vi) in cc[j..].iter_mut().zip(&v[j..]) {
                *x -= f * vi;
            }
        }
    }
    a.clear();
    a.resize(k * cols, 0.0);
    for i in 0..k {
        for j in i..cols {
            a[i * cols + j] = c[j * rows + i];
        }
    }
    a
}

/// Axis-aligned box constraint for [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInput("bounds require lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// `false` when `max_iter` was reached before the tolerance test passed;
    /// `point` is then the best vertex seen so far.
    pub converged: bool,
}

/// Derivative-free simplex minimization inside a box.
///
/// Proposals outside `bounds` are clamped to the box. Terminates when the
/// spread of objective values over the simplex and the simplex radius are
/// both below `tol`, or after `max_iter` iterations.
pub fn nelder_mead<F>(
    mut objective: F,
    start: &[f64],
    bounds: &Bounds,
    tol: f64,
    max_iter: usize,
) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let q = start.len();
    if q == 0 || bounds.dim() != q {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            found: q,
        });
    }
    if !bounds.contains(start) {
        return Err(Error::InvalidInput(format!(
            "start point {start:?} lies outside the bounds"
        )));
    }
    let mut eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(q + 1);
    simplex.push(start.to_vec());
    for j in 0..q {
        let mut p = start.to_vec();
        let (l, u) = (bounds.lower[j], bounds.upper[j]);
        let step = if l.is_finite() && u.is_finite() {
            0.1 * (u - l)
        } else if start[j] != 0.0 {
            0.05 * start[j].abs()
        } else {
            0.00025
        };
        p[j] += step;
        if p[j] > u {
            p[j] = start[j] - step;
        }
        bounds.clamp(&mut p);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
    let start_value = values[0];

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=q).collect();
    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[q];
        let spread = values[worst] - values[best];
        let radius = simplex
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[best])
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0_f64, f64::max);
        if spread.abs() <= tol && radius <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; q];
        for &idx in &order[..q] {
            for (c, v) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += v / q as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            bounds.clamp(&mut p);
            p
        };

        let reflected = along(alpha);
        let fr = eval(&reflected);
        let second_worst = values[order[q - 1]];
        if fr < values[best] {
            let expanded = along(gamma);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < second_worst {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[worst] {
            let p = along(rho);
            let f = eval(&p);
            (p, f)
        } else {
            let p = along(-rho);
            let f = eval(&p);
            (p, f)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            let p: Vec<f64> = simplex[idx]
                .iter()
                .zip(&anchor)
                .map(|(x, b)| b + sigma * (x - b))
                .collect();
            values[idx] = eval(&p);
            simplex[idx] = p;
        }
    }

    let best = (0..=q)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("simplex is nonempty");
    let (point, value) = if values[best] <= start_value {
        (simplex[best].clone(), values[best])
    } else {
        (start.to_vec(), start_value)
    };
    Ok(NelderMeadResult {
        point,
        value,
        iterations,
        converged,
    })
}
