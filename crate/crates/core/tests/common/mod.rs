//! Helpers shared by the integration suites. Oracles here are written
//! without the library's linear algebra so they can check it.
#![allow(dead_code)]

use spatial_gof::SpatialDataset;
use statrs::distribution::{Binomial, DiscreteCDF};

/// `side × side` grid on the unit square, endpoints included.
pub fn grid(side: usize, mut f: impl FnMut(f64, f64) -> f64) -> SpatialDataset {
    let step = 1.0 / (side - 1) as f64;
    let mut locs = Vec::with_capacity(2 * side * side);
    let mut z = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            let (x, y) = (i as f64 * step, j as f64 * step);
            locs.extend([x, y]);
            z.push(f(x, y));
        }
    }
    SpatialDataset::new(2, locs, z).unwrap()
}

pub fn inv2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// Cofactor inverse.
pub fn inv3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = cof[j][i] / det;
        }
    }
    out
}

/// `(X'WX)^{-1} X'WZ` for the linear model `1, x, y` with diagonal weights.
pub fn weighted_normal_equations(pts: &[[f64; 2]], z: &[f64], w: &[f64]) -> [f64; 3] {
    let mut xtx = [[0.0; 3]; 3];
    let mut xtz = [0.0; 3];
    for ((p, zi), wi) in pts.iter().zip(z).zip(w) {
        let row = [1.0, p[0], p[1]];
        for a in 0..3 {
            xtz[a] += wi * row[a] * zi;
            for b in 0..3 {
                xtx[a][b] += wi * row[a] * row[b];
            }
        }
    }
    let inv = inv3(xtx);
    let mut beta = [0.0; 3];
    for a in 0..3 {
        for b in 0..3 {
            beta[a] += inv[a][b] * xtz[b];
        }
    }
    beta
}

pub fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Central 95% acceptance region `[lo, hi]` of counts out of `trials` for a
/// binomial with success probability `p`, as proportions.
pub fn binomial_band(p: f64, trials: u64) -> (f64, f64) {
    let dist = Binomial::new(p, trials).unwrap();
    let quantile = |q: f64| (0..=trials).find(|&k| dist.cdf(k) >= q).unwrap_or(trials);
    (quantile(0.025) as f64 / trials as f64, quantile(0.975) as f64 / trials as f64)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
