use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of midpoint nodes per axis.
pub const DEFAULT_QUAD_POINTS: usize = 30;

/// Weight `w(x)` of the integrated squared difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightFunction {
    /// `w ≡ 1` on the integration domain.
    ConstantOne,
    /// Indicator of an axis-aligned box, given as `(lower, upper)` per axis.
    IndicatorBox(Vec<(f64, f64)>),
}

impl WeightFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::ConstantOne => 1.0,
            Self::IndicatorBox(b) => {
                let inside = b.iter().zip(x).all(|((lo, hi), v)| *lo <= *v && *v <= *hi);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Self::IndicatorBox(b) = self {
            if b.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.len(),
                });
            }
            if b.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
                return Err(Error::InvalidInput("weight box needs finite lower < upper on each axis".into()));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for WeightFunction {
    type Err = Error;

    /// `one`, or `box:x0,x1,y0,y1,...` with lower/upper pairs per axis.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("one") {
            return Ok(Self::ConstantOne);
        }
        let spec = s
            .strip_prefix("box:")
            .ok_or_else(|| Error::InvalidInput(format!("unknown weight '{s}', expected 'one' or 'box:x0,x1,y0,y1'")))?;
        let values = spec
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad number '{v}' in weight box")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() || values.len() % 2 != 0 {
            return Err(Error::InvalidInput("weight box needs lower,upper pairs".into()));
        }
        let b: Vec<(f64, f64)> = values.chunks(2).map(|p| (p[0], p[1])).collect();
        let w = Self::IndicatorBox(b);
        w.validate(values.len() / 2)?;
        Ok(w)
    }
}

/// Tensor midpoint rule on an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    domain: Vec<(f64, f64)>,
    points_per_axis: usize,
    /// Row-major `m × d` nodes, last axis varying fastest.
    nodes: Vec<f64>,
    node_weight: f64,
}

impl QuadratureGrid {
    pub fn midpoint(domain: Vec<(f64, f64)>, points_per_axis: usize) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::InvalidInput("quadrature domain needs at least one axis".into()));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidInput("quadrature needs at least 2 points per axis".into()));
        }
        if domain.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::InvalidInput("quadrature domain needs finite lower < upper on each axis".into()));
        }
        let d = domain.len();
        let axes: Vec<Vec<f64>> = domain
            .iter()
            .map(|(lo, hi)| {
                let step = (hi - lo) / points_per_axis as f64;
                (0..points_per_axis).map(|i| lo + (i as f64 + 0.5) * step).collect()
            })
            .collect();
        let m = points_per_axis.pow(d as u32);
        let mut nodes = Vec::with_capacity(m * d);
        let mut idx = vec![0usize; d];
        for _ in 0..m {
            for (a, &i) in idx.iter().enumerate() {
                nodes.push(axes[a][i]);
            }
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < points_per_axis {
                    break;
                }
                idx[a] = 0;
            }
        }
        let node_weight = domain
            .iter()
            .map(|(lo, hi)| (hi - lo) / points_per_axis as f64)
            .product();
        Ok(Self {
            domain,
            points_per_axis,
            nodes,
            node_weight,
        })
    }

    /// Midpoint grid on the bounding box of row-major `n × d` locations.
    pub fn bounding(dim: usize, locations: &[f64], points_per_axis: usize) -> Result<Self> {
        if dim == 0 || locations.is_empty() || !locations.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput("locations do not form an n × d array".into()));
        }
        let mut domain = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
        for x in locations.chunks(dim) {
            for (b, v) in domain.iter_mut().zip(x) {
                b.0 = b.0.min(*v);
                b.1 = b.1.max(*v);
            }
        }
        Self::midpoint(domain, points_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes[j * d..(j + 1) * d]
    }

    /// Cell volume attached to every node.
    pub fn node_weight(&self) -> f64 {
        self.node_weight
    }

    pub fn volume(&self) -> f64 {
        self.domain.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// `Σ_j f(x_j) · node_weight`.
    pub fn integrate(&self, f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.chunks(self.dim()).map(f).sum::<f64>() * self.node_weight
    }

    pub(crate) fn check_weight(&self, w: &WeightFunction) -> Result<()> {
        w.validate(self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn node_weights_sum_to_volume() {
        let q = QuadratureGrid::midpoint(vec![(0.0, 2.0), (-1.0, 0.5)], 7).unwrap();
        assert_eq!(q.len(), 49);
        assert_abs_diff_eq!(q.node_weight() * q.len() as f64, q.volume(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.volume(), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn nodes_are_cell_midpoints_in_order() {
        let q = QuadratureGrid::midpoint(vec![(0.0, 1.0), (0.0, 1.0)], 2).unwrap();
        assert_eq!(q.nodes(), &[0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75]);
    }

    #[test]
    fn midpoint_integrates_quadratics_accurately() {
        let q = QuadratureGrid::midpoint(vec![(0.0, 1.0), (0.0, 1.0)], 30).unwrap();
        let v = q.integrate(|x| x[0] * x[0] + x[1]);
        // Midpoint error for x^2 on n cells is -1/(12 n^2).
        assert_abs_diff_eq!(v, 1.0 / 3.0 + 0.5 - 1.0 / (12.0 * 900.0), epsilon = 1e-12);
    }

    #[test]
    fn bounding_box_grid() {
        let q = QuadratureGrid::bounding(2, &[0.0, 1.0, 2.0, 3.0, 1.0, 2.0], 3).unwrap();
        assert_eq!(q.domain(), &[(0.0, 2.0), (1.0, 3.0)]);
    }

    #[test]
    fn invalid_grids() {
        assert!(QuadratureGrid::midpoint(vec![(0.0, 1.0)], 1).is_err());
        assert!(QuadratureGrid::midpoint(vec![(1.0, 1.0)], 4).is_err());
    }

    #[test]
    fn weight_parsing_and_values() {
        assert_eq!("one".parse::<WeightFunction>().unwrap(), WeightFunction::ConstantOne);
        let w: WeightFunction = "box:0.1,0.9,0.2,0.8".parse().unwrap();
        assert_eq!(w.eval(&[0.5, 0.5]), 1.0);
        assert_eq!(w.eval(&[0.05, 0.5]), 0.0);
        assert!("box:0.1,0.9,0.2".parse::<WeightFunction>().is_err());
        assert!("box:0.9,0.1".parse::<WeightFunction>().is_err());
        assert!("triangle".parse::<WeightFunction>().is_err());
    }
}
