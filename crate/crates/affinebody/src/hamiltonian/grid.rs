//! Tensor grids over deformation invariants and the Jacobi chamber coordinates.
//!
//! Axis `a` has nodes `x_i = min + (i + offset) h`, `h = (max - min)/(points - 1 + 2 offset)`.
//! `offset = 1/2` is cell-centred (walls on cell faces), `offset = 1` is vertex-interior
//! (walls on the first missing vertex).
//!
//! Jacobi coordinates `ξ = (q, y_1, …, y_{n-1})` with `q` the mean of the invariants and
//! `y_k = mean(q¹…q^k) - q^{k+1}` diagonalize the flat Laplacian:
//! `Σ_a ∂²/∂(q^a)² = (1/n) ∂²_q + Σ_k ((k+1)/k) ∂²_{y_k}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Axis { min, max, points }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    pub offset: f64,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>, offset: f64) -> Result<Self> {
        let g = GridSpec { axes, offset };
        g.validate()?;
        Ok(g)
    }

    pub fn cell_centered(axes: Vec<Axis>) -> Result<Self> {
        Self::new(axes, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return invalid("grid needs at least one axis");
        }
        if !(self.offset > 0.0 && self.offset <= 1.0) {
            return invalid(format!("grid offset {} outside (0, 1]", self.offset));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if a.points < 5 {
                return invalid(format!("axis {i}: {} points, need at least 5", a.points));
            }
            if !(a.max > a.min) || !a.min.is_finite() || !a.max.is_finite() {
                return invalid(format!("axis {i}: empty or non-finite range [{}, {}]", a.min, a.max));
            }
        }
        Ok(())
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        (a.max - a.min) / (a.points as f64 - 1.0 + 2.0 * self.offset)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.axes[axis].min + (i as f64 + self.offset) * self.spacing(axis)
    }

    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.axes[axis].points).map(|i| self.coord(axis, i)).collect()
    }

    /// Product of spacings.
    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim()).map(|a| self.spacing(a)).product()
    }

    /// Row-major multi-index (last axis fastest).
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.ndim()];
        for a in (0..self.ndim()).rev() {
            let p = self.axes[a].points;
            out[a] = idx % p;
            idx /= p;
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.points + i)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.points).product()
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx).iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    /// Same grid with `points` scaled on every axis.
    pub fn refined(&self, factor: f64) -> GridSpec {
        let axes = self
            .axes
            .iter()
            .map(|a| Axis { points: ((a.points as f64) * factor).round() as usize, ..*a })
            .collect();
        GridSpec { axes, offset: self.offset }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.axes.iter().map(|a| format!("{}:{}:{}", a.min, a.max, a.points)).collect();
        write!(f, "{}", parts.join(","))?;
        if self.offset != 0.5 {
            write!(f, "@{}", self.offset)?;
        }
        Ok(())
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `"min:max:points,min:max:points"`, optionally suffixed by `@offset`.
    fn from_str(s: &str) -> Result<Self> {
        let (body, offset) = match s.split_once('@') {
            Some((b, o)) => (b, o.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad grid offset {o:?}")))?),
            None => (s, 0.5),
        };
        let axes = body
            .split(',')
            .map(|ax| {
                let f: Vec<&str> = ax.split(':').map(str::trim).collect();
                let bad = || Error::Parse(format!("bad grid axis {ax:?}, expected min:max:points"));
                if f.len() != 3 {
                    return Err(bad());
                }
                Ok(Axis {
                    min: f[0].parse().map_err(|_| bad())?,
                    max: f[1].parse().map_err(|_| bad())?,
                    points: f[2].parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GridSpec::new(axes, offset)
    }
}

/// Laplacian coefficients of the Jacobi axes: `1/n` for `q`, `(k+1)/k` for `y_k`.
pub fn jacobi_laplacian_coefficients(n: usize) -> Vec<f64> {
    let mut c = vec![1.0 / n as f64];
    c.extend((1..n).map(|k| (k as f64 + 1.0) / k as f64));
    c
}

/// Invariants `q^a` from Jacobi coordinates `(q, y_1, …, y_{n-1})`.
pub fn jacobi_to_invariants(xi: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let mut out = vec![0.0; n];
    // running mean m_k of the first k invariants, m_n = q
    let mut mean = xi[0];
    for k in (1..n).rev() {
        let mk = mean + xi[k] / (k as f64 + 1.0);
        out[k] = mk - xi[k];
        mean = mk;
    }
    out[0] = mean;
    out
}

pub fn invariants_to_jacobi(q: &[f64]) -> Vec<f64> {
    let n = q.len();
    let mut out = vec![0.0; n];
    let mut sum = 0.0;
    for k in 1..n {
        sum += q[k - 1];
        out[k] = sum / k as f64 - q[k];
    }
    out[0] = (sum + q[n - 1]) / n as f64;
    out
}

/// `|det ∂q/∂ξ|` for the Jacobi map.
pub fn jacobi_volume_factor(n: usize) -> f64 {
    // the rows of ∂ξ/∂q are orthogonal with squared norms c_i
    1.0 / jacobi_laplacian_coefficients(n).iter().map(|c| c.sqrt()).product::<f64>()
}

/// Grid on the traceless hyperplane `Σ q^a = 0`: the shear axes of `grid`
/// (Jacobi axes `y_1 … y_{n-1}`), dropping the dilatation axis.
pub fn sl_constraint_project(grid: &GridSpec, n: usize) -> Result<GridSpec> {
    if n < 2 {
        return invalid("the SL constraint needs n >= 2");
    }
    if grid.ndim() != n {
        return Err(Error::Dimension(format!("grid has {} axes, expected {n}", grid.ndim())));
    }
    GridSpec::new(grid.axes[1..].to_vec(), grid.offset)
}

/// Invariants of a node of an [`sl_constraint_project`] grid (`q = 0`).
pub fn sl_node_invariants(shear: &[f64]) -> Vec<f64> {
    let mut xi = vec![0.0];
    xi.extend_from_slice(shear);
    jacobi_to_invariants(&xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn offsets_place_nodes() {
        let g = GridSpec::new(vec![Axis::new(0.0, 1.0, 9)], 1.0).unwrap();
        assert_abs_diff_eq!(g.spacing(0), 0.1);
        assert_abs_diff_eq!(g.coord(0, 0), 0.1);
        assert_abs_diff_eq!(g.coord(0, 8), 0.9, epsilon = 1e-15);
        let g = GridSpec::cell_centered(vec![Axis::new(0.0, 1.0, 10)]).unwrap();
        assert_abs_diff_eq!(g.coord(0, 0), 0.05);
        assert_abs_diff_eq!(g.coord(0, 9), 0.95, epsilon = 1e-15);
    }

    #[test]
    fn parse_and_validate() {
        let g: GridSpec = "-4:4:16, 0:8:32@1".parse().unwrap();
        assert_eq!(g.ndim(), 2);
        assert_eq!(g.offset, 1.0);
        assert!("0:1:3".parse::<GridSpec>().is_err());
        assert!("1:0:10".parse::<GridSpec>().is_err());
        assert!("0:1".parse::<GridSpec>().is_err());
    }

    #[test]
    fn ravel_round_trip() {
        let g: GridSpec = "0:1:5,0:1:6,0:1:7".parse().unwrap();
        for idx in [0, 17, 100, g.len() - 1] {
            assert_eq!(g.ravel(&g.unravel(idx)), idx);
        }
        assert_eq!(g.stride(0), 42);
    }

    #[test]
    fn jacobi_round_trip_and_orthogonality() {
        let q = [0.3, -1.2, 2.5, 0.7];
        let xi = invariants_to_jacobi(&q);
        let back = jacobi_to_invariants(&xi);
        for (a, b) in q.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        // n=2: y1 = q1 - q2
        let xi = invariants_to_jacobi(&[1.0, 0.25]);
        assert_abs_diff_eq!(xi[0], 0.625);
        assert_abs_diff_eq!(xi[1], 0.75);
        // gradient rows orthogonal with norms c_i
        let n = 4;
        let c = jacobi_laplacian_coefficients(n);
        let grads: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|a| {
                        let mut e = vec![0.0; n];
                        e[a] = 1.0;
                        invariants_to_jacobi(&e)[i]
                    })
                    .collect()
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum();
                assert_abs_diff_eq!(dot, if i == j { c[i] } else { 0.0 }, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn sl_projection() {
        let g: GridSpec = "-1:1:8,0:2:10".parse().unwrap();
        let p = sl_constraint_project(&g, 2).unwrap();
        assert_eq!(p.ndim(), 1);
        let q = sl_node_invariants(&[0.8]);
        assert_abs_diff_eq!(q[0] - q[1], 0.8);
        let g: GridSpec = "-1:1:6,0:2:6,0:2:6".parse().unwrap();
        let p = sl_constraint_project(&g, 3).unwrap();
        for idx in 0..p.len() {
            let q = sl_node_invariants(&p.node(idx));
            assert!(q.iter().sum::<f64>().abs() < 1e-14);
        }
    }
}
