//! One-dimensional weighted radial operators `-κ (1/w) ∂(w ∂ f) + V f` in symmetric
//! (rescaled) form, either as a flat Laplacian plus artificial potential on `g = √w f`
//! or as the symmetrized divergence form.

use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// `-κ g'' + κ U g` with `U = h'' + h'²`, `h = ln √w`.
    Flat,
    /// `S_ii = κ (w_{i+½} + w_{i-½}) / (w_i h²)`, `S_{i,i+1} = -κ w_{i+½} / (h² √(w_i w_{i+1}))`.
    Divergence,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AxisWeight {
    /// `|sh x|`
    Sinh,
    /// `|sin x|`
    Sin,
    /// `|x|`
    Linear,
    /// `1`
    Unit,
}

impl AxisWeight {
    pub fn value(self, x: f64) -> f64 {
        match self {
            AxisWeight::Sinh => x.sinh().abs(),
            AxisWeight::Sin => x.sin().abs(),
            AxisWeight::Linear => x.abs(),
            AxisWeight::Unit => 1.0,
        }
    }

    /// `(d/dx ln w, d²/dx² ln w)`
    fn log_derivs(self, x: f64) -> (f64, f64) {
        match self {
            AxisWeight::Sinh => (1.0 / x.tanh(), -1.0 / x.sinh().powi(2)),
            AxisWeight::Sin => (1.0 / x.tan(), -1.0 / x.sin().powi(2)),
            AxisWeight::Linear => (1.0 / x, -1.0 / (x * x)),
            AxisWeight::Unit => (0.0, 0.0),
        }
    }

    /// Artificial potential `U = h'' + h'²`, `h = ln √w`.
    pub fn artificial_potential(self, x: f64) -> f64 {
        let (l1, l2) = self.log_derivs(x);
        0.5 * l2 + 0.25 * l1 * l1
    }
}

/// Tridiagonal `(diagonal, off-diagonal)` of the symmetric operator on a one-axis grid.
///
/// Box faces without a weight zero get a Dirichlet ghost `g_ghost = (1 - 1/offset) g`,
/// which places the zero exactly on the face.
pub fn axis_operator(
    grid: &GridSpec,
    kappa: f64,
    weight: AxisWeight,
    potential: &dyn Fn(f64) -> f64,
    disc: Discretization,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid.ndim() != 1 {
        return invalid("axis operator needs a one-axis grid");
    }
    let n = grid.axes[0].points;
    let h = grid.spacing(0);
    let h2 = h * h;
    let x = grid.axis_nodes(0);
    let ghost = 1.0 - 1.0 / grid.offset;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for (i, &xi) in x.iter().enumerate() {
        let wi = weight.value(xi);
        if !(wi > 0.0) || !wi.is_finite() {
            return invalid(format!("weight vanishes at node x = {xi}; move the grid off the wall"));
        }
        let v = potential(xi);
        match disc {
            Discretization::Flat => {
                let mut d = 2.0 * kappa / h2 + kappa * weight.artificial_potential(xi) + v;
                if i == 0 {
                    d -= kappa * ghost / h2;
                }
                if i == n - 1 {
                    d -= kappa * ghost / h2;
                }
                diag[i] = d;
                if i + 1 < n {
                    off[i] = -kappa / h2;
                }
            }
            Discretization::Divergence => {
                let wl = weight.value(xi - h / 2.0);
                let wr = weight.value(xi + h / 2.0);
                let mut d = v;
                d += kappa * wr / (wi * h2) * if i == n - 1 { 1.0 - ghost } else { 1.0 };
                d += kappa * wl / (wi * h2) * if i == 0 { 1.0 - ghost } else { 1.0 };
                diag[i] = d;
                if i + 1 < n {
                    let wn = weight.value(x[i + 1]);
                    off[i] = -kappa * wr / (h2 * (wi * wn).sqrt());
                }
            }
        }
        if !diag[i].is_finite() {
            return invalid(format!("non-finite operator entry at x = {xi}"));
        }
    }
    Ok((diag, off))
}
