//! Reduced Hamiltonians on the Cartan subgroup for the affine-affine, metric-affine,
//! affine-metric, d'Alembert and U(n) models.
//!
//! All operators act on rescaled amplitudes `g = √P f`, so the discrete operators are
//! symmetric in the plain Euclidean inner product.

mod assemble;
mod axis;
mod fiber;
mod grid;
mod weight;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use assemble::{assemble, kinetic_coefficients, Frame, Potential, ReducedOperator};
pub(crate) use assemble::axis_kappas;
pub use axis::{axis_operator, AxisWeight, Discretization};
pub use fiber::{apply_left_spin, apply_right_spin, casimir_constant, fiber_coupling, fiber_generators};
pub use grid::{
    invariants_to_jacobi, jacobi_laplacian_coefficients, jacobi_to_invariants, jacobi_volume_factor,
    sl_constraint_project, sl_node_invariants, Axis, GridSpec,
};
pub use weight::{artificial_potential, in_chamber, weight_factor, WeightFamily};

use crate::error::{invalid, Error, Result};
use crate::spin::SpinLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    AffAff,
    MetAff,
    AffMet,
    DAlembert,
    UnitaryGroup,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::AffAff, ModelKind::MetAff, ModelKind::AffMet, ModelKind::DAlembert, ModelKind::UnitaryGroup];

    pub fn family(self) -> WeightFamily {
        match self {
            ModelKind::AffAff | ModelKind::MetAff | ModelKind::AffMet => WeightFamily::Hyperbolic,
            ModelKind::DAlembert => WeightFamily::Rational,
            ModelKind::UnitaryGroup => WeightFamily::Trigonometric,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::AffAff => "aff-aff",
            ModelKind::MetAff => "met-aff",
            ModelKind::AffMet => "aff-met",
            ModelKind::DAlembert => "dalembert",
            ModelKind::UnitaryGroup => "unitary",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "aff-aff" | "affaff" | "affine-affine" => Ok(ModelKind::AffAff),
            "met-aff" | "metaff" | "metric-affine" => Ok(ModelKind::MetAff),
            "aff-met" | "affmet" | "affine-metric" => Ok(ModelKind::AffMet),
            "dalembert" | "d-alembert" | "d'alembert" => Ok(ModelKind::DAlembert),
            "unitary" | "unitary-group" | "u-n" | "un" => Ok(ModelKind::UnitaryGroup),
            other => Err(Error::Parse(format!(
                "unknown model kind {other:?} (aff-aff, met-aff, aff-met, dalembert, unitary)"
            ))),
        }
    }
}

/// Inertial constants `I`, `A`, `B` and the dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertialParams {
    pub n: usize,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

impl InertialParams {
    pub fn new(n: usize, i: f64, a: f64, b: f64) -> Self {
        InertialParams { n, i, a, b }
    }

    /// `α = I + A`
    pub fn alpha(&self) -> f64 {
        self.i + self.a
    }

    /// `β = -(I + A)(I + A + nB)/B`
    pub fn beta(&self) -> f64 {
        -(self.i + self.a) * (self.i + self.a + self.n as f64 * self.b) / self.b
    }

    /// `μ = (I² - A²)/I`
    pub fn mu(&self) -> f64 {
        (self.i * self.i - self.a * self.a) / self.i
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        InertialParams { n: self.n, i: self.i * lambda, a: self.a * lambda, b: self.b * lambda }
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        let n = self.n as f64;
        if self.n < 2 {
            return invalid(format!("dimension n = {} must be at least 2", self.n));
        }
        let checks: Vec<(bool, &str)> = match kind {
            ModelKind::AffAff | ModelKind::UnitaryGroup => {
                vec![(self.a != 0.0, "A must be nonzero"), (self.a + n * self.b != 0.0, "A + nB must be nonzero")]
            }
            ModelKind::MetAff | ModelKind::AffMet => vec![
                (self.a != 0.0, "A must be nonzero"),
                (self.i != 0.0, "I must be nonzero"),
                (self.i * self.i != self.a * self.a, "I² must differ from A²"),
                (self.b != 0.0, "B must be nonzero"),
                (self.i + self.a + n * self.b != 0.0, "I + A + nB must be nonzero"),
            ],
            ModelKind::DAlembert => vec![(self.i > 0.0, "I must be positive")],
        };
        for (ok, msg) in checks {
            if !ok {
                return invalid(format!("{kind}: {msg} (I={}, A={}, B={}, n={})", self.i, self.a, self.b, self.n));
            }
        }
        if [self.i, self.a, self.b].iter().any(|x| !x.is_finite()) {
            return invalid("inertial constants must be finite");
        }
        Ok(())
    }
}

/// Labels of the left and right representations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Labels {
    /// SU(2) labels `(s, j)` for `n = 3` (trivial for `n > 3`).
    Spin { s: SpinLabel, j: SpinLabel },
    /// Fourier labels `(m, n)` of `e^{imα} e^{inβ}` for `n = 2`.
    Fourier { m: i32, n: i32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SectorLabel {
    pub dim: usize,
    pub labels: Labels,
}

impl SectorLabel {
    /// `n ≥ 3` sector `(s, j)`; fails when `j - s` is half-integer.
    pub fn spin(dim: usize, s: SpinLabel, j: SpinLabel) -> Result<Self> {
        if dim < 3 {
            return invalid("spin sectors need n >= 3; use SectorLabel::fourier for n = 2");
        }
        if (s.twice() + j.twice()) % 2 == 1 {
            return Err(Error::HalfInteger { alpha: s.to_string(), beta: j.to_string() });
        }
        if dim > 3 && (s.twice() != 0 || j.twice() != 0) {
            return invalid("fiber matrices exist only for n = 3; for n > 3 use the scalar sector");
        }
        Ok(SectorLabel { dim, labels: Labels::Spin { s, j } })
    }

    pub fn fourier(m: i32, n: i32) -> Self {
        SectorLabel { dim: 2, labels: Labels::Fourier { m, n } }
    }

    /// Trivial representations on both sides.
    pub fn scalar(dim: usize) -> Self {
        if dim == 2 {
            Self::fourier(0, 0)
        } else {
            SectorLabel { dim, labels: Labels::Spin { s: SpinLabel::ZERO, j: SpinLabel::ZERO } }
        }
    }

    /// `(N(α), N(β))`.
    pub fn fiber_shape(&self) -> (usize, usize) {
        match self.labels {
            Labels::Spin { s, j } => (s.dim(), j.dim()),
            Labels::Fourier { .. } => (1, 1),
        }
    }

    pub fn fiber_dim(&self) -> usize {
        let (a, b) = self.fiber_shape();
        a * b
    }

    /// Both labels half-integer.
    pub fn is_fermionic(&self) -> bool {
        matches!(self.labels, Labels::Spin { s, .. } if s.is_half_integer())
    }

    pub fn is_diagonal(&self) -> bool {
        match self.labels {
            Labels::Spin { s, j } => s == j,
            Labels::Fourier { m, n } => m == n,
        }
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.labels {
            Labels::Spin { s, j } => write!(f, "({s},{j})"),
            Labels::Fourier { m, n } => write!(f, "({m},{n})"),
        }
    }
}
