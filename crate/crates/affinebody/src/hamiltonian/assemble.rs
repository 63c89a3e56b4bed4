//! Assembly of the reduced operator on a Jacobi-coordinate grid over the Weyl chamber.

use std::fmt;
use std::f64::consts::SQRT_2;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fiber::FiberTerms;
use super::grid::{invariants_to_jacobi, jacobi_laplacian_coefficients, jacobi_to_invariants, jacobi_volume_factor};
use super::{
    artificial_potential, casimir_constant, in_chamber, weight_factor, GridSpec, InertialParams, ModelKind,
    SectorLabel,
};
use crate::error::{invalid, Error, Result};
use crate::peterweyl::ReducedAmplitude;
use crate::solver::LinearOperator;
use crate::spin::C64;

/// A potential as a function of the invariants.
pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Doubly isotropic potential on the invariants.
#[derive(Clone)]
pub enum Potential {
    None,
    /// `(κ/2) q²` with `q` the mean invariant; `(κ/2) Σ (Q^a)²` for the d'Alembert kind.
    Harmonic { kappa: f64 },
    /// `(κ/2) Σ (q^a)²`
    Isotropic { kappa: f64 },
    Custom { name: String, f: PotentialFn },
}

impl Potential {
    pub fn evaluate(&self, kind: ModelKind, q: &[f64]) -> f64 {
        match self {
            Potential::None => 0.0,
            Potential::Harmonic { kappa } => {
                if kind == ModelKind::DAlembert {
                    0.5 * kappa * q.iter().map(|x| x * x).sum::<f64>()
                } else {
                    let mean = q.iter().sum::<f64>() / q.len() as f64;
                    0.5 * kappa * mean * mean
                }
            }
            Potential::Isotropic { kappa } => 0.5 * kappa * q.iter().map(|x| x * x).sum::<f64>(),
            Potential::Custom { f, .. } => f(q),
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::None => write!(f, "none"),
            Potential::Harmonic { kappa } => write!(f, "harmonic:kappa={kappa}"),
            Potential::Isotropic { kappa } => write!(f, "isotropic:kappa={kappa}"),
            Potential::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for Potential {
    type Err = Error;

    /// `none`, `harmonic:kappa=1`, `isotropic:kappa=0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut kappa = 1.0;
        for kv in args.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("bad potential argument {kv:?}")))?;
            match k.trim() {
                "kappa" => kappa = v.trim().parse().map_err(|_| Error::Parse(format!("bad kappa {v:?}")))?,
                other => return Err(Error::Parse(format!("unknown potential parameter {other:?}"))),
            }
        }
        match name {
            "none" | "" => Ok(Potential::None),
            "harmonic" => Ok(Potential::Harmonic { kappa }),
            "isotropic" => Ok(Potential::Isotropic { kappa }),
            other => Err(Error::Parse(format!("unknown potential {other:?} (none, harmonic, isotropic)"))),
        }
    }
}

impl Serialize for Potential {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Potential {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How grid coordinates relate to the invariants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// The invariants `(q¹, …, qⁿ)` themselves.
    Invariants,
    /// `(q, y_1, …, y_{n-1})`
    Jacobi,
    /// Dilatation `q` alone.
    PlanarQ,
    /// Shear `x = q² - q¹` alone.
    PlanarX,
    /// `(Q⁺, Q⁻)` with `Q^± = (Q¹ ± Q²)/√2`.
    Rotated,
}

impl Frame {
    /// Grid coordinates of the invariants `q`.
    pub fn from_invariants(self, q: &[f64]) -> Vec<f64> {
        match self {
            Frame::Invariants => q.to_vec(),
            Frame::Jacobi => invariants_to_jacobi(q),
            Frame::PlanarQ => vec![q.iter().sum::<f64>() / q.len() as f64],
            Frame::PlanarX => vec![q[1] - q[0]],
            Frame::Rotated => vec![(q[0] + q[1]) / SQRT_2, (q[0] - q[1]) / SQRT_2],
        }
    }

    /// Invariants at grid coordinates `x`; `None` for one-axis planar frames.
    pub fn to_invariants(self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Frame::Invariants => Some(x.to_vec()),
            Frame::Jacobi => Some(jacobi_to_invariants(x)),
            Frame::Rotated => Some(vec![(x[0] + x[1]) / SQRT_2, (x[0] - x[1]) / SQRT_2]),
            Frame::PlanarQ | Frame::PlanarX => None,
        }
    }

    /// Cell volume of `grid` measured in the frame's natural invariant measure.
    pub fn cell_volume(self, grid: &GridSpec) -> f64 {
        let base = grid.cell_volume();
        match self {
            Frame::Jacobi => base * jacobi_volume_factor(grid.ndim()),
            _ => base,
        }
    }
}

/// Discrete symmetric reduced Hamiltonian acting on rescaled amplitudes `g = √P f`.
///
/// Unknowns are ordered node-major over the active (chamber-interior) nodes, with
/// the flattened fiber fastest.
#[derive(Clone, Debug)]
pub struct ReducedOperator {
    pub kind: ModelKind,
    pub params: InertialParams,
    pub sector: SectorLabel,
    pub grid: GridSpec,
    pub frame: Frame,
    pub fiber_dim: usize,
    /// Grid node index of each active slot.
    pub active: Vec<usize>,
    /// Weight factor `P` at each active node.
    pub weight: Vec<f64>,
    pub matrix: CsrMatrix<f64>,
    /// Tridiagonal factors when the operator is a Kronecker sum over the grid axes.
    pub kronecker: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl ReducedOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        csr_apply(&self.matrix, x, y);
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        DMatrix::from(&self.matrix)
    }

    /// `‖H - Hᵀ‖_F / ‖H‖_F`.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.matrix.transpose();
        let diff = &self.matrix - &t;
        let num: f64 = diff.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        let den: f64 = self.matrix.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// `(diagonal, off-diagonal)` if the matrix is tridiagonal.
    pub fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(1)];
        for (i, j, v) in self.matrix.triplet_iter() {
            if i == j {
                d[i] = *v;
            } else if j == i + 1 {
                e[i] = *v;
            } else if i != j + 1 {
                return None;
            }
        }
        Some((d, e))
    }

    /// Coordinate-list text export: one `row col value` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rows={} cols={} nnz={}", self.dim(), self.dim(), self.matrix.nnz())?;
        for (i, j, v) in self.matrix.triplet_iter() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }

    /// Volume element of one grid cell in invariant coordinates.
    pub fn cell_volume(&self) -> f64 {
        self.frame.cell_volume(&self.grid)
    }

    /// Reduced amplitude `f = g/√P` on the operator grid (zero off the chamber).
    pub fn amplitude_from_vector(&self, g: &[f64]) -> Result<ReducedAmplitude> {
        if g.len() != self.dim() {
            return Err(Error::Dimension(format!("vector of length {} for operator of dimension {}", g.len(), self.dim())));
        }
        let mut amp = ReducedAmplitude::zeros(self.sector, self.grid.clone());
        amp.frame = self.frame;
        let nf = self.fiber_dim;
        for (slot, &node) in self.active.iter().enumerate() {
            let s = 1.0 / self.weight[slot].sqrt();
            for c in 0..nf {
                amp.values[node * nf + c] = C64::from(g[slot * nf + c] * s);
            }
        }
        Ok(amp)
    }
}

impl LinearOperator for ReducedOperator {
    fn dim(&self) -> usize {
        ReducedOperator::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        ReducedOperator::apply(self, x, y)
    }
}

pub(crate) fn csr_apply(m: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let offsets = m.row_offsets();
    let cols = m.col_indices();
    let vals = m.values();
    let row = |i: usize| -> f64 {
        (offsets[i]..offsets[i + 1]).map(|k| vals[k] * x[cols[k]]).sum()
    };
    if y.len() > 20_000 {
        y.par_iter_mut().with_min_len(4096).enumerate().for_each(|(i, yi)| *yi = row(i));
    } else {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = row(i);
        }
    }
}

pub(crate) fn csr_from_tridiagonal(d: &[f64], e: &[f64]) -> CsrMatrix<f64> {
    let n = d.len();
    let mut coo = CooMatrix::new(n, n);
    for i in 0..n {
        if i > 0 {
            coo.push(i, i - 1, e[i - 1]);
        }
        coo.push(i, i, d[i]);
        if i + 1 < n {
            coo.push(i, i + 1, e[i]);
        }
    }
    CsrMatrix::from(&coo)
}

/// `(c_D, γ)` of the kinetic term `-c_D Σ_a ∂²_a + γ ∂²_q` (before the `√P` transform).
pub fn kinetic_coefficients(kind: ModelKind, p: &InertialParams) -> (f64, f64) {
    let n = p.n as f64;
    match kind {
        ModelKind::AffAff | ModelKind::UnitaryGroup => (1.0 / (2.0 * p.a), p.b / (2.0 * p.a * (p.a + n * p.b))),
        ModelKind::MetAff | ModelKind::AffMet => (1.0 / (2.0 * p.alpha()), -1.0 / (2.0 * p.beta())),
        ModelKind::DAlembert => (1.0 / (2.0 * p.i), 0.0),
    }
}

/// Coefficients `κ_i` of `-κ_i ∂²` on the Jacobi axes.
pub(crate) fn axis_kappas(kind: ModelKind, p: &InertialParams) -> Vec<f64> {
    let (cd, gamma) = kinetic_coefficients(kind, p);
    let mut k: Vec<f64> = jacobi_laplacian_coefficients(p.n).iter().map(|c| cd * c).collect();
    k[0] -= gamma;
    k
}

/// Flat-form operator `-Σ κ_i ∂²_{ξ_i} + c_D U + F(q) + C + V` on the active nodes of
/// a Jacobi grid `(q, y_1, …, y_{n-1})`, Dirichlet on the chamber walls and box faces.
pub fn assemble(
    kind: ModelKind,
    params: &InertialParams,
    sector: &SectorLabel,
    grid: &GridSpec,
    potential: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<ReducedOperator> {
    params.validate(kind)?;
    grid.validate()?;
    let n = params.n;
    if sector.dim != n {
        return invalid(format!("sector {sector} is for n = {}, model has n = {n}", sector.dim));
    }
    if grid.ndim() != n {
        return Err(Error::Dimension(format!("grid has {} axes, n = {n} needs {n} Jacobi axes", grid.ndim())));
    }
    let kappas = axis_kappas(kind, params);
    if let Some((axis, k)) = kappas.iter().enumerate().find(|(_, k)| !(**k > 0.0)) {
        return invalid(format!(
            "kinetic coefficient on axis {axis} is {k}; the operator is not bounded below for these constants"
        ));
    }
    let (cd, _) = kinetic_coefficients(kind, params);
    let nf = sector.fiber_dim();
    let terms = FiberTerms::new(sector);
    let cas = casimir_constant(kind, sector, params);

    let nodes = grid.len();
    let mut slot_of = vec![usize::MAX; nodes];
    let mut active = Vec::new();
    let mut weight = Vec::new();
    for (idx, slot) in slot_of.iter_mut().enumerate() {
        let q = jacobi_to_invariants(&grid.node(idx));
        let p = weight_factor(&q, kind);
        if in_chamber(&q, kind) && p > 0.0 {
            *slot = active.len();
            active.push(idx);
            weight.push(p);
        }
    }
    if active.is_empty() {
        return invalid("no grid node lies inside the Weyl chamber");
    }
    let h: Vec<f64> = (0..n).map(|a| grid.spacing(a)).collect();
    let ghost = 1.0 - 1.0 / grid.offset;

    let rows: Vec<Result<Vec<(usize, usize, f64)>>> = active
        .par_iter()
        .enumerate()
        .map(|(slot, &idx)| {
            let multi = grid.unravel(idx);
            let xi = grid.node(idx);
            let q = jacobi_to_invariants(&xi);
            let mut diag = artificial_potential(&q, kind, cd)? + potential(&q) + cas;
            let mut out = Vec::new();
            for a in 0..n {
                let k = kappas[a] / (h[a] * h[a]);
                diag += 2.0 * k;
                for step in [-1i64, 1] {
                    let j = multi[a] as i64 + step;
                    if j < 0 || j >= grid.axes[a].points as i64 {
                        diag -= k * ghost;
                        continue;
                    }
                    let nb = (idx as i64 + step * grid.stride(a) as i64) as usize;
                    let ns = slot_of[nb];
                    if ns != usize::MAX {
                        for c in 0..nf {
                            out.push((slot * nf + c, ns * nf + c, -k));
                        }
                    }
                }
            }
            let f = terms.evaluate(kind, params, &q, nf)?;
            for r in 0..nf {
                for c in 0..nf {
                    let v = f[(r, c)] + if r == c { diag } else { 0.0 };
                    if v != 0.0 || r == c {
                        out.push((slot * nf + r, slot * nf + c, v));
                    }
                }
            }
            if out.iter().any(|t| !t.2.is_finite()) {
                return invalid(format!("non-finite operator entry at q = {q:?}"));
            }
            Ok(out)
        })
        .collect();

    let dim = active.len() * nf;
    let mut coo = CooMatrix::new(dim, dim);
    for r in rows {
        for (i, j, v) in r? {
            coo.push(i, j, v);
        }
    }
    Ok(ReducedOperator {
        kind,
        params: *params,
        sector: *sector,
        grid: grid.clone(),
        frame: Frame::Jacobi,
        fiber_dim: nf,
        active,
        weight,
        matrix: CsrMatrix::from(&coo),
        kronecker: None,
    })
}

impl ReducedOperator {
    /// Operator on a one-axis grid from its tridiagonal form.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_tridiagonal(
        kind: ModelKind,
        params: InertialParams,
        sector: SectorLabel,
        grid: GridSpec,
        frame: Frame,
        weight: Vec<f64>,
        d: Vec<f64>,
        e: Vec<f64>,
    ) -> Self {
        let n = d.len();
        ReducedOperator {
            kind,
            params,
            sector,
            grid,
            frame,
            fiber_dim: 1,
            active: (0..n).collect(),
            weight,
            matrix: csr_from_tridiagonal(&d, &e),
            kronecker: Some(vec![(d, e)]),
        }
    }

    /// Kronecker sum `Σ_a I ⊗ … ⊗ T_a ⊗ … ⊗ I` of tridiagonal axis factors on `grid`.
    pub(crate) fn from_kronecker_sum(
        kind: ModelKind,
        params: InertialParams,
        sector: SectorLabel,
        grid: GridSpec,
        frame: Frame,
        weight: Vec<f64>,
        factors: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Self {
        let nodes = grid.len();
        let mut coo = CooMatrix::new(nodes, nodes);
        for idx in 0..nodes {
            let multi = grid.unravel(idx);
            let mut diag = 0.0;
            for (a, (d, e)) in factors.iter().enumerate() {
                let i = multi[a];
                diag += d[i];
                let s = grid.stride(a);
                if i > 0 {
                    coo.push(idx, idx - s, e[i - 1]);
                }
                if i + 1 < d.len() {
                    coo.push(idx, idx + s, e[i]);
                }
            }
            coo.push(idx, idx, diag);
        }
        ReducedOperator {
            kind,
            params,
            sector,
            grid,
            frame,
            fiber_dim: 1,
            active: (0..nodes).collect(),
            weight,
            matrix: CsrMatrix::from(&coo),
            kronecker: Some(factors),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Axis;
    use crate::spin::SpinLabel;

    fn zero(_: &[f64]) -> f64 {
        0.0
    }

    #[test]
    fn potential_parsing() {
        assert!(matches!("harmonic:kappa=2".parse::<Potential>().unwrap(), Potential::Harmonic { kappa } if kappa == 2.0));
        assert!(matches!("none".parse::<Potential>().unwrap(), Potential::None));
        assert!("harmonic:omega=1".parse::<Potential>().is_err());
        assert!("quartic".parse::<Potential>().is_err());
        let p = Potential::Harmonic { kappa: 2.0 };
        assert_eq!(p.evaluate(ModelKind::AffAff, &[1.0, 3.0]), 4.0);
        assert_eq!(p.evaluate(ModelKind::DAlembert, &[1.0, 3.0]), 10.0);
    }

    #[test]
    fn small_instances_are_symmetric() {
        let grid: GridSpec = "-3:3:6,0:4:6,0:4:6".parse().unwrap();
        let p = InertialParams::new(3, 2.0, 1.0, 0.5);
        let sector = SectorLabel::spin(3, SpinLabel::HALF, SpinLabel::from_twice(3)).unwrap();
        for kind in [ModelKind::AffAff, ModelKind::MetAff, ModelKind::AffMet] {
            let op = assemble(kind, &p, &sector, &grid, &zero).unwrap();
            assert!(op.symmetry_defect() < 1e-14);
            assert_eq!(op.dim(), op.active.len() * 8);
        }
    }

    #[test]
    fn n2_matches_planar_form() {
        // -(1/A) D_x - 1/(4(A+2B)) ∂²_q in separated coordinates
        let p = InertialParams::new(2, 0.0, 1.0, 0.5);
        let k = axis_kappas(ModelKind::AffAff, &p);
        assert!((k[0] - 0.125).abs() < 1e-15);
        assert!((k[1] - 1.0).abs() < 1e-15);
        let grid = GridSpec::new(vec![Axis::new(-2.0, 2.0, 6), Axis::new(0.0, 3.0, 7)], 0.5).unwrap();
        let op = assemble(ModelKind::AffAff, &p, &SectorLabel::fourier(0, 0), &grid, &zero).unwrap();
        assert_eq!(op.dim(), 42);
    }

    #[test]
    fn rejects_bad_input() {
        let p = InertialParams::new(2, 0.0, 1.0, 0.5);
        let g3: GridSpec = "-1:1:5,0:1:5,0:1:5".parse().unwrap();
        assert!(assemble(ModelKind::AffAff, &p, &SectorLabel::fourier(0, 0), &g3, &zero).is_err());
        let g2: GridSpec = "-1:1:5,-2:-1:5".parse().unwrap();
        assert!(assemble(ModelKind::AffAff, &p, &SectorLabel::fourier(0, 0), &g2, &zero).is_err());
    }

    #[test]
    fn coo_export() {
        let p = InertialParams::new(2, 0.0, 1.0, 0.5);
        let grid: GridSpec = "-1:1:5,0:1:5".parse().unwrap();
        let op = assemble(ModelKind::AffAff, &p, &SectorLabel::fourier(1, 2), &grid, &zero).unwrap();
        let mut buf = Vec::new();
        op.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), op.matrix.nnz() + 1);
    }
}
