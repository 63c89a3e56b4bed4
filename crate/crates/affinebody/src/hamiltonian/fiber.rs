//! Spin and vorticity actions on the fiber of reduced amplitudes, the coupling
//! matrices `(S→ ∓ S←)²`, and the Casimir constants of the mixed models.
//!
//! A fiber value `f` is an `N(α) × N(β)` matrix flattened row-major; `S→ f = S^α f`
//! and `S← f = f S^β`. For `n = 2` the generators are the 1×1 Fourier labels.

use nalgebra::DMatrix;

use super::{InertialParams, Labels, ModelKind, SectorLabel, WeightFamily};
use crate::error::{Error, Result};
use crate::peterweyl::ReducedAmplitude;
use crate::spin::{build_spin_matrices, CMat, C64};

/// Left (`S^α_a`) and right (`S^β_a`) generator matrices of the sector.
pub fn fiber_generators(sector: &SectorLabel) -> (Vec<CMat>, Vec<CMat>) {
    match sector.labels {
        Labels::Spin { s, j } => {
            let l = build_spin_matrices(s);
            let r = build_spin_matrices(j);
            (l.all().map(Clone::clone).to_vec(), r.all().map(Clone::clone).to_vec())
        }
        Labels::Fourier { m, n } => (
            vec![CMat::from_element(1, 1, C64::from(m as f64))],
            vec![CMat::from_element(1, 1, C64::from(n as f64))],
        ),
    }
}

fn apply_side(axis: usize, f: &ReducedAmplitude, left: bool) -> Result<ReducedAmplitude> {
    let (gl, gr) = fiber_generators(&f.sector);
    let gens = if left { gl } else { gr };
    let g = gens.get(axis).ok_or_else(|| {
        Error::Dimension(format!("generator axis {axis} out of range ({} available)", gens.len()))
    })?;
    let (na, nb) = f.sector.fiber_shape();
    let mut out = f.clone();
    for node in 0..f.grid.len() {
        let m = f.node_matrix(node);
        let r = if left { g * m } else { m * g };
        out.set_node_matrix(node, &r);
        debug_assert_eq!(r.shape(), (na, nb));
    }
    Ok(out)
}

/// `S^α_a f` at every node.
pub fn apply_left_spin(axis: usize, f: &ReducedAmplitude) -> Result<ReducedAmplitude> {
    apply_side(axis, f, true)
}

/// `f S^β_a` at every node.
pub fn apply_right_spin(axis: usize, f: &ReducedAmplitude) -> Result<ReducedAmplitude> {
    apply_side(axis, f, false)
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Squared combinations `(S→_a - S←_a)²` and `(S→_a + S←_a)²` on the flattened fiber,
/// one pair per generator, with the invariant pair `(b, c)` they couple to.
pub(crate) struct FiberTerms {
    pub minus: Vec<DMatrix<f64>>,
    pub plus: Vec<DMatrix<f64>>,
    pub pairs: Vec<(usize, usize)>,
}

impl FiberTerms {
    pub fn new(sector: &SectorLabel) -> Self {
        let (na, nb) = sector.fiber_shape();
        let (gl, gr) = fiber_generators(sector);
        let ia = CMat::identity(na, na);
        let ib = CMat::identity(nb, nb);
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        let to_real = |m: CMat| {
            debug_assert!(m.iter().all(|z| z.im.abs() < 1e-12 * (1.0 + z.norm())));
            m.map(|z| z.re)
        };
        let is_trivial = sector.fiber_dim() == 1 && matches!(sector.labels, Labels::Spin { .. });
        if !is_trivial {
            for (l, r) in gl.iter().zip(&gr) {
                let x = kron(l, &ib);
                let y = kron(&ia, &r.transpose());
                let d = &x - &y;
                let s = &x + &y;
                minus.push(to_real(&d * &d));
                plus.push(to_real(&s * &s));
            }
        }
        let pairs = match sector.labels {
            Labels::Fourier { .. } => vec![(0, 1)],
            Labels::Spin { .. } if sector.dim == 3 => vec![(1, 2), (0, 2), (0, 1)],
            Labels::Spin { .. } => vec![],
        };
        FiberTerms { minus, plus, pairs }
    }

    pub fn evaluate(&self, kind: ModelKind, params: &InertialParams, q: &[f64], dim: usize) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(dim, dim);
        for (idx, &(b, c)) in self.pairs.iter().enumerate() {
            if idx >= self.minus.len() {
                break;
            }
            let (wm, wp, eps) = pair_weights(kind, params, q[b], q[c])?;
            out += &self.minus[idx] * wm + &self.plus[idx] * (eps * wp);
        }
        Ok(out)
    }
}

/// `(w⁻, w⁺, ε)` for one invariant pair.
fn pair_weights(kind: ModelKind, p: &InertialParams, qb: f64, qc: f64) -> Result<(f64, f64, f64)> {
    let coincide = || Error::Coincidence(format!("q^b = {qb}, q^c = {qc}"));
    match kind.family() {
        WeightFamily::Hyperbolic => {
            let c = if kind == ModelKind::AffAff { p.a } else { p.alpha() };
            let h = (qb - qc) / 2.0;
            let sh2 = h.sinh().powi(2);
            if sh2 == 0.0 {
                return Err(coincide());
            }
            Ok((1.0 / (16.0 * c * sh2), 1.0 / (16.0 * c * h.cosh().powi(2)), -1.0))
        }
        WeightFamily::Rational => {
            let (dm, dp) = (qb - qc, qb + qc);
            if dm == 0.0 || dp == 0.0 {
                return Err(coincide());
            }
            Ok((1.0 / (4.0 * p.i * dm * dm), 1.0 / (4.0 * p.i * dp * dp), 1.0))
        }
        WeightFamily::Trigonometric => {
            let h = (qb - qc) / 2.0;
            let (s2, c2) = (h.sin().powi(2), h.cos().powi(2));
            if s2 == 0.0 || c2 == 0.0 {
                return Err(coincide());
            }
            Ok((1.0 / (16.0 * p.a * s2), 1.0 / (16.0 * p.a * c2), 1.0))
        }
    }
}

/// Coupling matrix `Σ [(S→ - S←)² w⁻ + ε (S→ + S←)² w⁺]` on the flattened fiber at `q`.
pub fn fiber_coupling(
    kind: ModelKind,
    params: &InertialParams,
    sector: &SectorLabel,
    q: &[f64],
) -> Result<DMatrix<f64>> {
    if q.len() != sector.dim {
        return Err(Error::Dimension(format!("{} invariants for an n = {} sector", q.len(), sector.dim)));
    }
    FiberTerms::new(sector).evaluate(kind, params, q, sector.fiber_dim())
}

/// Additive constant of the mixed models: `s(s+1)/2μ` (met-aff) or `j(j+1)/2μ` (aff-met)
/// for `n = 3`; `I m²/(I² - A²)` resp. `I n²/(I² - A²)` for `n = 2`; zero otherwise.
pub fn casimir_constant(kind: ModelKind, sector: &SectorLabel, params: &InertialParams) -> f64 {
    let left = match kind {
        ModelKind::MetAff => true,
        ModelKind::AffMet => false,
        _ => return 0.0,
    };
    match sector.labels {
        Labels::Spin { s, j } => {
            let c = if left { s.casimir() } else { j.casimir() };
            c / (2.0 * params.mu())
        }
        Labels::Fourier { m, n } => {
            let l = if left { m } else { n } as f64;
            params.i * l * l / (params.i * params.i - params.a * params.a)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{Axis, GridSpec};
    use crate::spin::SpinLabel;
    use approx::assert_abs_diff_eq;

    fn half() -> SectorLabel {
        SectorLabel::spin(3, SpinLabel::HALF, SpinLabel::HALF).unwrap()
    }

    #[test]
    fn left_and_right_actions() {
        let grid = GridSpec::new(vec![Axis::new(0.0, 1.0, 5); 3], 0.5).unwrap();
        let mut f = ReducedAmplitude::zeros(half(), grid.clone());
        f.set_node_matrix(7, &CMat::identity(2, 2));
        let g = apply_left_spin(2, &f).unwrap();
        let m = g.node_matrix(7);
        assert_eq!(m[(0, 0)], C64::from(0.5));
        assert_eq!(m[(1, 1)], C64::from(-0.5));
        let f = ReducedAmplitude::from_fn(half(), grid.clone(), |q| {
            CMat::from_fn(2, 2, |r, c| C64::new(q[0] + r as f64, q[1] * c as f64 - q[2]))
        });
        let lr = apply_left_spin(0, &apply_right_spin(1, &f).unwrap()).unwrap();
        let rl = apply_right_spin(1, &apply_left_spin(0, &f).unwrap()).unwrap();
        assert_eq!(lr.values, rl.values);
        let scalar = ReducedAmplitude::from_fn(SectorLabel::scalar(3), grid, |_| CMat::identity(1, 1));
        let z = apply_left_spin(1, &scalar).unwrap();
        assert!(z.values.iter().all(|v| *v == C64::from(0.0)));
        assert!(apply_left_spin(3, &f).is_err());
    }

    #[test]
    fn coupling_examples() {
        let p = InertialParams::new(3, 2.0, 1.0, 0.5);
        let q = [1.0, 0.2, -0.7];
        let z = fiber_coupling(ModelKind::AffAff, &p, &SectorLabel::scalar(3), &q).unwrap();
        assert_eq!(z.shape(), (1, 1));
        assert_eq!(z[(0, 0)], 0.0);
        for kind in ModelKind::ALL {
            let m = fiber_coupling(kind, &p, &half(), &q).unwrap();
            assert!((&m - m.transpose()).amax() < 1e-15);
        }
        assert!(fiber_coupling(ModelKind::AffAff, &p, &half(), &[0.1, 0.1, 0.0]).is_err());
    }

    #[test]
    fn spin_half_squares() {
        // (S_a)² = I/4, so (S→ ∓ S←)² = I/2 ∓ 2 S→ S←
        let t = FiberTerms::new(&half());
        for a in 0..3 {
            let sum = &t.minus[a] + &t.plus[a];
            assert!((sum - DMatrix::identity(4, 4)).amax() < 1e-15);
        }
    }

    #[test]
    fn n2_coupling_matches_planar_terms() {
        let p = InertialParams::new(2, 0.0, 1.5, 0.5);
        let (m, n) = (1, 3);
        let q = [0.9, -0.3];
        let f = fiber_coupling(ModelKind::AffAff, &p, &SectorLabel::fourier(m, n), &q).unwrap();
        let x: f64 = q[0] - q[1];
        let expect = ((n - m) as f64).powi(2) / (16.0 * p.a * (x / 2.0).sinh().powi(2))
            - ((n + m) as f64).powi(2) / (16.0 * p.a * (x / 2.0).cosh().powi(2));
        assert_abs_diff_eq!(f[(0, 0)], expect, epsilon = 1e-14);
    }

    #[test]
    fn casimir_examples() {
        let p = InertialParams::new(3, 2.0, 0.0, 1.0); // μ = 2
        let one = SectorLabel::spin(3, SpinLabel::ONE, SpinLabel::ONE).unwrap();
        assert_abs_diff_eq!(casimir_constant(ModelKind::MetAff, &one, &InertialParams { i: 1.0, a: 0.0, ..p }), 1.0);
        let h = half();
        assert_abs_diff_eq!(casimir_constant(ModelKind::AffMet, &h, &InertialParams { i: 1.0, a: 0.0, ..p }), 0.375);
        assert_eq!(casimir_constant(ModelKind::MetAff, &SectorLabel::scalar(3), &p), 0.0);
        assert_eq!(casimir_constant(ModelKind::AffAff, &h, &p), 0.0);
        let p2 = InertialParams::new(2, 2.0, 1.0, 0.5);
        assert_abs_diff_eq!(casimir_constant(ModelKind::MetAff, &SectorLabel::fourier(2, 0), &p2), 8.0 / 3.0);
    }
}
