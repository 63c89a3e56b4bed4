//! Rotation-vector geometry of SO(3) and SU(2): exponential maps, the covering
//! projection, Killing metric, Haar measure and quadrature, and the coefficient
//! fields of the invariant generators `Λ_a`, `Υ_a`, `D_a`.
//!
//! Chart conventions. `u(k) = exp(k^a e_a)` with `e_a = σ_a / (2i)`. In this chart
//! `Λ_a` generates `u ↦ u exp(t e_a)` and `Υ_a` generates `u ↦ exp(t e_a) u`.
//! Acting on `F(k) = D^s(u(k))⁻¹ = exp(i k^a S_a)` this gives
//! `-i Λ_a F = S_a F` and `-i Υ_a F = F S_a`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spin::{pauli_matrices, Su2Element};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationContext {
    /// `|k| ≤ π`
    So3,
    /// `|k| ≤ 2π`
    Su2,
}

impl RotationContext {
    pub fn bound(self) -> f64 {
        match self {
            RotationContext::So3 => PI,
            RotationContext::Su2 => 2.0 * PI,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationVector {
    k: Vector3<f64>,
    context: RotationContext,
}

impl RotationVector {
    pub fn new(k: Vector3<f64>, context: RotationContext) -> Result<Self> {
        let bound = context.bound();
        let magnitude = k.norm();
        if !(magnitude <= bound * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange { magnitude, bound });
        }
        Ok(RotationVector { k, context })
    }

    pub fn so3(k: Vector3<f64>) -> Result<Self> {
        Self::new(k, RotationContext::So3)
    }

    pub fn su2(k: Vector3<f64>) -> Result<Self> {
        Self::new(k, RotationContext::Su2)
    }

    pub(crate) fn new_unchecked(k: Vector3<f64>, context: RotationContext) -> Self {
        RotationVector { k, context }
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.k
    }

    pub fn norm(&self) -> f64 {
        self.k.norm()
    }

    pub fn context(&self) -> RotationContext {
        self.context
    }
}

/// Proper orthogonal 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn new(r: Matrix3<f64>) -> Result<Self> {
        let orth = (r.transpose() * r - Matrix3::identity()).norm();
        let det = r.determinant();
        if !(orth <= 1e-10 && (det - 1.0).abs() <= 1e-10) {
            return invalid(format!("not a rotation: |RᵀR - I| = {orth:.3e}, det = {det}"));
        }
        Ok(RotationMatrix(r))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn identity() -> Self {
        RotationMatrix(Matrix3::identity())
    }
}

fn cross_matrix(k: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -k[2], k[1], k[2], 0.0, -k[0], -k[1], k[0], 0.0)
}

/// `W(k) u = cos k u + (1 - cos k)(k·u) k/k² + (sin k / k) k × u`.
pub fn so3_from_rotation_vector(k: &RotationVector) -> Result<RotationMatrix> {
    let v = k.vector();
    let kn = v.norm();
    if kn > PI * (1.0 + 1e-12) {
        return Err(Error::OutOfRange { magnitude: kn, bound: PI });
    }
    let (c1, s1) = if kn < 1e-6 {
        (0.5 - kn * kn / 24.0, 1.0 - kn * kn / 6.0)
    } else {
        ((1.0 - kn.cos()) / (kn * kn), kn.sin() / kn)
    };
    Ok(RotationMatrix(
        Matrix3::identity() * kn.cos() + v * v.transpose() * c1 + cross_matrix(v) * s1,
    ))
}

/// Rotation vector with `|k| ≤ π` of a rotation matrix (logarithm).
pub fn rotation_vector_from_so3(r: &RotationMatrix) -> RotationVector {
    let m = r.matrix();
    let c = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let axial = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
    let s = axial.norm();
    let theta = s.atan2(c);
    let k = if theta < 1e-6 {
        axial * (1.0 + theta * theta / 6.0)
    } else if PI - theta < 1e-4 {
        // axis from the symmetric part R + I = 2 n nᵀ near θ = π
        let b = m + Matrix3::identity();
        let col = (0..3).max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)])).unwrap();
        let mut n: Vector3<f64> = b.column(col).into();
        n.normalize_mut();
        if n.dot(&axial) < 0.0 {
            n = -n;
        }
        n * theta
    } else {
        axial * (theta / s)
    };
    RotationVector::new_unchecked(k, RotationContext::So3)
}

/// Partial sum `Σ_{j=0}^{terms} (k×)^j u / j!`.
pub fn rotation_series_apply(k: &Vector3<f64>, u: &Vector3<f64>, terms: usize) -> Vector3<f64> {
    let mut term = *u;
    let mut sum = *u;
    for j in 1..=terms {
        term = k.cross(&term) / j as f64;
        sum += term;
    }
    sum
}

/// `R_ab = ½ Re tr(σ_a u σ_b u†)`.
pub fn covering_projection(u: &Su2Element) -> RotationMatrix {
    let sigma = pauli_matrices();
    let m = u.matrix();
    let md = m.adjoint();
    let mut r = Matrix3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            r[(a, b)] = 0.5 * (sigma[a] * m * sigma[b] * md).trace().re;
        }
    }
    RotationMatrix(r)
}

/// `(4/k²) sin²(k/2)`, regular at 0.
fn sin_ratio(k: f64) -> f64 {
    if k < 1e-6 {
        1.0 - k * k / 12.0
    } else {
        let s = (k / 2.0).sin();
        4.0 * s * s / (k * k)
    }
}

/// `(k/2) ctg(k/2)`, regular at 0.
fn half_cot(k: f64) -> f64 {
    if k < 1e-6 {
        1.0 - k * k / 12.0
    } else {
        (k / 2.0) / (k / 2.0).tan()
    }
}

/// `Γ_ab = g δ_ab + (1 - g) k_a k_b / k²` with `g = (4/k²) sin²(k/2)`.
pub fn killing_metric(k: &RotationVector) -> Result<Matrix3<f64>> {
    let v = k.vector();
    let kn = v.norm();
    if kn >= 2.0 * PI * (1.0 - 1e-12) {
        return invalid("metric degenerate at |k| = 2π");
    }
    if kn == 0.0 {
        return Ok(Matrix3::identity());
    }
    let g = sin_ratio(kn);
    Ok(Matrix3::identity() * g + v * v.transpose() * ((1.0 - g) / (kn * kn)))
}

/// Haar density `(4/k²) sin²(k/2)` in rotation-vector coordinates; 1 at the identity.
pub fn haar_weight(k: &RotationVector) -> f64 {
    sin_ratio(k.norm())
}

/// `r = (a/k) tan(k/4) k`.
pub fn conformal_coordinates(k: &RotationVector, a: f64) -> Result<Vector3<f64>> {
    if !(a > 0.0) {
        return invalid("conformal scale must be positive");
    }
    let v = k.vector();
    let kn = v.norm();
    if kn >= 2.0 * PI {
        return invalid("conformal coordinates need |k| < 2π");
    }
    let f = if kn < 1e-6 { 0.25 * (1.0 + kn * kn / 48.0) } else { (kn / 4.0).tan() / kn };
    Ok(v * (a * f))
}

/// Conformal factor `Ω² = 16a² / (a² + r²)²` of `ds² = Ω² (dr² + r² dΩ²)`.
pub fn conformal_factor(r: f64, a: f64) -> f64 {
    16.0 * a * a / (a * a + r * r).powi(2)
}

/// Max entry of `Γ(k) - Ω² JᵀJ`, `J = ∂r/∂k` by central differences.
pub fn conformal_residual(k: &RotationVector, a: f64) -> Result<f64> {
    let h = 1e-5;
    let v = *k.vector();
    let mut jac = Matrix3::zeros();
    for b in 0..3 {
        let mut e = Vector3::zeros();
        e[b] = h;
        let rp = conformal_coordinates(&RotationVector::new_unchecked(v + e, RotationContext::Su2), a)?;
        let rm = conformal_coordinates(&RotationVector::new_unchecked(v - e, RotationContext::Su2), a)?;
        jac.set_column(b, &((rp - rm) / (2.0 * h)));
    }
    let r = conformal_coordinates(k, a)?.norm();
    let pulled = jac.transpose() * jac * conformal_factor(r, a);
    Ok((killing_metric(k)? - pulled).amax())
}

/// Coefficients of `Λ_a` and `Υ_a` in the `∂/∂k^b` basis (row `a`, column `b`).
#[derive(Clone, Debug)]
pub struct GeneratorCoefficients {
    pub point: RotationVector,
    pub lambda: Matrix3<f64>,
    pub upsilon: Matrix3<f64>,
}

impl GeneratorCoefficients {
    /// Coefficients of `D_a = ε_ab^c k^b ∂_c`.
    pub fn d_matrix(k: &Vector3<f64>) -> Matrix3<f64> {
        // row a, column c: Σ_b ε_abc k_b
        cross_matrix(k)
    }
}

pub fn generator_coefficients(k: &RotationVector) -> Result<GeneratorCoefficients> {
    let v = k.vector();
    let kn = v.norm();
    if kn >= 2.0 * PI * (1.0 - 1e-12) {
        return invalid("generators singular at |k| = 2π");
    }
    let f = half_cot(kn);
    let radial = if kn == 0.0 { Matrix3::zeros() } else { v * v.transpose() * ((1.0 - f) / (kn * kn)) };
    let sym = Matrix3::identity() * f + radial;
    let d = GeneratorCoefficients::d_matrix(v);
    Ok(GeneratorCoefficients { point: *k, lambda: sym + d * 0.5, upsilon: sym - d * 0.5 })
}

/// Open uniform grid `k_i = (i+1) h`, `h = 2π/(n+1)` used by [`radial_casimir_apply`].
pub fn casimir_grid(n: usize) -> Vec<f64> {
    let h = 2.0 * PI / (n + 1) as f64;
    (0..n).map(|i| (i + 1) as f64 * h).collect()
}

/// `∂² f + ctg(k/2) ∂f` on [`casimir_grid`], second-order differences
/// (one-sided at the two end nodes).
pub fn radial_casimir_apply(f: &[f64]) -> Result<Vec<f64>> {
    let n = f.len();
    if n < 5 {
        return invalid("radial Casimir needs at least 5 samples");
    }
    let h = 2.0 * PI / (n + 1) as f64;
    let k = casimir_grid(n);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let (d1, d2) = if i == 0 {
            (
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h),
                (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h),
            )
        } else if i == n - 1 {
            (
                (3.0 * f[i] - 4.0 * f[i - 1] + f[i - 2]) / (2.0 * h),
                (2.0 * f[i] - 5.0 * f[i - 1] + 4.0 * f[i - 2] - f[i - 3]) / (h * h),
            )
        } else {
            ((f[i + 1] - f[i - 1]) / (2.0 * h), (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h))
        };
        out[i] = d2 + d1 / (k[i] / 2.0).tan();
    }
    Ok(out)
}

/// SU(2) character `χ_s(k) = sin((2s+1)k/2) / sin(k/2)`.
pub fn character(twice_s: u32, k: f64) -> f64 {
    let n = twice_s as f64 + 1.0;
    let s = (k / 2.0).sin();
    if s.abs() < 1e-12 {
        // limit at k = 0 (and ±n at 2π)
        let sign = if (k / (2.0 * PI)).round() as i64 % 2 != 0 && twice_s % 2 == 1 { -1.0 } else { 1.0 };
        return sign * n;
    }
    (n * k / 2.0).sin() / s
}

/// Normalized Haar quadrature on SU(2) in spherical rotation-vector coordinates.
#[derive(Clone, Debug)]
pub struct HaarQuadrature {
    pub level: usize,
    pub nodes: Vec<(Vector3<f64>, f64)>,
}

impl HaarQuadrature {
    pub fn integrate<T, F>(&self, mut f: F) -> T
    where
        F: FnMut(&Vector3<f64>) -> T,
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        self.nodes.iter().fold(T::default(), |acc, (k, w)| acc + f(k) * *w)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn scaled_rule(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter().zip(&w).map(|(x, w)| (a + (b - a) * (x + 1.0) / 2.0, w * (b - a) / 2.0)).collect()
}

/// Tensor Gauss–Legendre rule with `level` nodes per axis in `(k, ϑ, φ)`,
/// weights `∝ 4 sin²(k/2) sin ϑ`, total 1.
pub fn su2_haar_quadrature(level: usize) -> Result<HaarQuadrature> {
    if level < 2 {
        return invalid("quadrature level must be at least 2");
    }
    let kr = scaled_rule(level, 0.0, 2.0 * PI);
    let tr = scaled_rule(level, 0.0, PI);
    let pr = scaled_rule(level, 0.0, 2.0 * PI);
    let mut nodes = Vec::with_capacity(level.pow(3));
    for &(k, wk) in &kr {
        let radial = wk * 4.0 * (k / 2.0).sin().powi(2);
        for &(t, wt) in &tr {
            for &(p, wp) in &pr {
                let dir = Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
                nodes.push((dir * k, radial * wt * t.sin() * wp));
            }
        }
    }
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    for (_, w) in nodes.iter_mut() {
        *w /= total;
    }
    Ok(HaarQuadrature { level, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{rotation_vector_from_su2, su2_from_rotation_vector};
    use approx::assert_abs_diff_eq;

    fn rv(x: f64, y: f64, z: f64) -> RotationVector {
        RotationVector::su2(Vector3::new(x, y, z)).unwrap()
    }

    #[test]
    fn so3_examples() {
        let w = so3_from_rotation_vector(&rv(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(*w.matrix(), Matrix3::identity());
        let w = so3_from_rotation_vector(&rv(0.0, 0.0, PI / 2.0)).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((w.matrix() - expected).amax() < 1e-15);
        let k = Vector3::new(0.3, -1.1, 0.7);
        let w = so3_from_rotation_vector(&rv(k[0], k[1], k[2])).unwrap();
        assert!((w.matrix() * k - k).norm() < 1e-14);
        assert!(so3_from_rotation_vector(&rv(0.0, 4.0, 0.0)).is_err());
    }

    #[test]
    fn series_examples() {
        let k = Vector3::new(0.5, 1.0, -2.0);
        let u = Vector3::new(1.0, 0.0, 0.5);
        let w = so3_from_rotation_vector(&rv(k[0], k[1], k[2])).unwrap();
        assert!((rotation_series_apply(&k, &u, 40) - w.matrix() * u).norm() < 1e-12);
        assert_eq!(rotation_series_apply(&k, &(k * 2.0), 7), k * 2.0);
        assert_eq!(rotation_series_apply(&k, &u, 1), u + k.cross(&u));
    }

    #[test]
    fn covering_examples() {
        assert!((covering_projection(&Su2Element::identity()).matrix() - Matrix3::identity()).amax() < 1e-15);
        assert!((covering_projection(&-Su2Element::identity()).matrix() - Matrix3::identity()).amax() < 1e-15);
        let k = rv(0.4, -2.0, 1.5);
        let u = su2_from_rotation_vector(&k).unwrap();
        let w = so3_from_rotation_vector(&k).unwrap();
        assert!((covering_projection(&u).matrix() - w.matrix()).amax() < 1e-14);
    }

    #[test]
    fn so3_log_round_trip() {
        for k in [rv(0.0, 0.0, 0.0), rv(0.1, 0.2, -0.3), rv(1.0, 2.0, 0.5), rv(0.0, PI, 0.0), rv(0.0, 0.0, -PI)] {
            let w = so3_from_rotation_vector(&k).unwrap();
            let back = rotation_vector_from_so3(&w);
            let w2 = so3_from_rotation_vector(&back).unwrap();
            assert!((w.matrix() - w2.matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(killing_metric(&rv(0.0, 0.0, 0.0)).unwrap(), Matrix3::identity());
        let g = killing_metric(&rv(PI, 0.0, 0.0)).unwrap();
        let e = Matrix3::from_diagonal(&Vector3::new(1.0, 4.0 / (PI * PI), 4.0 / (PI * PI)));
        assert!((g - e).amax() < 1e-15);
        let k = rv(1.0, -0.5, 2.0);
        let g = killing_metric(&k).unwrap();
        assert_abs_diff_eq!(g.determinant().sqrt(), haar_weight(&k), epsilon = 1e-12);
        assert!(killing_metric(&rv(2.0 * PI, 0.0, 0.0)).is_err());
    }

    #[test]
    fn haar_examples() {
        assert_abs_diff_eq!(haar_weight(&rv(1e-9, 0.0, 0.0)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(haar_weight(&rv(PI, 0.0, 0.0)), 4.0 / (PI * PI), epsilon = 1e-15);
        // radial integral ∫ 4π k² w(k) dk over (0, 2π) = 16π²
        let rule = scaled_rule(40, 0.0, 2.0 * PI);
        let total: f64 = rule.iter().map(|&(k, w)| w * 4.0 * PI * k * k * sin_ratio(k)).sum();
        assert_abs_diff_eq!(total, 16.0 * PI * PI, epsilon = 1e-10);
    }

    #[test]
    fn conformal_examples() {
        assert_eq!(conformal_coordinates(&rv(0.0, 0.0, 0.0), 2.0).unwrap(), Vector3::zeros());
        let r = conformal_coordinates(&rv(0.0, PI, 0.0), 1.5).unwrap();
        assert_abs_diff_eq!(r.norm(), 1.5, epsilon = 1e-14);
        assert!(conformal_residual(&rv(0.7, -1.2, 2.2), 0.8).unwrap() < 1e-8);
    }

    #[test]
    fn generator_limits_and_difference() {
        let g = generator_coefficients(&rv(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(g.lambda, Matrix3::identity());
        assert_eq!(g.upsilon, Matrix3::identity());
        let k = Vector3::new(0.3, 1.4, -0.9);
        let g = generator_coefficients(&rv(k[0], k[1], k[2])).unwrap();
        let d = g.lambda - g.upsilon;
        for a in 0..3 {
            for c in 0..3 {
                let mut expect = 0.0;
                for b in 0..3 {
                    expect += levi_civita(a, b, c) * k[b];
                }
                assert_abs_diff_eq!(d[(a, c)], expect, epsilon = 1e-15);
            }
        }
    }

    fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
        match (a, b, c) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    }

    #[test]
    fn casimir_examples() {
        let k = casimir_grid(400);
        let c = radial_casimir_apply(&vec![3.0; 400]).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-9));
        let f: Vec<f64> = k.iter().map(|&k| character(1, k)).collect();
        let cf = radial_casimir_apply(&f).unwrap();
        for i in 50..350 {
            assert_abs_diff_eq!(cf[i] / f[i], -0.75, epsilon = 1e-3);
        }
        assert!(radial_casimir_apply(&[1.0; 4]).is_err());
    }

    #[test]
    fn character_limits() {
        assert_abs_diff_eq!(character(2, 0.0), 3.0);
        assert_abs_diff_eq!(character(1, 2.0 * PI), -2.0);
        assert_abs_diff_eq!(character(1, 1.0), 2.0 * 0.5f64.cos(), epsilon = 1e-15);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_abs_diff_eq!(s, 2.0 / 13.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn quadrature_examples() {
        let q = su2_haar_quadrature(32).unwrap();
        assert_abs_diff_eq!(q.nodes.iter().map(|n| n.1).sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(q.nodes.iter().all(|n| n.1 > 0.0));
        let chi = q.integrate(|k| character(1, k.norm()));
        assert!(chi.abs() < 1e-8);
        assert!(su2_haar_quadrature(1).is_err());
    }

    #[test]
    fn inner_automorphism_small_k() {
        let v = Su2Element::from_quaternion([0.4, 0.1, -0.7, 0.2]);
        let k = rv(0.2, -0.1, 0.3);
        let u = su2_from_rotation_vector(&k).unwrap();
        let lhs = covering_projection(&v).matrix() * k.vector();
        let rhs = rotation_vector_from_su2(&(v * u * v.inverse()));
        assert!((lhs - rhs.vector()).norm() < 1e-12);
    }
}
