//! Angular-momentum matrices for integer and half-integer labels, SU(2) elements in
//! rotation-vector coordinates, and Wigner representation matrices.
//!
//! Units: ħ = 1. The generators are Hermitian with `[S_a, S_b] = i ε_abc S_c`.
//! The representation is `D^s(u(k)) = exp(-i k^a S_a)`, so that `D^{1/2}(u) = u`
//! and `D^s(uv) = D^s(u) D^s(v)`.

use std::fmt;
use std::ops::{Mul, Neg};
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{RotationContext, RotationVector};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

const I: C64 = C64::new(0.0, 1.0);
const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Representation label `s`, stored as the exact integer `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SpinLabel {
    twice: u32,
}

impl SpinLabel {
    pub const ZERO: SpinLabel = SpinLabel { twice: 0 };
    pub const HALF: SpinLabel = SpinLabel { twice: 1 };
    pub const ONE: SpinLabel = SpinLabel { twice: 2 };

    pub const fn from_twice(twice: u32) -> Self {
        SpinLabel { twice }
    }

    pub const fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// `N(s) = 2s + 1`.
    pub const fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// `s(s+1)`.
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }

    pub const fn is_half_integer(self) -> bool {
        self.twice % 2 == 1
    }
}

impl fmt::Display for SpinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for SpinLabel {
    type Err = Error;

    /// Accepts `"3/2"`, `"1"`, `"0.5"`.
    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = || Error::Parse(format!("not a spin label: {text:?}"));
        if let Some((num, den)) = t.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            let den: u32 = den.trim().parse().map_err(|_| bad())?;
            return match den {
                1 => Ok(SpinLabel::from_twice(2 * num)),
                2 => Ok(SpinLabel::from_twice(num)),
                _ => Err(bad()),
            };
        }
        let v: f64 = t.parse().map_err(|_| bad())?;
        let twice = 2.0 * v;
        if v < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(bad());
        }
        Ok(SpinLabel::from_twice(twice.round() as u32))
    }
}

impl From<SpinLabel> for String {
    fn from(s: SpinLabel) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SpinLabel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Hermitian generator triple in the ladder basis `m = s, s-1, ..., -s`.
#[derive(Clone, Debug)]
pub struct SpinMatrices {
    pub s: SpinLabel,
    pub s1: CMat,
    pub s2: CMat,
    pub s3: CMat,
}

impl SpinMatrices {
    pub fn get(&self, axis: usize) -> &CMat {
        match axis {
            0 => &self.s1,
            1 => &self.s2,
            2 => &self.s3,
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn all(&self) -> [&CMat; 3] {
        [&self.s1, &self.s2, &self.s3]
    }

    /// `k^a S_a`.
    pub fn contract(&self, k: &Vector3<f64>) -> CMat {
        &self.s1 * C64::from(k[0]) + &self.s2 * C64::from(k[1]) + &self.s3 * C64::from(k[2])
    }
}

pub fn build_spin_matrices(s: SpinLabel) -> SpinMatrices {
    let n = s.dim();
    let sv = s.value();
    let m = |i: usize| sv - i as f64;
    let mut s3 = CMat::zeros(n, n);
    let mut plus = CMat::zeros(n, n);
    for i in 0..n {
        s3[(i, i)] = C64::from(m(i));
        if i > 0 {
            // S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>
            let mi = m(i);
            let c = (s.casimir() - mi * (mi + 1.0)).max(0.0).sqrt();
            plus[(i - 1, i)] = C64::from(c);
        }
    }
    let minus = plus.adjoint();
    let s1 = (&plus + &minus) * C64::from(0.5);
    let s2 = (&plus - &minus) * (-0.5 * I);
    SpinMatrices { s, s1, s2, s3 }
}

pub fn pauli_matrices() -> [Matrix2<C64>; 3] {
    [
        Matrix2::new(ZERO, ONE, ONE, ZERO),
        Matrix2::new(ZERO, -I, I, ZERO),
        Matrix2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

/// Unitary 2×2 matrix of determinant one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2Element {
    m: Matrix2<C64>,
}

impl Su2Element {
    pub fn new(m: Matrix2<C64>) -> Result<Self> {
        let unit = (m.adjoint() * m - Matrix2::identity()).norm();
        let det = (m.determinant() - ONE).norm();
        if !(unit <= 1e-10 && det <= 1e-10) {
            return invalid(format!(
                "matrix is not in SU(2): |u^+u - I| = {unit:.3e}, |det u - 1| = {det:.3e}"
            ));
        }
        Ok(Su2Element { m })
    }

    pub fn identity() -> Self {
        Su2Element { m: Matrix2::identity() }
    }

    /// Unit quaternion `a0 I - i (a1 σ1 + a2 σ2 + a3 σ3)`, normalized.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let [a, b, c, d] = q.map(|x| x / n);
        let m = Matrix2::new(
            C64::new(a, -d),
            C64::new(-c, -b),
            C64::new(c, -b),
            C64::new(a, d),
        );
        Su2Element { m }
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.m
    }

    pub fn inverse(&self) -> Self {
        Su2Element { m: self.m.adjoint() }
    }

    pub fn to_dmatrix(&self) -> CMat {
        CMat::from_iterator(2, 2, self.m.iter().copied())
    }
}

impl Mul for Su2Element {
    type Output = Su2Element;
    fn mul(self, rhs: Su2Element) -> Su2Element {
        Su2Element { m: self.m * rhs.m }
    }
}

impl Neg for Su2Element {
    type Output = Su2Element;
    fn neg(self) -> Su2Element {
        Su2Element { m: -self.m }
    }
}

/// `u(k) = cos(k/2) I - i sin(k/2) (k^a/k) σ_a`.
pub fn su2_from_rotation_vector(k: &RotationVector) -> Result<Su2Element> {
    let v = k.vector();
    let kn = v.norm();
    let bound = 2.0 * std::f64::consts::PI;
    if kn > bound * (1.0 + 1e-12) {
        return Err(Error::OutOfRange { magnitude: kn, bound });
    }
    let c = (kn / 2.0).cos();
    // sin(k/2)/k, regular at 0
    let sk = if kn < 1e-6 { 0.5 - kn * kn / 48.0 } else { (kn / 2.0).sin() / kn };
    let [x, y, z] = [v[0] * sk, v[1] * sk, v[2] * sk];
    Ok(Su2Element {
        m: Matrix2::new(C64::new(c, -z), C64::new(-y, -x), C64::new(y, -x), C64::new(c, z)),
    })
}

/// Inverse of [`su2_from_rotation_vector`], with `|k| ∈ [0, 2π]`; `-I` maps to `(0, 0, 2π)`.
pub fn rotation_vector_from_su2(u: &Su2Element) -> RotationVector {
    let m = u.matrix();
    let c = 0.5 * (m[(0, 0)] + m[(1, 1)]).re;
    // u = c I - i (v·σ), v = sin(k/2) n
    let v = Vector3::new(
        -0.5 * (m[(0, 1)] + m[(1, 0)]).im,
        0.5 * (m[(1, 0)] - m[(0, 1)]).re,
        -0.5 * (m[(0, 0)] - m[(1, 1)]).im,
    );
    let sn = v.norm();
    let k = 2.0 * sn.atan2(c);
    let vec = if sn < 1e-300 {
        if c > 0.0 {
            Vector3::zeros()
        } else {
            Vector3::new(0.0, 0.0, 2.0 * std::f64::consts::PI)
        }
    } else {
        v * (k / sn)
    };
    RotationVector::new_unchecked(vec, RotationContext::Su2)
}

/// Unitary representation matrix of label `s`.
#[derive(Clone, Debug)]
pub struct WignerD {
    pub s: SpinLabel,
    pub d: CMat,
}

/// Entries are the degree-`2s` polynomials in the entries of `u` obtained by letting
/// `u` act on `x^{s+m} y^{s-m} / √((s+m)!(s-m)!)` through `(x, y) ↦ (x, y) u`. This
/// equals `exp(-i k·S)` and makes the homomorphism and parity laws exact in form.
pub fn wigner_d(s: SpinLabel, u: &Su2Element) -> WignerD {
    let n = s.dim();
    let t = s.twice() as usize;
    let m = u.matrix();
    let (a, b, c, d) = (m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)]);
    let fact: Vec<f64> = std::iter::once(1.0)
        .chain((1..=t).scan(1.0, |acc, i| {
            *acc *= i as f64;
            Some(*acc)
        }))
        .collect();
    let binom = |n: usize, k: usize| fact[n] / (fact[k] * fact[n - k]);
    let pow = |z: C64, e: usize| (0..e).fold(ONE, |acc, _| acc * z);
    let mut out = CMat::zeros(n, n);
    // column index i: x-power p = t - i; row index r: x-power t - r
    for col in 0..n {
        let (p, q) = (t - col, col);
        for i in 0..=p {
            let fi = C64::from(binom(p, i)) * pow(a, i) * pow(b, p - i);
            for j in 0..=q {
                let row = t - (i + j);
                let term = fi * C64::from(binom(q, j)) * pow(c, j) * pow(d, q - j);
                out[(row, col)] += term;
            }
        }
        for row in 0..n {
            let norm = ((fact[t - row] * fact[row]) / (fact[p] * fact[q])).sqrt();
            out[(row, col)] *= norm;
        }
    }
    WignerD { s, d: out }
}

/// Same as [`wigner_d`]; the generators only supply the label.
pub fn wigner_d_with(spin: &SpinMatrices, u: &Su2Element) -> WignerD {
    wigner_d(spin.s, u)
}

/// `exp(i t H)` for Hermitian `H` via unitary diagonalization.
pub(crate) fn exp_i_hermitian(h: &CMat, t: f64) -> CMat {
    let n = h.nrows();
    if n == 1 {
        return CMat::from_element(1, 1, (I * t * h[(0, 0)].re).exp());
    }
    let eig = h.clone().symmetric_eigen();
    // Rayleigh quotients guard against values paired with the wrong vectors.
    let hv = h * &eig.eigenvectors;
    let lambdas = nalgebra::DVector::from_fn(n, |i, _| eig.eigenvectors.column(i).dotc(&hv.column(i)).re);
    let phases = CMat::from_diagonal(&lambdas.map(|l| (I * (t * l)).exp()));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// The sign `ρ` with `D^s(-u) = ρ D^s(u)`, verified numerically.
pub fn parity_factor(s: SpinLabel, u: &Su2Element) -> Result<i8> {
    let spin = build_spin_matrices(s);
    let d = wigner_d_with(&spin, u).d;
    let dm = wigner_d_with(&spin, &-*u).d;
    for rho in [1i8, -1] {
        if (&dm - &d * C64::from(rho as f64)).norm() <= 1e-9 * (s.dim() as f64).sqrt() {
            let expected = if s.is_half_integer() { -1 } else { 1 };
            if rho != expected {
                return Err(Error::Consistency(format!(
                    "parity {rho} for s = {s} disagrees with (-1)^(2s)"
                )));
            }
            return Ok(rho);
        }
    }
    Err(Error::Consistency(format!("no scalar relation between D^{s}(-u) and D^{s}(u)")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_abs(m: &CMat) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn label_parsing_and_display() {
        assert_eq!("1/2".parse::<SpinLabel>().unwrap(), SpinLabel::HALF);
        assert_eq!("1.5".parse::<SpinLabel>().unwrap().twice(), 3);
        assert_eq!("2".parse::<SpinLabel>().unwrap().dim(), 5);
        assert_eq!(SpinLabel::from_twice(5).to_string(), "5/2");
        assert!("1/3".parse::<SpinLabel>().is_err());
        assert!("-1".parse::<SpinLabel>().is_err());
    }

    #[test]
    fn trivial_representation_is_zero() {
        let sm = build_spin_matrices(SpinLabel::ZERO);
        for s in sm.all() {
            assert_eq!(s.shape(), (1, 1));
            assert_eq!(s[(0, 0)], ZERO);
        }
    }

    #[test]
    fn spin_half_is_half_pauli() {
        let sm = build_spin_matrices(SpinLabel::HALF);
        for (s, p) in sm.all().into_iter().zip(pauli_matrices()) {
            let p = CMat::from_iterator(2, 2, p.iter().copied()) * C64::from(0.5);
            assert!(max_abs(&(s - p)) < 1e-15);
        }
    }

    #[test]
    fn spin_one_casimir() {
        let sm = build_spin_matrices(SpinLabel::ONE);
        let diag: Vec<f64> = (0..3).map(|i| sm.s3[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
        let c = &sm.s1 * &sm.s1 + &sm.s2 * &sm.s2 + &sm.s3 * &sm.s3;
        assert!(max_abs(&(c - CMat::identity(3, 3) * C64::from(2.0))) < 1e-14);
    }

    #[test]
    fn pauli_identities() {
        let [s1, s2, s3] = pauli_matrices();
        assert_eq!(s3, Matrix2::new(ONE, ZERO, ZERO, -ONE));
        assert_eq!(s1 * s1, Matrix2::identity());
        assert_eq!(s1 * s2, s3 * I);
    }

    #[test]
    fn su2_examples() {
        let pi = std::f64::consts::PI;
        let id = su2_from_rotation_vector(&RotationVector::su2(Vector3::zeros()).unwrap()).unwrap();
        assert_eq!(*id.matrix(), Matrix2::identity());
        let u = su2_from_rotation_vector(&RotationVector::su2(Vector3::new(0.0, 0.0, pi)).unwrap())
            .unwrap();
        let expected = pauli_matrices()[2] * (-I);
        assert!((u.matrix() - expected).norm() < 1e-15);
        let u = su2_from_rotation_vector(
            &RotationVector::su2(Vector3::new(1.0, 2.0, -0.5).normalize() * 2.0 * pi).unwrap(),
        )
        .unwrap();
        assert!((u.matrix() + Matrix2::identity()).norm() < 1e-15);
    }

    #[test]
    fn inverse_map_examples() {
        let pi = std::f64::consts::PI;
        assert_eq!(*rotation_vector_from_su2(&Su2Element::identity()).vector(), Vector3::zeros());
        let u = Su2Element::new(pauli_matrices()[2] * (-I)).unwrap();
        let k = rotation_vector_from_su2(&u);
        assert!((k.vector() - Vector3::new(0.0, 0.0, pi)).norm() < 1e-15);
        let k = rotation_vector_from_su2(&-Su2Element::identity());
        assert_eq!(*k.vector(), Vector3::new(0.0, 0.0, 2.0 * pi));
    }

    #[test]
    fn non_unitary_rejected() {
        assert!(Su2Element::new(Matrix2::identity() * C64::from(2.0)).is_err());
        assert!(Su2Element::new(pauli_matrices()[0]).is_err());
    }

    #[test]
    fn wigner_half_equals_u() {
        let u = Su2Element::from_quaternion([0.3, -0.4, 0.5, 0.7]);
        let d = wigner_d(SpinLabel::HALF, &u).d;
        assert!(max_abs(&(d - u.to_dmatrix())) < 1e-12);
        let d = wigner_d(SpinLabel::HALF, &-Su2Element::identity()).d;
        assert!(max_abs(&(d + CMat::identity(2, 2))) < 1e-12);
        let d = wigner_d(SpinLabel::from_twice(4), &Su2Element::identity()).d;
        assert!(max_abs(&(d - CMat::identity(5, 5))) < 1e-15);
    }

    #[test]
    fn parity_examples() {
        let u = Su2Element::from_quaternion([0.1, 0.9, -0.2, 0.3]);
        assert_eq!(parity_factor(SpinLabel::ONE, &u).unwrap(), 1);
        assert_eq!(parity_factor(SpinLabel::HALF, &u).unwrap(), -1);
        assert_eq!(parity_factor(SpinLabel::ZERO, &u).unwrap(), 1);
    }

    #[test]
    fn quaternion_constructor_is_su2() {
        let u = Su2Element::from_quaternion([1.0, 2.0, 3.0, 4.0]);
        assert!(Su2Element::new(*u.matrix()).is_ok());
        assert_abs_diff_eq!(u.matrix().determinant().re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn polynomial_d_matches_exponential() {
        for twice in 0..=9u32 {
            let s = SpinLabel::from_twice(twice);
            let sm = build_spin_matrices(s);
            let k = Vector3::new(0.7, -1.9, 2.3);
            let u = su2_from_rotation_vector(&RotationVector::su2(k).unwrap()).unwrap();
            let expo = exp_i_hermitian(&sm.contract(&k), -1.0);
            assert!((wigner_d(s, &u).d - expo).norm() < 1e-12, "2s = {twice}");
        }
    }
}
