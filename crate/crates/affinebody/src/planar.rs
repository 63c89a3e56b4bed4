//! The separable `n = 2` theory: separated coordinates `(q, x)`, classical reduced
//! kinetic energies, the one-axis quantum operators per Fourier sector, the
//! discreteness criterion, the d'Alembert operator in rotated coordinates and the
//! polar and elliptic coordinate maps.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{
    axis_kappas, axis_operator, casimir_constant, fiber_coupling, kinetic_coefficients, weight_factor, AxisWeight,
    Discretization, Frame, GridSpec, InertialParams, Labels, ModelKind, Potential, ReducedOperator, SectorLabel,
};
use crate::solver::{solve_lowest, SolverOptions};

/// Fourier labels `(m, n)` of `e^{imα} e^{inβ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanarSector {
    pub m: i32,
    pub n: i32,
}

impl PlanarSector {
    pub fn new(m: i32, n: i32) -> Self {
        PlanarSector { m, n }
    }

    pub fn label(self) -> SectorLabel {
        SectorLabel::fourier(self.m, self.n)
    }

    /// `|n - m|`, the strength of the repulsive `sh⁻²` term.
    pub fn repulsive(self) -> i32 {
        (self.n - self.m).abs()
    }

    /// `|n + m|`, the strength of the attractive `ch⁻²` term.
    pub fn attractive(self) -> i32 {
        (self.n + self.m).abs()
    }
}

impl std::fmt::Display for PlanarSector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

/// Classical phase-space point in separated coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub q: f64,
    pub x: f64,
    pub p: f64,
    pub p_x: f64,
    pub p_alpha: f64,
    pub p_beta: f64,
}

/// `(q, x) = ((q¹ + q²)/2, q² - q¹)`.
pub fn planar_coordinates(q1: f64, q2: f64) -> (f64, f64) {
    (0.5 * (q1 + q2), q2 - q1)
}

/// Inverse of [`planar_coordinates`].
pub fn planar_invariants(q: f64, x: f64) -> (f64, f64) {
    (q - 0.5 * x, q + 0.5 * x)
}

/// Conjugate momenta `(p, p_x) = (p₁ + p₂, (p₂ - p₁)/2)`.
pub fn planar_momenta(p1: f64, p2: f64) -> (f64, f64) {
    (p1 + p2, 0.5 * (p2 - p1))
}

/// Inverse of [`planar_momenta`].
pub fn planar_momenta_inverse(p: f64, p_x: f64) -> (f64, f64) {
    (0.5 * p - p_x, 0.5 * p + p_x)
}

/// Geodetic reduced kinetic energy of the affine-affine and mixed models.
pub fn classical_kinetic(kind: ModelKind, params: &InertialParams, s: &PlanarState) -> Result<f64> {
    params.validate(kind)?;
    if params.n != 2 {
        return invalid("the planar theory needs n = 2");
    }
    let (c, d) = match kind {
        ModelKind::AffAff => (params.a, params.a + 2.0 * params.b),
        ModelKind::MetAff | ModelKind::AffMet => (params.alpha(), params.alpha() + 2.0 * params.b),
        other => return invalid(format!("no separated classical kinetic energy for {other}")),
    };
    let spin = s.p_alpha - s.p_beta;
    let sum = s.p_alpha + s.p_beta;
    let mut t = s.p * s.p / (4.0 * d) + s.p_x * s.p_x / c;
    if spin != 0.0 {
        let sh = (s.x / 2.0).sinh();
        if sh == 0.0 {
            return Err(Error::Coincidence("x = 0 with nonzero p_α - p_β".into()));
        }
        t += spin * spin / (16.0 * c * sh * sh);
    }
    t -= sum * sum / (16.0 * c * (s.x / 2.0).cosh().powi(2));
    let mixed = params.i / (params.i * params.i - params.a * params.a);
    match kind {
        ModelKind::MetAff => t += mixed * s.p_alpha * s.p_alpha,
        ModelKind::AffMet => t += mixed * s.p_beta * s.p_beta,
        _ => {}
    }
    Ok(t)
}

/// Choice of x-axis discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanarDiscretization {
    /// Divergence form when `|n - m| = 0` (regular weight zero), flat form otherwise.
    Auto,
    Flat,
    Divergence,
}

impl std::str::FromStr for PlanarDiscretization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "flat" => Ok(Self::Flat),
            "divergence" => Ok(Self::Divergence),
            other => Err(Error::Parse(format!("unknown discretization {other:?} (auto, flat, divergence)"))),
        }
    }
}

fn resolve(disc: PlanarDiscretization, singular: bool) -> Discretization {
    match disc {
        PlanarDiscretization::Flat => Discretization::Flat,
        PlanarDiscretization::Divergence => Discretization::Divergence,
        PlanarDiscretization::Auto if singular => Discretization::Flat,
        PlanarDiscretization::Auto => Discretization::Divergence,
    }
}

/// Independent one-axis operators `(q-operator, x-operator)` of a sector with
/// `V = V_dil(q) + V_sh(x)`; the x-axis carries the sector terms and the kind's
/// additive constant, and lives on `x > 0`.
#[allow(clippy::too_many_arguments)]
pub fn planar_quantum_operators(
    kind: ModelKind,
    params: &InertialParams,
    sector: PlanarSector,
    qgrid: &GridSpec,
    xgrid: &GridSpec,
    v_dil: &dyn Fn(f64) -> f64,
    v_sh: &dyn Fn(f64) -> f64,
    disc: PlanarDiscretization,
) -> Result<(ReducedOperator, ReducedOperator)> {
    params.validate(kind)?;
    if params.n != 2 {
        return invalid("the planar theory needs n = 2");
    }
    if kind == ModelKind::DAlembert {
        return invalid("the d'Alembert model separates in rotated coordinates; use dalembert_planar");
    }
    if qgrid.ndim() != 1 || xgrid.ndim() != 1 {
        return invalid("planar operators need one-axis grids");
    }
    if xgrid.axes[0].min < 0.0 {
        return invalid("the x-grid must lie in x >= 0");
    }
    let kappas = axis_kappas(kind, params);
    if kappas.iter().any(|k| !(*k > 0.0)) {
        return invalid(format!("kinetic coefficients {kappas:?} are not positive for these constants"));
    }
    let label = sector.label();
    let (dq, eq) = axis_operator(qgrid, kappas[0], AxisWeight::Unit, v_dil, Discretization::Flat)?;
    let qop = ReducedOperator::from_tridiagonal(
        kind,
        *params,
        label,
        qgrid.clone(),
        Frame::PlanarQ,
        vec![1.0; dq.len()],
        dq,
        eq,
    );
    let weight = if kind == ModelKind::UnitaryGroup { AxisWeight::Sin } else { AxisWeight::Sinh };
    let cas = casimir_constant(kind, &label, params);
    let p = *params;
    let coupling = move |x: f64| -> f64 {
        fiber_coupling(kind, &p, &label, &[0.5 * x, -0.5 * x]).map(|m| m[(0, 0)]).unwrap_or(f64::INFINITY)
    };
    let pot = |x: f64| coupling(x) + cas + v_sh(x);
    let d = resolve(disc, sector.repulsive() != 0);
    let (dx, ex) = axis_operator(xgrid, kappas[1], weight, &pot, d)?;
    let wx = xgrid.axis_nodes(0).iter().map(|&x| weight.value(x)).collect();
    let xop = ReducedOperator::from_tridiagonal(kind, *params, label, xgrid.clone(), Frame::PlanarX, wx, dx, ex);
    Ok((qop, xop))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discreteness {
    Discrete,
    Continuous,
    Marginal,
}

/// Discrete iff `|n + m| > |n - m|`, continuous iff `<`, marginal at equality.
pub fn discreteness_criterion(sector: PlanarSector) -> Discreteness {
    match sector.attractive().cmp(&sector.repulsive()) {
        std::cmp::Ordering::Greater => Discreteness::Discrete,
        std::cmp::Ordering::Less => Discreteness::Continuous,
        std::cmp::Ordering::Equal => Discreteness::Marginal,
    }
}

/// Bottom of the continuous x-spectrum of the affine-affine and mixed models,
/// `1/(4c)` with `c = A` or `I + A`, plus the kind's additive constant.
pub fn continuum_threshold(kind: ModelKind, params: &InertialParams, sector: PlanarSector) -> f64 {
    let c = if kind == ModelKind::AffAff { params.a } else { params.alpha() };
    1.0 / (4.0 * c) + casimir_constant(kind, &sector.label(), params)
}

/// Exact bound states of the affine-affine or mixed x-operator on the half line:
/// `(1/c)[1/4 - (λ - κ - 1 - 2j)²/4]` with `κ = (1 + |n-m|)/2`, `λ = (1 + |n+m|)/2`,
/// plus the additive constant.
pub fn exact_bound_states(kind: ModelKind, params: &InertialParams, sector: PlanarSector) -> Vec<f64> {
    let c = if kind == ModelKind::AffAff { params.a } else { params.alpha() };
    let cas = casimir_constant(kind, &sector.label(), params);
    let top = (sector.attractive() - sector.repulsive()) as f64 / 2.0 - 1.0;
    let mut out = Vec::new();
    let mut j = 0.0;
    while top - 2.0 * j > 0.0 {
        let s = top - 2.0 * j;
        out.push((0.25 - 0.25 * s * s) / c + cas);
        j += 1.0;
    }
    out
}

/// `(Q⁺, Q⁻) = ((Q¹ + Q²)/√2, (Q¹ - Q²)/√2)`.
pub fn rotated_coordinates(q1: f64, q2: f64) -> (f64, f64) {
    ((q1 + q2) / SQRT_2, (q1 - q2) / SQRT_2)
}

pub fn rotated_inverse(qp: f64, qm: f64) -> (f64, f64) {
    ((qp + qm) / SQRT_2, (qp - qm) / SQRT_2)
}

/// Polar `(r, φ)` of `(Q⁺, Q⁻)` with `φ ∈ [0, 2π)`.
pub fn polar_coordinates(qp: f64, qm: f64) -> Result<(f64, f64)> {
    if qp == 0.0 && qm == 0.0 {
        return invalid("polar angle undefined at the origin");
    }
    Ok((qp.hypot(qm), qm.atan2(qp).rem_euclid(2.0 * PI)))
}

pub fn polar_inverse(r: f64, phi: f64) -> (f64, f64) {
    (r * phi.cos(), r * phi.sin())
}

/// Elliptic `(ρ, λ)` with `Q⁺ = ch ρ cos λ`, `Q⁻ = sh ρ sin λ`, `ρ ≥ 0`, `λ ∈ [0, 2π)`.
pub fn elliptic_coordinates(qp: f64, qm: f64) -> (f64, f64) {
    let d1 = (qp - 1.0).hypot(qm);
    let d2 = (qp + 1.0).hypot(qm);
    let ch = (0.5 * (d1 + d2)).max(1.0);
    let rho = ch.acosh();
    let sh = rho.sinh();
    let c = (qp / ch).clamp(-1.0, 1.0);
    let lambda = if sh > 0.0 {
        (qm / sh).atan2(c)
    } else {
        // on the focal segment both signs of sin λ give the same point
        c.acos()
    };
    (rho, lambda.rem_euclid(2.0 * PI))
}

pub fn elliptic_inverse(rho: f64, lambda: f64) -> (f64, f64) {
    (rho.cosh() * lambda.cos(), rho.sinh() * lambda.sin())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoordinateSet {
    pub rotated: (f64, f64),
    pub polar: Option<(f64, f64)>,
    pub elliptic: (f64, f64),
}

/// Rotated, polar and elliptic coordinates of `(Q¹, Q²)`.
pub fn coordinate_transforms(q1: f64, q2: f64) -> CoordinateSet {
    let (qp, qm) = rotated_coordinates(q1, q2);
    CoordinateSet { rotated: (qp, qm), polar: polar_coordinates(qp, qm).ok(), elliptic: elliptic_coordinates(qp, qm) }
}

/// d'Alembert operator of sector `(m, n)` on a `(Q⁺, Q⁻)` grid in the chamber
/// `Q⁺, Q⁻ > 0`. The couplings use `𝗆 = n - m` on `(Q¹ - Q²)⁻²` and `𝗇 = n + m` on
/// `(Q¹ + Q²)⁻²`; each axis is a planar radial operator with angular label `𝗇/2`
/// resp. `𝗆/2`. Separable potentials keep a Kronecker-sum structure.
pub fn dalembert_planar(
    params: &InertialParams,
    sector: PlanarSector,
    grid: &GridSpec,
    potential: &Potential,
    disc: PlanarDiscretization,
) -> Result<ReducedOperator> {
    let kind = ModelKind::DAlembert;
    params.validate(kind)?;
    if params.n != 2 {
        return invalid("the planar d'Alembert operator needs n = 2");
    }
    if grid.ndim() != 2 {
        return invalid("the d'Alembert grid needs two axes (Q+, Q-)");
    }
    if grid.axes.iter().any(|a| a.min < 0.0) {
        return invalid("the (Q+, Q-) grid must lie in the chamber Q+ >= 0, Q- >= 0");
    }
    if (sector.m + sector.n).rem_euclid(2) != 0 {
        return invalid(format!(
            "sector {sector}: m + n is odd, so the couplings have half-integer axis labels and the sector does not contribute"
        ));
    }
    let (cd, _) = kinetic_coefficients(kind, params);
    let labels = [sector.attractive(), sector.repulsive()];
    let (sep, custom): (Option<f64>, bool) = match potential {
        Potential::None => (Some(0.0), false),
        Potential::Harmonic { kappa } | Potential::Isotropic { kappa } => (Some(*kappa), false),
        Potential::Custom { .. } => (Some(0.0), true),
    };
    let kappa = sep.unwrap_or(0.0);
    let mut factors = Vec::with_capacity(2);
    for (axis, &k) in labels.iter().enumerate() {
        let ell = k as f64 / 2.0;
        let sub = GridSpec::new(vec![grid.axes[axis]], grid.offset)?;
        let pot = |x: f64| cd * ell * ell / (x * x) + 0.5 * kappa * x * x;
        let d = resolve(disc, k != 0);
        factors.push(axis_operator(&sub, cd, AxisWeight::Linear, &pot, d)?);
    }
    let weight: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.node(i);
            let (q1, q2) = rotated_inverse(x[0], x[1]);
            weight_factor(&[q1, q2], kind)
        })
        .collect();
    let mut op = ReducedOperator::from_kronecker_sum(
        kind,
        *params,
        sector.label(),
        grid.clone(),
        Frame::Rotated,
        weight,
        factors,
    );
    if custom {
        let mut coo = nalgebra_sparse::CooMatrix::from(&op.matrix);
        for i in 0..grid.len() {
            let x = grid.node(i);
            let (q1, q2) = rotated_inverse(x[0], x[1]);
            coo.push(i, i, potential.evaluate(kind, &[q1, q2]));
        }
        op.matrix = nalgebra_sparse::CsrMatrix::from(&coo);
        op.kronecker = None;
    }
    Ok(op)
}

/// Lowest x-level of every sector with `|m|, |n| ≤ max_label`, geodetic (`V = 0`).
pub fn sector_scan(
    kind: ModelKind,
    params: &InertialParams,
    xgrid: &GridSpec,
    max_label: i32,
) -> Result<Vec<(PlanarSector, f64)>> {
    let qgrid: GridSpec = "-1:1:8".parse()?;
    let mut out = Vec::new();
    for m in -max_label..=max_label {
        for n in -max_label..=max_label {
            let sector = PlanarSector::new(m, n);
            let (_, xop) = planar_quantum_operators(
                kind,
                params,
                sector,
                &qgrid,
                xgrid,
                &|_| 0.0,
                &|_| 0.0,
                PlanarDiscretization::Auto,
            )?;
            let spec = solve_lowest(&xop, &SolverOptions::new(1, 1e-6))?;
            out.push((sector, spec.eigenvalues[0]));
        }
    }
    Ok(out)
}

/// `m` label of a planar sector label.
pub fn planar_sector_of(label: &SectorLabel) -> Result<PlanarSector> {
    match label.labels {
        Labels::Fourier { m, n } => Ok(PlanarSector::new(m, n)),
        Labels::Spin { .. } => invalid("not an n = 2 sector"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::assemble;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> InertialParams {
        InertialParams::new(2, 2.0, 1.0, 0.5)
    }

    #[test]
    fn coordinate_maps() {
        assert_eq!(planar_coordinates(0.7, 0.7), (0.7, 0.0));
        assert_eq!(planar_invariants(0.0, 1.0), (-0.5, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (q1, q2, v1, v2, p1, p2): (f64, f64, f64, f64, f64, f64) =
                (rng.gen(), rng.gen(), rng.gen(), rng.gen(), rng.gen(), rng.gen());
            let (q, x) = planar_coordinates(q1, q2);
            let (a, b) = planar_invariants(q, x);
            assert_abs_diff_eq!(a, q1, epsilon = 1e-15);
            assert_abs_diff_eq!(b, q2, epsilon = 1e-15);
            let (qd, xd) = planar_coordinates(v1, v2);
            let (p, px) = planar_momenta(p1, p2);
            assert_abs_diff_eq!(p * qd + px * xd, p1 * v1 + p2 * v2, epsilon = 1e-14);
            let (r1, r2) = planar_momenta_inverse(p, px);
            assert_abs_diff_eq!(r1, p1, epsilon = 1e-15);
            assert_abs_diff_eq!(r2, p2, epsilon = 1e-15);
        }
    }

    #[test]
    fn classical_examples() {
        let p = params();
        let zero = PlanarState { x: 0.5, ..Default::default() };
        assert_eq!(classical_kinetic(ModelKind::AffAff, &p, &zero).unwrap(), 0.0);
        let s = PlanarState { q: 0.0, x: 0.8, p: 0.3, p_x: -0.2, p_alpha: 1.5, p_beta: 1.5 };
        let expect = 0.09 / (4.0 * 2.0) + 0.04 / 1.0 - 9.0 / (16.0 * (0.4f64).cosh().powi(2));
        assert_abs_diff_eq!(classical_kinetic(ModelKind::AffAff, &p, &s).unwrap(), expect, epsilon = 1e-14);
        let a = PlanarState { p_alpha: 1.3, p_beta: 0.0, ..s };
        let b = PlanarState { p_alpha: 0.0, p_beta: 1.3, ..s };
        assert_abs_diff_eq!(
            classical_kinetic(ModelKind::MetAff, &p, &a).unwrap(),
            classical_kinetic(ModelKind::AffMet, &p, &b).unwrap(),
            epsilon = 1e-14
        );
        let bad = PlanarState { x: 0.0, p_alpha: 1.0, ..Default::default() };
        assert!(classical_kinetic(ModelKind::AffAff, &p, &bad).is_err());
    }

    #[test]
    fn criterion_examples() {
        assert_eq!(discreteness_criterion(PlanarSector::new(1, 2)), Discreteness::Discrete);
        assert_eq!(discreteness_criterion(PlanarSector::new(-1, 2)), Discreteness::Continuous);
        assert_eq!(discreteness_criterion(PlanarSector::new(0, 0)), Discreteness::Marginal);
        assert_eq!(discreteness_criterion(PlanarSector::new(0, 2)), Discreteness::Marginal);
    }

    #[test]
    fn geodetic_scalar_x_operator_has_no_potential() {
        let p = InertialParams::new(2, 0.0, 1.0, 0.5);
        let q: GridSpec = "-1:1:8".parse().unwrap();
        let x: GridSpec = "0:6:40".parse().unwrap();
        let (_, xop) = planar_quantum_operators(
            ModelKind::AffAff,
            &p,
            PlanarSector::new(0, 0),
            &q,
            &x,
            &|_| 0.0,
            &|_| 0.0,
            PlanarDiscretization::Divergence,
        )
        .unwrap();
        let (d, e) = axis_operator(&x, 1.0, AxisWeight::Sinh, &|_| 0.0, Discretization::Divergence).unwrap();
        assert_eq!(xop.tridiagonal().unwrap(), (d, e));
    }

    #[test]
    fn pöschl_teller_oracle() {
        // (3,4): one bound state at (1/4 - 1)/A
        let p = InertialParams::new(2, 0.0, 1.0, 0.5);
        let exact = exact_bound_states(ModelKind::AffAff, &p, PlanarSector::new(3, 4));
        assert_eq!(exact.len(), 1);
        assert_abs_diff_eq!(exact[0], -0.75, epsilon = 1e-15);
        assert!(exact_bound_states(ModelKind::AffAff, &p, PlanarSector::new(1, 2)).is_empty());
        let q: GridSpec = "-1:1:8".parse().unwrap();
        let mut prev = None;
        for l in [20.0, 40.0] {
            let x: GridSpec = format!("0:{l}:{}", (l * 100.0) as usize).parse().unwrap();
            let (_, xop) = planar_quantum_operators(
                ModelKind::AffAff,
                &p,
                PlanarSector::new(3, 4),
                &q,
                &x,
                &|_| 0.0,
                &|_| 0.0,
                PlanarDiscretization::Auto,
            )
            .unwrap();
            let e = solve_lowest(&xop, &SolverOptions::new(1, 1e-8)).unwrap().eigenvalues[0];
            assert!((e - exact[0]).abs() < 1e-4, "{e}");
            if let Some(p) = prev {
                let change: f64 = e - p;
                assert!(change.abs() < 1e-6);
            }
            prev = Some(e);
        }
    }

    #[test]
    fn kind_independence() {
        // mixed x-operators equal the affine one with A → I + A plus the constant
        let p = params();
        let q: GridSpec = "-1:1:8".parse().unwrap();
        let x: GridSpec = "0:5:30".parse().unwrap();
        let s = PlanarSector::new(2, 1);
        let build = |kind, pp: &InertialParams| {
            planar_quantum_operators(kind, pp, s, &q, &x, &|_| 0.0, &|_| 0.0, PlanarDiscretization::Flat)
                .unwrap()
                .1
                .tridiagonal()
                .unwrap()
        };
        let affine = build(ModelKind::AffAff, &InertialParams::new(2, 0.0, p.alpha(), p.b));
        for kind in [ModelKind::MetAff, ModelKind::AffMet] {
            let mixed = build(kind, &p);
            let c = casimir_constant(kind, &s.label(), &p);
            for (a, b) in affine.0.iter().zip(&mixed.0) {
                assert_abs_diff_eq!(a + c, *b, epsilon = 1e-12);
            }
            assert_eq!(affine.1, mixed.1);
        }
    }

    #[test]
    fn separability_matches_full_assembly() {
        let p = InertialParams::new(2, 0.0, 1.0, 0.5);
        let s = PlanarSector::new(1, 3);
        let q: GridSpec = "-3:3:16".parse().unwrap();
        let x: GridSpec = "0:4:14".parse().unwrap();
        let (qop, xop) =
            planar_quantum_operators(ModelKind::AffAff, &p, s, &q, &x, &|_| 0.0, &|_| 0.0, PlanarDiscretization::Flat)
                .unwrap();
        let eq = solve_lowest(&qop, &SolverOptions::new(16, 1e-9)).unwrap().eigenvalues;
        let ex = solve_lowest(&xop, &SolverOptions::new(14, 1e-9)).unwrap().eigenvalues;
        let mut sums: Vec<f64> = eq.iter().flat_map(|a| ex.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        // Jacobi grid (q, y = q¹ - q² = -x)
        let grid: GridSpec = "-3:3:16,0:4:14".parse().unwrap();
        let full = assemble(ModelKind::AffAff, &p, &s.label(), &grid, &|_: &[f64]| 0.0).unwrap();
        let spec = solve_lowest(&full, &SolverOptions::new(10, 1e-9)).unwrap();
        for (a, b) in spec.eigenvalues.iter().zip(&sums) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn dalembert_symmetries() {
        let p = InertialParams::new(2, 1.0, 0.0, 0.0);
        let g: GridSpec = "0:4:20,0:4:20".parse().unwrap();
        let pot = Potential::Harmonic { kappa: 1.0 };
        let a = dalembert_planar(&p, PlanarSector::new(1, 3), &g, &pot, PlanarDiscretization::Auto).unwrap();
        let b = dalembert_planar(&p, PlanarSector::new(-1, -3), &g, &pot, PlanarDiscretization::Auto).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert!(a.symmetry_defect() < 1e-15);
        assert!(dalembert_planar(&p, PlanarSector::new(1, 2), &g, &pot, PlanarDiscretization::Auto).is_err());
    }

    #[test]
    fn transforms() {
        let c = coordinate_transforms(0.4, 0.4);
        assert_abs_diff_eq!(c.rotated.1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (q1, q2) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let c = coordinate_transforms(q1, q2);
            let (qp, qm) = c.rotated;
            assert_abs_diff_eq!(qp * qp + qm * qm, q1 * q1 + q2 * q2, epsilon = 1e-12);
            let (a, b) = rotated_inverse(qp, qm);
            assert_abs_diff_eq!(a, q1, epsilon = 1e-14);
            assert_abs_diff_eq!(b, q2, epsilon = 1e-14);
            let (r, phi) = c.polar.unwrap();
            let (x, y) = polar_inverse(r, phi);
            assert!((x - qp).abs() < 1e-12 && (y - qm).abs() < 1e-12);
            let (rho, lam) = c.elliptic;
            assert!(rho >= 0.0 && (0.0..2.0 * PI).contains(&lam));
            let (x, y) = elliptic_inverse(rho, lam);
            assert!((x - qp).abs() < 1e-12 && (y - qm).abs() < 1e-12, "{qp},{qm} -> {x},{y}");
        }
    }
}
