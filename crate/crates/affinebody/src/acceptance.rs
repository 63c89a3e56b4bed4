//! The acceptance suite: thirteen property-based and analytically checked criteria,
//! each reported with its measured quantities, wall time and time limit.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{
    casimir_grid, character, conformal_residual, covering_projection, generator_coefficients, haar_weight,
    killing_metric, radial_casimir_apply, rotation_vector_from_so3, so3_from_rotation_vector, su2_haar_quadrature,
    RotationVector,
};
use crate::hamiltonian::{
    assemble, GridSpec, InertialParams, ModelKind, Potential, SectorLabel,
};
use crate::peterweyl::{
    halfness_validate, haar_random_su2, montecarlo_full_product, reduced_scalar_product, synthesize_sector,
    ReducedAmplitude,
};
use crate::planar::{
    dalembert_planar, planar_quantum_operators, PlanarDiscretization, PlanarSector,
};
use crate::solver::{observed_order, richardson, solve_lowest, Method, SolverOptions};
use crate::spin::{
    build_spin_matrices, exp_i_hermitian, rotation_vector_from_su2, su2_from_rotation_vector, wigner_d, CMat, SpinLabel, C64,
};
use crate::hamiltonian::weight_factor;

/// Master seed of every randomized criterion.
pub const SEED: u64 = 20_241_101;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub limit_seconds: f64,
    pub detail: String,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] criterion {:2} {}: {} ({:.2} s of {:.0} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds,
            self.limit_seconds
        )
    }
}

pub const CRITERIA: [(usize, &str, f64); 13] = [
    (1, "spin algebra", 5.0),
    (2, "representation law", 10.0),
    (3, "geometry", 30.0),
    (4, "Peter-Weyl orthogonality", 60.0),
    (5, "radial Casimir", 10.0),
    (6, "sqrt(P) equivalence", 60.0),
    (7, "planar harmonic dilatation", 30.0),
    (8, "discreteness criterion", 120.0),
    (9, "d'Alembert oscillator ladder", 300.0),
    (10, "U(2) Legendre check", 30.0),
    (11, "n=3 spinor-spinor assembly", 600.0),
    (12, "superselection", 10.0),
    (13, "scalar-product reduction", 120.0),
];

/// Outcome of one criterion body: pass flag and a one-line summary.
type Outcome = Result<(bool, String)>;

pub fn run_criterion(id: usize) -> Option<CriterionResult> {
    let &(_, name, limit) = CRITERIA.iter().find(|c| c.0 == id)?;
    let body: fn() -> Outcome = match id {
        1 => spin_algebra,
        2 => representation_law,
        3 => geometry,
        4 => peter_weyl_orthogonality,
        5 => radial_casimir,
        6 => sqrt_p_equivalence,
        7 => planar_dilatation,
        8 => discreteness,
        9 => dalembert_ladder,
        10 => unitary_legendre,
        11 => spinor_assembly,
        12 => superselection,
        13 => scalar_product_reduction,
        _ => return None,
    };
    let start = Instant::now();
    let outcome = body();
    let seconds = start.elapsed().as_secs_f64();
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    let passed = ok && seconds < limit;
    let detail = if ok && !passed { format!("{detail}; exceeded the time limit") } else { detail };
    Some(CriterionResult { id, name, passed, seconds, limit_seconds: limit, detail })
}

pub fn run_all() -> Vec<CriterionResult> {
    CRITERIA.iter().filter_map(|c| run_criterion(c.0)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_su2(rng: &mut ChaCha8Rng) -> crate::spin::Su2Element {
    haar_random_su2(rng)
}

fn spin_algebra() -> Outcome {
    let mut worst: f64 = 0.0;
    for twice in 0..=25u32 {
        let s = SpinLabel::from_twice(twice);
        let m = build_spin_matrices(s);
        let scale = s.casimir().max(1.0);
        let i = C64::new(0.0, 1.0);
        for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let comm = m.get(a) * m.get(b) - m.get(b) * m.get(a);
            worst = worst.max((comm - m.get(c) * i).norm() / scale);
        }
        let cas = m.get(0) * m.get(0) + m.get(1) * m.get(1) + m.get(2) * m.get(2);
        let n = s.dim();
        worst = worst.max((cas - CMat::identity(n, n) * C64::from(s.casimir())).norm() / scale);
    }
    Ok((worst <= 1e-10, format!("max relative commutator/Casimir defect {worst:.2e} over 2s <= 25")))
}

fn representation_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut hom, mut par): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let (u, v) = (random_su2(&mut rng), random_su2(&mut rng));
        for twice in 0..=12u32 {
            let s = SpinLabel::from_twice(twice);
            let du = wigner_d(s, &u).d;
            let dv = wigner_d(s, &v).d;
            hom = hom.max((wigner_d(s, &(u * v)).d - &du * &dv).norm());
            let sign = if s.is_half_integer() { -1.0 } else { 1.0 };
            par = par.max((wigner_d(s, &-u).d - &du * C64::from(sign)).norm());
        }
    }
    Ok((
        hom <= 1e-9 && par <= 1e-12,
        format!("homomorphism defect {hom:.2e}, parity defect {par:.2e} (100 pairs, s <= 6)"),
    ))
}

/// `max |c Λ_a D - S_a D|` and `max |c Υ_a D - D S_a|` at `k` for
/// `D(l) = D^s(u(l)) = exp(-i l·S)`, central differences with step `h`.
fn generator_defects(s: SpinLabel, k: &Vector3<f64>, h: f64, c: C64) -> Result<(f64, f64)> {
    let sm = build_spin_matrices(s);
    let d = |l: &Vector3<f64>| exp_i_hermitian(&sm.contract(l), -1.0);
    let g = generator_coefficients(&RotationVector::su2(*k)?)?;
    let d0 = d(k);
    let partial: Vec<CMat> = (0..3)
        .map(|b| {
            let mut e = Vector3::zeros();
            e[b] = h;
            (d(&(k + e)) - d(&(k - e))) / C64::from(2.0 * h)
        })
        .collect();
    let directional = |coef: &Matrix3<f64>, a: usize| -> CMat {
        let mut acc = CMat::zeros(d0.nrows(), d0.ncols());
        for (b, p) in partial.iter().enumerate() {
            acc += p * C64::from(coef[(a, b)]);
        }
        acc * c
    };
    let (mut left, mut right): (f64, f64) = (0.0, 0.0);
    for a in 0..3 {
        left = left.max((directional(&g.lambda, a) - sm.get(a) * &d0).camax());
        right = right.max((directional(&g.upsilon, a) - &d0 * sm.get(a)).camax());
    }
    Ok((left, right))
}

/// Defects of `iħ Λ_a D = S_a D` and `iħ Υ_a D = D S_a` (ħ = 1). With the
/// homomorphic `D^s(u(k)) = exp(-i k·S)` these carry the factor `i`; the form with
/// `ħ/i` belongs to the opposite exponent sign.
pub fn generator_relation_residual(s: SpinLabel, k: &Vector3<f64>, h: f64) -> Result<(f64, f64)> {
    generator_defects(s, k, h, C64::new(0.0, 1.0))
}

fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let (mut haar, mut tau, mut gen, mut literal): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..100 {
        let dir = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).normalize();
        let k = dir * rng.gen_range(0.05..(2.0 * PI - 0.3));
        let rv = RotationVector::su2(k)?;
        let det = killing_metric(&rv)?.determinant();
        haar = haar.max((det.sqrt() - haar_weight(&rv)).abs());
        let (u, v) = (random_su2(&mut rng), random_su2(&mut rng));
        let lhs = covering_projection(&(u * v));
        let rhs: Matrix3<f64> = covering_projection(&u).matrix() * covering_projection(&v).matrix();
        tau = tau.max((lhs.matrix() - rhs).amax());
        for twice in 0..=4u32 {
            let s = SpinLabel::from_twice(twice);
            let (l, r) = generator_relation_residual(s, &k, 1e-4)?;
            gen = gen.max(l).max(r);
            literal = literal.max(generator_defects(s, &k, 1e-4, C64::new(0.0, -1.0))?.0);
        }
    }
    let ok = haar <= 1e-10 && tau <= 1e-10 && gen <= 1e-6;
    Ok((ok, format!("sqrt(det) vs Haar {haar:.2e}, covering homomorphism {tau:.2e}, generator relation i Lambda D = S D, i Upsilon D = D S {gen:.2e} (with -i instead: {literal:.1e})")))
}

fn peter_weyl_orthogonality() -> Outcome {
    let quad = su2_haar_quadrature(32)?;
    let labels: Vec<SpinLabel> = (0..=4).map(SpinLabel::from_twice).collect();
    let spins: Vec<_> = labels.iter().map(|s| build_spin_matrices(*s)).collect();
    let dim: usize = labels.iter().map(|s| s.dim() * s.dim()).sum();
    let mut gram = nalgebra::DMatrix::<C64>::zeros(dim, dim);
    let mut row = nalgebra::DVector::<C64>::zeros(dim);
    for (k, w) in &quad.nodes {
        let u = su2_from_rotation_vector(&RotationVector::su2(*k)?)?;
        let mut pos = 0;
        for sm in &spins {
            let d = crate::spin::wigner_d_with(sm, &u).d;
            for z in d.iter() {
                row[pos] = *z;
                pos += 1;
            }
        }
        gram.gerc(C64::from(*w), &row, &row, C64::from(1.0));
    }
    // gram[i][j] = Σ w D_i conj(D_j); expected δ_ij / (2s+1)
    let mut expected = nalgebra::DMatrix::<C64>::zeros(dim, dim);
    let mut pos = 0;
    for s in &labels {
        for _ in 0..s.dim() * s.dim() {
            expected[(pos, pos)] = C64::from(1.0 / s.dim() as f64);
            pos += 1;
        }
    }
    let res = (gram - expected).camax();
    Ok((res <= 1e-6, format!("max orthogonality residual {res:.2e} at level 32, s, s' <= 2")))
}

fn radial_casimir() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (twice, eig) in [(1u32, -0.75), (2, -2.0)] {
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let k = casimir_grid(n);
            let chi: Vec<f64> = k.iter().map(|&k| character(twice, k)).collect();
            let applied = radial_casimir_apply(&chi)?;
            let err = applied.iter().zip(&chi).map(|(a, c)| (a - eig * c).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        // eigenvalue from a least-squares Rayleigh quotient on the finest grid
        let k = casimir_grid(256);
        let chi: Vec<f64> = k.iter().map(|&k| character(twice, k)).collect();
        let applied = radial_casimir_apply(&chi)?;
        let lam = applied.iter().zip(&chi).map(|(a, c)| a * c).sum::<f64>() / chi.iter().map(|c| c * c).sum::<f64>();
        // errors at h, h/2 with the (n+1) spacing ratio
        let ratio: f64 = 257.0 / 129.0;
        let order = (errs[1] / errs[2]).ln() / ratio.ln();
        let good = (1.5..=2.5).contains(&order) && (lam - eig).abs() < 1e-2;
        ok &= good;
        parts.push(format!("chi_{}: eigenvalue {lam:.6} (exact {eig}), order {order:.2}", SpinLabel::from_twice(twice)));
    }
    Ok((ok, parts.join("; ")))
}

fn xgrid(len: f64, points: usize) -> Result<GridSpec> {
    format!("0:{len}:{points}").parse()
}

fn qgrid_small() -> Result<GridSpec> {
    "-1:1:8".parse()
}

fn sqrt_p_equivalence() -> Outcome {
    let p = InertialParams::new(2, 0.0, 1.0, 0.5);
    let sector = PlanarSector::new(1, 2);
    let levels = 5;
    // [divergence, flat] spectra at 512, 1024, 2048 points
    let mut series: [Vec<Vec<f64>>; 2] = [vec![], vec![]];
    for points in [512usize, 1024, 2048] {
        for (slot, disc) in [PlanarDiscretization::Divergence, PlanarDiscretization::Flat].into_iter().enumerate() {
            let (_, xop) = planar_quantum_operators(
                ModelKind::AffAff,
                &p,
                sector,
                &qgrid_small()?,
                &xgrid(20.0, points)?,
                &|_| 0.0,
                &|_| 0.0,
                disc,
            )?;
            series[slot].push(solve_lowest(&xop, &SolverOptions::new(levels, 1e-9))?.eigenvalues);
        }
    }
    let raw = (0..levels).map(|l| (series[0][2][l] - series[1][2][l]).abs()).fold(0.0, f64::max);
    let order = observed_order([series[0][0][0], series[0][1][0], series[0][2][0]], 2.0);
    // the divergence form sees f ~ x^(1/2) at the wall and converges at first order
    let extrap = |s: &Vec<Vec<f64>>, l: usize, orders: &[f64]| richardson(&[s[0][l], s[1][l], s[2][l]], 2.0, orders);
    let extrapolated = (0..levels)
        .map(|l| (extrap(&series[0], l, &[1.0, 2.0]) - extrap(&series[1], l, &[2.0, 4.0])).abs())
        .fold(0.0, f64::max);
    Ok((
        raw <= 1e-6,
        format!(
            "sector (1,2), box 20, 5 levels: 2048-point difference {raw:.2e}; divergence form converges at order {order:.2}, \
             Richardson-extrapolated difference {extrapolated:.1e}"
        ),
    ))
}

fn planar_dilatation() -> Outcome {
    let p = InertialParams::new(2, 0.0, 1.0, 0.5);
    let kappa = 1.0;
    let q: GridSpec = "-8:8:2048".parse()?;
    let (qop, _) = planar_quantum_operators(
        ModelKind::AffAff,
        &p,
        PlanarSector::new(0, 0),
        &q,
        &xgrid(5.0, 16)?,
        &|q| 0.5 * kappa * q * q,
        &|_| 0.0,
        PlanarDiscretization::Auto,
    )?;
    let spec = solve_lowest(&qop, &SolverOptions::new(6, 1e-9))?;
    let gap = (kappa / (2.0 * (p.a + 2.0 * p.b))).sqrt();
    let worst = spec.eigenvalues.windows(2).map(|w| rel(w[1] - w[0], gap)).fold(0.0, f64::max);
    Ok((worst <= 1e-4, format!("5 gaps vs {gap:.6}: max relative deviation {worst:.2e}")))
}

/// Lowest x-level of a sector on boxes `L` and `2L` at fixed spacing.
fn box_doubling(sector: PlanarSector, len: f64, per_unit: usize) -> Result<(f64, f64)> {
    let p = InertialParams::new(2, 0.0, 1.0, 0.5);
    let mut out = [0.0; 2];
    for (i, l) in [len, 2.0 * len].into_iter().enumerate() {
        let (_, xop) = planar_quantum_operators(
            ModelKind::AffAff,
            &p,
            sector,
            &qgrid_small()?,
            &xgrid(l, (l * per_unit as f64) as usize)?,
            &|_| 0.0,
            &|_| 0.0,
            PlanarDiscretization::Auto,
        )?;
        out[i] = solve_lowest(&xop, &SolverOptions::new(1, 1e-9))?.eigenvalues[0];
    }
    Ok((out[0], out[1]))
}

fn discreteness() -> Outcome {
    let (a1, a2) = box_doubling(PlanarSector::new(1, 2), 40.0, 50)?;
    let bound = a2 < 0.0 && (a2 - a1).abs() <= 1e-6;
    let (b1, b2) = box_doubling(PlanarSector::new(-1, 2), 40.0, 50)?;
    let threshold = 0.25; // ħ²/(4A)
    let cont = b1 >= threshold - 1e-9 && b2 >= threshold - 1e-9 && b2 < b1;
    Ok((
        bound && cont,
        format!(
            "(1,2): lowest {a1:.8} -> {a2:.8} on box 40 -> 80 (negative stable level required: {}); \
             (-1,2): {b1:.8} -> {b2:.8}, above the continuum threshold 1/4A and falling ({})",
            if bound { "found" } else { "absent" },
            if cont { "ok" } else { "violated" }
        ),
    ))
}

fn dalembert_ladder() -> Outcome {
    let p = InertialParams::new(2, 1.0, 0.0, 0.0);
    let pot = Potential::Harmonic { kappa: 1.0 };
    let grid: GridSpec = "0:9:1200,0:9:1200".parse()?;
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 3];
    let mut sectors = 0;
    for m in -2..=2 {
        for n in -2..=2 {
            if (m + n) % 2 != 0 {
                continue;
            }
            sectors += 1;
            let op = dalembert_planar(&p, PlanarSector::new(m, n), &grid, &pot, PlanarDiscretization::Auto)?;
            let spec = solve_lowest(&op, &SolverOptions::new(6, 1e-8))?;
            for e in &spec.eigenvalues {
                let level = e.round().max(2.0);
                worst = worst.max(rel(*e, level));
                for (slot, target) in [2.0, 3.0, 4.0].iter().enumerate() {
                    if rel(*e, *target) <= 1e-3 {
                        counts[slot] += 1;
                    }
                }
            }
        }
    }
    let ok = worst <= 1e-3 && counts == [1, 4, 10];
    Ok((
        ok,
        format!("{sectors} sectors with m+n even: max relative distance from N+2 {worst:.2e}; multiplicities of 2,3,4 = {counts:?}"),
    ))
}

fn unitary_legendre() -> Outcome {
    let p = InertialParams::new(2, 0.0, 1.0, 0.5);
    let x: GridSpec = format!("0:{PI}:2048").parse()?;
    let (_, xop) = planar_quantum_operators(
        ModelKind::UnitaryGroup,
        &p,
        PlanarSector::new(0, 0),
        &qgrid_small()?,
        &x,
        &|_| 0.0,
        &|_| 0.0,
        PlanarDiscretization::Auto,
    )?;
    let spec = solve_lowest(&xop, &SolverOptions::new(5, 1e-9))?;
    let mut worst: f64 = 0.0;
    for (l, e) in spec.eigenvalues.iter().enumerate() {
        let exact = (l * (l + 1)) as f64 / p.a;
        worst = worst.max((e - exact).abs() / exact.max(1.0));
    }
    Ok((worst <= 1e-3, format!("levels {:?}: max relative error {worst:.2e}", spec.eigenvalues.iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>())))
}

/// `(q, y₁, y₂)` grid over a box containing the n=3 Weyl chamber near its apex.
fn chamber_grid(points: usize) -> Result<GridSpec> {
    format!("-6:6:{points},0:6:{points},0:6:{points}").parse()
}

fn spinor_assembly() -> Outcome {
    let p = InertialParams::new(3, 0.0, 1.0, 0.5);
    let sector = SectorLabel::spin(3, SpinLabel::HALF, SpinLabel::HALF)?;
    let pot = Potential::Harmonic { kappa: 1.0 };
    let v = |q: &[f64]| pot.evaluate(ModelKind::AffAff, q);
    let op = assemble(ModelKind::AffAff, &p, &sector, &chamber_grid(16)?, &v)?;
    let defect = op.symmetry_defect();
    let opts = SolverOptions::new(4, 1e-6).with_method(Method::Lanczos).with_seed(SEED);
    let spec = solve_lowest(&op, &opts)?;
    let res = spec.residuals.iter().copied().fold(0.0, f64::max);
    let small = assemble(ModelKind::AffAff, &p, &sector, &chamber_grid(8)?, &v)?;
    let dense = solve_lowest(&small, &SolverOptions::new(4, 1e-9).with_method(Method::Dense))?;
    let iter = solve_lowest(&small, &SolverOptions::new(4, 1e-10).with_method(Method::Lanczos).with_seed(SEED))?;
    let agree = dense.eigenvalues.iter().zip(&iter.eigenvalues).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ok = defect <= 1e-12 && spec.len() == 4 && res <= 1e-6 && agree <= 1e-8;
    Ok((
        ok,
        format!(
            "dim {} symmetry defect {defect:.1e}, 4 Lanczos levels {:?} max residual {res:.1e}; 8^3 dense/Lanczos gap {agree:.1e}",
            op.dim(),
            spec.eigenvalues.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>()
        ),
    ))
}

fn superselection() -> Outcome {
    let (z, h, o) = (SpinLabel::ZERO, SpinLabel::HALF, SpinLabel::ONE);
    let a = halfness_validate(&[(z, z), (o, o)]);
    let b = halfness_validate(&[(h, h)]);
    let c = halfness_validate(&[(z, h)]);
    let d = halfness_validate(&[(z, z), (h, h)]);
    let rules = a.projectable && b.projectable && !c.violations.is_empty() && !c.projectable && !d.projectable;
    let grid: GridSpec = "-1:1:9,-1:1:9,-1:1:9".parse()?;
    let f = ReducedAmplitude::from_fn(SectorLabel::spin(3, h, h)?, grid, |q| {
        CMat::from_fn(2, 2, |r, c| C64::new(q[0] - 0.3 * r as f64, q[1] * q[2] + c as f64))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 12);
    let (mut flip, mut prob): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let (u, v) = (random_su2(&mut rng), random_su2(&mut rng));
        let q = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
        let psi = synthesize_sector(&f, &u, &q, &v)?;
        for (uu, vv) in [(-u, v), (u, -v)] {
            let other = synthesize_sector(&f, &uu, &q, &vv)?;
            flip = flip.max((&other + &psi).camax());
            prob = prob.max((other.map(|z| z.norm_sqr()) - psi.map(|z| z.norm_sqr())).amax());
        }
    }
    let ok = rules && flip <= 1e-12 && prob <= 1e-12;
    Ok((
        ok,
        format!(
            "half-ness rules {}; fermionic sign flip defect {flip:.1e}, |Psi|^2 invariance defect {prob:.1e}",
            if rules { "hold" } else { "violated" }
        ),
    ))
}

fn scalar_product_reduction() -> Outcome {
    let h = SpinLabel::HALF;
    let sector = SectorLabel::spin(3, h, h)?;
    let grid: GridSpec = "-1:1:48,-1:1:48,-1:1:48".parse()?;
    let f1 = ReducedAmplitude::from_fn(sector, grid.clone(), |q| {
        let g = (-(q[0] * q[0] + q[1] * q[1] + q[2] * q[2])).exp();
        CMat::from_fn(2, 2, |r, c| C64::new(g * (1.0 + r as f64), 0.5 * q[2] * c as f64))
    });
    let f2 = ReducedAmplitude::from_fn(sector, grid, |q| {
        CMat::from_fn(2, 2, |r, c| C64::new(0.5 + q[0] * (r + c) as f64, q[1] - 0.2 * r as f64))
    });
    let w = |q: &[f64]| weight_factor(q, ModelKind::AffAff);
    let mut parts = Vec::new();
    let mut ok = true;
    for (idx, (a, b)) in [(&f1, &f1), (&f1, &f2)].into_iter().enumerate() {
        let exact = reduced_scalar_product(a, b, &w)?;
        let psi_a = |u: &crate::spin::Su2Element, q: &[f64], v: &crate::spin::Su2Element| {
            synthesize_sector(a, u, q, v).map(|m| m[(0, 1)]).unwrap_or_default()
        };
        let psi_b = |u: &crate::spin::Su2Element, q: &[f64], v: &crate::spin::Su2Element| {
            synthesize_sector(b, u, q, v).map(|m| m[(0, 1)]).unwrap_or_default()
        };
        let mc = montecarlo_full_product(&psi_a, &psi_b, &w, &[(-1.0, 1.0); 3], 100_000, SEED + idx as u64)?;
        let agree = mc.agrees_with(exact, 3.0);
        ok &= agree;
        parts.push(format!(
            "pair {}: reduced {:.5}{:+.5}i, MC {:.5}{:+.5}i +- {:.5}",
            idx + 1,
            exact.re,
            exact.im,
            mc.re,
            mc.im,
            mc.stderr
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// One entry of the geometry invariant suite.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantCheck {
    pub check: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InvariantCheck {
    fn new(check: &'static str, residual: f64, tolerance: f64) -> Self {
        InvariantCheck { check, residual, tolerance, pass: residual <= tolerance }
    }
}

/// Rotation-group invariants at `points` pseudo-random elements drawn from `seed`.
pub fn invariant_suite(seed: u64, points: usize) -> Result<Vec<InvariantCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 7];
    for _ in 0..points {
        let dir = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).normalize();
        let k = dir * rng.gen_range(0.05..(2.0 * PI - 0.3));
        let rv = RotationVector::su2(k)?;
        worst[0] = worst[0].max((killing_metric(&rv)?.determinant().sqrt() - haar_weight(&rv)).abs());
        let (u, v) = (random_su2(&mut rng), random_su2(&mut rng));
        let prod: Matrix3<f64> = covering_projection(&u).matrix() * covering_projection(&v).matrix();
        worst[1] = worst[1].max((covering_projection(&(u * v)).matrix() - prod).amax());
        let g = generator_coefficients(&rv)?;
        let d = g.lambda - g.upsilon;
        let expected = crate::geometry::GeneratorCoefficients::d_matrix(&k);
        worst[2] = worst[2].max((d - expected).amax());
        for twice in 0..=4u32 {
            let (l, r) = generator_relation_residual(SpinLabel::from_twice(twice), &k, 1e-4)?;
            worst[3] = worst[3].max(l).max(r);
        }
        worst[4] = worst[4].max(conformal_residual(&rv, 1.0)?);
        let small = RotationVector::so3(dir * rng.gen_range(0.05..(PI - 0.05)))?;
        let back = rotation_vector_from_so3(&so3_from_rotation_vector(&small)?);
        worst[5] = worst[5].max((back.vector() - small.vector()).amax());
        let us = su2_from_rotation_vector(&rv)?;
        let again = su2_from_rotation_vector(&rotation_vector_from_su2(&us))?;
        worst[6] = worst[6].max((again.matrix() - us.matrix()).camax());
    }
    let (ok, _) = peter_weyl_orthogonality()?;
    let pw = if ok { 0.0 } else { f64::INFINITY };
    let k = casimir_grid(256);
    let chi: Vec<f64> = k.iter().map(|&k| character(1, k)).collect();
    let applied = radial_casimir_apply(&chi)?;
    let casimir = applied[32..224].iter().zip(&chi[32..224]).map(|(a, c)| (a + 0.75 * c).abs()).fold(0.0, f64::max);
    Ok(vec![
        InvariantCheck::new("sqrt-det-metric-vs-haar-weight", worst[0], 1e-10),
        InvariantCheck::new("covering-homomorphism", worst[1], 1e-10),
        InvariantCheck::new("lambda-minus-upsilon", worst[2], 1e-12),
        InvariantCheck::new("generator-relation", worst[3], 1e-6),
        InvariantCheck::new("conformal-metric", worst[4], 1e-8),
        InvariantCheck::new("so3-exp-log-roundtrip", worst[5], 1e-10),
        InvariantCheck::new("su2-exp-log-roundtrip", worst[6], 1e-12),
        InvariantCheck::new("peter-weyl-orthogonality", pw, 1e-6),
        InvariantCheck::new("radial-casimir-spin-half", casimir, 1e-3),
    ])
}
