//! Wave functions from reduced amplitudes: synthesis on the covering group, the
//! superselection (half-ness) rules, constraints at degenerate deformations and
//! under the exchange group K⁺, Monte-Carlo scalar products and the amplitude file
//! format.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{rotation_vector_from_so3, RotationMatrix};
use crate::hamiltonian::{in_chamber, Axis, Frame, GridSpec, Labels, ModelKind, SectorLabel};
use crate::solver::weighted_inner_product;
use crate::spin::{su2_from_rotation_vector, wigner_d, CMat, SpinLabel, Su2Element, C64};

/// Matrix-valued amplitude `f^{αβ}` sampled on a grid; fibers flattened row-major,
/// nodes in grid order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedAmplitude {
    pub sector: SectorLabel,
    pub grid: GridSpec,
    pub frame: Frame,
    pub values: Vec<C64>,
}

impl ReducedAmplitude {
    /// Zero amplitude on a grid of raw invariants.
    pub fn zeros(sector: SectorLabel, grid: GridSpec) -> Self {
        let len = grid.len() * sector.fiber_dim();
        ReducedAmplitude { sector, grid, frame: Frame::Invariants, values: vec![C64::from(0.0); len] }
    }

    /// Sample `f(q)` at every node of a grid of raw invariants.
    pub fn from_fn(sector: SectorLabel, grid: GridSpec, f: impl Fn(&[f64]) -> CMat) -> Self {
        let mut out = Self::zeros(sector, grid);
        for node in 0..out.grid.len() {
            let m = f(&out.grid.node(node));
            out.set_node_matrix(node, &m);
        }
        out
    }

    pub fn with_values(sector: SectorLabel, grid: GridSpec, frame: Frame, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() * sector.fiber_dim() {
            return Err(Error::Dimension(format!(
                "{} values for {} nodes of fiber dimension {}",
                values.len(),
                grid.len(),
                sector.fiber_dim()
            )));
        }
        if grid.ndim() != sector.dim && matches!(frame, Frame::Invariants | Frame::Jacobi) {
            return Err(Error::Dimension(format!("grid has {} axes for an n = {} sector", grid.ndim(), sector.dim)));
        }
        Ok(ReducedAmplitude { sector, grid, frame, values })
    }

    pub fn node_matrix(&self, node: usize) -> CMat {
        let (na, nb) = self.sector.fiber_shape();
        let nf = na * nb;
        CMat::from_row_slice(na, nb, &self.values[node * nf..(node + 1) * nf])
    }

    pub fn set_node_matrix(&mut self, node: usize, m: &CMat) {
        let (na, nb) = self.sector.fiber_shape();
        assert_eq!(m.shape(), (na, nb), "fiber shape mismatch");
        let nf = na * nb;
        for r in 0..na {
            for c in 0..nb {
                self.values[node * nf + r * nb + c] = m[(r, c)];
            }
        }
    }

    /// Invariants at a node, if the frame determines them.
    pub fn node_invariants(&self, node: usize) -> Option<Vec<f64>> {
        self.frame.to_invariants(&self.grid.node(node))
    }

    pub fn cell_volume(&self) -> f64 {
        self.frame.cell_volume(&self.grid)
    }

    /// Multilinear interpolation at invariants `q`; zero outside the grid box, constant
    /// continuation in the half cells between the outermost nodes and the box faces.
    pub fn interpolate(&self, q: &[f64]) -> CMat {
        let (na, nb) = self.sector.fiber_shape();
        let x = self.frame.from_invariants(q);
        let d = self.grid.ndim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let ax = &self.grid.axes[a];
            if x[a] < ax.min || x[a] > ax.max {
                return CMat::zeros(na, nb);
            }
            let h = self.grid.spacing(a);
            let t = ((x[a] - ax.min) / h - self.grid.offset).clamp(0.0, (ax.points - 1) as f64);
            let i = (t.floor() as usize).min(ax.points.saturating_sub(2));
            base[a] = i;
            frac[a] = (t - i as f64).clamp(0.0, 1.0);
        }
        let mut out = CMat::zeros(na, nb);
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                out += self.node_matrix(self.grid.ravel(&idx)) * C64::from(w);
            }
        }
        out
    }

    /// Divide every node by `√P` at its invariants, turning a rescaled `g` into `f`.
    pub fn unrescale(&mut self, kind: ModelKind) -> Result<()> {
        let nf = self.sector.fiber_dim();
        for node in 0..self.grid.len() {
            let q = self
                .node_invariants(node)
                .ok_or_else(|| Error::Invalid("frame does not determine the invariants".into()))?;
            let p = crate::hamiltonian::weight_factor(&q, kind);
            let s = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
            for v in &mut self.values[node * nf..(node + 1) * nf] {
                *v *= s;
            }
        }
        Ok(())
    }
}

/// `Ψ^{sj}(u, q, v) = D^s(u) f^{sj}(q) D^j(v⁻¹)` for an `n = 3` spin sector.
pub fn synthesize_sector(f: &ReducedAmplitude, u: &Su2Element, q: &[f64], v: &Su2Element) -> Result<CMat> {
    match f.sector.labels {
        Labels::Spin { s, j } => {
            let fq = f.interpolate(q);
            Ok(wigner_d(s, u).d * fq * wigner_d(j, &v.inverse()).d)
        }
        Labels::Fourier { .. } => invalid("n = 2 sectors are synthesized with synthesize_planar"),
    }
}

/// Per-sector matrices `Ψ^{sj}(u, q, v)`.
pub fn synthesize(amplitudes: &[ReducedAmplitude], u: &Su2Element, q: &[f64], v: &Su2Element) -> Result<Vec<CMat>> {
    amplitudes.iter().map(|f| synthesize_sector(f, u, q, v)).collect()
}

/// Sum over sectors of `Tr Ψ^{sj}(u, q, v)`.
pub fn synthesize_trace(amplitudes: &[ReducedAmplitude], u: &Su2Element, q: &[f64], v: &Su2Element) -> Result<C64> {
    Ok(synthesize(amplitudes, u, q, v)?.iter().map(|m| m.trace()).sum())
}

/// `e^{imα} f^{mn}(q) e^{-inβ}` for an `n = 2` sector.
pub fn synthesize_planar(f: &ReducedAmplitude, alpha: f64, q: &[f64], beta: f64) -> Result<C64> {
    match f.sector.labels {
        Labels::Fourier { m, n } => {
            let phase = C64::from_polar(1.0, m as f64 * alpha - n as f64 * beta);
            Ok(f.interpolate(q)[(0, 0)] * phase)
        }
        Labels::Spin { .. } => invalid("spin sectors are synthesized with synthesize_sector"),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuperselectionReport {
    pub bosonic: bool,
    pub fermionic: bool,
    /// Exactly one class present and no rejected sector.
    pub projectable: bool,
    pub violations: Vec<String>,
}

/// Classify `(s, j)` pairs; pairs with half-integer `j - s` are violations.
pub fn halfness_validate(sectors: &[(SpinLabel, SpinLabel)]) -> SuperselectionReport {
    let mut report = SuperselectionReport { bosonic: false, fermionic: false, projectable: false, violations: vec![] };
    for &(s, j) in sectors {
        if s.is_half_integer() != j.is_half_integer() {
            report.violations.push(format!("sector ({s},{j}): j - s is half-integer, the amplitude vanishes identically"));
        } else if s.is_half_integer() {
            report.fermionic = true;
        } else {
            report.bosonic = true;
        }
    }
    if report.bosonic && report.fermionic {
        report
            .violations
            .push("integer and half-integer sectors superposed; |Ψ|² is not a function on the base group".into());
    }
    report.projectable = report.violations.is_empty() && (report.bosonic ^ report.fermionic);
    report
}

/// Violation of the total-degeneracy constraint for a matrix `f(cIₙ)`: its norm when
/// `α ≠ β`, its distance from multiples of the identity when `α = β`.
pub fn degenerate_constraint_violation(f: &CMat, diagonal_sector: bool) -> f64 {
    if !diagonal_sector {
        return f.norm();
    }
    if f.nrows() != f.ncols() {
        return f.norm();
    }
    let n = f.nrows();
    let mean = f.trace() / C64::from(n as f64);
    (f - CMat::identity(n, n) * mean).norm()
}

/// Value of `f` at the total-degeneracy point `q¹ = ⋯ = qⁿ = c`, extrapolated
/// quadratically in the distance from that point over the three nearest
/// chamber-interior nodes at distinct distances.
pub fn degenerate_value(f: &ReducedAmplitude, kind: ModelKind, c: f64) -> Result<CMat> {
    let n = f.sector.dim;
    let diag = vec![c; n];
    let mut cand: Vec<(f64, usize)> = Vec::new();
    for node in 0..f.grid.len() {
        let Some(q) = f.node_invariants(node) else {
            return invalid("frame does not determine the invariants");
        };
        if in_chamber(&q, kind) {
            let r = q.iter().zip(&diag).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            cand.push((r, node));
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut picked: Vec<(f64, usize)> = Vec::new();
    for (r, node) in cand {
        if picked.iter().all(|p| (p.0 - r).abs() > 1e-9 * (1.0 + r)) {
            picked.push((r, node));
        }
        if picked.len() == 3 {
            break;
        }
    }
    if picked.len() < 3 {
        return invalid("fewer than three chamber nodes at distinct distances from the degeneracy point");
    }
    let (na, nb) = f.sector.fiber_shape();
    let mut out = CMat::zeros(na, nb);
    for (i, &(ri, node)) in picked.iter().enumerate() {
        // Lagrange basis at r = 0
        let mut l = 1.0;
        for (j, &(rj, _)) in picked.iter().enumerate() {
            if i != j {
                l *= rj / (rj - ri);
            }
        }
        out += f.node_matrix(node) * C64::from(l);
    }
    Ok(out)
}

/// Constraint violation of `f` at `q¹ = ⋯ = qⁿ = c`.
pub fn degenerate_constraint_check(f: &ReducedAmplitude, kind: ModelKind, c: f64) -> Result<f64> {
    Ok(degenerate_constraint_violation(&degenerate_value(f, kind, c)?, f.sector.is_diagonal()))
}

/// Signed permutation matrices of determinant one.
pub fn k_plus_elements(n: usize) -> Vec<DMatrix<f64>> {
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &perms {
            for i in (0..n).filter(|i| !p.contains(i)) {
                next.push([p.clone(), vec![i]].concat());
            }
        }
        perms = next;
    }
    let mut out = Vec::new();
    for p in &perms {
        for signs in 0..(1u32 << n) {
            let m = DMatrix::from_fn(n, n, |r, c| {
                if p[r] == c {
                    if (signs >> r) & 1 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                } else {
                    0.0
                }
            });
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

/// Column position of the nonzero entry of each row.
fn permutation_of(w: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n = w.nrows();
    let mut p = Vec::with_capacity(n);
    for r in 0..n {
        let cols: Vec<usize> = (0..n).filter(|&c| w[(r, c)].abs() > 0.5).collect();
        if cols.len() != 1 || (w[(r, cols[0])].abs() - 1.0).abs() > 1e-12 {
            return invalid("not a signed permutation matrix");
        }
        p.push(cols[0]);
    }
    Ok(p)
}

/// Left and right representation matrices `(D^α(W⁻¹), D^β(W))`, one pair per lift.
fn exchange_reps(sector: &SectorLabel, w: &DMatrix<f64>) -> Result<Vec<(CMat, CMat)>> {
    match sector.labels {
        Labels::Fourier { m, n } => {
            let theta = w[(1, 0)].atan2(w[(0, 0)]);
            let one = |l: i32, t: f64| CMat::from_element(1, 1, C64::from_polar(1.0, l as f64 * t));
            Ok(vec![(one(m, -theta), one(n, theta))])
        }
        Labels::Spin { s, j } => {
            if sector.dim != 3 {
                let one = CMat::identity(1, 1);
                return Ok(vec![(one.clone(), one)]);
            }
            let r = RotationMatrix::new(Matrix3::from_fn(|a, b| w[(a, b)]))?;
            let u = su2_from_rotation_vector(&rotation_vector_from_so3(&r))?;
            let lifts = if sector.is_fermionic() { vec![u, -u] } else { vec![u] };
            Ok(lifts.iter().map(|u| (wigner_d(s, &u.inverse()).d, wigner_d(j, u).d)).collect())
        }
    }
}

/// `max_q ‖f(π_W q) - D^α(W⁻¹) f(q) D^β(W)‖` over nodes whose permuted point stays in
/// the grid box; for fermionic sectors the minimum over both lifts of `W`.
pub fn exchange_symmetry_check(f: &ReducedAmplitude, w: &DMatrix<f64>) -> Result<f64> {
    let n = f.sector.dim;
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Dimension(format!("{}×{} matrix for n = {n}", w.nrows(), w.ncols())));
    }
    if (w.determinant() - 1.0).abs() > 1e-9 {
        return invalid("exchange element must have determinant one");
    }
    let perm = permutation_of(w)?;
    let reps = exchange_reps(&f.sector, w)?;
    let mut best = f64::INFINITY;
    for (dl, dr) in &reps {
        let mut worst: f64 = 0.0;
        for node in 0..f.grid.len() {
            let q = f.node_invariants(node).ok_or_else(|| Error::Invalid("frame does not determine the invariants".into()))?;
            let qp: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
            let xp = f.frame.from_invariants(&qp);
            let inside = xp.iter().zip(&f.grid.axes).all(|(x, a)| *x >= a.min && *x <= a.max);
            if !inside {
                continue;
            }
            let lhs = f.interpolate(&qp);
            let rhs = dl * f.node_matrix(node) * dr;
            worst = worst.max((lhs - rhs).norm());
        }
        best = best.min(worst);
    }
    Ok(best)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }

    /// `|estimate - x| ≤ k·stderr`.
    pub fn agrees_with(&self, x: C64, k: f64) -> bool {
        (self.value() - x).norm() <= k * self.stderr
    }
}

/// Inverse of the cumulative `(k - sin k)/2π` of the Haar density of the rotation angle.
pub fn haar_angle_from_uniform(t: f64) -> f64 {
    let target = 2.0 * PI * t.clamp(0.0, 1.0);
    let (mut lo, mut hi) = (0.0, 2.0 * PI);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid - mid.sin() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Haar-random SU(2) element: angle by inverse CDF, uniform axis.
pub fn haar_random_su2<R: Rng>(rng: &mut R) -> Su2Element {
    let k = haar_angle_from_uniform(rng.gen());
    let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.gen::<f64>();
    let rho = (1.0 - z * z).sqrt();
    let axis = Vector3::new(rho * phi.cos(), rho * phi.sin(), z);
    let (c, s) = ((k / 2.0).cos(), (k / 2.0).sin());
    Su2Element::from_quaternion([c, s * axis[0], s * axis[1], s * axis[2]])
}

pub type WaveFunction<'a> = dyn Fn(&Su2Element, &[f64], &Su2Element) -> C64 + Sync + 'a;

const MC_CHUNK: usize = 4096;

/// `∫ du ∫ dq P(q) ∫ dv conj(Ψ₁) Ψ₂` with normalized Haar measures and `q` uniform in
/// `qbox`; chunks use independent streams of the master seed, so results do not
/// depend on the thread count.
pub fn montecarlo_full_product(
    psi1: &WaveFunction,
    psi2: &WaveFunction,
    weight: &(dyn Fn(&[f64]) -> f64 + Sync),
    qbox: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 1000 {
        return invalid(format!("Monte-Carlo needs at least 1000 samples, got {samples}"));
    }
    if qbox.iter().any(|(a, b)| !(b > a)) {
        return invalid("empty Monte-Carlo box");
    }
    let volume: f64 = qbox.iter().map(|(a, b)| b - a).product();
    let chunks = samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut re, mut im, mut sq) = (0.0, 0.0, 0.0);
            let mut q = vec![0.0; qbox.len()];
            for _ in 0..count {
                let u = haar_random_su2(&mut rng);
                let v = haar_random_su2(&mut rng);
                for (x, (a, b)) in q.iter_mut().zip(qbox) {
                    *x = a + (b - a) * rng.gen::<f64>();
                }
                let p = weight(&q);
                let z = if p == 0.0 { C64::from(0.0) } else { psi1(&u, &q, &v).conj() * psi2(&u, &q, &v) * p };
                re += z.re;
                im += z.im;
                sq += z.norm_sqr();
            }
            (re, im, sq)
        })
        .collect();
    let (re, im, sq) = sums.iter().fold((0.0, 0.0, 0.0), |a, s| (a.0 + s.0, a.1 + s.1, a.2 + s.2));
    let nf = samples as f64;
    let (mre, mim) = (re / nf, im / nf);
    let var = (sq / nf - mre * mre - mim * mim).max(0.0) * nf / (nf - 1.0);
    Ok(McEstimate { re: volume * mre, im: volume * mim, stderr: volume * (var / nf).sqrt(), samples })
}

/// `(1/N(α)N(β)) ∫ Tr(f₁† f₂) P dq` when the sectors coincide, zero otherwise.
pub fn reduced_scalar_product(
    f1: &ReducedAmplitude,
    f2: &ReducedAmplitude,
    weight: &dyn Fn(&[f64]) -> f64,
) -> Result<C64> {
    if f1.sector != f2.sector {
        return Ok(C64::from(0.0));
    }
    weighted_inner_product(f1, f2, weight)
}

const MAGIC: &[u8; 8] = b"AFFAMP01";
const META: &[u8; 4] = b"META";

fn frame_code(f: Frame) -> u8 {
    match f {
        Frame::Invariants => 0,
        Frame::Jacobi => 1,
        Frame::PlanarQ => 2,
        Frame::PlanarX => 3,
        Frame::Rotated => 4,
    }
}

/// Binary amplitude file: magic, `n`, label pair (`2s, 2j` or `m, n`), frame code,
/// grid (`axes`, `offset`, then `min, max, points` per axis), then the complex
/// values little-endian, node-major with the fiber row-major.
pub fn write_amplitude<W: Write>(f: &ReducedAmplitude, w: W) -> Result<()> {
    write_amplitude_with_metadata(f, None, w)
}

/// [`write_amplitude`] followed by an optional trailer `META`, `u64` length and a
/// UTF-8 payload (the CLI stores its resolved configuration there).
pub fn write_amplitude_with_metadata<W: Write>(f: &ReducedAmplitude, metadata: Option<&str>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(f.sector.dim as u32).to_le_bytes())?;
    let (a, b) = match f.sector.labels {
        Labels::Spin { s, j } => (s.twice() as i32, j.twice() as i32),
        Labels::Fourier { m, n } => (m, n),
    };
    w.write_all(&a.to_le_bytes())?;
    w.write_all(&b.to_le_bytes())?;
    w.write_all(&[frame_code(f.frame)])?;
    w.write_all(&(f.grid.ndim() as u32).to_le_bytes())?;
    w.write_all(&f.grid.offset.to_le_bytes())?;
    for ax in &f.grid.axes {
        w.write_all(&ax.min.to_le_bytes())?;
        w.write_all(&ax.max.to_le_bytes())?;
        w.write_all(&(ax.points as u64).to_le_bytes())?;
    }
    for z in &f.values {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    if let Some(m) = metadata {
        w.write_all(META)?;
        w.write_all(&(m.len() as u64).to_le_bytes())?;
        w.write_all(m.as_bytes())?;
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Parse(format!("truncated amplitude file: {e}")))?;
    Ok(b)
}

pub fn read_amplitude<R: Read>(r: R) -> Result<ReducedAmplitude> {
    read_amplitude_with_metadata(r).map(|(f, _)| f)
}

/// Reads an amplitude file and its metadata trailer, if any.
pub fn read_amplitude_with_metadata<R: Read>(mut r: R) -> Result<(ReducedAmplitude, Option<String>)> {
    if &take::<8, _>(&mut r)? != MAGIC {
        return Err(Error::Parse("not an amplitude file (bad magic)".into()));
    }
    let n = u32::from_le_bytes(take(&mut r)?) as usize;
    let a = i32::from_le_bytes(take(&mut r)?);
    let b = i32::from_le_bytes(take(&mut r)?);
    let frame = match take::<1, _>(&mut r)?[0] {
        0 => Frame::Invariants,
        1 => Frame::Jacobi,
        2 => Frame::PlanarQ,
        3 => Frame::PlanarX,
        4 => Frame::Rotated,
        c => return Err(Error::Parse(format!("unknown frame code {c}"))),
    };
    let sector = if n == 2 {
        SectorLabel::fourier(a, b)
    } else {
        if a < 0 || b < 0 {
            return Err(Error::Parse(format!("negative spin label in header ({a}, {b})")));
        }
        SectorLabel::spin(n, SpinLabel::from_twice(a as u32), SpinLabel::from_twice(b as u32))?
    };
    let ndim = u32::from_le_bytes(take(&mut r)?) as usize;
    if ndim == 0 || ndim > 16 {
        return Err(Error::Parse(format!("implausible axis count {ndim}")));
    }
    let offset = f64::from_le_bytes(take(&mut r)?);
    let mut axes = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let min = f64::from_le_bytes(take(&mut r)?);
        let max = f64::from_le_bytes(take(&mut r)?);
        let points = u64::from_le_bytes(take(&mut r)?) as usize;
        axes.push(Axis::new(min, max, points));
    }
    let grid = GridSpec::new(axes, offset)?;
    let count = grid.len() * sector.fiber_dim();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f64::from_le_bytes(take(&mut r)?);
        let im = f64::from_le_bytes(take(&mut r)?);
        values.push(C64::new(re, im));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let metadata = if rest.is_empty() {
        None
    } else {
        let bad = || Error::Parse(format!("{} unexpected trailing bytes after amplitude data", rest.len()));
        if rest.len() < 12 || &rest[..4] != META {
            return Err(bad());
        }
        let len = u64::from_le_bytes(rest[4..12].try_into().expect("8 bytes")) as usize;
        if rest.len() != 12 + len {
            return Err(bad());
        }
        Some(String::from_utf8(rest[12..].to_vec()).map_err(|_| Error::Parse("metadata is not UTF-8".into()))?)
    };
    Ok((ReducedAmplitude::with_values(sector, grid, frame, values)?, metadata))
}

/// `u ↦ -u` check helper: the 2×2 matrix of `-I`.
pub fn minus_identity() -> Su2Element {
    Su2Element::new(-Matrix2::identity()).expect("-I is in SU(2)")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::weight_factor;
    use crate::spin::pauli_matrices;

    fn grid3() -> GridSpec {
        "-1:1:9,-1:1:9,-1:1:9".parse().unwrap()
    }

    fn half() -> SectorLabel {
        SectorLabel::spin(3, SpinLabel::HALF, SpinLabel::HALF).unwrap()
    }

    #[test]
    fn synthesis_basics() {
        let scalar = ReducedAmplitude::from_fn(SectorLabel::scalar(3), grid3(), |_| CMat::identity(1, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (u, v) = (haar_random_su2(&mut rng), haar_random_su2(&mut rng));
        let psi = synthesize_sector(&scalar, &u, &[0.3, 0.1, -0.2], &v).unwrap();
        assert!((psi[(0, 0)] - C64::from(1.0)).norm() < 1e-12);

        let f = ReducedAmplitude::from_fn(half(), grid3(), |q| {
            CMat::from_fn(2, 2, |r, c| C64::new(q[0] + r as f64, q[1] - c as f64))
        });
        let q = [0.25, 0.0, -0.5];
        let id = Su2Element::identity();
        let direct = synthesize_sector(&f, &id, &q, &id).unwrap();
        assert!((direct - f.interpolate(&q)).norm() < 1e-12);
        let a = synthesize_sector(&f, &u, &q, &v).unwrap();
        let b = synthesize_sector(&f, &-u, &q, &v).unwrap();
        let c = synthesize_sector(&f, &u, &q, &-v).unwrap();
        assert!((&a + &b).norm() < 1e-12);
        assert!((&a + &c).norm() < 1e-12);
    }

    #[test]
    fn interpolation_is_exact_for_linear_data() {
        let f = ReducedAmplitude::from_fn(SectorLabel::scalar(3), grid3(), |q| {
            CMat::from_element(1, 1, C64::from(1.0 + 2.0 * q[0] - q[1] + 0.5 * q[2]))
        });
        let q = [0.13, -0.41, 0.27];
        let z = f.interpolate(&q)[(0, 0)];
        assert!((z.re - (1.0 + 0.26 + 0.41 + 0.135)).abs() < 1e-12);
        assert_eq!(f.interpolate(&[2.0, 0.0, 0.0])[(0, 0)], C64::from(0.0));
    }

    #[test]
    fn halfness_examples() {
        let (z, h, o) = (SpinLabel::ZERO, SpinLabel::HALF, SpinLabel::ONE);
        assert!(halfness_validate(&[(z, z), (o, o)]).projectable);
        let f = halfness_validate(&[(h, h)]);
        assert!(f.projectable && f.fermionic && !f.bosonic);
        let bad = halfness_validate(&[(z, h)]);
        assert!(!bad.projectable && !bad.violations.is_empty());
        let mixed = halfness_validate(&[(z, z), (h, h)]);
        assert!(mixed.bosonic && mixed.fermionic && !mixed.projectable);
    }

    #[test]
    fn degeneracy_constraint() {
        let id = CMat::identity(2, 2) * C64::from(2.5);
        assert!(degenerate_constraint_violation(&id, true) < 1e-15);
        let s1 = CMat::from_iterator(2, 2, pauli_matrices()[0].iter().copied());
        assert!(degenerate_constraint_violation(&s1, true) > 1.0);
        let zero = CMat::zeros(2, 4);
        assert_eq!(degenerate_constraint_violation(&zero, false), 0.0);

        // radial data, quadratic in the distance from the diagonal point
        let sector = SectorLabel::spin(3, SpinLabel::HALF, SpinLabel::from_twice(3)).unwrap();
        let g: GridSpec = "-1:1:12,-1:1:12,-1:1:12".parse().unwrap();
        let r2 = |q: &[f64]| q.iter().map(|x| x * x).sum::<f64>();
        let f = ReducedAmplitude::from_fn(sector, g.clone(), |q| CMat::from_element(2, 4, C64::from(r2(q))));
        assert!(degenerate_constraint_check(&f, ModelKind::AffAff, 0.0).unwrap() < 1e-10);
        let f = ReducedAmplitude::from_fn(half(), g.clone(), |q| CMat::identity(2, 2) * C64::from(1.0 + r2(q)));
        assert!(degenerate_constraint_check(&f, ModelKind::AffAff, 0.0).unwrap() < 1e-10);
        let s1 = s1.clone();
        let f = ReducedAmplitude::from_fn(half(), g, move |q| &s1 * C64::from(1.0 + r2(q)));
        assert!(degenerate_constraint_check(&f, ModelKind::AffAff, 0.0).unwrap() > 1.0);
    }

    #[test]
    fn k_plus_sizes() {
        assert_eq!(k_plus_elements(2).len(), 4);
        assert_eq!(k_plus_elements(3).len(), 24);
        for w in k_plus_elements(3) {
            assert!((w.transpose() * &w - DMatrix::identity(3, 3)).norm() < 1e-15);
        }
    }

    #[test]
    fn exchange_checks() {
        let g: GridSpec = "-1:1:10,-1:1:10".parse().unwrap();
        let sym = ReducedAmplitude::from_fn(SectorLabel::fourier(0, 0), g.clone(), |q| {
            CMat::from_element(1, 1, C64::from((q[0] * q[1]).cos() + q[0] + q[1]))
        });
        let asym = ReducedAmplitude::from_fn(SectorLabel::fourier(0, 0), g, |q| {
            CMat::from_element(1, 1, C64::from(q[0] - 2.0 * q[1]))
        });
        for w in k_plus_elements(2) {
            assert!(exchange_symmetry_check(&sym, &w).unwrap() < 1e-12);
        }
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(exchange_symmetry_check(&asym, &swap).unwrap() > 0.1);
        let id3 = DMatrix::identity(3, 3);
        let f = ReducedAmplitude::from_fn(half(), grid3(), |q| CMat::identity(2, 2) * C64::from(q[0]));
        assert!(exchange_symmetry_check(&f, &id3).unwrap() < 1e-14);
    }

    #[test]
    fn haar_sampling_moments() {
        // E[|tr u|²] = 1 for the Haar measure
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20000;
        let m: f64 = (0..n).map(|_| haar_random_su2(&mut rng).matrix().trace().norm_sqr()).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.05, "{m}");
        assert!((haar_angle_from_uniform(0.5) - PI).abs() < 1e-12);
    }

    #[test]
    fn montecarlo_matches_reduced_formula() {
        let g: GridSpec = "-1:1:41,-1:1:41,-1:1:41".parse().unwrap();
        let f = ReducedAmplitude::from_fn(half(), g, |q| {
            CMat::from_fn(2, 2, |r, c| C64::new((-(q[0] * q[0]) - q[1] * q[1]).exp() * (1 + r) as f64, q[2] * c as f64))
        });
        let w = |q: &[f64]| weight_factor(q, ModelKind::AffAff);
        let exact = reduced_scalar_product(&f, &f, &w).unwrap();
        let psi = |u: &Su2Element, q: &[f64], v: &Su2Element| synthesize_sector(&f, u, q, v).unwrap()[(0, 1)];
        let mc = montecarlo_full_product(&psi, &psi, &w, &[(-1.0, 1.0); 3], 20000, 7).unwrap();
        assert!(mc.agrees_with(exact, 4.0), "{mc:?} vs {exact}");
        let again = montecarlo_full_product(&psi, &psi, &w, &[(-1.0, 1.0); 3], 20000, 7).unwrap();
        assert_eq!(mc.re, again.re);
    }

    #[test]
    fn amplitude_roundtrip() {
        let f = ReducedAmplitude::from_fn(half(), grid3(), |q| CMat::from_fn(2, 2, |r, c| C64::new(q[0] * r as f64, q[1] + c as f64)));
        let mut buf = Vec::new();
        write_amplitude(&f, &mut buf).unwrap();
        let g = read_amplitude(&buf[..]).unwrap();
        assert_eq!(f, g);
        assert!(read_amplitude(&buf[..buf.len() - 1]).is_err());
        let mut tagged = Vec::new();
        write_amplitude_with_metadata(&f, Some("{\"seed\":1}"), &mut tagged).unwrap();
        let (h, meta) = read_amplitude_with_metadata(&tagged[..]).unwrap();
        assert_eq!((h, meta.as_deref()), (f.clone(), Some("{\"seed\":1}")));
        assert!(read_amplitude(&tagged[..tagged.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[12] = 1; // 2s = 1, 2j = 1 → (1/2, 1/2) still fine; make 2j even instead
        bad[16] = 2;
        assert!(matches!(read_amplitude(&bad[..]), Err(Error::HalfInteger { .. })));
    }
}
