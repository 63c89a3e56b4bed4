//! Symmetric eigensolvers for reduced operators: Sturm bisection for tridiagonal
//! operators, product spectra for Kronecker sums, dense decomposition for small
//! instances and thick-restart Lanczos with full reorthogonalization otherwise.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::ReducedOperator;
use crate::peterweyl::ReducedAmplitude;
use crate::spin::C64;

/// Symmetric operator given by its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Tridiagonal, separable or dense by structure and size, Lanczos otherwise.
    Auto,
    Tridiagonal,
    Separable,
    Dense,
    Lanczos,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Method::Auto),
            "tridiagonal" => Ok(Method::Tridiagonal),
            "separable" => Ok(Method::Separable),
            "dense" => Ok(Method::Dense),
            "lanczos" => Ok(Method::Lanczos),
            other => Err(Error::Parse(format!("unknown solver method {other:?} (auto, tridiagonal, separable, dense, lanczos)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub count: usize,
    /// Bound on `‖Hv - Ev‖` for unit `v`.
    pub tol: f64,
    pub seed: u64,
    pub method: Method,
    /// Matrix-vector product cap; `50·count·√dim` when absent.
    pub max_iterations: Option<usize>,
    /// Largest dimension handled densely under `Method::Auto`.
    pub dense_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { count: 6, tol: 1e-8, seed: 0, method: Method::Auto, max_iterations: None, dense_limit: 1500 }
    }
}

impl SolverOptions {
    pub fn new(count: usize, tol: f64) -> Self {
        SolverOptions { count, tol, ..Default::default() }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return invalid("level count must be at least 1");
        }
        if !(self.tol > 0.0) {
            return invalid(format!("tolerance must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub method: String,
    pub dim: usize,
    /// Matrix-vector products (Lanczos) or bisection steps (tridiagonal).
    pub iterations: usize,
    pub seed: u64,
    pub tol: f64,
    pub grid: Option<String>,
}

/// Lowest eigenpairs in ascending order with unit eigenvectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// CSV with header `level,energy,residual`, energies to 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "level,energy,residual")?;
        for (i, (e, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            writeln!(w, "{i},{},{r:.3e}", fmt_energy(*e))?;
        }
        Ok(())
    }
}

/// Twelve significant digits.
pub fn fmt_energy(e: f64) -> String {
    format!("{e:.11e}")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn residual<O: LinearOperator + ?Sized>(op: &O, lambda: f64, v: &[f64]) -> f64 {
    let mut y = vec![0.0; v.len()];
    op.apply(v, &mut y);
    axpy(-lambda, v, &mut y);
    norm(&y) / norm(v)
}

/// Lowest `opts.count` eigenpairs of a reduced operator.
pub fn solve_lowest(op: &ReducedOperator, opts: &SolverOptions) -> Result<Spectrum> {
    opts.validate()?;
    let dim = op.dim();
    let method = match opts.method {
        Method::Auto => {
            if op.kronecker.as_ref().is_some_and(|k| k.len() > 1) {
                Method::Separable
            } else if op.tridiagonal().is_some() {
                Method::Tridiagonal
            } else if dim <= opts.dense_limit {
                Method::Dense
            } else {
                Method::Lanczos
            }
        }
        m => m,
    };
    let mut spec = match method {
        Method::Tridiagonal => {
            let (d, e) = op.tridiagonal().ok_or_else(|| Error::Invalid("operator is not tridiagonal".into()))?;
            solve_tridiagonal(&d, &e, opts)?
        }
        Method::Separable => {
            let factors = op
                .kronecker
                .as_ref()
                .ok_or_else(|| Error::Invalid("operator has no Kronecker-sum structure".into()))?;
            solve_separable(op, factors, opts)?
        }
        Method::Dense => solve_dense(&op.materialize(), opts)?,
        Method::Lanczos | Method::Auto => solve_lanczos(op, opts)?,
    };
    spec.meta.grid = Some(op.grid.to_string());
    Ok(spec)
}

/// Lowest eigenpairs of any symmetric operator by dense decomposition or Lanczos.
pub fn solve_operator<O: LinearOperator>(op: &O, opts: &SolverOptions) -> Result<Spectrum> {
    opts.validate()?;
    match opts.method {
        Method::Lanczos => solve_lanczos(op, opts),
        Method::Auto if op.dim() > opts.dense_limit => solve_lanczos(op, opts),
        Method::Auto | Method::Dense => {
            let n = op.dim();
            let mut m = DMatrix::zeros(n, n);
            let mut e = vec![0.0; n];
            let mut y = vec![0.0; n];
            for j in 0..n {
                e[j] = 1.0;
                op.apply(&e, &mut y);
                m.set_column(j, &nalgebra::DVector::from_column_slice(&y));
                e[j] = 0.0;
            }
            solve_dense(&m, opts)
        }
        m => invalid(format!("method {m:?} needs a structured reduced operator")),
    }
}

/// Full symmetric decomposition.
pub fn solve_dense(m: &DMatrix<f64>, opts: &SolverOptions) -> Result<Spectrum> {
    opts.validate()?;
    let n = m.nrows();
    let eig = symmetric_eigen(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let count = opts.count.min(n);
    let mut spec = Spectrum {
        eigenvalues: Vec::with_capacity(count),
        residuals: Vec::with_capacity(count),
        vectors: Vec::with_capacity(count),
        meta: SpectrumMeta { method: "dense".into(), dim: n, iterations: 0, seed: opts.seed, tol: opts.tol, grid: None },
    };
    for &i in order.iter().take(count) {
        let lambda = eig.eigenvalues[i];
        let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        spec.residuals.push(residual(m, lambda, &v));
        spec.eigenvalues.push(lambda);
        spec.vectors.push(v);
    }
    check_residuals(spec)
}

/// `SymmetricEigen` with each eigenvalue recomputed as the Rayleigh quotient of its
/// column: nalgebra can return correct vectors paired with permuted values.
pub(crate) fn symmetric_eigen(m: DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let mut eig = SymmetricEigen::new(m.clone());
    let mv = &m * &eig.eigenvectors;
    for (i, l) in eig.eigenvalues.iter_mut().enumerate() {
        *l = eig.eigenvectors.column(i).dot(&mv.column(i));
    }
    eig
}

fn check_residuals(spec: Spectrum) -> Result<Spectrum> {
    let converged = spec.residuals.iter().take_while(|r| **r <= spec.meta.tol).count();
    if converged < spec.len() {
        return Err(Error::NonConvergence {
            iterations: spec.meta.iterations,
            converged,
            requested: spec.len(),
            partial: Box::new(spec),
        });
    }
    Ok(spec)
}

/// Number of eigenvalues of the symmetric tridiagonal `(d, e)` below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let qq = if q == 0.0 { f64::EPSILON * (e[i - 1].abs() + 1.0) } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / qq;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve `(T - λ) x = b` for tridiagonal `T` with partial pivoting.
fn tridiagonal_shifted_solve(d: &[f64], e: &[f64], lambda: f64, b: &mut [f64]) {
    let n = d.len();
    if n == 1 {
        let p = d[0] - lambda;
        b[0] /= if p == 0.0 { f64::EPSILON } else { p };
        return;
    }
    // Rows hold (diag, super1, super2) after elimination.
    let mut a: Vec<f64> = d.iter().map(|x| x - lambda).collect();
    let mut c1: Vec<f64> = e.to_vec();
    c1.push(0.0);
    let mut c2 = vec![0.0; n];
    let mut sub: Vec<f64> = e.to_vec();
    let tiny = f64::EPSILON * (d.iter().chain(e).fold(0.0f64, |m, x| m.max(x.abs())) + lambda.abs() + 1.0);
    for i in 0..n - 1 {
        if sub[i].abs() > a[i].abs() {
            // swap rows i and i+1
            let (ai, c1i, c2i, bi) = (a[i], c1[i], c2[i], b[i]);
            a[i] = sub[i];
            c1[i] = a[i + 1];
            c2[i] = c1[i + 1];
            b[i] = b[i + 1];
            sub[i] = ai;
            a[i + 1] = c1i;
            c1[i + 1] = c2i;
            b[i + 1] = bi;
        }
        if a[i] == 0.0 {
            a[i] = tiny;
        }
        let f = sub[i] / a[i];
        a[i + 1] -= f * c1[i];
        c1[i + 1] -= f * c2[i];
        b[i + 1] -= f * b[i];
    }
    if a[n - 1] == 0.0 {
        a[n - 1] = tiny;
    }
    b[n - 1] /= a[n - 1];
    b[n - 2] = (b[n - 2] - c1[n - 2] * b[n - 1]) / a[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - c1[i] * b[i + 1] - c2[i] * b[i + 2]) / a[i];
    }
}

/// Lowest eigenpairs of a symmetric tridiagonal matrix.
pub fn solve_tridiagonal(d: &[f64], e: &[f64], opts: &SolverOptions) -> Result<Spectrum> {
    opts.validate()?;
    let n = d.len();
    if n == 0 || e.len() + 1 != n {
        return Err(Error::Dimension(format!("tridiagonal with {} diagonal and {} off-diagonal entries", n, e.len())));
    }
    let count = opts.count.min(n);
    let radius = (0..n)
        .map(|i| {
            let l = if i > 0 { e[i - 1].abs() } else { 0.0 };
            let r = if i + 1 < n { e[i].abs() } else { 0.0 };
            (d[i] - l - r, d[i] + l + r)
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
    let scale = radius.0.abs().max(radius.1.abs()).max(1.0);
    let mut steps = 0;
    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        let (mut lo, mut hi) = (radius.0 - 1e-12 * scale, radius.1 + 1e-12 * scale);
        while hi - lo > 4.0 * f64::EPSILON * (lo.abs().max(hi.abs())).max(f64::MIN_POSITIVE) {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if sturm_count(d, e, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            steps += 1;
        }
        values.push(0.5 * (lo + hi));
    }
    let tri = TriOp { d, e };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for (k, &lambda) in values.iter().enumerate() {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        for _ in 0..4 {
            tridiagonal_shifted_solve(d, e, lambda, &mut v);
            for (j, u) in vectors.iter().enumerate() {
                if (values[j] - lambda).abs() < 1e-8 * scale {
                    let c = dot(u, &v);
                    axpy(-c, u, &mut v);
                }
            }
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
        }
        residuals.push(residual(&tri, lambda, &v));
        vectors.push(v);
        let _ = k;
    }
    check_residuals(Spectrum {
        eigenvalues: values,
        residuals,
        vectors,
        meta: SpectrumMeta { method: "tridiagonal".into(), dim: n, iterations: steps, seed: opts.seed, tol: opts.tol, grid: None },
    })
}

struct TriOp<'a> {
    d: &'a [f64],
    e: &'a [f64],
}

impl LinearOperator for TriOp<'_> {
    fn dim(&self) -> usize {
        self.d.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n {
            let mut s = self.d[i] * x[i];
            if i > 0 {
                s += self.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.e[i] * x[i + 1];
            }
            y[i] = s;
        }
    }
}

/// Spectrum of a Kronecker sum from the spectra of its tridiagonal factors.
fn solve_separable(op: &ReducedOperator, factors: &[(Vec<f64>, Vec<f64>)], opts: &SolverOptions) -> Result<Spectrum> {
    let parts: Vec<Spectrum> = factors
        .iter()
        .map(|(d, e)| solve_tridiagonal(d, e, &SolverOptions { count: opts.count, ..opts.clone() }))
        .collect::<Result<_>>()?;
    // All index tuples, sorted by summed energy.
    let mut combos: Vec<(f64, Vec<usize>)> = vec![(0.0, vec![])];
    for p in &parts {
        let mut next = Vec::with_capacity(combos.len() * p.len());
        for (e0, idx) in &combos {
            for (i, e) in p.eigenvalues.iter().enumerate() {
                let mut v = idx.clone();
                v.push(i);
                next.push((e0 + e, v));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        next.truncate(opts.count);
        combos = next;
    }
    let dim = op.dim();
    let mut spec = Spectrum {
        eigenvalues: vec![],
        residuals: vec![],
        vectors: vec![],
        meta: SpectrumMeta {
            method: "separable".into(),
            dim,
            iterations: parts.iter().map(|p| p.meta.iterations).sum(),
            seed: opts.seed,
            tol: opts.tol,
            grid: None,
        },
    };
    for (lambda, idx) in combos {
        let mut v = vec![1.0];
        for (p, &i) in parts.iter().zip(&idx) {
            let f = &p.vectors[i];
            v = v.iter().flat_map(|a| f.iter().map(move |b| a * b)).collect();
        }
        spec.residuals.push(residual(op, lambda, &v));
        spec.eigenvalues.push(lambda);
        spec.vectors.push(v);
    }
    check_residuals(spec)
}

/// Eigenpairs `(value, vector)`.
type Pairs = Vec<(f64, Vec<f64>)>;

/// Thick-restart Lanczos with full reorthogonalization and locking.
///
/// Converged pairs are locked and deflated; after the requested count is reached a
/// fresh start vector orthogonal to the locked space checks for missed copies of
/// degenerate levels.
pub fn solve_lanczos<O: LinearOperator + ?Sized>(op: &O, opts: &SolverOptions) -> Result<Spectrum> {
    opts.validate()?;
    let n = op.dim();
    let count = opts.count.min(n);
    let cap = opts.max_iterations.unwrap_or_else(|| (50.0 * count as f64 * (n as f64).sqrt()).ceil() as usize).max(count * 20);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut matvecs = 0usize;
    let mut verified = false;
    let partial = |locked: &Vec<(f64, Vec<f64>)>, matvecs: usize| -> Spectrum {
        let mut l = locked.clone();
        l.sort_by(|a, b| a.0.total_cmp(&b.0));
        Spectrum {
            residuals: l.iter().map(|(e, v)| residual(op, *e, v)).collect(),
            eigenvalues: l.iter().map(|p| p.0).collect(),
            vectors: l.into_iter().map(|p| p.1).collect(),
            meta: SpectrumMeta { method: "lanczos".into(), dim: n, iterations: matvecs, seed: opts.seed, tol: opts.tol, grid: None },
        }
    };
    while !verified {
        let want = if locked.len() < count { count - locked.len() } else { 1 };
        if locked.len() >= n {
            break;
        }
        let free = n - locked.len();
        let m = free.min((2 * want + 40).max(60)).min(240);
        let found = lanczos_run(op, &locked, want, m, opts.tol, cap.saturating_sub(matvecs), &mut rng, &mut matvecs);
        let found = match found {
            Ok(found) => found,
            Err(estimates) => {
                let converged = locked.len().min(count);
                let missing = count.saturating_sub(locked.len());
                locked.extend(estimates.into_iter().take(missing));
                return Err(Error::NonConvergence {
                    iterations: matvecs,
                    converged,
                    requested: count,
                    partial: Box::new(partial(&locked, matvecs)),
                });
            }
        };
        if locked.len() < count {
            locked.extend(found);
            locked.sort_by(|a, b| a.0.total_cmp(&b.0));
        } else {
            let largest = locked.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let (e, v) = found.into_iter().next().expect("one pair");
            if e < largest - opts.tol {
                locked.push((e, v));
                locked.sort_by(|a, b| a.0.total_cmp(&b.0));
            } else {
                verified = true;
            }
        }
        if locked.len() >= count && count == n {
            verified = true;
        }
    }
    locked.truncate(count);
    check_residuals(partial(&locked, matvecs))
}

/// One deflated thick-restart run; returns up to `want` converged lowest pairs.
#[allow(clippy::too_many_arguments)]
fn lanczos_run<O: LinearOperator + ?Sized>(
    op: &O,
    locked: &[(f64, Vec<f64>)],
    want: usize,
    m: usize,
    tol: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
    matvecs: &mut usize,
) -> std::result::Result<Pairs, Pairs> {
    let n = op.dim();
    let want = want.min(m);
    let orth = |w: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            for (_, u) in locked {
                let c = dot(u, w);
                axpy(-c, u, w);
            }
            for u in basis {
                let c = dot(u, w);
                axpy(-c, u, w);
            }
        }
    };
    let mut start: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    orth(&mut start, &[]);
    let s = norm(&start);
    if s == 0.0 {
        return Ok(vec![]);
    }
    start.iter_mut().for_each(|x| *x /= s);
    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut used = 0usize;
    let keep = (want + (m - want) / 2).min(m - 1).max(want);
    loop {
        // Extend to m vectors.
        let f;
        let mut beta;
        let mut j = basis.len() - 1;
        loop {
            let mut w = vec![0.0; n];
            op.apply(&basis[j], &mut w);
            *matvecs += 1;
            used += 1;
            // Full projection; exact Rayleigh quotient after thick restarts.
            for (i, b) in basis.iter().enumerate() {
                let c = dot(b, &w);
                t[(i, j)] = c;
                t[(j, i)] = c;
            }
            orth(&mut w, &basis);
            beta = norm(&w);
            if j + 1 == m || beta <= 1e-14 * t[(j, j)].abs().max(1.0) {
                f = w;
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
            j += 1;
        }
        let k = basis.len();
        let tk = t.view((0, 0), (k, k)).clone_owned();
        let tk = (&tk + tk.transpose()) * 0.5;
        let eig = symmetric_eigen(tk);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ritz = |i: usize| -> Vec<f64> {
            let mut v = vec![0.0; n];
            for (r, b) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(r, i)], b, &mut v);
            }
            v
        };
        let exhausted = k < m || k == n - locked.len();
        let est: Vec<f64> = order.iter().map(|&i| beta * eig.eigenvectors[(k - 1, i)].abs()).collect();
        let take = want.min(k);
        if exhausted || est[..take].iter().all(|r| *r <= 0.5 * tol) {
            let mut out = Vec::new();
            for (pos, &i) in order.iter().take(take).enumerate() {
                let mut v = ritz(i);
                let nv = norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                let e = eig.eigenvalues[i];
                if residual(op, e, &v) <= tol || exhausted {
                    out.push((e, v));
                } else if pos == 0 {
                    break;
                }
            }
            if !out.is_empty() && out.len() == take {
                return Ok(out);
            }
        }
        if used >= budget {
            // Unconverged Ritz estimates, reported with their true residuals.
            return Err(order
                .iter()
                .take(take)
                .map(|&i| {
                    let mut v = ritz(i);
                    let nv = norm(&v);
                    v.iter_mut().for_each(|x| *x /= nv);
                    (eig.eigenvalues[i], v)
                })
                .collect());
        }
        // Thick restart: keep the lowest `keep` Ritz vectors plus the residual direction.
        let kk = keep.min(k - 1).max(1);
        let mut new_basis = Vec::with_capacity(m);
        let mut new_t = DMatrix::<f64>::zeros(m, m);
        for (pos, &i) in order.iter().take(kk).enumerate() {
            let mut v = ritz(i);
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            new_basis.push(v);
            new_t[(pos, pos)] = eig.eigenvalues[i];
            let c = beta * eig.eigenvectors[(k - 1, i)];
            new_t[(pos, kk)] = c;
            new_t[(kk, pos)] = c;
        }
        let mut fv = f;
        orth(&mut fv, &new_basis);
        let nf = norm(&fv);
        if nf <= 1e-300 {
            let mut r: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            orth(&mut r, &new_basis);
            let nr = norm(&r);
            r.iter_mut().for_each(|x| *x /= nr);
            for pos in 0..kk {
                new_t[(pos, kk)] = 0.0;
                new_t[(kk, pos)] = 0.0;
            }
            new_basis.push(r);
        } else {
            fv.iter_mut().for_each(|x| *x /= nf);
            new_basis.push(fv);
        }
        basis = new_basis;
        t = new_t;
    }
}

/// `Σ_nodes Tr(f₁† f₂) · P · ΔV / (N(α) N(β))` over the amplitudes' common grid.
///
/// `weight` receives node coordinates in the amplitudes' own frame.
pub fn weighted_inner_product(
    f1: &ReducedAmplitude,
    f2: &ReducedAmplitude,
    weight: &dyn Fn(&[f64]) -> f64,
) -> Result<C64> {
    if f1.sector != f2.sector {
        return Err(Error::Dimension(format!("sectors {} and {} differ", f1.sector, f2.sector)));
    }
    if f1.grid != f2.grid || f1.frame != f2.frame {
        return Err(Error::Dimension("amplitudes live on different grids".into()));
    }
    let nf = f1.sector.fiber_dim();
    let vol = f1.cell_volume();
    let mut total = C64::from(0.0);
    for node in 0..f1.grid.len() {
        let x = f1.grid.node(node);
        let p = weight(&x);
        if p == 0.0 {
            continue;
        }
        let s: C64 = (0..nf).map(|c| f1.values[node * nf + c].conj() * f2.values[node * nf + c]).sum();
        total += s * p;
    }
    Ok(total * vol / nf as f64)
}

/// Eigenvalue sequences over resolutions and boxes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `(resolution, box length, eigenvalues)` per solved instance.
    pub entries: Vec<ConvergenceEntry>,
    /// Per level, the Richardson limit from the last three resolutions.
    pub extrapolated: Vec<f64>,
    /// Per level, the observed order from the last three resolutions.
    pub observed_order: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub resolution: usize,
    pub box_length: f64,
    pub eigenvalues: Vec<f64>,
}

/// Observed order `ln((e₁-e₂)/(e₂-e₃))/ln r` for refinement ratio `r`.
pub fn observed_order(e: [f64; 3], ratio: f64) -> f64 {
    ((e[0] - e[1]) / (e[1] - e[2])).abs().ln() / ratio.ln()
}

/// Richardson extrapolation eliminating the given error orders in turn; values are
/// ordered coarse to fine with constant refinement ratio.
pub fn richardson(values: &[f64], ratio: f64, orders: &[f64]) -> f64 {
    let mut v = values.to_vec();
    for &p in orders.iter().take(values.len().saturating_sub(1)) {
        let f = ratio.powf(p);
        v = v.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
    }
    *v.last().expect("at least one value")
}

/// Solve one operator per resolution (and per box, if given) and extrapolate.
pub fn convergence_study(
    factory: &dyn Fn(usize, f64) -> Result<ReducedOperator>,
    resolutions: &[usize],
    boxes: &[f64],
    opts: &SolverOptions,
) -> Result<ConvergenceReport> {
    if resolutions.len() < 3 {
        return invalid("a convergence study needs at least three resolutions");
    }
    if boxes.is_empty() {
        return invalid("a convergence study needs at least one box length");
    }
    let mut entries = Vec::new();
    for &b in boxes {
        for &r in resolutions {
            let spec = solve_lowest(&factory(r, b)?, opts)?;
            entries.push(ConvergenceEntry { resolution: r, box_length: b, eigenvalues: spec.eigenvalues });
        }
    }
    let last = &entries[entries.len() - 3..];
    let ratio = last[2].resolution as f64 / last[1].resolution as f64;
    let levels = last.iter().map(|e| e.eigenvalues.len()).min().unwrap_or(0);
    let mut extrapolated = Vec::new();
    let mut orders = Vec::new();
    for l in 0..levels {
        let e = [last[0].eigenvalues[l], last[1].eigenvalues[l], last[2].eigenvalues[l]];
        let p = observed_order(e, ratio);
        orders.push(p);
        extrapolated.push(if p.is_finite() && p > 0.0 { richardson(&e[1..], ratio, &[p]) } else { e[2] });
    }
    Ok(ConvergenceReport { entries, extrapolated, observed_order: orders })
}
