//! Subcommand bodies. Each returns its exit status; errors are mapped by `main`.

use std::fs::File;
use std::io::{BufReader, Write};

use affinebody::acceptance::{invariant_suite, run_all};
use affinebody::config::RunConfig;
use affinebody::geometry::RotationVector;
use affinebody::hamiltonian::{assemble, weight_factor, Frame, GridSpec, Labels, ModelKind, ReducedOperator};
use affinebody::peterweyl::{
    degenerate_constraint_check, exchange_symmetry_check, halfness_validate, k_plus_elements, montecarlo_full_product,
    read_amplitude_with_metadata, reduced_scalar_product, synthesize_sector, write_amplitude_with_metadata,
    ReducedAmplitude,
};
use affinebody::planar::{
    continuum_threshold, dalembert_planar, discreteness_criterion, exact_bound_states, planar_invariants,
    planar_quantum_operators, PlanarSector,
};
use affinebody::solver::{solve_lowest, Spectrum};
use affinebody::spin::{build_spin_matrices, su2_from_rotation_vector, wigner_d, CMat, Su2Element, C64};
use affinebody::{Error, Result};
use serde_json::{json, Map, Value};

use crate::args::Format;
use crate::output::{comment_header, convergence_block, energy, pretty, provenance, report, stdout, Sink};

pub const OK: i32 = 0;
pub const FAILED_CHECK: i32 = 1;
pub const NOT_CONVERGED: i32 = 2;

/// Solves, keeping the partial result of a non-converged run.
fn solve(op: &ReducedOperator, cfg: &RunConfig) -> Result<(Spectrum, bool)> {
    match solve_lowest(op, &cfg.solver_options()) {
        Ok(s) => Ok((s, true)),
        Err(Error::NonConvergence { partial, .. }) => Ok((*partial, false)),
        Err(e) => Err(e),
    }
}

fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| json!([m[(r, c)].re, m[(r, c)].im])).collect()))
            .collect(),
    )
}

fn levels_json(energies: &[f64], residuals: &[f64], cfg: &RunConfig) -> Value {
    Value::Array(
        energies
            .iter()
            .zip(residuals)
            .enumerate()
            .map(|(l, (e, r))| json!({"level": l, "energy": energy(*e, cfg), "residual": r}))
            .collect(),
    )
}

pub fn reps(cfg: &RunConfig) -> Result<i32> {
    cfg.validate()?;
    let s = cfg.s;
    let sm = build_spin_matrices(s);
    let k = cfg.rotation_vector()?;
    let u = su2_from_rotation_vector(&RotationVector::su2(k)?)?;
    let d = wigner_d(s, &u).d;
    let n = s.dim();
    let i = C64::new(0.0, 1.0);
    let mut commutator: f64 = 0.0;
    for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let comm = sm.get(a) * sm.get(b) - sm.get(b) * sm.get(a);
        commutator = commutator.max((comm - sm.get(c) * i).norm());
    }
    let cas = sm.get(0) * sm.get(0) + sm.get(1) * sm.get(1) + sm.get(2) * sm.get(2);
    let casimir = (cas - CMat::identity(n, n) * C64::from(s.casimir())).norm();
    let unitarity = (d.adjoint() * &d - CMat::identity(n, n)).norm();
    let mut r = report("reps", cfg);
    r.insert("s".into(), json!(s.to_string()));
    r.insert("dim".into(), json!(n));
    r.insert("casimir".into(), json!(s.casimir()));
    r.insert("rotation".into(), json!([k[0], k[1], k[2]]));
    r.insert("S1".into(), matrix_json(sm.get(0)));
    r.insert("S2".into(), matrix_json(sm.get(1)));
    r.insert("S3".into(), matrix_json(sm.get(2)));
    r.insert("D".into(), matrix_json(&d));
    r.insert(
        "checks".into(),
        json!({"commutator": commutator, "casimir": casimir, "unitarity": unitarity}),
    );
    emit_json("reps.json", &r, cfg)?;
    Ok(OK)
}

fn emit_json(name: &str, r: &Map<String, Value>, cfg: &RunConfig) -> Result<()> {
    let sink = Sink::new(cfg)?;
    let text = pretty(r);
    if let Some(p) = sink.write(name, &text)? {
        eprintln!("wrote {}", p.display());
    } else {
        stdout(&text)?;
    }
    Ok(())
}

pub fn geometry_check(cfg: &RunConfig) -> Result<i32> {
    cfg.validate()?;
    let checks = invariant_suite(cfg.seed, 100)?;
    let pass = checks.iter().all(|c| c.pass);
    let mut r = report("geometry-check", cfg);
    r.insert("checks".into(), serde_json::to_value(&checks).expect("checks serialize"));
    r.insert("pass".into(), json!(pass));
    emit_json("geometry-check.json", &r, cfg)?;
    Ok(if pass { OK } else { FAILED_CHECK })
}

pub fn spectrum(cfg: &RunConfig, format: Format) -> Result<i32> {
    cfg.validate_operator()?;
    let mut cfg = cfg.clone();
    cfg.grid = Some(cfg.grid()?.to_string());
    let cfg = &cfg;
    let sink = Sink::new(cfg)?;
    let (kind, params, sector) = (cfg.kind, cfg.params(), cfg.sector()?);
    let grid = cfg.grid()?;
    let pot = cfg.potential.clone();
    let build = |g: &GridSpec| assemble(kind, &params, &sector, g, &|q: &[f64]| pot.evaluate(kind, q));
    let op = build(&grid)?;
    let (mut spec, converged) = solve(&op, cfg)?;
    spec.meta.grid = Some(grid.to_string());

    let convergence = if cfg.convergence && converged {
        let mut points = Vec::new();
        let mut levels = Vec::new();
        let mut failure = None;
        for factor in [0.25, 0.5] {
            let g = grid.refined(factor);
            match build(&g).and_then(|o| solve_lowest(&o, &cfg.solver_options())) {
                Ok(s) => {
                    points.push(g.axes.iter().map(|a| a.points).collect());
                    levels.push(s.eigenvalues);
                }
                Err(e) => failure = Some(e.to_string()),
            }
        }
        points.push(grid.axes.iter().map(|a| a.points).collect());
        levels.push(spec.eigenvalues.clone());
        match failure {
            None => convergence_block(&points, &levels, cfg),
            Some(msg) => json!({"error": msg}),
        }
    } else {
        Value::Null
    };

    let mut r = report("spectrum", cfg);
    r.insert("sector".into(), json!(sector.to_string()));
    r.insert("grid".into(), json!(grid.to_string()));
    r.insert("dim".into(), json!(op.dim()));
    r.insert("converged".into(), json!(converged));
    r.insert("meta".into(), serde_json::to_value(&spec.meta).expect("meta serializes"));
    r.insert("levels".into(), levels_json(&spec.eigenvalues, &spec.residuals, cfg));
    r.insert("convergence".into(), convergence);

    let csv = spectrum_csv("spectrum", &spec, cfg);
    if sink.to_dir() {
        let mut written = vec![sink.write("spectrum.csv", &csv)?, sink.write("spectrum.json", &pretty(&r))?];
        if cfg.export_matrix {
            if let Some((p, mut w)) = sink.create("operator.coo")? {
                w.write_all(comment_header("spectrum", cfg).as_bytes())?;
                op.write_coo(&mut w)?;
                w.flush()?;
                written.push(Some(p));
            }
        }
        if cfg.export_amplitudes {
            let meta = provenance("spectrum", cfg);
            for (l, v) in spec.vectors.iter().enumerate() {
                let amp = op.amplitude_from_vector(v)?;
                if let Some((p, mut w)) = sink.create(&format!("level-{l}.amp"))? {
                    write_amplitude_with_metadata(&amp, Some(&meta), &mut w)?;
                    w.flush()?;
                    written.push(Some(p));
                }
            }
        }
        for p in written.into_iter().flatten() {
            eprintln!("wrote {}", p.display());
        }
    } else {
        match format {
            Format::Csv => stdout(&csv)?,
            Format::Json => stdout(&pretty(&r))?,
        }
    }
    if !converged {
        eprintln!("solver did not converge; partial levels written");
        return Ok(NOT_CONVERGED);
    }
    Ok(OK)
}

fn spectrum_csv(command: &str, spec: &Spectrum, cfg: &RunConfig) -> String {
    let mut scaled = spec.clone();
    scaled.eigenvalues.iter_mut().for_each(|e| *e *= cfg.scale);
    let mut buf = comment_header(command, cfg).into_bytes();
    scaled.write_csv(&mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

/// Lowest combined levels of one planar sector with grids scaled by `factor`.
fn planar_levels(cfg: &RunConfig, sector: PlanarSector, factor: f64) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let params = cfg.params();
    let opts = cfg.solver_options();
    if cfg.kind == ModelKind::DAlembert {
        let op = dalembert_planar(&params, sector, &cfg.rotated_grid()?.refined(factor), &cfg.potential, cfg.discretization)?;
        let (s, ok) = solve(&op, cfg)?;
        return Ok((s.eigenvalues, s.residuals, ok));
    }
    let kind = cfg.kind;
    let pot = &cfg.potential;
    let v = |q: f64, x: f64| {
        let (q1, q2) = planar_invariants(q, x);
        pot.evaluate(kind, &[q1, q2])
    };
    let v0 = v(0.0, 0.0);
    for (q, x) in [(0.7, 1.3), (-1.9, 0.4), (2.5, 3.1)] {
        let split = v(q, 0.0) + v(0.0, x) - v0;
        if (v(q, x) - split).abs() > 1e-12 * (1.0 + v(q, x).abs()) {
            return Err(Error::Invalid(format!("potential {pot} does not separate in (q, x)")));
        }
    }
    let (qop, xop) = planar_quantum_operators(
        kind,
        &params,
        sector,
        &cfg.qgrid()?.refined(factor),
        &cfg.xgrid()?.refined(factor),
        &|q| v(q, 0.0),
        &|x| v(0.0, x) - v0,
        cfg.discretization,
    )?;
    let (sq, okq) = match solve_lowest(&qop, &opts) {
        Ok(s) => (s, true),
        Err(Error::NonConvergence { partial, .. }) => (*partial, false),
        Err(e) => return Err(e),
    };
    let (sx, okx) = match solve_lowest(&xop, &opts) {
        Ok(s) => (s, true),
        Err(Error::NonConvergence { partial, .. }) => (*partial, false),
        Err(e) => return Err(e),
    };
    let mut sums: Vec<(f64, f64)> = Vec::new();
    for (eq, rq) in sq.eigenvalues.iter().zip(&sq.residuals) {
        for (ex, rx) in sx.eigenvalues.iter().zip(&sx.residuals) {
            sums.push((eq + ex, rq + rx));
        }
    }
    sums.sort_by(|a, b| a.0.total_cmp(&b.0));
    sums.truncate(cfg.count);
    Ok((sums.iter().map(|s| s.0).collect(), sums.iter().map(|s| s.1).collect(), okq && okx))
}

pub fn planar(cfg: &RunConfig, format: Format) -> Result<i32> {
    cfg.validate_planar()?;
    let mut cfg = cfg.clone();
    if cfg.kind == ModelKind::DAlembert {
        cfg.grid = Some(cfg.rotated_grid()?.to_string());
    }
    let cfg = &cfg;
    let sink = Sink::new(cfg)?;
    let sectors: Vec<PlanarSector> = match cfg.scan {
        Some(bound) => {
            let mut v = Vec::new();
            for m in -bound..=bound {
                for n in -bound..=bound {
                    if cfg.kind != ModelKind::DAlembert || (m + n) % 2 == 0 {
                        v.push(PlanarSector::new(m, n));
                    }
                }
            }
            v
        }
        None => vec![cfg.planar_sector()],
    };
    let params = cfg.params();
    let mut all_converged = true;
    let mut csv = comment_header("planar", cfg);
    csv.push_str("m,n,level,energy,residual\n");
    let mut blocks = Vec::new();
    for sector in sectors {
        let (energies, residuals, ok) = planar_levels(cfg, sector, 1.0)?;
        all_converged &= ok;
        for (l, (e, r)) in energies.iter().zip(&residuals).enumerate() {
            csv.push_str(&format!("{},{},{l},{},{r:.3e}\n", sector.m, sector.n, affinebody::solver::fmt_energy(e * cfg.scale)));
        }
        let convergence = if cfg.convergence && ok {
            let coarse: Result<Vec<_>> = [0.25, 0.5].iter().map(|f| planar_levels(cfg, sector, *f)).collect();
            match coarse {
                Ok(c) => {
                    let mut levels: Vec<Vec<f64>> = c.into_iter().map(|x| x.0).collect();
                    levels.push(energies.clone());
                    let points = planar_points(cfg)?;
                    convergence_block(&points, &levels, cfg)
                }
                Err(e) => json!({"error": e.to_string()}),
            }
        } else {
            Value::Null
        };
        let mut b = Map::new();
        b.insert("m".into(), json!(sector.m));
        b.insert("n".into(), json!(sector.n));
        if cfg.kind != ModelKind::DAlembert {
            b.insert("discreteness".into(), serde_json::to_value(discreteness_criterion(sector)).expect("serializes"));
            b.insert("continuum_threshold".into(), json!(energy(continuum_threshold(cfg.kind, &params, sector), cfg)));
            let exact: Vec<f64> = exact_bound_states(cfg.kind, &params, sector).iter().map(|e| energy(*e, cfg)).collect();
            b.insert("exact_bound_states".into(), json!(exact));
        }
        b.insert("converged".into(), json!(ok));
        b.insert("levels".into(), levels_json(&energies, &residuals, cfg));
        b.insert("convergence".into(), convergence);
        blocks.push(Value::Object(b));
    }
    let mut r = report("planar", cfg);
    r.insert("sectors".into(), Value::Array(blocks));
    if sink.to_dir() {
        for p in [sink.write("planar.csv", &csv)?, sink.write("planar.json", &pretty(&r))?].into_iter().flatten() {
            eprintln!("wrote {}", p.display());
        }
    } else {
        match format {
            Format::Csv => stdout(&csv)?,
            Format::Json => stdout(&pretty(&r))?,
        }
    }
    Ok(if all_converged { OK } else { NOT_CONVERGED })
}

fn planar_points(cfg: &RunConfig) -> Result<Vec<Vec<usize>>> {
    let grids: Vec<GridSpec> =
        if cfg.kind == ModelKind::DAlembert { vec![cfg.rotated_grid()?] } else { vec![cfg.qgrid()?, cfg.xgrid()?] };
    Ok([0.25, 0.5, 1.0]
        .iter()
        .map(|f| grids.iter().flat_map(|g| g.refined(*f).axes.iter().map(|a| a.points).collect::<Vec<_>>()).collect())
        .collect())
}

fn check(name: &str, residual: f64, tolerance: f64, note: Option<String>) -> Value {
    let mut m = Map::new();
    m.insert("check".into(), json!(name));
    m.insert("residual".into(), json!(residual));
    m.insert("tolerance".into(), json!(tolerance));
    m.insert("pass".into(), json!(residual <= tolerance));
    if let Some(n) = note {
        m.insert("note".into(), json!(n));
    }
    Value::Object(m)
}

/// Weight `P` in the amplitude's frame coordinates.
fn frame_weight(f: &ReducedAmplitude, kind: ModelKind) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| match f.frame {
        Frame::PlanarQ => 1.0,
        Frame::PlanarX if kind == ModelKind::UnitaryGroup => x[0].sin().abs(),
        Frame::PlanarX => x[0].sinh().abs(),
        frame => frame.to_invariants(x).map(|q| weight_factor(&q, kind)).unwrap_or(0.0),
    }
}

pub fn validate_wavefunction(cfg: &RunConfig) -> Result<i32> {
    cfg.validate()?;
    let path = cfg.input.as_ref().ok_or_else(|| Error::Invalid("validate-wavefunction needs --input".into()))?;
    let file = File::open(path).map_err(|e| Error::Invalid(format!("cannot open {}: {e}", path.display())))?;
    let (f, metadata) = read_amplitude_with_metadata(BufReader::new(file))?;
    let kind = cfg.kind;
    let scale = f.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut checks = Vec::new();
    let finite = f.values.iter().all(|z| z.re.is_finite() && z.im.is_finite());
    checks.push(check("finite-values", if finite { 0.0 } else { f64::INFINITY }, 0.0, None));
    if scale == 0.0 {
        return Err(Error::Invalid("amplitude is identically zero".into()));
    }
    if let Labels::Spin { s, j } = f.sector.labels {
        let rep = halfness_validate(&[(s, j)]);
        let note = (!rep.violations.is_empty()).then(|| format!("{:?}", rep.violations));
        checks.push(check("superselection", if rep.projectable { 0.0 } else { 1.0 }, 0.0, note));
    }
    let has_invariants = f.frame.to_invariants(&vec![0.0; f.grid.ndim()]).is_some();
    if f.sector.dim >= 3 && has_invariants {
        match degenerate_constraint_check(&f, kind, 0.0) {
            Ok(v) => checks.push(check("degenerate-constraint", v / scale, cfg.check_tol, None)),
            Err(e) => checks.push(check("degenerate-constraint", f64::INFINITY, cfg.check_tol, Some(e.to_string()))),
        }
        // chamber-restricted data: permutations leave the stored chamber, so only the
        // sign-flip elements constrain the stored values
        let chamber_only = f.frame == Frame::Jacobi;
        let mut worst: f64 = 0.0;
        for w in k_plus_elements(f.sector.dim) {
            if chamber_only && (0..w.nrows()).any(|r| (0..w.ncols()).any(|c| r != c && w[(r, c)] != 0.0)) {
                continue;
            }
            worst = worst.max(exchange_symmetry_check(&f, &w)?);
        }
        let note = chamber_only.then(|| "chamber-restricted amplitude: sign-flip elements only".to_string());
        checks.push(check("exchange-symmetry", worst / scale, cfg.check_tol, note));
    }
    let weight = frame_weight(&f, kind);
    let norm = reduced_scalar_product(&f, &f, &weight)?;
    let mut r = report("validate-wavefunction", cfg);
    r.insert("input".into(), json!(path.display().to_string()));
    r.insert("sector".into(), json!(f.sector.to_string()));
    r.insert("frame".into(), json!(format!("{:?}", f.frame)));
    r.insert("grid".into(), json!(f.grid.to_string()));
    r.insert("fiber_dim".into(), json!(f.sector.fiber_dim()));
    r.insert("norm".into(), json!(norm.re));
    if f.sector.dim == 3 && has_invariants && cfg.mc_samples > 0 {
        let (lo, hi) = invariant_box(&f);
        let psi = |u: &Su2Element, q: &[f64], v: &Su2Element| {
            synthesize_sector(&f, u, q, v).map(|m| m[(0, 0)]).unwrap_or_default()
        };
        let w = |q: &[f64]| weight_factor(q, kind);
        let qbox: Vec<(f64, f64)> = lo.into_iter().zip(hi).collect();
        let mc = montecarlo_full_product(&psi, &psi, &w, &qbox, cfg.mc_samples, cfg.seed)?;
        let dev = (mc.value() - norm).norm();
        checks.push(check("montecarlo-scalar-product", dev, 3.0 * mc.stderr, None));
        r.insert("montecarlo".into(), serde_json::to_value(mc).expect("serializes"));
    }
    let pass = checks.iter().all(|c| c["pass"] == json!(true));
    r.insert("checks".into(), Value::Array(checks));
    r.insert("pass".into(), json!(pass));
    r.insert(
        "file_metadata".into(),
        metadata.map(|m| serde_json::from_str(&m).unwrap_or(Value::String(m))).unwrap_or(Value::Null),
    );
    emit_json("validation.json", &r, cfg)?;
    Ok(if pass { OK } else { FAILED_CHECK })
}

/// Bounding box of the grid nodes in invariant coordinates.
fn invariant_box(f: &ReducedAmplitude) -> (Vec<f64>, Vec<f64>) {
    let n = f.sector.dim;
    let (mut lo, mut hi) = (vec![f64::INFINITY; n], vec![f64::NEG_INFINITY; n]);
    for node in 0..f.grid.len() {
        if let Some(q) = f.node_invariants(node) {
            for a in 0..n {
                lo[a] = lo[a].min(q[a]);
                hi[a] = hi[a].max(q[a]);
            }
        }
    }
    (lo, hi)
}

pub fn acceptance(cfg: &RunConfig) -> Result<i32> {
    cfg.validate()?;
    let results = run_all();
    for r in &results {
        eprintln!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let mut r = report("acceptance", cfg);
    r.insert("seed".into(), json!(affinebody::acceptance::SEED));
    r.insert("criteria".into(), serde_json::to_value(&results).expect("results serialize"));
    r.insert("passed".into(), json!(passed));
    r.insert("total".into(), json!(results.len()));
    emit_json("acceptance.json", &r, cfg)?;
    Ok(if passed == results.len() { OK } else { FAILED_CHECK })
}
