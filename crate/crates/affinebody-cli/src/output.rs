//! Report and artifact writing. Every artifact carries the resolved config and seed:
//! JSON reports as keys, CSV and COO files as leading `#` lines, amplitude files as
//! a metadata trailer.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use affinebody::config::RunConfig;
use affinebody::solver::{fmt_energy, observed_order, richardson};
use affinebody::{Error, Result};
use serde_json::{json, Map, Value};

/// Energy scaled to the presentation unit and rounded to 12 significant digits.
pub fn energy(e: f64, cfg: &RunConfig) -> f64 {
    fmt_energy(e * cfg.scale).parse().unwrap_or(f64::NAN)
}

/// JSON report preamble: command, version, seed, config.
pub fn report(command: &str, cfg: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m
}

/// Single-line provenance JSON stored in amplitude trailers.
pub fn provenance(command: &str, cfg: &RunConfig) -> String {
    Value::Object(report(command, cfg)).to_string()
}

/// `#` comment lines heading CSV and COO files.
pub fn comment_header(command: &str, cfg: &RunConfig) -> String {
    format!(
        "# affinebody {command} {}\n# seed = {}\n# config = {}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.seed,
        serde_json::to_string(cfg).expect("config serializes")
    )
}

pub fn pretty(v: &Map<String, Value>) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

/// Destination of a command's artifacts.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        if let Some(d) = &cfg.out_dir {
            fs::create_dir_all(d)?;
        } else if cfg.export_matrix || cfg.export_amplitudes {
            return Err(Error::Invalid("--export-matrix and --export-amplitudes need --out-dir".into()));
        }
        Ok(Sink { dir: cfg.out_dir.clone() })
    }

    pub fn to_dir(&self) -> bool {
        self.dir.is_some()
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    /// Writes `text` to `name` in the output directory.
    pub fn write(&self, name: &str, text: &str) -> Result<Option<PathBuf>> {
        match self.path(name) {
            Some(p) => {
                fs::write(&p, text)?;
                Ok(Some(p))
            }
            None => Ok(None),
        }
    }

    pub fn create(&self, name: &str) -> Result<Option<(PathBuf, std::io::BufWriter<fs::File>)>> {
        match self.path(name) {
            Some(p) => {
                let f = fs::File::create(&p)?;
                Ok(Some((p, std::io::BufWriter::new(f))))
            }
            None => Ok(None),
        }
    }
}

pub fn stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Per-level observed order and extrapolation from spectra on grids coarse to fine
/// with refinement ratio 2.
pub fn convergence_block(points: &[Vec<usize>], levels: &[Vec<f64>], cfg: &RunConfig) -> Value {
    let count = levels.iter().map(Vec::len).min().unwrap_or(0);
    let mut orders = Vec::new();
    let mut extrapolated = Vec::new();
    if levels.len() >= 3 {
        let [a, b, c] = [&levels[levels.len() - 3], &levels[levels.len() - 2], &levels[levels.len() - 1]];
        for l in 0..count {
            let e = [a[l], b[l], c[l]];
            let p = observed_order(e, 2.0);
            let lim = if p.is_finite() && p > 0.0 { richardson(&e[1..], 2.0, &[p]) } else { e[2] };
            orders.push(if p.is_finite() { json!((p * 1e4).round() / 1e4) } else { Value::Null });
            extrapolated.push(json!(energy(lim, cfg)));
        }
    }
    json!({
        "ratio": 2,
        "points": points,
        "levels": levels.iter().map(|ls| ls.iter().map(|e| energy(*e, cfg)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "observed_order": orders,
        "extrapolated": extrapolated,
    })
}
