//! Command-line flags; every flag overrides the key of the same name in the config file.

use std::path::PathBuf;

use affinebody::config::RunConfig;
use affinebody::hamiltonian::{ModelKind, Potential};
use affinebody::planar::PlanarDiscretization;
use affinebody::solver::Method;
use affinebody::spin::SpinLabel;
use affinebody::Result;
use clap::{Args, ValueEnum};

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Config file of `key = value` lines; flags take precedence over it
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Model: aff-aff, met-aff, aff-met, dalembert, unitary
    #[arg(long)]
    pub kind: Option<ModelKind>,
    /// Dimension n of the body
    #[arg(long)]
    pub n: Option<usize>,
    /// Inertial constant I
    #[arg(long = "I", value_name = "I")]
    pub i: Option<f64>,
    /// Inertial constant A
    #[arg(long = "A", value_name = "A")]
    pub a: Option<f64>,
    /// Inertial constant B
    #[arg(long = "B", value_name = "B")]
    pub b: Option<f64>,
    /// Left SU(2) label s of an n = 3 sector, e.g. 1/2
    #[arg(long)]
    pub s: Option<SpinLabel>,
    /// Right SU(2) label j of an n = 3 sector
    #[arg(long)]
    pub j: Option<SpinLabel>,
    /// Fourier label m of an n = 2 sector
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<i32>,
    /// Fourier label n of an n = 2 sector
    #[arg(long, allow_hyphen_values = true)]
    pub n_label: Option<i32>,
    /// Grid `min:max:points,...` of the full operator
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Planar q-axis grid `min:max:points`
    #[arg(long, allow_hyphen_values = true)]
    pub qgrid: Option<String>,
    /// Planar x-axis grid `min:max:points`
    #[arg(long, allow_hyphen_values = true)]
    pub xgrid: Option<String>,
    /// Potential: none, harmonic:kappa=K, isotropic:kappa=K
    #[arg(long)]
    pub potential: Option<Potential>,
    /// Planar x-axis discretization: auto, flat, divergence
    #[arg(long)]
    pub discretization: Option<PlanarDiscretization>,
    /// Number of levels
    #[arg(long)]
    pub count: Option<usize>,
    /// Residual tolerance of the eigensolver
    #[arg(long)]
    pub tol: Option<f64>,
    /// Master random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Eigensolver: auto, tridiagonal, separable, dense, lanczos
    #[arg(long)]
    pub method: Option<Method>,
    /// Cap on matrix-vector products of the iterative solver
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Run the coarsened-grid convergence study (true/false)
    #[arg(long, value_name = "BOOL")]
    pub convergence: Option<bool>,
    /// Scan all planar sectors with max(|m|, |n|) up to this bound
    #[arg(long)]
    pub scan: Option<i32>,
    /// Rotation vector `k1,k2,k3` for `reps`
    #[arg(long, allow_hyphen_values = true)]
    pub rotation: Option<String>,
    /// Presentation energy unit multiplying printed energies
    #[arg(long)]
    pub scale: Option<f64>,
    /// Amplitude file to validate
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Monte-Carlo samples of the scalar-product check (0 disables it)
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Tolerance of the wave-function checks, relative to max |f|
    #[arg(long)]
    pub check_tol: Option<f64>,
    /// Output directory; results go to stdout if absent
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Also write the assembled operator as COO text (needs --out-dir)
    #[arg(long)]
    pub export_matrix: bool,
    /// Also write eigenvectors as amplitude files (needs --out-dir)
    #[arg(long)]
    pub export_amplitudes: bool,
    /// Format of stdout output
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })*
    };
}

macro_rules! overlay_some {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = Some(v); })*
    };
}

impl RunArgs {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        overlay!(
            cfg, self, kind, n, i, a, b, s, j, m, n_label, qgrid, xgrid, potential, discretization, count, tol, seed, method,
            convergence, scale, mc_samples, check_tol
        );
        overlay_some!(cfg, self, grid, max_iterations, scan, rotation, input, out_dir);
        cfg.export_matrix |= self.export_matrix;
        cfg.export_amplitudes |= self.export_amplitudes;
        Ok(cfg)
    }
}
