//! Run configuration: a flat key/value file (TOML syntax) whose keys match the CLI
//! flags. Command-line values override the file, which overrides the defaults.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{GridSpec, InertialParams, ModelKind, Potential, SectorLabel};
use crate::planar::{PlanarDiscretization, PlanarSector};
use crate::solver::{Method, SolverOptions};
use crate::spin::SpinLabel;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub kind: ModelKind,
    /// Dimension of the body's configuration space.
    pub n: usize,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// SU(2) labels of an `n = 3` sector.
    pub s: SpinLabel,
    pub j: SpinLabel,
    /// Fourier labels `(m, n)` of an `n = 2` sector.
    pub m: i32,
    pub n_label: i32,
    /// Grid of the full reduced operator (`(Q⁺, Q⁻)` for the planar d'Alembert model);
    /// an `n`-dependent default if absent.
    pub grid: Option<String>,
    /// Planar q-axis and x-axis grids.
    pub qgrid: String,
    pub xgrid: String,
    pub potential: Potential,
    pub discretization: PlanarDiscretization,
    pub count: usize,
    pub tol: f64,
    pub seed: u64,
    pub method: Method,
    pub max_iterations: Option<usize>,
    /// Also solve on the grids coarsened by 2 and 4 and extrapolate.
    pub convergence: bool,
    /// Planar sector scan up to `max(|m|, |n|)`; a single sector if absent.
    pub scan: Option<i32>,
    /// Rotation vector `"k1,k2,k3"` at which `reps` evaluates `D^s`.
    pub rotation: Option<String>,
    /// Presentation-only energy unit: printed energies are multiplied by it.
    pub scale: f64,
    /// Amplitude file read by `validate-wavefunction`.
    pub input: Option<PathBuf>,
    /// Monte-Carlo samples of the scalar-product check (0 disables it).
    pub mc_samples: usize,
    /// Tolerance of the `validate-wavefunction` checks, relative to `max |f|`.
    pub check_tol: f64,
    /// Directory receiving the output files; stdout if absent.
    pub out_dir: Option<PathBuf>,
    /// Write the assembled operator as a COO text file.
    pub export_matrix: bool,
    /// Write the lowest eigenvectors as amplitude files.
    pub export_amplitudes: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: ModelKind::AffAff,
            n: 2,
            i: 1.0,
            a: 1.0,
            b: 0.5,
            s: SpinLabel::ZERO,
            j: SpinLabel::ZERO,
            m: 0,
            n_label: 0,
            grid: None,
            qgrid: "-8:8:512".into(),
            xgrid: "0:20:1024".into(),
            potential: Potential::None,
            discretization: PlanarDiscretization::Auto,
            count: 6,
            tol: 1e-8,
            seed: 1,
            method: Method::Auto,
            max_iterations: None,
            convergence: true,
            scan: None,
            rotation: None,
            scale: 1.0,
            input: None,
            mc_samples: 0,
            check_tol: 1e-6,
            out_dir: None,
            export_matrix: false,
            export_amplitudes: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn params(&self) -> InertialParams {
        InertialParams::new(self.n, self.i, self.a, self.b)
    }

    pub fn sector(&self) -> Result<SectorLabel> {
        if self.n == 2 {
            Ok(SectorLabel::fourier(self.m, self.n_label))
        } else {
            SectorLabel::spin(self.n, self.s, self.j)
        }
    }

    pub fn planar_sector(&self) -> PlanarSector {
        PlanarSector::new(self.m, self.n_label)
    }

    /// Grid of the full operator in Jacobi coordinates `(q, y₁, ..)`.
    pub fn grid(&self) -> Result<GridSpec> {
        if let Some(g) = &self.grid {
            return g.parse();
        }
        let default = match self.n {
            2 => "-6:6:64,0:8:64".to_string(),
            n => {
                let mut axes = vec!["-6:6:16".to_string()];
                axes.extend(std::iter::repeat_n("0:6:16".to_string(), n - 1));
                axes.join(",")
            }
        };
        default.parse()
    }

    /// `(Q⁺, Q⁻)` grid of the planar d'Alembert operator.
    pub fn rotated_grid(&self) -> Result<GridSpec> {
        self.grid.as_deref().unwrap_or("0:9:256,0:9:256").parse()
    }

    pub fn qgrid(&self) -> Result<GridSpec> {
        self.qgrid.parse()
    }

    pub fn xgrid(&self) -> Result<GridSpec> {
        self.xgrid.parse()
    }

    pub fn rotation_vector(&self) -> Result<Vector3<f64>> {
        let Some(text) = &self.rotation else {
            return Ok(Vector3::zeros());
        };
        let parts: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad rotation component {p:?}"))))
            .collect::<Result<_>>()?;
        if parts.len() != 3 {
            return Err(Error::Parse(format!("rotation needs 3 components, got {}", parts.len())));
        }
        Ok(Vector3::new(parts[0], parts[1], parts[2]))
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::new(self.count, self.tol).with_method(self.method).with_seed(self.seed);
        o.max_iterations = self.max_iterations;
        o
    }

    /// Checks the settings shared by every subcommand.
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return invalid("count must be at least 1");
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return invalid(format!("tol = {} must lie in (0, 1)", self.tol));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return invalid(format!("scale = {} must be positive and finite", self.scale));
        }
        if !(self.check_tol > 0.0) {
            return invalid(format!("check-tol = {} must be positive", self.check_tol));
        }
        if self.mc_samples != 0 && self.mc_samples < 1000 {
            return invalid(format!("mc-samples = {} must be 0 or at least 1000", self.mc_samples));
        }
        if let Some(m) = self.scan {
            if m < 0 {
                return invalid("scan bound must be non-negative");
            }
        }
        self.rotation_vector()?;
        Ok(())
    }

    /// Checks everything needed to assemble the full reduced operator.
    pub fn validate_operator(&self) -> Result<()> {
        self.validate()?;
        self.params().validate(self.kind)?;
        self.sector()?;
        let g = self.grid()?;
        if g.ndim() != self.n {
            return Err(Error::Dimension(format!("grid has {} axes, n = {} needs {}", g.ndim(), self.n, self.n)));
        }
        Ok(())
    }

    /// Checks everything needed by the planar pipeline.
    pub fn validate_planar(&self) -> Result<()> {
        self.validate()?;
        if self.n != 2 {
            return invalid(format!("the planar pipeline needs n = 2, got n = {}", self.n));
        }
        self.params().validate(self.kind)?;
        if self.kind == ModelKind::DAlembert {
            let g = self.rotated_grid()?;
            if g.ndim() != 2 {
                return Err(Error::Dimension("the d'Alembert planar grid needs 2 axes (Q+, Q-)".into()));
            }
        } else {
            self.qgrid()?;
            self.xgrid()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_defaults() {
        let c = RunConfig::from_toml_str("kind = \"met-aff\"\nn = 3\nA = 2.0\ns = \"1/2\"\nj = \"3/2\"\n").unwrap();
        assert_eq!(c.kind, ModelKind::MetAff);
        assert_eq!((c.n, c.a, c.b), (3, 2.0, 0.5));
        assert_eq!(c.sector().unwrap(), SectorLabel::spin(3, SpinLabel::HALF, SpinLabel::from_twice(3)).unwrap());
        assert_eq!(c.grid().unwrap().ndim(), 3);
    }

    #[test]
    fn unknown_keys_and_half_integer_sectors_rejected() {
        assert!(RunConfig::from_toml_str("kappa = 1.0").is_err());
        let c = RunConfig::from_toml_str("n = 3\ns = \"1/2\"\nj = \"1\"").unwrap();
        assert!(matches!(c.validate_operator(), Err(Error::HalfInteger { .. })));
    }

    #[test]
    fn toml_roundtrip() {
        let c = RunConfig { potential: "harmonic:kappa=2".parse().unwrap(), scan: Some(3), ..Default::default() };
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back.to_toml_string(), c.to_toml_string());
    }

    #[test]
    fn rotation_parsing() {
        let c = RunConfig { rotation: Some("0.1, 0.2,0.3".into()), ..Default::default() };
        assert_eq!(c.rotation_vector().unwrap(), Vector3::new(0.1, 0.2, 0.3));
        let bad = RunConfig { rotation: Some("1,2".into()), ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
