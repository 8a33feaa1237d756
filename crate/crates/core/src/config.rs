//! Run configuration (TOML).
//!
//! ```toml
//! output = "out"
//!
//! [grid]
//! lo = [0.0, 0.0]
//! hi = [1.0, 1.0]
//! counts = [33, 33]
//!
//! [coefficients]
//! preset = "uniform"
//! a = 0.05
//! lambda = 0.3
//! kappa = 1.0
//! k = [0.3, 0.2]
//! h = [1.0, 0.3]
//! gamma = 0.5
//! box_m = 2.0
//! a0 = 0.2
//!
//! [[sources]]
//! boundary = { kind = "side", selector = "x0_min", amplitude = [1.0, 0.0] }
//!
//! [phantom]
//! blobs = [{ center = [0.4, 0.6], radius = 0.25, amplitude = 1.5 }]
//!
//! [energy]
//! alpha = 1e-4
//! schedule = [4.0, 8.0, 16.0, 32.0]
//! ```
//!
//! Relative file paths are resolved against the directory of the config
//! file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adjoint::{GradCheckOptions, KktOptions};
use crate::coefficients::{preset_biomedical, BiomedicalOptics, ComplexCoeff, DiffusionCoeff, ProblemCoefficients};
use crate::error::{Error, Result};
use crate::functionals::EnergyParams;
use crate::grid::io::{read_field, read_scalar_on, FieldData};
use crate::grid::{Grid, MatrixField, ScalarField};
use crate::inverse::{check_schedule, OptimizerConfig};
use crate::phantom::{build_sources, PhantomSpec, SourceSpec};
use crate::robin::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Optional nodal field files replacing the constant uniform values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldFiles {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_re: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_im: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_re: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_im: Option<PathBuf>,
}

impl FieldFiles {
    fn is_empty(&self) -> bool {
        *self == FieldFiles::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefficientSection {
    Uniform {
        a: f64,
        lambda: f64,
        kappa: f64,
        k: [f64; 2],
        h: [f64; 2],
        gamma: f64,
        box_m: f64,
        a0: f64,
        #[serde(default, skip_serializing_if = "FieldFiles::is_empty")]
        files: FieldFiles,
    },
    Biomedical {
        mu_a: f64,
        mu_s: f64,
        omega: f64,
        light_speed: f64,
        quantum_efficiency: f64,
        lifetime: f64,
        gamma: f64,
        box_m: f64,
    },
}

impl CoefficientSection {
    pub fn box_m(&self) -> f64 {
        match self {
            CoefficientSection::Uniform { box_m, .. } | CoefficientSection::Biomedical { box_m, .. } => *box_m,
        }
    }

    pub fn build(&self, grid: &Grid, base: &Path) -> Result<ProblemCoefficients> {
        match self {
            CoefficientSection::Uniform {
                a,
                lambda,
                kappa,
                k,
                h,
                gamma,
                box_m,
                a0,
                files,
            } => {
                let scalar = |file: &Option<PathBuf>, c: f64| -> Result<ScalarField> {
                    match file {
                        Some(p) => read_scalar_on(&base.join(p), grid),
                        None => Ok(ScalarField::constant(grid, c)),
                    }
                };
                let a_field = match &files.a {
                    Some(p) => match read_field(&base.join(p))? {
                        (g, FieldData::Matrix(m)) if g == *grid => m,
                        _ => return Err(Error::Config(format!("{} is not a matrix field on the run grid", p.display()))),
                    },
                    None => MatrixField::scaled_identity(grid, *a),
                };
                let diffusion = DiffusionCoeff::new(grid, a_field, *lambda, scalar(&files.kappa, *kappa)?, *a0, *box_m)?;
                let k = ComplexCoeff {
                    re: scalar(&files.k_re, k[0])?,
                    im: scalar(&files.k_im, k[1])?,
                };
                let h = ComplexCoeff {
                    re: scalar(&files.h_re, h[0])?,
                    im: scalar(&files.h_im, h[1])?,
                };
                ProblemCoefficients::new(grid, diffusion, k, h, *gamma, *box_m, *a0)
            }
            CoefficientSection::Biomedical {
                mu_a,
                mu_s,
                omega,
                light_speed,
                quantum_efficiency,
                lifetime,
                gamma,
                box_m,
            } => {
                let optics = BiomedicalOptics {
                    mu_a: ScalarField::constant(grid, *mu_a),
                    mu_s: ScalarField::constant(grid, *mu_s),
                    omega: *omega,
                    light_speed: *light_speed,
                    quantum_efficiency: *quantum_efficiency,
                    lifetime: ScalarField::constant(grid, *lifetime),
                };
                preset_biomedical(grid, &optics, *gamma, *box_m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub alpha: f64,
    /// Tikhonov exponent; defaults to `max(n, 4) + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    pub schedule: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Generate synthetic data on the refined grid.
    pub fine_grid: bool,
    /// Measured trace files, one per source, replacing synthetic data.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseSection {
    /// Constant initial guess.
    pub initial: f64,
    /// Initial guess from a scalar field file (overrides `initial`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_file: Option<PathBuf>,
    /// Extra random restarts of the final stage.
    pub multi_start: usize,
    pub scaled_prefactors: bool,
    pub kkt_random_samples: usize,
    pub kkt_test_fields: usize,
}

impl Default for InverseSection {
    fn default() -> Self {
        let k = KktOptions::default();
        InverseSection {
            initial: 0.0,
            initial_file: None,
            multi_start: 0,
            scaled_prefactors: false,
            kkt_random_samples: k.random_samples,
            kkt_test_fields: k.test_fields,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSection {
    pub p: f64,
    pub nodes: usize,
    pub directions: usize,
    pub eps: Vec<f64>,
    /// Pass threshold for the relative discrepancy.
    pub tol: f64,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        let g = GradCheckOptions::default();
        GradCheckSection {
            p: 4.0,
            nodes: g.nodes,
            directions: g.directions,
            eps: g.eps,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub grid: GridSection,
    pub coefficients: CoefficientSection,
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub phantom: PhantomSpec,
    pub energy: EnergySection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub inverse: InverseSection,
    #[serde(default)]
    pub grad_check: GradCheckSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a run needs, built from a validated config.
pub struct RunSetup {
    pub grid: Grid,
    pub coeffs: ProblemCoefficients,
    pub params: EnergyParams,
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Parses TOML; errors name the offending key path, e.g. `grid.counts`.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            let key = match msg.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
                Some(field) if path == "." || path.is_empty() => field.to_string(),
                Some(field) => format!("{path}.{field}"),
                None => path,
            };
            Error::Config(format!("key `{key}`: {msg}"))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(&self.grid.lo, &self.grid.hi, &self.grid.counts)
    }

    pub fn energy_params(&self, dim: usize) -> EnergyParams {
        EnergyParams {
            p: self.energy.schedule.first().copied().unwrap_or(f64::NAN),
            m: self.energy.m.unwrap_or_else(|| EnergyParams::default_m(dim)),
            alpha: self.energy.alpha,
            box_m: self.coefficients.box_m(),
        }
    }

    /// Runs every module's validity checks; returns the built grid,
    /// coefficients and soft warnings.
    pub fn setup(&self) -> Result<RunSetup> {
        let grid = self.build_grid()?;
        let coeffs = self.coefficients.build(&grid, &self.base_dir)?;
        build_sources(&grid, &self.sources)?;
        self.phantom.validate(grid.dim(), coeffs.box_m)?;
        check_schedule(&self.energy.schedule)?;
        let params = self.energy_params(grid.dim());
        params.validate()?;
        self.optimizer.validate()?;
        self.solver.validate()?;
        if !(self.noise.delta >= 0.0 && self.noise.delta.is_finite()) {
            return Err(Error::Parameter {
                name: "noise.delta",
                value: self.noise.delta,
                reason: "must be non-negative",
            });
        }
        if !self.data.traces.is_empty() && self.data.traces.len() != self.sources.len() {
            return Err(Error::Config(format!(
                "data.traces lists {} files for {} sources",
                self.data.traces.len(),
                self.sources.len()
            )));
        }
        if !(0.0..=coeffs.box_m).contains(&self.inverse.initial) {
            return Err(Error::Parameter {
                name: "inverse.initial",
                value: self.inverse.initial,
                reason: "must lie in [0, M]",
            });
        }
        if !(self.grad_check.p >= 2.0 && self.grad_check.p.is_finite()) || self.grad_check.eps.is_empty() {
            return Err(Error::Config("grad_check.p must be finite and >= 2 and grad_check.eps non-empty".into()));
        }
        let mut warnings = Vec::new();
        for &p in &self.energy.schedule {
            warnings.extend(params.with_p(p).warnings(grid.dim()));
        }
        warnings.dedup();
        Ok(RunSetup {
            grid,
            coeffs,
            params,
            warnings,
        })
    }

    pub fn kkt_options(&self) -> KktOptions {
        KktOptions {
            random_samples: self.inverse.kkt_random_samples,
            test_fields: self.inverse.kkt_test_fields,
            seed: self.noise.seed,
            g_tol: self.optimizer.g_tol,
            step0: self.optimizer.step0,
            scaled_prefactors: self.inverse.scaled_prefactors,
        }
    }
}
