//! Command-line front end: argument parsing, run orchestration and output
//! files. Exit codes are listed in [`ExitCode`].

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::adjoint::{gradient_check, kkt_check, GradCheckOptions, KktReport, ReducedProblem};
use crate::config::{RunConfig, RunSetup};
use crate::error::{Error, Result};
use crate::functionals::MeasurementData;
use crate::grid::io::{read_scalar_on, write_scalar, write_vec2, write_vtk, FieldData};
use crate::grid::{BoundarySet, Grid, ScalarField};
use crate::inverse::{multi_start, p_continuation, ContinuationResult};
use crate::phantom::{build_sources, make_phantom, synth_data, synth_data_refined};
use crate::robin::{ForwardModel, Trace};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Config = 1,
    Solver = 2,
    NoStage = 3,
    GradCheck = 4,
    Kkt = 5,
}

#[derive(Debug, Parser)]
#[command(name = "fot", version, about = "Fluorescence optical tomography: forward model and L^p/L^inf reconstruction")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Single worker thread.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the forward problem for the configured phantom.
    Forward,
    /// Reconstruct xi by p-continuation.
    Invert,
    /// Write the configured phantom.
    Phantom,
    /// Compare adjoint gradients with finite differences.
    GradCheck {
        /// Comma-separated finite-difference steps.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Check the stationarity conditions at a snapshot.
    KktCheck {
        /// Snapshot written by `invert`, e.g. `xi_p8_final.field`.
        snapshot: PathBuf,
        /// Exponent; inferred from the snapshot name when omitted.
        #[arg(long)]
        p: Option<f64>,
    },
}

struct Failure {
    code: ExitCode,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_solver_failure() {
            ExitCode::Solver
        } else {
            ExitCode::Config
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<ExitCode, Failure>;

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let threads = if cli.global.deterministic { Some(1) } else { cli.global.threads };
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(code) => code as i32,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code as i32
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    let Some(path) = &cli.global.config else {
        return Err(Failure {
            code: ExitCode::Config,
            message: "--config is required".into(),
        });
    };
    let RunInputs { cfg, setup } = RunInputs::load(path)?;
    for w in &setup.warnings {
        log::warn!("{w}");
    }
    let out = cli.global.out.clone().unwrap_or_else(|| cfg.resolve(&cfg.output));
    fs::create_dir_all(&out).map_err(Error::from)?;
    let ctx = Context {
        inputs: RunInputs { cfg, setup },
        out,
    };
    match &cli.command {
        Command::Forward => ctx.forward(),
        Command::Invert => ctx.invert(),
        Command::Phantom => ctx.phantom(),
        Command::GradCheck { eps, corrupt_gradient } => ctx.grad_check(eps.clone(), *corrupt_gradient),
        Command::KktCheck { snapshot, p } => ctx.kkt_check(snapshot, *p),
    }
}

/// A loaded config with its validated setup; builds models and data.
pub struct RunInputs {
    pub cfg: RunConfig,
    pub setup: RunSetup,
}

struct Context {
    inputs: RunInputs,
    out: PathBuf,
}

impl std::ops::Deref for Context {
    type Target = RunInputs;

    fn deref(&self) -> &RunInputs {
        &self.inputs
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::from)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

/// Formats a trace file: a `TRACE <i> <count>` header and one
/// `node coords... re im` line per node.
pub fn format_trace(grid: &Grid, index: usize, trace: &Trace) -> String {
    let mut s = format!("TRACE {index} {}\n", trace.nodes.len());
    for (&n, v) in trace.nodes.iter().zip(&trace.values) {
        let x = grid.coords(n);
        let _ = write!(s, "{n}");
        for c in &x[..grid.dim()] {
            let _ = write!(s, " {c:?}");
        }
        let _ = writeln!(s, " {:?} {:?}", v[0], v[1]);
    }
    s
}

/// Parses a trace file and checks its nodes against `set`.
pub fn parse_trace(text: &str, grid: &Grid, set: &BoundarySet, origin: &Path) -> Result<Trace> {
    let err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    let count: usize = match header.as_slice() {
        ["TRACE", _, count] => count.parse().map_err(|_| err("bad node count".into()))?,
        _ => return Err(err("missing `TRACE <i> <count>` header".into())),
    };
    let mut nodes = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for (k, line) in lines.enumerate() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != grid.dim() + 3 {
            return Err(err(format!("line {}: expected {} columns", k + 2, grid.dim() + 3)));
        }
        let node: usize = tok[0].parse().map_err(|_| err(format!("line {}: bad node index", k + 2)))?;
        let re: f64 = tok[tok.len() - 2].parse().map_err(|_| err(format!("line {}: bad value", k + 2)))?;
        let im: f64 = tok[tok.len() - 1].parse().map_err(|_| err(format!("line {}: bad value", k + 2)))?;
        nodes.push(node);
        values.push([re, im]);
    }
    if nodes.len() != count {
        return Err(err(format!("header announces {count} nodes, found {}", nodes.len())));
    }
    if nodes != set.nodes(grid) {
        return Err(err(format!("nodes do not match measurement set `{}`", set.selector())));
    }
    Ok(Trace { nodes, values })
}

fn fmt_p(p: f64) -> String {
    format!("{p}")
}

/// Reads `p` from a snapshot name of the form `xi_p<value>_final.field`.
pub fn p_from_snapshot(path: &Path) -> Option<f64> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("xi_p")?.strip_suffix("_final.field")?.parse().ok()
}

impl RunInputs {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg = RunConfig::load(path)?;
        let setup = cfg.setup()?;
        Ok(RunInputs { cfg, setup })
    }

    pub fn model_on(&self, grid: &Grid) -> Result<ForwardModel> {
        let coeffs = if *grid == self.setup.grid {
            self.setup.coeffs.clone()
        } else {
            self.cfg.coefficients.build(grid, &self.cfg.base_dir)?
        };
        let (sources, sets) = build_sources(grid, &self.cfg.sources)?;
        ForwardModel::new(grid.clone(), coeffs, sources, sets, self.cfg.solver)
    }

    pub fn phantom_on(&self, grid: &Grid) -> Result<ScalarField> {
        make_phantom(grid, &self.cfg.phantom, self.setup.coeffs.box_m)
    }

    /// Measured traces from files, or synthetic data from the phantom.
    pub fn data(&self, model: &ForwardModel) -> Result<(MeasurementData, Option<ScalarField>)> {
        let grid = &model.grid;
        if !self.cfg.data.traces.is_empty() {
            let traces = self
                .cfg
                .data
                .traces
                .iter()
                .zip(&model.measurements)
                .map(|(p, set)| {
                    let path = self.cfg.resolve(p);
                    let text = fs::read_to_string(&path)?;
                    parse_trace(&text, grid, set, &path)
                })
                .collect::<Result<_>>()?;
            let data = MeasurementData::new(grid, model.measurements.clone(), traces, self.cfg.noise.delta)?;
            return Ok((data, None));
        }
        let xi_true = self.phantom_on(grid)?;
        let (delta, seed) = (self.cfg.noise.delta, self.cfg.noise.seed);
        let data = if self.cfg.data.fine_grid {
            let fine = self.model_on(&grid.refined())?;
            synth_data_refined(grid, &fine, &self.phantom_on(&fine.grid)?, delta, seed)?
        } else {
            synth_data(model, &xi_true, delta, seed)?
        };
        Ok((data, Some(xi_true)))
    }

    pub fn initial(&self) -> Result<ScalarField> {
        match &self.cfg.inverse.initial_file {
            Some(p) => read_scalar_on(&self.cfg.resolve(p), &self.setup.grid),
            None => Ok(ScalarField::constant(&self.setup.grid, self.cfg.inverse.initial)),
        }
    }
}

impl Context {
    fn forward(&self) -> CmdResult {
        let grid = &self.setup.grid;
        let model = self.model_on(grid)?;
        let xi = self.phantom_on(grid)?;
        let state = model.forward(&xi)?;
        let mut table = String::from("source  stage     method     iters  residual\n");
        for i in 0..model.num_sources() {
            write_vec2(&self.out.join(format!("u_{i}.field")), grid, &state.u[i])?;
            write_vec2(&self.out.join(format!("v_{i}.field")), grid, &state.v[i])?;
            write_text(&self.out.join(format!("trace_{i}.txt")), &format_trace(grid, i, &state.traces[i]))?;
            for (name, r) in ["excite", "emit"].iter().zip(&state.reports[i]) {
                let _ = writeln!(
                    table,
                    "{i:<6}  {name:<8}  {:<9}  {:>5}  {:.3e}",
                    format!("{:?}", r.method).to_lowercase(),
                    r.iterations,
                    r.relative_residual
                );
                log::info!("source {i} {name}: {:?}", r);
            }
        }
        print!("{table}");
        Ok(ExitCode::Ok)
    }

    fn phantom(&self) -> CmdResult {
        let grid = &self.setup.grid;
        let xi = self.phantom_on(grid)?;
        write_scalar(&self.out.join("xi_true.field"), grid, &xi)?;
        write_vtk(&self.out.join("xi_true.vtk"), grid, "xi", &FieldData::Scalar(xi.clone()))?;
        println!("nodes {}  max {:.6}  min {:.6}", xi.len(), xi.max_abs(), xi.values.iter().fold(f64::INFINITY, |a, &b| a.min(b)));
        Ok(ExitCode::Ok)
    }

    fn invert(&self) -> CmdResult {
        let grid = &self.setup.grid;
        let model = self.model_on(grid)?;
        let (data, xi_true) = self.data(&model)?;
        for (i, t) in data.traces.iter().enumerate() {
            write_text(&self.out.join(format!("data_trace_{i}.txt")), &format_trace(grid, i, t))?;
        }
        let xi0 = self.initial()?;
        let result = p_continuation(
            &model,
            &data,
            &self.setup.params,
            &self.cfg.energy.schedule,
            &xi0,
            &self.cfg.optimizer,
            &self.cfg.kkt_options(),
        )?;
        self.write_inversion(grid, &result, xi_true.as_ref())?;
        if self.cfg.inverse.multi_start > 0 && result.any_succeeded() {
            let p = *self.cfg.energy.schedule.last().expect("validated schedule");
            let problem = ReducedProblem::new(&model, &data, self.setup.params.with_p(p))?;
            let rep = multi_start(&problem, &result.xi, self.cfg.inverse.multi_start, self.cfg.noise.seed, &self.cfg.optimizer)?;
            log::info!(
                "multi-start p={p}: max relative distance {:.3e}, energy spread {:.3e}",
                rep.max_relative_distance,
                rep.energy_spread
            );
            write_json(&self.out.join("multistart.json"), &rep)?;
        }
        if result.any_succeeded() {
            Ok(ExitCode::Ok)
        } else {
            Err(Failure {
                code: ExitCode::NoStage,
                message: "no continuation stage succeeded".into(),
            })
        }
    }

    fn write_inversion(&self, grid: &Grid, result: &ContinuationResult, xi_true: Option<&ScalarField>) -> Result<()> {
        let n = self.cfg.sources.len();
        let mut csv = String::from("iter,p,E_p,E_inf");
        for i in 0..n {
            let _ = write!(csv, ",misfit_{i}");
        }
        csv.push_str(",tikhonov\n");
        let mut jsonl = String::new();
        let mut table = String::from("p        status                iters  E_p           E_inf         TV            C_p           KKT\n");
        for stage in &result.stages {
            let s = &stage.summary;
            for r in &stage.records {
                let _ = write!(csv, "{},{},{:?},{:?}", r.iter, r.p, r.energy_p, r.energy_inf);
                for m in &r.misfit {
                    let _ = write!(csv, ",{m:?}");
                }
                let _ = writeln!(csv, ",{:?}", r.tikhonov);
                jsonl.push_str(&serde_json::to_string(r).map_err(|e| Error::Config(e.to_string()))?);
                jsonl.push('\n');
            }
            if let Some(xi) = &stage.xi {
                write_scalar(&self.out.join(format!("xi_p{}_final.field", fmt_p(s.p))), grid, xi)?;
            }
            if let Some(kkt) = &s.kkt {
                write_json(&self.out.join(format!("kkt_p{}.json", fmt_p(s.p))), kkt)?;
            }
            let status = match (&s.status, &s.error) {
                (Some(t), _) => format!("{t:?}").to_lowercase(),
                (None, _) => "failed".to_string(),
            };
            let kkt = s.kkt.as_ref().map_or("-", |k| if k.passed() { "pass" } else { "fail" });
            let _ = writeln!(
                table,
                "{:<8} {:<21} {:>5}  {:<12.6e}  {:<12.6e}  {:<12.6e}  {:<12.6e}  {kkt}",
                s.p, status, s.iterations, s.energy_p, s.energy_inf, s.total_variation, s.c_p
            );
        }
        write_text(&self.out.join("energy.csv"), &csv)?;
        write_text(&self.out.join("trace.jsonl"), &jsonl)?;
        write_scalar(&self.out.join("xi_final.field"), grid, &result.xi)?;
        write_vtk(&self.out.join("xi_final.vtk"), grid, "xi", &FieldData::Scalar(result.xi.clone()))?;
        let summaries: Vec<_> = result.stages.iter().map(|s| &s.summary).collect();
        write_json(&self.out.join("stages.json"), &summaries)?;
        if let Some(t) = xi_true {
            let err = relative_l2_error(grid, &result.xi, t);
            log::info!("relative L2 error against the phantom: {err:.4}");
            let _ = writeln!(table, "relative L2 error {err:.6e}");
        }
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(table.as_bytes())?;
        Ok(())
    }

    fn grad_check(&self, eps: Option<Vec<f64>>, corrupt: bool) -> CmdResult {
        let grid = &self.setup.grid;
        let model = self.model_on(grid)?;
        let (data, _) = self.data(&model)?;
        let gc = &self.cfg.grad_check;
        let options = GradCheckOptions {
            nodes: gc.nodes,
            directions: gc.directions,
            eps: eps.unwrap_or_else(|| gc.eps.clone()),
            seed: self.cfg.noise.seed,
            corrupt,
        };
        if options.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("--eps entries must be positive".into()).into());
        }
        let box_m = self.setup.coeffs.box_m;
        let margin = 2.0 * options.eps.iter().copied().fold(0.0, f64::max);
        let base = self.phantom_on(grid)?;
        let xi = ScalarField::new(base.values.iter().map(|v| (0.5 * v + 0.25 * box_m).clamp(margin, box_m - margin)).collect());
        let problem = ReducedProblem::new(&model, &data, self.setup.params.with_p(gc.p))?;
        let report = gradient_check(&problem, &xi, &options)?;
        write_json(&self.out.join("gradcheck.json"), &report)?;
        let mut table = String::from("eps        max_discrepancy\n");
        for (e, d) in &report.max_by_eps {
            let _ = writeln!(table, "{e:<9.1e}  {d:.3e}");
        }
        let best = report.best_discrepancy();
        let pass = best <= gc.tol;
        let _ = writeln!(table, "tangent_adjoint_gap {:.3e}", report.tangent_adjoint_gap);
        let _ = writeln!(table, "{} (best {best:.3e}, tol {:.1e})", if pass { "PASS" } else { "FAIL" }, gc.tol);
        print!("{table}");
        Ok(if pass { ExitCode::Ok } else { ExitCode::GradCheck })
    }

    fn kkt_check(&self, snapshot: &Path, p: Option<f64>) -> CmdResult {
        let grid = &self.setup.grid;
        let p = match p.or_else(|| p_from_snapshot(snapshot)) {
            Some(p) => p,
            None => return Err(Error::Config("cannot infer p from the snapshot name; pass --p".into()).into()),
        };
        let xi = read_scalar_on(snapshot, grid)?;
        if xi.values.iter().any(|v| !(0.0..=self.setup.coeffs.box_m).contains(v)) {
            return Err(Error::Config("snapshot leaves the box [0, M]".into()).into());
        }
        let model = self.model_on(grid)?;
        let (data, _) = self.data(&model)?;
        let problem = ReducedProblem::new(&model, &data, self.setup.params.with_p(p))?;
        let eval = problem.evaluate(&xi)?;
        let report = kkt_check(&problem, &eval, &self.cfg.kkt_options())?;
        write_json(&self.out.join(format!("kkt_check_p{}.json", fmt_p(p))), &report)?;
        print!("{}", format_kkt(&report));
        Ok(if report.passed() { ExitCode::Ok } else { ExitCode::Kkt })
    }
}

/// Lumped relative `L^2` distance `||a - b|| / ||b||`.
pub fn relative_l2_error(grid: &Grid, a: &ScalarField, b: &ScalarField) -> f64 {
    let w = crate::grid::volume_node_weights(grid);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..w.len() {
        num += w[j] * (a.values[j] - b.values[j]).powi(2);
        den += w[j] * b.values[j].powi(2);
    }
    (num / den).sqrt()
}

pub fn format_kkt(r: &KktReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "p                    {}", r.p);
    let _ = writeln!(s, "emission_residual    {:.3e}", r.emission_residual);
    let _ = writeln!(s, "excitation_residual  {:.3e}", r.excitation_residual);
    let _ = writeln!(s, "residual_tol         {:.3e}", r.residual_tol);
    let _ = writeln!(s, "projected_gradient   {:.3e}", r.projected_gradient_norm);
    let _ = writeln!(s, "min_slack            {:.3e}", r.min_slack);
    let _ = writeln!(s, "min_scaled_slack     {:.3e}", r.min_scaled_slack);
    let _ = writeln!(s, "total_variation      {:.6}", r.total_variation);
    let _ = writeln!(s, "c_p                  {:.6e}", r.c_p);
    let _ = writeln!(s, "sample               slack         scale");
    for x in &r.samples {
        let _ = writeln!(s, "{:<20} {:<12.4e}  {:.4e}", x.label, x.slack, x.scale);
    }
    let _ = writeln!(s, "{}", if r.passed() { "PASS" } else { "FAIL" });
    s
}
