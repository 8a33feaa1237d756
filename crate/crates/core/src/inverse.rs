//! Box-constrained reconstruction: projected gradient on `J_p` and the
//! continuation over increasing `p`.
//!
//! The descent metric is the lumped `L^2` inner product
//! `<a, b>_w = sum_j w_j a_j b_j`, in which the nodal gradient `g` has the
//! Riesz representative `g / w`. Projection onto `[0, M]` is nodewise
//! clamping, which is also the `w`-orthogonal projection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::{kkt_check, projected_gradient_norm, Evaluation, KktOptions, KktReport, ReducedProblem};
use crate::error::{Error, Result};
use crate::functionals::{EnergyParams, MeasurementData};
use crate::grid::{volume_node_weights, ScalarField};
use crate::robin::ForwardModel;

/// Nodewise clamp to `[0, box_m]`.
pub fn project_box(xi: &ScalarField, box_m: f64) -> Result<ScalarField> {
    if !(box_m > 0.0) {
        return Err(Error::Parameter {
            name: "M",
            value: box_m,
            reason: "must be positive",
        });
    }
    Ok(ScalarField::new(xi.values.iter().map(|v| v.clamp(0.0, box_m)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Stop when the projected-gradient norm drops to this value.
    pub g_tol: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Step used for the stationarity measure and the first trial step.
    pub step0: f64,
    /// Use Barzilai-Borwein trial steps after the first iteration.
    pub bb_steps: bool,
    pub step_max: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            g_tol: 1e-4,
            max_iters: 200,
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            step0: 1.0,
            bb_steps: true,
            step_max: 1e6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 5] = [
            ("optimizer.g_tol", self.g_tol, self.g_tol > 0.0),
            ("optimizer.c1", self.c1, self.c1 > 0.0 && self.c1 < 1.0),
            ("optimizer.backtrack", self.backtrack, self.backtrack > 0.0 && self.backtrack < 1.0),
            ("optimizer.step0", self.step0, self.step0 > 0.0 && self.step0.is_finite()),
            ("optimizer.step_max", self.step_max, self.step_max >= self.step0),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(Error::Parameter {
                    name,
                    value,
                    reason: "out of range",
                });
            }
        }
        if self.max_backtracks == 0 {
            return Err(Error::Config("optimizer.max_backtracks must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    LineSearchExhausted,
}

/// One row of the optimisation trace (iteration 0 is the start point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub p: f64,
    pub iter: usize,
    pub energy_p: f64,
    pub energy_inf: f64,
    pub misfit: Vec<f64>,
    pub misfit_inf: Vec<f64>,
    pub tikhonov: f64,
    pub projected_gradient_norm: f64,
    /// Accepted step length (0 at the start point).
    pub step: f64,
    pub backtracks: usize,
}

pub struct StageResult {
    pub p: f64,
    pub status: Termination,
    /// Accepted iterations.
    pub iterations: usize,
    pub records: Vec<IterRecord>,
    pub eval: Evaluation,
}

impl StageResult {
    pub fn xi(&self) -> &ScalarField {
        &self.eval.lin.xi
    }
}

fn record(problem: &ReducedProblem, eval: &Evaluation, iter: usize, pg: f64, step: f64, backtracks: usize) -> Result<IterRecord> {
    let inf = problem.energy_inf(&eval.lin)?;
    let terms = &eval.lin.terms;
    Ok(IterRecord {
        p: problem.params.p,
        iter,
        energy_p: terms.total(),
        energy_inf: inf.total(),
        misfit: terms.misfit.clone(),
        misfit_inf: inf.misfit,
        tikhonov: terms.tikhonov,
        projected_gradient_norm: pg,
        step,
        backtracks,
    })
}

/// Projected gradient descent with Armijo backtracking on `J_p`.
///
/// Accepted steps satisfy `J(xi+) <= J(xi) - c1 ||xi+ - xi||_w^2 / t` and
/// strictly decrease `J`. Running out of backtracks ends the stage with the
/// last accepted iterate rather than failing.
pub fn minimize_ep(problem: &ReducedProblem, xi0: &ScalarField, opt: &OptimizerConfig) -> Result<StageResult> {
    opt.validate()?;
    let grid = &problem.model.grid;
    let box_m = problem.params.box_m;
    xi0.check(grid, "xi0")?;
    if xi0.values.iter().any(|v| !(0.0..=box_m).contains(v)) {
        return Err(Error::arg("initial xi must lie in [0, M]"));
    }
    let w = volume_node_weights(grid);
    let riesz = |g: &ScalarField| -> Vec<f64> { g.values.iter().zip(&w).map(|(a, b)| a / b).collect() };
    let wdot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&w).map(|((x, y), z)| x * y * z).sum() };

    let mut eval = problem.evaluate(xi0)?;
    let mut pg = projected_gradient_norm(&eval.lin.xi, &eval.gradient, &w, box_m, opt.step0);
    let mut records = vec![record(problem, &eval, 0, pg, 0.0, 0)?];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let status = loop {
        if pg <= opt.g_tol {
            break Termination::Converged;
        }
        if iterations >= opt.max_iters {
            break Termination::MaxIters;
        }
        let g_r = riesz(&eval.gradient);
        let mut t = match (&prev, opt.bb_steps) {
            (Some((s, y)), true) => {
                let sy = wdot(s, y);
                if sy > 0.0 {
                    (wdot(s, s) / sy).min(opt.step_max)
                } else {
                    opt.step0
                }
            }
            _ => opt.step0,
        };
        let j0 = eval.lin.value();
        let mut accepted = None;
        for bt in 0..opt.max_backtracks {
            let trial = ScalarField::new(
                eval.lin.xi.values.iter().zip(&g_r).map(|(x, g)| (x - t * g).clamp(0.0, box_m)).collect(),
            );
            let d: Vec<f64> = trial.values.iter().zip(&eval.lin.xi.values).map(|(a, b)| a - b).collect();
            let d2 = wdot(&d, &d);
            if d2 == 0.0 {
                break;
            }
            let lin = problem.linearize(&trial)?;
            let j = lin.value();
            if j < j0 && j <= j0 - opt.c1 * d2 / t {
                accepted = Some((lin, t, bt));
                break;
            }
            t *= opt.backtrack;
        }
        let Some((lin, t, bt)) = accepted else {
            break Termination::LineSearchExhausted;
        };
        let next = problem.complete(lin)?;
        let s: Vec<f64> = next.lin.xi.values.iter().zip(&eval.lin.xi.values).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = riesz(&next.gradient).iter().zip(&g_r).map(|(a, b)| a - b).collect();
        prev = Some((s, y));
        eval = next;
        iterations += 1;
        pg = projected_gradient_norm(&eval.lin.xi, &eval.gradient, &w, box_m, opt.step0);
        records.push(record(problem, &eval, iterations, pg, t, bt)?);
        log::debug!(
            "p={} iter={iterations} J={:.12e} pg={pg:.3e} step={t:.3e}",
            problem.params.p,
            eval.lin.value()
        );
    };
    Ok(StageResult {
        p: problem.params.p,
        status,
        iterations,
        records,
        eval,
    })
}

/// Per-stage summary of a continuation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub p: f64,
    pub status: Option<Termination>,
    pub iterations: usize,
    pub energy_p: f64,
    pub energy_inf: f64,
    pub misfit_inf: f64,
    pub tikhonov: f64,
    pub projected_gradient_norm: f64,
    pub total_variation: f64,
    pub c_p: f64,
    pub kkt: Option<KktReport>,
    /// Error message when the stage failed.
    pub error: Option<String>,
}

impl StageSummary {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

pub struct StageOutcome {
    pub summary: StageSummary,
    pub records: Vec<IterRecord>,
    /// Final iterate of a successful stage.
    pub xi: Option<ScalarField>,
}

pub struct ContinuationResult {
    pub schedule: Vec<f64>,
    pub stages: Vec<StageOutcome>,
    /// Last successful iterate (the start point if no stage succeeded).
    pub xi: ScalarField,
}

impl ContinuationResult {
    pub fn any_succeeded(&self) -> bool {
        self.stages.iter().any(|s| s.summary.succeeded())
    }
}

/// Validates a `p` schedule: non-empty, strictly increasing, entries >= 2.
pub fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Config("energy.schedule must not be empty".into()));
    }
    if let Some(&p) = schedule.iter().find(|&&p| !(p >= 2.0 && p.is_finite())) {
        return Err(Error::Parameter {
            name: "energy.schedule",
            value: p,
            reason: "entries must be finite and at least 2",
        });
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("energy.schedule must be strictly increasing".into()));
    }
    Ok(())
}

/// Runs [`minimize_ep`] for each `p` in `schedule`, warm-starting from the
/// previous stage. Failed stages are recorded and skipped.
pub fn p_continuation(
    model: &ForwardModel,
    data: &MeasurementData,
    base: &EnergyParams,
    schedule: &[f64],
    xi0: &ScalarField,
    opt: &OptimizerConfig,
    kkt: &KktOptions,
) -> Result<ContinuationResult> {
    check_schedule(schedule)?;
    for warning in base.with_p(schedule[0]).warnings(model.grid.dim()) {
        log::warn!("{warning}");
    }
    let mut xi = xi0.clone();
    let mut stages = Vec::with_capacity(schedule.len());
    for &p in schedule {
        let problem = ReducedProblem::new(model, data, base.with_p(p))?;
        let outcome = match minimize_ep(&problem, &xi, opt).and_then(|stage| {
            let options = KktOptions {
                g_tol: opt.g_tol,
                step0: opt.step0,
                ..*kkt
            };
            let report = kkt_check(&problem, &stage.eval, &options)?;
            Ok((stage, report))
        }) {
            Ok((stage, report)) => {
                let last = stage.records.last().expect("start point is recorded");
                let summary = StageSummary {
                    p,
                    status: Some(stage.status),
                    iterations: stage.iterations,
                    energy_p: last.energy_p,
                    energy_inf: last.energy_inf,
                    misfit_inf: last.misfit_inf.iter().sum(),
                    tikhonov: last.tikhonov,
                    projected_gradient_norm: last.projected_gradient_norm,
                    total_variation: report.total_variation,
                    c_p: report.c_p,
                    kkt: Some(report),
                    error: None,
                };
                xi = stage.xi().clone();
                StageOutcome {
                    summary,
                    records: stage.records,
                    xi: Some(xi.clone()),
                }
            }
            Err(e) => {
                log::warn!("stage p={p} failed: {e}");
                StageOutcome {
                    summary: StageSummary {
                        p,
                        status: None,
                        iterations: 0,
                        energy_p: f64::NAN,
                        energy_inf: f64::NAN,
                        misfit_inf: f64::NAN,
                        tikhonov: f64::NAN,
                        projected_gradient_norm: f64::NAN,
                        total_variation: f64::NAN,
                        c_p: f64::NAN,
                        kkt: None,
                        error: Some(e.to_string()),
                    },
                    records: Vec::new(),
                    xi: None,
                }
            }
        };
        stages.push(outcome);
    }
    Ok(ContinuationResult {
        schedule: schedule.to_vec(),
        stages,
        xi,
    })
}

/// Outcome of restarting the final stage from several random points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartReport {
    pub p: f64,
    pub energies: Vec<f64>,
    /// Largest pairwise relative `L^2` distance between the minimisers.
    pub max_relative_distance: f64,
    pub energy_spread: f64,
}

/// Minimises `J_p` from `reference` and from `starts` random fields in
/// `[0, M]` and reports how far the resulting stationary points disagree.
pub fn multi_start(
    problem: &ReducedProblem,
    reference: &ScalarField,
    starts: usize,
    seed: u64,
    opt: &OptimizerConfig,
) -> Result<MultiStartReport> {
    let grid = &problem.model.grid;
    let w = volume_node_weights(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut points = vec![minimize_ep(problem, reference, opt)?];
    for _ in 0..starts {
        let x0 = ScalarField::new((0..grid.num_nodes()).map(|_| rng.random_range(0.0..=problem.params.box_m)).collect());
        points.push(minimize_ep(problem, &x0, opt)?);
    }
    let norm = |a: &ScalarField, b: Option<&ScalarField>| -> f64 {
        a.values
            .iter()
            .enumerate()
            .map(|(j, v)| w[j] * (v - b.map_or(0.0, |b| b.values[j])).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut dist = 0.0f64;
    for a in &points {
        for b in &points {
            let scale = norm(a.xi(), None).max(norm(b.xi(), None));
            if scale > 0.0 {
                dist = dist.max(norm(a.xi(), Some(b.xi())) / scale);
            }
        }
    }
    let energies: Vec<f64> = points.iter().map(|s| s.eval.lin.value()).collect();
    let spread = energies.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - energies.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(MultiStartReport {
        p: problem.params.p,
        energies,
        max_relative_distance: dist,
        energy_spread: spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ProblemCoefficients;
    use crate::grid::{BoundarySet, Grid, Vec2Field};
    use crate::robin::{SolverConfig, SourceTerm};

    fn model(n: usize) -> ForwardModel {
        let g = Grid::unit_square(n).unwrap();
        let co = ProblemCoefficients::uniform(&g, 0.05, 0.3, 1.0, (0.3, 0.2), (1.0, 0.3), 0.5, 2.0, 0.2).unwrap();
        let srcs = ["x0_min", "x0_max"]
            .iter()
            .map(|s| SourceTerm {
                interior: Vec2Field::zeros(&g),
                boundary: Vec2Field::constant(&g, [1.0, 0.0]),
                support: BoundarySet::select(&g, s).unwrap(),
            })
            .collect();
        ForwardModel::new(g.clone(), co, srcs, vec![BoundarySet::all(&g); 2], SolverConfig::default()).unwrap()
    }

    fn params(p: f64) -> EnergyParams {
        EnergyParams {
            p,
            m: 5.0,
            alpha: 1e-3,
            box_m: 2.0,
        }
    }

    fn data_for(m: &ForwardModel, xi: &ScalarField) -> MeasurementData {
        let s = m.forward(xi).unwrap();
        MeasurementData::new(&m.grid, m.measurements.clone(), s.traces, 0.0).unwrap()
    }

    #[test]
    fn projection_examples() {
        let g = Grid::unit_square(4).unwrap();
        let inside = ScalarField::from_fn(&g, |x| x[0] + x[1]);
        assert_eq!(project_box(&inside, 2.0).unwrap(), inside);
        assert_eq!(project_box(&ScalarField::constant(&g, -1.0), 2.0).unwrap(), ScalarField::zeros(&g));
        assert_eq!(project_box(&ScalarField::constant(&g, 4.0), 2.0).unwrap(), ScalarField::constant(&g, 2.0));
        assert!(project_box(&inside, 0.0).is_err());
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let m = model(9);
        let zero = ScalarField::zeros(&m.grid);
        let data = data_for(&m, &zero);
        let problem = ReducedProblem::new(&m, &data, params(4.0)).unwrap();
        let stage = minimize_ep(&problem, &zero, &OptimizerConfig::default()).unwrap();
        assert_eq!(stage.status, Termination::Converged);
        assert_eq!(stage.iterations, 0);
        let e = stage.records[0].energy_p;
        assert!((e - (2.0 / 4.0 + 1e-3 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn descent_is_monotone_and_feasible() {
        let m = model(9);
        let truth = ScalarField::from_fn(&m.grid, |x| 1.5 * (-((x[0] - 0.4).powi(2) + (x[1] - 0.6).powi(2)) / 0.05).exp());
        let data = data_for(&m, &truth);
        let problem = ReducedProblem::new(&m, &data, params(8.0)).unwrap();
        let opt = OptimizerConfig {
            max_iters: 25,
            ..OptimizerConfig::default()
        };
        let stage = minimize_ep(&problem, &ScalarField::constant(&m.grid, 0.5), &opt).unwrap();
        assert!(stage.iterations > 0);
        for w in stage.records.windows(2) {
            assert!(w[1].energy_p < w[0].energy_p);
        }
        assert!(stage.xi().values.iter().all(|v| (0.0..=2.0).contains(v)));
    }

    #[test]
    fn zero_iterations_evaluate_the_start() {
        let m = model(9);
        let data = data_for(&m, &ScalarField::constant(&m.grid, 1.0));
        let problem = ReducedProblem::new(&m, &data, params(4.0)).unwrap();
        let x0 = ScalarField::constant(&m.grid, 0.5);
        let opt = OptimizerConfig {
            max_iters: 0,
            ..OptimizerConfig::default()
        };
        let stage = minimize_ep(&problem, &x0, &opt).unwrap();
        assert_eq!(stage.status, Termination::MaxIters);
        assert_eq!(stage.xi(), &x0);
        assert_eq!(stage.records.len(), 1);
        assert_eq!(stage.records[0].energy_p, problem.value(&x0).unwrap());
    }

    #[test]
    fn single_stage_continuation_matches_minimize() {
        let m = model(9);
        let data = data_for(&m, &ScalarField::constant(&m.grid, 1.0));
        let x0 = ScalarField::constant(&m.grid, 0.5);
        let opt = OptimizerConfig {
            max_iters: 5,
            ..OptimizerConfig::default()
        };
        let cont = p_continuation(&m, &data, &params(4.0), &[4.0], &x0, &opt, &KktOptions::default()).unwrap();
        let direct = minimize_ep(&ReducedProblem::new(&m, &data, params(4.0)).unwrap(), &x0, &opt).unwrap();
        assert_eq!(&cont.xi, direct.xi());
        assert_eq!(cont.stages[0].records, direct.records);
    }

    #[test]
    fn schedule_validation() {
        assert!(check_schedule(&[]).is_err());
        assert!(check_schedule(&[4.0, 4.0]).is_err());
        assert!(check_schedule(&[1.5, 4.0]).is_err());
        assert!(check_schedule(&[4.0, 8.0, 16.0]).is_ok());
    }

    #[test]
    fn multi_start_reports_disagreement() {
        let m = model(7);
        let data = data_for(&m, &ScalarField::constant(&m.grid, 1.0));
        let problem = ReducedProblem::new(&m, &data, params(4.0)).unwrap();
        let opt = OptimizerConfig {
            max_iters: 10,
            ..OptimizerConfig::default()
        };
        let rep = multi_start(&problem, &ScalarField::constant(&m.grid, 0.5), 2, 1, &opt).unwrap();
        assert_eq!(rep.energies.len(), 3);
        assert!(rep.max_relative_distance.is_finite() && rep.energy_spread >= 0.0);
    }
}
