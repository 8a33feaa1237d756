//! Adjoint states, tangent-linear solves and the reduced gradient of
//! `xi -> E_p(v(xi), xi)`, plus first-order optimality diagnostics.
//!
//! The discrete state equations are `A(xi) u = b` and `A(xi) v = E(xi) u`.
//! Multipliers solve the transposed systems
//!
//! ```text
//! A^T psi = nu_load,   A^T phi = E^T psi,
//! ```
//!
//! so the adjoint gradient is the exact derivative of the discrete
//! functional.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::Block2Field;
use crate::error::{Error, Result};
use crate::functionals::{
    energy_terms, nu_measure, tikhonov_gradient, total_variation, BoundaryMeasure, EnergyParams, EnergyTerms,
    MeasurementData,
};
use crate::grid::{volume_node_weights, CellQuadrature, Grid, MatrixField, ScalarField, Vec2Field};
use crate::robin::{
    assemble_terms, dot, nodal_pairings, norm, BlockCsr, ForwardModel, ForwardOperators, ForwardState,
    LinearSolveReport,
};

/// Multipliers `phi_i` (excitation) and `psi_i` (emission).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub phi: Vec<Vec2Field>,
    pub psi: Vec<Vec2Field>,
    pub reports: Vec<[LinearSolveReport; 2]>,
}

/// `A(xi)^T psi = load`, the load being the nodal form of `nu_i`.
pub fn solve_adjoint_emission(
    grid: &Grid,
    ops: &ForwardOperators,
    nu: &BoundaryMeasure,
    i: usize,
) -> Result<(Vec2Field, LinearSolveReport)> {
    if i >= nu.num_components() {
        return Err(Error::arg(format!("measure has no component {i}")));
    }
    let (psi, rep) = ops.system.solve(&nu.load(grid, i), true)?;
    Ok((Vec2Field::from_flat(&psi), rep))
}

/// `A(xi)^T phi = E(xi)^T psi`.
pub fn solve_adjoint_excitation(ops: &ForwardOperators, psi: &Vec2Field) -> Result<(Vec2Field, LinearSolveReport)> {
    let rhs = ops.emission.apply_transpose(&psi.to_flat());
    let (phi, rep) = ops.system.solve(&rhs, true)?;
    Ok((Vec2Field::from_flat(&phi), rep))
}

pub fn solve_adjoints(grid: &Grid, ops: &ForwardOperators, nu: &BoundaryMeasure) -> Result<AdjointState> {
    let results: Vec<_> = (0..nu.num_components())
        .into_par_iter()
        .map(|i| -> Result<_> {
            let wrap = |e: Error| Error::SourceSolve {
                index: i,
                source: Box::new(e),
            };
            let (psi, rp) = solve_adjoint_emission(grid, ops, nu, i).map_err(wrap)?;
            let (phi, rf) = solve_adjoint_excitation(ops, &psi).map_err(wrap)?;
            Ok((phi, psi, [rp, rf]))
        })
        .collect();
    let mut out = AdjointState {
        phi: Vec::new(),
        psi: Vec::new(),
        reports: Vec::new(),
    };
    for r in results {
        let (phi, psi, reps) = r?;
        out.phi.push(phi);
        out.psi.push(psi);
        out.reports.push(reps);
    }
    Ok(out)
}

/// `dA[eta]`: diffusion `r_dot eta I`, reaction `eta I`, no boundary term.
fn d_system(grid: &Grid, ops: &ForwardOperators, eta: &ScalarField) -> Result<BlockCsr> {
    let n = grid.dim();
    let mut b = MatrixField::zeros(grid);
    for j in 0..grid.num_nodes() {
        let s = ops.r_dot.values[j] * eta.values[j];
        for k in 0..n {
            b.set(j, k, k, s);
        }
    }
    let l = Block2Field::scaled_identity(grid, 1.0).scaled_by(eta);
    assemble_terms(grid, Some(&b), Some(&l), None)
}

/// Directional derivatives `(z_i, w_i)` of the maps `xi -> (u_i, v_i)`
/// along `eta`.
pub fn tangent_linear(
    model: &ForwardModel,
    ops: &ForwardOperators,
    state: &ForwardState,
    eta: &ScalarField,
) -> Result<Vec<(Vec2Field, Vec2Field)>> {
    let grid = &model.grid;
    eta.check(grid, "eta")?;
    let da = d_system(grid, ops, eta)?;
    let de = assemble_terms(grid, None, Some(&model.coeffs.h.blocks().scaled_by(eta)), None)?;
    (0..state.num_sources())
        .into_par_iter()
        .map(|i| {
            let u = state.u[i].to_flat();
            let v = state.v[i].to_flat();
            let rhs_z: Vec<f64> = da.apply(&u).iter().map(|x| -x).collect();
            let (z, _) = ops.system.solve(&rhs_z, false)?;
            let (dav, deu, ez) = (da.apply(&v), de.apply(&u), ops.emission.apply(&z));
            let rhs_w: Vec<f64> = (0..u.len()).map(|k| -dav[k] + deu[k] + ez[k]).collect();
            let (w, _) = ops.system.solve(&rhs_w, false)?;
            Ok((Vec2Field::from_flat(&z), Vec2Field::from_flat(&w)))
        })
        .collect()
}

/// Misfit part of the reduced gradient, nodal (Euclidean) representation:
/// `J'(xi) eta = sum_j grad_j eta_j`.
pub fn misfit_gradient(
    model: &ForwardModel,
    ops: &ForwardOperators,
    state: &ForwardState,
    adjoint: &AdjointState,
) -> Result<ScalarField> {
    let grid = &model.grid;
    if adjoint.phi.len() != state.num_sources() {
        return Err(Error::DimensionMismatch(format!(
            "{} adjoint pairs for {} sources",
            adjoint.phi.len(),
            state.num_sources()
        )));
    }
    let per_source: Vec<Vec<f64>> = (0..state.num_sources())
        .into_par_iter()
        .map(|i| {
            let (u, v) = (state.u[i].to_flat(), state.v[i].to_flat());
            let (phi, psi) = (adjoint.phi[i].to_flat(), adjoint.psi[i].to_flat());
            let (g_uphi, o_uphi) = nodal_pairings(grid, &u, &phi);
            let (g_vpsi, o_vpsi) = nodal_pairings(grid, &v, &psi);
            let (_, o_upsi) = nodal_pairings(grid, &u, &psi);
            (0..grid.num_nodes())
                .map(|j| {
                    let h = model.coeffs.h.block(j);
                    let emission: f64 = (0..2)
                        .flat_map(|c| (0..2).map(move |d| (c, d)))
                        .map(|(c, d)| h[c][d] * o_upsi[j][d][c])
                        .sum();
                    let trace = |o: &[[f64; 2]; 2]| o[0][0] + o[1][1];
                    emission
                        - ops.r_dot.values[j] * (g_uphi[j] + g_vpsi[j])
                        - trace(&o_uphi[j])
                        - trace(&o_vpsi[j])
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; grid.num_nodes()];
    for g in &per_source {
        out.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok(ScalarField::new(out))
}

/// Full reduced gradient: misfit part plus the Tikhonov derivative.
pub fn reduced_gradient(
    model: &ForwardModel,
    ops: &ForwardOperators,
    state: &ForwardState,
    adjoint: &AdjointState,
    xi: &ScalarField,
    params: &EnergyParams,
) -> Result<ScalarField> {
    let mut g = misfit_gradient(model, ops, state, adjoint)?;
    let t = tikhonov_gradient(&model.grid, xi, params)?;
    g.values.iter_mut().zip(&t.values).for_each(|(a, b)| *a += b);
    Ok(g)
}

/// The functional `J_p(xi) = E_p(v(xi), xi)` over a fixed model and data.
#[derive(Debug, Clone, Copy)]
pub struct ReducedProblem<'a> {
    pub model: &'a ForwardModel,
    pub data: &'a MeasurementData,
    pub params: EnergyParams,
}

/// State at one `xi`, enough to evaluate `J_p` and (later) its gradient.
pub struct Linearization {
    pub xi: ScalarField,
    pub ops: ForwardOperators,
    pub state: ForwardState,
    pub terms: EnergyTerms,
}

impl Linearization {
    pub fn value(&self) -> f64 {
        self.terms.total()
    }
}

/// Linearisation plus multipliers and gradient.
pub struct Evaluation {
    pub lin: Linearization,
    pub nu: BoundaryMeasure,
    pub adjoint: AdjointState,
    pub misfit_gradient: ScalarField,
    pub tikhonov_gradient: ScalarField,
    pub gradient: ScalarField,
}

impl<'a> ReducedProblem<'a> {
    pub fn new(model: &'a ForwardModel, data: &'a MeasurementData, params: EnergyParams) -> Result<Self> {
        params.validate()?;
        if params.p.is_infinite() {
            return Err(Error::Parameter {
                name: "p",
                value: params.p,
                reason: "the reduced functional needs a finite exponent",
            });
        }
        if data.num_sources() != model.num_sources() {
            return Err(Error::DimensionMismatch(format!(
                "{} data sets for {} sources",
                data.num_sources(),
                model.num_sources()
            )));
        }
        if data.sets != model.measurements {
            return Err(Error::arg("data and model use different measurement sets"));
        }
        Ok(ReducedProblem { model, data, params })
    }

    pub fn linearize(&self, xi: &ScalarField) -> Result<Linearization> {
        let (ops, state) = self.model.evaluate(xi)?;
        let terms = energy_terms(&self.model.grid, &state.traces, xi, self.data, &self.params)?;
        Ok(Linearization {
            xi: xi.clone(),
            ops,
            state,
            terms,
        })
    }

    pub fn value(&self, xi: &ScalarField) -> Result<f64> {
        Ok(self.linearize(xi)?.value())
    }

    /// `E_inf` of the state at `lin`.
    pub fn energy_inf(&self, lin: &Linearization) -> Result<EnergyTerms> {
        energy_terms(
            &self.model.grid,
            &lin.state.traces,
            &lin.xi,
            self.data,
            &self.params.with_p(f64::INFINITY),
        )
    }

    pub fn complete(&self, lin: Linearization) -> Result<Evaluation> {
        let grid = &self.model.grid;
        let nu = nu_measure(&lin.state.traces, self.data, self.params.p)?;
        let adjoint = solve_adjoints(grid, &lin.ops, &nu)?;
        let mg = misfit_gradient(self.model, &lin.ops, &lin.state, &adjoint)?;
        let tg = tikhonov_gradient(grid, &lin.xi, &self.params)?;
        let gradient = ScalarField::new(mg.values.iter().zip(&tg.values).map(|(a, b)| a + b).collect());
        Ok(Evaluation {
            lin,
            nu,
            adjoint,
            misfit_gradient: mg,
            tikhonov_gradient: tg,
            gradient,
        })
    }

    pub fn evaluate(&self, xi: &ScalarField) -> Result<Evaluation> {
        self.complete(self.linearize(xi)?)
    }
}

/// Discrete `W^{1,q}` norm of a collection of `R^2` fields (Frobenius
/// over fields and components), by cell quadrature.
pub fn sobolev_norm(grid: &Grid, fields: &[Vec2Field], q: f64) -> f64 {
    let quad = CellQuadrature::new(grid);
    let (dim, npc) = (grid.dim(), grid.nodes_per_cell());
    let mut total = 0.0;
    for origin in grid.cell_origins() {
        let nodes = grid.cell_nodes(&origin);
        for p in 0..quad.num_points() {
            let (mut val2, mut grad2) = (0.0, 0.0);
            for f in fields {
                for comp in 0..2 {
                    let mut v = 0.0;
                    let mut g = [0.0; 3];
                    for a in 0..npc {
                        let x = f.values[nodes[a]][comp];
                        v += quad.basis[p][a] * x;
                        for k in 0..dim {
                            g[k] += quad.grads[p][a][k] * x;
                        }
                    }
                    val2 += v * v;
                    grad2 += g.iter().map(|x| x * x).sum::<f64>();
                }
            }
            total += quad.weights[p] * (val2.powf(q / 2.0) + grad2.powf(q / 2.0));
        }
    }
    total.powf(1.0 / q)
}

/// Sampling and tolerance options of [`kkt_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktOptions {
    pub random_samples: usize,
    pub test_fields: usize,
    pub seed: u64,
    pub g_tol: f64,
    pub step0: f64,
    /// Weight the Tikhonov derivative by `m / p`, the normalisation under
    /// which the misfit derivative carries a factor `p`.
    pub scaled_prefactors: bool,
}

impl Default for KktOptions {
    fn default() -> Self {
        KktOptions {
            random_samples: 10,
            test_fields: 20,
            seed: 0,
            g_tol: 1e-4,
            step0: 1.0,
            scaled_prefactors: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackSample {
    pub label: String,
    pub slack: f64,
    /// `||eta - xi|| + step0 (||g|| + ||d||)` in the lumped `L^2` metric.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub p: f64,
    /// Emission multiplier identity residual (relative, max over tests).
    pub emission_residual: f64,
    /// Excitation multiplier identity residual (relative, max over tests).
    pub excitation_residual: f64,
    pub min_slack: f64,
    /// Smallest `slack / scale` over the samples.
    pub min_scaled_slack: f64,
    pub projected_gradient_norm: f64,
    pub c_p: f64,
    pub total_variation: f64,
    pub samples: Vec<SlackSample>,
    pub residual_tol: f64,
    pub g_tol: f64,
}

impl KktReport {
    pub fn residuals_ok(&self) -> bool {
        self.emission_residual <= self.residual_tol && self.excitation_residual <= self.residual_tol
    }

    pub fn slack_ok(&self) -> bool {
        self.samples.iter().all(|s| s.slack >= -self.g_tol * s.scale)
    }

    pub fn passed(&self) -> bool {
        self.residuals_ok() && self.slack_ok()
    }
}

fn weighted_norm(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| b * a * a).sum::<f64>().sqrt()
}

/// Projected-gradient stationarity in the lumped `L^2` metric:
/// `||xi - P(xi - t g_R)||_w / t`, where `g_R = g / w` is the Riesz
/// representative of the nodal gradient.
pub fn projected_gradient_norm(xi: &ScalarField, gradient: &ScalarField, weights: &[f64], box_m: f64, t: f64) -> f64 {
    let d: Vec<f64> = xi
        .values
        .iter()
        .zip(&gradient.values)
        .zip(weights)
        .map(|((x, g), w)| x - (x - t * g / w).clamp(0.0, box_m))
        .collect();
    weighted_norm(&d, weights) / t
}

/// First-order optimality diagnostics at `eval`: multiplier identities
/// against random test fields, the variational inequality over sampled
/// `eta`, and the multiplier size `C_p`.
pub fn kkt_check(problem: &ReducedProblem, eval: &Evaluation, options: &KktOptions) -> Result<KktReport> {
    let model = problem.model;
    let grid = &model.grid;
    let params = &problem.params;
    let lin = &eval.lin;
    let xi = &lin.xi;
    let op = lin.ops.system.operator();
    let tol = model.solver.tol;
    let n_src = model.num_sources();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let random_field = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..2 * grid.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect()
    };

    let loads: Vec<Vec<f64>> = (0..n_src).map(|i| eval.nu.load(grid, i)).collect();
    let psi: Vec<Vec<f64>> = eval.adjoint.psi.iter().map(Vec2Field::to_flat).collect();
    let phi: Vec<Vec<f64>> = eval.adjoint.phi.iter().map(Vec2Field::to_flat).collect();
    let et_psi: Vec<Vec<f64>> = psi.iter().map(|p| lin.ops.emission.apply_transpose(p)).collect();
    let relative = |num: f64, den: f64| if den > 0.0 { num.abs() / den } else { num.abs() };
    let (mut em_res, mut ex_res) = (0.0f64, 0.0f64);
    for _ in 0..options.test_fields {
        let (mut num_e, mut den_e, mut num_x, mut den_x) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n_src {
            let w = random_field(&mut rng);
            let aw = op.apply(&w);
            num_e += dot(&w, &loads[i]) - dot(&psi[i], &aw);
            den_e += norm(&w) * norm(&loads[i]);
            let z = random_field(&mut rng);
            let az = op.apply(&z);
            num_x += dot(&phi[i], &az) - dot(&et_psi[i], &z);
            den_x += norm(&z) * norm(&et_psi[i]);
        }
        em_res = em_res.max(relative(num_e, den_e));
        ex_res = ex_res.max(relative(num_x, den_x));
    }

    let tik_weight = if options.scaled_prefactors { params.m / params.p } else { 1.0 };
    let g = ScalarField::new(
        eval.misfit_gradient
            .values
            .iter()
            .zip(&eval.tikhonov_gradient.values)
            .map(|(a, b)| a + tik_weight * b)
            .collect(),
    );
    let w = volume_node_weights(grid);
    let t = options.step0;
    let g_riesz: Vec<f64> = g.values.iter().zip(&w).map(|(a, b)| a / b).collect();
    let pg = projected_gradient_norm(xi, &g, &w, params.box_m, t);
    let g_norm = weighted_norm(&g_riesz, &w);

    let box_m = params.box_m;
    let mut etas: Vec<(String, ScalarField)> = vec![
        ("xi".into(), xi.clone()),
        ("zero".into(), ScalarField::zeros(grid)),
        ("upper".into(), ScalarField::constant(grid, box_m)),
        (
            "projected_step".into(),
            ScalarField::new(
                xi.values.iter().zip(&g_riesz).map(|(x, gr)| (x - t * gr).clamp(0.0, box_m)).collect(),
            ),
        ),
    ];
    for k in 0..options.random_samples {
        etas.push((
            format!("random{k}"),
            ScalarField::new((0..grid.num_nodes()).map(|_| rng.random_range(0.0..=box_m)).collect()),
        ));
    }
    let samples: Vec<SlackSample> = etas
        .into_iter()
        .map(|(label, eta)| {
            let diff: Vec<f64> = eta.values.iter().zip(&xi.values).map(|(a, b)| a - b).collect();
            SlackSample {
                label,
                slack: dot(&g.values, &diff),
                scale: weighted_norm(&diff, &w) + t * (g_norm + pg),
            }
        })
        .collect();
    let min_slack = samples.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
    let min_scaled_slack = samples
        .iter()
        .filter(|s| s.scale > 0.0)
        .map(|s| s.slack / s.scale)
        .fold(f64::INFINITY, f64::min);

    let m = params.m;
    let c_p = sobolev_norm(grid, &eval.adjoint.phi, m / (m - 2.0).max(f64::MIN_POSITIVE))
        + sobolev_norm(grid, &eval.adjoint.psi, 1.0);
    Ok(KktReport {
        p: params.p,
        emission_residual: em_res,
        excitation_residual: ex_res,
        min_slack,
        min_scaled_slack,
        projected_gradient_norm: pg,
        c_p,
        total_variation: total_variation(&eval.nu),
        samples,
        residual_tol: 10.0 * tol,
        g_tol: options.g_tol,
    })
}

/// Options of [`gradient_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckOptions {
    pub nodes: usize,
    pub directions: usize,
    pub eps: Vec<f64>,
    pub seed: u64,
    /// Flip the sign of the adjoint gradient (negative control).
    pub corrupt: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            nodes: 5,
            directions: 3,
            eps: vec![1e-5],
            seed: 0,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub label: String,
    pub eps: f64,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    /// Largest discrepancy per entry of `options.eps`.
    pub max_by_eps: Vec<(f64, f64)>,
    /// Relative gap between the tangent-linear and adjoint pairings of the
    /// misfit derivative, max over directions.
    pub tangent_adjoint_gap: f64,
}

impl GradCheckReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.max_by_eps.iter().map(|(_, d)| *d).fold(0.0, f64::max)
    }

    /// Discrepancy at the best step in the sweep.
    pub fn best_discrepancy(&self) -> f64 {
        self.max_by_eps.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min)
    }
}

/// Compares adjoint derivatives with central differences at random nodes
/// and along random directions. `xi` must keep a distance of at least
/// `max(eps)` from the box faces.
pub fn gradient_check(problem: &ReducedProblem, xi: &ScalarField, options: &GradCheckOptions) -> Result<GradCheckReport> {
    let grid = &problem.model.grid;
    let margin = options.eps.iter().copied().fold(0.0, f64::max);
    if xi.values.iter().any(|&v| v < margin || v > problem.params.box_m - margin) {
        return Err(Error::arg("xi is too close to the box faces for central differences"));
    }
    let eval = problem.evaluate(xi)?;
    let mut gradient = eval.gradient.clone();
    if options.corrupt {
        gradient.values.iter_mut().for_each(|g| *g = -*g);
    }
    let g_inf = gradient.max_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut dirs: Vec<(String, ScalarField)> = Vec::new();
    for _ in 0..options.nodes {
        let j = rng.random_range(0..grid.num_nodes());
        let mut e = ScalarField::zeros(grid);
        e.values[j] = 1.0;
        dirs.push((format!("node {j}"), e));
    }
    for k in 0..options.directions {
        let eta = ScalarField::new((0..grid.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect());
        dirs.push((format!("direction {k}"), eta));
    }
    let mut entries = Vec::new();
    let mut max_by_eps = Vec::new();
    for &eps in &options.eps {
        let mut worst = 0.0f64;
        for (label, eta) in &dirs {
            let shifted = |s: f64| {
                ScalarField::new(xi.values.iter().zip(&eta.values).map(|(x, e)| x + s * e).collect())
            };
            let fd = (problem.value(&shifted(eps))? - problem.value(&shifted(-eps))?) / (2.0 * eps);
            let ad = dot(&gradient.values, &eta.values);
            let l1: f64 = eta.values.iter().map(|v| v.abs()).sum();
            let floor = 1e-4 * g_inf * l1.min(1.0).max(l1 / grid.num_nodes() as f64);
            let discrepancy = (fd - ad).abs() / fd.abs().max(ad.abs()).max(floor).max(f64::MIN_POSITIVE);
            worst = worst.max(discrepancy);
            entries.push(GradCheckEntry {
                label: label.clone(),
                eps,
                adjoint: ad,
                finite_difference: fd,
                discrepancy,
            });
        }
        max_by_eps.push((eps, worst));
    }
    let mut gap = 0.0f64;
    for (_, eta) in dirs.iter().skip(options.nodes) {
        let tangents = tangent_linear(problem.model, &eval.lin.ops, &eval.lin.state, eta)?;
        let traces: Vec<Vec<[f64; 2]>> = tangents
            .iter()
            .zip(&eval.nu.nodes)
            .map(|((_, w), nodes)| nodes.iter().map(|&n| w.values[n]).collect())
            .collect();
        let via_tangent = eval.nu.pair(&traces);
        let via_adjoint = dot(&eval.misfit_gradient.values, &eta.values);
        let scale = via_tangent.abs().max(via_adjoint.abs());
        if scale > 0.0 {
            gap = gap.max((via_tangent - via_adjoint).abs() / scale);
        }
    }
    Ok(GradCheckReport {
        entries,
        max_by_eps,
        tangent_adjoint_gap: gap,
    })
}
