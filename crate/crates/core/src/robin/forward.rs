//! Two-stage forward solve: excitation `u_i`, then emission `v_i` driven by
//! `xi H u_i`, for every source `i`.

use rayon::prelude::*;

use super::assembly::{assemble_rhs, assemble_system, assemble_terms};
use super::linsolve::{LinearSolveReport, LinearSystem, SolverConfig};
use super::sparse::BlockCsr;
use crate::coefficients::{assemble_a_xi, assemble_k_xi, r_dot_field, ProblemCoefficients};
use crate::error::{Error, Result};
use crate::grid::{BoundarySet, Grid, ScalarField, Vec2Field};

/// Nodal values of a field restricted to the nodes of a boundary set
/// (sorted node order, as in [`BoundarySet::nodes`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub nodes: Vec<usize>,
    pub values: Vec<[f64; 2]>,
}

impl Trace {
    pub fn extract(grid: &Grid, field: &Vec2Field, set: &BoundarySet) -> Self {
        let nodes = set.nodes(grid);
        let values = nodes.iter().map(|&n| field.values[n]).collect();
        Trace { nodes, values }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v[0].hypot(v[1])))
    }
}

/// Excitation data of one source: interior `S` and boundary `s` on `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerm {
    pub interior: Vec2Field,
    pub boundary: Vec2Field,
    pub support: BoundarySet,
}

impl SourceTerm {
    pub fn is_zero(&self) -> bool {
        self.interior.values.iter().chain(&self.boundary.values).all(|v| v[0] == 0.0 && v[1] == 0.0)
    }
}

/// The `xi`-dependent operators: `A(xi)` (factorised on demand) and the
/// emission source operator `E(xi)` with `<E u, w> = \int xi (H u).w`.
pub struct ForwardOperators {
    pub system: LinearSystem,
    pub emission: BlockCsr,
    /// `d r / d t (x, xi(x))` at every node.
    pub r_dot: ScalarField,
}

impl ForwardOperators {
    pub fn new(grid: &Grid, coeffs: &ProblemCoefficients, xi: &ScalarField, solver: SolverConfig) -> Result<Self> {
        xi.check(grid, "xi")?;
        let a_xi = assemble_a_xi(&coeffs.diffusion, xi, coeffs.box_m)?;
        let k_xi = assemble_k_xi(&coeffs.k, xi)?;
        let op = assemble_system(grid, &a_xi, &k_xi, coeffs.gamma, &BoundarySet::all(grid))?;
        let emission = assemble_terms(grid, None, Some(&coeffs.h.blocks().scaled_by(xi)), None)?;
        Ok(ForwardOperators {
            system: LinearSystem::new(op, solver)?,
            emission,
            r_dot: r_dot_field(&coeffs.diffusion, xi)?,
        })
    }
}

/// States of all sources at one `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardState {
    pub u: Vec<Vec2Field>,
    pub v: Vec<Vec2Field>,
    /// `v_i` restricted to the measurement set of source `i`.
    pub traces: Vec<Trace>,
    pub reports: Vec<[LinearSolveReport; 2]>,
}

impl ForwardState {
    pub fn num_sources(&self) -> usize {
        self.u.len()
    }
}

fn log_solve(index: usize, report: &LinearSolveReport) {
    log::debug!(
        "solve: i={index} iters={} res={:e}",
        report.iterations,
        report.relative_residual
    );
}

/// Excitation field for one source.
pub fn solve_excitation(
    grid: &Grid,
    coeffs: &ProblemCoefficients,
    xi: &ScalarField,
    source: &SourceTerm,
    solver: SolverConfig,
) -> Result<(Vec2Field, LinearSolveReport)> {
    let ops = ForwardOperators::new(grid, coeffs, xi, solver)?;
    let rhs = assemble_rhs(grid, &source.interior, None, &source.boundary, &source.support)?;
    let (u, rep) = ops.system.solve(&rhs, false)?;
    Ok((Vec2Field::from_flat(&u), rep))
}

/// Emission field driven by the excitation `u`, with homogeneous Robin data.
pub fn solve_emission(
    grid: &Grid,
    coeffs: &ProblemCoefficients,
    xi: &ScalarField,
    u: &Vec2Field,
    solver: SolverConfig,
) -> Result<(Vec2Field, LinearSolveReport)> {
    u.check(grid, "u")?;
    let ops = ForwardOperators::new(grid, coeffs, xi, solver)?;
    let (v, rep) = ops.system.solve(&ops.emission.apply(&u.to_flat()), false)?;
    Ok((Vec2Field::from_flat(&v), rep))
}

/// Everything fixed across parameter updates: grid, coefficients, source
/// loads and measurement sets.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub grid: Grid,
    pub coeffs: ProblemCoefficients,
    pub sources: Vec<SourceTerm>,
    pub measurements: Vec<BoundarySet>,
    pub solver: SolverConfig,
    loads: Vec<Vec<f64>>,
}

impl ForwardModel {
    pub fn new(
        grid: Grid,
        coeffs: ProblemCoefficients,
        sources: Vec<SourceTerm>,
        measurements: Vec<BoundarySet>,
        solver: SolverConfig,
    ) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::arg("at least one source is required"));
        }
        if sources.len() != measurements.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sources but {} measurement sets",
                sources.len(),
                measurements.len()
            )));
        }
        if measurements.iter().any(BoundarySet::is_empty) {
            return Err(Error::arg("measurement sets must be non-empty"));
        }
        solver.validate()?;
        let loads = sources
            .iter()
            .map(|s| assemble_rhs(&grid, &s.interior, None, &s.boundary, &s.support))
            .collect::<Result<_>>()?;
        Ok(ForwardModel {
            grid,
            coeffs,
            sources,
            measurements,
            solver,
            loads,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn operators(&self, xi: &ScalarField) -> Result<ForwardOperators> {
        ForwardOperators::new(&self.grid, &self.coeffs, xi, self.solver)
    }

    /// Solves all sources with already assembled operators.
    pub fn solve_with(&self, ops: &ForwardOperators) -> Result<ForwardState> {
        let results: Vec<_> = (0..self.num_sources())
            .into_par_iter()
            .map(|i| -> Result<_> {
                let wrap = |e: Error| Error::SourceSolve {
                    index: i,
                    source: Box::new(e),
                };
                let (u, ru) = ops.system.solve(&self.loads[i], false).map_err(wrap)?;
                log_solve(i, &ru);
                let (v, rv) = ops.system.solve(&ops.emission.apply(&u), false).map_err(wrap)?;
                log_solve(i, &rv);
                Ok((Vec2Field::from_flat(&u), Vec2Field::from_flat(&v), [ru, rv]))
            })
            .collect();
        let mut state = ForwardState {
            u: Vec::new(),
            v: Vec::new(),
            traces: Vec::new(),
            reports: Vec::new(),
        };
        for (i, r) in results.into_iter().enumerate() {
            let (u, v, reps) = r?;
            state.traces.push(Trace::extract(&self.grid, &v, &self.measurements[i]));
            state.u.push(u);
            state.v.push(v);
            state.reports.push(reps);
        }
        Ok(state)
    }

    /// Assembles the operators at `xi` and solves every source.
    pub fn evaluate(&self, xi: &ScalarField) -> Result<(ForwardOperators, ForwardState)> {
        let ops = self.operators(xi)?;
        let state = self.solve_with(&ops)?;
        Ok((ops, state))
    }

    pub fn forward(&self, xi: &ScalarField) -> Result<ForwardState> {
        self.evaluate(xi).map(|(_, s)| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Block2Field;
    use crate::grid::MatrixField;
    use crate::robin::sparse::norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coeffs(g: &Grid, k_im: f64) -> ProblemCoefficients {
        ProblemCoefficients::uniform(g, 0.05, 0.3, 1.0, (0.4, k_im), (0.8, 0.3), 0.5, 2.0, 0.2).unwrap()
    }

    fn gaussian_source(g: &Grid, c: [f64; 2]) -> SourceTerm {
        SourceTerm {
            interior: Vec2Field::from_fn(g, |x| {
                let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                let e = (-r2 / 0.02).exp();
                [e, 0.5 * e]
            }),
            boundary: Vec2Field::zeros(g),
            support: BoundarySet::all(g),
        }
    }

    fn random_xi(g: &Grid, rng: &mut ChaCha8Rng, m: f64) -> ScalarField {
        ScalarField::new((0..g.num_nodes()).map(|_| rng.random_range(0.0..m)).collect())
    }

    #[test]
    fn constant_data_gives_constant_state() {
        let g = Grid::unit_square(9).unwrap();
        let co = coeffs(&g, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xi = random_xi(&g, &mut rng, 2.0);
        let c = [0.7, -0.4];
        let k = assemble_k_xi(&co.k, &xi).unwrap();
        let src = SourceTerm {
            interior: Vec2Field::new(k.values.iter().map(|b| crate::coefficients::block_apply(b, c)).collect()),
            boundary: Vec2Field::constant(&g, [co.gamma * c[0], co.gamma * c[1]]),
            support: BoundarySet::all(&g),
        };
        let (u, rep) = solve_excitation(&g, &co, &xi, &src, SolverConfig::default()).unwrap();
        assert!(rep.relative_residual <= 1e-10);
        for v in &u.values {
            assert!((v[0] - c[0]).abs() < 1e-9 && (v[1] - c[1]).abs() < 1e-9, "{v:?}");
        }
    }

    #[test]
    fn zero_data_and_zero_fluorophore() {
        let g = Grid::unit_square(9).unwrap();
        let co = coeffs(&g, 0.7);
        let zero_src = SourceTerm {
            interior: Vec2Field::zeros(&g),
            boundary: Vec2Field::zeros(&g),
            support: BoundarySet::all(&g),
        };
        let xi = ScalarField::constant(&g, 1.0);
        let (u, _) = solve_excitation(&g, &co, &xi, &zero_src, SolverConfig::default()).unwrap();
        assert_eq!(u.max_norm(), 0.0);
        let (v, _) = solve_emission(&g, &co, &xi, &u, SolverConfig::default()).unwrap();
        assert_eq!(v.max_norm(), 0.0);
        let src = gaussian_source(&g, [0.3, 0.6]);
        let xi0 = ScalarField::zeros(&g);
        let (u, _) = solve_excitation(&g, &co, &xi0, &src, SolverConfig::default()).unwrap();
        assert!(u.max_norm() > 1e-3);
        let (v, _) = solve_emission(&g, &co, &xi0, &u, SolverConfig::default()).unwrap();
        assert!(v.max_norm() <= 1e-12);
    }

    #[test]
    fn galerkin_residual_and_transpose_solves() {
        let g = Grid::unit_square(17).unwrap();
        let co = coeffs(&g, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xi = random_xi(&g, &mut rng, 2.0);
        for config in [
            SolverConfig::default(),
            SolverConfig {
                method: crate::robin::MethodChoice::Iterative,
                ..SolverConfig::default()
            },
        ] {
            let ops = ForwardOperators::new(&g, &co, &xi, config).unwrap();
            let rhs: Vec<f64> = (0..2 * g.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            for transpose in [false, true] {
                let (x, rep) = ops.system.solve(&rhs, transpose).unwrap();
                let mut ax = vec![0.0; rhs.len()];
                ops.system.operator().apply_into(&x, &mut ax, transpose);
                let r: Vec<f64> = ax.iter().zip(&rhs).map(|(a, b)| a - b).collect();
                assert!(norm(&r) <= 10.0 * 1e-10 * norm(&rhs), "{rep:?}");
            }
        }
    }

    #[test]
    fn iterative_and_direct_agree() {
        let g = Grid::unit_square(13).unwrap();
        let co = coeffs(&g, 0.9);
        let xi = ScalarField::from_fn(&g, |x| 2.0 * x[0] * x[1]);
        let rhs: Vec<f64> = (0..2 * g.num_nodes()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let mut sols = Vec::new();
        for method in [crate::robin::MethodChoice::Direct, crate::robin::MethodChoice::Iterative] {
            let ops = ForwardOperators::new(&g, &co, &xi, SolverConfig { method, ..SolverConfig::default() }).unwrap();
            sols.push(ops.system.solve(&rhs, true).unwrap());
        }
        assert_eq!(sols[0].1.method, crate::robin::SolveMethod::Direct);
        assert_eq!(sols[1].1.method, crate::robin::SolveMethod::Iterative);
        let diff: Vec<f64> = sols[0].0.iter().zip(&sols[1].0).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-8 * norm(&sols[0].0));
    }

    #[test]
    fn symmetric_reaction_transpose_equals_forward() {
        let g = Grid::unit_square(9).unwrap();
        let co = coeffs(&g, 0.0);
        let h = ProblemCoefficients { h: crate::coefficients::ComplexCoeff::constant(&g, 1.0, 0.0), ..co };
        let xi = ScalarField::from_fn(&g, |x| x[0]);
        let ops = ForwardOperators::new(&g, &h, &xi, SolverConfig::default()).unwrap();
        let rhs: Vec<f64> = (0..2 * g.num_nodes()).map(|i| (i as f64 * 0.3).sin()).collect();
        let (a, _) = ops.system.solve(&rhs, false).unwrap();
        let (b, _) = ops.system.solve(&rhs, true).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn emission_bounded_by_fluorophore_and_excitation() {
        let g = Grid::unit_square(9).unwrap();
        let co = coeffs(&g, 0.5);
        let src = gaussian_source(&g, [0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ratios = Vec::new();
        for _ in 0..20 {
            let xi = random_xi(&g, &mut rng, 2.0);
            let (u, _) = solve_excitation(&g, &co, &xi, &src, SolverConfig::default()).unwrap();
            let (v, _) = solve_emission(&g, &co, &xi, &u, SolverConfig::default()).unwrap();
            ratios.push(norm(&v.to_flat()) / (xi.max_abs() * norm(&u.to_flat())));
        }
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi.is_finite() && hi < 10.0 * lo.max(1e-3), "{lo} {hi}");
        // scaling xi grows v continuously
        let xi = ScalarField::from_fn(&g, |x| x[0]);
        let mut prev = 0.0;
        for s in [0.25, 0.5, 1.0, 2.0] {
            let xs = ScalarField::new(xi.values.iter().map(|v| v * s).collect());
            let (u, _) = solve_excitation(&g, &co, &xs, &src, SolverConfig::default()).unwrap();
            let (v, _) = solve_emission(&g, &co, &xs, &u, SolverConfig::default()).unwrap();
            let n = norm(&v.to_flat());
            assert!(n > prev);
            prev = n;
        }
    }

    #[test]
    fn model_determinism_and_permutation() {
        let g = Grid::unit_square(9).unwrap();
        let co = coeffs(&g, 0.5);
        let (s1, s2) = (gaussian_source(&g, [0.2, 0.5]), gaussian_source(&g, [0.8, 0.4]));
        let all = BoundarySet::all(&g);
        let xi = ScalarField::from_fn(&g, |x| x[0] * x[1]);
        let same = ForwardModel::new(g.clone(), co.clone(), vec![s1.clone(), s1.clone()], vec![all.clone(), all.clone()], SolverConfig::default())
            .unwrap()
            .forward(&xi)
            .unwrap();
        assert_eq!(same.u[0], same.u[1]);
        assert_eq!(same.v[0], same.v[1]);
        let fwd = ForwardModel::new(g.clone(), co.clone(), vec![s1.clone(), s2.clone()], vec![all.clone(), all.clone()], SolverConfig::default())
            .unwrap()
            .forward(&xi)
            .unwrap();
        let rev = ForwardModel::new(g.clone(), co, vec![s2, s1], vec![all.clone(), all], SolverConfig::default())
            .unwrap()
            .forward(&xi)
            .unwrap();
        assert_eq!(fwd.v[0], rev.v[1]);
        assert_eq!(fwd.v[1], rev.v[0]);
        assert_eq!(fwd.traces[0].nodes.len(), 32);
    }

    #[test]
    fn rejects_box_violation() {
        let g = Grid::unit_square(5).unwrap();
        let co = coeffs(&g, 0.5);
        let xi = ScalarField::constant(&g, 3.0);
        assert!(ForwardOperators::new(&g, &co, &xi, SolverConfig::default()).is_err());
        let _ = (MatrixField::zeros(&g), Block2Field::scaled_identity(&g, 1.0));
    }
}
