//! Linear solvers for the assembled block operators: restarted GMRES with
//! block-Jacobi preconditioning and a banded LU factorisation.
//!
//! The banded factorisation does not pivot. The operators assembled here
//! have a positive definite symmetric part (coercive Robin forms), for
//! which elimination without pivoting is well defined.

use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::sparse::{dot, norm, BlockCsr};
use crate::coefficients::{block_apply, block_transpose, Block2};
use crate::error::{Error, Result};
use crate::grid::Vec2Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Iterative,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub method: SolveMethod,
    /// Seconds spent in the solve (factorisation time excluded).
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    /// Direct below [`SolverConfig::direct_limit`] unknowns, GMRES above.
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
    pub method: MethodChoice,
    pub direct_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iters: 5000,
            restart: 60,
            method: MethodChoice::Auto,
            direct_limit: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-4) {
            return Err(Error::Parameter {
                name: "solver.tol",
                value: self.tol,
                reason: "must lie in (0, 1e-4]",
            });
        }
        if self.restart == 0 || self.max_iters == 0 {
            return Err(Error::Config("solver.restart and solver.max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// LU factors of a banded matrix stored row-wise with half-bandwidth `bw`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandLu {
    pub fn factor(op: &BlockCsr) -> Result<Self> {
        let n = op.num_unknowns();
        let bw = 2 * op.node_bandwidth() + 1;
        let width = 2 * bw + 1;
        let mut data = vec![0.0; n * width];
        for row in 0..op.num_nodes() {
            for (col, b) in op.row(row) {
                for r in 0..2 {
                    for c in 0..2 {
                        let (i, j) = (2 * row + r, 2 * col + c);
                        data[i * width + (j + bw - i)] = b[r][c];
                    }
                }
            }
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let piv = data[k * width + bw];
            if !(piv.abs() > 1e-14 * scale) {
                return Err(Error::Solver {
                    message: format!("zero pivot at unknown {k}"),
                    report: LinearSolveReport {
                        iterations: 0,
                        relative_residual: f64::NAN,
                        method: SolveMethod::Direct,
                        wall_time: 0.0,
                    },
                });
            }
            let end = (k + bw).min(n - 1);
            let (head, tail) = data.split_at_mut((k + 1) * width);
            let pivot_row = &head[k * width..];
            for i in k + 1..=end {
                let row = &mut tail[(i - k - 1) * width..(i - k) * width];
                let lk = k + bw - i;
                let l = row[lk] / piv;
                row[lk] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=end {
                    row[j + bw - i] -= l * pivot_row[j + bw - k];
                }
            }
        }
        Ok(BandLu { n, bw, data })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (2 * self.bw + 1) + (j + self.bw - i)]
    }

    pub fn solve(&self, rhs: &[f64], transpose: bool) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut x = rhs.to_vec();
        if !transpose {
            for i in 0..n {
                let mut s = x[i];
                for j in i.saturating_sub(bw)..i {
                    s -= self.at(i, j) * x[j];
                }
                x[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[i];
                for j in i + 1..=(i + bw).min(n - 1) {
                    s -= self.at(i, j) * x[j];
                }
                x[i] = s / self.at(i, i);
            }
        } else {
            // U^T z = b, then L^T x = z
            for i in 0..n {
                let mut s = x[i];
                for k in i.saturating_sub(bw)..i {
                    s -= self.at(k, i) * x[k];
                }
                x[i] = s / self.at(i, i);
            }
            for i in (0..n).rev() {
                let mut s = x[i];
                for k in i + 1..=(i + bw).min(n - 1) {
                    s -= self.at(k, i) * x[k];
                }
                x[i] = s;
            }
        }
        x
    }
}

/// Inverses of the 2x2 diagonal blocks.
struct BlockJacobi {
    inv: Vec<Block2>,
}

impl BlockJacobi {
    fn new(op: &BlockCsr, transpose: bool) -> Result<Self> {
        let inv = (0..op.num_nodes())
            .map(|i| {
                let mut b = op.diagonal_block(i);
                if transpose {
                    b = block_transpose(&b);
                }
                let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
                if det == 0.0 || !det.is_finite() {
                    return Err(Error::arg(format!("singular diagonal block at node {i}")));
                }
                Ok([[b[1][1] / det, -b[0][1] / det], [-b[1][0] / det, b[0][0] / det]])
            })
            .collect::<Result<_>>()?;
        Ok(BlockJacobi { inv })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, b) in self.inv.iter().enumerate() {
            let v = block_apply(b, [x[2 * i], x[2 * i + 1]]);
            y[2 * i] = v[0];
            y[2 * i + 1] = v[1];
        }
        y
    }
}

/// Right-preconditioned restarted GMRES. Returns the iterate, the number of
/// inner iterations and the final relative residual.
fn gmres(
    op: &BlockCsr,
    rhs: &[f64],
    transpose: bool,
    config: &SolverConfig,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = rhs.len();
    let precond = BlockJacobi::new(op, transpose)?;
    let apply = |v: &[f64]| {
        let z = precond.apply(v);
        let mut out = vec![0.0; n];
        op.apply_into(&z, &mut out, transpose);
        out
    };
    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    let mut iters = 0;
    let m = config.restart.min(n.max(1));
    let mut rel;
    while iters < config.max_iters {
        let mut ax = vec![0.0; n];
        op.apply_into(&x, &mut ax, transpose);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= config.tol {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            iters += 1;
            let mut w = apply(&basis[k]);
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(&w, vj);
                hess[j][k] = hjk;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hjk * vi);
            }
            let hnext = norm(&w);
            hess[k + 1][k] = hnext;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= config.tol || hnext == 0.0 || iters >= config.max_iters {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut dz = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            dz.iter_mut().zip(&basis[j]).for_each(|(d, v)| *d += yj * v);
        }
        let dx = precond.apply(&dz);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        if k_used == 0 {
            break;
        }
    }
    let mut ax = vec![0.0; n];
    op.apply_into(&x, &mut ax, transpose);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    Ok((x, iters, norm(&r) / bnorm))
}

/// An assembled operator together with its (lazily built) factorisation,
/// reusable for any number of forward and transposed solves.
pub struct LinearSystem {
    op: BlockCsr,
    config: SolverConfig,
    lu: OnceLock<std::result::Result<BandLu, String>>,
}

impl LinearSystem {
    pub fn new(op: BlockCsr, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(LinearSystem {
            op,
            config,
            lu: OnceLock::new(),
        })
    }

    pub fn operator(&self) -> &BlockCsr {
        &self.op
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn prefers_direct(&self) -> bool {
        match self.config.method {
            MethodChoice::Direct => true,
            MethodChoice::Iterative => false,
            MethodChoice::Auto => self.op.num_unknowns() <= self.config.direct_limit,
        }
    }

    fn factors(&self) -> Result<&BandLu> {
        self.lu
            .get_or_init(|| BandLu::factor(&self.op).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|message| Error::Solver {
                message: message.clone(),
                report: LinearSolveReport {
                    iterations: 0,
                    relative_residual: f64::NAN,
                    method: SolveMethod::Direct,
                    wall_time: 0.0,
                },
            })
    }

    fn residual(&self, x: &[f64], rhs: &[f64], transpose: bool) -> Vec<f64> {
        let mut ax = vec![0.0; rhs.len()];
        self.op.apply_into(x, &mut ax, transpose);
        rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    }

    fn solve_direct(&self, rhs: &[f64], transpose: bool) -> Result<(Vec<f64>, usize, f64)> {
        let lu = self.factors()?;
        let bnorm = norm(rhs);
        let mut x = lu.solve(rhs, transpose);
        let mut r = self.residual(&x, rhs, transpose);
        let mut rel = norm(&r) / bnorm;
        let mut steps = 1;
        // iterative refinement
        while rel > 0.1 * self.config.tol && steps < 4 {
            let dx = lu.solve(&r, transpose);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            r = self.residual(&x, rhs, transpose);
            let next = norm(&r) / bnorm;
            steps += 1;
            if next >= rel {
                rel = next;
                break;
            }
            rel = next;
        }
        Ok((x, steps, rel))
    }

    /// Solves `Op x = rhs` (or `Op^T x = rhs`) to the configured relative
    /// residual.
    pub fn solve(&self, rhs: &[f64], transpose: bool) -> Result<(Vec<f64>, LinearSolveReport)> {
        let start = Instant::now();
        let n = self.op.num_unknowns();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} entries, operator {}",
                rhs.len(),
                n
            )));
        }
        let report = |iterations, relative_residual, method| LinearSolveReport {
            iterations,
            relative_residual,
            method,
            wall_time: start.elapsed().as_secs_f64(),
        };
        if norm(rhs) == 0.0 {
            return Ok((vec![0.0; n], report(0, 0.0, SolveMethod::Direct)));
        }
        let (x, iters, rel, method) = if self.prefers_direct() {
            let (x, it, rel) = self.solve_direct(rhs, transpose)?;
            (x, it, rel, SolveMethod::Direct)
        } else {
            let (x, it, rel) = gmres(&self.op, rhs, transpose, &self.config)?;
            if rel <= self.config.tol {
                (x, it, rel, SolveMethod::Iterative)
            } else {
                log::warn!("gmres stagnated at relative residual {rel:e} after {it} iterations; falling back to LU");
                let (x, it2, rel) = self.solve_direct(rhs, transpose)?;
                (x, it + it2, rel, SolveMethod::Direct)
            }
        };
        let rep = report(iters, rel, method);
        if !(rel <= self.config.tol) {
            return Err(Error::Solver {
                message: format!("relative residual {rel:e} above tolerance {:e}", self.config.tol),
                report: rep,
            });
        }
        Ok((x, rep))
    }
}

/// One-shot solve returning a nodal field.
pub fn solve_linear(
    op: &BlockCsr,
    rhs: &[f64],
    tol: f64,
    transpose: bool,
) -> Result<(Vec2Field, LinearSolveReport)> {
    let config = SolverConfig {
        tol,
        ..SolverConfig::default()
    };
    let system = LinearSystem::new(op.clone(), config)?;
    let (x, report) = system.solve(rhs, transpose)?;
    Ok((Vec2Field::from_flat(&x), report))
}
