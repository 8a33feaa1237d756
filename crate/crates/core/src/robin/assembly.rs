//! Q1 Galerkin assembly of the Robin forms
//!
//! ```text
//! B[u, w] = \int_Omega B:(Du^T Dw) + (L u).w  +  \int_dOmega gamma u.w
//! l(w)    = \int_Omega f.w + F:Dw             +  \int_Gamma g.w
//! ```
//!
//! Nodal coefficients are interpolated with the Q1 basis; the two-point
//! Gauss rules then integrate every product exactly.

use super::sparse::BlockCsr;
use crate::coefficients::{block_apply, symmetric_eigen_bounds, Block2, Block2Field};
use crate::error::{Error, Result};
use crate::grid::{BoundarySet, CellQuadrature, FaceQuadrature, Grid, MatrixField, Vec2Field, MAX_DIM};

/// Nodal `2 x n` field (one gradient-like row per component), the `F` in
/// `f - div F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub values: Vec<[[f64; MAX_DIM]; 2]>,
}

impl FluxField {
    pub fn zeros(grid: &Grid) -> Self {
        FluxField {
            values: vec![[[0.0; MAX_DIM]; 2]; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl FnMut(&[f64]) -> [[f64; MAX_DIM]; 2]) -> Self {
        FluxField {
            values: grid.sample(f),
        }
    }
}

/// Cells containing `node`, with the node's local index in each.
pub(crate) fn adjacent_cells(grid: &Grid, node: usize) -> impl Iterator<Item = ([usize; MAX_DIM], usize)> + '_ {
    let idx = grid.multi_index(node);
    let dim = grid.dim();
    (0..1usize << dim).filter_map(move |a| {
        let mut origin = [0; MAX_DIM];
        for k in 0..dim {
            let off = (a >> k) & 1;
            if idx[k] < off || idx[k] - off >= grid.counts()[k] - 1 {
                return None;
            }
            origin[k] = idx[k] - off;
        }
        Some((origin, a))
    })
}

fn check_len(len: usize, grid: &Grid, what: &str) -> Result<()> {
    if len != grid.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{what} has {len} nodes, grid has {}",
            grid.num_nodes()
        )));
    }
    Ok(())
}

/// Assembles any combination of the diffusion, reaction and Robin terms
/// without checking coefficient signs. Used for derivative operators,
/// whose coefficients need not be positive.
pub fn assemble_terms(
    grid: &Grid,
    diffusion: Option<&MatrixField>,
    reaction: Option<&Block2Field>,
    robin: Option<(f64, &BoundarySet)>,
) -> Result<BlockCsr> {
    if let Some(b) = diffusion {
        b.check(grid, "B")?;
    }
    if let Some(l) = reaction {
        check_len(l.values.len(), grid, "L")?;
    }
    let quad = CellQuadrature::new(grid);
    let dim = grid.dim();
    let npc = grid.nodes_per_cell();
    let mut op = BlockCsr::with_grid_pattern(grid);
    op.fill_rows(|row, cols, out| {
        out.iter_mut().for_each(|b| *b = [[0.0; 2]; 2]);
        for (origin, a) in adjacent_cells(grid, row) {
            let nodes = grid.cell_nodes(&origin);
            for q in 0..quad.num_points() {
                let w = quad.weights[q];
                let basis = &quad.basis[q];
                let mut bq = [[0.0; MAX_DIM]; MAX_DIM];
                if let Some(bf) = diffusion {
                    for c in 0..npc {
                        let m = bf.at(nodes[c]);
                        for k in 0..dim {
                            for l in 0..dim {
                                bq[k][l] += basis[c] * m[k * dim + l];
                            }
                        }
                    }
                }
                let mut lq = [[0.0; 2]; 2];
                if let Some(lf) = reaction {
                    for c in 0..npc {
                        let lb = &lf.values[nodes[c]];
                        for r in 0..2 {
                            for s in 0..2 {
                                lq[r][s] += basis[c] * lb[r][s];
                            }
                        }
                    }
                }
                let ga = &quad.grads[q][a];
                for b in 0..npc {
                    let pos = cols.binary_search(&nodes[b]).expect("cell neighbours are stored");
                    let gb = &quad.grads[q][b];
                    let mut stiff = 0.0;
                    if diffusion.is_some() {
                        for k in 0..dim {
                            for l in 0..dim {
                                stiff += bq[k][l] * gb[l] * ga[k];
                            }
                        }
                    }
                    let mass = basis[a] * basis[b];
                    let t = &mut out[pos];
                    t[0][0] += w * (stiff + mass * lq[0][0]);
                    t[0][1] += w * mass * lq[0][1];
                    t[1][0] += w * mass * lq[1][0];
                    t[1][1] += w * (stiff + mass * lq[1][1]);
                }
            }
        }
    });
    if let Some((gamma, set)) = robin {
        let fq = FaceQuadrature::new(dim);
        let nb = 1 << (dim - 1);
        for face in set.faces() {
            for a in 0..nb {
                for b in 0..nb {
                    let m: f64 = (0..fq.num_points())
                        .map(|q| fq.weights[q] * fq.basis[q][a] * fq.basis[q][b])
                        .sum();
                    let v = gamma * face.area * m;
                    let pos = op
                        .position(face.nodes[a], face.nodes[b])
                        .expect("face nodes share a cell");
                    op.add_at(pos, &[[v, 0.0], [0.0, v]]);
                }
            }
        }
    }
    Ok(op)
}

/// Operator of the form `B[u, w]` above.
///
/// `B` must be symmetric positive definite at every node, `gamma` positive
/// and `robin` must cover the whole boundary.
pub fn assemble_system(
    grid: &Grid,
    b: &MatrixField,
    l: &Block2Field,
    gamma: f64,
    robin: &BoundarySet,
) -> Result<BlockCsr> {
    b.check(grid, "B")?;
    let d = grid.dim();
    for node in 0..grid.num_nodes() {
        let m = b.at(node);
        for r in 0..d {
            for c in r + 1..d {
                let (x, y) = (m[r * d + c], m[c * d + r]);
                if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                    return Err(Error::Coefficient(format!("B is not symmetric at node {node}")));
                }
            }
        }
        let (lo, _) = symmetric_eigen_bounds(d, m);
        if !(lo > 0.0) {
            return Err(Error::Coefficient(format!(
                "B is not positive definite at node {node} (smallest eigenvalue {lo})"
            )));
        }
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter {
            name: "gamma",
            value: gamma,
            reason: "must be positive",
        });
    }
    if !robin.covers_boundary(grid) {
        return Err(Error::arg(format!(
            "Robin set `{}` does not cover the boundary",
            robin.selector()
        )));
    }
    assemble_terms(grid, Some(b), Some(l), Some((gamma, robin)))
}

/// Load vector of `l(w)` above in interleaved layout. Only the values of
/// `g` at nodes of `gamma_set` are read.
pub fn assemble_rhs(
    grid: &Grid,
    f: &Vec2Field,
    flux: Option<&FluxField>,
    g: &Vec2Field,
    gamma_set: &BoundarySet,
) -> Result<Vec<f64>> {
    f.check(grid, "f")?;
    g.check(grid, "g")?;
    if let Some(ff) = flux {
        check_len(ff.values.len(), grid, "F")?;
    }
    let quad = CellQuadrature::new(grid);
    let dim = grid.dim();
    let npc = grid.nodes_per_cell();
    let mut rhs = vec![0.0; 2 * grid.num_nodes()];
    for origin in grid.cell_origins() {
        let nodes = grid.cell_nodes(&origin);
        for q in 0..quad.num_points() {
            let w = quad.weights[q];
            let mut fq = [0.0; 2];
            let mut flux_q = [[0.0; MAX_DIM]; 2];
            for c in 0..npc {
                let n = quad.basis[q][c];
                let v = f.values[nodes[c]];
                fq[0] += n * v[0];
                fq[1] += n * v[1];
                if let Some(ff) = flux {
                    for (comp, row) in ff.values[nodes[c]].iter().enumerate() {
                        for k in 0..dim {
                            flux_q[comp][k] += n * row[k];
                        }
                    }
                }
            }
            for a in 0..npc {
                let n = quad.basis[q][a];
                let ga = &quad.grads[q][a];
                for comp in 0..2 {
                    let div: f64 = (0..dim).map(|k| flux_q[comp][k] * ga[k]).sum();
                    rhs[2 * nodes[a] + comp] += w * (fq[comp] * n + div);
                }
            }
        }
    }
    let fq = FaceQuadrature::new(dim);
    let nb = 1 << (dim - 1);
    for face in gamma_set.faces() {
        for q in 0..fq.num_points() {
            let w = face.area * fq.weights[q];
            let mut gq = [0.0; 2];
            for b in 0..nb {
                let v = g.values[face.nodes[b]];
                gq[0] += fq.basis[q][b] * v[0];
                gq[1] += fq.basis[q][b] * v[1];
            }
            for a in 0..nb {
                let n = fq.basis[q][a];
                rhs[2 * face.nodes[a]] += w * n * gq[0];
                rhs[2 * face.nodes[a] + 1] += w * n * gq[1];
            }
        }
    }
    Ok(rhs)
}

/// Nodal localisations of the bilinear pairings used by parameter
/// derivatives, for fields `x`, `y`:
///
/// * `grad[j]  = \int N_j Dx:Dy` (summed over both components),
/// * `outer[j][d][c] = \int N_j x_d y_c`.
pub fn nodal_pairings(grid: &Grid, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<Block2>) {
    use rayon::prelude::*;
    let quad = CellQuadrature::new(grid);
    let dim = grid.dim();
    let npc = grid.nodes_per_cell();
    (0..grid.num_nodes())
        .into_par_iter()
        .map(|j| {
            let mut grad = 0.0;
            let mut outer = [[0.0; 2]; 2];
            for (origin, a) in adjacent_cells(grid, j) {
                let nodes = grid.cell_nodes(&origin);
                for q in 0..quad.num_points() {
                    let w = quad.weights[q] * quad.basis[q][a];
                    let (mut xq, mut yq) = ([0.0; 2], [0.0; 2]);
                    let (mut dx, mut dy) = ([[0.0; MAX_DIM]; 2], [[0.0; MAX_DIM]; 2]);
                    for c in 0..npc {
                        let (n, g) = (quad.basis[q][c], &quad.grads[q][c]);
                        for comp in 0..2 {
                            let (xv, yv) = (x[2 * nodes[c] + comp], y[2 * nodes[c] + comp]);
                            xq[comp] += n * xv;
                            yq[comp] += n * yv;
                            for k in 0..dim {
                                dx[comp][k] += g[k] * xv;
                                dy[comp][k] += g[k] * yv;
                            }
                        }
                    }
                    for comp in 0..2 {
                        grad += w * (0..dim).map(|k| dx[comp][k] * dy[comp][k]).sum::<f64>();
                    }
                    for d in 0..2 {
                        for c in 0..2 {
                            outer[d][c] += w * xq[d] * yq[c];
                        }
                    }
                }
            }
            (grad, outer)
        })
        .unzip()
}

/// `(L u)` evaluated nodewise, for tests and diagnostics.
pub fn apply_nodal(l: &Block2Field, u: &Vec2Field) -> Vec2Field {
    Vec2Field::new(l.values.iter().zip(&u.values).map(|(b, &v)| block_apply(b, v)).collect())
}
