//! Tensor-product two-point Gauss rules on cells and boundary faces.
//!
//! Per axis the rule integrates cubics exactly, so it is exact for products
//! of up to three multi-linear factors (coefficient x trial x test).

use super::{BoundarySet, Grid, ScalarField, MAX_DIM};
use crate::error::{Error, Result};

const NPC: usize = 1 << MAX_DIM;

fn gauss_points() -> [f64; 2] {
    let d = 0.5 / 3f64.sqrt();
    [0.5 - d, 0.5 + d]
}

/// Reference-cell rule scaled to the physical cell size.
#[derive(Debug, Clone)]
pub struct CellQuadrature {
    pub dim: usize,
    /// Physical weight of each point (sums to the cell volume).
    pub weights: Vec<f64>,
    /// `basis[q][a]`: value of local basis function `a` at point `q`.
    pub basis: Vec<[f64; NPC]>,
    /// `grads[q][a][k]`: physical derivative of basis `a` along axis `k`.
    pub grads: Vec<[[f64; MAX_DIM]; NPC]>,
}

impl CellQuadrature {
    pub fn new(grid: &Grid) -> Self {
        let dim = grid.dim();
        let npc = grid.nodes_per_cell();
        let gp = gauss_points();
        let nq = 1 << dim;
        let w = grid.cell_volume() / nq as f64;
        let mut basis = vec![[0.0; NPC]; nq];
        let mut grads = vec![[[0.0; MAX_DIM]; NPC]; nq];
        for q in 0..nq {
            let t: Vec<f64> = (0..dim).map(|k| gp[(q >> k) & 1]).collect();
            for a in 0..npc {
                let factor = |k: usize| if (a >> k) & 1 == 1 { t[k] } else { 1.0 - t[k] };
                basis[q][a] = (0..dim).map(factor).product();
                for k in 0..dim {
                    let sign = if (a >> k) & 1 == 1 { 1.0 } else { -1.0 };
                    let rest: f64 = (0..dim).filter(|&j| j != k).map(factor).product();
                    grads[q][a][k] = sign * rest / grid.spacing()[k];
                }
            }
        }
        CellQuadrature {
            dim,
            weights: vec![w; nq],
            basis,
            grads,
        }
    }

    pub fn num_points(&self) -> usize {
        self.weights.len()
    }

    pub fn nodes_per_cell(&self) -> usize {
        1 << self.dim
    }
}

/// Rule on a boundary face (same for every face of a given orientation up
/// to the area, which is applied by the caller via `Face::area`).
#[derive(Debug, Clone)]
pub struct FaceQuadrature {
    /// Reference weights summing to one.
    pub weights: Vec<f64>,
    /// `basis[q][b]`: value of face basis `b` at point `q`.
    pub basis: Vec<[f64; NPC / 2]>,
}

impl FaceQuadrature {
    pub fn new(dim: usize) -> Self {
        let gp = gauss_points();
        let td = dim - 1;
        let nq = 1 << td;
        let mut basis = vec![[0.0; NPC / 2]; nq];
        for (q, row) in basis.iter_mut().enumerate() {
            for (b, value) in row.iter_mut().enumerate().take(1 << td) {
                *value = (0..td)
                    .map(|t| {
                        let s = gp[(q >> t) & 1];
                        if (b >> t) & 1 == 1 {
                            s
                        } else {
                            1.0 - s
                        }
                    })
                    .product();
            }
        }
        FaceQuadrature {
            weights: vec![1.0 / nq as f64; nq],
            basis,
        }
    }

    pub fn num_points(&self) -> usize {
        self.weights.len()
    }
}

/// Integral over the box of the multi-linear interpolant of `f`.
pub fn integrate_volume(grid: &Grid, f: &ScalarField) -> Result<f64> {
    f.check(grid, "integrand")?;
    let quad = CellQuadrature::new(grid);
    let npc = grid.nodes_per_cell();
    let mut total = 0.0;
    for origin in grid.cell_origins() {
        let nodes = grid.cell_nodes(&origin);
        for q in 0..quad.num_points() {
            let fq: f64 = (0..npc).map(|a| quad.basis[q][a] * f.values[nodes[a]]).sum();
            total += quad.weights[q] * fq;
        }
    }
    Ok(total)
}

/// Integral over the faces of `set` of the face interpolant of `g`. Only
/// the values of `g` at nodes of `set` are read.
pub fn integrate_surface(grid: &Grid, g: &ScalarField, set: &BoundarySet) -> Result<f64> {
    g.check(grid, "surface integrand")?;
    if set.is_empty() {
        return Err(Error::EmptySelection(set.selector().to_string()));
    }
    let quad = FaceQuadrature::new(grid.dim());
    let nb = 1 << (grid.dim() - 1);
    let mut total = 0.0;
    for face in set.faces() {
        for q in 0..quad.num_points() {
            let gq: f64 = (0..nb).map(|b| quad.basis[q][b] * g.values[face.nodes[b]]).sum();
            total += face.area * quad.weights[q] * gq;
        }
    }
    Ok(total)
}

/// `\int_Omega N_j` for every node `j`; for any nodal field `f`,
/// `sum_j w_j f_j == integrate_volume(f)`.
pub fn volume_node_weights(grid: &Grid) -> Vec<f64> {
    let quad = CellQuadrature::new(grid);
    let npc = grid.nodes_per_cell();
    let mut w = vec![0.0; grid.num_nodes()];
    for origin in grid.cell_origins() {
        let nodes = grid.cell_nodes(&origin);
        for q in 0..quad.num_points() {
            for a in 0..npc {
                w[nodes[a]] += quad.weights[q] * quad.basis[q][a];
            }
        }
    }
    w
}

/// Nodes of `set` with their weights `\int_set N_j dH^{n-1}`.
pub fn surface_node_weights(grid: &Grid, set: &BoundarySet) -> (Vec<usize>, Vec<f64>) {
    let nodes = set.nodes(grid);
    let quad = FaceQuadrature::new(grid.dim());
    let nb = 1 << (grid.dim() - 1);
    let mut weights = vec![0.0; nodes.len()];
    for face in set.faces() {
        for q in 0..quad.num_points() {
            for b in 0..nb {
                let pos = nodes
                    .binary_search(&face.nodes[b])
                    .expect("face node belongs to its set");
                weights[pos] += face.area * quad.weights[q] * quad.basis[q][b];
            }
        }
    }
    (nodes, weights)
}
