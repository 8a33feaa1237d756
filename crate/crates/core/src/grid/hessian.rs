//! Nodal finite-difference Hessian and its exact transpose.
//!
//! Pure second derivatives use the centred three-point stencil in the
//! interior and the one-sided four-point second-order stencil at the ends
//! (three-point when an axis only has three nodes). Mixed derivatives are
//! products of first-derivative stencils, which commute, so the result is
//! symmetric at every node.

use super::{Grid, MatrixField, ScalarField, MAX_DIM};
use crate::error::{Error, Result};

type Stencil = ([usize; 4], [f64; 4], usize);

fn second_diff(i: usize, count: usize, h: f64) -> Stencil {
    let s = 1.0 / (h * h);
    let last = count - 1;
    if i > 0 && i < last {
        ([i - 1, i, i + 1, 0], [s, -2.0 * s, s, 0.0], 3)
    } else if count >= 4 {
        if i == 0 {
            ([0, 1, 2, 3], [2.0 * s, -5.0 * s, 4.0 * s, -s], 4)
        } else {
            ([last, last - 1, last - 2, last - 3], [2.0 * s, -5.0 * s, 4.0 * s, -s], 4)
        }
    } else if i == 0 {
        ([0, 1, 2, 0], [s, -2.0 * s, s, 0.0], 3)
    } else {
        ([last - 2, last - 1, last, 0], [s, -2.0 * s, s, 0.0], 3)
    }
}

fn first_diff(i: usize, count: usize, h: f64) -> Stencil {
    let s = 0.5 / h;
    let last = count - 1;
    if i > 0 && i < last {
        ([i - 1, i + 1, 0, 0], [-s, s, 0.0, 0.0], 2)
    } else if i == 0 {
        ([0, 1, 2, 0], [-3.0 * s, 4.0 * s, -s, 0.0], 3)
    } else {
        ([last, last - 1, last - 2, 0], [3.0 * s, -4.0 * s, s, 0.0], 3)
    }
}

/// Visits every `(node, row, col, source node, weight)` entry of the
/// Hessian operator for `row <= col`.
fn for_each_entry(grid: &Grid, mut visit: impl FnMut(usize, usize, usize, usize, f64)) {
    let dim = grid.dim();
    let counts = grid.counts();
    let h = grid.spacing();
    let strides = grid.strides();
    for node in 0..grid.num_nodes() {
        let idx = grid.multi_index(node);
        for k in 0..dim {
            let (pos, w, len) = second_diff(idx[k], counts[k], h[k]);
            let base = node - idx[k] * strides[k];
            for t in 0..len {
                visit(node, k, k, base + pos[t] * strides[k], w[t]);
            }
            for l in k + 1..dim {
                let (pk, wk, lk) = first_diff(idx[k], counts[k], h[k]);
                let (pl, wl, ll) = first_diff(idx[l], counts[l], h[l]);
                let base = node - idx[k] * strides[k] - idx[l] * strides[l];
                for a in 0..lk {
                    for b in 0..ll {
                        visit(node, k, l, base + pk[a] * strides[k] + pl[b] * strides[l], wk[a] * wl[b]);
                    }
                }
            }
        }
    }
}

fn check_size(grid: &Grid) -> Result<()> {
    if grid.counts().iter().any(|&c| c < 3) || grid.dim() > MAX_DIM {
        return Err(Error::CountsTooSmall(grid.counts().to_vec()));
    }
    Ok(())
}

/// `D^2 xi` at every node.
pub fn discrete_hessian(grid: &Grid, xi: &ScalarField) -> Result<MatrixField> {
    check_size(grid)?;
    xi.check(grid, "xi")?;
    let mut out = MatrixField::zeros(grid);
    for_each_entry(grid, |node, k, l, src, w| {
        let v = out.get(node, k, l) + w * xi.values[src];
        out.set(node, k, l, v);
        if k != l {
            out.set(node, l, k, v);
        }
    });
    Ok(out)
}

/// Adjoint of [`discrete_hessian`] with respect to the plain nodal inner
/// products: `<H xi, W> = <xi, H^T W>`.
pub fn hessian_transpose(grid: &Grid, w: &MatrixField) -> Result<ScalarField> {
    check_size(grid)?;
    w.check(grid, "W")?;
    let mut out = ScalarField::zeros(grid);
    for_each_entry(grid, |node, k, l, src, weight| {
        let pair = if k == l {
            w.get(node, k, k)
        } else {
            w.get(node, k, l) + w.get(node, l, k)
        };
        out.values[src] += weight * pair;
    });
    Ok(out)
}
