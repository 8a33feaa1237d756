use rayon::prelude::*;

use crate::coefficients::{block_apply, block_transpose, Block2};
use crate::grid::Grid;

/// Sparse operator with a 2x2 block per stored node pair.
///
/// Unknowns are interleaved: node `i` owns entries `2i` (real part) and
/// `2i + 1` (imaginary part). Block `(row, col)` maps the trial values at
/// `col` to the test equation at `row`. The sparsity pattern is symmetric
/// even when the blocks are not, so the transpose action can be evaluated
/// row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCsr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    blocks: Vec<Block2>,
    transpose_pos: Vec<usize>,
}

impl BlockCsr {
    /// Zero operator with the Q1 pattern of `grid` (all nodes sharing a
    /// cell are coupled).
    pub fn with_grid_pattern(grid: &Grid) -> Self {
        let dim = grid.dim();
        let n = grid.num_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for node in 0..n {
            let idx = grid.multi_index(node);
            let mut neigh = Vec::with_capacity(27);
            for code in 0..3usize.pow(dim as u32) {
                let mut c = code;
                let mut other = [0usize; 3];
                let mut ok = true;
                for k in 0..dim {
                    let off = (c % 3) as isize - 1;
                    c /= 3;
                    let v = idx[k] as isize + off;
                    if v < 0 || v >= grid.counts()[k] as isize {
                        ok = false;
                        break;
                    }
                    other[k] = v as usize;
                }
                if ok {
                    neigh.push(grid.flat_index(&other[..dim]));
                }
            }
            neigh.sort_unstable();
            cols.extend(neigh);
            row_ptr.push(cols.len());
        }
        let mut op = BlockCsr {
            row_ptr,
            blocks: vec![[[0.0; 2]; 2]; cols.len()],
            cols,
            transpose_pos: Vec::new(),
        };
        op.transpose_pos = (0..n)
            .flat_map(|row| (op.row_ptr[row]..op.row_ptr[row + 1]).map(move |p| (row, p)))
            .map(|(row, p)| op.position(op.cols[p], row).expect("symmetric pattern"))
            .collect();
        op
    }

    pub fn num_nodes(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn num_unknowns(&self) -> usize {
        2 * self.num_nodes()
    }

    pub fn num_blocks(&self) -> usize {
        self.cols.len()
    }

    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[range.clone()]
            .binary_search(&col)
            .ok()
            .map(|i| range.start + i)
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, &Block2)> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[range.clone()].iter().copied().zip(&self.blocks[range])
    }

    pub fn block(&self, row: usize, col: usize) -> Option<&Block2> {
        self.position(row, col).map(|p| &self.blocks[p])
    }

    pub(crate) fn add_at(&mut self, pos: usize, b: &Block2) {
        let t = &mut self.blocks[pos];
        for r in 0..2 {
            for c in 0..2 {
                t[r][c] += b[r][c];
            }
        }
    }

    /// Overwrites every row in parallel; `f(row, cols, blocks)` receives the
    /// column indices and block storage of one row. Each row is written by
    /// exactly one task, so the result does not depend on scheduling.
    pub(crate) fn fill_rows(&mut self, f: impl Fn(usize, &[usize], &mut [Block2]) + Sync) {
        let BlockCsr {
            row_ptr, cols, blocks, ..
        } = self;
        let mut rows = Vec::with_capacity(row_ptr.len() - 1);
        let mut rest = &mut blocks[..];
        for r in 0..row_ptr.len() - 1 {
            let (head, tail) = rest.split_at_mut(row_ptr[r + 1] - row_ptr[r]);
            rows.push(head);
            rest = tail;
        }
        let (row_ptr, cols) = (&*row_ptr, &*cols);
        rows.into_par_iter()
            .enumerate()
            .for_each(|(r, out)| f(r, &cols[row_ptr[r]..row_ptr[r + 1]], out));
    }

    /// Largest distance `|row - col|` in node indices.
    pub fn node_bandwidth(&self) -> usize {
        (0..self.num_nodes())
            .flat_map(|r| self.cols[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(move |&c| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    /// `y = Op x` on interleaved vectors.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.num_unknowns()];
        self.apply_into(x, &mut y, false);
        y
    }

    /// `y = Op^T x` on interleaved vectors.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.num_unknowns()];
        self.apply_into(x, &mut y, true);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64], transpose: bool) {
        debug_assert_eq!(x.len(), self.num_unknowns());
        y.par_chunks_mut(2).enumerate().for_each(|(row, out)| {
            let mut acc = [0.0; 2];
            for p in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.cols[p];
                let w = [x[2 * col], x[2 * col + 1]];
                let v = if transpose {
                    block_apply(&block_transpose(&self.blocks[self.transpose_pos[p]]), w)
                } else {
                    block_apply(&self.blocks[p], w)
                };
                acc[0] += v[0];
                acc[1] += v[1];
            }
            out[0] = acc[0];
            out[1] = acc[1];
        });
    }

    /// `<Op u, w>`: the bilinear form with trial `u` and test `w`.
    pub fn bilinear(&self, u: &[f64], w: &[f64]) -> f64 {
        dot(&self.apply(u), w)
    }

    pub fn diagonal_block(&self, row: usize) -> Block2 {
        *self.block(row, row).expect("diagonal is stored")
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.num_unknowns();
        let mut out = vec![vec![0.0; n]; n];
        for row in 0..self.num_nodes() {
            for (col, b) in self.row(row) {
                for r in 0..2 {
                    for c in 0..2 {
                        out[2 * row + r][2 * col + c] = b[r][c];
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
