//! Uniform node-centred grids on axis-aligned boxes, nodal fields, and the
//! quadrature and finite-difference machinery built on top of them.
//!
//! Nodes are numbered row-major with axis 0 fastest. A cell is the box
//! spanned by `2^dim` neighbouring nodes; inside a cell every nodal field is
//! interpolated multi-linearly (Q1).

mod boundary;
mod hessian;
pub mod io;
mod quadrature;

pub use boundary::{BoundarySet, Face, Side};
pub use hessian::{discrete_hessian, hessian_transpose};
pub use quadrature::{
    integrate_surface, integrate_volume, surface_node_weights, volume_node_weights,
    CellQuadrature, FaceQuadrature,
};

use crate::error::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    counts: [usize; MAX_DIM],
    h: [f64; MAX_DIM],
    strides: [usize; MAX_DIM],
}

impl Grid {
    /// Builds a grid with `counts[k]` nodes along axis `k` spanning
    /// `[lo[k], hi[k]]`.
    pub fn new(lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Self> {
        let dim = counts.len();
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "lo has {} entries, hi has {}, counts has {}",
                lo.len(),
                hi.len(),
                dim
            )));
        }
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::DimensionMismatch(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if counts.iter().any(|&c| c < 3) {
            return Err(Error::CountsTooSmall(counts.to_vec()));
        }
        for k in 0..dim {
            if !(lo[k].is_finite() && hi[k].is_finite() && lo[k] < hi[k]) {
                return Err(Error::DegenerateBox(format!(
                    "axis {k}: lo = {}, hi = {}",
                    lo[k], hi[k]
                )));
            }
        }
        let mut grid = Grid {
            dim,
            lo: [0.0; MAX_DIM],
            hi: [0.0; MAX_DIM],
            counts: [1; MAX_DIM],
            h: [0.0; MAX_DIM],
            strides: [0; MAX_DIM],
        };
        let mut stride = 1;
        for k in 0..dim {
            grid.lo[k] = lo[k];
            grid.hi[k] = hi[k];
            grid.counts[k] = counts[k];
            grid.h[k] = (hi[k] - lo[k]) / (counts[k] - 1) as f64;
            grid.strides[k] = stride;
            stride *= counts[k];
        }
        Ok(grid)
    }

    /// Unit square `[0,1]^2` with `n x n` nodes.
    pub fn unit_square(n: usize) -> Result<Self> {
        Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[n, n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides[..self.dim]
    }

    pub fn num_nodes(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.counts().iter().map(|c| c - 1).product()
    }

    /// Nodes per cell, `2^dim`.
    pub fn nodes_per_cell(&self) -> usize {
        1 << self.dim
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Lebesgue measure of the box.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }

    /// Surface measure of the box boundary.
    pub fn surface_area(&self) -> f64 {
        (0..self.dim)
            .map(|k| {
                2.0 * (0..self.dim)
                    .filter(|&j| j != k)
                    .map(|j| self.hi[j] - self.lo[j])
                    .product::<f64>()
            })
            .sum()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rest = flat;
        for k in 0..self.dim {
            out[k] = rest % self.counts[k];
            rest /= self.counts[k];
        }
        out
    }

    /// Physical coordinates of a node; unused trailing entries are zero.
    pub fn coords(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = self.lo[k] + idx[k] as f64 * self.h[k];
        }
        x
    }

    pub fn is_boundary_node(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim).any(|k| idx[k] == 0 || idx[k] == self.counts[k] - 1)
    }

    /// Multi-index of the lowest corner of every cell, row-major.
    pub fn cell_origins(&self) -> impl Iterator<Item = [usize; MAX_DIM]> + '_ {
        let cells: Vec<usize> = (0..self.dim).map(|k| self.counts[k] - 1).collect();
        let total: usize = cells.iter().product();
        (0..total).map(move |mut c| {
            let mut out = [0; MAX_DIM];
            for (k, n) in cells.iter().enumerate() {
                out[k] = c % n;
                c /= n;
            }
            out
        })
    }

    /// Global node indices of a cell. Local node `a` sits at offset
    /// `(a >> k) & 1` along axis `k`.
    pub fn cell_nodes(&self, origin: &[usize; MAX_DIM]) -> [usize; 1 << MAX_DIM] {
        let mut nodes = [0; 1 << MAX_DIM];
        let base = self.flat_index(&origin[..self.dim]);
        for (a, node) in nodes.iter_mut().enumerate().take(self.nodes_per_cell()) {
            *node = base
                + (0..self.dim)
                    .map(|k| ((a >> k) & 1) * self.strides[k])
                    .sum::<usize>();
        }
        nodes
    }

    /// Grid with the same box and twice the resolution; coarse node `i`
    /// coincides with fine node `2i` along every axis.
    pub fn refined(&self) -> Grid {
        let counts: Vec<usize> = self.counts().iter().map(|c| 2 * c - 1).collect();
        Grid::new(self.lo(), self.hi(), &counts).expect("refinement of a valid grid")
    }

    /// Fine-grid node coinciding with a coarse node of `self`.
    pub fn node_in_refined(&self, fine: &Grid, coarse_flat: usize) -> usize {
        let idx = self.multi_index(coarse_flat);
        let fine_idx: Vec<usize> = (0..self.dim).map(|k| 2 * idx[k]).collect();
        fine.flat_index(&fine_idx)
    }

    /// Evaluates `f` at every node.
    pub fn sample<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        (0..self.num_nodes())
            .map(|i| {
                let x = self.coords(i);
                f(&x[..self.dim])
            })
            .collect()
    }
}

/// Nodal scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        ScalarField {
            values: vec![c; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl FnMut(&[f64]) -> f64) -> Self {
        ScalarField {
            values: grid.sample(f),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check(&self, grid: &Grid, what: &str) -> Result<()> {
        if self.values.len() != grid.num_nodes() {
            return Err(Error::field(format!(
                "{what}: {} values for {} nodes",
                self.values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::field(format!("{what}: non-finite value at node {i}")));
        }
        Ok(())
    }

    /// Multi-linear interpolation of a field given on `coarse` onto `fine`.
    pub fn interpolate(&self, coarse: &Grid, fine: &Grid) -> ScalarField {
        ScalarField::from_fn(fine, |x| interpolate_at(coarse, &self.values, x))
    }
}

/// Multi-linear interpolant of nodal values at an arbitrary point in the box.
pub fn interpolate_at(grid: &Grid, values: &[f64], x: &[f64]) -> f64 {
    let dim = grid.dim();
    let mut origin = [0usize; MAX_DIM];
    let mut t = [0.0; MAX_DIM];
    for k in 0..dim {
        let s = ((x[k] - grid.lo()[k]) / grid.spacing()[k]).clamp(0.0, (grid.counts()[k] - 1) as f64);
        let i = (s.floor() as usize).min(grid.counts()[k] - 2);
        origin[k] = i;
        t[k] = s - i as f64;
    }
    let nodes = grid.cell_nodes(&origin);
    (0..grid.nodes_per_cell())
        .map(|a| {
            let w: f64 = (0..dim)
                .map(|k| if (a >> k) & 1 == 1 { t[k] } else { 1.0 - t[k] })
                .product();
            w * values[nodes[a]]
        })
        .sum()
}

/// Nodal field valued in R^2 (real and imaginary parts).
#[derive(Debug, Clone, PartialEq)]
pub struct Vec2Field {
    pub values: Vec<[f64; 2]>,
}

impl Vec2Field {
    pub fn new(values: Vec<[f64; 2]>) -> Self {
        Vec2Field { values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, [0.0, 0.0])
    }

    pub fn constant(grid: &Grid, c: [f64; 2]) -> Self {
        Vec2Field {
            values: vec![c; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl FnMut(&[f64]) -> [f64; 2]) -> Self {
        Vec2Field {
            values: grid.sample(f),
        }
    }

    /// Interleaved `[re0, im0, re1, im1, ...]` layout used by the solvers.
    pub fn from_flat(flat: &[f64]) -> Self {
        Vec2Field {
            values: flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| [v[0], v[1]]).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v[0].hypot(v[1])))
    }

    pub fn sub(&self, other: &Vec2Field) -> Vec2Field {
        Vec2Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                .collect(),
        }
    }

    pub fn check(&self, grid: &Grid, what: &str) -> Result<()> {
        if self.values.len() != grid.num_nodes() {
            return Err(Error::field(format!(
                "{what}: {} values for {} nodes",
                self.values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(i) = self
            .values
            .iter()
            .position(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            return Err(Error::field(format!("{what}: non-finite value at node {i}")));
        }
        Ok(())
    }
}

/// Nodal field of `dim x dim` real matrices, row-major per node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    dim: usize,
    pub values: Vec<f64>,
}

impl MatrixField {
    pub fn zeros(grid: &Grid) -> Self {
        let d = grid.dim();
        MatrixField {
            dim: d,
            values: vec![0.0; d * d * grid.num_nodes()],
        }
    }

    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() % (dim * dim) != 0 {
            return Err(Error::field(format!(
                "{} values is not a multiple of {}",
                values.len(),
                dim * dim
            )));
        }
        Ok(MatrixField { dim, values })
    }

    /// `c * I` at every node.
    pub fn scaled_identity(grid: &Grid, c: f64) -> Self {
        let mut out = Self::zeros(grid);
        for node in 0..grid.num_nodes() {
            for k in 0..out.dim {
                out.set(node, k, k, c);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.values.len() / (self.dim * self.dim)
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.values[node * s..(node + 1) * s]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let s = self.dim * self.dim;
        &mut self.values[node * s..(node + 1) * s]
    }

    pub fn get(&self, node: usize, row: usize, col: usize) -> f64 {
        self.values[node * self.dim * self.dim + row * self.dim + col]
    }

    pub fn set(&mut self, node: usize, row: usize, col: usize, v: f64) {
        self.values[node * self.dim * self.dim + row * self.dim + col] = v;
    }

    /// Frobenius norm at a node.
    pub fn frobenius(&self, node: usize) -> f64 {
        self.at(node).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise inner product summed over nodes.
    pub fn dot(&self, other: &MatrixField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn check(&self, grid: &Grid, what: &str) -> Result<()> {
        if self.dim != grid.dim() || self.num_nodes() != grid.num_nodes() {
            return Err(Error::field(format!(
                "{what}: {}x{} matrices at {} nodes on a {}-d grid with {} nodes",
                self.dim,
                self.dim,
                self.num_nodes(),
                grid.dim(),
                grid.num_nodes()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::field(format!("{what}: non-finite entry")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_from_counts() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[3, 3]).unwrap();
        assert_eq!(g.spacing(), &[0.5, 0.5]);
        assert_eq!(g.num_nodes(), 9);

        let g = Grid::new(&[0.0, 0.0], &[2.0, 1.0], &[5, 3]).unwrap();
        assert_eq!(g.spacing(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(matches!(
            Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[2, 3]),
            Err(Error::CountsTooSmall(_))
        ));
        assert!(matches!(
            Grid::new(&[0.0, 1.0], &[1.0, 1.0], &[3, 3]),
            Err(Error::DegenerateBox(_))
        ));
        assert!(matches!(
            Grid::new(&[0.0], &[1.0, 1.0], &[3, 3]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            Grid::new(&[0.0; 4], &[1.0; 4], &[3; 4]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn index_mapping_is_a_bijection() {
        let g = Grid::new(&[0.0; 3], &[1.0, 2.0, 3.0], &[3, 4, 5]).unwrap();
        for flat in 0..g.num_nodes() {
            let idx = g.multi_index(flat);
            assert_eq!(g.flat_index(&idx[..3]), flat);
        }
        // axis 0 fastest
        assert_eq!(g.flat_index(&[1, 0, 0]), 1);
        assert_eq!(g.flat_index(&[0, 1, 0]), 3);
        let x = g.coords(g.flat_index(&[2, 3, 4]));
        assert_eq!(&x, &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn cell_nodes_follow_bit_convention() {
        let g = Grid::unit_square(4).unwrap();
        let nodes = g.cell_nodes(&[1, 2, 0]);
        assert_eq!(&nodes[..4], &[9, 10, 13, 14]);
        assert_eq!(g.cell_origins().count(), 9);
    }

    #[test]
    fn refinement_nests_nodes() {
        let g = Grid::new(&[0.0, -1.0], &[2.0, 1.0], &[5, 3]).unwrap();
        let f = g.refined();
        assert_eq!(f.counts(), &[9, 5]);
        for i in 0..g.num_nodes() {
            assert_eq!(g.coords(i), f.coords(g.node_in_refined(&f, i)));
        }
    }

    #[test]
    fn interpolation_reproduces_bilinears() {
        let g = Grid::new(&[0.0, 0.0], &[2.0, 1.0], &[5, 4]).unwrap();
        let f = ScalarField::from_fn(&g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        for &(x, y) in &[(0.3, 0.7), (1.99, 0.01), (2.0, 1.0), (0.0, 0.0)] {
            let exact = 1.0 + 2.0 * x - y + 0.5 * x * y;
            assert!((interpolate_at(&g, &f.values, &[x, y]) - exact).abs() < 1e-13);
        }
    }
}
