use std::ops::Range;

use super::{Grid, MAX_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Min,
    Max,
}

/// A boundary element face: the `2^(dim-1)` nodes of one cell side lying on
/// the box boundary. The outward normal is `+/- e_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
    /// Face nodes; local node `b` sits at offset `(b >> t) & 1` along the
    /// `t`-th tangential axis (tangential axes in increasing order).
    pub nodes: [usize; 1 << (MAX_DIM - 1)],
    /// Cell index of the face along each tangential axis.
    pub cell: [usize; MAX_DIM - 1],
    pub area: f64,
}

impl Face {
    pub fn outward_normal(&self, dim: usize) -> [f64; MAX_DIM] {
        let mut n = [0.0; MAX_DIM];
        debug_assert!(self.axis < dim);
        n[self.axis] = match self.side {
            Side::Min => -1.0,
            Side::Max => 1.0,
        };
        n
    }

    fn key(&self) -> (usize, Side, [usize; MAX_DIM - 1]) {
        (self.axis, self.side, self.cell)
    }
}

/// A union of boundary faces, e.g. a measurement window or all of the
/// boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    selector: String,
    faces: Vec<Face>,
}

impl BoundarySet {
    /// Parses a selector and collects the faces it names.
    ///
    /// Grammar: `all`, `x<k>_min`, `x<k>_max`, optionally restricted to a
    /// window of face cells per tangential axis, e.g. `x0_min[2..5]` in 2-d
    /// or `x2_max[0..4,1..3]` in 3-d (half-open ranges). Several selectors
    /// may be joined with `+`; overlapping faces are counted once.
    pub fn select(grid: &Grid, selector: &str) -> Result<Self> {
        let mut faces: Vec<Face> = Vec::new();
        for part in selector.split('+').map(str::trim) {
            for face in select_part(grid, part, selector)? {
                if !faces.iter().any(|f| f.key() == face.key()) {
                    faces.push(face);
                }
            }
        }
        if faces.is_empty() {
            return Err(Error::EmptySelection(selector.to_string()));
        }
        faces.sort_by_key(Face::key);
        Ok(BoundarySet {
            selector: selector.to_string(),
            faces,
        })
    }

    pub fn all(grid: &Grid) -> Self {
        Self::select(grid, "all").expect("every grid has a boundary")
    }

    pub fn selector(&self) -> &str {
        &self.selector
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Discrete `H^{n-1}` measure of the set.
    pub fn measure(&self) -> f64 {
        self.faces.iter().map(|f| f.area).sum()
    }

    /// Sorted, de-duplicated nodes touched by the set.
    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        let per_face = 1 << (grid.dim() - 1);
        let mut nodes: Vec<usize> = self
            .faces
            .iter()
            .flat_map(|f| f.nodes[..per_face].iter().copied())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// True if the set is exactly the full boundary of `grid`.
    pub fn covers_boundary(&self, grid: &Grid) -> bool {
        let full: usize = (0..grid.dim())
            .map(|k| {
                2 * (0..grid.dim())
                    .filter(|&j| j != k)
                    .map(|j| grid.counts()[j] - 1)
                    .product::<usize>()
            })
            .sum();
        self.faces.len() == full
    }
}

fn select_part(grid: &Grid, part: &str, full: &str) -> Result<Vec<Face>> {
    let unknown = || Error::UnknownSelector(full.to_string());
    if part == "all" {
        let mut faces = Vec::new();
        for axis in 0..grid.dim() {
            for side in [Side::Min, Side::Max] {
                faces.extend(side_faces(grid, axis, side, None));
            }
        }
        return Ok(faces);
    }
    let (head, window) = match part.find('[') {
        Some(pos) => {
            let rest = part[pos + 1..].strip_suffix(']').ok_or_else(unknown)?;
            (&part[..pos], Some(rest))
        }
        None => (part, None),
    };
    let body = head.strip_prefix('x').ok_or_else(unknown)?;
    let (axis_str, side_str) = body.split_once('_').ok_or_else(unknown)?;
    let axis: usize = axis_str.parse().map_err(|_| unknown())?;
    if axis >= grid.dim() {
        return Err(unknown());
    }
    let side = match side_str {
        "min" => Side::Min,
        "max" => Side::Max,
        _ => return Err(unknown()),
    };
    let ranges = match window {
        Some(w) => {
            let ranges: Vec<Range<usize>> = w
                .split(',')
                .map(|r| {
                    let (a, b) = r.trim().split_once("..")?;
                    Some(a.trim().parse().ok()?..b.trim().parse().ok()?)
                })
                .collect::<Option<_>>()
                .ok_or_else(unknown)?;
            if ranges.len() != grid.dim() - 1 {
                return Err(unknown());
            }
            Some(ranges)
        }
        None => None,
    };
    Ok(side_faces(grid, axis, side, ranges.as_deref()))
}

fn side_faces(grid: &Grid, axis: usize, side: Side, window: Option<&[Range<usize>]>) -> Vec<Face> {
    let dim = grid.dim();
    let tangential: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
    let cells: Vec<usize> = tangential.iter().map(|&k| grid.counts()[k] - 1).collect();
    let total: usize = cells.iter().product();
    let fixed = match side {
        Side::Min => 0,
        Side::Max => grid.counts()[axis] - 1,
    };
    let area: f64 = tangential.iter().map(|&k| grid.spacing()[k]).product();
    let mut faces = Vec::new();
    for mut c in 0..total {
        let mut cell = [0; MAX_DIM - 1];
        for (t, n) in cells.iter().enumerate() {
            cell[t] = c % n;
            c /= n;
        }
        if let Some(win) = window {
            if !win.iter().zip(&cell).all(|(r, i)| r.contains(i)) {
                continue;
            }
        }
        let mut nodes = [0; 1 << (MAX_DIM - 1)];
        for (b, node) in nodes.iter_mut().enumerate().take(1 << (dim - 1)) {
            let mut idx = [0; MAX_DIM];
            idx[axis] = fixed;
            for (t, &k) in tangential.iter().enumerate() {
                idx[k] = cell[t] + ((b >> t) & 1);
            }
            *node = grid.flat_index(&idx[..dim]);
        }
        faces.push(Face {
            axis,
            side,
            nodes,
            cell,
            area,
        });
    }
    faces
}
