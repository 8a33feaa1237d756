//! Text field files and legacy VTK export.
//!
//! Field files start with
//!
//! ```text
//! FIELD <kind> <n> <counts...> <lo...> <hi...>
//! ```
//!
//! where `kind` is `scalar`, `vec2` or `matrix`, followed by one line per
//! node (row-major, axis 0 fastest) carrying 1, 2 or `n*n` values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Grid, MatrixField, ScalarField, Vec2Field};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(ScalarField),
    Vec2(Vec2Field),
    Matrix(MatrixField),
}

impl FieldData {
    fn kind(&self) -> &'static str {
        match self {
            FieldData::Scalar(_) => "scalar",
            FieldData::Vec2(_) => "vec2",
            FieldData::Matrix(_) => "matrix",
        }
    }
}

fn header(grid: &Grid, kind: &str) -> String {
    let mut s = format!("FIELD {kind} {}", grid.dim());
    for c in grid.counts() {
        let _ = write!(s, " {c}");
    }
    for v in grid.lo().iter().chain(grid.hi()) {
        let _ = write!(s, " {v:?}");
    }
    s.push('\n');
    s
}

/// Serialises a field; values use the shortest round-trip representation.
pub fn format_field(grid: &Grid, data: &FieldData) -> String {
    let mut out = header(grid, data.kind());
    match data {
        FieldData::Scalar(f) => {
            for v in &f.values {
                let _ = writeln!(out, "{v:?}");
            }
        }
        FieldData::Vec2(f) => {
            for v in &f.values {
                let _ = writeln!(out, "{:?} {:?}", v[0], v[1]);
            }
        }
        FieldData::Matrix(f) => {
            for node in 0..f.num_nodes() {
                let line: Vec<String> = f.at(node).iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_field(path: &Path, grid: &Grid, data: &FieldData) -> Result<()> {
    fs::write(path, format_field(grid, data))?;
    Ok(())
}

pub fn write_scalar(path: &Path, grid: &Grid, field: &ScalarField) -> Result<()> {
    write_field(path, grid, &FieldData::Scalar(field.clone()))
}

pub fn write_vec2(path: &Path, grid: &Grid, field: &Vec2Field) -> Result<()> {
    write_field(path, grid, &FieldData::Vec2(field.clone()))
}

pub fn parse_field(text: &str, origin: &Path) -> Result<(Grid, FieldData)> {
    let err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head: Vec<&str> = lines
        .next()
        .ok_or_else(|| err("empty file".into()))?
        .split_whitespace()
        .collect();
    if head.first() != Some(&"FIELD") || head.len() < 3 {
        return Err(err("missing `FIELD <kind> <n>` header".into()));
    }
    let kind = head[1];
    let dim: usize = head[2].parse().map_err(|_| err(format!("bad dimension `{}`", head[2])))?;
    if head.len() != 3 + 3 * dim {
        return Err(err(format!("header needs {} entries, found {}", 3 + 3 * dim, head.len())));
    }
    let counts = head[3..3 + dim]
        .iter()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| err(format!("bad count: {e}")))?;
    let bounds = head[3 + dim..]
        .iter()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| err(format!("bad box corner: {e}")))?;
    let grid = Grid::new(&bounds[..dim], &bounds[dim..], &counts)?;
    let width = match kind {
        "scalar" => 1,
        "vec2" => 2,
        "matrix" => dim * dim,
        other => return Err(err(format!("unknown field kind `{other}`"))),
    };
    let mut values = Vec::with_capacity(width * grid.num_nodes());
    for (row, line) in lines.enumerate() {
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| err(format!("line {}: bad value `{tok}`", row + 2)))?,
            );
        }
        if values.len() - before != width {
            return Err(err(format!(
                "line {}: expected {width} values, found {}",
                row + 2,
                values.len() - before
            )));
        }
    }
    if values.len() != width * grid.num_nodes() {
        return Err(err(format!(
            "expected {} nodes, found {}",
            grid.num_nodes(),
            values.len() / width
        )));
    }
    let data = match kind {
        "scalar" => FieldData::Scalar(ScalarField::new(values)),
        "vec2" => FieldData::Vec2(Vec2Field::from_flat(&values)),
        _ => FieldData::Matrix(MatrixField::from_values(dim, values)?),
    };
    Ok((grid, data))
}

pub fn read_field(path: &Path) -> Result<(Grid, FieldData)> {
    let text = fs::read_to_string(path)?;
    parse_field(&text, path)
}

/// Reads a scalar field and checks that it lives on `grid`.
pub fn read_scalar_on(path: &Path, grid: &Grid) -> Result<ScalarField> {
    match read_field(path)? {
        (g, FieldData::Scalar(f)) if g.counts() == grid.counts() && g.dim() == grid.dim() => Ok(f),
        (_, FieldData::Scalar(_)) => Err(Error::Parse {
            path: path.to_path_buf(),
            message: "field grid does not match the configured grid".into(),
        }),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            message: "expected a scalar field".into(),
        }),
    }
}

/// Legacy ASCII VTK structured-points export for visualisation.
pub fn format_vtk(grid: &Grid, name: &str, data: &FieldData) -> String {
    let dims: Vec<usize> = (0..3).map(|k| grid.counts().get(k).copied().unwrap_or(1)).collect();
    let origin: Vec<f64> = (0..3).map(|k| grid.lo().get(k).copied().unwrap_or(0.0)).collect();
    let spacing: Vec<f64> = (0..3).map(|k| grid.spacing().get(k).copied().unwrap_or(1.0)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{name}\nASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2]);
    let _ = writeln!(out, "ORIGIN {} {} {}", origin[0], origin[1], origin[2]);
    let _ = writeln!(out, "SPACING {} {} {}", spacing[0], spacing[1], spacing[2]);
    let _ = writeln!(out, "POINT_DATA {}", grid.num_nodes());
    let mut scalars = |label: String, values: &mut dyn Iterator<Item = f64>| {
        let _ = writeln!(out, "SCALARS {label} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(out, "{v:e}");
        }
    };
    match data {
        FieldData::Scalar(f) => scalars(name.to_string(), &mut f.values.iter().copied()),
        FieldData::Vec2(f) => {
            scalars(format!("{name}_re"), &mut f.values.iter().map(|v| v[0]));
            scalars(format!("{name}_im"), &mut f.values.iter().map(|v| v[1]));
        }
        FieldData::Matrix(f) => {
            let d = f.dim();
            for r in 0..d {
                for c in r..d {
                    scalars(
                        format!("{name}_{r}{c}"),
                        &mut (0..f.num_nodes()).map(|n| f.get(n, r, c)),
                    );
                }
            }
        }
    }
    out
}

pub fn write_vtk(path: &Path, grid: &Grid, name: &str, data: &FieldData) -> Result<()> {
    fs::write(path, format_vtk(grid, name, data))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(&[0.0, -1.0], &[2.0, 1.0], &[3, 4]).unwrap();
        let text = format_field(&g, &FieldData::Scalar(ScalarField::zeros(&g)));
        assert!(text.starts_with("FIELD scalar 2 3 4 0.0 -1.0 2.0 1.0\n"));
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn rejects_malformed_files() {
        let p = Path::new("mem");
        assert!(parse_field("", p).is_err());
        assert!(parse_field("FIELD scalar 2 3 3 0 0 1\n", p).is_err());
        assert!(parse_field("FIELD tensor 2 3 3 0 0 1 1\n", p).is_err());
        let short = "FIELD vec2 2 3 3 0 0 1 1\n".to_string() + &"1 2\n".repeat(8);
        assert!(parse_field(&short, p).is_err());
        let wide = "FIELD scalar 2 3 3 0 0 1 1\n".to_string() + &"1 2\n".repeat(9);
        assert!(parse_field(&wide, p).is_err());
    }

    #[test]
    fn vtk_has_point_data() {
        let g = Grid::unit_square(3).unwrap();
        let text = format_vtk(&g, "xi", &FieldData::Vec2(Vec2Field::zeros(&g)));
        assert!(text.contains("DIMENSIONS 3 3 1"));
        assert!(text.contains("SCALARS xi_im double 1"));
    }

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(-1e6f64..1e6, 2 * 3 * 4 * 3), which in 0usize..3) {
            let g = Grid::new(&[0.0, 0.0, -1.5], &[0.3, 1.0, 2.0], &[3, 4, 3]).unwrap();
            let n = g.num_nodes();
            let data = match which {
                0 => FieldData::Scalar(ScalarField::new(values[..n].to_vec())),
                1 => FieldData::Vec2(Vec2Field::from_flat(&values[..2 * n])),
                _ => {
                    let mut v = values.clone();
                    v.resize(9 * n, 0.25);
                    FieldData::Matrix(MatrixField::from_values(3, v).unwrap())
                }
            };
            let text = format_field(&g, &data);
            let (g2, back) = parse_field(&text, Path::new("mem")).unwrap();
            prop_assert_eq!(g2, g);
            prop_assert_eq!(back, data);
        }
    }
}
