//! Misfit and regularisation functionals with their duality densities.
//!
//! All integrals act on the multi-linear interpolant of the nodal
//! integrand, i.e. `\int f = sum_j w_j f_j` with the node weights of the
//! grid module. Averages use the same discrete measures, so every density
//! below pairs exactly with its functional's derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{discrete_hessian, hessian_transpose, surface_node_weights, volume_node_weights};
use crate::grid::{BoundarySet, Grid, MatrixField, ScalarField, Vec2Field};
use crate::robin::Trace;

/// `|w|_(p) = sqrt(|w|^2 + p^-2)`; `p = inf` gives the plain norm.
pub fn reg_abs(w: &[f64], p: f64) -> Result<f64> {
    check_exponent("p", p)?;
    Ok(reg(w.iter().map(|v| v * v).sum::<f64>().sqrt(), p))
}

fn reg(norm: f64, p: f64) -> f64 {
    if p.is_infinite() {
        norm
    } else {
        norm.hypot(1.0 / p)
    }
}

fn check_exponent(name: &'static str, p: f64) -> Result<()> {
    if !(p >= 2.0) {
        return Err(Error::Parameter {
            name,
            value: p,
            reason: "must be at least 2",
        });
    }
    Ok(())
}

/// `(sum_j w_j |g_j|_(p)^p / sum_j w_j)^(1/p)` from the magnitudes `|g_j|`.
/// The largest term is factored out so large `p` cannot overflow.
pub fn dotted_norm_weighted(magnitudes: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    check_exponent("p", p)?;
    if magnitudes.len() != weights.len() || weights.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} magnitudes for {} weights",
            magnitudes.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    let regs: Vec<f64> = magnitudes.iter().map(|&m| reg(m, p)).collect();
    let top = regs.iter().fold(0.0f64, |a, &b| a.max(b));
    if p.is_infinite() || top == 0.0 {
        return Ok(top);
    }
    let mean: f64 = regs.iter().zip(weights).map(|(r, w)| w * (r / top).powf(p)).sum::<f64>() / total;
    Ok(top * mean.powf(1.0 / p))
}

/// Averaged regularised `L^p` norm of `g` over `set`; only nodes of `set`
/// are read.
pub fn dotted_norm_boundary(grid: &Grid, g: &Vec2Field, set: &BoundarySet, p: f64) -> Result<f64> {
    g.check(grid, "g")?;
    if set.is_empty() {
        return Err(Error::EmptySelection(set.selector().to_string()));
    }
    let (nodes, weights) = surface_node_weights(grid, set);
    let mags: Vec<f64> = nodes.iter().map(|&n| g.values[n][0].hypot(g.values[n][1])).collect();
    dotted_norm_weighted(&mags, &weights, p)
}

/// Averaged regularised `L^m` norm of the nodewise Frobenius norm of `v`.
pub fn dotted_norm_volume(grid: &Grid, v: &MatrixField, m: f64) -> Result<f64> {
    v.check(grid, "V")?;
    let mags: Vec<f64> = (0..grid.num_nodes()).map(|n| v.frobenius(n)).collect();
    dotted_norm_weighted(&mags, &volume_node_weights(grid), m)
}

/// Density factor `|g_j|_(p)^(p-2) / (|S| * N^(p-1))` for each node, where
/// `N` is the dotted norm and `|S| = sum w`: the gradient of the dotted
/// norm with respect to `g_j` is `w_j * factor_j * g_j`.
fn density_factors(magnitudes: &[f64], weights: &[f64], p: f64) -> Result<Vec<f64>> {
    let n = dotted_norm_weighted(magnitudes, weights, p)?;
    let total: f64 = weights.iter().sum();
    Ok(magnitudes.iter().map(|&m| (reg(m, p) / n).powf(p - 2.0) / (n * total)).collect())
}

/// Energy parameters: misfit exponent `p` (finite, or `inf` for `E_inf`),
/// Tikhonov exponent `m`, weight `alpha` and box bound `box_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub p: f64,
    pub m: f64,
    pub alpha: f64,
    pub box_m: f64,
}

impl EnergyParams {
    /// Default Tikhonov exponent `max(n, 4) + 1`.
    pub fn default_m(dim: usize) -> f64 {
        dim.max(4) as f64 + 1.0
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent("p", self.p)?;
        if !(self.m > 1.0 && self.m.is_finite()) {
            return Err(Error::Parameter {
                name: "m",
                value: self.m,
                reason: "must be finite and greater than 1",
            });
        }
        for (name, v) in [("alpha", self.alpha), ("M", self.box_m)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter {
                    name,
                    value: v,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }

    /// Soft conditions of the continuous theory that fail for these
    /// parameters in dimension `dim`.
    pub fn warnings(&self, dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        let n = dim as f64;
        let p_min = if dim > 2 { n.max(2.0 * n / (n - 2.0)) } else { n };
        if self.p.is_finite() && self.p <= p_min {
            out.push(format!("p = {} does not exceed {p_min}", self.p));
        }
        if self.m <= n {
            out.push(format!("m = {} does not exceed the dimension {dim}", self.m));
        }
        out
    }

    pub fn with_p(&self, p: f64) -> Self {
        EnergyParams { p, ..*self }
    }
}

/// Measured traces `v^delta_i` on the sets `Gamma_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementData {
    pub sets: Vec<BoundarySet>,
    pub traces: Vec<Trace>,
    pub delta: f64,
    weights: Vec<Vec<f64>>,
}

impl MeasurementData {
    pub fn new(grid: &Grid, sets: Vec<BoundarySet>, traces: Vec<Trace>, delta: f64) -> Result<Self> {
        if sets.len() != traces.len() || sets.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} measurement sets for {} traces",
                sets.len(),
                traces.len()
            )));
        }
        if !(delta >= 0.0) {
            return Err(Error::Parameter {
                name: "delta",
                value: delta,
                reason: "must be non-negative",
            });
        }
        let mut weights = Vec::with_capacity(sets.len());
        for (i, (set, trace)) in sets.iter().zip(&traces).enumerate() {
            if set.is_empty() {
                return Err(Error::EmptySelection(set.selector().to_string()));
            }
            let (nodes, w) = surface_node_weights(grid, set);
            if nodes != trace.nodes || trace.values.len() != nodes.len() {
                return Err(Error::field(format!("trace {i} does not match its measurement set")));
            }
            if trace.values.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::field(format!("trace {i} has non-finite values")));
            }
            weights.push(w);
        }
        Ok(MeasurementData {
            sets,
            traces,
            delta,
            weights,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.sets.len()
    }

    /// Surface node weights of `Gamma_i`, aligned with the trace nodes.
    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    fn residuals(&self, traces: &[Trace]) -> Result<Vec<Vec<[f64; 2]>>> {
        if traces.len() != self.num_sources() {
            return Err(Error::DimensionMismatch(format!(
                "{} traces for {} measurements",
                traces.len(),
                self.num_sources()
            )));
        }
        traces
            .iter()
            .zip(&self.traces)
            .enumerate()
            .map(|(i, (t, d))| {
                if t.nodes != d.nodes {
                    return Err(Error::field(format!("trace {i} lives on different nodes than its data")));
                }
                Ok(t.values.iter().zip(&d.values).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect())
            })
            .collect()
    }
}

fn magnitudes(r: &[[f64; 2]]) -> Vec<f64> {
    r.iter().map(|v| v[0].hypot(v[1])).collect()
}

/// Individual terms of an energy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub misfit: Vec<f64>,
    /// `alpha * ||D^2 xi||`.
    pub tikhonov: f64,
}

impl EnergyTerms {
    pub fn misfit_total(&self) -> f64 {
        self.misfit.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.misfit_total() + self.tikhonov
    }
}

/// `alpha * ||D^2 xi||_{dotL^m}`.
pub fn tikhonov_term(grid: &Grid, xi: &ScalarField, params: &EnergyParams) -> Result<f64> {
    Ok(params.alpha * dotted_norm_volume(grid, &discrete_hessian(grid, xi)?, params.m)?)
}

/// Terms of `E_p` (or of `E_inf` when `params.p` is infinite).
pub fn energy_terms(
    grid: &Grid,
    traces: &[Trace],
    xi: &ScalarField,
    data: &MeasurementData,
    params: &EnergyParams,
) -> Result<EnergyTerms> {
    params.validate()?;
    let misfit = data
        .residuals(traces)?
        .iter()
        .enumerate()
        .map(|(i, r)| dotted_norm_weighted(&magnitudes(r), data.weights(i), params.p))
        .collect::<Result<_>>()?;
    Ok(EnergyTerms {
        misfit,
        tikhonov: tikhonov_term(grid, xi, params)?,
    })
}

/// `E_p = sum_i ||v_i - v^delta_i||_{dotL^p(Gamma_i)} + alpha ||D^2 xi||_{dotL^m}`.
pub fn energy_p(
    grid: &Grid,
    traces: &[Trace],
    xi: &ScalarField,
    data: &MeasurementData,
    params: &EnergyParams,
) -> Result<f64> {
    if params.p.is_infinite() {
        return Err(Error::Parameter {
            name: "p",
            value: params.p,
            reason: "energy_p needs a finite exponent",
        });
    }
    Ok(energy_terms(grid, traces, xi, data, params)?.total())
}

/// `E_inf`: nodal maxima of the misfit over each `Gamma_i` plus the same
/// Tikhonov term.
pub fn energy_inf(
    grid: &Grid,
    traces: &[Trace],
    xi: &ScalarField,
    data: &MeasurementData,
    params: &EnergyParams,
) -> Result<f64> {
    Ok(energy_terms(grid, traces, xi, data, &params.with_p(f64::INFINITY))?.total())
}

/// `mu(V) = |V|_(m)^(m-2) V / (|Omega| ||V||^(m-1))` nodewise; the
/// derivative of `dotted_norm_volume` along `W` is `\int W : mu(V)`.
pub fn mu_field(grid: &Grid, v: &MatrixField, m: f64) -> Result<MatrixField> {
    v.check(grid, "V")?;
    if m.is_infinite() {
        return Err(Error::Parameter {
            name: "m",
            value: m,
            reason: "must be finite",
        });
    }
    let mags: Vec<f64> = (0..grid.num_nodes()).map(|n| v.frobenius(n)).collect();
    let factors = density_factors(&mags, &volume_node_weights(grid), m)?;
    let mut out = v.clone();
    for (node, f) in factors.iter().enumerate() {
        out.at_mut(node).iter_mut().for_each(|x| *x *= f);
    }
    Ok(out)
}

/// Gradient of `alpha ||D^2 xi||` with respect to the nodal values of `xi`.
pub fn tikhonov_gradient(grid: &Grid, xi: &ScalarField, params: &EnergyParams) -> Result<ScalarField> {
    let mut mu = mu_field(grid, &discrete_hessian(grid, xi)?, params.m)?;
    let w = volume_node_weights(grid);
    for (node, wj) in w.iter().enumerate() {
        mu.at_mut(node).iter_mut().for_each(|x| *x *= params.alpha * wj);
    }
    hessian_transpose(grid, &mu)
}

/// Discrete `R^2`-valued boundary measure: a density at the nodes of each
/// `Gamma_i` together with the surface node weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    pub nodes: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
    pub density: Vec<Vec<[f64; 2]>>,
}

impl BoundaryMeasure {
    pub fn num_components(&self) -> usize {
        self.density.len()
    }

    /// `<w, nu> = sum_i \int_{Gamma_i} w_i . dnu_i` for nodal traces.
    pub fn pair(&self, traces: &[Vec<[f64; 2]>]) -> f64 {
        traces
            .iter()
            .zip(&self.density)
            .zip(&self.weights)
            .map(|((t, d), w)| {
                t.iter()
                    .zip(d)
                    .zip(w)
                    .map(|((a, b), wj)| wj * (a[0] * b[0] + a[1] * b[1]))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Nodal load vector of component `i` on the full grid:
    /// entry `j` is `w_j * density_j`, so `<x, load> = \int x . dnu_i`.
    pub fn load(&self, grid: &Grid, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; 2 * grid.num_nodes()];
        for ((&n, d), w) in self.nodes[i].iter().zip(&self.density[i]).zip(&self.weights[i]) {
            out[2 * n] = w * d[0];
            out[2 * n + 1] = w * d[1];
        }
        out
    }
}

/// `nu_p` of the residuals `v_i - v^delta_i`; the derivative of the misfit
/// sum along trace perturbations `w` is `<w, nu_p>`.
pub fn nu_measure(traces: &[Trace], data: &MeasurementData, p: f64) -> Result<BoundaryMeasure> {
    if p.is_infinite() {
        return Err(Error::Parameter {
            name: "p",
            value: p,
            reason: "nu needs a finite exponent",
        });
    }
    let residuals = data.residuals(traces)?;
    let mut density = Vec::with_capacity(residuals.len());
    for (i, r) in residuals.iter().enumerate() {
        let f = density_factors(&magnitudes(r), data.weights(i), p)?;
        density.push(r.iter().zip(&f).map(|(v, c)| [c * v[0], c * v[1]]).collect());
    }
    Ok(BoundaryMeasure {
        nodes: data.traces.iter().map(|t| t.nodes.clone()).collect(),
        weights: (0..data.num_sources()).map(|i| data.weights(i).to_vec()).collect(),
        density,
    })
}

/// `sum_i \int_{Gamma_i} |density_i|`.
pub fn total_variation(nu: &BoundaryMeasure) -> f64 {
    nu.density
        .iter()
        .zip(&nu.weights)
        .map(|(d, w)| d.iter().zip(w).map(|(v, wj)| wj * v[0].hypot(v[1])).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    /// Face integral of a bilinear (trilinear) interpolant is the area
    /// times the mean of the corner values.
    fn oracle_boundary(grid: &Grid, set: &BoundarySet, f: impl Fn(usize) -> f64) -> (f64, f64) {
        let nb = 1 << (grid.dim() - 1);
        let mut integral = 0.0;
        let mut area = 0.0;
        for face in set.faces() {
            let mean: f64 = face.nodes[..nb].iter().map(|&n| f(n)).sum::<f64>() / nb as f64;
            integral += face.area * mean;
            area += face.area;
        }
        (integral, area)
    }

    fn oracle_volume(grid: &Grid, f: impl Fn(usize) -> f64) -> f64 {
        let npc = grid.nodes_per_cell();
        grid.cell_origins()
            .map(|o| {
                let nodes = grid.cell_nodes(&o);
                grid.cell_volume() * nodes[..npc].iter().map(|&n| f(n)).sum::<f64>() / npc as f64
            })
            .sum()
    }

    fn random_vec2(grid: &Grid, rng: &mut ChaCha8Rng, scale: f64) -> Vec2Field {
        Vec2Field::new(
            (0..grid.num_nodes())
                .map(|_| [scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0)])
                .collect(),
        )
    }

    fn random_matrix(grid: &Grid, rng: &mut ChaCha8Rng) -> MatrixField {
        let mut v = MatrixField::zeros(grid);
        v.values.iter_mut().for_each(|x| *x = rng.random_range(-2.0..2.0));
        v
    }

    fn params(p: f64) -> EnergyParams {
        EnergyParams {
            p,
            m: 5.0,
            alpha: 1e-2,
            box_m: 2.0,
        }
    }

    fn data_from(grid: &Grid, fields: &[Vec2Field], sets: &[BoundarySet]) -> MeasurementData {
        let traces = fields.iter().zip(sets).map(|(f, s)| Trace::extract(grid, f, s)).collect();
        MeasurementData::new(grid, sets.to_vec(), traces, 0.0).unwrap()
    }

    #[test]
    fn reg_abs_examples() {
        assert_eq!(reg_abs(&[0.0, 0.0], 2.0).unwrap(), 0.5);
        assert_eq!(reg_abs(&[3.0, 4.0], f64::INFINITY).unwrap(), 5.0);
        assert!((reg_abs(&[3.0, 4.0], 1e12).unwrap() - 5.0).abs() < 1e-12);
        assert!(reg_abs(&[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn dotted_norm_floors_and_constants() {
        let g = Grid::unit_square(7).unwrap();
        let all = BoundarySet::all(&g);
        let side = BoundarySet::select(&g, "x1_max[1..4]").unwrap();
        for p in [2.0, 4.0, 37.5] {
            for set in [&all, &side] {
                let zero = dotted_norm_boundary(&g, &Vec2Field::zeros(&g), set, p).unwrap();
                assert!(close(zero, 1.0 / p, 1e-14));
                let c = dotted_norm_boundary(&g, &Vec2Field::constant(&g, [0.3, -0.4]), set, p).unwrap();
                assert!(close(c, reg_abs(&[0.3, -0.4], p).unwrap(), 1e-14));
            }
            assert!(close(dotted_norm_volume(&g, &MatrixField::zeros(&g), p).unwrap(), 1.0 / p, 1e-14));
            let c = MatrixField::scaled_identity(&g, 0.7);
            let want = reg_abs(&[0.7, 0.0, 0.0, 0.7], p).unwrap();
            assert!(close(dotted_norm_volume(&g, &c, p).unwrap(), want, 1e-14));
        }
        assert!(dotted_norm_boundary(&g, &Vec2Field::zeros(&g), &all, 1.5).is_err());
    }

    #[test]
    fn dotted_norms_match_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for g in [
            Grid::new(&[0.0, 0.0], &[1.0, 2.0], &[6, 9]).unwrap(),
            Grid::new(&[0.0; 3], &[1.0, 0.5, 1.0], &[4, 3, 5]).unwrap(),
        ] {
            let gf = random_vec2(&g, &mut rng, 1.5);
            for sel in ["all", "x0_max", "x1_min+x0_min"] {
                let set = BoundarySet::select(&g, sel).unwrap();
                let p = 4.0;
                let (int, area) =
                    oracle_boundary(&g, &set, |n| reg_abs(&gf.values[n], p).unwrap().powf(p));
                let want = (int / area).powf(1.0 / p);
                assert!(close(dotted_norm_boundary(&g, &gf, &set, p).unwrap(), want, 1e-12));
            }
            let v = random_matrix(&g, &mut rng);
            let m = 4.0;
            let int = oracle_volume(&g, |n| reg_abs(v.at(n), m).unwrap().powf(m));
            let want = (int / g.volume()).powf(1.0 / m);
            assert!(close(dotted_norm_volume(&g, &v, m).unwrap(), want, 1e-12));
        }
    }

    #[test]
    fn large_exponents_do_not_overflow() {
        let g = Grid::unit_square(5).unwrap();
        let f = Vec2Field::from_fn(&g, |x| [1e3 * x[0], 0.0]);
        let all = BoundarySet::all(&g);
        let n = dotted_norm_boundary(&g, &f, &all, 1e4).unwrap();
        assert!(n.is_finite() && n <= 1e3 + 1e-9 && n > 0.99e3);
    }

    #[test]
    fn mu_examples_and_derivative() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.5], &[5, 6]).unwrap();
        let m = 5.0;
        let zero = mu_field(&g, &MatrixField::zeros(&g), m).unwrap();
        assert!(zero.values.iter().all(|&x| x == 0.0));
        let c = MatrixField::scaled_identity(&g, 0.8);
        let mu = mu_field(&g, &c, m).unwrap();
        let rc = reg_abs(c.at(0), m).unwrap();
        for node in 0..g.num_nodes() {
            assert!(close(mu.get(node, 0, 0), 0.8 / (g.volume() * rc), 1e-12));
            assert_eq!(mu.get(node, 0, 1), 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = random_matrix(&g, &mut rng);
        let dir = random_matrix(&g, &mut rng);
        let eps = 1e-5;
        let shifted = |s: f64| {
            let mut x = v.clone();
            x.values.iter_mut().zip(&dir.values).for_each(|(a, b)| *a += s * b);
            dotted_norm_volume(&g, &x, m).unwrap()
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let mu = mu_field(&g, &v, m).unwrap();
        let w = volume_node_weights(&g);
        let pairing: f64 = (0..g.num_nodes())
            .map(|n| w[n] * mu.at(n).iter().zip(dir.at(n)).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        assert!(close(fd, pairing, 1e-7), "{fd} vs {pairing}");
    }

    #[test]
    fn energy_floors() {
        let g = Grid::unit_square(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sets = vec![BoundarySet::all(&g), BoundarySet::select(&g, "x0_min").unwrap()];
        let fields = vec![random_vec2(&g, &mut rng, 1.0), random_vec2(&g, &mut rng, 1.0)];
        let data = data_from(&g, &fields, &sets);
        let xi = ScalarField::zeros(&g);
        for p in [4.0, 8.0, 64.0] {
            let e = energy_p(&g, &data.traces, &xi, &data, &params(p)).unwrap();
            assert!(close(e, 2.0 / p + 1e-2 / 5.0, 1e-12), "{e}");
        }
        let einf = energy_inf(&g, &data.traces, &xi, &data, &params(4.0)).unwrap();
        assert!(close(einf, 1e-2 / 5.0, 1e-12));
        // linear xi has zero Hessian, so the floor persists
        let lin = ScalarField::from_fn(&g, |x| 0.5 + x[0] - 0.3 * x[1]);
        let e = energy_p(&g, &data.traces, &lin, &data, &params(8.0)).unwrap();
        assert!(close(e, 2.0 / 8.0 + 1e-2 / 5.0, 1e-12));
        // alpha enters linearly
        let quad = ScalarField::from_fn(&g, |x| x[0] * x[0]);
        let t1 = energy_terms(&g, &data.traces, &quad, &data, &params(8.0)).unwrap().tikhonov;
        let p2 = EnergyParams {
            alpha: 2e-2,
            ..params(8.0)
        };
        let t2 = energy_terms(&g, &data.traces, &quad, &data, &p2).unwrap().tikhonov;
        assert_eq!(t2, 2.0 * t1);
    }

    #[test]
    fn spike_contributes_its_height_to_e_inf() {
        let g = Grid::unit_square(5).unwrap();
        let set = BoundarySet::all(&g);
        let base = Vec2Field::zeros(&g);
        let data = data_from(&g, std::slice::from_ref(&base), std::slice::from_ref(&set));
        let mut spiked = base.clone();
        spiked.values[g.flat_index(&[4, 2])] = [0.6, 0.8];
        let traces = vec![Trace::extract(&g, &spiked, &set)];
        let xi = ScalarField::zeros(&g);
        let e = energy_inf(&g, &traces, &xi, &data, &params(4.0)).unwrap();
        assert!(close(e, 1.0 + 1e-2 / 5.0, 1e-12));
        assert!(energy_p(&g, &traces, &xi, &data, &params(f64::INFINITY)).is_err());
    }

    #[test]
    fn energy_p_approaches_energy_inf() {
        let g = Grid::unit_square(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let sets = vec![BoundarySet::all(&g); 2];
        let data = data_from(&g, &[random_vec2(&g, &mut rng, 1.0), random_vec2(&g, &mut rng, 1.0)], &sets);
        let model: Vec<Trace> = sets
            .iter()
            .map(|s| Trace::extract(&g, &random_vec2(&g, &mut rng, 1.0), s))
            .collect();
        let xi = ScalarField::from_fn(&g, |x| x[0] * x[1]);
        let einf = energy_inf(&g, &model, &xi, &data, &params(4.0)).unwrap();
        let mut gaps = Vec::new();
        for p in [4.0, 16.0, 64.0, 256.0] {
            let ep = energy_p(&g, &model, &xi, &data, &params(p)).unwrap();
            // averaged norms never exceed the maximum (plus the floor)
            assert!(ep <= einf + 2.0 / p + 1e-12);
            gaps.push(einf - ep);
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(gaps[3].abs() < 0.1 * gaps[0].abs());
    }

    #[test]
    fn nu_examples() {
        let g = Grid::unit_square(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sets = vec![BoundarySet::all(&g), BoundarySet::select(&g, "x0_max+x1_min").unwrap()];
        let fields = vec![random_vec2(&g, &mut rng, 1.0), random_vec2(&g, &mut rng, 1.0)];
        let data = data_from(&g, &fields, &sets);
        let nu = nu_measure(&data.traces, &data, 8.0).unwrap();
        assert_eq!(total_variation(&nu), 0.0);

        let model: Vec<Trace> = sets
            .iter()
            .map(|s| Trace::extract(&g, &random_vec2(&g, &mut rng, 0.5), s))
            .collect();
        let p = 6.0;
        let nu = nu_measure(&model, &data, p).unwrap();
        let dirs: Vec<Vec<[f64; 2]>> = model
            .iter()
            .map(|t| t.values.iter().map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect())
            .collect();
        let misfit = |s: f64| {
            let shifted: Vec<Trace> = model
                .iter()
                .zip(&dirs)
                .map(|(t, d)| Trace {
                    nodes: t.nodes.clone(),
                    values: t.values.iter().zip(d).map(|(a, b)| [a[0] + s * b[0], a[1] + s * b[1]]).collect(),
                })
                .collect();
            energy_terms(&g, &shifted, &ScalarField::zeros(&g), &data, &params(p)).unwrap().misfit_total()
        };
        let eps = 1e-5;
        let fd = (misfit(eps) - misfit(-eps)) / (2.0 * eps);
        assert!(close(fd, nu.pair(&dirs), 1e-7), "{fd} vs {}", nu.pair(&dirs));
    }

    #[test]
    fn tikhonov_gradient_matches_finite_differences() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.2], &[7, 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xi = ScalarField::new((0..g.num_nodes()).map(|_| rng.random_range(0.0..2.0)).collect());
        let pr = params(8.0);
        let grad = tikhonov_gradient(&g, &xi, &pr).unwrap();
        for _ in 0..5 {
            let j = rng.random_range(0..g.num_nodes());
            let eps = 1e-5;
            let at = |s: f64| {
                let mut x = xi.clone();
                x.values[j] += s;
                tikhonov_term(&g, &x, &pr).unwrap()
            };
            let fd = (at(eps) - at(-eps)) / (2.0 * eps);
            assert!((fd - grad.values[j]).abs() <= 1e-6 * grad.max_abs(), "{fd} vs {}", grad.values[j]);
        }
    }

    #[test]
    fn measurement_validation() {
        let g = Grid::unit_square(5).unwrap();
        let all = BoundarySet::all(&g);
        let side = BoundarySet::select(&g, "x0_min").unwrap();
        let t = Trace::extract(&g, &Vec2Field::zeros(&g), &side);
        assert!(MeasurementData::new(&g, vec![all.clone()], vec![t.clone()], 0.0).is_err());
        assert!(MeasurementData::new(&g, vec![side.clone()], vec![t.clone()], -1.0).is_err());
        assert!(MeasurementData::new(&g, vec![side.clone(), all], vec![t], 0.0).is_err());
        assert!(EnergyParams { p: 1.5, ..params(4.0) }.validate().is_err());
        assert!(EnergyParams { m: 1.0, ..params(4.0) }.validate().is_err());
        assert_eq!(params(2.5).warnings(2).len(), 0);
        assert_eq!(params(2.0).warnings(2).len(), 1);
        assert_eq!(EnergyParams { m: 3.0, ..params(5.0) }.warnings(3).len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn total_variation_bounded_by_source_count(
            seed in any::<u64>(),
            p in prop::sample::select(vec![4.0, 16.0, 64.0]),
            n in 1usize..4,
            scale in 1e-3f64..1e3,
        ) {
            let g = Grid::unit_square(6).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sets: Vec<BoundarySet> = ["all", "x0_min", "x1_max[0..3]+x0_max"][..n]
                .iter()
                .map(|s| BoundarySet::select(&g, s).unwrap())
                .collect();
            let fields: Vec<Vec2Field> = (0..n).map(|_| random_vec2(&g, &mut rng, 1.0)).collect();
            let data = data_from(&g, &fields, &sets);
            let model: Vec<Trace> = sets
                .iter()
                .map(|s| Trace::extract(&g, &random_vec2(&g, &mut rng, scale), s))
                .collect();
            let tv = total_variation(&nu_measure(&model, &data, p).unwrap());
            prop_assert!(tv <= n as f64 + 1e-12, "tv = {}", tv);
        }

        #[test]
        fn reg_abs_bounds(w in prop::collection::vec(-1e3f64..1e3, 1..6), p in 2.0f64..1e3) {
            let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = reg_abs(&w, p).unwrap();
            prop_assert!(n <= r && r <= n + 1.0 / p + 1e-12);
            prop_assert!(r >= 1.0 / p);
        }

        #[test]
        fn power_mean_monotone(seed in any::<u64>(), q in 2.0f64..20.0, extra in 0.0f64..50.0) {
            let g = Grid::unit_square(5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_vec2(&g, &mut rng, 2.0);
            let (nodes, w) = surface_node_weights(&g, &BoundarySet::all(&g));
            let p = q + extra;
            // same regularisation |.|_(p), two averaging exponents
            let regs: Vec<f64> = nodes.iter().map(|&n| reg_abs(&f.values[n], p).unwrap()).collect();
            let mean = |e: f64| (regs.iter().zip(&w).map(|(r, wj)| wj * r.powf(e)).sum::<f64>() / w.iter().sum::<f64>()).powf(1.0 / e);
            prop_assert!(mean(q) <= mean(p) * (1.0 + 1e-12));
        }
    }
}
