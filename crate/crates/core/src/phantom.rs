//! Synthetic ground truth: blob phantoms, source presets and noisy data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::MeasurementData;
use crate::grid::{BoundarySet, Grid, ScalarField, Vec2Field};
use crate::robin::{ForwardModel, SourceTerm, Trace};

/// Generator stream reserved for measurement noise.
pub const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `a exp(-|x - c|^2 / r^2)`.
    #[default]
    Gaussian,
    /// `a s(1 - |x - c| / r)` with the cubic smoothstep `s`; compact support.
    Smoothstep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blob {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub blobs: Vec<Blob>,
    pub background: f64,
    pub profile: Profile,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl PhantomSpec {
    pub fn validate(&self, dim: usize, box_m: f64) -> Result<()> {
        if !(self.background >= 0.0 && self.background <= box_m) {
            return Err(Error::Parameter {
                name: "phantom.background",
                value: self.background,
                reason: "must lie in [0, M]",
            });
        }
        for b in &self.blobs {
            if b.center.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "blob center has {} coordinates on a {dim}-d grid",
                    b.center.len()
                )));
            }
            if !(b.radius > 0.0 && b.radius.is_finite()) {
                return Err(Error::Parameter {
                    name: "phantom.blobs.radius",
                    value: b.radius,
                    reason: "must be positive",
                });
            }
            if !(b.amplitude >= 0.0 && b.amplitude <= box_m) {
                return Err(Error::Parameter {
                    name: "phantom.blobs.amplitude",
                    value: b.amplitude,
                    reason: "must lie in [0, M]",
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.blobs.iter().fold(self.background, |acc, b| {
            let d2: f64 = x.iter().zip(&b.center).map(|(a, c)| (a - c).powi(2)).sum();
            let v = match self.profile {
                Profile::Gaussian => b.amplitude * (-d2 / (b.radius * b.radius)).exp(),
                Profile::Smoothstep => b.amplitude * smoothstep(1.0 - d2.sqrt() / b.radius),
            };
            acc.max(v)
        })
    }
}

/// Nodal phantom: pointwise max of background and blobs, clamped to `[0, M]`.
pub fn make_phantom(grid: &Grid, spec: &PhantomSpec, box_m: f64) -> Result<ScalarField> {
    spec.validate(grid.dim(), box_m)?;
    Ok(ScalarField::from_fn(grid, |x| spec.eval(x).clamp(0.0, box_m)))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InteriorSource {
    #[default]
    Off,
    /// `a exp(-|x - c|^2 / width^2)`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundarySource {
    #[default]
    Off,
    /// Constant `amplitude` on the faces named by `selector`.
    Side { selector: String, amplitude: [f64; 2] },
}

fn default_measure() -> String {
    "all".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default)]
    pub interior: InteriorSource,
    #[serde(default)]
    pub boundary: BoundarySource,
    /// Measurement set selector.
    #[serde(default = "default_measure")]
    pub measure: String,
}

impl SourceSpec {
    /// Excitation loads and the measurement set on `grid`.
    pub fn build(&self, grid: &Grid) -> Result<(SourceTerm, BoundarySet)> {
        let interior = match &self.interior {
            InteriorSource::Off => Vec2Field::zeros(grid),
            InteriorSource::Gaussian {
                center,
                width,
                amplitude,
            } => {
                if center.len() != grid.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "source center has {} coordinates on a {}-d grid",
                        center.len(),
                        grid.dim()
                    )));
                }
                if !(*width > 0.0) {
                    return Err(Error::Parameter {
                        name: "sources.interior.width",
                        value: *width,
                        reason: "must be positive",
                    });
                }
                Vec2Field::from_fn(grid, |x| {
                    let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                    let e = (-d2 / (width * width)).exp();
                    [amplitude[0] * e, amplitude[1] * e]
                })
            }
        };
        let (boundary, support) = match &self.boundary {
            BoundarySource::Off => (Vec2Field::zeros(grid), BoundarySet::all(grid)),
            BoundarySource::Side { selector, amplitude } => {
                (Vec2Field::constant(grid, *amplitude), BoundarySet::select(grid, selector)?)
            }
        };
        let term = SourceTerm {
            interior,
            boundary,
            support,
        };
        if term.is_zero() {
            return Err(Error::arg("every source needs a nonzero interior or boundary part"));
        }
        Ok((term, BoundarySet::select(grid, &self.measure)?))
    }
}

/// Sources and measurement sets for a list of specs.
pub fn build_sources(grid: &Grid, specs: &[SourceSpec]) -> Result<(Vec<SourceTerm>, Vec<BoundarySet>)> {
    if specs.is_empty() {
        return Err(Error::Config("at least one source is required".into()));
    }
    Ok(specs.iter().map(|s| s.build(grid)).collect::<Result<Vec<_>>>()?.into_iter().unzip())
}

/// Adds componentwise Gaussian noise of standard deviation
/// `delta * max_i max |v_i|` to every trace.
pub fn add_noise(traces: &mut [Trace], delta: f64, seed: u64) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Parameter {
            name: "noise.delta",
            value: delta,
            reason: "must be non-negative",
        });
    }
    let sigma = delta * traces.iter().fold(0.0f64, |m, t| m.max(t.max_norm()));
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    for t in traces.iter_mut() {
        for v in &mut t.values {
            v[0] += normal.sample(&mut rng);
            v[1] += normal.sample(&mut rng);
        }
    }
    Ok(sigma)
}

/// Runs the forward model at `xi_true` and perturbs the emission traces.
pub fn synth_data(model: &ForwardModel, xi_true: &ScalarField, delta: f64, seed: u64) -> Result<MeasurementData> {
    let mut traces = model.forward(xi_true)?.traces;
    add_noise(&mut traces, delta, seed)?;
    MeasurementData::new(&model.grid, model.measurements.clone(), traces, delta)
}

/// Like [`synth_data`], but solves on `fine` (which must be `grid.refined()`
/// with matching measurement selectors) and restricts the traces to the
/// nodes of `grid`.
pub fn synth_data_refined(
    grid: &Grid,
    fine: &ForwardModel,
    xi_true_fine: &ScalarField,
    delta: f64,
    seed: u64,
) -> Result<MeasurementData> {
    if fine.grid != grid.refined() {
        return Err(Error::arg("data grid must be the refinement of the reconstruction grid"));
    }
    let state = fine.forward(xi_true_fine)?;
    let mut sets = Vec::with_capacity(fine.num_sources());
    let mut traces = Vec::with_capacity(fine.num_sources());
    for (set_fine, trace_fine) in fine.measurements.iter().zip(&state.traces) {
        let set = BoundarySet::select(grid, set_fine.selector())?;
        let nodes = set.nodes(grid);
        let values = nodes
            .iter()
            .map(|&n| {
                let f = grid.node_in_refined(&fine.grid, n);
                let k = trace_fine
                    .nodes
                    .binary_search(&f)
                    .map_err(|_| Error::arg(format!("coarse node {n} missing from the fine measurement set")))?;
                Ok(trace_fine.values[k])
            })
            .collect::<Result<_>>()?;
        traces.push(Trace { nodes, values });
        sets.push(set);
    }
    add_noise(&mut traces, delta, seed)?;
    MeasurementData::new(grid, sets, traces, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ProblemCoefficients;
    use crate::robin::SolverConfig;

    fn blob(c: &[f64], r: f64, a: f64) -> Blob {
        Blob {
            center: c.to_vec(),
            radius: r,
            amplitude: a,
        }
    }

    fn two_sources() -> Vec<SourceSpec> {
        ["x0_min", "x0_max"]
            .iter()
            .map(|s| SourceSpec {
                interior: InteriorSource::Off,
                boundary: BoundarySource::Side {
                    selector: s.to_string(),
                    amplitude: [1.0, 0.0],
                },
                measure: "all".into(),
            })
            .collect()
    }

    fn model(g: &Grid) -> ForwardModel {
        let co = ProblemCoefficients::uniform(g, 0.05, 0.3, 1.0, (0.3, 0.2), (1.0, 0.3), 0.5, 2.0, 0.2).unwrap();
        let (s, m) = build_sources(g, &two_sources()).unwrap();
        ForwardModel::new(g.clone(), co, s, m, SolverConfig::default()).unwrap()
    }

    #[test]
    fn phantom_examples() {
        let g = Grid::unit_square(9).unwrap();
        assert_eq!(make_phantom(&g, &PhantomSpec::default(), 2.0).unwrap(), ScalarField::zeros(&g));

        let one = PhantomSpec {
            blobs: vec![blob(&[0.5, 0.5], 0.2, 2.0)],
            ..Default::default()
        };
        let xi = make_phantom(&g, &one, 2.0).unwrap();
        let center = g.flat_index(&[4, 4]);
        assert_eq!(xi.values[center], 2.0);
        assert!(xi.values.iter().enumerate().all(|(j, &v)| j == center || v < 2.0));

        let two = PhantomSpec {
            blobs: vec![blob(&[0.25, 0.25], 0.1, 1.0), blob(&[0.75, 0.75], 0.1, 1.5)],
            background: 0.1,
            profile: Profile::Smoothstep,
        };
        let xi = make_phantom(&g, &two, 2.0).unwrap();
        assert_eq!(xi.values[g.flat_index(&[2, 2])], 1.0);
        assert_eq!(xi.values[g.flat_index(&[6, 6])], 1.5);
        assert_eq!(xi.values[g.flat_index(&[0, 8])], 0.1);
        assert!(xi.values.iter().all(|v| (0.1..=1.5).contains(v)));

        let bad = PhantomSpec {
            blobs: vec![blob(&[0.5, 0.5], 0.2, 2.5)],
            ..Default::default()
        };
        assert!(make_phantom(&g, &bad, 2.0).is_err());
        let bad = PhantomSpec {
            blobs: vec![blob(&[0.5], 0.2, 1.0)],
            ..Default::default()
        };
        assert!(make_phantom(&g, &bad, 2.0).is_err());
    }

    #[test]
    fn sources_need_a_nonzero_part() {
        let g = Grid::unit_square(5).unwrap();
        let off = SourceSpec {
            interior: InteriorSource::Off,
            boundary: BoundarySource::Off,
            measure: "all".into(),
        };
        assert!(off.build(&g).is_err());
        let interior = SourceSpec {
            interior: InteriorSource::Gaussian {
                center: vec![0.5, 0.5],
                width: 0.2,
                amplitude: [1.0, 0.5],
            },
            ..off
        };
        let (t, m) = interior.build(&g).unwrap();
        assert_eq!(t.interior.values[g.flat_index(&[2, 2])], [1.0, 0.5]);
        assert_eq!(m.nodes(&g).len(), 16);
    }

    #[test]
    fn noise_free_data_is_the_exact_trace() {
        let g = Grid::unit_square(9).unwrap();
        let m = model(&g);
        let xi = ScalarField::constant(&g, 0.7);
        let data = synth_data(&m, &xi, 0.0, 5).unwrap();
        assert_eq!(data.traces, m.forward(&xi).unwrap().traces);
        let zero = synth_data(&m, &ScalarField::zeros(&g), 0.1, 5).unwrap();
        assert!(zero.traces.iter().flat_map(|t| &t.values).all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn noise_is_seeded_and_scaled() {
        let g = Grid::unit_square(17).unwrap();
        let m = model(&g);
        let xi = ScalarField::constant(&g, 0.7);
        let exact = m.forward(&xi).unwrap().traces;
        let scale = exact.iter().fold(0.0f64, |a, t| a.max(t.max_norm()));
        let a = synth_data(&m, &xi, 0.05, 11).unwrap();
        assert_eq!(a.traces, synth_data(&m, &xi, 0.05, 11).unwrap().traces);
        assert_ne!(a.traces, synth_data(&m, &xi, 0.05, 12).unwrap().traces);

        let mut sum2 = 0.0;
        let mut count = 0.0;
        for seed in 0..8 {
            let d = synth_data(&m, &xi, 0.05, seed).unwrap();
            for (t, e) in d.traces.iter().zip(&exact) {
                for (v, w) in t.values.iter().zip(&e.values) {
                    sum2 += (v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2);
                    count += 2.0;
                }
            }
        }
        let sd = (sum2 / count).sqrt();
        assert!((sd / (0.05 * scale) - 1.0).abs() < 0.1, "sd {sd} vs {}", 0.05 * scale);
    }

    #[test]
    fn refined_data_differs_but_stays_close() {
        let g = Grid::unit_square(9).unwrap();
        let spec = PhantomSpec {
            blobs: vec![blob(&[0.4, 0.6], 0.25, 1.5)],
            ..Default::default()
        };
        let coarse = model(&g);
        let fine = model(&g.refined());
        let same = synth_data(&coarse, &make_phantom(&g, &spec, 2.0).unwrap(), 0.0, 0).unwrap();
        let refined =
            synth_data_refined(&g, &fine, &make_phantom(&fine.grid, &spec, 2.0).unwrap(), 0.0, 0).unwrap();
        assert_eq!(refined.traces[0].nodes, same.traces[0].nodes);
        assert_ne!(refined.traces, same.traces);
        for (a, b) in refined.traces.iter().zip(&same.traces) {
            let diff = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x[0] - y[0]).hypot(x[1] - y[1])));
            assert!(diff < 0.1 * b.max_norm());
        }
        assert!(synth_data_refined(&g, &coarse, &ScalarField::zeros(&g), 0.0, 0).is_err());
    }
}
