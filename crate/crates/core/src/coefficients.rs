//! PDE coefficients of the coupled excitation/emission system.
//!
//! The fluorophore concentration `xi` enters through
//!
//! ```text
//! A_xi = A + r(x, xi) I_n,   r(x, t) = lambda / (kappa(x) + t)
//! K_xi = K + xi I_2
//! ```
//!
//! while complex coefficients `k = k_R + i k_I` act on `R^2` through the
//! rotation form `[[k_R, -k_I], [k_I, k_R]]`.

use crate::error::{Error, Result};
use crate::grid::{Grid, MatrixField, ScalarField};

/// A real 2x2 block, row-major.
pub type Block2 = [[f64; 2]; 2];

pub fn block_apply(b: &Block2, w: [f64; 2]) -> [f64; 2] {
    [b[0][0] * w[0] + b[0][1] * w[1], b[1][0] * w[0] + b[1][1] * w[1]]
}

pub fn block_transpose(b: &Block2) -> Block2 {
    [[b[0][0], b[1][0]], [b[0][1], b[1][1]]]
}

/// Nodal field of 2x2 blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Block2Field {
    pub values: Vec<Block2>,
}

impl Block2Field {
    pub fn scaled_identity(grid: &Grid, c: f64) -> Self {
        Block2Field {
            values: vec![[[c, 0.0], [0.0, c]]; grid.num_nodes()],
        }
    }

    /// Nodewise `s(x) * self(x)`.
    pub fn scaled_by(&self, s: &ScalarField) -> Self {
        Block2Field {
            values: self
                .values
                .iter()
                .zip(&s.values)
                .map(|(b, &c)| [[c * b[0][0], c * b[0][1]], [c * b[1][0], c * b[1][1]]])
                .collect(),
        }
    }
}

/// A complex coefficient stored as its real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCoeff {
    pub re: ScalarField,
    pub im: ScalarField,
}

impl ComplexCoeff {
    pub fn constant(grid: &Grid, re: f64, im: f64) -> Self {
        ComplexCoeff {
            re: ScalarField::constant(grid, re),
            im: ScalarField::constant(grid, im),
        }
    }

    pub fn block(&self, node: usize) -> Block2 {
        let (r, i) = (self.re.values[node], self.im.values[node]);
        [[r, -i], [i, r]]
    }

    pub fn blocks(&self) -> Block2Field {
        Block2Field {
            values: (0..self.re.len()).map(|n| self.block(n)).collect(),
        }
    }

    pub fn apply(&self, node: usize, w: [f64; 2]) -> [f64; 2] {
        block_apply(&self.block(node), w)
    }
}

/// Extreme eigenvalues of a symmetric 2x2 or 3x3 matrix (row-major).
pub fn symmetric_eigen_bounds(dim: usize, m: &[f64]) -> (f64, f64) {
    match dim {
        1 => (m[0], m[0]),
        2 => {
            let mean = 0.5 * (m[0] + m[3]);
            let rad = (0.5 * (m[0] - m[3])).hypot(m[1]);
            (mean - rad, mean + rad)
        }
        3 => {
            let (a, b, c) = (m[0], m[4], m[8]);
            let (d, e, f) = (m[1], m[5], m[2]);
            let p1 = d * d + e * e + f * f;
            let q = (a + b + c) / 3.0;
            let p2 = (a - q).powi(2) + (b - q).powi(2) + (c - q).powi(2) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            if p < 1e-300 {
                return (q, q);
            }
            let (ba, bb, bc) = ((a - q) / p, (b - q) / p, (c - q) / p);
            let (bd, be, bf) = (d / p, e / p, f / p);
            let det = ba * (bb * bc - be * be) - bd * (bd * bc - be * bf) + bf * (bd * be - bb * bf);
            let phi = (0.5 * det).clamp(-1.0, 1.0).acos() / 3.0;
            let largest = q + 2.0 * p * phi.cos();
            let smallest = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            (smallest, largest)
        }
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// The `xi`-dependent diffusion `A + lambda / (kappa + xi) I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionCoeff {
    a: MatrixField,
    lambda: f64,
    kappa: ScalarField,
    beta0: f64,
}

impl DiffusionCoeff {
    /// Validates the data and records `beta0` such that every admissible
    /// `A_xi` (with `0 <= xi <= box_m`) has spectrum in `[beta0, 1/beta0]`.
    pub fn new(
        grid: &Grid,
        a: MatrixField,
        lambda: f64,
        kappa: ScalarField,
        a0: f64,
        box_m: f64,
    ) -> Result<Self> {
        a.check(grid, "A")?;
        kappa.check(grid, "kappa")?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter {
                name: "lambda",
                value: lambda,
                reason: "must be positive",
            });
        }
        let d = grid.dim();
        let mut lower = f64::INFINITY;
        let mut upper: f64 = 0.0;
        for node in 0..grid.num_nodes() {
            let m = a.at(node);
            for r in 0..d {
                for c in r + 1..d {
                    let (x, y) = (m[r * d + c], m[c * d + r]);
                    if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                        return Err(Error::Coefficient(format!("A is not symmetric at node {node}")));
                    }
                }
            }
            let (lo, hi) = symmetric_eigen_bounds(d, m);
            if lo < -1e-14 {
                return Err(Error::Coefficient(format!(
                    "A has negative eigenvalue {lo} at node {node}"
                )));
            }
            let k = kappa.values[node];
            if k < a0 {
                return Err(Error::Coefficient(format!(
                    "kappa = {k} below a0 = {a0} at node {node}"
                )));
            }
            lower = lower.min(lo + lambda / (k + box_m));
            upper = upper.max(hi + lambda / k);
        }
        Ok(DiffusionCoeff {
            a,
            lambda,
            kappa,
            beta0: lower.min(1.0 / upper),
        })
    }

    pub fn a(&self) -> &MatrixField {
        &self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kappa(&self) -> &ScalarField {
        &self.kappa
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }
}

/// `r(x, t) = lambda / (kappa(x) + t)`.
pub fn eval_r(node: usize, t: f64, diffusion: &DiffusionCoeff) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Parameter {
            name: "t",
            value: t,
            reason: "r(x, t) needs t >= 0",
        });
    }
    Ok(diffusion.lambda / (diffusion.kappa.values[node] + t))
}

/// `d r / d t = -lambda / (kappa(x) + t)^2`.
pub fn eval_r_dot(node: usize, t: f64, diffusion: &DiffusionCoeff) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Parameter {
            name: "t",
            value: t,
            reason: "r(x, t) needs t >= 0",
        });
    }
    let s = diffusion.kappa.values[node] + t;
    Ok(-diffusion.lambda / (s * s))
}

pub(crate) fn check_box(xi: &ScalarField, box_m: f64) -> Result<()> {
    if let Some((node, v)) = xi
        .values
        .iter()
        .enumerate()
        .find(|(_, &v)| !(0.0..=box_m).contains(&v))
    {
        return Err(Error::Coefficient(format!(
            "xi = {v} at node {node} is outside [0, {box_m}]"
        )));
    }
    Ok(())
}

/// Nodal `A_xi = A + r(., xi) I`.
pub fn assemble_a_xi(diffusion: &DiffusionCoeff, xi: &ScalarField, box_m: f64) -> Result<MatrixField> {
    check_box(xi, box_m)?;
    let mut out = diffusion.a.clone();
    let d = out.dim();
    for (node, &t) in xi.values.iter().enumerate() {
        let r = eval_r(node, t, diffusion)?;
        let m = out.at_mut(node);
        for k in 0..d {
            m[k * d + k] += r;
        }
    }
    Ok(out)
}

/// Nodal `r_dot(., xi)`.
pub fn r_dot_field(diffusion: &DiffusionCoeff, xi: &ScalarField) -> Result<ScalarField> {
    Ok(ScalarField::new(
        xi.values
            .iter()
            .enumerate()
            .map(|(n, &t)| eval_r_dot(n, t, diffusion))
            .collect::<Result<_>>()?,
    ))
}

/// Nodal `K_xi = K + xi I_2`.
pub fn assemble_k_xi(k: &ComplexCoeff, xi: &ScalarField) -> Result<Block2Field> {
    if let Some(i) = xi.values.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Coefficient(format!("xi must be non-negative, node {i}")));
    }
    Ok(Block2Field {
        values: xi
            .values
            .iter()
            .enumerate()
            .map(|(n, &x)| {
                let mut b = k.block(n);
                b[0][0] += x;
                b[1][1] += x;
                b
            })
            .collect(),
    })
}

/// Full coefficient tuple of the forward problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemCoefficients {
    pub diffusion: DiffusionCoeff,
    pub k: ComplexCoeff,
    pub h: ComplexCoeff,
    pub gamma: f64,
    pub box_m: f64,
    pub a0: f64,
}

impl ProblemCoefficients {
    pub fn new(
        grid: &Grid,
        diffusion: DiffusionCoeff,
        k: ComplexCoeff,
        h: ComplexCoeff,
        gamma: f64,
        box_m: f64,
        a0: f64,
    ) -> Result<Self> {
        for (name, value) in [("gamma", gamma), ("box_m", box_m), ("a0", a0)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter {
                    name,
                    value,
                    reason: "must be positive",
                });
            }
        }
        for (what, f) in [("k_R", &k.re), ("k_I", &k.im), ("h_R", &h.re), ("h_I", &h.im)] {
            f.check(grid, what)?;
        }
        if let Some(n) = k.re.values.iter().position(|&v| v < a0) {
            return Err(Error::Coefficient(format!(
                "k_R = {} below a0 = {a0} at node {n}",
                k.re.values[n]
            )));
        }
        Ok(ProblemCoefficients {
            diffusion,
            k,
            h,
            gamma,
            box_m,
            a0,
        })
    }

    /// Constant isotropic coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        grid: &Grid,
        a: f64,
        lambda: f64,
        kappa: f64,
        k: (f64, f64),
        h: (f64, f64),
        gamma: f64,
        box_m: f64,
        a0: f64,
    ) -> Result<Self> {
        let diffusion = DiffusionCoeff::new(
            grid,
            MatrixField::scaled_identity(grid, a),
            lambda,
            ScalarField::constant(grid, kappa),
            a0,
            box_m,
        )?;
        Self::new(
            grid,
            diffusion,
            ComplexCoeff::constant(grid, k.0, k.1),
            ComplexCoeff::constant(grid, h.0, h.1),
            gamma,
            box_m,
            a0,
        )
    }

    /// Lower bound for the real part of the bilinear form:
    /// `min(beta0, a0)`.
    pub fn coercivity(&self) -> f64 {
        self.diffusion.beta0.min(self.a0)
    }
}

/// Floor added to the preset's diffusion matrix so that `A` keeps a
/// strictly positive spectrum.
pub const PRESET_DIFFUSION_FLOOR: f64 = 1e-8;

/// Tissue optics for the biomedical preset.
#[derive(Debug, Clone, PartialEq)]
pub struct BiomedicalOptics {
    /// Endogenous absorption `mu_ai`.
    pub mu_a: ScalarField,
    /// Reduced scattering `mu_s'`.
    pub mu_s: ScalarField,
    /// Modulation frequency.
    pub omega: f64,
    /// Speed of light in the medium.
    pub light_speed: f64,
    /// Fluorophore quantum efficiency `phi_q`.
    pub quantum_efficiency: f64,
    /// Fluorophore lifetime `tau`.
    pub lifetime: ScalarField,
}

/// Maps tissue optics onto the generic coefficients:
///
/// * `A_xi = (3 (mu_a + mu_s + xi))^{-1} I`, realised as `A = eps I`,
///   `lambda = 1/3`, `kappa = mu_a + mu_s`;
/// * `k = mu_a + i omega / c`;
/// * `h = phi_q / (1 - i omega tau)`.
pub fn preset_biomedical(
    grid: &Grid,
    optics: &BiomedicalOptics,
    gamma: f64,
    box_m: f64,
) -> Result<ProblemCoefficients> {
    optics.mu_a.check(grid, "mu_a")?;
    optics.mu_s.check(grid, "mu_s")?;
    optics.lifetime.check(grid, "tau")?;
    if optics.mu_a.values.iter().chain(&optics.mu_s.values).any(|&v| v <= 0.0) {
        return Err(Error::Coefficient("optical coefficients must be positive".into()));
    }
    if optics.lifetime.values.iter().any(|&v| v < 0.0) {
        return Err(Error::Coefficient("lifetime must be non-negative".into()));
    }
    if !(optics.omega >= 0.0) {
        return Err(Error::Parameter {
            name: "omega",
            value: optics.omega,
            reason: "must be non-negative",
        });
    }
    if !(optics.light_speed > 0.0) {
        return Err(Error::Parameter {
            name: "light_speed",
            value: optics.light_speed,
            reason: "must be positive",
        });
    }
    if !(0.0..=1.0).contains(&optics.quantum_efficiency) {
        return Err(Error::Parameter {
            name: "quantum_efficiency",
            value: optics.quantum_efficiency,
            reason: "must lie in [0, 1]",
        });
    }
    let a0 = optics.mu_a.values.iter().copied().fold(f64::INFINITY, f64::min);
    let kappa = ScalarField::new(
        optics
            .mu_a
            .values
            .iter()
            .zip(&optics.mu_s.values)
            .map(|(a, s)| a + s)
            .collect(),
    );
    let diffusion = DiffusionCoeff::new(
        grid,
        MatrixField::scaled_identity(grid, PRESET_DIFFUSION_FLOOR),
        1.0 / 3.0,
        kappa,
        a0,
        box_m,
    )?;
    let k = ComplexCoeff {
        re: optics.mu_a.clone(),
        im: ScalarField::constant(grid, optics.omega / optics.light_speed),
    };
    let (mut h_re, mut h_im) = (Vec::new(), Vec::new());
    for &tau in &optics.lifetime.values {
        let wt = optics.omega * tau;
        let den = 1.0 + wt * wt;
        h_re.push(optics.quantum_efficiency / den);
        h_im.push(optics.quantum_efficiency * wt / den);
    }
    let h = ComplexCoeff {
        re: ScalarField::new(h_re),
        im: ScalarField::new(h_im),
    };
    ProblemCoefficients::new(grid, diffusion, k, h, gamma, box_m, a0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::unit_square(3).unwrap()
    }

    fn diffusion(lambda: f64, kappa: f64) -> DiffusionCoeff {
        let g = grid();
        DiffusionCoeff::new(
            &g,
            MatrixField::scaled_identity(&g, 1.0),
            lambda,
            ScalarField::constant(&g, kappa),
            0.1,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn r_and_r_dot_values() {
        assert_eq!(eval_r(0, 0.0, &diffusion(1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(eval_r(0, 1.0, &diffusion(2.0, 1.0)).unwrap(), 1.0);
        assert_eq!(eval_r_dot(0, 0.0, &diffusion(1.0, 2.0)).unwrap(), -0.25);
        assert_eq!(eval_r_dot(0, 1.0, &diffusion(1.0, 1.0)).unwrap(), -0.25);
        assert!(eval_r(0, -1e-3, &diffusion(1.0, 1.0)).is_err());
        assert!(eval_r_dot(0, -1.0, &diffusion(1.0, 1.0)).is_err());
    }

    #[test]
    fn r_decays_monotonically() {
        let d = diffusion(1.0, 1.0);
        let mut prev = f64::INFINITY;
        for t in [0.0, 1.0, 10.0, 1e3, 1e6, 1e12] {
            let r = eval_r(0, t, &d).unwrap();
            assert!(r > 0.0 && r < prev && r <= 1.0 / 0.1);
            prev = r;
        }
        assert!(prev < 1e-11);
    }

    #[test]
    fn r_dot_matches_finite_differences() {
        let d = diffusion(1.3, 0.7);
        for t in [0.5, 1.0, 2.0] {
            let step = 1e-4;
            let fd = (eval_r(0, t + step, &d).unwrap() - eval_r(0, t - step, &d).unwrap()) / (2.0 * step);
            let exact = eval_r_dot(0, t, &d).unwrap();
            assert!((fd - exact).abs() < 1e-8, "t = {t}: {fd} vs {exact}");
        }
    }

    #[test]
    fn a_xi_examples() {
        let g = grid();
        let d = diffusion(1.0, 1.0);
        let a = assemble_a_xi(&d, &ScalarField::zeros(&g), 10.0).unwrap();
        for n in 0..g.num_nodes() {
            assert_eq!(a.at(n), &[2.0, 0.0, 0.0, 2.0]);
        }
        let big = 1e6;
        let d = DiffusionCoeff::new(
            &g,
            MatrixField::scaled_identity(&g, 1.0),
            1.0,
            ScalarField::constant(&g, 1.0),
            0.5,
            big,
        )
        .unwrap();
        let a = assemble_a_xi(&d, &ScalarField::constant(&g, big), big).unwrap();
        assert!((a.get(0, 0, 0) - 1.0).abs() <= 1.0 / (0.5 + big));
        assert!(assemble_a_xi(&d, &ScalarField::constant(&g, -1.0), big).is_err());
    }

    #[test]
    fn a_xi_keeps_spectrum_above_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Grid::new(&[0.0; 3], &[1.0; 3], &[3, 3, 3]).unwrap();
        let mut a = MatrixField::zeros(&g);
        for n in 0..g.num_nodes() {
            let b = DMatrix::<f64>::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let spd = &b * b.transpose() + DMatrix::identity(3, 3) * 0.05;
            a.at_mut(n).copy_from_slice(spd.as_slice());
        }
        let kappa = ScalarField::new((0..g.num_nodes()).map(|_| rng.random_range(0.5..2.0)).collect());
        let d = DiffusionCoeff::new(&g, a.clone(), 0.8, kappa, 0.5, 4.0).unwrap();
        let xi = ScalarField::new((0..g.num_nodes()).map(|_| rng.random_range(0.0..4.0)).collect());
        let axi = assemble_a_xi(&d, &xi, 4.0).unwrap();
        for n in 0..g.num_nodes() {
            let e0 = SymmetricEigen::new(DMatrix::from_row_slice(3, 3, a.at(n))).eigenvalues.min();
            let e1 = SymmetricEigen::new(DMatrix::from_row_slice(3, 3, axi.at(n))).eigenvalues;
            assert!(e1.min() >= e0);
            assert!(e1.min() >= d.beta0() - 1e-12 && e1.max() <= 1.0 / d.beta0() + 1e-12);
        }
    }

    #[test]
    fn eigen_bounds_match_reference_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2, 3] {
            for _ in 0..200 {
                let b = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.random_range(-2.0..2.0));
                let s = &b + b.transpose();
                let (lo, hi) = symmetric_eigen_bounds(dim, s.as_slice());
                let eig = SymmetricEigen::new(s).eigenvalues;
                assert!((lo - eig.min()).abs() < 1e-9 && (hi - eig.max()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn k_xi_examples() {
        let g = grid();
        let k = ComplexCoeff::constant(&g, 1.0, 0.0);
        assert_eq!(assemble_k_xi(&k, &ScalarField::zeros(&g)).unwrap().values[4], [[1.0, 0.0], [0.0, 1.0]]);
        let k = ComplexCoeff::constant(&g, 1.0, 2.0);
        let kx = assemble_k_xi(&k, &ScalarField::constant(&g, 3.0)).unwrap();
        assert_eq!(kx.values[0], [[4.0, -2.0], [2.0, 4.0]]);
        assert!(assemble_k_xi(&k, &ScalarField::constant(&g, -0.1)).is_err());
    }

    proptest! {
        #[test]
        fn rotation_form_is_complex_multiplication(hr in -5.0f64..5.0, hi in -5.0f64..5.0, w0 in -5.0f64..5.0, w1 in -5.0f64..5.0) {
            let g = grid();
            let h = ComplexCoeff::constant(&g, hr, hi);
            let got = h.apply(0, [w0, w1]);
            prop_assert_eq!(got, [hr * w0 - hi * w1, hi * w0 + hr * w1]);
        }

        #[test]
        fn k_xi_quadratic_form(kr in 0.1f64..5.0, ki in -5.0f64..5.0, x in 0.0f64..3.0, w0 in -5.0f64..5.0, w1 in -5.0f64..5.0) {
            let g = grid();
            let kx = assemble_k_xi(&ComplexCoeff::constant(&g, kr, ki), &ScalarField::constant(&g, x)).unwrap();
            let kw = block_apply(&kx.values[0], [w0, w1]);
            let form = kw[0] * w0 + kw[1] * w1;
            let expect = (kr + x) * (w0 * w0 + w1 * w1);
            prop_assert!((form - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    fn optics(g: &Grid, omega: f64, tau: f64, phi: f64, mu: f64) -> BiomedicalOptics {
        BiomedicalOptics {
            mu_a: ScalarField::constant(g, mu),
            mu_s: ScalarField::constant(g, mu),
            omega,
            light_speed: 1.0,
            quantum_efficiency: phi,
            lifetime: ScalarField::constant(g, tau),
        }
    }

    #[test]
    fn biomedical_zero_frequency() {
        let g = grid();
        let c = preset_biomedical(&g, &optics(&g, 0.0, 2.0, 0.4, 0.2), 0.5, 1.0).unwrap();
        assert!(c.k.im.values.iter().all(|&v| v == 0.0));
        assert!(c.h.re.values.iter().all(|&v| v == 0.4));
        assert!(c.h.im.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn biomedical_identity_diffusion() {
        let g = grid();
        let c = preset_biomedical(&g, &optics(&g, 0.0, 0.0, 1.0, 1.0 / 6.0), 0.5, 1.0).unwrap();
        let a = assemble_a_xi(&c.diffusion, &ScalarField::zeros(&g), 1.0).unwrap();
        for n in 0..g.num_nodes() {
            assert!((a.get(n, 0, 0) - 1.0).abs() <= PRESET_DIFFUSION_FLOOR + 1e-15);
            assert!((a.get(n, 1, 1) - 1.0).abs() <= PRESET_DIFFUSION_FLOOR + 1e-15);
            assert_eq!(a.get(n, 0, 1), 0.0);
        }
        // and it tracks (3 (mu_a + mu_s + xi))^{-1} for other xi
        let xi = ScalarField::constant(&g, 0.7);
        let a = assemble_a_xi(&c.diffusion, &xi, 1.0).unwrap();
        let expect = 1.0 / (3.0 * (1.0 / 3.0 + 0.7));
        assert!((a.get(0, 0, 0) - expect).abs() <= PRESET_DIFFUSION_FLOOR + 1e-15);
    }

    #[test]
    fn biomedical_h_from_lifetime() {
        let g = grid();
        let c = preset_biomedical(&g, &optics(&g, 1.0, 1.0, 1.0, 0.1), 0.5, 1.0).unwrap();
        assert!((c.h.re.values[0] - 0.5).abs() < 1e-15);
        assert!((c.h.im.values[0] - 0.5).abs() < 1e-15);
        assert!(preset_biomedical(&g, &optics(&g, 1.0, 1.0, 1.0, 0.0), 0.5, 1.0).is_err());
        assert!(preset_biomedical(&g, &optics(&g, 1.0, 1.0, 1.5, 0.1), 0.5, 1.0).is_err());
    }
}
