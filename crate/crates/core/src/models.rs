//! Full-order Hamiltonian models.
//!
//! A model supplies `H(y; μ)`, its gradient and Hessian, an optional
//! Rayleigh dissipation block `f_H`, and, for non-canonical systems, a
//! constant invertible skew structure matrix replacing `J_2n`. The zoo holds
//! periodic 1D wave discretizations; [`QuadraticModel`] covers small
//! hand-built systems.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::symplin::{j_mul_vec, poisson_matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Canonical,
    Dissipative,
    Noncanonical,
}

pub trait HamiltonianModel: Send + Sync {
    /// `n`, half of the state dimension.
    fn half_dim(&self) -> usize;

    fn kind(&self) -> ModelKind;

    /// `H(q, p) = T(p) + V(q)`.
    fn separable(&self) -> bool;

    fn check_parameter(&self, mu: &[f64]) -> Result<()>;

    fn hamiltonian(&self, y: &DVector<f64>, mu: &[f64]) -> Result<f64>;

    fn gradient(&self, y: &DVector<f64>, mu: &[f64]) -> Result<DVector<f64>>;

    fn hessian(&self, y: &DVector<f64>, mu: &[f64]) -> Result<DMatrix<f64>>;

    /// The `f_H` block of the vertical dissipation field, length `n`.
    fn dissipation(&self, y: &DVector<f64>, mu: &[f64]) -> Result<DVector<f64>> {
        self.check_state(y)?;
        self.check_parameter(mu)?;
        Ok(DVector::zeros(self.half_dim()))
    }

    /// `∂f_H/∂y`, an `n × 2n` matrix.
    fn dissipation_jacobian(&self, y: &DVector<f64>, mu: &[f64]) -> Result<DMatrix<f64>> {
        self.check_state(y)?;
        self.check_parameter(mu)?;
        Ok(DMatrix::zeros(self.half_dim(), 2 * self.half_dim()))
    }

    /// Constant skew structure matrix of a non-canonical model.
    fn structure(&self) -> Option<&DMatrix<f64>> {
        None
    }

    fn initial_condition(&self, mu: &[f64]) -> Result<DVector<f64>>;

    fn check_state(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != 2 * self.half_dim() {
            return Err(Error::dim(format!(
                "state of length {} for a model of dimension {}",
                y.len(),
                2 * self.half_dim()
            )));
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        Ok(())
    }
}

/// The vertical field `(0_n, f_H)`; zero for conservative models.
pub fn eval_dissipation(model: &dyn HamiltonianModel, y: &DVector<f64>, mu: &[f64]) -> Result<DVector<f64>> {
    let n = model.half_dim();
    let f = model.dissipation(y, mu)?;
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(n, n).copy_from(&f);
    Ok(out)
}

/// Right-hand side of the full-order dynamics.
///
/// Canonical: `J∇H`; dissipative: `J∇H + (0, f_H)`; non-canonical: `J_s ∇H`.
pub fn vector_field(model: &dyn HamiltonianModel, y: &DVector<f64>, mu: &[f64]) -> Result<DVector<f64>> {
    let grad = model.gradient(y, mu)?;
    match (model.kind(), model.structure()) {
        (ModelKind::Noncanonical, Some(js)) => Ok(js * grad),
        (ModelKind::Noncanonical, None) => Err(Error::UnsupportedModel(
            "non-canonical model without a structure matrix".into(),
        )),
        (ModelKind::Canonical, _) => Ok(j_mul_vec(&grad)),
        (ModelKind::Dissipative, _) => Ok(j_mul_vec(&grad) + eval_dissipation(model, y, mu)?),
    }
}

/// Jacobian of [`vector_field`].
pub fn field_jacobian(model: &dyn HamiltonianModel, y: &DVector<f64>, mu: &[f64]) -> Result<DMatrix<f64>> {
    let hess = model.hessian(y, mu)?;
    let n = model.half_dim();
    match (model.kind(), model.structure()) {
        (ModelKind::Noncanonical, Some(js)) => Ok(js * hess),
        (ModelKind::Noncanonical, None) => Err(Error::UnsupportedModel(
            "non-canonical model without a structure matrix".into(),
        )),
        (kind, _) => {
            let mut jac = crate::symplin::j_mul(&hess);
            if kind == ModelKind::Dissipative {
                let dj = model.dissipation_jacobian(y, mu)?;
                let mut lower = jac.rows_mut(n, n);
                lower += dj;
            }
            Ok(jac)
        }
    }
}

/// Relative error of the model gradient against central differences with
/// step `h = 1e-6·(1 + ‖y‖)`.
pub fn gradient_fd_error(model: &dyn HamiltonianModel, y: &DVector<f64>, mu: &[f64]) -> Result<f64> {
    let grad = model.gradient(y, mu)?;
    let fd = central_difference(|x| model.hamiltonian(x, mu), y)?;
    Ok((grad - &fd).norm() / fd.norm().max(1e-12))
}

/// Central-difference gradient of a scalar function.
pub fn central_difference<F>(f: F, y: &DVector<f64>) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let h = 1e-6 * (1.0 + y.norm());
    let mut g = DVector::zeros(y.len());
    let mut x = y.clone();
    for i in 0..y.len() {
        x[i] = y[i] + h;
        let fp = f(&x)?;
        x[i] = y[i] - h;
        let fm = f(&x)?;
        x[i] = y[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Shape of the initial displacement: a periodic bump `f(x)` whose Fourier
/// coefficients decay like `decay^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default = "InitialSpec::default_profile")]
    pub profile: Profile,
    #[serde(default = "InitialSpec::default_decay")]
    pub decay: f64,
    #[serde(default = "InitialSpec::default_amplitude")]
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `q_0 = f`, `p_0 = 0`.
    Standing,
    /// `q_0 = f`, `p_0 = −μ f'`: a right-moving wave.
    Travelling,
}

impl InitialSpec {
    fn default_profile() -> Profile {
        Profile::Travelling
    }
    fn default_decay() -> f64 {
        0.5
    }
    fn default_amplitude() -> f64 {
        1.0
    }
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            profile: Self::default_profile(),
            decay: Self::default_decay(),
            amplitude: Self::default_amplitude(),
        }
    }
}

/// Model section of an experiment config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub n: usize,
    /// Rayleigh coefficient `c` of `damped_wave`.
    #[serde(default)]
    pub damping: Option<f64>,
    /// Weight of the `1 − cos q_i` potential of `nonlinear_wave`; defaults to the grid spacing.
    #[serde(default)]
    pub potential_weight: Option<f64>,
    /// Seed of the congruence `K` of `noncanonical_wave`.
    #[serde(default)]
    pub structure_seed: Option<u64>,
    #[serde(default)]
    pub initial: InitialSpec,
}

impl ModelSpec {
    pub fn new(name: &str, n: usize) -> Self {
        ModelSpec {
            name: name.to_string(),
            n,
            damping: None,
            potential_weight: None,
            structure_seed: None,
            initial: InitialSpec::default(),
        }
    }
}

pub const MODEL_NAMES: [&str; 4] = ["linear_wave", "nonlinear_wave", "damped_wave", "noncanonical_wave"];

#[derive(Clone, Debug)]
enum Variant {
    Linear,
    Nonlinear { weight: f64 },
    Damped { c: f64 },
    Noncanonical { structure: DMatrix<f64> },
}

/// Periodic 1D wave equation `u_tt = μ² u_xx` on `[0, 1)` with `n` grid
/// points and the second-order centered stencil folded into `L`, so that
/// `H = ½pᵀp + ½μ² qᵀLq (+ extra potential)`.
///
/// Parameters are `μ = (speed)` or `μ = (speed, shift)`, where `shift`
/// translates the initial bump.
#[derive(Clone, Debug)]
pub struct WaveModel {
    n: usize,
    inv_dx2: f64,
    variant: Variant,
    initial: InitialSpec,
    name: &'static str,
}

/// Builds a registered model.
pub fn build_model(spec: &ModelSpec) -> Result<WaveModel> {
    let name = MODEL_NAMES
        .iter()
        .find(|&&m| m == spec.name)
        .copied()
        .ok_or_else(|| Error::UnknownModel(spec.name.clone()))?;
    if spec.n < 3 {
        return Err(Error::config("model.n", format!("need at least 3 grid points, got {}", spec.n)));
    }
    let n = spec.n;
    let dx = 1.0 / n as f64;
    let init = &spec.initial;
    if !(init.decay > 0.0 && init.decay < 1.0) {
        return Err(Error::config("model.initial.decay", "must lie in (0, 1)"));
    }
    if !init.amplitude.is_finite() {
        return Err(Error::config("model.initial.amplitude", "must be finite"));
    }
    let variant = match name {
        "linear_wave" => Variant::Linear,
        "nonlinear_wave" => {
            let weight = spec.potential_weight.unwrap_or(dx);
            if !weight.is_finite() {
                return Err(Error::config("model.potential_weight", "must be finite"));
            }
            Variant::Nonlinear { weight }
        }
        "damped_wave" => {
            let c = spec.damping.unwrap_or(0.1);
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::config("model.damping", "must be finite and non-negative"));
            }
            Variant::Damped { c }
        }
        _ => Variant::Noncanonical {
            structure: congruent_structure(n, spec.structure_seed.unwrap_or(0))?,
        },
    };
    Ok(WaveModel {
        n,
        inv_dx2: 1.0 / (dx * dx),
        variant,
        initial: init.clone(),
        name,
    })
}

/// `K J_2n Kᵀ` with `K = I + 0.5·G/√(2n)`, `G` standard normal from a seeded ChaCha stream.
pub fn congruent_structure(n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let dim = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.5 / (dim as f64).sqrt();
    let k = DMatrix::from_fn(dim, dim, |i, j| {
        let g: f64 = StandardNormal.sample(&mut rng);
        (i == j) as u8 as f64 + scale * g
    });
    let j = poisson_matrix(n)?;
    let s = &k * j * k.transpose();
    let s = (&s - s.transpose()) * 0.5;
    let sv = s.singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin <= 1e-8 * sv.max() {
        return Err(Error::StructureViolation {
            what: "congruent structure matrix is singular".into(),
            residual: smin,
        });
    }
    Ok(s)
}

impl WaveModel {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn grid_spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Largest stable step `0.5·dx/μ_max` of the explicit scheme.
    pub fn cfl_step(&self, max_speed: f64) -> f64 {
        0.5 * self.grid_spacing() / max_speed.abs().max(f64::MIN_POSITIVE)
    }

    pub fn damping(&self) -> Option<f64> {
        match self.variant {
            Variant::Damped { c } => Some(c),
            _ => None,
        }
    }

    /// `L q` for the periodic stencil `(2q_i − q_{i−1} − q_{i+1})/dx²`.
    pub fn stiffness_apply(&self, q: &[f64]) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |i, _| {
            let prev = q[(i + n - 1) % n];
            let next = q[(i + 1) % n];
            (2.0 * q[i] - prev - next) * self.inv_dx2
        })
    }

    /// Dense `L`.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            l[(i, i)] += 2.0 * self.inv_dx2;
            l[(i, (i + 1) % n)] -= self.inv_dx2;
            l[(i, (i + n - 1) % n)] -= self.inv_dx2;
        }
        l
    }

    fn speed(mu: &[f64]) -> f64 {
        mu[0]
    }

    fn check(&self, y: &DVector<f64>, mu: &[f64]) -> Result<()> {
        self.check_state(y)?;
        self.check_parameter(mu)
    }
}

impl HamiltonianModel for WaveModel {
    fn half_dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> ModelKind {
        match self.variant {
            Variant::Linear | Variant::Nonlinear { .. } => ModelKind::Canonical,
            Variant::Damped { .. } => ModelKind::Dissipative,
            Variant::Noncanonical { .. } => ModelKind::Noncanonical,
        }
    }

    fn separable(&self) -> bool {
        true
    }

    fn check_parameter(&self, mu: &[f64]) -> Result<()> {
        if mu.is_empty() || mu.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "{} takes (speed) or (speed, shift), got {} values",
                self.name,
                mu.len()
            )));
        }
        if mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        Ok(())
    }

    fn hamiltonian(&self, y: &DVector<f64>, mu: &[f64]) -> Result<f64> {
        self.check(y, mu)?;
        let n = self.n;
        let q = y.rows(0, n);
        let p = y.rows(n, n);
        let c = Self::speed(mu);
        let lq = self.stiffness_apply(q.as_slice());
        let mut h = 0.5 * p.norm_squared() + 0.5 * c * c * q.dot(&lq);
        if let Variant::Nonlinear { weight } = self.variant {
            h += weight * q.iter().map(|qi| 1.0 - qi.cos()).sum::<f64>();
        }
        Ok(h)
    }

    fn gradient(&self, y: &DVector<f64>, mu: &[f64]) -> Result<DVector<f64>> {
        self.check(y, mu)?;
        let n = self.n;
        let c = Self::speed(mu);
        let mut g = DVector::zeros(2 * n);
        let mut gq = self.stiffness_apply(&y.as_slice()[..n]) * (c * c);
        if let Variant::Nonlinear { weight } = self.variant {
            for i in 0..n {
                gq[i] += weight * y[i].sin();
            }
        }
        g.rows_mut(0, n).copy_from(&gq);
        g.rows_mut(n, n).copy_from(&y.rows(n, n));
        Ok(g)
    }

    fn hessian(&self, y: &DVector<f64>, mu: &[f64]) -> Result<DMatrix<f64>> {
        self.check(y, mu)?;
        let n = self.n;
        let c = Self::speed(mu);
        let mut hess = DMatrix::zeros(2 * n, 2 * n);
        let mut hq = self.stiffness() * (c * c);
        if let Variant::Nonlinear { weight } = self.variant {
            for i in 0..n {
                hq[(i, i)] += weight * y[i].cos();
            }
        }
        hess.view_mut((0, 0), (n, n)).copy_from(&hq);
        hess.view_mut((n, n), (n, n)).fill_with_identity();
        Ok(hess)
    }

    fn dissipation(&self, y: &DVector<f64>, mu: &[f64]) -> Result<DVector<f64>> {
        self.check(y, mu)?;
        let n = self.n;
        match self.variant {
            Variant::Damped { c } => Ok(y.rows(n, n) * -c),
            _ => Ok(DVector::zeros(n)),
        }
    }

    fn dissipation_jacobian(&self, y: &DVector<f64>, mu: &[f64]) -> Result<DMatrix<f64>> {
        self.check(y, mu)?;
        let n = self.n;
        let mut jac = DMatrix::zeros(n, 2 * n);
        if let Variant::Damped { c } = self.variant {
            for i in 0..n {
                jac[(i, n + i)] = -c;
            }
        }
        Ok(jac)
    }

    fn structure(&self) -> Option<&DMatrix<f64>> {
        match &self.variant {
            Variant::Noncanonical { structure } => Some(structure),
            _ => None,
        }
    }

    fn initial_condition(&self, mu: &[f64]) -> Result<DVector<f64>> {
        self.check_parameter(mu)?;
        let n = self.n;
        let speed = Self::speed(mu);
        let shift = mu.get(1).copied().unwrap_or(0.0);
        let InitialSpec {
            profile,
            decay: r,
            amplitude: amp,
        } = self.initial;
        let dx = self.grid_spacing();
        let mut y = DVector::zeros(2 * n);
        for i in 0..n {
            let theta = 2.0 * PI * (i as f64 * dx - 0.5 - shift);
            let denom = 1.0 - 2.0 * r * theta.cos() + r * r;
            y[i] = amp * ((1.0 - r * r) / denom - 1.0);
            if profile == Profile::Travelling {
                let df = -amp * (1.0 - r * r) * 4.0 * PI * r * theta.sin() / (denom * denom);
                y[n + i] = -speed * df;
            }
        }
        Ok(y)
    }
}

/// `H(y) = ½ yᵀ S y` with a symmetric `S`, optionally with a constant
/// non-canonical structure matrix. Parameters are ignored.
#[derive(Clone, Debug)]
pub struct QuadraticModel {
    s: DMatrix<f64>,
    structure: Option<DMatrix<f64>>,
    initial: DVector<f64>,
}

impl QuadraticModel {
    pub fn new(s: DMatrix<f64>) -> Result<Self> {
        if s.nrows() != s.ncols() || s.nrows() % 2 != 0 || s.nrows() == 0 {
            return Err(Error::dim(format!("quadratic form must be square of even size, got {:?}", s.shape())));
        }
        let asym = max_abs(&(&s - s.transpose()));
        if asym > 1e-12 * max_abs(&s).max(1.0) {
            return Err(Error::StructureViolation {
                what: "quadratic form is not symmetric".into(),
                residual: asym,
            });
        }
        let dim = s.nrows();
        let mut initial = DVector::zeros(dim);
        initial[0] = 1.0;
        Ok(QuadraticModel {
            s,
            structure: None,
            initial,
        })
    }

    /// `H = ½ yᵀKᵀKy`.
    pub fn from_factor(k: &DMatrix<f64>) -> Result<Self> {
        Self::new(k.transpose() * k)
    }

    /// `H = ½(q² + p²)`.
    pub fn harmonic_oscillator() -> Self {
        Self::new(DMatrix::identity(2, 2)).expect("identity is a valid quadratic form")
    }

    pub fn with_structure(mut self, structure: DMatrix<f64>) -> Result<Self> {
        if structure.shape() != self.s.shape() {
            return Err(Error::dim("structure matrix shape does not match the state"));
        }
        let asym = max_abs(&(&structure + structure.transpose()));
        if asym > 1e-12 * max_abs(&structure).max(1.0) {
            return Err(Error::StructureViolation {
                what: "structure matrix is not skew-symmetric".into(),
                residual: asym,
            });
        }
        self.structure = Some(structure);
        Ok(self)
    }

    pub fn with_initial(mut self, y0: DVector<f64>) -> Result<Self> {
        if y0.len() != self.s.nrows() {
            return Err(Error::dim("initial condition length does not match the state"));
        }
        self.initial = y0;
        Ok(self)
    }

    pub fn form(&self) -> &DMatrix<f64> {
        &self.s
    }
}

impl HamiltonianModel for QuadraticModel {
    fn half_dim(&self) -> usize {
        self.s.nrows() / 2
    }

    fn kind(&self) -> ModelKind {
        if self.structure.is_some() {
            ModelKind::Noncanonical
        } else {
            ModelKind::Canonical
        }
    }

    fn separable(&self) -> bool {
        let n = self.half_dim();
        max_abs(&self.s.view((0, n), (n, n)).into_owned()) == 0.0
    }

    fn check_parameter(&self, _mu: &[f64]) -> Result<()> {
        Ok(())
    }

    fn hamiltonian(&self, y: &DVector<f64>, _mu: &[f64]) -> Result<f64> {
        self.check_state(y)?;
        Ok(0.5 * y.dot(&(&self.s * y)))
    }

    fn gradient(&self, y: &DVector<f64>, _mu: &[f64]) -> Result<DVector<f64>> {
        self.check_state(y)?;
        Ok(&self.s * y)
    }

    fn hessian(&self, y: &DVector<f64>, _mu: &[f64]) -> Result<DMatrix<f64>> {
        self.check_state(y)?;
        Ok(self.s.clone())
    }

    fn structure(&self) -> Option<&DMatrix<f64>> {
        self.structure.as_ref()
    }

    fn initial_condition(&self, _mu: &[f64]) -> Result<DVector<f64>> {
        Ok(self.initial.clone())
    }
}

/// Sampling set: parameter samples and the output time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    samples: Vec<Vec<f64>>,
    times: Vec<f64>,
}

impl ParameterSet {
    pub fn new(samples: Vec<Vec<f64>>, times: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("parameter set is empty".into()));
        }
        if times.is_empty() {
            return Err(Error::InvalidParameter("time grid is empty".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
        }
        Ok(ParameterSet { samples, times })
    }

    /// `count` equally spaced instants `t0, t0 + dt, …`.
    pub fn uniform_times(t0: f64, dt: f64, count: usize) -> Vec<f64> {
        (0..count).map(|i| t0 + dt * i as f64).collect()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Largest `|μ_0|`, the wave speed of the zoo models.
    pub fn max_speed(&self) -> f64 {
        self.samples
            .iter()
            .filter_map(|m| m.first())
            .fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplin::j_mul_vec;

    fn random_state(n: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(2 * n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn equilibrium_is_zero() {
        let m = build_model(&ModelSpec::new("linear_wave", 8)).unwrap();
        let y = DVector::zeros(16);
        assert_eq!(m.hamiltonian(&y, &[1.0]).unwrap(), 0.0);
        assert_eq!(m.gradient(&y, &[1.0]).unwrap(), DVector::zeros(16));
    }

    #[test]
    fn stencil_energy_n3() {
        // L = 9·[[2,-1,-1],[-1,2,-1],[-1,-1,2]] for n = 3, so ½ e1ᵀ L e1 = 9.
        let m = build_model(&ModelSpec::new("linear_wave", 3)).unwrap();
        let mut y = DVector::zeros(6);
        y[0] = 1.0;
        let l = m.stiffness();
        let expected = 0.5 * l[(0, 0)];
        assert!((expected - 9.0).abs() < 1e-12);
        assert!((m.hamiltonian(&y, &[1.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn damped_rate_identity() {
        let mut spec = ModelSpec::new("damped_wave", 6);
        spec.damping = Some(0.3);
        let m = build_model(&spec).unwrap();
        for seed in 0..5 {
            let y = random_state(6, seed);
            let g = m.gradient(&y, &[1.2]).unwrap();
            let f = m.dissipation(&y, &[1.2]).unwrap();
            let rate = g.rows(6, 6).dot(&f);
            let p2 = y.rows(6, 6).norm_squared();
            assert!((rate + 0.3 * p2).abs() < 1e-12 * (1.0 + p2));
            assert!(rate <= 0.0);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for name in MODEL_NAMES {
            let m = build_model(&ModelSpec::new(name, 7)).unwrap();
            for seed in 0..3 {
                let y = random_state(7, seed) * 0.3;
                let err = gradient_fd_error(&m, &y, &[1.3]).unwrap();
                assert!(err <= 1e-6, "{name}: {err}");
            }
        }
    }

    #[test]
    fn quadratic_gradient() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let m = QuadraticModel::from_factor(&k).unwrap();
        let y = DVector::from_vec(vec![0.5, -1.0]);
        assert!((m.gradient(&y, &[]).unwrap() - k.transpose() * &k * &y).norm() < 1e-15);
    }

    #[test]
    fn canonical_field_is_j_grad() {
        let m = build_model(&ModelSpec::new("nonlinear_wave", 5)).unwrap();
        let y = random_state(5, 11);
        let f = vector_field(&m, &y, &[0.7]).unwrap();
        assert_eq!(f, j_mul_vec(&m.gradient(&y, &[0.7]).unwrap()));
        assert_eq!(eval_dissipation(&m, &y, &[0.7]).unwrap(), DVector::zeros(10));
    }

    #[test]
    fn noncanonical_structure_is_skew_invertible() {
        let mut spec = ModelSpec::new("noncanonical_wave", 6);
        spec.structure_seed = Some(7);
        let m = build_model(&spec).unwrap();
        let js = m.structure().unwrap();
        assert_eq!(js + js.transpose(), DMatrix::zeros(12, 12));
        assert!(js.clone().try_inverse().is_some());
        let again = build_model(&spec).unwrap();
        assert_eq!(again.structure().unwrap(), js);
    }

    #[test]
    fn field_jacobian_matches_differences() {
        let mut spec = ModelSpec::new("damped_wave", 4);
        spec.damping = Some(0.2);
        for name in ["nonlinear_wave", "damped_wave", "noncanonical_wave"] {
            spec.name = name.into();
            let m = build_model(&spec).unwrap();
            let y = random_state(4, 3) * 0.4;
            let jac = field_jacobian(&m, &y, &[1.1]).unwrap();
            let h = 1e-6;
            for j in 0..8 {
                let mut yp = y.clone();
                yp[j] += h;
                let mut ym = y.clone();
                ym[j] -= h;
                let col = (vector_field(&m, &yp, &[1.1]).unwrap() - vector_field(&m, &ym, &[1.1]).unwrap()) / (2.0 * h);
                assert!((col - jac.column(j)).norm() < 1e-6 * (1.0 + jac.norm()), "{name}");
            }
        }
    }

    #[test]
    fn build_errors() {
        assert!(matches!(build_model(&ModelSpec::new("heat", 8)), Err(Error::UnknownModel(_))));
        assert!(matches!(build_model(&ModelSpec::new("linear_wave", 2)), Err(Error::Config { .. })));
        let m = build_model(&ModelSpec::new("linear_wave", 4)).unwrap();
        assert!(matches!(m.hamiltonian(&DVector::zeros(8), &[1.0, 2.0, 3.0]), Err(Error::InvalidParameter(_))));
        let mut y = DVector::zeros(8);
        y[2] = f64::NAN;
        assert!(matches!(m.gradient(&y, &[1.0]), Err(Error::NonFiniteState)));
    }

    #[test]
    fn parameter_set_validation() {
        assert!(ParameterSet::new(vec![], vec![0.0]).is_err());
        assert!(ParameterSet::new(vec![vec![1.0]], vec![0.0, 0.0]).is_err());
        let ps = ParameterSet::new(vec![vec![1.0], vec![2.0]], ParameterSet::uniform_times(0.0, 0.1, 3)).unwrap();
        assert_eq!(ps.max_speed(), 2.0);
    }
}
