//! Symplectic time integration: implicit midpoint for every model kind and
//! Störmer–Verlet for separable canonical systems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{field_jacobian, vector_field, HamiltonianModel, ModelKind};

/// An autonomous ODE `ẏ = f(y)`.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;

    fn field(&self, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// `∂f/∂y`; central differences unless overridden.
    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        fd_jacobian(|x| self.field(x), y)
    }

    /// `∇H` of a separable canonical system, `None` if Störmer–Verlet does not apply.
    fn separable_gradient(&self, _y: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        None
    }
}

/// Central-difference Jacobian with step `1e-6·(1 + ‖y‖)`.
pub fn fd_jacobian<F>(f: F, y: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let h = 1e-6 * (1.0 + y.norm());
    let mut x = y.clone();
    let mut cols = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        x[i] = y[i] + h;
        let fp = f(&x)?;
        x[i] = y[i] - h;
        let fm = f(&x)?;
        x[i] = y[i];
        cols.push((fp - fm) / (2.0 * h));
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// A field given by a closure.
pub struct FnDynamics<F> {
    dim: usize,
    f: F,
}

impl<F> FnDynamics<F>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnDynamics { dim, f }
    }
}

impl<F> Dynamics for FnDynamics<F>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn field(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        (self.f)(y)
    }
}

/// Full-order dynamics of a model at a fixed parameter.
pub struct FullDynamics<'a> {
    pub model: &'a dyn HamiltonianModel,
    pub mu: &'a [f64],
}

impl<'a> FullDynamics<'a> {
    pub fn new(model: &'a dyn HamiltonianModel, mu: &'a [f64]) -> Self {
        FullDynamics { model, mu }
    }
}

impl Dynamics for FullDynamics<'_> {
    fn dim(&self) -> usize {
        2 * self.model.half_dim()
    }

    fn field(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        vector_field(self.model, y, self.mu)
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        field_jacobian(self.model, y, self.mu)
    }

    fn separable_gradient(&self, y: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        if self.model.kind() == ModelKind::Canonical && self.model.separable() {
            Some(self.model.gradient(y, self.mu))
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Midpoint,
    Verlet,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    /// Residual tolerance factor; a step converges when `‖r‖ ≤ tol·(1 + ‖y‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest substep inside one output interval; `None` takes one step per interval.
    pub max_step: Option<f64>,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            tol: 1e-12,
            max_iter: 50,
            max_step: None,
        }
    }
}

/// One implicit midpoint step: solves `y' = y + dt·f((y + y')/2)`.
///
/// Fixed-point iteration runs while it contracts; a stalled or diverging
/// iteration switches to Newton on the same residual. After convergence the
/// iteration continues while the residual still shrinks, so quadratic
/// invariants are kept to round-off rather than to `tol`.
pub fn implicit_midpoint_step<D: Dynamics + ?Sized>(
    dynamics: &D,
    y: &DVector<f64>,
    dt: f64,
    opts: &StepOptions,
) -> Result<DVector<f64>> {
    check_step(dynamics, y, dt)?;
    if dt == 0.0 {
        return Ok(y.clone());
    }
    let tol = opts.tol * (1.0 + y.norm());
    let residual = |x: &DVector<f64>| -> Result<(DVector<f64>, f64)> {
        let mid = (y + x) * 0.5;
        let r = x - y - dynamics.field(&mid)? * dt;
        let nr = r.norm();
        Ok((r, nr))
    };

    let mut x = y + dynamics.field(y)? * dt;
    let (mut r, mut nr) = residual(&x)?;
    let mut newton = false;
    for it in 0..opts.max_iter {
        if !nr.is_finite() {
            return Err(Error::StepFailure {
                iterations: it,
                residual: nr,
            });
        }
        if nr == 0.0 {
            break;
        }
        let candidate = if newton {
            let mid = (y + &x) * 0.5;
            let m = DMatrix::identity(y.len(), y.len()) - dynamics.jacobian(&mid)? * (0.5 * dt);
            match m.lu().solve(&r) {
                Some(delta) => &x - delta,
                None => break,
            }
        } else {
            &x - &r
        };
        let (rc, nrc) = residual(&candidate)?;
        let improved = nrc.is_finite() && nrc < nr;
        if nr <= tol {
            // Polishing: keep strict improvements only.
            if !improved {
                break;
            }
        } else if !newton && !(nrc < 0.5 * nr) {
            newton = true;
        }
        if improved {
            x = candidate;
            r = rc;
            nr = nrc;
        } else if nr <= tol {
            break;
        }
    }
    if nr <= tol {
        Ok(x)
    } else {
        Err(Error::StepFailure {
            iterations: opts.max_iter,
            residual: nr,
        })
    }
}

/// One kick–drift–kick Störmer–Verlet step.
pub fn stormer_verlet_step<D: Dynamics + ?Sized>(dynamics: &D, y: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    check_step(dynamics, y, dt)?;
    let n = dynamics.dim() / 2;
    let grad = |x: &DVector<f64>| {
        dynamics
            .separable_gradient(x)
            .unwrap_or_else(|| Err(Error::UnsupportedModel("Störmer–Verlet needs a separable canonical Hamiltonian".into())))
    };
    let mut x = y.clone();
    let g = grad(&x)?;
    for i in 0..n {
        x[n + i] -= 0.5 * dt * g[i];
    }
    let g = grad(&x)?;
    for i in 0..n {
        x[i] += dt * g[n + i];
    }
    let g = grad(&x)?;
    for i in 0..n {
        x[n + i] -= 0.5 * dt * g[i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    Ok(x)
}

pub fn step<D: Dynamics + ?Sized>(
    dynamics: &D,
    y: &DVector<f64>,
    dt: f64,
    scheme: Scheme,
    opts: &StepOptions,
) -> Result<DVector<f64>> {
    match scheme {
        Scheme::Midpoint => implicit_midpoint_step(dynamics, y, dt, opts),
        Scheme::Verlet => stormer_verlet_step(dynamics, y, dt),
    }
}

fn check_step<D: Dynamics + ?Sized>(dynamics: &D, y: &DVector<f64>, dt: f64) -> Result<()> {
    if y.len() != dynamics.dim() {
        return Err(Error::dim(format!("state of length {} for dynamics of dimension {}", y.len(), dynamics.dim())));
    }
    if !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    Ok(())
}

/// Time series of states, one column per instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    pub parameter: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> DVector<f64> {
        self.states.column(i).into_owned()
    }

    pub fn last(&self) -> DVector<f64> {
        self.state(self.len() - 1)
    }
}

/// Integrates from `y0` at `times[0]` and records the state at every instant.
///
/// Intervals longer than `opts.max_step` are split into equal substeps.
/// Step failures are annotated with the parameter and the failing instant.
pub fn integrate<D: Dynamics + ?Sized>(
    dynamics: &D,
    y0: &DVector<f64>,
    mu: &[f64],
    times: &[f64],
    scheme: Scheme,
    opts: &StepOptions,
) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    if y0.len() != dynamics.dim() {
        return Err(Error::dim(format!("initial state of length {} for dimension {}", y0.len(), dynamics.dim())));
    }
    if scheme == Scheme::Verlet && dynamics.separable_gradient(y0).is_none() {
        return Err(Error::UnsupportedModel("Störmer–Verlet needs a separable canonical Hamiltonian".into()));
    }
    if let Some(h) = opts.max_step {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("max_step {h}")));
        }
    }
    let mut states = DMatrix::zeros(y0.len(), times.len());
    states.column_mut(0).copy_from(y0);
    let mut y = y0.clone();
    for i in 1..times.len() {
        let span = times[i] - times[i - 1];
        let substeps = match opts.max_step {
            Some(h) => (span / h).ceil().max(1.0) as usize,
            None => 1,
        };
        let dt = span / substeps as f64;
        for s in 0..substeps {
            y = step(dynamics, &y, dt, scheme, opts).map_err(|e| Error::Integration {
                mu: mu.to_vec(),
                t: times[i - 1] + dt * s as f64,
                source: Box::new(e),
            })?;
        }
        states.column_mut(i).copy_from(&y);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        parameter: mu.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelSpec, QuadraticModel};
    use crate::symplin::poisson_matrix;

    fn linear(m: DMatrix<f64>) -> FnDynamics<impl Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync> {
        let dim = m.nrows();
        FnDynamics::new(dim, move |y: &DVector<f64>| Ok(&m * y))
    }

    #[test]
    fn zero_field_is_identity() {
        let d = FnDynamics::new(4, |y: &DVector<f64>| Ok(DVector::zeros(y.len())));
        let y = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        assert_eq!(implicit_midpoint_step(&d, &y, 0.3, &StepOptions::default()).unwrap(), y);
    }

    #[test]
    fn oscillator_energy_kept() {
        let m = QuadraticModel::harmonic_oscillator();
        let d = FullDynamics::new(&m, &[]);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let y1 = implicit_midpoint_step(&d, &y, 0.1, &StepOptions::default()).unwrap();
        assert!((y1.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_field_matches_cayley_form() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 1.0, -2.0, -0.3]);
        let d = linear(m.clone());
        let y = DVector::from_vec(vec![0.7, -0.2]);
        let dt = 0.25;
        let i = DMatrix::<f64>::identity(2, 2);
        let expected = (&i - &m * (dt / 2.0)).lu().solve(&((&i + &m * (dt / 2.0)) * &y)).unwrap();
        let got = implicit_midpoint_step(&d, &y, dt, &StepOptions::default()).unwrap();
        assert!((got - expected).norm() < 1e-13);
    }

    #[test]
    fn stiff_linear_field_uses_newton() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = 400.0;
        m[(1, 0)] = -400.0;
        let d = linear(m);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let y1 = implicit_midpoint_step(&d, &y, 0.1, &StepOptions::default()).unwrap();
        assert!((y1.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_drift() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]));
        let m = QuadraticModel::new(s).unwrap();
        let d = FullDynamics::new(&m, &[]);
        let y = DVector::from_vec(vec![1.0, 2.0, 0.5, -1.0]);
        let y1 = stormer_verlet_step(&d, &y, 0.2).unwrap();
        let expected = DVector::from_vec(vec![1.1, 1.8, 0.5, -1.0]);
        assert!((y1 - expected).norm() < 1e-15);
    }

    #[test]
    fn verlet_period_return() {
        let m = QuadraticModel::harmonic_oscillator();
        let d = FullDynamics::new(&m, &[]);
        let period = 2.0 * std::f64::consts::PI;
        let steps = 1000;
        let dt = period / steps as f64;
        let mut y = DVector::from_vec(vec![1.0, 0.0]);
        for _ in 0..steps {
            y = stormer_verlet_step(&d, &y, dt).unwrap();
        }
        assert!((y - DVector::from_vec(vec![1.0, 0.0])).norm() < 2.0 * dt * dt);
    }

    #[test]
    fn verlet_rejects_nonseparable() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let m = QuadraticModel::new(s).unwrap();
        let d = FullDynamics::new(&m, &[]);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(stormer_verlet_step(&d, &y, 0.1), Err(Error::UnsupportedModel(_))));
        let mut spec = ModelSpec::new("damped_wave", 4);
        spec.damping = Some(0.1);
        let damped = build_model(&spec).unwrap();
        let d = FullDynamics::new(&damped, &[1.0]);
        let y0 = damped.initial_condition(&[1.0]).unwrap();
        assert!(integrate(&d, &y0, &[1.0], &[0.0, 0.1], Scheme::Verlet, &StepOptions::default()).is_err());
    }

    #[test]
    fn reversible() {
        let m = build_model(&ModelSpec::new("nonlinear_wave", 6)).unwrap();
        let d = FullDynamics::new(&m, &[1.0]);
        let y = m.initial_condition(&[1.0]).unwrap();
        let opts = StepOptions::default();
        let y1 = implicit_midpoint_step(&d, &y, 0.01, &opts).unwrap();
        let y0 = implicit_midpoint_step(&d, &y1, -0.01, &opts).unwrap();
        assert!((y0 - y).norm() < 1e-9);
    }

    #[test]
    fn damped_energy_decays() {
        let mut spec = ModelSpec::new("damped_wave", 16);
        spec.damping = Some(0.5);
        let m = build_model(&spec).unwrap();
        let mu = [1.0];
        let d = FullDynamics::new(&m, &mu);
        let y0 = m.initial_condition(&mu).unwrap();
        let times = crate::models::ParameterSet::uniform_times(0.0, 0.05, 21);
        let opts = StepOptions {
            max_step: Some(m.cfl_step(1.0)),
            ..StepOptions::default()
        };
        let traj = integrate(&d, &y0, &mu, &times, Scheme::Midpoint, &opts).unwrap();
        let h0 = m.hamiltonian(&y0, &mu).unwrap();
        let h1 = m.hamiltonian(&traj.last(), &mu).unwrap();
        assert!(h1 <= h0);
    }

    #[test]
    fn noncanonical_quadratic_energy() {
        let mut spec = ModelSpec::new("noncanonical_wave", 8);
        spec.structure_seed = Some(3);
        let m = build_model(&spec).unwrap();
        let mu = [1.0];
        let d = FullDynamics::new(&m, &mu);
        let y0 = m.initial_condition(&mu).unwrap();
        let times = crate::models::ParameterSet::uniform_times(0.0, 0.01, 200);
        let traj = integrate(&d, &y0, &mu, &times, Scheme::Midpoint, &StepOptions::default()).unwrap();
        let h0 = m.hamiltonian(&y0, &mu).unwrap();
        for i in 0..traj.len() {
            let h = m.hamiltonian(&traj.state(i), &mu).unwrap();
            assert!((h - h0).abs() <= 1e-10 * (1.0 + h0.abs()));
        }
    }

    #[test]
    fn step_jacobian_is_symplectic() {
        let m = build_model(&ModelSpec::new("nonlinear_wave", 4)).unwrap();
        let mu = [1.3];
        let d = FullDynamics::new(&m, &mu);
        let y = m.initial_condition(&mu).unwrap() * 0.5;
        let opts = StepOptions::default();
        let phi = fd_jacobian(|x| implicit_midpoint_step(&d, x, 0.05, &opts), &y).unwrap();
        let j = poisson_matrix(4).unwrap();
        let res = phi.transpose() * &j * &phi - &j;
        assert!(crate::linalg::max_abs(&res) < 1e-6);
    }

    #[test]
    fn integrate_single_step_composition() {
        let m = QuadraticModel::harmonic_oscillator();
        let d = FullDynamics::new(&m, &[]);
        let y = DVector::from_vec(vec![0.3, 0.4]);
        let opts = StepOptions::default();
        let traj = integrate(&d, &y, &[], &[0.0, 0.2], Scheme::Midpoint, &opts).unwrap();
        assert_eq!(traj.last(), implicit_midpoint_step(&d, &y, 0.2, &opts).unwrap());
        assert_eq!(traj.state(0), y);
    }
}
