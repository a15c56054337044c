//! Reduced models: symplectic Galerkin projection for canonical,
//! dissipative and non-canonical systems, a POD-Galerkin baseline, and
//! full-versus-reduced diagnostics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrators::{integrate, Dynamics, Scheme, StepOptions, Trajectory};
use crate::io::fmt_f64;
use crate::linalg::max_abs;
use crate::models::{HamiltonianModel, ModelKind};
use crate::symplin::{j_mul, poisson_matrix, orthonormality_residual, Block, SymplecticBasis};

/// Tolerance on `‖A_qs‖_max` for a basis to count as vertical.
pub const VERTICAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReducedKind {
    /// `ż = J_2k Aᵀ∇H(Az)`.
    Canonical,
    /// `ż = J_2k Aᵀ∇H(Az) + A⁺X_F(Az)`.
    Dissipative,
    /// `ż = W Uᵀ∇H(Uz)`, `W = UᵀJ_sU`.
    Noncanonical,
    /// `ż = Uᵀ J ∇H(Uz)`; not Hamiltonian.
    PodGalerkin,
}

/// A reduced model bound to its full model.
pub struct ReducedModel<'a> {
    model: &'a dyn HamiltonianModel,
    kind: ReducedKind,
    basis: DMatrix<f64>,
    /// Left inverse used for initial conditions: `A⁺` or `Uᵀ`.
    inverse: DMatrix<f64>,
    /// `J_2k`, `W`, or `UᵀJ` for the POD baseline.
    structure: DMatrix<f64>,
    /// `A⁺` restricted to vertical fields, `2k × n`.
    dissipation_map: Option<DMatrix<f64>>,
}

/// Symplectic Galerkin projection of a canonical model.
pub fn galerkin_reduce<'a>(model: &'a dyn HamiltonianModel, basis: &SymplecticBasis) -> Result<ReducedModel<'a>> {
    if model.kind() != ModelKind::Canonical {
        return Err(Error::UnsupportedModel(format!(
            "symplectic Galerkin projection needs a canonical model, got {:?}",
            model.kind()
        )));
    }
    check_rows(model, basis.matrix())?;
    let k = basis.reduced_half_dim();
    Ok(ReducedModel {
        model,
        kind: ReducedKind::Canonical,
        basis: basis.matrix().clone(),
        inverse: basis.inverse(),
        structure: poisson_matrix(k)?,
        dissipation_map: None,
    })
}

/// Symplectic Galerkin projection of a Rayleigh-dissipative model.
///
/// With `require_vertical` the basis must have `A_qs = 0`, which keeps the
/// reduced dissipation vertical and the reduced energy non-increasing.
pub fn dissipative_reduce<'a>(
    model: &'a dyn HamiltonianModel,
    basis: &SymplecticBasis,
    require_vertical: bool,
) -> Result<ReducedModel<'a>> {
    if model.kind() == ModelKind::Noncanonical {
        return Err(Error::UnsupportedModel("dissipative projection of a non-canonical model".into()));
    }
    check_rows(model, basis.matrix())?;
    if require_vertical {
        let norm = max_abs(&basis.block(Block::Qs));
        if norm > VERTICAL_TOL {
            return Err(Error::StructureWarning { block: "A_qs", norm });
        }
    }
    let n = basis.full_half_dim();
    let k = basis.reduced_half_dim();
    let inverse = basis.inverse();
    let dissipation_map = inverse.columns(n, n).into_owned();
    Ok(ReducedModel {
        model,
        kind: ReducedKind::Dissipative,
        basis: basis.matrix().clone(),
        inverse,
        structure: poisson_matrix(k)?,
        dissipation_map: Some(dissipation_map),
    })
}

/// Galerkin projection of a non-canonical model onto an orthonormal `U`.
pub fn noncanonical_reduce<'a>(model: &'a dyn HamiltonianModel, u: &DMatrix<f64>) -> Result<ReducedModel<'a>> {
    let js = model
        .structure()
        .ok_or_else(|| Error::UnsupportedModel("model has no structure matrix".into()))?;
    check_rows(model, u)?;
    let residual = orthonormality_residual(u);
    if residual > 1e-10 {
        return Err(Error::StructureViolation {
            what: "UᵀU ≠ I".into(),
            residual,
        });
    }
    let w = u.transpose() * js * u;
    let w = (&w - w.transpose()) * 0.5;
    Ok(ReducedModel {
        model,
        kind: ReducedKind::Noncanonical,
        basis: u.clone(),
        inverse: u.transpose(),
        structure: w,
        dissipation_map: None,
    })
}

/// Plain Galerkin projection `ż = Uᵀf(Uz)` of the full vector field; the
/// non-structure-preserving baseline.
pub fn pod_galerkin_reduce<'a>(model: &'a dyn HamiltonianModel, u: &DMatrix<f64>) -> Result<ReducedModel<'a>> {
    check_rows(model, u)?;
    let residual = orthonormality_residual(u);
    if residual > 1e-10 {
        return Err(Error::StructureViolation {
            what: "UᵀU ≠ I".into(),
            residual,
        });
    }
    let structure = match model.structure() {
        Some(js) => u.transpose() * js,
        None => j_mul(u).transpose() * -1.0,
    };
    let n = model.half_dim();
    let dissipation_map = (model.kind() == ModelKind::Dissipative).then(|| u.transpose().columns(n, n).into_owned());
    Ok(ReducedModel {
        model,
        kind: ReducedKind::PodGalerkin,
        basis: u.clone(),
        inverse: u.transpose(),
        structure,
        dissipation_map,
    })
}

fn check_rows(model: &dyn HamiltonianModel, a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != 2 * model.half_dim() {
        return Err(Error::dim(format!(
            "basis with {} rows for a model of dimension {}",
            a.nrows(),
            2 * model.half_dim()
        )));
    }
    Ok(())
}

impl<'a> ReducedModel<'a> {
    pub fn kind(&self) -> ReducedKind {
        self.kind
    }

    pub fn model(&self) -> &'a dyn HamiltonianModel {
        self.model
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Reduced dimension.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `J_2k`, `W`, or `UᵀJ` (POD baseline).
    pub fn structure(&self) -> &DMatrix<f64> {
        &self.structure
    }

    pub fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.basis * z
    }

    fn check(&self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::dim(format!("reduced state of length {} for dimension {}", z.len(), self.dim())));
        }
        Ok(())
    }

    /// `H_RB(z) = H(Az)`.
    pub fn hamiltonian(&self, z: &DVector<f64>, mu: &[f64]) -> Result<f64> {
        self.check(z)?;
        self.model.hamiltonian(&self.lift(z), mu)
    }

    /// `∇H_RB(z) = Aᵀ∇H(Az)`.
    pub fn gradient(&self, z: &DVector<f64>, mu: &[f64]) -> Result<DVector<f64>> {
        self.check(z)?;
        Ok(self.basis.tr_mul(&self.model.gradient(&self.lift(z), mu)?))
    }

    pub fn field(&self, z: &DVector<f64>, mu: &[f64]) -> Result<DVector<f64>> {
        self.check(z)?;
        let y = self.lift(z);
        let grad = self.model.gradient(&y, mu)?;
        let mut f = match self.kind {
            ReducedKind::PodGalerkin => &self.structure * grad,
            _ => &self.structure * self.basis.tr_mul(&grad),
        };
        if let Some(map) = &self.dissipation_map {
            f += map * self.model.dissipation(&y, mu)?;
        }
        Ok(f)
    }

    pub fn jacobian(&self, z: &DVector<f64>, mu: &[f64]) -> Result<DMatrix<f64>> {
        self.check(z)?;
        let y = self.lift(z);
        let hess_a = self.model.hessian(&y, mu)? * &self.basis;
        let mut jac = match self.kind {
            ReducedKind::PodGalerkin => &self.structure * hess_a,
            _ => &self.structure * self.basis.tr_mul(&hess_a),
        };
        if let Some(map) = &self.dissipation_map {
            jac += map * (self.model.dissipation_jacobian(&y, mu)? * &self.basis);
        }
        Ok(jac)
    }

    /// `z_0 = A⁺y_0` (or `Uᵀy_0`).
    pub fn initial_condition(&self, y0: &DVector<f64>) -> Result<DVector<f64>> {
        if y0.len() != self.basis.nrows() {
            return Err(Error::dim("initial condition does not match the basis"));
        }
        Ok(&self.inverse * y0)
    }

    pub fn dynamics<'b>(&'b self, mu: &'b [f64]) -> ReducedDynamics<'b, 'a> {
        ReducedDynamics { rm: self, mu }
    }
}

/// `z_0 = A⁺y_0`.
pub fn reduced_initial_condition(basis: &SymplecticBasis, y0: &DVector<f64>) -> Result<DVector<f64>> {
    if y0.len() != basis.matrix().nrows() {
        return Err(Error::dim("initial condition does not match the basis"));
    }
    Ok(basis.inverse() * y0)
}

/// A reduced model at a fixed parameter.
pub struct ReducedDynamics<'b, 'a> {
    rm: &'b ReducedModel<'a>,
    mu: &'b [f64],
}

impl Dynamics for ReducedDynamics<'_, '_> {
    fn dim(&self) -> usize {
        self.rm.dim()
    }

    fn field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.rm.field(z, self.mu)
    }

    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.rm.jacobian(z, self.mu)
    }
}

/// Integrates the reduced model; Störmer–Verlet is not offered for reduced systems.
pub fn simulate_rom(
    rm: &ReducedModel<'_>,
    z0: &DVector<f64>,
    mu: &[f64],
    times: &[f64],
    scheme: Scheme,
    opts: &StepOptions,
) -> Result<Trajectory> {
    if scheme != Scheme::Midpoint {
        return Err(Error::UnsupportedModel("reduced models are integrated with the implicit midpoint rule".into()));
    }
    integrate(&rm.dynamics(mu), z0, mu, times, scheme, opts)
}

/// Full-versus-reduced comparison on a common time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub times: Vec<f64>,
    /// `‖y(t) − Az(t)‖₂`.
    pub state_error: Vec<f64>,
    pub hamiltonian_fom: Vec<f64>,
    /// `H(Az(t))`.
    pub hamiltonian_rom: Vec<f64>,
    /// `|H(y(t)) − H(Az(t))|`.
    pub hamiltonian_gap: Vec<f64>,
}

pub fn diagnostics(fom: &Trajectory, rom: &Trajectory, rm: &ReducedModel<'_>, mu: &[f64]) -> Result<DiagnosticsRecord> {
    if fom.times.len() != rom.times.len() || fom.times.iter().zip(&rom.times).any(|(a, b)| a != b) {
        return Err(Error::InvalidParameter("full and reduced trajectories use different time grids".into()));
    }
    let mut rec = DiagnosticsRecord {
        times: fom.times.clone(),
        state_error: Vec::with_capacity(fom.len()),
        hamiltonian_fom: Vec::with_capacity(fom.len()),
        hamiltonian_rom: Vec::with_capacity(fom.len()),
        hamiltonian_gap: Vec::with_capacity(fom.len()),
    };
    for i in 0..fom.len() {
        let y = fom.state(i);
        let ya = rm.lift(&rom.state(i));
        let hf = rm.model().hamiltonian(&y, mu)?;
        let hr = rm.model().hamiltonian(&ya, mu)?;
        rec.state_error.push((&y - &ya).norm());
        rec.hamiltonian_fom.push(hf);
        rec.hamiltonian_rom.push(hr);
        rec.hamiltonian_gap.push((hf - hr).abs());
    }
    Ok(rec)
}

impl DiagnosticsRecord {
    /// `max_t |gap(t) − gap(0)|`.
    pub fn max_gap_deviation(&self) -> f64 {
        let g0 = self.hamiltonian_gap.first().copied().unwrap_or(0.0);
        self.hamiltonian_gap.iter().map(|g| (g - g0).abs()).fold(0.0, f64::max)
    }

    /// `max_t |H_RB(t) − H_RB(0)|`.
    pub fn max_rom_drift(&self) -> f64 {
        let h0 = self.hamiltonian_rom.first().copied().unwrap_or(0.0);
        self.hamiltonian_rom.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
    }

    pub fn max_state_error(&self) -> f64 {
        self.state_error.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with header `t,state_err,H_fom,H_rom,H_gap`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "state_err", "H_fom", "H_rom", "H_gap"])?;
        for i in 0..self.times.len() {
            w.write_record([
                fmt_f64(self.times[i]),
                fmt_f64(self.state_error[i]),
                fmt_f64(self.hamiltonian_fom[i]),
                fmt_f64(self.hamiltonian_rom[i]),
                fmt_f64(self.hamiltonian_gap[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
