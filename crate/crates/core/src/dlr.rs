//! Dynamical low-rank evolution `R(t) = A(t)Z(t)` with a time-dependent
//! ortho-symplectic basis `A(t)` shared by a batch of parameters.
//!
//! The coefficient flow is the symplectic Galerkin flow on `range(A)`. The
//! basis moves along the horizontal tangent direction
//!
//! ```text
//! dA = (I − AAᵀ)(YZᵀ + J_2n Y Zᵀ J_2kᵀ) S⁻¹,   S = ZZᵀ + J_2k ZZᵀ J_2kᵀ,
//! ```
//!
//! where `Y` collects the full vector fields `J_2n∇H(AZ_j)`. One step is a
//! Strang splitting: half a midpoint step in `Z`, a Cayley-retracted step in
//! `A`, half a midpoint step in `Z`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{implicit_midpoint_step, StepOptions};
use crate::models::{HamiltonianModel, ModelKind};
use crate::psd::{complex_svd_basis, ComplexOrder, SnapshotMatrix};
use crate::rom::galerkin_reduce;
use crate::symplin::{j_mul, orthonormality_residual, symplecticity_residual, SymplecticBasis};

/// Relative factor of the default rank tolerance `factor·tr(S)/2k`.
pub const RANK_TOL_FACTOR: f64 = 1e-10;

/// Basis `A` (`2n × 2k`, ortho-symplectic) and coefficients `Z` (`2k × p`) at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DlrState {
    pub a: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub t: f64,
}

impl DlrState {
    /// Checks shapes, ortho-symplecticity of `A` to `1e-8` and the rank of `S_Z`.
    pub fn new(a: DMatrix<f64>, z: DMatrix<f64>, t: f64) -> Result<Self> {
        if a.nrows() % 2 != 0 || a.ncols() % 2 != 0 || a.ncols() == 0 || a.ncols() > a.nrows() {
            return Err(Error::dim(format!("basis of shape {}×{}", a.nrows(), a.ncols())));
        }
        if z.nrows() != a.ncols() || z.ncols() == 0 {
            return Err(Error::dim(format!(
                "coefficients of shape {}×{} for a basis with {} columns",
                z.nrows(),
                z.ncols(),
                a.ncols()
            )));
        }
        let state = DlrState { a, z, t };
        let residual = state.structure_residual()?;
        if residual > 1e-8 {
            return Err(Error::StructureViolation {
                what: "A is not ortho-symplectic".into(),
                residual,
            });
        }
        coefficient_gram(&state.z)?.check()?;
        Ok(state)
    }

    /// `‖AᵀJA − J_2k‖_max`.
    pub fn symplecticity_residual(&self) -> Result<f64> {
        symplecticity_residual(&self.a)
    }

    /// `‖AᵀA − I‖_max`.
    pub fn orthonormality_residual(&self) -> f64 {
        orthonormality_residual(&self.a)
    }

    fn structure_residual(&self) -> Result<f64> {
        Ok(self.symplecticity_residual()?.max(self.orthonormality_residual()))
    }

    /// `R = AZ`; column `j` approximates the state for parameter `j`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.a * &self.z
    }

    pub fn half_dim(&self) -> usize {
        self.a.nrows() / 2
    }

    pub fn rank(&self) -> usize {
        self.a.ncols() / 2
    }
}

/// `S_Z` with its extreme eigenvalue data.
#[derive(Clone, Debug)]
pub struct CoefficientGram {
    pub matrix: DMatrix<f64>,
    pub min_eig: f64,
    pub trace: f64,
}

impl CoefficientGram {
    /// `RANK_TOL_FACTOR·tr(S)/2k`.
    pub fn rank_tolerance(&self) -> f64 {
        RANK_TOL_FACTOR * self.trace / self.matrix.nrows() as f64
    }

    pub fn check(&self) -> Result<()> {
        let tol = self.rank_tolerance();
        if self.trace <= 0.0 || !(self.min_eig >= tol) {
            return Err(Error::RankDegeneracy {
                min_eig: self.min_eig,
                tol,
            });
        }
        Ok(())
    }
}

/// `S_Z = ZZᵀ + J_2k ZZᵀ J_2kᵀ`.
pub fn coefficient_gram(z: &DMatrix<f64>) -> Result<CoefficientGram> {
    if z.nrows() % 2 != 0 || z.nrows() == 0 {
        return Err(Error::dim(format!("coefficients with {} rows", z.nrows())));
    }
    let zzt = z * z.transpose();
    let s = &zzt + j_mul(&j_mul(&zzt).transpose());
    let s = (&s + s.transpose()) * 0.5;
    let min_eig = s.clone().symmetric_eigen().eigenvalues.min();
    let trace = s.trace();
    Ok(CoefficientGram { matrix: s, min_eig, trace })
}

/// `(I − AAᵀ)(YZᵀ + J_2n Y Zᵀ J_2kᵀ) S⁻¹`, the basis component of the
/// projection of `Y` onto the tangent space at `AZ`.
pub fn basis_velocity(a: &DMatrix<f64>, z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y.nrows() != a.nrows() || y.ncols() != z.ncols() || z.nrows() != a.ncols() {
        return Err(Error::dim("basis, coefficients and velocities do not match"));
    }
    let gram = coefficient_gram(z)?;
    gram.check()?;
    let yzt = y * z.transpose();
    // J_2n·M·J_2kᵀ = J_2n·(J_2k·Mᵀ)ᵀ
    let m = &yzt + j_mul(&j_mul(&yzt.transpose()).transpose());
    let m = &m - a * a.tr_mul(&m);
    let chol = gram.matrix.clone().cholesky().ok_or(Error::RankDegeneracy {
        min_eig: gram.min_eig,
        tol: gram.rank_tolerance(),
    })?;
    // X S⁻¹ = (S⁻¹ Xᵀ)ᵀ, S symmetric.
    Ok(chol.solve(&m.transpose()).transpose())
}

/// Symplectic projection of `Y` onto the tangent space of `{AZ}` at `(A, Z)`:
/// `X_A Z + AAᵀY` with `X_A` from [`basis_velocity`].
pub fn tangent_project(a: &DMatrix<f64>, z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let xa = basis_velocity(a, z, y)?;
    Ok(xa * z + a * a.tr_mul(y))
}

fn check_model(model: &dyn HamiltonianModel, state: &DlrState, params: &[Vec<f64>]) -> Result<()> {
    if model.kind() != ModelKind::Canonical {
        return Err(Error::UnsupportedModel(format!(
            "dynamical low-rank evolution needs a canonical model, got {:?}",
            model.kind()
        )));
    }
    if state.a.nrows() != 2 * model.half_dim() {
        return Err(Error::dim("basis rows do not match the model"));
    }
    if params.len() != state.z.ncols() {
        return Err(Error::dim(format!(
            "{} parameters for {} coefficient columns",
            params.len(),
            state.z.ncols()
        )));
    }
    Ok(())
}

/// Full fields `J_2n∇H(AZ_j, μ_j)` as columns.
fn full_fields(model: &dyn HamiltonianModel, a: &DMatrix<f64>, z: &DMatrix<f64>, params: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let cols = params
        .par_iter()
        .enumerate()
        .map(|(j, mu)| {
            let y = a * z.column(j);
            let grad = model.gradient(&y, mu)?;
            Ok(crate::symplin::j_mul_vec(&grad))
        })
        .collect::<Result<Vec<DVector<f64>>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// `(dA, dZ)` at `state`.
pub fn dlr_velocity(
    state: &DlrState,
    model: &dyn HamiltonianModel,
    params: &[Vec<f64>],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_model(model, state, params)?;
    let y = full_fields(model, &state.a, &state.z, params)?;
    // J_2k Aᵀ∇H = Aᵀ J_2n ∇H for ortho-symplectic A.
    let dz = state.a.tr_mul(&y);
    let da = basis_velocity(&state.a, &state.z, &y)?;
    Ok((da, dz))
}

/// `cay(hΩ)X` for `Ω = VAᵀ − AVᵀ`, through the `4k × 4k` Woodbury form
/// `X + h·U₁(I − h/2·U₂ᵀU₁)⁻¹U₂ᵀX` with `U₁ = [V, −A]`, `U₂ = [A, V]`.
pub fn cayley_apply(a: &DMatrix<f64>, v: &DMatrix<f64>, h: f64, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, c) = a.shape();
    let mut u1 = DMatrix::zeros(rows, 2 * c);
    u1.columns_mut(0, c).copy_from(v);
    u1.columns_mut(c, c).copy_from(&(-a));
    let mut u2 = DMatrix::zeros(rows, 2 * c);
    u2.columns_mut(0, c).copy_from(a);
    u2.columns_mut(c, c).copy_from(v);
    let small = DMatrix::identity(2 * c, 2 * c) - u2.tr_mul(&u1) * (0.5 * h);
    let rhs = u2.tr_mul(x);
    let sol = small.lu().solve(&rhs).ok_or_else(|| Error::DecompositionFailure {
        what: "singular Cayley system".into(),
        residual: f64::INFINITY,
    })?;
    Ok(x + u1 * sol * h)
}

fn z_half_step(
    model: &dyn HamiltonianModel,
    a: &DMatrix<f64>,
    z: &DMatrix<f64>,
    params: &[Vec<f64>],
    dt: f64,
    opts: &StepOptions,
) -> Result<DMatrix<f64>> {
    let basis = SymplecticBasis::from_trusted(a.clone(), true);
    let rm = galerkin_reduce(model, &basis)?;
    let cols = params
        .par_iter()
        .enumerate()
        .map(|(j, mu)| implicit_midpoint_step(&rm.dynamics(mu), &z.column(j).into_owned(), dt, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// One Strang step of length `dt`.
pub fn dlr_step(
    state: &DlrState,
    model: &dyn HamiltonianModel,
    params: &[Vec<f64>],
    dt: f64,
    opts: &StepOptions,
) -> Result<DlrState> {
    check_model(model, state, params)?;
    if !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let z_half = z_half_step(model, &state.a, &state.z, params, 0.5 * dt, opts)?;

    let y0 = full_fields(model, &state.a, &z_half, params)?;
    let v0 = basis_velocity(&state.a, &z_half, &y0)?;
    let a_mid = cayley_apply(&state.a, &v0, 0.5 * dt, &state.a)?;
    let y_mid = full_fields(model, &a_mid, &z_half, params)?;
    let v_mid = basis_velocity(&a_mid, &z_half, &y_mid)?;
    let a_new = cayley_apply(&a_mid, &v_mid, dt, &state.a)?;

    let z_new = z_half_step(model, &a_new, &z_half, params, 0.5 * dt, opts)?;
    Ok(DlrState {
        a: a_new,
        z: z_new,
        t: state.t + dt,
    })
}

/// Ortho-symplectic `A₀` from the Complex SVD of the initial conditions
/// and `Z₀ = A₀ᵀY₀`.
pub fn dlr_initial(model: &dyn HamiltonianModel, params: &[Vec<f64>], k: usize, t0: f64) -> Result<DlrState> {
    if params.is_empty() {
        return Err(Error::InvalidParameter("no parameters".into()));
    }
    let cols = params
        .iter()
        .map(|mu| {
            model.check_parameter(mu)?;
            model.initial_condition(mu)
        })
        .collect::<Result<Vec<_>>>()?;
    let y0 = DMatrix::from_columns(&cols);
    let basis = complex_svd_basis(&SnapshotMatrix::from_matrix(y0.clone())?, k, ComplexOrder::Pq)?.basis;
    let a = basis.into_matrix();
    let z = a.tr_mul(&y0);
    DlrState::new(a, z, t0)
}

/// States at every time in `times`, with `ceil(Δt/max_step)` equal steps
/// between consecutive outputs.
pub fn dlr_integrate(
    initial: &DlrState,
    model: &dyn HamiltonianModel,
    params: &[Vec<f64>],
    times: &[f64],
    opts: &StepOptions,
) -> Result<Vec<DlrState>> {
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    if t0 != initial.t {
        return Err(Error::InvalidParameter(format!(
            "time grid starts at {t0}, state is at {}",
            initial.t
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    let mut states = Vec::with_capacity(times.len());
    states.push(initial.clone());
    let mut current = initial.clone();
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let substeps = match opts.max_step {
            Some(h) if h > 0.0 => (span / h).ceil().max(1.0) as usize,
            _ => 1,
        };
        let dt = span / substeps as f64;
        for _ in 0..substeps {
            current = dlr_step(&current, model, params, dt, opts).map_err(|e| Error::Integration {
                mu: Vec::new(),
                t: current.t,
                source: Box::new(e),
            })?;
        }
        current.t = w[1];
        states.push(current.clone());
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelSpec, QuadraticModel};
    use crate::rom::galerkin_reduce;

    fn unit_state(n: usize, idx: &[usize], z: DMatrix<f64>) -> DlrState {
        let k = idx.len();
        let mut a = DMatrix::zeros(2 * n, 2 * k);
        for (c, &i) in idx.iter().enumerate() {
            a[(i, c)] = 1.0;
            a[(n + i, k + c)] = 1.0;
        }
        DlrState::new(a, z, 0.0).unwrap()
    }

    #[test]
    fn gram_examples() {
        let g = coefficient_gram(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(g.matrix, DMatrix::identity(4, 4) * 2.0);
        let zero = coefficient_gram(&DMatrix::zeros(4, 3)).unwrap();
        assert_eq!(zero.matrix, DMatrix::zeros(4, 4));
        assert!(matches!(zero.check(), Err(Error::RankDegeneracy { .. })));
    }

    #[test]
    fn fixed_points_of_projection() {
        let z = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -0.2, 0.3, -1.0, 0.7]);
        let s = unit_state(2, &[0], z.clone());
        let g = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, -0.4, 0.5, 0.6]);
        let y = &s.a * &g;
        assert!((tangent_project(&s.a, &z, &y).unwrap() - &y).amax() < 1e-15);
    }

    #[test]
    fn equilibrium_has_zero_velocity() {
        let m = build_model(&ModelSpec::new("linear_wave", 6)).unwrap();
        let mut state = unit_state(6, &[0, 3], DMatrix::identity(4, 4));
        state.z = DMatrix::zeros(4, 4);
        assert!(matches!(dlr_velocity(&state, &m, &vec![vec![1.0]; 4]), Err(Error::RankDegeneracy { .. })));
        let z = DMatrix::identity(4, 4) * 1e-3;
        let state = unit_state(6, &[0, 3], z);
        let (da, dz) = dlr_velocity(&state, &QuadraticModel::new(DMatrix::zeros(12, 12)).unwrap(), &vec![vec![]; 4]).unwrap();
        assert_eq!(da, DMatrix::zeros(12, 4));
        assert_eq!(dz, DMatrix::zeros(4, 4));
    }

    #[test]
    fn coefficient_field_matches_static_rom() {
        let m = build_model(&ModelSpec::new("linear_wave", 8)).unwrap();
        let z = DMatrix::from_column_slice(2, 1, &[0.3, -0.1]);
        let state = unit_state(8, &[5], z.clone());
        let mu = vec![vec![1.3]];
        let (_, dz) = dlr_velocity(&state, &m, &mu).unwrap();
        let basis = SymplecticBasis::new(state.a.clone()).unwrap();
        let rm = galerkin_reduce(&m, &basis).unwrap();
        let f = rm.field(&z.column(0).into_owned(), &mu[0]).unwrap();
        assert!((dz.column(0) - f).amax() < 1e-14);
    }

    #[test]
    fn zero_step_and_frozen_basis() {
        let m = build_model(&ModelSpec::new("linear_wave", 6)).unwrap();
        let params: Vec<Vec<f64>> = (0..3).map(|j| vec![1.0, 0.1 * j as f64]).collect();
        let s = dlr_initial(&m, &params, 2, 0.0).unwrap();
        assert_eq!(dlr_step(&s, &m, &params, 0.0, &StepOptions::default()).unwrap(), s);

        // Full basis: the horizontal space is empty.
        let n = 3;
        let a = DMatrix::<f64>::identity(2 * n, 2 * n);
        let z = DMatrix::from_fn(6, 6, |i, j| if i == j { 1.0 } else { 0.01 * (i + 2 * j) as f64 });
        let q = QuadraticModel::new(DMatrix::identity(2 * n, 2 * n)).unwrap();
        let s = DlrState::new(a.clone(), z, 0.0).unwrap();
        let next = dlr_step(&s, &q, &vec![vec![]; 6], 0.1, &StepOptions::default()).unwrap();
        assert!((next.a - a).amax() < 1e-12);
    }

    #[test]
    fn cayley_is_ortho_symplectic() {
        let m = build_model(&ModelSpec::new("linear_wave", 10)).unwrap();
        let params: Vec<Vec<f64>> = (0..4).map(|j| vec![0.8 + 0.2 * j as f64, 0.05 * j as f64]).collect();
        let s = dlr_initial(&m, &params, 2, 0.0).unwrap();
        let (da, _) = dlr_velocity(&s, &m, &params).unwrap();
        assert!((da.tr_mul(&s.a)).amax() < 1e-10);
        let a2 = cayley_apply(&s.a, &da, 0.3, &s.a).unwrap();
        assert!(symplecticity_residual(&a2).unwrap() < 1e-13);
        assert!(orthonormality_residual(&a2) < 1e-13);
    }
}
