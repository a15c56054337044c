//! Offline basis generation from snapshots.
//!
//! All symplectic generators return a [`BasisReport`]; the POD baseline
//! returns a plain orthonormal [`PodBasis`].

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{integrate, FullDynamics, Scheme, StepOptions, Trajectory};
use crate::linalg::{complex_left_singular, descending_order, orthonormal_complement, svd_sorted};
use crate::models::{HamiltonianModel, ParameterSet};
use crate::symplin::{jt_mul, sr_insert, svd_like, SymplecticBasis};

/// Snapshot matrix `M_y` with the `(μ, t)` of every column.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<f64>,
    provenance: Vec<(Vec<f64>, f64)>,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<f64>, provenance: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if provenance.len() != data.ncols() {
            return Err(Error::dim(format!(
                "{} provenance records for {} columns",
                provenance.len(),
                data.ncols()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        Ok(SnapshotMatrix { data, provenance })
    }

    /// Columns without provenance; every record gets an empty `μ` and `t = 0`.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let provenance = vec![(Vec::new(), 0.0); data.ncols()];
        Self::new(data, provenance)
    }

    pub fn from_trajectories(trajectories: &[Trajectory]) -> Result<Self> {
        let rows = trajectories.first().map_or(0, |t| t.states.nrows());
        let cols: usize = trajectories.iter().map(Trajectory::len).sum();
        let mut data = DMatrix::zeros(rows, cols);
        let mut provenance = Vec::with_capacity(cols);
        let mut c = 0;
        for traj in trajectories {
            if traj.states.nrows() != rows {
                return Err(Error::dim("trajectories of different dimension"));
            }
            data.columns_mut(c, traj.len()).copy_from(&traj.states);
            provenance.extend(traj.times.iter().map(|&t| (traj.parameter.clone(), t)));
            c += traj.len();
        }
        Self::new(data, provenance)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn provenance(&self) -> &[(Vec<f64>, f64)] {
        &self.provenance
    }

    pub fn half_dim(&self) -> usize {
        self.data.nrows() / 2
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Vec<(Vec<f64>, f64)>) {
        (self.data, self.provenance)
    }
}

/// Integrates every parameter sample over the time grid; columns are ordered
/// parameters outer, time inner. Samples run in parallel, the output order
/// does not depend on scheduling.
pub fn assemble_snapshots(
    model: &dyn HamiltonianModel,
    params: &ParameterSet,
    scheme: Scheme,
    opts: &StepOptions,
) -> Result<SnapshotMatrix> {
    let trajectories = solve_all(model, params.samples(), params.times(), scheme, opts)?;
    SnapshotMatrix::from_trajectories(&trajectories)
}

fn solve_one(
    model: &dyn HamiltonianModel,
    mu: &[f64],
    times: &[f64],
    scheme: Scheme,
    opts: &StepOptions,
) -> Result<Trajectory> {
    let y0 = model.initial_condition(mu).map_err(|e| Error::Integration {
        mu: mu.to_vec(),
        t: times[0],
        source: Box::new(e),
    })?;
    integrate(&FullDynamics::new(model, mu), &y0, mu, times, scheme, opts)
}

fn solve_all(
    model: &dyn HamiltonianModel,
    samples: &[Vec<f64>],
    times: &[f64],
    scheme: Scheme,
    opts: &StepOptions,
) -> Result<Vec<Trajectory>> {
    samples
        .par_iter()
        .map(|mu| solve_one(model, mu, times, scheme, opts))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cotangent,
    ComplexSvd,
    SvdLike,
    Greedy,
    Pod,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Cotangent,
        Method::ComplexSvd,
        Method::SvdLike,
        Method::Greedy,
        Method::Pod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cotangent => "cotangent",
            Method::ComplexSvd => "complexsvd",
            Method::SvdLike => "svdlike",
            Method::Greedy => "greedy",
            Method::Pod => "pod",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("method", format!("unknown basis method `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Real/imaginary roles in the complex snapshot matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexOrder {
    /// `p + i q`.
    #[default]
    Pq,
    /// `q + i p`.
    Qp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreedyIndicator {
    Hamiltonian,
    Projection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreedyStatus {
    /// `k_max` reached.
    MaxSize,
    /// The driving indicator fell to the tolerance.
    Converged,
    /// Every candidate already lies in the span of the basis.
    Saturated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyLog {
    /// Frobenius projection error of each iterate over the cached training snapshots.
    pub errors: Vec<f64>,
    /// Value of the driving indicator that selected each expansion.
    pub indicators: Vec<f64>,
    /// `(parameter index, time index)` of every inserted snapshot.
    pub selected: Vec<(usize, usize)>,
    pub status: GreedyStatus,
}

#[derive(Clone, Debug)]
pub struct BasisReport {
    pub basis: SymplecticBasis,
    pub method: Method,
    /// `‖M − AA⁺M‖_F` on the generating snapshots.
    pub projection_error: f64,
    /// Retained singular (or weighted symplectic singular) values.
    pub retained: Vec<f64>,
    pub discarded: Vec<f64>,
    pub warnings: Vec<String>,
    pub greedy: Option<GreedyLog>,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::dim(format!("basis size k = {k} must lie in 1..={n}")));
    }
    Ok(())
}

/// `‖M − AA⁺M‖_F`.
pub fn projection_error(basis: &SymplecticBasis, m: &DMatrix<f64>) -> Result<f64> {
    Ok((m - basis.project(m)?).norm())
}

fn split(values: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let k = k.min(values.len());
    (values[..k].to_vec(), values[k..].to_vec())
}

/// Cotangent Lift: `A = diag(Φ, Φ)` with `Φ` the top `k` left singular
/// vectors of `M_1 = [q_1..q_N, p_1..p_N]`.
///
/// When `M_1` has fewer than `k` nonzero singular values the basis is padded
/// from the orthogonal complement and a warning is recorded.
pub fn cotangent_lift(m: &SnapshotMatrix, k: usize) -> Result<BasisReport> {
    let n = m.half_dim();
    check_k(k, n)?;
    let data = m.data();
    let ns = data.ncols();
    let mut m1 = DMatrix::zeros(n, 2 * ns);
    m1.columns_mut(0, ns).copy_from(&data.rows(0, n));
    m1.columns_mut(ns, ns).copy_from(&data.rows(n, n));
    let svd = svd_sorted(&m1)?;
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let available = svd.sigma.iter().filter(|&&s| s > 1e-12 * smax && s > 0.0).count();
    let mut warnings = Vec::new();
    let take = k.min(available);
    let mut phi = svd.u.columns(0, take).into_owned();
    if take < k {
        let msg = format!("cotangent lift: only {available} nonzero singular values for k = {k}; padding from the complement");
        log::warn!("{msg}");
        warnings.push(msg);
        let comp = orthonormal_complement(&phi);
        phi = DMatrix::from_columns(
            &phi.column_iter()
                .map(|c| c.into_owned())
                .chain(comp.column_iter().take(k - take).map(|c| c.into_owned()))
                .collect::<Vec<_>>(),
        );
    }
    let mut a = DMatrix::zeros(2 * n, 2 * k);
    a.view_mut((0, 0), (n, k)).copy_from(&phi);
    a.view_mut((n, k), (n, k)).copy_from(&phi);
    let basis = SymplecticBasis::new(a)?;
    let (retained, discarded) = split(&svd.sigma, k);
    Ok(BasisReport {
        projection_error: projection_error(&basis, data)?,
        basis,
        method: Method::Cotangent,
        retained,
        discarded,
        warnings,
        greedy: None,
    })
}

/// Complex SVD: the `k` dominant left singular vectors `U = Φ + iΨ` of the
/// complex snapshot matrix give the isotropic frame `E` of `A = [E, JᵀE]`.
///
/// With `p + iq` the frame is `E = [Ψ; Φ]`, with `q + ip` it is `[Φ; Ψ]`;
/// both put the real part of the data's `q` into the `q` rows.
pub fn complex_svd_basis(m: &SnapshotMatrix, k: usize, order: ComplexOrder) -> Result<BasisReport> {
    let n = m.half_dim();
    check_k(k, n)?;
    let data = m.data();
    let (q, p) = (data.rows(0, n), data.rows(n, n));
    let m2 = match order {
        ComplexOrder::Pq => DMatrix::from_fn(n, data.ncols(), |i, j| Complex::new(p[(i, j)], q[(i, j)])),
        ComplexOrder::Qp => DMatrix::from_fn(n, data.ncols(), |i, j| Complex::new(q[(i, j)], p[(i, j)])),
    };
    let (u, sigma) = complex_left_singular(&m2)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let available = sigma.iter().filter(|&&s| s > 1e-12 * smax && s > 0.0).count();
    let take = k.min(available);
    let mut e = DMatrix::zeros(2 * n, take);
    for j in 0..take {
        for i in 0..n {
            let z = u[(i, j)];
            let (top, bottom) = match order {
                ComplexOrder::Pq => (z.im, z.re),
                ComplexOrder::Qp => (z.re, z.im),
            };
            e[(i, j)] = top;
            e[(n + i, j)] = bottom;
        }
    }
    let mut warnings = Vec::new();
    if take < k {
        let msg = format!("complex SVD: only {available} nonzero singular values for k = {k}; padding symplectically");
        log::warn!("{msg}");
        warnings.push(msg);
        e = pad_isotropic(e, k)?;
    }
    let basis = SymplecticBasis::from_isotropic_frame(&e)?;
    let (retained, discarded) = split(&sigma, k);
    Ok(BasisReport {
        projection_error: projection_error(&basis, data)?,
        basis,
        method: Method::ComplexSvd,
        retained,
        discarded,
        warnings,
        greedy: None,
    })
}

/// Extends an isotropic orthonormal frame to `k` columns with canonical unit vectors.
fn pad_isotropic(mut e: DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let dim = e.nrows();
    for i in 0..dim {
        if e.ncols() == k {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        if let Ok(new) = sr_insert(&e, &v, 1e-8) {
            e = append_column(e, &new);
        }
    }
    Ok(e)
}

/// PSD via the SVD-like decomposition: keeps the `k` pairs `(s_i, s_{n+i})`
/// with the largest weighted symplectic singular values.
pub fn psd_svd_like_basis(m: &SnapshotMatrix, k: usize) -> Result<BasisReport> {
    let n = m.half_dim();
    check_k(k, n)?;
    let f = svd_like(m.data(), None)?;
    let w = f.weighted_singular_values();
    if k > w.len() {
        return Err(Error::InsufficientRank {
            requested: k,
            available: w.len(),
        });
    }
    let order = descending_order(&w);
    let chosen = &order[..k];
    let mut a = DMatrix::zeros(2 * n, 2 * k);
    for (c, &i) in chosen.iter().enumerate() {
        a.column_mut(c).copy_from(&f.s.column(i));
        a.column_mut(k + c).copy_from(&f.s.column(n + i));
    }
    let basis = SymplecticBasis::new(a)?;
    let retained = chosen.iter().map(|&i| w[i]).collect();
    let discarded = order[k..].iter().map(|&i| w[i]).collect();
    Ok(BasisReport {
        projection_error: projection_error(&basis, m.data())?,
        basis,
        method: Method::SvdLike,
        retained,
        discarded,
        warnings: Vec::new(),
        greedy: None,
    })
}

/// Orthonormal (non-symplectic) basis of the top `m` left singular vectors.
#[derive(Clone, Debug)]
pub struct PodBasis {
    pub u: DMatrix<f64>,
    pub projection_error: f64,
    pub retained: Vec<f64>,
    pub discarded: Vec<f64>,
}

pub fn pod_basis(snapshots: &SnapshotMatrix, m: usize) -> Result<PodBasis> {
    let data = snapshots.data();
    let dim = data.nrows();
    if m == 0 || m > dim {
        return Err(Error::dim(format!("POD size m = {m} must lie in 1..={dim}")));
    }
    let svd = svd_sorted(data)?;
    let take = m.min(svd.u.ncols());
    let mut u = svd.u.columns(0, take).into_owned();
    if take < m {
        let comp = orthonormal_complement(&u);
        let mut full = DMatrix::zeros(dim, m);
        full.columns_mut(0, take).copy_from(&u);
        full.columns_mut(take, m - take).copy_from(&comp.columns(0, m - take));
        u = full;
    }
    let err = (data - &u * (u.transpose() * data)).norm();
    let (retained, discarded) = split(&svd.sigma, m);
    Ok(PodBasis {
        u,
        projection_error: err,
        retained,
        discarded,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct GreedyOptions {
    pub k_max: usize,
    pub tol: f64,
    pub indicator: GreedyIndicator,
    pub scheme: Scheme,
    pub step: StepOptions,
}

/// Greedy symplectic basis with SR insertion.
///
/// The basis starts from `y_0(μ_1)`. The Hamiltonian indicator picks the
/// parameter whose initial energy is worst reproduced by the projection,
/// integrates it (trajectories are cached) and inserts the worst-projected
/// snapshot. When that snapshot adds nothing, the projection indicator over
/// the cached snapshots takes over for that step. The projection indicator
/// scans the full training set.
pub fn greedy_symplectic_basis(
    model: &dyn HamiltonianModel,
    params: &ParameterSet,
    opts: &GreedyOptions,
) -> Result<BasisReport> {
    let n = model.half_dim();
    check_k(opts.k_max, n)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("greedy tolerance must be positive".into()));
    }
    let samples = params.samples();
    let times = params.times();
    let insert_tol = 1e-10;

    let initial: Vec<DVector<f64>> = samples
        .iter()
        .map(|mu| model.initial_condition(mu))
        .collect::<Result<_>>()?;
    let h0: Vec<f64> = samples
        .par_iter()
        .zip(initial.par_iter())
        .map(|(mu, y)| model.hamiltonian(y, mu))
        .collect::<Result<_>>()?;

    let mut cache: BTreeMap<usize, Trajectory> = BTreeMap::new();
    if opts.indicator == GreedyIndicator::Projection {
        let all = solve_all(model, samples, times, opts.scheme, &opts.step)?;
        cache.extend(all.into_iter().enumerate());
    }

    let mut e = DMatrix::zeros(2 * n, 0);
    let first = sr_insert(&e, &initial[0], insert_tol)?;
    e = append_column(e, &first);
    let mut log = GreedyLog {
        errors: Vec::new(),
        indicators: vec![f64::NAN],
        selected: vec![(0, 0)],
        status: GreedyStatus::MaxSize,
    };
    while e.ncols() < opts.k_max {
        let frame = e.clone();
        let mut inserted = false;
        if opts.indicator == GreedyIndicator::Hamiltonian {
            let ind: Vec<f64> = samples
                .par_iter()
                .zip(initial.par_iter())
                .zip(h0.par_iter())
                .map(|((mu, y), &h)| Ok((h - model.hamiltonian(&project_frame(&frame, y), mu)?).abs()))
                .collect::<Result<_>>()?;
            let j = argmax(&ind);
            if ind[j] <= opts.tol {
                log.status = GreedyStatus::Converged;
                break;
            }
            if !cache.contains_key(&j) {
                let traj = solve_one(model, &samples[j], times, opts.scheme, &opts.step)?;
                cache.insert(j, traj);
            }
            let traj = &cache[&j];
            let errs: Vec<f64> = (0..traj.len())
                .map(|i| (traj.state(i) - project_frame(&frame, &traj.state(i))).norm())
                .collect();
            let i = argmax(&errs);
            match sr_insert(&e, &traj.state(i), insert_tol) {
                Ok(v) => {
                    e = append_column(e, &v);
                    log.indicators.push(ind[j]);
                    log.selected.push((j, i));
                    inserted = true;
                }
                Err(Error::DegenerateCandidate { .. }) => {
                    log::info!("greedy: Hamiltonian candidate degenerate at k = {}; scanning cached snapshots", e.ncols());
                }
                Err(other) => return Err(other),
            }
        }
        if !inserted {
            let Some((j, i, worst)) = worst_snapshot(&frame, &cache) else {
                log.status = GreedyStatus::Saturated;
                break;
            };
            if opts.indicator == GreedyIndicator::Projection && worst <= opts.tol {
                log.status = GreedyStatus::Converged;
                break;
            }
            match sr_insert(&e, &cache[&j].state(i), insert_tol) {
                Ok(v) => {
                    e = append_column(e, &v);
                    log.indicators.push(worst);
                    log.selected.push((j, i));
                }
                Err(Error::DegenerateCandidate { .. }) => {
                    log.status = GreedyStatus::Saturated;
                    break;
                }
                Err(other) => return Err(other),
            }
        }
    }
    // The basis is hierarchical: its prefixes are the iterates, measured on the final cache.
    log.errors = (1..=e.ncols())
        .map(|k| training_error(&e.columns(0, k).into_owned(), &cache))
        .collect();

    let basis = SymplecticBasis::from_isotropic_frame(&e)?;
    let training = SnapshotMatrix::from_trajectories(&cache.values().cloned().collect::<Vec<_>>());
    let projection_error = match training {
        Ok(t) if t.data().ncols() > 0 => projection_error(&basis, t.data())?,
        _ => log.errors.last().copied().unwrap_or(0.0),
    };
    Ok(BasisReport {
        basis,
        method: Method::Greedy,
        projection_error,
        retained: log.indicators.clone(),
        discarded: Vec::new(),
        warnings: Vec::new(),
        greedy: Some(log),
    })
}

fn append_column(e: DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let k = e.ncols();
    let mut out = e.insert_column(k, 0.0);
    out.column_mut(k).copy_from(v);
    out
}

/// `AAᵀy` for `A = [E, JᵀE]`.
fn project_frame(e: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let et = jt_mul(e);
    e * (e.transpose() * y) + &et * (et.transpose() * y)
}

fn project_frame_matrix(e: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let et = jt_mul(e);
    e * (e.transpose() * y) + &et * (et.transpose() * y)
}

fn training_error(e: &DMatrix<f64>, cache: &BTreeMap<usize, Trajectory>) -> f64 {
    cache
        .values()
        .map(|t| (&t.states - project_frame_matrix(e, &t.states)).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Worst-projected cached snapshot as `(parameter index, time index, error)`.
fn worst_snapshot(e: &DMatrix<f64>, cache: &BTreeMap<usize, Trajectory>) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (&j, traj) in cache {
        let res = &traj.states - project_frame_matrix(e, &traj.states);
        for (i, col) in res.column_iter().enumerate() {
            let err = col.norm();
            if best.is_none_or(|(_, _, b)| err > b) {
                best = Some((j, i, err));
            }
        }
    }
    best
}

/// First index of the maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelSpec};
    use crate::symplin::{orthonormality_residual, symplecticity_residual, Block};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn snapshots(rows: usize, cols: usize, seed: u64) -> SnapshotMatrix {
        SnapshotMatrix::from_matrix(random(rows, cols, seed)).unwrap()
    }

    #[test]
    fn cotangent_rank_one() {
        let mut m = DMatrix::zeros(4, 3);
        for j in 0..3 {
            m[(0, j)] = (j + 1) as f64;
            m[(2, j)] = (j + 1) as f64;
        }
        let r = cotangent_lift(&SnapshotMatrix::from_matrix(m).unwrap(), 1).unwrap();
        assert!(r.projection_error < 1e-12);
        assert!((r.basis.matrix()[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert_eq!(r.basis.block(Block::Qs), DMatrix::zeros(2, 1));
        assert_eq!(r.basis.block(Block::Pr), DMatrix::zeros(2, 1));
    }

    #[test]
    fn cotangent_error_is_discarded_energy() {
        let m = snapshots(10, 7, 1);
        let r = cotangent_lift(&m, 2).unwrap();
        let disc: f64 = r.discarded.iter().map(|s| s * s).sum();
        assert!((r.projection_error.powi(2) - disc).abs() <= 1e-8 * disc);
        let full = cotangent_lift(&m, 5).unwrap();
        assert!(full.projection_error < 1e-10);
    }

    #[test]
    fn cotangent_pads_rank_deficient() {
        let mut m = DMatrix::zeros(6, 1);
        m[(0, 0)] = 1.0;
        let r = cotangent_lift(&SnapshotMatrix::from_matrix(m).unwrap(), 3).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(orthonormality_residual(r.basis.matrix()) < 1e-12);
    }

    #[test]
    fn complex_svd_conditions() {
        let m = snapshots(12, 9, 2);
        for order in [ComplexOrder::Pq, ComplexOrder::Qp] {
            let r = complex_svd_basis(&m, 3, order).unwrap();
            let e = r.basis.isotropic_frame();
            let (phi, psi) = (e.rows(0, 6).into_owned(), e.rows(6, 6).into_owned());
            let c1 = phi.transpose() * &phi + psi.transpose() * &psi - DMatrix::identity(3, 3);
            let c2 = phi.transpose() * &psi - psi.transpose() * &phi;
            assert!(crate::linalg::max_abs(&c1) < 1e-10);
            assert!(crate::linalg::max_abs(&c2) < 1e-10);
            let disc: f64 = r.discarded.iter().map(|s| s * s).sum();
            assert!((r.projection_error.powi(2) - disc).abs() <= 1e-8 * disc);
            let cl = cotangent_lift(&m, 3).unwrap();
            assert!(r.projection_error <= cl.projection_error + 1e-12);
        }
    }

    #[test]
    fn complex_svd_rank_one() {
        let mut m = DMatrix::zeros(4, 2);
        m[(0, 0)] = 2.0;
        m[(0, 1)] = -1.0;
        let r = complex_svd_basis(&SnapshotMatrix::from_matrix(m).unwrap(), 1, ComplexOrder::Pq).unwrap();
        assert!(r.projection_error < 1e-14);
    }

    #[test]
    fn svd_like_identities() {
        let m = snapshots(8, 11, 3);
        let r = psd_svd_like_basis(&m, 2).unwrap();
        let total: f64 = r.retained.iter().chain(&r.discarded).map(|w| w * w).sum();
        let norm2 = m.data().norm_squared();
        assert!((total - norm2).abs() <= 1e-8 * norm2);
        let disc: f64 = r.discarded.iter().map(|w| w * w).sum();
        assert!((r.projection_error.powi(2) - disc).abs() <= 1e-8 * norm2);
    }

    #[test]
    fn svd_like_rank_two_pair() {
        let mut m = DMatrix::zeros(4, 5);
        for j in 0..5 {
            let t = j as f64;
            m[(0, j)] = t.cos();
            m[(2, j)] = t.sin();
        }
        let r = psd_svd_like_basis(&SnapshotMatrix::from_matrix(m).unwrap(), 1).unwrap();
        assert!(r.projection_error < 1e-10);
        let err = psd_svd_like_basis(&snapshots(4, 1, 0), 2).unwrap_err();
        assert!(matches!(err, Error::InsufficientRank { .. }));
    }

    #[test]
    fn pod_identities() {
        let m = snapshots(6, 9, 4);
        let p = pod_basis(&m, 3).unwrap();
        let disc: f64 = p.discarded.iter().map(|s| s * s).sum();
        assert!((p.projection_error.powi(2) - disc).abs() <= 1e-8 * disc);
        assert!(pod_basis(&m, 6).unwrap().projection_error < 1e-10);
        assert!(pod_basis(&m, 7).is_err());
    }

    #[test]
    fn snapshot_layout() {
        let model = build_model(&ModelSpec::new("linear_wave", 5)).unwrap();
        let ps = ParameterSet::new(vec![vec![1.0], vec![1.5]], vec![0.0, 0.1, 0.2]).unwrap();
        let m = assemble_snapshots(&model, &ps, Scheme::Midpoint, &StepOptions::default()).unwrap();
        assert_eq!(m.data().shape(), (10, 6));
        assert_eq!(m.provenance()[4], (vec![1.5], 0.1));
        assert_eq!(m.data().column(3).into_owned(), model.initial_condition(&[1.5]).unwrap());
    }

    #[test]
    fn greedy_hierarchy_and_structure() {
        let model = build_model(&ModelSpec::new("linear_wave", 16)).unwrap();
        let samples = (0..4).map(|i| vec![0.5 + 0.5 * i as f64]).collect();
        let ps = ParameterSet::new(samples, ParameterSet::uniform_times(0.0, 0.05, 12)).unwrap();
        for indicator in [GreedyIndicator::Hamiltonian, GreedyIndicator::Projection] {
            let opts = GreedyOptions {
                k_max: 6,
                tol: 1e-12,
                indicator,
                scheme: Scheme::Midpoint,
                step: StepOptions::default(),
            };
            let r = greedy_symplectic_basis(&model, &ps, &opts).unwrap();
            let a = r.basis.matrix();
            assert!(symplecticity_residual(a).unwrap() < 1e-10);
            assert!(orthonormality_residual(a) < 1e-10);
            let log = r.greedy.unwrap();
            for w in log.errors.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn greedy_exact_capture() {
        // Harmonic oscillator in the (q_1, p_1) plane: one pair spans every trajectory.
        let mut s = DMatrix::zeros(4, 4);
        s[(0, 0)] = 1.0;
        s[(2, 2)] = 1.0;
        let mut y0 = DVector::zeros(4);
        y0[0] = 1.0;
        let model = crate::models::QuadraticModel::new(s).unwrap().with_initial(y0).unwrap();
        let ps = ParameterSet::new(vec![vec![]], ParameterSet::uniform_times(0.0, 0.3, 10)).unwrap();
        let opts = GreedyOptions {
            k_max: 2,
            tol: 1e-10,
            indicator: GreedyIndicator::Projection,
            scheme: Scheme::Midpoint,
            step: StepOptions::default(),
        };
        let r = greedy_symplectic_basis(&model, &ps, &opts).unwrap();
        assert_eq!(r.basis.reduced_half_dim(), 1);
        assert!(r.projection_error <= 1e-10);
        assert_eq!(r.greedy.unwrap().status, GreedyStatus::Converged);
    }
}
