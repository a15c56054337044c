//! The five experiment commands: full solves, basis generation, reduced
//! simulation, method comparison and dynamical low-rank runs.
//!
//! Every command reads an [`ExperimentConfig`] and writes into its
//! `output_dir`. Outputs depend only on the config; the timing columns of
//! `compare.csv` are the one exception.

use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::dlr::{coefficient_gram, dlr_initial, dlr_integrate};
use crate::error::{Error, Result};
use crate::integrators::{integrate, FullDynamics, Scheme, StepOptions, Trajectory};
use crate::io::{fmt_f64, SnapshotFile};
use crate::models::{HamiltonianModel, ModelKind, WaveModel};
use crate::psd::{
    complex_svd_basis, cotangent_lift, greedy_symplectic_basis, pod_basis, psd_svd_like_basis, GreedyOptions, Method,
    SnapshotMatrix,
};
use crate::rom::{
    diagnostics, dissipative_reduce, galerkin_reduce, noncanonical_reduce, pod_galerkin_reduce, simulate_rom,
    DiagnosticsRecord, ReducedModel,
};
use crate::symplin::{orthonormality_residual, symplecticity_residual, SymplecticBasis};

pub const SNAPSHOTS_FILE: &str = "snapshots.psds";
pub const ENERGY_FILE: &str = "energy.csv";
pub const BASIS_REPORT_FILE: &str = "basis_report.csv";
pub const COMPARE_FILE: &str = "compare.csv";
pub const DLR_STRUCTURE_FILE: &str = "dlr_structure.csv";
pub const DLR_ERRORS_FILE: &str = "dlr_errors.csv";
pub const DLR_BASIS_FILE: &str = "dlr_basis_final.psds";

pub fn snapshots_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(SNAPSHOTS_FILE)
}

pub fn trajectory_path(cfg: &ExperimentConfig, sample: usize) -> PathBuf {
    cfg.output_dir.join(format!("trajectory_{sample:03}.psds"))
}

pub fn basis_path(cfg: &ExperimentConfig, method: Method, k: usize) -> PathBuf {
    cfg.output_dir.join(format!("basis_{}_k{k}.psds", method.name()))
}

fn create_output_dir(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn full_trajectories(
    model: &WaveModel,
    samples: &[Vec<f64>],
    times: &[f64],
    scheme: Scheme,
    opts: &StepOptions,
) -> Result<Vec<Trajectory>> {
    samples
        .par_iter()
        .map(|mu| {
            let y0 = model.initial_condition(mu)?;
            integrate(&FullDynamics::new(model, mu), &y0, mu, times, scheme, opts)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct FomSummary {
    pub snapshots: PathBuf,
    pub trajectories: Vec<PathBuf>,
    pub energy_csv: PathBuf,
    /// `max |H(t) − H(t0)| / (1 + |H(t0)|)` over all samples.
    pub max_energy_drift: f64,
}

/// Full-order trajectories for every training sample, their concatenation
/// as a snapshot file, and `energy.csv` (`sample,t,H,H_drift`).
pub fn run_fom(cfg: &ExperimentConfig) -> Result<FomSummary> {
    let model = cfg.build_model()?;
    let samples = cfg.samples()?;
    let times = cfg.times()?;
    let opts = cfg.step_options(&model, &samples);
    let trajectories = full_trajectories(&model, &samples, &times, cfg.integrator.scheme, &opts)?;
    create_output_dir(cfg)?;

    let mut paths = Vec::with_capacity(trajectories.len());
    for (j, traj) in trajectories.iter().enumerate() {
        let path = trajectory_path(cfg, j);
        SnapshotFile::from_snapshots(&SnapshotMatrix::from_trajectories(std::slice::from_ref(traj))?).write(&path)?;
        paths.push(path);
    }
    let snapshots = SnapshotMatrix::from_trajectories(&trajectories)?;
    let snap_path = snapshots_path(cfg);
    SnapshotFile::from_snapshots(&snapshots).write(&snap_path)?;

    let energy_path = cfg.output_dir.join(ENERGY_FILE);
    let mut w = csv_writer(&energy_path)?;
    w.write_record(["sample", "t", "H", "H_drift"])?;
    let mut max_drift = 0.0f64;
    for (j, traj) in trajectories.iter().enumerate() {
        let mu = &traj.parameter;
        let h0 = model.hamiltonian(&traj.state(0), mu)?;
        for (i, t) in traj.times.iter().enumerate() {
            let h = model.hamiltonian(&traj.state(i), mu)?;
            let drift = (h - h0).abs() / (1.0 + h0.abs());
            max_drift = max_drift.max(drift);
            w.write_record([j.to_string(), fmt_f64(*t), fmt_f64(h), fmt_f64(drift)])?;
        }
    }
    w.flush()?;
    Ok(FomSummary {
        snapshots: snap_path,
        trajectories: paths,
        energy_csv: energy_path,
        max_energy_drift: max_drift,
    })
}

/// One row of `basis_report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisRow {
    pub method: Method,
    pub k: usize,
    pub rows: usize,
    pub cols: usize,
    /// `‖M − AA⁺M‖_F` (or `‖M − UUᵀM‖_F` for POD).
    pub projection_error: f64,
    /// Sum of squared discarded (weighted symplectic) singular values; NaN for greedy.
    pub discarded_energy: f64,
    pub symplecticity: f64,
    pub orthonormality: f64,
}

pub const BASIS_REPORT_HEADER: [&str; 8] = [
    "method",
    "k",
    "rows",
    "cols",
    "projection_error",
    "discarded_energy",
    "symplecticity",
    "orthonormality",
];

#[derive(Clone, Debug)]
pub struct BasisSummary {
    pub path: PathBuf,
    pub row: BasisRow,
    pub warnings: Vec<String>,
}

fn load_snapshots(cfg: &ExperimentConfig) -> Result<SnapshotMatrix> {
    let path = snapshots_path(cfg);
    let m = SnapshotFile::read(&path)
        .map_err(|e| match e {
            Error::Io(io) => Error::config("snapshots", format!("{}: {io}; run `fom` first", path.display())),
            other => other,
        })?
        .into_snapshots()?;
    if m.data().nrows() != 2 * cfg.model.n {
        return Err(Error::dim(format!(
            "snapshot file has {} rows, model dimension is {}",
            m.data().nrows(),
            2 * cfg.model.n
        )));
    }
    Ok(m)
}

/// Output of one basis method, before it is written.
pub struct GeneratedBasis {
    pub matrix: DMatrix<f64>,
    pub projection_error: f64,
    pub discarded_energy: f64,
    pub warnings: Vec<String>,
}

/// Builds a basis of size `k` (POD: `2k` vectors). `snapshots` is unused by greedy.
pub fn generate_basis(
    cfg: &ExperimentConfig,
    model: &WaveModel,
    snapshots: Option<&SnapshotMatrix>,
    method: Method,
    k: usize,
) -> Result<GeneratedBasis> {
    if k == 0 || k > cfg.model.n {
        return Err(Error::config("k", format!("k = {k} must lie in 1..={}", cfg.model.n)));
    }
    let need = || snapshots.ok_or_else(|| Error::config("snapshots", "no snapshots for a data-driven method"));
    let report = match method {
        Method::Pod => {
            let pod = pod_basis(need()?, 2 * k)?;
            let discarded_energy = pod.discarded.iter().map(|s| s * s).sum();
            return Ok(GeneratedBasis {
                matrix: pod.u,
                projection_error: pod.projection_error,
                discarded_energy,
                warnings: Vec::new(),
            });
        }
        Method::Cotangent => cotangent_lift(need()?, k)?,
        Method::ComplexSvd => complex_svd_basis(need()?, k, cfg.basis.complex_order)?,
        Method::SvdLike => psd_svd_like_basis(need()?, k)?,
        Method::Greedy => {
            let samples = cfg.samples()?;
            let opts = GreedyOptions {
                k_max: k,
                tol: cfg.basis.greedy_tol,
                indicator: cfg.basis.greedy_indicator,
                scheme: cfg.integrator.scheme,
                step: cfg.step_options(model, &samples),
            };
            greedy_symplectic_basis(model, &cfg.parameter_set()?, &opts)?
        }
    };
    let discarded_energy = if method == Method::Greedy {
        f64::NAN
    } else {
        report.discarded.iter().map(|s| s * s).sum()
    };
    Ok(GeneratedBasis {
        matrix: report.basis.into_matrix(),
        projection_error: report.projection_error,
        discarded_energy,
        warnings: report.warnings,
    })
}

/// Writes the basis and appends a row to `basis_report.csv`.
pub fn run_basis(cfg: &ExperimentConfig, method: Method, k: usize) -> Result<BasisSummary> {
    let model = cfg.build_model()?;
    let snapshots = match method {
        Method::Greedy => None,
        _ => Some(load_snapshots(cfg)?),
    };
    let generated = generate_basis(cfg, &model, snapshots.as_ref(), method, k)?;
    create_output_dir(cfg)?;
    let path = basis_path(cfg, method, k);
    let a = generated.matrix;
    let row = BasisRow {
        method,
        k,
        rows: a.nrows(),
        cols: a.ncols(),
        projection_error: generated.projection_error,
        discarded_energy: generated.discarded_energy,
        symplecticity: symplecticity_residual(&a)?,
        orthonormality: orthonormality_residual(&a),
    };
    SnapshotFile::from_matrix(a).write(&path)?;
    append_basis_row(&cfg.output_dir.join(BASIS_REPORT_FILE), &row)?;
    for w in &generated.warnings {
        log::warn!("{w}");
    }
    Ok(BasisSummary {
        path,
        row,
        warnings: generated.warnings,
    })
}

fn append_basis_row(path: &Path, row: &BasisRow) -> Result<()> {
    let fresh = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    if fresh {
        w.write_record(BASIS_REPORT_HEADER)?;
    }
    w.write_record([
        row.method.name().to_string(),
        row.k.to_string(),
        row.rows.to_string(),
        row.cols.to_string(),
        fmt_f64(row.projection_error),
        fmt_f64(row.discarded_energy),
        fmt_f64(row.symplecticity),
        fmt_f64(row.orthonormality),
    ])?;
    w.flush()?;
    Ok(())
}

/// Reduced model matching the model kind: symplectic Galerkin for canonical
/// and dissipative models, orthonormal Galerkin for non-canonical ones, or
/// the POD-Galerkin baseline when `pod` is set.
pub fn reduce<'a>(
    model: &'a WaveModel,
    basis: &DMatrix<f64>,
    pod: bool,
    require_vertical: bool,
) -> Result<ReducedModel<'a>> {
    if basis.nrows() != 2 * model.half_dim() {
        return Err(Error::dim(format!(
            "basis has {} rows, model dimension is {}",
            basis.nrows(),
            2 * model.half_dim()
        )));
    }
    if pod {
        return pod_galerkin_reduce(model, basis);
    }
    match model.kind() {
        ModelKind::Canonical => galerkin_reduce(model, &SymplecticBasis::new(basis.clone())?),
        ModelKind::Dissipative => dissipative_reduce(model, &SymplecticBasis::new(basis.clone())?, require_vertical),
        ModelKind::Noncanonical => noncanonical_reduce(model, basis),
    }
}

#[derive(Clone, Debug)]
pub struct RomSummary {
    pub samples: Vec<Vec<f64>>,
    pub records: Vec<DiagnosticsRecord>,
    pub diagnostics: Vec<PathBuf>,
    pub trajectories: Vec<PathBuf>,
}

struct OnlineRun {
    fom: Trajectory,
    rom: Trajectory,
    record: DiagnosticsRecord,
    seconds: f64,
}

fn online(
    model: &WaveModel,
    rm: &ReducedModel<'_>,
    samples: &[Vec<f64>],
    times: &[f64],
    opts: &StepOptions,
    fom: Vec<Trajectory>,
) -> Result<Vec<OnlineRun>> {
    fom.into_iter()
        .zip(samples)
        .map(|(fom, mu)| {
            let start = Instant::now();
            let z0 = rm.initial_condition(&model.initial_condition(mu)?)?;
            let rom = simulate_rom(rm, &z0, mu, times, Scheme::Midpoint, opts)?;
            let seconds = start.elapsed().as_secs_f64();
            let record = diagnostics(&fom, &rom, rm, mu)?;
            Ok(OnlineRun {
                fom,
                rom,
                record,
                seconds,
            })
        })
        .collect()
}

/// Reduced simulation with `basis_file` at every online sample; writes
/// `rom_diagnostics_NNN.csv` and `rom_trajectory_NNN.psds`.
pub fn run_rom(cfg: &ExperimentConfig, basis_file: &Path, pod: bool) -> Result<RomSummary> {
    let model = cfg.build_model()?;
    let file = SnapshotFile::read(basis_file).map_err(|e| match e {
        Error::Io(io) => Error::config("basis", format!("{}: {io}", basis_file.display())),
        other => other,
    })?;
    let rm = reduce(&model, &file.data, pod, cfg.rom.require_vertical)?;
    let samples = cfg.online_samples()?;
    let times = cfg.times()?;
    let opts = cfg.step_options(&model, &samples);
    let fom = full_trajectories(&model, &samples, &times, cfg.integrator.scheme, &opts)?;
    let runs = online(&model, &rm, &samples, &times, &opts, fom)?;
    create_output_dir(cfg)?;
    let mut summary = RomSummary {
        samples: samples.clone(),
        records: Vec::new(),
        diagnostics: Vec::new(),
        trajectories: Vec::new(),
    };
    for (j, run) in runs.into_iter().enumerate() {
        let diag = cfg.output_dir.join(format!("rom_diagnostics_{j:03}.csv"));
        run.record.write_csv(BufWriter::new(File::create(&diag)?))?;
        let traj = cfg.output_dir.join(format!("rom_trajectory_{j:03}.psds"));
        SnapshotFile::from_snapshots(&SnapshotMatrix::from_trajectories(std::slice::from_ref(&run.rom))?).write(&traj)?;
        debug_assert_eq!(run.fom.len(), run.rom.len());
        summary.records.push(run.record);
        summary.diagnostics.push(diag);
        summary.trajectories.push(traj);
    }
    Ok(summary)
}

/// One row of `compare.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub method: Method,
    pub k: usize,
    pub offline_seconds: f64,
    pub online_seconds: f64,
    /// `max_{μ,t} ‖y(t) − Az(t)‖₂`.
    pub max_state_error: f64,
    /// `max_{μ,t} |H(Az(t)) − H(Az(t0))|`.
    pub max_h_drift: f64,
}

pub const COMPARE_HEADER: [&str; 6] = ["method", "k", "offline_s", "online_s", "max_state_err", "max_h_drift"];

/// Builds every basis in `methods` at `basis.k`, runs it online at every
/// online sample and writes `compare.csv`. POD uses `2k` vectors and
/// POD-Galerkin reduction.
pub fn run_compare(cfg: &ExperimentConfig, methods: &[Method]) -> Result<Vec<CompareRow>> {
    if methods.is_empty() {
        return Err(Error::config("methods", "empty method list"));
    }
    let model = cfg.build_model()?;
    let k = cfg.basis.k;
    let snapshots = if methods.iter().any(|&m| m != Method::Greedy) {
        Some(match load_snapshots(cfg) {
            Ok(m) => m,
            Err(Error::Config { .. }) => {
                let samples = cfg.samples()?;
                let opts = cfg.step_options(&model, &samples);
                SnapshotMatrix::from_trajectories(&full_trajectories(
                    &model,
                    &samples,
                    &cfg.times()?,
                    cfg.integrator.scheme,
                    &opts,
                )?)?
            }
            Err(e) => return Err(e),
        })
    } else {
        None
    };
    let samples = cfg.online_samples()?;
    let times = cfg.times()?;
    let opts = cfg.step_options(&model, &samples);
    let fom = full_trajectories(&model, &samples, &times, cfg.integrator.scheme, &opts)?;

    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let start = Instant::now();
        let generated = generate_basis(cfg, &model, snapshots.as_ref(), method, k)?;
        let offline = start.elapsed().as_secs_f64();
        let rm = reduce(&model, &generated.matrix, method == Method::Pod, cfg.rom.require_vertical)?;
        let runs = online(&model, &rm, &samples, &times, &opts, fom.clone())?;
        rows.push(CompareRow {
            method,
            k,
            offline_seconds: offline,
            online_seconds: runs.iter().map(|r| r.seconds).sum(),
            max_state_error: runs.iter().map(|r| r.record.max_state_error()).fold(0.0, f64::max),
            max_h_drift: runs.iter().map(|r| r.record.max_rom_drift()).fold(0.0, f64::max),
        });
    }
    create_output_dir(cfg)?;
    let mut w = csv_writer(&cfg.output_dir.join(COMPARE_FILE))?;
    w.write_record(COMPARE_HEADER)?;
    for r in &rows {
        w.write_record([
            r.method.name().to_string(),
            r.k.to_string(),
            fmt_f64(r.offline_seconds),
            fmt_f64(r.online_seconds),
            fmt_f64(r.max_state_error),
            fmt_f64(r.max_h_drift),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct DlrSummary {
    pub max_symplecticity: f64,
    pub max_orthonormality: f64,
    /// `max_{j,t} ‖y_j(t) − A(t)Z_j(t)‖₂`.
    pub max_state_error: f64,
    /// `max_t |Σ_j H_j(t) − Σ_j H_j(t0)| / (1 + |Σ_j H_j(t0)|)`.
    pub max_total_energy_drift: f64,
}

/// Dynamical low-rank run over the training samples; writes
/// `dlr_structure.csv` (`t,symplecticity,orthonormality,min_eig_gram,H_total`),
/// `dlr_errors.csv` (`sample,t,state_err,H,H_fom`), the final basis and
/// `dlr_trajectory_NNN.psds` reconstructions.
pub fn run_dlr(cfg: &ExperimentConfig) -> Result<DlrSummary> {
    let model = cfg.build_model()?;
    let samples = cfg.samples()?;
    let times = cfg.times()?;
    let fom_opts = cfg.step_options(&model, &samples);
    let opts = cfg.dlr_step_options(&model, &samples);
    let initial = dlr_initial(&model, &samples, cfg.dlr.k, times[0])?;
    let states = dlr_integrate(&initial, &model, &samples, &times, &opts)?;
    let fom = full_trajectories(&model, &samples, &times, cfg.integrator.scheme, &fom_opts)?;
    create_output_dir(cfg)?;

    let mut summary = DlrSummary {
        max_symplecticity: 0.0,
        max_orthonormality: 0.0,
        max_state_error: 0.0,
        max_total_energy_drift: 0.0,
    };
    let mut structure = csv_writer(&cfg.output_dir.join(DLR_STRUCTURE_FILE))?;
    structure.write_record(["t", "symplecticity", "orthonormality", "min_eig_gram", "H_total"])?;
    let mut errors = csv_writer(&cfg.output_dir.join(DLR_ERRORS_FILE))?;
    errors.write_record(["sample", "t", "state_err", "H", "H_fom"])?;
    let mut reconstructions = vec![DMatrix::zeros(2 * cfg.model.n, times.len()); samples.len()];
    let mut h_total0 = None;
    for (i, s) in states.iter().enumerate() {
        let sym = s.symplecticity_residual()?;
        let orth = s.orthonormality_residual();
        let r = s.reconstruct();
        let mut h_total = 0.0;
        for (j, mu) in samples.iter().enumerate() {
            let y = r.column(j).into_owned();
            let h = model.hamiltonian(&y, mu)?;
            let y_fom = fom[j].state(i);
            let err = (&y_fom - &y).norm();
            h_total += h;
            summary.max_state_error = summary.max_state_error.max(err);
            errors.write_record([
                j.to_string(),
                fmt_f64(s.t),
                fmt_f64(err),
                fmt_f64(h),
                fmt_f64(model.hamiltonian(&y_fom, mu)?),
            ])?;
            reconstructions[j].set_column(i, &y);
        }
        let h0 = *h_total0.get_or_insert(h_total);
        summary.max_symplecticity = summary.max_symplecticity.max(sym);
        summary.max_orthonormality = summary.max_orthonormality.max(orth);
        summary.max_total_energy_drift = summary.max_total_energy_drift.max((h_total - h0).abs() / (1.0 + h0.abs()));
        structure.write_record([
            fmt_f64(s.t),
            fmt_f64(sym),
            fmt_f64(orth),
            fmt_f64(coefficient_gram(&s.z)?.min_eig),
            fmt_f64(h_total),
        ])?;
    }
    structure.flush()?;
    errors.flush()?;
    if let Some(last) = states.last() {
        SnapshotFile::from_matrix(last.a.clone()).write(&cfg.output_dir.join(DLR_BASIS_FILE))?;
    }
    for (j, (data, mu)) in reconstructions.into_iter().zip(&samples).enumerate() {
        let provenance = times.iter().map(|&t| (mu.clone(), t)).collect();
        SnapshotFile { data, provenance }.write(&cfg.output_dir.join(format!("dlr_trajectory_{j:03}.psds")))?;
    }
    Ok(summary)
}
