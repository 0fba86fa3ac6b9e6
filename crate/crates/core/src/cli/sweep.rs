//! Row evaluation for every sweep mode.

use super::config::{Mode, ModelKind, RunConfig, SweepVar};
use super::grid::Grid;
use super::table::{Cell, Row, Table};
use crate::closedform;
use crate::dual::c;
use crate::error::{Error, Result};
use crate::fcs::{cumulants, stationary_expectation, Kappa1};
use crate::finite::{benchmark_row, finite_signal};
use crate::flow::{snr_semiclassical, EmitterCoefficients, Provenance};
use crate::meanfield::{cumulants_meanfield, MeanFieldOptions};
use crate::params::MagnetometerParams;
use crate::superop::Model;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Relative slack in the SNR ≤ QFI comparison.
pub const CRB_SLACK: f64 = 1e-9;

const SWEEP_COLUMNS: [&str; 12] = [
    "kappa1_x[1/s]",
    "kappa1_y[1/s]",
    "kappa1_plus[1/s]",
    "kappa1_minus[1/s]",
    "theta[rad]",
    "signal[s]",
    "noise[1]",
    "snr[s^2]",
    "qfi[s^2]",
    "crb_ok[bool]",
    "sx[1]",
    "sz[1]",
];

const WITNESS_COLUMNS: [&str; 10] = [
    "snr_semiclassical[s^2]",
    "qfi_semiclassical[s^2]",
    "crb_ok_semiclassical[bool]",
    "witness_ok_semiclassical[bool]",
    "snr_collective[s^2]",
    "qfi_collective[s^2]",
    "crb_ok_collective[bool]",
    "ratio_semiclassical[1]",
    "ratio_limit[1]",
    "ratio_plateau[1]",
];

const BENCHMARK_COLUMNS: [&str; 8] = [
    "sx[1]",
    "sz[1]",
    "sx_mf[1]",
    "sz_mf[1]",
    "qfi_rate[s]",
    "mf_qfi_rate[s]",
    "ratio[1]",
    "min_eigenvalue[1]",
];

pub fn default_grid(mode: Mode, var: SweepVar) -> &'static str {
    match (mode, var) {
        (Mode::SweepBz, _) | (Mode::BenchmarkFinite, SweepVar::HZ) => "lin:-2.5M:2.5M:101",
        (Mode::SweepN, _) | (Mode::CrbWitness, SweepVar::N) => "log:1e6:1e13:29",
        (Mode::SweepPump, _) => "log:1k:10M:31",
        (Mode::SweepKappa, _) | (Mode::BenchmarkFinite, _) => "log:1e-2:1e2:17",
        (Mode::CrbWitness, _) => "lin:-2.5M:2.5M:101",
    }
}

fn default_sweep_var(mode: Mode) -> SweepVar {
    match mode {
        Mode::BenchmarkFinite => SweepVar::HZ,
        Mode::CrbWitness => SweepVar::N,
        _ => SweepVar::HZ,
    }
}

fn key_column(mode: Mode, model: ModelKind, var: SweepVar) -> &'static str {
    match mode {
        Mode::SweepBz => "h_z[1/s]",
        Mode::SweepN => "n_atoms[1]",
        Mode::SweepPump if model.is_collective() => "kappa_P[1/s]",
        Mode::SweepPump => "gamma_P[1/s]",
        Mode::SweepKappa => "kappa_z[1/s]",
        Mode::BenchmarkFinite | Mode::CrbWitness => match var {
            SweepVar::HZ => "h_z[1/s]",
            SweepVar::KappaZ => "kappa_z[1/s]",
            SweepVar::N => "n_atoms[1]",
        },
    }
}

/// A resolved run: what to vary, over which values, with which engine.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub mode: Mode,
    pub model: ModelKind,
    pub var: SweepVar,
    pub grid: Vec<f64>,
    pub n_list: Vec<usize>,
}

impl SweepSpec {
    pub fn resolve(mode: Mode, cfg: &RunConfig) -> Result<Self> {
        let model = match mode {
            Mode::BenchmarkFinite => ModelKind::CollectiveFinite,
            _ => cfg.model.unwrap_or(ModelKind::TwoLevel),
        };
        if mode == Mode::SweepKappa && !model.is_collective() {
            return Err(Error::Config("sweep-kappa needs collective-mf or collective-finite".into()));
        }
        let var = cfg.sweep_var.unwrap_or(default_sweep_var(mode));
        match (mode, var) {
            (Mode::BenchmarkFinite, SweepVar::N) => {
                return Err(Error::Config("benchmark-finite sweeps h_z or kappa_z; atom numbers come from n_list".into()))
            }
            (Mode::CrbWitness, SweepVar::KappaZ) => return Err(Error::Config("crb-witness sweeps n_atoms or h_z".into())),
            _ => {}
        }
        let grid_spec = cfg.grid.clone().unwrap_or_else(|| default_grid(mode, var).to_string());
        let grid = Grid::parse(&grid_spec)?.values();
        let n_list = cfg.n_list.clone().unwrap_or_else(|| vec![10, 20, 40]);
        Ok(SweepSpec { mode, model, var, grid, n_list })
    }
}

fn flag_le(snr: f64, qfi: f64) -> bool {
    snr <= qfi * (1.0 + CRB_SLACK)
}

fn ground_spin(model: &Model) -> (DMatrix<crate::dual::C64>, DMatrix<crate::dual::C64>) {
    let mut sx = DMatrix::zeros(model.dim(), model.dim());
    sx[(0, 1)] = c(0.5, 0.0);
    sx[(1, 0)] = c(0.5, 0.0);
    (sx, model.generator_f())
}

fn semiclassical_cells(p: &MagnetometerParams, kind: ModelKind) -> Result<Vec<Cell>> {
    p.validate()?;
    let (model, prov) = match kind {
        ModelKind::FourLevel => (Model::FourLevel(*p), Provenance::FourLevel),
        _ => (Model::TwoLevel(*p), Provenance::TwoLevel),
    };
    let k = EmitterCoefficients::from_fcs(p, prov)?;
    let r = cumulants(&model)?;
    let s = snr_semiclassical(p, &k)?;
    let (sx, sz) = ground_spin(&model);
    Ok(row_cells(
        &r.kappa1,
        s.flow.theta,
        s.signal,
        s.noise,
        s.snr,
        s.qfi_total,
        stationary_expectation(&model, &sx)?.re,
        stationary_expectation(&model, &sz)?.re,
    ))
}

#[allow(clippy::too_many_arguments)]
fn row_cells(k: &Kappa1, theta: f64, signal: f64, noise: f64, snr: f64, qfi: f64, sx: f64, sz: f64) -> Vec<Cell> {
    vec![
        Cell::Num(k.x),
        Cell::Num(k.y),
        Cell::Num(k.plus),
        Cell::Num(k.minus),
        Cell::Num(theta),
        Cell::Num(signal),
        Cell::Num(noise),
        Cell::Num(snr),
        Cell::Num(qfi),
        Cell::Flag(flag_le(snr, qfi)),
        Cell::Num(sx),
        Cell::Num(sz),
    ]
}

fn small_angle(k: &Kappa1, tau: f64, n_photons: f64) -> f64 {
    if n_photons > 0.0 {
        0.5 * tau * k.minus / n_photons
    } else {
        0.0
    }
}

fn collective_cells(cfg: &RunConfig, p: &MagnetometerParams, kind: ModelKind, kappa_p: Option<f64>, kappa_z: Option<f64>) -> Result<Vec<Cell>> {
    let mut s = cfg.collective(p);
    if let Some(k) = kappa_p {
        s.kappa_p = k;
    }
    if let Some(k) = kappa_z {
        s.kappa_z = k;
    }
    let mf = MeanFieldOptions { rotate_background: cfg.rotate_background, ..Default::default() };
    match kind {
        ModelKind::CollectiveFinite => {
            let f = finite_signal(&s, cfg.n_max, cfg.rotate_background)?;
            let theta = small_angle(&f.kappa1, s.tau, s.n_photons_in);
            Ok(row_cells(&f.kappa1, theta, f.signal, f.noise, f.snr, f.qfi_total, f.expectations.sx, f.expectations.sz))
        }
        _ => {
            let r = cumulants_meanfield(&s, &mf)?;
            let theta = small_angle(&r.kappa1, s.tau, s.n_photons_in);
            Ok(row_cells(&r.kappa1, theta, r.signal, r.noise, r.snr, r.qfi_total, r.state.sx_per_atom(), r.state.sz_per_atom()))
        }
    }
}

fn sweep_cells(cfg: &RunConfig, spec: &SweepSpec, x: f64) -> Result<Vec<Cell>> {
    let mut p = cfg.params;
    let (mut kp, mut kz) = (None, None);
    match spec.mode {
        Mode::SweepBz => p.h_z = x,
        Mode::SweepN => p.n_atoms = x,
        Mode::SweepPump if spec.model.is_collective() => kp = Some(x),
        Mode::SweepPump => p.gamma_p = x,
        Mode::SweepKappa => kz = Some(x),
        _ => unreachable!("not a plain sweep"),
    }
    match spec.model {
        ModelKind::TwoLevel | ModelKind::FourLevel => semiclassical_cells(&p, spec.model),
        kind => collective_cells(cfg, &p, kind, kp, kz),
    }
}

fn witness_cells(cfg: &RunConfig, spec: &SweepSpec, x: f64) -> Result<Vec<Cell>> {
    let mut p = cfg.params;
    match spec.var {
        SweepVar::N => p.n_atoms = x,
        _ => p.h_z = x,
    }
    p.validate()?;
    let k = EmitterCoefficients::from_fcs(&p, Provenance::TwoLevel)?;
    let sc = snr_semiclassical(&p, &k)?;
    let s = cfg.collective(&p);
    let mf = MeanFieldOptions { rotate_background: cfg.rotate_background, ..Default::default() };
    let co = cumulants_meanfield(&s, &mf)?;
    Ok(vec![
        Cell::Num(sc.snr),
        Cell::Num(sc.qfi_total),
        Cell::Flag(flag_le(sc.snr, sc.qfi_total)),
        Cell::Flag(sc.witness_ok),
        Cell::Num(co.snr),
        Cell::Num(co.qfi_total),
        Cell::Flag(flag_le(co.snr, co.qfi_total)),
        Cell::Num(sc.snr / sc.qfi_total),
        Cell::Num(closedform::crb_ratio_limit(&p)),
        Cell::Num(closedform::crb_ratio_plateau(&p)),
    ])
}

fn benchmark_cells(cfg: &RunConfig, spec: &SweepSpec, n: usize, x: f64) -> Result<Vec<Cell>> {
    let mut p = cfg.params;
    p.n_atoms = n as f64;
    let mut s = cfg.collective(&p);
    match spec.var {
        SweepVar::KappaZ => s.kappa_z = x,
        _ => s.h_z = x,
    }
    let mf = MeanFieldOptions { rotate_background: cfg.rotate_background, ..Default::default() };
    let r = benchmark_row(&s, cfg.n_max, &mf)?;
    Ok([r.sx, r.sz, r.sx_mf, r.sz_mf, r.qfi_rate, r.mf_qfi_rate, r.ratio, r.min_eigenvalue].map(Cell::Num).to_vec())
}

/// Evaluates all rows in parallel and returns them in grid order.
pub fn run_sweep(cfg: &RunConfig, spec: &SweepSpec) -> Table {
    let key = key_column(spec.mode, spec.model, spec.var).to_string();
    let msg = |r: Result<Vec<Cell>>| r.map_err(|e| e.to_string());
    match spec.mode {
        Mode::BenchmarkFinite => {
            let jobs: Vec<(usize, f64)> = spec.n_list.iter().flat_map(|&n| spec.grid.iter().map(move |&x| (n, x))).collect();
            let rows = jobs
                .par_iter()
                .map(|&(n, x)| Row { key: vec![n as f64, x], cells: msg(benchmark_cells(cfg, spec, n, x)) })
                .collect();
            Table { key_columns: vec!["n_atoms[1]".into(), key], columns: BENCHMARK_COLUMNS.map(String::from).to_vec(), rows }
        }
        Mode::CrbWitness => {
            let rows = spec.grid.par_iter().map(|&x| Row { key: vec![x], cells: msg(witness_cells(cfg, spec, x)) }).collect();
            Table { key_columns: vec![key], columns: WITNESS_COLUMNS.map(String::from).to_vec(), rows }
        }
        _ => {
            let rows = spec.grid.par_iter().map(|&x| Row { key: vec![x], cells: msg(sweep_cells(cfg, spec, x)) }).collect();
            Table { key_columns: vec![key], columns: SWEEP_COLUMNS.map(String::from).to_vec(), rows }
        }
    }
}
