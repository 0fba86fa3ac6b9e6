//! Exact finite-N collective benchmarks in the symmetric Dicke sector.

use crate::dual::{C64, I};
use crate::error::{Error, Result};
use crate::fcs::{Kappa1, ResolventOracle};
use crate::meanfield::{background_photons, cumulants_meanfield, rotated_weights, MeanFieldOptions};
use crate::params::CollectiveScaledParams;
use crate::superop::{atom_count, op_dense, spin_matrices, Model, DIR_CHI_X, DIR_CHI_Y, DIR_DELTA, DIR_H_Z};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Largest atom number accepted by the dense collective engine.
pub const FINITE_N_MAX: usize = 80;

/// Tolerated negativity of the stationary density matrix.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteResult {
    pub n: usize,
    /// ⟨S_α⟩/N.
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    /// Smallest eigenvalue of the Hermitian part of ρ_ss.
    pub min_eigenvalue: f64,
    /// Per-atom QFI rate −∂²_δλ₀/N.
    pub qfi_rate: f64,
}

pub fn collective_model(s: &CollectiveScaledParams, n_max: usize) -> Result<Model> {
    s.validate()?;
    let n = atom_count(s.n_atoms, n_max.min(FINITE_N_MAX))?;
    if n == 0 {
        return Err(Error::InvalidParams("collective model needs at least one atom".into()));
    }
    Ok(Model::Collective(*s, n))
}

/// Stationary expectation values and QFI rate from one factorisation.
pub fn solve_finite(s: &CollectiveScaledParams, n_max: usize) -> Result<FiniteResult> {
    let model = collective_model(s, n_max)?;
    Ok(expectations_from(&ResolventOracle::new(&model)?, model.dim() - 1))
}

fn expectations_from(oracle: &ResolventOracle, n: usize) -> FiniteResult {
    let (sx, sy, sz) = spin_matrices(n);
    let d = n + 1;
    let per_atom = |op| oracle.stationary.expectation(&op_dense(op, d)).re / n as f64;
    let rho = oracle.stationary.density_matrix();
    let herm: DMatrix<C64> = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let min_eigenvalue = herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    let so = oracle.second_order(DIR_DELTA, DIR_DELTA);
    FiniteResult {
        n,
        sx: per_atom(&sx),
        sy: per_atom(&sy),
        sz: per_atom(&sz),
        min_eigenvalue,
        qfi_rate: -so.l12.re / n as f64,
    }
}

/// (⟨S_x⟩/N, ⟨S_y⟩/N, ⟨S_z⟩/N) of the stationary state.
pub fn stationary_expectations(s: &CollectiveScaledParams, n_max: usize) -> Result<(f64, f64, f64)> {
    let r = solve_finite(s, n_max)?;
    Ok((r.sx, r.sy, r.sz))
}

pub fn qfi_finite(s: &CollectiveScaledParams, n_max: usize) -> Result<f64> {
    Ok(solve_finite(s, n_max)?.qfi_rate)
}

/// Counting observables of the finite-N model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteSignal {
    pub expectations: FiniteResult,
    /// Total first cumulant rates of the atomic emission.
    pub kappa1: Kappa1,
    pub signal: f64,
    /// Background shot noise plus τ times the full second cumulant along the rotated weights.
    pub noise: f64,
    pub snr: f64,
    pub qfi_total: f64,
}

pub fn finite_signal(s: &CollectiveScaledParams, n_max: usize, rotate_background: bool) -> Result<FiniteSignal> {
    let model = collective_model(s, n_max)?;
    let oracle = ResolventOracle::new(&model)?;
    let expectations = expectations_from(&oracle, model.dim() - 1);
    let xy = oracle.second_order(DIR_CHI_X, DIR_CHI_Y);
    let kappa1 = Kappa1::from_xy((I * xy.l1).re, (I * xy.l2).re);
    let (wx, wy) = rotated_weights(s);
    let rot = [wx, wy, 0.0, 0.0];
    let signal = s.mu * s.tau * (I * oracle.second_order(rot, DIR_H_Z).l12).re;
    let k2 = -oracle.second_order(rot, rot).l12.re;
    let (nx, ny) = background_photons(s);
    let background = if rotate_background { wx * wx * nx + wy * wy * ny } else { nx + ny };
    let noise = background + s.tau * k2;
    let n = expectations.n as f64;
    Ok(FiniteSignal {
        expectations,
        kappa1,
        signal,
        noise,
        snr: signal * signal / noise,
        qfi_total: n * s.tau * s.mu * s.mu * expectations.qfi_rate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub n: usize,
    pub h_z: f64,
    pub kappa_z: f64,
    pub sx: f64,
    pub sz: f64,
    pub sx_mf: f64,
    pub sz_mf: f64,
    pub qfi_rate: f64,
    pub mf_qfi_rate: f64,
    /// mf_qfi_rate / qfi_rate.
    pub ratio: f64,
    pub min_eigenvalue: f64,
}

pub fn benchmark_row(s: &CollectiveScaledParams, n_max: usize, mf: &MeanFieldOptions) -> Result<BenchmarkRow> {
    let f = solve_finite(s, n_max)?;
    let m = cumulants_meanfield(s, mf)?;
    Ok(BenchmarkRow {
        n: f.n,
        h_z: s.h_z,
        kappa_z: s.kappa_z,
        sx: f.sx,
        sz: f.sz,
        sx_mf: m.state.sx_per_atom(),
        sz_mf: m.state.sz_per_atom(),
        qfi_rate: f.qfi_rate,
        mf_qfi_rate: m.qfi_rate,
        ratio: m.qfi_rate / f.qfi_rate,
        min_eigenvalue: f.min_eigenvalue,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchmarkAxis {
    HZ,
    KappaZ,
}

/// Benchmark table over N × grid, rows ordered by N then grid value.
pub fn convergence_sweep(
    base: &CollectiveScaledParams,
    n_list: &[usize],
    axis: BenchmarkAxis,
    grid: &[f64],
    n_max: usize,
    mf: &MeanFieldOptions,
) -> Result<Vec<BenchmarkRow>> {
    let jobs: Vec<CollectiveScaledParams> = n_list
        .iter()
        .flat_map(|&n| {
            grid.iter().map(move |&v| {
                let mut s = *base;
                s.n_atoms = n as f64;
                match axis {
                    BenchmarkAxis::HZ => s.h_z = v,
                    BenchmarkAxis::KappaZ => s.kappa_z = v,
                }
                s
            })
        })
        .collect();
    jobs.par_iter().map(|s| benchmark_row(s, n_max, mf)).collect()
}

/// κ_z at which ⟨S_x⟩/N crosses `level`, by bisection in log κ_z within [lo, hi].
pub fn crossover_kappa_z(base: &CollectiveScaledParams, level: f64, lo: f64, hi: f64, n_max: usize) -> Result<f64> {
    let f = |k: f64| -> Result<f64> {
        let mut s = *base;
        s.kappa_z = k;
        Ok(solve_finite(&s, n_max)?.sx - level)
    };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (fa, fb) = (f(lo)?, f(hi)?);
    if fa.signum() == fb.signum() {
        return Err(Error::Convergence(format!("⟨S_x⟩/N does not cross {level} in [{lo:e}, {hi:e}]")));
    }
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = f(m.exp())?;
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-6 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcs::cumulants_charpoly;

    #[test]
    fn small_n_resolvent_matches_charpoly() {
        let s = CollectiveScaledParams::spin_only(1.0, 0.3, 0.5, 0.7, 3.0);
        let model = collective_model(&s, 80).unwrap();
        let cp = cumulants_charpoly(&model).unwrap();
        let r = qfi_finite(&s, 80).unwrap();
        assert!((cp.qfi_rate / 3.0 - r).abs() < 1e-8 * r.abs(), "{} vs {r}", cp.qfi_rate / 3.0);
    }

    #[test]
    fn zero_field_expectations() {
        let s = CollectiveScaledParams::spin_only(1.0, 0.0, 0.1, 0.05, 10.0);
        let r = solve_finite(&s, 80).unwrap();
        assert!(r.sy.abs() < 1e-10 && r.sz.abs() < 1e-10);
        assert!(r.sx < -0.3 && r.sx >= -0.5);
        assert!(r.min_eigenvalue > -POSITIVITY_TOL);
    }

    #[test]
    fn capacity_error() {
        let s = CollectiveScaledParams::spin_only(1.0, 0.0, 0.1, 0.05, 81.0);
        assert!(matches!(solve_finite(&s, 200), Err(Error::Capacity { .. })));
    }
}
