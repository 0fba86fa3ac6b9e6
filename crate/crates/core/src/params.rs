//! Physical inputs and derived quantities.
//!
//! All rates and frequencies are plain s⁻¹; no factor 2π is inserted.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnetometerParams {
    /// Zeeman coupling μB_x (s⁻¹).
    pub h_x: f64,
    /// Zeeman coupling μB_z (s⁻¹), the estimated parameter.
    pub h_z: f64,
    /// Magnetic moment; only rescales Fisher informations from h_z to B_z.
    pub mu: f64,
    /// Spontaneous decay into all directions, γ = 3γ_D.
    pub gamma: f64,
    /// Decay along the probe direction.
    pub gamma_z: f64,
    pub gamma_p: f64,
    /// Rabi frequency Ω.
    pub omega: f64,
    /// Detuning ε_Δ.
    pub eps_delta: f64,
    pub tau: f64,
    pub n_atoms: f64,
    /// Total input photons n̄₊ over τ.
    pub n_photons_in: f64,
    /// Atoms per unit propagation length, ρ_A·𝒜.
    pub column: f64,
    /// Rotation of the measurement basis; 0 gives equal x and y components.
    pub theta_rot: f64,
}

impl MagnetometerParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("h_x", self.h_x),
            ("mu", self.mu),
            ("gamma", self.gamma),
            ("gamma_z", self.gamma_z),
            ("gamma_P", self.gamma_p),
            ("omega", self.omega),
            ("tau", self.tau),
            ("n_atoms", self.n_atoms),
            ("n_photons_in", self.n_photons_in),
            ("column", self.column),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if !self.h_z.is_finite() || !self.theta_rot.is_finite() {
            return Err(Error::InvalidParams("h_z and theta_rot must be finite".into()));
        }
        if self.eps_delta == 0.0 || !self.eps_delta.is_finite() {
            return Err(Error::InvalidParams("eps_delta must be finite and nonzero".into()));
        }
        Ok(())
    }

    /// Effective decay rate Γ = γ + γ_z.
    pub fn big_gamma(&self) -> f64 {
        self.gamma + self.gamma_z
    }

    /// ε_Δ² + Γ²/4.
    pub fn detuning_denominator(&self) -> f64 {
        let g = self.big_gamma();
        self.eps_delta * self.eps_delta + 0.25 * g * g
    }

    /// Faraday coupling Ω²ε_Δ/(ε_Δ² + Γ²/4), which tends to C_A = Ω²/ε_Δ.
    pub fn c_a(&self) -> f64 {
        self.omega * self.omega * self.eps_delta / self.detuning_denominator()
    }

    /// (Ω_x, Ω_y) in the measurement basis.
    pub fn omega_xy(&self) -> (f64, f64) {
        let phi = FRAC_PI_4 + self.theta_rot;
        (self.omega * phi.cos(), self.omega * phi.sin())
    }

    pub fn photon_flux(&self) -> f64 {
        self.n_photons_in / self.tau
    }

    /// Relative mismatch of Ω = 2√(γ_z·ν̇).
    pub fn consistency_error(&self) -> f64 {
        let want = 2.0 * (self.gamma_z * self.photon_flux()).sqrt();
        if self.omega == 0.0 {
            return want;
        }
        (want - self.omega).abs() / self.omega
    }

    pub fn check_consistency(&self, tol: f64) -> Result<()> {
        let err = self.consistency_error();
        if err > tol {
            return Err(Error::InvalidParams(format!(
                "omega, gamma_z and photon flux are inconsistent (relative mismatch {err:e})"
            )));
        }
        Ok(())
    }

    pub fn with_h_z(mut self, h_z: f64) -> Self {
        self.h_z = h_z;
        self
    }

    pub fn with_n_atoms(mut self, n: f64) -> Self {
        self.n_atoms = n;
        self
    }
}

/// γ_z = Ω²/(4ν̇), the rate that makes the counting consistent with the flux.
pub fn derived_gamma_z(omega: f64, photon_flux: f64) -> Result<f64> {
    if !(photon_flux > 0.0) {
        return Err(Error::UndefinedConsistency);
    }
    Ok(omega * omega / (4.0 * photon_flux))
}

/// D₂ line of ⁸⁵Rb with the probe and pump settings of the reference setup.
pub fn reference_params() -> MagnetometerParams {
    let omega = 25e6;
    let tau = 1.0;
    let n_photons_in = 6e12;
    let gamma_z = derived_gamma_z(omega, n_photons_in / tau).expect("positive flux");
    MagnetometerParams {
        h_x: 5e5,
        h_z: 0.0,
        mu: 1.0,
        gamma: 6e6,
        gamma_z,
        gamma_p: 3e4,
        omega,
        eps_delta: 10e9,
        tau,
        n_atoms: 8e10,
        n_photons_in,
        column: 1.0,
        theta_rot: 0.0,
    }
}

/// Inputs of the collective model.
///
/// Besides the effective rates this carries the probe parameters needed for the
/// Faraday coupling, absorption and the photon background.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollectiveScaledParams {
    pub kappa_p: f64,
    pub kappa_z: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub tau: f64,
    pub n_atoms: f64,
    pub mu: f64,
    pub omega: f64,
    pub eps_delta: f64,
    pub big_gamma: f64,
    pub n_photons_in: f64,
    pub theta_rot: f64,
}

impl CollectiveScaledParams {
    /// κ_P = N·γ_P, κ_z = N·γ_z·Ω²/(ε_Δ² + Γ²/4).
    pub fn from_params(p: &MagnetometerParams) -> Self {
        let kappa_p = p.n_atoms * p.gamma_p;
        Self::with_pump(p, kappa_p)
    }

    /// Same as [`from_params`](Self::from_params) with an explicit κ_P, e.g. a
    /// per-atom pump rescaled as γ_P/N so that κ_P stays fixed across N.
    pub fn with_pump(p: &MagnetometerParams, kappa_p: f64) -> Self {
        CollectiveScaledParams {
            kappa_p,
            kappa_z: p.n_atoms * p.gamma_z * p.omega * p.omega / p.detuning_denominator(),
            h_x: p.h_x,
            h_z: p.h_z,
            tau: p.tau,
            n_atoms: p.n_atoms,
            mu: p.mu,
            omega: p.omega,
            eps_delta: p.eps_delta,
            big_gamma: p.big_gamma(),
            n_photons_in: p.n_photons_in,
            theta_rot: p.theta_rot,
        }
    }

    /// Pure spin model: no probe light, only pump and collective dephasing.
    pub fn spin_only(h_x: f64, h_z: f64, kappa_p: f64, kappa_z: f64, n_atoms: f64) -> Self {
        CollectiveScaledParams {
            kappa_p,
            kappa_z,
            h_x,
            h_z,
            tau: 1.0,
            n_atoms,
            mu: 1.0,
            omega: 0.0,
            eps_delta: 1.0,
            big_gamma: 0.0,
            n_photons_in: 0.0,
            theta_rot: 0.0,
        }
    }

    pub fn detuning_denominator(&self) -> f64 {
        self.eps_delta * self.eps_delta + 0.25 * self.big_gamma * self.big_gamma
    }

    pub fn c_a(&self) -> f64 {
        self.omega * self.omega * self.eps_delta / self.detuning_denominator()
    }

    pub fn omega_xy(&self) -> (f64, f64) {
        let phi = FRAC_PI_4 + self.theta_rot;
        (self.omega * phi.cos(), self.omega * phi.sin())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_P", self.kappa_p),
            ("kappa_z", self.kappa_z),
            ("h_x", self.h_x),
            ("tau", self.tau),
            ("n_atoms", self.n_atoms),
            ("omega", self.omega),
            ("n_photons_in", self.n_photons_in),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.eps_delta == 0.0 {
            return Err(Error::InvalidParams("eps_delta must be nonzero".into()));
        }
        Ok(())
    }

    pub fn with_h_z(mut self, h_z: f64) -> Self {
        self.h_z = h_z;
        self
    }
}
