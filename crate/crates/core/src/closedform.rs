//! Analytic results for the semiclassical and collective models.
//!
//! The semiclassical formulas hold for γ = γ_z = 0 (no scattering) with the
//! Faraday coupling C = Ω²ε_Δ/(ε_Δ² + Γ²/4). They share no code with the
//! numeric engines and serve as regression targets for them.
//!
//! The [`printed`] submodule keeps alternative coefficient sets for comparison.

use crate::dual::{c, C64};
use crate::params::{CollectiveScaledParams, MagnetometerParams};
use crate::superop::CountingFields;

/// 2h_z² + 4h_x² + γ_P².
fn den(h_x: f64, h_z: f64, gamma_p: f64) -> f64 {
    2.0 * h_z * h_z + 4.0 * h_x * h_x + gamma_p * gamma_p
}

/// Per-atom QFI rate −∂²_δλ₀ of the pumped two-level atom, in units of h_z⁻²·s⁻¹.
pub fn qfi_rate(h_x: f64, h_z: f64, gamma_p: f64) -> f64 {
    let (g, hx2, hz2) = (gamma_p, h_x * h_x, h_z * h_z);
    let g2 = g * g;
    let num = g2 * g2 * g2 + 8.0 * g2 * g2 * hx2 + 6.0 * g2 * g2 * hz2 + 16.0 * g2 * hx2 * hx2 - 8.0 * g2 * hx2 * hz2
        + 12.0 * g2 * hz2 * hz2
        + 8.0 * hz2 * hz2 * hz2;
    let d = g2 + 4.0 * hx2 + 2.0 * hz2;
    4.0 * num / (g * d * d * d)
}

/// Same rate in the two-term form (8h_z² + 4γ²)/D₃ − 2(h_z² + h_x² + 5γ²/4)(8γh_xh_z)²/D₃³.
pub fn qfi_rate_two_term(h_x: f64, h_z: f64, gamma_p: f64) -> f64 {
    let g = gamma_p;
    let d3 = g * den(h_x, h_z, g);
    let cross = 8.0 * g * h_x * h_z;
    (8.0 * h_z * h_z + 4.0 * g * g) / d3
        - 2.0 * (h_z * h_z + h_x * h_x + 1.25 * g * g) * cross * cross / (d3 * d3 * d3)
}

/// Difference rate κ₁⁻ = 2C·h_x·h_z/(2h_z² + 4h_x² + γ_P²) per atom.
pub fn kappa1_minus(p: &MagnetometerParams) -> f64 {
    2.0 * p.c_a() * p.h_x * p.h_z / den(p.h_x, p.h_z, p.gamma_p)
}

/// ∂κ₁⁻/∂h_z per atom.
pub fn kappa1_minus_slope(p: &MagnetometerParams) -> f64 {
    let d = den(p.h_x, p.h_z, p.gamma_p);
    let s = 4.0 * p.h_x * p.h_x + p.gamma_p * p.gamma_p - 2.0 * p.h_z * p.h_z;
    2.0 * p.c_a() * p.h_x * s / (d * d)
}

/// Net scattering loss per atom, κ₁⁺ = −γΩ²/(4(ε_Δ² + Γ²/4)).
pub fn kappa1_plus(p: &MagnetometerParams) -> f64 {
    -p.gamma * p.omega * p.omega / (4.0 * p.detuning_denominator())
}

/// Mean rotation angle θ̄ = (τ/n̄₊)·N·C·h_x·h_z/(2h_z² + 4h_x² + γ_P²).
pub fn theta_bar(p: &MagnetometerParams) -> f64 {
    0.5 * p.n_atoms * p.tau * kappa1_minus(p) / p.n_photons_in
}

/// Transmitted photons n̄₊⁽ᶠ⁾ = n̄₊⁽ⁱ⁾·exp(N·τ·κ₁⁺/n̄₊⁽ⁱ⁾).
pub fn transmitted_photons(p: &MagnetometerParams) -> f64 {
    p.n_photons_in * (p.n_atoms * p.tau * kappa1_plus(p) / p.n_photons_in).exp()
}

/// ⟨∂n̂_rot,−/∂B_z⟩ in a fixed rotated basis, without absorption.
pub fn signal_rotated(p: &MagnetometerParams) -> f64 {
    p.mu * p.tau * p.n_atoms * kappa1_minus_slope(p)
}

/// Excess (non-shot) variance τN(C/2)²·q(h_z).
pub fn excess_variance(p: &MagnetometerParams) -> f64 {
    let half_c = 0.5 * p.c_a();
    p.tau * p.n_atoms * half_c * half_c * qfi_rate(p.h_x, p.h_z, p.gamma_p)
}

/// ⟨Δn̂²_rot,−⟩ = n̄₊⁽ᶠ⁾ + τN(C/2)²·q(h_z).
pub fn variance_rotated(p: &MagnetometerParams) -> f64 {
    transmitted_photons(p) + excess_variance(p)
}

/// Per-atom QFI τμ²·q(h_z).
pub fn qfi_semiclassical(p: &MagnetometerParams) -> f64 {
    p.tau * p.mu * p.mu * qfi_rate(p.h_x, p.h_z, p.gamma_p)
}

/// Large-N ratio of SNR to QFI as a plain ratio of frequencies, h_x/γ_P.
pub fn crb_ratio_limit(p: &MagnetometerParams) -> f64 {
    p.h_x / p.gamma_p
}

/// Plateau of 𝓢/𝓘 at h_z = 0 once the excess noise dominates the shot noise
/// and before absorption sets in: signal²/(excess variance · QFI) = (h_x/γ_P)².
pub fn crb_ratio_plateau(p: &MagnetometerParams) -> f64 {
    let r = p.h_x / p.gamma_p;
    r * r
}

/// Collective QFI at B_z = 0,
/// τμ²N[κ_P/(h_x² + κ_P²/4) + 2κ_z·h_x²/(h_x² + κ_P²/4)²].
pub fn qfi_collective(s: &CollectiveScaledParams) -> f64 {
    let h2 = s.h_x * s.h_x + 0.25 * s.kappa_p * s.kappa_p;
    s.tau * s.mu * s.mu * s.n_atoms * (s.kappa_p / h2 + 2.0 * s.kappa_z * s.h_x * s.h_x / (h2 * h2))
}

/// Coefficients a₀…a₄ of det(z − L) for the two-level generator at
/// γ = γ_z = 0, as functions of the tilted fields h_L and h_R.
pub fn charpoly_coefficients_closed(p: &MagnetometerParams, cf: &CountingFields) -> [C64; 5] {
    let (ox, oy) = p.omega_xy();
    let eps = p.eps_delta;
    let dd = eps * eps;
    let ex = C64::new(0.0, -cf.chi_x).exp();
    let ey = C64::new(0.0, -cf.chi_y).exp();
    let g = c(0.0, eps * ox * oy / (2.0 * dd)) * (ex - ey);
    let h_l = c(p.h_z + cf.delta, 0.0) + g;
    let h_r = c(p.h_z - cf.delta, 0.0) - g;
    let gp = p.gamma_p;
    let hx2 = p.h_x * p.h_x;
    let diff = h_l - h_r;
    let sq = h_l * h_l - h_r * h_r;
    let a0 = sq * sq / 16.0 + diff * diff * (gp * gp / 8.0) + c(0.0, 0.25 * p.h_x * gp) * sq;
    let a1 = diff * diff * (gp / 2.0) + h_l * h_r * (gp / 2.0) + c(gp * hx2 + gp * gp * gp / 4.0, 0.0);
    let a2 = (h_l * h_l + h_r * h_r) * 0.5 + c(hx2 + 1.25 * gp * gp, 0.0);
    [a0, a1, a2, c(2.0 * gp, 0.0), c(1.0, 0.0)]
}

/// Alternative coefficient sets, kept to quantify their deviation from the
/// consistent formulas above.
pub mod printed {
    use super::den;
    use crate::params::{CollectiveScaledParams, MagnetometerParams};

    /// C_A = Ω²/ε_Δ.
    fn c_a(p: &MagnetometerParams) -> f64 {
        p.omega * p.omega / p.eps_delta
    }

    /// θ̄ with the prefactor 32.
    pub fn theta_bar(p: &MagnetometerParams) -> f64 {
        p.tau / p.n_photons_in * p.n_atoms * c_a(p) * 32.0 * p.h_x * p.h_z / den(p.h_x, p.h_z, p.gamma_p)
    }

    /// Signal with the prefactors 32 and +64.
    pub fn signal_rotated(p: &MagnetometerParams) -> f64 {
        let d = den(p.h_x, p.h_z, p.gamma_p);
        let k = p.tau * p.n_atoms * c_a(p) * p.mu;
        k * 32.0 * p.h_x / d + k * 64.0 * p.h_x * p.h_z * p.h_z / (d * d)
    }

    /// Excess variance with the coefficients 32h_z² and 4h_z².
    pub fn excess_variance(p: &MagnetometerParams) -> f64 {
        let (g, hx, hz) = (p.gamma_p, p.h_x, p.h_z);
        let ca2 = c_a(p) * c_a(p);
        let d3 = 2.0 * g * hz * hz + 4.0 * g * hx * hx + g * g * g;
        let cross = 8.0 * g * hx * hz;
        p.tau * p.n_atoms * ca2 * (32.0 * hz * hz + 4.0 * g * g) / d3
            - 2.0 * p.tau * p.n_atoms * ca2 * (4.0 * hz * hz + 4.0 * hx * hx + 1.25 * g * g) * cross * cross / (d3 * d3 * d3)
    }

    /// Per-atom QFI with the cross term (2γ_P h_x h_z)².
    pub fn qfi_semiclassical(p: &MagnetometerParams) -> f64 {
        let (g, hx, hz) = (p.gamma_p, p.h_x, p.h_z);
        let d3 = g * den(hx, hz, g);
        let cross = 2.0 * g * hx * hz;
        p.tau * p.mu * p.mu * ((8.0 * hz * hz + 4.0 * g * g) / d3 - 2.0 * (hz * hz + hx * hx + 1.25 * g * g) * cross * cross / (d3 * d3 * d3))
    }

    /// Collective QFI with the κ_z coefficients (κ_z/(2κ_P) + 1) and (h_x² − κ_P²/4).
    pub fn qfi_collective(s: &CollectiveScaledParams) -> f64 {
        let h2 = s.h_x * s.h_x + 0.25 * s.kappa_p * s.kappa_p;
        let n = s.n_atoms;
        s.tau * s.mu * s.mu
            * (n * s.kappa_p / h2 * (s.kappa_z / (2.0 * s.kappa_p) + 1.0)
                + n * s.kappa_z * (s.h_x * s.h_x - 0.25 * s.kappa_p * s.kappa_p) / (h2 * h2))
    }
}
