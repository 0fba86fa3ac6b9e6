//! Propagation of the probe statistics through the vapor.
//!
//! The coordinate is the atom count N_z = ρ_A𝒜z. Mean photon numbers are
//! parameterised as n̄_x = n̄₊cos²(π/4 − θ̄), n̄_y = n̄₊sin²(π/4 − θ̄), so that
//! n̄_x − n̄_y = n̄₊ sin 2θ̄. Covariances refer to the measurement basis rotated
//! along with θ̄.

use crate::closedform;
use crate::error::{Error, Result};
use crate::fcs::{cumulants, second_order, Engine};
use crate::params::MagnetometerParams;
use crate::superop::{Direction, Model, DIR_H_Z};
use ode_solvers::dop_shared::{IntegrationError, OutputType};
use ode_solvers::{Dopri5, System, Vector5};
use std::cell::RefCell;
use std::f64::consts::FRAC_PI_4;

/// Largest |C̃·N| accepted before exp() is considered meaningless.
pub const MAX_EXPONENT: f64 = 700.0;

/// Below this photon number the neglected 1/(ν̄ν̄) terms are no longer small.
pub const MIN_PHOTONS: f64 = 1e6;

/// Ξ = σ_z + iσ_y, the generator of a rotation of (ν_x, ν_y).
const XI: [[f64; 2]; 2] = [[1.0, 1.0], [-1.0, -1.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    TwoLevel,
    FourLevel,
}

/// Single-emitter coefficients, normalised by the input photon number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmitterCoefficients {
    /// Ĭ_η = τκ₁^η/n̄₊.
    pub i_x: f64,
    pub i_y: f64,
    /// D̆ = τ(κ₂⁻⁻ − κ₁⁺)/n̄₊².
    pub d_minus: f64,
    /// C̃ = Ĭ_x + Ĭ_y.
    pub c_tilde: f64,
    pub di_minus_dh: f64,
    pub dc_tilde_dh: f64,
    /// Per-atom QFI rate.
    pub qfi_rate: f64,
    pub provenance: Provenance,
}

impl EmitterCoefficients {
    pub fn i_minus(&self) -> f64 {
        self.i_x - self.i_y
    }

    /// Analytic coefficients: scattering loss plus the γ = γ_z = 0 Faraday terms.
    pub fn from_closed_form(p: &MagnetometerParams) -> Self {
        let s = p.tau / p.n_photons_in;
        let plus = s * closedform::kappa1_plus(p);
        let minus = s * closedform::kappa1_minus(p);
        EmitterCoefficients {
            i_x: 0.5 * (plus + minus),
            i_y: 0.5 * (plus - minus),
            d_minus: closedform::excess_variance(&p.with_n_atoms(1.0)) / (p.n_photons_in * p.n_photons_in),
            c_tilde: plus,
            di_minus_dh: s * closedform::kappa1_minus_slope(p),
            dc_tilde_dh: 0.0,
            qfi_rate: closedform::qfi_rate(p.h_x, p.h_z, p.gamma_p),
            provenance: Provenance::ClosedForm,
        }
    }

    /// Coefficients from the cumulants of one emitter.
    pub fn from_fcs(p: &MagnetometerParams, provenance: Provenance) -> Result<Self> {
        let (model, engine) = match provenance {
            Provenance::TwoLevel => (Model::TwoLevel(*p), Engine::Charpoly),
            Provenance::FourLevel => (Model::FourLevel(*p), Engine::Resolvent),
            Provenance::ClosedForm => return Ok(Self::from_closed_form(p)),
        };
        let r = cumulants(&model)?;
        let slope = |d: Direction| -> Result<f64> {
            // dκ₁/dh_z = i·∂²λ₀/∂χ∂h_z
            let so = second_order(&model, engine, d, DIR_H_Z)?;
            Ok((crate::dual::I * so.l12).re)
        };
        let dk_minus = slope([1.0, -1.0, 0.0, 0.0])?;
        let dk_plus = slope([1.0, 1.0, 0.0, 0.0])?;
        let s = p.tau / p.n_photons_in;
        Ok(EmitterCoefficients {
            i_x: s * r.kappa1.x,
            i_y: s * r.kappa1.y,
            d_minus: s * (r.kappa2_minus() - r.kappa1.plus) / p.n_photons_in,
            c_tilde: s * r.kappa1.plus,
            di_minus_dh: s * dk_minus,
            dc_tilde_dh: s * dk_plus,
            qfi_rate: r.qfi_rate,
            provenance,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowState {
    pub theta: f64,
    pub n_plus: f64,
    /// Stochastic mean-field covariance in the rotated basis.
    pub sigma2: [[f64; 2]; 2],
    pub n_z: f64,
}

impl FlowState {
    pub fn initial(n_photons_in: f64) -> Self {
        FlowState { theta: 0.0, n_plus: n_photons_in, sigma2: [[0.0; 2]; 2], n_z: 0.0 }
    }

    /// v₋ᵀΣ²v₋ with v₋ = (1, −1).
    pub fn sigma_minus(&self) -> f64 {
        let s = &self.sigma2;
        s[0][0] - s[0][1] - s[1][0] + s[1][1]
    }

    /// Σ_tot,− = n̄₊ + v₋ᵀΣ²v₋, shot noise included.
    pub fn sigma_tot_minus(&self) -> f64 {
        self.n_plus + self.sigma_minus()
    }

    /// ⟨n̂_x − n̂_y⟩ in the unrotated basis.
    pub fn mean_difference(&self) -> f64 {
        self.n_plus * (2.0 * self.theta).sin()
    }

    pub fn photon_numbers(&self) -> (f64, f64) {
        let b = FRAC_PI_4 - self.theta;
        (self.n_plus * b.cos().powi(2), self.n_plus * b.sin().powi(2))
    }

    pub fn theta_in_range(&self) -> bool {
        self.theta.abs() < std::f64::consts::FRAC_PI_2
    }
}

fn check_photons(n: f64) -> Result<()> {
    if !(n > MIN_PHOTONS) {
        return Err(Error::InvalidParams(format!("flow equations need n̄₊ > {MIN_PHOTONS:e}, got {n:e}")));
    }
    Ok(())
}

/// Closed-form integration for intensity-independent coefficients.
pub fn propagate_closed(p: &MagnetometerParams, k: &EmitterCoefficients) -> Result<FlowState> {
    check_photons(p.n_photons_in)?;
    let n = p.n_atoms;
    let exponent = k.c_tilde * n;
    if exponent.abs() > MAX_EXPONENT {
        return Err(Error::Overflow(exponent));
    }
    let n_plus = p.n_photons_in * exponent.exp();
    let sm = n * k.d_minus * n_plus * n_plus;
    let q = 0.25 * sm;
    Ok(FlowState { theta: 0.5 * n * k.i_minus(), n_plus, sigma2: [[q, -q], [-q, q]], n_z: n })
}

/// Local single-emitter rates at the current beam intensity, in photons per atom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalRates {
    pub flux: [f64; 2],
    pub diffusion: [[f64; 2]; 2],
    /// Phase-space matrix ∂flux_η/∂ν_η′.
    pub jacobian: [[f64; 2]; 2],
}

pub trait Emitter {
    fn local(&self, n_plus: f64) -> Result<LocalRates>;
}

/// Coefficients frozen at the input intensity and scaled with n̄₊.
pub struct ConstantEmitter(pub EmitterCoefficients);

impl Emitter for ConstantEmitter {
    fn local(&self, n_plus: f64) -> Result<LocalRates> {
        let k = &self.0;
        let d = 0.25 * k.d_minus * n_plus * n_plus;
        let half = 0.5 * k.i_minus();
        let mut jac = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                jac[i][j] = half * XI[i][j] + if i == j { k.c_tilde } else { 0.0 };
            }
        }
        Ok(LocalRates { flux: [k.i_x * n_plus, k.i_y * n_plus], diffusion: [[d, -d], [-d, d]], jacobian: jac })
    }
}

/// Parameters of one emitter seen through a beam with photon numbers (ν_x, ν_y)
/// in the rotated basis; Ω scales with the square root of the intensity.
pub fn emitter_params(p: &MagnetometerParams, nu_x: f64, nu_y: f64) -> MagnetometerParams {
    let n = nu_x + nu_y;
    let mut q = *p;
    q.omega = p.omega * (n / p.n_photons_in).sqrt();
    q.n_photons_in = n;
    q.theta_rot = p.theta_rot + nu_y.sqrt().atan2(nu_x.sqrt()) - FRAC_PI_4;
    q
}

fn fluxes(p: &MagnetometerParams, provenance: Provenance) -> Result<[f64; 2]> {
    let model = match provenance {
        Provenance::FourLevel => Model::FourLevel(*p),
        _ => Model::TwoLevel(*p),
    };
    let r = cumulants(&model)?;
    Ok([p.tau * r.kappa1.x, p.tau * r.kappa1.y])
}

/// Phase-space matrix ∂flux_η/∂ν_η′ by central differences around a balanced beam.
pub fn phase_space_matrix(p: &MagnetometerParams, provenance: Provenance) -> Result<[[f64; 2]; 2]> {
    let nu = 0.5 * p.n_photons_in;
    let h = 1e-4 * nu;
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let shift = |s: f64| if j == 0 { (nu + s, nu) } else { (nu, nu + s) };
        let (ax, ay) = shift(h);
        let (bx, by) = shift(-h);
        let fp = fluxes(&emitter_params(p, ax, ay), provenance)?;
        let fm = fluxes(&emitter_params(p, bx, by), provenance)?;
        for i in 0..2 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Deviation of C − (dθ̄/dN)Ξ from C̃·𝟙, relative to max(|C̃|, |dθ̄/dN|).
pub fn phase_space_residual(p: &MagnetometerParams, provenance: Provenance) -> Result<f64> {
    let k = EmitterCoefficients::from_fcs(p, provenance)?;
    let jac = phase_space_matrix(p, provenance)?;
    let half = 0.5 * k.i_minus();
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { k.c_tilde } else { 0.0 };
            worst = worst.max((jac[i][j] - half * XI[i][j] - want).abs());
        }
    }
    Ok(worst / k.c_tilde.abs().max(half.abs()))
}

/// Recomputes the single-emitter cumulants at the local intensity.
pub struct FcsEmitter {
    pub params: MagnetometerParams,
    pub provenance: Provenance,
}

impl Emitter for FcsEmitter {
    fn local(&self, n_plus: f64) -> Result<LocalRates> {
        let q = emitter_params(&self.params, 0.5 * n_plus, 0.5 * n_plus);
        let model = match self.provenance {
            Provenance::FourLevel => Model::FourLevel(q),
            _ => Model::TwoLevel(q),
        };
        let r = cumulants(&model)?;
        let t = q.tau;
        let mut d = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] = t * r.kappa2[i][j];
            }
        }
        d[0][0] -= t * r.kappa1.x;
        d[1][1] -= t * r.kappa1.y;
        Ok(LocalRates { flux: [t * r.kappa1.x, t * r.kappa1.y], diffusion: d, jacobian: phase_space_matrix(&q, self.provenance)? })
    }
}

/// State (θ̄, u, s_xx, s_xy, s_yy) with u = n̄₊/n₀ and s = Σ²/n₀².
struct FlowSystem<'a> {
    emitter: &'a dyn Emitter,
    n0: f64,
    error: RefCell<Option<Error>>,
}

/// Borrowing handle so the captured error outlives the solver.
struct FlowRef<'s, 'a>(&'s FlowSystem<'a>);

impl System<f64, Vector5<f64>> for FlowRef<'_, '_> {
    fn system(&self, _x: f64, y: &Vector5<f64>, dy: &mut Vector5<f64>) {
        let this = self.0;
        let n_plus = y[1] * this.n0;
        let rates = match this.emitter.local(n_plus) {
            Ok(r) => r,
            Err(e) => {
                this.error.borrow_mut().get_or_insert(e);
                dy.fill(0.0);
                return;
            }
        };
        let dtheta = (rates.flux[0] - rates.flux[1]) / (2.0 * n_plus);
        let mut ct = rates.jacobian;
        for i in 0..2 {
            for j in 0..2 {
                ct[i][j] -= dtheta * XI[i][j];
            }
        }
        let s = [[y[2], y[3]], [y[3], y[4]]];
        let n02 = this.n0 * this.n0;
        let ds = |i: usize, j: usize| {
            let mut v = rates.diffusion[i][j] / n02;
            for k in 0..2 {
                v += ct[i][k] * s[k][j] + s[i][k] * ct[j][k];
            }
            v
        };
        dy[0] = dtheta;
        dy[1] = (rates.flux[0] + rates.flux[1]) / this.n0;
        dy[2] = ds(0, 0);
        dy[3] = ds(0, 1);
        dy[4] = ds(1, 1);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-11, atol: 1e-20 }
    }
}

/// Adaptive Dormand–Prince integration of the flow equations up to N_z = N.
/// Returns the state after every accepted step; the last entry sits at N.
pub fn propagate_ode(p: &MagnetometerParams, emitter: &dyn Emitter, opts: &OdeOptions) -> Result<Vec<FlowState>> {
    check_photons(p.n_photons_in)?;
    let n0 = p.n_photons_in;
    let n_end = p.n_atoms;
    if n_end == 0.0 {
        return Ok(vec![FlowState::initial(n0)]);
    }
    let sys = FlowSystem { emitter, n0, error: RefCell::new(None) };
    let y0 = Vector5::new(0.0, 1.0, 0.0, 0.0, 0.0);
    let mut solver = Dopri5::new(FlowRef(&sys), 0.0, n_end, n_end, y0, opts.rtol, opts.atol);
    solver.set_output(OutputType::Sparse);
    let outcome = solver.integrate();
    let (xs, ys) = solver.results().get();
    let xs = xs.clone();
    let ys = ys.clone();
    drop(solver);
    if let Some(e) = sys.error.into_inner() {
        return Err(e);
    }
    if let Err(e) = outcome {
        let at = match e {
            IntegrationError::StepSizeUnderflow { x }
            | IntegrationError::StiffnessDetected { x }
            | IntegrationError::MaxNumStepReached { x, .. } => x,
        };
        return Err(Error::Stiffness(at));
    }
    let n02 = n0 * n0;
    Ok(xs
        .iter()
        .zip(ys.iter())
        .map(|(&x, y)| FlowState {
            theta: y[0],
            n_plus: y[1] * n0,
            sigma2: [[y[2] * n02, y[3] * n02], [y[3] * n02, y[4] * n02]],
            n_z: x,
        })
        .collect())
}

/// Semiclassical signal, noise and information at N_z = N.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiclassicalSnr {
    pub flow: FlowState,
    /// ∂⟨n̂_x − n̂_y⟩/∂B_z.
    pub signal: f64,
    /// Σ_tot,−.
    pub noise: f64,
    pub snr: f64,
    /// N independent atoms, N·τ·μ²·q.
    pub qfi_total: f64,
    /// Whether the measured-noise bound (4μ²/C²)(Σ_tot,− − n̄₊⁽ᶠ⁾)·Σ_tot,− ≥ signal² holds.
    pub witness_ok: bool,
}

pub fn snr_semiclassical(p: &MagnetometerParams, k: &EmitterCoefficients) -> Result<SemiclassicalSnr> {
    let flow = propagate_closed(p, k)?;
    let n = p.n_atoms;
    let two_theta = 2.0 * flow.theta;
    let signal = p.mu * flow.n_plus * n * (two_theta.cos() * k.di_minus_dh + two_theta.sin() * k.dc_tilde_dh);
    let noise = flow.sigma_tot_minus();
    let snr = signal * signal / noise;
    let qfi_total = n * p.tau * p.mu * p.mu * k.qfi_rate;
    let ca = p.c_a();
    let estimated_qfi = 4.0 * p.mu * p.mu / (ca * ca) * (noise - flow.n_plus);
    Ok(SemiclassicalSnr { flow, signal, noise, snr, qfi_total, witness_ok: estimated_qfi * noise >= signal * signal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::reference_params;

    #[test]
    fn empty_cell() {
        let p = reference_params().with_n_atoms(0.0);
        let k = EmitterCoefficients::from_closed_form(&p);
        let f = propagate_closed(&p, &k).unwrap();
        assert_eq!(f.theta, 0.0);
        assert_eq!(f.n_plus, p.n_photons_in);
        assert_eq!(f.sigma_tot_minus(), p.n_photons_in);
    }

    #[test]
    fn overflow_guard() {
        let mut k = EmitterCoefficients::from_closed_form(&reference_params());
        k.c_tilde = -1e-8;
        let p = reference_params().with_n_atoms(1e11);
        assert!(matches!(propagate_closed(&p, &k), Err(Error::Overflow(_))));
    }

    #[test]
    fn dim_photons_rejected() {
        let mut p = reference_params();
        p.n_photons_in = 1e5;
        let k = EmitterCoefficients::from_closed_form(&p);
        assert!(propagate_closed(&p, &k).is_err());
    }
}
