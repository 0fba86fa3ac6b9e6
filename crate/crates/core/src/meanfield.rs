//! Large-N saddle point of the collective model.
//!
//! The spin is bosonised around the pumped state (S_x = −N/2) with forward and
//! backward amplitudes α_f, α_b. The per-atom generating function K̄ depends on
//! the four independent variables (α_f, α_f*, α_b, α_b*), and λ/N = K̄ at the
//! stationary point ∇_α K̄ = 0. Derivatives with respect to the counting and
//! tilt fields follow from the implicit function theorem:
//! d²K̄ = K_uv − K_uα H⁻¹ K_αv with H the Hessian in α.

use crate::dual::{c, Field, HyperDual, C64, I};
use crate::error::{Error, Result};
use crate::fcs::Kappa1;
use crate::params::CollectiveScaledParams;
use nalgebra::{Matrix4, Vector4};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

/// Indices into the extended variable vector.
const ALPHA: [usize; 4] = [0, 1, 2, 3];
const CHI_X: usize = 4;
const CHI_Y: usize = 5;
const DELTA: usize = 6;
const H_Z: usize = 7;
const NVARS: usize = 8;

type Point = [C64; NVARS];
type Dir = [f64; NVARS];

fn unit(i: usize) -> Dir {
    let mut d = [0.0; NVARS];
    d[i] = 1.0;
    d
}

/// Per-atom generating function K̄ at the extended point z = (α, χ_x, χ_y, δ, h_z).
pub fn cgf<T: Field>(s: &CollectiveScaledParams, z: &[T; NVARS]) -> T {
    let [af, afs, ab, abs] = [z[0], z[1], z[2], z[3]];
    let (chi_x, chi_y, delta, h_z) = (z[CHI_X], z[CHI_Y], z[DELTA], z[H_Z]);
    let half = T::real(0.5);
    let one = T::one();

    let nf = afs * af;
    let nb = abs * ab;
    let rf = (one - nf).sqrt();
    let rb = (one - nb).sqrt();
    // X = 2⟨S_z⟩/N
    let xf = (afs + af) * rf;
    let xb = (abs + ab) * rb;

    let ex = chi_x.scale(-I).exp();
    let ey = chi_y.scale(-I).exp();
    let (ox, oy) = s.omega_xy();
    let dd = s.detuning_denominator();
    let probe = s.omega != 0.0;
    let g = if probe { (ex - ey).scale(I * (s.eps_delta * ox * oy / (2.0 * dd))) } else { T::zero() };
    let h_l = h_z + delta + g;
    let h_r = h_z - delta - g;
    let hx = T::real(s.h_x);

    let mut k = (hx * (nf - half) + half * h_l * xf).scale(I) - (hx * (nb - half) + half * h_r * xb).scale(I);

    k += T::real(s.kappa_p) * (rf * af * abs * rb - half * nf * (one - nf) - half * nb * (one - nb));

    let pa = |x: T, a: f64| half + x.scale(c(0.5 * a, 0.0));
    let phi = FRAC_PI_4 + s.theta_rot;
    let w = |a: f64| c(phi.cos(), a * phi.sin()) * FRAC_1_SQRT_2;
    if s.kappa_z != 0.0 {
        let gx = |_: f64| c(1.0, 0.0);
        let gy = |a: f64| c(0.0, -a);
        for (jump, gcoef) in [(ex, &gx as &dyn Fn(f64) -> C64), (ey, &gy)] {
            let om = |x: T| pa(x, 1.0).scale(gcoef(1.0) * w(1.0)) + pa(x, -1.0).scale(gcoef(-1.0) * w(-1.0));
            let omt = |x: T| pa(x, 1.0).scale((gcoef(1.0) * w(1.0)).conj()) + pa(x, -1.0).scale((gcoef(-1.0) * w(-1.0)).conj());
            k += T::real(s.kappa_z) * (jump * om(xf) * omt(xb) - half * omt(xf) * om(xf) - half * omt(xb) * om(xb));
        }
    }

    if probe && s.big_gamma != 0.0 {
        let pref = -s.big_gamma / (8.0 * dd);
        for a in [1.0, -1.0] {
            let om = c(ox, a * oy);
            let om_conj_chi = ex.scale(c(ox, 0.0)) - ey.scale(c(0.0, a * oy));
            let om_minus_chi = ex.scale(c(ox, 0.0)) + ey.scale(c(0.0, a * oy));
            k += ((om_conj_chi - T::cst(om.conj())).scale(om * pref)) * pa(xf, a);
            k += ((om_minus_chi - T::cst(om)).scale(om.conj() * pref)) * pa(xb, a);
        }
    }

    if s.n_photons_in > 0.0 {
        let (nx, ny) = background_photons(s);
        let scale = 1.0 / (s.n_atoms * s.tau);
        k += (ex - one).scale(c(nx * scale, 0.0)) + (ey - one).scale(c(ny * scale, 0.0));
    }
    k
}

/// Input photons per polarisation, n̄(cos²φ, sin²φ).
pub fn background_photons(s: &CollectiveScaledParams) -> (f64, f64) {
    let phi = FRAC_PI_4 + s.theta_rot;
    (s.n_photons_in * phi.cos().powi(2), s.n_photons_in * phi.sin().powi(2))
}

/// (K, ∂_u K, ∂_v K, ∂_u∂_v K) at z.
fn seeded(s: &CollectiveScaledParams, z: &Point, u: &Dir, v: &Dir) -> HyperDual {
    let vars: [HyperDual; NVARS] = std::array::from_fn(|i| HyperDual::var(z[i], u[i], v[i]));
    cgf(s, &vars)
}

fn point(alpha: &Vector4<C64>, h_z: f64) -> Point {
    let mut z = [c(0.0, 0.0); NVARS];
    for i in ALPHA {
        z[i] = alpha[i];
    }
    z[H_Z] = c(h_z, 0.0);
    z
}

fn gradient(s: &CollectiveScaledParams, z: &Point) -> Vector4<C64> {
    let zero = [0.0; NVARS];
    Vector4::from_fn(|i, _| seeded(s, z, &unit(i), &zero).e1)
}

fn hessian(s: &CollectiveScaledParams, z: &Point) -> (Vector4<C64>, Matrix4<C64>) {
    let mut g = Vector4::zeros();
    let mut h = Matrix4::zeros();
    for i in 0..4 {
        for j in i..4 {
            let r = seeded(s, z, &unit(i), &unit(j));
            if i == j {
                g[i] = r.e1;
            }
            h[(i, j)] = r.e12;
            h[(j, i)] = r.e12;
        }
    }
    (g, h)
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Residual tolerance relative to max(h_x, κ_P, κ_z, |h_z|).
    pub tol: f64,
    pub max_homotopy: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 100, tol: 1e-12, max_homotopy: 50 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldState {
    /// (α_f, α_f*, α_b, α_b*) at the stationary point.
    pub alpha: Vector4<C64>,
    pub h_z: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl MeanFieldState {
    pub fn occupation(&self) -> f64 {
        (self.alpha[1] * self.alpha[0]).re
    }

    /// ⟨S_x⟩/N.
    pub fn sx_per_atom(&self) -> f64 {
        self.occupation() - 0.5
    }

    /// ⟨S_z⟩/N.
    pub fn sz_per_atom(&self) -> f64 {
        let n = self.alpha[1] * self.alpha[0];
        (0.5 * (self.alpha[1] + self.alpha[0]) * (c(1.0, 0.0) - n).sqrt()).re
    }
}

fn residual_scale(s: &CollectiveScaledParams) -> f64 {
    s.h_x.max(s.kappa_p).max(s.kappa_z).max(s.h_z.abs()).max(f64::MIN_POSITIVE)
}

fn check_domain(alpha: &Vector4<C64>) -> Result<()> {
    for (a, b) in [(0, 1), (2, 3)] {
        let n = (alpha[b] * alpha[a]).norm();
        if !(n < 1.0) {
            return Err(Error::Domain(format!("bosonised occupation |n| = {n} outside the unit disk")));
        }
    }
    Ok(())
}

fn newton(s: &CollectiveScaledParams, start: Vector4<C64>, opts: &NewtonOptions) -> Result<MeanFieldState> {
    let tol = opts.tol * residual_scale(s);
    let mut alpha = start;
    check_domain(&alpha)?;
    for it in 0..opts.max_iter {
        let z = point(&alpha, s.h_z);
        let (g, h) = hessian(s, &z);
        let r = g.camax();
        if r < tol {
            return Ok(MeanFieldState { alpha, h_z: s.h_z, residual: r, iterations: it });
        }
        let step = h.lu().solve(&(-g)).ok_or_else(|| Error::Degenerate("singular mean-field Hessian".into()))?;
        let mut t = 1.0;
        loop {
            let trial = alpha + step * c(t, 0.0);
            if check_domain(&trial).is_ok() {
                let rt = gradient(s, &point(&trial, s.h_z)).camax();
                if rt < r || t < 1e-6 {
                    alpha = trial;
                    break;
                }
            } else if t < 1e-6 {
                return Err(check_domain(&trial).unwrap_err());
            }
            t *= 0.5;
        }
    }
    let r = gradient(s, &point(&alpha, s.h_z)).camax();
    if r < tol {
        return Ok(MeanFieldState { alpha, h_z: s.h_z, residual: r, iterations: opts.max_iter });
    }
    Err(Error::Convergence(format!("mean-field Newton stalled at residual {r:e} (tolerance {tol:e})")))
}

/// Stationary point continued from the pumped state α = 0, which is exact at h_z = 0.
pub fn solve_mean_field(s: &CollectiveScaledParams, opts: &NewtonOptions) -> Result<MeanFieldState> {
    let mut steps = 1;
    let mut last_err = None;
    while steps <= opts.max_homotopy {
        match continue_in_h_z(s, Vector4::zeros(), 0.0, steps, opts) {
            Ok(st) => return Ok(st),
            Err(e @ (Error::Convergence(_) | Error::Domain(_) | Error::Degenerate(_))) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        steps = if steps == opts.max_homotopy { steps + 1 } else { (2 * steps).min(opts.max_homotopy) };
    }
    Err(last_err.unwrap_or_else(|| Error::Convergence("no homotopy steps".into())))
}

/// Warm-started solve, e.g. from the previous point of a sweep.
pub fn solve_from(s: &CollectiveScaledParams, guess: &MeanFieldState, opts: &NewtonOptions) -> Result<MeanFieldState> {
    newton(s, guess.alpha, opts).or_else(|_| continue_in_h_z(s, guess.alpha, guess.h_z, opts.max_homotopy, opts))
}

fn continue_in_h_z(s: &CollectiveScaledParams, start: Vector4<C64>, h0: f64, steps: usize, opts: &NewtonOptions) -> Result<MeanFieldState> {
    let mut alpha = start;
    let mut st = None;
    for k in 1..=steps {
        let h = h0 + (s.h_z - h0) * k as f64 / steps as f64;
        let r = newton(&s.with_h_z(h), alpha, opts)?;
        alpha = r.alpha;
        st = Some(r);
    }
    st.ok_or_else(|| Error::Convergence("empty homotopy".into()))
}

/// Mean-field cumulants, information and rotated-basis signal for N atoms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldReport {
    pub state: MeanFieldState,
    /// Total first cumulant rates N·i∂K̄/∂χ_η, background included.
    pub kappa1: Kappa1,
    /// Per-atom QFI rate −d²K̄/dδ².
    pub qfi_rate: f64,
    /// N·τ·μ²·qfi_rate.
    pub qfi_total: f64,
    /// μ·∂⟨rotated count⟩/∂h_z over τ.
    pub signal: f64,
    pub noise: f64,
    pub snr: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct MeanFieldOptions {
    pub newton: NewtonOptions,
    /// Include the rotated background shot noise in the noise.
    pub rotate_background: bool,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions { newton: NewtonOptions::default(), rotate_background: true }
    }
}

/// Weights (c_x, −c_y) that balance the two polarisations of the probe.
pub fn rotated_weights(s: &CollectiveScaledParams) -> (f64, f64) {
    let (nx, ny) = background_photons(s);
    if nx == 0.0 || ny == 0.0 {
        return (1.0, -1.0);
    }
    let tot = nx + ny;
    (tot / (2.0 * nx), -tot / (2.0 * ny))
}

/// Implicit second derivative d²K̄/dudv at the stationary point.
fn implicit(s: &CollectiveScaledParams, z: &Point, h: &Hessian, u: &Dir, v: &Dir) -> C64 {
    let kuv = seeded(s, z, u, v).e12;
    let ku = Vector4::from_fn(|i, _| seeded(s, z, u, &unit(i)).e12);
    let kv = Vector4::from_fn(|i, _| seeded(s, z, &unit(i), v).e12);
    kuv - ku.dot(&solve(h, &kv))
}

type Hessian = nalgebra::LU<C64, nalgebra::U4, nalgebra::U4>;

// LU rather than the explicit 4×4 inverse, which loses digits once κ_z ≫ h_x.
fn solve(h: &Hessian, b: &Vector4<C64>) -> Vector4<C64> {
    h.solve(b).expect("invertibility checked")
}

pub fn cumulants_meanfield(s: &CollectiveScaledParams, opts: &MeanFieldOptions) -> Result<MeanFieldReport> {
    s.validate()?;
    let state = solve_mean_field(s, &opts.newton)?;
    report_at(s, state, opts)
}

/// Observables at an already converged stationary point.
pub fn report_at(s: &CollectiveScaledParams, state: MeanFieldState, opts: &MeanFieldOptions) -> Result<MeanFieldReport> {
    let z = point(&state.alpha, s.h_z);
    let h = hessian(s, &z).1.lu();
    if !h.is_invertible() {
        return Err(Error::Degenerate("singular mean-field Hessian".into()));
    }
    let zero = [0.0; NVARS];
    let n = s.n_atoms;

    let k1 = |i: usize| (I * seeded(s, &z, &unit(i), &zero).e1).re;
    let kappa1 = Kappa1::from_xy(n * k1(CHI_X), n * k1(CHI_Y));
    let qfi_rate = -implicit(s, &z, &h, &unit(DELTA), &unit(DELTA)).re;

    let (wx, wy) = rotated_weights(s);
    let mut rot = [0.0; NVARS];
    rot[CHI_X] = wx;
    rot[CHI_Y] = wy;
    let nt = n * s.tau;
    // dκ₁/dh_z = i·d²K̄/dχdh_z
    let signal = s.mu * nt * (I * implicit(s, &z, &h, &rot, &unit(H_Z))).re;
    let ka = Vector4::from_fn(|i, _| seeded(s, &z, &rot, &unit(i)).e12);
    let two_point = nt * ka.dot(&solve(&h, &ka)).re;
    let (nx, ny) = background_photons(s);
    let background = if opts.rotate_background { wx * wx * nx + wy * wy * ny } else { 0.0 };
    let noise = background + two_point;
    Ok(MeanFieldReport {
        state,
        kappa1,
        qfi_rate,
        qfi_total: nt * s.mu * s.mu * qfi_rate,
        signal,
        noise,
        snr: signal * signal / noise,
    })
}

/// K̄ at the stationary point, zero up to the Newton tolerance for zero tilt.
pub fn stationary_value(s: &CollectiveScaledParams, state: &MeanFieldState) -> C64 {
    cgf(s, &point(&state.alpha, s.h_z))
}
