//! Counting cumulants and quantum Fisher information from tilted generators.
//!
//! Three routes are provided: implicit differentiation of the characteristic
//! polynomial, resolvent perturbation theory around the stationary state, and
//! direct propagation of the tilted master equation. Conventions:
//! κ₁ = i∂_χλ₀, κ₂ = −∂²_χλ₀, QFI rate = −∂²_δλ₀.

use crate::dual::{c, Field, HyperDual, C64};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, trace_row, vec_trace, vectorize, Stationary};
use crate::superop::{CountingFields, Direction, Model, Tilt, TiltedLiouvillian, DIR_CHI_X, DIR_CHI_Y, DIR_DELTA};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kappa1 {
    pub x: f64,
    pub y: f64,
    pub plus: f64,
    pub minus: f64,
}

impl Kappa1 {
    pub fn from_xy(x: f64, y: f64) -> Self {
        Kappa1 { x, y, plus: x + y, minus: x - y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CumulantReport {
    /// λ₀ at zero tilt.
    pub lambda0: C64,
    pub kappa1: Kappa1,
    /// Second cumulant rates over the channels (x, y).
    pub kappa2: [[f64; 2]; 2],
    pub qfi_rate: f64,
    pub snr: Option<f64>,
}

impl CumulantReport {
    pub fn kappa2_plus(&self) -> f64 {
        self.kappa2[0][0] + 2.0 * self.kappa2[0][1] + self.kappa2[1][1]
    }

    pub fn kappa2_minus(&self) -> f64 {
        self.kappa2[0][0] - 2.0 * self.kappa2[0][1] + self.kappa2[1][1]
    }

    /// Second cumulant along a weighted combination w_x·χ_x + w_y·χ_y.
    pub fn kappa2_along(&self, wx: f64, wy: f64) -> f64 {
        wx * wx * self.kappa2[0][0] + 2.0 * wx * wy * self.kappa2[0][1] + wy * wy * self.kappa2[1][1]
    }
}

/// λ₀ and its derivatives along two directions: (λ_1, λ_2, λ_12).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondOrder {
    pub l1: C64,
    pub l2: C64,
    pub l12: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Charpoly,
    Resolvent,
}

/// Coefficients a₀…a_n of det(z − L), a_n = 1, by the Faddeev–LeVerrier recursion.
pub fn charpoly_coefficients<T: Field>(l: &[T], n: usize) -> Vec<T> {
    let mut a = vec![T::zero(); n + 1];
    a[n] = T::one();
    let mut m = vec![T::zero(); n * n];
    for k in 1..=n {
        // M_k = L·M_{k−1} + a_{n−k+1}·I
        let mut next = vec![T::zero(); n * n];
        for i in 0..n {
            for kk in 0..n {
                let lik = l[i * n + kk];
                if lik.is_exact_zero() {
                    continue;
                }
                for j in 0..n {
                    let mkj = m[kk * n + j];
                    if !mkj.is_exact_zero() {
                        next[i * n + j] += lik * mkj;
                    }
                }
            }
            next[i * n + i] += a[n - k + 1];
        }
        // a_{n−k} = −tr(L·M_k)/k
        let mut tr = T::zero();
        for i in 0..n {
            for kk in 0..n {
                tr += l[i * n + kk] * next[kk * n + i];
            }
        }
        a[n - k] = tr.scale(c(-1.0 / k as f64, 0.0));
        m = next;
    }
    a
}

/// Largest tolerated root residual relative to the gap. Faddeev–LeVerrier is
/// fine for the two-level generator and fails badly on the four-level one,
/// whose rates span ten decades.
pub const CHARPOLY_CONDITION: f64 = 1e-9;

/// Implicit derivatives of the root λ₀(0) = 0 of Σ a_k λ^k.
fn root_derivatives(a: &[HyperDual]) -> Result<SecondOrder> {
    let n = a.len() - 1;
    let a1 = a[1].re;
    // a₁ has the units of a₂·(rate); compare against a₂·tr L
    let reference = a[2].re.norm() * a[n - 1].re.norm();
    if a1.norm() == 0.0 || a1.norm() < 1e-14 * reference {
        return Err(Error::Degenerate("a₁ = 0".into()));
    }
    // At zero tilt a₀ vanishes exactly; what the recursion leaves behind shifts
    // the root by a₀/a₁, to be compared with the gap scale a₁/a₂.
    let shift = a[0].re.norm() / a1.norm();
    let gap = a1.norm() / a[2].re.norm();
    if !(shift <= CHARPOLY_CONDITION * gap) {
        return Err(Error::Convergence(format!(
            "characteristic polynomial lost precision: root residual {shift:.3e} against gap {gap:.3e}"
        )));
    }
    let l1 = -a[0].e1 / a1;
    let l2 = -a[0].e2 / a1;
    let l12 = -(a[0].e12 + a[1].e1 * l2 + a[1].e2 * l1 + 2.0 * a[2].re * l1 * l2) / a1;
    Ok(SecondOrder { l1, l2, l12 })
}

pub fn second_order_charpoly(model: &Model, d1: Direction, d2: Direction) -> Result<SecondOrder> {
    let l = model.build(&Tilt::<HyperDual>::seeded(model.h_z(), d1, d2));
    let n = l.size();
    let a = charpoly_coefficients(&l.matrix, n);
    root_derivatives(&a)
}

/// Resolvent route sharing one factorization of the zero-tilt generator.
pub struct ResolventOracle {
    model: Model,
    pub stationary: Stationary,
    ones: DVector<C64>,
}

impl ResolventOracle {
    pub fn new(model: &Model) -> Result<Self> {
        let d = model.dim();
        let l0 = model.build_plain(&CountingFields::zero()).to_dmatrix();
        let stationary = Stationary::new(&l0, d)?;
        let ones = DVector::from_fn(d * d, |k, _| if k / d == k % d { c(1.0, 0.0) } else { c(0.0, 0.0) });
        Ok(ResolventOracle { model: *model, stationary, ones })
    }

    pub fn second_order(&self, d1: Direction, d2: Direction) -> SecondOrder {
        let l = self.model.build(&Tilt::<HyperDual>::seeded(self.model.h_z(), d1, d2));
        let [_, la, lb, lab] = l.split();
        self.from_derivatives(&la, &lb, &lab)
    }

    /// λ_a = ⟨⟨1|L_a|ρ⟩⟩, λ_ab = ⟨⟨1|L_ab|ρ⟩⟩ − ⟨⟨1|L_a L^D L_b|ρ⟩⟩ − ⟨⟨1|L_b L^D L_a|ρ⟩⟩.
    pub fn from_derivatives(&self, la: &DMatrix<C64>, lb: &DMatrix<C64>, lab: &DMatrix<C64>) -> SecondOrder {
        let rho = &self.stationary.rho;
        let ua = la * rho;
        let ub = lb * rho;
        let l1 = self.ones.dot(&ua);
        let l2 = self.ones.dot(&ub);
        let ra = self.stationary.drazin(&ua);
        let rb = self.stationary.drazin(&ub);
        let l12 = self.ones.dot(&(lab * rho)) - self.ones.dot(&(la * rb)) - self.ones.dot(&(lb * ra));
        SecondOrder { l1, l2, l12 }
    }
}

pub fn second_order(model: &Model, engine: Engine, d1: Direction, d2: Direction) -> Result<SecondOrder> {
    match engine {
        Engine::Charpoly => second_order_charpoly(model, d1, d2),
        Engine::Resolvent => Ok(ResolventOracle::new(model)?.second_order(d1, d2)),
    }
}

fn assemble(xx: SecondOrder, yy: SecondOrder, xy: SecondOrder, dd: SecondOrder) -> CumulantReport {
    let i = c(0.0, 1.0);
    let k1x = (i * xx.l1).re;
    let k1y = (i * yy.l1).re;
    let kxy = -xy.l12.re;
    CumulantReport {
        lambda0: c(0.0, 0.0),
        kappa1: Kappa1::from_xy(k1x, k1y),
        kappa2: [[-xx.l12.re, kxy], [kxy, -yy.l12.re]],
        qfi_rate: -dd.l12.re,
        snr: None,
    }
}

pub fn cumulants_charpoly(model: &Model) -> Result<CumulantReport> {
    let f = |d1, d2| second_order_charpoly(model, d1, d2);
    let mut r = assemble(f(DIR_CHI_X, DIR_CHI_X)?, f(DIR_CHI_Y, DIR_CHI_Y)?, f(DIR_CHI_X, DIR_CHI_Y)?, f(DIR_DELTA, DIR_DELTA)?);
    r.lambda0 = dominant_eigenvalue(&model.build_plain(&CountingFields::zero()))?;
    Ok(r)
}

pub fn cumulants_resolvent_oracle(model: &Model) -> Result<CumulantReport> {
    let o = ResolventOracle::new(model)?;
    let f = |d1, d2| o.second_order(d1, d2);
    Ok(assemble(f(DIR_CHI_X, DIR_CHI_X), f(DIR_CHI_Y, DIR_CHI_Y), f(DIR_CHI_X, DIR_CHI_Y), f(DIR_DELTA, DIR_DELTA)))
}

/// Cumulants with the engine the model supports best: the characteristic
/// polynomial for the two-level model, the resolvent otherwise.
pub fn cumulants(model: &Model) -> Result<CumulantReport> {
    match model {
        Model::TwoLevel(_) => cumulants_charpoly(model),
        _ => cumulants_resolvent_oracle(model),
    }
}

/// Real-part separation (in the model's rate units) below which two leading
/// eigenvalues are considered indistinguishable.
pub const BRANCH_TOL: f64 = 1e-3;

/// Eigenvalue of maximal real part, refusing near-degenerate leading pairs.
pub fn dominant_eigenvalue(l: &TiltedLiouvillian) -> Result<C64> {
    let ev = eigenvalues(&l.to_dmatrix())?;
    let mut sorted = ev.clone();
    sorted.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    if sorted.len() > 1 {
        let tol = BRANCH_TOL * sorted[0].re.abs().max(1.0);
        if (sorted[0].re - sorted[1].re).abs() < tol && (sorted[0] - sorted[1]).norm() < tol {
            return Err(Error::BranchAmbiguity(format!("{}", sorted[0]), format!("{}", sorted[1])));
        }
    }
    Ok(sorted[0])
}

/// λ₀ continued from zero tilt in eight equal steps.
pub fn dominant_eigenvalue_continued(model: &Model, cf: &CountingFields) -> Result<C64> {
    const STEPS: usize = 8;
    let ev0 = eigenvalues(&model.build_plain(&CountingFields::zero()).to_dmatrix())?;
    let mut sorted = ev0.clone();
    sorted.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    let mut current = sorted[0];
    let gap = if sorted.len() > 1 { (sorted[0] - sorted[1]).norm() } else { 1.0 };
    for k in 1..=STEPS {
        let s = k as f64 / STEPS as f64;
        let cfs = CountingFields { chi_x: cf.chi_x * s, chi_y: cf.chi_y * s, delta: cf.delta * s };
        let ev = eigenvalues(&model.build_plain(&cfs).to_dmatrix())?;
        let mut by_dist = ev.clone();
        by_dist.sort_by(|a, b| (a - current).norm().partial_cmp(&(b - current).norm()).unwrap());
        if by_dist.len() > 1 && (by_dist[0].re - by_dist[1].re).abs() < 1e-3 * gap && (by_dist[0] - by_dist[1]).norm() < 1e-3 * gap {
            return Err(Error::BranchAmbiguity(format!("{}", by_dist[0]), format!("{}", by_dist[1])));
        }
        current = by_dist[0];
    }
    Ok(current)
}

#[derive(Clone, Copy, Debug)]
pub struct TimeDomainOptions {
    pub tau_sim: f64,
    pub chi_step: f64,
    pub delta_step: f64,
}

struct Propagator {
    model: Model,
    rho0: DVector<C64>,
    t1: f64,
    t2: f64,
}

impl Propagator {
    /// λ(tilt) from the log-trace slope between t1 and t2 = 2·t1.
    fn rate(&self, cf: &CountingFields) -> Result<C64> {
        let d = self.model.dim();
        let l = self.model.build_plain(cf).to_dmatrix();
        let e1 = expm(&(l * c(self.t1, 0.0)));
        let v1 = &e1 * &self.rho0;
        let v2 = &e1 * &v1;
        let (tr1, tr2) = (vec_trace(&v1, d), vec_trace(&v2, d));
        if !(tr1.norm() > 0.0 && tr2.norm() > 0.0 && tr1.is_finite() && tr2.is_finite()) {
            return Err(Error::Convergence("tilted trace vanished or overflowed".into()));
        }
        Ok((tr2.ln() - tr1.ln()) / (self.t2 - self.t1))
    }
}

fn richardson(f: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    Ok((4.0 * f(h / 2.0)? - f(h)?) / 3.0)
}

fn time_domain_with(model: &Model, rho0: &DVector<C64>, t1: f64, opts: &TimeDomainOptions) -> Result<CumulantReport> {
    let p = Propagator { model: *model, rho0: rho0.clone(), t1, t2: 2.0 * t1 };
    let lam = |cx: f64, cy: f64, dl: f64| p.rate(&CountingFields { chi_x: cx, chi_y: cy, delta: dl });
    let l0 = lam(0.0, 0.0, 0.0)?;
    let h = opts.chi_step;
    // κ₁ = i∂λ: central differences of the imaginary part
    let k1 = |dx: f64, dy: f64| {
        richardson(|s| Ok((c(0.0, 1.0) * (lam(dx * s, dy * s, 0.0)? - lam(-dx * s, -dy * s, 0.0)?)).re / (2.0 * s)), h)
    };
    let second = |dx: f64, dy: f64, dd: f64, step: f64| {
        richardson(|s| Ok(-((lam(dx * s, dy * s, dd * s)? + lam(-dx * s, -dy * s, -dd * s)? - l0 * 2.0).re) / (s * s)), step)
    };
    let kxx = second(1.0, 0.0, 0.0, h)?;
    let kyy = second(0.0, 1.0, 0.0, h)?;
    let kpp = second(1.0, 1.0, 0.0, h)?;
    let kxy = 0.5 * (kpp - kxx - kyy);
    Ok(CumulantReport {
        lambda0: l0,
        kappa1: Kappa1::from_xy(k1(1.0, 0.0)?, k1(0.0, 1.0)?),
        kappa2: [[kxx, kxy], [kxy, kyy]],
        qfi_rate: second(0.0, 0.0, 1.0, opts.delta_step)?,
        snr: None,
    })
}

fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

/// Slope-extracted cumulant rates from direct propagation, started in the
/// zero-tilt stationary state. The slope over [τ_sim/2, τ_sim] is checked
/// against the slope over [τ_sim/4, τ_sim/2].
pub fn cumulants_time_domain_oracle(model: &Model, opts: &TimeDomainOptions) -> Result<CumulantReport> {
    let l0 = model.build_plain(&CountingFields::zero()).to_dmatrix();
    let st = Stationary::new(&l0, model.dim())?;
    let late = time_domain_with(model, &st.rho, opts.tau_sim / 2.0, opts)?;
    let early = time_domain_with(model, &st.rho, opts.tau_sim / 4.0, opts)?;
    let k1_floor = late.kappa1.x.abs().max(late.kappa1.y.abs());
    let k2_floor = late.kappa2[0][0].abs().max(late.kappa2[1][1].abs());
    let ok = close(late.kappa1.x, early.kappa1.x, 1e-3, k1_floor)
        && close(late.kappa1.y, early.kappa1.y, 1e-3, k1_floor)
        && close(late.kappa2[0][1], early.kappa2[0][1], 1e-3, k2_floor)
        && close(late.qfi_rate, early.qfi_rate, 1e-3, 0.0);
    if !ok {
        return Err(Error::Convergence("log-trace growth is not linear over the propagation window".into()));
    }
    Ok(late)
}

/// Time-integrated QFI 8∫₀^τ(τ − s)·Re⟨ΔF(s)ΔF(0)⟩ ds from quantum regression,
/// with F the generator of h_z.
pub fn qfi_integral_oracle(model: &Model, tau_sim: f64) -> Result<f64> {
    let d = model.dim();
    let max_dim = 7;
    if d > max_dim {
        return Err(Error::Capacity { what: "Hilbert dimension", got: d, max: max_dim });
    }
    let l = model.build_plain(&CountingFields::zero()).to_dmatrix();
    let st = Stationary::new(&l, d)?;
    let rho = st.density_matrix();
    let f = model.generator_f();
    let mean = (&f * &rho).trace();
    let df = &f - DMatrix::identity(d, d) * mean;
    let b = vectorize(&((&df * &rho + &rho * &df) * c(0.5, 0.0)));
    let ld_b = st.drazin(&b);
    let prop = expm(&(&l * c(tau_sim, 0.0)));
    let tail = st.drazin(&st.drazin(&(&prop * &b - &b)));
    let v = tail - ld_b * c(tau_sim, 0.0);
    let w = vectorize(&df.transpose());
    Ok(8.0 * w.dot(&v).re)
}

/// Stationary ⟨O⟩ of a model at zero tilt.
pub fn stationary_expectation(model: &Model, op: &DMatrix<C64>) -> Result<C64> {
    let l = model.build_plain(&CountingFields::zero()).to_dmatrix();
    Ok(Stationary::new(&l, model.dim())?.expectation(op))
}

/// max |⟨⟨1|L| at zero tilt relative to max |L_ij|.
pub fn trace_defect(model: &Model) -> f64 {
    let l = model.build_plain(&CountingFields::zero()).to_dmatrix();
    let row = trace_row(&l, model.dim());
    let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max);
    row.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}
