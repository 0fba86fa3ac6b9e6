//! Dense counting-field-tilted Liouvillians.
//!
//! Density matrices are vectorized row-major, `vec(ρ)[i·d + j] = ρ_ij`, so that
//! `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`. Jump terms carry `e^{−iχ}`; the QFI tilt enters
//! as `h_z → h_z + δ` on the left and `h_z → h_z − δ` on the right.

use crate::dual::{c, Field, HyperDual, C64, I};
use crate::error::{Error, Result};
use crate::params::{CollectiveScaledParams, MagnetometerParams};
use nalgebra::DMatrix;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

pub const DEFAULT_N_MAX: usize = 80;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CountingFields {
    pub chi_x: f64,
    pub chi_y: f64,
    pub delta: f64,
}

impl CountingFields {
    pub fn zero() -> Self {
        Self::default()
    }

    /// χ_x = χ₊ + χ₋, χ_y = χ₊ − χ₋.
    pub fn from_plus_minus(chi_plus: f64, chi_minus: f64, delta: f64) -> Self {
        CountingFields { chi_x: chi_plus + chi_minus, chi_y: chi_plus - chi_minus, delta }
    }
}

/// Tilt parameters as seen by the generic builders. `h_z` is carried here so
/// that Liouvillians can be differentiated with respect to it.
#[derive(Clone, Copy, Debug)]
pub struct Tilt<T> {
    pub chi_x: T,
    pub chi_y: T,
    pub delta: T,
    pub h_z: T,
}

impl Tilt<C64> {
    pub fn plain(cf: &CountingFields, h_z: f64) -> Self {
        Tilt { chi_x: c(cf.chi_x, 0.0), chi_y: c(cf.chi_y, 0.0), delta: c(cf.delta, 0.0), h_z: c(h_z, 0.0) }
    }
}

/// Differentiable parameters in the order (χ_x, χ_y, δ, h_z).
pub type Direction = [f64; 4];

pub const DIR_CHI_X: Direction = [1.0, 0.0, 0.0, 0.0];
pub const DIR_CHI_Y: Direction = [0.0, 1.0, 0.0, 0.0];
pub const DIR_DELTA: Direction = [0.0, 0.0, 1.0, 0.0];
pub const DIR_H_Z: Direction = [0.0, 0.0, 0.0, 1.0];

impl Tilt<HyperDual> {
    /// Zero tilt at `h_z`, seeded along `d1` (ε₁) and `d2` (ε₂).
    pub fn seeded(h_z: f64, d1: Direction, d2: Direction) -> Self {
        let v = |x: f64, i: usize| HyperDual::var(c(x, 0.0), d1[i], d2[i]);
        Tilt { chi_x: v(0.0, 0), chi_y: v(0.0, 1), delta: v(0.0, 2), h_z: v(h_z, 3) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelTag {
    FourLevel,
    TwoLevel,
    CollectiveFinite,
}

#[derive(Clone, Debug)]
pub struct TiltedLiouvillian<T = C64> {
    pub dim: usize,
    pub model: ModelTag,
    /// Row-major `dim² × dim²` matrix.
    pub matrix: Vec<T>,
}

impl<T: Field> TiltedLiouvillian<T> {
    pub fn size(&self) -> usize {
        self.dim * self.dim
    }

    pub fn part(&self, f: impl Fn(&T) -> C64) -> DMatrix<C64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |r, col| f(&self.matrix[r * n + col]))
    }

    pub fn values(&self) -> DMatrix<C64> {
        self.part(|x| x.value())
    }
}

impl TiltedLiouvillian<C64> {
    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        self.values()
    }

    /// max |⟨⟨1|L| relative to the largest entry.
    pub fn trace_defect(&self) -> f64 {
        let n = self.size();
        let norm = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for col in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..self.dim {
                s += self.matrix[(i * self.dim + i) * n + col];
            }
            worst = worst.max(s.norm());
        }
        worst / norm
    }
}

impl TiltedLiouvillian<HyperDual> {
    pub fn split(&self) -> [DMatrix<C64>; 4] {
        [self.part(|x| x.re), self.part(|x| x.e1), self.part(|x| x.e2), self.part(|x| x.e12)]
    }
}

/// Sparse operator as (row, col, value) triplets.
pub type SpOp = Vec<(usize, usize, C64)>;

pub fn dagger(a: &SpOp) -> SpOp {
    a.iter().map(|&(i, j, v)| (j, i, v.conj())).collect()
}

pub fn op_mul(a: &SpOp, b: &SpOp) -> SpOp {
    let mut out: Vec<(usize, usize, C64)> = Vec::new();
    for &(i, k, x) in a {
        for &(k2, j, y) in b {
            if k == k2 {
                match out.iter_mut().find(|e| e.0 == i && e.1 == j) {
                    Some(e) => e.2 += x * y,
                    None => out.push((i, j, x * y)),
                }
            }
        }
    }
    out.retain(|e| e.2.norm() != 0.0);
    out
}

pub fn op_add(a: &SpOp, b: &SpOp) -> SpOp {
    let mut out = a.clone();
    for &(i, j, v) in b {
        match out.iter_mut().find(|e| e.0 == i && e.1 == j) {
            Some(e) => e.2 += v,
            None => out.push((i, j, v)),
        }
    }
    out
}

pub fn op_scale(a: &SpOp, z: C64) -> SpOp {
    a.iter().map(|&(i, j, v)| (i, j, v * z)).collect()
}

pub fn op_dense(a: &SpOp, d: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d, d);
    for &(i, j, v) in a {
        m[(i, j)] += v;
    }
    m
}

fn ket_bra(i: usize, j: usize) -> SpOp {
    vec![(i, j, c(1.0, 0.0))]
}

struct Builder<T> {
    d: usize,
    n: usize,
    m: Vec<T>,
}

impl<T: Field> Builder<T> {
    fn new(d: usize) -> Self {
        let n = d * d;
        Builder { d, n, m: vec![T::zero(); n * n] }
    }

    /// coef·Aρ
    fn left(&mut self, a: &SpOp, coef: T) {
        let (d, n) = (self.d, self.n);
        for &(i, k, v) in a {
            let s = coef.scale(v);
            for j in 0..d {
                self.m[(i * d + j) * n + k * d + j] += s;
            }
        }
    }

    /// coef·ρB
    fn right(&mut self, b: &SpOp, coef: T) {
        let (d, n) = (self.d, self.n);
        for &(k, j, v) in b {
            let s = coef.scale(v);
            for i in 0..d {
                self.m[(i * d + j) * n + i * d + k] += s;
            }
        }
    }

    /// coef·AρB
    fn sandwich(&mut self, a: &SpOp, b: &SpOp, coef: T) {
        let (d, n) = (self.d, self.n);
        for &(i, k, x) in a {
            for &(l, j, y) in b {
                self.m[(i * d + j) * n + k * d + l] += coef.scale(x * y);
            }
        }
    }

    /// coef·(jump·OρO† − ½{O†O, ρ})
    fn dissipator(&mut self, o: &SpOp, jump: T, coef: T) {
        let od = dagger(o);
        let odo = op_mul(&od, o);
        self.sandwich(o, &od, coef * jump);
        let half = coef.scale(c(-0.5, 0.0));
        self.left(&odo, half);
        self.right(&odo, half);
    }

    /// −i(H_L ρ − ρ H_R) with both Hamiltonians given as Σ coef·op.
    fn coherent(&mut self, h_left: &[(SpOp, T)], h_right: &[(SpOp, T)]) {
        for (op, k) in h_left {
            self.left(op, k.scale(-I));
        }
        for (op, k) in h_right {
            self.right(op, k.scale(I));
        }
    }

    fn finish(self, model: ModelTag) -> TiltedLiouvillian<T> {
        TiltedLiouvillian { dim: self.d, model, matrix: self.m }
    }
}

/// Pauli matrices in the basis (g₊, g₋).
pub fn pauli() -> (SpOp, SpOp, SpOp) {
    let one = c(1.0, 0.0);
    let sx = vec![(0, 1, one), (1, 0, one)];
    let sy = vec![(0, 1, -I), (1, 0, I)];
    let sz = vec![(0, 0, one), (1, 1, -one)];
    (sx, sy, sz)
}

/// Spin-N/2 matrices (S_x, S_y, S_z) in the S_z basis, index k ↔ m = N/2 − k.
pub fn spin_matrices(n: usize) -> (SpOp, SpOp, SpOp) {
    let j = n as f64 / 2.0;
    let mut sx = Vec::new();
    let mut sy = Vec::new();
    let mut sz = Vec::new();
    for k in 0..=n {
        let m = j - k as f64;
        sz.push((k, k, c(m, 0.0)));
        if k > 0 {
            // ⟨m+1|S₊|m⟩
            let amp = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
            // S₊ element at (k−1, k), S₋ element at (k, k−1)
            sx.push((k - 1, k, c(0.5 * amp, 0.0)));
            sx.push((k, k - 1, c(0.5 * amp, 0.0)));
            sy.push((k - 1, k, c(0.0, -0.5 * amp)));
            sy.push((k, k - 1, c(0.0, 0.5 * amp)));
        }
    }
    (sx, sy, sz)
}

/// Polarisation weights w_a = (cos φ + i·a·sin φ)/√2 with φ = π/4 + θ_rot, so
/// that W_η = Σ_a g^η_a w_a P_a satisfies Σ_η W_η ρ W_η† = Σ_a P_a ρ P_a for
/// orthogonal projectors.
fn emission_weights(theta_rot: f64) -> [[C64; 2]; 2] {
    let phi = FRAC_PI_4 + theta_rot;
    let w = |a: f64| c(phi.cos(), a * phi.sin()) * FRAC_1_SQRT_2;
    // rows: η = x, y; columns: a = +1, −1
    [[w(1.0), w(-1.0)], [-I * w(1.0), I * w(-1.0)]]
}

/// Shared light-matter terms of the ground-manifold generators.
struct Probe {
    ox: f64,
    oy: f64,
    eps: f64,
    dd: f64,
    big_gamma: f64,
}

impl Probe {
    fn omega_a(&self, a: f64) -> C64 {
        c(self.ox, a * self.oy)
    }

    /// Faraday shift G_χ of the σ_z coefficient.
    fn faraday<T: Field>(&self, ex: T, ey: T) -> T {
        (ex - ey).scale(I * (self.eps * self.ox * self.oy / (2.0 * self.dd)))
    }

    /// Γ-absorption counting lines with projectors `proj[a]`.
    fn absorption<T: Field>(&self, b: &mut Builder<T>, proj: &[SpOp; 2], ex: T, ey: T) {
        let pref = -self.big_gamma / (8.0 * self.dd);
        if pref == 0.0 {
            return;
        }
        for (idx, a) in [1.0, -1.0].into_iter().enumerate() {
            let om = self.omega_a(a);
            let om_conj_chi = ex.scale(c(self.ox, 0.0)) - ey.scale(c(0.0, a * self.oy));
            let om_minus_chi = ex.scale(c(self.ox, 0.0)) + ey.scale(c(0.0, a * self.oy));
            let front = (om_conj_chi - T::cst(om.conj())).scale(om * pref);
            let back = (om_minus_chi - T::cst(om)).scale(om.conj() * pref);
            b.left(&proj[idx], front);
            b.right(&proj[idx], back);
        }
    }
}

fn z_emission<T: Field>(b: &mut Builder<T>, proj: &[SpOp; 2], theta_rot: f64, rate: f64, ex: T, ey: T) {
    if rate == 0.0 {
        return;
    }
    let w = emission_weights(theta_rot);
    for (eta, jump) in [(0, ex), (1, ey)] {
        let op = op_add(&op_scale(&proj[0], w[eta][0]), &op_scale(&proj[1], w[eta][1]));
        b.dissipator(&op, jump, T::real(rate));
    }
}

pub fn build_two_level_t<T: Field>(p: &MagnetometerParams, t: &Tilt<T>) -> TiltedLiouvillian<T> {
    let (sx, sy, sz) = pauli();
    let one = c(1.0, 0.0);
    let proj = [vec![(0, 0, one)], vec![(1, 1, one)]];
    let (ox, oy) = p.omega_xy();
    let probe = Probe { ox, oy, eps: p.eps_delta, dd: p.detuning_denominator(), big_gamma: p.big_gamma() };
    let om2 = p.omega * p.omega;

    let ex = t.chi_x.scale(-I).exp();
    let ey = t.chi_y.scale(-I).exp();
    let g = probe.faraday(ex, ey);
    let h_l = t.h_z + t.delta + g;
    let h_r = t.h_z - t.delta - g;
    let hx = T::real(-0.5 * p.h_x);

    let mut b = Builder::new(2);
    b.coherent(
        &[(sx.clone(), hx), (sz.clone(), h_l.scale(c(-0.5, 0.0)))],
        &[(sx, hx), (sz.clone(), h_r.scale(c(-0.5, 0.0)))],
    );
    let pump = op_scale(&op_add(&sz, &op_scale(&sy, I)), c(0.5, 0.0));
    b.dissipator(&pump, T::one(), T::real(p.gamma_p));
    let deph = p.gamma * om2 / (4.0 * probe.dd);
    if deph != 0.0 {
        for pr in &proj {
            b.dissipator(pr, T::one(), T::real(deph));
        }
    }
    probe.absorption(&mut b, &proj, ex, ey);
    z_emission(&mut b, &proj, p.theta_rot, p.gamma_z * om2 / (4.0 * probe.dd), ex, ey);
    b.finish(ModelTag::TwoLevel)
}

pub fn build_four_level_t<T: Field>(p: &MagnetometerParams, t: &Tilt<T>) -> TiltedLiouvillian<T> {
    // basis: g₊, g₋, e₊, e₋
    let g = |a: f64| if a > 0.0 { 0 } else { 1 };
    let e = |a: f64| if a > 0.0 { 2 } else { 3 };
    let (ox, oy) = p.omega_xy();
    let ex = t.chi_x.scale(-I).exp();
    let ey = t.chi_y.scale(-I).exp();

    let ground = |h: T| -> Vec<(SpOp, T)> {
        vec![
            (vec![(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))], T::real(-0.5 * p.h_x)),
            (vec![(0, 0, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0))], h.scale(c(-0.5, 0.0))),
            (vec![(2, 2, c(1.0, 0.0)), (3, 3, c(1.0, 0.0))], T::real(p.eps_delta)),
        ]
    };
    let mut h_left = ground(t.h_z + t.delta);
    let mut h_right = ground(t.h_z - t.delta);
    for a in [1.0, -1.0] {
        let om = c(ox, a * oy);
        let up = ket_bra(e(-a), g(a));
        let down = ket_bra(g(a), e(-a));
        let om_conj_chi = ex.scale(c(ox, 0.0)) - ey.scale(c(0.0, a * oy));
        let om_minus_chi = ex.scale(c(ox, 0.0)) + ey.scale(c(0.0, a * oy));
        h_left.push((up.clone(), T::cst(om * 0.5)));
        h_left.push((down.clone(), om_conj_chi.scale(c(0.5, 0.0))));
        h_right.push((down, T::cst(om.conj() * 0.5)));
        h_right.push((up, om_minus_chi.scale(c(0.5, 0.0))));
    }

    let mut b = Builder::new(4);
    b.coherent(&h_left, &h_right);

    let vx: SpOp = [1.0, -1.0].iter().map(|&a| (g(a), e(-a), c(1.0, 0.0))).collect();
    let vy: SpOp = [1.0, -1.0].iter().map(|&a| (g(a), e(-a), c(0.0, -a))).collect();
    b.dissipator(&vx, ex, T::real(0.5 * p.gamma_z));
    b.dissipator(&vy, ey, T::real(0.5 * p.gamma_z));
    if p.gamma != 0.0 {
        for a in [1.0, -1.0] {
            b.dissipator(&ket_bra(g(a), e(-a)), T::one(), T::real(2.0 * p.gamma / 3.0));
            b.dissipator(&ket_bra(g(a), e(a)), T::one(), T::real(p.gamma / 3.0));
        }
    }
    let one = c(1.0, 0.0);
    let pump = vec![(0, 0, one * 0.5), (1, 1, -one * 0.5), (0, 1, one * 0.5), (1, 0, -one * 0.5)];
    b.dissipator(&pump, T::one(), T::real(p.gamma_p));
    b.finish(ModelTag::FourLevel)
}

pub fn build_collective_finite_t<T: Field>(s: &CollectiveScaledParams, n: usize, t: &Tilt<T>) -> TiltedLiouvillian<T> {
    let nf = n as f64;
    let (sx, sy, sz) = spin_matrices(n);
    let half_n: SpOp = (0..=n).map(|k| (k, k, c(nf / 2.0, 0.0))).collect();
    let proj = [op_add(&half_n, &sz), op_add(&half_n, &op_scale(&sz, c(-1.0, 0.0)))];
    let (ox, oy) = s.omega_xy();
    let probe = Probe { ox, oy, eps: s.eps_delta, dd: s.detuning_denominator(), big_gamma: s.big_gamma };

    let ex = t.chi_x.scale(-I).exp();
    let ey = t.chi_y.scale(-I).exp();
    let g = if s.omega == 0.0 { T::zero() } else { probe.faraday(ex, ey) };
    let h_l = t.h_z + t.delta + g;
    let h_r = t.h_z - t.delta - g;
    let hx = T::real(-s.h_x);

    let mut b = Builder::new(n + 1);
    b.coherent(&[(sx.clone(), hx), (sz.clone(), -h_l)], &[(sx, hx), (sz.clone(), -h_r)]);
    let pump = op_add(&sz, &op_scale(&sy, I));
    b.dissipator(&pump, T::one(), T::real(s.kappa_p / nf));
    if s.omega != 0.0 {
        probe.absorption(&mut b, &proj, ex, ey);
    }
    z_emission(&mut b, &proj, s.theta_rot, s.kappa_z / nf, ex, ey);
    b.finish(ModelTag::CollectiveFinite)
}

pub fn build_two_level(p: &MagnetometerParams, cf: &CountingFields) -> TiltedLiouvillian {
    build_two_level_t(p, &Tilt::plain(cf, p.h_z))
}

pub fn build_four_level(p: &MagnetometerParams, cf: &CountingFields) -> TiltedLiouvillian {
    build_four_level_t(p, &Tilt::plain(cf, p.h_z))
}

pub fn build_collective_finite(s: &CollectiveScaledParams, cf: &CountingFields, n_max: usize) -> Result<TiltedLiouvillian> {
    let n = atom_count(s.n_atoms, n_max)?;
    Ok(build_collective_finite_t(s, n, &Tilt::plain(cf, s.h_z)))
}

pub fn atom_count(n_atoms: f64, n_max: usize) -> Result<usize> {
    if !(n_atoms >= 1.0) || n_atoms.fract() != 0.0 {
        return Err(Error::InvalidParams(format!("finite collective model needs integer N >= 1, got {n_atoms}")));
    }
    if n_atoms > n_max as f64 {
        return Err(Error::Capacity { what: "N", got: n_atoms as usize, max: n_max });
    }
    Ok(n_atoms as usize)
}

/// A microscopic model that can be built at any tilt and scalar type.
#[derive(Clone, Copy, Debug)]
pub enum Model {
    TwoLevel(MagnetometerParams),
    FourLevel(MagnetometerParams),
    Collective(CollectiveScaledParams, usize),
}

impl Model {
    pub fn h_z(&self) -> f64 {
        match self {
            Model::TwoLevel(p) | Model::FourLevel(p) => p.h_z,
            Model::Collective(s, _) => s.h_z,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::TwoLevel(_) => 2,
            Model::FourLevel(_) => 4,
            Model::Collective(_, n) => n + 1,
        }
    }

    pub fn build<T: Field>(&self, t: &Tilt<T>) -> TiltedLiouvillian<T> {
        match self {
            Model::TwoLevel(p) => build_two_level_t(p, t),
            Model::FourLevel(p) => build_four_level_t(p, t),
            Model::Collective(s, n) => build_collective_finite_t(s, *n, t),
        }
    }

    pub fn build_plain(&self, cf: &CountingFields) -> TiltedLiouvillian {
        self.build(&Tilt::plain(cf, self.h_z()))
    }

    /// The observable conjugate to h_z: σ_z/2 per atom (two-level, embedded for
    /// four-level) or S_z.
    pub fn generator_f(&self) -> DMatrix<C64> {
        match self {
            Model::TwoLevel(_) => op_dense(&pauli().2, 2) * c(0.5, 0.0),
            Model::FourLevel(_) => {
                let mut m = DMatrix::zeros(4, 4);
                m[(0, 0)] = c(0.5, 0.0);
                m[(1, 1)] = c(-0.5, 0.0);
                m
            }
            Model::Collective(_, n) => op_dense(&spin_matrices(*n).2, n + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::reference_params;

    #[test]
    fn trace_preserving_at_zero_tilt() {
        let p = reference_params().with_h_z(3e5);
        assert!(build_two_level(&p, &CountingFields::zero()).trace_defect() < 1e-12);
        assert!(build_four_level(&p, &CountingFields::zero()).trace_defect() < 1e-12);
        let s = CollectiveScaledParams::from_params(&p.with_n_atoms(5.0));
        assert!(build_collective_finite(&s, &CountingFields::zero(), 80).unwrap().trace_defect() < 1e-12);
    }

    #[test]
    fn spin_algebra() {
        let n = 4;
        let (sx, sy, sz) = spin_matrices(n);
        let (x, y, z) = (op_dense(&sx, n + 1), op_dense(&sy, n + 1), op_dense(&sz, n + 1));
        let comm = &x * &y - &y * &x;
        assert!((comm - z.clone() * I).norm() < 1e-12);
        let cas = &x * &x + &y * &y + &z * &z;
        let j = n as f64 / 2.0;
        assert!((cas - DMatrix::identity(n + 1, n + 1) * c(j * (j + 1.0), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn capacity_error() {
        let s = CollectiveScaledParams::spin_only(1.0, 0.0, 0.1, 0.0, 81.0);
        assert!(matches!(build_collective_finite(&s, &CountingFields::zero(), 80), Err(Error::Capacity { .. })));
    }
}
