//! Dense helpers shared by the cumulant engines.

use crate::dual::{c, C64};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, Dyn, LU};

/// Indices of the diagonal of a row-major vectorized d×d matrix.
pub fn trace_indices(d: usize) -> impl Iterator<Item = usize> {
    (0..d).map(move |i| i * d + i)
}

pub fn vec_trace(v: &DVector<C64>, d: usize) -> C64 {
    trace_indices(d).map(|i| v[i]).sum()
}

pub fn vectorize(m: &DMatrix<C64>) -> DVector<C64> {
    let d = m.nrows();
    DVector::from_fn(d * d, |k, _| m[(k / d, k % d)])
}

pub fn unvectorize(v: &DVector<C64>, d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// ⟨⟨1|L for a row-major vectorized superoperator.
pub fn trace_row(l: &DMatrix<C64>, d: usize) -> DVector<C64> {
    let n = l.ncols();
    DVector::from_fn(n, |col, _| trace_indices(d).map(|i| l[(i, col)]).sum())
}

/// Stationary state and Drazin inverse of a trace-preserving generator.
///
/// One LU factorization of `A = L − |x⟩⟨⟨1|` with `x = vec(𝟙)/d` yields both:
/// `ρ = −A⁻¹x`, and for `⟨⟨1|b⟩⟩ = 0` the solution of `Ay = b` satisfies `Ly = b`.
pub struct Stationary {
    pub d: usize,
    lu: LU<C64, Dyn, Dyn>,
    pub rho: DVector<C64>,
}

impl Stationary {
    pub fn new(l0: &DMatrix<C64>, d: usize) -> Result<Self> {
        let n = d * d;
        let x = 1.0 / d as f64;
        // A_{r,col} = L_{r,col} − x_r·⟨⟨1|_col; both vectors live on the diagonal indices
        let mut a = l0.clone();
        for r in trace_indices(d) {
            for col in trace_indices(d) {
                a[(r, col)] -= c(x, 0.0);
            }
        }
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lu = a.lu();
        let u = lu.u();
        let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-14 * scale) {
            return Err(Error::Degenerate(format!("pivot {min_pivot:e} relative to scale {scale:e}")));
        }
        let rhs = DVector::from_fn(n, |k, _| if k / d == k % d { c(-x, 0.0) } else { c(0.0, 0.0) });
        let rho = lu.solve(&rhs).ok_or_else(|| Error::Degenerate("singular deflated generator".into()))?;
        Ok(Stationary { d, lu, rho })
    }

    pub fn trace(&self, v: &DVector<C64>) -> C64 {
        vec_trace(v, self.d)
    }

    /// `L^D b`, the Drazin inverse applied to `b`.
    pub fn drazin(&self, b: &DVector<C64>) -> DVector<C64> {
        let tb = self.trace(b);
        let bt = b - &self.rho * tb;
        let y = self.lu.solve(&bt).expect("factorization checked at construction");
        let ty = self.trace(&y);
        y - &self.rho * ty
    }

    pub fn density_matrix(&self) -> DMatrix<C64> {
        unvectorize(&self.rho, self.d)
    }

    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        (op * self.density_matrix()).trace()
    }
}

pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    let ev = m
        .clone()
        .try_schur(1e-15, 10_000)
        .ok_or_else(|| Error::Convergence("Schur decomposition did not converge".into()))?
        .eigenvalues()
        .ok_or_else(|| Error::Convergence("Schur form not triangular".into()))?;
    Ok(ev.iter().cloned().collect())
}

pub fn expm(m: &DMatrix<C64>) -> DMatrix<C64> {
    m.exp()
}
