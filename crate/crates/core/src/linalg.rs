//! Dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Dimension up to which singular values come from a full SVD.
pub const SVD_LIMIT: usize = 600;
const INVERSE_ITERATION_TOL: f64 = 1e-10;
const INVERSE_ITERATION_CAP: usize = 500;

/// Smallest singular value: full SVD up to [`SVD_LIMIT`], inverse
/// iteration on `M*M` beyond.
pub fn min_singular_value(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(invalid("matrix must be square"));
    }
    if m.nrows() == 0 {
        return Err(invalid("matrix must be non-empty"));
    }
    if m.nrows() <= SVD_LIMIT {
        Ok(m.clone().singular_values().min())
    } else {
        min_singular_value_iterative(m)
    }
}

/// Largest singular value (spectral norm).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `max |m_ij|`.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Inverse power iteration for `λ_max((M*M)^{-1}) = σ_min^{-2}` using LU
/// factors of `M` and `M*`.
pub fn min_singular_value_iterative(m: &CMatrix) -> Result<f64> {
    let n = m.nrows();
    let lu = m.clone().lu();
    let lu_adj = m.adjoint().lu();
    if !lu.is_invertible() {
        return Ok(0.0);
    }
    // deterministic, non-symmetric start
    let mut x = nalgebra::DVector::from_fn(n, |i, _| {
        Complex64::new(1.0 + (i as f64 * 0.618_033_988_749_895).fract(), 0.0)
    });
    x /= Complex64::new(x.norm(), 0.0);
    let mut estimate = f64::NAN;
    let mut upper = f64::INFINITY;
    for it in 1..=INVERSE_ITERATION_CAP {
        let y = lu_adj.solve(&x).ok_or(Error::InSpectrum("singular adjoint".into()))?;
        let z = lu.solve(&y).ok_or(Error::InSpectrum("singular matrix".into()))?;
        let growth = z.norm();
        if !(growth > 0.0) || !growth.is_finite() {
            return Ok(0.0);
        }
        x = z / Complex64::new(growth, 0.0);
        let next = 1.0 / growth.sqrt();
        // any unit vector gives an upper bound ‖Mx‖ ≥ σ_min
        upper = upper.min((m * &x).norm());
        if (next - estimate).abs() <= INVERSE_ITERATION_TOL * next {
            return Ok(upper.min(next));
        }
        estimate = next;
        if it == INVERSE_ITERATION_CAP {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: INVERSE_ITERATION_CAP,
        estimate,
        lower: 0.0,
        upper,
    })
}

/// Dense inverse; `None` when singular.
pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().try_inverse()
}
