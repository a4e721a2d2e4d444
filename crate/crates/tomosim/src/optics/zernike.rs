//! Orthonormal Zernike polynomials over the unit pupil, ANSI/OSA single
//! indexing: `j = (n(n+2) + m) / 2` with radial order `n` and signed
//! azimuthal frequency `m`.

use super::OpticsError;

/// Largest supported ANSI index (radial order 12).
pub const MAX_ANSI_INDEX: usize = 90;

/// Splits an ANSI/OSA single index into (radial order n, signed frequency m).
pub fn ansi_to_nm(j: usize) -> Result<(u32, i32), OpticsError> {
    if j > MAX_ANSI_INDEX {
        return Err(OpticsError::UnsupportedZernike(j));
    }
    let n = (((9.0 + 8.0 * j as f64).sqrt() - 3.0) / 2.0).ceil() as u32;
    let m = 2 * j as i32 - (n * (n + 2)) as i32;
    debug_assert!(m.unsigned_abs() <= n && (n as i32 - m) % 2 == 0);
    Ok((n, m))
}

fn factorial(k: u32) -> f64 {
    (1..=k as u64).map(|v| v as f64).product()
}

/// Radial polynomial R_n^{|m|}(rho).
fn radial(n: u32, m_abs: u32, rho: f64) -> f64 {
    let half = (n - m_abs) / 2;
    let mut sum = 0.0;
    for k in 0..=half {
        let num = factorial(n - k);
        let den = factorial(k) * factorial((n + m_abs) / 2 - k) * factorial((n - m_abs) / 2 - k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * num / den * rho.powi((n - 2 * k) as i32);
    }
    sum
}

/// Orthonormal Zernike term Z_j at normalized pupil coordinates (x, y),
/// |(x, y)| <= 1. Normalization is sqrt(2(n+1)) for m != 0 and sqrt(n+1)
/// for m == 0, so that the basis is orthonormal over the unit disk.
pub fn zernike_term(j: usize, x: f64, y: f64) -> Result<f64, OpticsError> {
    let (n, m) = ansi_to_nm(j)?;
    let rho = (x * x + y * y).sqrt();
    let theta = y.atan2(x);
    let m_abs = m.unsigned_abs();
    let norm = if m == 0 {
        ((n + 1) as f64).sqrt()
    } else {
        (2.0 * (n + 1) as f64).sqrt()
    };
    let angular = if m >= 0 {
        (m_abs as f64 * theta).cos()
    } else {
        (m_abs as f64 * theta).sin()
    };
    Ok(norm * radial(n, m_abs, rho) * angular)
}

/// Sum of weighted Zernike terms, coefficients in waves. Invalid indices and
/// non-finite coefficients are rejected.
pub fn zernike_sum(coeffs: &[(usize, f64)], x: f64, y: f64) -> Result<f64, OpticsError> {
    let mut acc = 0.0;
    for &(j, c) in coeffs {
        if !c.is_finite() {
            return Err(OpticsError::NonFinite("zernike coefficient"));
        }
        acc += c * zernike_term(j, x, y)?;
    }
    Ok(acc)
}

/// True when every term is rotationally symmetric (m == 0), so the resulting
/// OTF depends only on |f|. Invalid indices are reported as not symmetric and
/// caught later by evaluation.
pub fn all_rotationally_symmetric(coeffs: &[(usize, f64)]) -> bool {
    coeffs
        .iter()
        .all(|&(j, c)| c == 0.0 || matches!(ansi_to_nm(j), Ok((_, 0))))
}
