//! Quadrature of the pupil autocorrelation integral.
//!
//! The incoherent OTF at angular frequency f is the normalized
//! autocorrelation of the generalized pupil, evaluated at the shear
//! s = lambda * f (f in cycles per radian):
//!
//!   H(s) = (1/area) * integral over the overlap of the two sheared pupil
//!          disks of exp(i * [phi(r + s/2) - phi(r - s/2)]) dr
//!
//! The integral runs over the exact lens-shaped overlap region in a frame
//! aligned with the shear direction, so no pixelated pupil edge enters:
//! for a given u along the shear the perpendicular extent is the chord
//!
//!   half_chord(u) = sqrt(a^2 - (|u| + s/2)^2),   |u| <= a - s/2.
//!
//! The u axis is sampled through u = U sin(t) with midpoint t samples, which
//! absorbs the square-root endpoint behavior of the chord. Two evaluation
//! paths share this rule:
//!
//! * pure defocus: the phase difference is linear in u and independent of v,
//!   so the v integral collapses to the chord length (fast path, used for
//!   OTF banks);
//! * general pupil phase: midpoint sampling of v across the chord.
//!
//! Normalizing by the same quadrature at s = 0 makes H(0) exactly 1.0 and
//! keeps |H| <= 1 up to quadrature residue.

use num_complex::Complex64;

use super::OpticsError;

/// Extra 1-D sampling relative to `pupil_grid` for the defocus fast path.
pub(crate) const DEFOCUS_OVERSAMPLE: usize = 4;

/// Pupil area by the shared quadrature rule (the s = 0 autocorrelation).
pub(crate) fn quadrature_area(radius: f64, samples: usize) -> f64 {
    // u = a sin t, chord = 2 a cos t, du = a cos t dt
    let dt = std::f64::consts::PI / samples as f64;
    let mut acc = 0.0;
    for k in 0..samples {
        let t = -std::f64::consts::FRAC_PI_2 + (k as f64 + 0.5) * dt;
        let c = t.cos();
        acc += 2.0 * radius * radius * c * c * dt;
    }
    acc
}

/// Autocorrelation numerator for a pure defocus phase. `phase_rate` is the
/// coefficient of u in the phase difference (radians per meter):
/// `phase_rate = 2 k W20 s / a^2`.
pub(crate) fn defocus_autocorr(radius: f64, shear: f64, phase_rate: f64, samples: usize) -> Complex64 {
    let u_half = radius - shear / 2.0;
    if u_half <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let dt = std::f64::consts::PI / samples as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..samples {
        let t = -std::f64::consts::FRAC_PI_2 + (k as f64 + 0.5) * dt;
        let u = u_half * t.sin();
        let du = u_half * t.cos() * dt;
        let reach = u.abs() + shear / 2.0;
        let chord_sq = radius * radius - reach * reach;
        if chord_sq <= 0.0 {
            continue;
        }
        let chord = 2.0 * chord_sq.sqrt();
        acc += Complex64::from_polar(1.0, phase_rate * u) * (chord * du);
    }
    acc
}

/// Autocorrelation numerator for an arbitrary pupil phase. `phase` maps
/// shear-aligned pupil coordinates in meters to phase in radians; the caller
/// rotates into the physical pupil frame. `nu` and `nv` are the along- and
/// across-shear sample counts.
pub(crate) fn general_autocorr<F>(
    radius: f64,
    shear: f64,
    nu: usize,
    nv: usize,
    phase: F,
) -> Complex64
where
    F: Fn(f64, f64) -> f64,
{
    let u_half = radius - shear / 2.0;
    if u_half <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let dt = std::f64::consts::PI / nu as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..nu {
        let t = -std::f64::consts::FRAC_PI_2 + (k as f64 + 0.5) * dt;
        let u = u_half * t.sin();
        let du = u_half * t.cos() * dt;
        let reach = u.abs() + shear / 2.0;
        let chord_sq = radius * radius - reach * reach;
        if chord_sq <= 0.0 {
            continue;
        }
        let half_chord = chord_sq.sqrt();
        let mut inner = Complex64::new(0.0, 0.0);
        for j in 0..nv {
            let v = half_chord * (2.0 * (j as f64 + 0.5) / nv as f64 - 1.0);
            let dphi = phase(u + shear / 2.0, v) - phase(u - shear / 2.0, v);
            inner += Complex64::from_polar(1.0, dphi);
        }
        acc += inner * (2.0 * half_chord * du / nv as f64);
    }
    acc
}

/// Area by the general 2-D rule at s = 0 (flat phase), so the general path
/// normalizes against its own quadrature and keeps H(0) = 1 exactly.
pub(crate) fn general_area(radius: f64, nu: usize) -> f64 {
    // At s = 0 the inner v sum of a flat phase is exactly nv/nv = 1.
    quadrature_area(radius, nu)
}

/// Checks that the defocus phase ramp is resolved by the 1-D rule: the
/// largest per-sample phase step must stay below pi.
pub(crate) fn check_defocus_sampling(
    radius: f64,
    max_shear: f64,
    max_phase_rate: f64,
    samples: usize,
    pupil_grid: usize,
) -> Result<(), OpticsError> {
    let u_half = radius - max_shear / 2.0;
    if u_half <= 0.0 {
        return Ok(());
    }
    let max_step = u_half * std::f64::consts::PI / samples as f64;
    if max_phase_rate * max_step >= std::f64::consts::PI {
        // samples scale linearly with pupil_grid, so solve for the grid.
        let required_samples = (max_phase_rate * u_half).ceil() as usize + 1;
        let required = required_samples.div_ceil(DEFOCUS_OVERSAMPLE).next_multiple_of(2);
        return Err(OpticsError::Sampling {
            required,
            actual: pupil_grid,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: adaptive Simpson integration of the same chord
    /// integrand, no shared quadrature machinery.
    fn simpson_defocus(radius: f64, shear: f64, rate: f64) -> Complex64 {
        fn integrand(radius: f64, shear: f64, rate: f64, u: f64) -> Complex64 {
            let reach = u.abs() + shear / 2.0;
            let c2 = radius * radius - reach * reach;
            if c2 <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::from_polar(1.0, rate * u) * 2.0 * c2.sqrt()
        }
        let u_half = radius - shear / 2.0;
        let n = 200_001; // fine composite Simpson, odd count
        let h = 2.0 * u_half / (n - 1) as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let u = -u_half + i as f64 * h;
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += integrand(radius, shear, rate, u) * w;
        }
        acc * (h / 3.0)
    }

    #[test]
    fn quadrature_area_matches_disk() {
        let a = 3e-3;
        let area = quadrature_area(a, 1024);
        let exact = std::f64::consts::PI * a * a;
        assert!(
            ((area - exact) / exact).abs() < 1e-9,
            "area {area} vs {exact}"
        );
    }

    #[test]
    fn defocus_quadrature_matches_simpson_oracle() {
        let a = 3e-3;
        for (shear_frac, rate) in [(0.0, 0.0), (0.01, 5e3), (0.05, 2e4), (0.02, 1e5)] {
            let s = shear_frac * 2.0 * a;
            let ours = defocus_autocorr(a, s, rate, 1024) / quadrature_area(a, 1024);
            let oracle = simpson_defocus(a, s, rate) / (std::f64::consts::PI * a * a);
            assert!(
                (ours - oracle).norm() < 2e-6,
                "shear {shear_frac}, rate {rate}: {ours} vs {oracle}"
            );
        }
    }

    #[test]
    fn general_path_agrees_with_defocus_path() {
        // Quadratic radial phase expressed through the general 2-D rule.
        let a = 3e-3;
        let w20 = 2.0e-6; // meters of edge OPD
        let lambda = 550e-9;
        let k = 2.0 * std::f64::consts::PI / lambda;
        let s = 1.0e-4;
        let rate = 2.0 * k * w20 * s / (a * a);
        let fast = defocus_autocorr(a, s, rate, 1024) / quadrature_area(a, 1024);
        let phase = |x: f64, y: f64| k * w20 * (x * x + y * y) / (a * a);
        let general = general_autocorr(a, s, 256, 256, phase) / general_area(a, 256);
        assert!(
            (fast - general).norm() < 1e-4,
            "fast {fast} vs general {general}"
        );
    }

    #[test]
    fn zero_shear_normalizes_to_one() {
        let a = 3e-3;
        let h0 = defocus_autocorr(a, 0.0, 0.0, 777) / quadrature_area(a, 777);
        assert_eq!(h0.re, 1.0);
        assert_eq!(h0.im, 0.0);
    }

    #[test]
    fn sampling_check_triggers_for_extreme_defocus() {
        let a = 3e-3;
        // ~60 D of defocus at the band edge aliases a 1024-sample rule.
        let rate = 1e7;
        let err = check_defocus_sampling(a, 3e-4, rate, 1024, 256);
        assert!(matches!(err, Err(OpticsError::Sampling { .. })));
        assert!(check_defocus_sampling(a, 3e-4, 1e5, 1024, 256).is_ok());
    }
}
