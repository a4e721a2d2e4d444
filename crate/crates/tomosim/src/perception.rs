//! Contrast sensitivity weighting and the frequency-domain visual
//! difference used inside the strategy cost.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("spatial frequency must be non-negative, got {0}")]
    NegativeFrequency(f64),
    #[error("spectra are on different grids: {0} vs {1} samples")]
    ShapeMismatch(usize, usize),
    #[error("invalid CSF parameters: {0}")]
    InvalidModel(String),
}

/// Analytic band-pass contrast sensitivity model:
///
/// `V(f) = S * (f/fp)^alpha * exp(decay * (fp - f))`
///
/// The low-frequency attenuation exponent `alpha` controls the rise toward
/// the peak and `decay` the exponential high-frequency fall-off; with the
/// default `decay = alpha / fp` the maximum sits exactly at `fp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsfModel {
    /// Nominal peak frequency, cycles per degree.
    pub peak_frequency: f64,
    /// Sensitivity at the peak before grid normalization.
    pub peak_sensitivity: f64,
    /// Low-frequency attenuation exponent (> 0 gives V(0) = 0).
    pub low_freq_exponent: f64,
    /// High-frequency exponential decay rate, 1/cpd.
    pub high_freq_decay: f64,
}

impl Default for CsfModel {
    fn default() -> Self {
        Self {
            peak_frequency: 6.0,
            peak_sensitivity: 1.0,
            low_freq_exponent: 1.0,
            high_freq_decay: 1.0 / 6.0,
        }
    }
}

/// Grid used when a single weight is requested without an explicit grid;
/// matches the default optics band.
const DEFAULT_NORMALIZATION_GRID: (f64, usize) = (10.0, 64);

impl CsfModel {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(self.peak_frequency > 0.0) || !(self.peak_sensitivity > 0.0) {
            return Err(PerceptionError::InvalidModel(
                "peak frequency and sensitivity must be > 0".into(),
            ));
        }
        if !(self.low_freq_exponent > 0.0) || !(self.high_freq_decay > 0.0) {
            return Err(PerceptionError::InvalidModel(
                "attenuation and decay parameters must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Raw (unnormalized) sensitivity.
    pub fn eval(&self, f_cpd: f64) -> Result<f64, PerceptionError> {
        if f_cpd < 0.0 {
            return Err(PerceptionError::NegativeFrequency(f_cpd));
        }
        if f_cpd == 0.0 {
            return Ok(0.0);
        }
        let r = f_cpd / self.peak_frequency;
        Ok(self.peak_sensitivity
            * r.powf(self.low_freq_exponent)
            * (self.high_freq_decay * (self.peak_frequency - f_cpd)).exp())
    }

    /// Weights over a frequency grid, normalized so the maximum is 1.
    pub fn weights_for(&self, frequencies: &[f64]) -> Result<Vec<f64>, PerceptionError> {
        self.validate()?;
        let raw: Result<Vec<f64>, _> = frequencies.iter().map(|&f| self.eval(f)).collect();
        let raw = raw?;
        let max = raw.iter().cloned().fold(f64::MIN, f64::max);
        if !(max > 0.0) {
            return Err(PerceptionError::InvalidModel(
                "CSF vanishes on the whole grid".into(),
            ));
        }
        Ok(raw.into_iter().map(|w| w / max).collect())
    }
}

/// Single weight normalized against the default 0-10 cpd grid.
pub fn csf_weight(f_cpd: f64, model: &CsfModel) -> Result<f64, PerceptionError> {
    model.validate()?;
    if f_cpd < 0.0 {
        return Err(PerceptionError::NegativeFrequency(f_cpd));
    }
    let (fmax, n) = DEFAULT_NORMALIZATION_GRID;
    let mut max = 0.0f64;
    for k in 0..n {
        let f = fmax * k as f64 / (n - 1) as f64;
        max = max.max(model.eval(f)?);
    }
    Ok(model.eval(f_cpd)? / max)
}

/// Sum over the grid of `w(f) * |target(f) - reconstructed(f)|^2`; one
/// accommodation plane's contribution to the strategy cost.
pub fn weighted_spectral_distance(
    target: &[Complex64],
    reconstructed: &[Complex64],
    weights: &[f64],
) -> Result<f64, PerceptionError> {
    if target.len() != reconstructed.len() {
        return Err(PerceptionError::ShapeMismatch(
            target.len(),
            reconstructed.len(),
        ));
    }
    if weights.len() != target.len() {
        return Err(PerceptionError::ShapeMismatch(weights.len(), target.len()));
    }
    Ok(target
        .iter()
        .zip(reconstructed)
        .zip(weights)
        .map(|((t, r), w)| {
            let d = t - r;
            w * (d.re * d.re + d.im * d.im)
        })
        .sum())
}

/// Same distance with weights from a CSF model evaluated on the given grid.
pub fn csf_weighted_distance(
    target: &[Complex64],
    reconstructed: &[Complex64],
    frequencies: &[f64],
    model: &CsfModel,
) -> Result<f64, PerceptionError> {
    let weights = model.weights_for(frequencies)?;
    weighted_spectral_distance(target, reconstructed, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_peak_in_band() {
        let model = CsfModel::default();
        let freqs: Vec<f64> = (0..64).map(|k| 10.0 * k as f64 / 63.0).collect();
        let weights = model.weights_for(&freqs).unwrap();
        let argmax = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let peak = freqs[argmax];
        assert!(
            (4.0..=8.0).contains(&peak),
            "peak {peak} outside the 4-8 cpd band"
        );
        assert!(weights[0] < weights[argmax]);
    }

    #[test]
    fn band_edge_weight_regression() {
        // V(10) for the default model, frozen from the closed form
        // (10/6) * exp(-4/6) = 0.855695...
        let w = csf_weight(10.0, &CsfModel::default()).unwrap();
        let peak = csf_weight(6.031746031746032, &CsfModel::default()).unwrap();
        assert!(w < peak, "band edge below peak");
        let expected = (10.0 / 6.0) * (-4.0f64 / 6.0).exp();
        assert!(
            (w * peakless_max() - expected).abs() < 1e-12,
            "V(10) raw {} vs {expected}",
            w * peakless_max()
        );
    }

    // Maximum of the default model over the default normalization grid,
    // used to undo normalization in the regression check.
    fn peakless_max() -> f64 {
        let model = CsfModel::default();
        let mut max = 0.0f64;
        for k in 0..64 {
            let f = 10.0 * k as f64 / 63.0;
            max = max.max(model.eval(f).unwrap());
        }
        max
    }

    #[test]
    fn negative_frequency_rejected() {
        assert!(matches!(
            csf_weight(-1.0, &CsfModel::default()),
            Err(PerceptionError::NegativeFrequency(_))
        ));
    }

    #[test]
    fn identical_spectra_have_zero_distance() {
        let s = vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.1)];
        let w = vec![1.0, 1.0];
        assert_eq!(weighted_spectral_distance(&s, &s, &w).unwrap(), 0.0);
    }

    #[test]
    fn hand_arithmetic_two_point_example() {
        let t = vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)];
        let r = vec![Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.0)];
        let d = weighted_spectral_distance(&t, &r, &[1.0, 1.0]).unwrap();
        assert!((d - 0.04).abs() < 1e-15, "d = {d}");
    }

    #[test]
    fn unit_weights_reduce_to_unweighted_sum() {
        let t = vec![Complex64::new(0.9, 0.1), Complex64::new(0.2, -0.3)];
        let r = vec![Complex64::new(0.4, 0.0), Complex64::new(0.1, 0.2)];
        let weighted = weighted_spectral_distance(&t, &r, &[1.0, 1.0]).unwrap();
        let plain: f64 = t
            .iter()
            .zip(&r)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!((weighted - plain).abs() < 1e-15);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let t = vec![Complex64::new(1.0, 0.0)];
        let r = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(
            weighted_spectral_distance(&t, &r, &[1.0]),
            Err(PerceptionError::ShapeMismatch(_, _))
        ));
    }

    proptest! {
        #[test]
        fn distance_is_a_pseudometric(
            a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
            w in proptest::collection::vec(0.01f64..2.0, 8),
        ) {
            let a: Vec<Complex64> = a.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
            let b: Vec<Complex64> = b.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
            let dab = weighted_spectral_distance(&a, &b, &w).unwrap();
            let dba = weighted_spectral_distance(&b, &a, &w).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert_eq!(dab, dba);
            let daa = weighted_spectral_distance(&a, &a, &w).unwrap();
            prop_assert_eq!(daa, 0.0);
        }

        #[test]
        fn scaling_weights_scales_distance(
            a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
            k in 0.1f64..10.0,
        ) {
            let a: Vec<Complex64> = a.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
            let b: Vec<Complex64> = b.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
            let w = vec![1.0; 6];
            let wk: Vec<f64> = w.iter().map(|v| v * k).collect();
            let d1 = weighted_spectral_distance(&a, &b, &w).unwrap();
            let dk = weighted_spectral_distance(&a, &b, &wk).unwrap();
            prop_assert!((dk - k * d1).abs() <= 1e-12 * (1.0 + dk.abs()));
        }
    }
}
