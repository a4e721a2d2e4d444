//! Per-target-depth illumination strategies: the binary subframe pattern a
//! pixel is lit in, the cost that scores how faithfully the resulting
//! defocus stack reproduces a point at the target depth, and optimizers
//! over the bitstring space.

mod evaluator;
mod ga;
mod table;

pub use evaluator::CostEvaluator;
pub use ga::{optimize_ga, GaParams, GaResult};
pub use table::{
    build_strategy_table, identity_table, StrategyTable, StrategyTableEntry, TableFormatError,
};

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{OpticsError, OtfBank};
use crate::perception::{CsfModel, PerceptionError};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("degenerate strategy: all bits zero with no DC leakage displays nothing")]
    DegenerateStrategy,
    #[error("strategy length {0} does not match layer count {1}")]
    LengthMismatch(usize, usize),
    #[error("brute force limited to 20 layers, got {0}")]
    TooManyLayers(usize),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid GA parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

/// Binary subframe pattern, one bit per tomographic layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IlluminationStrategy {
    bits: Vec<bool>,
}

impl IlluminationStrategy {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Single lit subframe at layer `j`.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut bits = vec![false; n];
        bits[j] = true;
        Self { bits }
    }

    pub fn all_ones(n: usize) -> Self {
        Self {
            bits: vec![true; n],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of lit subframes (the integer illumination time).
    pub fn lit_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Illumination time including DC leakage: `sum_j (b_j + c)`.
    pub fn illumination_time(&self, dc_noise: f64) -> f64 {
        self.lit_count() as f64 + self.bits.len() as f64 * dc_noise
    }

    /// "0"/"1" string, first layer first.
    pub fn bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self, StrategyError> {
        let bits: Result<Vec<bool>, _> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(StrategyError::InvalidProblem(format!(
                    "invalid bitstring character {other:?}"
                ))),
            })
            .collect();
        Ok(Self { bits: bits? })
    }

    pub fn hamming_distance(&self, other: &Self) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// How spectra are compared inside the fidelity term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    /// Compare complex spectra, retaining defocus phase reversals.
    Complex,
    /// Compare modulus spectra only.
    Magnitude,
}

impl Default for SpectrumMode {
    fn default() -> Self {
        SpectrumMode::Complex
    }
}

/// Penalty weight selection for the brightness bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// Scale from the problem itself: the primitive strategy's fidelity plus
    /// the all-ones fidelity, which provably makes the bound binding.
    Auto,
    Fixed(f64),
}

/// One instance of the constrained illumination-strategy problem for a
/// single target depth. Depth grids are taken from the OTF bank, so the
/// bank always matches the problem by construction.
#[derive(Debug, Clone)]
pub struct StrategyProblem {
    bank: Arc<OtfBank>,
    target_depth: f64,
    dc_noise: f64,
    brightness_bound: usize,
    penalty_weight: f64,
    csf: CsfModel,
    spectrum_mode: SpectrumMode,
    target_otfs: Vec<Vec<Complex64>>,
    weights: Vec<f64>,
}

impl StrategyProblem {
    pub fn new(
        bank: Arc<OtfBank>,
        target_depth: f64,
        dc_noise: f64,
        brightness_bound: usize,
        gamma: GammaMode,
        csf: CsfModel,
        spectrum_mode: SpectrumMode,
    ) -> Result<Self, StrategyError> {
        if !target_depth.is_finite() {
            return Err(StrategyError::InvalidProblem("target depth not finite".into()));
        }
        let layers = bank.layer_depths();
        if target_depth < layers[0] || target_depth > *layers.last().unwrap() {
            return Err(StrategyError::InvalidProblem(format!(
                "target depth {target_depth} outside layer range [{}, {}]",
                layers[0],
                layers.last().unwrap()
            )));
        }
        if !(dc_noise >= 0.0 && dc_noise.is_finite()) {
            return Err(StrategyError::InvalidProblem("dc noise must be >= 0".into()));
        }
        let target_otfs: Vec<Vec<Complex64>> = bank
            .target_column(target_depth)?
            .into_iter()
            .map(|otf| otf.values().to_vec())
            .collect();
        let weights = csf.weights_for(bank.frequencies())?;
        let mut problem = Self {
            bank,
            target_depth,
            dc_noise,
            brightness_bound,
            penalty_weight: 0.0,
            csf,
            spectrum_mode,
            target_otfs,
            weights,
        };
        problem.penalty_weight = match gamma {
            GammaMode::Fixed(g) => {
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(StrategyError::InvalidProblem("gamma must be >= 0".into()));
                }
                g
            }
            GammaMode::Auto => {
                let n = problem.layer_count();
                let prim = primitive_strategy(&problem);
                let fid_prim = problem.fidelity_terms(&prim)?.0;
                let fid_ones = problem
                    .fidelity_terms(&IlluminationStrategy::all_ones(n))?
                    .0;
                fid_prim + fid_ones
            }
        };
        Ok(problem)
    }

    pub fn bank(&self) -> &Arc<OtfBank> {
        &self.bank
    }

    pub fn layer_depths(&self) -> &[f64] {
        self.bank.layer_depths()
    }

    pub fn accommodation_depths(&self) -> &[f64] {
        self.bank.accommodation_depths()
    }

    pub fn layer_count(&self) -> usize {
        self.bank.layer_count()
    }

    pub fn plane_count(&self) -> usize {
        self.bank.plane_count()
    }

    pub fn target_depth(&self) -> f64 {
        self.target_depth
    }

    pub fn dc_noise(&self) -> f64 {
        self.dc_noise
    }

    pub fn brightness_bound(&self) -> usize {
        self.brightness_bound
    }

    pub fn penalty_weight(&self) -> f64 {
        self.penalty_weight
    }

    pub fn csf(&self) -> &CsfModel {
        &self.csf
    }

    pub fn spectrum_mode(&self) -> SpectrumMode {
        self.spectrum_mode
    }

    pub fn csf_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Target spectrum H(f; z_i^s, z_d) for plane `i`.
    pub fn target_spectrum(&self, i: usize) -> &[Complex64] {
        &self.target_otfs[i]
    }

    fn check_strategy(&self, b: &IlluminationStrategy) -> Result<(), StrategyError> {
        if b.len() != self.layer_count() {
            return Err(StrategyError::LengthMismatch(b.len(), self.layer_count()));
        }
        if b.lit_count() == 0 && self.dc_noise == 0.0 {
            return Err(StrategyError::DegenerateStrategy);
        }
        Ok(())
    }

    /// Fidelity term and its per-plane contributions.
    fn fidelity_terms(&self, b: &IlluminationStrategy) -> Result<(f64, Vec<f64>), StrategyError> {
        self.check_strategy(b)?;
        let mut per_plane = Vec::with_capacity(self.plane_count());
        for i in 0..self.plane_count() {
            let p = reconstructed_profile(b, self, i)?;
            let target = self.target_spectrum(i);
            let d = match self.spectrum_mode {
                SpectrumMode::Complex => {
                    crate::perception::weighted_spectral_distance(target, &p, &self.weights)?
                }
                SpectrumMode::Magnitude => target
                    .iter()
                    .zip(&p)
                    .zip(&self.weights)
                    .map(|((t, r), w)| {
                        let d = t.norm() - r.norm();
                        w * d * d
                    })
                    .sum(),
            };
            per_plane.push(d);
        }
        Ok((per_plane.iter().sum(), per_plane))
    }
}

/// Cost value with its fidelity/penalty split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub fidelity: f64,
    pub penalty: f64,
    pub total: f64,
    /// Per-accommodation-plane fidelity contributions, in grid order.
    pub per_plane: Vec<f64>,
}

/// Reconstructed spectrum at accommodation plane `i`:
/// `P(f) = sum_j (b_j + c) H(f; z_i^s, z_j^t) / sum_j (b_j + c)`.
/// The numerator and normalizer accumulate in the same order, so P(0) is
/// exactly 1 for any valid strategy.
pub fn reconstructed_profile(
    b: &IlluminationStrategy,
    problem: &StrategyProblem,
    plane: usize,
) -> Result<Vec<Complex64>, StrategyError> {
    problem.check_strategy(b)?;
    reconstruction_spectrum(b, &problem.bank, problem.dc_noise, plane)
}

/// The same reconstruction straight from a bank, for callers without a full
/// problem instance (contrast maps, diagnostics).
pub fn reconstruction_spectrum(
    b: &IlluminationStrategy,
    bank: &OtfBank,
    dc_noise: f64,
    plane: usize,
) -> Result<Vec<Complex64>, StrategyError> {
    let n = bank.layer_count();
    if b.len() != n {
        return Err(StrategyError::LengthMismatch(b.len(), n));
    }
    if b.lit_count() == 0 && dc_noise == 0.0 {
        return Err(StrategyError::DegenerateStrategy);
    }
    let freq_count = bank.frequencies().len();
    let mut acc = vec![Complex64::new(0.0, 0.0); freq_count];
    let mut a = 0.0;
    for j in 0..n {
        let w = if b.bits()[j] { 1.0 + dc_noise } else { dc_noise };
        if w == 0.0 {
            continue;
        }
        a += w;
        let h = bank.otf(plane, j).values();
        for (dst, src) in acc.iter_mut().zip(h) {
            *dst += src * w;
        }
    }
    for v in &mut acc {
        *v /= a;
    }
    Ok(acc)
}

/// Full strategy cost: CSF-weighted spectral error summed over the
/// accommodation planes plus the clamped brightness penalty
/// `gamma * max(A_low - A, 0)` on the lit-subframe count.
pub fn cost(
    b: &IlluminationStrategy,
    problem: &StrategyProblem,
) -> Result<CostBreakdown, StrategyError> {
    let (fidelity, per_plane) = problem.fidelity_terms(b)?;
    let shortfall = (problem.brightness_bound as f64 - b.lit_count() as f64).max(0.0);
    let penalty = problem.penalty_weight * shortfall;
    Ok(CostBreakdown {
        fidelity,
        penalty,
        total: fidelity + penalty,
        per_plane,
    })
}

/// Index of the layer nearest to `z`, ties at exact midpoints resolved to
/// the lower index; out-of-range depths clamp to the nearest end.
pub fn nearest_layer_index(layer_depths: &[f64], z: f64) -> usize {
    let n = layer_depths.len();
    let hi = layer_depths.partition_point(|&d| d < z);
    if hi == 0 {
        return 0;
    }
    if hi >= n {
        return n - 1;
    }
    let low_dist = z - layer_depths[hi - 1];
    let high_dist = layer_depths[hi] - z;
    if low_dist <= high_dist {
        hi - 1
    } else {
        hi
    }
}

/// Light the single subframe whose layer is nearest the target depth.
pub fn primitive_strategy(problem: &StrategyProblem) -> IlluminationStrategy {
    let j = nearest_layer_index(problem.layer_depths(), problem.target_depth);
    IlluminationStrategy::unit(problem.layer_count(), j)
}

/// Exhaustive minimizer over all nonzero bitstrings; the test oracle for
/// the genetic optimizer. Ties break toward smaller illumination time, then
/// the lexicographically smallest bitstring.
pub fn brute_force_optimum(
    problem: &StrategyProblem,
) -> Result<(IlluminationStrategy, CostBreakdown), StrategyError> {
    let n = problem.layer_count();
    if n > 20 {
        return Err(StrategyError::TooManyLayers(n));
    }
    let evaluator = CostEvaluator::new(problem)?;
    let mut best: Option<(f64, usize, Vec<bool>)> = None;
    for x in 1u64..(1u64 << n) {
        let bits: Vec<bool> = (0..n).map(|j| (x >> j) & 1 == 1).collect();
        let total = evaluator.evaluate_bits(&bits);
        let lit = bits.iter().filter(|&&b| b).count();
        let better = match &best {
            None => true,
            Some((bt, bl, bb)) => {
                total < *bt
                    || (total == *bt && (lit < *bl || (lit == *bl && bits.as_slice() < bb.as_slice())))
            }
        };
        if better {
            best = Some((total, lit, bits));
        }
    }
    let (_, _, bits) = best.expect("n >= 1 guarantees a nonzero bitstring");
    let strategy = IlluminationStrategy::new(bits);
    let breakdown = cost(&strategy, problem)?;
    Ok((strategy, breakdown))
}

/// Shared problem parameters for building per-target instances against one
/// immutable bank.
#[derive(Debug, Clone)]
pub struct ProblemTemplate {
    pub bank: Arc<OtfBank>,
    pub dc_noise: f64,
    pub brightness_bound: usize,
    pub gamma: GammaMode,
    pub csf: CsfModel,
    pub spectrum_mode: SpectrumMode,
}

impl ProblemTemplate {
    pub fn problem_for(&self, target_depth: f64) -> Result<StrategyProblem, StrategyError> {
        StrategyProblem::new(
            Arc::clone(&self.bank),
            target_depth,
            self.dc_noise,
            self.brightness_bound,
            self.gamma,
            self.csf.clone(),
            self.spectrum_mode,
        )
    }
}

/// `A_low` from a fractional bound: `round(fraction * n)`, at least 1 when
/// the fraction is positive, 0 when it is 0.
pub fn brightness_bound_from_fraction(fraction: f64, layer_count: usize) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    ((fraction * layer_count as f64).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{layer_grid, AberrationSpec, OpticalConfig, OtfBank};

    pub(crate) fn small_bank(n_layers: usize, m_planes: usize) -> Arc<OtfBank> {
        let cfg = OpticalConfig {
            pupil_grid: 64,
            ..Default::default()
        };
        let layers = layer_grid(n_layers, 0.0, 5.5);
        let planes: Vec<f64> = (0..m_planes)
            .map(|i| 5.5 * i as f64 / (m_planes - 1) as f64)
            .collect();
        Arc::new(OtfBank::build(&planes, &layers, &cfg, &AberrationSpec::default()).unwrap())
    }

    fn naive_problem(bank: Arc<OtfBank>, z_d: f64) -> StrategyProblem {
        StrategyProblem::new(
            bank,
            z_d,
            0.0,
            0,
            GammaMode::Auto,
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap()
    }

    #[test]
    fn single_bit_profile_is_that_layer_otf() {
        let bank = small_bank(6, 5);
        let problem = naive_problem(Arc::clone(&bank), bank.layer_depths()[2]);
        let b = IlluminationStrategy::unit(6, 2);
        for i in 0..problem.plane_count() {
            let p = reconstructed_profile(&b, &problem, i).unwrap();
            assert_eq!(p.as_slice(), bank.otf(i, 2).values());
        }
    }

    #[test]
    fn all_ones_profile_is_plane_mean() {
        let bank = small_bank(4, 3);
        let problem = naive_problem(Arc::clone(&bank), bank.layer_depths()[1]);
        let b = IlluminationStrategy::all_ones(4);
        let p = reconstructed_profile(&b, &problem, 1).unwrap();
        let f = bank.frequencies().len();
        for k in 0..f {
            let mean = (0..4)
                .map(|j| bank.otf(1, j).values()[k])
                .sum::<num_complex::Complex64>()
                / 4.0;
            assert!((p[k] - mean).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_leakage_profile_is_uniform_mean() {
        let bank = small_bank(5, 3);
        let problem = StrategyProblem::new(
            Arc::clone(&bank),
            bank.layer_depths()[2],
            0.05,
            0,
            GammaMode::Auto,
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap();
        let b = IlluminationStrategy::new(vec![false; 5]);
        let p = reconstructed_profile(&b, &problem, 0).unwrap();
        let f = bank.frequencies().len();
        for k in 0..f {
            let mean = (0..5)
                .map(|j| bank.otf(0, j).values()[k])
                .sum::<num_complex::Complex64>()
                / 5.0;
            assert!((p[k] - mean).norm() < 1e-12, "leakage mean at {k}");
        }
    }

    #[test]
    fn degenerate_strategy_rejected() {
        let bank = small_bank(4, 3);
        let problem = naive_problem(Arc::clone(&bank), 1.0);
        let b = IlluminationStrategy::new(vec![false; 4]);
        assert!(matches!(
            reconstructed_profile(&b, &problem, 0),
            Err(StrategyError::DegenerateStrategy)
        ));
        assert!(matches!(
            cost(&b, &problem),
            Err(StrategyError::DegenerateStrategy)
        ));
    }

    #[test]
    fn dc_normalization_is_exact() {
        let bank = small_bank(7, 5);
        for c in [0.0, 0.05, 0.3] {
            let problem = StrategyProblem::new(
                Arc::clone(&bank),
                2.0,
                c,
                0,
                GammaMode::Fixed(0.0),
                CsfModel::default(),
                SpectrumMode::Complex,
            )
            .unwrap();
            for bits in [
                IlluminationStrategy::unit(7, 3),
                IlluminationStrategy::all_ones(7),
                IlluminationStrategy::from_bitstring("0110010").unwrap(),
            ] {
                for i in 0..problem.plane_count() {
                    let p = reconstructed_profile(&bits, &problem, i).unwrap();
                    assert!((p[0] - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn on_grid_primitive_has_exactly_zero_cost() {
        let bank = small_bank(8, 6);
        let z = bank.layer_depths()[3];
        let problem = StrategyProblem::new(
            Arc::clone(&bank),
            z,
            0.0,
            0,
            GammaMode::Auto,
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap();
        let prim = primitive_strategy(&problem);
        assert_eq!(prim.lit_count(), 1);
        let j = cost(&prim, &problem).unwrap();
        assert_eq!(j.fidelity, 0.0);
        assert_eq!(j.penalty, 0.0);
        assert_eq!(j.total, 0.0);
    }

    #[test]
    fn penalty_clamps_at_zero() {
        let bank = small_bank(6, 4);
        let problem = StrategyProblem::new(
            Arc::clone(&bank),
            1.0,
            0.0,
            2,
            GammaMode::Fixed(5.0),
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap();
        let over = IlluminationStrategy::from_bitstring("111100").unwrap();
        let j = cost(&over, &problem).unwrap();
        assert_eq!(j.penalty, 0.0, "no reward or cost above the bound");
        let under = IlluminationStrategy::unit(6, 2);
        let ju = cost(&under, &problem).unwrap();
        assert_eq!(ju.penalty, 5.0);
    }

    #[test]
    fn per_plane_terms_sum_to_fidelity() {
        let bank = small_bank(6, 5);
        let problem = StrategyProblem::new(
            Arc::clone(&bank),
            2.6,
            0.05,
            0,
            GammaMode::Auto,
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap();
        let b = IlluminationStrategy::from_bitstring("010110").unwrap();
        let j = cost(&b, &problem).unwrap();
        // plane ordering cannot matter: re-sum the contributions in any
        // permutation and compare
        let mut reversed: f64 = j.per_plane.iter().rev().sum();
        assert!((reversed - j.fidelity).abs() < 1e-12 * (1.0 + j.fidelity));
        reversed = j.per_plane.iter().skip(1).chain(j.per_plane.iter().take(1)).sum();
        assert!((reversed - j.fidelity).abs() < 1e-12 * (1.0 + j.fidelity));
    }

    #[test]
    fn nearest_layer_tie_breaks_low_and_clamps() {
        let layers = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(nearest_layer_index(&layers, 1.0), 1);
        assert_eq!(nearest_layer_index(&layers, 1.5), 1, "midpoint to lower");
        assert_eq!(nearest_layer_index(&layers, 1.51), 2);
        assert_eq!(nearest_layer_index(&layers, -4.0), 0, "clamp below");
        assert_eq!(nearest_layer_index(&layers, 9.9), 3, "clamp above");
    }

    #[test]
    fn brute_force_single_layer() {
        let bank = small_bank(1, 3);
        let problem = naive_problem(Arc::clone(&bank), bank.layer_depths()[0]);
        let (best, _) = brute_force_optimum(&problem).unwrap();
        assert_eq!(best.bits(), &[true]);
    }

    #[test]
    fn brute_force_matches_primitive_in_naive_condition() {
        let bank = small_bank(8, 6);
        let z = bank.layer_depths()[5];
        let problem = naive_problem(Arc::clone(&bank), z);
        let (best, j) = brute_force_optimum(&problem).unwrap();
        assert_eq!(best, primitive_strategy(&problem));
        assert_eq!(j.total, 0.0);
    }

    #[test]
    fn brute_force_refuses_large_n() {
        let bank = small_bank(21, 3);
        let problem = naive_problem(Arc::clone(&bank), 1.0);
        assert!(matches!(
            brute_force_optimum(&problem),
            Err(StrategyError::TooManyLayers(21))
        ));
    }

    #[test]
    fn tightening_bound_never_reduces_optimal_fidelity() {
        let bank = small_bank(8, 6);
        let mut prev = 0.0;
        for a_low in [0, 2, 4, 6] {
            let problem = StrategyProblem::new(
                Arc::clone(&bank),
                2.4,
                0.05,
                a_low,
                GammaMode::Auto,
                CsfModel::default(),
                SpectrumMode::Complex,
            )
            .unwrap();
            let (_, j) = brute_force_optimum(&problem).unwrap();
            assert!(
                j.fidelity >= prev - 1e-15,
                "fidelity {} fell below {} at A_low={}",
                j.fidelity,
                prev,
                a_low
            );
            prev = j.fidelity;
        }
    }

    #[test]
    fn leakage_only_dilutes_in_focus_mtf() {
        let bank = small_bank(10, 6);
        let z = bank.layer_depths()[4];
        let clean = naive_problem(Arc::clone(&bank), z);
        let noisy = StrategyProblem::new(
            Arc::clone(&bank),
            z,
            0.05,
            0,
            GammaMode::Auto,
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap();
        let prim = primitive_strategy(&clean);
        // in-focus plane: the accommodation depth nearest the target
        let i = nearest_layer_index(clean.accommodation_depths(), z);
        let p_clean = reconstructed_profile(&prim, &clean, i).unwrap();
        let p_noisy = reconstructed_profile(&prim, &noisy, i).unwrap();
        for (a, b) in p_clean.iter().zip(&p_noisy) {
            assert!(b.norm() <= a.norm() + 1e-15);
        }
    }

    #[test]
    fn fractional_bound_rounding() {
        assert_eq!(brightness_bound_from_fraction(0.0, 80), 0);
        assert_eq!(brightness_bound_from_fraction(0.625, 80), 50);
        assert_eq!(brightness_bound_from_fraction(0.025, 160), 4);
        assert_eq!(brightness_bound_from_fraction(0.001, 80), 1, "minimum 1");
    }

    #[test]
    fn target_outside_layer_range_rejected() {
        let bank = small_bank(4, 3);
        let top = *bank.layer_depths().last().unwrap();
        assert!(StrategyProblem::new(
            Arc::clone(&bank),
            top + 0.5,
            0.0,
            0,
            GammaMode::Auto,
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .is_err());
    }
}
