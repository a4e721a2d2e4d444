//! Fast strategy-cost evaluation for optimizer inner loops.
//!
//! In complex-spectrum mode the fidelity term is a quadratic form in the
//! weight vector `w = b + c`:
//!
//!   J_fid = K0 - (2/A) w.g + (1/A^2) w.Q.w,   A = sum(w)
//!
//! with `K0 = sum V |H_d|^2`, `g_j = sum V Re(conj(H_d) H_j)`, and
//! `Q_jk = sum V Re(conj(H_j) H_k)` precomputed over planes and
//! frequencies. Evaluating a bitstring then costs O(lit^2) instead of
//! O(m n F). `Q` depends only on the bank and the CSF weights, so table
//! builds share it across target depths. Each elementary term uses the
//! same arithmetic as the canonical cost, so an exactly reconstructible
//! target still evaluates to exactly zero. Magnitude mode has no quadratic
//! form and falls back to direct evaluation.

use std::sync::Arc;

use rayon::prelude::*;

use super::{cost, IlluminationStrategy, SpectrumMode, StrategyError, StrategyProblem};

/// Target-independent part: the layer-pair Gram matrix.
pub(crate) struct BankQuadratic {
    n: usize,
    q: Vec<f64>, // n x n, row-major, symmetric
    q_row_sums: Vec<f64>,
    q_total: f64,
}

impl BankQuadratic {
    pub(crate) fn build(problem: &StrategyProblem) -> Self {
        let bank = problem.bank();
        let n = problem.layer_count();
        let m = problem.plane_count();
        let weights = problem.csf_weights();

        let partials: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut q = vec![0.0; n * n];
                for (f, &w) in weights.iter().enumerate() {
                    for j in 0..n {
                        let hj = bank.otf(i, j).values()[f];
                        for k in j..n {
                            let hk = bank.otf(i, k).values()[f];
                            q[j * n + k] += w * (hj.re * hk.re + hj.im * hk.im);
                        }
                    }
                }
                q
            })
            .collect();

        let mut q = vec![0.0; n * n];
        for pq in partials {
            for (dst, src) in q.iter_mut().zip(pq) {
                *dst += src;
            }
        }
        for j in 0..n {
            for k in 0..j {
                q[j * n + k] = q[k * n + j];
            }
        }
        let q_row_sums: Vec<f64> = (0..n).map(|j| q[j * n..(j + 1) * n].iter().sum()).collect();
        let q_total = q_row_sums.iter().sum();
        BankQuadratic {
            n,
            q,
            q_row_sums,
            q_total,
        }
    }
}

/// Target-dependent part of the quadratic form.
struct TargetLinear {
    k0: f64,
    g: Vec<f64>,
    g_sum: f64,
}

impl TargetLinear {
    fn build(problem: &StrategyProblem) -> Self {
        let bank = problem.bank();
        let n = problem.layer_count();
        let m = problem.plane_count();
        let weights = problem.csf_weights();

        let partials: Vec<(f64, Vec<f64>)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let target = problem.target_spectrum(i);
                let mut k0 = 0.0;
                let mut g = vec![0.0; n];
                for (f, &w) in weights.iter().enumerate() {
                    let t = target[f];
                    k0 += w * (t.re * t.re + t.im * t.im);
                    for (j, gj) in g.iter_mut().enumerate() {
                        let hj = bank.otf(i, j).values()[f];
                        *gj += w * (t.re * hj.re + t.im * hj.im);
                    }
                }
                (k0, g)
            })
            .collect();

        let mut k0 = 0.0;
        let mut g = vec![0.0; n];
        for (pk, pg) in partials {
            k0 += pk;
            for (dst, src) in g.iter_mut().zip(pg) {
                *dst += src;
            }
        }
        let g_sum = g.iter().sum();
        TargetLinear { k0, g, g_sum }
    }
}

pub struct CostEvaluator<'p> {
    problem: &'p StrategyProblem,
    quad: Option<(Arc<BankQuadratic>, TargetLinear)>,
}

impl<'p> CostEvaluator<'p> {
    pub fn new(problem: &'p StrategyProblem) -> Result<Self, StrategyError> {
        match problem.spectrum_mode() {
            SpectrumMode::Complex => {
                let bankq = Arc::new(BankQuadratic::build(problem));
                Ok(Self::with_shared_bank(problem, bankq))
            }
            SpectrumMode::Magnitude => Ok(Self {
                problem,
                quad: None,
            }),
        }
    }

    /// Reuses a bank Gram matrix built for another target on the same bank
    /// and CSF weights.
    pub(crate) fn with_shared_bank(
        problem: &'p StrategyProblem,
        bankq: Arc<BankQuadratic>,
    ) -> Self {
        debug_assert_eq!(bankq.n, problem.layer_count());
        let linear = TargetLinear::build(problem);
        Self {
            problem,
            quad: Some((bankq, linear)),
        }
    }

    pub fn problem(&self) -> &StrategyProblem {
        self.problem
    }

    /// Total cost (fidelity + clamped penalty) of a bitstring. Degenerate
    /// all-zero strategies with c = 0 score infinity rather than erroring,
    /// which keeps optimizer loops total.
    pub fn evaluate_bits(&self, bits: &[bool]) -> f64 {
        let lit_count = bits.iter().filter(|&&b| b).count();
        if lit_count == 0 && self.problem.dc_noise() == 0.0 {
            return f64::INFINITY;
        }
        let fidelity = match &self.quad {
            Some((bankq, linear)) => {
                let c = self.problem.dc_noise();
                let n = bankq.n;
                let lit: Vec<usize> = (0..n).filter(|&j| bits[j]).collect();
                let a = lit.len() as f64 + n as f64 * c;
                let bg: f64 = lit.iter().map(|&j| linear.g[j]).sum();
                let mut bqb = 0.0;
                for &j in &lit {
                    let row = &bankq.q[j * n..(j + 1) * n];
                    for &k in &lit {
                        bqb += row[k];
                    }
                }
                if c == 0.0 {
                    linear.k0 - 2.0 / a * bg + bqb / (a * a)
                } else {
                    let bq1: f64 = lit.iter().map(|&j| bankq.q_row_sums[j]).sum();
                    let wg = bg + c * linear.g_sum;
                    let wqw = bqb + 2.0 * c * bq1 + c * c * bankq.q_total;
                    linear.k0 - 2.0 / a * wg + wqw / (a * a)
                }
            }
            None => {
                let strategy = IlluminationStrategy::new(bits.to_vec());
                match cost(&strategy, self.problem) {
                    Ok(breakdown) => breakdown.fidelity,
                    Err(_) => return f64::INFINITY,
                }
            }
        };
        let shortfall = (self.problem.brightness_bound() as f64 - lit_count as f64).max(0.0);
        fidelity + self.problem.penalty_weight() * shortfall
    }

    pub fn evaluate(&self, strategy: &IlluminationStrategy) -> f64 {
        self.evaluate_bits(strategy.bits())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::tests::small_bank;
    use super::*;
    use crate::perception::CsfModel;
    use crate::strategy::{cost, GammaMode, IlluminationStrategy, StrategyProblem};

    fn problem(c: f64, a_low: usize, z_d: f64) -> StrategyProblem {
        StrategyProblem::new(
            small_bank(9, 7),
            z_d,
            c,
            a_low,
            GammaMode::Fixed(0.37),
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap()
    }

    #[test]
    fn quadratic_form_matches_canonical_cost() {
        for (c, a_low, z_d) in [(0.0, 0, 1.7), (0.05, 3, 2.2), (0.2, 5, 4.5)] {
            let p = problem(c, a_low, z_d);
            let eval = CostEvaluator::new(&p).unwrap();
            for s in [
                "100000000",
                "000010000",
                "111111111",
                "010101010",
                "001100110",
            ] {
                let b = IlluminationStrategy::from_bitstring(s).unwrap();
                let fast = eval.evaluate(&b);
                let slow = cost(&b, &p).unwrap().total;
                assert!(
                    (fast - slow).abs() <= 1e-10 * (1.0 + slow.abs()),
                    "c={c} A_low={a_low} {s}: fast {fast} vs canonical {slow}"
                );
            }
        }
    }

    #[test]
    fn exact_zero_for_reconstructible_target() {
        let bank = small_bank(9, 7);
        let z = bank.layer_depths()[4];
        let p = StrategyProblem::new(
            Arc::clone(&bank),
            z,
            0.0,
            0,
            GammaMode::Fixed(0.0),
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap();
        let eval = CostEvaluator::new(&p).unwrap();
        let prim = IlluminationStrategy::unit(9, 4);
        assert_eq!(eval.evaluate(&prim), 0.0);
    }

    #[test]
    fn degenerate_bits_score_infinity() {
        let p = problem(0.0, 0, 2.0);
        let eval = CostEvaluator::new(&p).unwrap();
        assert!(eval.evaluate_bits(&[false; 9]).is_infinite());
    }

    #[test]
    fn shared_bank_matrix_matches_fresh_build() {
        let bank = small_bank(8, 5);
        let p1 = StrategyProblem::new(
            Arc::clone(&bank),
            1.4,
            0.05,
            2,
            GammaMode::Fixed(0.5),
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap();
        let p2 = StrategyProblem::new(
            Arc::clone(&bank),
            3.9,
            0.05,
            2,
            GammaMode::Fixed(0.5),
            CsfModel::default(),
            SpectrumMode::Complex,
        )
        .unwrap();
        let shared = Arc::new(BankQuadratic::build(&p1));
        let fresh = CostEvaluator::new(&p2).unwrap();
        let reused = CostEvaluator::with_shared_bank(&p2, shared);
        let b = IlluminationStrategy::from_bitstring("01100101").unwrap();
        assert_eq!(fresh.evaluate(&b), reused.evaluate(&b));
    }

    #[test]
    fn magnitude_mode_falls_back_to_direct() {
        let bank = small_bank(6, 5);
        let p = StrategyProblem::new(
            Arc::clone(&bank),
            2.0,
            0.05,
            0,
            GammaMode::Fixed(0.0),
            CsfModel::default(),
            SpectrumMode::Magnitude,
        )
        .unwrap();
        let eval = CostEvaluator::new(&p).unwrap();
        let b = IlluminationStrategy::from_bitstring("011010").unwrap();
        let fast = eval.evaluate(&b);
        let slow = cost(&b, &p).unwrap().total;
        assert_eq!(fast, slow);
    }
}
