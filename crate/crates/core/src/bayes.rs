//! The two-coin distinguishability experiment.
//!
//! Coin A (distribution `p`) is tossed `n` times and an observer who knows
//! both `p` and `p2` infers which coin produced the data. This module gives
//! the exact Bayesian posterior, the large-n log-odds `n·KL(p‖p2)`, its
//! quadratic expansion `2n·ds²`, the resulting information gain, and a seeded
//! Monte Carlo estimate of the average gain over simulated datasets.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::rng::{multinomial, substream};
use crate::simplex::{fisher_quadratic, kl_divergence, ProbDist, TangentVec};

/// An uncertainty function on a binary distribution `(a, b)`, `a + b = 1`.
///
/// Implementations should be symmetric in their arguments and maximal at
/// `(½, ½)`.
pub trait EntropyFn: Sync {
    fn eval(&self, a: f64, b: f64) -> f64;

    fn name(&self) -> &'static str;
}

/// Shannon entropy in nats, `-Σ π ln π` with `0 ln 0 = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Shannon;

impl EntropyFn for Shannon {
    fn eval(&self, a: f64, b: f64) -> f64 {
        xlnx(a) + xlnx(b)
    }

    fn name(&self) -> &'static str {
        "shannon"
    }
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Rényi entropy of order 2, `-ln(a² + b²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Collision;

impl EntropyFn for Collision {
    fn eval(&self, a: f64, b: f64) -> f64 {
        -(a * a + b * b).ln()
    }

    fn name(&self) -> &'static str {
        "collision"
    }
}

/// Logistic function evaluated without overflow.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoinExperiment {
    pub p: ProbDist,
    pub p2: ProbDist,
    pub n: u64,
    pub prior_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorReport {
    pub post_a: f64,
    pub post_b: f64,
    /// Posterior log-odds `ln(post_a / post_b)` in nats.
    pub log_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

impl CoinExperiment {
    /// Equal prior odds for the two coins.
    pub fn new(p: ProbDist, p2: ProbDist, n: u64) -> Result<Self> {
        Self::with_prior(p, p2, n, 0.5)
    }

    pub fn with_prior(p: ProbDist, p2: ProbDist, n: u64, prior_a: f64) -> Result<Self> {
        check_dim(p.len(), p2.len())?;
        if !(prior_a > 0.0 && prior_a < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "prior_a must lie in (0, 1), got {prior_a}"
            )));
        }
        Ok(Self { p, p2, n, prior_a })
    }

    /// Log-likelihood ratio `Σ c_i ln(p_i / p2_i)` for real-valued counts.
    ///
    /// Returns `±∞` when exactly one coin assigns zero probability to an
    /// observed outcome.
    pub fn log_likelihood_ratio(&self, counts: &[f64]) -> Result<f64> {
        check_dim(self.p.len(), counts.len())?;
        let (mut finite, mut a_zero, mut b_zero) = (0.0, false, false);
        for ((&c, &a), &b) in counts.iter().zip(self.p.probs()).zip(self.p2.probs()) {
            if c == 0.0 {
                continue;
            }
            match (a == 0.0, b == 0.0) {
                (true, true) => return Err(Error::ZeroLikelihoodBoth),
                (true, false) => a_zero = true,
                (false, true) => b_zero = true,
                (false, false) => finite += c * (a / b).ln(),
            }
        }
        match (a_zero, b_zero) {
            (true, true) => Err(Error::ZeroLikelihoodBoth),
            (true, false) => Ok(f64::NEG_INFINITY),
            (false, true) => Ok(f64::INFINITY),
            (false, false) => Ok(finite),
        }
    }

    /// Exact Bayes posterior over the two coins given observed outcome counts.
    pub fn exact_posterior(&self, counts: &[u64]) -> Result<PosteriorReport> {
        check_dim(self.p.len(), counts.len())?;
        let total: u64 = counts.iter().sum();
        if total != self.n {
            return Err(Error::CountMismatch {
                expected: self.n,
                actual: total,
            });
        }
        let as_f64: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let llr = self.log_likelihood_ratio(&as_f64)?;
        let prior_log_odds = (self.prior_a / (1.0 - self.prior_a)).ln();
        let log_ratio = prior_log_odds + llr;
        Ok(PosteriorReport {
            post_a: sigmoid(log_ratio),
            post_b: sigmoid(-log_ratio),
            log_ratio,
        })
    }

    /// Large-n log-odds `n·Σ p_i ln(p_i / p2_i)`.
    pub fn expected_log_ratio(&self) -> Result<f64> {
        Ok(self.n as f64 * kl_divergence(&self.p, &self.p2)?)
    }

    /// `n·ds²` with `ds²` the information metric at `p` along `p2 - p`.
    pub fn n_ds2(&self) -> Result<f64> {
        let dp = TangentVec::between(&self.p, &self.p2)?;
        Ok(self.n as f64 * fisher_quadratic(&self.p, &dp)?)
    }

    /// Quadratic expansion of the log-odds, `2n·ds²`.
    pub fn expansion_log_ratio(&self) -> Result<f64> {
        Ok(2.0 * self.n_ds2()?)
    }

    /// `U(½, ½) - U(P_A, P_B)` where `P_A / P_B = exp(2n·ds²)`.
    pub fn info_gain_exact(&self, u: &dyn EntropyFn) -> Result<f64> {
        let lr = self.expansion_log_ratio()?;
        let gain = u.eval(0.5, 0.5) - u.eval(sigmoid(lr), sigmoid(-lr));
        Ok(gain.max(0.0))
    }

    /// Small-signal Shannon gain `½ (n·ds²)²`.
    pub fn info_gain_approx(&self) -> Result<f64> {
        let x = self.n_ds2()?;
        Ok(0.5 * x * x)
    }

    /// Average entropy reduction `U(½, ½) - U(posterior)` over `trials`
    /// datasets of `n` tosses drawn from coin A.
    ///
    /// Trial `t` uses substream `t` of `seed`. Outcomes are visited in a
    /// canonical order of their `(p_i, p2_i)` pairs, so relabeling outcomes
    /// in both coins leaves the result unchanged bit for bit.
    pub fn monte_carlo_gain(
        &self,
        trials: u64,
        seed: u64,
        u: &dyn EntropyFn,
    ) -> Result<MonteCarloSummary> {
        if trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        let mut order: Vec<usize> = (0..self.p.len()).collect();
        order.sort_by(|&i, &j| {
            let key = |k: usize| (self.p.probs()[k], self.p2.probs()[k]);
            let (a, b) = (key(i), key(j));
            a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
        });
        let permute = |d: &ProbDist| {
            ProbDist::new(order.iter().map(|&k| d.probs()[k]).collect())
                .expect("a permutation of a distribution is a distribution")
        };
        let canonical = Self {
            p: permute(&self.p),
            p2: permute(&self.p2),
            ..self.clone()
        };
        let base = u.eval(0.5, 0.5);

        let gains: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(seed, t);
                let counts = multinomial(&mut rng, canonical.n, canonical.p.probs());
                // counts come from coin A, so its likelihood is never zero
                let post = canonical
                    .exact_posterior(&counts)
                    .expect("data drawn from coin A has positive likelihood");
                base - u.eval(post.post_a, post.post_b)
            })
            .collect();

        let m = trials as f64;
        let mean = gains.iter().sum::<f64>() / m;
        let std_error = if trials > 1 {
            let var = gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        Ok(MonteCarloSummary {
            mean,
            std_error,
            trials,
            seed,
        })
    }

    /// Exact expectation of the per-dataset entropy reduction for a
    /// two-outcome coin, by summing over the binomial distribution of counts.
    ///
    /// This is the quantity `monte_carlo_gain` estimates.
    pub fn expected_posterior_gain_binary(&self, u: &dyn EntropyFn) -> Result<f64> {
        if self.p.len() != 2 {
            return Err(Error::InvalidParameter(
                "exact enumeration is implemented for two-outcome coins".into(),
            ));
        }
        let q = self.p.probs()[0];
        let n = self.n;
        let base = u.eval(0.5, 0.5);
        let mut total = 0.0;
        for k in 0..=n {
            let w = binomial_pmf(n, k, q);
            if w == 0.0 {
                continue;
            }
            let post = self.exact_posterior(&[k, n - k])?;
            total += w * (base - u.eval(post.post_a, post.post_b));
        }
        Ok(total)
    }
}

fn binomial_pmf(n: u64, k: u64, q: f64) -> f64 {
    if q <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln_choose: f64 = (1..=k)
        .map(|j| ((n - k + j) as f64).ln() - (j as f64).ln())
        .sum();
    (ln_choose + k as f64 * q.ln() + (n - k) as f64 * (1.0 - q).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd(v: &[f64]) -> ProbDist {
        ProbDist::new(v.to_vec()).unwrap()
    }

    fn coin(p: &[f64], p2: &[f64], n: u64) -> CoinExperiment {
        CoinExperiment::new(pd(p), pd(p2), n).unwrap()
    }

    #[test]
    fn posterior_examples() {
        let e = coin(&[0.3, 0.7], &[0.3, 0.7], 5);
        assert_eq!(e.exact_posterior(&[2, 3]).unwrap().post_a, 0.5);

        let e = coin(&[0.5, 0.5], &[0.25, 0.75], 2);
        let r = e.exact_posterior(&[2, 0]).unwrap();
        assert!((r.post_a - 0.8).abs() < 1e-15);
        assert!((r.log_ratio - 4f64.ln()).abs() < 1e-15);
        assert!((r.post_a + r.post_b - 1.0).abs() < 1e-12);

        let e = CoinExperiment::with_prior(pd(&[0.5, 0.5]), pd(&[0.2, 0.8]), 0, 0.3).unwrap();
        assert!((e.exact_posterior(&[0, 0]).unwrap().post_a - 0.3).abs() < 1e-15);
    }

    #[test]
    fn posterior_errors() {
        let e = coin(&[0.0, 1.0], &[0.0, 1.0], 1);
        assert_eq!(e.exact_posterior(&[1, 0]), Err(Error::ZeroLikelihoodBoth));
        let e = coin(&[0.0, 1.0], &[1.0, 0.0], 2);
        assert_eq!(e.exact_posterior(&[1, 1]), Err(Error::ZeroLikelihoodBoth));
        let r = e.exact_posterior(&[0, 2]).unwrap();
        assert_eq!(r.post_a, 1.0);
        assert!(matches!(
            e.exact_posterior(&[0, 1]),
            Err(Error::CountMismatch { .. })
        ));
        assert!(CoinExperiment::with_prior(pd(&[0.5, 0.5]), pd(&[0.5, 0.5]), 1, 1.0).is_err());
    }

    #[test]
    fn expected_log_ratio_examples() {
        let e = coin(&[0.5, 0.5], &[0.25, 0.75], 10);
        let v = e.expected_log_ratio().unwrap();
        assert!((v - 1.438_410_362_258_904_6).abs() < 1e-14);
        assert!((v.exp() - 4.213_991_769_547_325).abs() < 1e-12);
        let e1 = coin(&[0.5, 0.5], &[0.25, 0.75], 1);
        assert_eq!(
            e1.expected_log_ratio().unwrap(),
            kl_divergence(&e1.p, &e1.p2).unwrap()
        );
        assert_eq!(coin(&[0.4, 0.6], &[0.4, 0.6], 9).expected_log_ratio().unwrap(), 0.0);
    }

    #[test]
    fn expected_counts_identity() {
        let e = coin(&[0.2, 0.3, 0.5], &[0.25, 0.25, 0.5], 40);
        let counts: Vec<f64> = e.p.probs().iter().map(|p| p * 40.0).collect();
        let llr = e.log_likelihood_ratio(&counts).unwrap();
        assert!((llr - e.expected_log_ratio().unwrap()).abs() < 1e-13);
    }

    #[test]
    fn expansion_examples() {
        let e = coin(&[0.5, 0.5], &[0.51, 0.49], 100);
        assert!((e.expansion_log_ratio().unwrap() - 0.02).abs() < 1e-15);
        let half = coin(&[0.5, 0.5], &[0.505, 0.495], 100);
        let ratio = e.expansion_log_ratio().unwrap() / half.expansion_log_ratio().unwrap();
        assert!((ratio - 4.0).abs() < 1e-9);
        assert_eq!(coin(&[0.5, 0.5], &[0.5, 0.5], 100).expansion_log_ratio().unwrap(), 0.0);
    }

    #[test]
    fn info_gain_worked_point() {
        // p = (.5,.5), p2 = (.51,.49): ds² = 1e-4, so n = 1000 gives n·ds² = 0.1
        let e = coin(&[0.5, 0.5], &[0.51, 0.49], 1000);
        let exact = e.info_gain_exact(&Shannon).unwrap();
        assert!((exact - 0.004_975_110_640_849_051).abs() < 1e-14);
        assert!((e.info_gain_approx().unwrap() - 0.005).abs() < 1e-15);
        let e = coin(&[0.5, 0.5], &[0.51, 0.49], 100);
        let r = e.info_gain_exact(&Shannon).unwrap() / e.info_gain_approx().unwrap();
        assert!((r - 1.0).abs() < 0.01);
    }

    #[test]
    fn info_gain_scaling() {
        let a = coin(&[0.3, 0.7], &[0.31, 0.69], 50).info_gain_approx().unwrap();
        let b = coin(&[0.3, 0.7], &[0.31, 0.69], 100).info_gain_approx().unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
        let same = coin(&[0.3, 0.7], &[0.3, 0.7], 100);
        assert_eq!(same.info_gain_exact(&Shannon).unwrap(), 0.0);
        assert_eq!(same.info_gain_approx().unwrap(), 0.0);
        // other uncertainty functions are accepted
        let g = coin(&[0.5, 0.5], &[0.51, 0.49], 1000).info_gain_exact(&Collision).unwrap();
        assert!(g > 0.0);
    }

    #[test]
    fn monte_carlo_determinism_and_null() {
        let e = coin(&[0.5, 0.5], &[0.505, 0.495], 200);
        let a = e.monte_carlo_gain(1, 42, &Shannon).unwrap();
        let b = e.monte_carlo_gain(1, 42, &Shannon).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert!(e.monte_carlo_gain(0, 42, &Shannon).is_err());

        let null = coin(&[0.5, 0.5], &[0.5, 0.5], 200)
            .monte_carlo_gain(500, 1, &Shannon)
            .unwrap();
        assert!(null.mean.abs() <= 3.0 * null.std_error + 1e-15);
    }

    #[test]
    fn monte_carlo_relabeling_invariance() {
        let e = coin(&[0.2, 0.5, 0.3], &[0.25, 0.45, 0.3], 300);
        let f = coin(&[0.3, 0.2, 0.5], &[0.3, 0.25, 0.45], 300);
        let a = e.monte_carlo_gain(200, 9, &Shannon).unwrap();
        let b = f.monte_carlo_gain(200, 9, &Shannon).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    /// Brute force over all 2^n toss sequences.
    fn enumerate_sequences(e: &CoinExperiment) -> f64 {
        let n = e.n as u32;
        let mut total = 0.0;
        for mask in 0u64..(1 << n) {
            let k = mask.count_ones() as u64;
            let w = e.p.probs()[0].powi(k as i32) * e.p.probs()[1].powi((e.n - k) as i32);
            let post = e.exact_posterior(&[k, e.n - k]).unwrap();
            total += w * (2f64.ln() - Shannon.eval(post.post_a, post.post_b));
        }
        total
    }

    #[test]
    fn binomial_enumeration_matches_sequences() {
        let e = coin(&[0.4, 0.6], &[0.3, 0.7], 12);
        let a = e.expected_posterior_gain_binary(&Shannon).unwrap();
        let b = enumerate_sequences(&e);
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }

    #[test]
    fn monte_carlo_matches_enumeration() {
        let e = coin(&[0.5, 0.5], &[0.505, 0.495], 800);
        let mc = e.monte_carlo_gain(4000, 2024, &Shannon).unwrap();
        let exact = e.expected_posterior_gain_binary(&Shannon).unwrap();
        assert!(
            (mc.mean - exact).abs() <= 3.0 * mc.std_error,
            "{} ± {} vs {exact}",
            mc.mean,
            mc.std_error
        );
    }
}
