//! Discrete distributions on the N-outcome simplex and their information
//! geometry: the Fisher-Rao metric, the statistical (geodesic) distance, the
//! Kullback-Leibler divergence and the square-root embedding that turns the
//! simplex into the positive orthant of the unit sphere.
//!
//! Logarithms are natural throughout, so divergences are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Normalization tolerance for distributions and tangent vectors.
pub const NORM_TOL: f64 = 1e-12;

/// A probability distribution over `N >= 2` outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbDist {
    probs: Vec<f64>,
}

impl ProbDist {
    /// Validates `probs`: at least two entries, all finite and non-negative,
    /// summing to one within [`NORM_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 outcomes, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}, expected a finite non-negative number"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total:.17}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Wraps entries already known to satisfy the invariants, e.g. squared
    /// components of a unit vector.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(probs.len() >= 2);
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { probs }
    }

    /// Builds a distribution from non-negative weights by dividing by their sum.
    pub fn renormalize(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, cannot normalize"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::renormalize(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// True when every entry is strictly positive (an interior point).
    pub fn is_interior(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }
}

impl TryFrom<Vec<f64>> for ProbDist {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbDist> for Vec<f64> {
    fn from(p: ProbDist) -> Self {
        p.probs
    }
}

/// A perturbation `dp` that keeps a distribution on the simplex (components
/// sum to zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVec {
    deltas: Vec<f64>,
}

impl TangentVec {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        let total: f64 = deltas.iter().sum();
        if !total.is_finite() || total.abs() > NORM_TOL {
            return Err(Error::InvalidTangent(total));
        }
        Ok(Self { deltas })
    }

    /// The displacement `to - from` between two distributions.
    ///
    /// Both endpoints are normalized within [`NORM_TOL`], so the sum of the
    /// difference is within twice that; it is accepted without re-checking.
    pub fn between(from: &ProbDist, to: &ProbDist) -> Result<Self> {
        check_dim(from.len(), to.len())?;
        Ok(Self {
            deltas: to
                .probs
                .iter()
                .zip(&from.probs)
                .map(|(b, a)| b - a)
                .collect(),
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            deltas: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            deltas: self.deltas.iter().map(|d| d * factor).collect(),
        }
    }
}

/// Squared line element of the information metric, `ds² = ¼ Σ dp_i² / p_i`.
///
/// Outcomes with `p_i = 0` are allowed as long as they are not perturbed.
pub fn fisher_quadratic(p: &ProbDist, dp: &TangentVec) -> Result<f64> {
    check_dim(p.len(), dp.len())?;
    let mut acc = 0.0;
    for (i, (&pi, &di)) in p.probs.iter().zip(&dp.deltas).enumerate() {
        if di == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Err(Error::SingularMetric {
                index: i,
                delta: di,
            });
        }
        acc += di * di / pi;
    }
    Ok(0.25 * acc)
}

/// Geodesic distance of the information metric,
/// `d_S = arccos Σ √(p_i p'_i)`, in radians.
///
/// Evaluated as the angle between the square-root embeddings using the
/// half-angle form `2·atan2(|a - b|, |a + b|)`, which stays accurate when the
/// two distributions nearly coincide.
pub fn statistical_distance(p: &ProbDist, p2: &ProbDist) -> Result<f64> {
    check_dim(p.len(), p2.len())?;
    let a = sqrt_embed(p);
    let b = sqrt_embed(p2);
    Ok(unit_vector_angle(&a, &b))
}

fn unit_vector_angle(a: &[f64], b: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Kullback-Leibler divergence `Σ p_i ln(p_i / p2_i)` in nats.
pub fn kl_divergence(p: &ProbDist, p2: &ProbDist) -> Result<f64> {
    check_dim(p.len(), p2.len())?;
    let mut acc = 0.0;
    for (i, (&a, &b)) in p.probs.iter().zip(&p2.probs).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::AbsoluteContinuityViolation { index: i });
        }
        // ln(a/b) = -ln(1 + (b - a)/a), accurate when b is close to a
        acc -= a * ((b - a) / a).ln_1p();
    }
    Ok(acc.max(0.0))
}

/// Entry-wise square root; maps the simplex onto the positive orthant of the
/// unit sphere, where the information metric becomes Euclidean.
pub fn sqrt_embed(p: &ProbDist) -> Vec<f64> {
    p.probs.iter().map(|x| x.sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn pd(v: &[f64]) -> ProbDist {
        ProbDist::new(v.to_vec()).unwrap()
    }

    fn tv(v: &[f64]) -> TangentVec {
        TangentVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(ProbDist::new(vec![1.0]).is_err());
        assert!(ProbDist::new(vec![0.5, 0.6]).is_err());
        assert!(ProbDist::new(vec![1.5, -0.5]).is_err());
        assert!(ProbDist::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbDist::new(vec![0.5, 0.5 + 5e-13]).is_ok());
        let r = ProbDist::renormalize(vec![1.0, 3.0]).unwrap();
        assert_eq!(r.probs(), &[0.25, 0.75]);
        assert!(ProbDist::renormalize(vec![0.0, 0.0]).is_err());
        assert!(TangentVec::new(vec![0.1, 0.1]).is_err());
    }

    #[test]
    fn fisher_examples() {
        let v = fisher_quadratic(&pd(&[0.5, 0.5]), &tv(&[0.01, -0.01])).unwrap();
        assert!((v - 1.0e-4).abs() < 1e-18);
        let v = fisher_quadratic(&pd(&[0.25, 0.75]), &tv(&[0.01, -0.01])).unwrap();
        assert!((v - 1.333_333_333_333_333_3e-4).abs() < 1e-18);
        let v = fisher_quadratic(&pd(&[0.2, 0.3, 0.5]), &TangentVec::zeros(3)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn fisher_boundary_handling() {
        let p = pd(&[0.0, 0.4, 0.6]);
        let v = fisher_quadratic(&p, &tv(&[0.0, 0.1, -0.1])).unwrap();
        assert!((v - 0.25 * (0.01 / 0.4 + 0.01 / 0.6)).abs() < 1e-17);
        assert!(matches!(
            fisher_quadratic(&p, &tv(&[0.1, -0.1, 0.0])),
            Err(Error::SingularMetric { index: 0, .. })
        ));
        assert!(matches!(
            fisher_quadratic(&p, &tv(&[0.1, -0.1])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let p = pd(&[0.3, 0.7]);
        assert_eq!(statistical_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(
            statistical_distance(&pd(&[1.0, 0.0]), &pd(&[0.0, 1.0])).unwrap(),
            FRAC_PI_2
        );
        let d = statistical_distance(&pd(&[0.9, 0.1]), &pd(&[0.1, 0.9])).unwrap();
        assert!((d - 0.927_295_218_001_612_2).abs() < 1e-15);
        assert!(statistical_distance(&p, &pd(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn kl_examples() {
        let half = pd(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&half, &half).unwrap(), 0.0);
        let v = kl_divergence(&half, &pd(&[0.25, 0.75])).unwrap();
        assert!((v - 0.143_841_036_225_890_46).abs() < 1e-15);
        let v = kl_divergence(&half, &pd(&[0.51, 0.49])).unwrap();
        assert!((v - 2.000_400_106_698_677e-4).abs() < 1e-17);
        // second-order agreement with the metric
        let ds2 = fisher_quadratic(&half, &tv(&[0.01, -0.01])).unwrap();
        assert!((v - 2.0 * ds2).abs() < 1e-7);
    }

    #[test]
    fn kl_support_rules() {
        let v = kl_divergence(&pd(&[0.0, 1.0]), &pd(&[0.5, 0.5])).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            kl_divergence(&pd(&[0.5, 0.5]), &pd(&[0.0, 1.0])),
            Err(Error::AbsoluteContinuityViolation { index: 0 })
        ));
    }

    #[test]
    fn sqrt_embed_examples() {
        assert_eq!(sqrt_embed(&pd(&[1.0, 0.0])), vec![1.0, 0.0]);
        let e = sqrt_embed(&pd(&[0.5, 0.5]));
        assert!((e[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
        let e = sqrt_embed(&pd(&[0.25, 0.75]));
        assert_eq!(e[0], 0.5);
        assert!((e[1] - 0.866_025_403_784_438_6).abs() < 1e-16);
    }

    #[test]
    fn serde_validates() {
        let p: ProbDist = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(p.probs(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<ProbDist>("[0.25,0.7]").is_err());
    }
}
