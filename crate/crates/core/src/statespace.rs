//! The 2N-event state space.
//!
//! Each of the N observed outcomes coarse-grains a pair of unobserved events.
//! A state is a unit vector `Q` in R^{2N} with event probabilities
//! `P_q = Q_q²`; in polar form each pair `(Q_{2i-1}, Q_{2i})` is
//! `√p_i (cos θ_i, sin θ_i)`, and packing the pairs as complex numbers gives
//! the amplitude vector `v_i = Q_{2i-1} + i Q_{2i}`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::standard_normal;
use crate::simplex::{ProbDist, TangentVec, NORM_TOL};

/// Reduces an angle to `[0, 2π)`.
pub fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Probabilities `P_1 … P_2N` of the underlying events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventDist(ProbDist);

impl EventDist {
    pub fn new(event_probs: Vec<f64>) -> Result<Self> {
        ProbDist::new(event_probs).map(Self)
    }

    pub fn probs(&self) -> &[f64] {
        self.0.probs()
    }

    pub fn as_dist(&self) -> &ProbDist {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A point on the unit hypersphere S^{2N-1}, `N >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealState {
    q: Vec<f64>,
}

impl RealState {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.len() < 4 || !q.len().is_multiple_of(2) {
            return Err(Error::InvalidState(format!(
                "real state needs an even number of at least 4 components, got {}",
                q.len()
            )));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidState("non-finite component".into()));
        }
        let norm2: f64 = q.iter().map(|x| x * x).sum();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm is {norm2:.17}, expected 1"
            )));
        }
        Ok(Self { q })
    }

    /// Scales a nonzero vector onto the sphere.
    pub fn normalized(q: Vec<f64>) -> Result<Self> {
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState(format!("cannot normalize, norm {norm}")));
        }
        Self::new(q.into_iter().map(|x| x / norm).collect())
    }

    /// Uniformly distributed state with `n_outcomes` outcomes.
    pub fn random<R: Rng + ?Sized>(n_outcomes: usize, rng: &mut R) -> Result<Self> {
        Self::normalized((0..2 * n_outcomes).map(|_| standard_normal(rng)).collect())
    }

    pub(crate) fn from_vec_unchecked(q: Vec<f64>) -> Self {
        Self { q }
    }

    pub fn components(&self) -> &[f64] {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.q.len() / 2
    }

    pub fn distance(&self, other: &RealState) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<f64>> for RealState {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RealState> for Vec<f64> {
    fn from(s: RealState) -> Self {
        s.q
    }
}

/// Outcome probabilities with one phase angle per outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub p: ProbDist,
    pub theta: Vec<f64>,
}

impl PolarState {
    /// Angles are reduced to `[0, 2π)`.
    pub fn new(p: ProbDist, theta: Vec<f64>) -> Result<Self> {
        check_dim(p.len(), theta.len())?;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidState("non-finite phase angle".into()));
        }
        let theta = theta.into_iter().map(reduce_angle).collect();
        Ok(Self { p, theta })
    }
}

/// The affine law `θ = a·χ + b` relating phase angles to the gauge variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeConvention {
    a: f64,
    b: f64,
}

impl Default for GaugeConvention {
    fn default() -> Self {
        Self { a: 1.0, b: 0.0 }
    }
}

impl GaugeConvention {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::ZeroGaugeSlope(a));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn theta(&self, chi: f64) -> f64 {
        self.a * chi + self.b
    }

    pub fn chi(&self, theta: f64) -> f64 {
        (theta - self.b) / self.a
    }

    /// Induced measure over one gauge variable, `c·|θ'(χ)|`, with `c` fixed so
    /// the density integrates to one over `χ ∈ [0, 2π)`.
    pub fn measure_density(&self, _chi: f64) -> f64 {
        let c = 1.0 / (TAU * self.a.abs());
        c * self.a.abs()
    }
}

/// N complex amplitudes of unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct ComplexState {
    v: Vec<Complex64>,
}

impl ComplexState {
    pub fn new(v: Vec<Complex64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::InvalidState(format!(
                "complex state needs at least 2 amplitudes, got {}",
                v.len()
            )));
        }
        if v.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm is {norm2:.17}, expected 1"
            )));
        }
        Ok(Self { v })
    }

    pub fn normalized(v: Vec<Complex64>) -> Result<Self> {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState(format!("cannot normalize, norm {norm}")));
        }
        Self::new(v.into_iter().map(|z| z / norm).collect())
    }

    /// Unitarily invariant random state.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::normalized(
            (0..n)
                .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
                .collect(),
        )
    }

    /// The basis vector `e_k`.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::OutcomeOutOfRange { outcome: k, dim: n });
        }
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[k] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    pub(crate) fn from_vec_unchecked(v: Vec<Complex64>) -> Self {
        Self { v }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// `⟨self, other⟩ = Σ conj(self_i)·other_i`.
    pub fn inner(&self, other: &ComplexState) -> Result<Complex64> {
        check_dim(self.len(), other.len())?;
        Ok(self
            .v
            .iter()
            .zip(&other.v)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn with_global_phase(&self, alpha: f64) -> Self {
        let w = Complex64::from_polar(1.0, alpha);
        Self {
            v: self.v.iter().map(|z| w * z).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            v: self.v.iter().map(|z| z.conj()).collect(),
        }
    }
}

impl TryFrom<Vec<[f64; 2]>> for ComplexState {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<ComplexState> for Vec<[f64; 2]> {
    fn from(s: ComplexState) -> Self {
        s.v.into_iter().map(|z| [z.re, z.im]).collect()
    }
}

/// Outcome probabilities from event probabilities, `p_i = P_{2i-1} + P_{2i}`.
pub fn coarse_grain(events: &EventDist) -> Result<ProbDist> {
    let probs = events.probs();
    if !probs.len().is_multiple_of(2) {
        return Err(Error::OddDimension(probs.len()));
    }
    if probs.len() < 4 {
        return Err(Error::InvalidDistribution(
            "coarse graining needs at least 4 events".into(),
        ));
    }
    Ok(ProbDist::from_vec_unchecked(
        probs.chunks_exact(2).map(|c| c[0] + c[1]).collect(),
    ))
}

/// `P_q = Q_q²`.
pub fn state_event_probs(q: &RealState) -> EventDist {
    EventDist(ProbDist::from_vec_unchecked(
        q.q.iter().map(|x| x * x).collect(),
    ))
}

pub fn from_polar(ps: &PolarState) -> RealState {
    let mut q = Vec::with_capacity(2 * ps.p.len());
    for (&p, &t) in ps.p.probs().iter().zip(&ps.theta) {
        let r = p.sqrt();
        q.push(r * t.cos());
        q.push(r * t.sin());
    }
    RealState::from_vec_unchecked(q)
}

/// Inverse of [`from_polar`]; the angle of an outcome with `p_i = 0` is set to 0.
pub fn to_polar(q: &RealState) -> PolarState {
    let (mut p, mut theta) = (Vec::new(), Vec::new());
    for pair in q.q.chunks_exact(2) {
        let (x, y) = (pair[0], pair[1]);
        let pi = x * x + y * y;
        p.push(pi);
        theta.push(if pi == 0.0 { 0.0 } else { reduce_angle(y.atan2(x)) });
    }
    PolarState {
        p: ProbDist::from_vec_unchecked(p),
        theta,
    }
}

pub fn to_complex(q: &RealState) -> ComplexState {
    ComplexState::from_vec_unchecked(
        q.q.chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect(),
    )
}

pub fn from_complex(v: &ComplexState) -> RealState {
    RealState::from_vec_unchecked(v.v.iter().flat_map(|z| [z.re, z.im]).collect())
}

/// Born probabilities `p_i = |v_i|²`.
pub fn born_probs(v: &ComplexState) -> ProbDist {
    ProbDist::from_vec_unchecked(v.v.iter().map(|z| z.norm_sqr()).collect())
}

/// Adds `chi0` to every gauge variable, i.e. `θ_i → θ_i + a·χ_0 (mod 2π)`.
pub fn gauge_shift(ps: &PolarState, chi0: f64, g: &GaugeConvention) -> PolarState {
    let shift = g.a * chi0;
    PolarState {
        p: ps.p.clone(),
        theta: ps.theta.iter().map(|t| reduce_angle(t + shift)).collect(),
    }
}

/// Tangent map of [`from_polar`]: the displacement `dQ` produced by `dp` and
/// phase displacements `dtheta`.
pub fn push_forward(ps: &PolarState, dp: &TangentVec, dtheta: &[f64]) -> Result<Vec<f64>> {
    check_dim(ps.p.len(), dp.len())?;
    check_dim(ps.p.len(), dtheta.len())?;
    let mut dq = Vec::with_capacity(2 * ps.p.len());
    for (i, ((&p, &t), (&d, &dt))) in ps
        .p
        .probs()
        .iter()
        .zip(&ps.theta)
        .zip(dp.deltas().iter().zip(dtheta))
        .enumerate()
    {
        if p == 0.0 {
            if d != 0.0 {
                return Err(Error::SingularMetric { index: i, delta: d });
            }
            dq.extend([0.0, 0.0]);
            continue;
        }
        let r = p.sqrt();
        let radial = d / (2.0 * r);
        let (s, c) = t.sin_cos();
        dq.push(radial * c - r * s * dt);
        dq.push(radial * s + r * c * dt);
    }
    Ok(dq)
}

/// Metric in polar coordinates,
/// `ds² = ¼ Σ dp_i²/p_i + Σ p_i (dθ_i + θ'·dχ_i)²` with `θ' = a`.
///
/// `dtheta` is a direct displacement of the phase angles and `dchi` a
/// displacement of the gauge variables; both move θ and they add.
pub fn polar_metric_quadratic(
    ps: &PolarState,
    dp: &TangentVec,
    dtheta: &[f64],
    g: &GaugeConvention,
    dchi: &[f64],
) -> Result<f64> {
    let n = ps.p.len();
    check_dim(n, dp.len())?;
    check_dim(n, dtheta.len())?;
    check_dim(n, dchi.len())?;
    let mut acc = 0.0;
    for (i, &p) in ps.p.probs().iter().enumerate() {
        let d = dp.deltas()[i];
        if p == 0.0 {
            if d != 0.0 {
                return Err(Error::SingularMetric { index: i, delta: d });
            }
            continue;
        }
        let dt = dtheta[i] + g.a * dchi[i];
        acc += 0.25 * d * d / p + p * dt * dt;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureCheck {
    pub pass: bool,
    /// `max|θ'| - min|θ'|` over the grid.
    pub deviation: f64,
    pub mean: f64,
    pub tolerance: f64,
}

/// Tests whether the induced measure `c·|θ'(χ)|` is constant on a grid of
/// derivative samples: passes iff `max|θ'| - min|θ'| <= tolerance·mean|θ'|`.
pub fn measure_invariance_check(theta_prime: &[f64], tolerance: f64) -> Result<MeasureCheck> {
    if theta_prime.len() < 2 {
        return Err(Error::EmptyGrid(theta_prime.len()));
    }
    let abs: Vec<f64> = theta_prime.iter().map(|x| x.abs()).collect();
    let max = abs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = abs.iter().sum::<f64>() / abs.len() as f64;
    let deviation = max - min;
    Ok(MeasureCheck {
        pass: deviation <= tolerance * mean,
        deviation,
        mean,
        tolerance,
    })
}

/// Central-difference samples of `θ'` on `points` evenly spaced grid points
/// spanning `[lo, hi]`.
pub fn derivative_samples<F: Fn(f64) -> f64>(theta: F, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let h = 1e-5;
    (0..points)
        .map(|k| {
            let x = if points == 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (points - 1) as f64
            };
            (theta(x + h) - theta(x - h)) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn pd(v: &[f64]) -> ProbDist {
        ProbDist::new(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn coarse_grain_examples() {
        let p = coarse_grain(&EventDist::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap()).unwrap();
        assert!(close(p.probs(), &[0.3, 0.7], 1e-15));
        let p = coarse_grain(&EventDist::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(p.probs(), &[1.0, 0.0]);
        let p = coarse_grain(&EventDist::new(vec![1.0 / 6.0; 6]).unwrap()).unwrap();
        assert!(close(p.probs(), &[1.0 / 3.0; 3], 1e-15));
        let odd = EventDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(coarse_grain(&odd), Err(Error::OddDimension(3)));
    }

    #[test]
    fn event_probs_examples() {
        let q = RealState::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(state_event_probs(&q).probs(), &[1.0, 0.0, 0.0, 0.0]);
        let q = RealState::new(vec![FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).unwrap();
        assert!(close(state_event_probs(&q).probs(), &[0.5, 0.0, 0.0, 0.5], 1e-15));
        let neg = RealState::new(vec![-FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).unwrap();
        assert_eq!(state_event_probs(&q), state_event_probs(&neg));
    }

    #[test]
    fn polar_examples() {
        let s = from_polar(&PolarState::new(pd(&[1.0, 0.0]), vec![0.0, 0.0]).unwrap());
        assert_eq!(s.components(), &[1.0, 0.0, 0.0, 0.0]);
        let s = from_polar(&PolarState::new(pd(&[0.5, 0.5]), vec![0.0, FRAC_PI_2]).unwrap());
        assert!(close(s.components(), &[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2], 1e-15));
        let s = from_polar(&PolarState::new(pd(&[0.5, 0.5]), vec![PI, PI]).unwrap());
        assert!(close(s.components(), &[-FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2, 0.0], 1e-15));

        let ps = to_polar(&RealState::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap());
        assert_eq!((ps.p.probs(), ps.theta.as_slice()), (&[1.0, 0.0][..], &[0.0, 0.0][..]));
        let ps = to_polar(&RealState::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap());
        assert_eq!(ps.p.probs(), &[1.0, 0.0]);
        assert_eq!(ps.theta, vec![FRAC_PI_2, 0.0]);
    }

    #[test]
    fn polar_round_trip_on_interior_states() {
        let mut rng = substream(5, 0);
        for _ in 0..200 {
            let q = RealState::random(4, &mut rng).unwrap();
            let back = from_polar(&to_polar(&q));
            assert!(close(back.components(), q.components(), 1e-12));
        }
    }

    #[test]
    fn complex_examples() {
        let q = RealState::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(to_complex(&q).amplitudes(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let q = RealState::new(vec![FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).unwrap();
        let v = to_complex(&q);
        assert_eq!(v.amplitudes()[1], Complex64::new(0.0, FRAC_1_SQRT_2));
        assert_eq!(from_complex(&v), q);
    }

    #[test]
    fn born_examples() {
        let v = ComplexState::basis(2, 0).unwrap();
        assert_eq!(born_probs(&v).probs(), &[1.0, 0.0]);
        let v = ComplexState::new(vec![
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(0.0, FRAC_1_SQRT_2),
        ])
        .unwrap();
        assert!(close(born_probs(&v).probs(), &[0.5, 0.5], 1e-15));
        let mut rng = substream(6, 0);
        let v = ComplexState::random(3, &mut rng).unwrap();
        let w = v.with_global_phase(1.234);
        assert!(close(born_probs(&v).probs(), born_probs(&w).probs(), 1e-15));
        let via_events = coarse_grain(&state_event_probs(&from_complex(&v))).unwrap();
        assert!(close(born_probs(&v).probs(), via_events.probs(), 1e-15));
    }

    #[test]
    fn gauge_shift_examples() {
        let g = GaugeConvention::default();
        let ps = PolarState::new(pd(&[0.3, 0.7]), vec![0.4, 2.0]).unwrap();
        assert_eq!(gauge_shift(&ps, 0.0, &g), ps);
        let shifted = gauge_shift(&ps, PI, &g);
        assert_eq!(shifted.p, ps.p);
        assert!(close(&shifted.theta, &[0.4 + PI, reduce_angle(2.0 + PI)], 1e-15));

        let g = GaugeConvention::new(-2.5, 0.3).unwrap();
        let chi0 = 0.77;
        let v = to_complex(&from_polar(&ps));
        let w = to_complex(&from_polar(&gauge_shift(&ps, chi0, &g)));
        let expected = v.with_global_phase(g.a() * chi0);
        for (a, b) in w.amplitudes().iter().zip(expected.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(GaugeConvention::new(0.0, 1.0).is_err());
    }

    #[test]
    fn polar_metric_examples() {
        let g = GaugeConvention::default();
        let ps = PolarState::new(pd(&[0.5, 0.5]), vec![0.1, 0.2]).unwrap();
        let zero = polar_metric_quadratic(&ps, &TangentVec::zeros(2), &[0.0; 2], &g, &[0.0; 2]);
        assert_eq!(zero.unwrap(), 0.0);
        let delta = 1e-3;
        let v = polar_metric_quadratic(&ps, &TangentVec::zeros(2), &[0.0; 2], &g, &[delta, 0.0])
            .unwrap();
        assert!((v - 0.5 * delta * delta).abs() < 1e-20);
        let edge = PolarState::new(pd(&[0.0, 1.0]), vec![0.0, 0.0]).unwrap();
        let dp = TangentVec::new(vec![0.1, -0.1]).unwrap();
        assert!(matches!(
            polar_metric_quadratic(&edge, &dp, &[0.0; 2], &g, &[0.0; 2]),
            Err(Error::SingularMetric { index: 0, .. })
        ));
    }

    #[test]
    fn polar_metric_matches_finite_difference() {
        let mut rng = substream(11, 0);
        let g = GaugeConvention::new(1.7, -0.4).unwrap();
        for _ in 0..100 {
            let q = RealState::random(3, &mut rng).unwrap();
            let ps = to_polar(&q);
            let raw: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
            let mean = raw.iter().sum::<f64>() / 3.0;
            let dp = TangentVec::new(raw.iter().map(|x| (x - mean) * 1e-6).collect()).unwrap();
            let dchi: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng) * 1e-6).collect();
            let metric = polar_metric_quadratic(&ps, &dp, &[0.0; 3], &g, &dchi).unwrap();

            // central difference of the embedding along the perturbation;
            // truncation and cancellation in a - b limit agreement to roughly 1e-8
            let at = |s: f64| {
                let p: Vec<f64> = ps.p.probs().iter().zip(dp.deltas()).map(|(p, d)| p + s * d).collect();
                let th: Vec<f64> = ps.theta.iter().zip(&dchi).map(|(t, c)| t + s * g.a() * c).collect();
                p.iter()
                    .zip(&th)
                    .flat_map(|(p, t)| [p.sqrt() * t.cos(), p.sqrt() * t.sin()])
                    .collect::<Vec<f64>>()
            };
            let (plus, minus) = (at(0.5), at(-0.5));
            let fd: f64 = plus.iter().zip(&minus).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((metric - fd).abs() <= 1e-6 * metric, "{metric} vs {fd}");

            let dq = push_forward(&ps, &dp, &dchi.iter().map(|c| g.a() * c).collect::<Vec<_>>()).unwrap();
            let euclid: f64 = dq.iter().map(|x| x * x).sum();
            assert!((metric - euclid).abs() <= 1e-10 * metric);
        }
    }

    #[test]
    fn measure_invariance_examples() {
        let lin = derivative_samples(|x| x, 0.0, TAU, 64);
        assert!(measure_invariance_check(&lin, 1e-6).unwrap().pass);
        let aff = derivative_samples(|x| 3.0 * x + 2.0, -5.0, 5.0, 64);
        assert!(measure_invariance_check(&aff, 1e-6).unwrap().pass);
        let quad = derivative_samples(|x| x * x, 0.0, 1.0, 101);
        let r = measure_invariance_check(&quad, 1e-6).unwrap();
        assert!(!r.pass);
        assert!((r.deviation - 2.0).abs() < 1e-6);
        assert_eq!(measure_invariance_check(&[1.0], 1e-6), Err(Error::EmptyGrid(1)));
    }

    #[test]
    fn measure_density_is_normalized() {
        for a in [1.0, -0.5, 4.0] {
            let g = GaugeConvention::new(a, 0.2).unwrap();
            let steps = 1000;
            let h = TAU / steps as f64;
            let integral: f64 = (0..steps).map(|k| g.measure_density(k as f64 * h) * h).sum();
            assert!((integral - 1.0).abs() < 1e-12);
        }
    }
}
