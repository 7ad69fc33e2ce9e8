//! Maximizing statistical distance between two pure states over the choice
//! of measurement, for comparison with their Hilbert-space angle.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::measurement::{outcome_distribution, Measurement};
use crate::rng::substream;
use crate::simplex::statistical_distance;
use crate::statespace::ComplexState;
use crate::transforms::{random_unitary_with, UnitaryMap};

/// Largest dimension the optimizer accepts.
pub const MAX_DIM: usize = 8;
/// Local refinement stops once the step drops below this.
pub const MIN_STEP: f64 = 1e-8;
const INITIAL_STEP: f64 = 0.5;
const MAX_EVALS_PER_RESTART: usize = 200_000;

/// `arccos |u†v|`, evaluated as `atan2(|v - (u†v) u|, |u†v|)`.
pub fn hilbert_distance(u: &ComplexState, v: &ComplexState) -> Result<f64> {
    let c = u.inner(v)?;
    let resid: f64 = u
        .amplitudes()
        .iter()
        .zip(v.amplitudes())
        .map(|(a, b)| (b - c * a).norm_sqr())
        .sum();
    Ok(resid.sqrt().atan2(c.norm()).clamp(0.0, FRAC_PI_2))
}

/// Unitary group coordinates: one complex plane rotation per pair `i < j`
/// (angle and phase) followed by a diagonal of phases, `N²` numbers in all.
#[derive(Debug, Clone, Copy)]
pub struct UnitaryParams {
    n: usize,
}

impl UnitaryParams {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }

    fn n_pairs(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Applies the rotations then the phases to `x` in place.
    pub fn apply(&self, params: &[f64], x: &mut [Complex64]) {
        let m = self.n_pairs();
        for (k, (i, j)) in self.pairs().enumerate() {
            let (s, c) = params[k].sin_cos();
            let e = Complex64::from_polar(1.0, params[m + k]);
            let (xi, xj) = (x[i], x[j]);
            x[i] = xi * c - e.conj() * s * xj;
            x[j] = e * s * xi + xj * c;
        }
        for (i, xi) in x.iter_mut().enumerate() {
            *xi *= Complex64::from_polar(1.0, params[2 * m + i]);
        }
    }

    pub fn unitary(&self, params: &[f64]) -> UnitaryMap {
        let mut u = DMatrix::<Complex64>::zeros(self.n, self.n);
        for col in 0..self.n {
            let mut e = vec![Complex64::new(0.0, 0.0); self.n];
            e[col] = Complex64::new(1.0, 0.0);
            self.apply(params, &mut e);
            for (row, z) in e.into_iter().enumerate() {
                u[(row, col)] = z;
            }
        }
        UnitaryMap::from_matrix_unchecked(u)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.n_pairs();
        (0..self.len())
            .map(|k| {
                if k < m {
                    rng.random::<f64>() * FRAC_PI_2
                } else {
                    rng.random::<f64>() * TAU
                }
            })
            .collect()
    }

    /// Coordinates that affect outcome probabilities; the trailing phases do not.
    fn search_len(&self) -> usize {
        2 * self.n_pairs()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistinguishabilityResult {
    pub max_ds: f64,
    pub argmax_measurement: Measurement,
    pub hilbert_distance: f64,
    pub gap: f64,
    pub best_restart: usize,
    pub evaluations: usize,
}

struct Objective<'a> {
    layout: UnitaryParams,
    u: &'a [Complex64],
    v: &'a [Complex64],
}

impl Objective<'_> {
    fn eval(&self, params: &[f64], buf_u: &mut [Complex64], buf_v: &mut [Complex64]) -> f64 {
        buf_u.copy_from_slice(self.u);
        buf_v.copy_from_slice(self.v);
        self.layout.apply(params, buf_u);
        self.layout.apply(params, buf_v);
        let (mut diff, mut sum) = (0.0, 0.0);
        for (a, b) in buf_u.iter().zip(buf_v.iter()) {
            let (x, y) = (a.norm(), b.norm());
            diff += (x - y) * (x - y);
            sum += (x + y) * (x + y);
        }
        2.0 * diff.sqrt().atan2(sum.sqrt())
    }
}

struct RestartOutcome {
    value: f64,
    params: Vec<f64>,
    evaluations: usize,
}

fn run_restart(obj: &Objective<'_>, seed: u64, index: usize) -> RestartOutcome {
    let mut rng = substream(seed, index as u64);
    let mut x = obj.layout.random(&mut rng);
    let n = obj.u.len();
    let (mut bu, mut bv) = (vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]);
    let mut fx = obj.eval(&x, &mut bu, &mut bv);
    let mut evaluations = 1;
    let mut step = INITIAL_STEP;
    while step >= MIN_STEP && evaluations < MAX_EVALS_PER_RESTART {
        let mut improved = false;
        for k in 0..obj.layout.search_len() {
            for s in [step, -step] {
                let old = x[k];
                x[k] = old + s;
                let f = obj.eval(&x, &mut bu, &mut bv);
                evaluations += 1;
                if f > fx {
                    fx = f;
                    improved = true;
                    break;
                }
                x[k] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    RestartOutcome {
        value: fx,
        params: x,
        evaluations,
    }
}

fn check_pair(u: &ComplexState, v: &ComplexState) -> Result<()> {
    check_dim(u.len(), v.len())?;
    if u.len() > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dimension {} exceeds the supported maximum {MAX_DIM}",
            u.len()
        )));
    }
    Ok(())
}

/// Multi-start search over measurements for the largest statistical distance
/// between the outcome distributions of `u` and `v`.
///
/// `budget` is the number of restarts; restart `r` always uses substream `r`
/// of `seed`, so raising the budget never lowers the result.
pub fn maximize_statistical_distance(
    u: &ComplexState,
    v: &ComplexState,
    budget: usize,
    seed: u64,
) -> Result<DistinguishabilityResult> {
    check_pair(u, v)?;
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be at least 1".into()));
    }
    let obj = Objective {
        layout: UnitaryParams::new(u.len()),
        u: u.amplitudes(),
        v: v.amplitudes(),
    };
    let outcomes: Vec<RestartOutcome> = (0..budget)
        .into_par_iter()
        .map(|r| run_restart(&obj, seed, r))
        .collect();
    let mut best = 0;
    for (r, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best].value {
            best = r;
        }
    }
    let evaluations = outcomes.iter().map(|o| o.evaluations).sum();
    let winner = &outcomes[best];
    let meas = Measurement::new(obj.layout.unitary(&winner.params));
    let max_ds = winner.value.clamp(0.0, FRAC_PI_2);
    let hd = hilbert_distance(u, v)?;
    Ok(DistinguishabilityResult {
        max_ds,
        argmax_measurement: meas,
        hilbert_distance: hd,
        gap: (max_ds - hd).abs(),
        best_restart: best,
        evaluations,
    })
}

/// Statistical distance between the outcome distributions of `u` and `v`.
pub fn measured_distance(meas: &Measurement, u: &ComplexState, v: &ComplexState) -> Result<f64> {
    statistical_distance(&outcome_distribution(meas, u)?, &outcome_distribution(meas, v)?)
}

/// Largest statistical distance seen over `samples` Haar-random measurements.
pub fn certify_upper_bound(u: &ComplexState, v: &ComplexState, samples: usize, seed: u64) -> Result<f64> {
    check_dim(u.len(), v.len())?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let meas = Measurement::new(random_unitary_with(u.len(), &mut rng)?);
            measured_distance(&meas, u, v)
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::random_unitary;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn plus() -> ComplexState {
        ComplexState::new(vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap()
    }

    #[test]
    fn hilbert_distance_examples() {
        let e0 = ComplexState::basis(2, 0).unwrap();
        let e1 = ComplexState::basis(2, 1).unwrap();
        assert_eq!(hilbert_distance(&e0, &e0).unwrap(), 0.0);
        assert_eq!(hilbert_distance(&e0, &e1).unwrap(), FRAC_PI_2);
        assert!((hilbert_distance(&e0, &plus()).unwrap() - FRAC_PI_4).abs() < 1e-15);
        let mut rng = substream(50, 0);
        let u = ComplexState::random(4, &mut rng).unwrap();
        let v = ComplexState::random(4, &mut rng).unwrap();
        let d = hilbert_distance(&u, &v).unwrap();
        let rotated = hilbert_distance(&u.with_global_phase(0.7), &v.with_global_phase(-2.0)).unwrap();
        assert!((d - rotated).abs() < 1e-15);
        let w = random_unitary(4, 3).unwrap();
        let joint = hilbert_distance(&w.apply(&u).unwrap(), &w.apply(&v).unwrap()).unwrap();
        assert!((d - joint).abs() < 1e-14);
        assert!(hilbert_distance(&u, &e0).is_err());
    }

    #[test]
    fn parameterization_is_unitary_and_matches_apply() {
        let mut rng = substream(51, 0);
        for n in 2..=MAX_DIM {
            let layout = UnitaryParams::new(n);
            let params = layout.random(&mut rng);
            let u = layout.unitary(&params);
            let defect = (u.matrix().adjoint() * u.matrix() - DMatrix::<Complex64>::identity(n, n)).norm();
            assert!(defect < 1e-13);
            let v = ComplexState::random(n, &mut rng).unwrap();
            let mut x = v.amplitudes().to_vec();
            layout.apply(&params, &mut x);
            let y = u.apply(&v).unwrap();
            for (a, b) in x.iter().zip(y.amplitudes()) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn maximize_examples() {
        let e0 = ComplexState::basis(2, 0).unwrap();
        let same = maximize_statistical_distance(&e0, &e0, 4, 1).unwrap();
        assert_eq!(same.max_ds, 0.0);

        let e1 = ComplexState::basis(2, 1).unwrap();
        let orth = maximize_statistical_distance(&e0, &e1, 4, 1).unwrap();
        assert!((orth.max_ds - FRAC_PI_2).abs() < 1e-6);

        let r = maximize_statistical_distance(&e0, &plus(), 8, 1).unwrap();
        assert!(r.gap < 1e-3, "{r:?}");
        assert!((r.max_ds - FRAC_PI_4).abs() < 1e-3);
        let check = measured_distance(&r.argmax_measurement, &e0, &plus()).unwrap();
        assert!((check - r.max_ds).abs() < 1e-12);
        let lower = certify_upper_bound(&e0, &plus(), 100_000, 2).unwrap();
        assert!(lower <= r.max_ds + 1e-9);
        assert!((r.max_ds - lower).abs() < 1e-2);
    }

    #[test]
    fn budget_monotone_and_deterministic() {
        let mut rng = substream(52, 0);
        let u = ComplexState::random(3, &mut rng).unwrap();
        let v = ComplexState::random(3, &mut rng).unwrap();
        let mut last = 0.0;
        for budget in [1, 2, 4, 8] {
            let r = maximize_statistical_distance(&u, &v, budget, 9).unwrap();
            assert!(r.max_ds >= last);
            last = r.max_ds;
        }
        let a = maximize_statistical_distance(&u, &v, 4, 9).unwrap();
        let b = maximize_statistical_distance(&u, &v, 4, 9).unwrap();
        assert_eq!(a.max_ds.to_bits(), b.max_ds.to_bits());
        assert_eq!(a.argmax_measurement, b.argmax_measurement);
    }

    #[test]
    fn joint_rotation_invariance() {
        let mut rng = substream(53, 0);
        let u = ComplexState::random(3, &mut rng).unwrap();
        let v = ComplexState::random(3, &mut rng).unwrap();
        let w = random_unitary(3, 5).unwrap();
        let a = maximize_statistical_distance(&u, &v, 8, 3).unwrap();
        let b = maximize_statistical_distance(&w.apply(&u).unwrap(), &w.apply(&v).unwrap(), 8, 3).unwrap();
        assert!((a.max_ds - b.max_ds).abs() < 1e-6);
    }

    #[test]
    fn certificate_examples() {
        let mut rng = substream(54, 0);
        let u = ComplexState::random(2, &mut rng).unwrap();
        assert_eq!(certify_upper_bound(&u, &u, 100, 1).unwrap(), 0.0);
        let v = ComplexState::random(2, &mut rng).unwrap();
        let bound = certify_upper_bound(&u, &v, 10_000, 1).unwrap();
        let hd = hilbert_distance(&u, &v).unwrap();
        assert!(bound <= FRAC_PI_2);
        assert!(bound <= hd + 1e-9);
        assert!(hd - bound < 0.05);
        assert!(certify_upper_bound(&u, &v, 0, 1).is_err());
    }

    #[test]
    fn rejects_large_dimension_and_zero_budget() {
        let u = ComplexState::basis(9, 0).unwrap();
        assert!(maximize_statistical_distance(&u, &u, 1, 0).is_err());
        let u = ComplexState::basis(2, 0).unwrap();
        assert!(maximize_statistical_distance(&u, &u, 0, 0).is_err());
    }
}
