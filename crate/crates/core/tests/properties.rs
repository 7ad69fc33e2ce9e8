use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use proptest::prelude::*;

use qrecon::bayes::{CoinExperiment, Shannon};
use qrecon::distmax::{hilbert_distance, measured_distance};
use qrecon::measurement::{outcome_distribution, Measurement};
use qrecon::rng::substream;
use qrecon::simplex::{fisher_quadratic, kl_divergence, statistical_distance, ProbDist, TangentVec};
use qrecon::statespace::{
    born_probs, coarse_grain, from_complex, from_polar, state_event_probs, to_complex, to_polar,
    ComplexState, RealState,
};
use qrecon::transforms::{
    classify, from_antiunitary, from_unitary, random_orthogonal, random_unitary, AntiunitaryMap,
    OrthogonalMap,
};

fn dist(max_len: usize) -> impl Strategy<Value = ProbDist> {
    prop::collection::vec(0.01f64..1.0, 2..=max_len).prop_map(|w| ProbDist::renormalize(w).unwrap())
}

fn dist_pair(max_len: usize) -> impl Strategy<Value = (ProbDist, ProbDist)> {
    (2..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(0.01f64..1.0, n),
        )
            .prop_map(|(a, b)| (ProbDist::renormalize(a).unwrap(), ProbDist::renormalize(b).unwrap()))
    })
}

fn complex_state(n: usize, seed: u64) -> ComplexState {
    ComplexState::random(n, &mut substream(seed, 7)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn statistical_distance_is_a_bounded_symmetric_angle((p, q) in dist_pair(8)) {
        let d = statistical_distance(&p, &q).unwrap();
        prop_assert!((0.0..=FRAC_PI_2 + 1e-15).contains(&d));
        prop_assert_eq!(d, statistical_distance(&q, &p).unwrap());
        prop_assert!(statistical_distance(&p, &p).unwrap() < 1e-12);
        let bc: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a * b).sqrt()).sum();
        prop_assert!((d.cos() - bc).abs() < 1e-12);
    }

    #[test]
    fn statistical_distance_triangle(n in 2usize..6, seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let mk = |rng: &mut _| born_probs(&ComplexState::random(n, rng).unwrap());
        let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let ab = statistical_distance(&a, &b).unwrap();
        let bc = statistical_distance(&b, &c).unwrap();
        let ac = statistical_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_diagonal((p, q) in dist_pair(8)) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn fisher_quadratic_is_homogeneous((p, q) in dist_pair(6), c in -3.0f64..3.0) {
        let dp = TangentVec::between(&p, &q).unwrap();
        let base = fisher_quadratic(&p, &dp).unwrap();
        let scaled = fisher_quadratic(&p, &dp.scaled(c)).unwrap();
        prop_assert!((scaled - c * c * base).abs() <= 1e-12 * (1.0 + c * c * base));
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn coarse_graining_recovers_outcome_probabilities(n in 2usize..8, seed in any::<u64>()) {
        let q = RealState::random(n, &mut substream(seed, 0)).unwrap();
        let p = coarse_grain(&state_event_probs(&q)).unwrap();
        let born = born_probs(&to_complex(&q));
        for (a, b) in p.probs().iter().zip(born.probs()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn polar_and_complex_round_trips(n in 2usize..8, seed in any::<u64>()) {
        let q = RealState::random(n, &mut substream(seed, 0)).unwrap();
        let back = from_polar(&to_polar(&q));
        for (a, b) in back.components().iter().zip(q.components()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(from_complex(&to_complex(&q)), q);
    }

    #[test]
    fn born_probabilities_ignore_global_phase(n in 2usize..8, seed in any::<u64>(), alpha in -10.0f64..10.0) {
        let v = complex_state(n, seed);
        let meas = Measurement::new(random_unitary(n, seed ^ 1).unwrap());
        let a = outcome_distribution(&meas, &v).unwrap();
        let b = outcome_distribution(&meas, &v.with_global_phase(alpha)).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() < 1e-14);
        }
        prop_assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measured_distance_never_exceeds_hilbert_distance(n in 2usize..6, seed in any::<u64>()) {
        let u = complex_state(n, seed);
        let v = complex_state(n, seed.wrapping_add(1));
        let meas = Measurement::new(random_unitary(n, seed ^ 2).unwrap());
        let hd = hilbert_distance(&u, &v).unwrap();
        prop_assert!(measured_distance(&meas, &u, &v).unwrap() <= hd + 1e-9);
        prop_assert!((hd - hilbert_distance(&v, &u).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn typed_maps_compose_by_sign_rule(n in 1usize..5, s1 in any::<u64>(), s2 in any::<u64>()) {
        let t1 = from_unitary(&random_unitary(n, s1).unwrap()).unwrap();
        let t2 = from_antiunitary(&AntiunitaryMap::new(random_unitary(n, s2).unwrap().matrix().clone()).unwrap()).unwrap();
        prop_assert_eq!(classify(&t1.compose(&t1).unwrap()).beta(), Some(0));
        prop_assert_eq!(classify(&t1.compose(&t2).unwrap()).beta(), Some(1));
        prop_assert_eq!(classify(&t2.compose(&t1).unwrap()).beta(), Some(1));
        prop_assert_eq!(classify(&t2.compose(&t2).unwrap()).beta(), Some(0));
    }

    #[test]
    fn orthogonal_maps_preserve_distances(n in 2usize..5, seed in any::<u64>()) {
        let m = random_orthogonal(2 * n, seed).unwrap();
        let mut rng = substream(seed, 1);
        let a = RealState::random(n, &mut rng).unwrap();
        let b = RealState::random(n, &mut rng).unwrap();
        let d = a.distance(&b);
        prop_assert!((m.apply(&a).unwrap().distance(&m.apply(&b).unwrap()) - d).abs() < 1e-12);
    }

    #[test]
    fn json_round_trips(p in dist(6), seed in any::<u64>()) {
        let text = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<ProbDist>(&text).unwrap(), p);
        let m = random_orthogonal(4, seed).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        prop_assert_eq!(serde_json::from_str::<OrthogonalMap>(&text).unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn monte_carlo_is_invariant_under_relabeling((p, q) in dist_pair(5), seed in any::<u64>(), rot in 0usize..5) {
        let n = p.len();
        let perm = |d: &ProbDist| ProbDist::new((0..n).map(|i| d.probs()[(i + rot) % n]).collect()).unwrap();
        let a = CoinExperiment::new(p.clone(), q.clone(), 50).unwrap();
        let b = CoinExperiment::new(perm(&p), perm(&q), 50).unwrap();
        let ma = a.monte_carlo_gain(64, seed, &Shannon).unwrap();
        let mb = b.monte_carlo_gain(64, seed, &Shannon).unwrap();
        prop_assert_eq!(ma.mean.to_bits(), mb.mean.to_bits());
        prop_assert_eq!(a.info_gain_exact(&Shannon).unwrap(), b.info_gain_exact(&Shannon).unwrap());
    }
}

#[test]
fn amplitude_and_real_forms_agree() {
    let v = ComplexState::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
    assert_eq!(from_complex(&v).components(), &[0.6, 0.0, 0.0, 0.8]);
}
