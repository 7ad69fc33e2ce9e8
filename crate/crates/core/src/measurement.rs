//! Measurements simulated through the standard-basis reference measurement.
//!
//! A measurement is the arrangement `U → A → V`: a pre-interaction `U`, the
//! reference measurement `A` in the standard basis, and a post-interaction
//! `V`. With `V = U⁻¹` the arrangement is reproducible and measures in the
//! basis `v'_i = U† e_i`. Outcomes are indexed from 0.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{multinomial, substream};
use crate::simplex::ProbDist;
use crate::statespace::{born_probs, ComplexState};
use crate::transforms::UnitaryMap;

/// Below this a forced outcome is treated as impossible.
pub const IMPOSSIBLE_PROB: f64 = 1e-14;
/// Tolerance for the repeat-measurement check.
pub const REPRODUCIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeasurementRepr {
    u: UnitaryMap,
    phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasurementRepr", into = "MeasurementRepr")]
pub struct Measurement {
    u: UnitaryMap,
    phases: Vec<f64>,
}

impl TryFrom<MeasurementRepr> for Measurement {
    type Error = Error;

    fn try_from(r: MeasurementRepr) -> Result<Self> {
        Self::with_phases(r.u, r.phases)
    }
}

impl From<Measurement> for MeasurementRepr {
    fn from(m: Measurement) -> Self {
        Self {
            u: m.u,
            phases: m.phases,
        }
    }
}

impl Measurement {
    /// Measurement with pre-interaction `u` and all post-measurement phases 0.
    pub fn new(u: UnitaryMap) -> Self {
        let n = u.dim();
        Self {
            u,
            phases: vec![0.0; n],
        }
    }

    pub fn with_phases(u: UnitaryMap, phases: Vec<f64>) -> Result<Self> {
        check_dim(u.dim(), phases.len())?;
        if phases.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("phases must be finite".into()));
        }
        Ok(Self { u, phases })
    }

    /// The reference measurement in the standard basis.
    pub fn standard(n: usize) -> Result<Self> {
        Ok(Self::new(UnitaryMap::identity(n)?))
    }

    pub fn u(&self) -> &UnitaryMap {
        &self.u
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// `v'_k = U† e_k`.
    pub fn basis_vector(&self, k: usize) -> Result<ComplexState> {
        self.check_outcome(k)?;
        let u = self.u.matrix();
        let v = (0..self.dim()).map(|i| u[(k, i)].conj()).collect();
        Ok(ComplexState::from_vec_unchecked(v))
    }

    /// `e^{iφ_k} v'_k`, the state left behind by outcome `k`.
    pub fn output_state(&self, k: usize) -> Result<ComplexState> {
        Ok(self.basis_vector(k)?.with_global_phase(self.phases[k]))
    }

    fn check_outcome(&self, k: usize) -> Result<()> {
        if k >= self.dim() {
            return Err(Error::OutcomeOutOfRange {
                outcome: k,
                dim: self.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub outcome: usize,
    pub probability: f64,
    pub output_state: ComplexState,
}

/// Born probabilities `p_i = |v'_i† v|² = |(U v)_i|²`.
pub fn outcome_distribution(meas: &Measurement, v: &ComplexState) -> Result<ProbDist> {
    Ok(born_probs(&meas.u.apply(v)?))
}

/// Performs the measurement on `v`. With `forced = Some(k)` the outcome is
/// `k`; otherwise it is drawn from `rng`.
pub fn apply_measurement<R: Rng + ?Sized>(
    meas: &Measurement,
    v: &ComplexState,
    forced: Option<usize>,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let dist = outcome_distribution(meas, v)?;
    let outcome = match forced {
        Some(k) => {
            meas.check_outcome(k)?;
            let p = dist.probs()[k];
            if p < IMPOSSIBLE_PROB {
                return Err(Error::ImpossibleOutcome {
                    outcome: k,
                    probability: p,
                });
            }
            k
        }
        None => draw(dist.probs(), rng),
    };
    Ok(MeasurementRecord {
        outcome,
        probability: dist.probs()[outcome],
        output_state: meas.output_state(outcome)?,
    })
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let x = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if x < acc {
                return i;
            }
        }
    }
    last
}

/// Outcome counts over `shots` independent measurements of `v`.
pub fn sample_outcomes(meas: &Measurement, v: &ComplexState, shots: u64, seed: u64) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let dist = outcome_distribution(meas, v)?;
    Ok(multinomial(&mut substream(seed, 0), shots, dist.probs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundtripCheck {
    pub pass: bool,
    /// Largest `1 - P(k | output of k)` over outcomes.
    pub max_deviation: f64,
    /// First outcome whose repetition is not certain.
    pub witness: Option<usize>,
}

/// Repeats the arrangement `U → A → V` on its own output: outcome `k` leaves
/// `e^{iφ_k} V e_k`, which is fed back through `U` and `A`.
pub fn simulability_with_post(meas: &Measurement, post: &UnitaryMap) -> Result<RoundtripCheck> {
    check_dim(meas.dim(), post.dim())?;
    let n = meas.dim();
    let mut max_deviation = 0.0f64;
    let mut witness = None;
    for k in 0..n {
        let out = post
            .apply(&ComplexState::basis(n, k)?)?
            .with_global_phase(meas.phases[k]);
        let p = outcome_distribution(meas, &out)?.probs()[k];
        let dev = (1.0 - p).abs();
        if dev > REPRODUCIBILITY_TOL && witness.is_none() {
            witness = Some(k);
        }
        max_deviation = max_deviation.max(dev);
    }
    Ok(RoundtripCheck {
        pass: witness.is_none(),
        max_deviation,
        witness,
    })
}

/// The arrangement with `V = U⁻¹`.
pub fn simulability_roundtrip(meas: &Measurement) -> Result<RoundtripCheck> {
    simulability_with_post(meas, &meas.u.adjoint())
}

/// `U†` followed by an extra unitary `g`, i.e. `V = U† g`; reproducibility
/// fails unless `g` is diagonal up to phases.
pub fn perturbed_post(meas: &Measurement, g: &UnitaryMap) -> Result<UnitaryMap> {
    meas.u.adjoint().compose(g)
}

/// Writes `outcome,count,frequency` rows.
pub fn write_counts_csv<W: Write>(out: W, counts: &[u64]) -> Result<()> {
    let total: u64 = counts.iter().sum();
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv write failed: {e}"));
    w.write_record(["outcome", "count", "frequency"]).map_err(io)?;
    for (k, &c) in counts.iter().enumerate() {
        let freq = if total == 0 { 0.0 } else { c as f64 / total as f64 };
        w.write_record([k.to_string(), c.to_string(), format!("{freq:.16e}")])
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParameter(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Unitary with rows `v'_k†` for an arbitrary orthonormal basis `{v'_k}`.
pub fn measurement_for_basis(basis: &[ComplexState]) -> Result<Measurement> {
    let n = basis.len();
    let mut u = DMatrix::<Complex64>::zeros(n, n);
    for (k, b) in basis.iter().enumerate() {
        check_dim(n, b.len())?;
        for (i, z) in b.amplitudes().iter().enumerate() {
            u[(k, i)] = z.conj();
        }
    }
    Ok(Measurement::new(UnitaryMap::new(u)?))
}
