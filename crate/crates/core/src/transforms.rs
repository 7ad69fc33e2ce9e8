//! Orthogonal maps of the state sphere and their complex counterparts.
//!
//! A 2N×2N orthogonal matrix acts on real states `Q`. Pairing coordinates as
//! `v_i = Q_{2i-1} + i Q_{2i}` fixes a complex structure `J`; maps that
//! commute with `J` have 2×2 blocks of scale-rotation form and act on `v` as a
//! unitary matrix, maps that anticommute with `J` have scale-rotation-
//! reflection blocks and act as a unitary composed with complex conjugation.
//! Everything else is neither, and fails to respect the global gauge freedom
//! of the phases.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{standard_normal, substream};
use crate::statespace::{
    coarse_grain, from_polar, gauge_shift, reduce_angle, state_event_probs, to_polar,
    ComplexState, GaugeConvention, RealState,
};

/// Tolerance for structural identities (orthogonality, commutation).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Tolerance for exact algebraic round trips.
pub const ROUNDTRIP_TOL: f64 = 1e-12;

pub const PROBE_STATES: usize = 32;
pub const PROBE_SHIFTS: usize = 16;

fn identity_defect(gram: &DMatrix<f64>) -> f64 {
    (gram - DMatrix::<f64>::identity(gram.nrows(), gram.ncols())).norm()
}

fn complex_identity_defect(gram: &DMatrix<Complex64>) -> f64 {
    (gram - DMatrix::<Complex64>::identity(gram.nrows(), gram.ncols())).norm()
}

/// The complex structure on R^{2N}: block diagonal with `[[0, -1], [1, 0]]`.
#[derive(Debug, Clone, Copy)]
pub struct ComplexStructure;

impl ComplexStructure {
    pub fn matrix(n_outcomes: usize) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2 * n_outcomes, 2 * n_outcomes);
        for i in 0..n_outcomes {
            j[(2 * i, 2 * i + 1)] = -1.0;
            j[(2 * i + 1, 2 * i)] = 1.0;
        }
        j
    }
}

/// Row-major matrix with a dimension header, as written to reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixRecord {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
        }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: self.data.len(),
            });
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Row-major complex matrix; entries are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&DMatrix<Complex64>> for ComplexMatrixRecord {
    fn from(m: &DMatrix<Complex64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl ComplexMatrixRecord {
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: self.data.len(),
            });
        }
        let entries: Vec<Complex64> = self.data.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &entries))
    }
}

/// A 2N×2N real orthogonal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct OrthogonalMap {
    m: DMatrix<f64>,
}

impl OrthogonalMap {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() < 2 || !m.nrows().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "orthogonal map must be square with even dimension, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let defect = identity_defect(&(m.transpose() * &m));
        if defect.is_nan() || defect > STRUCTURAL_TOL {
            return Err(Error::NotOrthogonal(defect));
        }
        Ok(Self { m })
    }

    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        check_dim(dim * dim, data.len())?;
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    /// Givens rotation by `angle` in the `(i, j)` coordinate plane.
    pub fn givens(dim: usize, i: usize, j: usize, angle: f64) -> Result<Self> {
        if i >= dim || j >= dim || i == j {
            return Err(Error::InvalidParameter(format!(
                "invalid rotation plane ({i}, {j}) in dimension {dim}"
            )));
        }
        let mut m = DMatrix::identity(dim, dim);
        let (s, c) = angle.sin_cos();
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(i, j)] = -s;
        m[(j, i)] = s;
        Self::new(m)
    }

    /// `diag(1, -1, 1, -1, …)`: complex conjugation of the paired amplitudes.
    pub fn conjugation(n_outcomes: usize) -> Result<Self> {
        let diag: Vec<f64> = (0..2 * n_outcomes)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_outcomes(&self) -> usize {
        self.m.nrows() / 2
    }

    /// `self · other`.
    pub fn compose(&self, other: &OrthogonalMap) -> Result<OrthogonalMap> {
        check_dim(self.dim(), other.dim())?;
        Self::new(&self.m * &other.m)
    }

    pub fn inverse(&self) -> OrthogonalMap {
        Self {
            m: self.m.transpose(),
        }
    }

    pub fn apply(&self, q: &RealState) -> Result<RealState> {
        check_dim(self.dim(), q.dim())?;
        let out = &self.m * nalgebra::DVector::from_column_slice(q.components());
        Ok(RealState::from_vec_unchecked(out.iter().copied().collect()))
    }

    /// Frobenius norms of `MJ - JM` and `MJ + JM`.
    pub fn commutation_defects(&self) -> (f64, f64) {
        let j = ComplexStructure::matrix(self.n_outcomes());
        let mj = &self.m * &j;
        let jm = &j * &self.m;
        ((&mj - &jm).norm(), (&mj + &jm).norm())
    }
}

impl TryFrom<MatrixRecord> for OrthogonalMap {
    type Error = Error;

    fn try_from(r: MatrixRecord) -> Result<Self> {
        Self::new(r.to_matrix()?)
    }
}

impl From<OrthogonalMap> for MatrixRecord {
    fn from(m: OrthogonalMap) -> Self {
        MatrixRecord::from(&m.m)
    }
}

/// Scale `α_ij >= 0` and angle `φ_ij ∈ [0, 2π)` of every 2×2 block, row-major
/// over block indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockParams {
    pub n: usize,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
}

impl BlockParams {
    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        self.alpha[i * self.n + j]
    }

    pub fn phi(&self, i: usize, j: usize) -> f64 {
        self.phi[i * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransformType {
    /// Blocks `α R(φ)`; commutes with `J`.
    Type1(BlockParams),
    /// Blocks `α R(φ) diag(1, -1)`; anticommutes with `J`.
    Type2(BlockParams),
    Neither { commutator: f64, anticommutator: f64 },
}

impl TransformType {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Type1(_) => "type1",
            Self::Type2(_) => "type2",
            Self::Neither { .. } => "neither",
        }
    }

    /// The global reflection flag β.
    pub fn beta(&self) -> Option<u8> {
        match self {
            Self::Type1(_) => Some(0),
            Self::Type2(_) => Some(1),
            Self::Neither { .. } => None,
        }
    }
}

/// Extracts `(a, b) = α (cos φ, sin φ)` from each block. For `beta = 0` the
/// block is `[[a, -b], [b, a]]`, for `beta = 1` it is `[[a, b], [b, -a]]`.
fn block_components(m: &DMatrix<f64>, beta: u8) -> Vec<Complex64> {
    let n = m.nrows() / 2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (r, c) = (2 * i, 2 * j);
            let (m00, m01, m10, m11) = (m[(r, c)], m[(r, c + 1)], m[(r + 1, c)], m[(r + 1, c + 1)]);
            let z = if beta == 0 {
                Complex64::new(0.5 * (m00 + m11), 0.5 * (m10 - m01))
            } else {
                Complex64::new(0.5 * (m00 - m11), 0.5 * (m10 + m01))
            };
            out.push(z);
        }
    }
    out
}

fn block_params(m: &DMatrix<f64>, beta: u8) -> BlockParams {
    let comps = block_components(m, beta);
    let alpha = comps.iter().map(|z| z.norm()).collect();
    let phi = comps
        .iter()
        .map(|z| if z.norm() == 0.0 { 0.0 } else { reduce_angle(z.arg()) })
        .collect();
    BlockParams {
        n: m.nrows() / 2,
        alpha,
        phi,
    }
}

/// Builds the block matrix with blocks `α_ij R(φ_ij) diag(1,-1)^β_ij`.
///
/// No orthogonality check is made; a per-block `beta` is accepted so that
/// mixed constructions can be examined.
pub fn block_form(n: usize, alpha: &[f64], phi: &[f64], beta: &[u8]) -> Result<DMatrix<f64>> {
    check_dim(n * n, alpha.len())?;
    check_dim(n * n, phi.len())?;
    check_dim(n * n, beta.len())?;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let (s, c) = phi[k].sin_cos();
            let (a, b) = (alpha[k] * c, alpha[k] * s);
            let (r, col) = (2 * i, 2 * j);
            if beta[k] == 0 {
                m[(r, col)] = a;
                m[(r, col + 1)] = -b;
                m[(r + 1, col)] = b;
                m[(r + 1, col + 1)] = a;
            } else {
                m[(r, col)] = a;
                m[(r, col + 1)] = b;
                m[(r + 1, col)] = b;
                m[(r + 1, col + 1)] = -a;
            }
        }
    }
    Ok(m)
}

/// Classifies an orthogonal map by (anti)commutation with `J`, then reads the
/// block parameters.
pub fn classify(m: &OrthogonalMap) -> TransformType {
    let (commutator, anticommutator) = m.commutation_defects();
    if commutator <= STRUCTURAL_TOL {
        TransformType::Type1(block_params(&m.m, 0))
    } else if anticommutator <= STRUCTURAL_TOL {
        TransformType::Type2(block_params(&m.m, 1))
    } else {
        TransformType::Neither {
            commutator,
            anticommutator,
        }
    }
}

/// Validates orthogonality, then classifies.
pub fn classify_matrix(m: DMatrix<f64>) -> Result<TransformType> {
    Ok(classify(&OrthogonalMap::new(m)?))
}

fn validate_unitary(u: &DMatrix<Complex64>) -> Result<()> {
    if !u.is_square() || u.nrows() < 1 {
        return Err(Error::InvalidParameter(format!(
            "unitary must be square, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let defect = complex_identity_defect(&(u.adjoint() * u));
    if defect.is_nan() || defect > STRUCTURAL_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(())
}

fn apply_complex(u: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let out = u * nalgebra::DVector::from_column_slice(v);
    out.iter().copied().collect()
}

/// An N×N unitary matrix acting on amplitude vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrixRecord", into = "ComplexMatrixRecord")]
pub struct UnitaryMap {
    u: DMatrix<Complex64>,
}

impl UnitaryMap {
    pub fn new(u: DMatrix<Complex64>) -> Result<Self> {
        validate_unitary(&u)?;
        Ok(Self { u })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// `(1/√2)[[1, 1], [1, -1]]`.
    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            u: DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(h, 0.0),
                    Complex64::new(h, 0.0),
                    Complex64::new(h, 0.0),
                    Complex64::new(-h, 0.0),
                ],
            ),
        }
    }

    pub(crate) fn from_matrix_unchecked(u: DMatrix<Complex64>) -> Self {
        Self { u }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn adjoint(&self) -> UnitaryMap {
        Self { u: self.u.adjoint() }
    }

    pub fn compose(&self, other: &UnitaryMap) -> Result<UnitaryMap> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            u: &self.u * &other.u,
        })
    }

    pub fn apply(&self, v: &ComplexState) -> Result<ComplexState> {
        check_dim(self.dim(), v.len())?;
        Ok(ComplexState::from_vec_unchecked(apply_complex(&self.u, v.amplitudes())))
    }
}

impl TryFrom<ComplexMatrixRecord> for UnitaryMap {
    type Error = Error;

    fn try_from(r: ComplexMatrixRecord) -> Result<Self> {
        Self::new(r.to_matrix()?)
    }
}

impl From<UnitaryMap> for ComplexMatrixRecord {
    fn from(u: UnitaryMap) -> Self {
        ComplexMatrixRecord::from(&u.u)
    }
}

/// The antiunitary map `v ↦ u·conj(v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrixRecord", into = "ComplexMatrixRecord")]
pub struct AntiunitaryMap {
    u: DMatrix<Complex64>,
}

impl AntiunitaryMap {
    pub fn new(u: DMatrix<Complex64>) -> Result<Self> {
        validate_unitary(&u)?;
        Ok(Self { u })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn apply(&self, v: &ComplexState) -> Result<ComplexState> {
        check_dim(self.dim(), v.len())?;
        let conj: Vec<Complex64> = v.amplitudes().iter().map(|z| z.conj()).collect();
        Ok(ComplexState::from_vec_unchecked(apply_complex(&self.u, &conj)))
    }
}

impl TryFrom<ComplexMatrixRecord> for AntiunitaryMap {
    type Error = Error;

    fn try_from(r: ComplexMatrixRecord) -> Result<Self> {
        Self::new(r.to_matrix()?)
    }
}

impl From<AntiunitaryMap> for ComplexMatrixRecord {
    fn from(u: AntiunitaryMap) -> Self {
        ComplexMatrixRecord::from(&u.u)
    }
}

/// Unitary with `u_ij = α_ij e^{iφ_ij}` for a type-1 map.
pub fn to_unitary(m: &OrthogonalMap) -> Result<UnitaryMap> {
    match classify(m) {
        TransformType::Type1(_) => {}
        other => {
            return Err(Error::WrongType {
                expected: "type1",
                found: other.name(),
            })
        }
    }
    let n = m.n_outcomes();
    let u = DMatrix::from_row_slice(n, n, &block_components(&m.m, 0));
    UnitaryMap::new(u)
}

/// The unitary factor `u` of a type-2 map, which acts as `v ↦ u·conj(v)`.
pub fn to_antiunitary(m: &OrthogonalMap) -> Result<AntiunitaryMap> {
    match classify(m) {
        TransformType::Type2(_) => {}
        other => {
            return Err(Error::WrongType {
                expected: "type2",
                found: other.name(),
            })
        }
    }
    let n = m.n_outcomes();
    let u = DMatrix::from_row_slice(n, n, &block_components(&m.m, 1));
    AntiunitaryMap::new(u)
}

fn realify(u: &DMatrix<Complex64>, beta: u8) -> DMatrix<f64> {
    let n = u.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = u[(i, j)];
            let (r, c) = (2 * i, 2 * j);
            m[(r, c)] = z.re;
            m[(r + 1, c)] = z.im;
            if beta == 0 {
                m[(r, c + 1)] = -z.im;
                m[(r + 1, c + 1)] = z.re;
            } else {
                m[(r, c + 1)] = z.im;
                m[(r + 1, c + 1)] = -z.re;
            }
        }
    }
    m
}

/// Real 2N×2N form of a unitary: block `(i, j)` is `|u_ij| R(arg u_ij)`.
pub fn from_unitary(u: &UnitaryMap) -> Result<OrthogonalMap> {
    validate_unitary(&u.u)?;
    OrthogonalMap::new(realify(&u.u, 0))
}

/// Real form of `v ↦ u·conj(v)`: blocks `|u_ij| R(arg u_ij) diag(1, -1)`.
pub fn from_antiunitary(u: &AntiunitaryMap) -> Result<OrthogonalMap> {
    validate_unitary(&u.u)?;
    OrthogonalMap::new(realify(&u.u, 1))
}

/// Haar-distributed orthogonal matrix from `rng`: QR of a standard normal
/// matrix with the signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<OrthogonalMap> {
    if dim < 2 || !dim.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "dimension must be even and at least 2, got {dim}"
        )));
    }
    let g = DMatrix::from_fn(dim, dim, |_, _| standard_normal(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..dim {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    OrthogonalMap::new(q)
}

pub fn random_orthogonal(dim: usize, seed: u64) -> Result<OrthogonalMap> {
    random_orthogonal_with(dim, &mut substream(seed, 0))
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of `R`'s diagonal folded into `Q`.
pub fn random_unitary_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitaryMap> {
    if n < 1 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            d / d.norm()
        };
        for row in 0..n {
            q[(row, k)] *= phase;
        }
    }
    UnitaryMap::new(q)
}

pub fn random_unitary(n: usize, seed: u64) -> Result<UnitaryMap> {
    random_unitary_with(n, &mut substream(seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeWitness {
    pub state_index: usize,
    pub state: RealState,
    pub chi0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub pass: bool,
    pub max_deviation: f64,
    /// State and shift realizing the largest deviation, kept when the probe fails.
    pub witness: Option<ProbeWitness>,
}

/// Checks that outcome probabilities after `m` are unchanged when every gauge
/// variable of the input state is shifted by the same amount.
pub fn gauge_invariance_probe(
    m: &OrthogonalMap,
    states: &[RealState],
    chi0s: &[f64],
    g: &GaugeConvention,
) -> Result<ProbeResult> {
    if states.is_empty() || chi0s.is_empty() {
        return Err(Error::InvalidParameter(
            "probe needs at least one state and one shift".into(),
        ));
    }
    let mut max_deviation = 0.0f64;
    let mut worst: Option<(usize, f64)> = None;
    for (si, q) in states.iter().enumerate() {
        let reference = coarse_grain(&state_event_probs(&m.apply(q)?))?;
        let polar = to_polar(q);
        for &chi0 in chi0s {
            let shifted = from_polar(&gauge_shift(&polar, chi0, g));
            let probs = coarse_grain(&state_event_probs(&m.apply(&shifted)?))?;
            let dev = reference
                .probs()
                .iter()
                .zip(probs.probs())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dev > max_deviation {
                max_deviation = dev;
                worst = Some((si, chi0));
            }
        }
    }
    let pass = max_deviation <= STRUCTURAL_TOL;
    let witness = match (pass, worst) {
        (false, Some((state_index, chi0))) => Some(ProbeWitness {
            state_index,
            state: states[state_index].clone(),
            chi0,
        }),
        _ => None,
    };
    Ok(ProbeResult {
        pass,
        max_deviation,
        witness,
    })
}

/// Probe with `states` random states and `shifts` random shifts in `[0, 2π)`
/// drawn from `seed`.
pub fn random_gauge_probe(
    m: &OrthogonalMap,
    g: &GaugeConvention,
    states: usize,
    shifts: usize,
    seed: u64,
) -> Result<ProbeResult> {
    let mut rng = substream(seed, 0);
    let sample: Vec<RealState> = (0..states)
        .map(|_| RealState::random(m.n_outcomes(), &mut rng))
        .collect::<Result<_>>()?;
    let chi0s: Vec<f64> = (0..shifts)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU / g.a().abs())
        .collect();
    gauge_invariance_probe(m, &sample, &chi0s, g)
}
