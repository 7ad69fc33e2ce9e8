//! Command-line verification harness.
//!
//! Each subcommand runs a battery of numerical checks with a seeded
//! configuration and emits a [`Report`]. Exit codes: 0 when every check
//! passes, 1 when any check fails, 2 for usage or configuration errors.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::{CoinExperiment, Shannon};
use crate::distmax::{
    certify_upper_bound, hilbert_distance, maximize_statistical_distance, measured_distance, MAX_DIM,
};
use crate::error::Error;
use crate::measurement::{
    apply_measurement, outcome_distribution, perturbed_post, sample_outcomes, simulability_roundtrip,
    simulability_with_post, Measurement,
};
use crate::report::{Check, Comparison, Report, Table};
use crate::rng::{standard_normal, substream};
use crate::simplex::{fisher_quadratic, kl_divergence, ProbDist, TangentVec};
use crate::statespace::{
    derivative_samples, from_complex, measure_invariance_check, polar_metric_quadratic, push_forward,
    state_event_probs, to_complex, to_polar, ComplexState, GaugeConvention, RealState,
};
use crate::transforms::{
    classify, from_antiunitary, from_unitary, random_gauge_probe, random_orthogonal_with,
    random_unitary_with, to_antiunitary, to_unitary, AntiunitaryMap, TransformType, UnitaryMap,
    PROBE_SHIFTS, PROBE_STATES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    CoinDistinguish,
    MetricCheck,
    Correspondence,
    BornCheck,
    Wootters,
    All,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::CoinDistinguish => "coin-distinguish",
            Self::MetricCheck => "metric-check",
            Self::Correspondence => "correspondence",
            Self::BornCheck => "born-check",
            Self::Wootters => "wootters",
            Self::All => "all",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(name, false).ok()
    }

    const BATTERIES: [Subcommand; 5] = [
        Self::CoinDistinguish,
        Self::MetricCheck,
        Self::Correspondence,
        Self::BornCheck,
        Self::Wootters,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "qrecon", version, about = "Seeded numerical checks of the information-geometric reconstruction of quantum theory")]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// Number of outcomes N.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials, random samples or pairs, depending on the subcommand.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub shots: Option<u64>,
    /// Optimizer restarts.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Replace a check tolerance, e.g. `fisher_pullback=1e-12`. Repeatable.
    #[arg(long = "tol-override", value_name = "NAME=VALUE")]
    pub tol_override: Vec<String>,
    /// Coin A distribution for coin-distinguish, comma separated.
    #[arg(long)]
    pub p: Option<String>,
    /// Coin B distribution for coin-distinguish, comma separated.
    #[arg(long)]
    pub p2: Option<String>,
}

/// Check names accepted by `--tol-override`.
pub const TOLERANCE_NAMES: &[&str] = &[
    "gain_ratio",
    "worked_point",
    "mc_vs_exact",
    "mc_vs_enumeration",
    "null_gain",
    "fisher_pullback",
    "polar_pullback",
    "kl_fisher_order",
    "measure_affine",
    "measure_square",
    "type1_classified",
    "type2_classified",
    "unitarity",
    "unitary_roundtrip",
    "state_roundtrip",
    "equivariance",
    "gauge_typed",
    "haar_neither",
    "haar_probe_fail",
    "degenerate_2x2",
    "born_consistency",
    "completeness",
    "phase_irrelevance",
    "reproducibility",
    "perturbed_post_detected",
    "shots_3sigma",
    "wootters_gap",
    "envelope",
    "certificate",
];

pub const DEFAULT_N: usize = 2;
pub const DEFAULT_SHOTS: u64 = 100_000;
pub const DEFAULT_BUDGET: usize = 16;
pub const DEFAULT_DELTA: f64 = 0.005;

fn default_trials(cmd: Subcommand) -> u64 {
    match cmd {
        Subcommand::CoinDistinguish => 10_000,
        Subcommand::MetricCheck => 1000,
        Subcommand::Correspondence => 100,
        Subcommand::BornCheck => 1000,
        Subcommand::Wootters => 20,
        Subcommand::All => 0,
    }
}

/// Validated run configuration, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub n: usize,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub shots: u64,
    pub budget: usize,
    pub p: Option<Vec<f64>>,
    pub p2: Option<Vec<f64>>,
    pub tol_overrides: BTreeMap<String, f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "configuration error: {msg}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("--{flag}: cannot parse {s:?}: {e}")))
        })
        .collect()
}

impl RunConfig {
    /// Configuration with defaults for everything except the subcommand.
    pub fn new(subcommand: Subcommand) -> Self {
        Self {
            subcommand,
            n: DEFAULT_N,
            seed: None,
            trials: None,
            shots: DEFAULT_SHOTS,
            budget: DEFAULT_BUDGET,
            p: None,
            p2: None,
            tol_overrides: BTreeMap::new(),
            out: None,
            format: Format::Json,
        }
    }

    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let mut tol_overrides = BTreeMap::new();
        for item in &cli.tol_override {
            let Some((name, value)) = item.split_once('=') else {
                return config_err(format!("--tol-override expects NAME=VALUE, got {item:?}"));
            };
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| CliError::Config(format!("--tol-override {name}: {e}")))?;
            tol_overrides.insert(name.trim().to_string(), value);
        }
        let p = cli.p.as_deref().map(|s| parse_list("p", s)).transpose()?;
        let p2 = cli.p2.as_deref().map(|s| parse_list("p2", s)).transpose()?;
        let n = match (cli.n, &p) {
            (Some(n), Some(p)) if n != p.len() => {
                return config_err(format!("--n {n} disagrees with --p of length {}", p.len()))
            }
            (Some(n), _) => n,
            (None, Some(p)) => p.len(),
            (None, None) => DEFAULT_N,
        };
        let cfg = Self {
            subcommand: cli.subcommand,
            n,
            seed: cli.seed,
            trials: cli.trials,
            shots: cli.shots.unwrap_or(DEFAULT_SHOTS),
            budget: cli.budget.unwrap_or(DEFAULT_BUDGET),
            p,
            p2,
            tol_overrides,
            out: cli.out,
            format: cli.format,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n < 2 {
            return config_err(format!("n must be at least 2, got {}", self.n));
        }
        for (name, value) in &self.tol_overrides {
            if !TOLERANCE_NAMES.contains(&name.as_str()) {
                return config_err(format!("unknown tolerance name {name:?}"));
            }
            if !(value.is_finite() && *value >= 0.0) {
                return config_err(format!("tolerance {name} must be finite and non-negative"));
            }
        }
        if self.shots == 0 {
            return config_err("shots must be at least 1");
        }
        if self.budget == 0 {
            return config_err("budget must be at least 1");
        }
        if self.p.is_some() != self.p2.is_some() {
            return config_err("--p and --p2 must be given together");
        }
        if let (Some(p), Some(p2)) = (&self.p, &self.p2) {
            if p.len() != p2.len() {
                return config_err("--p and --p2 must have the same length");
            }
            if p.len() != self.n {
                return config_err(format!("--p has length {} but n = {}", p.len(), self.n));
            }
            ProbDist::new(p.clone())?;
            ProbDist::new(p2.clone())?;
        }
        let cmds: Vec<Subcommand> = match self.subcommand {
            Subcommand::All => Subcommand::BATTERIES.to_vec(),
            c => vec![c],
        };
        for cmd in cmds {
            let trials = self.trials_for(cmd);
            if trials == 0 && cmd != Subcommand::CoinDistinguish {
                return config_err(format!("{} needs at least one trial", cmd.name()));
            }
            if self.seed.is_none() && (cmd != Subcommand::CoinDistinguish || trials > 0) {
                return config_err(format!("{} is stochastic and requires --seed", cmd.name()));
            }
            if cmd == Subcommand::Wootters && self.n > MAX_DIM {
                return config_err(format!("wootters supports n <= {MAX_DIM}"));
            }
        }
        Ok(())
    }

    pub fn trials_for(&self, cmd: Subcommand) -> u64 {
        self.trials.unwrap_or_else(|| default_trials(cmd))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn tol(&self, name: &str, default: f64) -> f64 {
        self.tol_overrides.get(name).copied().unwrap_or(default)
    }
}

#[derive(Default)]
struct Section {
    tables: Vec<Table>,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Section {
    fn check(&mut self, cfg: &RunConfig, name: String, measured: f64, target: f64, default_tol: f64, cmp: Comparison) {
        let base = crate::report::base_name(&name).to_string();
        let tol = cfg.tol(&base, default_tol);
        self.checks.push(Check::new(name, measured, target, tol, cmp));
    }
}

fn coin_dists(cfg: &RunConfig) -> Result<(ProbDist, ProbDist), CliError> {
    if let (Some(p), Some(p2)) = (&cfg.p, &cfg.p2) {
        return Ok((ProbDist::new(p.clone())?, ProbDist::new(p2.clone())?));
    }
    let n = cfg.n;
    let p = vec![1.0 / n as f64; n];
    let mut p2 = p.clone();
    p2[0] += DEFAULT_DELTA;
    p2[1] -= DEFAULT_DELTA;
    Ok((ProbDist::new(p)?, ProbDist::renormalize(p2)?))
}

/// `n·ds²` levels of the sweep, with the relative tolerance on exact/approx
/// where one applies.
const SWEEP: [(f64, Option<f64>); 5] = [
    (0.1, None),
    (0.05, Some(0.05)),
    (0.02, Some(0.02)),
    (0.01, Some(0.01)),
    (0.005, None),
];
const MC_LEVEL_MAX: f64 = 0.05;

fn cmd_coin_distinguish(cfg: &RunConfig) -> Result<Section, CliError> {
    let mut s = Section::default();
    let (p, p2) = coin_dists(cfg)?;
    let unit = CoinExperiment::new(p.clone(), p2.clone(), 1)?;
    let ds2 = unit.n_ds2()?;
    let trials = cfg.trials_for(Subcommand::CoinDistinguish);
    let seed = cfg.seed();
    let shannon = Shannon;
    let mut table = Table::new(
        "coin_sweep",
        &["n", "n_ds2", "gain_exact", "gain_approx", "ratio", "mc_mean", "mc_std_error", "enumerated"],
    );

    if ds2 == 0.0 {
        s.notes.push("p equals p2: every information gain is zero".into());
        for n in [10u64, 100, 1000] {
            let exp = CoinExperiment::new(p.clone(), p2.clone(), n)?;
            let exact = exp.info_gain_exact(&shannon)?;
            let mc = if trials > 0 {
                Some(exp.monte_carlo_gain(trials, seed.wrapping_add(n), &shannon)?)
            } else {
                None
            };
            table.push(vec![
                n as f64,
                0.0,
                exact,
                exp.info_gain_approx()?,
                f64::NAN,
                mc.as_ref().map_or(f64::NAN, |m| m.mean),
                mc.as_ref().map_or(f64::NAN, |m| m.std_error),
                f64::NAN,
            ]);
            s.check(cfg, format!("null_gain[n={n}]"), exact, 0.0, 1e-15, Comparison::AbsDiff);
            if let Some(m) = mc {
                s.check(cfg, format!("null_gain[n={n},mc]"), m.mean, 0.0, 1e-15, Comparison::AbsDiff);
            }
        }
        s.tables.push(table);
        return Ok(s);
    }

    for (level, (target, ratio_tol)) in SWEEP.iter().enumerate() {
        let n = ((target / ds2).round() as u64).max(1);
        let exp = CoinExperiment::new(p.clone(), p2.clone(), n)?;
        let x = exp.n_ds2()?;
        let exact = exp.info_gain_exact(&shannon)?;
        let approx = exp.info_gain_approx()?;
        let ratio = exact / approx;
        let label = format!("nds2={target}");
        if let Some(tol) = ratio_tol {
            s.check(cfg, format!("gain_ratio[{label}]"), exact, approx, *tol, Comparison::RelDiff);
        }
        if (x - 0.1).abs() <= 1e-9 {
            s.check(cfg, "worked_point[exact]".into(), exact, 0.00498, 5e-6, Comparison::AbsDiff);
            s.check(cfg, "worked_point[approx]".into(), approx, 0.005, 5e-6, Comparison::AbsDiff);
        }
        let mut mc_mean = f64::NAN;
        let mut mc_se = f64::NAN;
        let mut enumerated = f64::NAN;
        if trials > 0 && *target <= MC_LEVEL_MAX {
            let mc = exp.monte_carlo_gain(trials, seed.wrapping_add(level as u64), &shannon)?;
            mc_mean = mc.mean;
            mc_se = mc.std_error;
            s.check(cfg, format!("mc_vs_exact[{label}]"), mc.mean, exact, 3.0 * mc.std_error, Comparison::AbsDiff);
            if p.len() == 2 {
                enumerated = exp.expected_posterior_gain_binary(&shannon)?;
                s.check(
                    cfg,
                    format!("mc_vs_enumeration[{label}]"),
                    mc.mean,
                    enumerated,
                    3.0 * mc.std_error,
                    Comparison::AbsDiff,
                );
            }
        }
        table.push(vec![n as f64, x, exact, approx, ratio, mc_mean, mc_se, enumerated]);
    }
    s.tables.push(table);
    s.notes.push(
        "mc_vs_exact compares the average entropy reduction over simulated datasets with the gain \
         evaluated at the expected log-odds; mc_vs_enumeration compares it with the exact binomial average"
            .into(),
    );
    Ok(s)
}

fn random_interior_dist<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ProbDist {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    ProbDist::renormalize(w).expect("positive weights")
}

/// Tangent at `p` with largest relative component `|dp_i| / p_i` equal to 1.
fn random_tangent<R: Rng + ?Sized>(p: &ProbDist, rng: &mut R) -> TangentVec {
    let z: Vec<f64> = p.probs().iter().map(|_| standard_normal(rng)).collect();
    let mean: f64 = p.probs().iter().zip(&z).map(|(p, z)| p * z).sum();
    let raw: Vec<f64> = p.probs().iter().zip(&z).map(|(p, z)| p * (z - mean)).collect();
    let scale = raw
        .iter()
        .zip(p.probs())
        .map(|(d, p)| (d / p).abs())
        .fold(0.0, f64::max);
    let sum: f64 = raw.iter().map(|d| d / scale).sum();
    let mut d: Vec<f64> = raw.iter().map(|d| d / scale).collect();
    // push the rounding residue onto the largest component
    let k = (0..d.len()).max_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs())).unwrap_or(0);
    d[k] -= sum;
    TangentVec::new(d).expect("centered by construction")
}

/// `(pooled order, median order, curve)`
pub type OrderFit = (f64, f64, Vec<(f64, f64)>);

/// Observed convergence order of `|KL(p‖p+ε dp) − 2 ds²(ε dp)|` under
/// halving of ε. Returns the pooled order (least-squares slope of the mean
/// error over pairs), the median per-pair order at the finest halving, and
/// the `(ε, mean error)` curve.
pub fn kl_fisher_order(n: usize, pairs: u64, seed: u64) -> Result<OrderFit, Error> {
    const LEVELS: usize = 7;
    let eps: Vec<f64> = (0..LEVELS).map(|k| 0.5 * 0.5f64.powi(k as i32)).collect();
    let errors: Vec<Vec<f64>> = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            let p = random_interior_dist(n, &mut rng);
            let dp = random_tangent(&p, &mut rng);
            eps.iter()
                .map(|&e| {
                    let step = dp.scaled(e);
                    let q: Vec<f64> = p.probs().iter().zip(step.deltas()).map(|(a, b)| a + b).collect();
                    let q = ProbDist::renormalize(q)?;
                    let kl = kl_divergence(&p, &q)?;
                    let ds2 = fisher_quadratic(&p, &TangentVec::between(&p, &q)?)?;
                    Ok((kl - 2.0 * ds2).abs())
                })
                .collect::<Result<Vec<f64>, Error>>()
        })
        .collect::<Result<_, Error>>()?;
    let means: Vec<f64> = (0..LEVELS)
        .map(|l| errors.iter().map(|e| e[l]).sum::<f64>() / pairs as f64)
        .collect();
    // fit on the finer levels where the leading term dominates
    let fit: Vec<(f64, f64)> = (2..LEVELS).map(|l| (eps[l].ln(), means[l].ln())).collect();
    let mx = fit.iter().map(|(x, _)| x).sum::<f64>() / fit.len() as f64;
    let my = fit.iter().map(|(_, y)| y).sum::<f64>() / fit.len() as f64;
    let sxy: f64 = fit.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = fit.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let pooled = sxy / sxx;
    let mut per_pair: Vec<f64> = errors
        .iter()
        .map(|e| (e[LEVELS - 2] / e[LEVELS - 1]).log2())
        .filter(|x| x.is_finite())
        .collect();
    per_pair.sort_by(f64::total_cmp);
    let median = per_pair.get(per_pair.len() / 2).copied().unwrap_or(f64::NAN);
    Ok((pooled, median, eps.into_iter().zip(means).collect()))
}

/// Unit tangent to the sphere at `q`.
fn random_sphere_tangent<R: Rng + ?Sized>(q: &RealState, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = q.components().iter().map(|_| standard_normal(rng)).collect();
    let along: f64 = z.iter().zip(q.components()).map(|(a, b)| a * b).sum();
    let t: Vec<f64> = z.iter().zip(q.components()).map(|(a, b)| a - along * b).collect();
    let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    t.into_iter().map(|x| x / norm).collect()
}

fn cmd_metric_check(cfg: &RunConfig) -> Result<Section, CliError> {
    let mut s = Section::default();
    let n = cfg.n;
    let seed = cfg.seed();
    let trials = cfg.trials_for(Subcommand::MetricCheck);

    // Fisher metric on event probabilities against |dQ|² for unit tangents
    let worst = (0..trials)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64), Error> {
            let mut rng = substream(seed, k);
            let q = RealState::random(n, &mut rng)?;
            let dq = random_sphere_tangent(&q, &mut rng);
            let dp: Vec<f64> = q.components().iter().zip(&dq).map(|(a, b)| 2.0 * a * b).collect();
            let dp_sum: f64 = dp.iter().sum();
            let mut dp = dp;
            dp[0] -= dp_sum;
            let events = state_event_probs(&q);
            let fisher = fisher_quadratic(events.as_dist(), &TangentVec::new(dp)?)?;
            let euclid: f64 = dq.iter().map(|x| x * x).sum();

            // the same tangent in polar coordinates
            let ps = to_polar(&q);
            let pol = push_forward_inverse(&q, &dq);
            let polar = polar_metric_quadratic(&ps, &pol.0, &pol.1, &GaugeConvention::default(), &vec![0.0; n])?;
            let check = push_forward(&ps, &pol.0, &pol.1)?;
            let back: f64 = check.iter().zip(&dq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(((fisher - euclid).abs(), (polar - euclid).abs().max(back)))
        })
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .fold((0.0f64, 0.0f64), |acc, x| (acc.0.max(x.0), acc.1.max(x.1)));
    s.check(cfg, format!("fisher_pullback[n={n}]"), worst.0, 0.0, 1e-10, Comparison::AtMost);
    s.check(cfg, format!("polar_pullback[n={n}]"), worst.1, 0.0, 1e-10, Comparison::AtMost);

    let (pooled, median, curve) = kl_fisher_order(n, trials, seed.wrapping_add(1))?;
    let mut t = Table::new(format!("kl_fisher_error[n={n}]"), &["epsilon", "mean_abs_error"]);
    for (e, m) in curve {
        t.push(vec![e, m]);
    }
    s.tables.push(t);
    let mut t = Table::new("kl_fisher_order", &["n", "pooled_order", "median_pair_order"]);
    t.push(vec![n as f64, pooled, median]);
    s.tables.push(t);
    s.check(cfg, format!("kl_fisher_order[n={n}]"), pooled, 2.7, 0.0, Comparison::AtLeast);

    // measure invariance of the gauge map θ(χ)
    let g = GaugeConvention::new(1.7, -0.4)?;
    let affine = measure_invariance_check(&derivative_samples(|x| g.theta(x), 0.0, 1.0, 101), 1e-6)?;
    s.check(cfg, "measure_affine[deviation]".into(), affine.deviation, 0.0, 1e-6, Comparison::AtMost);
    let square = measure_invariance_check(&derivative_samples(|x| x * x, 0.0, 1.0, 101), 1e-6)?;
    s.check(cfg, "measure_square[deviation]".into(), square.deviation, 2.0, 1e-6, Comparison::AbsDiff);
    s.check(
        cfg,
        "measure_square[rejected]".into(),
        if square.pass { 0.0 } else { 1.0 },
        1.0,
        0.0,
        Comparison::AbsDiff,
    );
    Ok(s)
}

/// Polar tangent `(dp, dθ)` of a sphere tangent `dq` at `q` (all p_i > 0).
fn push_forward_inverse(q: &RealState, dq: &[f64]) -> (TangentVec, Vec<f64>) {
    let c = q.components();
    let n = q.n_outcomes();
    let mut dp = Vec::with_capacity(n);
    let mut dth = Vec::with_capacity(n);
    for i in 0..n {
        let (x, y) = (c[2 * i], c[2 * i + 1]);
        let (dx, dy) = (dq[2 * i], dq[2 * i + 1]);
        let p = x * x + y * y;
        dp.push(2.0 * (x * dx + y * dy));
        dth.push((x * dy - y * dx) / p);
    }
    let sum: f64 = dp.iter().sum();
    dp[0] -= sum;
    (TangentVec::new(dp).expect("centered"), dth)
}

fn haar_typed_maps(n: usize, count: u64, seed: u64, beta: u8) -> Result<Vec<(UnitaryMap, crate::transforms::OrthogonalMap)>, Error> {
    (0..count)
        .map(|k| {
            let mut rng = substream(seed, k);
            let u = random_unitary_with(n, &mut rng)?;
            let m = if beta == 0 {
                from_unitary(&u)?
            } else {
                from_antiunitary(&AntiunitaryMap::new(u.matrix().clone())?)?
            };
            Ok((u, m))
        })
        .collect()
}

fn cmd_correspondence(cfg: &RunConfig) -> Result<Section, CliError> {
    let mut s = Section::default();
    let n = cfg.n;
    let seed = cfg.seed();
    let count = cfg.trials_for(Subcommand::Correspondence);
    let g = GaugeConvention::default();
    let mut counts = Table::new("classification_counts", &["source", "draws", "type1", "type2", "neither"]);

    let type1 = haar_typed_maps(n, count, seed, 0)?;
    let type2 = haar_typed_maps(n, count, seed.wrapping_add(1), 1)?;
    let (mut unitarity, mut roundtrip, mut state_rt, mut equiv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let tally = |maps: &[(UnitaryMap, crate::transforms::OrthogonalMap)]| {
        let mut c = [0u64; 3];
        for (_, m) in maps {
            c[match classify(m) {
                TransformType::Type1(_) => 0,
                TransformType::Type2(_) => 1,
                TransformType::Neither { .. } => 2,
            }] += 1;
        }
        c
    };
    let c1 = tally(&type1);
    let c2 = tally(&type2);
    counts.push(vec![0.0, count as f64, c1[0] as f64, c1[1] as f64, c1[2] as f64]);
    counts.push(vec![1.0, count as f64, c2[0] as f64, c2[1] as f64, c2[2] as f64]);
    s.check(cfg, "type1_classified[fraction]".into(), c1[0] as f64 / count as f64, 1.0, 0.0, Comparison::AbsDiff);
    s.check(cfg, "type2_classified[fraction]".into(), c2[1] as f64 / count as f64, 1.0, 0.0, Comparison::AbsDiff);

    let mut rng = substream(seed, u64::MAX);
    for (u, m) in &type1 {
        if let Ok(back) = to_unitary(m) {
            let gram = back.matrix().adjoint() * back.matrix();
            let id = nalgebra::DMatrix::<Complex64>::identity(n, n);
            unitarity = unitarity.max((gram - id).norm());
            roundtrip = roundtrip.max((back.matrix() - u.matrix()).norm());
            let q = RealState::random(n, &mut rng)?;
            state_rt = state_rt.max(
                from_complex(&to_complex(&q))
                    .components()
                    .iter()
                    .zip(q.components())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
            let lhs = to_complex(&m.apply(&q)?);
            let rhs = back.apply(&to_complex(&q))?;
            equiv = equiv.max(max_abs_diff(lhs.amplitudes(), rhs.amplitudes()));
        } else {
            unitarity = f64::INFINITY;
        }
    }
    for (_, m) in &type2 {
        match to_antiunitary(m) {
            Ok(a) => {
                let q = RealState::random(n, &mut rng)?;
                let lhs = to_complex(&m.apply(&q)?);
                let rhs = a.apply(&to_complex(&q))?;
                equiv = equiv.max(max_abs_diff(lhs.amplitudes(), rhs.amplitudes()));
            }
            Err(_) => equiv = f64::INFINITY,
        }
    }
    s.check(cfg, "unitarity[max_defect]".into(), unitarity, 0.0, 1e-10, Comparison::AtMost);
    s.check(cfg, "unitary_roundtrip[max_error]".into(), roundtrip, 0.0, 1e-12, Comparison::AtMost);
    s.check(cfg, "state_roundtrip[max_error]".into(), state_rt, 0.0, 1e-12, Comparison::AtMost);
    s.check(cfg, "equivariance[max_error]".into(), equiv, 0.0, 1e-10, Comparison::AtMost);

    let typed: Vec<&crate::transforms::OrthogonalMap> = type1.iter().chain(&type2).map(|(_, m)| m).collect();
    let probe_seed = seed.wrapping_add(2);
    let gauge_worst = typed
        .par_iter()
        .enumerate()
        .map(|(k, m)| random_gauge_probe(m, &g, PROBE_STATES, PROBE_SHIFTS, probe_seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .map(|r| r.max_deviation)
        .fold(0.0, f64::max);
    s.check(cfg, "gauge_typed[max_deviation]".into(), gauge_worst, 0.0, 1e-10, Comparison::AtMost);

    // Haar orthogonal draws in dimension 2N
    let draws = 10 * count;
    let haar_seed = seed.wrapping_add(3);
    let results = (0..draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(haar_seed, k);
            let m = random_orthogonal_with(2 * n, &mut rng)?;
            let kind = classify(&m);
            let probe = random_gauge_probe(&m, &g, PROBE_STATES, PROBE_SHIFTS, haar_seed.wrapping_add(draws + k))?;
            Ok((kind.beta(), probe))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let neither = results.iter().filter(|(b, _)| b.is_none()).count();
    let failed_with_witness = results
        .iter()
        .filter(|(_, p)| !p.pass && p.witness.is_some())
        .count();
    let typed_haar = results.iter().filter(|(b, _)| b.is_some()).count() as f64;
    counts.push(vec![2.0, draws as f64, typed_haar, 0.0, neither as f64]);
    let mut witnesses = Table::new("haar_probe_witnesses", &["draw", "max_deviation", "state_index", "chi0"]);
    for (k, (_, p)) in results.iter().enumerate() {
        let (idx, chi0) = p.witness.as_ref().map_or((f64::NAN, f64::NAN), |w| (w.state_index as f64, w.chi0));
        witnesses.push(vec![k as f64, p.max_deviation, idx, chi0]);
    }
    s.check(cfg, "haar_neither[fraction]".into(), neither as f64 / draws as f64, 1.0, 0.0, Comparison::AbsDiff);
    s.check(
        cfg,
        "haar_probe_fail[fraction]".into(),
        failed_with_witness as f64 / draws as f64,
        1.0,
        0.0,
        Comparison::AbsDiff,
    );

    // with a single outcome pair every orthogonal map is typed
    let deg_seed = seed.wrapping_add(4);
    let typed_2x2 = (0..draws)
        .filter(|&k| {
            random_orthogonal_with(2, &mut substream(deg_seed, k))
                .map(|m| classify(&m).beta().is_some())
                .unwrap_or(false)
        })
        .count();
    s.check(
        cfg,
        "degenerate_2x2[typed_fraction]".into(),
        typed_2x2 as f64 / draws as f64,
        1.0,
        0.0,
        Comparison::AbsDiff,
    );
    s.notes.push(
        "2x2 case (a single outcome): rotations are type 1 and reflections type 2, so the classification is exhaustive there"
            .into(),
    );
    counts.push(vec![3.0, draws as f64, f64::NAN, f64::NAN, (draws as usize - typed_2x2) as f64]);
    s.notes.push("classification_counts sources: 0 = constructed type 1, 1 = constructed type 2, 2 = Haar orthogonal (type1 column counts typed maps), 3 = Haar 2x2".into());
    s.tables.push(counts);
    s.tables.push(witnesses);
    Ok(s)
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn cmd_born_check(cfg: &RunConfig) -> Result<Section, CliError> {
    let mut s = Section::default();
    let n = cfg.n;
    let seed = cfg.seed();
    let trials = cfg.trials_for(Subcommand::BornCheck);

    let stats = (0..trials)
        .into_par_iter()
        .map(|k| -> Result<[f64; 5], Error> {
            let mut rng = substream(seed, k);
            let u = random_unitary_with(n, &mut rng)?;
            let phases: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
            let meas = Measurement::with_phases(u.clone(), phases)?;
            let plain = Measurement::new(u);
            let v = ComplexState::random(n, &mut rng)?;
            let d = outcome_distribution(&meas, &v)?;
            let mut born = 0.0f64;
            let mut total = 0.0;
            for k in 0..n {
                let overlap = meas.basis_vector(k)?.inner(&v)?.norm_sqr();
                born = born.max((d.probs()[k] - overlap).abs());
                total += overlap;
            }
            let alt = outcome_distribution(&plain, &v.with_global_phase(rng.random::<f64>() * 6.0))?;
            let phase = d.probs().iter().zip(alt.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

            let rt = simulability_roundtrip(&meas)?;
            let mut repeat = rt.max_deviation;
            let first = apply_measurement(&meas, &v, None, &mut rng)?;
            let second = apply_measurement(&meas, &first.output_state, None, &mut rng)?;
            repeat = repeat.max((1.0 - second.probability).abs());
            if second.outcome != first.outcome {
                repeat = f64::INFINITY;
            }
            let g = random_unitary_with(n, &mut rng)?;
            let broken = simulability_with_post(&meas, &perturbed_post(&meas, &g)?)?;
            let detected = if !broken.pass && broken.witness.is_some() { 1.0 } else { 0.0 };
            Ok([born, (total - 1.0).abs(), phase, repeat, detected])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let worst = |i: usize| stats.iter().map(|r| r[i]).fold(0.0, f64::max);
    let detected = stats.iter().map(|r| r[4]).sum::<f64>() / trials as f64;
    s.check(cfg, format!("born_consistency[n={n}]"), worst(0), 0.0, 1e-12, Comparison::AtMost);
    s.check(cfg, format!("completeness[n={n}]"), worst(1), 0.0, 1e-12, Comparison::AtMost);
    s.check(cfg, format!("phase_irrelevance[n={n}]"), worst(2), 0.0, 1e-14, Comparison::AtMost);
    s.check(cfg, format!("reproducibility[n={n}]"), worst(3), 0.0, 1e-12, Comparison::AtMost);
    s.check(cfg, "perturbed_post_detected[fraction]".into(), detected, 1.0, 0.0, Comparison::AbsDiff);

    // frequency check on the equal-weight two-outcome case
    let shots = cfg.shots;
    let meas = Measurement::new(UnitaryMap::hadamard());
    let v = ComplexState::basis(2, 0)?;
    let probs = outcome_distribution(&meas, &v)?;
    let counts = sample_outcomes(&meas, &v, shots, seed.wrapping_add(1))?;
    let mut t = Table::new("shot_counts", &["outcome", "count", "expected", "z"]);
    let mut max_z = 0.0f64;
    for (k, (&c, &p)) in counts.iter().zip(probs.probs()).enumerate() {
        let expected = shots as f64 * p;
        let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
        let z = (c as f64 - expected) / sigma;
        max_z = max_z.max(z.abs());
        t.push(vec![k as f64, c as f64, expected, z]);
    }
    s.tables.push(t);
    s.check(cfg, "shots_3sigma[max_abs_z]".into(), max_z, 3.0, 0.0, Comparison::AtMost);
    s.notes.push("outcome indices are 0-based".into());
    Ok(s)
}

fn cmd_wootters(cfg: &RunConfig) -> Result<Section, CliError> {
    let mut s = Section::default();
    let n = cfg.n;
    let seed = cfg.seed();
    let pairs = cfg.trials_for(Subcommand::Wootters);
    let gap_tol = if n <= 3 { 1e-3 } else { 5e-3 };
    let mut t = Table::new("wootters_pairs", &["pair", "hilbert_distance", "max_ds", "gap"]);
    let mut worst_gap = 0.0f64;
    for k in 0..pairs {
        let mut rng = substream(seed, k);
        let u = ComplexState::random(n, &mut rng)?;
        let v = ComplexState::random(n, &mut rng)?;
        let r = maximize_statistical_distance(&u, &v, cfg.budget, seed.wrapping_add(1 + k))?;
        worst_gap = worst_gap.max(r.gap);
        t.push(vec![k as f64, r.hilbert_distance, r.max_ds, r.gap]);
        if k == 0 {
            let cert = certify_upper_bound(&u, &v, 10_000, seed.wrapping_add(pairs + 1))?;
            s.check(cfg, "certificate[vs_max]".into(), cert, r.max_ds, 1e-9, Comparison::AtMost);
            s.check(cfg, "certificate[vs_hilbert]".into(), cert, r.hilbert_distance, 1e-9, Comparison::AtMost);
        }
    }
    s.tables.push(t);
    s.check(cfg, format!("wootters_gap[n={n},budget={}]", cfg.budget), worst_gap, 0.0, gap_tol, Comparison::AtMost);

    let env_seed = seed.wrapping_add(pairs + 2);
    let excess = (0..1000u64)
        .into_par_iter()
        .map(|k| -> Result<f64, Error> {
            let mut rng = substream(env_seed, k);
            let u = ComplexState::random(n, &mut rng)?;
            let v = ComplexState::random(n, &mut rng)?;
            let meas = Measurement::new(random_unitary_with(n, &mut rng)?);
            Ok(measured_distance(&meas, &u, &v)? - hilbert_distance(&u, &v)?)
        })
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    s.check(cfg, "envelope[max_excess]".into(), excess, 0.0, 1e-9, Comparison::AtMost);
    Ok(s)
}

fn run_battery(cmd: Subcommand, cfg: &RunConfig) -> Result<Section, CliError> {
    match cmd {
        Subcommand::CoinDistinguish => cmd_coin_distinguish(cfg),
        Subcommand::MetricCheck => cmd_metric_check(cfg),
        Subcommand::Correspondence => cmd_correspondence(cfg),
        Subcommand::BornCheck => cmd_born_check(cfg),
        Subcommand::Wootters => cmd_wootters(cfg),
        Subcommand::All => unreachable!("expanded by run"),
    }
}

/// Runs the configured subcommand and assembles its report.
pub fn run(cfg: &RunConfig) -> Result<Report<RunConfig>, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = Report::new(cfg.clone());
    match cfg.subcommand {
        Subcommand::All => {
            for cmd in Subcommand::BATTERIES {
                let sec = run_battery(cmd, cfg)?;
                let prefix = cmd.name();
                report.tables.extend(sec.tables.into_iter().map(|mut t| {
                    t.name = format!("{prefix}/{}", t.name);
                    t
                }));
                report.checks.extend(sec.checks.into_iter().map(|mut c| {
                    c.name = format!("{prefix}/{}", c.name);
                    c
                }));
                report.notes.extend(sec.notes.into_iter().map(|n| format!("{prefix}: {n}")));
            }
        }
        cmd => {
            let sec = run_battery(cmd, cfg)?;
            report.tables = sec.tables;
            report.checks = sec.checks;
            report.notes = sec.notes;
        }
    }
    report.finish();
    report.duration_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn exit_code(report: &Report<RunConfig>) -> i32 {
    if report.overall_pass {
        0
    } else {
        1
    }
}

fn emit(report: &Report<RunConfig>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let write = |w: &mut dyn Write| -> io::Result<()> {
        match report.config.format {
            Format::Json => report.write_json(&mut *w),
            Format::Csv => report.write_csv(w),
        }
    };
    match &report.config.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            write(&mut f)?;
            f.flush()?;
        }
        None => write(stdout)?,
    }
    Ok(())
}

/// Parses `args`, runs, writes the report and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        let report = run(&cfg)?;
        emit(&report, stdout)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            for c in report.failed_checks() {
                let _ = writeln!(
                    stderr,
                    "FAIL {} measured={} target={} tolerance={} ({})",
                    c.name,
                    crate::report::fmt_f64(c.measured),
                    crate::report::fmt_f64(c.target),
                    crate::report::fmt_f64(c.tolerance),
                    c.comparison.as_str()
                );
            }
            let _ = writeln!(
                stderr,
                "{}: {}/{} checks passed",
                report.config.subcommand.name(),
                report.checks.iter().filter(|c| c.pass).count(),
                report.checks.len()
            );
            exit_code(&report)
        }
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            2
        }
    }
}
