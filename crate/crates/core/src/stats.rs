//! Closed-form reference exponents and Monte-Carlo experiment aggregation.
//!
//! Two exactly solvable models anchor every simulation here. For iid
//! Gaussian matrices with entry variance 1/n the full spectrum is
//!
//! ```text
//! mu_i = (1/2) (log 2 + digamma((n - i + 1) / 2) - log n),   i = 1..n
//! ```
//!
//! and for the 2n x 2n symplectic block model with coupling lambda and
//! energy |E| < 2, E != 0, the weak-coupling exponents are
//!
//! ```text
//! gamma_d = lambda^2 (1 + 2(n - d)) / (8 sin^2 kappa),   E = 2 cos kappa
//! ```
//!
//! up to O(lambda^3), which is omitted. The Monte-Carlo side runs many
//! independent chains (stream id = trial index, so results do not depend on
//! the worker count), turns the per-trial estimates into empirical tail
//! curves P(|estimate| >= t), and fits how the tail decays as the chain
//! length doubles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{
    least_exponent_distance, second_exponent_pair, top_exponent, ChainConfig, ExponentEstimate,
};
use crate::ensembles::Family;
use crate::error::{Error, Result};
use crate::structure::DEFAULT_LCD_EXPONENT_C;

/// Digamma (logarithmic derivative of Gamma) for positive arguments, with
/// absolute error below 1e-10: the recurrence digamma(d+1) = digamma(d) + 1/d
/// lifts the argument to at least 10, where the asymptotic series applies.
pub fn digamma(d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidArgument(format!("digamma needs d > 0, got {d}")));
    }
    let mut shift = 0.0;
    let mut x = d;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    Ok(shift + x.ln() - 0.5 * inv - series)
}

/// The n Gaussian-ensemble exponents mu_1 > ... > mu_n for entry variance
/// 1/n, in decreasing order.
pub fn newman_exponents(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("spectrum dimension must be >= 1".into()));
    }
    let log_n = (n as f64).ln();
    (1..=n)
        .map(|i| {
            let psi = digamma((n - i + 1) as f64 / 2.0)?;
            Ok(0.5 * (2.0_f64.ln() + psi - log_n))
        })
        .collect()
}

/// Weak-coupling exponent gamma_d of the symplectic block model,
/// lambda^2 (1 + 2(n - d)) / (8 sin^2 kappa) with E = 2 cos kappa. Requires
/// 1 <= d <= n and 0 < |E| < 2; the cubic remainder is dropped.
pub fn ssb_exponent(n: usize, d: usize, lambda: f64, energy: f64) -> Result<f64> {
    if n == 0 || d == 0 || d > n {
        return Err(Error::InvalidArgument(format!("exponent index d = {d} must lie in 1..={n}")));
    }
    if energy == 0.0 || energy.abs() >= 2.0 || !energy.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "energy E = {energy} must satisfy 0 < |E| < 2"
        )));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite".into()));
    }
    let sin2 = 1.0 - energy * energy / 4.0;
    Ok(lambda * lambda * (1.0 + 2.0 * (n - d) as f64) / (8.0 * sin2))
}

/// Which chain statistic a tail experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Top,
    SecondSum,
    Least,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Top => "top",
            EstimatorKind::SecondSum => "second_sum",
            EstimatorKind::Least => "least",
        }
    }
}

/// Empirical exceedance curve of one deviation statistic over many chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub kind: EstimatorKind,
    pub t_grid: Vec<f64>,
    /// P(|estimate| >= t) over the surviving trials, one entry per t.
    pub probs: Vec<f64>,
    /// Binomial standard error sqrt(p(1-p)/alive) per entry.
    pub stderrs: Vec<f64>,
    pub trials: usize,
    #[serde(rename = "N")]
    pub n_steps: usize,
    #[serde(rename = "n")]
    pub dim: usize,
    pub died_fraction: f64,
}

/// Runs `trials` independent chains of the given kind on stream ids
/// 0..trials-1 (the config's own stream_id is ignored), in parallel on
/// `workers` threads (0 = library default). The output order is by trial,
/// so the result is identical for every worker count.
pub fn trial_estimates(
    cfg: &ChainConfig,
    kind: EstimatorKind,
    trials: usize,
    workers: usize,
) -> Result<Vec<ExponentEstimate>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let run = |trial: usize| {
        let cfg = cfg.clone().with_stream(trial as u64);
        match kind {
            EstimatorKind::Top => top_exponent(&cfg, None),
            EstimatorKind::SecondSum => second_exponent_pair(&cfg, None, None),
            EstimatorKind::Least => least_exponent_distance(&cfg),
        }
    };
    // Validate once up front so per-trial failures cannot occur mid-pool.
    run(0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    pool.install(|| (0..trials).into_par_iter().map(run).collect())
}

/// Tail curve P(|estimate| >= t) for t over `t_grid`. Trials whose chain
/// died are excluded from the exceedance denominators and reported in
/// `died_fraction`; a run where every chain died is an error.
pub fn tail_curve(
    cfg: &ChainConfig,
    kind: EstimatorKind,
    t_grid: &[f64],
    trials: usize,
    workers: usize,
) -> Result<TailCurve> {
    if trials < 100 {
        return Err(Error::InvalidArgument(format!(
            "tail estimation needs >= 100 trials, got {trials}"
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("t_grid must be nonempty".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("t_grid entries must be positive".into()));
    }
    if t_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("t_grid must be sorted ascending".into()));
    }
    let estimates = trial_estimates(cfg, kind, trials, workers)?;
    let alive: Vec<f64> =
        estimates.iter().filter(|e| !e.died).map(|e| e.value.abs()).collect();
    if alive.is_empty() {
        return Err(Error::AllChainsDied);
    }
    let denom = alive.len() as f64;
    let mut probs = Vec::with_capacity(t_grid.len());
    let mut stderrs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let exceed = alive.iter().filter(|&&v| v >= t).count() as f64;
        let p = exceed / denom;
        probs.push(p);
        stderrs.push((p * (1.0 - p) / denom).sqrt());
    }
    Ok(TailCurve {
        kind,
        t_grid: t_grid.to_vec(),
        probs,
        stderrs,
        trials,
        n_steps: cfg.n_steps,
        dim: cfg.ensemble.dim(),
        died_fraction: (trials - alive.len()) as f64 / trials as f64,
    })
}

/// Ratio log P_N(t) / log P_2N(t) between two tail curves at chain lengths
/// N and 2N. Exact exponential decay e^{-aN} gives 0.5; no N-dependence
/// gives 1. `degenerate` flags an empirical probability outside (0, 1) at
/// t, in which case `ratio` is NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub ratio: f64,
    pub degenerate: bool,
}

pub fn deviation_rate_fit(curve_n: &TailCurve, curve_2n: &TailCurve, t: f64) -> Result<RateFit> {
    if curve_2n.n_steps != 2 * curve_n.n_steps {
        return Err(Error::InvalidArgument(format!(
            "curves must be at chain lengths N and 2N, got {} and {}",
            curve_n.n_steps, curve_2n.n_steps
        )));
    }
    let locate = |c: &TailCurve| {
        c.t_grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-12 * t.max(1.0))
            .ok_or_else(|| Error::InvalidArgument(format!("t = {t} is not on the curve's grid")))
    };
    let p_n = curve_n.probs[locate(curve_n)?];
    let p_2n = curve_2n.probs[locate(curve_2n)?];
    if p_n <= 0.0 || p_n >= 1.0 || p_2n <= 0.0 || p_2n >= 1.0 {
        return Ok(RateFit { ratio: f64::NAN, degenerate: true });
    }
    Ok(RateFit { ratio: p_n.ln() / p_2n.ln(), degenerate: false })
}

/// Summary statistics of a chain's recorded increments. `clipped_count`
/// counts increments beyond `threshold` = 2 n^c with the default structure
/// exponent c, the truncation level that splits bounded-increment behavior
/// from heavy-tail excursions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementDiagnostics {
    pub mean: f64,
    pub variance: f64,
    pub max_abs: f64,
    pub clipped_count: usize,
    pub threshold: f64,
}

pub fn increment_diagnostics(est: &ExponentEstimate) -> Result<IncrementDiagnostics> {
    let increments = est
        .increments
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("estimate has no recorded increments".into()))?;
    if increments.is_empty() {
        return Err(Error::InvalidArgument("estimate has an empty increment record".into()));
    }
    let count = increments.len() as f64;
    let mean = increments.iter().sum::<f64>() / count;
    let variance = if increments.len() < 2 {
        0.0
    } else {
        increments.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (count - 1.0)
    };
    let max_abs = increments.iter().fold(0.0, |m: f64, y| m.max(y.abs()));
    let threshold = 2.0 * (est.dim as f64).powf(DEFAULT_LCD_EXPONENT_C);
    let clipped_count = increments.iter().filter(|y| y.abs() > threshold).count();
    Ok(IncrementDiagnostics { mean, variance, max_abs, clipped_count, threshold })
}

/// Estimated spectrum next to a reference one, with the worst deviation and
/// a per-order tolerance verdict: order i passes when
/// |estimate_i - reference_i| <= max(stderr_multiple * stderr_i, abs_floor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub estimates: Vec<ExponentEstimate>,
    pub reference: Vec<f64>,
    pub max_abs_dev: f64,
    pub within_tolerance: bool,
}

pub fn compare_spectrum(
    estimates: Vec<ExponentEstimate>,
    reference: Vec<f64>,
    stderr_multiple: f64,
    abs_floor: f64,
) -> Result<SpectrumReport> {
    if estimates.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates against {} reference values",
            estimates.len(),
            reference.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum comparison".into()));
    }
    let mut max_abs_dev = 0.0_f64;
    let mut within_tolerance = true;
    for (est, r) in estimates.iter().zip(&reference) {
        let dev = (est.value - r).abs();
        max_abs_dev = max_abs_dev.max(dev);
        if dev > (stderr_multiple * est.stderr).max(abs_floor) {
            within_tolerance = false;
        }
    }
    Ok(SpectrumReport { estimates, reference, max_abs_dev, within_tolerance })
}

/// Reference spectrum for an iid Gaussian ensemble at its configured scale;
/// entries scale * g shift every exponent by log(scale * sqrt(n)) relative
/// to the variance-1/n normalization. None for other families.
pub fn gaussian_reference(spec: &crate::ensembles::EnsembleSpec) -> Option<Vec<f64>> {
    match spec.family {
        Family::Gaussian => {
            let shift = (spec.scale * (spec.n as f64).sqrt()).ln();
            let mut mu = newman_exponents(spec.n).ok()?;
            for m in &mut mu {
                *m += shift;
            }
            Some(mu)
        }
        _ => None,
    }
}
