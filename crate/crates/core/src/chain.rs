//! Renormalized chain estimators for Lyapunov exponents of matrix products.
//!
//! All estimators consume the product B_N = A_N ... A_1 one factor at a time,
//! renormalizing so that nothing overflows, and average per-step log growth:
//!
//! ```text
//! top exponent        x_{i+1} = A_{i+1} x_i / |A_{i+1} x_i|
//!                     value   = (1/N) sum_i log |A_{i+1} x_i|
//!
//! second-order pair   the pair (x_i, y_i) spans the evolved plane; the
//!                     increment is
//!                     log [ V2(A x_i, A y_i) / V2(x_i, y_i) ]
//!                     with V2 the parallelogram area, estimating g1 + g2
//!
//! spectrum (QR)       an orthonormal n x k frame Q is advanced by
//!                     A Q = Q' R (R diagonal positive); the j-th estimate
//!                     averages log R_jj, giving g1 >= ... >= gk
//!
//! least exponent      v_i = unit orthocomplement of the evolved frame
//!                     span(A_{i-1}..A_1 e_1, ..., A_{i-1}..A_1 e_{n-1});
//!                     d_i = 1 / |A_i^{-T} v_i| is the distance from A_i v_i
//!                     to the image hyperplane, and value = (1/N) sum log d_i
//! ```
//!
//! Each recursion telescopes exactly: the top sum equals log |B_N x_0|, the
//! pair sum equals log V2(B_N x_0, B_N y_0) - log V2(x_0, y_0), and the
//! distance sum equals the log distance from B_N e_n to the span of the
//! other columns. The pair increment is invariant under changes of basis of
//! the evolved plane (numerator and denominator pick up the same basis
//! determinant), so the pair state is kept orthonormal and the areas come
//! from a QR diagonal; this stays accurate even when the two images align,
//! where the raw Gram determinant of individually normalized vectors would
//! cancel to rounding noise. Integration tests recompute all three sums
//! against explicit dense products on identical streams.
//!
//! Discrete ensembles can produce exact collapses (a zero image, a zero
//! wedge, a singular factor). In floating point an exact cancellation leaves
//! a residual near 1e-16 of the operand scale rather than a true zero, so
//! collapse is detected at a relative floor well above that noise and well
//! below anything a surviving run produces. The chain then stops
//! accumulating, keeps the truncated sum, and reports `died = true` with the
//! fatal step; dead runs are data for the tail harness, not errors.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::linalg;
pub use crate::linalg::wedge_volume_2;
use crate::rng::RngStream;

/// Renormalization guard: vectors and wedges are rescaled early whenever a
/// norm leaves this range, so renorm_every > 1 cannot overflow.
const RENORM_GUARD: f64 = 1e100;

/// One chain run: ensemble, length, stream identity and bookkeeping knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub ensemble: EnsembleSpec,
    /// Number of factors N in the product.
    pub n_steps: usize,
    pub seed: u64,
    pub stream_id: u64,
    /// Steps between renormalizations for the top and QR estimators. 1 (the
    /// default) renormalizes after every factor; larger values are a
    /// performance knob only. The pair and least estimators re-orthonormalize
    /// every step regardless.
    pub renorm_every: usize,
    /// Keep the per-step log increments on the estimate.
    pub record_increments: bool,
}

impl ChainConfig {
    pub fn new(ensemble: EnsembleSpec, n_steps: usize, seed: u64) -> Self {
        Self { ensemble, n_steps, seed, stream_id: 0, renorm_every: 1, record_increments: false }
    }

    pub fn with_stream(mut self, stream_id: u64) -> Self {
        self.stream_id = stream_id;
        self
    }

    pub fn with_renorm_every(mut self, renorm_every: usize) -> Self {
        self.renorm_every = renorm_every;
        self
    }

    pub fn recording_increments(mut self, record: bool) -> Self {
        self.record_increments = record;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
        }
        if self.renorm_every == 0 {
            return Err(Error::InvalidArgument("renorm_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Estimate of one Lyapunov exponent (or an exponent sum) from a single chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    /// Which exponent the value targets: 1 for the top, k for the k-th QR
    /// estimate, 2 for the pair sum g1+g2, the dimension for the least.
    pub order: usize,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub increments: Option<Vec<f64>>,
    /// Sample standard deviation of the increments scaled to the mean:
    /// std * sqrt(count) / N. Zero when fewer than two increments exist.
    pub stderr: f64,
    #[serde(rename = "N")]
    pub n_steps: usize,
    #[serde(rename = "n")]
    pub dim: usize,
    pub died: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub died_at: Option<usize>,
}

/// Streaming mean/variance (Welford) over the increments.
struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Self { count: 0, mean: 0.0, m2: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn sample_std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }
}

/// Shared increment bookkeeping for all four estimators.
struct Accumulator {
    sum: f64,
    welford: Welford,
    increments: Option<Vec<f64>>,
    died_at: Option<usize>,
}

impl Accumulator {
    fn new(record: bool, capacity: usize) -> Self {
        Self {
            sum: 0.0,
            welford: Welford::new(),
            increments: record.then(|| Vec::with_capacity(capacity)),
            died_at: None,
        }
    }

    fn push(&mut self, increment: f64) {
        self.sum += increment;
        self.welford.push(increment);
        if let Some(v) = self.increments.as_mut() {
            v.push(increment);
        }
    }

    fn finish(self, order: usize, cfg: &ChainConfig) -> ExponentEstimate {
        let n = cfg.n_steps as f64;
        let count = self.welford.count as f64;
        ExponentEstimate {
            order,
            value: self.sum / n,
            stderr: self.welford.sample_std() * count.sqrt() / n,
            increments: self.increments,
            n_steps: cfg.n_steps,
            dim: cfg.ensemble.dim(),
            died: self.died_at.is_some(),
            died_at: self.died_at,
        }
    }
}

/// Step-indexed factor source. Chains consume exactly one matrix per step in
/// step order and draw nothing else from the stream, so an oracle can replay
/// the identical factors from the same (seed, stream_id).
struct StepSource<'a> {
    spec: &'a EnsembleSpec,
    rng: ChaCha12Rng,
    step: u64,
}

impl<'a> StepSource<'a> {
    fn new(cfg: &'a ChainConfig) -> Self {
        Self {
            spec: &cfg.ensemble,
            rng: RngStream::new(cfg.seed, cfg.stream_id).rng(),
            step: 0,
        }
    }

    fn fill_next(&mut self, out: &mut DMatrix<f64>) {
        self.spec.fill_step_matrix(self.step, &mut self.rng, out);
        self.step += 1;
    }
}

fn unit_start(dim: usize, x0: Option<&DVector<f64>>, axis: usize) -> Result<DVector<f64>> {
    match x0 {
        None => {
            let mut v = DVector::zeros(dim);
            v[axis] = 1.0;
            Ok(v)
        }
        Some(v) => {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "start vector has length {}, ensemble dimension is {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("start vector must be finite".into()));
            }
            let norm = v.norm();
            if norm == 0.0 {
                return Err(Error::InvalidArgument("start vector must be nonzero".into()));
            }
            Ok(v / norm)
        }
    }
}

/// Top-exponent vector iteration. `x0` defaults to e_1 and is normalized on
/// entry. The estimate value is (1/N) log |B_N x_0| up to rounding.
pub fn top_exponent(cfg: &ChainConfig, x0: Option<&DVector<f64>>) -> Result<ExponentEstimate> {
    cfg.validate()?;
    let dim = cfg.ensemble.dim();
    let mut x = unit_start(dim, x0, 0)?;
    let mut source = StepSource::new(cfg);
    let mut a = DMatrix::zeros(dim, dim);
    let mut y = DVector::zeros(dim);
    let mut acc = Accumulator::new(cfg.record_increments, cfg.n_steps);
    // log |x| of the stored iterate; nonzero only between renormalizations.
    let mut log_scale = 0.0;
    let mut x_norm = 1.0;
    for i in 1..=cfg.n_steps {
        source.fill_next(&mut a);
        y.gemv(1.0, &a, &x, 0.0);
        let norm = y.norm();
        // A mathematically zero image rounds to ~1e-16 * |A| * |x|, not 0.
        if !norm.is_finite() || norm <= linalg::COLLAPSE_RATIO * a.amax() * x_norm {
            acc.died_at = Some(i);
            break;
        }
        acc.push(norm.ln() - log_scale);
        std::mem::swap(&mut x, &mut y);
        if i % cfg.renorm_every == 0 || !(1.0 / RENORM_GUARD..=RENORM_GUARD).contains(&norm) {
            x.scale_mut(1.0 / norm);
            log_scale = 0.0;
            x_norm = 1.0;
        } else {
            log_scale = norm.ln();
            x_norm = norm;
        }
    }
    Ok(acc.finish(1, cfg))
}

/// Pair iteration estimating the sum of the two leading exponents. The
/// increment is the log ratio of parallelogram areas before and after one
/// factor; that ratio only depends on the evolved plane, so the stored pair
/// is re-orthonormalized every step (renorm_every has no effect here) and
/// each increment is the log area of the two images of an orthonormal pair,
/// read off a QR diagonal. Start vectors default to (e_1, e_2), are
/// normalized on entry, and must be linearly independent; the sum telescopes
/// to log V2(B_N x_0, B_N y_0) - log V2(x_0, y_0).
pub fn second_exponent_pair(
    cfg: &ChainConfig,
    x0: Option<&DVector<f64>>,
    y0: Option<&DVector<f64>>,
) -> Result<ExponentEstimate> {
    cfg.validate()?;
    let dim = cfg.ensemble.dim();
    if dim < 2 {
        return Err(Error::InvalidArgument("pair estimation needs dimension >= 2".into()));
    }
    let x = unit_start(dim, x0, 0)?;
    let y = unit_start(dim, y0, 1)?;
    let mut frame = DMatrix::zeros(dim, 2);
    frame.column_mut(0).copy_from(&x);
    frame.column_mut(1).copy_from(&y);
    let mut q = DMatrix::zeros(dim, 2);
    let mut rdiag = [0.0; 2];
    if linalg::mgs_orthonormalize(&frame, &mut q, &mut rdiag).is_some() {
        return Err(Error::InvalidArgument("start pair must be linearly independent".into()));
    }
    frame.copy_from(&q);
    let mut source = StepSource::new(cfg);
    let mut a = DMatrix::zeros(dim, dim);
    let mut product = DMatrix::zeros(dim, 2);
    let mut acc = Accumulator::new(cfg.record_increments, cfg.n_steps);
    for i in 1..=cfg.n_steps {
        source.fill_next(&mut a);
        product.gemm(1.0, &a, &frame, 0.0);
        let pmax = product.amax();
        // Both images near zero, or a rank collapse between them: dead.
        if !pmax.is_finite() || pmax <= linalg::COLLAPSE_RATIO * a.amax() {
            acc.died_at = Some(i);
            break;
        }
        if linalg::mgs_orthonormalize(&product, &mut q, &mut rdiag).is_some() {
            acc.died_at = Some(i);
            break;
        }
        acc.push(rdiag[0].ln() + rdiag[1].ln());
        frame.copy_from(&q);
    }
    Ok(acc.finish(2, cfg))
}

/// QR (orthonormal frame) estimator of the k leading exponents. The frame
/// starts as the first k coordinate axes; each step factors A Q with a
/// positive R diagonal and averages log R_jj per order j. With
/// renorm_every > 1 the factorization happens once per block and the
/// recorded increments are per block, which leaves the totals unchanged.
pub fn spectrum_qr(cfg: &ChainConfig, k: usize) -> Result<Vec<ExponentEstimate>> {
    cfg.validate()?;
    let dim = cfg.ensemble.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!(
            "spectrum order count k={k} must lie in 1..={dim}"
        )));
    }
    let mut frame = DMatrix::identity(dim, k);
    let mut source = StepSource::new(cfg);
    let mut a = DMatrix::zeros(dim, dim);
    let mut product = DMatrix::zeros(dim, k);
    let mut q = DMatrix::zeros(dim, k);
    let mut rdiag = vec![0.0; k];
    let mut accs: Vec<Accumulator> = (0..k)
        .map(|_| Accumulator::new(cfg.record_increments, cfg.n_steps / cfg.renorm_every + 1))
        .collect();
    let mut died_at = None;
    let mut frame_scale = 1.0;
    for i in 1..=cfg.n_steps {
        source.fill_next(&mut a);
        product.gemm(1.0, &a, &frame, 0.0);
        let amax = product.amax();
        // The factor annihilated the whole frame: every order is dead.
        if !amax.is_finite() || amax <= linalg::COLLAPSE_RATIO * a.amax() * frame_scale {
            died_at = Some(i);
            break;
        }
        let renorm_now = i % cfg.renorm_every == 0
            || i == cfg.n_steps
            || !(1.0 / RENORM_GUARD..=RENORM_GUARD).contains(&amax);
        if renorm_now {
            if let Some(bad) = linalg::mgs_orthonormalize(&product, &mut q, &mut rdiag) {
                // Orders below the collapsed column still advanced this block.
                for (j, acc) in accs.iter_mut().enumerate().take(bad) {
                    acc.push(rdiag[j].ln());
                }
                died_at = Some(i);
                break;
            }
            for (j, acc) in accs.iter_mut().enumerate() {
                acc.push(rdiag[j].ln());
            }
            frame.copy_from(&q);
            frame_scale = 1.0;
        } else {
            std::mem::swap(&mut frame, &mut product);
            frame_scale = amax;
        }
    }
    Ok(accs
        .into_iter()
        .enumerate()
        .map(|(j, mut acc)| {
            acc.died_at = died_at;
            acc.finish(j + 1, cfg)
        })
        .collect())
}

/// Unit vector orthogonal to n-1 spanning vectors of dimension n. Errors if
/// the input is not exactly one short of the dimension or is rank deficient
/// at a relative tolerance of 1e-10. Deterministic: the seed axis is the
/// coordinate direction with the largest residual, and the sign makes the
/// largest-magnitude coordinate positive (ties toward the lowest index).
pub fn orthocomplement_vector(vectors: &[DVector<f64>]) -> Result<DVector<f64>> {
    let k = vectors.len();
    if k == 0 {
        return Err(Error::InvalidArgument("orthocomplement needs at least one vector".into()));
    }
    let n = vectors[0].len();
    if n != k + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{k} vectors of dimension {n}; expected dimension {}",
            k + 1
        )));
    }
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch("vectors differ in length".into()));
    }
    let m = DMatrix::from_columns(vectors);
    let max_norm = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max_norm == 0.0 || !max_norm.is_finite() {
        return Err(Error::InvalidArgument("vectors must be finite and not all zero".into()));
    }
    let mut q = DMatrix::zeros(n, k);
    let mut rdiag = vec![0.0; k];
    if linalg::mgs_orthonormalize(&m, &mut q, &mut rdiag).is_some()
        || rdiag.iter().any(|&r| r <= linalg::RANK_TOLERANCE * max_norm)
    {
        return Err(Error::RankDeficient { tolerance: linalg::RANK_TOLERANCE });
    }
    linalg::orthocomplement_of_orthonormal(&q)
}

/// Least-exponent estimator via hyperplane distances. The orthonormal
/// (n-1)-frame spanning the evolved first n-1 coordinate directions is
/// advanced and re-orthonormalized every step (renorm_every has no effect
/// here: the orthocomplement needs the frame orthonormal anyway). Death
/// occurs on a singular factor or frame collapse.
pub fn least_exponent_distance(cfg: &ChainConfig) -> Result<ExponentEstimate> {
    cfg.validate()?;
    let dim = cfg.ensemble.dim();
    let k = dim - 1;
    let mut frame = DMatrix::identity(dim, k);
    let mut source = StepSource::new(cfg);
    let mut a = DMatrix::zeros(dim, dim);
    let mut product = DMatrix::zeros(dim, k);
    let mut q = DMatrix::zeros(dim, k);
    let mut rdiag = vec![0.0; k];
    let mut acc = Accumulator::new(cfg.record_increments, cfg.n_steps);
    for i in 1..=cfg.n_steps {
        let v = linalg::orthocomplement_of_orthonormal(&frame)
            .expect("orthonormal frame always has an orthocomplement");
        source.fill_next(&mut a);
        let died = match linalg::solve_transpose(&a, &v) {
            None => true,
            Some(w) => {
                let norm = w.norm();
                if norm == 0.0 || !norm.is_finite() {
                    true
                } else {
                    // distance to the image hyperplane: d = 1 / |A^{-T} v|
                    acc.push(-norm.ln());
                    false
                }
            }
        };
        if died {
            acc.died_at = Some(i);
            break;
        }
        product.gemm(1.0, &a, &frame, 0.0);
        if linalg::mgs_orthonormalize(&product, &mut q, &mut rdiag).is_some() {
            acc.died_at = Some(i);
            break;
        }
        frame.copy_from(&q);
    }
    Ok(acc.finish(dim, cfg))
}
