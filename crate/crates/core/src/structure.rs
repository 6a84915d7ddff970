//! Arithmetic structure diagnostics: least common denominators, lattice
//! direction nets, and small-ball probability estimation.
//!
//! The least common denominator of a vector measures how close its positive
//! multiples come to the integer lattice:
//!
//! ```text
//! lcd(x) = inf { theta > 0 : dist(theta x, Z^n) < min(gamma |theta x|, kappa) }
//! ```
//!
//! A small value means some modest dilation of x nearly hits integer points
//! (x is "structured"); a large value certifies that no dilation up to the
//! search bound does. Structured directions are exactly the ones on which
//! sums ξ_1 x_1 + ... + ξ_n x_n of iid discrete atoms concentrate on atoms of
//! large probability, which [`small_ball_estimate`] measures directly.
//!
//! The infimum is over a continuous ray, computed here by a grid scan with
//! local bisection. Admissible windows narrower than `grid_step` can be
//! missed, so reported values are exact only to grid resolution; every
//! returned witness, however, is re-verified against the defining strict
//! inequality, and a result without a witness certifies the infimum is at
//! least `theta_max` at that resolution.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Default exponent c in kappa = n^c and D = exp(n^c) for [`membership_s`].
pub const DEFAULT_LCD_EXPONENT_C: f64 = 0.05;

/// Relative slack turning the strict "<" of the definition into a grid test
/// that floating point can satisfy at the boundary. Relative to the bound,
/// not absolute: an absolute slack would make every tiny theta admissible.
const ADMISSIBILITY_SLACK: f64 = 1e-12;

/// Bisection refines the first admissible grid cell to this fraction of one
/// grid step.
const BISECTION_REFINE: f64 = 1e-3;

/// Search parameters for [`lcd`]: the denominator tolerance is
/// min(gamma * |theta x|, kappa), the scan covers (0, theta_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcdQuery {
    pub gamma: f64,
    pub kappa: f64,
    pub theta_max: f64,
    pub grid_step: f64,
}

impl LcdQuery {
    /// Query with the default grid resolution min(gamma, 1)/100.
    pub fn new(gamma: f64, kappa: f64, theta_max: f64) -> Result<Self> {
        let q = Self { gamma, kappa, theta_max, grid_step: gamma.min(1.0) / 100.0 };
        q.validate()?;
        Ok(q)
    }

    pub fn with_grid_step(mut self, grid_step: f64) -> Result<Self> {
        self.grid_step = grid_step;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma = {} must lie strictly in (0, 1)",
                self.gamma
            )));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa = {} must be positive", self.kappa)));
        }
        if !(self.theta_max > 0.0 && self.theta_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "theta_max = {} must be positive and finite",
                self.theta_max
            )));
        }
        let cap = self.gamma.min(1.0) / 10.0;
        if !(self.grid_step > 0.0 && self.grid_step <= cap) {
            return Err(Error::InvalidArgument(format!(
                "grid_step = {} must lie in (0, {cap}]",
                self.grid_step
            )));
        }
        Ok(())
    }
}

/// Outcome of an LCD search. A present witness satisfies the defining strict
/// inequality exactly as re-evaluated; an absent witness means no admissible
/// theta was found and `value` equals the search bound, certifying
/// lcd >= theta_max at grid resolution. `witness_phi` is set only by
/// [`joint_lcd`] and records the minimizing angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcdResult {
    pub value: f64,
    pub witness_theta: Option<f64>,
    pub witness_lattice_point: Option<Vec<i64>>,
    pub witness_phi: Option<f64>,
}

impl LcdResult {
    /// True when the search certified lcd >= theta_max instead of finding an
    /// admissible dilation.
    pub fn is_lower_bound(&self) -> bool {
        self.witness_theta.is_none()
    }
}

fn validate_vector(x: &DVector<f64>) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("vector must be nonempty".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("vector must be finite".into()));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("vector must be nonzero".into()));
    }
    Ok(())
}

/// dist(theta x, Z^n) and the nearest lattice point, coordinate-wise rounding.
fn lattice_distance(x: &DVector<f64>, theta: f64) -> (f64, Vec<i64>) {
    let mut dist2 = 0.0;
    let mut point = Vec::with_capacity(x.len());
    for &xi in x.iter() {
        let r = theta * xi;
        let nearest = r.round();
        let d = r - nearest;
        dist2 += d * d;
        point.push(nearest as i64);
    }
    (dist2.sqrt(), point)
}

fn admissible(x: &DVector<f64>, norm_x: f64, q: &LcdQuery, theta: f64) -> bool {
    let (dist, _) = lattice_distance(x, theta);
    let bound = (q.gamma * theta * norm_x).min(q.kappa);
    dist <= bound * (1.0 + ADMISSIBILITY_SLACK)
}

/// Least common denominator of `x` by grid scan plus local bisection.
///
/// The scan visits theta = grid_step, 2 grid_step, ... up to theta_max. On
/// the first admissible point the preceding grid cell is bisected down to
/// grid_step/1000 and the infimum is reported from below (the inadmissible
/// end). The witness is the admissible end, re-verified strictly; in the
/// rare case the strict inequality fails at the boundary the witness is
/// advanced by refinement steps until it holds.
pub fn lcd(x: &DVector<f64>, q: &LcdQuery) -> Result<LcdResult> {
    q.validate()?;
    validate_vector(x)?;
    let norm_x = x.norm();
    let steps = (q.theta_max / q.grid_step).floor() as u64;
    let mut hit = None;
    for j in 1..=steps {
        let theta = j as f64 * q.grid_step;
        if admissible(x, norm_x, q, theta) {
            hit = Some(theta);
            break;
        }
    }
    let Some(first) = hit else {
        return Ok(LcdResult {
            value: q.theta_max,
            witness_theta: None,
            witness_lattice_point: None,
            witness_phi: None,
        });
    };
    let mut lo = first - q.grid_step;
    let mut hi = first;
    let refine = q.grid_step * BISECTION_REFINE;
    while hi - lo > refine {
        let mid = 0.5 * (lo + hi);
        if admissible(x, norm_x, q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Certify the witness against the strict definition, without slack.
    let mut witness = hi;
    for _ in 0..1000 {
        let (dist, point) = lattice_distance(x, witness);
        if dist < (q.gamma * witness * norm_x).min(q.kappa) {
            return Ok(LcdResult {
                value: lo.max(0.0),
                witness_theta: Some(witness),
                witness_lattice_point: Some(point),
                witness_phi: None,
            });
        }
        witness += refine;
    }
    Ok(LcdResult {
        value: lo.max(0.0),
        witness_theta: None,
        witness_lattice_point: None,
        witness_phi: None,
    })
}

/// Joint LCD of a pair: the minimum of [`lcd`] over unit-circle combinations
/// cos(phi) x + sin(phi) y on `angle_grid` equispaced angles phi in [0, pi).
/// The minimizing angle is returned in `witness_phi`. Angles whose
/// combination vanishes exactly (y a negative multiple of x) are skipped.
pub fn joint_lcd(
    x: &DVector<f64>,
    y: &DVector<f64>,
    q: &LcdQuery,
    angle_grid: usize,
) -> Result<LcdResult> {
    q.validate()?;
    if angle_grid == 0 {
        return Err(Error::InvalidArgument("angle_grid must be >= 1".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "joint lcd over vectors of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("vectors must be finite".into()));
    }
    let mut best: Option<LcdResult> = None;
    for k in 0..angle_grid {
        let phi = k as f64 * std::f64::consts::PI / angle_grid as f64;
        let z = x * phi.cos() + y * phi.sin();
        if z.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut r = lcd(&z, q)?;
        if best.as_ref().map_or(true, |b| r.value < b.value) {
            r.witness_phi = Some(phi);
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("x and y must not both be zero".into()))
}

/// Unit directions of the nonzero integer points in the ball of radius
/// 3 * d0, one per ray (p and 2p collapse; p and -p stay distinct). For
/// vectors with lcd in [d0, 2 d0] under cap `kappa` this family is a
/// (2 kappa / d0)-net. Output is sorted coordinate-lexicographically.
///
/// Enumeration materializes every direction, so besides the stated domain
/// (n <= 4, d0 <= 50) the box size (6 d0 + 1)^n is capped at 2e8 points.
pub fn lcd_net(d0: f64, n: usize, kappa: f64) -> Result<Vec<DVector<f64>>> {
    if n == 0 || n > 4 {
        return Err(Error::InvalidArgument(format!("net dimension n = {n} must lie in 1..=4")));
    }
    if !(d0 > 0.0 && d0 <= 50.0) {
        return Err(Error::InvalidArgument(format!("d0 = {d0} must lie in (0, 50]")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("kappa = {kappa} must be positive")));
    }
    let radius = 3.0 * d0;
    let r = radius.floor() as i64;
    let side = 2 * r + 1;
    if (side as f64).powi(n as i32) > 2e8 {
        return Err(Error::InvalidArgument(format!(
            "net enumeration over {side}^{n} lattice points is too large to materialize"
        )));
    }
    let r2 = radius * radius;
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut directions = Vec::new();
    let mut p = vec![-r; n];
    'outer: loop {
        let norm2: i64 = p.iter().map(|&c| c * c).sum();
        if norm2 > 0 && (norm2 as f64) <= r2 {
            let g = p.iter().fold(0i64, |acc, &c| gcd(acc, c.abs()));
            let primitive: Vec<i64> = p.iter().map(|&c| c / g).collect();
            if seen.insert(primitive.clone()) {
                let norm = (primitive.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
                directions
                    .push(DVector::from_iterator(n, primitive.iter().map(|&c| c as f64 / norm)));
            }
        }
        for i in 0..n {
            if p[i] < r {
                p[i] += 1;
                continue 'outer;
            }
            p[i] = -r;
        }
        break;
    }
    directions.sort_by(|a, b| {
        a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(directions)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Small-ball probability of the weighted atom sum S = sum_i xi_i x_i:
/// the maximum over a fixed centered grid of 21 targets v in [-3, 3] of the
/// empirical P(|S - v| <= eps). Atoms are drawn unscaled (unit variance)
/// from the family of `spec`, which must be an iid scalar-atom family.
/// Trials parallelize over per-trial streams of `seed`, so the estimate is
/// independent of thread count and bitwise reproducible.
pub fn small_ball_estimate(
    x: &DVector<f64>,
    eps: f64,
    spec: &EnsembleSpec,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    validate_vector(x)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if !spec.family.has_scalar_atoms() {
        return Err(Error::NonIidFamily(format!(
            "small-ball estimation draws scalar atoms; family {} has none",
            spec.family.name()
        )));
    }
    const GRID: usize = 21;
    let targets: Vec<f64> = (0..GRID).map(|j| -3.0 + 0.3 * j as f64).collect();
    let counts = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = RngStream::new(seed, trial as u64).rng();
            let atoms = spec
                .sample_atoms(x.len(), &mut rng)
                .expect("family validated to have scalar atoms");
            let s: f64 = atoms.iter().zip(x.iter()).map(|(a, xi)| a * xi).sum();
            let mut mask = 0u32;
            for (j, v) in targets.iter().enumerate() {
                if (s - v).abs() <= eps {
                    mask |= 1 << j;
                }
            }
            mask
        })
        .fold(
            || [0u64; GRID],
            |mut acc, mask| {
                for (j, c) in acc.iter_mut().enumerate() {
                    *c += u64::from(mask >> j & 1);
                }
                acc
            },
        )
        .reduce(
            || [0u64; GRID],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let peak = counts.iter().copied().max().unwrap_or(0);
    Ok(peak as f64 / trials as f64)
}

/// Whether the direction x lies in the large-LCD set
/// { x : lcd(x) >= D } with gamma = 1/2, kappa = n^c, D = exp(n^c),
/// decided by an LCD search truncated at theta_max = min(exp(n^c), 1e6)
/// on a 0.05 grid. True means the truncated search certified the lower
/// bound; for n with exp(n^c) > 1e6 this is a surrogate for the full test.
pub fn membership_s(x: &DVector<f64>, c: f64) -> Result<bool> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidArgument(format!("exponent c = {c} must lie in (0, 1)")));
    }
    validate_vector(x)?;
    let n = x.len() as f64;
    let cap = n.powf(c);
    let q = LcdQuery { gamma: 0.5, kappa: cap, theta_max: cap.exp().min(1e6), grid_step: 0.05 };
    Ok(lcd(x, &q)?.is_lower_bound())
}
