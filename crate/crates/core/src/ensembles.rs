//! Random matrix ensembles feeding the chain estimators.
//!
//! The iid families (Gaussian, Rademacher, symmetric uniform, two-point)
//! draw every entry independently as `scale * atom`, where the atom law has
//! mean 0 and variance 1 and `scale` defaults to 1/sqrt(n). Two structured
//! families share the chain machinery: a deterministic 2x2 shift cocycle
//! driven by an irrational rotation, and a 2n x 2n symplectic one-step
//! transfer matrix built from a Gaussian Wigner block. A fixed-matrix family
//! exists as a deterministic hook for validation runs.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the quasi-periodic shift cocycle. The step-j matrix is
///
/// ```text
/// [ f(x0 + j*omega mod 1) - energy   -1 ]
/// [             1                     0 ]
/// ```
///
/// with f a finite trigonometric polynomial: `cos_coeffs[k]` multiplies
/// cos(2*pi*k*x) (so index 0 is the constant term) and `sin_coeffs[k]`
/// multiplies sin(2*pi*(k+1)*x). Every step matrix has determinant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    pub energy: f64,
    pub omega: f64,
    pub x0: f64,
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
}

impl ShiftParams {
    /// Evaluates the sampling function f at a torus point.
    pub fn f(&self, x: f64) -> f64 {
        let two_pi = std::f64::consts::TAU;
        let mut v = 0.0;
        for (k, c) in self.cos_coeffs.iter().enumerate() {
            v += c * (two_pi * k as f64 * x).cos();
        }
        for (k, s) in self.sin_coeffs.iter().enumerate() {
            v += s * (two_pi * (k + 1) as f64 * x).sin();
        }
        v
    }
}

/// Parameters of the symplectic Wigner transfer matrix
///
/// ```text
/// [ lambda*W - energy*I   -I ]
/// [          I             0 ]
/// ```
///
/// where W is symmetric with Gaussian entries of variance 1/n (diagonal
/// included). The matrix is 2n x 2n and symplectic for every draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticParams {
    pub lambda: f64,
    pub energy: f64,
}

/// Matrix law. Payload-free variants are the scalar-atom iid families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    Rademacher,
    UniformSym,
    /// Two-atom law taking `a` with probability `p` and `b` otherwise.
    /// The constructor affinely normalizes the atoms to mean 0, variance 1.
    TwoPoint { p: f64, a: f64, b: f64 },
    ShiftCocycle(ShiftParams),
    SymplecticWigner(SymplecticParams),
    /// Deterministic hook: every step applies the same matrix.
    Fixed { matrix: Vec<Vec<f64>> },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Rademacher => "rademacher",
            Family::UniformSym => "uniform_sym",
            Family::TwoPoint { .. } => "two_point",
            Family::ShiftCocycle(_) => "shift_cocycle",
            Family::SymplecticWigner(_) => "symplectic_wigner",
            Family::Fixed { .. } => "fixed",
        }
    }

    pub fn has_scalar_atoms(&self) -> bool {
        matches!(
            self,
            Family::Gaussian | Family::Rademacher | Family::UniformSym | Family::TwoPoint { .. }
        )
    }
}

/// A fully specified matrix ensemble: family, size parameter n, entry scale
/// (iid families only) and the subgaussian moment constant recorded with runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub family: Family,
    pub n: usize,
    pub scale: f64,
    pub subgaussian_k: f64,
}

impl EnsembleSpec {
    fn iid(family: Family, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("ensemble size n must be >= 1".into()));
        }
        Ok(Self { family, n, scale: 1.0 / (n as f64).sqrt(), subgaussian_k: 1.0 })
    }

    pub fn gaussian(n: usize) -> Result<Self> {
        Self::iid(Family::Gaussian, n)
    }

    pub fn rademacher(n: usize) -> Result<Self> {
        Self::iid(Family::Rademacher, n)
    }

    pub fn uniform_sym(n: usize) -> Result<Self> {
        Self::iid(Family::UniformSym, n)
    }

    /// Two-point ensemble. Accepts any distinct finite atoms and p in (0,1);
    /// the stored atoms are the affine normalization to mean 0, variance 1.
    pub fn two_point(n: usize, p: f64, a: f64, b: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("two-point p must lie in (0,1), got {p}")));
        }
        if !a.is_finite() || !b.is_finite() || a == b {
            return Err(Error::InvalidArgument("two-point atoms must be finite and distinct".into()));
        }
        let mean = p * a + (1.0 - p) * b;
        let var = p * (a - mean).powi(2) + (1.0 - p) * (b - mean).powi(2);
        let sd = var.sqrt();
        Self::iid(Family::TwoPoint { p, a: (a - mean) / sd, b: (b - mean) / sd }, n)
    }

    pub fn shift_cocycle(params: ShiftParams) -> Result<Self> {
        if !params.omega.is_finite() || !params.x0.is_finite() || !params.energy.is_finite() {
            return Err(Error::InvalidArgument("shift cocycle parameters must be finite".into()));
        }
        if params.cos_coeffs.iter().chain(&params.sin_coeffs).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("shift cocycle coefficients must be finite".into()));
        }
        Ok(Self { family: Family::ShiftCocycle(params), n: 2, scale: 1.0, subgaussian_k: 1.0 })
    }

    /// Symplectic Wigner ensemble of half-dimension n (the matrix is 2n x 2n).
    /// Any finite energy defines a valid matrix; the closed-form reference
    /// additionally needs 0 < |energy| < 2 and checks that itself.
    pub fn symplectic_wigner(n: usize, lambda: f64, energy: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("symplectic half-dimension n must be >= 1".into()));
        }
        if !lambda.is_finite() || !energy.is_finite() {
            return Err(Error::InvalidArgument("symplectic parameters must be finite".into()));
        }
        let family = Family::SymplecticWigner(SymplecticParams { lambda, energy });
        Ok(Self { family, n, scale: 1.0, subgaussian_k: 1.0 })
    }

    /// Deterministic single-matrix ensemble (validation hook).
    pub fn fixed(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch("fixed matrix must be square and nonempty".into()));
        }
        let rows = matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(Self { family: Family::Fixed { matrix: rows }, n: matrix.nrows(), scale: 1.0, subgaussian_k: 1.0 })
    }

    /// Overrides the entry scale. Only meaningful for scalar-atom families.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !self.family.has_scalar_atoms() {
            return Err(Error::InvalidArgument(format!(
                "scale applies only to iid scalar-atom families, not {}",
                self.family.name()
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument(format!("scale must be positive and finite, got {scale}")));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn with_subgaussian_k(mut self, k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("subgaussian constant must be positive, got {k}")));
        }
        self.subgaussian_k = k;
        Ok(self)
    }

    /// Dimension of the matrices this ensemble produces.
    pub fn dim(&self) -> usize {
        match &self.family {
            Family::ShiftCocycle(_) => 2,
            Family::SymplecticWigner(_) => 2 * self.n,
            _ => self.n,
        }
    }

    /// Draws one matrix for a random family. Rejects the deterministic shift
    /// cocycle, whose step matrices come from [`shift_cocycle_matrix`].
    pub fn sample_matrix(&self, rng: &mut ChaCha12Rng) -> Result<DMatrix<f64>> {
        match &self.family {
            Family::ShiftCocycle(_) => Err(Error::NonIidFamily(
                "shift_cocycle is deterministic per step; use shift_cocycle_matrix".into(),
            )),
            Family::SymplecticWigner(p) => Ok(symplectic_matrix(self.n, p, rng)),
            Family::Fixed { matrix } => Ok(fixed_to_dmatrix(matrix)),
            _ => {
                let mut atoms = AtomSampler::new(self)?;
                let n = self.n;
                let mut m = DMatrix::zeros(n, n);
                // Row-major fill order is part of the reproducibility contract.
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = self.scale * atoms.next(rng);
                    }
                }
                Ok(m)
            }
        }
    }

    /// Draws one unit-variance atom. Only scalar-atom families qualify.
    pub fn sample_atoms(&self, count: usize, rng: &mut ChaCha12Rng) -> Result<Vec<f64>> {
        let mut atoms = AtomSampler::new(self)?;
        Ok((0..count).map(|_| atoms.next(rng)).collect())
    }

    /// Matrix applied at a given 0-based chain step. Deterministic families
    /// use the step index; random families draw from the stream.
    pub(crate) fn step_matrix(&self, step: u64, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        self.fill_step_matrix(step, rng, &mut m);
        m
    }

    /// In-place variant of [`Self::step_matrix`] for the chain loops.
    pub(crate) fn fill_step_matrix(&self, step: u64, rng: &mut ChaCha12Rng, out: &mut DMatrix<f64>) {
        debug_assert_eq!(out.nrows(), self.dim());
        debug_assert_eq!(out.ncols(), self.dim());
        match &self.family {
            Family::ShiftCocycle(p) => {
                out.copy_from(&shift_cocycle_matrix(p, step));
            }
            Family::SymplecticWigner(p) => {
                fill_symplectic(self.n, p, rng, out);
            }
            Family::Fixed { matrix } => {
                let n = matrix.len();
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] = matrix[i][j];
                    }
                }
            }
            _ => {
                let mut atoms = AtomSampler::new(self).expect("scalar-atom family");
                let n = self.n;
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] = self.scale * atoms.next(rng);
                    }
                }
            }
        }
    }
}

/// The 2x2 cocycle matrix at shift step j (torus point x0 + j*omega mod 1).
pub fn shift_cocycle_matrix(params: &ShiftParams, j: u64) -> DMatrix<f64> {
    let x = (params.x0 + j as f64 * params.omega).rem_euclid(1.0);
    let a = params.f(x) - params.energy;
    DMatrix::from_row_slice(2, 2, &[a, -1.0, 1.0, 0.0])
}

/// One draw of the 2n x 2n symplectic transfer matrix. The symmetric Wigner
/// block consumes its Gaussian draws in row-major upper-triangle order
/// (diagonal included), which fixes the reproducible sample layout.
pub fn symplectic_matrix(n: usize, params: &SymplecticParams, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    fill_symplectic(n, params, rng, &mut m);
    m
}

fn fill_symplectic(n: usize, params: &SymplecticParams, rng: &mut ChaCha12Rng, m: &mut DMatrix<f64>) {
    let sd = params.lambda / (n as f64).sqrt();
    m.fill(0.0);
    for i in 0..n {
        for j in i..n {
            let g: f64 = rng.sample(StandardNormal);
            m[(i, j)] = sd * g;
            m[(j, i)] = sd * g;
        }
    }
    for i in 0..n {
        m[(i, i)] -= params.energy;
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
}

fn fixed_to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Per-call atom source. Rademacher draws are packed 64 to a word; the cache
/// never outlives one call, so sampling stays a pure function of rng state.
struct AtomSampler<'a> {
    spec: &'a EnsembleSpec,
    bits: u64,
    bits_left: u32,
}

impl<'a> AtomSampler<'a> {
    fn new(spec: &'a EnsembleSpec) -> Result<Self> {
        if !spec.family.has_scalar_atoms() {
            return Err(Error::NonIidFamily(format!(
                "{} has no scalar atom law",
                spec.family.name()
            )));
        }
        Ok(Self { spec, bits: 0, bits_left: 0 })
    }

    fn next(&mut self, rng: &mut ChaCha12Rng) -> f64 {
        match &self.spec.family {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Rademacher => {
                if self.bits_left == 0 {
                    self.bits = rng.gen::<u64>();
                    self.bits_left = 64;
                }
                let bit = self.bits & 1;
                self.bits >>= 1;
                self.bits_left -= 1;
                if bit == 1 { 1.0 } else { -1.0 }
            }
            // Var of uniform on [-sqrt(3), sqrt(3)] is exactly 1.
            Family::UniformSym => (2.0 * rng.gen::<f64>() - 1.0) * 3.0_f64.sqrt(),
            Family::TwoPoint { p, a, b } => {
                if rng.gen::<f64>() < *p { *a } else { *b }
            }
            _ => unreachable!("constructor rejects non-atom families"),
        }
    }
}
