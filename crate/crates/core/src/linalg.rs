//! Dense kernels shared by the chain estimators.
//!
//! Everything here is deterministic and allocation-free on the hot path: the
//! chain loops call these once per step. The QR factorization is modified
//! Gram-Schmidt with a second orthogonalization pass and a nonnegative
//! diagonal by construction, which is the sign convention the per-step
//! log increments rely on. Column-major storage makes each column a
//! contiguous slice, so the kernels work on raw slices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rank tolerance for orthocomplement extraction, relative to the largest
/// input column norm.
pub(crate) const RANK_TOLERANCE: f64 = 1e-10;

/// Relative pivot threshold below which a matrix counts as singular in the
/// transpose-solve. Exactly singular discrete draws land near machine noise
/// (1e-16 of the entry scale) while nonsingular sign matrices at small n stay
/// above ~1e-4 of it, so the two populations are cleanly separated.
pub(crate) const SINGULAR_PIVOT_RATIO: f64 = 1e-8;

/// Relative floor below which a norm or QR pivot counts as an exact collapse
/// realized in floating point. Cancellations that are exact in real
/// arithmetic leave residuals near 1e-15 of the operand scale, while the
/// smallest values a surviving chain produces at the sizes the estimators
/// target stay above 1e-8 of it.
pub(crate) const COLLAPSE_RATIO: f64 = 1e-12;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Area of the parallelogram spanned by u and v, via the Gram determinant
/// sqrt(|u|^2 |v|^2 - <u,v>^2), clamped at 0 against rounding.
pub fn wedge_volume_2(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    assert_eq!(u.len(), v.len(), "wedge_volume_2 needs equal dimensions");
    let uu = u.norm_squared();
    let vv = v.norm_squared();
    let uv = u.dot(v);
    (uu * vv - uv * uv).max(0.0).sqrt()
}

/// Modified Gram-Schmidt of the columns of `m` into `q`, with `rdiag[j]`
/// receiving the nonnegative diagonal of R. Returns the index of the first
/// column whose residual collapses, meaning it is non-finite or at most
/// COLLAPSE_RATIO times the largest input column norm (rank deficiency
/// leaves residuals at rounding level, not exactly zero); earlier columns
/// of `q` are still valid in that case.
pub(crate) fn mgs_orthonormalize(
    m: &DMatrix<f64>,
    q: &mut DMatrix<f64>,
    rdiag: &mut [f64],
) -> Option<usize> {
    let n = m.nrows();
    let k = m.ncols();
    debug_assert_eq!(q.nrows(), n);
    debug_assert_eq!(q.ncols(), k);
    debug_assert_eq!(rdiag.len(), k);
    q.copy_from(m);
    let data = q.as_mut_slice();
    let mut max_col = 0.0_f64;
    for j in 0..k {
        let col = &data[j * n..(j + 1) * n];
        max_col = max_col.max(dot(col, col).sqrt());
    }
    let floor = COLLAPSE_RATIO * max_col;
    for j in 0..k {
        let (done, rest) = data.split_at_mut(j * n);
        let cur = &mut rest[..n];
        // Two projection passes keep the frame orthonormal to machine
        // precision over long products.
        for _ in 0..2 {
            for l in 0..j {
                let ql = &done[l * n..(l + 1) * n];
                let proj = dot(ql, cur);
                axpy(cur, -proj, ql);
            }
        }
        let norm = dot(cur, cur).sqrt();
        rdiag[j] = norm;
        if !norm.is_finite() || norm <= floor {
            return Some(j);
        }
        let inv = 1.0 / norm;
        for x in cur.iter_mut() {
            *x *= inv;
        }
    }
    None
}

/// Unit vector orthogonal to the span of an orthonormal n x (n-1) frame
/// (any column count below n works). The seed coordinate axis is the one
/// with the largest residual norm (ties toward the lowest index); the sign
/// is fixed so the largest-magnitude coordinate of the result is positive
/// (ties toward the lowest index).
pub(crate) fn orthocomplement_of_orthonormal(frame: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = frame.nrows();
    let k = frame.ncols();
    let cols = frame.as_slice();
    // Residual norm of e_c against an orthonormal frame is 1 - |row c|^2.
    let mut best_c = 0;
    let mut best_res = f64::NEG_INFINITY;
    for c in 0..n {
        let row_sq: f64 = (0..k).map(|j| cols[j * n + c] * cols[j * n + c]).sum();
        let res = 1.0 - row_sq;
        if res > best_res {
            best_res = res;
            best_c = c;
        }
    }
    let mut v = DVector::zeros(n);
    v[best_c] = 1.0;
    let vd = v.as_mut_slice();
    for _ in 0..2 {
        for j in 0..k {
            let qj = &cols[j * n..(j + 1) * n];
            let proj = dot(qj, vd);
            axpy(vd, -proj, qj);
        }
    }
    let norm = dot(vd, vd).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::RankDeficient { tolerance: RANK_TOLERANCE });
    }
    v.scale_mut(1.0 / norm);
    fix_sign(&mut v);
    Ok(v)
}

/// Flips v so its largest-magnitude coordinate is positive (ties: lowest index).
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let mut idx = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.neg_mut();
    }
}

/// Solves A^T w = v by Gaussian elimination with partial pivoting.
/// Returns None when A is singular at the relative pivot threshold, which the
/// chain treats as death of the run.
pub(crate) fn solve_transpose(a: &DMatrix<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(v.len(), n);
    let mut m = a.transpose();
    let mut w = v.clone();
    let threshold = SINGULAR_PIVOT_RATIO * a.amax();
    for col in 0..n {
        let mut piv = col;
        let mut piv_abs = m[(col, col)].abs();
        for r in (col + 1)..n {
            let x = m[(r, col)].abs();
            if x > piv_abs {
                piv_abs = x;
                piv = r;
            }
        }
        if !(piv_abs > threshold) || !piv_abs.is_finite() {
            return None;
        }
        if piv != col {
            m.swap_rows(piv, col);
            w.swap_rows(piv, col);
        }
        let d = m[(col, col)];
        for r in (col + 1)..n {
            let factor = m[(r, col)] / d;
            if factor == 0.0 {
                continue;
            }
            for c in (col + 1)..n {
                m[(r, c)] -= factor * m[(col, c)];
            }
            w[r] -= factor * w[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = w[col];
        for c in (col + 1)..n {
            s -= m[(col, c)] * w[c];
        }
        w[col] = s / m[(col, col)];
    }
    if w.iter().all(|x| x.is_finite()) {
        Some(w)
    } else {
        None
    }
}

/// log |det A| via the same pivoted elimination, None when singular at the
/// shared threshold. Used by the determinant identity checks.
pub(crate) fn log_abs_det(a: &DMatrix<f64>) -> Option<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let threshold = SINGULAR_PIVOT_RATIO * a.amax();
    let mut acc = 0.0;
    for col in 0..n {
        let mut piv = col;
        let mut piv_abs = m[(col, col)].abs();
        for r in (col + 1)..n {
            let x = m[(r, col)].abs();
            if x > piv_abs {
                piv_abs = x;
                piv = r;
            }
        }
        if !(piv_abs > threshold) || !piv_abs.is_finite() {
            return None;
        }
        if piv != col {
            m.swap_rows(piv, col);
        }
        acc += piv_abs.ln();
        let d = m[(col, col)];
        for r in (col + 1)..n {
            let factor = m[(r, col)] / d;
            if factor == 0.0 {
                continue;
            }
            for c in (col + 1)..n {
                m[(r, c)] -= factor * m[(col, c)];
            }
        }
    }
    Some(acc)
}

/// Distance from y to the span of the columns of `basis` (any rank), via two
/// orthogonalization passes against an MGS basis of the columns.
pub(crate) fn distance_to_span(basis: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let k = basis.ncols();
    let n = basis.nrows();
    let mut q = DMatrix::zeros(n, k);
    let mut rdiag = vec![0.0; k];
    let collapse = mgs_orthonormalize(basis, &mut q, &mut rdiag);
    let cols = collapse.unwrap_or(k);
    let mut r = y.clone();
    let rd = r.as_mut_slice();
    let qd = q.as_slice();
    for _ in 0..2 {
        for j in 0..cols {
            let qj = &qd[j * n..(j + 1) * n];
            let proj = dot(qj, rd);
            axpy(rd, -proj, qj);
        }
    }
    r.norm()
}
