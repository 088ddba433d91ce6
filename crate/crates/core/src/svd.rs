//! Thin SVD by one-sided Jacobi rotations.
//!
//! nalgebra's bidiagonal SVD occasionally returns factors whose product is far
//! from the input (relative errors up to 1e-1 on exactly low-rank matrices),
//! which breaks the proximal steps built on top of it. One-sided Jacobi is
//! accurate to working precision. Rotating the columns of `A·V₀`, where `V₀`
//! diagonalizes the Gram matrix, means only a few cleanup sweeps are needed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Thin SVD `x = U·diag(σ)·Vᵀ` with `σ` sorted descending; `U` is
/// `m×k`, `Vᵀ` is `k×n`, `k = min(m, n)`. Singular vectors on the shorter
/// side that belong to zero singular values are left as zeros.
pub(crate) fn thin_svd(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = x.shape();
    if m < n {
        let (u, s, v_t) = thin_svd(&x.transpose())?;
        return Ok((v_t.transpose(), s, u.transpose()));
    }
    let k = n;
    if k == 0 {
        return Ok((
            DMatrix::zeros(m, 0),
            DVector::zeros(0),
            DMatrix::zeros(0, n),
        ));
    }

    // Precondition with the eigenvectors of the Gram matrix.
    let eig = x.tr_mul(x).symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = DMatrix::from_fn(k, k, |i, j| eig.eigenvectors[(i, order[j])]);
    reorthonormalize(&mut v);
    let mut b = x * &v;

    let tol = f64::EPSILON * (m as f64).sqrt();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        // Squared column norms, refreshed each sweep and updated exactly per
        // rotation in between.
        let mut sq: Vec<f64> = (0..k).map(|j| b.column(j).norm_squared()).collect();
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (alpha, beta) = (sq[p], sq[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let (bp, bq) = column_pair(&mut b, p, q);
                let gamma: f64 = bp.iter().zip(bq.iter()).map(|(x, y)| x * y).sum();
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(bp, bq, c, s);
                let (vp, vq) = column_pair(&mut v, p, q);
                rotate(vp, vq, c, s);
                sq[p] = (alpha - t * gamma).max(0.0);
                sq[q] = beta + t * gamma;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdFailed {
            context: format!("{m}x{n} matrix after {MAX_SWEEPS} Jacobi sweeps"),
        });
    }

    let norms: Vec<f64> = (0..k).map(|j| b.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let sigma = DVector::from_iterator(k, order.iter().map(|&j| norms[j]));
    let mut u = DMatrix::zeros(m, k);
    let mut v_t = DMatrix::zeros(k, n);
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > 0.0 {
            u.set_column(dst, &(b.column(src) / norms[src]));
        }
        v_t.set_row(dst, &v.column(src).transpose());
    }
    Ok((u, sigma, v_t))
}

/// Singular values only, sorted descending.
pub(crate) fn singular_values(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    thin_svd(x).map(|(_, s, _)| s)
}

/// Disjoint mutable views of columns `p < q` of a column-major matrix.
fn column_pair(a: &mut DMatrix<f64>, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    let rows = a.nrows();
    let (left, right) = a.as_mut_slice().split_at_mut(q * rows);
    (&mut left[p * rows..(p + 1) * rows], &mut right[..rows])
}

fn rotate(xp: &mut [f64], xq: &mut [f64], c: f64, s: f64) {
    for (x, y) in xp.iter_mut().zip(xq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Modified Gram–Schmidt, twice, to make the eigenvector basis orthogonal to
/// working precision; any drift would otherwise survive into `x ≈ B·Vᵀ`.
fn reorthonormalize(v: &mut DMatrix<f64>) {
    let k = v.ncols();
    for _ in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let (ci, cj) = column_pair(v, i, j);
                let proj: f64 = ci.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
                cj.iter_mut()
                    .zip(ci.iter())
                    .for_each(|(b, a)| *b -= proj * a);
            }
            let norm = v.column(j).norm();
            v.column_mut(j).unscale_mut(norm);
        }
    }
}
