//! Dense Hermitian eigendecomposition for small complex matrices.
//!
//! The contour pipeline needs spectra only to validate gap windows, count
//! eigenvalues, and cross-check leading projectors, always on operator
//! families with a handful of levels. Cyclic complex Jacobi fits: it
//! converges unconditionally on Hermitian input, accumulates an explicitly
//! unitary eigenvector matrix, and its quadratic sweep cost is irrelevant
//! at these dimensions.

use crate::error::{Error, Result};
use crate::ring::{ComplexFloat, SquareMatrix};
use num_complex::Complex64;

/// Off-diagonal Frobenius target relative to the input scale; sweeps stop
/// once the remaining off-diagonal mass drops below it.
const SWEEP_TARGET: f64 = 1e-14;

/// Hard cap on Jacobi sweeps. Quadratic convergence reaches the target in a
/// handful of sweeps at the dimensions used here; hitting the cap means the
/// input was far from Hermitian despite passing the defect check.
const MAX_SWEEPS: usize = 64;

/// An eigendecomposition: `values` ascending, `vectors` unitary with column
/// `k` the eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: SquareMatrix<ComplexFloat>,
}

/// Largest entrywise deviation from the conjugate transpose.
pub fn hermitian_defect(m: &SquareMatrix<ComplexFloat>) -> f64 {
    let n = m.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let d = (m.get(i, j).0 - m.get(j, i).0.conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.
///
/// The input must be Hermitian within `herm_tol` relative to its largest
/// entry; the iteration then runs on the Hermitian average (A + A*)/2, so
/// tolerated rounding asymmetry cannot leak into the result.
pub fn eigh(m: &SquareMatrix<ComplexFloat>, herm_tol: f64) -> Result<Eigh> {
    let n = m.dim();
    let scale = matrix_scale(m);
    let defect = hermitian_defect(m);
    if defect > herm_tol * scale.max(1.0) {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian: defect {defect:.3e} exceeds tolerance \
             {herm_tol:.3e} at scale {scale:.3e}"
        )));
    }

    // Hermitian average, dense row-major copy.
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m.get(i, j).0 + m.get(j, i).0.conj());
        }
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }

    let target = SWEEP_TARGET * (1.0 + frobenius(&a));
    let mut converged = off_diagonal(&a, n) <= target;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
        converged = off_diagonal(&a, n) <= target;
    }
    if !converged {
        return Err(Error::Validation(
            "Jacobi iteration did not reach its off-diagonal target; \
             the input is too far from Hermitian"
                .into(),
        ));
    }

    // Diagonal entries are real by construction; sort ascending and carry
    // the eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values: Vec<f64> = order.iter().map(|&k| a[k * n + k].re).collect();
    let mut vectors = SquareMatrix::zero(n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, ComplexFloat(v[row * n + k]));
        }
    }
    Ok(Eigh { values, vectors })
}

/// Spectral projector onto the eigenvalues inside the open window, together
/// with how many eigenvalues the window holds.
pub fn spectral_projector(
    m: &SquareMatrix<ComplexFloat>,
    window: (f64, f64),
    herm_tol: f64,
) -> Result<(SquareMatrix<ComplexFloat>, usize)> {
    let n = m.dim();
    let eig = eigh(m, herm_tol)?;
    let mut proj: SquareMatrix<ComplexFloat> = SquareMatrix::zero(n);
    let mut count = 0;
    for (k, lambda) in eig.values.iter().enumerate() {
        if !(window.0 < *lambda && *lambda < window.1) {
            continue;
        }
        count += 1;
        for i in 0..n {
            for j in 0..n {
                let term = eig.vectors.get(i, k).0 * eig.vectors.get(j, k).0.conj();
                let cur = proj.get(i, j).0;
                proj.set(i, j, ComplexFloat(cur + term));
            }
        }
    }
    Ok((proj, count))
}

fn matrix_scale(m: &SquareMatrix<ComplexFloat>) -> f64 {
    let n = m.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max(m.get(i, j).0.norm());
        }
    }
    worst
}

fn frobenius(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn off_diagonal(a: &[Complex64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[i * n + j].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// One Jacobi rotation zeroing the (p, q) entry: A <- U* A U and V <- V U
/// with U the identity outside the (p, q) plane and
///
/// ```text
/// U[p][p] = c,               U[p][q] = s e^{i phi},
/// U[q][p] = -s e^{-i phi},   U[q][q] = c,
/// ```
///
/// where a_pq = r e^{i phi} and tan(2 theta) = 2 r / (a_qq - a_pp) picks the
/// rotation angle with |theta| <= pi/4 (the stable smaller root).
fn rotate(a: &mut [Complex64], v: &mut [Complex64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let r = apq.norm();
    if r < f64::MIN_POSITIVE {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        1.0 / (tau - (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let phase = apq / r;
    let sp = s * phase;
    let spc = s * phase.conj();

    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - spc * akq;
        a[k * n + q] = sp * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - sp * aqk;
        a[q * n + k] = spc * apk + c * aqk;
    }
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - spc * vkq;
        v[k * n + q] = sp * vkp + c * vkq;
    }
    // Exact arithmetic would make these exactly zero and exactly real;
    // writing it keeps rounding residue out of later sweeps.
    a[p * n + q] = Complex64::new(0.0, 0.0);
    a[q * n + p] = Complex64::new(0.0, 0.0);
    a[p * n + p].im = 0.0;
    a[q * n + q].im = 0.0;
}
