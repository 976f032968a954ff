//! Least-squares extraction of growth constants from norm sequences.
//!
//! A sequence obeying m_k ~ C R^k k!^e becomes affine after taking logs:
//! ln m_k = ln C + k ln R + e ln k!. Fitting that model by ordinary least
//! squares over k >= 2 recovers (C, R, e); the first two entries are
//! excluded because ln 0! = ln 1! = 0 makes them carry no information
//! about e while being the terms most distorted by lower-order effects.

use super::GevreyParams;
use crate::error::{Error, Result};
use crate::ring::ln_factorial;
use num_traits::ToPrimitive;

/// Output of [`fit_growth`]: the model m_k = C R^k k!^e fitted in
/// log space, with the RMS misfit of ln m_k and the number of sequence
/// entries that entered the fit.
#[derive(Debug, Clone, Copy)]
pub struct GrowthFit {
    pub fitted_c: f64,
    pub fitted_r: f64,
    pub fitted_exponent: f64,
    /// Root mean square of the log-space residuals.
    pub residual: f64,
    /// How many entries were usable (k >= 2, finite and positive).
    pub used: usize,
}

/// Straight-line least squares, for decay-rate checks on log-transformed
/// data.
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 means a perfect line.
    pub r2: f64,
}

/// Fits ln m_k = beta0 + beta1 k + beta2 ln k! over k >= 2 and returns
/// (C, R, e) = (exp beta0, exp beta1, beta2).
///
/// `norms[k]` is the norm of the order-k coefficient. Nonpositive or
/// non-finite entries are skipped with a warning (structural zeros are
/// common in sparse symbols and carry no growth information). Fewer than
/// five usable entries leave the three-parameter model underdetermined in
/// practice, so that is an error.
pub fn fit_growth(norms: &[f64], params: &GevreyParams) -> Result<GrowthFit> {
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (k, &m) in norms.iter().enumerate().skip(2) {
        if !(m.is_finite() && m > 0.0) {
            log::warn!("skipping order {k} in growth fit: norm {m} is not positive and finite");
            continue;
        }
        rows.push([1.0, k as f64, ln_factorial(k as u64)]);
        ys.push(m.ln());
    }
    let used = rows.len();
    if used < 5 {
        return Err(Error::InsufficientData(format!(
            "growth fit needs at least 5 usable norms at orders k >= 2, got {used}"
        )));
    }

    // Normal equations X^T X beta = X^T y for the 3-column design matrix.
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (row, &y) in rows.iter().zip(&ys) {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let beta = solve3(ata, aty).ok_or_else(|| {
        Error::InsufficientData("growth fit normal equations are singular".into())
    })?;

    let mut ss = 0.0;
    for (row, &y) in rows.iter().zip(&ys) {
        let pred = beta[0] * row[0] + beta[1] * row[1] + beta[2] * row[2];
        ss += (y - pred) * (y - pred);
    }
    let residual = (ss / used as f64).sqrt();
    let expected = ToPrimitive::to_f64(&params.growth_exponent()).unwrap_or(f64::NAN);
    log::debug!(
        "growth fit: exponent {:.4} (class predicts {expected:.4}), residual {residual:.3e}",
        beta[2]
    );
    Ok(GrowthFit {
        fitted_c: beta[0].exp(),
        fitted_r: beta[1].exp(),
        fitted_exponent: beta[2],
        residual,
        used,
    })
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("pivot magnitudes are finite")
        })?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for j in col..3 {
                a[row][j] -= f * a[col][j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for col in (0..3).rev() {
        let mut v = b[col];
        for j in col + 1..3 {
            v -= a[col][j] * x[j];
        }
        x[col] = v / a[col][col];
    }
    Some(x)
}

/// Ordinary least squares for y = slope x + intercept, with r^2.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs two matched samples at minimum, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "linear fit needs at least two distinct x values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}
