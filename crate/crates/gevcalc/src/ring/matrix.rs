use crate::error::{Error, Result};
use crate::ring::{NormValue, Ring, Scalar};
use serde_json::Value;

/// Residual bound for float-mode inversion: `nu(a * inv(a) - 1)` must not
/// exceed this times `max(1, nu(a))`, otherwise the matrix is reported as
/// not invertible.
pub const INVERSE_RESIDUAL_TOL: f64 = 1e-12;

/// Dense square matrix over a scalar ring, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<S> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> SquareMatrix<S> {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        SquareMatrix {
            dim,
            data: vec![S::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            m.data[i * dim + i] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Validation("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::Validation(format!(
                    "matrix is not square: {} rows but a row of length {}",
                    dim,
                    row.len()
                )));
            }
            data.extend(row.iter().cloned());
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.dim + j] = v;
    }

    pub fn trace(&self) -> S {
        let mut acc = S::zero();
        for i in 0..self.dim {
            acc = acc.add(self.get(i, i));
        }
        acc
    }

    /// Gauss-Jordan elimination on the augmented system [self | I].
    ///
    /// Pivot choice is deterministic: first nonzero row in exact mode,
    /// largest nu (first on ties) in float mode. Float results are residual
    /// checked; a failure reports the matrix as not invertible rather than
    /// returning garbage.
    fn gauss_jordan_inverse(&self) -> Result<Self> {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;

        for col in 0..n {
            let pivot_row = if S::EXACT {
                (col..n).find(|&r| !a[r * n + col].is_zero())
            } else {
                let mut best: Option<(usize, f64)> = None;
                for r in col..n {
                    let mag = a[r * n + col].nu().to_f64();
                    if mag > 0.0 && best.map_or(true, |(_, m)| mag > m) {
                        best = Some((r, mag));
                    }
                }
                best.map(|(r, _)| r)
            };
            let Some(pivot_row) = pivot_row else {
                return Err(Error::NonInvertible(format!(
                    "singular matrix (no pivot in column {col})"
                )));
            };
            if pivot_row != col {
                for j in 0..n {
                    a.swap(pivot_row * n + j, col * n + j);
                    inv.swap(pivot_row * n + j, col * n + j);
                }
            }
            let pinv = a[col * n + col].inv()?;
            for j in 0..n {
                a[col * n + j] = a[col * n + j].mul(&pinv);
                inv[col * n + j] = inv[col * n + j].mul(&pinv);
            }
            for r in 0..n {
                if r == col || a[r * n + col].is_zero() {
                    continue;
                }
                let f = a[r * n + col].clone();
                for j in 0..n {
                    a[r * n + j] = a[r * n + j].sub(&f.mul(&a[col * n + j]));
                    inv[r * n + j] = inv[r * n + j].sub(&f.mul(&inv[col * n + j]));
                }
            }
        }

        let result = SquareMatrix { dim: n, data: inv };
        if !S::EXACT {
            let residual = Ring::mul(self, &result)
                .sub(&Self::identity(n))
                .nu()
                .to_f64();
            let scale = f64::max(1.0, Ring::nu(self).to_f64());
            if !(residual <= INVERSE_RESIDUAL_TOL * scale) {
                return Err(Error::NonInvertible(format!(
                    "inverse residual {residual:.3e} exceeds {INVERSE_RESIDUAL_TOL:.0e} * {scale:.3e}"
                )));
            }
        }
        Ok(result)
    }
}

impl<S: Scalar> Ring for SquareMatrix<S> {
    type S = S;
    type Shape = usize;

    fn shape(&self) -> usize {
        self.dim
    }
    fn zeros(dim: usize) -> Self {
        Self::zero(dim)
    }
    fn one(dim: usize) -> Self {
        Self::identity(dim)
    }
    fn from_scalar(dim: usize, s: &S) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            m.data[i * dim + i] = s.clone();
        }
        m
    }

    fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.dim, o.dim, "matrix shape mismatch");
        SquareMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    fn sub(&self, o: &Self) -> Self {
        debug_assert_eq!(self.dim, o.dim, "matrix shape mismatch");
        SquareMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.dim, o.dim, "matrix shape mismatch");
        let n = self.dim;
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                // Fixed k-ascending accumulation keeps float sums canonical.
                let mut acc = S::zero();
                for k in 0..n {
                    acc = acc.add(&self.data[i * n + k].mul(&o.data[k * n + j]));
                }
                out.data[i * n + j] = acc;
            }
        }
        out
    }

    fn neg(&self) -> Self {
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a.neg()).collect(),
        }
    }

    fn scale(&self, s: &S) -> Self {
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a.mul(s)).collect(),
        }
    }

    fn is_zero(&self) -> bool {
        self.data.iter().all(|a| a.is_zero())
    }

    /// Induced max-column-sum of entrywise nu. With the scalar nu this is
    /// the operator norm for the ell-1 vector norm weighted by nu, hence
    /// submultiplicative and exactly computable in exact mode.
    fn nu(&self) -> S::N {
        let n = self.dim;
        let mut best = S::N::zero();
        for j in 0..n {
            let mut col = S::N::zero();
            for i in 0..n {
                col = col.add(&self.data[i * n + j].nu());
            }
            if col > best {
                best = col;
            }
        }
        best
    }

    fn inv(&self) -> Result<Self> {
        self.gauss_jordan_inverse()
    }

    fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = (0..self.dim)
            .map(|i| {
                Value::Array(
                    (0..self.dim)
                        .map(|j| Value::String(self.get(i, j).to_element_string()))
                        .collect(),
                )
            })
            .collect();
        Value::Array(rows)
    }

    fn from_json(v: &Value) -> Result<Self> {
        let Value::Array(rows) = v else {
            return Err(Error::Validation(format!(
                "expected a matrix (array of arrays), got {v}"
            )));
        };
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let Value::Array(cells) = row else {
                return Err(Error::Validation(format!(
                    "expected a matrix row (array), got {row}"
                )));
            };
            let parsed: Result<Vec<S>> = cells
                .iter()
                .map(|c| <S as Ring>::from_json(c))
                .collect();
            out.push(parsed?);
        }
        Self::from_rows(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{ComplexFloat, GaussianRational, Rat};

    fn gm(rows: &[&[i64]]) -> SquareMatrix<GaussianRational> {
        SquareMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| GaussianRational::from_i64(v)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn unipotent_inverse() {
        let m = gm(&[&[1, 1], &[0, 1]]);
        let inv = m.inv().unwrap();
        assert_eq!(inv, gm(&[&[1, -1], &[0, 1]]));
        assert_eq!(Ring::mul(&m, &inv), SquareMatrix::identity(2));
        assert_eq!(Ring::mul(&inv, &m), SquareMatrix::identity(2));
    }

    #[test]
    fn identity_nu_is_one() {
        let id = SquareMatrix::<GaussianRational>::identity(3);
        assert_eq!(Ring::nu(&id), Rat::from_integer(1.into()));
    }

    #[test]
    fn nu_is_max_column_sum_of_entrywise_nu() {
        // Columns sum to nu 1+0=1 and nu(1+1i)+nu(1)=3.
        let m = SquareMatrix::from_rows(vec![
            vec![GaussianRational::from_i64(1), GaussianRational::from_integers(1, 1)],
            vec![GaussianRational::zero(), GaussianRational::from_i64(1)],
        ])
        .unwrap();
        assert_eq!(Ring::nu(&m), Rat::from_integer(3.into()));
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = gm(&[&[1, 2], &[2, 4]]);
        assert!(matches!(m.inv(), Err(Error::NonInvertible(_))));
    }

    #[test]
    fn float_inverse_passes_residual_check() {
        let m = SquareMatrix::from_rows(vec![
            vec![ComplexFloat::new(2.0, 1.0), ComplexFloat::new(0.5, 0.0)],
            vec![ComplexFloat::new(0.0, -1.0), ComplexFloat::new(1.0, 3.0)],
        ])
        .unwrap();
        let inv = m.inv().unwrap();
        let resid = Ring::mul(&m, &inv).sub(&SquareMatrix::identity(2)).nu();
        assert!(resid <= INVERSE_RESIDUAL_TOL * Ring::nu(&m).max(1.0));
    }

    #[test]
    fn submultiplicative_nu_randomish() {
        let a = gm(&[&[3, -2], &[5, 7]]);
        let b = gm(&[&[-1, 4], &[2, -6]]);
        assert!(Ring::nu(&Ring::mul(&a, &b)) <= Ring::nu(&a) * Ring::nu(&b));
    }

    #[test]
    fn json_round_trip() {
        let m = gm(&[&[1, -2], &[0, 5]]);
        let v = m.to_json();
        let back = SquareMatrix::<GaussianRational>::from_json(&v).unwrap();
        assert_eq!(m, back);
    }
}
