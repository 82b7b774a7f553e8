//! Small dense complex matrices, column-major (`(r, c)` at `r + rows·c`),
//! i.e. the rank-2 case of the first-index-fastest tensor layout.

use crate::error::{LoheError, Result};
use crate::tensor::{MultiShape, TensorC, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct MatC {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

const ZERO: C64 = C64::new(0.0, 0.0);

impl MatC {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.data[k + n * k] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LoheError::MatrixDims {
                expected_rows: rows,
                expected_cols: cols,
                rows: data.len(),
                cols: 1,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Row-major nested input, convenient for literals in tests and presets.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(LoheError::MatrixDims {
                    expected_rows: r,
                    expected_cols: c,
                    rows: r,
                    cols: row.len(),
                });
            }
            for (j, &z) in row.iter().enumerate() {
                m.set(i, j, z);
            }
        }
        Ok(m)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r + self.rows * c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, z: C64) {
        self.data[r + self.rows * c] = z;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn matmul(&self, other: &MatC) -> Result<MatC> {
        if self.cols != other.rows {
            return Err(LoheError::MatrixDims {
                expected_rows: self.cols,
                expected_cols: other.cols,
                rows: other.rows,
                cols: other.cols,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        gemm(
            &self.data,
            self.rows,
            self.cols,
            &other.data,
            other.cols,
            &mut out.data,
        );
        Ok(out)
    }

    /// `self · other†`
    pub fn mul_adjoint(&self, other: &MatC) -> Result<MatC> {
        if self.cols != other.cols {
            return Err(LoheError::MatrixDims {
                expected_rows: other.rows,
                expected_cols: self.cols,
                rows: other.rows,
                cols: other.cols,
            });
        }
        let mut out = Self::zeros(self.rows, other.rows);
        gemm_nh(
            &self.data,
            self.rows,
            self.cols,
            &other.data,
            other.rows,
            &mut out.data,
        );
        Ok(out)
    }

    pub fn add(&self, other: &MatC) -> MatC {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        MatC {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &MatC) -> MatC {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        MatC {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> MatC {
        MatC {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> MatC {
        MatC {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max column sum of moduli.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|k| self.get(k, k)).sum()
    }

    /// `self ⊗ other` with `(self ⊗ other)[(r1·or + r2), …]`; used only for building operators.
    pub fn kron(&self, other: &MatC) -> MatC {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = MatC::zeros(rows, cols);
        for c1 in 0..self.cols {
            for r1 in 0..self.rows {
                let a = self.get(r1, c1);
                for c2 in 0..other.cols {
                    for r2 in 0..other.rows {
                        out.set(r1 * other.rows + r2, c1 * other.cols + c2, a * other.get(r2, c2));
                    }
                }
            }
        }
        out
    }

    /// `M · v` for a vector stored as a slice.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![ZERO; self.rows];
        for (c, &x) in v.iter().enumerate() {
            let col = &self.data[c * self.rows..(c + 1) * self.rows];
            for (o, &m) in out.iter_mut().zip(col) {
                *o += m * x;
            }
        }
        out
    }

    /// View a rank-2 tensor `[d1, d2]` as a `d1 × d2` matrix (identical layout).
    pub fn from_tensor(t: &TensorC) -> Result<MatC> {
        match t.shape().dims() {
            [r, c] => MatC::from_col_major(*r, *c, t.entries().to_vec()),
            dims => Err(LoheError::RankMismatch {
                expected: 2,
                found: dims.len(),
            }),
        }
    }

    pub fn to_tensor(&self) -> TensorC {
        let shape = MultiShape::new(vec![self.rows, self.cols]).expect("positive dims");
        TensorC::from_raw(shape, self.data.clone())
    }
}

/// `out = a (m×k) · b (k×n)`, all column-major; `out` must be zeroed.
#[inline]
pub(crate) fn gemm(a: &[C64], m: usize, k: usize, b: &[C64], n: usize, out: &mut [C64]) {
    for j in 0..n {
        let out_col = &mut out[j * m..(j + 1) * m];
        for l in 0..k {
            let blj = b[l + k * j];
            let a_col = &a[l * m..(l + 1) * m];
            for (o, &x) in out_col.iter_mut().zip(a_col) {
                *o += x * blj;
            }
        }
    }
}

/// `out = a (m×k) · b†` where `b` is (n×k); `out` is m×n and must be zeroed.
#[inline]
pub(crate) fn gemm_nh(a: &[C64], m: usize, k: usize, b: &[C64], n: usize, out: &mut [C64]) {
    for j in 0..n {
        let out_col = &mut out[j * m..(j + 1) * m];
        for l in 0..k {
            let bjl = b[j + n * l].conj();
            let a_col = &a[l * m..(l + 1) * m];
            for (o, &x) in out_col.iter_mut().zip(a_col) {
                *o += x * bjl;
            }
        }
    }
}

/// `out = a† · b` where `a` is (k×m), `b` is (k×n); `out` is m×n and must be zeroed.
#[inline]
pub(crate) fn gemm_hn(a: &[C64], k: usize, m: usize, b: &[C64], n: usize, out: &mut [C64]) {
    for j in 0..n {
        let b_col = &b[j * k..(j + 1) * k];
        for i in 0..m {
            let a_col = &a[i * k..(i + 1) * k];
            out[i + m * j] += crate::tensor::inner_slices(a_col, b_col);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matmul_and_adjoint_products_agree() {
        let a = MatC::from_rows(&[vec![c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.5)], vec![c(-2.0, 0.0), c(1.0, 1.0), c(0.0, 0.0)]]).unwrap();
        let b = MatC::from_rows(&[vec![c(0.5, 0.0), c(1.0, -1.0), c(2.0, 2.0)], vec![c(1.0, 0.0), c(0.0, 3.0), c(-1.0, 0.0)]]).unwrap();
        let direct = a.matmul(&b.adjoint()).unwrap();
        let fused = a.mul_adjoint(&b).unwrap();
        assert!(direct.sub(&fused).frobenius_norm() < 1e-14);

        let mut hn = MatC::zeros(3, 3);
        gemm_hn(a.data(), 2, 3, b.data(), 3, hn.data_mut());
        let expect = a.adjoint().matmul(&b).unwrap();
        assert!(expect.sub(&hn).frobenius_norm() < 1e-14);
    }

    #[test]
    fn dimension_errors() {
        let a = MatC::zeros(2, 3);
        assert!(a.matmul(&MatC::zeros(2, 3)).is_err());
        assert!(a.mul_adjoint(&MatC::zeros(3, 2)).is_err());
        assert!(MatC::from_col_major(2, 2, vec![ZERO; 3]).is_err());
    }

    #[test]
    fn kron_with_identity_is_block_diagonal() {
        let h = MatC::from_real_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let k = MatC::identity(2).kron(&h);
        assert_eq!(k.get(0, 1), c(2.0, 0.0));
        assert_eq!(k.get(2, 3), c(2.0, 0.0));
        assert_eq!(k.get(0, 2), ZERO);
    }
}
