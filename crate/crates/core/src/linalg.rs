//! Small dense complex matrices and Hermitian positive-definite solves.
//!
//! Storage is column-major so a transmit stream's channel column is a
//! contiguous slice.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Builds a matrix from column-major entries, rejecting wrong lengths
    /// and non-finite values.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let m = Self { rows, cols, data };
        if !m.is_finite() {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(m)
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[Complex<T>]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let mut col_major = Vec::with_capacity(data.len());
        for c in 0..cols {
            for r in 0..rows {
                col_major.push(data[r * cols + c]);
            }
        }
        Self::from_column_major(rows, cols, col_major)
    }

    pub fn from_columns(columns: &[Vec<Complex<T>>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        Self::from_column_major(rows, columns.len(), columns.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_column_major(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Column `c` as a contiguous slice.
    #[inline]
    pub fn column(&self, c: usize) -> &[Complex<T>] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn hermitian(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    /// `self += scale * v v^H`.
    pub fn add_outer(&mut self, v: &[Complex<T>], scale: T) {
        debug_assert!(self.is_square() && v.len() == self.rows);
        let n = self.rows;
        for c in 0..n {
            let vc = v[c].conj() * scale;
            for r in 0..n {
                self.data[c * n + r] += v[r] * vc;
            }
        }
    }

    /// `self += s * I`.
    pub fn add_diagonal(&mut self, s: T) {
        debug_assert!(self.is_square());
        for i in 0..self.rows {
            self[(i, i)].re += s;
        }
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.cols, "vector length must equal column count");
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.rows];
        for (c, &xc) in x.iter().enumerate() {
            for (yr, &a) in y.iter_mut().zip(self.column(c)) {
                *yr += a * xc;
            }
        }
        y
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for c in 0..rhs.cols {
            let col = self.mul_vec(rhs.column(c));
            out.data[c * self.rows..(c + 1) * self.rows].copy_from_slice(&col);
        }
        Ok(out)
    }

    /// Largest elementwise modulus of `self - self^H`.
    pub fn hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        for c in 0..self.cols {
            for r in 0..self.rows {
                let d = (self[(r, c)] - self[(c, r)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Cholesky factorisation `A = L L^H` of a Hermitian positive-definite
    /// matrix. Only the lower triangle of `self` is read.
    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "cholesky of {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut diag = self[(j, j)].re;
            for k in 0..j {
                diag -= l[(j, k)].norm_sqr();
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: diag.as_f64(),
                });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = Complex::new(ljj, T::zero());
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }
}

impl<T> std::ops::Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        &self.data[c * self.rows + r]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[c * self.rows + r]
    }
}

/// Lower-triangular Cholesky factor.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: ComplexMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factor of the Gram matrix `A A^H` for an `n x k` matrix `A` (`k >= n`),
    /// taken from a Householder QR of `A^H` so that `A A^H` is never formed.
    /// The factor's condition number is the square root of the Gram
    /// matrix's, which keeps strong interferers from swamping the noise term.
    pub fn of_gram(a: &ComplexMatrix<T>) -> Result<Self> {
        let (n, k) = (a.rows(), a.cols());
        if k < n {
            return Err(Error::DimensionMismatch(format!(
                "gram factor needs at least {n} columns, got {k}"
            )));
        }
        let zero = Complex::new(T::zero(), T::zero());
        // b = A^H, reduced in place to upper-triangular R
        let mut b = a.hermitian();
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let norm = (j..k).map(|i| b[(i, j)].norm_sqr()).fold(T::zero(), |x, y| x + y).sqrt();
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: (norm * norm).as_f64(),
                });
            }
            let x0 = b[(j, j)];
            let phase = if x0.norm() > T::zero() { x0 / x0.norm() } else { Complex::new(T::one(), T::zero()) };
            let alpha = -phase * norm;
            // v = x - alpha e1, reflector H = I - 2 v v^H / (v^H v)
            let mut v: Vec<Complex<T>> = (j..k).map(|i| b[(i, j)]).collect();
            v[0] -= alpha;
            let vv = v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |x, y| x + y);
            if vv > T::zero() {
                let two = T::one() + T::one();
                for c in j..n {
                    let dot = v.iter().enumerate().fold(zero, |s, (t, vi)| s + vi.conj() * b[(j + t, c)]);
                    let f = dot * (two / vv);
                    for (t, vi) in v.iter().enumerate() {
                        b[(j + t, c)] -= vi * f;
                    }
                }
            }
            // R row j times conj(phase of R_jj) makes the diagonal real positive
            let rjj = b[(j, j)];
            let unit = if rjj.norm() > T::zero() { rjj.conj() / rjj.norm() } else { Complex::new(T::one(), T::zero()) };
            for c in j..n {
                l[(c, j)] = (b[(j, c)] * unit).conj();
            }
            l[(j, j)] = Complex::new(rjj.norm(), T::zero());
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &ComplexMatrix<T> {
        &self.l
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.l.rows();
        assert_eq!(b.len(), n, "rhs length must equal matrix order");
        // forward: L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)].re;
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)].conj() * y[k];
            }
            y[i] = s / self.l[(i, i)].re;
        }
        y
    }

    /// `x^H A x` evaluated as `||L^H x||^2`, which avoids the cancellation of
    /// forming `A x` first.
    pub fn quadratic_form(&self, x: &[Complex<T>]) -> T {
        let n = self.l.rows();
        assert_eq!(x.len(), n, "vector length must equal matrix order");
        (0..n)
            .map(|i| {
                (i..n)
                    .fold(Complex::new(T::zero(), T::zero()), |s, k| s + self.l[(k, i)].conj() * x[k])
                    .norm_sqr()
            })
            .fold(T::zero(), |a, b| a + b)
    }
}

/// `x^H y`.
pub fn inner<T: Scalar>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    x.iter()
        .zip(y)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
}

/// `x^H A x` for Hermitian `A`; the result is real.
pub fn hermitian_form<T: Scalar>(a: &ComplexMatrix<T>, x: &[Complex<T>]) -> T {
    inner(x, &a.mul_vec(x)).re
}
