//! MMSE post-processing SNR (PPSNR) of one receiver facing a desired and
//! an optional interfering spatially multiplexed transmitter.
//!
//! For stream `m` of the desired link at subcarrier `i` the receiver forms
//!
//! ```text
//! C = (1/M1) sum_{l != m} h_l h_l^H + (1/M2) sum_l g_l g_l^H + noise * I
//! W = sqrt(1/M1) C^-1 h_m
//! D = W^H C W
//! PPSNR = (1/M1) |W^H h_m|^2 / D
//! ```
//!
//! where `h_l` are columns of the desired channel and `g_l` columns of the
//! interference channel. The same routine serves true and estimated channels.
//!
//! `C` is factored from its square root rather than formed explicitly; with
//! an interferer tens of dB above the noise, forming `C` in floating point
//! already costs most of the accuracy of the result.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{inner, Cholesky, ComplexMatrix};
use crate::scalar::Scalar;

/// Per-subcarrier, per-stream linear PPSNR values of one link.
#[derive(Clone, Debug, PartialEq)]
pub struct PpsnrGrid<T> {
    n_subcarriers: usize,
    n_streams: usize,
    // subcarrier-major
    values: Vec<T>,
}

impl<T: Scalar> PpsnrGrid<T> {
    /// Wraps raw values laid out subcarrier-major (`values[i * n_streams + m]`).
    pub fn new(n_subcarriers: usize, n_streams: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n_subcarriers * n_streams || n_subcarriers == 0 || n_streams == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_subcarriers}x{n_streams} PPSNR grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= T::zero()) {
            return Err(Error::NonFinite("PPSNR grid (values must be positive and finite)"));
        }
        Ok(Self {
            n_subcarriers,
            n_streams,
            values,
        })
    }

    /// Grid where every subcarrier of every stream has the same value.
    pub fn flat(n_subcarriers: usize, n_streams: usize, value: T) -> Result<Self> {
        Self::new(n_subcarriers, n_streams, vec![value; n_subcarriers * n_streams])
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_streams(&self) -> usize {
        self.n_streams
    }

    #[inline]
    pub fn get(&self, subcarrier: usize, stream: usize) -> T {
        self.values[subcarrier * self.n_streams + stream]
    }

    /// Values of one stream across all subcarriers.
    pub fn stream(&self, stream: usize) -> impl Iterator<Item = T> + '_ {
        assert!(stream < self.n_streams, "stream index out of range");
        self.values
            .iter()
            .skip(stream)
            .step_by(self.n_streams)
            .copied()
    }
}

/// Interference-plus-noise covariance seen by desired stream `stream` at one
/// subcarrier.
pub fn interference_covariance<T: Scalar>(
    desired: &ComplexMatrix<T>,
    interferer: Option<&ComplexMatrix<T>>,
    m1: usize,
    m2: usize,
    stream: usize,
    noise_power: T,
) -> ComplexMatrix<T> {
    let n = desired.rows();
    let mut cov = ComplexMatrix::zeros(n, n);
    let own = T::one() / T::of_usize(m1);
    for l in (0..m1).filter(|&l| l != stream) {
        cov.add_outer(desired.column(l), own);
    }
    // zero interfering streams: the interference sum is empty
    if m2 > 0 {
        let other = interferer.expect("interferer channel required when m2 > 0");
        let w = T::one() / T::of_usize(m2);
        for l in 0..m2 {
            cov.add_outer(other.column(l), w);
        }
    }
    cov.add_diagonal(noise_power);
    cov
}

/// Square root `A` of [`interference_covariance`], `C = A A^H`: the other
/// desired streams and the interfering streams scaled by their power split,
/// followed by `sqrt(noise) I`.
pub fn interference_sqrt<T: Scalar>(
    desired: &ComplexMatrix<T>,
    interferer: Option<&ComplexMatrix<T>>,
    m1: usize,
    m2: usize,
    stream: usize,
    noise_power: T,
) -> ComplexMatrix<T> {
    let n = desired.rows();
    let mut columns: Vec<Vec<Complex<T>>> = Vec::with_capacity(m1 + m2 + n);
    let own = (T::one() / T::of_usize(m1)).sqrt();
    for l in (0..m1).filter(|&l| l != stream) {
        columns.push(desired.column(l).iter().map(|z| z * own).collect());
    }
    if m2 > 0 {
        let other = interferer.expect("interferer channel required when m2 > 0");
        let w = (T::one() / T::of_usize(m2)).sqrt();
        for l in 0..m2 {
            columns.push(other.column(l).iter().map(|z| z * w).collect());
        }
    }
    let sigma = noise_power.sqrt();
    for i in 0..n {
        let mut e = vec![Complex::new(T::zero(), T::zero()); n];
        e[i] = Complex::new(sigma, T::zero());
        columns.push(e);
    }
    ComplexMatrix::from_columns(&columns).expect("columns share the antenna count")
}

fn check_inputs<T: Scalar>(
    desired: &[ComplexMatrix<T>],
    interferer: Option<&[ComplexMatrix<T>]>,
    m1: usize,
    m2: usize,
    noise_power: T,
) -> Result<usize> {
    let first = desired
        .first()
        .ok_or(Error::Empty("desired channel has no subcarriers"))?;
    let n_antennas = first.rows();
    if m1 == 0 {
        return Err(Error::InvalidParameter("desired stream count must be >= 1".into()));
    }
    if m1 + m2 > n_antennas {
        return Err(Error::InvalidParameter(format!(
            "m1 + m2 = {} exceeds {n_antennas} antennas",
            m1 + m2
        )));
    }
    if !(noise_power > T::zero()) || !noise_power.is_finite() {
        return Err(Error::InvalidParameter("noise power must be positive".into()));
    }
    let shape_ok = |h: &ComplexMatrix<T>, streams: usize| {
        h.rows() == n_antennas && h.cols() >= streams && h.is_finite()
    };
    if !desired.iter().all(|h| shape_ok(h, m1)) {
        return Err(Error::DimensionMismatch(format!(
            "desired channels must be {n_antennas}-row matrices with >= {m1} columns"
        )));
    }
    match interferer {
        Some(g) => {
            if g.len() != desired.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} interferer subcarriers vs {} desired",
                    g.len(),
                    desired.len()
                )));
            }
            if !g.iter().all(|h| shape_ok(h, m2)) {
                return Err(Error::DimensionMismatch(format!(
                    "interferer channels must be {n_antennas}-row matrices with >= {m2} columns"
                )));
            }
        }
        None if m2 > 0 => {
            return Err(Error::InvalidParameter(
                "m2 > 0 but no interferer channel supplied".into(),
            ))
        }
        None => {}
    }
    Ok(n_antennas)
}

/// MMSE PPSNR for every subcarrier and every desired stream.
///
/// `desired[i]` / `interferer[i]` are the channel matrices at subcarrier `i`;
/// the first `m1` (resp. `m2`) columns are the active streams.
pub fn mmse_ppsnr<T: Scalar>(
    desired: &[ComplexMatrix<T>],
    interferer: Option<&[ComplexMatrix<T>]>,
    m1: usize,
    m2: usize,
    noise_power: T,
) -> Result<PpsnrGrid<T>> {
    check_inputs(desired, interferer, m1, m2, noise_power)?;
    let inv_m1 = T::one() / T::of_usize(m1);
    let w_scale = inv_m1.sqrt();
    let mut values = Vec::with_capacity(desired.len() * m1);
    for (i, h) in desired.iter().enumerate() {
        let g = interferer.map(|g| &g[i]);
        for m in 0..m1 {
            let chol = Cholesky::of_gram(&interference_sqrt(h, g, m1, m2, m, noise_power))?;
            let hm = h.column(m);
            let w: Vec<Complex<T>> = chol.solve(hm).into_iter().map(|z| z * w_scale).collect();
            let residual = chol.quadratic_form(&w);
            let gain = inner(&w, hm).norm_sqr() * inv_m1;
            let gamma = gain / residual;
            if !gamma.is_finite() || gamma <= T::zero() {
                return Err(Error::NonFinite("PPSNR (zero desired channel column?)"));
            }
            values.push(gamma);
        }
    }
    PpsnrGrid::new(desired.len(), m1, values)
}

/// PPSNR computed from estimated channels; identical math, different inputs.
pub fn mmse_ppsnr_estimated<T: Scalar>(
    desired_est: &[ComplexMatrix<T>],
    interferer_est: Option<&[ComplexMatrix<T>]>,
    m1: usize,
    m2: usize,
    noise_power: T,
) -> Result<PpsnrGrid<T>> {
    mmse_ppsnr(desired_est, interferer_est, m1, m2, noise_power)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn scalar_channel_is_matched_filter() {
        let h = ComplexMatrix::from_column_major(1, 1, vec![c(1.0)]).unwrap();
        let g = mmse_ppsnr(&[h], None, 1, 0, 0.01).unwrap();
        assert!((g.get(0, 0) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn square_root_reproduces_covariance() {
        let h = ComplexMatrix::from_column_major(2, 2, vec![c(1.), Complex::new(0., 2.), c(0.5), c(-1.)]).unwrap();
        let g = ComplexMatrix::from_column_major(2, 2, vec![c(3.), c(1.), Complex::new(1., 1.), c(0.)]).unwrap();
        let a = interference_sqrt(&h, Some(&g), 2, 2, 1, 0.1);
        let aah = a.mul(&a.hermitian()).unwrap();
        let cov = interference_covariance(&h, Some(&g), 2, 2, 1, 0.1);
        for (u, v) in aah.as_column_major().iter().zip(cov.as_column_major()) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_interferer_is_nulled() {
        let h = ComplexMatrix::from_column_major(2, 2, vec![c(1.), c(0.), c(0.), c(1.)]).unwrap();
        let g = ComplexMatrix::from_column_major(2, 2, vec![c(0.), c(1.), c(1.), c(0.)]).unwrap();
        let grid = mmse_ppsnr(&[h], Some(&[g]), 1, 1, 0.01).unwrap();
        assert!((grid.get(0, 0) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn precondition_errors() {
        let h = ComplexMatrix::<f64>::identity(2);
        let hs = [h.clone()];
        assert!(mmse_ppsnr(&hs, None, 0, 0, 1.0).is_err());
        assert!(mmse_ppsnr(&hs, Some(&hs), 2, 1, 1.0).is_err());
        assert!(mmse_ppsnr(&hs, None, 1, 1, 1.0).is_err());
        assert!(mmse_ppsnr(&hs, None, 1, 0, 0.0).is_err());
        assert!(mmse_ppsnr(&hs, Some(&[h.clone(), h.clone()]), 1, 1, 1.0).is_err());
        let wide = ComplexMatrix::<f64>::zeros(3, 3);
        assert!(mmse_ppsnr(&hs, Some(&[wide]), 1, 1, 1.0).is_err());
        assert!(mmse_ppsnr::<f64>(&[], None, 1, 0, 1.0).is_err());
    }

    #[test]
    fn grid_rejects_nonpositive() {
        assert!(PpsnrGrid::new(1, 1, vec![0.0_f64]).is_err());
        assert!(PpsnrGrid::new(2, 1, vec![1.0_f64]).is_err());
        let g = PpsnrGrid::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.stream(1).collect::<Vec<_>>(), vec![2.0, 4.0]);
    }
}
