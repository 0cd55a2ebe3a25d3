//! Helpers shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mimo_switch::ComplexMatrix;

type Q = BigRational;
type Cq = Complex<Q>;

pub fn cn(rng: &mut ChaCha8Rng, var: f64) -> Complex<f64> {
    let s = (var / 2.0).sqrt();
    Complex::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, var: f64) -> ComplexMatrix {
    let data = (0..n * n).map(|_| cn(rng, var)).collect();
    ComplexMatrix::from_column_major(n, n, data).unwrap()
}

fn q(x: f64) -> Q {
    Q::from_float(x).expect("finite")
}

fn cq(z: Complex<f64>) -> Cq {
    Cq::new(q(z.re), q(z.im))
}

/// `(1/m1) h_m^H C^{-1} h_m` in exact rational arithmetic, where
/// `C = (1/m1) sum_{l != m} h_l h_l^H + (1/m2) sum_l g_l g_l^H + noise I`.
/// Every f64 input is an exact rational, so the only rounding is the final
/// conversion.
pub fn exact_ppsnr(h: &ComplexMatrix, g: Option<&ComplexMatrix>, m1: usize, m2: usize, m: usize, noise: f64) -> f64 {
    let n = h.rows();
    let mut a = vec![vec![Cq::zero(); n + 1]; n];
    for (r, row) in a.iter_mut().enumerate() {
        row[r] = Cq::new(q(noise), Q::zero());
    }
    let mut add = |col: &[Complex<f64>], count: usize| {
        let w = Q::new(BigInt::one(), BigInt::from(count));
        let col: Vec<Cq> = col.iter().map(|&z| cq(z)).collect();
        for r in 0..n {
            for c in 0..n {
                let t = &col[r] * col[c].conj();
                a[r][c] = &a[r][c] + Cq::new(&t.re * &w, &t.im * &w);
            }
        }
    };
    for l in (0..m1).filter(|&l| l != m) {
        add(h.column(l), m1);
    }
    if let Some(g) = g {
        for l in 0..m2 {
            add(g.column(l), m2);
        }
    }
    let hm: Vec<Cq> = h.column(m).iter().map(|&z| cq(z)).collect();
    for r in 0..n {
        a[r][n] = hm[r].clone();
    }
    // Gaussian elimination; C is positive definite so no pivoting is needed.
    for k in 0..n {
        for r in k + 1..n {
            let f = &a[r][k] / &a[k][k];
            for c in k..=n {
                let t = &f * &a[k][c];
                a[r][c] = &a[r][c] - t;
            }
        }
    }
    let mut x = vec![Cq::zero(); n];
    for k in (0..n).rev() {
        let mut s = a[k][n].clone();
        for c in k + 1..n {
            s -= &a[k][c] * &x[c];
        }
        x[k] = s / &a[k][k];
    }
    let quad = hm
        .iter()
        .zip(&x)
        .fold(Cq::zero(), |acc, (hr, xr)| acc + hr.conj() * xr);
    (quad.re / Q::from_integer(BigInt::from(m1))).to_f64().expect("representable")
}
