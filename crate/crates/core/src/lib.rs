//! Monte-Carlo simulation of two-link single-hop MIMO networks comparing a
//! MAC that adaptively switches between single and concurrent link
//! transmission against single-link, fixed half-split and max-sum MACs.
//!
//! The linear algebra and PPSNR routines are generic over the real scalar
//! type ([`Scalar`], implemented for `f32` and `f64`); the aliases below fix
//! the double-precision instantiation used by the simulator.

pub mod channel;
pub mod error;
pub mod harness;
pub mod link_adapt;
pub mod linalg;
pub mod mac;
pub mod phy;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Complex = num_complex::Complex<f64>;
pub type ComplexMatrix = linalg::ComplexMatrix<f64>;
pub type ComplexMatrix32 = linalg::ComplexMatrix<f32>;
pub type PpsnrGrid = phy::PpsnrGrid<f64>;
pub type PpsnrGrid32 = phy::PpsnrGrid<f32>;
