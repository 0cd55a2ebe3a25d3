//! Real scalar abstraction shared by the linear algebra and PPSNR code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; used for physical constants.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    /// Lossy conversion from a count.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Linear power ratio to decibels.
pub fn to_db<T: Scalar>(linear: T) -> T {
    T::of(10.0) * linear.log10()
}

/// Decibels to linear power ratio.
pub fn from_db<T: Scalar>(db: T) -> T {
    T::of(10.0).powf(db / T::of(10.0))
}

/// dBm to milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    from_db(dbm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trip() {
        assert!((to_db(100.0_f64) - 20.0).abs() < 1e-12);
        assert!((from_db(-3.0_f32) - 0.501_187_2).abs() < 1e-6);
        assert!((dbm_to_mw(25.0) - 316.227_766_016_837_9).abs() < 1e-9);
    }
}
