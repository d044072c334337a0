use std::fmt::Debug;

use num_traits::{Float, FromBytes, FromPrimitive, ToBytes};

/// Floating point element type of an embedding matrix: `f32` or `f64`.
///
/// Beyond the arithmetic from [`Float`], a scalar knows its on-disk dtype code
/// and how to (de)serialize itself in little-endian order.
pub trait Scalar:
    Float + FromPrimitive + Debug + Default + Send + Sync + 'static
{
    /// dtype byte written to the file header.
    const DTYPE: u8;
    /// Encoded width in bytes.
    const BYTES: usize;

    fn to_f64_lossless(self) -> f64;

    fn write_le(self, out: &mut Vec<u8>);

    fn read_le(bytes: &[u8]) -> Self;

    /// Unit roundoff (half the machine epsilon).
    fn unit_roundoff() -> f64 {
        Self::epsilon().to_f64_lossless() * 0.5
    }
}

macro_rules! impl_scalar {
    ($t:ty, $code:expr) => {
        impl Scalar for $t {
            const DTYPE: u8 = $code;
            const BYTES: usize = std::mem::size_of::<$t>();

            #[inline(always)]
            fn to_f64_lossless(self) -> f64 {
                self as f64
            }

            #[inline]
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(ToBytes::to_le_bytes(&self).as_ref());
            }

            #[inline]
            fn read_le(bytes: &[u8]) -> Self {
                let arr: [u8; std::mem::size_of::<$t>()] =
                    bytes.try_into().expect("scalar byte width");
                <$t as FromBytes>::from_le_bytes(&arr)
            }
        }
    };
}

impl_scalar!(f32, 1);
impl_scalar!(f64, 2);

/// Upper bound on `|computed - exact|` for a length-`n` dot product whose
/// terms have absolute sum at most `abs_sum`, for any summation order.
pub fn dot_error_bound<T: Scalar>(n: usize, abs_sum: f64) -> f64 {
    let gamma = |u: f64| {
        let nu = n as f64 * u;
        nu / (1.0 - nu)
    };
    (gamma(T::unit_roundoff()) + gamma(f64::EPSILON * 0.5)) * abs_sum
}
