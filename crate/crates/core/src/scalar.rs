//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point type the discretization is generic over (`f32` or `f64`).
///
/// The sparse direct solver is backed by `faer`, hence the extra bound.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + faer::traits::RealField
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Never fails for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal fits in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("integer fits in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Small fixed-size 3-vector helpers used by geometry and assembly kernels.
pub mod vec3 {
    use super::Real;

    pub type V3<T> = [T; 3];
    pub type M3<T> = [[T; 3]; 3];

    #[inline]
    pub fn zero<T: Real>() -> V3<T> {
        [T::zero(); 3]
    }

    #[inline]
    pub fn dot<T: Real>(a: &V3<T>, b: &V3<T>) -> T {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    #[inline]
    pub fn cross<T: Real>(a: &V3<T>, b: &V3<T>) -> V3<T> {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    #[inline]
    pub fn matvec<T: Real>(m: &M3<T>, v: &V3<T>) -> V3<T> {
        [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
    }

    #[inline]
    pub fn det<T: Real>(m: &M3<T>) -> T {
        dot(&m[0], &cross(&m[1], &m[2]))
    }

    #[inline]
    pub fn transpose<T: Real>(m: &M3<T>) -> M3<T> {
        let mut t = [[T::zero(); 3]; 3];
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[j][i] = *v;
            }
        }
        t
    }

    /// Inverse transpose via the cofactor matrix: `J^{-T} = cof(J) / det J`.
    pub fn inverse_transpose<T: Real>(m: &M3<T>, det: T) -> M3<T> {
        let c0 = cross(&m[1], &m[2]);
        let c1 = cross(&m[2], &m[0]);
        let c2 = cross(&m[0], &m[1]);
        // m_i . c_j = det * delta_ij, so the columns of inv(m) are c_j / det
        let s = T::one() / det;
        let mut out = [c0, c1, c2];
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * s;
            }
        }
        out
    }
}
