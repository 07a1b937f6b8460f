//! Scalar abstraction shared by every solver.
//!
//! The numerical kernels are written once against [`Real`] and instantiated
//! for `f64` (the working precision) or `f32` (cheap exploratory sweeps).

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, NumAssign};

/// Floating point scalar usable by the solvers: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("literal representable in scalar type")
    }

    /// Converts to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Absolute tolerance used by convergence checks in this precision.
    fn convergence_floor() -> Self {
        Self::epsilon() * Self::lit(100.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

pub(crate) fn cplx<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

pub(crate) fn is_finite_c<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}
