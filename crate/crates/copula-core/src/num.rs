//! Scalar abstraction for the numerical kernels.
//!
//! Everything in this crate is written against [`Real`] so the same code
//! runs in `f32` and `f64`. Tolerances are associated constants because the
//! contract tolerances (margins within 1e-9, exact-path identities within
//! 1e-12, ...) are only meaningful in `f64`; the `f32` constants are loosened
//! analogues so that the invariants remain checkable, not equally tight.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar with the conversions and tolerances the kernels need.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Checkerboard margin tolerance (row/column sums vs 1/n).
    const MARGIN_TOL: Self;
    /// Tolerance for identities that hold exactly up to rounding.
    const EXACT_TOL: Self;
    /// Sinkhorn rescaling stop tolerance for empirical and file inputs.
    /// Sparse support (binned counts have many empty cells) slows the
    /// contraction, so this stays modest; callers with dense positive mass
    /// that need margins at working precision pass a tighter tolerance.
    const SINKHORN_TOL: Self;
    /// Bisection width for conditional-inverse sampling.
    const BISECT_TOL: Self;
    /// Band around [0,1] inside which normalized measure values are clamped.
    const CLAMP_BAND: Self;

    /// Conversion from an `f64` constant. Panics only on values that cannot
    /// be represented at all, which never happens for the magnitudes used
    /// in this crate.
    fn real(x: f64) -> Self;

    /// Conversion from a count/index.
    fn of_usize(n: usize) -> Self;

    /// Widening conversion used for reporting.
    fn as_f64(self) -> f64;
}

impl Real for f64 {
    const MARGIN_TOL: Self = 1e-9;
    const EXACT_TOL: Self = 1e-12;
    const SINKHORN_TOL: Self = 1e-10;
    const BISECT_TOL: Self = 1e-10;
    const CLAMP_BAND: Self = 1e-4;

    #[inline]
    fn real(x: f64) -> Self {
        x
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f64
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const MARGIN_TOL: Self = 1e-4;
    const EXACT_TOL: Self = 1e-5;
    const SINKHORN_TOL: Self = 1e-5;
    const BISECT_TOL: Self = 1e-6;
    const CLAMP_BAND: Self = 1e-2;

    #[inline]
    fn real(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}
