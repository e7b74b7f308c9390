//! Scalar abstraction shared by every numerical routine in the crate.

use std::cell::RefCell;
use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftPlanner;

/// Floating point scalar the solver and the analysis are generic over.
///
/// Implemented for `f32` and `f64`. The FFT entry point lives here so that
/// generic code never has to name `rustfft::FftNum`, whose `Signed` supertrait
/// would make `abs`/`signum` ambiguous next to `Float`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn c(x: f64) -> Self;

    /// Machine-aware tolerance: `max(x, 64 eps)`.
    fn tol(x: f64) -> Self {
        let floor = Self::epsilon() * Self::c(64.0);
        Self::c(x).max(floor)
    }

    /// In-place unnormalized complex DFT of `buf` (`inverse` selects the sign).
    fn fft(buf: &mut [Complex<Self>], inverse: bool);

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($t:ty, $planner:ident) => {
        thread_local! {
            static $planner: RefCell<FftPlanner<$t>> = RefCell::new(FftPlanner::new());
        }

        impl Real for $t {
            #[inline]
            fn c(x: f64) -> Self {
                x as $t
            }

            fn fft(buf: &mut [Complex<Self>], inverse: bool) {
                let plan = $planner.with(|p| {
                    let mut p = p.borrow_mut();
                    if inverse {
                        p.plan_fft_inverse(buf.len())
                    } else {
                        p.plan_fft_forward(buf.len())
                    }
                });
                plan.process(buf);
            }
        }
    };
}

impl_real!(f32, PLANNER_F32);
impl_real!(f64, PLANNER_F64);
