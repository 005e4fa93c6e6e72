//! Scalar abstraction for the floating-point kernels.

use std::cell::RefCell;
use std::iter::Sum;
use std::sync::Arc;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};
use rustfft::{Fft, FftDirection, FftNum, FftPlanner};

/// Floating-point scalar the spectral and ODE kernels are generic over.
///
/// Transform plans are cached per thread, so fields can be used freely from
/// parallel test runners without locking.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssignOps + FftNum + Sum<Self>
{
    /// Cached FFT plan of the given length and direction for this scalar.
    fn fft_plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<Self>>;

    /// Largest tolerated imaginary residue when realifying a spectrally
    /// produced field. The f64 value is the library-wide contract; f32 is
    /// necessarily looser.
    fn realify_tol() -> Self;
}

macro_rules! impl_real {
    ($t:ty, $tol:expr) => {
        impl Real for $t {
            fn fft_plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<Self>> {
                thread_local! {
                    static PLANNER: RefCell<FftPlanner<$t>> = RefCell::new(FftPlanner::new());
                }
                PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
            }

            fn realify_tol() -> Self {
                $tol
            }
        }
    };
}

impl_real!(f64, 1e-10);
impl_real!(f32, 1e-3);
