use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the network computes in. `f32` for training and inference,
/// `f64` for gradient checking.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Sum + Default + Send + Sync + Debug + 'static
{
    /// `c = a * b + beta * c` where `c` is a contiguous row-major `m x n`
    /// matrix and `a`, `b` are described by (row stride, column stride).
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], a_strides: (usize, usize), b: &[Self], b_strides: (usize, usize), beta: Self, c: &mut [Self]);

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

fn check(m: usize, k: usize, n: usize, a_len: usize, a: (usize, usize), b_len: usize, b: (usize, usize), c_len: usize) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c_len >= m * n, "gemm: output too small");
    if k > 0 {
        assert!((m - 1) * a.0 + (k - 1) * a.1 < a_len, "gemm: lhs out of range");
        assert!((k - 1) * b.0 + (n - 1) * b.1 < b_len, "gemm: rhs out of range");
    }
}

impl Real for f32 {
    fn gemm(m: usize, k: usize, n: usize, a: &[f32], sa: (usize, usize), b: &[f32], sb: (usize, usize), beta: f32, c: &mut [f32]) {
        check(m, k, n, a.len(), sa, b.len(), sb, c.len());
        // SAFETY: every index touched is bounds-checked above.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0,
                a.as_ptr(), sa.0 as isize, sa.1 as isize,
                b.as_ptr(), sb.0 as isize, sb.1 as isize,
                beta, c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
}

impl Real for f64 {
    fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), beta: f64, c: &mut [f64]) {
        check(m, k, n, a.len(), sa, b.len(), sb, c.len());
        // SAFETY: every index touched is bounds-checked above.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0,
                a.as_ptr(), sa.0 as isize, sa.1 as isize,
                b.as_ptr(), sb.0 as isize, sb.1 as isize,
                beta, c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
}
