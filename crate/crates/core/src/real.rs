use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Scalar type of tensors. Training runs on `f32`; gradient checks use `f64`.
pub trait Real:
    Float + Default + Debug + Sum + AddAssign + SubAssign + MulAssign + DivAssign + Send + Sync + 'static
{
    fn lit(x: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `c += a @ b` over strided row/column layouts (`m x k` times `k x n`).
    fn gemm_acc(m: usize, k: usize, n: usize, a: Strided<'_, Self>, b: Strided<'_, Self>, c: StridedMut<'_, Self>);
}

/// Read-only matrix view: element `(i, j)` lives at `data[i * rs + j * cs]`.
#[derive(Clone, Copy)]
pub struct Strided<'a, R> {
    pub data: &'a [R],
    pub rs: usize,
    pub cs: usize,
}

/// Writable matrix view; distinct `(i, j)` must map to distinct offsets.
pub struct StridedMut<'a, R> {
    pub data: &'a mut [R],
    pub rs: usize,
    pub cs: usize,
}

impl<'a, R> Strided<'a, R> {
    pub fn new(data: &'a [R], rs: usize, cs: usize) -> Self {
        Strided { data, rs, cs }
    }

    fn fits(&self, rows: usize, cols: usize) -> bool {
        rows == 0 || cols == 0 || (rows - 1) * self.rs + (cols - 1) * self.cs < self.data.len()
    }
}

impl<'a, R> StridedMut<'a, R> {
    pub fn new(data: &'a mut [R], rs: usize, cs: usize) -> Self {
        StridedMut { data, rs, cs }
    }

    fn fits(&self, rows: usize, cols: usize) -> bool {
        rows == 0 || cols == 0 || (rows - 1) * self.rs + (cols - 1) * self.cs < self.data.len()
    }
}

macro_rules! gemm_body {
    ($kernel:path, $t:ty, $m:expr, $k:expr, $n:expr, $a:expr, $b:expr, $c:expr) => {{
        let (m, k, n, a, b, c) = ($m, $k, $n, $a, $b, $c);
        assert!(a.fits(m, k) && b.fits(k, n) && c.fits(m, n), "gemm view out of bounds");
        if m == 0 || n == 0 {
            return;
        }
        // SAFETY: the asserts keep every addressed element inside its slice; `c` is
        // exclusively borrowed and its strides address distinct elements.
        unsafe {
            $kernel(
                m,
                k,
                n,
                1.0 as $t,
                a.data.as_ptr(),
                a.rs as isize,
                a.cs as isize,
                b.data.as_ptr(),
                b.rs as isize,
                b.cs as isize,
                1.0 as $t,
                c.data.as_mut_ptr(),
                c.rs as isize,
                c.cs as isize,
            );
        }
    }};
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn gemm_acc(m: usize, k: usize, n: usize, a: Strided<'_, Self>, b: Strided<'_, Self>, c: StridedMut<'_, Self>) {
        gemm_body!(matrixmultiply::sgemm, f32, m, k, n, a, b, c)
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    fn gemm_acc(m: usize, k: usize, n: usize, a: Strided<'_, Self>, b: Strided<'_, Self>, c: StridedMut<'_, Self>) {
        gemm_body!(matrixmultiply::dgemm, f64, m, k, n, a, b, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_schoolbook() {
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0f64, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut c = [1.0f64; 4];
        f64::gemm_acc(2, 3, 2, Strided::new(&a, 3, 1), Strided::new(&b, 2, 1), StridedMut::new(&mut c, 2, 1));
        assert_eq!(c, [59.0, 65.0, 140.0, 155.0]);
    }

    #[test]
    fn gemm_transposed_and_overlapping_views() {
        // a^T via strides; rows of `w` overlap (sliding windows)
        let a = [1.0f32, 2.0, 3.0, 4.0];
        let id = [1.0f32, 0.0, 0.0, 1.0];
        let mut c = [0.0f32; 4];
        f32::gemm_acc(2, 2, 2, Strided::new(&a, 1, 2), Strided::new(&id, 2, 1), StridedMut::new(&mut c, 2, 1));
        assert_eq!(c, [1.0, 3.0, 2.0, 4.0]);
        let x = [1.0f32, 2.0, 3.0];
        let ones = [1.0f32, 1.0];
        let mut out = [0.0f32; 2];
        f32::gemm_acc(2, 2, 1, Strided::new(&x, 1, 1), Strided::new(&ones, 1, 1), StridedMut::new(&mut out, 1, 1));
        assert_eq!(out, [3.0, 5.0]);
    }
}
