//! Floating point scalar abstraction.
//!
//! Everything numeric in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Dense products are dispatched to the
//! matching `matrixmultiply` kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// A real scalar usable by networks, estimators and metrics.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Machine name used in run metadata.
    const NAME: &'static str;

    /// `C = alpha * A * B + beta * C` with explicit row/column strides.
    ///
    /// # Safety
    /// Pointers and strides must describe valid, non-overlapping (for `c`) storage
    /// of shapes `m x k`, `k x n` and `m x n`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::infinity)
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Row-major matrix products over slices.
pub mod linalg {
    use super::Scalar;

    /// `c (m x n) = a (m x k) * b (k x n) + beta * c`
    pub fn gemm_nn<S: Scalar>(m: usize, k: usize, n: usize, a: &[S], b: &[S], beta: S, c: &mut [S]) {
        assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
        if m == 0 || n == 0 {
            return;
        }
        if m == 1 {
            // row-vector times matrix; skip zero inputs (observations are mostly one-hot)
            let c = &mut c[..n];
            if beta == S::zero() {
                c.iter_mut().for_each(|v| *v = S::zero());
            } else if beta != S::one() {
                c.iter_mut().for_each(|v| *v *= beta);
            }
            for (i, &x) in a[..k].iter().enumerate() {
                if x == S::zero() {
                    continue;
                }
                let row = &b[i * n..(i + 1) * n];
                for (cv, &bv) in c.iter_mut().zip(row) {
                    *cv += x * bv;
                }
            }
            return;
        }
        unsafe {
            S::gemm_raw(
                m,
                k,
                n,
                S::one(),
                a.as_ptr(),
                k as isize,
                1,
                b.as_ptr(),
                n as isize,
                1,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    /// `c (k x n) = a^T * b + beta * c` where `a` is `m x k` and `b` is `m x n`.
    pub fn gemm_tn<S: Scalar>(m: usize, k: usize, n: usize, a: &[S], b: &[S], beta: S, c: &mut [S]) {
        assert!(a.len() >= m * k && b.len() >= m * n && c.len() >= k * n);
        if k == 0 || n == 0 {
            return;
        }
        unsafe {
            S::gemm_raw(
                k,
                m,
                n,
                S::one(),
                a.as_ptr(),
                1,
                k as isize,
                b.as_ptr(),
                n as isize,
                1,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    /// `c (m x k) = a (m x n) * b^T + beta * c` where `b` is `k x n`.
    pub fn gemm_nt<S: Scalar>(m: usize, n: usize, k: usize, a: &[S], b: &[S], beta: S, c: &mut [S]) {
        assert!(a.len() >= m * n && b.len() >= k * n && c.len() >= m * k);
        if m == 0 || k == 0 {
            return;
        }
        unsafe {
            S::gemm_raw(
                m,
                n,
                k,
                S::one(),
                a.as_ptr(),
                n as isize,
                1,
                b.as_ptr(),
                1,
                n as isize,
                beta,
                c.as_mut_ptr(),
                k as isize,
                1,
            );
        }
    }

    pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
        a.iter().zip(b).map(|(&x, &y)| x * y).sum()
    }

    pub fn norm_sq<S: Scalar>(a: &[S]) -> S {
        a.iter().map(|&x| x * x).sum()
    }
}
