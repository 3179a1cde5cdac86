use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar type the networks are generic over: `f32` for training, `f64`
/// for gradient checks.
pub trait Real:
    Copy
    + Default
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;

    /// Raw strided `c = alpha·a·b + beta·c`.
    ///
    /// # Safety
    /// Every addressed element must lie inside the buffers.
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

    fn sigmoid(self) -> Self {
        Self::ONE / (Self::ONE + (-self).exp())
    }

    fn relu(self) -> Self {
        if self > Self::ZERO {
            self
        } else {
            Self::ZERO
        }
    }
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn tanh(self) -> Self {
        f32::tanh(self)
    }

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
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

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
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// A strided matrix view: element (i, j) lives at `off + i*rs + j*cs`.
#[derive(Debug, Clone, Copy)]
pub struct View {
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl View {
    /// Row-major matrix with `cols` columns starting at `off`.
    pub fn rows(off: usize, cols: usize) -> View {
        View { off, rs: cols, cs: 1 }
    }

    /// Transpose of a row-major matrix with `cols` columns.
    pub fn trans(off: usize, cols: usize) -> View {
        View { off, rs: 1, cs: cols }
    }

    fn last(&self, rows: usize, cols: usize) -> usize {
        self.off + (rows - 1) * self.rs + (cols - 1) * self.cs
    }
}

/// Bounds-checked `c[m×n] = a[m×k]·b[k×n] + beta·c`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<R: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[R],
    va: View,
    b: &[R],
    vb: View,
    beta: R,
    c: &mut [R],
    vc: View,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(vc.last(m, n) < c.len(), "gemm: c out of bounds");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let x = &mut c[vc.off + i * vc.rs + j * vc.cs];
                *x = beta * *x;
            }
        }
        return;
    }
    assert!(va.last(m, k) < a.len(), "gemm: a out of bounds");
    assert!(vb.last(k, n) < b.len(), "gemm: b out of bounds");
    if m <= SMALL_M && va.cs == 1 && vb.rs == 1 {
        small_gemm(m, k, n, a, va, b, vb, beta, c, vc);
        return;
    }
    // SAFETY: the asserts above bound every addressed element, and `c`
    // is a unique borrow that cannot alias `a` or `b`.
    unsafe {
        R::gemm_raw(
            m,
            k,
            n,
            R::ONE,
            a.as_ptr().add(va.off),
            va.rs as isize,
            va.cs as isize,
            b.as_ptr().add(vb.off),
            vb.rs as isize,
            vb.cs as isize,
            beta,
            c.as_mut_ptr().add(vc.off),
            vc.rs as isize,
            vc.cs as isize,
        )
    }
}

/// Below this many rows packing dominates, so rows are handled directly.
const SMALL_M: usize = 32;

fn dot<R: Real>(x: &[R], y: &[R]) -> R {
    let mut acc = [R::ZERO; 8];
    let chunks = x.len() / 8;
    for c in 0..chunks {
        for l in 0..8 {
            acc[l] += x[c * 8 + l] * y[c * 8 + l];
        }
    }
    let mut s = R::ZERO;
    for i in chunks * 8..x.len() {
        s += x[i] * y[i];
    }
    for v in acc {
        s += v;
    }
    s
}

/// Rows of `a` times a matrix whose columns are contiguous (`b` is the
/// transpose of a row-major weight). Sparse rows, common for card
/// indicators, only touch their nonzero entries.
#[allow(clippy::too_many_arguments)]
fn small_gemm<R: Real>(m: usize, k: usize, n: usize, a: &[R], va: View, b: &[R], vb: View, beta: R, c: &mut [R], vc: View) {
    let mut nz = Vec::with_capacity(k);
    for i in 0..m {
        let row = &a[va.off + i * va.rs..va.off + i * va.rs + k];
        nz.clear();
        nz.extend(row.iter().enumerate().filter(|(_, &x)| x != R::ZERO).map(|(l, _)| l));
        for j in 0..n {
            let col = &b[vb.off + j * vb.cs..vb.off + j * vb.cs + k];
            let s = if nz.len() * 4 < k {
                let mut s = R::ZERO;
                for &l in &nz {
                    s += row[l] * col[l];
                }
                s
            } else {
                dot(row, col)
            };
            let x = &mut c[vc.off + i * vc.rs + j * vc.cs];
            *x = beta * *x + s;
        }
    }
}
