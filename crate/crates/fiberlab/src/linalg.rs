//! Dense complex linear algebra kernels.
//!
//! Matrices are stored column major in flat buffers so they can be handed to
//! LAPACK without copies. With the `lapack` feature (default) Hermitian
//! eigendecompositions and matrix products go through `zheevd`/`zgemm` from
//! the system BLAS; a pure Rust Householder + implicit QL path keeps the
//! crate usable without any native library, at fallback speed.
//!
//! The Krylov routines (`lanczos_lowest`, `expm_i_hermitian`) only touch the
//! operator through a matrix-vector closure, so callers can keep large
//! operators implicit.

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use num_complex::Complex64 as C64;

/// Dense complex matrix, column major.
#[derive(Clone, Debug, PartialEq)]
pub struct ZMat {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<C64>,
}

impl ZMat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        ZMat {
            n_rows,
            n_cols,
            data: vec![C64::new(0.0, 0.0); n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ZMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = ZMat::zeros(n_rows, n_cols);
        for c in 0..n_cols {
            for r in 0..n_rows {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Column `j` as a slice.
    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn set_col(&mut self, j: usize, v: &[C64]) {
        self.col_mut(j).copy_from_slice(v);
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ZMat {
        let mut out = ZMat::zeros(self.n_cols, self.n_rows);
        for c in 0..self.n_cols {
            for r in 0..self.n_rows {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn scale(&mut self, s: C64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    /// self += s * other, elementwise.
    pub fn axpy(&mut self, s: C64, other: &ZMat) {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        for (z, w) in self.data.iter_mut().zip(other.data.iter()) {
            *z += s * w;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// self * other.
    pub fn mul(&self, other: &ZMat) -> ZMat {
        let mut out = ZMat::zeros(self.n_rows, other.n_cols);
        zgemm(
            C64::new(1.0, 0.0),
            self,
            Op::None,
            other,
            Op::None,
            C64::new(0.0, 0.0),
            &mut out,
        );
        out
    }

    /// self^H * other.
    pub fn adjoint_mul(&self, other: &ZMat) -> ZMat {
        let mut out = ZMat::zeros(self.n_cols, other.n_cols);
        zgemm(
            C64::new(1.0, 0.0),
            self,
            Op::ConjTrans,
            other,
            Op::None,
            C64::new(0.0, 0.0),
            &mut out,
        );
        out
    }

    /// self * other^H.
    pub fn mul_adjoint(&self, other: &ZMat) -> ZMat {
        let mut out = ZMat::zeros(self.n_rows, other.n_rows);
        zgemm(
            C64::new(1.0, 0.0),
            self,
            Op::None,
            other,
            Op::ConjTrans,
            C64::new(0.0, 0.0),
            &mut out,
        );
        out
    }

    /// self * v for a single vector.
    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.n_cols);
        let mut out = vec![C64::new(0.0, 0.0); self.n_rows];
        // Column sweep keeps the access pattern sequential in memory.
        for c in 0..self.n_cols {
            let vc = v[c];
            if vc == C64::new(0.0, 0.0) {
                continue;
            }
            let col = self.col(c);
            for r in 0..self.n_rows {
                out[r] += col[r] * vc;
            }
        }
        out
    }

    /// self^H * v.
    pub fn adjoint_matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.n_rows);
        let mut out = vec![C64::new(0.0, 0.0); self.n_cols];
        for c in 0..self.n_cols {
            let col = self.col(c);
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..self.n_rows {
                acc += col[r].conj() * v[r];
            }
            out[c] = acc;
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for ZMat {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        &self.data[r + c * self.n_rows]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ZMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        &mut self.data[r + c * self.n_rows]
    }
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Op {
    None,
    ConjTrans,
}

#[cfg(feature = "lapack")]
mod ffi {
    use std::os::raw::c_char;

    // The system openblas bundles full LAPACK; these are the only symbols
    // we need. Complex numbers cross the boundary as [re, im] f64 pairs,
    // which matches the layout of num_complex::Complex64.
    #[link(name = "openblas")]
    extern "C" {
        pub fn zheevd_(
            jobz: *const c_char,
            uplo: *const c_char,
            n: *const i32,
            a: *mut f64,
            lda: *const i32,
            w: *mut f64,
            work: *mut f64,
            lwork: *const i32,
            rwork: *mut f64,
            lrwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
        pub fn zgemm_(
            transa: *const c_char,
            transb: *const c_char,
            m: *const i32,
            n: *const i32,
            k: *const i32,
            alpha: *const f64,
            a: *const f64,
            lda: *const i32,
            b: *const f64,
            ldb: *const i32,
            beta: *const f64,
            c: *mut f64,
            ldc: *const i32,
        );
        pub fn zgesv_(
            n: *const i32,
            nrhs: *const i32,
            a: *mut f64,
            lda: *const i32,
            ipiv: *mut i32,
            b: *mut f64,
            ldb: *const i32,
            info: *mut i32,
        );
        pub fn openblas_set_num_threads(n: i32);
    }
}

/// Cap the BLAS thread pool. No-op without the `lapack` feature.
pub fn set_blas_threads(n: usize) {
    #[cfg(feature = "lapack")]
    unsafe {
        ffi::openblas_set_num_threads(n.max(1) as i32)
    }
    #[cfg(not(feature = "lapack"))]
    let _ = n;
}

/// c = alpha * op(a) * op(b) + beta * c.
pub fn zgemm(alpha: C64, a: &ZMat, op_a: Op, b: &ZMat, op_b: Op, beta: C64, c: &mut ZMat) {
    let (am, ak) = match op_a {
        Op::None => (a.n_rows, a.n_cols),
        Op::ConjTrans => (a.n_cols, a.n_rows),
    };
    let (bk, bn) = match op_b {
        Op::None => (b.n_rows, b.n_cols),
        Op::ConjTrans => (b.n_cols, b.n_rows),
    };
    assert_eq!(ak, bk, "inner dimensions must agree");
    assert_eq!(c.n_rows, am);
    assert_eq!(c.n_cols, bn);

    #[cfg(feature = "lapack")]
    {
        let ta = match op_a {
            Op::None => b'N' as i8,
            Op::ConjTrans => b'C' as i8,
        };
        let tb = match op_b {
            Op::None => b'N' as i8,
            Op::ConjTrans => b'C' as i8,
        };
        let (m, n, k) = (am as i32, bn as i32, ak as i32);
        let lda = a.n_rows.max(1) as i32;
        let ldb = b.n_rows.max(1) as i32;
        let ldc = c.n_rows.max(1) as i32;
        unsafe {
            ffi::zgemm_(
                &ta,
                &tb,
                &m,
                &n,
                &k,
                &alpha as *const C64 as *const f64,
                a.data.as_ptr() as *const f64,
                &lda,
                b.data.as_ptr() as *const f64,
                &ldb,
                &beta as *const C64 as *const f64,
                c.data.as_mut_ptr() as *mut f64,
                &ldc,
            );
        }
    }
    #[cfg(not(feature = "lapack"))]
    zgemm_naive(alpha, a, op_a, b, op_b, beta, c);
}

/// Reference product used without the native BLAS and by tests that
/// cross-check the bound symbols.
pub fn zgemm_naive(alpha: C64, a: &ZMat, op_a: Op, b: &ZMat, op_b: Op, beta: C64, c: &mut ZMat) {
    let fetch_a = |r: usize, k: usize| -> C64 {
        match op_a {
            Op::None => a[(r, k)],
            Op::ConjTrans => a[(k, r)].conj(),
        }
    };
    let fetch_b = |k: usize, s: usize| -> C64 {
        match op_b {
            Op::None => b[(k, s)],
            Op::ConjTrans => b[(s, k)].conj(),
        }
    };
    let kk = match op_a {
        Op::None => a.n_cols,
        Op::ConjTrans => a.n_rows,
    };
    for s in 0..c.n_cols {
        for r in 0..c.n_rows {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..kk {
                acc += fetch_a(r, k) * fetch_b(k, s);
            }
            let prev = c[(r, s)];
            c[(r, s)] = alpha * acc + beta * prev;
        }
    }
}

/// Eigendecomposition of a Hermitian matrix. Returns eigenvalues in
/// ascending order; the columns of `a` are overwritten with the matching
/// orthonormal eigenvectors.
pub fn eigh_inplace(a: &mut ZMat) -> Result<Vec<f64>> {
    assert_eq!(a.n_rows, a.n_cols, "eigh needs a square matrix");
    let n = a.n_rows;
    if n == 0 {
        return Ok(Vec::new());
    }

    #[cfg(feature = "lapack")]
    {
        let ni = n as i32;
        let jobz = b'V' as i8;
        let uplo = b'L' as i8;
        let mut w = vec![0.0f64; n];
        let mut info: i32 = 0;

        // Workspace query.
        let mut work_q = [C64::new(0.0, 0.0)];
        let mut rwork_q = [0.0f64];
        let mut iwork_q = [0i32];
        let m1: i32 = -1;
        unsafe {
            ffi::zheevd_(
                &jobz,
                &uplo,
                &ni,
                a.data.as_mut_ptr() as *mut f64,
                &ni,
                w.as_mut_ptr(),
                work_q.as_mut_ptr() as *mut f64,
                &m1,
                rwork_q.as_mut_ptr(),
                &m1,
                iwork_q.as_mut_ptr(),
                &m1,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Eigensolver { code: info, n });
        }
        let lwork = work_q[0].re as i32;
        let lrwork = rwork_q[0] as i32;
        let liwork = iwork_q[0];
        let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
        let mut rwork = vec![0.0f64; lrwork as usize];
        let mut iwork = vec![0i32; liwork as usize];
        unsafe {
            ffi::zheevd_(
                &jobz,
                &uplo,
                &ni,
                a.data.as_mut_ptr() as *mut f64,
                &ni,
                w.as_mut_ptr(),
                work.as_mut_ptr() as *mut f64,
                &lwork,
                rwork.as_mut_ptr(),
                &lrwork,
                iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Eigensolver { code: info, n });
        }
        Ok(w)
    }

    #[cfg(not(feature = "lapack"))]
    eigh_fallback(a)
}

/// Convenience wrapper when the input should be kept.
pub fn eigh(a: &ZMat) -> Result<(Vec<f64>, ZMat)> {
    let mut m = a.clone();
    let w = eigh_inplace(&mut m)?;
    Ok((w, m))
}

/// Pure Rust Hermitian eigensolver: Householder reduction to a real
/// tridiagonal followed by implicit QL, eigenvectors accumulated along the
/// way. Always compiled so tests can cross-check it against the native path.
pub fn eigh_fallback(a: &mut ZMat) -> Result<Vec<f64>> {
    let n = a.n_rows;
    if n == 1 {
        let d = a[(0, 0)].re;
        a[(0, 0)] = C64::new(1.0, 0.0);
        return Ok(vec![d]);
    }

    let mut q = ZMat::identity(n);
    let mut beta = vec![C64::new(0.0, 0.0); n.saturating_sub(1)];

    // Householder sweep. After step k the k-th column of the working matrix
    // holds (d_k, beta_k, 0, ..., 0)^T.
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let mut x = vec![C64::new(0.0, 0.0); m];
        for i in 0..m {
            x[i] = a[(k + 1 + i, k)];
        }
        let xnorm = norm2(&x);
        if xnorm < 1e-300 {
            beta[k] = C64::new(0.0, 0.0);
            continue;
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let mut v = x.clone();
        v[0] += phase * xnorm;
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vv < 1e-300 {
            beta[k] = C64::new(0.0, 0.0);
            continue;
        }
        let tau = 2.0 / vv;

        // p = tau * A22 * v, w = p - (tau/2)(v^H p) v, A22 -= v w^H + w v^H.
        let mut p = vec![C64::new(0.0, 0.0); m];
        for c in 0..m {
            let vc = v[c];
            if vc == C64::new(0.0, 0.0) {
                continue;
            }
            for r in 0..m {
                p[r] += a[(k + 1 + r, k + 1 + c)] * vc;
            }
        }
        for z in &mut p {
            *z *= tau;
        }
        let vhp: C64 = v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum();
        let half = 0.5 * tau;
        let w: Vec<C64> = p
            .iter()
            .zip(&v)
            .map(|(pi, vi)| pi - vhp * half * vi)
            .collect();
        for c in 0..m {
            for r in 0..m {
                let upd = v[r] * w[c].conj() + w[r] * v[c].conj();
                let e = &mut a[(k + 1 + r, k + 1 + c)];
                *e -= upd;
            }
        }

        let bk = -phase * xnorm;
        beta[k] = bk;
        a[(k + 1, k)] = bk;
        a[(k, k + 1)] = bk.conj();
        for i in 1..m {
            a[(k + 1 + i, k)] = C64::new(0.0, 0.0);
            a[(k, k + 1 + i)] = C64::new(0.0, 0.0);
        }

        // Accumulate Q <- Q * diag(I, I - tau v v^H).
        for row in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..m {
                acc += q[(row, k + 1 + c)] * v[c];
            }
            acc *= tau;
            for c in 0..m {
                let sub = acc * v[c].conj();
                let e = &mut q[(row, k + 1 + c)];
                *e -= sub;
            }
        }
    }
    if n >= 2 {
        beta[n - 2] = a[(n - 1, n - 2)];
    }

    // Phase twist making the subdiagonal real nonnegative.
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    let mut dphase = vec![C64::new(1.0, 0.0); n];
    for i in 0..n {
        d[i] = a[(i, i)].re;
    }
    for j in 0..n - 1 {
        let b = beta[j];
        let ab = b.norm();
        e[j] = ab;
        dphase[j + 1] = if ab > 0.0 {
            dphase[j] * C64::new(ab, 0.0) / b
        } else {
            dphase[j]
        };
    }
    for j in 0..n {
        let ph = dphase[j].conj();
        for r in 0..n {
            let e = &mut q[(r, j)];
            *e *= ph;
        }
    }

    let mut vecs = q;
    tridiag_ql(&mut d, &mut e, &mut |i, c, s| {
        for r in 0..n {
            let h = vecs[(r, i + 1)];
            let g = vecs[(r, i)];
            vecs[(r, i + 1)] = g * s + h * c;
            vecs[(r, i)] = g * c - h * s;
        }
    })?;

    // Ascending sort, permuting columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let mut sorted = ZMat::zeros(n, n);
    let mut w = vec![0.0f64; n];
    for (dst, &src) in order.iter().enumerate() {
        w[dst] = d[src];
        sorted.set_col(dst, vecs.col(src));
    }
    *a = sorted;
    Ok(w)
}

/// Implicit shift QL on a real symmetric tridiagonal. `d` holds the
/// diagonal, `e[i]` couples entries i and i+1 (the last slot is scratch).
/// Every plane rotation applied to the working matrix is reported through
/// `rot(i, c, s)` so callers can accumulate eigenvectors in their own
/// representation. Eigenvalues are left unsorted in `d`.
pub fn tridiag_ql(
    d: &mut [f64],
    e_in: &mut [f64],
    rot: &mut dyn FnMut(usize, f64, f64),
) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(&e_in[..n - 1]);

    let eps = f64::EPSILON;
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 64 {
                    return Err(Error::Eigensolver { code: -1, n });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in l + 2..n {
                    d[i] -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let gg = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * gg;
                    d[i + 1] = h + s * (c * gg + s * d[i]);
                    rot(i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Eigendecomposition of a real symmetric tridiagonal, ascending, with the
/// real orthogonal eigenvector matrix (column major, n x n).
pub fn tridiag_eigh(diag: &[f64], offdiag: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    assert!(offdiag.len() + 1 == n || (n == 0 && offdiag.is_empty()));
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(offdiag);
    let mut z = vec![0.0f64; n * n];
    for i in 0..n {
        z[i + i * n] = 1.0;
    }
    tridiag_ql(&mut d, &mut e, &mut |i, c, s| {
        for r in 0..n {
            let h = z[r + (i + 1) * n];
            let g = z[r + i * n];
            z[r + (i + 1) * n] = g * s + h * c;
            z[r + i * n] = g * c - h * s;
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let mut dv = vec![0.0f64; n];
    let mut zv = vec![0.0f64; n * n];
    for (dst, &src) in order.iter().enumerate() {
        dv[dst] = d[src];
        zv[dst * n..(dst + 1) * n].copy_from_slice(&z[src * n..(src + 1) * n]);
    }
    Ok((dv, zv))
}

/// Solve A X = B with a general complex square A (LU with partial
/// pivoting). A and B are consumed; the solution lands in B.
pub fn lu_solve(a: &mut ZMat, b: &mut ZMat) -> Result<()> {
    assert_eq!(a.n_rows, a.n_cols);
    assert_eq!(a.n_rows, b.n_rows);
    let n = a.n_rows;

    #[cfg(feature = "lapack")]
    {
        let ni = n as i32;
        let nrhs = b.n_cols as i32;
        let mut ipiv = vec![0i32; n];
        let mut info = 0i32;
        unsafe {
            ffi::zgesv_(
                &ni,
                &nrhs,
                a.data.as_mut_ptr() as *mut f64,
                &ni,
                ipiv.as_mut_ptr(),
                b.data.as_mut_ptr() as *mut f64,
                &ni.max(1),
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Eigensolver { code: info, n });
        }
        return Ok(());
    }

    #[cfg(not(feature = "lapack"))]
    {
        // Plain Gaussian elimination; only exercised on small systems.
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].norm();
            for r in k + 1..n {
                let v = a[(r, k)].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(Error::Eigensolver { code: 1 + k as i32, n });
            }
            if piv != k {
                for c in 0..n {
                    let tmp = a[(k, c)];
                    a[(k, c)] = a[(piv, c)];
                    a[(piv, c)] = tmp;
                }
                for c in 0..b.n_cols {
                    let tmp = b[(k, c)];
                    b[(k, c)] = b[(piv, c)];
                    b[(piv, c)] = tmp;
                }
            }
            let inv = C64::new(1.0, 0.0) / a[(k, k)];
            for r in k + 1..n {
                let factor = a[(r, k)] * inv;
                if factor == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in k..n {
                    let sub = factor * a[(k, c)];
                    let e = &mut a[(r, c)];
                    *e -= sub;
                }
                for c in 0..b.n_cols {
                    let sub = factor * b[(k, c)];
                    let e = &mut b[(r, c)];
                    *e -= sub;
                }
            }
        }
        for c in 0..b.n_cols {
            for k in (0..n).rev() {
                let mut acc = b[(k, c)];
                for j in k + 1..n {
                    acc -= a[(k, j)] * b[(j, c)];
                }
                b[(k, c)] = acc / a[(k, k)];
            }
        }
        Ok(())
    }
}

fn random_unit_vector(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let nrm = norm2(&v);
    for z in &mut v {
        *z /= nrm;
    }
    v
}

/// Orthogonalize `v` against the first `m` columns of `q` twice (classical
/// Gram-Schmidt with reorthogonalization).
fn reorthogonalize(v: &mut [C64], q: &ZMat, m: usize) {
    for _ in 0..2 {
        for j in 0..m {
            let c = dot(q.col(j), v);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for (vi, qi) in v.iter_mut().zip(q.col(j)) {
                *vi -= c * qi;
            }
        }
    }
}

/// Outcome of a Krylov diagonalization: the requested lowest eigenpairs.
pub struct LanczosResult {
    pub values: Vec<f64>,
    /// dim x n_want, orthonormal Ritz vectors matching `values`.
    pub vectors: ZMat,
    pub iterations: usize,
}

/// Lowest `n_want` eigenpairs of a Hermitian operator given through its
/// action. A single Krylov sequence sees each distinct eigenvalue once, so
/// degenerate levels are resolved by running fully reorthogonalized Lanczos
/// repeatedly, deflating all previously converged vectors; every run
/// contributes one eigenpair. `tol` is a residual tolerance relative to the
/// spectral width estimate of the current run.
pub fn lanczos_lowest(
    apply: &mut dyn FnMut(&[C64], &mut [C64]),
    dim: usize,
    n_want: usize,
    tol: f64,
    max_krylov: usize,
    seed: u64,
) -> Result<LanczosResult> {
    assert!(n_want >= 1);
    let n_want = n_want.min(dim);

    let mut values = Vec::with_capacity(n_want);
    let mut vectors = ZMat::zeros(dim, n_want);
    let mut total_iter = 0usize;

    for run in 0..n_want {
        let conv = SubMatView {
            mat: &vectors,
            n_cols: run,
        };
        let (val, vec, iters) =
            lanczos_one(apply, dim, &conv, tol, max_krylov, seed ^ (run as u64) << 32)?;
        values.push(val);
        vectors.set_col(run, &vec);
        total_iter += iters;
    }

    // Runs are deflated, so values arrive in ascending order up to residual
    // error; enforce the ordering exactly.
    let mut order: Vec<usize> = (0..n_want).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut sorted_vals = Vec::with_capacity(n_want);
    let mut sorted_vecs = ZMat::zeros(dim, n_want);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vals.push(values[src]);
        sorted_vecs.set_col(dst, vectors.col(src));
    }

    Ok(LanczosResult {
        values: sorted_vals,
        vectors: sorted_vecs,
        iterations: total_iter,
    })
}

/// Leading columns of a matrix, used as a deflation set.
struct SubMatView<'a> {
    mat: &'a ZMat,
    n_cols: usize,
}

/// One deflated Lanczos run: lowest eigenpair of the operator restricted to
/// the orthogonal complement of the converged columns.
fn lanczos_one(
    apply: &mut dyn FnMut(&[C64], &mut [C64]),
    dim: usize,
    deflate: &SubMatView,
    tol: f64,
    max_krylov: usize,
    seed: u64,
) -> Result<(f64, Vec<C64>, usize)> {
    let n_defl = deflate.n_cols;
    let max_m = max_krylov.min(dim - n_defl).max(1);

    let project_out = |v: &mut [C64]| {
        for _ in 0..2 {
            for j in 0..n_defl {
                let c = dot(deflate.mat.col(j), v);
                for (vi, qi) in v.iter_mut().zip(deflate.mat.col(j)) {
                    *vi -= c * qi;
                }
            }
        }
    };

    // Seed in the deflated complement.
    let mut v0 = Vec::new();
    for attempt in 0..8u64 {
        let mut cand = random_unit_vector(dim, seed.wrapping_add(attempt.wrapping_mul(0x9e37)));
        project_out(&mut cand);
        let nrm = norm2(&cand);
        if nrm > 1e-8 {
            for z in &mut cand {
                *z /= nrm;
            }
            v0 = cand;
            break;
        }
    }
    if v0.is_empty() {
        return Err(Error::KrylovStall {
            max_iter: 8,
            residual: 0.0,
        });
    }

    let mut q = ZMat::zeros(dim, max_m);
    q.set_col(0, &v0);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut work = vec![C64::new(0.0, 0.0); dim];
    let mut m = 0usize;
    let mut exhausted = false;

    loop {
        apply(q.col(m), &mut work);
        let a_m = dot(q.col(m), &work).re;
        alpha.push(a_m);
        {
            let qm = q.col(m).to_vec();
            for (wi, qi) in work.iter_mut().zip(&qm) {
                *wi -= a_m * qi;
            }
        }
        if m > 0 {
            let b_prev = beta[m - 1];
            let qp = q.col(m - 1).to_vec();
            for (wi, qi) in work.iter_mut().zip(&qp) {
                *wi -= b_prev * qi;
            }
        }
        project_out(&mut work);
        reorthogonalize(&mut work, &q, m + 1);
        let b_m = norm2(&work);
        m += 1;

        let scale = 1.0 + alpha.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if b_m <= 1e-13 * scale || m == max_m {
            exhausted = true;
        }

        if exhausted || m % 8 == 0 {
            let (vals, z) = tridiag_eigh(&alpha, &beta[..m - 1])?;
            let width = (vals[m - 1] - vals[0]).abs().max(1.0);
            let tail = z[m - 1].abs(); // last component of the lowest Ritz vector
            let resid = if exhausted && b_m <= 1e-13 * scale {
                0.0
            } else {
                b_m * tail
            };
            if resid <= tol * width || exhausted {
                if resid > tol * width {
                    return Err(Error::KrylovStall {
                        max_iter: max_m,
                        residual: resid,
                    });
                }
                let coeffs = &z[..m];
                let mut acc = vec![C64::new(0.0, 0.0); dim];
                for (j, &cj) in coeffs.iter().enumerate() {
                    if cj == 0.0 {
                        continue;
                    }
                    for (ar, qr) in acc.iter_mut().zip(q.col(j)) {
                        *ar += cj * qr;
                    }
                }
                project_out(&mut acc);
                let nrm = norm2(&acc);
                for zv in &mut acc {
                    *zv /= nrm;
                }
                return Ok((vals[0], acc, m));
            }
        }

        beta.push(b_m);
        let col: Vec<C64> = work.iter().map(|z| z / b_m).collect();
        q.set_col(m, &col);
    }
}

/// exp(i t A) v for Hermitian A given through its action, by the Lanczos
/// projection of the exponential. The result keeps the norm of `v` to
/// rounding (the projected propagator is exactly unitary on the Krylov
/// space).
pub fn expm_i_hermitian(
    apply: &mut dyn FnMut(&[C64], &mut [C64]),
    dim: usize,
    v: &[C64],
    t: f64,
    tol: f64,
    max_krylov: usize,
) -> Result<Vec<C64>> {
    assert_eq!(v.len(), dim);
    let vnorm = norm2(v);
    if vnorm == 0.0 || t == 0.0 {
        return Ok(v.to_vec());
    }
    let max_m = max_krylov.min(dim).max(2);

    let mut q = ZMat::zeros(dim, max_m);
    {
        let col: Vec<C64> = v.iter().map(|z| z / vnorm).collect();
        q.set_col(0, &col);
    }
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut work = vec![C64::new(0.0, 0.0); dim];
    let mut m = 0usize;
    let mut breakdown = false;

    loop {
        apply(q.col(m), &mut work);
        let a_m = dot(q.col(m), &work).re;
        alpha.push(a_m);
        {
            let qm = q.col(m).to_vec();
            for (wi, qi) in work.iter_mut().zip(&qm) {
                *wi -= a_m * qi;
            }
        }
        if m > 0 {
            let b_prev = beta[m - 1];
            let qp = q.col(m - 1).to_vec();
            for (wi, qi) in work.iter_mut().zip(&qp) {
                *wi -= b_prev * qi;
            }
        }
        reorthogonalize(&mut work, &q, m + 1);
        let b_m = norm2(&work);
        m += 1;

        if b_m <= 1e-14 * (1.0 + a_m.abs()) {
            breakdown = true;
        }

        if breakdown || m == max_m || m % 4 == 0 {
            let (vals, z) = tridiag_eigh(&alpha, &beta[..m - 1])?;
            // y = exp(i t T) e_1 in the Krylov basis.
            let mut y = vec![C64::new(0.0, 0.0); m];
            for i in 0..m {
                let phase = C64::new(0.0, t * vals[i]).exp();
                let zi0 = z[i * m];
                for r in 0..m {
                    y[r] += z[i * m + r] * zi0 * phase;
                }
            }
            let err = if breakdown { 0.0 } else { b_m * y[m - 1].norm() };
            if breakdown || err <= tol || m == max_m {
                if !(breakdown || err <= tol) {
                    return Err(Error::KrylovStall {
                        max_iter: max_m,
                        residual: err,
                    });
                }
                let mut out = vec![C64::new(0.0, 0.0); dim];
                for (j, yj) in y.iter().enumerate() {
                    if *yj == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (or, qr) in out.iter_mut().zip(q.col(j)) {
                        *or += yj * qr;
                    }
                }
                for z in &mut out {
                    *z *= vnorm;
                }
                return Ok(out);
            }
        }

        beta.push(b_m);
        let col: Vec<C64> = work.iter().map(|z| z / b_m).collect();
        q.set_col(m, &col);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> ZMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ZMat::zeros(n, n);
        for c in 0..n {
            for r in 0..=c {
                if r == c {
                    m[(r, c)] = C64::new(rng.gen::<f64>() - 0.5, 0.0);
                } else {
                    let z = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    m[(r, c)] = z;
                    m[(c, r)] = z.conj();
                }
            }
        }
        m
    }

    fn residual(a: &ZMat, vals: &[f64], vecs: &ZMat) -> f64 {
        // ||A V - V diag(w)||_F
        let av = a.mul(vecs);
        let mut r = 0.0f64;
        for j in 0..vecs.n_cols {
            for i in 0..a.n_rows {
                let d = av[(i, j)] - vecs[(i, j)] * vals[j];
                r += d.norm_sqr();
            }
        }
        r.sqrt()
    }

    fn orthonormality_defect(v: &ZMat) -> f64 {
        let g = v.adjoint_mul(v);
        let mut worst = 0.0f64;
        for c in 0..g.n_cols {
            for r in 0..g.n_rows {
                let want = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((g[(r, c)] - C64::new(want, 0.0)).norm());
            }
        }
        worst
    }

    #[test]
    fn eigh_two_by_two_closed_form() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let mut m = ZMat::zeros(2, 2);
        m[(0, 0)] = C64::new(2.0, 0.0);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, -1.0);
        m[(1, 1)] = C64::new(2.0, 0.0);
        let keep = m.clone();
        let w = eigh_inplace(&mut m).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-13);
        assert!((w[1] - 3.0).abs() < 1e-13);
        assert!(residual(&keep, &w, &m) < 1e-12);
        assert!(orthonormality_defect(&m) < 1e-12);
    }

    #[test]
    fn eigh_random_residual() {
        let a = random_hermitian(60, 7);
        let (w, v) = eigh(&a).unwrap();
        for i in 1..w.len() {
            assert!(w[i] >= w[i - 1]);
        }
        assert!(residual(&a, &w, &v) < 1e-10 * a.frobenius_norm().max(1.0));
        assert!(orthonormality_defect(&v) < 1e-11);
        let trace: f64 = (0..60).map(|i| a[(i, i)].re).sum();
        let wsum: f64 = w.iter().sum();
        assert!((trace - wsum).abs() < 1e-9);
    }

    #[test]
    fn fallback_matches_native_path() {
        let a = random_hermitian(40, 11);
        let mut b = a.clone();
        let w_fb = eigh_fallback(&mut b).unwrap();
        assert!(residual(&a, &w_fb, &b) < 1e-10 * a.frobenius_norm().max(1.0));
        assert!(orthonormality_defect(&b) < 1e-11);
        let (w, _) = eigh(&a).unwrap();
        for (x, y) in w.iter().zip(&w_fb) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn gemm_matches_reference() {
        let a = random_hermitian(23, 3);
        let b = random_hermitian(23, 4);
        for (opa, opb) in [
            (Op::None, Op::None),
            (Op::ConjTrans, Op::None),
            (Op::None, Op::ConjTrans),
            (Op::ConjTrans, Op::ConjTrans),
        ] {
            let mut c1 = ZMat::zeros(23, 23);
            let mut c2 = ZMat::zeros(23, 23);
            zgemm(C64::new(1.3, -0.2), &a, opa, &b, opb, C64::new(0.0, 0.0), &mut c1);
            zgemm_naive(C64::new(1.3, -0.2), &a, opa, &b, opb, C64::new(0.0, 0.0), &mut c2);
            c1.axpy(C64::new(-1.0, 0.0), &c2);
            assert!(c1.max_abs() < 1e-11);
        }
    }

    #[test]
    fn tridiag_matches_dense() {
        let n = 30;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.3 + (i as f64 * 0.31).cos().abs()).collect();
        let (w, z) = tridiag_eigh(&diag, &off).unwrap();

        let mut dense = ZMat::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = C64::new(diag[i], 0.0);
        }
        for i in 0..n - 1 {
            dense[(i + 1, i)] = C64::new(off[i], 0.0);
            dense[(i, i + 1)] = C64::new(off[i], 0.0);
        }
        let (wd, _) = eigh(&dense).unwrap();
        for (x, y) in w.iter().zip(&wd) {
            assert!((x - y).abs() < 1e-11);
        }
        // Orthogonality of the accumulated real eigenvectors.
        for i in 0..n {
            for j in 0..n {
                let g: f64 = (0..n).map(|r| z[i * n + r] * z[j * n + r]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lanczos_matches_dense_spectrum() {
        let n = 300;
        let a = random_hermitian(n, 21);
        let (wd, vd) = eigh(&a).unwrap();
        let mut apply = |x: &[C64], y: &mut [C64]| {
            let out = a.matvec(x);
            y.copy_from_slice(&out);
        };
        let res = lanczos_lowest(&mut apply, n, 4, 1e-11, 200, 5).unwrap();
        for i in 0..4 {
            assert!((res.values[i] - wd[i]).abs() < 1e-8, "ritz {i}");
        }
        // Vectors span the same subspace: overlap matrix close to unitary.
        let mut low = ZMat::zeros(n, 4);
        for j in 0..4 {
            low.set_col(j, vd.col(j));
        }
        let ov = low.adjoint_mul(&res.vectors);
        let (sv, _) = eigh(&ov.adjoint_mul(&ov)).unwrap();
        for s in sv {
            assert!((s - 1.0).abs() < 1e-6, "overlap singular value {s}");
        }
    }

    #[test]
    fn expm_matches_dense_exponential() {
        let n = 80;
        let a = random_hermitian(n, 31);
        let t = 0.83;
        let v0 = random_unit_vector(n, 9);
        let mut apply = |x: &[C64], y: &mut [C64]| {
            let out = a.matvec(x);
            y.copy_from_slice(&out);
        };
        let fast = expm_i_hermitian(&mut apply, n, &v0, t, 1e-12, 200).unwrap();

        let (w, v) = eigh(&a).unwrap();
        let coeff = v.adjoint_matvec(&v0);
        let mut exact = vec![C64::new(0.0, 0.0); n];
        for (j, c) in coeff.iter().enumerate() {
            let phase = C64::new(0.0, t * w[j]).exp();
            for (er, vr) in exact.iter_mut().zip(v.col(j)) {
                *er += phase * c * vr;
            }
        }
        let diff: f64 = fast
            .iter()
            .zip(&exact)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-10, "diff {diff}");
        assert!((norm2(&fast) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lu_solves_small_system() {
        let n = 12;
        let mut a = random_hermitian(n, 41);
        for i in 0..n {
            a[(i, i)] += C64::new(4.0, 0.0);
        }
        let x_true = random_unit_vector(n, 17);
        let b = a.matvec(&x_true);
        let mut bm = ZMat::zeros(n, 1);
        bm.set_col(0, &b);
        let mut aa = a.clone();
        lu_solve(&mut aa, &mut bm).unwrap();
        let err: f64 = bm
            .col(0)
            .iter()
            .zip(&x_true)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-11);
    }
}
