//! Thin wrappers over the divide-and-conquer LAPACK eigensolvers.
//!
//! `ndarray-linalg` only exposes the QR-iteration drivers (`?syev`/`?heev`),
//! which are 5-10x slower than `?syevd`/`?heevd` at the matrix sizes hit in
//! the CMA-ES covariance update and the dense Hamiltonian oracles. The
//! symbols resolve from the same system OpenBLAS that `ndarray-linalg`
//! links.

use ndarray::prelude::*;
use ndarray::ShapeBuilder;
use num_complex::Complex64;

use crate::error::{Error, Result};

extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn zheevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        lrwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
}

/// Eigendecomposition of a real symmetric matrix: ascending eigenvalues and
/// the matrix whose columns are the matching eigenvectors.
pub fn eigh_symmetric(a: &ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh_symmetric requires a square matrix");
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    // A symmetric matrix equals its transpose, so the row-major buffer can be
    // handed to column-major LAPACK as-is.
    let mut buf: Vec<f64> = a.iter().copied().collect();
    let mut w = vec![0.0; n];
    let ni = n as i32;
    let mut info = 0i32;

    let (mut wq, mut iwq) = ([0.0f64], [0i32]);
    unsafe {
        dsyevd_(
            b"V".as_ptr(),
            b"L".as_ptr(),
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            wq.as_mut_ptr(),
            &-1,
            iwq.as_mut_ptr(),
            &-1,
            &mut info,
        );
    }
    let lwork = wq[0] as i32;
    let liwork = iwq[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        dsyevd_(
            b"V".as_ptr(),
            b"L".as_ptr(),
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dsyevd",
            info,
        });
    }
    // LAPACK wrote eigenvectors as columns of a column-major buffer.
    let vectors = Array2::from_shape_vec((n, n).f(), buf).expect("shape fixed above");
    Ok((Array1::from(w), vectors))
}

/// Eigendecomposition of a complex Hermitian matrix: ascending eigenvalues
/// and the matrix whose columns are the matching eigenvectors.
pub fn eigh_hermitian(a: &ArrayView2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh_hermitian requires a square matrix");
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    // Hand LAPACK the conjugate (= transpose in column-major terms) so the
    // eigenvector columns come back in the right basis.
    let mut buf: Vec<Complex64> = a.iter().map(|z| z.conj()).collect();
    let mut w = vec![0.0; n];
    let ni = n as i32;
    let mut info = 0i32;

    let (mut wq, mut rwq, mut iwq) = ([Complex64::new(0.0, 0.0)], [0.0f64], [0i32]);
    unsafe {
        zheevd_(
            b"V".as_ptr(),
            b"L".as_ptr(),
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            wq.as_mut_ptr(),
            &-1,
            rwq.as_mut_ptr(),
            &-1,
            iwq.as_mut_ptr(),
            &-1,
            &mut info,
        );
    }
    let lwork = wq[0].re as i32;
    let lrwork = rwq[0] as i32;
    let liwork = iwq[0];
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        zheevd_(
            b"V".as_ptr(),
            b"L".as_ptr(),
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd",
            info,
        });
    }
    let vectors = Array2::from_shape_vec((n, n).f(), buf).expect("shape fixed above");
    Ok((Array1::from(w), vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_eigendecomposition_reconstructs() {
        let n = 12;
        let a = Array2::from_shape_fn((n, n), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let s = &a + &a.t();
        let (w, v) = eigh_symmetric(&s.view()).unwrap();
        let rec = v.dot(&Array2::from_diag(&w)).dot(&v.t());
        for (x, y) in rec.iter().zip(s.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
        assert!(w.windows(2).into_iter().all(|p| p[0] <= p[1]));
    }

    #[test]
    fn hermitian_eigendecomposition_reconstructs() {
        let n = 9;
        let a = Array2::from_shape_fn((n, n), |(i, j)| {
            Complex64::new((i + 2 * j) as f64, (i as f64) - (j as f64))
        });
        let h = &a + &a.t().mapv(|z| z.conj());
        let (w, v) = eigh_hermitian(&h.view()).unwrap();
        let vh = v.t().mapv(|z| z.conj());
        let rec = v.dot(&Array2::from_diag(&w.mapv(|x| Complex64::new(x, 0.0)))).dot(&vh);
        for (x, y) in rec.iter().zip(h.iter()) {
            assert_abs_diff_eq!(x.re, y.re, epsilon = 1e-9);
            assert_abs_diff_eq!(x.im, y.im, epsilon = 1e-9);
        }
    }
}
