//! Complex dense tensor arithmetic, contraction, and matrix factorizations.
//!
//! Everything downstream (MPS algebra, circuit simulation, DMRG, the
//! decomposition protocol) funnels its numerics through this module. All
//! arithmetic is complex double precision; values are immutable after
//! construction and safe to share across threads.

mod lapack;

use ndarray::prelude::*;
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub use lapack::{eigh_hermitian, eigh_symmetric};

/// Dense complex tensor with a fixed row-major layout; the universal
/// numerical carrier between modules.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    data: ArrayD<Complex64>,
}

impl DenseTensor {
    /// Builds a tensor from a shape and row-major data, validating that
    /// `product(shape) == data.len()` and that every entry is finite.
    pub fn from_shape_vec(shape: &[usize], data: Vec<Complex64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} implies {} entries, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        let arr = ArrayD::from_shape_vec(IxDyn(shape), data).expect("length checked");
        Self::from_array(arr)
    }

    /// Wraps an ndarray, validating finiteness and normalizing the layout
    /// to row-major.
    pub fn from_array<D: Dimension>(arr: Array<Complex64, D>) -> Result<Self> {
        if arr.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalInput(
                "tensor entries must be finite".into(),
            ));
        }
        let dyn_arr = arr.into_dyn();
        let data = if dyn_arr.is_standard_layout() {
            dyn_arr
        } else {
            dyn_arr.as_standard_layout().into_owned()
        };
        Ok(Self { data })
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn ndim(&self) -> usize {
        self.data.ndim()
    }

    /// Row-major view of the underlying data.
    pub fn data(&self) -> &[Complex64] {
        self.data.as_slice().expect("standard layout is enforced")
    }

    pub fn array(&self) -> &ArrayD<Complex64> {
        &self.data
    }

    pub fn into_array(self) -> ArrayD<Complex64> {
        self.data
    }

    /// Tensor contraction over the listed `(axis-of-self, axis-of-other)`
    /// pairs; see [`contract`].
    pub fn contract(&self, other: &DenseTensor, axis_pairs: &[(usize, usize)]) -> Result<DenseTensor> {
        contract(self, other, axis_pairs)
    }

    /// Squared Frobenius norm, as a real number.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Contracts two tensors over the given axis pairs.
///
/// The result carries `a`'s free axes (in order) followed by `b`'s free
/// axes. Contracting over no pairs is the outer product; contracting over
/// all axes of both yields a rank-0 tensor.
pub fn contract(a: &DenseTensor, b: &DenseTensor, axis_pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let out = tensordot(&a.data.view(), &b.data.view(), axis_pairs)?;
    DenseTensor::from_array(out)
}

/// Contraction kernel on raw ndarray views: permute the contracted axes to
/// the boundary, flatten, and run a single complex GEMM.
pub fn tensordot(
    a: &ArrayViewD<'_, Complex64>,
    b: &ArrayViewD<'_, Complex64>,
    axis_pairs: &[(usize, usize)],
) -> Result<ArrayD<Complex64>> {
    let mut seen_a = vec![false; a.ndim()];
    let mut seen_b = vec![false; b.ndim()];
    for &(ax_a, ax_b) in axis_pairs {
        if ax_a >= a.ndim() || ax_b >= b.ndim() {
            return Err(Error::ShapeMismatch(format!(
                "axis pair ({ax_a}, {ax_b}) out of range for ranks ({}, {})",
                a.ndim(),
                b.ndim()
            )));
        }
        if seen_a[ax_a] || seen_b[ax_b] {
            return Err(Error::ShapeMismatch(format!(
                "axis repeated in contraction: ({ax_a}, {ax_b})"
            )));
        }
        seen_a[ax_a] = true;
        seen_b[ax_b] = true;
        if a.shape()[ax_a] != b.shape()[ax_b] {
            return Err(Error::ShapeMismatch(format!(
                "contracted axes differ in length: {} vs {}",
                a.shape()[ax_a],
                b.shape()[ax_b]
            )));
        }
    }

    let free_a: Vec<usize> = (0..a.ndim()).filter(|i| !seen_a[*i]).collect();
    let free_b: Vec<usize> = (0..b.ndim()).filter(|i| !seen_b[*i]).collect();

    let mut perm_a = free_a.clone();
    perm_a.extend(axis_pairs.iter().map(|p| p.0));
    let mut perm_b: Vec<usize> = axis_pairs.iter().map(|p| p.1).collect();
    perm_b.extend(free_b.iter().copied());

    let m: usize = free_a.iter().map(|&i| a.shape()[i]).product();
    let k: usize = axis_pairs.iter().map(|&(i, _)| a.shape()[i]).product();
    let n: usize = free_b.iter().map(|&i| b.shape()[i]).product();

    let a_mat = a
        .view()
        .permuted_axes(perm_a)
        .as_standard_layout()
        .into_owned()
        .into_shape((m, k))
        .expect("permuted dims multiply to (m, k)");
    let b_mat = b
        .view()
        .permuted_axes(perm_b)
        .as_standard_layout()
        .into_owned()
        .into_shape((k, n))
        .expect("permuted dims multiply to (k, n)");

    let c = a_mat.dot(&b_mat);

    let mut out_shape: Vec<usize> = free_a.iter().map(|&i| a.shape()[i]).collect();
    out_shape.extend(free_b.iter().map(|&i| b.shape()[i]));
    Ok(c.into_shape(IxDyn(&out_shape)).expect("dims preserved"))
}

/// Result of a truncated singular value decomposition.
///
/// `left` has orthonormal columns, `right` is the row-orthonormal V†
/// factor, `singular_values` are non-negative and non-increasing, and
/// `discarded_weight` is the sum of the squared dropped singular values.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: Array2<Complex64>,
    pub singular_values: Array1<f64>,
    pub right: Array2<Complex64>,
    pub discarded_weight: f64,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `left · diag(singular_values) · right`.
    pub fn reconstruct(&self) -> Array2<Complex64> {
        let s = Array2::from_diag(&self.singular_values.mapv(|x| Complex64::new(x, 0.0)));
        self.left.dot(&s).dot(&self.right)
    }
}

/// Truncated SVD keeping at most `chi_max` singular values and dropping any
/// value below `sv_threshold` relative to the unit-Frobenius-normalized
/// spectrum (so the cut is scale-invariant). At least one value is always
/// kept. `chi_max = None` means unlimited.
pub fn svd_truncated(
    m: &ArrayView2<'_, Complex64>,
    chi_max: Option<usize>,
    sv_threshold: f64,
) -> Result<SvdResult> {
    if m.is_empty() {
        return Err(Error::ShapeMismatch("svd of an empty matrix".into()));
    }
    if let Some(0) = chi_max {
        return Err(Error::Config("chi_max must be at least 1".into()));
    }
    if !sv_threshold.is_finite() || sv_threshold < 0.0 {
        return Err(Error::Config(format!(
            "sv_threshold must be a non-negative finite value, got {sv_threshold}"
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalInput("svd input must be finite".into()));
    }

    let (u, s, vt) = m.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Config("svd did not return U".into()))?;
    let vt = vt.ok_or_else(|| Error::Config("svd did not return V†".into()))?;

    let frob = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cut = if frob > 0.0 { sv_threshold * frob } else { 0.0 };

    let mut keep = s.iter().take_while(|&&x| x >= cut).count();
    keep = keep.max(1);
    if let Some(chi) = chi_max {
        keep = keep.min(chi);
    }
    keep = keep.min(s.len());

    let discarded_weight = s.iter().skip(keep).map(|x| x * x).sum::<f64>();

    Ok(SvdResult {
        left: u.slice(s![.., ..keep]).to_owned(),
        singular_values: Array1::from_iter(s.iter().take(keep).copied()),
        right: vt.slice(s![..keep, ..]).to_owned(),
        discarded_weight,
    })
}

/// Relative rank tolerance below which polar projection is refused.
const POLAR_RANK_TOL: f64 = 1e-12;

/// The unitary matrix closest to `m`: the `U·V†` polar factor from the SVD
/// `m = U·S·V†`. Among unitaries it maximizes `Re tr(m† W)`.
pub fn closest_unitary(m: &ArrayView2<'_, Complex64>) -> Result<Array2<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "polar projection needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalInput("polar input must be finite".into()));
    }
    let (u, s, vt) = m.svddc(JobSvd::Some)?;
    let u = u.expect("requested");
    let vt = vt.expect("requested");
    let smallest = s[s.len() - 1];
    if smallest <= POLAR_RANK_TOL * s[0] || s[0] == 0.0 {
        return Err(Error::DegeneratePolar { smallest });
    }
    Ok(u.dot(&vt))
}

/// Hard cap on dense Hermitian eigensolves (2^14).
const EIGH_DIM_CAP: usize = 1 << 14;

/// The `k` smallest eigenpairs of a Hermitian matrix, eigenvalues
/// ascending and eigenvectors as orthonormal columns.
pub fn eigh_smallest(h: &ArrayView2<'_, Complex64>, k: usize) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "eigensolve needs a square matrix, got {}x{}",
            n,
            h.ncols()
        )));
    }
    if n > EIGH_DIM_CAP {
        return Err(Error::Config(format!(
            "dense eigensolve capped at dimension {EIGH_DIM_CAP}, got {n}"
        )));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "requested {k} eigenpairs of a {n}-dimensional matrix"
        )));
    }
    let deviation = hermiticity_deviation(h);
    let scale = h.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    if deviation > 1e-10 * scale {
        return Err(Error::NotHermitian { deviation });
    }

    let (w, v) = lapack::eigh_hermitian(h)?;
    Ok((
        w.slice(s![..k]).to_owned(),
        v.slice(s![.., ..k]).to_owned(),
    ))
}

/// Max entrywise deviation `|h - h†|`.
pub fn hermiticity_deviation(h: &ArrayView2<'_, Complex64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..h.nrows() {
        for j in i..h.ncols() {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Conjugate transpose.
pub fn dagger(m: &ArrayView2<'_, Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

/// Max entrywise deviation of `u†u` from the identity.
pub fn unitarity_deviation(u: &ArrayView2<'_, Complex64>) -> f64 {
    let g = dagger(u).dot(u);
    let mut dev: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// Complex identity matrix.
pub fn eye(n: usize) -> Array2<Complex64> {
    Array2::from_diag(&Array1::from_elem(n, Complex64::new(1.0, 0.0)))
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix with
/// the R-diagonal phase fix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<Complex64> {
    use rand_distr::StandardNormal;
    let g = Array2::from_shape_fn((n, n), |_| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    // Gram-Schmidt with per-column phase convention; n stays tiny here.
    let mut q = g;
    for j in 0..n {
        for prev in 0..j {
            let col_prev = q.column(prev).to_owned();
            let proj: Complex64 = col_prev
                .iter()
                .zip(q.column(j).iter())
                .map(|(p, c)| p.conj() * c)
                .sum();
            let mut col_j = q.column_mut(j);
            col_j.zip_mut_with(&col_prev, |c, p| *c -= proj * p);
        }
        let norm = q.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let phase = {
            let first = q.column(j)[0];
            if first.norm() > 0.0 {
                first / first.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        };
        let scale = phase.conj() / norm;
        q.column_mut(j).mapv_inplace(|z| z * scale);
    }
    q
}

/// Pairwise summation of complex terms; the reduction tree is a function
/// of the length alone, so results do not depend on evaluation order.
pub fn pairwise_sum(terms: &[Complex64]) -> Complex64 {
    const BASE: usize = 32;
    if terms.len() <= BASE {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in terms {
            acc += *t;
        }
        acc
    } else {
        let mid = terms.len() / 2;
        pairwise_sum(&terms[..mid]) + pairwise_sum(&terms[mid..])
    }
}

/// Pairwise summation for real terms.
pub fn pairwise_sum_f64(terms: &[f64]) -> f64 {
    const BASE: usize = 32;
    if terms.len() <= BASE {
        terms.iter().sum()
    } else {
        let mid = terms.len() / 2;
        pairwise_sum_f64(&terms[..mid]) + pairwise_sum_f64(&terms[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_tensor<R: Rng>(shape: &[usize], rng: &mut R) -> DenseTensor {
        let len: usize = shape.iter().product();
        let data: Vec<Complex64> = (0..len)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        DenseTensor::from_shape_vec(shape, data).unwrap()
    }

    #[test]
    fn identity_contraction_preserves_vector() {
        let id = DenseTensor::from_shape_vec(&[2, 2], vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let v = DenseTensor::from_shape_vec(&[2], vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let out = contract(&id, &v, &[(1, 0)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        assert_abs_diff_eq!(out.data()[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.data()[1].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn matrix_product_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_tensor(&[3, 4], &mut rng);
        let b = random_tensor(&[4, 5], &mut rng);
        let out = contract(&a, &b, &[(1, 0)]).unwrap();

        // independent oracle: naive triple loop
        for i in 0..3 {
            for j in 0..5 {
                let mut acc = c(0.0, 0.0);
                for k in 0..4 {
                    acc += a.data()[i * 4 + k] * b.data()[k * 5 + j];
                }
                let got = out.data()[i * 5 + j];
                assert_abs_diff_eq!((got - acc).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn full_self_contraction_gives_squared_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_tensor(&[2, 3, 2], &mut rng);
        let conj =
            DenseTensor::from_array(a.array().mapv(|z| z.conj())).unwrap();
        let out = contract(&conj, &a, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(out.shape(), &[] as &[usize]);
        let got = out.data()[0];
        assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(got.re, a.norm_sqr(), epsilon = 1e-12);
        assert!(got.re >= 0.0);
    }

    #[test]
    fn contraction_rejects_mismatched_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_tensor(&[3, 4], &mut rng);
        let b = random_tensor(&[5, 5], &mut rng);
        assert!(matches!(
            contract(&a, &b, &[(1, 0)]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn contract_is_bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let a = random_tensor(&[2, 3], &mut rng);
            let b = random_tensor(&[3, 4], &mut rng);
            let alpha = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let scaled = DenseTensor::from_array(a.array().mapv(|z| alpha * z)).unwrap();
            let lhs = contract(&scaled, &b, &[(1, 0)]).unwrap();
            let rhs = contract(&a, &b, &[(1, 0)]).unwrap();
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                assert_abs_diff_eq!((x - alpha * y).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn svd_identity_keeps_unit_spectrum() {
        let id = eye(4);
        let out = svd_truncated(&id.view(), Some(4), 0.0).unwrap();
        assert_eq!(out.rank(), 4);
        for s in out.singular_values.iter() {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(out.discarded_weight, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn svd_rank_one_keeps_single_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = Array1::from_shape_fn(4, |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let v = Array1::from_shape_fn(4, |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let m = Array2::from_shape_fn((4, 4), |(i, j)| u[i] * v[j].conj());
        let out = svd_truncated(&m.view(), Some(3), 1e-12).unwrap();
        assert_eq!(out.rank(), 1);
        assert!(out.singular_values[0] > 0.0);
        assert_abs_diff_eq!(out.discarded_weight, 0.0, epsilon = 1e-20);
    }

    #[test]
    fn svd_discarded_weight_matches_gram_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = Array2::from_shape_fn((8, 8), |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let out = svd_truncated(&m.view(), Some(3), 0.0).unwrap();

        // independent oracle: eigenvalues of m†m are the squared singular values
        let gram = dagger(&m.view()).dot(&m);
        let (evals, _) = eigh_hermitian(&gram.view()).unwrap();
        let expected: f64 = evals.iter().take(5).sum(); // 5 smallest squared values
        assert_abs_diff_eq!(out.discarded_weight, expected, epsilon = 1e-9);
    }

    #[test]
    fn svd_reconstruction_error_equals_discarded_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for chi in [1usize, 2, 4, 6] {
            let m = Array2::from_shape_fn((6, 7), |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let out = svd_truncated(&m.view(), Some(chi), 0.0).unwrap();
            let rec = out.reconstruct();
            let err: f64 = m
                .iter()
                .zip(rec.iter())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum();
            assert_abs_diff_eq!(err, out.discarded_weight, epsilon = 1e-9);
        }
    }

    #[test]
    fn svd_threshold_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let m = Array2::from_shape_fn((6, 6), |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let r1 = svd_truncated(&m.view(), None, 1e-1).unwrap();
        let scaled = m.mapv(|z| z * 1e6);
        let r2 = svd_truncated(&scaled.view(), None, 1e-1).unwrap();
        assert_eq!(r1.rank(), r2.rank());
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = eye(2);
        m[(0, 0)] = c(f64::NAN, 0.0);
        assert!(matches!(
            svd_truncated(&m.view(), None, 0.0),
            Err(Error::NumericalInput(_))
        ));
    }

    #[test]
    fn closest_unitary_fixes_unitary_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let u = haar_unitary(4, &mut rng);
        let w = closest_unitary(&u.view()).unwrap();
        for (x, y) in w.iter().zip(u.iter()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn closest_unitary_removes_positive_scaling() {
        let m = eye(4).mapv(|z| z * 2.0);
        let w = closest_unitary(&m.view()).unwrap();
        for (x, y) in w.iter().zip(eye(4).iter()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn closest_unitary_beats_random_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let m = Array2::from_shape_fn((4, 4), |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let w = closest_unitary(&m.view()).unwrap();
        let score = |u: &Array2<Complex64>| {
            let t = dagger(&m.view()).dot(u);
            (0..4).map(|i| t[(i, i)]).sum::<Complex64>().re
        };
        let best = score(&w);
        for _ in 0..10_000 {
            let u = haar_unitary(4, &mut rng);
            assert!(score(&u) <= best + 1e-9);
        }
    }

    #[test]
    fn closest_unitary_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = Array2::from_shape_fn((4, 4), |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let w1 = closest_unitary(&m.view()).unwrap();
        let w2 = closest_unitary(&w1.view()).unwrap();
        for (x, y) in w2.iter().zip(w1.iter()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn closest_unitary_rejects_rank_deficient() {
        let mut m = eye(3);
        m[(2, 2)] = c(0.0, 0.0);
        assert!(matches!(
            closest_unitary(&m.view()),
            Err(Error::DegeneratePolar { .. })
        ));
    }

    #[test]
    fn eigh_smallest_diagonal_case() {
        let h = Array2::from_diag(&arr1(&[c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]));
        let (w, v) = eigh_smallest(&h.view(), 1).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[(1, 0)].norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn eigh_smallest_pauli_z() {
        let z = Array2::from_diag(&arr1(&[c(1.0, 0.0), c(-1.0, 0.0)]));
        let (w, _) = eigh_smallest(&z.view(), 2).unwrap();
        assert_abs_diff_eq!(w[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigh_smallest_residuals_are_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let a = Array2::from_shape_fn((16, 16), |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = &a + &dagger(&a.view());
        let (w, v) = eigh_smallest(&h.view(), 3).unwrap();
        for k in 0..3 {
            let vk = v.column(k).to_owned();
            let hv = h.dot(&vk);
            let res: f64 = hv
                .iter()
                .zip(vk.iter())
                .map(|(x, y)| (x - y * w[k]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-8, "residual {res} too large");
        }
    }

    #[test]
    fn eigh_smallest_rejects_non_hermitian() {
        let mut h = eye(3);
        h[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            eigh_smallest(&h.view(), 1),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for n in [2usize, 4] {
            let u = haar_unitary(n, &mut rng);
            assert!(unitarity_deviation(&u.view()) < 1e-12);
        }
    }

    #[test]
    fn pairwise_sum_matches_sequential() {
        let terms: Vec<Complex64> = (0..1000).map(|i| c((i % 7) as f64 * 1e-3, -((i % 5) as f64))).collect();
        let seq: Complex64 = terms.iter().sum();
        let pair = pairwise_sum(&terms);
        assert_abs_diff_eq!((seq - pair).norm(), 0.0, epsilon = 1e-9);
    }
}
