//! Matrix product states for qubit chains.
//!
//! Cores are rank-3 tensors with axes `(left bond, physical = 2, right
//! bond)` and boundary bond dimensions 1. Basis states are indexed
//! big-endian: bit `i` of the packed integer label corresponds to site
//! `i` through `bit = (x >> (n - 1 - i)) & 1`, so `|10..0>` is basis index
//! `2^(n-1)`.
//!
//! All public operations return new values; a returned MPS is normalized
//! and carries a valid gauge. The gauge center at site `c` means every
//! core left of `c` is left-orthonormal and every core right of `c` is
//! right-orthonormal.

mod io;

use ndarray::prelude::*;
use ndarray_linalg::QR;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{svd_truncated, tensordot, unitarity_deviation};

/// Dense statevector conversions are capped at 20 qubits (2^20 complex
/// doubles is 16 MB).
pub const STATEVECTOR_QUBIT_CAP: usize = 20;

/// Matrix product state over qubits.
#[derive(Debug, Clone)]
pub struct Mps {
    cores: Vec<Array3<Complex64>>,
    gauge_center: Option<usize>,
    chi_max: Option<usize>,
}

/// Extracts bit `site` of the packed big-endian label `x` for an `n`-site
/// chain.
#[inline]
pub fn bit_at(x: u32, site: usize, n: usize) -> usize {
    ((x >> (n - 1 - site)) & 1) as usize
}

impl Mps {
    /// Number of sites (qubits).
    pub fn num_qubits(&self) -> usize {
        self.cores.len()
    }

    /// Bond dimensions, length `n + 1` with both ends 1.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.cores.len() + 1);
        dims.push(self.cores[0].shape()[0]);
        for core in &self.cores {
            dims.push(core.shape()[2]);
        }
        dims
    }

    /// Largest virtual bond dimension.
    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// The configured bond ceiling (`None` = unlimited).
    pub fn chi_max(&self) -> Option<usize> {
        self.chi_max
    }

    pub fn gauge_center(&self) -> Option<usize> {
        self.gauge_center
    }

    pub fn cores(&self) -> &[Array3<Complex64>] {
        &self.cores
    }

    /// Replaces the cores at `bond` and `bond + 1` with a freshly split
    /// pair whose gauge center is `center`.
    pub(crate) fn set_core_pair(
        &mut self,
        bond: usize,
        left: Array3<Complex64>,
        right: Array3<Complex64>,
        center: usize,
    ) {
        debug_assert_eq!(left.shape()[2], right.shape()[0]);
        debug_assert!(center == bond || center == bond + 1);
        self.cores[bond] = left;
        self.cores[bond + 1] = right;
        self.gauge_center = Some(center);
    }

    /// Computational basis product state `|x>`.
    pub fn product_state(n: usize, x: u32) -> Mps {
        assert!(n >= 1 && n <= 32);
        let cores = (0..n)
            .map(|i| {
                let mut core = Array3::zeros((1, 2, 1));
                core[(0, bit_at(x, i, n), 0)] = Complex64::new(1.0, 0.0);
                core
            })
            .collect();
        Mps {
            cores,
            gauge_center: Some(0),
            chi_max: None,
        }
    }

    /// GHZ state `(|0..0> + |1..1>)/sqrt(2)`, bond dimension 2.
    pub fn ghz(n: usize) -> Mps {
        assert!(n >= 2);
        let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut cores = Vec::with_capacity(n);
        let mut first = Array3::zeros((1, 2, 2));
        first[(0, 0, 0)] = amp;
        first[(0, 1, 1)] = amp;
        cores.push(first);
        for _ in 1..n - 1 {
            let mut mid = Array3::zeros((2, 2, 2));
            mid[(0, 0, 0)] = Complex64::new(1.0, 0.0);
            mid[(1, 1, 1)] = Complex64::new(1.0, 0.0);
            cores.push(mid);
        }
        let mut last = Array3::zeros((2, 2, 1));
        last[(0, 0, 0)] = Complex64::new(1.0, 0.0);
        last[(1, 1, 0)] = Complex64::new(1.0, 0.0);
        cores.push(last);
        Mps {
            cores,
            gauge_center: Some(0),
            chi_max: Some(2),
        }
    }

    /// Random MPS with bond ceiling `chi`, normalized and canonicalized.
    pub fn random<R: Rng + ?Sized>(n: usize, chi: usize, rng: &mut R) -> Mps {
        assert!(n >= 1 && chi >= 1);
        let dims = valid_bond_profile(n, Some(chi));
        let cores = (0..n)
            .map(|i| {
                Array3::from_shape_fn((dims[i], 2, dims[i + 1]), |_| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        let mut mps = Mps {
            cores,
            gauge_center: None,
            chi_max: Some(chi),
        };
        mps.canonicalize_mut(0);
        mps
    }

    /// Builds an MPS from raw cores, canonicalizing and normalizing.
    pub fn from_cores(cores: Vec<Array3<Complex64>>, chi_max: Option<usize>) -> Result<Mps> {
        if cores.is_empty() {
            return Err(Error::ShapeMismatch("MPS needs at least one core".into()));
        }
        if cores[0].shape()[0] != 1 || cores[cores.len() - 1].shape()[2] != 1 {
            return Err(Error::ShapeMismatch(
                "boundary bond dimensions must be 1".into(),
            ));
        }
        for (i, core) in cores.iter().enumerate() {
            if core.shape()[1] != 2 {
                return Err(Error::ShapeMismatch(format!(
                    "core {i} has physical dimension {}, expected 2",
                    core.shape()[1]
                )));
            }
            if i + 1 < cores.len() && core.shape()[2] != cores[i + 1].shape()[0] {
                return Err(Error::ShapeMismatch(format!(
                    "bond mismatch between cores {i} and {}",
                    i + 1
                )));
            }
            if core.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NumericalInput(format!("core {i} has non-finite entries")));
            }
        }
        let mut mps = Mps {
            cores,
            gauge_center: None,
            chi_max,
        };
        mps.canonicalize_mut(0);
        Ok(mps)
    }

    /// Factorizes a dense statevector into an MPS by sequential truncated
    /// SVD. Without truncation this is exact.
    pub fn from_statevector(
        psi: &ArrayView1<'_, Complex64>,
        chi_max: Option<usize>,
        sv_threshold: f64,
    ) -> Result<Mps> {
        let len = psi.len();
        if len < 4 || !len.is_power_of_two() {
            return Err(Error::ShapeMismatch(format!(
                "statevector length {len} is not 2^n with n >= 2"
            )));
        }
        let n = len.trailing_zeros() as usize;
        if n > STATEVECTOR_QUBIT_CAP {
            return Err(Error::SizeGuard {
                qubits: n,
                max: STATEVECTOR_QUBIT_CAP,
            });
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Normalization { norm });
        }

        let mut cores = Vec::with_capacity(n);
        let mut mat = psi
            .to_owned()
            .into_shape((2, len / 2))
            .expect("power-of-two length");
        let mut chi_left = 1usize;
        for _site in 0..n - 1 {
            let svd = svd_truncated(&mat.view(), chi_max, sv_threshold)?;
            let kept = svd.rank();
            cores.push(
                svd.left
                    .into_shape((chi_left, 2, kept))
                    .expect("rows = chi_left * 2"),
            );
            let cols = svd.right.ncols();
            let mut carry = svd.right;
            for (mut row, s) in carry.outer_iter_mut().zip(svd.singular_values.iter()) {
                row.mapv_inplace(|z| z * *s);
            }
            mat = carry
                .into_shape((kept * 2, cols / 2))
                .expect("column count is even until the last site");
            chi_left = kept;
        }
        let mut last = mat
            .into_shape((chi_left, 2, 1))
            .expect("one column remains");
        let norm = last.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        last.mapv_inplace(|z| z / norm);
        cores.push(last);

        Ok(Mps {
            cores,
            gauge_center: Some(n - 1),
            chi_max,
        })
    }

    /// Contracts the chain into a dense statevector (guarded at 20 qubits).
    pub fn to_statevector(&self) -> Result<Array1<Complex64>> {
        let n = self.num_qubits();
        if n > STATEVECTOR_QUBIT_CAP {
            return Err(Error::SizeGuard {
                qubits: n,
                max: STATEVECTOR_QUBIT_CAP,
            });
        }
        let mut acc = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
        for core in &self.cores {
            let (chi_l, _, chi_r) = core.dim();
            let rows = acc.nrows();
            let flat = core
                .view()
                .into_shape((chi_l, 2 * chi_r))
                .expect("contiguous core");
            acc = acc
                .dot(&flat)
                .into_shape((rows * 2, chi_r))
                .expect("row-major regrouping");
        }
        Ok(acc.into_shape(1 << n).expect("final bond is 1"))
    }

    /// Amplitude `<x|psi>` for a packed big-endian basis label.
    pub fn amplitude(&self, x: u32) -> Result<Complex64> {
        let n = self.num_qubits();
        if n < 32 && x >= (1u32 << n) {
            return Err(Error::ShapeMismatch(format!(
                "basis label {x} out of range for {n} qubits"
            )));
        }
        let mut v = Array1::from_elem(1, Complex64::new(1.0, 0.0));
        for (i, core) in self.cores.iter().enumerate() {
            let s = bit_at(x, i, n);
            let mat = core.index_axis(Axis(1), s);
            v = v.dot(&mat);
        }
        Ok(v[0])
    }

    /// Inner product `<self|other>` by transfer-matrix contraction.
    pub fn inner(&self, other: &Mps) -> Result<Complex64> {
        if self.num_qubits() != other.num_qubits() {
            return Err(Error::ShapeMismatch(format!(
                "inner product of {} and {} sites",
                self.num_qubits(),
                other.num_qubits()
            )));
        }
        let mut env = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
        for (a, b) in self.cores.iter().zip(other.cores.iter()) {
            // env[la, lb] -> env'[ra, rb] = sum_s A*[la,s,ra] env[la,lb] B[lb,s,rb]
            let t = tensordot(&env.view().into_dyn(), &b.view().into_dyn(), &[(1, 0)])
                .expect("bond dims agree");
            let a_conj = a.mapv(|z| z.conj());
            let out = tensordot(&a_conj.view().into_dyn(), &t.view(), &[(0, 0), (1, 1)])
                .expect("bond dims agree");
            env = out
                .into_dimensionality::<Ix2>()
                .expect("two free axes remain");
        }
        Ok(env[(0, 0)])
    }

    /// Norm `sqrt(<psi|psi>)`.
    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same length").re.max(0.0).sqrt()
    }

    /// Returns a copy with the gauge center moved to `center`.
    pub fn canonicalized(&self, center: usize) -> Result<Mps> {
        if center >= self.num_qubits() {
            return Err(Error::ShapeMismatch(format!(
                "gauge center {center} out of range for {} sites",
                self.num_qubits()
            )));
        }
        let mut out = self.clone();
        out.canonicalize_mut(center);
        Ok(out)
    }

    /// Returns a copy truncated to `chi_max` / `sv_threshold`, normalized.
    pub fn truncated(&self, chi_max: Option<usize>, sv_threshold: f64) -> Result<Mps> {
        if let Some(0) = chi_max {
            return Err(Error::Config("chi_max must be at least 1".into()));
        }
        let mut out = self.clone();
        out.canonicalize_mut(0);
        let n = out.num_qubits();
        for i in 0..n - 1 {
            let core = &out.cores[i];
            let (chi_l, _, chi_r) = core.dim();
            let mat = core
                .view()
                .into_shape((chi_l * 2, chi_r))
                .expect("contiguous core");
            let svd = svd_truncated(&mat, chi_max, sv_threshold)?;
            let kept = svd.rank();
            out.cores[i] = svd
                .left
                .into_shape((chi_l, 2, kept))
                .expect("rows regroup");
            let mut carry = svd.right;
            for (mut row, s) in carry.outer_iter_mut().zip(svd.singular_values.iter()) {
                row.mapv_inplace(|z| z * *s);
            }
            let next = tensordot(
                &carry.view().into_dyn(),
                &out.cores[i + 1].view().into_dyn(),
                &[(1, 0)],
            )
            .expect("bond dims agree")
            .into_dimensionality::<Ix3>()
            .expect("rank 3");
            out.cores[i + 1] = next;
        }
        let norm = out.cores[n - 1]
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        out.cores[n - 1].mapv_inplace(|z| z / norm);
        out.gauge_center = Some(n - 1);
        out.chi_max = chi_max;
        Ok(out)
    }

    /// Draws a bitstring from `|<x|psi>|^2` by sequential conditional
    /// sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let canonical;
        let mps = if self.gauge_center == Some(0) {
            self
        } else {
            canonical = self.canonicalized(0).expect("center 0 is valid");
            &canonical
        };
        let n = mps.num_qubits();
        let mut x = 0u32;
        let mut v = Array1::from_elem(1, Complex64::new(1.0, 0.0));
        for (i, core) in mps.cores.iter().enumerate() {
            let w0 = v.dot(&core.index_axis(Axis(1), 0));
            let w1 = v.dot(&core.index_axis(Axis(1), 1));
            let p0: f64 = w0.iter().map(|z| z.norm_sqr()).sum();
            let p1: f64 = w1.iter().map(|z| z.norm_sqr()).sum();
            let total = p0 + p1;
            let s = if rng.gen::<f64>() * total < p0 { 0 } else { 1 };
            if s == 1 {
                x |= 1 << (n - 1 - i);
                v = w1.mapv(|z| z / p1.sqrt());
            } else {
                v = w0.mapv(|z| z / p0.sqrt());
            }
        }
        x
    }

    /// Applies a two-qubit gate to sites `(site, site + 1)`, re-splitting
    /// the bond by truncated SVD and renormalizing. In the 4x4 gate matrix,
    /// the left site is the more significant bit.
    pub fn apply_two_site_gate(
        &self,
        u: &ArrayView2<'_, Complex64>,
        site: usize,
        chi_max: Option<usize>,
        sv_threshold: f64,
    ) -> Result<Mps> {
        let mut out = self.clone();
        out.apply_two_site_gate_mut(u, site, chi_max, sv_threshold)?;
        out.chi_max = chi_max;
        Ok(out)
    }

    // ---- internal mutating machinery ----

    pub(crate) fn apply_two_site_gate_mut(
        &mut self,
        u: &ArrayView2<'_, Complex64>,
        site: usize,
        chi_max: Option<usize>,
        sv_threshold: f64,
    ) -> Result<()> {
        let n = self.num_qubits();
        if site + 1 >= n {
            return Err(Error::ShapeMismatch(format!(
                "gate on sites ({site}, {}) out of range for {n} sites",
                site + 1
            )));
        }
        if u.nrows() != 4 || u.ncols() != 4 {
            return Err(Error::ShapeMismatch("two-site gate must be 4x4".into()));
        }
        let dev = unitarity_deviation(u);
        if dev > 1e-10 {
            return Err(Error::NotUnitary { deviation: dev });
        }
        self.canonicalize_mut(site);

        let theta = tensordot(
            &self.cores[site].view().into_dyn(),
            &self.cores[site + 1].view().into_dyn(),
            &[(2, 0)],
        )
        .expect("bond dims agree");
        let (chi_l, chi_r) = (theta.shape()[0], theta.shape()[3]);
        let theta = theta
            .into_dimensionality::<Ix4>()
            .expect("rank 4")
            .into_shape((chi_l, 4, chi_r))
            .expect("physical axes fuse");
        // out[l, t, r] = sum_s u[t, s] theta[l, s, r]
        let rotated = tensordot(&u.into_dyn(), &theta.view().into_dyn(), &[(1, 1)])
            .expect("physical dims agree")
            .into_dimensionality::<Ix3>()
            .expect("rank 3");
        let rotated = rotated.permuted_axes([1, 0, 2]);
        let mat = rotated
            .as_standard_layout()
            .into_shape((chi_l * 2, 2 * chi_r))
            .expect("regroup physical axes");

        let svd = svd_truncated(&mat.view(), chi_max, sv_threshold)?;
        let kept = svd.rank();
        let s_norm = svd
            .singular_values
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt();
        self.cores[site] = svd
            .left
            .into_shape((chi_l, 2, kept))
            .expect("rows regroup");
        let mut carry = svd.right;
        for (mut row, s) in carry.outer_iter_mut().zip(svd.singular_values.iter()) {
            row.mapv_inplace(|z| z * (*s / s_norm));
        }
        self.cores[site + 1] = carry
            .into_shape((kept, 2, chi_r))
            .expect("columns regroup");
        self.gauge_center = Some(site + 1);
        Ok(())
    }

    /// Moves the gauge center, reusing the existing gauge when present, and
    /// rescales the center core to unit norm.
    pub(crate) fn canonicalize_mut(&mut self, center: usize) {
        let n = self.num_qubits();
        assert!(center < n, "gauge center out of range");
        match self.gauge_center {
            Some(c) if c == center => {}
            Some(c) if c < center => {
                for i in c..center {
                    self.left_orthonormalize(i);
                }
            }
            Some(c) => {
                for i in (center + 1..=c).rev() {
                    self.right_orthonormalize(i);
                }
            }
            None => {
                for i in 0..center {
                    self.left_orthonormalize(i);
                }
                for i in (center + 1..n).rev() {
                    self.right_orthonormalize(i);
                }
            }
        }
        let norm = self.cores[center]
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            self.cores[center].mapv_inplace(|z| z / norm);
        }
        self.gauge_center = Some(center);
    }

    /// QR-based left-orthonormalization of site `i`, absorbing the R factor
    /// into site `i + 1`. The R diagonal is phase-fixed to real-positive so
    /// re-canonicalizing an already canonical chain is the identity.
    fn left_orthonormalize(&mut self, i: usize) {
        let (chi_l, _, chi_r) = self.cores[i].dim();
        let mat = self.cores[i]
            .view()
            .into_shape((chi_l * 2, chi_r))
            .expect("contiguous core")
            .to_owned();
        debug_assert!(chi_r <= chi_l * 2, "bond profile must be non-expanding");
        let (mut q, mut r) = mat.qr().expect("LAPACK qr");
        fix_qr_phases(&mut q, &mut r);
        let kept = q.ncols();
        self.cores[i] = q.into_shape((chi_l, 2, kept)).expect("rows regroup");
        let next = tensordot(
            &r.view().into_dyn(),
            &self.cores[i + 1].view().into_dyn(),
            &[(1, 0)],
        )
        .expect("bond dims agree")
        .into_dimensionality::<Ix3>()
        .expect("rank 3");
        self.cores[i + 1] = next;
    }

    /// Right-orthonormalization of site `i`, absorbing into site `i - 1`.
    fn right_orthonormalize(&mut self, i: usize) {
        let (chi_l, _, chi_r) = self.cores[i].dim();
        let mat = self.cores[i]
            .view()
            .into_shape((chi_l, 2 * chi_r))
            .expect("contiguous core")
            .to_owned();
        debug_assert!(chi_l <= 2 * chi_r, "bond profile must be non-expanding");
        // M = R† Q† from the QR of M†; Q† has orthonormal rows.
        let mdag = mat.t().mapv(|z| z.conj());
        let (mut q, mut r) = mdag.qr().expect("LAPACK qr");
        fix_qr_phases(&mut q, &mut r);
        let kept = q.ncols();
        let qdag = q.t().mapv(|z| z.conj());
        self.cores[i] = qdag
            .as_standard_layout()
            .to_owned()
            .into_shape((kept, 2, chi_r))
            .expect("columns regroup");
        let rdag = r.t().mapv(|z| z.conj());
        let prev = tensordot(
            &self.cores[i - 1].view().into_dyn(),
            &rdag.view().into_dyn(),
            &[(2, 0)],
        )
        .expect("bond dims agree")
        .into_dimensionality::<Ix3>()
        .expect("rank 3");
        self.cores[i - 1] = prev;
    }

    /// Validates the full set of MPS invariants; used by tests.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.num_qubits();
        let dims = self.bond_dims();
        if dims[0] != 1 || dims[n] != 1 {
            return Err(Error::ShapeMismatch("boundary bonds must be 1".into()));
        }
        if let Some(chi) = self.chi_max {
            if dims.iter().any(|&d| d > chi) {
                return Err(Error::ShapeMismatch(format!(
                    "bond dims {dims:?} exceed ceiling {chi}"
                )));
            }
        }
        let norm = self.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Normalization { norm });
        }
        if let Some(c) = self.gauge_center {
            for i in 0..c {
                if !is_left_orthonormal(&self.cores[i]) {
                    return Err(Error::ShapeMismatch(format!(
                        "core {i} not left-orthonormal with center {c}"
                    )));
                }
            }
            for i in c + 1..n {
                if !is_right_orthonormal(&self.cores[i]) {
                    return Err(Error::ShapeMismatch(format!(
                        "core {i} not right-orthonormal with center {c}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Fidelity `|<a|b>|` between two states.
pub fn fidelity(a: &Mps, b: &Mps) -> Result<f64> {
    Ok(a.inner(b)?.norm())
}

/// Bond profile capped by `chi` and the exact-representability limits
/// `2^i` from either end.
fn valid_bond_profile(n: usize, chi: Option<usize>) -> Vec<usize> {
    (0..=n)
        .map(|i| {
            let exact = 1usize << i.min(n - i).min(25);
            match chi {
                Some(c) => exact.min(c),
                None => exact,
            }
        })
        .collect()
}

fn fix_qr_phases(q: &mut Array2<Complex64>, r: &mut Array2<Complex64>) {
    for j in 0..r.nrows().min(r.ncols()) {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            q.column_mut(j).mapv_inplace(|z| z * phase);
            r.row_mut(j).mapv_inplace(|z| z * phase.conj());
        }
    }
}

fn is_left_orthonormal(core: &Array3<Complex64>) -> bool {
    let (chi_l, _, chi_r) = core.dim();
    let mat = core
        .view()
        .into_shape((chi_l * 2, chi_r))
        .expect("contiguous core");
    let gram = mat.t().mapv(|z| z.conj()).dot(&mat);
    gram_is_identity(&gram)
}

fn is_right_orthonormal(core: &Array3<Complex64>) -> bool {
    let (chi_l, _, chi_r) = core.dim();
    let mat = core
        .view()
        .into_shape((chi_l, 2 * chi_r))
        .expect("contiguous core");
    let gram = mat.dot(&mat.t().mapv(|z| z.conj()));
    gram_is_identity(&gram)
}

fn gram_is_identity(gram: &Array2<Complex64>) -> bool {
    gram.indexed_iter().all(|((i, j), z)| {
        let target = if i == j { 1.0 } else { 0.0 };
        (z - Complex64::new(target, 0.0)).norm() <= 1e-10
    })
}
