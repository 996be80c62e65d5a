//! Generative training of an MPS Born machine on a bitstring dataset.
//!
//! The model distribution is `q(x) = |<x|psi>|^2` and the loss is the KL
//! divergence of the uniform empirical distribution against `q`. Training
//! sweeps merge neighboring cores, take a gradient step on the merged
//! two-site tensor, and re-split it by truncated SVD, which lets bond
//! dimensions grow adaptively up to the configured ceiling.

use ndarray::prelude::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum_f64, svd_truncated, tensordot};
use crate::mps::{bit_at, Mps};
use crate::tasks::{Dataset, PROBABILITY_FLOOR};

/// Strings per parallel gradient chunk; fixed so the reduction tree (and
/// therefore the floating-point result) is independent of thread count.
const GRADIENT_CHUNK: usize = 512;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TnbmConfig {
    /// Gradient-descent learning rate.
    pub eta: f64,
    /// Full left-right-left passes.
    pub sweeps: usize,
    /// Bond-dimension ceiling.
    pub chi_max: Option<usize>,
    /// Singular-value truncation cutoff.
    pub sv_threshold: f64,
    pub seed: u64,
}

impl Default for TnbmConfig {
    fn default() -> Self {
        TnbmConfig {
            eta: 0.01,
            sweeps: 50,
            chi_max: Some(8),
            sv_threshold: 5e-5,
            seed: 0,
        }
    }
}

impl TnbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.sweeps < 1 {
            return Err(Error::Config("sweeps must be at least 1".into()));
        }
        if let Some(0) = self.chi_max {
            return Err(Error::Config("chi_max must be at least 1".into()));
        }
        if self.sv_threshold < 0.0 {
            return Err(Error::Config("sv_threshold must be non-negative".into()));
        }
        Ok(())
    }
}

/// KL divergence of the dataset against the MPS Born distribution.
pub fn mps_kl(mps: &Mps, dataset: &Dataset) -> Result<f64> {
    if mps.num_qubits() != dataset.num_bits() {
        return Err(Error::ShapeMismatch(format!(
            "{}-site MPS against {}-bit dataset",
            mps.num_qubits(),
            dataset.num_bits()
        )));
    }
    let logs: Vec<f64> = dataset
        .strings()
        .iter()
        .map(|&x| {
            let q = mps.amplitude(x).expect("length checked").norm_sqr();
            q.max(PROBABILITY_FLOOR).ln()
        })
        .collect();
    Ok(-(dataset.len() as f64).ln() - pairwise_sum_f64(&logs) / dataset.len() as f64)
}

/// Gradient of the KL loss with respect to the merged two-site tensor at
/// sites `(site, site + 1)`.
///
/// With the gauge center on the merged pair the partition function is
/// `Z = |Theta|^2` and the loss gradient (Wirtinger convention, returned
/// so that `Theta - eta * grad` is a descent step) is
/// `2 Theta / Z - (2/|D|) sum_x conj(env_x / psi(x))`, where `env_x` is
/// the derivative of `psi(x)` with respect to `Theta`.
pub fn two_site_gradient(
    mps: &Mps,
    dataset: &Dataset,
    site: usize,
) -> Result<Array4<Complex64>> {
    let n = mps.num_qubits();
    if dataset.num_bits() != n {
        return Err(Error::ShapeMismatch(format!(
            "{}-bit dataset against {n}-site MPS",
            dataset.num_bits()
        )));
    }
    if site + 1 >= n {
        return Err(Error::ShapeMismatch(format!(
            "two-site gradient at ({site}, {}) out of range",
            site + 1
        )));
    }
    match mps.gauge_center() {
        Some(c) if c == site || c == site + 1 => {}
        other => {
            return Err(Error::Config(format!(
                "gauge center must sit on the merged pair ({site}, {}), found {other:?}",
                site + 1
            )))
        }
    }

    let theta = merge_pair(mps, site);

    // per-string boundary vectors from scratch (the trainer keeps caches)
    let strings = dataset.strings();
    let lefts: Vec<Array1<Complex64>> = strings
        .iter()
        .map(|&x| {
            let mut v = Array1::from_elem(1, Complex64::new(1.0, 0.0));
            for i in 0..site {
                v = v.dot(&mps.cores()[i].index_axis(Axis(1), bit_at(x, i, n)));
            }
            v
        })
        .collect();
    let rights: Vec<Array1<Complex64>> = strings
        .iter()
        .map(|&x| {
            let mut v = Array1::from_elem(1, Complex64::new(1.0, 0.0));
            for i in (site + 2..n).rev() {
                v = mps.cores()[i]
                    .index_axis(Axis(1), bit_at(x, i, n))
                    .dot(&v);
            }
            v
        })
        .collect();

    Ok(gradient_from_envs(
        &theta,
        strings,
        &lefts,
        &rights,
        site,
        n,
    ))
}

fn merge_pair(mps: &Mps, site: usize) -> Array4<Complex64> {
    tensordot(
        &mps.cores()[site].view().into_dyn(),
        &mps.cores()[site + 1].view().into_dyn(),
        &[(2, 0)],
    )
    .expect("adjacent bonds agree")
    .into_dimensionality::<Ix4>()
    .expect("rank 4")
}

/// Shared gradient kernel: data term accumulated in fixed-size chunks
/// (parallelizable) and combined in index order, then the gauge term.
fn gradient_from_envs(
    theta: &Array4<Complex64>,
    strings: &[u32],
    lefts: &[Array1<Complex64>],
    rights: &[Array1<Complex64>],
    site: usize,
    n: usize,
) -> Array4<Complex64> {
    let (chi_l, _, _, chi_r) = theta.dim();
    let z: f64 = theta.iter().map(|t| t.norm_sqr()).sum();

    let chunk_sums: Vec<Array4<Complex64>> = strings
        .par_chunks(GRADIENT_CHUNK)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let offset = chunk_idx * GRADIENT_CHUNK;
            let mut acc: Array4<Complex64> = Array4::zeros(theta.dim());
            for (pos, &x) in chunk.iter().enumerate() {
                let idx = offset + pos;
                let (s0, s1) = (bit_at(x, site, n), bit_at(x, site + 1, n));
                let left = &lefts[idx];
                let right = &rights[idx];
                let mut psi = Complex64::new(0.0, 0.0);
                for l in 0..chi_l {
                    let mut row = Complex64::new(0.0, 0.0);
                    for r in 0..chi_r {
                        row += theta[(l, s0, s1, r)] * right[r];
                    }
                    psi += left[l] * row;
                }
                if psi.norm_sqr() < PROBABILITY_FLOOR {
                    // the model assigns (numerically) zero to this string;
                    // its pull is unbounded, so it is skipped for this step
                    continue;
                }
                let inv = 1.0 / psi;
                for l in 0..chi_l {
                    let fl = left[l] * inv;
                    for r in 0..chi_r {
                        acc[(l, s0, s1, r)] += fl * right[r];
                    }
                }
            }
            acc
        })
        .collect();

    let mut data_term: Array4<Complex64> = Array4::zeros(theta.dim());
    for chunk in chunk_sums {
        data_term += &chunk;
    }

    let scale = 2.0 / strings.len() as f64;
    let mut grad = theta.mapv(|t| t * (2.0 / z));
    grad.zip_mut_with(&data_term, |g, d| *g -= d.conj() * scale);
    grad
}

/// Trains an MPS Born machine; returns the trained model and the KL loss
/// recorded after each full sweep.
pub fn train_tnbm(dataset: &Dataset, config: &TnbmConfig) -> Result<(Mps, Vec<f64>)> {
    config.validate()?;
    let n = dataset.num_bits();
    if n < 2 {
        return Err(Error::Config("training needs at least 2 sites".into()));
    }
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }

    // positive near-uniform product-state start
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cores: Vec<Array3<Complex64>> = (0..n)
        .map(|_| {
            Array3::from_shape_fn((1, 2, 1), |_| {
                Complex64::new(rng.gen_range(0.9..1.1), 0.0)
            })
        })
        .collect();
    let mut mps = Mps::from_cores(cores, config.chi_max)?;
    let mut trainer = Trainer::new(&mps, dataset);
    let mut history = Vec::with_capacity(config.sweeps);

    for _ in 0..config.sweeps {
        for bond in 0..n - 1 {
            trainer.update_bond(&mut mps, dataset, bond, config, SweepDirection::Right)?;
        }
        for bond in (0..n - 1).rev() {
            trainer.update_bond(&mut mps, dataset, bond, config, SweepDirection::Left)?;
        }
        history.push(trainer.loss(&mps, dataset));
    }

    Ok((mps, history))
}

#[derive(Clone, Copy, PartialEq)]
enum SweepDirection {
    Right,
    Left,
}

/// Per-string boundary-vector caches kept in sync with the sweep.
struct Trainer {
    /// `lefts[i]`: for each string, the contraction of cores `0..i`.
    lefts: Vec<Vec<Array1<Complex64>>>,
    /// `rights[i]`: for each string, the contraction of cores `i..n`.
    rights: Vec<Vec<Array1<Complex64>>>,
}

impl Trainer {
    fn new(mps: &Mps, dataset: &Dataset) -> Trainer {
        let n = mps.num_qubits();
        let m = dataset.len();
        let ones = vec![Array1::from_elem(1, Complex64::new(1.0, 0.0)); m];
        let mut trainer = Trainer {
            lefts: vec![vec![]; n + 1],
            rights: vec![vec![]; n + 1],
        };
        trainer.lefts[0] = ones.clone();
        trainer.rights[n] = ones;
        for i in (0..n).rev() {
            trainer.refresh_right(mps, dataset, i);
        }
        trainer
    }

    fn refresh_left(&mut self, mps: &Mps, dataset: &Dataset, i: usize) {
        // lefts[i+1] from lefts[i] and core i
        let n = mps.num_qubits();
        let core = &mps.cores()[i];
        self.lefts[i + 1] = dataset
            .strings()
            .iter()
            .zip(&self.lefts[i])
            .map(|(&x, v)| v.dot(&core.index_axis(Axis(1), bit_at(x, i, n))))
            .collect();
    }

    fn refresh_right(&mut self, mps: &Mps, dataset: &Dataset, i: usize) {
        // rights[i] from rights[i+1] and core i
        let n = mps.num_qubits();
        let core = &mps.cores()[i];
        self.rights[i] = dataset
            .strings()
            .iter()
            .zip(&self.rights[i + 1])
            .map(|(&x, v)| core.index_axis(Axis(1), bit_at(x, i, n)).dot(v))
            .collect();
    }

    fn update_bond(
        &mut self,
        mps: &mut Mps,
        dataset: &Dataset,
        bond: usize,
        config: &TnbmConfig,
        direction: SweepDirection,
    ) -> Result<()> {
        let n = mps.num_qubits();
        let theta = merge_pair(mps, bond);
        let grad = gradient_from_envs(
            &theta,
            dataset.strings(),
            &self.lefts[bond],
            &self.rights[bond + 2],
            bond,
            n,
        );

        let mut updated = theta;
        updated.zip_mut_with(&grad, |t, g| *t -= g * config.eta);
        let norm = updated.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
        updated.mapv_inplace(|t| t / norm);

        let (chi_l, _, _, chi_r) = updated.dim();
        let mat = updated
            .into_shape((chi_l * 2, 2 * chi_r))
            .expect("regroup merged tensor");
        let svd = svd_truncated(&mat.view(), config.chi_max, config.sv_threshold)?;
        let kept = svd.rank();
        let s_norm = svd
            .singular_values
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt();

        match direction {
            SweepDirection::Right => {
                mps.replace_pair_left_canonical(bond, &svd, kept, chi_l, chi_r, s_norm);
                self.refresh_left(mps, dataset, bond);
            }
            SweepDirection::Left => {
                mps.replace_pair_right_canonical(bond, &svd, kept, chi_l, chi_r, s_norm);
                self.refresh_right(mps, dataset, bond + 1);
            }
        }
        Ok(())
    }

    /// KL from the cached environments (center is at site 0 after a full
    /// sweep, but this only needs valid right caches).
    fn loss(&self, mps: &Mps, dataset: &Dataset) -> f64 {
        let n = mps.num_qubits();
        let core = &mps.cores()[0];
        let logs: Vec<f64> = dataset
            .strings()
            .iter()
            .zip(&self.rights[1])
            .map(|(&x, r)| {
                let v = core.index_axis(Axis(1), bit_at(x, 0, n)).dot(r);
                v[0].norm_sqr().max(PROBABILITY_FLOOR).ln()
            })
            .collect();
        -(dataset.len() as f64).ln() - pairwise_sum_f64(&logs) / dataset.len() as f64
    }
}

impl Mps {
    /// Installs `U` at `bond` and `S·V†` (renormalized) at `bond + 1`.
    pub(crate) fn replace_pair_left_canonical(
        &mut self,
        bond: usize,
        svd: &crate::linalg::SvdResult,
        kept: usize,
        chi_l: usize,
        chi_r: usize,
        s_norm: f64,
    ) {
        let left = svd
            .left
            .clone()
            .into_shape((chi_l, 2, kept))
            .expect("rows regroup");
        let mut carry = svd.right.clone();
        for (mut row, s) in carry.outer_iter_mut().zip(svd.singular_values.iter()) {
            row.mapv_inplace(|z| z * (*s / s_norm));
        }
        let right = carry.into_shape((kept, 2, chi_r)).expect("cols regroup");
        self.install_pair(bond, left, right, bond + 1);
    }

    /// Installs `U·S` (renormalized) at `bond` and `V†` at `bond + 1`.
    pub(crate) fn replace_pair_right_canonical(
        &mut self,
        bond: usize,
        svd: &crate::linalg::SvdResult,
        kept: usize,
        chi_l: usize,
        chi_r: usize,
        s_norm: f64,
    ) {
        let mut carry = svd.left.clone();
        for (mut col, s) in carry.columns_mut().into_iter().zip(svd.singular_values.iter()) {
            col.mapv_inplace(|z| z * (*s / s_norm));
        }
        let left = carry.into_shape((chi_l, 2, kept)).expect("rows regroup");
        let right = svd
            .right
            .clone()
            .into_shape((kept, 2, chi_r))
            .expect("cols regroup");
        self.install_pair(bond, left, right, bond);
    }

    fn install_pair(
        &mut self,
        bond: usize,
        left: Array3<Complex64>,
        right: Array3<Complex64>,
        center: usize,
    ) {
        self.set_core_pair(bond, left, right, center);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::cardinality_dataset;
    use approx::assert_abs_diff_eq;

    /// Loss as an explicit function of the merged tensor, for finite
    /// differences: KL with q = |psi|^2 / Z and Z = |Theta|^2.
    fn loss_of_theta(
        mps: &Mps,
        dataset: &Dataset,
        site: usize,
        theta: &Array4<Complex64>,
    ) -> f64 {
        let n = mps.num_qubits();
        let z: f64 = theta.iter().map(|t| t.norm_sqr()).sum();
        let mut total = 0.0;
        for &x in dataset.strings() {
            let mut left = Array1::from_elem(1, Complex64::new(1.0, 0.0));
            for i in 0..site {
                left = left.dot(&mps.cores()[i].index_axis(Axis(1), bit_at(x, i, n)));
            }
            let mut right = Array1::from_elem(1, Complex64::new(1.0, 0.0));
            for i in (site + 2..n).rev() {
                right = mps.cores()[i].index_axis(Axis(1), bit_at(x, i, n)).dot(&right);
            }
            let block = theta
                .index_axis(Axis(1), bit_at(x, site, n))
                .index_axis(Axis(1), bit_at(x, site + 1, n))
                .to_owned();
            let psi = left.dot(&block.dot(&right));
            total += (psi.norm_sqr() / z).max(PROBABILITY_FLOOR).ln();
        }
        -(dataset.len() as f64).ln() - total / dataset.len() as f64
    }

    #[test]
    fn gradient_vanishes_at_uniform_optimum() {
        // uniform target over all strings, uniform-superposition model
        let n = 5;
        let dataset = Dataset::new(n, 0..(1u32 << n)).unwrap();
        let amp = 1.0 / (1u64 << n) as f64;
        let psi = Array1::from_elem(1 << n, Complex64::new(amp.sqrt(), 0.0));
        let mps = Mps::from_statevector(&psi.view(), None, 0.0)
            .unwrap()
            .canonicalized(2)
            .unwrap();
        let grad = two_site_gradient(&mps, &dataset, 2).unwrap();
        let norm: f64 = grad.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm < 1e-10, "gradient norm {norm}");
    }

    #[test]
    fn gradient_vanishes_on_perfect_single_string_model() {
        let n = 6;
        let dataset = Dataset::new(n, vec![0]).unwrap();
        let mps = Mps::product_state(n, 0).canonicalized(3).unwrap();
        let grad = two_site_gradient(&mps, &dataset, 3).unwrap();
        let norm: f64 = grad.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm < 1e-10, "gradient norm {norm}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let n = 6;
        let dataset = cardinality_dataset(n, 3).unwrap();
        for site in [0usize, 2, 4] {
            let mps = Mps::random(n, 4, &mut rng).canonicalized(site).unwrap();
            let grad = two_site_gradient(&mps, &dataset, site).unwrap();
            let theta = merge_pair(&mps, site);

            let eps = 1e-6;
            for flat_idx in 0..theta.len().min(24) {
                let idx = {
                    let dims = theta.dim();
                    let (d1, d2, d3) = (dims.1, dims.2, dims.3);
                    let l = flat_idx / (d1 * d2 * d3);
                    let rem = flat_idx % (d1 * d2 * d3);
                    (l, rem / (d2 * d3), (rem / d3) % d2, rem % d3)
                };
                let mut plus = theta.clone();
                plus[idx] += Complex64::new(eps, 0.0);
                let mut minus = theta.clone();
                minus[idx] -= Complex64::new(eps, 0.0);
                let d_re = (loss_of_theta(&mps, &dataset, site, &plus)
                    - loss_of_theta(&mps, &dataset, site, &minus))
                    / (2.0 * eps);

                let mut plus = theta.clone();
                plus[idx] += Complex64::new(0.0, eps);
                let mut minus = theta.clone();
                minus[idx] -= Complex64::new(0.0, eps);
                let d_im = (loss_of_theta(&mps, &dataset, site, &plus)
                    - loss_of_theta(&mps, &dataset, site, &minus))
                    / (2.0 * eps);

                let expected = Complex64::new(d_re, d_im);
                let got = grad[idx];
                let scale = expected.norm().max(1e-3);
                assert!(
                    (got - expected).norm() / scale < 1e-5,
                    "site {site} idx {idx:?}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn gradient_requires_matching_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        let dataset = cardinality_dataset(5, 2).unwrap();
        let mps = Mps::random(5, 3, &mut rng).canonicalized(0).unwrap();
        assert!(matches!(
            two_site_gradient(&mps, &dataset, 3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn training_fits_cardinality_dataset() {
        let dataset = cardinality_dataset(8, 4).unwrap();
        let config = TnbmConfig {
            chi_max: Some(8),
            sweeps: 50,
            ..TnbmConfig::default()
        };
        let (mps, history) = train_tnbm(&dataset, &config).unwrap();
        assert_eq!(history.len(), 50);
        let final_kl = *history.last().unwrap();
        assert!(final_kl < 0.1, "final KL {final_kl}");
        assert_abs_diff_eq!(mps_kl(&mps, &dataset).unwrap(), final_kl, epsilon = 1e-9);
        mps.check_invariants().unwrap();
    }

    #[test]
    fn training_fits_single_string_at_chi_one() {
        // gradient descent at eta = 0.01 contracts the off-target weight by
        // (1 - 2 eta) per bond visit, so full convergence needs a few
        // hundred sweeps
        let dataset = Dataset::new(6, vec![0b101001]).unwrap();
        let config = TnbmConfig {
            chi_max: Some(1),
            sweeps: 300,
            ..TnbmConfig::default()
        };
        let (mps, history) = train_tnbm(&dataset, &config).unwrap();
        assert!(history.last().unwrap() < &1e-4, "KL {}", history.last().unwrap());
        assert_eq!(mps.max_bond_dim(), 1);
    }

    #[test]
    fn loss_history_is_non_increasing() {
        let dataset = cardinality_dataset(6, 3).unwrap();
        let config = TnbmConfig {
            chi_max: Some(4),
            sweeps: 30,
            ..TnbmConfig::default()
        };
        let (_, history) = train_tnbm(&dataset, &config).unwrap();
        for pair in history.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-6,
                "loss increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let dataset = cardinality_dataset(6, 3).unwrap();
        let config = TnbmConfig {
            chi_max: Some(4),
            sweeps: 5,
            seed: 11,
            ..TnbmConfig::default()
        };
        let (_, h1) = train_tnbm(&dataset, &config).unwrap();
        let (_, h2) = train_tnbm(&dataset, &config).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn kl_is_exactly_the_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let dataset = cardinality_dataset(6, 2).unwrap();
        let mps = Mps::random(6, 4, &mut rng);
        let direct = crate::tasks::kl_divergence(
            |x| mps.amplitude(x).unwrap().norm_sqr(),
            &dataset,
        );
        assert_abs_diff_eq!(mps_kl(&mps, &dataset).unwrap(), direct, epsilon = 1e-12);
        assert!(direct >= 0.0);
    }
}
