//! Gradient-free optimization (CMA-ES) and finite-difference gradients.
//!
//! The optimizer is the standard (mu/mu_w, lambda) CMA-ES with rank-based
//! weighted recombination, cumulative step-size adaptation, and rank-one
//! plus rank-mu covariance updates, using the canonical hyperparameters
//! derived from the dimension and population size. The eigendecomposition
//! of the covariance is refreshed lazily on the usual evaluation-count
//! schedule.

use ndarray::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigh_symmetric;

/// Eigenvalues of the covariance are floored here (with a log) to keep it
/// positive-definite.
const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Step size is kept strictly positive even long after convergence.
const SIGMA_FLOOR: f64 = 1e-300;

/// Base iteration window for the loss-tolerance stop rule; the full
/// window grows with the problem dimension as `10 + 30 n / lambda`,
/// following the usual CMA-ES convention.
const TOLFUN_WINDOW_BASE: usize = 10;

/// Stop-rule window for a given dimension and population size.
pub fn tolfun_window(dim: usize, lambda: usize) -> usize {
    TOLFUN_WINDOW_BASE + (30 * dim + lambda - 1) / lambda
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CmaesConfig {
    /// Initial step size.
    pub sigma0: f64,
    /// Population size (objective evaluations per iteration).
    pub lambda: usize,
    pub max_iterations: usize,
    /// Stop once the best loss improves by less than this over a
    /// 10-iteration window; 0 disables the rule.
    pub tolfun: f64,
    pub seed: u64,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        CmaesConfig {
            sigma0: 1e-2,
            lambda: 20,
            max_iterations: 2000,
            tolfun: 5e-4,
            seed: 0,
        }
    }
}

impl CmaesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0) || !self.sigma0.is_finite() {
            return Err(Error::Config(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        if self.lambda < 4 {
            return Err(Error::Config(format!("lambda must be at least 4, got {}", self.lambda)));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.tolfun < 0.0 || !self.tolfun.is_finite() {
            return Err(Error::Config(format!("tolfun must be non-negative, got {}", self.tolfun)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxIterations,
    ToleranceWindow,
}

/// Outcome of a CMA-ES run.
#[derive(Debug, Clone)]
pub struct CmaesRun {
    pub best_params: Vec<f64>,
    pub best_loss: f64,
    /// Population-best loss per iteration.
    pub loss_history: Vec<f64>,
    /// Total objective evaluations (`iterations * lambda`).
    pub evaluations: u64,
    pub stop_reason: StopReason,
}

/// CMA-ES state with an ask/tell interface; candidates from `ask` may be
/// evaluated concurrently before `tell` consumes their losses.
#[derive(Debug, Clone)]
pub struct CmaesState {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Array1<f64>,
    mueff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    lazy_gap_evals: f64,

    mean: Array1<f64>,
    sigma: f64,
    cov: Array2<f64>,
    eig_basis: Array2<f64>,
    eig_scale: Array1<f64>,
    p_sigma: Array1<f64>,
    p_c: Array1<f64>,

    iteration: usize,
    evals: u64,
    last_eigen_evals: f64,
    repairs: u64,
    best: Option<(Vec<f64>, f64)>,

    rng: ChaCha8Rng,
    pending_y: Vec<Array1<f64>>,
    pending_z: Vec<Array1<f64>>,
    pending_x: Vec<Array1<f64>>,
}

impl CmaesState {
    pub fn new(theta0: &[f64], config: &CmaesConfig) -> Result<CmaesState> {
        config.validate()?;
        let dim = theta0.len();
        if dim == 0 {
            return Err(Error::Config("objective dimension must be at least 1".into()));
        }
        let n = dim as f64;
        let lambda = config.lambda;
        let mu = lambda / 2;
        let mut weights = Array1::from_shape_fn(mu, |i| {
            (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()
        });
        let wsum = weights.sum();
        weights.mapv_inplace(|w| w / wsum);
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
        let cs = (mueff + 2.0) / (n + mueff + 5.0);
        let c1 = 2.0 / ((n + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (0.0f64).max(((mueff - 1.0) / (n + 1.0)).sqrt() - 1.0) + cs;
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        let lazy_gap_evals = lambda as f64 / ((c1 + cmu) * n * 10.0);

        Ok(CmaesState {
            dim,
            lambda,
            mu,
            weights,
            mueff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            lazy_gap_evals,
            mean: Array1::from(theta0.to_vec()),
            sigma: config.sigma0,
            cov: Array2::eye(dim),
            eig_basis: Array2::eye(dim),
            eig_scale: Array1::ones(dim),
            p_sigma: Array1::zeros(dim),
            p_c: Array1::zeros(dim),
            iteration: 0,
            evals: 0,
            last_eigen_evals: 0.0,
            repairs: 0,
            best: None,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            pending_y: Vec::new(),
            pending_z: Vec::new(),
            pending_x: Vec::new(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn evaluations(&self) -> u64 {
        self.evals
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.cov
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    /// Eigenvalue repairs applied so far.
    pub fn repair_count(&self) -> u64 {
        self.repairs
    }

    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(p, l)| (p.as_slice(), *l))
    }

    /// Draws the next population of candidate parameter vectors.
    pub fn ask(&mut self) -> Vec<Vec<f64>> {
        self.pending_y.clear();
        self.pending_z.clear();
        self.pending_x.clear();
        let mut out = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = Array1::from_shape_fn(self.dim, |_| self.rng.sample::<f64, _>(StandardNormal));
            let scaled = &z * &self.eig_scale;
            let y = self.eig_basis.dot(&scaled);
            let x = &self.mean + &(&y * self.sigma);
            out.push(x.to_vec());
            self.pending_y.push(y);
            self.pending_z.push(z);
            self.pending_x.push(x);
        }
        out
    }

    /// Consumes the losses of the last `ask` population (indexed in the
    /// same order) and updates mean, paths, covariance, and step size.
    pub fn tell(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.lambda {
            return Err(Error::ShapeMismatch(format!(
                "{} losses for a population of {}",
                losses.len(),
                self.lambda
            )));
        }
        if let Some(bad) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::Evaluation {
                params: self.pending_x[bad].to_vec(),
            });
        }

        // rank by value with a stable index tie-break
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| {
            losses[a]
                .partial_cmp(&losses[b])
                .expect("losses are finite")
                .then(a.cmp(&b))
        });

        let best_idx = order[0];
        if self
            .best
            .as_ref()
            .map_or(true, |(_, l)| losses[best_idx] < *l)
        {
            self.best = Some((self.pending_x[best_idx].to_vec(), losses[best_idx]));
        }

        let mut y_w: Array1<f64> = Array1::zeros(self.dim);
        let mut z_w: Array1<f64> = Array1::zeros(self.dim);
        for (rank, &idx) in order.iter().take(self.mu).enumerate() {
            let w = self.weights[rank];
            y_w = y_w + self.pending_y[idx].mapv(|v| v * w);
            z_w = z_w + self.pending_z[idx].mapv(|v| v * w);
        }

        self.mean = &self.mean + &y_w.mapv(|v| v * self.sigma);

        // cumulative step-size adaptation: C^{-1/2} y_w = B z_w
        let csn = (self.cs * (2.0 - self.cs) * self.mueff).sqrt();
        let bz = self.eig_basis.dot(&z_w);
        self.p_sigma = self.p_sigma.mapv(|v| v * (1.0 - self.cs)) + bz.mapv(|v| v * csn);

        let ps_norm = self.p_sigma.dot(&self.p_sigma).sqrt();
        let expected = (1.0 - (1.0 - self.cs).powi(2 * (self.iteration as i32 + 1))).sqrt();
        let hsig = ps_norm / expected / self.chi_n < 1.4 + 2.0 / (self.dim as f64 + 1.0);
        let hsig_f = if hsig { 1.0 } else { 0.0 };

        let ccn = (self.cc * (2.0 - self.cc) * self.mueff).sqrt();
        self.p_c = self.p_c.mapv(|v| v * (1.0 - self.cc)) + y_w.mapv(|v| v * (ccn * hsig_f));

        // covariance: decay + rank-one + rank-mu
        let decay = 1.0 - self.c1 - self.cmu;
        let hsig_corr = (1.0 - hsig_f) * self.cc * (2.0 - self.cc);
        self.cov.mapv_inplace(|v| v * (decay + self.c1 * hsig_corr));
        {
            let pc = &self.p_c;
            let c1 = self.c1;
            for i in 0..self.dim {
                let pci = pc[i] * c1;
                for j in 0..self.dim {
                    self.cov[(i, j)] += pci * pc[j];
                }
            }
        }
        for (rank, &idx) in order.iter().take(self.mu).enumerate() {
            let w = self.weights[rank] * self.cmu;
            let y = &self.pending_y[idx];
            for i in 0..self.dim {
                let yi = y[i] * w;
                for j in 0..self.dim {
                    self.cov[(i, j)] += yi * y[j];
                }
            }
        }

        self.sigma *= ((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();
        self.sigma = self.sigma.max(SIGMA_FLOOR);

        self.iteration += 1;
        self.evals += self.lambda as u64;

        if self.evals as f64 - self.last_eigen_evals > self.lazy_gap_evals {
            self.refresh_eigensystem()?;
        }
        Ok(())
    }

    fn refresh_eigensystem(&mut self) -> Result<()> {
        self.last_eigen_evals = self.evals as f64;
        // enforce symmetry before factorizing
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                let avg = 0.5 * (self.cov[(i, j)] + self.cov[(j, i)]);
                self.cov[(i, j)] = avg;
                self.cov[(j, i)] = avg;
            }
        }
        let (mut evals, basis) = eigh_symmetric(&self.cov.view())?;
        let mut repaired = 0u64;
        for v in evals.iter_mut() {
            if *v < EIGENVALUE_FLOOR {
                *v = EIGENVALUE_FLOOR;
                repaired += 1;
            }
        }
        if repaired > 0 {
            self.repairs += repaired;
            log::warn!(
                "covariance eigenvalue floor applied to {repaired} direction(s) at iteration {}",
                self.iteration
            );
        }
        self.eig_scale = evals.mapv(f64::sqrt);
        self.eig_basis = basis;
        Ok(())
    }
}

/// Minimizes a deterministic objective with CMA-ES. Population members are
/// evaluated in parallel; results and ranking are index-stable, so the
/// trajectory is a pure function of `theta0`, the config, and the seed.
pub fn cmaes_minimize<F>(objective: F, theta0: &[f64], config: &CmaesConfig) -> Result<CmaesRun>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut state = CmaesState::new(theta0, config)?;
    let mut history = Vec::new();
    let mut best_series: Vec<f64> = Vec::new();
    let mut stop_reason = StopReason::MaxIterations;

    for iter in 0..config.max_iterations {
        let xs = state.ask();
        let losses: Vec<f64> = xs.par_iter().map(|x| objective(x)).collect();
        state.tell(&losses)?;

        let pop_best = losses.iter().copied().fold(f64::INFINITY, f64::min);
        history.push(pop_best);
        let best = state.best().expect("tell records a best").1;
        best_series.push(best);

        let window = tolfun_window(theta0.len(), config.lambda);
        if config.tolfun > 0.0 && iter >= window {
            let improvement = best_series[iter - window] - best_series[iter];
            if improvement < config.tolfun {
                stop_reason = StopReason::ToleranceWindow;
                break;
            }
        }
    }

    let (params, loss) = state.best().expect("at least one iteration ran");
    Ok(CmaesRun {
        best_params: params.to_vec(),
        best_loss: loss,
        loss_history: history,
        evaluations: state.evaluations(),
        stop_reason,
    })
}

/// Central finite difference of `objective` along coordinate `index`:
/// `(f(theta + eps e_l) - f(theta - eps e_l)) / (2 eps)`.
pub fn finite_diff_gradient<F>(objective: F, theta: &[f64], index: usize, epsilon: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    if index >= theta.len() {
        return Err(Error::ShapeMismatch(format!(
            "coordinate {index} out of range for dimension {}",
            theta.len()
        )));
    }
    let mut plus = theta.to_vec();
    plus[index] += epsilon;
    let mut minus = theta.to_vec();
    minus[index] -= epsilon;
    Ok((objective(&plus) - objective(&minus)) / (2.0 * epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn sphere_converges_within_budget() {
        let config = CmaesConfig {
            sigma0: 0.5,
            lambda: 20,
            max_iterations: 100, // 2000 evaluations
            tolfun: 0.0,
            seed: 1,
        };
        let run = cmaes_minimize(sphere, &[1.0; 4], &config).unwrap();
        assert!(run.best_loss < 1e-10, "best loss {}", run.best_loss);
        assert_eq!(run.evaluations, 2000);
    }

    #[test]
    fn rosenbrock_converges_within_budget() {
        let config = CmaesConfig {
            sigma0: 0.3,
            lambda: 20,
            max_iterations: 1000, // 2e4 evaluations
            tolfun: 0.0,
            seed: 2,
        };
        let run = cmaes_minimize(rosenbrock, &[0.0; 5], &config).unwrap();
        assert!(run.best_loss < 1e-6, "best loss {}", run.best_loss);
    }

    #[test]
    fn constant_objective_stops_via_window() {
        let config = CmaesConfig {
            sigma0: 0.1,
            lambda: 8,
            max_iterations: 500,
            tolfun: 5e-4,
            seed: 3,
        };
        let run = cmaes_minimize(|_| 1.0, &[0.0; 3], &config).unwrap();
        assert_eq!(run.stop_reason, StopReason::ToleranceWindow);
        assert_eq!(run.loss_history.len(), tolfun_window(3, 8) + 1);
        assert_eq!(run.best_loss, 1.0);
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let config = CmaesConfig {
            sigma0: 0.5,
            lambda: 12,
            max_iterations: 50,
            tolfun: 0.0,
            seed: 7,
        };
        let a = cmaes_minimize(sphere, &[1.0; 4], &config).unwrap();
        let b = cmaes_minimize(sphere, &[1.0; 4], &config).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.best_params, b.best_params);
    }

    #[test]
    fn translation_invariance_of_the_argmin_trajectory() {
        let config = CmaesConfig {
            sigma0: 0.5,
            lambda: 10,
            max_iterations: 60,
            tolfun: 0.0,
            seed: 11,
        };
        let a = cmaes_minimize(sphere, &[1.0; 4], &config).unwrap();
        let b = cmaes_minimize(|x| sphere(x) + 42.0, &[1.0; 4], &config).unwrap();
        assert_eq!(a.best_params, b.best_params);
        for (x, y) in a.loss_history.iter().zip(b.loss_history.iter()) {
            assert_eq!(*y, *x + 42.0);
        }
    }

    #[test]
    fn population_update_is_evaluation_order_independent() {
        let config = CmaesConfig {
            sigma0: 0.4,
            lambda: 10,
            max_iterations: 1,
            tolfun: 0.0,
            seed: 13,
        };
        let mut s1 = CmaesState::new(&[0.5; 6], &config).unwrap();
        let mut s2 = CmaesState::new(&[0.5; 6], &config).unwrap();
        let xs1 = s1.ask();
        let xs2 = s2.ask();
        assert_eq!(xs1, xs2);

        let losses: Vec<f64> = xs1.iter().map(|x| sphere(x)).collect();
        // evaluate in reverse order, then reassemble by index
        let mut reversed: Vec<(usize, f64)> = xs2
            .iter()
            .enumerate()
            .rev()
            .map(|(i, x)| (i, sphere(x)))
            .collect();
        reversed.sort_by_key(|(i, _)| *i);
        let losses2: Vec<f64> = reversed.into_iter().map(|(_, l)| l).collect();

        s1.tell(&losses).unwrap();
        s2.tell(&losses2).unwrap();
        assert_eq!(s1.mean().to_vec(), s2.mean().to_vec());
        assert_eq!(s1.sigma(), s2.sigma());
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let config = CmaesConfig {
            sigma0: 0.5,
            lambda: 8,
            max_iterations: 10_000,
            tolfun: 0.0,
            seed: 17,
        };
        let mut state = CmaesState::new(&[1.0; 4], &config).unwrap();
        for iter in 0..10_000 {
            let xs = state.ask();
            let losses: Vec<f64> = xs.iter().map(|x| sphere(x)).collect();
            state.tell(&losses).unwrap();
            if iter % 500 == 0 {
                let c = state.covariance();
                for i in 0..4 {
                    for j in 0..4 {
                        assert!((c[(i, j)] - c[(j, i)]).abs() < 1e-12);
                    }
                }
                let (evals, _) = eigh_symmetric(&c.view()).unwrap();
                assert!(evals[0] > 0.0, "eigenvalue {}", evals[0]);
            }
        }
        assert!(state.sigma() > 0.0);
        // long converged runs collapse directions; the floor must have fired
        assert!(state.repair_count() > 0);
    }

    #[test]
    fn non_finite_objective_is_reported_with_params() {
        let config = CmaesConfig {
            sigma0: 0.5,
            lambda: 8,
            max_iterations: 10,
            tolfun: 0.0,
            seed: 19,
        };
        let err = cmaes_minimize(|_| f64::NAN, &[0.0; 2], &config).unwrap_err();
        assert!(matches!(err, Error::Evaluation { ref params } if params.len() == 2));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut config = CmaesConfig::default();
        config.lambda = 2;
        assert!(config.validate().is_err());
        let mut config = CmaesConfig::default();
        config.sigma0 = 0.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn finite_diff_quadratic() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[1.0], 0, 1e-6).unwrap();
        assert!((g - 2.0).abs() < 1e-4, "gradient {g}");
    }

    #[test]
    fn finite_diff_linear_slope() {
        let g = finite_diff_gradient(|x| 3.0 * x[2] - x[0], &[0.3, -1.0, 2.0], 2, 1e-7).unwrap();
        assert!((g - 3.0).abs() < 1e-6, "gradient {g}");
    }

    #[test]
    fn finite_diff_validates_inputs() {
        assert!(finite_diff_gradient(|x| x[0], &[1.0], 0, 0.0).is_err());
        assert!(finite_diff_gradient(|x| x[0], &[1.0], 3, 1e-8).is_err());
    }

    #[test]
    fn finite_diff_matches_richardson_oracle() {
        // f(t) = sin(2 t_1) + t_1^3 at eps = 1e-8 against a 4th-order
        // Richardson stencil at a coarser eps
        let f = |x: &[f64]| (2.0 * x[1]).sin() + x[1].powi(3);
        let theta = [0.0, 0.7, 0.0];
        let simple = finite_diff_gradient(f, &theta, 1, 1e-8).unwrap();
        let h = 1e-5;
        let fd = |eps: f64| finite_diff_gradient(f, &theta, 1, eps).unwrap();
        let richardson = (4.0 * fd(h) - fd(2.0 * h)) / 3.0;
        assert!(
            (simple - richardson).abs() / richardson.abs() < 1e-3,
            "{simple} vs {richardson}"
        );
    }
}
