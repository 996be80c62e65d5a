//! Gradient-variance ("barren plateau") measurements.
//!
//! For each qubit count, the loss gradient with respect to the YY
//! entangler of the first `(0,1)` gate is estimated by central finite
//! differences across many independently initialized repetitions; the
//! variance of those gradients is reported with a bootstrapped 25-75
//! percentile interval. Targets are the cardinality-`N/2` datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_stat_ci, sample_variance};
use super::{
    derive_seed, DecomposeSettings, InitSpec, Task, TaskObjective, TnbmSettings,
};
use crate::circuit::{build_circuit, init_params, InitMode};
use crate::decompose::{decompose_mps, DecomposeOptions};
use crate::error::{Error, Result};
use crate::optim::finite_diff_gradient;
use crate::tnbm::{train_tnbm, TnbmConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradVarianceConfig {
    pub qubit_counts: Vec<usize>,
    /// Circuit depth k.
    pub layers: usize,
    pub final_all_to_all: bool,
    pub init: InitSpec,
    /// Independent initializations per grid point.
    pub repetitions: usize,
    /// Finite-difference step.
    pub epsilon: f64,
    /// Bootstrap resamples for the confidence interval.
    pub resamples: usize,
    pub tnbm: TnbmSettings,
    pub decompose: DecomposeSettings,
    pub extension_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for GradVarianceConfig {
    fn default() -> Self {
        GradVarianceConfig {
            qubit_counts: vec![4, 8, 12],
            layers: 3,
            final_all_to_all: false,
            init: InitSpec::Random,
            repetitions: 200,
            epsilon: 1e-8,
            resamples: 1000,
            // the gradient study trains its classical models with fewer
            // sweeps than full training runs
            tnbm: TnbmSettings {
                sweeps: 30,
                ..TnbmSettings::default()
            },
            decompose: DecomposeSettings::default(),
            extension_sigma: None,
            seed: 0,
        }
    }
}

impl GradVarianceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.qubit_counts.is_empty() {
            return Err(Error::Config("qubit_counts must be non-empty".into()));
        }
        if self.qubit_counts.iter().any(|&n| n < 2 || n > 20) {
            return Err(Error::Config("qubit counts must lie in 2..=20".into()));
        }
        if self.layers < 1 {
            return Err(Error::Config("need at least one circuit layer".into()));
        }
        if self.repetitions < 2 {
            return Err(Error::Config("variance needs at least 2 repetitions".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// One grid point of the study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradVariancePoint {
    pub num_qubits: usize,
    pub layers: usize,
    pub topology: String,
    pub init: String,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Runs the full grid; deterministic given the config.
pub fn run_gradient_variance(config: &GradVarianceConfig) -> Result<Vec<GradVariancePoint>> {
    config.validate()?;
    let topology = if config.final_all_to_all {
        "all-to-all"
    } else {
        "linear"
    };

    let mut points = Vec::with_capacity(config.qubit_counts.len());
    for (point_idx, &n) in config.qubit_counts.iter().enumerate() {
        let task = Task::Cardinality { n, c: n / 2 };
        let layout = build_circuit(n, config.layers, config.final_all_to_all)?;
        let probe = layout.yy_probe_index()?;
        let shared_objective = TaskObjective::new(&task, layout.clone())?;

        let gradients: Vec<f64> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = derive_seed(
                    config.seed,
                    (point_idx as u64) * 0x10_0001 + rep as u64,
                );
                gradient_for_rep(config, &task, n, probe, &shared_objective, rep_seed)
            })
            .collect::<Result<Vec<f64>>>()?;

        let variance = sample_variance(&gradients);
        let (_, ci_low, ci_high) = bootstrap_stat_ci(
            &gradients,
            sample_variance,
            config.resamples,
            25.0,
            75.0,
            derive_seed(config.seed, 0xb007_0000 + point_idx as u64),
        )?;

        points.push(GradVariancePoint {
            num_qubits: n,
            layers: config.layers,
            topology: topology.to_string(),
            init: config.init.label(),
            variance,
            ci_low,
            ci_high,
        });
    }
    Ok(points)
}

fn gradient_for_rep(
    config: &GradVarianceConfig,
    task: &Task,
    n: usize,
    probe: usize,
    shared_objective: &TaskObjective,
    rep_seed: u64,
) -> Result<f64> {
    match &config.init {
        InitSpec::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let theta = init_params(shared_objective.circuit(), InitMode::Random, 0.0, &mut rng)?;
            finite_diff_gradient(
                |p| shared_objective.evaluate(p),
                &theta,
                probe,
                config.epsilon,
            )
        }
        InitSpec::NearIdentity { sigma } => {
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let theta = init_params(
                shared_objective.circuit(),
                InitMode::NearIdentity,
                sigma.unwrap_or(0.01),
                &mut rng,
            )?;
            finite_diff_gradient(
                |p| shared_objective.evaluate(p),
                &theta,
                probe,
                config.epsilon,
            )
        }
        InitSpec::Mps { chi } => {
            // fresh classical pipeline per repetition
            let dataset = task.dataset()?.expect("cardinality task");
            let tnbm_config = TnbmConfig {
                eta: config.tnbm.eta,
                sweeps: config.tnbm.sweeps,
                chi_max: Some(*chi),
                sv_threshold: config.tnbm.sv_threshold,
                seed: derive_seed(rep_seed, 1),
            };
            let (mps, _) = train_tnbm(&dataset, &tnbm_config)?;
            let result = decompose_mps(
                &mps,
                &DecomposeOptions {
                    max_layers: config.layers,
                    fidelity_target: config.decompose.fidelity_target,
                    sweeps_per_layer: config.decompose.sweeps_per_layer,
                    sv_threshold: config.decompose.sv_threshold,
                },
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, 2));
            let circuit = super::assemble_synergy_circuit(
                n,
                config.layers,
                config.final_all_to_all,
                &result.stack,
                config.extension_sigma.unwrap_or(0.01),
                &mut rng,
            )?;
            let theta = circuit.params();
            let objective = TaskObjective::new(task, circuit)?;
            finite_diff_gradient(|p| objective.evaluate(p), &theta, probe, config.epsilon)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_depth_is_a_configuration_error() {
        let config = GradVarianceConfig {
            layers: 0,
            ..GradVarianceConfig::default()
        };
        assert!(matches!(
            run_gradient_variance(&config),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn random_init_variance_decays_with_qubit_count() {
        let config = GradVarianceConfig {
            qubit_counts: vec![4, 8],
            layers: 2,
            repetitions: 60,
            resamples: 200,
            seed: 3,
            ..GradVarianceConfig::default()
        };
        let points = run_gradient_variance(&config).unwrap();
        assert_eq!(points.len(), 2);
        assert!(points[0].variance > points[1].variance * 2.0,
            "var(4)={} var(8)={}", points[0].variance, points[1].variance);
        for p in &points {
            assert!(p.ci_low <= p.ci_high);
            assert!(p.variance.is_finite() && p.variance > 0.0);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let config = GradVarianceConfig {
            qubit_counts: vec![4],
            layers: 2,
            repetitions: 20,
            resamples: 150,
            seed: 11,
            ..GradVarianceConfig::default()
        };
        let a = run_gradient_variance(&config).unwrap();
        let b = run_gradient_variance(&config).unwrap();
        assert_eq!(a[0].variance, b[0].variance);
        assert_eq!(a[0].ci_low, b[0].ci_low);
    }

    #[test]
    fn mps_init_point_is_finite_and_labeled() {
        let config = GradVarianceConfig {
            qubit_counts: vec![4],
            layers: 2,
            init: InitSpec::Mps { chi: 2 },
            repetitions: 6,
            resamples: 150,
            tnbm: TnbmSettings {
                sweeps: 10,
                ..TnbmSettings::default()
            },
            seed: 17,
            ..GradVarianceConfig::default()
        };
        let points = run_gradient_variance(&config).unwrap();
        assert_eq!(points[0].init, "mps-chi2");
        assert!(points[0].variance.is_finite());
    }
}
