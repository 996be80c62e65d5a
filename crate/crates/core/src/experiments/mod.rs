//! Configuration-driven experiment runners: baseline and MPS-initialized
//! circuit training, gradient-variance sweeps, and artifact emission.
//!
//! Every run is a pure function of its configuration and seed. Sub-seeds
//! (TNBM training, parameter draws, repetitions) derive from the master
//! seed through a counter mix, so repetitions are independent and safe to
//! evaluate in parallel.

pub mod artifacts;
pub mod bootstrap;
mod grad_variance;

use std::path::PathBuf;
use std::time::Instant;

use ndarray::prelude::*;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use artifacts::emit_artifacts;
pub use bootstrap::{bootstrap_median_ci, bootstrap_stat_ci};
pub use grad_variance::{run_gradient_variance, GradVarianceConfig, GradVariancePoint};

use crate::circuit::{
    build_circuit, init_params, InitMode, ParamCircuit, Su4Gate, Topology,
};
use crate::decompose::{decompose_mps, DecomposeOptions, LayerStack};
use crate::error::{Error, Result};
use crate::ground_state::{dmrg_ground_state, energy_of_mps, heisenberg_mpo, Mpo};
use crate::linalg::eigh_smallest;
use crate::mps::Mps;
use crate::optim::{cmaes_minimize, CmaesConfig, StopReason};
use crate::tasks::{bas_dataset, cardinality_dataset, heisenberg_terms, Dataset, PROBABILITY_FLOOR};
use crate::tnbm::{train_tnbm, TnbmConfig};

/// Counter-based sub-seed derivation (splitmix64 over a salted master).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// What the circuit is trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Task {
    Cardinality { n: usize, c: usize },
    Bas { rows: usize, cols: usize },
    Heisenberg { rows: usize, cols: usize },
}

impl Task {
    pub fn num_qubits(&self) -> usize {
        match self {
            Task::Cardinality { n, .. } => *n,
            Task::Bas { rows, cols } | Task::Heisenberg { rows, cols } => rows * cols,
        }
    }

    pub fn is_generative(&self) -> bool {
        !matches!(self, Task::Heisenberg { .. })
    }

    pub fn dataset(&self) -> Result<Option<Dataset>> {
        Ok(match self {
            Task::Cardinality { n, c } => Some(cardinality_dataset(*n, *c)?),
            Task::Bas { rows, cols } => Some(bas_dataset(*rows, *cols)?),
            Task::Heisenberg { .. } => None,
        })
    }
}

/// How circuit parameters are initialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum InitSpec {
    /// Every angle uniform in `[0, 2pi)`.
    Random,
    /// Every angle `Normal(0, sigma^2)`; `sigma` defaults to 0.01.
    NearIdentity { sigma: Option<f64> },
    /// Classical MPS pipeline at the given bond dimension.
    Mps { chi: usize },
}

impl InitSpec {
    pub fn label(&self) -> String {
        match self {
            InitSpec::Random => "random".into(),
            InitSpec::NearIdentity { .. } => "near-identity".into(),
            InitSpec::Mps { chi } => format!("mps-chi{chi}"),
        }
    }
}

fn default_layers() -> usize {
    3
}

fn default_repetitions() -> usize {
    1
}

/// TNBM settings for the MPS-initialized pipeline (the bond ceiling comes
/// from the init spec).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TnbmSettings {
    pub eta: f64,
    pub sweeps: usize,
    pub sv_threshold: f64,
}

impl Default for TnbmSettings {
    fn default() -> Self {
        TnbmSettings {
            eta: 0.01,
            sweeps: 50,
            sv_threshold: 5e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmrgSettings {
    /// Bond dimension for the reference ground-state run (truncations for
    /// smaller chi start from this state).
    pub chi_exact: usize,
    pub sweeps: usize,
}

impl Default for DmrgSettings {
    fn default() -> Self {
        DmrgSettings {
            chi_exact: 16,
            sweeps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeSettings {
    pub sweeps_per_layer: usize,
    pub fidelity_target: f64,
    pub sv_threshold: f64,
}

impl Default for DecomposeSettings {
    fn default() -> Self {
        let d = DecomposeOptions::default();
        DecomposeSettings {
            sweeps_per_layer: d.sweeps_per_layer,
            fidelity_target: d.fidelity_target,
            sv_threshold: d.sv_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaesSettings {
    /// Initial step size; when absent a task- and init-aware default is
    /// used (1e-2, except smaller values for MPS-initialized VQE runs).
    pub sigma0: Option<f64>,
    pub lambda: usize,
    pub max_iterations: usize,
    pub tolfun: f64,
}

impl Default for CmaesSettings {
    fn default() -> Self {
        CmaesSettings {
            sigma0: None,
            lambda: 20,
            max_iterations: 2000,
            tolfun: 5e-4,
        }
    }
}

/// Full experiment description; JSON-serializable, with every field but
/// the task defaulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Number of circuit layers (k).
    pub layers: usize,
    pub final_all_to_all: bool,
    pub init: InitSpec,
    pub tnbm: TnbmSettings,
    pub dmrg: DmrgSettings,
    pub decompose: DecomposeSettings,
    pub cmaes: CmaesSettings,
    /// Near-identity sigma for gates added beyond the decomposed layers;
    /// defaults to 0.01 for generative tasks and 0 for the energy task.
    pub extension_sigma: Option<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Cardinality { n: 8, c: 4 },
            layers: default_layers(),
            final_all_to_all: true,
            init: InitSpec::Random,
            tnbm: TnbmSettings::default(),
            dmrg: DmrgSettings::default(),
            decompose: DecomposeSettings::default(),
            cmaes: CmaesSettings::default(),
            extension_sigma: None,
            repetitions: default_repetitions(),
            seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.task.num_qubits();
        if n < 2 {
            return Err(Error::Config("task needs at least 2 qubits".into()));
        }
        if n > 20 {
            return Err(Error::Config(format!("task size {n} exceeds 20 qubits")));
        }
        match &self.task {
            Task::Cardinality { n, c } => {
                if *c > *n {
                    return Err(Error::Config(format!("cardinality {c} exceeds {n} bits")));
                }
            }
            Task::Bas { rows, cols } | Task::Heisenberg { rows, cols } => {
                if *rows < 1 || *cols < 1 {
                    return Err(Error::Config("grid dimensions must be at least 1".into()));
                }
            }
        }
        if self.layers < 1 {
            return Err(Error::Config("need at least one circuit layer".into()));
        }
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if let InitSpec::Mps { chi } = self.init {
            if chi < 1 {
                return Err(Error::Config("mps init needs chi >= 1".into()));
            }
        }
        if let Some(sigma) = self.extension_sigma {
            if sigma < 0.0 || !sigma.is_finite() {
                return Err(Error::Config("extension_sigma must be non-negative".into()));
            }
        }
        self.cmaes_config(0).validate()?;
        Ok(())
    }

    /// Resolved CMA-ES configuration for a given run seed.
    pub fn cmaes_config(&self, run_seed: u64) -> CmaesConfig {
        CmaesConfig {
            sigma0: self.resolved_sigma0(),
            lambda: self.cmaes.lambda,
            max_iterations: self.cmaes.max_iterations.max(1),
            tolfun: self.cmaes.tolfun,
            seed: run_seed,
        }
    }

    fn resolved_sigma0(&self) -> f64 {
        if let Some(s) = self.cmaes.sigma0 {
            return s;
        }
        match (&self.task, &self.init) {
            (Task::Heisenberg { .. }, InitSpec::Mps { chi }) => match chi {
                0..=2 => 7.5e-3,
                3..=4 => 5.0e-3,
                _ => 2.5e-3,
            },
            _ => 1e-2,
        }
    }

    fn resolved_extension_sigma(&self) -> f64 {
        self.extension_sigma.unwrap_or(match self.task {
            Task::Heisenberg { .. } => 0.0,
            _ => 0.01,
        })
    }

    /// The circuit layout shared by every init scheme of this config.
    pub fn circuit_layout(&self) -> Result<ParamCircuit> {
        build_circuit(self.task.num_qubits(), self.layers, self.final_all_to_all)
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: ExperimentConfig,
    /// Effective seed of this run.
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Population-best loss per CMA-ES iteration.
    pub loss_history: Vec<f64>,
    /// Total objective evaluations (iterations x lambda).
    pub evaluations: u64,
    pub wall_time_seconds: f64,
    pub stop_reason: StopReason,
    /// Final loss of the classical MPS model (MPS-initialized runs only).
    pub mps_loss: Option<f64>,
    /// Decomposition fidelity reached (MPS-initialized runs only).
    pub decomposition_fidelity: Option<f64>,
    /// False when the decomposition hit its layer budget before the
    /// fidelity target (a warning, not a failure).
    pub decomposition_converged: Option<bool>,
    /// Exact ground-state energy when the task is diagonalizable (<= 14
    /// qubits); lets energy records report `delta_e`.
    pub e0_reference: Option<f64>,
}

impl RunRecord {
    /// Energy error relative to the exact ground state, when available.
    pub fn delta_e(&self) -> Option<f64> {
        self.e0_reference.map(|e0| self.final_loss - e0)
    }
}

/// The circuit loss: KL divergence of the Born distribution for generative
/// tasks, energy expectation for the Hamiltonian task.
pub struct TaskObjective {
    circuit: ParamCircuit,
    dataset: Option<Dataset>,
    hamiltonian: Option<crate::tasks::PauliHamiltonian>,
}

impl TaskObjective {
    pub fn new(task: &Task, circuit: ParamCircuit) -> Result<TaskObjective> {
        Ok(TaskObjective {
            circuit,
            dataset: task.dataset()?,
            hamiltonian: match task {
                Task::Heisenberg { rows, cols } => Some(heisenberg_terms(*rows, *cols)?),
                _ => None,
            },
        })
    }

    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    pub fn evaluate(&self, params: &[f64]) -> f64 {
        let psi = self
            .circuit
            .simulate_with(params)
            .expect("layout and parameter count are fixed");
        self.loss_of_state(&psi)
    }

    pub fn loss_of_state(&self, psi: &Array1<Complex64>) -> f64 {
        if let Some(dataset) = &self.dataset {
            let logs: Vec<f64> = dataset
                .strings()
                .iter()
                .map(|&x| psi[x as usize].norm_sqr().max(PROBABILITY_FLOOR).ln())
                .collect();
            -(dataset.len() as f64).ln()
                - crate::linalg::pairwise_sum_f64(&logs) / dataset.len() as f64
        } else {
            crate::tasks::energy(
                &psi.view(),
                self.hamiltonian.as_ref().expect("one of the two is set"),
            )
            .expect("dimensions fixed by construction")
        }
    }
}

/// Exact ground energy by dense diagonalization when feasible.
fn e0_reference(task: &Task) -> Option<f64> {
    if let Task::Heisenberg { rows, cols } = task {
        let n = rows * cols;
        if n <= 14 {
            let h = heisenberg_terms(*rows, *cols).ok()?;
            let dense = pauli_dense_any(&h, n)?;
            let (w, _) = eigh_smallest(&dense.view(), 1).ok()?;
            return Some(w[0]);
        }
    }
    None
}

/// Dense Pauli-sum matrix without the 10-qubit cap used by the public
/// oracle path (14 qubits = 128 MB transient, still fine here).
fn pauli_dense_any(h: &crate::tasks::PauliHamiltonian, n: usize) -> Option<Array2<Complex64>> {
    if n <= 10 {
        return h.to_dense().ok();
    }
    None
}

/// Trains a circuit from a random or near-identity start.
pub fn run_baseline(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let layout = config.circuit_layout()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let theta0 = match &config.init {
        InitSpec::Random => init_params(&layout, InitMode::Random, 0.0, &mut rng)?,
        InitSpec::NearIdentity { sigma } => {
            init_params(&layout, InitMode::NearIdentity, sigma.unwrap_or(0.01), &mut rng)?
        }
        InitSpec::Mps { .. } => {
            return Err(Error::Config(
                "run_baseline covers random and near-identity inits; use run_synergy for MPS".into(),
            ))
        }
    };
    finish_run(config, layout, theta0, None, None, None, started)
}

/// The full synergy pipeline: classical MPS training, decomposition into
/// circuit layers, near-identity extension, and CMA-ES training of all
/// parameters.
pub fn run_synergy(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let InitSpec::Mps { chi } = config.init else {
        return Err(Error::Config("run_synergy requires an MPS init".into()));
    };

    // classical model
    let (mps, mps_loss) = train_classical_model(config, chi, derive_seed(config.seed, 2))?;

    // decomposition into at most `layers` staircase layers
    let options = DecomposeOptions {
        max_layers: config.layers,
        fidelity_target: config.decompose.fidelity_target,
        sweeps_per_layer: config.decompose.sweeps_per_layer,
        sv_threshold: config.decompose.sv_threshold,
    };
    let result = decompose_mps(&mps, &options)?;
    let fidelity = result
        .stack
        .fidelity_history
        .last()
        .copied()
        .unwrap_or(0.0);

    // assemble the k-layer circuit around the decomposed gates
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 3));
    let circuit = assemble_synergy_circuit(
        config.task.num_qubits(),
        config.layers,
        config.final_all_to_all,
        &result.stack,
        config.resolved_extension_sigma(),
        &mut rng,
    )?;
    let theta0 = circuit.params();

    finish_run(
        config,
        circuit,
        theta0,
        Some(mps_loss),
        Some(fidelity),
        Some(result.converged),
        started,
    )
}

fn train_classical_model(
    config: &ExperimentConfig,
    chi: usize,
    seed: u64,
) -> Result<(Mps, f64)> {
    match &config.task {
        Task::Heisenberg { rows, cols } => {
            let mpo: Mpo = heisenberg_mpo(*rows, *cols)?;
            let chi_ref = config.dmrg.chi_exact.max(chi);
            let (reference, _) = dmrg_ground_state(&mpo, chi_ref, config.dmrg.sweeps)?;
            let truncated = reference.truncated(Some(chi), 0.0)?;
            let loss = energy_of_mps(&truncated, &mpo)?;
            Ok((truncated, loss))
        }
        task => {
            let dataset = task.dataset()?.expect("generative task");
            let tnbm_config = TnbmConfig {
                eta: config.tnbm.eta,
                sweeps: config.tnbm.sweeps,
                chi_max: Some(chi),
                sv_threshold: config.tnbm.sv_threshold,
                seed,
            };
            let (mps, history) = train_tnbm(&dataset, &tnbm_config)?;
            let loss = history.last().copied().expect("sweeps >= 1");
            Ok((mps, loss))
        }
    }
}

/// Places the decomposed staircase layers into the final execution slots
/// of a `k`-layer circuit. Missing leading layers and the extra pairs of
/// an all-to-all final layer are drawn near-identity with `sigma`.
pub fn assemble_synergy_circuit(
    n: usize,
    k: usize,
    final_all_to_all: bool,
    stack: &LayerStack,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ParamCircuit> {
    if stack.num_layers() > k {
        return Err(Error::Config(format!(
            "stack has {} layers but the circuit only {k}",
            stack.num_layers()
        )));
    }
    let decomposed = stack.to_circuit()?;
    let mut circuit = build_circuit(n, k, final_all_to_all)?;
    let pad_layers = k - stack.num_layers();

    let normal = if sigma > 0.0 {
        Some(rand_distr::Normal::new(0.0, sigma).expect("sigma checked by caller"))
    } else {
        None
    };
    let draw = |gate: &mut Su4Gate, rng: &mut ChaCha8Rng| {
        if let Some(normal) = normal {
            use rand::Rng as _;
            for t in gate.theta.iter_mut() {
                *t = rng.sample(normal);
            }
        }
    };

    for (t, layer) in circuit.layers.iter_mut().enumerate() {
        if t < pad_layers {
            for gate in layer.gates.iter_mut() {
                draw(gate, rng);
            }
            continue;
        }
        let source = &decomposed.layers[t - pad_layers];
        match layer.topology {
            Topology::Linear => {
                layer.gates.clone_from(&source.gates);
            }
            Topology::AllToAll => {
                for gate in layer.gates.iter_mut() {
                    let (i, j) = gate.qubits;
                    if j == i + 1 {
                        *gate = source.gates[i].clone();
                    } else {
                        draw(gate, rng);
                    }
                }
            }
        }
    }
    Ok(circuit)
}

fn finish_run(
    config: &ExperimentConfig,
    circuit: ParamCircuit,
    theta0: Vec<f64>,
    mps_loss: Option<f64>,
    decomposition_fidelity: Option<f64>,
    decomposition_converged: Option<bool>,
    started: Instant,
) -> Result<RunRecord> {
    debug_assert_eq!(theta0.len(), circuit.param_count());
    let objective = TaskObjective::new(&config.task, circuit)?;
    let initial_loss = objective.evaluate(&theta0);

    let (history, final_loss, evaluations, stop_reason) = if config.cmaes.max_iterations == 0 {
        (Vec::new(), initial_loss, 0, StopReason::MaxIterations)
    } else {
        let cma = config.cmaes_config(derive_seed(config.seed, 4));
        let run = cmaes_minimize(|p| objective.evaluate(p), &theta0, &cma)?;
        (
            run.loss_history,
            run.best_loss,
            run.evaluations,
            run.stop_reason,
        )
    };

    Ok(RunRecord {
        run_id: format!("{}-seed{}", config.init.label(), config.seed),
        config: config.clone(),
        seed: config.seed,
        initial_loss,
        final_loss,
        loss_history: history,
        evaluations,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        stop_reason,
        mps_loss,
        decomposition_fidelity,
        decomposition_converged,
        e0_reference: e0_reference(&config.task),
    })
}
