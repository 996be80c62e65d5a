//! Experiment CLI: classical MPS training, ground-state search, circuit
//! decomposition, circuit training, and gradient-variance sweeps.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 1 on runtime
//! failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tncirc::decompose::{decompose_mps, DecomposeOptions};
use tncirc::experiments::{
    derive_seed, emit_artifacts, run_baseline, run_gradient_variance, run_synergy,
    ExperimentConfig, GradVarianceConfig, InitSpec, RunRecord,
};
use tncirc::ground_state::{dmrg_ground_state, energy_of_mps, heisenberg_mpo};
use tncirc::linalg::eigh_smallest;
use tncirc::tasks::heisenberg_terms;
use tncirc::tnbm::{train_tnbm, TnbmConfig};
use tncirc::{Error, Mps};

#[derive(Parser)]
#[command(name = "tncirc", version, about = "Tensor-network initialized circuit training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment configuration JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of independently seeded repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Also write plot.svg next to the CSV/JSON artifacts.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train an MPS Born machine on the configured dataset.
    TrainTnbm {
        #[command(flatten)]
        common: CommonArgs,
        /// Bond-dimension ceiling (defaults to the config init's chi, or 8).
        #[arg(long)]
        chi: Option<usize>,
    },
    /// DMRG ground-state search for the 2D Heisenberg grid.
    GroundState {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 3)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        cols: usize,
        #[arg(long, default_value_t = 16)]
        chi: usize,
        #[arg(long, default_value_t = 8)]
        sweeps: usize,
    },
    /// Decompose an MPS container file into circuit layers.
    Decompose {
        #[command(flatten)]
        common: CommonArgs,
        /// Input MPS container.
        #[arg(long)]
        mps: PathBuf,
        /// Depth limit K.
        #[arg(long, default_value_t = 4)]
        layers: usize,
        /// Target fidelity.
        #[arg(long, default_value_t = 1.0 - 1e-9)]
        fidelity: f64,
        #[arg(long, default_value_t = 10)]
        sweeps: usize,
    },
    /// Train a generative circuit model with the configured initialization.
    TrainQcbm {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Minimize the Heisenberg energy with the configured initialization.
    TrainVqe {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Gradient-variance sweep over qubit counts.
    GradVariance {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated qubit counts, e.g. "4,8,12".
        #[arg(long, value_delimiter = ',')]
        qubits: Option<Vec<usize>>,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        all_to_all: bool,
        /// Initialization: random | near-identity | mps.
        #[arg(long)]
        init: Option<String>,
        /// Bond dimension for --init mps.
        #[arg(long)]
        chi: Option<usize>,
    },
    /// Full pipeline: classical MPS, decomposition, extension, training.
    Synergy {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config_error = err
                .downcast_ref::<Error>()
                .map_or(false, |e| matches!(e, Error::Config(_)));
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn load_config(common: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(reps) = common.reps {
        config.repetitions = reps;
    }
    config.output_dir = Some(common.out.clone());
    config.validate()?;
    Ok(config)
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::TrainTnbm { common, chi } => {
            let config = load_config(&common)?;
            let dataset = config
                .task
                .dataset()?
                .ok_or_else(|| Error::Config("train-tnbm needs a generative task".into()))?;
            let chi = chi.unwrap_or(match config.init {
                InitSpec::Mps { chi } => chi,
                _ => 8,
            });
            let tnbm_config = TnbmConfig {
                eta: config.tnbm.eta,
                sweeps: config.tnbm.sweeps,
                chi_max: Some(chi),
                sv_threshold: config.tnbm.sv_threshold,
                seed: config.seed,
            };
            let (mps, history) = train_tnbm(&dataset, &tnbm_config)?;
            fs::create_dir_all(&common.out)?;
            let mps_path = common.out.join("tnbm.mps");
            mps.save_binary(&mps_path)?;
            println!("wrote {}", mps_path.display());

            let mut csv = String::from("run_id,iteration,loss\n");
            for (i, loss) in history.iter().enumerate() {
                csv.push_str(&format!("tnbm,{i},{loss:.16e}\n"));
            }
            write_text(&common.out.join("losses.csv"), &csv)?;
            println!(
                "final KL {:.6} nats after {} sweeps (chi <= {})",
                history.last().unwrap(),
                history.len(),
                mps.max_bond_dim()
            );
            Ok(())
        }

        Command::GroundState {
            common,
            rows,
            cols,
            chi,
            sweeps,
        } => {
            let mpo = heisenberg_mpo(rows, cols)?;
            let (mps, energy) = dmrg_ground_state(&mpo, chi, sweeps)?;
            let truncated_energy = energy_of_mps(&mps, &mpo)?;
            debug_assert!((truncated_energy - energy).abs() < 1e-9);

            let e0 = if rows * cols <= 10 {
                let dense = heisenberg_terms(rows, cols)?.to_dense()?;
                Some(eigh_smallest(&dense.view(), 1)?.0[0])
            } else {
                None
            };
            fs::create_dir_all(&common.out)?;
            let mps_path = common.out.join("ground.mps");
            mps.save_binary(&mps_path)?;
            println!("wrote {}", mps_path.display());

            let record = serde_json::json!({
                "rows": rows,
                "cols": cols,
                "chi": chi,
                "energy": energy,
                "E0_reference": e0,
                "delta_E": e0.map(|e0| energy - e0),
            });
            write_text(
                &common.out.join("ground_state.json"),
                &serde_json::to_string_pretty(&record)?,
            )?;
            println!("energy {energy:.10}");
            Ok(())
        }

        Command::Decompose {
            common,
            mps,
            layers,
            fidelity,
            sweeps,
        } => {
            let target = Mps::load_binary(&mps)?;
            let result = decompose_mps(
                &target,
                &DecomposeOptions {
                    max_layers: layers,
                    fidelity_target: fidelity,
                    sweeps_per_layer: sweeps,
                    ..DecomposeOptions::default()
                },
            )?;
            if !result.converged {
                log::warn!(
                    "fidelity target {fidelity} not reached within {layers} layers (best {:.6})",
                    result.stack.fidelity_history.last().unwrap_or(&0.0)
                );
            }
            fs::create_dir_all(&common.out)?;
            write_text(&common.out.join("circuit.json"), &result.circuit.to_json())?;
            let mut csv = String::from("step,fidelity\n");
            for (i, f) in result.stack.fidelity_history.iter().enumerate() {
                csv.push_str(&format!("{i},{f:.16e}\n"));
            }
            write_text(&common.out.join("fidelity_history.csv"), &csv)?;
            println!(
                "{} layers, fidelity {:.10}, converged: {}",
                result.stack.num_layers(),
                result.stack.fidelity_history.last().unwrap_or(&0.0),
                result.converged
            );
            Ok(())
        }

        Command::TrainQcbm { common } => {
            let config = load_config(&common)?;
            if !config.task.is_generative() {
                return Err(Error::Config("train-qcbm needs a generative task".into()).into());
            }
            train_circuit(&config, &common)
        }

        Command::TrainVqe { common } => {
            let config = load_config(&common)?;
            if config.task.is_generative() {
                return Err(Error::Config("train-vqe needs the heisenberg task".into()).into());
            }
            train_circuit(&config, &common)
        }

        Command::Synergy { common } => {
            let config = load_config(&common)?;
            if !matches!(config.init, InitSpec::Mps { .. }) {
                return Err(Error::Config("synergy requires an mps init".into()).into());
            }
            train_circuit(&config, &common)
        }

        Command::GradVariance {
            common,
            qubits,
            layers,
            all_to_all,
            init,
            chi,
        } => {
            let base = load_config(&common)?;
            let mut gv = GradVarianceConfig {
                seed: base.seed,
                tnbm: base.tnbm.clone(),
                decompose: base.decompose.clone(),
                ..GradVarianceConfig::default()
            };
            if let Some(qs) = qubits {
                gv.qubit_counts = qs;
            }
            if let Some(k) = layers {
                gv.layers = k;
            }
            if all_to_all {
                gv.final_all_to_all = true;
            }
            if let Some(reps) = common.reps {
                gv.repetitions = reps;
            }
            gv.init = match init.as_deref() {
                None => base.init.clone(),
                Some("random") => InitSpec::Random,
                Some("near-identity") => InitSpec::NearIdentity { sigma: None },
                Some("mps") => InitSpec::Mps {
                    chi: chi.unwrap_or(2),
                },
                Some(other) => {
                    return Err(Error::Config(format!("unknown init '{other}'")).into())
                }
            };

            let points = run_gradient_variance(&gv)?;
            fs::create_dir_all(&common.out)?;
            let mut csv =
                String::from("num_qubits,layers,topology,init,variance,ci_low,ci_high\n");
            for p in &points {
                csv.push_str(&format!(
                    "{},{},{},{},{:.16e},{:.16e},{:.16e}\n",
                    p.num_qubits, p.layers, p.topology, p.init, p.variance, p.ci_low, p.ci_high
                ));
            }
            write_text(&common.out.join("grad_variance.csv"), &csv)?;
            write_text(
                &common.out.join("grad_variance.json"),
                &serde_json::to_string_pretty(&points)?,
            )?;
            for p in &points {
                println!(
                    "N={:2} k={} {} {}: variance {:.3e}  [{:.3e}, {:.3e}]",
                    p.num_qubits, p.layers, p.topology, p.init, p.variance, p.ci_low, p.ci_high
                );
            }
            Ok(())
        }
    }
}

/// Runs `repetitions` independently seeded training runs and emits the
/// artifact files.
fn train_circuit(config: &ExperimentConfig, common: &CommonArgs) -> anyhow::Result<()> {
    let mut records: Vec<RunRecord> = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let mut rep_config = config.clone();
        rep_config.seed = derive_seed(config.seed, 100 + rep as u64);
        let mut record = match rep_config.init {
            InitSpec::Mps { .. } => run_synergy(&rep_config)?,
            _ => run_baseline(&rep_config)?,
        };
        record.run_id = format!("{}-rep{rep}", config.init.label());
        println!(
            "{}: initial {:.6} -> final {:.6} ({} evaluations)",
            record.run_id, record.initial_loss, record.final_loss, record.evaluations
        );
        records.push(record);
    }
    let written = emit_artifacts(&records, &common.out, common.plot)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
