//! Classically assisted training of parametrized quantum circuits.
//!
//! This crate implements a pipeline that trains matrix product states
//! classically (generative modeling on bitstring data, or ground-state
//! search for spin Hamiltonians), decomposes the trained MPS into layers
//! of two-qubit SU(4) gates, extends and re-optimizes the resulting
//! circuit with exact statevector simulation, and measures the
//! gradient-variance behavior of the circuit loss landscape.
//!
//! Module map:
//!
//! - [`linalg`]: complex dense tensors, contraction, truncated SVD,
//!   polar projection, and Hermitian eigensolves.
//! - [`mps`]: matrix product states — canonical forms, truncation,
//!   amplitudes, sampling, gate application, serialization.
//! - [`tasks`]: datasets (cardinality, bars-and-stripes), KL divergence,
//!   Pauli-string Hamiltonians, and energies.
//! - [`tnbm`]: generative MPS training by two-site gradient sweeps.
//! - [`ground_state`]: Heisenberg MPOs and two-site DMRG.
//! - [`circuit`]: SU(4)-layered circuits, KAK (de)composition, and exact
//!   statevector simulation.
//! - [`decompose`]: the MPS-to-circuit layer extraction and constrained
//!   optimization protocol.
//! - [`optim`]: CMA-ES and finite-difference gradients.
//! - [`experiments`]: configuration-driven experiment runners and
//!   artifact emission.

// Force linkage of the system BLAS/LAPACK used by ndarray and the
// eigensolver shims.
extern crate blas_src;
extern crate openblas_src;

pub mod circuit;
pub mod decompose;
mod error;
pub mod experiments;
pub mod ground_state;
pub mod linalg;
pub mod mps;
pub mod optim;
pub mod tasks;
pub mod tnbm;

pub use circuit::{ParamCircuit, Su4Gate};
pub use decompose::LayerStack;
pub use error::{Error, Result};
pub use ground_state::Mpo;
pub use linalg::{DenseTensor, SvdResult};
pub use mps::Mps;
pub use optim::{CmaesConfig, CmaesRun};
pub use tasks::{Dataset, PauliHamiltonian};
pub use tnbm::TnbmConfig;
