//! Datasets, loss functions, and Hamiltonians.
//!
//! Bitstrings are packed big-endian into `u32` labels: bit `i` of an
//! `n`-bit string is `(x >> (n - 1 - i)) & 1`, matching the MPS and
//! statevector conventions.

use ndarray::prelude::*;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;

/// Probabilities are clamped here before taking logs so that an exact
/// model zero yields a large-but-finite loss.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Deduplicated bitstring dataset with uniform weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    num_bits: usize,
    strings: Vec<u32>,
}

impl Dataset {
    /// Builds a dataset from raw labels, deduplicating and sorting.
    pub fn new(num_bits: usize, strings: impl IntoIterator<Item = u32>) -> Result<Dataset> {
        if num_bits == 0 || num_bits > 32 {
            return Err(Error::Config(format!("unsupported num_bits {num_bits}")));
        }
        let set: BTreeSet<u32> = strings.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Config("dataset must be non-empty".into()));
        }
        if num_bits < 32 {
            if let Some(&bad) = set.iter().find(|&&x| x >= (1u32 << num_bits)) {
                return Err(Error::ShapeMismatch(format!(
                    "string {bad:b} does not fit in {num_bits} bits"
                )));
            }
        }
        Ok(Dataset {
            num_bits,
            strings: set.into_iter().collect(),
        })
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    /// Sorted, deduplicated labels.
    pub fn strings(&self) -> &[u32] {
        &self.strings
    }

    /// Uniform weight `1/|D|`.
    pub fn weight(&self) -> f64 {
        1.0 / self.strings.len() as f64
    }

    pub fn contains(&self, x: u32) -> bool {
        self.strings.binary_search(&x).is_ok()
    }

    /// One bitstring per line, most significant bit first.
    pub fn export_text(&self) -> String {
        let mut out = String::with_capacity(self.strings.len() * (self.num_bits + 1));
        for &x in &self.strings {
            for i in 0..self.num_bits {
                out.push(if (x >> (self.num_bits - 1 - i)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                });
            }
            out.push('\n');
        }
        out
    }
}

/// All `n`-bit strings with exactly `c` ones.
pub fn cardinality_dataset(n: usize, c: usize) -> Result<Dataset> {
    if n == 0 || n > 32 {
        return Err(Error::Config(format!("unsupported bit count {n}")));
    }
    if c > n {
        return Err(Error::Config(format!("cardinality {c} exceeds {n} bits")));
    }
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    Dataset::new(
        n,
        (0..=all).filter(|x| x.count_ones() as usize == c),
    )
}

/// All bars-and-stripes images on a `rows x cols` grid, flattened
/// row-major: every image whose rows are each constant ("stripes"),
/// unioned with every image whose columns are each constant ("bars"),
/// deduplicated.
pub fn bas_dataset(rows: usize, cols: usize) -> Result<Dataset> {
    if rows < 1 || cols < 1 {
        return Err(Error::Config("rows and cols must be at least 1".into()));
    }
    let n = rows * cols;
    if n > 20 {
        return Err(Error::Config(format!(
            "bars-and-stripes grid {rows}x{cols} exceeds 20 bits"
        )));
    }
    let mut set = BTreeSet::new();
    for pattern in 0..(1u32 << rows) {
        let mut x = 0u32;
        for r in 0..rows {
            if (pattern >> r) & 1 == 1 {
                for c in 0..cols {
                    x |= 1 << (n - 1 - (r * cols + c));
                }
            }
        }
        set.insert(x);
    }
    for pattern in 0..(1u32 << cols) {
        let mut x = 0u32;
        for c in 0..cols {
            if (pattern >> c) & 1 == 1 {
                for r in 0..rows {
                    x |= 1 << (n - 1 - (r * cols + c));
                }
            }
        }
        set.insert(x);
    }
    Dataset::new(n, set)
}

/// KL divergence (nats) of the uniform empirical distribution on the
/// dataset against the model probabilities `q`:
/// `-log |D| - (1/|D|) sum_x log q(x)`, with the probability floor.
pub fn kl_divergence(q: impl Fn(u32) -> f64, dataset: &Dataset) -> f64 {
    let logs: Vec<f64> = dataset
        .strings
        .iter()
        .map(|&x| q(x).max(PROBABILITY_FLOOR).ln())
        .collect();
    -(dataset.len() as f64).ln() - crate::linalg::pairwise_sum_f64(&logs) / dataset.len() as f64
}

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            PauliOp::I => 'I',
            PauliOp::X => 'X',
            PauliOp::Y => 'Y',
            PauliOp::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

impl PauliOp {
    pub fn matrix(self) -> Array2<Complex64> {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            PauliOp::I => arr2(&[[one, z], [z, one]]),
            PauliOp::X => arr2(&[[z, one], [one, z]]),
            PauliOp::Y => arr2(&[[z, -i], [i, z]]),
            PauliOp::Z => arr2(&[[one, z], [z, -one]]),
        }
    }
}

/// Weighted sum of Pauli strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PauliHamiltonian {
    pub num_qubits: usize,
    /// `(coefficient, per-qubit labels)`; labels have length `num_qubits`.
    pub terms: Vec<(f64, Vec<PauliOp>)>,
}

impl PauliHamiltonian {
    pub fn new(num_qubits: usize, terms: Vec<(f64, Vec<PauliOp>)>) -> Result<Self> {
        for (coeff, paulis) in &terms {
            if !coeff.is_finite() {
                return Err(Error::NumericalInput("non-finite coefficient".into()));
            }
            if paulis.len() != num_qubits {
                return Err(Error::ShapeMismatch(format!(
                    "pauli string of length {} on {num_qubits} qubits",
                    paulis.len()
                )));
            }
        }
        Ok(PauliHamiltonian { num_qubits, terms })
    }

    /// Dense matrix form; guarded to 10 qubits.
    pub fn to_dense(&self) -> Result<Array2<Complex64>> {
        if self.num_qubits > 10 {
            return Err(Error::SizeGuard {
                qubits: self.num_qubits,
                max: 10,
            });
        }
        let dim = 1 << self.num_qubits;
        let mut h = Array2::zeros((dim, dim));
        for (coeff, paulis) in &self.terms {
            for col in 0..dim as u32 {
                let (row, phase) = apply_pauli_string(paulis, self.num_qubits, col);
                h[(row as usize, col as usize)] += phase * *coeff;
            }
        }
        Ok(h)
    }

    /// JSON term-list export.
    pub fn export_json(&self) -> String {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(coeff, paulis)| {
                let label: String = paulis.iter().map(|p| p.to_string()).collect();
                serde_json::json!({"coefficient": coeff, "pauli": label})
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "num_qubits": self.num_qubits,
            "terms": terms,
        }))
        .expect("plain values serialize")
    }
}

/// `P|x> = phase |x ^ flip>` for a Pauli string.
fn apply_pauli_string(paulis: &[PauliOp], n: usize, x: u32) -> (u32, Complex64) {
    let mut y = x;
    let mut phase = Complex64::new(1.0, 0.0);
    for (site, p) in paulis.iter().enumerate() {
        let bit = (x >> (n - 1 - site)) & 1;
        match p {
            PauliOp::I => {}
            PauliOp::X => y ^= 1 << (n - 1 - site),
            PauliOp::Y => {
                y ^= 1 << (n - 1 - site);
                phase *= Complex64::new(0.0, 1.0) * if bit == 1 { -1.0 } else { 1.0 };
            }
            PauliOp::Z => {
                if bit == 1 {
                    phase = -phase;
                }
            }
        }
    }
    (y, phase)
}

/// Snake (boustrophedon) mapping from grid coordinates to chain sites:
/// row-major with every odd row reversed.
pub fn snake_index(row: usize, col: usize, cols: usize) -> usize {
    if row % 2 == 0 {
        row * cols + col
    } else {
        row * cols + (cols - 1 - col)
    }
}

/// Nearest-neighbor edges of a `rows x cols` grid under snake ordering,
/// as chain-site pairs `(i, j)` with `i < j`.
pub fn snake_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let a = snake_index(r, c, cols);
                let b = snake_index(r, c + 1, cols);
                edges.push((a.min(b), a.max(b)));
            }
            if r + 1 < rows {
                let a = snake_index(r, c, cols);
                let b = snake_index(r + 1, c, cols);
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    edges.sort_unstable();
    edges
}

/// Antiferromagnetic Heisenberg Hamiltonian on an open `rows x cols`
/// grid: `(1/4) sum_<i,j> (X_i X_j + Y_i Y_j + Z_i Z_j)` with the grid
/// snake-mapped onto the chain.
pub fn heisenberg_terms(rows: usize, cols: usize) -> Result<PauliHamiltonian> {
    if rows < 1 || cols < 1 {
        return Err(Error::Config("rows and cols must be at least 1".into()));
    }
    let n = rows * cols;
    if n > 20 {
        return Err(Error::Config(format!(
            "grid {rows}x{cols} exceeds 20 qubits"
        )));
    }
    let mut terms = Vec::new();
    for (i, j) in snake_edges(rows, cols) {
        for op in [PauliOp::X, PauliOp::Y, PauliOp::Z] {
            let mut paulis = vec![PauliOp::I; n];
            paulis[i] = op;
            paulis[j] = op;
            terms.push((0.25, paulis));
        }
    }
    PauliHamiltonian::new(n, terms)
}

/// `<psi|H|psi>` by per-term Pauli application; the imaginary residue is
/// checked below 1e-10 and discarded.
pub fn energy(psi: &ArrayView1<'_, Complex64>, h: &PauliHamiltonian) -> Result<f64> {
    let dim = 1usize << h.num_qubits;
    if psi.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "statevector of length {} for {} qubits",
            psi.len(),
            h.num_qubits
        )));
    }
    let contributions: Vec<Complex64> = h
        .terms
        .iter()
        .map(|(coeff, paulis)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..dim as u32 {
                let (y, phase) = apply_pauli_string(paulis, h.num_qubits, x);
                acc += psi[y as usize].conj() * phase * psi[x as usize];
            }
            acc * *coeff
        })
        .collect();
    let total = pairwise_sum(&contributions);
    debug_assert!(
        total.im.abs() < 1e-10,
        "imaginary energy residue {}",
        total.im
    );
    Ok(total.re)
}
