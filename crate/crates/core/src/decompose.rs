//! MPS-to-circuit decomposition: iterative analytical layer extraction
//! interleaved with constrained optimization of all existing layers.
//!
//! One protocol round extracts a staircase layer that exactly prepares the
//! bond-dimension-2 truncation of the current residual, applies the
//! inverse layer to push the residual toward `|0..0>`, and then re-optimizes
//! every gate in the stack against the overlap
//! `<0..0| U(k)† ... U(1)† |psi>` by replacing each gate with the polar
//! factor of its environment tensor. Layers are indexed newest-first: the
//! layer extracted last is executed first in the assembled circuit.

use ndarray::prelude::*;
use num_complex::Complex64;

use ndarray_linalg::{JobSvd, SVDDC};

use crate::circuit::{kak_decompose, CircuitLayer, ParamCircuit, Su4Gate, Topology};
use crate::error::{Error, Result};
use crate::linalg::{dagger, tensordot, unitarity_deviation};
use crate::mps::Mps;

/// Truncation used when cascading inverse layers for fidelity bookkeeping:
/// keeps only numerical noise out, so monotonicity guarantees survive.
const EXACT_EPS: f64 = 1e-14;

/// An optimization sweep that improves fidelity by less than this stops
/// the per-layer optimization early.
const SWEEP_EARLY_STOP: f64 = 1e-7;

/// One staircase layer: `gates[m]` acts on `(m, m+1)` and gate 0 applies
/// first.
#[derive(Debug, Clone)]
pub struct Layer {
    pub gates: Vec<Array2<Complex64>>,
}

/// Ordered stack of staircase layers, newest layer first (the newest layer
/// is the first executed in the assembled circuit).
#[derive(Debug, Clone)]
pub struct LayerStack {
    num_qubits: usize,
    pub layers: Vec<Layer>,
    /// Fidelity after every protocol step (each extraction and each
    /// optimization sweep).
    pub fidelity_history: Vec<f64>,
}

impl LayerStack {
    pub fn new(num_qubits: usize) -> LayerStack {
        LayerStack {
            num_qubits,
            layers: Vec::new(),
            fidelity_history: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// The state the stack prepares from `|0..0>`.
    pub fn state(&self, sv_threshold: f64) -> Result<Mps> {
        let mut mps = Mps::product_state(self.num_qubits, 0);
        for layer in &self.layers {
            mps = apply_layer_forward(&mps, layer, sv_threshold)?;
        }
        Ok(mps)
    }

    /// Largest unitarity deviation over all stored gates.
    pub fn worst_unitarity_deviation(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.gates.iter())
            .map(|g| unitarity_deviation(&g.view()))
            .fold(0.0, f64::max)
    }

    /// Converts every gate through the KAK decomposition into a linear
    /// `ParamCircuit` in execution order.
    pub fn to_circuit(&self) -> Result<ParamCircuit> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut gates = Vec::with_capacity(layer.gates.len());
            for (m, g) in layer.gates.iter().enumerate() {
                let (theta, phase) = kak_decompose(&g.view())?;
                gates.push(Su4Gate {
                    qubits: (m, m + 1),
                    theta,
                    phase,
                });
            }
            layers.push(CircuitLayer {
                topology: Topology::Linear,
                gates,
            });
        }
        Ok(ParamCircuit {
            num_qubits: self.num_qubits,
            layers,
        })
    }
}

/// Extracts the staircase layer that maps `|0..0>` exactly onto the
/// bond-dimension-2 truncation of `mps`.
pub fn extract_layer(mps: &Mps) -> Result<Layer> {
    let n = mps.num_qubits();
    if n < 2 {
        return Err(Error::Config("layer extraction needs at least 2 sites".into()));
    }
    let reduced = mps.truncated(Some(2), 0.0)?.canonicalized(0)?;
    let cores = reduced.cores();

    let mut gates = Vec::with_capacity(n - 1);
    for m in 0..n - 1 {
        let mut pinned: Vec<(usize, Array1<Complex64>)> = Vec::new();
        if m + 1 < n - 1 {
            // middle gate: the bond index rides on qubit m, qubit m+1 is
            // fresh |0>; columns map |r,0> -> sum_{s,r'} B[r,s,r'] |s,r'>
            let core = &cores[m];
            let (chi_l, _, chi_r) = core.dim();
            for r in 0..chi_l {
                let mut col = Array1::zeros(4);
                for s in 0..2 {
                    for rp in 0..chi_r {
                        col[s * 2 + rp] = core[(r, s, rp)];
                    }
                }
                pinned.push((2 * r, col));
            }
        } else {
            // last gate absorbs the final two cores
            let a = &cores[n - 2];
            let b = &cores[n - 1];
            let chi_l = a.shape()[0];
            let chi_m = a.shape()[2];
            for r in 0..chi_l {
                let mut col = Array1::zeros(4);
                for s in 0..2 {
                    for sp in 0..2 {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for rp in 0..chi_m {
                            acc += a[(r, s, rp)] * b[(rp, sp, 0)];
                        }
                        col[s * 2 + sp] = acc;
                    }
                }
                pinned.push((2 * r, col));
            }
        }
        gates.push(complete_unitary(&pinned)?);
    }
    Ok(Layer { gates })
}

/// Completes an orthonormal set of pinned columns to a 4x4 unitary. New
/// columns come from Gram-Schmidt over the standard basis, with the
/// largest-magnitude entry of each made real-positive.
fn complete_unitary(pinned: &[(usize, Array1<Complex64>)]) -> Result<Array2<Complex64>> {
    let mut u: Array2<Complex64> = Array2::zeros((4, 4));
    let mut filled = [false; 4];
    for (col, v) in pinned {
        for r in 0..4 {
            u[(r, *col)] = v[r];
        }
        filled[*col] = true;
    }
    let mut have: Vec<usize> = pinned.iter().map(|(c, _)| *c).collect();

    for col in 0..4 {
        if filled[col] {
            continue;
        }
        let mut chosen = None;
        for cand in 0..4 {
            let mut w: Array1<Complex64> = Array1::zeros(4);
            w[cand] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for &c in &have {
                    let overlap: Complex64 =
                        (0..4).map(|r| u[(r, c)].conj() * w[r]).sum();
                    for r in 0..4 {
                        let sub = overlap * u[(r, c)];
                        w[r] -= sub;
                    }
                }
            }
            let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.5 {
                w.mapv_inplace(|z| z / norm);
                chosen = Some(w);
                break;
            }
        }
        let mut w = chosen.ok_or_else(|| {
            Error::NumericalInput("isometry completion found no independent direction".into())
        })?;
        // deterministic sign convention
        let (mut best_r, mut best) = (0usize, 0.0f64);
        for r in 0..4 {
            if w[r].norm() > best + 1e-12 {
                best = w[r].norm();
                best_r = r;
            }
        }
        let phase = w[best_r] / w[best_r].norm();
        w.mapv_inplace(|z| z * phase.conj());
        for r in 0..4 {
            u[(r, col)] = w[r];
        }
        filled[col] = true;
        have.push(col);
    }

    let dev = unitarity_deviation(&u.view());
    if dev > 1e-10 {
        return Err(Error::NotUnitary { deviation: dev });
    }
    Ok(u)
}

/// Applies the inverse of a layer (reverse staircase order, no bond
/// ceiling) and trims with `sv_threshold`; for a layer extracted from the
/// state itself the result is strictly closer to `|0..0>`.
pub fn disentangle(mps: &Mps, layer: &Layer, sv_threshold: f64) -> Result<Mps> {
    let n = mps.num_qubits();
    if layer.gates.len() != n - 1 {
        return Err(Error::ShapeMismatch(format!(
            "layer with {} gates on {n} sites",
            layer.gates.len()
        )));
    }
    let mut out = mps.clone();
    for m in (0..n - 1).rev() {
        let udag = dagger(&layer.gates[m].view());
        out.apply_two_site_gate_mut(&udag.view(), m, None, sv_threshold)?;
    }
    Ok(out)
}

/// Applies a layer forward (staircase order, gate 0 first).
fn apply_layer_forward(mps: &Mps, layer: &Layer, sv_threshold: f64) -> Result<Mps> {
    let n = mps.num_qubits();
    let mut out = mps.clone();
    for m in 0..n - 1 {
        out.apply_two_site_gate_mut(&layer.gates[m].view(), m, None, sv_threshold)?;
    }
    Ok(out)
}

/// Eq.-(D1)-style overlap `|<0..0| U(k)† ... U(1)† |psi>|`, evaluated by
/// cascading inverse layers over the target MPS.
pub fn fidelity(stack: &LayerStack, target: &Mps) -> Result<f64> {
    if stack.num_qubits != target.num_qubits() {
        return Err(Error::ShapeMismatch(format!(
            "stack on {} qubits against {}-site MPS",
            stack.num_qubits,
            target.num_qubits()
        )));
    }
    let mut residual = target.clone();
    for layer in stack.layers.iter().rev() {
        residual = disentangle(&residual, layer, EXACT_EPS)?;
    }
    Ok(residual.amplitude(0)?.norm())
}

/// Environment tensor of one gate: `F = tr(G† E)` with everything but the
/// gate contracted. `bra` must carry the layers above, `ket` the inverse
/// layers below (see `optimize_stack`).
fn gate_environment(bra: &Mps, ket: &Mps, m: usize) -> Array2<Complex64> {
    let n = bra.num_qubits();
    let mut left = ArrayD::from_elem(IxDyn(&[1, 1]), Complex64::new(1.0, 0.0));
    for i in 0..m {
        // left[a, b] -> sum_s conj(B[a,s,a']) left K[b,s,b']
        let t = tensordot(&left.view(), &ket.cores()[i].view().into_dyn(), &[(1, 0)])
            .expect("bond dims agree"); // (a, s, b')
        let bra_conj = bra.cores()[i].mapv(|z| z.conj());
        left = tensordot(&bra_conj.view().into_dyn(), &t.view(), &[(0, 0), (1, 1)])
            .expect("bond dims agree"); // (a', b')
    }
    let mut right = ArrayD::from_elem(IxDyn(&[1, 1]), Complex64::new(1.0, 0.0));
    for i in (m + 2..n).rev() {
        let t = tensordot(&ket.cores()[i].view().into_dyn(), &right.view(), &[(2, 1)])
            .expect("bond dims agree"); // (b, s, a2)
        let bra_conj = bra.cores()[i].mapv(|z| z.conj());
        right = tensordot(&bra_conj.view().into_dyn(), &t.view(), &[(1, 1), (2, 2)])
            .expect("bond dims agree"); // (a2, b)
        right = right.permuted_axes(IxDyn(&[0, 1])).as_standard_layout().into_owned();
    }

    let wb = tensordot(
        &bra.cores()[m].view().into_dyn(),
        &bra.cores()[m + 1].view().into_dyn(),
        &[(2, 0)],
    )
    .expect("bond dims agree"); // (a, s, s', a2)
    let wk = tensordot(
        &ket.cores()[m].view().into_dyn(),
        &ket.cores()[m + 1].view().into_dyn(),
        &[(2, 0)],
    )
    .expect("bond dims agree"); // (b, t, t', b2)

    let t1 = tensordot(&left.view(), &wk.view(), &[(1, 0)]).expect("bond dims agree"); // (a, t, t', b2)
    let t2 = tensordot(&t1.view(), &right.view(), &[(3, 1)]).expect("bond dims agree"); // (a, t, t', a2)
    let wb_conj = wb.mapv(|z| z.conj());
    let x = tensordot(&wb_conj.view(), &t2.view(), &[(0, 0), (3, 3)]).expect("bond dims agree"); // (s, s', t, t')

    let x = x
        .as_standard_layout()
        .into_owned()
        .into_shape((4, 4))
        .expect("two physical pairs");
    // F = sum conj(G[v,u]) X[u,v]  =>  E = X^T
    x.t().as_standard_layout().into_owned()
}

/// The unitary maximizing `Re tr(G† E)`: the `U·V†` factor of the full
/// SVD. A rank-deficient environment is fine — any inner staircase gate
/// whose window still sees fresh `|0>` qubits has one by construction,
/// and the kernel block of `U·V†` is a valid free choice. Only a ~zero
/// environment gives no update direction at all.
fn polar_update(env: &Array2<Complex64>) -> Result<Option<Array2<Complex64>>> {
    let (u, s, vt) = env.svddc(JobSvd::All)?;
    let u = u.expect("requested");
    let vt = vt.expect("requested");
    if s[0] < 1e-14 {
        return Ok(None);
    }
    Ok(Some(u.dot(&vt)))
}

/// One full optimization pass over every gate: layers oldest to newest,
/// gates `(n-2, n-1)` down to `(0, 1)` within a layer. Returns the final
/// residual `U(k)† ... U(1)† |psi>` and the resulting fidelity.
fn optimize_pass(stack: &mut LayerStack, target: &Mps, sv_threshold: f64) -> Result<(Mps, f64)> {
    let n = stack.num_qubits;
    let k = stack.layers.len();

    // bra for the oldest layer: all newer layers applied forward to |0..0>
    let mut bra = Mps::product_state(n, 0);
    for idx in 0..k.saturating_sub(1) {
        bra = apply_layer_forward(&bra, &stack.layers[idx], EXACT_EPS)?;
    }
    let mut ket = target.clone();

    for j in (0..k).rev() {
        // j is the storage index; j = k-1 is the oldest layer U^(1)
        let mut bra_m = bra.clone();
        for m in 0..n.saturating_sub(2) {
            bra_m.apply_two_site_gate_mut(
                &stack.layers[j].gates[m].view(),
                m,
                None,
                EXACT_EPS,
            )?;
        }
        let mut ket_m = ket.clone();

        for m in (0..n - 1).rev() {
            let env = gate_environment(&bra_m, &ket_m, m);
            match polar_update(&env)? {
                Some(updated) => stack.layers[j].gates[m] = updated,
                None => {
                    log::debug!("degenerate environment at layer {j} gate {m}; gate kept");
                }
            }
            // ket absorbs the updated inverse gate; bra sheds the next one
            let udag = dagger(&stack.layers[j].gates[m].view());
            ket_m.apply_two_site_gate_mut(&udag.view(), m, None, sv_threshold)?;
            if m > 0 {
                let gdag = dagger(&stack.layers[j].gates[m - 1].view());
                bra_m.apply_two_site_gate_mut(&gdag.view(), m - 1, None, EXACT_EPS)?;
            }
        }

        ket = ket_m;
        if j > 0 {
            // strip the next layer (storage j-1) off the bra product
            for m in (0..n - 1).rev() {
                let gdag = dagger(&stack.layers[j - 1].gates[m].view());
                bra.apply_two_site_gate_mut(&gdag.view(), m, None, EXACT_EPS)?;
            }
        }
    }

    let f = ket.amplitude(0)?.norm();
    Ok((ket, f))
}

/// Optimizes every gate of the stack against the target for up to
/// `sweeps` passes (early-stopped once a pass improves fidelity by less
/// than 1e-7). Fidelity never decreases across a pass; each pass appends
/// its fidelity to the stack history.
pub fn optimize_stack(stack: &LayerStack, target: &Mps, sweeps: usize) -> Result<LayerStack> {
    let mut out = stack.clone();
    optimize_stack_in_place(&mut out, target, sweeps, EXACT_EPS)?;
    Ok(out)
}

fn optimize_stack_in_place(
    stack: &mut LayerStack,
    target: &Mps,
    sweeps: usize,
    sv_threshold: f64,
) -> Result<Option<Mps>> {
    if stack.layers.is_empty() {
        return Err(Error::Config("optimize_stack needs a non-empty stack".into()));
    }
    let mut last_f = stack.fidelity_history.last().copied();
    let mut residual = None;
    for _ in 0..sweeps {
        let (ket, f) = optimize_pass(stack, target, sv_threshold)?;
        stack.fidelity_history.push(f);
        residual = Some(ket);
        if let Some(prev) = last_f {
            if f - prev < SWEEP_EARLY_STOP {
                break;
            }
        }
        last_f = Some(f);
    }
    Ok(residual)
}

/// Options for the full decomposition protocol.
#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    /// Depth limit K.
    pub max_layers: usize,
    /// Stop once the fidelity reaches this value.
    pub fidelity_target: f64,
    /// Optimization passes after each extraction.
    pub sweeps_per_layer: usize,
    /// Residual trim threshold (no bond ceiling is ever applied).
    pub sv_threshold: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            max_layers: 4,
            fidelity_target: 1.0 - 1e-9,
            sweeps_per_layer: 10,
            sv_threshold: 1e-12,
        }
    }
}

/// Result of `decompose_mps`.
#[derive(Debug, Clone)]
pub struct DecomposeResult {
    pub stack: LayerStack,
    pub circuit: ParamCircuit,
    /// True when the fidelity target was reached within the layer budget.
    pub converged: bool,
}

/// Full protocol: extract a layer from the residual, prepend it, disentangle,
/// optimize all layers; repeat until the fidelity target or the depth limit
/// is reached. The returned circuit carries the KAK angles of every gate.
pub fn decompose_mps(target: &Mps, options: &DecomposeOptions) -> Result<DecomposeResult> {
    if options.max_layers < 1 {
        return Err(Error::Config("max_layers must be at least 1".into()));
    }
    if !(options.fidelity_target > 0.0 && options.fidelity_target <= 1.0) {
        return Err(Error::Config(format!(
            "fidelity target must lie in (0, 1], got {}",
            options.fidelity_target
        )));
    }

    let mut stack = LayerStack::new(target.num_qubits());
    let mut residual = target.clone();
    let mut converged = false;

    for _ in 0..options.max_layers {
        let layer = extract_layer(&residual)?;
        stack.layers.insert(0, layer);
        residual = disentangle(&residual, &stack.layers[0], options.sv_threshold)?;
        let f = residual.amplitude(0)?.norm();
        stack.fidelity_history.push(f);

        if let Some(ket) =
            optimize_stack_in_place(&mut stack, target, options.sweeps_per_layer, options.sv_threshold)?
        {
            residual = ket;
        }

        let f = stack
            .fidelity_history
            .last()
            .copied()
            .expect("at least the extraction fidelity is recorded");
        if f >= options.fidelity_target {
            converged = true;
            break;
        }
    }

    let circuit = stack.to_circuit()?;
    Ok(DecomposeResult {
        stack,
        circuit,
        converged,
    })
}
