//! KAK decomposition of two-qubit unitaries into the 15-angle SU(4)
//! layout plus a fixed global phase.
//!
//! The algorithm works in the magic basis, where local unitaries become
//! real orthogonal matrices and the XX/YY/ZZ entanglers become diagonal:
//! writing `M = B† U B` and `M2 = Mᵀ M`, a real orthogonal `P`
//! diagonalizing `M2` splits `M = L · D^{1/2} · Pᵀ` with `L` orthogonal,
//! from which the local factors and the canonical entangling angles are
//! read off. `Re(M2)` and `Im(M2)` commute, so `P` is found from a random
//! real combination of the two (retried deterministically on degeneracy).

use ndarray::prelude::*;
use ndarray_linalg::Determinant;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{su4_matrix, u3_matrix, PARAMS_PER_GATE};
use crate::error::{Error, Result};
use crate::linalg::{eigh_symmetric, unitarity_deviation};
use crate::tasks::PauliOp;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Normalized magic basis.
fn magic_basis() -> Array2<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    arr2(&[
        [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, s)],
        [c(0.0, 0.0), c(0.0, s), c(s, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(0.0, s), c(-s, 0.0), c(0.0, 0.0)],
        [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -s)],
    ])
}

/// Diagonal of `B† (sigma ⊗ sigma) B`, a ±1 vector for each Pauli axis.
fn entangler_diagonal(axis: PauliOp) -> [f64; 4] {
    let b = magic_basis();
    let bd = b.t().mapv(|z| z.conj());
    let pair = ndarray::linalg::kron(&axis.matrix(), &axis.matrix());
    let d = bd.dot(&pair).dot(&b);
    let mut out = [0.0; 4];
    for k in 0..4 {
        debug_assert!(d[(k, k)].im.abs() < 1e-12);
        out[k] = d[(k, k)].re;
    }
    out
}

fn max_entry_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Splits `g ≈ a ⊗ b` into SU(2) factors and a collected phase.
fn kron_factor(g: &Array2<Complex64>) -> Result<(Array2<Complex64>, Array2<Complex64>, f64)> {
    let (mut r_max, mut c_max, mut best) = (0usize, 0usize, 0.0f64);
    for r in 0..4 {
        for col in 0..4 {
            let v = g[(r, col)].norm();
            if v > best {
                best = v;
                r_max = r;
                c_max = col;
            }
        }
    }
    if best < 1e-6 {
        return Err(Error::NumericalInput("kron factorization of ~zero matrix".into()));
    }
    let (r1, r2, c1, c2) = (r_max / 2, r_max % 2, c_max / 2, c_max % 2);

    let mut b_raw = Array2::zeros((2, 2));
    for j in 0..2 {
        for l in 0..2 {
            b_raw[(j, l)] = g[(2 * r1 + j, 2 * c1 + l)];
        }
    }
    let nb = (b_raw.iter().map(|z| z.norm_sqr()).sum::<f64>() / 2.0).sqrt();
    let b_mat = b_raw.mapv(|z| z / nb);

    let pivot = b_mat[(r2, c2)];
    let mut a_mat = Array2::zeros((2, 2));
    for i in 0..2 {
        for k in 0..2 {
            a_mat[(i, k)] = g[(2 * i + r2, 2 * k + c2)] / pivot;
        }
    }

    let rebuilt = ndarray::linalg::kron(&a_mat, &b_mat);
    if max_entry_diff(&rebuilt, g) > 1e-8 {
        return Err(Error::NumericalInput(
            "matrix is not a two-qubit tensor product".into(),
        ));
    }

    // push both factors into SU(2), collecting the phase
    let det_a = a_mat[(0, 0)] * a_mat[(1, 1)] - a_mat[(0, 1)] * a_mat[(1, 0)];
    let det_b = b_mat[(0, 0)] * b_mat[(1, 1)] - b_mat[(0, 1)] * b_mat[(1, 0)];
    let sa = det_a.sqrt();
    let sb = det_b.sqrt();
    Ok((
        a_mat.mapv(|z| z / sa),
        b_mat.mapv(|z| z / sb),
        (sa * sb).arg(),
    ))
}

/// Euler angles for `g = e^{i gamma} · U3(theta, phi, lam)`.
fn u3_angles(g: &Array2<Complex64>) -> (f64, f64, f64, f64) {
    let (m00, m01, m10, m11) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    let theta = 2.0 * m10.norm().atan2(m00.norm());
    let (gamma, phi, lam);
    if m00.norm() >= 1e-7 {
        gamma = m00.arg();
        phi = if m10.norm() > 1e-12 {
            m10.arg() - gamma
        } else {
            0.0
        };
        lam = if m01.norm() > 1e-12 {
            (-m01).arg() - gamma
        } else {
            m11.arg() - gamma - phi
        };
    } else {
        gamma = m10.arg(); // pins phi = 0
        phi = 0.0;
        lam = (-m01).arg() - gamma;
    }
    debug_assert!(
        max_entry_diff(&u3_matrix(theta, phi, lam).mapv(|z| z * c(0.0, gamma).exp()), g) < 1e-8
    );
    (theta, phi, lam, gamma)
}

/// Decomposes a 4x4 unitary into 15 angles and a fixed phase such that
/// `su4_matrix(theta) · exp(-i phase)` reproduces the input to better
/// than 1e-8 entrywise.
pub fn kak_decompose(u: &ArrayView2<'_, Complex64>) -> Result<([f64; PARAMS_PER_GATE], f64)> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::ShapeMismatch("kak input must be 4x4".into()));
    }
    let dev = unitarity_deviation(u);
    if dev > 1e-10 {
        return Err(Error::NotUnitary { deviation: dev });
    }

    let b = magic_basis();
    let bd = b.t().mapv(|z| z.conj());

    // det-normalize into SU(4)
    let det = u.to_owned().det()?;
    let alpha = det.arg() / 4.0;
    let v = u.mapv(|z| z * c(0.0, -alpha).exp());

    let m = bd.dot(&v).dot(&b);
    let m2 = m.t().dot(&m);
    let m2_re = m2.mapv(|z| z.re);
    let m2_im = m2.mapv(|z| z.im);

    let u_xx = entangler_diagonal(PauliOp::X);
    let u_yy = entangler_diagonal(PauliOp::Y);
    let u_zz = entangler_diagonal(PauliOp::Z);

    let mut rng = ChaCha8Rng::seed_from_u64(0x6b616b);
    let mut best: Option<([f64; PARAMS_PER_GATE], f64, f64)> = None;

    for attempt in 0..40 {
        // Re(M2) and Im(M2) commute; a random combination separates
        // degeneracies.
        let t = if attempt == 0 {
            std::f64::consts::FRAC_PI_4
        } else {
            rng.gen_range(0.0..std::f64::consts::PI)
        };
        let combo = &m2_re * t.cos() + &m2_im * t.sin();
        let (_, mut p) = eigh_symmetric(&combo.view())?;

        // require a genuine diagonalization of the complex symmetric M2
        let pc = p.mapv(|x| c(x, 0.0));
        let d_full = pc.t().dot(&m2).dot(&pc);
        let mut off = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    off = off.max(d_full[(i, j)].norm());
                }
            }
        }
        if off > 1e-10 {
            continue;
        }

        // det(P) = +1
        let pdet = {
            let pf = p.mapv(|x| c(x, 0.0));
            pf.det()?.re
        };
        if pdet < 0.0 {
            for i in 0..4 {
                p[(i, 3)] = -p[(i, 3)];
            }
        }
        let pc = p.mapv(|x| c(x, 0.0));
        let d_full = pc.t().dot(&m2).dot(&pc);

        let mut phases = [0.0f64; 4];
        for k in 0..4 {
            let dk = d_full[(k, k)];
            phases[k] = dk.arg() / 2.0;
        }

        // L = M P diag(e^{-i p}); flip one branch if det(L) = -1
        let mut l = m.dot(&pc);
        for k in 0..4 {
            let f = c(0.0, -phases[k]).exp();
            l.column_mut(k).mapv_inplace(|z| z * f);
        }
        if l.det()?.re < 0.0 {
            phases[0] += std::f64::consts::PI;
            l.column_mut(0).mapv_inplace(|z| -z);
        }
        let imag_leak = l.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag_leak > 1e-8 {
            continue;
        }

        // canonical exponent: p_k = phi0 + hx u_xx[k] + hy u_yy[k] + hz u_zz[k]
        // (the four ±1 patterns are orthogonal with norm² 4)
        let phi0 = phases.iter().sum::<f64>() / 4.0;
        let hx = phases.iter().zip(u_xx).map(|(p, s)| p * s).sum::<f64>() / 4.0;
        let hy = phases.iter().zip(u_yy).map(|(p, s)| p * s).sum::<f64>() / 4.0;
        let hz = phases.iter().zip(u_zz).map(|(p, s)| p * s).sum::<f64>() / 4.0;

        let k1 = b.dot(&l).dot(&bd);
        let k2 = b.dot(&pc.t()).dot(&bd);

        let Ok((a1, b1, phi1)) = kron_factor(&k1) else {
            continue;
        };
        let Ok((a2, b2, phi2)) = kron_factor(&k2) else {
            continue;
        };

        let (t1, p1, l1, g1) = u3_angles(&a1);
        let (t2, p2, l2, g2) = u3_angles(&b1);
        let (t3, p3, l3, g3) = u3_angles(&a2);
        let (t4, p4, l4, g4) = u3_angles(&b2);

        let theta = [
            t1, p1, l1, t2, p2, l2, -2.0 * hx, -2.0 * hy, -2.0 * hz, t3, p3, l3, t4, p4, l4,
        ];
        let total_phase = alpha + phi0 + phi1 + phi2 + g1 + g2 + g3 + g4;
        let gate_phase = (-total_phase).rem_euclid(std::f64::consts::TAU);

        let rebuilt = su4_matrix(&theta).mapv(|z| z * c(0.0, -gate_phase).exp());
        let err = u
            .iter()
            .zip(rebuilt.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);

        if best.as_ref().map_or(true, |(_, _, e)| err < *e) {
            best = Some((theta, gate_phase, err));
        }
        if err < 1e-10 {
            break;
        }
    }

    match best {
        Some((theta, phase, err)) if err < 1e-8 => Ok((theta, phase)),
        Some((_, _, err)) => Err(Error::NumericalInput(format!(
            "kak reconstruction stalled at error {err:.3e}"
        ))),
        None => Err(Error::NumericalInput(
            "kak diagonalization failed on every attempt".into(),
        )),
    }
}
