//! Classical-shadow estimation of observable expectations from uniformly
//! random Clifford measurements on one or two qubits.
//!
//! Each shot applies a uniformly drawn Clifford U, measures in the
//! computational basis and keeps (U, b). The inverted measurement channel
//! gives the unbiased snapshot rho_hat = (d + 1) U^H |b><b| U - I, and the
//! estimates are medians of batch means of tr(rho_hat O).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityMatrix, C64, ONE, ZERO};
use crate::readout::ObservableSet;

/// Shots drawn per PRNG substream in [`sample_shots`].
pub const SHOTS_PER_STREAM: usize = 4096;

/// Shot-budget constant C in C * ln(K / delta) / eps^2, calibrated so the
/// two-qubit, K = 10, eps = delta = 0.1 configuration succeeds in at least
/// 90% of trials.
pub const CALIBRATED_SHOT_CONSTANT: f64 = 4.0;

/// All Clifford unitaries on `m` qubits modulo global phase.
#[derive(Debug, Clone)]
pub struct CliffordGroup {
    qubits: usize,
    elements: Vec<ComplexMatrix>,
}

impl CliffordGroup {
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// Hilbert-space dimension 2^m.
    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn position(&self, u: &ComplexMatrix) -> Option<usize> {
        let key = phase_key(&canonical_phase(u));
        self.elements.iter().position(|e| phase_key(e) == key)
    }
}

pub fn hadamard() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::new(2, 2, vec![C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)])
        .expect("2x2")
}

pub fn phase_gate() -> ComplexMatrix {
    ComplexMatrix::new(2, 2, vec![ONE, ZERO, ZERO, C64::new(0.0, 1.0)]).expect("2x2")
}

/// CNOT with the first (most significant) qubit as control.
pub fn cnot() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

/// Rotates the global phase so the first nonzero entry is real positive.
fn canonical_phase(u: &ComplexMatrix) -> ComplexMatrix {
    let pivot = u.entries().iter().find(|z| z.norm() > 1e-9).copied().unwrap_or(ONE);
    u.scale(pivot.conj() / pivot.norm())
}

fn phase_key(u: &ComplexMatrix) -> Vec<(i64, i64)> {
    u.entries()
        .iter()
        .map(|z| ((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64))
        .collect()
}

/// Closure of the generators {H, S} (one qubit) or {H x I, I x H, S x I,
/// I x S, CNOT} (two qubits), breadth first from the identity.
pub fn enumerate_clifford(qubits: usize) -> Result<CliffordGroup> {
    let id2 = ComplexMatrix::identity(2);
    let generators = match qubits {
        1 => vec![hadamard(), phase_gate()],
        2 => vec![
            hadamard().kron(&id2),
            id2.kron(&hadamard()),
            phase_gate().kron(&id2),
            id2.kron(&phase_gate()),
            cnot(),
        ],
        _ => return Err(Error::InvalidArgument(format!("Clifford enumeration supports 1 or 2 qubits, got {qubits}"))),
    };
    let dim = 1 << qubits;
    let identity = ComplexMatrix::identity(dim);
    let mut seen: HashMap<Vec<(i64, i64)>, usize> = HashMap::new();
    seen.insert(phase_key(&identity), 0);
    let mut elements = vec![identity];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier].clone();
        for g in &generators {
            let next = canonical_phase(&g.matmul(&current)?);
            let key = phase_key(&next);
            if !seen.contains_key(&key) {
                seen.insert(key, elements.len());
                elements.push(next);
            }
        }
        frontier += 1;
    }
    Ok(CliffordGroup { qubits, elements })
}

/// One measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShadowSnapshot {
    pub unitary: usize,
    pub outcome: usize,
}

/// Born probabilities <b| U rho U^H |b>.
pub fn outcome_probabilities(rho: &ComplexMatrix, u: &ComplexMatrix) -> Vec<f64> {
    let d = u.rows();
    (0..d)
        .map(|b| {
            let mut acc = ZERO;
            for j in 0..d {
                let ubj = u[(b, j)];
                if ubj == ZERO {
                    continue;
                }
                for k in 0..d {
                    acc += ubj * rho[(j, k)] * u[(b, k)].conj();
                }
            }
            acc.re.max(0.0)
        })
        .collect()
}

fn draw_outcome<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (b, p) in probs.iter().enumerate() {
        acc += p;
        if target < acc {
            return b;
        }
    }
    // rounding fallthrough: last outcome with nonzero weight
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Measures `rho` in the basis of a fixed group element.
pub fn measure_with<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    group: &CliffordGroup,
    unitary: usize,
    rng: &mut R,
) -> ShadowSnapshot {
    let probs = outcome_probabilities(rho.matrix(), &group.elements[unitary]);
    ShadowSnapshot { unitary, outcome: draw_outcome(&probs, rng) }
}

pub fn sample_shot<R: Rng + ?Sized>(rho: &DensityMatrix, group: &CliffordGroup, rng: &mut R) -> Result<ShadowSnapshot> {
    if rho.dim() != group.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs {}-qubit Cliffords",
            rho.dim(),
            group.qubits
        )));
    }
    let unitary = rng.gen_range(0..group.len());
    Ok(measure_with(rho, group, unitary, rng))
}

/// `shots` measurements from independent ChaCha substreams of `seed`, one per
/// block of [`SHOTS_PER_STREAM`]. Output does not depend on the thread count.
pub fn sample_shots(rho: &DensityMatrix, group: &CliffordGroup, shots: usize, seed: u64) -> Result<Vec<ShadowSnapshot>> {
    if rho.dim() != group.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs {}-qubit Cliffords",
            rho.dim(),
            group.qubits
        )));
    }
    let blocks = shots.div_ceil(SHOTS_PER_STREAM);
    let per_block: Vec<Vec<ShadowSnapshot>> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            let count = SHOTS_PER_STREAM.min(shots - block * SHOTS_PER_STREAM);
            (0..count)
                .map(|_| sample_shot(rho, group, &mut rng).expect("dims checked"))
                .collect()
        })
        .collect();
    Ok(per_block.concat())
}

/// rho_hat = (d + 1) U^H |b><b| U - I.
pub fn snapshot_matrix(group: &CliffordGroup, shot: ShadowSnapshot) -> ComplexMatrix {
    let u = &group.elements[shot.unitary];
    let d = group.dim();
    let phi: Vec<C64> = (0..d).map(|j| u[(shot.outcome, j)].conj()).collect();
    let mut m = ComplexMatrix::outer(&phi, &phi).scale_real((d + 1) as f64);
    for i in 0..d {
        m[(i, i)] -= ONE;
    }
    m
}

/// tr(rho_hat O) without forming rho_hat.
fn snapshot_expectation(group: &CliffordGroup, shot: ShadowSnapshot, o: &ComplexMatrix, trace_o: f64) -> f64 {
    let u = &group.elements[shot.unitary];
    let d = group.dim();
    // phi = U^H |b>, value = (d+1) phi^H O phi - tr(O)
    let mut quad = ZERO;
    for j in 0..d {
        let pj = u[(shot.outcome, j)];
        if pj == ZERO {
            continue;
        }
        let mut row = ZERO;
        for k in 0..d {
            row += o[(j, k)] * u[(shot.outcome, k)].conj();
        }
        quad += pj * row;
    }
    (d + 1) as f64 * quad.re - trace_o
}

/// Median-of-means estimates of tr(rho O_i).
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowEstimate {
    pub estimates: Vec<f64>,
    pub shots: usize,
    pub batches: usize,
}

/// Median over `batches` contiguous batches (sizes differ by at most one) of
/// the batch-mean snapshot expectation.
pub fn estimate(
    shots: &[ShadowSnapshot],
    group: &CliffordGroup,
    obs: &ObservableSet,
    batches: usize,
) -> Result<ShadowEstimate> {
    if shots.is_empty() {
        return Err(Error::InvalidArgument("no shots to estimate from".into()));
    }
    if batches == 0 || batches > shots.len() {
        return Err(Error::InvalidArgument(format!(
            "{batches} batches for {} shots",
            shots.len()
        )));
    }
    if obs.dim() != group.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observable dim {} vs {}-qubit Cliffords",
            obs.dim(),
            group.qubits
        )));
    }
    if let Some(bad) = shots.iter().find(|s| s.unitary >= group.len() || s.outcome >= group.dim()) {
        return Err(Error::InvalidArgument(format!("shot {bad:?} out of range")));
    }
    let ops = obs.normalized()?;
    let total = shots.len();
    let estimates = ops
        .iter()
        .map(|o| {
            let tr = o.trace().expect("square").re;
            let mut means: Vec<f64> = (0..batches)
                .map(|b| {
                    let lo = b * total / batches;
                    let hi = (b + 1) * total / batches;
                    let sum: f64 = shots[lo..hi].iter().map(|&s| snapshot_expectation(group, s, o, tr)).sum();
                    sum / (hi - lo) as f64
                })
                .collect();
            median(&mut means)
        })
        .collect();
    Ok(ShadowEstimate { estimates, shots: total, batches })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// ceil(2 ln(2K / delta)).
pub fn batches_for(observables: usize, delta: f64) -> usize {
    (2.0 * (2.0 * observables as f64 / delta).ln()).ceil().max(1.0) as usize
}

/// ceil(C ln(K / delta) / eps^2).
pub fn shot_budget(constant: f64, additive_error: f64, observables: usize, delta: f64) -> usize {
    (constant * (observables as f64 / delta).ln() / (additive_error * additive_error)).ceil() as usize
}
