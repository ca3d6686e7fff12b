//! Consensus state machines.
//!
//! Three protocols share the ratio-consensus idea of running a numerator
//! and a denominator iteration under the same column-stochastic map and
//! reading out their per-node ratio:
//!
//! * the classical baseline with weights `1 / (1 + out_degree)`,
//! * the time-invariant-channel protocol, which measures each node's
//!   incoming gain sum once with an all-ones pilot and normalizes every
//!   reception by it,
//! * the time-varying-channel protocol, which repeats the pilot in every
//!   coherence block and normalizes with that block's sum.
//!
//! Receptions are over-the-air: a node only ever observes the
//! gain-weighted sum of what its neighbours transmit in a slot.

use crate::channel::{ChannelRealization, NoiseProcess};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::topology::{Digraph, NodeId};

/// Guard for every normalization division. A sum at or below this is an
/// error, never clamped.
pub const SIGMA_MIN: f64 = 1e-12;

/// Transmission slots within one coherence block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Slot {
    /// All nodes transmit 1.
    Pilot = 0,
    Numerator = 1,
    Denominator = 2,
}

/// Receiver noise for one step, indexed by receiver and slot.
pub trait SlotNoise {
    fn draw(&self, receiver: usize, slot: Slot) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Noiseless;

impl SlotNoise for Noiseless {
    #[inline]
    fn draw(&self, _receiver: usize, _slot: Slot) -> f64 {
        0.0
    }
}

/// Noise of `process` at a fixed step.
#[derive(Debug, Clone, Copy)]
pub struct StepNoise<'a> {
    pub process: &'a NoiseProcess,
    pub step: usize,
}

impl SlotNoise for StepNoise<'_> {
    fn draw(&self, receiver: usize, slot: Slot) -> f64 {
        self.process.draw(self.step, receiver, slot)
    }
}

/// Per-node protocol variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// Received (pre-normalization) numerator.
    pub y_tilde: f64,
    /// Received (pre-normalization) denominator.
    pub x_tilde: f64,
    /// Last transmitted numerator.
    pub y: f64,
    /// Last transmitted denominator.
    pub x: f64,
    /// Normalization sum in use; 0 until the first pilot.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialStates(Vec<f64>);

impl InitialStates {
    pub fn new(values: Vec<f64>) -> Self {
        InitialStates(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.0.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        InitialStates(self.0.iter().map(|&v| f(v)).collect())
    }
}

/// Column-stochastic consensus weights, `entries[(l, j)]` being the share
/// node `j` sends to node `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Matrix);

impl WeightMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }
}

/// What a receiver observes in one slot: `Σ_j gains_row[j] · signals[j] + noise`.
#[inline]
pub fn ota_aggregate(gains_row: &[f64], signals: &[f64], noise: f64) -> f64 {
    assert_eq!(
        gains_row.len(),
        signals.len(),
        "gain row and signal lengths differ"
    );
    gains_row
        .iter()
        .zip(signals)
        .map(|(g, s)| g * s)
        .sum::<f64>()
        + noise
}

/// Baseline weights: node `j` splits evenly over itself and its out-neighbours.
pub fn baseline_weights(g: &Digraph) -> Result<WeightMatrix> {
    if !g.is_strongly_connected() {
        return Err(Error::usage(
            "baseline weights need a strongly connected graph",
        ));
    }
    let n = g.n();
    let mut m = Matrix::zeros(n);
    for j in 0..n {
        let share = 1.0 / (1.0 + g.out_degree(NodeId(j)) as f64);
        m[(j, j)] = share;
        for &l in g.out_neighbors(NodeId(j)) {
            m[(l.index(), j)] = share;
        }
    }
    Ok(WeightMatrix(m))
}

/// One baseline iteration: `(P·y, P·x)`.
pub fn baseline_step(y: &[f64], x: &[f64], p: &WeightMatrix) -> (Vec<f64>, Vec<f64>) {
    (p.0.mul_vec(y), p.0.mul_vec(x))
}

fn pilot_sum(
    h: &ChannelRealization,
    node: usize,
    ones: &[f64],
    noise: &impl SlotNoise,
) -> Result<f64> {
    let sigma = ota_aggregate(h.row(node), ones, noise.draw(node, Slot::Pilot));
    if sigma > SIGMA_MIN && sigma.is_finite() {
        Ok(sigma)
    } else {
        Err(Error::Isolated {
            node,
            sigma,
            guard: SIGMA_MIN,
        })
    }
}

fn check_finite(states: &[AgentState]) -> Result<()> {
    match states
        .iter()
        .position(|s| !(s.y_tilde.is_finite() && s.x_tilde.is_finite()))
    {
        Some(node) => Err(Error::NonFinite { node }),
        None => Ok(()),
    }
}

/// Time-invariant initialization: one pilot slot fixes each node's
/// normalization sum for the whole run.
pub fn tic_initialize(
    s: &InitialStates,
    h: &ChannelRealization,
    noise: &impl SlotNoise,
) -> Result<Vec<AgentState>> {
    if s.len() != h.n() {
        return Err(Error::usage(format!(
            "{} initial values for {} nodes",
            s.len(),
            h.n()
        )));
    }
    let ones = vec![1.0; h.n()];
    s.values()
        .iter()
        .enumerate()
        .map(|(j, &value)| {
            let sigma = pilot_sum(h, j, &ones, noise)?;
            Ok(AgentState {
                y_tilde: value,
                x_tilde: 1.0,
                y: value / sigma,
                x: 1.0 / sigma,
                sigma,
            })
        })
        .collect()
}

/// Time-invariant step: receive both aggregates over `h` and normalize by
/// the sums fixed at initialization.
pub fn tic_step(
    states: &[AgentState],
    h: &ChannelRealization,
    noise: &impl SlotNoise,
) -> Result<Vec<AgentState>> {
    let ys: Vec<f64> = states.iter().map(|s| s.y).collect();
    let xs: Vec<f64> = states.iter().map(|s| s.x).collect();
    let next: Vec<AgentState> = states
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let row = h.row(j);
            let y_tilde = ota_aggregate(row, &ys, noise.draw(j, Slot::Numerator));
            let x_tilde = ota_aggregate(row, &xs, noise.draw(j, Slot::Denominator));
            AgentState {
                y_tilde,
                x_tilde,
                y: y_tilde / s.sigma,
                x: x_tilde / s.sigma,
                sigma: s.sigma,
            }
        })
        .collect();
    check_finite(&next)?;
    Ok(next)
}

/// States before the first time-varying step: `ỹ = S`, `x̃ = 1`, no pilot yet.
pub fn tvc_initialize(s: &InitialStates) -> Vec<AgentState> {
    s.values()
        .iter()
        .map(|&value| AgentState {
            y_tilde: value,
            x_tilde: 1.0,
            y: value,
            x: 1.0,
            sigma: 0.0,
        })
        .collect()
}

/// Time-varying step within one coherence block of `h_k`:
/// pilot slot first, then every node transmits its received values divided
/// by the pilot sum it just measured, and receives the new aggregates.
///
/// The net map is `ỹ[k+1] = H[k] Σ[k] ỹ[k]` with `Σ[k]` the inverse row
/// sums of `H[k]`, which equal its column sums under reciprocity.
pub fn tvc_step(
    states: &[AgentState],
    h_k: &ChannelRealization,
    noise: &impl SlotNoise,
) -> Result<Vec<AgentState>> {
    let n = h_k.n();
    if states.len() != n {
        return Err(Error::usage(format!(
            "{} states for {n} nodes",
            states.len()
        )));
    }
    let ones = vec![1.0; n];
    let sigmas = (0..n)
        .map(|j| pilot_sum(h_k, j, &ones, noise))
        .collect::<Result<Vec<f64>>>()?;
    let ys: Vec<f64> = states
        .iter()
        .zip(&sigmas)
        .map(|(s, sg)| s.y_tilde / sg)
        .collect();
    let xs: Vec<f64> = states
        .iter()
        .zip(&sigmas)
        .map(|(s, sg)| s.x_tilde / sg)
        .collect();
    let next: Vec<AgentState> = (0..n)
        .map(|j| {
            let row = h_k.row(j);
            AgentState {
                y_tilde: ota_aggregate(row, &ys, noise.draw(j, Slot::Numerator)),
                x_tilde: ota_aggregate(row, &xs, noise.draw(j, Slot::Denominator)),
                y: ys[j],
                x: xs[j],
                sigma: sigmas[j],
            }
        })
        .collect();
    check_finite(&next)?;
    Ok(next)
}

/// Per-node estimate `ỹ_j / x̃_j`.
pub fn ratio_output(states: &[AgentState]) -> Result<Vec<f64>> {
    states
        .iter()
        .enumerate()
        .map(|(node, s)| {
            if s.x_tilde > 0.0 && s.x_tilde.is_finite() {
                Ok(s.y_tilde / s.x_tilde)
            } else {
                Err(Error::Degenerate {
                    node,
                    x_tilde: s.x_tilde,
                })
            }
        })
        .collect()
}
