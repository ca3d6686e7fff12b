//! Matrix-form oracle and invariant audits.
//!
//! The protocols are equivalent to iterating `ỹ[k+1] = H̄[k] ỹ[k]` with
//! `H̄[k] = H[k] Σ[k]`, where `Σ[k]` holds the inverse pilot sums. This
//! module builds those matrices explicitly and iterates them, independently
//! of the per-node aggregation code in [`protocol`](crate::protocol), so the
//! two routes can be compared.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::protocol::{InitialStates, SIGMA_MIN};

/// Column-sum tolerance for calling a matrix column stochastic.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// Residual target for the power iteration.
pub const POWER_ITERATION_TOL: f64 = 1e-12;

const POWER_ITERATION_MAX: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticAudit {
    pub max_column_sum_error: f64,
    pub min_entry: f64,
    pub is_column_stochastic: bool,
}

/// `H̄ = H Σ`: column `j` of the gain matrix divided by node `j`'s pilot
/// sum (its row sum, which reciprocity makes equal to its column sum).
pub fn build_hbar(h: &ChannelRealization) -> Result<Matrix> {
    let n = h.n();
    let mut m = Matrix::zeros(n);
    for j in 0..n {
        let sigma: f64 = h.row(j).iter().sum();
        if !(sigma > SIGMA_MIN && sigma.is_finite()) {
            return Err(Error::Isolated {
                node: j,
                sigma,
                guard: SIGMA_MIN,
            });
        }
        for i in 0..n {
            m[(i, j)] = h.gain(i, j) / sigma;
        }
    }
    Ok(m)
}

pub fn audit_column_stochastic(m: &Matrix) -> StochasticAudit {
    let n = m.n();
    let max_column_sum_error = (0..n)
        .map(|j| (m.column_sum(j) - 1.0).abs())
        .fold(0.0, f64::max);
    let min_entry = (0..n)
        .flat_map(|i| m.row(i).iter().copied())
        .fold(f64::INFINITY, f64::min);
    StochasticAudit {
        max_column_sum_error,
        min_entry,
        is_column_stochastic: max_column_sum_error <= COLUMN_SUM_TOL && min_entry >= 0.0,
    }
}

/// Per-step received states `ỹ[k]`, `x̃[k]` for `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub y_tilde: Vec<Vec<f64>>,
    pub x_tilde: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(y0: Vec<f64>, x0: Vec<f64>) -> Self {
        Trajectory {
            y_tilde: vec![y0],
            x_tilde: vec![x0],
        }
    }

    pub fn push(&mut self, y: Vec<f64>, x: Vec<f64>) {
        self.y_tilde.push(y);
        self.x_tilde.push(x);
    }

    /// Number of recorded states (iterations + 1).
    pub fn len(&self) -> usize {
        self.y_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_tilde.is_empty()
    }

    pub fn n(&self) -> usize {
        self.y_tilde.first().map_or(0, Vec::len)
    }

    pub fn mu(&self, k: usize) -> Vec<f64> {
        self.y_tilde[k]
            .iter()
            .zip(&self.x_tilde[k])
            .map(|(y, x)| y / x)
            .collect()
    }
}

/// Brute-force iteration of the product form from `ỹ[0] = S`, `x̃[0] = 1`.
///
/// Step `k` uses `h_seq[k % h_seq.len()]`, so a one-element sequence is a
/// time-invariant channel and a two-element one alternates.
pub fn matrix_oracle(
    h_seq: &[ChannelRealization],
    s: &InitialStates,
    k_max: usize,
) -> Result<Trajectory> {
    if h_seq.is_empty() {
        return Err(Error::usage("matrix_oracle needs at least one realization"));
    }
    let hbars = h_seq.iter().map(build_hbar).collect::<Result<Vec<_>>>()?;
    if hbars.iter().any(|m| m.n() != s.len()) {
        return Err(Error::usage(
            "realization size does not match initial states",
        ));
    }
    let mut traj = Trajectory::new(s.values().to_vec(), vec![1.0; s.len()]);
    for k in 0..k_max {
        let m = &hbars[k % hbars.len()];
        let y = m.mul_vec(&traj.y_tilde[k]);
        let x = m.mul_vec(&traj.x_tilde[k]);
        traj.push(y, x);
    }
    Ok(traj)
}

/// Primitivity via boolean repeated squaring up to the Wielandt exponent
/// `n² − 2n + 2`.
pub fn is_primitive(m: &Matrix) -> bool {
    let n = m.n();
    let bound = n * n - 2 * n + 2;
    let mut support: Vec<Vec<bool>> = (0..n)
        .map(|i| m.row(i).iter().map(|&v| v > 0.0).collect())
        .collect();
    let mut exponent = 1;
    while exponent < bound {
        support = bool_square(&support);
        exponent *= 2;
    }
    support.iter().all(|row| row.iter().all(|&b| b))
}

fn bool_square(a: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).any(|k| a[i][k] && a[k][j])).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    /// Right Perron vector of `H̄`, normalized to sum 1.
    pub eigenvector: Vec<f64>,
    /// `1ᵀỹ[0] / 1ᵀx̃[0]`, the initial average.
    pub predicted_limit: f64,
    /// `‖H̄v − v‖∞` at termination.
    pub residual: f64,
    /// Largest deviation of `(v_j · ΣS) / (v_j · n)` from the predicted limit.
    pub ratio_identity_error: f64,
    pub iterations: usize,
}

/// Limit of the ratio iteration under a constant `H̄`.
pub fn stationary_limit(hbar: &Matrix, s: &InitialStates) -> Result<LimitEstimate> {
    let n = hbar.n();
    if s.len() != n {
        return Err(Error::usage(format!(
            "{} initial values for a {n}x{n} matrix",
            s.len()
        )));
    }
    if !is_primitive(hbar) {
        return Err(Error::Periodic);
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < POWER_ITERATION_MAX {
        let mut next = hbar.mul_vec(&v);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|e| *e /= total);
        residual = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        iterations += 1;
        if residual <= POWER_ITERATION_TOL {
            break;
        }
    }
    if residual > POWER_ITERATION_TOL {
        return Err(Error::NoConvergence {
            iterations,
            residual,
            target: POWER_ITERATION_TOL,
        });
    }
    // Residual of the returned vector itself.
    residual = hbar
        .mul_vec(&v)
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let y_mass = s.sum();
    let x_mass = n as f64;
    let predicted_limit = y_mass / x_mass;
    let ratio_identity_error = v
        .iter()
        .map(|&vj| ((vj * y_mass) / (vj * x_mass) - predicted_limit).abs())
        .fold(0.0, f64::max);
    Ok(LimitEstimate {
        eigenvector: v,
        predicted_limit,
        residual,
        ratio_identity_error,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassDrift {
    pub y: f64,
    pub x: f64,
}

/// Worst relative deviation of `Σ_j ỹ_j[k]` from `Σ_j S_j` and of
/// `Σ_j x̃_j[k]` from `n` over the trajectory.
pub fn mass_audit(traj: &Trajectory, s: &InitialStates) -> MassDrift {
    let y_mass = s.sum();
    let n = s.len() as f64;
    let y_scale = y_mass.abs().max(1.0);
    let mut drift = MassDrift { y: 0.0, x: 0.0 };
    for (ys, xs) in traj.y_tilde.iter().zip(&traj.x_tilde) {
        let dy = (ys.iter().sum::<f64>() - y_mass).abs() / y_scale;
        let dx = (xs.iter().sum::<f64>() - n).abs() / n;
        drift.y = drift.y.max(dy);
        drift.x = drift.x.max(dx);
    }
    drift
}
