//! End-to-end runs: initialization, stepping, recording and convergence
//! detection for the three protocols.

use rand::Rng;

use crate::analysis::{mass_audit, Trajectory};
use crate::channel::{ChannelProcess, ChannelRealization, FadingModel, NoiseModel, NoiseProcess};
use crate::error::{Error, Result};
use crate::protocol::{
    baseline_step, baseline_weights, ratio_output, tic_initialize, tic_step, tvc_initialize, tvc_step,
    InitialStates, StepNoise,
};
use crate::rng::{substream, Domain};
use crate::topology::{
    check_epsilon_b_connectivity, generate_topology, Digraph, NodeId, TopologyKind, TopologySpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Over-the-air ratio consensus, time-invariant channel.
    Tic,
    /// Over-the-air ratio consensus, channel resampled every step.
    Tvc,
    /// Classical ratio consensus with out-degree weights.
    Baseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tic => "tic",
            Algorithm::Tvc => "tvc",
            Algorithm::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Explicit(Vec<f64>),
    /// Uniform in `[mean − half_width, mean + half_width]`, then recentred so
    /// the realized mean is `mean`.
    RandomMean {
        mean: f64,
        half_width: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub topology: TopologySpec,
    pub algorithm: Algorithm,
    pub fading: FadingModel,
    pub self_weight: f64,
    pub noise: NoiseModel,
    /// Gain threshold of the effective graph.
    pub epsilon: f64,
    /// Window length for the joint-connectivity audit.
    pub b: usize,
    pub deep_fade: bool,
    pub initial: InitialSpec,
    pub max_iters: usize,
    pub tol: f64,
    pub tol_window: usize,
    pub seed: u64,
    /// Per-link gain multipliers `(i, j, factor)`.
    pub edge_scales: Vec<(usize, usize, f64)>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 10,
            topology: TopologySpec::new(TopologyKind::ErdosRenyi { p: 0.5 }),
            algorithm: Algorithm::Tic,
            fading: FadingModel::HalfNormal { scale: 1.0 },
            self_weight: 1.0,
            noise: NoiseModel::NONE,
            epsilon: 1e-3,
            b: 1,
            deep_fade: false,
            initial: InitialSpec::RandomMean {
                mean: 1.0,
                half_width: 1.0,
            },
            max_iters: 5000,
            tol: 1e-9,
            tol_window: 10,
            seed: 0,
            edge_scales: Vec::new(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Usage(msg));
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.max_iters < 1 {
            return fail("max_iters must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if self.tol_window < 1 {
            return fail("tol_window must be at least 1".into());
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.b < 1 {
            return fail("B must be at least 1".into());
        }
        if self.deep_fade && self.algorithm != Algorithm::Tvc {
            return fail("deep_fade is only available with algorithm = tvc".into());
        }
        if !(self.self_weight >= 0.0 && self.self_weight.is_finite()) {
            return fail(format!(
                "self_weight must be nonnegative, got {}",
                self.self_weight
            ));
        }
        self.fading.validate()?;
        self.noise.validate()?;
        match &self.initial {
            InitialSpec::Explicit(values) if values.len() != self.n => {
                return fail(format!(
                    "{} explicit initial values for n = {}",
                    values.len(),
                    self.n
                ));
            }
            InitialSpec::RandomMean { half_width, mean }
                if !(*half_width >= 0.0) || !mean.is_finite() =>
            {
                return fail(format!("invalid random_mean({mean}, {half_width})"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// One row of `trajectory.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub node: NodeId,
    pub y_tilde: f64,
    pub x_tilde: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub converged: bool,
    pub iterations_used: usize,
    /// Mean of the realized initial values.
    pub target_average: f64,
    /// `max_j |μ_j − target_average|` at the last step.
    pub final_max_error: f64,
    pub mass_drift_y: f64,
    pub mass_drift_x: f64,
    /// (ε, B)-connectivity of the realized channel sequence; `None` unless tvc.
    pub epsilon_b_satisfied: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub initial: InitialStates,
    pub topology: Digraph,
    pub trajectory: Trajectory,
    /// Channel realizations used: one for tic, one per step for tvc, none for baseline.
    pub realizations: Vec<ChannelRealization>,
    pub summary: RunSummary,
}

impl RunOutput {
    pub fn records(&self) -> impl Iterator<Item = TrajectoryRecord> + '_ {
        let t = &self.trajectory;
        (0..t.len()).flat_map(move |step| {
            (0..t.n()).map(move |node| {
                let y_tilde = t.y_tilde[step][node];
                let x_tilde = t.x_tilde[step][node];
                TrajectoryRecord {
                    step,
                    node: NodeId(node),
                    y_tilde,
                    x_tilde,
                    mu: y_tilde / x_tilde,
                }
            })
        })
    }
}

pub fn make_initial_values(spec: &InitialSpec, n: usize, seed: u64) -> Result<InitialStates> {
    match spec {
        InitialSpec::Explicit(values) => {
            if values.len() != n {
                return Err(Error::usage(format!(
                    "{} explicit initial values for n = {n}",
                    values.len()
                )));
            }
            Ok(InitialStates::new(values.clone()))
        }
        &InitialSpec::RandomMean { mean, half_width } => {
            if !(half_width >= 0.0) {
                return Err(Error::usage(format!(
                    "half_width must be nonnegative, got {half_width}"
                )));
            }
            if half_width == 0.0 {
                return Ok(InitialStates::new(vec![mean; n]));
            }
            let mut rng = substream(seed, Domain::Initial, n as u64, 0, 0);
            let raw: Vec<f64> = (0..n)
                .map(|_| rng.random_range(mean - half_width..=mean + half_width))
                .collect();
            let shift = mean - raw.iter().sum::<f64>() / n as f64;
            Ok(InitialStates::new(
                raw.into_iter().map(|v| v + shift).collect(),
            ))
        }
    }
}

/// `max(μ) − min(μ)`.
pub fn spread(mu: &[f64]) -> f64 {
    let (lo, hi) = mu
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

struct Detector {
    tol: f64,
    window: usize,
    streak: usize,
}

impl Detector {
    fn observe(&mut self, mu: &[f64]) -> bool {
        if spread(mu) <= self.tol {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.streak >= self.window
    }
}

/// Runs `config` to convergence (μ spread ≤ tol for tol_window consecutive
/// iterations) or to `max_iters`. Deterministic in `config`.
pub fn run(config: &SimulationConfig) -> Result<RunOutput> {
    config.validate()?;
    let n = config.n;
    let topology = generate_topology(&config.topology, n, config.seed)?;
    if config.algorithm != Algorithm::Tvc && !topology.is_strongly_connected() {
        return Err(Error::usage(format!(
            "{} needs a strongly connected topology",
            config.algorithm.name()
        )));
    }
    let initial = make_initial_values(&config.initial, n, config.seed)?;
    let mut trajectory = Trajectory::new(initial.values().to_vec(), vec![1.0; n]);
    let mut detector = Detector {
        tol: config.tol,
        window: config.tol_window,
        streak: 0,
    };
    let noise = NoiseProcess {
        model: config.noise,
        seed: config.seed,
    };
    let mut realizations = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    match config.algorithm {
        Algorithm::Baseline => {
            let p = baseline_weights(&topology)?;
            let (mut y, mut x) = (initial.values().to_vec(), vec![1.0; n]);
            while iterations < config.max_iters {
                (y, x) = baseline_step(&y, &x, &p);
                iterations += 1;
                trajectory.push(y.clone(), x.clone());
                if detector.observe(&trajectory.mu(iterations)) {
                    converged = true;
                    break;
                }
            }
        }
        Algorithm::Tic | Algorithm::Tvc => {
            let time_varying = config.algorithm == Algorithm::Tvc;
            let mut process = ChannelProcess::new(
                config.fading,
                &topology,
                config.self_weight,
                time_varying,
                config.seed,
            )?;
            for &(a, b, factor) in &config.edge_scales {
                process = process.with_edge_scale(a, b, factor)?;
            }
            if config.deep_fade {
                process = process.with_deep_fade(config.epsilon)?;
            }
            let mut states = if time_varying {
                tvc_initialize(&initial)
            } else {
                let h = process.realization(0);
                let states = tic_initialize(
                    &initial,
                    &h,
                    &StepNoise {
                        process: &noise,
                        step: 0,
                    },
                )?;
                realizations.push(h);
                states
            };
            while iterations < config.max_iters {
                let step_noise = StepNoise {
                    process: &noise,
                    step: iterations,
                };
                states = if time_varying {
                    let h = process.realization(iterations);
                    let next = tvc_step(&states, &h, &step_noise)?;
                    realizations.push(h);
                    next
                } else {
                    tic_step(&states, &realizations[0], &step_noise)?
                };
                iterations += 1;
                let mu = ratio_output(&states)?;
                trajectory.push(
                    states.iter().map(|s| s.y_tilde).collect(),
                    states.iter().map(|s| s.x_tilde).collect(),
                );
                if detector.observe(&mu) {
                    converged = true;
                    break;
                }
            }
        }
    }

    let target_average = initial.mean();
    let final_max_error = trajectory
        .mu(iterations)
        .iter()
        .map(|m| (m - target_average).abs())
        .fold(0.0, f64::max);
    let drift = mass_audit(&trajectory, &initial);
    let epsilon_b_satisfied = match config.algorithm {
        Algorithm::Tvc => Some(check_epsilon_b_connectivity(
            &realizations,
            config.epsilon,
            config.b,
        )?),
        _ => None,
    };
    Ok(RunOutput {
        initial,
        topology,
        trajectory,
        realizations,
        summary: RunSummary {
            converged,
            iterations_used: iterations,
            target_average,
            final_max_error,
            mass_drift_y: drift.y,
            mass_drift_x: drift.x,
            epsilon_b_satisfied,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_examples() {
        assert_eq!(spread(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(spread(&[0.0, 2.0]), 2.0);
        assert_eq!(spread(&[-1.5]), 0.0);
    }

    #[test]
    fn random_initial_values_are_recentred() {
        for seed in 0..20 {
            let s = make_initial_values(
                &InitialSpec::RandomMean {
                    mean: 1.0,
                    half_width: 1.0,
                },
                10,
                seed,
            )
            .unwrap();
            assert!((s.mean() - 1.0).abs() <= 1e-12, "{}", s.mean());
            assert!(s.values().iter().any(|&v| (v - 1.0).abs() > 1e-3));
        }
    }

    #[test]
    fn degenerate_interval_gives_constant_values() {
        let s = make_initial_values(
            &InitialSpec::RandomMean {
                mean: 0.7,
                half_width: 0.0,
            },
            5,
            1,
        )
        .unwrap();
        assert_eq!(s.values(), &[0.7; 5]);
    }

    #[test]
    fn explicit_initial_values() {
        let s = make_initial_values(&InitialSpec::Explicit(vec![0.0, 2.0]), 2, 0).unwrap();
        assert_eq!(s.mean(), 1.0);
        assert!(make_initial_values(&InitialSpec::Explicit(vec![0.0, 2.0]), 3, 0).is_err());
    }

    #[test]
    fn all_equal_values_converge_after_window() {
        let config = SimulationConfig {
            initial: InitialSpec::Explicit(vec![5.0; 10]),
            seed: 3,
            ..SimulationConfig::default()
        };
        let out = run(&config).unwrap();
        assert!(out.summary.converged);
        assert_eq!(out.summary.iterations_used, config.tol_window);
        for r in out.records() {
            assert!((r.mu - 5.0).abs() <= 5.0 * 1e-15, "{r:?}");
        }
    }

    #[test]
    fn tic_run_reaches_average() {
        let config = SimulationConfig {
            seed: 42,
            ..SimulationConfig::default()
        };
        let out = run(&config).unwrap();
        assert!(out.summary.converged);
        assert!(out.summary.final_max_error <= 1e-8, "{:?}", out.summary);
        assert!(out.summary.epsilon_b_satisfied.is_none());
        assert_eq!(
            out.records().count(),
            10 * (out.summary.iterations_used + 1)
        );
    }

    #[test]
    fn tvc_run_reports_connectivity() {
        let config = SimulationConfig {
            algorithm: Algorithm::Tvc,
            seed: 42,
            ..SimulationConfig::default()
        };
        let out = run(&config).unwrap();
        assert!(out.summary.converged);
        assert_eq!(out.summary.epsilon_b_satisfied, Some(true));
        assert_eq!(out.realizations.len(), out.summary.iterations_used);
    }

    #[test]
    fn baseline_run_reaches_average() {
        let config = SimulationConfig {
            algorithm: Algorithm::Baseline,
            seed: 9,
            ..SimulationConfig::default()
        };
        let out = run(&config).unwrap();
        assert!(out.summary.converged);
        assert!(out.summary.final_max_error <= config.tol);
        assert!(out.realizations.is_empty());
    }

    #[test]
    fn runs_are_deterministic() {
        let config = SimulationConfig {
            algorithm: Algorithm::Tvc,
            seed: 17,
            max_iters: 200,
            ..SimulationConfig::default()
        };
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn bipartite_pair_without_self_weight_does_not_converge() {
        let config = SimulationConfig {
            n: 2,
            topology: TopologySpec::new(TopologyKind::Ring),
            self_weight: 0.0,
            initial: InitialSpec::Explicit(vec![0.0, 2.0]),
            max_iters: 500,
            ..SimulationConfig::default()
        };
        let out = run(&config).unwrap();
        assert!(!out.summary.converged);
        assert_eq!(out.summary.iterations_used, 500);
    }

    #[test]
    fn tic_rejects_disconnected_edge_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.txt");
        std::fs::write(&path, "0 1\n2 3\n").unwrap();
        let config = SimulationConfig {
            n: 4,
            topology: TopologySpec::new(TopologyKind::EdgeList(path)),
            ..SimulationConfig::default()
        };
        assert!(matches!(run(&config), Err(Error::Usage(_))));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let bad = [
            SimulationConfig {
                n: 1,
                ..Default::default()
            },
            SimulationConfig {
                tol: 0.0,
                ..Default::default()
            },
            SimulationConfig {
                tol_window: 0,
                ..Default::default()
            },
            SimulationConfig {
                max_iters: 0,
                ..Default::default()
            },
            SimulationConfig {
                b: 0,
                ..Default::default()
            },
            SimulationConfig {
                deep_fade: true,
                ..Default::default()
            },
            SimulationConfig {
                initial: InitialSpec::Explicit(vec![1.0]),
                ..Default::default()
            },
        ];
        for config in bad {
            assert!(config.validate().is_err(), "{config:?}");
        }
    }
}
