//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ota_consensus::analysis::{
    audit_column_stochastic, build_hbar, mass_audit, matrix_oracle, stationary_limit,
    COLUMN_SUM_TOL,
};
use ota_consensus::channel::{ChannelRealization, FadingModel, NoiseModel};
use ota_consensus::protocol::{ratio_output, tvc_initialize, tvc_step, InitialStates, Noiseless};
use ota_consensus::simulator::{run, spread, Algorithm, InitialSpec, RunOutput, SimulationConfig};
use ota_consensus::topology::{check_epsilon_b_connectivity, TopologyKind, TopologySpec};
use ota_consensus::Error;

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

type Outcome = Result<String, String>;

fn reproduction_config(algorithm: Algorithm, seed: u64) -> SimulationConfig {
    SimulationConfig {
        n: 10,
        topology: TopologySpec::new(TopologyKind::ErdosRenyi { p: 0.5 }),
        algorithm,
        fading: FadingModel::HalfNormal { scale: 1.0 },
        self_weight: 1.0,
        noise: NoiseModel::NONE,
        initial: InitialSpec::RandomMean {
            mean: 1.0,
            half_width: 1.0,
        },
        max_iters: match algorithm {
            Algorithm::Tvc => 2000,
            _ => 500,
        },
        tol: 1e-9,
        tol_window: 10,
        seed,
        ..SimulationConfig::default()
    }
}

/// Exactly `steps` iterations: the detector window can never fill.
fn fixed_steps(config: SimulationConfig, steps: usize) -> SimulationConfig {
    SimulationConfig {
        max_iters: steps,
        tol: 1e-300,
        tol_window: steps + 1,
        ..config
    }
}

fn explicit(config: SimulationConfig, s: &InitialStates) -> SimulationConfig {
    SimulationConfig {
        initial: InitialSpec::Explicit(s.values().to_vec()),
        ..config
    }
}

fn final_error(out: &RunOutput, target: f64) -> f64 {
    let t = &out.trajectory;
    t.mu(t.len() - 1)
        .iter()
        .map(|m| (m - target).abs())
        .fold(0.0, f64::max)
}

fn all_mu(out: &RunOutput) -> Vec<Vec<f64>> {
    (0..out.trajectory.len())
        .map(|k| out.trajectory.mu(k))
        .collect()
}

fn max_mu_deviation(a: &RunOutput, b: &RunOutput, f: impl Fn(f64) -> f64) -> f64 {
    all_mu(a)
        .iter()
        .zip(all_mu(b))
        .flat_map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| (y - f(*x)).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Runs {
    tic: Vec<RunOutput>,
    tvc: Vec<RunOutput>,
}

fn ac1_tic_reproduction(runs: &mut Runs) -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut max_iters = 0;
    for seed in SEEDS {
        let start = Instant::now();
        let out = run(&reproduction_config(Algorithm::Tic, seed)).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        worst = worst.max(final_error(&out, 1.0));
        max_iters = max_iters.max(out.summary.iterations_used);
        runs.tic.push(out);
    }
    check(
        worst <= 1e-8 && max_iters <= 500 && slowest < Duration::from_secs(1),
        format!("max |mu-1| = {worst:.3e} (<= 1e-8), iterations <= {max_iters} (<= 500), slowest run {slowest:?} (< 1 s)"),
    )
}

fn ac2_tvc_reproduction(runs: &mut Runs) -> Outcome {
    let mut worst = 0.0f64;
    let mut max_iters = 0;
    let mut min_late_change = f64::INFINITY;
    for seed in SEEDS {
        let out = run(&reproduction_config(Algorithm::Tvc, seed)).map_err(|e| e.to_string())?;
        worst = worst.max(final_error(&out, 1.0));
        max_iters = max_iters.max(out.summary.iterations_used);
        let y = &out.trajectory.y_tilde;
        let late_change = (11..y.len())
            .flat_map(|k| y[k].iter().zip(&y[k - 1]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        min_late_change = min_late_change.min(late_change);
        runs.tvc.push(out);
    }
    check(
        worst <= 1e-6 && max_iters <= 2000 && min_late_change > 1e-3,
        format!(
            "max |mu-1| = {worst:.3e} (<= 1e-6), iterations <= {max_iters} (<= 2000), \
             smallest per-run max |dy~| after step 10 = {min_late_change:.3e} (> 1e-3)"
        ),
    )
}

fn ac3_column_stochastic(runs: &Runs) -> Outcome {
    let mut err = 0.0f64;
    let mut min_entry = f64::INFINITY;
    let mut audited = 0;
    for out in runs.tic.iter().chain(&runs.tvc) {
        for h in &out.realizations {
            let a = audit_column_stochastic(&build_hbar(h).map_err(|e| e.to_string())?);
            err = err.max(a.max_column_sum_error);
            min_entry = min_entry.min(a.min_entry);
            audited += 1;
        }
    }
    check(
        err <= COLUMN_SUM_TOL && min_entry >= 0.0,
        format!("{audited} matrices, max column-sum error {err:.3e} (<= 1e-12), min entry {min_entry:.3e} (>= 0)"),
    )
}

fn ac4_mass_conservation() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for algorithm in [Algorithm::Tic, Algorithm::Tvc] {
        let out = run(&fixed_steps(reproduction_config(algorithm, 7), 1000))
            .map_err(|e| e.to_string())?;
        let s = &out.summary;
        ok &=
            out.summary.iterations_used == 1000 && s.mass_drift_y <= 1e-9 && s.mass_drift_x <= 1e-9;
        details.push(format!(
            "{}: {} steps, drift_y {:.3e}, drift_x {:.3e}",
            algorithm.name(),
            s.iterations_used,
            s.mass_drift_y,
            s.mass_drift_x
        ));
    }
    check(ok, format!("{} (<= 1e-9)", details.join("; ")))
}

fn ac5_oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut instances = 0;
    for i in 0..20u64 {
        let n = 2 + (i as usize % 7);
        let base = SimulationConfig {
            n,
            seed: 1000 + i,
            ..reproduction_config(Algorithm::Tic, 0)
        };
        for algorithm in [Algorithm::Tic, Algorithm::Tvc] {
            let out = run(&fixed_steps(
                SimulationConfig {
                    algorithm,
                    ..base.clone()
                },
                100,
            ))
            .map_err(|e| e.to_string())?;
            let oracle =
                matrix_oracle(&out.realizations, &out.initial, 100).map_err(|e| e.to_string())?;
            for k in 0..=100 {
                for j in 0..n {
                    worst = worst
                        .max((out.trajectory.y_tilde[k][j] - oracle.y_tilde[k][j]).abs())
                        .max((out.trajectory.x_tilde[k][j] - oracle.x_tilde[k][j]).abs());
                }
            }
            instances += 1;
        }
    }
    check(
        worst <= 1e-10,
        format!(
            "{instances} runs (20 instances x tic/tvc), max entrywise gap {worst:.3e} (<= 1e-10)"
        ),
    )
}

fn ac6_baseline_cross_check() -> Outcome {
    let mut worst = 0.0f64;
    for seed in SEEDS {
        let tic = run(&reproduction_config(Algorithm::Tic, seed)).map_err(|e| e.to_string())?;
        let base = run(&explicit(
            reproduction_config(Algorithm::Baseline, seed),
            &tic.initial,
        ))
        .map_err(|e| e.to_string())?;
        if base.topology != tic.topology {
            return Err(format!("seed {seed}: runs used different graphs"));
        }
        let mean = tic.initial.mean();
        let t = tic.trajectory.mu(tic.trajectory.len() - 1);
        let b = base.trajectory.mu(base.trajectory.len() - 1);
        for (x, y) in t.iter().zip(&b) {
            worst = worst
                .max((x - y).abs())
                .max((x - mean).abs())
                .max((y - mean).abs());
        }
    }
    check(
        worst <= 1e-8,
        format!("max gap between baseline, tic and mean(S) = {worst:.3e} (<= 1e-8)"),
    )
}

fn ac7_invariance() -> Outcome {
    let mut equal_spread = 0.0f64;
    let mut scale_err = 0.0f64;
    let mut shift_err = 0.0f64;
    for algorithm in [Algorithm::Tic, Algorithm::Tvc] {
        let base_cfg = fixed_steps(reproduction_config(algorithm, 3), 300);
        let equal = run(&explicit(
            base_cfg.clone(),
            &InitialStates::new(vec![5.0; 10]),
        ))
        .map_err(|e| e.to_string())?;
        for mu in all_mu(&equal) {
            equal_spread = equal_spread.max(spread(&mu));
        }
        let base = run(&base_cfg).map_err(|e| e.to_string())?;
        let scaled = run(&explicit(base_cfg.clone(), &base.initial.map(|v| 3.7 * v)))
            .map_err(|e| e.to_string())?;
        let shifted = run(&explicit(base_cfg.clone(), &base.initial.map(|v| v - 2.0)))
            .map_err(|e| e.to_string())?;
        scale_err = scale_err.max(max_mu_deviation(&base, &scaled, |m| 3.7 * m));
        shift_err = shift_err.max(max_mu_deviation(&base, &shifted, |m| m - 2.0));
    }
    check(
        equal_spread <= 1e-12 && scale_err <= 1e-12 && shift_err <= 1e-12,
        format!(
            "all-equal spread {equal_spread:.3e}, scale(3.7) error {scale_err:.3e}, shift(-2) error {shift_err:.3e} (each <= 1e-12)"
        ),
    )
}

fn ac8_ratio_bounds(runs: &Runs) -> Outcome {
    let mut violation = 0.0f64;
    for out in runs.tic.iter().chain(&runs.tvc) {
        let (lo, hi) = (out.initial.min() - 1e-12, out.initial.max() + 1e-12);
        for mu in all_mu(out).into_iter().flatten() {
            violation = violation.max(lo - mu).max(mu - hi);
        }
    }
    check(
        violation <= 0.0,
        format!(
            "{} runs, worst excursion beyond [min S - 1e-12, max S + 1e-12] = {violation:.3e}",
            runs.tic.len() + runs.tvc.len()
        ),
    )
}

fn ac9_epsilon_b() -> Outcome {
    let a = ChannelRealization::from_rows(
        &[vec![0.0, 0.8, 0.0], vec![0.8, 0.0, 0.0], vec![0.0; 3]],
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let b = ChannelRealization::from_rows(
        &[vec![0.0; 3], vec![0.0, 0.0, 1.3], vec![0.0, 1.3, 0.0]],
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let steps = 2000;
    let seq: Vec<_> = (0..steps)
        .map(|k| if k % 2 == 0 { a.clone() } else { b.clone() })
        .collect();
    let eps = 1e-3;
    let b2 = check_epsilon_b_connectivity(&seq, eps, 2).map_err(|e| e.to_string())?;
    let b1 = check_epsilon_b_connectivity(&seq, eps, 1).map_err(|e| e.to_string())?;
    let s = InitialStates::new(vec![3.0, -1.0, 7.0]);
    let mut st = tvc_initialize(&s);
    let mut converged_at = None;
    for (k, h) in seq.iter().enumerate() {
        st = tvc_step(&st, h, &Noiseless).map_err(|e| e.to_string())?;
        if converged_at.is_none() && spread(&ratio_output(&st).map_err(|e| e.to_string())?) < 1e-6 {
            converged_at = Some(k + 1);
        }
    }
    let err = ratio_output(&st)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|m| (m - s.mean()).abs())
        .fold(0.0, f64::max);
    check(
        b2 && !b1 && converged_at.is_some() && err <= 1e-6,
        format!("B=2 -> {b2}, B=1 -> {b1}, spread < 1e-6 at step {converged_at:?}, final |mu - mean| {err:.3e}"),
    )
}

fn ac10_negative_controls() -> Outcome {
    let s = InitialStates::new(vec![0.0, 2.0]);
    let config = SimulationConfig {
        n: 2,
        topology: TopologySpec::new(TopologyKind::Ring),
        self_weight: 0.0,
        ..fixed_steps(explicit(reproduction_config(Algorithm::Tic, 5), &s), 500)
    };
    let out = run(&config).map_err(|e| e.to_string())?;
    let floor = (s.values()[0] - s.values()[1]).abs() / 2.0;
    let min_spread = all_mu(&out)
        .iter()
        .map(|mu| spread(mu))
        .fold(f64::INFINITY, f64::min);
    let hbar = build_hbar(&out.realizations[0]).map_err(|e| e.to_string())?;
    let periodic = matches!(stationary_limit(&hbar, &s), Err(Error::Periodic));

    let reciprocal = run(&reproduction_config(Algorithm::Tic, 2)).map_err(|e| e.to_string())?;
    let h = &reciprocal.realizations[0];
    let (i, j) = reciprocal
        .topology
        .edges()
        .next()
        .map(|(a, b)| (a.index(), b.index()))
        .unwrap();
    let good_audit = audit_column_stochastic(&build_hbar(h).map_err(|e| e.to_string())?);
    let broken = h.clone().with_perturbed_link(j, i, 2.0);
    let bad_audit = audit_column_stochastic(&build_hbar(&broken).map_err(|e| e.to_string())?);
    let drift = mass_audit(
        &matrix_oracle(&[broken], &reciprocal.initial, 1000).map_err(|e| e.to_string())?,
        &reciprocal.initial,
    );
    check(
        out.summary.iterations_used == 500
            && min_spread >= floor
            && periodic
            && good_audit.is_column_stochastic
            && !bad_audit.is_column_stochastic
            && drift.x.max(drift.y) > 1e-9,
        format!(
            "self_weight=0 pair: min spread {min_spread:.3e} over 500 steps (>= {floor}), periodicity error {periodic}; \
             broken reciprocity: column-sum error {:.3e} (stochastic={}), mass drift {:.3e} (> 1e-9)",
            bad_audit.max_column_sum_error,
            bad_audit.is_column_stochastic,
            drift.x.max(drift.y)
        ),
    )
}

fn main() -> ExitCode {
    let mut runs = Runs {
        tic: Vec::new(),
        tvc: Vec::new(),
    };
    let results: Vec<(&str, Outcome)> = vec![
        (
            "AC-1  TIC reproduction (n=10, 10 seeds)",
            ac1_tic_reproduction(&mut runs),
        ),
        (
            "AC-2  TVC reproduction (n=10, 10 seeds)",
            ac2_tvc_reproduction(&mut runs),
        ),
        (
            "AC-3  column stochasticity of every realized matrix",
            ac3_column_stochastic(&runs),
        ),
        (
            "AC-4  mass conservation over 1000 steps",
            ac4_mass_conservation(),
        ),
        (
            "AC-5  protocol vs matrix-product oracle",
            ac5_oracle_equivalence(),
        ),
        ("AC-6  baseline cross-check", ac6_baseline_cross_check()),
        ("AC-7  invariance suite", ac7_invariance()),
        ("AC-8  ratio bounds", ac8_ratio_bounds(&runs)),
        ("AC-9  (epsilon, B)-connectivity machinery", ac9_epsilon_b()),
        ("AC-10 negative controls", ac10_negative_controls()),
    ];
    let mut failed = 0;
    println!();
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!(
        "\nacceptance: {} passed, {} failed",
        results.len() - failed,
        failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
