//! Subcommand implementations behind the `ota-consensus` binary.
//!
//! Each command writes its files into an output directory and returns the
//! in-memory result so callers (and tests) can inspect it.

use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{
    audit_column_stochastic, build_hbar, mass_audit, matrix_oracle, stationary_limit,
};
use crate::config::{apply_override, ParsedConfig};
use crate::error::{Error, Result};
use crate::protocol::{baseline_weights, InitialStates};
use crate::report::{
    summary_json, sweep_csv, trajectory_csv, verify_json, CheckResult, CheckStatus, SweepRow,
};
use crate::simulator::{
    make_initial_values, run, Algorithm, InitialSpec, RunOutput, SimulationConfig,
};
use crate::topology::{generate_topology, Digraph};

/// Exit codes of the binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CHECK_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const RUNTIME: i32 = 3;
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_usage() {
        exit::USAGE
    } else {
        exit::RUNTIME
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Runs the configured simulation and writes `trajectory.csv` and `summary.json`.
pub fn cmd_run(parsed: &ParsedConfig, out_dir: &Path) -> Result<RunOutput> {
    let out = run(&parsed.config)?;
    write_file(out_dir, "trajectory.csv", &trajectory_csv(&out))?;
    write_file(
        out_dir,
        "summary.json",
        &summary_json(&out.summary, &parsed.config),
    )?;
    Ok(out)
}

/// Generates the configured topology and writes it as `topology.txt`.
pub fn cmd_topo(parsed: &ParsedConfig, out_dir: &Path) -> Result<Digraph> {
    let c = &parsed.config;
    let g = generate_topology(&c.topology, c.n, c.seed)?;
    write_file(out_dir, "topology.txt", &g.to_edge_list())?;
    Ok(g)
}

/// One run per (value, seed); rows ordered by (value index, seed index).
pub fn cmd_sweep(parsed: &ParsedConfig, out_dir: &Path) -> Result<Vec<SweepRow>> {
    let sweep = parsed
        .sweep
        .as_ref()
        .ok_or_else(|| Error::usage("config has no [sweep] block"))?;
    if sweep.values.is_empty() || sweep.seeds.is_empty() {
        return Err(Error::usage("sweep needs at least one value and one seed"));
    }
    let jobs: Vec<(String, u64)> = sweep
        .values
        .iter()
        .flat_map(|v| sweep.seeds.iter().map(move |&s| (v.clone(), s)))
        .collect();
    let configs = jobs
        .iter()
        .map(|(value, seed)| {
            let mut c = parsed.config.clone();
            apply_override(&mut c, &sweep.parameter, value, &parsed.base_dir)?;
            c.seed = *seed;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = configs
        .par_iter()
        .zip(jobs.par_iter())
        .map(|(c, (value, seed))| {
            let out = run(c)?;
            Ok(SweepRow {
                parameter: sweep.parameter.clone(),
                value: value.clone(),
                seed: *seed,
                converged: out.summary.converged,
                iterations_used: out.summary.iterations_used,
                final_max_error: out.summary.final_max_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_file(out_dir, "sweep.csv", &sweep_csv(&rows))?;
    Ok(rows)
}

pub const ORACLE_STEPS: usize = 100;
pub const ORACLE_TOL: f64 = 1e-10;
pub const MASS_STEPS: usize = 1000;
pub const MASS_TOL: f64 = 1e-9;
pub const EQUIVARIANCE_TOL: f64 = 1e-12;
pub const BOUNDS_SLACK: f64 = 1e-12;
pub const LIMIT_TOL: f64 = 1e-8;
pub const SCALE_FACTOR: f64 = 3.7;
pub const SHIFT: f64 = -2.0;

/// A noiseless run of exactly `steps` iterations (unless the spread hits
/// zero first) with fixed initial values.
fn fixed_run(
    base: &SimulationConfig,
    algorithm: Algorithm,
    s: &InitialStates,
    steps: usize,
) -> Result<RunOutput> {
    let config = SimulationConfig {
        algorithm,
        initial: InitialSpec::Explicit(s.values().to_vec()),
        max_iters: steps,
        tol: f64::MIN_POSITIVE,
        tol_window: steps,
        deep_fade: base.deep_fade && algorithm == Algorithm::Tvc,
        noise: crate::channel::NoiseModel::NONE,
        ..base.clone()
    };
    run(&config)
}

fn max_abs_diff<'a>(
    a: impl IntoIterator<Item = &'a Vec<f64>>,
    b: impl IntoIterator<Item = &'a Vec<f64>>,
) -> f64 {
    a.into_iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn all_mu(out: &RunOutput) -> Vec<Vec<f64>> {
    (0..out.trajectory.len())
        .map(|k| out.trajectory.mu(k))
        .collect()
}

fn check(name: &str, measured: f64, threshold: f64) -> CheckResult {
    CheckResult {
        check_name: name.to_string(),
        status: if measured <= threshold {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        measured_error: measured,
        threshold,
    }
}

/// Runs the invariant suite for the configured network on both the
/// time-invariant and time-varying protocols. Receiver noise is disabled
/// for every check.
pub fn verify_checks(config: &SimulationConfig) -> Result<Vec<CheckResult>> {
    let topology = generate_topology(&config.topology, config.n, config.seed)?;
    let s = make_initial_values(&config.initial, config.n, config.seed)?;
    let mean = s.mean();
    // The bipartite, self-weight-free case has a periodic H̄: no limit exists.
    let periodic_expected = config.self_weight == 0.0 && topology.is_bipartite();
    let mut checks = Vec::new();

    let tic = fixed_run(config, Algorithm::Tic, &s, MASS_STEPS)?;
    let tvc = fixed_run(config, Algorithm::Tvc, &s, MASS_STEPS)?;

    for (name, out) in [
        ("oracle_equivalence_tic", &tic),
        ("oracle_equivalence_tvc", &tvc),
    ] {
        let steps = ORACLE_STEPS.min(out.summary.iterations_used);
        let oracle = matrix_oracle(&out.realizations, &s, steps)?;
        let err = max_abs_diff(&out.trajectory.y_tilde[..=steps], &oracle.y_tilde).max(
            max_abs_diff(&out.trajectory.x_tilde[..=steps], &oracle.x_tilde),
        );
        checks.push(check(name, err, ORACLE_TOL));
    }

    let mut col_err = 0.0f64;
    let mut min_entry = f64::INFINITY;
    for h in tic.realizations.iter().chain(&tvc.realizations) {
        let audit = audit_column_stochastic(&build_hbar(h)?);
        col_err = col_err.max(audit.max_column_sum_error);
        min_entry = min_entry.min(audit.min_entry);
    }
    let mut c = check(
        "column_stochastic",
        col_err,
        crate::analysis::COLUMN_SUM_TOL,
    );
    if min_entry < 0.0 {
        c.status = CheckStatus::Fail;
    }
    checks.push(c);

    if topology.is_strongly_connected() {
        let p = baseline_weights(&topology)?;
        let audit = audit_column_stochastic(p.as_matrix());
        checks.push(check(
            "baseline_weights_column_stochastic",
            audit.max_column_sum_error,
            crate::analysis::COLUMN_SUM_TOL,
        ));
    }

    for (name, out) in [
        ("mass_conservation_tic", &tic),
        ("mass_conservation_tvc", &tvc),
    ] {
        let d = mass_audit(&out.trajectory, &s);
        checks.push(check(name, d.y.max(d.x), MASS_TOL));
    }

    let lo = s.min() - BOUNDS_SLACK;
    let hi = s.max() + BOUNDS_SLACK;
    let bound_violation = [&tic, &tvc]
        .iter()
        .flat_map(|o| all_mu(o).into_iter().flatten())
        .map(|m| (lo - m).max(m - hi).max(0.0))
        .fold(0.0, f64::max);
    checks.push(check("ratio_bounds", bound_violation, 0.0));

    let scaled = fixed_run(
        config,
        Algorithm::Tic,
        &s.map(|v| SCALE_FACTOR * v),
        MASS_STEPS,
    )?;
    let expected: Vec<Vec<f64>> = all_mu(&tic)
        .into_iter()
        .map(|row| row.into_iter().map(|m| SCALE_FACTOR * m).collect())
        .collect();
    checks.push(check(
        "scale_equivariance",
        max_abs_diff(&all_mu(&scaled), &expected),
        EQUIVARIANCE_TOL,
    ));

    let shifted = fixed_run(config, Algorithm::Tic, &s.map(|v| v + SHIFT), MASS_STEPS)?;
    let expected: Vec<Vec<f64>> = all_mu(&tic)
        .into_iter()
        .map(|row| row.into_iter().map(|m| m + SHIFT).collect())
        .collect();
    checks.push(check(
        "shift_equivariance",
        max_abs_diff(&all_mu(&shifted), &expected),
        EQUIVARIANCE_TOL,
    ));

    let hbar = build_hbar(&tic.realizations[0])?;
    let primitivity = match stationary_limit(&hbar, &s) {
        Ok(est) => {
            let err = (est.predicted_limit - mean)
                .abs()
                .max(est.ratio_identity_error);
            let mut c = check("stationary_limit", err, EQUIVARIANCE_TOL);
            if est.residual > ORACLE_TOL {
                c.status = CheckStatus::Fail;
            }
            if periodic_expected {
                c.status = CheckStatus::Fail;
            }
            c
        }
        Err(Error::Periodic) => CheckResult {
            check_name: "stationary_limit".into(),
            status: if periodic_expected {
                CheckStatus::ExpectedFail
            } else {
                CheckStatus::Fail
            },
            measured_error: f64::NAN,
            threshold: EQUIVARIANCE_TOL,
        },
        Err(e) => return Err(e),
    };
    checks.push(primitivity);

    if topology.is_strongly_connected() {
        let baseline = fixed_run(config, Algorithm::Baseline, &s, MASS_STEPS)?;
        let last = |o: &RunOutput| o.trajectory.mu(o.trajectory.len() - 1);
        let (b, t) = (last(&baseline), last(&tic));
        let err = b
            .iter()
            .zip(&t)
            .map(|(x, y)| (x - mean).abs().max((y - mean).abs()).max((x - y).abs()))
            .fold(0.0, f64::max);
        let mut c = check("baseline_agreement", err, LIMIT_TOL);
        if periodic_expected && c.status == CheckStatus::Fail {
            c.status = CheckStatus::ExpectedFail;
        }
        checks.push(c);
    }

    checks.push(reciprocity_negative_control(&tic, &s)?);
    Ok(checks)
}

/// Breaking reciprocity on one link must break the column-stochastic audit
/// and the mass audit. Passes when both failures are observed.
fn reciprocity_negative_control(tic: &RunOutput, s: &InitialStates) -> Result<CheckResult> {
    let h = &tic.realizations[0];
    let (a, b) = tic
        .topology
        .edges()
        .next()
        .map(|(a, b)| (a.index(), b.index()))
        .ok_or_else(|| Error::usage("negative control needs at least one link"))?;
    let broken = h.clone().with_perturbed_link(b, a, 2.0);
    let audit = audit_column_stochastic(&build_hbar(&broken)?);
    let drift = mass_audit(&matrix_oracle(&[broken], s, ORACLE_STEPS)?, s);
    let measured = drift.y.max(drift.x);
    let detected = !audit.is_column_stochastic && measured > MASS_TOL;
    Ok(CheckResult {
        check_name: "negative_control_reciprocity".into(),
        status: if detected {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        measured_error: measured,
        threshold: MASS_TOL,
    })
}

/// Runs [`verify_checks`] and writes `verify.json`.
pub fn cmd_verify(parsed: &ParsedConfig, out_dir: &Path) -> Result<Vec<CheckResult>> {
    let checks = verify_checks(&parsed.config)?;
    write_file(out_dir, "verify.json", &verify_json(&checks))?;
    Ok(checks)
}
