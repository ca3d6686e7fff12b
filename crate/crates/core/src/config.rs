//! Plain-text run configuration.
//!
//! ```text
//! # comments start with '#'
//! n = 10
//! topology = erdos_renyi(0.5)
//! algorithm = tic
//! fading = half_normal(1.0)
//! initial = random_mean(1.0, 1.0)
//! seed = 42
//!
//! [sweep]
//! parameter = self_weight
//! values = 0, 1
//! seeds = 1, 2, 3
//! ```
//!
//! Omitted keys take the [`SimulationConfig::default`] values. Overrides
//! (`key=value`) are applied after the file.

use std::path::{Path, PathBuf};

use crate::channel::{FadingModel, NoiseModel};
use crate::error::{Error, Result};
use crate::simulator::{Algorithm, InitialSpec, SimulationConfig};
use crate::topology::TopologyKind;

/// Every key accepted in the main section, in echo order.
pub const CONFIG_KEYS: &[&str] = &[
    "n",
    "topology",
    "symmetric",
    "algorithm",
    "fading",
    "self_weight",
    "noise_std",
    "epsilon",
    "B",
    "deep_fade",
    "initial",
    "max_iters",
    "tol",
    "tol_window",
    "seed",
    "edge_scale",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: String,
    /// Raw values, each parsed as if written `parameter = value`.
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: SimulationConfig,
    pub sweep: Option<SweepSpec>,
    /// Directory relative edge-list paths are resolved against.
    pub base_dir: PathBuf,
}

pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::usage(format!("cannot read config {}: {e}", path.display())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &path.display().to_string(), &base_dir, overrides)
}

pub fn parse_config_str(
    text: &str,
    source_name: &str,
    base_dir: &Path,
    overrides: &[String],
) -> Result<ParsedConfig> {
    let err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut config = SimulationConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    let mut in_sweep = false;
    let mut sweep_parameter: Option<(String, usize)> = None;
    let mut sweep_values: Option<(Vec<String>, usize)> = None;
    let mut sweep_seeds: Option<Vec<u64>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if line == "[sweep]" && !in_sweep {
                in_sweep = true;
                continue;
            }
            return Err(err(line_no, format!("unexpected section header `{line}`")));
        }
        let (key, value) = split_entry(line)
            .ok_or_else(|| err(line_no, format!("expected `key = value`, found `{line}`")))?;
        if in_sweep {
            match key {
                "parameter" => sweep_parameter = Some((value.to_string(), line_no)),
                "values" => sweep_values = Some((split_top_level(value), line_no)),
                "seeds" => {
                    let seeds = split_top_level(value)
                        .iter()
                        .map(|s| s.parse::<u64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| {
                            err(
                                line_no,
                                format!("seeds: `{value}` is not a list of integers"),
                            )
                        })?;
                    sweep_seeds = Some(seeds);
                }
                other => return Err(err(line_no, format!("unknown sweep key `{other}`"))),
            }
            continue;
        }
        let canonical = CONFIG_KEYS
            .iter()
            .find(|&&k| k == key)
            .ok_or_else(|| err(line_no, format!("unknown key `{key}`")))?;
        if seen.contains(canonical) {
            return Err(err(line_no, format!("duplicate key `{key}`")));
        }
        seen.push(canonical);
        apply_key(&mut config, key, value, base_dir)
            .map_err(|m| err(line_no, format!("{key}: {m}")))?;
    }

    for (idx, ov) in overrides.iter().enumerate() {
        let override_err = |message: String| Error::Parse {
            source_name: "override".to_string(),
            line: idx + 1,
            message,
        };
        let (key, value) = split_entry(ov)
            .ok_or_else(|| override_err(format!("expected `key=value`, found `{ov}`")))?;
        if !CONFIG_KEYS.contains(&key) {
            return Err(override_err(format!("unknown key `{key}`")));
        }
        apply_key(&mut config, key, value, base_dir)
            .map_err(|m| override_err(format!("{key}: {m}")))?;
    }

    let sweep = if in_sweep {
        let (parameter, p_line) =
            sweep_parameter.ok_or_else(|| err(0, "sweep block needs `parameter`".into()))?;
        if !CONFIG_KEYS.contains(&parameter.as_str()) || parameter == "seed" {
            return Err(Error::usage(format!(
                "cannot sweep unknown parameter `{parameter}` (line {p_line})"
            )));
        }
        let (values, v_line) = sweep_values.unwrap_or((Vec::new(), 0));
        if values.is_empty() {
            return Err(Error::usage("sweep value list is empty"));
        }
        for v in &values {
            let mut probe = config.clone();
            apply_key(&mut probe, &parameter, v, base_dir)
                .map_err(|m| err(v_line, format!("values: {parameter}: {m}")))?;
        }
        let seeds = sweep_seeds.unwrap_or_else(|| vec![config.seed]);
        if seeds.is_empty() {
            return Err(Error::usage("sweep seed list is empty"));
        }
        Some(SweepSpec {
            parameter,
            values,
            seeds,
        })
    } else {
        None
    };

    config.validate()?;
    Ok(ParsedConfig {
        config,
        sweep,
        base_dir: base_dir.to_path_buf(),
    })
}

fn split_entry(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then_some((k, v))
}

/// Splits on commas outside parentheses.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(current.trim().to_string());
                current.clear();
                continue;
            }
            _ => {}
        }
        current.push(c);
    }
    if !current.trim().is_empty() || !out.is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

/// `name(a, b)` → `("name", ["a", "b"])`; a bare `name` has no arguments.
fn parse_call(value: &str) -> std::result::Result<(&str, Vec<String>), String> {
    match value.split_once('(') {
        None => Ok((value.trim(), Vec::new())),
        Some((name, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("missing `)` in `{value}`"))?;
            Ok((name.trim(), split_top_level(inner)))
        }
    }
}

fn real(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn integer(s: &str) -> std::result::Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("`{other}` is not true/false")),
    }
}

fn args<const N: usize>(name: &str, a: &[String]) -> std::result::Result<[f64; N], String> {
    if a.len() != N {
        return Err(format!("{name} takes {N} argument(s), got {}", a.len()));
    }
    let mut out = [0.0; N];
    for (o, s) in out.iter_mut().zip(a) {
        *o = real(s)?;
    }
    Ok(out)
}

fn apply_key(
    config: &mut SimulationConfig,
    key: &str,
    value: &str,
    base_dir: &Path,
) -> std::result::Result<(), String> {
    match key {
        "n" => {
            let n = integer(value)?;
            if n < 2 {
                return Err(format!("must be at least 2, got {n}"));
            }
            config.n = n;
        }
        "topology" => {
            let (name, a) = parse_call(value)?;
            config.topology.kind = match name {
                "ring" if a.is_empty() => TopologyKind::Ring,
                "complete" if a.is_empty() => TopologyKind::Complete,
                "erdos_renyi" => {
                    let [p] = args::<1>(name, &a)?;
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(format!("probability must be in (0, 1], got {p}"));
                    }
                    TopologyKind::ErdosRenyi { p }
                }
                "edge_list" if a.len() == 1 => {
                    let p = PathBuf::from(&a[0]);
                    TopologyKind::EdgeList(if p.is_relative() { base_dir.join(p) } else { p })
                }
                _ => return Err(format!("unknown topology `{value}`")),
            };
        }
        "symmetric" => config.topology.symmetric = boolean(value)?,
        "algorithm" => {
            config.algorithm = match value {
                "tic" => Algorithm::Tic,
                "tvc" => Algorithm::Tvc,
                "baseline" => Algorithm::Baseline,
                other => return Err(format!("unknown algorithm `{other}`")),
            }
        }
        "fading" => {
            let (name, a) = parse_call(value)?;
            let model = match name {
                "constant" => {
                    let [gain] = args::<1>(name, &a)?;
                    FadingModel::Constant { gain }
                }
                "half_normal" => {
                    let [scale] = args::<1>(name, &a)?;
                    FadingModel::HalfNormal { scale }
                }
                "uniform" => {
                    let [lo, hi] = args::<2>(name, &a)?;
                    FadingModel::Uniform { lo, hi }
                }
                _ => return Err(format!("unknown fading model `{value}`")),
            };
            model.validate().map_err(|e| e.to_string())?;
            config.fading = model;
        }
        "self_weight" => {
            let w = real(value)?;
            if w < 0.0 {
                return Err(format!("must be nonnegative, got {w}"));
            }
            config.self_weight = w;
        }
        "noise_std" => {
            let std = real(value)?;
            if std < 0.0 {
                return Err(format!("must be nonnegative, got {std}"));
            }
            config.noise = NoiseModel { std };
        }
        "epsilon" => {
            let eps = real(value)?;
            if eps <= 0.0 {
                return Err(format!("must be positive, got {eps}"));
            }
            config.epsilon = eps;
        }
        "B" => {
            let b = integer(value)?;
            if b < 1 {
                return Err("must be at least 1".into());
            }
            config.b = b;
        }
        "deep_fade" => config.deep_fade = boolean(value)?,
        "initial" => {
            let (name, a) = parse_call(value)?;
            config.initial = match name {
                "explicit" => InitialSpec::Explicit(
                    a.iter()
                        .map(|s| real(s))
                        .collect::<std::result::Result<_, _>>()?,
                ),
                "random_mean" => {
                    let [mean, half_width] = args::<2>(name, &a)?;
                    if half_width < 0.0 {
                        return Err(format!("half_width must be nonnegative, got {half_width}"));
                    }
                    InitialSpec::RandomMean { mean, half_width }
                }
                _ => return Err(format!("unknown initial spec `{value}`")),
            };
        }
        "max_iters" => {
            let m = integer(value)?;
            if m < 1 {
                return Err("must be at least 1".into());
            }
            config.max_iters = m;
        }
        "tol" => {
            let t = real(value)?;
            if t <= 0.0 {
                return Err(format!("must be positive, got {t}"));
            }
            config.tol = t;
        }
        "tol_window" => {
            let w = integer(value)?;
            if w < 1 {
                return Err("must be at least 1".into());
            }
            config.tol_window = w;
        }
        "seed" => {
            config.seed = value
                .trim()
                .parse()
                .map_err(|_| format!("`{value}` is not a u64"))?
        }
        "edge_scale" => {
            let mut scales = Vec::new();
            for item in value.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let parsed = item.split_once(':').and_then(|(pair, f)| {
                    let (a, b) = pair.split_once('-')?;
                    Some((integer(a).ok()?, integer(b).ok()?, real(f).ok()?))
                });
                match parsed {
                    Some((a, b, f)) if f > 0.0 => scales.push((a, b, f)),
                    _ => {
                        return Err(format!(
                            "expected `i-j:factor` with factor > 0, found `{item}`"
                        ))
                    }
                }
            }
            config.edge_scales = scales;
        }
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

/// Applies one `key = value` assignment, as a sweep does for each value.
pub fn apply_override(
    config: &mut SimulationConfig,
    key: &str,
    value: &str,
    base_dir: &Path,
) -> Result<()> {
    if !CONFIG_KEYS.contains(&key) {
        return Err(Error::usage(format!("unknown key `{key}`")));
    }
    apply_key(config, key, value, base_dir).map_err(|m| Error::usage(format!("{key}: {m}")))?;
    config.validate()
}

/// Canonical `(key, value)` pairs; parsing them back yields the same config.
pub fn config_entries(config: &SimulationConfig) -> Vec<(&'static str, String)> {
    let topology = match &config.topology.kind {
        TopologyKind::Ring => "ring".to_string(),
        TopologyKind::Complete => "complete".to_string(),
        TopologyKind::ErdosRenyi { p } => format!("erdos_renyi({p:?})"),
        TopologyKind::EdgeList(path) => format!("edge_list({})", path.display()),
    };
    let fading = match config.fading {
        FadingModel::Constant { gain } => format!("constant({gain:?})"),
        FadingModel::HalfNormal { scale } => format!("half_normal({scale:?})"),
        FadingModel::Uniform { lo, hi } => format!("uniform({lo:?}, {hi:?})"),
    };
    let initial = match &config.initial {
        InitialSpec::Explicit(v) => format!(
            "explicit({})",
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        InitialSpec::RandomMean { mean, half_width } => {
            format!("random_mean({mean:?}, {half_width:?})")
        }
    };
    let edge_scale = config
        .edge_scales
        .iter()
        .map(|(a, b, f)| format!("{a}-{b}:{f:?}"))
        .collect::<Vec<_>>()
        .join("; ");
    vec![
        ("n", config.n.to_string()),
        ("topology", topology),
        ("symmetric", config.topology.symmetric.to_string()),
        ("algorithm", config.algorithm.name().to_string()),
        ("fading", fading),
        ("self_weight", format!("{:?}", config.self_weight)),
        ("noise_std", format!("{:?}", config.noise.std)),
        ("epsilon", format!("{:?}", config.epsilon)),
        ("B", config.b.to_string()),
        ("deep_fade", config.deep_fade.to_string()),
        ("initial", initial),
        ("max_iters", config.max_iters.to_string()),
        ("tol", format!("{:?}", config.tol)),
        ("tol_window", config.tol_window.to_string()),
        ("seed", config.seed.to_string()),
        ("edge_scale", edge_scale),
    ]
}
