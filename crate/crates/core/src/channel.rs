//! Reciprocal fading channels.
//!
//! A [`ChannelProcess`] yields one [`ChannelRealization`] per coherence block
//! (one consensus step). Gains are real and strictly positive on links,
//! identical in both directions, and drawn from keyed substreams so that a
//! realization depends only on `(seed, step, link)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::protocol::Slot;
use crate::rng::{substream, Domain};
use crate::topology::Digraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingModel {
    Constant {
        gain: f64,
    },
    /// `|z|` with `z ~ N(0, scale²)`.
    HalfNormal {
        scale: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl FadingModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FadingModel::Constant { gain } => gain > 0.0 && gain.is_finite(),
            FadingModel::HalfNormal { scale } => scale > 0.0 && scale.is_finite(),
            FadingModel::Uniform { lo, hi } => lo > 0.0 && lo <= hi && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::usage(format!("invalid fading model {self:?}")))
        }
    }

    /// Draws one strictly positive gain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            FadingModel::Constant { gain } => gain,
            FadingModel::HalfNormal { scale } => {
                let normal = Normal::new(0.0, scale).expect("validated scale");
                loop {
                    let g = normal.sample(rng).abs();
                    if g > 0.0 {
                        return g;
                    }
                }
            }
            FadingModel::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                }
            }
        }
    }
}

/// Additive white Gaussian receiver noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    pub std: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { std: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if self.std >= 0.0 && self.std.is_finite() {
            Ok(())
        } else {
            Err(Error::usage(format!(
                "noise std must be a nonnegative number, got {}",
                self.std
            )))
        }
    }
}

/// One zero-mean Gaussian draw; exactly zero when `std == 0`.
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> f64 {
    if model.std == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, model.std)
        .expect("validated std")
        .sample(rng)
}

/// Per-receiver, per-slot noise, reproducible from `(seed, step, receiver, slot)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProcess {
    pub model: NoiseModel,
    pub seed: u64,
}

impl NoiseProcess {
    pub fn draw(&self, step: usize, receiver: usize, slot: Slot) -> f64 {
        if self.model.std == 0.0 {
            return 0.0;
        }
        let mut rng = substream(
            self.seed,
            Domain::Noise,
            step as u64,
            receiver as u64,
            slot as u64,
        );
        sample_noise(&self.model, &mut rng)
    }
}

/// Gain matrix `H` for one coherence block.
///
/// Row `i` holds what receiver `i` hears: `gain(i, j)` multiplies the signal
/// of transmitter `j`. The diagonal carries the locally added self-weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    n: usize,
    gains: Vec<f64>,
    self_weight: f64,
}

impl ChannelRealization {
    /// Builds a realization from a full square matrix. Diagonal entries of
    /// `rows` are ignored and replaced by `self_weight`. Off-diagonal entries
    /// must be finite, nonnegative and exactly reciprocal.
    pub fn from_rows(rows: &[Vec<f64>], self_weight: f64) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::usage("channel realization needs at least 2 nodes"));
        }
        if !(self_weight >= 0.0 && self_weight.is_finite()) {
            return Err(Error::usage(format!(
                "self_weight must be nonnegative, got {self_weight}"
            )));
        }
        let mut gains = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::usage(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &g) in row.iter().enumerate() {
                if i == j {
                    gains.push(self_weight);
                    continue;
                }
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(Error::usage(format!(
                        "gain ({i}, {j}) = {g} is not a nonnegative number"
                    )));
                }
                if g.to_bits() != rows[j][i].to_bits() {
                    return Err(Error::usage(format!(
                        "gains ({i}, {j}) = {g} and ({j}, {i}) = {} violate reciprocity",
                        rows[j][i]
                    )));
                }
                gains.push(g);
            }
        }
        Ok(ChannelRealization {
            n,
            gains,
            self_weight,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn self_weight(&self) -> f64 {
        self.self_weight
    }

    #[inline]
    pub fn gain(&self, receiver: usize, transmitter: usize) -> f64 {
        self.gains[receiver * self.n + transmitter]
    }

    /// Everything receiver `i` hears, diagonal included.
    #[inline]
    pub fn row(&self, receiver: usize) -> &[f64] {
        &self.gains[receiver * self.n..(receiver + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.gains.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn is_reciprocal(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.gain(i, j).to_bits() == self.gain(j, i).to_bits()))
    }

    /// Negative control: scales only the `(receiver, transmitter)` entry,
    /// breaking reciprocity on that link.
    pub fn with_perturbed_link(mut self, receiver: usize, transmitter: usize, factor: f64) -> Self {
        self.gains[receiver * self.n + transmitter] *= factor;
        self
    }
}

/// Edges `(j, i)` with `h[i][j] > epsilon`, `i ≠ j`.
pub fn effective_graph(h: &ChannelRealization, epsilon: f64) -> Result<Digraph> {
    if !(epsilon > 0.0) {
        return Err(Error::usage(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = h.n();
    let edges = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && h.gain(i, j) > epsilon)
        .map(|(i, j)| (j, i));
    Digraph::new(n, edges)
}

/// Source of channel realizations for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProcess {
    model: FadingModel,
    n: usize,
    links: Vec<(usize, usize)>,
    self_weight: f64,
    time_varying: bool,
    seed: u64,
    deep_fade_epsilon: Option<f64>,
    edge_scale: BTreeMap<(usize, usize), f64>,
}

impl ChannelProcess {
    /// Links are the unordered node pairs joined by an edge in either
    /// direction: a reciprocal channel carries both directions or neither.
    pub fn new(
        model: FadingModel,
        topology: &Digraph,
        self_weight: f64,
        time_varying: bool,
        seed: u64,
    ) -> Result<Self> {
        model.validate()?;
        if !(self_weight >= 0.0 && self_weight.is_finite()) {
            return Err(Error::usage(format!(
                "self_weight must be nonnegative, got {self_weight}"
            )));
        }
        Ok(ChannelProcess {
            model,
            n: topology.n(),
            links: topology.undirected_pairs().into_iter().collect(),
            self_weight,
            time_varying,
            seed,
            deep_fade_epsilon: None,
            edge_scale: BTreeMap::new(),
        })
    }

    /// Off-link pairs get a weak gain uniform in `(0, epsilon / 2]` each step.
    /// Only meaningful for time-varying channels.
    pub fn with_deep_fade(mut self, epsilon: f64) -> Result<Self> {
        if !self.time_varying {
            return Err(Error::usage(
                "deep-fade mode requires time-varying channels",
            ));
        }
        if !(epsilon > 0.0) {
            return Err(Error::usage(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        self.deep_fade_epsilon = Some(epsilon);
        Ok(self)
    }

    /// Multiplies every gain sampled on link `{a, b}` by `factor`. For the
    /// half-normal model this is the same as using `factor · scale` there.
    pub fn with_edge_scale(mut self, a: usize, b: usize, factor: f64) -> Result<Self> {
        let key = (a.min(b), a.max(b));
        if self.links.binary_search(&key).is_err() {
            return Err(Error::usage(format!(
                "edge scale given for non-link {a}-{b}"
            )));
        }
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::usage(format!(
                "edge scale must be positive, got {factor}"
            )));
        }
        self.edge_scale.insert(key, factor);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_time_varying(&self) -> bool {
        self.time_varying
    }

    /// Realization for step `k`. Time-invariant processes ignore `k`.
    pub fn realization(&self, k: usize) -> ChannelRealization {
        let block = if self.time_varying { k as u64 } else { 0 };
        let n = self.n;
        let mut gains = vec![0.0; n * n];
        for i in 0..n {
            gains[i * n + i] = self.self_weight;
        }
        let mut links = self.links.iter().peekable();
        for i in 0..n {
            for j in (i + 1)..n {
                let g = if links.peek() == Some(&&(i, j)) {
                    links.next();
                    let mut rng = substream(self.seed, Domain::Gain, block, i as u64, j as u64);
                    let scale = self.edge_scale.get(&(i, j)).copied().unwrap_or(1.0);
                    self.model.sample(&mut rng) * scale
                } else if let Some(eps) = self.deep_fade_epsilon {
                    let mut rng = substream(self.seed, Domain::DeepFade, block, i as u64, j as u64);
                    let u: f64 = rng.random();
                    0.5 * eps * (1.0 - u)
                } else {
                    0.0
                };
                gains[i * n + j] = g;
                gains[j * n + i] = g;
            }
        }
        ChannelRealization {
            n,
            gains,
            self_weight: self.self_weight,
        }
    }
}
