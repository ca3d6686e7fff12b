//! Directed communication graphs.
//!
//! An edge `(i, j)` means node `i` transmits to node `j`, i.e. `j` can hear
//! `i`. Self-edges are never stored: self-influence is a protocol-level
//! self-weight carried by [`ChannelRealization`](crate::channel::ChannelRealization).

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::channel::{effective_graph, ChannelRealization};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

/// Attempts made by the Erdős–Rényi generator before giving up on finding a
/// strongly connected sample.
pub const MAX_GENERATION_ATTEMPTS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
    in_adj: Vec<Vec<NodeId>>,
    out_adj: Vec<Vec<NodeId>>,
}

impl Digraph {
    /// Builds a digraph on `n ≥ 2` nodes. Duplicate edges collapse; self-edges
    /// and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::usage(format!(
                "graph needs at least 2 nodes, got {n}"
            )));
        }
        let mut set = BTreeSet::new();
        for (from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::usage(format!(
                    "edge ({from}, {to}) out of range for n = {n}"
                )));
            }
            if from == to {
                return Err(Error::usage(format!(
                    "self-edge ({from}, {to}) is not allowed"
                )));
            }
            set.insert((NodeId(from), NodeId(to)));
        }
        Ok(Self::from_set(n, set))
    }

    fn from_set(n: usize, edges: BTreeSet<(NodeId, NodeId)>) -> Self {
        let mut in_adj = vec![Vec::new(); n];
        let mut out_adj = vec![Vec::new(); n];
        // BTreeSet iteration keeps both adjacency lists sorted.
        for &(from, to) in &edges {
            out_adj[from.0].push(to);
            in_adj[to.0].push(from);
        }
        for list in &mut in_adj {
            list.sort_unstable();
        }
        Digraph {
            n,
            edges,
            in_adj,
            out_adj,
        }
    }

    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, std::iter::empty())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Nodes that transmit to `j`.
    pub fn in_neighbors(&self, j: NodeId) -> &[NodeId] {
        &self.in_adj[j.0]
    }

    /// Nodes that receive from `j`.
    pub fn out_neighbors(&self, j: NodeId) -> &[NodeId] {
        &self.out_adj[j.0]
    }

    pub fn in_degree(&self, j: NodeId) -> usize {
        self.in_adj[j.0].len()
    }

    pub fn out_degree(&self, j: NodeId) -> usize {
        self.out_adj[j.0].len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges
            .iter()
            .all(|&(a, b)| self.edges.contains(&(b, a)))
    }

    /// Unordered node pairs `{i, j}` (with `i < j`) joined by an edge in
    /// either direction.
    pub fn undirected_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .map(|&(a, b)| (a.0.min(b.0), a.0.max(b.0)))
            .collect()
    }

    /// True iff every node reaches every other node along directed edges.
    pub fn is_strongly_connected(&self) -> bool {
        if !self.reaches_all(&self.out_adj) {
            return false;
        }
        // For a symmetric graph forward reachability already is undirected
        // connectivity.
        self.is_symmetric() || self.reaches_all(&self.in_adj)
    }

    fn reaches_all(&self, adj: &[Vec<NodeId>]) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v.0] {
                    seen[v.0] = true;
                    count += 1;
                    queue.push_back(v.0);
                }
            }
        }
        count == self.n
    }

    /// Two-colourability of the underlying undirected graph.
    pub fn is_bipartite(&self) -> bool {
        let mut colour: Vec<Option<bool>> = vec![None; self.n];
        for start in 0..self.n {
            if colour[start].is_some() {
                continue;
            }
            colour[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let c = colour[u].unwrap();
                for &v in self.out_adj[u].iter().chain(&self.in_adj[u]) {
                    match colour[v.0] {
                        None => {
                            colour[v.0] = Some(!c);
                            queue.push_back(v.0);
                        }
                        Some(cv) if cv == c => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }

    /// The graph with every edge mirrored.
    pub fn symmetrized(&self) -> Digraph {
        let set = self
            .edges
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .collect();
        Self::from_set(self.n, set)
    }

    /// Plain-text edge list in the same format [`parse_edge_list`] reads.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# n = {}, edges = {}\n", self.n, self.edges.len());
        for (a, b) in self.edges() {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Ring,
    Complete,
    ErdosRenyi { p: f64 },
    EdgeList(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    /// Mirror every generated edge. Reciprocal channels need this.
    pub symmetric: bool,
}

impl TopologySpec {
    pub fn new(kind: TopologyKind) -> Self {
        TopologySpec {
            kind,
            symmetric: true,
        }
    }
}

/// Builds the graph described by `spec`. Pure in `(spec, n, seed)`.
///
/// Erdős–Rényi samples are redrawn until strongly connected, at most
/// [`MAX_GENERATION_ATTEMPTS`] times.
pub fn generate_topology(spec: &TopologySpec, n: usize, seed: u64) -> Result<Digraph> {
    if n < 2 {
        return Err(Error::usage(format!("n must be at least 2, got {n}")));
    }
    let g = match &spec.kind {
        TopologyKind::Ring => Digraph::new(n, (0..n).map(|i| (i, (i + 1) % n)))?,
        TopologyKind::Complete => Digraph::new(
            n,
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))),
        )?,
        TopologyKind::ErdosRenyi { p } => return erdos_renyi(*p, spec.symmetric, n, seed),
        TopologyKind::EdgeList(path) => read_edge_list(path, n)?,
    };
    Ok(if spec.symmetric { g.symmetrized() } else { g })
}

fn erdos_renyi(p: f64, symmetric: bool, n: usize, seed: u64) -> Result<Digraph> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::usage(format!(
            "erdos_renyi probability must be in (0, 1], got {p}"
        )));
    }
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = substream(seed, Domain::Topology, attempt, n as u64, 0);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || (symmetric && j < i) {
                    continue;
                }
                if rng.random_bool(p) {
                    edges.push((i, j));
                    if symmetric {
                        edges.push((j, i));
                    }
                }
            }
        }
        let g = Digraph::new(n, edges)?;
        if g.is_strongly_connected() {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "no strongly connected erdos_renyi(p = {p}) sample on {n} nodes after {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}

/// Parses `i j` lines (0-based, `#` starts a comment) into a digraph on `n` nodes.
pub fn parse_edge_list(text: &str, n: usize, source_name: &str) -> Result<Digraph> {
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(
                line_no,
                format!("expected `i j`, found {} fields", fields.len()),
            ));
        }
        let mut ends = [0usize; 2];
        for (slot, field) in ends.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| parse_err(line_no, format!("`{field}` is not a node index")))?;
            if *slot >= n {
                return Err(parse_err(
                    line_no,
                    format!("node {slot} out of range for n = {n}"),
                ));
            }
        }
        if ends[0] == ends[1] {
            return Err(parse_err(
                line_no,
                format!("self-edge {} {}", ends[0], ends[1]),
            ));
        }
        edges.push((ends[0], ends[1]));
    }
    Digraph::new(n, edges)
}

pub fn read_edge_list(path: &Path, n: usize) -> Result<Digraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, n, &path.display().to_string())
}

/// Edge-set union of graphs on the same node count.
pub fn joint_graph(gs: &[Digraph]) -> Result<Digraph> {
    let first = gs
        .first()
        .ok_or_else(|| Error::usage("joint_graph needs at least one graph"))?;
    let mut set = BTreeSet::new();
    for g in gs {
        if g.n != first.n {
            return Err(Error::usage(format!(
                "joint_graph: node counts differ ({} vs {})",
                first.n, g.n
            )));
        }
        set.extend(g.edges.iter().copied());
    }
    Ok(Digraph::from_set(first.n, set))
}

/// Checks (ε, B)-connectivity of a realized channel sequence: for every full
/// window of `b` consecutive steps, the union of the ε-thresholded graphs
/// must be strongly connected. A trailing partial window is ignored.
pub fn check_epsilon_b_connectivity(
    realizations: &[ChannelRealization],
    epsilon: f64,
    b: usize,
) -> Result<bool> {
    if !(epsilon > 0.0) {
        return Err(Error::usage(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if b == 0 {
        return Err(Error::usage("window length B must be at least 1"));
    }
    for window in realizations.chunks_exact(b) {
        let graphs = window
            .iter()
            .map(|h| effective_graph(h, epsilon))
            .collect::<Result<Vec<_>>>()?;
        if !joint_graph(&graphs)?.is_strongly_connected() {
            return Ok(false);
        }
    }
    Ok(true)
}
