//! Directed (DCN) and mutual (MCN) calling networks.
//!
//! A DCN has one directed edge `i -> j` for every ordered pair that exchanged
//! at least one valid call. An MCN keeps an undirected edge `{i, j}` only when
//! calls went in both directions; its edges retain the per-direction counts
//! because validation tests each direction on its own.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::ingest::{PairStats, Traffic, UserId};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("cannot serialize network: {0}")]
    Unserializable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NetworkKind {
    Directed,
    Mutual,
}

impl NetworkKind {
    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Directed => "directed",
            NetworkKind::Mutual => "mutual",
        }
    }
}

/// One network edge.
///
/// Directed: `src -> dst` carries `forward = (a_ij, d_ij)` and a zero
/// `backward`. Mutual: `src < dst`, `forward` is the `src -> dst` traffic and
/// `backward` the `dst -> src` traffic, both with at least one call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub forward: Traffic,
    pub backward: Traffic,
}

impl Edge {
    /// Number-based weight `w^N`.
    pub fn calls(&self) -> u64 {
        self.forward.calls + self.backward.calls
    }

    /// Duration-based weight `w^D` in seconds.
    pub fn duration(&self) -> u64 {
        self.forward.duration + self.backward.duration
    }
}

/// Node set plus sorted edge list. Node indices follow bytewise identifier
/// order, so index order and identifier order coincide.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallNetwork {
    kind: NetworkKind,
    nodes: Vec<UserId>,
    edges: Vec<Edge>,
}

pub fn build_dcn(stats: &PairStats) -> CallNetwork {
    let edges = stats
        .pairs()
        .iter()
        .map(|p| Edge { src: p.src, dst: p.dst, forward: p.traffic, backward: Traffic::default() })
        .collect();
    CallNetwork { kind: NetworkKind::Directed, nodes: stats.nodes().to_vec(), edges }.without_isolates()
}

pub fn build_mcn(stats: &PairStats) -> CallNetwork {
    let pairs = stats.pairs();
    let find = |s: u32, d: u32| pairs.binary_search_by(|p| (p.src, p.dst).cmp(&(s, d))).ok();
    let edges = pairs
        .iter()
        .filter(|p| p.src < p.dst)
        .filter_map(|p| {
            find(p.dst, p.src).map(|back| Edge {
                src: p.src,
                dst: p.dst,
                forward: p.traffic,
                backward: pairs[back].traffic,
            })
        })
        .collect();
    CallNetwork { kind: NetworkKind::Mutual, nodes: stats.nodes().to_vec(), edges }.without_isolates()
}

/// Fraction of directed DCN edges whose reverse edge is absent.
pub fn non_reciprocal_fraction(dcn: &CallNetwork) -> f64 {
    assert_eq!(dcn.kind, NetworkKind::Directed);
    if dcn.edges.is_empty() {
        return 0.0;
    }
    let lonely = dcn.edges.iter().filter(|e| dcn.find_edge(e.dst, e.src).is_none()).count();
    lonely as f64 / dcn.edges.len() as f64
}

impl CallNetwork {
    /// Assembles a network from parts, checking every structural invariant.
    pub fn from_parts(kind: NetworkKind, nodes: Vec<UserId>, mut edges: Vec<Edge>) -> Result<Self, String> {
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err("node identifiers must be strictly increasing".into());
        }
        edges.sort_unstable_by_key(|e| (e.src, e.dst));
        if edges.windows(2).any(|w| (w[0].src, w[0].dst) == (w[1].src, w[1].dst)) {
            return Err("duplicate edge".into());
        }
        let n = nodes.len() as u32;
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err("edge endpoint out of range".into());
            }
            if e.src == e.dst {
                return Err("self-loop".into());
            }
            if e.forward.calls == 0 {
                return Err("edge without calls".into());
            }
            match kind {
                NetworkKind::Directed if e.backward != Traffic::default() => {
                    return Err("directed edge with reverse traffic".into())
                }
                NetworkKind::Mutual if e.src > e.dst || e.backward.calls == 0 => {
                    return Err("mutual edge must be ordered and reciprocal".into())
                }
                _ => {}
            }
        }
        Ok(CallNetwork { kind, nodes, edges })
    }

    pub fn empty(kind: NetworkKind) -> Self {
        CallNetwork { kind, nodes: Vec::new(), edges: Vec::new() }
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn nodes(&self) -> &[UserId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, id: &[u8]) -> Option<u32> {
        self.nodes.binary_search_by(|n| n.as_bytes().cmp(id)).ok().map(|i| i as u32)
    }

    /// Index of the edge stored as `(src, dst)`.
    pub fn find_edge(&self, src: u32, dst: u32) -> Option<usize> {
        self.edges.binary_search_by(|e| (e.src, e.dst).cmp(&(src, dst))).ok()
    }

    /// Edge by identifiers; for mutual networks the order is irrelevant.
    pub fn edge_between(&self, a: &str, b: &str) -> Option<&Edge> {
        let (mut s, mut d) = (self.node_index(a.as_bytes())?, self.node_index(b.as_bytes())?);
        if self.kind == NetworkKind::Mutual && s > d {
            std::mem::swap(&mut s, &mut d);
        }
        self.find_edge(s, d).map(|i| &self.edges[i])
    }

    /// Total number of calls carried by the network (both directions).
    pub fn total_calls(&self) -> u64 {
        self.edges.iter().map(Edge::calls).sum()
    }

    /// Calls initiated (`out`) and received (`in`) per node over the
    /// network's edges.
    pub fn call_marginals(&self) -> (Vec<u64>, Vec<u64>) {
        let mut out = vec![0u64; self.nodes.len()];
        let mut inc = vec![0u64; self.nodes.len()];
        for e in &self.edges {
            out[e.src as usize] += e.forward.calls;
            inc[e.dst as usize] += e.forward.calls;
            out[e.dst as usize] += e.backward.calls;
            inc[e.src as usize] += e.backward.calls;
        }
        (out, inc)
    }

    /// Number of unordered node pairs joined by at least one edge.
    pub fn unordered_pair_count(&self) -> usize {
        match self.kind {
            NetworkKind::Mutual => self.edges.len(),
            NetworkKind::Directed => {
                let reciprocal =
                    self.edges.iter().filter(|e| e.src < e.dst && self.find_edge(e.dst, e.src).is_some()).count();
                self.edges.len() - reciprocal
            }
        }
    }

    /// Keeps the edges accepted by `keep` and drops nodes left isolated.
    pub fn retain_edges<F: FnMut(usize, &Edge) -> bool>(&self, mut keep: F) -> CallNetwork {
        let edges = self.edges.iter().enumerate().filter(|(i, e)| keep(*i, e)).map(|(_, e)| *e).collect();
        CallNetwork { kind: self.kind, nodes: self.nodes.clone(), edges }.without_isolates()
    }

    /// Induced subnetwork on the nodes flagged in `keep`.
    pub fn induced(&self, keep: &[bool]) -> CallNetwork {
        assert_eq!(keep.len(), self.nodes.len());
        let edges = self.edges.iter().filter(|e| keep[e.src as usize] && keep[e.dst as usize]).copied().collect();
        CallNetwork { kind: self.kind, nodes: self.nodes.clone(), edges }.restrict_nodes(keep)
    }

    fn without_isolates(self) -> CallNetwork {
        let mut touched = vec![false; self.nodes.len()];
        for e in &self.edges {
            touched[e.src as usize] = true;
            touched[e.dst as usize] = true;
        }
        self.restrict_nodes(&touched)
    }

    /// Drops unflagged nodes; edges must only touch flagged ones.
    fn restrict_nodes(self, keep: &[bool]) -> CallNetwork {
        if keep.iter().all(|&k| k) {
            return self;
        }
        let mut remap = vec![u32::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, node) in self.nodes.into_iter().enumerate() {
            if keep[i] {
                remap[i] = nodes.len() as u32;
                nodes.push(node);
            }
        }
        let edges = self
            .edges
            .into_iter()
            .map(|e| Edge { src: remap[e.src as usize], dst: remap[e.dst as usize], ..e })
            .collect();
        CallNetwork { kind: self.kind, nodes, edges }
    }

    /// Undirected simple-graph view. Reciprocal directed edges merge into one
    /// undirected edge whose weights are the sums of both directions.
    pub fn undirected(&self) -> UndirectedGraph {
        let n = self.nodes.len();
        let mut pairs: Vec<(u32, u32, u64, u64)> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = if e.src < e.dst { (e.src, e.dst) } else { (e.dst, e.src) };
                (a, b, e.calls(), e.duration())
            })
            .collect();
        pairs.sort_unstable_by_key(|p| (p.0, p.1));
        let mut merged: Vec<(u32, u32, u64, u64)> = Vec::with_capacity(pairs.len());
        for p in pairs {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (p.0, p.1) => {
                    last.2 += p.2;
                    last.3 += p.3;
                }
                _ => merged.push(p),
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for &(a, b, _, _) in &merged {
            offsets[a as usize + 1] += 1;
            offsets[b as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let total = offsets[n];
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0u32; total];
        let mut calls = vec![0u64; total];
        let mut duration = vec![0u64; total];
        // Pairs are sorted by (a, b): node u first receives its smaller
        // neighbors (as b, in increasing a) and then its larger ones, so every
        // list fills in ascending order.
        for &(a, b, c, d) in &merged {
            for (u, v) in [(a, b), (b, a)] {
                let slot = cursor[u as usize];
                neighbors[slot] = v;
                calls[slot] = c;
                duration[slot] = d;
                cursor[u as usize] += 1;
            }
        }
        debug_assert!((0..n).all(|i| neighbors[offsets[i]..offsets[i + 1]].windows(2).all(|w| w[0] < w[1])));
        UndirectedGraph { offsets, neighbors, calls, duration, edge_count: merged.len() }
    }

    /// Writes the text serialization: a `kind<TAB>nodes<TAB>edges` header,
    /// then one edge per line, `src dst a_ij d_ij` (directed) or
    /// `i j a_ij a_ji d_ij d_ji` (mutual), tab-separated.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), NetError> {
        let mut degree = vec![0u32; self.nodes.len()];
        for e in &self.edges {
            degree[e.src as usize] += 1;
            degree[e.dst as usize] += 1;
        }
        if let Some(i) = degree.iter().position(|&d| d == 0) {
            return Err(NetError::Unserializable(format!("isolated node {}", self.nodes[i])));
        }
        if let Some(bad) = self.nodes.iter().find(|n| n.as_bytes().iter().any(|b| matches!(b, b'\t' | b'\n' | b'\r'))) {
            return Err(NetError::Unserializable(format!("identifier {bad:?} contains a tab or line break")));
        }
        writeln!(out, "{}\t{}\t{}", self.kind.name(), self.nodes.len(), self.edges.len())?;
        for e in &self.edges {
            out.write_all(self.nodes[e.src as usize].as_bytes())?;
            out.write_all(b"\t")?;
            out.write_all(self.nodes[e.dst as usize].as_bytes())?;
            match self.kind {
                NetworkKind::Directed => writeln!(out, "\t{}\t{}", e.forward.calls, e.forward.duration)?,
                NetworkKind::Mutual => writeln!(
                    out,
                    "\t{}\t{}\t{}\t{}",
                    e.forward.calls, e.backward.calls, e.forward.duration, e.backward.duration
                )?,
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<CallNetwork, NetError> {
        let fmt_err = |line: usize, msg: &str| NetError::Format { line, msg: msg.to_owned() };
        let mut header = Vec::new();
        if input.read_until(b'\n', &mut header)? == 0 {
            return Err(fmt_err(1, "missing header"));
        }
        let header = String::from_utf8_lossy(&header);
        let fields: Vec<&str> = header.trim_end_matches(['\n', '\r']).split('\t').collect();
        let [kind, n_nodes, n_edges] = fields[..] else {
            return Err(fmt_err(1, "header must be kind, node count, edge count"));
        };
        let kind = match kind {
            "directed" => NetworkKind::Directed,
            "mutual" => NetworkKind::Mutual,
            _ => return Err(fmt_err(1, "unknown network kind")),
        };
        let n_nodes: usize = n_nodes.parse().map_err(|_| fmt_err(1, "bad node count"))?;
        let n_edges: usize = n_edges.parse().map_err(|_| fmt_err(1, "bad edge count"))?;
        let width = if kind == NetworkKind::Directed { 4 } else { 6 };

        // Ids are interned in order of first appearance, then renumbered to
        // sorted order once all lines are read.
        let mut interned: HashMap<UserId, u32> = HashMap::with_capacity(n_nodes);
        let mut intern = |b: &[u8]| -> u32 {
            let next = interned.len() as u32;
            match interned.get(b) {
                Some(&i) => i,
                None => {
                    interned.insert(UserId::new(b).expect("non-empty"), next);
                    next
                }
            }
        };
        let mut edges: Vec<Edge> = Vec::with_capacity(n_edges);
        let mut line = Vec::new();
        let mut line_no = 1;
        loop {
            line.clear();
            if input.read_until(b'\n', &mut line)? == 0 {
                break;
            }
            line_no += 1;
            while matches!(line.last(), Some(b'\n' | b'\r')) {
                line.pop();
            }
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(|&b| b == b'\t');
            let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
                return Err(fmt_err(line_no, "wrong number of fields"));
            };
            let mut nums = [0u64; 4];
            let mut count = 2;
            for field in parts {
                if count < width {
                    nums[count - 2] = std::str::from_utf8(field)
                        .ok()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| fmt_err(line_no, "bad number"))?;
                }
                count += 1;
            }
            if count != width || a.is_empty() || b.is_empty() {
                return Err(fmt_err(line_no, "wrong number of fields"));
            }
            let (forward, backward) = match kind {
                NetworkKind::Directed => (Traffic { calls: nums[0], duration: nums[1] }, Traffic::default()),
                NetworkKind::Mutual => {
                    (Traffic { calls: nums[0], duration: nums[2] }, Traffic { calls: nums[1], duration: nums[3] })
                }
            };
            edges.push(Edge { src: intern(a), dst: intern(b), forward, backward });
        }
        if edges.len() != n_edges {
            return Err(fmt_err(1, "edge count does not match header"));
        }
        if interned.len() != n_nodes {
            return Err(fmt_err(1, "node count does not match header"));
        }
        let mut by_first_seen: Vec<(UserId, u32)> = interned.into_iter().collect();
        by_first_seen.sort_unstable_by(|x, y| x.0.cmp(&y.0));
        let mut rank = vec![0u32; by_first_seen.len()];
        for (sorted, (_, first_seen)) in by_first_seen.iter().enumerate() {
            rank[*first_seen as usize] = sorted as u32;
        }
        let nodes: Vec<UserId> = by_first_seen.into_iter().map(|(id, _)| id).collect();
        for e in &mut edges {
            e.src = rank[e.src as usize];
            e.dst = rank[e.dst as usize];
        }
        CallNetwork::from_parts(kind, nodes, edges).map_err(|msg| fmt_err(0, &msg))
    }
}

/// Compressed adjacency of the undirected simple-graph view of a network.
/// Neighbor lists are sorted ascending.
#[derive(Clone, Debug)]
pub struct UndirectedGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    calls: Vec<u64>,
    duration: Vec<u64>,
    edge_count: usize,
}

/// Which edge weight to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightKind {
    /// Number of calls, `w^N`.
    Number,
    /// Total call duration in seconds, `w^D`.
    Duration,
}

impl WeightKind {
    pub fn suffix(self) -> &'static str {
        match self {
            WeightKind::Number => "N",
            WeightKind::Duration => "D",
        }
    }
}

impl UndirectedGraph {
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn weights(&self, i: usize, kind: WeightKind) -> &[u64] {
        let w = match kind {
            WeightKind::Number => &self.calls,
            WeightKind::Duration => &self.duration,
        };
        &w[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Weight of edge `{i, j}`, if present.
    pub fn weight(&self, i: usize, j: usize, kind: WeightKind) -> Option<u64> {
        let pos = self.neighbors(i).binary_search(&(j as u32)).ok()?;
        Some(self.weights(i, kind)[pos])
    }

    /// Undirected edges `(i, j, w^N, w^D)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64, u64)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            let lo = self.offsets[i];
            self.neighbors(i)
                .iter()
                .enumerate()
                .filter(move |(_, &j)| (j as usize) > i)
                .map(move |(k, &j)| (i, j as usize, self.calls[lo + k], self.duration[lo + k]))
        })
    }
}
