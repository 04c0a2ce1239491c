//! Connected components, giant component extraction and ego-network growth.
//!
//! Connectivity ignores edge direction throughout.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netbuild::{CallNetwork, UndirectedGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComponentError {
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("unknown source node {0}")]
    UnknownSource(String),
    #[error("requested {requested} sources but the giant component has {available} nodes")]
    TooManySources { requested: usize, available: usize },
    #[error("at least one source is required")]
    NoSources,
}

/// Disjoint-set forest with path compression and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        UnionFind { parent: (0..len as u32).collect(), size: vec![1; len] }
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Returns `false` if both were already in the same set.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }
}

/// Assignment of every node to a component.
///
/// Component ids are canonical: components are numbered in order of their
/// smallest node index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentPartition {
    pub assignment: Vec<u32>,
    pub sizes: Vec<usize>,
    /// Largest component, smallest id on ties; `None` for an empty network.
    pub giant: Option<u32>,
}

impl ComponentPartition {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn giant_size(&self) -> usize {
        self.giant.map_or(0, |g| self.sizes[g as usize])
    }

    /// Canonical partition from arbitrary per-node labels.
    pub fn from_labels<L: Copy + Eq + std::hash::Hash>(labels: &[L]) -> ComponentPartition {
        let mut ids = std::collections::HashMap::new();
        let mut sizes = Vec::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let id = *ids.entry(*l).or_insert_with(|| {
                    sizes.push(0);
                    sizes.len() as u32 - 1
                });
                sizes[id as usize] += 1;
                id
            })
            .collect();
        let giant =
            (0..sizes.len() as u32).reduce(|best, c| if sizes[c as usize] > sizes[best as usize] { c } else { best });
        ComponentPartition { assignment, sizes, giant }
    }
}

pub fn connected_components(net: &CallNetwork) -> ComponentPartition {
    let mut uf = UnionFind::new(net.node_count());
    for e in net.edges() {
        uf.union(e.src, e.dst);
    }
    let roots: Vec<u32> = (0..net.node_count() as u32).map(|i| uf.find(i)).collect();
    ComponentPartition::from_labels(&roots)
}

/// Induced subnetwork on the largest component.
pub fn giant_component(net: &CallNetwork, partition: &ComponentPartition) -> Result<CallNetwork, ComponentError> {
    let giant = partition.giant.ok_or(ComponentError::EmptyNetwork)?;
    let keep: Vec<bool> = partition.assignment.iter().map(|&c| c == giant).collect();
    Ok(net.induced(&keep))
}

/// Number of components per size.
pub fn component_size_distribution(partition: &ComponentPartition, exclude_giant: bool) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for (id, &size) in partition.sizes.iter().enumerate() {
        if exclude_giant && partition.giant == Some(id as u32) {
            continue;
        }
        *hist.entry(size).or_insert(0) += 1;
    }
    hist
}

/// Two-column `size<TAB>count` table.
pub fn write_size_histogram<W: Write>(mut out: W, hist: &BTreeMap<usize, usize>) -> io::Result<()> {
    writeln!(out, "size\tcount")?;
    for (size, count) in hist {
        writeln!(out, "{size}\t{count}")?;
    }
    Ok(())
}

/// `N_s(l)` for `l = 0..=max_distance`: nodes within distance `l` of `source`.
pub fn ego_counts(graph: &UndirectedGraph, source: usize, max_distance: usize) -> Vec<usize> {
    let (counts, _) = bfs_ball(graph, source, max_distance);
    counts
}

fn bfs_ball(graph: &UndirectedGraph, source: usize, max_distance: usize) -> (Vec<usize>, Vec<u32>) {
    let mut dist = vec![u32::MAX; graph.node_count()];
    let mut per_level = vec![0usize; max_distance + 1];
    let mut reached = vec![source as u32];
    let mut queue = VecDeque::from([source as u32]);
    dist[source] = 0;
    per_level[0] = 1;
    while let Some(u) = queue.pop_front() {
        let d = dist[u as usize] as usize;
        if d == max_distance {
            continue;
        }
        for &v in graph.neighbors(u as usize) {
            if dist[v as usize] == u32::MAX {
                dist[v as usize] = d as u32 + 1;
                per_level[d + 1] += 1;
                reached.push(v);
                queue.push_back(v);
            }
        }
    }
    let mut total = 0;
    let counts = per_level
        .into_iter()
        .map(|c| {
            total += c;
            total
        })
        .collect();
    (counts, reached)
}

/// Ego network of radius `max_distance` around one node.
#[derive(Clone, Debug)]
pub struct EgoBall {
    /// `N_s(l)` for `l = 0..=max_distance`.
    pub counts: Vec<usize>,
    pub network: CallNetwork,
}

pub fn ego_ball(net: &CallNetwork, source: &[u8], max_distance: usize) -> Result<EgoBall, ComponentError> {
    let src = net
        .node_index(source)
        .ok_or_else(|| ComponentError::UnknownSource(String::from_utf8_lossy(source).into_owned()))?;
    let graph = net.undirected();
    let (counts, reached) = bfs_ball(&graph, src as usize, max_distance);
    let mut keep = vec![false; net.node_count()];
    for v in reached {
        keep[v as usize] = true;
    }
    Ok(EgoBall { counts, network: net.induced(&keep) })
}

/// Snowball curves from randomly chosen sources in the giant component.
#[derive(Clone, Debug, PartialEq)]
pub struct Snowball {
    pub sources: Vec<String>,
    /// One `N_s(l)` curve per source.
    pub curves: Vec<Vec<usize>>,
    pub mean: Vec<f64>,
}

impl Snowball {
    /// Columns: `l`, one `N_s` column per source, `mean`.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "l")?;
        for s in &self.sources {
            write!(out, "\tN_s[{s}]")?;
        }
        writeln!(out, "\tmean")?;
        for l in 0..self.mean.len() {
            write!(out, "{l}")?;
            for c in &self.curves {
                write!(out, "\t{}", c[l])?;
            }
            writeln!(out, "\t{}", self.mean[l])?;
        }
        Ok(())
    }
}

/// Samples `n_sources` distinct giant-component nodes uniformly (deterministic
/// under `seed`) and grows an ego ball around each.
pub fn snowball_growth(
    net: &CallNetwork,
    n_sources: usize,
    max_distance: usize,
    seed: u64,
) -> Result<Snowball, ComponentError> {
    if n_sources == 0 {
        return Err(ComponentError::NoSources);
    }
    let partition = connected_components(net);
    let giant = partition.giant.ok_or(ComponentError::EmptyNetwork)?;
    let members: Vec<usize> = (0..net.node_count()).filter(|&i| partition.assignment[i] == giant).collect();
    if n_sources > members.len() {
        return Err(ComponentError::TooManySources { requested: n_sources, available: members.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = sample(&mut rng, members.len(), n_sources).into_iter().map(|k| members[k]).collect();
    let graph = net.undirected();
    let curves: Vec<Vec<usize>> = picks.iter().map(|&s| ego_counts(&graph, s, max_distance)).collect();
    let mean = (0..=max_distance).map(|l| curves.iter().map(|c| c[l] as f64).sum::<f64>() / n_sources as f64).collect();
    let sources = picks.iter().map(|&s| net.nodes()[s].to_string()).collect();
    Ok(Snowball { sources, curves, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PairStats;
    use crate::netbuild::build_dcn;

    fn net(edges: &[(&str, &str)]) -> CallNetwork {
        build_dcn(&PairStats::from_entries(edges.iter().map(|&(a, b)| (a.into(), b.into(), 1, 1))).unwrap())
    }

    #[test]
    fn two_triangles() {
        let n = net(&[("a", "b"), ("b", "c"), ("c", "a"), ("x", "y"), ("y", "z"), ("z", "x")]);
        let p = connected_components(&n);
        assert_eq!(p.sizes, vec![3, 3]);
        assert_eq!(p.giant, Some(0));
        assert_eq!(p.assignment, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn empty_network() {
        let n = net(&[]);
        let p = connected_components(&n);
        assert!(p.sizes.is_empty() && p.giant.is_none());
        assert_eq!(giant_component(&n, &p), Err(ComponentError::EmptyNetwork));
    }

    #[test]
    fn giant_of_five_three_two() {
        let n = net(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("f", "g"), ("g", "h"), ("i", "j")]);
        let p = connected_components(&n);
        let g = giant_component(&n, &p).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (5, 4));
        let hist = component_size_distribution(&p, true);
        assert_eq!(hist, BTreeMap::from([(2, 1), (3, 1)]));
        assert_eq!(component_size_distribution(&p, false).len(), 3);
    }

    #[test]
    fn size_histogram_excludes_only_giant() {
        let p = ComponentPartition::from_labels(&[0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3]);
        assert_eq!(component_size_distribution(&p, true), BTreeMap::from([(3, 2), (2, 1)]));
    }

    #[test]
    fn ego_on_path() {
        let n = net(&[("A", "B"), ("C", "B")]);
        let ball = ego_ball(&n, b"B", 1).unwrap();
        assert_eq!(ball.counts, vec![1, 3]);
        assert_eq!(ball.network.edge_count(), 2);
        let ball = ego_ball(&n, b"A", 5).unwrap();
        assert_eq!(ball.counts, vec![1, 2, 3, 3, 3, 3]);
        assert_eq!(ego_ball(&n, b"A", 0).unwrap().counts, vec![1]);
        assert!(matches!(ego_ball(&n, b"Q", 1), Err(ComponentError::UnknownSource(_))));
    }

    #[test]
    fn snowball_single_source_matches_ego() {
        let n = net(&[("a", "b"), ("b", "c"), ("c", "d"), ("x", "y")]);
        let s = snowball_growth(&n, 1, 4, 3).unwrap();
        let ego = ego_ball(&n, s.sources[0].as_bytes(), 4).unwrap();
        assert_eq!(s.curves[0], ego.counts);
        assert!(["a", "b", "c", "d"].contains(&s.sources[0].as_str()));
        assert_eq!(snowball_growth(&n, 1, 4, 3).unwrap(), s);
        assert_eq!(snowball_growth(&n, 5, 2, 0), Err(ComponentError::TooManySources { requested: 5, available: 4 }));
        assert_eq!(snowball_growth(&n, 0, 2, 0), Err(ComponentError::NoSources));
    }

    #[test]
    fn snowball_mean_between_curves() {
        let n = net(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("e", "f"), ("b", "g")]);
        let s = snowball_growth(&n, 4, 5, 11).unwrap();
        for l in 0..=5 {
            let lo = s.curves.iter().map(|c| c[l]).min().unwrap() as f64;
            let hi = s.curves.iter().map(|c| c[l]).max().unwrap() as f64;
            assert!(lo <= s.mean[l] && s.mean[l] <= hi);
        }
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(4);
        assert!(uf.union(0, 1));
        assert!(!uf.union(1, 0));
        assert!(uf.union(2, 3));
        assert_ne!(uf.find(0), uf.find(3));
        uf.union(1, 3);
        assert_eq!(uf.find(0), uf.find(2));
    }
}
