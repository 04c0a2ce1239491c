//! Node and edge statistics: degrees, strengths, nearest-neighbor averages,
//! clustering, topological overlap, conditional averages and correlations.
//!
//! Everything except in/out degrees and strengths is computed on the
//! undirected view of a network ([`CallNetwork::undirected`]), where
//! reciprocal directed edges merge and their weights add.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::netbuild::{CallNetwork, NetworkKind, UndirectedGraph, WeightKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("need at least two paired values, got {0}")]
    TooFewValues(usize),
    #[error("x and y differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("no values to bin")]
    NoValues,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Degrees {
    /// Degree in the undirected view.
    pub total: Vec<u32>,
    /// Directed networks only.
    pub in_degree: Option<Vec<u32>>,
    pub out_degree: Option<Vec<u32>>,
}

pub fn degree_sequences(net: &CallNetwork) -> Degrees {
    let g = net.undirected();
    let total = (0..g.node_count()).map(|i| g.degree(i) as u32).collect();
    if net.kind() == NetworkKind::Mutual {
        return Degrees { total, in_degree: None, out_degree: None };
    }
    let mut in_degree = vec![0u32; net.node_count()];
    let mut out_degree = vec![0u32; net.node_count()];
    for e in net.edges() {
        out_degree[e.src as usize] += 1;
        in_degree[e.dst as usize] += 1;
    }
    Degrees { total, in_degree: Some(in_degree), out_degree: Some(out_degree) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Calls received.
    In,
    /// Calls placed.
    Out,
    All,
}

/// `s_i = sum_j w_ij` over calls in the selected direction.
pub fn node_strengths(net: &CallNetwork, kind: WeightKind, direction: Direction) -> Vec<u64> {
    let mut s = vec![0u64; net.node_count()];
    let pick = |t: &crate::ingest::Traffic| match kind {
        WeightKind::Number => t.calls,
        WeightKind::Duration => t.duration,
    };
    for e in net.edges() {
        let (fwd, bwd) = (pick(&e.forward), pick(&e.backward));
        let (src, dst) = (e.src as usize, e.dst as usize);
        match direction {
            Direction::Out => {
                s[src] += fwd;
                s[dst] += bwd;
            }
            Direction::In => {
                s[dst] += fwd;
                s[src] += bwd;
            }
            Direction::All => {
                s[src] += fwd + bwd;
                s[dst] += fwd + bwd;
            }
        }
    }
    s
}

/// Strengths in the undirected view, `s_i = sum_j w_ij`.
pub fn strengths(g: &UndirectedGraph, kind: WeightKind) -> Vec<u64> {
    (0..g.node_count()).map(|i| g.weights(i, kind).iter().sum()).collect()
}

/// `k_nn,i = (1/k_i) sum_j k_j`; NaN for isolated nodes.
pub fn knn_per_node(g: &UndirectedGraph) -> Vec<f64> {
    (0..g.node_count())
        .map(|i| {
            let nb = g.neighbors(i);
            let sum: usize = nb.iter().map(|&j| g.degree(j as usize)).sum();
            sum as f64 / nb.len() as f64
        })
        .collect()
}

/// `k^w_nn,i = sum_j k_j w_ij / s_i`.
pub fn weighted_knn_per_node(g: &UndirectedGraph, kind: WeightKind) -> Vec<f64> {
    (0..g.node_count())
        .map(|i| {
            let (nb, w) = (g.neighbors(i), g.weights(i, kind));
            let s: u64 = w.iter().sum();
            let num: f64 = nb.iter().zip(w).map(|(&j, &wij)| g.degree(j as usize) as f64 * wij as f64).sum();
            num / s as f64
        })
        .collect()
}

/// `s_nn,i = (1/k_i) sum_j s_j`.
pub fn strength_nn_per_node(g: &UndirectedGraph, kind: WeightKind) -> Vec<f64> {
    let s = strengths(g, kind);
    (0..g.node_count())
        .map(|i| {
            let nb = g.neighbors(i);
            nb.iter().map(|&j| s[j as usize] as f64).sum::<f64>() / nb.len() as f64
        })
        .collect()
}

fn degrees_f64(g: &UndirectedGraph) -> Vec<f64> {
    (0..g.node_count()).map(|i| g.degree(i) as f64).collect()
}

/// Per-node `k_nn` with its exact per-degree average `<k_nn | k>`.
#[derive(Clone, Debug)]
pub struct NodeCurve {
    pub per_node: Vec<f64>,
    pub curve: BinnedCurve,
}

pub fn avg_nearest_neighbor_degree(net: &CallNetwork) -> NodeCurve {
    let g = net.undirected();
    let per_node = knn_per_node(&g);
    let curve = conditional_average(&degrees_f64(&g), &per_node, Binning::PerInteger);
    NodeCurve { per_node, curve }
}

pub fn weighted_ann_degree(net: &CallNetwork, kind: WeightKind) -> NodeCurve {
    let g = net.undirected();
    let per_node = weighted_knn_per_node(&g, kind);
    let curve = conditional_average(&degrees_f64(&g), &per_node, Binning::PerInteger);
    NodeCurve { per_node, curve }
}

/// Per-node `s_nn` with `<s_nn | s>` over logarithmic strength bins.
pub fn strength_nn(net: &CallNetwork, kind: WeightKind) -> NodeCurve {
    let g = net.undirected();
    let per_node = strength_nn_per_node(&g, kind);
    let s: Vec<f64> = strengths(&g, kind).into_iter().map(|v| v as f64).collect();
    let curve = conditional_average(&s, &per_node, Binning::log());
    NodeCurve { per_node, curve }
}

/// Walks the common neighbors `k > j` of `i` and `j`, calling `f(pos_in_i,
/// pos_in_j)` with positions in the respective adjacency lists.
fn for_common_above<F: FnMut(usize, usize)>(g: &UndirectedGraph, i: usize, j: usize, mut f: F) {
    let (a, b) = (g.neighbors(i), g.neighbors(j));
    let (mut p, mut q) = (a.partition_point(|&v| v as usize <= j), b.partition_point(|&v| v as usize <= j));
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                f(p, q);
                p += 1;
                q += 1;
            }
        }
    }
}

/// Number of triangles through each node.
pub fn triangles(g: &UndirectedGraph) -> Vec<u64> {
    (0..g.node_count())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let mut t = 0u64;
            for &j in g.neighbors(i) {
                for_common_above(g, i, j as usize, |_, _| t += 1);
            }
            t
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Clustering {
    pub per_node: Vec<f64>,
    pub average: f64,
    /// Share of nodes with `C = 0`.
    pub zero_fraction: f64,
}

/// `C_i = 2 t_i / [k_i (k_i - 1)]`, with `C_i = 0` when `k_i < 2`.
pub fn clustering_coefficient(net: &CallNetwork) -> Clustering {
    let g = net.undirected();
    let t = triangles(&g);
    let per_node: Vec<f64> = (0..g.node_count())
        .map(|i| {
            let k = g.degree(i) as f64;
            if k < 2.0 {
                0.0
            } else {
                2.0 * t[i] as f64 / (k * (k - 1.0))
            }
        })
        .collect();
    let n = per_node.len().max(1) as f64;
    let average = per_node.iter().sum::<f64>() / n;
    let zero_fraction = per_node.iter().filter(|&&c| c == 0.0).count() as f64 / n;
    Clustering { per_node, average, zero_fraction }
}

/// Weighted clustering with geometric-mean triangle intensity:
/// `C~_i = 2 / [k_i (k_i - 1)] * sum_{j<k} (w_ij w_jk w_ki)^(1/3)`, weights
/// normalized by the network's maximum weight. Zero when `k_i < 2`.
pub fn weighted_clustering(net: &CallNetwork, kind: WeightKind) -> Vec<f64> {
    let g = net.undirected();
    let max_w = (0..g.node_count()).flat_map(|i| g.weights(i, kind).iter().copied()).max().unwrap_or(0);
    if max_w == 0 {
        return vec![0.0; g.node_count()];
    }
    let scale = max_w as f64;
    (0..g.node_count())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let k = g.degree(i) as f64;
            if k < 2.0 {
                return 0.0;
            }
            let (nb_i, w_i) = (g.neighbors(i), g.weights(i, kind));
            let mut sum = 0.0;
            for (pj, &j) in nb_i.iter().enumerate() {
                let w_j = g.weights(j as usize, kind);
                for_common_above(&g, i, j as usize, |pk, qk| {
                    let prod = (w_i[pj] as f64 / scale) * (w_j[qk] as f64 / scale) * (w_i[pk] as f64 / scale);
                    sum += prod.cbrt();
                });
            }
            2.0 * sum / (k * (k - 1.0))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeOverlap {
    pub i: usize,
    pub j: usize,
    pub common: usize,
    /// `None` when `k_i + k_j - 2 - n_ij = 0`.
    pub overlap: Option<f64>,
    pub calls: u64,
    pub duration: u64,
}

#[derive(Clone, Debug)]
pub struct Overlap {
    pub edges: Vec<EdgeOverlap>,
    pub undefined: usize,
}

/// `O_ij = n_ij / (k_i + k_j - 2 - n_ij)` for every undirected edge.
pub fn edge_overlap(net: &CallNetwork) -> Overlap {
    let g = net.undirected();
    let edges: Vec<EdgeOverlap> = g
        .edges()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, j, calls, duration)| {
            let (a, b) = (g.neighbors(i), g.neighbors(j));
            let (mut p, mut q, mut common) = (0, 0, 0);
            while p < a.len() && q < b.len() {
                match a[p].cmp(&b[q]) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        common += 1;
                        p += 1;
                        q += 1;
                    }
                }
            }
            let denom = a.len() + b.len() - 2 - common;
            let overlap = (denom > 0).then(|| common as f64 / denom as f64);
            EdgeOverlap { i, j, common, overlap, calls, duration }
        })
        .collect();
    let undefined = edges.iter().filter(|e| e.overlap.is_none()).count();
    Overlap { edges, undefined }
}

/// How `conditional_average` groups the x values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binning {
    /// `n` logarithmically equal bins over `[min x, max x]`; requires `x > 0`.
    Logarithmic(usize),
    /// One bin per integer value `[v, v + 1)` between `min x` and `max x`.
    PerInteger,
}

impl Binning {
    pub const DEFAULT_LOG_BINS: usize = 30;

    pub fn log() -> Self {
        Binning::Logarithmic(Self::DEFAULT_LOG_BINS)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// NaN for empty bins.
    pub x_mean: f64,
    pub y_mean: f64,
    /// Population standard deviation of y.
    pub y_std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinnedCurve {
    pub bins: Vec<Bin>,
    /// Items dropped for non-finite values or `x <= 0` under log binning.
    pub excluded: usize,
}

impl BinnedCurve {
    pub fn occupied(&self) -> impl Iterator<Item = &Bin> {
        self.bins.iter().filter(|b| b.count > 0)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin_lo\tbin_hi\tcount\tx_mean\ty_mean\ty_std")?;
        for b in &self.bins {
            writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", b.lo, b.hi, b.count, b.x_mean, b.y_mean, b.y_std)?;
        }
        Ok(())
    }
}

/// Log-spaced bin edges `lo * (hi/lo)^(k/n)`, `k = 0..=n`.
pub fn log_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi / lo).ln();
    (0..=n).map(|k| if k == n { hi } else { lo * (span * k as f64 / n as f64).exp() }).collect()
}

/// Index of the log bin holding `x`, clamped to `[0, n)`.
pub fn log_bin_index(x: f64, lo: f64, hi: f64, n: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let pos = (x / lo).ln() / (hi / lo).ln() * n as f64;
    (pos.floor().max(0.0) as usize).min(n - 1)
}

/// Mean and standard deviation of `y` conditioned on bins of `x`.
///
/// Empty bins are emitted with count 0. A degenerate range (`min = max`)
/// yields a single bin.
pub fn conditional_average(x: &[f64], y: &[f64], binning: Binning) -> BinnedCurve {
    assert_eq!(x.len(), y.len(), "x and y must be index-aligned");
    let usable = |xv: f64, yv: f64| {
        xv.is_finite() && yv.is_finite() && !(matches!(binning, Binning::Logarithmic(_)) && xv <= 0.0)
    };
    let items: Vec<(f64, f64)> = x.iter().zip(y).map(|(&a, &b)| (a, b)).filter(|&(a, b)| usable(a, b)).collect();
    let excluded = x.len() - items.len();
    if items.is_empty() {
        return BinnedCurve { bins: Vec::new(), excluded };
    }
    let lo = items.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = items.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);

    let (edges, index): (Vec<f64>, Box<dyn Fn(f64) -> usize>) = match binning {
        Binning::Logarithmic(n) => {
            assert!(n >= 1);
            if hi > lo {
                (log_edges(lo, hi, n), Box::new(move |v| log_bin_index(v, lo, hi, n)))
            } else {
                (vec![lo, hi], Box::new(|_| 0))
            }
        }
        Binning::PerInteger => {
            let (a, b) = (lo.floor(), hi.floor());
            let n = (b - a) as usize + 1;
            ((0..=n).map(|k| a + k as f64).collect(), Box::new(move |v: f64| ((v.floor() - a) as usize).min(n - 1)))
        }
    };
    let nbins = edges.len() - 1;
    let mut count = vec![0usize; nbins];
    let mut sx = vec![0.0; nbins];
    let mut sy = vec![0.0; nbins];
    let slots: Vec<usize> = items.iter().map(|&(a, _)| index(a)).collect();
    for (&(a, b), &k) in items.iter().zip(&slots) {
        count[k] += 1;
        sx[k] += a;
        sy[k] += b;
    }
    let y_mean: Vec<f64> = (0..nbins).map(|k| sy[k] / count[k] as f64).collect();
    let mut ss = vec![0.0; nbins];
    for (&(_, b), &k) in items.iter().zip(&slots) {
        ss[k] += (b - y_mean[k]).powi(2);
    }
    let bins = (0..nbins)
        .map(|k| {
            let c = count[k];
            let nan = c == 0;
            Bin {
                lo: edges[k],
                hi: edges[k + 1],
                count: c,
                x_mean: if nan { f64::NAN } else { sx[k] / c as f64 },
                y_mean: if nan { f64::NAN } else { y_mean[k] },
                y_std: if nan { f64::NAN } else { (ss[k] / c as f64).sqrt() },
            }
        })
        .collect();
    BinnedCurve { bins, excluded }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricError::TooFewValues(x.len()));
    }
    Ok(())
}

/// Pearson's linear correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Fractional ranks `1..=n`; tied values share their mean rank.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mean_rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rank correlation: Pearson on fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

/// Empirical cumulative rank `P_c(w) = rank(w) / n` with tied ranks averaged.
pub fn cumulative_rank(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    fractional_ranks(values).into_iter().map(|r| r / n).collect()
}
