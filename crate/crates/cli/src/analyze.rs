use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use callnet::components::{component_size_distribution, connected_components, snowball_growth};
use callnet::fitting::{empirical_pdf_with, Support};
use callnet::metrics::{
    clustering_coefficient, conditional_average, cumulative_rank, degree_sequences, edge_overlap, knn_per_node,
    pearson, spearman, strength_nn_per_node, strengths, weighted_clustering, weighted_knn_per_node, BinnedCurve,
    Binning,
};
use callnet::netbuild::{UndirectedGraph, WeightKind};
use callnet::CallNetwork;
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::artifacts::{giant, Workdir, ALL};
use crate::config::{usage, Config};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Working directory holding the built and validated networks.
    #[arg(long, short)]
    dir: Option<PathBuf>,
    /// Output directory for the tables; defaults to `<dir>/tables`.
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Comma-separated figure panels to emit, e.g. `fig3a,fig10c`.
    #[arg(long)]
    only: Option<String>,
    /// Logarithmic bins per distribution or curve.
    #[arg(long)]
    bins: Option<usize>,
    /// Edges sampled for the weight scatter tables.
    #[arg(long)]
    sample_edges: Option<usize>,
    /// Radius of the ego network table.
    #[arg(long)]
    ego_distance: Option<usize>,
    /// Snowball sources per giant component.
    #[arg(long)]
    sources: Option<usize>,
    /// Largest snowball distance.
    #[arg(long)]
    max_distance: Option<usize>,
}

pub const MANIFEST: &str = "manifest.tsv";
const DEFAULT_SAMPLE_EDGES: usize = 5_000;
const DEFAULT_EGO_DISTANCE: usize = 5;

/// The original, validated and giant-component networks.
struct Nets {
    dcn: CallNetwork,
    svdcn: CallNetwork,
    svgcdcn: CallNetwork,
    mcn: CallNetwork,
    svmcn: CallNetwork,
    svgcmcn: CallNetwork,
    gcdcn: CallNetwork,
    gcsvdcn: CallNetwork,
    gcmcn: CallNetwork,
    gcsvmcn: CallNetwork,
}

type Labeled<'a> = (&'static str, &'a CallNetwork);

impl Nets {
    fn load(dir: &Workdir) -> anyhow::Result<Nets> {
        let missing: Vec<_> = ALL.iter().filter(|n| !dir.has(**n)).map(|n| n.file).collect();
        if !missing.is_empty() {
            anyhow::bail!(
                "missing {} in {}; run `callnet build` and `callnet validate` first",
                missing.join(", "),
                dir.path("").display()
            );
        }
        let [dcn, svdcn, svgcdcn, mcn, svmcn, svgcmcn] = ALL.map(|n| dir.read_network(n));
        let (dcn, svdcn, mcn, svmcn) = (dcn?, svdcn?, mcn?, svmcn?);
        Ok(Nets {
            gcdcn: giant(&dcn),
            gcsvdcn: giant(&svdcn),
            gcmcn: giant(&mcn),
            gcsvmcn: giant(&svmcn),
            dcn,
            svdcn,
            svgcdcn: svgcdcn?,
            mcn,
            svmcn,
            svgcmcn: svgcmcn?,
        })
    }

    fn gc_directed(&self) -> [Labeled<'_>; 2] {
        [("GCDCN", &self.gcdcn), ("GCSVDCN", &self.gcsvdcn)]
    }

    fn gc_mutual(&self) -> [Labeled<'_>; 2] {
        [("GCMCN", &self.gcmcn), ("GCSVMCN", &self.gcsvmcn)]
    }

    fn gc_all(&self) -> [Labeled<'_>; 4] {
        let [a, b] = self.gc_directed();
        let [c, d] = self.gc_mutual();
        [a, b, c, d]
    }
}

struct Ctx<'a> {
    nets: &'a Nets,
    bins: usize,
    sample_edges: usize,
    ego_distance: usize,
    sources: usize,
    max_distance: usize,
    seed: u64,
}

type Emit = fn(&Ctx, &mut String) -> anyhow::Result<()>;

/// One figure panel: table name (prefixed by the panel id) and what it holds.
struct Figure {
    name: &'static str,
    about: &'static str,
    emit: Emit,
}

impl Figure {
    fn id(&self) -> &'static str {
        self.name.split('_').next().unwrap()
    }
}

const FIGURES: &[Figure] = &[
    Figure {
        name: "fig1a_component_sizes",
        about: "component size distribution without the giant component: DCN, SVDCN, SVGCDCN",
        emit: fig1a,
    },
    Figure {
        name: "fig1b_component_sizes",
        about: "component size distribution without the giant component: MCN, SVMCN, SVGCMCN",
        emit: fig1b,
    },
    Figure {
        name: "fig1c_ego_network",
        about: "ego network of the MCN around a giant-component source, edges flagged when kept in the SVMCN",
        emit: fig1c,
    },
    Figure { name: "fig1d_snowball", about: "snowball sampling N_s(l) on the GCDCN", emit: fig1d },
    Figure { name: "fig1e_snowball", about: "snowball sampling N_s(l) on the GCMCN", emit: fig1e },
    Figure { name: "fig2a_degree_pdf", about: "in- and out-degree distributions: DCN, SVDCN", emit: fig2a },
    Figure { name: "fig2b_degree_pdf", about: "in- and out-degree distributions: GCDCN, GCSVDCN", emit: fig2b },
    Figure { name: "fig2c_degree_pdf", about: "degree distributions: MCN, SVMCN", emit: fig2c },
    Figure { name: "fig2d_degree_pdf", about: "degree distributions: GCMCN, GCSVMCN", emit: fig2d },
    Figure { name: "fig3a_knn_vs_k", about: "<k_nn | k>: GCDCN, GCSVDCN", emit: fig3a },
    Figure { name: "fig3b_knn_vs_k", about: "<k_nn | k>: GCMCN, GCSVMCN", emit: fig3b },
    Figure { name: "fig3c_weighted_knn_vs_k", about: "<k^N_nn | k> and <k^D_nn | k>: GCDCN, GCSVDCN", emit: fig3c },
    Figure { name: "fig3d_weighted_knn_vs_k", about: "<k^N_nn | k> and <k^D_nn | k>: GCMCN, GCSVMCN", emit: fig3d },
    Figure { name: "fig4a_wn_pdf", about: "edge weight w^N distribution: GCDCN, GCSVDCN", emit: fig4a },
    Figure { name: "fig4b_wn_pdf", about: "edge weight w^N distribution: GCMCN, GCSVMCN", emit: fig4b },
    Figure { name: "fig4c_wd_pdf", about: "edge weight w^D distribution: GCDCN, GCSVDCN", emit: fig4c },
    Figure { name: "fig4d_wd_pdf", about: "edge weight w^D distribution: GCMCN, GCSVMCN", emit: fig4d },
    Figure {
        name: "fig5a_weight_scatter",
        about: "sampled (w^N, w^D) edges of the GCMCN with correlations over all its edges",
        emit: fig5a,
    },
    Figure {
        name: "fig5b_weight_scatter",
        about: "sampled (w^N, w^D) edges of the GCSVMCN with correlations over all its edges",
        emit: fig5b,
    },
    Figure { name: "fig5c_duration_per_call_vs_wn", about: "<w^D / w^N | w^N>: GCDCN, GCSVDCN", emit: fig5c },
    Figure { name: "fig5d_duration_per_call_vs_wn", about: "<w^D / w^N | w^N>: GCMCN, GCSVMCN", emit: fig5d },
    Figure { name: "fig6a_sn_pdf", about: "node strength s^N distribution: GCDCN, GCSVDCN", emit: fig6a },
    Figure { name: "fig6b_sn_pdf", about: "node strength s^N distribution: GCMCN, GCSVMCN", emit: fig6b },
    Figure { name: "fig6c_sd_pdf", about: "node strength s^D distribution: GCDCN, GCSVDCN", emit: fig6c },
    Figure { name: "fig6d_sd_pdf", about: "node strength s^D distribution: GCMCN, GCSVMCN", emit: fig6d },
    Figure { name: "fig7a_snn_vs_s", about: "<s^N_nn | s^N>: GCDCN, GCSVDCN", emit: fig7a },
    Figure { name: "fig7b_snn_vs_s", about: "<s^N_nn | s^N>: GCMCN, GCSVMCN", emit: fig7b },
    Figure { name: "fig7c_snn_vs_s", about: "<s^D_nn | s^D>: GCDCN, GCSVDCN", emit: fig7c },
    Figure { name: "fig7d_snn_vs_s", about: "<s^D_nn | s^D>: GCMCN, GCSVMCN", emit: fig7d },
    Figure { name: "fig7e_duration_per_call_vs_s", about: "<s^D / s^N | s^N>: GCDCN, GCSVDCN", emit: fig7e },
    Figure { name: "fig7f_duration_per_call_vs_s", about: "<s^D / s^N | s^N>: GCMCN, GCSVMCN", emit: fig7f },
    Figure { name: "fig8a_sn_vs_k", about: "<s^N | k> on the four giant components", emit: fig8a },
    Figure { name: "fig8b_sd_vs_k", about: "<s^D | k> on the four giant components", emit: fig8b },
    Figure {
        name: "fig8c_sn_product_vs_k_product",
        about: "<s^N_i s^N_j | k_i k_j> over edges of the four giant components",
        emit: fig8c,
    },
    Figure {
        name: "fig8d_sd_product_vs_k_product",
        about: "<s^D_i s^D_j | k_i k_j> over edges of the four giant components",
        emit: fig8d,
    },
    Figure { name: "fig8e_wd_vs_k_product", about: "<w^D_ij | k_i k_j> on the four giant components", emit: fig8e },
    Figure { name: "fig8f_wn_vs_k_product", about: "<w^N_ij | k_i k_j> on the four giant components", emit: fig8f },
    Figure { name: "fig8g_wd_vs_s_product", about: "<w^D_ij | s^D_i s^D_j> on the four giant components", emit: fig8g },
    Figure { name: "fig8h_wn_vs_s_product", about: "<w^N_ij | s^N_i s^N_j> on the four giant components", emit: fig8h },
    Figure { name: "fig9a_clustering_vs_k", about: "<C | k>: GCDCN, GCSVDCN", emit: fig9a },
    Figure { name: "fig9b_clustering_vs_k", about: "<C | k>: GCMCN, GCSVMCN", emit: fig9b },
    Figure { name: "fig9c_weighted_clustering_vs_s", about: "<C~ | s^N> and <C~ | s^D>: GCDCN, GCSVDCN", emit: fig9c },
    Figure { name: "fig9d_weighted_clustering_vs_s", about: "<C~ | s^N> and <C~ | s^D>: GCMCN, GCSVMCN", emit: fig9d },
    Figure { name: "fig10a_overlap_vs_wn", about: "<O | w^N>: DCN, SVDCN, MCN, SVMCN", emit: fig10a },
    Figure { name: "fig10b_overlap_vs_wd", about: "<O | w^D>: DCN, SVDCN, MCN, SVMCN", emit: fig10b },
    Figure { name: "fig10c_overlap_vs_wn_rank", about: "<O | P_c(w^N)>: DCN, SVDCN, MCN, SVMCN", emit: fig10c },
    Figure { name: "fig10d_overlap_vs_wd_rank", about: "<O | P_c(w^D)>: DCN, SVDCN, MCN, SVMCN", emit: fig10d },
];

/// Panel ids accepted by `--only`.
pub fn figure_ids() -> impl Iterator<Item = &'static str> {
    FIGURES.iter().map(Figure::id)
}

const PDF_COLUMNS: &str = "network\tseries\tx\tdensity\tbin_lo\tbin_hi\twidth\tcount";
const CURVE_COLUMNS: &str = "network\tseries\tbin_lo\tbin_hi\tcount\tx_mean\ty_mean\ty_std";

/// Log-binned density of the positive values; zeros are counted in a comment.
fn pdf_rows(out: &mut String, ctx: &Ctx, network: &str, series: &str, values: &[u64]) -> anyhow::Result<()> {
    let samples: Vec<f64> = values.iter().filter(|&&v| v > 0).map(|&v| v as f64).collect();
    if samples.len() < values.len() {
        writeln!(out, "# excluded_zeros\t{network}\t{series}\t{}", values.len() - samples.len())?;
    }
    if samples.is_empty() {
        return Ok(());
    }
    let pdf = empirical_pdf_with(&samples, ctx.bins, Support::Integer)?;
    for b in &pdf.bins {
        writeln!(out, "{network}\t{series}\t{}\t{}\t{}\t{}\t{}\t{}", b.x, b.density, b.lo, b.hi, b.width, b.count)?;
    }
    Ok(())
}

fn curve_rows(out: &mut String, network: &str, series: &str, curve: &BinnedCurve) -> anyhow::Result<()> {
    if curve.excluded > 0 {
        writeln!(out, "# excluded\t{network}\t{series}\t{}", curve.excluded)?;
    }
    for b in &curve.bins {
        writeln!(out, "{network}\t{series}\t{}\t{}\t{}\t{}\t{}\t{}", b.lo, b.hi, b.count, b.x_mean, b.y_mean, b.y_std)?;
    }
    Ok(())
}

fn log_curve(ctx: &Ctx, x: &[f64], y: &[f64]) -> BinnedCurve {
    conditional_average(x, y, Binning::Logarithmic(ctx.bins))
}

fn degrees(g: &UndirectedGraph) -> Vec<f64> {
    (0..g.node_count()).map(|i| g.degree(i) as f64).collect()
}

fn strengths_f64(g: &UndirectedGraph, kind: WeightKind) -> Vec<f64> {
    strengths(g, kind).into_iter().map(|v| v as f64).collect()
}

const KINDS: [(WeightKind, &str); 2] = [(WeightKind::Number, "N"), (WeightKind::Duration, "D")];

fn component_sizes(out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    writeln!(out, "network\tsize\tcount\tfraction")?;
    for (label, net) in nets {
        let hist = component_size_distribution(&connected_components(net), true);
        let total: usize = hist.values().sum();
        for (size, count) in hist {
            writeln!(out, "{label}\t{size}\t{count}\t{}", count as f64 / total as f64)?;
        }
    }
    Ok(())
}

fn fig1a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    let n = ctx.nets;
    component_sizes(out, &[("DCN", &n.dcn), ("SVDCN", &n.svdcn), ("SVGCDCN", &n.svgcdcn)])
}

fn fig1b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    let n = ctx.nets;
    component_sizes(out, &[("MCN", &n.mcn), ("SVMCN", &n.svmcn), ("SVGCMCN", &n.svgcmcn)])
}

/// Hop distances from `source`, `None` beyond `max`.
fn bfs_distances(g: &UndirectedGraph, source: usize, max: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        if du == max {
            continue;
        }
        for &v in g.neighbors(u) {
            if dist[v as usize].is_none() {
                dist[v as usize] = Some(du + 1);
                queue.push_back(v as usize);
            }
        }
    }
    dist
}

fn fig1c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    let (mcn, sv) = (&ctx.nets.mcn, &ctx.nets.svmcn);
    let d = ctx.ego_distance;
    writeln!(out, "# max_distance\t{d}")?;
    if mcn.is_empty() {
        writeln!(out, "src\tdst\tsrc_distance\tdst_distance\tvalidated\tsrc_sv_component\tdst_sv_component")?;
        return Ok(());
    }
    // One source drawn uniformly from the giant component.
    let source = snowball_growth(&ctx.nets.gcmcn, 1, 0, ctx.seed)?.sources.remove(0);
    writeln!(out, "# source\t{source}")?;
    writeln!(out, "src\tdst\tsrc_distance\tdst_distance\tvalidated\tsrc_sv_component\tdst_sv_component")?;
    let src = mcn.node_index(source.as_bytes()).context("ego source missing from the MCN")? as usize;
    let dist = bfs_distances(&mcn.undirected(), src, d);
    let sv_parts = connected_components(sv);
    let sv_component =
        |id: &[u8]| sv.node_index(id).map_or_else(|| "NA".to_owned(), |i| sv_parts.assignment[i as usize].to_string());
    for e in mcn.edges() {
        let (Some(da), Some(db)) = (dist[e.src as usize], dist[e.dst as usize]) else {
            continue;
        };
        let (a, b) = (&mcn.nodes()[e.src as usize], &mcn.nodes()[e.dst as usize]);
        let validated = match (sv.node_index(a.as_bytes()), sv.node_index(b.as_bytes())) {
            (Some(i), Some(j)) => sv.find_edge(i.min(j), i.max(j)).is_some(),
            _ => false,
        };
        writeln!(
            out,
            "{a}\t{b}\t{da}\t{db}\t{}\t{}\t{}",
            u8::from(validated),
            sv_component(a.as_bytes()),
            sv_component(b.as_bytes())
        )?;
    }
    Ok(())
}

fn snowball(ctx: &Ctx, out: &mut String, gc: &CallNetwork) -> anyhow::Result<()> {
    writeln!(out, "l\tseries\tN_s")?;
    let n = ctx.sources.min(gc.node_count());
    if n == 0 {
        return Ok(());
    }
    let snow = snowball_growth(gc, n, ctx.max_distance, ctx.seed)?;
    for l in 0..=ctx.max_distance {
        for (source, curve) in snow.sources.iter().zip(&snow.curves) {
            writeln!(out, "{l}\t{source}\t{}", curve[l])?;
        }
        writeln!(out, "{l}\tmean\t{}", snow.mean[l])?;
        writeln!(out, "{l}\tmax\t{}", gc.node_count())?;
    }
    Ok(())
}

fn fig1d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    snowball(ctx, out, &ctx.nets.gcdcn)
}

fn fig1e(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    snowball(ctx, out, &ctx.nets.gcmcn)
}

fn directed_degree_pdf(ctx: &Ctx, out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    writeln!(out, "{PDF_COLUMNS}")?;
    for (label, net) in nets {
        let d = degree_sequences(net);
        for (series, seq) in [("in", d.in_degree), ("out", d.out_degree)] {
            let seq: Vec<u64> = seq.unwrap_or_default().into_iter().map(u64::from).collect();
            pdf_rows(out, ctx, label, series, &seq)?;
        }
    }
    Ok(())
}

fn mutual_degree_pdf(ctx: &Ctx, out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    writeln!(out, "{PDF_COLUMNS}")?;
    for (label, net) in nets {
        let seq: Vec<u64> = degree_sequences(net).total.into_iter().map(u64::from).collect();
        pdf_rows(out, ctx, label, "k", &seq)?;
    }
    Ok(())
}

fn fig2a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    directed_degree_pdf(ctx, out, &[("DCN", &ctx.nets.dcn), ("SVDCN", &ctx.nets.svdcn)])
}

fn fig2b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    directed_degree_pdf(ctx, out, &ctx.nets.gc_directed())
}

fn fig2c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    mutual_degree_pdf(ctx, out, &[("MCN", &ctx.nets.mcn), ("SVMCN", &ctx.nets.svmcn)])
}

fn fig2d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    mutual_degree_pdf(ctx, out, &ctx.nets.gc_mutual())
}

fn knn(out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in nets {
        let g = net.undirected();
        curve_rows(out, label, "k_nn", &conditional_average(&degrees(&g), &knn_per_node(&g), Binning::PerInteger))?;
    }
    Ok(())
}

fn weighted_knn(out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in nets {
        let g = net.undirected();
        let k = degrees(&g);
        for (kind, series) in KINDS {
            let y = weighted_knn_per_node(&g, kind);
            curve_rows(out, label, series, &conditional_average(&k, &y, Binning::PerInteger))?;
        }
    }
    Ok(())
}

fn fig3a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    knn(out, &ctx.nets.gc_directed())
}

fn fig3b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    knn(out, &ctx.nets.gc_mutual())
}

fn fig3c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    weighted_knn(out, &ctx.nets.gc_directed())
}

fn fig3d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    weighted_knn(out, &ctx.nets.gc_mutual())
}

/// Weights of the stored edges: directed edges for the DCN family, combined
/// weights for the MCN family.
fn edge_weight_pdf(ctx: &Ctx, out: &mut String, nets: &[Labeled], kind: WeightKind) -> anyhow::Result<()> {
    writeln!(out, "{PDF_COLUMNS}")?;
    for (label, net) in nets {
        let (series, w): (&str, Vec<u64>) = match kind {
            WeightKind::Number => ("w_N", net.edges().iter().map(|e| e.calls()).collect()),
            WeightKind::Duration => ("w_D", net.edges().iter().map(|e| e.duration()).collect()),
        };
        pdf_rows(out, ctx, label, series, &w)?;
    }
    Ok(())
}

fn fig4a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    edge_weight_pdf(ctx, out, &ctx.nets.gc_directed(), WeightKind::Number)
}

fn fig4b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    edge_weight_pdf(ctx, out, &ctx.nets.gc_mutual(), WeightKind::Number)
}

fn fig4c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    edge_weight_pdf(ctx, out, &ctx.nets.gc_directed(), WeightKind::Duration)
}

fn fig4d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    edge_weight_pdf(ctx, out, &ctx.nets.gc_mutual(), WeightKind::Duration)
}

fn write_correlation(
    out: &mut String,
    name: &str,
    r: Result<f64, callnet::metrics::MetricError>,
) -> anyhow::Result<()> {
    match r {
        Ok(v) => writeln!(out, "# {name}\t{v}")?,
        Err(e) => writeln!(out, "# {name}\tundefined ({e})")?,
    }
    Ok(())
}

fn weight_scatter(ctx: &Ctx, out: &mut String, (label, net): Labeled) -> anyhow::Result<()> {
    let w_n: Vec<f64> = net.edges().iter().map(|e| e.calls() as f64).collect();
    let w_d: Vec<f64> = net.edges().iter().map(|e| e.duration() as f64).collect();
    write_correlation(out, "pearson", pearson(&w_n, &w_d))?;
    write_correlation(out, "spearman", spearman(&w_n, &w_d))?;
    writeln!(out, "network\tw_N\tw_D")?;
    let picks: Vec<usize> = if w_n.len() <= ctx.sample_edges {
        (0..w_n.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let mut v = rand::seq::index::sample(&mut rng, w_n.len(), ctx.sample_edges).into_vec();
        v.sort_unstable();
        v
    };
    for i in picks {
        writeln!(out, "{label}\t{}\t{}", w_n[i], w_d[i])?;
    }
    Ok(())
}

fn fig5a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    weight_scatter(ctx, out, ("GCMCN", &ctx.nets.gcmcn))
}

fn fig5b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    weight_scatter(ctx, out, ("GCSVMCN", &ctx.nets.gcsvmcn))
}

fn duration_per_call(ctx: &Ctx, out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in nets {
        let x: Vec<f64> = net.edges().iter().map(|e| e.calls() as f64).collect();
        let y: Vec<f64> = net.edges().iter().map(|e| e.duration() as f64 / e.calls() as f64).collect();
        curve_rows(out, label, "w_D/w_N", &log_curve(ctx, &x, &y))?;
    }
    Ok(())
}

fn fig5c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    duration_per_call(ctx, out, &ctx.nets.gc_directed())
}

fn fig5d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    duration_per_call(ctx, out, &ctx.nets.gc_mutual())
}

fn strength_pdf(ctx: &Ctx, out: &mut String, nets: &[Labeled], kind: WeightKind) -> anyhow::Result<()> {
    writeln!(out, "{PDF_COLUMNS}")?;
    for (label, net) in nets {
        let series = if kind == WeightKind::Number { "s_N" } else { "s_D" };
        pdf_rows(out, ctx, label, series, &strengths(&net.undirected(), kind))?;
    }
    Ok(())
}

fn fig6a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_pdf(ctx, out, &ctx.nets.gc_directed(), WeightKind::Number)
}

fn fig6b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_pdf(ctx, out, &ctx.nets.gc_mutual(), WeightKind::Number)
}

fn fig6c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_pdf(ctx, out, &ctx.nets.gc_directed(), WeightKind::Duration)
}

fn fig6d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_pdf(ctx, out, &ctx.nets.gc_mutual(), WeightKind::Duration)
}

fn strength_nn_curve(ctx: &Ctx, out: &mut String, nets: &[Labeled], kind: WeightKind) -> anyhow::Result<()> {
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in nets {
        let g = net.undirected();
        let series = if kind == WeightKind::Number { "s_nn^N" } else { "s_nn^D" };
        curve_rows(out, label, series, &log_curve(ctx, &strengths_f64(&g, kind), &strength_nn_per_node(&g, kind)))?;
    }
    Ok(())
}

fn fig7a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_nn_curve(ctx, out, &ctx.nets.gc_directed(), WeightKind::Number)
}

fn fig7b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_nn_curve(ctx, out, &ctx.nets.gc_mutual(), WeightKind::Number)
}

fn fig7c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_nn_curve(ctx, out, &ctx.nets.gc_directed(), WeightKind::Duration)
}

fn fig7d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_nn_curve(ctx, out, &ctx.nets.gc_mutual(), WeightKind::Duration)
}

fn strength_duration_per_call(ctx: &Ctx, out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in nets {
        let g = net.undirected();
        let s_n = strengths_f64(&g, WeightKind::Number);
        let s_d = strengths_f64(&g, WeightKind::Duration);
        let y: Vec<f64> = s_d.iter().zip(&s_n).map(|(d, n)| d / n).collect();
        curve_rows(out, label, "s_D/s_N", &log_curve(ctx, &s_n, &y))?;
    }
    Ok(())
}

fn fig7e(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_duration_per_call(ctx, out, &ctx.nets.gc_directed())
}

fn fig7f(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_duration_per_call(ctx, out, &ctx.nets.gc_mutual())
}

fn strength_vs_degree(ctx: &Ctx, out: &mut String, kind: WeightKind, series: &str) -> anyhow::Result<()> {
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in ctx.nets.gc_all() {
        let g = net.undirected();
        curve_rows(out, label, series, &log_curve(ctx, &degrees(&g), &strengths_f64(&g, kind)))?;
    }
    Ok(())
}

fn fig8a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_vs_degree(ctx, out, WeightKind::Number, "s_N")
}

fn fig8b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    strength_vs_degree(ctx, out, WeightKind::Duration, "s_D")
}

/// What an edge-level curve conditions on and averages.
#[derive(Clone, Copy)]
enum EdgeQty {
    DegreeProduct,
    StrengthProduct(WeightKind),
    Weight(WeightKind),
}

fn edge_quantity(g: &UndirectedGraph, q: EdgeQty) -> Vec<f64> {
    let k = degrees(g);
    let s = |kind| strengths_f64(g, kind);
    match q {
        EdgeQty::DegreeProduct => g.edges().map(|(i, j, _, _)| k[i] * k[j]).collect(),
        EdgeQty::StrengthProduct(kind) => {
            let s = s(kind);
            g.edges().map(|(i, j, _, _)| s[i] * s[j]).collect()
        }
        EdgeQty::Weight(WeightKind::Number) => g.edges().map(|(_, _, w, _)| w as f64).collect(),
        EdgeQty::Weight(WeightKind::Duration) => g.edges().map(|(_, _, _, w)| w as f64).collect(),
    }
}

fn edge_curve(ctx: &Ctx, out: &mut String, x: EdgeQty, y: EdgeQty, series: &str) -> anyhow::Result<()> {
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in ctx.nets.gc_all() {
        let g = net.undirected();
        curve_rows(out, label, series, &log_curve(ctx, &edge_quantity(&g, x), &edge_quantity(&g, y)))?;
    }
    Ok(())
}

fn fig8c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    edge_curve(ctx, out, EdgeQty::DegreeProduct, EdgeQty::StrengthProduct(WeightKind::Number), "s_N_i*s_N_j")
}

fn fig8d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    edge_curve(ctx, out, EdgeQty::DegreeProduct, EdgeQty::StrengthProduct(WeightKind::Duration), "s_D_i*s_D_j")
}

fn fig8e(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    edge_curve(ctx, out, EdgeQty::DegreeProduct, EdgeQty::Weight(WeightKind::Duration), "w_D")
}

fn fig8f(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    edge_curve(ctx, out, EdgeQty::DegreeProduct, EdgeQty::Weight(WeightKind::Number), "w_N")
}

fn fig8g(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    let x = EdgeQty::StrengthProduct(WeightKind::Duration);
    edge_curve(ctx, out, x, EdgeQty::Weight(WeightKind::Duration), "w_D")
}

fn fig8h(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    let x = EdgeQty::StrengthProduct(WeightKind::Number);
    edge_curve(ctx, out, x, EdgeQty::Weight(WeightKind::Number), "w_N")
}

fn clustering(out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    let curves: Vec<_> = nets
        .iter()
        .map(|(label, net)| {
            let c = clustering_coefficient(net);
            let curve = conditional_average(&degrees(&net.undirected()), &c.per_node, Binning::PerInteger);
            (label, c.average, c.zero_fraction, curve)
        })
        .collect();
    for (label, average, zero, _) in &curves {
        writeln!(out, "# average_C\t{label}\t{average}\tzero_fraction\t{zero}")?;
    }
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, _, _, curve) in &curves {
        curve_rows(out, label, "C", curve)?;
    }
    Ok(())
}

fn weighted_clustering_curve(ctx: &Ctx, out: &mut String, nets: &[Labeled]) -> anyhow::Result<()> {
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in nets {
        let g = net.undirected();
        for (kind, series) in KINDS {
            let c = weighted_clustering(net, kind);
            curve_rows(out, label, series, &log_curve(ctx, &strengths_f64(&g, kind), &c))?;
        }
    }
    Ok(())
}

fn fig9a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    clustering(out, &ctx.nets.gc_directed())
}

fn fig9b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    clustering(out, &ctx.nets.gc_mutual())
}

fn fig9c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    weighted_clustering_curve(ctx, out, &ctx.nets.gc_directed())
}

fn fig9d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    weighted_clustering_curve(ctx, out, &ctx.nets.gc_mutual())
}

/// `<O | w>` or `<O | P_c(w)>` over the edges with a defined overlap.
fn overlap_curve(ctx: &Ctx, out: &mut String, kind: WeightKind, by_rank: bool) -> anyhow::Result<()> {
    let n = ctx.nets;
    writeln!(out, "{CURVE_COLUMNS}")?;
    for (label, net) in [("DCN", &n.dcn), ("SVDCN", &n.svdcn), ("MCN", &n.mcn), ("SVMCN", &n.svmcn)] {
        let overlap = edge_overlap(net);
        let w: Vec<f64> = overlap
            .edges
            .iter()
            .map(|e| if kind == WeightKind::Number { e.calls } else { e.duration } as f64)
            .collect();
        let x_all = if by_rank { cumulative_rank(&w) } else { w };
        let (x, y): (Vec<f64>, Vec<f64>) =
            overlap.edges.iter().zip(x_all).filter_map(|(e, x)| e.overlap.map(|o| (x, o))).unzip();
        if overlap.undefined > 0 {
            writeln!(out, "# undefined_overlap\t{label}\t{}", overlap.undefined)?;
        }
        let series = match (kind, by_rank) {
            (WeightKind::Number, false) => "w_N",
            (WeightKind::Duration, false) => "w_D",
            (WeightKind::Number, true) => "P_c(w_N)",
            (WeightKind::Duration, true) => "P_c(w_D)",
        };
        curve_rows(out, label, series, &log_curve(ctx, &x, &y))?;
    }
    Ok(())
}

fn fig10a(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    overlap_curve(ctx, out, WeightKind::Number, false)
}

fn fig10b(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    overlap_curve(ctx, out, WeightKind::Duration, false)
}

fn fig10c(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    overlap_curve(ctx, out, WeightKind::Number, true)
}

fn fig10d(ctx: &Ctx, out: &mut String) -> anyhow::Result<()> {
    overlap_curve(ctx, out, WeightKind::Duration, true)
}

fn selected(only: Option<&str>) -> anyhow::Result<Vec<&'static Figure>> {
    let Some(list) = only else {
        return Ok(FIGURES.iter().collect());
    };
    let wanted: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if wanted.is_empty() {
        return usage("--only needs at least one figure panel");
    }
    for w in &wanted {
        if !FIGURES.iter().any(|f| f.id() == *w || f.name == *w) {
            return usage(format!("unknown figure panel {w:?}; known: {}", figure_ids().collect::<Vec<_>>().join(",")));
        }
    }
    Ok(FIGURES.iter().filter(|f| wanted.iter().any(|w| f.id() == *w || f.name == *w)).collect())
}

pub fn run(args: AnalyzeArgs, cfg: &Config, seed: u64) -> anyhow::Result<()> {
    let dir = Workdir::existing(cfg.require(args.dir.clone(), "dir")?)?;
    let figures = selected(cfg.pick(args.only.clone(), "only")?.as_deref())?;
    let bins = cfg.pick_or(args.bins, "bins", Binning::DEFAULT_LOG_BINS)?;
    if bins < 2 {
        return usage("--bins must be at least 2");
    }
    let tables = cfg.pick(args.tables.clone(), "tables")?.unwrap_or_else(|| dir.path("tables"));
    let nets = Nets::load(&dir)?;
    let ctx = Ctx {
        nets: &nets,
        bins,
        sample_edges: cfg.pick_or(args.sample_edges, "sample_edges", DEFAULT_SAMPLE_EDGES)?,
        ego_distance: cfg.pick_or(args.ego_distance, "ego_distance", DEFAULT_EGO_DISTANCE)?,
        sources: cfg.pick_or(args.sources, "sources", crate::components::DEFAULT_SOURCES)?,
        max_distance: cfg.pick_or(args.max_distance, "max_distance", crate::components::DEFAULT_MAX_DISTANCE)?,
        seed,
    };

    let rendered: Vec<anyhow::Result<String>> = figures
        .par_iter()
        .map(|f| {
            let mut text = format!("# {}\n# {}\n", f.name, f.about);
            (f.emit)(&ctx, &mut text).with_context(|| format!("computing {}", f.name))?;
            Ok(text)
        })
        .collect();
    fs::create_dir_all(&tables).with_context(|| format!("creating {}", tables.display()))?;
    let mut manifest = String::from("table\tfigure\tfile\tcontents\n");
    for (f, text) in figures.iter().zip(rendered) {
        let file = format!("{}.tsv", f.name);
        let path = tables.join(&file);
        fs::write(&path, text?).with_context(|| format!("writing {}", path.display()))?;
        writeln!(manifest, "{}\t{}\t{file}\t{}", f.name, f.id(), f.about)?;
    }
    fs::write(tables.join(MANIFEST), &manifest).context("writing manifest")?;
    println!("{} tables in {}", figures.len(), tables.display());
    Ok(())
}
