use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use callnet::metrics::{clustering_coefficient, edge_overlap, pearson, spearman};
use callnet::netbuild::non_reciprocal_fraction;
use callnet::{CallNetwork, NetworkKind};
use clap::Args;

use crate::artifacts::{giant, size_row, Workdir, ALL, DCN, SIZE_HEADER};
use crate::config::{usage, Config};
use crate::validate::report_file;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Working directory holding the networks.
    #[arg(long, short)]
    dir: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn correlation(r: Result<f64, callnet::metrics::MetricError>) -> String {
    r.map_or_else(|_| "NA".to_owned(), |v| format!("{v:.4}"))
}

/// Mean degree, clustering, overlap and weight correlations of one network.
fn metrics_row(label: &str, net: &CallNetwork) -> String {
    let g = net.undirected();
    let n = g.node_count().max(1) as f64;
    let mean_k = 2.0 * g.edge_count() as f64 / n;
    let c = clustering_coefficient(net);
    let o = edge_overlap(net);
    let defined: Vec<f64> = o.edges.iter().filter_map(|e| e.overlap).collect();
    // Adding 0.0 maps a -0.0 mean to 0.0 in the printed table.
    let mean_o = defined.iter().sum::<f64>() / defined.len().max(1) as f64 + 0.0;
    let w_n: Vec<f64> = net.edges().iter().map(|e| e.calls() as f64).collect();
    let w_d: Vec<f64> = net.edges().iter().map(|e| e.duration() as f64).collect();
    format!(
        "{label}\t{mean_k:.4}\t{:.4}\t{:.4}\t{mean_o:.4}\t{}\t{}\t{}",
        c.average,
        c.zero_fraction,
        o.undefined,
        correlation(pearson(&w_n, &w_d)),
        correlation(spearman(&w_n, &w_d))
    )
}

/// Summary of every network in the working directory: sizes, validation
/// thresholds and headline metrics of the networks and their giant components.
pub fn run(args: ReportArgs, cfg: &Config) -> anyhow::Result<()> {
    let dir = Workdir::existing(cfg.require(args.dir.clone(), "dir")?)?;
    let present: Vec<_> = ALL.into_iter().filter(|n| dir.has(*n)).collect();
    if present.is_empty() {
        return usage(format!("no networks in {}; run `callnet build` first", dir.path("").display()));
    }
    let nets: Vec<(&str, CallNetwork)> =
        present.iter().map(|n| Ok((n.label, dir.read_network(*n)?))).collect::<anyhow::Result<_>>()?;

    let mut s = String::from("## sizes\n");
    writeln!(s, "{SIZE_HEADER}")?;
    for (label, net) in &nets {
        writeln!(s, "{}", size_row(label, net))?;
    }

    let reports: Vec<_> = present.iter().filter(|n| dir.path(&report_file(**n)).is_file()).collect();
    if !reports.is_empty() {
        writeln!(s, "## thresholds")?;
        writeln!(s, "network\tN\tN_T\talpha\tmode\tp_b")?;
        for net in reports {
            let text = fs::read_to_string(dir.path(&report_file(*net))).context("reading validation report")?;
            let header = |key: &str| {
                text.lines()
                    .take_while(|l| l.starts_with('#'))
                    .find_map(|l| l.strip_prefix(&format!("# {key}\t")))
                    .unwrap_or("NA")
                    .to_owned()
            };
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                net.label,
                header("N"),
                header("N_T"),
                header("alpha"),
                header("mode"),
                header("p_b")
            )?;
        }
    }

    writeln!(s, "## metrics")?;
    writeln!(s, "network\tmean_k\tmean_C\tzero_C_fraction\tmean_O\tundefined_O\tpearson_wN_wD\tspearman_wN_wD")?;
    for (label, net) in &nets {
        writeln!(s, "{}", metrics_row(label, net))?;
        if !label.starts_with("SVGC") {
            writeln!(s, "{}", metrics_row(&format!("GC{label}"), &giant(net)))?;
        }
    }
    if let Some((_, dcn)) = nets.iter().find(|(l, n)| *l == DCN.label && n.kind() == NetworkKind::Directed) {
        writeln!(s, "## reciprocity")?;
        writeln!(s, "non_reciprocal_fraction\t{:.4}", non_reciprocal_fraction(dcn))?;
    }
    if let Some(path) = cfg.pick(args.out.clone(), "out")? {
        fs::write(&path, &s).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{s}");
    Ok(())
}
