use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use callnet::components::connected_components;
use callnet::validate::{validate_dcn, validate_mcn_with, Correction, Marginals, ThresholdPolicy, Validated};
use callnet::CallNetwork;
use clap::Args;

use crate::artifacts::{
    create, giant, report_resources, size_row, NetFile, Workdir, DCN, MCN, SIZE_HEADER, SVDCN, SVGCDCN, SVGCMCN, SVMCN,
};
use crate::config::{existing, usage, Config};

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Working directory holding `dcn.tsv` and `mcn.tsv`.
    #[arg(long, short)]
    dir: Option<PathBuf>,
    /// Family-wise significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// `per-test` (alpha / N_T), `per-pair` (alpha / N_E) or `fixed` (alpha).
    #[arg(long)]
    correction: Option<Correction>,
    /// Calls the MCN test conditions on: `mcn` (calls on mutual edges) or `dcn` (all calls).
    #[arg(long)]
    mcn_marginals: Option<MarginalScope>,
    /// Planted tie list; recall of the SVMCN against it is reported.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginalScope {
    Mcn,
    Dcn,
}

impl FromStr for MarginalScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mcn" => Ok(MarginalScope::Mcn),
            "dcn" => Ok(MarginalScope::Dcn),
            other => Err(format!("unknown marginal scope {other:?} (expected mcn or dcn)")),
        }
    }
}

pub const SUMMARY: &str = "validation_summary.tsv";

/// Report file of the tests behind one validated network.
pub fn report_file(net: NetFile) -> String {
    format!("report_{}.tsv", net.label.to_lowercase())
}

fn mcn_marginals(scope: MarginalScope, dcn: &CallNetwork, mcn: &CallNetwork) -> anyhow::Result<Marginals> {
    Ok(match scope {
        MarginalScope::Mcn => Marginals::of_network(mcn),
        MarginalScope::Dcn => Marginals::from_source(dcn, mcn)?,
    })
}

fn save(dir: &Workdir, net: NetFile, tested: &CallNetwork, v: &Validated) -> anyhow::Result<()> {
    dir.write_network(net, &v.network)?;
    let path = dir.path(&report_file(net));
    let mut out = create(&path)?;
    v.report
        .write_to(&mut out, tested)
        .and_then(|()| std::io::Write::flush(&mut out))
        .with_context(|| format!("writing {}", path.display()))
}

/// True when the giant component holds every node.
fn spans_all(net: &CallNetwork) -> bool {
    connected_components(net).giant_size() == net.node_count()
}

/// Unordered pairs from a tab-separated truth file.
fn read_truth(path: &PathBuf) -> anyhow::Result<BTreeSet<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = BTreeSet::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        let Some((a, b)) = line.split_once('\t') else {
            anyhow::bail!("{}:{}: expected two tab-separated identifiers", path.display(), n + 1);
        };
        pairs.insert(if a < b { (a.to_owned(), b.to_owned()) } else { (b.to_owned(), a.to_owned()) });
    }
    Ok(pairs)
}

pub fn run(args: ValidateArgs, cfg: &Config) -> anyhow::Result<()> {
    let started = std::time::Instant::now();
    let dir = Workdir::existing(cfg.require(args.dir.clone(), "dir")?)?;
    let policy = ThresholdPolicy {
        alpha: cfg.pick_or(args.alpha, "alpha", ThresholdPolicy::default().alpha)?,
        correction: cfg.pick_or(args.correction, "correction", ThresholdPolicy::default().correction)?,
    };
    if !(policy.alpha > 0.0 && policy.alpha < 1.0) {
        return usage(format!("alpha must lie in (0, 1), got {}", policy.alpha));
    }
    let scope = cfg.pick_or(args.mcn_marginals, "mcn_marginals", MarginalScope::Mcn)?;
    let truth = match cfg.pick(args.truth.clone(), "truth")? {
        Some(p) => Some(read_truth(&existing(p)?)?),
        None => None,
    };
    for net in [DCN, MCN] {
        if !dir.has(net) {
            return usage(format!("{} missing; run `callnet build` first", dir.path(net.file).display()));
        }
    }
    let dcn = dir.read_network(DCN)?;
    let mcn = dir.read_network(MCN)?;

    let mut s = String::new();
    writeln!(s, "# alpha\t{}", policy.alpha)?;
    writeln!(s, "# correction\t{}", policy.correction.name())?;
    writeln!(s, "# mcn_marginals\t{}", if scope == MarginalScope::Mcn { "mcn" } else { "dcn" })?;
    let mut record = |net: NetFile, tested: &CallNetwork, v: &Validated| -> anyhow::Result<()> {
        save(&dir, net, tested, v)?;
        let r = &v.report;
        writeln!(
            s,
            "# p_b\t{}\t{:e}\tN={}\tN_T={}\tvalidated={}",
            net.label,
            r.threshold.p_b,
            r.total_calls,
            r.threshold.tests,
            r.validated_count()
        )?;
        Ok(())
    };

    // One network at a time, so only one test report is alive. The giant
    // component is extracted first and validated within; when it spans the
    // whole network the result is the same and is reused.
    let sv_dcn = validate_dcn(&dcn, &policy)?;
    record(SVDCN, &dcn, &sv_dcn)?;
    let sv_gc_dcn = if spans_all(&dcn) {
        record(SVGCDCN, &dcn, &sv_dcn)?;
        sv_dcn.network.clone()
    } else {
        let gc = giant(&dcn);
        let v = validate_dcn(&gc, &policy)?;
        record(SVGCDCN, &gc, &v)?;
        v.network
    };
    let sv_dcn = sv_dcn.network;

    let sv_mcn = validate_mcn_with(&mcn, &policy, &mcn_marginals(scope, &dcn, &mcn)?)?;
    record(SVMCN, &mcn, &sv_mcn)?;
    let sv_gc_mcn = if spans_all(&mcn) {
        record(SVGCMCN, &mcn, &sv_mcn)?;
        sv_mcn.network.clone()
    } else {
        let gc = giant(&mcn);
        let v = validate_mcn_with(&gc, &policy, &mcn_marginals(scope, &dcn, &gc)?)?;
        record(SVGCMCN, &gc, &v)?;
        v.network
    };
    let sv_mcn = sv_mcn.network;

    if let Some(truth) = &truth {
        let found = truth.iter().filter(|(a, b)| sv_mcn.edge_between(a, b).is_some()).count();
        let recall = if truth.is_empty() { f64::NAN } else { found as f64 / truth.len() as f64 };
        writeln!(s, "# recall\tSVMCN\t{found}/{}\t{recall}", truth.len())?;
    }
    writeln!(s, "{SIZE_HEADER}")?;
    for (label, net) in [
        (DCN.label, &dcn),
        (SVDCN.label, &sv_dcn),
        (SVGCDCN.label, &sv_gc_dcn),
        (MCN.label, &mcn),
        (SVMCN.label, &sv_mcn),
        (SVGCMCN.label, &sv_gc_mcn),
    ] {
        writeln!(s, "{}", size_row(label, net))?;
    }
    dir.write_text(SUMMARY, &s)?;
    print!("{s}");
    report_resources("validate", started);
    Ok(())
}
