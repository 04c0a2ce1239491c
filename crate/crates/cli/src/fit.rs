use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use callnet::fitting::{
    fit_bipowerlaw_with, fit_powerlaw_tail_with, fit_truncated_powerlaw_with, EmpiricalPdf, FitRange, FitResult,
    LmOptions, PdfBin, Weighting,
};
use clap::Args;

use crate::config::{existing, usage, Config};

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Density table: an `analyze` distribution table or a plain pdf table.
    #[arg(long, short)]
    table: Option<PathBuf>,
    /// `truncated` (a x^-gamma e^-x/x_c), `tail` (power-law tail) or `bipower`.
    #[arg(long)]
    model: Option<FitModel>,
    /// Lower end of the power-law tail fit; defaults to the first bin.
    #[arg(long)]
    x_min: Option<f64>,
    /// Breakpoint guess for the bi-power-law fit.
    #[arg(long)]
    hint: Option<f64>,
    /// Fit range lower bound on bin representatives.
    #[arg(long)]
    fit_lo: Option<f64>,
    /// Fit range upper bound on bin representatives.
    #[arg(long)]
    fit_hi: Option<f64>,
    /// Residual weighting: `uniform` (one per occupied bin) or `counts`.
    #[arg(long)]
    weighting: Option<WeightingArg>,
    /// Only rows of this network.
    #[arg(long)]
    network: Option<String>,
    /// Only rows of this series.
    #[arg(long)]
    series: Option<String>,
    /// Write the fit blocks here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitModel {
    Truncated,
    Tail,
    BiPower,
}

impl FromStr for FitModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "truncated" => Ok(FitModel::Truncated),
            "tail" => Ok(FitModel::Tail),
            "bipower" => Ok(FitModel::BiPower),
            other => Err(format!("unknown model {other:?} (expected truncated, tail or bipower)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightingArg(Weighting);

impl FromStr for WeightingArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(WeightingArg(Weighting::Uniform)),
            "counts" => Ok(WeightingArg(Weighting::Counts)),
            other => Err(format!("unknown weighting {other:?} (expected uniform or counts)")),
        }
    }
}

const PDF_FIELDS: [&str; 6] = ["x", "density", "bin_lo", "bin_hi", "width", "count"];

/// Rows of one (network, series, ...) group.
#[derive(Debug)]
pub struct Group {
    /// `column=value` pairs of the non-density columns.
    pub key: Vec<(String, String)>,
    pub pdf: EmpiricalPdf,
}

/// Splits a density table into groups by its non-density columns, in order
/// of first appearance. Lines starting with `#` are skipped.
pub fn read_groups(text: &str) -> anyhow::Result<Vec<Group>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let Some((_, header)) = lines.next() else {
        anyhow::bail!("empty table");
    };
    let columns: Vec<&str> = header.split('\t').collect();
    let mut pos = [0usize; 6];
    for (slot, name) in pos.iter_mut().zip(PDF_FIELDS) {
        *slot = columns.iter().position(|c| *c == name).with_context(|| format!("missing column {name:?}"))?;
    }
    let key_cols: Vec<usize> = (0..columns.len()).filter(|c| !pos.contains(c)).collect();

    let mut groups: Vec<Group> = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() {
            anyhow::bail!("line {}: expected {} fields, got {}", n + 1, columns.len(), fields.len());
        }
        let num = |k: usize| -> anyhow::Result<f64> {
            fields[pos[k]].parse().with_context(|| format!("line {}: bad {}", n + 1, PDF_FIELDS[k]))
        };
        let bin = PdfBin {
            x: num(0)?,
            density: num(1)?,
            lo: num(2)?,
            hi: num(3)?,
            width: num(4)?,
            count: fields[pos[5]].parse().with_context(|| format!("line {}: bad count", n + 1))?,
        };
        let key: Vec<(String, String)> =
            key_cols.iter().map(|&c| (columns[c].to_owned(), fields[c].to_owned())).collect();
        match groups.iter_mut().find(|g| g.key == key) {
            Some(g) => g.pdf.bins.push(bin),
            None => groups.push(Group { key, pdf: EmpiricalPdf { bins: vec![bin], total: 0 } }),
        }
    }
    for g in &mut groups {
        g.pdf.total = g.pdf.bins.iter().map(|b| b.count).sum();
    }
    Ok(groups)
}

fn matches(group: &Group, column: &str, wanted: Option<&str>) -> bool {
    wanted.is_none_or(|w| group.key.iter().any(|(c, v)| c == column && v == w))
}

pub fn run(args: FitArgs, cfg: &Config) -> anyhow::Result<()> {
    let table = existing(cfg.require(args.table.clone(), "table")?)?;
    let model = cfg.pick_or(args.model, "model", FitModel::Truncated)?;
    let weighting = cfg.pick_or(args.weighting, "weighting", WeightingArg(Weighting::Uniform))?.0;
    let range = FitRange { lo: cfg.pick(args.fit_lo, "fit_lo")?, hi: cfg.pick(args.fit_hi, "fit_hi")? };
    if let (Some(lo), Some(hi)) = (range.lo, range.hi) {
        if lo >= hi || lo.is_nan() || hi.is_nan() {
            return usage(format!("empty fit range [{lo}, {hi}]"));
        }
    }
    let x_min = cfg.pick(args.x_min, "x_min")?;
    let hint = cfg.pick(args.hint, "hint")?;
    if model == FitModel::BiPower && hint.is_none() {
        return usage("the bipower model needs --hint");
    }
    let network = cfg.pick(args.network.clone(), "network")?;
    let series = cfg.pick(args.series.clone(), "series")?;

    let text = fs::read_to_string(&table).with_context(|| format!("reading {}", table.display()))?;
    let groups = read_groups(&text).with_context(|| format!("parsing {}", table.display()))?;
    let groups: Vec<Group> = groups
        .into_iter()
        .filter(|g| matches(g, "network", network.as_deref()) && matches(g, "series", series.as_deref()))
        .collect();
    if groups.is_empty() {
        anyhow::bail!("no rows of {} match the network/series selection", table.display());
    }

    let mut out = String::new();
    for g in &groups {
        let label: Vec<String> = g.key.iter().map(|(c, v)| format!("{c}={v}")).collect();
        let label = if label.is_empty() { "all".to_owned() } else { label.join(" ") };
        let result: FitResult = match model {
            FitModel::Truncated => {
                fit_truncated_powerlaw_with(&g.pdf, range, LmOptions { weighting, ..LmOptions::default() })
            }
            FitModel::Tail => {
                let lo = x_min.unwrap_or_else(|| g.pdf.support().0);
                fit_powerlaw_tail_with(&g.pdf, lo, weighting)
            }
            FitModel::BiPower => fit_bipowerlaw_with(&g.pdf, hint.unwrap(), range, weighting),
        }
        .with_context(|| format!("fitting {label} of {}", table.display()))?;
        // File name only, so reruns from other directories match byte for byte.
        writeln!(out, "# table\t{}", table.file_name().unwrap_or_default().to_string_lossy())?;
        writeln!(out, "# group\t{label}")?;
        writeln!(out, "{result}")?;
    }
    match cfg.pick(args.out.clone(), "out")? {
        Some(path) => fs::write(&path, &out).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{out}"),
    }
    Ok(())
}
