use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use callnet::ingest::{ingest_stream, parse_date_list, IngestConfig};
use callnet::netbuild::{build_dcn, build_mcn};
use clap::Args;

use crate::artifacts::{report_resources, size_row, Workdir, DCN, MCN, SIZE_HEADER};
use crate::config::{existing, usage, Config};

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// CDR file: caller, callee, start time, duration, status.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Working directory receiving the networks.
    #[arg(long, short)]
    dir: Option<PathBuf>,
    /// Single-byte field delimiter; `tab` for a tab.
    #[arg(long)]
    delimiter: Option<String>,
    /// The first row is a header.
    #[arg(long)]
    has_header: bool,
    /// Offset of the timezone deciding calendar days, in minutes.
    #[arg(long, allow_hyphen_values = true)]
    timezone_offset_minutes: Option<i32>,
    /// Comma-separated ISO-8601 dates whose calls are dropped.
    #[arg(long)]
    excluded_dates: Option<String>,
    /// Malformed rows tolerated before the build fails.
    #[arg(long)]
    max_parse_errors: Option<u64>,
}

pub const INGEST_REPORT: &str = "ingest_report.txt";
pub const SUMMARY: &str = "summary.tsv";

fn delimiter(text: &str) -> anyhow::Result<u8> {
    match text {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        s if s.len() == 1 => Ok(s.as_bytes()[0]),
        s => usage(format!("delimiter must be a single byte, got {s:?}")),
    }
}

fn ingest_config(args: &BuildArgs, cfg: &Config) -> anyhow::Result<IngestConfig> {
    let defaults = IngestConfig::default();
    let delim = match cfg.pick(args.delimiter.clone(), "delimiter")? {
        Some(s) => delimiter(&s)?,
        None => defaults.delimiter,
    };
    let excluded_dates = match cfg.pick(args.excluded_dates.clone(), "excluded_dates")? {
        Some(list) => match parse_date_list(&list) {
            Ok(d) => d,
            Err(e) => return usage(e.to_string()),
        },
        None => defaults.excluded_dates,
    };
    Ok(IngestConfig {
        delimiter: delim,
        has_header: args.has_header || cfg.pick_or(None, "has_header", false)?,
        timezone_offset_minutes: cfg.pick_or(
            args.timezone_offset_minutes,
            "timezone_offset_minutes",
            defaults.timezone_offset_minutes,
        )?,
        excluded_dates,
    })
}

pub fn run(args: BuildArgs, cfg: &Config) -> anyhow::Result<()> {
    let input = existing(cfg.require(args.input.clone(), "input")?)?;
    let dir = Workdir::create(cfg.require(args.dir.clone(), "dir")?)?;
    let icfg = ingest_config(&args, cfg)?;
    let max_errors = cfg.pick_or(args.max_parse_errors, "max_parse_errors", 0)?;

    let started = Instant::now();
    let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let outcome = ingest_stream(BufReader::with_capacity(1 << 20, file), &icfg)
        .with_context(|| format!("reading {}", input.display()))?;
    let mut report = Vec::new();
    outcome.write_report(&mut report)?;
    let report_path = dir.write_text(INGEST_REPORT, std::str::from_utf8(&report)?)?;
    let errors = outcome.parse.error_count();
    if errors > max_errors {
        anyhow::bail!(
            "{errors} malformed rows (limit {max_errors}); error report written to {}",
            report_path.display()
        );
    }
    if outcome.stats.is_empty() {
        eprintln!("warning: no valid calls in {}; the networks are empty", input.display());
    }

    let dcn = build_dcn(&outcome.stats);
    let mcn = build_mcn(&outcome.stats);
    drop(outcome);
    dir.write_network(DCN, &dcn)?;
    dir.write_network(MCN, &mcn)?;

    let summary = format!("{SIZE_HEADER}\n{}\n{}\n", size_row(DCN.label, &dcn), size_row(MCN.label, &mcn));
    dir.write_text(SUMMARY, &summary)?;
    print!("{summary}");
    report_resources("build", started);
    Ok(())
}
