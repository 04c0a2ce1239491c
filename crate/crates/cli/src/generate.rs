use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use callnet::ingest::write_records;
use callnet::synth::{
    generate_social_cdr, null_cdr_stream, random_ties, write_truth, Activity, BurstSpec, CdrText, SynthConfig,
};
use clap::Args;

use crate::artifacts::create;
use crate::config::{usage, Config};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// `null` (random matching only) or `social` (planted ties, a hotline and a robot).
    #[arg(long)]
    preset: Option<Preset>,
    /// Background calls.
    #[arg(long)]
    calls: Option<u64>,
    /// Background users (`u000000`, `u000001`, ...).
    #[arg(long)]
    users: Option<usize>,
    /// Output CDR file.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Ground-truth tie list; defaults to `<out>.truth.tsv` for the social preset.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Null,
    Social,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "null" => Ok(Preset::Null),
            "social" => Ok(Preset::Social),
            other => Err(format!("unknown preset {other:?} (expected null or social)")),
        }
    }
}

/// Social preset: heterogeneous activity plus planted structure.
const SOCIAL_GAMMA: f64 = 1.5;
const SOCIAL_XC: f64 = 40.0;
const SOCIAL_TIES: usize = 20;
const SOCIAL_TIE_CALLS: u64 = 40;
const SOCIAL_HOTLINE_CALLS: u64 = 2_000;
const SOCIAL_ROBOT_CALLS: u64 = 1_000;

fn synth_config(args: &GenerateArgs, cfg: &Config, preset: Preset, seed: u64) -> anyhow::Result<SynthConfig> {
    let defaults = SynthConfig::default();
    let social = preset == Preset::Social;
    let mut sc = SynthConfig {
        n_users: cfg.pick_or(args.users, "users", defaults.n_users)?,
        n_calls: cfg.pick_or(args.calls, "calls", defaults.n_calls)?,
        ..defaults
    };
    let gamma = cfg.pick::<f64>(None, "activity_gamma")?;
    let x_c = cfg.pick::<f64>(None, "activity_xc")?;
    sc.activity = match (gamma, x_c, social) {
        (None, None, false) => Activity::Uniform,
        (g, x, _) => Activity::TruncatedPowerLaw { gamma: g.unwrap_or(SOCIAL_GAMMA), x_c: x.unwrap_or(SOCIAL_XC) },
    };
    let n_ties = cfg.pick_or(None, "ties", if social { SOCIAL_TIES } else { 0 })?;
    let tie_calls = cfg.pick_or(None, "tie_calls", SOCIAL_TIE_CALLS)?;
    if n_ties > 0 {
        sc.ties = match random_ties(sc.n_users, n_ties, tie_calls, seed) {
            Ok(t) => t,
            Err(e) => return usage(e.to_string()),
        };
    }
    sc.hotlines = BurstSpec {
        count: cfg.pick_or(None, "hotlines", usize::from(social))?,
        calls: cfg.pick_or(None, "hotline_calls", SOCIAL_HOTLINE_CALLS)?,
    };
    sc.robots = BurstSpec {
        count: cfg.pick_or(None, "robots", usize::from(social))?,
        calls: cfg.pick_or(None, "robot_calls", SOCIAL_ROBOT_CALLS)?,
    };
    if let Err(e) = sc.validate() {
        return usage(e.to_string());
    }
    Ok(sc)
}

pub fn run(args: GenerateArgs, cfg: &Config, seed: u64) -> anyhow::Result<()> {
    let preset = cfg.pick_or(args.preset, "preset", Preset::Null)?;
    let out_path: PathBuf = cfg.require(args.out.clone(), "out")?;
    let truth_path = match cfg.pick(args.truth.clone(), "truth")? {
        Some(p) => Some(p),
        None if preset == Preset::Social => Some(out_path.with_extension("truth.tsv")),
        None => None,
    };
    let sc = synth_config(&args, cfg, preset, seed)?;

    let mut out = create(&out_path)?;
    let ties = if sc.ties.is_empty() && sc.hotlines.count == 0 && sc.robots.count == 0 {
        // Streams without holding the records.
        let mut text = CdrText::new(null_cdr_stream(&sc, seed)?);
        io::copy(&mut text, &mut out).with_context(|| format!("writing {}", out_path.display()))?;
        Vec::new()
    } else {
        let social = generate_social_cdr(&sc, seed)?;
        write_records(&mut out, &social.records).with_context(|| format!("writing {}", out_path.display()))?;
        social.ties
    };
    out.flush().with_context(|| format!("writing {}", out_path.display()))?;

    if let Some(path) = &truth_path {
        let mut t = create(path)?;
        write_truth(&mut t, &ties).and_then(|()| t.flush()).with_context(|| format!("writing {}", path.display()))?;
    }
    let total = sc.n_calls
        + sc.ties.iter().map(|t| 2 * t.calls_each_direction).sum::<u64>()
        + sc.hotlines.count as u64 * sc.hotlines.calls
        + sc.robots.count as u64 * sc.robots.calls;
    println!("records\t{total}");
    println!("cdr\t{}", out_path.display());
    if let Some(path) = truth_path {
        println!("truth\t{}\t{} ties", path.display(), ties.len());
    }
    Ok(())
}
