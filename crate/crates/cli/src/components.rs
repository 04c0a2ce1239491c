use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use callnet::components::{component_size_distribution, connected_components, snowball_growth, write_size_histogram};
use clap::Args;

use crate::artifacts::{create, giant, Workdir, ALL, DCN, MCN};
use crate::config::{usage, Config};

#[derive(Args, Debug)]
pub struct ComponentsArgs {
    /// Working directory holding the networks.
    #[arg(long, short)]
    dir: Option<PathBuf>,
    /// Snowball sources drawn from each giant component.
    #[arg(long)]
    sources: Option<usize>,
    /// Largest snowball distance.
    #[arg(long)]
    max_distance: Option<usize>,
}

pub const SUBDIR: &str = "components";
pub const DEFAULT_SOURCES: usize = 10;
pub const DEFAULT_MAX_DISTANCE: usize = 20;

/// Writes, per network present, the size histogram without the giant
/// component (`<net>_sizes.tsv`) and, for the DCN and MCN, snowball curves
/// from their giant components (`snowball_gc<net>.tsv`).
pub fn run(args: ComponentsArgs, cfg: &Config, seed: u64) -> anyhow::Result<()> {
    let dir = Workdir::existing(cfg.require(args.dir.clone(), "dir")?)?;
    let sources = cfg.pick_or(args.sources, "sources", DEFAULT_SOURCES)?;
    let max_distance = cfg.pick_or(args.max_distance, "max_distance", DEFAULT_MAX_DISTANCE)?;
    if sources == 0 {
        return usage("--sources must be positive");
    }
    let present: Vec<_> = ALL.into_iter().filter(|n| dir.has(*n)).collect();
    if present.is_empty() {
        return usage(format!("no networks in {}; run `callnet build` first", dir.path("").display()));
    }
    let out = dir.path(SUBDIR);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut summary = String::from("network\tN_comp\tgiant_size\tnon_giant_components\n");
    for net_file in present {
        let net = dir.read_network(net_file)?;
        let partition = connected_components(&net);
        let hist = component_size_distribution(&partition, true);
        let name = net_file.label.to_lowercase();
        let path = out.join(format!("{name}_sizes.tsv"));
        let mut w = create(&path)?;
        write_size_histogram(&mut w, &hist)
            .and_then(|()| std::io::Write::flush(&mut w))
            .with_context(|| format!("writing {}", path.display()))?;
        writeln!(
            summary,
            "{}\t{}\t{}\t{}",
            net_file.label,
            partition.component_count(),
            partition.giant_size(),
            hist.values().sum::<usize>()
        )?;

        if [DCN, MCN].contains(&net_file) && !net.is_empty() {
            let gc = giant(&net);
            let snow = snowball_growth(&gc, sources.min(gc.node_count()), max_distance, seed)?;
            let path = out.join(format!("snowball_gc{name}.tsv"));
            let mut w = create(&path)?;
            snow.write_to(&mut w)
                .and_then(|()| std::io::Write::flush(&mut w))
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    fs::write(out.join("summary.tsv"), &summary).context("writing component summary")?;
    print!("{summary}");
    Ok(())
}
