use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use callnet::components::{connected_components, giant_component};
use callnet::CallNetwork;

use crate::config::usage;

/// One serialized network of the working directory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetFile {
    pub label: &'static str,
    pub file: &'static str,
}

pub const DCN: NetFile = NetFile { label: "DCN", file: "dcn.tsv" };
pub const MCN: NetFile = NetFile { label: "MCN", file: "mcn.tsv" };
pub const SVDCN: NetFile = NetFile { label: "SVDCN", file: "svdcn.tsv" };
pub const SVMCN: NetFile = NetFile { label: "SVMCN", file: "svmcn.tsv" };
/// Validated within the giant component of the DCN.
pub const SVGCDCN: NetFile = NetFile { label: "SVGCDCN", file: "svgcdcn.tsv" };
pub const SVGCMCN: NetFile = NetFile { label: "SVGCMCN", file: "svgcmcn.tsv" };

/// Networks in summary order.
pub const ALL: [NetFile; 6] = [DCN, SVDCN, SVGCDCN, MCN, SVMCN, SVGCMCN];

/// Directory holding the artifacts of one pipeline run.
#[derive(Clone, Debug)]
pub struct Workdir(PathBuf);

impl Workdir {
    /// Creates the directory when missing.
    pub fn create(path: PathBuf) -> anyhow::Result<Workdir> {
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Workdir(path))
    }

    /// A directory that must already exist.
    pub fn existing(path: PathBuf) -> anyhow::Result<Workdir> {
        if !path.is_dir() {
            return usage(format!("working directory {} does not exist", path.display()));
        }
        Ok(Workdir(path))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn has(&self, net: NetFile) -> bool {
        self.path(net.file).is_file()
    }

    pub fn read_network(&self, net: NetFile) -> anyhow::Result<CallNetwork> {
        let path = self.path(net.file);
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        CallNetwork::read_from(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
    }

    pub fn write_network(&self, net: NetFile, network: &CallNetwork) -> anyhow::Result<()> {
        let path = self.path(net.file);
        let mut out = create(&path)?;
        network.write_to(&mut out).with_context(|| format!("writing {}", path.display()))?;
        out.flush().with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_text(&self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::with_capacity(1 << 20, file))
}

/// Giant component, or the (empty) network itself when it has no nodes.
pub fn giant(net: &CallNetwork) -> CallNetwork {
    if net.is_empty() {
        return net.clone();
    }
    giant_component(net, &connected_components(net)).expect("nonempty network has a giant component")
}

/// Column line of the network size summary.
pub const SIZE_HEADER: &str = "network\tN_node\tN_edge\tN_comp\tN_GC_node\tN_GC_edge";

/// One size summary row: nodes, edges, components and giant-component size.
pub fn size_row(label: &str, net: &CallNetwork) -> String {
    let partition = connected_components(net);
    let gc = giant(net);
    let mut row = String::new();
    write!(
        row,
        "{label}\t{}\t{}\t{}\t{}\t{}",
        net.node_count(),
        net.edge_count(),
        partition.component_count(),
        gc.node_count(),
        gc.edge_count()
    )
    .unwrap();
    row
}

/// Peak resident set size of this process in KiB, where the platform exposes
/// it.
pub fn peak_memory_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Prints `<stage>: <s> s wall, peak memory <MiB>` to standard error. Kept
/// off the artifacts so that reruns stay byte-identical.
pub fn report_resources(stage: &str, started: std::time::Instant) {
    let peak = peak_memory_kib().map_or_else(|| "unknown".to_owned(), |k| format!("{:.1} MiB", k as f64 / 1024.0));
    eprintln!("{stage}: {:.2} s wall, peak memory {peak}", started.elapsed().as_secs_f64());
}
