//! Log-binned density estimates and least-squares fits in log-log space:
//! pure power-law tail, exponentially truncated power law and bi-power law.

use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::metrics::{log_bin_index, log_edges};

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("no samples")]
    EmptySamples,
    #[error("sample {0} is not a positive finite number")]
    NonPositiveSample(f64),
    #[error("sample {0} is not an integer")]
    NonIntegerSample(f64),
    #[error("need at least 2 bins, got {0}")]
    TooFewBinsRequested(usize),
    #[error("insufficient data: {have} occupied bins in range, need {need}")]
    TooFewBins { need: usize, have: usize },
    #[error("{what} {value} lies outside the data support [{lo}, {hi}]")]
    OutOfSupport { what: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("no convergence from any of {starts} starting points ({detail})")]
    NoConvergence { starts: usize, detail: String },
    #[error("no breakpoint candidate leaves {need} occupied bins on both sides")]
    NoBreakpoint { need: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdfBin {
    pub lo: f64,
    pub hi: f64,
    /// Geometric mean of the bin edges.
    pub x: f64,
    pub density: f64,
    pub count: u64,
    /// `hi - lo` for continuous data; the number of integers in `[lo, hi)`
    /// for integer data.
    pub width: f64,
}

/// Log-binned probability density. Bins are contiguous and include empty
/// ones; fits only see occupied bins.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalPdf {
    pub bins: Vec<PdfBin>,
    pub total: u64,
}

/// Natural-log width given to the single bin of a degenerate sample.
const DEGENERATE_LOG_WIDTH: f64 = 0.1;

impl EmpiricalPdf {
    pub fn occupied(&self) -> impl Iterator<Item = &PdfBin> {
        self.bins.iter().filter(|b| b.count > 0)
    }

    /// `sum p(x) dx`; 1 up to rounding for a pdf built from samples.
    pub fn integral(&self) -> f64 {
        self.bins.iter().map(|b| b.density * b.width).sum()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.bins.first().map_or(f64::NAN, |b| b.lo), self.bins.last().map_or(f64::NAN, |b| b.hi))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x\tdensity\tbin_lo\tbin_hi\twidth\tcount")?;
        for b in &self.bins {
            writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", b.x, b.density, b.lo, b.hi, b.width, b.count)?;
        }
        Ok(())
    }

    /// Reads the table written by [`EmpiricalPdf::write_to`]. Lines starting
    /// with `#` are skipped.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self, FitError> {
        let mut bins = Vec::new();
        let mut seen_header = false;
        for (k, line) in input.lines().enumerate() {
            let line = line.map_err(|e| FitError::Parse { line: k + 1, msg: e.to_string() })?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_header {
                seen_header = true;
                if line.starts_with("x\t") {
                    continue;
                }
            }
            let bad = |msg: &str| FitError::Parse { line: k + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad("expected 6 tab-separated fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let bin = PdfBin {
                x: num(f[0])?,
                density: num(f[1])?,
                lo: num(f[2])?,
                hi: num(f[3])?,
                width: num(f[4])?,
                count: f[5].parse().map_err(|_| bad("bad count"))?,
            };
            if !(bin.lo > 0.0 && bin.hi > bin.lo && bin.density >= 0.0 && bin.width >= 0.0) {
                return Err(bad("bin must satisfy 0 < lo < hi, width >= 0 and density >= 0"));
            }
            bins.push(bin);
        }
        let total = bins.iter().map(|b| b.count).sum();
        Ok(EmpiricalPdf { bins, total })
    }
}

/// Whether samples are real-valued or integer counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Support {
    #[default]
    Continuous,
    /// Bins over `[min, max + 1)`; each bin's density is its count divided
    /// by the number of integers it contains, and its `x` is the geometric
    /// mean of the smallest and largest of them.
    Integer,
}

/// Log-binned density of positive samples over `[min, max]`.
///
/// A sample whose values are all equal yields one bin of log-width 0.1
/// centred (geometrically) on that value.
pub fn empirical_pdf(samples: &[f64], n_bins: usize) -> Result<EmpiricalPdf, FitError> {
    empirical_pdf_with(samples, n_bins, Support::Continuous)
}

pub fn empirical_pdf_with(samples: &[f64], n_bins: usize, support: Support) -> Result<EmpiricalPdf, FitError> {
    if n_bins < 2 {
        return Err(FitError::TooFewBinsRequested(n_bins));
    }
    if samples.is_empty() {
        return Err(FitError::EmptySamples);
    }
    if let Some(&bad) = samples.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(FitError::NonPositiveSample(bad));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = samples.len() as u64;
    if support == Support::Integer {
        return integer_pdf(samples, lo, hi, n_bins);
    }
    if lo == hi {
        let half = (DEGENERATE_LOG_WIDTH / 2.0).exp();
        let (a, b) = (lo / half, lo * half);
        let bin = PdfBin { lo: a, hi: b, x: lo, density: 1.0 / (b - a), count: total, width: b - a };
        return Ok(EmpiricalPdf { bins: vec![bin], total });
    }
    let edges = log_edges(lo, hi, n_bins);
    let mut counts = vec![0u64; n_bins];
    for &v in samples {
        counts[log_bin_index(v, lo, hi, n_bins)] += 1;
    }
    let bins = (0..n_bins)
        .map(|k| {
            let (a, b) = (edges[k], edges[k + 1]);
            let density = counts[k] as f64 / (total as f64 * (b - a));
            PdfBin { lo: a, hi: b, x: (a * b).sqrt(), density, count: counts[k], width: b - a }
        })
        .collect();
    Ok(EmpiricalPdf { bins, total })
}

fn integer_pdf(samples: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<EmpiricalPdf, FitError> {
    if let Some(&bad) = samples.iter().find(|v| v.fract() != 0.0) {
        return Err(FitError::NonIntegerSample(bad));
    }
    let edges = log_edges(lo, hi + 1.0, n_bins);
    // Bin k owns the integers in [ceil(edge_k), ceil(edge_k+1)); empty
    // ranges are dropped.
    let mut owned: Vec<(f64, f64, f64, f64)> = Vec::new();
    for k in 0..n_bins {
        let (a, b) = (edges[k], edges[k + 1]);
        let (m0, m1) = (a.ceil(), b.ceil() - 1.0);
        if m1 >= m0 {
            owned.push((a, b, m0, m1));
        }
    }
    let mut counts = vec![0u64; owned.len()];
    for &v in samples {
        counts[owned.partition_point(|o| o.2 <= v) - 1] += 1;
    }
    let total = samples.len() as u64;
    let bins = owned
        .iter()
        .zip(counts)
        .map(|(&(a, b, m0, m1), count)| {
            let width = m1 - m0 + 1.0;
            PdfBin { lo: a, hi: b, x: (m0 * m1).sqrt(), density: count as f64 / (total as f64 * width), count, width }
        })
        .collect();
    Ok(EmpiricalPdf { bins, total })
}

/// Bin selection by representative `x`; `None` bounds are open.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitRange {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl FitRange {
    pub fn full() -> Self {
        Self::default()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo.is_none_or(|l| x >= l) && self.hi.is_none_or(|h| x <= h)
    }
}

/// Per-bin residual weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Weighting {
    /// Every occupied bin counts once.
    #[default]
    Uniform,
    /// Residuals weighted by bin count.
    Counts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    TruncatedPowerLaw,
    PowerLawTail,
    BiPowerLaw,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::TruncatedPowerLaw => "truncated_powerlaw",
            Model::PowerLawTail => "powerlaw_tail",
            Model::BiPowerLaw => "bipowerlaw",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: &'static str,
    pub value: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: Model,
    pub params: Vec<Param>,
    /// Smallest and largest representative `x` of the bins used.
    pub range: (f64, f64),
    /// Residual sum of squares of `ln p`.
    pub rss: f64,
    pub bins: usize,
    pub iterations: usize,
    /// Bi-power law only: exponents closer than [`DEGENERATE_EXPONENT_GAP`].
    pub degenerate: bool,
}

/// Exponent gap below which a bi-power-law fit is reported as single-regime.
pub const DEGENERATE_EXPONENT_GAP: f64 = 0.1;

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn std_err(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.std_err)
    }
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model\t{}", self.model.name())?;
        for p in &self.params {
            writeln!(f, "param\t{}\t{}\t{}", p.name, p.value, p.std_err)?;
        }
        writeln!(f, "rss\t{}", self.rss)?;
        writeln!(f, "range\t{}\t{}", self.range.0, self.range.1)?;
        writeln!(f, "bins\t{}", self.bins)?;
        writeln!(f, "iterations\t{}", self.iterations)?;
        if self.model == Model::BiPowerLaw {
            writeln!(f, "degenerate\t{}", self.degenerate)?;
        }
        Ok(())
    }
}

struct Points {
    lx: Vec<f64>,
    x: Vec<f64>,
    ly: Vec<f64>,
    w: Vec<f64>,
}

fn select(pdf: &EmpiricalPdf, keep: impl Fn(&PdfBin) -> bool, weighting: Weighting) -> Points {
    let mut p = Points { lx: Vec::new(), x: Vec::new(), ly: Vec::new(), w: Vec::new() };
    for b in pdf.occupied().filter(|b| keep(b)) {
        p.x.push(b.x);
        p.lx.push(b.x.ln());
        p.ly.push(b.density.ln());
        p.w.push(match weighting {
            Weighting::Uniform => 1.0,
            Weighting::Counts => b.count as f64,
        });
    }
    p
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_se: f64,
    intercept_se: f64,
    rss: f64,
}

/// Weighted least-squares line through `(x, y)`; needs two distinct x.
fn fit_line(x: &[f64], y: &[f64], w: &[f64]) -> Line {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((&a, &b), &c) in x.iter().zip(y).zip(w) {
        sxx += c * (a - mx) * (a - mx);
        sxy += c * (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).zip(w).map(|((&a, &b), &c)| c * (b - intercept - slope * a).powi(2)).sum();
    let dof = x.len().saturating_sub(2);
    let s2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let slope_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / sw + mx * mx / sxx)).sqrt();
    Line { slope, intercept, slope_se, intercept_se, rss }
}

fn x_range(p: &Points) -> (f64, f64) {
    (p.x.first().copied().unwrap_or(f64::NAN), p.x.last().copied().unwrap_or(f64::NAN))
}

/// Fits `p(x) ~ x^-(1+alpha)` to occupied bins with `x >= x_min`.
pub fn fit_powerlaw_tail(pdf: &EmpiricalPdf, x_min: f64) -> Result<FitResult, FitError> {
    fit_powerlaw_tail_with(pdf, x_min, Weighting::Uniform)
}

pub fn fit_powerlaw_tail_with(pdf: &EmpiricalPdf, x_min: f64, weighting: Weighting) -> Result<FitResult, FitError> {
    const NEED: usize = 3;
    let (lo, hi) = pdf.support();
    if x_min.is_nan() || x_min > hi {
        return Err(FitError::OutOfSupport { what: "x_min", value: x_min, lo, hi });
    }
    let p = select(pdf, |b| b.x >= x_min, weighting);
    if p.x.len() < NEED {
        return Err(FitError::TooFewBins { need: NEED, have: p.x.len() });
    }
    let line = fit_line(&p.lx, &p.ly, &p.w);
    Ok(FitResult {
        model: Model::PowerLawTail,
        params: vec![
            Param { name: "alpha", value: -line.slope - 1.0, std_err: line.slope_se },
            Param { name: "c", value: line.intercept.exp(), std_err: line.intercept.exp() * line.intercept_se },
        ],
        range: x_range(&p),
        rss: line.rss,
        bins: p.x.len(),
        iterations: 0,
        degenerate: false,
    })
}

/// Fits `p(x) ~ x^-alpha1` below and `x^-alpha2` above a breakpoint chosen
/// among the bin edges within [`BREAK_SEARCH_BINS`] bins of `hint`.
pub fn fit_bipowerlaw(pdf: &EmpiricalPdf, hint: f64) -> Result<FitResult, FitError> {
    fit_bipowerlaw_with(pdf, hint, FitRange::full(), Weighting::Uniform)
}

pub const BREAK_SEARCH_BINS: usize = 5;

pub fn fit_bipowerlaw_with(
    pdf: &EmpiricalPdf,
    hint: f64,
    range: FitRange,
    weighting: Weighting,
) -> Result<FitResult, FitError> {
    const NEED_PER_SIDE: usize = 3;
    let (lo, hi) = pdf.support();
    if !(hint > lo && hint < hi) {
        return Err(FitError::OutOfSupport { what: "breakpoint hint", value: hint, lo, hi });
    }
    let at = pdf.bins.iter().position(|b| hint < b.hi).expect("hint below the last edge");
    // Interior edges are bins[k].lo for k in 1..len.
    let first = at.saturating_sub(BREAK_SEARCH_BINS).max(1);
    let last = (at + 1 + BREAK_SEARCH_BINS).min(pdf.bins.len() - 1);
    let mut best: Option<(f64, f64, Line, Line, usize, usize)> = None;
    for k in first..=last {
        let edge = pdf.bins[k].lo;
        let left = select(pdf, |b| b.hi <= edge && range.contains(b.x), weighting);
        let right = select(pdf, |b| b.lo >= edge && range.contains(b.x), weighting);
        if left.x.len() < NEED_PER_SIDE || right.x.len() < NEED_PER_SIDE {
            continue;
        }
        let (l, r) = (fit_line(&left.lx, &left.ly, &left.w), fit_line(&right.lx, &right.ly, &right.w));
        let total = l.rss + r.rss;
        if best.as_ref().is_none_or(|b| total < b.1) {
            best = Some((edge, total, l, r, left.x.len(), right.x.len()));
        }
    }
    let (edge, rss, l, r, nl, nr) = best.ok_or(FitError::NoBreakpoint { need: NEED_PER_SIDE })?;
    let all = select(pdf, |b| range.contains(b.x), weighting);
    let (alpha1, alpha2) = (-l.slope, -r.slope);
    Ok(FitResult {
        model: Model::BiPowerLaw,
        params: vec![
            Param { name: "alpha1", value: alpha1, std_err: l.slope_se },
            Param { name: "alpha2", value: alpha2, std_err: r.slope_se },
            Param { name: "breakpoint", value: edge, std_err: f64::NAN },
        ],
        range: x_range(&all),
        rss,
        bins: nl + nr,
        iterations: last + 1 - first,
        degenerate: (alpha1 - alpha2).abs() < DEGENERATE_EXPONENT_GAP,
    })
}

/// Levenberg-Marquardt settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative parameter change that counts as converged.
    pub tolerance: f64,
    pub weighting: Weighting,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iterations: 500, tolerance: 1e-8, weighting: Weighting::Uniform }
    }
}

pub const GAMMA_STARTS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];

/// Fits `p(x) = a x^-gamma exp(-x / x_c)` by least squares on `ln p`.
pub fn fit_truncated_powerlaw(pdf: &EmpiricalPdf, range: FitRange) -> Result<FitResult, FitError> {
    fit_truncated_powerlaw_with(pdf, range, LmOptions::default())
}

struct LmRun {
    theta: [f64; 3],
    rss: f64,
    iterations: usize,
    jtj: [[f64; 3]; 3],
}

/// Model `ln p = theta0 - theta1 ln x - x exp(-theta2)` with
/// `theta = (ln a, gamma, ln x_c)`.
fn lm_residuals(p: &Points, t: &[f64; 3]) -> (Vec<f64>, f64) {
    let inv_xc = (-t[2]).exp();
    let r: Vec<f64> = (0..p.x.len()).map(|k| p.ly[k] - (t[0] - t[1] * p.lx[k] - p.x[k] * inv_xc)).collect();
    let rss = r.iter().zip(&p.w).map(|(v, w)| w * v * v).sum();
    (r, rss)
}

fn lm_normal(p: &Points, t: &[f64; 3], r: &[f64]) -> ([[f64; 3]; 3], [f64; 3]) {
    let inv_xc = (-t[2]).exp();
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    for k in 0..p.x.len() {
        let j = [1.0, -p.lx[k], p.x[k] * inv_xc];
        for a in 0..3 {
            jtr[a] += p.w[k] * j[a] * r[k];
            for b in 0..3 {
                jtj[a][b] += p.w[k] * j[a] * j[b];
            }
        }
    }
    (jtj, jtr)
}

/// Solves a 3x3 system by Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let piv = (c..3).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[piv][c] == 0.0 || !m[piv][c].is_finite() {
            return None;
        }
        m.swap(c, piv);
        v.swap(c, piv);
        for r in c + 1..3 {
            let f = m[r][c] / m[c][c];
            for k in c..3 {
                m[r][k] -= f * m[c][k];
            }
            v[r] -= f * v[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..3).rev() {
        let s: f64 = (c + 1..3).map(|k| m[c][k] * x[k]).sum();
        x[c] = (v[c] - s) / m[c][c];
    }
    Some(x)
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut inv = [[0.0; 3]; 3];
    for c in 0..3 {
        let mut e = [0.0; 3];
        e[c] = 1.0;
        let col = solve3(m, e)?;
        for r in 0..3 {
            inv[r][c] = col[r];
        }
    }
    Some(inv)
}

fn levenberg_marquardt(p: &Points, start: [f64; 3], opts: &LmOptions) -> Option<LmRun> {
    let mut t = start;
    let (mut r, mut rss) = lm_residuals(p, &t);
    let mut lambda = 1e-3;
    for it in 1..=opts.max_iterations {
        let (jtj, jtr) = lm_normal(p, &t, &r);
        let mut step = None;
        while lambda < 1e16 {
            let mut a = jtj;
            for d in 0..3 {
                a[d][d] += lambda * jtj[d][d].max(1e-300);
            }
            if let Some(delta) = solve3(a, jtr) {
                let cand = [t[0] + delta[0], t[1] + delta[1], t[2] + delta[2]];
                let (cr, crss) = lm_residuals(p, &cand);
                if crss.is_finite() && crss <= rss {
                    step = Some((delta, cand, cr, crss));
                    break;
                }
            }
            lambda *= 10.0;
        }
        let (delta, cand, cr, crss) = step?;
        lambda = (lambda / 10.0).max(1e-12);
        let converged = (0..3).all(|d| delta[d].abs() <= opts.tolerance * (t[d].abs() + opts.tolerance));
        t = cand;
        r = cr;
        rss = crss;
        if converged {
            let (jtj, _) = lm_normal(p, &t, &r);
            return Some(LmRun { theta: t, rss, iterations: it, jtj });
        }
    }
    None
}

/// Median of the binned distribution: the first bin where the cumulative
/// mass reaches one half.
fn pdf_median(pdf: &EmpiricalPdf, keep: impl Fn(&PdfBin) -> bool) -> f64 {
    let bins: Vec<&PdfBin> = pdf.occupied().filter(|b| keep(b)).collect();
    let mass: f64 = bins.iter().map(|b| b.density * b.width).sum();
    let mut acc = 0.0;
    for b in &bins {
        acc += b.density * b.width;
        if acc >= mass / 2.0 {
            return b.x;
        }
    }
    bins.last().map_or(f64::NAN, |b| b.x)
}

/// Fits a truncated power law with Levenberg-Marquardt from the start grid
/// `gamma in GAMMA_STARTS` x `x_c in {median, 3 median, max / 3}`; the
/// converged start with the smallest residual wins, ties by grid order.
pub fn fit_truncated_powerlaw_with(
    pdf: &EmpiricalPdf,
    range: FitRange,
    opts: LmOptions,
) -> Result<FitResult, FitError> {
    const NEED: usize = 4;
    let p = select(pdf, |b| range.contains(b.x), opts.weighting);
    if p.x.len() < NEED {
        return Err(FitError::TooFewBins { need: NEED, have: p.x.len() });
    }
    let median = pdf_median(pdf, |b| range.contains(b.x));
    let max = *p.x.last().unwrap();
    let xc_starts = [median, 3.0 * median, max / 3.0];
    let sw: f64 = p.w.iter().sum();
    let mut best: Option<LmRun> = None;
    let mut starts = 0;
    for &xc in &xc_starts {
        for &gamma in &GAMMA_STARTS {
            starts += 1;
            let ln_a = (0..p.x.len()).map(|k| p.w[k] * (p.ly[k] + gamma * p.lx[k] + p.x[k] / xc)).sum::<f64>() / sw;
            if let Some(run) = levenberg_marquardt(&p, [ln_a, gamma, xc.ln()], &opts) {
                if best.as_ref().is_none_or(|b| run.rss < b.rss) {
                    best = Some(run);
                }
            }
        }
    }
    let run = best.ok_or_else(|| FitError::NoConvergence {
        starts,
        detail: format!("{} bins, x in [{}, {}]", p.x.len(), p.x[0], max),
    })?;
    let dof = p.x.len() - 3;
    let s2 = if dof > 0 { run.rss / dof as f64 } else { 0.0 };
    let cov = invert3(run.jtj).unwrap_or([[f64::NAN; 3]; 3]);
    let se = |d: usize| (s2 * cov[d][d]).sqrt();
    let (a, xc) = (run.theta[0].exp(), run.theta[2].exp());
    Ok(FitResult {
        model: Model::TruncatedPowerLaw,
        params: vec![
            Param { name: "a", value: a, std_err: a * se(0) },
            Param { name: "gamma", value: run.theta[1], std_err: se(1) },
            Param { name: "x_c", value: xc, std_err: xc * se(2) },
        ],
        range: x_range(&p),
        rss: run.rss,
        bins: p.x.len(),
        iterations: run.iterations,
        degenerate: false,
    })
}
