//! Statistical validation of directed links against random caller-receiver
//! matching.
//!
//! Under the null hypothesis the `N_jr` calls received by `j` are drawn at
//! random from all `N` calls of the network, `N_ic` of which were placed by
//! `i`. The number of calls from `i` to `j` is then hypergeometric, and a link
//! is validated when the upper-tail probability of the observed count falls
//! below the Bonferroni threshold `p_b = alpha / N_T`.
//!
//! Probabilities are evaluated with Loader's saddle-point expansion (deviance
//! terms plus Stirling remainders) in log space, which keeps full relative
//! precision for `N` in the tens of millions where differences of plain
//! log-factorials would lose most of it.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::netbuild::{CallNetwork, NetworkKind};

#[derive(Debug, Error, PartialEq)]
pub enum ValidateError {
    #[error("invalid hypergeometric parameters: N={n}, N_ic={n_ic}, N_jr={n_jr}")]
    InvalidParameters { n: u64, n_ic: u64, n_jr: u64 },
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("expected a {expected} network")]
    WrongKind { expected: &'static str },
    #[error("node {0} of the tested network is missing from the marginal source")]
    MissingNode(String),
}

// Stirling-series remainder ln(n!) - (n + 1/2) ln n + n - ln sqrt(2 pi) at
// integer n <= 15. Digits beyond f64 precision are kept as tabulated.
#[allow(clippy::excessive_precision)]
const STIRLERR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_219_67,
    0.041_340_695_955_409_294_093_82,
    0.027_677_925_684_998_339_148_79,
    0.020_790_672_103_765_093_111_52,
    0.016_644_691_189_821_192_163_19,
    0.013_876_128_823_070_747_998_75,
    0.011_896_709_945_891_770_095_06,
    0.010_411_265_261_972_096_497_48,
    0.009_255_462_182_712_732_917_729,
    0.008_330_563_433_362_871_256_469,
    0.007_573_675_487_951_840_794_972,
    0.006_942_840_107_209_529_865_664,
    0.006_408_994_188_004_207_068_44,
    0.005_951_370_112_758_847_735_624,
    0.005_554_733_551_962_801_371_039,
];

fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return STIRLERR_SMALL[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, accurate when `x` is close to `np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        if s.abs() < f64::MIN_POSITIVE {
            return s;
        }
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
    }
    x * (x / np).ln() + np - x
}

/// Log of the binomial probability of `x` successes in `n` trials.
fn ln_binom_raw(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0.0 {
        if n == 0.0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
    }
    if x == n {
        return if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
    }
    if x < 0.0 || x > n {
        return f64::NEG_INFINITY;
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / n).ln_1p();
    lc - 0.5 * lf
}

fn check_params(n: u64, n_ic: u64, n_jr: u64) -> Result<(), ValidateError> {
    if n == 0 || n_ic > n || n_jr > n {
        Err(ValidateError::InvalidParameters { n, n_ic, n_jr })
    } else {
        Ok(())
    }
}

/// Support `[lo, hi]` of the number of `i -> j` calls.
fn support(n: u64, n_ic: u64, n_jr: u64) -> (u64, u64) {
    ((n_ic + n_jr).saturating_sub(n), n_ic.min(n_jr))
}

fn ln_pmf_unchecked(x: u64, n: u64, n_ic: u64, n_jr: u64) -> f64 {
    // The distribution is symmetric in its marginals; a canonical order makes
    // the rounding symmetric too.
    let (n_ic, n_jr) = (n_ic.max(n_jr), n_ic.min(n_jr));
    let (lo, hi) = support(n, n_ic, n_jr);
    if x < lo || x > hi {
        return f64::NEG_INFINITY;
    }
    if n_jr == 0 {
        return 0.0;
    }
    let (nf, r, m) = (n as f64, n_ic as f64, n_jr as f64);
    let b = nf - r;
    let xf = x as f64;
    let p = m / nf;
    let q = (nf - m) / nf;
    ln_binom_raw(xf, r, p, q) + ln_binom_raw(m - xf, b, p, q) - ln_binom_raw(m, nf, p, q)
}

/// Natural log of `H(X | N, N_ic, N_jr)`.
pub fn ln_hypergeom_pmf(x: u64, n: u64, n_ic: u64, n_jr: u64) -> Result<f64, ValidateError> {
    check_params(n, n_ic, n_jr)?;
    Ok(ln_pmf_unchecked(x, n, n_ic, n_jr))
}

/// Probability of exactly `x` calls from `i` to `j` under random matching:
/// `C(N_ic, x) C(N - N_ic, N_jr - x) / C(N, N_jr)`. Zero outside the support.
pub fn hypergeom_pmf(x: u64, n: u64, n_ic: u64, n_jr: u64) -> Result<f64, ValidateError> {
    Ok(ln_hypergeom_pmf(x, n, n_ic, n_jr)?.exp().min(1.0))
}

/// Upper-tail p-value `P(X >= x_obs)`, summed directly over the tail.
pub fn pvalue_over(x_obs: u64, n: u64, n_ic: u64, n_jr: u64) -> Result<f64, ValidateError> {
    check_params(n, n_ic, n_jr)?;
    Ok(pvalue_unchecked(x_obs, n, n_ic, n_jr))
}

fn pvalue_unchecked(x_obs: u64, n: u64, n_ic: u64, n_jr: u64) -> f64 {
    let (n_ic, n_jr) = (n_ic.max(n_jr), n_ic.min(n_jr));
    let (lo, hi) = support(n, n_ic, n_jr);
    if x_obs <= lo {
        return 1.0;
    }
    if x_obs > hi {
        return 0.0;
    }
    let mut term = ln_pmf_unchecked(x_obs, n, n_ic, n_jr).exp();
    let mut sum = term;
    let (r, m, b) = (n_ic as f64, n_jr as f64, (n - n_ic) as f64);
    let mut x = x_obs as f64;
    for _ in x_obs..hi {
        // H(x + 1) / H(x)
        let ratio = (r - x) * (m - x) / ((x + 1.0) * (b - m + x + 1.0));
        term *= ratio;
        sum += term;
        x += 1.0;
        if term == 0.0 || (ratio < 1.0 && term * ratio / (1.0 - ratio) <= sum * 1e-17) {
            break;
        }
    }
    sum.min(1.0)
}

/// How the Bonferroni divisor is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Correction {
    /// `p_b = alpha / N_T`, `N_T` the number of directed tests performed.
    PerTest,
    /// `p_b = alpha / N_E`, `N_E` the number of connected node pairs.
    PerPair,
    /// `p_b = alpha`, no multiple-testing correction.
    Fixed,
}

impl Correction {
    pub fn name(self) -> &'static str {
        match self {
            Correction::PerTest => "per-test",
            Correction::PerPair => "per-pair",
            Correction::Fixed => "fixed",
        }
    }
}

impl std::str::FromStr for Correction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "per-test" | "per_test" => Ok(Correction::PerTest),
            "per-pair" | "per_pair" => Ok(Correction::PerPair),
            "fixed" => Ok(Correction::Fixed),
            other => Err(format!("unknown correction {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdPolicy {
    pub alpha: f64,
    pub correction: Correction,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy { alpha: 0.01, correction: Correction::PerTest }
    }
}

/// Resolved threshold for one network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub p_b: f64,
    /// Directed tests performed, `N_T`.
    pub tests: u64,
    /// Divisor applied to alpha (`N_T`, `N_E` or 1).
    pub divisor: u64,
}

pub fn bonferroni_threshold(policy: &ThresholdPolicy, net: &CallNetwork) -> Result<Threshold, ValidateError> {
    if !(policy.alpha > 0.0 && policy.alpha < 1.0) {
        return Err(ValidateError::InvalidAlpha(policy.alpha));
    }
    let tests = match net.kind() {
        NetworkKind::Directed => net.edge_count() as u64,
        NetworkKind::Mutual => 2 * net.edge_count() as u64,
    };
    let divisor = match policy.correction {
        Correction::PerTest => tests,
        Correction::PerPair => net.unordered_pair_count() as u64,
        Correction::Fixed => 1,
    };
    Ok(Threshold { p_b: corrected_alpha(policy.alpha, divisor), tests, divisor })
}

/// `alpha / divisor`; an empty network (divisor 0) keeps `alpha`.
pub fn corrected_alpha(alpha: f64, divisor: u64) -> f64 {
    alpha / divisor.max(1) as f64
}

/// Call totals the null hypothesis is conditioned on, indexed by the nodes of
/// the network under test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Marginals {
    pub total: u64,
    pub out_calls: Vec<u64>,
    pub in_calls: Vec<u64>,
}

impl Marginals {
    pub fn of_network(net: &CallNetwork) -> Marginals {
        let (out_calls, in_calls) = net.call_marginals();
        Marginals { total: net.total_calls(), out_calls, in_calls }
    }

    /// Marginals measured on `source` (typically the DCN) for the nodes of
    /// `target`.
    pub fn from_source(source: &CallNetwork, target: &CallNetwork) -> Result<Marginals, ValidateError> {
        let full = Marginals::of_network(source);
        let mut out_calls = Vec::with_capacity(target.node_count());
        let mut in_calls = Vec::with_capacity(target.node_count());
        for id in target.nodes() {
            let i =
                source.node_index(id.as_bytes()).ok_or_else(|| ValidateError::MissingNode(id.to_string()))? as usize;
            out_calls.push(full.out_calls[i]);
            in_calls.push(full.in_calls[i]);
        }
        Ok(Marginals { total: full.total, out_calls, in_calls })
    }
}

/// One directed hypothesis test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkTest {
    /// Caller and receiver, as node indices of the tested network.
    pub src: u32,
    pub dst: u32,
    pub observed: u64,
    pub caller_calls: u64,
    pub receiver_calls: u64,
    pub p_value: f64,
    pub validated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub total_calls: u64,
    pub policy: ThresholdPolicy,
    pub threshold: Threshold,
    pub tests: Vec<LinkTest>,
}

impl ValidationReport {
    pub fn validated_count(&self) -> usize {
        self.tests.iter().filter(|t| t.validated).count()
    }

    /// Header lines (`# key<TAB>value`), a column line, then one row per test.
    /// `net` must be the network the report was computed on.
    pub fn write_to<W: Write>(&self, mut out: W, net: &CallNetwork) -> io::Result<()> {
        writeln!(out, "# N\t{}", self.total_calls)?;
        writeln!(out, "# N_T\t{}", self.threshold.tests)?;
        writeln!(out, "# alpha\t{}", self.policy.alpha)?;
        writeln!(out, "# mode\t{}", self.policy.correction.name())?;
        writeln!(out, "# divisor\t{}", self.threshold.divisor)?;
        writeln!(out, "# p_b\t{}", Sci(self.threshold.p_b))?;
        writeln!(out, "src\tdst\tX_obs\tN_ic\tN_jr\tp_value\tverdict")?;
        for t in &self.tests {
            out.write_all(net.nodes()[t.src as usize].as_bytes())?;
            out.write_all(b"\t")?;
            out.write_all(net.nodes()[t.dst as usize].as_bytes())?;
            writeln!(
                out,
                "\t{}\t{}\t{}\t{}\t{}",
                t.observed,
                t.caller_calls,
                t.receiver_calls,
                Sci(t.p_value),
                if t.validated { "validated" } else { "rejected" }
            )?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
struct Sci(f64);

impl fmt::Display for Sci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.16e}", self.0)
    }
}

/// A statistically validated network with the tests behind it.
#[derive(Clone, Debug)]
pub struct Validated {
    pub network: CallNetwork,
    pub report: ValidationReport,
}

fn run_test(src: u32, dst: u32, observed: u64, m: &Marginals, p_b: f64) -> LinkTest {
    let caller_calls = m.out_calls[src as usize];
    let receiver_calls = m.in_calls[dst as usize];
    assert!(
        caller_calls >= observed && receiver_calls >= observed && observed > 0,
        "edge {src}->{dst} inconsistent with marginals"
    );
    let p_value = pvalue_unchecked(observed, m.total, caller_calls, receiver_calls);
    LinkTest { src, dst, observed, caller_calls, receiver_calls, p_value, validated: p_value < p_b }
}

/// Tests every directed edge `i -> j` with `X = a_ij`, `N_ic` the calls placed
/// by `i`, `N_jr` the calls received by `j` and `N` all calls of the DCN. The
/// SVDCN keeps the edges with `p < p_b`.
pub fn validate_dcn(dcn: &CallNetwork, policy: &ThresholdPolicy) -> Result<Validated, ValidateError> {
    if dcn.kind() != NetworkKind::Directed {
        return Err(ValidateError::WrongKind { expected: "directed" });
    }
    let threshold = bonferroni_threshold(policy, dcn)?;
    let marginals = Marginals::of_network(dcn);
    let tests: Vec<LinkTest> =
        dcn.edges().par_iter().map(|e| run_test(e.src, e.dst, e.forward.calls, &marginals, threshold.p_b)).collect();
    let network = dcn.retain_edges(|i, _| tests[i].validated);
    let report = ValidationReport { total_calls: marginals.total, policy: *policy, threshold, tests };
    Ok(Validated { network, report })
}

/// Validates an MCN with marginals taken from the MCN itself.
pub fn validate_mcn(mcn: &CallNetwork, policy: &ThresholdPolicy) -> Result<Validated, ValidateError> {
    validate_mcn_with(mcn, policy, &Marginals::of_network(mcn))
}

/// Tests both directions of every mutual edge; the SVMCN keeps an edge only
/// when both directional tests pass. Report rows come in pairs: `i -> j`, then
/// `j -> i`.
pub fn validate_mcn_with(
    mcn: &CallNetwork,
    policy: &ThresholdPolicy,
    marginals: &Marginals,
) -> Result<Validated, ValidateError> {
    if mcn.kind() != NetworkKind::Mutual {
        return Err(ValidateError::WrongKind { expected: "mutual" });
    }
    let threshold = bonferroni_threshold(policy, mcn)?;
    let tests: Vec<LinkTest> = mcn
        .edges()
        .par_iter()
        .flat_map_iter(|e| {
            [
                run_test(e.src, e.dst, e.forward.calls, marginals, threshold.p_b),
                run_test(e.dst, e.src, e.backward.calls, marginals, threshold.p_b),
            ]
        })
        .collect();
    let network = mcn.retain_edges(|i, _| tests[2 * i].validated && tests[2 * i + 1].validated);
    let report = ValidationReport { total_calls: marginals.total, policy: *policy, threshold, tests };
    Ok(Validated { network, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_test_threshold_of_a_large_dcn() {
        // 16,753,635 directed tests at alpha = 0.01.
        let p_b = corrected_alpha(0.01, 16_753_635);
        assert!((p_b / 5.968_85e-10 - 1.0).abs() < 1e-5, "{p_b:e}");
        assert_eq!(corrected_alpha(0.01, 0), 0.01);
    }
    use crate::ingest::PairStats;
    use crate::netbuild::{build_dcn, build_mcn};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn pmf_small_cases() {
        assert!(close(hypergeom_pmf(0, 10, 2, 2).unwrap(), 28.0 / 45.0, 1e-14));
        assert_eq!(hypergeom_pmf(7, 7, 7, 7).unwrap(), 1.0);
        assert_eq!(hypergeom_pmf(3, 10, 2, 2).unwrap(), 0.0);
        let total: f64 = (0..=7).map(|x| hypergeom_pmf(x, 30, 7, 11).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_rejects_bad_parameters() {
        assert!(hypergeom_pmf(0, 0, 0, 0).is_err());
        assert!(hypergeom_pmf(0, 5, 6, 1).is_err());
        assert!(pvalue_over(1, 5, 1, 9).is_err());
    }

    #[test]
    fn pvalue_small_cases() {
        assert_eq!(pvalue_over(0, 10, 2, 2).unwrap(), 1.0);
        assert!(close(pvalue_over(1, 10, 2, 2).unwrap(), 17.0 / 45.0, 1e-14));
        assert_eq!(pvalue_over(3, 10, 2, 2).unwrap(), 0.0);
        // Lower end of the support forced above zero.
        assert_eq!(pvalue_over(2, 10, 7, 5).unwrap(), 1.0);
    }

    #[test]
    fn threshold_modes() {
        let stats = PairStats::from_entries([
            ("A".into(), "B".into(), 2, 1),
            ("B".into(), "A".into(), 1, 1),
            ("A".into(), "C".into(), 1, 1),
        ])
        .unwrap();
        let dcn = build_dcn(&stats);
        let mcn = build_mcn(&stats);
        let per_test = ThresholdPolicy::default();
        let t = bonferroni_threshold(&per_test, &dcn).unwrap();
        assert_eq!((t.tests, t.divisor), (3, 3));
        assert_eq!(t.p_b, 0.01 / 3.0);
        let t = bonferroni_threshold(&per_test, &mcn).unwrap();
        assert_eq!((t.tests, t.divisor), (2, 2));
        let per_pair = ThresholdPolicy { correction: Correction::PerPair, ..per_test };
        assert_eq!(bonferroni_threshold(&per_pair, &dcn).unwrap().divisor, 2);
        assert_eq!(bonferroni_threshold(&per_pair, &mcn).unwrap().divisor, 1);
        let fixed = ThresholdPolicy { correction: Correction::Fixed, ..per_test };
        assert_eq!(bonferroni_threshold(&fixed, &dcn).unwrap().p_b, 0.01);
        let bad = ThresholdPolicy { alpha: 1.0, ..per_test };
        assert_eq!(bonferroni_threshold(&bad, &dcn), Err(ValidateError::InvalidAlpha(1.0)));
    }

    #[test]
    fn wrong_kind_rejected() {
        let stats = PairStats::from_entries([("A".into(), "B".into(), 1, 1)]).unwrap();
        let dcn = build_dcn(&stats);
        assert!(validate_mcn(&dcn, &ThresholdPolicy::default()).is_err());
        assert!(validate_dcn(&build_mcn(&stats), &ThresholdPolicy::default()).is_err());
    }

    #[test]
    fn tie_at_threshold_is_rejected() {
        // X = 1 with N_ic = N_jr = 1 gives p = 1/N exactly.
        let m = Marginals { total: 4, out_calls: vec![1, 0], in_calls: vec![0, 1] };
        let p = run_test(0, 1, 1, &m, 1.0).p_value;
        assert!(close(p, 0.25, 1e-15));
        assert!(!run_test(0, 1, 1, &m, p).validated);
        assert!(run_test(0, 1, 1, &m, p * (1.0 + 1e-15)).validated);
    }

    #[test]
    fn report_serialization() {
        let stats = PairStats::from_entries([("A".into(), "B".into(), 3, 1), ("C".into(), "D".into(), 1, 1)]).unwrap();
        let dcn = build_dcn(&stats);
        let policy = ThresholdPolicy { alpha: 0.5, correction: Correction::Fixed };
        let v = validate_dcn(&dcn, &policy).unwrap();
        let mut buf = Vec::new();
        v.report.write_to(&mut buf, &dcn).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# N\t4");
        assert_eq!(lines[5], "# p_b\t5.0000000000000000e-1");
        for (line, prefix) in lines[7..].iter().zip(["A\tB\t3\t3\t3\t", "C\tD\t1\t1\t1\t"]) {
            let rest = line.strip_prefix(prefix).unwrap();
            let (p, status) = rest.split_once('\t').unwrap();
            assert!(close(p.parse().unwrap(), 0.25, 1e-15), "{line}");
            assert_eq!(status, "validated");
        }
    }

    proptest! {
        #[test]
        fn pvalue_monotone_and_symmetric(n in 1u64..400, a in 0u64..400, b in 0u64..400) {
            let (a, b) = (a % (n + 1), b % (n + 1));
            let (lo, hi) = support(n, a, b);
            let mut prev = pvalue_over(lo, n, a, b).unwrap();
            prop_assert_eq!(prev, 1.0);
            for x in lo..=hi {
                let p = pvalue_over(x, n, a, b).unwrap();
                prop_assert!(close(p, pvalue_over(x, n, b, a).unwrap(), 1e-12));
                if x > lo {
                    prop_assert!(p <= prev * (1.0 + 1e-13));
                    // Strict decrease wherever the dropped mass is representable.
                    if hypergeom_pmf(x - 1, n, a, b).unwrap() > 1e-13 * prev {
                        prop_assert!(p < prev, "not decreasing at x={}", x);
                    }
                }
                prev = p;
            }
        }
    }
}
