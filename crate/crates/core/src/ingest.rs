//! Call detail record parsing, validity filtering and pair aggregation.
//!
//! Records are delimiter-separated rows `caller, callee, start_time, duration,
//! status`. Only successful calls (status 1) between two distinct users whose
//! start falls outside the excluded calendar days contribute to the networks.
//! Aggregation turns the surviving calls into [`PairStats`]: per ordered pair
//! the number of calls and their total duration.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, Read, Write};

use chrono::NaiveDate;
use rayon::prelude::*;
use thiserror::Error;

/// Maximum number of offending line numbers kept in a [`ParseReport`].
pub const MAX_ERROR_SAMPLES: usize = 100;

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable input: {0}")]
    Io(#[from] io::Error),
    #[error("csv reader failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid date {0:?}, expected YYYY-MM-DD")]
    BadDate(String),
    #[error("invalid pair statistics: {0}")]
    InvalidPair(String),
}

/// Opaque user identifier. Arbitrary non-empty bytes; ordered bytewise.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(Box<[u8]>);

impl UserId {
    /// Returns `None` for an empty identifier.
    pub fn new(bytes: &[u8]) -> Option<Self> {
        (!bytes.is_empty()).then(|| UserId(bytes.into()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl Borrow<[u8]> for UserId {
    fn borrow(&self) -> &[u8] {
        &self.0
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        assert!(!s.is_empty(), "user identifiers must be non-empty");
        UserId(s.as_bytes().into())
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

impl fmt::Debug for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UserId({:?})", String::from_utf8_lossy(&self.0))
    }
}

/// One call detail record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallRecord {
    pub caller: UserId,
    pub callee: UserId,
    /// Seconds since the Unix epoch, UTC.
    pub start_time: i64,
    /// Call length in seconds.
    pub duration: u64,
    pub status: i32,
}

/// Parser and filter settings.
#[derive(Clone, Debug)]
pub struct IngestConfig {
    pub delimiter: u8,
    pub has_header: bool,
    /// Offset of the local timezone used to decide calendar days.
    pub timezone_offset_minutes: i32,
    pub excluded_dates: BTreeSet<NaiveDate>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            delimiter: b',',
            has_header: false,
            timezone_offset_minutes: 8 * 60,
            excluded_dates: BTreeSet::new(),
        }
    }
}

impl IngestConfig {
    pub fn filter(&self) -> CallFilter {
        CallFilter::new(&self.excluded_dates, self.timezone_offset_minutes)
    }
}

/// Parses a comma-separated list of ISO-8601 dates.
pub fn parse_date_list(list: &str) -> Result<BTreeSet<NaiveDate>, IngestError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| IngestError::BadDate(s.to_owned())))
        .collect()
}

/// Class of a malformed input row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParseErrorClass {
    FieldCount,
    EmptyIdentifier,
    BadTimestamp,
    BadDuration,
    BadStatus,
}

impl ParseErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            ParseErrorClass::FieldCount => "field_count",
            ParseErrorClass::EmptyIdentifier => "empty_identifier",
            ParseErrorClass::BadTimestamp => "bad_timestamp",
            ParseErrorClass::BadDuration => "bad_duration",
            ParseErrorClass::BadStatus => "bad_status",
        }
    }
}

/// Counts of malformed rows plus the first [`MAX_ERROR_SAMPLES`] offenders.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Data rows seen, header excluded.
    pub rows: u64,
    pub errors: BTreeMap<ParseErrorClass, u64>,
    /// `(line number, class)`, 1-based line numbers.
    pub samples: Vec<(u64, ParseErrorClass)>,
}

impl ParseReport {
    pub fn error_count(&self) -> u64 {
        self.errors.values().sum()
    }

    fn record(&mut self, line: u64, class: ParseErrorClass) {
        *self.errors.entry(class).or_insert(0) += 1;
        if self.samples.len() < MAX_ERROR_SAMPLES {
            self.samples.push((line, class));
        }
    }

    /// Writes the report as `key<TAB>value` lines.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "rows\t{}", self.rows)?;
        writeln!(out, "malformed\t{}", self.error_count())?;
        for (class, n) in &self.errors {
            writeln!(out, "error\t{}\t{}", class.name(), n)?;
        }
        for (line, class) in &self.samples {
            writeln!(out, "line\t{}\t{}", line, class.name())?;
        }
        Ok(())
    }
}

/// Borrowed view of one parsed row.
#[derive(Clone, Copy, Debug)]
pub struct RecordRef<'a> {
    pub caller: &'a [u8],
    pub callee: &'a [u8],
    pub start_time: i64,
    pub duration: u64,
    pub status: i32,
}

impl RecordRef<'_> {
    pub fn to_owned(&self) -> CallRecord {
        CallRecord {
            caller: UserId(self.caller.into()),
            callee: UserId(self.callee.into()),
            start_time: self.start_time,
            duration: self.duration,
            status: self.status,
        }
    }
}

fn parse_int<T: std::str::FromStr>(field: &[u8]) -> Option<T> {
    std::str::from_utf8(field).ok()?.trim().parse().ok()
}

fn parse_row(row: &csv::ByteRecord) -> Result<RecordRef<'_>, ParseErrorClass> {
    if row.len() != 5 {
        return Err(ParseErrorClass::FieldCount);
    }
    let (caller, callee) = (&row[0], &row[1]);
    if caller.is_empty() || callee.is_empty() {
        return Err(ParseErrorClass::EmptyIdentifier);
    }
    let start_time = parse_int::<i64>(&row[2]).ok_or(ParseErrorClass::BadTimestamp)?;
    let duration = parse_int::<u64>(&row[3]).ok_or(ParseErrorClass::BadDuration)?;
    let status = parse_int::<i32>(&row[4]).ok_or(ParseErrorClass::BadStatus)?;
    Ok(RecordRef { caller, callee, start_time, duration, status })
}

/// Streams every well-formed row of `input` into `sink`, counting malformed
/// rows in the returned report.
pub fn for_each_record<R, F>(input: R, config: &IngestConfig, mut sink: F) -> Result<ParseReport, IngestError>
where
    R: Read,
    F: FnMut(RecordRef<'_>),
{
    let mut reader =
        csv::ReaderBuilder::new().delimiter(config.delimiter).has_headers(false).flexible(true).from_reader(input);
    let mut report = ParseReport::default();
    let mut row = csv::ByteRecord::new();
    let mut first = true;
    loop {
        match reader.read_byte_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(err) => match err.kind() {
                csv::ErrorKind::Io(_) => return Err(err.into()),
                _ => {
                    // Quoting and other row-level syntax problems.
                    let line = err.position().map_or(0, |p| p.line());
                    report.rows += 1;
                    report.record(line, ParseErrorClass::FieldCount);
                    continue;
                }
            },
        }
        if std::mem::take(&mut first) && config.has_header {
            continue;
        }
        report.rows += 1;
        match parse_row(&row) {
            Ok(rec) => sink(rec),
            Err(class) => {
                let line = row.position().map_or(0, |p| p.line());
                report.record(line, class);
            }
        }
    }
    Ok(report)
}

/// Records parsed from one input plus the malformed-row report.
#[derive(Clone, Debug, Default)]
pub struct ParsedRecords {
    pub records: Vec<CallRecord>,
    pub report: ParseReport,
}

pub fn parse_records<R: Read>(input: R, config: &IngestConfig) -> Result<ParsedRecords, IngestError> {
    let mut records = Vec::new();
    let report = for_each_record(input, config, |r| records.push(r.to_owned()))?;
    Ok(ParsedRecords { records, report })
}

/// Why a well-formed record does not enter the networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    Status,
    SelfCall,
    ExcludedDate,
}

/// Validity predicate: status 1, distinct endpoints, start outside excluded days.
///
/// Days are evaluated in the configured local timezone and keyed on the start
/// time only.
#[derive(Clone, Debug, Default)]
pub struct CallFilter {
    excluded_days: BTreeSet<i64>,
    offset_seconds: i64,
}

impl CallFilter {
    pub fn new(excluded_dates: &BTreeSet<NaiveDate>, timezone_offset_minutes: i32) -> Self {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        CallFilter {
            excluded_days: excluded_dates.iter().map(|d| (*d - epoch).num_days()).collect(),
            offset_seconds: i64::from(timezone_offset_minutes) * 60,
        }
    }

    fn local_day(&self, start_time: i64) -> i64 {
        (start_time + self.offset_seconds).div_euclid(SECONDS_PER_DAY)
    }

    pub fn check(&self, caller: &[u8], callee: &[u8], start_time: i64, status: i32) -> Result<(), Rejection> {
        if status != 1 {
            Err(Rejection::Status)
        } else if caller == callee {
            Err(Rejection::SelfCall)
        } else if self.excluded_days.contains(&self.local_day(start_time)) {
            Err(Rejection::ExcludedDate)
        } else {
            Ok(())
        }
    }

    pub fn accepts(&self, rec: &CallRecord) -> bool {
        self.check(rec.caller.as_bytes(), rec.callee.as_bytes(), rec.start_time, rec.status).is_ok()
    }
}

pub fn filter_valid<I>(records: I, filter: &CallFilter) -> Vec<CallRecord>
where
    I: IntoIterator<Item = CallRecord>,
{
    records.into_iter().filter(|r| filter.accepts(r)).collect()
}

/// Call count and total duration of one ordered pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Traffic {
    pub calls: u64,
    pub duration: u64,
}

impl Traffic {
    pub fn add(&mut self, other: Traffic) {
        self.calls += other.calls;
        self.duration += other.duration;
    }
}

/// One aggregated ordered pair, endpoints as indices into [`PairStats::nodes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairEntry {
    pub src: u32,
    pub dst: u32,
    pub traffic: Traffic,
}

/// Aggregated directed pair statistics.
///
/// `nodes` is sorted bytewise and `pairs` by `(src, dst)`, so the layout does
/// not depend on the order in which calls were aggregated.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairStats {
    nodes: Vec<UserId>,
    pairs: Vec<PairEntry>,
}

impl PairStats {
    /// Builds statistics from explicit `(caller, callee, calls, duration)`
    /// entries. Repeated pairs are summed.
    pub fn from_entries<I>(entries: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = (UserId, UserId, u64, u64)>,
    {
        let mut agg = PairAggregator::default();
        for (src, dst, calls, duration) in entries {
            if src == dst {
                return Err(IngestError::InvalidPair(format!("self pair {src}")));
            }
            if calls == 0 {
                return Err(IngestError::InvalidPair(format!("zero calls on {src}->{dst}")));
            }
            agg.add_traffic(src.as_bytes(), dst.as_bytes(), Traffic { calls, duration });
        }
        Ok(agg.finish())
    }

    pub fn nodes(&self) -> &[UserId] {
        &self.nodes
    }

    pub fn pairs(&self) -> &[PairEntry] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn node_index(&self, id: &[u8]) -> Option<u32> {
        self.nodes.binary_search_by(|n| n.as_bytes().cmp(id)).ok().map(|i| i as u32)
    }

    pub fn get(&self, caller: &str, callee: &str) -> Option<Traffic> {
        let src = self.node_index(caller.as_bytes())?;
        let dst = self.node_index(callee.as_bytes())?;
        self.pairs.binary_search_by(|p| (p.src, p.dst).cmp(&(src, dst))).ok().map(|i| self.pairs[i].traffic)
    }

    pub fn total_calls(&self) -> u64 {
        self.pairs.iter().map(|p| p.traffic.calls).sum()
    }

    pub fn total_duration(&self) -> u64 {
        self.pairs.iter().map(|p| p.traffic.duration).sum()
    }
}

/// Incremental pair aggregation; partial aggregators merge by summation.
#[derive(Clone, Debug, Default)]
pub struct PairAggregator {
    ids: HashMap<UserId, u32>,
    names: Vec<UserId>,
    pairs: HashMap<(u32, u32), Traffic>,
}

impl PairAggregator {
    fn intern(&mut self, id: &[u8]) -> u32 {
        if let Some(&i) = self.ids.get(id) {
            return i;
        }
        let i = u32::try_from(self.names.len()).expect("more than u32::MAX users");
        let id = UserId(id.into());
        self.names.push(id.clone());
        self.ids.insert(id, i);
        i
    }

    pub fn add_traffic(&mut self, caller: &[u8], callee: &[u8], traffic: Traffic) {
        let src = self.intern(caller);
        let dst = self.intern(callee);
        self.pairs.entry((src, dst)).or_default().add(traffic);
    }

    pub fn push(&mut self, caller: &[u8], callee: &[u8], duration: u64) {
        self.add_traffic(caller, callee, Traffic { calls: 1, duration });
    }

    pub fn merge(mut self, other: PairAggregator) -> PairAggregator {
        let remap: Vec<u32> = other.names.iter().map(|n| self.intern(n.as_bytes())).collect();
        for ((s, d), t) in other.pairs {
            self.pairs.entry((remap[s as usize], remap[d as usize])).or_default().add(t);
        }
        self
    }

    pub fn finish(self) -> PairStats {
        let mut order: Vec<u32> = (0..self.names.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| self.names[a as usize].cmp(&self.names[b as usize]));
        let mut rank = vec![0u32; order.len()];
        for (r, &old) in order.iter().enumerate() {
            rank[old as usize] = r as u32;
        }
        let mut names: Vec<Option<UserId>> = self.names.into_iter().map(Some).collect();
        let nodes = order.iter().map(|&old| names[old as usize].take().expect("unique")).collect();
        let mut pairs: Vec<PairEntry> = self
            .pairs
            .into_iter()
            .map(|((s, d), traffic)| PairEntry { src: rank[s as usize], dst: rank[d as usize], traffic })
            .collect();
        pairs.sort_unstable_by_key(|p| (p.src, p.dst));
        PairStats { nodes, pairs }
    }
}

/// Aggregates already-filtered records into pair statistics.
pub fn aggregate_pairs(records: &[CallRecord]) -> PairStats {
    records
        .par_chunks(1 << 15)
        .map(|chunk| {
            let mut agg = PairAggregator::default();
            for r in chunk {
                agg.push(r.caller.as_bytes(), r.callee.as_bytes(), r.duration);
            }
            agg
        })
        .reduce(PairAggregator::default, PairAggregator::merge)
        .finish()
}

/// Rejection tallies of a streaming ingest.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FilterCounts {
    pub kept: u64,
    pub bad_status: u64,
    pub self_calls: u64,
    pub excluded_date: u64,
}

#[derive(Clone, Debug, Default)]
pub struct IngestOutcome {
    pub stats: PairStats,
    pub parse: ParseReport,
    pub filtered: FilterCounts,
}

impl IngestOutcome {
    pub fn write_report<W: Write>(&self, mut out: W) -> io::Result<()> {
        self.parse.write_to(&mut out)?;
        let f = &self.filtered;
        writeln!(out, "kept\t{}", f.kept)?;
        writeln!(out, "rejected\tstatus\t{}", f.bad_status)?;
        writeln!(out, "rejected\tself_call\t{}", f.self_calls)?;
        writeln!(out, "rejected\texcluded_date\t{}", f.excluded_date)?;
        Ok(())
    }
}

/// Parses, filters and aggregates in one pass without materializing records.
pub fn ingest_stream<R: Read>(input: R, config: &IngestConfig) -> Result<IngestOutcome, IngestError> {
    let filter = config.filter();
    let mut agg = PairAggregator::default();
    let mut counts = FilterCounts::default();
    let parse = for_each_record(input, config, |r| match filter.check(r.caller, r.callee, r.start_time, r.status) {
        Ok(()) => {
            counts.kept += 1;
            agg.push(r.caller, r.callee, r.duration);
        }
        Err(Rejection::Status) => counts.bad_status += 1,
        Err(Rejection::SelfCall) => counts.self_calls += 1,
        Err(Rejection::ExcludedDate) => counts.excluded_date += 1,
    })?;
    Ok(IngestOutcome { stats: agg.finish(), parse, filtered: counts })
}

/// Writes records in the comma-separated input format.
pub fn write_records<'a, W, I>(mut out: W, records: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a CallRecord>,
{
    for r in records {
        out.write_all(r.caller.as_bytes())?;
        out.write_all(b",")?;
        out.write_all(r.callee.as_bytes())?;
        writeln!(out, ",{},{},{}", r.start_time, r.duration, r.status)?;
    }
    Ok(())
}
