//! File formats and the predictor transformations applied before
//! regression.
//!
//! Inputs:
//! - trial CSV with columns `subject, order, block, session, stimulus,
//!   lexicality, response, rt_ms` and an optional `timeout` flag;
//! - text embeddings, one `word v1 v2 ... vd` entry per line with an
//!   optional `count dim` header;
//! - frequency CSV `word,count`;
//! - word lists, one word per line.
//!
//! Output tables are CSV with a header row; floats are written in their
//! shortest round-trip decimal form.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::dense::RowMatrix;
use crate::error::{LexError, Result};
use crate::formspace::normalize_word;
use crate::measures::MeasureRow;
use crate::semspace::EmbeddingTable;
use crate::stats::{mean, sample_sd};
use crate::trialsim::{Lexicality, SkipEvent, TrialRecord};

/// Added before taking logs of right-skewed predictors that contain zeros.
pub const LOG_BACKOFF: f64 = 0.002;
/// Responses at or below this latency (ms) are removed.
pub const RT_MIN_MS: f64 = 100.0;
/// Responses above this latency (ms) are removed.
pub const RT_MAX_MS: f64 = 2000.0;

/// Writes via a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| LexError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| LexError::io(path, e))?;
    tmp.persist(path).map_err(|e| LexError::io(path, e.error))?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| LexError::io(path, e))
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct TrialCsvRow {
    subject: String,
    order: String,
    block: String,
    session: String,
    stimulus: String,
    lexicality: String,
    response: String,
    rt_ms: String,
    #[serde(default)]
    timeout: Option<String>,
}

/// Counts of trials removed by each cleaning rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub total: usize,
    pub null_stimulus: usize,
    pub timeout: usize,
    pub too_fast: usize,
    pub too_slow: usize,
    pub kept: usize,
}

impl FilterReport {
    fn absorb(&mut self, other: &FilterReport) {
        self.null_stimulus += other.null_stimulus;
        self.too_fast += other.too_fast;
        self.too_slow += other.too_slow;
        self.kept = other.kept;
    }
}

fn is_null_stimulus(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "null" | "nan")
}

fn truthy(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "1" | "true" | "t" | "yes" | "y")
}

/// Removes `null`/`nan` stimuli and latencies `≤ 100` ms or `> 2000` ms,
/// preserving order.
pub fn filter_trials(trials: Vec<TrialRecord>) -> (Vec<TrialRecord>, FilterReport) {
    let mut report = FilterReport {
        total: trials.len(),
        ..Default::default()
    };
    let kept: Vec<TrialRecord> = trials
        .into_iter()
        .filter(|t| {
            if is_null_stimulus(&t.stimulus) {
                report.null_stimulus += 1;
                false
            } else if t.rt_ms <= RT_MIN_MS {
                report.too_fast += 1;
                false
            } else if t.rt_ms > RT_MAX_MS {
                report.too_slow += 1;
                false
            } else {
                true
            }
        })
        .collect();
    report.kept = kept.len();
    (kept, report)
}

/// Trials grouped by subject, subjects in order of first appearance.
pub type TrialsBySubject = IndexMap<String, Vec<TrialRecord>>;

/// Reads and cleans a trial CSV. Timeouts (a truthy `timeout` column, or
/// else an empty response) are removed before the latency filter.
pub fn load_trials(path: &Path) -> Result<(TrialsBySubject, FilterReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let has_timeout_col = rdr
        .headers()
        .map_err(|e| LexError::parse(path, 1, e.to_string()))?
        .iter()
        .any(|h| h == "timeout");
    let mut report = FilterReport::default();
    let mut parsed = Vec::new();
    for rec in rdr.deserialize::<TrialCsvRow>() {
        report.total += 1;
        let row = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            LexError::parse(path, line, e.to_string())
        })?;
        let line = report.total as u64 + 1;
        let bad = |msg: String| LexError::parse(path, line, msg);
        let timed_out = if has_timeout_col {
            row.timeout.as_deref().is_some_and(truthy)
        } else {
            row.response.is_empty()
        };
        if timed_out {
            report.timeout += 1;
            continue;
        }
        let order: u64 = row
            .order
            .parse()
            .map_err(|_| bad(format!("order {:?} is not a positive integer", row.order)))?;
        if order == 0 {
            return Err(bad("order must be positive".into()));
        }
        let lexicality = Lexicality::parse(&row.lexicality)
            .ok_or_else(|| bad(format!("lexicality {:?} is not W or N", row.lexicality)))?;
        let response = Lexicality::parse(&row.response)
            .ok_or_else(|| bad(format!("response {:?} is not W or N", row.response)))?;
        let rt_ms: f64 = row
            .rt_ms
            .parse()
            .map_err(|_| bad(format!("rt_ms {:?} is not a number", row.rt_ms)))?;
        if !rt_ms.is_finite() {
            return Err(bad("rt_ms is not finite".into()));
        }
        if row.stimulus.is_empty() {
            return Err(bad("empty stimulus".into()));
        }
        parsed.push(TrialRecord {
            subject: row.subject,
            order,
            block: row.block,
            session: row.session,
            stimulus: normalize_word(&row.stimulus),
            lexicality,
            response,
            rt_ms,
        });
    }
    let (kept, filtered) = filter_trials(parsed);
    report.absorb(&filtered);
    let mut by_subject = TrialsBySubject::new();
    for t in kept {
        by_subject.entry(t.subject.clone()).or_default().push(t);
    }
    Ok((by_subject, report))
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

/// `−1000 / rt`.
pub fn rtinv(rt_ms: f64) -> Result<f64> {
    if !(rt_ms > 0.0) {
        return Err(LexError::InvalidArgument(format!("reaction time must be > 0, got {rt_ms}")));
    }
    Ok(-1000.0 / rt_ms)
}

/// Natural log, with zero mapped to `ln(0.002)`.
pub fn log_backoff(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(LexError::InvalidArgument(format!("log_backoff needs x >= 0, got {x}")));
    }
    Ok(if x == 0.0 { LOG_BACKOFF.ln() } else { x.ln() })
}

/// 0 for zero, 1 otherwise.
pub fn zero_indicator(x: f64) -> u8 {
    u8::from(x != 0.0)
}

/// `(x − mean) / sd` with the `n − 1` standard deviation.
pub fn standardize(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.len() < 2 {
        return Err(LexError::InvalidArgument("standardize needs at least 2 values".into()));
    }
    let m = mean(xs);
    let sd = sample_sd(xs);
    if !(sd > 0.0) {
        return Err(LexError::InvalidArgument("standardize: zero variance".into()));
    }
    Ok(xs.iter().map(|x| (x - m) / sd).collect())
}

// ---------------------------------------------------------------------------
// Predictor tables
// ---------------------------------------------------------------------------

/// One regression-ready row: the raw measures plus transformed predictors.
/// `log_semantic_density` is empty when the density is not positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorRow {
    pub subject: String,
    pub trial: u64,
    pub block: String,
    pub session: String,
    pub stimulus: String,
    pub lexicality: String,
    pub response: String,
    pub rt_ms: f64,
    pub rtinv: f64,
    pub trial_z: f64,
    pub response_w: u8,
    pub word_length: usize,
    pub frequency: f64,
    pub in_bnc: u8,
    pub log_frequency: f64,
    pub levenshtein_n: usize,
    pub has_neighbours: u8,
    pub log_neighbourhood: f64,
    pub coltheart_n: usize,
    pub semantic_density: f64,
    pub log_semantic_density: Option<f64>,
    pub shortest_path: f64,
    pub has_neighbours_path: u8,
    pub log_shortest_path: f64,
    pub c_precision: f64,
    pub l1chat: f64,
    pub log_l1chat: f64,
    pub yes_activation: f64,
    pub dropped_cues: usize,
}

impl PredictorRow {
    /// Numeric predictor by column name, for design-matrix assembly.
    pub fn numeric(&self, column: &str) -> Option<f64> {
        Some(match column {
            "rt_ms" => self.rt_ms,
            "rtinv" => self.rtinv,
            "trial_z" => self.trial_z,
            "response_w" => f64::from(self.response_w),
            "word_length" => self.word_length as f64,
            "frequency" => self.frequency,
            "in_bnc" => f64::from(self.in_bnc),
            "log_frequency" => self.log_frequency,
            "levenshtein_n" => self.levenshtein_n as f64,
            "has_neighbours" => f64::from(self.has_neighbours),
            "log_neighbourhood" => self.log_neighbourhood,
            "coltheart_n" => self.coltheart_n as f64,
            "semantic_density" => self.semantic_density,
            "log_semantic_density" => self.log_semantic_density.unwrap_or(f64::NAN),
            "shortest_path" => self.shortest_path,
            "has_neighbours_path" => f64::from(self.has_neighbours_path),
            "log_shortest_path" => self.log_shortest_path,
            "c_precision" => self.c_precision,
            "l1chat" => self.l1chat,
            "log_l1chat" => self.log_l1chat,
            "yes_activation" => self.yes_activation,
            "dropped_cues" => self.dropped_cues as f64,
            _ => return None,
        })
    }
}

/// Column descriptions for the predictor table.
pub const DATA_DICTIONARY: &[(&str, &str)] = &[
    ("subject", "subject id"),
    ("trial", "presentation rank within the subject"),
    ("block", "block id"),
    ("session", "session id"),
    ("stimulus", "lowercased stimulus"),
    ("lexicality", "W (word) or N (nonword)"),
    ("response", "observed response, W or N"),
    ("rt_ms", "reaction time in ms"),
    ("rtinv", "-1000 / rt_ms"),
    ("trial_z", "trial rank, centred and scaled within subject"),
    ("response_w", "1 if the response was W"),
    ("word_length", "number of letters"),
    ("frequency", "raw corpus count (0 when absent)"),
    ("in_bnc", "1 if frequency > 0"),
    ("log_frequency", "ln(frequency), ln(0.002) when zero"),
    ("levenshtein_n", "reference words at edit distance 1"),
    ("has_neighbours", "1 if levenshtein_n > 0"),
    ("log_neighbourhood", "ln(levenshtein_n), ln(0.002) when zero"),
    ("coltheart_n", "lexicon words of equal length differing in one letter"),
    ("semantic_density", "mean cosine similarity of the 10 nearest embeddings to the predicted meaning"),
    ("log_semantic_density", "ln(semantic_density); empty when not positive"),
    ("shortest_path", "closed tour length through predicted meanings of stimulus and Coltheart neighbours; 0 without neighbours"),
    ("has_neighbours_path", "1 if the stimulus has Coltheart neighbours"),
    ("log_shortest_path", "ln(shortest_path), ln(0.002) when zero"),
    ("c_precision", "correlation of the binary cue vector with the predicted form vector"),
    ("l1chat", "L1 norm of the predicted form vector"),
    ("log_l1chat", "ln(l1chat), ln(0.002) when zero"),
    ("yes_activation", "support for the word outcome before the trial's update"),
    ("dropped_cues", "stimulus trigrams unknown to the cue index"),
];

/// Log-transformed columns whose nonzero values fell below the backoff
/// constant, which makes the transform non-monotone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BackoffReport {
    pub violations: Vec<(&'static str, f64)>,
}

/// Adds transformed predictors to one subject's measure rows.
pub fn build_predictors(rows: &[MeasureRow]) -> Result<(Vec<PredictorRow>, BackoffReport)> {
    let trial_nums: Vec<f64> = rows.iter().map(|r| r.trial as f64).collect();
    let trial_z = standardize(&trial_nums)?;
    let mut report = BackoffReport::default();
    let mut check = |name: &'static str, vals: &mut dyn Iterator<Item = f64>| {
        let min_pos = vals.filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        if min_pos <= LOG_BACKOFF {
            warn!("event=backoff_violation column={name} min_nonzero={min_pos}");
            report.violations.push((name, min_pos));
        }
    };
    check("frequency", &mut rows.iter().map(|r| r.frequency));
    check("levenshtein_n", &mut rows.iter().map(|r| r.levenshtein_n as f64));
    check("shortest_path", &mut rows.iter().map(|r| r.shortest_path));
    check("l1chat", &mut rows.iter().map(|r| r.l1chat));
    check("semantic_density", &mut rows.iter().map(|r| r.semantic_density));

    let mut out = Vec::with_capacity(rows.len());
    for (r, z) in rows.iter().zip(trial_z) {
        out.push(PredictorRow {
            subject: r.subject.clone(),
            trial: r.trial,
            block: r.block.clone(),
            session: r.session.clone(),
            stimulus: r.stimulus.clone(),
            lexicality: r.lexicality.clone(),
            response: r.response.clone(),
            rt_ms: r.rt_ms,
            rtinv: rtinv(r.rt_ms)?,
            trial_z: z,
            response_w: u8::from(r.response == "W"),
            word_length: r.word_length,
            frequency: r.frequency,
            in_bnc: zero_indicator(r.frequency),
            log_frequency: log_backoff(r.frequency)?,
            levenshtein_n: r.levenshtein_n,
            has_neighbours: zero_indicator(r.levenshtein_n as f64),
            log_neighbourhood: log_backoff(r.levenshtein_n as f64)?,
            coltheart_n: r.coltheart_n,
            semantic_density: r.semantic_density,
            log_semantic_density: (r.semantic_density > 0.0).then(|| r.semantic_density.ln()),
            shortest_path: r.shortest_path,
            has_neighbours_path: u8::from(r.has_neighbours_path),
            log_shortest_path: log_backoff(r.shortest_path)?,
            c_precision: r.c_precision,
            l1chat: r.l1chat,
            log_l1chat: log_backoff(r.l1chat)?,
            yes_activation: r.yes_activation,
            dropped_cues: r.dropped_cues,
        });
    }
    Ok((out, report))
}

fn csv_bytes<T: Serialize>(rows: &[T], headers: Option<&[&str]>) -> Result<Vec<u8>> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(headers.is_none())
        .from_writer(Vec::new());
    if let Some(h) = headers {
        wtr.write_record(h).map_err(csv_err)?;
    }
    for r in rows {
        wtr.serialize(r).map_err(csv_err)?;
    }
    wtr.into_inner()
        .map_err(|e| LexError::InvalidArgument(e.to_string()))
}

fn csv_err(e: csv::Error) -> LexError {
    LexError::InvalidArgument(format!("csv: {e}"))
}

fn header_names() -> Vec<&'static str> {
    DATA_DICTIONARY.iter().map(|(n, _)| *n).collect()
}

/// Writes a predictor table (atomically). An empty table still gets a
/// header row.
pub fn write_measures(rows: &[PredictorRow], path: &Path) -> Result<()> {
    let headers = header_names();
    let bytes = csv_bytes(rows, Some(&headers))?;
    atomic_write(path, &bytes)
}

pub fn read_measures(path: &Path) -> Result<Vec<PredictorRow>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<PredictorRow>() {
        out.push(rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            LexError::parse(path, line, e.to_string())
        })?);
    }
    Ok(out)
}

pub fn write_data_dictionary(path: &Path) -> Result<()> {
    let mut s = String::from("column,description\n");
    for (name, desc) in DATA_DICTIONARY {
        s.push_str(&format!("{name},\"{}\"\n", desc.replace('"', "\"\"")));
    }
    atomic_write(path, s.as_bytes())
}

#[derive(Serialize)]
struct SkipCsvRow<'a> {
    subject: &'a str,
    trial: u64,
    stimulus: &'a str,
    reason: String,
}

pub fn write_skip_log(events: &[SkipEvent], path: &Path) -> Result<()> {
    let rows: Vec<SkipCsvRow> = events
        .iter()
        .map(|e| SkipCsvRow {
            subject: &e.subject,
            trial: e.order,
            stimulus: &e.stimulus,
            reason: e.reason.to_string(),
        })
        .collect();
    let bytes = csv_bytes(&rows, Some(&["subject", "trial", "stimulus", "reason"]))?;
    atomic_write(path, &bytes)
}

/// Serializes any record type to CSV with its field names as header.
pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    atomic_write(path, &csv_bytes(rows, None)?)
}

// ---------------------------------------------------------------------------
// Lexical resources
// ---------------------------------------------------------------------------

/// One word per line; lowercased, blank lines ignored, later duplicates
/// dropped with a warning.
pub fn load_word_list(path: &Path) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut dups = 0;
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| LexError::io(path, e))?;
        let w = normalize_word(&line);
        if w.is_empty() {
            continue;
        }
        if w.contains('#') {
            return Err(LexError::parse(path, i as u64 + 1, format!("word {w:?} contains '#'")));
        }
        if seen.insert(w.clone()) {
            out.push(w);
        } else {
            dups += 1;
        }
    }
    if dups > 0 {
        warn!("event=duplicate_words path={} count={dups}", path.display());
    }
    Ok(out)
}

pub fn write_word_list<S: AsRef<str>>(words: &[S], path: &Path) -> Result<()> {
    let mut s = String::new();
    for w in words {
        s.push_str(w.as_ref());
        s.push('\n');
    }
    atomic_write(path, s.as_bytes())
}

/// Text embeddings: `word v1 ... vd` per line, optional `count dim` header.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let mut words = Vec::new();
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;
    let mut header: Option<(usize, usize)> = None;
    for (i, line) in open(path)?.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| LexError::io(path, e))?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        if i == 0 && rest.len() == 1 {
            if let (Ok(c), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                header = Some((c, d));
                dim = Some(d);
                continue;
            }
        }
        let values = rest
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| LexError::parse(path, lineno, format!("bad value: {e}")))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LexError::parse(path, lineno, "non-finite value"));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(LexError::parse(
                    path,
                    lineno,
                    format!("expected {d} values, found {}", values.len()),
                ))
            }
            _ => {}
        }
        words.push(normalize_word(word));
        data.extend(values);
    }
    let Some(d) = dim.filter(|_| !words.is_empty()) else {
        return Err(LexError::parse(path, 0, "no embeddings found"));
    };
    if let Some((count, _)) = header {
        if count != words.len() {
            return Err(LexError::parse(
                path,
                1,
                format!("header declares {count} entries, found {}", words.len()),
            ));
        }
    }
    let n = words.len();
    EmbeddingTable::new(words, RowMatrix::from_vec(n, d, data)?)
}

pub fn write_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut s = format!("{} {}\n", table.len(), table.dim());
    for (i, w) in table.words().iter().enumerate() {
        s.push_str(w);
        for v in table.row(i) {
            s.push(' ');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    atomic_write(path, s.as_bytes())
}

/// `word,count` CSV; a header row is detected when its count does not parse.
pub fn load_frequencies(path: &Path) -> Result<HashMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut out = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let lineno = i as u64 + 1;
        let rec = rec.map_err(|e| LexError::parse(path, lineno, e.to_string()))?;
        if rec.len() != 2 {
            return Err(LexError::parse(path, lineno, "expected word,count"));
        }
        let count = match rec[1].parse::<f64>() {
            Ok(c) => c,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(LexError::parse(path, lineno, format!("bad count {:?}", &rec[1]))),
        };
        if !(count >= 0.0) || !count.is_finite() {
            return Err(LexError::parse(path, lineno, "count must be a finite non-negative number"));
        }
        out.insert(normalize_word(&rec[0]), count);
    }
    Ok(out)
}

#[derive(Serialize)]
struct TrialOut<'a> {
    subject: &'a str,
    order: u64,
    block: &'a str,
    session: &'a str,
    stimulus: &'a str,
    lexicality: &'a str,
    response: &'a str,
    rt_ms: f64,
}

pub fn write_trials(trials: &[TrialRecord], path: &Path) -> Result<()> {
    let rows: Vec<TrialOut> = trials
        .iter()
        .map(|t| TrialOut {
            subject: &t.subject,
            order: t.order,
            block: &t.block,
            session: &t.session,
            stimulus: &t.stimulus,
            lexicality: t.lexicality.as_str(),
            response: t.response.as_str(),
            rt_ms: t.rt_ms,
        })
        .collect();
    write_csv(&rows, path)
}
