//! Zeek `conn.log.labeled` ingestion.
//!
//! Logs are tab-separated with `#`-prefixed metadata lines; a `#fields` line
//! names the columns and `-` / `(empty)` mark missing values. IoT-23 files
//! have a known quirk: the trailing `tunnel_parents   label   detailed-label`
//! columns of data rows are joined by spaces instead of tabs, so a row that
//! comes up short after the tab split gets its final field re-split on
//! whitespace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::consolidate_labels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinaryLabel {
    Benign,
    Malicious,
}

/// One parsed connection row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub ts: f64,
    pub uid: String,
    pub orig_h: String,
    pub orig_p: u16,
    pub resp_h: String,
    pub resp_p: u16,
    pub proto: String,
    pub service: Option<String>,
    pub duration: Option<f64>,
    pub orig_bytes: Option<u64>,
    pub resp_bytes: Option<u64>,
    pub conn_state: String,
    pub local_orig: Option<bool>,
    pub local_resp: Option<bool>,
    pub missed_bytes: u64,
    pub history: Option<String>,
    pub orig_pkts: u64,
    pub orig_ip_bytes: u64,
    pub resp_pkts: u64,
    pub resp_ip_bytes: u64,
    pub binary_label: BinaryLabel,
    pub detailed_label: Option<String>,
}

/// Class composition of one capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSummary {
    pub total_samples: usize,
    pub per_class: BTreeMap<String, usize>,
    pub malware_type: Option<String>,
}

/// Standard column order used when re-serializing records.
pub const CONN_FIELDS: [&str; 23] = [
    "ts",
    "uid",
    "id.orig_h",
    "id.orig_p",
    "id.resp_h",
    "id.resp_p",
    "proto",
    "service",
    "duration",
    "orig_bytes",
    "resp_bytes",
    "conn_state",
    "local_orig",
    "local_resp",
    "missed_bytes",
    "history",
    "orig_pkts",
    "orig_ip_bytes",
    "resp_pkts",
    "resp_ip_bytes",
    "tunnel_parents",
    "label",
    "detailed-label",
];

fn is_missing(tok: &str) -> bool {
    tok == "-" || tok == "(empty)" || tok.is_empty()
}

struct RowReader {
    line: usize,
}

impl RowReader {
    fn err(&self, msg: String) -> Error {
        Error::MalformedRow {
            line: self.line,
            msg,
        }
    }

    fn raw<'b>(&self, fields: &'b [String], idx: Option<usize>) -> Option<&'b str> {
        idx.map(|i| fields[i].as_str()).filter(|t| !is_missing(t))
    }

    fn required<'b>(&self, fields: &'b [String], idx: Option<usize>, name: &str) -> Result<&'b str> {
        match idx {
            Some(i) if !is_missing(&fields[i]) => Ok(fields[i].as_str()),
            Some(_) => Err(self.err(format!("missing value for required column `{name}`"))),
            None => Err(self.err(format!("column `{name}` absent from #fields"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str, name: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.err(format!("cannot parse `{tok}` as {name}")))
    }

    fn opt_bool(&self, tok: Option<&str>, name: &str) -> Result<Option<bool>> {
        match tok {
            None => Ok(None),
            Some("T") => Ok(Some(true)),
            Some("F") => Ok(Some(false)),
            Some(other) => Err(self.err(format!("cannot parse `{other}` as boolean {name}"))),
        }
    }
}

/// Column positions resolved from a `#fields` header.
#[derive(Debug)]
struct ColumnMap {
    n_cols: usize,
    idx: BTreeMap<String, usize>,
}

impl ColumnMap {
    fn from_header(names: &[&str]) -> ColumnMap {
        ColumnMap {
            n_cols: names.len(),
            idx: names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.to_string(), i))
                .collect(),
        }
    }

    fn get(&self, name: &str) -> Option<usize> {
        self.idx.get(name).copied()
    }
}

/// Split one data row into exactly `n_cols` fields, applying the IoT-23
/// space-separated-label quirk when the tab split comes up short.
fn split_row(line: &str, n_cols: usize) -> Option<Vec<String>> {
    let mut fields: Vec<String> = line.split('\t').map(str::to_string).collect();
    if fields.len() < n_cols {
        if let Some(last) = fields.pop() {
            let pieces: Vec<String> = last.split_whitespace().map(str::to_string).collect();
            if pieces.is_empty() {
                fields.push(last);
            } else {
                fields.extend(pieces);
            }
        }
    }
    if fields.len() == n_cols {
        Some(fields)
    } else {
        None
    }
}

/// Parse a whole log from a buffered reader, in file order.
pub fn parse_conn_log<R: BufRead>(reader: R) -> Result<Vec<FlowRecord>> {
    let mut columns: Option<ColumnMap> = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#fields") {
            let names: Vec<&str> = rest.split(['\t', ' ']).filter(|s| !s.is_empty()).collect();
            columns = Some(ColumnMap::from_header(&names));
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols = columns
            .as_ref()
            .ok_or_else(|| Error::InvalidLog("data row before any #fields header".into()))?;
        records.push(parse_row(line, cols, line_no)?);
    }
    if columns.is_none() {
        return Err(Error::InvalidLog("no #fields header found".into()));
    }
    Ok(records)
}

pub fn parse_conn_log_str(text: &str) -> Result<Vec<FlowRecord>> {
    parse_conn_log(text.as_bytes())
}

pub fn parse_conn_log_file(path: &Path) -> Result<Vec<FlowRecord>> {
    parse_conn_log(BufReader::new(File::open(path)?))
}

fn parse_row(line: &str, cols: &ColumnMap, line_no: usize) -> Result<FlowRecord> {
    let fields = split_row(line, cols.n_cols).ok_or(Error::MalformedRow {
        line: line_no,
        msg: format!(
            "expected {} columns, got {} after quirk handling",
            cols.n_cols,
            line.split('\t').count()
        ),
    })?;
    let r = RowReader { line: line_no };

    let ts: f64 = r.parse(r.required(&fields, cols.get("ts"), "ts")?, "ts")?;
    if !ts.is_finite() {
        return Err(r.err(format!("non-finite ts {ts}")));
    }
    let uid = r.required(&fields, cols.get("uid"), "uid")?.to_string();
    let orig_h = r
        .required(&fields, cols.get("id.orig_h"), "id.orig_h")?
        .to_string();
    let orig_p: u32 = r.parse(
        r.required(&fields, cols.get("id.orig_p"), "id.orig_p")?,
        "port",
    )?;
    let resp_h = r
        .required(&fields, cols.get("id.resp_h"), "id.resp_h")?
        .to_string();
    let resp_p: u32 = r.parse(
        r.required(&fields, cols.get("id.resp_p"), "id.resp_p")?,
        "port",
    )?;
    for (p, name) in [(orig_p, "id.orig_p"), (resp_p, "id.resp_p")] {
        if p > 65535 {
            return Err(r.err(format!("{name} {p} out of range 0-65535")));
        }
    }
    let proto = r.required(&fields, cols.get("proto"), "proto")?.to_string();
    let conn_state = r
        .required(&fields, cols.get("conn_state"), "conn_state")?
        .to_string();

    let opt_f64 = |idx: &str| -> Result<Option<f64>> {
        r.raw(&fields, cols.get(idx))
            .map(|t| r.parse(t, idx))
            .transpose()
    };
    let opt_u64 = |idx: &str| -> Result<Option<u64>> {
        r.raw(&fields, cols.get(idx))
            .map(|t| r.parse(t, idx))
            .transpose()
    };
    let req_u64 = |idx: &str| -> Result<u64> {
        r.parse(r.required(&fields, cols.get(idx), idx)?, idx)
    };

    let duration = opt_f64("duration")?;
    if let Some(d) = duration {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(r.err(format!("invalid duration {d}")));
        }
    }

    let label_tok = r.required(&fields, cols.get("label"), "label")?;
    let binary_label = match label_tok.to_ascii_lowercase().as_str() {
        "benign" => BinaryLabel::Benign,
        "malicious" => BinaryLabel::Malicious,
        other => return Err(r.err(format!("unknown label `{other}`"))),
    };
    let detailed_label = r
        .raw(&fields, cols.get("detailed-label"))
        .map(str::to_string)
        // benign rows carry `-`; treat any leftover "benign" marker as absent
        .filter(|_| binary_label == BinaryLabel::Malicious);
    if binary_label == BinaryLabel::Malicious && detailed_label.is_none() {
        return Err(r.err("malicious row without a detailed label".into()));
    }

    Ok(FlowRecord {
        ts,
        uid,
        orig_h,
        orig_p: orig_p as u16,
        resp_h,
        resp_p: resp_p as u16,
        proto,
        service: r.raw(&fields, cols.get("service")).map(str::to_string),
        duration,
        orig_bytes: opt_u64("orig_bytes")?,
        resp_bytes: opt_u64("resp_bytes")?,
        conn_state,
        local_orig: r.opt_bool(r.raw(&fields, cols.get("local_orig")), "local_orig")?,
        local_resp: r.opt_bool(r.raw(&fields, cols.get("local_resp")), "local_resp")?,
        missed_bytes: req_u64("missed_bytes")?,
        history: r.raw(&fields, cols.get("history")).map(str::to_string),
        orig_pkts: req_u64("orig_pkts")?,
        orig_ip_bytes: req_u64("orig_ip_bytes")?,
        resp_pkts: req_u64("resp_pkts")?,
        resp_ip_bytes: req_u64("resp_ip_bytes")?,
        binary_label,
        detailed_label,
    })
}

impl FlowRecord {
    /// Serialize back to a standard 23-column tab-separated row.
    /// Re-parsing the result yields an equal record.
    pub fn to_tsv_row(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map_or("-".to_string(), T::to_string)
        }
        fn opt_bool(v: &Option<bool>) -> &'static str {
            match v {
                None => "-",
                Some(true) => "T",
                Some(false) => "F",
            }
        }
        let mut row = String::new();
        let _ = write!(
            row,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t-\t{}\t{}",
            self.ts,
            self.uid,
            self.orig_h,
            self.orig_p,
            self.resp_h,
            self.resp_p,
            self.proto,
            opt(&self.service),
            opt(&self.duration),
            opt(&self.orig_bytes),
            opt(&self.resp_bytes),
            self.conn_state,
            opt_bool(&self.local_orig),
            opt_bool(&self.local_resp),
            self.missed_bytes,
            opt(&self.history),
            self.orig_pkts,
            self.orig_ip_bytes,
            self.resp_pkts,
            self.resp_ip_bytes,
            match self.binary_label {
                BinaryLabel::Benign => "Benign",
                BinaryLabel::Malicious => "Malicious",
            },
            opt(&self.detailed_label),
        );
        row
    }
}

/// Render a full log (header + rows) that [`parse_conn_log`] accepts.
pub fn write_conn_log(records: &[FlowRecord]) -> String {
    let mut out = String::new();
    out.push_str("#separator \\x09\n");
    out.push_str("#fields\t");
    out.push_str(&CONN_FIELDS.join("\t"));
    out.push('\n');
    for rec in records {
        out.push_str(&rec.to_tsv_row());
        out.push('\n');
    }
    out.push_str("#close\n");
    out
}

/// Per-class counts over consolidated class names.
pub fn summarize_capture(records: &[FlowRecord]) -> Result<CaptureSummary> {
    if records.is_empty() {
        return Err(Error::input("cannot summarize an empty capture"));
    }
    let mut per_class = BTreeMap::new();
    for rec in records {
        *per_class.entry(consolidate_labels(rec)?).or_insert(0) += 1;
    }
    Ok(CaptureSummary {
        total_samples: records.len(),
        per_class,
        malware_type: None,
    })
}
