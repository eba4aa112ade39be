//! The preprocessing stage: label consolidation, singleton-class removal,
//! balanced subset carving, feature encoding, scaling, splitting, folding
//! and contamination subsampling.
//!
//! Encoding uses ten scaled numeric features (ports, duration, byte and
//! packet counts) and four one-hot categorical features (proto, service,
//! conn_state, history). Identifier columns (ts, uid, addresses) are
//! excluded so models cannot key on endpoints.

use std::collections::BTreeMap;
use std::io::Write;


use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::flow::{BinaryLabel, FlowRecord};
use crate::util::{derive_seed, rng_from_seed, sample_without_replacement, shuffled_indices};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Binary,
    Multiclass,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::Binary => "binary",
            Scenario::Multiclass => "multiclass",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Scenario::Binary),
            "multiclass" | "multi" => Ok(Scenario::Multiclass),
            other => Err(Error::input(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Map a record to its consolidated class name.
///
/// Benign rows become `Benign`; detailed labels pass through verbatim except
/// for the two shortened ones (`POAHPS`, `C&C-FD`).
pub fn consolidate_labels(record: &FlowRecord) -> Result<String> {
    match record.binary_label {
        BinaryLabel::Benign => Ok("Benign".to_string()),
        BinaryLabel::Malicious => match record.detailed_label.as_deref() {
            Some("PartOfAHorizontalPortScan") => Ok("POAHPS".to_string()),
            Some("C&C-FileDownload") => Ok("C&C-FD".to_string()),
            Some(other) => Ok(other.to_string()),
            None => Err(Error::input(
                "malicious record without a detailed label cannot be consolidated",
            )),
        },
    }
}

pub fn consolidate_all(records: &[FlowRecord]) -> Result<Vec<String>> {
    records.iter().map(consolidate_labels).collect()
}

/// Deterministic class ordering: `Benign` first, the rest lexicographic.
pub fn class_order(labels: &[String]) -> Vec<String> {
    let mut names: Vec<String> = labels.to_vec();
    names.sort();
    names.dedup();
    if let Some(pos) = names.iter().position(|n| n == "Benign") {
        let benign = names.remove(pos);
        names.insert(0, benign);
    }
    names
}

/// Remove every class that has exactly one sample (the sample is discarded);
/// order of the remaining records is preserved.
pub fn drop_single_sample_classes(records: &[FlowRecord]) -> Result<Vec<FlowRecord>> {
    let labels = consolidate_all(records)?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in &labels {
        *counts.entry(l.as_str()).or_insert(0) += 1;
    }
    Ok(records
        .iter()
        .zip(&labels)
        .filter(|(_, l)| counts[l.as_str()] > 1)
        .map(|(r, _)| r.clone())
        .collect())
}

/// Exact per-class sample counts for one carved subset.
#[derive(Debug, Clone)]
pub struct CarveTargets {
    pub name: &'static str,
    /// (class name, samples to draw)
    pub per_class: Vec<(&'static str, usize)>,
}

/// The three balanced subsets carved out of the full 1-1 capture.
pub fn standard_carve_targets() -> Vec<CarveTargets> {
    vec![
        CarveTargets {
            name: "1-1-large",
            per_class: vec![("Benign", 200_000), ("POAHPS", 199_996), ("C&C", 4)],
        },
        CarveTargets {
            name: "1-1-medium",
            per_class: vec![("Benign", 100_000), ("POAHPS", 99_999), ("C&C", 1)],
        },
        CarveTargets {
            name: "1-1-small",
            per_class: vec![("Benign", 10_000), ("POAHPS", 10_000)],
        },
    ]
}

/// Draw one subset with exact per-class counts, sampling uniformly at random
/// within each class. Output keeps the original file order.
pub fn carve_with_targets(
    records: &[FlowRecord],
    targets: &CarveTargets,
    seed: u64,
) -> Result<Vec<FlowRecord>> {
    let labels = consolidate_all(records)?;
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let mut chosen: Vec<usize> = Vec::new();
    for (ci, &(class, want)) in targets.per_class.iter().enumerate() {
        let have = by_class.get(class).map_or(0, Vec::len);
        if have < want {
            return Err(Error::input(format!(
                "subset {}: class {class} has {have} samples, need {want}",
                targets.name
            )));
        }
        let mut rng = rng_from_seed(derive_seed(seed, ci as u64));
        let picks = sample_without_replacement(&mut rng, have, want);
        let pool = &by_class[class];
        chosen.extend(picks.into_iter().map(|p| pool[p]));
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| records[i].clone()).collect())
}

/// Carve the three standard subsets from the full 1-1 capture.
pub fn carve_subsets(
    records: &[FlowRecord],
    seed: u64,
) -> Result<Vec<(&'static str, Vec<FlowRecord>)>> {
    standard_carve_targets()
        .iter()
        .enumerate()
        .map(|(i, t)| Ok((t.name, carve_with_targets(records, t, derive_seed(seed, i as u64))?)))
        .collect()
}

pub const NUMERIC_FEATURES: [&str; 10] = [
    "orig_p",
    "resp_p",
    "duration",
    "orig_bytes",
    "resp_bytes",
    "missed_bytes",
    "orig_pkts",
    "orig_ip_bytes",
    "resp_pkts",
    "resp_ip_bytes",
];

pub const CATEGORICAL_FEATURES: [&str; 4] = ["proto", "service", "conn_state", "history"];

/// Reserved vocabulary slot for values unseen during schema fitting.
pub const UNKNOWN_TOKEN: &str = "unknown";
/// Token that missing categorical values map to; it enters the vocabulary
/// like any observed value, so "absent" stays a signal.
pub const MISSING_TOKEN: &str = "-";

fn numeric_value(rec: &FlowRecord, feature: &str) -> Option<f64> {
    match feature {
        "orig_p" => Some(rec.orig_p as f64),
        "resp_p" => Some(rec.resp_p as f64),
        "duration" => rec.duration,
        "orig_bytes" => rec.orig_bytes.map(|v| v as f64),
        "resp_bytes" => rec.resp_bytes.map(|v| v as f64),
        "missed_bytes" => Some(rec.missed_bytes as f64),
        "orig_pkts" => Some(rec.orig_pkts as f64),
        "orig_ip_bytes" => Some(rec.orig_ip_bytes as f64),
        "resp_pkts" => Some(rec.resp_pkts as f64),
        "resp_ip_bytes" => Some(rec.resp_ip_bytes as f64),
        _ => unreachable!("unknown numeric feature {feature}"),
    }
}

fn categorical_value<'a>(rec: &'a FlowRecord, feature: &str) -> &'a str {
    match feature {
        "proto" => &rec.proto,
        "service" => rec.service.as_deref().unwrap_or(MISSING_TOKEN),
        "conn_state" => &rec.conn_state,
        "history" => rec.history.as_deref().unwrap_or(MISSING_TOKEN),
        _ => unreachable!("unknown categorical feature {feature}"),
    }
}

/// Encoding recipe fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub numeric_features: Vec<String>,
    /// Per numeric feature: (min, max) observed in training.
    pub scale_params: Vec<(f64, f64)>,
    /// Per categorical feature: ordered value list ending with the
    /// reserved unknown slot.
    pub categorical_vocabularies: Vec<(String, Vec<String>)>,
}

impl FeatureSchema {
    /// Total encoded width (NF).
    pub fn nf(&self) -> usize {
        self.numeric_features.len()
            + self
                .categorical_vocabularies
                .iter()
                .map(|(_, v)| v.len())
                .sum::<usize>()
    }

    /// Column names in encoding order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.numeric_features.clone();
        for (feat, vocab) in &self.categorical_vocabularies {
            for value in vocab {
                names.push(format!("{feat}={value}"));
            }
        }
        names
    }

    fn vocab_index(vocab: &[String], token: &str) -> usize {
        vocab
            .iter()
            .position(|v| v == token)
            .unwrap_or(vocab.len() - 1) // unknown slot is always last
    }
}

/// Fit min/max scaling and categorical vocabularies on training flows.
pub fn build_feature_schema(train_flows: &[FlowRecord]) -> FeatureSchema {
    let scale_params = NUMERIC_FEATURES
        .iter()
        .map(|feat| {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for rec in train_flows {
                if let Some(v) = numeric_value(rec, feat) {
                    min = min.min(v);
                    max = max.max(v);
                }
            }
            if min.is_finite() {
                (min, max)
            } else {
                (0.0, 0.0) // feature entirely missing in training
            }
        })
        .collect();
    let categorical_vocabularies = CATEGORICAL_FEATURES
        .iter()
        .map(|feat| {
            let mut values: Vec<String> = train_flows
                .iter()
                .map(|rec| categorical_value(rec, feat).to_string())
                .collect();
            values.sort();
            values.dedup();
            if values.iter().all(|v| v != UNKNOWN_TOKEN) {
                values.push(UNKNOWN_TOKEN.to_string());
            }
            (feat.to_string(), values)
        })
        .collect();
    FeatureSchema {
        numeric_features: NUMERIC_FEATURES.iter().map(|s| s.to_string()).collect(),
        scale_params,
        categorical_vocabularies,
    }
}

/// Numeric feature matrix plus both target encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub features: Matrix,
    /// 1 = Malicious.
    pub binary_targets: Vec<u8>,
    pub multiclass_targets: Vec<usize>,
    pub class_names: Vec<String>,
    pub schema: FeatureSchema,
}

impl EncodedDataset {
    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn nf(&self) -> usize {
        self.features.n_cols()
    }

    pub fn select(&self, rows: &[usize]) -> EncodedDataset {
        EncodedDataset {
            features: self.features.select_rows(rows),
            binary_targets: rows.iter().map(|&r| self.binary_targets[r]).collect(),
            multiclass_targets: rows.iter().map(|&r| self.multiclass_targets[r]).collect(),
            class_names: self.class_names.clone(),
            schema: self.schema.clone(),
        }
    }

    /// Targets for one classification scenario, as class indices.
    pub fn targets(&self, scenario: Scenario) -> Vec<usize> {
        match scenario {
            Scenario::Binary => self.binary_targets.iter().map(|&b| b as usize).collect(),
            Scenario::Multiclass => self.multiclass_targets.clone(),
        }
    }

    pub fn scenario_class_names(&self, scenario: Scenario) -> Vec<String> {
        match scenario {
            Scenario::Binary => vec!["Benign".to_string(), "Malicious".to_string()],
            Scenario::Multiclass => self.class_names.clone(),
        }
    }

    pub fn n_classes(&self, scenario: Scenario) -> usize {
        match scenario {
            Scenario::Binary => 2,
            Scenario::Multiclass => self.class_names.len(),
        }
    }

    /// Fraction of rows labeled malicious.
    pub fn malicious_ratio(&self) -> f64 {
        if self.binary_targets.is_empty() {
            0.0
        } else {
            self.binary_targets.iter().filter(|&&b| b == 1).count() as f64
                / self.binary_targets.len() as f64
        }
    }

    /// CSV export: feature columns, then `label_binary`, `label_multi`.
    /// Vocabulary tokens may contain commas (e.g. a `http,ssl` service), so
    /// header cells go through a real CSV writer.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        let mut header = self.schema.feature_names();
        header.push("label_binary".to_string());
        header.push("label_multi".to_string());
        writer.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n_rows() {
            row.clear();
            row.extend(self.features.row(i).iter().map(f64::to_string));
            row.push(self.binary_targets[i].to_string());
            row.push(self.multiclass_targets[i].to_string());
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Encode flows against a fitted schema and a fixed class ordering.
///
/// Numerics scale by `(v - min) / (max - min)`, clamped to `[0, 1]`;
/// a missing numeric encodes as 0. Categoricals one-hot against the
/// vocabulary with unseen values hitting the unknown slot.
pub fn vectorize(
    flows: &[FlowRecord],
    schema: &FeatureSchema,
    class_names: &[String],
) -> Result<EncodedDataset> {
    let nf = schema.nf();
    let mut features = Matrix::zeros(0, nf);
    let mut binary_targets = Vec::with_capacity(flows.len());
    let mut multiclass_targets = Vec::with_capacity(flows.len());
    let mut row = vec![0.0; nf];
    for rec in flows {
        row.iter_mut().for_each(|v| *v = 0.0);
        for (j, feat) in schema.numeric_features.iter().enumerate() {
            let (min, max) = schema.scale_params[j];
            row[j] = match numeric_value(rec, feat) {
                None => 0.0,
                Some(_) if max <= min => 0.0, // degenerate range
                Some(v) => ((v - min) / (max - min)).clamp(0.0, 1.0),
            };
        }
        let mut offset = schema.numeric_features.len();
        for (feat, vocab) in &schema.categorical_vocabularies {
            let token = categorical_value(rec, feat);
            row[offset + FeatureSchema::vocab_index(vocab, token)] = 1.0;
            offset += vocab.len();
        }
        features.push_row(&row);

        binary_targets.push(match rec.binary_label {
            BinaryLabel::Benign => 0,
            BinaryLabel::Malicious => 1,
        });
        let label = consolidate_labels(rec)?;
        let idx = class_names
            .iter()
            .position(|c| *c == label)
            .ok_or_else(|| Error::input(format!("label `{label}` not in class list")))?;
        multiclass_targets.push(idx);
    }
    Ok(EncodedDataset {
        features,
        binary_targets,
        multiclass_targets,
        class_names: class_names.to_vec(),
        schema: schema.clone(),
    })
}

/// How to cut a dataset into train and evaluation sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub eval_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            eval_fraction: 0.2,
            seed: 1,
            stratified: true,
        }
    }
}

/// Split row indices into (train, eval) by class-stratified sampling.
/// Deterministic under the given seed; every class lands on both sides.
pub fn stratified_split_indices(
    labels: &[usize],
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0 < spec.eval_fraction && spec.eval_fraction < 1.0) {
        return Err(Error::input(format!(
            "eval_fraction {} outside (0,1)",
            spec.eval_fraction
        )));
    }
    if labels.is_empty() {
        return Err(Error::input("cannot split an empty dataset"));
    }
    let mut train = Vec::new();
    let mut eval = Vec::new();
    if !spec.stratified {
        let order = shuffled_indices(&mut rng_from_seed(spec.seed), labels.len());
        let n_eval = ((labels.len() as f64) * spec.eval_fraction).round() as usize;
        let n_eval = n_eval.clamp(1, labels.len() - 1);
        eval.extend(&order[..n_eval]);
        train.extend(&order[n_eval..]);
    } else {
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &c) in labels.iter().enumerate() {
            by_class.entry(c).or_default().push(i);
        }
        for (c, members) in &by_class {
            if members.len() < 2 {
                return Err(Error::input(format!(
                    "class {c} has {} sample(s); need at least 2 to appear on both sides",
                    members.len()
                )));
            }
            let mut rng = rng_from_seed(derive_seed(spec.seed, *c as u64));
            let n_eval = ((members.len() as f64) * spec.eval_fraction).round() as usize;
            let n_eval = n_eval.clamp(1, members.len() - 1);
            let picks = sample_without_replacement(&mut rng, members.len(), n_eval);
            let mut is_eval = vec![false; members.len()];
            for p in picks {
                is_eval[p] = true;
            }
            for (pos, &idx) in members.iter().enumerate() {
                if is_eval[pos] {
                    eval.push(idx);
                } else {
                    train.push(idx);
                }
            }
        }
    }
    train.sort_unstable();
    eval.sort_unstable();
    Ok((train, eval))
}

/// Stratified train/eval split of an encoded dataset.
pub fn split_train_eval(
    dataset: &EncodedDataset,
    scenario: Scenario,
    spec: &SplitSpec,
) -> Result<(EncodedDataset, EncodedDataset)> {
    let labels = dataset.targets(scenario);
    let (train, eval) = stratified_split_indices(&labels, spec)?;
    Ok((dataset.select(&train), dataset.select(&eval)))
}

/// `k` stratified folds of row indices: disjoint, exhaustive, class
/// proportions preserved within rounding. Classes smaller than `k` spread
/// round-robin, so up to `count` distinct folds receive a sample.
pub fn make_folds(labels: &[usize], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (c, members) in &by_class {
        let mut rng = rng_from_seed(derive_seed(seed, *c as u64));
        let order = shuffled_indices(&mut rng, members.len());
        for (pos, &m) in order.iter().enumerate() {
            folds[pos % k].push(members[m]);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    folds
}

/// Keep every benign row and randomly thin malicious rows until they make up
/// roughly `target_ratio` of the result. Already-clean data passes through.
pub fn subsample_contamination(
    dataset: &EncodedDataset,
    target_ratio: f64,
    seed: u64,
) -> Result<EncodedDataset> {
    if !(0.0 < target_ratio && target_ratio <= 0.5) {
        return Err(Error::input(format!(
            "contamination ratio {target_ratio} must be in (0, 0.5]"
        )));
    }
    let benign: Vec<usize> = (0..dataset.n_rows())
        .filter(|&i| dataset.binary_targets[i] == 0)
        .collect();
    let malicious: Vec<usize> = (0..dataset.n_rows())
        .filter(|&i| dataset.binary_targets[i] == 1)
        .collect();
    if benign.is_empty() {
        return Err(Error::input(
            "cannot subsample contamination without benign rows",
        ));
    }
    let current = malicious.len() as f64 / dataset.n_rows() as f64;
    if current <= target_ratio {
        return Ok(dataset.clone());
    }
    let keep = ((benign.len() as f64) * target_ratio / (1.0 - target_ratio)).round() as usize;
    let mut rng = rng_from_seed(seed);
    let picks = sample_without_replacement(&mut rng, malicious.len(), keep.min(malicious.len()));
    let mut rows: Vec<usize> = benign;
    rows.extend(picks.into_iter().map(|p| malicious[p]));
    rows.sort_unstable();
    Ok(dataset.select(&rows))
}

/// Scenario-aware flow-level split: consolidate labels, drop singleton
/// classes (multi-class only), then stratify into train and eval flows.
pub fn split_flows(
    records: &[FlowRecord],
    scenario: Scenario,
    spec: &SplitSpec,
) -> Result<(Vec<FlowRecord>, Vec<FlowRecord>)> {
    let working: Vec<FlowRecord> = match scenario {
        Scenario::Binary => records.to_vec(),
        Scenario::Multiclass => drop_single_sample_classes(records)?,
    };
    if working.is_empty() {
        return Err(Error::input("no rows left after preprocessing"));
    }
    let labels = consolidate_all(&working)?;
    let class_names = class_order(&labels);
    let label_idx: Vec<usize> = match scenario {
        Scenario::Binary => working
            .iter()
            .map(|r| (r.binary_label == BinaryLabel::Malicious) as usize)
            .collect(),
        Scenario::Multiclass => labels
            .iter()
            .map(|l| class_names.iter().position(|c| c == l).unwrap())
            .collect(),
    };
    let (train_idx, eval_idx) = stratified_split_indices(&label_idx, spec)?;
    Ok((
        train_idx.iter().map(|&i| working[i].clone()).collect(),
        eval_idx.iter().map(|&i| working[i].clone()).collect(),
    ))
}

/// Full front-end pipeline for one capture and scenario: consolidate, drop
/// singleton classes (multi-class only), split, fit schema on the training
/// side, and encode both sides.
pub fn prepare_capture(
    records: &[FlowRecord],
    scenario: Scenario,
    spec: &SplitSpec,
) -> Result<(EncodedDataset, EncodedDataset)> {
    let (train_flows, eval_flows) = split_flows(records, scenario, spec)?;
    let mut labels = consolidate_all(&train_flows)?;
    labels.extend(consolidate_all(&eval_flows)?);
    let class_names = class_order(&labels);
    let schema = build_feature_schema(&train_flows);
    let train = vectorize(&train_flows, &schema, &class_names)?;
    let eval = vectorize(&eval_flows, &schema, &class_names)?;
    Ok((train, eval))
}
