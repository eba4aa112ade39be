//! Published reference scores and dataset metadata embedded for comparison.
//!
//! Binary cells are malicious-class F1 percentages; multi-class cells are
//! macro-averaged F1 percentages. Cross-validation cells are 5-fold means.

use crate::preprocess::Scenario;

use super::Phase;

/// Capture names in canonical presentation order.
pub const DATASETS: [&str; 9] = [
    "1-1-full",
    "1-1-large",
    "1-1-medium",
    "1-1-small",
    "20-1",
    "21-1",
    "34-1",
    "42-1",
    "44-1",
];

/// Captures that support the multi-class scenario.
pub const MULTI_DATASETS: [&str; 5] = ["1-1-full", "1-1-large", "34-1", "42-1", "44-1"];

pub const MODEL_ORDER: [&str; 6] = ["SVM", "XGBoost", "LightGBM", "iForest", "LOF", "DRL"];

/// Guess the canonical capture name from a file path. Longest ids match
/// first, and a bare `1-1` (the full capture) must not be the tail of
/// `21-1`, so a digit directly before a candidate rejects it.
pub fn infer_dataset_name(path: &str) -> Option<String> {
    const IDS: [&str; 12] = [
        "1-1-small",
        "1-1-medium",
        "1-1-large",
        "1-1-full",
        "20-1",
        "21-1",
        "34-1",
        "42-1",
        "44-1",
        "3-1",
        "8-1",
        "1-1",
    ];
    let bytes = path.as_bytes();
    for id in IDS {
        let mut search = 0;
        while let Some(pos) = path[search..].find(id) {
            let start = search + pos;
            let end = start + id.len();
            let before_ok = start == 0 || !bytes[start - 1].is_ascii_digit();
            let after_ok = end == bytes.len() || (!bytes[end].is_ascii_digit() && bytes[end] != b'-');
            if before_ok && after_ok {
                return Some(if id == "1-1" { "1-1-full".to_string() } else { id.to_string() });
            }
            search = start + 1;
        }
    }
    None
}

/// Malware family recorded for each capture.
pub fn dataset_malware(name: &str) -> Option<&'static str> {
    match name {
        "1-1-full" | "1-1-large" | "1-1-medium" | "1-1-small" => Some("Hide and Seek"),
        "20-1" | "21-1" => Some("Torii"),
        "34-1" | "44-1" => Some("Mirai"),
        "42-1" => Some("Trojan"),
        _ => None,
    }
}

const BINARY_CV: [(&str, [f64; 9]); 5] = [
    ("SVM", [100.0, 100.0, 100.0, 100.0, 100.0, 97.99, 99.30, 100.0, 97.84]),
    ("XGBoost", [99.99, 99.99, 99.99, 99.99, 100.0, 89.98, 98.14, 100.0, 97.84]),
    ("LightGBM", [100.0, 99.99, 99.99, 99.99, 100.0, 97.99, 99.73, 100.0, 97.84]),
    ("iForest", [76.62, 71.88, 71.82, 73.36, 93.75, 68.15, 88.20, 100.0, 88.79]),
    ("LOF", [62.18, 61.88, 61.03, 80.64, 93.54, 91.66, 97.43, 79.97, 87.89]),
];

const BINARY_EVAL: [(&str, [f64; 9]); 6] = [
    ("SVM", [100.0, 100.0, 100.0, 100.0, 95.43, 94.42, 99.43, 100.0, 100.0]),
    ("XGBoost", [99.99, 99.99, 99.99, 99.99, 95.43, 94.42, 98.84, 100.0, 96.28]),
    ("LightGBM", [100.0, 99.99, 100.0, 100.0, 95.43, 94.42, 99.76, 100.0, 96.28]),
    ("iForest", [96.46, 94.80, 94.68, 95.37, 100.0, 89.95, 75.08, 100.0, 90.91]),
    ("LOF", [53.46, 53.40, 54.66, 80.18, 89.95, 87.45, 96.80, 49.96, 100.0]),
    ("DRL", [99.91, 99.91, 99.97, 99.98, 78.49, 83.28, 98.65, 83.31, 75.39]),
];

const MULTI_CV: [(&str, [f64; 5]); 3] = [
    ("SVM", [66.67, 80.00, 95.67, 59.97, 97.66]),
    ("XGBoost", [66.66, 80.00, 97.30, 46.67, 96.44]),
    ("LightGBM", [66.66, 80.00, 98.77, 59.99, 97.66]),
];

const MULTI_EVAL: [(&str, [f64; 5]); 4] = [
    ("SVM", [66.67, 66.67, 95.89, 33.31, 100.0]),
    ("XGBoost", [66.66, 66.66, 95.59, 33.33, 100.0]),
    ("LightGBM", [66.66, 66.67, 99.64, 66.65, 100.0]),
    ("DRL", [66.64, 66.64, 63.75, 33.38, 88.38]),
];

/// One (scenario, phase, model, dataset) reference score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCell {
    pub scenario: Scenario,
    pub phase: Phase,
    pub model: &'static str,
    pub dataset: &'static str,
    pub score: f64,
}

/// Every embedded reference cell, in table order.
pub fn reference_cells() -> Vec<ReferenceCell> {
    let mut cells = Vec::new();
    let mut push = |scenario: Scenario,
                    phase: Phase,
                    rows: &[(&'static str, &[f64])],
                    datasets: &[&'static str]| {
        for (model, scores) in rows {
            for (dataset, &score) in datasets.iter().zip(scores.iter()) {
                cells.push(ReferenceCell {
                    scenario,
                    phase,
                    model,
                    dataset,
                    score,
                });
            }
        }
    };
    let rows: Vec<(&str, &[f64])> = BINARY_CV.iter().map(|(m, s)| (*m, s.as_slice())).collect();
    push(Scenario::Binary, Phase::Cv, &rows, &DATASETS);
    let rows: Vec<(&str, &[f64])> = BINARY_EVAL.iter().map(|(m, s)| (*m, s.as_slice())).collect();
    push(Scenario::Binary, Phase::Eval, &rows, &DATASETS);
    let rows: Vec<(&str, &[f64])> = MULTI_CV.iter().map(|(m, s)| (*m, s.as_slice())).collect();
    push(Scenario::Multiclass, Phase::Cv, &rows, &MULTI_DATASETS);
    let rows: Vec<(&str, &[f64])> = MULTI_EVAL.iter().map(|(m, s)| (*m, s.as_slice())).collect();
    push(Scenario::Multiclass, Phase::Eval, &rows, &MULTI_DATASETS);
    cells
}

pub fn reference_score(
    scenario: Scenario,
    phase: Phase,
    model: &str,
    dataset: &str,
) -> Option<f64> {
    reference_cells()
        .iter()
        .find(|c| {
            c.scenario == scenario && c.phase == phase && c.model == model && c.dataset == dataset
        })
        .map(|c| c.score)
}
