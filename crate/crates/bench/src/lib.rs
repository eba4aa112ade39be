//! Shared fixtures for the criterion benchmarks.

use flowsentry_core::preprocess::{prepare_capture, EncodedDataset, Scenario, SplitSpec};
use flowsentry_core::synth::synth_capture;
use flowsentry_core::parse_conn_log_str;

/// A mid-sized mixed capture rendered as conn.log text.
pub fn capture_text(n_benign: usize) -> String {
    synth_capture(
        n_benign,
        &[
            ("PartOfAHorizontalPortScan", n_benign / 4),
            ("C&C", n_benign / 16),
            ("DDoS", n_benign / 16),
        ],
        42,
    )
}

/// Encoded train/eval pair from a synthetic capture.
pub fn encoded(n_benign: usize, scenario: Scenario) -> (EncodedDataset, EncodedDataset) {
    let records = parse_conn_log_str(&capture_text(n_benign)).unwrap();
    prepare_capture(&records, scenario, &SplitSpec::default()).unwrap()
}
