//! Run the full evaluation protocol on a synthetic labeled capture and
//! render the report. A quick tour of the library API end to end.
//!
//! ```sh
//! cargo run --release -p flowsentry-core --example synthetic_protocol -- out/
//! ```

use flowsentry_core::harness::{compare_runs, render_report, run_capture_models, ModelKind, ProtocolOptions};
use flowsentry_core::preprocess::Scenario;
use flowsentry_core::synth::synth_capture;
use flowsentry_core::parse_conn_log_str;

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out".to_string());
    let text = synth_capture(
        2_000,
        &[("PartOfAHorizontalPortScan", 400), ("C&C", 120), ("DDoS", 60)],
        7,
    );
    let records = parse_conn_log_str(&text).unwrap();
    let options = ProtocolOptions::default();

    let mut runs = Vec::new();
    for scenario in [Scenario::Binary, Scenario::Multiclass] {
        runs.extend(
            run_capture_models(&records, "42-1", scenario, &ModelKind::ALL, &options).unwrap(),
        );
    }
    for run in &runs {
        println!(
            "{:<10} {:<4} {:<9} score {:>6.2}  ({:.2}s)",
            run.scenario.to_string(),
            run.phase.to_string(),
            run.model,
            run.score,
            run.wall_time_s
        );
    }
    let deltas = compare_runs(&runs);
    let written = render_report(&runs, &deltas, std::path::Path::new(&out)).unwrap();
    for path in written {
        println!("wrote {}", path.display());
    }
}
