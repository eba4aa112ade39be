//! Run persistence and report rendering: CSV, markdown tables and grouped
//! bar charts as SVG. All outputs are byte-deterministic for identical
//! inputs.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::preprocess::Scenario;

use super::reference::{DATASETS, MODEL_ORDER};
use super::{DeltaRow, EvalRun, Phase};

pub fn write_runs_csv<W: Write>(runs: &[EvalRun], w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for run in runs {
        writer.serialize(run)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_runs_csv<R: Read>(r: R) -> Result<Vec<EvalRun>> {
    let mut reader = csv::Reader::from_reader(r);
    let mut runs = Vec::new();
    for row in reader.deserialize() {
        runs.push(row?);
    }
    Ok(runs)
}

pub fn write_deltas_csv<W: Write>(deltas: &[DeltaRow], w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for row in deltas {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn model_rank(name: &str) -> usize {
    MODEL_ORDER.iter().position(|m| *m == name).unwrap_or(MODEL_ORDER.len())
}

fn dataset_rank(name: &str) -> usize {
    DATASETS.iter().position(|d| *d == name).unwrap_or(DATASETS.len())
}

fn sorted_runs(runs: &[EvalRun]) -> Vec<EvalRun> {
    let mut out = runs.to_vec();
    out.sort_by(|a, b| {
        (a.scenario as u8, a.phase as u8, dataset_rank(&a.dataset), model_rank(&a.model))
            .cmp(&(b.scenario as u8, b.phase as u8, dataset_rank(&b.dataset), model_rank(&b.model)))
            .then_with(|| a.dataset.cmp(&b.dataset))
            .then_with(|| a.model.cmp(&b.model))
    });
    out
}

fn present_datasets(runs: &[EvalRun], scenario: Scenario, phase: Phase) -> Vec<String> {
    let mut names: Vec<String> = runs
        .iter()
        .filter(|r| r.scenario == scenario && r.phase == phase)
        .map(|r| r.dataset.clone())
        .collect();
    names.sort_by_key(|n| (dataset_rank(n), n.clone()));
    names.dedup();
    names
}

fn present_models(runs: &[EvalRun], scenario: Scenario, phase: Phase) -> Vec<String> {
    let mut names: Vec<String> = runs
        .iter()
        .filter(|r| r.scenario == scenario && r.phase == phase)
        .map(|r| r.model.clone())
        .collect();
    names.sort_by_key(|n| (model_rank(n), n.clone()));
    names.dedup();
    names
}

fn find_score(
    runs: &[EvalRun],
    scenario: Scenario,
    phase: Phase,
    model: &str,
    dataset: &str,
) -> Option<f64> {
    runs.iter()
        .find(|r| {
            r.scenario == scenario && r.phase == phase && r.model == model && r.dataset == dataset
        })
        .map(|r| r.score)
}

fn score_matrix_md(out: &mut String, runs: &[EvalRun], scenario: Scenario, phase: Phase, title: &str) {
    let datasets = present_datasets(runs, scenario, phase);
    let models = present_models(runs, scenario, phase);
    if datasets.is_empty() {
        return;
    }
    let _ = writeln!(out, "## {title}\n");
    let _ = writeln!(out, "| Model | {} |", datasets.join(" | "));
    let _ = writeln!(out, "|---|{}|", datasets.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for model in &models {
        let cells: Vec<String> = datasets
            .iter()
            .map(|d| {
                find_score(runs, scenario, phase, model, d)
                    .map_or("-".to_string(), |s| format!("{s:.2}"))
            })
            .collect();
        let _ = writeln!(out, "| {model} | {} |", cells.join(" | "));
    }
    let _ = writeln!(out);
}

fn render_markdown(runs: &[EvalRun], deltas: &[DeltaRow]) -> String {
    let mut out = String::new();
    out.push_str("# Evaluation report\n\n");
    out.push_str(
        "Scores are F1 percentages: the malicious-class F1 in the binary \
         scenario and the macro-averaged F1 in the multi-class scenario. \
         Cross-validation rows are 5-fold means.\n\n",
    );
    score_matrix_md(&mut out, runs, Scenario::Binary, Phase::Cv, "Binary cross-validation");
    score_matrix_md(&mut out, runs, Scenario::Binary, Phase::Eval, "Binary evaluation");
    score_matrix_md(&mut out, runs, Scenario::Multiclass, Phase::Cv, "Multi-class cross-validation");
    score_matrix_md(&mut out, runs, Scenario::Multiclass, Phase::Eval, "Multi-class evaluation");

    let produced: Vec<&DeltaRow> = deltas.iter().filter(|d| d.produced.is_some()).collect();
    if !produced.is_empty() {
        out.push_str("## Deltas against the embedded reference scores\n\n");
        out.push_str("| Scenario | Phase | Model | Dataset | Produced | Reference | Delta |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        for d in &produced {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.2} | {:.2} | {:+.2} |",
                d.scenario,
                d.phase,
                d.model,
                d.dataset,
                d.produced.unwrap(),
                d.reference,
                d.delta.unwrap()
            );
        }
        out.push('\n');
    }
    let missing = deltas.len() - produced.len();
    if missing > 0 {
        let _ = writeln!(
            out,
            "{missing} reference cell(s) have no produced run and were skipped.\n"
        );
    }
    out
}

const SERIES_COLORS: [&str; 6] = [
    "#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c",
];

/// Grouped bar chart: one group per dataset, one bar per model.
fn grouped_bar_svg(title: &str, runs: &[EvalRun], scenario: Scenario, phase: Phase) -> String {
    let datasets = present_datasets(runs, scenario, phase);
    let models = present_models(runs, scenario, phase);
    let bar_w = 14.0;
    let bar_gap = 2.0;
    let group_pad = 18.0;
    let group_w = models.len() as f64 * (bar_w + bar_gap) + group_pad;
    let margin_left = 50.0;
    let margin_top = 48.0;
    let plot_h = 240.0;
    let legend_w: f64 = models.iter().map(|m| 13.0 + 9.0 * m.len() as f64 + 16.0).sum();
    let width = (margin_left + datasets.len() as f64 * group_w + 30.0).max(margin_left + legend_w);
    let height = margin_top + plot_h + 40.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" font-weight=\"bold\">{title}</text>",
        margin_left
    );
    // legend
    let mut lx = margin_left;
    for (i, model) in models.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let _ = writeln!(
            svg,
            "<rect x=\"{lx:.1}\" y=\"28\" width=\"10\" height=\"10\" fill=\"{color}\"/><text x=\"{:.1}\" y=\"37\" font-family=\"sans-serif\" font-size=\"11\">{model}</text>",
            lx + 13.0
        );
        lx += 13.0 + 9.0 * model.len() as f64 + 16.0;
    }
    // y axis with gridlines every 20 points
    for tick in 0..=5 {
        let v = tick as f64 * 20.0;
        let y = margin_top + plot_h - plot_h * v / 100.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{margin_left:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/><text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{v:.0}</text>",
            width - 20.0,
            margin_left - 6.0,
            y + 3.5
        );
    }
    // bars
    for (d, dataset) in datasets.iter().enumerate() {
        let gx = margin_left + d as f64 * group_w + group_pad / 2.0;
        for (m, model) in models.iter().enumerate() {
            if let Some(score) = find_score(runs, scenario, phase, model, dataset) {
                let h = plot_h * score.clamp(0.0, 100.0) / 100.0;
                let x = gx + m as f64 * (bar_w + bar_gap);
                let y = margin_top + plot_h - h;
                let color = SERIES_COLORS[m % SERIES_COLORS.len()];
                let _ = writeln!(
                    svg,
                    "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"{color}\"><title>{model} / {dataset}: {score:.2}</title></rect>"
                );
            }
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{dataset}</text>",
            gx + (models.len() as f64 * (bar_w + bar_gap)) / 2.0,
            margin_top + plot_h + 14.0
        );
    }
    // baseline
    let _ = writeln!(
        svg,
        "<line x1=\"{margin_left:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        margin_top + plot_h,
        width - 20.0,
        margin_top + plot_h
    );
    svg.push_str("</svg>\n");
    svg
}

/// Write `runs.csv`, `deltas.csv`, `report.md` and one evaluation chart per
/// scenario into `out_dir`; returns the created paths.
pub fn render_report(runs: &[EvalRun], deltas: &[DeltaRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let runs = sorted_runs(runs);
    let mut written = Vec::new();

    let path = out_dir.join("runs.csv");
    write_runs_csv(&runs, fs::File::create(&path)?)?;
    written.push(path);

    let path = out_dir.join("deltas.csv");
    write_deltas_csv(deltas, fs::File::create(&path)?)?;
    written.push(path);

    let path = out_dir.join("report.md");
    fs::write(&path, render_markdown(&runs, deltas))?;
    written.push(path);

    let path = out_dir.join("binary.svg");
    fs::write(
        &path,
        grouped_bar_svg("Binary evaluation F1", &runs, Scenario::Binary, Phase::Eval),
    )?;
    written.push(path);

    let path = out_dir.join("multiclass.svg");
    fs::write(
        &path,
        grouped_bar_svg(
            "Multi-class evaluation macro-F1",
            &runs,
            Scenario::Multiclass,
            Phase::Eval,
        ),
    )?;
    written.push(path);

    Ok(written)
}
