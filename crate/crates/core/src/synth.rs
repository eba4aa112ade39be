//! Synthetic data generators used by tests, benchmarks and examples.

use rand::Rng;

use crate::data::Matrix;
use crate::flow::{write_conn_log, BinaryLabel, FlowRecord};
use crate::preprocess::{EncodedDataset, FeatureSchema};
use crate::util::{derive_seed, rng_from_seed};

/// Gaussian blobs around the given centers; returns (points, blob index).
pub fn gaussian_blobs(
    centers: &[Vec<f64>],
    n_per_blob: usize,
    std: f64,
    seed: u64,
) -> (Matrix, Vec<usize>) {
    let dim = centers[0].len();
    let mut rng = rng_from_seed(seed);
    let mut rows = Vec::with_capacity(centers.len() * n_per_blob);
    let mut labels = Vec::with_capacity(centers.len() * n_per_blob);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per_blob {
            let row: Vec<f64> = (0..dim)
                .map(|d| center[d] + std * gauss(&mut rng))
                .collect();
            rows.push(row);
            labels.push(c);
        }
    }
    (Matrix::from_rows(rows).unwrap(), labels)
}

/// Box-Muller standard normal draw.
fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform points in the unit square labeled by the XOR of their quadrants.
pub fn xor_dataset(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.gen();
        let y: f64 = rng.gen();
        rows.push(vec![x, y]);
        labels.push(((x > 0.5) ^ (y > 0.5)) as usize);
    }
    (Matrix::from_rows(rows).unwrap(), labels)
}

/// A dense cluster plus a far-away small cluster; returns (points, is_outlier).
pub fn blob_with_outliers(
    n_inliers: usize,
    n_outliers: usize,
    dim: usize,
    seed: u64,
) -> (Matrix, Vec<bool>) {
    let mut rng = rng_from_seed(seed);
    let mut rows = Vec::with_capacity(n_inliers + n_outliers);
    let mut outlier = Vec::with_capacity(n_inliers + n_outliers);
    for _ in 0..n_inliers {
        rows.push((0..dim).map(|_| 0.1 * gauss(&mut rng)).collect());
        outlier.push(false);
    }
    for _ in 0..n_outliers {
        rows.push((0..dim).map(|_| 4.0 + 0.1 * gauss(&mut rng)).collect());
        outlier.push(true);
    }
    (Matrix::from_rows(rows).unwrap(), outlier)
}

/// Linearly separable two-class dataset wrapped as an [`EncodedDataset`],
/// with features already in `[0, 1]`. Class 1 plays the malicious role.
pub fn separable_dataset(n: usize, nf: usize, seed: u64) -> EncodedDataset {
    let mut rng = rng_from_seed(seed);
    let mut features = Matrix::zeros(0, nf);
    let mut binary_targets = Vec::with_capacity(n);
    let mut row = vec![0.0; nf];
    for i in 0..n {
        let label = (i % 2) as u8;
        let center = if label == 0 { 0.25 } else { 0.75 };
        for v in row.iter_mut() {
            *v = (center + 0.08 * gauss(&mut rng)).clamp(0.0, 1.0);
        }
        features.push_row(&row);
        binary_targets.push(label);
    }
    let schema = FeatureSchema {
        numeric_features: (0..nf).map(|j| format!("f{j}")).collect(),
        scale_params: vec![(0.0, 1.0); nf],
        categorical_vocabularies: Vec::new(),
    };
    EncodedDataset {
        features,
        multiclass_targets: binary_targets.iter().map(|&b| b as usize).collect(),
        binary_targets,
        class_names: vec!["Benign".to_string(), "Malicious".to_string()],
        schema,
    }
}

/// Render a synthetic labeled capture with per-class traffic signatures,
/// parseable by the conn.log reader. Each class gets a distinct,
/// learnable signature.
pub fn synth_capture(n_benign: usize, malicious: &[(&str, usize)], seed: u64) -> String {
    let mut records = Vec::new();
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    for i in 0..n_benign {
        records.push(benign_flow(&mut rng, i));
    }
    for (ci, &(label, count)) in malicious.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, 1 + ci as u64));
        for i in 0..count {
            records.push(malicious_flow(&mut rng, label, n_benign + i));
        }
    }
    write_conn_log(&records)
}

fn base_flow(uid: usize) -> FlowRecord {
    FlowRecord {
        ts: 1_540_000_000.0 + uid as f64,
        uid: format!("C{uid:08}"),
        orig_h: "192.168.1.195".into(),
        orig_p: 40000,
        resp_h: "10.10.10.10".into(),
        resp_p: 80,
        proto: "tcp".into(),
        service: None,
        duration: None,
        orig_bytes: None,
        resp_bytes: None,
        conn_state: "S0".into(),
        local_orig: None,
        local_resp: None,
        missed_bytes: 0,
        history: None,
        orig_pkts: 1,
        orig_ip_bytes: 60,
        resp_pkts: 0,
        resp_ip_bytes: 0,
        binary_label: BinaryLabel::Benign,
        detailed_label: None,
    }
}

fn benign_flow(rng: &mut impl Rng, uid: usize) -> FlowRecord {
    let mut f = base_flow(uid);
    f.orig_p = rng.gen_range(30_000..60_000);
    f.resp_p = *[443u16, 80, 53].get(rng.gen_range(0..3)).unwrap();
    f.service = Some(if f.resp_p == 53 { "dns" } else { "ssl" }.to_string());
    f.duration = Some(rng.gen_range(0.5..5.0));
    f.orig_bytes = Some(rng.gen_range(200..2_000));
    f.resp_bytes = Some(rng.gen_range(1_000..8_000));
    f.conn_state = "SF".into();
    f.history = Some("ShADadFf".into());
    f.orig_pkts = rng.gen_range(5..30);
    f.orig_ip_bytes = f.orig_bytes.unwrap() + 40 * f.orig_pkts;
    f.resp_pkts = rng.gen_range(5..30);
    f.resp_ip_bytes = f.resp_bytes.unwrap() + 40 * f.resp_pkts;
    f
}

fn malicious_flow(rng: &mut impl Rng, label: &str, uid: usize) -> FlowRecord {
    let mut f = base_flow(uid);
    f.binary_label = BinaryLabel::Malicious;
    f.detailed_label = Some(label.to_string());
    match label {
        "PartOfAHorizontalPortScan" => {
            f.orig_p = rng.gen_range(30_000..60_000);
            f.resp_p = *[23u16, 2323, 8080].get(rng.gen_range(0..3)).unwrap();
            f.conn_state = "S0".into();
            f.history = Some("S".into());
            f.orig_pkts = rng.gen_range(1..3);
            f.orig_ip_bytes = 60 * f.orig_pkts;
        }
        "DDoS" => {
            f.proto = "udp".into();
            f.resp_p = 53;
            f.conn_state = "S0".into();
            f.orig_pkts = rng.gen_range(50..200);
            f.orig_ip_bytes = 60 * f.orig_pkts;
        }
        "C&C" | "C&C-Torii" => {
            f.resp_p = if label == "C&C" { 6667 } else { 7547 };
            f.duration = Some(rng.gen_range(10.0..100.0));
            f.orig_bytes = Some(rng.gen_range(50..300));
            f.resp_bytes = Some(rng.gen_range(50..300));
            f.conn_state = "OTH".into();
            f.history = Some("DdA".into());
            f.orig_pkts = rng.gen_range(3..10);
            f.orig_ip_bytes = f.orig_bytes.unwrap() + 40 * f.orig_pkts;
            f.resp_pkts = rng.gen_range(3..10);
            f.resp_ip_bytes = f.resp_bytes.unwrap() + 40 * f.resp_pkts;
        }
        "C&C-FileDownload" | "FileDownload" => {
            f.resp_p = 80;
            f.service = Some("http".into());
            f.duration = Some(rng.gen_range(5.0..20.0));
            f.orig_bytes = Some(rng.gen_range(100..400));
            f.resp_bytes = Some(rng.gen_range(50_000..500_000));
            f.conn_state = "SF".into();
            f.history = Some("ShADadtFf".into());
            f.orig_pkts = rng.gen_range(10..40);
            f.orig_ip_bytes = f.orig_bytes.unwrap() + 40 * f.orig_pkts;
            f.resp_pkts = rng.gen_range(40..400);
            f.resp_ip_bytes = f.resp_bytes.unwrap() + 40 * f.resp_pkts;
        }
        other => {
            // unknown labels get a deterministic signature of their own
            let h = other.bytes().fold(0u16, |a, b| a.wrapping_mul(31).wrapping_add(b as u16));
            f.resp_p = 1024 + (h % 40_000);
            f.conn_state = "REJ".into();
            f.orig_pkts = rng.gen_range(2..6);
            f.orig_ip_bytes = 60 * f.orig_pkts;
        }
    }
    f
}
