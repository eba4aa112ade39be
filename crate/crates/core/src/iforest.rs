//! Isolation Forest: anomalies isolate in few random splits, so short
//! average path lengths mean high anomaly scores.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng_from_seed, threshold_at_quantile};

const EULER_MASCHERONI: f64 = 0.577_215_664_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IForestConfig {
    pub n_estimators: usize,
    /// Subsample size per tree (psi).
    pub max_samples: usize,
    pub contamination: f64,
}

impl Default for IForestConfig {
    fn default() -> Self {
        IForestConfig {
            n_estimators: 100,
            max_samples: 250,
            contamination: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IsoNode {
    Internal {
        feature: usize,
        split: f64,
        left: Box<IsoNode>,
        right: Box<IsoNode>,
    },
    External {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub root: IsoNode,
}

/// Average unsuccessful-search path length `c(n)` in a binary search tree:
/// `2 H(n-1) - 2(n-1)/n` with `H(i) = ln(i) + Euler's constant`; 0 for
/// `n <= 1`.
pub fn expected_path_length_c(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let nf = n as f64;
    let harmonic = (nf - 1.0).ln() + EULER_MASCHERONI;
    2.0 * harmonic - 2.0 * (nf - 1.0) / nf
}

fn build_node(
    x: &Matrix,
    rows: &mut [usize],
    depth: usize,
    height_limit: usize,
    rng: &mut impl Rng,
) -> IsoNode {
    if depth >= height_limit || rows.len() <= 1 {
        return IsoNode::External { size: rows.len() };
    }
    // features that still vary inside this node
    let candidates: Vec<(usize, f64, f64)> = (0..x.n_cols())
        .filter_map(|f| {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for &r in rows.iter() {
                let v = x.get(r, f);
                min = min.min(v);
                max = max.max(v);
            }
            (max > min).then_some((f, min, max))
        })
        .collect();
    if candidates.is_empty() {
        // all rows identical: no valid split
        return IsoNode::External { size: rows.len() };
    }
    let (feature, min, max) = candidates[rng.gen_range(0..candidates.len())];
    let mut split = min + rng.gen::<f64>() * (max - min);
    if split <= min {
        split = 0.5 * (min + max); // keep the split strictly inside the range
    }
    let mid = stable_partition(rows, |&r| x.get(r, feature) < split);
    let (left_rows, right_rows) = rows.split_at_mut(mid);
    IsoNode::Internal {
        feature,
        split,
        left: Box::new(build_node(x, left_rows, depth + 1, height_limit, rng)),
        right: Box::new(build_node(x, right_rows, depth + 1, height_limit, rng)),
    }
}

/// In-place stable-order partition; returns the boundary index.
fn stable_partition<T, F: Fn(&T) -> bool>(slice: &mut [T], pred: F) -> usize
where
    T: Copy,
{
    let mut out: Vec<T> = Vec::with_capacity(slice.len());
    let mut right: Vec<T> = Vec::new();
    for &v in slice.iter() {
        if pred(&v) {
            out.push(v);
        } else {
            right.push(v);
        }
    }
    let mid = out.len();
    out.extend(right);
    slice.copy_from_slice(&out);
    mid
}

/// Grow one tree on a sample; recursion stops at `ceil(log2(n))`, single
/// rows, or all-identical rows.
pub fn build_isolation_tree(sample: &Matrix, seed: u64) -> IsolationTree {
    let n = sample.n_rows();
    let height_limit = (n.max(2) as f64).log2().ceil() as usize;
    let mut rows: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    IsolationTree {
        root: build_node(sample, &mut rows, 0, height_limit, &mut rng),
    }
}

fn path_length(node: &IsoNode, x: &[f64], depth: usize) -> f64 {
    match node {
        IsoNode::External { size } => depth as f64 + expected_path_length_c(*size),
        IsoNode::Internal {
            feature,
            split,
            left,
            right,
        } => {
            if x[*feature] < *split {
                path_length(left, x, depth + 1)
            } else {
                path_length(right, x, depth + 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IForestModel {
    pub trees: Vec<IsolationTree>,
    /// Subsample size used for normalization.
    pub psi: usize,
    pub contamination: f64,
    pub score_threshold: f64,
    pub nf: usize,
}

/// `s(x) = 2^(-E[h(x)] / c(psi))`; 0.5 at the average path length, toward 1
/// for fast isolation.
pub fn anomaly_score(model: &IForestModel, x: &[f64]) -> f64 {
    let mean_path: f64 = model
        .trees
        .iter()
        .map(|t| path_length(&t.root, x, 0))
        .sum::<f64>()
        / model.trees.len() as f64;
    2f64.powf(-mean_path / expected_path_length_c(model.psi))
}

/// Fit trees on per-tree subsamples and place the flagging threshold at the
/// `(1 - contamination)` quantile of training scores.
pub fn iforest_fit(train: &Matrix, config: &IForestConfig, seed: u64) -> Result<IForestModel> {
    if !(config.contamination > 0.0 && config.contamination <= 0.5) {
        return Err(Error::config(format!(
            "contamination {} must be in (0, 0.5]",
            config.contamination
        )));
    }
    if train.n_rows() < 2 {
        return Err(Error::input("need at least 2 training rows"));
    }
    let n = train.n_rows();
    let psi = config.max_samples;
    let trees: Vec<IsolationTree> = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_seed(seed, t as u64);
            let mut rng = rng_from_seed(derive_seed(tree_seed, 0));
            let rows: Vec<usize> = if psi <= n {
                crate::util::sample_without_replacement(&mut rng, n, psi)
            } else {
                (0..psi).map(|_| rng.gen_range(0..n)).collect()
            };
            build_isolation_tree(&train.select_rows(&rows), derive_seed(tree_seed, 1))
        })
        .collect();
    let mut model = IForestModel {
        trees,
        psi,
        contamination: config.contamination,
        score_threshold: 0.0,
        nf: train.n_cols(),
    };
    let scores: Vec<f64> = (0..n).map(|i| anomaly_score(&model, train.row(i))).collect();
    model.score_threshold = threshold_at_quantile(&scores, config.contamination);
    Ok(model)
}

pub fn iforest_predict(model: &IForestModel, x: &Matrix) -> Result<Vec<usize>> {
    if x.n_cols() != model.nf {
        return Err(Error::DimensionMismatch {
            expected: model.nf,
            got: x.n_cols(),
        });
    }
    Ok((0..x.n_rows())
        .map(|i| (anomaly_score(model, x.row(i)) > model.score_threshold) as usize)
        .collect())
}

/// Fit and return the model together with its training-set predictions.
pub fn iforest_fit_predict(
    train: &Matrix,
    contamination: f64,
    config: &IForestConfig,
    seed: u64,
) -> Result<(IForestModel, Vec<usize>)> {
    let config = IForestConfig {
        contamination,
        ..*config
    };
    let model = iforest_fit(train, &config, seed)?;
    let predictions = iforest_predict(&model, train)?;
    Ok((model, predictions))
}
