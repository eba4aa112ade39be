//! Gradient-boosted decision trees with a cross-entropy objective.
//!
//! Two variants share this engine: a level-wise grower with exact or
//! histogram split search, and a leaf-wise (best-first) grower with GOSS row
//! sampling. Multi-class boosting fits one tree per class per round under a
//! softmax; binary boosting fits a single log-odds tree per round.

mod tree;

pub use tree::{goss_sample, leaf_weight, split_gain, TreeNode};

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::util::{argmax_tie_low, derive_seed, rng_from_seed, sigmoid};

const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    LevelWise,
    LeafWise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    Exact,
    Histogram,
    Goss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub growth: Growth,
    pub split_method: SplitMethod,
    pub max_depth: usize,
    /// Leaf budget; only enforced by leaf-wise growth.
    pub max_leaves: usize,
    /// Fraction of features drawn per tree.
    pub feature_subsample: f64,
    /// Minimum loss reduction (gamma) subtracted inside the gain.
    pub min_gain: f64,
    pub l2_lambda: f64,
    /// Minimum hessian sum per child (level-wise constraint).
    pub min_child_weight: f64,
    /// Minimum row count per child (leaf-wise constraint).
    pub min_child_samples: usize,
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub goss_a: f64,
    pub goss_b: f64,
    pub histogram_bins: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig::level_wise()
    }
}

impl GbdtConfig {
    /// Level-wise defaults (exact splits, tuned for the smaller captures).
    pub fn level_wise() -> Self {
        GbdtConfig {
            growth: Growth::LevelWise,
            split_method: SplitMethod::Exact,
            max_depth: 5,
            max_leaves: 25,
            feature_subsample: 0.7,
            min_gain: 0.01,
            l2_lambda: 1.0,
            min_child_weight: 1.2,
            min_child_samples: 2,
            n_estimators: 80,
            learning_rate: 0.01,
            goss_a: 0.2,
            goss_b: 0.1,
            histogram_bins: 256,
        }
    }

    /// Leaf-wise defaults with GOSS sampling.
    pub fn leaf_wise() -> Self {
        GbdtConfig {
            growth: Growth::LeafWise,
            split_method: SplitMethod::Goss,
            max_depth: 5,
            max_leaves: 25,
            feature_subsample: 0.7,
            min_gain: 0.01,
            l2_lambda: 1.0,
            min_child_weight: 1.2,
            min_child_samples: 2,
            n_estimators: 100,
            learning_rate: 0.04,
            goss_a: 0.2,
            goss_b: 0.1,
            histogram_bins: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config(format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::config(format!(
                "feature_subsample {} outside (0, 1]",
                self.feature_subsample
            )));
        }
        if self.split_method == SplitMethod::Goss {
            // a = 1 keeps every sample and ignores b entirely
            let valid = self.goss_a == 1.0
                || (self.goss_a > 0.0 && self.goss_b > 0.0 && self.goss_a + self.goss_b <= 1.0);
            if !valid {
                return Err(Error::config(format!(
                    "goss fractions a={} b={} invalid",
                    self.goss_a, self.goss_b
                )));
            }
        }
        if self.n_estimators == 0 || self.max_depth == 0 || self.max_leaves < 2 {
            return Err(Error::config("degenerate tree budget"));
        }
        if self.histogram_bins < 2 {
            return Err(Error::config("histogram needs at least 2 bins"));
        }
        Ok(())
    }
}

/// Boosted ensemble. Multi-class stores trees round-major, one per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtEnsemble {
    pub trees: Vec<TreeNode>,
    /// 1 for binary, NC for multi-class.
    pub n_groups: usize,
    pub base_score: f64,
    pub config: GbdtConfig,
    pub class_names: Vec<String>,
    pub nf: usize,
}

impl GbdtEnsemble {
    pub fn is_binary(&self) -> bool {
        self.n_groups == 1
    }

    fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut scores = vec![self.base_score; self.n_groups];
        for (t, tree) in self.trees.iter().enumerate() {
            scores[t % self.n_groups] += tree.eval(x);
        }
        scores
    }
}

/// Cross-entropy gradients for binary log-odds: `g = p - y`, `h = p(1 - p)`.
pub fn logistic_gradients(probabilities: &[f64], targets: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let g = probabilities
        .iter()
        .zip(targets)
        .map(|(&p, &y)| p - y as f64)
        .collect();
    let h = probabilities.iter().map(|&p| p * (1.0 - p)).collect();
    (g, h)
}

/// Per-class softmax gradients: `g_k = p_k - [y = k]`, `h_k = p_k (1 - p_k)`.
pub fn softmax_gradients(
    probabilities: &Matrix,
    targets: &[usize],
    class: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut g = Vec::with_capacity(targets.len());
    let mut h = Vec::with_capacity(targets.len());
    for (i, &y) in targets.iter().enumerate() {
        let p = probabilities.get(i, class);
        g.push(p - (y == class) as usize as f64);
        h.push(p * (1.0 - p));
    }
    (g, h)
}

fn softmax_row(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean training cross-entropy of the current scores; exposed for the
/// monotonicity checks.
pub fn training_cross_entropy(probabilities: &Matrix, targets: &[usize], binary: bool) -> f64 {
    let n = targets.len() as f64;
    if binary {
        targets
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let p = probabilities.get(i, 0).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                if y == 1 {
                    -p.ln()
                } else {
                    -(1.0 - p).ln()
                }
            })
            .sum::<f64>()
            / n
    } else {
        targets
            .iter()
            .enumerate()
            .map(|(i, &y)| -probabilities.get(i, y).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln())
            .sum::<f64>()
            / n
    }
}

fn fit_one_tree(
    x: &Matrix,
    g: &[f64],
    h: &[f64],
    config: &GbdtConfig,
    tree_seed: u64,
) -> TreeNode {
    let mut feat_rng = rng_from_seed(derive_seed(tree_seed, 1));
    let mut goss_rng = rng_from_seed(derive_seed(tree_seed, 2));
    let n = x.n_rows();
    match config.split_method {
        SplitMethod::Goss => {
            let magnitudes: Vec<f64> = g.iter().map(|v| v.abs()).collect();
            let (rows, weights) = goss_sample(&magnitudes, config.goss_a, config.goss_b, &mut goss_rng);
            let mut wg = g.to_vec();
            let mut wh = h.to_vec();
            for (&r, &w) in rows.iter().zip(&weights) {
                wg[r] *= w;
                wh[r] *= w;
            }
            tree::grow_tree(x, rows, &wg, &wh, config, &mut feat_rng)
        }
        _ => tree::grow_tree(x, (0..n).collect(), g, h, config, &mut feat_rng),
    }
}

/// Boost `n_estimators` rounds from a base score of 0 log-odds.
pub fn gbdt_train(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    config: &GbdtConfig,
    seed: u64,
) -> Result<GbdtEnsemble> {
    gbdt_train_named(
        x,
        y,
        &(0..n_classes).map(|c| c.to_string()).collect::<Vec<_>>(),
        config,
        seed,
    )
}

pub fn gbdt_train_named(
    x: &Matrix,
    y: &[usize],
    class_names: &[String],
    config: &GbdtConfig,
    seed: u64,
) -> Result<GbdtEnsemble> {
    config.validate()?;
    let n_classes = class_names.len();
    if n_classes < 2 {
        return Err(Error::input("boosting needs at least 2 classes"));
    }
    if x.n_rows() != y.len() || x.n_rows() == 0 {
        return Err(Error::input("feature rows and labels differ in length"));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::input(format!("label {bad} out of range")));
    }
    let distinct = {
        let mut seen = vec![false; n_classes];
        y.iter().for_each(|&c| seen[c] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::input("training labels contain a single class"));
    }

    let n = x.n_rows();
    let n_groups = if n_classes == 2 { 1 } else { n_classes };
    let mut trees = Vec::with_capacity(config.n_estimators * n_groups);

    if n_groups == 1 {
        let targets: Vec<u8> = y.iter().map(|&c| c as u8).collect();
        let mut scores = vec![0.0f64; n];
        for round in 0..config.n_estimators {
            let probs: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
            let (g, h) = logistic_gradients(&probs, &targets);
            let tree = fit_one_tree(x, &g, &h, config, derive_seed(seed, round as u64));
            for (score, row) in scores.iter_mut().zip(x.rows()) {
                *score += tree.eval(row);
            }
            trees.push(tree);
        }
    } else {
        let mut scores = Matrix::zeros(n, n_groups);
        for round in 0..config.n_estimators {
            let mut probs = Matrix::zeros(n, n_groups);
            for i in 0..n {
                let p = softmax_row(scores.row(i));
                for (k, &v) in p.iter().enumerate() {
                    probs.set(i, k, v);
                }
            }
            for class in 0..n_groups {
                let (g, h) = softmax_gradients(&probs, y, class);
                let tree_seed = derive_seed(seed, (round * n_groups + class) as u64);
                let tree = fit_one_tree(x, &g, &h, config, tree_seed);
                for i in 0..n {
                    let v = scores.get(i, class) + tree.eval(x.row(i));
                    scores.set(i, class, v);
                }
                trees.push(tree);
            }
        }
    }

    Ok(GbdtEnsemble {
        trees,
        n_groups,
        base_score: 0.0,
        config: config.clone(),
        class_names: class_names.to_vec(),
        nf: x.n_cols(),
    })
}

/// Class probabilities: one column (sigmoid) for binary, NC (softmax) for
/// multi-class.
pub fn gbdt_predict_proba(ensemble: &GbdtEnsemble, x: &Matrix) -> Result<Matrix> {
    if x.n_cols() != ensemble.nf {
        return Err(Error::DimensionMismatch {
            expected: ensemble.nf,
            got: x.n_cols(),
        });
    }
    let mut out = Matrix::zeros(x.n_rows(), ensemble.n_groups);
    for (i, row) in x.rows().enumerate() {
        let scores = ensemble.raw_scores(row);
        if ensemble.is_binary() {
            out.set(i, 0, sigmoid(scores[0]));
        } else {
            for (k, p) in softmax_row(&scores).into_iter().enumerate() {
                out.set(i, k, p);
            }
        }
    }
    Ok(out)
}

/// Predicted class indices; ties break to the lowest index.
pub fn gbdt_predict(ensemble: &GbdtEnsemble, x: &Matrix) -> Result<Vec<usize>> {
    let probs = gbdt_predict_proba(ensemble, x)?;
    Ok((0..probs.n_rows())
        .map(|i| {
            if ensemble.is_binary() {
                (probs.get(i, 0) > 0.5) as usize
            } else {
                argmax_tie_low(probs.row(i))
            }
        })
        .collect())
}
