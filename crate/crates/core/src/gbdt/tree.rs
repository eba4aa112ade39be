//! Single-tree machinery: split search, GOSS sampling and growing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::util::sample_without_replacement;

use super::{GbdtConfig, Growth, SplitMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Log-odds contribution, already scaled by the learning rate.
        value: f64,
    },
}

impl TreeNode {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] < *threshold {
                    left.eval(x)
                } else {
                    right.eval(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Loss reduction of a candidate split, including the `gamma` penalty.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
        - (gl + gr) * (gl + gr) / (hl + hr + lambda))
        - gamma
}

/// Optimal leaf weight before learning-rate scaling.
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda: f64) -> f64 {
    -g_sum / (h_sum + lambda)
}

/// GOSS: keep the top `ceil(a*n)` samples by gradient magnitude with weight
/// 1, plus a uniform `ceil(b*n)` of the remainder amplified by `(1-a)/b`.
/// Indices come back in ascending order so downstream accumulation order
/// matches the unsampled path.
pub fn goss_sample(
    grad_magnitudes: &[f64],
    a: f64,
    b: f64,
    rng: &mut impl Rng,
) -> (Vec<usize>, Vec<f64>) {
    let n = grad_magnitudes.len();
    let top_n = ((a * n as f64).ceil() as usize).min(n);
    if top_n == n {
        return (Vec::from_iter(0..n), vec![1.0; n]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        grad_magnitudes[j]
            .total_cmp(&grad_magnitudes[i])
            .then(i.cmp(&j))
    });
    let rest = &order[top_n..];
    let rand_n = ((b * n as f64).ceil() as usize).min(rest.len());
    let picks = sample_without_replacement(rng, rest.len(), rand_n);
    let amplification = (1.0 - a) / b;
    let mut keep: Vec<(usize, f64)> = order[..top_n].iter().map(|&i| (i, 1.0)).collect();
    keep.extend(picks.into_iter().map(|p| (rest[p], amplification)));
    keep.sort_unstable_by_key(|&(i, _)| i);
    keep.into_iter().unzip()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

pub(super) struct SplitContext<'a> {
    pub x: &'a Matrix,
    /// Gradients and hessians, already sample-weighted where GOSS applies.
    pub g: &'a [f64],
    pub h: &'a [f64],
    /// Candidate features (ascending) drawn for this tree.
    pub features: &'a [usize],
    pub config: &'a GbdtConfig,
}

impl SplitContext<'_> {
    fn child_constraints_ok(&self, h_side: f64, n_side: usize) -> bool {
        match self.config.growth {
            Growth::LevelWise => h_side >= self.config.min_child_weight,
            Growth::LeafWise => n_side >= self.config.min_child_samples,
        }
    }
}

/// Best split over the drawn feature subset, or `None` when no candidate has
/// positive gain under the child constraints. Exact mode scans every
/// boundary between distinct sorted values; histogram mode scans equal-width
/// bin boundaries over the node's own range.
pub(super) fn find_best_split(ctx: &SplitContext, rows: &[usize]) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let mut best: Option<Split> = None;
    for &feature in ctx.features {
        let candidate = match ctx.config.split_method {
            SplitMethod::Exact | SplitMethod::Goss => exact_scan(ctx, rows, feature),
            SplitMethod::Histogram => histogram_scan(ctx, rows, feature),
        };
        if let Some(c) = candidate {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
    }
    best.filter(|b| b.gain > 0.0)
}

fn exact_scan(ctx: &SplitContext, rows: &[usize], feature: usize) -> Option<Split> {
    let mut samples: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|&r| (ctx.x.get(r, feature), ctx.g[r], ctx.h[r]))
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let g_total: f64 = samples.iter().map(|s| s.1).sum();
    let h_total: f64 = samples.iter().map(|s| s.2).sum();
    let mut gl = 0.0;
    let mut hl = 0.0;
    let mut best: Option<Split> = None;
    for i in 0..samples.len() - 1 {
        gl += samples[i].1;
        hl += samples[i].2;
        if samples[i].0 == samples[i + 1].0 {
            continue;
        }
        let (gr, hr) = (g_total - gl, h_total - hl);
        if !ctx.child_constraints_ok(hl, i + 1)
            || !ctx.child_constraints_ok(hr, samples.len() - i - 1)
        {
            continue;
        }
        let gain = split_gain(gl, hl, gr, hr, ctx.config.l2_lambda, ctx.config.min_gain);
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(Split {
                feature,
                threshold: 0.5 * (samples[i].0 + samples[i + 1].0),
                gain,
            });
        }
    }
    best
}

fn histogram_scan(ctx: &SplitContext, rows: &[usize], feature: usize) -> Option<Split> {
    let bins = ctx.config.histogram_bins;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &r in rows {
        let v = ctx.x.get(r, feature);
        min = min.min(v);
        max = max.max(v);
    }
    let width = (max - min) / bins as f64;
    if width <= 0.0 {
        return None;
    }
    let mut g_bins = vec![0.0; bins];
    let mut h_bins = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for &r in rows {
        let v = ctx.x.get(r, feature);
        let b = (((v - min) / width) as usize).min(bins - 1);
        g_bins[b] += ctx.g[r];
        h_bins[b] += ctx.h[r];
        counts[b] += 1;
    }
    let g_total: f64 = g_bins.iter().sum();
    let h_total: f64 = h_bins.iter().sum();
    let n_total: usize = rows.len();
    let mut gl = 0.0;
    let mut hl = 0.0;
    let mut nl = 0usize;
    let mut best: Option<Split> = None;
    for i in 1..bins {
        gl += g_bins[i - 1];
        hl += h_bins[i - 1];
        nl += counts[i - 1];
        if nl == 0 || nl == n_total {
            continue;
        }
        let (gr, hr) = (g_total - gl, h_total - hl);
        if !ctx.child_constraints_ok(hl, nl) || !ctx.child_constraints_ok(hr, n_total - nl) {
            continue;
        }
        let gain = split_gain(gl, hl, gr, hr, ctx.config.l2_lambda, ctx.config.min_gain);
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(Split {
                feature,
                threshold: min + width * i as f64,
                gain,
            });
        }
    }
    // center the cut in the actual data gap the bin boundary landed in,
    // matching where an exact scan would place it
    if let Some(b) = &mut best {
        let mut left_max = f64::NEG_INFINITY;
        let mut right_min = f64::INFINITY;
        for &r in rows {
            let v = ctx.x.get(r, feature);
            if v < b.threshold {
                left_max = left_max.max(v);
            } else {
                right_min = right_min.min(v);
            }
        }
        b.threshold = 0.5 * (left_max + right_min);
    }
    best
}

fn partition(ctx: &SplitContext, rows: &[usize], split: &Split) -> (Vec<usize>, Vec<usize>) {
    rows.iter()
        .partition(|&&r| ctx.x.get(r, split.feature) < split.threshold)
}

fn make_leaf(ctx: &SplitContext, rows: &[usize]) -> TreeNode {
    let g: f64 = rows.iter().map(|&r| ctx.g[r]).sum();
    let h: f64 = rows.iter().map(|&r| ctx.h[r]).sum();
    TreeNode::Leaf {
        value: ctx.config.learning_rate * leaf_weight(g, h, ctx.config.l2_lambda),
    }
}

/// Grow one tree on the given rows; `g`/`h` must already carry any GOSS
/// weights. Draws `ceil(feature_subsample * nf)` features from `feat_rng`.
pub(super) fn grow_tree(
    x: &Matrix,
    rows: Vec<usize>,
    g: &[f64],
    h: &[f64],
    config: &GbdtConfig,
    feat_rng: &mut impl Rng,
) -> TreeNode {
    let nf = x.n_cols();
    let n_feats = ((config.feature_subsample * nf as f64).ceil() as usize).clamp(1, nf);
    let features = sample_without_replacement(feat_rng, nf, n_feats);
    let ctx = SplitContext {
        x,
        g,
        h,
        features: &features,
        config,
    };
    match config.growth {
        Growth::LevelWise => grow_level_wise(&ctx, rows, 0),
        Growth::LeafWise => grow_leaf_wise(&ctx, rows),
    }
}

fn grow_level_wise(ctx: &SplitContext, rows: Vec<usize>, depth: usize) -> TreeNode {
    if depth >= ctx.config.max_depth {
        return make_leaf(ctx, &rows);
    }
    match find_best_split(ctx, &rows) {
        None => make_leaf(ctx, &rows),
        Some(split) => {
            let (left_rows, right_rows) = partition(ctx, &rows, &split);
            TreeNode::Internal {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(grow_level_wise(ctx, left_rows, depth + 1)),
                right: Box::new(grow_level_wise(ctx, right_rows, depth + 1)),
            }
        }
    }
}

/// Pending best-first expansion of one leaf slot.
struct Candidate {
    split: Split,
    seq: u64,
    slot: usize,
    rows: Vec<usize>,
    depth: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.split.gain == other.split.gain && self.seq == other.seq
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on gain; earlier insertion wins ties for determinism
        self.split
            .gain
            .total_cmp(&other.split.gain)
            .then(other.seq.cmp(&self.seq))
    }
}

enum Slot {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

fn grow_leaf_wise(ctx: &SplitContext, rows: Vec<usize>) -> TreeNode {
    let mut slots: Vec<Slot> = Vec::new();
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();
    let mut seq = 0u64;

    let enqueue = |slots: &mut Vec<Slot>,
                       heap: &mut BinaryHeap<Candidate>,
                       seq: &mut u64,
                       rows: Vec<usize>,
                       depth: usize|
     -> usize {
        let slot = slots.len();
        // every slot starts as a leaf; a queued candidate may upgrade it
        slots.push(match make_leaf(ctx, &rows) {
            TreeNode::Leaf { value } => Slot::Leaf(value),
            _ => unreachable!(),
        });
        if depth < ctx.config.max_depth {
            if let Some(split) = find_best_split(ctx, &rows) {
                heap.push(Candidate {
                    split,
                    seq: *seq,
                    slot,
                    rows,
                    depth,
                });
                *seq += 1;
            }
        }
        slot
    };

    enqueue(&mut slots, &mut heap, &mut seq, rows, 0);
    let mut n_leaves = 1;
    while n_leaves < ctx.config.max_leaves {
        let Some(cand) = heap.pop() else { break };
        let (left_rows, right_rows) = partition(ctx, &cand.rows, &cand.split);
        let left = enqueue(&mut slots, &mut heap, &mut seq, left_rows, cand.depth + 1);
        let right = enqueue(&mut slots, &mut heap, &mut seq, right_rows, cand.depth + 1);
        slots[cand.slot] = Slot::Split {
            feature: cand.split.feature,
            threshold: cand.split.threshold,
            left,
            right,
        };
        n_leaves += 1;
    }
    materialize(&slots, 0)
}

fn materialize(slots: &[Slot], idx: usize) -> TreeNode {
    match &slots[idx] {
        Slot::Leaf(value) => TreeNode::Leaf { value: *value },
        Slot::Split {
            feature,
            threshold,
            left,
            right,
        } => TreeNode::Internal {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(materialize(slots, *left)),
            right: Box::new(materialize(slots, *right)),
        },
    }
}
