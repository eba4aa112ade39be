//! Local Outlier Factor in novelty mode.
//!
//! Neighborhoods come from an exact k-d tree (Euclidean, leaf size 30).
//! Scores compare a query's local reachability density against its training
//! neighbors'; a detector fitted on mostly-benign flows then flags new flows
//! whose density falls below the learned neighborhoods.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::util::threshold_at_quantile;

/// lrd sentinel for fully duplicated neighborhoods (all reach-distances 0).
const DENSE_SENTINEL: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LofConfig {
    pub n_neighbors: usize,
    pub leaf_size: usize,
    pub contamination: f64,
}

impl Default for LofConfig {
    fn default() -> Self {
        LofConfig {
            n_neighbors: 35,
            leaf_size: 30,
            contamination: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
enum KdNode {
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

/// Exact k-nearest-neighbor index over owned points.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Matrix,
    nodes: Vec<KdNode>,
    /// Point indices, reordered so leaves own contiguous ranges.
    order: Vec<usize>,
    root: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Neighbor {
    dist2: f64,
    index: usize,
}

impl Neighbor {
    /// Worse = farther; equal distances break toward the higher index.
    fn worse_than(&self, other: &Neighbor) -> bool {
        match self.dist2.total_cmp(&other.dist2) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.index > other.index,
        }
    }
}

/// Bounded worst-first heap of the best k candidates.
struct KBest {
    k: usize,
    heap: Vec<Neighbor>, // binary max-heap by worse_than
}

impl KBest {
    fn new(k: usize) -> Self {
        KBest {
            k,
            heap: Vec::with_capacity(k + 1),
        }
    }

    fn worst_dist2(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap[0].dist2
        }
    }

    fn push(&mut self, n: Neighbor) {
        if self.heap.len() == self.k && !self.heap[0].worse_than(&n) {
            return;
        }
        self.heap.push(n);
        let mut i = self.heap.len() - 1;
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.heap[i].worse_than(&self.heap[parent]) {
                self.heap.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
        if self.heap.len() > self.k {
            self.pop_worst();
        }
    }

    fn pop_worst(&mut self) {
        let last = self.heap.len() - 1;
        self.heap.swap(0, last);
        self.heap.pop();
        let mut i = 0;
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut largest = i;
            if l < self.heap.len() && self.heap[l].worse_than(&self.heap[largest]) {
                largest = l;
            }
            if r < self.heap.len() && self.heap[r].worse_than(&self.heap[largest]) {
                largest = r;
            }
            if largest == i {
                break;
            }
            self.heap.swap(i, largest);
            i = largest;
        }
    }

    fn into_sorted(self) -> Vec<(usize, f64)> {
        let mut out: Vec<Neighbor> = self.heap;
        out.sort_by(|a, b| a.dist2.total_cmp(&b.dist2).then(a.index.cmp(&b.index)));
        out.into_iter().map(|n| (n.index, n.dist2.sqrt())).collect()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn build(points: Matrix, leaf_size: usize) -> KdTree {
        let n = points.n_rows();
        let mut order: Vec<usize> = (0..n).collect();
        let mut tree = KdTree {
            points,
            nodes: Vec::new(),
            order: Vec::new(),
            root: 0,
        };
        if n > 0 {
            let root = tree.build_node(&mut order, 0, n, leaf_size.max(1));
            tree.root = root;
        }
        tree.order = order;
        tree
    }

    pub fn len(&self) -> usize {
        self.points.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn build_node(&mut self, order: &mut [usize], start: usize, end: usize, leaf: usize) -> usize {
        let count = end - start;
        if count <= leaf {
            self.nodes.push(KdNode::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        // split on the widest dimension at its median
        let slice = &mut order[start..end];
        let dim = {
            let mut best = (0usize, f64::NEG_INFINITY);
            for d in 0..self.points.n_cols() {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for &i in slice.iter() {
                    let v = self.points.get(i, d);
                    min = min.min(v);
                    max = max.max(v);
                }
                if max - min > best.1 {
                    best = (d, max - min);
                }
            }
            best.0
        };
        let mid = count / 2;
        let points = &self.points;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points.get(a, dim).total_cmp(&points.get(b, dim))
        });
        let value = self.points.get(slice[mid], dim);
        let left = self.build_node(order, start, start + mid, leaf);
        let right = self.build_node(order, start + mid, end, leaf);
        self.nodes.push(KdNode::Split {
            dim,
            value,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    /// Exact k nearest neighbors, distance-ascending, ties to lower index.
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        if k > self.len() {
            return Err(Error::input(format!(
                "k = {k} exceeds the {} indexed points",
                self.len()
            )));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut best = KBest::new(k);
        self.search(self.root, query, &mut best);
        Ok(best.into_sorted())
    }

    fn search(&self, node: usize, query: &[f64], best: &mut KBest) {
        match &self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    best.push(Neighbor {
                        dist2: dist2(query, self.points.row(i)),
                        index: i,
                    });
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let delta = query[*dim] - value;
                let (near, far) = if delta < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, query, best);
                if delta * delta <= best.worst_dist2() {
                    self.search(far, query, best);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LofModel {
    pub points: Matrix,
    pub config: LofConfig,
    pub score_threshold: f64,
    /// Distance to the k-th neighbor, per training point (self excluded).
    pub k_distances: Vec<f64>,
    /// Local reachability density per training point.
    pub lrd: Vec<f64>,
    tree: KdTree,
}

/// Binary-free persisted form; the k-d tree and per-point densities are
/// rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LofModelData {
    pub points: Matrix,
    pub config: LofConfig,
    pub score_threshold: f64,
}

impl From<&LofModel> for LofModelData {
    fn from(m: &LofModel) -> Self {
        LofModelData {
            points: m.points.clone(),
            config: m.config,
            score_threshold: m.score_threshold,
        }
    }
}

impl TryFrom<LofModelData> for LofModel {
    type Error = Error;
    fn try_from(data: LofModelData) -> Result<LofModel> {
        let mut model = fit_structure(data.points, data.config)?;
        model.score_threshold = data.score_threshold;
        Ok(model)
    }
}

/// `lrd = k / sum(reach_dist)` with `reach_dist(p, o) = max(k_dist(o), d(p, o))`.
fn lrd_from_neighbors(neighbors: &[(usize, f64)], k_distances: &[f64]) -> f64 {
    let total: f64 = neighbors
        .iter()
        .map(|&(o, d)| d.max(k_distances[o]))
        .sum();
    if total == 0.0 {
        DENSE_SENTINEL
    } else {
        neighbors.len() as f64 / total
    }
}

/// Neighbors of training point `i` with `i` itself excluded.
fn training_neighbors(tree: &KdTree, points: &Matrix, i: usize, k: usize) -> Vec<(usize, f64)> {
    let mut list = tree.knn(points.row(i), k + 1).expect("k+1 <= n checked at fit");
    if let Some(pos) = list.iter().position(|&(idx, _)| idx == i) {
        list.remove(pos);
    }
    list.truncate(k);
    list
}

fn fit_structure(points: Matrix, config: LofConfig) -> Result<LofModel> {
    let n = points.n_rows();
    let k = config.n_neighbors;
    if k == 0 || k > n.saturating_sub(1) {
        return Err(Error::input(format!(
            "n_neighbors = {k} needs 1 <= k <= n-1 (n = {n})"
        )));
    }
    let tree = KdTree::build(points.clone(), config.leaf_size);
    let neighborhoods: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| training_neighbors(&tree, &points, i, k))
        .collect();
    let k_distances: Vec<f64> = neighborhoods
        .iter()
        .map(|nb| nb.last().map_or(0.0, |&(_, d)| d))
        .collect();
    let lrd: Vec<f64> = neighborhoods
        .iter()
        .map(|nb| lrd_from_neighbors(nb, &k_distances))
        .collect();
    Ok(LofModel {
        points,
        config,
        score_threshold: 0.0,
        k_distances,
        lrd,
        tree,
    })
}

impl LofModel {
    /// LOF of a query against training neighborhoods only (novelty
    /// semantics): mean neighbor lrd over the query's own lrd.
    pub fn score(&self, query: &[f64]) -> Result<f64> {
        if query.len() != self.points.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.points.n_cols(),
                got: query.len(),
            });
        }
        let neighbors = self.tree.knn(query, self.config.n_neighbors)?;
        let lrd_q = lrd_from_neighbors(&neighbors, &self.k_distances);
        let mean_lrd: f64 =
            neighbors.iter().map(|&(o, _)| self.lrd[o]).sum::<f64>() / neighbors.len() as f64;
        Ok(mean_lrd / lrd_q)
    }

    /// LOF of training point `i`, with the point excluded from its own
    /// neighborhood.
    pub fn training_score(&self, i: usize) -> f64 {
        let neighbors =
            training_neighbors(&self.tree, &self.points, i, self.config.n_neighbors);
        let mean_lrd: f64 =
            neighbors.iter().map(|&(o, _)| self.lrd[o]).sum::<f64>() / neighbors.len() as f64;
        mean_lrd / self.lrd[i]
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        (0..x.n_rows())
            .map(|i| Ok((self.score(x.row(i))? > self.score_threshold) as usize))
            .collect()
    }
}

/// Fit the density structure and place the flagging threshold at the
/// `(1 - contamination)` quantile of training scores.
pub fn lof_fit(train: &Matrix, config: &LofConfig) -> Result<LofModel> {
    if !(config.contamination > 0.0 && config.contamination <= 0.5) {
        return Err(Error::config(format!(
            "contamination {} must be in (0, 0.5]",
            config.contamination
        )));
    }
    let mut model = fit_structure(train.clone(), *config)?;
    let training_scores: Vec<f64> = (0..train.n_rows()).map(|i| model.training_score(i)).collect();
    model.score_threshold = threshold_at_quantile(&training_scores, config.contamination);
    Ok(model)
}

/// Fit plus training-set predictions.
pub fn lof_fit_predict(
    train: &Matrix,
    contamination: f64,
    n_neighbors: usize,
) -> Result<(LofModel, Vec<usize>)> {
    let config = LofConfig {
        n_neighbors,
        contamination,
        ..LofConfig::default()
    };
    let model = lof_fit(train, &config)?;
    let predictions: Vec<usize> = (0..train.n_rows())
        .map(|i| (model.training_score(i) > model.score_threshold) as usize)
        .collect();
    Ok((model, predictions))
}
