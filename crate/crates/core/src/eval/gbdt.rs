//! Second-order gradient boosting of regression trees on the logistic loss.
//!
//! Splits are searched over at most `max_bins` quantile thresholds per
//! feature. Trees grow depth-first to `max_depth`; a node splits only when
//! the regularised gain is positive and both children carry at least
//! `min_child_weight` hessian mass.

use std::hash::{DefaultHasher, Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub max_bins: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            max_depth: 6,
            learning_rate: 0.3,
            min_child_weight: 1.0,
            lambda: 1.0,
            max_bins: 256,
        }
    }
}

impl GbdtConfig {
    /// Hash of every field's bit pattern; equal fingerprints mean the same
    /// classifier was used.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n_rounds.hash(&mut h);
        self.max_depth.hash(&mut h);
        self.learning_rate.to_bits().hash(&mut h);
        self.min_child_weight.to_bits().hash(&mut h);
        self.lambda.to_bits().hash(&mut h);
        self.max_bins.hash(&mut h);
        h.finish()
    }

    fn validate(&self) -> Result<()> {
        if self.max_bins == 0 || !(self.learning_rate > 0.0) || self.lambda < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::config(format!("invalid classifier config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Node 0 is the root; child indices must point forward.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::config("a tree needs at least one node"));
        }
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *n {
                if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                    return Err(Error::config(format!("node {i} has invalid children")));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        Self {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: left },
                Node::Leaf { value: right },
            ],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    /// Prior log-odds added to every margin.
    pub base_score: f64,
    pub n_features: usize,
}

fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

impl GbdtModel {
    pub fn new(trees: Vec<Tree>, learning_rate: f64, base_score: f64, n_features: usize) -> Result<Self> {
        if let Some(f) = trees.iter().filter_map(Tree::max_feature).max() {
            if f >= n_features {
                return Err(Error::Dimension {
                    expected: n_features,
                    got: f + 1,
                });
            }
        }
        Ok(Self {
            trees,
            learning_rate,
            base_score,
            n_features,
        })
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Positive-class probabilities, one per row.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_features != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.n_features,
            });
        }
        Ok((0..x.n_rows).map(|i| sigmoid(self.margin(x.row(i)))).collect())
    }
}

/// Candidate thresholds for one feature: every distinct value but the
/// smallest when there are few, otherwise `max_bins` quantiles of them.
fn thresholds(values: &mut [f64], max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    for &v in values.iter() {
        if distinct.last() != Some(&v) {
            distinct.push(v);
        }
    }
    if distinct.len() <= max_bins + 1 {
        return distinct.split_off(1.min(distinct.len()));
    }
    let n = values.len();
    let mut out: Vec<f64> = Vec::with_capacity(max_bins);
    for q in 1..=max_bins {
        let v = values[q * n / (max_bins + 1)];
        if v > distinct[0] && out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

/// Per-feature bin index of every row: the number of thresholds `<= x`, so
/// `x < thresholds[j]` iff `bin <= j`.
struct Binned {
    thresholds: Vec<Vec<f64>>,
    /// Column-major: `bins[f][row]`.
    bins: Vec<Vec<u16>>,
}

impl Binned {
    fn new(x: &FeatureMatrix, max_bins: usize) -> Self {
        let max_bins = max_bins.min(u16::MAX as usize - 1);
        let (thresholds, bins) = (0..x.n_features)
            .into_par_iter()
            .map(|f| {
                let col: Vec<f64> = (0..x.n_rows).map(|i| x.get(i, f)).collect();
                let t = thresholds(&mut col.clone(), max_bins);
                let b = col.iter().map(|&v| t.partition_point(|&th| th <= v) as u16).collect();
                (t, b)
            })
            .unzip();
        Self { thresholds, bins }
    }
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    bin: usize,
}

struct Grower<'a> {
    cfg: &'a GbdtConfig,
    data: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    fn best_split(&self, rows: &[usize], g_tot: f64, h_tot: f64) -> Option<SplitChoice> {
        let parent = self.score(g_tot, h_tot);
        (0..self.data.bins.len())
            .into_par_iter()
            .filter_map(|f| {
                let n_thr = self.data.thresholds[f].len();
                if n_thr == 0 {
                    return None;
                }
                let mut gh = vec![(0.0f64, 0.0f64); n_thr + 1];
                let bins = &self.data.bins[f];
                for &r in rows {
                    let e = &mut gh[bins[r] as usize];
                    e.0 += self.grad[r];
                    e.1 += self.hess[r];
                }
                let (mut gl, mut hl) = (0.0, 0.0);
                let mut best: Option<SplitChoice> = None;
                for (j, &(g, h)) in gh[..n_thr].iter().enumerate() {
                    gl += g;
                    hl += h;
                    let (gr, hr) = (g_tot - gl, h_tot - hl);
                    if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                        continue;
                    }
                    let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent);
                    if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(SplitChoice { gain, feature: f, bin: j });
                    }
                }
                best
            })
            .collect::<Vec<_>>()
            .into_iter()
            .reduce(|a, b| if b.gain > a.gain { b } else { a })
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        self.nodes.push(Node::Leaf {
            value: -g / (h + self.cfg.lambda),
        });
        if depth >= self.cfg.max_depth {
            return id;
        }
        let Some(split) = self.best_split(&rows, g, h) else {
            return id;
        };
        let bins = &self.data.bins[split.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| bins[i] as usize <= split.bin);
        drop(rows);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: self.data.thresholds[split.feature][split.bin],
            left,
            right,
        };
        id
    }
}

/// Mean logistic loss of the margins.
pub fn logistic_loss(margins: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            // log(1 + e^m) - y m, computed stably
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - y as f64 * m
        })
        .sum();
    total / margins.len().max(1) as f64
}

/// Fits the booster. `on_round` sees the training margins after each round.
pub fn train_matrix_with(
    x: &FeatureMatrix,
    labels: &[u8],
    cfg: &GbdtConfig,
    mut on_round: impl FnMut(usize, &[f64]),
) -> Result<GbdtModel> {
    cfg.validate()?;
    if labels.len() != x.n_rows {
        return Err(Error::Dimension {
            expected: x.n_rows,
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::SingleClass);
    }
    let p = n_pos as f64 / labels.len() as f64;
    let base_score = (p / (1.0 - p)).ln();
    let data = Binned::new(x, cfg.max_bins);
    let mut margins = vec![base_score; x.n_rows];
    let mut grad = vec![0.0; x.n_rows];
    let mut hess = vec![0.0; x.n_rows];
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    for round in 0..cfg.n_rounds {
        for i in 0..x.n_rows {
            let p = sigmoid(margins[i]);
            grad[i] = p - labels[i] as f64;
            hess[i] = (p * (1.0 - p)).max(1e-16);
        }
        let mut grower = Grower {
            cfg,
            data: &data,
            grad: &grad,
            hess: &hess,
            nodes: Vec::new(),
        };
        grower.grow((0..x.n_rows).collect(), 0);
        let tree = Tree { nodes: grower.nodes };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += cfg.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
        on_round(round, &margins);
    }
    GbdtModel::new(trees, cfg.learning_rate, base_score, x.n_features)
}

pub fn train_matrix(x: &FeatureMatrix, labels: &[u8], cfg: &GbdtConfig) -> Result<GbdtModel> {
    train_matrix_with(x, labels, cfg, |_, _| {})
}
