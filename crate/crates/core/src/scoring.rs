//! Node and path scores: the cost-sensitive event counts used in estimation.
//!
//! A labeled document scores 1 on each of its (possibly weak) per-depth
//! classes, and a path scores the sum over its nodes. A path sharing the top
//! `k` labeled classes with the document therefore gets `k` counts, so near
//! misses in the hierarchy still receive credit. Unlabeled documents use
//! their posterior over paths as a soft score.

use std::io::Write;

use crate::corpus::{weak_label_nodes, GoldLabels, Label, WeakSimilarities};
use crate::error::{Error, Result};
use crate::taxonomy::{PathTable, Taxonomy};

/// 0/1 score per taxonomy node, indexed by `NodeId`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeScores(Vec<u32>);

impl NodeScores {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Sum over all nodes, dummies included.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreMode {
    /// Integer counts in `[0, d]`.
    Hard,
    /// Posterior probabilities summing to one.
    Soft,
}

/// One document's score for every path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathScores {
    values: Vec<f64>,
    mode: ScoreMode,
}

impl PathScores {
    pub fn hard(values: Vec<f64>) -> Self {
        PathScores {
            values,
            mode: ScoreMode::Hard,
        }
    }

    pub fn one_hot(num_paths: usize, j: usize) -> Self {
        let mut values = vec![0.0; num_paths];
        values[j] = 1.0;
        Self::hard(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the highest score, lowest index on ties.
    pub fn argmax(&self) -> Option<usize> {
        crate::math::argmax(&self.values)
    }
}

/// Indicator scores for the labeled nodes. A dummy node takes the score of
/// the real leaf it extends, so a complete path still scores `d` after depth
/// normalization.
pub fn node_scores_from_gold(labels: &GoldLabels, t: &Taxonomy) -> Result<NodeScores> {
    let mut scores = vec![0u32; t.len()];
    for &id in labels.nodes() {
        let depth = t.node(id).depth;
        if depth > t.depth() {
            return Err(Error::LabelTooDeep {
                depth,
                max: t.depth(),
            });
        }
        if id != t.root() {
            scores[id.0] = 1;
        }
    }
    for n in t.nodes() {
        if let Some(leaf) = n.extends {
            scores[n.id.0] = scores[leaf.0];
        }
    }
    Ok(NodeScores(scores))
}

/// Sum of member-node scores along each path (root excluded).
pub fn path_scores(node_scores: &NodeScores, paths: &PathTable) -> PathScores {
    let s = node_scores.as_slice();
    let values = paths
        .paths()
        .iter()
        .map(|p| p.iter().map(|id| s[id.0] as f64).sum())
        .collect();
    PathScores::hard(values)
}

pub fn scores_from_weak(
    sims: &WeakSimilarities,
    t: &Taxonomy,
    paths: &PathTable,
) -> Result<PathScores> {
    let nodes = weak_label_nodes(sims, t)?;
    Ok(path_scores(&node_scores_from_gold(&nodes, t)?, paths))
}

pub fn scores_from_label(label: &Label, t: &Taxonomy, paths: &PathTable) -> Result<PathScores> {
    match label {
        Label::Gold(g) => Ok(path_scores(&node_scores_from_gold(g, t)?, paths)),
        Label::Weak(s) => scores_from_weak(s, t, paths),
    }
}

/// Wraps a posterior over paths as a soft score vector.
pub fn soft_scores_from_posterior(posterior: Vec<f64>) -> Result<PathScores> {
    let sum: f64 = posterior.iter().sum();
    if posterior.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::UnnormalizedPosterior(sum));
    }
    Ok(PathScores {
        values: posterior,
        mode: ScoreMode::Soft,
    })
}

/// Debug dump as `doc_id,path_index,score` rows, zero scores omitted.
pub fn write_scores_csv<W: Write>(mut w: W, rows: &[(&str, &PathScores)]) -> Result<()> {
    writeln!(w, "doc_id,path_index,score")?;
    for (id, s) in rows {
        for (j, &v) in s.values().iter().enumerate() {
            if v != 0.0 {
                writeln!(w, "{id},{j},{v}")?;
            }
        }
    }
    Ok(())
}
