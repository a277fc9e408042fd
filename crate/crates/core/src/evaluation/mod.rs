//! F1 metrics over the class hierarchy, the synthetic corpus generator and
//! the experiment runner.
//!
//! Every non-root, non-dummy node is a class. A document's gold and
//! predicted label sets are compared class by class; micro-F1 pools the
//! counts, macro-F1 averages per-class F1 with absent classes contributing 0.

mod experiment;
mod synthetic;

pub use experiment::{
    evaluate, run_experiment, run_on_dataset, train, write_reports, Algorithm, EvalReport,
    ExperimentConfig, Fitted, RunResult, Trained,
};
pub use synthetic::{generate_synthetic, random_model, synthetic_dataset};

use crate::error::{Error, Result};
use crate::taxonomy::{NodeId, Taxonomy};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionCounts {
    classes: Vec<NodeId>,
    /// Class slot per `NodeId`; `None` for the root and dummies.
    slot: Vec<Option<usize>>,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassScore {
    pub class: NodeId,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ConfusionCounts {
    pub fn new(t: &Taxonomy) -> Self {
        let classes = t.classes();
        let mut slot = vec![None; t.len()];
        for (i, c) in classes.iter().enumerate() {
            slot[c.0] = Some(i);
        }
        let n = classes.len();
        ConfusionCounts {
            classes,
            slot,
            tp: vec![0; n],
            fp: vec![0; n],
            fn_: vec![0; n],
        }
    }

    /// Counts over an explicit class list, for hand-built cases.
    pub fn from_counts(tp: Vec<u64>, fp: Vec<u64>, fn_: Vec<u64>) -> Result<Self> {
        let n = tp.len();
        if fp.len() != n || fn_.len() != n {
            return Err(Error::Dimension("count vectors differ in length".into()));
        }
        Ok(ConfusionCounts {
            classes: (0..n).map(NodeId).collect(),
            slot: (0..n).map(Some).collect(),
            tp,
            fp,
            fn_,
        })
    }

    pub fn classes(&self) -> &[NodeId] {
        &self.classes
    }

    /// Adds one document. Nodes outside the class set are ignored and
    /// repeated nodes count once.
    pub fn add(&mut self, gold: &[NodeId], predicted: &[NodeId]) {
        let slots = |nodes: &[NodeId]| {
            let mut s: Vec<usize> = nodes
                .iter()
                .filter_map(|n| self.slot.get(n.0).copied().flatten())
                .collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let (g, p) = (slots(gold), slots(predicted));
        for &c in &p {
            if g.binary_search(&c).is_ok() {
                self.tp[c] += 1;
            } else {
                self.fp[c] += 1;
            }
        }
        for &c in &g {
            if p.binary_search(&c).is_err() {
                self.fn_[c] += 1;
            }
        }
    }

    pub fn per_class(&self) -> Vec<ClassScore> {
        (0..self.classes.len())
            .map(|i| {
                let (precision, recall, f1) = prf(self.tp[i], self.fp[i], self.fn_[i]);
                ClassScore {
                    class: self.classes[i],
                    precision,
                    recall,
                    f1,
                }
            })
            .collect()
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// `2PR / (P + R)` with precision and recall pooled over all classes.
pub fn micro_f1(c: &ConfusionCounts) -> Result<f64> {
    if c.classes.is_empty() {
        return Err(Error::EmptyClassSet);
    }
    let tp = c.tp.iter().sum();
    Ok(prf(tp, c.fp.iter().sum(), c.fn_.iter().sum()).2)
}

/// Unweighted mean of per-class F1.
pub fn macro_f1(c: &ConfusionCounts) -> Result<f64> {
    if c.classes.is_empty() {
        return Err(Error::EmptyClassSet);
    }
    let sum: f64 = c.per_class().iter().map(|s| s.f1).sum();
    Ok(sum / c.classes.len() as f64)
}
