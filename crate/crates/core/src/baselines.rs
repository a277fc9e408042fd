//! Generative comparison systems built on the same machinery: flat naive
//! Bayes/EM over leaf paths, and top-down naive Bayes/EM with one local
//! classifier per internal node.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Document};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{estimate, train_em, train_nb, EmConfig, EmTrace, LabelScheme, PathModel, TrainingSet};
use crate::scoring::PathScores;
use crate::taxonomy::{NodeId, PathTable, Taxonomy};

/// Flat naive Bayes: each labeled document counts once, for the path of its
/// deepest labeled class. Predictions are paths, so the reported classes are
/// the leaf and its ancestors.
pub fn train_flat_nb(data: &Dataset, t: &Taxonomy, paths: &PathTable) -> Result<PathModel> {
    train_nb(&TrainingSet::new(data, t, paths, LabelScheme::OneHot)?)
}

pub fn train_flat_em(
    data: &Dataset,
    t: &Taxonomy,
    paths: &PathTable,
    cfg: &EmConfig,
) -> Result<(PathModel, EmTrace)> {
    let ts = TrainingSet::new(data, t, paths, LabelScheme::OneHot)?;
    train_em(&ts, cfg, |_| {})
}

/// Multinomial classifier over the children of one node.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalClassifier {
    pub node: NodeId,
    /// Classes of `model`, in the node's child order.
    pub children: Vec<NodeId>,
    pub model: PathModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopDownModel {
    /// Indexed by `NodeId`; present for every node with real children.
    locals: Vec<Option<LocalClassifier>>,
    vocab_size: usize,
}

/// How unlabeled documents are routed to local classifiers during EM.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Routing {
    /// Fractional weight: the product of child posteriors from the root.
    #[default]
    Soft,
    /// Weight one along the greedy top-down route only.
    Hard,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TopDownConfig {
    pub em: EmConfig,
    pub routing: Routing,
}

impl TopDownModel {
    pub fn local(&self, node: NodeId) -> Option<&LocalClassifier> {
        self.locals.get(node.0).and_then(Option::as_ref)
    }

    pub fn locals(&self) -> impl Iterator<Item = &LocalClassifier> {
        self.locals.iter().flatten()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Rebuilds a model from its local classifiers.
    pub fn from_locals(t: &Taxonomy, locals: Vec<LocalClassifier>, vocab_size: usize) -> Result<Self> {
        let mut slots = vec![None; t.len()];
        for l in locals {
            if l.children.len() != l.model.num_paths() || l.model.vocab_size() != vocab_size {
                return Err(Error::Dimension(format!(
                    "local classifier at `{}` does not match its children or the vocabulary",
                    t.name(l.node)
                )));
            }
            let idx = l.node.0;
            slots[idx] = Some(l);
        }
        Ok(TopDownModel {
            locals: slots,
            vocab_size,
        })
    }

    /// Probability of reaching each node, indexed by `NodeId`. Nodes below a
    /// classifier-less node get zero.
    pub fn routing_weights(&self, doc: &Document, t: &Taxonomy, routing: Routing) -> Result<Vec<f64>> {
        let mut w = vec![0.0; t.len()];
        w[t.root().0] = 1.0;
        for level in 0..=t.depth() {
            for &n in t.level(level) {
                let (Some(local), weight) = (self.local(n), w[n.0]) else {
                    continue;
                };
                if weight == 0.0 {
                    continue;
                }
                match routing {
                    Routing::Soft => {
                        let post = local.model.posterior(doc)?;
                        for (&c, p) in local.children.iter().zip(post) {
                            w[c.0] = weight * p;
                        }
                    }
                    Routing::Hard => {
                        let k = local.model.predict(doc)?;
                        w[local.children[k].0] = weight;
                    }
                }
            }
        }
        Ok(w)
    }
}

/// Internal nodes with at least one real child, in level order.
fn internal_nodes(t: &Taxonomy) -> Vec<(NodeId, Vec<NodeId>)> {
    (0..t.depth())
        .flat_map(|k| t.level(k).iter().copied())
        .filter_map(|n| {
            let children: Vec<NodeId> = t
                .node(n)
                .children
                .iter()
                .copied()
                .filter(|&c| !t.node(c).is_dummy)
                .collect();
            (!children.is_empty()).then_some((n, children))
        })
        .collect()
}

/// One-hot training rows per internal node: every labeled class trains the
/// classifier at its parent.
fn labeled_rows<'a>(
    data: &'a Dataset,
    t: &Taxonomy,
    internal: &[(NodeId, Vec<NodeId>)],
) -> Result<Vec<Vec<(&'a Document, PathScores)>>> {
    let mut slot = vec![usize::MAX; t.len()];
    for (i, (n, _)) in internal.iter().enumerate() {
        slot[n.0] = i;
    }
    let mut rows: Vec<Vec<(&Document, PathScores)>> = vec![Vec::new(); internal.len()];
    let mut any = false;
    for ld in &data.labeled {
        for &c in ld.label.nodes(t)?.nodes() {
            let Some(parent) = t.node(c).parent else { continue };
            let i = slot[parent.0];
            if i == usize::MAX {
                continue;
            }
            let children = &internal[i].1;
            if let Some(k) = children.iter().position(|&x| x == c) {
                rows[i].push((&ld.doc, PathScores::one_hot(children.len(), k)));
                any = true;
            }
        }
    }
    if !any {
        return Err(Error::NoLabeledDocuments);
    }
    Ok(rows)
}

fn fit_locals<'a>(
    internal: &[(NodeId, Vec<NodeId>)],
    rows: impl Fn(usize) -> Vec<(&'a Document, &'a PathScores)>,
    vocab_size: usize,
    n_nodes: usize,
) -> Result<TopDownModel> {
    let mut locals = vec![None; n_nodes];
    for (i, (n, children)) in internal.iter().enumerate() {
        let model = estimate(rows(i), children.len(), vocab_size)?;
        locals[n.0] = Some(LocalClassifier {
            node: *n,
            children: children.clone(),
            model,
        });
    }
    Ok(TopDownModel { locals, vocab_size })
}

/// Top-down naive Bayes. A node whose subtree has no labeled documents gets
/// a smoothing-only classifier.
pub fn train_topdown_nb(data: &Dataset, t: &Taxonomy) -> Result<TopDownModel> {
    let internal = internal_nodes(t);
    let rows = labeled_rows(data, t, &internal)?;
    fit_locals(
        &internal,
        |i| rows[i].iter().map(|(d, s)| (*d, s)).collect(),
        data.vocabulary.len(),
        t.len(),
    )
}

/// Top-down EM: each local classifier is re-estimated from its labeled rows
/// plus every unlabeled document, weighted by the document's probability of
/// reaching the node under the current model.
pub fn train_topdown_em(
    data: &Dataset,
    t: &Taxonomy,
    cfg: &TopDownConfig,
) -> Result<(TopDownModel, EmTrace)> {
    cfg.em.validate()?;
    let start = Instant::now();
    let internal = internal_nodes(t);
    let lab = labeled_rows(data, t, &internal)?;
    let vocab = data.vocabulary.len();
    let mut model = fit_locals(
        &internal,
        |i| lab[i].iter().map(|(d, s)| (*d, s)).collect(),
        vocab,
        t.len(),
    )?;
    let mut trace = EmTrace::default();
    for iter in 0.. {
        // per unlabeled doc: routing weights and, per internal node, the
        // local posterior and log evidence
        let estep = data
            .unlabeled
            .par_iter()
            .map(|d| {
                let w = model.routing_weights(d, t, cfg.routing)?;
                let mut obj = 0.0;
                let mut soft = Vec::with_capacity(internal.len());
                for (n, children) in &internal {
                    let local = model.local(*n).expect("classifier for every internal node");
                    let weight = w[n.0];
                    if weight == 0.0 {
                        soft.push(None);
                        continue;
                    }
                    let lj = local.model.log_joint(d)?;
                    obj += weight * log_sum_exp(&lj);
                    let scores = children.iter().map(|c| w[c.0]).collect();
                    soft.push(Some(PathScores::hard(scores)));
                }
                Ok((soft, obj))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut obj: f64 = estep.iter().map(|(_, o)| o).sum();
        for (i, (n, _)) in internal.iter().enumerate() {
            let local = &model.local(*n).expect("classifier for every internal node").model;
            obj += local.log_parameter_prior();
            for (d, s) in &lab[i] {
                let k = s.argmax().expect("one-hot row");
                obj += local.log_joint(d)?[k];
            }
        }
        let prev = trace.objectives.last().copied();
        trace.objectives.push(obj);
        trace.seconds.push(start.elapsed().as_secs_f64());
        if let Some(prev) = prev {
            if data.unlabeled.is_empty()
                || (iter >= cfg.em.min_iters && ((obj - prev) / prev).abs() < cfg.em.rel_tol)
            {
                trace.converged = true;
                break;
            }
        }
        if iter == cfg.em.max_iters {
            break;
        }

        model = fit_locals(
            &internal,
            |i| {
                lab[i]
                    .iter()
                    .map(|(d, s)| (*d, s))
                    .chain(
                        data.unlabeled
                            .iter()
                            .zip(&estep)
                            .filter_map(|(d, (soft, _))| soft[i].as_ref().map(|s| (d, s))),
                    )
                    .collect()
            },
            vocab,
            t.len(),
        )?;
    }
    Ok((model, trace))
}

/// Greedy descent from the root taking the most probable child at each
/// step. Returns the visited classes, root excluded.
pub fn predict_topdown(doc: &Document, m: &TopDownModel, t: &Taxonomy) -> Result<Vec<NodeId>> {
    let mut out = Vec::with_capacity(t.depth());
    let mut node = t.root();
    while let Some(local) = m.local(node) {
        node = local.children[local.model.predict(doc)?];
        out.push(node);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{GoldLabels, Label, LabeledDocument, Vocabulary};

    fn two_by_two() -> Taxonomy {
        Taxonomy::from_edges(&[
            ("ROOT", "a"),
            ("ROOT", "b"),
            ("a", "a1"),
            ("a", "a2"),
            ("b", "b1"),
            ("b", "b2"),
        ])
        .unwrap()
    }

    fn labeled(t: &Taxonomy, id: &str, leaf: &str, counts: &[(u32, u32)]) -> LabeledDocument {
        LabeledDocument {
            doc: Document::new(id, counts.iter().copied()),
            label: Label::Gold(GoldLabels::checked(t, id, vec![t.id(leaf).unwrap()]).unwrap()),
        }
    }

    fn toy_data(t: &Taxonomy) -> Dataset {
        Dataset {
            vocabulary: Vocabulary::from_words(["w0", "w1", "w2", "w3"]),
            labeled: vec![
                labeled(t, "d0", "a1", &[(0, 3), (2, 1)]),
                labeled(t, "d1", "a2", &[(0, 2), (3, 2)]),
                labeled(t, "d2", "b1", &[(1, 3), (2, 1)]),
                labeled(t, "d3", "b2", &[(1, 2), (3, 3)]),
            ],
            unlabeled: vec![
                Document::new("u0", [(0, 2), (2, 2)]),
                Document::new("u1", [(1, 1), (3, 4)]),
            ],
            test: Vec::new(),
        }
    }

    #[test]
    fn flat_uses_one_hot_targets() {
        let t = two_by_two();
        let p = PathTable::new(&t).unwrap();
        let data = toy_data(&t);
        let ts = TrainingSet::new(&data, &t, &p, LabelScheme::OneHot).unwrap();
        assert_eq!(ts.scores[0], PathScores::one_hot(4, 0));
        let ts = TrainingSet::new(&data, &t, &p, LabelScheme::PathCost).unwrap();
        assert_eq!(ts.scores[0].values(), &[2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn topdown_nb_follows_hand_route() {
        let t = two_by_two();
        let data = toy_data(&t);
        let m = train_topdown_nb(&data, &t).unwrap();
        // root: w0 is 5 of the 8 a-tokens and absent from b. Doc {w0:1}
        // goes to a; under a, a1 saw w0 three times out of 4 tokens and a2
        // twice out of 4, so a1 wins.
        let pred = predict_topdown(&Document::new("x", [(0, 1)]), &m, &t).unwrap();
        assert_eq!(pred, vec![t.id("a").unwrap(), t.id("a1").unwrap()]);
        let root = m.local(t.root()).unwrap();
        // root prior: 2 docs each side -> (1+2)/(2+4)
        assert!((root.model.log_prior()[0].exp() - 0.5).abs() < 1e-15);
        // a: P(w0 | a1) = (1+3)/(4+4), P(w0 | a2) = (1+2)/(4+4)
        let a = m.local(t.id("a").unwrap()).unwrap();
        assert!((a.model.log_word(0, 0).exp() - 0.5).abs() < 1e-15);
        assert!((a.model.log_word(1, 0).exp() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn routing_weights_form_a_flow() {
        let t = two_by_two();
        let data = toy_data(&t);
        let m = train_topdown_nb(&data, &t).unwrap();
        for routing in [Routing::Soft, Routing::Hard] {
            let w = m.routing_weights(&data.unlabeled[0], &t, routing).unwrap();
            assert_eq!(w[t.root().0], 1.0);
            for l in m.locals() {
                let s: f64 = l.children.iter().map(|c| w[c.0]).sum();
                assert!((s - w[l.node.0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn topdown_em_runs_and_reduces_without_unlabeled() {
        let t = two_by_two();
        let mut data = toy_data(&t);
        let (m, trace) = train_topdown_em(&data, &t, &TopDownConfig::default()).unwrap();
        assert!(trace.iterations() >= 1);
        for d in &data.unlabeled {
            assert!(t.is_root_to_leaf_chain(&predict_topdown(d, &m, &t).unwrap()));
        }
        data.unlabeled.clear();
        let (m, trace) = train_topdown_em(&data, &t, &TopDownConfig::default()).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert_eq!(m, train_topdown_nb(&data, &t).unwrap());
    }

    #[test]
    fn topdown_nb_with_unvisited_subtree() {
        let t = two_by_two();
        let mut data = toy_data(&t);
        data.labeled.truncate(2);
        let m = train_topdown_nb(&data, &t).unwrap();
        let b = m.local(t.id("b").unwrap()).unwrap();
        assert!(b.model.log_prior().iter().all(|&v| (v.exp() - 0.5).abs() < 1e-15));
    }

    #[test]
    fn topdown_requires_labels() {
        let t = two_by_two();
        let mut data = toy_data(&t);
        data.labeled.clear();
        assert!(matches!(train_topdown_nb(&data, &t), Err(Error::NoLabeledDocuments)));
    }
}
