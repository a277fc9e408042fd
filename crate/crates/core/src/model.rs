//! The path-generated multinomial mixture: one mixture component per
//! root-to-leaf path.
//!
//! Parameters are estimated from path scores used as fractional event counts
//! with add-one smoothing, which is the MAP estimate under a Dirichlet(2)
//! prior on the path prior and on every per-path word distribution. The EM
//! trainer folds unlabeled documents in through their posterior over paths.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Document, Label};
use crate::error::{Error, Result};
use crate::math::{argmax, log_sum_exp};
use crate::scoring::{scores_from_label, soft_scores_from_posterior, PathScores};
use crate::taxonomy::{PathTable, Taxonomy};

/// Log path priors and per-path log word probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct PathModel {
    num_paths: usize,
    vocab_size: usize,
    log_prior: Vec<f64>,
    /// Word-major: entry `t * num_paths + j` is `log P(w_t | p_j)`.
    log_word: Vec<f64>,
}

impl PathModel {
    pub fn uniform(num_paths: usize, vocab_size: usize) -> Self {
        PathModel {
            num_paths,
            vocab_size,
            log_prior: vec![-(num_paths as f64).ln(); num_paths],
            log_word: vec![-(vocab_size as f64).ln(); num_paths * vocab_size],
        }
    }

    /// Builds a model from log parameters, `log_word[j][t]` per path.
    pub fn from_log_parts(log_prior: Vec<f64>, log_word: Vec<Vec<f64>>) -> Result<Self> {
        let num_paths = log_prior.len();
        if log_word.len() != num_paths {
            return Err(Error::Dimension(format!(
                "{} prior entries but {} word rows",
                num_paths,
                log_word.len()
            )));
        }
        let vocab_size = log_word.first().map_or(0, Vec::len);
        if log_word.iter().any(|r| r.len() != vocab_size) {
            return Err(Error::Dimension("word rows differ in length".into()));
        }
        let mut flat = vec![0.0; num_paths * vocab_size];
        for (j, row) in log_word.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                flat[t * num_paths + j] = v;
            }
        }
        Ok(PathModel {
            num_paths,
            vocab_size,
            log_prior,
            log_word: flat,
        })
    }

    /// Builds a model from probabilities, `word[j][t]` per path.
    pub fn from_probabilities(prior: &[f64], word: &[Vec<f64>]) -> Result<Self> {
        let check = |v: &[f64], what: &str| {
            let s: f64 = v.iter().sum();
            if v.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                Err(Error::Dimension(format!("{what} is not a distribution (sum {s})")))
            } else {
                Ok(())
            }
        };
        check(prior, "prior")?;
        for row in word {
            check(row, "word row")?;
        }
        Self::from_log_parts(
            prior.iter().map(|p| p.ln()).collect(),
            word.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect(),
        )
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    pub fn log_word(&self, path: usize, word: usize) -> f64 {
        self.log_word[word * self.num_paths + path]
    }

    /// `log P(w | p_path)` for every word.
    pub fn log_word_row(&self, path: usize) -> Vec<f64> {
        (0..self.vocab_size).map(|t| self.log_word(path, t)).collect()
    }

    /// `log P(p_j) + sum_t x_t log P(w_t | p_j)` for every path.
    pub fn log_joint(&self, doc: &Document) -> Result<Vec<f64>> {
        let p = self.num_paths;
        let mut out = self.log_prior.clone();
        for &(t, x) in doc.counts() {
            let t = t as usize;
            if t >= self.vocab_size {
                return Err(Error::WordOutOfRange {
                    index: t,
                    size: self.vocab_size,
                });
            }
            let x = x as f64;
            let row = &self.log_word[t * p..(t + 1) * p];
            for (o, &lw) in out.iter_mut().zip(row) {
                *o += x * lw;
            }
        }
        Ok(out)
    }

    /// Posterior over paths and `log sum_j P(p_j) P(x | p_j)`.
    pub fn posterior_with_evidence(&self, doc: &Document) -> Result<(Vec<f64>, f64)> {
        let mut lj = self.log_joint(doc)?;
        let lse = log_sum_exp(&lj);
        for v in lj.iter_mut() {
            *v = (*v - lse).exp();
        }
        Ok((lj, lse))
    }

    pub fn posterior(&self, doc: &Document) -> Result<Vec<f64>> {
        Ok(self.posterior_with_evidence(doc)?.0)
    }

    /// The most probable path; the lowest index wins ties.
    pub fn predict(&self, doc: &Document) -> Result<usize> {
        Ok(argmax(&self.log_joint(doc)?).unwrap_or(0))
    }

    /// Log density of the Dirichlet(2) prior over all parameter vectors, up
    /// to an additive constant.
    pub fn log_parameter_prior(&self) -> f64 {
        self.log_prior.iter().sum::<f64>() + self.log_word.iter().sum::<f64>()
    }
}

/// Smoothed estimate from `(document, path scores)` rows:
///
/// ```text
/// P(p_j)     = (1 + sum_i S_ij)        / (M + sum_i sum_k S_ik)
/// P(w_t|p_j) = (1 + sum_i S_ij x_it)   / (|V| + sum_i sum_s S_ij x_is)
/// ```
///
/// Rows are summed in iteration order. With no rows the model is uniform.
pub fn estimate<'a, I>(rows: I, num_paths: usize, vocab_size: usize) -> Result<PathModel>
where
    I: IntoIterator<Item = (&'a Document, &'a PathScores)>,
{
    let p = num_paths;
    let mut prior = vec![0.0f64; p];
    let mut words = vec![0.0f64; p * vocab_size];
    let mut totals = vec![0.0f64; p];
    let mut active = Vec::with_capacity(p);
    for (doc, scores) in rows {
        if scores.len() != p {
            return Err(Error::Dimension(format!(
                "score vector of length {} for {} paths",
                scores.len(),
                p
            )));
        }
        active.clear();
        for (j, &s) in scores.values().iter().enumerate() {
            if s != 0.0 {
                prior[j] += s;
                active.push((j, s));
            }
        }
        for &(t, x) in doc.counts() {
            let t = t as usize;
            if t >= vocab_size {
                return Err(Error::WordOutOfRange {
                    index: t,
                    size: vocab_size,
                });
            }
            let x = x as f64;
            for &(j, s) in &active {
                words[t * p + j] += s * x;
                totals[j] += s * x;
            }
        }
    }
    let prior_den = (p as f64 + prior.iter().sum::<f64>()).ln();
    let log_prior = prior.iter().map(|&c| (1.0 + c).ln() - prior_den).collect();
    let word_den: Vec<f64> = totals.iter().map(|&n| (vocab_size as f64 + n).ln()).collect();
    let log_word = words
        .chunks(p.max(1))
        .flat_map(|row| row.iter().zip(&word_den).map(|(&c, &den)| (1.0 + c).ln() - den))
        .collect::<Vec<_>>();
    Ok(PathModel {
        num_paths,
        vocab_size,
        log_prior,
        log_word: if p == 0 { Vec::new() } else { log_word },
    })
}

/// How labeled documents are turned into path scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelScheme {
    /// Graded path scores: each labeled class adds one count to every path
    /// through it.
    PathCost,
    /// One count on the path of the deepest labeled class. Documents whose
    /// deepest label does not pin down a single path are skipped.
    OneHot,
}

/// Labeled documents with their hard scores, plus the unlabeled pool.
#[derive(Clone, Debug)]
pub struct TrainingSet<'a> {
    pub labeled: Vec<&'a Document>,
    pub scores: Vec<PathScores>,
    pub unlabeled: Vec<&'a Document>,
    pub num_paths: usize,
    pub vocab_size: usize,
}

impl<'a> TrainingSet<'a> {
    pub fn new(
        data: &'a Dataset,
        t: &Taxonomy,
        paths: &PathTable,
        scheme: LabelScheme,
    ) -> Result<Self> {
        let mut labeled = Vec::with_capacity(data.labeled.len());
        let mut scores = Vec::with_capacity(data.labeled.len());
        for ld in &data.labeled {
            let s = match scheme {
                LabelScheme::PathCost => Some(scores_from_label(&ld.label, t, paths)?),
                LabelScheme::OneHot => one_hot_target(&ld.label, t, paths)?
                    .map(|j| PathScores::one_hot(paths.len(), j)),
            };
            if let Some(s) = s {
                labeled.push(&ld.doc);
                scores.push(s);
            }
        }
        Ok(TrainingSet {
            labeled,
            scores,
            unlabeled: data.unlabeled.iter().collect(),
            num_paths: paths.len(),
            vocab_size: data.vocabulary.len(),
        })
    }

    fn labeled_rows(&self) -> impl Iterator<Item = (&Document, &PathScores)> {
        self.labeled.iter().copied().zip(self.scores.iter())
    }
}

/// The path of the deepest labeled class, if that class lies on exactly one
/// path.
pub fn one_hot_target(label: &Label, t: &Taxonomy, paths: &PathTable) -> Result<Option<usize>> {
    let nodes = label.nodes(t)?;
    let Some(&deepest) = nodes.nodes().iter().max_by_key(|&&id| t.node(id).depth) else {
        return Ok(None);
    };
    let span = paths.span(deepest);
    Ok((span.len() == 1).then_some(span.start))
}

/// Path cost-sensitive naive Bayes: estimate from the labeled documents
/// only.
pub fn train_pcnb(data: &Dataset, t: &Taxonomy, paths: &PathTable) -> Result<PathModel> {
    train_nb(&TrainingSet::new(data, t, paths, LabelScheme::PathCost)?)
}

pub fn train_nb(ts: &TrainingSet) -> Result<PathModel> {
    if ts.labeled.is_empty() {
        return Err(Error::NoLabeledDocuments);
    }
    estimate(ts.labeled_rows(), ts.num_paths, ts.vocab_size)
}

/// Objective monitored by EM: the Dirichlet log-prior, plus each labeled
/// document's log joint weighted by its path scores, plus each unlabeled
/// document's log evidence. Multinomial coefficients and the length
/// distribution are dropped.
///
/// The M-step maximizes exactly the score-weighted labeled term, so this
/// objective never decreases across EM iterations. With one-hot scores it
/// equals [`objective_at_best_path`].
pub fn objective(m: &PathModel, ts: &TrainingSet) -> Result<f64> {
    let evidence = evidence(m, &ts.unlabeled)?;
    objective_with_evidence(m, ts, &evidence)
}

/// Variant of [`objective`] whose labeled term is the log joint at each
/// document's highest-scoring path (lowest index on ties). EM does not
/// ascend this quantity when labeled documents credit several paths.
pub fn objective_at_best_path(m: &PathModel, ts: &TrainingSet) -> Result<f64> {
    let mut total = m.log_parameter_prior();
    for (doc, s) in ts.labeled_rows() {
        if let Some(j) = s.argmax() {
            total += m.log_joint(doc)?[j];
        }
    }
    Ok(total + evidence(m, &ts.unlabeled)?.iter().sum::<f64>())
}

fn evidence(m: &PathModel, docs: &[&Document]) -> Result<Vec<f64>> {
    docs.par_iter()
        .map(|d| m.log_joint(d).map(|lj| log_sum_exp(&lj)))
        .collect()
}

fn objective_with_evidence(m: &PathModel, ts: &TrainingSet, evidence: &[f64]) -> Result<f64> {
    let mut total = m.log_parameter_prior();
    for (doc, s) in ts.labeled_rows() {
        let lj = m.log_joint(doc)?;
        total += s
            .values()
            .iter()
            .zip(&lj)
            .filter(|(&w, _)| w != 0.0)
            .map(|(w, l)| w * l)
            .sum::<f64>();
    }
    Ok(total + evidence.iter().sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once `|l_t - l_{t-1}| / |l_{t-1}|` falls below this.
    pub rel_tol: f64,
    pub min_iters: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 50,
            rel_tol: 1e-4,
            min_iters: 2,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_iters < 1 || self.max_iters < self.min_iters {
            return Err(Error::Config(format!(
                "need max_iters ({}) >= min_iters ({}) >= 1",
                self.max_iters, self.min_iters
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// Objective after initialization and after each M-step, with elapsed
/// seconds since training started.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmTrace {
    pub objectives: Vec<f64>,
    pub seconds: Vec<f64>,
    pub converged: bool,
}

impl EmTrace {
    /// Number of M-steps performed.
    pub fn iterations(&self) -> usize {
        self.objectives.len().saturating_sub(1)
    }
}

/// Scores fed to one M-step.
pub struct EmStep<'s> {
    pub iteration: usize,
    pub labeled: &'s [PathScores],
    pub unlabeled: &'s [PathScores],
}

pub fn train_pcem(
    data: &Dataset,
    t: &Taxonomy,
    paths: &PathTable,
    cfg: &EmConfig,
) -> Result<(PathModel, EmTrace)> {
    let ts = TrainingSet::new(data, t, paths, LabelScheme::PathCost)?;
    train_em(&ts, cfg, |_| {})
}

/// EM from the naive Bayes initializer. The E-step turns each unlabeled
/// document's posterior into soft path scores; the M-step re-estimates from
/// labeled and soft rows together. `inspect` sees the scores of every
/// M-step.
pub fn train_em<F>(ts: &TrainingSet, cfg: &EmConfig, mut inspect: F) -> Result<(PathModel, EmTrace)>
where
    F: FnMut(&EmStep),
{
    cfg.validate()?;
    let start = Instant::now();
    let mut model = train_nb(ts)?;
    let mut trace = EmTrace::default();
    for iter in 0.. {
        let (soft, evidence): (Vec<PathScores>, Vec<f64>) = ts
            .unlabeled
            .par_iter()
            .map(|d| {
                let (post, ev) = model.posterior_with_evidence(d)?;
                Ok((soft_scores_from_posterior(post)?, ev))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let obj = objective_with_evidence(&model, ts, &evidence)?;
        let prev = trace.objectives.last().copied();
        trace.objectives.push(obj);
        trace.seconds.push(start.elapsed().as_secs_f64());

        if let Some(prev) = prev {
            if ts.unlabeled.is_empty()
                || (iter >= cfg.min_iters && ((obj - prev) / prev).abs() < cfg.rel_tol)
            {
                trace.converged = true;
                break;
            }
        }
        if iter == cfg.max_iters {
            break;
        }

        inspect(&EmStep {
            iteration: iter + 1,
            labeled: &ts.scores,
            unlabeled: &soft,
        });
        let rows = ts
            .labeled_rows()
            .chain(ts.unlabeled.iter().copied().zip(soft.iter()));
        model = estimate(rows, ts.num_paths, ts.vocab_size)?;
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(counts: &[(u32, u32)]) -> Document {
        Document::new("d", counts.iter().copied())
    }

    #[test]
    fn empty_input_is_uniform() {
        let m = estimate(std::iter::empty(), 6, 4).unwrap();
        for j in 0..6 {
            assert!((m.log_prior()[j].exp() - 1.0 / 6.0).abs() < 1e-15);
            for t in 0..4 {
                assert!((m.log_word(j, t).exp() - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn six_path_estimate() {
        // (1 + S_j) / (6 + 4)
        let d = doc(&[(0, 1)]);
        let s = PathScores::hard(vec![1.0, 2.0, 1.0, 0.0, 0.0, 0.0]);
        let m = estimate([(&d, &s)], 6, 1).unwrap();
        let prior: Vec<f64> = m.log_prior().iter().map(|v| v.exp()).collect();
        let expected = [0.2, 0.3, 0.2, 0.1, 0.1, 0.1];
        for (a, b) in prior.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{prior:?}");
        }
        // single-word vocabulary: (1 + 2) / (1 + 2) = 1
        assert_eq!(m.log_word(1, 0), 0.0);
        // every word row is 1, so the prior decides
        assert_eq!(m.predict(&d).unwrap(), 1);
    }

    fn set<'a>(labeled: Vec<(&'a Document, PathScores)>, unlabeled: Vec<&'a Document>, p: usize, v: usize) -> TrainingSet<'a> {
        let (labeled, scores) = labeled.into_iter().unzip();
        TrainingSet {
            labeled,
            scores,
            unlabeled,
            num_paths: p,
            vocab_size: v,
        }
    }

    #[test]
    fn objective_of_empty_labeled_doc() {
        let m = PathModel::uniform(6, 3);
        let d = doc(&[]);
        let ts = set(vec![(&d, PathScores::one_hot(6, 2))], vec![], 6, 3);
        let labeled = objective(&m, &ts).unwrap() - m.log_parameter_prior();
        assert!((labeled - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        assert_eq!(objective(&m, &ts).unwrap(), objective_at_best_path(&m, &ts).unwrap());
    }

    #[test]
    fn objective_two_document_instance() {
        // labeled {w0:2} scored (2,1), unlabeled {w1:1}
        let m = PathModel::from_probabilities(&[0.6, 0.4], &[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let (a, b) = (doc(&[(0, 2)]), doc(&[(1, 1)]));
        let ts = set(vec![(&a, PathScores::hard(vec![2.0, 1.0]))], vec![&b], 2, 2);
        let prior = (0.6f64 * 0.4 * 0.7 * 0.3 * 0.2 * 0.8).ln();
        let labeled = 2.0 * (0.6f64 * 0.49).ln() + (0.4f64 * 0.04).ln();
        let unlabeled = (0.6f64 * 0.3 + 0.4 * 0.8).ln();
        assert!((objective(&m, &ts).unwrap() - (prior + labeled + unlabeled)).abs() < 1e-10);
        let best = prior + (0.6f64 * 0.49).ln() + unlabeled;
        assert!((objective_at_best_path(&m, &ts).unwrap() - best).abs() < 1e-10);
    }

    #[test]
    fn em_without_unlabeled_is_naive_bayes() {
        let (a, b) = (doc(&[(0, 2), (1, 1)]), doc(&[(2, 3)]));
        let ts = set(
            vec![(&a, PathScores::hard(vec![2.0, 1.0, 0.0])), (&b, PathScores::one_hot(3, 2))],
            vec![],
            3,
            3,
        );
        let (m, trace) = train_em(&ts, &EmConfig::default(), |_| {}).unwrap();
        assert_eq!(m, train_nb(&ts).unwrap());
        assert_eq!(trace.iterations(), 1);
        assert!(trace.converged);
    }

    #[test]
    fn mismatched_dimensions_fail() {
        let d = doc(&[(0, 1)]);
        let s = PathScores::hard(vec![1.0, 2.0]);
        assert!(matches!(estimate([(&d, &s)], 3, 1), Err(Error::Dimension(_))));
        let d = doc(&[(5, 1)]);
        let s = PathScores::hard(vec![1.0, 2.0, 0.0]);
        assert!(matches!(estimate([(&d, &s)], 3, 2), Err(Error::WordOutOfRange { .. })));
    }

    #[test]
    fn posterior_examples() {
        let m = PathModel::from_probabilities(&[0.3, 0.7], &[vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap();
        let p = m.posterior(&doc(&[])).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] - 0.7).abs() < 1e-15);

        let u = PathModel::uniform(3, 4);
        let p = u.posterior(&doc(&[(0, 3), (2, 1)])).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));

        // 0.5*0.9 / (0.5*0.9 + 0.5*0.1)
        let m = PathModel::from_probabilities(&[0.5, 0.5], &[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let p = m.posterior(&doc(&[(0, 1)])).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15 && (p[1] - 0.1).abs() < 1e-15);
        assert_eq!(m.predict(&doc(&[(0, 1)])).unwrap(), 0);

        assert!(matches!(m.posterior(&doc(&[(2, 1)])), Err(Error::WordOutOfRange { .. })));
    }

    #[test]
    fn posterior_survives_long_documents() {
        let m = PathModel::from_probabilities(&[0.5, 0.5], &[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let p = m.posterior(&doc(&[(0, 5000), (1, 4999)])).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let u = PathModel::uniform(4, 2);
        assert_eq!(u.predict(&doc(&[(1, 2)])).unwrap(), 0);
    }

    #[test]
    fn config_validation() {
        assert!(EmConfig::default().validate().is_ok());
        let bad = EmConfig { max_iters: 1, min_iters: 2, rel_tol: 1e-4 };
        assert!(bad.validate().is_err());
        let bad = EmConfig { rel_tol: 0.0, ..EmConfig::default() };
        assert!(bad.validate().is_err());
        let bad = EmConfig { min_iters: 0, ..EmConfig::default() };
        assert!(bad.validate().is_err());
    }
}
