//! Fixtures and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use pathcost::corpus::Document;
use pathcost::taxonomy::{PathTable, Taxonomy};

pub fn six_path() -> (Taxonomy, PathTable) {
    let t = Taxonomy::from_edges(&[
        ("ROOT", "c1_1"),
        ("ROOT", "c1_2"),
        ("c1_1", "c2_1"),
        ("c1_1", "c2_2"),
        ("c1_1", "c2_3"),
        ("c1_2", "c2_4"),
        ("c1_2", "c2_5"),
        ("c1_2", "c2_6"),
    ])
    .unwrap();
    let p = PathTable::new(&t).unwrap();
    (t, p)
}

pub fn flat(n: usize) -> (Taxonomy, PathTable) {
    let edges: Vec<(String, String)> = (0..n).map(|i| ("ROOT".into(), format!("k{i}"))).collect();
    let t = Taxonomy::from_edges(&edges).unwrap();
    let p = PathTable::new(&t).unwrap();
    (t, p)
}

/// Complete tree with the given branching per level.
pub fn complete(branching: &[usize]) -> (Taxonomy, PathTable) {
    let mut edges = Vec::new();
    let mut frontier = vec!["ROOT".to_string()];
    for &b in branching {
        let mut next = Vec::new();
        for parent in &frontier {
            for i in 0..b {
                let child = if parent == "ROOT" { format!("n{i}") } else { format!("{parent}.{i}") };
                edges.push((parent.clone(), child.clone()));
                next.push(child);
            }
        }
        frontier = next;
    }
    let t = Taxonomy::from_edges(&edges).unwrap();
    let p = PathTable::new(&t).unwrap();
    (t, p)
}

/// Depth-3 tree with leaves at depths 1, 2 and 3, so it needs dummies.
pub fn ragged() -> (Taxonomy, PathTable) {
    let t = Taxonomy::from_edges(&[
        ("ROOT", "a"),
        ("ROOT", "b"),
        ("ROOT", "c"),
        ("a", "a1"),
        ("a", "a2"),
        ("a1", "a1x"),
        ("a1", "a1y"),
        ("b", "b1"),
        ("b", "b2"),
        ("b", "b3"),
    ])
    .unwrap()
    .normalize_depth();
    let p = PathTable::new(&t).unwrap();
    (t, p)
}

pub fn twenty_newsgroups() -> (Taxonomy, PathTable) {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/20ng_hierarchy.tsv");
    let t = Taxonomy::read(path).unwrap().normalize_depth();
    let p = PathTable::new(&t).unwrap();
    (t, p)
}

/// Textbook multinomial naive Bayes with add-one smoothing, one class per
/// document: `ln(1 + N_c) - ln(C + N)` and `ln(1 + n_ct) - ln(V + n_c)`.
pub struct Mnb {
    pub log_prior: Vec<f64>,
    /// `[class][word]`.
    pub log_word: Vec<Vec<f64>>,
}

impl Mnb {
    pub fn fit(docs: &[(&Document, usize)], classes: usize, vocab: usize) -> Mnb {
        let mut n_docs = vec![0u64; classes];
        let mut n_words = vec![vec![0u64; vocab]; classes];
        for (d, c) in docs {
            n_docs[*c] += 1;
            for &(w, x) in d.counts() {
                n_words[*c][w as usize] += x as u64;
            }
        }
        let total = docs.len() as f64;
        let log_prior = n_docs
            .iter()
            .map(|&n| (1.0 + n as f64).ln() - (classes as f64 + total).ln())
            .collect();
        let log_word = n_words
            .iter()
            .map(|row| {
                let len: u64 = row.iter().sum();
                let den = (vocab as f64 + len as f64).ln();
                row.iter().map(|&n| (1.0 + n as f64).ln() - den).collect()
            })
            .collect();
        Mnb { log_prior, log_word }
    }

    /// First class maximizing the log joint, accumulated word by word.
    pub fn predict(&self, d: &Document) -> usize {
        let scores: Vec<f64> = (0..self.log_prior.len())
            .map(|c| {
                let mut s = self.log_prior[c];
                for &(w, x) in d.counts() {
                    s += x as f64 * self.log_word[c][w as usize];
                }
                s
            })
            .collect();
        let mut best = 0;
        for c in 1..scores.len() {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        best
    }
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Bayes' rule in exact arithmetic: `prior_j prod_t word_jt^x_t`,
/// normalized.
pub fn exact_posterior(prior: &[BigRational], word: &[Vec<BigRational>], counts: &[u32]) -> Vec<f64> {
    let joint: Vec<BigRational> = prior
        .iter()
        .zip(word)
        .map(|(p, row)| {
            let mut v = p.clone();
            for (w, &x) in row.iter().zip(counts) {
                for _ in 0..x {
                    v *= w;
                }
            }
            v
        })
        .collect();
    let total = joint.iter().fold(BigRational::zero(), |a, b| a + b);
    joint.iter().map(|j| (j / &total).to_f64().unwrap()).collect()
}

/// Integer weights in `1..=9` normalized to an exact distribution.
pub fn rational_distribution(weights: &[i64]) -> Vec<BigRational> {
    let sum: i64 = weights.iter().sum();
    weights.iter().map(|&w| ratio(w, sum)).collect()
}

pub fn to_f64(v: &[BigRational]) -> Vec<f64> {
    v.iter().map(|r| r.to_f64().unwrap()).collect()
}

pub fn one() -> BigRational {
    BigRational::one()
}

/// Large-sample limit of the path-scored estimate on fully labeled data
/// whose lengths do not depend on the path: each path's prior and word
/// distribution become score-weighted mixtures of the true ones.
pub fn score_weighted_limit(
    prior: &[f64],
    word: &[Vec<f64>],
    score: impl Fn(usize, usize) -> f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = prior.len();
    let mass: Vec<f64> = (0..m)
        .map(|j| (0..m).map(|k| prior[k] * score(k, j)).sum())
        .collect();
    let total: f64 = mass.iter().sum();
    let limit_prior = mass.iter().map(|w| w / total).collect();
    let limit_word = (0..m)
        .map(|j| {
            (0..word[0].len())
                .map(|t| (0..m).map(|k| prior[k] * score(k, j) * word[k][t]).sum::<f64>() / mass[j])
                .collect()
        })
        .collect();
    (limit_prior, limit_word)
}

/// Every count vector over `vocab` words with entries in `0..=max`.
pub fn all_count_vectors(vocab: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..vocab {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=max).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}
