use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::corpus::{Dataset, Document, GoldLabels, Label, LabeledDocument, Record, Vocabulary};
use crate::error::{Error, Result};
use crate::model::PathModel;
use crate::taxonomy::{PathTable, Taxonomy};

/// Samples `n_docs` documents from `model`: a path from the prior, a length
/// uniform in `lengths`, then words i.i.d. from the path's word
/// distribution. Every document is labeled with the real classes on its
/// path. Words are named `w0`, `w1`, ... by index.
pub fn generate_synthetic(
    t: &Taxonomy,
    paths: &PathTable,
    model: &PathModel,
    n_docs: usize,
    lengths: (u32, u32),
    seed: u64,
) -> Result<Dataset> {
    if n_docs == 0 {
        return Err(Error::EmptyCorpus);
    }
    if model.num_paths() != paths.len() {
        return Err(Error::Dimension(format!(
            "model has {} paths, hierarchy has {}",
            model.num_paths(),
            paths.len()
        )));
    }
    let (lo, hi) = lengths;
    if lo > hi {
        return Err(Error::Config(format!("empty length range {lo}..={hi}")));
    }
    let weights = |logs: Vec<f64>| {
        WeightedIndex::new(logs.into_iter().map(f64::exp))
            .map_err(|e| Error::ModelFormat(format!("cannot sample from model: {e}")))
    };
    let prior = weights(model.log_prior().to_vec())?;
    let words = (0..paths.len())
        .map(|j| weights(model.log_word_row(j)))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labeled = (0..n_docs)
        .map(|i| {
            let j = prior.sample(&mut rng);
            let len = rng.random_range(lo..=hi);
            let doc = Document::new(
                format!("s{i}"),
                (0..len).map(|_| (words[j].sample(&mut rng) as u32, 1)),
            );
            LabeledDocument {
                doc,
                label: Label::Gold(GoldLabels::new(paths.labels(t, j))),
            }
        })
        .collect();
    Ok(Dataset {
        vocabulary: Vocabulary::from_words((0..model.vocab_size()).map(|w| format!("w{w}"))),
        labeled,
        unlabeled: Vec::new(),
        test: Vec::new(),
    })
}

/// Draws `n_train + n_test` documents and moves the last `n_test` into the
/// labeled test set.
pub fn synthetic_dataset(
    t: &Taxonomy,
    paths: &PathTable,
    model: &PathModel,
    (n_train, n_test): (usize, usize),
    lengths: (u32, u32),
    seed: u64,
) -> Result<Dataset> {
    let mut data = generate_synthetic(t, paths, model, n_train + n_test, lengths, seed)?;
    data.test = data.labeled.split_off(n_train).into_iter().map(Record::from).collect();
    Ok(data)
}

/// A random model with a uniform path prior and symmetric-Dirichlet word
/// distributions; smaller `concentration` gives peakier paths.
pub fn random_model(
    num_paths: usize,
    vocab_size: usize,
    concentration: f64,
    seed: u64,
) -> Result<PathModel> {
    if num_paths == 0 || vocab_size == 0 {
        return Err(Error::Dimension("model needs at least one path and one word".into()));
    }
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::Config(format!("bad concentration {concentration}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..num_paths)
        .map(|_| {
            // floor keeps every word reachable so the log stays finite
            let draws: Vec<f64> = (0..vocab_size)
                .map(|_| gamma.sample(&mut rng).max(1e-300))
                .collect();
            let sum: f64 = draws.iter().sum();
            draws.into_iter().map(|x| x / sum).collect()
        })
        .collect::<Vec<Vec<f64>>>();
    PathModel::from_probabilities(&vec![1.0 / num_paths as f64; num_paths], &rows)
}
