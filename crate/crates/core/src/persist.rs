//! Versioned JSON model files.
//!
//! A model file carries the hierarchy edges, the vocabulary and the log
//! parameters, so prediction needs nothing else. Floats are written in
//! shortest round-trip form and read back bit-exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::baselines::{LocalClassifier, TopDownModel};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::evaluation::{Algorithm, Trained};
use crate::model::PathModel;
use crate::taxonomy::{PathTable, Taxonomy};

const FORMAT: &str = "pathcost-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Params {
    log_prior: Vec<f64>,
    /// One row per class, over the vocabulary.
    log_word: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct LocalEntry {
    node: String,
    children: Vec<String>,
    #[serde(flatten)]
    params: Params,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Body {
    Path {
        paths: Vec<Vec<String>>,
        #[serde(flatten)]
        params: Params,
    },
    TopDown {
        locals: Vec<LocalEntry>,
    },
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    algorithm: Algorithm,
    hierarchy: Vec<(String, String)>,
    vocabulary: Vec<String>,
    #[serde(flatten)]
    body: Body,
}

/// Everything needed to apply a saved model.
#[derive(Clone, Debug)]
pub struct SavedModel {
    pub algorithm: Algorithm,
    /// Depth-normalized hierarchy the model was trained on.
    pub taxonomy: Taxonomy,
    pub paths: PathTable,
    pub vocabulary: Vocabulary,
    pub model: Trained,
}

fn params(m: &PathModel) -> Params {
    Params {
        log_prior: m.log_prior().to_vec(),
        log_word: (0..m.num_paths()).map(|j| m.log_word_row(j)).collect(),
    }
}

pub fn save_model<W: Write>(
    mut w: W,
    algorithm: Algorithm,
    model: &Trained,
    vocabulary: &Vocabulary,
    t: &Taxonomy,
    paths: &PathTable,
) -> Result<()> {
    if model.vocab_size() != vocabulary.len() {
        return Err(Error::Dimension(format!(
            "model covers {} words, vocabulary has {}",
            model.vocab_size(),
            vocabulary.len()
        )));
    }
    let body = match model {
        Trained::Path(m) => Body::Path {
            paths: (0..paths.len())
                .map(|j| paths.names(t, j).into_iter().map(String::from).collect())
                .collect(),
            params: params(m),
        },
        Trained::TopDown(m) => Body::TopDown {
            locals: m
                .locals()
                .map(|l| LocalEntry {
                    node: t.name(l.node).to_string(),
                    children: l.children.iter().map(|&c| t.name(c).to_string()).collect(),
                    params: params(&l.model),
                })
                .collect(),
        },
    };
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        algorithm,
        hierarchy: t.edges(),
        vocabulary: vocabulary.words().to_vec(),
        body,
    };
    serde_json::to_writer(&mut w, &file)?;
    writeln!(w)?;
    Ok(())
}

pub fn load_model<R: Read>(r: R) -> Result<SavedModel> {
    let file: ModelFile = serde_json::from_reader(r)?;
    if file.format != FORMAT {
        return Err(Error::ModelFormat(format!("not a model file (format {:?})", file.format)));
    }
    if file.version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {}", file.version)));
    }
    let taxonomy = Taxonomy::from_edges(&file.hierarchy)?.normalize_depth();
    let paths = PathTable::new(&taxonomy)?;
    let vocabulary = Vocabulary::from_words(file.vocabulary);
    let build = |p: Params| -> Result<PathModel> {
        let m = PathModel::from_log_parts(p.log_prior, p.log_word)?;
        if m.vocab_size() != vocabulary.len() && m.num_paths() > 0 {
            return Err(Error::ModelFormat("word rows do not match the vocabulary".into()));
        }
        Ok(m)
    };
    let model = match file.body {
        Body::Path { paths: names, params } => {
            let expected: Vec<Vec<&str>> = (0..paths.len()).map(|j| paths.names(&taxonomy, j)).collect();
            if names != expected {
                return Err(Error::ModelFormat("path list does not match the hierarchy".into()));
            }
            Trained::Path(build(params)?)
        }
        Body::TopDown { locals } => {
            let id = |n: &str| taxonomy.id(n).ok_or_else(|| Error::UnknownNode(n.to_string()));
            let locals = locals
                .into_iter()
                .map(|l| {
                    let node = id(&l.node)?;
                    let children = l.children.iter().map(|c| id(c)).collect::<Result<Vec<_>>>()?;
                    if children != taxonomy.node(node).children {
                        return Err(Error::ModelFormat(format!("children of `{}` do not match", l.node)));
                    }
                    Ok(LocalClassifier {
                        node,
                        children,
                        model: build(l.params)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Trained::TopDown(TopDownModel::from_locals(&taxonomy, locals, vocabulary.len())?)
        }
    };
    Ok(SavedModel {
        algorithm: file.algorithm,
        taxonomy,
        paths,
        vocabulary,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{train_topdown_nb, Routing};
    use crate::evaluation::{random_model, synthetic_dataset, train};
    use crate::model::EmConfig;

    fn setup() -> (Taxonomy, PathTable, crate::corpus::Dataset) {
        let t = Taxonomy::from_edges(&[("ROOT", "a"), ("ROOT", "b"), ("a", "a1"), ("a", "a2"), ("b", "b1")])
            .unwrap()
            .normalize_depth();
        let p = PathTable::new(&t).unwrap();
        let m = random_model(p.len(), 25, 0.5, 1).unwrap();
        let d = synthetic_dataset(&t, &p, &m, (80, 10), (10, 30), 2).unwrap();
        (t, p, d)
    }

    #[test]
    fn path_model_round_trips_exactly() {
        let (t, p, d) = setup();
        let f = train(Algorithm::Pcem, &d, &t, &p, &EmConfig::default(), Routing::Soft).unwrap();
        let mut buf = Vec::new();
        save_model(&mut buf, Algorithm::Pcem, &f.model, &d.vocabulary, &t, &p).unwrap();
        let back = load_model(buf.as_slice()).unwrap();
        assert_eq!(back.model, f.model);
        assert_eq!(back.algorithm, Algorithm::Pcem);
        assert_eq!(back.vocabulary, d.vocabulary);
        assert_eq!(back.paths.paths(), p.paths());
        let mut again = Vec::new();
        save_model(&mut again, back.algorithm, &back.model, &back.vocabulary, &back.taxonomy, &back.paths).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn top_down_model_round_trips_exactly() {
        let (t, p, d) = setup();
        let m = Trained::TopDown(train_topdown_nb(&d, &t).unwrap());
        let mut buf = Vec::new();
        save_model(&mut buf, Algorithm::TdNb, &m, &d.vocabulary, &t, &p).unwrap();
        let back = load_model(buf.as_slice()).unwrap();
        assert_eq!(back.model, m);
    }

    #[test]
    fn rejects_foreign_and_future_files() {
        assert!(load_model(&b"{}"[..]).is_err());
        let (t, p, d) = setup();
        let f = train(Algorithm::Pcnb, &d, &t, &p, &EmConfig::default(), Routing::Soft).unwrap();
        let mut buf = Vec::new();
        save_model(&mut buf, Algorithm::Pcnb, &f.model, &d.vocabulary, &t, &p).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"version\":1", "\"version\":2");
        assert!(matches!(load_model(text.as_bytes()), Err(Error::ModelFormat(_))));
    }
}
