//! Sparse bag-of-words documents, their labels, and labeled/unlabeled/test
//! splits.
//!
//! Document files hold one document per line:
//!
//! ```text
//! doc_id<TAB>label_spec<TAB>word:count word:count ...
//! ```
//!
//! `label_spec` is `-` for an unlabeled document, a single node name (a leaf
//! name implies its full ancestor path), a comma-joined list of per-depth node
//! names, or a token starting with `@`, which defers to a similarity file of
//! `doc_id<TAB>depth<TAB>v1,v2,...` rows. Similarity vectors are indexed by
//! the non-dummy nodes of a depth in name-tuple order. An optional first line
//! `#vocab<TAB>w1 w2 ...` fixes the vocabulary order; other `#` lines are
//! comments.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::argmax;
use crate::taxonomy::{NodeId, Taxonomy};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self::new();
        for w in words {
            v.intern(&w.into());
        }
        v
    }

    /// Index of `word`, adding it if absent.
    pub fn intern(&mut self, word: &str) -> u32 {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let i = self.words.len() as u32;
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), i);
        i
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, i: u32) -> &str {
        &self.words[i as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A sparse word-count vector. Entries are sorted by word index and every
/// stored count is positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    counts: Vec<(u32, u32)>,
    length: u64,
}

impl Document {
    /// Duplicate word indices are merged; zero counts are dropped.
    pub fn new(id: impl Into<String>, counts: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut counts: Vec<(u32, u32)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        counts.sort_unstable_by_key(|&(w, _)| w);
        counts.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        let length = counts.iter().map(|&(_, c)| c as u64).sum();
        Document {
            id: id.into(),
            counts,
            length,
        }
    }

    pub fn counts(&self) -> &[(u32, u32)] {
        &self.counts
    }

    /// Total number of word occurrences.
    pub fn len(&self) -> u64 {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }
}

/// Per-depth class assignments of a document. Nodes are sorted by depth and
/// at most one node is given per depth; a prefix or any subset of depths may
/// be present.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldLabels {
    nodes: Vec<NodeId>,
}

impl GoldLabels {
    /// Unchecked per-depth choices. Weakly supervised choices need not form a
    /// path.
    pub fn new(nodes: Vec<NodeId>) -> Self {
        GoldLabels { nodes }
    }

    /// Labels read from a file: known, non-dummy nodes, one per depth, with
    /// consecutive depths related by the parent relation. A single original
    /// leaf expands to its full ancestor chain.
    pub fn checked(t: &Taxonomy, doc: &str, mut nodes: Vec<NodeId>) -> Result<Self> {
        let bad = |message: String| Error::InconsistentLabels {
            doc: doc.to_string(),
            message,
        };
        if let [single] = nodes.as_slice() {
            let n = t.node(*single);
            if n.children.iter().all(|&c| t.node(c).is_dummy) {
                nodes = t.chain(*single);
            }
        }
        nodes.sort_by_key(|&id| t.node(id).depth);
        for w in nodes.windows(2) {
            let (a, b) = (t.node(w[0]), t.node(w[1]));
            if a.depth == b.depth {
                return Err(bad(format!("`{}` and `{}` share depth {}", a.name, b.name, a.depth)));
            }
            if b.depth == a.depth + 1 && b.parent != Some(a.id) {
                return Err(bad(format!("`{}` is not a child of `{}`", b.name, a.name)));
            }
        }
        for &id in &nodes {
            if id == t.root() || t.node(id).is_dummy {
                return Err(bad(format!("`{}` is not a class", t.name(id))));
            }
        }
        Ok(GoldLabels { nodes })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Per-depth document-class similarity values, `by_depth[k - 1]` for depth
/// `k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeakSimilarities {
    by_depth: Vec<Option<Vec<f64>>>,
}

impl WeakSimilarities {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_levels(levels: Vec<Vec<f64>>) -> Self {
        WeakSimilarities {
            by_depth: levels.into_iter().map(Some).collect(),
        }
    }

    pub fn set(&mut self, depth: usize, values: Vec<f64>) {
        assert!(depth >= 1, "similarities start at depth 1");
        if self.by_depth.len() < depth {
            self.by_depth.resize(depth, None);
        }
        self.by_depth[depth - 1] = Some(values);
    }

    pub fn get(&self, depth: usize) -> Option<&[f64]> {
        self.by_depth
            .get(depth.checked_sub(1)?)
            .and_then(|v| v.as_deref())
    }

    pub fn max_depth(&self) -> usize {
        self.by_depth.len()
    }
}

/// The per-depth argmax node of the similarity vectors. Ties go to the
/// lowest index in the depth's name-tuple order. The choices are returned
/// per depth even when they do not form a path.
pub fn weak_label_nodes(sims: &WeakSimilarities, t: &Taxonomy) -> Result<GoldLabels> {
    let mut nodes = Vec::with_capacity(t.depth());
    for k in 1..=t.depth() {
        let values = sims.get(k).ok_or(Error::MissingDepth(k))?;
        let level = t.real_level(k);
        if values.len() != level.len() {
            return Err(Error::SimilarityLength {
                depth: k,
                found: values.len(),
                expected: level.len(),
            });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::NanSimilarity(k));
        }
        let best = argmax(values).ok_or(Error::MissingDepth(k))?;
        nodes.push(level[best]);
    }
    Ok(GoldLabels::new(nodes))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Gold(GoldLabels),
    Weak(WeakSimilarities),
}

impl Label {
    /// Per-depth node choices: the gold labels, or the weak argmaxes.
    pub fn nodes(&self, t: &Taxonomy) -> Result<GoldLabels> {
        match self {
            Label::Gold(g) => Ok(g.clone()),
            Label::Weak(s) => weak_label_nodes(s, t),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDocument {
    pub doc: Document,
    pub label: Label,
}

/// A document as read from a file, with whatever label it carried.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub doc: Document,
    pub label: Option<Label>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub vocabulary: Vocabulary,
    pub labeled: Vec<LabeledDocument>,
    pub unlabeled: Vec<Document>,
    pub test: Vec<Record>,
}

impl Dataset {
    /// Training records with a label go to the labeled partition, the rest
    /// to the unlabeled one.
    pub fn from_records(vocabulary: Vocabulary, train: Vec<Record>, test: Vec<Record>) -> Self {
        let mut labeled = Vec::new();
        let mut unlabeled = Vec::new();
        for r in train {
            match r.label {
                Some(label) => labeled.push(LabeledDocument { doc: r.doc, label }),
                None => unlabeled.push(r.doc),
            }
        }
        Dataset {
            vocabulary,
            labeled,
            unlabeled,
            test,
        }
    }

    pub fn train_len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    /// Keeps the labels of `round(rate * N)` randomly chosen labeled
    /// documents (half rounds up) and moves the rest into the unlabeled
    /// partition. Both partitions keep file order. Deterministic in `seed`.
    pub fn split_by_label_rate(&self, rate: f64, seed: u64) -> Result<Dataset> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidRate(rate));
        }
        let n = self.labeled.len();
        let keep = labeled_count(rate, n);
        if keep == 0 {
            return Err(Error::NoLabeledDocuments);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = vec![false; n];
        for i in rand::seq::index::sample(&mut rng, n, keep) {
            chosen[i] = true;
        }
        let mut labeled = Vec::with_capacity(keep);
        let mut unlabeled = self.unlabeled.clone();
        for (ld, keep) in self.labeled.iter().zip(chosen) {
            if keep {
                labeled.push(ld.clone());
            } else {
                unlabeled.push(ld.doc.clone());
            }
        }
        Ok(Dataset {
            vocabulary: self.vocabulary.clone(),
            labeled,
            unlabeled,
            test: self.test.clone(),
        })
    }
}

/// `round(rate * n)` with halves rounded up.
pub fn labeled_count(rate: f64, n: usize) -> usize {
    (rate * n as f64 + 0.5).floor() as usize
}

/// Reads document files against a taxonomy, growing or consulting a shared
/// vocabulary.
pub struct CorpusReader<'a> {
    taxonomy: &'a Taxonomy,
    vocabulary: Vocabulary,
    similarities: HashMap<String, WeakSimilarities>,
    grow: bool,
}

impl<'a> CorpusReader<'a> {
    pub fn new(taxonomy: &'a Taxonomy) -> Self {
        CorpusReader {
            taxonomy,
            vocabulary: Vocabulary::new(),
            similarities: HashMap::new(),
            grow: true,
        }
    }

    /// Reads with a fixed vocabulary; words outside it are dropped.
    pub fn with_vocabulary(taxonomy: &'a Taxonomy, vocabulary: Vocabulary) -> Self {
        CorpusReader {
            taxonomy,
            vocabulary,
            similarities: HashMap::new(),
            grow: false,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn into_vocabulary(self) -> Vocabulary {
        self.vocabulary
    }

    pub fn read_similarities(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [doc, depth, values] = fields.as_slice() else {
                return Err(err("expected `doc_id<TAB>depth<TAB>v1,v2,...`".into()));
            };
            let depth: usize = depth
                .parse()
                .map_err(|_| err(format!("bad depth `{depth}`")))?;
            if depth == 0 || depth > self.taxonomy.depth() {
                return Err(err(format!("depth {depth} outside 1..={}", self.taxonomy.depth())));
            }
            let values = values
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| err(format!("bad similarity value: {e}")))?;
            let expected = self.taxonomy.real_level(depth).len();
            if values.len() != expected {
                return Err(err(format!(
                    "{} similarity values at depth {depth}, expected {expected}",
                    values.len()
                )));
            }
            self.similarities
                .entry(doc.to_string())
                .or_default()
                .set(depth, values);
        }
        Ok(())
    }

    pub fn read_documents(&mut self, path: impl AsRef<Path>) -> Result<Vec<Record>> {
        let path = path.as_ref().to_path_buf();
        let reader = BufReader::new(File::open(&path)?);
        let mut out = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if lineno == 0 {
                if let Some(words) = line.strip_prefix("#vocab\t") {
                    if self.grow {
                        for w in words.split_whitespace() {
                            self.vocabulary.intern(w);
                        }
                    }
                    continue;
                }
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            out.push(self.parse_line(&path, lineno + 1, line)?);
        }
        Ok(out)
    }

    fn parse_line(&mut self, path: &Path, line: usize, text: &str) -> Result<Record> {
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut fields = text.splitn(3, '\t');
        let id = fields.next().filter(|s| !s.is_empty()).ok_or_else(|| err("missing document id".into()))?;
        let spec = fields.next().ok_or_else(|| err("missing label field".into()))?;
        let words = fields.next().unwrap_or("");

        let mut counts = Vec::new();
        for tok in words.split_whitespace() {
            let (w, c) = tok
                .rsplit_once(':')
                .ok_or_else(|| err(format!("expected `word:count`, found `{tok}`")))?;
            if c.starts_with('-') {
                return Err(err(format!("negative count in `{tok}`")));
            }
            let c: u32 = c.parse().map_err(|_| err(format!("bad count in `{tok}`")))?;
            let idx = if self.grow {
                Some(self.vocabulary.intern(w))
            } else {
                self.vocabulary.get(w)
            };
            if let Some(idx) = idx {
                counts.push((idx, c));
            }
        }
        let doc = Document::new(id, counts);
        let label = self.parse_label(id, spec).map_err(|e| match e {
            Error::UnknownLabel { .. } | Error::InconsistentLabels { .. } => e,
            other => err(other.to_string()),
        })?;
        Ok(Record { doc, label })
    }

    fn parse_label(&self, doc: &str, spec: &str) -> Result<Option<Label>> {
        let spec = spec.trim();
        if spec == "-" || spec.is_empty() {
            return Ok(None);
        }
        if spec.starts_with('@') {
            let sims = self
                .similarities
                .get(doc)
                .ok_or_else(|| Error::Config(format!("no similarities for document `{doc}`")))?;
            return Ok(Some(Label::Weak(sims.clone())));
        }
        let nodes = spec
            .split(',')
            .map(|name| {
                self.taxonomy.id(name.trim()).ok_or_else(|| Error::UnknownLabel {
                    doc: doc.to_string(),
                    label: name.trim().to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(Label::Gold(GoldLabels::checked(self.taxonomy, doc, nodes)?)))
    }
}

/// Loads a training file (and optional test and similarity files) into a
/// dataset sharing one vocabulary built from all files read.
pub fn load_corpus(
    taxonomy: &Taxonomy,
    train: impl AsRef<Path>,
    test: Option<&Path>,
    similarities: Option<&Path>,
) -> Result<Dataset> {
    let mut reader = CorpusReader::new(taxonomy);
    if let Some(s) = similarities {
        reader.read_similarities(s)?;
    }
    let train = reader.read_documents(train)?;
    let test = match test {
        Some(p) => reader.read_documents(p)?,
        None => Vec::new(),
    };
    Ok(Dataset::from_records(reader.into_vocabulary(), train, test))
}

/// Writes records in the document-file format. Weak labels are written as
/// `@sims`; use [`write_similarities`] for their values.
pub fn write_documents<W: Write>(
    mut w: W,
    records: &[Record],
    vocabulary: &Vocabulary,
    t: &Taxonomy,
) -> Result<()> {
    writeln!(w, "#vocab\t{}", vocabulary.words().join(" "))?;
    for r in records {
        let spec = match &r.label {
            None => "-".to_string(),
            Some(Label::Weak(_)) => "@sims".to_string(),
            Some(Label::Gold(g)) if g.is_empty() => "-".to_string(),
            Some(Label::Gold(g)) => g
                .nodes()
                .iter()
                .map(|&id| t.name(id))
                .collect::<Vec<_>>()
                .join(","),
        };
        let words: Vec<String> = r
            .doc
            .counts()
            .iter()
            .map(|&(i, c)| format!("{}:{}", vocabulary.word(i), c))
            .collect();
        writeln!(w, "{}\t{}\t{}", r.doc.id, spec, words.join(" "))?;
    }
    Ok(())
}

pub fn write_similarities<W: Write>(mut w: W, records: &[Record]) -> Result<()> {
    for r in records {
        if let Some(Label::Weak(s)) = &r.label {
            for k in 1..=s.max_depth() {
                if let Some(v) = s.get(k) {
                    let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    writeln!(w, "{}\t{}\t{}", r.doc.id, k, vals.join(","))?;
                }
            }
        }
    }
    Ok(())
}

impl From<LabeledDocument> for Record {
    fn from(ld: LabeledDocument) -> Self {
        Record {
            doc: ld.doc,
            label: Some(ld.label),
        }
    }
}
