use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{macro_f1, micro_f1, ConfusionCounts};
use crate::baselines::{
    predict_topdown, train_flat_em, train_flat_nb, train_topdown_em, train_topdown_nb, Routing,
    TopDownConfig, TopDownModel,
};
use crate::corpus::{load_corpus, Dataset, Document, Record};
use crate::error::{Error, Result};
use crate::model::{train_pcem, train_pcnb, EmConfig, PathModel};
use crate::taxonomy::{NodeId, PathTable, Taxonomy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pcnb,
    Pcem,
    FlatNb,
    FlatEm,
    TdNb,
    TdEm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Pcnb,
        Algorithm::Pcem,
        Algorithm::FlatNb,
        Algorithm::FlatEm,
        Algorithm::TdNb,
        Algorithm::TdEm,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Pcnb => "pcnb",
            Algorithm::Pcem => "pcem",
            Algorithm::FlatNb => "flat-nb",
            Algorithm::FlatEm => "flat-em",
            Algorithm::TdNb => "td-nb",
            Algorithm::TdEm => "td-em",
        }
    }

    pub fn is_top_down(self) -> bool {
        matches!(self, Algorithm::TdNb | Algorithm::TdEm)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| {
                let ids: Vec<_> = Algorithm::ALL.iter().map(|a| a.id()).collect();
                Error::Config(format!("unknown algorithm {s:?}; expected one of {}", ids.join(", ")))
            })
    }
}

/// A trained classifier of either shape.
#[derive(Clone, Debug, PartialEq)]
pub enum Trained {
    Path(PathModel),
    TopDown(TopDownModel),
}

impl Trained {
    /// Predicted classes, root excluded. Path models report every node of
    /// the winning path except dummies.
    pub fn predict(&self, doc: &Document, t: &Taxonomy, paths: &PathTable) -> Result<Vec<NodeId>> {
        match self {
            Trained::Path(m) => Ok(paths.labels(t, m.predict(doc)?)),
            Trained::TopDown(m) => predict_topdown(doc, m, t),
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            Trained::Path(m) => m.vocab_size(),
            Trained::TopDown(m) => m.vocab_size(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fitted {
    pub model: Trained,
    /// EM iterations; 0 for the naive Bayes variants.
    pub iterations: usize,
    pub converged: bool,
}

pub fn train(
    algorithm: Algorithm,
    data: &Dataset,
    t: &Taxonomy,
    paths: &PathTable,
    em: &EmConfig,
    routing: Routing,
) -> Result<Fitted> {
    let plain = |model| Fitted {
        model,
        iterations: 0,
        converged: true,
    };
    Ok(match algorithm {
        Algorithm::Pcnb => plain(Trained::Path(train_pcnb(data, t, paths)?)),
        Algorithm::FlatNb => plain(Trained::Path(train_flat_nb(data, t, paths)?)),
        Algorithm::TdNb => plain(Trained::TopDown(train_topdown_nb(data, t)?)),
        Algorithm::Pcem | Algorithm::FlatEm => {
            let (m, trace) = if algorithm == Algorithm::Pcem {
                train_pcem(data, t, paths, em)?
            } else {
                train_flat_em(data, t, paths, em)?
            };
            Fitted {
                model: Trained::Path(m),
                iterations: trace.iterations(),
                converged: trace.converged,
            }
        }
        Algorithm::TdEm => {
            let cfg = TopDownConfig {
                em: em.clone(),
                routing,
            };
            let (m, trace) = train_topdown_em(data, t, &cfg)?;
            Fitted {
                model: Trained::TopDown(m),
                iterations: trace.iterations(),
                converged: trace.converged,
            }
        }
    })
}

/// Confusion counts of `model` over labeled test records. Weak test labels
/// are resolved to their per-depth argmax classes.
pub fn evaluate(
    model: &Trained,
    test: &[Record],
    t: &Taxonomy,
    paths: &PathTable,
) -> Result<ConfusionCounts> {
    if test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts = ConfusionCounts::new(t);
    for r in test {
        let gold = r
            .label
            .as_ref()
            .ok_or_else(|| Error::Config(format!("test document {} has no label", r.doc.id)))?
            .nodes(t)?;
        counts.add(gold.nodes(), &model.predict(&r.doc, t, paths)?);
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub rate: f64,
    pub seed: u64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Results of one algorithm at one label rate across seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub algorithm: Algorithm,
    pub rate: f64,
    pub runs: Vec<RunResult>,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub iterations: f64,
    /// Per-class scores averaged over seeds.
    pub per_class: Vec<ClassSummary>,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    xs.sum::<f64>() / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub hierarchy: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub similarities: Option<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub em: EmConfig,
    pub routing: Routing,
    /// Output directory for `runs.csv`, `aggregate.csv`, `per_class.csv`
    /// and `metadata.json`.
    pub out: Option<PathBuf>,
}

/// Runs every algorithm, rate and seed on one dataset. Each seed draws its
/// own labeled subset; all algorithms share it.
#[allow(clippy::too_many_arguments)]
pub fn run_on_dataset(
    data: &Dataset,
    t: &Taxonomy,
    paths: &PathTable,
    algorithms: &[Algorithm],
    rates: &[f64],
    seeds: &[u64],
    em: &EmConfig,
    routing: Routing,
) -> Result<Vec<EvalReport>> {
    if algorithms.is_empty() || rates.is_empty() || seeds.is_empty() {
        return Err(Error::Config("need at least one algorithm, rate and seed".into()));
    }
    if let Some(&r) = rates.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidRate(r));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("seeds must be distinct".into()));
    }
    em.validate()?;
    let mut reports = Vec::new();
    for &rate in rates {
        let mut cells: Vec<(Vec<RunResult>, Vec<ConfusionCounts>)> =
            vec![(Vec::new(), Vec::new()); algorithms.len()];
        for &seed in seeds {
            let wrap = |e: Error| Error::Run {
                rate,
                seed,
                source: Box::new(e),
            };
            let split = data.split_by_label_rate(rate, seed).map_err(wrap)?;
            for (cell, &algorithm) in cells.iter_mut().zip(algorithms) {
                let start = Instant::now();
                let fitted = train(algorithm, &split, t, paths, em, routing).map_err(wrap)?;
                let seconds = start.elapsed().as_secs_f64();
                let counts = evaluate(&fitted.model, &split.test, t, paths).map_err(wrap)?;
                cell.0.push(RunResult {
                    algorithm,
                    rate,
                    seed,
                    micro_f1: micro_f1(&counts).map_err(wrap)?,
                    macro_f1: macro_f1(&counts).map_err(wrap)?,
                    iterations: fitted.iterations,
                    seconds,
                });
                cell.1.push(counts);
            }
        }
        for ((runs, counts), &algorithm) in cells.into_iter().zip(algorithms) {
            let per_seed: Vec<_> = counts.iter().map(|c| c.per_class()).collect();
            let per_class = counts[0]
                .classes()
                .iter()
                .enumerate()
                .map(|(i, &c)| ClassSummary {
                    class: t.name(c).to_string(),
                    precision: mean(per_seed.iter().map(|s| s[i].precision)),
                    recall: mean(per_seed.iter().map(|s| s[i].recall)),
                    f1: mean(per_seed.iter().map(|s| s[i].f1)),
                })
                .collect();
            reports.push(EvalReport {
                algorithm,
                rate,
                micro_f1: mean(runs.iter().map(|r| r.micro_f1)),
                macro_f1: mean(runs.iter().map(|r| r.macro_f1)),
                iterations: mean(runs.iter().map(|r| r.iterations as f64)),
                runs,
                per_class,
            });
        }
    }
    Ok(reports)
}

/// Loads the files named in `cfg`, runs the sweep and, if `cfg.out` is set,
/// writes the result files there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<EvalReport>> {
    let t = Taxonomy::read(&cfg.hierarchy)?.normalize_depth();
    let paths = PathTable::new(&t)?;
    let data = load_corpus(&t, &cfg.train, Some(&cfg.test), cfg.similarities.as_deref())?;
    let reports = run_on_dataset(
        &data,
        &t,
        &paths,
        &cfg.algorithms,
        &cfg.rates,
        &cfg.seeds,
        &cfg.em,
        cfg.routing,
    )?;
    if let Some(dir) = &cfg.out {
        write_reports(dir, cfg, &reports)?;
    }
    Ok(reports)
}

/// `runs.csv` has one row per run including wall-clock seconds.
/// `aggregate.csv` and `per_class.csv` hold seed means only, so they are
/// identical across reruns.
pub fn write_reports(dir: &Path, cfg: &ExperimentConfig, reports: &[EvalReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut runs = fs::File::create(dir.join("runs.csv"))?;
    writeln!(runs, "algorithm,rate,seed,micro_f1,macro_f1,iters,seconds")?;
    let mut agg = fs::File::create(dir.join("aggregate.csv"))?;
    writeln!(agg, "algorithm,rate,seeds,micro_f1,macro_f1,iters")?;
    let mut classes = fs::File::create(dir.join("per_class.csv"))?;
    writeln!(classes, "algorithm,rate,class,precision,recall,f1")?;
    for r in reports {
        for run in &r.runs {
            writeln!(
                runs,
                "{},{},{},{},{},{},{}",
                run.algorithm, run.rate, run.seed, run.micro_f1, run.macro_f1, run.iterations, run.seconds
            )?;
        }
        writeln!(
            agg,
            "{},{},{},{},{},{}",
            r.algorithm,
            r.rate,
            r.runs.len(),
            r.micro_f1,
            r.macro_f1,
            r.iterations
        )?;
        for c in &r.per_class {
            writeln!(
                classes,
                "{},{},{},{},{},{}",
                r.algorithm, r.rate, c.class, c.precision, c.recall, c.f1
            )?;
        }
    }
    let meta = serde_json::json!({
        "config": cfg,
        "crate_version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}
