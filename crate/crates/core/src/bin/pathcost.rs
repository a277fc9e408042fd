use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pathcost::baselines::Routing;
use pathcost::corpus::{load_corpus, write_documents, CorpusReader, Record};
use pathcost::evaluation::{
    evaluate, macro_f1, micro_f1, random_model, run_experiment, synthetic_dataset, train,
    Algorithm, ExperimentConfig,
};
use pathcost::model::EmConfig;
use pathcost::persist::{load_model, save_model};
use pathcost::taxonomy::{PathTable, Taxonomy};

/// Path cost-sensitive naive Bayes and EM for hierarchical text
/// classification.
#[derive(Parser)]
#[command(name = "pathcost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on a training file and save it as JSON.
    Train {
        #[command(flatten)]
        input: TrainInput,
        #[arg(long, default_value = "pcem", value_parser = parse_algo)]
        algo: Algorithm,
        #[command(flatten)]
        em: EmArgs,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print `doc_id<TAB>class,class,...` predictions for a document file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        sims: Option<PathBuf>,
        /// Write predictions here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model on a labeled test file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        sims: Option<PathBuf>,
        /// Also print per-class precision, recall and F1.
        #[arg(long)]
        per_class: bool,
    },
    /// Label-rate sweep over algorithms and seeds with CSV output.
    Sweep {
        #[command(flatten)]
        input: TrainInput,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "pcnb,pcem,flat-nb,flat-em,td-nb,td-em", value_parser = parse_algo)]
        algo: Vec<Algorithm>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.2,0.5,1")]
        rates: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[command(flatten)]
        em: EmArgs,
        /// Directory for runs.csv, aggregate.csv, per_class.csv and metadata.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a labeled corpus from a random model over a hierarchy.
    Synth {
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long, default_value_t = 1000)]
        docs: usize,
        #[arg(long, default_value_t = 200)]
        test_docs: usize,
        #[arg(long, default_value_t = 500)]
        vocab: usize,
        #[arg(long, default_value_t = 20)]
        min_len: u32,
        #[arg(long, default_value_t = 100)]
        max_len: u32,
        /// Dirichlet concentration of the word distributions.
        #[arg(long, default_value_t = 0.1)]
        concentration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for train.txt and test.txt.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainInput {
    #[arg(long)]
    hierarchy: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    sims: Option<PathBuf>,
}

#[derive(Args)]
struct EmArgs {
    #[arg(long, default_value_t = EmConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = EmConfig::default().rel_tol)]
    tol: f64,
    #[arg(long, default_value_t = EmConfig::default().min_iters)]
    min_iters: usize,
    /// Route unlabeled documents in top-down EM by the greedy path only.
    #[arg(long)]
    hard_routing: bool,
}

impl EmArgs {
    fn config(&self) -> EmConfig {
        EmConfig {
            max_iters: self.max_iters,
            rel_tol: self.tol,
            min_iters: self.min_iters,
        }
    }

    fn routing(&self) -> Routing {
        if self.hard_routing {
            Routing::Hard
        } else {
            Routing::Soft
        }
    }
}

fn parse_algo(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: pathcost::Error| e.to_string())
}

fn load_hierarchy(path: &Path) -> Result<(Taxonomy, PathTable)> {
    let t = Taxonomy::read(path)
        .with_context(|| format!("reading hierarchy {}", path.display()))?
        .normalize_depth();
    let paths = PathTable::new(&t)?;
    Ok((t, paths))
}

fn read_with_model(
    model: &pathcost::persist::SavedModel,
    test: &Path,
    sims: Option<&Path>,
) -> Result<Vec<Record>> {
    let mut reader = CorpusReader::with_vocabulary(&model.taxonomy, model.vocabulary.clone());
    if let Some(s) = sims {
        reader.read_similarities(s)?;
    }
    reader
        .read_documents(test)
        .with_context(|| format!("reading {}", test.display()))
}

fn open_model(path: &Path) -> Result<pathcost::persist::SavedModel> {
    let f = File::open(path).with_context(|| format!("opening model {}", path.display()))?;
    load_model(io::BufReader::new(f)).with_context(|| format!("loading model {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { input, algo, em, out } => {
            let (t, paths) = load_hierarchy(&input.hierarchy)?;
            let data = load_corpus(&t, &input.train, None, input.sims.as_deref())?;
            let fitted = train(algo, &data, &t, &paths, &em.config(), em.routing())?;
            let w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            save_model(w, algo, &fitted.model, &data.vocabulary, &t, &paths)?;
            eprintln!(
                "{algo}: {} labeled, {} unlabeled, {} iterations{}",
                data.labeled.len(),
                data.unlabeled.len(),
                fitted.iterations,
                if fitted.converged { "" } else { " (not converged)" }
            );
        }
        Command::Predict { model, test, sims, out } => {
            let m = open_model(&model)?;
            let records = read_with_model(&m, &test, sims.as_deref())?;
            let mut w: Box<dyn Write> = match &out {
                Some(p) => Box::new(BufWriter::new(File::create(p)?)),
                None => Box::new(BufWriter::new(io::stdout().lock())),
            };
            for r in &records {
                let nodes = m.model.predict(&r.doc, &m.taxonomy, &m.paths)?;
                let names: Vec<&str> = nodes
                    .iter()
                    .filter(|&&n| !m.taxonomy.node(n).is_dummy)
                    .map(|&n| m.taxonomy.name(n))
                    .collect();
                writeln!(w, "{}\t{}", r.doc.id, names.join(","))?;
            }
            w.flush()?;
        }
        Command::Eval { model, test, sims, per_class } => {
            let m = open_model(&model)?;
            let records = read_with_model(&m, &test, sims.as_deref())?;
            let counts = evaluate(&m.model, &records, &m.taxonomy, &m.paths)?;
            println!("micro_f1\t{}", micro_f1(&counts)?);
            println!("macro_f1\t{}", macro_f1(&counts)?);
            if per_class {
                println!("class\tprecision\trecall\tf1");
                for s in counts.per_class() {
                    println!("{}\t{}\t{}\t{}", m.taxonomy.name(s.class), s.precision, s.recall, s.f1);
                }
            }
        }
        Command::Sweep { input, test, algo, rates, seeds, em, out } => {
            let cfg = ExperimentConfig {
                hierarchy: input.hierarchy,
                train: input.train,
                test,
                similarities: input.sims,
                algorithms: algo,
                rates,
                seeds,
                em: em.config(),
                routing: em.routing(),
                out,
            };
            let reports = run_experiment(&cfg)?;
            println!("algorithm\trate\tmicro_f1\tmacro_f1\titers");
            for r in &reports {
                println!(
                    "{}\t{}\t{:.4}\t{:.4}\t{}",
                    r.algorithm, r.rate, r.micro_f1, r.macro_f1, r.iterations
                );
            }
        }
        Command::Synth {
            hierarchy,
            docs,
            test_docs,
            vocab,
            min_len,
            max_len,
            concentration,
            seed,
            out,
        } => {
            if docs == 0 {
                bail!("--docs must be positive");
            }
            let (t, paths) = load_hierarchy(&hierarchy)?;
            let model = random_model(paths.len(), vocab, concentration, seed)?;
            let mut data = synthetic_dataset(
                &t,
                &paths,
                &model,
                (docs, test_docs),
                (min_len, max_len),
                seed.wrapping_add(1),
            )?;
            fs::create_dir_all(&out)?;
            let train: Vec<Record> = data.labeled.drain(..).map(Record::from).collect();
            for (name, records) in [("train.txt", &train), ("test.txt", &data.test)] {
                let w = BufWriter::new(File::create(out.join(name))?);
                write_documents(w, records, &data.vocabulary, &t)?;
            }
            eprintln!("wrote {docs} training and {test_docs} test documents to {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
