//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error (missing or malformed inputs), 3 failed oracle check.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{
    above_threshold, evaluate, induce_structure, score_corpus, train, Checkpoint, HarnessError, RunConfig, TrainFacts,
};
use crate::docmodel::{
    convert_docred, generate_synthetic_corpus, load_corpus, write_corpus, Corpus, GeneratorSpec, PlanMode,
};
use crate::induction::compare_with_oracle;
use crate::reasoner::StructureMode;

#[derive(Debug, Parser)]
#[command(name = "lsr", about = "Latent structure refinement for document-level relation extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Node plan: with-mdp or full-tokens.
    #[arg(long, global = true)]
    mode: Option<PlanMode>,
    /// Number of refinement blocks.
    #[arg(long, global = true)]
    blocks: Option<usize>,
    /// Main output file of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes a checkpoint, a JSON-lines log and a report.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// induced or uniform.
        #[arg(long)]
        structure: Option<StructureMode>,
        #[arg(long)]
        log: Option<PathBuf>,
        /// Best-epoch dev metrics report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a corpus and write a metrics report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Training corpus for the Ign scores (defaults to the one recorded in the checkpoint).
        #[arg(long)]
        train_corpus: Option<PathBuf>,
        /// Overrides the threshold stored in the checkpoint.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Score every ordered entity pair and relation as JSON lines.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Keep only scores at or above this value.
        #[arg(long)]
        min_score: Option<f64>,
    },
    /// Dump the induced structures of one document as JSON.
    InduceStructure {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Defaults to the first document.
        #[arg(long)]
        doc_id: Option<String>,
    },
    /// Generate a synthetic corpus.
    GenSynthetic {
        /// JSON generator spec; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        documents: Option<usize>,
        #[arg(long)]
        relations: Option<usize>,
        #[arg(long)]
        bridge_prob: Option<f64>,
    },
    /// Convert DocRED JSON plus a dependency-head sidecar.
    ConvertDocred {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        heads: PathBuf,
        /// JSON object mapping relation names to ids.
        #[arg(long)]
        rel2id: Option<PathBuf>,
        /// Where to write the relation table that was used.
        #[arg(long)]
        rel2id_out: Option<PathBuf>,
    },
    /// Compare Matrix-Tree marginals against enumeration on random scores.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, HarnessError> {
    value
        .as_deref()
        .ok_or_else(|| HarnessError::Usage(format!("{what} is required")))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(HarnessError::io(path))
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn with_extension(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run_config(g: &GlobalArgs) -> Result<RunConfig, HarnessError> {
    let mut config = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        config.seed = s;
    }
    if let Some(m) = g.mode {
        config.mode = m;
    }
    if let Some(b) = g.blocks {
        config.blocks = b;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<i32, HarnessError> {
    let g = &cli.global;
    match cli.command {
        Command::Train {
            train: train_path,
            dev,
            epochs,
            structure,
            log,
            report,
        } => {
            let mut config = run_config(g)?;
            config.train = train_path.or(config.train);
            config.dev = dev.or(config.dev);
            config.epochs = epochs.unwrap_or(config.epochs);
            config.structure = structure.unwrap_or(config.structure);
            config.log = log.or(config.log);
            config.report = report.or(config.report);
            config.checkpoint = g.out.clone().or(config.checkpoint);
            config.validate()?;
            let train_corpus = load_corpus(required(&config.train, "a training corpus (--train)")?)?;
            let dev_corpus = load_corpus(required(&config.dev, "a dev corpus (--dev)")?)?;
            let ckpt_path = config.checkpoint.clone().unwrap_or_else(|| PathBuf::from("lsr.ckpt"));
            let log_path = config.log.clone().unwrap_or_else(|| with_extension(&ckpt_path, ".log.jsonl"));
            let mut log_file = fs::File::create(&log_path).map_err(HarnessError::io(&log_path))?;
            let mut log_err = None;
            let outcome = train(&config, &train_corpus, &dev_corpus, |r| {
                let line = serde_json::to_string(r).expect("records serialize");
                if let Err(e) = writeln!(log_file, "{line}") {
                    log_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = log_err {
                return Err(HarnessError::io(&log_path)(e));
            }
            outcome.best.save(&ckpt_path)?;
            let report = serde_json::to_string_pretty(&outcome.best_metrics).expect("report serializes");
            if let Some(p) = &config.report {
                write_text(p, &report)?;
            }
            println!("{report}");
            if outcome.skipped_singular > 0 {
                eprintln!("skipped {} documents with singular structures", outcome.skipped_singular);
            }
            Ok(0)
        }
        Command::Eval {
            checkpoint,
            corpus,
            train_corpus,
            threshold,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let model = ckpt.to_model()?;
            let corpus = load_corpus(&corpus)?;
            let train_facts = match train_corpus.or_else(|| ckpt.config.train.clone()) {
                Some(p) => TrainFacts::from_corpus(&load_corpus(&p)?),
                None => TrainFacts::default(),
            };
            let theta = threshold.unwrap_or(ckpt.threshold);
            let scores = score_corpus(&model, &corpus)?;
            let report = evaluate(&above_threshold(&scores, theta), &corpus, &train_facts, theta);
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(p) = &g.out {
                write_text(p, &text)?;
            }
            println!("{text}");
            Ok(0)
        }
        Command::Predict {
            checkpoint,
            corpus,
            min_score,
        } => {
            let model = Checkpoint::load(&checkpoint)?.to_model()?;
            let corpus = load_corpus(&corpus)?;
            let scores = score_corpus(&model, &corpus)?;
            let mut text = String::new();
            for s in scores.iter().filter(|s| min_score.is_none_or(|m| s.score >= m)) {
                text.push_str(&serde_json::to_string(s).expect("facts serialize"));
                text.push('\n');
            }
            match &g.out {
                Some(p) => write_text(p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::InduceStructure {
            checkpoint,
            corpus,
            doc_id,
        } => {
            let model = Checkpoint::load(&checkpoint)?.to_model()?;
            let corpus = load_corpus(&corpus)?;
            let doc = match &doc_id {
                Some(id) => corpus.documents.iter().find(|d| &d.doc_id == id),
                None => corpus.documents.first(),
            }
            .ok_or_else(|| HarnessError::EmptyInput("requested document not found"))?;
            let dump = induce_structure(&model, doc)?;
            let text = serde_json::to_string_pretty(&dump).expect("dump serializes");
            match &g.out {
                Some(p) => write_text(p, &text)?,
                None => println!("{text}"),
            }
            Ok(0)
        }
        Command::GenSynthetic {
            spec,
            documents,
            relations,
            bridge_prob,
        } => {
            let mut s: GeneratorSpec = match &spec {
                Some(p) => read_json(p)?,
                None => GeneratorSpec::default(),
            };
            s.documents = documents.unwrap_or(s.documents);
            s.relations = relations.unwrap_or(s.relations);
            s.bridge_prob = bridge_prob.unwrap_or(s.bridge_prob);
            let out = required(&g.out, "--out")?;
            let corpus = generate_synthetic_corpus(&s, g.seed.unwrap_or(1))
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            write_corpus(out, &corpus)?;
            eprintln!("wrote {} documents to {}", corpus.len(), out.display());
            Ok(0)
        }
        Command::ConvertDocred {
            input,
            heads,
            rel2id,
            rel2id_out,
        } => {
            let out = required(&g.out, "--out")?;
            let docred = fs::read_to_string(&input).map_err(HarnessError::io(&input))?;
            let heads_text = fs::read_to_string(&heads).map_err(HarnessError::io(&heads))?;
            let table: Option<BTreeMap<String, usize>> = rel2id.as_deref().map(read_json).transpose()?;
            let converted = convert_docred(&docred, &heads_text, table)?;
            write_corpus(out, &converted.corpus)?;
            if let Some(p) = &rel2id_out {
                write_text(p, &serde_json::to_string_pretty(&converted.relations).expect("table serializes"))?;
            }
            eprintln!("converted {} documents", Corpus::len(&converted.corpus));
            Ok(0)
        }
        Command::OracleCheck { trials, tolerance } => {
            let report = compare_with_oracle(g.seed.unwrap_or(1), trials, &[2, 3, 4, 5, 6])
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            println!("max marginal deviation: {:.3e}", report.max_marginal_diff());
            println!("max normalization error: {:.3e}", report.max_normalization_error);
            println!("instances: {}", report.instances);
            let ok = report.max_marginal_diff() < tolerance && report.max_normalization_error < tolerance;
            Ok(if ok { 0 } else { 3 })
        }
    }
}
