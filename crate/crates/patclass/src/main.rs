use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patclass::commands;
use patclass::config::FlatConfig;
use patclass::report::metrics_line;
use patclass::{Error, Result};

#[derive(Parser)]
#[command(name = "patclass", version, about = "Section-ensemble patent sub-class classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, filter, pool, split and summarise a corpus (key: corpus).
    Prep(Common),
    /// Write a synthetic corpus (keys: num_docs, num_labels, filler_vocab, p_signal, min_words, max_words).
    Synth(Common),
    /// Train skip-gram vectors on the training split (keys: corpus, split, skipgram.*).
    TrainEmbeddings(Common),
    /// Train one classifier (keys: corpus, split, architecture, pool, words, embedding, ...).
    Train(Common),
    /// Evaluate a checkpoint on the test split (keys: corpus, split, checkpoint).
    Eval(Common),
    /// Evaluate a three-member ensemble manifest on the test split (keys: corpus, split, manifest).
    EnsembleEval(Common),
    /// Run an experiment grid (keys: experiment, corpus or synthetic.*, seeds, words, ...).
    Experiment(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides a `seed` key in the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for parallel grid points (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Extra `key=value` settings; these win over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    /// File values, then `--set` overrides. Returns the config with `seed` removed.
    fn resolve(&self) -> Result<(FlatConfig, u64)> {
        let mut config = match &self.config {
            Some(p) => FlatConfig::load(p)?,
            None => FlatConfig::default(),
        };
        let mut problems = Vec::new();
        for kv in &self.set {
            match kv.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() => config.set(k.trim(), v.trim()),
                _ => problems.push(format!("--set expects key=value, got {kv:?}")),
            }
        }
        let file_seed = config.remove("seed");
        let seed = match (self.seed, file_seed) {
            (Some(s), _) => s,
            (None, Some(raw)) => raw.parse().unwrap_or_else(|e| {
                problems.push(format!("seed: cannot parse {raw:?}: {e}"));
                0
            }),
            (None, None) => 0,
        };
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok((config, seed))
    }
}

/// Runs a subcommand and returns its one-line summary.
type Handler = fn(&FlatConfig, u64, &Path) -> Result<String>;

fn dispatch(cli: Cli) -> Result<()> {
    let (common, run): (&Common, Handler) = match &cli.command {
        Command::Prep(c) => (c, |cfg, seed, out| {
            let s = commands::cmd_prep(cfg, seed, out)?;
            Ok(match s.manifest {
                Some(m) => format!(
                    "parsed {} admitted {} split {}/{}/{}",
                    s.parsed,
                    s.admitted,
                    m.train.len(),
                    m.validation.len(),
                    m.test.len()
                ),
                None => format!("parsed {} admitted {} (too few documents to split)", s.parsed, s.admitted),
            })
        }),
        Command::Synth(c) => (c, |cfg, seed, out| Ok(format!("wrote {}", commands::cmd_synth(cfg, seed, out)?.display()))),
        Command::TrainEmbeddings(c) => (c, |cfg, seed, out| {
            Ok(format!("wrote {}", commands::cmd_train_embeddings(cfg, seed, out)?.display()))
        }),
        Command::Train(c) => (c, |cfg, seed, out| {
            let model = commands::cmd_train(cfg, seed, out)?;
            let last = model.history().epochs.last();
            Ok(format!(
                "trained {} for {} epochs; final loss {}; wrote {}",
                model.config().architecture,
                model.history().epochs.len(),
                last.map_or("n/a".into(), |e| format!("{:.4}", e.train_loss)),
                out.join(commands::CHECKPOINT_FILE).display()
            ))
        }),
        Command::Eval(c) => (c, |cfg, seed, out| Ok(metrics_line(&commands::cmd_eval(cfg, seed, out)?))),
        Command::EnsembleEval(c) => (c, |cfg, seed, out| Ok(metrics_line(&commands::cmd_ensemble_eval(cfg, seed, out)?))),
        Command::Experiment(c) => (c, |cfg, seed, out| {
            let o = commands::cmd_experiment(cfg, seed, out)?;
            Ok(format!("{} rows, {} failed grid points", o.rows.len(), o.failures.len()))
        }),
    };
    let (config, seed) = common.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(vec![format!("threads: {e}")]))?;
    let summary = pool.install(|| run(&config, seed, &common.out))?;
    println!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
