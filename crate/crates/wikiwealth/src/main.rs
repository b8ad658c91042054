use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wikiwealth::pipeline;
use wikiwealth::{Error, Result, RunConfig};
use wikiwealth_core::eval::ModelKind;
use wikiwealth_core::synth::RegionSpec;

/// Estimate survey outcomes from nearby geolocated articles and nightlights.
#[derive(Parser)]
#[command(name = "wikiwealth", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 gives bit-reproducible runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Nearest articles per survey point.
    #[arg(long, global = true)]
    neighbors: Option<usize>,
    /// Training epochs (embedding epochs for `embed`).
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Learning rate (initial embedding rate for `embed`).
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic regions, their surveys, images and a run config.
    Synth {
        /// JSON region spec, or a list of them. Defaults to two regions.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Override the article count of every region.
        #[arg(long)]
        articles: Option<usize>,
        /// Override the survey point count of every region.
        #[arg(long)]
        surveys: Option<usize>,
    },
    /// Train paragraph vectors over the corpus.
    Embed {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Checkpoint to write.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Build the nearest-article feature table.
    Features {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Embedding checkpoint.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        surveys: Vec<PathBuf>,
        /// Feature file to write.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Train one regressor on every survey point.
    Train {
        /// NL, WE or MM.
        #[arg(long, value_parser = parse_kind)]
        kind: ModelKind,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        surveys: Vec<PathBuf>,
        /// Checkpoint to write.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the configured experiments and grids.
    Eval,
    /// Text-model r² over neighbour counts.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
    },
    /// Project rich/poor neighbourhood embeddings with category articles.
    Pca {
        #[arg(long, value_delimiter = ',')]
        categories: Vec<String>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::ALL.into_iter().find(|k| k.label().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown model kind {s:?}"))
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    if let Some(n) = cli.neighbors {
        cfg.neighbors = n;
    }
    let embedding = matches!(cli.command, Command::Embed { .. });
    if let Some(e) = cli.epochs {
        if embedding {
            cfg.embed.epochs = e;
        } else {
            cfg.model.train.epochs = e;
        }
    }
    if let Some(lr) = cli.lr {
        if embedding {
            cfg.embed.initial_lr = lr as f32;
        } else {
            cfg.model.train.learning_rate = lr;
        }
    }
    Ok(cfg)
}

fn region_specs(path: Option<&PathBuf>) -> Result<Vec<RegionSpec>> {
    let Some(path) = path else {
        return Ok(vec![RegionSpec::region_a(), RegionSpec::region_b()]);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let parsed = if value.is_array() { serde_json::from_value(value) } else { serde_json::from_value(value).map(|s| vec![s]) };
    parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth { ref spec, articles, surveys } => {
            let mut specs = region_specs(spec.as_ref())?;
            for (i, s) in specs.iter_mut().enumerate() {
                if let Some(seed) = cli.seed {
                    s.seed = seed.wrapping_add(i as u64);
                }
                if let Some(n) = articles {
                    s.articles = n;
                }
                if let Some(n) = surveys {
                    s.surveys = n;
                }
            }
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
            let written = pipeline::synth(&specs, &out, cli.seed.unwrap_or(0))?;
            println!("wrote {} outputs under {}", written.len(), out.display());
        }
        Command::Embed { corpus, model } => {
            if corpus.is_some() {
                cfg.corpus = corpus;
            }
            let path = model.or(cfg.embeddings.clone()).unwrap_or_else(|| cfg.output.join("model.pvdb"));
            let m = pipeline::embed(&cfg, &path)?;
            let loss = m.per_epoch_loss();
            println!("embedded {} documents, loss {:?} -> {:?}, saved {}", m.num_docs(), loss.first(), loss.last(), path.display());
        }
        Command::Features { corpus, model, surveys, features } => {
            if corpus.is_some() {
                cfg.corpus = corpus;
            }
            if model.is_some() {
                cfg.embeddings = model;
            }
            if !surveys.is_empty() {
                cfg.surveys = surveys;
            }
            let path = features.or(cfg.features.clone()).unwrap_or_else(|| cfg.output.join("features.gwft"));
            let t = pipeline::features(&cfg, &path)?;
            println!("{} feature rows of width {}, saved {}", t.rows.len(), t.row_len(), path.display());
        }
        Command::Train { kind, features, images, surveys, model } => {
            if features.is_some() {
                cfg.features = features;
            }
            if images.is_some() {
                cfg.images = images;
            }
            if !surveys.is_empty() {
                cfg.surveys = surveys;
            }
            let path = model.unwrap_or_else(|| cfg.output.join(format!("regressor_{}.gwnn", kind.label())));
            let trace = pipeline::train(&cfg, kind, &path)?;
            println!("trained {} for {} epochs, final loss {:?}, saved {}", kind.label(), trace.len(), trace.last(), path.display());
        }
        Command::Eval => {
            let run = pipeline::eval(&cfg)?;
            for r in &run.reports {
                println!(
                    "{}: r2 {:.4} rho2 {:.4}",
                    wikiwealth::report::experiment_name(&r.spec),
                    r.pearson_r2,
                    r.spearman_rho2
                );
            }
        }
        Command::Sweep { ns } => {
            let ns = if ns.is_empty() { cfg.sweep.clone() } else { ns };
            for (n, r2) in pipeline::sweep(&cfg, &ns)? {
                println!("N={n}: r2 {r2:.4}");
            }
        }
        Command::Pca { categories } => {
            let cats = if categories.is_empty() { cfg.categories.clone() } else { categories };
            let proj = pipeline::pca(&cfg, &cats)?;
            println!("projected {} points", proj.points.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error {}: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
