//! `graphxain`: train a GCN, explain node predictions, and turn the
//! explanations into narratives, descriptions and DOT renderings.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graphxain::{Error, ErrorKind, Result};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "graphxain", version, about = "Explain GCN node predictions as narratives")]
struct Cli {
    /// JSON run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Nodes kept in a truncated view.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Features kept in a truncated view.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Use the offline mock provider instead of the HTTP endpoint.
    #[arg(long, global = true)]
    mock: bool,
    /// Grow k until the view is connected.
    #[arg(long, global = true)]
    expand_connected: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the model; writes checkpoint.json, report.json and id_map.json.
    Train,
    /// Explain the given node ids, or a seeded sample when none are given.
    Explain {
        ids: Vec<String>,
        /// Sample size when no ids are given.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Generate a narrative for one node.
    Narrate {
        id: String,
        /// Emit the templated description instead.
        #[arg(long)]
        describe: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generate the templated description for one node.
    Describe {
        id: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write DOT and feature-importance JSON for a view (or explain artifact) file.
    Render { view: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Io => 3,
        ErrorKind::Parse => 4,
        ErrorKind::Validation => 5,
        ErrorKind::Numeric => 6,
        ErrorKind::Credential => 7,
        ErrorKind::Transport => 8,
        ErrorKind::Provider => 9,
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    cfg.apply_seed();
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(m) = cli.m {
        cfg.m = m;
    }
    if cli.expand_connected {
        cfg.expand_connected = true;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Train => {
            let outcome = pipeline::run_train(&cfg)?;
            match outcome.report.test_auc {
                Some(auc) => println!("test AUC: {auc:.4}"),
                None => println!("test AUC: undefined (single-class test split)"),
            }
            println!("checkpoint: {}", outcome.checkpoint_path.display());
        }
        Command::Explain { ids, sample } => {
            if let Some(n) = sample {
                cfg.sample = n;
            }
            for (id, a) in pipeline::run_explain(&cfg, &ids)? {
                println!(
                    "{id}\tprediction {:.4}\tk {}\tconnected {}\t{}",
                    a.view.prediction,
                    a.view.k_used,
                    a.view.connected,
                    pipeline::explain_path(&cfg, &id).display()
                );
            }
        }
        Command::Narrate { id, describe, format } => narrate(&cfg, &id, cli.mock, describe, format)?,
        Command::Describe { id, format } => narrate(&cfg, &id, cli.mock, true, format)?,
        Command::Render { view } => {
            let (dot, imp) = pipeline::run_render(&cfg, &view)?;
            println!("{}\n{}", dot.display(), imp.display());
        }
    }
    Ok(())
}

fn narrate(cfg: &RunConfig, id: &str, mock: bool, describe: bool, format: Format) -> Result<()> {
    let outcome = pipeline::run_narrate(cfg, id, mock, describe)?;
    match format {
        Format::Text => print!("{}", outcome.result.text),
        Format::Json => print!("{}", outcome.result.to_json()),
    }
    if !outcome.result.text.ends_with('\n') || format == Format::Json {
        println!();
    }
    eprintln!("wrote {}", outcome.result_path.display());
    if let Some(r) = outcome.report {
        eprintln!(
            "structure: paragraphs {} ({}), target {}, feature {}, neighbour {}, unsupported numbers {:?}",
            r.paragraphs,
            if r.enough_paragraphs() { "ok" } else { "too few" },
            r.mentions_target,
            r.mentions_feature,
            r.mentions_neighbor,
            r.unsupported_numbers
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(Error::kind(&e)))
        }
    }
}
