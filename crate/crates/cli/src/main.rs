use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use opinionkb::resemble::STGraph;
use opinionkb::selection::Algorithm;
use opinionkb_cli::pipeline::run_selection;
use opinionkb_cli::report::report;
use opinionkb_cli::{Mode, Pipeline, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "opinionkb", version, about = "Subjective knowledge acquisition pipeline")]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract raw (adjective, noun) pairs from the tagged corpus.
    Extract,
    /// Map raw pairs onto KB classes.
    Map,
    /// Build the ST graph.
    Graph,
    /// Select ST pairs. With --graph, prints the selection without a run directory.
    Select {
        #[arg(long)]
        algo: Option<Algorithm>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Draw representative instances for each selected pair.
    Sample,
    /// Generate HITs from the samples.
    Hits,
    /// Answer the HITs with simulated workers.
    Simulate,
    /// Serve the HITs over HTTP until all are answered.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        /// Seconds to wait; 0 waits indefinitely.
        #[arg(long)]
        timeout: Option<u64>,
    },
    /// Aggregate answers into opinions and retained properties.
    Aggregate,
    /// Train one classifier per pair.
    Train,
    /// Label every instance with crowd or classifier facts.
    Apply,
    /// Propagate facts along the ST graph.
    Infer {
        #[arg(long)]
        fixpoint: bool,
    },
    /// Write the enriched KB and fact sidecar.
    Enrich,
    /// Run every stage, resuming from completed ones.
    Run,
    /// Print the evaluation report for the run directory.
    Report {
        /// Print TSV instead of aligned tables.
        #[arg(long)]
        tsv: bool,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let Some(path) = &cli.config else {
        bail!("--config is required for this command");
    };
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn stage(cli: &Cli, cfg: PipelineConfig, stage: Stage) -> Result<()> {
    cfg.validate()?;
    let mut p = Pipeline::new(cfg, &cli.out)?;
    p.run_stage(stage)?;
    p.write_manifest()?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Select { algo, k, delta, graph } => {
            let mut cfg = match (&cli.config, graph) {
                (None, Some(_)) => PipelineConfig::default(),
                _ => load_config(&cli)?,
            };
            if let Some(a) = algo {
                cfg.algo = a.name().to_string();
            }
            if let Some(k) = k {
                cfg.k = *k;
            }
            if let Some(d) = delta {
                cfg.delta = *d;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            match graph {
                Some(path) => {
                    let g = STGraph::read_tsv(path).with_context(|| format!("loading {}", path.display()))?;
                    let r = run_selection(&g, cfg.algorithm()?, cfg.k, cfg.delta, cfg.seed)?;
                    println!("rank\tpair\tweight_degree");
                    for (rank, (&v, p)) in r.indices.iter().zip(&r.chosen).enumerate() {
                        println!("{}\t{}\t{}", rank + 1, p.id(), g.weight_degree(v));
                    }
                    println!("#induced_weight\t{}\ttypes\t{}", r.induced_weight, r.type_count);
                    Ok(())
                }
                None => stage(&cli, cfg, Stage::Select),
            }
        }
        Command::Extract => stage(&cli, load_config(&cli)?, Stage::Extract),
        Command::Map => stage(&cli, load_config(&cli)?, Stage::Map),
        Command::Graph => stage(&cli, load_config(&cli)?, Stage::Graph),
        Command::Sample => stage(&cli, load_config(&cli)?, Stage::Sample),
        Command::Hits => stage(&cli, load_config(&cli)?, Stage::Hits),
        Command::Simulate => {
            let mut cfg = load_config(&cli)?;
            cfg.mode = Mode::Simulate;
            stage(&cli, cfg, Stage::Answers)
        }
        Command::Serve { bind, timeout } => {
            let mut cfg = load_config(&cli)?;
            cfg.mode = Mode::Serve;
            if let Some(b) = bind {
                cfg.bind_address = b.clone();
            }
            if let Some(t) = timeout {
                cfg.serve_timeout = *t;
            }
            stage(&cli, cfg, Stage::Answers)
        }
        Command::Aggregate => stage(&cli, load_config(&cli)?, Stage::Aggregate),
        Command::Train => stage(&cli, load_config(&cli)?, Stage::Train),
        Command::Apply => stage(&cli, load_config(&cli)?, Stage::Apply),
        Command::Infer { fixpoint } => {
            let mut cfg = load_config(&cli)?;
            cfg.fixpoint |= *fixpoint;
            stage(&cli, cfg, Stage::Infer)
        }
        Command::Enrich => stage(&cli, load_config(&cli)?, Stage::Enrich),
        Command::Run => {
            let cfg = load_config(&cli)?;
            let mut p = Pipeline::new(cfg, &cli.out)?;
            let manifest = p.run()?;
            println!("{} artifacts in {}", manifest.artifacts.len(), cli.out.display());
            Ok(())
        }
        Command::Report { tsv } => {
            let cfg = load_config(&cli)?;
            let r = report(&cfg, &cli.out)?;
            print!("{}", if *tsv { r.tsv } else { r.text });
            Ok(())
        }
    }
}
