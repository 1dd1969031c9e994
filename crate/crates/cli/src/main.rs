use std::path::PathBuf;
use std::process::ExitCode;

use amgae_cli::prepare::{prepare_linqs, prepare_tu, SplitSizes};
use amgae_cli::run::{cmd_ablate, cmd_eval, cmd_report, cmd_sweep, cmd_train, default_ratios, primary_metric};
use amgae_cli::{load_config, output_dir, ErrorReport};
use amgae_core::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amgae", version, about = "Adversarially masked graph autoencoder experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (flat-key TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set model.mask_ratio=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to `$AMGAE_OUTPUT_ROOT/<verb>/<config stem>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PrepareSource {
    /// LINQS citation dump (`.content` + `.cites`) with a seeded
    /// 20-per-class / 500 / 1000 split.
    Linqs {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// TU graph-classification collection.
    Tu {
        /// Directory holding `<NAME>_A.txt` and friends.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Command {
    /// Convert a public dataset dump into the loader format.
    Prepare {
        #[command(subcommand)]
        source: PrepareSource,
    },
    /// Train and write checkpoints, history and the resolved config.
    Train(RunArgs),
    /// Evaluate a checkpoint with frozen-encoder probes.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate the full model and its three ablations.
    Ablate(RunArgs),
    /// Train and evaluate once per mask ratio.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated ratios; defaults to 0.1,0.2,...,0.9.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Summarize evaluation reports as a markdown table.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Prepare { source } => match source {
            PrepareSource::Linqs { content, cites, out, seed } => {
                let g = prepare_linqs(&content, &cites, &out, seed, SplitSizes::default())?;
                println!("{}: {} nodes, {} edges, {} features", out.display(), g.num_nodes(), g.num_edges(), g.feature_dim());
            }
            PrepareSource::Tu { dir, name, out } => {
                let c = prepare_tu(&dir, &name, &out)?;
                println!("{}: {} graphs, {} classes", out.display(), c.len(), c.num_classes);
            }
        },
        Command::Train(a) => {
            let cfg = load_config(&a.config, &a.overrides)?;
            let out = output_dir(a.out, "train", &a.config);
            let trained = cmd_train(&cfg, &out)?;
            let last = trained.state.history.last();
            println!(
                "{}: {} epochs, final l_g {:.6}, l_d {:.6}",
                out.display(),
                trained.state.epoch,
                last.map_or(0.0, |r| r.l_g),
                last.map_or(0.0, |r| r.l_d)
            );
        }
        Command::Eval { run, checkpoint } => {
            let cfg = load_config(&run.config, &run.overrides)?;
            let out = output_dir(run.out, "eval", &run.config);
            let report = cmd_eval(&cfg, &checkpoint, &out)?;
            for (k, m) in &report.metrics {
                println!("{k}: {:.4} ± {:.4}", m.mean, m.std);
            }
        }
        Command::Ablate(a) => {
            let cfg = load_config(&a.config, &a.overrides)?;
            let out = output_dir(a.out, "ablate", &a.config);
            let rows = cmd_ablate(&cfg, &out)?;
            let metric = primary_metric(cfg.task);
            for r in rows.iter().filter(|r| r.metric == metric) {
                println!("{:<9} {metric}: {:.4} ± {:.4}", r.variant, r.mean, r.std);
            }
        }
        Command::Sweep { run, ratios } => {
            let cfg = load_config(&run.config, &run.overrides)?;
            let out = output_dir(run.out, "sweep", &run.config);
            let rows = cmd_sweep(&cfg, &ratios.unwrap_or_else(default_ratios), &out)?;
            let metric = primary_metric(cfg.task);
            for r in rows.iter().filter(|r| r.metric == metric) {
                println!("{:.2} {metric}: {:.4} ± {:.4}", r.mask_ratio, r.mean, r.std);
            }
        }
        Command::Report { paths } => {
            let refs: Vec<&std::path::Path> = paths.iter().map(PathBuf::as_path).collect();
            print!("{}", cmd_report(&refs)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport::new(&e, serde_json::json!({ "args": &args[1..] }));
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::FAILURE
        }
    }
}

