use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use radar_height::config::ExperimentConfig;
use radar_height::io;
use radar_height::loss::LossKind;
use radar_height::pipeline::{self, EvalRequest, SplitName};
use radar_height::radar::ExtensionMethod;
use radar_height::Result;

/// Radar height estimation experiments on synthetic scenes.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); defaults are used when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output root; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for scene generation and training.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration as TOML.
    Config,
    /// Generate and split the synthetic dataset.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Train the toy model on the training split.
    Train {
        #[command(flatten)]
        common: Common,
        /// l1, l2, wl1, wl2, hl or ehl.
        #[arg(long)]
        loss: Option<LossKind>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Train the height branch alone.
        #[arg(long)]
        no_seg_branch: bool,
        /// Checkpoint name; defaults to the loss name.
        #[arg(long)]
        name: Option<String>,
        /// Suppress per-epoch progress lines.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Evaluate a checkpoint and compare extension methods.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// fixed, direct, filter (repeatable); `ah` is reserved.
        #[arg(long = "method", value_delimiter = ',', default_values = ["fixed", "direct", "filter"])]
        methods: Vec<ExtensionMethod>,
        #[arg(long, default_value = "test")]
        split: SplitName,
        /// Render the first N evaluated frames per method.
        #[arg(long, default_value_t = 0)]
        render: usize,
    },
    /// Render one frame with vertical radar lines.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frame: u32,
        #[arg(long, default_value = "none")]
        method: ExtensionMethod,
        /// Prediction store, needed for direct and filter.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Depth metrics for a prediction/ground-truth matrix pair.
    Depth {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Valid-pixel mask (non-zero = valid); defaults to gt > 0.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Config => print!("{}", ExperimentConfig::default().to_toml()),
        Command::Gen { common, frames } => {
            let mut cfg = common.load()?;
            if let Some(n) = frames {
                cfg.scene.n_frames = n;
            }
            let (path, summary) = pipeline::cmd_gen(&cfg, common.force)?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        Command::Train {
            common,
            loss,
            epochs,
            no_seg_branch,
            name,
            quiet,
        } => {
            let mut cfg = common.load()?;
            if let Some(k) = loss {
                cfg.train.loss.kind = k;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if no_seg_branch {
                cfg.train.seg_weight = 0.0;
            }
            let out = pipeline::cmd_train(&cfg, name.as_deref(), common.force, |r| {
                if !quiet {
                    let val = r.val.map_or_else(|| "-".into(), |v| format!("{:.4}", v.l_reg));
                    eprintln!(
                        "epoch {:>3}  lr {:.3e}  train l_reg {:.4}  seg {:.4}  val l_reg {val}",
                        r.epoch, r.lr, r.train.l_reg, r.train.seg
                    );
                }
            })?;
            let v = &out.report.validation;
            println!(
                "validation RHE {}  RHE!=0 {}  RHE=0 {}  BHE {}",
                fmt(v.errors.mean.rhe),
                fmt(v.errors.mean.rhe_nonzero),
                fmt(v.errors.mean.rhe_zero),
                fmt(v.errors.mean.bhe)
            );
            if v.collapsed {
                println!(
                    "warning: predictions collapsed toward zero (ratio {})",
                    fmt(v.collapse_ratio)
                );
            }
            println!("wrote {}", out.checkpoint.display());
        }
        Command::Eval {
            common,
            checkpoint,
            methods,
            split,
            render,
        } => {
            let cfg = common.load()?;
            let report = pipeline::cmd_eval(
                &cfg,
                &EvalRequest {
                    checkpoint: &checkpoint,
                    split,
                    methods: &methods,
                    render_frames: render,
                    force: common.force,
                },
            )?;
            print!("{}", pipeline::format_comparison(&report));
        }
        Command::Render {
            common,
            frame,
            method,
            predictions,
        } => {
            let cfg = common.load()?;
            let path = pipeline::cmd_render(&cfg, frame, method, predictions.as_deref(), common.force)?;
            println!("wrote {}", path.display());
        }
        Command::Depth { pred, gt, mask, report } => {
            let r = pipeline::cmd_depth(&pred, &gt, mask.as_deref())?;
            println!(
                "MAE {:.4}  RMSE {:.4}  AbsRel {:.4}  d1 {:.4}  d2 {:.4}  d3 {:.4}  ({} px)",
                r.mae, r.rmse, r.absrel, r.delta[0], r.delta[1], r.delta[2], r.pixels
            );
            if let Some(path) = report {
                io::save_report(&path, &r, "")?;
            }
        }
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
