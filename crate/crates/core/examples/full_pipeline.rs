//! The whole experiment in one process: generate, train, predict, compare
//! extension methods and render overlays, all under one output directory.

use radar_height::config::ExperimentConfig;
use radar_height::pipeline::{cmd_eval, cmd_gen, cmd_train, format_comparison, EvalRequest, SplitName};
use radar_height::radar::ExtensionMethod;

fn main() -> radar_height::Result<()> {
    let dir = std::env::temp_dir().join("radar-height-pipeline");
    let mut cfg = ExperimentConfig { output_dir: dir.clone(), ..ExperimentConfig::default() };
    cfg.scene.n_frames = 120;
    cfg.train.epochs = 15;
    cfg.train.lr = 1e-3;

    let (path, summary) = cmd_gen(&cfg, true)?;
    println!("{summary}\n  -> {}", path.display());

    let trained = cmd_train(&cfg, None, true, |r| {
        eprintln!("epoch {} train {:.4} val {:.4}", r.epoch, r.train.total, r.val.map_or(f64::NAN, |v| v.total));
    })?;
    println!("checkpoint {}", trained.checkpoint.display());

    let report = cmd_eval(
        &cfg,
        &EvalRequest {
            checkpoint: &trained.checkpoint,
            split: SplitName::Test,
            methods: &[ExtensionMethod::Fixed, ExtensionMethod::Direct, ExtensionMethod::Filter],
            render_frames: 2,
            force: true,
        },
    )?;
    println!("{}", format_comparison(&report));
    println!("outputs under {}", dir.display());
    Ok(())
}
