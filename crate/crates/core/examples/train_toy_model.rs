//! Train the dual-encoder toy model on a small generated set with EHL and
//! with plain L1, then compare their height errors and collapse ratios.

use radar_height::loss::{LossKind, LossSpec};
use radar_height::model::{train_with, TrainConfig};
use radar_height::pipeline::evaluate_predictor;
use radar_height::synth::{generate_dataset, SceneSpec};

fn main() -> radar_height::Result<()> {
    let data = generate_dataset(&SceneSpec { n_frames: 120, ..SceneSpec::default() })?;
    let train_frames = data.frames_of(&data.split.train)?;
    let val_frames = data.frames_of(&data.split.val)?;

    for kind in [LossKind::Ehl, LossKind::L1] {
        let cfg = TrainConfig {
            loss: LossSpec::with_kind(kind),
            lr: 1e-3,
            epochs: 15,
            ..TrainConfig::default()
        };
        println!("training {kind} on {} frames", train_frames.len());
        let (model, log) = train_with(&cfg, &train_frames, &val_frames, |r| {
            let val = r.val.map_or(f64::NAN, |v| v.l_reg);
            println!("  epoch {:2}  lr {:.1e}  train L_reg {:.4}  seg {:.4}  val L_reg {:.4}", r.epoch, r.lr, r.train.l_reg, r.train.seg, val);
        })?;
        println!("  {} parameters, {} epochs logged", model.num_params(), log.len());

        let report = evaluate_predictor(&model, &val_frames, 0.05)?;
        let m = report.errors.mean;
        println!(
            "  val RHE {:.3}  BHE {:.3}  RHE!=0 {:.3}  RHE=0 {:.3}  collapse ratio {:.3}{}",
            m.rhe.unwrap_or(f64::NAN),
            m.bhe.unwrap_or(f64::NAN),
            m.rhe_nonzero.unwrap_or(f64::NAN),
            m.rhe_zero.unwrap_or(f64::NAN),
            report.collapse_ratio.unwrap_or(f64::NAN),
            if report.collapsed { " (collapsed)" } else { "" }
        );
    }
    Ok(())
}
