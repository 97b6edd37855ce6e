//! Mini-batch training loop.

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{LossBreakdown, ModelConfig, Objective, Sample, ToyModel};
use super::optim::{Adam, PlateauSchedule};
use crate::error::{Error, Result};
use crate::geometry::Frame;
use crate::ground_truth::{build_height_map, build_seg_mask};
use crate::loss::LossSpec;
use crate::radar::{projection_heights, render_radar_image, RadarImage};
use crate::synth::render_visual;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub lr: f64,
    /// Plateau factor applied to `lr`.
    pub lr_decay: f64,
    pub plateau_patience: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight of the free-space BCE; 0 trains the height branch alone.
    pub seg_weight: f64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossSpec::default(),
            lr: 3e-4,
            lr_decay: 0.75,
            plateau_patience: 3,
            epochs: 12,
            batch_size: 4,
            seed: 1,
            seg_weight: 1.0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("train.lr must be > 0, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return Err(Error::Config(format!("train.lr_decay must be in (0, 1), got {}", self.lr_decay)));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.plateau_patience == 0 {
            return Err(Error::Config(
                "train.epochs, train.batch_size and train.plateau_patience must be >= 1".into(),
            ));
        }
        if !(self.seg_weight >= 0.0 && self.seg_weight.is_finite()) {
            return Err(Error::Config("train.seg_weight must be >= 0".into()));
        }
        Ok(())
    }

    pub fn objective(&self) -> Objective {
        Objective {
            loss: self.loss,
            seg_weight: self.seg_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train: LossBreakdown,
    pub val: Option<LossBreakdown>,
}

/// Visual raster and plain radar projection: what the network sees.
pub fn model_inputs(frame: &Frame) -> (Array3<f64>, RadarImage) {
    (render_visual(frame), render_radar_image(frame, &projection_heights(frame)))
}

pub fn build_sample(frame: &Frame) -> Result<Sample> {
    let (visual, radar) = model_inputs(frame);
    let (gt, partition) = build_height_map(frame)?;
    Ok(Sample {
        visual,
        radar,
        gt,
        partition,
        mask: build_seg_mask(frame)?,
    })
}

fn check_finite(what: &str, l: &LossBreakdown) -> Result<()> {
    if l.total.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} loss is {}", l.total)))
    }
}

/// Mean loss over `frames`.
pub fn evaluate_loss(model: &ToyModel, frames: &[&Frame], objective: &Objective) -> Result<LossBreakdown> {
    let mut acc = LossBreakdown::default();
    for f in frames {
        acc.add_scaled(&model.loss(&build_sample(f)?, objective)?, 1.0 / frames.len() as f64);
    }
    Ok(acc)
}

pub fn train(cfg: &TrainConfig, train_frames: &[&Frame], val_frames: &[&Frame]) -> Result<(ToyModel, Vec<EpochRecord>)> {
    train_with(cfg, train_frames, val_frames, |_| {})
}

/// Train and call `on_epoch` after each epoch.
///
/// The plateau schedule watches validation `l_reg`, or training `l_reg` when
/// no validation frames are given.
pub fn train_with(
    cfg: &TrainConfig,
    train_frames: &[&Frame],
    val_frames: &[&Frame],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ToyModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    let first = train_frames
        .first()
        .ok_or_else(|| Error::EmptyDataset("no training frames".into()))?;
    let (h, w) = first.camera.dims();
    if let Some(f) = train_frames.iter().chain(val_frames).find(|f| f.camera.dims() != (h, w)) {
        return Err(Error::shape(format!("frame dims ({h}, {w})"), format!("frame {} {:?}", f.id, f.camera.dims())));
    }
    let mut model = ToyModel::init(cfg.model.clone(), h, w, cfg.seed)?;
    let objective = cfg.objective();
    let mut adam = Adam::new(model.num_params());
    let mut schedule = PlateauSchedule::new(cfg.lr_decay, cfg.plateau_patience);
    let mut lr = cfg.lr;
    let mut order: Vec<usize> = (0..train_frames.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);

        let mut train_loss = LossBreakdown::default();
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = vec![0.0; model.num_params()];
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let sample = build_sample(train_frames[i])?;
                let (l, g) = model.backward(&sample, &objective)?;
                check_finite("training", &l)?;
                train_loss.add_scaled(&l, 1.0 / train_frames.len() as f64);
                for (acc, v) in grads.iter_mut().zip(&g) {
                    *acc += scale * v;
                }
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient in epoch {epoch}")));
            }
            adam.step(&mut model.params, &grads, lr);
        }

        let val = if val_frames.is_empty() {
            None
        } else {
            let v = evaluate_loss(&model, val_frames, &objective)?;
            check_finite("validation", &v)?;
            Some(v)
        };
        let record = EpochRecord {
            epoch,
            lr,
            train: train_loss,
            val,
        };
        on_epoch(&record);
        log.push(record);
        lr = schedule.observe(val.unwrap_or(train_loss).l_reg, lr);
    }
    Ok((model, log))
}
