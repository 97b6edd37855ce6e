//! The experiment commands behind the binary: generate, train, evaluate,
//! render, and depth metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::Frame;
use crate::ground_truth::{build_height_map, HeightMap, RegionPartition};
use crate::io::{self, Checkpoint, OutputLayout};
use crate::metrics::{
    collapse_ratio, dataset_aggregate, depth_errors, height_errors, point_height_errors, DepthErrorReport,
    FrameHeightErrors, HeightErrorReport, HeightErrors,
};
use crate::model::{predict_dataset, train_with, EpochRecord, PredictionStore, Predictor};
use crate::radar::{extend, extend_filter, ExtensionMethod, ExtensionSpec, PointHeights};
use crate::render::overlay;
use crate::synth::{generate, split, Dataset};

fn ensure_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::AlreadyExists {
            path: path.to_path_buf(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    pub frames: usize,
    pub objects: usize,
    pub radar_points: usize,
    pub associated_points: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl std::fmt::Display for GenSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} frames ({} train / {} val / {} test), {} objects, {} radar points ({} associated)",
            self.frames, self.train, self.val, self.test, self.objects, self.radar_points, self.associated_points
        )
    }
}

pub fn cmd_gen(cfg: &ExperimentConfig, force: bool) -> Result<(PathBuf, GenSummary)> {
    let cfg = cfg.clone().resolved()?;
    let layout = OutputLayout::new(&cfg.output_dir);
    let path = layout.dataset();
    ensure_writable(&path, force)?;
    let frames = generate(&cfg.scene)?;
    let ids: Vec<u32> = frames.iter().map(|f| f.id).collect();
    let split = split(&ids, cfg.split, cfg.scene.seed)?;
    let summary = GenSummary {
        frames: frames.len(),
        objects: frames.iter().map(|f| f.objects.len()).sum(),
        radar_points: frames.iter().map(|f| f.radar.len()).sum(),
        associated_points: frames
            .iter()
            .map(|f| f.associations.as_ref().map_or(0, |a| a.len()))
            .sum(),
        train: split.train.len(),
        val: split.val.len(),
        test: split.test.len(),
    };
    let dataset = Dataset {
        spec: cfg.scene.clone(),
        frames,
        split,
    };
    io::save_dataset(&path, &dataset, &cfg.hash())?;
    Ok((path, summary))
}

/// Default checkpoint name: the loss, plus a suffix for the single-task run.
pub fn model_name(cfg: &ExperimentConfig) -> String {
    let mut name = cfg.train.loss.kind.name().to_string();
    if cfg.train.seg_weight == 0.0 {
        name.push_str("-noseg");
    }
    name
}

/// Dense-map evaluation of a predictor on a set of frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub errors: HeightErrorReport,
    /// Pooled mean |Ĥ| over pooled mean ground truth at RAD pixels.
    pub collapse_ratio: Option<f64>,
    pub collapsed: bool,
}

pub fn evaluate_predictor(
    predictor: &dyn Predictor,
    frames: &[&Frame],
    collapse_threshold: f64,
) -> Result<ModelReport> {
    let mut maps: Vec<(HeightMap, HeightMap, RegionPartition)> = Vec::with_capacity(frames.len());
    let mut per_frame = Vec::with_capacity(frames.len());
    for f in frames {
        let (gt, part) = build_height_map(f)?;
        let pred = predictor.predict_height(f)?;
        per_frame.push(FrameHeightErrors {
            frame: f.id,
            errors: height_errors(&gt, &pred, &part)?,
        });
        maps.push((gt, pred, part));
    }
    let ratio = collapse_ratio(maps.iter().map(|(g, p, r)| (g, p, r)));
    Ok(ModelReport {
        errors: dataset_aggregate(per_frame),
        collapse_ratio: ratio,
        collapsed: ratio.is_some_and(|r| r < collapse_threshold),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub name: String,
    pub epochs: usize,
    pub final_lr: f64,
    pub seg_weight: f64,
    pub validation: ModelReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub log: Vec<EpochRecord>,
    pub report: TrainReport,
}

pub fn cmd_train(
    cfg: &ExperimentConfig,
    name: Option<&str>,
    force: bool,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let cfg = cfg.clone().resolved()?;
    let layout = OutputLayout::new(&cfg.output_dir);
    let name = name.map_or_else(|| model_name(&cfg), str::to_string);
    let (ckpt, log_path, report_path) = (
        layout.checkpoint(&name),
        layout.train_log(&name),
        layout.report(&format!("{name}-val")),
    );
    for p in [&ckpt, &log_path, &report_path] {
        ensure_writable(p, force)?;
    }
    let dataset = io::load_dataset(&layout.dataset())?;
    let train_frames = dataset.frames_of(&dataset.split.train)?;
    let val_frames = dataset.frames_of(&dataset.split.val)?;
    let (model, log) = train_with(&cfg.train, &train_frames, &val_frames, on_epoch)?;
    let validation = evaluate_predictor(&model, &val_frames, cfg.eval.collapse_threshold)?;
    let report = TrainReport {
        name: name.clone(),
        epochs: log.len(),
        final_lr: log.last().map_or(cfg.train.lr, |r| r.lr),
        seg_weight: cfg.train.seg_weight,
        validation,
    };
    let hash = cfg.hash();
    io::save_checkpoint(&ckpt, &Checkpoint::Toy(model), &hash)?;
    io::save_train_log(&log_path, &log)?;
    io::save_report(&report_path, &report, &hash)?;
    Ok(TrainOutcome {
        checkpoint: ckpt,
        log,
        report,
    })
}

/// Which frames to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn ids(self, d: &Dataset) -> &[u32] {
        match self {
            SplitName::Train => &d.split.train,
            SplitName::Val => &d.split.val,
            SplitName::Test => &d.split.test,
        }
    }
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        })
    }
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "val" => Ok(SplitName::Val),
            "test" => Ok(SplitName::Test),
            _ => Err(Error::Config(format!("unknown split '{s}' (expected train, val, test)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: ExtensionMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_threshold: Option<f64>,
    pub errors: HeightErrors,
    /// Projected points before any filtering.
    pub points: usize,
    /// Points kept by the filter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surviving_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub split: SplitName,
    pub frames: usize,
    pub mean_object_height: Option<f64>,
    pub dense: ModelReport,
    pub methods: Vec<MethodReport>,
}

/// Evaluate one extension method on `frames` against pre-computed GT.
pub fn evaluate_method(
    frames: &[&Frame],
    gts: &[(HeightMap, RegionPartition)],
    spec: &ExtensionSpec,
    store: Option<&PredictionStore>,
) -> Result<MethodReport> {
    let mut per_frame = Vec::with_capacity(frames.len());
    let (mut points, mut survivors) = (0, 0);
    for (f, (gt, part)) in frames.iter().zip(gts) {
        let heights: PointHeights = if spec.method == ExtensionMethod::Filter {
            let store = store.ok_or_else(|| Error::Config("filter needs predictions".into()))?;
            let (kept, h) = extend_filter(f, store, spec)?;
            survivors += kept.len();
            h
        } else {
            extend(f, spec, store)?
        };
        points += store
            .and_then(|s| s.frame(f.id))
            .map_or_else(|| part.radar_pixels.len(), |p| p.points.len());
        per_frame.push(FrameHeightErrors {
            frame: f.id,
            errors: point_height_errors(gt, part, &heights)?,
        });
    }
    let is_filter = spec.method == ExtensionMethod::Filter;
    Ok(MethodReport {
        method: spec.method,
        fixed_height: (spec.method == ExtensionMethod::Fixed).then_some(spec.fixed_height),
        filter_threshold: is_filter.then_some(spec.filter_threshold),
        errors: dataset_aggregate(per_frame).mean,
        points,
        surviving_points: is_filter.then_some(survivors),
    })
}

pub struct EvalRequest<'a> {
    pub checkpoint: &'a Path,
    pub split: SplitName,
    pub methods: &'a [ExtensionMethod],
    /// Render this many frames per method into `renders/`.
    pub render_frames: usize,
    pub force: bool,
}

pub fn cmd_eval(cfg: &ExperimentConfig, req: &EvalRequest) -> Result<EvalReport> {
    let cfg = cfg.clone().resolved()?;
    if let Some(m) = req.methods.iter().find(|m| **m == ExtensionMethod::Adaptive) {
        return Err(Error::NotImplemented(format!("extension method '{}'", m.name())));
    }
    let layout = OutputLayout::new(&cfg.output_dir);
    let name = req
        .checkpoint
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    let split_tag = req.split.to_string();
    let pred_path = layout.predictions(&format!("{name}-{split_tag}"));
    let report_path = layout.report(&format!("{name}-{split_tag}-eval"));
    for p in [&pred_path, &report_path] {
        ensure_writable(p, req.force)?;
    }

    let dataset = io::load_dataset(&layout.dataset())?;
    let checkpoint = io::load_checkpoint(req.checkpoint)?;
    let predictor = checkpoint.predictor();
    let frames = dataset.frames_of(req.split.ids(&dataset))?;
    if frames.is_empty() {
        return Err(Error::EmptyDataset(format!("split {split_tag} has no frames")));
    }
    let store = predict_dataset(predictor, frames.iter().copied())?;
    let dense = evaluate_predictor(predictor, &frames, cfg.eval.collapse_threshold)?;
    let gts = frames
        .iter()
        .map(|f| build_height_map(f))
        .collect::<Result<Vec<_>>>()?;

    let mut methods = Vec::new();
    for &method in req.methods {
        let base = ExtensionSpec { method, ..cfg.extension };
        if method == ExtensionMethod::Fixed {
            let mut heights = cfg.eval.fixed_sweep.clone();
            if !heights.contains(&cfg.extension.fixed_height) {
                heights.push(cfg.extension.fixed_height);
            }
            for h in heights {
                let spec = ExtensionSpec { fixed_height: h, ..base };
                methods.push(evaluate_method(&frames, &gts, &spec, Some(&store))?);
            }
        } else {
            methods.push(evaluate_method(&frames, &gts, &base, Some(&store))?);
        }
    }

    let n_obj: usize = frames.iter().map(|f| f.objects.len()).sum();
    let report = EvalReport {
        model: name,
        split: req.split,
        frames: frames.len(),
        mean_object_height: (n_obj > 0)
            .then(|| frames.iter().flat_map(|f| &f.objects).map(|o| o.height()).sum::<f64>() / n_obj as f64),
        dense,
        methods,
    };
    let hash = cfg.hash();
    io::save_predictions(&pred_path, &store, &hash)?;
    io::save_report(&report_path, &report, &hash)?;
    for f in frames.iter().take(req.render_frames) {
        for &method in req.methods {
            let spec = ExtensionSpec { method, ..cfg.extension };
            let path = layout.renders().join(format!("frame{:04}-{}.ppm", f.id, method.name()));
            overlay(f, &extend(f, &spec, Some(&store))?).save_ppm(&path)?;
        }
    }
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// Aligned comparison table of every evaluated method.
pub fn format_comparison(report: &EvalReport) -> String {
    let mut out = String::new();
    let d = &report.dense;
    let _ = writeln!(
        out,
        "model {} on {} frames ({}); mean object height {} m",
        report.model,
        report.frames,
        report.split,
        fmt_opt(report.mean_object_height)
    );
    let _ = writeln!(
        out,
        "dense map: BHE {}  RHE {}  RHE!=0 {}  RHE=0 {}  collapse ratio {}{}",
        fmt_opt(d.errors.mean.bhe),
        fmt_opt(d.errors.mean.rhe),
        fmt_opt(d.errors.mean.rhe_nonzero),
        fmt_opt(d.errors.mean.rhe_zero),
        fmt_opt(d.collapse_ratio),
        if d.collapsed { "  [COLLAPSED]" } else { "" }
    );
    let _ = writeln!(
        out,
        "{:<16} {:>9} {:>9} {:>9} {:>8} {:>8}",
        "method", "RHE", "RHE!=0", "RHE=0", "points", "kept"
    );
    for m in &report.methods {
        let label = match (m.method, m.fixed_height, m.filter_threshold) {
            (ExtensionMethod::Fixed, Some(h), _) => format!("fixed {h} m"),
            (ExtensionMethod::Filter, _, Some(t)) => format!("filter {t} m"),
            (method, ..) => method.name().to_string(),
        };
        let _ = writeln!(
            out,
            "{:<16} {:>9} {:>9} {:>9} {:>8} {:>8}",
            label,
            fmt_opt(m.errors.rhe),
            fmt_opt(m.errors.rhe_nonzero),
            fmt_opt(m.errors.rhe_zero),
            m.points,
            m.surviving_points.map_or_else(|| "-".into(), |s| s.to_string())
        );
    }
    out
}

/// Render one frame with the given method; needs a prediction store for
/// `direct` and `filter`.
pub fn cmd_render(
    cfg: &ExperimentConfig,
    frame_id: u32,
    method: ExtensionMethod,
    predictions: Option<&Path>,
    force: bool,
) -> Result<PathBuf> {
    let cfg = cfg.clone().resolved()?;
    if method == ExtensionMethod::Adaptive {
        return Err(Error::NotImplemented(format!("extension method '{}'", method.name())));
    }
    let layout = OutputLayout::new(&cfg.output_dir);
    let dataset = io::load_dataset(&layout.dataset())?;
    let frame = dataset.frame(frame_id).ok_or(Error::UnknownFrame(frame_id))?;
    let store = match (method.needs_predictions(), predictions) {
        (true, Some(p)) => Some(io::load_predictions(p)?),
        (true, None) => {
            return Err(Error::Config(format!(
                "method '{}' needs --predictions",
                method.name()
            )))
        }
        (false, _) => None,
    };
    let spec = ExtensionSpec { method, ..cfg.extension };
    let heights = extend(frame, &spec, store.as_ref())?;
    let path = layout.renders().join(format!("frame{frame_id:04}-{}.ppm", method.name()));
    ensure_writable(&path, force)?;
    overlay(frame, &heights).save_ppm(&path)?;
    Ok(path)
}

/// Depth metrics for a prediction/ground-truth file pair. Without a mask the
/// valid set is every pixel with positive ground truth.
pub fn cmd_depth(pred: &Path, gt: &Path, mask: Option<&Path>) -> Result<DepthErrorReport> {
    let p = io::load_depth_map(pred)?;
    let g = io::load_depth_map(gt)?;
    let valid = match mask {
        Some(m) => io::load_depth_map(m)?.mapv(|v| v != 0.0),
        None => g.mapv(|v| v > 0.0),
    };
    depth_errors(&p, &g, &valid)
}
