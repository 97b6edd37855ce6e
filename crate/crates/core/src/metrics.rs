//! Height errors at radar pixels and depth-completion metrics.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_truth::{HeightMap, RegionPartition};
use crate::radar::PointHeights;

/// Mean absolute height errors of one frame. A field is `None` when its
/// support set is empty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeightErrors {
    /// Over RAD pixels.
    pub rhe: Option<f64>,
    /// Over every pixel of the map.
    pub bhe: Option<f64>,
    /// Over RAD pixels whose ground truth is non-zero.
    pub rhe_nonzero: Option<f64>,
    /// Over RAD pixels whose ground truth is zero.
    pub rhe_zero: Option<f64>,
    /// RAD pixels that entered `rhe`.
    pub radar_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameHeightErrors {
    pub frame: u32,
    #[serde(flatten)]
    pub errors: HeightErrors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightErrorReport {
    /// Unweighted mean of the per-frame values; `radar_pixels` is the total.
    pub mean: HeightErrors,
    pub frames: Vec<FrameHeightErrors>,
}

/// Incremental mean; exact when every input is the same value.
#[derive(Default)]
struct Mean {
    mean: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.mean += (v - self.mean) / self.n as f64;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }
}

fn check_dims(gt: &HeightMap, pred: &HeightMap, part: &RegionPartition) -> Result<()> {
    if gt.dims() != pred.dims() || gt.dims() != part.dims() {
        return Err(Error::shape(
            format!("gt {:?}", gt.dims()),
            format!("pred {:?}, partition {:?}", pred.dims(), part.dims()),
        ));
    }
    Ok(())
}

fn radar_errors(gt: &HeightMap, part: &RegionPartition, pred_at: impl Fn(&crate::ground_truth::RadarPixel) -> Option<f64>) -> HeightErrors {
    let (mut all, mut nonzero, mut zero) = (Mean::default(), Mean::default(), Mean::default());
    for rp in &part.radar_pixels {
        let Some(p) = pred_at(rp) else { continue };
        let g = gt.at(rp.pixel);
        let e = (g - p).abs();
        all.push(e);
        if g != 0.0 {
            nonzero.push(e);
        } else {
            zero.push(e);
        }
    }
    HeightErrors {
        rhe: all.get(),
        bhe: None,
        rhe_nonzero: nonzero.get(),
        rhe_zero: zero.get(),
        radar_pixels: all.n,
    }
}

/// Errors of a dense predicted map.
pub fn height_errors(gt: &HeightMap, pred: &HeightMap, part: &RegionPartition) -> Result<HeightErrors> {
    check_dims(gt, pred, part)?;
    let mut e = radar_errors(gt, part, |rp| Some(pred.at(rp.pixel)));
    let mut bhe = Mean::default();
    for (g, p) in gt.values.iter().zip(&pred.values) {
        bhe.push((g - p).abs());
    }
    e.bhe = bhe.get();
    Ok(e)
}

/// Errors when each RAD pixel takes its owning point's extension height.
///
/// Pixels whose owner is missing from `heights` (dropped by a filter) are
/// left out. BHE is undefined here.
pub fn point_height_errors(gt: &HeightMap, part: &RegionPartition, heights: &PointHeights) -> Result<HeightErrors> {
    if gt.dims() != part.dims() {
        return Err(Error::shape(format!("gt {:?}", gt.dims()), format!("partition {:?}", part.dims())));
    }
    Ok(radar_errors(gt, part, |rp| heights.get(&rp.point_id).copied()))
}

/// Frame-mean-then-dataset-mean; frames without a metric's support set are
/// skipped for that metric.
pub fn dataset_aggregate(frames: Vec<FrameHeightErrors>) -> HeightErrorReport {
    let mut m: [Mean; 4] = Default::default();
    let mut pixels = 0;
    for f in &frames {
        let e = &f.errors;
        for (acc, v) in m.iter_mut().zip([e.rhe, e.bhe, e.rhe_nonzero, e.rhe_zero]) {
            if let Some(v) = v {
                acc.push(v);
            }
        }
        pixels += e.radar_pixels;
    }
    HeightErrorReport {
        mean: HeightErrors {
            rhe: m[0].get(),
            bhe: m[1].get(),
            rhe_nonzero: m[2].get(),
            rhe_zero: m[3].get(),
            radar_pixels: pixels,
        },
        frames,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthErrorReport {
    pub mae: f64,
    pub rmse: f64,
    pub absrel: f64,
    /// Fractions with `max(d̂/d, d/d̂) < 1.25^n` for n = 1, 2, 3.
    pub delta: [f64; 3],
    pub pixels: usize,
}

/// Depth metrics over the valid mask. A non-positive prediction fails every
/// δ threshold.
pub fn depth_errors(pred: &Array2<f64>, gt: &Array2<f64>, valid: &Array2<bool>) -> Result<DepthErrorReport> {
    if pred.dim() != gt.dim() || valid.dim() != gt.dim() {
        return Err(Error::shape(
            format!("gt {:?}", gt.dim()),
            format!("pred {:?}, mask {:?}", pred.dim(), valid.dim()),
        ));
    }
    let (mut abs, mut sq, mut rel) = (Mean::default(), Mean::default(), Mean::default());
    let mut hits = [0usize; 3];
    for ((idx, &g), (&p, &ok)) in gt.indexed_iter().zip(pred.iter().zip(valid)) {
        if !ok {
            continue;
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Depth(format!("ground-truth depth {g} at {idx:?} must be > 0")));
        }
        if !p.is_finite() {
            return Err(Error::Depth(format!("predicted depth {p} at {idx:?} is not finite")));
        }
        let d = (p - g).abs();
        abs.push(d);
        sq.push(d * d);
        rel.push(d / g);
        let ratio = if p > 0.0 { (p / g).max(g / p) } else { f64::INFINITY };
        let mut thr = 1.0;
        for h in &mut hits {
            thr *= 1.25;
            if ratio < thr {
                *h += 1;
            }
        }
    }
    let n = abs.n;
    let (Some(mae), Some(ms), Some(absrel)) = (abs.get(), sq.get(), rel.get()) else {
        return Err(Error::Depth("valid mask is empty".into()));
    };
    Ok(DepthErrorReport {
        mae,
        rmse: ms.sqrt(),
        absrel,
        delta: hits.map(|h| h as f64 / n as f64),
        pixels: n,
    })
}

/// Pooled mean |Ĥ| over pooled mean ground truth, both at RAD pixels.
///
/// Values near zero mean the model has collapsed to predicting no height.
pub fn collapse_ratio<'a>(pairs: impl IntoIterator<Item = (&'a HeightMap, &'a HeightMap, &'a RegionPartition)>) -> Option<f64> {
    let (mut pred_sum, mut gt_sum) = (0.0, 0.0);
    for (gt, pred, part) in pairs {
        for rp in &part.radar_pixels {
            pred_sum += pred.at(rp.pixel).abs();
            gt_sum += gt.at(rp.pixel);
        }
    }
    (gt_sum > 0.0).then(|| pred_sum / gt_sum)
}
