//! Per-point height predictions for the extension step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::network::ToyModel;
use super::train::model_inputs;
use crate::error::{Error, Result};
use crate::geometry::{project_point, Frame};
use crate::ground_truth::{build_height_map, HeightMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPrediction {
    pub id: u32,
    pub row: usize,
    pub col: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FramePredictions {
    /// Points that project into the image, in radar order.
    pub points: Vec<PointPrediction>,
}

/// Predicted heights keyed by frame id, then by radar point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionStore {
    frames: BTreeMap<u32, FramePredictions>,
}

impl PredictionStore {
    pub fn insert(&mut self, frame_id: u32, predictions: FramePredictions) {
        self.frames.insert(frame_id, predictions);
    }

    /// `None` when the frame was never predicted.
    pub fn frame(&self, frame_id: u32) -> Option<&FramePredictions> {
        self.frames.get(&frame_id)
    }

    pub fn point(&self, frame_id: u32, point_id: u32) -> Option<&PointPrediction> {
        self.frame(frame_id)?.points.iter().find(|p| p.id == point_id)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &FramePredictions)> {
        self.frames.iter().map(|(k, v)| (*k, v))
    }
}

/// Anything that produces a dense height map for a frame.
pub trait Predictor {
    fn predict_height(&self, frame: &Frame) -> Result<HeightMap>;
}

impl Predictor for ToyModel {
    fn predict_height(&self, frame: &Frame) -> Result<HeightMap> {
        let (visual, radar) = model_inputs(frame);
        Ok(self.forward(&visual, &radar)?.height)
    }
}

/// Returns the exact ground-truth map; an upper bound for any model.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthOracle;

impl Predictor for GroundTruthOracle {
    fn predict_height(&self, frame: &Frame) -> Result<HeightMap> {
        Ok(build_height_map(frame)?.0)
    }
}

/// Read the map at every projected radar point.
pub fn point_predictions(frame: &Frame, map: &HeightMap) -> Result<FramePredictions> {
    let (h, w) = frame.camera.dims();
    if map.dims() != (h, w) {
        return Err(Error::shape(format!("({h}, {w})"), format!("{:?}", map.dims())));
    }
    let points = frame
        .radar
        .iter()
        .filter_map(|p| {
            project_point(&frame.camera, &p.position).map(|px| PointPrediction {
                id: p.id,
                row: px.row,
                col: px.col,
                height: map.at(px),
            })
        })
        .collect();
    Ok(FramePredictions { points })
}

pub fn predict_dataset<'a, P: Predictor + ?Sized>(
    predictor: &P,
    frames: impl IntoIterator<Item = &'a Frame>,
) -> Result<PredictionStore> {
    let mut store = PredictionStore::default();
    for f in frames {
        let map = predictor.predict_height(f)?;
        store.insert(f.id, point_predictions(f, &map)?);
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SceneSpec};

    #[test]
    fn oracle_store_matches_gt_at_points() {
        let frames = generate(&SceneSpec {
            n_frames: 5,
            ..SceneSpec::default()
        })
        .unwrap();
        let store = predict_dataset(&GroundTruthOracle, &frames).unwrap();
        assert_eq!(store.len(), 5);
        for f in &frames {
            let (gt, _) = build_height_map(f).unwrap();
            for p in &store.frame(f.id).unwrap().points {
                assert_eq!(p.height, gt.values[[p.row, p.col]]);
            }
        }
        assert!(store.frame(99).is_none());
    }

    #[test]
    fn frame_without_radar_has_no_points() {
        let mut f = generate(&SceneSpec {
            n_frames: 1,
            ..SceneSpec::default()
        })
        .unwrap()
        .remove(0);
        f.radar.clear();
        f.associations = Some(Default::default());
        let store = predict_dataset(&GroundTruthOracle, [&f]).unwrap();
        assert!(store.frame(f.id).unwrap().points.is_empty());
    }
}
