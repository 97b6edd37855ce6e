//! Radar image rendering and height-extension preprocessing.
//!
//! Every surviving radar point is drawn as a vertical line that starts at its
//! projected pixel and rises by `round(h·fy/z)` rows, where `h` is the
//! extension height and `z` the point depth. All four channels (RCS, range,
//! vx, vy) are written along the line; nearer points overwrite farther ones.

use std::collections::BTreeMap;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_point, Frame};
use crate::model::PredictionStore;

/// Four-channel image-plane radar tensor `(rcs, range, vx, vy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarImage {
    pub data: Array3<f64>,
}

impl RadarImage {
    pub const RCS: usize = 0;
    pub const RANGE: usize = 1;
    pub const VX: usize = 2;
    pub const VY: usize = 3;

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            data: Array3::zeros((4, height, width)),
        }
    }

    pub fn painted_pixels(&self) -> usize {
        let (_, h, w) = self.data.dim();
        (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .filter(|&(r, c)| (0..4).any(|ch| self.data[[ch, r, c]] != 0.0))
            .count()
    }
}

/// Per-point extension height in meters, keyed by radar point id.
pub type PointHeights = BTreeMap<u32, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionMethod {
    /// Plain pixel-wise projection (no extension).
    None,
    Fixed,
    Direct,
    Filter,
    /// Adaptive height extension; the method slot exists but is not provided.
    #[serde(rename = "ah")]
    Adaptive,
}

impl ExtensionMethod {
    pub fn name(self) -> &'static str {
        match self {
            ExtensionMethod::None => "none",
            ExtensionMethod::Fixed => "fixed",
            ExtensionMethod::Direct => "direct",
            ExtensionMethod::Filter => "filter",
            ExtensionMethod::Adaptive => "ah",
        }
    }

    pub fn needs_predictions(self) -> bool {
        matches!(self, ExtensionMethod::Direct | ExtensionMethod::Filter)
    }
}

impl std::str::FromStr for ExtensionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ExtensionMethod::None),
            "fixed" | "fh" => Ok(ExtensionMethod::Fixed),
            "direct" => Ok(ExtensionMethod::Direct),
            "filter" => Ok(ExtensionMethod::Filter),
            "ah" | "adaptive" => Ok(ExtensionMethod::Adaptive),
            _ => Err(Error::Config(format!(
                "unknown extension method '{s}' (expected none, fixed, direct, filter, ah)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtensionSpec {
    pub method: ExtensionMethod,
    pub fixed_height: f64,
    pub filter_threshold: f64,
}

impl Default for ExtensionSpec {
    fn default() -> Self {
        Self {
            method: ExtensionMethod::Filter,
            fixed_height: 2.0,
            filter_threshold: 0.5,
        }
    }
}

impl ExtensionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_height > 0.0 && self.fixed_height.is_finite()) {
            return Err(Error::Config(format!(
                "extension.fixed_height must be > 0, got {}",
                self.fixed_height
            )));
        }
        if !(self.filter_threshold >= 0.0 && self.filter_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "extension.filter_threshold must be >= 0, got {}",
                self.filter_threshold
            )));
        }
        Ok(())
    }
}

/// One rendered vertical segment, rows inclusive with `row_top <= row_bottom`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionLine {
    pub point_id: u32,
    pub col: usize,
    pub row_top: usize,
    pub row_bottom: usize,
}

/// Number of rows above the projected pixel covered by height `h` at depth `z`.
pub fn line_extent(fy: f64, height: f64, depth: f64) -> usize {
    (height.max(0.0) * fy / depth + 0.5).floor() as usize
}

/// Lines for every point present in `heights`, in painting order (far first).
pub fn extension_lines(frame: &Frame, heights: &PointHeights) -> Vec<ExtensionLine> {
    let mut pts: Vec<_> = frame
        .radar
        .iter()
        .filter_map(|p| heights.get(&p.id).map(|h| (p, *h)))
        .collect();
    pts.sort_by(|(a, _), (b, _)| b.range().total_cmp(&a.range()).then(b.id.cmp(&a.id)));
    pts.into_iter()
        .filter_map(|(p, h)| {
            let px = project_point(&frame.camera, &p.position)?;
            let extent = line_extent(frame.camera.fy, h, p.position.z);
            Some(ExtensionLine {
                point_id: p.id,
                col: px.col,
                row_top: px.row.saturating_sub(extent),
                row_bottom: px.row,
            })
        })
        .collect()
}

/// Paint the radar image for the surviving points in `heights`.
pub fn render_radar_image(frame: &Frame, heights: &PointHeights) -> RadarImage {
    let mut img = RadarImage::zeros(frame.camera.height, frame.camera.width);
    let by_id: BTreeMap<u32, _> = frame.radar.iter().map(|p| (p.id, p)).collect();
    for line in extension_lines(frame, heights) {
        let p = by_id[&line.point_id];
        let values = [p.rcs, p.range(), p.vx, p.vy];
        for r in line.row_top..=line.row_bottom {
            for (ch, v) in values.iter().enumerate() {
                img.data[[ch, r, line.col]] = *v;
            }
        }
    }
    img
}

/// Zero extension for every point: the plain projection used as model input.
pub fn projection_heights(frame: &Frame) -> PointHeights {
    frame.radar.iter().map(|p| (p.id, 0.0)).collect()
}

pub fn extend_fixed(frame: &Frame, spec: &ExtensionSpec) -> PointHeights {
    frame.radar.iter().map(|p| (p.id, spec.fixed_height)).collect()
}

/// Replace each point's extension with the model's prediction at its pixel.
pub fn extend_direct(frame: &Frame, predictions: &PredictionStore) -> Result<PointHeights> {
    let stored = predictions
        .frame(frame.id)
        .ok_or(Error::MissingPrediction(frame.id))?;
    Ok(stored.points.iter().map(|p| (p.id, p.height)).collect())
}

/// Drop points predicted below the threshold; survivors keep their predictions.
pub fn extend_filter(
    frame: &Frame,
    predictions: &PredictionStore,
    spec: &ExtensionSpec,
) -> Result<(Vec<u32>, PointHeights)> {
    let heights: PointHeights = extend_direct(frame, predictions)?
        .into_iter()
        .filter(|(_, h)| *h >= spec.filter_threshold)
        .collect();
    Ok((heights.keys().copied().collect(), heights))
}

/// Heights for any method. `Direct` and `Filter` need a prediction store.
pub fn extend(frame: &Frame, spec: &ExtensionSpec, predictions: Option<&PredictionStore>) -> Result<PointHeights> {
    let need = || {
        predictions.ok_or_else(|| Error::Config(format!("method '{}' needs a prediction store", spec.method.name())))
    };
    match spec.method {
        ExtensionMethod::None => Ok(projection_heights(frame)),
        ExtensionMethod::Fixed => Ok(extend_fixed(frame, spec)),
        ExtensionMethod::Direct => extend_direct(frame, need()?),
        ExtensionMethod::Filter => Ok(extend_filter(frame, need()?, spec)?.1),
        ExtensionMethod::Adaptive => Err(Error::NotImplemented(
            "adaptive height (AH) extension".to_string(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraModel, Point3, RadarPoint};
    use crate::model::{FramePredictions, PointPrediction};

    fn frame(points: Vec<RadarPoint>) -> Frame {
        Frame {
            id: 3,
            camera: CameraModel {
                fx: 80.0,
                fy: 80.0,
                cx: 48.0,
                cy: 32.0,
                width: 96,
                height: 64,
            },
            radar: points,
            objects: vec![],
            associations: None,
        }
    }

    fn pt(id: u32, p: Point3, rcs: f64) -> RadarPoint {
        RadarPoint {
            id,
            position: p,
            rcs,
            vx: 1.0,
            vy: -1.0,
        }
    }

    fn store(frame_id: u32, heights: &[(u32, f64)]) -> PredictionStore {
        let mut s = PredictionStore::default();
        s.insert(
            frame_id,
            FramePredictions {
                points: heights
                    .iter()
                    .map(|&(id, height)| PointPrediction {
                        id,
                        row: 0,
                        col: 0,
                        height,
                    })
                    .collect(),
            },
        );
        s
    }

    #[test]
    fn zero_height_is_single_pixel() {
        let f = frame(vec![pt(0, Point3::new(0.0, 0.5, 10.0), 5.0)]);
        let img = render_radar_image(&f, &projection_heights(&f));
        assert_eq!(img.painted_pixels(), 1);
        assert_eq!(img.data[[RadarImage::RCS, 36, 48]], 5.0);
        assert!((img.data[[RadarImage::RANGE, 36, 48]] - (100.0f64 + 0.25).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn line_length_follows_pinhole_extent() {
        let p = Point3::new(0.0, 1.0, 8.0);
        let f = frame(vec![pt(0, p, 5.0)]);
        let h = 1.5;
        let lines = extension_lines(&f, &BTreeMap::from([(0, h)]));
        let l = lines[0];
        // round(1.5 * 80 / 8) = 15
        assert_eq!(l.row_bottom - l.row_top, 15);
        let top = project_point(&f.camera, &Point3::new(p.x, p.y - h, p.z)).unwrap();
        assert!((l.row_top as i64 - top.row as i64).abs() <= 1);
    }

    #[test]
    fn nearer_point_wins_overlap() {
        let f = frame(vec![
            pt(0, Point3::new(0.0, 1.0, 20.0), 1.0),
            pt(1, Point3::new(0.0, 1.0, 10.0), 2.0),
        ]);
        let heights = BTreeMap::from([(0, 10.0), (1, 10.0)]);
        let img = render_radar_image(&f, &heights);
        // Far line covers rows 0..=36, near line 0..=40: the overlap is the near point's.
        for r in 0..=40 {
            assert_eq!(img.data[[RadarImage::RCS, r, 48]], 2.0, "row {r}");
        }
        assert_eq!(img.data[[RadarImage::RCS, 41, 48]], 0.0);

        // Brute-force painter's order oracle: nearest covering line per pixel.
        let lines = extension_lines(&f, &heights);
        for r in 0..64 {
            let owner = lines
                .iter()
                .filter(|l| (l.row_top..=l.row_bottom).contains(&r) && l.col == 48)
                .min_by(|a, b| {
                    let ra = f.radar[a.point_id as usize].range();
                    let rb = f.radar[b.point_id as usize].range();
                    ra.total_cmp(&rb)
                });
            let want = owner.map_or(0.0, |l| f.radar[l.point_id as usize].rcs);
            assert_eq!(img.data[[RadarImage::RCS, r, 48]], want);
        }
    }

    #[test]
    fn filter_drops_low_points() {
        let f = frame(vec![
            pt(0, Point3::new(0.0, 1.0, 10.0), 1.0),
            pt(1, Point3::new(1.0, 1.0, 10.0), 1.0),
            pt(2, Point3::new(2.0, 1.0, 10.0), 1.0),
        ]);
        let s = store(3, &[(0, 0.3), (1, 0.7), (2, 1.2)]);
        let spec = ExtensionSpec::default();
        let (kept, heights) = extend_filter(&f, &s, &spec).unwrap();
        assert_eq!(kept, vec![1, 2]);
        assert_eq!(heights[&1], 0.7);

        let zero = ExtensionSpec {
            filter_threshold: 0.0,
            ..spec
        };
        assert_eq!(extend_filter(&f, &s, &zero).unwrap().0.len(), 3);

        let low = store(3, &[(0, 0.1), (1, 0.2), (2, 0.3)]);
        let (kept, heights) = extend_filter(&f, &low, &spec).unwrap();
        assert!(kept.is_empty());
        assert_eq!(render_radar_image(&f, &heights).painted_pixels(), 0);
    }

    #[test]
    fn direct_needs_frame_predictions() {
        let f = frame(vec![pt(0, Point3::new(0.0, 1.0, 10.0), 1.0)]);
        let s = store(99, &[(0, 1.7)]);
        assert!(matches!(extend_direct(&f, &s), Err(Error::MissingPrediction(3))));
        let s = store(3, &[(0, 1.7)]);
        assert_eq!(extend_direct(&f, &s).unwrap()[&0], 1.7);
    }

    #[test]
    fn fixed_and_adaptive() {
        let f = frame((0..5).map(|i| pt(i, Point3::new(0.0, 1.0, 10.0 + i as f64), 1.0)).collect());
        let spec = ExtensionSpec {
            method: ExtensionMethod::Fixed,
            ..Default::default()
        };
        let h = extend(&f, &spec, None).unwrap();
        assert_eq!(h.len(), 5);
        assert!(h.values().all(|v| *v == 2.0));
        assert!(extend_fixed(&frame(vec![]), &spec).is_empty());

        let ah = ExtensionSpec {
            method: ExtensionMethod::Adaptive,
            ..Default::default()
        };
        assert!(matches!(extend(&f, &ah, None), Err(Error::NotImplemented(_))));
    }
}
