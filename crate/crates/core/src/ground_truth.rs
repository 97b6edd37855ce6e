//! Ground-truth height maps, BG/FG/RAD partitions and free-space masks.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{associate, project_box_2d, project_point, Box2D, Box3D, Frame, Pixel};

/// Dense per-pixel heights in meters, indexed `[row, col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub values: Array2<f64>,
}

impl HeightMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            values: Array2::zeros((height, width)),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn at(&self, px: Pixel) -> f64 {
        self.values[[px.row, px.col]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Region {
    #[default]
    Background,
    Foreground,
    Radar,
}

/// A pixel claimed by a radar point after collision resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPixel {
    pub pixel: Pixel,
    pub point_id: u32,
    pub object: Option<u32>,
    /// Euclidean range of the owning point.
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    pub labels: Array2<Region>,
    /// RAD pixels in row-major order.
    pub radar_pixels: Vec<RadarPixel>,
}

impl RegionPartition {
    pub fn dims(&self) -> (usize, usize) {
        self.labels.dim()
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|r| **r == region).count()
    }
}

/// Two-channel segmentation mask (or predicted probabilities).
///
/// Channel 0 is free space, channel 1 occupied space.
#[derive(Debug, Clone, PartialEq)]
pub struct SegMask {
    pub data: Array3<f64>,
}

impl SegMask {
    pub fn dims(&self) -> (usize, usize) {
        let (_, h, w) = self.data.dim();
        (h, w)
    }

    pub fn free_space(&self) -> ndarray::ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), 0)
    }

    pub fn occupied(&self) -> ndarray::ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), 1)
    }
}

/// Projected 2D boxes of all visible objects, in the frame's object order.
pub fn object_boxes_2d(frame: &Frame) -> Vec<(&Box3D, Box2D)> {
    frame
        .objects
        .iter()
        .filter_map(|b| project_box_2d(&frame.camera, b).map(|r| (b, r)))
        .collect()
}

/// Radar pixels after collision resolution: the nearer point keeps a shared
/// pixel (ties go to the smaller id).
pub fn radar_pixels(frame: &Frame) -> Vec<RadarPixel> {
    let assoc = associate(frame);
    let mut owners: std::collections::BTreeMap<Pixel, RadarPixel> = Default::default();
    for p in &frame.radar {
        let Some(pixel) = project_point(&frame.camera, &p.position) else {
            continue;
        };
        let candidate = RadarPixel {
            pixel,
            point_id: p.id,
            object: assoc.get(&p.id).copied().flatten(),
            range: p.range(),
        };
        owners
            .entry(pixel)
            .and_modify(|cur| {
                let nearer = candidate
                    .range
                    .total_cmp(&cur.range)
                    .then(candidate.point_id.cmp(&cur.point_id))
                    .is_lt();
                if nearer {
                    *cur = candidate;
                }
            })
            .or_insert(candidate);
    }
    owners.into_values().collect()
}

fn check_dims(frame: &Frame) -> Result<(usize, usize)> {
    let (h, w) = frame.camera.dims();
    if h == 0 || w == 0 {
        return Err(Error::Invariant {
            frame: frame.id as usize,
            field: "camera".into(),
            message: format!("zero image dims {h}x{w}"),
        });
    }
    Ok((h, w))
}

/// Build the ground-truth height map and its region partition.
///
/// Box pixels carry the height of the nearest covering object (by center
/// range). Radar pixels override boxes and carry the associated object's
/// height, or zero for points that belong to no object in 3D even when they
/// land inside a 2D box.
pub fn build_height_map(frame: &Frame) -> Result<(HeightMap, RegionPartition)> {
    let (h, w) = check_dims(frame)?;
    let mut values = Array2::<f64>::zeros((h, w));
    let mut labels = Array2::<Region>::default((h, w));

    let mut boxes = object_boxes_2d(frame);
    // Paint far to near so the nearest object wins overlaps.
    boxes.sort_by(|(a, _), (b, _)| {
        b.center
            .norm()
            .total_cmp(&a.center.norm())
            .then(b.id.cmp(&a.id))
    });
    for (obj, rect) in &boxes {
        for r in rect.row_min..=rect.row_max {
            for c in rect.col_min..=rect.col_max {
                values[[r, c]] = obj.height();
                labels[[r, c]] = Region::Foreground;
            }
        }
    }

    let rad = radar_pixels(frame);
    for rp in &rad {
        let height = rp
            .object
            .and_then(|m| frame.object(m))
            .map_or(0.0, Box3D::height);
        values[[rp.pixel.row, rp.pixel.col]] = height;
        labels[[rp.pixel.row, rp.pixel.col]] = Region::Radar;
    }

    Ok((
        HeightMap { values },
        RegionPartition {
            labels,
            radar_pixels: rad,
        },
    ))
}

/// Free-space mask: channel 0 is 1 outside every projected box.
pub fn build_seg_mask(frame: &Frame) -> Result<SegMask> {
    let (h, w) = check_dims(frame)?;
    let mut data = Array3::<f64>::zeros((2, h, w));
    data.index_axis_mut(ndarray::Axis(0), 0).fill(1.0);
    for (_, rect) in object_boxes_2d(frame) {
        for r in rect.row_min..=rect.row_max {
            for c in rect.col_min..=rect.col_max {
                data[[0, r, c]] = 0.0;
                data[[1, r, c]] = 1.0;
            }
        }
    }
    Ok(SegMask { data })
}
