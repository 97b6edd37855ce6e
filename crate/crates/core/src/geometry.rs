//! Camera-frame scene geometry.
//!
//! Conventions: the camera frame has x to the right, y pointing down and z
//! along the optical axis. Image rows grow with y, columns with x. Boxes rotate
//! about the vertical (y) axis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Integer pixel coordinate, row first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return Err(format!("image dims must be non-zero ({}x{})", self.height, self.width));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(format!("cx={} outside [0, {})", self.cx, self.width));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(format!("cy={} outside [0, {})", self.cy, self.height));
        }
        Ok(())
    }

    /// Continuous image coordinates `(row, col)` of a point in front of the camera.
    pub fn project_continuous(&self, p: &Point3) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fy * p.y / p.z + self.cy, self.fx * p.x / p.z + self.cx))
    }

    /// Unit-depth ray through continuous image coordinates.
    pub fn ray(&self, row: f64, col: f64) -> Point3 {
        Point3::new((col - self.cx) / self.fx, (row - self.cy) / self.fy, 1.0)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub id: u32,
    /// Camera-frame position in meters.
    pub position: Point3,
    /// Radar cross section in dBsm.
    pub rcs: f64,
    pub vx: f64,
    pub vy: f64,
}

impl RadarPoint {
    /// Euclidean range from the sensor origin.
    pub fn range(&self) -> f64 {
        self.position.norm()
    }
}

/// Box size: length along local x, width along local z, height along local y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSize {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub id: u32,
    pub center: Point3,
    pub size: BoxSize,
    /// Rotation about the vertical axis, radians.
    pub yaw: f64,
}

impl Box3D {
    /// Object height in meters.
    pub fn height(&self) -> f64 {
        self.size.height
    }

    /// Express `p` in the box frame (origin at the center, unrotated axes).
    pub fn to_local(&self, p: &Point3) -> Point3 {
        let (s, c) = self.yaw.sin_cos();
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let dz = p.z - self.center.z;
        Point3::new(c * dx - s * dz, dy, s * dx + c * dz)
    }

    pub fn to_camera(&self, local: &Point3) -> Point3 {
        let (s, c) = self.yaw.sin_cos();
        Point3::new(
            c * local.x + s * local.z + self.center.x,
            local.y + self.center.y,
            -s * local.x + c * local.z + self.center.z,
        )
    }

    pub fn corners(&self) -> [Point3; 8] {
        let hl = self.size.length / 2.0;
        let hh = self.size.height / 2.0;
        let hw = self.size.width / 2.0;
        let mut out = [Point3::default(); 8];
        let mut n = 0;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    out[n] = self.to_camera(&Point3::new(sx * hl, sy * hh, sz * hw));
                    n += 1;
                }
            }
        }
        out
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Box2D {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl Box2D {
    pub fn contains(&self, px: Pixel) -> bool {
        (self.row_min..=self.row_max).contains(&px.row)
            && (self.col_min..=self.col_max).contains(&px.col)
    }

    pub fn area(&self) -> usize {
        (self.row_max - self.row_min + 1) * (self.col_max - self.col_min + 1)
    }
}

/// One time step: camera, radar returns and annotated objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub id: u32,
    pub camera: CameraModel,
    pub radar: Vec<RadarPoint>,
    pub objects: Vec<Box3D>,
    /// Known radar-point → object assignment (synthetic ground truth).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub associations: Option<BTreeMap<u32, u32>>,
}

impl Frame {
    /// Check the frame invariants; on failure returns `(field, message)`.
    pub fn validate(&self) -> Result<(), (String, String)> {
        self.camera
            .validate()
            .map_err(|m| ("camera".to_string(), m))?;
        let mut seen = std::collections::BTreeSet::new();
        for (n, b) in self.objects.iter().enumerate() {
            if !seen.insert(b.id) {
                return Err((format!("objects[{n}].id"), format!("duplicate object id {}", b.id)));
            }
            let s = b.size;
            if !(s.length > 0.0 && s.width > 0.0 && s.height > 0.0) {
                return Err((format!("objects[{n}].size"), "all size components must be > 0".into()));
            }
            if !b.center.is_finite() || !b.yaw.is_finite() {
                return Err((format!("objects[{n}]"), "non-finite pose".into()));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (n, p) in self.radar.iter().enumerate() {
            if !seen.insert(p.id) {
                return Err((format!("radar[{n}].id"), format!("duplicate radar id {}", p.id)));
            }
            if !p.position.is_finite() || !p.rcs.is_finite() || !p.vx.is_finite() || !p.vy.is_finite() {
                return Err((format!("radar[{n}]"), "non-finite value".into()));
            }
        }
        if let Some(assoc) = &self.associations {
            for (k, m) in assoc {
                if !self.radar.iter().any(|p| p.id == *k) {
                    return Err(("associations".into(), format!("unknown radar id {k}")));
                }
                if !self.objects.iter().any(|b| b.id == *m) {
                    return Err(("associations".into(), format!("radar {k} maps to unknown object {m}")));
                }
            }
        }
        Ok(())
    }

    pub fn object(&self, id: u32) -> Option<&Box3D> {
        self.objects.iter().find(|b| b.id == id)
    }
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Pixel holding `p`, or `None` when behind the camera or outside the image.
pub fn project_point(cam: &CameraModel, p: &Point3) -> Option<Pixel> {
    let (r, c) = cam.project_continuous(p)?;
    let (r, c) = (round_half_up(r), round_half_up(c));
    if r >= 0.0 && c >= 0.0 && r < cam.height as f64 && c < cam.width as f64 {
        Some(Pixel {
            row: r as usize,
            col: c as usize,
        })
    } else {
        None
    }
}

/// Boundary-inclusive containment test in the box's yaw-rotated frame.
pub fn point_in_box_3d(b: &Box3D, p: &Point3) -> bool {
    let l = b.to_local(p);
    l.x.abs() <= b.size.length / 2.0 && l.y.abs() <= b.size.height / 2.0 && l.z.abs() <= b.size.width / 2.0
}

/// Image-aligned rectangle enclosing the visible corners, clipped to the image.
pub fn project_box_2d(cam: &CameraModel, b: &Box3D) -> Option<Box2D> {
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for corner in b.corners() {
        if let Some((r, c)) = cam.project_continuous(&corner) {
            any = true;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
            cmin = cmin.min(c);
            cmax = cmax.max(c);
        }
    }
    if !any {
        return None;
    }
    let (h, w) = (cam.height as f64, cam.width as f64);
    let (rmin, rmax) = (round_half_up(rmin).max(0.0), round_half_up(rmax).min(h - 1.0));
    let (cmin, cmax) = (round_half_up(cmin).max(0.0), round_half_up(cmax).min(w - 1.0));
    if rmin > rmax || cmin > cmax {
        return None;
    }
    Some(Box2D {
        row_min: rmin as usize,
        row_max: rmax as usize,
        col_min: cmin as usize,
        col_max: cmax as usize,
    })
}

/// Radar point id → containing object id.
///
/// Explicit associations win when present. Otherwise a point inside several
/// boxes goes to the box whose center is closest to the point.
pub fn associate(frame: &Frame) -> BTreeMap<u32, Option<u32>> {
    if let Some(explicit) = &frame.associations {
        return frame
            .radar
            .iter()
            .map(|p| (p.id, explicit.get(&p.id).copied()))
            .collect();
    }
    frame
        .radar
        .iter()
        .map(|p| {
            let best = frame
                .objects
                .iter()
                .filter(|b| point_in_box_3d(b, &p.position))
                .map(|b| (b.center.distance(&p.position), b.id))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            (p.id, best.map(|(_, id)| id))
        })
        .collect()
}

/// Sanity check used by loaders; converts to the crate error type.
pub fn validate_frame(index: usize, frame: &Frame) -> Result<()> {
    frame.validate().map_err(|(field, message)| Error::Invariant {
        frame: index,
        field,
        message,
    })
}
