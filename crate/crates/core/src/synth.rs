//! Seeded synthetic scenes with exact ground truth.
//!
//! Objects stand on a flat ground plane `camera_height` meters below the
//! camera. Associated radar returns sit on the camera-facing side of their
//! box; clutter is scattered over the visible ground and never lies inside a
//! box. A share of the clutter is made to look like object returns: it is
//! moved along the viewing ray of a surface point to in front of or behind the
//! box, so it lands inside the 2D box while belonging to no object. RCS and
//! velocity follow the same distributions for both kinds of return, leaving
//! association genuinely ambiguous from the radar channels alone.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    point_in_box_3d, project_box_2d, project_point, Box3D, BoxSize, CameraModel, Frame, Pixel, Point3, RadarPoint,
};
use crate::ground_truth::object_boxes_2d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_frames: usize,
    /// Inclusive `[min, max]` object count.
    pub objects_per_frame: (usize, usize),
    pub object_height_range: (f64, f64),
    /// Depth range of object centers, meters.
    pub object_distance_range: (f64, f64),
    pub points_per_object: (usize, usize),
    pub clutter_points: (usize, usize),
    pub clutter_distance_range: (f64, f64),
    /// Probability that a clutter return is placed inside some 2D box
    /// (off the box in depth) rather than on open ground.
    pub inside_box_unassociated_rate: f64,
    pub camera: CameraModel,
    /// Camera height above the ground plane, meters.
    pub camera_height: f64,
    /// Standard deviation of radar position jitter, meters.
    pub noise: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_frames: 500,
            objects_per_frame: (1, 4),
            object_height_range: (0.5, 3.0),
            object_distance_range: (5.0, 40.0),
            points_per_object: (1, 2),
            clutter_points: (10, 20),
            clutter_distance_range: (3.0, 50.0),
            inside_box_unassociated_rate: 0.45,
            camera: CameraModel {
                fx: 80.0,
                fy: 80.0,
                cx: 48.0,
                cy: 32.0,
                width: 96,
                height: 64,
            },
            camera_height: 1.5,
            noise: 0.05,
        }
    }
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, r: (T, T), positive: bool, zero: T) -> Result<()> {
    if r.0 > r.1 || (positive && r.0 <= zero) || (!positive && r.0 < zero) {
        return Err(Error::Config(format!("scene.{name} must be a non-empty range, got {r:?}")));
    }
    Ok(())
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::Config("scene.n_frames must be >= 1".into()));
        }
        check_range("objects_per_frame", self.objects_per_frame, false, 0)?;
        check_range("points_per_object", self.points_per_object, false, 0)?;
        check_range("clutter_points", self.clutter_points, false, 0)?;
        check_range("object_height_range", self.object_height_range, true, 0.0)?;
        check_range("object_distance_range", self.object_distance_range, true, 0.0)?;
        check_range("clutter_distance_range", self.clutter_distance_range, true, 0.0)?;
        if !(0.0..=1.0).contains(&self.inside_box_unassociated_rate) {
            return Err(Error::Config("scene.inside_box_unassociated_rate must be in [0, 1]".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config("scene.noise must be >= 0".into()));
        }
        if !(self.camera_height > 0.0 && self.camera_height.is_finite()) {
            return Err(Error::Config("scene.camera_height must be > 0".into()));
        }
        self.camera.validate().map_err(|m| Error::Config(format!("scene.camera: {m}")))?;
        // Nearest objects must still show their base inside the image.
        let base_row = self.camera.cy + self.camera.fy * self.camera_height / self.object_distance_range.1;
        if base_row >= self.camera.height as f64 {
            return Err(Error::Infeasible(format!(
                "objects at {} m stand below the image bottom",
                self.object_distance_range.1
            )));
        }
        Ok(())
    }
}

/// Frame ids of each partition.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: SceneSpec,
    pub frames: Vec<Frame>,
    pub split: Split,
}

impl Dataset {
    pub fn frame(&self, id: u32) -> Option<&Frame> {
        self.frames
            .binary_search_by_key(&id, |f| f.id)
            .ok()
            .map(|i| &self.frames[i])
            .or_else(|| self.frames.iter().find(|f| f.id == id))
    }

    pub fn frames_of(&self, ids: &[u32]) -> Result<Vec<&Frame>> {
        ids.iter()
            .map(|id| self.frame(*id).ok_or(Error::UnknownFrame(*id)))
            .collect()
    }
}

struct Sampler<'a> {
    spec: &'a SceneSpec,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    fn uniform(&mut self, r: (f64, f64)) -> f64 {
        if r.0 == r.1 {
            r.0
        } else {
            self.rng.gen_range(r.0..r.1)
        }
    }

    fn count(&mut self, r: (usize, usize)) -> usize {
        self.rng.gen_range(r.0..=r.1)
    }

    fn normal(&mut self, sd: f64) -> f64 {
        // Box-Muller; one draw per call keeps the stream layout simple.
        let u1: f64 = self.rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = self.rng.gen();
        sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn ground_y(&self) -> f64 {
        self.spec.camera_height
    }

    fn object(&mut self, id: u32, placed: &[Box3D]) -> Option<Box3D> {
        let cam = self.spec.camera;
        for _ in 0..200 {
            let height = self.uniform(self.spec.object_height_range);
            let depth = self.uniform(self.spec.object_distance_range);
            let col = self.uniform((0.1 * cam.width as f64, 0.9 * cam.width as f64));
            let size = BoxSize {
                length: self.uniform((0.5, 4.5)),
                width: self.uniform((0.5, 2.2)),
                height,
            };
            let b = Box3D {
                id,
                center: Point3::new((col - cam.cx) * depth / cam.fx, self.ground_y() - height / 2.0, depth),
                size,
                yaw: self.uniform((-std::f64::consts::PI, std::f64::consts::PI)),
            };
            let radius = |b: &Box3D| 0.5 * b.size.length.hypot(b.size.width);
            let clear = placed.iter().all(|o| {
                let d = (o.center.x - b.center.x).hypot(o.center.z - b.center.z);
                d > radius(o) + radius(&b) + 0.3
            });
            // Keep the whole footprint in front of the camera.
            let in_front = b.corners().iter().all(|c| c.z > 0.5);
            if clear && in_front && project_box_2d(&cam, &b).is_some() {
                return Some(b);
            }
        }
        None
    }

    /// A return on the camera-facing side of `b`, strictly inside the box.
    fn surface_point(&mut self, b: &Box3D) -> Point3 {
        let eye = b.to_local(&Point3::default());
        let (hl, hw, hh) = (b.size.length / 2.0, b.size.width / 2.0, b.size.height / 2.0);
        // Face whose outward normal points most toward the camera.
        let along_x = eye.x.abs() / hl >= eye.z.abs() / hw;
        // Stay off the faces themselves so the point survives the round trip
        // to camera coordinates still inside.
        const KEEP_IN: f64 = 1.0 - 1e-9;
        let inset = |s: &mut Self, half: f64| (half - s.normal(s.spec.noise).abs()).clamp(0.0, half * KEEP_IN);
        let elevation = self.uniform((0.0, hh.min(0.6) * 2.0));
        let local_y = (hh - elevation + self.normal(self.spec.noise)).clamp(-hh * KEEP_IN, hh * KEEP_IN);
        let local = if along_x {
            let x = inset(self, hl) * eye.x.signum();
            Point3::new(x, local_y, self.uniform((-0.9 * hw, 0.9 * hw)))
        } else {
            let z = inset(self, hw) * eye.z.signum();
            Point3::new(self.uniform((-0.9 * hl, 0.9 * hl)), local_y, z)
        };
        b.to_camera(&local)
    }

    fn clutter_position(&mut self, objects: &[Box3D]) -> Option<Point3> {
        let cam = self.spec.camera;
        for _ in 0..50 {
            let depth = self.uniform(self.spec.clutter_distance_range);
            let col = self.uniform((0.0, cam.width as f64));
            let elevation = self.uniform((0.0, 1.0));
            let p = Point3::new((col - cam.cx) * depth / cam.fx, self.ground_y() - elevation, depth);
            if objects.iter().all(|b| !point_in_box_3d(b, &p)) {
                return Some(p);
            }
        }
        None
    }

    /// A return that looks like an object return (same image position) but
    /// sits in front of or behind the box along the viewing ray.
    fn hard_clutter(&mut self, frame: &Frame, occupied: &BTreeSet<Pixel>) -> Option<Point3> {
        let visible: Vec<&Box3D> = object_boxes_2d(frame).into_iter().map(|(b, _)| b).collect();
        if visible.is_empty() {
            return None;
        }
        for _ in 0..100 {
            let b = visible[self.rng.gen_range(0..visible.len())];
            let surface = self.surface_point(b);
            let scale = if self.rng.gen_bool(0.5) {
                1.0 - self.uniform((0.1, 0.4))
            } else {
                1.0 + self.uniform((0.1, 0.6))
            };
            let p = surface.scale(scale);
            let Some(px) = project_point(&frame.camera, &p) else { continue };
            if !occupied.contains(&px) && frame.objects.iter().all(|o| !point_in_box_3d(o, &p)) {
                return Some(p);
            }
        }
        None
    }

    /// RCS and velocity; identical distributions for object and clutter
    /// returns, except that an object's returns share its velocity.
    fn attributes(&mut self, object_velocity: Option<(f64, f64)>) -> (f64, f64, f64) {
        let rcs = 5.0 + self.normal(5.0);
        let (vx, vy) = object_velocity.unwrap_or_else(|| self.velocity());
        (rcs, vx + self.normal(0.2), vy + self.normal(0.2))
    }

    fn velocity(&mut self) -> (f64, f64) {
        if self.rng.gen_bool(0.4) {
            (self.uniform((-4.0, 4.0)), self.uniform((-8.0, 8.0)))
        } else {
            (0.0, 0.0)
        }
    }

    fn frame(&mut self, id: u32) -> Result<Frame> {
        let spec = self.spec;
        let mut objects = Vec::new();
        let n_obj = self.count(spec.objects_per_frame);
        for m in 0..n_obj {
            let b = self.object(m as u32, &objects).ok_or_else(|| {
                Error::Infeasible(format!("could not place {n_obj} non-overlapping objects in frame {id}"))
            })?;
            objects.push(b);
        }

        let mut radar = Vec::new();
        let mut associations = BTreeMap::new();
        let mut next_id = 0u32;
        for b in &objects {
            let v = self.velocity();
            for _ in 0..self.count(spec.points_per_object) {
                let position = self.surface_point(b);
                debug_assert!(point_in_box_3d(b, &position));
                radar.push(self.point(next_id, position, Some(v)));
                associations.insert(next_id, b.id);
                next_id += 1;
            }
        }

        let n_clutter = self.count(spec.clutter_points);
        let n_hard = if objects.is_empty() {
            0
        } else {
            (0..n_clutter)
                .filter(|_| self.rng.gen_bool(spec.inside_box_unassociated_rate))
                .count()
        };
        for _ in 0..n_clutter - n_hard {
            if let Some(position) = self.clutter_position(&objects) {
                radar.push(self.point(next_id, position, None));
                next_id += 1;
            }
        }
        let mut frame = Frame {
            id,
            camera: spec.camera,
            radar,
            objects,
            associations: Some(associations),
        };
        // Hard returns go last, each on a pixel no other return occupies.
        let mut occupied: BTreeSet<Pixel> = frame
            .radar
            .iter()
            .filter_map(|p| project_point(&frame.camera, &p.position))
            .collect();
        for _ in 0..n_hard {
            if let Some(position) = self.hard_clutter(&frame, &occupied) {
                occupied.extend(project_point(&frame.camera, &position));
                let p = self.point(next_id, position, None);
                frame.radar.push(p);
                next_id += 1;
            }
        }
        Ok(frame)
    }

    fn point(&mut self, id: u32, position: Point3, object_velocity: Option<(f64, f64)>) -> RadarPoint {
        let (rcs, vx, vy) = self.attributes(object_velocity);
        RadarPoint {
            id,
            position,
            rcs,
            vx,
            vy,
        }
    }
}
/// Generate `spec.n_frames` frames; frame `i` draws from its own RNG stream.
pub fn generate(spec: &SceneSpec) -> Result<Vec<Frame>> {
    spec.validate()?;
    (0..spec.n_frames)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            Sampler { spec, rng }.frame(i as u32)
        })
        .collect()
}

/// Seeded shuffle followed by a contiguous split by `ratios`.
pub fn split(frame_ids: &[u32], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Config(format!("split ratios must be positive, got {ratios:?}")));
    }
    let n = frame_ids.len();
    if n < ratios.len() {
        return Err(Error::EmptyDataset(format!("{n} frames cannot fill {} splits", ratios.len())));
    }
    let mut ids = frame_ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut rng);

    let total: f64 = ratios.iter().sum();
    let exact: Vec<f64> = ratios.iter().map(|r| n as f64 * r / total).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut left = n - sizes.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[k] += 1;
        left -= 1;
    }
    while let Some(empty) = sizes.iter().position(|s| *s == 0) {
        let largest = (0..3).max_by_key(|&k| (sizes[k], std::cmp::Reverse(k))).expect("three parts");
        sizes[largest] -= 1;
        sizes[empty] += 1;
    }
    let (train, rest) = ids.split_at(sizes[0]);
    let (val, test) = rest.split_at(sizes[1]);
    Ok(Split {
        train: train.to_vec(),
        val: val.to_vec(),
        test: test.to_vec(),
    })
}

/// Generate frames and split them 3:1:1.
pub fn generate_dataset(spec: &SceneSpec) -> Result<Dataset> {
    let frames = generate(spec)?;
    let ids: Vec<u32> = frames.iter().map(|f| f.id).collect();
    let split = split(&ids, [3.0, 1.0, 1.0], spec.seed)?;
    Ok(Dataset {
        spec: spec.clone(),
        frames,
        split,
    })
}

/// Fill color of an object; the shade is a fixed function of its height.
pub fn object_color(height: f64) -> [f64; 3] {
    let t = ((height - 0.5) / 2.5).clamp(0.0, 1.0);
    [0.25 + 0.7 * t, 0.85 - 0.6 * t, 0.2 + 0.3 * (1.0 - t)]
}

/// Shaded-box raster of the scene in `[0, 1]`, channels RGB.
///
/// Sky above the principal row and ground below it get vertical gradients;
/// boxes are filled far to near.
pub fn render_visual(frame: &Frame) -> Array3<f64> {
    let (h, w) = frame.camera.dims();
    let horizon = frame.camera.cy;
    let mut img = Array3::<f64>::zeros((3, h, w));
    for r in 0..h {
        let rf = r as f64;
        let rgb = if rf < horizon {
            let t = 0.8 + 0.2 * rf / horizon.max(1.0);
            [0.55 * t, 0.7 * t, 0.9 * t]
        } else {
            let t = (rf - horizon) / (h as f64 - horizon).max(1.0);
            [0.3 + 0.2 * t, 0.3 + 0.2 * t, 0.32 + 0.2 * t]
        };
        for c in 0..w {
            for (ch, v) in rgb.iter().enumerate() {
                img[[ch, r, c]] = *v;
            }
        }
    }
    let mut boxes = object_boxes_2d(frame);
    boxes.sort_by(|(a, _), (b, _)| b.center.norm().total_cmp(&a.center.norm()).then(b.id.cmp(&a.id)));
    for (b, rect) in boxes {
        let rgb = object_color(b.height());
        for r in rect.row_min..=rect.row_max {
            for c in rect.col_min..=rect.col_max {
                for (ch, v) in rgb.iter().enumerate() {
                    img[[ch, r, c]] = *v;
                }
            }
        }
    }
    img
}
