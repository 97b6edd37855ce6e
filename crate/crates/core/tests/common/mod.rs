#![allow(dead_code)]

pub mod gt_oracle;
pub mod metric_oracle;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radar_height::geometry::{Box3D, BoxSize, CameraModel, Frame, Point3, RadarPoint};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn camera(height: usize, width: usize) -> CameraModel {
    CameraModel {
        fx: width as f64 * 0.8,
        fy: width as f64 * 0.8,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        width,
        height,
    }
}

/// Unstructured frame: boxes may overlap, straddle the image border or sit
/// partly behind the camera; radar points are scattered, some inside boxes.
pub fn random_frame(rng: &mut ChaCha8Rng, id: u32, explicit_associations: bool) -> Frame {
    let h = 4 * rng.gen_range(2..=16);
    let w = 4 * rng.gen_range(2..=24);
    let cam = camera(h, w);
    let n_obj = rng.gen_range(0..=5);
    let objects: Vec<Box3D> = (0..n_obj)
        .map(|i| Box3D {
            id: i as u32 * 3 + 1,
            center: Point3::new(
                rng.gen_range(-8.0..8.0),
                rng.gen_range(-1.0..2.0),
                rng.gen_range(-2.0..30.0),
            ),
            size: BoxSize {
                length: rng.gen_range(0.3..5.0),
                width: rng.gen_range(0.3..3.0),
                height: rng.gen_range(0.3..3.0),
            },
            yaw: rng.gen_range(-4.0..4.0),
        })
        .collect();
    let mut radar = Vec::new();
    for k in 0..rng.gen_range(0..40u32) {
        let position = if !objects.is_empty() && rng.gen_bool(0.4) {
            // Inside (or at least near) a random box.
            let b = &objects[rng.gen_range(0..objects.len())];
            b.to_camera(&Point3::new(
                rng.gen_range(-0.5..0.5) * b.size.length,
                rng.gen_range(-0.5..0.5) * b.size.height,
                rng.gen_range(-0.5..0.5) * b.size.width,
            ))
        } else {
            Point3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..40.0))
        };
        radar.push(RadarPoint {
            id: 100 + 2 * k,
            position,
            rcs: rng.gen_range(-5.0..20.0),
            vx: rng.gen_range(-3.0..3.0),
            vy: rng.gen_range(-3.0..3.0),
        });
    }
    // Force some pixel collisions: duplicate a point a little farther away.
    if let Some(p) = radar.first().cloned() {
        let mut q = p;
        q.id = 1;
        q.position = p.position.scale(1.01);
        radar.push(q);
    }
    let associations = explicit_associations.then(|| {
        let mut m = BTreeMap::new();
        for p in &radar {
            if !objects.is_empty() && rng.gen_bool(0.3) {
                m.insert(p.id, objects[rng.gen_range(0..objects.len())].id);
            }
        }
        m
    });
    Frame {
        id,
        camera: cam,
        radar,
        objects,
        associations,
    }
}
