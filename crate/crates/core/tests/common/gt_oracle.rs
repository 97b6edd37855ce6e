//! Dense ground truth written straight from the definitions, one pixel at a
//! time, without the library's projection helpers.

use radar_height::geometry::{Box3D, CameraModel, Frame, Point3};
use radar_height::ground_truth::{build_height_map, build_seg_mask, Region};

fn pix(cam: &CameraModel, p: &Point3) -> Option<(i64, i64)> {
    if p.z <= 0.0 {
        return None;
    }
    let r = (cam.fy * p.y / p.z + cam.cy + 0.5).floor() as i64;
    let c = (cam.fx * p.x / p.z + cam.cx + 0.5).floor() as i64;
    Some((r, c))
}

fn in_image(cam: &CameraModel, (r, c): (i64, i64)) -> bool {
    r >= 0 && c >= 0 && (r as usize) < cam.height && (c as usize) < cam.width
}

/// Does the 2D box of `b` cover pixel (r, c)?
pub fn covers(cam: &CameraModel, b: &Box3D, r: i64, c: i64) -> bool {
    let (s, co) = b.yaw.sin_cos();
    let mut rows = vec![];
    let mut cols = vec![];
    for i in 0..8 {
        let lx = if i & 1 == 0 { -0.5 } else { 0.5 } * b.size.length;
        let ly = if i & 2 == 0 { -0.5 } else { 0.5 } * b.size.height;
        let lz = if i & 4 == 0 { -0.5 } else { 0.5 } * b.size.width;
        // Inverse of the yaw rotation about the vertical axis.
        let p = Point3::new(
            b.center.x + co * lx + s * lz,
            b.center.y + ly,
            b.center.z - s * lx + co * lz,
        );
        if p.z > 0.0 {
            rows.push(cam.fy * p.y / p.z + cam.cy);
            cols.push(cam.fx * p.x / p.z + cam.cx);
        }
    }
    if rows.is_empty() {
        return false;
    }
    let round = |v: f64| (v + 0.5).floor() as i64;
    let rmin = round(rows.iter().copied().fold(f64::INFINITY, f64::min)).max(0);
    let rmax = round(rows.iter().copied().fold(f64::NEG_INFINITY, f64::max)).min(cam.height as i64 - 1);
    let cmin = round(cols.iter().copied().fold(f64::INFINITY, f64::min)).max(0);
    let cmax = round(cols.iter().copied().fold(f64::NEG_INFINITY, f64::max)).min(cam.width as i64 - 1);
    rmin <= r && r <= rmax && cmin <= c && c <= cmax
}

fn inside(b: &Box3D, p: &Point3) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let (dx, dy, dz) = (p.x - b.center.x, p.y - b.center.y, p.z - b.center.z);
    (c * dx - s * dz).abs() <= b.size.length / 2.0
        && dy.abs() <= b.size.height / 2.0
        && (s * dx + c * dz).abs() <= b.size.width / 2.0
}

fn owner_object(frame: &Frame, point: u32) -> Option<&Box3D> {
    if let Some(explicit) = &frame.associations {
        return explicit.get(&point).and_then(|m| frame.object(*m));
    }
    let p = &frame.radar.iter().find(|q| q.id == point).unwrap().position;
    frame
        .objects
        .iter()
        .filter(|b| inside(b, p))
        .min_by(|a, b| {
            a.center
                .distance(p)
                .total_cmp(&b.center.distance(p))
                .then(a.id.cmp(&b.id))
        })
}

/// (height, region, owning point) for every pixel.
pub fn oracle(frame: &Frame) -> Vec<Vec<(f64, Region, Option<u32>)>> {
    let cam = &frame.camera;
    let mut out = vec![vec![(0.0, Region::Background, None); cam.width]; cam.height];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let (r, c) = (r as i64, c as i64);
            let nearest_box = frame
                .objects
                .iter()
                .filter(|b| covers(cam, b, r, c))
                .min_by(|a, b| a.center.norm().total_cmp(&b.center.norm()).then(a.id.cmp(&b.id)));
            if let Some(b) = nearest_box {
                *cell = (b.size.height, Region::Foreground, None);
            }
            let nearest_point = frame
                .radar
                .iter()
                .filter(|p| pix(cam, &p.position).is_some_and(|q| in_image(cam, q) && q == (r, c)))
                .min_by(|a, b| a.position.norm().total_cmp(&b.position.norm()).then(a.id.cmp(&b.id)));
            if let Some(p) = nearest_point {
                let h = owner_object(frame, p.id).map_or(0.0, |b| b.size.height);
                *cell = (h, Region::Radar, Some(p.id));
            }
        }
    }
    out
}

pub fn check(frame: &Frame) {
    let (gt, part) = build_height_map(frame).unwrap();
    let mask = build_seg_mask(frame).unwrap();
    let expect = oracle(frame);
    let mut rad = 0;
    for (r, row) in expect.iter().enumerate() {
        for (c, (h, region, owner)) in row.iter().enumerate() {
            assert_eq!(gt.values[[r, c]], *h, "frame {} pixel ({r},{c}) height", frame.id);
            assert_eq!(part.labels[[r, c]], *region, "frame {} pixel ({r},{c}) region", frame.id);
            if let Some(id) = owner {
                rad += 1;
                assert!(part
                    .radar_pixels
                    .iter()
                    .any(|rp| rp.pixel.row == r && rp.pixel.col == c && rp.point_id == *id));
            }
            let covered = frame.objects.iter().any(|b| covers(&frame.camera, b, r as i64, c as i64));
            assert_eq!(mask.data[[1, r, c]], if covered { 1.0 } else { 0.0 });
            assert_eq!(mask.data[[0, r, c]] + mask.data[[1, r, c]], 1.0);
        }
    }
    assert_eq!(part.radar_pixels.len(), rad);
}
