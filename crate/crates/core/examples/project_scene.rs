//! Project a hand-built scene onto the image plane: a parked car, a pedestrian
//! and a few radar returns, with their 2D boxes and point associations.

use radar_height::geometry::{
    associate, point_in_box_3d, project_box_2d, project_point, Box3D, BoxSize, CameraModel, Frame, Point3, RadarPoint,
};

fn main() {
    let camera = CameraModel {
        fx: 80.0,
        fy: 80.0,
        cx: 48.0,
        cy: 32.0,
        width: 96,
        height: 64,
    };
    // y points down, so a box resting on ground 1.5 m below the camera has its
    // center at 1.5 - h/2.
    let car = Box3D {
        id: 0,
        center: Point3::new(-2.0, 1.5 - 0.75, 12.0),
        size: BoxSize { length: 4.2, width: 1.8, height: 1.5 },
        yaw: 0.4,
    };
    let person = Box3D {
        id: 1,
        center: Point3::new(3.0, 1.5 - 0.9, 8.0),
        size: BoxSize { length: 0.6, width: 0.6, height: 1.8 },
        yaw: 0.0,
    };
    let radar = vec![
        RadarPoint { id: 0, position: Point3::new(-2.1, 0.9, 11.4), rcs: 9.0, vx: 0.0, vy: 0.0 },
        RadarPoint { id: 1, position: Point3::new(3.0, 0.7, 8.1), rcs: -3.0, vx: 0.4, vy: 0.0 },
        // Same bearing as the car but 10 m behind it.
        RadarPoint { id: 2, position: Point3::new(-3.7, 1.0, 22.0), rcs: 2.0, vx: 0.0, vy: 0.0 },
        RadarPoint { id: 3, position: Point3::new(1.0, 1.2, -4.0), rcs: 0.0, vx: 0.0, vy: 0.0 },
    ];
    let frame = Frame { id: 0, camera, radar, objects: vec![car, person], associations: None };
    frame.validate().expect("hand-built frame is consistent");

    for b in &frame.objects {
        let rect = project_box_2d(&camera, b);
        println!("object {} (h = {} m, yaw = {}) -> {:?}", b.id, b.height(), b.yaw, rect);
        let visible = b.corners().iter().filter(|c| project_point(&camera, c).is_some()).count();
        println!("  {visible} of 8 corners land in the image");
    }

    let assoc = associate(&frame);
    for p in &frame.radar {
        let px = project_point(&camera, &p.position);
        let inside_2d: Vec<u32> = frame
            .objects
            .iter()
            .filter(|b| matches!((px, project_box_2d(&camera, b)), (Some(px), Some(r)) if r.contains(px)))
            .map(|b| b.id)
            .collect();
        println!(
            "point {} range {:5.2} m -> pixel {:?}, inside 2D boxes {:?}, inside 3D box {:?}",
            p.id,
            p.range(),
            px.map(|q| (q.row, q.col)),
            inside_2d,
            assoc[&p.id]
        );
    }
    // Point 2 overlaps the car on the image but lies outside it in 3D.
    assert!(!point_in_box_3d(&frame.objects[0], &frame.radar[2].position));
}
