mod common;

use proptest::prelude::*;

use radar_height::geometry::{point_in_box_3d, project_box_2d, project_point, Box3D, BoxSize, CameraModel, Point3};

fn camera() -> CameraModel {
    common::camera(64, 96)
}

fn point() -> impl Strategy<Value = Point3> {
    (-30.0f64..30.0, -10.0f64..10.0, -5.0f64..60.0).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn boxes() -> impl Strategy<Value = Box3D> {
    (point(), 0.2f64..6.0, 0.2f64..3.0, 0.2f64..3.0, -3.2f64..3.2).prop_map(|(center, length, width, height, yaw)| Box3D {
        id: 0,
        center,
        size: BoxSize { length, width, height },
        yaw,
    })
}

/// Rotate about the vertical axis through the origin, then translate.
fn rigid(p: &Point3, theta: f64, t: &Point3) -> Point3 {
    let (s, c) = theta.sin_cos();
    Point3::new(c * p.x + s * p.z + t.x, p.y + t.y, -s * p.x + c * p.z + t.z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn doubling_a_point_keeps_its_pixel(p in point()) {
        prop_assume!(p.z > 0.0);
        prop_assert_eq!(project_point(&camera(), &p), project_point(&camera(), &p.scale(2.0)));
    }

    #[test]
    fn projected_pixels_are_in_bounds(p in point()) {
        let cam = camera();
        if let Some(px) = project_point(&cam, &p) {
            prop_assert!(px.row < cam.height && px.col < cam.width);
        }
    }

    #[test]
    fn box_rectangle_holds_every_visible_corner(b in boxes()) {
        let cam = camera();
        let rect = project_box_2d(&cam, &b);
        for corner in b.corners() {
            if let Some(px) = project_point(&cam, &corner) {
                let rect = rect.expect("a visible corner implies a rectangle");
                prop_assert!(rect.contains(px), "{px:?} outside {rect:?}");
            }
        }
    }

    #[test]
    fn containment_survives_rigid_motion(
        b in boxes(),
        local in (-0.8f64..0.8, -0.8f64..0.8, -0.8f64..0.8),
        theta in -3.2f64..3.2,
        t in point(),
    ) {
        // Keep clear of the faces so rounding cannot flip the answer.
        let edge = [local.0.abs(), local.1.abs(), local.2.abs()];
        prop_assume!(edge.iter().all(|e| (e - 0.5).abs() > 1e-6));
        let p = b.to_camera(&Point3::new(local.0 * b.size.length, local.1 * b.size.height, local.2 * b.size.width));
        let moved = Box3D { center: rigid(&b.center, theta, &t), yaw: b.yaw + theta, ..b };
        let expect = edge.iter().all(|e| *e < 0.5);
        prop_assert_eq!(point_in_box_3d(&b, &p), expect);
        prop_assert_eq!(point_in_box_3d(&moved, &rigid(&p, theta, &t)), expect);
    }
}
