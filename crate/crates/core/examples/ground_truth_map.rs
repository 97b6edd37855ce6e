//! Build the dense height target, region partition and free-space mask for one
//! generated frame, and print a coarse ASCII view of each.

use radar_height::ground_truth::{build_height_map, build_seg_mask, Region};
use radar_height::render::height_image;
use radar_height::synth::{generate, SceneSpec};

fn main() -> radar_height::Result<()> {
    let frame = generate(&SceneSpec { n_frames: 6, ..SceneSpec::default() })?.remove(5);
    let (gt, part) = build_height_map(&frame)?;
    let mask = build_seg_mask(&frame)?;
    let (h, w) = gt.dims();

    println!("frame {}: {} objects, {} radar returns", frame.id, frame.objects.len(), frame.radar.len());
    for b in &frame.objects {
        println!("  object {} height {:.2} m at depth {:.1} m", b.id, b.height(), b.center.z);
    }
    println!(
        "regions: {} background, {} foreground, {} radar pixels",
        part.count(Region::Background),
        part.count(Region::Foreground),
        part.count(Region::Radar)
    );

    // Every 2nd row and column: '.' free space, '#' inside a 2D box, digits
    // are radar pixels carrying their height target (0 for clutter).
    for r in (0..h).step_by(2) {
        let line: String = (0..w)
            .step_by(2)
            .map(|c| {
                let rad = part.radar_pixels.iter().find(|p| p.pixel.row / 2 == r / 2 && p.pixel.col / 2 == c / 2);
                match rad {
                    Some(p) => char::from_digit(gt.at(p.pixel).round() as u32, 10).unwrap_or('+'),
                    None if mask.free_space()[[r, c]] > 0.5 => '.',
                    None => '#',
                }
            })
            .collect();
        println!("{line}");
    }

    for p in &part.radar_pixels {
        println!(
            "  point {:2} at ({:2},{:2}) range {:5.1} m  object {:?}  target {:.2} m",
            p.point_id, p.pixel.row, p.pixel.col, p.range, p.object, gt.at(p.pixel)
        );
    }

    let out = std::env::temp_dir().join("ground_truth_map.ppm");
    height_image(&gt, 3.0).save_ppm(&out)?;
    println!("height map written to {}", out.display());
    Ok(())
}
