//! Generate the default synthetic dataset, summarize what is in it and save it
//! in the JSON dataset format.

use radar_height::ground_truth::{build_height_map, object_boxes_2d};
use radar_height::io::{canonical_hash, load_dataset, save_dataset};
use radar_height::synth::{generate_dataset, SceneSpec};

fn main() -> radar_height::Result<()> {
    let spec = SceneSpec::default();
    let data = generate_dataset(&spec)?;
    println!(
        "{} frames at {}x{}, seed {}; split {} / {} / {}",
        data.frames.len(),
        spec.camera.height,
        spec.camera.width,
        spec.seed,
        data.split.train.len(),
        data.split.val.len(),
        data.split.test.len()
    );

    let (mut objects, mut heights) = (0, 0.0);
    let (mut free, mut in_box, mut assoc) = (0, 0, 0);
    for f in &data.frames {
        objects += f.objects.len();
        heights += f.objects.iter().map(|b| b.height()).sum::<f64>();
        let (gt, part) = build_height_map(f)?;
        for rp in &part.radar_pixels {
            if rp.object.is_some() {
                assoc += 1;
            } else {
                debug_assert_eq!(gt.at(rp.pixel), 0.0);
                if object_boxes_2d(f).iter().any(|(_, r)| r.contains(rp.pixel)) {
                    in_box += 1;
                } else {
                    free += 1;
                }
            }
        }
    }
    let rad = (free + in_box + assoc) as f64;
    println!("{objects} objects, mean height {:.3} m", heights / objects as f64);
    println!(
        "radar pixels: {:.1}% clutter on open ground, {:.1}% clutter inside a 2D box, {:.1}% on an object",
        100.0 * free as f64 / rad,
        100.0 * in_box as f64 / rad,
        100.0 * assoc as f64 / rad
    );

    let path = std::env::temp_dir().join("synthetic_dataset.json");
    save_dataset(&path, &data, &canonical_hash(&spec))?;
    let back = load_dataset(&path)?;
    assert_eq!(back, data);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
