//! Compare the ways of turning radar points into image lines: plain
//! projection, a fixed height, and per-point heights read from a dense height
//! map (Direct), optionally dropping low points (Filter). Heights here come
//! from the ground-truth oracle, so Direct and Filter are exact.

use radar_height::ground_truth::build_height_map;
use radar_height::metrics::point_height_errors;
use radar_height::model::{predict_dataset, GroundTruthOracle};
use radar_height::radar::{extend, extension_lines, render_radar_image, ExtensionMethod, ExtensionSpec};
use radar_height::render::overlay;
use radar_height::synth::{generate, SceneSpec};

fn main() -> radar_height::Result<()> {
    let frames = generate(&SceneSpec { n_frames: 20, ..SceneSpec::default() })?;
    let store = predict_dataset(&GroundTruthOracle, &frames)?;
    let frame = frames.iter().max_by_key(|f| f.associations.as_ref().map_or(0, |a| a.len())).unwrap();
    let (gt, part) = build_height_map(frame)?;
    let out_dir = std::env::temp_dir();

    for method in [ExtensionMethod::None, ExtensionMethod::Fixed, ExtensionMethod::Direct, ExtensionMethod::Filter] {
        let spec = ExtensionSpec { method, ..ExtensionSpec::default() };
        let heights = extend(frame, &spec, Some(&store))?;
        let lines = extension_lines(frame, &heights);
        let painted = render_radar_image(frame, &heights).painted_pixels();
        let err = point_height_errors(&gt, &part, &heights)?;
        println!(
            "{:>6}: {:2} points kept, {:2} lines, {:4} radar pixels painted, RHE {}",
            method.name(),
            heights.len(),
            lines.len(),
            painted,
            err.rhe.map_or("n/a".into(), |v| format!("{v:.3} m"))
        );
        let path = out_dir.join(format!("frame{:04}-{}.ppm", frame.id, method.name()));
        overlay(frame, &heights).save_ppm(&path)?;
    }
    println!("overlays written to {}", out_dir.display());

    // Filtering never invents points: it keeps the Direct points at or above the threshold.
    let spec = ExtensionSpec::default();
    let direct = extend(frame, &ExtensionSpec { method: ExtensionMethod::Direct, ..spec }, Some(&store))?;
    let filtered = extend(frame, &spec, Some(&store))?;
    for (id, h) in &direct {
        let fate = if filtered.contains_key(id) { "kept" } else { "dropped" };
        println!("  point {id:2}: predicted {h:.2} m -> {fate}");
    }

    match extend(frame, &ExtensionSpec { method: ExtensionMethod::Adaptive, ..spec }, Some(&store)) {
        Err(e) => println!("ah: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
