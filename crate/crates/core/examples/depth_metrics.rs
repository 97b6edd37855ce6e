//! Depth-estimation metrics on a prediction that is uniformly 1 m too far,
//! then on a noisy one with a validity mask, read from the text map format.

use ndarray::Array2;
use radar_height::io::{load_depth_map, save_depth_map};
use radar_height::metrics::{depth_errors, DepthErrorReport};

fn show(name: &str, r: &DepthErrorReport) {
    println!(
        "{name}: MAE {:.4}  RMSE {:.4}  AbsRel {:.4}  d1 {:.4}  d2 {:.4}  d3 {:.4}  ({} px)",
        r.mae, r.rmse, r.absrel, r.delta[0], r.delta[1], r.delta[2], r.pixels
    );
}

fn main() -> radar_height::Result<()> {
    let gt = Array2::from_elem((64, 96), 10.0);
    let all = Array2::from_elem((64, 96), true);
    show("gt + 1", &depth_errors(&(&gt + 1.0), &gt, &all)?);

    // A sloped scene, predictions off by a smooth multiplicative error, and
    // the top rows (sky) masked out.
    let gt = Array2::from_shape_fn((64, 96), |(r, _)| 80.0 / (1.0 + r as f64 / 4.0));
    let pred = Array2::from_shape_fn((64, 96), |(r, c)| gt[[r, c]] * (1.0 + 0.3 * ((r * 7 + c * 3) as f64 * 0.1).sin()));
    let valid = Array2::from_shape_fn((64, 96), |(r, _)| r >= 8);

    let dir = std::env::temp_dir();
    save_depth_map(&dir.join("depth_gt.txt"), &gt)?;
    save_depth_map(&dir.join("depth_pred.txt"), &pred)?;
    let gt = load_depth_map(&dir.join("depth_gt.txt"))?;
    let pred = load_depth_map(&dir.join("depth_pred.txt"))?;
    show("sloped", &depth_errors(&pred, &gt, &valid)?);
    Ok(())
}
