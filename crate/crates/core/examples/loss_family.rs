//! Tabulate the six pointwise height losses, show where EHL switches branch,
//! and check every analytic derivative against finite differences.

use radar_height::ground_truth::{HeightMap, Region, RegionPartition};
use radar_height::loss::{grad_check, region_loss, LossKind, LossSpec};
use ndarray::Array2;

fn main() -> radar_height::Result<()> {
    let residuals = [0.0, 0.05, 0.111, 0.25, 0.5, 1.0, 2.0, 4.0];
    print!("{:>6}", "dh");
    for kind in LossKind::ALL {
        print!("{:>10}", kind.to_string());
    }
    println!();
    for dh in residuals {
        print!("{dh:>6.3}");
        for kind in LossKind::ALL {
            print!("{:>10.4}", LossSpec::with_kind(kind).of_residual(dh).0);
        }
        println!();
    }

    for sigma in [1.0, 2.0, 3.0] {
        let s = LossSpec { sigma, ..LossSpec::default() };
        let bp = s.breakpoint();
        let eps = 1e-9;
        let (below, above) = (s.of_residual(bp - eps), s.of_residual(bp + eps));
        println!(
            "EHL sigma {sigma}: breakpoint {bp:.4}, value {:.6} / {:.6}, slope {:.6} / {:.6}",
            below.0, above.0, below.1, above.1
        );
    }

    for kind in LossKind::ALL {
        let r = grad_check(&LossSpec::with_kind(kind), 2000, 1e-6, 1e-5);
        println!("grad check {kind:>4}: max rel err {:.2e} over {} samples", r.max_rel_err, r.samples);
    }

    // A 1x4 map: one background, one foreground and two radar pixels.
    let gt = HeightMap { values: Array2::from_shape_vec((1, 4), vec![0.0, 1.6, 1.6, 0.0]).unwrap() };
    let pred = HeightMap { values: Array2::from_shape_vec((1, 4), vec![0.1, 1.2, 1.0, 0.4]).unwrap() };
    let part = RegionPartition {
        labels: Array2::from_shape_vec(
            (1, 4),
            vec![Region::Background, Region::Foreground, Region::Radar, Region::Radar],
        )
        .unwrap(),
        radar_pixels: vec![],
    };
    for kind in LossKind::ALL {
        let l = region_loss(&LossSpec::with_kind(kind), &gt, &pred, &part)?;
        println!(
            "{kind:>4}: L_bg {:.4}  L_fg {:.4}  L_rad {:.4}  L_reg {:.4}",
            l.l_bg, l.l_fg, l.l_rad, l.l_reg
        );
    }
    Ok(())
}
