//! Height and depth metrics as naive loops over the definitions.

use ndarray::Array2;
use rand::Rng;

use radar_height::geometry::Pixel;
use radar_height::ground_truth::{HeightMap, RadarPixel, Region, RegionPartition};

pub const REL: f64 = 1e-12;

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL * a.abs().max(b.abs()).max(1e-300)
}

pub fn random_case(rng: &mut impl Rng, h: usize, w: usize) -> (HeightMap, HeightMap, RegionPartition) {
    let mut gt = HeightMap::zeros(h, w);
    let mut pred = HeightMap::zeros(h, w);
    let mut labels = Array2::from_elem((h, w), Region::Background);
    let mut radar_pixels = vec![];
    for r in 0..h {
        for c in 0..w {
            pred.values[[r, c]] = rng.gen_range(0.0..3.0);
            let u: f64 = rng.gen();
            if u < 0.2 {
                labels[[r, c]] = Region::Foreground;
                gt.values[[r, c]] = rng.gen_range(0.5..3.0);
            } else if u < 0.25 {
                labels[[r, c]] = Region::Radar;
                let assoc = rng.gen_bool(0.4);
                gt.values[[r, c]] = if assoc { rng.gen_range(0.5..3.0) } else { 0.0 };
                radar_pixels.push(RadarPixel {
                    pixel: Pixel { row: r, col: c },
                    point_id: radar_pixels.len() as u32,
                    object: assoc.then_some(0),
                    range: 10.0,
                });
            }
        }
    }
    (gt, pred, RegionPartition { labels, radar_pixels })
}

/// Naive loops straight from the definitions.
pub fn oracle(gt: &HeightMap, pred: &HeightMap, part: &RegionPartition) -> [Option<f64>; 4] {
    let (h, w) = gt.dims();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let (mut all, mut nz, mut z, mut every) = (vec![], vec![], vec![], vec![]);
    for r in 0..h {
        for c in 0..w {
            let e = (gt.values[[r, c]] - pred.values[[r, c]]).abs();
            every.push(e);
            if part.labels[[r, c]] == Region::Radar {
                all.push(e);
                if gt.values[[r, c]] != 0.0 {
                    nz.push(e);
                } else {
                    z.push(e);
                }
            }
        }
    }
    [mean(&all), mean(&every), mean(&nz), mean(&z)]
}

pub fn depth_oracle(p: &Array2<f64>, g: &Array2<f64>, m: &Array2<bool>) -> (f64, f64, f64, [f64; 3]) {
    let (mut n, mut a, mut s, mut rel) = (0.0, 0.0, 0.0, 0.0);
    let mut d = [0.0; 3];
    for ((&p, &g), &ok) in p.iter().zip(g.iter()).zip(m.iter()) {
        if !ok {
            continue;
        }
        n += 1.0;
        a += (p - g).abs();
        s += (p - g).powi(2);
        rel += (p - g).abs() / g;
        let ratio = f64::max(p / g, g / p);
        for (k, dk) in d.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                *dk += 1.0;
            }
        }
    }
    (a / n, (s / n).sqrt(), rel / n, d.map(|v| v / n))
}
