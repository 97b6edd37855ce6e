//! Binary PPM output for qualitative inspection.

use std::path::Path;

use crate::geometry::{associate, Frame};
use crate::ground_truth::HeightMap;
use crate::io::write_bytes;
use crate::radar::{extension_lines, PointHeights};
use crate::error::Result;
use crate::synth::render_visual;

pub const ASSOCIATED: [u8; 3] = [255, 220, 0];
pub const UNASSOCIATED: [u8; 3] = [230, 30, 30];

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn save_ppm(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_ppm())
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// The visual raster with one vertical line per point in `heights`: yellow
/// for points belonging to an object, red otherwise.
pub fn overlay(frame: &Frame, heights: &PointHeights) -> RgbImage {
    let visual = render_visual(frame);
    let (h, w) = frame.camera.dims();
    let mut img = RgbImage {
        height: h,
        width: w,
        pixels: vec![0; 3 * h * w],
    };
    for r in 0..h {
        for c in 0..w {
            img.set(r, c, [0, 1, 2].map(|ch| to_u8(visual[[ch, r, c]])));
        }
    }
    let owners = associate(frame);
    for line in extension_lines(frame, heights) {
        let color = if owners.get(&line.point_id).copied().flatten().is_some() {
            ASSOCIATED
        } else {
            UNASSOCIATED
        };
        for r in line.row_top..=line.row_bottom {
            img.set(r, line.col, color);
        }
    }
    img
}

/// Grayscale height map, white at `max_height` and above.
pub fn height_image(map: &HeightMap, max_height: f64) -> RgbImage {
    let (h, w) = map.dims();
    let mut img = RgbImage {
        height: h,
        width: w,
        pixels: vec![0; 3 * h * w],
    };
    for ((r, c), v) in map.values.indexed_iter() {
        let g = to_u8(v / max_height);
        img.set(r, c, [g, g, g]);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SceneSpec};

    #[test]
    fn ppm_header_and_size() {
        let img = height_image(&HeightMap::zeros(2, 3), 1.0);
        let ppm = img.to_ppm();
        assert!(ppm.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(ppm.len(), 11 + 18);
    }

    #[test]
    fn empty_heights_leave_visual_untouched() {
        let f = generate(&SceneSpec {
            n_frames: 1,
            ..SceneSpec::default()
        })
        .unwrap()
        .remove(0);
        let plain = overlay(&f, &PointHeights::new());
        let lines = overlay(&f, &f.radar.iter().map(|p| (p.id, 1.0)).collect());
        assert_ne!(plain, lines);
        assert!(plain.pixels.chunks(3).all(|p| p != ASSOCIATED && p != UNASSOCIATED));
    }
}
