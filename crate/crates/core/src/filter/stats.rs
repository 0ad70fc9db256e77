use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Gradient magnitude (in [0,1] intensity units) above which a pixel counts as an edge.
pub const EDGE_CUTOFF: f64 = 0.1;

/// Visual complexity of an element crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropStats {
    pub color_variance: f64,
    pub edge_density: f64,
}

pub fn crop_visual_stats(img: &RgbImage) -> Result<CropStats> {
    crop_visual_stats_with(img, EDGE_CUTOFF)
}

/// Mean per-channel intensity variance, and the fraction of interior pixels
/// whose forward-difference gradient on gray intensity exceeds `cutoff`.
pub fn crop_visual_stats_with(img: &RgbImage, cutoff: f64) -> Result<CropStats> {
    let (w, h) = img.dimensions();
    if w < 2 || h < 2 {
        return Err(Error::invalid(format!("crop {w}x{h} is smaller than 2x2")));
    }
    // integer moments so constant crops come out exactly zero
    let n = w as u128 * h as u128;
    let mut sum = [0u128; 3];
    let mut sq = [0u128; 3];
    for p in img.pixels() {
        for c in 0..3 {
            let v = p[c] as u128;
            sum[c] += v;
            sq[c] += v * v;
        }
    }
    let color_variance = (0..3)
        .map(|c| (n * sq[c] - sum[c] * sum[c]) as f64 / (n * n) as f64 / (255.0 * 255.0))
        .sum::<f64>()
        / 3.0;

    let gray = |x: u32, y: u32| {
        let p = img.get_pixel(x, y);
        (p[0] as f64 + p[1] as f64 + p[2] as f64) / (3.0 * 255.0)
    };
    let interior_w = w.saturating_sub(2);
    let interior_h = h.saturating_sub(2);
    let edge_density = if interior_w == 0 || interior_h == 0 {
        0.0
    } else {
        let mut edges = 0usize;
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let g = gray(x, y);
                let gx = gray(x + 1, y) - g;
                let gy = gray(x, y + 1) - g;
                if (gx * gx + gy * gy).sqrt() > cutoff {
                    edges += 1;
                }
            }
        }
        edges as f64 / (interior_w as f64 * interior_h as f64)
    };
    Ok(CropStats {
        color_variance: color_variance.clamp(0.0, 1.0),
        edge_density,
    })
}

/// Stats for a box of a screenshot on disk.
pub fn crop_stats_for(path: &Path, bbox: &BoundingBox) -> Result<CropStats> {
    let img = image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(other),
        })?
        .to_rgb8();
    let x = bbox.x.max(0.0).floor() as u32;
    let y = bbox.y.max(0.0).floor() as u32;
    if x >= img.width() || y >= img.height() {
        return Err(Error::invalid("crop box lies outside the screenshot"));
    }
    let cw = (bbox.w.ceil() as u32).min(img.width() - x);
    let ch = (bbox.h.ceil() as u32).min(img.height() - y);
    crop_visual_stats(&image::imageops::crop_imm(&img, x, y, cw, ch).to_image())
}
