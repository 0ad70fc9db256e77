use std::io::Cursor;
use std::path::Path;

use image::{Rgb, RgbImage};

use super::{ImageRef, Mark, ProviderError};

const RED: Rgb<u8> = Rgb([230, 30, 30]);
const GREEN: Rgb<u8> = Rgb([20, 200, 60]);

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn draw_mark(img: &mut RgbImage, mark: &Mark, dx: f64, dy: f64) {
    match mark {
        Mark::Highlight { bbox } => {
            let (x0, y0) = ((bbox.x - dx).round() as i64, (bbox.y - dy).round() as i64);
            let (x1, y1) = (
                (bbox.right() - dx).round() as i64,
                (bbox.bottom() - dy).round() as i64,
            );
            for t in 0..2 {
                for x in x0..=x1 {
                    put(img, x, y0 + t, RED);
                    put(img, x, y1 - t, RED);
                }
                for y in y0..=y1 {
                    put(img, x0 + t, y, RED);
                    put(img, x1 - t, y, RED);
                }
            }
        }
        Mark::Click { point } => {
            let (cx, cy) = (point.x - dx, point.y - dy);
            for y in (cy - 14.0) as i64..=(cy + 14.0) as i64 {
                for x in (cx - 14.0) as i64..=(cx + 14.0) as i64 {
                    let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                    if d <= 4.0 || (11.0..=13.0).contains(&d) {
                        put(img, x, y, GREEN);
                    }
                }
            }
        }
    }
}

/// Load, crop and annotate an image reference, returning PNG bytes.
pub fn render_image_ref(r: &ImageRef, root: &Path) -> Result<Vec<u8>, ProviderError> {
    let path = root.join(&r.path);
    let mut img = image::open(&path)
        .map_err(|e| ProviderError::Image(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (mut dx, mut dy) = (0.0, 0.0);
    if let Some(region) = &r.region {
        let x = region.x.max(0.0).floor() as u32;
        let y = region.y.max(0.0).floor() as u32;
        let w = (region.w.ceil() as u32)
            .min(img.width().saturating_sub(x))
            .max(1);
        let h = (region.h.ceil() as u32)
            .min(img.height().saturating_sub(y))
            .max(1);
        img = image::imageops::crop_imm(&img, x, y, w, h).to_image();
        dx = x as f64;
        dy = y as f64;
    }
    for m in &r.marks {
        draw_mark(&mut img, m, dx, dy);
    }
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|e| ProviderError::Image(e.to_string()))?;
    Ok(out)
}
