//! Pixel geometry shared by every stage: points, boxes, image frames and
//! the patch-grid resize that defines the serialized coordinate frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PATCH: u32 = 28;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Integer pixel position, rounding half away from zero.
    pub fn rounded(&self) -> (i64, i64) {
        (round_half_up(self.x), round_half_up(self.y))
    }
}

pub(crate) fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Axis-aligned box `(x, y, w, h)` with strictly positive extent.
///
/// Serialized as a `[x, y, w, h]` array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        if !b.is_valid() {
            return Err(Error::invalid(format!(
                "bounding box ({x}, {y}, {w}, {h}) must be finite with positive width and height"
            )));
        }
        Ok(b)
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h]
            .iter()
            .all(|v| v.is_finite())
            && self.w > 0.0
            && self.h > 0.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Inclusive containment: points on the boundary count as inside.
    pub fn contains(&self, p: Point) -> bool {
        self.x <= p.x && p.x <= self.right() && self.y <= p.y && p.y <= self.bottom()
    }

    pub fn within(&self, dims: &ImageDims) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.right() <= dims.width as f64
            && self.bottom() <= dims.height as f64
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    pub fn union(&self, other: &BoundingBox) -> Self {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        Self {
            x,
            y,
            w: self.right().max(other.right()) - x,
            h: self.bottom().max(other.bottom()) - y,
        }
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Native image size plus, once resized, the patch-aligned model frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resized_width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resized_height: Option<u32>,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            resized_width: None,
            resized_height: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// The resized frame as plain dims; falls back to the native frame.
    pub fn resized_frame(&self) -> ImageDims {
        ImageDims::new(
            self.resized_width.unwrap_or(self.width),
            self.resized_height.unwrap_or(self.height),
        )
    }

    pub fn native_frame(&self) -> ImageDims {
        ImageDims::new(self.width, self.height)
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width as f64 && p.y <= self.height as f64
    }
}

/// Resize policy. `max_pixels` caps the resized area when set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResizeConfig {
    pub patch: u32,
    #[serde(default)]
    pub max_pixels: Option<u64>,
}

impl Default for ResizeConfig {
    fn default() -> Self {
        Self {
            patch: DEFAULT_PATCH,
            max_pixels: None,
        }
    }
}

/// Snap each side to the nearest multiple of `patch` (at least one patch).
///
/// The returned dims keep the native size and record the grid size in
/// `resized_width` / `resized_height`.
pub fn smart_resize(dims: ImageDims, patch: u32) -> Result<ImageDims> {
    smart_resize_with(
        dims,
        &ResizeConfig {
            patch,
            max_pixels: None,
        },
    )
}

pub fn smart_resize_with(dims: ImageDims, cfg: &ResizeConfig) -> Result<ImageDims> {
    dims.validate()?;
    if cfg.patch == 0 {
        return Err(Error::invalid("patch size must be at least 1"));
    }
    let patch = cfg.patch as f64;
    let snap = |side: u32| -> u32 {
        let cells = (side as f64 / patch).round().max(1.0);
        cells as u32 * cfg.patch
    };
    let (mut w, mut h) = (snap(dims.width), snap(dims.height));

    if let Some(max) = cfg.max_pixels {
        if (w as u64) * (h as u64) > max {
            let beta = ((dims.width as f64 * dims.height as f64) / max as f64).sqrt();
            let shrink = |side: u32| -> u32 {
                let cells = (side as f64 / beta / patch).floor().max(1.0);
                cells as u32 * cfg.patch
            };
            w = shrink(dims.width);
            h = shrink(dims.height);
        }
    }

    Ok(ImageDims {
        width: dims.width,
        height: dims.height,
        resized_width: Some(w),
        resized_height: Some(h),
    })
}

/// Map a point between two frames of the same image.
pub fn scale_point(p: Point, from: &ImageDims, to: &ImageDims) -> Result<Point> {
    from.validate()?;
    to.validate()?;
    Ok(Point::new(
        scale_axis(p.x, from.width, to.width),
        scale_axis(p.y, from.height, to.height),
    ))
}

fn scale_axis(v: f64, from: u32, to: u32) -> f64 {
    if from == to {
        v
    } else {
        v * to as f64 / from as f64
    }
}

/// Native-frame point to the resized model frame recorded on `dims`.
pub fn to_resized(p: Point, dims: &ImageDims) -> Result<Point> {
    scale_point(p, &dims.native_frame(), &dims.resized_frame())
}

pub fn contains(b: &BoundingBox, p: Point) -> bool {
    b.contains(p)
}

/// The element box itself plus a context box padded on all sides and
/// clamped to the image.
pub fn crop_regions(
    b: &BoundingBox,
    dims: &ImageDims,
    context_pad: f64,
) -> Result<(BoundingBox, BoundingBox)> {
    dims.validate()?;
    if !b.is_valid() || !b.within(dims) {
        return Err(Error::invalid(format!(
            "box ({}, {}, {}, {}) is not inside the {}x{} image",
            b.x, b.y, b.w, b.h, dims.width, dims.height
        )));
    }
    let pad = context_pad.max(0.0);
    let x0 = (b.x - pad).max(0.0);
    let y0 = (b.y - pad).max(0.0);
    let x1 = (b.right() + pad).min(dims.width as f64);
    let y1 = (b.bottom() + pad).min(dims.height as f64);
    let context = BoundingBox {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    };
    Ok((*b, context))
}
