//! Paired image/mask augmentation.
//!
//! Geometric ops move image and mask together; flips and quarter turns are
//! exact pixel permutations, zoom crops a window and resizes it back
//! (bilinear for the image, nearest neighbor for the mask so no new labels
//! appear). Photometric ops touch only the image. Random pipelines are drawn
//! from an [`AugmentSpec`] with a generator keyed on `(seed, index)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maskcore::{Mask, Rgb};

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("dimension mismatch: image {0:?}, mask {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("zoom scale must lie in (0, 1], got {0}")]
    BadScale(f64),
    #[error("zoom window of scale {scale} centered at ({cx}, {cy}) leaves the image")]
    CropOutOfBounds { scale: f64, cx: f64, cy: f64 },
    #[error("invalid factor {0}")]
    BadFactor(f64),
    #[error("invalid shadow polygon: {0}")]
    BadPolygon(String),
    #[error("invalid image dimensions {width}x{height} for {len} pixels")]
    BadDimensions { width: u32, height: u32, len: usize },
    #[error("invalid augmentation spec: {0}")]
    BadSpec(String),
}

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self, AugmentError> {
        if width == 0 || height == 0 || pixels.len() != width as usize * height as usize {
            return Err(AugmentError::BadDimensions { width, height, len: pixels.len() });
        }
        Ok(RgbImage { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgb: Rgb) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        RgbImage { width, height, pixels: vec![rgb; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GeometricOp {
    Hflip,
    Vflip,
    /// `k` counter-clockwise quarter turns.
    Rot90 {
        k: u8,
    },
    /// Crop a `scale`-sized window centered at pixel coordinates `(cx, cy)`
    /// and resize it back to the input size.
    Zoom {
        scale: f64,
        cx: f64,
        cy: f64,
    },
}

impl GeometricOp {
    /// Zoom window centered on the image.
    pub fn centered_zoom(scale: f64, width: u32, height: u32) -> Self {
        GeometricOp::Zoom { scale, cx: width as f64 / 2.0, cy: height as f64 / 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PhotometricOp {
    Brightness {
        factor: f64,
    },
    /// Scale the channels of pixels whose centers fall inside `polygon` (pixel coordinates).
    Shadow {
        polygon: Vec<[f64; 2]>,
        attenuation: f64,
    },
}

/// Applies a permutation-style op to a row-major grid, returning the new grid and size.
fn permute<T: Copy>(src: &[T], w: u32, h: u32, op: GeometricOp) -> (Vec<T>, u32, u32) {
    let (w, h) = (w as usize, h as usize);
    match op {
        GeometricOp::Hflip => {
            let mut out = src.to_vec();
            for row in out.chunks_mut(w) {
                row.reverse();
            }
            (out, w as u32, h as u32)
        }
        GeometricOp::Vflip => {
            let out: Vec<T> = src.chunks(w).rev().flatten().copied().collect();
            (out, w as u32, h as u32)
        }
        GeometricOp::Rot90 { k } => {
            let (mut cur, mut cw, mut ch) = (src.to_vec(), w, h);
            for _ in 0..(k % 4) {
                // counter-clockwise: (x, y) -> (y, cw - 1 - x), new size ch x cw
                let mut next = Vec::with_capacity(cur.len());
                for ny in 0..cw {
                    for nx in 0..ch {
                        let (x, y) = (cw - 1 - ny, nx);
                        next.push(cur[y * cw + x]);
                    }
                }
                cur = next;
                std::mem::swap(&mut cw, &mut ch);
            }
            (cur, cw as u32, ch as u32)
        }
        GeometricOp::Zoom { .. } => unreachable!("zoom is a resampling op"),
    }
}

struct ZoomWindow {
    x0: f64,
    y0: f64,
    scale: f64,
}

fn zoom_window(op_scale: f64, cx: f64, cy: f64, w: u32, h: u32) -> Result<ZoomWindow, AugmentError> {
    if !(op_scale > 0.0 && op_scale <= 1.0) {
        return Err(AugmentError::BadScale(op_scale));
    }
    let (cw, ch) = (op_scale * w as f64, op_scale * h as f64);
    let (x0, y0) = (cx - cw / 2.0, cy - ch / 2.0);
    const SLACK: f64 = 1e-9;
    if !(x0 >= -SLACK && y0 >= -SLACK && x0 + cw <= w as f64 + SLACK && y0 + ch <= h as f64 + SLACK) {
        return Err(AugmentError::CropOutOfBounds { scale: op_scale, cx, cy });
    }
    Ok(ZoomWindow { x0, y0, scale: op_scale })
}

impl ZoomWindow {
    // Output pixel center (x + 0.5) maps into the window, then back to sample index space.
    fn source(&self, x: u32, y: u32) -> (f64, f64) {
        (self.x0 + (x as f64 + 0.5) * self.scale - 0.5, self.y0 + (y as f64 + 0.5) * self.scale - 0.5)
    }
}

fn zoom_mask(mask: &Mask, win: &ZoomWindow) -> Mask {
    let (w, h) = mask.dims();
    let mut labels = Vec::with_capacity(mask.len());
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = win.source(x, y);
            let nx = ((sx + 0.5).floor().max(0.0) as u32).min(w - 1);
            let ny = ((sy + 0.5).floor().max(0.0) as u32).min(h - 1);
            labels.push(mask.get(nx, ny));
        }
    }
    Mask::new(w, h, labels).expect("same dimensions as input")
}

fn zoom_image(img: &RgbImage, win: &ZoomWindow) -> RgbImage {
    let (w, h) = img.dims();
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = win.source(x, y);
            let sx = sx.clamp(0.0, (w - 1) as f64);
            let sy = sy.clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
            let mut px = [0u8; 3];
            for k in 0..3 {
                let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
                let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
                px[k] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
            }
            pixels.push(px);
        }
    }
    RgbImage { width: w, height: h, pixels }
}

/// Applies the same geometric transform to an image and its mask.
pub fn apply_geometric(img: &RgbImage, mask: &Mask, op: GeometricOp) -> Result<(RgbImage, Mask), AugmentError> {
    if img.dims() != mask.dims() {
        return Err(AugmentError::DimensionMismatch(img.dims(), mask.dims()));
    }
    let (w, h) = img.dims();
    match op {
        GeometricOp::Zoom { scale, cx, cy } => {
            let win = zoom_window(scale, cx, cy, w, h)?;
            Ok((zoom_image(img, &win), zoom_mask(mask, &win)))
        }
        _ => {
            let (pixels, nw, nh) = permute(&img.pixels, w, h, op);
            let (labels, _, _) = permute(mask.labels(), w, h, op);
            Ok((
                RgbImage { width: nw, height: nh, pixels },
                Mask::new(nw, nh, labels).expect("permutation keeps pixel count"),
            ))
        }
    }
}

/// Even-odd crossing test.
pub fn point_in_polygon(px: f64, py: f64, polygon: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = polygon[i];
        let [xj, yj] = polygon[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn scale_channel(c: u8, f: f64) -> u8 {
    (c as f64 * f).floor().clamp(0.0, 255.0) as u8
}

/// Applies a lighting change to the image; masks are never involved.
pub fn apply_photometric(img: &RgbImage, op: &PhotometricOp) -> Result<RgbImage, AugmentError> {
    match op {
        PhotometricOp::Brightness { factor } => {
            let f = *factor;
            if !(f > 0.0 && f.is_finite()) {
                return Err(AugmentError::BadFactor(f));
            }
            let pixels = img.pixels.iter().map(|p| p.map(|c| scale_channel(c, f))).collect();
            Ok(RgbImage { pixels, ..*img })
        }
        PhotometricOp::Shadow { polygon, attenuation } => {
            let a = *attenuation;
            if !(a > 0.0 && a <= 1.0) {
                return Err(AugmentError::BadFactor(a));
            }
            if polygon.len() < 3 {
                return Err(AugmentError::BadPolygon(format!("{} vertices", polygon.len())));
            }
            let (w, h) = (img.width as f64, img.height as f64);
            if let Some(v) = polygon.iter().find(|[x, y]| !(0.0..=w).contains(x) || !(0.0..=h).contains(y)) {
                return Err(AugmentError::BadPolygon(format!("vertex {v:?} outside the image")));
            }
            let mut out = img.clone();
            for y in 0..img.height {
                for x in 0..img.width {
                    if point_in_polygon(x as f64 + 0.5, y as f64 + 0.5, polygon) {
                        let i = y as usize * img.width as usize + x as usize;
                        out.pixels[i] = out.pixels[i].map(|c| scale_channel(c, a));
                    }
                }
            }
            Ok(out)
        }
    }
}

fn default_p() -> f64 {
    0.5
}

fn default_min_scale() -> f64 {
    0.8
}

/// One randomized step of an augmentation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpTemplate {
    /// Horizontal flip with probability `p`.
    Hflip {
        #[serde(default = "default_p")]
        p: f64,
    },
    Vflip {
        #[serde(default = "default_p")]
        p: f64,
    },
    /// Quarter turns: fixed `k`, or uniform over 0..4 when absent.
    Rot90 {
        #[serde(default)]
        k: Option<u8>,
    },
    /// Centered-anywhere crop with linear scale uniform in `[min_scale, 1]`.
    Zoom {
        #[serde(default = "default_min_scale")]
        min_scale: f64,
    },
    Brightness {
        lo: f64,
        hi: f64,
    },
    Shadow {
        count: u32,
        attenuation_lo: f64,
        attenuation_hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub seed: u64,
    pub ops: Vec<OpTemplate>,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            seed: 0,
            ops: vec![
                OpTemplate::Hflip { p: 0.5 },
                OpTemplate::Vflip { p: 0.5 },
                OpTemplate::Rot90 { k: None },
                OpTemplate::Zoom { min_scale: 0.8 },
                OpTemplate::Brightness { lo: 0.75, hi: 1.25 },
                OpTemplate::Shadow { count: 1, attenuation_lo: 0.5, attenuation_hi: 0.9 },
            ],
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |msg: String| Err(AugmentError::BadSpec(msg));
        for op in &self.ops {
            match *op {
                OpTemplate::Hflip { p } | OpTemplate::Vflip { p } if !(0.0..=1.0).contains(&p) => {
                    return bad(format!("flip probability {p} outside [0, 1]"))
                }
                OpTemplate::Zoom { min_scale } if !(min_scale > 0.0 && min_scale <= 1.0) => {
                    return bad(format!("min_scale {min_scale} outside (0, 1]"))
                }
                OpTemplate::Brightness { lo, hi } if !(lo > 0.0 && lo <= hi && hi.is_finite()) => {
                    return bad(format!("brightness range [{lo}, {hi}] must be positive and ordered"))
                }
                OpTemplate::Shadow { attenuation_lo: lo, attenuation_hi: hi, .. }
                    if !(lo > 0.0 && lo <= hi && hi <= 1.0) =>
                {
                    return bad(format!("attenuation range [{lo}, {hi}] must lie in (0, 1]"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A concrete, resolution-independent augmentation step.
///
/// Positions are fractions of the current image size so the same op list
/// applies to any input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SampledOp {
    Hflip,
    Vflip,
    Rot90 { k: u8 },
    Zoom { scale: f64, cx: f64, cy: f64 },
    Brightness { factor: f64 },
    Shadow { polygon: Vec<[f64; 2]>, attenuation: f64 },
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Convex polygon with 3-6 vertices on an ellipse that fits in the unit square.
fn sample_shadow_polygon(rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let n = rng.gen_range(3..=6);
    let cx = uniform(rng, 0.2, 0.8);
    let cy = uniform(rng, 0.2, 0.8);
    let rx = uniform(rng, 0.1, cx.min(1.0 - cx));
    let ry = uniform(rng, 0.1, cy.min(1.0 - cy));
    let mut angles: Vec<f64> = (0..n).map(|_| uniform(rng, 0.0, std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.into_iter().map(|t| [(cx + rx * t.cos()).clamp(0.0, 1.0), (cy + ry * t.sin()).clamp(0.0, 1.0)]).collect()
}

/// Draws the concrete op list for sample `index`; identical `(seed, index)` give identical lists.
pub fn sample_augmentation(spec: &AugmentSpec, index: u64) -> Vec<SampledOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let mut ops = Vec::new();
    for t in &spec.ops {
        match *t {
            OpTemplate::Hflip { p } => {
                if rng.gen::<f64>() < p {
                    ops.push(SampledOp::Hflip);
                }
            }
            OpTemplate::Vflip { p } => {
                if rng.gen::<f64>() < p {
                    ops.push(SampledOp::Vflip);
                }
            }
            OpTemplate::Rot90 { k } => {
                let k = k.unwrap_or_else(|| rng.gen_range(0..4));
                ops.push(SampledOp::Rot90 { k: k % 4 });
            }
            OpTemplate::Zoom { min_scale } => {
                let scale = uniform(&mut rng, min_scale, 1.0);
                // window center chosen so the crop stays inside the image
                let cx = uniform(&mut rng, scale / 2.0, 1.0 - scale / 2.0);
                let cy = uniform(&mut rng, scale / 2.0, 1.0 - scale / 2.0);
                ops.push(SampledOp::Zoom { scale, cx, cy });
            }
            OpTemplate::Brightness { lo, hi } => {
                ops.push(SampledOp::Brightness { factor: uniform(&mut rng, lo, hi) });
            }
            OpTemplate::Shadow { count, attenuation_lo, attenuation_hi } => {
                for _ in 0..count {
                    let polygon = sample_shadow_polygon(&mut rng);
                    let attenuation = uniform(&mut rng, attenuation_lo, attenuation_hi);
                    ops.push(SampledOp::Shadow { polygon, attenuation });
                }
            }
        }
    }
    ops
}

/// Runs a sampled op list over an image/mask pair.
pub fn apply_sampled(img: &RgbImage, mask: &Mask, ops: &[SampledOp]) -> Result<(RgbImage, Mask), AugmentError> {
    let (mut img, mut mask) = (img.clone(), mask.clone());
    for op in ops {
        let (w, h) = (img.width as f64, img.height as f64);
        match op {
            SampledOp::Hflip => (img, mask) = apply_geometric(&img, &mask, GeometricOp::Hflip)?,
            SampledOp::Vflip => (img, mask) = apply_geometric(&img, &mask, GeometricOp::Vflip)?,
            SampledOp::Rot90 { k } => (img, mask) = apply_geometric(&img, &mask, GeometricOp::Rot90 { k: *k })?,
            SampledOp::Zoom { scale, cx, cy } => {
                let op = GeometricOp::Zoom { scale: *scale, cx: cx * w, cy: cy * h };
                (img, mask) = apply_geometric(&img, &mask, op)?;
            }
            SampledOp::Brightness { factor } => {
                img = apply_photometric(&img, &PhotometricOp::Brightness { factor: *factor })?;
            }
            SampledOp::Shadow { polygon, attenuation } => {
                let polygon = polygon.iter().map(|[x, y]| [x * w, y * h]).collect();
                img = apply_photometric(&img, &PhotometricOp::Shadow { polygon, attenuation: *attenuation })?;
            }
        }
    }
    Ok((img, mask))
}
