//! Three-color error visualization of a prediction against ground truth.
//!
//! White marks true positives, red false negatives (missed), green false
//! positives (spurious), black everything excluded from the evaluation.

use crate::augment::RgbImage;
use crate::maskcore::{ClassId, Mask, Palette, Rgb};
use crate::metrics::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorColor {
    White,
    Red,
    Green,
    Black,
}

impl ErrorColor {
    pub const ALL: [ErrorColor; 4] = [ErrorColor::White, ErrorColor::Red, ErrorColor::Green, ErrorColor::Black];

    pub fn rgb(self) -> Rgb {
        match self {
            ErrorColor::White => [255, 255, 255],
            ErrorColor::Red => [255, 0, 0],
            ErrorColor::Green => [0, 255, 0],
            ErrorColor::Black => [0, 0, 0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// Every non-background class counts as foreground.
    AllForeground,
    SingleClass(ClassId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorImage {
    width: u32,
    height: u32,
    pixels: Vec<ErrorColor>,
}

impl ErrorImage {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[ErrorColor] {
        &self.pixels
    }

    pub fn count(&self, color: ErrorColor) -> usize {
        self.pixels.iter().filter(|&&c| c == color).count()
    }

    pub fn to_rgb(&self) -> RgbImage {
        RgbImage::new(self.width, self.height, self.pixels.iter().map(|c| c.rgb()).collect())
            .expect("dimensions match pixel count")
    }
}

pub fn error_mask(gt: &Mask, pred: &Mask, palette: &Palette, mode: ErrorMode) -> Result<ErrorImage, MetricsError> {
    if gt.dims() != pred.dims() {
        return Err(MetricsError::DimensionMismatch(gt.dims(), pred.dims()));
    }
    if let ErrorMode::SingleClass(c) = mode {
        if !palette.contains(c) {
            return Err(MetricsError::UnknownClass(c));
        }
    }
    let bg = palette.background();
    let pixels = gt
        .labels()
        .iter()
        .zip(pred.labels())
        .map(|(&g, &p)| match mode {
            ErrorMode::AllForeground => match (g != bg, p != bg) {
                (true, _) if g == p => ErrorColor::White,
                (true, _) => ErrorColor::Red,
                (false, true) => ErrorColor::Green,
                (false, false) => ErrorColor::Black,
            },
            ErrorMode::SingleClass(c) => match (g == c, p == c) {
                (true, true) => ErrorColor::White,
                (true, false) => ErrorColor::Red,
                (false, true) => ErrorColor::Green,
                (false, false) => ErrorColor::Black,
            },
        })
        .collect();
    Ok(ErrorImage { width: gt.width(), height: gt.height(), pixels })
}
