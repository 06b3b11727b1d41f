//! Palettes, label masks and their PNG representation.
//!
//! A [`Mask`] is a row-major grid of class ids. On disk it is an 8-bit RGB PNG
//! where every pixel carries the exact palette color of its class; decoding can
//! optionally snap near-palette colors (anti-aliased edges from annotation
//! tools) to the nearest palette entry within a Euclidean tolerance.

mod codec;
mod manifest;
mod palette;

use std::collections::BTreeMap;

use thiserror::Error;

pub use codec::{decode_mask, decode_rgb_image, encode_mask, encode_rgb, rgb_to_mask};
pub use manifest::{parse_manifest, validate_manifest, ManifestEntry, ManifestViolation, Split};
pub use palette::{ClassId, Palette, PaletteEntry, Rgb, Role};

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("unknown color {rgb:?} at pixel ({x}, {y})")]
    UnknownColor { x: u32, y: u32, rgb: Rgb },
    #[error("ambiguous color {rgb:?} at pixel ({x}, {y}): equidistant from classes {first} and {second}")]
    AmbiguousColor { x: u32, y: u32, rgb: Rgb, first: ClassId, second: ClassId },
    #[error("class id {0} is not in the palette")]
    UnknownClassId(ClassId),
    #[error("invalid palette: {0}")]
    InvalidPalette(String),
    #[error("invalid mask dimensions {width}x{height} for {len} labels")]
    BadDimensions { width: u32, height: u32, len: usize },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
}

/// Row-major grid of class ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: u32,
    height: u32,
    labels: Vec<ClassId>,
}

impl Mask {
    pub fn new(width: u32, height: u32, labels: Vec<ClassId>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 || labels.len() != width as usize * height as usize {
            return Err(MaskError::BadDimensions { width, height, len: labels.len() });
        }
        Ok(Mask { width, height, labels })
    }

    /// Mask of the given size with every pixel set to `class`.
    pub fn filled(width: u32, height: u32, class: ClassId) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Mask { width, height, labels: vec![class; width as usize * height as usize] }
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

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [ClassId] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<ClassId> {
        self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> ClassId {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, class: ClassId) {
        let w = self.width as usize;
        self.labels[y as usize * w + x as usize] = class;
    }

    /// Checks that every label is a class of `palette`.
    pub fn validate(&self, palette: &Palette) -> Result<(), MaskError> {
        match self.labels.iter().find(|&&l| !palette.contains(l)) {
            Some(&l) => Err(MaskError::UnknownClassId(l)),
            None => Ok(()),
        }
    }
}

/// Pixel count per class id present in the mask.
pub fn class_histogram(mask: &Mask) -> BTreeMap<ClassId, usize> {
    let mut counts = [0usize; 256];
    for &l in mask.labels() {
        counts[l as usize] += 1;
    }
    counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(id, &c)| (id as ClassId, c)).collect()
}
