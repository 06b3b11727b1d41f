//! Post-processing and evaluation of color-coded aerial segmentation masks.
//!
//! - [`maskcore`]: palettes, label masks, PNG codec and dataset manifests
//! - [`morphology`]: connected components, contours and rectangular dilation
//! - [`parkdetect`]: contour-dilation voting that separates parked from moving cars
//! - [`metrics`]: confusion matrices, foreground accuracy, Dice, Jaccard, focal loss
//! - [`errmask`]: white/red/green error visualization
//! - [`augment`]: seeded paired image/mask augmentation
//! - [`synthscene`]: synthetic scenes with known parked/moving truth

pub mod augment;
pub mod errmask;
pub mod maskcore;
pub mod metrics;
pub mod morphology;
pub mod parkdetect;
pub mod synthscene;

pub use maskcore::{ClassId, Mask, Palette, Role};
