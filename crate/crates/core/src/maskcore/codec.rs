use std::collections::HashMap;
use std::io::Cursor;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::{ClassId, Mask, MaskError, Palette, Rgb};
use crate::augment::RgbImage;

/// Decodes PNG bytes into an RGB raster. Non-RGB8 inputs are converted.
pub fn decode_rgb_image(png_bytes: &[u8]) -> Result<RgbImage, MaskError> {
    let img = image::load_from_memory_with_format(png_bytes, ImageFormat::Png)
        .map_err(|e| MaskError::MalformedImage(e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| p.0).collect();
    RgbImage::new(w, h, pixels).map_err(|e| MaskError::MalformedImage(e.to_string()))
}

pub fn encode_rgb(img: &RgbImage) -> Vec<u8> {
    let raw: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    let mut out = Vec::new();
    PngEncoder::new(Cursor::new(&mut out))
        .write_image(&raw, img.width(), img.height(), ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding of a well-formed buffer cannot fail");
    out
}

/// Decodes a palette-colored PNG into a class mask.
///
/// `tolerance` is the largest Euclidean RGB distance at which a pixel snaps
/// to a palette color; 0 requires an exact match.
pub fn decode_mask(png_bytes: &[u8], palette: &Palette, tolerance: u32) -> Result<Mask, MaskError> {
    let img = decode_rgb_image(png_bytes)?;
    rgb_to_mask(&img, palette, tolerance)
}

enum Lookup {
    Class(ClassId),
    Unknown,
    Ambiguous(ClassId, ClassId),
}

fn nearest(rgb: Rgb, palette: &Palette, tol_sq: u64) -> Lookup {
    let mut best: Option<(u64, ClassId)> = None;
    let mut tie: Option<ClassId> = None;
    for e in palette.entries() {
        let d: u64 = rgb
            .iter()
            .zip(e.color.iter())
            .map(|(&a, &b)| {
                let diff = a as i64 - b as i64;
                (diff * diff) as u64
            })
            .sum();
        match best {
            Some((bd, _)) if d > bd => {}
            Some((bd, _)) if d == bd => tie = Some(e.id),
            _ => {
                best = Some((d, e.id));
                tie = None;
            }
        }
    }
    match (best, tie) {
        (Some((d, _)), _) if d > tol_sq => Lookup::Unknown,
        (Some((_, id)), Some(other)) => Lookup::Ambiguous(id, other),
        (Some((_, id)), None) => Lookup::Class(id),
        (None, _) => Lookup::Unknown,
    }
}

/// Maps every pixel of an RGB raster to its palette class.
pub fn rgb_to_mask(img: &RgbImage, palette: &Palette, tolerance: u32) -> Result<Mask, MaskError> {
    let tol_sq = tolerance as u64 * tolerance as u64;
    let exact: HashMap<Rgb, ClassId> = palette.entries().iter().map(|e| (e.color, e.id)).collect();
    let mut cache: HashMap<Rgb, ClassId> = HashMap::new();
    let w = img.width();
    let mut labels = Vec::with_capacity(img.pixels().len());
    for (i, &rgb) in img.pixels().iter().enumerate() {
        if let Some(&id) = exact.get(&rgb).or_else(|| cache.get(&rgb)) {
            labels.push(id);
            continue;
        }
        let (x, y) = ((i as u32) % w, (i as u32) / w);
        match nearest(rgb, palette, tol_sq) {
            Lookup::Class(id) => {
                cache.insert(rgb, id);
                labels.push(id);
            }
            Lookup::Unknown => return Err(MaskError::UnknownColor { x, y, rgb }),
            Lookup::Ambiguous(first, second) => return Err(MaskError::AmbiguousColor { x, y, rgb, first, second }),
        }
    }
    Mask::new(img.width(), img.height(), labels)
}

/// Encodes a mask as an RGB PNG carrying the exact palette color of each label.
pub fn encode_mask(mask: &Mask, palette: &Palette) -> Result<Vec<u8>, MaskError> {
    let mut lut: [Option<Rgb>; 256] = [None; 256];
    for e in palette.entries() {
        lut[e.id as usize] = Some(e.color);
    }
    let mut raw = Vec::with_capacity(mask.len() * 3);
    for &l in mask.labels() {
        let c = lut[l as usize].ok_or(MaskError::UnknownClassId(l))?;
        raw.extend_from_slice(&c);
    }
    let mut out = Vec::new();
    PngEncoder::new(Cursor::new(&mut out))
        .write_image(&raw, mask.width(), mask.height(), ExtendedColorType::Rgb8)
        .map_err(|e| MaskError::MalformedImage(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskcore::{PaletteEntry, Role};
    use proptest::prelude::*;

    fn png_of(w: u32, h: u32, rgb: Rgb) -> Vec<u8> {
        encode_rgb(&RgbImage::new(w, h, vec![rgb; (w * h) as usize]).unwrap())
    }

    /// Independent nearest-color oracle: brute force over every palette entry
    /// using floating-point distances.
    fn oracle_nearest(rgb: Rgb, palette: &Palette, tolerance: f64) -> Option<ClassId> {
        let dists: Vec<(f64, ClassId)> = palette
            .entries()
            .iter()
            .map(|e| {
                let d = (0..3).map(|k| (rgb[k] as f64 - e.color[k] as f64).powi(2)).sum::<f64>().sqrt();
                (d, e.id)
            })
            .collect();
        let min = dists.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
        let winners: Vec<_> = dists.iter().filter(|d| d.0 == min).collect();
        (min <= tolerance && winners.len() == 1).then(|| winners[0].1)
    }

    #[test]
    fn strict_exact_color() {
        let p = Palette::default_four_class();
        let m = decode_mask(&png_of(1, 1, [0, 0, 0]), &p, 0).unwrap();
        assert_eq!(m.labels(), &[p.background()]);
    }

    #[test]
    fn strict_rejects_off_palette() {
        let p = Palette::default_four_class();
        let err = decode_mask(&png_of(1, 1, [10, 10, 10]), &p, 0).unwrap_err();
        assert!(matches!(err, MaskError::UnknownColor { x: 0, y: 0, rgb: [10, 10, 10] }));
    }

    #[test]
    fn tolerance_snaps_to_nearest() {
        let p = Palette::default_four_class();
        // sqrt(300) ~= 17.3 to black; every other entry is much farther
        assert_eq!(oracle_nearest([10, 10, 10], &p, 32.0), Some(0));
        let m = decode_mask(&png_of(1, 1, [10, 10, 10]), &p, 32).unwrap();
        assert_eq!(m.labels(), &[0]);
        // 17 < sqrt(300) < 18
        assert!(decode_mask(&png_of(1, 1, [10, 10, 10]), &p, 17).is_err());
        assert!(decode_mask(&png_of(1, 1, [10, 10, 10]), &p, 18).is_ok());
    }

    #[test]
    fn equidistant_is_ambiguous() {
        let p = Palette::new(vec![
            PaletteEntry { id: 0, name: "bg".into(), color: [0, 0, 0], role: Role::Background },
            PaletteEntry { id: 1, name: "road".into(), color: [20, 0, 0], role: Role::Road },
        ])
        .unwrap();
        let err = decode_mask(&png_of(1, 1, [10, 0, 0]), &p, 50).unwrap_err();
        assert!(matches!(err, MaskError::AmbiguousColor { .. }));
    }

    #[test]
    fn malformed_bytes() {
        let p = Palette::default_four_class();
        assert!(matches!(decode_mask(b"not a png", &p, 0), Err(MaskError::MalformedImage(_))));
    }

    #[test]
    fn encode_examples() {
        let p = Palette::default_four_class();
        let bytes = encode_mask(&Mask::filled(2, 2, 0), &p).unwrap();
        let img = decode_rgb_image(&bytes).unwrap();
        assert_eq!(img.dims(), (2, 2));
        assert!(img.pixels().iter().all(|&c| c == [0, 0, 0]));

        let car = p.id_for_role(Role::Car).unwrap();
        let img = decode_rgb_image(&encode_mask(&Mask::filled(1, 1, car), &p).unwrap()).unwrap();
        assert_eq!(img.pixels(), &[[0, 0, 255]]);

        assert!(matches!(encode_mask(&Mask::filled(1, 1, 9), &p), Err(MaskError::UnknownClassId(9))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn codec_round_trip(labels in proptest::collection::vec(0u8..4, 64 * 64)) {
            let p = Palette::default_four_class();
            let m = Mask::new(64, 64, labels).unwrap();
            let back = decode_mask(&encode_mask(&m, &p).unwrap(), &p, 0).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn tolerant_decode_matches_oracle(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255, tol in 0u32..200) {
            let p = Palette::default_four_class();
            let got = decode_mask(&png_of(1, 1, [r, g, b]), &p, tol).ok().map(|m| m.labels()[0]);
            prop_assert_eq!(got, oracle_nearest([r, g, b], &p, tol as f64));
        }
    }
}
