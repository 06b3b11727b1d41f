//! Parked-car reclassification.
//!
//! Every 8-connected component of car pixels is outlined by its 1-pixel
//! contour, the contour is dilated with a square kernel, and the pixels of the
//! input mask under the dilated contour vote: background pixels count for
//! "parked", road pixels count for "moving". A component with strictly more
//! background votes than road votes is relabeled as parked. Pixels of any
//! other class (other cars, already-parked cars, `other` roles) do not vote.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::maskcore::{ClassId, Mask, Palette, Role};
use crate::morphology::{self, BinaryMask, Connectivity, MorphError};

pub const DEFAULT_KERNEL: u32 = 15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetectError {
    #[error("palette has no class with role {0}")]
    MissingRole(Role),
    #[error("a component must be relabeled as parked but no parked-car class is configured")]
    MissingParkedTarget,
    #[error("kernel size must be odd and at least 1, got {0}")]
    EvenKernel(u32),
    #[error("mask label {0} is not in the palette")]
    UnknownClassId(ClassId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentVerdict {
    pub component_id: u32,
    /// First pixel of the component in raster order; identifies the component
    /// independently of id numbering.
    pub anchor: (u32, u32),
    pub car_pixel_count: usize,
    pub background_votes: usize,
    pub road_votes: usize,
    pub reclassified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub mask: Mask,
    pub verdicts: Vec<ComponentVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectParams {
    /// Side of the square dilation kernel; must be odd.
    pub kernel: u32,
    /// Relabel target when the palette has no parked-car role.
    pub parked_target: Option<ClassId>,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams { kernel: DEFAULT_KERNEL, parked_target: None }
    }
}

impl DetectParams {
    pub fn with_kernel(kernel: u32) -> Self {
        DetectParams { kernel, ..Default::default() }
    }
}

struct Roles {
    background: ClassId,
    road: ClassId,
    car: ClassId,
    target: Option<ClassId>,
}

fn resolve_roles(palette: &Palette, params: &DetectParams) -> Result<Roles, DetectError> {
    let need = |role| palette.id_for_role(role).ok_or(DetectError::MissingRole(role));
    let roles = Roles {
        background: need(Role::Background)?,
        road: need(Role::Road)?,
        car: need(Role::Car)?,
        target: params.parked_target.or_else(|| palette.id_for_role(Role::ParkedCar)),
    };
    if let Some(t) = params.parked_target {
        if !palette.contains(t) {
            return Err(DetectError::UnknownClassId(t));
        }
    }
    Ok(roles)
}

fn check_inputs(mask: &Mask, palette: &Palette, params: &DetectParams) -> Result<Roles, DetectError> {
    if params.kernel.is_multiple_of(2) {
        return Err(DetectError::EvenKernel(params.kernel));
    }
    let roles = resolve_roles(palette, params)?;
    if let Some(&l) = mask.labels().iter().find(|&&l| !palette.contains(l)) {
        return Err(DetectError::UnknownClassId(l));
    }
    Ok(roles)
}

fn relabel(mask: &Mask, roles: &Roles, parked: impl Iterator<Item = Vec<usize>>) -> Result<Mask, DetectError> {
    let mut out = mask.clone();
    let labels = out.labels_mut();
    for pixels in parked {
        let target = roles.target.ok_or(DetectError::MissingParkedTarget)?;
        for i in pixels {
            labels[i] = target;
        }
    }
    Ok(out)
}

/// Reclassifies car components whose dilated contour sees more background than road.
///
/// Each component is processed inside its bounding box grown by the kernel
/// radius, so the cost scales with the total component area rather than
/// `components x image size`.
pub fn detect_parked(mask: &Mask, palette: &Palette, params: &DetectParams) -> Result<Detection, DetectError> {
    let roles = check_inputs(mask, palette, params)?;
    let (w, h) = mask.dims();
    let radius = params.kernel / 2;

    let car_bits = BinaryMask::new(w, h, mask.labels().iter().map(|&l| l == roles.car).collect())
        .expect("dimensions copied from a valid mask");
    let cc = morphology::connected_components(&car_bits, Connectivity::Eight);
    let infos = cc.components();

    let verdicts: Vec<ComponentVerdict> = infos
        .par_iter()
        .map(|info| -> Result<ComponentVerdict, MorphError> {
            let win = info.bbox.expand(radius, w, h);
            // contour pixels lie inside the bbox, so the window holds the whole band
            let contour = morphology::boundary_in_window(&cc, info.id, win)?;
            let band = morphology::dilate_rect(&contour, params.kernel, params.kernel)?;
            let (mut bg, mut road) = (0usize, 0usize);
            for ly in 0..win.height() {
                for lx in 0..win.width() {
                    if !band.get(lx, ly) {
                        continue;
                    }
                    let l = mask.get(win.x0 + lx, win.y0 + ly);
                    if l == roles.background {
                        bg += 1;
                    } else if l == roles.road {
                        road += 1;
                    }
                }
            }
            Ok(ComponentVerdict {
                component_id: info.id,
                anchor: info.anchor,
                car_pixel_count: info.pixel_count,
                background_votes: bg,
                road_votes: road,
                reclassified: bg > road,
            })
        })
        .collect::<Result<_, _>>()
        .expect("kernel checked odd and component ids come from the labeling");

    let parked = verdicts.iter().filter(|v| v.reclassified).map(|v| {
        let win = infos[(v.component_id - 1) as usize].bbox;
        let mut px = Vec::with_capacity(v.car_pixel_count);
        for y in win.y0..win.y1 {
            for x in win.x0..win.x1 {
                if cc.get(x, y) == v.component_id {
                    px.push(y as usize * w as usize + x as usize);
                }
            }
        }
        px
    });
    let out = relabel(mask, &roles, parked)?;
    Ok(Detection { mask: out, verdicts })
}

/// Brute-force twin of [`detect_parked`] used to cross-check it.
///
/// Components come from a breadth-first flood fill, contour pixels from a
/// direct neighbor test, and the voting band from stamping a Chebyshev
/// square around every contour pixel. No shared morphology code is used.
pub fn detect_parked_naive(mask: &Mask, palette: &Palette, params: &DetectParams) -> Result<Detection, DetectError> {
    let roles = check_inputs(mask, palette, params)?;
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let r = (params.kernel / 2) as i64;
    let idx = |x: i64, y: i64| (y * w + x) as usize;
    let is_car = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && mask.labels()[idx(x, y)] == roles.car;

    let mut comp = vec![0u32; (w * h) as usize];
    let mut verdicts = Vec::new();
    let mut parked = Vec::new();
    let mut next_id = 0u32;

    for sy in 0..h {
        for sx in 0..w {
            if !is_car(sx, sy) || comp[idx(sx, sy)] != 0 {
                continue;
            }
            next_id += 1;
            let id = next_id;
            let mut pixels = Vec::new();
            let mut queue = VecDeque::from([(sx, sy)]);
            comp[idx(sx, sy)] = id;
            while let Some((x, y)) = queue.pop_front() {
                pixels.push((x, y));
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if is_car(nx, ny) && comp[idx(nx, ny)] == 0 {
                            comp[idx(nx, ny)] = id;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }

            let in_comp = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && comp[idx(x, y)] == id;
            let mut band = vec![false; (w * h) as usize];
            for &(x, y) in &pixels {
                let on_contour = !in_comp(x - 1, y) || !in_comp(x + 1, y) || !in_comp(x, y - 1) || !in_comp(x, y + 1);
                if !on_contour {
                    continue;
                }
                for by in (y - r).max(0)..=(y + r).min(h - 1) {
                    for bx in (x - r).max(0)..=(x + r).min(w - 1) {
                        band[idx(bx, by)] = true;
                    }
                }
            }
            let (mut bg, mut road) = (0, 0);
            for (i, &b) in band.iter().enumerate() {
                if b {
                    let l = mask.labels()[i];
                    bg += (l == roles.background) as usize;
                    road += (l == roles.road) as usize;
                }
            }
            let reclassified = bg > road;
            verdicts.push(ComponentVerdict {
                component_id: id,
                anchor: (sx as u32, sy as u32),
                car_pixel_count: pixels.len(),
                background_votes: bg,
                road_votes: road,
                reclassified,
            });
            if reclassified {
                parked.push(pixels.iter().map(|&(x, y)| idx(x, y)).collect());
            }
        }
    }
    let out = relabel(mask, &roles, parked.into_iter())?;
    Ok(Detection { mask: out, verdicts })
}

/// Verdict report as comma-separated text with a header row.
pub fn verdicts_to_csv(verdicts: &[ComponentVerdict]) -> String {
    let mut s = String::from("component_id,car_pixels,background_votes,road_votes,decision\n");
    for v in verdicts {
        let decision = if v.reclassified { "parked" } else { "moving" };
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            v.component_id, v.car_pixel_count, v.background_votes, v.road_votes, decision
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const BG: ClassId = 0;
    const ROAD: ClassId = 1;
    const CAR: ClassId = 2;
    const PARKED: ClassId = 3;

    fn both(mask: &Mask, palette: &Palette, params: DetectParams) -> Detection {
        let fast = detect_parked(mask, palette, &params).unwrap();
        let naive = detect_parked_naive(mask, palette, &params).unwrap();
        assert_eq!(fast, naive);
        fast
    }

    fn with_car(background: ClassId, x0: u32, y0: u32, cw: u32, ch: u32) -> Mask {
        let mut m = Mask::filled(40, 40, background);
        for y in y0..y0 + ch {
            for x in x0..x0 + cw {
                m.set(x, y, CAR);
            }
        }
        m
    }

    #[test]
    fn car_on_road_stays() {
        let p = Palette::default_four_class();
        let m = with_car(ROAD, 15, 15, 6, 4);
        let d = both(&m, &p, DetectParams::default());
        assert_eq!(d.mask, m);
        assert_eq!(d.verdicts.len(), 1);
        let v = d.verdicts[0];
        assert_eq!((v.background_votes, v.car_pixel_count, v.reclassified), (0, 24, false));
        assert!(v.road_votes > 0);
    }

    #[test]
    fn car_on_background_is_parked() {
        let p = Palette::default_four_class();
        let m = with_car(BG, 15, 15, 6, 4);
        let d = both(&m, &p, DetectParams::default());
        assert!(d.verdicts[0].reclassified);
        // 20x18 band window minus the 24 car pixels
        assert_eq!(d.verdicts[0].background_votes, 20 * 18 - 24);
        let mut expect = m.clone();
        for l in expect.labels_mut() {
            if *l == CAR {
                *l = PARKED;
            }
        }
        assert_eq!(d.mask, expect);
    }

    #[test]
    fn tie_is_not_reclassified() {
        // single car pixel at (20,20): its 15x15 band spans 13..=27 on both axes.
        // Fill the band with non-voting parked pixels, then 30 background and 30 road.
        let p = Palette::default_four_class();
        let mut m = Mask::filled(40, 40, ROAD);
        let mut k = 0;
        for y in 13..=27 {
            for x in 13..=27 {
                let l = match k {
                    0..=29 => BG,
                    30..=59 => ROAD,
                    _ => PARKED,
                };
                m.set(x, y, l);
                k += 1;
            }
        }
        m.set(20, 20, CAR);
        let d = both(&m, &p, DetectParams::default());
        let v = d.verdicts[0];
        assert_eq!((v.background_votes, v.road_votes, v.reclassified), (30, 30, false));
        assert_eq!(d.mask, m);

        // one more background vote tips it
        m.set(27, 27, BG);
        let d = both(&m, &p, DetectParams::default());
        assert_eq!((d.verdicts[0].background_votes, d.verdicts[0].reclassified), (31, true));
    }

    #[test]
    fn other_cars_do_not_vote() {
        let p = Palette::default_four_class();
        let mut m = with_car(BG, 10, 10, 3, 3);
        // second car one column to the right of a one-pixel gap
        for y in 10..13 {
            m.set(14, y, CAR);
        }
        let d = both(&m, &p, DetectParams::with_kernel(5));
        assert_eq!(d.verdicts.len(), 2);
        // car 1 band: 7x7 window minus its own 9 pixels minus car 2's 3 pixels
        assert_eq!(d.verdicts[0].background_votes, 49 - 9 - 3);
        // car 2 band: 5x7 window minus its own 3 pixels minus car 1's column at x=12
        assert_eq!(d.verdicts[1].background_votes, 35 - 3 - 3);
        assert_eq!(d.verdicts[1].road_votes, 0);
    }

    #[test]
    fn kernel_one_never_reclassifies() {
        let p = Palette::default_four_class();
        let d = both(&with_car(BG, 3, 3, 5, 5), &p, DetectParams::with_kernel(1));
        assert_eq!((d.verdicts[0].background_votes, d.verdicts[0].road_votes), (0, 0));
        assert!(!d.verdicts[0].reclassified);
    }

    #[test]
    fn empty_car_class() {
        let p = Palette::default_four_class();
        let m = Mask::filled(8, 8, ROAD);
        let d = both(&m, &p, DetectParams::default());
        assert!(d.verdicts.is_empty());
        assert_eq!(d.mask, m);
    }

    #[test]
    fn role_errors() {
        let m = with_car(BG, 3, 3, 2, 2);
        let three = Palette::default_three_class();
        assert_eq!(detect_parked(&m, &three, &DetectParams::default()), Err(DetectError::MissingParkedTarget));
        // road car is fine without a target, because nothing needs relabeling
        assert!(detect_parked(&with_car(ROAD, 3, 3, 2, 2), &three, &DetectParams::default()).is_ok());
        let d = detect_parked(&m, &three, &DetectParams { kernel: 15, parked_target: Some(ROAD) }).unwrap();
        assert!(d.mask.labels().iter().all(|&l| l != CAR));

        let no_road = Palette::new(vec![three.entry(BG).unwrap().clone(), three.entry(CAR).unwrap().clone()]).unwrap();
        assert_eq!(
            detect_parked(&Mask::filled(2, 2, BG), &no_road, &DetectParams::default()),
            Err(DetectError::MissingRole(Role::Road))
        );
        assert_eq!(detect_parked(&m, &three, &DetectParams::with_kernel(4)), Err(DetectError::EvenKernel(4)));
        assert_eq!(
            detect_parked(&Mask::filled(2, 2, 7), &three, &DetectParams::default()),
            Err(DetectError::UnknownClassId(7))
        );
    }

    #[test]
    fn csv_report() {
        let p = Palette::default_four_class();
        let d = detect_parked(&with_car(BG, 3, 3, 2, 2), &p, &DetectParams::with_kernel(3)).unwrap();
        assert_eq!(
            verdicts_to_csv(&d.verdicts),
            "component_id,car_pixels,background_votes,road_votes,decision\n1,4,12,0,parked\n"
        );
    }
}
