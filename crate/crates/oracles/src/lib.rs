//! Slow, obviously-correct reference implementations used to check the
//! optimized code paths, plus deterministic fixture generators.

use std::collections::{BTreeMap, VecDeque};

use parkseg::maskcore::{ClassId, Mask, Palette, Role};
use parkseg::metrics::ConfusionMatrix;
use parkseg::morphology::{BinaryMask, Connectivity};
use parkseg::parkdetect::ComponentVerdict;
use parkseg::synthscene::{Orientation, Rect, SceneSpec, Truth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BG: ClassId = 0;
pub const ROAD: ClassId = 1;
pub const CAR: ClassId = 2;
pub const PARKED: ClassId = 3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Breadth-first flood fill; ids follow raster order of each region's first pixel.
pub fn flood_fill(bm: &BinaryMask, connectivity: Connectivity) -> (Vec<u32>, u32) {
    let (w, h) = (bm.width() as i64, bm.height() as i64);
    let mut labels = vec![0u32; (w * h) as usize];
    let mut count = 0;
    let offsets: &[(i64, i64)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
    };
    for sy in 0..h {
        for sx in 0..w {
            let s = (sy * w + sx) as usize;
            if !bm.bits()[s] || labels[s] != 0 {
                continue;
            }
            count += 1;
            labels[s] = count;
            let mut queue = VecDeque::from([(sx, sy)]);
            while let Some((x, y)) = queue.pop_front() {
                for &(dx, dy) in offsets {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = (ny * w + nx) as usize;
                    if bm.bits()[n] && labels[n] == 0 {
                        labels[n] = count;
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
    }
    (labels, count)
}

/// True when two labelings induce the same partition (0 must map to 0).
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if (x == 0) != (y == 0) {
            return false;
        }
        if *fwd.entry(x).or_insert(y) != y || *back.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// Dilation by explicit scan of the kernel window around every output pixel.
pub fn brute_dilate(bm: &BinaryMask, kw: u32, kh: u32) -> BinaryMask {
    let (rx, ry) = ((kw / 2) as i64, (kh / 2) as i64);
    let (w, h) = (bm.width() as i64, bm.height() as i64);
    BinaryMask::from_fn(bm.width(), bm.height(), |x, y| {
        let (x, y) = (x as i64, y as i64);
        for yy in (y - ry).max(0)..=(y + ry).min(h - 1) {
            for xx in (x - rx).max(0)..=(x + rx).min(w - 1) {
                if bm.get(xx as u32, yy as u32) {
                    return true;
                }
            }
        }
        false
    })
}

pub fn random_binary(rng: &mut ChaCha8Rng, w: u32, h: u32, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density))
}

/// Noise mask: every pixel drawn independently from the four default classes.
pub fn noise_mask(rng: &mut ChaCha8Rng, w: u32, h: u32, weights: [f64; 4]) -> Mask {
    let total: f64 = weights.iter().sum();
    let labels = (0..w * h)
        .map(|_| {
            let mut u = rng.gen::<f64>() * total;
            for (c, &wt) in weights.iter().enumerate() {
                if u < wt {
                    return c as ClassId;
                }
                u -= wt;
            }
            3
        })
        .collect();
    Mask::new(w, h, labels).unwrap()
}

/// Patchy scene: background with random road rectangles, then small car blobs
/// and a sprinkle of parked pixels.
pub fn blocky_mask(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Mask {
    let mut m = Mask::filled(w, h, BG);
    let paint = |m: &mut Mask, rng: &mut ChaCha8Rng, class: ClassId, max: u32| {
        let rw = rng.gen_range(1..=max.min(w));
        let rh = rng.gen_range(1..=max.min(h));
        let x0 = rng.gen_range(0..=w - rw);
        let y0 = rng.gen_range(0..=h - rh);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                m.set(x, y, class);
            }
        }
    };
    for _ in 0..rng.gen_range(0..6) {
        paint(&mut m, rng, ROAD, 40);
    }
    for _ in 0..rng.gen_range(0..25) {
        paint(&mut m, rng, CAR, 6);
    }
    for _ in 0..rng.gen_range(0..4) {
        paint(&mut m, rng, PARKED, 4);
    }
    m
}

/// `(anchor as (y, x), car pixels, background votes, road votes, reclassified)`.
pub type CanonicalVerdict = ((u32, u32), usize, usize, usize, bool);

/// Verdict fields with the component id dropped, ordered by anchor pixel.
pub fn canonical_verdicts(v: &[ComponentVerdict]) -> Vec<CanonicalVerdict> {
    let mut out: Vec<_> = v
        .iter()
        .map(|v| ((v.anchor.1, v.anchor.0), v.car_pixel_count, v.background_votes, v.road_votes, v.reclassified))
        .collect();
    out.sort();
    out
}

/// Fifty hand-shaped masks that stress the parked-car heuristic: exact vote
/// ties, cars touching the border, single-pixel cars and cars with holes.
/// Each fixture comes with the kernel it should be run at.
pub fn adversarial_fixtures() -> Vec<(String, Mask, u32)> {
    let mut out = Vec::new();

    // Ties: one car pixel centered in a k x k band split evenly between
    // background and road (k*k - 1 is even for odd k), rest of canvas parked.
    for (i, &k) in [3u32, 5, 7, 9, 11, 13, 15, 17, 21, 25].iter().enumerate() {
        let size = k + 6 + i as u32;
        let c = size / 2;
        let r = k / 2;
        let mut m = Mask::filled(size, size, PARKED);
        let mut n = 0;
        let half = (k * k - 1) / 2;
        for y in c - r..=c + r {
            for x in c - r..=c + r {
                if (x, y) == (c, c) {
                    m.set(x, y, CAR);
                    continue;
                }
                m.set(x, y, if n < half { BG } else { ROAD });
                n += 1;
            }
        }
        out.push((format!("tie_k{k}"), m, k));
    }

    // Ties with a wider car: a 2x1 car whose 3-kernel band is 5 background / 5 road.
    for shift in 0..5u32 {
        let mut m = Mask::filled(12, 8, BG);
        for y in 0..8 {
            for x in 5 + shift.min(1)..12 {
                m.set(x, y, ROAD);
            }
        }
        let x0 = 4 + shift.min(1);
        m.set(x0, 3 + shift % 3, CAR);
        m.set(x0 + 1, 3 + shift % 3, CAR);
        out.push((format!("tie_wide_{shift}"), m, 3));
    }

    // Border-touching cars: corners and edges, on road or background.
    let corners = [(0, 0), (19, 0), (0, 14), (19, 14), (10, 0), (0, 7), (19, 7), (10, 14)];
    for (i, &(x, y)) in corners.iter().enumerate() {
        let base = if i % 2 == 0 { BG } else { ROAD };
        let mut m = Mask::filled(20, 15, base);
        // 3x2 car clipped to the canvas
        for dy in 0..2 {
            for dx in 0..3 {
                let (cx, cy) = (x as i64 + dx - 1, y as i64 + dy);
                if cx >= 0 && cy >= 0 && cx < 20 && cy < 15 {
                    m.set(cx as u32, cy as u32, CAR);
                }
            }
        }
        // road strip through the middle so votes are mixed for some kernels
        for yy in 6..9 {
            for xx in 0..20 {
                if m.get(xx, yy) != CAR {
                    m.set(xx, yy, if base == BG { ROAD } else { BG });
                }
            }
        }
        out.push((format!("border_{i}"), m, [3, 7, 15, 31][i % 4]));
    }
    // A car filling the whole canvas: empty band beyond itself.
    out.push(("full_canvas_car".into(), Mask::filled(6, 4, CAR), 15));
    // Car spanning a full row, touching both side borders.
    let mut m = Mask::filled(16, 9, BG);
    for x in 0..16 {
        m.set(x, 4, CAR);
    }
    for x in 0..8 {
        for y in 0..4 {
            m.set(x, y, ROAD);
        }
    }
    out.push(("full_row_car".into(), m, 5));

    // Single-pixel cars scattered over mixed ground.
    for s in 0..8u64 {
        let mut r = rng(1000 + s);
        let mut m = noise_mask(&mut r, 24, 24, [0.5, 0.5, 0.0, 0.0]);
        for _ in 0..10 {
            let (x, y) = (r.gen_range(0..24), r.gen_range(0..24));
            m.set(x, y, CAR);
        }
        out.push((format!("single_pixels_{s}"), m, [1, 3, 5, 9][s as usize % 4]));
    }

    // Cars with holes: square rings whose hole and outside differ in class,
    // including a ring nested inside another ring's hole.
    for (i, &(hole, outside, k)) in [
        (BG, ROAD, 3),
        (ROAD, BG, 3),
        (BG, ROAD, 5),
        (ROAD, BG, 7),
        (BG, ROAD, 11),
        (ROAD, BG, 15),
        (PARKED, ROAD, 5),
        (BG, BG, 3),
        (ROAD, ROAD, 3),
    ]
    .iter()
    .enumerate()
    {
        let mut m = Mask::filled(30, 30, outside);
        for y in 5..25 {
            for x in 5..25 {
                let ring = x == 5 || x == 24 || y == 5 || y == 24 || x == 6 || y == 6;
                m.set(x, y, if ring { CAR } else { hole });
            }
        }
        if i % 3 == 0 {
            // inner ring inside the hole, separated by hole pixels
            for y in 12..18 {
                for x in 12..18 {
                    let ring = x == 12 || x == 17 || y == 12 || y == 17;
                    m.set(x, y, if ring { CAR } else { outside });
                }
            }
        }
        out.push((format!("ring_{i}"), m, k));
    }
    // Diagonal chain: one 8-connected component, several 4-components.
    let mut m = Mask::filled(20, 20, BG);
    for i in 0..20 {
        m.set(i, i, CAR);
        if i < 10 {
            m.set(19 - i, i, ROAD);
        }
    }
    out.push(("diagonal_chain".into(), m, 3));

    // Two cars whose bands overlap: each must ignore the other's pixels.
    for (i, gap) in (1..=7u32).enumerate() {
        let mut m = Mask::filled(32, 16, BG);
        for y in 8..16 {
            for x in 0..32 {
                m.set(x, y, ROAD);
            }
        }
        for y in 6..10 {
            for x in 8..12 {
                m.set(x, y, CAR);
                m.set(x + 4 + gap, y, CAR);
            }
        }
        out.push((format!("neighbors_gap{gap}"), m, 3 + 2 * i as u32));
    }

    assert_eq!(out.len(), 50, "fixture count");
    out
}

/// Chebyshev distance from a pixel to a rectangle (0 inside).
fn rect_distance(r: &Rect, x: u32, y: u32) -> u32 {
    let dx = (r.x.saturating_sub(x)).max(x.saturating_sub(r.x + r.w - 1));
    let dy = (r.y.saturating_sub(y)).max(y.saturating_sub(r.y + r.h - 1));
    dx.max(dy)
}

fn strip_covers(spec: &SceneSpec, x: u32, y: u32) -> bool {
    spec.roads.iter().any(|r| {
        let v = match r.orientation {
            Orientation::Horizontal => y,
            Orientation::Vertical => x,
        };
        (r.position..r.position + r.thickness).contains(&v)
    })
}

/// Exhaustive check that every non-car pixel within `margin` of each car is
/// road for moving cars and background for parked cars.
pub fn well_separated(spec: &SceneSpec, margin: u32) -> bool {
    spec.cars.iter().all(|car| {
        (0..spec.height).all(|y| {
            (0..spec.width).all(|x| {
                let d = rect_distance(&car.rect, x, y);
                if d == 0 || d > margin || spec.cars.iter().any(|c| c.rect.contains(x, y)) {
                    return true;
                }
                strip_covers(spec, x, y) == (car.truth == Truth::Moving)
            })
        })
    })
}

fn merged(mut intervals: Vec<(u32, u32)>) -> Vec<(u32, u32)> {
    intervals.sort();
    let mut out: Vec<(u32, u32)> = Vec::new();
    for (a, b) in intervals {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn overlap_len(union: &[(u32, u32)], a: u32, b: u32) -> u64 {
    union.iter().map(|&(s, e)| e.min(b).saturating_sub(s.max(a)) as u64).sum()
}

/// Class areas computed from interval arithmetic, without rasterizing.
pub fn analytic_histogram(spec: &SceneSpec) -> BTreeMap<ClassId, u64> {
    let strips = |o: Orientation| {
        merged(
            spec.roads.iter().filter(|r| r.orientation == o).map(|r| (r.position, r.position + r.thickness)).collect(),
        )
    };
    let rows = strips(Orientation::Horizontal);
    let cols = strips(Orientation::Vertical);
    let (w, h) = (spec.width as u64, spec.height as u64);
    let nr = overlap_len(&rows, 0, spec.height);
    let nc = overlap_len(&cols, 0, spec.width);
    let road_union = nr * w + nc * h - nr * nc;

    let mut car_area = 0u64;
    let mut car_on_road = 0u64;
    for c in &spec.cars {
        let r = c.rect;
        let (cw, ch) = (r.w as u64, r.h as u64);
        let rh = overlap_len(&rows, r.y, r.y + r.h);
        let cv = overlap_len(&cols, r.x, r.x + r.w);
        car_area += cw * ch;
        car_on_road += rh * cw + cv * ch - rh * cv;
    }
    let road = road_union - car_on_road;
    let bg = w * h - road - car_area;
    [(BG, bg), (ROAD, road), (CAR, car_area)].into_iter().filter(|&(_, n)| n > 0).collect()
}

/// Same-side-of-every-edge test for a triangle, evaluated at pixel centers.
pub fn in_triangle(px: f64, py: f64, t: &[[f64; 2]; 3]) -> bool {
    let cross = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
    let d = [cross(t[0], t[1]), cross(t[1], t[2]), cross(t[2], t[0])];
    d.iter().all(|&v| v > 0.0) || d.iter().all(|&v| v < 0.0)
}

/// Random K x K matrix over classes `0..K`, with some rows and columns zeroed
/// so that undefined (0/0) classes occur.
pub fn random_confusion(rng: &mut ChaCha8Rng) -> ConfusionMatrix {
    let k = rng.gen_range(2..=6);
    let dead: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.15)).collect();
    let mut counts = vec![0u64; k * k];
    for i in 0..k {
        for j in 0..k {
            if !dead[i] && !dead[j] && rng.gen_bool(0.8) {
                counts[i * k + j] = rng.gen_range(0..1000);
            }
        }
    }
    ConfusionMatrix::from_counts((0..k as ClassId).collect(), counts)
}

pub fn palette_k(k: usize) -> Palette {
    use parkseg::maskcore::PaletteEntry;
    let entries = (0..k)
        .map(|i| PaletteEntry {
            id: i as ClassId,
            name: format!("c{i}"),
            color: [i as u8 * 20, 0, 0],
            role: if i == 0 { Role::Background } else { Role::Other },
        })
        .collect();
    Palette::new(entries).unwrap()
}
