use parkseg::augment::{apply_geometric, apply_photometric, point_in_polygon, GeometricOp, PhotometricOp, RgbImage};
use parkseg::maskcore::Mask;
use parkseg_oracles::{in_triangle, rng};
use rand::Rng;

fn random_pair(seed: u64, w: u32, h: u32) -> (RgbImage, Mask) {
    let mut r = rng(seed);
    let px = (0..w * h).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
    let labels = (0..w * h).map(|_| r.gen_range(0..4)).collect();
    (RgbImage::new(w, h, px).unwrap(), Mask::new(w, h, labels).unwrap())
}

#[test]
fn shadow_on_small_triangle_halves_exactly_ten_pixels() {
    let img = RgbImage::filled(8, 8, [200, 101, 7]);
    let tri = [[0.0, 0.0], [4.5, 0.0], [0.0, 4.5]];
    let out = apply_photometric(&img, &PhotometricOp::Shadow { polygon: tri.to_vec(), attenuation: 0.5 }).unwrap();
    let dark = out.pixels().iter().filter(|&&p| p == [100, 50, 3]).count();
    let untouched = out.pixels().iter().filter(|&&p| p == [200, 101, 7]).count();
    assert_eq!(dark, 10);
    assert_eq!(untouched, 54);
}

#[test]
fn polygon_test_matches_triangle_oracle() {
    let mut r = rng(41);
    for _ in 0..200 {
        let t: [[f64; 2]; 3] = std::array::from_fn(|_| [r.gen_range(-2.0..18.0), r.gen_range(-2.0..14.0)]);
        for y in 0..12 {
            for x in 0..16 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let on_edge = {
                    // skip points numerically on an edge, where either answer is acceptable
                    let c = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
                    [c(t[0], t[1]), c(t[1], t[2]), c(t[2], t[0])].iter().any(|v| v.abs() < 1e-9)
                };
                if !on_edge {
                    assert_eq!(point_in_polygon(px, py, &t), in_triangle(px, py, &t));
                }
            }
        }
    }
}

#[test]
fn geometric_ops_are_permutations() {
    for seed in 0..20 {
        let (img, mask) = random_pair(seed, 7 + seed as u32 % 5, 4 + seed as u32 % 3);
        for op in [GeometricOp::Hflip, GeometricOp::Vflip, GeometricOp::Rot90 { k: 1 }, GeometricOp::Rot90 { k: 3 }] {
            let (i2, m2) = apply_geometric(&img, &mask, op).unwrap();
            let mut a: Vec<_> = img.pixels().iter().zip(mask.labels()).map(|(p, l)| (*p, *l)).collect();
            let mut b: Vec<_> = i2.pixels().iter().zip(m2.labels()).map(|(p, l)| (*p, *l)).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn flips_and_rotations_invert() {
    let (img, mask) = random_pair(42, 9, 5);
    let twice = |op| {
        let (i, m) = apply_geometric(&img, &mask, op).unwrap();
        apply_geometric(&i, &m, op).unwrap()
    };
    assert_eq!(twice(GeometricOp::Hflip), (img.clone(), mask.clone()));
    assert_eq!(twice(GeometricOp::Vflip), (img.clone(), mask.clone()));
    let mut cur = (img.clone(), mask.clone());
    for _ in 0..4 {
        cur = apply_geometric(&cur.0, &cur.1, GeometricOp::Rot90 { k: 1 }).unwrap();
    }
    assert_eq!(cur, (img.clone(), mask.clone()));
}

#[test]
fn centered_unit_zoom_is_identity() {
    let (img, mask) = random_pair(43, 13, 9);
    let out = apply_geometric(&img, &mask, GeometricOp::centered_zoom(1.0, 13, 9)).unwrap();
    assert_eq!(out, (img, mask));
}

#[test]
fn zoomed_mask_only_contains_source_labels() {
    let (img, _) = random_pair(44, 20, 16);
    let mask = Mask::new(20, 16, (0..320).map(|i| if i % 3 == 0 { 2 } else { 0 }).collect()).unwrap();
    let (_, m) = apply_geometric(&img, &mask, GeometricOp::centered_zoom(0.6, 20, 16)).unwrap();
    assert!(m.labels().iter().all(|&l| l == 0 || l == 2));
}
