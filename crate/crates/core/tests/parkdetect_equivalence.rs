use parkseg::maskcore::{class_histogram, Mask, Palette};
use parkseg::parkdetect::{detect_parked, detect_parked_naive, DetectParams};
use parkseg_oracles::{adversarial_fixtures, blocky_mask, canonical_verdicts, noise_mask, rng, BG, CAR, PARKED, ROAD};

fn assert_equivalent(mask: &Mask, kernel: u32, what: &str) {
    let p = Palette::default_four_class();
    let params = DetectParams::with_kernel(kernel);
    let fast = detect_parked(mask, &p, &params).unwrap();
    let slow = detect_parked_naive(mask, &p, &params).unwrap();
    assert_eq!(fast.mask, slow.mask, "{what}: masks differ");
    assert_eq!(canonical_verdicts(&fast.verdicts), canonical_verdicts(&slow.verdicts), "{what}: verdicts differ");
}

#[test]
fn fast_path_matches_naive_on_random_masks() {
    let mut r = rng(21);
    for i in 0..200 {
        let mask =
            if i % 2 == 0 { noise_mask(&mut r, 64, 64, [0.45, 0.35, 0.15, 0.05]) } else { blocky_mask(&mut r, 64, 64) };
        let kernel = [1, 3, 5, 7, 15][i % 5];
        assert_equivalent(&mask, kernel, &format!("random mask {i} kernel {kernel}"));
    }
}

#[test]
fn fast_path_matches_naive_on_adversarial_fixtures() {
    for (name, mask, kernel) in adversarial_fixtures() {
        assert_equivalent(&mask, kernel, &name);
    }
}

#[test]
fn ties_are_never_reclassified() {
    let p = Palette::default_four_class();
    for (name, mask, kernel) in adversarial_fixtures().into_iter().filter(|(n, ..)| n.starts_with("tie")) {
        let d = detect_parked(&mask, &p, &DetectParams::with_kernel(kernel)).unwrap();
        assert_eq!(d.verdicts.len(), 1, "{name}");
        let v = d.verdicts[0];
        assert_eq!(v.background_votes, v.road_votes, "{name}");
        assert!(!v.reclassified, "{name}");
    }
}

#[test]
fn only_car_pixels_change_and_pixels_are_conserved() {
    let p = Palette::default_four_class();
    let mut r = rng(22);
    for i in 0..50 {
        let mask = blocky_mask(&mut r, 48, 40);
        let d = detect_parked(&mask, &p, &DetectParams::default()).unwrap();
        for (&a, &b) in mask.labels().iter().zip(d.mask.labels()) {
            assert!(a == b || (a == CAR && b == PARKED), "mask {i}");
        }
        let before = class_histogram(&mask);
        let after = class_histogram(&d.mask);
        let get = |h: &std::collections::BTreeMap<u8, usize>, c| h.get(&c).copied().unwrap_or(0);
        assert_eq!(get(&before, BG), get(&after, BG));
        assert_eq!(get(&before, ROAD), get(&after, ROAD));
        assert_eq!(get(&before, CAR) + get(&before, PARKED), get(&after, CAR) + get(&after, PARKED));
        let moved: usize = d.verdicts.iter().filter(|v| v.reclassified).map(|v| v.car_pixel_count).sum();
        assert_eq!(get(&before, CAR) - get(&after, CAR), moved);
    }
}

#[test]
fn detection_is_idempotent() {
    let p = Palette::default_four_class();
    let mut r = rng(23);
    for i in 0..50 {
        let mask = blocky_mask(&mut r, 48, 40);
        let kernel = [3, 7, 15][i % 3];
        let params = DetectParams::with_kernel(kernel);
        let once = detect_parked(&mask, &p, &params).unwrap();
        let twice = detect_parked(&once.mask, &p, &params).unwrap();
        assert_eq!(once.mask, twice.mask, "mask {i}");
        assert!(twice.verdicts.iter().all(|v| !v.reclassified), "mask {i}");
    }
}

#[test]
fn kernel_one_reclassifies_nothing() {
    let p = Palette::default_four_class();
    let mut r = rng(24);
    for _ in 0..30 {
        let mask = noise_mask(&mut r, 40, 30, [0.4, 0.2, 0.3, 0.1]);
        let d = detect_parked(&mask, &p, &DetectParams::with_kernel(1)).unwrap();
        assert_eq!(d.mask, mask);
        assert!(d.verdicts.iter().all(|v| v.background_votes == 0 && v.road_votes == 0));
    }
}
