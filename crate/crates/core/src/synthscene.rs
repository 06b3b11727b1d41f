//! Seeded synthetic street scenes with known parked/moving ground truth.
//!
//! Scenes are axis-aligned: full-length road strips and rectangular cars.
//! Rendering paints background, then roads, then cars, all cars in the car
//! class. Each car carries its truth label so the parked-car heuristic can be
//! scored without any annotated imagery.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maskcore::{ClassId, Mask, Palette, Role};
use crate::morphology::{connected_components, BinaryMask, Connectivity};
use crate::parkdetect::{detect_parked, DetectError, DetectParams};

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("cars {0} and {1} overlap or touch")]
    OverlappingCars(usize, usize),
    #[error("{0} lies outside the canvas")]
    OutOfBounds(String),
    #[error("no feasible scene after {0} attempts")]
    Infeasible(u32),
    #[error("invalid scene parameters: {0}")]
    BadParams(String),
    #[error("car {0}: truth label contradicts its surroundings")]
    TruthMismatch(usize),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Full-length strip: rows `position..position + thickness` for horizontal
/// strips, columns for vertical ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoadStrip {
    pub orientation: Orientation,
    pub position: u32,
    pub thickness: u32,
}

impl RoadStrip {
    fn covers(&self, x: u32, y: u32) -> bool {
        let v = match self.orientation {
            Orientation::Horizontal => y,
            Orientation::Vertical => x,
        };
        v >= self.position && v < self.position + self.thickness
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// Number of empty rows or columns separating two rectangles; 0 when
    /// they overlap or are 8-adjacent.
    fn gap(&self, other: &Rect) -> u32 {
        let gx = (other.x.saturating_sub(self.x + self.w)).max(self.x.saturating_sub(other.x + other.w));
        let gy = (other.y.saturating_sub(self.y + self.h)).max(self.y.saturating_sub(other.y + other.h));
        gx.max(gy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    Parked,
    Moving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarSpec {
    pub rect: Rect,
    pub truth: Truth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub roads: Vec<RoadStrip>,
    pub cars: Vec<CarSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedScene {
    pub mask: Mask,
    /// Car component id (8-connected labeling of car pixels) to truth.
    pub truth: BTreeMap<u32, Truth>,
    /// Component id of each car, in `SceneSpec::cars` order.
    pub car_components: Vec<u32>,
}

struct SceneClasses {
    background: ClassId,
    road: ClassId,
    car: ClassId,
}

fn scene_classes(palette: &Palette) -> Result<SceneClasses, SceneError> {
    let need = |role| palette.id_for_role(role).ok_or(DetectError::MissingRole(role));
    Ok(SceneClasses { background: need(Role::Background)?, road: need(Role::Road)?, car: need(Role::Car)? })
}

impl SceneSpec {
    pub fn empty(seed: u64, width: u32, height: u32) -> Self {
        SceneSpec { seed, width, height, roads: Vec::new(), cars: Vec::new() }
    }

    pub fn is_road(&self, x: u32, y: u32) -> bool {
        self.roads.iter().any(|r| r.covers(x, y))
    }

    /// Checks bounds and that cars neither overlap nor touch (8-adjacency),
    /// so that every car renders as its own component.
    pub fn check_geometry(&self) -> Result<(), SceneError> {
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::OutOfBounds(format!("canvas {}x{}", self.width, self.height)));
        }
        for (i, r) in self.roads.iter().enumerate() {
            let extent = match r.orientation {
                Orientation::Horizontal => self.height,
                Orientation::Vertical => self.width,
            };
            if r.thickness == 0 || r.position + r.thickness > extent {
                return Err(SceneError::OutOfBounds(format!("road {i}")));
            }
        }
        for (i, c) in self.cars.iter().enumerate() {
            let r = c.rect;
            if r.w == 0 || r.h == 0 || r.x + r.w > self.width || r.y + r.h > self.height {
                return Err(SceneError::OutOfBounds(format!("car {i}")));
            }
        }
        for i in 0..self.cars.len() {
            for j in i + 1..self.cars.len() {
                if self.cars[i].rect.gap(&self.cars[j].rect) == 0 {
                    return Err(SceneError::OverlappingCars(i, j));
                }
            }
        }
        Ok(())
    }

    /// Full invariant check: geometry plus moving cars entirely on road and
    /// parked cars touching no road pixel.
    pub fn validate(&self) -> Result<(), SceneError> {
        self.check_geometry()?;
        for (i, c) in self.cars.iter().enumerate() {
            let r = c.rect;
            let mut on_road = 0;
            for y in r.y..r.y + r.h {
                for x in r.x..r.x + r.w {
                    on_road += self.is_road(x, y) as u32;
                }
            }
            let ok = match c.truth {
                Truth::Moving => on_road == r.w * r.h,
                Truth::Parked => on_road == 0,
            };
            if !ok {
                return Err(SceneError::TruthMismatch(i));
            }
        }
        Ok(())
    }
}

/// Paints the scene into a mask using the palette's background, road and car classes.
pub fn render(spec: &SceneSpec, palette: &Palette) -> Result<RenderedScene, SceneError> {
    spec.check_geometry()?;
    let cls = scene_classes(palette)?;
    let mut mask = Mask::filled(spec.width, spec.height, cls.background);
    for y in 0..spec.height {
        for x in 0..spec.width {
            if spec.is_road(x, y) {
                mask.set(x, y, cls.road);
            }
        }
    }
    for c in &spec.cars {
        for y in c.rect.y..c.rect.y + c.rect.h {
            for x in c.rect.x..c.rect.x + c.rect.w {
                mask.set(x, y, cls.car);
            }
        }
    }
    let bits = BinaryMask::new(spec.width, spec.height, mask.labels().iter().map(|&l| l == cls.car).collect())
        .expect("mask dimensions");
    let cc = connected_components(&bits, Connectivity::Eight);
    let car_components: Vec<u32> = spec.cars.iter().map(|c| cc.get(c.rect.x, c.rect.y)).collect();
    let truth = car_components.iter().zip(&spec.cars).map(|(&id, c)| (id, c.truth)).collect();
    Ok(RenderedScene { mask, truth, car_components })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub n_roads: u32,
    pub n_cars: u32,
    pub parked_fraction: f64,
    /// Chebyshev distance around each car that must be pure road (moving)
    /// or pure background (parked).
    pub margin: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { seed: 0, width: 160, height: 120, n_roads: 2, n_cars: 8, parked_fraction: 0.5, margin: 7 }
    }
}

const CAR_MIN: u32 = 3;
const CAR_MAX: u32 = 10;
const PLACEMENT_TRIES: u32 = 500;
const SCENE_TRIES: u32 = 50;

/// Rect grown by `margin` on every side, or `None` if that leaves the canvas.
fn halo(r: &Rect, margin: u32, width: u32, height: u32) -> Option<Rect> {
    let x = r.x.checked_sub(margin)?;
    let y = r.y.checked_sub(margin)?;
    let (w, h) = (r.w + 2 * margin, r.h + 2 * margin);
    (x + w <= width && y + h <= height).then_some(Rect { x, y, w, h })
}

fn try_generate(p: &GenParams, rng: &mut ChaCha8Rng) -> Option<SceneSpec> {
    let mut spec = SceneSpec::empty(p.seed, p.width, p.height);
    let min_thickness = CAR_MAX + 2 * p.margin;
    for _ in 0..p.n_roads {
        let orientation = if rng.gen_bool(0.5) { Orientation::Horizontal } else { Orientation::Vertical };
        let extent = match orientation {
            Orientation::Horizontal => p.height,
            Orientation::Vertical => p.width,
        };
        if extent < min_thickness {
            return None;
        }
        let thickness = rng.gen_range(min_thickness..=(min_thickness + 8).min(extent));
        let position = rng.gen_range(0..=extent - thickness);
        spec.roads.push(RoadStrip { orientation, position, thickness });
    }

    let n_parked = (p.parked_fraction * p.n_cars as f64).round() as u32;
    for i in 0..p.n_cars {
        let truth = if i < n_parked { Truth::Parked } else { Truth::Moving };
        let placed = (0..PLACEMENT_TRIES).find_map(|_| {
            let w = rng.gen_range(CAR_MIN..=CAR_MAX);
            let h = rng.gen_range(CAR_MIN..=CAR_MAX);
            if w + 2 * p.margin > p.width || h + 2 * p.margin > p.height {
                return None;
            }
            let rect = Rect {
                x: rng.gen_range(p.margin..=p.width - w - p.margin),
                y: rng.gen_range(p.margin..=p.height - h - p.margin),
                w,
                h,
            };
            let zone = halo(&rect, p.margin, p.width, p.height)?;
            let want_road = truth == Truth::Moving;
            let uniform =
                (zone.y..zone.y + zone.h).all(|y| (zone.x..zone.x + zone.w).all(|x| spec.is_road(x, y) == want_road));
            let separated = spec.cars.iter().all(|c| c.rect.gap(&rect) >= 1);
            (uniform && separated).then_some(CarSpec { rect, truth })
        });
        spec.cars.push(placed?);
    }
    Some(spec)
}

/// Rejection-samples a scene whose every car is well separated: all non-car
/// pixels within `margin` of a car are road for moving cars and background
/// for parked cars, and that halo stays inside the canvas.
pub fn generate_random(p: &GenParams) -> Result<SceneSpec, SceneError> {
    if !(0.0..=1.0).contains(&p.parked_fraction) {
        return Err(SceneError::BadParams(format!("parked_fraction {} outside [0, 1]", p.parked_fraction)));
    }
    if p.width == 0 || p.height == 0 {
        return Err(SceneError::BadParams("canvas must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    for _ in 0..SCENE_TRIES {
        if let Some(spec) = try_generate(p, &mut rng) {
            return Ok(spec);
        }
    }
    Err(SceneError::Infeasible(SCENE_TRIES))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CarOutcome {
    pub car: usize,
    pub component_id: u32,
    pub truth: Truth,
    pub predicted: Truth,
}

impl CarOutcome {
    pub fn correct(&self) -> bool {
        self.truth == self.predicted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicScore {
    pub cars: Vec<CarOutcome>,
    /// Fraction of cars classified correctly; `None` for a scene without cars.
    pub accuracy: Option<f64>,
    pub reclassified: usize,
}

impl HeuristicScore {
    pub fn correct(&self) -> usize {
        self.cars.iter().filter(|c| c.correct()).count()
    }
}

/// Renders the scene, runs the parked-car heuristic and compares each car's verdict with its truth.
pub fn score_heuristic(spec: &SceneSpec, palette: &Palette, kernel: u32) -> Result<HeuristicScore, SceneError> {
    let scene = render(spec, palette)?;
    let detection = detect_parked(&scene.mask, palette, &DetectParams::with_kernel(kernel))?;
    let verdict_by_id: BTreeMap<u32, bool> =
        detection.verdicts.iter().map(|v| (v.component_id, v.reclassified)).collect();
    let cars: Vec<CarOutcome> = spec
        .cars
        .iter()
        .zip(&scene.car_components)
        .enumerate()
        .map(|(i, (c, &id))| CarOutcome {
            car: i,
            component_id: id,
            truth: c.truth,
            predicted: if verdict_by_id[&id] { Truth::Parked } else { Truth::Moving },
        })
        .collect();
    let correct = cars.iter().filter(|c| c.correct()).count();
    let accuracy = (!cars.is_empty()).then(|| correct as f64 / cars.len() as f64);
    let reclassified = detection.verdicts.iter().filter(|v| v.reclassified).count();
    Ok(HeuristicScore { cars, accuracy, reclassified })
}

pub const SCORE_CSV_HEADER: &str = "seed,cars,correct,reclassified,accuracy\n";

/// One CSV row per scored scene; scenes without cars print `no_cars` for accuracy.
pub fn score_csv_row(seed: u64, score: &HeuristicScore) -> String {
    let mut s = String::new();
    let acc = score.accuracy.map_or_else(|| "no_cars".to_string(), |a| format!("{a:.6}"));
    let _ = writeln!(s, "{seed},{},{},{},{acc}", score.cars.len(), score.correct(), score.reclassified);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskcore::class_histogram;

    fn palette() -> Palette {
        Palette::default_three_class()
    }

    #[test]
    fn empty_scene_renders_background() {
        let r = render(&SceneSpec::empty(0, 5, 4), &palette()).unwrap();
        assert_eq!(class_histogram(&r.mask), BTreeMap::from([(0, 20)]));
        assert!(r.truth.is_empty());
        let s = score_heuristic(&SceneSpec::empty(0, 5, 4), &palette(), 15).unwrap();
        assert_eq!(s.accuracy, None);
        assert_eq!(score_csv_row(0, &s), "0,0,0,0,no_cars\n");
    }

    #[test]
    fn one_car_on_road() {
        let spec = SceneSpec {
            seed: 0,
            width: 40,
            height: 40,
            roads: vec![RoadStrip { orientation: Orientation::Horizontal, position: 10, thickness: 20 }],
            cars: vec![CarSpec { rect: Rect { x: 15, y: 17, w: 6, h: 4 }, truth: Truth::Moving }],
        };
        spec.validate().unwrap();
        let r = render(&spec, &palette()).unwrap();
        assert_eq!(r.truth, BTreeMap::from([(1, Truth::Moving)]));
        let h = class_histogram(&r.mask);
        assert_eq!(h[&2], 24);
        assert_eq!(h[&1], 40 * 20 - 24);
        let s = score_heuristic(&spec, &palette(), 15).unwrap();
        assert_eq!(s.accuracy, Some(1.0));
    }

    #[test]
    fn geometry_errors() {
        let mut spec = SceneSpec::empty(0, 20, 20);
        spec.cars.push(CarSpec { rect: Rect { x: 2, y: 2, w: 3, h: 3 }, truth: Truth::Parked });
        // corner pixels (4,4) and (5,5) touch diagonally
        spec.cars.push(CarSpec { rect: Rect { x: 5, y: 5, w: 3, h: 3 }, truth: Truth::Parked });
        assert_eq!(render(&spec, &palette()), Err(SceneError::OverlappingCars(0, 1)));
        spec.cars[1].rect.x = 6;
        assert!(render(&spec, &palette()).is_ok());
        spec.cars[1].rect.x = 18;
        assert!(matches!(render(&spec, &palette()), Err(SceneError::OutOfBounds(_))));
        let bad_road = SceneSpec {
            roads: vec![RoadStrip { orientation: Orientation::Vertical, position: 15, thickness: 6 }],
            ..SceneSpec::empty(0, 20, 20)
        };
        assert!(matches!(render(&bad_road, &palette()), Err(SceneError::OutOfBounds(_))));
    }

    #[test]
    fn validate_checks_truth() {
        let spec = SceneSpec {
            seed: 0,
            width: 20,
            height: 20,
            roads: vec![RoadStrip { orientation: Orientation::Vertical, position: 0, thickness: 5 }],
            cars: vec![CarSpec { rect: Rect { x: 3, y: 3, w: 4, h: 2 }, truth: Truth::Moving }],
        };
        assert_eq!(spec.validate(), Err(SceneError::TruthMismatch(0)));
    }

    #[test]
    fn generator_edge_cases() {
        let none = generate_random(&GenParams { n_cars: 0, ..Default::default() }).unwrap();
        assert!(none.cars.is_empty());
        let parked = generate_random(&GenParams { parked_fraction: 1.0, seed: 4, ..Default::default() }).unwrap();
        assert!(parked.cars.iter().all(|c| c.truth == Truth::Parked));
        assert_eq!(parked.cars.len(), 8);
        assert!(matches!(
            generate_random(&GenParams { n_roads: 0, parked_fraction: 0.0, ..Default::default() }),
            Err(SceneError::Infeasible(_))
        ));
        assert!(generate_random(&GenParams { parked_fraction: 1.5, ..Default::default() }).is_err());
        let a = generate_random(&GenParams { seed: 9, ..Default::default() }).unwrap();
        assert_eq!(a, generate_random(&GenParams { seed: 9, ..Default::default() }).unwrap());
        a.validate().unwrap();
    }

    #[test]
    fn missing_roles() {
        let no_road =
            Palette::new(vec![palette().entry(0).unwrap().clone(), palette().entry(2).unwrap().clone()]).unwrap();
        assert_eq!(
            render(&SceneSpec::empty(0, 3, 3), &no_road),
            Err(SceneError::Detect(DetectError::MissingRole(Role::Road)))
        );
    }
}
