//! Binary-mask primitives: connected components, 1-pixel contours and
//! rectangular dilation.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MorphError {
    #[error("kernel dimensions must be odd and at least 1, got {0}x{1}")]
    EvenKernel(u32, u32),
    #[error("component id {id} out of range 1..={count}")]
    UnknownComponentId { id: u32, count: u32 },
    #[error("invalid binary mask dimensions {width}x{height} for {len} bits")]
    BadDimensions { width: u32, height: u32, len: usize },
}

// Below this many pixels the row passes run sequentially.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, MorphError> {
        if width == 0 || height == 0 || bits.len() != width as usize * height as usize {
            return Err(MorphError::BadDimensions { width, height, len: bits.len() });
        }
        Ok(BinaryMask { width, height, bits })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        BinaryMask { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = BinaryMask::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y as usize * width as usize + x as usize] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_number(n: u32) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }
}

/// Half-open pixel window `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Window {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    /// Grows the window by `r` on every side, clipped to `width x height`.
    pub fn expand(&self, r: u32, width: u32, height: u32) -> Window {
        Window {
            x0: self.x0.saturating_sub(r),
            y0: self.y0.saturating_sub(r),
            x1: (self.x1 + r).min(width),
            y1: (self.y1 + r).min(height),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentInfo {
    pub id: u32,
    pub pixel_count: usize,
    pub bbox: Window,
    /// First pixel of the component in raster order.
    pub anchor: (u32, u32),
}

/// Per-pixel component ids; 0 marks pixels outside every component.
///
/// Ids run `1..=count` and are assigned in raster order of each component's
/// first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabels {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    count: u32,
}

impl ComponentLabels {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn component_mask(&self, id: u32) -> Result<BinaryMask, MorphError> {
        self.check_id(id)?;
        Ok(BinaryMask { width: self.width, height: self.height, bits: self.labels.iter().map(|&l| l == id).collect() })
    }

    /// Pixel count, bounding box and anchor of every component, indexed by `id - 1`.
    pub fn components(&self) -> Vec<ComponentInfo> {
        let mut out: Vec<ComponentInfo> = Vec::with_capacity(self.count as usize);
        let w = self.width;
        for (i, &l) in self.labels.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let (x, y) = (i as u32 % w, i as u32 / w);
            let k = (l - 1) as usize;
            if k == out.len() {
                // ids are assigned in raster order, so a new id is always the next one
                out.push(ComponentInfo {
                    id: l,
                    pixel_count: 0,
                    bbox: Window { x0: x, y0: y, x1: x + 1, y1: y + 1 },
                    anchor: (x, y),
                });
            }
            let c = &mut out[k];
            c.pixel_count += 1;
            c.bbox.x0 = c.bbox.x0.min(x);
            c.bbox.x1 = c.bbox.x1.max(x + 1);
            c.bbox.y1 = c.bbox.y1.max(y + 1);
        }
        out
    }

    fn check_id(&self, id: u32) -> Result<(), MorphError> {
        if id == 0 || id > self.count {
            return Err(MorphError::UnknownComponentId { id, count: self.count });
        }
        Ok(())
    }
}

fn find(parent: &mut [u32], mut a: u32) -> u32 {
    while parent[a as usize] != a {
        let grand = parent[parent[a as usize] as usize];
        parent[a as usize] = grand;
        a = grand;
    }
    a
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labeling.
pub fn connected_components(bm: &BinaryMask, connectivity: Connectivity) -> ComponentLabels {
    let (w, h) = (bm.width as usize, bm.height as usize);
    let mut provisional = vec![0u32; w * h];
    // parent[0] is unused so provisional label 0 can mean "unset"
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bm.bits[i] {
                continue;
            }
            let mut neighbors = [0u32; 4];
            let mut n = 0;
            let mut push = |l: u32| {
                if l != 0 {
                    neighbors[n] = l;
                    n += 1;
                }
            };
            if x > 0 {
                push(provisional[i - 1]);
            }
            if y > 0 {
                push(provisional[i - w]);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        push(provisional[i - w - 1]);
                    }
                    if x + 1 < w {
                        push(provisional[i - w + 1]);
                    }
                }
            }
            let label = if n == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                let first = neighbors[0];
                for &other in &neighbors[1..n] {
                    union(&mut parent, first, other);
                }
                first
            };
            provisional[i] = label;
        }
    }

    let mut remap = vec![0u32; parent.len()];
    let mut count = 0u32;
    for l in provisional.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if remap[root] == 0 {
            count += 1;
            remap[root] = count;
        }
        *l = remap[root];
    }

    ComponentLabels { width: bm.width, height: bm.height, labels: provisional, count }
}

/// Pixels of component `id` with at least one 4-neighbor outside the component.
/// The image border counts as outside.
pub fn boundary(labels: &ComponentLabels, id: u32) -> Result<BinaryMask, MorphError> {
    let full = Window { x0: 0, y0: 0, x1: labels.width, y1: labels.height };
    boundary_in_window(labels, id, full)
}

/// Contour of component `id` restricted to `window`; output has the window's size.
///
/// Membership of neighbors is always judged against the full label grid, so
/// the result equals the corresponding crop of [`boundary`].
pub fn boundary_in_window(labels: &ComponentLabels, id: u32, window: Window) -> Result<BinaryMask, MorphError> {
    labels.check_id(id)?;
    let (w, h) = (labels.width, labels.height);
    let inside =
        |x: i64, y: i64| x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && labels.get(x as u32, y as u32) == id;
    let mut out = BinaryMask::empty(window.width(), window.height());
    for y in window.y0..window.y1 {
        for x in window.x0..window.x1 {
            if labels.get(x, y) != id {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            let edge = !inside(xi - 1, yi) || !inside(xi + 1, yi) || !inside(xi, yi - 1) || !inside(xi, yi + 1);
            if edge {
                out.set(x - window.x0, y - window.y0, true);
            }
        }
    }
    Ok(out)
}

/// 1-D "any set within radius" over one line of `len` samples at `stride`.
fn dilate_line(src: &[bool], dst: &mut [bool], r: usize) {
    let n = src.len();
    // prefix[i] = number of set samples in src[..i]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u32);
    let mut acc = 0u32;
    for &b in src {
        acc += b as u32;
        prefix.push(acc);
    }
    for (i, d) in dst.iter_mut().enumerate() {
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(n);
        *d = prefix[hi] > prefix[lo];
    }
}

fn check_kernel(kernel_w: u32, kernel_h: u32) -> Result<(), MorphError> {
    if kernel_w.is_multiple_of(2) || kernel_h.is_multiple_of(2) {
        return Err(MorphError::EvenKernel(kernel_w, kernel_h));
    }
    Ok(())
}

/// Dilation by a centered `kernel_w x kernel_h` rectangle, clipped at the borders.
///
/// Runs as a horizontal pass followed by a vertical pass, each linear in the
/// number of pixels regardless of kernel size.
pub fn dilate_rect(bm: &BinaryMask, kernel_w: u32, kernel_h: u32) -> Result<BinaryMask, MorphError> {
    check_kernel(kernel_w, kernel_h)?;
    let (w, h) = (bm.width as usize, bm.height as usize);
    let (rx, ry) = ((kernel_w / 2) as usize, (kernel_h / 2) as usize);
    let parallel = w * h >= PAR_THRESHOLD;

    let mut horiz = vec![false; w * h];
    if rx == 0 {
        horiz.copy_from_slice(&bm.bits);
    } else if parallel {
        horiz.par_chunks_mut(w).zip(bm.bits.par_chunks(w)).for_each(|(dst, src)| dilate_line(src, dst, rx));
    } else {
        for (dst, src) in horiz.chunks_mut(w).zip(bm.bits.chunks(w)) {
            dilate_line(src, dst, rx);
        }
    }

    if ry == 0 {
        return Ok(BinaryMask { width: bm.width, height: bm.height, bits: horiz });
    }

    // Vertical pass on the transpose so each column is contiguous.
    let mut columns = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            columns[x * h + y] = horiz[y * w + x];
        }
    }
    let mut dilated_cols = vec![false; w * h];
    if parallel {
        dilated_cols.par_chunks_mut(h).zip(columns.par_chunks(h)).for_each(|(dst, src)| dilate_line(src, dst, ry));
    } else {
        for (dst, src) in dilated_cols.chunks_mut(h).zip(columns.chunks(h)) {
            dilate_line(src, dst, ry);
        }
    }
    let mut bits = vec![false; w * h];
    for x in 0..w {
        for y in 0..h {
            bits[y * w + x] = dilated_cols[x * h + y];
        }
    }
    Ok(BinaryMask { width: bm.width, height: bm.height, bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_dilate(bm: &BinaryMask, kw: u32, kh: u32) -> BinaryMask {
        let (rx, ry) = ((kw / 2) as i64, (kh / 2) as i64);
        BinaryMask::from_fn(bm.width, bm.height, |x, y| {
            let mut hit = false;
            for yy in (y as i64 - ry).max(0)..=(y as i64 + ry).min(bm.height as i64 - 1) {
                for xx in (x as i64 - rx).max(0)..=(x as i64 + rx).min(bm.width as i64 - 1) {
                    hit |= bm.get(xx as u32, yy as u32);
                }
            }
            hit
        })
    }

    fn arb_mask(max: u32) -> impl Strategy<Value = BinaryMask> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.3), (w * h) as usize)
                .prop_map(move |bits| BinaryMask::new(w, h, bits).unwrap())
        })
    }

    #[test]
    fn single_pixel_components() {
        let mut bm = BinaryMask::empty(3, 3);
        bm.set(1, 1, true);
        assert_eq!(connected_components(&bm, Connectivity::Eight).count(), 1);
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let bm = BinaryMask::new(2, 2, vec![true, false, false, true]).unwrap();
        assert_eq!(connected_components(&bm, Connectivity::Eight).count(), 1);
        assert_eq!(connected_components(&bm, Connectivity::Four).count(), 2);
    }

    #[test]
    fn u_shape_merges_in_first_pass() {
        // Two arms meet only at the bottom row, forcing a union of provisional labels.
        let bm = BinaryMask::from_fn(5, 4, |x, y| x == 0 || x == 4 || y == 3);
        let cc = connected_components(&bm, Connectivity::Four);
        assert_eq!(cc.count(), 1);
        assert!(cc.labels().iter().zip(bm.bits()).all(|(&l, &b)| (l == 1) == b));
    }

    #[test]
    fn ids_in_raster_order() {
        let bm = BinaryMask::from_fn(7, 1, |x, _| x % 2 == 0);
        let cc = connected_components(&bm, Connectivity::Eight);
        assert_eq!(cc.labels(), &[1, 0, 2, 0, 3, 0, 4]);
        let info = cc.components();
        assert_eq!(info.len(), 4);
        assert_eq!(info[2].anchor, (4, 0));
        assert_eq!(info[2].bbox, Window { x0: 4, y0: 0, x1: 5, y1: 1 });
    }

    #[test]
    fn boundary_examples() {
        let one = BinaryMask::new(1, 1, vec![true]).unwrap();
        let cc = connected_components(&one, Connectivity::Eight);
        assert_eq!(boundary(&cc, 1).unwrap(), one);

        // 5x5 square inside 9x9: 25 - 9 interior pixels = 16 ring pixels
        let sq = BinaryMask::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y));
        let cc = connected_components(&sq, Connectivity::Eight);
        let b = boundary(&cc, 1).unwrap();
        assert_eq!(b.count_ones(), 16);
        assert!(!b.get(4, 4) && !b.get(3, 3) && b.get(2, 4) && b.get(6, 6));

        let line = BinaryMask::from_fn(9, 3, |x, y| y == 1 && (1..8).contains(&x));
        let cc = connected_components(&line, Connectivity::Eight);
        assert_eq!(boundary(&cc, 1).unwrap(), line);

        assert_eq!(boundary(&cc, 0), Err(MorphError::UnknownComponentId { id: 0, count: 1 }));
        assert_eq!(boundary(&cc, 2), Err(MorphError::UnknownComponentId { id: 2, count: 1 }));
    }

    #[test]
    fn dilate_examples() {
        let mut bm = BinaryMask::empty(31, 31);
        bm.set(15, 15, true);
        let d = dilate_rect(&bm, 15, 15).unwrap();
        assert_eq!(d.count_ones(), 225);
        assert!(d.get(8, 8) && d.get(22, 22) && !d.get(7, 15) && !d.get(15, 23));

        assert_eq!(dilate_rect(&bm, 1, 1).unwrap(), bm);
        assert_eq!(dilate_rect(&bm, 4, 3), Err(MorphError::EvenKernel(4, 3)));
        assert_eq!(dilate_rect(&bm, 3, 0), Err(MorphError::EvenKernel(3, 0)));
    }

    #[test]
    fn dilate_large_mask_uses_parallel_path() {
        let bm = BinaryMask::from_fn(300, 260, |x, y| (x * 7 + y * 13) % 97 == 0);
        assert_eq!(dilate_rect(&bm, 15, 9).unwrap(), brute_dilate(&bm, 15, 9));
    }

    proptest! {
        #[test]
        fn dilate_matches_brute_force(bm in arb_mask(40), kw in (0u32..8).prop_map(|k| 2 * k + 1), kh in (0u32..8).prop_map(|k| 2 * k + 1)) {
            prop_assert_eq!(dilate_rect(&bm, kw, kh).unwrap(), brute_dilate(&bm, kw, kh));
        }

        #[test]
        fn dilate_is_extensive_and_monotone(a in arb_mask(24), k in (0u32..5).prop_map(|k| 2 * k + 1)) {
            let da = dilate_rect(&a, k, k).unwrap();
            prop_assert!(a.is_subset_of(&da));
            // a ∩ (every other pixel) ⊆ a
            let sub = BinaryMask::from_fn(a.width(), a.height(), |x, y| a.get(x, y) && (x + y) % 2 == 0);
            prop_assert!(dilate_rect(&sub, k, k).unwrap().is_subset_of(&da));
        }

        #[test]
        fn dilate_composes(bm in arb_mask(24), a in 0u32..4, b in 0u32..4, c in 0u32..4, d in 0u32..4) {
            let (a, b, c, d) = (2 * a + 1, 2 * b + 1, 2 * c + 1, 2 * d + 1);
            let twice = dilate_rect(&dilate_rect(&bm, a, b).unwrap(), c, d).unwrap();
            prop_assert_eq!(twice, dilate_rect(&bm, a + c - 1, b + d - 1).unwrap());
        }

        #[test]
        fn dilate_commutes_with_translation(pts in proptest::collection::vec((10u32..20, 10u32..20), 1..6), dx in 0u32..5, dy in 0u32..5) {
            let base = BinaryMask::from_fn(40, 40, |x, y| pts.contains(&(x, y)));
            let shifted = BinaryMask::from_fn(40, 40, |x, y| x >= dx && y >= dy && pts.contains(&(x - dx, y - dy)));
            let d = dilate_rect(&base, 5, 5).unwrap();
            let ds = dilate_rect(&shifted, 5, 5).unwrap();
            for y in 0..40 {
                for x in 0..40 {
                    let expect = x >= dx && y >= dy && d.get(x - dx, y - dy);
                    prop_assert_eq!(ds.get(x, y), expect);
                }
            }
        }

        #[test]
        fn boundary_properties(bm in arb_mask(24)) {
            let cc = connected_components(&bm, Connectivity::Eight);
            for id in 1..=cc.count() {
                let comp = cc.component_mask(id).unwrap();
                let b = boundary(&cc, id).unwrap();
                prop_assert!(b.is_subset_of(&comp));
                for y in 0..bm.height() {
                    for x in 0..bm.width() {
                        if comp.get(x, y) && !b.get(x, y) {
                            // interior pixel: all 4-neighbors exist and are in the component
                            prop_assert!(x > 0 && y > 0 && x + 1 < bm.width() && y + 1 < bm.height());
                            prop_assert!(comp.get(x - 1, y) && comp.get(x + 1, y) && comp.get(x, y - 1) && comp.get(x, y + 1));
                        }
                    }
                }
            }
        }

        #[test]
        fn windowed_boundary_is_crop(bm in arb_mask(20)) {
            let cc = connected_components(&bm, Connectivity::Eight);
            for info in cc.components() {
                let win = info.bbox.expand(2, bm.width(), bm.height());
                let local = boundary_in_window(&cc, info.id, win).unwrap();
                let full = boundary(&cc, info.id).unwrap();
                for y in win.y0..win.y1 {
                    for x in win.x0..win.x1 {
                        prop_assert_eq!(local.get(x - win.x0, y - win.y0), full.get(x, y));
                    }
                }
                prop_assert_eq!(local.count_ones(), full.count_ones());
            }
        }
    }
}
