//! Word measurement and collision geometry.
//!
//! Cloud coordinates are pixels with the origin at the cloud center and the
//! y axis pointing down, as in SVG. A word's position is the center of its
//! bounding box. Font sizes are in points and one point is one pixel.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::style::Orientation;

const BUNDLED_METRICS: &str = include_str!("../resources/metrics.json");

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn centered(center: Point, width: f64, height: f64) -> Self {
        Rect::new(
            center.x - width / 2.0,
            center.y - height / 2.0,
            center.x + width / 2.0,
            center.y + height / 2.0,
        )
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn translate(&self, by: Point) -> Rect {
        Rect::new(
            self.min_x + by.x,
            self.min_y + by.y,
            self.max_x + by.x,
            self.max_y + by.y,
        )
    }

    pub fn scale(&self, factor: f64) -> Rect {
        Rect::new(
            self.min_x * factor,
            self.min_y * factor,
            self.max_x * factor,
            self.max_y * factor,
        )
    }

    /// Open overlap: rectangles that only share an edge do not overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min_x < other.max_x
            && other.min_x < self.max_x
            && self.min_y < other.max_y
            && other.min_y < self.max_y
    }

    /// Closed containment: coinciding edges count as inside.
    pub fn contains(&self, other: &Rect) -> bool {
        other.min_x >= self.min_x
            && other.max_x <= self.max_x
            && other.min_y >= self.min_y
            && other.max_y <= self.max_y
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            self.min_x.min(other.min_x),
            self.min_y.min(other.min_y),
            self.max_x.max(other.max_x),
            self.max_y.max(other.max_y),
        )
    }

    /// Smallest translation along x (resp. y) that separates the two
    /// rectangles. Negative when they are already apart on that axis.
    pub fn penetration(&self, other: &Rect) -> (f64, f64) {
        (
            (self.max_x - other.min_x).min(other.max_x - self.min_x),
            (self.max_y - other.min_y).min(other.max_y - self.min_y),
        )
    }
}

/// Cloud canvas, centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub width: f64,
    pub height: f64,
}

impl Frame {
    pub fn new(width: f64, height: f64) -> Self {
        debug_assert!(width > 0.0 && height > 0.0);
        Frame { width, height }
    }

    pub fn rect(&self) -> Rect {
        Rect::centered(Point::ORIGIN, self.width, self.height)
    }

    pub fn scaled(&self, factor: f64) -> Frame {
        Frame::new(self.width * factor, self.height * factor)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlyphMetrics {
    pub advance: f64,
    /// Ink extent, measured upward from the bottom of the line box.
    pub bottom: f64,
    pub top: f64,
}

/// Per-character advance widths and vertical ink extents for one font, in
/// font units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FontMetrics {
    pub family: String,
    pub units_per_em: f64,
    pub line_height: f64,
    /// Baseline height above the bottom of the line box.
    pub baseline: f64,
    pub glyphs: BTreeMap<char, GlyphMetrics>,
}

impl FontMetrics {
    /// The bundled Helvetica-compatible table.
    pub fn bundled() -> &'static FontMetrics {
        static METRICS: OnceLock<FontMetrics> = OnceLock::new();
        METRICS.get_or_init(|| {
            FontMetrics::from_json(BUNDLED_METRICS).expect("bundled metrics are valid")
        })
    }

    pub fn from_json(text: &str) -> Result<FontMetrics> {
        let m: FontMetrics =
            serde_json::from_str(text).map_err(|e| Error::json("font metrics", e))?;
        if m.glyphs.is_empty() || m.glyphs.values().any(|g| g.advance <= 0.0) {
            return Err(Error::InvalidInput(
                "font metrics need positive advances".into(),
            ));
        }
        Ok(m)
    }

    /// Metrics for `ch`; characters missing from the table get the average
    /// advance and a full-line ink extent.
    pub fn glyph(&self, ch: char) -> GlyphMetrics {
        if let Some(g) = self.glyphs.get(&ch) {
            return *g;
        }
        let mean = self.glyphs.values().map(|g| g.advance).sum::<f64>() / self.glyphs.len() as f64;
        GlyphMetrics {
            advance: mean,
            bottom: 0.0,
            top: self.line_height,
        }
    }

    /// Root box dimensions of `word` at 1pt, before rotation.
    pub fn unit_extent(&self, word: &str) -> (f64, f64) {
        let advance: f64 = word.chars().map(|c| self.glyph(c).advance).sum();
        (advance / self.units_per_em, self.line_height / self.units_per_em)
    }
}

/// Root box dimensions at 1pt after applying orientation.
pub fn oriented_unit_extent(word: &str, orientation: Orientation) -> (f64, f64) {
    let (w, h) = FontMetrics::bundled().unit_extent(word);
    match orientation {
        Orientation::Horizontal => (w, h),
        Orientation::Vertical => (h, w),
    }
}

/// Two-level box approximation of a rendered word, in coordinates relative
/// to the word's center.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphBoxTree {
    pub root: Rect,
    pub children: Vec<Rect>,
}

impl GlyphBoxTree {
    pub fn width(&self) -> f64 {
        self.root.width()
    }

    pub fn height(&self) -> f64 {
        self.root.height()
    }

    pub fn root_at(&self, pos: Point) -> Rect {
        self.root.translate(pos)
    }

    pub fn children_at(&self, pos: Point) -> impl Iterator<Item = Rect> + '_ {
        self.children.iter().map(move |c| c.translate(pos))
    }
}

pub fn measure(word: &str, size: f64, orientation: Orientation) -> GlyphBoxTree {
    measure_with(FontMetrics::bundled(), word, size, orientation)
}

pub fn measure_with(
    metrics: &FontMetrics,
    word: &str,
    size: f64,
    orientation: Orientation,
) -> GlyphBoxTree {
    debug_assert!(size > 0.0);
    let k = size / metrics.units_per_em;
    // same summation order as the pen below, so the last edge lands on w
    let advance: f64 = word.chars().map(|c| metrics.glyph(c).advance).sum();
    let (w, h) = (advance * k, metrics.line_height * k);
    let mut children = Vec::with_capacity(word.len());
    let mut pen = 0.0;
    for ch in word.chars() {
        let g = metrics.glyph(ch);
        let (u0, u1) = (pen * k, (pen + g.advance) * k);
        let (v0, v1) = (g.bottom * k, g.top * k);
        pen += g.advance;
        children.push(match orientation {
            Orientation::Horizontal => Rect::new(-w / 2.0 + u0, h / 2.0 - v1, -w / 2.0 + u1, h / 2.0 - v0),
            // text runs upward, the line's bottom faces +x
            Orientation::Vertical => Rect::new(h / 2.0 - v1, w / 2.0 - u1, h / 2.0 - v0, w / 2.0 - u0),
        });
    }
    let root = match orientation {
        Orientation::Horizontal => Rect::centered(Point::ORIGIN, w, h),
        Orientation::Vertical => Rect::centered(Point::ORIGIN, h, w),
    };
    GlyphBoxTree { root, children }
}

/// Glyph-level intersection test with a root-box early out.
pub fn intersects(a: &GlyphBoxTree, pos_a: Point, b: &GlyphBoxTree, pos_b: Point) -> bool {
    let root_b = b.root_at(pos_b);
    if !a.root_at(pos_a).overlaps(&root_b) {
        return false;
    }
    let root_a = a.root_at(pos_a);
    a.children_at(pos_a)
        .filter(|ca| ca.overlaps(&root_b))
        .any(|ca| {
            b.children_at(pos_b)
                .filter(|cb| cb.overlaps(&root_a))
                .any(|cb| ca.overlaps(&cb))
        })
}

pub fn within_frame(tree: &GlyphBoxTree, pos: Point, frame: &Frame) -> bool {
    frame.rect().contains(&tree.root_at(pos))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralParams {
    /// Radial growth in pixels per radian.
    pub a: f64,
    /// Angular increment in radians per step.
    pub b: f64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        SpiralParams { a: 1.5, b: 0.35 }
    }
}

/// Position after `k` steps along an Archimedean spiral centered on `origin`.
pub fn spiral_step(origin: Point, k: usize, params: SpiralParams) -> Point {
    let theta = params.b * k as f64;
    let r = params.a * theta;
    Point::new(origin.x + r * theta.cos(), origin.y + r * theta.sin())
}

/// Minimum translation that separates the two root boxes, 0 when they do not
/// overlap.
pub fn separation_distance(a: &GlyphBoxTree, pos_a: Point, b: &GlyphBoxTree, pos_b: Point) -> f64 {
    let (px, py) = a.root_at(pos_a).penetration(&b.root_at(pos_b));
    if px > 0.0 && py > 0.0 {
        px.min(py)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_square() -> GlyphBoxTree {
        let r = Rect::centered(Point::ORIGIN, 1.0, 1.0);
        GlyphBoxTree {
            root: r,
            children: vec![r],
        }
    }

    #[test]
    fn wide_letters_measure_wider() {
        let ii = measure("ii", 20.0, Orientation::Horizontal);
        let ww = measure("ww", 20.0, Orientation::Horizontal);
        assert!(ww.width() > ii.width());
        assert_eq!(ww.height(), ii.height());
    }

    #[test]
    fn measure_scales_linearly() {
        for o in [Orientation::Horizontal, Orientation::Vertical] {
            let a = measure("storm", 10.0, o);
            let b = measure("storm", 20.0, o);
            assert_eq!(b.root, a.root.scale(2.0));
            for (ca, cb) in a.children.iter().zip(&b.children) {
                let s = ca.scale(2.0);
                assert!((s.min_x - cb.min_x).abs() < 1e-12 && (s.max_y - cb.max_y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn root_equals_sum_of_children() {
        let word = "coordination";
        let t = measure(word, 17.0, Orientation::Horizontal);
        let sum: f64 = t.children.iter().map(Rect::width).sum();
        assert!((t.width() - sum).abs() < 1e-9);
        // children are contiguous left to right
        for pair in t.children.windows(2) {
            assert!((pair[0].max_x - pair[1].min_x).abs() < 1e-9);
        }
        let v = measure(word, 17.0, Orientation::Vertical);
        assert!((v.height() - sum).abs() < 1e-9);
        assert!((v.width() - t.height()).abs() < 1e-12);
        // vertical words read bottom to top
        assert!(v.children[0].min_y > v.children[1].min_y);
    }

    #[test]
    fn children_inside_root() {
        for o in [Orientation::Horizontal, Orientation::Vertical] {
            let t = measure("jumpy-quartz", 33.0, o);
            assert!(t.children.iter().all(|c| t.root.contains(c)));
        }
    }

    #[test]
    fn unknown_glyph_uses_average_advance() {
        let m = FontMetrics::bundled();
        let g = m.glyph('\u{00e9}');
        let mean = m.glyphs.values().map(|g| g.advance).sum::<f64>() / m.glyphs.len() as f64;
        assert_eq!(g.advance, mean);
    }

    #[test]
    fn intersection_basics() {
        let t = measure("hello", 20.0, Orientation::Horizontal);
        assert!(intersects(&t, Point::ORIGIN, &t, Point::ORIGIN));
        assert!(!intersects(&t, Point::ORIGIN, &t, Point::new(1000.0, 0.0)));
        // edge contact is not an intersection
        assert!(!intersects(&t, Point::ORIGIN, &t, Point::new(t.width(), 0.0)));
    }

    #[test]
    fn glyph_level_allows_root_overlap() {
        // x-height letters leave the descender and ascender bands empty, so
        // two such lines can share a band without their glyph boxes touching.
        let top = measure("oo", 40.0, Orientation::Horizontal);
        let bottom = measure("aa", 40.0, Orientation::Horizontal);
        let gap = 0.5 * 0.23 * 40.0;
        let pos_b = Point::new(0.0, top.height() - gap);
        assert!(top.root_at(Point::ORIGIN).overlaps(&bottom.root_at(pos_b)));
        assert!(!intersects(&top, Point::ORIGIN, &bottom, pos_b));
    }

    fn brute_force(a: &GlyphBoxTree, pa: Point, b: &GlyphBoxTree, pb: Point) -> bool {
        a.children_at(pa)
            .any(|ca| b.children_at(pb).any(|cb| ca.overlaps(&cb)))
    }

    #[test]
    fn intersection_matches_all_pairs_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let words = ["storm", "cloud", "jiggly", "wt", "ab", "quantum", "layout"];
        let mut hits = 0;
        for _ in 0..100 {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                let w = words[rng.random_range(0..words.len())];
                let o = if rng.random_bool(0.3) { Orientation::Vertical } else { Orientation::Horizontal };
                measure(w, rng.random_range(10.0..50.0), o)
            };
            let a = pick(&mut rng);
            let b = pick(&mut rng);
            let pa = Point::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
            let pb = Point::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
            let got = intersects(&a, pa, &b, pb);
            assert_eq!(got, brute_force(&a, pa, &b, pb));
            assert_eq!(got, intersects(&b, pb, &a, pa));
            hits += usize::from(got);
        }
        assert!(hits > 10 && hits < 90, "poorly mixed sample: {hits}");
    }

    #[test]
    fn frame_containment() {
        let t = measure("word", 12.0, Orientation::Horizontal);
        let big = Frame::new(1000.0, 1000.0);
        assert!(within_frame(&t, Point::ORIGIN, &big));
        assert!(!within_frame(&t, Point::new(499.0, 0.0), &big));
        let snug = Frame::new(t.width(), t.height());
        assert!(within_frame(&t, Point::ORIGIN, &snug));
    }

    #[test]
    fn spiral_starts_at_origin_and_grows() {
        let p = SpiralParams::default();
        let o = Point::new(3.0, -2.0);
        assert_eq!(spiral_step(o, 0, p), o);
        let mut last = 0.0;
        for k in 0..1000 {
            let r = spiral_step(o, k, p).distance(o);
            assert!(r + 1e-9 >= last);
            last = r;
        }
    }

    #[test]
    fn spiral_step_length_bound() {
        let p = SpiralParams::default();
        for k in 0..10_000 {
            let theta = p.b * k as f64;
            let step = spiral_step(Point::ORIGIN, k, p).distance(spiral_step(Point::ORIGIN, k + 1, p));
            assert!(step <= p.a * p.b * (theta + 1.0) + 1e-9, "k = {k}");
        }
    }

    #[test]
    fn separation_examples() {
        let s = unit_square();
        assert_eq!(separation_distance(&s, Point::ORIGIN, &s, Point::new(2.0, 0.0)), 0.0);
        let d = separation_distance(&s, Point::ORIGIN, &s, Point::new(0.4, 0.0));
        assert!((d - 0.6).abs() < 1e-12);
        assert_eq!(separation_distance(&s, Point::ORIGIN, &s, Point::ORIGIN), 1.0);
    }

    #[test]
    fn separation_matches_grid_search() {
        // smallest axis-aligned translation of b that clears a, by scanning
        let s = unit_square();
        let pb = Point::new(0.4, 0.0);
        let best = (0..=2000)
            .map(|i| i as f64 * 0.001)
            .flat_map(|t| [(t, 0.0), (-t, 0.0), (0.0, t), (0.0, -t)])
            .filter(|&(dx, dy)| {
                !s.root_at(Point::ORIGIN)
                    .overlaps(&s.root_at(Point::new(pb.x + dx, pb.y + dy)))
            })
            .map(|(dx, dy)| dx.abs() + dy.abs())
            .fold(f64::INFINITY, f64::min);
        assert!((best - 0.6).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn separation_translation_clears_roots(
            ax in -20.0f64..20.0, ay in -20.0f64..20.0, bx in -20.0f64..20.0, by in -20.0f64..20.0,
            sa in 5.0f64..40.0, sb in 5.0f64..40.0, va: bool, vb: bool,
        ) {
            let o = |v: bool| if v { Orientation::Vertical } else { Orientation::Horizontal };
            let a = measure("pair", sa, o(va));
            let b = measure("wordy", sb, o(vb));
            let (pa, pb) = (Point::new(ax, ay), Point::new(bx, by));
            let d = separation_distance(&a, pa, &b, pb);
            let ra = a.root_at(pa);
            prop_assert_eq!(d == 0.0, !ra.overlaps(&b.root_at(pb)));
            if d > 0.0 {
                let (px, py) = ra.penetration(&b.root_at(pb));
                let shift = if px <= py {
                    // push b to whichever side needs d
                    let dir = if ra.max_x - b.root_at(pb).min_x <= d + 1e-12 { 1.0 } else { -1.0 };
                    Point::new(pb.x + dir * d, pb.y)
                } else {
                    let dir = if ra.max_y - b.root_at(pb).min_y <= d + 1e-12 { 1.0 } else { -1.0 };
                    Point::new(pb.x, pb.y + dir * d)
                };
                let moved = b.root_at(shift);
                let (qx, qy) = ra.penetration(&moved);
                prop_assert!(qx.min(qy) <= 1e-9);
            }
        }

        #[test]
        fn root_disjoint_implies_glyph_disjoint(
            bx in -60.0f64..60.0, by in -60.0f64..60.0, sb in 5.0f64..40.0,
        ) {
            let a = measure("glyph", 30.0, Orientation::Horizontal);
            let b = measure("trees", sb, Orientation::Vertical);
            let pb = Point::new(bx, by);
            if !a.root.overlaps(&b.root_at(pb)) {
                prop_assert!(!intersects(&a, Point::ORIGIN, &b, pb));
            }
        }

        #[test]
        fn containment_is_translation_invariant(x in -50.0f64..50.0, y in -50.0f64..50.0, dx in -500.0f64..500.0, dy in -500.0f64..500.0) {
            let t = measure("frame", 20.0, Orientation::Horizontal);
            let f = Frame::new(200.0, 150.0);
            let moved = Rect::centered(Point::new(dx, dy), f.width, f.height);
            let inside = within_frame(&t, Point::new(x, y), &f);
            prop_assert_eq!(inside, moved.contains(&t.root_at(Point::new(x + dx, y + dy))));
        }
    }
}
