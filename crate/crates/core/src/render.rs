//! SVG output, box-ink rasterization, grid composition and compactness.
//!
//! Rasters paint each word's glyph boxes rather than rendering text, so the
//! pixels depend only on the storm and never on an installed font or
//! rasterizer. The SVG keeps real text for viewing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{measure, FontMetrics, Frame, Rect};
use crate::layout::{Cloud, PlacedWord, Storm};
use crate::style::{Orientation, Rgb, WordStyle};

pub const DEFAULT_RASTER_WIDTH: u32 = 200;
pub const DEFAULT_RASTER_HEIGHT: u32 = 150;

const GRID_BORDER: Rgb = Rgb(0x99, 0x99, 0x99);

fn placement_order(cloud: &Cloud) -> Vec<&PlacedWord> {
    let mut words: Vec<&PlacedWord> = cloud.words.iter().collect();
    words.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.text.cmp(&b.text)));
    words
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One `<text>` element per word, heaviest first, over a white background.
pub fn render_svg(cloud: &Cloud, styles: &BTreeMap<String, WordStyle>) -> String {
    let metrics = FontMetrics::bundled();
    let r = cloud.frame.rect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.2}" height="{h:.2}" viewBox="{x:.2} {y:.2} {w:.2} {h:.2}">"#,
        x = r.min_x,
        y = r.min_y,
        w = r.width(),
        h = r.height()
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
        r.min_x,
        r.min_y,
        r.width(),
        r.height(),
        Rgb::WHITE
    );
    let _ = writeln!(
        svg,
        r#"<g font-family="{}, Arial, sans-serif" text-anchor="middle">"#,
        metrics.family
    );
    for w in placement_order(cloud) {
        let style = &styles[&w.text];
        // baseline offset from the center of the line box
        let half_line = 0.5 * metrics.line_height * w.size / metrics.units_per_em;
        let drop = half_line - metrics.baseline * w.size / metrics.units_per_em;
        let transform = match style.orientation {
            Orientation::Horizontal => format!("translate({:.2} {:.2})", w.pos.x, w.pos.y),
            Orientation::Vertical => format!("translate({:.2} {:.2}) rotate(-90)", w.pos.x, w.pos.y),
        };
        let _ = writeln!(
            svg,
            r#"<text transform="{transform}" y="{drop:.2}" font-size="{:.2}" fill="{}" fill-opacity="{:.3}">{}</text>"#,
            w.size,
            style.color,
            style.alpha,
            escape(&w.text)
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Raster {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(3 * n);
        for _ in 0..n {
            pixels.extend_from_slice(&[fill.0, fill.1, fill.2]);
        }
        Raster {
            width,
            height,
            pixels,
        }
    }

    fn index(&self, x: u32, y: u32) -> usize {
        3 * (y as usize * self.width as usize + x as usize)
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = self.index(x, y);
        Rgb(self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let i = self.index(x, y);
        self.pixels[i..i + 3].copy_from_slice(&[c.0, c.1, c.2]);
    }

    /// Composites `color` at opacity `alpha` over the existing pixel.
    pub fn blend(&mut self, x: u32, y: u32, color: Rgb, alpha: f64) {
        let i = self.index(x, y);
        for (k, c) in [color.0, color.1, color.2].into_iter().enumerate() {
            let under = f64::from(self.pixels[i + k]);
            self.pixels[i + k] = (alpha * f64::from(c) + (1.0 - alpha) * under).round() as u8;
        }
    }

    /// Fills the pixels whose centers lie inside `rect` (pixel units).
    pub fn fill_rect(&mut self, rect: &Rect, color: Rgb, alpha: f64) {
        let span = |lo: f64, hi: f64, n: u32| {
            let a = (lo - 0.5).ceil().max(0.0) as i64;
            let b = ((hi - 0.5).ceil() as i64).min(i64::from(n));
            (a, b)
        };
        let (x0, x1) = span(rect.min_x, rect.max_x, self.width);
        let (y0, y1) = span(rect.min_y, rect.max_y, self.height);
        for y in y0..y1 {
            for x in x0..x1 {
                self.blend(x as u32, y as u32, color, alpha);
            }
        }
    }

    pub fn is_background(&self, x: u32, y: u32) -> bool {
        self.get(x, y) == Rgb::WHITE
    }

    pub fn ink_count(&self) -> usize {
        self.pixels
            .chunks_exact(3)
            .filter(|p| *p != [255, 255, 255])
            .count()
    }

    /// Copies `other` with its top-left corner at `(x, y)`.
    pub fn blit(&mut self, other: &Raster, x: u32, y: u32) {
        for row in 0..other.height {
            let src = other.index(0, row);
            let dst = self.index(x, y + row);
            let len = 3 * other.width as usize;
            self.pixels[dst..dst + len].copy_from_slice(&other.pixels[src..src + len]);
        }
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
        let mut writer = encoder.write_header().map_err(to_io)?;
        writer.write_image_data(&self.pixels).map_err(to_io)?;
        writer.finish().map_err(to_io)
    }
}

/// Rasterizes `cloud` so that its own frame fills `dims`.
pub fn rasterize(cloud: &Cloud, styles: &BTreeMap<String, WordStyle>, dims: (u32, u32)) -> Raster {
    rasterize_in(cloud, styles, &cloud.frame, dims)
}

/// Rasterizes `cloud` with `viewport` (an origin-centered frame in cloud
/// coordinates) scaled uniformly to fit `dims` and centered.
pub fn rasterize_in(
    cloud: &Cloud,
    styles: &BTreeMap<String, WordStyle>,
    viewport: &Frame,
    dims: (u32, u32),
) -> Raster {
    assert!(dims.0 > 0 && dims.1 > 0, "raster dimensions must be positive");
    let mut raster = Raster::new(dims.0, dims.1, Rgb::WHITE);
    let scale = (f64::from(dims.0) / viewport.width).min(f64::from(dims.1) / viewport.height);
    let (cx, cy) = (f64::from(dims.0) / 2.0, f64::from(dims.1) / 2.0);
    for w in placement_order(cloud) {
        let style = &styles[&w.text];
        let tree = measure(&w.text, w.size, style.orientation);
        for child in tree.children_at(w.pos) {
            let px = Rect::new(
                cx + child.min_x * scale,
                cy + child.min_y * scale,
                cx + child.max_x * scale,
                cy + child.max_y * scale,
            );
            raster.fill_rect(&px, style.color, style.alpha);
        }
    }
    raster
}

/// Every cloud rasterized into a common viewport so that equal cloud
/// coordinates land on equal pixels across the storm.
pub fn rasterize_storm(storm: &Storm, dims: (u32, u32)) -> Vec<Raster> {
    let viewport = storm.union_frame();
    storm
        .clouds
        .par_iter()
        .map(|c| rasterize_in(c, &storm.styles, &viewport, dims))
        .collect()
}

pub fn grid_shape(clouds: usize, columns: usize) -> (usize, usize) {
    assert!(columns >= 1, "at least one column");
    let columns = columns.min(clouds.max(1));
    (clouds.div_ceil(columns).max(1), columns)
}

/// Row-major grid of per-cloud rasters, each at `cell` size inside a
/// one-pixel border.
pub fn compose_grid(storm: &Storm, columns: usize, cell: (u32, u32)) -> Raster {
    let (rows, cols) = grid_shape(storm.clouds.len(), columns);
    let (cw, ch) = cell;
    let width = cols as u32 * (cw + 1) + 1;
    let height = rows as u32 * (ch + 1) + 1;
    let mut grid = Raster::new(width, height, Rgb::WHITE);
    for r in 0..=rows as u32 {
        for x in 0..width {
            grid.set(x, r * (ch + 1), GRID_BORDER);
        }
    }
    for c in 0..=cols as u32 {
        for y in 0..height {
            grid.set(c * (cw + 1), y, GRID_BORDER);
        }
    }
    for (k, cloud) in storm.clouds.iter().enumerate() {
        let (r, c) = ((k / cols) as u32, (k % cols) as u32);
        let tile = rasterize(cloud, &storm.styles, cell);
        grid.blit(&tile, c * (cw + 1) + 1, r * (ch + 1) + 1);
    }
    grid
}

/// Percentage of non-white pixels inside the bounding box of all non-white
/// pixels; 0 for a blank raster.
pub fn compactness(raster: &Raster) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    let mut ink = 0usize;
    for y in 0..raster.height {
        for x in 0..raster.width {
            if !raster.is_background(x, y) {
                ink += 1;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if ink == 0 {
        return 0.0;
    }
    let area = (x1 - x0 + 1) as f64 * (y1 - y0 + 1) as f64;
    100.0 * ink as f64 / area
}

/// Compactness of every cloud rasterized in its own frame.
pub fn storm_compactness(storm: &Storm, dims: (u32, u32)) -> Vec<f64> {
    storm
        .clouds
        .par_iter()
        .map(|c| compactness(&rasterize(c, &storm.styles, dims)))
        .collect()
}

pub fn compactness_csv(storm: &Storm, values: &[f64]) -> String {
    let mut out = String::from("doc_id,compactness\n");
    for (cloud, v) in storm.clouds.iter().zip(values) {
        let _ = writeln!(out, "{},{:.4}", cloud.doc_id, v);
    }
    out
}
