//! Cloud and storm data model plus the placement algorithms.
//!
//! [`spiral`] places the words of a single cloud greedily along spiral
//! paths; [`coordinate`] runs the independent, iterative and combined storm
//! pipelines on top of it.

pub mod coordinate;
pub mod spiral;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Frame, GlyphBoxTree, Point, SpiralParams};
use crate::style::{Orientation, Rgb, SizeScale, WordStyle};

pub use coordinate::{
    average_shared_positions, combined_layout, gradient_layout, independent_layout,
    iterative_layout, IterativeReport,
};
pub use spiral::{estimate_frame, sample_position, spiral_layout};

/// One word selected for a cloud, before placement.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSpec {
    pub text: String,
    pub weight: f64,
    /// Font size derived from the weight; the size the cloud should display.
    pub target: f64,
}

/// The words of one cloud in placement order (weight descending, ties
/// lexicographic).
#[derive(Debug, Clone, PartialEq)]
pub struct CloudSpec {
    pub doc_id: String,
    pub label: Option<String>,
    pub words: Vec<WordSpec>,
    pub scale: SizeScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StormSpec {
    pub clouds: Vec<CloudSpec>,
    pub styles: BTreeMap<String, WordStyle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedWord {
    pub text: String,
    pub weight: f64,
    pub target: f64,
    pub pos: Point,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    pub doc_id: String,
    pub label: Option<String>,
    pub words: Vec<PlacedWord>,
    pub frame: Frame,
}

impl Cloud {
    pub fn word(&self, text: &str) -> Option<&PlacedWord> {
        self.words.iter().find(|w| w.text == text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Storm {
    pub clouds: Vec<Cloud>,
    pub styles: BTreeMap<String, WordStyle>,
    /// For every word, the indices of the clouds containing it.
    pub shared: BTreeMap<String, Vec<usize>>,
}

/// A pair of words in one cloud whose glyph boxes intersect.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub cloud: usize,
    pub doc_id: String,
    pub first: String,
    pub second: String,
}

impl Storm {
    pub fn new(clouds: Vec<Cloud>, styles: BTreeMap<String, WordStyle>) -> Self {
        let shared = shared_index(&clouds);
        Storm {
            clouds,
            styles,
            shared,
        }
    }

    pub fn orientation(&self, word: &str) -> Orientation {
        self.styles
            .get(word)
            .map(|s| s.orientation)
            .unwrap_or_default()
    }

    pub fn tree(&self, word: &PlacedWord) -> GlyphBoxTree {
        geometry::measure(&word.text, word.size, self.orientation(&word.text))
    }

    pub fn word_count(&self) -> usize {
        self.clouds.iter().map(|c| c.words.len()).sum()
    }

    /// Exhaustive glyph-level scan of every word pair in every cloud.
    pub fn overlap_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (ci, cloud) in self.clouds.iter().enumerate() {
            let trees: Vec<_> = cloud.words.iter().map(|w| self.tree(w)).collect();
            for a in 0..cloud.words.len() {
                for b in a + 1..cloud.words.len() {
                    let (wa, wb) = (&cloud.words[a], &cloud.words[b]);
                    if geometry::intersects(&trees[a], wa.pos, &trees[b], wb.pos) {
                        out.push(Violation {
                            cloud: ci,
                            doc_id: cloud.doc_id.clone(),
                            first: wa.text.clone(),
                            second: wb.text.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    /// Number of overlapping root-box pairs across the storm.
    pub fn root_overlaps(&self) -> usize {
        self.clouds
            .iter()
            .map(|cloud| {
                let roots: Vec<_> = cloud
                    .words
                    .iter()
                    .map(|w| self.tree(w).root_at(w.pos))
                    .collect();
                let mut n = 0;
                for a in 0..roots.len() {
                    for b in a + 1..roots.len() {
                        n += usize::from(roots[a].overlaps(&roots[b]));
                    }
                }
                n
            })
            .sum()
    }

    /// Words whose root box leaves their cloud's frame, as (cloud, word).
    pub fn containment_violations(&self) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        for (ci, cloud) in self.clouds.iter().enumerate() {
            for w in &cloud.words {
                if !geometry::within_frame(&self.tree(w), w.pos, &cloud.frame) {
                    out.push((ci, w.text.clone()));
                }
            }
        }
        out
    }

    /// Mean distance of a shared word's positions from their centroid,
    /// averaged over all words present in at least two clouds. 0 when no
    /// word is shared.
    pub fn shared_spread(&self) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for (word, clouds) in &self.shared {
            if clouds.len() < 2 {
                continue;
            }
            let positions: Vec<Point> = clouds
                .iter()
                .filter_map(|&ci| self.clouds[ci].word(word).map(|w| w.pos))
                .collect();
            let k = positions.len() as f64;
            let centroid = Point::new(
                positions.iter().map(|p| p.x).sum::<f64>() / k,
                positions.iter().map(|p| p.y).sum::<f64>() / k,
            );
            total += positions.iter().map(|p| p.distance(centroid)).sum::<f64>() / k;
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    /// Smallest origin-centered frame containing every cloud's frame.
    pub fn union_frame(&self) -> Frame {
        self.clouds.iter().fold(Frame::new(1.0, 1.0), |acc, c| {
            Frame::new(acc.width.max(c.frame.width), acc.height.max(c.frame.height))
        })
    }

    pub fn to_file(&self) -> StormFile {
        StormFile {
            clouds: self
                .clouds
                .iter()
                .map(|c| CloudRecord {
                    doc_id: c.doc_id.clone(),
                    label: c.label.clone(),
                    frame: c.frame,
                    words: c
                        .words
                        .iter()
                        .map(|w| {
                            let style = &self.styles[&w.text];
                            WordRecord {
                                text: w.text.clone(),
                                weight: w.weight,
                                x: w.pos.x,
                                y: w.pos.y,
                                size: w.size,
                                color: style.color,
                                alpha: style.alpha,
                                orientation: style.orientation,
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_file().to_json()
    }

    pub fn from_json(text: &str) -> Result<Storm> {
        StormFile::from_json(text)?.into_storm()
    }
}

fn shared_index(clouds: &[Cloud]) -> BTreeMap<String, Vec<usize>> {
    let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (ci, cloud) in clouds.iter().enumerate() {
        for w in &cloud.words {
            index.entry(w.text.clone()).or_default().push(ci);
        }
    }
    index
}

/// Tunables of the placement algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub words_per_cloud: usize,
    pub seed: u64,
    pub max_spiral_steps: usize,
    pub frame_growth: f64,
    pub max_restarts: usize,
    pub iterations: usize,
    pub sigma_frac: f64,
    pub fill_ratio: f64,
    pub spiral: SpiralParams,
    /// Iterative rounds stop early once the shared-word spread drops below this.
    pub convergence_spread: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            words_per_cloud: crate::corpus::DEFAULT_WORDS_PER_CLOUD,
            seed: 0,
            max_spiral_steps: 2000,
            frame_growth: 1.2,
            max_restarts: 10,
            iterations: 5,
            sigma_frac: 0.15,
            fill_ratio: 0.35,
            spiral: SpiralParams::default(),
            convergence_spread: 0.5,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.words_per_cloud == 0 {
            return bad("words_per_cloud must be at least 1");
        }
        if self.max_spiral_steps == 0 {
            return bad("max_spiral_steps must be positive");
        }
        if !(self.frame_growth > 1.0) {
            return bad("frame_growth must exceed 1");
        }
        if !(self.sigma_frac > 0.0) {
            return bad("sigma_frac must be positive");
        }
        if !(self.fill_ratio > 0.0 && self.fill_ratio <= 1.0) {
            return bad("fill_ratio must lie in (0, 1]");
        }
        if !(self.spiral.a > 0.0 && self.spiral.b > 0.0) {
            return bad("spiral parameters must be positive");
        }
        Ok(())
    }
}

/// On-disk storm representation consumed by rendering and inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormFile {
    pub clouds: Vec<CloudRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudRecord {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub frame: Frame,
    pub words: Vec<WordRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordRecord {
    pub text: String,
    pub weight: f64,
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub color: Rgb,
    pub alpha: f64,
    pub orientation: Orientation,
}

impl StormFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("storm serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<StormFile> {
        serde_json::from_str(text).map_err(|e| Error::json("storm", e))
    }

    /// Words whose color, alpha or orientation differ between clouds.
    pub fn attribute_conflicts(&self) -> Vec<String> {
        let mut first: BTreeMap<&str, &WordRecord> = BTreeMap::new();
        let mut conflicts = Vec::new();
        for cloud in &self.clouds {
            for w in &cloud.words {
                match first.get(w.text.as_str()) {
                    None => {
                        first.insert(&w.text, w);
                    }
                    Some(prev) => {
                        if prev.color != w.color
                            || prev.alpha != w.alpha
                            || prev.orientation != w.orientation
                        {
                            conflicts.push(w.text.clone());
                        }
                    }
                }
            }
        }
        conflicts.sort();
        conflicts.dedup();
        conflicts
    }

    pub fn into_storm(self) -> Result<Storm> {
        if let Some(word) = self.attribute_conflicts().first() {
            return Err(Error::InvalidInput(format!(
                "word `{word}` is styled differently across clouds"
            )));
        }
        let mut styles = BTreeMap::new();
        let clouds = self
            .clouds
            .into_iter()
            .map(|c| {
                if !(c.frame.width > 0.0 && c.frame.height > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "cloud `{}` has an empty frame",
                        c.doc_id
                    )));
                }
                let words = c
                    .words
                    .into_iter()
                    .map(|w| {
                        if !(w.size > 0.0) {
                            return Err(Error::InvalidInput(format!(
                                "word `{}` in `{}` has non-positive size",
                                w.text, c.doc_id
                            )));
                        }
                        styles.entry(w.text.clone()).or_insert_with(|| WordStyle {
                            word: w.text.clone(),
                            color: w.color,
                            alpha: w.alpha,
                            orientation: w.orientation,
                        });
                        Ok(PlacedWord {
                            text: w.text,
                            weight: w.weight,
                            target: w.size,
                            pos: Point::new(w.x, w.y),
                            size: w.size,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Cloud {
                    doc_id: c.doc_id,
                    label: c.label,
                    words,
                    frame: c.frame,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Storm::new(clouds, styles))
    }
}
