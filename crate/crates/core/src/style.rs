//! Storm-wide visual attributes: color, transparency, orientation and size.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::VocabularyStats;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_ALPHA_MIN: f64 = 0.35;
pub const DEFAULT_P_VERTICAL: f64 = 0.2;
pub const DEFAULT_SIZE_MIN: f64 = 12.0;
pub const DEFAULT_SIZE_MAX: f64 = 64.0;

/// Dark saturated hues that read well on white.
pub const DEFAULT_PALETTE: [Rgb; 6] = [
    Rgb(0x1f, 0x4e, 0x79),
    Rgb(0x9b, 0x1b, 0x1b),
    Rgb(0x1b, 0x5e, 0x20),
    Rgb(0x6a, 0x1b, 0x9a),
    Rgb(0xb3, 0x4a, 0x00),
    Rgb(0x00, 0x5f, 0x5a),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const BLACK: Rgb = Rgb(0, 0, 0);

    pub fn to_hex(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

impl FromStr for Rgb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        let bad = || Error::InvalidConfig(format!("`{s}` is not a #rrggbb color"));
        if hex.len() != 6 || !hex.is_ascii() {
            return Err(bad());
        }
        let channel = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
        Ok(Rgb(channel(0)?, channel(2)?, channel(4)?))
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Horizontal,
    /// Rotated a quarter turn counter-clockwise, reading bottom to top.
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStyle {
    pub word: String,
    pub color: Rgb,
    pub alpha: f64,
    pub orientation: Orientation,
}

/// Linear map from a cloud's weight range onto font sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeScale {
    pub s_min: f64,
    pub s_max: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl SizeScale {
    pub fn new(s_min: f64, s_max: f64, w_min: f64, w_max: f64) -> Self {
        debug_assert!(s_min < s_max && w_min <= w_max);
        SizeScale {
            s_min,
            s_max,
            w_min,
            w_max,
        }
    }

    /// Scale spanning the observed range of `weights`.
    pub fn fit(s_min: f64, s_max: f64, weights: impl IntoIterator<Item = f64>) -> Self {
        let (lo, hi) = weights
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
                (lo.min(w), hi.max(w))
            });
        if lo > hi {
            return SizeScale::new(s_min, s_max, 0.0, 0.0);
        }
        SizeScale::new(s_min, s_max, lo, hi)
    }
}

pub fn assign_size(weight: f64, scale: &SizeScale) -> f64 {
    if scale.w_max == scale.w_min {
        return scale.s_max;
    }
    let t = (weight - scale.w_min) / (scale.w_max - scale.w_min);
    scale.s_min + (scale.s_max - scale.s_min) * t
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleParams {
    pub palette: Vec<Rgb>,
    pub p_vertical: f64,
    pub alpha_min: f64,
    pub seed: u64,
}

impl Default for StyleParams {
    fn default() -> Self {
        StyleParams {
            palette: DEFAULT_PALETTE.to_vec(),
            p_vertical: DEFAULT_P_VERTICAL,
            alpha_min: DEFAULT_ALPHA_MIN,
            seed: 0,
        }
    }
}

/// Builds the storm-wide style table.
///
/// Color and orientation come from a stream keyed by `(seed, word)`, so a
/// word is styled identically in every cloud and in every run regardless of
/// which other words are present. Alpha grows linearly with idf from
/// `alpha_min` (word in every document) to 1 (rarest word in the vocabulary).
pub fn assign_styles<'a>(
    vocab: impl IntoIterator<Item = &'a str>,
    stats: &VocabularyStats,
    params: &StyleParams,
) -> BTreeMap<String, WordStyle> {
    assert!(!params.palette.is_empty(), "palette must not be empty");
    let words: Vec<&str> = vocab.into_iter().collect();
    let idf_max = words
        .iter()
        .map(|w| stats.idf(w))
        .fold(0.0_f64, f64::max);
    words
        .into_iter()
        .map(|word| {
            let mut rng = rng::stream(params.seed, &["style", word]);
            let color = params.palette[rng.random_range(0..params.palette.len())];
            let orientation = if rng.random_bool(params.p_vertical) {
                Orientation::Vertical
            } else {
                Orientation::Horizontal
            };
            let alpha = if idf_max > 0.0 {
                params.alpha_min + (1.0 - params.alpha_min) * stats.idf(word) / idf_max
            } else {
                1.0
            };
            (
                word.to_string(),
                WordStyle {
                    word: word.to_string(),
                    color,
                    alpha,
                    orientation,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vector, compute_stats, Document, StopList};
    use proptest::prelude::*;

    fn stats_for(texts: &[&str]) -> VocabularyStats {
        let sl = StopList::empty();
        let vs: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| build_vector(&Document::new(i.to_string(), *t), &sl).unwrap())
            .collect();
        compute_stats(&vs)
    }

    #[test]
    fn size_endpoints_and_midpoint() {
        let scale = SizeScale::new(12.0, 64.0, 1.0, 9.0);
        assert_eq!(assign_size(9.0, &scale), 64.0);
        assert_eq!(assign_size(1.0, &scale), 12.0);
        assert!((assign_size(5.0, &scale) - 38.0).abs() < 1e-9);
        let flat = SizeScale::new(12.0, 64.0, 3.0, 3.0);
        assert_eq!(assign_size(3.0, &flat), 64.0);
    }

    #[test]
    fn alpha_tracks_idf() {
        let stats = stats_for(&["common rare", "common other", "common other"]);
        let styles = assign_styles(["common", "rare", "other"], &stats, &StyleParams::default());
        assert_eq!(styles["common"].alpha, DEFAULT_ALPHA_MIN);
        assert_eq!(styles["rare"].alpha, 1.0);
        let other = styles["other"].alpha;
        assert!(other > DEFAULT_ALPHA_MIN && other < 1.0);
    }

    #[test]
    fn alpha_is_opaque_when_every_word_is_ubiquitous() {
        let stats = stats_for(&["aa bb", "aa bb"]);
        let styles = assign_styles(["aa", "bb"], &stats, &StyleParams::default());
        assert!(styles.values().all(|s| s.alpha == 1.0));
    }

    #[test]
    fn styles_are_keyed_by_word() {
        let stats = stats_for(&["alpha beta gamma", "alpha delta"]);
        let params = StyleParams {
            seed: 42,
            ..Default::default()
        };
        let a = assign_styles(["alpha", "beta", "gamma", "delta"], &stats, &params);
        let b = assign_styles(["delta", "alpha"], &stats, &params);
        assert_eq!(a["alpha"].color, b["alpha"].color);
        assert_eq!(a["delta"].orientation, b["delta"].orientation);
        assert_eq!(a, assign_styles(["alpha", "beta", "gamma", "delta"], &stats, &params));
    }

    #[test]
    fn vertical_share_follows_probability() {
        let words: Vec<String> = (0..2000).map(|i| format!("w{i}")).collect();
        let stats = stats_for(&["aa"]);
        let styles = assign_styles(words.iter().map(String::as_str), &stats, &StyleParams::default());
        let vertical = styles
            .values()
            .filter(|s| s.orientation == Orientation::Vertical)
            .count() as f64
            / 2000.0;
        // 4 standard deviations of a Bernoulli(0.2) mean over 2000 draws
        assert!((vertical - 0.2).abs() < 4.0 * (0.16f64 / 2000.0).sqrt());
    }

    #[test]
    fn hex_round_trip() {
        let c: Rgb = "#1F4e79".parse().unwrap();
        assert_eq!(c, Rgb(0x1f, 0x4e, 0x79));
        assert_eq!(c.to_hex(), "#1f4e79");
        assert!("#12345".parse::<Rgb>().is_err());
        assert!("zz0000".parse::<Rgb>().is_err());
    }

    proptest! {
        #[test]
        fn size_is_monotone(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let scale = SizeScale::new(12.0, 64.0, 0.0, 100.0);
            if a <= b {
                prop_assert!(assign_size(a, &scale) <= assign_size(b, &scale));
            }
        }
    }
}
