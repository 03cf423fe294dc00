//! Storm-level pipelines: independent clouds, iterative coordination and
//! the combined iterative-then-gradient algorithm.

use rayon::prelude::*;

use super::spiral::{estimate_frame, spiral_layout};
use super::{Cloud, CloudSpec, LayoutConfig, PlacedWord, Storm, StormSpec};
use crate::error::Result;
use crate::geometry::{measure, GlyphBoxTree, Point};
use crate::optimizer::{self, MinimizeReport, ObjectiveParams};
use crate::rng;

fn spec_trees(spec: &CloudSpec, storm: &StormSpec) -> Vec<GlyphBoxTree> {
    spec.words
        .iter()
        .map(|w| {
            let orientation = storm.styles.get(&w.text).map(|s| s.orientation).unwrap_or_default();
            measure(&w.text, w.target, orientation)
        })
        .collect()
}

fn layout_one(spec: &CloudSpec, storm: &StormSpec, config: &LayoutConfig) -> Result<Cloud> {
    let trees = spec_trees(spec, storm);
    let frame = estimate_frame(&trees, config.fill_ratio);
    let mut rng = rng::stream(config.seed, &["spiral", &spec.doc_id]);
    let placement = spiral_layout(&spec.doc_id, &trees, frame, None, &mut rng, config)?;
    Ok(Cloud {
        doc_id: spec.doc_id.clone(),
        label: spec.label.clone(),
        words: spec
            .words
            .iter()
            .zip(placement.positions)
            .map(|(w, pos)| PlacedWord {
                text: w.text.clone(),
                weight: w.weight,
                target: w.target,
                pos,
                size: w.target,
            })
            .collect(),
        frame: placement.frame,
    })
}

/// Every cloud laid out on its own from Gaussian-sampled starting points.
///
/// Each cloud draws from a stream keyed by its document id, so the result
/// does not depend on cloud order or thread count.
pub fn independent_layout(spec: &StormSpec, config: &LayoutConfig) -> Result<Storm> {
    let clouds = spec
        .clouds
        .par_iter()
        .map(|c| layout_one(c, spec, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(Storm::new(clouds, spec.styles.clone()))
}

/// Desired position of every word of every cloud: the mean of the word's
/// current positions over all clouds containing it.
pub fn average_shared_positions(storm: &Storm) -> Vec<Vec<Point>> {
    let means: std::collections::BTreeMap<&str, Point> = storm
        .shared
        .iter()
        .map(|(word, clouds)| {
            let (mut sx, mut sy) = (0.0, 0.0);
            for &ci in clouds {
                let p = storm.clouds[ci].word(word).expect("index is consistent").pos;
                sx += p.x;
                sy += p.y;
            }
            let k = clouds.len() as f64;
            (word.as_str(), Point::new(sx / k, sy / k))
        })
        .collect();
    storm
        .clouds
        .iter()
        .map(|c| c.words.iter().map(|w| means[w.text.as_str()]).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeReport {
    /// Shared-word spread after the initial pass and after every round.
    pub spreads: Vec<f64>,
    pub rounds: usize,
    pub converged: bool,
}

/// Runs up to `config.iterations` rounds of averaging followed by spiral
/// re-layout, starting from `storm`. Stops early once the shared-word spread
/// falls below `config.convergence_spread`.
pub fn refine_iteratively(storm: Storm, config: &LayoutConfig) -> Result<(Storm, IterativeReport)> {
    let mut storm = storm;
    let mut spreads = vec![storm.shared_spread()];
    let mut rounds = 0;
    while rounds < config.iterations && spreads[rounds] >= config.convergence_spread {
        rounds += 1;
        let desired = average_shared_positions(&storm);
        let round = rounds.to_string();
        let clouds = storm
            .clouds
            .par_iter()
            .zip(desired.par_iter())
            .map(|(cloud, want)| {
                let trees: Vec<_> = cloud.words.iter().map(|w| storm.tree(w)).collect();
                let mut rng = rng::stream(config.seed, &["spiral", &cloud.doc_id, &round]);
                let placement =
                    spiral_layout(&cloud.doc_id, &trees, cloud.frame, Some(want), &mut rng, config)?;
                let mut next = cloud.clone();
                for (w, pos) in next.words.iter_mut().zip(placement.positions) {
                    w.pos = pos;
                }
                next.frame = placement.frame;
                Ok(next)
            })
            .collect::<Result<Vec<_>>>()?;
        storm = Storm::new(clouds, storm.styles);
        spreads.push(storm.shared_spread());
    }
    let converged = spreads.last().is_some_and(|&s| s < config.convergence_spread);
    Ok((
        storm,
        IterativeReport {
            spreads,
            rounds,
            converged,
        },
    ))
}

/// Independent initial pass followed by iterative coordination rounds.
pub fn iterative_layout(spec: &StormSpec, config: &LayoutConfig) -> Result<(Storm, IterativeReport)> {
    refine_iteratively(independent_layout(spec, config)?, config)
}

/// Gradient coordination started from independent clouds.
pub fn gradient_layout(
    spec: &StormSpec,
    config: &LayoutConfig,
    params: &ObjectiveParams,
) -> Result<(Storm, MinimizeReport)> {
    optimizer::minimize(&independent_layout(spec, config)?, params)
}

/// Iterative coordination, then gradient minimisation warm-started from its
/// result.
pub fn combined_layout(
    spec: &StormSpec,
    config: &LayoutConfig,
    params: &ObjectiveParams,
) -> Result<(Storm, IterativeReport, MinimizeReport)> {
    let (storm, iterative) = iterative_layout(spec, config)?;
    let (storm, report) = optimizer::minimize(&storm, params)?;
    Ok((storm, iterative, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::WordSpec;
    use crate::style::{Orientation, SizeScale, WordStyle, DEFAULT_PALETTE};
    use std::collections::BTreeMap;

    fn spec(clouds: &[(&str, &[(&str, f64)])]) -> StormSpec {
        let mut styles = BTreeMap::new();
        let clouds = clouds
            .iter()
            .map(|(id, words)| {
                for (w, _) in words.iter() {
                    styles.insert(
                        w.to_string(),
                        WordStyle {
                            word: w.to_string(),
                            color: DEFAULT_PALETTE[1],
                            alpha: 1.0,
                            orientation: Orientation::Horizontal,
                        },
                    );
                }
                CloudSpec {
                    doc_id: id.to_string(),
                    label: None,
                    words: words
                        .iter()
                        .map(|&(w, s)| WordSpec {
                            text: w.into(),
                            weight: s,
                            target: s,
                        })
                        .collect(),
                    scale: SizeScale::new(12.0, 64.0, 12.0, 64.0),
                }
            })
            .collect();
        StormSpec { clouds, styles }
    }

    #[test]
    fn averaging_examples() {
        let s = spec(&[("a", &[("shared", 20.0), ("solo", 14.0)]), ("b", &[("shared", 20.0)])]);
        let mut storm = independent_layout(&s, &LayoutConfig::default()).unwrap();
        storm.clouds[0].words[0].pos = Point::new(0.0, 0.0);
        storm.clouds[1].words[0].pos = Point::new(2.0, 4.0);
        let solo = storm.clouds[0].words[1].pos;
        let desired = average_shared_positions(&storm);
        assert_eq!(desired[0][0], Point::new(1.0, 2.0));
        assert_eq!(desired[1][0], Point::new(1.0, 2.0));
        assert_eq!(desired[0][1], solo);
    }

    #[test]
    fn zero_rounds_equal_independent() {
        let s = spec(&[("a", &[("alpha", 40.0), ("beta", 20.0)]), ("b", &[("alpha", 30.0), ("gamma", 20.0)])]);
        let config = LayoutConfig {
            iterations: 0,
            ..Default::default()
        };
        let (storm, report) = iterative_layout(&s, &config).unwrap();
        assert_eq!(storm, independent_layout(&s, &config).unwrap());
        assert_eq!(report.rounds, 0);
    }

    #[test]
    fn no_shared_words_means_no_rounds_change() {
        let s = spec(&[("a", &[("alpha", 40.0), ("beta", 20.0)]), ("b", &[("gamma", 30.0), ("delta", 20.0)])]);
        let config = LayoutConfig::default();
        let (storm, report) = iterative_layout(&s, &config).unwrap();
        assert_eq!(storm, independent_layout(&s, &config).unwrap());
        assert!(report.converged);
    }

    #[test]
    fn independent_layout_ignores_cloud_order() {
        let a: &[(&str, f64)] = &[("alpha", 40.0), ("beta", 20.0), ("gamma", 16.0)];
        let b: &[(&str, f64)] = &[("alpha", 30.0), ("delta", 20.0)];
        let fwd = independent_layout(&spec(&[("a", a), ("b", b)]), &LayoutConfig::default()).unwrap();
        let rev = independent_layout(&spec(&[("b", b), ("a", a)]), &LayoutConfig::default()).unwrap();
        assert_eq!(fwd.clouds[0], rev.clouds[1]);
        assert_eq!(fwd.clouds[1], rev.clouds[0]);
    }
}
