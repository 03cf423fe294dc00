//! Greedy single-cloud placement along spiral paths.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::LayoutConfig;
use crate::error::{Error, Result};
use crate::geometry::{intersects, spiral_step, within_frame, Frame, GlyphBoxTree, Point};

/// Frame with 4:3 aspect whose area is the total root-box area divided by
/// `fill_ratio`.
pub fn estimate_frame(trees: &[GlyphBoxTree], fill_ratio: f64) -> Frame {
    assert!(!trees.is_empty(), "cannot size a frame for zero words");
    let area: f64 = trees.iter().map(|t| t.root.area()).sum::<f64>() / fill_ratio;
    Frame::new((area * 4.0 / 3.0).sqrt(), (area * 3.0 / 4.0).sqrt())
}

/// Gaussian draw around the frame center, resampled until inside the frame.
pub fn sample_position<R: Rng + ?Sized>(frame: &Frame, sigma_frac: f64, rng: &mut R) -> Point {
    let nx = Normal::new(0.0, sigma_frac * frame.width).expect("positive std");
    let ny = Normal::new(0.0, sigma_frac * frame.height).expect("positive std");
    let rect = frame.rect();
    loop {
        let p = Point::new(nx.sample(rng), ny.sample(rng));
        if rect.contains_point(p) {
            return p;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub positions: Vec<Point>,
    pub frame: Frame,
    pub restarts: usize,
}

/// Places `trees` one at a time in the given order.
///
/// Each word starts at its desired position (sampled when `desired` is
/// `None`) and walks outward along a spiral until it neither intersects an
/// already placed word nor leaves the frame. A word that exhausts
/// `max_spiral_steps` restarts the whole cloud in a frame enlarged by
/// `frame_growth`.
pub fn spiral_layout<R: Rng + ?Sized>(
    doc_id: &str,
    trees: &[GlyphBoxTree],
    frame: Frame,
    desired: Option<&[Point]>,
    rng: &mut R,
    config: &LayoutConfig,
) -> Result<Placement> {
    if let Some(d) = desired {
        assert_eq!(d.len(), trees.len(), "one desired position per word");
    }
    let mut frame = frame;
    for restart in 0..=config.max_restarts {
        if let Some(positions) = try_place(trees, &frame, desired, rng, config) {
            return Ok(Placement {
                positions,
                frame,
                restarts: restart,
            });
        }
        frame = frame.scaled(config.frame_growth);
    }
    Err(Error::LayoutDiverged {
        doc_id: doc_id.to_string(),
        restarts: config.max_restarts,
    })
}

fn try_place<R: Rng + ?Sized>(
    trees: &[GlyphBoxTree],
    frame: &Frame,
    desired: Option<&[Point]>,
    rng: &mut R,
    config: &LayoutConfig,
) -> Option<Vec<Point>> {
    let mut positions: Vec<Point> = Vec::with_capacity(trees.len());
    for (i, tree) in trees.iter().enumerate() {
        let start = match desired {
            Some(d) => d[i],
            None => sample_position(frame, config.sigma_frac, rng),
        };
        let valid = |p: Point| {
            within_frame(tree, p, frame)
                && !positions
                    .iter()
                    .zip(trees)
                    .any(|(&q, other)| intersects(tree, p, other, q))
        };
        let found = (0..=config.max_spiral_steps)
            .map(|k| spiral_step(start, k, config.spiral))
            .find(|&p| valid(p))?;
        positions.push(found);
    }
    Some(positions)
}
