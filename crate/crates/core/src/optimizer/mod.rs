//! Gradient-based coordination of a storm.
//!
//! The objective is the stress between document distances and cloud
//! distances, plus a per-cloud correspondence term tying displayed sizes to
//! their targets, plus penalties for overlapping words and for distance from
//! the cloud center:
//!
//! ```text
//! g = Σ_{i<j} (d_u(i,j)² − d_v(i,j))² + w_c Σ_i c(i) + λ Σ_i Σ_{w<w'} O²(i;w,w') + μ Σ_i Σ_w ‖p_iw‖²
//! ```
//!
//! Document vectors enter through each word's target size. `d_v` is a sum of
//! squares, so it is compared with the squared document distance; at target
//! sizes the size part of `d_v` equals `d_u²` exactly and the residual is the
//! positional disagreement of shared words.
//!
//! The functions in this module evaluate each term directly from a
//! [`Storm`]; [`problem::Problem`] evaluates the same objective and its
//! gradient over a flat state vector and is what [`minimize`] uses.

mod descent;
pub mod problem;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::layout::{Cloud, Storm};
use crate::style::{DEFAULT_SIZE_MAX, DEFAULT_SIZE_MIN};

pub use descent::{minimize, resume, MinimizeReport, TraceRow};
pub use problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    /// Weight of shared-word position differences in the cloud distance.
    pub kappa: f64,
    /// Overlap penalty weight; the starting value of the schedule.
    pub lambda: f64,
    /// Compactness penalty weight.
    pub mu: f64,
    pub lambda_growth: f64,
    /// The schedule gives up once λ would exceed `lambda * lambda_max_factor`.
    pub lambda_max_factor: f64,
    pub correspondence_weight: f64,
    /// Root boxes are inflated by this many pixels inside the overlap
    /// penalty, so the penalty's residual penetration never reaches the
    /// true boxes.
    pub overlap_margin: f64,
    pub max_inner_iterations: usize,
    /// Inner runs stop once the projected gradient norm falls below this
    /// fraction of its value at the start of the run.
    pub inner_tol: f64,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    pub size_min: f64,
    pub size_max: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        ObjectiveParams {
            kappa: 0.1,
            lambda: 64.0,
            mu: 1.0,
            lambda_growth: 2.0,
            lambda_max_factor: (1u64 << 20) as f64,
            correspondence_weight: 1e6,
            overlap_margin: 0.25,
            max_inner_iterations: 500,
            inner_tol: 1e-4,
            armijo: 1e-4,
            size_min: DEFAULT_SIZE_MIN,
            size_max: DEFAULT_SIZE_MAX,
        }
    }
}

impl ObjectiveParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.kappa >= 0.0) {
            return bad("kappa must be non-negative");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.mu >= 0.0) {
            return bad("mu must be non-negative");
        }
        if !(self.lambda_growth > 1.0) {
            return bad("lambda_growth must exceed 1");
        }
        if !(self.lambda_max_factor >= 1.0) {
            return bad("lambda_max_factor must be at least 1");
        }
        if !(self.correspondence_weight >= 0.0) {
            return bad("correspondence_weight must be non-negative");
        }
        if !(self.overlap_margin >= 0.0) {
            return bad("overlap_margin must be non-negative");
        }
        if self.max_inner_iterations == 0 {
            return bad("max_inner_iterations must be positive");
        }
        if !(self.size_min > 0.0 && self.size_min < self.size_max) {
            return bad("size bounds must satisfy 0 < size_min < size_max");
        }
        Ok(())
    }
}

/// The four terms of the penalized objective, unweighted except `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Terms {
    pub stress: f64,
    pub correspondence: f64,
    pub overlap: f64,
    pub compactness: f64,
    pub total: f64,
}

impl Terms {
    pub fn combine(self, params: &ObjectiveParams, lambda: f64) -> Terms {
        Terms {
            total: self.stress
                + params.correspondence_weight * self.correspondence
                + lambda * self.overlap
                + params.mu * self.compactness,
            ..self
        }
    }
}

/// Euclidean distance between two sparse vectors; absent entries are zero.
pub fn doc_distance(u: &BTreeMap<String, f64>, v: &BTreeMap<String, f64>) -> f64 {
    let mut sum = 0.0;
    for (w, a) in u {
        let b = v.get(w).copied().unwrap_or(0.0);
        sum += (a - b) * (a - b);
    }
    for (w, b) in v {
        if !u.contains_key(w) {
            sum += b * b;
        }
    }
    sum.sqrt()
}

/// Target sizes of the displayed words: the document vector in size units.
pub fn target_vector(cloud: &Cloud) -> BTreeMap<String, f64> {
    cloud
        .words
        .iter()
        .map(|w| (w.text.clone(), w.target))
        .collect()
}

/// Squared size differences over the union of both word sets (absent words
/// have size zero) plus `kappa` times squared position differences over the
/// shared words.
pub fn cloud_distance(a: &Cloud, b: &Cloud, kappa: f64) -> f64 {
    let mut sizes = 0.0;
    let mut positions = 0.0;
    for wa in &a.words {
        match b.word(&wa.text) {
            Some(wb) => {
                sizes += (wa.size - wb.size).powi(2);
                positions += (wa.pos.x - wb.pos.x).powi(2) + (wa.pos.y - wb.pos.y).powi(2);
            }
            None => sizes += wa.size * wa.size,
        }
    }
    for wb in &b.words {
        if a.word(&wb.text).is_none() {
            sizes += wb.size * wb.size;
        }
    }
    sizes + kappa * positions
}

pub fn correspondence(cloud: &Cloud) -> f64 {
    cloud.words.iter().map(|w| (w.target - w.size).powi(2)).sum()
}

/// Σ_{i<j} (d_u² − d_v)².
pub fn stress(storm: &Storm, kappa: f64) -> f64 {
    let targets: Vec<_> = storm.clouds.iter().map(target_vector).collect();
    let mut total = 0.0;
    for i in 0..storm.clouds.len() {
        for j in i + 1..storm.clouds.len() {
            let du = doc_distance(&targets[i], &targets[j]).powi(2);
            let dv = cloud_distance(&storm.clouds[i], &storm.clouds[j], kappa);
            total += (du - dv).powi(2);
        }
    }
    total
}

/// Stress plus weighted correspondence.
pub fn dbs(storm: &Storm, params: &ObjectiveParams) -> f64 {
    stress(storm, params.kappa)
        + params.correspondence_weight * storm.clouds.iter().map(correspondence).sum::<f64>()
}

/// Σ over unordered word pairs within each cloud of the squared separation
/// distance between root boxes inflated by `margin / 2` on every side.
pub fn overlap_penalty(storm: &Storm, margin: f64) -> f64 {
    let mut total = 0.0;
    for cloud in &storm.clouds {
        let roots: Vec<Rect> = cloud
            .words
            .iter()
            .map(|w| storm.tree(w).root_at(w.pos))
            .collect();
        for a in 0..roots.len() {
            for b in a + 1..roots.len() {
                let (px, py) = roots[a].penetration(&roots[b]);
                let (px, py) = (px + margin, py + margin);
                if px > 0.0 && py > 0.0 {
                    total += px.min(py).powi(2);
                }
            }
        }
    }
    total
}

pub fn compactness_penalty(storm: &Storm) -> f64 {
    storm
        .clouds
        .iter()
        .flat_map(|c| c.words.iter())
        .map(|w| w.pos.norm_sq())
        .sum()
}

/// Every term evaluated directly from the storm at the given λ.
pub fn penalized_objective(storm: &Storm, params: &ObjectiveParams) -> Terms {
    Terms {
        stress: stress(storm, params.kappa),
        correspondence: storm.clouds.iter().map(correspondence).sum(),
        overlap: overlap_penalty(storm, params.overlap_margin),
        compactness: compactness_penalty(storm),
        total: 0.0,
    }
    .combine(params, params.lambda)
}

/// Flat vector of all `(x, y, s)` triples in cloud-then-word order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub values: Vec<f64>,
    pub objective: f64,
    pub gradient_norm: f64,
    pub lambda: f64,
}

pub fn state_vector(storm: &Storm) -> Vec<f64> {
    storm
        .clouds
        .iter()
        .flat_map(|c| c.words.iter())
        .flat_map(|w| [w.pos.x, w.pos.y, w.size])
        .collect()
}

/// Writes a state vector back into a copy of `storm`.
pub fn with_state(storm: &Storm, values: &[f64]) -> Storm {
    assert_eq!(values.len(), 3 * storm.word_count());
    let mut out = storm.clone();
    for (w, xs) in out
        .clouds
        .iter_mut()
        .flat_map(|c| c.words.iter_mut())
        .zip(values.chunks_exact(3))
    {
        w.pos = Point::new(xs[0], xs[1]);
        w.size = xs[2];
    }
    out
}

/// Analytic gradient of the penalized objective at the storm's state.
pub fn gradient(storm: &Storm, params: &ObjectiveParams) -> Vec<f64> {
    Problem::new(storm, params).gradient(&state_vector(storm), params.lambda)
}

pub fn evaluate_state(storm: &Storm, params: &ObjectiveParams) -> OptState {
    let problem = Problem::new(storm, params);
    let values = state_vector(storm);
    let g = problem.gradient(&values, params.lambda);
    OptState {
        objective: problem.evaluate(&values, params.lambda).total,
        gradient_norm: g.iter().map(|v| v * v).sum::<f64>().sqrt(),
        lambda: params.lambda,
        values,
    }
}
