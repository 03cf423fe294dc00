//! Run configuration covering every tunable of the pipeline.
//!
//! The on-disk form is a flat JSON object; missing keys take their defaults
//! and unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::corpus::{Grouping, WeightMode, DEFAULT_WORDS_PER_CLOUD};
use crate::error::{Error, Result};
use crate::eval::TrainParams;
use crate::geometry::SpiralParams;
use crate::layout::LayoutConfig;
use crate::optimizer::ObjectiveParams;
use crate::render::{DEFAULT_RASTER_HEIGHT, DEFAULT_RASTER_WIDTH};
use crate::style::{
    Rgb, StyleParams, DEFAULT_ALPHA_MIN, DEFAULT_PALETTE, DEFAULT_P_VERTICAL, DEFAULT_SIZE_MAX,
    DEFAULT_SIZE_MIN,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub words_per_cloud: usize,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub grouping: Grouping,
    pub size_min: f64,
    pub size_max: f64,
    pub palette: Vec<Rgb>,
    pub alpha_min: f64,
    pub p_vertical: f64,
    pub fill_ratio: f64,
    pub sigma_frac: f64,
    pub spiral_a: f64,
    pub spiral_b: f64,
    pub max_spiral_steps: usize,
    pub frame_growth: f64,
    pub max_restarts: usize,
    pub iterations: usize,
    pub convergence_spread: f64,
    pub kappa: f64,
    pub lambda0: f64,
    pub lambda_growth: f64,
    pub lambda_max_factor: f64,
    pub mu: f64,
    pub correspondence_weight: f64,
    pub overlap_margin: f64,
    pub max_inner_iterations: usize,
    pub inner_tol: f64,
    pub raster_width: u32,
    pub raster_height: u32,
    pub columns: usize,
    pub test_fraction: f64,
    pub l2: f64,
    pub max_train_iterations: usize,
    pub train_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let layout = LayoutConfig::default();
        let objective = ObjectiveParams::default();
        let train = TrainParams::default();
        RunConfig {
            words_per_cloud: DEFAULT_WORDS_PER_CLOUD,
            seed: 0,
            weight_mode: WeightMode::Tf,
            grouping: Grouping::PerDocument,
            size_min: DEFAULT_SIZE_MIN,
            size_max: DEFAULT_SIZE_MAX,
            palette: DEFAULT_PALETTE.to_vec(),
            alpha_min: DEFAULT_ALPHA_MIN,
            p_vertical: DEFAULT_P_VERTICAL,
            fill_ratio: layout.fill_ratio,
            sigma_frac: layout.sigma_frac,
            spiral_a: layout.spiral.a,
            spiral_b: layout.spiral.b,
            max_spiral_steps: layout.max_spiral_steps,
            frame_growth: layout.frame_growth,
            max_restarts: layout.max_restarts,
            iterations: layout.iterations,
            convergence_spread: layout.convergence_spread,
            kappa: objective.kappa,
            lambda0: objective.lambda,
            lambda_growth: objective.lambda_growth,
            lambda_max_factor: objective.lambda_max_factor,
            mu: objective.mu,
            correspondence_weight: objective.correspondence_weight,
            overlap_margin: objective.overlap_margin,
            max_inner_iterations: objective.max_inner_iterations,
            inner_tol: objective.inner_tol,
            raster_width: DEFAULT_RASTER_WIDTH,
            raster_height: DEFAULT_RASTER_HEIGHT,
            columns: 3,
            test_fraction: train.test_fraction,
            l2: train.l2,
            max_train_iterations: train.max_iterations,
            train_tol: train.tol,
        }
    }
}

const DESCRIPTIONS: &[(&str, &str)] = &[
    ("words_per_cloud", "words kept per cloud"),
    ("seed", "root seed for every random stream"),
    ("weight_mode", "word weighting: tf | tf-idf"),
    ("grouping", "one cloud per: per-document | by-group"),
    ("size_min", "smallest font size (px)"),
    ("size_max", "largest font size (px)"),
    ("palette", "word colors, #rrggbb"),
    ("alpha_min", "opacity of a word present in every document"),
    ("p_vertical", "probability a word is drawn vertically"),
    ("fill_ratio", "word area / initial frame area"),
    ("sigma_frac", "std dev of initial positions, fraction of frame"),
    ("spiral_a", "spiral radius growth per radian (px)"),
    ("spiral_b", "spiral angle increment (rad)"),
    ("max_spiral_steps", "spiral steps before the frame is enlarged"),
    ("frame_growth", "frame scale factor on restart"),
    ("max_restarts", "frame enlargements before giving up"),
    ("iterations", "iterative coordination rounds"),
    ("convergence_spread", "iterative early stop below this spread (px)"),
    ("kappa", "weight of shared-word positions in cloud distance"),
    ("lambda0", "initial overlap penalty weight"),
    ("lambda_growth", "overlap weight multiplier per stage"),
    ("lambda_max_factor", "largest overlap weight as a multiple of lambda0"),
    ("mu", "compactness weight"),
    ("correspondence_weight", "weight of size-to-target fidelity"),
    ("overlap_margin", "extra separation required by the penalty (px)"),
    ("max_inner_iterations", "descent iterations per penalty stage"),
    ("inner_tol", "relative projected-gradient stopping tolerance"),
    ("raster_width", "raster width (px)"),
    ("raster_height", "raster height (px)"),
    ("columns", "grid image columns"),
    ("test_fraction", "held-out share of each class"),
    ("l2", "classifier L2 strength"),
    ("max_train_iterations", "classifier gradient descent iteration cap"),
    ("train_tol", "classifier gradient norm stopping tolerance"),
];

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::json("config", e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.size_min > 0.0 && self.size_min < self.size_max) {
            return bad("size_min must be positive and below size_max");
        }
        if self.palette.is_empty() {
            return bad("palette must not be empty");
        }
        if !(0.0..=1.0).contains(&self.alpha_min) {
            return bad("alpha_min must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.p_vertical) {
            return bad("p_vertical must lie in [0, 1]");
        }
        if self.raster_width == 0 || self.raster_height == 0 {
            return bad("raster dimensions must be positive");
        }
        if self.columns == 0 {
            return bad("columns must be at least 1");
        }
        self.layout().validate()?;
        self.objective().validate()?;
        self.train().validate()
    }

    pub fn layout(&self) -> LayoutConfig {
        LayoutConfig {
            words_per_cloud: self.words_per_cloud,
            seed: self.seed,
            max_spiral_steps: self.max_spiral_steps,
            frame_growth: self.frame_growth,
            max_restarts: self.max_restarts,
            iterations: self.iterations,
            sigma_frac: self.sigma_frac,
            fill_ratio: self.fill_ratio,
            spiral: SpiralParams {
                a: self.spiral_a,
                b: self.spiral_b,
            },
            convergence_spread: self.convergence_spread,
        }
    }

    pub fn objective(&self) -> ObjectiveParams {
        ObjectiveParams {
            kappa: self.kappa,
            lambda: self.lambda0,
            mu: self.mu,
            lambda_growth: self.lambda_growth,
            lambda_max_factor: self.lambda_max_factor,
            correspondence_weight: self.correspondence_weight,
            overlap_margin: self.overlap_margin,
            max_inner_iterations: self.max_inner_iterations,
            inner_tol: self.inner_tol,
            size_min: self.size_min,
            size_max: self.size_max,
            ..ObjectiveParams::default()
        }
    }

    pub fn style(&self) -> StyleParams {
        StyleParams {
            palette: self.palette.clone(),
            p_vertical: self.p_vertical,
            alpha_min: self.alpha_min,
            seed: self.seed,
        }
    }

    pub fn train(&self) -> TrainParams {
        TrainParams {
            test_fraction: self.test_fraction,
            l2: self.l2,
            max_iterations: self.max_train_iterations,
            tol: self.train_tol,
        }
    }

    pub fn raster_dims(&self) -> (u32, u32) {
        (self.raster_width, self.raster_height)
    }

    /// `(key, default, description)` for every key, in file order.
    pub fn describe() -> Vec<(&'static str, String, &'static str)> {
        let defaults = serde_json::to_value(RunConfig::default()).expect("config serializes");
        DESCRIPTIONS
            .iter()
            .map(|&(key, what)| {
                let value = match &defaults[key] {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Array(items) => items
                        .iter()
                        .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string))
                        .collect::<Vec<_>>()
                        .join(","),
                    v => v.to_string(),
                };
                (key, value, what)
            })
            .collect()
    }
}
