//! Automatic evaluation: classify documents from the pixels of their clouds.
//!
//! Every cloud of a storm is rasterized into a common viewport, the pixel
//! values become a feature vector, features without information gain on the
//! training rows are dropped and an L2-regularized multinomial logistic
//! regression is trained and scored on a held-out split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{build_vector, group_corpus, Document, StopList};
use crate::error::{Error, Result};
use crate::pipeline::{build_storm, prepare, Method};
use crate::render::{rasterize_storm, storm_compactness, Raster};
use crate::rng;

/// Number of equal-width bins on `[0, 1]` used to discretize features for
/// information gain.
pub const IG_BINS: usize = 8;

const IG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub test_fraction: f64,
    pub l2: f64,
    pub max_iterations: usize,
    pub tol: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            test_fraction: 0.2,
            l2: 1.0,
            max_iterations: 5000,
            tol: 1e-6,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must lie in (0, 1)");
        }
        if !(self.l2 >= 0.0) {
            return bad("l2 must be non-negative");
        }
        if !(self.tol > 0.0) {
            return bad("train_tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub doc_id: String,
    pub label: String,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub rows: Vec<FeatureRow>,
    pub split: Vec<Split>,
}

impl LabeledFeatures {
    fn part(&self, which: Split) -> impl Iterator<Item = &FeatureRow> {
        self.rows
            .iter()
            .zip(&self.split)
            .filter(move |(_, s)| **s == which)
            .map(|(r, _)| r)
    }
}

/// Flattens rasters row-major with interleaved channels, scaled to `[0, 1]`.
pub fn extract_features(rasters: &[Raster]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = rasters.first() {
        let expected = (first.width, first.height);
        for r in rasters {
            if (r.width, r.height) != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: (r.width, r.height),
                });
            }
        }
    }
    Ok(rasters
        .par_iter()
        .map(|r| r.pixels.iter().map(|&v| f64::from(v) / 255.0).collect())
        .collect())
}

/// Stratified assignment: within each label (in input order) a keyed shuffle
/// picks `round(test_fraction · n)` members for the test split.
pub fn stratified_split(labels: &[String], test_fraction: f64, seed: u64) -> Vec<Split> {
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l.as_str()).or_default().push(i);
    }
    let mut split = vec![Split::Train; labels.len()];
    for (label, mut members) in by_label {
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        members.shuffle(&mut rng::stream(seed, &["split", label]));
        for &i in &members[..n_test] {
            split[i] = Split::Test;
        }
    }
    split
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

fn bin(v: f64) -> usize {
    ((v * IG_BINS as f64) as usize).min(IG_BINS - 1)
}

/// Information gain (bits) of one feature column about the class labels,
/// with values discretized into [`IG_BINS`] equal-width bins on `[0, 1]`.
pub fn information_gain(values: &[f64], labels: &[usize], n_classes: usize) -> f64 {
    let mut joint = vec![0usize; IG_BINS * n_classes];
    let mut class = vec![0usize; n_classes];
    for (&v, &y) in values.iter().zip(labels) {
        joint[bin(v) * n_classes + y] += 1;
        class[y] += 1;
    }
    let n = values.len() as f64;
    let conditional: f64 = joint
        .chunks_exact(n_classes)
        .map(|row| row.iter().sum::<usize>() as f64 / n * entropy(row))
        .sum();
    entropy(&class) - conditional
}

/// Indices of the features whose information gain over `rows` is positive.
pub fn information_gain_filter(rows: &[&[f64]], labels: &[usize], n_classes: usize) -> Vec<usize> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    (0..first.len())
        .into_par_iter()
        .filter(|&j| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            information_gain(&column, labels, n_classes) > IG_EPS
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Multinomial logistic regression with an L2 penalty on the weights.
///
/// The weights always lie in the span of the training rows when descent
/// starts from zero, so they are stored as `W = Aᵀ X` and every step works on
/// the `n × n` Gram matrix. The iterates are those of full-batch gradient
/// descent on `W` and the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    rows: Vec<Vec<f64>>,
    /// `n × k`, row-major.
    coef: Vec<f64>,
    bias: Vec<f64>,
    classes: usize,
    pub iterations: usize,
    pub gradient_norm: f64,
}

struct Fit<'a> {
    gram: &'a [f64],
    labels: &'a [usize],
    n: usize,
    k: usize,
    l2: f64,
}

impl Fit<'_> {
    /// Loss, the residual `M = P − Y + l2·A`, and the bias gradient.
    fn evaluate(&self, coef: &[f64], bias: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (n, k) = (self.n, self.k);
        let mut ga = vec![0.0; n * k];
        for i in 0..n {
            for j in 0..n {
                let g = self.gram[i * n + j];
                for c in 0..k {
                    ga[i * k + c] += g * coef[j * k + c];
                }
            }
        }
        let mut loss = 0.0;
        let mut resid = vec![0.0; n * k];
        let mut grad_b = vec![0.0; k];
        for i in 0..n {
            let scores: Vec<f64> = (0..k).map(|c| ga[i * k + c] + bias[c]).collect();
            let top = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
            let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
            loss += top + z.ln() - scores[self.labels[i]];
            for c in 0..k {
                let p = (scores[c] - top).exp() / z;
                let r = p - f64::from(u8::from(c == self.labels[i]));
                grad_b[c] += r;
                resid[i * k + c] = r + self.l2 * coef[i * k + c];
            }
            // ½·l2·‖W‖² = ½·l2·Σ_c a_cᵀ G a_c
            for c in 0..k {
                loss += 0.5 * self.l2 * coef[i * k + c] * ga[i * k + c];
            }
        }
        (loss, resid, grad_b)
    }

    /// ‖∇_W‖² + ‖∇_b‖² with ∇_W = Mᵀ X.
    fn grad_norm_sq(&self, resid: &[f64], grad_b: &[f64]) -> f64 {
        let (n, k) = (self.n, self.k);
        let mut total = dot(grad_b, grad_b);
        for i in 0..n {
            for j in 0..n {
                let g = self.gram[i * n + j];
                for c in 0..k {
                    total += resid[i * k + c] * g * resid[j * k + c];
                }
            }
        }
        total
    }
}

impl LogisticRegression {
    pub fn train(
        rows: &[&[f64]],
        labels: &[usize],
        classes: usize,
        params: &TrainParams,
    ) -> Result<LogisticRegression> {
        if rows.is_empty() {
            return Err(Error::DegenerateTraining("no training rows".into()));
        }
        let present: BTreeSet<usize> = labels.iter().copied().collect();
        if present.len() != classes || classes < 2 {
            return Err(Error::DegenerateTraining(format!(
                "training split holds {} of {} classes",
                present.len(),
                classes
            )));
        }
        let (n, k) = (rows.len(), classes);
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = dot(rows[i], rows[j]);
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        let fit = Fit {
            gram: &gram,
            labels,
            n,
            k,
            l2: params.l2,
        };
        let trace: f64 = (0..n).map(|i| gram[i * n + i]).sum();
        // softmax curvature is at most ½ per sample
        let mut step = 1.0 / (0.5 * (trace + n as f64) + params.l2);
        let mut coef = vec![0.0; n * k];
        let mut bias = vec![0.0; k];
        let (mut loss, mut resid, mut grad_b) = fit.evaluate(&coef, &bias);
        let mut gn2 = fit.grad_norm_sq(&resid, &grad_b);
        let mut iterations = 0;
        while iterations < params.max_iterations && gn2.sqrt() >= params.tol {
            let mut accepted = false;
            while step > 1e-300 {
                let c2: Vec<f64> = coef.iter().zip(&resid).map(|(a, m)| a - step * m).collect();
                let b2: Vec<f64> = bias.iter().zip(&grad_b).map(|(b, g)| b - step * g).collect();
                let (l2_, r2, g2) = fit.evaluate(&c2, &b2);
                if l2_ <= loss - 0.5 * step * gn2 {
                    coef = c2;
                    bias = b2;
                    loss = l2_;
                    resid = r2;
                    grad_b = g2;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            iterations += 1;
            gn2 = fit.grad_norm_sq(&resid, &grad_b);
            step *= 2.0;
        }
        Ok(LogisticRegression {
            rows: rows.iter().map(|r| r.to_vec()).collect(),
            coef,
            bias,
            classes: k,
            iterations,
            gradient_norm: gn2.sqrt(),
        })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.bias.clone();
        for (i, row) in self.rows.iter().enumerate() {
            let g = dot(x, row);
            for (c, v) in s.iter_mut().enumerate() {
                *v += g * self.coef[i * self.classes + c];
            }
        }
        s
    }

    /// Highest-scoring class; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let s = self.scores(x);
        (0..self.classes).fold(0, |best, c| if s[c] > s[best] { c } else { best })
    }
}

/// Percentage of positions where `predicted` equals `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    100.0 * correct as f64 / truth.len() as f64
}

/// Largest class share of `labels`, as a percentage.
pub fn majority_share(labels: &[usize]) -> f64 {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    if labels.is_empty() {
        0.0
    } else {
        100.0 * top as f64 / labels.len() as f64
    }
}

/// Test accuracy of the classifier trained on the training rows of `data`
/// after information-gain filtering. Returns the accuracy and the number of
/// features kept.
pub fn classify(
    data: &LabeledFeatures,
    classes: &[String],
    params: &TrainParams,
    filter: bool,
) -> Result<(f64, usize)> {
    let index = |l: &str| classes.iter().position(|c| c == l).expect("known label");
    let train: Vec<&FeatureRow> = data.part(Split::Train).collect();
    let test: Vec<&FeatureRow> = data.part(Split::Test).collect();
    if test.is_empty() {
        return Err(Error::DegenerateTraining("test split is empty".into()));
    }
    let y_train: Vec<usize> = train.iter().map(|r| index(&r.label)).collect();
    let y_test: Vec<usize> = test.iter().map(|r| index(&r.label)).collect();
    let keep: Option<Vec<usize>> = filter.then(|| {
        let rows: Vec<&[f64]> = train.iter().map(|r| r.features.as_slice()).collect();
        information_gain_filter(&rows, &y_train, classes.len())
    });
    let project = |r: &FeatureRow| -> Vec<f64> {
        match &keep {
            Some(idx) => idx.iter().map(|&j| r.features[j]).collect(),
            None => r.features.clone(),
        }
    };
    let x_train: Vec<Vec<f64>> = train.iter().map(|r| project(r)).collect();
    let x_test: Vec<Vec<f64>> = test.iter().map(|r| project(r)).collect();
    let rows: Vec<&[f64]> = x_train.iter().map(Vec::as_slice).collect();
    let model = LogisticRegression::train(&rows, &y_train, classes.len(), params)?;
    let predicted: Vec<usize> = x_test.iter().map(|x| model.predict(x)).collect();
    let kept = x_train.first().map_or(0, Vec::len);
    Ok((accuracy(&predicted, &y_test), kept))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub name: String,
    pub seconds: Option<f64>,
    pub compactness: Option<f64>,
    pub accuracy: f64,
    pub features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub train_size: usize,
    pub test_size: usize,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |v| format!("{v:.digits$}"))
}

impl EvalReport {
    pub fn row(&self, name: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Machine-readable form. Wall time is left out so the file depends only
    /// on the corpus, configuration and seed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,compactness,accuracy,features\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.4},{}",
                r.name,
                opt(r.compactness, 4),
                r.accuracy,
                r.features
            );
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("method,seconds\n");
        for r in &self.rows {
            if let Some(s) = r.seconds {
                let _ = writeln!(out, "{},{s:.3}", r.name);
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = ["Method", "Time (s)", "Compactness (%)", "Accuracy (%)"];
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.name.clone(),
                    opt(r.seconds, 2),
                    opt(r.compactness, 2),
                    format!("{:.2}", r.accuracy),
                ]
            })
            .collect();
        let width: Vec<usize> = (0..4)
            .map(|c| cells.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let line = |cols: [&str; 4]| {
            let mut s = format!("{:<w$}", cols[0], w = width[0]);
            for c in 1..4 {
                let _ = write!(s, "  {:>w$}", cols[c], w = width[c]);
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(header);
        out.push_str(&"-".repeat(width.iter().sum::<usize>() + 6));
        out.push('\n');
        for r in &cells {
            out.push_str(&line([&r[0], &r[1], &r[2], &r[3]]));
        }
        let _ = writeln!(out, "\ntrain {} / test {} documents", self.train_size, self.test_size);
        out
    }
}

fn display_name(method: Method) -> String {
    let name = method.name();
    name[..1].to_uppercase() + &name[1..]
}

/// Builds one storm per method from a labeled corpus and scores a pixel
/// classifier on each, framed by the majority-class lower bound and a
/// bag-of-words upper bound on the same split.
pub fn run_evaluation(
    docs: &[Document],
    stoplist: &StopList,
    methods: &[Method],
    config: &RunConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let grouped = group_corpus(docs, config.grouping)?;
    let labels: Vec<String> = grouped
        .iter()
        .map(|d| d.label.clone().ok_or_else(|| Error::Unlabeled(d.id.clone())))
        .collect::<Result<_>>()?;
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "corpus has {} class(es); at least 2 are needed",
            classes.len()
        )));
    }
    let train = config.train();
    let split = stratified_split(&labels, train.test_fraction, config.seed);
    let test_labels: Vec<usize> = labels
        .iter()
        .zip(&split)
        .filter(|(_, s)| **s == Split::Test)
        .map(|(l, _)| classes.iter().position(|c| c == l).expect("known"))
        .collect();
    let train_size = split.iter().filter(|s| **s == Split::Train).count();
    let by_label = |features: Vec<Vec<f64>>| LabeledFeatures {
        rows: grouped
            .iter()
            .zip(&labels)
            .zip(features)
            .map(|((d, l), f)| FeatureRow {
                doc_id: d.id.clone(),
                label: l.clone(),
                features: f,
            })
            .collect(),
        split: split.clone(),
    };

    let mut rows = vec![EvalRow {
        name: "Lower Bound".into(),
        seconds: None,
        compactness: None,
        accuracy: majority_share(&test_labels),
        features: 0,
    }];

    let spec = prepare(docs, stoplist, config)?;
    for &method in methods {
        let outcome = build_storm(&spec, method, config)?;
        let dims = config.raster_dims();
        let compact = storm_compactness(&outcome.storm, dims);
        let mean = compact.iter().sum::<f64>() / compact.len().max(1) as f64;
        let features = extract_features(&rasterize_storm(&outcome.storm, dims))?;
        let (acc, kept) = classify(&by_label(features), &classes, &train, true)?;
        rows.push(EvalRow {
            name: display_name(method),
            seconds: Some(outcome.elapsed.as_secs_f64()),
            compactness: Some(mean),
            accuracy: acc,
            features: kept,
        });
    }

    let vectors = grouped
        .iter()
        .map(|d| build_vector(d, stoplist))
        .collect::<Result<Vec<_>>>()?;
    let vocab: BTreeSet<&String> = vectors.iter().flat_map(|v| v.counts.keys()).collect();
    let bow: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| vocab.iter().map(|w| v.counts.get(*w).copied().unwrap_or(0) as f64).collect())
        .collect();
    let (acc, kept) = classify(&by_label(bow), &classes, &train, false)?;
    rows.push(EvalRow {
        name: "Upper Bound".into(),
        seconds: None,
        compactness: None,
        accuracy: acc,
        features: kept,
    });

    Ok(EvalReport {
        rows,
        train_size,
        test_size: test_labels.len(),
    })
}
