//! Flat-vector evaluation of the penalized objective and its gradient.
//!
//! The state holds `(x, y, s)` for every word, cloud by cloud. Word sets
//! never change during optimization, so the shared/unshared index lists of
//! every cloud pair and the document distances are computed once.
//!
//! The overlap term measures root boxes at frozen sizes: box dimensions are
//! constants of one fixed-λ subproblem and are refreshed from the current
//! sizes between subproblems with [`Problem::freeze`]. Reductions run in a
//! fixed order: results do not depend on the number of threads.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{ObjectiveParams, Terms};
use crate::geometry::oriented_unit_extent;
use crate::layout::Storm;

#[derive(Debug, Clone)]
struct Pair {
    i: usize,
    j: usize,
    du: f64,
    /// Local word indices `(in i, in j)` of the words both clouds contain.
    shared: Vec<(usize, usize)>,
    only_i: Vec<usize>,
    only_j: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Problem {
    offsets: Vec<usize>,
    /// Root-box width and height per point of font size.
    unit: Vec<(f64, f64)>,
    /// Sizes at which root boxes are measured by the overlap term.
    frozen: Vec<f64>,
    targets: Vec<f64>,
    pairs: Vec<Pair>,
    pairs_of: Vec<Vec<usize>>,
    kappa: f64,
    mu: f64,
    correspondence_weight: f64,
    margin: f64,
    params: ObjectiveParams,
}

impl Problem {
    pub fn new(storm: &Storm, params: &ObjectiveParams) -> Problem {
        let mut offsets = vec![0];
        let mut unit = Vec::new();
        let mut targets = Vec::new();
        let mut frozen = Vec::new();
        for cloud in &storm.clouds {
            for w in &cloud.words {
                unit.push(oriented_unit_extent(&w.text, storm.orientation(&w.text)));
                targets.push(w.target);
                frozen.push(w.size);
            }
            offsets.push(offsets.last().unwrap() + cloud.words.len());
        }
        let n = storm.clouds.len();
        let index: Vec<HashMap<&str, usize>> = storm
            .clouds
            .iter()
            .map(|c| c.words.iter().enumerate().map(|(k, w)| (w.text.as_str(), k)).collect())
            .collect();
        let pair_list: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let pairs: Vec<Pair> = pair_list
            .par_iter()
            .map(|&(i, j)| {
                let (ci, cj) = (&storm.clouds[i], &storm.clouds[j]);
                let mut shared = Vec::new();
                let mut only_i = Vec::new();
                let mut du2 = 0.0;
                for (a, w) in ci.words.iter().enumerate() {
                    match index[j].get(w.text.as_str()) {
                        Some(&b) => {
                            shared.push((a, b));
                            du2 += (w.target - cj.words[b].target).powi(2);
                        }
                        None => {
                            only_i.push(a);
                            du2 += w.target * w.target;
                        }
                    }
                }
                let only_j: Vec<usize> = cj
                    .words
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| !index[i].contains_key(w.text.as_str()))
                    .map(|(b, _)| b)
                    .collect();
                du2 += only_j.iter().map(|&b| cj.words[b].target.powi(2)).sum::<f64>();
                Pair {
                    i,
                    j,
                    du: du2,
                    shared,
                    only_i,
                    only_j,
                }
            })
            .collect();
        let mut pairs_of = vec![Vec::new(); n];
        for (p, pair) in pairs.iter().enumerate() {
            pairs_of[pair.i].push(p);
            pairs_of[pair.j].push(p);
        }
        Problem {
            offsets,
            unit,
            frozen,
            targets,
            pairs,
            pairs_of,
            kappa: params.kappa,
            mu: params.mu,
            correspondence_weight: params.correspondence_weight,
            margin: params.overlap_margin,
            params: *params,
        }
    }

    /// Re-measures the overlap boxes at the sizes of `state`.
    pub fn freeze(&mut self, state: &[f64]) {
        for (f, xs) in self.frozen.iter_mut().zip(state.chunks_exact(3)) {
            *f = xs[2];
        }
    }

    pub fn dimension(&self) -> usize {
        3 * self.targets.len()
    }

    pub fn cloud_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn cloud<'a>(&self, state: &'a [f64], i: usize) -> &'a [f64] {
        &state[3 * self.offsets[i]..3 * self.offsets[i + 1]]
    }

    fn cloud_distance(&self, pair: &Pair, state: &[f64]) -> f64 {
        let (a, b) = (self.cloud(state, pair.i), self.cloud(state, pair.j));
        let mut sizes = 0.0;
        let mut positions = 0.0;
        for &(p, q) in &pair.shared {
            let (pa, pb) = (&a[3 * p..3 * p + 3], &b[3 * q..3 * q + 3]);
            sizes += (pa[2] - pb[2]).powi(2);
            positions += (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2);
        }
        for &p in &pair.only_i {
            sizes += a[3 * p + 2].powi(2);
        }
        for &q in &pair.only_j {
            sizes += b[3 * q + 2].powi(2);
        }
        sizes + self.kappa * positions
    }

    fn residuals(&self, state: &[f64]) -> Vec<f64> {
        self.pairs
            .par_iter()
            .map(|p| p.du - self.cloud_distance(p, state))
            .collect()
    }

    /// Overlap of words `a` and `b` (global indices) with margin: the
    /// separation depth and the active axis (0 = x, 1 = y), if overlapping.
    fn overlap(&self, state: &[f64], a: usize, b: usize) -> Option<(f64, usize)> {
        let (xa, xb) = (&state[3 * a..3 * a + 3], &state[3 * b..3 * b + 3]);
        let (sa, sb) = (self.frozen[a], self.frozen[b]);
        let px = 0.5 * (sa * self.unit[a].0 + sb * self.unit[b].0) + self.margin
            - (xa[0] - xb[0]).abs();
        if px <= 0.0 {
            return None;
        }
        let py = 0.5 * (sa * self.unit[a].1 + sb * self.unit[b].1) + self.margin
            - (xa[1] - xb[1]).abs();
        if py <= 0.0 {
            return None;
        }
        // ties resolve to the x axis
        Some(if px <= py { (px, 0) } else { (py, 1) })
    }

    fn cloud_overlap(&self, state: &[f64], i: usize) -> f64 {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        let mut total = 0.0;
        for a in lo..hi {
            for b in a + 1..hi {
                if let Some((o, _)) = self.overlap(state, a, b) {
                    total += o * o;
                }
            }
        }
        total
    }

    pub fn evaluate(&self, state: &[f64], lambda: f64) -> Terms {
        self.evaluate_with(state, &self.residuals(state), lambda)
    }

    fn evaluate_with(&self, state: &[f64], residuals: &[f64], lambda: f64) -> Terms {
        debug_assert_eq!(state.len(), self.dimension());
        let stress = residuals.iter().map(|r| r * r).sum();
        let overlap = (0..self.cloud_count())
            .into_par_iter()
            .map(|i| self.cloud_overlap(state, i))
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let mut correspondence = 0.0;
        let mut compactness = 0.0;
        for (k, xs) in state.chunks_exact(3).enumerate() {
            correspondence += (self.targets[k] - xs[2]).powi(2);
            compactness += xs[0] * xs[0] + xs[1] * xs[1];
        }
        Terms {
            stress,
            correspondence,
            overlap,
            compactness,
            total: 0.0,
        }
        .combine(&self.params, lambda)
    }

    pub fn objective(&self, state: &[f64], lambda: f64) -> f64 {
        self.evaluate(state, lambda).total
    }

    pub fn gradient(&self, state: &[f64], lambda: f64) -> Vec<f64> {
        self.derivatives(state, lambda).0
    }

    /// Positive per-coordinate curvature estimate: the Gauss-Newton diagonal
    /// of every squared term plus the magnitude of the stress residual's own
    /// second derivative. Used to scale descent steps.
    pub fn curvature(&self, state: &[f64], lambda: f64) -> Vec<f64> {
        self.derivatives(state, lambda).1
    }

    /// Gradient and curvature estimate from a single pass.
    pub fn derivatives(&self, state: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
        self.derivatives_with(state, &self.residuals(state), lambda)
    }

    /// Objective terms, gradient and curvature estimate at one state.
    pub fn linearize(&self, state: &[f64], lambda: f64) -> (Terms, Vec<f64>, Vec<f64>) {
        let residuals = self.residuals(state);
        let (g, h) = self.derivatives_with(state, &residuals, lambda);
        (self.evaluate_with(state, &residuals, lambda), g, h)
    }

    fn derivatives_with(&self, state: &[f64], residuals: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let per_cloud: Vec<(Vec<f64>, Vec<f64>)> = (0..self.cloud_count())
            .into_par_iter()
            .map(|i| self.cloud_derivatives(state, residuals, lambda, i))
            .collect();
        let mut g = Vec::with_capacity(state.len());
        let mut h = Vec::with_capacity(state.len());
        for (cg, ch) in per_cloud {
            g.extend(cg);
            h.extend(ch);
        }
        (g, h)
    }

    fn cloud_derivatives(
        &self,
        state: &[f64],
        residuals: &[f64],
        lambda: f64,
        i: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let own = self.cloud(state, i);
        let mut g = vec![0.0; own.len()];
        let mut h = vec![0.0; own.len()];

        for &p in &self.pairs_of[i] {
            let pair = &self.pairs[p];
            let first = pair.i == i;
            let other = self.cloud(state, if first { pair.j } else { pair.i });
            // d(r²)/dθ = -2 r dd_v/dθ
            let coef = -2.0 * residuals[p];
            let r = residuals[p].abs();
            for &(a, b) in &pair.shared {
                let (m, o) = if first { (a, b) } else { (b, a) };
                let (pm, po) = (&own[3 * m..3 * m + 3], &other[3 * o..3 * o + 3]);
                let jx = 2.0 * self.kappa * (pm[0] - po[0]);
                let jy = 2.0 * self.kappa * (pm[1] - po[1]);
                let js = 2.0 * (pm[2] - po[2]);
                g[3 * m] += coef * jx;
                g[3 * m + 1] += coef * jy;
                g[3 * m + 2] += coef * js;
                h[3 * m] += 2.0 * jx * jx + 4.0 * self.kappa * r;
                h[3 * m + 1] += 2.0 * jy * jy + 4.0 * self.kappa * r;
                h[3 * m + 2] += 2.0 * js * js + 4.0 * r;
            }
            let solo = if first { &pair.only_i } else { &pair.only_j };
            for &m in solo {
                let js = 2.0 * own[3 * m + 2];
                g[3 * m + 2] += coef * js;
                h[3 * m + 2] += 2.0 * js * js + 4.0 * r;
            }
        }

        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        for a in lo..hi {
            for b in a + 1..hi {
                let Some((o, axis)) = self.overlap(state, a, b) else {
                    continue;
                };
                let coef = lambda * 2.0 * o;
                let (la, lb) = (a - lo, b - lo);
                let d = state[3 * a + axis] - state[3 * b + axis];
                // |d| has subgradient ±1; at d = 0 push a toward -axis
                let sign = if d > 0.0 { 1.0 } else { -1.0 };
                g[3 * la + axis] -= coef * sign;
                g[3 * lb + axis] += coef * sign;
                h[3 * la + axis] += 2.0 * lambda;
                h[3 * lb + axis] += 2.0 * lambda;
            }
        }

        for m in 0..hi - lo {
            let xs = &own[3 * m..3 * m + 3];
            g[3 * m] += 2.0 * self.mu * xs[0];
            g[3 * m + 1] += 2.0 * self.mu * xs[1];
            g[3 * m + 2] -= 2.0 * self.correspondence_weight * (self.targets[lo + m] - xs[2]);
            h[3 * m] += 2.0 * self.mu;
            h[3 * m + 1] += 2.0 * self.mu;
            h[3 * m + 2] += 2.0 * self.correspondence_weight;
        }
        for v in &mut h {
            *v = v.max(1e-9);
        }
        (g, h)
    }

    /// Number of root-box pairs that overlap without the margin.
    pub fn exact_overlaps(&self, state: &[f64]) -> usize {
        let mut n = 0;
        for i in 0..self.cloud_count() {
            let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
            for a in lo..hi {
                for b in a + 1..hi {
                    let (xa, xb) = (&state[3 * a..3 * a + 3], &state[3 * b..3 * b + 3]);
                    let px = 0.5 * (xa[2] * self.unit[a].0 + xb[2] * self.unit[b].0)
                        - (xa[0] - xb[0]).abs();
                    let py = 0.5 * (xa[2] * self.unit[a].1 + xb[2] * self.unit[b].1)
                        - (xa[1] - xb[1]).abs();
                    n += usize::from(px > 0.0 && py > 0.0);
                }
            }
        }
        n
    }

    /// Clamps every size coordinate into `[size_min, size_max]`.
    pub fn project(&self, state: &mut [f64]) {
        for xs in state.chunks_exact_mut(3) {
            xs[2] = xs[2].clamp(self.params.size_min, self.params.size_max);
        }
    }
}
