use serde::Serialize;

use super::problem::Problem;
use super::{state_vector, with_state, ObjectiveParams};
use crate::error::{Error, Result};
use crate::geometry::Frame;
use crate::layout::Storm;

/// Padding around the words when the final frames are recomputed.
const FRAME_PAD: f64 = 4.0;

/// One accepted iterate (or the starting point) of an inner descent run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Index of the inner run, one per value of λ.
    pub stage: usize,
    pub lambda: f64,
    pub objective: f64,
    pub stress: f64,
    pub correspondence: f64,
    pub overlap: f64,
    pub compactness: f64,
    /// Norm of the gradient at the point the step was taken from.
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MinimizeReport {
    pub trace: Vec<TraceRow>,
    pub stages: usize,
    pub final_lambda: f64,
}

impl MinimizeReport {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from(
            "iteration,stage,lambda,objective,stress,correspondence,overlap,compactness,gradient_norm\n",
        );
        for r in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.iteration,
                r.stage,
                r.lambda,
                r.objective,
                r.stress,
                r.correspondence,
                r.overlap,
                r.compactness,
                r.gradient_norm
            ));
        }
        out
    }

    /// Rows of one inner run.
    pub fn stage(&self, stage: usize) -> impl Iterator<Item = &TraceRow> {
        self.trace.iter().filter(move |r| r.stage == stage)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Accepted steps over which the objective must fall by more than
/// `inner_tol` relative for an inner run to continue.
const STALL_WINDOW: usize = 50;

/// Largest move of one coordinate (px) in a single full step.
const MAX_MOVE: f64 = 2.0;

/// Scaled descent direction −D⁻¹g with every component capped at
/// [`MAX_MOVE`], so a free word cannot jump across its neighbours.
fn direction(g: &[f64], h: &[f64]) -> Vec<f64> {
    g.iter()
        .zip(h)
        .map(|(d, c)| (-d / c).clamp(-MAX_MOVE, MAX_MOVE))
        .collect()
}

/// ‖x − P(x + d)‖, zero exactly at a stationary point of the
/// box-constrained problem.
fn projected_step_norm(problem: &Problem, x: &[f64], d: &[f64]) -> f64 {
    let mut y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
    problem.project(&mut y);
    x.iter()
        .zip(&y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Projected, diagonally scaled gradient descent with backtracking at a
/// fixed λ, accelerated by momentum.
///
/// Each iteration extrapolates along the last move, takes a backtracking
/// step from there with the direction of [`direction`], and keeps the
/// result only if it improves on the current state; otherwise momentum is
/// dropped and the step is retried from the current state. Every accepted
/// step therefore strictly decreases the objective.
fn descend(
    problem: &Problem,
    params: &ObjectiveParams,
    state: &mut Vec<f64>,
    lambda: f64,
    stage: usize,
    trace: &mut Vec<TraceRow>,
) {
    let (mut terms, g0, h0) = problem.linearize(state, lambda);
    let tol = params.inner_tol * projected_step_norm(problem, state, &direction(&g0, &h0));
    let mut push = |it: usize, t: &super::Terms, gn: f64| {
        trace.push(TraceRow {
            iteration: it,
            stage,
            lambda,
            objective: t.total,
            stress: t.stress,
            correspondence: t.correspondence,
            overlap: t.overlap,
            compactness: t.compactness,
            gradient_norm: gn,
        })
    };
    push(0, &terms, norm(&g0));
    let mut history = vec![terms.total];

    // derivatives at the current state, while still valid
    let mut at_state = Some((g0, h0));
    let mut previous = state.clone();
    let mut momentum = 0usize;
    let mut step = 1.0;
    let mut base = state.clone();
    let mut trial = vec![0.0; state.len()];
    for _ in 0..params.max_inner_iterations {
        let (base_terms, g, h) = if momentum == 0 {
            base.copy_from_slice(state);
            let (g, h) = match at_state.take() {
                Some(d) => d,
                None => problem.derivatives(state, lambda),
            };
            (terms, g, h)
        } else {
            let beta = momentum as f64 / (momentum as f64 + 3.0);
            for ((b, x), p) in base.iter_mut().zip(state.iter()).zip(&previous) {
                *b = x + beta * (x - p);
            }
            problem.project(&mut base);
            problem.linearize(&base, lambda)
        };
        let dir = direction(&g, &h);
        if momentum == 0 {
            let pg = projected_step_norm(problem, &base, &dir);
            if pg == 0.0 || pg < tol {
                break;
            }
        }
        let accepted = loop {
            for ((t, x), d) in trial.iter_mut().zip(base.iter()).zip(&dir) {
                *t = x + step * d;
            }
            problem.project(&mut trial);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(base.iter()))
                .map(|(d, (t, x))| d * (t - x))
                .sum();
            if decrease < 0.0 {
                let next = problem.evaluate(&trial, lambda);
                if next.total <= base_terms.total + params.armijo * decrease {
                    break Some(next);
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some(next) if next.total < terms.total => {
                previous.copy_from_slice(state);
                std::mem::swap(state, &mut trial);
                terms = next;
                momentum += 1;
                step = (step * 2.0).min(1.0);
            }
            _ if momentum > 0 => {
                momentum = 0;
                step = 1.0;
                continue;
            }
            _ => break,
        }
        push(history.len(), &terms, norm(&g));
        history.push(terms.total);
        let n = history.len();
        if n > STALL_WINDOW
            && history[n - 1 - STALL_WINDOW] - terms.total <= params.inner_tol * terms.total.abs()
        {
            break;
        }
    }
}

/// Minimizes the penalized objective for an increasing sequence of λ.
///
/// Each inner run is a projected gradient descent warm-started from the
/// previous one, with overlap boxes measured at the sizes it starts from.
/// λ grows by `lambda_growth` until no two root boxes in any cloud overlap.
/// Sizes stay within `[size_min, size_max]` throughout, so no repair pass is
/// needed afterwards. The returned storm gets fresh frames fitted to its
/// words.
pub fn minimize(storm: &Storm, params: &ObjectiveParams) -> Result<(Storm, MinimizeReport)> {
    params.validate()?;
    let mut problem = Problem::new(storm, params);
    let mut state = state_vector(storm);
    problem.project(&mut state);
    let lambda_max = params.lambda * params.lambda_max_factor;
    let mut lambda = params.lambda;
    let mut report = MinimizeReport::default();
    loop {
        problem.freeze(&state);
        descend(&problem, params, &mut state, lambda, report.stages, &mut report.trace);
        report.stages += 1;
        report.final_lambda = lambda;
        let overlaps = problem.exact_overlaps(&state);
        if overlaps == 0 {
            break;
        }
        if lambda * params.lambda_growth > lambda_max {
            return Err(Error::OptimizerStalled { lambda, overlaps });
        }
        lambda *= params.lambda_growth;
    }
    // renumber iterations globally
    for (k, row) in report.trace.iter_mut().enumerate() {
        row.iteration = k;
    }
    let mut out = with_state(storm, &state);
    refit_frames(&mut out);
    Ok((out, report))
}

/// Runs a single inner descent at `params.lambda` from the storm as given.
pub fn resume(storm: &Storm, params: &ObjectiveParams) -> (Storm, MinimizeReport) {
    let mut problem = Problem::new(storm, params);
    let mut state = state_vector(storm);
    problem.project(&mut state);
    problem.freeze(&state);
    let mut report = MinimizeReport {
        stages: 1,
        final_lambda: params.lambda,
        ..Default::default()
    };
    descend(&problem, params, &mut state, params.lambda, 0, &mut report.trace);
    let mut out = with_state(storm, &state);
    refit_frames(&mut out);
    (out, report)
}

/// Smallest origin-centered frame holding every word, plus padding.
fn refit_frames(storm: &mut Storm) {
    let frames: Vec<Frame> = storm
        .clouds
        .iter()
        .map(|cloud| {
            let (mut hx, mut hy) = (0.0_f64, 0.0_f64);
            for w in &cloud.words {
                let r = storm.tree(w).root_at(w.pos);
                hx = hx.max(r.max_x).max(-r.min_x);
                hy = hy.max(r.max_y).max(-r.min_y);
            }
            Frame::new(2.0 * (hx + FRAME_PAD), 2.0 * (hy + FRAME_PAD))
        })
        .collect();
    for (cloud, frame) in storm.clouds.iter_mut().zip(frames) {
        cloud.frame = frame;
    }
}
