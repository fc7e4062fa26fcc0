//! Nonmonotone accelerated proximal gradient on the row-sphere set
//! `S = { X : every row of X has unit norm }`.
//!
//! Minimizes `F(X) + indicator_S(X)` for the quadratic objectives of
//! [`ObjectiveOperator`]. The proximal map of the indicator is row
//! normalization. Each iteration adapts the stepsize from observed
//! curvature, tries an extrapolated step guarded by two safeguard
//! quantities and a running reference value `c_k`, and otherwise falls back
//! to a plain projected gradient step from the current iterate.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::operators::{frobenius_dot, ObjectiveOperator};

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("non-finite objective or gradient at iteration {iter}")]
    NonFinite { iter: usize },
    #[error("initial point is not on the row-sphere (row {row} has norm {norm})")]
    NotOnSphere { row: usize, norm: f64 },
    #[error("initial point has {got} rows, operator has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Extrapolation weight `beta_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    /// `k / (k + 3)`.
    Nesterov,
    Constant(f64),
}

impl BetaSchedule {
    fn at(self, k: usize) -> f64 {
        match self {
            BetaSchedule::Nesterov => k as f64 / (k as f64 + 3.0),
            BetaSchedule::Constant(b) => b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgParams {
    pub mu0: f64,
    pub mu1: f64,
    pub delta1: f64,
    /// Fixed once the first stepsize is known when `None`:
    /// `min(2 delta1, 0.49 (1 - mu0) / alpha_1)`.
    pub delta2: Option<f64>,
    pub eta: f64,
    pub p_tilde: f64,
    pub sigma: f64,
    pub r: f64,
    pub beta: BetaSchedule,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for ApgParams {
    fn default() -> Self {
        Self {
            mu0: 0.99,
            mu1: 0.95,
            delta1: 1e-4,
            delta2: None,
            eta: 0.8,
            p_tilde: 0.1,
            sigma: 1.0,
            r: 2.0,
            beta: BetaSchedule::Nesterov,
            epsilon: 1e-3,
            max_iters: 3000,
        }
    }
}

impl ApgParams {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |msg: String| Err(OptimizerError::InvalidParams(msg));
        if !(0.0 < self.mu1 && self.mu1 < self.mu0 && self.mu0 < 1.0) {
            return bad(format!("need 0 < mu1 < mu0 < 1, got mu1={} mu0={}", self.mu1, self.mu0));
        }
        if !(self.delta1 > 0.0) {
            return bad(format!("delta1 must be positive, got {}", self.delta1));
        }
        if let Some(d2) = self.delta2 {
            if !(d2 > self.delta1) {
                return bad(format!("need delta1 < delta2, got {} and {d2}", self.delta1));
            }
        }
        if !(0.0 < self.eta && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.p_tilde > 0.0) {
            return bad(format!("p_tilde must be positive, got {}", self.p_tilde));
        }
        if !(self.sigma >= 0.0 && self.r >= 0.0) {
            return bad("sigma and r must be nonnegative".into());
        }
        if let BetaSchedule::Constant(b) = self.beta {
            if !(0.0..=1.0).contains(&b) {
                return bad(format!("beta must lie in [0, 1], got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }

    /// Stepsize increment sequence, indexed from 1.
    fn increment(&self, k: usize) -> f64 {
        1.0 / (k as f64).powf(1.0 + self.p_tilde)
    }
}

/// Row-normalized `n x k` embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.0.row(i)
    }

    /// Largest deviation of a row norm from 1.
    pub fn max_norm_deviation(&self) -> f64 {
        self.0
            .rows()
            .into_iter()
            .map(|r| (r.dot(&r).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Normalizes every row; zero rows become `(1, 0, ..., 0)`.
pub fn project_rows(mut x: Array2<f64>) -> FeatureMatrix {
    for mut row in x.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            row.fill(0.0);
            if let Some(first) = row.first_mut() {
                *first = 1.0;
            }
        } else {
            row.mapv_inplace(|v| v / norm);
        }
    }
    FeatureMatrix(x)
}

/// Deterministic pseudo-random starting point; distinct `stream`s give
/// distinct starts.
pub fn initial_features(n: usize, k: usize, stream: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ stream);
    project_rows(Array2::from_shape_simple_fn((n, k), || rng.random_range(-1.0..1.0)))
}

/// Starting point built from a block assignment: each row points at its
/// block's axis, blended with a deterministic perturbation.
pub fn features_from_assignment(assignment: &[usize], k: usize, stream: u64, noise: f64) -> FeatureMatrix {
    let base = initial_features(assignment.len(), k, stream);
    let mut x = base.into_inner();
    x.mapv_inplace(|v| v * noise);
    for (i, &b) in assignment.iter().enumerate() {
        x[[i, b % k]] += 1.0;
    }
    project_rows(x)
}

/// Barzilai-Borwein style first stepsize
/// `|X0 - X1| / |grad F(X0) - grad F(X1)|` with `X1 = Proj(grad F(X0))`;
/// `1.0` when the quotient is degenerate.
pub fn initial_stepsize(op: &ObjectiveOperator, x0: &FeatureMatrix) -> f64 {
    let g0 = op.gradient(x0.view());
    stepsize_from(op, x0.view(), &g0)
}

fn stepsize_from(op: &ObjectiveOperator, x0: ArrayView2<f64>, g0: &Array2<f64>) -> f64 {
    let x1 = project_rows(g0.clone());
    let g1 = op.gradient(x1.view());
    let num = diff_norm_sq(x0, x1.view()).sqrt();
    let den = diff_norm_sq(g0.view(), g1.view()).sqrt();
    let alpha = num / den;
    if den == 0.0 || !alpha.is_finite() || alpha <= 0.0 {
        1.0
    } else {
        alpha
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// `F(X_{k+1})`.
    pub value: f64,
    /// `alpha_{k+1}`.
    pub alpha: f64,
    /// Whether the extrapolated candidate was accepted.
    pub extrapolated: bool,
    /// `F(z_{k+1})`.
    pub candidate_value: f64,
    /// Reference value `c_k` the candidate was tested against.
    pub reference: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub error: f64,
    /// Largest `| ||row|| - 1 |` of `X_{k+1}`.
    pub row_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub alpha0: f64,
    pub initial_value: f64,
    pub initial_error: f64,
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(self.initial_error, |r| r.error)
    }

    /// CSV with header `iter,F,alpha,branch,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,F,alpha,branch,error\n");
        for r in &self.rows {
            let branch = if r.extrapolated { "extrapolated" } else { "fallback" };
            let _ = writeln!(out, "{},{:e},{:e},{},{:e}", r.iter, r.value, r.alpha, branch, r.error);
        }
        out
    }
}

fn diff_norm_sq(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn norm_sq(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// `max |(next - cur) / alpha + (g_next - g_cur)|`.
fn residual(
    next: ArrayView2<f64>,
    cur: ArrayView2<f64>,
    g_next: ArrayView2<f64>,
    g_cur: ArrayView2<f64>,
    alpha: f64,
) -> f64 {
    let mut err = 0.0f64;
    Zip::from(next).and(cur).and(g_next).and(g_cur).for_each(|&a, &b, &ga, &gb| {
        err = err.max(((a - b) / alpha + (ga - gb)).abs());
    });
    err
}

/// `Proj(x - alpha * g)`.
fn gradient_step(x: ArrayView2<f64>, g: ArrayView2<f64>, alpha: f64) -> FeatureMatrix {
    let mut y = x.to_owned();
    Zip::from(&mut y).and(g).for_each(|a, &b| *a -= alpha * b);
    project_rows(y)
}

struct Point {
    x: FeatureMatrix,
    value: f64,
    grad: Array2<f64>,
}

impl Point {
    fn eval(op: &ObjectiveOperator, x: FeatureMatrix, iter: usize) -> Result<Self, OptimizerError> {
        let (value, grad) = op.value_and_gradient(x.view());
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(OptimizerError::NonFinite { iter });
        }
        Ok(Self { x, value, grad })
    }
}

/// Runs the solver from `x0` until the residual drops below
/// `params.epsilon` or `params.max_iters` iterations have run.
pub fn modapg_solve(
    op: &ObjectiveOperator,
    x0: FeatureMatrix,
    params: &ApgParams,
) -> Result<(FeatureMatrix, SolveTrace), OptimizerError> {
    params.validate()?;
    if x0.nrows() != op.num_vertices() {
        return Err(OptimizerError::DimensionMismatch {
            expected: op.num_vertices(),
            got: x0.nrows(),
        });
    }
    for (row, r) in x0.view().rows().into_iter().enumerate() {
        let norm = r.dot(&r).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(OptimizerError::NotOnSphere { row, norm });
        }
    }

    let mut cur = Point::eval(op, x0, 0)?;
    let alpha0 = stepsize_from(op, cur.x.view(), &cur.grad);
    let trial = Point::eval(op, gradient_step(cur.x.view(), cur.grad.view(), alpha0), 0)?;
    let initial_error = residual(
        trial.x.view(),
        cur.x.view(),
        trial.grad.view(),
        cur.grad.view(),
        alpha0,
    );
    let mut trace = SolveTrace {
        alpha0,
        initial_value: cur.value,
        initial_error,
        rows: Vec::new(),
        converged: initial_error < params.epsilon,
    };
    if trace.converged {
        return Ok((cur.x, trace));
    }

    let mut prev_x = cur.x.as_array().clone();
    let mut prev_value = cur.value;
    let mut prev_grad = cur.grad.clone();
    let mut alpha = alpha0;
    let mut reference = cur.value;
    let mut q = 1.0;
    let (mut delta1, mut delta2) = (params.delta1, params.delta2.unwrap_or(0.0));

    for k in 0..params.max_iters {
        let dx = cur.x.as_array() - &prev_x;
        let dx_sq = norm_sq(dx.view());
        let curvature = 2.0 * (cur.value - prev_value - frobenius_dot(prev_grad.view(), dx.view()));
        let next_alpha = if curvature > params.mu0 / alpha * dx_sq {
            params.mu1 * dx_sq / curvature
        } else {
            alpha + alpha.min(1.0) * params.increment(k + 1)
        };
        if k == 0 {
            let bound = (1.0 - params.mu0) / (2.0 * next_alpha);
            match params.delta2 {
                Some(d2) if d2 >= bound => {
                    return Err(OptimizerError::InvalidParams(format!(
                        "delta2 = {d2} must stay below (1 - mu0) / (2 alpha_1) = {bound}"
                    )));
                }
                Some(_) => {}
                None => {
                    delta2 = (2.0 * params.delta1).min(0.98 * bound);
                    delta1 = delta1.min(0.5 * delta2);
                }
            }
        }

        let beta = params.beta.at(k);
        let y_point = if beta == 0.0 || dx_sq == 0.0 {
            None
        } else {
            let mut y = cur.x.as_array().clone();
            Zip::from(&mut y).and(&dx).for_each(|a, &d| *a += beta * d);
            let (value, grad) = op.value_and_gradient(y.view());
            if !value.is_finite() {
                return Err(OptimizerError::NonFinite { iter: k });
            }
            Some((y, grad))
        };
        let (y, y_grad) = match &y_point {
            Some((y, g)) => (y.view(), g.view()),
            None => (cur.x.view(), cur.grad.view()),
        };
        let z = Point::eval(op, gradient_step(y, y_grad, next_alpha), k)?;
        let zy = diff_norm_sq(z.x.view(), y);
        let zx = diff_norm_sq(z.x.view(), cur.x.view());
        let yx = diff_norm_sq(y, cur.x.view());
        let phi1 = zy + zx - (1.0 + params.sigma / ((k + 1) as f64).powf(params.r)) * yx;
        let phi2 = delta1 * zx - delta2 * (zy + zx - yx);

        let candidate_value = z.value;
        let extrapolated = phi1 >= 0.0 && z.value <= (cur.value + phi2).min(reference);
        let next = if extrapolated {
            z
        } else {
            Point::eval(op, gradient_step(cur.x.view(), cur.grad.view(), next_alpha), k)?
        };

        let q_next = 1.0 + params.eta * q;
        let reference_used = reference;
        reference = (params.eta * q * reference + next.value) / q_next;
        q = q_next;

        let error = residual(
            next.x.view(),
            cur.x.view(),
            next.grad.view(),
            cur.grad.view(),
            next_alpha,
        );
        trace.rows.push(TraceRow {
            iter: k,
            value: next.value,
            alpha: next_alpha,
            extrapolated,
            candidate_value,
            reference: reference_used,
            phi1,
            phi2,
            error,
            row_deviation: next.x.max_norm_deviation(),
        });

        let old = std::mem::replace(&mut cur, next);
        prev_x = old.x.into_inner();
        prev_value = old.value;
        prev_grad = old.grad;
        alpha = next_alpha;

        if error < params.epsilon {
            trace.converged = true;
            break;
        }
    }
    Ok((cur.x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn projection_examples() {
        let p = project_rows(array![[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]]);
        let a = p.as_array();
        assert!((a[[0, 0]] - 0.6).abs() < 1e-15 && (a[[0, 1]] - 0.8).abs() < 1e-15);
        assert_eq!(a.row(1).to_vec(), vec![1.0, 0.0]);
        assert_eq!(a.row(2).to_vec(), vec![1.0, 0.0]);
        let again = project_rows(a.clone());
        assert!(diff_norm_sq(again.view(), p.view()) < 1e-30);
    }

    #[test]
    fn identity_stepsize_is_half() {
        let op = ObjectiveOperator::identity(5);
        for stream in 0..5 {
            let x0 = initial_features(5, 3, stream);
            assert!((initial_stepsize(&op, &x0) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_stepsize_falls_back() {
        // C = -I/2 makes grad F(X) = X, so X1 = X0.
        let g = crate::operators::CliqueGraph {
            adjacency: crate::operators::CsrMatrix::zeros(2),
            degree: vec![0.0; 2],
        };
        let op = ObjectiveOperator::new(g, &[1, 1], Vec::new(), vec![(-0.5, crate::operators::Term::Identity)]);
        let x0 = project_rows(array![[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(initial_stepsize(&op, &x0), 1.0);
    }

    #[test]
    fn stationary_start_returns_immediately() {
        // F = -<I, XX^T> is constant on S, so every point is stationary.
        let op = ObjectiveOperator::identity(4);
        let x0 = initial_features(4, 2, 7);
        let (x, trace) = modapg_solve(&op, x0.clone(), &ApgParams::default()).unwrap();
        assert_eq!(trace.iterations(), 0);
        assert!(trace.converged);
        assert_eq!(x, x0);
    }

    #[test]
    fn rejects_bad_params() {
        let p = ApgParams {
            mu1: 0.995,
            ..ApgParams::default()
        };
        assert!(p.validate().is_err());
        let p = ApgParams {
            eta: 1.0,
            ..ApgParams::default()
        };
        assert!(p.validate().is_err());
        let op = ObjectiveOperator::identity(2);
        let off = FeatureMatrix(array![[2.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            modapg_solve(&op, off, &ApgParams::default()),
            Err(OptimizerError::NotOnSphere { row: 0, .. })
        ));
    }

    #[test]
    fn non_finite_is_reported() {
        let g = crate::operators::CliqueGraph {
            adjacency: crate::operators::CsrMatrix::zeros(2),
            degree: vec![0.0; 2],
        };
        let op = ObjectiveOperator::new(g, &[1, 1], Vec::new(), vec![(f64::NAN, crate::operators::Term::Identity)]);
        let x0 = initial_features(2, 2, 0);
        assert!(matches!(
            modapg_solve(&op, x0, &ApgParams::default()),
            Err(OptimizerError::NonFinite { .. })
        ));
    }
}
