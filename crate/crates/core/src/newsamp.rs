//! The NewSamp optimizer: projected Newton-type iterations whose scaling
//! matrix is the eigenvalue-thresholded inverse of a sub-sampled Hessian.
//!
//! Each iteration
//!
//! 1. draws `S_t` from the sampling scheme,
//! 2. forms `H_{S_t}` at the current iterate,
//! 3. builds `Q^t` from the top r+1 eigenpairs of `H_{S_t}`, treating every
//!    eigenvalue below the (r+1)-th as equal to it,
//! 4. picks the step size (fixed, or `2/(1 + λ_p/λ_{r+1} + γ)`),
//! 5. sets `θ^{t+1} = P_C(θ^t − η_t Q^t ∇f(θ^t))`,
//!
//! and stops once `‖θ^{t+1} − θ^t‖₂ ≤ ε`.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, ScalingMatrix, SymEigen, SymMatrix, EIGEN_TOL};
use crate::problems::Objective;
use crate::sampling::SampleScheme;
use crate::trace::{Record, Termination, Trace};

/// Default constant in the step-size correction γ = c·√(log p / |S|).
pub const DEFAULT_C_STEP: f64 = 1.0;

/// Feasible set C with its Euclidean projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexSet {
    #[default]
    Unconstrained,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl ConvexSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let set = ConvexSet::Ball { center, radius };
        set.validate(None)?;
        Ok(set)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let set = ConvexSet::Box { lower, upper };
        set.validate(None)?;
        Ok(set)
    }

    /// Checks the set's own invariants and, when given, its dimension.
    pub fn validate(&self, p: Option<usize>) -> Result<()> {
        let dim = match self {
            ConvexSet::Unconstrained => return Ok(()),
            ConvexSet::Ball { center, radius } => {
                if !(*radius > 0.0) || radius.is_nan() {
                    return Err(Error::InvalidInput(format!("ball radius must be positive, got {radius}")));
                }
                center.len()
            }
            ConvexSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::InvalidInput("box bounds differ in length".into()));
                }
                if let Some(j) = lower.iter().zip(upper).position(|(l, u)| !(l <= u)) {
                    return Err(Error::InvalidInput(format!("box lower > upper at coordinate {j}")));
                }
                lower.len()
            }
        };
        match p {
            Some(p) if p != dim => Err(Error::InvalidInput(format!(
                "convex set has dimension {dim}, problem has {p}"
            ))),
            _ => Ok(()),
        }
    }

    /// P_C(θ) = argmin_{θ' ∈ C} ‖θ − θ'‖₂.
    pub fn project(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self {
            ConvexSet::Unconstrained => theta.clone(),
            ConvexSet::Ball { center, radius } => {
                let c = DVector::from_column_slice(center);
                let d = theta - &c;
                let norm = d.norm();
                if norm <= *radius {
                    theta.clone()
                } else {
                    c + d * (radius / norm)
                }
            }
            ConvexSet::Box { lower, upper } => DVector::from_iterator(
                theta.len(),
                theta
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&v, (&l, &u))| v.clamp(l, u)),
            ),
        }
    }

    /// Euclidean distance from θ to C.
    pub fn distance(&self, theta: &DVector<f64>) -> f64 {
        (self.project(theta) - theta).norm()
    }

    /// diam(C); infinite for the unconstrained set.
    pub fn diameter(&self) -> f64 {
        match self {
            ConvexSet::Unconstrained => f64::INFINITY,
            ConvexSet::Ball { radius, .. } => 2.0 * radius,
            ConvexSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum StepMode {
    Fixed { eta: f64 },
    /// η_t = 2/(1 + λ_p/λ_{r+1} + γ), γ = c_step·√(log p/|S_t|).
    Adaptive {
        #[serde(default = "default_c_step")]
        c_step: f64,
    },
}

fn default_c_step() -> f64 {
    DEFAULT_C_STEP
}

impl Default for StepMode {
    fn default() -> Self {
        StepMode::Adaptive {
            c_step: DEFAULT_C_STEP,
        }
    }
}

/// Adaptive step size 2/(1 + λ_p/λ_{r+1} + γ) with γ = c_step·√(log p/|S|).
///
/// The result lies in (0, 2) and is at least 1 whenever λ_p/λ_{r+1} + γ ≤ 1.
pub fn adaptive_step(lambda_p: f64, lambda_r1: f64, p: usize, sample_size: usize, c_step: f64) -> Result<f64> {
    if !(lambda_r1 > 0.0) {
        return Err(Error::DegenerateSpectrum {
            lambda: lambda_r1,
            tol: 0.0,
        });
    }
    if !(lambda_p >= 0.0 && lambda_p <= lambda_r1) {
        return Err(Error::InvalidInput(format!(
            "need 0 <= lambda_p <= lambda_r1, got {lambda_p} and {lambda_r1}"
        )));
    }
    if sample_size == 0 || p == 0 || !(c_step >= 0.0) {
        return Err(Error::InvalidInput("adaptive step needs p, |S| > 0 and c_step >= 0".into()));
    }
    let gamma = step_correction(p, sample_size, c_step);
    Ok(2.0 / (1.0 + lambda_p / lambda_r1 + gamma))
}

/// γ = c_step·√(log p/|S|).
pub fn step_correction(p: usize, sample_size: usize, c_step: f64) -> f64 {
    c_step * ((p as f64).ln().max(0.0) / sample_size as f64).sqrt()
}

/// Largest step admitted by the convergence theorems: 2/(1 + λ_p/λ_{r+1}).
pub fn step_bound(lambda_p: f64, lambda_r1: f64) -> f64 {
    2.0 / (1.0 + lambda_p / lambda_r1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewSampConfig {
    /// Rank threshold r; 1 ≤ r ≤ p − 1.
    pub rank: usize,
    pub scheme: SampleScheme,
    pub step: StepMode,
    /// Stopping tolerance on ‖θ^{t+1} − θ^t‖₂.
    pub eps: f64,
    pub max_iters: usize,
    pub theta0: DVector<f64>,
    /// Also stop once ‖θ^t − θ*‖₂ ≤ target (needs a reference solution).
    pub target_dist: Option<f64>,
}

impl NewSampConfig {
    pub fn new(rank: usize, scheme: SampleScheme, theta0: DVector<f64>) -> Self {
        Self {
            rank,
            scheme,
            step: StepMode::default(),
            eps: 1e-10,
            max_iters: 100,
            theta0,
            target_dist: None,
        }
    }

    pub fn with_step(mut self, step: StepMode) -> Self {
        self.step = step;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_target_dist(mut self, target: f64) -> Self {
        self.target_dist = Some(target);
        self
    }

    fn validate(&self, p: usize, needs_rank: bool) -> Result<()> {
        if needs_rank && (self.rank == 0 || self.rank + 1 > p) {
            return Err(Error::InvalidRank { k: self.rank + 1, p });
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps must be positive, got {}", self.eps)));
        }
        if let StepMode::Fixed { eta } = self.step {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidInput(format!("step must be positive, got {eta}")));
            }
        }
        if let StepMode::Adaptive { c_step } = self.step {
            if !(c_step >= 0.0 && c_step.is_finite()) {
                return Err(Error::InvalidInput(format!("c_step must be non-negative, got {c_step}")));
            }
        }
        if self.theta0.len() != p {
            return Err(Error::InvalidInput(format!(
                "theta0 has length {}, expected {p}",
                self.theta0.len()
            )));
        }
        Ok(())
    }
}

/// Everything known about one update θ^t → θ^{t+1}, handed to observers.
pub struct StepView<'a> {
    pub t: usize,
    pub theta: &'a DVector<f64>,
    pub next: &'a DVector<f64>,
    pub gradient: &'a DVector<f64>,
    pub sample: &'a [usize],
    pub hessian: &'a SymMatrix,
    pub eigen: &'a SymEigen,
    /// Q^t; absent for the plain sub-sampled Newton direction.
    pub scaling: Option<&'a ScalingMatrix>,
    pub step: f64,
}

/// Builds records with elapsed time and optional reference distance.
pub(crate) struct Recorder<'a> {
    reference: Option<&'a DVector<f64>>,
    start: Instant,
    pub(crate) trace: Trace,
    f0: Option<f64>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(method: &str, reference: Option<&'a DVector<f64>>) -> Self {
        Self {
            reference,
            start: Instant::now(),
            trace: Trace::new(method),
            f0: None,
        }
    }

    pub(crate) fn push(
        &mut self,
        t: usize,
        theta: &DVector<f64>,
        f: f64,
        grad: &DVector<f64>,
        step: Option<f64>,
        lam_r1: Option<f64>,
        lam_p: Option<f64>,
    ) {
        let elapsed_s = self.start.elapsed().as_secs_f64();
        let elapsed_s = self
            .trace
            .records
            .last()
            .map_or(elapsed_s, |r| r.elapsed_s.max(elapsed_s));
        self.f0.get_or_insert(f);
        self.trace.records.push(Record {
            t,
            theta: theta.clone(),
            f,
            grad_norm: grad.norm(),
            step,
            lam_r1,
            lam_p,
            dist: self.reference.map(|r| (theta - r).norm()),
            elapsed_s,
        });
    }

    /// Divergence: f rose more than 10·max(|f_0|, 1) above f_0.
    pub(crate) fn diverged(&self, f: f64) -> Option<Error> {
        let f0 = self.f0?;
        if !f.is_finite() || f - f0 > 10.0 * f0.abs().max(1.0) {
            Some(Error::Divergence { f0, f })
        } else {
            None
        }
    }

    /// Whether the last record is within `target` of the reference.
    pub(crate) fn within(&self, target: Option<f64>) -> bool {
        match (target, self.trace.records.last().and_then(|r| r.dist)) {
            (Some(target), Some(d)) => d <= target,
            _ => false,
        }
    }

    pub(crate) fn finish(mut self, termination: Termination) -> Trace {
        self.trace.termination = termination;
        self.trace
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Thresholded,
    PlainInverse,
}

/// Runs NewSamp and returns its trace.
///
/// Invalid configurations are reported as `Err`; failures during the run
/// (degenerate spectrum, overflow, NaN iterates) end the trace with
/// [`Termination::Failed`] and keep the records gathered so far.
pub fn run(obj: &Objective, cfg: &NewSampConfig, set: &ConvexSet, reference: Option<&DVector<f64>>) -> Result<Trace> {
    run_observed(obj, cfg, set, reference, |_| {})
}

/// [`run`] with a callback invoked after every update.
pub fn run_observed<F>(
    obj: &Objective,
    cfg: &NewSampConfig,
    set: &ConvexSet,
    reference: Option<&DVector<f64>>,
    observer: F,
) -> Result<Trace>
where
    F: FnMut(&StepView<'_>),
{
    drive(obj, cfg, set, reference, Direction::Thresholded, observer)
}

/// Sub-sampled Newton with Q^t = H_{S_t}^{-1} and no thresholding.
///
/// Uses the fixed step when configured and η = 1 otherwise. A singular
/// sub-sampled Hessian ends the run with a numerical failure.
pub fn plain_subsampled_newton_run(
    obj: &Objective,
    cfg: &NewSampConfig,
    set: &ConvexSet,
    reference: Option<&DVector<f64>>,
) -> Result<Trace> {
    plain_subsampled_newton_observed(obj, cfg, set, reference, |_| {})
}

pub fn plain_subsampled_newton_observed<F>(
    obj: &Objective,
    cfg: &NewSampConfig,
    set: &ConvexSet,
    reference: Option<&DVector<f64>>,
    observer: F,
) -> Result<Trace>
where
    F: FnMut(&StepView<'_>),
{
    drive(obj, cfg, set, reference, Direction::PlainInverse, observer)
}

fn drive<F>(
    obj: &Objective,
    cfg: &NewSampConfig,
    set: &ConvexSet,
    reference: Option<&DVector<f64>>,
    direction: Direction,
    mut observer: F,
) -> Result<Trace>
where
    F: FnMut(&StepView<'_>),
{
    let p = obj.dim();
    let n = obj.n();
    cfg.validate(p, direction == Direction::Thresholded)?;
    set.validate(Some(p))?;
    // Surface scheme errors (e.g. |S| > n) before the run starts.
    cfg.scheme.sample(0, n)?;

    let name = match direction {
        Direction::Thresholded => "newsamp",
        Direction::PlainInverse => "plain-subsampled-newton",
    };
    let mut rec = Recorder::new(name, reference);
    let mut theta = set.project(&cfg.theta0);
    let (mut f, mut grad) = match obj.value_and_gradient(&theta) {
        Ok(v) => v,
        Err(e) => return Ok(rec.finish(Termination::Failed(e))),
    };
    rec.push(0, &theta, f, &grad, None, None, None);

    for t in 0..cfg.max_iters {
        let outcome = (|| -> Result<(DVector<f64>, f64, f64, f64)> {
            let sample = cfg.scheme.sample(t, n)?;
            let hessian = obj.subsampled_hessian(&theta, &sample)?;
            let eigen = sym_eigen(&hessian);
            let lam_p = eigen.smallest();
            let (dir, eta, lam_r1, scaling) = match direction {
                Direction::Thresholded => {
                    let q = ScalingMatrix::from_eigen(&eigen, cfg.rank)?;
                    let lam_r1 = q.lambda_r1();
                    let eta = match cfg.step {
                        StepMode::Fixed { eta } => {
                            let bound = step_bound(lam_p.max(0.0), lam_r1);
                            if eta > bound {
                                log::warn!(
                                    "iteration {t}: fixed step {eta} exceeds 2/(1 + lambda_p/lambda_r1) = {bound}"
                                );
                            }
                            eta
                        }
                        StepMode::Adaptive { c_step } => {
                            adaptive_step(lam_p.clamp(0.0, lam_r1), lam_r1, p, sample.len(), c_step)?
                        }
                    };
                    (q.apply(&grad)?, eta, lam_r1, Some(q))
                }
                Direction::PlainInverse => {
                    let tol = EIGEN_TOL * eigen.largest().max(1.0);
                    if !(lam_p > tol) {
                        return Err(Error::NumericalFailure(format!(
                            "singular sub-sampled Hessian at iteration {t}: smallest eigenvalue {lam_p:e}"
                        )));
                    }
                    let coeffs = eigen.vectors.tr_mul(&grad).component_div(&eigen.values);
                    let eta = match cfg.step {
                        StepMode::Fixed { eta } => eta,
                        StepMode::Adaptive { .. } => 1.0,
                    };
                    (&eigen.vectors * coeffs, eta, eigen.values[cfg.rank.min(p - 1)], None)
                }
            };
            let next = set.project(&(&theta - &dir * eta));
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure(format!("non-finite iterate at iteration {}", t + 1)));
            }
            observer(&StepView {
                t,
                theta: &theta,
                next: &next,
                gradient: &grad,
                sample: &sample,
                hessian: &hessian,
                eigen: &eigen,
                scaling: scaling.as_ref(),
                step: eta,
            });
            Ok((next, eta, lam_r1, lam_p))
        })();

        let (next, eta, lam_r1, lam_p) = match outcome {
            Ok(v) => v,
            Err(e) => return Ok(rec.finish(Termination::Failed(e))),
        };
        let (f_next, grad_next) = match obj.value_and_gradient(&next) {
            Ok(v) => v,
            Err(e) => return Ok(rec.finish(Termination::Failed(e))),
        };
        let moved = (&next - &theta).norm();
        theta = next;
        f = f_next;
        grad = grad_next;
        rec.push(t + 1, &theta, f, &grad, Some(eta), Some(lam_r1), Some(lam_p));
        if let Some(e) = rec.diverged(f) {
            return Ok(rec.finish(Termination::Failed(e)));
        }
        if rec.within(cfg.target_dist) {
            return Ok(rec.finish(Termination::TargetReached));
        }
        if moved <= cfg.eps {
            return Ok(rec.finish(Termination::EpsReached));
        }
    }
    Ok(rec.finish(Termination::MaxIters))
}
