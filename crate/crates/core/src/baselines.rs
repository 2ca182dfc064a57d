//! Reference optimizers sharing the [`Objective`] and [`Trace`] interfaces.
//!
//! Batch methods (GD, AGD, Newton, BFGS, L-BFGS) use a constant step.
//! SGD and AdaGrad draw one sample index per step, with replacement, from
//! the stream keyed by `(seed, t)`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, SymMatrix, EIGEN_TOL};
use crate::newsamp::{ConvexSet, Recorder};
use crate::problems::Objective;
use crate::sampling::stream;
use crate::trace::{Termination, Trace};
use rand::Rng;

/// Curvature pairs with ⟨s, y⟩ ≤ CURVATURE_TOL·‖s‖‖y‖ are skipped.
pub const CURVATURE_TOL: f64 = 1e-12;

/// Step length rule for BFGS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LineStep {
    /// θ ← θ + η d.
    #[default]
    Constant,
    /// α = −⟨g, d⟩ / ⟨d, H d⟩ with the full Hessian; exact on quadratics.
    ExactQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BaselineMethod {
    Gd,
    /// Nesterov acceleration with momentum (t−1)/(t+2).
    Agd,
    Newton,
    Bfgs {
        #[serde(default)]
        line: LineStep,
    },
    Lbfgs {
        memory: usize,
    },
    /// γ_t = γ/(1 + t/c).
    Sgd {
        gamma: f64,
        c: f64,
    },
    /// (γ_t)_j = γ/√(δ + Σ_τ g_{τ,j}²).
    AdaGrad {
        gamma: f64,
        delta: f64,
    },
}

impl BaselineMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineMethod::Gd => "gd",
            BaselineMethod::Agd => "agd",
            BaselineMethod::Newton => "newton",
            BaselineMethod::Bfgs { .. } => "bfgs",
            BaselineMethod::Lbfgs { .. } => "lbfgs",
            BaselineMethod::Sgd { .. } => "sgd",
            BaselineMethod::AdaGrad { .. } => "adagrad",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, BaselineMethod::Sgd { .. } | BaselineMethod::AdaGrad { .. })
    }

    /// Whether the constant step η is used.
    pub fn uses_step(&self) -> bool {
        !self.is_stochastic() && !matches!(self, BaselineMethod::Bfgs { line: LineStep::ExactQuadratic })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// Constant step η for batch methods.
    pub step: f64,
    /// Stopping tolerance on ‖θ^{t+1} − θ^t‖₂.
    pub eps: f64,
    pub max_iters: usize,
    pub theta0: DVector<f64>,
    /// Seed for the stochastic methods.
    pub seed: u64,
    /// Also stop once ‖θ^t − θ*‖₂ ≤ target (needs a reference solution).
    pub target_dist: Option<f64>,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod, theta0: DVector<f64>) -> Self {
        Self {
            method,
            step: 1.0,
            eps: 1e-10,
            max_iters: 1000,
            theta0,
            seed: 0,
            target_dist: None,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
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

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_target_dist(mut self, target: f64) -> Self {
        self.target_dist = Some(target);
        self
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        match self.method {
            BaselineMethod::Lbfgs { memory: 0 } => return bad("L-BFGS memory must be at least 1".into()),
            BaselineMethod::Sgd { gamma, c } if !(gamma > 0.0 && c > 0.0) => {
                return bad(format!("SGD needs gamma, c > 0, got {gamma}, {c}"))
            }
            BaselineMethod::AdaGrad { gamma, delta } if !(gamma > 0.0 && delta > 0.0) => {
                return bad(format!("AdaGrad needs gamma, delta > 0, got {gamma}, {delta}"))
            }
            _ => {}
        }
        if self.theta0.len() != p {
            return bad(format!("theta0 has length {}, expected {p}", self.theta0.len()));
        }
        Ok(())
    }
}

/// SGD step size γ/(1 + t/c) at update t (0-based).
pub fn sgd_step(gamma: f64, c: f64, t: usize) -> f64 {
    gamma / (1.0 + t as f64 / c)
}

/// AdaGrad state: the running sum of squared gradient entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    pub accum: DVector<f64>,
    pub gamma: f64,
    pub delta: f64,
}

impl AdaGradState {
    pub fn new(p: usize, gamma: f64, delta: f64) -> Self {
        Self {
            accum: DVector::zeros(p),
            gamma,
            delta,
        }
    }

    /// Accumulates g and returns the scaled update (γ_t)_j g_j.
    pub fn update(&mut self, g: &DVector<f64>) -> DVector<f64> {
        self.accum += g.component_mul(g);
        DVector::from_iterator(
            g.len(),
            g.iter()
                .zip(self.accum.iter())
                .map(|(gj, aj)| self.gamma / (self.delta + aj).sqrt() * gj),
        )
    }
}

/// Solves H d = g through the eigendecomposition; singular H is an error.
pub fn newton_direction(h: &SymMatrix, g: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = sym_eigen(h);
    let lam_p = eig.smallest();
    if !(lam_p > EIGEN_TOL * eig.largest().max(1.0)) {
        return Err(Error::NumericalFailure(format!(
            "singular Hessian: smallest eigenvalue {lam_p:e}"
        )));
    }
    let coeffs = eig.vectors.tr_mul(g).component_div(&eig.values);
    Ok(&eig.vectors * coeffs)
}

/// Runs one baseline. Configuration errors are returned as `Err`; failures
/// during the run end the trace with [`Termination::Failed`].
pub fn run_baseline(
    obj: &Objective,
    cfg: &BaselineConfig,
    set: &ConvexSet,
    reference: Option<&DVector<f64>>,
) -> Result<Trace> {
    let p = obj.dim();
    cfg.validate(p)?;
    set.validate(Some(p))?;
    let mut rec = Recorder::new(cfg.method.as_str(), reference);
    let mut state = MethodState::new(cfg, p);
    let mut theta = set.project(&cfg.theta0);
    let (mut f, mut grad) = match obj.value_and_gradient(&theta) {
        Ok(v) => v,
        Err(e) => return Ok(rec.finish(Termination::Failed(e))),
    };
    rec.push(0, &theta, f, &grad, None, None, None);
    let mut prev = theta.clone();

    for t in 0..cfg.max_iters {
        let step = match state.advance(obj, cfg, t, &theta, &prev, &grad) {
            Ok(v) => v,
            Err(e) => return Ok(rec.finish(Termination::Failed(e))),
        };
        let next = set.project(&step.candidate);
        if next.iter().any(|v| !v.is_finite()) {
            let e = Error::NumericalFailure(format!("non-finite iterate at iteration {}", t + 1));
            return Ok(rec.finish(Termination::Failed(e)));
        }
        let (f_next, grad_next) = match obj.value_and_gradient(&next) {
            Ok(v) => v,
            Err(e) => return Ok(rec.finish(Termination::Failed(e))),
        };
        state.observe(&theta, &next, &grad, &grad_next);
        let moved = (&next - &theta).norm();
        prev = std::mem::replace(&mut theta, next);
        f = f_next;
        grad = grad_next;
        rec.push(t + 1, &theta, f, &grad, Some(step.length), None, None);
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

struct Proposal {
    candidate: DVector<f64>,
    length: f64,
}

enum MethodState {
    Plain,
    Bfgs { inv: DMatrix<f64>, scaled: bool },
    Lbfgs { pairs: VecDeque<(DVector<f64>, DVector<f64>)>, memory: usize },
    AdaGrad(AdaGradState),
}

impl MethodState {
    fn new(cfg: &BaselineConfig, p: usize) -> Self {
        match cfg.method {
            BaselineMethod::Bfgs { .. } => MethodState::Bfgs {
                inv: DMatrix::identity(p, p),
                scaled: false,
            },
            BaselineMethod::Lbfgs { memory } => MethodState::Lbfgs {
                pairs: VecDeque::with_capacity(memory),
                memory,
            },
            BaselineMethod::AdaGrad { gamma, delta } => MethodState::AdaGrad(AdaGradState::new(p, gamma, delta)),
            _ => MethodState::Plain,
        }
    }

    fn advance(
        &mut self,
        obj: &Objective,
        cfg: &BaselineConfig,
        t: usize,
        theta: &DVector<f64>,
        prev: &DVector<f64>,
        grad: &DVector<f64>,
    ) -> Result<Proposal> {
        let eta = cfg.step;
        let constant = |d: DVector<f64>| Proposal {
            candidate: theta - d * eta,
            length: eta,
        };
        Ok(match (cfg.method, self) {
            (BaselineMethod::Gd, _) => constant(grad.clone()),
            (BaselineMethod::Agd, _) => {
                let beta = if t == 0 { 0.0 } else { (t as f64 - 1.0) / (t as f64 + 2.0) };
                let y = theta + (theta - prev) * beta;
                let gy = obj.gradient(&y)?;
                Proposal {
                    candidate: y - gy * eta,
                    length: eta,
                }
            }
            (BaselineMethod::Newton, _) => constant(newton_direction(&obj.hessian(theta)?, grad)?),
            (BaselineMethod::Bfgs { line }, MethodState::Bfgs { inv, .. }) => {
                let d = -(&*inv * grad);
                match line {
                    LineStep::Constant => Proposal {
                        candidate: theta + d * eta,
                        length: eta,
                    },
                    LineStep::ExactQuadratic => {
                        let hd = obj.hessian(theta)?.as_matrix() * &d;
                        let curv = d.dot(&hd);
                        if !(curv > 0.0) {
                            return Err(Error::NumericalFailure(format!(
                                "non-positive curvature {curv:e} along the BFGS direction"
                            )));
                        }
                        let alpha = -grad.dot(&d) / curv;
                        Proposal {
                            candidate: theta + d * alpha,
                            length: alpha,
                        }
                    }
                }
            }
            (BaselineMethod::Lbfgs { .. }, MethodState::Lbfgs { pairs, .. }) => {
                constant(two_loop(pairs, grad))
            }
            (BaselineMethod::Sgd { gamma, c }, _) => {
                let i = stream(cfg.seed, t as u64).random_range(0..obj.n());
                let g = obj.sample_gradient(i, theta)?;
                let length = sgd_step(gamma, c, t);
                Proposal {
                    candidate: theta - g * length,
                    length,
                }
            }
            (BaselineMethod::AdaGrad { gamma, .. }, MethodState::AdaGrad(state)) => {
                let i = stream(cfg.seed, t as u64).random_range(0..obj.n());
                let g = obj.sample_gradient(i, theta)?;
                Proposal {
                    candidate: theta - state.update(&g),
                    length: gamma,
                }
            }
            _ => unreachable!("method state matches method"),
        })
    }

    /// Updates curvature information after a step θ → next.
    fn observe(&mut self, theta: &DVector<f64>, next: &DVector<f64>, grad: &DVector<f64>, grad_next: &DVector<f64>) {
        let s = next - theta;
        let y = grad_next - grad;
        let sy = s.dot(&y);
        if !(sy > CURVATURE_TOL * s.norm() * y.norm()) {
            return;
        }
        match self {
            MethodState::Bfgs { inv, scaled } => {
                if !*scaled {
                    // Only rescale H_0 on the first accepted pair; a later
                    // rescale would discard accumulated curvature.
                    *inv *= sy / y.norm_squared();
                    *scaled = true;
                }
                let rho = 1.0 / sy;
                let hy = &*inv * &y;
                let yhy = y.dot(&hy);
                // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, expanded.
                *inv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                    - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            }
            MethodState::Lbfgs { pairs, memory } => {
                if pairs.len() == *memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y));
            }
            _ => {}
        }
    }
}

/// L-BFGS two-loop recursion: returns H_k g.
fn two_loop(pairs: &VecDeque<(DVector<f64>, DVector<f64>)>, g: &DVector<f64>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let a = s.dot(&q) / s.dot(y);
        q.axpy(-a, y, 1.0);
        alphas.push(a);
    }
    if let Some((s, y)) = pairs.back() {
        q *= s.dot(y) / y.norm_squared();
    }
    for ((s, y), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = y.dot(&q) / s.dot(y);
        q.axpy(a - b, s, 1.0);
    }
    q
}

/// High-precision minimizer by damped full Newton.
///
/// Iterates until ‖∇f‖ ≤ `grad_tol`, halving the step while the objective
/// and the gradient norm both fail to decrease. When the iterates stall at
/// machine precision the result is accepted if ‖∇f‖ ≤ 1e3·`grad_tol`.
pub fn reference_solution(obj: &Objective, theta0: &DVector<f64>, grad_tol: f64, max_iters: usize) -> Result<DVector<f64>> {
    let mut theta = theta0.clone();
    let (mut f, mut g) = obj.value_and_gradient(&theta)?;
    for _ in 0..max_iters {
        let gn = g.norm();
        if gn <= grad_tol {
            return Ok(theta);
        }
        let d = newton_direction(&obj.hessian(&theta)?, &g)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &theta - &d * alpha;
            if let Ok((fc, gc)) = obj.value_and_gradient(&cand) {
                if fc < f || gc.norm() < gn {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, fc, gc)) => {
                let moved = (&cand - &theta).norm();
                theta = cand;
                f = fc;
                g = gc;
                if moved <= f64::EPSILON * (1.0 + theta.norm()) {
                    break;
                }
            }
            None => break,
        }
    }
    let gn = g.norm();
    if gn <= 1e3 * grad_tol {
        if gn > grad_tol {
            log::warn!("reference solve stalled at gradient norm {gn:e}");
        }
        Ok(theta)
    } else {
        Err(Error::NumericalFailure(format!(
            "reference solve stopped at gradient norm {gn:e}"
        )))
    }
}
