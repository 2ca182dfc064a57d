//! Finite-sum objectives f(θ) = (1/n) Σ f_i(θ): canonical-link GLMs and the
//! primal linear SVM.
//!
//! Every objective is written as
//!
//! ```text
//! f_i(θ) = reg(θ) + g_i(<x_i, θ>)
//! ```
//!
//! with `reg = 0` for GLMs and `reg = ½‖θ‖²` for SVMs. For the SVM the data
//! term is scaled as `g_i(z) = (nC/2) ℓ(y_i z)` so that the sample average
//! reproduces `½‖θ‖² + (C/2) Σ ℓ(y_i, <θ, x_i>)` exactly, and the averaged
//! sub-sampled Hessian used by the optimizers applies without change.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::numeric::{CompensatedOuter, CompensatedSum, CompensatedVec};

/// Largest linear predictor accepted by the Poisson objective.
pub const POISSON_MAX_PREDICTOR: f64 = 700.0;

/// Design matrix (row-major, n×p) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, p: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Shape(format!("dataset must be non-empty, got n={n}, p={p}")));
        }
        if x.len() != n * p {
            return Err(Error::Shape(format!(
                "design matrix has {} entries, expected {n}x{p}",
                x.len()
            )));
        }
        if y.len() != n {
            return Err(Error::Shape(format!("{} responses for {n} rows", y.len())));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite design entry at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite response at row {i}")));
        }
        Ok(Self { n, p, x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Shape(format!(
                "row {i} has {} columns, expected {p}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), p, rows.concat(), y)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    /// Row-major design entries.
    pub fn design(&self) -> &[f64] {
        &self.x
    }

    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.x)
    }

    /// R_x = max_i ‖x_i‖².
    pub fn max_row_norm_sq(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn with_labels(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.p, self.x.clone(), y)
    }

    /// Labels in {-1, +1} mapped to {0, 1}; other label sets unchanged.
    pub fn to_binary01(&self) -> Self {
        let signed = self.y.iter().all(|&v| v == 1.0 || v == -1.0) && self.y.contains(&-1.0);
        let mut out = self.clone();
        if signed {
            out.y.iter_mut().for_each(|v| *v = (*v + 1.0) / 2.0);
        }
        out
    }

    /// Labels in {0, 1} mapped to {-1, +1}; other label sets unchanged.
    pub fn to_signed(&self) -> Self {
        let binary = self.y.iter().all(|&v| v == 0.0 || v == 1.0) && self.y.contains(&0.0);
        let mut out = self.clone();
        if binary {
            out.y.iter_mut().for_each(|v| *v = 2.0 * *v - 1.0);
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cumulant generating function of a canonical-link GLM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlmLink {
    /// Φ(z) = z²
    Ols,
    /// Φ(z) = log(1 + e^z)
    Logistic,
    /// Φ(z) = e^z
    Poisson,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl GlmLink {
    pub fn phi(self, z: f64) -> f64 {
        match self {
            GlmLink::Ols => z * z,
            // softplus, stable for large |z|
            GlmLink::Logistic => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            GlmLink::Poisson => z.exp(),
        }
    }

    pub fn phi1(self, z: f64) -> f64 {
        match self {
            GlmLink::Ols => 2.0 * z,
            GlmLink::Logistic => sigmoid(z),
            GlmLink::Poisson => z.exp(),
        }
    }

    pub fn phi2(self, z: f64) -> f64 {
        match self {
            GlmLink::Ols => 2.0,
            GlmLink::Logistic => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            GlmLink::Poisson => z.exp(),
        }
    }

    pub fn phi3(self, z: f64) -> f64 {
        match self {
            GlmLink::Ols => 0.0,
            GlmLink::Logistic => {
                let s = sigmoid(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            GlmLink::Poisson => z.exp(),
        }
    }

    /// sup |Φ⁽²⁾| over |z| ≤ b.
    pub fn phi2_sup(self, b: f64) -> f64 {
        match self {
            GlmLink::Ols => 2.0,
            GlmLink::Logistic => 0.25,
            GlmLink::Poisson => b.exp(),
        }
    }

    /// L = sup |Φ⁽³⁾| over |z| ≤ b, the Lipschitz constant of Φ⁽²⁾.
    pub fn phi3_sup(self, b: f64) -> f64 {
        match self {
            GlmLink::Ols => 0.0,
            GlmLink::Logistic => 1.0 / (6.0 * 3f64.sqrt()),
            GlmLink::Poisson => b.exp(),
        }
    }
}

/// Margin loss used by the primal SVM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvmLoss {
    /// max{0, 1 − m}²
    Hinge2,
    /// 0 for m > 3/2; (3/2 − m)²/2 for |1 − m| ≤ 1/2; 1 − m otherwise.
    SmoothedHuber,
}

impl SvmLoss {
    /// (ℓ(m), ℓ'(m), ℓ''(m)) as functions of the margin m = y<θ, x>.
    pub fn eval(self, m: f64) -> (f64, f64, f64) {
        match self {
            SvmLoss::Hinge2 => {
                // The kink at m = 1 counts as inactive.
                if m < 1.0 {
                    let d = 1.0 - m;
                    (d * d, -2.0 * d, 2.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            SvmLoss::SmoothedHuber => {
                if m > 1.5 {
                    (0.0, 0.0, 0.0)
                } else if m >= 0.5 {
                    let d = 1.5 - m;
                    (0.5 * d * d, -d, 1.0)
                } else {
                    (1.0 - m, -1.0, 0.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Ols,
    Logistic,
    Poisson,
    SvmHinge2,
    SvmSmoothedHuber,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 5] = [
        ObjectiveKind::Ols,
        ObjectiveKind::Logistic,
        ObjectiveKind::Poisson,
        ObjectiveKind::SvmHinge2,
        ObjectiveKind::SvmSmoothedHuber,
    ];

    pub fn is_svm(self) -> bool {
        matches!(self, ObjectiveKind::SvmHinge2 | ObjectiveKind::SvmSmoothedHuber)
    }

    pub fn is_quadratic(self) -> bool {
        matches!(self, ObjectiveKind::Ols)
    }

    fn link(self) -> Option<GlmLink> {
        match self {
            ObjectiveKind::Ols => Some(GlmLink::Ols),
            ObjectiveKind::Logistic => Some(GlmLink::Logistic),
            ObjectiveKind::Poisson => Some(GlmLink::Poisson),
            _ => None,
        }
    }

    fn svm_loss(self) -> Option<SvmLoss> {
        match self {
            ObjectiveKind::SvmHinge2 => Some(SvmLoss::Hinge2),
            ObjectiveKind::SvmSmoothedHuber => Some(SvmLoss::SmoothedHuber),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Ols => "ols",
            ObjectiveKind::Logistic => "logistic",
            ObjectiveKind::Poisson => "poisson",
            ObjectiveKind::SvmHinge2 => "svm-hinge2",
            ObjectiveKind::SvmSmoothedHuber => "svm-smoothed-huber",
        }
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectiveKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown objective kind '{s}'")))
    }
}

/// Constants entering the convergence coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// K: bound on every per-sample Hessian norm.
    pub hessian_bound: f64,
    /// M: Lipschitz constant of the (sub-sampled) Hessian. Infinite when the
    /// objective has no such constant.
    pub hessian_lipschitz: f64,
    /// R_x = max_i ‖x_i‖².
    pub radius_sq: f64,
    /// L: Lipschitz constant of Φ⁽²⁾ (GLMs only).
    pub link_lipschitz: Option<f64>,
    /// False when the constants are surrogates outside the theory's assumptions.
    pub covered: bool,
}

/// A finite-sum objective over a shared dataset.
#[derive(Debug, Clone)]
pub struct Objective {
    data: Arc<Dataset>,
    kind: ObjectiveKind,
    penalty: f64,
}

impl Objective {
    /// Builds an objective. `svm_penalty` is the C > 0 of the SVM kinds and is
    /// ignored otherwise.
    ///
    /// Logistic labels in {-1, +1} are mapped to {0, 1}; SVM labels must be
    /// in {-1, +1}.
    pub fn new(data: impl Into<Arc<Dataset>>, kind: ObjectiveKind, svm_penalty: f64) -> Result<Self> {
        let mut data: Arc<Dataset> = data.into();
        match kind {
            ObjectiveKind::Logistic => {
                let mapped = data.to_binary01();
                if mapped.y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::InvalidInput(
                        "logistic responses must lie in [0, 1] (or be ±1 labels)".into(),
                    ));
                }
                if mapped.y != data.y {
                    data = Arc::new(mapped);
                }
            }
            ObjectiveKind::Poisson => {
                if data.y.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidInput("Poisson responses must be non-negative".into()));
                }
            }
            ObjectiveKind::SvmHinge2 | ObjectiveKind::SvmSmoothedHuber => {
                if let Some(i) = data.y.iter().position(|&v| v != 1.0 && v != -1.0) {
                    return Err(Error::InvalidInput(format!(
                        "SVM labels must be ±1, row {i} has {}",
                        data.y[i]
                    )));
                }
                if !(svm_penalty > 0.0 && svm_penalty.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "SVM penalty C must be positive, got {svm_penalty}"
                    )));
                }
            }
            ObjectiveKind::Ols => {}
        }
        Ok(Self {
            data,
            kind,
            penalty: if kind.is_svm() { svm_penalty } else { 0.0 },
        })
    }

    pub fn glm(data: impl Into<Arc<Dataset>>, link: GlmLink) -> Result<Self> {
        let kind = match link {
            GlmLink::Ols => ObjectiveKind::Ols,
            GlmLink::Logistic => ObjectiveKind::Logistic,
            GlmLink::Poisson => ObjectiveKind::Poisson,
        };
        Self::new(data, kind, 0.0)
    }

    pub fn svm(data: impl Into<Arc<Dataset>>, loss: SvmLoss, c: f64) -> Result<Self> {
        let kind = match loss {
            SvmLoss::Hinge2 => ObjectiveKind::SvmHinge2,
            SvmLoss::SmoothedHuber => ObjectiveKind::SvmSmoothedHuber,
        };
        Self::new(data, kind, c)
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn dim(&self) -> usize {
        self.data.p
    }

    pub fn svm_penalty(&self) -> Option<f64> {
        self.kind.is_svm().then_some(self.penalty)
    }

    fn check_theta(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.data.p {
            return Err(Error::InvalidInput(format!(
                "parameter has length {}, expected {}",
                theta.len(),
                self.data.p
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("parameter has non-finite entries".into()));
        }
        Ok(())
    }

    #[inline]
    fn predictor(&self, i: usize, theta: &[f64]) -> Result<f64> {
        let z = dot(self.data.row(i), theta);
        if self.kind == ObjectiveKind::Poisson && z > POISSON_MAX_PREDICTOR {
            return Err(Error::Overflow { index: i, value: z });
        }
        Ok(z)
    }

    /// (g_i, g_i', g_i'') of the per-sample data term at predictor z.
    #[inline]
    fn data_term(&self, i: usize, z: f64) -> (f64, f64, f64) {
        let y = self.data.y[i];
        if let Some(link) = self.kind.link() {
            (link.phi(z) - y * z, link.phi1(z) - y, link.phi2(z))
        } else {
            let loss = self.kind.svm_loss().expect("svm kind");
            let scale = 0.5 * self.data.n as f64 * self.penalty;
            let (l, d1, d2) = loss.eval(y * z);
            (scale * l, scale * d1 * y, scale * d2)
        }
    }

    fn has_ridge(&self) -> bool {
        self.kind.is_svm()
    }

    /// f(θ) = (1/n) Σ f_i(θ).
    pub fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        self.check_theta(theta)?;
        let th = theta.as_slice();
        let mut acc = CompensatedSum::new();
        for i in 0..self.data.n {
            let z = self.predictor(i, th)?;
            acc.add(self.data_term(i, z).0);
        }
        let mut f = acc.value() / self.data.n as f64;
        if self.has_ridge() {
            f += 0.5 * theta.norm_squared();
        }
        Ok(f)
    }

    /// ∇f(θ).
    pub fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.value_and_gradient(theta)?.1)
    }

    /// (f(θ), ∇f(θ)) in a single pass over the data.
    pub fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check_theta(theta)?;
        let n = self.data.n;
        let th = theta.as_slice();
        let mut fsum = CompensatedSum::new();
        let mut gsum = CompensatedVec::zeros(self.data.p);
        for i in 0..n {
            let z = self.predictor(i, th)?;
            let (g, g1, _) = self.data_term(i, z);
            fsum.add(g);
            if g1 != 0.0 {
                gsum.add_scaled(g1, self.data.row(i));
            }
        }
        let inv_n = 1.0 / n as f64;
        let mut f = fsum.value() * inv_n;
        let mut grad = DVector::from_vec(gsum.into_vec()) * inv_n;
        if self.has_ridge() {
            f += 0.5 * theta.norm_squared();
            grad += theta;
        }
        Ok((f, grad))
    }

    /// ∇f_i(θ) for a single sample.
    pub fn sample_gradient(&self, i: usize, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_index(i)?;
        let z = self.predictor(i, theta.as_slice())?;
        let (_, g1, _) = self.data_term(i, z);
        let mut g = DVector::from_column_slice(self.data.row(i)) * g1;
        if self.has_ridge() {
            g += theta;
        }
        Ok(g)
    }

    /// ∇²f_i(θ) for a single sample.
    pub fn sample_hessian(&self, i: usize, theta: &DVector<f64>) -> Result<SymMatrix> {
        self.subsampled_hessian(theta, &[i])
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.data.n {
            return Err(Error::InvalidInput(format!(
                "sample index {i} out of range for n = {}",
                self.data.n
            )));
        }
        Ok(())
    }

    /// H_S(θ) = (1/|S|) Σ_{i∈S} ∇²f_i(θ). `sample` is a multiset of indices.
    pub fn subsampled_hessian(&self, theta: &DVector<f64>, sample: &[usize]) -> Result<SymMatrix> {
        self.check_theta(theta)?;
        if sample.is_empty() {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        let p = self.data.p;
        let th = theta.as_slice();
        let mut acc = CompensatedOuter::new(p);
        for &i in sample {
            self.check_index(i)?;
            let z = self.predictor(i, th)?;
            let (_, _, g2) = self.data_term(i, z);
            if g2 != 0.0 {
                acc.add_outer(g2, self.data.row(i));
            }
        }
        let inv = 1.0 / sample.len() as f64;
        let mut h = acc.into_dense();
        h.iter_mut().for_each(|v| *v *= inv);
        if self.has_ridge() {
            for j in 0..p {
                h[j * p + j] += 1.0;
            }
        }
        Ok(SymMatrix::from_row_major_unchecked(p, h))
    }

    /// Full Hessian ∇²f(θ).
    pub fn hessian(&self, theta: &DVector<f64>) -> Result<SymMatrix> {
        let all: Vec<usize> = (0..self.data.n).collect();
        self.subsampled_hessian(theta, &all)
    }

    /// Support vectors {i : y_i<θ, x_i> < 1}; empty for GLMs.
    pub fn support_vectors(&self, theta: &DVector<f64>) -> Vec<usize> {
        if !self.kind.is_svm() {
            return Vec::new();
        }
        (0..self.data.n)
            .filter(|&i| self.data.y[i] * dot(self.data.row(i), theta.as_slice()) < 1.0)
            .collect()
    }

    /// Problem constants. `history` is only consulted for the Poisson
    /// objective, whose K and M are taken over the box |<x_i, θ>| ≤ b spanned
    /// by the given iterates (b = 0 when empty).
    pub fn problem_constants(&self, history: &[DVector<f64>]) -> ProblemConstants {
        let r_x = self.data.max_row_norm_sq();
        match self.kind.link() {
            Some(link) => {
                let b = if link == GlmLink::Poisson {
                    history
                        .iter()
                        .flat_map(|th| {
                            (0..self.data.n).map(move |i| dot(self.data.row(i), th.as_slice()).abs())
                        })
                        .fold(0.0, f64::max)
                } else {
                    0.0
                };
                glm_constants(link, r_x, b)
            }
            None => ProblemConstants {
                hessian_bound: 1.0 + self.data.n as f64 * self.penalty * r_x,
                hessian_lipschitz: f64::INFINITY,
                radius_sq: r_x,
                link_lipschitz: None,
                covered: false,
            },
        }
    }
}

/// GLM constants for covariates with ‖x‖² ≤ r_x and predictors in [−b, b]:
/// K = max(1, sup Φ⁽²⁾)·R_x, M = L·R_x^{3/2}.
pub fn glm_constants(link: GlmLink, r_x: f64, b: f64) -> ProblemConstants {
    let l = link.phi3_sup(b);
    ProblemConstants {
        hessian_bound: link.phi2_sup(b).max(1.0) * r_x,
        hessian_lipschitz: l * r_x.powf(1.5),
        radius_sq: r_x,
        link_lipschitz: Some(l),
        covered: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::from_rows(
            &[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, -0.7]],
            vec![1.0, -1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn logistic_at_zero_is_log2() {
        let obj = Objective::glm(tiny(), GlmLink::Logistic).unwrap();
        let f = obj.value(&DVector::zeros(2)).unwrap();
        assert!((f - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_gradient_at_zero() {
        let obj = Objective::glm(tiny(), GlmLink::Logistic).unwrap();
        let g = obj.gradient(&DVector::zeros(2)).unwrap();
        // labels mapped to (1, 0, 1)
        let y = [1.0, 0.0, 1.0];
        let ds = tiny();
        for j in 0..2 {
            let want: f64 = (0..3).map(|i| (0.5 - y[i]) * ds.row(i)[j]).sum::<f64>() / 3.0;
            assert!((g[j] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn svm_at_zero() {
        let c = 0.7;
        let obj = Objective::svm(tiny(), SvmLoss::Hinge2, c).unwrap();
        let th = DVector::zeros(2);
        assert!((obj.value(&th).unwrap() - c * 3.0 / 2.0).abs() < 1e-14);
        let g = obj.gradient(&th).unwrap();
        let ds = tiny();
        for j in 0..2 {
            let want: f64 = -c * (0..3).map(|i| ds.labels()[i] * ds.row(i)[j]).sum::<f64>();
            assert!((g[j] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn ols_single_point() {
        let ds = Dataset::from_rows(&[vec![1.0]], vec![3.0]).unwrap();
        let obj = Objective::glm(ds, GlmLink::Ols).unwrap();
        assert_eq!(obj.value(&DVector::from_element(1, 1.0)).unwrap(), -2.0);
    }

    #[test]
    fn ols_hessian_is_two_xtx_over_n() {
        let ds = tiny();
        let obj = Objective::glm(ds.clone(), GlmLink::Ols).unwrap();
        let h = obj.hessian(&DVector::from_vec(vec![0.3, -2.0])).unwrap();
        let x = ds.design_matrix();
        let want = x.transpose() * &x * (2.0 / 3.0);
        assert!((h.as_matrix() - want).amax() < 1e-14);
    }

    #[test]
    fn logistic_hessian_at_zero() {
        let ds = tiny();
        let obj = Objective::glm(ds.clone(), GlmLink::Logistic).unwrap();
        let h = obj.hessian(&DVector::zeros(2)).unwrap();
        let x = ds.design_matrix();
        let want = x.transpose() * &x * (1.0 / 12.0);
        assert!((h.as_matrix() - want).amax() < 1e-15);
    }

    #[test]
    fn svm_full_hessian_is_unnormalized() {
        let c = 0.5;
        let ds = tiny();
        let obj = Objective::svm(ds.clone(), SvmLoss::Hinge2, c).unwrap();
        let th = DVector::from_vec(vec![0.4, 0.1]);
        let sv = obj.support_vectors(&th);
        let mut want = DMatrix::<f64>::identity(2, 2);
        for &i in &sv {
            let x = DVector::from_column_slice(ds.row(i));
            want += &x * x.transpose() * c;
        }
        let h = obj.hessian(&th).unwrap();
        assert!((h.as_matrix() - want).amax() < 1e-14);
    }

    #[test]
    fn empty_sample_rejected() {
        let obj = Objective::glm(tiny(), GlmLink::Ols).unwrap();
        assert_eq!(
            obj.subsampled_hessian(&DVector::zeros(2), &[]).unwrap_err().kind(),
            "invalid-input"
        );
    }

    #[test]
    fn poisson_overflow_names_index() {
        let ds = Dataset::from_rows(&[vec![1.0], vec![1000.0]], vec![0.0, 1.0]).unwrap();
        let obj = Objective::glm(ds, GlmLink::Poisson).unwrap();
        match obj.value(&DVector::from_element(1, 1.0)) {
            Err(Error::Overflow { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn svm_labels_validated() {
        let ds = Dataset::from_rows(&[vec![1.0]], vec![0.5]).unwrap();
        assert!(Objective::svm(ds, SvmLoss::Hinge2, 1.0).is_err());
        assert!(Objective::svm(tiny(), SvmLoss::Hinge2, 0.0).is_err());
    }

    #[test]
    fn smoothed_huber_is_c1_at_breakpoints() {
        let loss = SvmLoss::SmoothedHuber;
        for b in [0.5, 1.5] {
            let h = 1e-12;
            let (lo, dlo, _) = loss.eval(b - h);
            let (hi, dhi, _) = loss.eval(b + h);
            assert!((lo - hi).abs() < 1e-9, "value jump at {b}");
            assert!((dlo - dhi).abs() < 1e-9, "derivative jump at {b}");
        }
        assert_eq!(loss.eval(2.0), (0.0, 0.0, 0.0));
        assert_eq!(loss.eval(1.0).0, 0.125);
        assert_eq!(loss.eval(0.0), (1.0, -1.0, 0.0));
    }

    #[test]
    fn hinge2_kink_is_inactive() {
        assert_eq!(SvmLoss::Hinge2.eval(1.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constants() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]], vec![1.0, 2.0]).unwrap();
        let ols = Objective::glm(ds.clone(), GlmLink::Ols).unwrap().problem_constants(&[]);
        assert_eq!(ols.hessian_bound, 10.0);
        assert_eq!(ols.hessian_lipschitz, 0.0);
        let lr = glm_constants(GlmLink::Logistic, 4.0, 0.0);
        assert_eq!(lr.hessian_bound, 4.0);
        assert!((lr.hessian_lipschitz - 8.0 / (6.0 * 3f64.sqrt())).abs() < 1e-15);
        let po = glm_constants(GlmLink::Poisson, 3.0, 2.0);
        assert!((po.hessian_bound - 2f64.exp() * 3.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_constants_use_history_box() {
        let ds = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]], vec![1.0, 2.0]).unwrap();
        let obj = Objective::glm(ds, GlmLink::Poisson).unwrap();
        let c = obj.problem_constants(&[DVector::from_vec(vec![0.5, -0.25])]);
        // b = max(|0.5|, |-0.5|) = 0.5, R_x = 4
        assert!((c.hessian_bound - 0.5f64.exp() * 4.0).abs() < 1e-12);
    }

    #[test]
    fn label_maps() {
        let ds = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![0.0, 1.0]).unwrap();
        assert_eq!(ds.to_signed().labels(), &[-1.0, 1.0]);
        assert_eq!(ds.to_signed().to_binary01().labels(), &[0.0, 1.0]);
    }

    #[test]
    fn shape_errors() {
        assert_eq!(Dataset::new(2, 2, vec![0.0; 3], vec![0.0; 2]).unwrap_err().kind(), "shape");
        assert_eq!(
            Dataset::new(1, 1, vec![f64::NAN], vec![0.0]).unwrap_err().kind(),
            "invalid-input"
        );
    }
}
