//! Test oracles independent of the library's linear algebra, plus shared
//! fixtures.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use newsamp_core::data::{generate_spiked_with_truth, LabelModel, SpikedModelSpec};
use newsamp_core::problems::{Dataset, GlmLink, Objective};
use newsamp_core::reference_solution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues in
/// descending order with matching eigenvector columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

pub fn sym_norm(a: &DMatrix<f64>) -> f64 {
    jacobi_eigen(a).0.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// ‖A‖₂ for a general square matrix, via the spectrum of AᵀA.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    let ata = a.transpose() * a;
    jacobi_eigen(&ata).0[0].max(0.0).sqrt()
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs())).unwrap();
        m.swap_rows(col, piv);
        x.swap_rows(col, piv);
        for r in col + 1..n {
            let f = m[(r, col)] / m[(col, col)];
            for c in col..n {
                m[(r, c)] -= f * m[(col, c)];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[(r, c)] * x[c]).sum();
        x[r] = (x[r] - s) / m[(r, r)];
    }
    x
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(p, |_, _| scale * normal(rng))
}

/// Box-Muller standard normal.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Random OLS instance with Gaussian design and noisy linear response.
pub fn ols_instance(n: usize, p: usize, seed: u64) -> Objective {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..n * p).map(|_| normal(&mut r)).collect();
    let beta = gaussian_vec(&mut r, p, 1.0);
    let y = (0..n)
        .map(|i| (0..p).map(|j| x[i * p + j] * beta[j]).sum::<f64>() + 0.1 * normal(&mut r))
        .collect();
    Objective::glm(Dataset::new(n, p, x, y).unwrap(), GlmLink::Ols).unwrap()
}

/// OLS minimizer from the normal equations XᵀX θ = Xᵀy/2·2, solved densely.
pub fn ols_minimizer(obj: &Objective) -> DVector<f64> {
    let ds = obj.dataset();
    let x = ds.design_matrix();
    let y = DVector::from_column_slice(ds.labels());
    // f = (1/n) Σ (z² − y z) ⇒ 2 XᵀX θ = Xᵀ y.
    solve(&(x.transpose() * &x * 2.0), &(x.transpose() * y))
}

/// Dense OLS Hessian (2/n) XᵀX.
pub fn ols_hessian(obj: &Objective) -> DMatrix<f64> {
    let x = obj.dataset().design_matrix();
    x.transpose() * &x * (2.0 / obj.n() as f64)
}

pub struct Spiked {
    pub obj: Objective,
    pub star: DVector<f64>,
    pub truth: DVector<f64>,
}

/// Spiked logistic instance (spikes 20/15/10 over floor 1) with its
/// high-precision minimizer.
pub fn spiked_logistic(n: usize, p: usize, seed: u64) -> Spiked {
    let spec = SpikedModelSpec::new(n, p, seed).with_labels(LabelModel::LogisticPlanted);
    let (ds, truth) = generate_spiked_with_truth(&spec).unwrap();
    let obj = Objective::glm(ds, GlmLink::Logistic).unwrap();
    let star = reference_solution(&obj, &DVector::zeros(p), 1e-12, 100).unwrap();
    Spiked { obj, star, truth }
}

/// Spiked OLS instance with the given spikes.
pub fn spiked_ols(n: usize, p: usize, spikes: Vec<f64>, seed: u64) -> (Objective, DVector<f64>) {
    let spec = SpikedModelSpec::new(n, p, seed)
        .with_spikes(spikes)
        .with_labels(LabelModel::LinearGaussian);
    let (ds, _) = generate_spiked_with_truth(&spec).unwrap();
    let obj = Objective::glm(ds, GlmLink::Ols).unwrap();
    let star = ols_minimizer(&obj);
    (obj, star)
}
