mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use newsamp_core::linalg::{build_scaling_matrix, spectral_norm, sym_eigen, truncated_eigen, SymMatrix};
use proptest::prelude::*;

/// Seeded PSD matrix AᵀA/m with a few rows more than columns.
fn random_psd(p: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let m = p + 3;
    let a = DMatrix::from_fn(m, p, |_, _| normal(&mut r));
    let h = a.transpose() * &a / m as f64;
    (&h + h.transpose()) * 0.5
}

fn random_sym(p: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(p, p, |_, _| normal(&mut r));
    (&a + a.transpose()) * 0.5
}

/// λ_{r+1}^{-1} I + U_r(Λ_r^{-1} − λ_{r+1}^{-1} I)U_rᵀ from the oracle eigenpairs.
fn oracle_scaling(h: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let (vals, vecs) = jacobi_eigen(h);
    let p = h.nrows();
    let mut q = DMatrix::identity(p, p) / vals[r];
    for i in 0..r {
        let u = vecs.column(i);
        q += (u * u.transpose()) * (1.0 / vals[i] - 1.0 / vals[r]);
    }
    q
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn truncated_eigen_matches_oracle() {
    let h = random_psd(8, 11);
    let (vals, vecs) = jacobi_eigen(&h);
    let tr = truncated_eigen(&SymMatrix::new(h).unwrap(), 5).unwrap();
    for i in 0..5 {
        assert!((tr.values[i] - vals[i]).abs() <= 1e-10, "{i}: {} vs {}", tr.values[i], vals[i]);
        // Compare projectors so the sign of each vector is irrelevant.
        let a = tr.vectors.column(i) * tr.vectors.column(i).transpose();
        let b = vecs.column(i) * vecs.column(i).transpose();
        assert!(max_abs(&(a - b)) <= 1e-8);
    }
}

#[test]
fn scaling_matrix_matches_oracle() {
    let h = random_psd(10, 5);
    let q = build_scaling_matrix(&SymMatrix::new(h.clone()).unwrap(), 3).unwrap();
    let err = max_abs(&(q.to_dense() - oracle_scaling(&h, 3)));
    assert!(err <= 1e-9, "entrywise error {err:e}");
}

#[test]
fn spectral_norm_matches_oracle() {
    let a = random_sym(12, 2);
    let got = spectral_norm(&SymMatrix::new(a.clone()).unwrap());
    let want = sym_norm(&a);
    assert!((got - want).abs() <= 1e-8, "{got} vs {want}");
}

#[test]
fn full_rank_threshold_inverts() {
    for seed in 0..5 {
        let h = random_psd(7, 100 + seed);
        let q = build_scaling_matrix(&SymMatrix::new(h.clone()).unwrap(), 6).unwrap();
        let inv = h.clone().try_inverse().unwrap();
        let rel = (q.to_dense() - &inv).norm() / inv.norm();
        assert!(rel <= 1e-8, "seed {seed}: {rel:e}");
    }
}

#[test]
fn apply_matches_dense_on_many_pairs() {
    let mut r = rng(77);
    for k in 0..1000u64 {
        let p = 2 + (k as usize % 9);
        let rank = 1 + (k as usize % (p - 1));
        let h = random_psd(p, 1000 + k);
        let q = build_scaling_matrix(&SymMatrix::new(h).unwrap(), rank).unwrap();
        let v = gaussian_vec(&mut r, p, 1.0);
        let got = q.apply(&v).unwrap();
        let want = q.to_dense() * &v;
        let err = (&got - &want).amax();
        assert!(err <= 1e-12 * (1.0 + want.amax()), "pair {k}: {err:e}");
    }
}

#[test]
fn eigenvectors_follow_sign_convention() {
    let eig = sym_eigen(&SymMatrix::new(random_sym(9, 4)).unwrap());
    for j in 0..9 {
        let col = eig.vectors.column(j);
        let first = col.iter().find(|x| x.abs() > 1e-12 * col.amax()).unwrap();
        assert!(*first > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Q·H has eigenvalue 1 on span(U_r) and its spectrum lies in [λ_p/λ_{r+1}, 1].
    #[test]
    fn scaled_hessian_spectrum(seed in 0u64..10_000, p in 3usize..12, r_frac in 0.0f64..1.0) {
        let r = 1 + ((p - 2) as f64 * r_frac) as usize;
        let h = random_psd(p, seed);
        let (vals, vecs) = jacobi_eigen(&h);
        let q = build_scaling_matrix(&SymMatrix::new(h.clone()).unwrap(), r).unwrap().to_dense();
        let qh = &q * &h;
        // QH is similar to H^{1/2} Q H^{1/2}, which is symmetric.
        let half = &vecs * DMatrix::from_diagonal(&DVector::from_iterator(p, vals.iter().map(|v| v.sqrt()))) * vecs.transpose();
        let sym = &half * &q * &half;
        let (mu, _) = jacobi_eigen(&((&sym + sym.transpose()) * 0.5));
        let lo = vals[p - 1] / vals[r];
        for m in &mu {
            prop_assert!(*m >= lo - 1e-8 && *m <= 1.0 + 1e-8, "eigenvalue {} outside [{}, 1]", m, lo);
        }
        for i in 0..r {
            let u = vecs.column(i).into_owned();
            let err = (&qh * &u - &u).amax();
            prop_assert!(err <= 1e-8, "QH u_{} != u_{}: {:e}", i, i, err);
        }
    }

    #[test]
    fn spectral_norm_is_largest_magnitude(seed in 0u64..10_000, p in 1usize..10) {
        let a = random_sym(p, seed);
        let got = spectral_norm(&SymMatrix::new(a.clone()).unwrap());
        prop_assert!((got - sym_norm(&a)).abs() <= 1e-8 * (1.0 + got));
    }
}
