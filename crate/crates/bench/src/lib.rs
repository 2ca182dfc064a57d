//! Fixtures shared by the criterion benches.

use newsamp_core::{generate_spiked, DVector, Objective, ObjectiveKind, SpikedModelSpec};

/// Logistic objective on spiked data (spikes 20/15/10 over unit noise).
pub fn spiked_logistic(n: usize, p: usize, seed: u64) -> Objective {
    let ds = generate_spiked(&SpikedModelSpec::new(n, p, seed)).expect("valid spiked spec");
    Objective::new(ds, ObjectiveKind::Logistic, 1.0).expect("logistic objective")
}

/// A point near the bulk of the data: small and deterministic.
pub fn probe(p: usize) -> DVector<f64> {
    DVector::from_fn(p, |i, _| 0.1 * ((i % 7) as f64 - 3.0) / 3.0)
}
