use newsamp_core::sampling::SampleScheme;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn with_replacement_frequencies_are_uniform() {
    let n = 10;
    let scheme = SampleScheme::Independent {
        size: 10_000,
        replacement: true,
        seed: 4,
    };
    let s = scheme.sample(0, n).unwrap();
    assert_eq!(s.len(), 10_000);
    let mut counts = [0usize; 10];
    s.iter().for_each(|&i| counts[i] += 1);
    let (mean, sd) = (1000.0, (10_000.0f64 * 0.1 * 0.9).sqrt());
    for (i, c) in counts.iter().enumerate() {
        assert!((*c as f64 - mean).abs() <= 4.0 * sd, "index {i}: {c}");
    }
}

#[test]
fn draws_at_distinct_iterations_are_independent() {
    // Pair (S_t, S_{t+1}) of single draws from n = 10 over 10⁴ seeds.
    let n = 10;
    let mut cells = vec![0f64; n * n];
    for seed in 0..10_000 {
        let scheme = SampleScheme::independent(1, seed);
        let a = scheme.sample(3, n).unwrap()[0];
        let b = scheme.sample(4, n).unwrap()[0];
        cells[a * n + b] += 1.0;
    }
    let expected = 10_000.0 / (n * n) as f64;
    let stat: f64 = cells.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let chi = ChiSquared::new((n * n - 1) as f64).unwrap();
    let p_value = 1.0 - chi.cdf(stat);
    assert!(p_value > 1e-4, "chi-square {stat}, p = {p_value:e}");
}

#[test]
fn draws_are_deterministic() {
    let schemes = [
        SampleScheme::independent(50, 8),
        SampleScheme::fixed(50, 8),
        SampleScheme::growing(20, 8),
    ];
    for s in &schemes {
        for t in 0..5 {
            assert_eq!(s.sample(t, 500).unwrap(), s.sample(t, 500).unwrap());
        }
    }
    assert_ne!(
        SampleScheme::independent(50, 8).sample(0, 500).unwrap(),
        SampleScheme::independent(50, 9).sample(0, 500).unwrap()
    );
}

#[test]
fn growing_samples_are_nested_and_capped() {
    let s = SampleScheme::growing(10, 2);
    let n = 60;
    let mut prev = s.sample(0, n).unwrap();
    assert_eq!(prev.len(), 10);
    for t in 1..12 {
        let cur = s.sample(t, n).unwrap();
        assert!(prev.iter().all(|i| cur.contains(i)), "S_{} not within S_{t}", t - 1);
        assert_eq!(cur.len(), (10 + 5 * t).min(n));
        prev = cur;
    }
    assert_eq!(prev, (0..n).collect::<Vec<_>>());
}
