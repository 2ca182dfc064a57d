//! Index-set generators for the two sub-sampling schemes.
//!
//! * Independent (S1): a fresh uniform sample every iteration, drawn from a
//!   pseudorandom stream keyed by `(seed, t)`.
//! * Sequentially dependent (S2): a fixed sample, or a growing sample that
//!   adds previously unused indices each iteration. The distribution depends
//!   only on the seed, never on the data.
//!
//! Every generator is a pure function of `(scheme, t, n)`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream id reserved for schemes whose draw does not depend on t.
const STATIC_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleScheme {
    /// S1: independent uniform sample of `size` indices per iteration.
    Independent {
        size: usize,
        #[serde(default)]
        replacement: bool,
        #[serde(default)]
        seed: u64,
    },
    /// S2: the same uniform sample at every iteration.
    Fixed {
        size: usize,
        #[serde(default)]
        seed: u64,
    },
    /// S2: S_0 of size `initial`, then `increment` new indices per iteration.
    Growing {
        initial: usize,
        /// Defaults to ⌈initial/2⌉.
        #[serde(default)]
        increment: Option<usize>,
        /// Draw new indices from the unused pool (default). When false the
        /// increments are drawn uniformly from all of [n] and may repeat.
        #[serde(default = "default_true")]
        cover_unused: bool,
        #[serde(default)]
        seed: u64,
    },
}

fn default_true() -> bool {
    true
}

/// Scheme family, used in coefficient reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeFamily {
    S1,
    S2,
}

impl SampleScheme {
    pub fn independent(size: usize, seed: u64) -> Self {
        SampleScheme::Independent {
            size,
            replacement: false,
            seed,
        }
    }

    pub fn fixed(size: usize, seed: u64) -> Self {
        SampleScheme::Fixed { size, seed }
    }

    pub fn growing(initial: usize, seed: u64) -> Self {
        SampleScheme::Growing {
            initial,
            increment: None,
            cover_unused: true,
            seed,
        }
    }

    pub fn family(&self) -> SchemeFamily {
        match self {
            SampleScheme::Independent { .. } => SchemeFamily::S1,
            _ => SchemeFamily::S2,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            SampleScheme::Independent { seed, .. }
            | SampleScheme::Fixed { seed, .. }
            | SampleScheme::Growing { seed, .. } => seed,
        }
    }

    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            SampleScheme::Independent { seed, .. }
            | SampleScheme::Fixed { seed, .. }
            | SampleScheme::Growing { seed, .. } => *seed = new_seed,
        }
        out
    }

    fn increment(&self) -> usize {
        match *self {
            SampleScheme::Growing {
                initial, increment, ..
            } => increment.unwrap_or(initial.div_ceil(2)),
            _ => 0,
        }
    }

    /// |S_t|.
    pub fn size_at(&self, t: usize, n: usize) -> usize {
        match *self {
            SampleScheme::Independent { size, .. } | SampleScheme::Fixed { size, .. } => size,
            SampleScheme::Growing { initial, .. } => initial
                .saturating_add(self.increment().saturating_mul(t))
                .min(n.max(initial)),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidSize { requested: 0, n });
        }
        let (size, needs_cap) = match *self {
            SampleScheme::Independent {
                size, replacement, ..
            } => (size, !replacement),
            SampleScheme::Fixed { size, .. } => (size, true),
            SampleScheme::Growing { initial, .. } => (initial, true),
        };
        if size == 0 || (needs_cap && size > n) {
            return Err(Error::InvalidSize { requested: size, n });
        }
        Ok(())
    }

    /// S_t as a sorted index multiset.
    pub fn sample(&self, t: usize, n: usize) -> Result<Vec<usize>> {
        self.validate(n)?;
        let mut out = match *self {
            SampleScheme::Independent {
                size,
                replacement,
                seed,
            } => {
                let mut rng = stream(seed, t as u64);
                if replacement {
                    (0..size).map(|_| rng.random_range(0..n)).collect()
                } else {
                    index::sample(&mut rng, n, size).into_vec()
                }
            }
            SampleScheme::Fixed { size, seed } => {
                index::sample(&mut stream(seed, STATIC_STREAM), n, size).into_vec()
            }
            SampleScheme::Growing {
                initial,
                cover_unused,
                seed,
                ..
            } => {
                let size = self.size_at(t, n);
                let mut rng = stream(seed, STATIC_STREAM);
                if cover_unused {
                    // Prefixes of one seeded permutation: each S_t extends
                    // S_{t-1} by indices drawn uniformly from the unused pool.
                    let mut perm = index::sample(&mut rng, n, n).into_vec();
                    perm.truncate(size);
                    perm
                } else {
                    let mut s = index::sample(&mut rng, n, initial).into_vec();
                    let inc = self.increment();
                    for tau in 1..=t {
                        if s.len() >= size {
                            break;
                        }
                        let mut r = stream(seed, tau as u64);
                        let take = inc.min(size - s.len());
                        s.extend((0..take).map(|_| r.random_range(0..n)));
                    }
                    s
                }
            }
        };
        out.sort_unstable();
        Ok(out)
    }
}

/// Independent stream for `(seed, t)`.
pub fn stream(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}
