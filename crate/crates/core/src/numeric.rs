//! Compensated (Neumaier) accumulation for sums over samples.

/// Scalar Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Component-wise Neumaier accumulator for vectors.
#[derive(Debug, Clone)]
pub struct CompensatedVec {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    /// Adds `scale * x`.
    #[inline]
    pub fn add_scaled(&mut self, scale: f64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.sum.len());
        for ((s, c), &xj) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x) {
            let v = scale * xj;
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.sum
            .into_iter()
            .zip(self.comp)
            .map(|(s, c)| s + c)
            .collect()
    }
}

/// Compensated accumulator for the upper triangle of a symmetric matrix
/// built from weighted outer products `w * x x^T`.
#[derive(Debug, Clone)]
pub struct CompensatedOuter {
    p: usize,
    tri: CompensatedVec,
    scratch: Vec<f64>,
}

impl CompensatedOuter {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            tri: CompensatedVec::zeros(p * (p + 1) / 2),
            scratch: vec![0.0; p * (p + 1) / 2],
        }
    }

    #[inline]
    pub fn add_outer(&mut self, w: f64, x: &[f64]) {
        let mut k = 0;
        for i in 0..self.p {
            let wi = w * x[i];
            for &xj in &x[i..] {
                self.scratch[k] = wi * xj;
                k += 1;
            }
        }
        self.tri.add_scaled(1.0, &self.scratch);
    }

    /// Returns the full row-major p×p matrix.
    pub fn into_dense(self) -> Vec<f64> {
        let p = self.p;
        let tri = self.tri.into_vec();
        let mut out = vec![0.0; p * p];
        let mut k = 0;
        for i in 0..p {
            for j in i..p {
                out[i * p + j] = tri[k];
                out[j * p + i] = tri[k];
                k += 1;
            }
        }
        out
    }
}
