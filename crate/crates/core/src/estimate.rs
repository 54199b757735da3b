//! Monte Carlo means with standard errors.

use nalgebra::DMatrix;

/// Sum in a fixed pairwise order, independent of how the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Sample mean with standard error `sd / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub nsamples: usize,
}

impl EstimatorResult {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 1, "need at least one sample");
        let mean = pairwise_sum(xs) / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt()
        };
        EstimatorResult {
            mean,
            stderr,
            nsamples: n,
        }
    }

    /// `mean / stderr`, infinite when the spread vanishes but the mean does not.
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            self.mean / self.stderr
        } else if self.mean == 0.0 {
            0.0
        } else {
            self.mean.signum() * f64::INFINITY
        }
    }

    /// `|mean| <= k * stderr`.
    pub fn within(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.stderr
    }
}

/// Entry-wise estimator for matrix-valued samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub mean: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    pub nsamples: usize,
}

impl MatrixEstimate {
    pub fn from_samples(xs: &[DMatrix<f64>]) -> Self {
        assert!(!xs.is_empty(), "need at least one sample");
        let (r, c) = xs[0].shape();
        let mut mean = DMatrix::zeros(r, c);
        let mut stderr = DMatrix::zeros(r, c);
        let mut buf = vec![0.0; xs.len()];
        for i in 0..r {
            for j in 0..c {
                for (b, x) in buf.iter_mut().zip(xs) {
                    *b = x[(i, j)];
                }
                let e = EstimatorResult::from_samples(&buf);
                mean[(i, j)] = e.mean;
                stderr[(i, j)] = e.stderr;
            }
        }
        MatrixEstimate {
            mean,
            stderr,
            nsamples: xs.len(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> EstimatorResult {
        EstimatorResult {
            mean: self.mean[(i, j)],
            stderr: self.stderr[(i, j)],
            nsamples: self.nsamples,
        }
    }

    /// Frobenius norm of the entry-wise standard errors.
    pub fn stderr_norm(&self) -> f64 {
        self.stderr.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let e = EstimatorResult::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.stderr - sd / 2.0).abs() < 1e-15);
        assert_eq!(e.nsamples, 4);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
