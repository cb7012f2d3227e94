use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single sample.
    pub std_dev: f64,
    /// Half-width of the two-sided 95% Student-t interval on the mean.
    pub ci95: f64,
}

impl MetricStats {
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = samples.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                std_dev: f64::NAN,
                ci95: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 { v.iter().std_dev() } else { 0.0 };
        Self {
            n,
            mean,
            std_dev,
            ci95: ci95_half_width(std_dev, n),
        }
    }
}

/// `t(0.975, n-1) * s / sqrt(n)`, or 0 when fewer than two samples exist.
pub fn ci95_half_width(std_dev: f64, n: usize) -> f64 {
    if n < 2 || std_dev == 0.0 {
        return 0.0;
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * std_dev / (n as f64).sqrt()
}
