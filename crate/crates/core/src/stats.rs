//! Binomial proportion intervals.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // exact endpoints at the boundary; rounding would otherwise leave ~1e-18
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// A proportion with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub fraction: f64,
    pub interval: (f64, f64),
}

impl Proportion {
    pub fn new(successes: usize, trials: usize) -> Self {
        Self {
            successes,
            trials,
            fraction: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            interval: wilson(successes, trials, Z95),
        }
    }

    pub fn excludes_zero(&self) -> bool {
        self.interval.0 > 0.0
    }
}
