use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::schedule::StepSchedule;
use crate::error::{domain, Error, Result};

/// Slack allowed when evaluating exactly at the ends of the time span.
const END_SLACK: f64 = 1e-12;

/// Piecewise-affine path through knots `(t_k, x_k)` with strictly
/// increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != points.len() {
            return domain(format!(
                "trajectory needs matching nonempty times/points ({} vs {})",
                times.len(),
                points.len()
            ));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return domain("trajectory points must share a positive dimension");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("trajectory times must be strictly increasing");
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numerical("non-finite trajectory time".into()));
        }
        Ok(Self { times, points })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn last_point(&self) -> &[f64] {
        &self.points[self.points.len() - 1]
    }

    fn slack(&self) -> f64 {
        END_SLACK * (1.0 + self.end().abs())
    }

    /// Whether `[a, b]` lies inside the time span (up to rounding slack).
    pub fn covers(&self, a: f64, b: f64) -> bool {
        a >= self.start() - self.slack() && b <= self.end() + self.slack()
    }

    /// Affine interpolation at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !self.covers(t, t) {
            return domain(format!(
                "t = {t} outside trajectory span [{}, {}]",
                self.start(),
                self.end()
            ));
        }
        let t = t.clamp(self.start(), self.end());
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return Ok(self.points[0].clone());
        }
        if k >= self.times.len() {
            return Ok(self.last_point().to_vec());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let s = (t - t0) / (t1 - t0);
        let (a, b) = (&self.points[k - 1], &self.points[k]);
        Ok(a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect())
    }

    /// Indices of knots with `a ≤ t_k ≤ b`.
    pub fn knot_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = self.times.partition_point(|&s| s < a);
        let hi = self.times.partition_point(|&s| s <= b);
        lo..hi.max(lo)
    }

    /// CSV with header `t,x1,...,xm`, 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dim() {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, p) in self.times.iter().zip(&self.points) {
            out.push_str(&fmt_sig17(*t));
            for c in p {
                out.push(',');
                out.push_str(&fmt_sig17(*c));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return domain("trajectory CSV header must start with `t`");
        }
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Domain(format!("row {}: {e}", row + 2)))?;
            if vals.len() != cols.len() {
                return domain(format!("row {}: expected {} fields", row + 2, cols.len()));
            }
            times.push(vals[0]);
            points.push(vals[1..].to_vec());
        }
        Self::new(times, points)
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Scientific notation with 17 significant digits, which round-trips `f64`.
pub(crate) fn fmt_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Affine interpolated process of `iterates` on the time grid
/// `τ_0 = 0, τ_n = Σ_{i≤n} γ_i`.
pub fn interpolate(iterates: &[Vec<f64>], schedule: &StepSchedule) -> Result<Trajectory> {
    if iterates.len() < 2 {
        return domain("interpolation needs at least two iterates");
    }
    let times = schedule.times(iterates.len() - 1);
    Trajectory::new(times, iterates.to_vec())
}
