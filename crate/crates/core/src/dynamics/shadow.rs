use rayon::prelude::*;

use crate::dynamics::solver::{euler_solve, SelectionPolicy};
use crate::dynamics::trajectory::Trajectory;
use crate::error::{domain, Result};
use crate::geometry::{dist, SetValuedMap};

/// Solution-bundle settings for the shadowing distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowOptions {
    /// Bundle size; member 0 follows the projection of the path itself, the
    /// rest are random bang-bang selections.
    pub bundle: usize,
    /// Euler step.
    pub h: f64,
    pub seed: u64,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        Self {
            bundle: 4,
            h: 0.01,
            seed: 0,
        }
    }
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Exact sup of `‖z(s) − X(t + s)‖` over `s ∈ [0, T]`: both paths are affine
/// between their knots, so the union of knots suffices.
fn sup_gap(z: &Trajectory, x: &Trajectory, t: f64, horizon: f64) -> Result<f64> {
    let mut gap = 0.0f64;
    for (s, p) in z.times().iter().zip(z.points()) {
        gap = gap.max(dist(p, &x.eval(t + s)?));
    }
    for k in x.knot_range(t, t + horizon) {
        let s = (x.times()[k] - t).clamp(0.0, horizon);
        gap = gap.max(dist(&z.eval(s)?, &x.points()[k]));
    }
    Ok(gap)
}

/// Upper bound on `inf_z ‖z(·) − X(t + ·)‖_{[0,T]}` over solutions `z` of
/// `ż ∈ F(z)` started at `X(t)`: the minimum over a seeded solution bundle.
pub fn apt_window_distance(
    x: &Trajectory,
    map: &SetValuedMap,
    t: f64,
    horizon: f64,
    opts: &ShadowOptions,
) -> Result<f64> {
    if !(horizon > 0.0) || !x.covers(t, t + horizon) {
        return domain(format!(
            "window [{t}, {}] exceeds trajectory span [{}, {}]",
            t + horizon,
            x.start(),
            x.end()
        ));
    }
    let x0 = x.eval(t)?;
    let members = opts.bundle.max(1);
    let h = opts.h.min(horizon);
    let gaps: Result<Vec<f64>> = (0..members)
        .into_par_iter()
        .map(|i| {
            let policy = if i == 0 {
                SelectionPolicy::ProjectionOf {
                    reference: x,
                    offset: t,
                }
            } else {
                SelectionPolicy::random_vertex(mix_seed(opts.seed, i as u64))
            };
            let z = euler_solve(map, &x0, horizon, h, &policy)?;
            sup_gap(&z, x, t, horizon)
        })
        .collect();
    Ok(gaps?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Per-window distances for windows `[start + kT, start + (k+1)T]`,
/// `k = 0..k_max`.
pub fn window_distances(
    x: &Trajectory,
    map: &SetValuedMap,
    horizon: f64,
    k_max: usize,
    opts: &ShadowOptions,
) -> Result<Vec<f64>> {
    if k_max == 0 {
        return domain("need at least one window");
    }
    let start = x.start();
    if !x.covers(start, start + k_max as f64 * horizon) {
        return domain(format!(
            "{k_max} windows of length {horizon} exceed trajectory span"
        ));
    }
    (0..k_max)
        .map(|k| {
            let o = ShadowOptions {
                seed: mix_seed(opts.seed, 0x1000 + k as u64),
                ..*opts
            };
            apt_window_distance(x, map, start + k as f64 * horizon, horizon, &o)
        })
        .collect()
}

/// `d_X(T)`: the largest window distance over the first `k_max` windows of
/// length `T`, aligned on the grid `kT` from the trajectory start.
pub fn d_x(
    x: &Trajectory,
    map: &SetValuedMap,
    horizon: f64,
    k_max: usize,
    opts: &ShadowOptions,
) -> Result<f64> {
    Ok(window_distances(x, map, horizon, k_max, opts)?
        .into_iter()
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polytope;

    fn decay() -> SetValuedMap {
        SetValuedMap::singleton(1, 1.0, |x| vec![-x[0]])
    }

    #[test]
    fn euler_path_shadows_itself() {
        let h = 0.01;
        let z = euler_solve(&decay(), &[1.0], 3.0, h, &SelectionPolicy::SupportDirection(vec![1.0]))
            .unwrap();
        let opts = ShadowOptions { bundle: 2, h, seed: 1 };
        assert!(apt_window_distance(&z, &decay(), 0.5, 1.0, &opts).unwrap() <= h);
        assert!(d_x(&z, &decay(), 1.0, 3, &opts).unwrap() <= h);
    }

    #[test]
    fn exact_exponential_is_shadowed() {
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.005).collect();
        let pts = times.iter().map(|t| vec![(-t).exp()]).collect();
        let x = Trajectory::new(times, pts).unwrap();
        let h = 0.005;
        let d = apt_window_distance(&x, &decay(), 0.3, 1.0, &ShadowOptions { bundle: 1, h, seed: 0 })
            .unwrap();
        assert!(d <= h, "{d}");
    }

    #[test]
    fn slope_one_path_under_zero_map() {
        let zero = SetValuedMap::constant(Polytope::point(vec![0.0]).unwrap());
        let x = Trajectory::new(vec![0.0, 2.0], vec![vec![0.0], vec![2.0]]).unwrap();
        let d = apt_window_distance(&x, &zero, 0.5, 1.0, &ShadowOptions::default()).unwrap();
        assert!(d >= 0.1);
        assert!((d - 1.0).abs() < 1e-12);
        assert!(apt_window_distance(&x, &zero, 1.5, 1.0, &ShadowOptions::default()).is_err());
    }

    #[test]
    fn d_x_is_max_over_windows() {
        // solution on [0,1], then a constant non-equilibrium point on [1,2]
        let h = 0.01;
        let sol = euler_solve(&decay(), &[1.0], 1.0, h, &SelectionPolicy::SupportDirection(vec![1.0]))
            .unwrap();
        let mut times = sol.times().to_vec();
        let mut pts = sol.points().to_vec();
        let tail = sol.last_point().to_vec();
        times.push(2.0);
        pts.push(tail);
        let x = Trajectory::new(times, pts).unwrap();
        let opts = ShadowOptions { bundle: 3, h, seed: 5 };
        let per = window_distances(&x, &decay(), 1.0, 2, &opts).unwrap();
        let d = d_x(&x, &decay(), 1.0, 2, &opts).unwrap();
        assert_eq!(d, per[0].max(per[1]));
        assert!(per[0] <= h);
        assert!(per[1] > 0.1);
    }
}
