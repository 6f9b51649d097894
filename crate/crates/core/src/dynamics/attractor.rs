use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::shadow::{apt_window_distance, mix_seed, ShadowOptions};
use crate::dynamics::solver::{euler_solve, SelectionPolicy};
use crate::dynamics::trajectory::Trajectory;
use crate::error::{domain, Result};
use crate::geometry::{axpy, dist, norm, sub, Polytope, SetValuedMap};

/// Grid cells (side `grid_eps`) visited by `X` during the last
/// `tail_fraction` of its time span, returned as cell centers.
pub fn limit_set(x: &Trajectory, tail_fraction: f64, grid_eps: f64) -> Result<Vec<Vec<f64>>> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return domain("tail fraction must lie in (0, 1)");
    }
    if !(grid_eps > 0.0) {
        return domain("grid_eps must be positive");
    }
    let from = x.end() - tail_fraction * (x.end() - x.start());
    let cell = |p: &[f64]| -> Vec<i64> { p.iter().map(|c| (c / grid_eps).floor() as i64).collect() };
    let mut cells = BTreeSet::new();
    cells.insert(cell(&x.eval(from)?));
    let range = x.knot_range(from, x.end());
    let mut prev = x.eval(from)?;
    for k in range {
        let p = &x.points()[k];
        // sub-sample long segments so no crossed cell is skipped
        let n = (dist(&prev, p) / (0.5 * grid_eps)).ceil().max(1.0) as usize;
        for j in 1..=n {
            let s = j as f64 / n as f64;
            let q: Vec<f64> = prev.iter().zip(p).map(|(a, b)| a + s * (b - a)).collect();
            cells.insert(cell(&q));
        }
        prev = p.clone();
    }
    Ok(cells
        .into_iter()
        .map(|c| c.iter().map(|&i| (i as f64 + 0.5) * grid_eps).collect())
        .collect())
}

/// Attractor candidate `A` with basin probe `K` and certificate constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorSpec {
    pub attractor: Polytope,
    pub basin_probe: Polytope,
    pub alpha: f64,
    pub t_cert: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub certified: bool,
    pub entered_k: bool,
    /// Time at which the examined windows start.
    pub entry_time: Option<f64>,
    /// Max window distance over the windows from `entry_time`.
    pub d_value: Option<f64>,
    /// Largest distance to `A` of `X(t* + kT)`, `k ≥ 1`.
    pub tail_distance: Option<f64>,
    /// Certified but the tail left `N_{2α}(A)`: the constants are wrong.
    pub contradiction: bool,
}

/// Attractor certificate: `X(t*) ∈ K` and window distance `< α` on every
/// window of length `T` from `t*` imply the tail stays in `N_{2α}(A)`.
///
/// Candidate entry times are knots inside `K`, spaced at least `T/2` apart;
/// the first certified candidate wins. The containment claim is then checked
/// on the window boundaries.
pub fn certificate_check(
    x: &Trajectory,
    map: &SetValuedMap,
    spec: &AttractorSpec,
    opts: &ShadowOptions,
) -> Result<Certificate> {
    let period = spec.t_cert;
    if !(period > 0.0) || x.end() - x.start() < period {
        return domain(format!(
            "trajectory span {} shorter than certificate horizon {period}",
            x.end() - x.start()
        ));
    }
    let mut entered = false;
    let mut best: Option<(f64, f64)> = None;
    let mut last_candidate = f64::NEG_INFINITY;
    for (t, p) in x.times().iter().zip(x.points()) {
        if t + period > x.end() + 1e-12 {
            break;
        }
        if !spec.basin_probe.contains(p, 1e-9)? {
            continue;
        }
        entered = true;
        if *t < last_candidate + 0.5 * period {
            continue;
        }
        last_candidate = *t;
        let windows = ((x.end() - t) / period + 1e-9).floor() as usize;
        let mut d = 0.0f64;
        for k in 0..windows {
            let o = ShadowOptions {
                seed: mix_seed(opts.seed, k as u64),
                ..*opts
            };
            d = d.max(apt_window_distance(x, map, t + k as f64 * period, period, &o)?);
            if d >= spec.alpha {
                break;
            }
        }
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((*t, d));
        }
        if d < spec.alpha {
            break;
        }
    }
    let Some((t_star, d_value)) = best else {
        return Ok(Certificate {
            certified: false,
            entered_k: entered,
            entry_time: None,
            d_value: None,
            tail_distance: None,
            contradiction: false,
        });
    };
    let certified = d_value < spec.alpha;
    let mut tail = 0.0f64;
    let mut k = 1;
    while t_star + k as f64 * period <= x.end() + 1e-12 {
        let p = x.eval((t_star + k as f64 * period).min(x.end()))?;
        tail = tail.max(spec.attractor.distance(&p)?);
        k += 1;
    }
    Ok(Certificate {
        certified,
        entered_k: true,
        entry_time: Some(t_star),
        d_value: Some(d_value),
        tail_distance: Some(tail),
        contradiction: certified && tail > 2.0 * spec.alpha,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub h: f64,
    /// Random bang-bang solutions per start point.
    pub samples: usize,
    pub seed: u64,
    /// Candidate `α` values, tried in ascending order.
    pub alphas: Vec<f64>,
    /// Candidate `T` values, tried in ascending order.
    pub times: Vec<f64>,
    /// Interior sample points drawn from `K` (besides its vertices).
    pub interior_points: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            h: 0.01,
            samples: 4,
            seed: 0,
            alphas: vec![0.05, 0.1, 0.2, 0.25],
            times: (1..=20).map(|k| 0.5 * k as f64).collect(),
            interior_points: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Smallest `(α, T)` found (smallest `T` first, then smallest `α`).
    pub constants: Option<(f64, f64)>,
    pub solutions: usize,
    /// Start points skipped because `F` could not be evaluated there.
    pub skipped_starts: usize,
}

/// Heuristic search for certificate constants `(α, T)`.
///
/// For each `α`, start points are drawn from `W = N_α(A ∪ K)` (vertices and
/// random points of `K` and `A`, pushed outward by up to `α`), and bundles
/// of Euler solutions are integrated to `max(T) + max(T)`. A pair is
/// accepted when every solution stays in `N_α(A)` from `T` on. Failure is
/// inconclusive, never a refutation.
pub fn calibrate_certificate(
    map: &SetValuedMap,
    attractor: &Polytope,
    probe: &Polytope,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    let mut alphas = opts.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    let mut times = opts.times.clone();
    times.sort_by(f64::total_cmp);
    let Some(&t_max) = times.last() else {
        return domain("calibration needs candidate times");
    };
    if alphas.is_empty() {
        return domain("calibration needs candidate alphas");
    }
    let run_to = 2.0 * t_max;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let random_hull_point = |poly: &Polytope, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let w: Vec<f64> = poly.vertices().iter().map(|_| -rng.random::<f64>().ln()).collect();
        let total: f64 = w.iter().sum();
        let mut p = vec![0.0; poly.dim()];
        for (v, wi) in poly.vertices().iter().zip(&w) {
            for (pi, vi) in p.iter_mut().zip(v) {
                *pi += wi / total * vi;
            }
        }
        p
    };

    // last time each solution is outside N_α(A), per α
    let mut worst_exit = vec![0.0f64; alphas.len()];
    let mut solutions = 0;
    let mut skipped = 0;
    for (ai, &alpha) in alphas.iter().enumerate() {
        let mut core: Vec<Vec<f64>> = probe.vertices().to_vec();
        core.extend(attractor.vertices().iter().cloned());
        for _ in 0..opts.interior_points {
            core.push(random_hull_point(probe, &mut rng));
        }
        let centroid = random_hull_point(probe, &mut rng);
        let mut starts = core.clone();
        for p in &core {
            // outward radial push, then an arbitrary-direction push
            let out = sub(p, &centroid);
            let n = norm(&out);
            if n > 0.0 {
                starts.push(axpy(p, alpha * rng.random::<f64>() / n, &out));
            }
            let dir: Vec<f64> = p.iter().map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let dn = norm(&dir);
            if dn > 0.0 {
                starts.push(axpy(p, alpha * rng.random::<f64>() / dn, &dir));
            }
        }
        for (si, x0) in starts.iter().enumerate() {
            if map.evaluate(x0).is_err() {
                skipped += 1;
                continue;
            }
            for j in 0..opts.samples.max(1) {
                let policy =
                    SelectionPolicy::random_vertex(mix_seed(opts.seed, (ai * 1_000_003 + si * 101 + j) as u64));
                let z = match euler_solve(map, x0, run_to, opts.h, &policy) {
                    Ok(z) => z,
                    Err(_) => {
                        skipped += 1;
                        break;
                    }
                };
                solutions += 1;
                let mut last_out = 0.0f64;
                for (t, p) in z.times().iter().zip(z.points()) {
                    if attractor.distance(p)? > alpha {
                        last_out = *t;
                    }
                }
                worst_exit[ai] = worst_exit[ai].max(last_out);
            }
        }
    }
    let constants = times.iter().find_map(|&t| {
        alphas
            .iter()
            .zip(&worst_exit)
            .find(|(_, &exit)| exit < t && exit < run_to)
            .map(|(&a, _)| (a, t))
    });
    Ok(Calibration {
        constants,
        solutions,
        skipped_starts: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> SetValuedMap {
        SetValuedMap::singleton(1, 1.0, |x| vec![-x[0]])
    }

    #[test]
    fn convergent_path_has_single_cell() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let pts = times.iter().map(|t| vec![0.3 + (-t).exp(), 0.7]).collect();
        let x = Trajectory::new(times, pts).unwrap();
        let cells = limit_set(&x, 0.2, 0.01).unwrap();
        assert_eq!(cells.len(), 1);
        assert!(dist(&cells[0], &[0.305, 0.705]) < 1e-12);
    }

    #[test]
    fn circular_orbit_is_covered() {
        let times: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.01).collect();
        let pts = times.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        let x = Trajectory::new(times, pts).unwrap();
        let eps = 0.05;
        let cells = limit_set(&x, 0.5, eps).unwrap();
        for k in 0..360 {
            let a = (k as f64).to_radians();
            let p = [a.cos(), a.sin()];
            let near = cells.iter().map(|c| dist(c, &p)).fold(f64::INFINITY, f64::min);
            assert!(near <= eps, "angle {k}: nearest cell {near}");
        }
        for c in &cells {
            assert!((norm(c) - 1.0).abs() <= eps);
        }
    }

    #[test]
    fn linear_flow_certificate() {
        let h = 0.01;
        let x = euler_solve(&decay(), &[0.5], 12.0, h, &SelectionPolicy::SupportDirection(vec![1.0]))
            .unwrap();
        let spec = AttractorSpec {
            attractor: Polytope::point(vec![0.0]).unwrap(),
            basin_probe: Polytope::new(vec![vec![-1.0], vec![1.0]]).unwrap(),
            alpha: 0.2,
            t_cert: 3.0,
        };
        let c = certificate_check(&x, &decay(), &spec, &ShadowOptions { bundle: 2, h, seed: 3 }).unwrap();
        assert!(c.certified && c.entered_k && !c.contradiction, "{c:?}");
        assert!(c.tail_distance.unwrap() <= 0.4);
    }

    #[test]
    fn constant_outside_basin_never_enters() {
        let x = Trajectory::new(vec![0.0, 5.0], vec![vec![3.0], vec![3.0]]).unwrap();
        let spec = AttractorSpec {
            attractor: Polytope::point(vec![0.0]).unwrap(),
            basin_probe: Polytope::new(vec![vec![-1.0], vec![1.0]]).unwrap(),
            alpha: 0.2,
            t_cert: 3.0,
        };
        let c = certificate_check(&x, &decay(), &spec, &ShadowOptions::default()).unwrap();
        assert!(!c.entered_k && !c.certified);
        let short = Trajectory::new(vec![0.0, 1.0], vec![vec![0.0], vec![0.0]]).unwrap();
        assert!(certificate_check(&short, &decay(), &spec, &ShadowOptions::default()).is_err());
    }

    #[test]
    fn calibration_for_linear_flow() {
        let cal = calibrate_certificate(
            &decay(),
            &Polytope::point(vec![0.0]).unwrap(),
            &Polytope::new(vec![vec![-1.0], vec![1.0]]).unwrap(),
            &CalibrationOptions::default(),
        )
        .unwrap();
        let (alpha, t) = cal.constants.expect("linear flow must calibrate");
        assert!(alpha <= 0.25 && t <= 3.0, "({alpha}, {t})");
    }

    #[test]
    fn non_invariant_target_fails_calibration() {
        let cal = calibrate_certificate(
            &decay(),
            &Polytope::point(vec![1.0]).unwrap(),
            &Polytope::new(vec![vec![0.9], vec![1.1]]).unwrap(),
            &CalibrationOptions::default(),
        )
        .unwrap();
        assert_eq!(cal.constants, None);
    }
}
