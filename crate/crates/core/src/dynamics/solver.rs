use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::trajectory::Trajectory;
use crate::error::{domain, Result};
use crate::geometry::{dist, inflate, sub, InflationParams, Polytope, SetValuedMap};

/// How an Euler step picks its velocity from `conv(F(x))`.
#[derive(Debug, Clone)]
pub enum SelectionPolicy<'a> {
    /// Random bang-bang selection: a uniform vertex index, redrawn at the
    /// jump times of a Poisson clock with `switch_rate` jumps per unit time.
    RandomVertex { seed: u64, switch_rate: f64 },
    /// Point of `conv(F(x))` closest to `target − x`.
    TowardTarget(Vec<f64>),
    /// First vertex maximizing `⟨v, d⟩`.
    SupportDirection(Vec<f64>),
    /// Projection of the reference path's secant velocity over the step,
    /// the reference being read at `offset + s`.
    ProjectionOf {
        reference: &'a Trajectory,
        offset: f64,
    },
}

impl SelectionPolicy<'_> {
    pub fn random_vertex(seed: u64) -> Self {
        SelectionPolicy::RandomVertex {
            seed,
            switch_rate: 2.0,
        }
    }
}

struct Selector<'a> {
    policy: &'a SelectionPolicy<'a>,
    rng: Option<ChaCha8Rng>,
    draw: f64,
}

impl<'a> Selector<'a> {
    fn new(policy: &'a SelectionPolicy<'a>) -> Self {
        let mut rng = match policy {
            SelectionPolicy::RandomVertex { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        let draw = rng.as_mut().map_or(0.0, |r| r.random::<f64>());
        Self { policy, rng, draw }
    }

    fn velocity(&mut self, image: &Polytope, x: &[f64], s: f64, h: f64) -> Result<Vec<f64>> {
        match self.policy {
            SelectionPolicy::RandomVertex { switch_rate, .. } => {
                let rng = self.rng.as_mut().expect("random policy carries a generator");
                if rng.random::<f64>() < (switch_rate * h).min(1.0) {
                    self.draw = rng.random::<f64>();
                }
                let verts = image.vertices();
                let idx = ((self.draw * verts.len() as f64) as usize).min(verts.len() - 1);
                Ok(verts[idx].clone())
            }
            SelectionPolicy::TowardTarget(target) => Ok(image.project(&sub(target, x))?.point),
            SelectionPolicy::SupportDirection(d) => {
                let idx = image.support_index(d)?;
                Ok(image.vertices()[idx].clone())
            }
            SelectionPolicy::ProjectionOf { reference, offset } => {
                let a = reference.eval(offset + s)?;
                let b = reference.eval(offset + s + h)?;
                let secant: Vec<f64> = b.iter().zip(&a).map(|(p, q)| (p - q) / h).collect();
                Ok(image.project(&secant)?.point)
            }
        }
    }
}

/// Explicit Euler scheme `x_{k+1} = x_k + h·v_k`, `v_k ∈ conv(F(x_k))`.
///
/// Knots sit at `kh`; when `T/h` is not an integer the final step is
/// shortened so the path ends exactly at `T`.
pub fn euler_solve(
    map: &SetValuedMap,
    x0: &[f64],
    horizon: f64,
    h: f64,
    policy: &SelectionPolicy<'_>,
) -> Result<Trajectory> {
    if !(h > 0.0) || !(horizon >= h) {
        return domain(format!("need h > 0 and T >= h (h={h}, T={horizon})"));
    }
    if x0.len() != map.dim() {
        return domain("initial point dimension mismatch");
    }
    let steps = ((horizon / h) - 1e-9).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let mut selector = Selector::new(policy);
    times.push(0.0);
    points.push(x.clone());
    for k in 0..steps {
        let s = k as f64 * h;
        let step = if k + 1 == steps { horizon - s } else { h };
        let image = map.evaluate(&x)?;
        let v = selector.velocity(&image, &x, s, step)?;
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += step * vi;
        }
        times.push(if k + 1 == steps { horizon } else { (k + 1) as f64 * h });
        points.push(x.clone());
    }
    Trajectory::new(times, points)
}

/// Upper bound on `d_{[0,T]}(z, Λ^δ(z))` for `z` read on `[z.start, z.start + T]`.
///
/// On each knot segment the constant slope of `z` is projected onto
/// `conv(F^δ)` at both segment ends; the trapezoidal average integrates to a
/// curve `y` from `z(0)`, and the sup-norm gap `‖z − y‖` is read on the knots
/// (both curves are affine between knots, so this is the exact sup).
pub fn lambda_distance(z: &Trajectory, map: &SetValuedMap, delta: f64, horizon: f64) -> Result<f64> {
    let t0 = z.start();
    if !(horizon > 0.0) || !z.covers(t0, t0 + horizon) {
        return domain(format!(
            "path spans [{}, {}], shorter than the requested [0, {horizon}]",
            z.start(),
            z.end()
        ));
    }
    let inflated = inflate(map, InflationParams::new(delta))?;
    let mut knots: Vec<f64> = z.times()[z.knot_range(t0, t0 + horizon)].to_vec();
    if *knots.last().unwrap_or(&t0) < t0 + horizon - 1e-12 {
        knots.push(t0 + horizon);
    }
    let mut zs = Vec::with_capacity(knots.len());
    for &t in &knots {
        zs.push(z.eval(t)?);
    }
    let mut y = zs[0].clone();
    let mut gap = 0.0f64;
    let mut left_img = inflated.evaluate(&zs[0])?;
    for k in 0..knots.len() - 1 {
        let dt = knots[k + 1] - knots[k];
        let slope: Vec<f64> = zs[k + 1]
            .iter()
            .zip(&zs[k])
            .map(|(b, a)| (b - a) / dt)
            .collect();
        let right_img = inflated.evaluate(&zs[k + 1])?;
        let hl = left_img.project(&slope)?.point;
        let hr = right_img.project(&slope)?.point;
        for ((yi, a), b) in y.iter_mut().zip(&hl).zip(&hr) {
            *yi += dt * 0.5 * (a + b);
        }
        gap = gap.max(dist(&y, &zs[k + 1]));
        left_img = right_img;
    }
    Ok(gap)
}
