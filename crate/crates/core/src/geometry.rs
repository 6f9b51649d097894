//! Compact convex images and set-valued maps.
//!
//! Images are stored as vertex lists; membership, projection and support are
//! always taken against the convex hull of the vertices, so duplicate or
//! interior vertices are harmless.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};

/// Projection tolerance used by the convex-hull routines.
pub const PROJECTION_TOL: f64 = 1e-12;

/// Above this many distinct vertices projection switches from face
/// enumeration to the minimum-norm-point descent.
const EXHAUSTIVE_LIMIT: usize = 8;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `a + s·b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Nearest point of a polytope together with its Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub distance: f64,
}

/// A nonempty compact convex set in R^m given by a finite vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    vertices: Vec<Vec<f64>>,
}

impl Polytope {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return domain("polytope needs at least one vertex");
        };
        let dim = first.len();
        if dim == 0 {
            return domain("polytope vertices must have dimension >= 1");
        }
        for v in &vertices {
            if v.len() != dim {
                return domain(format!(
                    "vertex dimension mismatch: expected {dim}, got {}",
                    v.len()
                ));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Numerical("non-finite polytope vertex".into()));
            }
        }
        Ok(Self { vertices })
    }

    pub fn point(p: Vec<f64>) -> Result<Self> {
        Self::new(vec![p])
    }

    /// Axis-aligned box `[lo, hi]` as its 2^m corners.
    pub fn cube(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return domain("box bounds differ in dimension");
        }
        let m = lo.len();
        let corners = (0..1usize << m)
            .map(|mask| {
                (0..m)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    .collect()
            })
            .collect();
        Self::new(corners)
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Vec<f64>> {
        self.vertices
    }

    /// Largest Euclidean norm over the vertices.
    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    pub fn project(&self, p: &[f64]) -> Result<Projection> {
        if p.len() != self.dim() {
            return domain(format!(
                "point has dimension {}, polytope {}",
                p.len(),
                self.dim()
            ));
        }
        let verts = distinct(&self.vertices);
        let point = if verts.len() == 1 {
            verts[0].clone()
        } else if verts.len() <= EXHAUSTIVE_LIMIT {
            project_by_faces(&verts, p)
        } else {
            project_min_norm(&verts, p)
        };
        let distance = dist(&point, p);
        Ok(Projection { point, distance })
    }

    pub fn distance(&self, p: &[f64]) -> Result<f64> {
        Ok(self.project(p)?.distance)
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> Result<bool> {
        Ok(self.distance(p)? <= tol)
    }

    /// `max_v ⟨v, d⟩`.
    pub fn support(&self, d: &[f64]) -> Result<f64> {
        let idx = self.support_index(d)?;
        Ok(dot(&self.vertices[idx], d))
    }

    /// Index of the first vertex attaining the support value along `d`.
    pub fn support_index(&self, d: &[f64]) -> Result<usize> {
        if d.len() != self.dim() {
            return domain("direction dimension mismatch");
        }
        if norm(d) == 0.0 {
            return domain("support direction must be nonzero");
        }
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let s = dot(v, d);
            if s > best_val {
                best_val = s;
                best = i;
            }
        }
        Ok(best)
    }
}

/// Nearest point of `conv(poly)` to `p`.
pub fn project(p: &[f64], poly: &Polytope) -> Result<Projection> {
    poly.project(p)
}

/// Support function of `poly` along `d`.
pub fn support(poly: &Polytope, d: &[f64]) -> Result<f64> {
    poly.support(d)
}

fn distinct(vertices: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vertices.len());
    for v in vertices {
        if !out.iter().any(|w| w == v) {
            out.push(v.clone());
        }
    }
    out
}

/// Gaussian elimination with partial pivoting. Returns `None` when a pivot
/// falls below `tol` relative to the matrix scale.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= tol * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Enumerates every affinely independent vertex subset, projects onto its
/// affine hull and keeps the best feasible (nonnegative barycentric) point.
fn project_by_faces(verts: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let k = verts.len();
    let dim = p.len();
    let mut best = verts[0].clone();
    let mut best_d = dist(&best, p);
    for mask in 1u32..(1u32 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        if idx.len() > dim + 1 {
            continue;
        }
        let base = &verts[idx[0]];
        let dirs: Vec<Vec<f64>> = idx[1..].iter().map(|&i| sub(&verts[i], base)).collect();
        let rel = sub(p, base);
        let lambdas = if dirs.is_empty() {
            Vec::new()
        } else {
            let gram = dirs
                .iter()
                .map(|di| dirs.iter().map(|dj| dot(di, dj)).collect())
                .collect();
            let rhs = dirs.iter().map(|d| dot(d, &rel)).collect();
            match solve_dense(gram, rhs, 1e-13) {
                Some(l) => l,
                None => continue,
            }
        };
        let lead = 1.0 - lambdas.iter().sum::<f64>();
        if lead < -PROJECTION_TOL || lambdas.iter().any(|&l| l < -PROJECTION_TOL) {
            continue;
        }
        let mut q = base.clone();
        for (l, d) in lambdas.iter().zip(&dirs) {
            for (qi, di) in q.iter_mut().zip(d) {
                *qi += l * di;
            }
        }
        let dq = dist(&q, p);
        if dq < best_d {
            best_d = dq;
            best = q;
        }
    }
    best
}

/// Minimum-norm point of `conv(verts - p)` by Wolfe's active-set descent,
/// shifted back by `p`.
fn project_min_norm(verts: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let pts: Vec<Vec<f64>> = verts.iter().map(|v| sub(v, p)).collect();
    let scale = pts.iter().map(|q| dot(q, q)).fold(0.0, f64::max).max(1e-300);
    let start = (0..pts.len())
        .min_by(|&i, &j| dot(&pts[i], &pts[i]).total_cmp(&dot(&pts[j], &pts[j])))
        .unwrap_or(0);
    let mut active = vec![start];
    let mut weights = vec![1.0];
    let mut x = pts[start].clone();

    let combine = |active: &[usize], w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for (&i, &wi) in active.iter().zip(w) {
            for (o, c) in out.iter_mut().zip(&pts[i]) {
                *o += wi * c;
            }
        }
        out
    };

    for _ in 0..10 * pts.len() + 100 {
        let xx = dot(&x, &x);
        let (j, xj) = (0..pts.len())
            .map(|i| (i, dot(&x, &pts[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        if xj >= xx - PROJECTION_TOL * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        weights.push(0.0);
        loop {
            let affine = affine_min_norm(&pts, &active);
            let Some(alpha) = affine else {
                // degenerate active set: drop the newest point
                active.pop();
                weights.pop();
                break;
            };
            if alpha.iter().all(|&a| a > PROJECTION_TOL) {
                weights = alpha;
                x = combine(&active, &weights);
                break;
            }
            let mut theta = 1.0f64;
            for (a, w) in alpha.iter().zip(&weights) {
                if *a <= PROJECTION_TOL && w - a > 0.0 {
                    theta = theta.min(w / (w - a));
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = theta * a + (1.0 - theta) * *w;
            }
            let mut k = 0;
            while k < active.len() {
                if weights[k] <= PROJECTION_TOL {
                    active.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            x = combine(&active, &weights);
        }
    }
    add(&x, p)
}

/// Barycentric coefficients of the minimum-norm point of the affine hull.
fn affine_min_norm(pts: &[Vec<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut a = vec![vec![0.0; k + 1]; k + 1];
    for r in 0..k {
        for c in 0..k {
            a[r][c] = dot(&pts[active[r]], &pts[active[c]]);
        }
        a[r][k] = 1.0;
        a[k][r] = 1.0;
    }
    let mut b = vec![0.0; k + 1];
    b[k] = 1.0;
    let sol = solve_dense(a, b, 1e-14)?;
    Some(sol[..k].to_vec())
}

type MapFn = dyn Fn(&[f64]) -> Result<Polytope> + Send + Sync;

/// A set-valued map `x ↦ F(x)` with polytope images and linear growth
/// constant `c` (every image vertex satisfies `‖v‖ ≤ c(1 + ‖x‖)`).
#[derive(Clone)]
pub struct SetValuedMap {
    dim: usize,
    growth: f64,
    eval: Arc<MapFn>,
}

impl fmt::Debug for SetValuedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetValuedMap")
            .field("dim", &self.dim)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl SetValuedMap {
    pub fn new<F>(dim: usize, growth: f64, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Result<Polytope> + Send + Sync + 'static,
    {
        assert!(dim >= 1, "ambient dimension must be positive");
        assert!(growth > 0.0, "growth constant must be positive");
        Self {
            dim,
            growth,
            eval: Arc::new(eval),
        }
    }

    /// Single-valued map `x ↦ {f(x)}`.
    pub fn singleton<F>(dim: usize, growth: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::new(dim, growth, move |x| Polytope::point(f(x)))
    }

    /// Constant map `x ↦ image`.
    pub fn constant(image: Polytope) -> Self {
        let dim = image.dim();
        let growth = image.max_norm().max(1e-12);
        Self::new(dim, growth, move |_| Ok(image.clone()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Polytope> {
        if x.len() != self.dim {
            return domain(format!(
                "map expects dimension {}, got {}",
                self.dim,
                x.len()
            ));
        }
        let img = (self.eval)(x)?;
        if img.dim() != self.dim {
            return domain("map image dimension differs from ambient dimension");
        }
        Ok(img)
    }
}

/// Sampling parameters for the δ-inflated map `F^δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflationParams {
    pub delta: f64,
    /// Spacing of the sampling net over `B(x, δ)`; `None` means `δ/4`.
    pub net_resolution: Option<f64>,
    /// Directions used for the δ-ball Minkowski sum; `None` means `2m`.
    pub direction_count: Option<usize>,
}

impl InflationParams {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            net_resolution: None,
            direction_count: None,
        }
    }
}

/// Points of a regular grid inside the closed unit ball, always including
/// the center and the `±e_i` axis points.
fn unit_ball_net(dim: usize, spacing: f64) -> Vec<Vec<f64>> {
    let steps = (1.0 / spacing).floor().max(1.0) as i64;
    let h = 1.0 / steps as f64;
    let side = (2 * steps + 1) as usize;
    let total = side.pow(dim as u32);
    let mut net = Vec::new();
    for flat in 0..total {
        let mut rem = flat;
        let mut p = Vec::with_capacity(dim);
        for _ in 0..dim {
            let k = (rem % side) as i64 - steps;
            rem /= side;
            p.push(k as f64 * h);
        }
        if dot(&p, &p) <= 1.0 + 1e-12 {
            net.push(p);
        }
    }
    net
}

fn ball_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(count.max(2 * dim));
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            dirs.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1e5);
    while dirs.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            dirs.push(v.iter().map(|c| c / n).collect());
        }
    }
    dirs.truncate(count.max(2 * dim).min(dirs.len()));
    dirs
}

/// Sampled closure of `F^δ(x) = {y | ∃z ∈ B(x,δ), d(y, F(z)) < δ}`.
///
/// The image at `x` is the hull of `F(x)` together with `v + δ·u` for every
/// vertex `v` of `F(z)`, `z` on a net of `B(x, δ)` and `u` a sampled unit
/// direction. `delta = 0` returns `F` itself.
pub fn inflate(map: &SetValuedMap, params: InflationParams) -> Result<SetValuedMap> {
    let delta = params.delta;
    if !(delta >= 0.0) || !delta.is_finite() {
        return domain("inflation radius must be a finite nonnegative number");
    }
    if delta == 0.0 {
        return Ok(map.clone());
    }
    let dim = map.dim();
    let resolution = params.net_resolution.unwrap_or(delta / 4.0);
    if !(resolution > 0.0) {
        return domain("net resolution must be positive");
    }
    let count = params.direction_count.unwrap_or(2 * dim);
    if count == 0 {
        return domain("direction count must be positive");
    }
    let net = unit_ball_net(dim, resolution / delta);
    let dirs = ball_directions(dim, count);
    let base = map.clone();
    let growth = map.growth_constant() + delta * (map.growth_constant() + 1.0);
    Ok(SetValuedMap::new(dim, growth, move |x| {
        let mut verts = base.evaluate(x)?.into_vertices();
        for u in &net {
            let z = axpy(x, delta, u);
            let img = base.evaluate(&z)?;
            for v in img.vertices() {
                for d in &dirs {
                    verts.push(axpy(v, delta, d));
                }
            }
        }
        Polytope::new(distinct(&verts))
    }))
}

/// Outcome of the sampled standard-map diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardReport {
    /// Probes at which evaluation failed or produced an empty image.
    pub empty_at: Vec<usize>,
    /// `min over probes of c(1 + ‖x‖) − max ‖v‖`; negative means a violation.
    pub growth_margin: f64,
    /// Largest distance from a sampled graph limit `y` to `F(x)`.
    pub closed_graph_gap: f64,
    pub closed_graph_tol: f64,
    /// Number of convergent probe sequences examined.
    pub sequences_checked: usize,
}

impl StandardReport {
    pub fn nonempty(&self) -> bool {
        self.empty_at.is_empty()
    }

    pub fn growth_ok(&self) -> bool {
        self.growth_margin >= 0.0
    }

    pub fn closed_graph_ok(&self) -> bool {
        self.closed_graph_gap <= self.closed_graph_tol
    }

    pub fn passed(&self) -> bool {
        self.nonempty() && self.growth_ok() && self.closed_graph_ok()
    }
}

/// Sampled check of the standard-map axioms at `probes`.
///
/// Closed-graph sequences approach each probe along the segment towards the
/// next probe (`x_k = x + 10^{-k}(x' − x)`), so probes drawn from a convex
/// domain keep every sequence inside it. Violations are reported, not thrown.
pub fn validate_standard(map: &SetValuedMap, probes: &[Vec<f64>]) -> Result<StandardReport> {
    if probes.is_empty() {
        return domain("validate_standard needs at least one probe point");
    }
    let c = map.growth_constant();
    let mut empty_at = Vec::new();
    let mut margin = f64::INFINITY;
    let mut images = Vec::with_capacity(probes.len());
    for (i, x) in probes.iter().enumerate() {
        match map.evaluate(x) {
            Ok(img) => {
                margin = margin.min(c * (1.0 + norm(x)) - img.max_norm());
                images.push(Some(img));
            }
            Err(_) => {
                empty_at.push(i);
                images.push(None);
            }
        }
    }

    let tol = 1e-6;
    let mut gap = 0.0f64;
    let mut checked = 0;
    let dim = map.dim();
    let mut dirs = ball_directions(dim, 2 * dim);
    dirs.truncate(2 * dim);
    for (i, x) in probes.iter().enumerate() {
        let Some(img) = &images[i] else { continue };
        let target = &probes[(i + 1) % probes.len()];
        let toward = sub(target, x);
        if norm(&toward) == 0.0 {
            continue;
        }
        for d in &dirs {
            let mut seq = Vec::new();
            for k in 1..=8 {
                let t = 10f64.powi(-k);
                let xk = axpy(x, t, &toward);
                let Ok(img_k) = map.evaluate(&xk) else { break };
                let idx = img_k.support_index(d)?;
                seq.push(img_k.vertices()[idx].clone());
            }
            if seq.len() < 8 {
                continue;
            }
            // only sequences that have settled count as convergent
            let last = &seq[seq.len() - 1];
            if dist(last, &seq[seq.len() - 2]) > 1e-5 {
                continue;
            }
            checked += 1;
            gap = gap.max(img.distance(last)?);
        }
    }
    if margin == f64::INFINITY {
        margin = f64::NEG_INFINITY;
    }
    Ok(StandardReport {
        empty_at,
        growth_margin: margin,
        closed_graph_gap: gap,
        closed_graph_tol: tol,
        sequences_checked: checked,
    })
}
