//! Worst-point searches behind the containment tests: multistart grids on the
//! unit ball or sphere in normalized coordinates followed by local refinement.

use crate::config::GeomConfig;
use crate::fnalg::LogConcaveFn;
use crate::linalg::{ball_grid, sphere_points};
use crate::optim::{nelder_mead_max, NmOptions};
use crate::{Matrix, Vector};

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub grid: usize,
    pub top_k: usize,
    pub nm_evals: usize,
    pub sphere_n: usize,
}

impl SearchConfig {
    pub fn from_geom(cfg: &GeomConfig, d: usize) -> Self {
        Self::with_grid(cfg.grid_per_axis, d)
    }

    pub fn with_grid(grid: usize, d: usize) -> Self {
        SearchConfig {
            grid: grid.max(3),
            top_k: 6 + 2 * d,
            nm_evals: 300 * d + 200,
            sphere_n: match d {
                1 => 2,
                2 => 8 * grid.max(3),
                _ => grid.max(3) * grid.max(3),
            },
        }
    }
}

/// A local maximizer in normalized coordinates y and its image x = a + A y.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub y: Vector,
    pub x: Vector,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub max: f64,
    pub witness: Vector,
    pub y: Vector,
    pub fallback: bool,
    /// Refined local maxima, best first.
    pub candidates: Vec<Candidate>,
}

fn key(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Greedy pick of the best `k` seeds at mutual distance ≥ `sep`.
fn pick_seeds(mut pts: Vec<(Vector, f64)>, k: usize, sep: f64) -> Vec<(Vector, f64)> {
    pts.sort_by(|a, b| key(b.1).partial_cmp(&key(a.1)).unwrap());
    let mut out: Vec<(Vector, f64)> = Vec::new();
    for (y, v) in pts {
        if out.len() >= k || !(v > f64::NEG_INFINITY) {
            break;
        }
        if out.iter().all(|(z, _)| (z - &y).norm() >= sep) {
            out.push((y, v));
        }
    }
    out
}

fn finish(a_mat: &Matrix, center: &Vector, mut cands: Vec<(Vector, f64)>, fallback: bool) -> SearchReport {
    cands.sort_by(|a, b| key(b.1).partial_cmp(&key(a.1)).unwrap());
    let mut uniq: Vec<Candidate> = Vec::new();
    for (y, v) in cands {
        if uniq.iter().any(|c| (&c.y - &y).norm() < 1e-9) {
            continue;
        }
        let x = center + a_mat * &y;
        uniq.push(Candidate { y, x, value: v });
    }
    match uniq.first() {
        Some(c) => SearchReport { max: c.value, witness: c.x.clone(), y: c.y.clone(), fallback, candidates: uniq },
        None => {
            SearchReport { max: f64::NEG_INFINITY, witness: center.clone(), y: Vector::zeros(center.len()), fallback, candidates: uniq }
        }
    }
}

fn refine<F: Fn(&Vector) -> f64>(v: &F, seeds: Vec<(Vector, f64)>, step: f64, evals: usize) -> (Vec<(Vector, f64)>, bool) {
    let mut out = Vec::with_capacity(seeds.len());
    let mut fallback = false;
    for (y0, v0) in seeds {
        if v0 == f64::INFINITY {
            out.push((y0, v0));
            continue;
        }
        let (y, val) = nelder_mead_max(v, &y0, step, NmOptions { max_evals: evals, ftol: 1e-15, xtol: 1e-12 });
        if key(val) >= v0 {
            out.push((y, val));
        } else {
            fallback = true;
            out.push((y0, v0));
        }
    }
    (out, fallback)
}

/// sup over the open unit ball of h + (s/2) log(1 - |y|²) + ψ(a + A y).
///
/// Points of the ball where f vanishes give +∞.
pub fn lift_violation(
    f: &LogConcaveFn,
    a_mat: &Matrix,
    center: &Vector,
    h: f64,
    s: f64,
    cfg: &SearchConfig,
    extra: &[Vector],
) -> SearchReport {
    let d = center.len();
    let v = |y: &Vector| -> f64 {
        let r2 = y.norm_squared();
        if r2 >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let p = f.psi(&(center + a_mat * y));
        if p == f64::INFINITY {
            return f64::INFINITY;
        }
        h + 0.5 * s * (-r2).ln_1p() + p
    };
    let mut seeds: Vec<Vector> = ball_grid(d, cfg.grid);
    let c = (4.0 / (s + 1.0).sqrt()).min(1.0);
    if c < 0.999 {
        seeds.extend(ball_grid(d, cfg.grid).into_iter().map(|y| y * c));
    }
    seeds.push(Vector::zeros(d));
    seeds.extend(extra.iter().filter(|y| y.norm_squared() < 1.0).cloned());
    let pts: Vec<(Vector, f64)> = seeds
        .into_iter()
        .map(|y| {
            let val = v(&y);
            (y, val)
        })
        .collect();
    if let Some((y, _)) = pts.iter().find(|p| p.1 == f64::INFINITY) {
        let y = y.clone();
        return finish(a_mat, center, vec![(y, f64::INFINITY)], false);
    }
    let spacing = 2.0 / (cfg.grid - 1) as f64;
    let chosen = pick_seeds(pts, cfg.top_k, 1.5 * spacing * c);
    let (refined, fallback) = refine(&v, chosen, 0.5 * spacing * c, cfg.nm_evals);
    finish(a_mat, center, refined, fallback)
}

/// sup over the unit sphere of `g(y)`, where g is convex or at least well behaved there.
pub fn sphere_max<G: Fn(&Vector) -> f64>(g: G, d: usize, cfg: &SearchConfig) -> Vec<(Vector, f64)> {
    let pts: Vec<(Vector, f64)> = sphere_points(d, cfg.sphere_n)
        .into_iter()
        .map(|y| {
            let v = g(&y);
            (y, v)
        })
        .collect();
    if d == 1 {
        let mut p = pts;
        p.sort_by(|a, b| key(b.1).partial_cmp(&key(a.1)).unwrap());
        return p;
    }
    let spacing = (4.0 * std::f64::consts::PI / cfg.sphere_n as f64).powf(1.0 / (d - 1) as f64);
    let chosen = pick_seeds(pts, cfg.top_k, 1.5 * spacing);
    let on_sphere = |z: &Vector| {
        let n = z.norm();
        if n < 1e-9 {
            f64::NEG_INFINITY
        } else {
            g(&(z / n))
        }
    };
    let (refined, _) = refine(&on_sphere, chosen, 0.5 * spacing, cfg.nm_evals);
    let mut out: Vec<(Vector, f64)> = refined
        .into_iter()
        .map(|(z, v)| {
            let n = z.norm();
            (z / n, v)
        })
        .collect();
    out.sort_by(|a, b| key(b.1).partial_cmp(&key(a.1)).unwrap());
    out
}

/// sup over the closed unit ball of h + ψ(a + A y); the maximum of a convex function sits on the sphere.
pub fn flat_violation(f: &LogConcaveFn, a_mat: &Matrix, center: &Vector, h: f64, cfg: &SearchConfig) -> SearchReport {
    let g = |y: &Vector| h + f.psi(&(center + a_mat * y));
    let mut cands = sphere_max(g, center.len(), cfg);
    cands.push((Vector::zeros(center.len()), g(&Vector::zeros(center.len()))));
    finish(a_mat, center, cands, false)
}

/// sup over the sphere of the support excess at a + A y (None when f has full support).
pub fn support_violation(f: &LogConcaveFn, a_mat: &Matrix, center: &Vector, cfg: &SearchConfig) -> Option<SearchReport> {
    if !f.has_restricted_support() {
        return None;
    }
    let g = |y: &Vector| f.support_excess(&(center + a_mat * y)).map(|e| e.0).unwrap_or(f64::NEG_INFINITY);
    let cands = sphere_max(g, center.len(), cfg);
    Some(finish(a_mat, center, cands, false))
}

/// sup over R^d of h + ψ(a + A y) - |y|².
pub fn gauss_violation(f: &LogConcaveFn, a_mat: &Matrix, center: &Vector, h: f64, cfg: &SearchConfig, extra: &[Vector]) -> SearchReport {
    let d = center.len();
    let v = |y: &Vector| h + f.psi(&(center + a_mat * y)) - y.norm_squared();
    let radius = 3.0;
    let mut seeds: Vec<Vector> = ball_grid(d, cfg.grid).into_iter().map(|y| y * radius).collect();
    seeds.extend(extra.iter().cloned());
    let pts: Vec<(Vector, f64)> = seeds
        .into_iter()
        .map(|y| {
            let val = v(&y);
            (y, val)
        })
        .collect();
    if let Some((y, _)) = pts.iter().find(|p| p.1 == f64::INFINITY) {
        let y = y.clone();
        return finish(a_mat, center, vec![(y, f64::INFINITY)], false);
    }
    let spacing = 2.0 * radius / (cfg.grid - 1) as f64;
    let chosen = pick_seeds(pts, cfg.top_k, 1.5 * spacing);
    let (refined, fallback) = refine(&v, chosen, 0.5 * spacing, cfg.nm_evals);
    finish(a_mat, center, refined, fallback)
}
