//! The John s-ellipsoid: the maximal s-volume d-symmetric ellipsoid under the
//! s-lifting of f, computed by a cutting-plane loop around the barrier program.

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::fnalg::{probe_directions, ray_exit, LogConcaveFn};
use crate::linalg::{rows_of, vector};
use crate::oracle::{self, Candidate, SearchConfig};
use crate::program::{Minorant, Profile, Program, ProgramPoint};
use crate::scalar::kappa_s;
use crate::sgeom::{log_s_volume, s_marginal_density, SymEllipsoid};
use crate::{Error, Matrix, Result, Vector};

/// Level above the minimum of ψ at which the initial tangent cuts are taken.
const PROBE_LEVEL: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    InfeasibleTolerance,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::InfeasibleTolerance => "infeasible_tolerance",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Objective of the relaxed program at this iteration (an upper bound once cuts are exact).
    pub s_volume: f64,
    pub max_violation: f64,
}

/// A point where a minorant cut is active, with its multiplier.
#[derive(Clone, Debug)]
pub struct DualPoint {
    pub x: Vector,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct JohnResult {
    pub ellipsoid: SymEllipsoid,
    pub s: f64,
    pub s_volume: f64,
    pub ascent_trace: Vec<TraceEntry>,
    pub status: Status,
    /// Active tangent points of the final program and their multipliers.
    pub duals: Vec<DualPoint>,
    /// Largest value of s·log h_E - log f found by the final check (≤ tol).
    pub max_violation: f64,
}

impl JohnResult {
    pub fn to_json(&self) -> Value {
        json!({
            "A": rows_of(self.ellipsoid.a()),
            "alpha": self.ellipsoid.alpha(),
            "a": self.ellipsoid.center().as_slice(),
            "s": self.s,
            "s_volume": self.s_volume,
            "status": self.status.as_str(),
            "max_violation": self.max_violation,
            "trace": self.ascent_trace.iter().map(|t| json!([t.iteration, t.s_volume, t.max_violation])).collect::<Vec<_>>(),
        })
    }
}

/// Samples (log α, log det A_α) of best fixed-height ellipsoids.
#[derive(Clone, Debug, Default)]
pub struct HeightProfile {
    pub samples: Vec<(f64, f64)>,
}

/// Shape being fitted below f.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Shape {
    Lift(f64),
    Flat,
    Gauss,
}

impl Shape {
    fn profile(&self) -> Profile {
        match *self {
            Shape::Lift(s) => Profile::Lift(s),
            Shape::Flat => Profile::Flat,
            Shape::Gauss => Profile::Gauss,
        }
    }

    /// Log of the mass of the fitted function with log-height h.
    pub(crate) fn log_mass(&self, d: usize, log_det: f64, h: f64) -> f64 {
        let base = match *self {
            Shape::Lift(s) => kappa_s(d, s).ln(),
            Shape::Flat => kappa_s(d, 0.0f64).ln(),
            Shape::Gauss => 0.5 * d as f64 * std::f64::consts::PI.ln(),
        };
        base + log_det + h
    }
}

pub(crate) struct Fit {
    pub point: ProgramPoint,
    pub status: Status,
    pub trace: Vec<TraceEntry>,
    pub duals: Vec<DualPoint>,
    pub max_violation: f64,
}

struct Worst {
    max: f64,
    support_excess: f64,
    minorant_points: Vec<Candidate>,
    support_points: Vec<Candidate>,
}

fn search(f: &LogConcaveFn, shape: Shape, p: &ProgramPoint, cfg: &SearchConfig, extra: &[Vector]) -> Worst {
    let rep = match shape {
        Shape::Lift(s) => oracle::lift_violation(f, &p.a_mat, &p.center, p.h, s, cfg, extra),
        Shape::Flat => oracle::flat_violation(f, &p.a_mat, &p.center, p.h, cfg),
        Shape::Gauss => oracle::gauss_violation(f, &p.a_mat, &p.center, p.h, cfg, extra),
    };
    let sup = oracle::support_violation(f, &p.a_mat, &p.center, cfg);
    let support_excess = sup.as_ref().map_or(f64::NEG_INFINITY, |r| r.max);
    Worst { max: rep.max, support_excess, minorant_points: rep.candidates, support_points: sup.map(|r| r.candidates).unwrap_or_default() }
}

/// Cuts at x: a tangent minorant inside the support, a supporting halfspace outside.
fn add_cut(prog: &mut Program, f: &LogConcaveFn, x: &Vector, scale: f64) -> bool {
    match f.psi_grad(x) {
        Some((v, g)) => {
            let m = Minorant::tangent(x, v, &g);
            let tol = 1e-12 * (1.0 + m.c0.abs() + m.g.norm() * scale);
            if prog.minorants.iter().any(|o| (&o.g - &m.g).norm() * scale + (o.c0 - m.c0).abs() <= tol) {
                return false;
            }
            prog.minorants.push(m);
            true
        }
        None => match f.support_cut(x) {
            Some(hs) => {
                if prog.supports.iter().any(|o| (&o.n - &hs.n).norm() * scale + (o.c - hs.c).abs() <= 1e-12 * (1.0 + hs.c.abs())) {
                    return false;
                }
                prog.supports.push(hs);
                true
            }
            None => false,
        },
    }
}

/// Fits the largest shape below f, optionally with its log-height fixed.
pub(crate) fn fit(f: &LogConcaveFn, shape: Shape, fixed_h: Option<f64>, warm: Option<ProgramPoint>, cfg: &RunConfig) -> Result<Fit> {
    let d = f.dim();
    if d > 3 {
        return Err(Error::Unsupported(format!("dimension {d}")));
    }
    if shape == Shape::Gauss && f.has_restricted_support() {
        return Err(Error::Infeasible("no Gaussian lies below a function with bounded support".into()));
    }
    let (sup, xstar) = f.sup_norm()?;
    let psi_star = -sup.ln();
    let mut prog = Program::new(d, shape.profile());
    prog.fixed_h = fixed_h;
    prog.minorants.push(Minorant { g: Vector::zeros(d), c0: psi_star });
    for (g, c0) in f.exact_minorants() {
        prog.minorants.push(Minorant { g, c0 });
    }
    prog.supports.extend(f.polyhedral_support());
    let r_max = 1e6 * (1.0 + xstar.norm() + f.hint().1);
    let mut scale: f64 = 0.0;
    for u in probe_directions(d) {
        let r = ray_exit(f, &xstar, &u, psi_star + PROBE_LEVEL, r_max)
            .ok_or_else(|| Error::NonIntegrable("f does not decay along some ray".into()))?;
        scale = scale.max(r);
        let x = &xstar + &u * r;
        add_cut(&mut prog, f, &x, 1.0);
        if prog.supports.is_empty() && f.psi(&x) == f64::INFINITY {
            add_cut(&mut prog, f, &(&xstar + &u * (0.999 * r)), 1.0);
        }
    }
    let scale = scale.max(1e-12);
    let coarse = SearchConfig::with_grid(cfg.solver.cut_grid, d);
    let fine = SearchConfig::from_geom(&cfg.geom, d);
    let mut trace = Vec::new();
    let mut point = warm;
    let mut status = Status::MaxIters;
    let mut extra: Vec<Vector> = Vec::new();
    let mut last_duals = Vec::new();
    for iter in 0..cfg.solver.max_iters {
        let sol = prog.solve(point.as_ref(), &xstar, scale, cfg.solver.gap_tol)?;
        let p = sol.point.clone();
        last_duals = sol.minorant_duals.clone();
        let w = search(f, shape, &p, &coarse, &extra);
        let log_det =
            p.a_mat.clone().cholesky().map(|c| 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()).unwrap_or(f64::NEG_INFINITY);
        trace.push(TraceEntry {
            iteration: iter,
            s_volume: shape.log_mass(d, log_det, p.h).exp(),
            max_violation: w.max.max(w.support_excess),
        });
        point = Some(p);
        let support_ok = w.support_excess <= 1e-13 * scale;
        if w.max <= cfg.solver.cut_tol && support_ok {
            status = Status::Converged;
            break;
        }
        let mut added = 0;
        if !support_ok {
            for c in w.support_points.iter().filter(|c| c.value > 0.0).take(4) {
                if let Some(hs) = f.support_cut(&c.x) {
                    if !prog.supports.iter().any(|o| (&o.n - &hs.n).norm() + (o.c - hs.c).abs() <= 1e-13) {
                        prog.supports.push(hs);
                        added += 1;
                    }
                }
            }
        }
        let threshold = (-0.05f64).max(w.max - 1.0);
        for c in w.minorant_points.iter().filter(|c| c.value > threshold).take(coarse.top_k) {
            if add_cut(&mut prog, f, &c.x, scale) {
                added += 1;
            }
        }
        extra = w.minorant_points.iter().take(coarse.top_k).map(|c| c.y.clone()).collect();
        if added == 0 {
            status = if w.max <= 1e3 * cfg.solver.cut_tol { Status::Converged } else { Status::MaxIters };
            break;
        }
    }
    let mut p = point.expect("at least one iteration");
    let duals = prog
        .minorants
        .iter()
        .zip(last_duals.iter())
        .filter(|(_, w)| **w > 1e-9)
        .filter_map(|(m, w)| tangent_point(f, m, &p, shape).map(|x| DualPoint { x, weight: *w }))
        .collect();
    let max_violation = repair(f, shape, &mut p, fixed_h.is_some(), &fine, cfg.geom.tol, scale);
    if !(max_violation <= cfg.geom.tol) {
        status = Status::InfeasibleTolerance;
    }
    Ok(Fit { point: p, status, trace, duals, max_violation })
}

/// Point of the fitted shape's domain where the minorant's tangent plane is touched.
fn tangent_point(f: &LogConcaveFn, m: &Minorant, p: &ProgramPoint, shape: Shape) -> Option<Vector> {
    let v = &p.a_mat * &m.g;
    let rho = v.norm();
    let y = match shape {
        Shape::Lift(s) => {
            if rho == 0.0 {
                Vector::zeros(v.len())
            } else {
                let (_, r, _) = crate::scalar::lift_profile(s, rho);
                &v * (-r / rho)
            }
        }
        Shape::Flat => {
            if rho == 0.0 {
                return None;
            }
            &v * (-1.0 / rho)
        }
        Shape::Gauss => &v * -0.5,
    };
    let x = &p.center + &p.a_mat * y;
    f.psi(&x).is_finite().then_some(x)
}

/// Makes the shape feasible under the fine search; returns the remaining violation.
fn repair(f: &LogConcaveFn, shape: Shape, p: &mut ProgramPoint, fixed_h: bool, cfg: &SearchConfig, tol: f64, scale: f64) -> f64 {
    let check = |q: &ProgramPoint| {
        let w = search(f, shape, q, cfg, &[]);
        (w.max, w.support_excess)
    };
    let (mut v, mut ex) = check(p);
    if ex > 0.0 {
        // shrink the domain about its center until it lies in the support
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let q = ProgramPoint { a_mat: &p.a_mat * mid, ..p.clone() };
            if check(&q).1 <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        p.a_mat *= lo;
        (v, ex) = check(p);
        let _ = scale;
    }
    if v > 0.0 {
        if fixed_h {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let q = ProgramPoint { a_mat: &p.a_mat * mid, ..p.clone() };
                if check(&q).0 <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            p.a_mat *= lo;
        } else {
            p.h -= v + 1e-15 * (1.0 + p.h.abs());
        }
        (v, ex) = check(p);
    }
    let _ = tol;
    if ex > 0.0 {
        f64::INFINITY
    } else {
        v
    }
}

fn to_ellipsoid(p: &ProgramPoint, s: f64) -> Result<SymEllipsoid> {
    SymEllipsoid::new(p.a_mat.clone(), (p.h / s).exp(), p.center.clone())
}

fn warm_point(e: &SymEllipsoid, s: f64) -> ProgramPoint {
    ProgramPoint { a_mat: e.a().clone(), center: e.center().clone(), h: s * e.alpha().ln() }
}

/// The John s-ellipsoid of f.
pub fn solve_john(f: &LogConcaveFn, s: f64, cfg: &RunConfig) -> Result<JohnResult> {
    solve_john_warm(f, s, None, cfg)
}

/// As [`solve_john`], starting the barrier iterations from a nearby ellipsoid.
pub fn solve_john_warm(f: &LogConcaveFn, s: f64, warm: Option<&SymEllipsoid>, cfg: &RunConfig) -> Result<JohnResult> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Input(format!("s must be positive, got {s}")));
    }
    let fit = fit(f, Shape::Lift(s), None, warm.map(|e| warm_point(e, s)), cfg)?;
    let ellipsoid = to_ellipsoid(&fit.point, s)?;
    Ok(JohnResult {
        s_volume: log_s_volume(&ellipsoid, s).exp(),
        ellipsoid,
        s,
        ascent_trace: fit.trace,
        status: fit.status,
        duals: fit.duals,
        max_violation: fit.max_violation,
    })
}

/// Largest-determinant ellipsoid of height α under the s-lifting of f.
pub fn solve_fixed_height(f: &LogConcaveFn, s: f64, alpha: f64, warm: Option<&SymEllipsoid>, cfg: &RunConfig) -> Result<SymEllipsoid> {
    if !(s > 0.0) || !(alpha > 0.0) {
        return Err(Error::Input("s and α must be positive".into()));
    }
    let (sup, _) = f.sup_norm()?;
    let top = sup.ln();
    let mut h = s * alpha.ln();
    if h > top + 1e-12 * (1.0 + top.abs()) {
        return Err(Error::Infeasible(format!("height {alpha} exceeds ‖f‖^(1/s)")));
    }
    h = h.min(top - 1e-10 * (1.0 + top.abs()));
    let fit = fit(f, Shape::Lift(s), Some(h), warm.map(|e| warm_point(e, s)), cfg)?;
    if fit.status == Status::InfeasibleTolerance {
        return Err(Error::Infeasible("no feasible ellipsoid at this height".into()));
    }
    SymEllipsoid::new(fit.point.a_mat, alpha.min((h / s).exp()), fit.point.center)
}

/// (log α, log det A_α) for each log-height t in `ts`.
pub fn height_profile(f: &LogConcaveFn, s: f64, ts: &[f64], cfg: &RunConfig) -> Result<HeightProfile> {
    let mut samples = Vec::with_capacity(ts.len());
    let mut warm: Option<SymEllipsoid> = None;
    for &t in ts {
        let e = solve_fixed_height(f, s, t.exp(), warm.as_ref(), cfg)?;
        samples.push((t, e.log_det()));
        warm = Some(e);
    }
    Ok(HeightProfile { samples })
}

/// J_s f(x) = h_E(x)^s for the solved ellipsoid.
pub fn john_s_function_eval(result: &JohnResult, x: &Vector) -> Result<f64> {
    if x.len() != result.ellipsoid.dim() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("bad evaluation point".into()));
    }
    Ok(s_marginal_density(&result.ellipsoid, result.s, x))
}

/// Direct d = 1 search over (α, a, A), with containment tested on `grid` points of (-1, 1).
///
/// For fixed h = s log α the longest fitting half-length is concave in the center, and
/// h + log of its maximum is concave in h, so two nested golden-section searches find the optimum.
pub fn brute_force_1d(f: &LogConcaveFn, s: f64, grid: usize) -> Result<SymEllipsoid> {
    if f.dim() != 1 {
        return Err(Error::Input("brute force search is one-dimensional".into()));
    }
    let grid = grid.max(5);
    let (sup, xstar) = f.sup_norm()?;
    let psi_star = -sup.ln();
    let level = psi_star + 30.0;
    let r_max = 1e6 * (1.0 + xstar.norm() + f.hint().1);
    let right = ray_exit(f, &xstar, &vector(&[1.0]), level, r_max).ok_or_else(|| Error::NonIntegrable("no decay".into()))?;
    let left = ray_exit(f, &xstar, &vector(&[-1.0]), level, r_max).ok_or_else(|| Error::NonIntegrable("no decay".into()))?;
    let ys: Vec<f64> = (1..grid).map(|k| -1.0 + 2.0 * k as f64 / grid as f64).collect();
    let psi = |x: f64| f.psi(&vector(&[x]));
    let fits = |h: f64, a: f64, len: f64| -> bool {
        for x in [a - len, a + len] {
            if psi(x) == f64::INFINITY && f.support_excess(&vector(&[x])).is_some_and(|e| e.0 > 0.0) {
                return false;
            }
        }
        ys.iter().all(|&y| h + 0.5 * s * (-y * y).ln_1p() + psi(a + len * y) <= 1e-12)
    };
    let max_len = |h: f64, a: f64| -> f64 {
        if !(h + psi(a) < 0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, left + right);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if fits(h, a, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        lo
    };
    // below the support region the extension -(h + ψ) keeps the center search unimodal
    let best_center = |h: f64| -> f64 {
        let score = |a: f64| {
            let l = max_len(h, a);
            if l > 0.0 {
                l
            } else {
                -(h + psi(a))
            }
        };
        let width = left + right;
        crate::optim::golden_max(score, xstar[0] - left, xstar[0] + right, 1e-11 * width).0
    };
    let objective = |h: f64| -> f64 { h + max_len(h, best_center(h)).ln() };
    let h = crate::optim::golden_max(objective, -psi_star - 2.0, -psi_star, 1e-10).0;
    let a = best_center(h);
    let len = max_len(h, a);
    if !(len > 0.0) {
        return Err(Error::Infeasible("no ellipsoid fits on the grid".into()));
    }
    SymEllipsoid::new(Matrix::from_element(1, 1, len), (h / s).exp(), vector(&[a]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_power_is_fixed_point_1d() {
        let f = LogConcaveFn::ball_power(1, 1.0).unwrap();
        let r = solve_john(&f, 1.0, &RunConfig::default()).unwrap();
        assert!((r.ellipsoid.a()[(0, 0)] - 1.0).abs() < 1e-4, "{:?}", r.ellipsoid);
        assert!(r.ellipsoid.center()[0].abs() < 1e-4);
        assert_relative_eq!(r.s_volume, kappa_s(1, 1.0), max_relative = 1e-6);
    }

    #[test]
    fn indicator_interval() {
        let f = LogConcaveFn::flat_box(&[-1.0], &[1.0], 1.0).unwrap();
        let r = solve_john(&f, 1.0, &RunConfig::default()).unwrap();
        assert!((r.ellipsoid.a()[(0, 0)] - 1.0).abs() < 1e-6);
        assert!((r.ellipsoid.alpha() - 1.0).abs() < 1e-6);
        let b = brute_force_1d(&f, 1.0, 801).unwrap();
        assert!((b.a()[(0, 0)] - 1.0).abs() < 1e-2 && (b.alpha() - 1.0).abs() < 1e-2);
    }
}
