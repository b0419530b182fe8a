//! The s → 0 and s → ∞ ends of the family: the flat function of maximal integral
//! below f, the maximal Gaussian below f, sweeps in s and the integral ratio.

use serde_json::{json, Value};
use statrs::function::beta::beta;

use crate::config::RunConfig;
use crate::fnalg::{level_box, probe_directions, ray_exit, BodyRepr, LogConcaveFn, SuperlevelBody};
use crate::linalg::rows_of;
use crate::program::{Profile, Program};
use crate::scalar::kappa_s;
use crate::sgeom::{s_marginal_density, SymEllipsoid};
use crate::solver::{fit, solve_john_warm, JohnResult, Shape, Status};
use crate::{Error, Matrix, Result, Vector};

/// β₀ χ_{A B^d + a}.
#[derive(Clone, Debug)]
pub struct FlatResult {
    pub a_mat: Matrix,
    pub beta0: f64,
    pub center: Vector,
    /// β₀ · vol(A B^d).
    pub objective: f64,
    pub status: Status,
}

impl FlatResult {
    pub fn ellipsoid(&self) -> SymEllipsoid {
        SymEllipsoid::new(self.a_mat.clone(), 1.0, self.center.clone()).expect("fitted matrix is SPD")
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        if self.ellipsoid().q(x) <= 1.0 {
            self.beta0
        } else {
            0.0
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"A": rows_of(&self.a_mat), "beta0": self.beta0, "a": self.center.as_slice(), "objective": self.objective})
    }
}

/// α exp(-|A⁻¹(x - a)|²).
#[derive(Clone, Debug)]
pub struct GaussianResult {
    pub a_mat: Matrix,
    pub alpha: f64,
    pub center: Vector,
    pub integral: f64,
}

impl GaussianResult {
    pub fn new(a_mat: Matrix, alpha: f64, center: Vector) -> Result<Self> {
        let e = SymEllipsoid::new(a_mat, alpha, center)?;
        Ok(GaussianResult { integral: crate::interp::gaussian_integral(&e), a_mat: e.a().clone(), alpha, center: e.center().clone() })
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        let e = SymEllipsoid::new(self.a_mat.clone(), self.alpha, self.center.clone()).expect("SPD");
        self.alpha * (-e.q(x)).exp()
    }

    pub fn to_json(&self) -> Value {
        json!({"A": rows_of(&self.a_mat), "alpha": self.alpha, "a": self.center.as_slice(), "integral": self.integral})
    }
}

#[derive(Clone, Debug)]
pub enum MaxGaussian {
    Found(GaussianResult),
    /// No Gaussian density lies below f.
    NoneBelow,
}

/// Largest-volume ellipsoid A B^d + a inside K.
pub fn inscribed_ellipsoid(k: &SuperlevelBody, cfg: &RunConfig) -> Result<(Matrix, Vector)> {
    match &k.repr {
        BodyRepr::Ellipsoid(e) => Ok((e.a().clone(), e.center().clone())),
        BodyRepr::Halfspaces(hs) => {
            if hs.is_empty() {
                return Err(Error::Input("unbounded body".into()));
            }
            let mut prog = Program::new(k.dim(), Profile::Flat);
            prog.supports = hs.clone();
            prog.fixed_h = Some(0.0);
            let sol = prog.solve(None, &k.center, k.outer_radius.max(1e-12), cfg.solver.gap_tol)?;
            Ok((sol.point.a_mat, sol.point.center))
        }
        BodyRepr::Oracle => {
            let fit = fit(&k.f, Shape::Flat, Some(k.beta.ln()), None, cfg)?;
            if fit.status == Status::InfeasibleTolerance {
                return Err(Error::Infeasible("no ellipsoid fits in the superlevel set".into()));
            }
            Ok((fit.point.a_mat, fit.point.center))
        }
    }
}

/// The flat ellipsoid function of maximal integral below f.
pub fn john_zero(f: &LogConcaveFn, cfg: &RunConfig) -> Result<FlatResult> {
    let fit = fit(f, Shape::Flat, None, None, cfg)?;
    let d = f.dim();
    let det = fit.point.a_mat.determinant();
    let beta0 = fit.point.h.exp();
    Ok(FlatResult {
        objective: beta0 * kappa_s(d, 0.0f64) * det,
        a_mat: fit.point.a_mat,
        beta0,
        center: fit.point.center,
        status: fit.status,
    })
}

/// The Gaussian density of maximal integral below f.
pub fn max_gaussian(f: &LogConcaveFn, cfg: &RunConfig) -> Result<MaxGaussian> {
    if f.has_restricted_support() {
        return Ok(MaxGaussian::NoneBelow);
    }
    let fit = fit(f, Shape::Gauss, None, None, cfg)?;
    Ok(MaxGaussian::Found(GaussianResult::new(fit.point.a_mat, fit.point.h.exp(), fit.point.center)?))
}

/// The Gaussian limit read off one large-s John ellipsoid:
/// A_∞ = π^{-1/2} (μ / det Â)^{1/d} Â with Â = A/‖A‖ and μ the s-volume at unit height.
pub fn limit_gaussian(r: &JohnResult) -> Result<GaussianResult> {
    let e = &r.ellipsoid;
    let d = e.dim();
    let norm = e.a().clone().svd(false, false).singular_values.max();
    let a_hat = e.a() / norm;
    let mu = kappa_s(d, r.s) * e.det();
    let a_inf = limit_gaussian_matrix(&a_hat, mu);
    GaussianResult::new(a_inf, e.alpha().powf(r.s), e.center().clone())
}

pub fn limit_gaussian_matrix(a_hat: &Matrix, mu: f64) -> Matrix {
    let d = a_hat.nrows() as f64;
    a_hat * ((mu / a_hat.determinant()).powf(1.0 / d) / std::f64::consts::PI.sqrt())
}

/// Grid over [f ≥ e^{-d-1}‖f‖] with the points closer than the collar to ∂E removed.
pub struct ComparisonRegion {
    pub points: Vec<Vector>,
    pub diameter: f64,
    pub collar: f64,
}

impl ComparisonRegion {
    pub fn new(f: &LogConcaveFn, boundary_of: Option<&SymEllipsoid>, cfg: &RunConfig) -> Result<Self> {
        let d = f.dim();
        let (sup, xstar) = f.sup_norm()?;
        let level = -sup.ln() + d as f64 + 1.0;
        let r_max = 1e6 * (1.0 + xstar.norm() + f.hint().1);
        let (lo, hi) = level_box(f, &xstar, level, r_max).ok_or_else(|| Error::NonIntegrable("unbounded superlevel set".into()))?;
        let mut diameter: f64 = 0.0;
        for u in probe_directions(d) {
            let a = ray_exit(f, &xstar, &u, level, r_max).unwrap_or(0.0);
            let b = ray_exit(f, &xstar, &(-&u), level, r_max).unwrap_or(0.0);
            diameter = diameter.max(a + b);
        }
        let collar = cfg.limits.collar * diameter;
        let n = match (cfg.limits.dist_grid, d) {
            (0, 1) => 801,
            (0, 2) => 121,
            (0, _) => 31,
            (n, _) => n.max(2),
        };
        let sigma_min = boundary_of.map(|e| e.a().clone().svd(false, false).singular_values.min());
        let mut points = Vec::new();
        let total = n.pow(d as u32);
        for k in 0..total {
            let mut idx = k;
            let x = Vector::from_fn(d, |i, _| {
                let j = idx % n;
                idx /= n;
                lo[i] + (hi[i] - lo[i]) * j as f64 / (n - 1) as f64
            });
            if f.psi(&x) > level {
                continue;
            }
            if let (Some(e), Some(sm)) = (boundary_of, sigma_min) {
                if (e.q(&x).sqrt() - 1.0).abs() * sm < collar {
                    continue;
                }
            }
            points.push(x);
        }
        Ok(ComparisonRegion { points, diameter, collar })
    }

    pub fn sup_distance<F: Fn(&Vector) -> f64, G: Fn(&Vector) -> f64>(&self, a: F, b: G) -> f64 {
        self.points.iter().map(|x| (a(x) - b(x)).abs()).fold(0.0, f64::max)
    }
}

/// sup |J_s f - β₀χ_E| on the collar-excluded region.
pub fn dist_to_flat(f: &LogConcaveFn, r: &JohnResult, flat: &FlatResult, cfg: &RunConfig) -> Result<f64> {
    let region = ComparisonRegion::new(f, Some(&flat.ellipsoid()), cfg)?;
    Ok(region.sup_distance(|x| s_marginal_density(&r.ellipsoid, r.s, x), |x| flat.eval(x)))
}

/// sup |J_s f - G| on [f ≥ e^{-d-1}‖f‖].
pub fn dist_to_gaussian(f: &LogConcaveFn, r: &JohnResult, g: &GaussianResult, cfg: &RunConfig) -> Result<f64> {
    let region = ComparisonRegion::new(f, None, cfg)?;
    Ok(region.sup_distance(|x| s_marginal_density(&r.ellipsoid, r.s, x), |x| g.eval(x)))
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub s: f64,
    pub result: std::result::Result<JohnResult, String>,
    pub dist_to_flat: Option<f64>,
    pub dist_to_gaussian: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    pub flat: Option<FlatResult>,
    pub gaussian: Option<GaussianResult>,
}

fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else {
        format!("{x}")
    }
}

impl Sweep {
    pub fn to_csv(&self) -> String {
        let d = self.points.iter().find_map(|p| p.result.as_ref().ok().map(|r| r.ellipsoid.dim())).unwrap_or(0);
        let mut out = String::from("s,s_volume,alpha,detA");
        for i in 0..d {
            out.push_str(&format!(",center{i}"));
        }
        out.push_str(",dist_to_flat,dist_to_gaussian\n");
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        for p in &self.points {
            out.push_str(&fmt17(p.s));
            match &p.result {
                Ok(r) => {
                    out.push_str(&format!(",{},{},{}", fmt17(r.s_volume), fmt17(r.ellipsoid.alpha()), fmt17(r.ellipsoid.det())));
                    for i in 0..d {
                        out.push_str(&format!(",{}", fmt17(r.ellipsoid.center()[i])));
                    }
                }
                Err(_) => {
                    out.push_str(&",".repeat(3 + d));
                }
            }
            out.push_str(&format!(",{},{}\n", opt(p.dist_to_flat), opt(p.dist_to_gaussian)));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "points": self.points.iter().map(|p| match &p.result {
                Ok(r) => json!({"s": p.s, "result": r.to_json(), "dist_to_flat": p.dist_to_flat, "dist_to_gaussian": p.dist_to_gaussian}),
                Err(e) => json!({"s": p.s, "error": e}),
            }).collect::<Vec<_>>(),
            "flat": self.flat.as_ref().map(|f| f.to_json()),
            "gaussian": self.gaussian.as_ref().map(|g| g.to_json()),
        })
    }
}

fn run_chunk(f: &LogConcaveFn, s_list: &[f64], cfg: &RunConfig) -> Vec<std::result::Result<JohnResult, String>> {
    let mut warm: Option<SymEllipsoid> = None;
    s_list
        .iter()
        .map(|&s| {
            let r = solve_john_warm(f, s, warm.as_ref(), cfg).map_err(|e| e.to_string());
            if let Ok(ok) = &r {
                warm = Some(ok.ellipsoid.clone());
            }
            r
        })
        .collect()
}

/// Warm-started John ellipsoids along sorted `s_list`, with distances to both limit objects.
///
/// With `jobs > 1` the list is split into contiguous chunks solved on separate threads.
pub fn sweep(f: &LogConcaveFn, s_list: &[f64], jobs: usize, cfg: &RunConfig) -> Result<Sweep> {
    if s_list.is_empty() {
        return Err(Error::Input("empty s list".into()));
    }
    if s_list.windows(2).any(|w| !(w[0] <= w[1])) || s_list.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Input("s list must be positive and sorted".into()));
    }
    let jobs = jobs.clamp(1, s_list.len());
    let chunk = s_list.len().div_ceil(jobs);
    let results: Vec<_> = if jobs == 1 {
        run_chunk(f, s_list, cfg)
    } else {
        std::thread::scope(|sc| {
            let handles: Vec<_> = s_list.chunks(chunk).map(|c| sc.spawn(move || run_chunk(f, c, cfg))).collect();
            handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
        })
    };
    let flat = john_zero(f, cfg).ok();
    let gaussian = match max_gaussian(f, cfg) {
        Ok(MaxGaussian::Found(g)) => Some(g),
        _ => None,
    };
    let flat_region = flat.as_ref().and_then(|fl| ComparisonRegion::new(f, Some(&fl.ellipsoid()), cfg).ok());
    let plain_region = gaussian.as_ref().and_then(|_| ComparisonRegion::new(f, None, cfg).ok());
    let points = s_list
        .iter()
        .zip(results)
        .map(|(&s, result)| {
            let (df, dg) = match &result {
                Ok(r) => {
                    let j = |x: &Vector| s_marginal_density(&r.ellipsoid, s, x);
                    (
                        flat.as_ref().zip(flat_region.as_ref()).map(|(fl, reg)| reg.sup_distance(j, |x| fl.eval(x))),
                        gaussian.as_ref().zip(plain_region.as_ref()).map(|(g, reg)| reg.sup_distance(j, |x| g.eval(x))),
                    )
                }
                Err(_) => (None, None),
            };
            SweepPoint { s, result, dist_to_flat: df, dist_to_gaussian: dg }
        })
        .collect();
    Ok(Sweep { points, flat, gaussian })
}

/// (∫f / ∫J_s f)^{1/d}; s = 0 uses the flat limit.
pub fn integral_ratio(f: &LogConcaveFn, s: f64, cfg: &RunConfig) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Input("s must be nonnegative".into()));
    }
    let total = crate::quad::integrate(f, &cfg.geom)?;
    let inner = if s == 0.0 { john_zero(f, cfg)?.objective } else { crate::solver::solve_john(f, s, cfg)?.s_volume };
    Ok((total / inner).powf(1.0 / f.dim() as f64))
}

/// B(s/2 + 1, d/2)^{-1/d}, the factor relating the ratios at s and at 0.
pub fn ratio_factor(d: usize, s: f64) -> f64 {
    beta(s / 2.0 + 1.0, d as f64 / 2.0).powf(-1.0 / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnalg::Halfspace;
    use crate::linalg::vector;
    use approx::assert_relative_eq;

    #[test]
    fn ball_in_cube_and_incircle() {
        let cfg = RunConfig::default();
        let f = LogConcaveFn::flat_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0).unwrap();
        let (a, c) = inscribed_ellipsoid(&f.superlevel(0.5).unwrap(), &cfg).unwrap();
        assert!((a - Matrix::identity(2, 2)).amax() < 1e-5);
        assert!(c.amax() < 1e-5);
        let tri = LogConcaveFn::exp_polyhedral(
            vec![(vector(&[0.0, 0.0]), 0.0)],
            vec![
                Halfspace::new(vector(&[-1.0, 0.0]), 0.0),
                Halfspace::new(vector(&[0.0, -1.0]), 0.0),
                Halfspace::new(vector(&[1.0, 1.0]), 2.0),
            ],
        )
        .unwrap();
        let (a, c) = inscribed_ellipsoid(&tri.superlevel(0.5).unwrap(), &cfg).unwrap();
        // Steiner inellipse: A² = (1/6) Σ (vᵢ - g)(vᵢ - g)ᵀ, centered at the centroid g
        let a2 = Matrix::from_row_slice(2, 2, &[4.0 / 9.0, -2.0 / 9.0, -2.0 / 9.0, 4.0 / 9.0]);
        assert!((&a * &a - a2).amax() < 1e-5);
        assert!((c - vector(&[2.0 / 3.0, 2.0 / 3.0])).amax() < 1e-5);
    }

    #[test]
    fn flat_limit_of_exp_abs() {
        let f = LogConcaveFn::exp_polyhedral(vec![(vector(&[1.0]), 0.0), (vector(&[-1.0]), 0.0)], vec![]).unwrap();
        let z = john_zero(&f, &RunConfig::default()).unwrap();
        assert!((z.beta0 - (-1f64).exp()).abs() < 1e-4);
        assert!((z.objective - 2.0 / std::f64::consts::E).abs() < 1e-4);
    }

    #[test]
    fn flat_limit_of_gaussian() {
        let f = LogConcaveFn::gaussian(Matrix::identity(1, 1), 1.0, vector(&[0.0])).unwrap();
        let z = john_zero(&f, &RunConfig::default()).unwrap();
        assert!((z.beta0 - (-0.5f64).exp()).abs() < 1e-4);
        assert!((z.objective - 2f64.sqrt() * (-0.5f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn gaussian_is_its_own_max() {
        let f = LogConcaveFn::gaussian(Matrix::identity(2, 2) * 1.3, 0.8, vector(&[0.2, -0.1])).unwrap();
        let MaxGaussian::Found(g) = max_gaussian(&f, &RunConfig::default()).unwrap() else { panic!() };
        assert!((g.a_mat - Matrix::identity(2, 2) * 1.3).amax() < 1e-4);
        assert_relative_eq!(g.alpha, 0.8, max_relative = 1e-4);
    }

    #[test]
    fn none_below_bounded_support() {
        let f = LogConcaveFn::flat_box(&[-1.0], &[1.0], 1.0).unwrap();
        assert!(matches!(max_gaussian(&f, &RunConfig::default()).unwrap(), MaxGaussian::NoneBelow));
    }

    #[test]
    fn limit_matrix_of_balls() {
        // s-volume of √s·B ⊕ 1 tends to π^{d/2} 2^{d/2}
        let a = limit_gaussian_matrix(&Matrix::identity(2, 2), 2.0 * std::f64::consts::PI);
        assert_relative_eq!(a[(0, 0)], 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn cube_ratio_at_zero() {
        let f = LogConcaveFn::flat_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0).unwrap();
        let r = integral_ratio(&f, 0.0, &RunConfig::default()).unwrap();
        assert_relative_eq!(r, (4.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-5);
    }
}
