//! Derivative-free local search, 1-D unimodal search, the central-cut
//! ellipsoid method and nonnegative least squares for small problems.

use crate::{Matrix, Vector};

const INVPHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug)]
pub struct NmOptions {
    pub max_evals: usize,
    pub ftol: f64,
    pub xtol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions { max_evals: 4000, ftol: 1e-14, xtol: 1e-11 }
    }
}

/// Nelder–Mead maximization. Infeasible points should return -∞.
pub fn nelder_mead_max<F: FnMut(&Vector) -> f64>(mut f: F, x0: &Vector, step: f64, opts: NmOptions) -> (Vector, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vector, f64)> = Vec::with_capacity(n + 1);
    let f0 = f(x0);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += step;
        let mut fx = f(&x);
        if !(fx > f64::NEG_INFINITY) {
            x[i] = x0[i] - step;
            fx = f(&x);
        }
        simplex.push((x, fx));
    }
    let mut evals = n + 1;
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| key(b.1).partial_cmp(&key(a.1)).unwrap());
        let best = key(simplex[0].1);
        let worst = key(simplex[n].1);
        let spread = simplex.iter().skip(1).map(|(x, _)| (x - &simplex[0].0).amax()).fold(0.0, f64::max);
        if best.is_finite() && worst.is_finite() && (best - worst).abs() <= opts.ftol * (1.0 + best.abs()) && spread <= opts.xtol {
            break;
        }
        if spread <= 1e-15 {
            break;
        }
        let mut centroid = Vector::zeros(n);
        for (x, _) in simplex.iter().take(n) {
            centroid += x;
        }
        centroid /= n as f64;
        let xr = &centroid + (&centroid - &simplex[n].0);
        let fr = key(f(&xr));
        evals += 1;
        if fr > best {
            let xe = &centroid + (&xr - &centroid) * 2.0;
            let fe = key(f(&xe));
            evals += 1;
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > key(simplex[n - 1].1) {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr > worst {
            let xc = &centroid + (&xr - &centroid) * 0.5;
            let fc = key(f(&xc));
            (xc, fc)
        } else {
            let xc = &centroid + (&simplex[n].0 - &centroid) * 0.5;
            let fc = key(f(&xc));
            (xc, fc)
        };
        evals += 1;
        if fc > worst.max(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let x = &x_best + (&item.0 - &x_best) * 0.5;
            let fx = key(f(&x));
            *item = (x, fx);
            evals += 1;
        }
    }
    simplex.sort_by(|a, b| key(b.1).partial_cmp(&key(a.1)).unwrap());
    let (x, fx) = simplex.swap_remove(0);
    (x, fx)
}

/// Golden-section maximization of a unimodal function on [lo, hi].
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > tol && iters < 400 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1);
        }
        iters += 1;
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Answer of a first-order oracle at a query point.
pub enum Cut {
    /// Objective value and a subgradient.
    Value(f64, Vector),
    /// The point is infeasible; the feasible set lies in {y : ⟨g, y - x⟩ ≤ -depth}.
    Infeasible(Vector, f64),
}

#[derive(Clone, Copy, Debug)]
pub struct EllipsoidOptions {
    pub max_iters: usize,
    pub abs_tol: f64,
}

impl Default for EllipsoidOptions {
    fn default() -> Self {
        EllipsoidOptions { max_iters: 3000, abs_tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct EllipsoidOutcome {
    pub x: Vector,
    pub value: f64,
    pub feasible: bool,
    pub gap_bound: f64,
}

/// Convex minimization by the ellipsoid method (bisection in dimension one).
pub fn ellipsoid_min<F: FnMut(&Vector) -> Cut>(mut oracle: F, center: &Vector, radius: f64, opts: EllipsoidOptions) -> EllipsoidOutcome {
    let n = center.len();
    let mut best = EllipsoidOutcome { x: center.clone(), value: f64::INFINITY, feasible: false, gap_bound: f64::INFINITY };
    if n == 1 {
        let mut lo = center[0] - radius;
        let mut hi = center[0] + radius;
        for _ in 0..opts.max_iters.min(400) {
            let mid = 0.5 * (lo + hi);
            let x = Vector::from_element(1, mid);
            match oracle(&x) {
                Cut::Value(v, g) => {
                    if v < best.value {
                        best.value = v;
                        best.x = x.clone();
                        best.feasible = true;
                    }
                    let gap = g[0].abs() * (hi - lo) * 0.5;
                    if gap < best.gap_bound {
                        best.gap_bound = gap;
                    }
                    if g[0] > 0.0 {
                        hi = mid;
                    } else if g[0] < 0.0 {
                        lo = mid;
                    } else {
                        best.gap_bound = 0.0;
                        break;
                    }
                }
                Cut::Infeasible(g, _) => {
                    if g[0] > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            if hi - lo < 1e-15 * (1.0 + mid.abs()) {
                break;
            }
            if best.feasible && best.gap_bound <= opts.abs_tol && hi - lo < 1e-9 * (1.0 + mid.abs()) {
                break;
            }
        }
        return best;
    }
    let nf = n as f64;
    let mut x = center.clone();
    let mut p = crate::Matrix::identity(n, n) * (radius * radius);
    for _ in 0..opts.max_iters {
        let (g, depth, value) = match oracle(&x) {
            Cut::Value(v, g) => (g, 0.0, Some(v)),
            Cut::Infeasible(g, depth) => (g, depth.max(0.0), None),
        };
        let pg = &p * &g;
        let gpg = g.dot(&pg);
        if !(gpg > 0.0) || !gpg.is_finite() {
            if let Some(v) = value {
                if v < best.value {
                    best = EllipsoidOutcome { x: x.clone(), value: v, feasible: true, gap_bound: 0.0 };
                }
            }
            break;
        }
        let norm = gpg.sqrt();
        if let Some(v) = value {
            if v < best.value {
                best.value = v;
                best.x = x.clone();
                best.feasible = true;
            }
            if norm < best.gap_bound {
                best.gap_bound = norm;
            }
            if best.feasible && norm <= opts.abs_tol {
                break;
            }
        }
        let alpha = (depth / norm).min(0.9);
        let gt = pg / norm;
        let tau = (1.0 + nf * alpha) / (nf + 1.0);
        let sigma = 2.0 * (1.0 + nf * alpha) / ((nf + 1.0) * (1.0 + alpha));
        let delta = nf * nf * (1.0 - alpha * alpha) / (nf * nf - 1.0);
        x -= &gt * tau;
        p = (&p - &gt * gt.transpose() * sigma) * delta;
        p = (&p + p.transpose()) * 0.5;
        if p.diagonal().amax() < 1e-30 {
            break;
        }
    }
    best
}

/// min ‖A x - b‖ over x ≥ 0 by the Lawson–Hanson active-set method.
pub fn nnls(a: &Matrix, b: &Vector) -> Vector {
    let n = a.ncols();
    let mut x = Vector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-14 * (1.0 + a.amax()) * (1.0 + b.amax()) * (a.nrows().max(n) as f64);
    let solve_passive = |passive: &[bool]| -> Vector {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select_columns(&idx);
        let z = sub.svd(true, true).solve(b, 1e-13).unwrap_or_else(|_| Vector::zeros(idx.len()));
        let mut full = Vector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = z[k];
        }
        full
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = pick else { break };
        passive[j] = true;
        for _ in 0..3 * n + 10 {
            let z = solve_passive(&passive);
            if (0..n).all(|k| !passive[k] || z[k] > 0.0) {
                x = z;
                break;
            }
            let mut step = 1.0f64;
            for k in 0..n {
                if passive[k] && z[k] <= 0.0 {
                    step = step.min(x[k] / (x[k] - z[k]));
                }
            }
            x += (z - &x) * step;
            for k in 0..n {
                if passive[k] && x[k] <= 1e-15 {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    #[test]
    fn nm_finds_quadratic_max() {
        let (x, fx) =
            nelder_mead_max(|v| -(v[0] - 0.3).powi(2) - 2.0 * (v[1] + 0.1).powi(2), &vector(&[0.0, 0.0]), 0.2, NmOptions::default());
        assert!((x[0] - 0.3).abs() < 1e-6 && (x[1] + 0.1).abs() < 1e-6);
        assert!(fx.abs() < 1e-12);
    }

    #[test]
    fn golden_on_concave() {
        let (x, _) = golden_max(|t| -(t - 1.25).powi(2), -3.0, 4.0, 1e-10);
        assert!((x - 1.25).abs() < 1e-8);
    }

    #[test]
    fn ellipsoid_method_nonsmooth() {
        for d in 1..=3 {
            let target: Vec<f64> = (0..d).map(|i| 0.5 - 0.3 * i as f64).collect();
            let out = ellipsoid_min(
                |x| {
                    let mut g = Vector::zeros(d);
                    let mut v = 0.0;
                    for i in 0..d {
                        v += (x[i] - target[i]).abs();
                        g[i] = (x[i] - target[i]).signum();
                    }
                    Cut::Value(v, g)
                },
                &Vector::zeros(d),
                10.0,
                EllipsoidOptions::default(),
            );
            assert!(out.value < 1e-9, "d={d} value={}", out.value);
        }
    }

    #[test]
    fn ellipsoid_method_respects_feasibility() {
        // minimize x + y on the disk of radius 1 around (2, 0)
        let out = ellipsoid_min(
            |x| {
                let dx = x[0] - 2.0;
                let r2 = dx * dx + x[1] * x[1];
                if r2 > 1.0 {
                    Cut::Infeasible(vector(&[dx, x[1]]), 0.0)
                } else {
                    Cut::Value(x[0] + x[1], vector(&[1.0, 1.0]))
                }
            },
            &Vector::zeros(2),
            20.0,
            EllipsoidOptions::default(),
        );
        assert!((out.value - (2.0 - 2f64.sqrt())).abs() < 1e-8);
    }

    #[test]
    fn nnls_feasible_system() {
        let a = Matrix::from_row_slice(4, 4, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
        let b = Vector::from_column_slice(&[1.0, 0.0, 0.5, 0.0]);
        let x = nnls(&a, &b);
        assert!((&a * &x - &b).norm() < 1e-14);
        assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn nnls_clips_negative_direction() {
        let a = Matrix::identity(2, 2);
        let x = nnls(&a, &Vector::from_column_slice(&[1.0, -2.0]));
        assert_eq!(x.as_slice(), &[1.0, 0.0]);
    }
}
