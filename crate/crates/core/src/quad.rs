//! Integration of log-concave functions: nested adaptive Gauss–Kronrod for
//! d ≤ 2 and randomized Halton sampling for d = 3, over a box found by ray probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::GeomConfig;
use crate::fnalg::{level_box, LogConcaveFn};
use crate::optim::golden_max;
use crate::{Error, Result, Vector};

/// Drop below the peak (in units of log f) beyond which mass is ignored.
const LOG_DROP: f64 = 45.0;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature on [a, b].
pub fn gk_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> (f64, f64) {
    if !(b > a) {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) && parts.len() < 4000 {
        let (idx, _) = parts.iter().enumerate().max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap()).unwrap();
        let (lo, hi, v0, e0) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            parts.push((lo, hi, v0, 0.0));
            err -= e0;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    let total: f64 = parts.iter().map(|p| p.2).sum();
    let err: f64 = parts.iter().map(|p| p.3).sum();
    (total, err)
}

/// Sub-interval of [lo, hi] on which p + t·dir lies in the closed support of f.
pub fn line_support(f: &LogConcaveFn, p: &Vector, dir: &Vector, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let ex = |t: f64| f.support_excess(&(p + dir * t)).map(|e| e.0);
    if ex(lo).is_none() {
        return Some((lo, hi));
    }
    let g = |t: f64| ex(t).unwrap_or(f64::NEG_INFINITY);
    let (tm, vm) = golden_max(|t| -g(t), lo, hi, 1e-13 * (1.0 + hi.abs() + lo.abs()));
    if -vm > 0.0 {
        let (gl, gh) = (g(lo), g(hi));
        let t = if gl <= 0.0 {
            lo
        } else if gh <= 0.0 {
            hi
        } else {
            return None;
        };
        return bracket_support(&g, t, lo, hi);
    }
    bracket_support(&g, tm, lo, hi)
}

fn bracket_support<G: Fn(f64) -> f64>(g: &G, inside: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let edge = |mut a: f64, mut b: f64| {
        // a inside, b outside
        if g(b) <= 0.0 {
            return b;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(m) <= 0.0 {
                a = m;
            } else {
                b = m;
            }
            if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
                break;
            }
        }
        a
    };
    Some((edge(inside, lo), edge(inside, hi)))
}

/// ∫ f over R^d for d ≤ 3.
pub fn integrate(f: &LogConcaveFn, cfg: &GeomConfig) -> Result<f64> {
    let d = f.dim();
    if d > 3 {
        return Err(Error::Unsupported(format!("integration in dimension {d}")));
    }
    let (sup, xstar) = f.sup_norm()?;
    let psi_star = -sup.ln();
    let scale = f.hint().1;
    let r_max = 1e6 * (1.0 + scale + xstar.norm());
    let (lo, hi) = level_box(f, &xstar, psi_star + LOG_DROP, r_max)
        .ok_or_else(|| Error::NonIntegrable("the function does not decay along some ray".into()))?;
    let g = |x: &Vector| {
        let p = f.psi(x);
        if p == f64::INFINITY {
            0.0
        } else {
            (psi_star - p).exp()
        }
    };
    let rel = cfg.rel_tol;
    let val = match d {
        1 => {
            let (a, b) = match line_support(f, &Vector::zeros(1), &Vector::from_element(1, 1.0), lo[0], hi[0]) {
                Some(ab) => ab,
                None => return Err(Error::Degenerate("empty support".into())),
            };
            gk_adaptive(|t| g(&Vector::from_element(1, t)), a, b, rel * 0.1, 1e-300).0
        }
        2 => {
            let e2 = Vector::from_column_slice(&[0.0, 1.0]);
            let inner = |x1: f64| {
                let base = Vector::from_column_slice(&[x1, 0.0]);
                match line_support(f, &base, &e2, lo[1], hi[1]) {
                    Some((a, b)) => gk_adaptive(|t| g(&Vector::from_column_slice(&[x1, t])), a, b, rel * 0.01, 1e-300).0,
                    None => 0.0,
                }
            };
            let e1 = Vector::from_column_slice(&[1.0, 0.0]);
            let (a, b) = line_support_projection(f, &e1, &lo, &hi).unwrap_or((lo[0], hi[0]));
            gk_adaptive(inner, a, b, rel * 0.1, 1e-300).0
        }
        _ => halton_integrate(&g, &lo, &hi, rel.max(1e-3), cfg.seed),
    };
    if !val.is_finite() {
        return Err(Error::NonIntegrable("integral overflowed".into()));
    }
    Ok(val * sup)
}

/// Range of the first coordinate over the support within the box (tight when the support is polyhedral).
fn line_support_projection(f: &LogConcaveFn, e1: &Vector, lo: &Vector, hi: &Vector) -> Option<(f64, f64)> {
    if !f.has_restricted_support() {
        return None;
    }
    let up = f.support_function(e1);
    let down = -f.support_function(&(-e1));
    if up.is_finite() && down.is_finite() {
        Some((down.max(lo[0]), up.min(hi[0])))
    } else {
        None
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

fn halton_integrate<G: Fn(&Vector) -> f64>(g: &G, lo: &Vector, hi: &Vector, rel: f64, seed: u64) -> f64 {
    const BASES: [u64; 3] = [2, 3, 5];
    const SHIFTS: usize = 8;
    let d = lo.len();
    let vol: f64 = (0..d).map(|i| hi[i] - lo[i]).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<Vec<f64>> = (0..SHIFTS).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let mut sums = [0.0; SHIFTS];
    let mut n: u64 = 0;
    let mut target: u64 = 1 << 13;
    loop {
        while n < target {
            let i = n + 1;
            let base: Vec<f64> = (0..d).map(|k| radical_inverse(i, BASES[k])).collect();
            for (sh, sum) in shifts.iter().zip(sums.iter_mut()) {
                let x = Vector::from_fn(d, |k, _| {
                    let u = (base[k] + sh[k]).fract();
                    lo[k] + u * (hi[k] - lo[k])
                });
                *sum += g(&x);
            }
            n += 1;
        }
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let mean = means.iter().sum::<f64>() / SHIFTS as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (SHIFTS as f64 - 1.0);
        let stderr = (var / SHIFTS as f64).sqrt();
        if stderr <= 0.25 * rel * mean.abs() || target >= 1 << 20 {
            return mean * vol;
        }
        target *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;
    use crate::Matrix;
    use approx::assert_relative_eq;

    #[test]
    fn gk_polynomial_exact() {
        let (v, _) = gk_adaptive(|x| x.powi(6) - 2.0 * x, -1.0, 2.0, 1e-14, 0.0);
        assert_relative_eq!(v, (128.0 + 1.0) / 7.0 - 3.0, max_relative = 1e-13);
    }

    #[test]
    fn gaussian_integrals() {
        let cfg = GeomConfig::default();
        for d in 1..=2 {
            let a = Matrix::identity(d, d) * 1.5;
            let f = LogConcaveFn::gaussian(a.clone(), 0.7, Vector::from_element(d, 0.3)).unwrap();
            let exact = 0.7 * std::f64::consts::PI.powf(d as f64 / 2.0) * a.determinant();
            assert_relative_eq!(integrate(&f, &cfg).unwrap(), exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn cube_and_exp_abs() {
        let cfg = GeomConfig::default();
        for d in 1..=2 {
            let f = LogConcaveFn::flat_box(&vec![-1.0; d], &vec![1.0; d], 1.0).unwrap();
            assert_relative_eq!(integrate(&f, &cfg).unwrap(), 2f64.powi(d as i32), max_relative = 1e-12);
        }
        let f = LogConcaveFn::exp_polyhedral(vec![(vector(&[1.0]), 0.0), (vector(&[-1.0]), 0.0)], vec![]).unwrap();
        assert_relative_eq!(integrate(&f, &cfg).unwrap(), 2.0, max_relative = 1e-8);
    }

    #[test]
    fn halfspace_is_not_integrable() {
        let f = LogConcaveFn::flat_box(&[-1.0], &[1.0], 1.0).unwrap();
        let LogConcaveFn::ExpPolyhedral { pieces, mut domain } = f else { unreachable!() };
        domain.pop();
        let g = LogConcaveFn::exp_polyhedral(pieces, domain).unwrap();
        assert!(matches!(integrate(&g, &GeomConfig::default()), Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn ball_in_three_dimensions() {
        let f = LogConcaveFn::flat_ellipsoid(Matrix::identity(3, 3), 1.0, Vector::zeros(3)).unwrap();
        let v = integrate(&f, &GeomConfig::default()).unwrap();
        assert_relative_eq!(v, 4.0 / 3.0 * std::f64::consts::PI, max_relative = 5e-3);
    }
}
