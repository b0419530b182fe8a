//! Barrier method for the determinant-maximization programs behind every
//! ellipsoid fit in the crate.
//!
//! Variables are a symmetric matrix A, a center a and (optionally) a log-height h.
//! The objective log det A + h is maximized subject to
//!
//! * minorant cuts ⟨g, a⟩ + c₀ + h + φ(‖A g‖) ≤ 0, one per affine minorant
//!   ψ(y) ≥ ⟨g, y⟩ + c₀ of the potential,
//! * support cuts ‖A n‖ + ⟨n, a⟩ ≤ c, one per halfspace containing the support.
//!
//! φ is the convex conjugate-type profile of the fitted shape: the s-lift of a
//! ball, a flat disc, or a Gaussian. Every constraint is jointly convex.

use nalgebra::Cholesky;

use crate::fnalg::Halfspace;
use crate::linalg::{self, sym_basis, sym_dim, sym_from_params, sym_pairs, sym_to_params};
use crate::optim::{ellipsoid_min, Cut, EllipsoidOptions};
use crate::scalar::lift_profile;
use crate::{Error, Matrix, Result, Vector};

/// The shape whose height profile enters the minorant cuts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// φ(ρ) = max_r rρ + (s/2) log(1 - r²).
    Lift(f64),
    /// φ(ρ) = ρ.
    Flat,
    /// φ(ρ) = ρ²/4.
    Gauss,
}

impl Profile {
    /// (φ(ρ), φ'(ρ)/ρ, φ''(ρ)).
    fn eval(&self, rho: f64) -> (f64, f64, f64) {
        match *self {
            Profile::Lift(s) => {
                let (phi, _, dr) = lift_profile(s, rho);
                let disc = (s * s + 4.0 * rho * rho).sqrt();
                (phi, 2.0 / (s + disc), dr)
            }
            Profile::Flat => (rho, if rho > 0.0 { 1.0 / rho } else { 0.0 }, 0.0),
            Profile::Gauss => (0.25 * rho * rho, 0.5, 0.5),
        }
    }

    pub fn phi(&self, rho: f64) -> f64 {
        self.eval(rho).0
    }
}

/// Affine minorant ψ(y) ≥ ⟨g, y⟩ + c₀.
#[derive(Clone, Debug, PartialEq)]
pub struct Minorant {
    pub g: Vector,
    pub c0: f64,
}

impl Minorant {
    /// Tangent minorant of a convex ψ at x from a value and subgradient.
    pub fn tangent(x: &Vector, value: f64, grad: &Vector) -> Self {
        Minorant { g: grad.clone(), c0: value - grad.dot(x) }
    }
}

#[derive(Clone, Debug)]
pub struct ProgramPoint {
    pub a_mat: Matrix,
    pub center: Vector,
    pub h: f64,
}

#[derive(Clone, Debug)]
pub struct ProgramSolution {
    pub point: ProgramPoint,
    pub objective: f64,
    pub minorant_duals: Vec<f64>,
    pub support_duals: Vec<f64>,
    pub newton_steps: usize,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub d: usize,
    pub profile: Profile,
    pub minorants: Vec<Minorant>,
    pub supports: Vec<Halfspace>,
    /// Height held fixed instead of optimized.
    pub fixed_h: Option<f64>,
}

struct Eval {
    value: f64,
    grad: Vector,
    hess: Matrix,
}

impl Program {
    pub fn new(d: usize, profile: Profile) -> Self {
        Program { d, profile, minorants: Vec::new(), supports: Vec::new(), fixed_h: None }
    }

    fn nvars(&self) -> usize {
        sym_dim(self.d) + self.d + usize::from(self.fixed_h.is_none())
    }

    fn pack(&self, p: &ProgramPoint) -> Vector {
        let m = sym_dim(self.d);
        let mut z = Vector::zeros(self.nvars());
        for (k, v) in sym_to_params(&p.a_mat).into_iter().enumerate() {
            z[k] = v;
        }
        for i in 0..self.d {
            z[m + i] = p.center[i];
        }
        if self.fixed_h.is_none() {
            z[m + self.d] = p.h;
        }
        z
    }

    fn unpack(&self, z: &Vector) -> ProgramPoint {
        let m = sym_dim(self.d);
        let a_mat = sym_from_params(&z.as_slice()[..m], self.d);
        let center = Vector::from_column_slice(&z.as_slice()[m..m + self.d]);
        let h = self.fixed_h.unwrap_or_else(|| z[m + self.d]);
        ProgramPoint { a_mat, center, h }
    }

    /// Constraint values, all of which must be negative for strict feasibility.
    pub fn constraint_values(&self, p: &ProgramPoint) -> (Vec<f64>, Vec<f64>) {
        let mv = self.minorants.iter().map(|c| c.g.dot(&p.center) + c.c0 + p.h + self.profile.phi((&p.a_mat * &c.g).norm())).collect();
        let sv = self.supports.iter().map(|h| (&p.a_mat * &h.n).norm() + h.n.dot(&p.center) - h.c).collect();
        (mv, sv)
    }

    /// d × m matrix whose k-th column is B_k g.
    fn jv(&self, g: &Vector) -> Matrix {
        let m = sym_dim(self.d);
        let mut j = Matrix::zeros(self.d, m);
        for (k, &(r, c)) in sym_pairs(self.d).iter().enumerate() {
            j[(r, k)] += g[c];
            if r != c {
                j[(c, k)] += g[r];
            }
        }
        j
    }

    /// Value, gradient and Hessian of a norm-profile term φ(‖A g‖) + ⟨g, a⟩ (+ h).
    fn term(&self, a_mat: &Matrix, g: &Vector, profile: Profile, with_h: bool) -> Eval {
        let n = self.nvars();
        let m = sym_dim(self.d);
        let v = a_mat * g;
        let rho = v.norm();
        let (phi, k1, phi2) = profile.eval(rho);
        let mut grad = Vector::zeros(n);
        let mut hess = Matrix::zeros(n, n);
        if rho > 0.0 {
            let j = self.jv(g);
            let gp = j.transpose() * (&v * k1);
            let u = &v / rho;
            let uu = &u * u.transpose();
            let mm = &uu * phi2 + (Matrix::identity(self.d, self.d) - &uu) * k1;
            let hp = j.transpose() * mm * &j;
            for a in 0..m {
                grad[a] = gp[a];
                for b in 0..m {
                    hess[(a, b)] = hp[(a, b)];
                }
            }
        }
        for i in 0..self.d {
            grad[m + i] = g[i];
        }
        if with_h && self.fixed_h.is_none() {
            grad[m + self.d] = 1.0;
        }
        Eval { value: phi, grad, hess }
    }

    /// Barrier t·objective + Σ log(-C) with derivatives; None when infeasible.
    fn barrier(&self, z: &Vector, t: f64, derivs: bool) -> Option<(f64, Vector, Matrix)> {
        let n = self.nvars();
        let m = sym_dim(self.d);
        let p = self.unpack(z);
        let chol = Cholesky::new(p.a_mat.clone())?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mut value = t * (logdet + if self.fixed_h.is_none() { p.h } else { 0.0 });
        let mut grad = Vector::zeros(n);
        let mut hess = Matrix::zeros(n, n);
        let mut cons: Vec<(f64, Option<Eval>)> = Vec::with_capacity(self.minorants.len() + self.supports.len());
        for c in &self.minorants {
            if derivs {
                let e = self.term(&p.a_mat, &c.g, self.profile, true);
                let cv = e.value + c.g.dot(&p.center) + c.c0 + p.h;
                cons.push((cv, Some(e)));
            } else {
                let cv = self.profile.phi((&p.a_mat * &c.g).norm()) + c.g.dot(&p.center) + c.c0 + p.h;
                cons.push((cv, None));
            }
        }
        for hs in &self.supports {
            if derivs {
                let e = self.term(&p.a_mat, &hs.n, Profile::Flat, false);
                let cv = e.value + hs.n.dot(&p.center) - hs.c;
                cons.push((cv, Some(e)));
            } else {
                cons.push(((&p.a_mat * &hs.n).norm() + hs.n.dot(&p.center) - hs.c, None));
            }
        }
        for (cv, _) in &cons {
            if !(*cv < 0.0) {
                return None;
            }
            value += (-cv).ln();
        }
        if !derivs {
            return Some((value, grad, hess));
        }
        let w = chol.inverse();
        let wb: Vec<Matrix> = (0..m).map(|k| &w * sym_basis(k, self.d)).collect();
        for k in 0..m {
            grad[k] += t * wb[k].trace();
            for l in k..m {
                let v = -t * (&wb[k] * &wb[l]).trace();
                hess[(k, l)] += v;
                if l != k {
                    hess[(l, k)] += v;
                }
            }
        }
        if self.fixed_h.is_none() {
            grad[m + self.d] += t;
        }
        for (cv, e) in cons {
            let e = e.unwrap();
            let inv = 1.0 / cv;
            grad += &e.grad * inv;
            hess += &e.hess * inv;
            hess -= &e.grad * e.grad.transpose() * (inv * inv);
        }
        Some((value, grad, hess))
    }

    fn objective(&self, p: &ProgramPoint) -> f64 {
        linalg::log_det_spd(&p.a_mat).unwrap_or(f64::NEG_INFINITY) + if self.fixed_h.is_none() { p.h } else { 0.0 }
    }

    fn strictly_feasible(&self, p: &ProgramPoint) -> bool {
        if Cholesky::new(p.a_mat.clone()).is_none() {
            return false;
        }
        let (mv, sv) = self.constraint_values(p);
        mv.iter().chain(sv.iter()).all(|v| *v < 0.0)
    }

    /// Largest h keeping every minorant cut satisfied at (A, a).
    fn h_room(&self, a_mat: &Matrix, center: &Vector) -> f64 {
        self.minorants.iter().map(|c| -(c.g.dot(center) + c.c0 + self.profile.phi((a_mat * &c.g).norm()))).fold(f64::INFINITY, f64::min)
    }

    fn initial_point(&self, start: Option<&ProgramPoint>, hint_center: &Vector, scale: f64) -> Result<ProgramPoint> {
        if let Some(p0) = start {
            let mut p = p0.clone();
            for _ in 0..80 {
                if self.fixed_h.is_none() {
                    let room = self.h_room(&p.a_mat, &p.center);
                    if room.is_finite() {
                        p.h = p.h.min(room - 1.0);
                    }
                }
                if self.strictly_feasible(&p) {
                    return Ok(p);
                }
                p.a_mat *= 0.8;
            }
        }
        let d = self.d;
        let fixed = self.fixed_h;
        // Phase I: a center with slack in every support cut (and every minorant cut when h is fixed).
        let slack = |a: &Vector| -> (f64, Vector) {
            let mut worst = f64::NEG_INFINITY;
            let mut grad = Vector::zeros(d);
            for hs in &self.supports {
                let v = hs.n.dot(a) - hs.c;
                if v > worst {
                    worst = v;
                    grad = hs.n.clone();
                }
            }
            if let Some(h) = fixed {
                for c in &self.minorants {
                    let gn = c.g.norm().max(1e-300);
                    let v = (c.g.dot(a) + c.c0 + h) / gn;
                    if v > worst {
                        worst = v;
                        grad = &c.g / gn;
                    }
                }
            }
            (worst, grad)
        };
        let mut center = hint_center.clone();
        let (w0, _) = slack(&center);
        if w0 > -1e-9 * scale && w0.is_finite() {
            let out = ellipsoid_min(
                |a| {
                    let (v, g) = slack(a);
                    Cut::Value(v, g)
                },
                &center,
                1e3 * (scale + center.norm()),
                EllipsoidOptions { max_iters: 4000, abs_tol: 1e-12 * scale },
            );
            if !(out.value < 0.0) {
                return Err(Error::Infeasible("no strictly feasible center for the cuts".into()));
            }
            center = out.x;
        }
        let (w, _) = slack(&center);
        let mut eps = if w.is_finite() { 0.5 * (-w).min(scale) } else { 0.1 * scale };
        for _ in 0..200 {
            let a_mat = Matrix::identity(d, d) * eps;
            let h = match fixed {
                Some(h) => h,
                None => {
                    let room = self.h_room(&a_mat, &center);
                    if room.is_finite() {
                        room - 1.0
                    } else {
                        0.0
                    }
                }
            };
            let p = ProgramPoint { a_mat, center: center.clone(), h };
            if self.strictly_feasible(&p) {
                return Ok(p);
            }
            eps *= 0.5;
        }
        Err(Error::Infeasible("could not find a strictly feasible ellipsoid".into()))
    }

    /// Solve to duality gap `gap_tol`, warm-starting from `start` when it can be made feasible.
    pub fn solve(&self, start: Option<&ProgramPoint>, hint_center: &Vector, scale: f64, gap_tol: f64) -> Result<ProgramSolution> {
        let p0 = self.initial_point(start, hint_center, scale.max(1e-12))?;
        let mut z = self.pack(&p0);
        let ncons = (self.minorants.len() + self.supports.len()).max(1) as f64;
        let mut t = 1.0;
        let mut steps = 0;
        loop {
            for _ in 0..200 {
                let (val, g, h) = self.barrier(&z, t, true).expect("iterate stays feasible");
                let neg = -h;
                let dz = match Cholesky::new(neg.clone()) {
                    Some(c) => c.solve(&g),
                    None => {
                        let reg = neg + Matrix::identity(g.len(), g.len()) * (1e-12 * (1.0 + g.amax()));
                        match reg.lu().solve(&g) {
                            Some(v) => v,
                            None => break,
                        }
                    }
                };
                let dec = g.dot(&dz);
                steps += 1;
                if !(dec > 1e-14) {
                    break;
                }
                let mut step = 1.0;
                let mut moved = false;
                while step > 1e-14 {
                    let zn = &z + &dz * step;
                    if let Some((vn, _, _)) = self.barrier(&zn, t, false) {
                        if vn >= val + 0.01 * step * dec - 1e-13 * val.abs() {
                            z = zn;
                            moved = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if !moved || dec < 1e-11 {
                    break;
                }
                if z.amax() > 1e12 {
                    return Err(Error::Degenerate("ellipsoid program is unbounded".into()));
                }
            }
            if ncons / t < gap_tol {
                break;
            }
            t *= 8.0;
        }
        let point = self.unpack(&z);
        let (mv, sv) = self.constraint_values(&point);
        Ok(ProgramSolution {
            objective: self.objective(&point),
            minorant_duals: mv.iter().map(|c| 1.0 / (t * -c)).collect(),
            support_duals: sv.iter().map(|c| 1.0 / (t * -c)).collect(),
            point,
            newton_steps: steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    fn square() -> Vec<Halfspace> {
        vec![
            Halfspace::new(vector(&[1.0, 0.0]), 1.0),
            Halfspace::new(vector(&[-1.0, 0.0]), 1.0),
            Halfspace::new(vector(&[0.0, 1.0]), 1.0),
            Halfspace::new(vector(&[0.0, -1.0]), 1.0),
        ]
    }

    #[test]
    fn ball_in_square() {
        let mut p = Program::new(2, Profile::Flat);
        p.supports = square();
        p.fixed_h = Some(0.0);
        let sol = p.solve(None, &vector(&[0.3, -0.2]), 1.0, 1e-10).unwrap();
        assert!((&sol.point.a_mat - Matrix::identity(2, 2)).amax() < 1e-8);
        assert!(sol.point.center.amax() < 1e-8);
    }

    #[test]
    fn flat_height_tradeoff() {
        // e^{-|x|} on the line: β·2r with r = -log β is maximal at β = e^{-1}.
        let mut p = Program::new(1, Profile::Flat);
        p.minorants = vec![Minorant { g: vector(&[1.0]), c0: 0.0 }, Minorant { g: vector(&[-1.0]), c0: 0.0 }];
        let sol = p.solve(None, &vector(&[0.0]), 1.0, 1e-12).unwrap();
        assert!((sol.point.h + 1.0).abs() < 1e-6, "h = {}", sol.point.h);
        assert!((sol.point.a_mat[(0, 0)] - 1.0).abs() < 1e-6);
        let total: f64 = sol.minorant_duals.iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "total = {total} {:?} steps {}", sol.minorant_duals, sol.newton_steps);
    }

    #[test]
    fn lift_profile_closed_form() {
        for &s in &[0.5, 1.0, 7.0] {
            for &rho in &[0.0, 0.3, 2.0, 40.0] {
                let (phi, k1, phi2) = Profile::Lift(s).eval(rho);
                let h = 1e-5;
                let num = (Profile::Lift(s).phi(rho + h) - Profile::Lift(s).phi((rho - h).abs())) / (2.0 * h);
                if rho > 0.0 {
                    assert!((k1 * rho - num).abs() < 1e-6);
                }
                assert!(phi.is_finite() && phi2 > 0.0);
            }
        }
    }
}
