//! Interpolation of d-symmetric ellipsoids and of Gaussian densities.

use crate::linalg;
use crate::sgeom::{s_volume, SymEllipsoid};
use crate::{Error, Matrix, Result, Vector};

/// Threshold on ‖A₁ - A₂‖_F below which two matrices count as equal.
pub const EQUALITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationSpec {
    pub beta1: f64,
    pub s1: f64,
    pub s2: f64,
}

impl InterpolationSpec {
    pub fn new(beta1: f64, s1: f64, s2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta1) {
            return Err(Error::Input(format!("interpolation weight must lie in [0, 1], got {beta1}")));
        }
        if !(s1 > 0.0 && s2 > 0.0) {
            return Err(Error::Input("powers must be positive".into()));
        }
        Ok(InterpolationSpec { beta1, s1, s2 })
    }

    pub fn beta2(&self) -> f64 {
        1.0 - self.beta1
    }

    /// β₁s₁ + β₂s₂.
    pub fn s(&self) -> f64 {
        self.beta1 * self.s1 + self.beta2() * self.s2
    }
}

fn check_dims(e1: &SymEllipsoid, e2: &SymEllipsoid) -> Result<()> {
    if e1.dim() != e2.dim() {
        return Err(Error::Input("ellipsoids of different dimensions".into()));
    }
    Ok(())
}

/// Mixes matrices and centers linearly and heights geometrically (weighted by the powers).
pub fn interpolate_ellipsoids(e1: &SymEllipsoid, e2: &SymEllipsoid, spec: InterpolationSpec) -> Result<(SymEllipsoid, f64)> {
    check_dims(e1, e2)?;
    let (b1, b2) = (spec.beta1, spec.beta2());
    let s = spec.s();
    let a_mat = e1.a() * b1 + e2.a() * b2;
    let log_alpha = (b1 * spec.s1 * e1.alpha().ln() + b2 * spec.s2 * e2.alpha().ln()) / s;
    let center = e1.center() * b1 + e2.center() * b2;
    Ok((SymEllipsoid::new(a_mat, log_alpha.exp(), center)?, s))
}

/// Geometric mean of the two s-volumes, with a flag for the equality case A₁ = A₂.
pub fn svolume_lower_bound(e1: &SymEllipsoid, e2: &SymEllipsoid, beta1: f64, s: f64) -> Result<(f64, bool)> {
    check_dims(e1, e2)?;
    let bound = s_volume(e1, s).powf(beta1) * s_volume(e2, s).powf(1.0 - beta1);
    Ok((bound, (e1.a() - e2.a()).norm() <= EQUALITY_TOL))
}

/// The ellipsoid stretched along the segment joining two translates of E, centered at their midpoint.
///
/// Its s-volume is (1 + δ) times that of E with δ = |A⁻¹(a₁ - a₂)|/2.
pub fn sausage_ellipsoid(e: &SymEllipsoid, a1: &Vector, a2: &Vector) -> Result<SymEllipsoid> {
    if a1.len() != e.dim() || a2.len() != e.dim() {
        return Err(Error::Input("translation vectors do not match the dimension".into()));
    }
    let w = e.a_inv() * (a1 - a2);
    let len = w.norm();
    if len == 0.0 {
        return SymEllipsoid::new(e.a().clone(), e.alpha(), a1.clone());
    }
    let delta = 0.5 * len;
    let u = w / len;
    let m = Matrix::identity(e.dim(), e.dim()) + &u * u.transpose() * delta;
    let a_mat = linalg::spd_representative(&(e.a() * m));
    SymEllipsoid::new(a_mat, e.alpha(), (a1 + a2) * 0.5)
}

/// The Gaussian with mixed matrices and centers and geometrically mixed heights.
pub fn interpolate_gaussians(g1: &SymEllipsoid, g2: &SymEllipsoid, beta1: f64) -> Result<SymEllipsoid> {
    check_dims(g1, g2)?;
    let b2 = 1.0 - beta1;
    SymEllipsoid::new(g1.a() * beta1 + g2.a() * b2, g1.alpha().powf(beta1) * g2.alpha().powf(b2), g1.center() * beta1 + g2.center() * b2)
}

/// ∫ α exp(-|A⁻¹(x - a)|²) dx = α π^{d/2} det A.
pub fn gaussian_integral(g: &SymEllipsoid) -> f64 {
    g.alpha() * std::f64::consts::PI.powf(g.dim() as f64 / 2.0) * g.det()
}
