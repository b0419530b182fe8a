//! s-geometry kernel: κ_s, s-volumes, height functions, the containment oracle
//! and integration of log-concave functions.

use serde_json::{json, Value};

use crate::config::GeomConfig;
use crate::fnalg::LogConcaveFn;
use crate::linalg::{self, rows_of};
use crate::scalar;
use crate::{Error, Matrix, Result, Vector};

pub use crate::scalar::kappa_s;

/// The d-symmetric ellipsoid (A ⊕ α) B^{d+1} + a of R^{d+1}.
#[derive(Clone, Debug)]
pub struct SymEllipsoid {
    a_mat: Matrix,
    alpha: f64,
    center: Vector,
    a_inv: Matrix,
    log_det: f64,
}

impl PartialEq for SymEllipsoid {
    fn eq(&self, other: &Self) -> bool {
        self.a_mat == other.a_mat && self.alpha == other.alpha && self.center == other.center
    }
}

impl SymEllipsoid {
    pub fn new(a_mat: Matrix, alpha: f64, center: Vector) -> Result<Self> {
        let d = a_mat.nrows();
        if d == 0 || !a_mat.is_square() || center.len() != d {
            return Err(Error::Input("ellipsoid dimensions do not match".into()));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Input(format!("ellipsoid height must be positive, got {alpha}")));
        }
        if !linalg::is_symmetric(&a_mat, 1e-9) {
            return Err(Error::Input("ellipsoid matrix is not symmetric".into()));
        }
        let a_mat = linalg::symmetrize(&a_mat);
        let log_det = linalg::log_det_spd(&a_mat).ok_or_else(|| Error::Input("ellipsoid matrix is not positive definite".into()))?;
        let a_inv = linalg::spd_inverse(&a_mat)?;
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("ellipsoid center is not finite".into()));
        }
        Ok(SymEllipsoid { a_mat, alpha, center, a_inv, log_det })
    }

    pub fn unit_ball(d: usize) -> Self {
        Self::new(Matrix::identity(d, d), 1.0, Vector::zeros(d)).expect("unit ball is valid")
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn a(&self) -> &Matrix {
        &self.a_mat
    }

    pub fn a_inv(&self) -> &Matrix {
        &self.a_inv
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn det(&self) -> f64 {
        self.log_det.exp()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.a_mat.clone(), alpha, self.center.clone())
    }

    /// Squared normalized radius |A⁻¹(x - a)|².
    pub fn q(&self, x: &Vector) -> f64 {
        (&self.a_inv * (x - &self.center)).norm_squared()
    }

    /// Point of the domain A B^d + a with normalized coordinate y.
    pub fn point(&self, y: &Vector) -> Vector {
        &self.center + &self.a_mat * y
    }

    pub fn to_json(&self) -> Value {
        json!({"A": rows_of(&self.a_mat), "alpha": self.alpha, "a": self.center.as_slice()})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let a_mat = crate::fnalg::json_matrix(v, "A")?;
        let alpha = crate::fnalg::json_f64(v, "alpha")?;
        let center = crate::fnalg::json_vector(v, "a")?;
        Self::new(a_mat, alpha, center)
    }

    /// Parameter distance max(‖A₁-A₂‖_F, |α₁-α₂|, |a₁-a₂|).
    pub fn distance(&self, other: &SymEllipsoid) -> f64 {
        (&self.a_mat - &other.a_mat).norm().max((self.alpha - other.alpha).abs()).max((&self.center - &other.center).norm())
    }
}

/// κ_s α^s det A.
pub fn s_volume(e: &SymEllipsoid, s: f64) -> f64 {
    log_s_volume(e, s).exp()
}

pub fn log_s_volume(e: &SymEllipsoid, s: f64) -> f64 {
    kappa_s(e.dim(), s).ln() + s * e.alpha.ln() + e.log_det
}

/// h_E(x) = α√(1 - |A⁻¹(x-a)|²) on the domain, zero elsewhere.
pub fn height_eval(e: &SymEllipsoid, x: &Vector) -> f64 {
    scalar::height_from_q(e.alpha, e.q(x))
}

/// The s-marginal h_E(x)^s of the ellipsoid.
pub fn s_marginal_density(e: &SymEllipsoid, s: f64, x: &Vector) -> f64 {
    let h = height_eval(e, x);
    if h == 0.0 {
        0.0
    } else {
        h.powf(s)
    }
}

/// Result of the containment test h_E^s ≤ f on the domain of E.
#[derive(Clone, Debug)]
pub struct ViolationReport {
    pub max_violation: f64,
    pub witness: Vector,
    pub contained: bool,
    /// Set when a local search failed and the grid value was used instead.
    pub fallback: bool,
}

/// sup over A B^d + a of s·log h_E - log f.
pub fn violation(f: &LogConcaveFn, e: &SymEllipsoid, s: f64, cfg: &GeomConfig) -> ViolationReport {
    let rep = crate::oracle::lift_violation(
        f,
        e.a(),
        e.center(),
        s * e.alpha().ln(),
        s,
        &crate::oracle::SearchConfig::from_geom(cfg, e.dim()),
        &[],
    );
    ViolationReport { max_violation: rep.max, contained: rep.max <= cfg.tol, witness: rep.witness, fallback: rep.fallback }
}

/// Bound f(x) ≤ w^s exp(-(s/w²)⟨u, x-u⟩) implied by a contact point u of B^{d+1}.
pub fn tangent_tail_bound(u: &Vector, s: f64, x: &Vector) -> Result<f64> {
    let u2 = u.norm_squared();
    if u2 >= 1.0 {
        return Err(Error::Input(format!("contact projection must satisfy |u| < 1, got {}", u2.sqrt())));
    }
    if u.len() != x.len() {
        return Err(Error::Input("dimension mismatch".into()));
    }
    Ok(scalar::tangent_tail_scalar(u2, s, u.dot(&(x - u))))
}

/// ∫ f over R^d.
pub fn integrate(f: &LogConcaveFn, cfg: &GeomConfig) -> Result<f64> {
    crate::quad::integrate(f, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;
    use approx::assert_relative_eq;

    #[test]
    fn s_volume_examples() {
        let e = SymEllipsoid::new(Matrix::identity(2, 2) * 2.0, 3.0, Vector::zeros(2)).unwrap();
        assert_relative_eq!(s_volume(&e, 1.0), 8.0 * std::f64::consts::PI, max_relative = 1e-12);
        for &s in &[0.5, 1.0, 3.0] {
            assert_relative_eq!(s_volume(&SymEllipsoid::unit_ball(3), s), kappa_s(3, s), max_relative = 1e-12);
        }
    }

    #[test]
    fn height_examples() {
        let b = SymEllipsoid::unit_ball(2);
        assert_eq!(height_eval(&b, &Vector::zeros(2)), 1.0);
        assert_eq!(height_eval(&b, &vector(&[1.0, 0.0])), 0.0);
        let a = vector(&[0.3, -1.0]);
        let e = SymEllipsoid::new(Matrix::identity(2, 2) * 2.0, 5.0, a.clone()).unwrap();
        assert_eq!(height_eval(&e, &a), 5.0);
        assert_relative_eq!(s_marginal_density(&b, 2.0, &vector(&[0.5, 0.0])), 0.75, max_relative = 1e-14);
        assert_eq!(s_marginal_density(&b, 3.0, &Vector::zeros(2)), 1.0);
    }

    #[test]
    fn tail_bound_examples() {
        assert_relative_eq!(tangent_tail_bound(&vector(&[0.6]), 1.0, &vector(&[0.6])).unwrap(), 0.8, max_relative = 1e-14);
        assert_eq!(tangent_tail_bound(&vector(&[0.0, 0.0]), 3.0, &vector(&[5.0, -2.0])).unwrap(), 1.0);
        assert!(tangent_tail_bound(&vector(&[1.0]), 1.0, &vector(&[0.0])).is_err());
    }

    #[test]
    fn rejects_bad_ellipsoids() {
        assert!(SymEllipsoid::new(Matrix::identity(2, 2) * -1.0, 1.0, Vector::zeros(2)).is_err());
        assert!(SymEllipsoid::new(Matrix::identity(2, 2), 0.0, Vector::zeros(2)).is_err());
    }
}
