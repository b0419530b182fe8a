//! An algebra of evaluable log-concave functions f = e^{-ψ} on R^d.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::linalg::{self, rows_of, vector};
use crate::optim::{ellipsoid_min, Cut, EllipsoidOptions};
use crate::sgeom::SymEllipsoid;
use crate::{Error, Matrix, Result, Vector};

/// The halfspace {x : ⟨n, x⟩ ≤ c}.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub n: Vector,
    pub c: f64,
}

impl Halfspace {
    pub fn new(n: Vector, c: f64) -> Self {
        Halfspace { n, c }
    }

    /// Signed distance of x beyond the boundary.
    pub fn excess(&self, x: &Vector) -> f64 {
        (self.n.dot(x) - self.c) / self.n.norm()
    }

    pub fn normalized(&self) -> Halfspace {
        let k = self.n.norm();
        Halfspace { n: &self.n / k, c: self.c / k }
    }
}

/// Unit ball of the gauge in [`LogConcaveFn::GaugeSquare`].
#[derive(Clone, Debug)]
pub enum GaugeBody {
    /// Polytope {⟨n_j, x⟩ ≤ c_j} with every c_j > 0.
    Polytope(Vec<Halfspace>),
    /// Origin-centered ellipsoid B B^d given by its SPD matrix.
    Ellipsoid(SymEllipsoid),
}

impl GaugeBody {
    fn gauge_grad(&self, x: &Vector) -> (f64, Vector) {
        match self {
            GaugeBody::Polytope(hs) => {
                let mut best = 0.0;
                let mut grad = Vector::zeros(x.len());
                for h in hs {
                    let v = h.n.dot(x) / h.c;
                    if v > best {
                        best = v;
                        grad = &h.n / h.c;
                    }
                }
                (best, grad)
            }
            GaugeBody::Ellipsoid(e) => {
                let y = e.a_inv() * x;
                let r = y.norm();
                if r == 0.0 {
                    (0.0, Vector::zeros(x.len()))
                } else {
                    (r, e.a_inv() * y / r)
                }
            }
        }
    }
}

/// Proper log-concave function built from closed-form leaves and operations.
#[derive(Clone, Debug)]
pub enum LogConcaveFn {
    /// α exp(-|A⁻¹(x-a)|²).
    Gaussian(SymEllipsoid),
    /// α χ_{A B^d + a}.
    FlatEllipsoid(SymEllipsoid),
    /// h_E^s.
    HeightPower(SymEllipsoid, f64),
    /// exp(min_i ⟨g_i, x⟩ + b_i) on the polyhedron given by the halfspaces, zero outside.
    ExpPolyhedral {
        pieces: Vec<(Vector, f64)>,
        domain: Vec<Halfspace>,
    },
    /// exp(-‖x‖_K²).
    GaugeSquare(GaugeBody),
    Min(Vec<LogConcaveFn>),
    /// sup_{x₁+x₂=x} f₁(x₁) f₂(x₂).
    Asplund(Box<LogConcaveFn>, Box<LogConcaveFn>),
    /// f(x/λ)^λ.
    EpiProduct {
        lambda: f64,
        child: Box<LogConcaveFn>,
    },
    /// f(Tx + t).
    AffinePullback {
        child: Box<LogConcaveFn>,
        t_mat: Matrix,
        t_inv: Matrix,
        shift: Vector,
    },
}

fn check_dim(x: &Vector, d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::Input(format!("expected a point of dimension {d}, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("point has non-finite coordinates".into()));
    }
    Ok(())
}

impl LogConcaveFn {
    pub fn gaussian(a_mat: Matrix, alpha: f64, center: Vector) -> Result<Self> {
        Ok(LogConcaveFn::Gaussian(SymEllipsoid::new(a_mat, alpha, center)?))
    }

    pub fn flat_ellipsoid(a_mat: Matrix, alpha: f64, center: Vector) -> Result<Self> {
        Ok(LogConcaveFn::FlatEllipsoid(SymEllipsoid::new(a_mat, alpha, center)?))
    }

    pub fn height_power(e: SymEllipsoid, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Input(format!("power must be positive, got {s}")));
        }
        Ok(LogConcaveFn::HeightPower(e, s))
    }

    /// (h_{B^{d+1}})^s.
    pub fn ball_power(d: usize, s: f64) -> Result<Self> {
        Self::height_power(SymEllipsoid::unit_ball(d), s)
    }

    pub fn exp_polyhedral(pieces: Vec<(Vector, f64)>, domain: Vec<Halfspace>) -> Result<Self> {
        let d = pieces.first().map(|p| p.0.len()).ok_or_else(|| Error::Input("exp-polyhedral function needs a linear piece".into()))?;
        if pieces.iter().any(|(g, b)| g.len() != d || !b.is_finite() || g.iter().any(|v| !v.is_finite())) {
            return Err(Error::Input("malformed linear piece".into()));
        }
        if domain.iter().any(|h| h.n.len() != d || !(h.n.norm() > 0.0) || !h.c.is_finite()) {
            return Err(Error::Input("malformed domain halfspace".into()));
        }
        Ok(LogConcaveFn::ExpPolyhedral { pieces, domain })
    }

    /// exp(-‖x‖_K²) for a polytope K given by halfspaces with positive offsets.
    pub fn gauge_polytope(halfspaces: Vec<Halfspace>) -> Result<Self> {
        if halfspaces.is_empty() {
            return Err(Error::Input("gauge body needs halfspaces".into()));
        }
        let d = halfspaces[0].n.len();
        if halfspaces.iter().any(|h| h.n.len() != d || !(h.c > 0.0)) {
            return Err(Error::Input("gauge body must contain the origin in its interior".into()));
        }
        Ok(LogConcaveFn::GaugeSquare(GaugeBody::Polytope(halfspaces)))
    }

    pub fn gauge_ellipsoid(b_mat: Matrix) -> Result<Self> {
        let d = b_mat.nrows();
        Ok(LogConcaveFn::GaugeSquare(GaugeBody::Ellipsoid(SymEllipsoid::new(b_mat, 1.0, Vector::zeros(d))?)))
    }

    /// Indicator of the axis box [lo, hi] scaled by `height`.
    pub fn flat_box(lo: &[f64], hi: &[f64], height: f64) -> Result<Self> {
        let d = lo.len();
        let mut domain = Vec::new();
        for i in 0..d {
            let mut e = Vector::zeros(d);
            e[i] = 1.0;
            domain.push(Halfspace::new(e.clone(), hi[i]));
            domain.push(Halfspace::new(-e, -lo[i]));
        }
        Self::exp_polyhedral(vec![(Vector::zeros(d), height.ln())], domain)
    }

    pub fn pointwise_min(children: Vec<LogConcaveFn>) -> Result<Self> {
        let d = children.first().map(|c| c.dim()).ok_or_else(|| Error::Input("min of an empty list".into()))?;
        if children.iter().any(|c| c.dim() != d) {
            return Err(Error::Input("min of functions of different dimensions".into()));
        }
        Ok(LogConcaveFn::Min(children))
    }

    pub fn asplund(f: LogConcaveFn, g: LogConcaveFn) -> Result<Self> {
        if f.dim() != g.dim() {
            return Err(Error::Input("Asplund sum of functions of different dimensions".into()));
        }
        Ok(LogConcaveFn::Asplund(Box::new(f), Box::new(g)))
    }

    pub fn epi_product(lambda: f64, f: LogConcaveFn) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Input(format!("epi-product needs a positive factor, got {lambda}")));
        }
        Ok(LogConcaveFn::EpiProduct { lambda, child: Box::new(f) })
    }

    pub fn pullback(f: LogConcaveFn, t_mat: Matrix, shift: Vector) -> Result<Self> {
        let d = f.dim();
        if t_mat.nrows() != d || t_mat.ncols() != d || shift.len() != d {
            return Err(Error::Input("affine map does not match the dimension".into()));
        }
        let t_inv = t_mat.clone().try_inverse().ok_or_else(|| Error::Input("affine map is not invertible".into()))?;
        Ok(LogConcaveFn::AffinePullback { child: Box::new(f), t_mat, t_inv, shift })
    }

    /// γ f for γ > 0.
    pub fn scaled(self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Input("scale must be positive".into()));
        }
        Ok(match self {
            LogConcaveFn::Gaussian(e) => LogConcaveFn::Gaussian(e.with_alpha(e.alpha() * gamma)?),
            LogConcaveFn::FlatEllipsoid(e) => LogConcaveFn::FlatEllipsoid(e.with_alpha(e.alpha() * gamma)?),
            LogConcaveFn::HeightPower(e, s) => LogConcaveFn::HeightPower(e.with_alpha(e.alpha() * gamma.powf(1.0 / s))?, s),
            LogConcaveFn::ExpPolyhedral { pieces, domain } => {
                LogConcaveFn::ExpPolyhedral { pieces: pieces.into_iter().map(|(g, b)| (g, b + gamma.ln())).collect(), domain }
            }
            LogConcaveFn::Min(children) => LogConcaveFn::Min(children.into_iter().map(|c| c.scaled(gamma)).collect::<Result<_>>()?),
            LogConcaveFn::Asplund(l, r) => LogConcaveFn::Asplund(Box::new(l.scaled(gamma)?), r),
            LogConcaveFn::EpiProduct { lambda, child } => {
                LogConcaveFn::EpiProduct { lambda, child: Box::new(child.scaled(gamma.powf(1.0 / lambda))?) }
            }
            LogConcaveFn::AffinePullback { child, t_mat, t_inv, shift } => {
                LogConcaveFn::AffinePullback { child: Box::new(child.scaled(gamma)?), t_mat, t_inv, shift }
            }
            LogConcaveFn::GaugeSquare(_) => return Err(Error::Unsupported("scaling a gauge-square leaf".into())),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            LogConcaveFn::Gaussian(e) | LogConcaveFn::FlatEllipsoid(e) | LogConcaveFn::HeightPower(e, _) => e.dim(),
            LogConcaveFn::ExpPolyhedral { pieces, .. } => pieces[0].0.len(),
            LogConcaveFn::GaugeSquare(GaugeBody::Polytope(h)) => h[0].n.len(),
            LogConcaveFn::GaugeSquare(GaugeBody::Ellipsoid(e)) => e.dim(),
            LogConcaveFn::Min(c) => c[0].dim(),
            LogConcaveFn::Asplund(l, _) => l.dim(),
            LogConcaveFn::EpiProduct { child, .. } => child.dim(),
            LogConcaveFn::AffinePullback { shift, .. } => shift.len(),
        }
    }

    /// f(x); errors on non-finite or mis-sized input.
    pub fn eval(&self, x: &Vector) -> Result<f64> {
        check_dim(x, self.dim())?;
        Ok(self.value(x))
    }

    /// f(x) without input validation.
    pub fn value(&self, x: &Vector) -> f64 {
        let p = self.psi(x);
        if p == f64::INFINITY {
            0.0
        } else {
            (-p).exp()
        }
    }

    /// log f(x), -∞ outside the support.
    pub fn log_value(&self, x: &Vector) -> f64 {
        -self.psi(x)
    }

    /// ψ = -log f, +∞ outside the support.
    pub fn psi(&self, x: &Vector) -> f64 {
        match self {
            LogConcaveFn::Gaussian(e) => -e.alpha().ln() + e.q(x),
            LogConcaveFn::FlatEllipsoid(e) => {
                if e.q(x) <= 1.0 {
                    -e.alpha().ln()
                } else {
                    f64::INFINITY
                }
            }
            LogConcaveFn::HeightPower(e, s) => {
                let q = e.q(x);
                if q < 1.0 {
                    -s * e.alpha().ln() - 0.5 * s * (1.0 - q).ln()
                } else {
                    f64::INFINITY
                }
            }
            LogConcaveFn::ExpPolyhedral { pieces, domain } => {
                if domain.iter().any(|h| h.n.dot(x) > h.c) {
                    return f64::INFINITY;
                }
                pieces.iter().map(|(g, b)| -g.dot(x) - b).fold(f64::NEG_INFINITY, f64::max)
            }
            LogConcaveFn::GaugeSquare(k) => {
                let (g, _) = k.gauge_grad(x);
                g * g
            }
            LogConcaveFn::Min(children) => {
                let mut m = f64::NEG_INFINITY;
                for c in children {
                    m = m.max(c.psi(x));
                    if m == f64::INFINITY {
                        break;
                    }
                }
                m
            }
            LogConcaveFn::Asplund(l, r) => inf_convolution(l, r, x).0,
            LogConcaveFn::EpiProduct { lambda, child } => lambda * child.psi(&(x / *lambda)),
            LogConcaveFn::AffinePullback { child, t_mat, shift, .. } => child.psi(&(t_mat * x + shift)),
        }
    }

    /// ψ(x) with a subgradient, or None outside the support.
    pub fn psi_grad(&self, x: &Vector) -> Option<(f64, Vector)> {
        match self {
            LogConcaveFn::Gaussian(e) => {
                let y = e.a_inv() * (x - e.center());
                let g = e.a_inv() * &y * 2.0;
                Some((-e.alpha().ln() + y.norm_squared(), g))
            }
            LogConcaveFn::FlatEllipsoid(e) => {
                if e.q(x) <= 1.0 {
                    Some((-e.alpha().ln(), Vector::zeros(x.len())))
                } else {
                    None
                }
            }
            LogConcaveFn::HeightPower(e, s) => {
                let y = e.a_inv() * (x - e.center());
                let q = y.norm_squared();
                if q < 1.0 {
                    let g = e.a_inv() * &y * (s / (1.0 - q));
                    Some((-s * e.alpha().ln() - 0.5 * s * (1.0 - q).ln(), g))
                } else {
                    None
                }
            }
            LogConcaveFn::ExpPolyhedral { pieces, domain } => {
                if domain.iter().any(|h| h.n.dot(x) > h.c) {
                    return None;
                }
                let mut best = f64::NEG_INFINITY;
                let mut grad = Vector::zeros(x.len());
                for (g, b) in pieces {
                    let v = -g.dot(x) - b;
                    if v > best {
                        best = v;
                        grad = -g;
                    }
                }
                Some((best, grad))
            }
            LogConcaveFn::GaugeSquare(k) => {
                let (g, dg) = k.gauge_grad(x);
                Some((g * g, dg * (2.0 * g)))
            }
            LogConcaveFn::Min(children) => {
                let mut best: Option<(f64, Vector)> = None;
                for c in children {
                    let (v, g) = c.psi_grad(x)?;
                    if best.as_ref().is_none_or(|b| v > b.0) {
                        best = Some((v, g));
                    }
                }
                best
            }
            LogConcaveFn::Asplund(l, r) => {
                let (v, u) = inf_convolution(l, r, x);
                if v == f64::INFINITY {
                    return None;
                }
                let (_, g) = r.psi_grad(&(x - &u)).or_else(|| l.psi_grad(&u))?;
                Some((v, g))
            }
            LogConcaveFn::EpiProduct { lambda, child } => {
                let (v, g) = child.psi_grad(&(x / *lambda))?;
                Some((lambda * v, g))
            }
            LogConcaveFn::AffinePullback { child, t_mat, shift, .. } => {
                let (v, g) = child.psi_grad(&(t_mat * x + shift))?;
                Some((v, t_mat.transpose() * g))
            }
        }
    }

    /// A convex function that is ≤ 0 exactly on the closed support, with a subgradient.
    /// None when the support is all of R^d.
    pub fn support_excess(&self, x: &Vector) -> Option<(f64, Vector)> {
        match self {
            LogConcaveFn::Gaussian(_) | LogConcaveFn::GaugeSquare(_) => None,
            LogConcaveFn::FlatEllipsoid(e) | LogConcaveFn::HeightPower(e, _) => {
                let y = e.a_inv() * (x - e.center());
                let r = y.norm();
                let g = if r > 0.0 { e.a_inv() * &y / r } else { Vector::zeros(x.len()) };
                Some((r - 1.0, g))
            }
            LogConcaveFn::ExpPolyhedral { domain, .. } => {
                let mut best: Option<(f64, Vector)> = None;
                for h in domain {
                    let k = h.n.norm();
                    let v = (h.n.dot(x) - h.c) / k;
                    if best.as_ref().is_none_or(|b| v > b.0) {
                        best = Some((v, &h.n / k));
                    }
                }
                best
            }
            LogConcaveFn::Min(children) => {
                let mut best: Option<(f64, Vector)> = None;
                for c in children {
                    if let Some((v, g)) = c.support_excess(x) {
                        if best.as_ref().is_none_or(|b| v > b.0) {
                            best = Some((v, g));
                        }
                    }
                }
                best
            }
            LogConcaveFn::Asplund(l, r) => {
                if !l.has_bounded_support_hint() || !r.has_bounded_support_hint() {
                    return None;
                }
                l.support_excess(x)?;
                r.support_excess(x)?;
                Some(minkowski_excess(l, r, x))
            }
            LogConcaveFn::EpiProduct { lambda, child } => {
                let (v, g) = child.support_excess(&(x / *lambda))?;
                Some((lambda * v, g))
            }
            LogConcaveFn::AffinePullback { child, t_mat, shift, .. } => {
                let (v, g) = child.support_excess(&(t_mat * x + shift))?;
                Some((v, t_mat.transpose() * g))
            }
        }
    }

    fn has_bounded_support_hint(&self) -> bool {
        self.support_excess_probe()
    }

    fn support_excess_probe(&self) -> bool {
        match self {
            LogConcaveFn::Gaussian(_) | LogConcaveFn::GaugeSquare(_) => false,
            LogConcaveFn::FlatEllipsoid(_) | LogConcaveFn::HeightPower(..) => true,
            LogConcaveFn::ExpPolyhedral { domain, .. } => !domain.is_empty(),
            LogConcaveFn::Min(c) => c.iter().any(|c| c.support_excess_probe()),
            LogConcaveFn::Asplund(l, r) => l.support_excess_probe() && r.support_excess_probe(),
            LogConcaveFn::EpiProduct { child, .. } | LogConcaveFn::AffinePullback { child, .. } => child.support_excess_probe(),
        }
    }

    /// True when the support is a proper subset of R^d.
    pub fn has_restricted_support(&self) -> bool {
        self.support_excess_probe()
    }

    /// A halfspace containing the support that excludes x, touching the support when possible.
    pub fn support_cut(&self, x: &Vector) -> Option<Halfspace> {
        match self {
            LogConcaveFn::Gaussian(_) | LogConcaveFn::GaugeSquare(_) => None,
            LogConcaveFn::FlatEllipsoid(e) | LogConcaveFn::HeightPower(e, _) => {
                let y = e.a_inv() * (x - e.center());
                let n = e.a_inv() * y;
                let k = n.norm();
                if k == 0.0 {
                    return None;
                }
                let n = n / k;
                let c = (e.a() * &n).norm() + n.dot(e.center());
                Some(Halfspace::new(n, c))
            }
            LogConcaveFn::ExpPolyhedral { domain, .. } => {
                domain.iter().max_by(|a, b| a.excess(x).partial_cmp(&b.excess(x)).unwrap()).map(|h| h.normalized())
            }
            LogConcaveFn::Min(children) => children
                .iter()
                .filter_map(|c| c.support_excess(x).map(|(v, _)| (v, c)))
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .and_then(|(_, c)| c.support_cut(x)),
            LogConcaveFn::Asplund(l, r) => {
                let (_, g) = self.support_excess(x)?;
                let k = g.norm();
                if k == 0.0 {
                    return None;
                }
                let n = g / k;
                let c = l.support_function(&n) + r.support_function(&n);
                c.is_finite().then(|| Halfspace::new(n, c))
            }
            LogConcaveFn::EpiProduct { lambda, child } => {
                let h = child.support_cut(&(x / *lambda))?;
                Some(Halfspace::new(h.n, lambda * h.c))
            }
            LogConcaveFn::AffinePullback { child, t_mat, shift, .. } => {
                let h = child.support_cut(&(t_mat * x + shift))?;
                Some(Halfspace::new(t_mat.transpose() * &h.n, h.c - h.n.dot(shift)).normalized())
            }
        }
    }

    /// max ⟨n, y⟩ over the closed support (+∞ if unbounded).
    pub fn support_function(&self, n: &Vector) -> f64 {
        match self {
            LogConcaveFn::Gaussian(_) | LogConcaveFn::GaugeSquare(_) => f64::INFINITY,
            LogConcaveFn::FlatEllipsoid(e) | LogConcaveFn::HeightPower(e, _) => (e.a() * n).norm() + n.dot(e.center()),
            LogConcaveFn::EpiProduct { lambda, child } => lambda * child.support_function(n),
            LogConcaveFn::AffinePullback { child, t_inv, shift, .. } => {
                let m = t_inv.transpose() * n;
                child.support_function(&m) - m.dot(shift)
            }
            LogConcaveFn::Asplund(l, r) => l.support_function(n) + r.support_function(n),
            _ => {
                if !self.has_restricted_support() {
                    return f64::INFINITY;
                }
                let (c, s) = self.hint();
                let radius = 1e3 * (1.0 + c.norm() + s);
                let out = ellipsoid_min(
                    |y| match self.support_excess(y) {
                        Some((v, g)) if v > 0.0 => Cut::Infeasible(g, v),
                        _ => Cut::Value(-n.dot(y), -n),
                    },
                    &c,
                    radius,
                    EllipsoidOptions { max_iters: 4000, abs_tol: 1e-12 },
                );
                if !out.feasible || (&out.x - &c).norm() > 0.9 * radius {
                    f64::INFINITY
                } else {
                    -out.value
                }
            }
        }
    }

    /// Halfspaces known to contain the support, in closed form.
    pub fn polyhedral_support(&self) -> Vec<Halfspace> {
        match self {
            LogConcaveFn::ExpPolyhedral { domain, .. } => domain.iter().map(|h| h.normalized()).collect(),
            LogConcaveFn::Min(children) => children.iter().flat_map(|c| c.polyhedral_support()).collect(),
            LogConcaveFn::EpiProduct { lambda, child } => {
                child.polyhedral_support().into_iter().map(|h| Halfspace::new(h.n, lambda * h.c)).collect()
            }
            LogConcaveFn::AffinePullback { child, t_mat, shift, .. } => child
                .polyhedral_support()
                .into_iter()
                .map(|h| Halfspace::new(t_mat.transpose() * &h.n, h.c - h.n.dot(shift)).normalized())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Affine minorants (g, c₀), ψ(y) ≥ ⟨g, y⟩ + c₀, that are exact pieces of ψ.
    pub fn exact_minorants(&self) -> Vec<(Vector, f64)> {
        match self {
            LogConcaveFn::ExpPolyhedral { pieces, .. } => pieces.iter().map(|(g, b)| (-g, -b)).collect(),
            LogConcaveFn::FlatEllipsoid(e) => vec![(Vector::zeros(e.dim()), -e.alpha().ln())],
            LogConcaveFn::Min(children) => children.iter().flat_map(|c| c.exact_minorants()).collect(),
            LogConcaveFn::EpiProduct { lambda, child } => child.exact_minorants().into_iter().map(|(g, c)| (g, lambda * c)).collect(),
            LogConcaveFn::AffinePullback { child, t_mat, shift, .. } => {
                child.exact_minorants().into_iter().map(|(g, c)| (t_mat.transpose() * &g, c + g.dot(shift))).collect()
            }
            _ => Vec::new(),
        }
    }

    /// A rough location and length scale of the function's mass.
    pub fn hint(&self) -> (Vector, f64) {
        let d = self.dim();
        match self {
            LogConcaveFn::Gaussian(e) | LogConcaveFn::FlatEllipsoid(e) | LogConcaveFn::HeightPower(e, _) => {
                (e.center().clone(), e.a().norm())
            }
            LogConcaveFn::ExpPolyhedral { pieces, domain } => {
                let c_scale = domain.iter().map(|h| h.c.abs() / h.n.norm()).fold(0.0, f64::max);
                let g_scale = pieces.iter().map(|(g, _)| g.norm()).fold(0.0, f64::max);
                let b_spread = pieces.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
                let s = 1.0 + c_scale + if g_scale > 0.0 { (1.0 + b_spread) / g_scale } else { 0.0 };
                (Vector::zeros(d), s)
            }
            LogConcaveFn::GaugeSquare(GaugeBody::Polytope(hs)) => {
                (Vector::zeros(d), hs.iter().map(|h| h.c / h.n.norm()).fold(0.0, f64::max))
            }
            LogConcaveFn::GaugeSquare(GaugeBody::Ellipsoid(e)) => (Vector::zeros(d), e.a().norm()),
            LogConcaveFn::Min(children) => {
                let mut c = Vector::zeros(d);
                let mut s: f64 = 0.0;
                for ch in children {
                    let (cc, ss) = ch.hint();
                    c += cc;
                    s = s.max(ss);
                }
                c /= children.len() as f64;
                (c, s)
            }
            LogConcaveFn::Asplund(l, r) => {
                let (cl, sl) = l.hint();
                let (cr, sr) = r.hint();
                (cl + cr, sl + sr)
            }
            LogConcaveFn::EpiProduct { lambda, child } => {
                let (c, s) = child.hint();
                (c * *lambda, s * lambda)
            }
            LogConcaveFn::AffinePullback { child, t_inv, shift, .. } => {
                let (c, s) = child.hint();
                (t_inv * (c - shift), s * t_inv.norm())
            }
        }
    }

    /// ‖f‖ and a maximizer.
    pub fn sup_norm(&self) -> Result<(f64, Vector)> {
        match self {
            LogConcaveFn::Gaussian(e) | LogConcaveFn::FlatEllipsoid(e) => Ok((e.alpha(), e.center().clone())),
            LogConcaveFn::HeightPower(e, s) => Ok((e.alpha().powf(*s), e.center().clone())),
            LogConcaveFn::GaugeSquare(_) => Ok((1.0, Vector::zeros(self.dim()))),
            LogConcaveFn::EpiProduct { lambda, child } => {
                let (v, x) = child.sup_norm()?;
                Ok((v.powf(*lambda), x * *lambda))
            }
            LogConcaveFn::AffinePullback { child, t_inv, shift, .. } => {
                let (v, x) = child.sup_norm()?;
                Ok((v, t_inv * (x - shift)))
            }
            LogConcaveFn::Asplund(l, r) => {
                let (vl, xl) = l.sup_norm()?;
                let (vr, xr) = r.sup_norm()?;
                Ok((vl * vr, xl + xr))
            }
            _ => {
                let (c, s) = self.hint();
                let radius = 1e3 * (1.0 + c.norm() + s);
                let out = ellipsoid_min(
                    |y| match self.psi_grad(y) {
                        Some((v, g)) => Cut::Value(v, g),
                        None => match self.support_excess(y) {
                            Some((v, g)) if g.norm() > 0.0 => Cut::Infeasible(g, v.max(0.0)),
                            _ => Cut::Infeasible(y - &c, 0.0),
                        },
                    },
                    &c,
                    radius,
                    EllipsoidOptions { max_iters: 4000, abs_tol: 1e-13 },
                );
                if !out.feasible || !out.value.is_finite() {
                    return Err(Error::Degenerate("function vanishes on the search region".into()));
                }
                if (&out.x - &c).norm() > 0.95 * radius {
                    return Err(Error::Degenerate("log f is unbounded above".into()));
                }
                let x = polish_argmax(self, out.x, out.value);
                Ok(((-self.psi(&x)).exp(), x))
            }
        }
    }

    /// [f ≥ β] for 0 < β < ‖f‖.
    pub fn superlevel(&self, beta: f64) -> Result<SuperlevelBody> {
        let (sup, argmax) = self.sup_norm()?;
        if !(beta > 0.0) {
            return Err(Error::Input(format!("level must be positive, got {beta}")));
        }
        if beta >= sup {
            return Err(Error::EmptySet { beta, sup });
        }
        let repr = self.exact_level_repr(beta).unwrap_or(BodyRepr::Oracle);
        let level = -beta.ln();
        let outer_radius = level_outer_radius(self, &argmax, level, 1e8 * (1.0 + argmax.norm() + self.hint().1))
            .ok_or_else(|| Error::Degenerate("superlevel set is unbounded".into()))?;
        Ok(SuperlevelBody { beta, repr, f: Arc::new(self.clone()), center: argmax, outer_radius })
    }

    fn exact_level_repr(&self, beta: f64) -> Option<BodyRepr> {
        let level = -beta.ln();
        match self {
            LogConcaveFn::FlatEllipsoid(e) => Some(BodyRepr::Ellipsoid(SymEllipsoid::new(e.a().clone(), 1.0, e.center().clone()).ok()?)),
            LogConcaveFn::ExpPolyhedral { pieces, domain } => {
                let mut hs: Vec<Halfspace> = domain.iter().map(|h| h.normalized()).collect();
                for (g, b) in pieces {
                    // -⟨g,x⟩ - b ≤ level
                    if g.norm() == 0.0 {
                        if -b > level {
                            return None;
                        }
                        continue;
                    }
                    hs.push(Halfspace::new(-g, b + level).normalized());
                }
                Some(BodyRepr::Halfspaces(hs))
            }
            LogConcaveFn::GaugeSquare(GaugeBody::Polytope(k)) => {
                let r = level.max(0.0).sqrt();
                Some(BodyRepr::Halfspaces(k.iter().map(|h| Halfspace::new(h.n.clone(), h.c * r).normalized()).collect()))
            }
            LogConcaveFn::GaugeSquare(GaugeBody::Ellipsoid(e)) => {
                let r = level.max(0.0).sqrt();
                Some(BodyRepr::Ellipsoid(SymEllipsoid::new(e.a() * r, 1.0, Vector::zeros(e.dim())).ok()?))
            }
            LogConcaveFn::Min(children) => {
                let mut hs = Vec::new();
                for c in children {
                    match c.exact_level_repr(beta)? {
                        BodyRepr::Halfspaces(h) => hs.extend(h),
                        _ => return None,
                    }
                }
                Some(BodyRepr::Halfspaces(hs))
            }
            LogConcaveFn::EpiProduct { lambda, child } => match child.exact_level_repr(beta.powf(1.0 / lambda))? {
                BodyRepr::Halfspaces(h) => Some(BodyRepr::Halfspaces(h.into_iter().map(|h| Halfspace::new(h.n, lambda * h.c)).collect())),
                BodyRepr::Ellipsoid(e) => Some(BodyRepr::Ellipsoid(SymEllipsoid::new(e.a() * *lambda, 1.0, e.center() * *lambda).ok()?)),
                BodyRepr::Oracle => None,
            },
            LogConcaveFn::AffinePullback { child, t_mat, t_inv, shift } => match child.exact_level_repr(beta)? {
                BodyRepr::Halfspaces(h) => Some(BodyRepr::Halfspaces(
                    h.into_iter().map(|h| Halfspace::new(t_mat.transpose() * &h.n, h.c - h.n.dot(shift)).normalized()).collect(),
                )),
                BodyRepr::Ellipsoid(e) => {
                    let m = linalg::spd_representative(&(t_inv * e.a()));
                    Some(BodyRepr::Ellipsoid(SymEllipsoid::new(m, 1.0, t_inv * (e.center() - shift)).ok()?))
                }
                BodyRepr::Oracle => None,
            },
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            LogConcaveFn::Gaussian(e) => ellipsoid_json("gaussian", e),
            LogConcaveFn::FlatEllipsoid(e) => ellipsoid_json("flat_ellipsoid", e),
            LogConcaveFn::HeightPower(e, s) => json!({"type": "height_power", "E": e.to_json(), "s": s}),
            LogConcaveFn::ExpPolyhedral { pieces, domain } => json!({
                "type": "exp_polyhedral",
                "pieces": pieces.iter().map(|(g, b)| json!({"g": g.as_slice(), "b": b})).collect::<Vec<_>>(),
                "halfspaces": halfspaces_json(domain),
            }),
            LogConcaveFn::GaugeSquare(GaugeBody::Polytope(h)) => json!({"type": "gauge_square", "halfspaces": halfspaces_json(h)}),
            LogConcaveFn::GaugeSquare(GaugeBody::Ellipsoid(e)) => json!({"type": "gauge_square", "ellipsoid": rows_of(e.a())}),
            LogConcaveFn::Min(c) => json!({"type": "min", "children": c.iter().map(|c| c.to_json()).collect::<Vec<_>>()}),
            LogConcaveFn::Asplund(l, r) => json!({"type": "asplund", "left": l.to_json(), "right": r.to_json()}),
            LogConcaveFn::EpiProduct { lambda, child } => json!({"type": "epi_product", "lambda": lambda, "child": child.to_json()}),
            LogConcaveFn::AffinePullback { child, t_mat, shift, .. } => {
                json!({"type": "affine_pullback", "child": child.to_json(), "T": rows_of(t_mat), "t": shift.as_slice()})
            }
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let ty = v.get("type").and_then(|t| t.as_str()).ok_or_else(|| Error::Input("function needs a \"type\" field".into()))?;
        match ty {
            "gaussian" => Self::gaussian(json_matrix(v, "A")?, json_f64(v, "alpha")?, json_vector(v, "a")?),
            "flat_ellipsoid" => Self::flat_ellipsoid(json_matrix(v, "A")?, json_f64(v, "alpha")?, json_vector(v, "a")?),
            "height_power" => {
                let e = v.get("E").ok_or_else(|| Error::Input("height_power needs \"E\"".into()))?;
                Self::height_power(SymEllipsoid::from_json(e)?, json_f64(v, "s")?)
            }
            "exp_polyhedral" => {
                let pieces = v
                    .get("pieces")
                    .and_then(|p| p.as_array())
                    .ok_or_else(|| Error::Input("exp_polyhedral needs \"pieces\"".into()))?
                    .iter()
                    .map(|p| Ok((json_vector(p, "g")?, json_f64(p, "b")?)))
                    .collect::<Result<Vec<_>>>()?;
                let domain = match v.get("halfspaces") {
                    Some(h) => parse_halfspaces(h)?,
                    None => Vec::new(),
                };
                Self::exp_polyhedral(pieces, domain)
            }
            "gauge_square" => {
                if let Some(h) = v.get("halfspaces") {
                    Self::gauge_polytope(parse_halfspaces(h)?)
                } else {
                    Self::gauge_ellipsoid(json_matrix(v, "ellipsoid")?)
                }
            }
            "min" => {
                let children = v
                    .get("children")
                    .and_then(|c| c.as_array())
                    .ok_or_else(|| Error::Input("min needs \"children\"".into()))?
                    .iter()
                    .map(Self::from_json)
                    .collect::<Result<Vec<_>>>()?;
                Self::pointwise_min(children)
            }
            "asplund" => Self::asplund(Self::from_json(json_field(v, "left")?)?, Self::from_json(json_field(v, "right")?)?),
            "epi_product" => Self::epi_product(json_f64(v, "lambda")?, Self::from_json(json_field(v, "child")?)?),
            "affine_pullback" => Self::pullback(Self::from_json(json_field(v, "child")?)?, json_matrix(v, "T")?, json_vector(v, "t")?),
            other => Err(Error::Input(format!("unknown function type {other:?}"))),
        }
    }
}

fn polish_argmax(f: &LogConcaveFn, x: Vector, value: f64) -> Vector {
    let (x2, v2) = crate::optim::nelder_mead_max(
        |y| -f.psi(y),
        &x,
        1e-4 * (1.0 + x.norm()),
        crate::optim::NmOptions { max_evals: 600, ..Default::default() },
    );
    if -v2 < value {
        x2
    } else {
        x
    }
}

/// min over u of ψ_l(u) + ψ_r(x - u), returning the value and the minimizer.
fn inf_convolution(l: &LogConcaveFn, r: &LogConcaveFn, x: &Vector) -> (f64, Vector) {
    let (cl, sl) = l.hint();
    let (cr, sr) = r.hint();
    let offset = x - &cl - &cr;
    let w = if sl + sr > 0.0 { sl / (sl + sr) } else { 0.5 };
    let center = &cl + &offset * w;
    let radius = 20.0 * (offset.norm() + sl + sr) + 1.0;
    let out = ellipsoid_min(
        |u| {
            let xu = x - u;
            match (l.psi_grad(u), r.psi_grad(&xu)) {
                (Some((vl, gl)), Some((vr, gr))) => Cut::Value(vl + vr, gl - gr),
                (None, _) => match l.support_excess(u) {
                    Some((v, g)) if g.norm() > 0.0 => Cut::Infeasible(g, v.max(0.0)),
                    _ => Cut::Infeasible(u - &cl, 0.0),
                },
                (_, None) => match r.support_excess(&xu) {
                    Some((v, g)) if g.norm() > 0.0 => Cut::Infeasible(-g, v.max(0.0)),
                    _ => Cut::Infeasible(&cr - &xu, 0.0),
                },
            }
        },
        &center,
        radius,
        EllipsoidOptions { max_iters: 3000, abs_tol: 1e-13 },
    );
    if out.feasible {
        (out.value, out.x)
    } else {
        (f64::INFINITY, center)
    }
}

/// min over u of max(excess_l(u), excess_r(x - u)) for bounded supports.
fn minkowski_excess(l: &LogConcaveFn, r: &LogConcaveFn, x: &Vector) -> (f64, Vector) {
    let (cl, sl) = l.hint();
    let (cr, sr) = r.hint();
    let offset = x - &cl - &cr;
    let center = &cl + &offset * 0.5;
    let radius = 20.0 * (offset.norm() + sl + sr) + 1.0;
    let out = ellipsoid_min(
        |u| {
            let (el, gl) = l.support_excess(u).unwrap_or((f64::NEG_INFINITY, Vector::zeros(u.len())));
            let (er, gr) = r.support_excess(&(x - u)).unwrap_or((f64::NEG_INFINITY, Vector::zeros(u.len())));
            if el >= er {
                Cut::Value(el, gl)
            } else {
                Cut::Value(er, -gr)
            }
        },
        &center,
        radius,
        EllipsoidOptions { max_iters: 3000, abs_tol: 1e-13 },
    );
    let g = r.support_excess(&(x - &out.x)).map(|(_, g)| g).unwrap_or_else(|| Vector::zeros(x.len()));
    (out.value, g)
}

/// Distance from `x0` along `u` at which ψ first exceeds `level` (None if never within `r_max`).
pub fn ray_exit(f: &LogConcaveFn, x0: &Vector, u: &Vector, level: f64, r_max: f64) -> Option<f64> {
    let beyond = |r: f64| f.psi(&(x0 + u * r)) > level;
    if beyond(0.0) {
        return Some(0.0);
    }
    let mut hi = 1e-3 * (1.0 + f.hint().1);
    while !beyond(hi) {
        hi *= 2.0;
        if hi > r_max {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beyond(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + hi) {
            break;
        }
    }
    Some(hi)
}

/// Directions used for ray probing in dimension d.
pub fn probe_directions(d: usize) -> Vec<Vector> {
    match d {
        1 => linalg::sphere_points(1, 2),
        2 => linalg::sphere_points(2, 64),
        _ => {
            let mut v = linalg::sphere_points(d, 240);
            for i in 0..d {
                let mut e = Vector::zeros(d);
                e[i] = 1.0;
                v.push(e.clone());
                v.push(-e);
            }
            v
        }
    }
}

/// Radius around `x0` of a ball containing [ψ ≤ level], with a safety margin.
pub fn level_outer_radius(f: &LogConcaveFn, x0: &Vector, level: f64, r_max: f64) -> Option<f64> {
    let mut r: f64 = 0.0;
    for u in probe_directions(f.dim()) {
        r = r.max(ray_exit(f, x0, &u, level, r_max)?);
    }
    Some(1.5 * r + 1e-12)
}

/// Axis-aligned box containing [ψ ≤ level], built from ray probes around x0.
pub fn level_box(f: &LogConcaveFn, x0: &Vector, level: f64, r_max: f64) -> Option<(Vector, Vector)> {
    let d = f.dim();
    let mut lo = x0.clone();
    let mut hi = x0.clone();
    for u in probe_directions(d) {
        let r = ray_exit(f, x0, &u, level, r_max)?;
        let p = x0 + &u * r;
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let pad = if d == 1 { 0.0 } else { 0.15 };
    for i in 0..d {
        let w = hi[i] - lo[i];
        lo[i] -= pad * w;
        hi[i] += pad * w;
    }
    Some((lo, hi))
}

/// Representation of a superlevel body.
#[derive(Clone, Debug)]
pub enum BodyRepr {
    Halfspaces(Vec<Halfspace>),
    /// A B^d + a (the height field is unused and set to 1).
    Ellipsoid(SymEllipsoid),
    /// Membership through the function itself.
    Oracle,
}

/// The convex body [f ≥ β].
#[derive(Clone, Debug)]
pub struct SuperlevelBody {
    pub beta: f64,
    pub repr: BodyRepr,
    pub f: Arc<LogConcaveFn>,
    /// A point of the body (a maximizer of f).
    pub center: Vector,
    /// The body lies in the ball of this radius around `center`.
    pub outer_radius: f64,
}

impl SuperlevelBody {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.excess(x) <= 0.0
    }

    /// Convex function ≤ 0 exactly on the body.
    pub fn excess(&self, x: &Vector) -> f64 {
        match &self.repr {
            BodyRepr::Halfspaces(hs) => hs.iter().map(|h| h.excess(x)).fold(f64::NEG_INFINITY, f64::max),
            BodyRepr::Ellipsoid(e) => e.q(x).sqrt() - 1.0,
            BodyRepr::Oracle => {
                let level = -self.beta.ln();
                match self.f.psi_grad(x) {
                    Some((v, _)) => v - level,
                    None => self.f.support_excess(x).map(|(v, _)| v.max(1e-300)).unwrap_or(f64::INFINITY),
                }
            }
        }
    }

    /// A halfspace containing the body that excludes x (x must lie outside).
    pub fn separate(&self, x: &Vector) -> Option<Halfspace> {
        match &self.repr {
            BodyRepr::Halfspaces(hs) => hs.iter().max_by(|a, b| a.excess(x).partial_cmp(&b.excess(x)).unwrap()).cloned(),
            BodyRepr::Ellipsoid(e) => {
                let n = e.a_inv() * (e.a_inv() * (x - e.center()));
                let k = n.norm();
                if k == 0.0 {
                    return None;
                }
                let n = n / k;
                Some(Halfspace::new(n.clone(), (e.a() * &n).norm() + n.dot(e.center())))
            }
            BodyRepr::Oracle => {
                let level = -self.beta.ln();
                match self.f.psi_grad(x) {
                    Some((v, g)) if g.norm() > 0.0 => {
                        // ψ(y) ≥ v + ⟨g, y - x⟩, so ψ(y) ≤ level forces ⟨g, y⟩ ≤ ⟨g, x⟩ + level - v.
                        let k = g.norm();
                        Some(Halfspace::new(&g / k, (g.dot(x) + level - v) / k))
                    }
                    Some(_) => None,
                    None => self.f.support_cut(x),
                }
            }
        }
    }
}

fn ellipsoid_json(ty: &str, e: &SymEllipsoid) -> Value {
    json!({"type": ty, "A": rows_of(e.a()), "alpha": e.alpha(), "a": e.center().as_slice()})
}

fn halfspaces_json(h: &[Halfspace]) -> Value {
    Value::Array(h.iter().map(|h| json!({"n": h.n.as_slice(), "c": h.c})).collect())
}

fn parse_halfspaces(v: &Value) -> Result<Vec<Halfspace>> {
    v.as_array()
        .ok_or_else(|| Error::Input("halfspaces must be an array".into()))?
        .iter()
        .map(|h| Ok(Halfspace::new(json_vector(h, "n")?, json_f64(h, "c")?)))
        .collect()
}

pub(crate) fn json_field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Input(format!("missing field {key:?}")))
}

pub(crate) fn json_f64(v: &Value, key: &str) -> Result<f64> {
    json_field(v, key)?.as_f64().ok_or_else(|| Error::Input(format!("field {key:?} must be a number")))
}

pub(crate) fn json_vector(v: &Value, key: &str) -> Result<Vector> {
    let arr = json_field(v, key)?.as_array().ok_or_else(|| Error::Input(format!("field {key:?} must be an array")))?;
    let vals = arr
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| Error::Input(format!("field {key:?} must hold numbers"))))
        .collect::<Result<Vec<_>>>()?;
    if vals.is_empty() {
        return Err(Error::Input(format!("field {key:?} is empty")));
    }
    Ok(vector(&vals))
}

pub(crate) fn json_matrix(v: &Value, key: &str) -> Result<Matrix> {
    let rows = json_field(v, key)?.as_array().ok_or_else(|| Error::Input(format!("field {key:?} must be a matrix")))?;
    let rows = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| Error::Input(format!("field {key:?} must be a matrix")))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| Error::Input(format!("field {key:?} must hold numbers"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    linalg::matrix(&rows)
}
