//! Optimality certificates: contact points of the unit ball with the lifted body
//! and nonnegative weights decomposing I ⊕ s over their dyads.

use serde_json::{json, Value};

use crate::config::{CertConfig, RunConfig};
use crate::fnalg::LogConcaveFn;
use crate::linalg::{ball_grid, sphere_points};
use crate::optim::nnls;
use crate::oracle::{lift_violation, support_violation, SearchConfig};
use crate::sgeom::{violation, SymEllipsoid};
use crate::solver::JohnResult;
use crate::{Error, Matrix, Result, Vector};

/// A point ū = (u, w) of the unit sphere in R^{d+1}.
#[derive(Clone, Debug, PartialEq)]
pub struct Contact {
    pub u_bar: Vector,
    pub u: Vector,
    pub w: f64,
}

impl Contact {
    pub fn new(u: Vector, w: f64) -> Self {
        let d = u.len();
        let mut u_bar = Vector::zeros(d + 1);
        u_bar.rows_mut(0, d).copy_from(&u);
        u_bar[d] = w;
        Contact { u_bar, u, w }
    }

    /// The contact at projection u with w = ±√(1 - |u|²).
    pub fn lifted(u: Vector, upper: bool) -> Self {
        let w = (1.0 - u.norm_squared()).max(0.0).sqrt();
        Contact::new(u, if upper { w } else { -w })
    }

    fn reflected(&self) -> Self {
        Contact::new(self.u.clone(), -self.w)
    }
}

#[derive(Clone, Debug)]
pub struct ContactCertificate {
    pub contacts: Vec<Contact>,
    pub weights: Vec<f64>,
    pub s: f64,
    pub residual: f64,
}

impl ContactCertificate {
    pub fn dim(&self) -> usize {
        self.contacts.first().map_or(0, |c| c.u.len())
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Σ cᵢ ūᵢ⊗ūᵢ and Σ cᵢ uᵢ.
    pub fn moments(&self) -> (Matrix, Vector) {
        let d = self.dim();
        let mut m = Matrix::zeros(d + 1, d + 1);
        let mut v = Vector::zeros(d);
        for (c, w) in self.contacts.iter().zip(&self.weights) {
            m += &c.u_bar * c.u_bar.transpose() * *w;
            v += &c.u * *w;
        }
        (m, v)
    }

    /// Frobenius distance to I ⊕ s plus the norm of Σ cᵢ uᵢ.
    pub fn recompute_residual(&self) -> f64 {
        let (m, v) = self.moments();
        (m - target_matrix(self.dim(), self.s)).norm() + v.norm()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "contacts": self.contacts.iter().zip(&self.weights).map(|(c, w)| json!({
                "u_bar": c.u_bar.as_slice(),
                "weight": w,
            })).collect::<Vec<_>>(),
            "residual": self.residual,
            "s": self.s,
        })
    }
}

/// I ⊕ s.
pub fn target_matrix(d: usize, s: f64) -> Matrix {
    let mut m = Matrix::identity(d + 1, d + 1);
    m[(d, d)] = s;
    m
}

/// Dimension of the space of pairs (symmetric (d+1)×(d+1) matrix, d-vector).
pub fn moment_space_dim(d: usize) -> usize {
    (d + 1) * (d + 2) / 2 + d
}

/// The 4d points (±√(d/(d+s)) eⱼ, ±√(s/(d+s))) with equal weights (d+s)/(4d).
pub fn symmetric_certificate(d: usize, s: f64) -> ContactCertificate {
    let r = (d as f64 / (d as f64 + s)).sqrt();
    let w = (s / (d as f64 + s)).sqrt();
    let mut contacts = Vec::with_capacity(4 * d);
    for j in 0..d {
        for sign in [1.0, -1.0] {
            let mut u = Vector::zeros(d);
            u[j] = sign * r;
            contacts.push(Contact::new(u.clone(), w));
            contacts.push(Contact::new(u, -w));
        }
    }
    let weights = vec![(d as f64 + s) / (4.0 * d as f64); 4 * d];
    let mut cert = ContactCertificate { contacts, weights, s, residual: 0.0 };
    cert.residual = cert.recompute_residual();
    cert
}

/// The affine change of variables x = a + A y together with the height rescaling by α^{-s}.
#[derive(Clone, Debug)]
pub struct NormalizeMap {
    pub a_mat: Matrix,
    pub center: Vector,
    pub alpha: f64,
    pub s: f64,
}

impl NormalizeMap {
    pub fn is_identity(&self) -> bool {
        let d = self.center.len();
        (&self.a_mat - Matrix::identity(d, d)).amax() == 0.0 && self.center.amax() == 0.0 && self.alpha == 1.0
    }

    /// (y, η) in the normalized picture to (x, ξ) in the original one.
    pub fn to_original(&self, u_bar: &Vector) -> Vector {
        let d = self.center.len();
        let y = u_bar.rows(0, d).into_owned();
        let mut out = Vector::zeros(d + 1);
        out.rows_mut(0, d).copy_from(&(&self.center + &self.a_mat * y));
        out[d] = self.alpha * u_bar[d];
        out
    }

    pub fn to_ball(&self, p: &Vector) -> Result<Vector> {
        let d = self.center.len();
        let inv = self.a_mat.clone().try_inverse().ok_or_else(|| Error::Degenerate("singular ellipsoid matrix".into()))?;
        let mut out = Vector::zeros(d + 1);
        out.rows_mut(0, d).copy_from(&(inv * (p.rows(0, d) - &self.center)));
        out[d] = p[d] / self.alpha;
        Ok(out)
    }
}

/// Moves E to the unit ball: g(y) = α^{-s} f(a + A y).
pub fn normalize_to_ball(f: &LogConcaveFn, e: &SymEllipsoid, s: f64, cfg: &RunConfig) -> Result<(LogConcaveFn, NormalizeMap)> {
    if e.dim() != f.dim() {
        return Err(Error::Input("ellipsoid and function have different dimensions".into()));
    }
    let rep = violation(f, e, s, &cfg.geom);
    if !rep.contained {
        return Err(Error::Infeasible(format!("ellipsoid violates containment by {}", rep.max_violation)));
    }
    let map = NormalizeMap { a_mat: e.a().clone(), center: e.center().clone(), alpha: e.alpha(), s };
    let d = e.dim();
    let moved = (e.a() - Matrix::identity(d, d)).amax() != 0.0 || e.center().amax() != 0.0;
    let mut g = f.clone();
    if moved {
        g = LogConcaveFn::pullback(g, e.a().clone(), e.center().clone())?;
    }
    if e.alpha() != 1.0 {
        g = g.scaled(e.alpha().powf(-s))?;
    }
    Ok((g, map))
}

fn push_unique(out: &mut Vec<Vector>, y: Vector, sep: f64) {
    if !out.iter().any(|z| (z - &y).norm() < sep) {
        out.push(y);
    }
}

/// Contacts of B^{d+1} with the lifted body of g, reflected pairs included.
///
/// Interior contacts are points y of the open ball where s/2·log(1 - |y|²) - log g(y) ≥ -tol;
/// boundary contacts are points of the sphere where the support of g ends within tol.
pub fn find_contacts(g: &LogConcaveFn, s: f64, hints: &[Vector], cfg: &RunConfig, contact_tol: f64) -> Vec<Contact> {
    let d = g.dim();
    let eye = Matrix::identity(d, d);
    let zero = Vector::zeros(d);
    let scfg = SearchConfig::from_geom(&cfg.geom, d);
    let v = |y: &Vector| {
        let r2 = y.norm_squared();
        if r2 >= 1.0 {
            return f64::NEG_INFINITY;
        }
        0.5 * s * (-r2).ln_1p() + g.psi(y)
    };
    let r_axis = (d as f64 / (d as f64 + s)).sqrt();
    let mut seeds: Vec<Vector> = hints.iter().filter(|y| y.norm_squared() < 1.0).cloned().collect();
    for j in 0..d {
        for sign in [1.0, -1.0] {
            let mut y = Vector::zeros(d);
            y[j] = sign * r_axis;
            seeds.push(y);
        }
    }
    let mut interior: Vec<Vector> = Vec::new();
    let sep = 1e-7;
    let rep = lift_violation(g, &eye, &zero, 0.0, s, &scfg, &seeds);
    for c in &rep.candidates {
        if c.value.is_finite() && c.value >= -contact_tol {
            push_unique(&mut interior, c.y.clone(), sep);
        }
    }
    let mut grid = ball_grid(d, scfg.grid);
    grid.extend(seeds);
    for y in grid {
        let val = v(&y);
        if val.is_finite() && val >= -contact_tol {
            push_unique(&mut interior, y, sep);
        }
    }
    let mut out = Vec::new();
    for y in interior {
        let c = Contact::lifted(y, true);
        if c.w > 0.0 {
            out.push(c.reflected());
        }
        out.push(c);
    }
    if let Some(sr) = support_violation(g, &eye, &zero, &scfg) {
        let mut boundary: Vec<Vector> = Vec::new();
        for (y, ex) in sr.candidates.iter().map(|c| (c.y.clone(), c.value)) {
            if ex >= -contact_tol {
                push_unique(&mut boundary, y, sep);
            }
        }
        for y in sphere_points(d, scfg.sphere_n) {
            let ex = g.support_excess(&y).map_or(f64::NEG_INFINITY, |e| e.0);
            if ex >= -contact_tol {
                push_unique(&mut boundary, y, sep);
            }
        }
        out.extend(boundary.into_iter().map(|y| {
            let y = &y / y.norm();
            Contact::new(y, 0.0)
        }));
    }
    out
}

/// Coordinates of (ū⊗ū, u) in an orthonormal basis of the moment space.
fn moment_column(c: &Contact) -> Vec<f64> {
    let d = c.u.len();
    let mut col = Vec::with_capacity(moment_space_dim(d));
    for i in 0..=d {
        for j in i..=d {
            let x = c.u_bar[i] * c.u_bar[j];
            col.push(if i == j { x } else { std::f64::consts::SQRT_2 * x });
        }
    }
    col.extend(c.u.iter());
    col
}

fn target_column(d: usize, s: f64) -> Vec<f64> {
    let mut col = Vec::with_capacity(moment_space_dim(d));
    for i in 0..=d {
        for j in i..=d {
            col.push(if i != j {
                0.0
            } else if i == d {
                s
            } else {
                1.0
            });
        }
    }
    col.extend(std::iter::repeat_n(0.0, d));
    col
}

/// The separating pair (H̄, h) read off from the least-squares residual of an infeasible system.
#[derive(Clone, Debug)]
pub struct DualHint {
    pub h_mat: Matrix,
    pub h_vec: Vector,
}

impl DualHint {
    fn from_residual(r: &[f64], d: usize) -> Self {
        let mut h_mat = Matrix::zeros(d + 1, d + 1);
        let mut k = 0;
        for i in 0..=d {
            for j in i..=d {
                let x = if i == j { r[k] } else { r[k] / std::f64::consts::SQRT_2 };
                h_mat[(i, j)] = x;
                h_mat[(j, i)] = x;
                k += 1;
            }
        }
        DualHint { h_mat, h_vec: Vector::from_column_slice(&r[k..]) }
    }

    /// ⟨H̄, ū⊗ū⟩ + ⟨h, u⟩.
    pub fn pair(&self, c: &Contact) -> f64 {
        (&c.u_bar.transpose() * &self.h_mat * &c.u_bar)[0] + self.h_vec.dot(&c.u)
    }

    /// ⟨H̄, I ⊕ s⟩.
    pub fn pair_target(&self, s: f64) -> f64 {
        let d = self.h_vec.len();
        (0..d).map(|i| self.h_mat[(i, i)]).sum::<f64>() + s * self.h_mat[(d, d)]
    }
}

#[derive(Clone, Debug)]
pub enum WeightOutcome {
    Certificate(ContactCertificate),
    Infeasible { residual: f64, hint: DualHint },
}

fn nnls_solve(cols: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = b.len();
    let a = Matrix::from_fn(m, cols.len(), |i, j| cols[j][i]);
    let bv = Vector::from_column_slice(b);
    let x = nnls(&a, &bv);
    let r = &bv - &a * &x;
    (x.as_slice().to_vec(), r.as_slice().to_vec())
}

/// Moves weight along null directions of the active columns until they are independent.
fn caratheodory_prune(cols: &[Vec<f64>], weights: &mut [f64]) {
    let m = cols.first().map_or(0, |c| c.len());
    loop {
        let active: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] > 0.0).collect();
        let k = active.len();
        if k == 0 {
            return;
        }
        let mat = Matrix::from_fn(m.max(k), k, |i, j| if i < m { cols[active[j]][i] } else { 0.0 });
        let svd = mat.svd(false, true);
        let v_t = svd.v_t.unwrap();
        let smax = svd.singular_values.max();
        let (idx, smin) =
            svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
        if k <= m && smin > 1e-10 * smax {
            return;
        }
        let mut dir: Vec<f64> = (0..k).map(|j| v_t[(idx, j)]).collect();
        if dir.iter().all(|&x| x <= 0.0) {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        let mut t = f64::INFINITY;
        let mut hit = 0;
        for (jj, &j) in active.iter().enumerate() {
            if dir[jj] > 0.0 && weights[j] / dir[jj] < t {
                t = weights[j] / dir[jj];
                hit = j;
            }
        }
        if !t.is_finite() {
            return;
        }
        for (jj, &j) in active.iter().enumerate() {
            weights[j] = (weights[j] - t * dir[jj]).max(0.0);
        }
        weights[hit] = 0.0;
    }
}

/// Nonnegative weights with Σ cᵢ ūᵢ⊗ūᵢ = I ⊕ s and Σ cᵢ uᵢ = 0, pruned to independent dyads.
pub fn solve_weights(contacts: &[Contact], s: f64, cfg: &CertConfig) -> Result<WeightOutcome> {
    let d = match contacts.first() {
        Some(c) => c.u.len(),
        None => return Err(Error::Input("no contacts".into())),
    };
    if contacts.iter().any(|c| c.u.len() != d || (c.u_bar.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::Input("contacts must lie on the unit sphere of a common dimension".into()));
    }
    // reflections through w = 0 and repeated points give identical dyads
    let mut contacts_u: Vec<&Contact> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for c in contacts {
        let col = moment_column(c);
        let dup = cols.iter().any(|o| o.iter().zip(&col).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < 1e-13);
        if !dup {
            cols.push(col);
            contacts_u.push(c);
        }
    }
    let contacts = contacts_u;
    let b = target_column(d, s);
    let (mut x, r) = nnls_solve(&cols, &b);
    let residual = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if residual > cfg.cert_tol {
        return Ok(WeightOutcome::Infeasible { residual, hint: DualHint::from_residual(&r, d) });
    }
    caratheodory_prune(&cols, &mut x);
    let keep: Vec<usize> = (0..x.len()).filter(|&j| x[j] > 0.0).collect();
    let kept_cols: Vec<Vec<f64>> = keep.iter().map(|&j| cols[j].clone()).collect();
    let (x2, _) = nnls_solve(&kept_cols, &b);
    let mut cert = ContactCertificate { contacts: Vec::new(), weights: Vec::new(), s, residual: 0.0 };
    for (jj, &j) in keep.iter().enumerate() {
        if x2[jj] > 0.0 {
            cert.contacts.push(contacts[j].clone());
            cert.weights.push(x2[jj]);
        }
    }
    cert.residual = cert.recompute_residual();
    if cert.residual > cfg.cert_tol {
        let (_, r) = nnls_solve(&cols, &b);
        return Ok(WeightOutcome::Infeasible { residual: cert.residual, hint: DualHint::from_residual(&r, d) });
    }
    Ok(WeightOutcome::Certificate(cert))
}

#[derive(Clone, Debug)]
pub enum Verdict {
    CertifiedGlobal(ContactCertificate),
    LocallySuspect { contacts: usize, residual: f64, hint: Option<DualHint> },
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::CertifiedGlobal(_))
    }

    pub fn to_json(&self) -> Value {
        match self {
            Verdict::CertifiedGlobal(c) => json!({"status": "certified_global", "certificate": c.to_json()}),
            Verdict::LocallySuspect { contacts, residual, .. } => {
                json!({"status": "locally_suspect", "contacts": contacts, "residual": residual})
            }
        }
    }
}

/// Certificate search for a feasible E, seeded with extra points in the original coordinates.
pub fn verify_optimality_seeded(f: &LogConcaveFn, e: &SymEllipsoid, s: f64, seeds: &[Vector], cfg: &RunConfig) -> Result<Verdict> {
    let (g, map) = normalize_to_ball(f, e, s, cfg)?;
    let hints: Vec<Vector> = seeds
        .iter()
        .filter_map(|x| {
            let mut p = Vector::zeros(x.len() + 1);
            p.rows_mut(0, x.len()).copy_from(x);
            map.to_ball(&p).ok().map(|q| q.rows(0, x.len()).into_owned())
        })
        .collect();
    let mut tol = cfg.cert.contact_tol;
    let mut best: Option<Verdict> = None;
    for _ in 0..2 {
        let contacts = find_contacts(&g, s, &hints, cfg, tol);
        if contacts.is_empty() {
            return Ok(best.unwrap_or(Verdict::LocallySuspect { contacts: 0, residual: f64::INFINITY, hint: None }));
        }
        match solve_weights(&contacts, s, &cfg.cert)? {
            WeightOutcome::Certificate(c) => {
                let marginal = c.residual > 0.1 * cfg.cert.cert_tol;
                best = Some(Verdict::CertifiedGlobal(c));
                if !marginal {
                    break;
                }
            }
            WeightOutcome::Infeasible { residual, hint } => {
                if best.is_none() {
                    best = Some(Verdict::LocallySuspect { contacts: contacts.len(), residual, hint: Some(hint) });
                }
                break;
            }
        }
        tol *= 0.1;
    }
    Ok(best.expect("at least one round ran"))
}

pub fn verify_optimality(f: &LogConcaveFn, e: &SymEllipsoid, s: f64, cfg: &RunConfig) -> Result<Verdict> {
    verify_optimality_seeded(f, e, s, &[], cfg)
}

/// Verifies a solver result, using its active tangent points as extra contact seeds.
pub fn verify_result(f: &LogConcaveFn, r: &JohnResult, cfg: &RunConfig) -> Result<Verdict> {
    let seeds: Vec<Vector> = r.duals.iter().map(|p| p.x.clone()).collect();
    verify_optimality_seeded(f, &r.ellipsoid, r.s, &seeds, cfg)
}

/// The conditions in R^d: g(uᵢ) = wᵢ^s, Σ cᵢ uᵢ⊗uᵢ = I, Σ cᵢ wᵢ² = s, Σ cᵢ uᵢ = 0.
pub fn functional_condition_check(cert: &ContactCertificate, g: &LogConcaveFn, tol: f64) -> bool {
    let d = cert.dim();
    let s = cert.s;
    let mut uu = Matrix::zeros(d, d);
    let mut ww = 0.0;
    let mut su = Vector::zeros(d);
    for (c, w) in cert.contacts.iter().zip(&cert.weights) {
        let height = g.value(&c.u).max(0.0).powf(1.0 / s);
        if (height - c.w.abs()).abs() > tol.sqrt() {
            return false;
        }
        uu += &c.u * c.u.transpose() * *w;
        ww += w * c.w * c.w;
        su += &c.u * *w;
    }
    (uu - Matrix::identity(d, d)).norm() <= tol && (ww - s).abs() <= tol && su.norm() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    #[test]
    fn symmetric_points_decompose_identity() {
        for d in 1..=3 {
            for s in [1.0, 2.0, 7.0] {
                let c = symmetric_certificate(d, s);
                assert!(c.residual < 1e-12);
                assert!((c.weight_sum() - (d as f64 + s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nnls_recovers_symmetric_weights() {
        let c = symmetric_certificate(2, 3.0);
        let out = solve_weights(&c.contacts, 3.0, &CertConfig::default()).unwrap();
        let WeightOutcome::Certificate(cert) = out else { panic!("expected a certificate") };
        assert!(cert.residual < 1e-10);
        assert!((cert.weight_sum() - 5.0).abs() < 1e-8);
        assert!(cert.contacts.len() <= moment_space_dim(2) + 1);
        assert!(cert.contacts.len() >= 3);
    }

    #[test]
    fn one_sided_contacts_are_infeasible() {
        let c = symmetric_certificate(1, 1.0);
        let upper: Vec<Contact> = c.contacts.into_iter().filter(|c| c.w > 0.0).collect();
        let out = solve_weights(&upper, 3.0, &CertConfig::default()).unwrap();
        let WeightOutcome::Infeasible { hint, .. } = out else { panic!("expected infeasible") };
        assert!(hint.pair_target(3.0) > 0.0);
        for c in &upper {
            assert!(hint.pair(c) <= 1e-12);
        }
    }

    #[test]
    fn ball_power_is_certified() {
        let cfg = RunConfig::default();
        let f = LogConcaveFn::ball_power(2, 1.0).unwrap();
        let v = verify_optimality(&f, &SymEllipsoid::unit_ball(2), 1.0, &cfg).unwrap();
        assert!(v.is_certified());
    }

    #[test]
    fn shrunken_ellipsoid_is_suspect() {
        let cfg = RunConfig::default();
        let f = LogConcaveFn::ball_power(1, 1.0).unwrap();
        let e = SymEllipsoid::new(Matrix::identity(1, 1) * 0.9, 0.9, vector(&[0.0])).unwrap();
        assert!(!verify_optimality(&f, &e, 1.0, &cfg).unwrap().is_certified());
    }

    #[test]
    fn functional_form_agrees() {
        let d = 2;
        let s = 2.0;
        let cert = symmetric_certificate(d, s);
        let w = (s / (d as f64 + s)).sqrt();
        let r = (d as f64 / (d as f64 + s)).sqrt();
        // ball-power envelope touching at the axis points
        let g = LogConcaveFn::ball_power(d, s).unwrap();
        assert!((g.value(&vector(&[r, 0.0])).powf(1.0 / s) - w).abs() < 1e-12);
        assert!(functional_condition_check(&cert, &g, 1e-9));
        let mut bad = cert.clone();
        bad.weights[0] += 1e-2;
        assert!(!functional_condition_check(&bad, &g, 1e-6));
    }
}
