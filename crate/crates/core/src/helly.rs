//! Quantitative Helly selection for pointwise minima of log-concave functions,
//! and the family showing that 2d indices do not suffice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certify::{verify_result, Contact, ContactCertificate, NormalizeMap, Verdict};
use crate::config::RunConfig;
use crate::fnalg::{Halfspace, LogConcaveFn};
use crate::linalg::{sphere_points, vector};
use crate::optim::nnls;
use crate::quad::integrate;
use crate::scalar::kappa_s;
use crate::solver::{solve_john, Status};
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct HellyConfig {
    /// Asplund smoothing with e^{-δ|x|²} before selection; off when None.
    pub smooth_delta: Option<f64>,
    /// Relative slack on ‖f‖ when choosing the indices that realize the maximum.
    pub eps_lvl: f64,
}

impl Default for HellyConfig {
    fn default() -> Self {
        HellyConfig { smooth_delta: None, eps_lvl: 1e-6 }
    }
}

/// Replaces each fᵢ by its Asplund sum with e^{-δ|x|²}.
pub fn smooth_family(fs: &[LogConcaveFn], delta: f64) -> Result<Vec<LogConcaveFn>> {
    if !(delta > 0.0) {
        return Err(Error::Input("smoothing parameter must be positive".into()));
    }
    fs.iter()
        .map(|f| {
            let d = f.dim();
            let g = LogConcaveFn::gaussian(Matrix::identity(d, d) / delta.sqrt(), 1.0, Vector::zeros(d))?;
            LogConcaveFn::asplund(f.clone(), g)
        })
        .collect()
}

/// f pulled back so that its John 1-ellipsoid is the unit ball, with the certificate there.
pub struct JohnPosition {
    pub g: LogConcaveFn,
    pub map: NormalizeMap,
    pub certificate: ContactCertificate,
    /// Set when the certificate needed a tighter contact tolerance or a solver warning was raised.
    pub warnings: Vec<String>,
}

pub fn john_position(f: &LogConcaveFn, cfg: &RunConfig) -> Result<JohnPosition> {
    let r = solve_john(f, 1.0, cfg)?;
    let mut warnings = Vec::new();
    if r.status != Status::Converged {
        warnings.push(format!("solver status {}", r.status.as_str()));
    }
    let mut verdict = verify_result(f, &r, cfg)?;
    if !verdict.is_certified() {
        let mut tight = cfg.clone();
        tight.cert.contact_tol *= 0.1;
        tight.geom.grid_per_axis = tight.geom.grid_per_axis * 2 - 1;
        verdict = verify_result(f, &r, &tight)?;
        warnings.push("certificate needed a tighter contact search".into());
    }
    let Verdict::CertifiedGlobal(certificate) = verdict else {
        return Err(Error::Certificate("no contact certificate for the John position".into()));
    };
    let (g, map) = crate::certify::normalize_to_ball(f, &r.ellipsoid, 1.0, cfg)?;
    Ok(JohnPosition { g, map, certificate, warnings })
}

/// Greedy choice of d+1 contacts, each farthest from the span of those before it.
///
/// Returns the indices and the distances; fails if a distance falls below √((d-t+2)/(d+1)).
pub fn dvoretzky_rogers_select(contacts: &[Contact], tol: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    let d = contacts.first().map(|c| c.u.len()).ok_or_else(|| Error::Input("no contacts".into()))?;
    let mut basis: Vec<Vector> = Vec::new();
    let mut chosen = Vec::new();
    let mut dists = Vec::new();
    for t in 1..=d + 1 {
        let residual = |v: &Vector| {
            let mut r = v.clone();
            for b in &basis {
                r -= b * b.dot(&r);
            }
            r
        };
        let (best, dist) = contacts
            .iter()
            .enumerate()
            .filter(|(j, _)| !chosen.contains(j))
            .map(|(j, c)| (j, residual(&c.u_bar).norm()))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == usize::MAX {
            return Err(Error::Certificate("fewer than d+1 contacts".into()));
        }
        let bound = ((d + 2 - t) as f64 / (d + 1) as f64).sqrt();
        if dist < bound - tol {
            return Err(Error::Certificate(format!("distance {dist} below {bound} at step {t}")));
        }
        let r = residual(&contacts[best].u_bar);
        basis.push(&r / r.norm());
        chosen.push(best);
        dists.push(dist);
    }
    Ok((chosen, dists))
}

/// √((d+1)!) / (d+1)^{(d+1)/2}.
pub fn dr_det_bound(d: usize) -> f64 {
    let n = (d + 1) as f64;
    let fact: f64 = (1..=d + 1).map(|k| k as f64).product();
    fact.sqrt() / n.powf(n / 2.0)
}

/// 8·4^d·d^d·(d+2)^d·(vol B^d)².
pub fn p_volume_bound(d: usize) -> f64 {
    let df = d as f64;
    let vb = kappa_s(d, 0.0f64);
    8.0 * 4f64.powf(df) * df.powf(df) * (df + 2.0).powf(df) * vb * vb
}

/// (100d)^{5d/2}.
pub fn ratio_bound(d: usize) -> f64 {
    (100.0 * d as f64).powf(2.5 * d as f64)
}

/// Vertices of {x : ⟨nₖ, x⟩ ≤ cₖ} in R^m by enumerating m-subsets of the constraints.
pub fn polytope_vertices(hs: &[Halfspace], m: usize) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::new();
    let k = hs.len();
    let mut idx: Vec<usize> = (0..m).collect();
    if k < m {
        return out;
    }
    loop {
        let a = Matrix::from_fn(m, m, |i, j| hs[idx[i]].n[j]);
        let b = Vector::from_fn(m, |i, _| hs[idx[i]].c);
        if let Some(x) = a.clone().lu().solve(&b) {
            let scale = 1.0 + x.amax();
            if a.determinant().abs() > 1e-12
                && hs.iter().all(|h| h.n.dot(&x) - h.c <= 1e-9 * scale)
                && !out.iter().any(|v| (v - &x).norm() <= 1e-9 * scale)
            {
                out.push(x);
            }
        }
        // next combination
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < k - m + i {
                idx[i] += 1;
                for j in i + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Area of a convex polygon given by unordered vertices in R².
fn polygon_area(pts: &[Vector]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let c = pts.iter().fold(Vector::zeros(2), |a, p| a + p) / pts.len() as f64;
    let mut sorted: Vec<&Vector> = pts.iter().collect();
    sorted.sort_by(|a, b| {
        let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
        let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
        ta.partial_cmp(&tb).unwrap()
    });
    let mut area = 0.0;
    for i in 0..sorted.len() {
        let p = sorted[i];
        let q = sorted[(i + 1) % sorted.len()];
        area += p[0] * q[1] - p[1] * q[0];
    }
    0.5 * area.abs()
}

/// Volume of a bounded polytope with the origin in its interior, d ≤ 3.
pub fn polytope_volume(hs: &[Halfspace], d: usize) -> Result<f64> {
    let verts = polytope_vertices(hs, d);
    let mut vol = 0.0;
    for h in hs {
        let k = h.n.norm();
        let dist = h.c / k;
        let on: Vec<&Vector> = verts.iter().filter(|v| (h.n.dot(v) - h.c).abs() <= 1e-9 * (1.0 + v.amax())).collect();
        let facet = match d {
            1 => f64::from(u8::from(!on.is_empty())),
            2 => {
                if on.len() < 2 {
                    0.0
                } else {
                    let mut m: f64 = 0.0;
                    for a in &on {
                        for b in &on {
                            m = m.max((*a - *b).norm());
                        }
                    }
                    m
                }
            }
            3 => {
                let n = &h.n / k;
                let helper = if n[0].abs() < 0.9 { vector(&[1.0, 0.0, 0.0]) } else { vector(&[0.0, 1.0, 0.0]) };
                let e1 = (&helper - &n * n.dot(&helper)).normalize();
                let e2 = n.cross(&e1);
                let flat: Vec<Vector> = on.iter().map(|v| vector(&[v.dot(&e1), v.dot(&e2)])).collect();
                polygon_area(&flat)
            }
            _ => return Err(Error::Unsupported(format!("polytope volume in dimension {d}"))),
        };
        vol += dist * facet / d as f64;
    }
    Ok(vol)
}

/// Everything produced along the way to the polytope P and the contact subset η.
#[derive(Clone, Debug)]
pub struct PolarPart {
    pub eta1: Vec<usize>,
    pub eta2: Vec<usize>,
    pub eta: Vec<usize>,
    pub dr_distances: Vec<f64>,
    pub dr_det: f64,
    /// Vertices of P₂; P = P₂° is {x : ⟨v, x⟩ ≤ 1 for every vertex v}.
    pub p2_vertices: Vec<Vector>,
    pub p: Vec<Halfspace>,
    pub p_volume: f64,
    pub lambda: f64,
    pub y: Vector,
    pub z: Vector,
}

impl PolarPart {
    /// ‖x‖_P, the support function of P₂.
    pub fn gauge(&self, x: &Vector) -> f64 {
        self.p2_vertices.iter().map(|v| v.dot(x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Whether p ∈ conv(points), by nonnegative least squares on the homogenized system.
fn hull_weights(points: &[Vector], p: &Vector) -> (Vector, f64) {
    let d = p.len();
    let a = Matrix::from_fn(d + 1, points.len(), |i, j| if i < d { points[j][i] } else { 1.0 });
    let mut b = Vector::zeros(d + 1);
    b.rows_mut(0, d).copy_from(p);
    b[d] = 1.0;
    let w = nnls(&a, &b);
    let r = (&a * &w - b).norm();
    (w, r)
}

/// Support of Σ wᵢ pᵢ reduced to affinely independent points, keeping the combination.
fn caratheodory_affine(points: &[Vector], w: &mut Vector) {
    let d = points.first().map_or(0, |p| p.len());
    loop {
        let active: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
        let k = active.len();
        if k <= 1 {
            return;
        }
        let m = Matrix::from_fn((d + 1).max(k), k, |i, j| {
            if i < d {
                points[active[j]][i]
            } else if i == d {
                1.0
            } else {
                0.0
            }
        });
        let svd = m.svd(false, true);
        let v_t = svd.v_t.unwrap();
        let smax = svd.singular_values.max();
        let (idx, smin) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &x)| if x < a.1 { (i, x) } else { a });
        if k <= d + 1 && smin > 1e-10 * smax {
            return;
        }
        let mut dir: Vec<f64> = (0..k).map(|j| v_t[(idx, j)]).collect();
        if dir.iter().all(|&x| x <= 0.0) {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        let mut t = f64::INFINITY;
        let mut hit = active[0];
        for (jj, &j) in active.iter().enumerate() {
            if dir[jj] > 0.0 && w[j] / dir[jj] < t {
                t = w[j] / dir[jj];
                hit = j;
            }
        }
        for (jj, &j) in active.iter().enumerate() {
            w[j] = (w[j] - t * dir[jj]).max(0.0);
        }
        w[hit] = 0.0;
    }
}

/// The polytope P and the contact indices η from an s = 1 certificate.
pub fn build_p_and_eta(cert: &ContactCertificate, tol: f64) -> Result<PolarPart> {
    let d = cert.dim();
    let contacts = &cert.contacts;
    let (eta1, dr_distances) = dvoretzky_rogers_select(contacts, tol)?;
    let v = Matrix::from_fn(d + 1, d + 1, |i, j| contacts[eta1[j]].u_bar[i]);
    let dr_det = v.determinant().abs();
    if dr_det < dr_det_bound(d) - tol {
        return Err(Error::Certificate(format!("determinant {dr_det} below {}", dr_det_bound(d))));
    }
    if v.clone().try_inverse().is_none() {
        return Err(Error::Certificate("selected contacts are dependent".into()));
    }
    // In barycentric coordinates β = V⁻¹p the simplex is {β ≥ 0, Σβ ≤ 1}, its centroid has
    // all βᵢ = 1/(d+2), and the reflected copy is {β ≤ 2/(d+2), Σβ ≥ d/(d+2)}.
    let m = d + 1;
    let nd = (d + 2) as f64;
    let mut hs = Vec::new();
    for i in 0..m {
        let mut e = Vector::zeros(m);
        e[i] = 1.0;
        hs.push(Halfspace::new(-&e, 0.0));
        hs.push(Halfspace::new(e, 2.0 / nd));
    }
    hs.push(Halfspace::new(Vector::from_element(m, 1.0), 1.0));
    hs.push(Halfspace::new(Vector::from_element(m, -1.0), -(d as f64) / nd));
    let p1_bar: Vec<Vector> = polytope_vertices(&hs, m).into_iter().map(|b| &v * b).collect();
    let z_bar = &v * Vector::from_element(m, 1.0 / nd);
    let z = z_bar.rows(0, d).into_owned();
    let projected: Vec<Vector> = contacts.iter().map(|c| c.u.clone()).collect();
    let dir = if z.norm() > 1e-14 { -&z / z.norm() } else { Vector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 }) };
    // y on the boundary of the projected hull along the ray -z
    let (mut lo, mut hi) = (0.0, 1.0 + 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hull_weights(&projected, &(&dir * mid)).1 <= 1e-12 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let y = &dir * lo;
    let (mut w, r) = hull_weights(&projected, &y);
    if r > 1e-10 {
        return Err(Error::Certificate("boundary point of the contact hull not expressible".into()));
    }
    caratheodory_affine(&projected, &mut w);
    let mut eta2: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
    if eta2.len() > d {
        // y sits on a facet, so one barycentric weight is negligible
        let (drop, _) = eta2.iter().map(|&j| (j, w[j])).fold((usize::MAX, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
        eta2.retain(|&j| j != drop);
    }
    let mut eta: Vec<usize> = eta1.iter().chain(eta2.iter()).cloned().collect();
    eta.sort_unstable();
    eta.dedup();
    let lambda = if z.norm() > 1e-14 { y.norm() / (&y - &z).norm() } else { 1.0 };
    let p2_vertices: Vec<Vector> = p1_bar
        .iter()
        .map(|p| {
            let x = p.rows(0, d).into_owned();
            &y + (x - &y) * lambda
        })
        .collect();
    let p: Vec<Halfspace> = p2_vertices.iter().filter(|v| v.norm() > 1e-14).map(|v| Halfspace::new(v.clone(), 1.0)).collect();
    let p_volume = polytope_volume(&p, d)?;
    Ok(PolarPart { eta1, eta2, eta, dr_distances, dr_det, p2_vertices, p, p_volume, lambda, y, z })
}

#[derive(Clone, Debug)]
pub struct HellySelection {
    pub sigma: Vec<usize>,
    pub sigma1: Vec<usize>,
    pub sigma2: Vec<usize>,
    pub polar: PolarPart,
    pub contacts: Vec<Contact>,
    /// Indices i(j) for j ∈ η, with any other indices within the tie tolerance.
    pub touching: Vec<(usize, usize, Vec<usize>)>,
    pub integral_f: f64,
    pub integral_f_sigma: f64,
    pub ratio: f64,
    pub warnings: Vec<String>,
}

/// Pass/fail of the quantities the construction promises.
#[derive(Clone, Debug, PartialEq)]
pub struct HellyChecks {
    pub sigma_size: bool,
    pub ratio: bool,
    pub p_volume: bool,
    pub dr_det: bool,
    pub lambda: bool,
    pub eta_size: bool,
}

impl HellyChecks {
    pub fn all(&self) -> bool {
        self.sigma_size && self.ratio && self.p_volume && self.dr_det && self.lambda && self.eta_size
    }
}

impl HellySelection {
    pub fn dim(&self) -> usize {
        self.polar.z.len()
    }

    pub fn checks(&self) -> HellyChecks {
        let d = self.dim();
        HellyChecks {
            sigma_size: self.sigma.len() <= 3 * d + 2,
            ratio: self.ratio <= ratio_bound(d),
            p_volume: self.polar.p_volume <= p_volume_bound(d),
            dr_det: self.polar.dr_det >= dr_det_bound(d) * (1.0 - 1e-6),
            lambda: self.polar.lambda >= 1.0 / (d as f64 + 2.0) - 1e-12,
            eta_size: self.polar.eta.len() <= 2 * d + 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let d = self.dim();
        let c = self.checks();
        json!({
            "sigma": self.sigma,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "eta": self.polar.eta,
            "eta1": self.polar.eta1,
            "eta2": self.polar.eta2,
            "touching": self.touching.iter().map(|(j, i, ties)| json!({"contact": j, "index": i, "ties": ties})).collect::<Vec<_>>(),
            "P": self.polar.p.iter().map(|h| json!({"n": h.n.as_slice(), "c": h.c})).collect::<Vec<_>>(),
            "P_volume": self.polar.p_volume,
            "P_volume_bound": p_volume_bound(d),
            "dr_det": self.polar.dr_det,
            "dr_det_bound": dr_det_bound(d),
            "lambda": self.polar.lambda,
            "y": self.polar.y.as_slice(),
            "z": self.polar.z.as_slice(),
            "integral_f": self.integral_f,
            "integral_f_sigma": self.integral_f_sigma,
            "ratio": self.ratio,
            "ratio_bound": ratio_bound(d),
            "checks": {
                "sigma_size": c.sigma_size, "ratio": c.ratio, "P_volume": c.p_volume,
                "dr_det": c.dr_det, "lambda": c.lambda, "eta_size": c.eta_size,
            },
            "warnings": self.warnings,
        })
    }
}

/// Indices i whose lifted body has the contact (x, ξ) on its boundary, best first.
///
/// For ξ > 0 the margin is log ξ - log fᵢ(x) (zero on the boundary); for ξ = 0 it is the support excess.
fn touching_index(fs: &[LogConcaveFn], x: &Vector, xi: f64, tie_tol: f64) -> (usize, Vec<usize>) {
    let margins: Vec<f64> = fs
        .iter()
        .map(|f| {
            if xi > 0.0 {
                let p = f.psi(x);
                if p == f64::INFINITY {
                    f64::INFINITY
                } else {
                    xi.ln() + p
                }
            } else {
                f.support_excess(x).map_or(f64::NEG_INFINITY, |e| e.0)
            }
        })
        .collect();
    let key = |m: f64| if m.is_nan() { f64::INFINITY } else { m.abs() };
    let best = (0..fs.len()).min_by(|&a, &b| key(margins[a]).partial_cmp(&key(margins[b])).unwrap()).unwrap();
    let ties = (0..fs.len()).filter(|&i| i != best && key(margins[i]) <= key(margins[best]) + tie_tol).collect();
    (best, ties)
}

/// At most d+1 indices whose minimum has the same sup norm as the whole family.
///
/// Candidates are ranked by how close they are to being active at the maximizer, either through
/// ψᵢ or through their support, and subsets of growing candidate pools are tried.
fn max_realizing(fs: &[LogConcaveFn], eps: f64) -> Result<Vec<usize>> {
    let d = fs[0].dim();
    let f = LogConcaveFn::pointwise_min(fs.to_vec())?;
    let (sup, x) = f.sup_norm()?;
    let psi_star = -sup.ln();
    let scale = 1.0 + psi_star.abs();
    let mut gaps: Vec<(usize, f64)> = fs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let by_value = psi_star - g.psi(&x);
            let by_support = g.support_excess(&x).map_or(f64::INFINITY, |e| -e.0);
            (i, by_value.min(by_support).max(0.0) / scale)
        })
        .collect();
    gaps.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let realizes = |set: &[usize]| -> bool {
        let sub = LogConcaveFn::pointwise_min(set.iter().map(|&i| fs[i].clone()).collect()).expect("nonempty");
        match sub.sup_norm() {
            Ok((s, _)) => s <= sup * (1.0 + eps),
            Err(_) => false,
        }
    };
    let mut tried = 0;
    for tol in [1e-9, 1e-6, 1e-4, 1e-2, 1e-1, f64::INFINITY] {
        let pool: Vec<usize> = gaps.iter().take_while(|g| g.1 <= tol).take(2 * d + 4).map(|g| g.0).collect();
        if pool.len() == tried {
            continue;
        }
        tried = pool.len();
        for size in 1..=(d + 1).min(pool.len()) {
            let mut comb: Vec<usize> = (0..size).collect();
            loop {
                let set: Vec<usize> = comb.iter().map(|&k| pool[k]).collect();
                if realizes(&set) {
                    let mut set = set;
                    set.sort_unstable();
                    return Ok(set);
                }
                let mut i = size;
                let mut advanced = false;
                while i > 0 {
                    i -= 1;
                    if comb[i] < pool.len() - size + i {
                        comb[i] += 1;
                        for j in i + 1..size {
                            comb[j] = comb[j - 1] + 1;
                        }
                        advanced = true;
                        break;
                    }
                }
                if !advanced {
                    break;
                }
            }
        }
    }
    Err(Error::Certificate("no d+1 indices realize the sup norm".into()))
}

/// ∫ f_σ, with +∞ for a divergent integral.
pub fn subset_integral(fs: &[LogConcaveFn], set: &[usize], cfg: &RunConfig) -> Result<f64> {
    let sub = LogConcaveFn::pointwise_min(set.iter().map(|&i| fs[i].clone()).collect())?;
    match integrate(&sub, &cfg.geom) {
        Ok(v) => Ok(v),
        Err(Error::NonIntegrable(_)) => Ok(f64::INFINITY),
        Err(Error::Degenerate(m)) if m.contains("unbounded") => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

pub fn helly_select(fs: &[LogConcaveFn], hcfg: &HellyConfig, cfg: &RunConfig) -> Result<HellySelection> {
    let first = fs.first().ok_or_else(|| Error::Input("empty family".into()))?;
    let d = first.dim();
    if fs.iter().any(|f| f.dim() != d) {
        return Err(Error::Input("functions of different dimensions".into()));
    }
    let smoothed;
    let fam: &[LogConcaveFn] = match hcfg.smooth_delta {
        Some(delta) => {
            smoothed = smooth_family(fs, delta)?;
            &smoothed
        }
        None => fs,
    };
    let f = LogConcaveFn::pointwise_min(fam.to_vec())?;
    let integral_f = integrate(&f, &cfg.geom)?;
    if !(integral_f > 0.0) {
        return Err(Error::Degenerate("the minimum has zero integral".into()));
    }
    let jp = john_position(&f, cfg)?;
    let mut warnings = jp.warnings;
    let polar = build_p_and_eta(&jp.certificate, 1e-6)?;
    let mut touching = Vec::new();
    for &j in &polar.eta {
        let c = &jp.certificate.contacts[j];
        let mut ub = c.u_bar.clone();
        ub[d] = ub[d].abs();
        let orig = jp.map.to_original(&ub);
        let x = orig.rows(0, d).into_owned();
        let (i, ties) = touching_index(fam, &x, orig[d], 1e-6);
        if !ties.is_empty() {
            warnings.push(format!("contact {j} touches several functions"));
        }
        touching.push((j, i, ties));
    }
    let mut sigma1: Vec<usize> = touching.iter().map(|t| t.1).collect();
    sigma1.sort_unstable();
    sigma1.dedup();
    let sigma2 = max_realizing(fam, hcfg.eps_lvl)?;
    let mut sigma: Vec<usize> = sigma1.iter().chain(sigma2.iter()).cloned().collect();
    sigma.sort_unstable();
    sigma.dedup();
    let integral_f_sigma = subset_integral(fam, &sigma, cfg)?;
    Ok(HellySelection {
        ratio: integral_f_sigma / integral_f,
        sigma,
        sigma1,
        sigma2,
        polar,
        contacts: jp.certificate.contacts.clone(),
        touching,
        integral_f,
        integral_f_sigma,
        warnings,
    })
}

/// The 2d+1 functions e^Δ·1{xᵢ ≥ -1}, e^Δ·1{xᵢ ≤ 1} and the constant 1.
pub fn lower_bound_family(d: usize, delta: f64) -> Result<Vec<LogConcaveFn>> {
    if d == 0 || !(delta > 0.0) {
        return Err(Error::Input("need d ≥ 1 and Δ > 0".into()));
    }
    let mut out = Vec::with_capacity(2 * d + 1);
    for sign in [-1.0, 1.0] {
        for i in 0..d {
            let mut n = Vector::zeros(d);
            n[i] = sign;
            out.push(LogConcaveFn::exp_polyhedral(vec![(Vector::zeros(d), delta)], vec![Halfspace::new(n, 1.0)])?);
        }
    }
    out.push(LogConcaveFn::exp_polyhedral(vec![(Vector::zeros(d), 0.0)], vec![])?);
    Ok(out)
}

/// A random family whose minimum is integrable: capped exponentials e^{min(⟨gᵢ,x⟩ + bᵢ, -hᵢ)}
/// and flat halfspace functions.
pub fn random_family(d: usize, n: usize, seed: u64) -> Result<Vec<LogConcaveFn>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 {
        let u: f64 = rng.random::<f64>().max(1e-300);
        let v: f64 = rng.random::<f64>();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    };
    for _ in 0..1000 {
        let mut fam = Vec::with_capacity(n);
        let mut dirs = Vec::new();
        for k in 0..n {
            let g = Vector::from_fn(d, |_, _| normal());
            let b = 0.5 * normal();
            let cap = 0.5 * normal().abs();
            if k % 3 == 2 {
                let c = 0.5 + normal().abs();
                fam.push(LogConcaveFn::exp_polyhedral(vec![(Vector::zeros(d), cap)], vec![Halfspace::new(g.clone(), c)])?);
                dirs.push(g);
            } else {
                fam.push(LogConcaveFn::exp_polyhedral(vec![(g.clone(), b), (Vector::zeros(d), -cap)], vec![])?);
                dirs.push(-g);
            }
        }
        // the directions must positively span R^d, with some margin, for the minimum to be integrable
        let spans = sphere_points(d, if d == 1 { 2 } else { 512 })
            .iter()
            .all(|u| dirs.iter().map(|g| g.dot(u) / g.norm()).fold(f64::NEG_INFINITY, f64::max) > 0.1);
        if spans {
            return Ok(fam);
        }
    }
    Err(Error::Degenerate("could not draw an integrable family".into()))
}

pub fn family_from_json(v: &Value) -> Result<Vec<LogConcaveFn>> {
    let arr = v.get("functions").and_then(|a| a.as_array()).ok_or_else(|| Error::Input("expected {\"functions\": [...]}".into()))?;
    arr.iter().map(LogConcaveFn::from_json).collect()
}

pub fn family_to_json(fs: &[LogConcaveFn]) -> Value {
    json!({"functions": fs.iter().map(|f| f.to_json()).collect::<Vec<_>>()})
}
