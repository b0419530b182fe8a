//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use john_s::certify::{symmetric_certificate, target_matrix, verify_optimality};
use john_s::fnalg::Halfspace;
use john_s::helly::{helly_select, lower_bound_family, random_family, ratio_bound, subset_integral, HellyConfig};
use john_s::limits::{john_zero, max_gaussian, sweep, MaxGaussian};
use john_s::quad::gk_adaptive;
use john_s::scalar::kappa_s;
use john_s::sgeom::s_volume;
use john_s::solver::{brute_force_1d, solve_john, JohnResult, Status};
use john_s::{LogConcaveFn, Matrix, RunConfig, SymEllipsoid, Vector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn v1(x: f64) -> Vector {
    Vector::from_vec(vec![x])
}

fn m1(x: f64) -> Matrix {
    Matrix::from_element(1, 1, x)
}

/// Twenty one-dimensional test functions.
fn corpus() -> Vec<(&'static str, LogConcaveFn)> {
    let ep = |pieces: Vec<(f64, f64)>, dom: Vec<(f64, f64)>| {
        LogConcaveFn::exp_polyhedral(
            pieces.into_iter().map(|(g, b)| (v1(g), b)).collect(),
            dom.into_iter().map(|(n, c)| Halfspace::new(v1(n), c)).collect(),
        )
        .unwrap()
    };
    let gauss = |a: f64, alpha: f64, c: f64| LogConcaveFn::gaussian(m1(a), alpha, v1(c)).unwrap();
    let flat = |lo: f64, hi: f64, h: f64| LogConcaveFn::flat_box(&[lo], &[hi], h).unwrap();
    let min = |fs: Vec<LogConcaveFn>| LogConcaveFn::pointwise_min(fs).unwrap();
    vec![
        ("exp_abs", ep(vec![(1.0, 0.0), (-1.0, 0.0)], vec![])),
        ("exp_tent_asym", ep(vec![(2.0, 0.5), (-0.5, 0.5)], vec![])),
        ("exp_tent_shifted", ep(vec![(1.0, -1.0), (-3.0, 3.0)], vec![])),
        ("exp_three_pieces", ep(vec![(2.0, 1.0), (0.0, 0.0), (-1.0, 1.5)], vec![])),
        ("exp_decay_halfline", ep(vec![(-1.0, 0.0)], vec![(-1.0, 0.0)])),
        ("exp_ramp_interval", ep(vec![(0.7, 0.2)], vec![(-1.0, 1.0), (1.0, 2.0)])),
        ("exp_abs_truncated", ep(vec![(1.0, 0.0), (-1.0, 0.0)], vec![(1.0, 0.5)])),
        ("flat_unit", flat(-1.0, 1.0, 1.0)),
        ("flat_tall", flat(-1.0, 2.0, 3.0)),
        ("flat_low_wide", flat(0.0, 5.0, 0.2)),
        ("gauss_standard", gauss(2f64.sqrt(), 1.0, 0.0)),
        ("gauss_narrow", gauss(0.5, 2.0, 1.0)),
        ("gauss_wide", gauss(3.0, 0.5, -2.0)),
        ("ball_power_2", LogConcaveFn::ball_power(1, 2.0).unwrap()),
        ("height_power_half", LogConcaveFn::height_power(SymEllipsoid::new(m1(2.0), 1.5, v1(0.5)).unwrap(), 0.5).unwrap()),
        ("gauge_interval", LogConcaveFn::gauge_polytope(vec![Halfspace::new(v1(1.0), 2.0), Halfspace::new(v1(-1.0), 1.0)]).unwrap()),
        ("min_gauss_flat", min(vec![gauss(1.0, 1.0, 0.0), flat(-0.5, 2.0, 0.8)])),
        ("min_gauss_exp", min(vec![gauss(2.0, 1.0, 1.0), ep(vec![(1.0, 0.0), (-1.0, 0.0)], vec![])])),
        ("min_exp_flat", min(vec![ep(vec![(1.0, 0.0), (-1.0, 0.0)], vec![]), flat(-0.5, 3.0, 2.0)])),
        ("epi_product_gauss", LogConcaveFn::epi_product(2.0, gauss(1.0, 1.0, 0.5)).unwrap()),
    ]
}

/// ∫_{B^d} (1 - |x|²)^{s/2} dx in polar coordinates with r = sin θ.
fn kappa_by_quadrature(d: usize, s: f64) -> f64 {
    let sphere = [2.0, 2.0 * PI, 4.0 * PI][d - 1];
    let (v, _) = gk_adaptive(|t: f64| t.sin().powi(d as i32 - 1) * t.cos().powf(s + 1.0), 0.0, PI / 2.0, 1e-13, 1e-15);
    sphere * v
}

fn crit1() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        for s in [0.5, 1.0, 2.0, 5.0, 10.0] {
            let q = kappa_by_quadrature(d, s);
            worst = worst.max((kappa_s(d, s) - q).abs() / q);
        }
    }
    outcome(worst <= 1e-8, format!("max relative error {worst:.2e}"))
}

fn crit2(cfg: &RunConfig) -> Outcome {
    let mut worst_param: f64 = 0.0;
    let mut worst_vol: f64 = 0.0;
    let mut certified = true;
    for d in 1..=2 {
        for s in [0.5, 1.0, 4.0] {
            let f = LogConcaveFn::ball_power(d, s).unwrap();
            let r = match solve_john(&f, s, cfg) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("d={d} s={s}: {e}")),
            };
            worst_param = worst_param.max(r.ellipsoid.distance(&SymEllipsoid::unit_ball(d)));
            worst_vol = worst_vol.max((r.s_volume / kappa_s(d, s) - 1.0).abs());
            certified &= verify_optimality(&f, &r.ellipsoid, s, cfg).map(|v| v.is_certified()).unwrap_or(false);
        }
    }
    outcome(
        worst_param <= 1e-4 && worst_vol <= 1e-6 && certified,
        format!("parameter error {worst_param:.2e}, s-volume error {worst_vol:.2e}, certified {certified}"),
    )
}

/// Solutions of the corpus at the s values used by the height and corridor criteria.
type Solved = Vec<Result<JohnResult, String>>;

struct CorpusRuns {
    s_values: Vec<f64>,
    runs: Vec<(&'static str, LogConcaveFn, Solved)>,
}

fn solve_corpus(cfg: &RunConfig) -> CorpusRuns {
    let s_values = vec![0.5, 1.0, 4.0, 25.0];
    let runs = corpus()
        .into_iter()
        .map(|(name, f)| {
            let rs = s_values.iter().map(|&s| solve_john(&f, s, cfg).map_err(|e| e.to_string())).collect();
            (name, f, rs)
        })
        .collect();
    CorpusRuns { s_values, runs }
}

fn crit3(corpus: &CorpusRuns) -> Outcome {
    let k = corpus.s_values.iter().position(|&s| s == 1.0).unwrap();
    let mut worst_vol: f64 = 0.0;
    let mut worst_param: f64 = 0.0;
    let mut failures = Vec::new();
    let brute: Vec<_> = std::thread::scope(|sc| {
        let handles: Vec<_> = corpus.runs.iter().map(|(_, f, _)| sc.spawn(move || brute_force_1d(f, 1.0, 801))).collect();
        handles.into_iter().map(|h| h.join().expect("brute force thread")).collect()
    });
    for ((name, _, rs), b) in corpus.runs.iter().zip(brute) {
        let r = match &rs[k] {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let b = match b {
            Ok(b) => b,
            Err(e) => {
                failures.push(format!("{name}: brute force {e}"));
                continue;
            }
        };
        let vol_err = (r.s_volume / s_volume(&b, 1.0) - 1.0).abs();
        let param_err = r.ellipsoid.distance(&b);
        if vol_err > 1e-2 || param_err > 2e-2 {
            failures.push(format!("{name}: s-volume {vol_err:.2e} parameters {param_err:.2e}"));
        }
        worst_vol = worst_vol.max(vol_err);
        worst_param = worst_param.max(param_err);
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} functions, max s-volume error {worst_vol:.2e}, max parameter error {worst_param:.2e}{}",
            corpus.runs.len(),
            fail_list(&failures)
        ),
    )
}

fn fail_list(f: &[String]) -> String {
    if f.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", f.join(", "))
    }
}

fn crit4(corpus: &CorpusRuns) -> Outcome {
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (name, f, rs) in &corpus.runs {
        let sup = f.sup_norm().unwrap().0;
        for (r, s) in rs.iter().zip(&corpus.s_values) {
            let Ok(r) = r else { continue };
            if r.status != Status::Converged {
                continue;
            }
            checked += 1;
            let ratio = r.ellipsoid.alpha().powf(*s) / ((-1.0f64).exp() * sup);
            worst = worst.min(ratio);
            if ratio < 1.0 - 1e-6 {
                failures.push(format!("{name} s={s}: {ratio:.6}"));
            }
        }
    }
    outcome(
        failures.is_empty() && checked > 0,
        format!("{checked} converged instances, min α^s e/‖f‖ = {worst:.4}{}", fail_list(&failures)),
    )
}

fn crit5(corpus: &CorpusRuns) -> Outcome {
    let d = 1.0;
    let mut failures = Vec::new();
    let mut checked = 0;
    for (name, _, rs) in &corpus.runs {
        for (s1, s2) in [(0.5, 1.0), (1.0, 4.0), (4.0, 25.0)] {
            let i = corpus.s_values.iter().position(|&s| s == s1).unwrap();
            let j = corpus.s_values.iter().position(|&s| s == s2).unwrap();
            let (Ok(a), Ok(b)) = (&rs[i], &rs[j]) else {
                failures.push(format!("{name} ({s1},{s2}): unsolved"));
                continue;
            };
            checked += 1;
            let upper = kappa_s(1, s1) / kappa_s(1, s2);
            let lower = ((s2 / (d + s2)).powf(s2) * (d / (d + s2)).powf(d)).sqrt() * upper;
            let ratio = a.s_volume / b.s_volume;
            if ratio > upper * (1.0 + 1e-3) || ratio < lower * (1.0 - 1e-3) {
                failures.push(format!("{name} ({s1},{s2}): {ratio:.6} not in [{lower:.6}, {upper:.6}]"));
            }
        }
    }
    outcome(failures.is_empty(), format!("{checked} pairs{}", fail_list(&failures)))
}

fn crit6() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        for s in [1.0, 2.0, 7.0] {
            let c = symmetric_certificate(d, s);
            let (m, v) = c.moments();
            let err = (m - target_matrix(d, s)).amax().max(v.amax()).max((c.weight_sum() - (d as f64 + s)).abs());
            worst = worst.max(err);
        }
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn crit7(cfg: &RunConfig) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for d in 1..=2 {
        let f = LogConcaveFn::flat_box(&vec![-1.0; d], &vec![1.0; d], 1.0).unwrap();
        let sw = match sweep(&f, &[0.02, 0.1, 0.5], 1, cfg) {
            Ok(sw) => sw,
            Err(e) => return outcome(false, format!("d={d}: {e}")),
        };
        let Some(flat) = &sw.flat else {
            return outcome(false, format!("d={d}: no flat limit"));
        };
        let Ok(first) = &sw.points[0].result else {
            return outcome(false, format!("d={d}: s=0.02 unsolved"));
        };
        let vol_err = (first.s_volume / flat.objective - 1.0).abs();
        let dists: Vec<f64> = sw.points.iter().map(|p| p.dist_to_flat.unwrap_or(f64::NAN)).collect();
        let monotone = dists.windows(2).all(|w| w[0] < w[1]);
        pass &= vol_err <= 0.05 && monotone;
        notes.push(format!("d={d} s-volume vs flat {vol_err:.3}, distances {:.3}/{:.3}/{:.3}", dists[0], dists[1], dists[2]));
    }
    let f = LogConcaveFn::exp_polyhedral(vec![(v1(1.0), 0.0), (v1(-1.0), 0.0)], vec![]).unwrap();
    match john_zero(&f, cfg) {
        Ok(z) => {
            let e = (-1.0f64).exp();
            let ok = (z.beta0 - e).abs() <= 1e-4 && (z.objective - 2.0 * e).abs() <= 1e-4;
            pass &= ok;
            notes.push(format!("exp_abs β₀ {:.6} objective {:.6}", z.beta0, z.objective));
        }
        Err(e) => {
            pass = false;
            notes.push(format!("exp_abs: {e}"));
        }
    }
    outcome(pass, notes.join("; "))
}

fn crit8(cfg: &RunConfig) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for d in 1..=2 {
        let f = LogConcaveFn::gaussian(Matrix::identity(d, d) * 2f64.sqrt(), 1.0, Vector::zeros(d)).unwrap();
        let sw = match sweep(&f, &[1e2, 1e3, 1e4], 1, cfg) {
            Ok(sw) => sw,
            Err(e) => return outcome(false, format!("d={d}: {e}")),
        };
        let last = &sw.points[2];
        let Ok(r) = &last.result else {
            return outcome(false, format!("d={d}: s=1e4 unsolved"));
        };
        let dist = last.dist_to_gaussian.unwrap_or(f64::INFINITY);
        let height = r.ellipsoid.alpha().powf(1e4);
        pass &= dist <= 0.05 && (height - 1.0).abs() <= 0.1;
        notes.push(format!("d={d} distance {dist:.2e} α^s {height:.5}"));
    }
    let k = LogConcaveFn::gauge_ellipsoid(Matrix::identity(2, 2) * 2.0).unwrap();
    match max_gaussian(&k, cfg) {
        Ok(MaxGaussian::Found(g)) => {
            let err = (&g.a_mat - Matrix::identity(2, 2) * 2.0).amax().max((g.alpha - 1.0).abs()).max(g.center.amax());
            pass &= err <= 1e-3;
            notes.push(format!("K=2B² parameter error {err:.2e}"));
        }
        Ok(MaxGaussian::NoneBelow) => {
            pass = false;
            notes.push("K=2B²: no Gaussian found".into());
        }
        Err(e) => {
            pass = false;
            notes.push(format!("K=2B²: {e}"));
        }
    }
    outcome(pass, notes.join("; "))
}

fn crit9(cfg: &RunConfig) -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut families: Vec<(String, Vec<LogConcaveFn>)> = (0..30u64)
        .map(|k| {
            let d = 1 + (k % 2) as usize;
            let n = 5 + (k as usize * 7) % 16;
            (format!("random#{k} d={d} n={n}"), random_family(d, n, 1000 + k).unwrap())
        })
        .collect();
    families.push(("lower-bound d=1".into(), lower_bound_family(1, 100.0).unwrap()));
    families.push(("lower-bound d=2".into(), lower_bound_family(2, 100.0).unwrap()));
    for (name, fam) in &families {
        match helly_select(fam, &HellyConfig::default(), cfg) {
            Ok(sel) => {
                let c = sel.checks();
                if !(c.sigma_size && c.ratio && c.p_volume && c.dr_det) {
                    failures.push(format!("{name}: {c:?}"));
                }
                worst = worst.max(sel.ratio.ln() / ratio_bound(sel.dim()).ln());
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    outcome(failures.is_empty(), format!("{} families, worst log ratio / log bound {worst:.3}{}", families.len(), fail_list(&failures)))
}

fn crit10(cfg: &RunConfig) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for d in 1..=2 {
        let fam = lower_bound_family(d, 100.0).unwrap();
        let n = fam.len();
        let all: Vec<usize> = (0..n).collect();
        let full = subset_integral(&fam, &all, cfg).unwrap_or(f64::NAN);
        let exact = 2f64.powi(d as i32);
        let mut smallest = f64::INFINITY;
        for skip in 0..n {
            let set: Vec<usize> = all.iter().cloned().filter(|&i| i != skip).collect();
            smallest = smallest.min(subset_integral(&fam, &set, cfg).unwrap_or(f64::NAN));
        }
        pass &= (full - exact).abs() <= 1e-9 && smallest > 100.0;
        notes.push(format!("d={d} ∫ all {full:.12} smallest 2d-subset {smallest:.4e}"));
    }
    outcome(pass, notes.join("; "))
}

fn crit11(cfg: &RunConfig) -> Outcome {
    let f = LogConcaveFn::pointwise_min(random_family(2, 8, 4242).unwrap()).unwrap();
    let run = || -> Result<String, String> {
        let r = solve_john(&f, 2.0, cfg).map_err(|e| e.to_string())?;
        let sw = sweep(&f, &[0.5, 1.0, 3.0, 9.0], 2, cfg).map_err(|e| e.to_string())?;
        let fam = random_family(2, 12, 99).map_err(|e| e.to_string())?;
        let sel = helly_select(&fam, &HellyConfig::default(), cfg).map_err(|e| e.to_string())?;
        Ok(format!("{}\n{}\n{}\n{}", r.to_json(), sw.to_csv(), sw.to_json(), sel.to_json()))
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => outcome(a == b, format!("{} bytes compared", a.len())),
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn main() {
    let cfg = RunConfig::default();
    let total = Instant::now();
    let mut all_pass = true;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        all_pass &= o.pass;
        println!("criterion {n:>2} {name:<28} {} ({:.1}s) {}", if o.pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64(), o.detail);
    };
    report(1, "kappa_s quadrature", &mut crit1);
    report(2, "ball power fixed point", &mut || crit2(&cfg));
    let t = Instant::now();
    let runs = solve_corpus(&cfg);
    println!("   corpus solved at s = {:?} ({:.1}s)", runs.s_values, t.elapsed().as_secs_f64());
    report(3, "brute force agreement", &mut || crit3(&runs));
    report(4, "height bound", &mut || crit4(&runs));
    report(5, "comparison corridor", &mut || crit5(&runs));
    report(6, "certificate identity", &mut crit6);
    report(7, "s to 0 limit", &mut || crit7(&cfg));
    report(8, "s to infinity limit", &mut || crit8(&cfg));
    report(9, "Helly pipeline", &mut || crit9(&cfg));
    report(10, "lower-bound family", &mut || crit10(&cfg));
    report(11, "determinism", &mut || crit11(&cfg));
    println!("acceptance {} in {:.1}s", if all_pass { "PASS" } else { "FAIL" }, total.elapsed().as_secs_f64());
    if !all_pass {
        std::process::exit(1);
    }
}
