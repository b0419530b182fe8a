use john_s::limits::{john_zero, max_gaussian, sweep, MaxGaussian};
use john_s::scalar::kappa_s;
use john_s::{LogConcaveFn, Matrix, RunConfig, Vector};

fn exp_abs() -> LogConcaveFn {
    let v = |x: f64| Vector::from_vec(vec![x]);
    LogConcaveFn::exp_polyhedral(vec![(v(1.0), 0.0), (v(-1.0), 0.0)], vec![]).unwrap()
}

#[test]
fn sweep_csv_layout() {
    let cfg = RunConfig::default();
    let sw = sweep(&exp_abs(), &[0.5, 1.0, 4.0], 1, &cfg).unwrap();
    let csv = sw.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,s_volume,alpha,detA,center0,dist_to_flat,dist_to_gaussian");
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        let cells: Vec<&str> = l.split(',').collect();
        assert_eq!(cells.len(), 7);
        for c in &cells[..5] {
            let x: f64 = c.parse().unwrap();
            assert!(x.is_finite());
        }
    }
    assert!(sw.flat.is_some() && sw.gaussian.is_some());
    for l in &lines[1..] {
        assert!(l.split(',').skip(5).all(|c| c.parse::<f64>().unwrap() >= 0.0));
    }
    let pts: Vec<(f64, f64)> = sw.points.iter().map(|p| (p.s, p.result.as_ref().unwrap().s_volume)).collect();
    for w in pts.windows(2) {
        assert!(w[0].1 / w[1].1 <= kappa_s(1, w[0].0) / kappa_s(1, w[1].0) * (1.0 + 1e-6));
    }
}

#[test]
fn sweep_rejects_bad_lists() {
    let cfg = RunConfig::default();
    assert!(sweep(&exp_abs(), &[], 1, &cfg).is_err());
    assert!(sweep(&exp_abs(), &[2.0, 1.0], 1, &cfg).is_err());
    assert!(sweep(&exp_abs(), &[0.0, 1.0], 1, &cfg).is_err());
}

#[test]
fn sweep_is_repeatable_and_chunking_agrees() {
    let cfg = RunConfig::default();
    let f = LogConcaveFn::gaussian(Matrix::identity(2, 2) * 2f64.sqrt(), 1.0, Vector::zeros(2)).unwrap();
    let list = [1.0, 3.0, 10.0, 30.0];
    let a = sweep(&f, &list, 1, &cfg).unwrap().to_csv();
    let b = sweep(&f, &list, 1, &cfg).unwrap().to_csv();
    assert_eq!(a, b);
    let c = sweep(&f, &list, 2, &cfg).unwrap();
    let d = sweep(&f, &list, 2, &cfg).unwrap();
    assert_eq!(c.to_csv(), d.to_csv());
    let single = sweep(&f, &list, 1, &cfg).unwrap();
    for (p, q) in single.points.iter().zip(&c.points) {
        let (p, q) = (p.result.as_ref().unwrap(), q.result.as_ref().unwrap());
        assert!((p.s_volume - q.s_volume).abs() <= 1e-6 * p.s_volume);
    }
}

#[test]
fn gaussian_limits_of_a_gaussian() {
    let cfg = RunConfig::default();
    let a = Matrix::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 0.8]);
    let f = LogConcaveFn::gaussian(a.clone(), 2.0, Vector::from_vec(vec![0.5, -1.0])).unwrap();
    let MaxGaussian::Found(g) = max_gaussian(&f, &cfg).unwrap() else {
        panic!("a Gaussian has a Gaussian below it");
    };
    assert!((g.a_mat - a).norm() < 1e-3);
    assert!((g.alpha - 2.0).abs() < 1e-3);
    assert!((g.center - Vector::from_vec(vec![0.5, -1.0])).norm() < 1e-3);
    let flat = john_zero(&f, &cfg).unwrap();
    // the best flat function below α e^{-q} sits at height α e^{-d/2}
    assert!((flat.beta0 - 2.0 * (-1.0f64).exp()).abs() < 1e-4);
}
