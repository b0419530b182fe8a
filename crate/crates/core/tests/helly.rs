use john_s::helly::{
    dr_det_bound, family_from_json, family_to_json, helly_select, lower_bound_family, p_volume_bound, random_family, ratio_bound,
    subset_integral, HellyConfig,
};
use john_s::{LogConcaveFn, RunConfig, Vector};

#[test]
fn family_json_roundtrip() {
    let fam = random_family(2, 7, 3).unwrap();
    let text = serde_json::to_string(&family_to_json(&fam)).unwrap();
    let back = family_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.len(), fam.len());
    let x = Vector::from_vec(vec![0.3, -0.7]);
    for (f, g) in fam.iter().zip(&back) {
        assert_eq!(f.psi(&x), g.psi(&x));
    }
    assert!(family_from_json(&serde_json::json!({"fns": []})).is_err());
}

#[test]
fn random_families_are_deterministic() {
    let a = family_to_json(&random_family(2, 9, 77).unwrap());
    let b = family_to_json(&random_family(2, 9, 77).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, family_to_json(&random_family(2, 9, 78).unwrap()));
}

#[test]
fn lower_bound_family_in_two_dimensions() {
    let cfg = RunConfig::default();
    let fam = lower_bound_family(2, 100.0).unwrap();
    assert_eq!(fam.len(), 5);
    let all: Vec<usize> = (0..5).collect();
    assert!((subset_integral(&fam, &all, &cfg).unwrap() - 4.0).abs() <= 1e-9);
    for skip in 0..5 {
        let set: Vec<usize> = all.iter().cloned().filter(|&i| i != skip).collect();
        assert!(subset_integral(&fam, &set, &cfg).unwrap() > 100.0);
    }
    let sel = helly_select(&fam, &HellyConfig::default(), &cfg).unwrap();
    assert_eq!(sel.sigma, all);
    assert!(sel.checks().all());
}

#[test]
fn selection_report_fields() {
    let cfg = RunConfig::default();
    let fam = random_family(2, 10, 5).unwrap();
    let sel = helly_select(&fam, &HellyConfig::default(), &cfg).unwrap();
    let v = sel.to_json();
    assert_eq!(v["ratio_bound"].as_f64().unwrap(), ratio_bound(2));
    assert_eq!(v["P_volume_bound"].as_f64().unwrap(), p_volume_bound(2));
    assert_eq!(v["dr_det_bound"].as_f64().unwrap(), dr_det_bound(2));
    assert!(v["eta"].as_array().unwrap().len() <= 5);
    assert!(v["sigma"].as_array().unwrap().len() <= 8);
    // ‖·‖_P is dominated by the largest pairing with the selected contacts
    for k in 0..200 {
        let t = k as f64 * 0.0314159;
        let x = Vector::from_vec(vec![t.cos(), (1.7 * t).sin()]);
        let by_contacts = sel.polar.eta.iter().map(|&j| sel.contacts[j].u.dot(&x)).fold(f64::NEG_INFINITY, f64::max);
        assert!(sel.polar.gauge(&x) <= by_contacts + 1e-9);
    }
}

#[test]
fn duplicated_functions_need_one_index() {
    let cfg = RunConfig::default();
    let g = LogConcaveFn::gaussian(john_s::Matrix::identity(2, 2), 1.0, Vector::zeros(2)).unwrap();
    let sel = helly_select(&[g.clone(), g.clone(), g], &HellyConfig::default(), &cfg).unwrap();
    assert!((sel.ratio - 1.0).abs() < 1e-9);
    assert!(!sel.sigma.is_empty() && sel.sigma.len() <= 3);
}
