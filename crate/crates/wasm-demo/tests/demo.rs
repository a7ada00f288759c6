use sparse_kacrice_wasm::demo;

const TWO_TERM: &str = r#"{"dim": 1, "support": [[0], [1]]}"#;
const SQUARE: &str = r#"{"dim": 2, "support": [[0, 0], [1, 0], [0, 1], [1, 1]]}"#;

#[test]
fn density_curve_matches_closed_form() {
    let v = demo::density_curve(TWO_TERM, -2.0, 2.0, 5).unwrap();
    // (1/π)·(1/2)·sech(x) for A = {0,1}.
    for (i, d) in v.iter().enumerate() {
        let x = -2.0 + i as f64;
        let expect = 0.5 / (std::f64::consts::PI * x.cosh());
        assert!((d - expect).abs() < 1e-14);
    }
    assert!(demo::density_curve(SQUARE, -1.0, 1.0, 5).is_err());
    assert!(demo::density_curve("{", -1.0, 1.0, 5).is_err());
}

#[test]
fn psi_curve_tail() {
    let v = demo::psi_curve(TWO_TERM, 3.0, 1.0, 10.0, 40.0, 4).unwrap();
    assert!(v.iter().all(|p| *p < 1.0));
}

#[test]
fn expected_zeros_json() {
    let s = demo::expected_zeros(TWO_TERM, 1e-9).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-7);
    assert!(
        (v["lower_bound"].as_f64().unwrap() - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12
    );
}

#[test]
fn psi_field_has_u_minus_around_a0() {
    let res = 11;
    let v = demo::psi_field(SQUARE, 0.5, 0.5, 1.0, res).unwrap();
    assert_eq!(v.len(), res * res + 4);
    assert_eq!(&v[res * res..], &[0.0, 1.0, 0.0, 1.0]);
    let center = v[5 * res + 5];
    assert!(center < 1.0);
    // Corners of the square are on the boundary of P.
    assert!(v[0].is_nan());
}
