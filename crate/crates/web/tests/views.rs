use serde_json::Value;
use spikelab_web::{ground_state, mp_curve, truncation};

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn ground_state_export() {
    let v = parse(&ground_state(3.0, 1.0));
    assert!((v["m"].as_f64().unwrap() - 5.85045).abs() < 1e-4);
    let u = v["u"].as_array().unwrap();
    assert_eq!(u.len(), v["r"].as_array().unwrap().len());
    assert!(u.windows(2).all(|w| w[1].as_f64() <= w[0].as_f64()));
    assert!(parse(&ground_state(3.0, -1.0))["error"].is_string());
    assert!(parse(&ground_state(0.5, 1.0))["error"].is_string());
}

#[test]
fn truncation_export() {
    let v = parse(&truncation(3.0, 0.9, 0.8517));
    let (a, r) = (v["a"].as_f64().unwrap(), v["crossover"].as_f64().unwrap());
    assert!((r - a.sqrt()).abs() < 1e-12);
    let s = v["s"].as_array().unwrap();
    let ft = v["f_tilde"].as_array().unwrap();
    for (x, y) in s.iter().zip(ft) {
        let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
        assert!(y <= (a * x).min(x * x * x) + 1e-12);
    }
    let chi = v["chi"].as_array().unwrap();
    assert_eq!(chi[0].as_f64(), Some(1.0));
    assert_eq!(chi.last().unwrap().as_f64(), Some(0.0));
    assert!(parse(&truncation(3.0, 1.0, 0.85))["error"].is_string());
}

#[test]
fn curve_export() {
    let v = parse(&mp_curve(3.0, 1.0));
    let m = v["m"].as_f64().unwrap();
    let e: Vec<f64> = v["energy"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(e[0], 0.0);
    assert!(e.iter().all(|x| *x <= m * (1.0 + 1e-6)));
    assert!(*e.last().unwrap() < -m / 2.0);
}
