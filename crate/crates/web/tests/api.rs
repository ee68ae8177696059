use fsmwt_web::{capacity_curve_json, power_allocation_json, region_json};

fn parse(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn curve_is_non_increasing_and_ends_at_limit() {
    let v = parse(&capacity_curve_json(0.5, 1.0, 1.0, 100.0, 2000.0, 100.0, 20, false).unwrap());
    let values: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 21);
    assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let limit = v["limit"].as_f64().unwrap();
    assert!((values[20] - limit).abs() < 1e-4);
}

#[test]
fn allocation_meets_the_budget() {
    let v = parse(&power_allocation_json(0.9, 1.0, 1.0, 100.0, 2000.0, 100.0, 1, false).unwrap());
    let p: Vec<f64> = v["power"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let pi: Vec<f64> = v["pi"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let avg: f64 = p.iter().zip(&pi).map(|(a, b)| a * b).sum();
    assert!((avg - 100.0).abs() < 1e-6, "{avg}");
}

#[test]
fn region_corner_matches_reported_capacity() {
    let v = parse(&region_json(0.05, 0.1, 0.15, 0.5, 4.0, 1, false, 32).unwrap());
    let re = v["re"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).fold(0.0, f64::max);
    assert!((re - v["secrecy_capacity"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn bad_inputs_are_reported() {
    assert!(capacity_curve_json(1.5, 1.0, 1.0, 100.0, 2000.0, 100.0, 3, false).is_err());
    assert!(region_json(1.2, 0.1, 0.1, 0.5, 1.0, 1, false, 16).is_err());
    assert!(power_allocation_json(0.5, 1.0, -1.0, 100.0, 2000.0, 100.0, 1, false).is_err());
}
