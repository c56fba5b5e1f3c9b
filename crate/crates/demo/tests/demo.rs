use rieszlab_demo::{energy_ladder, free_energy, sample_points};
use serde_json::Value;

#[test]
fn sample_points_shape() {
    let v: Value = serde_json::from_str(&sample_points(r#"{"type":"lattice","d":2}"#, 5.0, 3).unwrap()).unwrap();
    assert_eq!(v["d"], 2);
    assert_eq!(v["coords"].as_array().unwrap().len(), 2 * 25);
    assert!(sample_points(r#"{"type":"nope"}"#, 5.0, 3).unwrap_err().starts_with("model:"));
}

#[test]
fn energy_ladder_reports_extrapolation() {
    let out =
        energy_ladder(r#"{"type":"vibrating_lattice","k":4}"#, r#"{"family":"riesz","d":1,"s":0.5}"#, &[8.0, 16.0, 32.0, 64.0], 60, 1)
            .unwrap();
    let v: Value = serde_json::from_str(&out).unwrap();
    let w = v["extrapolated"].as_f64().unwrap();
    assert!((w + 2.876).abs() < 0.05, "{w}");
    assert!(energy_ladder(r#"{"type":"poisson","d":1}"#, r#"{"family":"log1d"}"#, &[8.0, 16.0], 10, 1).is_err());
}

#[test]
fn free_energy_moves_towards_the_lattice() {
    let cold: Value = serde_json::from_str(&free_energy(10.0, r#"{"family":"log1d"}"#).unwrap()).unwrap();
    let hot: Value = serde_json::from_str(&free_energy(0.01, r#"{"family":"log1d"}"#).unwrap()).unwrap();
    assert!(cold["argmin_theta"].as_f64().unwrap() > hot["argmin_theta"].as_f64().unwrap());
}
