use serde_json::Value;
use teachsim_web::{board_json, fit_json, simulate_json};

#[test]
fn board_probabilities_are_normalized() {
    let theta = serde_json::to_string(&vec![0.0; 19]).unwrap();
    let v: Value = serde_json::from_str(&board_json(3, 0, &theta, false).unwrap()).unwrap();
    let probs: Vec<f64> = v["cluster_probabilities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_f64().unwrap())
        .collect();
    assert_eq!(probs, vec![0.25; 4]);
    assert_eq!(v["board"]["objects"].as_array().unwrap().len(), 20);
    assert_eq!(v["pick_probabilities"].as_array().unwrap().len(), 20);
    assert!(v["optimal_score"].as_i64().unwrap() > 0);
}

#[test]
fn board_rejects_bad_theta() {
    assert!(board_json(3, 0, "[1, 2]", false).is_err());
    assert!(board_json(3, 0, "nope", false).is_err());
}

#[test]
fn simulate_reports_every_condition() {
    let v: Value = serde_json::from_str(&simulate_json(1, 3).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["condition"], "Solo-Full");
    assert_eq!(rows[0]["curve"].as_array().unwrap().len(), 10);
    assert_eq!(simulate_json(1, 3).unwrap(), simulate_json(1, 3).unwrap());
    assert!(simulate_json(1, 0).is_err());
}

#[test]
fn fit_returns_named_weights() {
    let v: Value = serde_json::from_str(&fit_json("Chat-Full", 4, 3, 1.0).unwrap()).unwrap();
    assert_eq!(v["theta"].as_array().unwrap().len(), 19);
    assert_eq!(v["features"][16], "pink_circle");
    assert_eq!(v["scores"].as_array().unwrap().len(), 10);
    assert!(fit_json("Chat-Full", 4, 0, 1.0).is_err());
    assert!(fit_json("Nope", 4, 3, 1.0).is_err());
    assert!(fit_json("Chat-Full", 4, 3, -1.0).is_err());
}
