//! Small reference models with closed-form answers.

use crate::model::SemiMarkovModel;

/// One state: `Q_11(1) = 0.5 - eps`, `Q_10(1) = 0.5 + eps`.
pub const M1_JSON: &str = r#"{
    "label": "M1",
    "n_states": 1,
    "k_max": 1,
    "eps_max": 0.4,
    "entries": [
        {"i": 1, "j": 1, "k": 1, "coeffs": [0.5, -1.0]},
        {"i": 1, "j": 0, "k": 1, "coeffs": [0.5, 1.0]}
    ]
}"#;

/// Two-state cycle leaking to 0 from state 2: `Q_12(1) = 1`,
/// `Q_21(1) = 1 - eps`, `Q_20(1) = eps`.
pub const M2_JSON: &str = r#"{
    "label": "M2",
    "n_states": 2,
    "k_max": 1,
    "eps_max": 0.5,
    "entries": [
        {"i": 1, "j": 2, "k": 1, "coeffs": [1.0]},
        {"i": 2, "j": 1, "k": 1, "coeffs": [1.0, -1.0]},
        {"i": 2, "j": 0, "k": 1, "coeffs": [0.0, 1.0]}
    ]
}"#;

/// Three states with holding times up to 3 and a quadratic perturbation.
pub const THREE_STATE_JSON: &str = r#"{
    "label": "three-state",
    "n_states": 3,
    "k_max": 3,
    "eps_max": 0.1,
    "entries": [
        {"i": 1, "j": 1, "k": 2, "coeffs": [0.1]},
        {"i": 1, "j": 2, "k": 1, "coeffs": [0.2, -1.0]},
        {"i": 1, "j": 3, "k": 3, "coeffs": [0.2, 0.5, -1.0]},
        {"i": 1, "j": 0, "k": 2, "coeffs": [0.5, 0.5, 1.0]},
        {"i": 2, "j": 1, "k": 1, "coeffs": [0.3]},
        {"i": 2, "j": 3, "k": 2, "coeffs": [0.3, -2.0]},
        {"i": 2, "j": 0, "k": 3, "coeffs": [0.4, 2.0]},
        {"i": 3, "j": 1, "k": 3, "coeffs": [0.4, -1.0]},
        {"i": 3, "j": 2, "k": 1, "coeffs": [0.2, 0.0, 2.0]},
        {"i": 3, "j": 3, "k": 1, "coeffs": [0.1]},
        {"i": 3, "j": 0, "k": 1, "coeffs": [0.3, 1.0, -2.0]}
    ]
}"#;

pub fn m1() -> SemiMarkovModel {
    SemiMarkovModel::from_json_str(M1_JSON).expect("M1 is valid")
}

pub fn m2() -> SemiMarkovModel {
    SemiMarkovModel::from_json_str(M2_JSON).expect("M2 is valid")
}

pub fn three_state() -> SemiMarkovModel {
    SemiMarkovModel::from_json_str(THREE_STATE_JSON).expect("three-state model is valid")
}
