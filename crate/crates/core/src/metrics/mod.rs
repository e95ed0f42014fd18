//! Objective measures: STOI intelligibility and the index of
//! non-stationarity.

mod ins;
mod stoi;

pub use ins::{
    ins_compute, ins_max, surrogate, InsConfig, InsProfile, Verdict, CONFIDENCE, DEFAULT_SCALES, DEFAULT_SURROGATES,
    ENERGY_WEIGHT, MIN_SURROGATES, N_TAPERS,
};
pub use stoi::{normalize_score, ssn_reference_score, stoi, stoi_normalized, StoiScore, STOI_RATE};

use serde::{Deserialize, Serialize};

/// Serialized form of a single metric evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: String,
    pub value: f64,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
}

impl MetricResult {
    pub fn from_stoi(score: &StoiScore) -> Self {
        Self {
            metric: "stoi".into(),
            value: score.value,
            params: serde_json::json!({ "normalized_value": score.normalized_value }),
            seed: None,
        }
    }

    pub fn from_ins(profile: &InsProfile) -> Self {
        Self {
            metric: "ins_max".into(),
            value: profile.ins_max,
            params: serde_json::json!({
                "scales": profile.scales,
                "ins": profile.ins,
                "gamma": profile.gamma,
                "n_surrogates": profile.n_surrogates,
                "n_tapers": profile.n_tapers,
                "energy_weight": profile.energy_weight,
            }),
            seed: Some(profile.seed),
        }
    }
}
