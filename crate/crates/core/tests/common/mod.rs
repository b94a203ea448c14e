#![allow(dead_code)]

use std::path::PathBuf;

use weaklmp::{Model, ModelConfig};

pub const CONFIGS: [&str; 10] = [
    "identity",
    "mixing_gamma",
    "mixing_stable",
    "mixing_sibuya",
    "mixing_log_series",
    "mo15",
    "fig1_left",
    "fig1_right",
    "weibull",
    "pareto",
];

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/{name}.json"))
}

pub fn model(name: &str) -> Model {
    ModelConfig::from_path(&config_path(name))
        .and_then(|c| c.to_model())
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}
