//! Scenario files shipped with the crate.

use std::path::PathBuf;

pub const NAMES: [&str; 4] = ["sim1", "sim2", "neg_eta", "neg_cluster"];

pub fn get(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".toml").unwrap_or(name);
    Some(match name {
        "sim1" => include_str!("../scenarios/sim1.toml"),
        "sim2" => include_str!("../scenarios/sim2.toml"),
        "neg_eta" => include_str!("../scenarios/neg_eta.toml"),
        "neg_cluster" => include_str!("../scenarios/neg_cluster.toml"),
        _ => return None,
    })
}

/// Directory the bundled files live in, for resolving relative paths.
pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}
