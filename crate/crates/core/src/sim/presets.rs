//! Experiment specs shipped with the crate.

use super::ExperimentSpec;
use crate::error::Result;

/// `(name, TOML source)` for every shipped preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("convergence", include_str!("../../presets/convergence.toml")),
    ("snr_sweep", include_str!("../../presets/snr_sweep.toml")),
    ("snr_sweep_desk", include_str!("../../presets/snr_sweep_desk.toml")),
    ("position_sweep", include_str!("../../presets/position_sweep.toml")),
    ("position_sweep_desk", include_str!("../../presets/position_sweep_desk.toml")),
    ("ordering_desk", include_str!("../../presets/ordering_desk.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Parsed preset, or `None` if no preset has that name.
pub fn load(name: &str) -> Option<Result<ExperimentSpec>> {
    source(name).map(ExperimentSpec::from_toml)
}
