//! Scenario runner for constrained fractional dynamics: configs, runs,
//! artifacts, verification suites and convergence tables.

pub mod config;
pub mod convergence;
pub mod output;
pub mod scenario;
pub mod verify;

pub use config::{ConfigError, ScenarioConfig, ScenarioId};
pub use scenario::{run, Comparison, RunError, RunOutput};

/// Bundled example configs, by file stem.
pub const PRESETS: &[(&str, &str)] = &[
    ("oscillator-1d", include_str!("../configs/oscillator-1d.toml")),
    ("oscillator-1d-direct", include_str!("../configs/oscillator-1d-direct.toml")),
    ("linear-2d", include_str!("../configs/linear-2d.toml")),
    ("linear-3d", include_str!("../configs/linear-3d.toml")),
    ("case1-2d", include_str!("../configs/case1-2d.toml")),
    ("case1-2d-b2zero", include_str!("../configs/case1-2d-b2zero.toml")),
    ("case2-2d", include_str!("../configs/case2-2d.toml")),
    ("nonlinear-fracosc", include_str!("../configs/nonlinear-fracosc.toml")),
    ("hamilton-linear", include_str!("../configs/hamilton-linear.toml")),
    ("custom", include_str!("../configs/custom.toml")),
    ("harmonic", include_str!("../configs/harmonic.toml")),
];

/// Parsed preset; panics on an unknown name since the table is static.
pub fn preset(name: &str) -> ScenarioConfig {
    let text = PRESETS.iter().find(|(n, _)| *n == name).unwrap_or_else(|| panic!("no preset {name}")).1;
    ScenarioConfig::parse(text).expect("bundled configs are valid")
}

/// Thread pool capped by `FRACDYN_THREADS` when set.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("FRACDYN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        b = b.num_threads(n.max(1));
    }
    b.build().expect("thread pool")
}

#[cfg(test)]
mod tests {
    #[test]
    fn presets_parse() {
        for (name, _) in super::PRESETS {
            super::preset(name);
        }
    }
}
