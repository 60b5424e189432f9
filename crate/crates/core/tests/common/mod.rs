//! Shared acceptance checks. Each returns a [`Check`]; the per-area test
//! files assert on them and the `acceptance` target prints them all.

#![allow(dead_code, unused_imports)]

pub mod corpus;
pub mod oracles;

use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }

    pub fn assert(&self) {
        assert!(self.pass, "{}", self.line());
    }
}

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixtures() -> PathBuf {
    manifest_dir().join("tests").join("fixtures")
}

pub fn golden() -> PathBuf {
    manifest_dir().join("tests").join("golden")
}

pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

pub use oracles::{
    dsp_oracle_check, frame_count_check, kmeans_quality_check, metric_oracle_check, prompt_fidelity_check,
    render_golden_check,
};
pub use corpus::{fixture_replay_check, offline_e2e_check, partition_audit_check};
