//! Reporting helpers for the acceptance suite. Each criterion gathers named
//! checks and renders as a single PASS/FAIL line.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Instant;

use jcsim_cli::config::{self, ScenarioConfig};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

#[derive(Debug)]
pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    started: Instant,
}

impl Criterion {
    pub fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new(), notes: Vec::new(), started: Instant::now() }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), detail: detail.into(), pass });
    }

    /// |value − target| ≤ tol.
    pub fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        let pass = (value - target).abs() <= tol;
        self.check(name, pass, format!("{} vs {} (tol {})", fmt(value), fmt(target), fmt(tol)));
    }

    /// |value/target − 1| ≤ rel.
    pub fn within_rel(&mut self, name: &str, value: f64, target: f64, rel: f64) {
        let err = (value / target - 1.0).abs();
        self.check(
            name,
            err <= rel,
            format!("{} vs {} ({}% <= {}%)", fmt(value), fmt(target), fmt(100.0 * err), fmt(100.0 * rel)),
        );
    }

    pub fn below(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value < bound, format!("{} < {}", fmt(value), fmt(bound)));
    }

    pub fn above(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value > bound, format!("{} > {}", fmt(value), fmt(bound)));
    }

    pub fn runtime_below(&mut self, seconds: f64) {
        let t = self.started.elapsed().as_secs_f64();
        self.check("runtime", t < seconds, format!("{t:.1} s < {seconds} s"));
    }

    /// Records an error that stopped a check from being evaluated.
    pub fn error(&mut self, name: &str, e: impl Display) {
        self.check(name, false, format!("error: {e}"));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{}{}: {}", if c.pass { "" } else { "[failed] " }, c.name, c.detail))
            .collect();
        format!(
            "{verdict} {:>2}. {} ({:.1} s) :: {}",
            self.id,
            self.title,
            self.started.elapsed().as_secs_f64(),
            parts.join("; ")
        )
    }
}

fn fmt(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

pub fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

pub fn preset(name: &str) -> (ScenarioConfig, PathBuf) {
    let path = presets_dir().join(name);
    let cfg = config::load(&path).unwrap_or_else(|e| panic!("shipped preset {name} must load: {e}"));
    (cfg, path)
}

/// Every shipped preset, sorted by file name.
pub fn all_presets() -> Vec<(String, ScenarioConfig)> {
    let mut v: Vec<(String, ScenarioConfig)> = std::fs::read_dir(presets_dir())
        .expect("presets directory")
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "json").then(|| {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                let cfg = config::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
                (name, cfg)
            })
        })
        .collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_needs_every_check() {
        let mut c = Criterion::new(1, "demo");
        assert!(!c.passed());
        c.within("a", 1.0, 1.05, 0.1);
        c.below("b", 2.0, 1.0);
        assert!(!c.passed());
        assert!(c.line().starts_with("FAIL  1. demo"));
        assert!(c.line().contains("[failed] b: 2.0000 < 1.0000"));
    }

    #[test]
    fn presets_load() {
        assert!(all_presets().len() >= 12);
    }
}
