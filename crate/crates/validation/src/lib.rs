//! Helpers shared by the acceptance target: scenario lookup and the
//! one-line-per-criterion report.

use std::path::PathBuf;

use nmqfi_cli::Scenario;

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn scenario(name: &str) -> Scenario {
    let path = scenarios_dir().join(name);
    nmqfi_cli::load(&path).unwrap_or_else(|e| panic!("loading {}: {e}", path.display()))
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn check(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }

    /// Combine sub-checks; passes only when all do.
    pub fn all(parts: Vec<Outcome>) -> Self {
        Self {
            passed: parts.iter().all(|p| p.passed),
            detail: parts.iter().map(|p| p.detail.as_str()).collect::<Vec<_>>().join("; "),
        }
    }
}

#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<(usize, String, Outcome)>,
}

impl Report {
    pub fn record(&mut self, id: usize, title: &str, run: impl FnOnce() -> Outcome) {
        let start = std::time::Instant::now();
        let outcome = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)) {
            Ok(o) => o,
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::check(false, format!("panicked: {msg}"))
            }
        };
        println!(
            "criterion {id:>2} {}: {title} ({:.1} s) :: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        self.lines.push((id, title.to_string(), outcome));
    }

    pub fn failures(&self) -> Vec<usize> {
        self.lines.iter().filter(|l| !l.2.passed).map(|l| l.0).collect()
    }
}
