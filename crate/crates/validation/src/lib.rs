//! Pass/fail bookkeeping for the acceptance run in `tests/acceptance.rs`.

use std::time::{Duration, Instant};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    /// Wall-clock budget; exceeding it fails the criterion.
    pub budget: Option<Duration>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.pass && self.budget.is_none_or(|b| self.elapsed < b)
    }

    pub fn line(&self) -> String {
        let secs = self.elapsed.as_secs_f64();
        let mut detail = self.detail.clone();
        if let Some(b) = self.budget.filter(|b| self.elapsed >= *b) {
            detail.push_str(&format!(" [runtime {secs:.1} s over {} s]", b.as_secs_f64()));
        }
        format!(
            "criterion {:<28} {}  ({secs:.1} s) {detail}",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Runs `f`, timing it against an optional budget in seconds.
pub fn timed(id: &'static str, budget_secs: Option<f64>, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let t = Instant::now();
    let (pass, detail) = f();
    Verdict {
        id,
        pass,
        detail,
        elapsed: t.elapsed(),
        budget: budget_secs.map(Duration::from_secs_f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_overrun_fails() {
        let mut v = timed("x", Some(10.0), || (true, "fine".into()));
        assert!(v.passed());
        assert!(v.line().contains("PASS"));
        v.elapsed = Duration::from_secs(11);
        assert!(!v.passed());
        assert!(v.line().contains("FAIL") && v.line().contains("over 10 s"));
    }
}
