//! Check records shared by the verification and rearrangement suites.

/// One named check: the measured quantity, the bound it was held against,
/// the tolerance used, and the verdict.
#[derive(Clone, Debug)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn push(&mut self, name: impl Into<String>, measured: f64, bound: f64, tolerance: f64, pass: bool) {
        self.checks.push(CheckRecord {
            name: name.into(),
            measured,
            bound,
            tolerance,
            pass,
        });
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn find(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One record per line: `name measured bound tolerance pass`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "check = {}\nmeasured = {}\nbound = {}\ntolerance = {}\npass = {}\n\n",
                c.name, c.measured, c.bound, c.tolerance, c.pass
            ));
        }
        out
    }
}
