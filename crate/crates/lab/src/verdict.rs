//! Pass/fail records for reproduction runs.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    /// Outside tolerance at the smallest ε, but moving monotonically
    /// toward the target along the sweep. Counts as a pass.
    Converging,
    Fail,
}

impl Status {
    pub fn is_pass(self) -> bool {
        self != Status::Fail
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Converging => "CONVERGING",
            Status::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub id: String,
    pub description: String,
    pub measured: f64,
    /// Reference value; the expression it comes from is in `reference_text`.
    pub reference: f64,
    pub reference_text: String,
    pub tolerance: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    /// `|measured - reference| ≤ tolerance`.
    pub fn within(id: &str, description: &str, measured: f64, reference: f64, reference_text: &str, tolerance: f64) -> Self {
        Verdict {
            id: id.to_owned(),
            description: description.to_owned(),
            measured,
            reference,
            reference_text: reference_text.to_owned(),
            tolerance,
            status: Status::from_bool((measured - reference).abs() <= tolerance),
            note: None,
        }
    }

    /// `measured ≤ bound`.
    pub fn at_most(id: &str, description: &str, measured: f64, bound: f64) -> Self {
        Verdict {
            id: id.to_owned(),
            description: description.to_owned(),
            measured,
            reference: bound,
            reference_text: format!("<= {bound}"),
            tolerance: 0.0,
            status: Status::from_bool(measured <= bound),
            note: None,
        }
    }

    /// A boolean check; `measured` is 1 for true and 0 for false.
    pub fn holds(id: &str, description: &str, ok: bool) -> Self {
        Verdict {
            id: id.to_owned(),
            description: description.to_owned(),
            measured: if ok { 1.0 } else { 0.0 },
            reference: 1.0,
            reference_text: "true".to_owned(),
            tolerance: 0.0,
            status: Status::from_bool(ok),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<10} {:<28} measured {:<12.6} reference {} (tol {}): {}",
            self.status.to_string(),
            self.id,
            self.measured,
            self.reference_text,
            self.tolerance,
            self.description
        )?;
        if let Some(n) = &self.note {
            write!(f, " [{n}]")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictTable {
    pub name: String,
    pub quick: bool,
    pub verdicts: Vec<Verdict>,
    pub all_passed: bool,
}

impl VerdictTable {
    pub fn new(name: &str, quick: bool, verdicts: Vec<Verdict>) -> Self {
        let all_passed = verdicts.iter().all(|v| v.status.is_pass());
        VerdictTable {
            name: name.to_owned(),
            quick,
            verdicts,
            all_passed,
        }
    }

    pub fn get(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }
}

impl fmt::Display for VerdictTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== {}{} ==", self.name, if self.quick { " (quick)" } else { "" })?;
        for v in &self.verdicts {
            writeln!(f, "{v}")?;
        }
        write!(f, "overall: {}", if self.all_passed { "PASS" } else { "FAIL" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converging_counts_as_pass() {
        let mut v = Verdict::within("a", "x", 0.7, 0.5, "1/2", 0.03);
        assert_eq!(v.status, Status::Fail);
        assert!(!VerdictTable::new("t", false, vec![v.clone()]).all_passed);
        v.status = Status::Converging;
        assert!(VerdictTable::new("t", false, vec![v]).all_passed);
    }

    #[test]
    fn json_shape() {
        let t = VerdictTable::new("t", true, vec![Verdict::at_most("b", "y", 0.01, 0.02)]);
        let j: serde_json::Value = serde_json::to_value(&t).unwrap();
        assert_eq!(j["verdicts"][0]["status"], "pass");
        assert_eq!(j["all_passed"], true);
        assert!(j["verdicts"][0].get("note").is_none());
    }
}
