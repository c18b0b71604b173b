//! Residual reports: every check emits its name, the identity it probes, the
//! measured residual and the budget it was held to.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reserved for exploratory measurements that carry no pass/fail claim.
    Measured,
}

/// One named check: residual against budget, with the parameters that
/// produced it. `verdict` is `Pass` iff residual ≤ budget, except for
/// `Measured` rows which never gate anything.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub command: String,
    pub check: String,
    /// The identity or quantity probed, in plain operator notation.
    pub anchor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub params: Vec<(String, String)>,
    pub residual: f64,
    pub budget: f64,
    pub verdict: Verdict,
    pub ms: u128,
}

impl ResidualReport {
    pub fn gated(check: &str, anchor: &str, residual: f64, budget: f64) -> Self {
        ResidualReport {
            command: String::new(),
            check: check.to_string(),
            anchor: anchor.to_string(),
            q: None,
            params: Vec::new(),
            residual,
            budget,
            verdict: if residual <= budget { Verdict::Pass } else { Verdict::Fail },
            ms: 0,
        }
    }

    pub fn measured(check: &str, anchor: &str, residual: f64, budget: f64) -> Self {
        ResidualReport { verdict: Verdict::Measured, ..Self::gated(check, anchor, residual, budget) }
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub measured: usize,
}

pub fn summarize(rows: &[ResidualReport]) -> Summary {
    let mut s = Summary::default();
    for r in rows {
        match r.verdict {
            Verdict::Pass => s.pass += 1,
            Verdict::Fail => s.fail += 1,
            Verdict::Measured => s.measured += 1,
        }
    }
    s
}

/// Sorts rows into the canonical emission order (command, q, check).
pub fn sort_rows(rows: &mut [ResidualReport]) {
    rows.sort_by(|a, b| {
        (a.command.as_str(), a.q.unwrap_or(-1.0), a.check.as_str())
            .partial_cmp(&(b.command.as_str(), b.q.unwrap_or(-1.0), b.check.as_str()))
            .unwrap()
    });
}

pub fn to_csv(rows: &[ResidualReport]) -> String {
    let mut out = String::from("command,q,check,anchor,residual,budget,verdict,ms\n");
    for r in rows {
        let q = r.q.map(|q| format!("{q}")).unwrap_or_default();
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Measured => "measured",
        };
        out.push_str(&format!(
            "{},{},{},{},{:e},{:e},{},{}\n",
            r.command,
            q,
            csv_field(&r.check),
            csv_field(&r.anchor),
            r.residual,
            r.budget,
            verdict,
            r.ms
        ));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_matches_budget() {
        assert!(ResidualReport::gated("x", "y", 1e-12, 1e-10).passed());
        assert!(!ResidualReport::gated("x", "y", 1e-8, 1e-10).passed());
        assert!(ResidualReport::measured("x", "y", 1.0, 1e-10).passed());
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = vec![ResidualReport::gated("rel", "T*T=I", 0.0, 1e-12).with_q(0.5)];
        let csv = to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "command,q,check,anchor,residual,budget,verdict,ms");
        assert!(lines.next().unwrap().contains("pass"));
    }
}
