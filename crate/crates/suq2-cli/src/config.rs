//! Run configuration shared by every command.

use serde::Serialize;
use std::path::PathBuf;

use suq2::algebra::validate_q;
use suq2::error::{Error, Result};
use suq2::window::TruncationWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub q: Vec<f64>,
    pub k_max: usize,
    pub m_max: usize,
    pub tol: f64,
    pub power_budget: usize,
    pub series_budget: usize,
    pub samples: usize,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_ops: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for &q in &self.q {
            validate_q(q)?;
        }
        if self.q.is_empty() {
            return Err(Error::InvalidParameter("at least one q value is required".into()));
        }
        if self.tol <= 0.0 {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        if self.power_budget == 0 || self.series_budget == 0 {
            return Err(Error::InvalidParameter("budgets must be positive".into()));
        }
        // window minimums are enforced by the constructor
        TruncationWindow::standard(self.k_max, self.m_max)?;
        Ok(())
    }

    pub fn leg_window(&self) -> TruncationWindow {
        TruncationWindow::standard(self.k_max, self.m_max).expect("validated")
    }

    /// Probe legs for the order-3 checks: capped at (6,6) so the triple
    /// tensor space stays matvec-friendly.
    pub fn probe_leg_window(&self) -> TruncationWindow {
        TruncationWindow::standard(self.k_max.min(6), self.m_max.min(6)).expect("validated")
    }

    pub fn sorted_q(&self) -> Vec<f64> {
        let mut q = self.q.clone();
        q.sort_by(|a, b| a.partial_cmp(b).unwrap());
        q.dedup();
        q
    }
}
