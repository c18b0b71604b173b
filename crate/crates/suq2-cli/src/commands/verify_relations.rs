//! Defining relations of the algebra and of its q-deformed images, plus the
//! series-vs-direct cross-check of the isomorphism layer.

use num_complex::Complex64;
use suq2::algebra::{
    check_a_relations, check_suq2_relations, max_column_residual, phi_a, phi_a_series, phi_b,
    phi_b_series,
};
use suq2::cocycle::CheckRow;
use suq2::error::Result;
use suq2::operator::Operator;
use suq2::report::ResidualReport;
use suq2::window::InteriorSet;

use super::{adapt, timed, Command};
use crate::config::RunConfig;

pub struct VerifyRelations;

impl Command for VerifyRelations {
    fn name(&self) -> &'static str {
        "verify-relations"
    }

    fn describe(&self) -> &'static str {
        "defining relations of A and of the q-deformed generators, with the word-series cross-check"
    }

    fn default_q(&self) -> Vec<f64> {
        vec![0.0, 0.3, 0.5, 0.7, 0.9]
    }

    fn run(&self, cfg: &RunConfig) -> Result<Vec<ResidualReport>> {
        let window = cfg.leg_window();
        let mut out = Vec::new();
        // the relations of A carry no q
        let (rows, ms) = timed(|| {
            check_a_relations(window)
                .into_iter()
                .map(|r| CheckRow::new(r.name, r.anchor, r.residual, r.budget))
                .collect::<Vec<_>>()
        });
        out.extend(adapt(self.name(), None, rows, ms));
        for &q in &cfg.sorted_q() {
            let (rows, ms) = timed(|| -> Result<Vec<CheckRow>> {
                let mut rows: Vec<CheckRow> = check_suq2_relations(window, q)?
                    .into_iter()
                    .map(|r| CheckRow::new(r.name, r.anchor, r.residual, r.budget))
                    .collect();
                if q > 0.0 {
                    rows.extend(series_cross_check(cfg, q)?);
                }
                Ok(rows)
            });
            out.extend(adapt(self.name(), Some(q), rows?, ms));
        }
        Ok(out)
    }
}

/// ‖series − direct‖ on interior columns for both deformed generators; the
/// budget is the geometric coefficient tail of the truncated series.
fn series_cross_check(cfg: &RunConfig, q: f64) -> Result<Vec<CheckRow>> {
    let window = cfg.leg_window();
    let one = Complex64::new(1.0, 0.0);
    let interior = InteriorSet::new(window, 1);
    let (series_a, tail_a) = phi_a_series(window, q, cfg.tol)?;
    let diff_a = Operator::lincomb(vec![(one, series_a), (-one, phi_a(window, q))]);
    let (series_b, tail_b) = phi_b_series(window, q, cfg.tol)?;
    let diff_b = Operator::lincomb(vec![(one, series_b), (-one, phi_b(window, q))]);
    Ok(vec![
        CheckRow::new(
            "phi-a-series-vs-direct",
            "sum ((1-q^{2(n+1)})^{1/2}-(1-q^{2n})^{1/2}) T^n T*^{n+1} matches the weighted shift",
            max_column_residual(&diff_a, &interior),
            tail_a + 1e-12,
        ),
        CheckRow::new(
            "phi-b-series-vs-direct",
            "sum q^n T^n S T*^n matches the diagonal winding shift",
            max_column_residual(&diff_b, &interior),
            tail_b + 1e-12,
        ),
    ])
}
