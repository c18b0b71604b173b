//! The theorem suite: intertwining on generator words, unitarity,
//! quotient-symbol stability, counit identities, and refinement data for
//! the strict-continuity claim.

use num_complex::Complex64;
use suq2::cocycle::{conjugated_symbol_check, u_q, u_q_checks, verify_intertwining, CheckRow};
use suq2::comult::{
    continuity_probe, max_increment, mixed_delta_q, refine_grid, synth_pair, GenLetter, Leg,
    TensorWordSum,
};
use suq2::algebra::{gen_s, gen_t, max_column_residual, AWord};
use suq2::error::Result;
use suq2::multiplier::counit_identity_checks;
use suq2::operator::Operator;
use suq2::report::ResidualReport;
use suq2::window::InteriorSet;

use super::{adapt, rng_for, timed, Command};
use crate::config::RunConfig;

pub struct VerifyTheorem;

pub fn intertwining_words() -> Vec<Vec<GenLetter>> {
    use GenLetter::*;
    vec![
        vec![S],
        vec![T],
        vec![SStar],
        vec![TStar],
        vec![S, T],
        vec![T, SStar],
        vec![SStar, S],
    ]
}

impl Command for VerifyTheorem {
    fn name(&self) -> &'static str {
        "verify-theorem"
    }

    fn describe(&self) -> &'static str {
        "intertwining, symbol stability, counit identities and continuity refinement data"
    }

    fn default_q(&self) -> Vec<f64> {
        vec![0.3, 0.5, 0.7]
    }

    fn run(&self, cfg: &RunConfig) -> Result<Vec<ResidualReport>> {
        let window2 = cfg.leg_window().tensor_square();
        let mut out = Vec::new();
        let qs = cfg.sorted_q();
        for &q in &qs {
            let mut rng = rng_for(cfg.seed, q);
            let (rows, ms) = timed(|| -> Result<Vec<CheckRow>> {
                let bundle = u_q(window2, q, cfg.tol, cfg.power_budget, cfg.series_budget)?;
                let mut rows =
                    verify_intertwining(&bundle, &intertwining_words(), cfg.samples, &mut rng)?;
                rows.extend(u_q_checks(&bundle, cfg.samples.min(60), &mut rng)?);
                rows.push(conjugated_symbol_check(&bundle)?);
                rows.extend(counit_identity_checks(&bundle, 2, 2, 6)?);
                rows.extend(mixed_counit_rows(cfg, q)?);
                Ok(rows)
            });
            out.extend(adapt(self.name(), Some(q), rows?, ms));
        }
        // strict-continuity refinement data over the configured grid
        if qs.len() >= 2 {
            let (rows, ms) = timed(|| continuity_rows(cfg, &qs));
            out.extend(adapt(self.name(), None, rows?, ms));
        }
        Ok(out)
    }
}

/// (ω_1⊗ρ)Δ_q and (ρ⊗ω_1)Δ_q reproduce ρ on the generators.
fn mixed_counit_rows(cfg: &RunConfig, q: f64) -> Result<Vec<CheckRow>> {
    let w1 = cfg.leg_window();
    let one = Complex64::new(1.0, 0.0);
    let interior = InteriorSet::new(w1, 2);
    let mut rows = Vec::new();
    for (leg, label) in [(Leg::Left, "left"), (Leg::Right, "right")] {
        let (ms, mt) = mixed_delta_q(
            w1,
            q,
            leg,
            Complex64::ONE,
            cfg.tol,
            cfg.power_budget,
            cfg.series_budget,
        )?;
        let s_diff = Operator::lincomb(vec![(one, ms.op.clone()), (-one, gen_s(w1))]);
        let t_diff = Operator::lincomb(vec![(one, mt.op.clone()), (-one, gen_t(w1))]);
        rows.push(CheckRow::new(
            &format!("mixed-counit-{label}-S"),
            "the counit leg of Delta_q(S) reproduces rho(S)",
            max_column_residual(&s_diff, &interior),
            3.0 * cfg.tol,
        ));
        rows.push(CheckRow::new(
            &format!("mixed-counit-{label}-T"),
            "the counit leg of Delta_q(T) reproduces rho(T)",
            max_column_residual(&t_diff, &interior),
            3.0 * cfg.tol,
        ));
    }
    Ok(rows)
}

fn continuity_rows(cfg: &RunConfig, grid: &[f64]) -> Result<Vec<CheckRow>> {
    let window2 = cfg.leg_window().tensor_square();
    let mut rng = rng_for(cfg.seed, 0.0);
    let words: Vec<(&str, TensorWordSum)> = vec![
        ("S*S(x)S*S", TensorWordSum::from_pair(AWord::s_star_s(), AWord::s_star_s())),
        ("S(x)T", TensorWordSum::from_pair(AWord::s(), AWord::t())),
    ];
    let mut rows = Vec::new();
    for (label, word) in words {
        let w_op = synth_pair(window2, &word)?;
        let builder = |q: f64| -> Result<Operator> {
            let bundle = u_q(window2, q, cfg.tol, cfg.power_budget, cfg.series_budget)?;
            Ok(Operator::compose(vec![bundle.u.op.clone(), w_op.clone()]))
        };
        let coarse = continuity_probe(&builder, grid, 2, 8, &mut rng)?;
        let fine_grid = refine_grid(grid);
        let fine = continuity_probe(&builder, &fine_grid, 2, 8, &mut rng)?;
        for r in &coarse {
            rows.push(
                CheckRow::new(
                    &format!("continuity-{label}-coarse-{:.3}-{:.3}", r.q_lo, r.q_hi),
                    "norm increment of q -> U_q (rho x rho)(w)",
                    r.increment,
                    f64::INFINITY,
                )
                .measured(),
            );
        }
        rows.push(CheckRow::new(
            &format!("continuity-refinement-{label}"),
            "halving the grid does not grow the largest increment",
            max_increment(&fine),
            max_increment(&coarse) + 4.0 * cfg.tol,
        ));
    }
    Ok(rows)
}
