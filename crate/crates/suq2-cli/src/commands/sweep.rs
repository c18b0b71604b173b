//! Continuity sweeps: norm increments of the q-parametrized families over
//! the configured grid, with refinement convergence as the gate.

use suq2::algebra::AWord;
use suq2::cocycle::{u_q, CheckRow};
use suq2::comult::{
    continuity_probe, delta_q_s, delta_q_t, max_increment, refine_grid, synth_pair, TensorWordSum,
};
use suq2::error::Result;
use suq2::operator::Operator;
use suq2::report::ResidualReport;

use super::{adapt, rng_for, timed, Command};
use crate::config::RunConfig;

pub struct Sweep;

impl Command for Sweep {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn describe(&self) -> &'static str {
        "continuity increments of Delta_q(S), Delta_q(T) and U_q-translates over a refining q grid"
    }

    fn default_q(&self) -> Vec<f64> {
        vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
    }

    fn run(&self, cfg: &RunConfig) -> Result<Vec<ResidualReport>> {
        let window2 = cfg.leg_window().tensor_square();
        let grid = cfg.sorted_q();
        if grid.len() < 2 {
            return Err(suq2::error::Error::InvalidParameter(
                "a sweep needs at least two q values".into(),
            ));
        }
        let mut rng = rng_for(cfg.seed, grid[0]);
        let mut families: Vec<(&str, Box<dyn Fn(f64) -> Result<Operator>>)> = vec![
            (
                "delta-q-S",
                Box::new(move |q| Ok(delta_q_s(window2, q, 1e-8, 4096)?.op.op)),
            ),
            (
                "delta-q-T",
                Box::new(move |q| Ok(delta_q_t(window2, q, 1e-8, 4096)?.op.op)),
            ),
        ];
        let words: Vec<(&str, TensorWordSum)> = vec![
            ("U-S*S(x)S*S", TensorWordSum::from_pair(AWord::s_star_s(), AWord::s_star_s())),
            ("U-S(x)T", TensorWordSum::from_pair(AWord::s(), AWord::t())),
        ];
        let tol = cfg.tol;
        let pb = cfg.power_budget;
        let sb = cfg.series_budget;
        for (label, word) in words {
            let w_op = synth_pair(window2, &word)?;
            families.push((
                label,
                Box::new(move |q| {
                    let bundle = u_q(window2, q, tol, pb, sb)?;
                    Ok(Operator::compose(vec![bundle.u.op.clone(), w_op.clone()]))
                }),
            ));
        }
        let mut out = Vec::new();
        let (rows, ms) = timed(|| -> Result<Vec<CheckRow>> {
            let mut rows = Vec::new();
            for (label, builder) in &families {
                let coarse = continuity_probe(builder, &grid, 2, 8, &mut rng)?;
                let fine = continuity_probe(builder, &refine_grid(&grid), 2, 8, &mut rng)?;
                for r in &coarse {
                    rows.push(
                        CheckRow::new(
                            &format!("increment-{label}-{:.3}-{:.3}", r.q_lo, r.q_hi),
                            "norm increment over one grid step",
                            r.increment,
                            f64::INFINITY,
                        )
                        .measured(),
                    );
                }
                rows.push(CheckRow::new(
                    &format!("refinement-{label}"),
                    "halving the grid spacing does not grow the largest increment",
                    max_increment(&fine),
                    max_increment(&coarse) + 4.0 * cfg.tol,
                ));
            }
            // a constant family has zero increments
            let constant = continuity_probe(
                &|_q| Ok(Operator::identity(window2)),
                &grid,
                2,
                4,
                &mut rng,
            )?;
            rows.push(CheckRow::new(
                "increment-constant-family",
                "a q-independent family reports zero increments",
                max_increment(&constant),
                1e-14,
            ));
            Ok(rows)
        });
        out.extend(adapt(self.name(), None, rows?, ms));
        Ok(out)
    }
}
