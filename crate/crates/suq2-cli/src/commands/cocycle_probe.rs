//! The order-3 probes: the pseudo-cocycle commutant gate and the 2-cocycle
//! residual measurement.

use suq2::comult::GenLetter;
use suq2::error::Result;
use suq2::multiplier::{pseudo_cocycle_probe, two_cocycle_residual, MultiplierLab};
use suq2::report::ResidualReport;

use super::{adapt, rng_for, timed, Command};
use crate::config::RunConfig;

pub struct CocycleProbe;

impl Command for CocycleProbe {
    fn name(&self) -> &'static str {
        "cocycle-probe"
    }

    fn describe(&self) -> &'static str {
        "pseudo-cocycle commutant gate and the exploratory 2-cocycle residual on the triple window"
    }

    fn default_q(&self) -> Vec<f64> {
        vec![0.2, 0.5]
    }

    fn run(&self, cfg: &RunConfig) -> Result<Vec<ResidualReport>> {
        let leg = cfg.probe_leg_window();
        let mut out = Vec::new();
        for &q in &cfg.sorted_q() {
            let mut rng = rng_for(cfg.seed, q);
            let (rows, ms) = timed(|| -> Result<Vec<_>> {
                let lab =
                    MultiplierLab::build(leg, q, cfg.tol, cfg.power_budget, cfg.series_budget, 1e-13)?;
                let mut rows = pseudo_cocycle_probe(
                    &lab,
                    &[(0, 0), (1, 1), (2, 2)],
                    &[vec![GenLetter::S], vec![GenLetter::T]],
                    cfg.samples.min(3),
                    &mut rng,
                )?;
                rows.extend(two_cocycle_residual(
                    &lab,
                    &[(0, 0, 0), (1, 1, 1), (2, 0, 2)],
                    cfg.samples.min(3),
                    &mut rng,
                )?);
                Ok(rows)
            });
            out.extend(adapt(self.name(), Some(q), rows?, ms));
        }
        Ok(out)
    }
}
