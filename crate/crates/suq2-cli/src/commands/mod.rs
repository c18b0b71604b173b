//! The check suites, one per CLI command, behind a common trait and
//! registered by name; `--cmd` selects one at runtime.

mod build_omega;
mod cocycle_probe;
mod sweep;
mod verify_relations;
mod verify_theorem;

use std::time::Instant;

use suq2::cocycle::CheckRow;
use suq2::error::Result;
use suq2::report::ResidualReport;

use crate::config::RunConfig;

pub trait Command: Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    /// q grid used when the invocation passes none.
    fn default_q(&self) -> Vec<f64>;
    fn run(&self, cfg: &RunConfig) -> Result<Vec<ResidualReport>>;
}

pub fn registry() -> Vec<Box<dyn Command>> {
    vec![
        Box::new(verify_relations::VerifyRelations),
        Box::new(build_omega::BuildOmega),
        Box::new(verify_theorem::VerifyTheorem),
        Box::new(cocycle_probe::CocycleProbe),
        Box::new(sweep::Sweep),
    ]
}

pub fn lookup(name: &str) -> Option<Box<dyn Command>> {
    registry().into_iter().find(|c| c.name() == name)
}

/// Adapts library check rows into report rows.
pub(crate) fn adapt(command: &str, q: Option<f64>, rows: Vec<CheckRow>, ms: u128) -> Vec<ResidualReport> {
    let per_row = ms / rows.len().max(1) as u128;
    rows.into_iter()
        .map(|r| {
            let mut out = if r.measured {
                ResidualReport::measured(&r.check, &r.anchor, r.residual, r.budget)
            } else {
                ResidualReport::gated(&r.check, &r.anchor, r.residual, r.budget)
            };
            out.command = command.to_string();
            out.q = q;
            out.params = r.params;
            out.ms = per_row;
            out
        })
        .collect()
}

pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, u128) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_millis())
}

/// Deterministic per-(command, q) RNG stream.
pub(crate) fn rng_for(seed: u64, q: f64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (q.to_bits().rotate_left(17)))
}
