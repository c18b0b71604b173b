//! Builds the intertwiner bundle per q and runs the construction gates:
//! coefficient layer, kernel vectors, partial isometry, unitarity, dual
//! constructions, membership diagnostics, and the ideal-density witnesses.

use num_complex::Complex64;
use suq2::cocycle::{
    kernel_check, lambda_layer_checks, membership_checks, orthonormality_check, s_action_checks,
    sample_tuples, spectral_interior, u_q, u_q_checks, u_tilde_cross_check, CheckRow,
};
use suq2::comult::{ideal_density_identity_residual, mixed_rep_nonvanishing, validate_projection_gap};
use suq2::error::Result;
use suq2::operator::Operator;
use suq2::report::ResidualReport;
use suq2::window::WindowVec;

use super::{adapt, rng_for, timed, Command};
use crate::config::RunConfig;

pub struct BuildOmega;

impl Command for BuildOmega {
    fn name(&self) -> &'static str {
        "build-omega"
    }

    fn describe(&self) -> &'static str {
        "constructs the partial isometry and its unitary extension, gating every layer on its computed budget"
    }

    fn default_q(&self) -> Vec<f64> {
        vec![0.0, 0.3, 0.5, 0.7]
    }

    fn run(&self, cfg: &RunConfig) -> Result<Vec<ResidualReport>> {
        let window2 = cfg.leg_window().tensor_square();
        let mut out = Vec::new();
        for &q in &cfg.sorted_q() {
            let mut rng = rng_for(cfg.seed, q);
            let (rows, ms) = timed(|| -> Result<Vec<CheckRow>> {
                let mut rows = lambda_layer_checks(q, cfg.tol);
                rows.push(orthonormality_check(window2, q, cfg.tol, 20)?);
                rows.extend(kernel_check(window2, q, cfg.tol, cfg.samples.min(24))?);
                let bundle = u_q(window2, q, cfg.tol, cfg.power_budget, cfg.series_budget)?;
                // numerical validation of the spectral-gap hypothesis the
                // projection route relies on
                let gap = validate_projection_gap(window2, q, &bundle.comult.ds, 3, 25, &mut rng)?;
                rows.push(
                    CheckRow::new(
                        "projection-gap",
                        "norm of Delta_q(phi_q(bb*)) off the eigenvalue-1 space is at most q^2",
                        gap,
                        q * q + cfg.tol,
                    )
                    .with_param("power", bundle.comult.ds.power),
                );
                rows.push(partial_isometry_row(&bundle, cfg, &mut rng)?);
                rows.push(isometry_row(&bundle, cfg, &mut rng)?);
                rows.push(u_tilde_cross_check(&bundle, cfg.samples.min(60), &mut rng));
                rows.extend(u_q_checks(&bundle, cfg.samples.min(60), &mut rng)?);
                rows.extend(s_action_checks(&bundle, cfg.samples.min(12))?);
                rows.extend(membership_checks(&bundle)?);
                for n in 0..3 {
                    rows.push(CheckRow::new(
                        &format!("density-identity-n{n}"),
                        "Delta_0(S T^-n)(S(x)T) = delta_{n,0} S^2 (x) I",
                        ideal_density_identity_residual(window2, n)?,
                        1e-12,
                    ));
                }
                rows.extend(nonvanishing_rows(cfg, q, &mut rng)?);
                if let Some(dir) = &cfg.dump_ops {
                    dump_operators(dir, q, &bundle)?;
                }
                Ok(rows)
            });
            out.extend(adapt(self.name(), Some(q), rows?, ms));
        }
        Ok(out)
    }
}

fn partial_isometry_row(
    bundle: &suq2::cocycle::IntertwinerBundle,
    cfg: &RunConfig,
    rng: &mut impl rand::Rng,
) -> Result<CheckRow> {
    let w2 = bundle.window;
    let one = Complex64::new(1.0, 0.0);
    let ds = &bundle.comult.ds;
    let probe = Operator::lincomb(vec![
        (one, Operator::compose(vec![ds.op.op.adjoint(), ds.op.op.clone()])),
        (-one, ds.projection.op.clone()),
    ]);
    let per_col = bundle.comult.tol / (2.0 * ds.power as f64 + 1.0);
    let cols = sample_tuples(&spectral_interior(w2, bundle.q, per_col, 1), cfg.samples, rng);
    let mut worst = 0.0f64;
    for t in &cols {
        worst = worst.max(probe.apply(&WindowVec::basis(w2, t))?.norm());
    }
    Ok(
        CheckRow::new("s-partial-isometry", "Delta_q(S)* Delta_q(S) equals the spectral projection", worst, 2.0 * cfg.tol)
            .with_param("columns", cols.len()),
    )
}

fn isometry_row(
    bundle: &suq2::cocycle::IntertwinerBundle,
    cfg: &RunConfig,
    rng: &mut impl rand::Rng,
) -> Result<CheckRow> {
    let w2 = bundle.window;
    let one = Complex64::new(1.0, 0.0);
    let dt = &bundle.comult.dt;
    let probe = Operator::lincomb(vec![
        (one, Operator::compose(vec![dt.op.op.adjoint(), dt.op.op.clone()])),
        (-one, Operator::identity(w2)),
    ]);
    let cols = sample_tuples(
        &spectral_interior(w2, bundle.q, bundle.comult.tol * 1e-2, 1),
        cfg.samples,
        rng,
    );
    let mut worst = 0.0f64;
    for t in &cols {
        worst = worst.max(probe.apply(&WindowVec::basis(w2, t))?.norm());
    }
    Ok(CheckRow::new("t-isometry", "Delta_q(T)* Delta_q(T) = I", worst, 3.0 * cfg.tol)
        .with_param("columns", cols.len()))
}

fn nonvanishing_rows(cfg: &RunConfig, q: f64, rng: &mut impl rand::Rng) -> Result<Vec<CheckRow>> {
    let pairs = [
        (Complex64::ONE, Complex64::I),
        (Complex64::from_polar(1.0, 0.4), Complex64::from_polar(1.0, -1.2)),
        (Complex64::from_polar(1.0, 2.2), Complex64::ONE),
        (Complex64::from_polar(1.0, -0.9), Complex64::from_polar(1.0, 2.8)),
    ];
    let mut rows = Vec::new();
    for (idx, &(t, z)) in pairs.iter().enumerate() {
        for (label, norm) in
            mixed_rep_nonvanishing(q, t, z, cfg.k_max.min(8), cfg.tol, 25, rng)?
        {
            rows.push(
                CheckRow::new(
                    &format!("nonvanishing-{label}-pair{idx}"),
                    "the mixed irreducible families stay bounded away from zero on D Delta_q(phi_q(b))",
                    0.1 - norm,
                    0.0,
                )
                .with_param("norm", format!("{norm:.4}")),
            );
        }
    }
    Ok(rows)
}

fn dump_operators(
    dir: &std::path::Path,
    q: f64,
    bundle: &suq2::cocycle::IntertwinerBundle,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let dump = |name: &str, op: &Operator| -> Result<()> {
        let path = dir.join(format!("{name}-q{q}.txt"));
        let mut file = std::fs::File::create(path)?;
        op.dump(&mut file)
    };
    dump("delta-q-phi-a", &bundle.comult.da.op)?;
    dump("delta-q-phi-b", &bundle.comult.db.op)?;
    dump("u-tilde", &bundle.u_tilde.op)?;
    Ok(())
}
