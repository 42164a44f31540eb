//! One function per subcommand. Each prints a short summary to stdout and
//! writes its artefacts under the output directory.

use std::path::Path;

use homog_core::{
    check_structure, check_time_modulus, effective_flux, energy_balance, energy_identity_check, solve_fine, solve_homogenized,
    verify_b_estimates, ModulusReport, Regime, StructureReport, Vector,
};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::io::{self, CellRecord};
use crate::plot;
use crate::study::{self, StudyOutcome, ESTIMATE_PAIRS};

/// Rows kept per written trajectory; longer runs are thinned with a stride.
const MAX_TRAJECTORY_ROWS: usize = 200;

#[derive(Debug, Serialize)]
pub struct StructureSummary {
    pub structure: StructureReport,
    pub time_modulus: Option<ModulusReport>,
    pub passed: bool,
}

/// Structure conditions, plus the time modulus when `0 < μ < 2`.
/// Returns a validation error when the model fails, after writing the report.
pub fn check_structure_cmd(config: &ExperimentConfig, out: &Path) -> Result<StructureSummary, CliError> {
    io::ensure_dir(out)?;
    let structure = check_structure(&config.model, config.tolerances.structure_samples, config.seed);
    let time_modulus = match Regime::from_mu(config.mu)? {
        Regime::EllipticParametric => {
            Some(check_time_modulus(&config.model, config.cell_options().modulus_samples, config.seed)?)
        }
        _ => None,
    };
    let passed = structure.passed && time_modulus.as_ref().is_none_or(|m| m.passed);
    let summary = StructureSummary { structure, time_modulus, passed };
    io::write_json(&out.join("structure.json"), &summary)?;
    println!(
        "structure: {} (monotonicity margin {:e}, continuity margin {:e}, zero-flux margin {:e})",
        verdict(summary.structure.passed),
        summary.structure.monotonicity_margin,
        summary.structure.continuity_margin,
        summary.structure.zero_flux_margin
    );
    if let Some(m) = &summary.time_modulus {
        println!("time modulus: {} (worst margin {:e})", verdict(m.passed), m.worst_margin);
    }
    if !summary.passed {
        return Err(CliError::Validation("model fails the admissibility checks".into()));
    }
    Ok(summary)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

#[derive(Debug, Serialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub record: CellRecord,
    pub energy_identity: f64,
    pub mean_v: f64,
    pub mean_p: Vec<f64>,
}

/// Cell problems at every configured `ξ`.
pub fn cell_solve(config: &ExperimentConfig, out: &Path) -> Result<Vec<CellSummary>, CliError> {
    config.validate()?;
    io::ensure_dir(out)?;
    let opts = config.cell_options();
    let xis = config.xi_list();
    let solutions = xis
        .par_iter()
        .map(|xi| {
            let xi = Vector::from_slice(xi);
            effective_flux(&config.model, config.mu, &xi, &config.grids.cell, &opts)
                .map_err(|e| CliError::from(e).at("cell solve"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut summaries = Vec::new();
    for (k, s) in solutions.iter().enumerate() {
        io::write_cell_field(&out.join(format!("cell_{k}.csv")), s)?;
        let summary = CellSummary {
            record: CellRecord::from(s),
            energy_identity: energy_identity_check(s, &config.model),
            mean_v: s.mean_v(),
            mean_p: s.mean_p().to_vec(),
        };
        println!(
            "xi = {:?}: b = {:?} ({}, residual {:e}, energy identity {:e})",
            summary.record.xi,
            summary.record.b,
            s.regime.name(),
            s.residual_norm,
            summary.energy_identity
        );
        summaries.push(summary);
    }
    io::write_json(&out.join("cells.json"), &summaries)?;
    Ok(summaries)
}

/// Effective-flux table over the configured lattice, reused when cached.
pub fn tabulate(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    config.validate()?;
    let lattice = config.lattice()?;
    let (table, reused) =
        study::cached_table(&out.join("tables"), &config.model, config.mu, lattice, &config.grids.cell, &config.cell_options())
            .map_err(|e| e.at("tabulate"))?;
    let estimates = verify_b_estimates(&table, config.model.constants(), ESTIMATE_PAIRS, config.seed);
    io::write_json(&out.join("estimates.json"), &estimates)?;
    println!(
        "table: {} nodes{}; monotonicity ratio {:.4} ({}), growth constant {:.4}",
        table.values.len(),
        if reused { " (reused)" } else { "" },
        estimates.monotonicity_ratio,
        verdict(estimates.passed),
        estimates.holder_constant
    );
    Ok(())
}

/// Fine solve at every ε and one homogenized solve on the finest grid.
pub fn solve(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    config.validate()?;
    io::ensure_dir(out)?;
    let opts = config.parabolic_options();
    let grids = config.epsilons.iter().map(|&e| config.fine_grid(e)).collect::<Result<Vec<_>, _>>()?;
    let (table, _) = study::cached_table(
        &out.join("tables"),
        &config.model,
        config.mu,
        config.lattice()?,
        &config.grids.cell,
        &config.cell_options(),
    )
    .map_err(|e| e.at("tabulate"))?;
    let finest = grids.last().expect("validated non-empty");
    let hom = solve_homogenized(&config.problem, &table, finest, &opts).map_err(|e| CliError::from(e).at("homogenized solve"))?;
    info!("homogenized solves: 1");
    io::write_ledger(&out.join("ledger_hom.csv"), &hom.energy_ledger)?;
    io::write_trajectory(&out.join("trajectory_hom.csv"), &hom, stride(finest.n_t))?;
    println!("homogenized: energy residual {:e}", energy_balance(&hom));

    let fines = grids
        .par_iter()
        .map(|g| {
            solve_fine(&config.problem, &config.model, g, &opts)
                .map_err(|e| CliError::from(e).at(&format!("fine solve (epsilon = {})", g.epsilon)))
        })
        .collect::<Vec<_>>();
    for (k, fine) in fines.into_iter().enumerate() {
        let fine = fine?;
        io::write_ledger(&out.join(format!("ledger_fine_{k}.csv")), &fine.energy_ledger)?;
        io::write_trajectory(&out.join(format!("trajectory_fine_{k}.csv")), &fine, stride(fine.grid.n_t))?;
        println!("epsilon = {}: energy residual {:e}", fine.grid.epsilon, energy_balance(&fine));
    }
    Ok(())
}

fn stride(n_t: usize) -> usize {
    n_t.div_ceil(MAX_TRAJECTORY_ROWS).max(1)
}

pub fn study(config: &ExperimentConfig, out: &Path) -> Result<StudyOutcome, CliError> {
    let outcome = study::run_study(config, out)?;
    for r in &outcome.rows {
        println!(
            "epsilon = {}: grad error {:e}, averaged error {:e}, remainder {:e}",
            r.epsilon, r.grad_error_lp, r.averaged_error_lp, r.remainder_lp
        );
    }
    println!("report written to {}", out.join("report.csv").display());
    Ok(outcome)
}

/// Re-renders the convergence plot from an existing report.
pub fn report(csv: &Path, out: &Path) -> Result<(), CliError> {
    let rows = io::read_report(csv)?;
    io::ensure_dir(out)?;
    let path = out.join("convergence.svg");
    std::fs::write(&path, plot::convergence_svg(&rows)).map_err(|e| CliError::io(&path, e))?;
    println!("{} rows, plot written to {}", rows.len(), path.display());
    Ok(())
}
