//! Parallel drivers: lattice tabulation, corrector assembly and the full
//! convergence study over a decreasing sequence of ε.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::time::Instant;

use homog_core::effective::{provenance, tabulate_node, EstimateReport};
use homog_core::fields::{corrector_keys, fill_corrector};
use homog_core::{
    check_structure, energy_balance, mesh_average, remainder, solve_fine, solve_homogenized, time_modulus_gate,
    verify_b_estimates, CellGrid, CellSolutionCache, CorrectorDiagnostics, DiscreteField, FluxModel, FluxTable, Lattice, Regime,
    SolveResult, SolverOptions, SpaceTimeGrid,
};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::io::{self, ReportRow};
use crate::plot;

/// Node pairs sampled by the monotonicity check of a table.
pub const ESTIMATE_PAIRS: usize = 1000;

/// One cell solve per lattice node, spread over the rayon pool.
pub fn tabulate_parallel(
    model: &FluxModel,
    mu: f64,
    lattice: Lattice,
    grid: &CellGrid,
    opts: &SolverOptions,
) -> Result<FluxTable, CliError> {
    lattice.validate()?;
    if lattice.dim() != model.coefficients().dim {
        return Err(CliError::Validation("lattice dimension differs from the model dimension".into()));
    }
    let values = (0..lattice.len())
        .into_par_iter()
        .map(|k| tabulate_node(model, mu, &lattice, k, grid, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FluxTable::from_values(mu, model.constants().p, lattice, provenance(mu, grid, opts)?, values)?)
}

/// Cache key of a table: model, regime, grid, tolerances and lattice.
pub fn table_key(
    model: &FluxModel,
    mu: f64,
    lattice: &Lattice,
    grid: &CellGrid,
    opts: &SolverOptions,
) -> Result<String, CliError> {
    let regime = Regime::from_mu(mu)?;
    let text = serde_json::to_string(&(model, regime, lattice, grid, opts.tol, opts.period_tol))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    Ok(format!("table-{:016x}", h.finish()))
}

/// Loads the table from `dir` when an identical one was computed before.
pub fn cached_table(
    dir: &Path,
    model: &FluxModel,
    mu: f64,
    lattice: Lattice,
    grid: &CellGrid,
    opts: &SolverOptions,
) -> Result<(FluxTable, bool), CliError> {
    let key = table_key(model, mu, &lattice, grid, opts)?;
    let path = dir.join(format!("{key}.json"));
    if path.exists() {
        info!("reusing {}", path.display());
        return Ok((io::load_table(&path)?, true));
    }
    let table = tabulate_parallel(model, mu, lattice, grid, opts)?;
    io::save_table(dir, &key, &table)?;
    Ok((table, false))
}

/// Solves the cell problems missing from the cache in parallel, then fills `p_ε(·, ·, M_ε Du)`.
pub fn corrector_parallel(averaged: &DiscreteField, cache: &mut CellSolutionCache) -> Result<(DiscreteField, usize), CliError> {
    let keys = corrector_keys(averaged, cache);
    let missing = cache.missing(&keys)?;
    let solved: Vec<_> = missing.par_iter().map(|k| (*k, cache.solve_key(k))).collect();
    for (k, s) in solved {
        cache.insert(k, s?);
    }
    Ok((fill_corrector(averaged, cache)?, keys.len()))
}

/// Checks the structure conditions and, for `0 < μ < 2`, the time modulus.
pub fn gate_model(config: &ExperimentConfig) -> Result<(), CliError> {
    let report = check_structure(&config.model, config.tolerances.structure_samples, config.seed);
    if !report.passed {
        return Err(CliError::Validation(format!(
            "model fails the structure conditions (monotonicity margin {:e}, continuity margin {:e}, zero-flux margin {:e})",
            report.monotonicity_margin, report.continuity_margin, report.zero_flux_margin
        )));
    }
    if Regime::from_mu(config.mu)? == Regime::EllipticParametric {
        time_modulus_gate(&config.model, &config.cell_options())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyOutcome {
    pub rows: Vec<ReportRow>,
    pub diagnostics: Vec<CorrectorDiagnostics>,
    pub estimates: EstimateReport,
    pub quantization: f64,
    pub homogenized_solves: usize,
    pub fine_solves: usize,
}

fn write_partial(out: &Path, rows: &[ReportRow]) -> Result<(), CliError> {
    io::write_report(&out.join("report.csv"), rows)?;
    std::fs::write(out.join("convergence.svg"), plot::convergence_svg(rows)).map_err(|e| CliError::io(out, e))
}

/// Fine solves for every ε, one homogenized solve on the finest grid,
/// corrector assembly and remainder norms. Rows are flushed as they complete.
pub fn run_study(config: &ExperimentConfig, out: &Path) -> Result<StudyOutcome, CliError> {
    config.validate()?;
    io::ensure_dir(out)?;
    gate_model(config).map_err(|e| e.at("model gate"))?;
    let cell_opts = config.cell_options();
    let mut par_opts = config.parabolic_options();
    // checked once above
    par_opts.structure_samples = 0;

    let grids: Vec<SpaceTimeGrid> = config.epsilons.iter().map(|&e| config.fine_grid(e)).collect::<Result<_, _>>()?;
    let finest = *grids.last().expect("validated non-empty");
    for g in &grids {
        if !finest.n_x.is_multiple_of(g.n_x) {
            return Err(CliError::Validation(format!("grid n_x = {} does not divide the finest n_x = {}", g.n_x, finest.n_x)));
        }
    }

    let (table, reused) =
        cached_table(&out.join("tables"), &config.model, config.mu, config.lattice()?, &config.grids.cell, &cell_opts)
            .map_err(|e| e.at("tabulate"))?;
    info!("effective table: {} nodes{}", table.values.len(), if reused { " (reused)" } else { "" });
    let estimates = verify_b_estimates(&table, config.model.constants(), ESTIMATE_PAIRS, config.seed);
    io::write_json(&out.join("estimates.json"), &estimates)?;

    let hom =
        solve_homogenized(&config.problem, &table, &finest, &par_opts).map_err(|e| CliError::from(e).at("homogenized solve"))?;
    let homogenized_solves = 1;
    info!("homogenized solves: {homogenized_solves}");
    let energy_hom = energy_balance(&hom);

    let quantization = config.quantization.unwrap_or_else(|| 0.05 * (1.0 + hom.gradient.max_norm()));
    let mut cache = CellSolutionCache::new(config.model.clone(), config.mu, config.grids.cell, cell_opts, quantization)?
        .with_budget(config.cache_budget);

    let fines: Vec<(Result<SolveResult, homog_core::Error>, f64)> = grids
        .par_iter()
        .map(|g| {
            let t = Instant::now();
            let r = solve_fine(&config.problem, &config.model, g, &par_opts);
            (r, t.elapsed().as_secs_f64())
        })
        .collect();
    info!("fine solves: {}", fines.len());

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for ((grid, (fine, fine_time)), eps) in grids.iter().zip(fines).zip(&config.epsilons) {
        let stage = |name: &str| format!("{name} (epsilon = {eps})");
        let step = (|| -> Result<(ReportRow, CorrectorDiagnostics), CliError> {
            let fine = fine.map_err(|e| CliError::from(e).at(&stage("fine solve")))?;
            let t = Instant::now();
            let h = hom.restrict(grid).map_err(|e| CliError::from(e).at(&stage("restriction")))?;
            let averaged = mesh_average(&h.gradient, grid)?;
            let (field, entries) = corrector_parallel(&averaged, &mut cache).map_err(|e| e.at(&stage("corrector")))?;
            let (_, remainder_lp) = remainder(&fine, &field)?;
            let p = config.p();
            let row = ReportRow {
                epsilon: *eps,
                grad_error_lp: fine.gradient.sub(&h.gradient)?.lp_norm(p),
                averaged_error_lp: fine.gradient.sub(&averaged)?.lp_norm(p),
                remainder_lp,
                energy_residual_fine: energy_balance(&fine),
                energy_residual_hom: energy_hom,
                cell_cache_entries: entries,
                wall_time_s: fine_time + t.elapsed().as_secs_f64(),
            };
            let diag = homog_core::corrector_diagnostics(&cache, &field, config.model.constants());
            Ok((row, diag))
        })();
        match step {
            Ok((row, diag)) => {
                info!("epsilon = {eps}: remainder {:e}, gradient error {:e}", row.remainder_lp, row.grad_error_lp);
                rows.push(row);
                diagnostics.push(diag);
                write_partial(out, &rows)?;
            }
            Err(e) => {
                write_partial(out, &rows)?;
                return Err(e);
            }
        }
    }
    io::write_json(&out.join("diagnostics.json"), &diagnostics)?;
    Ok(StudyOutcome { rows, diagnostics, estimates, quantization, homogenized_solves, fine_solves: grids.len() })
}
