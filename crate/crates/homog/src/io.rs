//! JSON and CSV formats of tables, ledgers, fields and reports.

use std::fs;
use std::path::{Path, PathBuf};

use homog_core::effective::TableProvenance;
use homog_core::parabolic::EnergyRow;
use homog_core::{CellSolution, DiscreteField, FluxTable, Lattice, Regime, SolveResult, Vector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Validation(format!("{}: key '{}': {}", path.display(), e.path(), e.inner())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn num(x: f64) -> String {
    // Display prints the shortest representation that parses back to the same bits
    format!("{x}")
}

/// Metadata half of a persisted table; node values live in the sibling CSV.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableMeta {
    mu: f64,
    p: f64,
    lattice: Lattice,
    provenance: TableProvenance,
    values: String,
}

/// Writes `<stem>.json` and `<stem>.csv`; returns the JSON path.
pub fn save_table(dir: &Path, stem: &str, table: &FluxTable) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let dim = table.dim();
    let mut w = csv_writer(&csv_path)?;
    let mut header = vec!["node".to_string()];
    header.extend((0..dim).map(|d| format!("xi_{d}")));
    header.extend((0..dim).map(|d| format!("b_{d}")));
    w.write_record(&header).map_err(|e| CliError::io(&csv_path, e))?;
    for (k, b) in table.values.iter().enumerate() {
        let xi = table.lattice.node(k);
        let mut row = vec![k.to_string()];
        row.extend(xi.as_slice().iter().map(|&x| num(x)));
        row.extend(b.as_slice().iter().map(|&x| num(x)));
        w.write_record(&row).map_err(|e| CliError::io(&csv_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&csv_path, e))?;
    let meta = TableMeta {
        mu: table.mu,
        p: table.p,
        lattice: table.lattice.clone(),
        provenance: table.provenance,
        values: format!("{stem}.csv"),
    };
    write_json(&json_path, &meta)?;
    Ok(json_path)
}

pub fn load_table(json_path: &Path) -> Result<FluxTable, CliError> {
    let meta: TableMeta = read_json(json_path)?;
    let csv_path = json_path.parent().unwrap_or(Path::new(".")).join(&meta.values);
    let dim = meta.lattice.dim();
    let mut r = csv::Reader::from_path(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    let mut values = vec![None; meta.lattice.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::io(&csv_path, e))?;
        let bad = |what: &str| CliError::Validation(format!("{}: {what} in row {:?}", csv_path.display(), rec.position()));
        if rec.len() != 1 + 2 * dim {
            return Err(bad("wrong column count"));
        }
        let node: usize = rec[0].parse().map_err(|_| bad("bad node index"))?;
        let b: Vec<f64> =
            (0..dim).map(|d| rec[1 + dim + d].parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad("bad value"))?;
        let slot = values.get_mut(node).ok_or_else(|| bad("node index out of range"))?;
        *slot = Some(Vector::from_slice(&b));
    }
    let values: Option<Vec<Vector>> = values.into_iter().collect();
    let values = values.ok_or_else(|| CliError::Validation(format!("{}: missing lattice nodes", csv_path.display())))?;
    Ok(FluxTable::from_values(meta.mu, meta.p, meta.lattice, meta.provenance, values)?)
}

pub fn write_ledger(path: &Path, ledger: &[EnergyRow]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "t", "dissipation", "l2_half_delta", "source_pairing", "residual"])
        .map_err(|e| CliError::io(path, e))?;
    for r in ledger {
        w.write_record([
            r.step.to_string(),
            num(r.t),
            num(r.dissipation),
            num(r.l2_half_delta),
            num(r.source_pairing),
            num(r.residual),
        ])
        .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Trajectory as `(t, node indices, u)` rows at every `stride`-th time level.
pub fn write_trajectory(path: &Path, result: &SolveResult, stride: usize) -> Result<(), CliError> {
    let mesh = result.mesh();
    let dim = result.grid.dim;
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string(), "i".to_string()];
    if dim == 2 {
        header.push("j".into());
    }
    header.push("u".into());
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    let stride = stride.max(1);
    let last = result.trajectory.len() - 1;
    for (k, u) in result.trajectory.iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let t = num(result.grid.time(k));
        for (node, v) in u.iter().enumerate() {
            let [i, j] = mesh.node_index(node);
            let mut row = vec![t.clone(), i.to_string()];
            if dim == 2 {
                row.push(j.to_string());
            }
            row.push(num(*v));
            w.write_record(&row).map_err(|e| CliError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Field samples as `(element indices, quadrature point, time index, components)` rows.
pub fn write_field(path: &Path, field: &DiscreteField, stride: usize) -> Result<(), CliError> {
    let grid = field.grid();
    let dim = grid.dim;
    let nq = grid.qp_per_element();
    let mut w = csv_writer(path)?;
    let mut header = vec!["i".to_string()];
    if dim == 2 {
        header.push("j".into());
    }
    header.extend(["q".to_string(), "k".to_string()]);
    header.extend((0..dim).map(|d| format!("v_{d}")));
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for k in (0..grid.n_t).step_by(stride.max(1)) {
        for g in 0..grid.n_qp() {
            let e = g / nq;
            let mut row = vec![(e % grid.n_x).to_string()];
            if dim == 2 {
                row.push((e / grid.n_x).to_string());
            }
            row.extend([(g % nq).to_string(), k.to_string()]);
            row.extend(field.get(k, g).as_slice().iter().map(|&x| num(x)));
            w.write_record(&row).map_err(|e| CliError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// JSON record of a cell solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub xi: Vec<f64>,
    pub regime: Regime,
    pub b: Vec<f64>,
    pub residual: f64,
    pub grid: homog_core::CellGrid,
}

impl From<&CellSolution> for CellRecord {
    fn from(s: &CellSolution) -> Self {
        CellRecord { xi: s.xi.to_vec(), regime: s.regime, b: s.b.to_vec(), residual: s.residual_norm, grid: s.grid }
    }
}

/// Nodal corrector per slice: `(slice, node indices, v, element-centre gradient)`.
pub fn write_cell_field(path: &Path, s: &CellSolution) -> Result<(), CliError> {
    let mesh = s.grid.mesh();
    let dim = s.grid.dim;
    let half = 0.5 * mesh.h();
    let mut w = csv_writer(path)?;
    let mut header = vec!["slice".to_string(), "i".to_string()];
    if dim == 2 {
        header.push("j".into());
    }
    header.push("v".into());
    header.extend((0..dim).map(|d| format!("grad_{d}")));
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for (k, v) in s.v.iter().enumerate() {
        for (node, val) in v.iter().enumerate() {
            let [i, j] = mesh.node_index(node);
            let centre: Vec<f64> = mesh.node_position(node).as_slice().iter().map(|x| x + half).collect();
            let g = mesh.gradient_at_point(v, &Vector::from_slice(&centre));
            let mut row = vec![k.to_string(), i.to_string()];
            if dim == 2 {
                row.push(j.to_string());
            }
            row.push(num(*val));
            row.extend(g.as_slice().iter().map(|&x| num(x)));
            w.write_record(&row).map_err(|e| CliError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub const REPORT_HEADER: [&str; 8] = [
    "epsilon",
    "grad_error_lp",
    "averaged_error_lp",
    "remainder_lp",
    "energy_residual_fine",
    "energy_residual_hom",
    "cell_cache_entries",
    "wall_time_s",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub epsilon: f64,
    pub grad_error_lp: f64,
    pub averaged_error_lp: f64,
    pub remainder_lp: f64,
    pub energy_residual_fine: f64,
    pub energy_residual_hom: f64,
    pub cell_cache_entries: usize,
    pub wall_time_s: f64,
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(REPORT_HEADER).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.write_record([
            num(r.epsilon),
            num(r.grad_error_lp),
            num(r.averaged_error_lp),
            num(r.remainder_lp),
            num(r.energy_residual_fine),
            num(r.energy_residual_hom),
            r.cell_cache_entries.to_string(),
            format!("{:.3}", r.wall_time_s),
        ])
        .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    if headers.iter().ne(REPORT_HEADER.iter().copied()) {
        return Err(CliError::Validation(format!("{}: unexpected report header", path.display())));
    }
    r.deserialize().collect::<Result<Vec<ReportRow>, _>>().map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use homog_core::effective::provenance;
    use homog_core::CellGrid;
    use homog_core::SolverOptions;

    fn row(eps: f64) -> ReportRow {
        ReportRow {
            epsilon: eps,
            grad_error_lp: 0.1 + eps,
            averaged_error_lp: 0.2,
            remainder_lp: eps / 3.0,
            energy_residual_fine: 1e-7,
            energy_residual_hom: 2.5e-9,
            cell_cache_entries: 12,
            wall_time_s: 1.23456,
        }
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let rows = vec![row(0.5), row(0.25)];
        write_report(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&REPORT_HEADER.join(",")));
        let back = read_report(&path).unwrap();
        assert_eq!(back[0].remainder_lp, rows[0].remainder_lp);
        assert_eq!(back[1].wall_time_s, 1.235);
    }

    #[test]
    fn report_with_other_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        fs::write(&path, "epsilon,error\n0.5,0.1\n").unwrap();
        assert!(matches!(read_report(&path), Err(CliError::Validation(_))));
    }

    #[test]
    fn table_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = CellGrid::new(2, 8, 2).unwrap();
        let lattice = Lattice::symmetric(2, 1.0, 0.5).unwrap();
        let values = (0..lattice.len()).map(|k| (1.0 / 3.0) * lattice.node(k)).collect();
        let table =
            FluxTable::from_values(2.0, 2.0, lattice, provenance(2.0, &grid, &SolverOptions::for_exponent(2.0)).unwrap(), values)
                .unwrap();
        let path = save_table(dir.path(), "t", &table).unwrap();
        assert_eq!(load_table(&path).unwrap(), table);
    }

    #[test]
    fn missing_file_is_io() {
        let err = read_report(Path::new("/nonexistent/report.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
