//! Sweeps over hidden-unit counts, constraint modes and repetitions on
//! generated teacher systems, reporting test R² per cell.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json};
use crate::par;
use crate::rnn::Activation;
use crate::synth::{generate_dataset, generate_system, Dataset, SystemSpec};
use crate::train::{evaluate, init_student, train, Constraint, TrainConfig};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Mixed into a repetition seed to get its dataset seed.
const DATA_SEED_SALT: u64 = 0x5eed_da7a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rnn,
    Contractive,
    Unitary,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rnn => "rnn",
            Mode::Contractive => "contractive",
            Mode::Unitary => "unitary",
        }
    }

    /// Units comparable to a general network: half the states for the
    /// orthogonal mode, all of them otherwise.
    pub fn adjusted_units(self, hidden: usize) -> f64 {
        match self {
            Mode::Unitary => hidden as f64 / 2.0,
            _ => hidden as f64,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" | "none" => Ok(Mode::Rnn),
            "contractive" => Ok(Mode::Contractive),
            "unitary" | "urnn" => Ok(Mode::Unitary),
            other => Err(Error::InvalidInput(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub mode: Mode,
    pub hidden_units: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Teacher spec; its seed is replaced by each repetition seed.
    pub system: SystemSpec,
    pub n_train: usize,
    pub n_test: usize,
    pub t_len: usize,
    pub snr_db: f64,
    pub grids: Vec<ModeGrid>,
    /// One teacher, dataset and student initialization per seed.
    pub seeds: Vec<u64>,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub contractive_cap: f64,
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    /// Small sweep: n=4 teacher, ε=0.05, T=200, 100/50 sequences, 3 seeds.
    pub fn desk() -> Self {
        ExperimentConfig {
            system: SystemSpec::new(4, 2, 2, 0.05, 0),
            n_train: 100,
            n_test: 50,
            t_len: 200,
            snr_db: 20.0,
            grids: vec![
                ModeGrid { mode: Mode::Rnn, hidden_units: vec![2, 4, 8] },
                ModeGrid { mode: Mode::Unitary, hidden_units: vec![4, 8, 16] },
            ],
            seeds: vec![0, 1, 2],
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.15,
            learning_rate: 0.01,
            batch_size: 10,
            contractive_cap: Constraint::DEFAULT_CAP,
            record_timing: false,
        }
    }

    /// Full-size sweep: ε=0.01, T=1000, 700/300 sequences, 30 seeds,
    /// general and contractive networks at 2..14 units and orthogonal ones
    /// at twice that.
    pub fn full() -> Self {
        let units: Vec<usize> = (1..=7).map(|k| 2 * k).collect();
        ExperimentConfig {
            system: SystemSpec::new(4, 2, 2, 0.01, 0),
            n_train: 700,
            n_test: 300,
            t_len: 1000,
            snr_db: 20.0,
            grids: vec![
                ModeGrid { mode: Mode::Rnn, hidden_units: units.clone() },
                ModeGrid { mode: Mode::Contractive, hidden_units: units.clone() },
                ModeGrid { mode: Mode::Unitary, hidden_units: units.iter().map(|u| 2 * u).collect() },
            ],
            seeds: (0..30).collect(),
            ..ExperimentConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.grids.is_empty() || self.grids.iter().any(|g| g.hidden_units.is_empty()) {
            return Err(Error::InvalidInput("every mode needs a nonempty hidden-unit grid".into()));
        }
        if self.grids.iter().flat_map(|g| &g.hidden_units).any(|&u| u == 0) {
            return Err(Error::InvalidInput("hidden units must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        if self.n_train == 0 || self.n_test == 0 || self.t_len == 0 {
            return Err(Error::InvalidInput("dataset sizes must be positive".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidInput("experiments need a finite SNR".into()));
        }
        self.train_config(Mode::Contractive, 1, 0).validate()
    }

    fn constraint(&self, mode: Mode) -> Constraint {
        match mode {
            Mode::Rnn => Constraint::None,
            Mode::Contractive => Constraint::Contractive { cap: self.contractive_cap },
            Mode::Unitary => Constraint::Unitary,
        }
    }

    pub fn train_config(&self, mode: Mode, hidden: usize, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(hidden, self.constraint(mode), seed);
        cfg.learning_rate = self.learning_rate;
        cfg.batch_size = self.batch_size;
        cfg.max_epochs = self.max_epochs;
        cfg.early_stop.patience = self.patience;
        cfg.early_stop.validation_fraction = self.validation_fraction;
        cfg.record_timing = self.record_timing;
        cfg
    }

    pub fn data_seed(seed: u64) -> u64 {
        seed ^ DATA_SEED_SALT
    }

    /// Teacher and dataset for one repetition.
    pub fn dataset(&self, seed: u64) -> Result<Dataset> {
        let spec = SystemSpec { seed, ..self.system.clone() };
        let sys = generate_system(&spec)?;
        generate_dataset(&sys.params, &spec, self.n_train, self.n_test, self.t_len, self.snr_db, Self::data_seed(seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub mode: Mode,
    pub hidden_units: usize,
    pub adjusted_units: f64,
    pub seed: u64,
    pub test_r2: Option<f64>,
    pub optimal_r2: Option<f64>,
    pub epochs: usize,
    pub wall_time: Option<f64>,
    /// Largest constraint residual over training (see `Constraint::residual`).
    pub max_constraint_residual: Option<f64>,
    /// `ok`, or the error that stopped the cell.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: Mode,
    pub hidden_units: usize,
    pub adjusted_units: f64,
    pub median_test_r2: Option<f64>,
    pub median_optimal_r2: Option<f64>,
    pub cells_ok: usize,
    pub cells_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
    pub summary: Vec<SummaryRow>,
    pub any_failed: bool,
}

impl ExperimentReport {
    pub fn summary_for(&self, mode: Mode, hidden: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.mode == mode && s.hidden_units == hidden)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

fn run_cell(cfg: &ExperimentConfig, data: &Dataset, mode: Mode, hidden: usize, seed: u64) -> Result<ExperimentRow> {
    let start = Instant::now();
    let tc = cfg.train_config(mode, hidden, seed);
    let init = init_student(hidden, cfg.system.m, cfg.system.p, Activation::Relu, &tc.constraint, seed)?;
    let (best, rep) = train(&init, data, &tc)?;
    let eval = evaluate(&best, data)?;
    let residual = rep.constraint_residual.iter().cloned().fold(rep.max_step_residual, f64::max);
    Ok(ExperimentRow {
        mode,
        hidden_units: hidden,
        adjusted_units: mode.adjusted_units(hidden),
        seed,
        test_r2: Some(eval.r2),
        optimal_r2: Some(eval.optimal_r2),
        epochs: rep.epochs_run,
        wall_time: cfg.record_timing.then(|| start.elapsed().as_secs_f64()),
        max_constraint_residual: Some(residual),
        status: "ok".into(),
    })
}

/// Runs every (mode, units, seed) cell. Cells run in parallel; a failing
/// cell is recorded in its row and the sweep continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let datasets = par::map_indexed(cfg.seeds.len(), |i| cfg.dataset(cfg.seeds[i]));
    let mut cells = Vec::new();
    for grid in &cfg.grids {
        for &h in &grid.hidden_units {
            for si in 0..cfg.seeds.len() {
                cells.push((grid.mode, h, si));
            }
        }
    }
    let mut rows = par::map_indexed(cells.len(), |i| {
        let (mode, hidden, si) = cells[i];
        let seed = cfg.seeds[si];
        let result = match &datasets[si] {
            Ok(data) => run_cell(cfg, data, mode, hidden, seed),
            Err(e) => Err(Error::InvalidInput(format!("dataset generation failed: {e}"))),
        };
        result.unwrap_or_else(|e| ExperimentRow {
            mode,
            hidden_units: hidden,
            adjusted_units: mode.adjusted_units(hidden),
            seed,
            test_r2: None,
            optimal_r2: None,
            epochs: 0,
            wall_time: None,
            max_constraint_residual: None,
            status: format!("error: {e}"),
        })
    });
    rows.sort_by_key(|r| (r.mode, r.hidden_units, r.seed));

    let mut summary = Vec::new();
    for grid in &cfg.grids {
        for &h in &grid.hidden_units {
            let cell: Vec<&ExperimentRow> = rows.iter().filter(|r| r.mode == grid.mode && r.hidden_units == h).collect();
            let mut r2: Vec<f64> = cell.iter().filter_map(|r| r.test_r2).collect();
            let mut opt: Vec<f64> = cell.iter().filter_map(|r| r.optimal_r2).collect();
            summary.push(SummaryRow {
                mode: grid.mode,
                hidden_units: h,
                adjusted_units: grid.mode.adjusted_units(h),
                median_test_r2: median(&mut r2),
                median_optimal_r2: median(&mut opt),
                cells_ok: r2.len(),
                cells_failed: cell.len() - r2.len(),
            });
        }
    }
    summary.sort_by_key(|s| (s.mode, s.hidden_units));
    let any_failed = rows.iter().any(|r| r.status != "ok");
    Ok(ExperimentReport { format_version: REPORT_FORMAT_VERSION, config: cfg.clone(), rows, summary, any_failed })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-form CSV, one line per cell.
pub fn rows_csv(rows: &[ExperimentRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header =
        ["mode", "hidden_units", "adjusted_units", "seed", "test_r2", "optimal_r2", "epochs", "wall_time", "status"];
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.mode.name().to_string(),
            r.hidden_units.to_string(),
            r.adjusted_units.to_string(),
            r.seed.to_string(),
            opt(r.test_r2),
            opt(r.optimal_r2),
            r.epochs.to_string(),
            opt(r.wall_time),
            r.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Per-cell medians.
pub fn summary_csv(summary: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "mode",
        "hidden_units",
        "adjusted_units",
        "median_test_r2",
        "median_optimal_r2",
        "cells_ok",
        "cells_failed",
    ])
    .map_err(csv_err)?;
    for s in summary {
        w.write_record([
            s.mode.name().to_string(),
            s.hidden_units.to_string(),
            s.adjusted_units.to_string(),
            opt(s.median_test_r2),
            opt(s.median_optimal_r2),
            s.cells_ok.to_string(),
            s.cells_failed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Writes `results.csv`, `summary.csv` and `report.json` into `dir`.
pub fn write_experiment(dir: &Path, report: &ExperimentReport) -> Result<()> {
    write_atomic(&dir.join("results.csv"), rows_csv(&report.rows)?.as_bytes())?;
    write_atomic(&dir.join("summary.csv"), summary_csv(&report.summary)?.as_bytes())?;
    write_json(&dir.join("report.json"), report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            system: SystemSpec::new(2, 1, 1, 0.1, 0),
            n_train: 20,
            n_test: 5,
            t_len: 30,
            grids: vec![
                ModeGrid { mode: Mode::Unitary, hidden_units: vec![2] },
                ModeGrid { mode: Mode::Rnn, hidden_units: vec![1, 2] },
            ],
            seeds: vec![4, 1],
            max_epochs: 3,
            ..ExperimentConfig::desk()
        }
    }

    #[test]
    fn shape_order_and_adjusted_units() {
        let rep = run_experiment(&tiny()).unwrap();
        assert_eq!(rep.rows.len(), 6);
        let keys: Vec<(Mode, usize, u64)> = rep.rows.iter().map(|r| (r.mode, r.hidden_units, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for r in &rep.rows {
            assert_eq!(r.status, "ok");
            let expect = if r.mode == Mode::Unitary { r.hidden_units as f64 / 2.0 } else { r.hidden_units as f64 };
            assert_eq!(r.adjusted_units, expect);
        }
        assert_eq!(rep.summary.len(), 3);
        let csv = rows_csv(&rep.rows).unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("mode,hidden_units,adjusted_units,seed,test_r2,optimal_r2,epochs,wall_time"));
    }

    #[test]
    fn rerun_is_identical() {
        let a = run_experiment(&tiny()).unwrap();
        let b = run_experiment(&tiny()).unwrap();
        assert_eq!(rows_csv(&a.rows).unwrap(), rows_csv(&b.rows).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn invalid_configs() {
        let mut c = tiny();
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.grids[0].hidden_units.clear();
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.contractive_cap = 1.2;
        assert!(c.validate().is_err());
    }
}
