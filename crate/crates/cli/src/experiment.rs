//! Seeded experiment orchestration.
//!
//! Each sweep cell (seed, σ², M) is an independent UBeR run. Reflectivities
//! and the initial waveform depend only on the seed, so every σ² value and
//! every IRS-count prefix within a seed share the same draw.

use std::time::Instant;

use irsradar_core::scene::{build_channels, draw_reflectivities};
use irsradar_core::{SceneConfig, UberConfig, UberInit, UberResult};
use rayon::prelude::*;
use thiserror::Error;

use crate::output::ResultRow;
use crate::spec::{ExperimentSpec, SweepSpec};

pub const WORKERS_ENV: &str = "IRSRADAR_WORKERS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("run failed (seed {seed}, sigma2 {sigma2}, M {m_count}): {source}")]
    Cell {
        seed: u64,
        sigma2: f64,
        m_count: usize,
        source: irsradar_core::Error,
    },
    #[error("spec does not describe a {expected} experiment")]
    WrongMode { expected: &'static str },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    seed: u64,
    sigma2: f64,
    m_count: usize,
}

/// Worker count from `IRSRADAR_WORKERS`, falling back to the number of cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs UBeR once for one cell.
pub fn run_cell(
    base: &SceneConfig,
    uber: &UberConfig,
    seed: u64,
    sigma2: f64,
    m_count: usize,
) -> irsradar_core::Result<UberResult> {
    let mut scene = base.with_irs_count(m_count)?;
    scene.noise_variance = sigma2;
    scene.seed = seed;
    let channels = build_channels(&scene)?;
    let alpha = draw_reflectivities(base.n_irs(), seed).truncated(m_count);
    let init = UberInit::standard(&scene, seed);
    irsradar_core::uber::run_uber(&scene, &channels, &alpha, uber, &init)
}

fn execute(
    spec: &ExperimentSpec,
    cells: Vec<Cell>,
    trace: bool,
) -> Result<Vec<ResultRow>, RunError> {
    let scene = spec.scene_config();
    let uber = spec.uber_config();
    let job = |cell: &Cell| -> Result<Vec<ResultRow>, RunError> {
        let start = Instant::now();
        let result =
            run_cell(&scene, &uber, cell.seed, cell.sigma2, cell.m_count).map_err(|source| {
                RunError::Cell {
                    seed: cell.seed,
                    sigma2: cell.sigma2,
                    m_count: cell.m_count,
                    source,
                }
            })?;
        let elapsed = spec
            .record_timing
            .then(|| start.elapsed().as_secs_f64() * 1e3);
        let row = |outer_iter, fisher: f64, crlb: f64| ResultRow {
            seed: cell.seed,
            sigma2: cell.sigma2,
            m_count: cell.m_count,
            outer_iter,
            fisher,
            crlb,
            wall_time_ms: elapsed,
        };
        Ok(if trace {
            result
                .fisher_trace
                .iter()
                .zip(&result.crlb_trace)
                .enumerate()
                .map(|(i, (&f, &c))| row(Some(i), f, c))
                .collect()
        } else {
            vec![row(None, result.final_fisher(), result.final_crlb())]
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let per_cell: Vec<Vec<ResultRow>> =
        pool.install(|| cells.par_iter().map(job).collect::<Result<_, _>>())?;
    let mut rows: Vec<ResultRow> = per_cell.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.seed
            .cmp(&b.seed)
            .then(a.sigma2.total_cmp(&b.sigma2))
            .then(a.m_count.cmp(&b.m_count))
            .then(a.outer_iter.cmp(&b.outer_iter))
    });
    Ok(rows)
}

/// One final row per seed × σ² × IRS count.
pub fn run_sigma_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, RunError> {
    let SweepSpec::Sigma { sigma2, irs_counts } = &spec.sweep else {
        return Err(RunError::WrongMode { expected: "sigma" });
    };
    let counts = irs_counts
        .clone()
        .unwrap_or_else(|| vec![spec.scene.irs_list.len()]);
    let mut cells = Vec::new();
    for seed in spec.seeds() {
        for &s in sigma2 {
            for &m_count in &counts {
                cells.push(Cell {
                    seed,
                    sigma2: s,
                    m_count,
                });
            }
        }
    }
    execute(spec, cells, false)
}

/// One final row per seed × IRS count at the scene noise variance.
pub fn run_irs_count_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, RunError> {
    let SweepSpec::IrsCount { irs_counts } = &spec.sweep else {
        return Err(RunError::WrongMode {
            expected: "irs_count",
        });
    };
    let cells = spec
        .seeds()
        .flat_map(|seed| {
            irs_counts.iter().map(move |&m_count| Cell {
                seed,
                sigma2: spec.scene.noise_variance,
                m_count,
            })
        })
        .collect();
    execute(spec, cells, false)
}

/// Rows for outer iterations `0..=Γ₁` per seed, all IRS platforms.
pub fn run_trace(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, RunError> {
    if spec.sweep != SweepSpec::Trace {
        return Err(RunError::WrongMode { expected: "trace" });
    }
    let cells = spec
        .seeds()
        .map(|seed| Cell {
            seed,
            sigma2: spec.scene.noise_variance,
            m_count: spec.scene.irs_list.len(),
        })
        .collect();
    execute(spec, cells, true)
}

/// Dispatches on the sweep mode.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, RunError> {
    match spec.sweep {
        SweepSpec::Sigma { .. } => run_sigma_sweep(spec),
        SweepSpec::IrsCount { .. } => run_irs_count_sweep(spec),
        SweepSpec::Trace => run_trace(spec),
    }
}
