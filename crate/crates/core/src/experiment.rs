//! Monte Carlo sweeps over SNR and antenna count.
//!
//! Each `(geometry, SNR)` cell averages independent trials. A trial draws
//! its four channels from its own stream, designs the primary link, then
//! both secondary allocations. Trials whose cross channel fails the rank
//! guard are discarded and redrawn from a reserved index range, so the
//! result is a pure function of the grid and master seed regardless of
//! how many workers run it.

use rayon::prelude::*;

use crate::channel::{derive_stream, draw_channel_set, ChannelSet, TrialSeed};
use crate::error::{OiaError, Result};
use crate::primary::{design_primary, primary_rate, PrimaryDesign};
use crate::secondary::{
    build_precoder, interference_covariance, optimal_secondary, residual_interference,
    uniform_secondary, Precoder, SecondaryDesign, Whitening,
};

/// First trial index used for replacement draws.
pub const REPLACEMENT_BASE: u64 = 1 << 31;
/// Replacement draws attempted per trial before it is dropped.
pub const MAX_REPLACEMENTS: u64 = 8;

/// One `(nt, nr)` geometry swept over a list of SNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub nt: usize,
    pub nr: usize,
    /// SNR values `p_max / sigma2` in dB, strictly increasing.
    pub snr_db_list: Vec<f64>,
    pub trials: usize,
    pub sigma2: f64,
    pub master_seed: u64,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 || self.nr == 0 {
            return Err(OiaError::InvalidInput("antenna counts must be positive".into()));
        }
        if self.nr < self.nt {
            return Err(OiaError::UnsupportedGeometry { nr: self.nr, nt: self.nt });
        }
        if self.trials == 0 {
            return Err(OiaError::InvalidInput("trials must be at least 1".into()));
        }
        if self.snr_db_list.is_empty() {
            return Err(OiaError::InvalidInput("SNR list is empty".into()));
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return Err(OiaError::InvalidInput("SNR values must be finite".into()));
        }
        if self.snr_db_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(OiaError::InvalidInput("SNR list must be strictly increasing".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(OiaError::InvalidInput(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }
}

/// `sigma2 * 10^(snr_db / 10)`.
pub fn power_budget(snr_db: f64, sigma2: f64) -> f64 {
    sigma2 * 10f64.powf(snr_db / 10.0)
}

/// Inclusive SNR range `min, min + step, ...` up to `max`.
pub fn snr_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err(OiaError::InvalidInput("SNR range bounds must be finite".into()));
    }
    if step <= 0.0 {
        return Err(OiaError::InvalidInput(format!("SNR step must be positive, got {step}")));
    }
    if min > max {
        return Err(OiaError::InvalidInput(format!("empty SNR range: min {min} > max {max}")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((min + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Everything designed for one channel realization.
#[derive(Debug, Clone)]
pub struct TrialAnalysis {
    pub primary: PrimaryDesign,
    pub precoder: Precoder,
    pub uniform: SecondaryDesign,
    pub optimal: SecondaryDesign,
    pub rate_primary: f64,
    pub residual_uniform: f64,
    pub residual_optimal: f64,
}

/// Per-trial quantities that get averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub unused_modes: usize,
    pub rate_primary: f64,
    pub rate_secondary_uniform: f64,
    pub rate_secondary_optimal: f64,
}

impl TrialAnalysis {
    pub fn record(&self) -> TrialRecord {
        TrialRecord {
            unused_modes: self.primary.unused_count,
            rate_primary: self.rate_primary,
            rate_secondary_uniform: self.uniform.rate,
            rate_secondary_optimal: self.optimal.rate,
        }
    }
}

/// Runs the full primary and secondary design chain on given channels.
pub fn analyze_channels(channels: &ChannelSet, p_max: f64, sigma2: f64) -> Result<TrialAnalysis> {
    let primary = design_primary(&channels.h11, p_max, sigma2)?;
    let precoder = build_precoder(&channels.h12, &primary.svd.u, &primary.p1_bar)?;
    let q = interference_covariance(&channels.h21, &primary.svd.v, &primary.p1.powers, sigma2);
    let whitening = Whitening::new(q, sigma2)?;
    let uniform = uniform_secondary(&precoder, &whitening, &channels.h22, p_max)?;
    let optimal = optimal_secondary(&precoder, &whitening, &channels.h22, p_max)?;

    let active = primary.active_modes();
    let residual = |d: &SecondaryDesign| {
        residual_interference(&primary.svd.u, &channels.h12, &d.precoder(), &d.p2, &active)
    };
    let residual_uniform = residual(&uniform);
    let residual_optimal = residual(&optimal);
    Ok(TrialAnalysis {
        rate_primary: primary_rate(&primary),
        primary,
        precoder,
        uniform,
        optimal,
        residual_uniform,
        residual_optimal,
    })
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub nt: usize,
    pub nr: usize,
    pub snr_db: f64,
    pub sigma2: f64,
    pub master_seed: u64,
    /// Position of the cell in the sweep; keys the trial streams.
    pub grid_index: u64,
}

impl Cell {
    pub fn p_max(&self) -> f64 {
        power_budget(self.snr_db, self.sigma2)
    }

    pub fn channels(&self, trial_index: u64) -> ChannelSet {
        let seed = TrialSeed::new(self.master_seed, self.grid_index, trial_index);
        draw_channel_set(self.nr, self.nt, &mut derive_stream(seed))
    }
}

/// Result of one trial slot, including any discarded draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    /// `None` when every replacement draw was discarded too.
    pub record: Option<TrialRecord>,
    pub discarded: usize,
}

/// Stream index of replacement draw `attempt` (1-based) for `trial_index`.
pub fn replacement_index(trial_index: u64, attempt: u64) -> u64 {
    debug_assert!((1..=MAX_REPLACEMENTS).contains(&attempt));
    REPLACEMENT_BASE + trial_index * MAX_REPLACEMENTS + (attempt - 1)
}

pub fn run_trial(cell: &Cell, trial_index: u64) -> Result<TrialOutcome> {
    let mut discarded = 0;
    for attempt in 0..=MAX_REPLACEMENTS {
        let index = if attempt == 0 {
            trial_index
        } else {
            replacement_index(trial_index, attempt)
        };
        match analyze_channels(&cell.channels(index), cell.p_max(), cell.sigma2) {
            Ok(analysis) => {
                return Ok(TrialOutcome {
                    record: Some(analysis.record()),
                    discarded,
                })
            }
            Err(e) if e.is_discardable() => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(TrialOutcome { record: None, discarded })
}

/// Averages of one sweep cell, with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub nt: usize,
    pub nr: usize,
    pub snr_db: f64,
    pub trials_used: usize,
    pub discarded_trials: usize,
    pub avg_unused_modes: f64,
    pub stderr_unused_modes: f64,
    pub avg_rate_primary: f64,
    pub stderr_rate_primary: f64,
    pub avg_rate_secondary_uniform: f64,
    pub stderr_rate_secondary_uniform: f64,
    pub avg_rate_secondary_optimal: f64,
    pub stderr_rate_secondary_optimal: f64,
}

/// Sample mean and standard error (sample std / sqrt(n)); zero error for n = 1.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregates outcomes in trial-index order.
pub fn aggregate(cell: &Cell, outcomes: &[TrialOutcome]) -> Result<ResultRow> {
    let records: Vec<TrialRecord> = outcomes.iter().filter_map(|o| o.record).collect();
    if records.is_empty() {
        return Err(OiaError::InvariantViolation(format!(
            "every trial discarded at nt={}, nr={}, snr={} dB",
            cell.nt, cell.nr, cell.snr_db
        )));
    }
    let column = |f: fn(&TrialRecord) -> f64| {
        let values: Vec<f64> = records.iter().map(f).collect();
        mean_and_stderr(&values)
    };
    let (avg_unused_modes, stderr_unused_modes) = column(|r| r.unused_modes as f64);
    let (avg_rate_primary, stderr_rate_primary) = column(|r| r.rate_primary);
    let (avg_rate_secondary_uniform, stderr_rate_secondary_uniform) = column(|r| r.rate_secondary_uniform);
    let (avg_rate_secondary_optimal, stderr_rate_secondary_optimal) = column(|r| r.rate_secondary_optimal);
    Ok(ResultRow {
        nt: cell.nt,
        nr: cell.nr,
        snr_db: cell.snr_db,
        trials_used: records.len(),
        discarded_trials: outcomes.iter().map(|o| o.discarded).sum(),
        avg_unused_modes,
        stderr_unused_modes,
        avg_rate_primary,
        stderr_rate_primary,
        avg_rate_secondary_uniform,
        stderr_rate_secondary_uniform,
        avg_rate_secondary_optimal,
        stderr_rate_secondary_optimal,
    })
}

fn run_cell(cell: &Cell, trials: usize) -> Result<ResultRow> {
    let outcomes: Vec<TrialOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cell, t))
        .collect::<Result<_>>()?;
    aggregate(cell, &outcomes)
}

/// Runs several grids as one sweep; cells are numbered consecutively
/// across grids in `(grid, snr)` order.
///
/// `workers = 0` uses one worker per available core.
pub fn run_grids(grids: &[ExperimentGrid], workers: usize) -> Result<Vec<ResultRow>> {
    for grid in grids {
        grid.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| OiaError::InvalidInput(format!("cannot start worker pool: {e}")))?;

    let mut rows = Vec::new();
    let mut grid_index = 0u64;
    for grid in grids {
        for &snr_db in &grid.snr_db_list {
            let cell = Cell {
                nt: grid.nt,
                nr: grid.nr,
                snr_db,
                sigma2: grid.sigma2,
                master_seed: grid.master_seed,
                grid_index,
            };
            rows.push(pool.install(|| run_cell(&cell, grid.trials))?);
            grid_index += 1;
        }
    }
    Ok(rows)
}

/// One row per SNR of `grid`.
pub fn run_grid(grid: &ExperimentGrid, workers: usize) -> Result<Vec<ResultRow>> {
    run_grids(std::slice::from_ref(grid), workers)
}

/// Square `n x n` grids for each antenna count, sharing the other settings.
pub fn square_sweep(antennas: &[usize], snr_db_list: &[f64], trials: usize, sigma2: f64, master_seed: u64) -> Vec<ExperimentGrid> {
    antennas
        .iter()
        .map(|&n| ExperimentGrid {
            nt: n,
            nr: n,
            snr_db_list: snr_db_list.to_vec(),
            trials,
            sigma2,
            master_seed,
        })
        .collect()
}
