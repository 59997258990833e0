//! Exact water-filling over parallel channels.
//!
//! Maximizes `sum_n log2(1 + p_n / g_n)` subject to `sum_n p_n = budget`,
//! `p_n >= 0`, where `g_n` is the inverse gain (noise over channel power)
//! of mode `n`. The solution is `p_n = max(0, level - g_n)`; the level is
//! found in closed form over the active set, so excluded modes receive an
//! exact zero.

use crate::error::{OiaError, Result};

/// Diagonal power allocation with its water level.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Per-mode powers, in the order of the input inverse gains.
    pub powers: Vec<f64>,
    /// Lagrangian water level.
    pub water_level: f64,
    /// Number of strictly positive powers.
    pub active_count: usize,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Achieved `sum_n log2(1 + p_n / g_n)` for the given inverse gains.
    pub fn rate(&self, inverse_gains: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(inverse_gains)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &g)| (p / g).ln_1p())
            .sum::<f64>()
            / std::f64::consts::LN_2
    }
}

/// Water-fills `budget` over modes with the given inverse gains.
///
/// Inverse gains must be positive; `+inf` marks a mode that can carry no
/// power. At least one must be finite.
pub fn waterfill(inverse_gains: &[f64], budget: f64) -> Result<PowerAllocation> {
    if inverse_gains.is_empty() {
        return Err(OiaError::InvalidInput("water-filling needs at least one mode".into()));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(OiaError::InvalidInput(format!(
            "water-filling budget must be positive and finite, got {budget}"
        )));
    }
    if let Some(bad) = inverse_gains.iter().find(|g| g.is_nan() || **g <= 0.0) {
        return Err(OiaError::InvalidInput(format!(
            "inverse gains must be positive, got {bad}"
        )));
    }

    // Stable sort: equal inverse gains keep input order.
    let mut order: Vec<usize> = (0..inverse_gains.len())
        .filter(|&n| inverse_gains[n].is_finite())
        .collect();
    if order.is_empty() {
        return Err(OiaError::InvalidInput("every inverse gain is infinite".into()));
    }
    order.sort_by(|&a, &b| inverse_gains[a].total_cmp(&inverse_gains[b]));

    let mut active = 1;
    let mut floor_sum = inverse_gains[order[0]];
    let mut level = budget + floor_sum;
    while active < order.len() {
        let candidate = inverse_gains[order[active]];
        if candidate >= level {
            break;
        }
        floor_sum += candidate;
        active += 1;
        level = (budget + floor_sum) / active as f64;
    }

    let mut powers = vec![0.0; inverse_gains.len()];
    for &n in &order[..active] {
        powers[n] = (level - inverse_gains[n]).max(0.0);
    }
    let active_count = powers.iter().filter(|&&p| p > 0.0).count();
    Ok(PowerAllocation {
        powers,
        water_level: level,
        active_count,
    })
}
