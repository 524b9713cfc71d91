//! The Gaussian interference game: strategies, the rate payoff and Nash
//! verification.
//!
//! Interference is always treated as Gaussian noise; no successive
//! cancellation is modeled.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMatrixSet, NoiseProfile};
use crate::error::{Error, Result};
use crate::waterfilling::{effective_noise, waterfill_ra};

/// Relative slack used when checking a power budget.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// How a strategy relates to its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyMode {
    /// All power is spent (rate-adaptive play).
    FullPower,
    /// Up to the budget may be spent (fixed-margin play).
    AtMostPower,
}

/// One user's per-tone transmit powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub user: usize,
    pub powers: Vec<f64>,
    pub budget: f64,
    pub mode: StrategyMode,
}

impl PowerAllocation {
    pub fn new(user: usize, powers: Vec<f64>, budget: f64, mode: StrategyMode) -> Self {
        Self {
            user,
            powers,
            budget,
            mode,
        }
    }

    pub fn zeros(user: usize, num_tones: usize, budget: f64, mode: StrategyMode) -> Self {
        Self::new(user, vec![0.0; num_tones], budget, mode)
    }

    /// Spreads the budget evenly over all tones.
    pub fn flat(user: usize, num_tones: usize, budget: f64) -> Self {
        Self::new(
            user,
            vec![budget / num_tones as f64; num_tones],
            budget,
            StrategyMode::FullPower,
        )
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// A budget or sign problem found by [`validate_strategy`].
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyViolation {
    NegativePower { tone: usize, power: f64 },
    NonFinitePower { tone: usize },
    BudgetNotSpent { total: f64, budget: f64 },
    BudgetExceeded { total: f64, budget: f64 },
}

impl std::fmt::Display for StrategyViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NegativePower { tone, power } => {
                write!(f, "negative power {power} on tone {tone}")
            }
            Self::NonFinitePower { tone } => write!(f, "non-finite power on tone {tone}"),
            Self::BudgetNotSpent { total, budget } => write!(f, "sum {total} ≠ {budget}"),
            Self::BudgetExceeded { total, budget } => write!(f, "sum {total} > {budget}"),
        }
    }
}

/// Checks non-negativity and the budget under `mode`. Never fails; an empty
/// list means the strategy is admissible.
pub fn validate_strategy(alloc: &PowerAllocation, mode: StrategyMode) -> Vec<StrategyViolation> {
    let mut out = Vec::new();
    for (tone, &p) in alloc.powers.iter().enumerate() {
        if !p.is_finite() {
            out.push(StrategyViolation::NonFinitePower { tone });
        } else if p < 0.0 {
            out.push(StrategyViolation::NegativePower { tone, power: p });
        }
    }
    let total = alloc.total();
    let budget = alloc.budget;
    match mode {
        StrategyMode::FullPower => {
            if (total - budget).abs() > BUDGET_TOLERANCE * budget.abs().max(f64::MIN_POSITIVE) {
                out.push(StrategyViolation::BudgetNotSpent { total, budget });
            }
        }
        StrategyMode::AtMostPower => {
            if total > budget * (1.0 + BUDGET_TOLERANCE) {
                out.push(StrategyViolation::BudgetExceeded { total, budget });
            }
        }
    }
    out
}

pub(crate) fn check_allocations(
    allocs: &[PowerAllocation],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
) -> Result<()> {
    noise.check_dims(channel)?;
    if allocs.len() != channel.num_users() {
        return Err(Error::invalid(format!(
            "{} allocations for {} users",
            allocs.len(),
            channel.num_users()
        )));
    }
    for (i, a) in allocs.iter().enumerate() {
        if a.powers.len() != channel.num_tones() {
            return Err(Error::invalid(format!(
                "user {i} allocation has {} tones, channel has {}",
                a.powers.len(),
                channel.num_tones()
            )));
        }
    }
    Ok(())
}

fn check_gap(gap: f64) -> Result<()> {
    if !(gap >= 1.0 && gap.is_finite()) {
        return Err(Error::invalid(format!("gap must be at least 1, got {gap}")));
    }
    Ok(())
}

/// Interference plus noise seen by `user` on tone `k`.
#[inline]
pub(crate) fn interference_plus_noise(
    user: usize,
    k: usize,
    allocs: &[PowerAllocation],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
) -> f64 {
    let interference: f64 = allocs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != user)
        .map(|(j, a)| channel.coupling(k, user, j) * a.powers[k])
        .sum();
    interference + noise.get(user, k)
}

/// Per-tone SINR of `user`, including the gap.
pub fn sinr(
    user: usize,
    allocs: &[PowerAllocation],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    gap: f64,
) -> Result<Vec<f64>> {
    check_allocations(allocs, channel, noise)?;
    check_gap(gap)?;
    if user >= channel.num_users() {
        return Err(Error::invalid(format!("user {user} out of range")));
    }
    Ok((0..channel.num_tones())
        .map(|k| {
            channel.direct(k, user) * allocs[user].powers[k]
                / (gap * interference_plus_noise(user, k, allocs, channel, noise))
        })
        .collect())
}

/// Rate of `user` in bits/s: `sum_k width_k * log2(1 + SINR_k)`.
pub fn capacity(
    user: usize,
    allocs: &[PowerAllocation],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    gap: f64,
) -> Result<f64> {
    let s = sinr(user, allocs, channel, noise, gap)?;
    let grid = channel.grid();
    Ok(s.iter()
        .enumerate()
        .map(|(k, x)| grid.width(k) * x.ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2)
}

/// Rates of every user.
pub fn rates(
    allocs: &[PowerAllocation],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    gap: f64,
) -> Result<Vec<f64>> {
    (0..channel.num_users())
        .map(|i| capacity(i, allocs, channel, noise, gap))
        .collect()
}

/// Rates and allocations at the end of a game run.
#[derive(Debug, Clone, Serialize)]
pub struct GameOutcome {
    pub rates: Vec<f64>,
    pub allocations: Vec<PowerAllocation>,
    pub iterations: usize,
    pub final_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashCheck {
    pub is_equilibrium: bool,
    /// Largest rate improvement any single user can obtain by deviating.
    pub worst_gain: f64,
    pub gains: Vec<f64>,
}

/// Checks that no user can raise its rate by more than
/// `tol * max(1, rate)` by water-filling its full budget against the others.
///
/// The check is the tolerance form of the usual "no profitable unilateral
/// deviation" condition; an exact tie counts as an equilibrium.
pub fn is_nash_equilibrium(
    allocs: &[PowerAllocation],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    gap: f64,
    tol: f64,
) -> Result<NashCheck> {
    check_allocations(allocs, channel, noise)?;
    let mut gains = Vec::with_capacity(allocs.len());
    let mut is_equilibrium = true;
    for i in 0..allocs.len() {
        let current = capacity(i, allocs, channel, noise, gap)?;
        let eff = effective_noise(i, allocs, channel, noise, gap)?;
        let gain = match waterfill_ra(&eff, allocs[i].budget, channel.grid()) {
            Ok(best) => {
                let mut trial = allocs.to_vec();
                trial[i] = best;
                capacity(i, &trial, channel, noise, gap)? - current
            }
            // nothing to deviate to
            Err(Error::NoFeasibleAllocation) => 0.0,
            Err(e) => return Err(e),
        };
        if gain > tol * current.max(1.0) {
            is_equilibrium = false;
        }
        gains.push(gain);
    }
    let worst_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(NashCheck {
        is_equilibrium,
        worst_gain,
        gains,
    })
}
