//! Single-user water-filling and the iterative water-filling (IWF) loop.
//!
//! A user's view of the game is reduced to its effective noise
//! `N_i(k) = gap * (sum_{j != i} |h_ij(k)|^2 p_j(k) + n_i(k)) / |h_i(k)|^2`.
//! Water-filling then solves `max sum_k w_k log2(1 + p_k / N_k)` over the
//! tones. The optimum has a constant PSD level `mu` with
//! `p_k = max(0, w_k * mu - N_k)`, so the level and active set are found in
//! closed form after sorting tones by `N_k / w_k`.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMatrixSet, FrequencyGrid, NoiseProfile};
use crate::error::{Error, Result};
use crate::game::{
    self, check_allocations, interference_plus_noise, PowerAllocation, StrategyMode,
};

/// Relative slack when comparing an achieved rate against a target.
pub const RATE_TOLERANCE: f64 = 1e-12;

/// Effective noise of one user; `None` marks a tone with zero direct gain.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveNoise {
    pub user: usize,
    pub levels: Vec<Option<f64>>,
}

impl EffectiveNoise {
    pub fn new(user: usize, levels: Vec<Option<f64>>) -> Result<Self> {
        if let Some(v) = levels
            .iter()
            .flatten()
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::invalid(format!(
                "effective noise must be positive, got {v}"
            )));
        }
        Ok(Self { user, levels })
    }

    /// Every tone usable.
    pub fn from_values(user: usize, values: &[f64]) -> Result<Self> {
        Self::new(user, values.iter().copied().map(Some).collect())
    }

    pub fn num_tones(&self) -> usize {
        self.levels.len()
    }

    /// Keeps tones `>= first`; the rest become unusable.
    pub fn restricted_from(&self, first: usize) -> Self {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(k, v)| if k >= first { *v } else { None })
            .collect();
        Self {
            user: self.user,
            levels,
        }
    }

    /// `sum_k w_k log2(1 + p_k / N_k)` over usable tones.
    pub fn rate(&self, powers: &[f64], grid: &FrequencyGrid) -> f64 {
        self.levels
            .iter()
            .zip(powers)
            .enumerate()
            .filter_map(|(k, (n, p))| n.map(|n| grid.width(k) * (p / n).ln_1p()))
            .sum::<f64>()
            / std::f64::consts::LN_2
    }

    fn check_grid(&self, grid: &FrequencyGrid) -> Result<()> {
        if self.levels.len() != grid.num_tones() {
            return Err(Error::invalid(format!(
                "effective noise has {} tones, grid has {}",
                self.levels.len(),
                grid.num_tones()
            )));
        }
        Ok(())
    }

    /// Usable tones as `(k, N_k, w_k)` sorted by `N_k / w_k`.
    fn sorted_tones(&self, grid: &FrequencyGrid) -> Vec<(usize, f64, f64)> {
        let mut tones: Vec<(usize, f64, f64)> = self
            .levels
            .iter()
            .enumerate()
            .filter_map(|(k, n)| n.map(|n| (k, n, grid.width(k))))
            .collect();
        tones.sort_by(|a, b| (a.1 / a.2).total_cmp(&(b.1 / b.2)).then(a.0.cmp(&b.0)));
        tones
    }
}

pub fn effective_noise(
    user: usize,
    allocs: &[PowerAllocation],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    gap: f64,
) -> Result<EffectiveNoise> {
    check_allocations(allocs, channel, noise)?;
    if user >= channel.num_users() {
        return Err(Error::invalid(format!("user {user} out of range")));
    }
    if !(gap >= 1.0 && gap.is_finite()) {
        return Err(Error::invalid(format!("gap must be at least 1, got {gap}")));
    }
    let levels = (0..channel.num_tones())
        .map(|k| {
            let g = channel.direct(k, user);
            (g > 0.0).then(|| gap * interference_plus_noise(user, k, allocs, channel, noise) / g)
        })
        .collect();
    EffectiveNoise::new(user, levels)
}

fn materialize(eff: &EffectiveNoise, active: &[(usize, f64, f64)], level: f64) -> Vec<f64> {
    let mut powers = vec![0.0; eff.num_tones()];
    for &(k, n, w) in active {
        powers[k] = (w * level - n).max(0.0);
    }
    powers
}

/// Water level and powers of the rate-adaptive solution, or `None` when no
/// tone is usable.
pub fn ra_solution(
    eff: &EffectiveNoise,
    budget: f64,
    grid: &FrequencyGrid,
) -> Result<Option<(f64, Vec<f64>)>> {
    eff.check_grid(grid)?;
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::invalid(format!(
            "budget must be non-negative, got {budget}"
        )));
    }
    let tones = eff.sorted_tones(grid);
    if tones.is_empty() {
        return Ok(None);
    }
    let (mut sum_n, mut sum_w) = (0.0, 0.0);
    let mut level = 0.0;
    let mut active = 0;
    for (m, &(_, n, w)) in tones.iter().enumerate() {
        sum_n += n;
        sum_w += w;
        level = (budget + sum_n) / sum_w;
        active = m + 1;
        match tones.get(m + 1) {
            Some(&(_, n2, w2)) if n2 / w2 < level => continue,
            _ => break,
        }
    }
    Ok(Some((level, materialize(eff, &tones[..active], level))))
}

/// Rate-adaptive water-filling: spends the whole budget to maximize rate.
pub fn waterfill_ra(
    eff: &EffectiveNoise,
    budget: f64,
    grid: &FrequencyGrid,
) -> Result<PowerAllocation> {
    if budget == 0.0 {
        eff.check_grid(grid)?;
        return Ok(PowerAllocation::zeros(
            eff.user,
            eff.num_tones(),
            0.0,
            StrategyMode::FullPower,
        ));
    }
    let (_, powers) = ra_solution(eff, budget, grid)?.ok_or(Error::NoFeasibleAllocation)?;
    Ok(PowerAllocation::new(
        eff.user,
        powers,
        budget,
        StrategyMode::FullPower,
    ))
}

/// Fixed-margin water-filling: the least total power reaching `target`
/// bits/s, never more than `budget`.
pub fn waterfill_fm(
    eff: &EffectiveNoise,
    budget: f64,
    target: f64,
    grid: &FrequencyGrid,
) -> Result<PowerAllocation> {
    eff.check_grid(grid)?;
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::invalid(format!(
            "target rate must be non-negative, got {target}"
        )));
    }
    if target == 0.0 {
        return Ok(PowerAllocation::zeros(
            eff.user,
            eff.num_tones(),
            budget,
            StrategyMode::AtMostPower,
        ));
    }
    let ra = match ra_solution(eff, budget, grid)? {
        Some((_, p)) => p,
        None => {
            return Err(Error::Infeasible {
                target,
                max_rate: 0.0,
            })
        }
    };
    let max_rate = eff.rate(&ra, grid);
    if target >= max_rate {
        if target - max_rate <= RATE_TOLERANCE * target {
            return Ok(PowerAllocation::new(
                eff.user,
                ra,
                budget,
                StrategyMode::AtMostPower,
            ));
        }
        return Err(Error::Infeasible { target, max_rate });
    }

    // With the m cheapest tones active: sum w log2(mu w / N) = target.
    let tones = eff.sorted_tones(grid);
    let (mut sum_w, mut sum_wlog) = (0.0, 0.0);
    let mut log_level = 0.0;
    let mut active = 0;
    for (m, &(_, n, w)) in tones.iter().enumerate() {
        sum_w += w;
        sum_wlog += w * (n / w).log2();
        log_level = (target + sum_wlog) / sum_w;
        active = m + 1;
        match tones.get(m + 1) {
            Some(&(_, n2, w2)) if (n2 / w2).log2() < log_level => continue,
            _ => break,
        }
    }
    let powers = materialize(eff, &tones[..active], log_level.exp2());
    if powers.iter().sum::<f64>() > budget {
        return Ok(PowerAllocation::new(
            eff.user,
            ra,
            budget,
            StrategyMode::AtMostPower,
        ));
    }
    Ok(PowerAllocation::new(
        eff.user,
        powers,
        budget,
        StrategyMode::AtMostPower,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum UserMode {
    RateAdaptive,
    FixedMargin { target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IwfUser {
    pub budget: f64,
    pub mode: UserMode,
}

impl IwfUser {
    pub fn rate_adaptive(budget: f64) -> Self {
        Self {
            budget,
            mode: UserMode::RateAdaptive,
        }
    }

    pub fn fixed_margin(budget: f64, target: f64) -> Self {
        Self {
            budget,
            mode: UserMode::FixedMargin { target },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateSchedule {
    /// Users update in index order, each against the latest allocations.
    GaussSeidel,
    /// All users update against the previous sweep.
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IwfOptions {
    pub max_iter: usize,
    /// Stop once no per-tone power moves by more than `tol * max budget`.
    pub tol: f64,
    pub gap: f64,
    pub schedule: UpdateSchedule,
    pub record_history: bool,
}

impl Default for IwfOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
            gap: 1.0,
            schedule: UpdateSchedule::GaussSeidel,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IwfReport {
    pub allocations: Vec<PowerAllocation>,
    pub rates: Vec<f64>,
    pub iterations: usize,
    /// Largest per-tone power change of each sweep.
    pub changes: Vec<f64>,
    pub converged: bool,
    pub schedule: UpdateSchedule,
    /// Allocations after each sweep, when requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<Vec<PowerAllocation>>,
}

impl IwfReport {
    pub fn final_change(&self) -> f64 {
        self.changes.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn best_response(
    user: usize,
    spec: &IwfUser,
    allocs: &[PowerAllocation],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    gap: f64,
) -> Result<PowerAllocation> {
    let eff = effective_noise(user, allocs, channel, noise, gap)?;
    match spec.mode {
        UserMode::RateAdaptive => waterfill_ra(&eff, spec.budget, channel.grid()),
        UserMode::FixedMargin { target } => waterfill_fm(&eff, spec.budget, target, channel.grid()),
    }
}

/// Runs iterative water-filling until the allocations settle or `max_iter`
/// sweeps have run. Non-convergence is reported, not raised.
///
/// Without `initial`, every user starts silent.
pub fn iterate_iwf(
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    users: &[IwfUser],
    initial: Option<&[PowerAllocation]>,
    opts: &IwfOptions,
) -> Result<IwfReport> {
    if opts.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if users.len() != channel.num_users() {
        return Err(Error::invalid(format!(
            "{} user specs for {} users",
            users.len(),
            channel.num_users()
        )));
    }
    let k = channel.num_tones();
    let mut allocs: Vec<PowerAllocation> = match initial {
        Some(init) => init.to_vec(),
        None => users
            .iter()
            .enumerate()
            .map(|(i, u)| PowerAllocation::zeros(i, k, u.budget, StrategyMode::FullPower))
            .collect(),
    };
    check_allocations(&allocs, channel, noise)?;

    let scale = users.iter().map(|u| u.budget).fold(0.0, f64::max);
    let mut changes = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let previous = allocs.clone();
        for (i, spec) in users.iter().enumerate() {
            let view = match opts.schedule {
                UpdateSchedule::GaussSeidel => &allocs,
                UpdateSchedule::Jacobi => &previous,
            };
            let next = best_response(i, spec, view, channel, noise, opts.gap)?;
            allocs[i] = next;
        }
        let change = allocs
            .iter()
            .zip(&previous)
            .flat_map(|(a, b)| a.powers.iter().zip(&b.powers).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        changes.push(change);
        if opts.record_history {
            history.push(allocs.clone());
        }
        if change <= opts.tol * scale {
            converged = true;
            break;
        }
    }
    let rates = game::rates(&allocs, channel, noise, opts.gap)?;
    Ok(IwfReport {
        allocations: allocs,
        rates,
        iterations: changes.len(),
        changes,
        converged,
        schedule: opts.schedule,
        history,
    })
}
