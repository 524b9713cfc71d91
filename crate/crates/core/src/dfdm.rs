//! Dynamic FDM for a strong near user.
//!
//! The near user pushes its lowest used frequency (the cutoff `f_c`) as high
//! as its rate target allows, then spends the least power that still reaches
//! the target above the cutoff. Everything below the cutoff is left clean for
//! the far user.

use serde::Serialize;

use crate::channel::{ChannelMatrixSet, FrequencyGrid, NoiseProfile};
use crate::error::{Error, Result};
use crate::game::{self, PowerAllocation, StrategyMode};
use crate::region::{RateRegionCurve, RegionPoint};
use crate::waterfilling::{
    effective_noise, iterate_iwf, ra_solution, waterfill_fm, waterfill_ra, EffectiveNoise,
    IwfOptions, IwfUser, RATE_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfdmResult {
    /// First tone the near user may use.
    pub cutoff: usize,
    /// Lower edge of the cutoff tone; the grid end when no tone is used.
    pub cutoff_hz: f64,
    pub allocation: PowerAllocation,
    /// Rate against the effective noise the allocation was computed for.
    pub rate: f64,
    pub feasible: bool,
}

/// Full-budget rate-adaptive rate over tones `>= cutoff`.
fn rate_above(
    eff: &EffectiveNoise,
    cutoff: usize,
    budget: f64,
    grid: &FrequencyGrid,
) -> Result<f64> {
    let restricted = eff.restricted_from(cutoff);
    Ok(match ra_solution(&restricted, budget, grid)? {
        Some((_, p)) => restricted.rate(&p, grid),
        None => 0.0,
    })
}

/// Largest cutoff whose upper band still carries `target` with the whole
/// budget. Binary search on the monotone achievable rate.
pub fn cutoff_for(
    eff: &EffectiveNoise,
    target: f64,
    budget: f64,
    grid: &FrequencyGrid,
) -> Result<usize> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::invalid(format!(
            "target rate must be non-negative, got {target}"
        )));
    }
    let k = eff.num_tones();
    if target == 0.0 {
        return Ok(k);
    }
    let max_rate = rate_above(eff, 0, budget, grid)?;
    let needed = target * (1.0 - RATE_TOLERANCE);
    if max_rate < needed {
        return Err(Error::Infeasible { target, max_rate });
    }
    // rate_above(lo) >= needed, rate_above(hi) < needed
    let (mut lo, mut hi) = (0usize, k);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if rate_above(eff, mid, budget, grid)? >= needed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Cutoff for `near_user` against the interference of `allocs` (the near
/// user's own entry is ignored).
pub fn find_cutoff(
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    near_user: usize,
    allocs: &[PowerAllocation],
    target: f64,
    budget: f64,
    gap: f64,
) -> Result<usize> {
    let eff = effective_noise(near_user, allocs, channel, noise, gap)?;
    cutoff_for(&eff, target, budget, channel.grid())
}

/// Cutoff search followed by fixed-margin water-filling above the cutoff.
pub fn dfdm_allocate_for(
    eff: &EffectiveNoise,
    target: f64,
    budget: f64,
    grid: &FrequencyGrid,
) -> Result<DfdmResult> {
    let cutoff = cutoff_for(eff, target, budget, grid)?;
    let restricted = eff.restricted_from(cutoff);
    let allocation = if target == 0.0 {
        PowerAllocation::zeros(eff.user, eff.num_tones(), budget, StrategyMode::AtMostPower)
    } else {
        let fm = waterfill_fm(&restricted, budget, target, grid);
        match fm {
            Ok(a) => a,
            // the cutoff search allows a relative slack on the target
            Err(Error::Infeasible { .. }) => {
                let mut a = waterfill_ra(&restricted, budget, grid)?;
                a.mode = StrategyMode::AtMostPower;
                a
            }
            Err(e) => return Err(e),
        }
    };
    let rate = restricted.rate(&allocation.powers, grid);
    Ok(DfdmResult {
        cutoff,
        cutoff_hz: grid.edges()[cutoff],
        allocation,
        rate,
        feasible: true,
    })
}

pub fn dfdm_allocate(
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    near_user: usize,
    allocs: &[PowerAllocation],
    target: f64,
    budget: f64,
    gap: f64,
) -> Result<DfdmResult> {
    let eff = effective_noise(near_user, allocs, channel, noise, gap)?;
    dfdm_allocate_for(&eff, target, budget, channel.grid())
}

/// Outcome of one sweep target for one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub target: f64,
    pub rates: Vec<f64>,
    pub allocations: Vec<PowerAllocation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSweep {
    pub near_user: usize,
    pub dfdm: Vec<SweepPoint>,
    pub fmiwf: Vec<SweepPoint>,
}

impl RegionSweep {
    pub fn far_user(&self) -> usize {
        1 - self.near_user
    }

    fn curve(&self, method: &str, points: &[SweepPoint]) -> Result<RateRegionCurve> {
        let (near, far) = (self.near_user, self.far_user());
        RateRegionCurve::new(
            method,
            points
                .iter()
                .map(|p| RegionPoint::exact(p.rates[near], p.rates[far]))
                .collect(),
        )
    }

    /// `(R2, R1)` = (near-user rate, far-user rate) curves: DFDM, FM-IWF.
    pub fn curves(&self) -> Result<[RateRegionCurve; 2]> {
        Ok([
            self.curve("dfdm", &self.dfdm)?,
            self.curve("fm-iwf", &self.fmiwf)?,
        ])
    }
}

/// One DFDM round: the far user water-fills alone, the near user runs DFDM
/// against it, then the far user answers once with rate-adaptive
/// water-filling.
pub fn dfdm_round(
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    near_user: usize,
    budgets: &[f64],
    target: f64,
    gap: f64,
) -> Result<SweepPoint> {
    check_two_users(channel, near_user, budgets)?;
    let far = 1 - near_user;
    let k = channel.num_tones();
    let mut allocs = vec![
        PowerAllocation::zeros(0, k, budgets[0], StrategyMode::FullPower),
        PowerAllocation::zeros(1, k, budgets[1], StrategyMode::FullPower),
    ];
    allocs[far] = waterfill_ra(
        &effective_noise(far, &allocs, channel, noise, gap)?,
        budgets[far],
        channel.grid(),
    )?;
    let d = dfdm_allocate(
        channel,
        noise,
        near_user,
        &allocs,
        target,
        budgets[near_user],
        gap,
    )?;
    allocs[near_user] = d.allocation;
    allocs[far] = waterfill_ra(
        &effective_noise(far, &allocs, channel, noise, gap)?,
        budgets[far],
        channel.grid(),
    )?;
    let rates = game::rates(&allocs, channel, noise, gap)?;
    Ok(SweepPoint {
        target,
        rates,
        allocations: allocs,
        cutoff: Some(d.cutoff),
        converged: true,
    })
}

/// FM-IWF at one target: the near user plays fixed-margin, the far user
/// rate-adaptive, from silence.
pub fn fmiwf_round(
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    near_user: usize,
    budgets: &[f64],
    target: f64,
    opts: &IwfOptions,
) -> Result<SweepPoint> {
    check_two_users(channel, near_user, budgets)?;
    let far = 1 - near_user;
    let mut users = [
        IwfUser::rate_adaptive(budgets[0]),
        IwfUser::rate_adaptive(budgets[1]),
    ];
    users[near_user] = IwfUser::fixed_margin(budgets[near_user], target);
    users[far] = IwfUser::rate_adaptive(budgets[far]);
    let report = iterate_iwf(channel, noise, &users, None, opts)?;
    if !report.converged {
        log::warn!(
            "FM-IWF at target {target} stopped after {} sweeps without converging",
            report.iterations
        );
    }
    Ok(SweepPoint {
        target,
        rates: report.rates,
        allocations: report.allocations,
        cutoff: None,
        converged: report.converged,
    })
}

fn check_two_users(channel: &ChannelMatrixSet, near_user: usize, budgets: &[f64]) -> Result<()> {
    if channel.num_users() != 2 || budgets.len() != 2 {
        return Err(Error::invalid("the DFDM sweep needs exactly two users"));
    }
    if near_user > 1 {
        return Err(Error::invalid(format!(
            "near user {near_user} out of range"
        )));
    }
    Ok(())
}

/// DFDM and FM-IWF over a sweep of near-user targets. Targets either method
/// cannot reach are skipped for that method.
pub fn dfdm_vs_fmiwf_region(
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    near_user: usize,
    budgets: &[f64],
    targets: &[f64],
    opts: &IwfOptions,
) -> Result<RegionSweep> {
    let mut sweep = RegionSweep {
        near_user,
        dfdm: Vec::new(),
        fmiwf: Vec::new(),
    };
    for &t in targets {
        match dfdm_round(channel, noise, near_user, budgets, t, opts.gap) {
            Ok(p) => sweep.dfdm.push(p),
            Err(Error::Infeasible { .. }) => log::debug!("DFDM cannot reach {t}"),
            Err(e) => return Err(e),
        }
        match fmiwf_round(channel, noise, near_user, budgets, t, opts) {
            Ok(p) => sweep.fmiwf.push(p),
            Err(Error::Infeasible { .. }) => log::debug!("FM-IWF cannot reach {t}"),
            Err(e) => return Err(e),
        }
    }
    Ok(sweep)
}

/// Largest rate the near user reaches alone with its whole budget.
pub fn max_near_rate(
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    near_user: usize,
    budgets: &[f64],
    gap: f64,
) -> Result<f64> {
    check_two_users(channel, near_user, budgets)?;
    let k = channel.num_tones();
    let silent = vec![
        PowerAllocation::zeros(0, k, budgets[0], StrategyMode::FullPower),
        PowerAllocation::zeros(1, k, budgets[1], StrategyMode::FullPower),
    ];
    let eff = effective_noise(near_user, &silent, channel, noise, gap)?;
    rate_above(&eff, 0, budgets[near_user], channel.grid())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::nearfar_two_band_channel;
    use crate::nearfar::{solve_lambda, NearFarParams};

    fn unit_grid(k: usize) -> FrequencyGrid {
        FrequencyGrid::new((0..=k).map(|x| x as f64).collect()).unwrap()
    }

    #[test]
    fn cutoff_examples() {
        let grid = unit_grid(4);
        let eff = EffectiveNoise::from_values(0, &[1e-6; 4]).unwrap();
        assert_eq!(cutoff_for(&eff, 0.0, 4.0, &grid).unwrap(), 4);
        let full = rate_above(&eff, 0, 4.0, &grid).unwrap();
        assert_eq!(cutoff_for(&eff, full, 4.0, &grid).unwrap(), 0);
        let c = cutoff_for(&eff, full / 2.0, 4.0, &grid).unwrap();
        assert_eq!(c, 2);
        assert!(matches!(
            cutoff_for(&eff, full * 1.01, 4.0, &grid),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn allocate_examples() {
        let grid = unit_grid(4);
        let eff = EffectiveNoise::from_values(0, &[0.01, 0.02, 0.05, 0.1]).unwrap();
        let r = dfdm_allocate_for(&eff, 0.0, 1.0, &grid).unwrap();
        assert_eq!(r.cutoff_hz, 4.0);
        assert!(r.allocation.powers.iter().all(|&p| p == 0.0));

        let ra = waterfill_ra(&eff, 1.0, &grid).unwrap();
        let full = eff.rate(&ra.powers, &grid);
        let r = dfdm_allocate_for(&eff, full, 1.0, &grid).unwrap();
        assert_eq!(r.cutoff, 0);
        for (a, b) in r.allocation.powers.iter().zip(&ra.powers) {
            assert!((a - b).abs() < 1e-9);
        }

        let r = dfdm_allocate_for(&eff, full * 0.4, 1.0, &grid).unwrap();
        assert!(r.cutoff > 0);
        assert!(r.allocation.powers[..r.cutoff].iter().all(|&p| p == 0.0));
        assert!((r.rate - full * 0.4).abs() <= 1e-9 * full);
    }

    #[test]
    fn near_user_stays_in_band_two_when_it_can() {
        let c = nearfar_two_band_channel(0.05, 0.5, 0.0, 0.0, 0.0).unwrap();
        let n = NoiseProfile::flat(2, 2, 0.01).unwrap();
        let band2_only = (1.0f64 + 1.0 / 0.01).log2();
        let p = dfdm_round(&c, &n, 1, &[1.0, 1.0], band2_only * 0.9, 1.0).unwrap();
        assert_eq!(p.allocations[1].powers[0], 0.0);
        let free = (1.0f64 + 0.05 / 0.01).log2();
        assert!((p.rates[0] - free).abs() < 1e-12);
    }

    #[test]
    fn band_one_share_tracks_lambda() {
        let params = NearFarParams::new(0.05, 0.5, 0.0, 1.0, 1e-3, 1e-3);
        let (c, n) = params.channel().unwrap();
        let (c, n) = (c.refine(&[32, 32]).unwrap(), n.refine(&[32, 32]).unwrap());
        for r2 in [8.0, 9.5, 12.0, 14.0] {
            let d = dfdm_round(&c, &n, 1, &[1.0, 1.0], r2, 1.0).unwrap();
            let used = (1.0 - c.grid().edges()[d.cutoff.unwrap()]).max(0.0);
            let lambda = solve_lambda(r2, &params).unwrap();
            assert!(
                (used - lambda).abs() <= 1.0 / 32.0 + 1e-12,
                "{r2}: {used} vs {lambda}"
            );
        }
    }

    #[test]
    fn sweep_curves_and_coupling_free_case() {
        let c = nearfar_two_band_channel(0.05, 0.0, 0.0, 0.0, 0.0).unwrap();
        let n = NoiseProfile::flat(2, 2, 0.01).unwrap();
        let targets = [2.0, 6.0, 10.0];
        let s =
            dfdm_vs_fmiwf_region(&c, &n, 1, &[1.0, 1.0], &targets, &IwfOptions::default()).unwrap();
        let [d, f] = s.curves().unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(f.len(), 3);
        for (a, b) in d.points.iter().zip(&f.points) {
            assert!((a.r1() - b.r1()).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_targets_are_skipped() {
        let c = nearfar_two_band_channel(0.05, 0.5, 0.0, 0.0, 0.0).unwrap();
        let n = NoiseProfile::flat(2, 2, 0.01).unwrap();
        let max = max_near_rate(&c, &n, 1, &[1.0, 1.0], 1.0).unwrap();
        let s = dfdm_vs_fmiwf_region(
            &c,
            &n,
            1,
            &[1.0, 1.0],
            &[1.0, max * 2.0],
            &IwfOptions::default(),
        )
        .unwrap();
        assert_eq!(s.dfdm.len(), 1);
        assert_eq!(s.fmiwf.len(), 1);
    }

    #[test]
    fn cutoff_is_monotone_in_target() {
        let grid = unit_grid(16);
        let levels: Vec<f64> = (0..16).map(|k| 1e-3 * (1.0 + k as f64)).collect();
        let eff = EffectiveNoise::from_values(0, &levels).unwrap();
        let full = rate_above(&eff, 0, 1.0, &grid).unwrap();
        let mut prev = usize::MAX;
        for i in 0..=20 {
            let c = cutoff_for(&eff, full * i as f64 / 20.0, 1.0, &grid).unwrap();
            assert!(c <= prev);
            prev = c;
        }
    }
}
