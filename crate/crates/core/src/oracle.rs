//! Brute-force centralized reference for small two-user instances.
//!
//! Every user's power on every tone is restricted to multiples of
//! `budget / (L - 1)` with the per-user total at most the budget. All joint
//! allocations are evaluated and the Pareto frontier of `(R2, R1)` is kept,
//! where `R1` is the rate of user 0 and `R2` the rate of user 1.

use serde::Serialize;

use crate::channel::{ChannelMatrixSet, NoiseProfile};
use crate::error::{Error, Result};
use crate::game::{PowerAllocation, StrategyMode};
use crate::region::{RateRegionCurve, RegionPoint};

/// Default limit on the number of joint allocations.
pub const DEFAULT_SEARCH_CAP: u128 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleOptions {
    /// Power levels per tone, including zero and the full budget.
    pub levels: usize,
    pub gap: f64,
    pub cap: u128,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            levels: 11,
            gap: 1.0,
            cap: DEFAULT_SEARCH_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub frontier: RateRegionCurve,
    /// Largest rate loss from rounding any feasible allocation down onto the
    /// level grid; comparisons against the frontier should allow this much.
    pub tolerance: f64,
    pub evaluated: u128,
    /// The allocation pair with the largest sum rate.
    pub best_sum: Vec<PowerAllocation>,
    pub best_sum_rate: f64,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of joint allocations enumerated for `tones` tones and `levels`
/// levels with two users.
pub fn search_space_size(tones: usize, levels: usize) -> u128 {
    let per_user = binomial((levels - 1 + tones) as u128, tones as u128);
    per_user.saturating_mul(per_user)
}

/// All level-index vectors of length `tones` summing to at most `max_sum`.
fn compositions(tones: usize, max_sum: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, left: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for v in 0..=remaining {
            prefix.push(v);
            rec(prefix, left - 1, remaining - v, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(tones), tones, max_sum, &mut out);
    out
}

/// Pareto frontier of `(r2, r1)` pairs, sorted by `r2`.
pub fn pareto_frontier(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut best_r1 = f64::NEG_INFINITY;
    for p in points {
        if p.1 > best_r1 {
            best_r1 = p.1;
            out.push(p);
        }
    }
    out.reverse();
    out
}

pub fn brute_force_pareto(
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    budgets: &[f64],
    opts: &OracleOptions,
) -> Result<OracleResult> {
    noise.check_dims(channel)?;
    if channel.num_users() != 2 || budgets.len() != 2 {
        return Err(Error::invalid("the oracle handles exactly two users"));
    }
    if opts.levels < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 power levels, got {}",
            opts.levels
        )));
    }
    if !(opts.gap >= 1.0 && opts.gap.is_finite()) {
        return Err(Error::invalid(format!(
            "gap must be at least 1, got {}",
            opts.gap
        )));
    }
    if let Some(b) = budgets.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::invalid(format!(
            "budget must be non-negative, got {b}"
        )));
    }
    let k = channel.num_tones();
    let size = search_space_size(k, opts.levels);
    if size > opts.cap {
        return Err(Error::SearchSpaceTooLarge {
            size,
            cap: opts.cap,
        });
    }

    let grid = channel.grid();
    let widths = grid.widths();
    let steps = [
        budgets[0] / (opts.levels - 1) as f64,
        budgets[1] / (opts.levels - 1) as f64,
    ];
    let shapes = compositions(k, opts.levels - 1);
    let powers: [Vec<Vec<f64>>; 2] = [0, 1].map(|u| {
        shapes
            .iter()
            .map(|s| s.iter().map(|&i| i as f64 * steps[u]).collect())
            .collect()
    });

    let rate = |user: usize, own: &[f64], other: &[f64]| -> f64 {
        let mut r = 0.0;
        for t in 0..k {
            let g = channel.direct(t, user);
            if g == 0.0 || own[t] == 0.0 {
                continue;
            }
            let denom =
                opts.gap * (channel.coupling(t, user, 1 - user) * other[t] + noise.get(user, t));
            r += widths[t] * (g * own[t] / denom).ln_1p();
        }
        r / std::f64::consts::LN_2
    };

    let mut points = Vec::with_capacity(shapes.len() * shapes.len());
    let (mut best, mut best_pair) = (f64::NEG_INFINITY, (0, 0));
    for (a, p0) in powers[0].iter().enumerate() {
        for (b, p1) in powers[1].iter().enumerate() {
            let r1 = rate(0, p0, p1);
            let r2 = rate(1, p1, p0);
            if r1 + r2 > best {
                best = r1 + r2;
                best_pair = (a, b);
            }
            points.push((r2, r1));
        }
    }

    let tolerance = (0..2)
        .map(|u| {
            (0..k)
                .map(|t| {
                    widths[t]
                        * (channel.direct(t, u) * steps[u] / (opts.gap * noise.get(u, t))).ln_1p()
                })
                .sum::<f64>()
                / std::f64::consts::LN_2
        })
        .fold(0.0, f64::max);

    let frontier = RateRegionCurve::new(
        "oracle",
        pareto_frontier(points)
            .into_iter()
            .map(|(r2, r1)| RegionPoint::exact(r2, r1))
            .collect(),
    )?
    .with_param("levels", opts.levels as f64);

    let best_sum = vec![
        PowerAllocation::new(
            0,
            powers[0][best_pair.0].clone(),
            budgets[0],
            StrategyMode::AtMostPower,
        ),
        PowerAllocation::new(
            1,
            powers[1][best_pair.1].clone(),
            budgets[1],
            StrategyMode::AtMostPower,
        ),
    ];
    Ok(OracleResult {
        frontier,
        tolerance,
        evaluated: size,
        best_sum,
        best_sum_rate: best,
    })
}

/// Writes the frontier as `r2,r1` rows.
pub fn write_frontier_csv<W: std::io::Write>(curve: &RateRegionCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r2", "r1"])?;
    for p in &curve.points {
        w.write_record([p.r2.to_string(), p.r1().to_string()])?;
    }
    w.flush()?;
    Ok(())
}
