//! Closed forms for the two-band near-far game.
//!
//! User I (the far, weak user) can only use band 1 and receives crosstalk
//! `beta` from user II. User II (the near, strong user, the "bully") has
//! both bands. Band 1 is `[[alpha, beta], [gamma, 1]]`, band 2 is
//! `[[0, delta], [epsilon, 1]]`.
//!
//! Two settings are covered:
//!
//! * Two unit-width bands with per-band noise `n1`, `n2` and a voluntary
//!   power backoff `tau` for user II: [`bully_power_split`],
//!   [`symmetric_nearfar_rates`], [`interference_min_p1`]. Widths are ignored
//!   here.
//! * Bands of width `w1`, `w2` with noise PSDs `n1`, `n2`: the FM-IWF bounds
//!   ([`rr_iwf_bounds`]) and the dynamic-FDM analysis ([`solve_lambda`],
//!   [`dfdm_r1`], [`dfdm_rate_bounds`]).
//!
//! `delta` and `epsilon` are carried for channel construction but the closed
//! forms ignore them.

use serde::{Deserialize, Serialize};

use crate::channel::{nearfar_two_band_channel, ChannelMatrixSet, FrequencyGrid, NoiseProfile};
use crate::error::{Error, Result};
use crate::region::{RateRegionCurve, RegionPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearFarParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// Power budget of each user.
    pub power: f64,
    pub n1: f64,
    pub n2: f64,
    #[serde(default = "one")]
    pub w1: f64,
    #[serde(default = "one")]
    pub w2: f64,
    #[serde(default = "one")]
    pub tau: f64,
}

fn one() -> f64 {
    1.0
}

impl NearFarParams {
    /// Unit bands, no band-2 crosstalk, no backoff.
    pub fn new(alpha: f64, beta: f64, gamma: f64, power: f64, n1: f64, n2: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            delta: 0.0,
            epsilon: 0.0,
            power,
            n1,
            n2,
            w1: 1.0,
            w2: 1.0,
            tau: 1.0,
        }
    }

    pub fn with_widths(mut self, w1: f64, w2: f64) -> Self {
        self.w1 = w1;
        self.w2 = w2;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be a non-negative gain, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("power", self.power),
            ("n1", self.n1),
            ("n2", self.n2),
            ("w1", self.w1),
            ("w2", self.w2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// `w1 / (w1 + w2)`
    pub fn rho(&self) -> f64 {
        self.w1 / (self.w1 + self.w2)
    }

    /// The two-band channel with the configured widths and per-tone noise
    /// powers `n * w`.
    pub fn channel(&self) -> Result<(ChannelMatrixSet, NoiseProfile)> {
        self.validate()?;
        let grid = FrequencyGrid::new(vec![0.0, self.w1, self.w1 + self.w2])?;
        let channel =
            nearfar_two_band_channel(self.alpha, self.beta, self.gamma, self.delta, self.epsilon)?
                .with_grid(grid)?;
        let noise = NoiseProfile::new(vec![
            vec![self.n1 * self.w1, self.n1 * self.w2],
            vec![self.n2 * self.w1, self.n2 * self.w2],
        ])?;
        Ok((channel, noise))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSplit {
    pub p1: f64,
    pub p2: f64,
    /// `tau < gamma` forced `p1` to zero.
    pub clamped: bool,
}

/// User II's FM-IWF split of `tau * P` over the two unit bands:
/// `P1 = P (tau - gamma) / 2`, `P2 = P (tau + gamma) / 2`.
pub fn bully_power_split(p: &NearFarParams) -> Result<PowerSplit> {
    p.validate()?;
    if p.tau < p.gamma {
        log::warn!(
            "tau {} below gamma {}: band-1 power clamped to zero",
            p.tau,
            p.gamma
        );
        return Ok(PowerSplit {
            p1: 0.0,
            p2: p.tau * p.power,
            clamped: true,
        });
    }
    Ok(PowerSplit {
        p1: p.power * (p.tau - p.gamma) / 2.0,
        p2: p.power * (p.tau + p.gamma) / 2.0,
        clamped: false,
    })
}

/// `(C1, C2)` on unit bands when user II puts `p1`, `p2` in bands 1 and 2.
pub fn symmetric_nearfar_rates(p: &NearFarParams, p1: f64, p2: f64) -> Result<(f64, f64)> {
    p.validate()?;
    if !(p1 >= 0.0 && p2 >= 0.0) || p1 + p2 > p.power * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "band powers ({p1}, {p2}) must be non-negative with sum at most {}",
            p.power
        )));
    }
    let c1 = (1.0 + p.alpha * p.power / (p.beta * p1 + p.n1)).log2();
    let c2 = (1.0 + p1 / (p.n2 + p.gamma * p.power)).log2() + (1.0 + p2 / p.n2).log2();
    Ok((c1, c2))
}

/// The smallest band-1 power for which user II, now spending its full
/// budget, keeps the rate of the backed-off split. Clamped at zero.
pub fn interference_min_p1(p: &NearFarParams) -> Result<f64> {
    let split = bully_power_split(p)?;
    if p.tau == 1.0 {
        return Ok(split.p1);
    }
    let pw = p.power;
    let disc = pw * (1.0 - p.tau) * (pw + 4.0 * p.n2 + 2.0 * p.gamma * pw + pw * p.tau);
    let p1 = 0.5 * pw * (1.0 - p.gamma) - 0.5 * disc.sqrt();
    Ok(p1.clamp(0.0, split.p1))
}

/// `(P / (n2 w1))^rho (P / (n2 w2))^(1 - rho)`
pub fn geometric_mean_snr(p: &NearFarParams) -> Result<f64> {
    p.validate()?;
    let rho = p.rho();
    Ok((p.power / (p.n2 * p.w1)).powf(rho) * (p.power / (p.n2 * p.w2)).powf(1.0 - rho))
}

/// `rho^rho (1 - rho)^(1 - rho)`, between 1/2 and 1 on `[0, 1]`.
pub fn rho_factor(rho: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { x.powf(x) } else { 1.0 };
    term(rho) * term(1.0 - rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    FmIwf,
    Dfdm,
}

impl std::str::FromStr for BoundMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fmiwf" | "fm-iwf" => Ok(Self::FmIwf),
            "dfdm" => Ok(Self::Dfdm),
            other => Err(Error::invalid(format!(
                "unknown bound method `{other}` (expected fmiwf or dfdm)"
            ))),
        }
    }
}

/// Which modelling assumptions hold for a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundFlags {
    /// The backoff needed for `R2` leaves both bands at SNR at least 1, which
    /// the lower bound on user I's rate needs.
    pub lower_valid: bool,
    /// `R2` is reachable by user II within its budget.
    pub feasible: bool,
    /// `gamma * P` is below a tenth of the band-1 noise of user II.
    pub gamma_negligible: bool,
    /// Both bands have SNR `P / (n2 w)` of at least 100.
    pub high_snr: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBoundPair {
    pub lower: f64,
    pub upper: f64,
    pub method: BoundMethod,
    pub flags: BoundFlags,
    /// Point estimate, when the method has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
}

/// User I's rate when user II spends `tau * P` with a flat PSD.
pub fn fmiwf_r1(p: &NearFarParams, tau: f64) -> f64 {
    let interference = p.beta * p.rho() * tau * p.power;
    p.w1 * (1.0 + p.alpha * p.power / (interference + p.w1 * p.n1)).log2()
}

/// Backoff user II needs for rate `r2` with a flat PSD over both bands.
pub fn fmiwf_tau(p: &NearFarParams, r2: f64) -> f64 {
    let w = p.w1 + p.w2;
    ((r2 / w).exp2() - 1.0) * w * p.n2 / p.power
}

/// Bounds on user I's rate under FM-IWF when user II targets `r2`.
///
/// The backoff is sandwiched as `2^(x-1) / SNRbar <= tau <= 2^(x+1) / SNRbar`
/// with `x = r2 / (w1 + w2)`; the larger backoff gives the lower rate. The
/// lower bound relies on `x >= 1` and is flagged otherwise. The estimate
/// uses the unrelaxed `2^x / (SNRbar rho^rho (1-rho)^(1-rho))`.
pub fn rr_iwf_bounds(r2: f64, p: &NearFarParams) -> Result<RateBoundPair> {
    if !(r2 >= 0.0 && r2.is_finite()) {
        return Err(Error::invalid(format!("R2 must be non-negative, got {r2}")));
    }
    let snr_bar = geometric_mean_snr(p)?;
    let x = r2 / (p.w1 + p.w2);
    let tau_hi = ((x + 1.0).exp2() / snr_bar).min(1.0);
    let tau_lo = ((x - 1.0).exp2() / snr_bar).min(1.0);
    let tau_est = (x.exp2() / (snr_bar * rho_factor(p.rho()))).min(1.0);
    let flags = BoundFlags {
        lower_valid: x >= 1.0,
        feasible: fmiwf_tau(p, r2) <= 1.0,
        gamma_negligible: p.gamma * p.power <= 0.1 * p.n2 * p.w1,
        high_snr: p.power / (p.n2 * p.w1.max(p.w2)) >= 100.0,
    };
    Ok(RateBoundPair {
        lower: fmiwf_r1(p, tau_hi),
        upper: fmiwf_r1(p, tau_lo),
        method: BoundMethod::FmIwf,
        flags,
        estimate: Some(fmiwf_r1(p, tau_est)),
    })
}

/// `w2 log2(1 + P / (w2 n2))`: the largest `r2` user II reaches in band 2
/// alone, leaving band 1 clean for user I.
pub fn fdm_threshold_rate(p: &NearFarParams) -> Result<f64> {
    p.validate()?;
    Ok(p.w2 * (1.0 + p.power / (p.w2 * p.n2)).log2())
}

/// User I's rate with band 1 free of crosstalk.
pub fn interference_free_r1(p: &NearFarParams) -> f64 {
    p.w1 * (1.0 + p.alpha * p.power / (p.w1 * p.n1)).log2()
}

/// User II's rate with a flat PSD over band 2 and a `lambda` share of
/// band 1.
pub fn dfdm_r2(lambda: f64, p: &NearFarParams) -> f64 {
    let w = lambda * p.w1 + p.w2;
    w * (1.0 + p.power / (w * p.n2)).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `r2` is reachable with `lambda <= 1`.
    pub feasible: bool,
}

/// High-SNR bracket on the band-1 share user II needs under dynamic FDM.
pub fn dfdm_lambda_bounds(r2: f64, p: &NearFarParams) -> Result<LambdaBounds> {
    p.validate()?;
    if !(r2 >= 0.0 && r2.is_finite()) {
        return Err(Error::invalid(format!("R2 must be non-negative, got {r2}")));
    }
    let snr2 = p.power / p.n2;
    let raw_min = (r2 / (1.0 + snr2 / p.w2).log2() - p.w2) / p.w1;
    let raw_max = (r2 / (1.0 + snr2 / (p.w1 + p.w2)).log2() - p.w2) / p.w1;
    Ok(LambdaBounds {
        lambda_min: raw_min.clamp(0.0, 1.0),
        lambda_max: raw_max.clamp(0.0, 1.0),
        feasible: r2 <= dfdm_r2(1.0, p) * (1.0 + 1e-12),
    })
}

/// Band-1 share at which user II, spreading its budget flat, reaches `r2`.
pub fn solve_lambda(r2: f64, p: &NearFarParams) -> Result<f64> {
    p.validate()?;
    if !(r2 >= 0.0 && r2.is_finite()) {
        return Err(Error::invalid(format!("R2 must be non-negative, got {r2}")));
    }
    if r2 <= dfdm_r2(0.0, p) {
        return Ok(0.0);
    }
    let max_rate = dfdm_r2(1.0, p);
    if r2 > max_rate {
        if r2 - max_rate <= 1e-12 * r2 {
            return Ok(1.0);
        }
        return Err(Error::Infeasible {
            target: r2,
            max_rate,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if dfdm_r2(mid, p) < r2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// User I's rate when user II occupies a `lambda` share of band 1 with a
/// flat PSD. User I water-fills its budget over the clean part
/// (`1 - lambda`) and the shared part of band 1.
pub fn dfdm_r1(lambda: f64, p: &NearFarParams) -> Result<f64> {
    p.validate()?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let i = p.beta * p.power / (lambda * p.w1 + p.w2);
    if lambda == 0.0 {
        return Ok(interference_free_r1(p));
    }
    let base = p.power / p.w1;
    let (mut clean, mut shared) = (
        base + lambda * i / p.alpha,
        base - (1.0 - lambda) * i / p.alpha,
    );
    if shared <= 0.0 {
        shared = 0.0;
        clean = p.power / ((1.0 - lambda) * p.w1);
    }
    let clean_rate = (1.0 - lambda) * p.w1 * (1.0 + p.alpha * clean / p.n1).log2();
    let shared_rate = lambda * p.w1 * (1.0 + p.alpha * shared / (p.n1 + i)).log2();
    Ok(clean_rate + shared_rate)
}

/// Bounds on user I's rate under dynamic FDM, from the `lambda` bracket.
pub fn dfdm_rate_bounds(r2: f64, p: &NearFarParams) -> Result<RateBoundPair> {
    let lb = dfdm_lambda_bounds(r2, p)?;
    if !lb.feasible {
        return Err(Error::Infeasible {
            target: r2,
            max_rate: dfdm_r2(1.0, p),
        });
    }
    let estimate = dfdm_r1(solve_lambda(r2, p)?, p)?;
    Ok(RateBoundPair {
        lower: dfdm_r1(lb.lambda_max, p)?,
        upper: dfdm_r1(lb.lambda_min, p)?,
        method: BoundMethod::Dfdm,
        flags: BoundFlags {
            lower_valid: true,
            feasible: true,
            gamma_negligible: p.gamma * p.power <= 0.1 * p.n2 * p.w1,
            high_snr: p.power / (p.n2 * p.w1.max(p.w2)) >= 100.0,
        },
        estimate: Some(estimate),
    })
}

/// Backoff at which the unit-band split gives user II rate `r2`.
pub fn tau_for_rate(r2: f64, p: &NearFarParams) -> Result<f64> {
    let rate = |tau: f64| -> Result<f64> {
        let q = p.with_tau(tau);
        let s = bully_power_split(&q)?;
        Ok(symmetric_nearfar_rates(&q, s.p1, s.p2)?.1)
    };
    let max_rate = rate(1.0)?;
    if r2 > max_rate {
        return Err(Error::Infeasible {
            target: r2,
            max_rate,
        });
    }
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0f64);
    if rate(lo)? >= r2 {
        return Ok(lo);
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? < r2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Unit-band curves over an `r2` sweep: user I's rate under the FM-IWF
/// split, under the interference-minimizing split, and the dynamic-FDM
/// bounds. Points user II cannot reach are skipped.
pub fn compare_regions(p: &NearFarParams, r2_sweep: &[f64]) -> Result<[RateRegionCurve; 3]> {
    p.validate()?;
    let (mut fm, mut min, mut dfdm) = (Vec::new(), Vec::new(), Vec::new());
    for &r2 in r2_sweep {
        let tau = match tau_for_rate(r2, p) {
            Ok(t) => t,
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        let q = p.with_tau(tau);
        let split = bully_power_split(&q)?;
        let (c1, c2) = symmetric_nearfar_rates(&q, split.p1, split.p2)?;
        let p1_min = interference_min_p1(&q)?;
        let (c1_min, _) = symmetric_nearfar_rates(&q, p1_min, (p.power - p1_min).max(0.0))?;
        fm.push(RegionPoint::exact(c2, c1));
        min.push(RegionPoint::exact(c2, c1_min.max(c1)));
        match dfdm_rate_bounds(r2, p) {
            Ok(b) => dfdm.push(RegionPoint::bounded(r2, b.lower, b.upper)),
            Err(Error::Infeasible { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok([
        RateRegionCurve::new("fm-iwf", fm)?,
        RateRegionCurve::new("interference-min", min)?,
        RateRegionCurve::new("dfdm", dfdm)?,
    ])
}

/// One row of the analytic region sweep; missing values are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub r2: f64,
    pub fmiwf: Option<RateBoundPair>,
    pub dfdm: Option<RateBoundPair>,
}

pub fn region_sweep(p: &NearFarParams, r2_sweep: &[f64]) -> Result<Vec<SweepRow>> {
    r2_sweep
        .iter()
        .map(|&r2| {
            let fm = rr_iwf_bounds(r2, p)?;
            let dfdm = match dfdm_rate_bounds(r2, p) {
                Ok(b) => Some(b),
                Err(Error::Infeasible { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                r2,
                fmiwf: fm.flags.feasible.then_some(fm),
                dfdm,
            })
        })
        .collect()
}

/// CSV `r2,fmiwf_lo,fmiwf_hi,dfdm_lo,dfdm_hi`; missing values are empty.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r2", "fmiwf_lo", "fmiwf_hi", "dfdm_lo", "dfdm_hi"])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.r2.to_string(),
            cell(r.fmiwf.map(|b| b.lower)),
            cell(r.fmiwf.map(|b| b.upper)),
            cell(r.dfdm.map(|b| b.lower)),
            cell(r.dfdm.map(|b| b.upper)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn example() -> NearFarParams {
        NearFarParams::new(0.01, 0.5, 0.0, 1.0, 0.01, 0.01)
    }

    #[test]
    fn split_examples() {
        let s = bully_power_split(&example()).unwrap();
        assert_eq!((s.p1, s.p2), (0.5, 0.5));
        let p = NearFarParams::new(0.01, 0.5, 0.1, 1.0, 0.01, 0.01);
        let s = bully_power_split(&p).unwrap();
        assert!(close(s.p1, 0.45, 1e-15) && close(s.p2, 0.55, 1e-15));
        let s = bully_power_split(&p.with_tau(0.1)).unwrap();
        assert!(s.p1 == 0.0 && close(s.p2, 0.1, 1e-15) && !s.clamped);
        let s = bully_power_split(&p.with_tau(0.05)).unwrap();
        assert!(s.clamped && s.p1 == 0.0);
    }

    #[test]
    fn rate_examples() {
        let p = example();
        let (c1, c2) = symmetric_nearfar_rates(&p, 0.5, 0.5).unwrap();
        assert!(close(c1, (1.0f64 + 0.01 / 0.26).log2(), 1e-12));
        assert!(close(c1, 0.054_447, 1e-6));
        assert!(close(c2, 2.0 * 51f64.log2(), 1e-12));
        let (c1, _) = symmetric_nearfar_rates(&p, 0.0, 1.0).unwrap();
        assert!(close(c1, 2f64.log2(), 1e-12));
        assert!(symmetric_nearfar_rates(&p, 0.7, 0.7).is_err());

        let swapped = symmetric_nearfar_rates(&p, 0.3, 0.6).unwrap().1;
        assert!(close(
            swapped,
            symmetric_nearfar_rates(&p, 0.6, 0.3).unwrap().1,
            1e-12
        ));
        let g = NearFarParams::new(0.01, 0.5, 0.2, 1.0, 0.01, 0.01);
        let a = symmetric_nearfar_rates(&g, 0.3, 0.6).unwrap().1;
        assert!((a - symmetric_nearfar_rates(&g, 0.6, 0.3).unwrap().1).abs() > 1e-3);
    }

    #[test]
    fn interference_min_examples() {
        assert_eq!(interference_min_p1(&example()).unwrap(), 0.5);
        let p = example().with_tau(0.6);
        let p1 = interference_min_p1(&p).unwrap();
        assert!(close(p1, 0.095_030_865_4, 1e-9), "{p1}");
        let s = bully_power_split(&p).unwrap();
        let before = symmetric_nearfar_rates(&p, s.p1, s.p2).unwrap().1;
        let after = symmetric_nearfar_rates(&p, p1, 1.0 - p1).unwrap().1;
        assert!(close(before, after, 1e-9));
        // a low enough backoff lets user II leave band 1 entirely
        assert_eq!(interference_min_p1(&example().with_tau(0.05)).unwrap(), 0.0);
    }

    #[test]
    fn geometric_mean_examples() {
        let p = NearFarParams::new(1.0, 0.0, 0.0, 10.0, 1.0, 1.0).with_widths(1.0, 3.0);
        assert!(close(
            geometric_mean_snr(&p).unwrap(),
            4.386_913_376_5,
            1e-9
        ));
        let q = NearFarParams::new(1.0, 0.0, 0.0, 10.0, 1.0, 1.0).with_widths(2.0, 2.0);
        assert!(close(geometric_mean_snr(&q).unwrap(), 5.0, 1e-12));
        let r = NearFarParams { power: 20.0, ..p };
        assert!(close(
            geometric_mean_snr(&r).unwrap(),
            2.0 * geometric_mean_snr(&p).unwrap(),
            1e-12
        ));
    }

    #[test]
    fn rho_factor_range() {
        assert_eq!(rho_factor(0.0), 1.0);
        assert!(close(rho_factor(0.5), 0.5, 1e-15));
        for i in 1..100 {
            let f = rho_factor(i as f64 / 100.0);
            assert!((0.5..=1.0).contains(&f));
        }
    }

    #[test]
    fn fmiwf_bounds_examples() {
        let p = NearFarParams::new(0.01, 0.5, 0.0, 1.0, 1e-4, 1e-4);
        assert!(close(geometric_mean_snr(&p).unwrap(), 1e4, 1e-8));
        let b = rr_iwf_bounds(10.0, &p).unwrap();
        // band-1 share rho = 1/2 of the backed-off power interferes
        let lo = (1.0f64 + 0.01 / (0.5 * 0.5 * 6.4e-3 + 1e-4)).log2();
        let hi = (1.0f64 + 0.01 / (0.5 * 0.5 * 1.6e-3 + 1e-4)).log2();
        assert!(
            close(b.lower, lo, 1e-12) && close(b.upper, hi, 1e-12),
            "{b:?}"
        );
        assert!(b.flags.lower_valid && b.flags.feasible);
        let est = b.estimate.unwrap();
        assert!(b.lower <= est && est <= b.upper);

        let b = rr_iwf_bounds(0.0, &p).unwrap();
        assert!(b.lower > 0.0 && b.lower <= b.upper && !b.flags.lower_valid);

        let free = NearFarParams { beta: 0.0, ..p };
        let b = rr_iwf_bounds(10.0, &free).unwrap();
        assert_eq!(b.lower, b.upper);
        assert!(close(b.upper, interference_free_r1(&free), 1e-12));
    }

    #[test]
    fn fdm_threshold_examples() {
        let p = NearFarParams::new(0.1, 0.5, 0.0, 15.0, 1.0, 1.0);
        assert!(close(fdm_threshold_rate(&p).unwrap(), 4.0, 1e-12));
        let free = NearFarParams { beta: 0.0, ..p };
        assert!(close(
            interference_free_r1(&p),
            rr_iwf_bounds(3.0, &free).unwrap().upper,
            1e-12
        ));
    }

    #[test]
    fn lambda_examples() {
        let p = NearFarParams::new(0.1, 0.5, 0.0, 15.0, 1.0, 1.0);
        let b = dfdm_lambda_bounds(4.0, &p).unwrap();
        assert_eq!(b.lambda_min, 0.0);
        let b = dfdm_lambda_bounds(6.0, &p).unwrap();
        assert!(close(b.lambda_min, 0.5, 1e-12));
        assert!(close(b.lambda_max, 6.0 / 8.5f64.log2() - 1.0, 1e-12));
        assert!(close(b.lambda_max, 0.943_3, 1e-4));
        let l = solve_lambda(6.0, &p).unwrap();
        assert!(close(l, 0.905_019_55, 1e-8), "{l}");
        assert!(b.lambda_min <= l && l <= b.lambda_max);
        assert_eq!(solve_lambda(dfdm_r2(0.0, &p), &p).unwrap(), 0.0);
        match solve_lambda(7.0, &p) {
            Err(Error::Infeasible { max_rate, .. }) => {
                assert!(close(max_rate, 2.0 * 8.5f64.log2(), 1e-12))
            }
            other => panic!("{other:?}"),
        }
        assert!(!dfdm_lambda_bounds(7.0, &p).unwrap().feasible);
    }

    #[test]
    fn dfdm_r1_endpoints() {
        let p = NearFarParams::new(0.1, 0.5, 0.0, 15.0, 1.0, 1.0);
        assert!(close(
            dfdm_r1(0.0, &p).unwrap(),
            (1.0f64 + 1.5).log2(),
            1e-12
        ));
        let at_one = (1.0f64 + 1.5 / (1.0 + 0.5 * 15.0 / 2.0)).log2();
        assert!(close(dfdm_r1(1.0, &p).unwrap(), at_one, 1e-12));
        assert!(dfdm_r1(1.5, &p).is_err());
    }

    #[test]
    fn dfdm_bounds_examples() {
        let p = NearFarParams::new(0.1, 0.5, 0.0, 15.0, 1.0, 1.0);
        let b = dfdm_rate_bounds(3.0, &p).unwrap();
        assert_eq!(b.lower, b.upper);
        assert!(close(b.upper, interference_free_r1(&p), 1e-12));
        let b = dfdm_rate_bounds(6.0, &p).unwrap();
        let mid = dfdm_r1(solve_lambda(6.0, &p).unwrap(), &p).unwrap();
        assert!(b.lower <= mid && mid <= b.upper);
        assert!(matches!(
            dfdm_rate_bounds(7.0, &p),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn compare_regions_shapes() {
        let p = NearFarParams::new(0.05, 0.5, 0.01, 1.0, 0.01, 0.01);
        let sweep: Vec<f64> = (1..=12).map(|i| i as f64).collect();
        let [fm, min, dfdm] = compare_regions(&p, &sweep).unwrap();
        assert_eq!(fm.len(), min.len());
        assert!(fm.len() < sweep.len());
        assert!(!dfdm.is_empty());
        for (a, b) in fm.points.iter().zip(&min.points) {
            assert!(b.r1() >= a.r1());
            assert!(close(a.r2, b.r2, 1e-9));
        }
        let free = NearFarParams { beta: 0.0, ..p };
        let [fm, min, _] = compare_regions(&free, &sweep).unwrap();
        for (a, b) in fm.points.iter().zip(&min.points) {
            assert_eq!(a.r1(), b.r1());
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let p = NearFarParams::new(0.1, 0.5, 0.0, 15.0, 1.0, 1.0);
        let rows = region_sweep(&p, &[3.0, 7.5]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "r2,fmiwf_lo,fmiwf_hi,dfdm_lo,dfdm_hi");
        assert!(lines[2].ends_with(",,,,"));
    }

    #[test]
    fn invalid_params() {
        let mut p = example();
        p.tau = 0.0;
        assert!(bully_power_split(&p).is_err());
        p = example();
        p.n2 = 0.0;
        assert!(geometric_mean_snr(&p).is_err());
    }

    proptest! {
        #[test]
        fn interference_min_never_raises_p1(
            gamma in 0.0f64..0.05,
            tau_frac in 0.01f64..0.99,
            n2 in 1e-3f64..0.1,
            power in 0.5f64..5.0,
        ) {
            let tau = gamma + (1.0 - gamma) * tau_frac;
            let p = NearFarParams { power, ..NearFarParams::new(0.05, 0.5, gamma, power, 0.01, n2) }.with_tau(tau);
            let s = bully_power_split(&p).unwrap();
            let p1 = interference_min_p1(&p).unwrap();
            prop_assert!(p1 <= s.p1);
            if p1 > 0.0 {
                let before = symmetric_nearfar_rates(&p, s.p1, s.p2).unwrap().1;
                let after = symmetric_nearfar_rates(&p, p1, power - p1).unwrap().1;
                prop_assert!((before - after).abs() < 1e-9);
            }
        }

        #[test]
        fn lambda_sandwich(
            w1 in 0.2f64..3.0,
            w2 in 0.2f64..3.0,
            snr_db in 15.0f64..40.0,
            frac in 0.0f64..1.0,
        ) {
            let p = NearFarParams::new(0.1, 0.5, 0.0, 1.0, 1.0, 10f64.powf(-snr_db / 10.0)).with_widths(w1, w2);
            let r2 = frac * dfdm_r2(1.0, &p);
            let b = dfdm_lambda_bounds(r2, &p).unwrap();
            let l = solve_lambda(r2, &p).unwrap();
            prop_assert!(b.lambda_min <= l + 1e-9 && l <= b.lambda_max + 1e-9, "{b:?} {l}");
        }

        #[test]
        fn dfdm_r1_decreasing(
            alpha in 0.01f64..1.0,
            beta in 0.0f64..1.0,
            w1 in 0.2f64..3.0,
            w2 in 0.2f64..3.0,
            n1 in 1e-4f64..1.0,
        ) {
            let p = NearFarParams::new(alpha, beta, 0.0, 1.0, n1, 0.01).with_widths(w1, w2);
            let mut prev = dfdm_r1(0.0, &p).unwrap();
            for i in 1..=100 {
                let r = dfdm_r1(i as f64 / 100.0, &p).unwrap();
                prop_assert!(r <= prev + 1e-12);
                prev = r;
            }
        }
    }
}
