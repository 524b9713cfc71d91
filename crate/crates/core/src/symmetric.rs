//! Closed-form analysis of the symmetric two-user, two-band game.
//!
//! Both users have unit power, both bands carry `[[1, h], [h, 1]]` and the
//! noise per band is `1 / snr`. Each user either keeps to its own band (FDM)
//! or water-fills against the other (IWF), which gives four payoffs:
//! Temptation, Reward, Penalty and Naive. Their ordering splits the `(h, snr)`
//! plane into a deadlock region (A), a prisoner's dilemma (B) and a game of
//! chicken (C).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance to a threshold below which a gain counts as on it.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffQuad {
    pub t: f64,
    pub r: f64,
    pub p: f64,
    pub n: f64,
    pub h: f64,
    pub snr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameRegion {
    /// `T > P > R > N`
    Deadlock,
    /// `T > R > P > N`
    PrisonersDilemma,
    /// `T > R > N > P`
    Chicken,
}

impl GameRegion {
    pub fn letter(self) -> char {
        match self {
            Self::Deadlock => 'A',
            Self::PrisonersDilemma => 'B',
            Self::Chicken => 'C',
        }
    }

    pub fn ordering(self) -> &'static str {
        match self {
            Self::Deadlock => "T>P>R>N",
            Self::PrisonersDilemma => "T>R>P>N",
            Self::Chicken => "T>R>N>P",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Deadlock => "deadlock",
            Self::PrisonersDilemma => "prisoners-dilemma",
            Self::Chicken => "chicken",
        }
    }
}

impl std::fmt::Display for GameRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.name(), self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub region: GameRegion,
    /// Set when `h` sits on one of the thresholds.
    pub boundary: bool,
    pub h_lim1: f64,
    pub h_lim2: f64,
}

/// Per-user choice in the discrete game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Fdm,
    Iwf,
}

impl Strategy {
    fn index(self) -> usize {
        match self {
            Self::Fdm => 0,
            Self::Iwf => 1,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fdm => "FDM",
            Self::Iwf => "IWF",
        })
    }
}

fn check_domain(h: f64, snr: f64) -> Result<()> {
    if !(0.0..1.0).contains(&h) {
        return Err(Error::invalid(format!("h must lie in [0, 1), got {h}")));
    }
    check_snr(snr)
}

fn check_snr(snr: f64) -> Result<()> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::invalid(format!(
            "snr must be positive and finite, got {snr}"
        )));
    }
    Ok(())
}

/// User I's rate when it puts `alpha` of its power in band 2 and user II
/// puts `beta` of its power in band 1.
pub fn user1_rate(alpha: f64, beta: f64, h: f64, snr: f64) -> f64 {
    let s = 1.0 / snr;
    0.5 * (1.0 + (1.0 - alpha) / (s + beta * h)).log2()
        + 0.5 * (1.0 + alpha / (s + (1.0 - beta) * h)).log2()
}

pub fn payoff_quad(h: f64, snr: f64) -> Result<PayoffQuad> {
    check_domain(h, snr)?;
    let s = 1.0 / snr;
    Ok(PayoffQuad {
        t: 0.5 * (1.0 + (1.0 + h) / 2.0 / s).log2()
            + 0.5 * (1.0 + (1.0 - h) / 2.0 / (s + h)).log2(),
        r: 0.5 * (1.0 + 1.0 / s).log2(),
        p: (1.0 + 0.5 / (s + 0.5 * h)).log2(),
        n: 0.5 * (1.0 + 1.0 / (s + h * (1.0 - h) / 2.0)).log2(),
        h,
        snr,
    })
}

/// Below this gain mutual water-filling beats FDM (`P > R`).
pub fn h_lim1(snr: f64) -> Result<f64> {
    check_snr(snr)?;
    Ok(((1.0 + snr).sqrt() - 1.0) / snr)
}

fn lim2_cubic(h: f64, s: f64) -> f64 {
    ((h + 0.5 + 2.0 * s) * h - 0.5) * h - s
}

/// Above this gain the naive payoff beats the penalty (`N > P`).
///
/// The defining cubic is negative at 0 and positive at 1 for every
/// `snr > 0`, so bisection always brackets the root.
pub fn h_lim2(snr: f64) -> Result<f64> {
    check_snr(snr)?;
    let s = 1.0 / snr;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if lim2_cubic(mid, s) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Residual of the cubic at `h`.
pub fn h_lim2_residual(h: f64, snr: f64) -> f64 {
    lim2_cubic(h, 1.0 / snr)
}

fn on_threshold(h: f64, lim: f64) -> bool {
    (h - lim).abs() <= BOUNDARY_TOLERANCE * lim.max(1e-300)
}

pub fn classify_game(h: f64, snr: f64) -> Result<Classification> {
    check_domain(h, snr)?;
    let lim1 = h_lim1(snr)?;
    let lim2 = h_lim2(snr)?;
    let boundary = on_threshold(h, lim1) || on_threshold(h, lim2);
    let region = if boundary {
        GameRegion::PrisonersDilemma
    } else if h < lim1 {
        GameRegion::Deadlock
    } else if h < lim2 {
        GameRegion::PrisonersDilemma
    } else {
        GameRegion::Chicken
    };
    Ok(Classification {
        region,
        boundary,
        h_lim1: lim1,
        h_lim2: lim2,
    })
}

/// Ordering of the payoffs as a string such as `"T>R>P>N"`, largest first.
/// Ties are written with `=`.
pub fn payoff_ordering(q: &PayoffQuad) -> String {
    let mut items = [('T', q.t), ('R', q.r), ('P', q.p), ('N', q.n)];
    items.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out = String::new();
    for (i, (name, v)) in items.iter().enumerate() {
        if i > 0 {
            out.push(if *v == items[i - 1].1 { '=' } else { '>' });
        }
        out.push(*name);
    }
    out
}

/// Region read directly off the payoff ordering, or `None` for any other
/// ordering (including ties).
pub fn region_from_payoffs(q: &PayoffQuad) -> Option<GameRegion> {
    match payoff_ordering(q).as_str() {
        "T>P>R>N" => Some(GameRegion::Deadlock),
        "T>R>P>N" => Some(GameRegion::PrisonersDilemma),
        "T>R>N>P" => Some(GameRegion::Chicken),
        _ => None,
    }
}

/// The six pairwise conditions, each evaluated by direct comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrderingConditions {
    /// `T > R`
    pub a: bool,
    /// `T > P`
    pub b: bool,
    /// `R > P`
    pub c: bool,
    /// `R > N`
    pub d: bool,
    /// `P > N`
    pub e: bool,
    /// `2R > T + N`
    pub f: bool,
}

pub fn ordering_conditions(q: &PayoffQuad) -> OrderingConditions {
    OrderingConditions {
        a: q.t > q.r,
        b: q.t > q.p,
        c: q.r > q.p,
        d: q.r > q.n,
        e: q.p > q.n,
        f: 2.0 * q.r > q.t + q.n,
    }
}

/// IWF if `h < h_lim1(snr)`, FDM otherwise.
pub fn recommend_strategy(h: f64, snr: f64) -> Result<Strategy> {
    check_domain(h, snr)?;
    Ok(if h < h_lim1(snr)? {
        Strategy::Iwf
    } else {
        Strategy::Fdm
    })
}

/// Water-filling response of one user to the other's share in its own
/// preferred band. Noise cancels out because both bands see the same noise.
pub fn best_response(h: f64, other: f64) -> f64 {
    0.5 + h * (2.0 * other - 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub alpha: f64,
    pub beta: f64,
    /// `(alpha, beta)` after each alternating update, starting point first.
    pub iterates: Vec<(f64, f64)>,
}

/// The symmetric IWF equilibrium `(1/2, 1/2)` together with the alternating
/// iterates from `start`: user I moves, then user II answers.
pub fn symmetric_iwf_fixed_point(h: f64, start: (f64, f64), sweeps: usize) -> Result<FixedPoint> {
    if !(0.0..1.0).contains(&h) {
        return Err(Error::invalid(format!("h must lie in [0, 1), got {h}")));
    }
    let (mut alpha, mut beta) = start;
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid("start shares must lie in [0, 1]"));
    }
    let mut iterates = vec![(alpha, beta)];
    for _ in 0..sweeps {
        alpha = best_response(h, beta);
        beta = best_response(h, alpha);
        iterates.push((alpha, beta));
    }
    Ok(FixedPoint {
        alpha: 0.5,
        beta: 0.5,
        iterates,
    })
}

/// Both users' payoff tables, indexed `[user I choice][user II choice]`
/// with FDM first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteGame {
    pub quad: PayoffQuad,
    pub user1: [[f64; 2]; 2],
    pub user2: [[f64; 2]; 2],
    /// Pure-strategy Nash cells as `(user I, user II)` choices.
    pub nash: Vec<(Strategy, Strategy)>,
}

impl DiscreteGame {
    pub fn payoffs(&self, s1: Strategy, s2: Strategy) -> (f64, f64) {
        (
            self.user1[s1.index()][s2.index()],
            self.user2[s1.index()][s2.index()],
        )
    }
}

/// Builds the 2x2 game from explicit rate evaluations. In mixed cells the
/// water-filling user answers the FDM user with share `(1 - h) / 2`.
pub fn discrete_game_payoffs(h: f64, snr: f64) -> Result<DiscreteGame> {
    let quad = payoff_quad(h, snr)?;
    let br = (1.0 - h) / 2.0;
    // user I's share in band 2 and user II's share in band 1 for each cell
    let shares = |s1: usize, s2: usize| -> (f64, f64) {
        match (s1, s2) {
            (0, 0) => (0.0, 0.0),
            (0, 1) => (0.0, br),
            (1, 0) => (br, 0.0),
            _ => (0.5, 0.5),
        }
    };
    let mut user1 = [[0.0; 2]; 2];
    let mut user2 = [[0.0; 2]; 2];
    for s1 in 0..2 {
        for s2 in 0..2 {
            let (a, b) = shares(s1, s2);
            user1[s1][s2] = user1_rate(a, b, h, snr);
            user2[s1][s2] = user1_rate(b, a, h, snr);
        }
    }
    let choices = [Strategy::Fdm, Strategy::Iwf];
    let mut nash = Vec::new();
    for s1 in 0..2 {
        for s2 in 0..2 {
            if user1[s1][s2] >= user1[1 - s1][s2] && user2[s1][s2] >= user2[s1][1 - s2] {
                nash.push((choices[s1], choices[s2]));
            }
        }
    }
    Ok(DiscreteGame {
        quad,
        user1,
        user2,
        nash,
    })
}
