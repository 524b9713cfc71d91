//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::path::PathBuf;

use dsm_core::channel::{
    symmetric_two_band_channel, ChannelMatrixSet, FrequencyGrid, NoiseProfile,
};
use dsm_core::dfdm::{dfdm_round, dfdm_vs_fmiwf_region, max_near_rate};
use dsm_core::game::{PowerAllocation, StrategyMode};
use dsm_core::nearfar::{
    bully_power_split, dfdm_lambda_bounds, dfdm_r1, dfdm_r2, fdm_threshold_rate,
    interference_min_p1, rr_iwf_bounds, solve_lambda, symmetric_nearfar_rates, NearFarParams,
};
use dsm_core::oracle::{brute_force_pareto, OracleOptions};
use dsm_core::region::dominates;
use dsm_core::scenario::{run_scenario, Method, ScenarioConfig};
use dsm_core::symmetric::{
    classify_game, h_lim1, h_lim2, ordering_conditions, payoff_quad, recommend_strategy,
    region_from_payoffs, Strategy,
};
use dsm_core::waterfilling::{
    iterate_iwf, waterfill_fm, waterfill_ra, EffectiveNoise, IwfOptions, IwfUser,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {n} [{name}]: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} [{name}] failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (r.gen_range(lo.ln()..hi.ln())).exp()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn logspace(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    linspace(lo_exp, hi_exp, n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

/// 50 interior crosstalk values and 50 SNRs from 0.1 to 10^4.
fn game_grid() -> Vec<(f64, f64)> {
    let hs = linspace(0.0, 1.0, 52);
    let snrs = logspace(-1.0, 4.0, 50);
    let mut out = Vec::new();
    for &h in &hs[1..51] {
        for &snr in &snrs {
            out.push((h, snr));
        }
    }
    out
}

#[test]
fn c1_symmetric_iwf_converges_to_even_split() {
    let mut r = rng(1);
    let mut worst_err = 0.0f64;
    let mut worst_iter = 0usize;
    let mut failures = Vec::new();
    for step in 0..10 {
        let h = step as f64 / 10.0;
        let channel = symmetric_two_band_channel(h).unwrap();
        let noise = NoiseProfile::flat(2, 2, 0.1).unwrap();
        let users = [IwfUser::rate_adaptive(1.0), IwfUser::rate_adaptive(1.0)];
        let opts = IwfOptions {
            max_iter: 200,
            tol: 1e-12,
            ..Default::default()
        };
        for _ in 0..20 {
            let alpha: f64 = r.gen_range(0.01..0.99);
            let beta: f64 = r.gen_range(0.01..0.99);
            let init = [
                PowerAllocation::new(0, vec![1.0 - alpha, alpha], 1.0, StrategyMode::FullPower),
                PowerAllocation::new(1, vec![beta, 1.0 - beta], 1.0, StrategyMode::FullPower),
            ];
            let rep = iterate_iwf(&channel, &noise, &users, Some(&init), &opts).unwrap();
            let a = rep.allocations[0].powers[1];
            let b = rep.allocations[1].powers[0];
            let err = (a - 0.5).abs().max((b - 0.5).abs());
            worst_err = worst_err.max(err);
            worst_iter = worst_iter.max(rep.iterations);
            if !rep.converged || err > 1e-9 || rep.iterations > 200 {
                failures.push((h, alpha, beta, err, rep.iterations));
            }
        }
    }
    report(
        1,
        "symmetric IWF reaches (1/2, 1/2)",
        failures.is_empty(),
        &format!("200 runs, worst error {worst_err:.2e}, worst sweeps {worst_iter}, failures {failures:?}"),
    );
}

#[test]
fn c2_classification_matches_payoff_ordering() {
    let grid = game_grid();
    let (mut checked, mut skipped, mut mismatches) = (0, 0, Vec::new());
    for &(h, snr) in &grid {
        let c = classify_game(h, snr).unwrap();
        if c.boundary {
            skipped += 1;
            continue;
        }
        checked += 1;
        let q = payoff_quad(h, snr).unwrap();
        if region_from_payoffs(&q) != Some(c.region) {
            mismatches.push((h, snr));
        }
    }
    let mut worst_lim = 0.0f64;
    for snr in logspace(-1.0, 4.0, 20) {
        let q1 = payoff_quad(h_lim1(snr).unwrap(), snr).unwrap();
        let q2 = payoff_quad(h_lim2(snr).unwrap(), snr).unwrap();
        worst_lim = worst_lim.max((q1.r - q1.p).abs()).max((q2.p - q2.n).abs());
    }
    report(
        2,
        "region classification",
        mismatches.is_empty() && worst_lim < 1e-6,
        &format!(
            "{checked} points agree except {:?}, {skipped} on a threshold, worst tie residual {worst_lim:.2e}",
            mismatches
        ),
    );
}

#[test]
fn c3_pairwise_conditions_hold_everywhere() {
    let grid = game_grid();
    let mut fails = [0usize; 4];
    let mut f_example = None;
    for &(h, snr) in &grid {
        let q = payoff_quad(h, snr).unwrap();
        let c = ordering_conditions(&q);
        for (i, ok) in [c.a, c.b, c.d, c.f].into_iter().enumerate() {
            if !ok {
                fails[i] += 1;
            }
        }
        if !c.f && f_example.is_none() {
            f_example = Some((h, snr, classify_game(h, snr).unwrap().region.letter()));
        }
    }
    report(
        3,
        "conditions a, b, d, f",
        fails.iter().all(|&n| n == 0),
        &format!(
            "violations over {} points: a={} b={} d={} f={}, first f violation (h, snr, region) {:?}",
            grid.len(),
            fails[0],
            fails[1],
            fails[2],
            fails[3],
            f_example
        ),
    );
}

#[test]
fn c4_fmiwf_bounds_contain_simulated_rate() {
    let mut r = rng(4);
    let (mut outside, mut off_estimate, mut worst_est) = (Vec::new(), 0usize, 0.0f64);
    let mut accepted = 0;
    while accepted < 100 {
        let w1 = r.gen_range(0.5..2.0);
        let w2 = r.gen_range(0.5..2.0);
        let band_snr = log_uniform(&mut r, 1e3, 1e5);
        let n2 = 1.0 / (band_snr * f64::max(w1, w2));
        let params = NearFarParams {
            alpha: r.gen_range(0.01..1.0),
            beta: r.gen_range(0.01..1.0),
            gamma: 0.0,
            n1: log_uniform(&mut r, 1e-4, 1e-2),
            ..NearFarParams::new(0.0, 0.0, 0.0, 1.0, 1.0, n2)
        }
        .with_widths(w1, w2);
        // operating SNR of the near user at least 50
        let w = w1 + w2;
        let x_max = (1.0 + 1.0 / (w * n2)).log2();
        let x_min = 51f64.log2();
        if x_max <= x_min {
            continue;
        }
        let x = r.gen_range(x_min..x_max * 0.999);
        let r2 = x * w;
        let b = rr_iwf_bounds(r2, &params).unwrap();
        if !(b.flags.lower_valid && b.flags.feasible && b.flags.high_snr) {
            continue;
        }
        accepted += 1;

        let (channel, noise) = params.channel().unwrap();
        let users = [IwfUser::rate_adaptive(1.0), IwfUser::fixed_margin(1.0, r2)];
        let rep = iterate_iwf(&channel, &noise, &users, None, &IwfOptions::default()).unwrap();
        assert!(rep.converged);
        assert!((rep.rates[1] - r2).abs() <= 1e-9 * r2);
        let sim = rep.rates[0];
        let slack = 1e-9 * sim;
        if sim < b.lower - slack || sim > b.upper + slack {
            outside.push((params, r2, b.lower, sim, b.upper));
        }
        let rel = (b.estimate.unwrap() - sim).abs() / sim;
        worst_est = worst_est.max(rel);
        if rel > 0.05 {
            off_estimate += 1;
        }
    }
    report(
        4,
        "FM-IWF rate bounds",
        outside.is_empty() && off_estimate == 0,
        &format!(
            "100 samples, {} outside the bounds, {off_estimate} estimates off by more than 5%, worst estimate error {:.3}%",
            outside.len(),
            worst_est * 100.0
        ),
    );
}

fn random_dfdm_params(r: &mut ChaCha8Rng) -> NearFarParams {
    let w1 = r.gen_range(0.5..2.0);
    let w2 = r.gen_range(0.5..2.0);
    let snr = log_uniform(r, 1e2, 1e4);
    NearFarParams {
        alpha: r.gen_range(0.01..0.5),
        beta: r.gen_range(0.05..1.0),
        gamma: 0.0,
        n1: log_uniform(r, 1e-4, 1e-2),
        ..NearFarParams::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0 / snr)
    }
    .with_widths(w1, w2)
}

#[test]
fn c5_dfdm_share_and_rate() {
    let mut r = rng(5);
    let (mut outside, mut non_monotone, mut tone_misses) = (0, 0, Vec::new());
    for _ in 0..100 {
        let p = random_dfdm_params(&mut r);
        let lo = fdm_threshold_rate(&p).unwrap();
        let hi = dfdm_r2(1.0, &p);
        let r2 = r.gen_range(lo..hi);
        let lambda = solve_lambda(r2, &p).unwrap();
        let lb = dfdm_lambda_bounds(r2, &p).unwrap();
        if !(lb.feasible && lb.lambda_min - 1e-9 <= lambda && lambda <= lb.lambda_max + 1e-9) {
            outside += 1;
        }

        let rates: Vec<f64> = linspace(0.0, 1.0, 100)
            .into_iter()
            .map(|l| dfdm_r1(l, &p).unwrap())
            .collect();
        if rates.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            non_monotone += 1;
        }

        let (c, n) = p.channel().unwrap();
        let (c, n) = (c.refine(&[32, 32]).unwrap(), n.refine(&[32, 32]).unwrap());
        let d = dfdm_round(&c, &n, 1, &[1.0, 1.0], r2, 1.0).unwrap();
        let used = ((p.w1 - c.grid().edges()[d.cutoff.unwrap()]) / p.w1).max(0.0);
        if (used - lambda).abs() > 1.0 / 32.0 + 1e-9 {
            tone_misses.push((used, lambda));
        }
    }
    report(
        5,
        "DFDM band-1 share",
        outside == 0 && non_monotone == 0 && tone_misses.is_empty(),
        &format!(
            "100 samples, {outside} outside the share bracket, {non_monotone} non-monotone rate curves, tone-level misses {tone_misses:?}"
        ),
    );
}

#[test]
fn c6_interference_minimizing_split() {
    let mut r = rng(6);
    let (mut above, mut c2_err, mut c1_worse, mut clamped) = (0, 0.0f64, 0, 0);
    for _ in 0..100 {
        let gamma = r.gen_range(0.0..0.5);
        let p = NearFarParams::new(
            r.gen_range(0.01..1.0),
            r.gen_range(0.01..1.0),
            gamma,
            1.0,
            log_uniform(&mut r, 1e-3, 1e-1),
            log_uniform(&mut r, 1e-3, 1e-1),
        )
        .with_tau(r.gen_range(gamma..1.0).max(gamma + 1e-6));
        let split = bully_power_split(&p).unwrap();
        let p1 = interference_min_p1(&p).unwrap();
        if p1 > split.p1 {
            above += 1;
        }
        let (c1_fm, c2_fm) = symmetric_nearfar_rates(&p, split.p1, split.p2).unwrap();
        let (c1_min, c2_min) = symmetric_nearfar_rates(&p, p1, p.power - p1).unwrap();
        if p1 > 0.0 {
            c2_err = c2_err.max((c2_min - c2_fm).abs());
        } else if c2_min < c2_fm - 1e-9 {
            c2_err = c2_err.max(c2_fm - c2_min);
        } else {
            clamped += 1;
        }
        if c1_min < c1_fm - 1e-12 {
            c1_worse += 1;
        }
    }
    report(
        6,
        "interference-minimizing split",
        above == 0 && c2_err <= 1e-9 && c1_worse == 0,
        &format!(
            "100 samples, {above} above the FM-IWF band-1 power, worst C2 change {c2_err:.2e}, {c1_worse} with lower C1, {clamped} clamped at zero"
        ),
    );
}

#[test]
fn c7_oracle_dominates_distributed_methods() {
    let mut r = rng(7);
    let opts = OracleOptions::default();
    let mut failures = Vec::new();
    for case in 0..10 {
        let k = if case % 2 == 0 { 2 } else { 3 };
        let grid = FrequencyGrid::new((0..=k).map(|x| x as f64).collect()).unwrap();
        let mut gains = Vec::with_capacity(4 * k);
        for _ in 0..k {
            let far = r.gen_range(0.05..0.5);
            let near = r.gen_range(0.5..1.0);
            gains.extend([far, r.gen_range(0.0..0.3), r.gen_range(0.0..0.1), near]);
        }
        let channel = ChannelMatrixSet::new(grid, 2, gains).unwrap();
        let noise = NoiseProfile::flat(2, k, r.gen_range(0.01..0.1)).unwrap();
        let budgets = [1.0, 1.0];
        let oracle = brute_force_pareto(&channel, &noise, &budgets, &opts).unwrap();
        let max = max_near_rate(&channel, &noise, 1, &budgets, 1.0).unwrap();
        let targets: Vec<f64> = linspace(0.1, 0.9, 9).into_iter().map(|f| f * max).collect();
        let sweep = dfdm_vs_fmiwf_region(
            &channel,
            &noise,
            1,
            &budgets,
            &targets,
            &IwfOptions::default(),
        )
        .unwrap();
        for curve in sweep.curves().unwrap() {
            if !dominates(&oracle.frontier, &curve, oracle.tolerance) {
                failures.push(format!("instance {case}: {}", curve.method));
            }
        }
    }

    let mut strategy_misses = Vec::new();
    for snr in [1.0, 10.0, 100.0] {
        let lim1 = h_lim1(snr).unwrap();
        let lim2 = h_lim2(snr).unwrap();
        for h in [0.5 * lim1, 0.5 * (lim1 + lim2), 0.5 * (lim2 + 1.0)] {
            let channel = symmetric_two_band_channel(h).unwrap();
            let noise = NoiseProfile::flat(2, 2, 1.0 / snr).unwrap();
            let o = brute_force_pareto(&channel, &noise, &[1.0, 1.0], &opts).unwrap();
            let [a, b] = [&o.best_sum[0].powers, &o.best_sum[1].powers];
            let found = if a.iter().zip(b).all(|(x, y)| x * y == 0.0) {
                Strategy::Fdm
            } else if a == &vec![0.5, 0.5] && b == &vec![0.5, 0.5] {
                Strategy::Iwf
            } else {
                strategy_misses.push((h, snr, a.clone(), b.clone()));
                continue;
            };
            if found != recommend_strategy(h, snr).unwrap() {
                strategy_misses.push((h, snr, a.clone(), b.clone()));
            }
        }
    }
    report(
        7,
        "centralized reference",
        failures.is_empty() && strategy_misses.is_empty(),
        &format!(
            "10 instances, undominated curves {failures:?}; 9 symmetric games, strategy mismatches {strategy_misses:?}"
        ),
    );
}

#[test]
fn c8_waterfilling_optimality() {
    let mut r = rng(8);
    let mut kkt_worst = 0.0f64;
    for _ in 0..1000 {
        let k = r.gen_range(1..=16);
        let grid = FrequencyGrid::new((0..=k).map(|x| x as f64).collect()).unwrap();
        let levels: Vec<f64> = (0..k).map(|_| log_uniform(&mut r, 1e-4, 10.0)).collect();
        let budget = log_uniform(&mut r, 1e-2, 100.0);
        let eff = EffectiveNoise::from_values(0, &levels).unwrap();
        let a = waterfill_ra(&eff, budget, &grid).unwrap();
        let water: Vec<f64> = a.powers.iter().zip(&levels).map(|(p, n)| p + n).collect();
        let mu = water
            .iter()
            .zip(&a.powers)
            .filter(|(_, &p)| p > 0.0)
            .map(|(w, _)| *w)
            .fold(0.0, f64::max);
        let mut worst = (a.total() - budget).abs() / budget;
        for (i, &p) in a.powers.iter().enumerate() {
            if p > 0.0 {
                worst = worst.max((water[i] - mu).abs() / mu);
            } else {
                worst = worst.max(((mu - levels[i]) / mu).max(0.0));
            }
        }
        kkt_worst = kkt_worst.max(worst);
    }

    let mut not_minimal = 0;
    let mut rate_err = 0.0f64;
    for _ in 0..100 {
        let k = r.gen_range(1..=16);
        let grid = FrequencyGrid::new((0..=k).map(|x| x as f64).collect()).unwrap();
        let levels: Vec<f64> = (0..k).map(|_| log_uniform(&mut r, 1e-4, 10.0)).collect();
        let eff = EffectiveNoise::from_values(0, &levels).unwrap();
        let full = waterfill_ra(&eff, 10.0, &grid).unwrap();
        let target = eff.rate(&full.powers, &grid) * r.gen_range(0.05..0.95);
        let fm = waterfill_fm(&eff, 10.0, target, &grid).unwrap();
        rate_err = rate_err.max((eff.rate(&fm.powers, &grid) - target).abs() / target);
        let less = waterfill_ra(&eff, 0.999 * fm.total(), &grid).unwrap();
        if eff.rate(&less.powers, &grid) >= target {
            not_minimal += 1;
        }
    }
    report(
        8,
        "water-filling optimality",
        kkt_worst <= 1e-9 && rate_err <= 1e-9 && not_minimal == 0,
        &format!(
            "1000 KKT checks, worst residual {kkt_worst:.2e}; 100 fixed-margin runs, worst rate error {rate_err:.2e}, {not_minimal} not minimal"
        ),
    );
}

#[test]
fn c9_downstream_dfdm_protects_far_user() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/downstream.json");
    let mut config = ScenarioConfig::load(&path).unwrap();
    config.output.dir = None;
    let rep = run_scenario(&config).unwrap();
    let dfdm = &rep.run(Method::Dfdm).unwrap().points;
    let fm = &rep.run(Method::FmIwf).unwrap().points;
    let free = rep.interference_free_far_rate;
    let far = 0;

    // targets at which DFDM leaves the far user untouched
    let clean: Vec<f64> = dfdm
        .iter()
        .filter(|p| (p.rates[far] - free).abs() <= 1e-9 * free)
        .map(|p| p.target)
        .collect();
    let fm_strictly_lower = clean.iter().all(|t| {
        fm.iter()
            .find(|p| p.target == *t)
            .is_some_and(|p| p.rates[far] < free * (1.0 - 1e-6))
    });

    let top = dfdm
        .iter()
        .filter_map(|d| fm.iter().find(|f| f.target == d.target).map(|f| (d, f)))
        .max_by(|a, b| a.0.target.total_cmp(&b.0.target))
        .unwrap();
    let top_fraction = top.0.target / rep.max_near_rate;
    let gap = (top.0.rates[far] - top.1.rates[far]).abs() / top.0.rates[far].max(top.1.rates[far]);
    report(
        9,
        "downstream DFDM versus FM-IWF",
        !clean.is_empty() && fm_strictly_lower && top_fraction >= 0.98 && gap <= 0.05,
        &format!(
            "DFDM at the interference-free rate for {} of {} targets, FM-IWF strictly lower there: {fm_strictly_lower}; \
             at {:.3} of the near user's maximum the far-user gap is {:.2}%",
            clean.len(),
            dfdm.len(),
            top_fraction,
            gap * 100.0
        ),
    );
}
