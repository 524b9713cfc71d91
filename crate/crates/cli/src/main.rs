use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dsm_core::channel::{load_channel_csv, load_noise_csv, ChannelMatrixSet, NoiseProfile};
use dsm_core::dfdm::dfdm_round;
use dsm_core::nearfar::{
    dfdm_rate_bounds, region_sweep, rr_iwf_bounds, write_sweep_csv, BoundMethod, NearFarParams,
};
use dsm_core::oracle::{brute_force_pareto, write_frontier_csv, OracleOptions};
use dsm_core::scenario::{
    region_map, run_scenario, write_region_map_csv, write_report_json, Method, ScenarioConfig,
};
use dsm_core::symmetric::{
    classify_game, payoff_ordering, payoff_quad, recommend_strategy, PayoffQuad,
};
use dsm_core::waterfilling::{iterate_iwf, IwfOptions, IwfUser, UpdateSchedule};
use dsm_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dsm",
    version,
    about = "Distributed spectrum coordination for DSL-style interference channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the symmetric two-band game at one (h, snr) point.
    Classify {
        #[arg(long)]
        h: f64,
        #[arg(long)]
        snr: f64,
    },
    /// Classify a grid of (h, snr) points and write CSV.
    RegionMap {
        #[arg(long, default_value_t = 0.1)]
        snr_min: f64,
        #[arg(long, default_value_t = 1e4)]
        snr_max: f64,
        #[arg(long, default_value_t = 0.0)]
        h_min: f64,
        #[arg(long, default_value_t = 0.99)]
        h_max: f64,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Iterative water-filling on a channel file.
    Iwf {
        #[command(flatten)]
        link: LinkArgs,
        /// Per-user budgets in mW; a single value applies to every user.
        #[arg(long, value_delimiter = ',', default_value = "30")]
        budget: Vec<f64>,
        /// Fixed-margin targets as USER=RATE (bits/s); other users are rate-adaptive.
        #[arg(long = "target", value_parser = parse_target)]
        targets: Vec<(usize, f64)>,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        jacobi: bool,
    },
    /// Dynamic FDM for the near user of a two-user channel file.
    Dfdm {
        #[command(flatten)]
        link: LinkArgs,
        /// Near-user rate target in bits/s.
        #[arg(long)]
        rd: f64,
        /// Budget of each user in mW.
        #[arg(long, default_value_t = 30.0)]
        budget: f64,
        /// Index of the near user.
        #[arg(long, default_value_t = 1)]
        near_user: usize,
    },
    /// Closed-form bounds on user I's rate for a near-user target.
    NearfarBounds {
        #[arg(long)]
        r2: f64,
        #[arg(long, default_value = "fmiwf")]
        method: BoundMethod,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Both methods' bounds over a range of near-user targets, as CSV.
    RegionSweep {
        #[arg(long)]
        r2_min: f64,
        #[arg(long)]
        r2_max: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Brute-force Pareto frontier of a small two-user channel file, as CSV.
    Oracle {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 11)]
        levels: usize,
        #[arg(long, value_delimiter = ',', default_value = "30")]
        budget: Vec<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a JSON scenario file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides the method list.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        gap: Option<f64>,
        #[arg(long)]
        noise_dbm_per_hz: Option<f64>,
        /// Also write the JSON summary here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LinkArgs {
    /// Channel CSV (`freq_hz,g_1_1,...,g_N_N`).
    #[arg(long)]
    channel: PathBuf,
    /// Noise CSV (`freq_hz,n_1,...`, mW per tone); overrides the flat PSD.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long, default_value_t = -140.0, allow_hyphen_values = true)]
    noise_dbm_per_hz: f64,
    #[arg(long, default_value_t = 1.0)]
    gap: f64,
}

impl LinkArgs {
    fn load(&self) -> anyhow::Result<(ChannelMatrixSet, NoiseProfile)> {
        let channel = load_channel_csv(&self.channel)
            .with_context(|| format!("reading channel {}", self.channel.display()))?;
        let noise = match &self.noise {
            Some(p) => load_noise_csv(p, channel.grid())
                .with_context(|| format!("reading noise {}", p.display()))?,
            None => NoiseProfile::from_psd_dbm_per_hz(
                self.noise_dbm_per_hz,
                channel.grid(),
                channel.num_users(),
            )?,
        };
        Ok((channel, noise))
    }
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    #[arg(long)]
    n1: f64,
    #[arg(long)]
    n2: f64,
    #[arg(long, default_value_t = 1.0)]
    w1: f64,
    #[arg(long, default_value_t = 1.0)]
    w2: f64,
}

impl ParamArgs {
    fn params(&self) -> anyhow::Result<NearFarParams> {
        let p = NearFarParams::new(
            self.alpha, self.beta, self.gamma, self.power, self.n1, self.n2,
        )
        .with_widths(self.w1, self.w2);
        p.validate()?;
        Ok(p)
    }
}

fn parse_target(s: &str) -> Result<(usize, f64), String> {
    let (user, rate) = s
        .split_once('=')
        .ok_or_else(|| format!("expected USER=RATE, got `{s}`"))?;
    let user = user
        .trim()
        .parse()
        .map_err(|e| format!("bad user in `{s}`: {e}"))?;
    let rate = rate
        .trim()
        .parse()
        .map_err(|e| format!("bad rate in `{s}`: {e}"))?;
    Ok((user, rate))
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn budgets_for(values: &[f64], users: usize) -> anyhow::Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; users]),
        n if n == users => Ok(values.to_vec()),
        n => bail!(Error::InvalidArgument(format!(
            "{n} budgets given for {users} users"
        ))),
    }
}

#[derive(Serialize)]
struct ClassifyOut {
    h: f64,
    snr: f64,
    region: String,
    letter: char,
    boundary: bool,
    h_lim1: f64,
    h_lim2: f64,
    ordering: String,
    payoffs: PayoffQuad,
    strategy: String,
}

#[derive(Serialize)]
struct DfdmOut {
    f_c: f64,
    cutoff_tone: usize,
    psd: Vec<PsdEntry>,
    rate: f64,
    far_rate: f64,
}

#[derive(Serialize)]
struct PsdEntry {
    freq_hz: f64,
    power_mw: f64,
    psd_mw_per_hz: f64,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Classify { h, snr } => {
            let c = classify_game(h, snr)?;
            let q = payoff_quad(h, snr)?;
            print_json(&ClassifyOut {
                h,
                snr,
                region: c.region.name().to_string(),
                letter: c.region.letter(),
                boundary: c.boundary,
                h_lim1: c.h_lim1,
                h_lim2: c.h_lim2,
                ordering: payoff_ordering(&q),
                payoffs: q,
                strategy: recommend_strategy(h, snr)?.to_string(),
            })
        }
        Command::RegionMap {
            snr_min,
            snr_max,
            h_min,
            h_max,
            resolution,
            out,
        } => {
            let rows = region_map((snr_min, snr_max), (h_min, h_max), resolution)?;
            write_region_map_csv(&rows, output(out.as_deref())?)?;
            Ok(())
        }
        Command::Iwf {
            link,
            budget,
            targets,
            max_iter,
            tol,
            jacobi,
        } => {
            let (channel, noise) = link.load()?;
            let n = channel.num_users();
            let budgets = budgets_for(&budget, n)?;
            let mut users: Vec<IwfUser> =
                budgets.iter().map(|&b| IwfUser::rate_adaptive(b)).collect();
            for (user, rate) in targets {
                if user >= n {
                    bail!(Error::InvalidArgument(format!(
                        "target for user {user}, channel has {n} users"
                    )));
                }
                users[user] = IwfUser::fixed_margin(budgets[user], rate);
            }
            let opts = IwfOptions {
                max_iter,
                tol,
                gap: link.gap,
                schedule: if jacobi {
                    UpdateSchedule::Jacobi
                } else {
                    UpdateSchedule::GaussSeidel
                },
                record_history: false,
            };
            let report = iterate_iwf(&channel, &noise, &users, None, &opts)?;
            if !report.converged {
                log::warn!(
                    "stopped after {} sweeps without converging",
                    report.iterations
                );
            }
            print_json(&report)
        }
        Command::Dfdm {
            link,
            rd,
            budget,
            near_user,
        } => {
            let (channel, noise) = link.load()?;
            let point = dfdm_round(&channel, &noise, near_user, &[budget, budget], rd, link.gap)?;
            let cutoff = point.cutoff.unwrap_or(channel.num_tones());
            let grid = channel.grid();
            let psd = point.allocations[near_user]
                .powers
                .iter()
                .enumerate()
                .map(|(k, &p)| PsdEntry {
                    freq_hz: grid.center(k),
                    power_mw: p,
                    psd_mw_per_hz: p / grid.width(k),
                })
                .collect();
            print_json(&DfdmOut {
                f_c: grid.edges()[cutoff],
                cutoff_tone: cutoff,
                psd,
                rate: point.rates[near_user],
                far_rate: point.rates[1 - near_user],
            })
        }
        Command::NearfarBounds { r2, method, params } => {
            let p = params.params()?;
            let bounds = match method {
                BoundMethod::FmIwf => rr_iwf_bounds(r2, &p)?,
                BoundMethod::Dfdm => dfdm_rate_bounds(r2, &p)?,
            };
            print_json(&bounds)
        }
        Command::RegionSweep {
            r2_min,
            r2_max,
            points,
            params,
            out,
        } => {
            if points == 0 || !(r2_min >= 0.0 && r2_min <= r2_max) {
                bail!(Error::InvalidArgument(format!(
                    "need points >= 1 and 0 <= r2_min <= r2_max, got {points} over [{r2_min}, {r2_max}]"
                )));
            }
            let p = params.params()?;
            let sweep: Vec<f64> = (0..points)
                .map(|i| match points {
                    1 => r2_min,
                    _ => r2_min + (r2_max - r2_min) * i as f64 / (points - 1) as f64,
                })
                .collect();
            write_sweep_csv(&region_sweep(&p, &sweep)?, output(out.as_deref())?)?;
            Ok(())
        }
        Command::Oracle {
            link,
            levels,
            budget,
            out,
        } => {
            let (channel, noise) = link.load()?;
            let budgets = budgets_for(&budget, channel.num_users())?;
            let opts = OracleOptions {
                levels,
                gap: link.gap,
                ..Default::default()
            };
            let result = brute_force_pareto(&channel, &noise, &budgets, &opts)?;
            log::info!(
                "{} allocations, frontier of {} points, tolerance {}",
                result.evaluated,
                result.frontier.len(),
                result.tolerance
            );
            write_frontier_csv(&result.frontier, output(out.as_deref())?)?;
            Ok(())
        }
        Command::Run {
            config,
            output_dir,
            methods,
            points,
            gap,
            noise_dbm_per_hz,
            report,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output.dir = Some(dir);
            }
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(n) = points {
                cfg.sweep.points = n;
            }
            if let Some(g) = gap {
                cfg.gap = g;
            }
            if let Some(n) = noise_dbm_per_hz {
                cfg.noise_dbm_per_hz = n;
            }
            cfg.validate()?;
            let rep = run_scenario(&cfg)?;
            for f in &rep.files {
                log::info!("wrote {}", f.display());
            }
            write_report_json(&rep, output(report.as_deref())?)?;
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible { .. } | Error::NoFeasibleAllocation) => EXIT_INFEASIBLE,
        Some(
            Error::Config { .. }
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::SearchSpaceTooLarge { .. },
        ) => EXIT_CONFIG,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
