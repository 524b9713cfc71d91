//! JSON-configured experiment runs on synthetic (or loaded) DSL channels.
//!
//! A scenario describes two groups of lines sharing a binder: a far group
//! (long loops, user 0) and a near group (short loops, user 1). Each group is
//! reduced to one representative line; crosstalk from the other group is
//! summed over its members, crosstalk inside a group is not modelled. Band
//! plans are applied as masks on the direct gains.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{
    load_channel_csv, make_uniform_grid, mw_to_dbm, synthetic_dsl_channel, write_channel_csv,
    CableModel, ChannelMatrixSet, CrosstalkPath, DslTopology, NoiseProfile,
};
use crate::dfdm::{dfdm_vs_fmiwf_region, max_near_rate, RegionSweep, SweepPoint};
use crate::error::{Error, Result};
use crate::game::{self, validate_strategy, PowerAllocation, StrategyMode};
use crate::oracle::{brute_force_pareto, OracleOptions, OracleResult};
use crate::region::{write_region_csv, RateRegionCurve, RegionPoint};
use crate::symmetric::{classify_game, GameRegion};
use crate::waterfilling::{
    effective_noise, iterate_iwf, waterfill_ra, IwfOptions, IwfUser, UpdateSchedule,
};

pub const FAR: usize = 0;
pub const NEAR: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Transmitters at the line starts (CO or RT), receivers at the customer.
    Downstream,
    /// Transmitters at the customer, receivers at the line starts.
    Upstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FmIwf,
    RaIwf,
    Dfdm,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::FmIwf => "fm-iwf",
            Self::RaIwf => "ra-iwf",
            Self::Dfdm => "dfdm",
            Self::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fm-iwf" => Ok(Self::FmIwf),
            "ra-iwf" => Ok(Self::RaIwf),
            "dfdm" => Ok(Self::Dfdm),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::config(
                "methods",
                format!("unknown method `{other}` (expected fm-iwf, ra-iwf, dfdm or oracle)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    pub num_tones: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub line_length_km: f64,
    /// Distance from the central office to where the group's lines start.
    #[serde(default)]
    pub offset_km: f64,
    #[serde(default = "one_line")]
    pub group_size: usize,
    /// Usable `[lo, hi]` frequency ranges in Hz.
    pub bands_hz: Vec<(f64, f64)>,
    pub budget_mw: f64,
}

fn one_line() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Number of near-user targets between the two fractions.
    pub points: usize,
    /// Fractions of the near user's stand-alone maximum rate.
    #[serde(default = "default_min_fraction")]
    pub min_fraction: f64,
    #[serde(default = "default_max_fraction")]
    pub max_fraction: f64,
}

fn default_min_fraction() -> f64 {
    0.05
}

fn default_max_fraction() -> f64 {
    0.95
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            points: 20,
            min_fraction: default_min_fraction(),
            max_fraction: default_max_fraction(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IwfSpec {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub jacobi: bool,
}

fn default_max_iter() -> usize {
    500
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for IwfSpec {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            tol: default_tol(),
            jacobi: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for the output files; nothing is written when absent.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub direction: Direction,
    pub grid: GridSpec,
    #[serde(default)]
    pub cable: CableModel,
    /// Measured channel replacing the synthetic one; must have two users.
    #[serde(default)]
    pub channel_csv: Option<PathBuf>,
    pub far: GroupSpec,
    pub near: GroupSpec,
    pub noise_dbm_per_hz: f64,
    #[serde(default = "unit_gap")]
    pub gap: f64,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub iwf: IwfSpec,
    #[serde(default = "default_levels")]
    pub oracle_levels: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

fn unit_gap() -> f64 {
    1.0
}

fn default_levels() -> usize {
    11
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            path,
            format!("must be non-negative, got {v}"),
        ))
    }
}

impl ScenarioConfig {
    /// Parses JSON, reporting the field path of any type error.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." {
                    "<root>".to_string()
                } else {
                    path
                },
                e.inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative `channel_csv` is resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(csv), Some(dir)) = (&cfg.channel_csv, path.parent()) {
            if csv.is_relative() {
                cfg.channel_csv = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        non_negative("grid.f_start_hz", g.f_start_hz)?;
        positive("grid.f_end_hz", g.f_end_hz)?;
        if g.f_end_hz <= g.f_start_hz {
            return Err(Error::config(
                "grid.f_end_hz",
                "must exceed grid.f_start_hz",
            ));
        }
        if g.num_tones == 0 {
            return Err(Error::config("grid.num_tones", "must be at least 1"));
        }
        positive("cable.attenuation", self.cable.attenuation)?;
        non_negative("cable.fext_coefficient", self.cable.fext_coefficient)?;
        for (name, group) in [("far", &self.far), ("near", &self.near)] {
            positive(&format!("{name}.line_length_km"), group.line_length_km)?;
            non_negative(&format!("{name}.offset_km"), group.offset_km)?;
            positive(&format!("{name}.budget_mw"), group.budget_mw)?;
            if group.group_size == 0 {
                return Err(Error::config(
                    format!("{name}.group_size"),
                    "must be at least 1",
                ));
            }
            if group.bands_hz.is_empty() {
                return Err(Error::config(
                    format!("{name}.bands_hz"),
                    "needs at least one band",
                ));
            }
            for (i, &(lo, hi)) in group.bands_hz.iter().enumerate() {
                if !(lo < hi && lo >= g.f_start_hz && hi <= g.f_end_hz) {
                    return Err(Error::config(
                        format!("{name}.bands_hz[{i}]"),
                        format!(
                            "band [{lo}, {hi}] must be non-empty and inside the grid [{}, {}]",
                            g.f_start_hz, g.f_end_hz
                        ),
                    ));
                }
            }
        }
        if self.far.offset_km != 0.0 {
            return Err(Error::config(
                "far.offset_km",
                "the far group starts at the central office",
            ));
        }
        if !self.noise_dbm_per_hz.is_finite() {
            return Err(Error::config("noise_dbm_per_hz", "must be finite"));
        }
        if !(self.gap >= 1.0 && self.gap.is_finite()) {
            return Err(Error::config(
                "gap",
                format!("must be at least 1, got {}", self.gap),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        let s = &self.sweep;
        if s.points == 0 {
            return Err(Error::config("sweep.points", "must be at least 1"));
        }
        if !(s.min_fraction > 0.0 && s.min_fraction <= s.max_fraction && s.max_fraction <= 1.0) {
            return Err(Error::config(
                "sweep",
                "fractions must satisfy 0 < min_fraction <= max_fraction <= 1",
            ));
        }
        if self.iwf.max_iter == 0 {
            return Err(Error::config("iwf.max_iter", "must be at least 1"));
        }
        positive("iwf.tol", self.iwf.tol)?;
        if self.oracle_levels < 2 {
            return Err(Error::config("oracle_levels", "must be at least 2"));
        }
        Ok(())
    }

    /// Crosstalk paths between the representative lines, derived from the
    /// line geometry.
    pub fn crosstalk_paths(&self) -> Vec<CrosstalkPath> {
        let (lf, d, ln) = (
            self.far.line_length_km,
            self.near.offset_km,
            self.near.line_length_km,
        );
        let overlap = lf.min(d + ln) - d.max(0.0);
        if overlap <= 0.0 {
            return Vec::new();
        }
        let (into_far, into_near) = match self.direction {
            Direction::Downstream => ((lf - d).max(overlap), d + ln),
            Direction::Upstream => (d + ln, (lf - d).max(overlap)),
        };
        vec![
            CrosstalkPath {
                victim: FAR,
                disturber: NEAR,
                coupling_km: overlap,
                path_km: into_far,
                multiplicity: self.near.group_size as f64,
            },
            CrosstalkPath {
                victim: NEAR,
                disturber: FAR,
                coupling_km: overlap,
                path_km: into_near,
                multiplicity: self.far.group_size as f64,
            },
        ]
    }

    /// The masked two-user channel and its noise.
    pub fn build(&self) -> Result<(ChannelMatrixSet, NoiseProfile)> {
        self.validate()?;
        let channel = match &self.channel_csv {
            Some(path) => {
                let c = load_channel_csv(path)?;
                if c.num_users() != 2 {
                    return Err(Error::config(
                        "channel_csv",
                        format!("expected a two-user channel, found {} users", c.num_users()),
                    ));
                }
                c
            }
            None => {
                let grid = make_uniform_grid(
                    self.grid.f_start_hz,
                    self.grid.f_end_hz,
                    self.grid.num_tones,
                )?;
                let topology = DslTopology {
                    line_lengths_km: vec![self.far.line_length_km, self.near.line_length_km],
                    crosstalk: self.crosstalk_paths(),
                };
                synthetic_dsl_channel(&topology, &self.cable, &grid)?
            }
        };
        let channel = channel
            .with_band_mask(FAR, &self.far.bands_hz)?
            .with_band_mask(NEAR, &self.near.bands_hz)?;
        let noise = NoiseProfile::from_psd_dbm_per_hz(self.noise_dbm_per_hz, channel.grid(), 2)?;
        Ok((channel, noise))
    }

    pub fn budgets(&self) -> [f64; 2] {
        [self.far.budget_mw, self.near.budget_mw]
    }

    pub fn iwf_options(&self) -> IwfOptions {
        IwfOptions {
            max_iter: self.iwf.max_iter,
            tol: self.iwf.tol,
            gap: self.gap,
            schedule: if self.iwf.jacobi {
                UpdateSchedule::Jacobi
            } else {
                UpdateSchedule::GaussSeidel
            },
            record_history: false,
        }
    }
}

/// One method's operating points with their allocations, for the PSD and
/// SINR outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRun {
    pub method: Method,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    /// Near user's rate alone on the binder with its whole budget.
    pub max_near_rate: f64,
    /// Far user's rate with the near group silent.
    pub interference_free_far_rate: f64,
    pub targets: Vec<f64>,
    pub curves: Vec<RateRegionCurve>,
    pub runs: Vec<MethodRun>,
    #[serde(skip)]
    pub oracle: Option<OracleResult>,
    pub files: Vec<PathBuf>,
}

impl ScenarioReport {
    pub fn curve(&self, method: Method) -> Option<&RateRegionCurve> {
        self.curves.iter().find(|c| c.method == method.name())
    }

    pub fn run(&self, method: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == method)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn check_allocations(points: &[SweepPoint]) -> Result<()> {
    for p in points {
        for a in &p.allocations {
            let mode = match a.mode {
                StrategyMode::FullPower if a.total() == 0.0 => StrategyMode::AtMostPower,
                m => m,
            };
            if let Some(v) = validate_strategy(a, mode).first() {
                return Err(Error::invalid(format!(
                    "user {} allocation rejected: {v}",
                    a.user
                )));
            }
        }
    }
    Ok(())
}

/// Runs every configured method and, when an output directory is set, writes
/// `region.csv`, `psd.csv`, `sinr.csv` and `channel.csv` there.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport> {
    let (channel, noise) = config.build()?;
    let budgets = config.budgets();
    let opts = config.iwf_options();
    let k = channel.num_tones();

    let max_near = max_near_rate(&channel, &noise, NEAR, &budgets, config.gap)?;
    let silent = vec![
        PowerAllocation::zeros(FAR, k, budgets[FAR], StrategyMode::FullPower),
        PowerAllocation::zeros(NEAR, k, budgets[NEAR], StrategyMode::FullPower),
    ];
    let far_eff = effective_noise(FAR, &silent, &channel, &noise, config.gap)?;
    let far_alone = waterfill_ra(&far_eff, budgets[FAR], channel.grid())?;
    let interference_free = far_eff.rate(&far_alone.powers, channel.grid());

    let targets: Vec<f64> = linspace(
        config.sweep.min_fraction,
        config.sweep.max_fraction,
        config.sweep.points,
    )
    .into_iter()
    .map(|f| f * max_near)
    .collect();

    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();

    let mut curves = Vec::new();
    let mut runs = Vec::new();
    let mut oracle = None;

    let wants_sweep = methods.contains(&Method::FmIwf) || methods.contains(&Method::Dfdm);
    let sweep: Option<RegionSweep> = if wants_sweep {
        Some(dfdm_vs_fmiwf_region(
            &channel, &noise, NEAR, &budgets, &targets, &opts,
        )?)
    } else {
        None
    };

    for method in methods {
        match method {
            Method::FmIwf | Method::Dfdm => {
                let s = sweep.as_ref().expect("sweep computed above");
                let [dfdm, fmiwf] = s.curves()?;
                let (curve, points) = if method == Method::Dfdm {
                    (dfdm, s.dfdm.clone())
                } else {
                    (fmiwf, s.fmiwf.clone())
                };
                check_allocations(&points)?;
                curves.push(curve);
                runs.push(MethodRun { method, points });
            }
            Method::RaIwf => {
                let users = [
                    IwfUser::rate_adaptive(budgets[FAR]),
                    IwfUser::rate_adaptive(budgets[NEAR]),
                ];
                let r = iterate_iwf(&channel, &noise, &users, None, &opts)?;
                if !r.converged {
                    log::warn!(
                        "RA-IWF stopped after {} sweeps without converging",
                        r.iterations
                    );
                }
                let point = SweepPoint {
                    target: r.rates[NEAR],
                    rates: r.rates.clone(),
                    allocations: r.allocations,
                    cutoff: None,
                    converged: r.converged,
                };
                check_allocations(std::slice::from_ref(&point))?;
                curves.push(RateRegionCurve::new(
                    "ra-iwf",
                    vec![RegionPoint::exact(r.rates[NEAR], r.rates[FAR])],
                )?);
                runs.push(MethodRun {
                    method,
                    points: vec![point],
                });
            }
            Method::Oracle => {
                let o = brute_force_pareto(
                    &channel,
                    &noise,
                    &budgets,
                    &OracleOptions {
                        levels: config.oracle_levels,
                        gap: config.gap,
                        ..Default::default()
                    },
                )?;
                let rates = game::rates(&o.best_sum, &channel, &noise, config.gap)?;
                runs.push(MethodRun {
                    method,
                    points: vec![SweepPoint {
                        target: rates[NEAR],
                        rates,
                        allocations: o.best_sum.clone(),
                        cutoff: None,
                        converged: true,
                    }],
                });
                curves.push(o.frontier.clone());
                oracle = Some(o);
            }
        }
    }

    let mut report = ScenarioReport {
        name: config.name.clone(),
        max_near_rate: max_near,
        interference_free_far_rate: interference_free,
        targets,
        curves,
        runs,
        oracle,
        files: Vec::new(),
    };
    if let Some(dir) = &config.output.dir {
        report.files = write_outputs(dir, &report, &channel, &noise, config.gap)?;
    }
    Ok(report)
}

/// Writes the report's CSV files into `dir` and returns their paths.
pub fn write_outputs(
    dir: &Path,
    report: &ScenarioReport,
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    gap: f64,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let region = dir.join("region.csv");
    write_region_csv(&report.curves, fs::File::create(&region)?)?;
    let psd = dir.join("psd.csv");
    write_psd_csv(&report.runs, channel, fs::File::create(&psd)?)?;
    let sinr = dir.join("sinr.csv");
    write_sinr_csv(&report.runs, channel, noise, gap, fs::File::create(&sinr)?)?;
    let chan = dir.join("channel.csv");
    write_channel_csv(channel, fs::File::create(&chan)?)?;
    Ok(vec![region, psd, sinr, chan])
}

/// `method,target_bps,user,tone,freq_hz,power_mw,psd_dbm_per_hz`; silent
/// tones have a PSD of `-inf`.
pub fn write_psd_csv<W: std::io::Write>(
    runs: &[MethodRun],
    channel: &ChannelMatrixSet,
    out: W,
) -> Result<()> {
    let grid = channel.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "target_bps",
        "user",
        "tone",
        "freq_hz",
        "power_mw",
        "psd_dbm_per_hz",
    ])?;
    for run in runs {
        for point in &run.points {
            for a in &point.allocations {
                for (k, &p) in a.powers.iter().enumerate() {
                    w.write_record([
                        run.method.name().to_string(),
                        point.target.to_string(),
                        a.user.to_string(),
                        k.to_string(),
                        grid.center(k).to_string(),
                        p.to_string(),
                        mw_to_dbm(p / grid.width(k)).to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `method,target_bps,user,tone,freq_hz,sinr` with linear SINR.
pub fn write_sinr_csv<W: std::io::Write>(
    runs: &[MethodRun],
    channel: &ChannelMatrixSet,
    noise: &NoiseProfile,
    gap: f64,
    out: W,
) -> Result<()> {
    let grid = channel.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "target_bps", "user", "tone", "freq_hz", "sinr"])?;
    for run in runs {
        for point in &run.points {
            for user in 0..point.allocations.len() {
                let values = game::sinr(user, &point.allocations, channel, noise, gap)?;
                for (k, s) in values.iter().enumerate() {
                    w.write_record([
                        run.method.name().to_string(),
                        point.target.to_string(),
                        user.to_string(),
                        k.to_string(),
                        grid.center(k).to_string(),
                        s.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the report summary as pretty JSON.
pub fn write_report_json<W: std::io::Write>(report: &ScenarioReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionMapRow {
    pub h: f64,
    pub snr: f64,
    pub region: GameRegion,
    pub boundary: bool,
    pub h_lim1: f64,
    pub h_lim2: f64,
}

/// Classifies a `resolution x resolution` grid: `snr` log-spaced over
/// `snr_range`, `h` linear over `h_range` (both ends included). Resolution 1
/// gives the single point at the lower ends.
pub fn region_map(
    snr_range: (f64, f64),
    h_range: (f64, f64),
    resolution: usize,
) -> Result<Vec<RegionMapRow>> {
    if resolution == 0 {
        return Err(Error::invalid("resolution must be at least 1"));
    }
    let (s_lo, s_hi) = snr_range;
    if !(s_lo > 0.0 && s_lo <= s_hi && s_hi.is_finite()) {
        return Err(Error::invalid(format!(
            "invalid snr range [{s_lo}, {s_hi}]"
        )));
    }
    let (h_lo, h_hi) = h_range;
    if !(0.0 <= h_lo && h_lo <= h_hi && h_hi < 1.0) {
        return Err(Error::invalid(format!(
            "h range [{h_lo}, {h_hi}] must lie in [0, 1)"
        )));
    }
    let snrs: Vec<f64> = linspace(s_lo.log10(), s_hi.log10(), resolution)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect();
    let hs = linspace(h_lo, h_hi, resolution);
    let mut rows = Vec::with_capacity(resolution * resolution);
    for &snr in &snrs {
        for &h in &hs {
            let c = classify_game(h, snr)?;
            rows.push(RegionMapRow {
                h,
                snr,
                region: c.region,
                boundary: c.boundary,
                h_lim1: c.h_lim1,
                h_lim2: c.h_lim2,
            });
        }
    }
    Ok(rows)
}

/// CSV `h,snr,region,h_lim1,h_lim2` with the region letter.
pub fn write_region_map_csv<W: std::io::Write>(rows: &[RegionMapRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "snr", "region", "h_lim1", "h_lim2"])?;
    for r in rows {
        w.write_record([
            r.h.to_string(),
            r.snr.to_string(),
            r.region.letter().to_string(),
            r.h_lim1.to_string(),
            r.h_lim2.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
