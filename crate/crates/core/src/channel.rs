//! Frequency grids, per-tone coupling matrices and noise profiles.
//!
//! All gains are squared magnitudes (power gains). `coupling(k, i, j)` is the
//! gain from transmitter `j` into receiver `i` on tone `k`; the diagonal is the
//! direct channel. A zero diagonal entry marks a tone the user cannot use.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered tone boundaries `f_0 < f_1 < ... < f_K` in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    edges: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("a grid needs at least two edges"));
        }
        if edges.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid("grid edges must be finite"));
        }
        if let Some(w) = edges.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "grid edges must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { edges })
    }

    pub fn num_tones(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn start(&self) -> f64 {
        self.edges[0]
    }

    pub fn end(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn center(&self, k: usize) -> f64 {
        0.5 * (self.edges[k] + self.edges[k + 1])
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.num_tones()).map(|k| self.center(k)).collect()
    }

    /// Splits tone `k` into `parts[k]` equal-width sub-tones.
    pub fn refine(&self, parts: &[usize]) -> Result<Self> {
        check_parts(parts, self.num_tones())?;
        let mut edges = Vec::with_capacity(parts.iter().sum::<usize>() + 1);
        edges.push(self.edges[0]);
        for (k, &m) in parts.iter().enumerate() {
            let (lo, hi) = (self.edges[k], self.edges[k + 1]);
            for s in 1..m {
                edges.push(lo + (hi - lo) * s as f64 / m as f64);
            }
            edges.push(hi);
        }
        Self::new(edges)
    }
}

fn check_parts(parts: &[usize], num_tones: usize) -> Result<()> {
    if parts.len() != num_tones {
        return Err(Error::invalid(format!(
            "expected {num_tones} subdivision counts, got {}",
            parts.len()
        )));
    }
    if parts.contains(&0) {
        return Err(Error::invalid("subdivision counts must be at least 1"));
    }
    Ok(())
}

/// `num_tones` equal-width tones spanning `[f_start, f_end]`.
pub fn make_uniform_grid(f_start: f64, f_end: f64, num_tones: usize) -> Result<FrequencyGrid> {
    if num_tones == 0 {
        return Err(Error::invalid("number of tones must be at least 1"));
    }
    if !(f_start.is_finite() && f_end.is_finite()) || f_end <= f_start {
        return Err(Error::invalid(format!(
            "frequency span must be positive (start {f_start}, end {f_end})"
        )));
    }
    let width = (f_end - f_start) / num_tones as f64;
    let mut edges: Vec<f64> = (0..num_tones).map(|k| f_start + k as f64 * width).collect();
    edges.push(f_end);
    FrequencyGrid::new(edges)
}

/// Per-tone squared coupling matrices for `num_users` lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrixSet {
    num_users: usize,
    grid: FrequencyGrid,
    /// Row-major `[tone][victim][source]`.
    gains: Vec<f64>,
}

impl ChannelMatrixSet {
    pub fn new(grid: FrequencyGrid, num_users: usize, gains: Vec<f64>) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::invalid("at least one user is required"));
        }
        let expected = grid.num_tones() * num_users * num_users;
        if gains.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} gains for {} tones and {num_users} users, got {}",
                grid.num_tones(),
                gains.len()
            )));
        }
        if let Some(g) = gains.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::invalid(format!(
                "gains must be finite and non-negative, found {g}"
            )));
        }
        Ok(Self {
            num_users,
            grid,
            gains,
        })
    }

    /// Builds the set from one `N x N` matrix per tone.
    pub fn from_tone_matrices(grid: FrequencyGrid, matrices: &[Vec<Vec<f64>>]) -> Result<Self> {
        if matrices.len() != grid.num_tones() {
            return Err(Error::invalid(format!(
                "expected {} tone matrices, got {}",
                grid.num_tones(),
                matrices.len()
            )));
        }
        let n = matrices.first().map_or(0, Vec::len);
        let mut gains = Vec::with_capacity(matrices.len() * n * n);
        for (k, m) in matrices.iter().enumerate() {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::invalid(format!("tone {k} matrix is not {n}x{n}")));
            }
            gains.extend(m.iter().flatten().copied());
        }
        Self::new(grid, n, gains)
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_tones(&self) -> usize {
        self.grid.num_tones()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// `|h_ij(k)|^2`: gain from user `source` into the receiver of `victim`.
    #[inline]
    pub fn coupling(&self, k: usize, victim: usize, source: usize) -> f64 {
        let n = self.num_users;
        self.gains[(k * n + victim) * n + source]
    }

    /// `|h_i(k)|^2`.
    #[inline]
    pub fn direct(&self, k: usize, user: usize) -> f64 {
        self.coupling(k, user, user)
    }

    pub fn tone_matrix(&self, k: usize) -> Vec<Vec<f64>> {
        (0..self.num_users)
            .map(|i| {
                (0..self.num_users)
                    .map(|j| self.coupling(k, i, j))
                    .collect()
            })
            .collect()
    }

    pub fn raw_gains(&self) -> &[f64] {
        &self.gains
    }

    /// Replaces the grid, keeping gains. Tone counts must match.
    pub fn with_grid(mut self, grid: FrequencyGrid) -> Result<Self> {
        if grid.num_tones() != self.num_tones() {
            return Err(Error::invalid(format!(
                "grid has {} tones, channel has {}",
                grid.num_tones(),
                self.num_tones()
            )));
        }
        self.grid = grid;
        Ok(self)
    }

    /// Zeroes `user`'s direct gain on every tone whose center lies outside all
    /// of the `[lo, hi]` ranges.
    pub fn with_band_mask(mut self, user: usize, ranges: &[(f64, f64)]) -> Result<Self> {
        if user >= self.num_users {
            return Err(Error::invalid(format!("user {user} out of range")));
        }
        let n = self.num_users;
        for k in 0..self.num_tones() {
            let f = self.grid.center(k);
            if !ranges.iter().any(|&(lo, hi)| f >= lo && f <= hi) {
                self.gains[(k * n + user) * n + user] = 0.0;
            }
        }
        Ok(self)
    }

    /// Splits tone `k` into `parts[k]` sub-tones carrying the same gains.
    pub fn refine(&self, parts: &[usize]) -> Result<Self> {
        let grid = self.grid.refine(parts)?;
        let nn = self.num_users * self.num_users;
        let mut gains = Vec::with_capacity(grid.num_tones() * nn);
        for (k, &m) in parts.iter().enumerate() {
            let block = &self.gains[k * nn..(k + 1) * nn];
            for _ in 0..m {
                gains.extend_from_slice(block);
            }
        }
        Self::new(grid, self.num_users, gains)
    }
}

/// Received noise power `n_i(k)` per user and tone (linear, same unit as the
/// transmit power, e.g. mW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// `values[i][k]`.
    values: Vec<Vec<f64>>,
}

impl NoiseProfile {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("noise profile needs at least one user"));
        }
        let k = values[0].len();
        if k == 0 || values.iter().any(|v| v.len() != k) {
            return Err(Error::invalid(
                "every user needs the same, non-zero number of tones",
            ));
        }
        // zero noise makes FDM rates unbounded
        if let Some(v) = values
            .iter()
            .flatten()
            .find(|v| !v.is_finite() || **v <= 0.0)
        {
            return Err(Error::invalid(format!(
                "noise must be positive and finite, found {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn flat(num_users: usize, num_tones: usize, value: f64) -> Result<Self> {
        Self::new(vec![vec![value; num_tones]; num_users])
    }

    /// White noise of `psd_dbm_per_hz` integrated over each tone, in mW.
    pub fn from_psd_dbm_per_hz(
        psd_dbm_per_hz: f64,
        grid: &FrequencyGrid,
        num_users: usize,
    ) -> Result<Self> {
        let psd = dbm_to_mw(psd_dbm_per_hz);
        let row: Vec<f64> = grid.widths().iter().map(|w| psd * w).collect();
        Self::new(vec![row; num_users])
    }

    pub fn num_users(&self) -> usize {
        self.values.len()
    }

    pub fn num_tones(&self) -> usize {
        self.values[0].len()
    }

    #[inline]
    pub fn get(&self, user: usize, k: usize) -> f64 {
        self.values[user][k]
    }

    pub fn user(&self, user: usize) -> &[f64] {
        &self.values[user]
    }

    /// Splits every tone's noise evenly over `parts[k]` sub-tones.
    pub fn refine(&self, parts: &[usize]) -> Result<Self> {
        check_parts(parts, self.num_tones())?;
        let values = self
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .zip(parts)
                    .flat_map(|(&v, &m)| std::iter::repeat_n(v / m as f64, m))
                    .collect()
            })
            .collect();
        Self::new(values)
    }

    pub(crate) fn check_dims(&self, channel: &ChannelMatrixSet) -> Result<()> {
        if self.num_users() != channel.num_users() || self.num_tones() != channel.num_tones() {
            return Err(Error::invalid(format!(
                "noise profile is {}x{} but channel has {} users and {} tones",
                self.num_users(),
                self.num_tones(),
                channel.num_users(),
                channel.num_tones()
            )));
        }
        Ok(())
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Normalized channel of the symmetric two-user, two-band game: both tones
/// carry `[[1, h], [h, 1]]`. The tones are half a unit wide so that the rate
/// of each band carries the familiar factor of one half.
pub fn symmetric_two_band_channel(h: f64) -> Result<ChannelMatrixSet> {
    if !(0.0..1.0).contains(&h) {
        return Err(Error::invalid(format!(
            "crosstalk gain h must lie in [0, 1), got {h}"
        )));
    }
    let m = vec![vec![1.0, h], vec![h, 1.0]];
    ChannelMatrixSet::from_tone_matrices(FrequencyGrid::new(vec![0.0, 0.5, 1.0])?, &[m.clone(), m])
}

/// Near-far two-band channel: tone 1 is `[[alpha, beta], [gamma, 1]]` and tone
/// 2 is `[[0, delta], [epsilon, 1]]`, so only user 2 (index 1) can use tone 2.
/// Both tones are one unit wide; use [`ChannelMatrixSet::with_grid`] for other
/// bandwidths.
pub fn nearfar_two_band_channel(
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
    epsilon: f64,
) -> Result<ChannelMatrixSet> {
    for (name, v) in [
        ("alpha", alpha),
        ("beta", beta),
        ("gamma", gamma),
        ("delta", delta),
        ("epsilon", epsilon),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!(
                "{name} must be a non-negative gain, got {v}"
            )));
        }
    }
    if alpha <= 0.0 {
        return Err(Error::invalid("alpha must be positive"));
    }
    ChannelMatrixSet::from_tone_matrices(
        FrequencyGrid::new(vec![0.0, 1.0, 2.0])?,
        &[
            vec![vec![alpha, beta], vec![gamma, 1.0]],
            vec![vec![0.0, delta], vec![epsilon, 1.0]],
        ],
    )
}

/// Parametric twisted-pair model: direct power gain `exp(-a * L * sqrt(f))`,
/// FEXT gain `k * f^2 * coupling_len * exp(-a * path_len * sqrt(f))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CableModel {
    /// `a`, in 1/(km * sqrt(Hz)).
    pub attenuation: f64,
    /// `k`, in 1/(km * Hz^2).
    pub fext_coefficient: f64,
}

impl Default for CableModel {
    fn default() -> Self {
        // roughly 21 dB/km at 1 MHz and a one-disturber FEXT constant
        Self {
            attenuation: 4.8e-3,
            fext_coefficient: 2.5e-17,
        }
    }
}

impl CableModel {
    pub fn direct_gain(&self, f_hz: f64, length_km: f64) -> f64 {
        (-self.attenuation * length_km * f_hz.sqrt()).exp()
    }

    pub fn fext_gain(&self, f_hz: f64, coupling_km: f64, path_km: f64) -> f64 {
        self.fext_coefficient * f_hz * f_hz * coupling_km * self.direct_gain(f_hz, path_km)
    }
}

/// One crosstalk path from `disturber` into `victim`'s receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkPath {
    pub victim: usize,
    pub disturber: usize,
    /// Length over which the two pairs share the binder.
    pub coupling_km: f64,
    /// Length the disturbing signal travels before reaching the victim's
    /// receiver.
    pub path_km: f64,
    /// Number of identical disturbers folded into this path.
    #[serde(default = "one")]
    pub multiplicity: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DslTopology {
    pub line_lengths_km: Vec<f64>,
    pub crosstalk: Vec<CrosstalkPath>,
}

impl DslTopology {
    /// Lines fanning out from one site: every pair couples over the shorter
    /// length and the disturber's signal travels its own full length.
    pub fn colocated(line_lengths_km: Vec<f64>) -> Self {
        let n = line_lengths_km.len();
        let mut crosstalk = Vec::new();
        for victim in 0..n {
            for disturber in 0..n {
                if victim != disturber {
                    crosstalk.push(CrosstalkPath {
                        victim,
                        disturber,
                        coupling_km: line_lengths_km[victim].min(line_lengths_km[disturber]),
                        path_km: line_lengths_km[disturber],
                        multiplicity: 1.0,
                    });
                }
            }
        }
        Self {
            line_lengths_km,
            crosstalk,
        }
    }
}

/// Deterministic synthetic binder evaluated at every tone center.
pub fn synthetic_dsl_channel(
    topology: &DslTopology,
    model: &CableModel,
    grid: &FrequencyGrid,
) -> Result<ChannelMatrixSet> {
    let n = topology.line_lengths_km.len();
    if n == 0 {
        return Err(Error::invalid("topology has no lines"));
    }
    if let Some(l) = topology
        .line_lengths_km
        .iter()
        .find(|l| !l.is_finite() || **l < 0.0)
    {
        return Err(Error::invalid(format!(
            "line lengths must be non-negative, got {l}"
        )));
    }
    if !(model.attenuation >= 0.0 && model.fext_coefficient >= 0.0) {
        return Err(Error::invalid("cable model constants must be non-negative"));
    }
    for p in &topology.crosstalk {
        if p.victim >= n || p.disturber >= n || p.victim == p.disturber {
            return Err(Error::invalid(format!(
                "crosstalk path {} -> {} does not name two distinct lines",
                p.disturber, p.victim
            )));
        }
        if !(p.coupling_km >= 0.0 && p.path_km >= 0.0 && p.multiplicity >= 0.0) {
            return Err(Error::invalid(
                "crosstalk lengths and multiplicity must be non-negative",
            ));
        }
    }
    let mut gains = vec![0.0; grid.num_tones() * n * n];
    for k in 0..grid.num_tones() {
        let f = grid.center(k);
        let base = k * n * n;
        for (i, &len) in topology.line_lengths_km.iter().enumerate() {
            gains[base + i * n + i] = model.direct_gain(f, len);
        }
        for p in &topology.crosstalk {
            gains[base + p.victim * n + p.disturber] +=
                p.multiplicity * model.fext_gain(f, p.coupling_km, p.path_km);
        }
    }
    ChannelMatrixSet::new(grid.clone(), n, gains)
}

fn channel_header(n: usize) -> Vec<String> {
    let mut header = vec!["freq_hz".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            header.push(format!("g_{i}_{j}"));
        }
    }
    header
}

/// Writes `freq_hz,g_1_1,...,g_N_N` with one row per tone; `freq_hz` is the
/// tone center.
pub fn write_channel_csv<W: std::io::Write>(channel: &ChannelMatrixSet, out: W) -> Result<()> {
    let n = channel.num_users();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(channel_header(n))?;
    for k in 0..channel.num_tones() {
        let mut row = vec![channel.grid().center(k).to_string()];
        row.extend(
            channel.raw_gains()[k * n * n..(k + 1) * n * n]
                .iter()
                .map(f64::to_string),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_channel_csv(channel: &ChannelMatrixSet, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_channel_csv(channel, std::io::BufWriter::new(file))
}

pub fn load_channel_csv(path: impl AsRef<Path>) -> Result<ChannelMatrixSet> {
    read_channel_csv(std::fs::File::open(path)?)
}

/// Parses the channel CSV format. Tone edges are reconstructed as midpoints
/// between consecutive tone centers; a single-tone file gets a 1 Hz tone.
pub fn read_channel_csv<R: std::io::Read>(input: R) -> Result<ChannelMatrixSet> {
    let (header, rows) = read_numeric_rows(input)?;
    let cols = header.len().saturating_sub(1);
    let n = (cols as f64).sqrt().round() as usize;
    if n == 0 || n * n != cols || header[0] != "freq_hz" || header != channel_header(n) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must be freq_hz,g_1_1,...,g_N_N in row-major order, got `{}`",
                header.join(",")
            ),
        });
    }
    let mut gains = Vec::with_capacity(rows.len() * cols);
    for (line, values) in &rows {
        if let Some(g) = values[1..].iter().find(|g| **g < 0.0) {
            return Err(Error::Parse {
                line: *line,
                message: format!("negative gain {g}"),
            });
        }
        gains.extend_from_slice(&values[1..]);
    }
    let centers: Vec<f64> = rows.iter().map(|(_, v)| v[0]).collect();
    let grid = grid_from_centers(&centers)?;
    ChannelMatrixSet::new(grid, n, gains)
}

/// Loads `freq_hz,n_1,...,n_N` (linear noise power per tone). The row count
/// must match `grid`.
pub fn load_noise_csv(path: impl AsRef<Path>, grid: &FrequencyGrid) -> Result<NoiseProfile> {
    read_noise_csv(std::fs::File::open(path)?, grid)
}

pub fn read_noise_csv<R: std::io::Read>(input: R, grid: &FrequencyGrid) -> Result<NoiseProfile> {
    let (header, rows) = read_numeric_rows(input)?;
    let n = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("freq_hz".to_string())
        .chain((1..=n).map(|i| format!("n_{i}")))
        .collect();
    if n == 0 || header != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must be freq_hz,n_1,...,n_N, got `{}`",
                header.join(",")
            ),
        });
    }
    if rows.len() != grid.num_tones() {
        return Err(Error::invalid(format!(
            "noise file has {} tones, grid has {}",
            rows.len(),
            grid.num_tones()
        )));
    }
    let mut values = vec![Vec::with_capacity(rows.len()); n];
    for (line, row) in &rows {
        for (i, &v) in row[1..].iter().enumerate() {
            if v <= 0.0 {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("noise must be positive, got {v}"),
                });
            }
            values[i].push(v);
        }
    }
    NoiseProfile::new(values)
}

type NumericRows = (Vec<String>, Vec<(u64, Vec<f64>)>);

/// Reads a header plus all-numeric rows with strictly ascending first column.
fn read_numeric_rows<R: std::io::Read>(input: R) -> Result<NumericRows> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let values = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("`{s}` is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some((_, prev)) = rows.last() {
            if values[0] <= prev[0] {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "frequencies must be strictly ascending ({} after {})",
                        values[0], prev[0]
                    ),
                });
            }
        }
        rows.push((line, values));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no tones".into(),
        });
    }
    Ok((header, rows))
}

fn grid_from_centers(centers: &[f64]) -> Result<FrequencyGrid> {
    if centers.len() == 1 {
        return FrequencyGrid::new(vec![centers[0] - 0.5, centers[0] + 0.5]);
    }
    let k = centers.len();
    let mut edges = Vec::with_capacity(k + 1);
    edges.push(centers[0] - 0.5 * (centers[1] - centers[0]));
    edges.extend(centers.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(centers[k - 1] + 0.5 * (centers[k - 1] - centers[k - 2]));
    FrequencyGrid::new(edges)
}
