//! Sweep configuration, orchestration, baseline schemes, aggregation and CSV output.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{ergodic_rate_closed_form, RateInputs};
use crate::channel::{path_loss, LinkGains};
use crate::covariance::{ArrayGeometry, ClusterGeometry, DEFAULT_ENERGY_FRACTION};
use crate::error::{Error, Result};
use crate::precoding::{assign_subsets, PowerAllocation, SubsetAssignment};
use crate::scenario::{dual_polarized_trial, noma_rate, oma_rate, single_polarized_trial, ClusterSetup, GroupParams, SolverSettings, UserObservation};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "POLARIRS_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Dual-polarized MIMO-NOMA with per-user IRSs and per-subset SIC.
    IrsNoma,
    /// Single-polarized MIMO with TDMA among the group's users.
    Oma,
    /// Single-polarized MIMO-NOMA with SIC over the whole group.
    NomaSinglePol,
    /// Dual-polarized MIMO-NOMA without IRSs, SIC over the whole group.
    NomaDualPol,
    /// Large-`L` closed form of the IRS scheme.
    Analytic,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::IrsNoma => "irs_noma",
            Scheme::Oma => "oma",
            Scheme::NomaSinglePol => "noma_single_pol",
            Scheme::NomaDualPol => "noma_dual_pol",
            Scheme::Analytic => "analytic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "irs_noma" => Ok(Scheme::IrsNoma),
            "oma" => Ok(Scheme::Oma),
            "noma_single_pol" => Ok(Scheme::NomaSinglePol),
            "noma_dual_pol" => Ok(Scheme::NomaDualPol),
            "analytic" => Ok(Scheme::Analytic),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Cluster centre as written in config files (azimuth in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub azimuth_deg: f64,
    pub radius: f64,
    pub distance: f64,
}

impl ClusterSpec {
    pub fn geometry(&self) -> ClusterGeometry {
        ClusterGeometry { azimuth: self.azimuth_deg.to_radians(), radius: self.radius, distance: self.distance }
    }
}

fn default_spacing() -> f64 {
    0.5
}

fn default_energy_fraction() -> f64 {
    DEFAULT_ENERGY_FRACTION
}

/// A sweep over SNR, `L`, `ξ`, `χ` and `N` for a list of schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub name: String,
    /// Transmit antennas `M` (both polarizations).
    pub antennas: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_energy_fraction")]
    pub energy_fraction: f64,
    /// All `K` clusters; `target_cluster` is the simulated one.
    pub clusters: Vec<ClusterSpec>,
    #[serde(default)]
    pub target_cluster: usize,
    /// Groups per cluster `G`.
    pub groups: usize,
    /// Effective stream dimension `M̄`.
    pub streams: usize,
    /// Zero-based index of the simulated group.
    #[serde(default)]
    pub group: usize,
    /// Receive antennas `N` (both polarizations).
    pub rx_antennas: Vec<usize>,
    /// Dual-polarized reflecting elements per IRS.
    pub irs_elements: Vec<usize>,
    /// BS-user distances in meters, weakest (farthest) user first.
    pub user_distances: Vec<f64>,
    /// IRS-user distance in meters.
    pub irs_user_distance: f64,
    /// Array gain `ϱ`.
    pub array_gain: f64,
    /// Path-loss exponent `η`.
    pub path_loss_exponent: f64,
    /// iXPD values, applied to both BS-U and BS-IRS links.
    pub chi: Vec<f64>,
    /// SIC error factors.
    pub xi: Vec<f64>,
    /// `α²`, weakest user first.
    pub power: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    /// Per-`L` trial counts overriding `trials` for the IRS scheme.
    #[serde(default)]
    pub trials_by_elements: BTreeMap<usize, usize>,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn trials_for(&self, elements: usize) -> usize {
        self.trials_by_elements.get(&elements).copied().unwrap_or(self.trials)
    }

    pub fn users(&self) -> usize {
        self.user_distances.len()
    }

    pub fn array(&self) -> Result<ArrayGeometry> {
        if self.antennas == 0 || self.antennas % 2 != 0 {
            return Err(Error::constraint("M even", format!("M = {} must be a positive even count", self.antennas)));
        }
        ArrayGeometry::new(self.antennas / 2, self.spacing)
    }

    /// Large-scale gains of every user at iXPD `chi`.
    pub fn link_gains(&self, chi: f64) -> Result<Vec<LinkGains>> {
        let zeta_iu = path_loss(1.0, self.irs_user_distance, self.path_loss_exponent)?;
        self.user_distances
            .iter()
            .map(|&d| {
                let z = path_loss(self.array_gain, d, self.path_loss_exponent)?;
                let g = LinkGains { zeta_bs_u: z, zeta_bs_irs: z, zeta_irs_u: zeta_iu, chi_bs_u: chi, chi_bs_irs: chi };
                g.validate()?;
                Ok(g)
            })
            .collect()
    }

    pub fn power_allocation(&self) -> Result<PowerAllocation> {
        if self.power.len() != self.users() {
            return Err(Error::constraint(
                "|α²| = U",
                format!("{} power coefficients for {} users", self.power.len(), self.users()),
            ));
        }
        PowerAllocation::new(self.power.clone())
    }

    /// Subsets from the BS-U gains (independent of `χ`).
    pub fn assignment(&self) -> Result<SubsetAssignment> {
        let zetas = self
            .user_distances
            .iter()
            .map(|&d| path_loss(self.array_gain, d, self.path_loss_exponent))
            .collect::<Result<Vec<_>>>()?;
        Ok(assign_subsets(&zetas))
    }

    /// Checks every structural constraint and builds the precoders needed by
    /// the configured schemes.
    pub fn prepare(&self) -> Result<Prepared> {
        let nonempty = [
            ("snr_db", self.snr_db.len()),
            ("irs_elements", self.irs_elements.len()),
            ("rx_antennas", self.rx_antennas.len()),
            ("chi", self.chi.len()),
            ("xi", self.xi.len()),
            ("schemes", self.schemes.len()),
            ("user_distances", self.user_distances.len()),
            ("clusters", self.clusters.len()),
        ];
        for (field, len) in nonempty {
            if len == 0 {
                return Err(Error::Config(format!("`{field}` must not be empty")));
            }
        }
        if self.trials == 0 || self.trials_by_elements.values().any(|&t| t == 0) {
            return Err(Error::constraint("trials ≥ 1", "every trial count must be at least 1"));
        }
        if self.target_cluster >= self.clusters.len() {
            return Err(Error::Config(format!("target cluster {} out of range", self.target_cluster)));
        }
        if self.groups == 0 || 2 * self.groups > self.streams {
            return Err(Error::constraint("G ≤ M̄/2", format!("G = {} with M̄ = {}", self.groups, self.streams)));
        }
        if self.group >= self.groups {
            return Err(Error::Config(format!("group {} out of range (G = {})", self.group, self.groups)));
        }
        for &n in &self.rx_antennas {
            if n == 0 || n % 2 != 0 {
                return Err(Error::constraint("N even", format!("N = {n} must be a positive even count")));
            }
            if n < self.streams {
                return Err(Error::constraint("N ≥ M̄", format!("N = {n} but M̄ = {}", self.streams)));
            }
        }
        if self.irs_elements.contains(&0) {
            return Err(Error::constraint("L ≥ 1", "IRS needs at least one element"));
        }
        if self.user_distances.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("user distances must be listed weakest (farthest) first".into()));
        }
        if let Some(x) = self.xi.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::constraint("ξ ∈ [0, 1]", format!("ξ = {x}")));
        }
        if let Some(c) = self.chi.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::constraint("χ ∈ [0, 1]", format!("χ = {c}")));
        }
        if self.schemes.contains(&Scheme::Analytic) && self.chi.contains(&0.0) {
            return Err(Error::constraint("χ > 0", "the closed form needs χ > 0"));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR grid must be finite".into()));
        }
        let alloc = self.power_allocation()?;
        for &c in &self.chi {
            self.link_gains(c)?;
        }
        let clusters: Vec<ClusterGeometry> = self.clusters.iter().map(ClusterSpec::geometry).collect();
        let dual = ClusterSetup::new(&self.array()?, &clusters, self.target_cluster, self.streams, self.energy_fraction)?;
        let needs_single = self.schemes.iter().any(|s| matches!(s, Scheme::Oma | Scheme::NomaSinglePol));
        let single = if needs_single {
            // M co-polarized elements; the stream argument counts both halves, giving M̄ columns.
            let array = ArrayGeometry::new(self.antennas, self.spacing)?;
            Some(ClusterSetup::new(&array, &clusters, self.target_cluster, 2 * self.streams, self.energy_fraction)?)
        } else {
            None
        };
        Ok(Prepared { dual, single, alloc, assignment: self.assignment()? })
    }
}

/// Validated configuration with its precoders.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dual: ClusterSetup,
    pub single: Option<ClusterSetup>,
    pub alloc: PowerAllocation,
    pub assignment: SubsetAssignment,
}

/// Mean rates of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub scheme: Scheme,
    pub snr_db: f64,
    /// `L`.
    pub elements: usize,
    pub xi: f64,
    pub chi: f64,
    /// `N`.
    pub rx: usize,
    /// Mean rate per user, weakest first.
    pub user_rates: Vec<f64>,
    pub sum_rate: f64,
    /// Half-width of the 95% confidence interval of the sum rate.
    pub ci95: f64,
    pub trials: usize,
    /// Trials in which some user's serving channel was rank deficient.
    pub degenerate: usize,
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Thread count from [`WORKERS_ENV`], defaulting to the available parallelism.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

pub fn run_sweep(config: &SimConfig) -> Result<Vec<RateRecord>> {
    run_sweep_with_workers(config, workers_from_env()?)
}

/// Runs every configured scheme. Trials are distributed over `workers` threads
/// and reduced in trial order, so results do not depend on the worker count.
pub fn run_sweep_with_workers(config: &SimConfig, workers: usize) -> Result<Vec<RateRecord>> {
    let prepared = config.prepare()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| sweep(config, &prepared))
}

fn sweep(config: &SimConfig, prepared: &Prepared) -> Result<Vec<RateRecord>> {
    let mut records = Vec::new();
    for &scheme in &config.schemes {
        for &rx in &config.rx_antennas {
            // The single-polarized systems ignore χ and L; draw them once per N.
            let single_obs = match scheme {
                Scheme::Oma | Scheme::NomaSinglePol => {
                    let setup = prepared.single.as_ref().expect("prepared with single-polarized setup");
                    let users = config.link_gains(config.chi[0])?;
                    Some(run_trials(config.trials, |t| single_polarized_trial(setup, rx, config.group, &users, config.seed, t))?)
                }
                _ => None,
            };
            for &chi in &config.chi {
                let params = GroupParams {
                    rx,
                    elements: 1,
                    group: config.group,
                    users: config.link_gains(chi)?,
                    assignment: prepared.assignment.clone(),
                    alloc: prepared.alloc.clone(),
                    solver: config.solver,
                };
                let plain_obs = if scheme == Scheme::NomaDualPol {
                    Some(run_trials(config.trials, |t| dual_polarized_trial(&prepared.dual, &params, config.seed, t, false))?)
                } else {
                    None
                };
                for &elements in &config.irs_elements {
                    let point = |xi, snr_db| GridPoint { scheme, snr_db, elements, xi, chi, rx };
                    match scheme {
                        Scheme::IrsNoma => {
                            let params = GroupParams { elements, ..params.clone() };
                            let obs = run_trials(config.trials_for(elements), |t| {
                                dual_polarized_trial(&prepared.dual, &params, config.seed, t, true)
                            })?;
                            let a = &prepared.assignment;
                            push_grid(config, &mut records, &obs, point, |o, u, xi, snr| {
                                let subset = a.subset(a.polarization_of(u).expect("assigned user"));
                                noma_rate(o, &prepared.alloc, subset, u, xi, snr, true)
                            })?;
                        }
                        Scheme::NomaDualPol => {
                            let all: Vec<usize> = (0..config.users()).collect();
                            let obs = plain_obs.as_ref().expect("drawn above");
                            push_grid(config, &mut records, obs, point, |o, u, xi, snr| noma_rate(o, &prepared.alloc, &all, u, xi, snr, false))?;
                        }
                        Scheme::NomaSinglePol => {
                            let all: Vec<usize> = (0..config.users()).collect();
                            let obs = single_obs.as_ref().expect("drawn above");
                            push_grid(config, &mut records, obs, point, |o, u, xi, snr| noma_rate(o, &prepared.alloc, &all, u, xi, snr, false))?;
                        }
                        Scheme::Oma => {
                            let obs = single_obs.as_ref().expect("drawn above");
                            let users = config.users();
                            push_grid(config, &mut records, obs, point, |o, _, _, snr| Ok(oma_rate(o, users, snr)))?;
                        }
                        Scheme::Analytic => {
                            for &xi in &config.xi {
                                for &snr_db in &config.snr_db {
                                    records.push(analytic_point(config, prepared, point(xi, snr_db))?);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(records)
}

fn run_trials<F>(trials: usize, f: F) -> Result<Vec<Vec<UserObservation>>>
where
    F: Fn(u64) -> Result<Vec<UserObservation>> + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    scheme: Scheme,
    snr_db: f64,
    elements: usize,
    xi: f64,
    chi: f64,
    rx: usize,
}

/// Appends one record per `(ξ, SNR)` from a fixed set of trial observations.
fn push_grid<F>(config: &SimConfig, records: &mut Vec<RateRecord>, obs: &[Vec<UserObservation>], point: impl Fn(f64, f64) -> GridPoint, rate: F) -> Result<()>
where
    F: Fn(&UserObservation, usize, f64, f64) -> Result<f64>,
{
    for &xi in &config.xi {
        for &snr_db in &config.snr_db {
            let snr = db_to_linear(snr_db);
            let per_trial = obs
                .iter()
                .map(|trial| trial.iter().enumerate().map(|(u, o)| rate(o, u, xi, snr)).collect::<Result<Vec<f64>>>())
                .collect::<Result<Vec<_>>>()?;
            let degenerate = obs.iter().filter(|t| t.iter().any(|o| o.degenerate)).count();
            records.push(aggregate(point(xi, snr_db), &per_trial, degenerate));
        }
    }
    Ok(())
}

fn aggregate(p: GridPoint, per_trial: &[Vec<f64>], degenerate: usize) -> RateRecord {
    let n = per_trial.len();
    let users = per_trial.first().map_or(0, Vec::len);
    let mut user_rates = vec![0.0; users];
    for trial in per_trial {
        for (acc, r) in user_rates.iter_mut().zip(trial) {
            *acc += r;
        }
    }
    for r in &mut user_rates {
        *r /= n as f64;
    }
    let sums: Vec<f64> = per_trial.iter().map(|t| t.iter().sum()).collect();
    let sum_rate = user_rates.iter().sum();
    RateRecord {
        scheme: p.scheme,
        snr_db: p.snr_db,
        elements: p.elements,
        xi: p.xi,
        chi: p.chi,
        rx: p.rx,
        user_rates,
        sum_rate,
        ci95: ci95_half_width(&sums),
        trials: n,
        degenerate,
    }
}

/// `1.96 s / √n` with the unbiased sample deviation; zero below two samples.
pub fn ci95_half_width(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1.96 * (var / n as f64).sqrt()
}

fn analytic_point(config: &SimConfig, prepared: &Prepared, p: GridPoint) -> Result<RateRecord> {
    let snr = db_to_linear(p.snr_db);
    let a = &prepared.assignment;
    let user_rates = config
        .link_gains(p.chi)?
        .iter()
        .enumerate()
        .map(|(u, g)| {
            let dist = prepared.dual.gain_distribution(config.group, g.zeta_bs_u, p.rx, p.chi)?;
            let subset = a.subset(a.polarization_of(u).expect("assigned user"));
            ergodic_rate_closed_form(&RateInputs::for_user(&prepared.alloc, subset, u, p.xi, snr, dist)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RateRecord {
        scheme: Scheme::Analytic,
        snr_db: p.snr_db,
        elements: p.elements,
        xi: p.xi,
        chi: p.chi,
        rx: p.rx,
        sum_rate: user_rates.iter().sum(),
        user_rates,
        ci95: 0.0,
        trials: 0,
        degenerate: 0,
    })
}

/// Closed-form curves over the configured grid, one record per `(N, χ, L, ξ, SNR)`.
pub fn analytic_records(config: &SimConfig) -> Result<Vec<RateRecord>> {
    let analytic_only = SimConfig { schemes: vec![Scheme::Analytic], ..config.clone() };
    run_sweep_with_workers(&analytic_only, 1)
}

pub const CSV_HEADER: [&str; 12] = ["scheme", "snr_db", "L", "xi", "chi", "N", "user", "rate_bpcu", "sum_rate_bpcu", "ci95", "trials", "degenerate"];

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes one row per record; per-user fields are `;`-separated lists (users
/// numbered from 1, weakest first). Floats use shortest round-trip formatting.
pub fn write_csv<W: std::io::Write>(records: &[RateRecord], out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.scheme.as_str().to_string(),
            r.snr_db.to_string(),
            r.elements.to_string(),
            r.xi.to_string(),
            r.chi.to_string(),
            r.rx.to_string(),
            join(1..=r.user_rates.len()),
            join(r.user_rates.iter()),
            r.sum_rate.to_string(),
            r.ci95.to_string(),
            r.trials.to_string(),
            r.degenerate.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[RateRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(records, std::io::BufWriter::new(file))
}

/// Parses a file produced by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<RateRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let bad = |what: &str| Error::Config(format!("malformed CSV field `{what}`"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| Error::Io(std::io::Error::other(e)))?;
        if row.len() != CSV_HEADER.len() {
            return Err(Error::Config(format!("expected {} columns, found {}", CSV_HEADER.len(), row.len())));
        }
        let f = |i: usize| row[i].parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
        let n = |i: usize| row[i].parse::<usize>().map_err(|_| bad(CSV_HEADER[i]));
        let user_rates = row[7].split(';').map(|s| s.parse::<f64>().map_err(|_| bad("rate_bpcu"))).collect::<Result<Vec<_>>>()?;
        out.push(RateRecord {
            scheme: Scheme::parse(&row[0])?,
            snr_db: f(1)?,
            elements: n(2)?,
            xi: f(3)?,
            chi: f(4)?,
            rx: n(5)?,
            user_rates,
            sum_rate: f(8)?,
            ci95: f(9)?,
            trials: n(10)?,
            degenerate: n(11)?,
        });
    }
    Ok(out)
}

pub const PRESETS: [&str; 5] = ["fig4", "fig5", "fig6", "fig7", "fig8"];

/// Bundled configuration by name.
pub fn preset(name: &str) -> Result<SimConfig> {
    let text = match name {
        "fig4" => include_str!("../presets/fig4.json"),
        "fig5" => include_str!("../presets/fig5.json"),
        "fig6" => include_str!("../presets/fig6.json"),
        "fig7" => include_str!("../presets/fig7.json"),
        "fig8" => include_str!("../presets/fig8.json"),
        other => return Err(Error::Config(format!("unknown preset `{other}` (expected one of {PRESETS:?})"))),
    };
    SimConfig::from_json(text)
}
