//! Command-line surface: argument definitions, commands and output formats.
//!
//! Every command returns a value that renders as aligned text, CSV or a JSON
//! array of row objects. Curves use the fixed CSV header `x,y,formula`.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, BoundResult};
use crate::error::{Error, Result};
use crate::gaussian::{self, HomodyneSim, ThermalParams};
use crate::keyrate::{self, Axis, Count, KeyRateScenario, Protocol};
use crate::solver::{self, JmProblem};

#[derive(Debug, Parser)]
#[command(name = "cmu-jm", version, about = "Joint-measurability thresholds and key-rate bounds for lossy, noisy measurement units")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format (curves default to csv, reports to text).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact threshold efficiency for qubit directions, with analytic bounds.
    JmThreshold(JmThresholdArgs),
    /// Threshold curve on a grid.
    Curve(CurveArgs),
    /// Recompute the attack map and the DIQKD threshold tables.
    Tables,
    /// Extendibility of the thermal-noise channel.
    Gaussian(GaussianArgs),
    /// Key-rate upper bound and zero-key thresholds.
    Keyrate(KeyrateArgs),
}

#[derive(Debug, Args)]
pub struct JmThresholdArgs {
    /// Axis letters (`z,x,-y`) or `;`-separated vectors (`1 0 0;0 0 1`).
    #[arg(long)]
    pub dirs: String,
    #[arg(long, default_value_t = 1.0)]
    pub v: f64,
    /// Bisection tolerance on η.
    #[arg(long, default_value_t = solver::DEFAULT_THRESHOLD_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// fig4-solid-N, fig4-dashed-N, fig6-<NA>-<NB>-<KB>, fig7-<NA>-<NB>-<KB>.
    pub id: String,
    /// Grid as `min:max:points`.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct GaussianArgs {
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long = "N", default_value_t = 2)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct KeyrateArgs {
    #[arg(long, default_value = "diqkd")]
    pub protocol: String,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub v: f64,
    /// Number of settings; `NA,NB` for diqkd. `inf` allowed.
    #[arg(long = "N")]
    pub n: Option<String>,
    /// Key settings on Bob's side.
    #[arg(long = "K", default_value = "1")]
    pub k: String,
    /// Fix θ instead of the default (π/4, or optimized when binning).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, overrides_with = "no_bin")]
    pub bin: bool,
    #[arg(long = "no-bin", overrides_with = "bin")]
    pub no_bin: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// A rectangular rendering of a command result.
pub trait Report: Serialize {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;

    fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.json_rows()).map(|s| s + "\n").map_err(|e| Error::Io(e.to_string())),
            Format::Csv => {
                let mut s = self.header().join(",");
                s.push('\n');
                for r in self.rows() {
                    s.push_str(&r.join(","));
                    s.push('\n');
                }
                Ok(s)
            }
            Format::Text => Ok(aligned(&self.header(), &self.rows())),
        }
    }

    fn json_rows(&self) -> serde_json::Value {
        let v = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        match v {
            serde_json::Value::Array(_) => v,
            other => serde_json::Value::Array(vec![other]),
        }
    }
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, header.to_vec());
    for r in rows {
        line(&mut out, r.iter().map(String::as_str).collect());
    }
    out
}

/// Nine significant digits, fixed notation where reasonable.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..=9).contains(&mag) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Worker pool sized by the `THREADS` environment variable when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var("THREADS") {
        let n: usize = s
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Parse(format!("THREADS must be a positive integer, got '{s}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Parses `z,x,-y` or `;`-separated numeric vectors; vectors are normalized.
pub fn parse_dirs(s: &str) -> Result<Vec<Vector3<f64>>> {
    let axis = |t: &str| -> Result<Vector3<f64>> {
        let (sign, name) = match t.strip_prefix('-') {
            Some(rest) => (-1.0, rest),
            None => (1.0, t.strip_prefix('+').unwrap_or(t)),
        };
        let v = match name {
            "x" => Vector3::x(),
            "y" => Vector3::y(),
            "z" => Vector3::z(),
            _ => return Err(Error::Parse(format!("unknown direction '{t}'"))),
        };
        Ok(v * sign)
    };
    let vector = |t: &str| -> Result<Vector3<f64>> {
        let c: Vec<f64> = t
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{p}' in '{t}'"))))
            .collect::<Result<_>>()?;
        if c.len() != 3 {
            return Err(Error::Parse(format!("expected 3 components, got '{t}'")));
        }
        let v = Vector3::new(c[0], c[1], c[2]);
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Parse(format!("direction '{t}' has no length")));
        }
        Ok(v / n)
    };
    let dirs: Vec<_> = if s.contains(';') {
        s.split(';').map(str::trim).filter(|t| !t.is_empty()).map(vector).collect::<Result<_>>()?
    } else {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(axis).collect::<Result<_>>()?
    };
    if dirs.is_empty() {
        return Err(Error::Parse("no directions given".into()));
    }
    Ok(dirs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundLine {
    pub formula: String,
    pub eta: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JmThresholdReport {
    pub directions: Vec<[f64; 3]>,
    pub v: f64,
    pub solver: f64,
    pub solver_hi: f64,
    pub solves: usize,
    pub bounds: Vec<BoundLine>,
}

impl Report for JmThresholdReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["quantity", "eta", "gap"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![vec!["solver".into(), fmt_sig(self.solver), fmt_sig(0.0)]];
        rows.extend(self.bounds.iter().map(|b| vec![b.formula.clone(), fmt_sig(b.eta), fmt_sig(b.gap)]));
        rows
    }
}

pub fn cmd_jm_threshold(dirs: &[Vector3<f64>], v: f64, tol: f64) -> Result<JmThresholdReport> {
    if dirs.len() > solver::MAX_SETTINGS {
        return Err(Error::InvalidArgument(format!(
            "at most {} directions are supported, got {}",
            solver::MAX_SETTINGS,
            dirs.len()
        )));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let p = JmProblem::new(dirs, v)?;
    let t = solver::jm_threshold(&p, tol)?;
    let n = dirs.len();
    let mut found: Vec<BoundResult> = vec![
        bounds::ub_loss_any(n)?,
        bounds::ub_whitenoise(n, 2, v)?,
        bounds::ub_binary_qubit(n, v)?,
        bounds::ub_qubit_directions(dirs, v)?,
        bounds::ub_all_qubit_pvms(v)?,
    ];
    found.retain(|b| b.valid);
    Ok(JmThresholdReport {
        directions: dirs.iter().map(|d| [d.x, d.y, d.z]).collect(),
        v,
        solver: t.eta,
        solver_hi: t.hi,
        solves: t.solves,
        bounds: found
            .into_iter()
            .map(|b| BoundLine {
                formula: b.formula.id().to_string(),
                eta: b.value,
                gap: b.value - t.eta,
            })
            .collect(),
    })
}

/// Grid of `points ≥ 2` equispaced values in `[min, max] ⊆ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 points, got {points}")));
        }
        if !(0.0..=1.0).contains(&min) || !(0.0..=1.0).contains(&max) || min >= max {
            return Err(Error::InvalidArgument(format!("grid must satisfy 0 <= min < max <= 1, got {min}:{max}")));
        }
        Ok(Self { min, max, points })
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.max } else { self.min + step * i as f64 })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("grid must be min:max:points, got '{s}'")));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad grid bound '{t}'")));
        let points = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad grid size '{}'", parts[2])))?;
        Grid::new(num(parts[0])?, num(parts[1])?, points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveId {
    /// Loss plus white noise on `N` arbitrary qubit measurements.
    Fig4Solid(Count),
    /// `N` binary qubit measurements.
    Fig4Dashed(Count),
    /// DIQKD zero-key efficiency without binning, θ = π/4.
    Fig6(KeyRateScenario),
    /// DIQKD zero-key efficiency with binning, maximized over θ.
    Fig7(KeyRateScenario),
}

impl CurveId {
    pub fn default_grid(&self) -> Grid {
        match self {
            CurveId::Fig4Solid(_) | CurveId::Fig4Dashed(_) => Grid { min: 0.0, max: 1.0, points: 101 },
            CurveId::Fig6(_) | CurveId::Fig7(_) => Grid { min: 0.8, max: 1.0, points: 41 },
        }
    }
}

impl FromStr for CurveId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::Parse(format!("unknown curve id '{s}'"));
        let count = |t: &str| t.parse::<Count>().map_err(|_| unknown());
        if let Some(n) = s.strip_prefix("fig4-solid-") {
            return Ok(CurveId::Fig4Solid(count(n)?));
        }
        if let Some(n) = s.strip_prefix("fig4-dashed-") {
            return Ok(CurveId::Fig4Dashed(count(n)?));
        }
        let (binned, rest) = match (s.strip_prefix("fig6-"), s.strip_prefix("fig7-")) {
            (Some(r), _) => (false, r),
            (_, Some(r)) => (true, r),
            _ => return Err(unknown()),
        };
        let parts: Vec<&str> = rest.split('-').collect();
        let [na, nb, kb] = parts[..] else {
            return Err(unknown());
        };
        let sc = KeyRateScenario::diqkd(count(na)?, count(nb)?, count(kb)?, binned)?;
        Ok(if binned { CurveId::Fig7(sc) } else { CurveId::Fig6(sc) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub x: f64,
    pub y: f64,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Curve(pub Vec<CurveRow>);

impl Report for Curve {
    fn header(&self) -> Vec<&'static str> {
        vec!["x", "y", "formula"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.0.iter().map(|r| vec![fmt_sig(r.x), fmt_sig(r.y), r.formula.clone()]).collect()
    }
}

fn curve_point(id: &CurveId, x: f64) -> Result<CurveRow> {
    let row = |y: f64, formula: &str| CurveRow { x, y, formula: formula.to_string() };
    let from_bound = |b: BoundResult| row(b.value, b.formula.id());
    Ok(match *id {
        CurveId::Fig4Solid(Count::Finite(n)) => from_bound(bounds::ub_whitenoise(n, 2, x)?),
        // unbounded N: extendable only while v ≤ 1/(d+1)
        CurveId::Fig4Solid(Count::Infinite) => row(if x <= 1.0 / 3.0 { 1.0 } else { 0.0 }, "white-noise"),
        CurveId::Fig4Dashed(Count::Finite(n)) => from_bound(bounds::ub_binary_qubit(n, x)?),
        CurveId::Fig4Dashed(Count::Infinite) => from_bound(bounds::ub_all_qubit_pvms(x)?),
        CurveId::Fig6(s) => row(keyrate::diqkd_eta_threshold_at(&s, x, false)?, "diqkd-no-bin"),
        CurveId::Fig7(s) => row(keyrate::diqkd_eta_threshold_at(&s, x, true)?, "diqkd-bin"),
    })
}

/// Evaluates the curve on the grid in parallel; rows stay in grid order.
pub fn cmd_curve(id: &CurveId, grid: &Grid, pool: &rayon::ThreadPool) -> Result<Curve> {
    let xs = grid.values();
    let rows = pool.install(|| xs.par_iter().map(|&x| curve_point(id, x)).collect::<Result<Vec<_>>>())?;
    Ok(Curve(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableLine {
    pub table: String,
    pub case: String,
    pub quantity: String,
    pub computed: String,
    pub reference: String,
    pub deviation_pp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TablesReport(pub Vec<TableLine>);

impl Report for TablesReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["table", "case", "quantity", "computed", "reference", "deviation_pp"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|l| {
                vec![
                    l.table.clone(),
                    l.case.clone(),
                    l.quantity.clone(),
                    l.computed.clone(),
                    l.reference.clone(),
                    l.deviation_pp.map_or_else(|| "-".into(), |d| format!("{d:+.4}")),
                ]
            })
            .collect()
    }
}

/// Reference zero-key thresholds `(η, v)` in percent, per case.
pub const NO_BIN_REFERENCE: [(&str, f64, f64); 3] = [("3-2-1", 88.3, 89.8), ("inf-inf-1", 87.4, 88.8), ("inf-inf-inf", 85.3, 87.1)];
pub const BIN_REFERENCE: [(&str, f64, f64); 3] = [("3-2-1", 72.7, 89.8), ("inf-inf-1", 68.3, 88.8), ("inf-inf-inf", 74.2, 87.1)];

pub fn scenario_from_label(label: &str, binning: bool) -> Result<KeyRateScenario> {
    let parts: Vec<&str> = label.split('-').collect();
    let [na, nb, kb] = parts[..] else {
        return Err(Error::Parse(format!("expected NA-NB-KB, got '{label}'")));
    };
    KeyRateScenario::diqkd(na.parse()?, nb.parse()?, kb.parse()?, binning)
}

/// `(η, v)` zero-key thresholds; binned cases maximize over θ.
pub fn diqkd_thresholds(s: &KeyRateScenario) -> Result<(f64, f64)> {
    let theta_opt = s.binning;
    Ok((
        keyrate::diqkd_threshold(s, Axis::EtaAtV1, theta_opt)?,
        keyrate::diqkd_threshold(s, Axis::VAtEta1, theta_opt)?,
    ))
}

pub fn cmd_tables(pool: &rayon::ThreadPool) -> Result<TablesReport> {
    let mut lines = Vec::new();
    let ks = [Count::Finite(1), Count::Finite(2), Count::Finite(3), Count::Finite(4), Count::Infinite];
    let ns = [Count::Finite(2), Count::Finite(3), Count::Finite(4), Count::Finite(5), Count::Infinite];
    for k in ks {
        for n in ns {
            let cell = match keyrate::attack_map_cell(k, n) {
                Some(fs) => fs.iter().map(|f| f.id()).collect::<Vec<_>>().join("+"),
                None => "x".into(),
            };
            lines.push(TableLine {
                table: "attack-map".into(),
                case: format!("K={k},N={n}"),
                quantity: "attack".into(),
                computed: cell,
                reference: "-".into(),
                deviation_pp: None,
            });
        }
    }
    let jobs: Vec<(&str, bool, &str, f64, f64)> = NO_BIN_REFERENCE
        .iter()
        .map(|&(c, e, v)| ("diqkd-no-bin", false, c, e, v))
        .chain(BIN_REFERENCE.iter().map(|&(c, e, v)| ("diqkd-bin", true, c, e, v)))
        .collect();
    let results = pool.install(|| {
        jobs.par_iter()
            .map(|&(_, binned, case, _, _)| diqkd_thresholds(&scenario_from_label(case, binned)?))
            .collect::<Result<Vec<_>>>()
    })?;
    for ((table, _, case, pe, pv), (eta, v)) in jobs.into_iter().zip(results) {
        for (q, got, reference) in [("eta", eta, pe), ("v", v, pv)] {
            lines.push(TableLine {
                table: table.into(),
                case: case.into(),
                quantity: q.into(),
                computed: format!("{:.3}", 100.0 * got),
                reference: format!("{reference:.1}"),
                deviation_pp: Some(100.0 * got - reference),
            });
        }
    }
    Ok(TablesReport(lines))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianReport {
    pub eta: f64,
    pub eps: f64,
    pub n: usize,
    pub extendable: bool,
    pub ub_thermal: f64,
    pub ub_gaussian_measurement: f64,
    pub homodyne: Option<HomodyneSim>,
    pub violated: Option<String>,
    pub no_gaussian_attack: bool,
}

impl Report for GaussianReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["quantity", "value"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![
            vec!["extendable".into(), self.extendable.to_string()],
            vec!["thermal".into(), fmt_sig(self.ub_thermal)],
            vec!["gaussian-measurement".into(), fmt_sig(self.ub_gaussian_measurement)],
        ];
        match (&self.homodyne, &self.violated) {
            (Some(h), _) => {
                rows.push(vec!["gain".into(), fmt_sig(h.gain)]);
                rows.push(vec!["sigma2".into(), fmt_sig(h.sigma2)]);
            }
            (None, Some(msg)) => rows.push(vec!["violated".into(), msg.replace(',', ";")]),
            (None, None) => {}
        }
        rows.push(vec!["no-gaussian-attack".into(), self.no_gaussian_attack.to_string()]);
        rows
    }
}

pub fn cmd_gaussian(eta: f64, eps: f64, n: usize) -> Result<GaussianReport> {
    let p = ThermalParams::new(eta, eps)?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let extendable = gaussian::n_extendable_gaussian(&gaussian::thermal_xy(p), n)?;
    let (homodyne, violated) = match gaussian::homodyne_sim_params(eta, eps) {
        Ok(h) => (Some(h), None),
        Err(Error::InvalidArgument(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(GaussianReport {
        eta,
        eps,
        n,
        extendable,
        ub_thermal: gaussian::ub_thermal(n, eps)?.value,
        ub_gaussian_measurement: gaussian::ub_gaussian_meas(eps)?.value,
        homodyne,
        violated,
        no_gaussian_attack: gaussian::no_gauss_cc_attack(eta, eps, n)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyrateReport {
    pub protocol: Protocol,
    pub eta: f64,
    pub v: f64,
    pub theta: Option<f64>,
    pub bound: keyrate::KeyRateBound,
    pub thresholds: Vec<(String, f64)>,
}

impl Report for KeyrateReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["quantity", "value"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let b = &self.bound;
        let mut rows = vec![
            vec!["bound".into(), fmt_sig(b.value)],
            vec!["weight".into(), fmt_sig(b.weight)],
            vec!["h-key".into(), fmt_sig(b.h_key)],
            vec!["h-cond".into(), fmt_sig(b.h_cond)],
            vec!["zero-key".into(), b.zero_key.to_string()],
        ];
        if let Some(t) = self.theta {
            rows.push(vec!["theta".into(), fmt_sig(t)]);
        }
        rows.extend(self.thresholds.iter().map(|(k, v)| vec![k.clone(), fmt_sig(*v)]));
        rows
    }
}

fn parse_counts(s: &str) -> Result<Vec<Count>> {
    s.split(',').map(|t| t.parse::<Count>()).collect()
}

pub fn cmd_keyrate(a: &KeyrateArgs) -> Result<KeyrateReport> {
    let protocol: Protocol = a.protocol.parse()?;
    let binning = a.bin && !a.no_bin;
    let (eta, v) = (a.eta, a.v);
    let ns = parse_counts(a.n.as_deref().unwrap_or("inf"))?;
    let threshold_or_nan = |r: Result<f64>| match r {
        Ok(x) => Ok(x),
        Err(Error::NoThreshold { .. }) => Ok(f64::NAN),
        Err(e) => Err(e),
    };
    match protocol {
        Protocol::Bb84 => Ok(KeyrateReport {
            protocol,
            eta,
            v,
            theta: None,
            bound: keyrate::bb84_bound(eta, v, binning)?,
            thresholds: vec![("eta-threshold".into(), threshold_or_nan(keyrate::bb84_threshold(v, binning))?)],
        }),
        Protocol::Rdi => {
            let n = *ns.first().expect("at least one count");
            let (theta, bound) = match a.theta {
                Some(t) => (t, keyrate::rdi_bound(eta, v, t, n)?),
                None => keyrate::rdi_max_over_theta(eta, v, n)?,
            };
            Ok(KeyrateReport {
                protocol,
                eta,
                v,
                theta: Some(theta),
                bound,
                thresholds: vec![
                    ("v-threshold".into(), threshold_or_nan(keyrate::rdi_visibility_threshold(eta, n))?),
                    ("v-saturation".into(), keyrate::attack_saturation_visibility(eta)?),
                ],
            })
        }
        Protocol::Diqkd => {
            let (na, nb) = match ns[..] {
                [n] => (n, n),
                [na, nb] => (na, nb),
                _ => return Err(Error::Parse("--N takes NA or NA,NB".into())),
            };
            let s = KeyRateScenario::diqkd(na, nb, a.k.parse()?, binning)?;
            let (theta, bound, opt) = match a.theta {
                Some(t) => {
                    let s = s.with_theta(t)?;
                    (t, keyrate::diqkd_bound(&s, eta, v)?, false)
                }
                None if binning && s.k_b == Count::Finite(1) => {
                    let (t, b) = keyrate::diqkd_max_over_theta(&s, eta, v)?;
                    (t, b, true)
                }
                None => (FRAC_PI_4, keyrate::diqkd_bound(&s, eta, v)?, false),
            };
            let s = s.with_theta(if opt { FRAC_PI_4 } else { theta })?;
            Ok(KeyrateReport {
                protocol,
                eta,
                v,
                theta: Some(theta),
                bound,
                thresholds: vec![
                    ("eta-threshold".into(), threshold_or_nan(keyrate::diqkd_threshold(&s, Axis::EtaAtV1, opt))?),
                    ("v-threshold".into(), threshold_or_nan(keyrate::diqkd_threshold(&s, Axis::VAtEta1, opt))?),
                ],
            })
        }
    }
}

/// Runs a parsed command and returns the rendered output.
pub fn run(cli: &Cli) -> Result<String> {
    let pool = thread_pool()?;
    let text_default = cli.format.unwrap_or(Format::Text);
    match &cli.command {
        Command::JmThreshold(a) => cmd_jm_threshold(&parse_dirs(&a.dirs)?, a.v, a.tol)?.render(text_default),
        Command::Curve(a) => {
            let id: CurveId = a.id.parse()?;
            let grid = match &a.grid {
                Some(g) => g.parse()?,
                None => id.default_grid(),
            };
            cmd_curve(&id, &grid, &pool)?.render(cli.format.unwrap_or(Format::Csv))
        }
        Command::Tables => cmd_tables(&pool)?.render(text_default),
        Command::Gaussian(a) => cmd_gaussian(a.eta, a.eps, a.n)?.render(text_default),
        Command::Keyrate(a) => cmd_keyrate(a)?.render(text_default),
    }
}

/// Parses arguments, runs, and writes to `--out` or stdout.
pub fn main_with_args<I, T>(args: I) -> Result<Option<String>>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Some(e.to_string()));
        }
        Err(e) => return Err(Error::Parse(e.to_string())),
    };
    let out = run(&cli)?;
    match &cli.out {
        Some(path) => {
            std::fs::write(path, out)?;
            Ok(None)
        }
        None => Ok(Some(out)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.5), "0.500000000");
        assert_eq!(fmt_sig(1.0), "1.00000000");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(12.5), "12.5000000");
    }

    #[test]
    fn direction_parsing() {
        let d = parse_dirs("z,x,-y").unwrap();
        assert_eq!(d, vec![Vector3::z(), Vector3::x(), -Vector3::y()]);
        let d = parse_dirs("1 1 0; 0 0 2").unwrap();
        assert!((d[0].norm() - 1.0).abs() < 1e-15 && d[1] == Vector3::z());
        assert!(parse_dirs("w").is_err());
        assert!(parse_dirs("1 0; 0 0 1").is_err());
    }

    #[test]
    fn grid_parsing() {
        let g: Grid = "0:1:5".parse().unwrap();
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!("0:1:1".parse::<Grid>().is_err());
        assert!("0:2:3".parse::<Grid>().is_err());
    }

    #[test]
    fn curve_ids() {
        assert_eq!("fig4-solid-2".parse::<CurveId>().unwrap(), CurveId::Fig4Solid(Count::Finite(2)));
        assert_eq!("fig4-dashed-inf".parse::<CurveId>().unwrap(), CurveId::Fig4Dashed(Count::Infinite));
        assert!(matches!("fig7-inf-inf-inf".parse::<CurveId>().unwrap(), CurveId::Fig7(s) if s.binning));
        assert!("fig5-2".parse::<CurveId>().is_err());
        assert!("fig6-2-3".parse::<CurveId>().is_err());
    }

    #[test]
    fn jm_threshold_examples() {
        let r = cmd_jm_threshold(&parse_dirs("z,x").unwrap(), 1.0, 1e-6).unwrap();
        assert!((r.solver - 0.5).abs() < 1e-4);
        let b = r.bounds.iter().find(|b| b.formula == "binary-qubit").unwrap();
        assert!(b.gap.abs() < 1e-4);
        let r = cmd_jm_threshold(&parse_dirs("z").unwrap(), 0.7, 1e-6).unwrap();
        assert_eq!(r.solver, 1.0);
        assert!(cmd_jm_threshold(&parse_dirs("x,y,z,x,y,z,x").unwrap(), 1.0, 1e-5).is_err());
    }

    #[test]
    fn gaussian_examples() {
        let r = cmd_gaussian(0.4, 0.0, 2).unwrap();
        let h = r.homodyne.unwrap();
        assert!(r.extendable && (h.gain - 0.8f64.sqrt()).abs() < 1e-12 && (h.sigma2 - 0.1).abs() < 1e-12);
        let r = cmd_gaussian(0.6, 0.0, 2).unwrap();
        assert!(!r.extendable && r.homodyne.is_none() && r.violated.is_some());
        let r = cmd_gaussian(0.5, 0.0, 2).unwrap();
        assert!(r.extendable && r.homodyne.unwrap().sigma2 == 0.0);
        assert!(cmd_gaussian(1.5, 0.0, 2).is_err());
    }

    #[test]
    fn csv_rendering() {
        let c = Curve(vec![CurveRow { x: 0.5, y: 1.0, formula: "white-noise".into() }]);
        assert_eq!(c.render(Format::Csv).unwrap(), "x,y,formula\n0.500000000,1.00000000,white-noise\n");
        let j: serde_json::Value = serde_json::from_str(&c.render(Format::Json).unwrap()).unwrap();
        assert_eq!(j[0]["formula"], "white-noise");
    }
}
