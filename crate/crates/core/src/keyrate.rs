//! Convex-combination attacks on untrusted measurement units and the
//! resulting upper bounds on one-way key rates (BB84/CHSH-type,
//! receiver-device-independent and device-independent protocols).
//!
//! Eve replaces the measurement unit, with probability `p`, by a jointly
//! measurable one of efficiency `η*` and visibility `v*`, and by an ideal one
//! otherwise, so that the observed `(η, v)` are reproduced on average.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::optim::{binary_entropy as h, grid_golden_max, upper_crossing, NelderMead, RootBracket};

/// A number of measurements, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Count {
    Finite(usize),
    Infinite,
}

impl Count {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Count::Infinite)
    }

    /// `n/(n-1)`, with the infinite count giving 1 and `n = 1` giving `∞`.
    fn ratio_prev(&self) -> f64 {
        match *self {
            Count::Infinite => 1.0,
            Count::Finite(n) => n as f64 / (n as f64 - 1.0),
        }
    }

    /// `(k+1)/k`, with the infinite count giving 1.
    fn ratio_next(&self) -> f64 {
        match *self {
            Count::Infinite => 1.0,
            Count::Finite(k) => (k as f64 + 1.0) / k as f64,
        }
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Count::Finite(n) => write!(f, "{n}"),
            Count::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Count {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Count::Infinite);
        }
        s.parse::<usize>()
            .map(Count::Finite)
            .map_err(|_| Error::Parse(format!("expected a positive integer or 'inf', got '{s}'")))
    }
}

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Which joint-measurability bound fixes Eve's `η*(v*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackFormula {
    /// Loss plus white noise, arbitrary measurements in dimension `d`.
    ArbitraryDim,
    /// A few binary qubit measurements.
    FewBinary,
    /// All qubit projective measurements.
    AllPvms,
}

impl AttackFormula {
    pub fn id(&self) -> &'static str {
        match self {
            AttackFormula::ArbitraryDim => "p-arbitrary-dim",
            AttackFormula::FewBinary => "p-few-binary",
            AttackFormula::AllPvms => "p-all-pvms",
        }
    }
}

impl fmt::Display for AttackFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Mixing probability and simulated parameters of a convex-combination attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackParams {
    /// `raw_p` clamped to `[0, 1]`.
    pub p: f64,
    pub raw_p: f64,
    pub eta_star: f64,
    pub v_star: f64,
    pub formula: AttackFormula,
}

impl AttackParams {
    fn new(raw_p: f64, eta: f64, v: f64, formula: AttackFormula) -> Self {
        let p = raw_p.clamp(0.0, 1.0);
        let (eta_star, v_star) = if raw_p >= 1.0 {
            (eta, v)
        } else if p <= 0.0 {
            (1.0, 1.0)
        } else {
            let es = 1.0 - (1.0 - eta) / p;
            let vs = if es.abs() > 0.0 { (1.0 - (1.0 - eta * v) / p) / es } else { 1.0 };
            (es, vs)
        };
        Self {
            p,
            raw_p,
            eta_star,
            v_star,
            formula,
        }
    }

    /// Largest residual of `p(1-η*v*) = 1-ηv` and `p(1-η*) = 1-η`.
    pub fn consistency_residual(&self, eta: f64, v: f64) -> f64 {
        let a = self.p * (1.0 - self.eta_star * self.v_star) - (1.0 - eta * v);
        let b = self.p * (1.0 - self.eta_star) - (1.0 - eta);
        a.abs().max(b.abs())
    }
}

fn check_ev(eta: f64, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) || !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!(
            "eta and v must lie in [0, 1], got eta = {eta}, v = {v}"
        )));
    }
    Ok(())
}

fn check_kn(k: Count, n: Count) -> Result<()> {
    if k == Count::Finite(0) || n == Count::Finite(0) {
        return Err(Error::InvalidArgument("K and N must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("K = {k} exceeds N = {n}")));
    }
    Ok(())
}

/// `p' = [(η(1-v) + d(1-ηv))/d]·max{(K+1)/K, N/(N-1)}`; infinite counts
/// contribute a factor 1, so `K = N = ∞` gives `1 - η(v(d+1)-1)/d`.
pub fn p_prime(k: Count, n: Count, d: usize, eta: f64, v: f64) -> Result<AttackParams> {
    check_ev(eta, v)?;
    check_kn(k, n)?;
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {d}")));
    }
    let d = d as f64;
    let base = (eta * (1.0 - v) + d * (1.0 - eta * v)) / d;
    let factor = k.ratio_next().max(n.ratio_prev());
    Ok(AttackParams::new(base * factor, eta, v, AttackFormula::ArbitraryDim))
}

/// `p''_N = (N(1-ηv) + η√N(1-v))/(N-1)` for `N ≥ 2` binary qubit measurements.
pub fn p_dprime(n: usize, eta: f64, v: f64) -> Result<AttackParams> {
    check_ev(eta, v)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("N must be at least 2, got {n}")));
    }
    let nf = n as f64;
    let raw = (nf * (1.0 - eta * v) + eta * nf.sqrt() * (1.0 - v)) / (nf - 1.0);
    Ok(AttackParams::new(raw, eta, v, AttackFormula::FewBinary))
}

/// `p''' = 1 - ηv + √(η(1-v)(2-η(1+v)))` for all qubit projective measurements.
pub fn p_tprime(eta: f64, v: f64) -> Result<AttackParams> {
    check_ev(eta, v)?;
    let rad = (eta * (1.0 - v) * (2.0 - eta * (1.0 + v))).max(0.0);
    Ok(AttackParams::new(1.0 - eta * v + rad.sqrt(), eta, v, AttackFormula::AllPvms))
}

/// Formulas that give the best attack for binary qubit measurements, by
/// number of key settings `K` and total settings `N`. `None` when `K > N`.
pub fn attack_map_cell(k: Count, n: Count) -> Option<&'static [AttackFormula]> {
    use AttackFormula::*;
    if k > n || k == Count::Finite(0) {
        return None;
    }
    Some(match (k, n) {
        (_, Count::Finite(1)) => &[ArbitraryDim],
        (_, Count::Finite(2)) => &[FewBinary],
        (Count::Finite(1), Count::Finite(3)) => &[ArbitraryDim],
        (_, Count::Finite(3)) => &[FewBinary],
        (Count::Infinite, Count::Infinite) => &[AllPvms],
        (Count::Finite(k), _) if k <= 2 => &[ArbitraryDim],
        _ => &[ArbitraryDim, AllPvms],
    })
}

/// Best attack on `N` binary qubit measurements with `K` key settings.
pub fn best_attack_p(k: Count, n: Count, eta: f64, v: f64) -> Result<AttackParams> {
    check_ev(eta, v)?;
    check_kn(k, n)?;
    let cell = attack_map_cell(k, n).expect("K <= N was checked");
    let mut best: Option<AttackParams> = None;
    for f in cell {
        let a = match (f, n) {
            (AttackFormula::ArbitraryDim, _) => p_prime(k, n, 2, eta, v)?,
            (AttackFormula::FewBinary, Count::Finite(n)) => p_dprime(n, eta, v)?,
            (AttackFormula::FewBinary, Count::Infinite) => unreachable!("no such table cell"),
            (AttackFormula::AllPvms, _) => p_tprime(eta, v)?,
        };
        if best.is_none_or(|b| a.raw_p > b.raw_p) {
            best = Some(a);
        }
    }
    Ok(best.expect("every cell lists a formula"))
}

/// Bound `weight·h_key - h_cond` on the asymptotic one-way key rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateBound {
    pub value: f64,
    /// `1-p`, or the ideal-device weight `t` for DIQKD.
    pub weight: f64,
    pub h_key: f64,
    pub h_cond: f64,
    pub zero_key: bool,
}

impl KeyRateBound {
    fn new(weight: f64, h_key: f64, h_cond: f64) -> Self {
        let value = weight * h_key - h_cond;
        Self {
            value,
            weight,
            h_key,
            h_cond,
            zero_key: value <= 0.0,
        }
    }
}

/// `(1-p)·H_key - H_cond`.
pub fn keyrate_ub_oneway(p: f64, h_key: f64, h_cond: f64) -> KeyRateBound {
    KeyRateBound::new(1.0 - p, h_key, h_cond)
}

/// BB84/CHSH-type bound with a single key setting on a qubit.
pub fn bb84_bound(eta: f64, v: f64, binning: bool) -> Result<KeyRateBound> {
    let a = p_prime(Count::Finite(1), Count::Infinite, 2, eta, v)?;
    let h_cond = if binning {
        0.5 * (h(0.5 * eta * (1.0 + v)) + h(0.5 * eta * (1.0 - v)))
    } else {
        eta * h(0.5 * (1.0 + v)) + h(eta)
    };
    Ok(keyrate_ub_oneway(a.p, 1.0, h_cond))
}

const THRESHOLD_GRID: usize = 201;
const THRESHOLD_TOL: f64 = 1e-10;

/// Largest efficiency with a non-positive BB84 bound at visibility `v`.
pub fn bb84_threshold(v: f64, binning: bool) -> Result<f64> {
    let f = |eta: f64| bb84_bound(eta, v, binning).map_or(f64::NAN, |b| b.value);
    upper_crossing(f, 0.0, 1.0, THRESHOLD_GRID, THRESHOLD_TOL)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2 + 1e-15).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta must lie in [0, pi/2], got {theta}")));
    }
    Ok(())
}

/// Receiver-device-independent protocol with `N` qubit states at angle `θ`.
/// For `N = ∞` the bound is rescaled by `N`.
pub fn rdi_bound(eta: f64, v: f64, theta: f64, n: Count) -> Result<KeyRateBound> {
    check_theta(theta)?;
    let a = p_tprime(eta, v)?;
    let s = theta.sin().powi(2);
    let err = if v >= 1.0 {
        0.0
    } else {
        h((1.0 - v) / (2.0 * (1.0 - v * theta.cos().powi(2))))
    };
    match n {
        Count::Infinite => Ok(KeyRateBound::new(
            1.0 - a.p,
            s / 2.0,
            (eta * v * s / 2.0 + eta * (1.0 - v)) * err,
        )),
        Count::Finite(n) if n >= 2 => {
            let m = n as f64 - 1.0;
            let p_succ = eta * v * s / (2.0 * m) + eta * (1.0 - v) / n as f64;
            Ok(KeyRateBound::new(1.0 - a.p, s / (2.0 * m), p_succ * err))
        }
        Count::Finite(n) => Err(Error::InvalidArgument(format!("RDI needs N >= 2, got {n}"))),
    }
}

/// `max_θ rdi_bound` on a 200-point grid refined by golden section; returns `(θ*, bound)`.
pub fn rdi_max_over_theta(eta: f64, v: f64, n: Count) -> Result<(f64, KeyRateBound)> {
    rdi_bound(eta, v, 0.0, n)?;
    let f = |th: f64| rdi_bound(eta, v, th.clamp(0.0, FRAC_PI_2), n).map_or(f64::NEG_INFINITY, |b| b.value);
    let (theta, _) = grid_golden_max(f, 0.0, FRAC_PI_2, 200, 1e-10);
    let theta = theta.clamp(0.0, FRAC_PI_2);
    Ok((theta, rdi_bound(eta, v, theta, n)?))
}

/// Largest visibility at which the θ-maximized RDI bound is still non-positive.
pub fn rdi_visibility_threshold(eta: f64, n: Count) -> Result<f64> {
    let f = |v: f64| rdi_max_over_theta(eta, v, n).map_or(f64::NAN, |(_, b)| b.value);
    upper_crossing(f, 0.0, 1.0, THRESHOLD_GRID, THRESHOLD_TOL)
}

/// Visibility below which the all-PVM attack replaces the device with
/// certainty (`p''' ≥ 1`), found by bisection.
pub fn attack_saturation_visibility(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1], got {eta}")));
    }
    let f = |v: f64| p_tprime(eta, v).map_or(f64::NAN, |a| a.raw_p - 1.0);
    let bracket = RootBracket::new(&f, 0.0, 1.0, 1e-13)?;
    Ok(crate::optim::bisect(f, &bracket))
}

/// Protocol family of a key-rate scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Bb84,
    Rdi,
    Diqkd,
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bb84" | "chsh" | "bb84-chsh" => Ok(Protocol::Bb84),
            "rdi" => Ok(Protocol::Rdi),
            "diqkd" | "di" => Ok(Protocol::Diqkd),
            other => Err(Error::Parse(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Measurement class assumed for both devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementClass {
    /// Arbitrary measurements in dimension `d`.
    ArbitraryDim(usize),
    /// Binary qubit measurements; the attack per side follows [`attack_map_cell`].
    BinaryQubit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateScenario {
    pub kind: Protocol,
    pub n_a: Count,
    pub n_b: Count,
    pub k_b: Count,
    pub binning: bool,
    pub theta: f64,
    pub class: MeasurementClass,
}

impl KeyRateScenario {
    /// DIQKD with binary qubit measurements and the maximally entangled state.
    pub fn diqkd(n_a: Count, n_b: Count, k_b: Count, binning: bool) -> Result<Self> {
        Self {
            kind: Protocol::Diqkd,
            n_a,
            n_b,
            k_b,
            binning,
            theta: FRAC_PI_4,
            class: MeasurementClass::BinaryQubit,
        }
        .validated()
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.theta = theta;
        self.validated()
    }

    pub fn with_class(mut self, class: MeasurementClass) -> Result<Self> {
        self.class = class;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        check_kn(self.k_b, self.n_b)?;
        if self.n_a == Count::Finite(0) {
            return Err(Error::InvalidArgument("N_A must be at least 1".into()));
        }
        check_theta(self.theta)?;
        if let MeasurementClass::ArbitraryDim(d) = self.class {
            if d < 2 {
                return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {d}")));
            }
        }
        Ok(self)
    }

    /// Short label such as `3-2-1` or `inf-inf-1`.
    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.n_a, self.n_b, self.k_b)
    }
}

/// Weights of the four-term decomposition of the joint measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackSplit {
    pub p_a: f64,
    pub p_b: f64,
    /// `(1-ηv)²`, both sides maximally noisy.
    pub q: f64,
    /// Weight of the ideal devices, `2ηv - η²v² - p_A - p_B`.
    pub t: f64,
    pub alice: AttackParams,
    pub bob: AttackParams,
}

pub fn diqkd_attack_split(s: &KeyRateScenario, eta: f64, v: f64) -> Result<AttackSplit> {
    check_ev(eta, v)?;
    let (alice, bob) = match s.class {
        MeasurementClass::BinaryQubit => (
            best_attack_p(s.n_a, s.n_a, eta, v)?,
            best_attack_p(s.k_b, s.n_b, eta, v)?,
        ),
        // K = N_A - 1 and K = N_A give the same factor N_A/(N_A - 1)
        MeasurementClass::ArbitraryDim(d) => (
            p_prime(s.n_a, s.n_a, d, eta, v)?,
            p_prime(s.k_b, s.n_b, d, eta, v)?,
        ),
    };
    let ev = eta * v;
    let (p_a, p_b) = (ev * alice.p, ev * bob.p);
    Ok(AttackSplit {
        p_a,
        p_b,
        q: (1.0 - ev).powi(2),
        t: 2.0 * ev - ev * ev - p_a - p_b,
        alice,
        bob,
    })
}

/// Conditional entropy of Bob's key outcome given Alice's, without binning.
pub fn h_cond_no_bin(eta: f64, v: f64) -> f64 {
    eta * (1.0 - eta) + h(eta) + eta * eta * h(0.5 * (1.0 + v * v))
}

/// Conditional entropy after Bob bins the no-click outcome, for the state
/// `cos θ|00⟩ + sin θ|11⟩`.
pub fn h_cond_binned(eta: f64, v: f64, theta: f64) -> f64 {
    let c = v * (2.0 * theta).cos();
    let w = 1.0 - v * v;
    let mid = if 1.0 - c > 0.0 { h(eta * (1.0 - w / (2.0 * (1.0 - c)))) } else { 0.0 };
    let last = if 1.0 + c > 0.0 { h(eta * w / (2.0 * (1.0 + c))) } else { 0.0 };
    (1.0 - eta) * h(0.5 * eta * (1.0 - c)) + 0.5 * eta * (1.0 - c) * mid + 0.5 * eta * (1.0 + c) * last
}

pub fn diqkd_bound(s: &KeyRateScenario, eta: f64, v: f64) -> Result<KeyRateBound> {
    diqkd_bound_at(s, eta, v, s.theta)
}

fn diqkd_bound_at(s: &KeyRateScenario, eta: f64, v: f64, theta: f64) -> Result<KeyRateBound> {
    check_theta(theta)?;
    let split = diqkd_attack_split(s, eta, v)?;
    let h_key = h(theta.cos().powi(2));
    let h_cond = if s.binning { h_cond_binned(eta, v, theta) } else { h_cond_no_bin(eta, v) };
    Ok(KeyRateBound::new(split.t, h_key, h_cond))
}

/// Smallest `θ` (and distance from `π/2`) searched when optimizing the state.
///
/// The bound behaves like `θ²·log(1/θ²)·(t - η(1-η))` as `θ → 0`, so its
/// supremum over the open interval is set by an arbitrarily weakly entangled
/// state. Searching from `10⁻³` matches [`crate::cli::BIN_REFERENCE`].
pub const THETA_MIN: f64 = 1e-3;

/// Maximizes the DIQKD bound over `θ ∈ [THETA_MIN, π/2 - THETA_MIN]`: a grid
/// refined by golden section, then Nelder–Mead seeded at `π/8, π/4, 3π/8`;
/// returns `(θ*, bound)`.
pub fn diqkd_max_over_theta(s: &KeyRateScenario, eta: f64, v: f64) -> Result<(f64, KeyRateBound)> {
    diqkd_attack_split(s, eta, v)?;
    let (lo, hi) = (THETA_MIN, FRAC_PI_2 - THETA_MIN);
    let value = |th: f64| diqkd_bound_at(s, eta, v, th.clamp(lo, hi)).map_or(f64::NEG_INFINITY, |b| b.value);
    let (mut best_th, mut best) = grid_golden_max(value, lo, hi, 200, 1e-10);
    let nm = NelderMead {
        initial_step: 0.05,
        tol: 1e-8,
        ..NelderMead::default()
    };
    for seed in [FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8] {
        let m = nm.minimize(|x: &[f64]| -value(x[0]), &[seed]);
        if -m.value > best {
            best = -m.value;
            best_th = m.point[0];
        }
    }
    let theta = best_th.clamp(lo, hi);
    Ok((theta, diqkd_bound_at(s, eta, v, theta)?))
}

/// Which parameter is scanned for a zero-key threshold; the other one is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    EtaAtV1,
    VAtEta1,
}

fn theta_search_applies(s: &KeyRateScenario, theta_opt: bool) -> bool {
    // only a single key setting tolerates a partially entangled state
    theta_opt && s.k_b == Count::Finite(1)
}

/// The DIQKD bound at `(η, v)`, maximized over `θ` when requested and meaningful.
pub fn diqkd_value(s: &KeyRateScenario, eta: f64, v: f64, theta_opt: bool) -> Result<f64> {
    if theta_search_applies(s, theta_opt) {
        Ok(diqkd_max_over_theta(s, eta, v)?.1.value)
    } else {
        Ok(diqkd_bound(s, eta, v)?.value)
    }
}

/// Zero crossing of the DIQKD bound along `axis`.
pub fn diqkd_threshold(s: &KeyRateScenario, axis: Axis, theta_opt: bool) -> Result<f64> {
    let f = |x: f64| {
        let (eta, v) = match axis {
            Axis::EtaAtV1 => (x, 1.0),
            Axis::VAtEta1 => (1.0, x),
        };
        diqkd_value(s, eta, v, theta_opt).unwrap_or(f64::NAN)
    };
    upper_crossing(f, 0.0, 1.0, THRESHOLD_GRID, THRESHOLD_TOL)
}

/// Largest `η` with a non-positive bound at visibility `v`; 1 when the bound
/// is non-positive on the whole range.
pub fn diqkd_eta_threshold_at(s: &KeyRateScenario, v: f64, theta_opt: bool) -> Result<f64> {
    let f = |eta: f64| diqkd_value(s, eta, v, theta_opt).unwrap_or(f64::NAN);
    match upper_crossing(f, 0.0, 1.0, THRESHOLD_GRID, THRESHOLD_TOL) {
        Err(Error::NoThreshold { .. }) if f(1.0) <= 0.0 => Ok(1.0),
        other => other,
    }
}
