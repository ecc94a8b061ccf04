//! Closed-form sufficient conditions for (partial) joint measurability of
//! lossy, noisy measurement units.
//!
//! Thresholds are upper limits on the detection efficiency `η` below which
//! the effective measurements are guaranteed to be jointly measurable, or
//! visibility thresholds `v*` for the noisy qubit measurements themselves.

use std::fmt;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::weiszfeld;
use crate::qop::{HermitianOp, Outcome, Povm, QubitBloch};

/// Largest `N` accepted by the `2^N` bitstring enumerations.
pub const MAX_BITSTRING_N: usize = 20;
/// Largest `N` for the explicit parent construction (`2^(N+1)` matrices).
pub const MAX_PARENT_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    /// `η ≤ 1/N` for any channel.
    LossAny,
    /// Loss concatenated with a convex noise channel extendable at `v*`.
    NoiseConcat,
    /// Loss and white noise, `d/(N(v(d+1)-1))`.
    WhiteNoise,
    /// Dimension-free version `1/(Nv)`.
    WhiteNoiseFloor,
    /// `N` binary qubit measurements, `1/(√N((√N+1)v-1))`.
    BinaryQubit,
    /// Specific qubit directions through their visibility threshold `v*`.
    QubitDirections,
    AllQubitPvms,
    AllPovms,
    KjmBinaryQubit,
    KjmWhiteNoise,
    KjmThermal,
    Thermal,
    GaussianMeasurement,
}

impl Formula {
    pub fn id(&self) -> &'static str {
        match self {
            Formula::LossAny => "loss-any",
            Formula::NoiseConcat => "noise-concat",
            Formula::WhiteNoise => "white-noise",
            Formula::WhiteNoiseFloor => "white-noise-floor",
            Formula::BinaryQubit => "binary-qubit",
            Formula::QubitDirections => "qubit-directions",
            Formula::AllQubitPvms => "all-qubit-pvms",
            Formula::AllPovms => "all-povms",
            Formula::KjmBinaryQubit => "kjm-binary-qubit",
            Formula::KjmWhiteNoise => "kjm-white-noise",
            Formula::KjmThermal => "kjm-thermal",
            Formula::Thermal => "thermal",
            Formula::GaussianMeasurement => "gaussian-measurement",
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// A threshold clamped to `[0, 1]`, with the unclamped value kept in `raw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundResult {
    pub value: f64,
    pub raw: f64,
    pub formula: Formula,
    /// Whether the preconditions of the formula held. When they do not, the
    /// condition is vacuous and `value` is 1.
    pub valid: bool,
}

impl BoundResult {
    pub fn new(raw: f64, formula: Formula, valid: bool) -> Self {
        let value = if valid { raw.clamp(0.0, 1.0) } else { 1.0 };
        Self {
            value,
            raw,
            formula,
            valid,
        }
    }

    fn vacuous(formula: Formula) -> Self {
        Self::new(f64::INFINITY, formula, false)
    }
}

fn need_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("the number of measurements must be at least 1".into()));
    }
    Ok(())
}

fn need_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

fn need_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {d}")));
    }
    Ok(())
}

pub fn ub_loss_any(n: usize) -> Result<BoundResult> {
    need_n(n)?;
    Ok(BoundResult::new(1.0 / n as f64, Formula::LossAny, true))
}

/// `q ≤ (1-v*)/((1-v) + (v-v*)/q*)` for a replacement channel after a convex
/// noise channel. When `v = v* = 1` the expression is `0/0` and `q*` is returned.
pub fn concat_bound(q_star: f64, v_star: f64, v: f64) -> Result<BoundResult> {
    if !(q_star > 0.0 && q_star <= 1.0) {
        return Err(Error::InvalidArgument(format!("q* must lie in (0, 1], got {q_star}")));
    }
    need_unit("v", v)?;
    if !(0.0 <= v_star && v_star <= v) {
        return Err(Error::InvalidArgument(format!("need 0 <= v* <= v, got v* = {v_star}, v = {v}")));
    }
    let den = (1.0 - v) + (v - v_star) / q_star;
    let raw = if den == 0.0 { q_star } else { (1.0 - v_star) / den };
    Ok(BoundResult::new(raw, Formula::NoiseConcat, true))
}

/// Loss after a convex noise channel whose measurements are jointly
/// measurable at visibility `v_star`. Vacuous (value 1) when `v ≤ v*`.
pub fn ub_noise_concat(n: usize, v_star: f64, v: f64) -> Result<BoundResult> {
    need_n(n)?;
    need_unit("v", v)?;
    if v <= v_star {
        return Ok(BoundResult::new(1.0, Formula::NoiseConcat, true));
    }
    concat_bound(1.0 / n as f64, v_star, v)
}

/// `η ≤ d/(N(v(d+1)-1))`; vacuous when `v(d+1) ≤ 1`.
pub fn ub_whitenoise(n: usize, d: usize, v: f64) -> Result<BoundResult> {
    need_n(n)?;
    need_dim(d)?;
    need_unit("v", v)?;
    let s = v * (d as f64 + 1.0) - 1.0;
    if s <= 0.0 {
        return Ok(BoundResult::vacuous(Formula::WhiteNoise));
    }
    Ok(BoundResult::new(d as f64 / (n as f64 * s), Formula::WhiteNoise, true))
}

/// The dimension-independent `1/(Nv)`, the minimum of [`ub_whitenoise`] over `d`.
pub fn whitenoise_floor(n: usize, v: f64) -> Result<BoundResult> {
    need_n(n)?;
    need_unit("v", v)?;
    if v == 0.0 {
        return Ok(BoundResult::vacuous(Formula::WhiteNoiseFloor));
    }
    Ok(BoundResult::new(1.0 / (n as f64 * v), Formula::WhiteNoiseFloor, true))
}

fn unit(m: &Vector3<f64>) -> Result<Vector3<f64>> {
    let n = m.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument("measurement directions must be nonzero".into()));
    }
    Ok(m / n)
}

/// Exact visibility threshold of two noisy qubit measurements.
pub fn v_star_2(m1: &Vector3<f64>, m2: &Vector3<f64>) -> Result<f64> {
    let (a, b) = (unit(m1)?, unit(m2)?);
    Ok(2.0 / ((a + b).norm() + (a - b).norm()))
}

/// Exact visibility threshold of three noisy qubit measurements, through the
/// Fermat–Torricelli point of `t_0 = m1+m2+m3` and `t_k = 2m_k - t_0`.
pub fn v_star_3(m1: &Vector3<f64>, m2: &Vector3<f64>, m3: &Vector3<f64>) -> Result<f64> {
    let ms = [unit(m1)?, unit(m2)?, unit(m3)?];
    let t0 = ms[0] + ms[1] + ms[2];
    let ts = [t0, 2.0 * ms[0] - t0, 2.0 * ms[1] - t0, 2.0 * ms[2] - t0];
    let ft = weiszfeld(&ts, 1e-12)?;
    let total: f64 = ts.iter().map(|t| (t - ft.point).norm()).sum();
    Ok(4.0 / total)
}

fn signed_sums(ms: &[Vector3<f64>]) -> impl Iterator<Item = Vector3<f64>> + '_ {
    (0u64..1 << ms.len()).map(move |a| {
        ms.iter()
            .enumerate()
            .map(|(k, m)| if a >> k & 1 == 1 { -m } else { *m })
            .sum()
    })
}

fn check_bitstring_n(n: usize, cap: usize) -> Result<()> {
    if n == 0 || n > cap {
        return Err(Error::InvalidArgument(format!(
            "number of measurements must be in 1..={cap}, got {n}"
        )));
    }
    Ok(())
}

/// Sufficient visibility `2^N / Σ_a |Σ_k (-1)^{a_k} m̂_k|` for `N` qubit measurements.
pub fn v_star_n(ms: &[Vector3<f64>]) -> Result<f64> {
    check_bitstring_n(ms.len(), MAX_BITSTRING_N)?;
    let units = ms.iter().map(unit).collect::<Result<Vec<_>>>()?;
    let total: f64 = signed_sums(&units).map(|w| w.norm()).sum();
    Ok((1u64 << ms.len()) as f64 / total)
}

/// Outcome of the bitstring joint-measurability test for (unnormalized) vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitstringCheck {
    /// `Σ_a |Σ_k (-1)^{a_k} m_k|`
    pub sum: f64,
    /// `2^N`
    pub bound: f64,
    pub jm: bool,
    /// `Σ_k |m_k|²`
    pub relaxation_sum: f64,
    pub relaxation_holds: bool,
}

pub fn bitstring_jm_check(ms: &[Vector3<f64>]) -> Result<BitstringCheck> {
    check_bitstring_n(ms.len(), MAX_BITSTRING_N)?;
    if let Some(m) = ms.iter().find(|m| m.norm() > 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("vector norm {} exceeds 1", m.norm())));
    }
    let sum: f64 = signed_sums(ms).map(|w| w.norm()).sum();
    let bound = (1u64 << ms.len()) as f64;
    let relaxation_sum: f64 = ms.iter().map(|m| m.norm_squared()).sum();
    Ok(BitstringCheck {
        sum,
        bound,
        jm: sum <= bound * (1.0 + 1e-12),
        relaxation_sum,
        relaxation_holds: relaxation_sum <= 1.0,
    })
}

/// `η ≤ 1/(√N((√N+1)v-1))`; vacuous when `v ≤ 1/(√N+1)`.
pub fn ub_binary_qubit(n: usize, v: f64) -> Result<BoundResult> {
    need_n(n)?;
    need_unit("v", v)?;
    let sn = (n as f64).sqrt();
    let s = (sn + 1.0) * v - 1.0;
    if s <= 0.0 {
        return Ok(BoundResult::vacuous(Formula::BinaryQubit));
    }
    Ok(BoundResult::new(1.0 / (sn * s), Formula::BinaryQubit, true))
}

/// Threshold for specific qubit directions: the best known visibility
/// threshold `v*` of the set fed into the loss/noise concatenation bound.
pub fn ub_qubit_directions(dirs: &[Vector3<f64>], v: f64) -> Result<BoundResult> {
    let v_star = match dirs.len() {
        1 => 1.0,
        2 => v_star_2(&dirs[0], &dirs[1])?,
        3 => v_star_3(&dirs[0], &dirs[1], &dirs[2])?.max(v_star_n(dirs)?),
        _ => v_star_n(dirs)?,
    };
    let mut b = ub_noise_concat(dirs.len(), v_star.min(1.0), v)?;
    b.formula = Formula::QubitDirections;
    Ok(b)
}

/// `η ≤ 2(1-v)` for all qubit projective measurements.
pub fn ub_all_qubit_pvms(v: f64) -> Result<BoundResult> {
    need_unit("v", v)?;
    Ok(BoundResult::new(2.0 * (1.0 - v), Formula::AllQubitPvms, true))
}

/// `η ≤ (1-v)^(d-1)` for all POVMs in dimension `d`.
pub fn ub_all_povms(v: f64, d: usize) -> Result<BoundResult> {
    need_unit("v", v)?;
    need_dim(d)?;
    Ok(BoundResult::new((1.0 - v).powi(d as i32 - 1), Formula::AllPovms, true))
}

/// Explicit parent measurement for a set of unbiased qubit measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentPovmCertificate {
    /// `2^(N+1)` elements `E_{±,a}`, ordered as `(+,a=0), (-,a=0), (+,a=1), ...`.
    pub parent: Povm,
    /// `response[i][y]` is the outcome (`+1` or `-1`) reported for setting `y`
    /// when parent element `i` clicks.
    pub response: Vec<Vec<i8>>,
    /// Probability of using the parent outcome; otherwise a fair coin is reported.
    pub mixing: f64,
    /// `2^N / Σ_a |w_a|`
    pub ratio: f64,
    pub residual: f64,
}

impl ParentPovmCertificate {
    pub fn n_settings(&self) -> usize {
        self.response.first().map_or(0, Vec::len)
    }

    /// Simulated element `b` (`+1`/`-1`) of setting `y`.
    pub fn simulated(&self, y: usize, b: i8) -> HermitianOp {
        let mut acc = HermitianOp::identity(2).scale(0.5 * (1.0 - self.mixing));
        for (e, resp) in self.parent.elements().iter().zip(&self.response) {
            if resp[y] == b {
                acc = &acc + &e.scale(self.mixing);
            }
        }
        acc
    }

    /// Parent elements with coincident entries merged (zero elements dropped).
    pub fn distinct_elements(&self) -> Vec<HermitianOp> {
        let mut out: Vec<(HermitianOp, HermitianOp)> = Vec::new();
        for e in self.parent.elements() {
            if e.max_abs_diff(&HermitianOp::zeros(2)) < 1e-14 {
                continue;
            }
            let tr = e.trace();
            let shape = e.scale(1.0 / tr);
            match out.iter_mut().find(|(s, _)| s.max_abs_diff(&shape) < 1e-12) {
                Some((_, acc)) => *acc = &*acc + e,
                None => out.push((shape, e.clone())),
            }
        }
        out.into_iter().map(|(_, e)| e).collect()
    }
}

/// Builds the bitstring parent measurement for targets `½(𝟙 ± m_k·σ)` and
/// checks the simulated measurements against the targets entrywise.
pub fn parent_povm_construct(ms: &[Vector3<f64>]) -> Result<ParentPovmCertificate> {
    check_bitstring_n(ms.len(), MAX_PARENT_N)?;
    let n = ms.len();
    let ws: Vec<Vector3<f64>> = signed_sums(ms).collect();
    let total: f64 = ws.iter().map(|w| w.norm()).sum();
    let count = ws.len() as f64;
    let (ratio, mixing) = if total > 0.0 {
        let ratio = count / total;
        if ratio < 1.0 - 1e-12 {
            return Err(Error::ConstructionFailed(format!(
                "bitstring sum {total} exceeds 2^N = {count}, the set is not certified jointly measurable"
            )));
        }
        (ratio, (1.0 / ratio).min(1.0))
    } else {
        (f64::INFINITY, 0.0)
    };

    let mut elements = Vec::with_capacity(2 * ws.len());
    let mut labels = Vec::with_capacity(2 * ws.len());
    let mut response = Vec::with_capacity(2 * ws.len());
    for (a, w) in ws.iter().enumerate() {
        let (p, r) = if total > 0.0 {
            (w.norm() / total, w / total)
        } else {
            (1.0 / count, Vector3::zeros())
        };
        for sign in [1i8, -1] {
            let s = sign as f64;
            elements.push(QubitBloch::new(0.5 * p, r * (0.5 * s)).to_op());
            labels.push(Outcome::Index(2 * a + usize::from(sign < 0)));
            response.push(
                (0..n)
                    .map(|y| if a >> y & 1 == 1 { -sign } else { sign })
                    .collect(),
            );
        }
    }
    let parent = Povm::new(elements, labels)?;
    let mut cert = ParentPovmCertificate {
        parent,
        response,
        mixing,
        ratio,
        residual: 0.0,
    };
    let mut residual: f64 = 0.0;
    for (y, m) in ms.iter().enumerate() {
        for b in [1i8, -1] {
            let target = QubitBloch::new(0.5, m * (0.5 * b as f64)).to_op();
            residual = residual.max(cert.simulated(y, b).max_abs_diff(&target));
        }
    }
    cert.residual = residual;
    if residual >= 1e-10 {
        return Err(Error::ConstructionFailed(format!("parent residual {residual:e}")));
    }
    Ok(cert)
}

/// Halving bound for partial joint measurability: `η/(1+η)`.
pub fn kjm_halving(eta: f64) -> Result<f64> {
    need_unit("eta", eta)?;
    Ok(eta / (1.0 + eta))
}

fn need_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    Ok(())
}

/// `η ≤ 1/(v(K+√K))` for a key subset of `K` binary qubit measurements.
pub fn kjm_binary_qubit(k: usize, v: f64) -> Result<BoundResult> {
    need_k(k)?;
    need_unit("v", v)?;
    if v == 0.0 {
        return Ok(BoundResult::vacuous(Formula::KjmBinaryQubit));
    }
    let k = k as f64;
    Ok(BoundResult::new(1.0 / (v * (k + k.sqrt())), Formula::KjmBinaryQubit, true))
}

/// `η ≤ d/((K+1)(v(d+1)-1))`.
pub fn kjm_whitenoise(k: usize, d: usize, v: f64) -> Result<BoundResult> {
    need_k(k)?;
    let mut b = ub_whitenoise(k + 1, d, v)?;
    b.formula = Formula::KjmWhiteNoise;
    Ok(b)
}

/// `η ≤ 1/((K+1)(1-ε/2))` for the thermal-noise unit.
pub fn kjm_thermal(k: usize, eps: f64) -> Result<BoundResult> {
    need_k(k)?;
    let mut b = crate::gaussian::ub_thermal(k + 1, eps)?;
    b.formula = Formula::KjmThermal;
    Ok(b)
}
