//! Single-mode Gaussian channels in the `(X, Y, δ)` representation
//! (shot-noise units, vacuum covariance `𝟙`): thermal-noise channel,
//! amplifier, beam-splitter marginal, composition, extendibility, and the
//! homodyne simulation by heterodyne post-processing.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::bounds::{BoundResult, Formula};
use crate::error::{Error, Result};

const SYM_TOL: f64 = 1e-12;
const EXT_TOL: f64 = 1e-12;
const DECOMP_TOL: f64 = 1e-10;
pub const MAX_MOMENT_ORDER: usize = 10;

/// `μ ↦ Xμ + δ`, `V ↦ XVXᵀ + Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianChannelXY {
    pub x: Matrix2<f64>,
    pub y: Matrix2<f64>,
    pub delta: Vector2<f64>,
    /// Complete positivity, `Y ⪰ 0` and `det Y ≥ (1 - det X)²`.
    pub physical: bool,
}

fn is_physical(x: &Matrix2<f64>, y: &Matrix2<f64>) -> bool {
    let tol = 1e-12;
    let det_y = y.determinant();
    y[(0, 0)] >= -tol && y[(1, 1)] >= -tol && det_y >= (1.0 - x.determinant()).powi(2) - tol
}

impl GaussianChannelXY {
    pub fn new(x: Matrix2<f64>, y: Matrix2<f64>, delta: Vector2<f64>) -> Result<Self> {
        let asym = (y - y.transpose()).abs().max();
        if asym > SYM_TOL {
            return Err(Error::InvalidArgument(format!("noise matrix Y is not symmetric ({asym:e})")));
        }
        Ok(Self::from_parts(x, y, delta))
    }

    fn from_parts(x: Matrix2<f64>, y: Matrix2<f64>, delta: Vector2<f64>) -> Self {
        Self {
            x,
            y,
            delta,
            physical: is_physical(&x, &y),
        }
    }

    pub fn identity() -> Self {
        Self::from_parts(Matrix2::identity(), Matrix2::zeros(), Vector2::zeros())
    }

    /// Largest entrywise difference over `X`, `Y` and `δ`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.x - other.x)
            .abs()
            .max()
            .max((self.y - other.y).abs().max())
            .max((self.delta - other.delta).abs().max())
    }
}

/// Transmittance `η` and excess noise `ε` of the thermal-noise channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalParams {
    pub eta: f64,
    pub eps: f64,
}

impl ThermalParams {
    pub fn new(eta: f64, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidArgument(format!("eta must lie in [0, 1], got {eta}")));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("excess noise must be >= 0, got {eps}")));
        }
        Ok(Self { eta, eps })
    }

    /// Mean photon number `ηε/(2(1-η))` of the environment; undefined at `η = 1`.
    pub fn nu(&self) -> Option<f64> {
        if self.eta >= 1.0 {
            None
        } else {
            Some(self.eta * self.eps / (2.0 * (1.0 - self.eta)))
        }
    }
}

pub fn thermal_xy(p: ThermalParams) -> GaussianChannelXY {
    GaussianChannelXY::from_parts(
        Matrix2::identity() * p.eta.sqrt(),
        Matrix2::identity() * (1.0 - p.eta + p.eps * p.eta),
        Vector2::zeros(),
    )
}

/// Phase-insensitive amplifier of gain `G ≥ 1`.
pub fn amp_xy(gain: f64) -> Result<GaussianChannelXY> {
    if !(gain >= 1.0) || !gain.is_finite() {
        return Err(Error::InvalidArgument(format!("amplifier gain must be >= 1, got {gain}")));
    }
    Ok(GaussianChannelXY::from_parts(
        Matrix2::identity() * gain.sqrt(),
        Matrix2::identity() * (gain - 1.0),
        Vector2::zeros(),
    ))
}

/// Single-output marginal of a balanced `1 → N` beam-splitter network.
pub fn bs_trace_xy(n: usize) -> Result<GaussianChannelXY> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let t = 1.0 / n as f64;
    Ok(GaussianChannelXY::from_parts(
        Matrix2::identity() * t.sqrt(),
        Matrix2::identity() * (1.0 - t),
        Vector2::zeros(),
    ))
}

/// `second ∘ first`.
pub fn compose(first: &GaussianChannelXY, second: &GaussianChannelXY) -> GaussianChannelXY {
    let (a, b) = (first, second);
    GaussianChannelXY::from_parts(
        b.x * a.x,
        b.x * a.y * b.x.transpose() + b.y,
        b.x * a.delta + b.delta,
    )
}

/// `√det Y ≥ 1 - 1/N + |det X - 1/N|`, boundary included.
pub fn n_extendable_gaussian(ch: &GaussianChannelXY, n: usize) -> Result<bool> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let inv = 1.0 / n as f64;
    let lhs = ch.y.determinant().max(0.0).sqrt();
    let rhs = 1.0 - inv + (ch.x.determinant() - inv).abs();
    Ok(lhs >= rhs - EXT_TOL)
}

/// `η ≤ 1/(N(1-ε/2))` for the thermal-noise unit; vacuous for `ε ≥ 2`.
pub fn ub_thermal(n: usize, eps: f64) -> Result<BoundResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("excess noise must be >= 0, got {eps}")));
    }
    let s = 1.0 - eps / 2.0;
    if s <= 0.0 {
        return Ok(BoundResult::new(f64::INFINITY, Formula::Thermal, false));
    }
    Ok(BoundResult::new(1.0 / (n as f64 * s), Formula::Thermal, true))
}

/// `η ≤ 1/(2-ε)` for Gaussian (quadrature) measurements, any `N`.
pub fn ub_gaussian_meas(eps: f64) -> Result<BoundResult> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("excess noise must be >= 0, got {eps}")));
    }
    if eps >= 2.0 {
        return Ok(BoundResult::new(f64::INFINITY, Formula::GaussianMeasurement, false));
    }
    Ok(BoundResult::new(1.0 / (2.0 - eps), Formula::GaussianMeasurement, true))
}

/// Gain and added Gaussian noise of the heterodyne simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomodyneSim {
    pub gain: f64,
    pub sigma2: f64,
}

/// `G = √(2η)`, `σ² = ½(1 - 2η + εη)`; fails when `σ² < 0`.
pub fn homodyne_sim_params(eta: f64, eps: f64) -> Result<HomodyneSim> {
    let p = ThermalParams::new(eta, eps)?;
    let sigma2 = 0.5 * (1.0 - 2.0 * p.eta + p.eps * p.eta);
    if sigma2 < -1e-15 {
        return Err(Error::InvalidArgument(format!(
            "eta = {eta} exceeds 1/(2 - eps) = {}: added noise variance would be {sigma2:e}",
            1.0 / (2.0 - eps)
        )));
    }
    Ok(HomodyneSim {
        gain: (2.0 * p.eta).sqrt(),
        sigma2: sigma2.max(0.0),
    })
}

fn double_factorial_odd(k: usize) -> f64 {
    // (2k-1)!!, with (-1)!! = 1
    (1..=k).map(|i| (2 * i - 1) as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Raw moments `E[(μ + s Z)^n]`, `n = 0..=n_max`, of a normal variable.
pub fn gaussian_moments(mean: f64, var: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| {
            (0..=n / 2)
                .map(|k| binomial(n, 2 * k) * mean.powi((n - 2 * k) as i32) * var.powi(k as i32) * double_factorial_odd(k))
                .sum()
        })
        .collect()
}

/// Quadrature moments `⟨X(θ)^n⟩` of the coherent state `|α⟩` for each angle.
pub fn coherent_moments(alpha_re: f64, alpha_im: f64, thetas: &[f64], n_max: usize) -> Vec<Vec<f64>> {
    thetas
        .iter()
        .map(|&th| {
            let mean = 2f64.sqrt() * (alpha_re * th.cos() + alpha_im * th.sin());
            gaussian_moments(mean, 0.5, n_max)
        })
        .collect()
}

/// Moments of the thermal-noise channel output quadrature.
pub fn thermal_target_moments(eta: f64, eps: f64, input: &[f64], n_max: usize) -> Vec<f64> {
    let noise = 0.5 * (1.0 - eta + eps * eta);
    (0..=n_max)
        .map(|n| {
            (0..=n / 2)
                .map(|k| {
                    binomial(n, 2 * k)
                        * eta.sqrt().powi((n - 2 * k) as i32)
                        * input[n - 2 * k]
                        * double_factorial_odd(k)
                        * noise.powi(k as i32)
                })
                .sum()
        })
        .collect()
}

/// Moments of `G(cosθ x + sinθ p) + Δ` after heterodyne detection, evaluated
/// with the explicit double sum over vacuum and `Δ` contributions.
pub fn heterodyne_sim_moments(sim: &HomodyneSim, input: &[f64], n_max: usize) -> Vec<f64> {
    let g = sim.gain / 2f64.sqrt();
    let inner = |k: usize| -> f64 {
        (0..=k)
            .map(|l| {
                binomial(2 * k, 2 * l)
                    * g.powi(2 * (k - l) as i32)
                    * 0.5f64.powi((k - l) as i32)
                    * sim.sigma2.powi(l as i32)
                    * double_factorial_odd(k - l)
                    * double_factorial_odd(l)
            })
            .sum()
    };
    (0..=n_max)
        .map(|n| {
            (0..=n / 2)
                .map(|k| binomial(n, 2 * k) * g.powi((n - 2 * k) as i32) * input[n - 2 * k] * inner(k))
                .sum()
        })
        .collect()
}

/// Largest absolute difference between target and simulated moments over
/// all orders `1..=n_max` and all supplied angles.
///
/// `input_moments[j][n]` is `⟨X_in(θ_j)^n⟩` for `n = 0..=n_max`.
pub fn homodyne_moment_check(eta: f64, eps: f64, input_moments: &[Vec<f64>], n_max: usize) -> Result<f64> {
    if n_max > MAX_MOMENT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "moment order {n_max} exceeds {MAX_MOMENT_ORDER}"
        )));
    }
    let sim = homodyne_sim_params(eta, eps)?;
    let mut worst: f64 = 0.0;
    for m in input_moments {
        if m.len() <= n_max {
            return Err(Error::DimensionMismatch {
                expected: n_max + 1,
                got: m.len(),
            });
        }
        let target = thermal_target_moments(eta, eps, m, n_max);
        let simulated = heterodyne_sim_moments(&sim, m, n_max);
        for (a, b) in target.iter().zip(&simulated).skip(1) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Necessary condition for a Gaussian channel to appear in a convex
/// decomposition of the thermal-noise channel: `X = √η 𝟙` and `Y ⪯ (1-η+ηε)𝟙`.
pub fn gauss_decomp_necessary(candidate: &GaussianChannelXY, eta: f64, eps: f64) -> Result<bool> {
    let p = ThermalParams::new(eta, eps)?;
    let x_ok = (candidate.x - Matrix2::identity() * p.eta.sqrt()).abs().max() <= DECOMP_TOL;
    let slack = Matrix2::identity() * (1.0 - p.eta + p.eta * p.eps) - candidate.y;
    let sym = 0.5 * (slack + slack.transpose());
    let min_eig = sym.symmetric_eigenvalues().min();
    Ok(x_ok && min_eig >= -DECOMP_TOL)
}

/// True when the thermal-noise channel admits no convex decomposition with an
/// `N`-extendable Gaussian component.
///
/// Requires the channel itself not to be `N`-extendable, and checks that the
/// most noisy candidate allowed by [`gauss_decomp_necessary`] still violates
/// the extendibility condition. Since that condition only improves with
/// `det Y`, every other admissible candidate then fails it too.
pub fn no_gauss_cc_attack(eta: f64, eps: f64, n: usize) -> Result<bool> {
    let p = ThermalParams::new(eta, eps)?;
    let channel = thermal_xy(p);
    if n_extendable_gaussian(&channel, n)? {
        return Ok(false);
    }
    let extreme = GaussianChannelXY::from_parts(
        Matrix2::identity() * p.eta.sqrt(),
        Matrix2::identity() * (1.0 - p.eta + p.eta * p.eps),
        Vector2::zeros(),
    );
    debug_assert!(gauss_decomp_necessary(&extreme, eta, eps)?);
    Ok(!n_extendable_gaussian(&extreme, n)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(eta: f64, eps: f64) -> GaussianChannelXY {
        thermal_xy(ThermalParams::new(eta, eps).unwrap())
    }

    #[test]
    fn thermal_examples() {
        assert_eq!(th(1.0, 0.0), GaussianChannelXY::identity());
        let c = th(0.5, 0.0);
        assert!((c.x - Matrix2::identity() / 2f64.sqrt()).abs().max() < 1e-15);
        assert!((c.y - Matrix2::identity() * 0.5).abs().max() < 1e-15);
        assert!((th(0.5, 0.2).y[(0, 0)] - 0.6).abs() < 1e-15);
        assert!(c.physical);
        assert_eq!(ThermalParams::new(1.0, 0.3).unwrap().nu(), None);
        assert!((ThermalParams::new(0.5, 0.2).unwrap().nu().unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn amplifier_and_splitter() {
        assert_eq!(amp_xy(1.0).unwrap(), GaussianChannelXY::identity());
        assert_eq!(bs_trace_xy(1).unwrap(), GaussianChannelXY::identity());
        let a = amp_xy(2.0).unwrap();
        assert!((a.x - Matrix2::identity() * 2f64.sqrt()).abs().max() < 1e-15);
        assert_eq!(a.y, Matrix2::identity());
        assert!(amp_xy(0.5).is_err());
    }

    #[test]
    fn composition_examples() {
        let c = th(0.3, 0.7);
        assert!(compose(&c, &GaussianChannelXY::identity()).max_abs_diff(&c) < 1e-15);
        for n in [2usize, 3, 5] {
            for eps in [0.0, 0.3, 1.0] {
                let parent = compose(&amp_xy(1.0 / (1.0 - eps / 2.0)).unwrap(), &bs_trace_xy(n).unwrap());
                let target = th(1.0 / (n as f64 * (1.0 - eps / 2.0)), eps);
                assert!(parent.max_abs_diff(&target) < 1e-12);
            }
        }
        let two = compose(&th(0.6, 0.0), &th(0.7, 0.0));
        assert!(two.max_abs_diff(&th(0.42, 0.0)) < 1e-15);
    }

    #[test]
    fn extendibility_examples() {
        for n in [2usize, 3, 5] {
            for eps in [0.0, 0.2, 1.0] {
                let eta = 1.0 / (n as f64 * (1.0 - eps / 2.0));
                if eta <= 1.0 {
                    assert!(n_extendable_gaussian(&th(eta, eps), n).unwrap());
                    assert!(!n_extendable_gaussian(&th((eta + 1e-6).min(1.0), eps), n).unwrap() || eta + 1e-6 > 1.0);
                }
            }
        }
        assert!(!n_extendable_gaussian(&GaussianChannelXY::identity(), 2).unwrap());
        assert!(!n_extendable_gaussian(&th(0.6, 0.0), 2).unwrap());
        assert!(n_extendable_gaussian(&th(0.5, 0.0), 2).unwrap());
    }

    #[test]
    fn bound_values() {
        assert_eq!(ub_thermal(2, 0.0).unwrap().value, 0.5);
        assert!((ub_thermal(3, 1.0).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
        assert!((ub_thermal(2, 0.5).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ub_gaussian_meas(0.0).unwrap().value, 0.5);
        assert_eq!(ub_gaussian_meas(1.0).unwrap().value, 1.0);
        assert!((ub_gaussian_meas(0.5).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn homodyne_params() {
        let s = homodyne_sim_params(0.5, 0.0).unwrap();
        assert!((s.gain - 1.0).abs() < 1e-15 && s.sigma2 == 0.0);
        let s = homodyne_sim_params(0.25, 0.0).unwrap();
        assert!((s.gain - 0.5f64.sqrt()).abs() < 1e-15 && (s.sigma2 - 0.25).abs() < 1e-15);
        assert!(homodyne_sim_params(0.6, 0.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let thetas: Vec<f64> = (0..8).map(|j| j as f64 * std::f64::consts::PI / 8.0).collect();
        let coh = coherent_moments(0.7, -0.4, &thetas, 8);
        assert!(homodyne_moment_check(0.5, 0.0, &coh, 8).unwrap() < 1e-9);
        assert!(homodyne_moment_check(1.0 / 1.7, 0.3, &coh, 8).unwrap() < 1e-9);
        assert_eq!(homodyne_moment_check(0.3, 0.1, &coh, 1).unwrap(), 0.0);

        let vac = coherent_moments(0.0, 0.0, &[0.0], 2);
        let eta: f64 = 0.4;
        let eps = 0.3;
        let t = thermal_target_moments(eta, eps, &vac[0], 2);
        let s = heterodyne_sim_moments(&homodyne_sim_params(eta, eps).unwrap(), &vac[0], 2);
        let by_hand = eta * 0.5 + 0.5 * (1.0 - eta + eps * eta);
        assert!((t[2] - by_hand).abs() < 1e-12 && (s[2] - by_hand).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments_match_closed_forms() {
        // E[Z^4] = 3, E[(1+Z)^3] = 1 + 3 = 4
        let m = gaussian_moments(0.0, 1.0, 4);
        assert_eq!(m, vec![1.0, 0.0, 1.0, 0.0, 3.0]);
        assert!((gaussian_moments(1.0, 1.0, 3)[3] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn decomposition_condition() {
        let (eta, eps) = (0.6, 0.2);
        assert!(gauss_decomp_necessary(&th(eta, eps), eta, eps).unwrap());
        let mut skew = th(eta, eps);
        skew.x = Matrix2::new(1.0, 0.0, 0.0, 0.99) * eta.sqrt();
        assert!(!gauss_decomp_necessary(&skew, eta, eps).unwrap());
        let mut noisy = th(eta, eps);
        noisy.y += Matrix2::identity() * 0.01;
        assert!(!gauss_decomp_necessary(&noisy, eta, eps).unwrap());
    }

    #[test]
    fn attack_exclusion() {
        assert!(no_gauss_cc_attack(0.8, 0.0, 2).unwrap());
        assert!(!no_gauss_cc_attack(0.4, 0.0, 2).unwrap());
        for (n, eps) in [(2usize, 0.0), (3, 0.5), (4, 1.0)] {
            let eta = 1.0 / (n as f64 * (1.0 - eps / 2.0));
            assert!(!no_gauss_cc_attack(eta, eps, n).unwrap());
        }
    }
}
