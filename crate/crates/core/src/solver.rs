//! Exact joint-measurability test for small sets of lossy, noisy binary
//! qubit measurements.
//!
//! A parent measurement `{G_λ}` is indexed by deterministic assignments
//! `λ ∈ {+, -, ∅}^N`; each `G_λ = t𝟙 + r·σ` is stored in Bloch form, so
//! positivity is the second-order cone `t ≥ |r|` and the marginal constraints
//! are linear. Feasibility is decided by Dykstra's alternating projections
//! between the affine marginal set and the product of cones. When the
//! iteration stalls, its displacement yields a Farkas multiplier that proves
//! infeasibility.

use nalgebra::{DMatrix, Vector3};

use crate::bounds::ParentPovmCertificate;
use crate::error::{Error, Result};
use crate::qop::{BlochMeasurement, HermitianOp, NoClickCmu, QubitBloch};

pub const MAX_SETTINGS: usize = 6;
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;
pub const DEFAULT_THRESHOLD_TOL: f64 = 1e-5;
pub const MAX_ITERATIONS: usize = 200_000;
const CHECK_EVERY: usize = 50;
const MAX_BISECTIONS: usize = 40;

type B4 = [f64; 4];

fn to_b4(b: &QubitBloch) -> B4 {
    [b.t, b.r.x, b.r.y, b.r.z]
}

fn from_b4(x: &B4) -> QubitBloch {
    QubitBloch::new(x[0], Vector3::new(x[1], x[2], x[3]))
}

fn soc_project(x: &B4) -> B4 {
    let t = x[0];
    let n = (x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
    if n <= t {
        *x
    } else if n <= -t {
        [0.0; 4]
    } else {
        let a = 0.5 * (t + n);
        let s = a / n;
        [a, x[1] * s, x[2] * s, x[3] * s]
    }
}

/// Binary qubit measurements behind a no-click unit with visibility `vis`.
#[derive(Debug, Clone, PartialEq)]
pub struct JmProblem {
    measurements: Vec<BlochMeasurement>,
    vis: f64,
}

impl JmProblem {
    /// Projective measurements along `directions`.
    pub fn new(directions: &[Vector3<f64>], vis: f64) -> Result<Self> {
        let ms = directions
            .iter()
            .map(|d| BlochMeasurement::pvm(*d))
            .collect::<Result<Vec<_>>>()?;
        Self::from_measurements(&ms, vis)
    }

    pub fn from_measurements(ms: &[BlochMeasurement], vis: f64) -> Result<Self> {
        if ms.is_empty() || ms.len() > MAX_SETTINGS {
            return Err(Error::InvalidArgument(format!(
                "the solver handles 1..={MAX_SETTINGS} settings, got {}",
                ms.len()
            )));
        }
        if !(0.0..=1.0).contains(&vis) {
            return Err(Error::InvalidArgument(format!("visibility must lie in [0, 1], got {vis}")));
        }
        Ok(Self {
            measurements: ms.to_vec(),
            vis,
        })
    }

    pub fn n_settings(&self) -> usize {
        self.measurements.len()
    }

    pub fn vis(&self) -> f64 {
        self.vis
    }

    pub fn measurements(&self) -> &[BlochMeasurement] {
        &self.measurements
    }

    pub fn n_labels(&self) -> usize {
        3usize.pow(self.n_settings() as u32)
    }

    /// Effective elements `(+, -, ∅)` of every setting at efficiency `eta`.
    pub fn targets(&self, eta: f64) -> Vec<[QubitBloch; 3]> {
        let v = self.vis;
        self.measurements
            .iter()
            .map(|m| {
                let eff = |plus: bool| {
                    let b = m.bloch(plus);
                    QubitBloch::new(eta * b.t, b.r * (eta * v))
                };
                [eff(true), eff(false), QubitBloch::new(1.0 - eta, Vector3::zeros())]
            })
            .collect()
    }

    pub fn cmu(&self, eta: f64) -> Result<NoClickCmu> {
        NoClickCmu::from_bloch(&self.measurements, eta, self.vis)
    }
}

/// Outcome index (`0 = +`, `1 = -`, `2 = ∅`) that label `lambda` assigns to setting `y`.
pub fn label_outcome(lambda: usize, y: usize) -> usize {
    lambda / 3usize.pow(y as u32) % 3
}

/// The marginal map and its Gram pseudo-inverse.
struct Marginals {
    n: usize,
    digits: Vec<Vec<u8>>,
    gram_pinv: DMatrix<f64>,
}

impl Marginals {
    fn new(n: usize) -> Result<Self> {
        let l = 3usize.pow(n as u32);
        let digits: Vec<Vec<u8>> = (0..l)
            .map(|lam| (0..n).map(|y| label_outcome(lam, y) as u8).collect())
            .collect();
        // (M Mᵀ)[(y,b),(y',b')] counts labels with λ_y = b and λ_y' = b'
        let m = 3 * n;
        let gram = DMatrix::from_fn(m, m, |i, j| {
            let (y, b, y2, b2) = (i / 3, i % 3, j / 3, j % 3);
            let l = l as f64;
            if y == y2 {
                if b == b2 {
                    l / 3.0
                } else {
                    0.0
                }
            } else {
                l / 9.0
            }
        });
        let gram_pinv = gram
            .pseudo_inverse(1e-10)
            .map_err(|e| Error::ConstructionFailed(format!("pseudo-inverse failed: {e}")))?;
        Ok(Self { n, digits, gram_pinv })
    }

    fn apply(&self, x: &[B4]) -> Vec<B4> {
        let mut out = vec![[0.0; 4]; 3 * self.n];
        for (d, xl) in self.digits.iter().zip(x) {
            for (y, &b) in d.iter().enumerate() {
                let o = &mut out[3 * y + b as usize];
                for c in 0..4 {
                    o[c] += xl[c];
                }
            }
        }
        out
    }

    fn apply_t(&self, u: &[B4]) -> Vec<B4> {
        self.digits
            .iter()
            .map(|d| {
                let mut acc = [0.0; 4];
                for (y, &b) in d.iter().enumerate() {
                    let v = &u[3 * y + b as usize];
                    for c in 0..4 {
                        acc[c] += v[c];
                    }
                }
                acc
            })
            .collect()
    }

    fn apply_pinv(&self, u: &[B4]) -> Vec<B4> {
        let m = u.len();
        (0..m)
            .map(|i| {
                let mut acc = [0.0; 4];
                for (j, uj) in u.iter().enumerate() {
                    let p = self.gram_pinv[(i, j)];
                    for c in 0..4 {
                        acc[c] += p * uj[c];
                    }
                }
                acc
            })
            .collect()
    }

    fn project_affine(&self, x: &[B4], c: &[B4]) -> Vec<B4> {
        let mut r = self.apply(x);
        for (ri, ci) in r.iter_mut().zip(c) {
            for k in 0..4 {
                ri[k] -= ci[k];
            }
        }
        let corr = self.apply_t(&self.apply_pinv(&r));
        x.iter()
            .zip(&corr)
            .map(|(xi, ci)| [xi[0] - ci[0], xi[1] - ci[1], xi[2] - ci[2], xi[3] - ci[3]])
            .collect()
    }
}

fn flat_targets(p: &JmProblem, eta: f64) -> Vec<B4> {
    p.targets(eta).iter().flat_map(|t| t.iter().map(to_b4)).collect()
}

fn max_marginal_residual(marg: &Marginals, x: &[B4], c: &[B4]) -> f64 {
    let mx = marg.apply(x);
    let mut worst: f64 = 0.0;
    for (a, b) in mx.iter().zip(c) {
        for k in 0..4 {
            worst = worst.max((a[k] - b[k]).abs());
        }
    }
    // normalization Σ_λ X_λ = 𝟙
    let mut sum = [0.0; 4];
    for xl in x {
        for k in 0..4 {
            sum[k] += xl[k];
        }
    }
    worst
        .max((sum[0] - 1.0).abs())
        .max(sum[1].abs())
        .max(sum[2].abs())
        .max(sum[3].abs())
}

/// Parent measurement found for a feasible instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCertificate {
    /// `G_λ` in Bloch form, indexed as in [`label_outcome`].
    pub parent: Vec<QubitBloch>,
    pub eta: f64,
    pub residual: f64,
}

/// Multipliers `μ` with `Mᵀμ` in the cone and `⟨μ, C⟩ < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    /// One Bloch 4-vector per `(setting, outcome)` constraint.
    pub multipliers: Vec<[f64; 4]>,
    /// `⟨μ, C⟩`; negative for a valid certificate.
    pub value: f64,
    pub eta: f64,
    pub iterations: usize,
}

impl InfeasibilityCertificate {
    /// Recomputes `⟨μ, C⟩` and the worst cone violation of `Mᵀμ` (0 when valid).
    pub fn check(&self, p: &JmProblem) -> Result<(f64, f64)> {
        let marg = Marginals::new(p.n_settings())?;
        let c = flat_targets(p, self.eta);
        let value: f64 = self
            .multipliers
            .iter()
            .zip(&c)
            .map(|(m, ci)| (0..4).map(|k| m[k] * ci[k]).sum::<f64>())
            .sum();
        let violation = marg
            .apply_t(&self.multipliers)
            .iter()
            .map(|z| (-from_b4(z).min_eigenvalue()).max(0.0))
            .fold(0.0, f64::max);
        Ok((value, violation))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(FeasibilityCertificate),
    Infeasible(InfeasibilityCertificate),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Decides whether the effective measurements at efficiency `eta` have a
/// parent measurement. `tol` bounds the marginal and normalization residual
/// of an accepted certificate. Runs out of iterations as
/// [`Error::Indeterminate`], never as a silent verdict.
pub fn jm_feasible(p: &JmProblem, eta: f64, tol: f64) -> Result<Feasibility> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("eta must lie in [0, 1], got {eta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let marg = Marginals::new(p.n_settings())?;
    let c = flat_targets(p, eta);
    let l = p.n_labels();

    let mut x: Vec<B4> = vec![[1.0 / l as f64, 0.0, 0.0, 0.0]; l];
    let mut q: Vec<B4> = vec![[0.0; 4]; l];
    let mut residual = f64::INFINITY;
    for k in 0..MAX_ITERATIONS {
        let a = marg.project_affine(&x, &c);
        let mut y = Vec::with_capacity(l);
        for (ai, qi) in a.iter().zip(q.iter_mut()) {
            let shifted = [ai[0] + qi[0], ai[1] + qi[1], ai[2] + qi[2], ai[3] + qi[3]];
            let yi = soc_project(&shifted);
            for j in 0..4 {
                qi[j] = shifted[j] - yi[j];
            }
            y.push(yi);
        }
        if k % CHECK_EVERY == 0 {
            residual = max_marginal_residual(&marg, &y, &c);
            if residual < tol {
                return Ok(Feasibility::Feasible(FeasibilityCertificate {
                    parent: y.iter().map(from_b4).collect(),
                    eta,
                    residual,
                }));
            }
            if let Some(cert) = farkas(&marg, &a, &y, &c, eta, k) {
                return Ok(Feasibility::Infeasible(cert));
            }
        }
        x = y;
    }
    Err(Error::Indeterminate {
        iterations: MAX_ITERATIONS,
        residual,
        lo: eta,
        hi: eta,
    })
}

/// Separating functional from the gap between the cone iterate `y` and the
/// affine iterate `a`.
fn farkas(marg: &Marginals, a: &[B4], y: &[B4], c: &[B4], eta: f64, iterations: usize) -> Option<InfeasibilityCertificate> {
    let z: Vec<B4> = y
        .iter()
        .zip(a)
        .map(|(yi, ai)| [yi[0] - ai[0], yi[1] - ai[1], yi[2] - ai[2], yi[3] - ai[3]])
        .collect();
    let gap: f64 = z.iter().flat_map(|v| v.iter()).map(|v| v * v).sum::<f64>().sqrt();
    if gap < 1e-14 {
        return None;
    }
    let mut mu = marg.apply_pinv(&marg.apply(&z));
    // Adding α(1,0,0,0) to every multiplier of setting 0 shifts each
    // (Mᵀμ)_λ by α𝟙 and ⟨μ, C⟩ by α (the setting-0 traces sum to one).
    let alpha = marg
        .apply_t(&mu)
        .iter()
        .map(|zl| (-from_b4(zl).min_eigenvalue()).max(0.0))
        .fold(0.0, f64::max);
    for m in mu.iter_mut().take(3) {
        m[0] += alpha;
    }
    let value: f64 = mu
        .iter()
        .zip(c)
        .map(|(m, ci)| (0..4).map(|k| m[k] * ci[k]).sum::<f64>())
        .sum();
    let scale = mu.iter().flat_map(|m| m.iter()).fold(0.0f64, |s, v| s.max(v.abs()));
    if value < -1e-12 * scale {
        Some(InfeasibilityCertificate {
            multipliers: mu,
            value,
            eta,
            iterations,
        })
    } else {
        None
    }
}

/// Largest `η` at which the effective measurements stay jointly measurable.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    /// Largest efficiency certified feasible.
    pub eta: f64,
    /// Smallest efficiency certified infeasible (1 if everything is feasible).
    pub hi: f64,
    pub solves: usize,
    /// `hi - eta` reached the requested tolerance.
    pub resolved: bool,
}

/// Widest certified bracket returned instead of an error, in units of `tol`.
const LOOSE_FACTOR: f64 = 100.0;

/// Bisection over `η ∈ [0, 1]` to absolute accuracy `tol`.
///
/// An undecided solve at the midpoint is retried at the quarter points,
/// which sit further from the boundary. When neither moves the bracket the
/// search stops: a bracket within `100·tol` is returned with
/// `resolved = false`, a wider one as [`Error::Indeterminate`].
pub fn jm_threshold(p: &JmProblem, tol: f64) -> Result<Threshold> {
    let ftol = DEFAULT_FEASIBILITY_TOL;
    if jm_feasible(p, 1.0, ftol)?.is_feasible() {
        return Ok(Threshold {
            eta: 1.0,
            hi: 1.0,
            solves: 1,
            resolved: true,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut solves = 1;
    let mut budget = MAX_BISECTIONS;
    while hi - lo > tol && budget > 0 {
        budget -= 1;
        let mid = 0.5 * (lo + hi);
        solves += 1;
        match jm_feasible(p, mid, ftol) {
            Ok(Feasibility::Feasible(_)) => lo = mid,
            Ok(Feasibility::Infeasible(_)) => hi = mid,
            Err(Error::Indeterminate { iterations, residual, .. }) => {
                let w = hi - lo;
                let mut moved = false;
                for probe in [lo + 0.25 * w, hi - 0.25 * w] {
                    solves += 1;
                    match jm_feasible(p, probe, ftol) {
                        Ok(Feasibility::Feasible(_)) if probe > lo => {
                            lo = probe;
                            moved = true;
                        }
                        Ok(Feasibility::Infeasible(_)) if probe < hi => {
                            hi = probe;
                            moved = true;
                        }
                        Ok(_) | Err(Error::Indeterminate { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                if !moved {
                    if hi - lo <= LOOSE_FACTOR * tol {
                        break;
                    }
                    return Err(Error::Indeterminate {
                        iterations,
                        residual,
                        lo,
                        hi,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Threshold {
        eta: lo,
        hi,
        solves,
        resolved: hi - lo <= tol,
    })
}

pub fn jm_threshold_eta(p: &JmProblem, tol: f64) -> Result<f64> {
    jm_threshold(p, tol).map(|t| t.eta)
}

/// Worst violation of a claimed parent: cone slack in Bloch form, negative
/// eigenvalues of the 2×2 matrices, and marginal mismatch against the
/// effective POVMs computed with complex matrices.
pub fn verify_certificate(cert: &FeasibilityCertificate, p: &JmProblem) -> Result<f64> {
    let l = p.n_labels();
    if cert.parent.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: cert.parent.len(),
        });
    }
    let mut worst: f64 = 0.0;
    let ops: Vec<HermitianOp> = cert.parent.iter().map(QubitBloch::to_op).collect();
    for (g, op) in cert.parent.iter().zip(&ops) {
        worst = worst.max((-g.min_eigenvalue()).max(0.0));
        worst = worst.max((-op.min_eigenvalue()).max(0.0));
    }
    let total = ops.iter().fold(HermitianOp::zeros(2), |acc, o| &acc + o);
    worst = worst.max(total.max_abs_diff(&HermitianOp::identity(2)));

    let effective = p.cmu(cert.eta)?.effective_povms();
    for (y, povm) in effective.iter().enumerate() {
        for (b, target) in povm.elements().iter().enumerate() {
            let marginal = ops
                .iter()
                .enumerate()
                .filter(|(lam, _)| label_outcome(*lam, y) == b)
                .fold(HermitianOp::zeros(2), |acc, (_, o)| &acc + o);
            worst = worst.max(marginal.max_abs_diff(target));
        }
    }
    Ok(worst)
}

/// Rewrites a bitstring parent for the noisy measurements
/// `½(𝟙 ± v m̂_y·σ)` as a lossless (`η = 1`) parent over `{+,-,∅}^N` with
/// zero weight on every label containing `∅`.
pub fn embed_parent(cert: &ParentPovmCertificate) -> FeasibilityCertificate {
    let n = cert.n_settings();
    let l = 3usize.pow(n as u32);
    let s = cert.mixing;
    let blochs: Vec<QubitBloch> = cert
        .parent
        .elements()
        .iter()
        .map(|e| QubitBloch::from_op(e).expect("parent acts on a qubit"))
        .collect();
    let parent = (0..l)
        .map(|lam| {
            let outcomes: Vec<usize> = (0..n).map(|y| label_outcome(lam, y)).collect();
            if outcomes.contains(&2) {
                return QubitBloch::zero();
            }
            blochs
                .iter()
                .zip(&cert.response)
                .map(|(g, resp)| {
                    let w: f64 = outcomes
                        .iter()
                        .zip(resp)
                        .map(|(&o, &r)| {
                            let b = if o == 0 { 1 } else { -1 };
                            s * f64::from(u8::from(r == b)) + 0.5 * (1.0 - s)
                        })
                        .product();
                    *g * w
                })
                .fold(QubitBloch::zero(), |acc, g| acc + g)
        })
        .collect();
    FeasibilityCertificate {
        parent,
        eta: 1.0,
        residual: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{parent_povm_construct, ub_binary_qubit};

    fn mub2() -> Vec<Vector3<f64>> {
        vec![Vector3::z(), Vector3::x()]
    }

    fn mub3() -> Vec<Vector3<f64>> {
        vec![Vector3::z(), Vector3::x(), Vector3::y()]
    }

    #[test]
    fn single_setting_always_feasible() {
        let p = JmProblem::new(&[Vector3::z()], 0.7).unwrap();
        let f = jm_feasible(&p, 1.0, 1e-9).unwrap();
        let Feasibility::Feasible(cert) = f else { panic!("expected feasible") };
        assert!(verify_certificate(&cert, &p).unwrap() < 1e-8);
        assert_eq!(jm_threshold_eta(&p, 1e-5).unwrap(), 1.0);
    }

    #[test]
    fn mub_pair_transition_at_half() {
        let p = JmProblem::new(&mub2(), 1.0).unwrap();
        match jm_feasible(&p, 0.49, 1e-9).unwrap() {
            Feasibility::Feasible(cert) => assert!(verify_certificate(&cert, &p).unwrap() < 1e-8),
            other => panic!("expected feasible, got {other:?}"),
        }
        match jm_feasible(&p, 0.51, 1e-9).unwrap() {
            Feasibility::Infeasible(cert) => {
                let (value, violation) = cert.check(&p).unwrap();
                assert!(value < 0.0);
                assert!(violation < 1e-12);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn mub_pair_threshold() {
        let p = JmProblem::new(&mub2(), 1.0).unwrap();
        let t = jm_threshold_eta(&p, 1e-5).unwrap();
        assert!((t - 0.5).abs() < 1e-4, "{t}");
    }

    #[test]
    fn mub_triple_threshold_at_one_third() {
        let p = JmProblem::new(&mub3(), 1.0).unwrap();
        let t = jm_threshold_eta(&p, 1e-5).unwrap();
        let expected = ub_binary_qubit(3, 1.0).unwrap().value;
        assert!((t - expected).abs() < 1e-4, "{t} vs {expected}");
    }

    #[test]
    fn uniform_parent_mismatch_is_analytic() {
        let n = 2;
        let p = JmProblem::new(&mub2(), 0.0).unwrap();
        let l = 3usize.pow(n);
        for eta in [0.2, 2.0 / 3.0, 0.9] {
            let cert = FeasibilityCertificate {
                parent: vec![QubitBloch::new(1.0 / l as f64, Vector3::zeros()); l],
                eta,
                residual: 0.0,
            };
            let expected = (1.0f64 / 3.0 - eta / 2.0).abs().max((1.0 / 3.0 - (1.0 - eta)).abs());
            let r = verify_certificate(&cert, &p).unwrap();
            assert!((r - expected).abs() < 1e-14, "{r} vs {expected}");
        }
    }

    #[test]
    fn embedded_bitstring_parent_verifies() {
        let v = 1.0 / 3f64.sqrt();
        let dirs = mub3();
        let scaled: Vec<Vector3<f64>> = dirs.iter().map(|d| d * v).collect();
        let cert = embed_parent(&parent_povm_construct(&scaled).unwrap());
        let p = JmProblem::new(&dirs, v).unwrap();
        assert!(verify_certificate(&cert, &p).unwrap() < 1e-10);

        let v = 0.6;
        let dirs = mub2();
        let scaled: Vec<Vector3<f64>> = dirs.iter().map(|d| d * v).collect();
        let cert = embed_parent(&parent_povm_construct(&scaled).unwrap());
        let p = JmProblem::new(&dirs, v).unwrap();
        assert!(verify_certificate(&cert, &p).unwrap() < 1e-10);
    }

    #[test]
    fn rejects_too_many_settings() {
        let dirs = vec![Vector3::z(); 7];
        assert!(JmProblem::new(&dirs, 1.0).is_err());
    }
}
