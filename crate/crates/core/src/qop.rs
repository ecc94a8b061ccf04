//! Finite-dimensional operators, POVMs, qubit Bloch forms and the effective
//! POVMs of a lossy, noisy measurement unit.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};

pub type Complex64 = nalgebra::Complex<f64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// A Hermitian `d×d` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOp {
    m: DMatrix<Complex64>,
}

impl HermitianOp {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("operator dimension must be at least 1".into()));
        }
        let asym = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian(asym));
        }
        // store the exactly Hermitian part
        let m = (&m + m.adjoint()).scale(0.5);
        Ok(Self { m })
    }

    fn from_raw(m: DMatrix<Complex64>) -> Self {
        Self { m }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_raw(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_raw(DMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Self::from_raw(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// Rank-one projector onto the normalized vector `psi`.
    pub fn projector(psi: &[Complex64]) -> Self {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let d = psi.len();
        Self::from_raw(DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm2))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_raw(self.m.map(|z| z * s))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.m.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.m - &other.m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Add for &HermitianOp {
    type Output = HermitianOp;
    fn add(self, rhs: Self) -> HermitianOp {
        HermitianOp::from_raw(&self.m + &rhs.m)
    }
}

impl Sub for &HermitianOp {
    type Output = HermitianOp;
    fn sub(self, rhs: Self) -> HermitianOp {
        HermitianOp::from_raw(&self.m - &rhs.m)
    }
}

impl Mul<f64> for &HermitianOp {
    type Output = HermitianOp;
    fn mul(self, rhs: f64) -> HermitianOp {
        self.scale(rhs)
    }
}

/// Pauli matrices `[σ_x, σ_y, σ_z]`.
pub fn pauli() -> [HermitianOp; 3] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let o = c(0.0, 0.0);
    [
        HermitianOp::from_raw(DMatrix::from_row_slice(2, 2, &[o, c(1.0, 0.0), c(1.0, 0.0), o])),
        HermitianOp::from_raw(DMatrix::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o])),
        HermitianOp::from_raw(DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), o, o, c(-1.0, 0.0)])),
    ]
}

/// Qubit operator `t·𝟙 + r·σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitBloch {
    pub t: f64,
    pub r: Vector3<f64>,
}

impl QubitBloch {
    pub fn new(t: f64, r: Vector3<f64>) -> Self {
        Self { t, r }
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vector3::zeros())
    }

    /// Minimum eigenvalue `t - |r|`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.t - self.r.norm()
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn to_op(&self) -> HermitianOp {
        let [sx, sy, sz] = pauli();
        let mut out = HermitianOp::identity(2).scale(self.t);
        for (s, c) in [sx, sy, sz].iter().zip(self.r.iter()) {
            out = &out + &s.scale(*c);
        }
        out
    }

    pub fn from_op(op: &HermitianOp) -> Result<Self> {
        if op.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: op.dim(),
            });
        }
        let m = op.matrix();
        let t = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
        let r = Vector3::new(m[(1, 0)].re, m[(1, 0)].im, 0.5 * (m[(0, 0)].re - m[(1, 1)].re));
        Ok(Self { t, r })
    }
}

impl Add for QubitBloch {
    type Output = QubitBloch;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.t + rhs.t, self.r + rhs.r)
    }
}

impl Mul<f64> for QubitBloch {
    type Output = QubitBloch;
    fn mul(self, s: f64) -> Self {
        Self::new(self.t * s, self.r * s)
    }
}

/// Outcome label of a POVM element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Plus,
    Minus,
    Index(usize),
    NoClick,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Plus => write!(f, "+"),
            Outcome::Minus => write!(f, "-"),
            Outcome::Index(i) => write!(f, "{i}"),
            Outcome::NoClick => write!(f, "∅"),
        }
    }
}

/// A measurement: PSD elements summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianOp>,
    labels: Vec<Outcome>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOp>, labels: Vec<Outcome>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidArgument("a POVM needs at least one element".into()));
        }
        if labels.len() != elements.len() {
            return Err(Error::DimensionMismatch {
                expected: elements.len(),
                got: labels.len(),
            });
        }
        let d = elements[0].dim();
        let mut sum = HermitianOp::zeros(d);
        for (index, e) in elements.iter().enumerate() {
            if e.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: e.dim(),
                });
            }
            let min_eig = e.min_eigenvalue();
            if min_eig < -PSD_TOL {
                return Err(Error::NotPositive { index, min_eig });
            }
            sum = &sum + e;
        }
        let dev = sum.max_abs_diff(&HermitianOp::identity(d));
        if dev > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(dev));
        }
        Ok(Self { elements, labels })
    }

    /// Labels outcomes `0, 1, ...`.
    pub fn indexed(elements: Vec<HermitianOp>) -> Result<Self> {
        let labels = (0..elements.len()).map(Outcome::Index).collect();
        Self::new(elements, labels)
    }

    pub fn elements(&self) -> &[HermitianOp] {
        &self.elements
    }

    pub fn labels(&self) -> &[Outcome] {
        &self.labels
    }

    pub fn element(&self, label: Outcome) -> Option<&HermitianOp> {
        self.labels.iter().position(|&l| l == label).map(|i| &self.elements[i])
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Max-norm deviation of the element sum from the identity.
    pub fn normalization_error(&self) -> f64 {
        let d = self.dim();
        let sum = self
            .elements
            .iter()
            .fold(HermitianOp::zeros(d), |acc, e| &acc + e);
        sum.max_abs_diff(&HermitianOp::identity(d))
    }

    /// Projective measurement in the computational basis of dimension `d`.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d)
            .map(|i| {
                let mut diag = vec![0.0; d];
                diag[i] = 1.0;
                HermitianOp::from_real_diagonal(&diag)
            })
            .collect();
        Self::indexed(elements).expect("computational basis is a POVM")
    }
}

/// Binary qubit measurement `E_± = ½((1±γ)𝟙 ± m·σ)` with `m = norm·direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMeasurement {
    direction: Vector3<f64>,
    bias: f64,
    norm: f64,
}

impl BlochMeasurement {
    /// Requires `norm >= 0` and `|bias| + norm <= 1` (positivity of both elements).
    pub fn new(direction: Vector3<f64>, bias: f64, norm: f64) -> Result<Self> {
        let len = direction.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::InvalidMeasurement("direction must be a nonzero finite vector".into()));
        }
        if !(norm >= 0.0) || !bias.is_finite() {
            return Err(Error::InvalidMeasurement(format!("invalid norm {norm} or bias {bias}")));
        }
        if bias.abs() + norm > 1.0 + HERMITIAN_TOL {
            return Err(Error::InvalidMeasurement(format!(
                "|bias| + norm = {} exceeds 1, an element would be negative",
                bias.abs() + norm
            )));
        }
        Ok(Self {
            direction: direction / len,
            bias,
            norm,
        })
    }

    /// Projective measurement along `direction`.
    pub fn pvm(direction: Vector3<f64>) -> Result<Self> {
        Self::new(direction, 0.0, 1.0)
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// The vector `m`.
    pub fn m(&self) -> Vector3<f64> {
        self.direction * self.norm
    }

    /// Bloch form of `E_+` (`plus = true`) or `E_-`.
    pub fn bloch(&self, plus: bool) -> QubitBloch {
        let s = if plus { 1.0 } else { -1.0 };
        QubitBloch::new(0.5 * (1.0 + s * self.bias), self.m() * (0.5 * s))
    }

    pub fn to_povm(&self) -> Povm {
        Povm::new(
            vec![self.bloch(true).to_op(), self.bloch(false).to_op()],
            vec![Outcome::Plus, Outcome::Minus],
        )
        .expect("positivity is checked at construction")
    }
}

/// Two-outcome POVM of a binary qubit measurement.
pub fn bloch_to_povm(m: &BlochMeasurement) -> Povm {
    m.to_povm()
}

/// Ideal measurements behind a lossy, noisy measurement unit.
#[derive(Debug, Clone, PartialEq)]
pub struct NoClickCmu {
    measurements: Vec<Povm>,
    eta: f64,
    vis: f64,
    dim: usize,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

impl NoClickCmu {
    pub fn new(measurements: Vec<Povm>, eta: f64, vis: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        check_unit("visibility", vis)?;
        let Some(first) = measurements.first() else {
            return Err(Error::InvalidArgument("at least one measurement is required".into()));
        };
        let dim = first.dim();
        if let Some(bad) = measurements.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(Self {
            measurements,
            eta,
            vis,
            dim,
        })
    }

    pub fn from_bloch(ms: &[BlochMeasurement], eta: f64, vis: f64) -> Result<Self> {
        Self::new(ms.iter().map(BlochMeasurement::to_povm).collect(), eta, vis)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn vis(&self) -> f64 {
        self.vis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measurements(&self) -> &[Povm] {
        &self.measurements
    }

    /// Click elements `ηv M_b + η(1-v) Tr[M_b]/d 𝟙` followed by the
    /// no-click element `(1-η)𝟙`.
    pub fn effective_povms(&self) -> Vec<Povm> {
        let (eta, v, d) = (self.eta, self.vis, self.dim);
        let id = HermitianOp::identity(d);
        self.measurements
            .iter()
            .map(|m| {
                let mut elements: Vec<HermitianOp> = m
                    .elements()
                    .iter()
                    .map(|e| {
                        let q = e.trace() / d as f64;
                        &e.scale(eta * v) + &id.scale(eta * (1.0 - v) * q)
                    })
                    .collect();
                elements.push(id.scale(1.0 - eta));
                let mut labels = m.labels().to_vec();
                labels.push(Outcome::NoClick);
                Povm::new(elements, labels).expect("effective elements form a POVM")
            })
            .collect()
    }
}

pub fn effective_noclick_povms(cmu: &NoClickCmu) -> Vec<Povm> {
    cmu.effective_povms()
}

/// Unit directions of a measurement set with dummy (zero-norm) measurements removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Unbiased {
    pub directions: Vec<Vector3<f64>>,
    /// Indices of the dropped dummy measurements.
    pub dropped: Vec<usize>,
}

pub fn unbias_reduce(ms: &[BlochMeasurement]) -> Unbiased {
    let mut out = Unbiased {
        directions: Vec::new(),
        dropped: Vec::new(),
    };
    for (i, m) in ms.iter().enumerate() {
        if m.norm() > 0.0 {
            out.directions.push(m.direction());
        } else {
            out.dropped.push(i);
        }
    }
    out
}
