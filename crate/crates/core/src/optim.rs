//! Small deterministic numerical kernels shared by the rest of the crate:
//! bisection, the Weiszfeld geometric-median iteration, Nelder–Mead, golden
//! section search and the binary entropy.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// An interval on which a continuous function changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    f_lo: f64,
}

impl RootBracket {
    /// Checks `f(lo) * f(hi) <= 0` before accepting the bracket.
    pub fn new<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(lo < hi) || !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bracket needs lo < hi and tol > 0, got [{lo}, {hi}] with tol {tol}"
            )));
        }
        let (f_lo, f_hi) = (f(lo), f(hi));
        if !(f_lo * f_hi <= 0.0) {
            return Err(Error::InvalidBracket { lo, hi, f_lo, f_hi });
        }
        Ok(Self { lo, hi, tol, f_lo })
    }

    /// Number of halvings needed to shrink the bracket below `tol`.
    pub fn iterations(&self) -> usize {
        ((self.hi - self.lo) / self.tol).log2().ceil().max(0.0) as usize
    }
}

/// Bisection with the deterministic iteration count `ceil(log2((hi-lo)/tol))`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, bracket: &RootBracket) -> f64 {
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    if bracket.f_lo == 0.0 {
        return lo;
    }
    let lo_negative = bracket.f_lo < 0.0;
    for _ in 0..bracket.iterations() {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest `x` in `[lo, hi]` with `f(x) <= 0`, for functions that are
/// positive at `hi`. The interval is scanned downwards on `grid` points and
/// the first sign change is refined by bisection to `tol`.
pub fn upper_crossing<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    grid: usize,
    tol: f64,
) -> Result<f64> {
    let grid = grid.max(2);
    if !(f(hi) > 0.0) {
        return Err(Error::NoThreshold { lo, hi });
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let mut upper = hi;
    for i in (0..grid - 1).rev() {
        let x = lo + step * i as f64;
        if f(x) <= 0.0 {
            let bracket = RootBracket::new(&f, x, upper, tol)?;
            // Keep the non-positive side of the final interval.
            let (mut a, mut b) = (bracket.lo, bracket.hi);
            for _ in 0..bracket.iterations() {
                let mid = 0.5 * (a + b);
                if f(mid) <= 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(0.5 * (a + b));
        }
        upper = x;
    }
    Err(Error::NoThreshold { lo, hi })
}

/// Maximizes a unimodal function on `[a, b]` by golden-section search.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Maximizes `f` over `[a, b]`: the best of `grid` equispaced samples is
/// refined by golden section inside its neighbouring cells.
pub fn grid_golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, grid: usize, tol: f64) -> (f64, f64) {
    let grid = grid.max(3);
    let step = (b - a) / (grid - 1) as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..grid {
        let y = f(a + step * i as f64);
        if y > best {
            best = y;
            best_i = i;
        }
    }
    let lo = a + step * best_i.saturating_sub(1) as f64;
    let hi = (a + step * (best_i + 1) as f64).min(b);
    let (x, y) = golden_section_max(&f, lo, hi, tol);
    if y >= best {
        (x, y)
    } else {
        (a + step * best_i as f64, best)
    }
}

const WEISZFELD_MAX_ITER: usize = 100_000;
const WEISZFELD_SINGULAR_EPS: f64 = 1e-12;

/// Result of a geometric-median computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricMedian {
    pub point: Vector3<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// The optimum is one of the input points (detected by the subgradient test).
    pub at_vertex: bool,
}

fn weighted_objective(t: &Vector3<f64>, pts: &[(Vector3<f64>, f64)]) -> f64 {
    pts.iter().map(|(p, w)| w * (t - p).norm()).sum()
}

/// Minimizer of `sum_k |p_k - t|` (Fermat–Torricelli point).
///
/// Coincident inputs are merged into weighted points. Each distinct point is
/// first tested for optimality with the subgradient condition
/// `|sum_{i != j} w_i (p_j - p_i)/|p_j - p_i|| <= w_j`; otherwise Weiszfeld
/// iterations run from the weighted centroid until the relative step falls
/// below `tol`. Two distinct points of equal weight return the midpoint.
pub fn weiszfeld(points: &[Vector3<f64>], tol: f64) -> Result<GeometricMedian> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("weiszfeld needs at least one point".into()));
    }
    let mut groups: Vec<(Vector3<f64>, f64)> = Vec::new();
    for p in points {
        match groups.iter_mut().find(|(q, _)| (q - p).norm() <= 1e-14) {
            Some((_, w)) => *w += 1.0,
            None => groups.push((*p, 1.0)),
        }
    }

    let done = |point: Vector3<f64>, iterations, at_vertex| GeometricMedian {
        objective: weighted_objective(&point, &groups),
        point,
        iterations,
        at_vertex,
    };

    if groups.len() == 1 {
        return Ok(done(groups[0].0, 0, true));
    }
    if groups.len() == 2 && groups[0].1 == groups[1].1 {
        return Ok(done(0.5 * (groups[0].0 + groups[1].0), 0, false));
    }

    let mut vertex: Option<Vector3<f64>> = None;
    for (j, (pj, wj)) in groups.iter().enumerate() {
        let pull: Vector3<f64> = groups
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, (pi, wi))| *wi * (pj - pi) / (pj - pi).norm())
            .sum();
        if pull.norm() <= *wj + 1e-12 {
            let better = vertex.is_none_or(|v| {
                weighted_objective(pj, &groups) < weighted_objective(&v, &groups)
            });
            if better {
                vertex = Some(*pj);
            }
        }
    }
    if let Some(v) = vertex {
        return Ok(done(v, 0, true));
    }

    let total: f64 = groups.iter().map(|(_, w)| w).sum();
    let mut t: Vector3<f64> = groups.iter().map(|(p, w)| *w * p).sum::<Vector3<f64>>() / total;
    let mut obj = weighted_objective(&t, &groups);
    for it in 1..=WEISZFELD_MAX_ITER {
        let mut num = Vector3::zeros();
        let mut den = 0.0;
        for (p, w) in &groups {
            let d = (t - p).norm().max(WEISZFELD_SINGULAR_EPS);
            num += *w * p / d;
            den += w / d;
        }
        let next = num / den;
        let next_obj = weighted_objective(&next, &groups);
        debug_assert!(
            next_obj <= obj + 1e-12 * (1.0 + obj),
            "weiszfeld objective increased: {obj} -> {next_obj}"
        );
        let step = (next - t).norm();
        t = next;
        obj = next_obj;
        if step <= tol * (1.0 + t.norm()) {
            return Ok(done(t, it, false));
        }
    }
    Err(Error::NonConvergence {
        method: "weiszfeld",
        iterations: WEISZFELD_MAX_ITER,
    })
}

/// Vertices and values of a Nelder–Mead simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexState {
    pub vertices: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub iteration: usize,
}

impl SimplexState {
    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.vertices = idx.iter().map(|&i| self.vertices[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    /// Largest distance from the best vertex.
    pub fn diameter(&self) -> f64 {
        let best = &self.vertices[0];
        self.vertices
            .iter()
            .map(|v| {
                v.iter()
                    .zip(best)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead with reflection 1, expansion 2, contraction ½ and shrink ½.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub initial_step: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            tol: 1e-8,
            max_iterations: 10_000,
        }
    }
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

impl NelderMead {
    pub fn minimize<F: Fn(&[f64]) -> f64>(&self, f: F, seed: &[f64]) -> Minimum {
        let eval = |x: &[f64]| {
            let y = f(x);
            if y.is_nan() {
                f64::INFINITY
            } else {
                y
            }
        };
        let n = seed.len();
        let mut vertices = vec![seed.to_vec()];
        for i in 0..n {
            let mut v = seed.to_vec();
            v[i] += self.initial_step;
            vertices.push(v);
        }
        let values = vertices.iter().map(|v| eval(v)).collect();
        let mut s = SimplexState {
            vertices,
            values,
            iteration: 0,
        };
        s.sort();

        let mut converged = false;
        while s.iteration < self.max_iterations {
            if s.diameter() < self.tol {
                converged = true;
                break;
            }
            s.iteration += 1;
            let worst = n;
            let mut centroid = vec![0.0; n];
            for v in &s.vertices[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let xr = affine(&centroid, &s.vertices[worst], -1.0);
            let fr = eval(&xr);
            if fr < s.values[0] {
                let xe = affine(&centroid, &s.vertices[worst], -2.0);
                let fe = eval(&xe);
                if fe < fr {
                    s.vertices[worst] = xe;
                    s.values[worst] = fe;
                } else {
                    s.vertices[worst] = xr;
                    s.values[worst] = fr;
                }
            } else if fr < s.values[n - 1] {
                s.vertices[worst] = xr;
                s.values[worst] = fr;
            } else {
                let (xc, fc, accept) = if fr < s.values[worst] {
                    let xc = affine(&centroid, &xr, 0.5);
                    let fc = eval(&xc);
                    (xc, fc, fc <= fr)
                } else {
                    let xc = affine(&centroid, &s.vertices[worst], 0.5);
                    let fc = eval(&xc);
                    (xc, fc, fc < s.values[worst])
                };
                if accept {
                    s.vertices[worst] = xc;
                    s.values[worst] = fc;
                } else {
                    let best = s.vertices[0].clone();
                    for i in 1..=n {
                        s.vertices[i] = affine(&best, &s.vertices[i], 0.5);
                        s.values[i] = eval(&s.vertices[i]);
                    }
                }
            }
            s.sort();
        }
        Minimum {
            point: s.vertices[0].clone(),
            value: s.values[0],
            iterations: s.iteration,
            converged,
        }
    }
}

/// Nelder–Mead with the default initial step and iteration cap.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, seed: &[f64], tol: f64) -> (Vec<f64>, f64) {
    let m = NelderMead {
        tol,
        ..NelderMead::default()
    };
    let min = m.minimize(f, seed);
    (min.point, min.value)
}
