use cmu_jm::bounds::{
    bitstring_jm_check, kjm_binary_qubit, kjm_thermal, kjm_whitenoise, parent_povm_construct, ub_all_povms,
    ub_all_qubit_pvms, ub_binary_qubit, ub_loss_any, ub_qubit_directions, ub_whitenoise, v_star_2, v_star_n,
    whitenoise_floor,
};
use cmu_jm::gaussian::{
    coherent_moments, compose, homodyne_moment_check, homodyne_sim_params, n_extendable_gaussian, thermal_xy,
    ub_thermal, GaussianChannelXY, ThermalParams,
};
use cmu_jm::keyrate::{
    attack_map_cell, best_attack_p, diqkd_attack_split, diqkd_bound, h_cond_binned, h_cond_no_bin, keyrate_ub_oneway,
    p_dprime, p_prime, p_tprime, Count, KeyRateScenario,
};
use cmu_jm::optim::{bisect, NelderMead, RootBracket};
use cmu_jm::qop::{BlochMeasurement, NoClickCmu, Outcome};
use cmu_jm::solver::{jm_feasible, jm_threshold, JmProblem, Threshold};
use cmu_jm::Error;
use nalgebra::{Matrix2, Vector2, Vector3};
use proptest::prelude::*;

fn unit_vec() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(a, b, c)| a * a + b * b + c * c > 1e-2)
        .prop_map(|(a, b, c)| Vector3::new(a, b, c).normalize())
}

fn count() -> impl Strategy<Value = Count> {
    prop_oneof![(1usize..12).prop_map(Count::Finite), Just(Count::Infinite)]
}

fn key_cell() -> impl Strategy<Value = (Count, Count)> {
    (count(), count()).prop_map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
}

fn channel() -> impl Strategy<Value = GaussianChannelXY> {
    (prop::array::uniform4(-1.5..1.5f64), 0.0..2.0f64, 0.0..2.0f64, -1.0..1.0f64, prop::array::uniform2(-1.0..1.0f64)).prop_map(
        |(x, a, b, r, d)| {
            let x = Matrix2::new(x[0], x[1], x[2], x[3]);
            let off = r * (a * b).sqrt();
            GaussianChannelXY::new(x, Matrix2::new(a, off, off, b), Vector2::new(d[0], d[1])).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pair_formula_is_bitstring_formula(a in unit_vec(), b in unit_vec()) {
        prop_assert!((v_star_n(&[a, b]).unwrap() - v_star_2(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bitstring_floor(ms in prop::collection::vec(unit_vec(), 1..8)) {
        let n = ms.len() as f64;
        prop_assert!(v_star_n(&ms).unwrap() >= 1.0 / n.sqrt() - 1e-12);
    }

    #[test]
    fn attack_consistency(eta in 0.0..=1.0f64, v in 0.0..=1.0f64, (k, n) in key_cell(), d in 2usize..6) {
        let mut attacks = vec![p_prime(k, n, d, eta, v).unwrap(), p_tprime(eta, v).unwrap()];
        if let Count::Finite(n) = n {
            if n >= 2 {
                attacks.push(p_dprime(n, eta, v).unwrap());
            }
        }
        attacks.push(best_attack_p(k, n, eta, v).unwrap());
        for a in attacks {
            if a.raw_p <= 1.0 && a.eta_star > 0.0 {
                prop_assert!(a.consistency_residual(eta, v) < 1e-10, "{a:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn effective_povms_normalized(m in unit_vec(), g in -1.0..1.0f64, eta in 0.0..=1.0f64, v in 0.0..=1.0f64) {
        let norm = 1.0 - g.abs();
        let ms = [BlochMeasurement::new(m, g, norm).unwrap(), BlochMeasurement::pvm(m.cross(&Vector3::z()).try_normalize(1e-6).unwrap_or(Vector3::x())).unwrap()];
        let cmu = NoClickCmu::from_bloch(&ms, eta, v).unwrap();
        for (ideal, eff) in ms.iter().zip(cmu.effective_povms()) {
            prop_assert!(eff.normalization_error() < 1e-10);
            for b in [Outcome::Plus, Outcome::Minus] {
                let t = eff.element(b).unwrap().trace();
                let t0 = ideal.to_povm().element(b).unwrap().trace();
                prop_assert!((t - eta * t0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relaxation_implies_bitstring_test(ms in prop::collection::vec((unit_vec(), 0.0..1.0f64), 1..6)) {
        let scale = ms.iter().map(|(_, r)| r * r).sum::<f64>().sqrt().max(1.0);
        let vecs: Vec<_> = ms.iter().map(|(m, r)| m * (r / scale)).collect();
        let c = bitstring_jm_check(&vecs).unwrap();
        if c.relaxation_holds {
            prop_assert!(c.jm);
        }
    }

    #[test]
    fn parent_povm_whenever_bitstring_holds(ms in prop::collection::vec((unit_vec(), 0.0..1.0f64), 1..6)) {
        let vecs: Vec<_> = ms.iter().map(|(m, r)| m * *r).collect();
        let c = bitstring_jm_check(&vecs).unwrap();
        if c.jm && c.sum < c.bound * (1.0 - 1e-9) {
            let cert = parent_povm_construct(&vecs).unwrap();
            prop_assert!(cert.residual < 1e-10);
        }
    }

    #[test]
    fn bounds_monotone(n in 1usize..12, k in 1usize..10, d in 2usize..6, v1 in 0.0..=1.0f64, v2 in 0.0..=1.0f64, eps in 0.0..3.0f64) {
        let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
        let pairs = [
            (ub_whitenoise(n, d, lo).unwrap(), ub_whitenoise(n, d, hi).unwrap()),
            (whitenoise_floor(n, lo).unwrap(), whitenoise_floor(n, hi).unwrap()),
            (ub_binary_qubit(n, lo).unwrap(), ub_binary_qubit(n, hi).unwrap()),
            (ub_all_qubit_pvms(lo).unwrap(), ub_all_qubit_pvms(hi).unwrap()),
            (ub_all_povms(lo, d).unwrap(), ub_all_povms(hi, d).unwrap()),
            (kjm_binary_qubit(k, lo).unwrap(), kjm_binary_qubit(k, hi).unwrap()),
            (kjm_whitenoise(k, d, lo).unwrap(), kjm_whitenoise(k, d, hi).unwrap()),
        ];
        for (a, b) in pairs {
            prop_assert!(b.value <= a.value + 1e-15, "{a:?} {b:?}");
        }
        let steps = [
            (ub_loss_any(n).unwrap(), ub_loss_any(n + 1).unwrap()),
            (ub_whitenoise(n, d, hi).unwrap(), ub_whitenoise(n + 1, d, hi).unwrap()),
            (ub_binary_qubit(n, hi).unwrap(), ub_binary_qubit(n + 1, hi).unwrap()),
            (ub_thermal(n, eps).unwrap(), ub_thermal(n + 1, eps).unwrap()),
            (kjm_binary_qubit(k, hi).unwrap(), kjm_binary_qubit(k + 1, hi).unwrap()),
            (kjm_whitenoise(k, d, hi).unwrap(), kjm_whitenoise(k + 1, d, hi).unwrap()),
            (kjm_thermal(k, eps).unwrap(), kjm_thermal(k + 1, eps).unwrap()),
        ];
        for (a, b) in steps {
            prop_assert!(b.value <= a.value + 1e-15, "{a:?} {b:?}");
        }
    }

    #[test]
    fn best_attack_is_maximal((k, n) in key_cell(), eta in 0.0..=1.0f64, v in 0.0..=1.0f64) {
        let best = best_attack_p(k, n, eta, v).unwrap();
        prop_assert!(attack_map_cell(k, n).unwrap().contains(&best.formula));
        let mut rivals = vec![p_prime(k, n, 2, eta, v).unwrap(), p_tprime(eta, v).unwrap()];
        if let Count::Finite(n) = n {
            if n >= 2 {
                rivals.push(p_dprime(n, eta, v).unwrap());
            }
        }
        for r in rivals {
            prop_assert!(best.p >= r.p - 1e-12, "{best:?} < {r:?}");
        }
    }

    #[test]
    fn split_identity(na in count(), (kb, nb) in key_cell(), eta in 0.0..=1.0f64, v in 0.0..=1.0f64) {
        let s = KeyRateScenario::diqkd(na, nb, kb, false).unwrap();
        let sp = diqkd_attack_split(&s, eta, v).unwrap();
        let lhs = 2.0 * eta * v * (1.0 - eta * v);
        let rhs = sp.p_a * (1.0 - sp.alice.eta_star * sp.alice.v_star) + sp.p_b * (1.0 - sp.bob.eta_star * sp.bob.v_star);
        prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} {rhs} {sp:?}");
        prop_assert!((1.0 - sp.q - sp.p_a - sp.p_b - sp.t).abs() < 1e-12);
    }

    #[test]
    fn oneway_bound_nonincreasing_in_p(p1 in 0.0..=1.0f64, p2 in 0.0..=1.0f64, hk in 0.0..=1.0f64, hc in 0.0..=1.0f64) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(keyrate_ub_oneway(hi, hk, hc).value <= keyrate_ub_oneway(lo, hk, hc).value);
    }

    #[test]
    fn binning_is_less_stringent(eta in 0.0..=1.0f64, v in 0.0..=1.0f64) {
        prop_assert!(h_cond_binned(eta, v, std::f64::consts::FRAC_PI_4) <= h_cond_no_bin(eta, v) + 1e-12);
        let plain = KeyRateScenario::diqkd(Count::Finite(3), Count::Finite(2), Count::Finite(1), false).unwrap();
        let binned = KeyRateScenario { binning: true, ..plain };
        prop_assert!(diqkd_bound(&binned, eta, v).unwrap().value >= diqkd_bound(&plain, eta, v).unwrap().value - 1e-12);
    }

    #[test]
    fn compose_associative(a in channel(), b in channel(), c in channel()) {
        let left = compose(&compose(&a, &b), &c);
        let right = compose(&a, &compose(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn thermal_extendibility_matches_bound(i in 0usize..100, eps in prop::sample::select(vec![0.0, 0.2, 1.0]), n in 1usize..8) {
        let eta = (i as f64 + 0.5) / 100.0;
        let ext = n_extendable_gaussian(&thermal_xy(ThermalParams::new(eta, eps).unwrap()), n).unwrap();
        prop_assert_eq!(ext, ub_thermal(n, eps).unwrap().value >= eta);
    }

    #[test]
    fn moments_match_when_simulable(eta in 0.0..=1.0f64, eps in 0.0..2.0f64, re in -1.0..1.0f64, im in -1.0..1.0f64) {
        prop_assume!(homodyne_sim_params(eta, eps).is_ok());
        let thetas: Vec<f64> = (0..8).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect();
        for m in [coherent_moments(0.0, 0.0, &thetas, 8), coherent_moments(re, im, &thetas, 8)] {
            prop_assert!(homodyne_moment_check(eta, eps, &m, 8).unwrap() < 1e-9);
        }
    }

    #[test]
    fn bisect_residual_small(c in -0.9..0.9f64, s in 0.5..3.0f64) {
        let f = |x: f64| s * (x - c) + 0.1 * (x - c).powi(3);
        let tol = 1e-10;
        let br = RootBracket::new(&f, -1.0, 1.0, tol).unwrap();
        let x = bisect(f, &br);
        prop_assert!(f(x).abs() < (s + 0.4) * tol);
    }

    #[test]
    fn nelder_mead_never_worse_than_seed(x0 in -3.0..3.0f64, y0 in -3.0..3.0f64) {
        let f = |p: &[f64]| (1.0 - p[0]).powi(2) + 5.0 * (p[1] - p[0] * p[0]).powi(2);
        let m = NelderMead::default().minimize(f, &[x0, y0]);
        prop_assert!(m.value <= f(&[x0, y0]));
    }
}

/// Undecided solves are the solver's honest answer near tangential contact;
/// those cases are discarded rather than counted.
fn decided(r: cmu_jm::Result<Threshold>) -> Result<Threshold, TestCaseError> {
    match r {
        Ok(t) => Ok(t),
        Err(Error::Indeterminate { .. }) => Err(TestCaseError::reject("undecided solve")),
        Err(e) => Err(TestCaseError::fail(e.to_string())),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn feasibility_monotone_in_eta(dirs in prop::collection::vec(unit_vec(), 2..4), v in 0.6..=1.0f64, e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64) {
        let p = JmProblem::new(&dirs, v).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        if let Ok(f) = jm_feasible(&p, hi, 1e-9) {
            if f.is_feasible() {
                if let Ok(g) = jm_feasible(&p, lo, 1e-9) {
                    prop_assert!(g.is_feasible());
                }
            }
        }
    }

    #[test]
    fn analytic_bounds_below_solver(dirs in prop::collection::vec(unit_vec(), 2..4), v in 0.6..=1.0f64) {
        let p = JmProblem::new(&dirs, v).unwrap();
        let t = decided(jm_threshold(&p, 1e-4))?;
        let n = dirs.len();
        prop_assert!(ub_whitenoise(n, 2, v).unwrap().value <= t.hi + 1e-6);
        prop_assert!(ub_qubit_directions(&dirs, v).unwrap().value <= t.hi + 1e-6);
    }

    #[test]
    fn dropping_dummies_never_raises_threshold(m in unit_vec(), g in -0.5..0.5f64, v in 0.7..=1.0f64) {
        let biased = BlochMeasurement::new(m, g, 1.0 - g.abs()).unwrap();
        let pair = [BlochMeasurement::pvm(Vector3::z()).unwrap(), biased];
        let reduced = cmu_jm::qop::unbias_reduce(&pair);
        let full = decided(jm_threshold(&JmProblem::from_measurements(&pair, v).unwrap(), 1e-4))?;
        let unbiased = decided(jm_threshold(&JmProblem::new(&reduced.directions, v).unwrap(), 1e-4))?;
        prop_assert!(unbiased.eta <= full.hi + 1e-6);
    }
}

#[test]
fn mub_pairs_are_tight() {
    for v in [0.8, 0.9, 1.0] {
        let p = JmProblem::new(&[Vector3::z(), Vector3::x()], v).unwrap();
        let t = jm_threshold(&p, 1e-5).unwrap();
        assert!((t.eta - ub_binary_qubit(2, v).unwrap().value).abs() < 1e-4);
    }
}

#[test]
fn zero_key_monotone_in_eta() {
    let cases = [
        (Count::Finite(3), Count::Finite(2), Count::Finite(1)),
        (Count::Infinite, Count::Infinite, Count::Finite(1)),
        (Count::Infinite, Count::Infinite, Count::Infinite),
    ];
    for (na, nb, kb) in cases {
        for binning in [false, true] {
            let s = KeyRateScenario::diqkd(na, nb, kb, binning).unwrap();
            for v in [0.9, 0.95, 1.0] {
                let zero: Vec<bool> = (0..=200).map(|i| diqkd_bound(&s, i as f64 / 200.0, v).unwrap().zero_key).collect();
                if let Some(top) = zero.iter().rposition(|&z| z) {
                    assert!(zero[..=top].iter().all(|&z| z), "{} binning={binning} v={v}", s.label());
                }
            }
        }
    }
}
