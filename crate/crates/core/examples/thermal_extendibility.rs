//! Extendibility of the thermal-noise channel and its heterodyne simulation.

use cmu_jm::gaussian::{
    amp_xy, bs_trace_xy, coherent_moments, compose, homodyne_moment_check, homodyne_sim_params, n_extendable_gaussian,
    thermal_xy, ub_thermal, ThermalParams,
};

fn main() -> cmu_jm::Result<()> {
    for n in [2, 3, 5] {
        for eps in [0.0, 0.3, 1.0] {
            let g = 1.0 / (1.0 - eps / 2.0);
            let parent = compose(&amp_xy(g)?, &bs_trace_xy(n)?);
            let eta = ub_thermal(n, eps)?.value;
            let target = thermal_xy(ThermalParams::new(eta.min(1.0), eps)?);
            println!(
                "N={n} eps={eps:.1}: eta_max = {eta:.6}, parent mismatch {:.1e}, extendable {}",
                parent.max_abs_diff(&target),
                n_extendable_gaussian(&target, n)?
            );
        }
    }

    let thetas: Vec<f64> = (0..8).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect();
    let inputs = [coherent_moments(0.0, 0.0, &thetas, 8), coherent_moments(0.7, -0.3, &thetas, 8)];
    for (eta, eps) in [(0.3, 0.0), (0.5, 0.0), (0.6, 0.5)] {
        let sim = homodyne_sim_params(eta, eps)?;
        let worst = inputs
            .iter()
            .map(|m| homodyne_moment_check(eta, eps, m, 8))
            .collect::<cmu_jm::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!("eta={eta} eps={eps}: G={:.6} sigma2={:.6} moment deviation {worst:.1e}", sim.gain, sim.sigma2);
    }
    Ok(())
}
