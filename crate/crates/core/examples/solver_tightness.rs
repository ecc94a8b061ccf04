//! Exact efficiency thresholds for MUB pairs and triples against the
//! closed-form binary-qubit bound.

use std::time::Instant;

use cmu_jm::bounds::{ub_binary_qubit, ub_qubit_directions, ub_whitenoise};
use cmu_jm::solver::{jm_threshold, JmProblem};
use nalgebra::Vector3;

fn main() -> cmu_jm::Result<()> {
    let sets = [
        ("z,x", vec![Vector3::z(), Vector3::x()]),
        ("z,x,y", vec![Vector3::z(), Vector3::x(), Vector3::y()]),
    ];
    println!("{:<6} {:>5} {:>10} {:>10} {:>10} {:>10} {:>8}", "dirs", "v", "solver", "binary", "dirs-ub", "white", "ms");
    for (name, dirs) in &sets {
        for v in [0.8, 0.9, 1.0] {
            let start = Instant::now();
            let p = JmProblem::new(dirs, v)?;
            let t = jm_threshold(&p, 1e-5)?;
            let n = dirs.len();
            println!(
                "{:<6} {:>5.2} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>8}",
                name,
                v,
                t.eta,
                ub_binary_qubit(n, v)?.value,
                ub_qubit_directions(dirs, v)?.value,
                ub_whitenoise(n, 2, v)?.value,
                start.elapsed().as_millis()
            );
        }
    }
    Ok(())
}
