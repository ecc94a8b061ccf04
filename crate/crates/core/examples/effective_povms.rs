//! Effective POVMs of a lossy, noisy qubit measurement unit.

use cmu_jm::qop::{BlochMeasurement, NoClickCmu, Outcome};
use nalgebra::Vector3;

fn main() -> cmu_jm::Result<()> {
    let ms = [BlochMeasurement::pvm(Vector3::z())?, BlochMeasurement::pvm(Vector3::x())?];
    for (eta, v) in [(1.0, 1.0), (0.8, 0.9), (0.5, 0.5)] {
        let cmu = NoClickCmu::from_bloch(&ms, eta, v)?;
        println!("eta = {eta}, v = {v}");
        for (y, povm) in cmu.effective_povms().iter().enumerate() {
            for (label, el) in povm.labels().iter().zip(povm.elements()) {
                let eig = el.eigenvalues();
                println!("  y={y} {label:>2}  tr={:.4}  eig=[{:.4}, {:.4}]", el.trace(), eig[0], eig[1]);
            }
            assert!(povm.normalization_error() < 1e-12);
            let empty = povm.element(Outcome::NoClick).map(|e| e.trace() / 2.0);
            assert!((empty.unwrap() - (1.0 - eta)).abs() < 1e-12);
        }
    }
    Ok(())
}
