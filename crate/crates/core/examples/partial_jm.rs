//! Bounds for joint measurability of a key subset of `K` measurements.

use cmu_jm::bounds::{kjm_binary_qubit, kjm_halving, kjm_thermal, kjm_whitenoise};

fn main() -> cmu_jm::Result<()> {
    println!("{:>3} {:>10} {:>10} {:>10}", "K", "binary", "white", "thermal");
    for k in 1..=5 {
        println!(
            "{k:>3} {:>10.5} {:>10.5} {:>10.5}",
            kjm_binary_qubit(k, 0.95)?.value,
            kjm_whitenoise(k, 2, 0.95)?.value,
            kjm_thermal(k, 0.1)?.value
        );
    }
    for eta in [0.5, 0.8, 1.0] {
        println!("halving {eta}: {:.5}", kjm_halving(eta)?);
    }
    Ok(())
}
