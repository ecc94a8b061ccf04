//! BB84/CHSH efficiency thresholds and receiver-device-independent
//! visibility thresholds.

use cmu_jm::keyrate::{attack_saturation_visibility, bb84_threshold, rdi_visibility_threshold, Count};

fn main() -> cmu_jm::Result<()> {
    for v in [1.0, 0.99, 0.97] {
        println!(
            "bb84 v={v:.2}: eta >= {:.5} (no bin), {:.5} (bin)",
            bb84_threshold(v, false)?,
            bb84_threshold(v, true)?
        );
    }
    for eta in [0.1, 0.01, 0.001] {
        println!(
            "rdi eta={eta}: attack saturates below v={:.5}, bound vanishes below v={:.5}",
            attack_saturation_visibility(eta)?,
            rdi_visibility_threshold(eta, Count::Infinite)?
        );
    }
    for n in [2, 4, 16] {
        println!("rdi N={n} eta=0.1: v={:.5}", rdi_visibility_threshold(0.1, Count::Finite(n))?);
    }
    Ok(())
}
