//! Zero-key thresholds of DIQKD under convex-combination attacks, with and
//! without binning of the no-click outcome.

use std::time::Instant;

use cmu_jm::keyrate::{diqkd_max_over_theta, diqkd_threshold, Axis, Count, KeyRateScenario};

fn main() -> cmu_jm::Result<()> {
    use Count::{Finite, Infinite};
    let cases = [
        (Finite(3), Finite(2), Finite(1)),
        (Infinite, Infinite, Finite(1)),
        (Infinite, Infinite, Infinite),
    ];
    let start = Instant::now();
    println!("{:<12} {:>8} {:>8} {:>8} {:>8}", "case", "eta", "v", "eta-bin", "v-bin");
    for (na, nb, kb) in cases {
        let plain = KeyRateScenario::diqkd(na, nb, kb, false)?;
        let binned = KeyRateScenario::diqkd(na, nb, kb, true)?;
        println!(
            "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            plain.label(),
            diqkd_threshold(&plain, Axis::EtaAtV1, false)?,
            diqkd_threshold(&plain, Axis::VAtEta1, false)?,
            diqkd_threshold(&binned, Axis::EtaAtV1, true)?,
            diqkd_threshold(&binned, Axis::VAtEta1, true)?,
        );
    }
    println!("{} ms", start.elapsed().as_millis());

    // best partially entangled state just above the binned (3,2,1) threshold
    let s = KeyRateScenario::diqkd(Finite(3), Finite(2), Finite(1), true)?;
    for eta in [0.73, 0.76, 0.8, 0.9] {
        let (theta, b) = diqkd_max_over_theta(&s, eta, 1.0)?;
        println!("eta={eta}: theta*={theta:.4} bound={:.5} (t={:.4})", b.value, b.weight);
    }
    Ok(())
}
