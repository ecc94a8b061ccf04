//! Visibility thresholds of qubit direction sets and the bounds they induce.

use cmu_jm::bounds::{bitstring_jm_check, parent_povm_construct, ub_qubit_directions, v_star_2, v_star_3, v_star_n};
use nalgebra::Vector3;

fn main() -> cmu_jm::Result<()> {
    let (x, y, z) = (Vector3::x(), Vector3::y(), Vector3::z());
    let tilted = Vector3::new(1.0, 0.0, 1.0).normalize();

    println!("pairs");
    for (name, a, b) in [("z,x", z, x), ("z,tilt", z, tilted), ("z,z", z, z)] {
        println!("  {name:<8} v* = {:.6}", v_star_2(&a, &b)?);
    }

    println!("triples");
    for (name, t) in [("x,y,z", [x, y, z]), ("x,x,z", [x, x, z]), ("z,tilt,x", [z, tilted, x])] {
        let exact = v_star_3(&t[0], &t[1], &t[2])?;
        let floor = v_star_n(&t)?;
        println!("  {name:<8} v* = {exact:.6}  bitstring {floor:.6}");
    }

    // at the bitstring visibility the parent POVM exists and reproduces the marginals
    let dirs = [x, y, z];
    let s = v_star_n(&dirs)?;
    let scaled: Vec<_> = dirs.iter().map(|d| d * s).collect();
    let check = bitstring_jm_check(&scaled)?;
    let parent = parent_povm_construct(&scaled)?;
    println!(
        "parent: {} elements, residual {:.1e}, sum/bound {:.6}",
        parent.distinct_elements().len(),
        parent.residual,
        check.sum / check.bound
    );

    for v in [0.6, 0.8, 1.0] {
        let b = ub_qubit_directions(&dirs, v)?;
        println!("x,y,z at v={v}: eta <= {:.6} ({})", b.value, b.formula.id());
    }
    Ok(())
}
