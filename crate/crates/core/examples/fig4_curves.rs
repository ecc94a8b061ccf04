//! Efficiency thresholds against visibility for white-noise and binary
//! qubit units, written as CSV to stdout.

use cmu_jm::cli::{cmd_curve, thread_pool, CurveId, Format, Grid, Report};

fn main() -> cmu_jm::Result<()> {
    let pool = thread_pool()?;
    let grid = Grid::new(0.3, 1.0, 15)?;
    for id in ["fig4-solid-2", "fig4-solid-3", "fig4-dashed-2", "fig4-dashed-inf"] {
        let curve = cmd_curve(&id.parse::<CurveId>()?, &grid, &pool)?;
        println!("# {id}");
        print!("{}", curve.render(Format::Csv)?);
    }
    Ok(())
}
