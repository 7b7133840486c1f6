//! A two-regime policy that holds the population inside a corridor.

use srrw::analysis::{corridor_stats, lyapunov_drift};
use srrw::config::ExperimentConfig;
use srrw::population::{block_drift, run, BlockPlan};

const CONFIG: &str = include_str!("../../../configs/corridor.json");

fn main() -> srrw::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let r = cfg.resolve()?;
    let lambda = r.traps.absorption_pressure(r.kernel.stationary());
    let plan = BlockPlan::new(10, 4.0, 3.5)?;
    println!("block length {}", plan.block_length());
    for replica in 0..3 {
        let trace = run(&r.kernel, &r.traps, &r.controller, &r.settings, cfg.simulation.seed, replica)?;
        let s = corridor_stats(&trace, 20, 200, &plan)?;
        let d = block_drift(&trace, &plan, lambda, 20)?;
        let ly = lyapunov_drift(&trace, 20, 200, &plan)?;
        println!(
            "replica {replica}: inside {:.3}, {} excursions, mean return {:.2} blocks, drift sign agreement {:.3}, dV below {:+.2} above {:+.2}",
            s.inside_fraction,
            s.excursions.len(),
            s.mean_return_blocks.unwrap_or(f64::NAN),
            d.agreement().unwrap_or(f64::NAN),
            ly.below.mean_dv.unwrap_or(f64::NAN),
            ly.above.mean_dv.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
