//! Traps only: the population decays geometrically at rate 1 - Lambda_del.

use srrw::policy::{Controller, PolicySpec};
use srrw::population::{run_replicas, survival_fit, SimulationSettings, TrapProfile};
use srrw::{graph::generators, TransitionKernel};

fn main() -> srrw::Result<()> {
    let k = TransitionKernel::lazy(generators::complete(4)?, 0.5)?;
    let traps = TrapProfile::uniform(4, 0.1)?;
    let lambda = traps.absorption_pressure(k.stationary());
    let controller = Controller::Fixed(PolicySpec::passive(4));
    let settings = SimulationSettings { z0: 50, horizon: 200, ..Default::default() };
    let traces = run_replicas(&k, &traps, &controller, &settings, 1, 500)?;
    let fit = survival_fit(&traces, 2).expect("some exposure");
    let extinct = traces.iter().filter(|t| t.extinct).count();
    println!("Lambda_del = {lambda}");
    println!("survival per step {:.5} +/- {:.5} ({} token-steps)", fit.rate, fit.se, fit.exposures);
    println!("{extinct}/500 replicas extinct by t = 200");
    Ok(())
}
