//! Feasibility frontier along the trap scale, as the sweep command writes it.

use srrw::config::ExperimentConfig;
use srrw::runner::{build_envelope, sweep_csv};

const CONFIG: &str = include_str!("../../../configs/sweep.json");

fn main() -> srrw::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let r = cfg.resolve()?;
    let (model, _) = build_envelope(&cfg, &r.kernel)?;
    print!("{}", sweep_csv(&cfg, &model)?);
    Ok(())
}
