//! Free walkers spread out as independent draws from the stationary law.

use srrw::mixing::mixing_profile;
use srrw::population::occupancy_check;
use srrw::{graph::generators, TransitionKernel};

fn main() -> srrw::Result<()> {
    let k = TransitionKernel::lazy(generators::star(6)?, 0.5)?;
    let t_mix = mixing_profile(&k, 200)?.t_mix(0.25)? as u64;
    for t in [0, 1, t_mix, 10 * t_mix] {
        let r = occupancy_check(&k, 200, t, 1, 17, 0)?;
        println!("t = {t:3}: chi2 = {:9.2} on {} dof, p = {:.4}", r.statistic, r.dof, r.p_value);
    }
    Ok(())
}
