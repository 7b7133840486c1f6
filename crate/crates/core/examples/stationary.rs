//! Stationary law, spectral gap and mixing times of a few small graphs.

use srrw::graph::generators;
use srrw::mixing::mixing_profile;
use srrw::TransitionKernel;

fn main() -> srrw::Result<()> {
    let (er, seed) = generators::connected_erdos_renyi(30, 0.2, 7, 100)?;
    let graphs = [
        ("path-5", generators::path(5)?),
        ("cycle-6", generators::cycle(6)?),
        ("K4", generators::complete(4)?),
        ("star-6", generators::star(6)?),
        ("ER(30, 0.2)", er),
    ];
    println!("ER draw used seed {seed}");
    for (name, g) in graphs {
        let k = TransitionKernel::lazy(g, 0.5)?;
        let m = mixing_profile(&k, 400)?;
        let pi = k.stationary();
        println!(
            "{name:12} pi_min={:.4} gap={:.4} t_mix(1/4)={} t_mix(1/8)={} spectral bound(1/8)={}",
            pi.min(),
            m.spectral_gap,
            m.t_mix(0.25)?,
            m.t_mix(0.125)?,
            m.spectral_bound(0.125)
        );
    }
    Ok(())
}
