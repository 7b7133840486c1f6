//! Doeblin and fitted envelope constants, and the Laplace envelopes they
//! induce.

use srrw::envelopes::{decay_scale, doeblin_constants, fit_constants, laplace, validate_sandwich, EnvelopeSign};
use srrw::graph::generators;
use srrw::return_time::sample_return_times;
use srrw::TransitionKernel;

fn main() -> srrw::Result<()> {
    let k = TransitionKernel::lazy(generators::path(5)?, 0.5)?;
    let doeblin = doeblin_constants(&k)?;
    let samples = (0..5).map(|u| sample_return_times(&k, u, 20_000, u as u64)).collect::<srrw::Result<Vec<_>>>()?;
    let fit = fit_constants(&samples, k.stationary(), 0.1)?;

    println!("node  pi      doeblin c-  c+       fit c-   c+");
    for u in 0..5 {
        println!(
            "{u}     {:.4}  {:.5}  {:8.3}  {:.4}  {:.4}",
            k.stationary().get(u),
            doeblin.c_minus()[u],
            doeblin.c_plus()[u],
            fit.c_minus()[u],
            fit.c_plus()[u]
        );
    }

    let held_out = (0..5).map(|u| sample_return_times(&k, u, 20_000, 100 + u as u64)).collect::<srrw::Result<Vec<_>>>()?;
    let r = validate_sandwich(&doeblin, &held_out, None, 3.0);
    println!("\ndoeblin sandwich: {} ages checked, {} violations", r.checked, r.violations.len());
    let r = validate_sandwich(&fit, &held_out, None, 3.0);
    println!("fitted sandwich:  {} ages checked, {} violations", r.checked, r.violations.len());

    let a_big = 20.0 * decay_scale(&fit, EnvelopeSign::Minus);
    for a in [0.0, 1.0, 5.0, 20.0, a_big] {
        println!(
            "L+({a:7.2}) = {:.6}  L-({a:7.2}) = {:.6}",
            laplace(&fit, EnvelopeSign::Plus, a),
            laplace(&fit, EnvelopeSign::Minus, a)
        );
    }
    Ok(())
}
