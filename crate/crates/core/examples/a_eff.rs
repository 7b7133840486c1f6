//! Effective triggering age: from a per-visit fork probability back to an
//! age interval, and the feasibility verdicts at its endpoints.

use srrw::analysis::check_feasibility;
use srrw::envelopes::{fit_constants, laplace, solve_a_eff, EnvelopeSign};
use srrw::graph::generators;
use srrw::return_time::sample_return_times;
use srrw::TransitionKernel;

fn main() -> srrw::Result<()> {
    let (g, _) = generators::connected_erdos_renyi(20, 0.3, 11, 100)?;
    let k = TransitionKernel::lazy(g, 0.5)?;
    let samples =
        (0..20).map(|u| sample_return_times(&k, u, 10_000, u as u64)).collect::<srrw::Result<Vec<_>>>()?;
    let model = fit_constants(&samples, k.stationary(), 0.1)?;

    let q = 0.3;
    for age in [0.0, 2.0, 8.0, 16.0] {
        let p = q * laplace(&model, EnvelopeSign::Plus, age);
        let iv = solve_a_eff(&model, q, p)?;
        println!("p = {p:.4}: A_eff in [{:.3}, {:.3}]", iv.lo(), iv.hi());
    }

    let iv = solve_a_eff(&model, q, 0.2)?;
    for lambda in [0.02, 0.1, 0.3] {
        let r = check_feasibility(&model, q, &iv, lambda, 0.0)?;
        println!(
            "Lambda_del = {lambda}: viability {:+.4} ({}), safety {:+.4} ({})",
            r.viability_margin(),
            if r.viable { "holds" } else { "fails" },
            r.safety_margin(),
            if r.safe { "holds" } else { "fails" }
        );
    }
    Ok(())
}
