//! Kac's identity and the exact return-time tail on a cycle.

use srrw::graph::generators;
use srrw::return_time::{empirical_tail, exact_return_tail, sample_return_times};
use srrw::TransitionKernel;

fn main() -> srrw::Result<()> {
    let k = TransitionKernel::lazy(generators::cycle(6)?, 0.5)?;
    let pi = k.stationary();
    for u in 0..k.node_count() {
        let s = sample_return_times(&k, u, 100_000, 42 + u as u64)?;
        let z = (s.mean() - 1.0 / pi.get(u)) / s.standard_error();
        println!("node {u}: mean {:.4} (Kac {:.4}), z = {z:+.2}", s.mean(), 1.0 / pi.get(u));
    }

    let s = sample_return_times(&k, 0, 100_000, 7)?;
    let exact = exact_return_tail(&k, 0, 30);
    let ages = [1, 2, 5, 10, 20, 30];
    println!("\n   A  exact     empirical  99% CI");
    for p in empirical_tail(&s, &ages)? {
        println!("{:4}  {:.5}  {:.5}    [{:.5}, {:.5}]", p.age, exact[p.age as usize - 1], p.tail, p.ci_low, p.ci_high);
    }
    Ok(())
}
