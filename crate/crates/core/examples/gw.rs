//! Galton-Watson baselines against the pgf fixed point.

use srrw::population::{extinction_probability, gw_baseline, OffspringLaw};

fn main() -> srrw::Result<()> {
    for law in [
        OffspringLaw::Poisson { mean: 0.9 },
        OffspringLaw::Poisson { mean: 1.5 },
        OffspringLaw::Binomial { n: 2, p: 0.75 },
    ] {
        let s = gw_baseline(law, 200, 2000, 3, 10_000)?;
        println!(
            "{law:?}: extinct {:.4} +/- {:.4}, oracle {:.4}",
            s.extinction_fraction(),
            s.standard_error(),
            extinction_probability(&law)
        );
    }
    Ok(())
}
