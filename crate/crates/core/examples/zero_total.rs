//! Repro intervals for the two built-in datasets with and without their
//! zero-total studies.

use reprometa_core::sim::builtin_comparison;
use reprometa_core::ReproConfig;

fn main() -> Result<(), reprometa_core::Error> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ReproConfig { seed, ..Default::default() };
    for id in ['a', 'b'] {
        let c = builtin_comparison(id, &cfg)?;
        let (fl, fh) = c.full.interval;
        let (sl, sh) = c.stripped.interval;
        println!("dataset {id}");
        println!(
            "  all {} studies   OR ({:.3}, {:.3})  log width {:.3}",
            c.full_studies,
            fl.exp(),
            fh.exp(),
            c.full_width()
        );
        println!(
            "  {} studies       OR ({:.3}, {:.3})  log width {:.3}",
            c.stripped_studies,
            sl.exp(),
            sh.exp(),
            c.stripped_width()
        );
    }
    Ok(())
}
