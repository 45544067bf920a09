//! `M^n_1 → ½∫P ds` for a Hermite and a convex integrand.

use fbm_riemann::integrands::parse_spec;
use fbm_riemann::stats::{run_experiment, Experiment, Quantity, Theorem};
use fbm_riemann::HurstIndex;

fn main() -> fbm_riemann::Result<()> {
    for spec in ["hermite:k=2", "abs_B", "convex_general:slope=0.5,kinks=-0.5,0.5,weights=1,2"] {
        let mut e = Experiment::new(HurstIndex::new(0.65)?, parse_spec(spec)?, Theorem::FirstOrder);
        e.n_list = vec![32, 128, 512];
        e.refine_m = 16;
        e.replications = 200;
        let r = run_experiment(&e, 4)?;
        println!("{spec}");
        for &n in &e.n_list {
            let est = r.estimate(Quantity::Centered, n, 1.0, 0, 0).expect("estimate");
            println!("  n={n:>4}  MSE={:.3e} ± {:.1e}", est.mse, est.mse_se);
        }
        for c in &r.criteria {
            println!("  {} {} (threshold {})", if c.pass { "ok  " } else { "FAIL" }, c.name, c.threshold);
        }
    }
    Ok(())
}
