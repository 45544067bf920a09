//! Path-dependent integrand `B_s max_{[0,s]} B` in the Brownian case; the
//! limit variance of `√n M^n_1` is 1/4.

use fbm_riemann::integrands::IntegrandSpec;
use fbm_riemann::stats::{run_experiment_with_samples, samples_of, variance_vs_target, Experiment, Quantity, Theorem};
use fbm_riemann::HurstIndex;

fn main() -> fbm_riemann::Result<()> {
    let mut e = Experiment::new(HurstIndex::BROWNIAN, IntegrandSpec::BrownianPathdep, Theorem::Clt);
    e.n_list = vec![256];
    e.refine_m = 16;
    e.replications = 1000;
    let (_, reps) = run_experiment_with_samples(&e, 4)?;
    let xs = samples_of(&reps, Quantity::Normalized, 256, 1.0, 0, 0).expect("samples");
    let v = variance_vs_target(xs.as_slice().expect("contiguous"), 0.25, 0.15, e.base_seed)?;
    println!("Var √n M^n_1 = {:.4} (target 0.25, CI [{:.4}, {:.4}])", v.estimate, v.ci_low, v.ci_high);
    Ok(())
}
