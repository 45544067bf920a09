//! Second-order fluctuations of `∫ B dB` at H = 0.6: mean, variance against
//! `q + r` and a normality test.

use fbm_riemann::constants::{constants, diag_variance_factor};
use fbm_riemann::integrands::IntegrandSpec;
use fbm_riemann::stats::{run_experiment, Experiment, Theorem};
use fbm_riemann::HurstIndex;

fn main() -> fbm_riemann::Result<()> {
    let h = HurstIndex::new(0.6)?;
    let mut e = Experiment::new(h, IntegrandSpec::IdentityB { d: 1 }, Theorem::Clt);
    e.n_list = vec![512];
    e.refine_m = 2;
    e.replications = 1000;
    let r = run_experiment(&e, 4)?;
    println!("q+r = {:.5}", diag_variance_factor(&constants(h)?));
    for v in &r.variance_checks {
        println!("variance {:.4}, 95% CI [{:.4}, {:.4}], rel err {:.3}", v.estimate, v.ci_low, v.ci_high, v.rel_err);
    }
    for k in &r.ks {
        println!("KS D = {:.4}, p = {:.3}", k.statistic, k.p_value);
    }
    println!("pass: {}", r.pass);
    Ok(())
}
