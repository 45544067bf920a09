//! Log-log slope of the centred MSE for `u = B³` on both sides of H = 3/4.

use fbm_riemann::integrands::parse_spec;
use fbm_riemann::stats::{run_experiment, Experiment, Theorem};
use fbm_riemann::HurstIndex;

fn main() -> fbm_riemann::Result<()> {
    for hv in [0.6, 0.85] {
        let mut e = Experiment::new(HurstIndex::new(hv)?, parse_spec("poly_of_B:c=0,0,0,1")?, Theorem::RateSlope);
        e.n_list = vec![128, 256, 512, 1024];
        e.refine_m = 64;
        e.replications = 300;
        let r = run_experiment(&e, 4)?;
        for s in &r.slopes {
            println!("H={hv}: slope {:.3} ± {:.3}, expected {:.2}", s.slope, s.stderr, s.expected);
        }
    }
    Ok(())
}
