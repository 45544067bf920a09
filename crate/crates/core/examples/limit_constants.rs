//! Prints q_H, r_H and the diagonal variance factor across the Gaussian regime.

use fbm_riemann::constants::{constants, diag_variance_factor};
use fbm_riemann::HurstIndex;

fn main() -> fbm_riemann::Result<()> {
    println!("{:>6} {:>10} {:>10} {:>10} {:>6}", "H", "q", "r", "q+r", "P");
    for hv in [0.5, 0.55, 0.6, 0.65, 0.7, 0.75] {
        let c = constants(HurstIndex::new(hv)?)?;
        println!(
            "{hv:>6.2} {:>10.6} {:>10.6} {:>10.6} {:>6}",
            c.q,
            c.r,
            diag_variance_factor(&c),
            c.truncation_p
        );
    }
    Ok(())
}
