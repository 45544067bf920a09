//! Above H = 3/4 the normalised error tracks the Rosenblatt approximation `Z_n`.

use fbm_riemann::fbm::{generate, GeneratorSpec};
use fbm_riemann::integrators::rosenblatt_approx;
use fbm_riemann::moments::rosenblatt_approx_variance;
use fbm_riemann::{HurstIndex, SimGrid};

fn main() -> fbm_riemann::Result<()> {
    let h = HurstIndex::new(0.85)?;
    let reps = 2000;
    for n in [64, 128, 256] {
        let grid = SimGrid::new(1.0, n, 1, 1)?;
        let mut sq = 0.0;
        for r in 0..reps {
            let z = rosenblatt_approx(&generate(h, grid, GeneratorSpec::new(3, r))?, 0, 0, 1.0, n)?;
            sq += z * z;
        }
        println!(
            "n={n:>4}  E[Z_n²] ≈ {:.4}  exact {:.4}",
            sq / reps as f64,
            rosenblatt_approx_variance(h, n, 1.0)?
        );
    }
    Ok(())
}
