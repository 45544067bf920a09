//! `ν n^{2H-1} Σ ∫(s - s_n) dB`: tends to `½ B_t` above H = 3/4 and to 0 below.

use fbm_riemann::fbm::{generate, GeneratorSpec};
use fbm_riemann::integrators::weighted_drift_sum;
use fbm_riemann::{nu, HurstIndex, SimGrid};
use ndarray::Array1;

fn main() -> fbm_riemann::Result<()> {
    for hv in [0.6, 0.85] {
        let h = HurstIndex::new(hv)?;
        let path = generate(h, SimGrid::new(1.0, 1024, 8, 1)?, GeneratorSpec::new(5, 0))?;
        let ones = Array1::ones(path.fine_len());
        let b1 = path.values[[0, path.fine_len() - 1]];
        println!("H={hv}, ½B_1 = {:.4}", 0.5 * b1);
        for n in [16, 64, 256, 1024] {
            let scale = nu(h, n as u64)? * (n as f64).powf(h.two_h() - 1.0);
            println!("  n={n:>5}  {:.4}", scale * weighted_drift_sum(ones.view(), &path, 0, 1.0, n)?);
        }
    }
    Ok(())
}
