//! One path, several coarse grids: the error process `M^n_1` of `∫ B dB`.

use fbm_riemann::fbm::{generate, GeneratorSpec};
use fbm_riemann::integrands::{build, parse_spec};
use fbm_riemann::integrators::{error_process, fine_integral, riemann_sum, ReferenceScheme};
use fbm_riemann::{HurstIndex, SimGrid};

fn main() -> fbm_riemann::Result<()> {
    let h = HurstIndex::new(0.7)?;
    let path = generate(h, SimGrid::new(1.0, 1024, 16, 1)?, GeneratorSpec::new(1, 0))?;
    let pair = build(&parse_spec("identity_B")?, &path)?;
    let scheme = ReferenceScheme::for_hurst(h);

    let reference = fine_integral(&pair, &path, 0, 1.0, scheme)?[0];
    let b1 = path.values[[0, path.fine_len() - 1]];
    println!("reference ∫B dB = {reference:.6}, B_1²/2 = {:.6}", 0.5 * b1 * b1);
    for n in [16, 64, 256, 1024] {
        let coarse = riemann_sum(&pair, &path, 0, 1.0, n)?[0];
        let rec = error_process(&pair, &path, n, 1.0, scheme, 0)?;
        println!(
            "n={n:>5}  riemann={coarse:.6}  M^n={:.4}  M^n - ½∫P={:+.4}",
            rec.m_n[[0, 0]],
            rec.corrected[[0, 0]]
        );
    }
    Ok(())
}
