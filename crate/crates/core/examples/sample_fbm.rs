//! Samples a two-component path and compares an empirical variance with the exact one.

use fbm_riemann::fbm::{generate, write_csv, GeneratorSpec, Method};
use fbm_riemann::{cov_r, HurstIndex, SimGrid};

fn main() -> fbm_riemann::Result<()> {
    let h = HurstIndex::new(0.7)?;
    let grid = SimGrid::new(1.0, 8, 4, 2)?;

    let path = generate(h, grid, GeneratorSpec::new(42, 0))?;
    write_csv(&path, std::io::stdout().lock()).expect("stdout");

    // Same law, different algorithm.
    let reps = 4000;
    for method in [Method::CirculantEmbedding, Method::Cholesky] {
        let mut acc = 0.0;
        for r in 0..reps {
            let p = generate(h, grid, GeneratorSpec::new(7, r).with_method(method))?;
            acc += p.values[[0, 16]].powi(2);
        }
        eprintln!(
            "{method:?}: Var B_1/2 ≈ {:.4}, exact {:.4}",
            acc / reps as f64,
            cov_r(h, 0.0, 0.5, 0.0, 0.5)?
        );
    }
    Ok(())
}
