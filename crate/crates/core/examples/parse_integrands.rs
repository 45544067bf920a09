//! The integrand spec grammar: canonical printing and positioned errors.

use fbm_riemann::integrands::parse_spec;

fn main() {
    for text in [
        "constant:c=3",
        "hermite:k=2",
        "poly_of_B:c=0,0,1",
        "fsde:f=tanh,g=zero",
        "convex_general:slope=1,kinks=0,weights=2",
        "poly_of_B:c=1,0,,",
        "hermit:k=2",
        "fsde:f=tanh,h=1",
    ] {
        match parse_spec(text) {
            Ok(spec) => println!("{text:<42} -> {spec}  (m, d) = {:?}", spec.dims()),
            Err(e) => println!("{text:<42} -> error: {e}"),
        }
    }
}
