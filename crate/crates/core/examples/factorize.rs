//! Factor the identity of a small truncation through a perturbed diagonal
//! operator on `D^{ℓ1}`, across host depths.

use stoptime::factorization::{diagonalize_d, FactorOptions};
use stoptime::verify::perturbed_diagonal;

fn main() {
    let (delta, eta) = (0.5, 0.5);
    for host in 4..=6 {
        let t = perturbed_diagonal(host, delta, 7);
        let cert = diagonalize_d(&t, &FactorOptions::new(delta, eta, 2)).unwrap();
        println!(
            "host {host}: output depth {} residual {:.3e} |A||B| <= {:.4} (bound {:.4})",
            cert.output_depth,
            cert.residual,
            cert.norm_product_bound,
            (1.0 + eta) / delta
        );
        let nodes: Vec<String> = cert.embedding.images().iter().map(|s| format!("'{s}'")).collect();
        println!("  selected {}", nodes.join(" "));
    }
}
