//! Monochromatic subtrees in random two-colourings, and in the colouring
//! by parity of length where every subtree must alternate.

use stoptime::ramsey::{find_monochromatic_subtree, Coloring};

fn main() {
    for seed in 0..5 {
        let c = Coloring::random(10, seed);
        for host in [6, 8, 10] {
            let r = find_monochromatic_subtree(&c.restrict(host), 6);
            print!("seed {seed} host {host}: colour {} depth {}  ", r.color, r.depth);
        }
        println!();
    }

    let parity = Coloring::from_fn(8, |t| 1 + t.len() % 2);
    let r = find_monochromatic_subtree(&parity, 4);
    println!("parity colouring: colour {} depth {} verified {}", r.color, r.depth, r.embedding.verify().passed);
    for (t, s) in r.embedding.pairs() {
        println!("  '{t}' -> '{s}'");
    }
}
