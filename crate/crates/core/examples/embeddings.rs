//! A random order-isomorphic subtree and the operators `B` and `Q` it
//! induces: `QB = I`, `B` is an isometry and `Q` is a contraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stoptime::operators::build_b_q;
use stoptime::spaces::{CoeffVector, SpaceTag};
use stoptime::tree::{SubtreeEmbedding, Truncation};
use stoptime::BaseNorm;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e = SubtreeEmbedding::random(2, 5, &mut rng).unwrap();
    println!("verified: {}", e.verify().passed);
    for (t, s) in e.pairs() {
        println!("  '{t}' -> '{s}'");
    }

    let space = SpaceTag::S { base: BaseNorm::l2() };
    let (b, q) = build_b_q(&e, Truncation::new(5), space.clone()).unwrap();
    println!("|QB - I| = {}", q.compose(&b).unwrap().distance_to_identity());

    let x = CoeffVector::from_fn(2, |_| rng.random_range(-1.0..1.0));
    let y = CoeffVector::from_fn(5, |_| rng.random_range(-1.0..1.0));
    let nx = space.norm(&x).unwrap();
    let nbx = space.norm(&b.apply(&x).unwrap()).unwrap();
    let ny = space.norm(&y).unwrap();
    let nqy = space.norm(&q.apply(&y).unwrap()).unwrap();
    println!("|Bx| = {nbx:.9}  |x| = {nx:.9}");
    println!("|Qy| = {nqy:.9} <= |y| = {ny:.9}");
}
