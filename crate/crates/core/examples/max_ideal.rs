//! The dichotomy behind the maximal ideal: split the tree by the size of
//! the diagonal and check the block inequality on the side that survives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stoptime::game::check_maxideal_hypotheses;
use stoptime::operators::OperatorMatrix;
use stoptime::spaces::SpaceTag;
use stoptime::BaseNorm;

fn main() {
    let space = SpaceTag::S { base: BaseNorm::l1() };
    let dual = space.dual().unwrap();
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = OperatorMatrix::from_fn(6, 6, space.clone(), |s, u| {
            if s == u {
                rng.random_range(0.0..1.0)
            } else {
                0.1 * rng.sample::<f64, _>(StandardNormal)
            }
        });
        let r = check_maxideal_hypotheses(&t, 0.5, &space, &dual, 2).unwrap();
        println!(
            "seed {seed}: |N1| = {:>3} |N2| = {:>3} side {} depth {} blocks {} satisfied {}",
            r.n1,
            r.n2,
            r.side,
            r.depth,
            r.blocks.len(),
            r.satisfied
        );
    }
}
