//! Derandomised sign choice: greedy conditional expectation against the
//! average over all sign patterns and against exhaustive search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stoptime::game::{select_signs, Block, SignMode};
use stoptime::operators::OperatorMatrix;
use stoptime::spaces::SpaceTag;
use stoptime::tree::Node;
use stoptime::BaseNorm;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = OperatorMatrix::from_fn(3, 3, SpaceTag::S { base: BaseNorm::l1() }, |_, _| rng.random_range(-1.0..1.0));
    let block = Block::unit(vec![Node::new(2, 0), Node::new(2, 3), Node::new(3, 1), Node::new(3, 6)]);
    let m = block.nodes.len();

    let value = |signs: &[f64]| -> f64 {
        let mut v = 0.0;
        for (j, &sj) in block.nodes.iter().zip(signs) {
            for (l, &sl) in block.nodes.iter().zip(signs) {
                v += sj * sl * t.get(*l, *j) / m as f64;
            }
        }
        v
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for mask in 0..1u32 << m {
        let s: Vec<f64> = (0..m).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        lo = lo.min(value(&s));
        hi = hi.max(value(&s));
    }

    for mode in [SignMode::AtLeastAverage, SignMode::AtMostAverage] {
        let r = select_signs(&t, &block, mode).unwrap();
        println!("{mode:?}: signs {:?} value {:.6} average {:.6}", r.signs, r.value, r.average);
    }
    println!("exhaustive range [{lo:.6}, {hi:.6}]");
}
