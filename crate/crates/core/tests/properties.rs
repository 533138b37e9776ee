//! Property tests for the invariants of each module, checked against
//! brute-force references written over bit strings.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stoptime::base_norm::lp_norm;
use stoptime::factorization::{diagonalize_d, FactorOptions};
use stoptime::game::{run_rep_game, select_signs, Block, RandomAdversary, SignMode};
use stoptime::operators::{build_b_q, OperatorMatrix};
use stoptime::ramsey::{find_monochromatic_subtree, Coloring};
use stoptime::spaces::{dual_norm_d, norm_b, norm_s, pairing, CoeffVector, SpaceTag};
use stoptime::tree::{Node, SubtreeEmbedding, Truncation};
use stoptime::BaseNorm;

fn words(depth: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut level = vec![String::new()];
    for _ in 0..depth {
        level = level.iter().flat_map(|w| [format!("{w}0"), format!("{w}1")]).collect();
        out.extend(level.iter().cloned());
    }
    out
}

fn comparable(a: &str, b: &str) -> bool {
    a.starts_with(b) || b.starts_with(a)
}

fn node(w: &str) -> Node {
    let bits: Vec<u8> = w.bytes().map(|c| c - b'0').collect();
    Node::from_bits(&bits).unwrap()
}

fn brute_s(x: &CoeffVector, p: f64) -> f64 {
    let ws = words(x.depth() as usize);
    let n = ws.len();
    let mut best: f64 = 0.0;
    for mask in 1u32..1 << n {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let ok = members.iter().all(|&i| members.iter().all(|&j| i == j || !comparable(&ws[i], &ws[j])));
        if ok {
            let vals: Vec<f64> = members.iter().map(|&i| x.get(node(&ws[i]))).collect();
            best = best.max(lp_norm(&vals, p));
        }
    }
    best
}

fn brute_b(x: &CoeffVector, p: f64) -> f64 {
    let d = x.depth() as usize;
    words(d)
        .iter()
        .filter(|w| w.len() == d)
        .map(|leaf| {
            let vals: Vec<f64> = (0..=d).map(|m| x.get(node(&leaf[..m]))).collect();
            lp_norm(&vals, p)
        })
        .fold(0.0, f64::max)
}

fn vector(depth: u8) -> impl Strategy<Value = CoeffVector> {
    let n = Truncation::new(depth).node_count();
    prop::collection::vec(-2.0f64..2.0, n).prop_map(move |v| CoeffVector::from_dense(depth, v))
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0), Just(f64::INFINITY)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standard_order_is_length_then_bits(a in 0u64..2000, b in 0u64..2000) {
        let (s, t) = (Node::from_order_index(a + 1), Node::from_order_index(b + 1));
        prop_assert_eq!(s.order_index(), a + 1);
        let key = |n: Node| (n.len(), n.to_bit_string());
        prop_assert_eq!(a.cmp(&b), key(s).cmp(&key(t)));
    }

    #[test]
    fn s_norm_matches_antichain_search(x in vector(2), p in exponent()) {
        let base = BaseNorm::lp(p).unwrap();
        let fast = norm_s(&x, &base).unwrap();
        let slow = brute_s(&x, p);
        prop_assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0), "{fast} vs {slow}");
    }

    #[test]
    fn b_norm_matches_branch_search(x in vector(4), p in exponent()) {
        let base = BaseNorm::lp(p).unwrap();
        let fast = norm_b(&x, &base);
        let slow = brute_b(&x, p);
        prop_assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0));
    }

    #[test]
    fn norms_ignore_signs(x in vector(3), flips in prop::collection::vec(any::<bool>(), 15), p in exponent()) {
        let base = BaseNorm::lp(p).unwrap();
        let mut y = x.clone();
        for (v, f) in y.as_mut_slice().iter_mut().zip(flips) {
            if f { *v = -*v; }
        }
        prop_assert!((norm_s(&x, &base).unwrap() - norm_s(&y, &base).unwrap()).abs() < 1e-12);
        prop_assert!((norm_b(&x, &base) - norm_b(&y, &base)).abs() < 1e-12);
    }

    #[test]
    fn d_norm_of_l1_is_the_heaviest_branch(f in vector(3)) {
        let got = dual_norm_d(&f, &BaseNorm::l1()).unwrap().value;
        let want = brute_b(&f, 1.0);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
    }

    #[test]
    fn pairing_is_bounded_by_the_norms(x in vector(3), f in vector(3)) {
        let l1 = BaseNorm::l1();
        let lhs = pairing(&x, &f).unwrap().abs();
        let rhs = norm_s(&x, &l1).unwrap() * dual_norm_d(&f, &l1).unwrap().value;
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn embedded_copies_keep_their_norm(seed in any::<u64>(), x in vector(2), p in exponent()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = SubtreeEmbedding::random(2, 5, &mut rng).unwrap();
        let base = BaseNorm::lp(p).unwrap();
        for space in [SpaceTag::S { base: base.clone() }, SpaceTag::B { base: base.clone() }] {
            let (b, q) = build_b_q(&e, Truncation::new(5), space.clone()).unwrap();
            prop_assert_eq!(q.compose(&b).unwrap().distance_to_identity(), 0.0);
            let bx = b.apply(&x).unwrap();
            prop_assert!((space.norm(&bx).unwrap() - space.norm(&x).unwrap()).abs() <= 1e-12 * space.norm(&x).unwrap().max(1.0));
        }
    }

    #[test]
    fn random_embeddings_preserve_prefix_and_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = SubtreeEmbedding::random(3, 7, &mut rng).unwrap();
        let pairs: Vec<(String, String)> = e.pairs().map(|(t, s)| (t.to_bit_string(), s.to_bit_string())).collect();
        for (t1, s1) in &pairs {
            for (t2, s2) in &pairs {
                prop_assert_eq!(t2.starts_with(t1.as_str()), s2.starts_with(s1.as_str()));
            }
        }
        let images: Vec<u64> = e.images().iter().map(|s| s.order_index()).collect();
        prop_assert!(images.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn greedy_signs_beat_the_average(
        entries in prop::collection::vec(-1.0f64..1.0, 49),
        picks in prop::sample::subsequence((0..7usize).collect::<Vec<_>>(), 1..=4),
    ) {
        let t = OperatorMatrix::square(2, SpaceTag::S { base: BaseNorm::l1() }, DMatrix::from_row_slice(7, 7, &entries)).unwrap();
        let block = Block::unit(picks.iter().map(|&i| Node::from_dense_index(i)).collect());
        prop_assert!((block.weight() - 1.0).abs() < 1e-15);
        let m = block.nodes.len();
        let eval = |signs: &[f64]| -> f64 {
            let mut v = 0.0;
            for j in 0..m {
                for l in 0..m {
                    v += signs[j] * signs[l] * block.lambda[j] * block.mu[l] * t.get(block.nodes[l], block.nodes[j]);
                }
            }
            v
        };
        let average: f64 = (0..m).map(|j| block.lambda[j] * block.mu[j] * t.get(block.nodes[j], block.nodes[j])).sum();
        let up = select_signs(&t, &block, SignMode::AtLeastAverage).unwrap();
        let down = select_signs(&t, &block, SignMode::AtMostAverage).unwrap();
        prop_assert!((up.value - eval(&up.signs)).abs() < 1e-12);
        prop_assert!((down.value - eval(&down.signs)).abs() < 1e-12);
        prop_assert!(up.value >= average - 1e-12);
        prop_assert!(down.value <= average + 1e-12);
        prop_assert!(up.signs.iter().chain(&down.signs).all(|s| s.abs() == 1.0));
    }

    #[test]
    fn monochromatic_subtrees_are_monochromatic(seed in any::<u64>(), k in 1u8..4) {
        let c = Coloring::random(7, seed);
        let r = find_monochromatic_subtree(&c, k);
        prop_assert!(r.embedding.verify().passed);
        prop_assert!(r.embedding.images().iter().all(|&s| c.color(s) == r.color));
        prop_assert!(r.depth >= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn diagonal_operators_factor_exactly(diag in prop::collection::vec(0.5f64..2.0, 15)) {
        let d = CoeffVector::from_dense(3, diag);
        let t = OperatorMatrix::diagonal(&d, SpaceTag::D { base: BaseNorm::l1() });
        let cert = diagonalize_d(&t, &FactorOptions::new(0.5, 0.5, 2)).unwrap();
        let product = cert.a.matrix() * t.matrix() * cert.b.matrix();
        let defect = (product - DMatrix::<f64>::identity(7, 7)).abs().max();
        prop_assert!(defect <= 1e-10, "{defect}");
        prop_assert!(cert.norm_product_bound <= 2.0 + 1e-6);
    }

    #[test]
    fn game_images_climb_the_linear_order(seed in any::<u64>()) {
        let mut adv = RandomAdversary::new(0.2, seed);
        let tr = run_rep_game(&mut adv, 2, 8, &SpaceTag::S { base: BaseNorm::l1() }).unwrap();
        let images: Vec<Node> = tr.images().into_iter().map(|s| s.unwrap()).collect();
        prop_assert_eq!(images.len(), 7);
        prop_assert!(images.windows(2).all(|w| w[0].order_index() < w[1].order_index()));
        for turn in tr.turns.iter().filter(|t| !t.failed) {
            prop_assert!(turn.primal_distance < turn.adversary.eta);
            prop_assert!(turn.dual_distance < turn.adversary.eta);
        }
    }
}
