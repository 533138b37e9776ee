//! Self-check suites: the ten desk-scale acceptance criteria, grouped by
//! module, each cross-checking an engine against a slower reference.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::base_norm::BaseNorm;
use crate::factorization::{diagonalize_d, FactorOptions};
use crate::game::{
    check_maxideal_hypotheses, run_rep_game, select_signs, verify_transcript, Block, RandomAdversary, SignMode,
};
use crate::operators::{build_b_q, OperatorMatrix};
use crate::ramsey::{find_monochromatic_subtree, Coloring};
use crate::spaces::{
    dual_norm_b, dual_norm_d, dual_norm_d_full_lp, norm_s, norm_s_enumerated, pairing, CoeffVector, SpaceTag,
};
use crate::tree::{antichain_count, enumerate_branches, for_each_antichain, Node, SubtreeEmbedding, Truncation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Norms,
    Operators,
    Ramsey,
    Game,
    Factorization,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Norms => &[1, 2, 4, 5],
            Suite::Operators => &[3],
            Suite::Ramsey => &[6],
            Suite::Game => &[7, 8, 10],
            Suite::Factorization => &[9],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Number of individual comparisons made.
    pub checks: usize,
    pub seconds: f64,
    pub limit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub passed: bool,
}

struct Outcome {
    ok: bool,
    detail: String,
    checks: usize,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, depth: u8) -> CoeffVector {
    CoeffVector::from_fn(depth, |_| rng.sample(StandardNormal))
}

/// Sparse random vector: each coordinate is zero with probability 1/3.
fn sparse_gaussian(rng: &mut ChaCha8Rng, depth: u8) -> CoeffVector {
    CoeffVector::from_fn(depth, |_| if rng.random_bool(1.0 / 3.0) { 0.0 } else { rng.sample(StandardNormal) })
}

fn norm_equivalence(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut checks = 0;
    for base in [BaseNorm::l1(), BaseNorm::lp(1.5).expect("valid exponent"), BaseNorm::l2(), BaseNorm::linf()] {
        for _ in 0..500 {
            let x = sparse_gaussian(&mut rng, 3);
            let dp = norm_s(&x, &base).expect("depth 3");
            let en = norm_s_enumerated(&x, &base, 3).expect("depth 3").value;
            worst = worst.max(rel_diff(dp, en));
            checks += 1;
        }
    }
    Outcome { ok: worst <= 1e-12, detail: format!("max relative difference {worst:.2e}"), checks }
}

fn antichain_census(_seed: u64) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for n in 0..=4u8 {
        let mut count: u128 = 0;
        for_each_antichain(n, 4, |_| count += 1).expect("depth ≤ 4");
        ok &= count == antichain_count(n);
        detail.push(format!("A({n})={count}"));
    }
    ok &= antichain_count(4) == 458_330;
    Outcome { ok, detail: detail.join(" "), checks: 5 }
}

fn embedding_operators(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let host = Truncation::new(4);
    let mut worst_b = 0.0f64;
    let mut worst_q = 0.0f64;
    let mut qb_exact = true;
    let mut checks = 0;
    for _ in 0..20 {
        let k = rng.random_range(1..=3u8);
        let e = SubtreeEmbedding::random(k, host.depth, &mut rng).expect("k ≤ 4");
        for base in [BaseNorm::l1(), BaseNorm::l2(), BaseNorm::linf()] {
            for space in [SpaceTag::S { base: base.clone() }, SpaceTag::B { base: base.clone() }] {
                let (b, q) = build_b_q(&e, host, space.clone()).expect("verified embedding");
                qb_exact &= q.compose(&b).expect("composable").distance_to_identity() == 0.0;
                for _ in 0..1000 {
                    let x = gaussian(&mut rng, k);
                    let bx = b.apply(&x).expect("dims");
                    worst_b = worst_b.max(rel_diff(space.norm(&bx).unwrap(), space.norm(&x).unwrap()));
                    let y = gaussian(&mut rng, host.depth);
                    let qy = space.norm(&q.apply(&y).expect("dims")).unwrap();
                    let ny = space.norm(&y).unwrap();
                    worst_q = worst_q.max((qy - ny) / ny);
                    checks += 2;
                }
            }
        }
    }
    Outcome {
        ok: qb_exact && worst_b <= 1e-12 && worst_q <= 1e-12,
        detail: format!("QB=I exact: {qb_exact}; max |‖Bx‖−‖x‖|/‖x‖ {worst_b:.2e}; max (‖Qy‖−‖y‖)/‖y‖ {worst_q:.2e}"),
        checks,
    }
}

fn duality(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_witness = 0.0f64;
    let mut holder_ok = true;
    let mut checks = 0;
    for i in 0..200 {
        let depth = 1 + (i % 3) as u8;
        let xs = sparse_gaussian(&mut rng, depth);
        let cg = dual_norm_d(&xs, &BaseNorm::l1()).expect("l1 dual");
        let lp = dual_norm_d_full_lp(&xs, 3).expect("depth ≤ 3");
        worst = worst.max((cg.value - lp).abs());
        if let Some(w) = &cg.maximizer {
            let nw = norm_s(w, &BaseNorm::l1()).unwrap();
            let pw = pairing(w, &xs).unwrap();
            worst_witness = worst_witness.max((pw - cg.value).abs()).max(nw - 1.0);
        } else if cg.value != 0.0 {
            worst_witness = f64::INFINITY;
        }
        for _ in 0..3 {
            let x = gaussian(&mut rng, depth);
            holder_ok &= pairing(&x, &xs).unwrap().abs() <= norm_s(&x, &BaseNorm::l1()).unwrap() * cg.value * (1.0 + 1e-12);
        }
        checks += 5;
    }
    Outcome {
        ok: worst <= 1e-9 && worst_witness <= 1e-9 && holder_ok,
        detail: format!("max |CG − LP| {worst:.2e}; witness defect {worst_witness:.2e}; pairing bound held: {holder_ok}"),
        checks,
    }
}

fn branch_sums(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_branch = f64::NEG_INFINITY;
    let mut worst_antichain = f64::NEG_INFINITY;
    let branches: Vec<Vec<Node>> = enumerate_branches(4).collect();
    let mut checks = 0;
    for i in 0..200 {
        let base = [BaseNorm::l1(), BaseNorm::l2(), BaseNorm::linf()][i % 3].clone();
        let xs = gaussian(&mut rng, 4);
        let d = dual_norm_d(&xs, &base).expect("dual norm").value;
        let unit = xs.scaled(1.0 / d);
        for br in &branches {
            let s: f64 = br.iter().map(|&t| unit.get(t).abs()).sum();
            worst_branch = worst_branch.max(s);
            checks += 1;
        }
        let y = gaussian(&mut rng, 4);
        let b = dual_norm_b(&y, &base).expect("dual norm").value;
        let unit = y.scaled(1.0 / b);
        let mut local = 0.0f64;
        for_each_antichain(4, 4, |a| local = local.max(a.iter().map(|&t| unit.get(t).abs()).sum())).unwrap();
        worst_antichain = worst_antichain.max(local);
        checks += 1;
    }
    Outcome {
        ok: worst_branch <= 1.0 + 1e-9 && worst_antichain <= 1.0 + 1e-9,
        detail: format!("max branch sum {worst_branch:.12}; max antichain sum {worst_antichain:.12}"),
        checks,
    }
}

fn ramsey(seed: u64) -> Outcome {
    let mut verified = true;
    let mut monotone = true;
    let mut histogram = std::collections::BTreeMap::new();
    for i in 0..100 {
        let c = Coloring::random(10, seed.wrapping_mul(1000).wrapping_add(i));
        let mut prev = 0u8;
        for host in [6u8, 8, 10] {
            let sub = c.restrict(host);
            let r = find_monochromatic_subtree(&sub, host);
            verified &= r.embedding.verify().passed && r.embedding.images().iter().all(|&s| sub.color(s) == r.color);
            monotone &= r.depth >= prev;
            prev = r.depth;
        }
        *histogram.entry(prev).or_insert(0) += 1;
    }
    let even = Coloring::from_fn(8, |t| if t.len() % 2 == 0 { 1 } else { 2 });
    let r = find_monochromatic_subtree(&even, 8);
    let even_ok = r.depth >= 2 && r.embedding.verify().passed;
    Outcome {
        ok: verified && monotone && even_ok,
        detail: format!(
            "verified {verified}; monotone {monotone}; depth at host 10 {histogram:?}; even-length depth {}",
            r.depth
        ),
        checks: 301,
    }
}

fn game(seed: u64) -> Outcome {
    let space = SpaceTag::S { base: BaseNorm::l1() };
    let mut ok = true;
    let mut failed_turns = 0;
    let mut failed_items = 0;
    for g in 0..20 {
        let mut adv = RandomAdversary::new(0.1, seed.wrapping_mul(100).wrapping_add(g));
        let tr = run_rep_game(&mut adv, 2, 10, &space).expect("valid game");
        failed_turns += tr.turns.iter().filter(|t| t.failed).count();
        let rep = verify_transcript(&tr, 1.0, Some(0.1)).expect("verification runs");
        failed_items += rep.items.iter().filter(|i| !i.passed).count();
        ok &= tr.succeeded() && rep.passed;
    }
    Outcome { ok, detail: format!("20 games; failed turns {failed_turns}; failed items {failed_items}"), checks: 20 * 4 }
}

fn sign_selection(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = SpaceTag::D { base: BaseNorm::l1() };
    let nodes: Vec<Node> = Truncation::new(3).nodes().collect();
    let mut ok = true;
    let mut worst_side = f64::NEG_INFINITY;
    let mut worst_exhaustive = 0.0f64;
    for i in 0..200 {
        let t = OperatorMatrix::square(3, space.clone(), DMatrix::from_fn(15, 15, |_, _| rng.sample(StandardNormal)))
            .expect("15x15");
        let size = rng.random_range(1..=8usize);
        let mut pool = nodes.clone();
        let mut chosen = Vec::new();
        for _ in 0..size {
            chosen.push(pool.swap_remove(rng.random_range(0..pool.len())));
        }
        let lambda: Vec<f64> = (0..size).map(|_| rng.random_range(0.1..2.0)).collect();
        let mu: Vec<f64> = (0..size).map(|_| rng.random_range(0.1..2.0)).collect();
        let block = Block { nodes: chosen, lambda, mu };
        let mode = if i % 2 == 0 { SignMode::AtLeastAverage } else { SignMode::AtMostAverage };
        let sel = select_signs(&t, &block, mode).expect("block inside truncation");
        let excess = match mode {
            SignMode::AtLeastAverage => sel.average - sel.value,
            SignMode::AtMostAverage => sel.value - sel.average,
        };
        worst_side = worst_side.max(excess);
        ok &= excess <= 1e-12;
        if size <= 4 {
            let value = |signs: &[f64]| -> f64 {
                let mut x = CoeffVector::zeros(3);
                let mut y = CoeffVector::zeros(3);
                for (j, &s) in block.nodes.iter().enumerate() {
                    x.set(s, signs[j] * block.lambda[j]);
                    y.set(s, signs[j] * block.mu[j]);
                }
                pairing(&t.apply(&x).unwrap(), &y).unwrap()
            };
            let mut total = 0.0;
            for pattern in 0..(1u32 << size) {
                let signs: Vec<f64> = (0..size).map(|j| if pattern >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
                total += value(&signs);
            }
            let avg = total / (1u32 << size) as f64;
            let d = (avg - sel.average).abs().max((value(&sel.signs) - sel.value).abs());
            worst_exhaustive = worst_exhaustive.max(d);
            ok &= d <= 1e-12;
        }
    }
    Outcome {
        ok,
        detail: format!("worst shortfall {worst_side:.2e}; worst exhaustive mismatch {worst_exhaustive:.2e}"),
        checks: 200,
    }
}

/// `D + εN` on `D^{ℓ¹}`: diagonal uniform in `[δ, 2]`, zero-diagonal noise
/// uniform in `[−1, 1]`, `ε = δ/(100·node count)`.
pub fn perturbed_diagonal(depth: u8, delta: f64, seed: u64) -> OperatorMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Truncation::new(depth).node_count();
    let eps = delta / (100.0 * n as f64);
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.random_range(delta..=2.0)
        } else {
            eps * rng.random_range(-1.0..=1.0)
        }
    });
    OperatorMatrix::square(depth, SpaceTag::D { base: BaseNorm::l1() }, m).expect("square")
}

fn factorisation(seed: u64) -> Outcome {
    let delta = 0.5;
    let eta = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = CoeffVector::from_fn(4, |_| rng.random_range(delta..=2.0));
    let diag = OperatorMatrix::diagonal(&d, SpaceTag::D { base: BaseNorm::l1() });
    let cert = diagonalize_d(&diag, &FactorOptions::new(delta, eta, 2)).expect("diagonal certificate");
    let diag_ok = cert.residual <= 1e-10 && cert.norm_product_bound <= 1.0 / delta + 1e-6;
    let mut medians = Vec::new();
    let mut worst_host5 = 0.0f64;
    let mut product_ok = true;
    for host in [4u8, 5, 6] {
        let mut res = Vec::new();
        for i in 0..20 {
            let t = perturbed_diagonal(host, delta, seed.wrapping_mul(100).wrapping_add(i));
            let c = diagonalize_d(&t, &FactorOptions::new(delta, eta, 2)).expect("perturbed certificate");
            if !c.exhausted && c.neumann.invertible {
                product_ok &= c.norm_product_bound <= (1.0 + eta) / delta;
            }
            if host == 5 {
                worst_host5 = worst_host5.max(if c.exhausted { f64::INFINITY } else { c.residual });
            }
            res.push(c.residual);
        }
        res.sort_by(f64::total_cmp);
        medians.push((res[9] + res[10]) / 2.0);
    }
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    Outcome {
        ok: diag_ok && worst_host5 <= 0.05 && monotone && product_ok,
        detail: format!(
            "diagonal residual {:.2e}, product {:.6}; host-5 worst residual {worst_host5:.2e}; medians {}; products within bound {product_ok}",
            cert.residual,
            cert.norm_product_bound,
            medians.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>().join(" ≥ ")
        ),
        checks: 61,
    }
}

fn maxideal(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = SpaceTag::D { base: BaseNorm::l1() };
    let dual = SpaceTag::S { base: BaseNorm::l1() };
    let n = Truncation::new(6).node_count();
    let mut ok = true;
    let mut sides = [0usize; 2];
    for _ in 0..50 {
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                rng.random_range(0.0..1.0)
            } else {
                0.1 * rng.sample::<f64, _>(StandardNormal)
            }
        });
        let t = OperatorMatrix::square(6, space.clone(), m).expect("square");
        let r = check_maxideal_hypotheses(&t, 0.5, &space, &dual, 2).expect("report");
        ok &= (r.side == 1 || r.side == 2) && r.satisfied && r.blocks_valid;
        sides[(r.side - 1) as usize] += 1;
    }
    Outcome { ok, detail: format!("side N1 {} times, N2 {} times", sides[0], sides[1]), checks: 50 }
}

struct CriterionDef {
    name: &'static str,
    limit: f64,
    run: fn(u64) -> Outcome,
}

fn criterion_def(id: u8) -> CriterionDef {
    match id {
        1 => CriterionDef { name: "norm engine equivalence", limit: 30.0, run: norm_equivalence },
        2 => CriterionDef { name: "antichain census", limit: 10.0, run: antichain_census },
        3 => CriterionDef { name: "embedding operators", limit: 60.0, run: embedding_operators },
        4 => CriterionDef { name: "duality", limit: 60.0, run: duality },
        5 => CriterionDef { name: "branch and antichain sums", limit: 30.0, run: branch_sums },
        6 => CriterionDef { name: "ramsey subtrees", limit: 120.0, run: ramsey },
        7 => CriterionDef { name: "reproducibility game", limit: 120.0, run: game },
        8 => CriterionDef { name: "sign derandomization", limit: 30.0, run: sign_selection },
        9 => CriterionDef { name: "factorisation", limit: 300.0, run: factorisation },
        10 => CriterionDef { name: "maximal ideal dichotomy", limit: 60.0, run: maxideal },
        _ => panic!("criteria are numbered 1 to 10"),
    }
}

/// Runs one criterion; it passes when its checks hold and it finishes
/// within its time limit.
pub fn run_criterion(id: u8, seed: u64) -> CriterionResult {
    let s = criterion_def(id);
    let start = Instant::now();
    let out = (s.run)(seed.wrapping_mul(0x9e37_79b9).wrapping_add(id as u64));
    let seconds = start.elapsed().as_secs_f64();
    CriterionResult {
        id,
        name: s.name.to_string(),
        passed: out.ok && seconds <= s.limit,
        detail: out.detail,
        checks: out.checks,
        seconds,
        limit_seconds: s.limit,
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> SuiteReport {
    let criteria: Vec<CriterionResult> = suite.criteria().iter().map(|&id| run_criterion(id, seed)).collect();
    let passed = criteria.iter().all(|c| c.passed);
    SuiteReport { suite, seed, criteria, passed }
}
