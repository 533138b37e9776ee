//! Factorisation of the identity through an operator with large diagonal on
//! a truncation of `D^E`: node selection, subtree splicing and assembly of
//! `A`, `B` with `ATB ≈ I`.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::base_norm::BaseNorm;
use crate::operators::{op_norm_exact_tiny, op_norm_lower, OperatorError, OperatorMatrix, EXACT_NORM_MAX_DEPTH};
use crate::spaces::{norm_s, CoeffVector, SpaceError, SpaceTag};
use crate::tree::{Node, SubtreeEmbedding, Truncation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("operator must map a truncation to itself")]
    NotSquare,
    #[error("operator must act on a D space, got {0}")]
    WrongSpace(String),
    #[error("diagonal entry {value} at node {node} is below delta = {delta}")]
    DiagonalBelowDelta { node: Node, value: f64, delta: f64 },
    #[error("zero diagonal entry at node {0}")]
    ZeroDiagonal(Node),
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("subtree family is not pairwise incomparable at {0} and {1}")]
    Comparable(Node, Node),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn d_base(t: &OperatorMatrix) -> Result<BaseNorm, FactorError> {
    match t.space() {
        SpaceTag::D { base } => Ok(base.clone()),
        other => Err(FactorError::WrongSpace(other.label())),
    }
}

/// `ΣT` with `Σ = diag(sign ⟨e_s, T f_s⟩)`, so that the diagonal becomes
/// `|⟨e_s, T f_s⟩|`. Returns the signs for undoing.
pub fn sign_normalize(t: &OperatorMatrix) -> Result<(OperatorMatrix, Vec<f64>), FactorError> {
    if !t.is_square() {
        return Err(FactorError::NotSquare);
    }
    let nodes: Vec<Node> = t.domain().nodes().collect();
    let mut signs = Vec::with_capacity(nodes.len());
    for &s in &nodes {
        let d = t.get(s, s);
        if d == 0.0 {
            return Err(FactorError::ZeroDiagonal(s));
        }
        signs.push(if d < 0.0 { -1.0 } else { 1.0 });
    }
    let mut m = t.matrix().clone();
    for (i, &sg) in signs.iter().enumerate() {
        if sg < 0.0 {
            m.row_mut(i).neg_mut();
        }
    }
    let depth = t.domain().depth;
    Ok((OperatorMatrix::square(depth, t.space().clone(), m)?, signs))
}

/// `η₀ = 0.9 · 3δη/(1+η)`, the largest admissible value with 10% slack.
pub fn default_eta0(delta: f64, eta: f64) -> f64 {
    0.9 * 3.0 * delta * eta / (1.0 + eta)
}

/// Whether `η₀/(3δ) < 1` and `1/(1 − η₀/(3δ)) ≤ 1 + η`.
pub fn eta0_admissible(eta0: f64, delta: f64, eta: f64) -> bool {
    let r = eta0 / (3.0 * delta);
    eta0 > 0.0 && r < 1.0 && 1.0 / (1.0 - r) <= 1.0 + eta
}

/// The per-turn target `η₀ 4^{−𝒪(t)}`.
pub fn turn_threshold(eta0: f64, t: Node) -> f64 {
    eta0 * 0.25f64.powi(t.order_index().min(i32::MAX as u64) as i32)
}

/// A cone `{s ⊒ root}` of the host that may be moved down to `max_depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Region {
    pub root: Node,
    pub max_depth: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpliceReport {
    pub roots: Vec<Node>,
    /// `sup_{‖x‖≤1} |⟨b*, T(x|_S)⟩|` for the returned family.
    pub bound: f64,
    /// The bound before the first round and after each round.
    pub history: Vec<f64>,
    pub target: f64,
    pub reached_target: bool,
    /// Target missed with every contributing cone already at its depth limit.
    pub shallow: bool,
}

fn cone_mask(c: &CoeffVector, roots: &[Node]) -> CoeffVector {
    let mut out = CoeffVector::zeros(c.depth());
    for &r in roots {
        for s in r.cone(c.depth()) {
            out.set(s, c.get(s));
        }
    }
    out
}

/// The coupling `Tᵀb*`: the functional `x ↦ ⟨b*, T x⟩` in coordinates.
fn coupling(t: &OperatorMatrix, functional: &CoeffVector) -> CoeffVector {
    let v = t.matrix().tr_mul(&nalgebra::DVector::from_column_slice(functional.as_slice()));
    CoeffVector::from_dense(t.domain().depth, v.as_slice().to_vec())
}

/// Greedy descent: each round moves every cone root to the child cone that
/// lowers the coupling bound most, stopping at `target` or when nothing
/// improves. The bound is the `S^E` norm of the restricted coupling, its
/// exact dual value.
pub fn splice_subtrees(
    t: &OperatorMatrix,
    functional: &CoeffVector,
    regions: &[Region],
    target: f64,
    rounds: usize,
) -> Result<SpliceReport, FactorError> {
    let base = d_base(t)?;
    let host = t.domain().depth;
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if a.root.is_comparable(b.root) {
                return Err(FactorError::Comparable(a.root, b.root));
            }
        }
    }
    let c = coupling(t, functional);
    let mut roots: Vec<Node> = regions.iter().map(|r| r.root).collect();
    let eval = |roots: &[Node]| norm_s(&cone_mask(&c, roots), &base);
    let mut bound = eval(&roots)?;
    let mut history = vec![bound];
    for _ in 0..rounds {
        if bound <= target {
            break;
        }
        let mut moved = false;
        for i in 0..roots.len() {
            let r = roots[i];
            if r.len() >= regions[i].max_depth.min(host) {
                continue;
            }
            let mut best = (bound, r);
            for alpha in [0, 1] {
                let child = r.child(alpha);
                roots[i] = child;
                let b = eval(&roots)?;
                if b < best.0 {
                    best = (b, child);
                }
            }
            roots[i] = best.1;
            if best.1 != r {
                bound = best.0;
                moved = true;
            }
        }
        history.push(bound);
        if !moved {
            break;
        }
    }
    let reached_target = bound <= target;
    let shallow = !reached_target
        && roots.iter().zip(regions).all(|(&r, reg)| {
            r.len() >= reg.max_depth.min(host) || eval(std::slice::from_ref(&r)).map_or(true, |v| v == 0.0)
        });
    Ok(SpliceReport { roots, bound, history, target, reached_target, shallow })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PickReport {
    pub node: Node,
    /// `Σ_u |⟨e_s, T b_u⟩|` over the prior blocks.
    pub value: f64,
    pub met: bool,
    pub visited: usize,
}

/// Walks down from `region.root`, always into the child with the smaller
/// coupling to the priors, and returns the first node after `after` in the
/// standard order with `Σ_u |⟨e_s, T f_{s_u}⟩| ≤ threshold`; otherwise the
/// best node seen, flagged. `None` when no admissible node exists.
pub fn pick_small_node(
    t: &OperatorMatrix,
    priors: &[Node],
    region: Region,
    threshold: f64,
    after: Option<Node>,
) -> Option<PickReport> {
    let host = t.domain().depth;
    let limit = region.max_depth.min(host);
    let value = |s: Node| priors.iter().map(|&u| t.get(s, u).abs()).sum::<f64>();
    let mut best: Option<(Node, f64)> = None;
    let mut visited = 0;
    let mut cur = region.root;
    loop {
        if cur.len() > limit {
            break;
        }
        if after.is_none_or(|a| cur > a) {
            visited += 1;
            let v = value(cur);
            if v <= threshold {
                return Some(PickReport { node: cur, value: v, met: true, visited });
            }
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((cur, v));
            }
        }
        if cur.len() == limit {
            break;
        }
        let (l, r) = (cur.child(0), cur.child(1));
        cur = if value(r) < value(l) { r } else { l };
    }
    best.map(|(node, value)| PickReport { node, value, met: false, visited })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnLog {
    pub turn: Node,
    pub node: Node,
    /// `Σ_{u<t} |⟨b*_t, T b_u⟩|`.
    pub off_diagonal: f64,
    pub threshold: f64,
    pub met: bool,
    pub splice: Option<SpliceReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inversion {
    Neumann,
    Direct,
    /// `UTJ` was not inverted; `A = QU`.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeumannReport {
    /// Probed (lower) estimate of `‖UTJ − I_Z‖`.
    pub probe: f64,
    /// `Σ |(UTJ − I)_{ij}|`, an upper bound on the same norm.
    pub certified: f64,
    /// `η₀/(3δ)`.
    pub target: f64,
    pub within_target: bool,
    pub method: Inversion,
    pub order: usize,
    pub invertible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorisationCertificate {
    pub a: OperatorMatrix,
    pub b: OperatorMatrix,
    /// `‖ATB − I‖` on the output truncation.
    pub residual: f64,
    pub residual_exact: bool,
    /// Upper bound on `‖A‖‖B‖`; see `norm_product_certified`.
    pub norm_product_bound: f64,
    pub norm_product_certified: bool,
    /// Probed lower estimate of `‖A‖‖B‖`.
    pub norm_product_probe: f64,
    pub delta: f64,
    pub eta: f64,
    pub eta0: f64,
    pub host_depth: u8,
    pub requested_depth: u8,
    pub output_depth: u8,
    pub exhausted: bool,
    pub embedding: SubtreeEmbedding,
    pub signs: Vec<f64>,
    pub neumann: NeumannReport,
    pub initial_splice: SpliceReport,
    pub selection_log: Vec<TurnLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorOptions {
    pub delta: f64,
    pub eta: f64,
    /// Defaults to [`default_eta0`].
    pub eta0: Option<f64>,
    pub output_depth: u8,
    /// Splicing rounds per turn; defaults to the host depth.
    pub splice_rounds: Option<usize>,
    pub neumann_order: usize,
    pub probe_trials: usize,
    pub seed: u64,
}

impl FactorOptions {
    pub fn new(delta: f64, eta: f64, output_depth: u8) -> Self {
        FactorOptions {
            delta,
            eta,
            eta0: None,
            output_depth,
            splice_rounds: None,
            neumann_order: 2,
            probe_trials: 40,
            seed: 0,
        }
    }
}

fn probe_norm(m: &OperatorMatrix, trials: usize, seed: u64) -> Result<(f64, bool), FactorError> {
    if m.domain().depth <= EXACT_NORM_MAX_DEPTH {
        if let Ok(r) = op_norm_exact_tiny(m) {
            return Ok((r.value, true));
        }
    }
    Ok((op_norm_lower(m, trials, seed)?.value, false))
}

struct Selection {
    images: Vec<Node>,
    depth: u8,
    exhausted: bool,
    initial: SpliceReport,
    log: Vec<TurnLog>,
}

fn select_nodes(t: &OperatorMatrix, k: u8, eta0: f64, rounds: usize) -> Result<Selection, FactorError> {
    let host = t.domain().depth;
    // a node of source level L must leave k − L levels below it
    let limit = |level: u8| host - (k - level);
    let unit = |s: Node| CoeffVector::unit(host, s);
    let mut images = vec![Node::ROOT];
    // open slots: (parent source node, direction) -> cone
    let mut slots: Vec<((Node, u8), Region)> = Vec::new();
    let mut initial = SpliceReport {
        roots: vec![],
        bound: 0.0,
        history: vec![0.0],
        target: eta0 / 4.0,
        reached_target: true,
        shallow: false,
    };
    if k >= 1 {
        for alpha in [0, 1] {
            slots.push(((Node::ROOT, alpha), Region { root: Node::ROOT.child(alpha), max_depth: limit(1) }));
        }
        let regions: Vec<Region> = slots.iter().map(|s| s.1).collect();
        initial = splice_subtrees(t, &unit(Node::ROOT), &regions, eta0 / 4.0, rounds)?;
        for (slot, &r) in slots.iter_mut().zip(&initial.roots) {
            slot.1.root = r;
        }
    }
    let mut log = vec![TurnLog {
        turn: Node::ROOT,
        node: Node::ROOT,
        off_diagonal: 0.0,
        threshold: turn_threshold(eta0, Node::ROOT),
        met: true,
        splice: Some(initial.clone()),
    }];
    let source = Truncation::new(k);
    let mut done_depth = 0u8;
    for turn in source.nodes().skip(1) {
        let parent = turn.predecessor().expect("non-root");
        let alpha = turn.last_bit().expect("non-root");
        let Some(pos) = slots.iter().position(|s| s.0 == (parent, alpha)) else {
            return Ok(Selection { images, depth: done_depth, exhausted: true, initial, log });
        };
        let region = slots.remove(pos).1;
        let threshold = turn_threshold(eta0, turn);
        let after = images.last().copied();
        let Some(pick) = pick_small_node(t, &images, region, threshold, after) else {
            return Ok(Selection { images, depth: done_depth, exhausted: true, initial, log });
        };
        let s = pick.node;
        images.push(s);
        let level = turn.len();
        if level < k {
            for beta in [0, 1] {
                slots.push(((turn, beta), Region { root: s.child(beta), max_depth: limit(level + 1) }));
            }
        }
        let splice = if slots.is_empty() {
            None
        } else {
            let regions: Vec<Region> = slots.iter().map(|s| s.1).collect();
            let rep = splice_subtrees(t, &unit(s), &regions, threshold, rounds)?;
            for (slot, &r) in slots.iter_mut().zip(&rep.roots) {
                slot.1.root = r;
            }
            Some(rep)
        };
        log.push(TurnLog { turn, node: s, off_diagonal: pick.value, threshold, met: pick.met, splice });
        if turn.bits() == (1u32 << level) - 1 {
            done_depth = level;
        }
    }
    Ok(Selection { images, depth: k, exhausted: false, initial, log })
}

/// Runs the diagonalisation on `T` and assembles `A = Q·(UTJ)^{-1}·U` and
/// `B` from the selected nodes.
pub fn diagonalize_d(t: &OperatorMatrix, opts: &FactorOptions) -> Result<FactorisationCertificate, FactorError> {
    let base = d_base(t)?;
    if !t.is_square() {
        return Err(FactorError::NotSquare);
    }
    let (delta, eta) = (opts.delta, opts.eta);
    if !(delta > 0.0) || !(eta > 0.0) {
        return Err(FactorError::Parameters(format!("delta and eta must be positive, got {delta} and {eta}")));
    }
    let eta0 = opts.eta0.unwrap_or_else(|| default_eta0(delta, eta));
    if !eta0_admissible(eta0, delta, eta) {
        return Err(FactorError::Parameters(format!("eta0 = {eta0} violates eta0/(3 delta) < 1 and 1/(1 - eta0/(3 delta)) <= 1 + eta")));
    }
    let host = t.domain().depth;
    if opts.output_depth > host {
        return Err(FactorError::Parameters(format!("output depth {} exceeds host depth {host}", opts.output_depth)));
    }
    for s in t.domain().nodes() {
        let v = t.get(s, s).abs();
        if v < delta {
            return Err(FactorError::DiagonalBelowDelta { node: s, value: t.get(s, s), delta });
        }
    }
    let (tn, signs) = sign_normalize(t)?;
    let rounds = opts.splice_rounds.unwrap_or(host as usize);
    let sel = select_nodes(&tn, opts.output_depth, eta0, rounds)?;
    let k = sel.depth;
    let space = SpaceTag::D { base };
    let source = Truncation::new(k);
    let n_src = source.node_count();
    let n_host = t.domain().node_count();
    let images: Vec<Node> = sel.images[..n_src].to_vec();
    let embedding = SubtreeEmbedding::new(k, images.clone()).expect("one image per source node");

    // UTJ in source coordinates: ⟨e_{s_i}, T f_{s_j}⟩ / ⟨e_{s_i}, T f_{s_i}⟩
    let m = DMatrix::from_fn(n_src, n_src, |i, j| tn.get(images[i], images[j]) / tn.get(images[i], images[i]));
    let id = DMatrix::<f64>::identity(n_src, n_src);
    let defect = &m - &id;
    let defect_op = OperatorMatrix::square(k, space.clone(), defect.clone())?;
    let (probe, _) = probe_norm(&defect_op, opts.probe_trials, opts.seed)?;
    let certified: f64 = defect.iter().map(|x| x.abs()).sum();
    let target = eta0 / (3.0 * delta);
    let (inverse, method, invertible) = if probe < 0.5 {
        let mut acc = id.clone();
        let mut power = id.clone();
        let neg = -&defect;
        for _ in 0..opts.neumann_order {
            power = &power * &neg;
            acc += &power;
        }
        (acc, Inversion::Neumann, true)
    } else {
        match m.clone().try_inverse() {
            Some(inv) => (inv, Inversion::Direct, probe < 1.0),
            None => (id.clone(), Inversion::None, false),
        }
    };
    let neumann = NeumannReport {
        probe,
        certified,
        target,
        within_target: probe <= target,
        method,
        order: opts.neumann_order,
        invertible,
    };

    // A = Q·N·U with U x = Σ_t x_{s_t}/T_{s_t s_t} f_{s_t}, then undo the signs
    let mut a = DMatrix::zeros(n_src, n_host);
    for (j, &s) in images.iter().enumerate() {
        let col = s.dense_index();
        let scale = signs[col] / tn.get(s, s);
        for i in 0..n_src {
            a[(i, col)] = inverse[(i, j)] * scale;
        }
    }
    let mut b = DMatrix::zeros(n_host, n_src);
    for (j, &s) in images.iter().enumerate() {
        b[(s.dense_index(), j)] = 1.0;
    }
    let a = OperatorMatrix::new(host, k, space.clone(), a)?;
    let b = OperatorMatrix::new(k, host, space.clone(), b)?;
    let atb = OperatorMatrix::square(k, space.clone(), (a.matrix() * t.matrix()) * b.matrix())?;
    let residual_op = OperatorMatrix::square(k, space.clone(), atb.matrix() - &id)?;
    let (residual, residual_exact) = if residual_op.matrix().iter().all(|&x| x == 0.0) {
        (0.0, true)
    } else {
        probe_norm(&residual_op, opts.probe_trials, opts.seed ^ 0x5eed)?
    };

    // ‖B‖ = ‖Q‖ = 1, ‖U‖ ≤ 1/min diag on Z
    let min_diag = images.iter().map(|&s| tn.get(s, s)).fold(f64::INFINITY, f64::min);
    let inverse_bound = match method {
        Inversion::Neumann => Some((0..=opts.neumann_order).map(|i| certified.powi(i as i32)).sum::<f64>()),
        Inversion::Direct if certified < 1.0 => Some(1.0 / (1.0 - certified)),
        Inversion::None => Some(1.0),
        Inversion::Direct => None,
    };
    let a_probe = op_norm_lower(&a, opts.probe_trials, opts.seed ^ 0xa)?.value;
    let b_probe = op_norm_lower(&b, opts.probe_trials, opts.seed ^ 0xb)?.value;
    let norm_product_probe = a_probe * b_probe;
    let (norm_product_bound, norm_product_certified) = match inverse_bound {
        Some(nb) => (nb / min_diag, true),
        None => (norm_product_probe, false),
    };
    Ok(FactorisationCertificate {
        a,
        b,
        residual,
        residual_exact,
        norm_product_bound,
        norm_product_certified,
        norm_product_probe,
        delta,
        eta,
        eta0,
        host_depth: host,
        requested_depth: opts.output_depth,
        output_depth: k,
        exhausted: sel.exhausted,
        embedding,
        signs,
        neumann,
        initial_splice: sel.initial,
        selection_log: sel.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d1() -> SpaceTag {
        SpaceTag::D { base: BaseNorm::l1() }
    }

    fn perturbed(depth: u8, delta: f64, seed: u64) -> OperatorMatrix {
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
        OperatorMatrix::square(depth, d1(), m).unwrap()
    }

    #[test]
    fn sign_normalize_flips_rows() {
        let neg = OperatorMatrix::square(2, d1(), -DMatrix::identity(7, 7)).unwrap();
        let (tn, signs) = sign_normalize(&neg).unwrap();
        assert_eq!(tn, OperatorMatrix::identity(2, d1()));
        assert!(signs.iter().all(|&s| s == -1.0));
        let t = perturbed(2, 0.5, 1);
        assert_eq!(sign_normalize(&t).unwrap().0, t);
    }

    #[test]
    fn scaled_identity_is_exact() {
        let t = OperatorMatrix::square(3, d1(), DMatrix::identity(15, 15) * 2.0).unwrap();
        let cert = diagonalize_d(&t, &FactorOptions::new(1.0, 0.5, 3)).unwrap();
        assert_eq!(cert.residual, 0.0);
        assert_eq!(cert.embedding, SubtreeEmbedding::identity(3));
        assert_eq!(cert.norm_product_bound, 0.5);
        assert_eq!(cert.b, OperatorMatrix::identity(3, d1()));
    }

    #[test]
    fn diagonal_below_delta_is_rejected() {
        let t = OperatorMatrix::square(1, d1(), DMatrix::identity(3, 3) * 0.25).unwrap();
        assert!(matches!(diagonalize_d(&t, &FactorOptions::new(0.5, 0.5, 1)), Err(FactorError::DiagonalBelowDelta { .. })));
    }

    #[test]
    fn eta0_default_is_admissible() {
        for (d, e) in [(0.5, 0.5), (1.0, 0.01), (2.0, 3.0)] {
            assert!(eta0_admissible(default_eta0(d, e), d, e));
            assert!(!eta0_admissible(3.0 * d * e / (1.0 + e) * 1.01, d, e));
        }
    }

    #[test]
    fn splice_diagonal_is_free() {
        let t = perturbed(4, 0.5, 2);
        let diag = OperatorMatrix::diagonal(&CoeffVector::from_fn(4, |s| t.get(s, s)), d1());
        let regions = [Region { root: Node::new(1, 0), max_depth: 4 }, Region { root: Node::new(1, 1), max_depth: 4 }];
        let rep = splice_subtrees(&diag, &CoeffVector::unit(4, Node::ROOT), &regions, 0.0, 3).unwrap();
        assert_eq!(rep.bound, 0.0);
        assert_eq!(rep.roots, vec![Node::new(1, 0), Node::new(1, 1)]);
    }

    #[test]
    fn splice_bound_never_increases() {
        let t = perturbed(5, 0.5, 3);
        let regions = [Region { root: Node::new(1, 0), max_depth: 5 }, Region { root: Node::new(1, 1), max_depth: 5 }];
        let rep = splice_subtrees(&t, &CoeffVector::unit(5, Node::ROOT), &regions, 0.0, 3).unwrap();
        assert!(rep.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(rep.history.last() < rep.history.first());
    }

    #[test]
    fn pick_avoids_priors_on_diagonal() {
        let t = OperatorMatrix::identity(4, d1());
        let r = pick_small_node(&t, &[Node::ROOT], Region { root: Node::new(1, 0), max_depth: 4 }, 0.0, None).unwrap();
        assert_eq!((r.node, r.value, r.met), (Node::new(1, 0), 0.0, true));
    }

    #[test]
    fn perturbed_operator_certificate() {
        let t = perturbed(5, 0.5, 7);
        let cert = diagonalize_d(&t, &FactorOptions::new(0.5, 0.5, 2)).unwrap();
        assert!(!cert.exhausted);
        assert!(cert.embedding.verify().passed);
        assert!(cert.residual <= 0.05, "{}", cert.residual);
        assert!(cert.norm_product_bound <= 1.5 / 0.5);
        for (log, &s) in cert.selection_log.iter().zip(cert.embedding.images()) {
            assert_eq!(log.node, s);
        }
    }

    #[test]
    fn signs_do_not_change_residual() {
        let mut t = perturbed(4, 0.5, 9);
        let mut m = t.matrix().clone();
        for i in [0, 3, 5] {
            m.row_mut(i).neg_mut();
        }
        t = OperatorMatrix::square(4, d1(), m).unwrap();
        let (tn, _) = sign_normalize(&t).unwrap();
        let opts = FactorOptions::new(0.5, 0.5, 2);
        let c1 = diagonalize_d(&t, &opts).unwrap();
        let c2 = diagonalize_d(&tn, &opts).unwrap();
        assert_eq!(c1.residual, c2.residual);
    }
}
