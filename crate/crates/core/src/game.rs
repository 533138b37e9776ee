//! The reproducibility game on a truncated tree: adversaries, Player II's
//! branch-walking strategy, transcript verification, supporting blocks and
//! sign selection for the maximal-ideal argument.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{distance_to_annihilator, OperatorError, OperatorMatrix};
use crate::ramsey::{split_partition, Coloring};
use crate::spaces::{pairing, CoeffVector, SpaceError, SpaceTag};
use crate::tree::{EmbeddingCheck, Node, SubtreeEmbedding, Truncation};

/// Relative tolerance for norm equalities that hold exactly in theory.
pub const EQUALITY_TOL: f64 = 1e-12;

/// Coefficient vectors sampled per equivalence check.
pub const EQUIVALENCE_SAMPLES: usize = 200;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("play depth {play} exceeds host depth {host}")]
    DepthOrder { play: u8, host: u8 },
    #[error("the game runs in S or B spaces, not {0}")]
    UnsupportedSpace(String),
    #[error("adversary vector has depth {got}, host has depth {expected}")]
    Truncation { expected: u8, got: u8 },
    #[error("invalid move: {0}")]
    InvalidMove(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn default_sign() -> f64 {
    1.0
}

/// Player I's move: a tolerance, functionals whose annihilator is `W_t`,
/// vectors whose annihilator is `G_t`, and the sign chosen after Player II
/// responds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryMove {
    pub eta: f64,
    #[serde(default)]
    pub v: Vec<CoeffVector>,
    #[serde(default)]
    pub f: Vec<CoeffVector>,
    #[serde(default = "default_sign")]
    pub sign: f64,
}

impl AdversaryMove {
    pub fn empty(eta: f64) -> Self {
        AdversaryMove { eta, v: vec![], f: vec![], sign: 1.0 }
    }
}

/// Player II's move: a finite node set with weights, `Σ λ_s μ_s = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerIIMove {
    pub nodes: Vec<Node>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl PlayerIIMove {
    pub fn single(s: Node) -> Self {
        PlayerIIMove { nodes: vec![s], lambda: vec![1.0], mu: vec![1.0] }
    }

    pub fn normalization(&self) -> f64 {
        self.lambda.iter().zip(&self.mu).map(|(l, m)| l * m).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    /// The source node `t` this turn reproduces.
    pub node: Node,
    pub adversary: AdversaryMove,
    pub response: PlayerIIMove,
    /// Distance of `b_t` to `W_t`, or the best found on a failed turn.
    pub primal_distance: f64,
    /// Distance of `b*_t` to `G_t` in the dual space.
    pub dual_distance: f64,
    pub exact: bool,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub space: SpaceTag,
    pub dual_space: SpaceTag,
    pub play_depth: u8,
    pub host_depth: u8,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<TranscriptReport>,
}

impl GameTranscript {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GameError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn succeeded(&self) -> bool {
        self.turns.iter().all(|t| !t.failed)
    }

    pub fn images(&self) -> Vec<Option<Node>> {
        self.turns.iter().map(|t| t.response.nodes.first().copied()).collect()
    }

    /// `b_t = ε_t Σ λ_s e_s` on the host truncation.
    pub fn block(&self, i: usize) -> CoeffVector {
        let turn = &self.turns[i];
        let mut b = CoeffVector::zeros(self.host_depth);
        for (s, l) in turn.response.nodes.iter().zip(&turn.response.lambda) {
            b.set(*s, b.get(*s) + turn.adversary.sign * l);
        }
        b
    }

    /// `b*_t = ε_t Σ μ_s f_s`.
    pub fn dual_block(&self, i: usize) -> CoeffVector {
        let turn = &self.turns[i];
        let mut b = CoeffVector::zeros(self.host_depth);
        for (s, m) in turn.response.nodes.iter().zip(&turn.response.mu) {
            b.set(*s, b.get(*s) + turn.adversary.sign * m);
        }
        b
    }

    /// The map `t ↦ s_t` when every turn picked a single node.
    pub fn embedding(&self) -> Option<SubtreeEmbedding> {
        let images: Option<Vec<Node>> =
            self.turns.iter().map(|t| (t.response.nodes.len() == 1).then(|| t.response.nodes[0])).collect();
        SubtreeEmbedding::new(self.play_depth, images?).ok()
    }
}

/// A source of Player I moves.
pub trait Adversary {
    /// The challenge for source node `t`, given the turns played so far.
    fn challenge(&mut self, t: Node, host_depth: u8, history: &[Turn]) -> AdversaryMove;

    /// The sign `ε_t` applied after Player II has answered.
    fn sign(&mut self, _t: Node, _response: &PlayerIIMove) -> f64 {
        1.0
    }
}

/// Always plays `V = F = ∅`.
#[derive(Debug, Clone)]
pub struct EmptyAdversary {
    pub eta: f64,
}

impl Adversary for EmptyAdversary {
    fn challenge(&mut self, _t: Node, _host_depth: u8, _history: &[Turn]) -> AdversaryMove {
        AdversaryMove::empty(self.eta)
    }
}

/// Forbids every node used so far: `V` holds their coordinate functionals
/// and `F` their unit vectors.
#[derive(Debug, Clone)]
pub struct UsedNodesAdversary {
    pub eta: f64,
}

impl Adversary for UsedNodesAdversary {
    fn challenge(&mut self, _t: Node, host_depth: u8, history: &[Turn]) -> AdversaryMove {
        let used: Vec<CoeffVector> = history
            .iter()
            .flat_map(|turn| turn.response.nodes.iter())
            .map(|&s| CoeffVector::unit(host_depth, s))
            .collect();
        AdversaryMove { eta: self.eta, v: used.clone(), f: used, sign: 1.0 }
    }
}

/// Replays recorded moves in order; missing moves are empty.
#[derive(Debug, Clone)]
pub struct ReplayAdversary {
    moves: Vec<AdversaryMove>,
    next: usize,
    sign_next: usize,
    fallback_eta: f64,
}

impl ReplayAdversary {
    pub fn new(moves: Vec<AdversaryMove>) -> Self {
        let fallback_eta = moves.first().map_or(0.1, |m| m.eta);
        ReplayAdversary { moves, next: 0, sign_next: 0, fallback_eta }
    }

    pub fn from_transcript(tr: &GameTranscript) -> Self {
        Self::new(tr.turns.iter().map(|t| t.adversary.clone()).collect())
    }

    /// Reads either a transcript or a bare list of moves.
    pub fn from_json(text: &str) -> Result<Self, GameError> {
        if let Ok(tr) = serde_json::from_str::<GameTranscript>(text) {
            return Ok(Self::from_transcript(&tr));
        }
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GameError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Adversary for ReplayAdversary {
    fn challenge(&mut self, _t: Node, _host_depth: u8, _history: &[Turn]) -> AdversaryMove {
        let mv = self.moves.get(self.next).cloned().unwrap_or_else(|| AdversaryMove::empty(self.fallback_eta));
        self.next += 1;
        mv
    }

    fn sign(&mut self, _t: Node, _response: &PlayerIIMove) -> f64 {
        let s = self.moves.get(self.sign_next).map_or(1.0, |m| m.sign);
        self.sign_next += 1;
        s
    }
}

/// Dense Gaussian functionals and vectors, fresh each turn, with fair
/// random signs.
#[derive(Debug, Clone)]
pub struct RandomAdversary {
    pub eta: f64,
    pub functionals: usize,
    pub vectors: usize,
    rng: ChaCha8Rng,
}

impl RandomAdversary {
    pub fn new(eta: f64, seed: u64) -> Self {
        Self::with_counts(eta, seed, 1, 1)
    }

    pub fn with_counts(eta: f64, seed: u64, functionals: usize, vectors: usize) -> Self {
        RandomAdversary { eta, functionals, vectors, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn gaussian(&mut self, depth: u8) -> CoeffVector {
        CoeffVector::from_fn(depth, |_| self.rng.sample(StandardNormal))
    }
}

impl Adversary for RandomAdversary {
    fn challenge(&mut self, _t: Node, host_depth: u8, _history: &[Turn]) -> AdversaryMove {
        let v = (0..self.functionals).map(|_| self.gaussian(host_depth)).collect();
        let f = (0..self.vectors).map(|_| self.gaussian(host_depth)).collect();
        AdversaryMove { eta: self.eta, v, f, sign: 1.0 }
    }

    fn sign(&mut self, _t: Node, _response: &PlayerIIMove) -> f64 {
        if self.rng.random_bool(0.5) {
            1.0
        } else {
            -1.0
        }
    }
}

fn game_spaces(space: &SpaceTag) -> Result<(SpaceTag, SpaceTag), GameError> {
    match space {
        SpaceTag::S { .. } | SpaceTag::B { .. } => Ok((space.clone(), space.dual().expect("S and B have duals"))),
        other => Err(GameError::UnsupportedSpace(other.label())),
    }
}

fn check_move(mv: &AdversaryMove, host_depth: u8) -> Result<(), GameError> {
    if !(mv.eta > 0.0) {
        return Err(GameError::InvalidMove(format!("eta must be positive, got {}", mv.eta)));
    }
    for x in mv.v.iter().chain(&mv.f) {
        if x.depth() != host_depth {
            return Err(GameError::Truncation { expected: host_depth, got: x.depth() });
        }
    }
    Ok(())
}

struct Distances {
    primal: f64,
    dual: f64,
    exact: bool,
}

fn node_distances(s: Node, mv: &AdversaryMove, host_depth: u8, space: &SpaceTag, dual: &SpaceTag) -> Result<Distances, GameError> {
    let e = CoeffVector::unit(host_depth, s);
    let p = distance_to_annihilator(&e, &mv.v, space)?;
    let d = distance_to_annihilator(&e, &mv.f, dual)?;
    Ok(Distances { primal: p.distance, dual: d.distance, exact: p.exact && d.exact })
}

/// Plays the game on `2^{≤play_depth}` inside the host truncation.
///
/// The root turn walks down the leftmost branch from the root; turn
/// `t = t̃⌢α` walks from `s_t̃⌢α` down the branch repeating `α`. The first
/// node beyond every earlier image whose two distances are below `η_t` is
/// taken with `λ = μ = 1`. A turn that runs off the host is flagged failed
/// and keeps the best node it saw so later turns can still anchor.
pub fn run_rep_game(
    adversary: &mut dyn Adversary,
    play_depth: u8,
    host_depth: u8,
    space: &SpaceTag,
) -> Result<GameTranscript, GameError> {
    if play_depth > host_depth {
        return Err(GameError::DepthOrder { play: play_depth, host: host_depth });
    }
    let (space, dual_space) = game_spaces(space)?;
    let source = Truncation::new(play_depth);
    let mut turns: Vec<Turn> = Vec::with_capacity(source.node_count());
    let mut last_image: Option<Node> = None;
    for t in source.nodes() {
        let mut mv = adversary.challenge(t, host_depth, &turns);
        check_move(&mv, host_depth)?;
        let (start, dir) = match t.predecessor() {
            None => (Some(Node::ROOT), 0),
            Some(parent) => {
                let alpha = t.last_bit().expect("non-root");
                let anchor = turns[parent.dense_index()].response.nodes.first().copied();
                (anchor.map(|a| a.child(alpha)), alpha)
            }
        };
        let mut best: Option<(Node, Distances)> = None;
        let mut chosen: Option<(Node, Distances)> = None;
        let mut cur = start.filter(|s| s.len() <= host_depth);
        while let Some(s) = cur {
            if last_image.is_none_or(|m| s > m) {
                let d = node_distances(s, &mv, host_depth, &space, &dual_space)?;
                if d.primal < mv.eta && d.dual < mv.eta {
                    chosen = Some((s, d));
                    break;
                }
                if best.as_ref().is_none_or(|(_, b)| d.primal.max(d.dual) < b.primal.max(b.dual)) {
                    best = Some((s, d));
                }
            }
            cur = (s.len() < host_depth).then(|| s.child(dir));
        }
        let failed = chosen.is_none();
        let (response, dist) = match chosen.or(best) {
            Some((s, d)) => {
                last_image = Some(s);
                (PlayerIIMove::single(s), d)
            }
            None => (
                PlayerIIMove { nodes: vec![], lambda: vec![], mu: vec![] },
                Distances { primal: f64::INFINITY, dual: f64::INFINITY, exact: false },
            ),
        };
        mv.sign = adversary.sign(t, &response);
        turns.push(Turn {
            node: t,
            adversary: mv,
            response,
            primal_distance: dist.primal,
            dual_distance: dist.dual,
            exact: dist.exact,
            failed,
        });
    }
    Ok(GameTranscript { space, dual_space, play_depth, host_depth, turns, verification: None })
}

/// Result of one of the four transcript items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub item: u8,
    pub passed: bool,
    pub detail: String,
    /// Source coefficients exhibiting a failure of (i) or (ii).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<CoeffVector>,
    /// Largest relative deviation seen in an equivalence check.
    #[serde(default)]
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptReport {
    pub constant: f64,
    pub items: Vec<ItemResult>,
    pub passed: bool,
}

fn combine(coeffs: &CoeffVector, blocks: &[CoeffVector], depth: u8) -> CoeffVector {
    let mut out = CoeffVector::zeros(depth);
    for (i, b) in blocks.iter().enumerate() {
        let a = coeffs.as_slice()[i];
        if a != 0.0 {
            out.axpy(a, b);
        }
    }
    out
}

/// Samples `‖Σ a_t b_t‖` against `‖Σ a_t e_t‖` and returns the largest
/// relative excess over `constant`, with the coefficients attaining it.
fn equivalence(
    blocks: &[CoeffVector],
    space: &SpaceTag,
    source_depth: u8,
    host_depth: u8,
    constant: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, CoeffVector), GameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::NEG_INFINITY, CoeffVector::zeros(source_depth));
    for _ in 0..samples {
        let a = CoeffVector::from_fn(source_depth, |_| rng.sample(StandardNormal));
        let lhs = space.norm(&combine(&a, blocks, host_depth))?;
        let rhs = space.norm(&a)?;
        let excess = ((lhs - constant * rhs) / rhs).max((rhs - constant * lhs) / rhs);
        if excess > worst.0 {
            worst = (excess, a);
        }
    }
    Ok(worst)
}

fn structure_failure(tr: &GameTranscript) -> Option<(String, Option<CoeffVector>)> {
    if let Some(turn) = tr.turns.iter().find(|t| t.failed) {
        return Some((format!("turn {} failed", turn.node), None));
    }
    if let Some(turn) =
        tr.turns.iter().find(|t| t.response.nodes.len() != 1 || t.response.lambda != [1.0] || t.response.mu != [1.0])
    {
        return Some((format!("turn {} is not a unit single-node block", turn.node), None));
    }
    let e = match tr.embedding() {
        Some(e) => e,
        None => return Some(("turn count does not match the played truncation".into(), None)),
    };
    let EmbeddingCheck { passed, witness, violation } = e.verify();
    if passed {
        return None;
    }
    let witness = witness.map(|(t1, t2)| {
        let mut a = CoeffVector::zeros(tr.play_depth);
        a.set(t1, 1.0);
        a.set(t2, 1.0);
        a
    });
    Some((format!("images do not form a subtree embedding ({violation:?})"), witness))
}

/// Checks items (i)–(iv) of a transcript: equivalence of `(b_t)` to the
/// unit vectors in `X` and of `(b*_t)` in the dual, then both distance
/// bounds, re-solved, against `min(η_t, eta_overall)`.
pub fn verify_transcript(tr: &GameTranscript, constant: f64, eta_overall: Option<f64>) -> Result<TranscriptReport, GameError> {
    let n = tr.turns.len();
    let mut items = Vec::with_capacity(4);
    match structure_failure(tr) {
        Some((detail, witness)) => {
            for item in [1, 2] {
                items.push(ItemResult { item, passed: false, detail: detail.clone(), witness: witness.clone(), deviation: f64::INFINITY });
            }
        }
        None => {
            let primal: Vec<CoeffVector> = (0..n).map(|i| tr.block(i)).collect();
            let dual: Vec<CoeffVector> = (0..n).map(|i| tr.dual_block(i)).collect();
            for (item, blocks, space) in [(1u8, &primal, &tr.space), (2u8, &dual, &tr.dual_space)] {
                let (dev, a) = equivalence(blocks, space, tr.play_depth, tr.host_depth, constant, EQUIVALENCE_SAMPLES, item as u64)?;
                let passed = dev <= EQUALITY_TOL;
                items.push(ItemResult {
                    item,
                    passed,
                    detail: format!("{} sampled coefficient vectors in {}", EQUIVALENCE_SAMPLES, space.label()),
                    witness: (!passed).then_some(a),
                    deviation: dev.max(0.0),
                });
            }
        }
    }
    for (item, dual) in [(3u8, false), (4u8, true)] {
        let mut worst: Option<(Node, f64, f64)> = None;
        let mut passed = true;
        for (i, turn) in tr.turns.iter().enumerate() {
            let eta = eta_overall.map_or(turn.adversary.eta, |e| e.min(turn.adversary.eta));
            let dist = if turn.response.nodes.is_empty() {
                f64::INFINITY
            } else if dual {
                distance_to_annihilator(&tr.dual_block(i), &turn.adversary.f, &tr.dual_space)?.distance
            } else {
                distance_to_annihilator(&tr.block(i), &turn.adversary.v, &tr.space)?.distance
            };
            if !(dist < eta) {
                passed = false;
            }
            if worst.is_none_or(|(_, d, e)| dist / e > d / e) {
                worst = Some((turn.node, dist, eta));
            }
        }
        let detail = match worst {
            Some((t, d, e)) => format!("largest distance {d:.3e} (threshold {e}) at turn {t}"),
            None => "no turns".into(),
        };
        items.push(ItemResult { item, passed, detail, witness: None, deviation: 0.0 });
    }
    let passed = items.iter().all(|i| i.passed);
    Ok(TranscriptReport { constant, items, passed })
}

/// A finite block `(E, λ, μ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub nodes: Vec<Node>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Block {
    pub fn unit(nodes: Vec<Node>) -> Self {
        let m = nodes.len();
        Block { nodes, lambda: vec![1.0; m], mu: vec![1.0 / m as f64; m] }
    }

    /// `Σ λ_j μ_j`, the pairing `⟨x, y⟩` for any signs.
    pub fn weight(&self) -> f64 {
        self.lambda.iter().zip(&self.mu).map(|(l, m)| l * m).sum()
    }
}

/// One supporting pair `x_k = Σ ε_j λ_j e_j`, `y_k = Σ ε_j μ_j f_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportingBlock {
    pub block: Block,
    pub signs: Vec<f64>,
    pub x: CoeffVector,
    pub y: CoeffVector,
    pub pairing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportingBlocks {
    /// 1 for `N₁`, 2 for `N₂`.
    pub side: u8,
    pub embedding: SubtreeEmbedding,
    pub blocks: Vec<SupportingBlock>,
    /// Sampled `sup ‖Σ a_k x_k‖ / ‖Σ a_k e_k‖`.
    pub domination: f64,
    pub dual_domination: f64,
    pub pairings_ok: bool,
    pub weights_ok: bool,
    pub all_in_side: bool,
}

impl SupportingBlocks {
    /// Items (iii), (iv) and membership in the chosen side; domination is
    /// reported as a measured constant.
    pub fn valid(&self) -> bool {
        self.pairings_ok && self.weights_ok && self.all_in_side
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOptions {
    /// Depth of the subtree requested from the partition split.
    pub target_depth: u8,
    /// Embedded nodes per block, consecutive in standard order.
    pub block_size: usize,
    /// Adversary signs per embedded node; missing entries are `+1`.
    pub signs: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl BlockOptions {
    pub fn new(target_depth: u8) -> Self {
        BlockOptions { target_depth, block_size: 1, signs: vec![], samples: 50, seed: 0 }
    }
}

fn domination(vectors: &[CoeffVector], space: &SpaceTag, depth: u8, samples: usize, seed: u64) -> Result<f64, GameError> {
    let k = vectors.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let a: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let mut lhs = CoeffVector::zeros(depth);
        let mut rhs = CoeffVector::zeros(depth);
        let src = Truncation::new(depth);
        for ((x, &ak), t) in vectors.iter().zip(&a).zip(src.nodes()) {
            lhs.axpy(ak, x);
            rhs.set(t, ak);
        }
        let r = space.norm(&rhs)?;
        if r > 0.0 {
            worst = worst.max(space.norm(&lhs)? / r);
        }
    }
    Ok(worst)
}

/// Splits the partition, embeds a subtree in the returned side and emits
/// the blocks built on its images.
pub fn build_supporting_blocks(
    partition: &Coloring,
    space: &SpaceTag,
    dual_space: &SpaceTag,
    opts: &BlockOptions,
) -> Result<SupportingBlocks, GameError> {
    assert!(opts.block_size >= 1, "blocks need at least one node");
    let depth = partition.depth();
    let split = split_partition(partition, opts.target_depth.min(depth));
    let embedding = split.result.embedding;
    let images = embedding.images().to_vec();
    let mut blocks = Vec::new();
    for (b, chunk) in images.chunks(opts.block_size).enumerate() {
        let block = Block::unit(chunk.to_vec());
        let signs: Vec<f64> =
            (0..chunk.len()).map(|j| opts.signs.get(b * opts.block_size + j).copied().unwrap_or(1.0)).collect();
        let mut x = CoeffVector::zeros(depth);
        let mut y = CoeffVector::zeros(depth);
        for (j, &s) in chunk.iter().enumerate() {
            x.set(s, signs[j] * block.lambda[j]);
            y.set(s, signs[j] * block.mu[j]);
        }
        let pairing = pairing(&x, &y)?;
        blocks.push(SupportingBlock { block, signs, x, y, pairing });
    }
    let xs: Vec<CoeffVector> = blocks.iter().map(|b| b.x.clone()).collect();
    let ys: Vec<CoeffVector> = blocks.iter().map(|b| b.y.clone()).collect();
    let dom = domination(&xs, space, depth, opts.samples, opts.seed)?;
    let dual_dom = domination(&ys, dual_space, depth, opts.samples, opts.seed ^ 1)?;
    let pairings_ok = blocks.iter().all(|b| b.pairing == 1.0);
    let weights_ok = blocks.iter().all(|b| b.block.lambda.iter().zip(&b.block.mu).all(|(l, m)| l * m >= 0.0));
    let all_in_side = images.iter().all(|&s| partition.color(s) == split.side);
    Ok(SupportingBlocks {
        side: split.side,
        embedding,
        blocks,
        domination: dom,
        dual_domination: dual_dom,
        pairings_ok,
        weights_ok,
        all_in_side,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    AtLeastAverage,
    AtMostAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignSelection {
    pub signs: Vec<f64>,
    /// `⟨T x, y⟩` for the chosen signs.
    pub value: f64,
    /// The mean of `⟨T x, y⟩` over all sign patterns.
    pub average: f64,
}

fn block_matrix(t: &OperatorMatrix, block: &Block) -> Result<Vec<Vec<f64>>, GameError> {
    let dom = t.domain();
    let cod = t.codomain();
    for &s in &block.nodes {
        if !dom.contains(s) || !cod.contains(s) {
            return Err(GameError::InvalidMove(format!("block node {s} outside the operator's truncations")));
        }
    }
    let n = block.nodes.len();
    Ok((0..n)
        .map(|j| (0..n).map(|l| block.lambda[j] * block.mu[l] * t.get(block.nodes[l], block.nodes[j])).collect())
        .collect())
}

/// Fixes the signs one at a time, each time keeping the conditional mean
/// of `⟨T x, y⟩` on the requested side of the full average.
pub fn select_signs(t: &OperatorMatrix, block: &Block, mode: SignMode) -> Result<SignSelection, GameError> {
    let m = block_matrix(t, block)?;
    let n = m.len();
    let average: f64 = (0..n).map(|j| m[j][j]).sum();
    let mut signs: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let cross: f64 = (0..i).map(|l| signs[l] * (m[i][l] + m[l][i])).sum();
        let up = match mode {
            SignMode::AtLeastAverage => cross >= 0.0,
            SignMode::AtMostAverage => cross <= 0.0,
        };
        signs.push(if up { 1.0 } else { -1.0 });
    }
    let value = (0..n).map(|j| (0..n).map(|l| signs[j] * signs[l] * m[j][l]).sum::<f64>()).sum();
    Ok(SignSelection { signs, value, average })
}

/// The block inequality checked for one `(x_k, y_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockInequality {
    pub nodes: Vec<Node>,
    pub signs: Vec<f64>,
    pub value: f64,
    pub average: f64,
    /// `η/(1+η)·⟨x, y⟩`.
    pub scaled_pairing: f64,
    /// `η/(1+η)` on side 2, `η` on side 1.
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxIdealReport {
    pub eta: f64,
    pub threshold: f64,
    pub n1: usize,
    pub n2: usize,
    pub side: u8,
    /// Source depth of the subtree used.
    pub depth: u8,
    pub blocks: Vec<BlockInequality>,
    pub blocks_valid: bool,
    pub satisfied: bool,
}

/// Walks the maximal-ideal dichotomy on a finite operator: splits the
/// truncation by `⟨T e_n, f_n⟩ ≤ η/(1+η)`, builds blocks on the side found
/// and evaluates the matching inequality with derandomized signs.
pub fn check_maxideal_hypotheses(
    t: &OperatorMatrix,
    eta: f64,
    space: &SpaceTag,
    dual_space: &SpaceTag,
    block_size: usize,
) -> Result<MaxIdealReport, GameError> {
    if !t.is_square() {
        return Err(GameError::InvalidMove("operator must be square".into()));
    }
    let depth = t.domain().depth;
    let threshold = eta / (1.0 + eta);
    let partition = Coloring::from_fn(depth, |n| if t.get(n, n) <= threshold { 1 } else { 2 });
    let n1 = partition.class(1).len();
    let n2 = partition.class(2).len();
    let mut opts = BlockOptions::new(depth);
    opts.block_size = block_size;
    opts.samples = 10;
    let sb = build_supporting_blocks(&partition, space, dual_space, &opts)?;
    let mode = if sb.side == 2 { SignMode::AtLeastAverage } else { SignMode::AtMostAverage };
    let mut blocks = Vec::with_capacity(sb.blocks.len());
    for b in &sb.blocks {
        let sel = select_signs(t, &b.block, mode)?;
        let scaled_pairing = threshold * b.block.weight();
        let (bound, satisfied) = if sb.side == 2 {
            (threshold, sel.value >= scaled_pairing - EQUALITY_TOL && scaled_pairing >= threshold - EQUALITY_TOL)
        } else {
            (eta, sel.value <= scaled_pairing + EQUALITY_TOL && scaled_pairing <= eta + EQUALITY_TOL)
        };
        blocks.push(BlockInequality {
            nodes: b.block.nodes.clone(),
            signs: sel.signs,
            value: sel.value,
            average: sel.average,
            scaled_pairing,
            bound,
            satisfied,
        });
    }
    let satisfied = !blocks.is_empty() && blocks.iter().all(|b| b.satisfied);
    Ok(MaxIdealReport {
        eta,
        threshold,
        n1,
        n2,
        side: sb.side,
        depth: sb.embedding.source_depth(),
        blocks_valid: sb.valid(),
        blocks,
        satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_norm::BaseNorm;
    use nalgebra::DMatrix;

    fn s1() -> SpaceTag {
        SpaceTag::S { base: BaseNorm::l1() }
    }

    #[test]
    fn empty_adversary_gives_identity() {
        let tr = run_rep_game(&mut EmptyAdversary { eta: 0.1 }, 2, 4, &s1()).unwrap();
        assert_eq!(tr.turns.len(), 7);
        assert!(tr.succeeded());
        assert_eq!(tr.embedding().unwrap(), SubtreeEmbedding::identity(2));
        assert!(tr.turns.iter().all(|t| t.primal_distance == 0.0 && t.dual_distance == 0.0));
        let rep = verify_transcript(&tr, 1.0, None).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn used_nodes_are_avoided_exactly() {
        let tr = run_rep_game(&mut UsedNodesAdversary { eta: 0.01 }, 2, 5, &s1()).unwrap();
        assert!(tr.succeeded());
        assert!(tr.embedding().unwrap().verify().passed);
    }

    #[test]
    fn fabricated_order_violation_fails_item_one() {
        let mut tr = run_rep_game(&mut EmptyAdversary { eta: 0.1 }, 1, 4, &s1()).unwrap();
        // Swap the two children's images deeper so 1 ↦ 10 precedes 0 ↦ 000.
        tr.turns[1].response = PlayerIIMove::single(Node::from_bits(&[0, 0, 0]).unwrap());
        tr.turns[2].response = PlayerIIMove::single(Node::from_bits(&[1, 0]).unwrap());
        let rep = verify_transcript(&tr, 1.0, None).unwrap();
        assert!(!rep.items[0].passed);
        assert!(rep.items[0].witness.is_some());
    }

    #[test]
    fn transcript_round_trips() {
        let tr = run_rep_game(&mut RandomAdversary::new(0.2, 3), 1, 4, &s1()).unwrap();
        let json = serde_json::to_string(&tr).unwrap();
        let back: GameTranscript = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tr);
        let replay = run_rep_game(&mut ReplayAdversary::from_transcript(&tr), 1, 4, &s1()).unwrap();
        assert_eq!(replay.images(), tr.images());
    }

    #[test]
    fn signs_on_diagonal_match_average() {
        let d = CoeffVector::from_fn(2, |t| 1.0 + t.dense_index() as f64);
        let t = OperatorMatrix::diagonal(&d, s1());
        let block = Block::unit(Truncation::new(2).nodes().take(4).collect());
        for mode in [SignMode::AtLeastAverage, SignMode::AtMostAverage] {
            let sel = select_signs(&t, &block, mode).unwrap();
            assert_eq!(sel.value, sel.average);
        }
    }

    #[test]
    fn off_diagonal_pair() {
        let mut m = DMatrix::zeros(3, 3);
        m[(2, 1)] = 1.0;
        let t = OperatorMatrix::square(1, s1(), m).unwrap();
        let block = Block { nodes: vec![Node::new(1, 0), Node::new(1, 1)], lambda: vec![1.0; 2], mu: vec![1.0; 2] };
        assert_eq!(select_signs(&t, &block, SignMode::AtLeastAverage).unwrap().value, 1.0);
        assert_eq!(select_signs(&t, &block, SignMode::AtMostAverage).unwrap().value, -1.0);
    }

    #[test]
    fn supporting_blocks_on_constant_partition() {
        let part = Coloring::constant(3, 1);
        let sb = build_supporting_blocks(&part, &s1(), &SpaceTag::D { base: BaseNorm::l1() }, &BlockOptions::new(3)).unwrap();
        assert_eq!(sb.side, 1);
        assert_eq!(sb.embedding, SubtreeEmbedding::identity(3));
        assert!(sb.valid());
        assert!((sb.domination - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maxideal_identity_and_zero() {
        let space = s1();
        let dual = SpaceTag::D { base: BaseNorm::l1() };
        let id = OperatorMatrix::identity(3, space.clone());
        let r = check_maxideal_hypotheses(&id, 0.5, &space, &dual, 2).unwrap();
        assert_eq!(r.side, 2);
        assert!(r.satisfied);
        let zero = OperatorMatrix::zeros(3, 3, space.clone());
        let r = check_maxideal_hypotheses(&zero, 0.5, &space, &dual, 2).unwrap();
        assert_eq!(r.side, 1);
        assert!(r.satisfied && r.blocks.iter().all(|b| b.value == 0.0));
    }
}
