//! Monochromatic linearly order-isomorphic subtrees inside a two-coloured
//! truncation, and the partition-splitting wrappers built on them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::tree::{relate, Node, SubtreeEmbedding, Truncation};

/// Default cap on candidate extensions per backtracking run.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// A colouring of `2^{≤n}` by the colours 1 and 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    truncation: Truncation,
    colors: Vec<u8>,
}

impl Coloring {
    pub fn constant(depth: u8, color: u8) -> Self {
        Self::from_fn(depth, |_| color)
    }

    pub fn from_fn(depth: u8, f: impl Fn(Node) -> u8) -> Self {
        let truncation = Truncation::new(depth);
        let colors = truncation
            .nodes()
            .map(|t| {
                let c = f(t);
                assert!(c == 1 || c == 2, "colours are 1 and 2");
                c
            })
            .collect();
        Coloring { truncation, colors }
    }

    /// Independent fair coin per node.
    pub fn random(depth: u8, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truncation = Truncation::new(depth);
        let colors = (0..truncation.node_count()).map(|_| if rng.random_bool(0.5) { 1 } else { 2 }).collect();
        Coloring { truncation, colors }
    }

    pub fn depth(&self) -> u8 {
        self.truncation.depth
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn color(&self, t: Node) -> u8 {
        self.colors[t.dense_index()]
    }

    /// The same colouring on a smaller truncation.
    pub fn restrict(&self, depth: u8) -> Coloring {
        let depth = depth.min(self.depth());
        Coloring::from_fn(depth, |t| self.color(t))
    }

    pub fn class(&self, color: u8) -> Vec<Node> {
        self.truncation.nodes().filter(|&t| self.color(t) == color).collect()
    }
}

impl Serialize for Coloring {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let entries: BTreeMap<Node, u8> = self.truncation.nodes().map(|t| (t, self.color(t))).collect();
        let entries: Vec<(String, u8)> = entries.into_iter().map(|(t, c)| (t.to_bit_string(), c)).collect();
        struct Entries(Vec<(String, u8)>);
        impl Serialize for Entries {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut m = serializer.serialize_map(Some(self.0.len()))?;
                for (k, v) in &self.0 {
                    m.serialize_entry(k, v)?;
                }
                m.end()
            }
        }
        let mut m = serializer.serialize_map(Some(2))?;
        m.serialize_entry("depth", &self.depth())?;
        m.serialize_entry("entries", &Entries(entries))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for Coloring {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            depth: u8,
            entries: BTreeMap<String, u8>,
        }
        let r = Repr::deserialize(deserializer)?;
        if r.depth > 24 {
            return Err(D::Error::custom("colouring depth too large"));
        }
        let truncation = Truncation::new(r.depth);
        let mut colors = vec![0u8; truncation.node_count()];
        for (k, c) in r.entries {
            let t: Node = k.parse().map_err(D::Error::custom)?;
            let i = truncation.index_of(t).map_err(D::Error::custom)?;
            if c != 1 && c != 2 {
                return Err(D::Error::custom(format!("colour {c} at {k:?}; colours are 1 and 2")));
            }
            colors[i] = c;
        }
        if let Some(i) = colors.iter().position(|&c| c == 0) {
            return Err(D::Error::custom(format!("node {} has no colour", Node::from_dense_index(i))));
        }
        Ok(Coloring { truncation, colors })
    }
}

/// Outcome of [`find_monochromatic_subtree`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonochromaticSubtree {
    pub color: u8,
    pub embedding: SubtreeEmbedding,
    /// Depth actually achieved (the source depth of `embedding`).
    pub depth: u8,
    pub target_depth: u8,
    pub reached_target: bool,
    pub budget_exhausted: bool,
    pub extensions: u64,
}

/// `M(w)`: the height (levels) of the tallest ⊑-embedded tree of colour
/// `color` rooted at `w`, ignoring the linear order. Zero off the class.
fn height_table(c: &Coloring, color: u8) -> Vec<u8> {
    let depth = c.depth();
    let n = c.truncation.node_count();
    let mut m = vec![0u8; n];
    // best[v] = max M over the cone of v; split[v] = best two-sided split below v
    let mut best = vec![0u8; n];
    let mut split = vec![0u8; n];
    for i in (0..n).rev() {
        let t = Node::from_dense_index(i);
        if t.len() < depth {
            let (l, r) = (t.child(0).dense_index(), t.child(1).dense_index());
            split[i] = best[l].min(best[r]).max(split[l]).max(split[r]);
            m[i] = if c.color(t) == color { 1 + split[i] } else { 0 };
            best[i] = m[i].max(best[l]).max(best[r]);
        } else {
            m[i] = u8::from(c.color(t) == color);
            best[i] = m[i];
        }
    }
    m
}

struct Search<'a> {
    coloring: &'a Coloring,
    color: u8,
    k: u8,
    height: Vec<u8>,
    images: Vec<Node>,
    used: u64,
    budget: u64,
    exhausted: bool,
}

impl Search<'_> {
    fn dfs(&mut self, idx: usize) -> bool {
        let total = Truncation::new(self.k).node_count();
        if idx == total {
            return true;
        }
        let t = Node::from_dense_index(idx);
        let need = self.k - t.len() + 1;
        let host_depth = self.coloring.depth();
        let last = self.images.last().copied();
        let anchor = match t.predecessor() {
            Some(parent) => self.images[parent.dense_index()],
            None => Node::ROOT,
        };
        let candidates: Vec<Node> = anchor
            .cone(host_depth)
            .filter(|&w| t.is_root() || w != anchor)
            .filter(|&w| last.is_none_or(|l| w > l))
            .filter(|&w| self.coloring.color(w) == self.color && self.height[w.dense_index()] >= need)
            .collect();
        for w in candidates {
            self.used += 1;
            if self.used > self.budget {
                self.exhausted = true;
                return false;
            }
            let consistent =
                (0..idx).all(|j| relate(Node::from_dense_index(j), t) == relate(self.images[j], w));
            if !consistent {
                continue;
            }
            self.images.push(w);
            if self.dfs(idx + 1) {
                return true;
            }
            self.images.pop();
            if self.exhausted {
                return false;
            }
        }
        false
    }
}

/// Embeddings sending every source level `ℓ` to a single host level `h_ℓ`
/// with `h_0 < h_1 < … < h_k`. Such maps preserve the linear order
/// automatically, so only the tree-local conditions remain: the image of `t`
/// has colour `color` and at least two valid candidates for its children on
/// the next host level inside its cone. Sequences are tried in
/// lexicographic order and the two leftmost valid children are taken.
pub fn find_level_uniform(c: &Coloring, color: u8, k: u8) -> Option<SubtreeEmbedding> {
    let n = c.depth();
    if k > n {
        return None;
    }
    let mut levels: Vec<u8> = (0..=k).collect();
    loop {
        if let Some(e) = level_uniform_for(c, color, &levels) {
            return Some(e);
        }
        // next strictly increasing sequence in lexicographic order
        let len = levels.len();
        let i = (0..len).rev().find(|&i| levels[i] < n - (len - 1 - i) as u8)?;
        levels[i] += 1;
        for j in i + 1..len {
            levels[j] = levels[j - 1] + 1;
        }
    }
}

fn level_uniform_for(c: &Coloring, color: u8, levels: &[u8]) -> Option<SubtreeEmbedding> {
    let k = levels.len() - 1;
    // valid[ℓ][b]: node (levels[ℓ], b) can host a source node of level ℓ
    let mut valid: Vec<Vec<bool>> = vec![Vec::new(); k + 1];
    valid[k] = (0..1u32 << levels[k]).map(|b| c.color(Node::new(levels[k], b)) == color).collect();
    for l in (0..k).rev() {
        let shift = levels[l + 1] - levels[l];
        valid[l] = (0..1u32 << levels[l])
            .map(|b| {
                c.color(Node::new(levels[l], b)) == color
                    && (0..1u32 << shift).filter(|&s| valid[l + 1][((b << shift) | s) as usize]).nth(1).is_some()
            })
            .collect();
        if !valid[l].iter().any(|&v| v) {
            return None;
        }
    }
    let root = valid[0].iter().position(|&v| v)?;
    let mut images = vec![Node::new(levels[0], root as u32)];
    for l in 0..k {
        let shift = levels[l + 1] - levels[l];
        let start = images.len() - (1 << l);
        let parents: Vec<Node> = images[start..].to_vec();
        for p in parents {
            let mut kids = (0..1u32 << shift)
                .map(|s| (p.bits() << shift) | s)
                .filter(|&b| valid[l + 1][b as usize])
                .map(|b| Node::new(levels[l + 1], b));
            let left = kids.next()?;
            let right = kids.next()?;
            images.push(left);
            images.push(right);
        }
    }
    Some(SubtreeEmbedding::new(k as u8, images).expect("complete image list"))
}

/// Searches for a depth-`k` embedding into colour class `color`; returns the
/// embedding if found, the extensions used, and whether the budget ran out.
fn search(c: &Coloring, color: u8, k: u8, height: &[u8], budget: u64) -> (Option<SubtreeEmbedding>, u64, bool) {
    if height.iter().all(|&h| h < k + 1) {
        return (None, 0, false);
    }
    let mut s = Search {
        coloring: c,
        color,
        k,
        height: height.to_vec(),
        images: Vec::new(),
        used: 0,
        budget,
        exhausted: false,
    };
    let found = s.dfs(0);
    let emb = found.then(|| SubtreeEmbedding::new(k, s.images.clone()).expect("complete image list"));
    (emb, s.used, s.exhausted)
}

/// Finds a verified embedding of `2^{≤k}` into one colour class.
///
/// Level-uniform embeddings are searched exhaustively first. Deeper targets
/// are then attacked by backtracking over source nodes in standard order,
/// run once per host level cap `m = d..=n` with a fixed budget each, colour
/// 1 before colour 2. Every search made on a smaller host is repeated on a
/// larger one, so the achieved depth never decreases with the host depth.
/// Returns the deepest embedding found.
pub fn find_monochromatic_subtree(c: &Coloring, k: u8) -> MonochromaticSubtree {
    find_monochromatic_subtree_with_budget(c, k, DEFAULT_BUDGET)
}

/// As [`find_monochromatic_subtree`], with `budget` candidate extensions per
/// backtracking run.
pub fn find_monochromatic_subtree_with_budget(c: &Coloring, k: u8, budget: u64) -> MonochromaticSubtree {
    let n = c.depth();
    let k = k.min(n);
    let mut best = MonochromaticSubtree {
        color: c.color(Node::ROOT),
        embedding: SubtreeEmbedding::new(0, vec![Node::ROOT]).expect("single node"),
        depth: 0,
        target_depth: k,
        reached_target: k == 0,
        budget_exhausted: false,
        extensions: 0,
    };
    'uniform: for d in 1..=k {
        for color in [1u8, 2] {
            if let Some(e) = find_level_uniform(c, color, d) {
                best.color = color;
                best.embedding = e;
                best.depth = d;
                continue 'uniform;
            }
        }
        break;
    }
    let restricted: Vec<(Coloring, [Vec<u8>; 2])> = (0..=n)
        .map(|m| {
            let r = c.restrict(m);
            let h = [height_table(&r, 1), height_table(&r, 2)];
            (r, h)
        })
        .collect();
    'deeper: for d in best.depth + 1..=k {
        for color in [1u8, 2] {
            for (r, heights) in &restricted[d as usize..] {
                let (emb, used, exhausted) = search(r, color, d, &heights[color as usize - 1], budget);
                best.extensions += used;
                best.budget_exhausted |= exhausted;
                if let Some(e) = emb {
                    best.color = color;
                    best.embedding = e;
                    best.depth = d;
                    continue 'deeper;
                }
            }
        }
        break;
    }
    best.reached_target = best.depth == k;
    best
}

/// Which side of a two-set partition of the truncation holds the subtree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSplit {
    /// 1 for `N₁`, 2 for `N₂`.
    pub side: u8,
    pub result: MonochromaticSubtree,
}

/// Splits a partition `N₁ ∪ N₂` (given as a colouring) and returns the side
/// carrying a linearly order-isomorphic subtree.
pub fn split_partition(partition: &Coloring, k: u8) -> PartitionSplit {
    let result = find_monochromatic_subtree(partition, k);
    PartitionSplit { side: result.color, result }
}

/// Outcome of [`split_index_family`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSplit {
    /// Indices (1-based) whose slice has a depth-`k` subtree in colour 1.
    pub k_set: Vec<usize>,
    /// True when the returned side is `k_set`, false for its complement.
    pub chose_k_set: bool,
    /// Members of the returned side with their embeddings.
    pub members: Vec<(usize, SubtreeEmbedding)>,
    /// Members of the returned side without a depth-`k` subtree in the
    /// side's colour.
    pub degenerate: Vec<usize>,
}

/// Splits a family of colourings indexed by `1..=K`: `𝒦` collects the
/// slices with a depth-`k` colour-1 subtree, its complement is served by
/// colour 2, and the side with more usable members is returned (`𝒦` on ties).
pub fn split_index_family(slices: &[Coloring], k: u8) -> IndexSplit {
    assert!(slices.len() >= 2, "index families need K ≥ 2");
    let mut k_set = Vec::new();
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let mut outside_bad = Vec::new();
    for (i, c) in slices.iter().enumerate() {
        let idx = i + 1;
        let heights = [height_table(c, 1), height_table(c, 2)];
        let kk = k.min(c.depth());
        let ok = kk == k;
        match search(c, 1, kk, &heights[0], DEFAULT_BUDGET).0.filter(|_| ok) {
            Some(e) => {
                k_set.push(idx);
                inside.push((idx, e));
            }
            None => match search(c, 2, kk, &heights[1], DEFAULT_BUDGET).0.filter(|_| ok) {
                Some(e) => outside.push((idx, e)),
                None => outside_bad.push(idx),
            },
        }
    }
    if inside.len() >= outside.len() {
        IndexSplit { k_set, chose_k_set: true, members: inside, degenerate: vec![] }
    } else {
        IndexSplit { k_set, chose_k_set: false, members: outside, degenerate: outside_bad }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(c: &Coloring, r: &MonochromaticSubtree) {
        assert!(r.embedding.verify().passed, "{:?}", r.embedding.verify());
        assert_eq!(r.embedding.source_depth(), r.depth);
        assert!(r.embedding.images().iter().all(|&s| c.color(s) == r.color));
    }

    #[test]
    fn constant_colouring_gives_identity() {
        let c = Coloring::constant(4, 1);
        let r = find_monochromatic_subtree(&c, 4);
        assert_eq!((r.color, r.depth, r.reached_target), (1, 4, true));
        assert_eq!(r.embedding, SubtreeEmbedding::identity(4));
    }

    #[test]
    fn even_levels() {
        let c = Coloring::from_fn(8, |t| if t.len() % 2 == 0 { 1 } else { 2 });
        let r = find_monochromatic_subtree(&c, 2);
        assert!(r.reached_target);
        assert_eq!(r.color, 1);
        check(&c, &r);
    }

    #[test]
    fn first_bit_colouring() {
        for n in 2..=6u8 {
            let c = Coloring::from_fn(n, |t| if t.is_root() || t.bit(0) == 0 { 1 } else { 2 });
            let r = find_monochromatic_subtree(&c, n - 1);
            assert!(r.reached_target, "n = {n}");
            check(&c, &r);
        }
    }

    #[test]
    fn height_table_ignores_linear_order() {
        let c = Coloring::constant(3, 2);
        assert_eq!(height_table(&c, 2)[0], 4);
        assert_eq!(height_table(&c, 1)[0], 0);
        // a single path of colour 1 has height 1 everywhere
        let p = Coloring::from_fn(3, |t| if t.bits() == 0 { 1 } else { 2 });
        assert!(height_table(&p, 1).iter().all(|&h| h <= 1));
    }

    #[test]
    fn random_colourings_are_monotone_in_host_depth() {
        for seed in 0..5 {
            let c = Coloring::random(8, seed);
            let mut prev = 0;
            for host in [4u8, 6, 8] {
                let r = find_monochromatic_subtree(&c.restrict(host), host);
                check(&c.restrict(host), &r);
                assert!(r.depth >= prev, "seed {seed}: {} < {prev}", r.depth);
                prev = r.depth;
            }
        }
    }

    #[test]
    fn index_family_splits() {
        let all = vec![Coloring::constant(3, 1); 4];
        let s = split_index_family(&all, 2);
        assert_eq!(s.k_set, vec![1, 2, 3, 4]);
        assert!(s.chose_k_set && s.members.len() == 4);

        let alt: Vec<_> = (0..5).map(|i| Coloring::constant(3, 1 + (i % 2) as u8)).collect();
        let s = split_index_family(&alt, 2);
        assert_eq!(s.k_set, vec![1, 3, 5]);
        assert!(s.chose_k_set);
        for (i, e) in &s.members {
            assert!(e.verify().passed);
            assert!(e.images().iter().all(|&t| alt[i - 1].color(t) == 1));
        }

        // slice 1 cannot host depth 2 in either colour
        let stripes = Coloring::from_fn(2, |t| 1 + (t.len() % 2));
        let s = split_index_family(&[stripes, Coloring::constant(2, 2)], 2);
        assert!(!s.chose_k_set);
        assert_eq!(s.members.len(), 1);
        assert_eq!(s.members[0].0, 2);
    }

    #[test]
    fn colouring_json() {
        let c = Coloring::from_fn(1, |t| if t.is_root() { 2 } else { 1 });
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(j, r#"{"depth":1,"entries":{"":2,"0":1,"1":1}}"#);
        assert_eq!(serde_json::from_str::<Coloring>(&j).unwrap(), c);
        assert!(serde_json::from_str::<Coloring>(r#"{"depth":1,"entries":{"":1}}"#).is_err());
    }
}
