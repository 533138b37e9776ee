//! Combinatorics of the rooted dyadic tree and its finite truncations.
//!
//! A [`Node`] is a finite 0/1 word. Words are ordered by the prefix relation
//! `⊑` and by the *standard linear order*: shorter words first, words of equal
//! length from left to right. The standard order enumerates a [`Truncation`]
//! bijectively onto `1..=node_count`, and every dense vector in this crate is
//! laid out in that order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Longest word a [`Node`] can hold.
pub const MAX_NODE_LEN: u8 = 32;

/// Default cap on the depth for which all antichains are listed explicitly.
pub const DEFAULT_CENSUS_CAP: u8 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("enumeration of depth {depth} exceeds the cap {cap}")]
    EnumerationTooLarge { depth: u8, cap: u8 },
    #[error("node length {0} exceeds the supported maximum of 32")]
    TooLong(usize),
    #[error("invalid bit string {0:?}")]
    InvalidBits(String),
    #[error("node {node} is outside the truncation of depth {depth}")]
    OutsideTruncation { node: Node, depth: u8 },
    #[error("embedding map has {got} images, expected {expected}")]
    WrongImageCount { got: usize, expected: usize },
    #[error("embedding images exceed the source truncation of the outer embedding")]
    NotComposable,
}

/// A node of the dyadic tree: `len` bits, stored in the low bits of `bits`
/// with the first bit most significant.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Node {
    len: u8,
    bits: u32,
}

/// How two nodes sit relative to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Equal,
    SPrefixOfT,
    TPrefixOfS,
    SLeftOfT,
    SRightOfT,
}

impl Relation {
    pub fn is_comparable(self) -> bool {
        matches!(self, Relation::Equal | Relation::SPrefixOfT | Relation::TPrefixOfS)
    }
}

impl Node {
    pub const ROOT: Node = Node { len: 0, bits: 0 };

    /// Builds a node from `len` and the word read as a binary integer.
    pub fn new(len: u8, bits: u32) -> Node {
        assert!(len <= MAX_NODE_LEN, "node length {len} exceeds 32");
        let bits = if len == 32 { bits } else { bits & ((1u32 << len) - 1) };
        Node { len, bits }
    }

    pub fn from_bits(word: &[u8]) -> Result<Node, TreeError> {
        if word.len() > MAX_NODE_LEN as usize {
            return Err(TreeError::TooLong(word.len()));
        }
        let mut node = Node::ROOT;
        for &b in word {
            node = node.child(b & 1);
        }
        Ok(node)
    }

    pub fn len(self) -> u8 {
        self.len
    }

    pub fn is_root(self) -> bool {
        self.len == 0
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// The `i`-th bit (0-based from the root).
    pub fn bit(self, i: u8) -> u8 {
        debug_assert!(i < self.len);
        ((self.bits >> (self.len - 1 - i)) & 1) as u8
    }

    pub fn child(self, alpha: u8) -> Node {
        assert!(self.len < MAX_NODE_LEN, "cannot extend a node of length 32");
        Node { len: self.len + 1, bits: (self.bits << 1) | (alpha as u32 & 1) }
    }

    pub fn concat(self, suffix: Node) -> Node {
        assert!(self.len as u16 + suffix.len as u16 <= MAX_NODE_LEN as u16);
        if suffix.len == 0 {
            return self;
        }
        let shifted = if suffix.len == 32 { 0 } else { self.bits << suffix.len };
        Node { len: self.len + suffix.len, bits: shifted | suffix.bits }
    }

    /// Drops the last bit; `None` for the root.
    pub fn predecessor(self) -> Option<Node> {
        (self.len > 0).then(|| Node { len: self.len - 1, bits: self.bits >> 1 })
    }

    /// Last bit of the word, i.e. `alpha` in `t = t̃⌢α`.
    pub fn last_bit(self) -> Option<u8> {
        (self.len > 0).then_some((self.bits & 1) as u8)
    }

    /// `s|_m`: the prefix of length `m`.
    pub fn prefix(self, m: u8) -> Node {
        assert!(m <= self.len);
        let bits = if self.len - m == 32 { 0 } else { self.bits >> (self.len - m) };
        Node { len: m, bits }
    }

    /// `self ⊑ other`.
    pub fn is_prefix_of(self, other: Node) -> bool {
        self.len <= other.len && other.prefix(self.len) == self
    }

    pub fn is_comparable(self, other: Node) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// The position `𝒪(t)` of the node in the standard linear order, starting at 1.
    pub fn order_index(self) -> u64 {
        (1u64 << self.len) + self.bits as u64
    }

    /// Inverse of [`Node::order_index`].
    pub fn from_order_index(index: u64) -> Node {
        assert!(index >= 1);
        let len = 63 - index.leading_zeros() as u8;
        Node::new(len, (index - (1u64 << len)) as u32)
    }

    /// Zero-based position inside any truncation containing the node.
    pub fn dense_index(self) -> usize {
        (self.order_index() - 1) as usize
    }

    pub fn from_dense_index(index: usize) -> Node {
        Node::from_order_index(index as u64 + 1)
    }

    pub fn relate(self, t: Node) -> Relation {
        relate(self, t)
    }

    pub fn to_bit_string(self) -> String {
        (0..self.len).map(|i| if self.bit(i) == 0 { '0' } else { '1' }).collect()
    }

    /// All descendants (including `self`) of length at most `depth`, in standard order.
    pub fn cone(self, depth: u8) -> impl Iterator<Item = Node> {
        let start = self.len;
        (start..=depth.max(start)).filter(move |&l| l <= depth).flat_map(move |l| {
            let extra = l - start;
            (0..(1u64 << extra)).map(move |suffix| Node::new(l, (((self.bits as u64) << extra) | suffix) as u32))
        })
    }
}

/// `𝒪(t)`, the 1-based position of `t` in the standard linear order.
pub fn order_index(t: Node) -> u64 {
    t.order_index()
}

/// Classifies the pair `(s, t)`; left/right is read off the first bit after
/// the longest common prefix.
pub fn relate(s: Node, t: Node) -> Relation {
    if s == t {
        return Relation::Equal;
    }
    if s.is_prefix_of(t) {
        return Relation::SPrefixOfT;
    }
    if t.is_prefix_of(s) {
        return Relation::TPrefixOfS;
    }
    let m = s.len.min(t.len);
    let (a, b) = (s.prefix(m).bits, t.prefix(m).bits);
    let diff = a ^ b;
    // first differing bit, counted from the most significant of the m bits
    let pos = m - (32 - diff.leading_zeros()) as u8;
    if s.bit(pos) == 0 {
        Relation::SLeftOfT
    } else {
        Relation::SRightOfT
    }
}

impl Ord for Node {
    /// The standard linear order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_index().cmp(&other.order_index())
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            write!(f, "∅")
        } else {
            write!(f, "{}", self.to_bit_string())
        }
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Node(\"{}\")", self.to_bit_string())
    }
}

impl FromStr for Node {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut word = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => word.push(0),
                '1' => word.push(1),
                _ => return Err(TreeError::InvalidBits(s.to_string())),
            }
        }
        Node::from_bits(&word)
    }
}

impl Serialize for Node {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_bit_string())
    }
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The finite tree `2^{≤n}` of all words of length at most `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Truncation {
    pub depth: u8,
}

impl Truncation {
    pub fn new(depth: u8) -> Truncation {
        assert!(depth < MAX_NODE_LEN, "truncation depth {depth} too large for dense layouts");
        Truncation { depth }
    }

    /// `2^{n+1} − 1`.
    pub fn node_count(self) -> usize {
        (1usize << (self.depth as usize + 1)) - 1
    }

    pub fn contains(self, t: Node) -> bool {
        t.len() <= self.depth
    }

    /// Nodes in standard linear order.
    pub fn nodes(self) -> impl Iterator<Item = Node> + Clone {
        (0..self.node_count()).map(Node::from_dense_index)
    }

    pub fn level(self, len: u8) -> impl Iterator<Item = Node> {
        assert!(len <= self.depth);
        (0..(1u64 << len)).map(move |b| Node::new(len, b as u32))
    }

    pub fn leaves(self) -> impl Iterator<Item = Node> {
        self.level(self.depth)
    }

    pub fn index_of(self, t: Node) -> Result<usize, TreeError> {
        if self.contains(t) {
            Ok(t.dense_index())
        } else {
            Err(TreeError::OutsideTruncation { node: t, depth: self.depth })
        }
    }
}

/// `A(n)`: the number of antichains (including the empty one) of `2^{≤n}`.
pub fn antichain_count(depth: u8) -> u128 {
    (0..depth).fold(2u128, |a, _| a * a + 1)
}

/// All antichains of the subtree of height `height` hanging at `root`,
/// the empty one included.
fn subtree_antichains(root: Node, height: u8) -> Vec<Vec<Node>> {
    if height == 0 {
        return vec![vec![], vec![root]];
    }
    let left = subtree_antichains(root.child(0), height - 1);
    let right = subtree_antichains(root.child(1), height - 1);
    let mut out = Vec::with_capacity(left.len() * right.len() + 1);
    out.push(vec![root]);
    for l in &left {
        for r in &right {
            let mut a = Vec::with_capacity(l.len() + r.len());
            a.extend_from_slice(l);
            a.extend_from_slice(r);
            a.sort();
            out.push(a);
        }
    }
    out
}

/// Calls `visit` once for every antichain of `2^{≤n}` (the empty one
/// included). Node lists are sorted in the standard order.
pub fn for_each_antichain(depth: u8, cap: u8, mut visit: impl FnMut(&[Node])) -> Result<(), TreeError> {
    if depth > cap {
        return Err(TreeError::EnumerationTooLarge { depth, cap });
    }
    if depth == 0 {
        visit(&[]);
        visit(&[Node::ROOT]);
        return Ok(());
    }
    visit(&[Node::ROOT]);
    let left = subtree_antichains(Node::ROOT.child(0), depth - 1);
    let right = subtree_antichains(Node::ROOT.child(1), depth - 1);
    let mut buf = Vec::new();
    for l in &left {
        for r in &right {
            buf.clear();
            buf.extend_from_slice(l);
            buf.extend_from_slice(r);
            buf.sort();
            visit(&buf);
        }
    }
    Ok(())
}

/// Every antichain of `2^{≤n}` exactly once, empty one included.
pub fn enumerate_antichains(depth: u8, cap: u8) -> Result<Vec<Vec<Node>>, TreeError> {
    let mut out = Vec::with_capacity(antichain_count(depth.min(cap)).min(1 << 20) as usize);
    for_each_antichain(depth, cap, |a| out.push(a.to_vec()))?;
    Ok(out)
}

/// The `2^n` maximal chains of `2^{≤n}`, leftmost first, each listed root to leaf.
pub fn enumerate_branches(depth: u8) -> impl Iterator<Item = Vec<Node>> {
    (0..(1u64 << depth)).map(move |leaf_bits| {
        let leaf = Node::new(depth, leaf_bits as u32);
        (0..=depth).map(|m| leaf.prefix(m)).collect()
    })
}

/// An injection `t ↦ s_t` of `2^{≤k}` into the tree, stored in the standard
/// order of the source truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeEmbedding {
    source_depth: u8,
    images: Vec<Node>,
}

/// Which embedding invariant a pair of source nodes breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingViolation {
    /// Prefix/incomparability structure not preserved.
    Prefix,
    /// Left/right orientation swapped.
    Orientation,
    /// Standard linear order not preserved.
    LinearOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingCheck {
    pub passed: bool,
    pub witness: Option<(Node, Node)>,
    pub violation: Option<EmbeddingViolation>,
}

impl SubtreeEmbedding {
    pub fn new(source_depth: u8, images: Vec<Node>) -> Result<Self, TreeError> {
        let expected = Truncation::new(source_depth).node_count();
        if images.len() != expected {
            return Err(TreeError::WrongImageCount { got: images.len(), expected });
        }
        Ok(SubtreeEmbedding { source_depth, images })
    }

    /// Builds the embedding from a map evaluated on each source node.
    pub fn from_fn(source_depth: u8, f: impl Fn(Node) -> Node) -> Self {
        let images = Truncation::new(source_depth).nodes().map(f).collect();
        SubtreeEmbedding { source_depth, images }
    }

    pub fn identity(depth: u8) -> Self {
        Self::from_fn(depth, |t| t)
    }

    /// `t ↦ prefix⌢t`.
    pub fn shift(depth: u8, prefix: Node) -> Self {
        Self::from_fn(depth, |t| prefix.concat(t))
    }

    /// A random embedding of `2^{≤source_depth}` into `2^{≤host_depth}` whose
    /// levels land on common, strictly increasing host levels.
    pub fn random(source_depth: u8, host_depth: u8, rng: &mut impl rand::Rng) -> Option<Self> {
        if source_depth > host_depth {
            return None;
        }
        let mut levels = Vec::with_capacity(source_depth as usize + 1);
        let mut h = rng.random_range(0..=host_depth - source_depth);
        levels.push(h);
        for l in 1..=source_depth {
            h = rng.random_range(h + 1..=host_depth - (source_depth - l));
            levels.push(h);
        }
        let source = Truncation::new(source_depth);
        let mut images: Vec<Node> = Vec::with_capacity(source.node_count());
        for t in source.nodes() {
            let s = match t.predecessor() {
                None => Node::new(levels[0], rng.random_range(0..1u32 << levels[0])),
                Some(parent) => {
                    let gap = levels[t.len() as usize] - levels[parent.len() as usize] - 1;
                    let step = Node::ROOT.child(t.last_bit().expect("non-root"));
                    images[parent.dense_index()].concat(step).concat(Node::new(gap, rng.random_range(0..1u32 << gap)))
                }
            };
            images.push(s);
        }
        Some(SubtreeEmbedding { source_depth, images })
    }

    pub fn source_depth(&self) -> u8 {
        self.source_depth
    }

    pub fn source(&self) -> Truncation {
        Truncation::new(self.source_depth)
    }

    pub fn image(&self, t: Node) -> Node {
        self.images[t.dense_index()]
    }

    pub fn images(&self) -> &[Node] {
        &self.images
    }

    /// Pairs `(t, s_t)` in the standard order of the source.
    pub fn pairs(&self) -> impl Iterator<Item = (Node, Node)> + '_ {
        self.images.iter().enumerate().map(|(i, &s)| (Node::from_dense_index(i), s))
    }

    /// Length of the deepest image.
    pub fn image_depth(&self) -> u8 {
        self.images.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    /// Restriction to the source truncation of depth `depth`.
    pub fn truncate(&self, depth: u8) -> SubtreeEmbedding {
        let depth = depth.min(self.source_depth);
        let count = Truncation::new(depth).node_count();
        SubtreeEmbedding { source_depth: depth, images: self.images[..count].to_vec() }
    }

    /// `outer ∘ self`: first `self`, then `outer`.
    pub fn then(&self, outer: &SubtreeEmbedding) -> Result<SubtreeEmbedding, TreeError> {
        if self.image_depth() > outer.source_depth {
            return Err(TreeError::NotComposable);
        }
        Ok(SubtreeEmbedding {
            source_depth: self.source_depth,
            images: self.images.iter().map(|&s| outer.image(s)).collect(),
        })
    }

    pub fn verify(&self) -> EmbeddingCheck {
        verify_embedding(self)
    }
}

/// Checks that the embedding preserves `⊑` (and incomparability), left/right
/// orientation and the standard linear order on every pair of source nodes.
/// On failure the first offending pair in standard order is reported.
pub fn verify_embedding(e: &SubtreeEmbedding) -> EmbeddingCheck {
    let n = e.images.len();
    for i in 0..n {
        let t1 = Node::from_dense_index(i);
        let s1 = e.images[i];
        for j in (i + 1)..n {
            let t2 = Node::from_dense_index(j);
            let s2 = e.images[j];
            let rt = relate(t1, t2);
            let rs = relate(s1, s2);
            let violation = if rt != rs {
                if rt.is_comparable() || rs.is_comparable() {
                    Some(EmbeddingViolation::Prefix)
                } else {
                    Some(EmbeddingViolation::Orientation)
                }
            } else if s1 >= s2 {
                Some(EmbeddingViolation::LinearOrder)
            } else {
                None
            };
            if violation.is_some() {
                return EmbeddingCheck { passed: false, witness: Some((t1, t2)), violation };
            }
        }
    }
    EmbeddingCheck { passed: true, witness: None, violation: None }
}

impl Serialize for SubtreeEmbedding {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let map: std::collections::BTreeMap<String, String> =
            self.pairs().map(|(t, s)| (t.to_bit_string(), s.to_bit_string())).collect();
        let mut st = serializer.serialize_struct("SubtreeEmbedding", 2)?;
        st.serialize_field("source_depth", &self.source_depth)?;
        st.serialize_field("map", &map)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for SubtreeEmbedding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            source_depth: u8,
            map: std::collections::BTreeMap<Node, Node>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let source = Truncation::new(raw.source_depth);
        let mut images = Vec::with_capacity(source.node_count());
        for t in source.nodes() {
            match raw.map.get(&t) {
                Some(&s) => images.push(s),
                None => return Err(serde::de::Error::custom(format!("embedding map misses node {t:?}"))),
            }
        }
        Ok(SubtreeEmbedding { source_depth: raw.source_depth, images })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn n(s: &str) -> Node {
        s.parse().unwrap()
    }

    #[test]
    fn random_embeddings_verify() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let k = rng.random_range(0..=3u8);
            let e = SubtreeEmbedding::random(k, 5, &mut rng).unwrap();
            assert!(e.verify().passed);
            assert!(e.image_depth() <= 5);
        }
        assert!(SubtreeEmbedding::random(4, 3, &mut rng).is_none());
    }

    #[test]
    fn order_index_examples() {
        assert_eq!(order_index(Node::ROOT), 1);
        assert_eq!(order_index(n("0")), 2);
        assert_eq!(order_index(n("1")), 3);
        assert_eq!(order_index(n("10")), 6);
    }

    #[test]
    fn order_index_matches_enumeration_of_depth_two() {
        // shorter first, then left to right
        let listed = ["", "0", "1", "00", "01", "10", "11"];
        for (i, s) in listed.iter().enumerate() {
            assert_eq!(order_index(n(s)), i as u64 + 1);
            assert_eq!(Node::from_order_index(i as u64 + 1), n(s));
        }
    }

    #[test]
    fn relate_examples() {
        assert_eq!(relate(n("0"), n("01")), Relation::SPrefixOfT);
        assert_eq!(relate(n("01"), n("10")), Relation::SLeftOfT);
        assert_eq!(relate(n("1"), n("1")), Relation::Equal);
        assert_eq!(relate(n("01"), n("0")), Relation::TPrefixOfS);
        assert_eq!(relate(n("0111"), n("01011")), Relation::SRightOfT);
        assert_eq!(relate(n("1"), n("00")), Relation::SRightOfT);
    }

    #[test]
    fn node_bit_strings_round_trip() {
        for s in ["", "0", "1", "0110", "1111111"] {
            assert_eq!(n(s).to_bit_string(), s);
        }
        assert!("012".parse::<Node>().is_err());
        let long = "1".repeat(33);
        assert!(long.parse::<Node>().is_err());
        let full: Node = "1".repeat(32).parse().unwrap();
        assert_eq!(full.len(), 32);
        assert_eq!(full.prefix(0), Node::ROOT);
    }

    #[test]
    fn antichain_counts_small() {
        assert_eq!(enumerate_antichains(0, 4).unwrap().len(), 2);
        assert_eq!(enumerate_antichains(1, 4).unwrap().len(), 5);
        assert_eq!(enumerate_antichains(3, 4).unwrap().len(), 677);
        assert_eq!(antichain_count(4), 458_330);
    }

    #[test]
    fn antichain_enumeration_respects_cap() {
        assert_eq!(
            enumerate_antichains(5, 4).unwrap_err(),
            TreeError::EnumerationTooLarge { depth: 5, cap: 4 }
        );
    }

    #[test]
    fn depth_one_antichains_listed() {
        let mut got = enumerate_antichains(1, 4).unwrap();
        got.sort();
        let mut want = vec![vec![], vec![Node::ROOT], vec![n("0")], vec![n("1")], vec![n("0"), n("1")]];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn branches() {
        let b0: Vec<_> = enumerate_branches(0).collect();
        assert_eq!(b0, vec![vec![Node::ROOT]]);
        let b2: Vec<_> = enumerate_branches(2).collect();
        assert_eq!(b2.len(), 4);
        assert!(b2.iter().all(|b| b.len() == 3));
        assert_eq!(enumerate_branches(5).count(), 32);
    }

    #[test]
    fn embedding_examples() {
        assert!(SubtreeEmbedding::identity(3).verify().passed);
        assert!(SubtreeEmbedding::shift(3, n("0")).verify().passed);
        let bad = SubtreeEmbedding::new(1, vec![Node::ROOT, n("10"), n("01")]).unwrap();
        let check = bad.verify();
        assert!(!check.passed);
        assert_eq!(check.witness, Some((n("0"), n("1"))));
        assert_eq!(check.violation, Some(EmbeddingViolation::Orientation));
    }

    #[test]
    fn linear_order_violation_detected() {
        // right child image shallower than left child image
        let e = SubtreeEmbedding::new(1, vec![Node::ROOT, n("000"), n("1")]).unwrap();
        let check = e.verify();
        assert_eq!(check.violation, Some(EmbeddingViolation::LinearOrder));
        assert_eq!(check.witness, Some((n("0"), n("1"))));
    }

    #[test]
    fn prefix_violation_detected() {
        let e = SubtreeEmbedding::new(1, vec![n("0"), n("1"), n("11")]).unwrap();
        assert_eq!(e.verify().violation, Some(EmbeddingViolation::Prefix));
    }

    #[test]
    fn cone_lists_descendants_in_order() {
        let c: Vec<_> = n("1").cone(3).collect();
        let want: Vec<_> = ["1", "10", "11", "100", "101", "110", "111"].iter().map(|s| n(s)).collect();
        assert_eq!(c, want);
        assert_eq!(n("101").cone(2).count(), 0);
    }

    #[test]
    fn embedding_json_uses_bit_strings() {
        let e = SubtreeEmbedding::shift(1, n("1"));
        let js = serde_json::to_value(&e).unwrap();
        assert_eq!(js["map"][""], "1");
        assert_eq!(js["map"]["0"], "10");
        let back: SubtreeEmbedding = serde_json::from_value(js).unwrap();
        assert_eq!(back, e);
    }
}
