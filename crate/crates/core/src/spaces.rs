//! Norm engines for S^E (antichain supremum), B^E (branch supremum), their
//! duals, and ℓ^p-sums of these spaces.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::base_norm::{lp_norm, BaseNorm};
use crate::lp::{Cmp, LinearProgram, LpError};
use crate::tree::{enumerate_branches, for_each_antichain, Node, TreeError, Truncation};

/// Default depth limit for exhaustive antichain enumeration.
pub const DEFAULT_ENUM_CAP: u8 = 3;

/// Enumeration cap, overridable through `STOPTIME_ENUM_CAP`.
pub fn enumeration_cap() -> u8 {
    std::env::var("STOPTIME_ENUM_CAP")
        .ok()
        .and_then(|s| s.trim().parse::<u8>().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("depth {depth} exceeds the enumeration cap {cap} for a non-lp base")]
    UnsupportedDepth { depth: u8, cap: u8 },
    #[error("truncation mismatch: depth {left} vs depth {right}")]
    TruncationMismatch { left: u8, right: u8 },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("an lp-sum needs at least one inner space norm; got an empty tag")]
    EmptySum,
}

/// A scalar family `(a_t)` on a truncation, stored densely in standard order.
#[derive(Clone, PartialEq)]
pub struct CoeffVector {
    truncation: Truncation,
    entries: Vec<f64>,
}

impl CoeffVector {
    pub fn zeros(depth: u8) -> Self {
        let truncation = Truncation::new(depth);
        CoeffVector { truncation, entries: vec![0.0; truncation.node_count()] }
    }

    pub fn from_dense(depth: u8, entries: Vec<f64>) -> Self {
        let truncation = Truncation::new(depth);
        assert_eq!(entries.len(), truncation.node_count(), "dense layout has wrong length");
        CoeffVector { truncation, entries }
    }

    pub fn from_fn(depth: u8, f: impl FnMut(Node) -> f64) -> Self {
        let truncation = Truncation::new(depth);
        CoeffVector { truncation, entries: truncation.nodes().map(f).collect() }
    }

    pub fn from_entries(depth: u8, entries: impl IntoIterator<Item = (Node, f64)>) -> Result<Self, TreeError> {
        let mut x = Self::zeros(depth);
        for (t, v) in entries {
            let i = x.truncation.index_of(t)?;
            x.entries[i] += v;
        }
        Ok(x)
    }

    /// `e_t` (or `f_t`): the unit vector at `t`.
    pub fn unit(depth: u8, t: Node) -> Self {
        let mut x = Self::zeros(depth);
        x.set(t, 1.0);
        x
    }

    pub fn ones(depth: u8) -> Self {
        Self::from_fn(depth, |_| 1.0)
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn depth(&self) -> u8 {
        self.truncation.depth
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, t: Node) -> f64 {
        if self.truncation.contains(t) {
            self.entries[t.dense_index()]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, t: Node, v: f64) {
        let i = self.truncation.index_of(t).expect("node outside truncation");
        self.entries[i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_dense(self) -> Vec<f64> {
        self.entries
    }

    /// `(t, a_t)` in standard order.
    pub fn iter(&self) -> impl Iterator<Item = (Node, f64)> + '_ {
        self.entries.iter().enumerate().map(|(i, &v)| (Node::from_dense_index(i), v))
    }

    pub fn support(&self) -> Vec<Node> {
        self.iter().filter(|&(_, v)| v != 0.0).map(|(t, _)| t).collect()
    }

    /// Values on `nodes`, which the caller lists in standard order.
    pub fn restrict_values(&self, nodes: &[Node]) -> Vec<f64> {
        nodes.iter().map(|&t| self.get(t)).collect()
    }

    /// Same vector on a truncation of a different depth (dropping or
    /// zero-filling levels).
    pub fn resized(&self, depth: u8) -> Self {
        CoeffVector::from_fn(depth, |t| self.get(t))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        CoeffVector { truncation: self.truncation, entries: self.entries.iter().map(|&v| f(v)).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn axpy(&mut self, a: f64, other: &CoeffVector) {
        assert_eq!(self.truncation, other.truncation, "truncation mismatch");
        for (u, v) in self.entries.iter_mut().zip(&other.entries) {
            *u += a * v;
        }
    }

    pub fn max_abs(&self) -> f64 {
        lp_norm(&self.entries, f64::INFINITY)
    }
}

impl fmt::Debug for CoeffVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (t, v) in self.iter().filter(|&(_, v)| v != 0.0) {
            m.entry(&t, &v);
        }
        m.finish()
    }
}

impl Serialize for CoeffVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        struct Entries<'a>(&'a CoeffVector);
        impl Serialize for Entries<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let nz: Vec<(Node, f64)> = self.0.iter().filter(|&(_, v)| v != 0.0).collect();
                let mut m = serializer.serialize_map(Some(nz.len()))?;
                for (t, v) in nz {
                    m.serialize_entry(&t.to_bit_string(), &v)?;
                }
                m.end()
            }
        }
        let mut m = serializer.serialize_map(Some(2))?;
        m.serialize_entry("depth", &self.depth())?;
        m.serialize_entry("entries", &Entries(self))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for CoeffVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            depth: u8,
            #[serde(default)]
            entries: BTreeMap<String, f64>,
        }
        let repr = Repr::deserialize(deserializer)?;
        if repr.depth >= 31 {
            return Err(D::Error::custom(format!("depth {} is too large", repr.depth)));
        }
        let mut entries = Vec::with_capacity(repr.entries.len());
        for (k, v) in repr.entries {
            let t: Node = k.parse().map_err(D::Error::custom)?;
            if !v.is_finite() {
                return Err(D::Error::custom(format!("entry at {k:?} is not finite")));
            }
            entries.push((t, v));
        }
        CoeffVector::from_entries(repr.depth, entries).map_err(D::Error::custom)
    }
}

/// Which norm a vector is measured in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum SpaceTag {
    S { base: BaseNorm },
    B { base: BaseNorm },
    /// The dual of S^E.
    D { base: BaseNorm },
    /// The dual of B^E.
    BDual { base: BaseNorm },
    LpSum { p: f64, inner: Box<SpaceTag> },
}

impl SpaceTag {
    pub fn base(&self) -> &BaseNorm {
        match self {
            SpaceTag::S { base } | SpaceTag::B { base } | SpaceTag::D { base } | SpaceTag::BDual { base } => base,
            SpaceTag::LpSum { inner, .. } => inner.base(),
        }
    }

    pub fn norm(&self, x: &CoeffVector) -> Result<f64, SpaceError> {
        Ok(match self {
            SpaceTag::S { base } => norm_s(x, base)?,
            SpaceTag::B { base } => norm_b(x, base),
            SpaceTag::D { base } => dual_norm_d(x, base)?.value,
            SpaceTag::BDual { base } => dual_norm_b(x, base)?.value,
            SpaceTag::LpSum { inner, .. } => inner.norm(x)?,
        })
    }

    /// The space whose norm is the dual one, when it is one of ours.
    pub fn dual(&self) -> Option<SpaceTag> {
        match self {
            SpaceTag::S { base } => Some(SpaceTag::D { base: base.clone() }),
            SpaceTag::D { base } => Some(SpaceTag::S { base: base.clone() }),
            SpaceTag::B { base } => Some(SpaceTag::BDual { base: base.clone() }),
            SpaceTag::BDual { base } => Some(SpaceTag::B { base: base.clone() }),
            SpaceTag::LpSum { .. } => None,
        }
    }

    pub fn is_dual_side(&self) -> bool {
        matches!(self, SpaceTag::D { .. } | SpaceTag::BDual { .. })
    }

    pub fn label(&self) -> String {
        match self {
            SpaceTag::S { base } => format!("S[{base}]"),
            SpaceTag::B { base } => format!("B[{base}]"),
            SpaceTag::D { base } => format!("D[{base}]"),
            SpaceTag::BDual { base } => format!("B*[{base}]"),
            SpaceTag::LpSum { p, inner } => format!("l{p}({})", inner.label()),
        }
    }
}

/// A norm value with the antichain, branch or support that attains it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub value: f64,
    pub witness: Vec<Node>,
    /// Upper bound minus certified lower bound; zero for exact engines.
    #[serde(skip_serializing_if = "is_zero")]
    pub gap: f64,
    /// For dual norms: a unit vector of the primal space attaining `value`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maximizer: Option<CoeffVector>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl NormReport {
    fn exact(value: f64, witness: Vec<Node>) -> Self {
        NormReport { value, witness, gap: 0.0, maximizer: None }
    }
}

fn pow_p(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v * v
    } else {
        v.powf(p)
    }
}

fn root_p(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v.sqrt()
    } else {
        v.powf(1.0 / p)
    }
}

/// Dense index of the child `t⌢α` of the node at dense index `i`.
fn child_index(t: Node, alpha: u8) -> usize {
    t.child(alpha).dense_index()
}

/// Maximum-weight antichain by the tree recursion, for ℓ^p with p < ∞.
/// Returns `(Σ_{A}|a_t|^p, A)`; ties go to the shallower node.
fn antichain_dp(x: &[f64], depth: u8, p: f64) -> (f64, Vec<Node>) {
    let n = x.len();
    let mut best = vec![0.0; n];
    let mut take = vec![false; n];
    for i in (0..n).rev() {
        let t = Node::from_dense_index(i);
        let own = pow_p(x[i].abs(), p);
        let below = if t.len() < depth { best[child_index(t, 0)] + best[child_index(t, 1)] } else { 0.0 };
        if own >= below && x[i] != 0.0 {
            best[i] = own;
            take[i] = true;
        } else {
            best[i] = below;
        }
    }
    let mut witness = Vec::new();
    let mut stack = vec![Node::ROOT];
    while let Some(t) = stack.pop() {
        let i = t.dense_index();
        if take[i] {
            witness.push(t);
        } else if t.len() < depth && best[i] > 0.0 {
            stack.push(t.child(1));
            stack.push(t.child(0));
        }
    }
    witness.sort();
    (best[0], witness)
}

fn first_max_abs(x: &CoeffVector) -> (f64, Vec<Node>) {
    let mut best = 0.0;
    let mut arg = None;
    for (t, v) in x.iter() {
        if v.abs() > best {
            best = v.abs();
            arg = Some(t);
        }
    }
    (best, arg.into_iter().collect())
}

/// S^E norm with the maximising antichain (nonzero entries only).
pub fn norm_s_report(x: &CoeffVector, base: &BaseNorm) -> Result<NormReport, SpaceError> {
    match base {
        BaseNorm::Lp(p) if p.is_infinite() => {
            let (v, w) = first_max_abs(x);
            Ok(NormReport::exact(v, w))
        }
        BaseNorm::Lp(p) => {
            let (s, w) = antichain_dp(x.as_slice(), x.depth(), *p);
            Ok(NormReport::exact(root_p(s, *p), w))
        }
        BaseNorm::Custom(_) => norm_s_enumerated(x, base, enumeration_cap()),
    }
}

pub fn norm_s(x: &CoeffVector, base: &BaseNorm) -> Result<f64, SpaceError> {
    norm_s_report(x, base).map(|r| r.value)
}

/// S^E norm by visiting every antichain; the first strict maximum in
/// enumeration order is the witness.
pub fn norm_s_enumerated(x: &CoeffVector, base: &BaseNorm, cap: u8) -> Result<NormReport, SpaceError> {
    let depth = x.depth();
    if depth > cap {
        return Err(SpaceError::UnsupportedDepth { depth, cap });
    }
    let mut best = 0.0;
    let mut witness = Vec::new();
    let mut buf = Vec::new();
    for_each_antichain(depth, cap, |a| {
        buf.clear();
        buf.extend(a.iter().map(|&t| x.get(t)));
        let v = base.eval(&buf);
        if v > best {
            best = v;
            witness = a.iter().copied().filter(|&t| x.get(t) != 0.0).collect();
        }
    })?;
    Ok(NormReport::exact(best, witness))
}

/// B^E norm with the leftmost maximising branch (nonzero entries only).
pub fn norm_b_report(x: &CoeffVector, base: &BaseNorm) -> NormReport {
    let mut best = 0.0;
    let mut witness = Vec::new();
    for branch in enumerate_branches(x.depth()) {
        let v = base.eval(&x.restrict_values(&branch));
        if v > best {
            best = v;
            witness = branch.into_iter().filter(|&t| x.get(t) != 0.0).collect();
        }
    }
    NormReport::exact(best, witness)
}

pub fn norm_b(x: &CoeffVector, base: &BaseNorm) -> f64 {
    norm_b_report(x, base).value
}

pub fn pairing(x: &CoeffVector, y: &CoeffVector) -> Result<f64, SpaceError> {
    if x.truncation != y.truncation {
        return Err(SpaceError::TruncationMismatch { left: x.depth(), right: y.depth() });
    }
    Ok(x.entries.iter().zip(&y.entries).map(|(a, b)| a * b).sum())
}

/// ℓ^p norm of the list of inner norms.
pub fn norm_lp_sum(xs: &[CoeffVector], p: f64, inner: &SpaceTag) -> Result<f64, SpaceError> {
    if let Some(first) = xs.first() {
        if let Some(bad) = xs.iter().find(|x| x.truncation != first.truncation) {
            return Err(SpaceError::TruncationMismatch { left: first.depth(), right: bad.depth() });
        }
    }
    let norms = xs.iter().map(|x| inner.norm(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(lp_norm(&norms, p))
}

/// Limits for the cut-based dual engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    /// Stop once the primal iterate violates no constraint by more than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl DualOptions {
    /// Defaults: 1e−9 for polyhedral (ℓ¹) constraints, 1e−7 otherwise.
    pub fn for_base(base: &BaseNorm) -> Self {
        match base {
            BaseNorm::Lp(p) if *p == 1.0 => DualOptions { tolerance: 1e-9, max_iterations: 2_000 },
            _ => DualOptions { tolerance: 1e-7, max_iterations: 4_000 },
        }
    }
}

/// One violated constraint found by a separation oracle: coefficients on
/// the support variables and the constraint's current value.
struct Cut {
    value: f64,
    coeffs: Vec<(usize, f64)>,
}

struct CutOutcome {
    upper: f64,
    lower: f64,
    w: Vec<f64>,
}

/// Maximises `Σ c_i w_i` over `w ≥ 0, w_i ≤ 1` and the cuts produced by
/// `separate`, which returns the most violated constraint at `w`.
fn solve_by_cuts(
    c: &[f64],
    initial: Vec<Vec<(usize, f64)>>,
    opts: DualOptions,
    mut separate: impl FnMut(&[f64]) -> Result<Cut, SpaceError>,
) -> Result<CutOutcome, SpaceError> {
    let n = c.len();
    let mut lp = LinearProgram::maximize(c.to_vec());
    for i in 0..n {
        lp.add_sparse_row(&[(i, 1.0)], Cmp::Le, 1.0);
    }
    for row in initial {
        lp.add_sparse_row(&row, Cmp::Le, 1.0);
    }
    let mut iterations = 0;
    loop {
        let sol = lp.solve()?;
        let w: Vec<f64> = sol.x.iter().map(|&v| v.max(0.0)).collect();
        let cut = separate(&w)?;
        iterations += 1;
        let done = cut.value <= 1.0 + opts.tolerance;
        if done || iterations >= opts.max_iterations {
            let scale = cut.value.max(1.0);
            let lower: f64 = c.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / scale;
            let upper = if done && cut.value <= 1.0 { lower } else { sol.value.max(lower) };
            let w = w.into_iter().map(|v| v / scale).collect();
            return Ok(CutOutcome { upper, lower, w });
        }
        lp.add_sparse_row(&cut.coeffs, Cmp::Le, 1.0);
    }
}

/// Which family of sets the primal norm takes its supremum over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Antichains,
    Branches,
}

fn dual_norm(xs: &CoeffVector, base: &BaseNorm, family: Family, opts: DualOptions) -> Result<NormReport, SpaceError> {
    let depth = xs.depth();
    let support = xs.support();
    if support.is_empty() {
        return Ok(NormReport { maximizer: Some(CoeffVector::zeros(depth)), ..NormReport::exact(0.0, vec![]) });
    }
    let c: Vec<f64> = support.iter().map(|&t| xs.get(t).abs()).collect();
    let signs: Vec<f64> = support.iter().map(|&t| xs.get(t).signum()).collect();
    let embed = |w: &[f64]| -> CoeffVector {
        let mut x = CoeffVector::zeros(depth);
        for (k, &t) in support.iter().enumerate() {
            x.set(t, w[k]);
        }
        x
    };
    let position = |t: Node| support.binary_search(&t).ok();
    let finish = |out: CutOutcome| -> NormReport {
        let maximizer = embed(&out.w.iter().zip(&signs).map(|(a, s)| a * s).collect::<Vec<_>>());
        NormReport { value: out.upper, witness: support.clone(), gap: out.upper - out.lower, maximizer: Some(maximizer) }
    };

    match (base, family) {
        (BaseNorm::Lp(p), _) if p.is_infinite() => {
            // both primal norms are the sup norm, whose dual is ℓ¹
            let value = c.iter().sum();
            let maximizer = embed(&signs);
            Ok(NormReport { maximizer: Some(maximizer), ..NormReport::exact(value, support) })
        }
        (BaseNorm::Lp(p), _) if *p > 1.0 => {
            let (value, w) = tree_dual(xs, *p, family);
            let maximizer = embed(&support.iter().zip(&signs).map(|(&t, s)| w[t.dense_index()] * s).collect::<Vec<_>>());
            Ok(NormReport { maximizer: Some(maximizer), ..NormReport::exact(value, support) })
        }
        (BaseNorm::Lp(_), Family::Branches) => {
            let rows: Vec<Vec<(usize, f64)>> = enumerate_branches(depth)
                .map(|br| br.into_iter().filter_map(position).map(|k| (k, 1.0)).collect())
                .collect();
            let out = solve_by_cuts(&c, rows, opts, |w| {
                let x = embed(w);
                Ok(Cut { value: norm_b(&x, base), coeffs: vec![] })
            })?;
            Ok(finish(out))
        }
        (BaseNorm::Lp(p), Family::Antichains) => {
            let p = *p;
            let out = solve_by_cuts(&c, vec![], opts, |w| {
                let x = embed(w);
                let (s, a) = antichain_dp(x.as_slice(), depth, p);
                let value = root_p(s, p);
                let coeffs = a
                    .iter()
                    .filter_map(|&t| position(t).map(|k| (k, gradient_weight(w[k], value, p))))
                    .collect();
                Ok(Cut { value, coeffs })
            })?;
            Ok(finish(out))
        }
        (BaseNorm::Custom(_), _) => {
            let cap = enumeration_cap();
            if family == Family::Antichains && depth > cap {
                return Err(SpaceError::UnsupportedDepth { depth, cap });
            }
            let out = solve_by_cuts(&c, vec![], opts, |w| {
                let x = embed(w);
                let r = match family {
                    Family::Antichains => norm_s_enumerated(&x, base, cap)?,
                    Family::Branches => norm_b_report(&x, base),
                };
                let coeffs = numeric_subgradient(base, &x, &r.witness)
                    .into_iter()
                    .filter_map(|(t, g)| position(t).map(|k| (k, g)))
                    .collect();
                Ok(Cut { value: r.value, coeffs })
            })?;
            Ok(finish(out))
        }
    }
}

/// Exact dual norm for `1 < p < ∞` by recursion from the leaves, with
/// `c = |x*|` and `q` the conjugate exponent.
///
/// Antichains through the cone of `t` are `{t}` or unions of antichains of
/// the two child cones, so the S-ball budget splits between the children:
/// `v(t) = c_t + ‖(v(t0), v(t1))‖_q`. Branches through `t` share `t` and then
/// both continue with what is left: `v(t) = ‖(c_t, v(t0) + v(t1))‖_q`.
/// Also returns a maximiser on the unit ball of `|x*|`.
fn tree_dual(xs: &CoeffVector, p: f64, family: Family) -> (f64, Vec<f64>) {
    let q = p / (p - 1.0);
    let depth = xs.depth();
    let n = xs.len();
    let c: Vec<f64> = xs.as_slice().iter().map(|v| v.abs()).collect();
    let inner = (n - 1) / 2;
    let mut v = c.clone();
    for i in (0..inner).rev() {
        let (a, b) = (v[2 * i + 1], v[2 * i + 2]);
        v[i] = match family {
            Family::Antichains => c[i] + lp_norm(&[a, b], q),
            Family::Branches => lp_norm(&[c[i], a + b], q),
        };
    }
    // budgets are p-th powers of the scale each cone may use
    let mut budget = vec![0.0f64; n];
    let mut w = vec![0.0; n];
    budget[0] = 1.0;
    for i in 0..n {
        let scale = budget[i].powf(1.0 / p);
        let leaf = Node::from_dense_index(i).len() == depth;
        match family {
            Family::Antichains => {
                w[i] = scale;
                if !leaf {
                    let (a, b) = (v[2 * i + 1], v[2 * i + 2]);
                    let norm = lp_norm(&[a, b], q);
                    let share = |x: f64| if norm > 0.0 { (x / norm).powf(q) } else { 0.5 };
                    budget[2 * i + 1] = budget[i] * share(a);
                    budget[2 * i + 2] = budget[i] * share(b);
                }
            }
            Family::Branches => {
                let u = if v[i] > 0.0 { (c[i] / v[i]).powf(q - 1.0) } else { 0.0 };
                w[i] = scale * u;
                if !leaf {
                    let rest = if v[i] > 0.0 { (v[i].powf(q) - c[i].powf(q)).max(0.0) / v[i].powf(q) } else { 1.0 };
                    budget[2 * i + 1] = budget[i] * rest;
                    budget[2 * i + 2] = budget[i] * rest;
                }
            }
        }
    }
    (v[0], w)
}

/// `(w/‖w_A‖)^{p−1}`: the gradient of `‖·|_A‖_p` at `w`.
fn gradient_weight(w: f64, norm: f64, p: f64) -> f64 {
    if norm == 0.0 {
        0.0
    } else {
        (w / norm).powf(p - 1.0)
    }
}

/// Central-difference gradient of `v ↦ eval(v|_A)` at `x`, coordinates of `A`.
fn numeric_subgradient(base: &BaseNorm, x: &CoeffVector, set: &[Node]) -> Vec<(Node, f64)> {
    let vals = x.restrict_values(set);
    let h = 1e-7;
    (0..set.len())
        .map(|k| {
            let mut up = vals.clone();
            let mut down = vals.clone();
            up[k] += h;
            down[k] -= h;
            (set[k], (base.eval(&up) - base.eval(&down)) / (2.0 * h))
        })
        .collect()
}

/// D^E norm of `x*`, the supremum of `⟨x, x*⟩` over the S^E unit ball.
///
/// ℓ¹ bases are solved exactly by column generation with the antichain
/// recursion as separation oracle, other ℓ^p bases by a recursion over the
/// tree, and custom bases by cutting planes (`gap` reports the remaining
/// bracket).
pub fn dual_norm_d(xs: &CoeffVector, base: &BaseNorm) -> Result<NormReport, SpaceError> {
    dual_norm(xs, base, Family::Antichains, DualOptions::for_base(base))
}

pub fn dual_norm_d_with(xs: &CoeffVector, base: &BaseNorm, opts: DualOptions) -> Result<NormReport, SpaceError> {
    dual_norm(xs, base, Family::Antichains, opts)
}

/// Norm of `y` in (B^E)*, the supremum of `⟨x, y⟩` over the B^E unit ball.
pub fn dual_norm_b(y: &CoeffVector, base: &BaseNorm) -> Result<NormReport, SpaceError> {
    dual_norm(y, base, Family::Branches, DualOptions::for_base(base))
}

/// D^{ℓ¹} norm from one linear program carrying every antichain constraint.
pub fn dual_norm_d_full_lp(xs: &CoeffVector, cap: u8) -> Result<f64, SpaceError> {
    let support = xs.support();
    if support.is_empty() {
        return Ok(0.0);
    }
    let c: Vec<f64> = support.iter().map(|&t| xs.get(t).abs()).collect();
    let mut lp = LinearProgram::maximize(c);
    let mut rows = std::collections::BTreeSet::new();
    for_each_antichain(xs.depth(), cap, |a| {
        let row: Vec<usize> = a.iter().filter_map(|t| support.binary_search(t).ok()).collect();
        if !row.is_empty() {
            rows.insert(row);
        }
    })?;
    for row in rows {
        let entries: Vec<(usize, f64)> = row.into_iter().map(|k| (k, 1.0)).collect();
        lp.add_sparse_row(&entries, Cmp::Le, 1.0);
    }
    Ok(lp.solve()?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_norm::CustomNorm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn n(s: &str) -> Node {
        s.parse().unwrap()
    }

    #[test]
    fn norm_s_examples() {
        assert_eq!(norm_s(&CoeffVector::ones(1), &BaseNorm::l1()).unwrap(), 2.0);
        let leaves = CoeffVector::from_fn(2, |t| if t.len() == 2 { 1.0 } else { 0.0 });
        assert_eq!(norm_s(&leaves, &BaseNorm::l2()).unwrap(), 2.0);
        let r = norm_s_report(&CoeffVector::ones(1), &BaseNorm::l1()).unwrap();
        assert_eq!(r.witness, vec![n("0"), n("1")]);
    }

    #[test]
    fn norm_b_examples() {
        assert_eq!(norm_b(&CoeffVector::ones(2), &BaseNorm::l1()), 3.0);
        let x = CoeffVector::from_entries(1, [(Node::ROOT, 1.0), (n("0"), 2.0), (n("1"), 0.5)]).unwrap();
        assert_eq!(norm_b(&x, &BaseNorm::l1()), 3.0);
        assert_eq!(norm_b_report(&x, &BaseNorm::l1()).witness, vec![Node::ROOT, n("0")]);
        assert_eq!(norm_b(&x, &BaseNorm::linf()), 2.0);
    }

    #[test]
    fn dp_matches_enumeration_for_all_exponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [1.0, 1.5, 2.0, f64::INFINITY] {
            let base = BaseNorm::Lp(p);
            for _ in 0..100 {
                let x = CoeffVector::from_fn(3, |_| rng.random_range(-1.0..1.0));
                let dp = norm_s(&x, &base).unwrap();
                let en = norm_s_enumerated(&x, &base, 3).unwrap().value;
                assert!((dp - en).abs() <= 1e-12 * en, "{p}: {dp} vs {en}");
            }
        }
    }

    #[test]
    fn custom_base_is_capped() {
        let base = BaseNorm::custom(crate::base_norm::CustomNorm::new("l1-copy", |v: &[f64]| lp_norm(v, 1.0)));
        let x = CoeffVector::ones(3);
        assert_eq!(norm_s(&x, &base).unwrap(), 8.0);
        assert_eq!(norm_s(&CoeffVector::ones(5), &base), Err(SpaceError::UnsupportedDepth { depth: 5, cap: 3 }));
    }

    #[test]
    fn dual_examples() {
        let l1 = BaseNorm::l1();
        let f = CoeffVector::from_entries(1, [(Node::ROOT, 1.0), (n("0"), 1.0)]).unwrap();
        assert!((dual_norm_d(&f, &l1).unwrap().value - 2.0).abs() < 1e-9);
        let g = CoeffVector::from_entries(1, [(n("0"), 1.0), (n("1"), 1.0)]).unwrap();
        assert!((dual_norm_d(&g, &l1).unwrap().value - 1.0).abs() < 1e-9);
        for base in [BaseNorm::l1(), BaseNorm::l2(), BaseNorm::linf(), BaseNorm::Lp(3.0)] {
            let e = CoeffVector::unit(2, n("01"));
            let r = dual_norm_d(&e, &base).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6, "{base}: {r:?}");
        }
    }

    #[test]
    fn dual_maximizer_is_a_unit_vector_attaining_the_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let xs = CoeffVector::from_fn(3, |_| rng.random_range(-1.0..1.0));
            let r = dual_norm_d(&xs, &BaseNorm::l1()).unwrap();
            let x = r.maximizer.clone().unwrap();
            assert!(norm_s(&x, &BaseNorm::l1()).unwrap() <= 1.0 + 1e-9);
            assert!((pairing(&x, &xs).unwrap() - r.value).abs() < 1e-9);
            let full = dual_norm_d_full_lp(&xs, 3).unwrap();
            assert!((full - r.value).abs() < 1e-9);
        }
    }

    #[test]
    fn l2_dual_brackets_the_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = BaseNorm::l2();
        for _ in 0..5 {
            let xs = CoeffVector::from_fn(2, |_| rng.random_range(-1.0..1.0));
            let r = dual_norm_d(&xs, &base).unwrap();
            assert!(r.gap >= 0.0 && r.gap < 1e-5, "{r:?}");
            let x = r.maximizer.unwrap();
            assert!(norm_s(&x, &base).unwrap() <= 1.0 + 1e-12);
            // random unit vectors never beat the reported upper bound
            for _ in 0..200 {
                let z = CoeffVector::from_fn(2, |_| rng.random_range(-1.0..1.0));
                let z = z.scaled(1.0 / norm_s(&z, &base).unwrap());
                assert!(pairing(&z, &xs).unwrap() <= r.value + 1e-9);
            }
        }
    }

    #[test]
    fn tree_recursion_agrees_with_cutting_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for p in [1.5, 2.0, 3.0] {
            let base = BaseNorm::lp(p).unwrap();
            let generic = BaseNorm::custom(CustomNorm::new(format!("l{p}"), move |v: &[f64]| lp_norm(v, p)));
            for _ in 0..6 {
                let f = CoeffVector::from_fn(2, |_| rng.random_range(-1.0..1.0));
                for (exact, cuts, primal) in [
                    (dual_norm_d(&f, &base).unwrap(), dual_norm_d(&f, &generic).unwrap(), SpaceTag::S { base: base.clone() }),
                    (dual_norm_b(&f, &base).unwrap(), dual_norm_b(&f, &generic).unwrap(), SpaceTag::B { base: base.clone() }),
                ] {
                    assert_eq!(exact.gap, 0.0);
                    assert!(exact.value <= cuts.value + 1e-9 && exact.value >= cuts.value - cuts.gap - 1e-6, "{exact:?} {cuts:?}");
                    let x = exact.maximizer.unwrap();
                    assert!(primal.norm(&x).unwrap() <= 1.0 + 1e-12);
                    assert!((pairing(&x, &f).unwrap() - exact.value).abs() <= 1e-12 * exact.value);
                }
            }
        }
    }

    #[test]
    fn b_dual_of_l1_bounds_antichain_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let y = CoeffVector::from_fn(3, |_| rng.random_range(-1.0..1.0));
            let r = dual_norm_b(&y, &BaseNorm::l1()).unwrap();
            let y = y.scaled(1.0 / r.value);
            assert!(norm_s(&y.abs(), &BaseNorm::l1()).unwrap() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn pairing_and_sums() {
        let e = CoeffVector::unit(2, n("1"));
        assert_eq!(pairing(&e, &e).unwrap(), 1.0);
        assert_eq!(pairing(&e, &CoeffVector::unit(2, n("0"))).unwrap(), 0.0);
        assert!(pairing(&e, &CoeffVector::unit(3, n("0"))).is_err());
        let s = SpaceTag::S { base: BaseNorm::l1() };
        let ones = CoeffVector::ones(1);
        let v = norm_lp_sum(&[ones.clone(), ones], 2.0, &s).unwrap();
        assert!((v - 8f64.sqrt()).abs() < 1e-12);
        let u = CoeffVector::unit(1, Node::ROOT);
        assert_eq!(norm_lp_sum(&[u.clone(), u.clone()], f64::INFINITY, &s).unwrap(), 1.0);
        assert_eq!(norm_lp_sum(&[u.clone(), u.clone(), u], 1.0, &s).unwrap(), 3.0);
    }

    #[test]
    fn json_round_trip() {
        let x: CoeffVector = serde_json::from_str(r#"{"depth":1,"entries":{"":1.0,"0":-0.5}}"#).unwrap();
        assert_eq!(x.as_slice(), &[1.0, -0.5, 0.0]);
        let back = serde_json::to_string(&x).unwrap();
        assert_eq!(back, r#"{"depth":1,"entries":{"":1.0,"0":-0.5}}"#);
        assert!(serde_json::from_str::<CoeffVector>(r#"{"depth":1,"entries":{"000":1.0}}"#).is_err());
        assert!(serde_json::from_str::<CoeffVector>(r#"{"depth":1,"entries":{"2":1.0}}"#).is_err());
        let tag: SpaceTag = serde_json::from_str(r#"{"space":"d","base":{"kind":"lp","p":1}}"#).unwrap();
        assert_eq!(tag, SpaceTag::D { base: BaseNorm::l1() });
    }
}
