//! Dense linear maps between truncations, the embedding operators B and Q,
//! operator-norm estimation and distances to annihilators.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::base_norm::{conjugate, BaseNorm};
use crate::lp::{Cmp, LinearProgram, LpError, VarKind};
use crate::spaces::{
    dual_norm_b, dual_norm_d, enumeration_cap, norm_b_report, norm_s_report, pairing, CoeffVector, SpaceError,
    SpaceTag,
};
use crate::tree::{enumerate_branches, for_each_antichain, EmbeddingViolation, Node, SubtreeEmbedding, Truncation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("embedding fails verification ({violation:?} at {witness:?})")]
    UnverifiedEmbedding { violation: Option<EmbeddingViolation>, witness: Option<(Node, Node)> },
    #[error("embedding image reaches depth {image_depth}, host has depth {host_depth}")]
    OutsideHost { image_depth: u8, host_depth: u8 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A linear map from the truncation `domain` to `codomain`; entry `(i, j)`
/// is the coefficient of output basis vector `i` in the image of input
/// basis vector `j`, both in standard order.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    domain: Truncation,
    codomain: Truncation,
    space: SpaceTag,
    matrix: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn new(domain_depth: u8, codomain_depth: u8, space: SpaceTag, matrix: DMatrix<f64>) -> Result<Self, OperatorError> {
        let domain = Truncation::new(domain_depth);
        let codomain = Truncation::new(codomain_depth);
        if matrix.nrows() != codomain.node_count() || matrix.ncols() != domain.node_count() {
            return Err(OperatorError::Dimension(format!(
                "{}x{} matrix for depths {codomain_depth} <- {domain_depth}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(OperatorMatrix { domain, codomain, space, matrix })
    }

    pub fn square(depth: u8, space: SpaceTag, matrix: DMatrix<f64>) -> Result<Self, OperatorError> {
        Self::new(depth, depth, space, matrix)
    }

    pub fn zeros(domain_depth: u8, codomain_depth: u8, space: SpaceTag) -> Self {
        let (d, c) = (Truncation::new(domain_depth), Truncation::new(codomain_depth));
        OperatorMatrix { domain: d, codomain: c, space, matrix: DMatrix::zeros(c.node_count(), d.node_count()) }
    }

    pub fn identity(depth: u8, space: SpaceTag) -> Self {
        let n = Truncation::new(depth).node_count();
        Self::square(depth, space, DMatrix::identity(n, n)).expect("square identity")
    }

    /// `diag(d_t)`.
    pub fn diagonal(d: &CoeffVector, space: SpaceTag) -> Self {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d.as_slice()));
        Self::square(d.depth(), space, m).expect("square diagonal")
    }

    /// Entry `(out, in)` given by `f(out, in)`.
    pub fn from_fn(domain_depth: u8, codomain_depth: u8, space: SpaceTag, mut f: impl FnMut(Node, Node) -> f64) -> Self {
        let (d, c) = (Truncation::new(domain_depth), Truncation::new(codomain_depth));
        let m = DMatrix::from_fn(c.node_count(), d.node_count(), |i, j| {
            f(Node::from_dense_index(i), Node::from_dense_index(j))
        });
        OperatorMatrix { domain: d, codomain: c, space, matrix: m }
    }

    pub fn domain(&self) -> Truncation {
        self.domain
    }

    pub fn codomain(&self) -> Truncation {
        self.codomain
    }

    pub fn is_square(&self) -> bool {
        self.domain == self.codomain
    }

    pub fn space(&self) -> &SpaceTag {
        &self.space
    }

    pub fn with_space(mut self, space: SpaceTag) -> Self {
        self.space = space;
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Coefficient of `e_out` in the image of `e_in`, i.e. `⟨T e_in, f_out⟩`.
    pub fn get(&self, out: Node, input: Node) -> f64 {
        self.matrix[(out.dense_index(), input.dense_index())]
    }

    pub fn set(&mut self, out: Node, input: Node, v: f64) {
        self.matrix[(out.dense_index(), input.dense_index())] = v;
    }

    pub fn apply(&self, x: &CoeffVector) -> Result<CoeffVector, OperatorError> {
        if x.truncation() != self.domain {
            return Err(OperatorError::Dimension(format!(
                "vector of depth {} into operator with domain depth {}",
                x.depth(),
                self.domain.depth
            )));
        }
        let y = &self.matrix * nalgebra::DVector::from_column_slice(x.as_slice());
        Ok(CoeffVector::from_dense(self.codomain.depth, y.as_slice().to_vec()))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &OperatorMatrix) -> Result<OperatorMatrix, OperatorError> {
        if inner.codomain != self.domain {
            return Err(OperatorError::Dimension(format!(
                "cannot compose: inner codomain depth {} vs outer domain depth {}",
                inner.codomain.depth, self.domain.depth
            )));
        }
        Ok(OperatorMatrix {
            domain: inner.domain,
            codomain: self.codomain,
            space: self.space.clone(),
            matrix: &self.matrix * &inner.matrix,
        })
    }

    /// Transpose, acting between the dual spaces.
    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            domain: self.codomain,
            codomain: self.domain,
            space: self.space.dual().unwrap_or_else(|| self.space.clone()),
            matrix: self.matrix.transpose(),
        }
    }

    /// Largest entrywise difference; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        if self.matrix.shape() != other.matrix.shape() {
            return f64::INFINITY;
        }
        (&self.matrix - &other.matrix).amax()
    }

    /// `max_{i,j} |M_ij − δ_ij|` for square matrices.
    pub fn distance_to_identity(&self) -> f64 {
        let n = self.matrix.nrows();
        if n != self.matrix.ncols() {
            return f64::INFINITY;
        }
        (&self.matrix - DMatrix::identity(n, n)).amax()
    }

    /// `Σ_{i,j} |M_ij|`.
    pub fn entrywise_l1(&self) -> f64 {
        self.matrix.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain_depth: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    codomain_depth: Option<u8>,
    space: SpaceTag,
    rows: Vec<Vec<f64>>,
}

impl Serialize for OperatorMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        let mut m = serializer.serialize_map(None)?;
        if self.is_square() {
            m.serialize_entry("depth", &self.domain.depth)?;
        } else {
            m.serialize_entry("domain_depth", &self.domain.depth)?;
            m.serialize_entry("codomain_depth", &self.codomain.depth)?;
        }
        m.serialize_entry("space", &self.space)?;
        m.serialize_entry("rows", &rows)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for OperatorMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = OperatorRepr::deserialize(deserializer)?;
        let (dom, cod) = match (r.depth, r.domain_depth, r.codomain_depth) {
            (Some(d), None, None) => (d, d),
            (None, Some(a), Some(b)) => (a, b),
            _ => return Err(D::Error::custom("give either depth or both domain_depth and codomain_depth")),
        };
        if dom >= 16 || cod >= 16 {
            return Err(D::Error::custom("operator depth too large for a dense matrix"));
        }
        let ncols = Truncation::new(dom).node_count();
        if r.rows.len() != Truncation::new(cod).node_count() || r.rows.iter().any(|row| row.len() != ncols) {
            return Err(D::Error::custom("rows do not match the declared depths"));
        }
        if r.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(D::Error::custom("matrix entries must be finite"));
        }
        let m = DMatrix::from_fn(r.rows.len(), ncols, |i, j| r.rows[i][j]);
        OperatorMatrix::new(dom, cod, r.space, m).map_err(D::Error::custom)
    }
}

/// The operators `B x = Σ a_t e_{s_t}` and `Q y = Σ y_{s_t} e_t` of a verified
/// embedding into `host`.
pub fn build_b_q(
    e: &SubtreeEmbedding,
    host: Truncation,
    space: SpaceTag,
) -> Result<(OperatorMatrix, OperatorMatrix), OperatorError> {
    let check = e.verify();
    if !check.passed {
        return Err(OperatorError::UnverifiedEmbedding { violation: check.violation, witness: check.witness });
    }
    if e.image_depth() > host.depth {
        return Err(OperatorError::OutsideHost { image_depth: e.image_depth(), host_depth: host.depth });
    }
    let n = e.source_depth();
    let mut b = OperatorMatrix::zeros(n, host.depth, space.clone());
    let mut q = OperatorMatrix::zeros(host.depth, n, space);
    for (t, s) in e.pairs() {
        b.set(s, t, 1.0);
        q.set(t, s, 1.0);
    }
    Ok((b, q))
}

/// An operator-norm value with the input vector that attains it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpNormReport {
    pub value: f64,
    pub argmax: CoeffVector,
    pub exact: bool,
}

fn norm_in(space: &SpaceTag, x: &CoeffVector) -> Result<f64, OperatorError> {
    Ok(space.norm(x)?)
}

fn ratio(m: &OperatorMatrix, x: &CoeffVector) -> Result<f64, OperatorError> {
    let nx = norm_in(&m.space, x)?;
    if nx == 0.0 {
        return Ok(0.0);
    }
    Ok(norm_in(&m.space, &m.apply(x)?)? / nx)
}

/// A random antichain drawn by stopping a random descent at each node.
fn random_antichain(rng: &mut impl Rng, depth: u8) -> Vec<Node> {
    let mut out = Vec::new();
    let mut stack = vec![Node::ROOT];
    while let Some(t) = stack.pop() {
        if t.len() == depth || rng.random_bool(0.35) {
            if rng.random_bool(0.85) {
                out.push(t);
            }
        } else {
            stack.push(t.child(1));
            stack.push(t.child(0));
        }
    }
    out.sort();
    out
}

/// Certified lower bound on `‖M‖` in the space tag's norm from basis
/// vectors, signed antichain and branch indicators, random sparse vectors
/// and a random local refinement of the best probes.
pub fn op_norm_lower(m: &OperatorMatrix, trials: usize, seed: u64) -> Result<OpNormReport, OperatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = m.domain.depth;
    let mut best = (0.0, CoeffVector::unit(depth, Node::ROOT));
    let mut top: Vec<(f64, CoeffVector)> = Vec::new();
    let consider = |x: CoeffVector, best: &mut (f64, CoeffVector), top: &mut Vec<(f64, CoeffVector)>| {
        ratio(m, &x).map(|r| {
            if r > best.0 {
                *best = (r, x.clone());
            }
            top.push((r, x));
            if top.len() > 64 {
                top.sort_by(|a, b| b.0.total_cmp(&a.0));
                top.truncate(8);
            }
        })
    };
    if m.domain.node_count() <= 1 << 12 {
        for t in m.domain.nodes() {
            consider(CoeffVector::unit(depth, t), &mut best, &mut top)?;
        }
    }
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    for _ in 0..trials {
        let mut x = CoeffVector::zeros(depth);
        for t in random_antichain(&mut rng, depth) {
            x.set(t, sign(&mut rng));
        }
        consider(x, &mut best, &mut top)?;

        let leaf = Node::new(depth, rng.random_range(0..(1u64 << depth)) as u32);
        let mut x = CoeffVector::zeros(depth);
        for k in 0..=depth {
            x.set(leaf.prefix(k), sign(&mut rng));
        }
        consider(x, &mut best, &mut top)?;

        let density = rng.random_range(0.05..0.6);
        let x = CoeffVector::from_fn(depth, |_| {
            if rng.random_bool(density) {
                rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        });
        consider(x, &mut best, &mut top)?;
    }
    top.sort_by(|a, b| b.0.total_cmp(&a.0));
    top.truncate(4);
    for (mut r, mut x) in top {
        let scale = x.max_abs().max(1e-300);
        let mut step = 0.5;
        for _ in 0..trials.max(8) {
            let mut y = x.clone();
            let t = Node::from_dense_index(rng.random_range(0..y.len()));
            y.set(t, y.get(t) + step * scale * rng.sample::<f64, _>(StandardNormal));
            let ry = ratio(m, &y)?;
            if ry > r {
                r = ry;
                x = y;
            } else {
                step *= 0.97;
            }
        }
        if r > best.0 {
            best = (r, x);
        }
    }
    Ok(OpNormReport { value: best.0, argmax: best.1, exact: false })
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[i][k] -= f * a[col][k];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn for_each_combination(k: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Vertices of the down-closed polytope `{w ≥ 0 : r·w ≤ 1 for every row r}`
/// (rows non-negative), by support enumeration: for each support `F`, every
/// choice of `|F|` rows tight on `F` with a unique, strictly positive and
/// feasible solution.
pub fn down_closed_vertices(rows: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    assert!(n <= 16, "support enumeration is exponential in the dimension");
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for mask in 1u32..(1 << n) {
        let f: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let mut restricted: Vec<Vec<f64>> = Vec::new();
        for r in rows {
            let rf: Vec<f64> = f.iter().map(|&i| r[i]).collect();
            if rf.iter().any(|&v| v != 0.0) && !restricted.contains(&rf) {
                restricted.push(rf);
            }
        }
        for_each_combination(f.len(), restricted.len(), |choice| {
            let a: Vec<Vec<f64>> = choice.iter().map(|&c| restricted[c].clone()).collect();
            let Some(sol) = solve_small(a, vec![1.0; f.len()]) else {
                return;
            };
            if sol.iter().any(|&v| v <= 1e-12) {
                return;
            }
            let mut w = vec![0.0; n];
            for (&i, &v) in f.iter().zip(&sol) {
                w[i] = v;
            }
            let feasible = rows.iter().all(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() <= 1.0 + 1e-9);
            if feasible && !out.iter().any(|v| v.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-9)) {
                out.push(w);
            }
        });
    }
    out
}

fn indicator_rows(sets: impl Iterator<Item = Vec<Node>>, n: usize) -> Vec<Vec<f64>> {
    sets.filter(|s| !s.is_empty())
        .map(|s| {
            let mut r = vec![0.0; n];
            for t in s {
                r[t.dense_index()] = 1.0;
            }
            r
        })
        .collect()
}

/// Constraint rows of the positive part of a polyhedral unit ball at `depth`.
fn polyhedral_rows(space: &SpaceTag, depth: u8) -> Result<Vec<Vec<f64>>, OperatorError> {
    let n = Truncation::new(depth).node_count();
    let singletons = || Truncation::new(depth).nodes().map(|t| vec![t]);
    let antichains = || -> Result<Vec<Vec<Node>>, OperatorError> {
        let mut all = Vec::new();
        for_each_antichain(depth, depth, |a| all.push(a.to_vec())).map_err(SpaceError::from)?;
        Ok(all)
    };
    let p = space.base().exponent();
    Ok(match (space, p) {
        (SpaceTag::S { .. } | SpaceTag::B { .. }, Some(p)) if p.is_infinite() => indicator_rows(singletons(), n),
        (SpaceTag::S { .. }, Some(p)) if p == 1.0 => indicator_rows(antichains()?.into_iter(), n),
        (SpaceTag::B { .. }, Some(p)) if p == 1.0 => indicator_rows(enumerate_branches(depth), n),
        (SpaceTag::D { .. }, Some(p)) if p == 1.0 => {
            // polar of the S^{ℓ1} ball: one row per vertex of its positive part
            let s_rows = indicator_rows(antichains()?.into_iter(), n);
            down_closed_vertices(&s_rows, n).into_iter().filter(|v| v.iter().any(|&x| x != 0.0)).collect()
        }
        _ => {
            return Err(OperatorError::Unsupported(format!(
                "no polyhedral description of the {} ball",
                space.label()
            )))
        }
    })
}

/// Maximum domain depth for [`op_norm_exact_tiny`].
pub const EXACT_NORM_MAX_DEPTH: u8 = 2;

/// Exact operator norm for polyhedral unit balls at depth ≤ 2: the maximum
/// of `‖M v‖` over the sign patterns of the vertices of the positive part of
/// the domain ball.
pub fn op_norm_exact_tiny(m: &OperatorMatrix) -> Result<OpNormReport, OperatorError> {
    let depth = m.domain.depth;
    if depth > EXACT_NORM_MAX_DEPTH {
        return Err(OperatorError::Unsupported(format!(
            "exact operator norms need domain depth ≤ {EXACT_NORM_MAX_DEPTH}, got {depth}"
        )));
    }
    let n = m.domain.node_count();
    let rows = polyhedral_rows(&m.space, depth)?;
    let mut best = (0.0, CoeffVector::unit(depth, Node::ROOT));
    for v in down_closed_vertices(&rows, n) {
        let support: Vec<usize> = (0..n).filter(|&i| v[i] != 0.0).collect();
        if support.is_empty() {
            continue;
        }
        // ±v give the same value, so fix the first sign
        for signs in 0u32..(1 << (support.len() - 1)) {
            let mut x = v.clone();
            for (k, &i) in support.iter().enumerate().skip(1) {
                if signs >> (k - 1) & 1 == 1 {
                    x[i] = -x[i];
                }
            }
            let x = CoeffVector::from_dense(depth, x);
            let val = norm_in(&m.space, &m.apply(&x)?)?;
            if val > best.0 {
                best = (val, x);
            }
        }
    }
    Ok(OpNormReport { value: best.0, argmax: best.1, exact: true })
}

/// Distance from `x` to the annihilator `{w : ⟨w, v⟩ = 0 for all v ∈ V}`,
/// with the closest point found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub distance: f64,
    pub witness: CoeffVector,
    /// True when `distance` is the exact minimum, false for an upper bound.
    pub exact: bool,
}

/// Minimises `‖x − w‖` over the annihilator of `vs`.
///
/// Polyhedral norms at small depth are solved exactly as an epigraph LP.
/// Otherwise the correction `d = x − w` is assembled from vectors of known
/// norm and the result is an upper bound.
pub fn distance_to_annihilator(
    x: &CoeffVector,
    vs: &[CoeffVector],
    space: &SpaceTag,
) -> Result<DistanceReport, OperatorError> {
    for v in vs {
        if v.truncation() != x.truncation() {
            return Err(SpaceError::TruncationMismatch { left: x.depth(), right: v.depth() }.into());
        }
    }
    let residual: Vec<f64> = vs.iter().map(|v| pairing(x, v)).collect::<Result<_, _>>()?;
    if residual.iter().all(|&r| r == 0.0) {
        return Ok(DistanceReport { distance: 0.0, witness: x.clone(), exact: true });
    }
    if let Some(lp) = epigraph_lp(x, vs, &residual, space)? {
        return Ok(lp);
    }
    constructive_distance(x, vs, &residual, space)
}

/// Exact distance LP: variables `d` (free), `u ≥ |d|`, `τ`, plus dual
/// multipliers for the dual-side norms.
fn epigraph_lp(
    x: &CoeffVector,
    vs: &[CoeffVector],
    residual: &[f64],
    space: &SpaceTag,
) -> Result<Option<DistanceReport>, OperatorError> {
    let depth = x.depth();
    let n = x.len();
    let cap = enumeration_cap();
    let branch_cap = cap.max(4);
    let p = match space.base().exponent() {
        Some(p) if p == 1.0 || p.is_infinite() => p,
        _ => return Ok(None),
    };
    let sets: Vec<Vec<Node>> = match space {
        SpaceTag::S { .. } | SpaceTag::D { .. } if p == 1.0 => {
            if depth > cap {
                return Ok(None);
            }
            let mut all = Vec::new();
            for_each_antichain(depth, cap, |a| {
                if !a.is_empty() {
                    all.push(a.to_vec())
                }
            })
            .map_err(SpaceError::from)?;
            all
        }
        SpaceTag::B { .. } | SpaceTag::BDual { .. } if p == 1.0 => {
            if depth > branch_cap {
                return Ok(None);
            }
            enumerate_branches(depth).collect()
        }
        SpaceTag::S { .. } | SpaceTag::B { .. } | SpaceTag::D { .. } | SpaceTag::BDual { .. } => {
            if n > 1 << 9 {
                return Ok(None);
            }
            Vec::new()
        }
        SpaceTag::LpSum { .. } => return Ok(None),
    };
    // primal-side norms bound each set sum by τ; dual-side norms are the
    // LP duals: ‖y‖ ≤ τ iff Σ_{C ∋ t} λ_C ≥ |y_t| with Σ λ_C ≤ τ
    let dual_side = space.is_dual_side();
    let n_lambda = if dual_side && p == 1.0 { sets.len() } else { 0 };
    let (d0, u0, tau, l0) = (0, n, 2 * n, 2 * n + 1);
    let nv = 2 * n + 1 + n_lambda;
    let mut obj = vec![0.0; nv];
    obj[tau] = 1.0;
    let mut lp = LinearProgram::minimize(obj);
    for i in 0..n {
        lp.set_kind(d0 + i, VarKind::Free);
        lp.add_sparse_row(&[(u0 + i, 1.0), (d0 + i, -1.0)], Cmp::Ge, 0.0);
        lp.add_sparse_row(&[(u0 + i, 1.0), (d0 + i, 1.0)], Cmp::Ge, 0.0);
    }
    for (v, &r) in vs.iter().zip(residual) {
        let row: Vec<(usize, f64)> =
            v.as_slice().iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(i, &a)| (d0 + i, a)).collect();
        lp.add_sparse_row(&row, Cmp::Eq, r);
    }
    if p.is_infinite() {
        // S, B: sup norm; D, B*: ℓ¹ norm
        if dual_side {
            let mut row: Vec<(usize, f64)> = (0..n).map(|i| (u0 + i, 1.0)).collect();
            row.push((tau, -1.0));
            lp.add_sparse_row(&row, Cmp::Le, 0.0);
        } else {
            for i in 0..n {
                lp.add_sparse_row(&[(u0 + i, 1.0), (tau, -1.0)], Cmp::Le, 0.0);
            }
        }
    } else if dual_side {
        for i in 0..n {
            let t = Node::from_dense_index(i);
            let mut row: Vec<(usize, f64)> =
                sets.iter().enumerate().filter(|(_, s)| s.contains(&t)).map(|(k, _)| (l0 + k, 1.0)).collect();
            row.push((u0 + i, -1.0));
            lp.add_sparse_row(&row, Cmp::Ge, 0.0);
        }
        let mut row: Vec<(usize, f64)> = (0..n_lambda).map(|k| (l0 + k, 1.0)).collect();
        row.push((tau, -1.0));
        lp.add_sparse_row(&row, Cmp::Le, 0.0);
    } else {
        for s in &sets {
            let mut row: Vec<(usize, f64)> = s.iter().map(|t| (u0 + t.dense_index(), 1.0)).collect();
            row.push((tau, -1.0));
            lp.add_sparse_row(&row, Cmp::Le, 0.0);
        }
    }
    let sol = lp.solve()?;
    let d = CoeffVector::from_dense(depth, sol.x[d0..d0 + n].to_vec());
    let mut w = x.clone();
    w.axpy(-1.0, &d);
    Ok(Some(DistanceReport { distance: sol.value.max(0.0), witness: w, exact: true }))
}

/// A correction vector together with an upper bound on its norm.
struct Candidate {
    g: CoeffVector,
    norm: f64,
}

fn correction_candidates(
    vs: &[CoeffVector],
    space: &SpaceTag,
    depth: u8,
) -> Result<Vec<Candidate>, OperatorError> {
    let base = space.base();
    let mut out: Vec<Candidate> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut touched = std::collections::BTreeSet::new();
    for v in vs {
        touched.extend(v.support());
    }
    for &t in &touched {
        if seen.insert(vec![t.dense_index() as u64]) {
            out.push(Candidate { g: CoeffVector::unit(depth, t), norm: 1.0 });
        }
    }
    let p = base.exponent();
    let q = p.map(conjugate);
    for v in vs {
        let mut push = |g: CoeffVector, norm: f64, out: &mut Vec<Candidate>| {
            let key: Vec<u64> = g.as_slice().iter().map(|x| x.to_bits()).collect();
            if norm.is_finite() && norm > 0.0 && seen.insert(key) {
                out.push(Candidate { g, norm });
            }
        };
        match (space, p, q) {
            (SpaceTag::S { .. }, Some(p), Some(q)) => {
                // unit ℓ^p vector on the antichain maximising ‖v|_A‖_{p'}
                let a = norm_s_report(&v.abs(), &BaseNorm::Lp(q))?;
                push(holder_aligned(v, &a.witness, p), 1.0, &mut out);
                // sign vector on the branch maximising Σ|v|: norm 1 in S^E
                let br = norm_b_report(&v.abs(), &BaseNorm::l1());
                push(sign_on(v, &br.witness), 1.0, &mut out);
            }
            (SpaceTag::B { .. }, Some(p), Some(q)) => {
                let br = norm_b_report(&v.abs(), &BaseNorm::Lp(q));
                push(holder_aligned(v, &br.witness, p), 1.0, &mut out);
                let a = norm_s_report(&v.abs(), &BaseNorm::l1())?;
                push(sign_on(v, &a.witness), 1.0, &mut out);
            }
            (SpaceTag::D { .. }, Some(p), Some(q)) => {
                let a = norm_s_report(&v.abs(), &BaseNorm::Lp(p))?;
                push(holder_aligned(v, &a.witness, q), 1.0, &mut out);
            }
            (SpaceTag::BDual { .. }, Some(p), Some(q)) => {
                let br = norm_b_report(&v.abs(), &BaseNorm::Lp(p));
                push(holder_aligned(v, &br.witness, q), 1.0, &mut out);
            }
            _ => {}
        }
    }
    Ok(out)
}

/// The vector on `set` with unit ℓ^q norm maximising the pairing with `v`.
fn holder_aligned(v: &CoeffVector, set: &[Node], q: f64) -> CoeffVector {
    let mut g = CoeffVector::zeros(v.depth());
    if q.is_infinite() {
        for &t in set {
            g.set(t, v.get(t).signum());
        }
        return g;
    }
    if q == 1.0 {
        if let Some(&t) = set.iter().max_by(|a, b| v.get(**a).abs().total_cmp(&v.get(**b).abs())) {
            g.set(t, v.get(t).signum());
        }
        return g;
    }
    let p = conjugate(q);
    let w: Vec<f64> = set.iter().map(|&t| v.get(t).abs().powf(p - 1.0)).collect();
    let nq = crate::base_norm::lp_norm(&w, q);
    if nq > 0.0 {
        for (&t, wi) in set.iter().zip(&w) {
            g.set(t, v.get(t).signum() * wi / nq);
        }
    }
    g
}

fn sign_on(v: &CoeffVector, set: &[Node]) -> CoeffVector {
    let mut g = CoeffVector::zeros(v.depth());
    for &t in set {
        g.set(t, v.get(t).signum());
    }
    g
}

fn small_support(x: &CoeffVector) -> bool {
    x.support().len() <= DIRECT_DUAL_SUPPORT
}

/// Largest correction support whose dual norm is re-evaluated directly.
const DIRECT_DUAL_SUPPORT: usize = 64;

fn constructive_distance(
    x: &CoeffVector,
    vs: &[CoeffVector],
    residual: &[f64],
    space: &SpaceTag,
) -> Result<DistanceReport, OperatorError> {
    let fallback = || -> Result<DistanceReport, OperatorError> {
        let distance = if !space.is_dual_side() || small_support(x) { norm_in(space, x)? } else { f64::INFINITY };
        Ok(DistanceReport { distance, witness: CoeffVector::zeros(x.depth()), exact: false })
    };
    let cands = correction_candidates(vs, space, x.depth())?;
    if cands.is_empty() {
        return fallback();
    }
    // minimise Σ |c_i|·‖g_i‖ subject to Σ c_i ⟨g_i, v_j⟩ = ⟨x, v_j⟩
    let m = cands.len();
    let mut obj = vec![0.0; 2 * m];
    for (i, c) in cands.iter().enumerate() {
        obj[i] = c.norm;
        obj[m + i] = c.norm;
    }
    let mut lp = LinearProgram::minimize(obj);
    for (v, &r) in vs.iter().zip(residual) {
        let mut row = Vec::with_capacity(2 * m);
        for (i, c) in cands.iter().enumerate() {
            let a = pairing(&c.g, v)?;
            if a != 0.0 {
                row.push((i, a));
                row.push((m + i, -a));
            }
        }
        lp.add_sparse_row(&row, Cmp::Eq, r);
    }
    let sol = match lp.solve() {
        Ok(s) => s,
        Err(LpError::Infeasible(_)) => return fallback(),
        Err(e) => return Err(e.into()),
    };
    let mut d = CoeffVector::zeros(x.depth());
    for (i, c) in cands.iter().enumerate() {
        let coef = sol.x[i] - sol.x[m + i];
        if coef != 0.0 {
            d.axpy(coef, &c.g);
        }
    }
    let small = small_support(&d);
    let direct = match space {
        SpaceTag::D { base } if small => dual_norm_d(&d, base).map(|r| r.value).ok(),
        SpaceTag::BDual { base } if small => dual_norm_b(&d, base).map(|r| r.value).ok(),
        SpaceTag::D { .. } | SpaceTag::BDual { .. } => None,
        _ => space.norm(&d).ok(),
    };
    let bound = direct.map_or(sol.value, |v| v.min(sol.value));
    let direct_x = if !space.is_dual_side() || small_support(x) {
        norm_in(space, x).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    if direct_x <= bound {
        return Ok(DistanceReport { distance: direct_x, witness: CoeffVector::zeros(x.depth()), exact: false });
    }
    let mut w = x.clone();
    w.axpy(-1.0, &d);
    Ok(DistanceReport { distance: bound, witness: w, exact: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1() -> SpaceTag {
        SpaceTag::S { base: BaseNorm::l1() }
    }

    fn n(s: &str) -> Node {
        s.parse().unwrap()
    }

    #[test]
    fn constructive_distance_never_undercuts_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for base in [BaseNorm::l1(), BaseNorm::linf()] {
            for space in [
                SpaceTag::S { base: base.clone() },
                SpaceTag::B { base: base.clone() },
                SpaceTag::D { base: base.clone() },
                SpaceTag::BDual { base: base.clone() },
            ] {
                for _ in 0..10 {
                    let v = CoeffVector::from_fn(3, |_| rng.sample(StandardNormal));
                    let x = CoeffVector::unit(3, Node::from_dense_index(rng.random_range(0..15)));
                    let r = [pairing(&x, &v).unwrap()];
                    let exact = epigraph_lp(&x, std::slice::from_ref(&v), &r, &space).unwrap().unwrap();
                    assert!(exact.exact);
                    let bound = constructive_distance(&x, std::slice::from_ref(&v), &r, &space).unwrap();
                    assert!(bound.distance >= exact.distance - 1e-9, "{space:?}: {} < {}", bound.distance, exact.distance);
                }
            }
        }
    }

    #[test]
    fn identity_embedding_gives_identity_operators() {
        let (b, q) = build_b_q(&SubtreeEmbedding::identity(2), Truncation::new(2), s1()).unwrap();
        assert_eq!(b, OperatorMatrix::identity(2, s1()));
        assert_eq!(q, OperatorMatrix::identity(2, s1()));
    }

    #[test]
    fn shift_embedding_b_is_isometric_q_contractive() {
        let e = SubtreeEmbedding::shift(3, n("0"));
        let (b, q) = build_b_q(&e, Truncation::new(4), s1()).unwrap();
        assert_eq!(q.compose(&b).unwrap().distance_to_identity(), 0.0);
        let x = CoeffVector::from_fn(3, |t| (t.dense_index() as f64 * 0.37).sin());
        let bx = b.apply(&x).unwrap();
        assert!((s1().norm(&bx).unwrap() - s1().norm(&x).unwrap()).abs() < 1e-12);
        let y = CoeffVector::from_fn(4, |t| (t.dense_index() as f64 * 0.91).cos());
        assert!(s1().norm(&q.apply(&y).unwrap()).unwrap() <= s1().norm(&y).unwrap() + 1e-12);
    }

    #[test]
    fn unverified_embedding_is_rejected() {
        let e = SubtreeEmbedding::new(1, vec![Node::ROOT, n("1"), n("0")]).unwrap();
        assert!(matches!(build_b_q(&e, Truncation::new(1), s1()), Err(OperatorError::UnverifiedEmbedding { .. })));
    }

    #[test]
    fn adjoint_is_transpose_on_dual_space() {
        let m = OperatorMatrix::from_fn(1, 2, s1(), |i, j| (i.dense_index() * 3 + j.dense_index()) as f64);
        let a = m.adjoint();
        assert_eq!(a.space(), &SpaceTag::D { base: BaseNorm::l1() });
        assert_eq!(a.adjoint(), m);
        let x = CoeffVector::from_fn(1, |t| t.dense_index() as f64 - 1.0);
        let y = CoeffVector::from_fn(2, |t| 0.5 * t.dense_index() as f64);
        let lhs = pairing(&m.apply(&x).unwrap(), &y).unwrap();
        let rhs = pairing(&x, &a.apply(&y).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn lower_norms_of_simple_operators() {
        let i = OperatorMatrix::identity(2, s1());
        assert!((op_norm_lower(&i, 20, 1).unwrap().value - 1.0).abs() < 1e-12);
        let two = OperatorMatrix::square(2, s1(), DMatrix::identity(7, 7) * 2.0).unwrap();
        assert!((op_norm_lower(&two, 20, 1).unwrap().value - 2.0).abs() < 1e-12);
        let d = CoeffVector::from_fn(2, |t| 1.0 + t.dense_index() as f64 * 0.25);
        for space in [s1(), SpaceTag::B { base: BaseNorm::l2() }] {
            let m = OperatorMatrix::diagonal(&d, space);
            assert!((op_norm_lower(&m, 20, 2).unwrap().value - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn s_ball_vertices_are_chain_indicators() {
        let rows = polyhedral_rows(&s1(), 2).unwrap();
        let verts = down_closed_vertices(&rows, 7);
        for v in &verts {
            let support: Vec<Node> = (0..7).filter(|&i| v[i] != 0.0).map(Node::from_dense_index).collect();
            assert!(v.iter().all(|&x| x == 0.0 || (x - 1.0).abs() < 1e-12));
            for (i, a) in support.iter().enumerate() {
                for b in &support[i + 1..] {
                    assert!(a.is_comparable(*b));
                }
            }
        }
        // empty chain, 7 singletons, 10 two-element chains, 4 three-element chains
        assert_eq!(verts.len(), 22);
    }

    #[test]
    fn exact_norms() {
        assert!((op_norm_exact_tiny(&OperatorMatrix::identity(1, s1())).unwrap().value - 1.0).abs() < 1e-12);
        let e = SubtreeEmbedding::shift(2, n("1"));
        for space in [s1(), SpaceTag::B { base: BaseNorm::l1() }, SpaceTag::D { base: BaseNorm::l1() }] {
            let (_, q) = build_b_q(&e, Truncation::new(3), space.clone()).unwrap();
            let q = q.with_space(space.clone());
            let err = op_norm_exact_tiny(&q).unwrap_err();
            assert!(matches!(err, OperatorError::Unsupported(_)));
            let (b, _) = build_b_q(&e, Truncation::new(3), space).unwrap();
            assert!((op_norm_exact_tiny(&b).unwrap().value - 1.0).abs() < 1e-9);
        }
        let m = OperatorMatrix::from_fn(1, 1, s1(), |i, j| ((i.dense_index() + 2 * j.dense_index()) as f64).sin());
        let exact = op_norm_exact_tiny(&m).unwrap().value;
        let lower = op_norm_lower(&m, 50, 3).unwrap().value;
        assert!(exact >= lower - 1e-12, "{exact} < {lower}");
    }

    #[test]
    fn distance_examples() {
        let x = CoeffVector::unit(1, Node::ROOT);
        let r = distance_to_annihilator(&x, &[], &s1()).unwrap();
        assert_eq!((r.distance, r.witness), (0.0, x.clone()));
        let r = distance_to_annihilator(&x, &[CoeffVector::unit(1, n("0"))], &s1()).unwrap();
        assert_eq!(r.distance, 0.0);
        let r = distance_to_annihilator(&x, &[CoeffVector::unit(1, Node::ROOT)], &s1()).unwrap();
        assert!(r.exact);
        assert!((r.distance - 1.0).abs() < 1e-12);
        assert_eq!(r.witness.get(Node::ROOT), 0.0);
    }

    #[test]
    fn exact_and_constructive_distances_agree_in_order() {
        let x = CoeffVector::from_fn(2, |t| 1.0 / (1.0 + t.dense_index() as f64));
        let v1 = CoeffVector::from_fn(2, |t| ((t.dense_index() * 7 % 5) as f64) - 2.0);
        let v2 = CoeffVector::unit(2, n("01"));
        for space in [s1(), SpaceTag::B { base: BaseNorm::l1() }, SpaceTag::D { base: BaseNorm::l1() }] {
            let vs = [v1.clone(), v2.clone()];
            let exact = distance_to_annihilator(&x, &vs, &space).unwrap();
            let res: Vec<f64> = vs.iter().map(|v| pairing(&x, v).unwrap()).collect();
            let upper = constructive_distance(&x, &vs, &res, &space).unwrap();
            assert!(exact.exact && !upper.exact);
            assert!(exact.distance <= upper.distance + 1e-9, "{}: {} > {}", space.label(), exact.distance, upper.distance);
            // the witness lies in the annihilator and realises the distance
            for v in &vs {
                assert!(pairing(&exact.witness, v).unwrap().abs() < 1e-9);
                assert!(pairing(&upper.witness, v).unwrap().abs() < 1e-9);
            }
            let mut d = x.clone();
            d.axpy(-1.0, &exact.witness);
            assert!((space.norm(&d).unwrap() - exact.distance).abs() < 1e-8);
        }
    }

    #[test]
    fn json_shapes() {
        let m = OperatorMatrix::identity(1, s1());
        let j = serde_json::to_string(&m).unwrap();
        assert!(j.starts_with(r#"{"depth":1,"space":{"space":"s""#), "{j}");
        assert_eq!(serde_json::from_str::<OperatorMatrix>(&j).unwrap(), m);
        let r = OperatorMatrix::zeros(0, 1, s1());
        let j = serde_json::to_string(&r).unwrap();
        assert!(j.contains("domain_depth"));
        assert_eq!(serde_json::from_str::<OperatorMatrix>(&j).unwrap(), r);
        assert!(serde_json::from_str::<OperatorMatrix>(r#"{"depth":1,"space":{"space":"s","base":{"kind":"lp","p":1}},"rows":[[1]]}"#).is_err());
    }
}
