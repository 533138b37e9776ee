//! The base space E: the ℓ^p family, user-supplied evaluation rules, and
//! sample-based checks of the structure the tree spaces rely on.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::tree::Node;

/// Relative tolerance for invariances that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-12;

pub type NormRule = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaseNormError {
    #[error("exponent p must lie in [1, inf], got {0}")]
    BadExponent(f64),
    #[error("no custom norm registered under {0:?}")]
    UnknownCustom(String),
    #[error("cannot parse base norm {0:?}; expected lp:<p> or custom:<name>")]
    Parse(String),
}

/// A named evaluation rule on finite scalar lists.
#[derive(Clone)]
pub struct CustomNorm {
    name: String,
    rule: Arc<NormRule>,
}

impl CustomNorm {
    pub fn new(name: impl Into<String>, rule: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CustomNorm { name: name.into(), rule: Arc::new(rule) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNorm").field("name", &self.name).finish_non_exhaustive()
    }
}

impl PartialEq for CustomNorm {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.rule, &other.rule)
    }
}

fn registry() -> &'static RwLock<HashMap<String, CustomNorm>> {
    static REGISTRY: OnceLock<RwLock<HashMap<String, CustomNorm>>> = OnceLock::new();
    REGISTRY.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Makes a custom rule resolvable by name, e.g. from JSON input.
pub fn register_custom_norm(norm: CustomNorm) {
    registry().write().expect("norm registry poisoned").insert(norm.name.clone(), norm);
}

pub fn lookup_custom_norm(name: &str) -> Option<CustomNorm> {
    registry().read().expect("norm registry poisoned").get(name).cloned()
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseNorm {
    /// ℓ^p with p ∈ [1, ∞]; `f64::INFINITY` stands for the sup norm.
    Lp(f64),
    Custom(CustomNorm),
}

impl BaseNorm {
    pub fn lp(p: f64) -> Result<Self, BaseNormError> {
        if p >= 1.0 {
            Ok(BaseNorm::Lp(p))
        } else {
            Err(BaseNormError::BadExponent(p))
        }
    }

    pub fn l1() -> Self {
        BaseNorm::Lp(1.0)
    }

    pub fn l2() -> Self {
        BaseNorm::Lp(2.0)
    }

    pub fn linf() -> Self {
        BaseNorm::Lp(f64::INFINITY)
    }

    pub fn custom(norm: CustomNorm) -> Self {
        BaseNorm::Custom(norm)
    }

    /// The exponent when this is an ℓ^p norm.
    pub fn exponent(&self) -> Option<f64> {
        match self {
            BaseNorm::Lp(p) => Some(*p),
            BaseNorm::Custom(_) => None,
        }
    }

    /// Hölder conjugate exponent, for ℓ^p norms.
    pub fn conjugate_exponent(&self) -> Option<f64> {
        self.exponent().map(conjugate)
    }

    pub fn is_lp(&self) -> bool {
        matches!(self, BaseNorm::Lp(_))
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        match self {
            BaseNorm::Lp(p) => lp_norm(values, *p),
            BaseNorm::Custom(c) => (c.rule)(values),
        }
    }

    /// Short label such as `lp:2`, `lp:inf` or `custom:name`.
    pub fn label(&self) -> String {
        match self {
            BaseNorm::Lp(p) if p.is_infinite() => "lp:inf".to_string(),
            BaseNorm::Lp(p) => format!("lp:{p}"),
            BaseNorm::Custom(c) => format!("custom:{}", c.name),
        }
    }
}

impl fmt::Display for BaseNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for BaseNorm {
    type Err = BaseNormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| BaseNormError::Parse(s.to_string()))?;
        match kind {
            "lp" | "l" => {
                let p = match arg {
                    "inf" | "infinity" => f64::INFINITY,
                    _ => arg.parse::<f64>().map_err(|_| BaseNormError::Parse(s.to_string()))?,
                };
                BaseNorm::lp(p)
            }
            "custom" => lookup_custom_norm(arg)
                .map(BaseNorm::Custom)
                .ok_or_else(|| BaseNormError::UnknownCustom(arg.to_string())),
            _ => Err(BaseNormError::Parse(s.to_string())),
        }
    }
}

pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

pub fn lp_norm(values: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else if p.is_infinite() {
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 2.0 {
        values.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum BaseNormRepr {
    Lp { p: Exponent },
    Custom { name: String },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Exponent {
    Finite(f64),
    Named(String),
}

impl Serialize for BaseNorm {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            BaseNorm::Lp(p) if p.is_infinite() => BaseNormRepr::Lp { p: Exponent::Named("inf".into()) },
            BaseNorm::Lp(p) => BaseNormRepr::Lp { p: Exponent::Finite(*p) },
            BaseNorm::Custom(c) => BaseNormRepr::Custom { name: c.name.clone() },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BaseNorm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match BaseNormRepr::deserialize(deserializer)? {
            BaseNormRepr::Lp { p: Exponent::Finite(p) } => BaseNorm::lp(p).map_err(D::Error::custom),
            BaseNormRepr::Lp { p: Exponent::Named(s) } if s == "inf" || s == "infinity" => Ok(BaseNorm::linf()),
            BaseNormRepr::Lp { p: Exponent::Named(s) } => Err(D::Error::custom(format!("bad exponent {s:?}"))),
            BaseNormRepr::Custom { name } => lookup_custom_norm(&name)
                .map(BaseNorm::Custom)
                .ok_or_else(|| D::Error::custom(BaseNormError::UnknownCustom(name))),
        }
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsymmetryReport {
    pub trials: usize,
    pub unconditional_violation: f64,
    pub spreading_violation: f64,
    pub passed: bool,
}

/// Samples coefficient lists, sign flips and increasing re-indexings and
/// reports the worst relative change in value.
pub fn check_subsymmetry(norm: &BaseNorm, trials: usize, seed: u64) -> SubsymmetryReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unconditional: f64 = 0.0;
    let mut spreading: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let k = rng.random_range(1..=8);
        let v: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let base = norm.eval(&v);

        let flipped: Vec<f64> = v.iter().map(|&x| if rng.random_bool(0.5) { -x } else { x }).collect();
        unconditional = unconditional.max(relative_gap(base, norm.eval(&flipped)));

        let len = k + rng.random_range(1..=8);
        let mut positions = sample(&mut rng, len, k).into_vec();
        positions.sort_unstable();
        let mut spread = vec![0.0; len];
        for (&pos, &x) in positions.iter().zip(&v) {
            spread[pos] = x;
        }
        spreading = spreading.max(relative_gap(base, norm.eval(&spread)));
    }
    // a single unit coordinate moved one slot is the smallest spreading test
    spreading = spreading.max(relative_gap(norm.eval(&[1.0, 0.0]), norm.eval(&[0.0, 1.0])));
    SubsymmetryReport {
        trials: trials.max(1),
        unconditional_violation: unconditional,
        spreading_violation: spreading,
        passed: unconditional <= EXACT_TOL && spreading <= EXACT_TOL,
    }
}

/// Vectors `z_1, …, z_N` whose supports are pairwise ⊑-incomparable.
#[derive(Debug, Clone, PartialEq)]
pub struct IncomparableFamily {
    pub parts: Vec<Vec<(Node, f64)>>,
}

impl IncomparableFamily {
    pub fn new(parts: Vec<Vec<(Node, f64)>>) -> Self {
        IncomparableFamily { parts }
    }

    pub fn supports_incomparable(&self) -> bool {
        for (j, a) in self.parts.iter().enumerate() {
            for b in &self.parts[j + 1..] {
                if a.iter().any(|(s, _)| b.iter().any(|(t, _)| s.is_comparable(*t))) {
                    return false;
                }
            }
        }
        true
    }

    /// Entries of `z` listed in standard order.
    fn ordered(entries: impl IntoIterator<Item = (Node, f64)>) -> Vec<f64> {
        let mut all: Vec<(Node, f64)> = entries.into_iter().collect();
        all.sort_by(|a, b| a.0.cmp(&b.0));
        all.into_iter().map(|(_, v)| v).collect()
    }

    pub fn part_norm(&self, norm: &BaseNorm, j: usize) -> f64 {
        norm.eval(&Self::ordered(self.parts[j].iter().copied()))
    }

    pub fn sum_norm(&self, norm: &BaseNorm) -> f64 {
        norm.eval(&Self::ordered(self.parts.iter().flatten().copied()))
    }

    /// Random family: `count` cones below one level of the tree, each
    /// carrying Gaussian values on a random subset of its nodes.
    pub fn random(rng: &mut impl Rng, count: usize, extra_depth: u8) -> Self {
        let level = (usize::BITS - count.saturating_sub(1).leading_zeros()) as u8;
        let roots = sample(rng, 1usize << level, count).into_vec();
        let mut roots: Vec<Node> = roots.into_iter().map(|b| Node::new(level, b as u32)).collect();
        roots.sort();
        let parts = roots
            .into_iter()
            .map(|root| {
                let mut part: Vec<(Node, f64)> = Vec::new();
                for t in root.cone(level + extra_depth) {
                    if rng.random_bool(0.4) {
                        part.push((t, rng.sample(StandardNormal)));
                    }
                }
                if part.is_empty() {
                    part.push((root, rng.sample(StandardNormal)));
                }
                part
            })
            .collect();
        IncomparableFamily { parts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerEstimateReport {
    pub r: f64,
    pub declared: f64,
    pub constant: f64,
    pub families: usize,
    pub passed: bool,
}

/// Worst ratio ‖Σz_j‖ / (Σ‖z_j‖^r)^{1/r} over the given families, compared
/// with the declared constant.
pub fn check_lower_r_estimate(
    norm: &BaseNorm,
    r: f64,
    declared: f64,
    families: &[IncomparableFamily],
) -> LowerEstimateReport {
    let mut worst = f64::INFINITY;
    for fam in families {
        let parts: Vec<f64> = (0..fam.parts.len()).map(|j| fam.part_norm(norm, j)).collect();
        let denom = lp_norm(&parts, r);
        if denom == 0.0 {
            continue;
        }
        worst = worst.min(fam.sum_norm(norm) / denom);
    }
    LowerEstimateReport {
        r,
        declared,
        constant: worst,
        families: families.len(),
        passed: worst >= declared * (1.0 - EXACT_TOL),
    }
}

/// Amplitude grid for the single-atom brute force below.
const ATOM_GRID: [f64; 3] = [0.0, 0.5, 1.0];

/// For `N = 1..=n_max`, a brute-force lower estimate of
/// sup{ Σ_j N⁻¹‖z_j‖ : ‖Σ z_j‖ = 1 } over vectors carried by one atom at the
/// root of each of `N` incomparable cones, amplitudes from a fixed grid.
pub fn estimate_incomparably_non_c0(norm: &BaseNorm, n_max: usize) -> Vec<f64> {
    assert!(n_max <= 12, "brute force is limited to N ≤ 12");
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let level = (usize::BITS - (n - 1).leading_zeros()) as u8;
        let roots: Vec<Node> = (0..n as u32).map(|b| Node::new(level, b)).collect();
        let a = 1.0 / n as f64;
        let mut best: f64 = 0.0;
        let mut digits = vec![0usize; n];
        loop {
            // odometer over ATOM_GRID^n
            let mut i = 0;
            while i < n {
                digits[i] += 1;
                if digits[i] < ATOM_GRID.len() {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            let fam = IncomparableFamily::new(
                roots.iter().zip(&digits).map(|(&t, &d)| vec![(t, ATOM_GRID[d])]).collect(),
            );
            let total = fam.sum_norm(norm);
            if total == 0.0 {
                continue;
            }
            let value: f64 = (0..n).map(|j| a * fam.part_norm(norm, j)).sum::<f64>() / total;
            best = best.max(value);
        }
        out.push(best);
    }
    out
}
