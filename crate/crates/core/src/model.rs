//! Correlation classes and data generation.
//!
//! Three families of anomalous sets are supported: cyclic block
//! intervals, arbitrary k-subsets (cliques), and perfect matchings of
//! the complete bipartite graph K_{k,k}.  Under the alternative the
//! coordinates inside the anomalous set are equicorrelated at level
//! `rho`, generated through the shared-factor representation
//! X_{t,i} = sqrt(rho) V_t + sqrt(1-rho) Y_{t,i}.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numeric::ln_gamma;
use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// Which family the anomalous set ranges over.
///
/// `Block` intervals wrap around cyclically, so the class has exactly
/// `n` members.  `BlockNoWrap` is the non-wrapping variant with
/// `n - k + 1` members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    Block,
    BlockNoWrap,
    Clique,
    Matching,
}

impl ClassKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "block" => Ok(ClassKind::Block),
            "block-nowrap" | "blocknowrap" => Ok(ClassKind::BlockNoWrap),
            "clique" => Ok(ClassKind::Clique),
            "matching" => Ok(ClassKind::Matching),
            other => Err(Error::InvalidSpec(format!("unknown class kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassKind::Block => "block",
            ClassKind::BlockNoWrap => "block-nowrap",
            ClassKind::Clique => "clique",
            ClassKind::Matching => "matching",
        }
    }
}

/// Maximum correlation level accepted at the API boundary; sqrt(1-rho)
/// degrades numerically closer to 1.
pub const RHO_MAX: f64 = 0.95;

/// Model parameters: class, dimension `n`, sample size `m`, anomalous
/// set size `k`, and correlation level `rho` (0 denotes the null).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub class_kind: ClassKind,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub rho: f64,
}

impl ModelSpec {
    pub fn new(class_kind: ClassKind, n: usize, m: usize, k: usize, rho: f64) -> Result<Self> {
        let spec = ModelSpec { class_kind, n, m, k, rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidSpec("n and m must be positive".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidSpec(format!("k = {} must be >= 2", self.k)));
        }
        if self.k > self.n {
            return Err(Error::InvalidSpec(format!("k = {} exceeds n = {}", self.k, self.n)));
        }
        if self.class_kind == ClassKind::Matching && self.n != self.k * self.k {
            return Err(Error::InvalidSpec(format!(
                "matching model requires n = k^2, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if !(0.0..=RHO_MAX).contains(&self.rho) {
            return Err(Error::InvalidSpec(format!(
                "rho = {} outside [0, {RHO_MAX}]",
                self.rho
            )));
        }
        Ok(())
    }

    /// Same parameters with rho = 0 (the null distribution).
    pub fn null(&self) -> ModelSpec {
        ModelSpec { rho: 0.0, ..*self }
    }

    pub fn is_null(&self) -> bool {
        self.rho == 0.0
    }
}

/// A member of the class: `k` sorted distinct indices in [0, n).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnomalousSet {
    indices: Vec<usize>,
}

impl AnomalousSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        AnomalousSet { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn overlap(&self, other: &AnomalousSet) -> usize {
        // both sorted
        let (mut i, mut j, mut c) = (0, 0, 0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    c += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        c
    }
}

/// Exact and log class cardinality.  The exact count is dropped when it
/// does not fit in u128.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cardinality {
    pub exact: Option<u128>,
    pub ln: f64,
}

/// |C| for the given spec.
pub fn class_cardinality(spec: &ModelSpec) -> Result<Cardinality> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    match spec.class_kind {
        ClassKind::Block => Ok(Cardinality { exact: Some(n as u128), ln: (n as f64).ln() }),
        ClassKind::BlockNoWrap => {
            let c = (n - k + 1) as u128;
            Ok(Cardinality { exact: Some(c), ln: (c as f64).ln() })
        }
        ClassKind::Clique => {
            let ln = ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0)
                - ln_gamma((n - k) as f64 + 1.0);
            Ok(Cardinality { exact: binomial_u128(n, k), ln })
        }
        ClassKind::Matching => {
            let ln = ln_gamma(k as f64 + 1.0);
            let mut exact: Option<u128> = Some(1);
            for i in 2..=k {
                exact = exact.and_then(|v| v.checked_mul(i as u128));
            }
            Ok(Cardinality { exact, ln })
        }
    }
}

/// C(n, k) by the multiplicative formula, None on overflow.
fn binomial_u128(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

/// Cyclic interval {start, ..., start + k - 1} mod n.
fn block_interval(start: usize, n: usize, k: usize) -> AnomalousSet {
    AnomalousSet::new((0..k).map(|j| (start + j) % n).collect())
}

/// Matching for permutation sigma: edge (r, sigma(r)) maps to index
/// r * k + sigma(r).
fn matching_set(perm: &[usize], k: usize) -> AnomalousSet {
    AnomalousSet::new(perm.iter().enumerate().map(|(r, &c)| r * k + c).collect())
}

/// Draws a set uniformly at random from the class; deterministic given
/// the seed.
pub fn sample_anomalous_set(spec: &ModelSpec, seed: u64) -> Result<AnomalousSet> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let (n, k) = (spec.n, spec.k);
    Ok(match spec.class_kind {
        ClassKind::Block => block_interval(rng.gen_range(0..n), n, k),
        ClassKind::BlockNoWrap => {
            let start = rng.gen_range(0..n - k + 1);
            AnomalousSet::new((start..start + k).collect())
        }
        ClassKind::Clique => {
            let idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
            AnomalousSet::new(idx)
        }
        ClassKind::Matching => {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(&mut rng);
            matching_set(&perm, k)
        }
    })
}

/// Lists every member of the class once, in canonical order.  Fails if
/// the cardinality exceeds `cap`.
pub fn enumerate_class(spec: &ModelSpec, cap: usize) -> Result<Vec<AnomalousSet>> {
    spec.validate()?;
    let card = class_cardinality(spec)?;
    match card.exact {
        Some(c) if c <= cap as u128 => {}
        _ => {
            return Err(Error::BudgetExceeded(format!(
                "class cardinality (ln = {:.3}) exceeds cap {cap}",
                card.ln
            )))
        }
    }
    let (n, k) = (spec.n, spec.k);
    Ok(match spec.class_kind {
        ClassKind::Block => (0..n).map(|s| block_interval(s, n, k)).collect(),
        ClassKind::BlockNoWrap => (0..=n - k)
            .map(|s| AnomalousSet::new((s..s + k).collect()))
            .collect(),
        ClassKind::Clique => {
            let mut out = Vec::new();
            let mut comb: Vec<usize> = (0..k).collect();
            loop {
                out.push(AnomalousSet::new(comb.clone()));
                // next lexicographic combination
                let mut i = k;
                loop {
                    if i == 0 {
                        return Ok(out);
                    }
                    i -= 1;
                    if comb[i] < n - (k - i) {
                        comb[i] += 1;
                        for j in i + 1..k {
                            comb[j] = comb[j - 1] + 1;
                        }
                        break;
                    }
                }
            }
        }
        ClassKind::Matching => {
            let mut out = Vec::new();
            let mut perm: Vec<usize> = (0..k).collect();
            loop {
                out.push(matching_set(&perm, k));
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            out
        }
    })
}

/// In-place lexicographic successor; false once the last permutation is
/// reached.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Checks membership of `set` in the spec's class.
pub fn set_in_class(spec: &ModelSpec, set: &AnomalousSet) -> bool {
    let idx = set.indices();
    if idx.len() != spec.k {
        return false;
    }
    if idx.iter().any(|&i| i >= spec.n) {
        return false;
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    match spec.class_kind {
        ClassKind::Clique => true,
        ClassKind::Block => (0..spec.n).any(|s| block_interval(s, spec.n, spec.k) == *set),
        ClassKind::BlockNoWrap => idx[spec.k - 1] - idx[0] == spec.k - 1,
        ClassKind::Matching => {
            let k = spec.k;
            let mut rows = vec![false; k];
            let mut cols = vec![false; k];
            for &i in idx {
                let (r, c) = (i / k, i % k);
                if rows[r] || cols[c] {
                    return false;
                }
                rows[r] = true;
                cols[c] = true;
            }
            true
        }
    }
}

/// An m x n observation matrix, row-major by time index t.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    values: Vec<f64>,
    pub spec: ModelSpec,
    pub truth: Option<AnomalousSet>,
    pub seed: u64,
}

impl SampleMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, spec: ModelSpec) -> Result<Self> {
        if rows.len() != spec.m || rows.iter().any(|r| r.len() != spec.n) {
            return Err(Error::Mismatch("row dimensions do not match spec".into()));
        }
        Ok(SampleMatrix {
            values: rows.into_iter().flatten().collect(),
            spec,
            truth: None,
            seed: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.spec.n;
        &self.values[t * n..(t + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column-major copy; pairwise statistics want contiguous columns.
    pub fn columns(&self) -> Vec<f64> {
        let (m, n) = (self.spec.m, self.spec.n);
        let mut cols = vec![0.0; m * n];
        for t in 0..m {
            let row = self.row(t);
            for i in 0..n {
                cols[i * m + t] = row[i];
            }
        }
        cols
    }
}

/// Generates a sample under the spec.  `set` must be present iff
/// rho > 0 and must belong to the class.  Deterministic given the seed.
pub fn generate_sample(
    spec: &ModelSpec,
    set: Option<&AnomalousSet>,
    seed: u64,
) -> Result<SampleMatrix> {
    spec.validate()?;
    match (spec.rho > 0.0, set) {
        (true, None) => {
            return Err(Error::Mismatch("rho > 0 requires an anomalous set".into()))
        }
        (false, Some(_)) => {
            return Err(Error::Mismatch("rho = 0 does not take an anomalous set".into()))
        }
        (true, Some(s)) if !set_in_class(spec, s) => {
            return Err(Error::Mismatch("set does not belong to the spec's class".into()))
        }
        _ => {}
    }
    let (m, n) = (spec.m, spec.n);
    let mut rng = rng_from_seed(seed);
    let mut values = vec![0.0; m * n];
    for v in values.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    if let Some(s) = set {
        let sr = spec.rho.sqrt();
        let sc = (1.0 - spec.rho).sqrt();
        for t in 0..m {
            let v_t: f64 = rng.sample(StandardNormal);
            for &i in s.indices() {
                let y: f64 = rng.sample(StandardNormal);
                values[t * n + i] = sr * v_t + sc * y;
            }
        }
    }
    Ok(SampleMatrix {
        values,
        spec: *spec,
        truth: set.cloned(),
        seed,
    })
}
