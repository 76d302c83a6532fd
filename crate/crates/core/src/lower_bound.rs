//! Numeric evaluation of the minimax lower bound
//!
//!   R* >= P{chi^2_m <= m a^2} (1 - 1/2 sqrt(E cosh^m(nu_a Z) - 1)),
//!
//! where nu_a = rho a^2 / (1 - rho^2) and Z is the overlap of two
//! independent uniform draws from the class.  The expectation is
//! evaluated in log space from the exact overlap pmf.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::model::{ClassKind, ModelSpec};
use crate::numeric::{bisect_increasing, chi2_cdf, log_cosh, log_sum_exp};
use crate::{Error, Result};

/// Largest rho the bound is stated for.
pub const THEOREM_RHO_MAX: f64 = 0.9;

/// The smallest admissible value of the free parameter `a`.
pub fn a_min() -> f64 {
    8.0f64.sqrt()
}

/// pmf of Z = |S intersect S'| on {0, ..., k}.
///
/// `exact` is false when the entries are the dominating upper-bound
/// envelope rather than a true distribution (matching model, k > 20).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapDistribution {
    pub pmf: Vec<f64>,
    pub class_kind: ClassKind,
    pub n: usize,
    pub k: usize,
    pub exact: bool,
}

impl OverlapDistribution {
    pub fn prob(&self, z: usize) -> f64 {
        self.pmf.get(z).copied().unwrap_or(0.0)
    }
}

/// Exact overlap pmf per class: hypergeometric for cliques, the
/// fixed-point distribution of a random permutation for matchings,
/// direct convolution over start offsets for blocks.
pub fn overlap_distribution(spec: &ModelSpec) -> Result<OverlapDistribution> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    let (mut pmf, exact) = match spec.class_kind {
        ClassKind::Clique => (hypergeometric_pmf(n, k), true),
        ClassKind::Block | ClassKind::BlockNoWrap => {
            (block_overlap_pmf(n, k, spec.class_kind == ClassKind::Block), true)
        }
        ClassKind::Matching => {
            if k <= 20 {
                (fixed_point_pmf_exact(k), true)
            } else {
                (fixed_point_pmf_envelope(k), false)
            }
        }
    };
    if exact {
        // remove the ~1e-15 normalization residue of the log-gamma
        // route; downstream sqrt(expm1(log moment)) amplifies it
        let total: f64 = pmf.iter().sum();
        for p in &mut pmf {
            *p /= total;
        }
    }
    Ok(OverlapDistribution { pmf, class_kind: spec.class_kind, n, k, exact })
}

/// P{Z = z} = C(k, z) C(n-k, k-z) / C(n, k) via log-gamma.
fn hypergeometric_pmf(n: usize, k: usize) -> Vec<f64> {
    use crate::numeric::ln_gamma;
    let ln_choose = |a: usize, b: usize| -> f64 {
        if b > a {
            return f64::NEG_INFINITY;
        }
        ln_gamma(a as f64 + 1.0) - ln_gamma(b as f64 + 1.0) - ln_gamma((a - b) as f64 + 1.0)
    };
    let denom = ln_choose(n, k);
    (0..=k)
        .map(|z| {
            let lp = ln_choose(k, z) + ln_choose(n - k, k - z) - denom;
            if lp.is_finite() {
                lp.exp()
            } else {
                0.0
            }
        })
        .collect()
}

/// Overlap pmf of two uniform intervals of length k; by translation
/// invariance, fix the first at start 0 and average over the second.
fn block_overlap_pmf(n: usize, k: usize, cyclic: bool) -> Vec<f64> {
    let starts: Vec<usize> = if cyclic { (0..n).collect() } else { (0..=n - k).collect() };
    let member = |idx: usize, start: usize| -> bool {
        if cyclic {
            (idx + n - start) % n < k
        } else {
            idx >= start && idx < start + k
        }
    };
    let mut counts = vec![0usize; k + 1];
    for &s1 in &starts {
        for &s2 in &starts {
            let overlap = (0..n).filter(|&i| member(i, s1) && member(i, s2)).count();
            counts[overlap] += 1;
        }
    }
    let total = (starts.len() * starts.len()) as f64;
    counts.into_iter().map(|c| c as f64 / total).collect()
}

/// Exact fixed-point pmf in rational arithmetic:
/// P{Z = z} = (1/z!) sum_{s=0}^{k-z} (-1)^s / s!.
fn fixed_point_pmf_exact(k: usize) -> Vec<f64> {
    let fact = |j: usize| -> BigInt {
        (1..=j).fold(BigInt::one(), |acc, v| acc * BigInt::from(v))
    };
    (0..=k)
        .map(|z| {
            let mut alt = BigRational::zero();
            for s in 0..=(k - z) {
                let term = BigRational::new(BigInt::one(), fact(s));
                if s % 2 == 0 {
                    alt += term;
                } else {
                    alt -= term;
                }
            }
            let p = alt / BigRational::from(fact(z));
            assert!(!p.is_negative());
            p.to_f64().unwrap()
        })
        .collect()
}

/// The displayed upper-bound envelope (1/z!)(1/e + 1/(k-z+1)!), used
/// beyond the exact-rational range; a valid dominating measure for the
/// bound computation but not a normalized pmf.
fn fixed_point_pmf_envelope(k: usize) -> Vec<f64> {
    use crate::numeric::ln_gamma;
    (0..=k)
        .map(|z| {
            let ln_zfact = ln_gamma(z as f64 + 1.0);
            let inv_e = (-1.0f64).exp();
            let inv_tail = (-ln_gamma((k - z) as f64 + 2.0)).exp();
            (-ln_zfact).exp() * (inv_e + inv_tail)
        })
        .collect()
}

/// How E cosh^m(nu_a Z) is evaluated for the block model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockMomentMode {
    /// Default: the exact overlap pmf (tighter).
    ExactPmf,
    /// The dominating two-point bound
    /// E cosh^m(nu_a Z) <= 1 + (2k/n) cosh^m(nu_a k).
    ZTilde,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerBoundResult {
    pub bound: f64,
    pub a_used: f64,
    /// P{chi^2_m <= m a^2}.
    pub chi_factor: f64,
    /// E cosh^m(nu_a Z); may be +inf when the expectation overflows f64.
    pub moment_term: f64,
    pub rho: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub class_kind: ClassKind,
}

/// The simplified display at a = sqrt(8): 1/2 - 1/4 sqrt(moment - 1),
/// which drops the chi-square factor.
pub fn simplified_bound(moment_term: f64) -> f64 {
    0.5 - 0.25 * (moment_term - 1.0).sqrt()
}

fn log_moment(dist: &OverlapDistribution, nu: f64, m: usize) -> f64 {
    let terms: Vec<f64> = dist
        .pmf
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(z, &p)| p.ln() + m as f64 * log_cosh(nu * z as f64))
        .collect();
    log_sum_exp(&terms)
}

fn bound_at(spec: &ModelSpec, dist: &OverlapDistribution, mode: BlockMomentMode, a: f64) -> Result<LowerBoundResult> {
    let nu = spec.rho * a * a / (1.0 - spec.rho * spec.rho);
    let m = spec.m;
    let lm = match (spec.class_kind, mode) {
        (ClassKind::Block | ClassKind::BlockNoWrap, BlockMomentMode::ZTilde) => {
            // 1 + (2k/n) cosh^m(nu k), from P{S cap S' nonempty} <= 2k/n
            let tail = (2.0 * spec.k as f64 / spec.n as f64).ln()
                + m as f64 * log_cosh(nu * spec.k as f64);
            log_sum_exp(&[0.0, tail])
        }
        _ => log_moment(dist, nu, m),
    };
    let moment_term = lm.exp(); // may be inf; handled below
    let chi_factor = chi2_cdf(m as u32, m as f64 * a * a)?;
    // bound = chi * max(0, 1 - 0.5 sqrt(moment - 1)); computed from the
    // log moment to keep the near-overflow region monotone
    let deficit = if lm <= 0.0 {
        0.0
    } else {
        0.5 * (lm.exp_m1()).sqrt()
    };
    let bound = chi_factor * (1.0 - deficit).max(0.0);
    Ok(LowerBoundResult {
        bound,
        a_used: a,
        chi_factor,
        moment_term,
        rho: spec.rho,
        n: spec.n,
        m: spec.m,
        k: spec.k,
        class_kind: spec.class_kind,
    })
}

/// Evaluates the lower bound at the given `a`, or maximizes over a
/// log-spaced grid in [sqrt(8), 1000] refined by golden section when
/// `a` is absent.
pub fn theorem1_bound(spec: &ModelSpec, a: Option<f64>) -> Result<LowerBoundResult> {
    theorem1_bound_with_mode(spec, a, BlockMomentMode::ExactPmf)
}

pub fn theorem1_bound_with_mode(
    spec: &ModelSpec,
    a: Option<f64>,
    mode: BlockMomentMode,
) -> Result<LowerBoundResult> {
    spec.validate()?;
    if spec.rho >= THEOREM_RHO_MAX {
        return Err(Error::Domain(format!(
            "rho = {} outside the bound's range [0, {THEOREM_RHO_MAX})",
            spec.rho
        )));
    }
    let dist = overlap_distribution(spec)?;
    if let Some(a) = a {
        if a < a_min() - 1e-12 {
            return Err(Error::Domain(format!("a = {a} below sqrt(8)")));
        }
        return bound_at(spec, &dist, mode, a);
    }
    // grid search then golden-section refinement around the best point
    let (lo, hi) = (a_min(), 1000.0f64);
    let grid_n = 64;
    let mut best_idx = 0;
    let mut best = bound_at(spec, &dist, mode, lo)?;
    let grid: Vec<f64> = (0..grid_n)
        .map(|i| {
            let t = i as f64 / (grid_n - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        })
        .collect();
    for (i, &av) in grid.iter().enumerate().skip(1) {
        let r = bound_at(spec, &dist, mode, av)?;
        if r.bound > best.bound {
            best = r;
            best_idx = i;
        }
    }
    let mut left = grid[best_idx.saturating_sub(1)];
    let mut right = grid[(best_idx + 1).min(grid_n - 1)];
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = right - phi * (right - left);
        let x2 = left + phi * (right - left);
        let f1 = bound_at(spec, &dist, mode, x1)?.bound;
        let f2 = bound_at(spec, &dist, mode, x2)?.bound;
        if f1 < f2 {
            left = x1;
        } else {
            right = x2;
        }
        if right - left < 1e-10 * right {
            break;
        }
    }
    let refined = bound_at(spec, &dist, mode, 0.5 * (left + right))?;
    Ok(if refined.bound >= best.bound { refined } else { best })
}

/// w(rho): the unique c > 0 with log(cosh(c))/c = rho.
pub fn w_of_rho(rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) || rho == 0.0 {
        return Err(Error::Domain(format!("w_of_rho: rho = {rho} outside (0, 1)")));
    }
    let g = |c: f64| {
        if c < 1e-12 {
            c / 2.0 // log cosh c ~ c^2/2
        } else {
            log_cosh(c) / c
        }
    };
    let mut hi = 1.0;
    while g(hi) < rho {
        hi *= 2.0;
    }
    bisect_increasing(g, 0.0, hi, rho, 1e-12)
}
