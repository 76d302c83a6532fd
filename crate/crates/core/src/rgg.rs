//! Random geometric graphs on high-dimensional unit spheres: point
//! generation, the p-quantile edge threshold, an exact branch-and-bound
//! clique solver with greedy-coloring bounds, the median-clique
//! experiment, and the clique-based detection test.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

use crate::model::SampleMatrix;
use crate::numeric::bisect_increasing;
use crate::seed::{derive_seed, rng_from_seed, StreamTag};
use crate::{Error, Result};

/// Undirected graph over n vertices with packed bitset adjacency rows.
#[derive(Debug, Clone)]
pub struct AdjacencyGraph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl AdjacencyGraph {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        AdjacencyGraph { n, words, rows: vec![0; n * words] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        assert!(i != j && i < self.n && j < self.n);
        self.rows[i * self.words + j / 64] |= 1 << (j % 64);
        self.rows[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn neighbors(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    pub fn complete(n: usize) -> Self {
        let mut g = AdjacencyGraph::new(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        g
    }
}

/// n i.i.d. uniform points on the unit sphere S^{d-1}, as normalized
/// Gaussian vectors.  Deterministic given the seed.
pub fn sample_sphere_points(n: usize, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if d < 1 {
        return Err(Error::Domain("sphere dimension must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-150 {
                points.push(v.into_iter().map(|x| x / norm).collect());
                break;
            }
            // probability-zero degenerate draw; resample
        }
    }
    Ok(points)
}

/// The threshold t with P{(Z_1, Z_2) >= t} = p for two independent
/// uniform sphere points in dimension d.
///
/// With T = cos(theta), theta has density proportional to
/// sin^{d-2}(theta) on [0, pi]; the CDF is integrated by Simpson's rule
/// and inverted by bisection.
pub fn edge_threshold(p: f64, d: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(Error::Domain(format!("p = {p} outside (0, 1)")));
    }
    if d < 1 {
        return Err(Error::Domain("d must be >= 1".into()));
    }
    if (p - 0.5).abs() < 1e-15 {
        return Ok(0.0); // symmetry of the sphere, any d
    }
    if d == 1 {
        // inner product is +/-1 with equal probability; only p = 1/2 is attainable
        return Err(Error::Domain("d = 1 admits only p = 1/2".into()));
    }
    let exponent = (d as f64 - 2.0).max(0.0);
    let integrand = |theta: f64| theta.sin().powf(exponent);
    let total = simpson(&integrand, 0.0, std::f64::consts::PI, 4096);
    // P{T >= t} = int_0^{arccos t} / total, increasing in arccos t
    let target = p * total;
    let theta_star = bisect_increasing(
        |theta| simpson(&integrand, 0.0, theta, 4096),
        0.0,
        std::f64::consts::PI,
        target,
        1e-12,
    )?;
    Ok(theta_star.cos())
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let x = a + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// Edge iff inner product >= t (ties connect).
pub fn build_rgg(points: &[Vec<f64>], t: f64) -> Result<AdjacencyGraph> {
    let n = points.len();
    if n > 0 {
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::Mismatch("inconsistent point dimensions".into()));
        }
    }
    let mut g = AdjacencyGraph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum();
            if dot >= t {
                g.add_edge(i, j);
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CliqueResult {
    pub omega: usize,
    pub witness: Vec<usize>,
    /// true when the search completed within budget (omega is proven
    /// maximum), false when it was truncated (omega is a lower bound).
    pub exact: bool,
}

struct CliqueSearch<'a> {
    g: &'a AdjacencyGraph,
    best: Vec<usize>,
    current: Vec<usize>,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl<'a> CliqueSearch<'a> {
    fn run(g: &'a AdjacencyGraph, budget: Option<Duration>) -> (Vec<usize>, bool) {
        let words = g.n.div_ceil(64);
        let mut s = CliqueSearch {
            g,
            best: Vec::new(),
            current: Vec::new(),
            deadline: budget.map(|b| Instant::now() + b),
            timed_out: false,
        };
        let mut all = vec![u64::MAX; words];
        if g.n % 64 != 0 {
            all[words - 1] = (1u64 << (g.n % 64)) - 1;
        }
        if g.n == 0 {
            return (Vec::new(), true);
        }
        s.expand(&all);
        (s.best.clone(), !s.timed_out)
    }

    fn expand(&mut self, candidates: &[u64]) {
        if self.timed_out {
            return;
        }
        if let Some(dl) = self.deadline {
            if Instant::now() > dl {
                self.timed_out = true;
                return;
            }
        }
        let verts: Vec<usize> = bits(candidates).collect();
        if verts.is_empty() {
            if self.current.len() > self.best.len() {
                self.best = self.current.clone();
            }
            return;
        }
        // greedy coloring for the pruning bound; vertices grouped into
        // independent color classes, processed high color first
        let mut colors: Vec<(usize, usize)> = Vec::with_capacity(verts.len()); // (color, vertex)
        let mut uncolored = candidates.to_vec();
        let mut color = 0;
        while first_bit(&uncolored).is_some() {
            color += 1;
            let mut class_avail = uncolored.clone();
            while let Some(v) = first_bit(&class_avail) {
                colors.push((color, v));
                clear_bit(&mut uncolored, v);
                clear_bit(&mut class_avail, v);
                for (w, nb) in class_avail.iter_mut().zip(self.g.neighbors(v)) {
                    *w &= !nb;
                }
            }
        }
        let mut pool = candidates.to_vec();
        for &(c, v) in colors.iter().rev() {
            if self.current.len() + c <= self.best.len() {
                return;
            }
            self.current.push(v);
            let next: Vec<u64> = pool.iter().zip(self.g.neighbors(v)).map(|(a, b)| a & b).collect();
            if self.current.len() + count(&next) > self.best.len() {
                self.expand(&next);
            } else if self.current.len() > self.best.len() {
                self.best = self.current.clone();
            }
            self.current.pop();
            clear_bit(&mut pool, v);
            if self.timed_out {
                return;
            }
        }
    }
}

fn bits(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                None
            } else {
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            }
        })
    })
}

fn first_bit(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .position(|&w| w != 0)
        .map(|wi| wi * 64 + words[wi].trailing_zeros() as usize)
}

fn clear_bit(words: &mut [u64], v: usize) {
    words[v / 64] &= !(1u64 << (v % 64));
}

fn count(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

/// Maximum clique by branch and bound with greedy-coloring bounds.
/// Budget exhaustion degrades to `exact = false` with the best clique
/// found so far.
pub fn clique_number(g: &AdjacencyGraph, time_budget: Option<Duration>) -> CliqueResult {
    if g.n() == 0 {
        return CliqueResult { omega: 0, witness: Vec::new(), exact: true };
    }
    let (witness, exact) = CliqueSearch::run(g, time_budget);
    // even a truncated search visits at least one vertex
    let witness = if witness.is_empty() { vec![0] } else { witness };
    CliqueResult { omega: witness.len(), witness, exact }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MedianCliqueResult {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub omegas: Vec<usize>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub inexact_replicates: usize,
}

/// Clique numbers of `replicates` independent G(n, d, p) graphs.
/// Inexact replicates are reported; they are included in the summary
/// only when `allow_inexact` is set.
pub fn median_clique_experiment(
    n: usize,
    d: usize,
    p: f64,
    replicates: usize,
    seed: u64,
    time_budget: Option<Duration>,
    allow_inexact: bool,
) -> Result<MedianCliqueResult> {
    if replicates == 0 {
        return Err(Error::Domain("replicates must be >= 1".into()));
    }
    let t = edge_threshold(p, d)?;
    let results: Vec<CliqueResult> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let pts = sample_sphere_points(n, d, derive_seed(seed, StreamTag::Replicate, r))
                .expect("valid dimension");
            let g = build_rgg(&pts, t).expect("consistent points");
            clique_number(&g, time_budget)
        })
        .collect();
    let inexact = results.iter().filter(|r| !r.exact).count();
    let mut omegas: Vec<usize> = results
        .iter()
        .filter(|r| allow_inexact || r.exact)
        .map(|r| r.omega)
        .collect();
    if omegas.is_empty() {
        return Err(Error::BudgetExceeded(format!(
            "all {replicates} replicates exceeded the clique search budget"
        )));
    }
    omegas.sort_unstable();
    let q = |frac: f64| -> f64 {
        let pos = frac * (omegas.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = pos - lo as f64;
        omegas[lo] as f64 * (1.0 - w) + omegas[hi] as f64 * w
    };
    Ok(MedianCliqueResult {
        n,
        d,
        p,
        median: q(0.5),
        q1: q(0.25),
        q3: q(0.75),
        omegas,
        inexact_replicates: inexact,
    })
}

/// Constants of the median clique-number lower bound.
pub const C1: f64 = 7.0 / 16.0;
pub const C3: f64 = 1.0 / 16.0;
pub const C4: f64 = 49.0 / 5120.0;

pub fn c2() -> f64 {
    16.0 * std::f64::consts::LN_2
}

/// med(omega(n, d, 1/2)) >= c3 exp(c4 log^2(c2 n) / d), valid for
/// d >= c1 log(c2 n).
pub fn theorem2_bound(n: usize, d: usize) -> Result<f64> {
    let l = (c2() * n as f64).ln();
    if (d as f64) < C1 * l {
        return Err(Error::Domain(format!(
            "bound requires d >= {:.3} for n = {n}",
            C1 * l
        )));
    }
    Ok(C3 * (C4 * l * l / d as f64).exp())
}

/// Clique-based detection: normalize the n columns of an m x n sample
/// (m playing the role of the sphere dimension d), build the t = 0
/// graph, and reject iff the clique number reaches k.
pub fn clique_detection_test(
    x: &SampleMatrix,
    k: usize,
    time_budget: Option<Duration>,
) -> Result<bool> {
    let (m, n) = (x.m(), x.n());
    let cols = x.columns();
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let col = &cols[i * m..(i + 1) * m];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NonFinite(format!("zero-norm column {i}")));
        }
        points.push(col.iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    let g = build_rgg(&points, 0.0)?;
    Ok(clique_number(&g, time_budget).omega >= k)
}
