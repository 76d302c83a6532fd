//! The four test statistics, their analytic thresholds, and the
//! H(b) = b - 1 - log(b) helper that sets the scan threshold.

use serde::{Deserialize, Serialize};

use crate::model::{enumerate_class, AnomalousSet, ClassKind, ModelSpec, SampleMatrix};
use crate::numeric::bisect_increasing;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatName {
    SquaredSum,
    LocalizedSquaredSum,
    MaxCorrelation,
    MaxSum,
}

impl StatName {
    pub fn name(&self) -> &'static str {
        match self {
            StatName::SquaredSum => "squared-sum",
            StatName::LocalizedSquaredSum => "localized-squared-sum",
            StatName::MaxCorrelation => "max-correlation",
            StatName::MaxSum => "max-sum",
        }
    }
}

/// Argmax evidence for scan-type statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// Maximizing set (scan) or index pair (max correlation).
    Set(AnomalousSet),
    /// Max-sum: chosen rows T and the per-row top-k column indices.
    RowsAndColumns {
        rows: Vec<usize>,
        columns_per_row: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone)]
pub struct TestStatisticValue {
    pub name: StatName,
    pub value: f64,
    pub witness: Option<Witness>,
    pub ell: Option<usize>,
}

/// How a threshold was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdKind {
    Analytic,
    Calibrated,
}

/// Rejection threshold together with the inputs that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Threshold {
    pub test_name: StatName,
    pub value: f64,
    pub kind: ThresholdKind,
    pub inputs: ThresholdInputs,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ThresholdInputs {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub rho_ave: Option<f64>,
    pub log_class_size: Option<f64>,
    pub ell: Option<usize>,
    pub level: Option<f64>,
    pub calibration_trials: Option<usize>,
    pub calibration_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    RejectNull,
    AcceptNull,
}

/// Y = sum_t (sum_i x_{t,i})^2.
pub fn squared_sum(x: &SampleMatrix) -> TestStatisticValue {
    let value = (0..x.m())
        .map(|t| {
            let s: f64 = x.row(t).iter().sum();
            s * s
        })
        .sum();
    TestStatisticValue {
        name: StatName::SquaredSum,
        value,
        witness: None,
        ell: None,
    }
}

/// Y_S for one candidate set.
pub fn set_squared_sum(x: &SampleMatrix, set: &AnomalousSet) -> f64 {
    (0..x.m())
        .map(|t| {
            let row = x.row(t);
            let s: f64 = set.indices().iter().map(|&i| row[i]).sum();
            s * s
        })
        .sum()
}

/// Y_scan = max over the class of Y_S.  Block classes are evaluated
/// exactly via cyclic sliding-window sums in O(nm); other classes are
/// enumerated and must fit in `budget`.  The first maximizer in
/// canonical order is returned as witness.
pub fn localized_squared_sum(
    x: &SampleMatrix,
    class: &ModelSpec,
    budget: usize,
) -> Result<TestStatisticValue> {
    class.validate()?;
    if x.n() != class.n {
        return Err(Error::Mismatch("sample dimension does not match class".into()));
    }
    let (value, witness) = match class.class_kind {
        ClassKind::Block | ClassKind::BlockNoWrap => block_scan(x, class),
        _ => {
            let sets = enumerate_class(class, budget)?;
            let mut best = f64::NEG_INFINITY;
            let mut best_set = None;
            for set in sets {
                let y = set_squared_sum(x, &set);
                if y > best {
                    best = y;
                    best_set = Some(set);
                }
            }
            (best, best_set.expect("non-empty class"))
        }
    };
    Ok(TestStatisticValue {
        name: StatName::LocalizedSquaredSum,
        value,
        witness: Some(Witness::Set(witness)),
        ell: None,
    })
}

fn block_scan(x: &SampleMatrix, class: &ModelSpec) -> (f64, AnomalousSet) {
    let (n, m, k) = (class.n, class.m, class.k);
    let starts = if class.class_kind == ClassKind::Block { n } else { n - k + 1 };
    // window sums per row, advanced cyclically
    let mut window: Vec<f64> = (0..m).map(|t| x.row(t)[..k].iter().sum()).collect();
    let mut best = f64::NEG_INFINITY;
    let mut best_start = 0;
    for s in 0..starts {
        let y: f64 = window.iter().map(|w| w * w).sum();
        if y > best {
            best = y;
            best_start = s;
        }
        for (t, w) in window.iter_mut().enumerate() {
            let row = x.row(t);
            *w += row[(s + k) % n] - row[s % n];
        }
    }
    let set = AnomalousSet::new((0..k).map(|j| (best_start + j) % n).collect());
    (best, set)
}

/// Y_max = max_{i < j} sum_t x_{t,i} x_{t,j}.
pub fn max_correlation(x: &SampleMatrix) -> Result<TestStatisticValue> {
    let (m, n) = (x.m(), x.n());
    if n < 2 {
        return Err(Error::Domain("max_correlation requires n >= 2".into()));
    }
    let cols = x.columns();
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (0, 1);
    for i in 0..n - 1 {
        let ci = &cols[i * m..(i + 1) * m];
        for j in i + 1..n {
            let cj = &cols[j * m..(j + 1) * m];
            let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
            if dot > best {
                best = dot;
                best_pair = (i, j);
            }
        }
    }
    Ok(TestStatisticValue {
        name: StatName::MaxCorrelation,
        value: best,
        witness: Some(Witness::Set(AnomalousSet::new(vec![best_pair.0, best_pair.1]))),
        ell: None,
    })
}

/// Y(ell): per row, sum of the k largest entries (r_t); the value is
/// the sum of the ell largest r_t.  Sorting removes the C(m, ell)
/// enumeration; the exhaustive form survives as a test oracle.
pub fn max_sum(x: &SampleMatrix, k: usize, ell: usize, _budget: usize) -> Result<TestStatisticValue> {
    let (m, n) = (x.m(), x.n());
    if k == 0 || k > n {
        return Err(Error::Domain(format!("max_sum: k = {k} outside [1, {n}]")));
    }
    if ell == 0 || ell > m {
        return Err(Error::Domain(format!("max_sum: ell = {ell} outside [1, {m}]")));
    }
    let mut row_scores: Vec<(f64, usize, Vec<usize>)> = (0..m)
        .map(|t| {
            let row = x.row(t);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            idx.truncate(k);
            idx.sort_unstable();
            let r: f64 = idx.iter().map(|&i| row[i]).sum();
            (r, t, idx)
        })
        .collect();
    // ell largest r_t, ties resolved by lower row index
    row_scores.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    row_scores.truncate(ell);
    row_scores.sort_by_key(|r| r.1);
    let value = row_scores.iter().map(|r| r.0).sum();
    let rows = row_scores.iter().map(|r| r.1).collect();
    let columns_per_row = row_scores.into_iter().map(|r| r.2).collect();
    Ok(TestStatisticValue {
        name: StatName::MaxSum,
        value,
        witness: Some(Witness::RowsAndColumns { rows, columns_per_row }),
        ell: Some(ell),
    })
}

/// H(b) = b - 1 - log(b), defined on b >= 1.
pub fn h_fn(b: f64) -> Result<f64> {
    if b < 1.0 {
        return Err(Error::Domain(format!("h_fn: b = {b} < 1")));
    }
    Ok(b - 1.0 - b.ln())
}

/// Inverse of H on [1, inf), to absolute tolerance 1e-10.
pub fn h_inv(y: f64) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::Domain(format!("h_inv: y = {y} < 0")));
    }
    if y == 0.0 {
        return Ok(1.0);
    }
    // H(b) >= b/2 for b >= 4, so hi = max(4, 2y + 2) brackets the root
    let hi = (2.0 * y + 2.0).max(4.0);
    bisect_increasing(|b| b - 1.0 - b.ln(), 1.0, hi, y, 1e-12)
}

/// The paper-derived rejection threshold for the named test.
///
/// SquaredSum: nm + m^{3/4} k sqrt(n rho_ave).
/// LocalizedSquaredSum: (rho_ave k^2 m + (H^{-1}(3 log|C|/m) - 1) k m) / 2.
/// MaxCorrelation: sqrt(5 m log n).
/// MaxSum: sqrt(2 ell k (ell log(m/ell) + k log(n/k))), the proof's
/// null-level Gaussian maximum bound.
pub fn analytic_threshold(
    test_name: StatName,
    n: usize,
    m: usize,
    k: Option<usize>,
    rho_ave: Option<f64>,
    log_class_size: Option<f64>,
    ell: Option<usize>,
) -> Result<Threshold> {
    if n == 0 || m == 0 {
        return Err(Error::Domain("analytic_threshold: n, m must be positive".into()));
    }
    let need = |opt: Option<f64>, what: &str| {
        opt.ok_or_else(|| Error::Domain(format!("analytic_threshold: {what} required for {}", test_name.name())))
    };
    let nf = n as f64;
    let mf = m as f64;
    let value = match test_name {
        StatName::SquaredSum => {
            let kf = k.ok_or_else(|| Error::Domain("k required".into()))? as f64;
            let r = need(rho_ave, "rho_ave")?;
            nf * mf + mf.powf(0.75) * kf * (nf * r).sqrt()
        }
        StatName::LocalizedSquaredSum => {
            let kf = k.ok_or_else(|| Error::Domain("k required".into()))? as f64;
            let r = need(rho_ave, "rho_ave")?;
            let logc = need(log_class_size, "log_class_size")?;
            let b = h_inv(3.0 * logc / mf)?;
            0.5 * (r * kf * kf * mf + (b - 1.0) * kf * mf)
        }
        StatName::MaxCorrelation => (5.0 * mf * nf.ln()).sqrt(),
        StatName::MaxSum => {
            let kf = k.ok_or_else(|| Error::Domain("k required".into()))? as f64;
            let l = ell.ok_or_else(|| Error::Domain("ell required".into()))? as f64;
            (2.0 * l * kf * (l * (mf / l).ln() + kf * (nf / kf).ln())).sqrt()
        }
    };
    Ok(Threshold {
        test_name,
        value,
        kind: ThresholdKind::Analytic,
        inputs: ThresholdInputs {
            n: Some(n),
            m: Some(m),
            k,
            rho_ave,
            log_class_size,
            ell,
            ..Default::default()
        },
    })
}

/// Rejects iff value > threshold; ties accept.
pub fn decide(stat: &TestStatisticValue, thr: &Threshold) -> Result<Decision> {
    if stat.name != thr.test_name {
        return Err(Error::Mismatch(format!(
            "statistic {} vs threshold {}",
            stat.name.name(),
            thr.test_name.name()
        )));
    }
    if !stat.value.is_finite() {
        return Err(Error::NonFinite(format!("statistic value {}", stat.value)));
    }
    Ok(if stat.value > thr.value {
        Decision::RejectNull
    } else {
        Decision::AcceptNull
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_sample, ClassKind, ModelSpec};
    use crate::numeric::chi2_cdf;
    use crate::seed::{derive_seed, StreamTag};
    use rand::seq::SliceRandom;

    fn matrix(rows: Vec<Vec<f64>>, kind: ClassKind, k: usize) -> SampleMatrix {
        let spec = ModelSpec::new(kind, rows[0].len(), rows.len(), k, 0.0).unwrap();
        SampleMatrix::from_rows(rows, spec).unwrap()
    }

    #[test]
    fn squared_sum_small_cases() {
        let x = matrix(vec![vec![1.0, 1.0]], ClassKind::Clique, 2);
        assert_eq!(squared_sum(&x).value, 4.0);
        let x = matrix(vec![vec![1.0, -1.0], vec![2.0, 0.0]], ClassKind::Clique, 2);
        assert_eq!(squared_sum(&x).value, 4.0);
    }

    #[test]
    fn squared_sum_null_mean_is_m() {
        // Y/n over null trials has mean m (Y ~ n chi^2_m)
        let spec = ModelSpec::new(ClassKind::Clique, 50, 20, 2, 0.0).unwrap();
        let trials = 10_000;
        let mut acc = 0.0;
        for i in 0..trials {
            let x = generate_sample(&spec, None, derive_seed(11, StreamTag::Generic, i)).unwrap();
            acc += squared_sum(&x).value / 50.0;
        }
        let mean = acc / trials as f64;
        // sd of chi^2_20 mean over 10^4 trials
        let band = 4.0 * (2.0 * 20.0f64 / trials as f64).sqrt();
        assert!((mean - 20.0).abs() < band, "mean = {mean}");
    }

    #[test]
    fn localized_small_case() {
        let x = matrix(vec![vec![1.0, 2.0, -3.0]], ClassKind::Clique, 2);
        let class = ModelSpec::new(ClassKind::Clique, 3, 1, 2, 0.0).unwrap();
        let got = localized_squared_sum(&x, &class, 100).unwrap();
        assert_eq!(got.value, 9.0);
        match got.witness {
            Some(Witness::Set(s)) => assert_eq!(s.indices(), &[0, 1]),
            _ => panic!("missing witness"),
        }
    }

    #[test]
    fn localized_block_matches_enumeration() {
        for trial in 0..50 {
            let n = 4 + (trial % 17);
            let k = 2 + (trial % (n - 2).min(4));
            let m = 1 + trial % 5;
            let class = ModelSpec::new(ClassKind::Block, n, m, k, 0.0).unwrap();
            let x = generate_sample(&class, None, derive_seed(3, StreamTag::Generic, trial as u64))
                .unwrap();
            let fast = localized_squared_sum(&x, &class, usize::MAX).unwrap();
            // brute force over the enumerated class
            let brute = enumerate_class(&class, 10_000)
                .unwrap()
                .iter()
                .map(|s| set_squared_sum(&x, s))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((fast.value - brute).abs() < 1e-9 * brute.abs().max(1.0));
        }
    }

    #[test]
    fn scan_dominates_planted_set() {
        let class = ModelSpec::new(ClassKind::Clique, 8, 4, 3, 0.6).unwrap();
        for i in 0..20 {
            let set = crate::model::sample_anomalous_set(&class, derive_seed(8, StreamTag::AltSet, i))
                .unwrap();
            let x = generate_sample(&class, Some(&set), derive_seed(8, StreamTag::AltTrial, i))
                .unwrap();
            let scan = localized_squared_sum(&x, &class, 1000).unwrap();
            assert!(scan.value >= set_squared_sum(&x, &set));
        }
    }

    #[test]
    fn max_correlation_small_cases() {
        let x = matrix(vec![vec![1.0, 2.0, -3.0]], ClassKind::Clique, 2);
        assert_eq!(max_correlation(&x).unwrap().value, 2.0);
        // identical columns: value is the squared norm
        let x = matrix(
            vec![vec![1.0, 1.0, 0.1], vec![2.0, 2.0, -0.2]],
            ClassKind::Clique,
            2,
        );
        assert_eq!(max_correlation(&x).unwrap().value, 5.0);
    }

    #[test]
    fn max_correlation_matches_double_loop() {
        let spec = ModelSpec::new(ClassKind::Clique, 20, 7, 2, 0.0).unwrap();
        for i in 0..20 {
            let x = generate_sample(&spec, None, derive_seed(17, StreamTag::Generic, i)).unwrap();
            let fast = max_correlation(&x).unwrap().value;
            let mut brute = f64::NEG_INFINITY;
            for a in 0..20 {
                for b in a + 1..20 {
                    let dot: f64 = (0..7).map(|t| x.row(t)[a] * x.row(t)[b]).sum();
                    brute = brute.max(dot);
                }
            }
            assert!((fast - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn max_sum_small_cases() {
        let x = matrix(vec![vec![1.0, 2.0, -3.0], vec![0.0, 1.0, 1.0]], ClassKind::Clique, 2);
        // k=2, ell=1: r = [3, 2] -> 3
        let got = max_sum(&x, 2, 1, 1000).unwrap();
        assert_eq!(got.value, 3.0);
        // ell = m: sum of all r_t
        let got = max_sum(&x, 2, 2, 1000).unwrap();
        assert_eq!(got.value, 5.0);
    }

    /// Enumeration oracle: max over row subsets T of size ell of
    /// sum over t in T of (max over k-subsets S of the row-t sum).
    fn max_sum_oracle(x: &SampleMatrix, k: usize, ell: usize) -> f64 {
        let m = x.m();
        let n = x.n();
        let subsets_k: Vec<Vec<usize>> = combinations(n, k);
        let best_row: Vec<f64> = (0..m)
            .map(|t| {
                let row = x.row(t);
                subsets_k
                    .iter()
                    .map(|s| s.iter().map(|&i| row[i]).sum())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        combinations(m, ell)
            .iter()
            .map(|t_set| t_set.iter().map(|&t| best_row[t]).sum())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        rec(0, n, k, &mut cur, &mut out);
        out
    }

    #[test]
    fn max_sum_matches_enumeration() {
        let spec = ModelSpec::new(ClassKind::Clique, 5, 4, 2, 0.0).unwrap();
        for i in 0..50 {
            let x = generate_sample(&spec, None, derive_seed(23, StreamTag::Generic, i)).unwrap();
            for k in 1..=5 {
                for ell in 1..=4 {
                    let fast = max_sum(&x, k, ell, usize::MAX).unwrap().value;
                    let brute = max_sum_oracle(&x, k, ell);
                    assert!((fast - brute).abs() < 1e-10, "k={k} ell={ell}");
                }
            }
        }
    }

    #[test]
    fn h_round_trips() {
        assert_eq!(h_fn(1.0).unwrap(), 0.0);
        assert_eq!(h_inv(0.0).unwrap(), 1.0);
        let e = std::f64::consts::E;
        assert!((h_fn(e).unwrap() - (e - 2.0)).abs() < 1e-14);
        // root of b - ln b = 2 on b > 1
        assert!((h_inv(1.0).unwrap() - 3.146_193_220_620_582).abs() < 1e-9);
        let mut b = 1.0;
        while b <= 1e6 {
            let y = h_fn(b).unwrap();
            assert!((h_inv(y).unwrap() - b).abs() < 1e-8 * b.max(1.0), "b = {b}");
            b *= 3.7;
        }
        assert!(h_fn(0.5).is_err());
        assert!(h_inv(-1.0).is_err());
    }

    #[test]
    fn analytic_threshold_values() {
        let t = analytic_threshold(StatName::SquaredSum, 100, 16, Some(10), Some(0.25), None, None)
            .unwrap();
        assert!((t.value - 2000.0).abs() < 1e-9);
        // n = e makes log n = 1
        let t = analytic_threshold(StatName::MaxCorrelation, 3, 5, None, None, None, None).unwrap();
        assert!((t.value - (5.0 * 5.0 * 3.0f64.ln()).sqrt()).abs() < 1e-12);
        // degenerate class of size 1: H^{-1}(0) = 1 so only the rho term remains
        let t = analytic_threshold(
            StatName::LocalizedSquaredSum,
            10,
            4,
            Some(3),
            Some(0.5),
            Some(0.0),
            None,
        )
        .unwrap();
        assert!((t.value - 0.5 * 0.5 * 9.0 * 4.0).abs() < 1e-12);
        // missing rho_ave
        assert!(
            analytic_threshold(StatName::SquaredSum, 10, 4, Some(3), None, None, None).is_err()
        );
    }

    #[test]
    fn decide_rules() {
        let thr = Threshold {
            test_name: StatName::SquaredSum,
            value: 4.0,
            kind: ThresholdKind::Analytic,
            inputs: ThresholdInputs::default(),
        };
        let mut stat = TestStatisticValue {
            name: StatName::SquaredSum,
            value: 5.0,
            witness: None,
            ell: None,
        };
        assert_eq!(decide(&stat, &thr).unwrap(), Decision::RejectNull);
        stat.value = 4.0;
        assert_eq!(decide(&stat, &thr).unwrap(), Decision::AcceptNull);
        stat.value = f64::NAN;
        assert!(decide(&stat, &thr).is_err());
        stat.value = 1.0;
        stat.name = StatName::MaxSum;
        assert!(decide(&stat, &thr).is_err());
    }

    #[test]
    fn statistics_are_row_permutation_invariant() {
        let spec = ModelSpec::new(ClassKind::Clique, 8, 6, 3, 0.0).unwrap();
        let mut rng = crate::seed::rng_from_seed(99);
        for i in 0..10 {
            let x = generate_sample(&spec, None, derive_seed(31, StreamTag::Generic, i)).unwrap();
            let mut order: Vec<usize> = (0..6).collect();
            order.shuffle(&mut rng);
            let rows: Vec<Vec<f64>> = order.iter().map(|&t| x.row(t).to_vec()).collect();
            let y = SampleMatrix::from_rows(rows, spec).unwrap();
            assert!((squared_sum(&x).value - squared_sum(&y).value).abs() < 1e-9);
            assert!(
                (max_correlation(&x).unwrap().value - max_correlation(&y).unwrap().value).abs()
                    < 1e-9
            );
            let class = ModelSpec::new(ClassKind::Clique, 8, 6, 3, 0.0).unwrap();
            assert!(
                (localized_squared_sum(&x, &class, 1000).unwrap().value
                    - localized_squared_sum(&y, &class, 1000).unwrap().value)
                    .abs()
                    < 1e-9
            );
            assert!(
                (max_sum(&x, 3, 2, 1000).unwrap().value - max_sum(&y, 3, 2, 1000).unwrap().value)
                    .abs()
                    < 1e-9
            );
        }
    }

    #[test]
    fn squared_sum_null_fits_chi2_ks() {
        // KS of Y/n against chi^2_20, 10^4 trials at (n, m) = (50, 20)
        let spec = ModelSpec::new(ClassKind::Clique, 50, 20, 2, 0.0).unwrap();
        let trials = 10_000usize;
        let mut vals: Vec<f64> = (0..trials)
            .map(|i| {
                let x = generate_sample(&spec, None, derive_seed(41, StreamTag::Generic, i as u64))
                    .unwrap();
                squared_sum(&x).value / 50.0
            })
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let nf = trials as f64;
        let mut d: f64 = 0.0;
        for (i, v) in vals.iter().enumerate() {
            let f = chi2_cdf(20, *v).unwrap();
            d = d.max((f - i as f64 / nf).abs());
            d = d.max(((i + 1) as f64 / nf - f).abs());
        }
        // asymptotic Kolmogorov p-value
        let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
        let p: f64 = 2.0
            * (1..=100)
                .map(|j| {
                    let j = j as f64;
                    (-1.0f64).powi(j as i32 + 1) * (-2.0 * j * j * lambda * lambda).exp()
                })
                .sum::<f64>();
        assert!(p > 1e-3, "KS d = {d}, p = {p}");
    }
}
