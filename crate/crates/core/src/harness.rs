//! Reproducible Monte Carlo risk estimation: type I + type II error of
//! a (detector, model, threshold) triple, null-quantile calibration,
//! and parameter sweeps.
//!
//! Trials are embarrassingly parallel; every trial seeds its own stream
//! from (master seed, side tag, trial index), so estimates are
//! identical across worker counts and scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{
    localized_squared_sum, max_correlation, max_sum, squared_sum, StatName, Threshold,
    ThresholdInputs, ThresholdKind,
};
use crate::model::{class_cardinality, generate_sample, sample_anomalous_set, AnomalousSet,
    ModelSpec, SampleMatrix};
use crate::seed::{derive_seed, StreamTag};
use crate::{Error, Result};

/// A test statistic bound to its evaluation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Detector {
    SquaredSum,
    LocalizedSquaredSum { budget: usize },
    MaxCorrelation,
    MaxSum { ell: usize, budget: usize },
}

impl Detector {
    pub fn stat_name(&self) -> StatName {
        match self {
            Detector::SquaredSum => StatName::SquaredSum,
            Detector::LocalizedSquaredSum { .. } => StatName::LocalizedSquaredSum,
            Detector::MaxCorrelation => StatName::MaxCorrelation,
            Detector::MaxSum { .. } => StatName::MaxSum,
        }
    }

    pub fn name(&self) -> &'static str {
        self.stat_name().name()
    }

    /// Statistic value on a sample; `spec` carries the scan class.
    pub fn evaluate(&self, x: &SampleMatrix, spec: &ModelSpec) -> Result<f64> {
        Ok(match self {
            Detector::SquaredSum => squared_sum(x).value,
            Detector::LocalizedSquaredSum { budget } => {
                localized_squared_sum(x, spec, *budget)?.value
            }
            Detector::MaxCorrelation => max_correlation(x)?.value,
            Detector::MaxSum { ell, budget } => max_sum(x, spec.k, *ell, *budget)?.value,
        })
    }

    /// The paper threshold for this detector at the spec's parameters,
    /// with rho_ave taken to be the planted rho.
    pub fn analytic_threshold(&self, spec: &ModelSpec) -> Result<Threshold> {
        let logc = class_cardinality(spec)?.ln;
        match self {
            Detector::SquaredSum => crate::detectors::analytic_threshold(
                StatName::SquaredSum,
                spec.n,
                spec.m,
                Some(spec.k),
                Some(spec.rho),
                None,
                None,
            ),
            Detector::LocalizedSquaredSum { .. } => crate::detectors::analytic_threshold(
                StatName::LocalizedSquaredSum,
                spec.n,
                spec.m,
                Some(spec.k),
                Some(spec.rho),
                Some(logc),
                None,
            ),
            Detector::MaxCorrelation => crate::detectors::analytic_threshold(
                StatName::MaxCorrelation,
                spec.n,
                spec.m,
                None,
                None,
                None,
                None,
            ),
            Detector::MaxSum { ell, .. } => crate::detectors::analytic_threshold(
                StatName::MaxSum,
                spec.n,
                spec.m,
                Some(spec.k),
                None,
                None,
                Some(*ell),
            ),
        }
    }
}

/// How the alternative's anomalous set is chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlternativeMode {
    /// A fresh uniform draw from the class per trial (the Bayes-uniform
    /// risk the lower bound addresses).
    UniformRandom,
    /// The first set in canonical order, fixed across trials.  Valid as
    /// a worst-case proxy for exchangeable classes.
    FixedFirst,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub type1: f64,
    pub type2: f64,
    pub risk: f64,
    pub half_width_95: f64,
    pub trials_per_side: usize,
    pub master_seed: u64,
    pub spec: ModelSpec,
    pub detector: String,
}

impl RiskEstimate {
    pub fn from_counts(
        type1_count: usize,
        type2_count: usize,
        trials: usize,
        master_seed: u64,
        spec: ModelSpec,
        detector: String,
    ) -> Self {
        let t = trials as f64;
        let p1 = type1_count as f64 / t;
        let p2 = type2_count as f64 / t;
        let var = p1 * (1.0 - p1) / t + p2 * (1.0 - p2) / t;
        RiskEstimate {
            type1: p1,
            type2: p2,
            risk: p1 + p2,
            half_width_95: 1.96 * var.sqrt(),
            trials_per_side: trials,
            master_seed,
            spec,
            detector,
        }
    }
}

fn alt_sample(spec: &ModelSpec, mode: AlternativeMode, master_seed: u64, i: u64,
    fixed: Option<&AnomalousSet>) -> SampleMatrix {
    let seed = derive_seed(master_seed, StreamTag::AltTrial, i);
    if spec.rho == 0.0 {
        return generate_sample(&spec.null(), None, seed).expect("valid null spec");
    }
    match mode {
        AlternativeMode::UniformRandom => {
            let set_seed = derive_seed(master_seed, StreamTag::AltSet, i);
            let set = sample_anomalous_set(spec, set_seed).expect("valid spec");
            generate_sample(spec, Some(&set), seed).expect("valid alternative")
        }
        AlternativeMode::FixedFirst => {
            generate_sample(spec, fixed, seed).expect("valid alternative")
        }
    }
}

fn first_set(spec: &ModelSpec) -> Result<AnomalousSet> {
    // canonical first member without enumerating the whole class
    Ok(match spec.class_kind {
        crate::model::ClassKind::Matching => AnomalousSet::new(
            (0..spec.k).map(|r| r * spec.k + r).collect(),
        ),
        _ => AnomalousSet::new((0..spec.k).collect()),
    })
}

/// Estimates type I (null side) and type II (alternative side) error of
/// the detector at a fixed threshold value, `trials` per side.
pub fn estimate_risk(
    spec: &ModelSpec,
    detector: Detector,
    threshold: &Threshold,
    trials: usize,
    master_seed: u64,
) -> Result<RiskEstimate> {
    estimate_risk_with_mode(spec, detector, threshold, trials, master_seed,
        AlternativeMode::UniformRandom)
}

pub fn estimate_risk_with_mode(
    spec: &ModelSpec,
    detector: Detector,
    threshold: &Threshold,
    trials: usize,
    master_seed: u64,
    mode: AlternativeMode,
) -> Result<RiskEstimate> {
    spec.validate()?;
    if threshold.test_name != detector.stat_name() {
        return Err(Error::Mismatch(format!(
            "threshold for {} applied to {}",
            threshold.test_name.name(),
            detector.name()
        )));
    }
    // evaluate once to surface budget errors before the parallel loop
    {
        let probe = generate_sample(&spec.null(), None,
            derive_seed(master_seed, StreamTag::NullTrial, 0))?;
        detector.evaluate(&probe, spec)?;
    }
    let thr = threshold.value;
    let null_spec = spec.null();
    let type1_count: usize = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, StreamTag::NullTrial, i);
            let x = generate_sample(&null_spec, None, seed).expect("valid null spec");
            let v = detector.evaluate(&x, spec).expect("probed detector");
            usize::from(v > thr)
        })
        .sum();
    let fixed = first_set(spec)?;
    let type2_count: usize = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let x = alt_sample(spec, mode, master_seed, i, Some(&fixed));
            let v = detector.evaluate(&x, spec).expect("probed detector");
            usize::from(v <= thr)
        })
        .sum();
    Ok(RiskEstimate::from_counts(
        type1_count,
        type2_count,
        trials,
        master_seed,
        *spec,
        detector.name().into(),
    ))
}

/// Empirical (1 - level) quantile of the detector statistic under the
/// null, as a Calibrated threshold.  Deterministic given the seed.
pub fn calibrate_threshold(
    spec: &ModelSpec,
    detector: Detector,
    level: f64,
    trials: usize,
    master_seed: u64,
) -> Result<Threshold> {
    spec.validate()?;
    if !(0.0..1.0).contains(&level) || level == 0.0 {
        return Err(Error::Domain(format!("level = {level} outside (0, 1)")));
    }
    if (trials as f64) < 100.0 / level {
        return Err(Error::Domain(format!(
            "calibration needs at least {} trials for level {level}",
            (100.0 / level).ceil()
        )));
    }
    let null_spec = spec.null();
    {
        let probe = generate_sample(&null_spec, None,
            derive_seed(master_seed, StreamTag::Calibration, 0))?;
        detector.evaluate(&probe, spec)?;
    }
    let mut stats: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, StreamTag::Calibration, i);
            let x = generate_sample(&null_spec, None, seed).expect("valid null spec");
            detector.evaluate(&x, spec).expect("probed detector")
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    // order statistic ceil((1 - level) * trials), 1-indexed
    let rank = ((1.0 - level) * trials as f64).ceil() as usize;
    let value = stats[rank.clamp(1, trials) - 1];
    Ok(Threshold {
        test_name: detector.stat_name(),
        value,
        kind: ThresholdKind::Calibrated,
        inputs: ThresholdInputs {
            n: Some(spec.n),
            m: Some(spec.m),
            k: Some(spec.k),
            level: Some(level),
            calibration_trials: Some(trials),
            calibration_seed: Some(master_seed),
            ..Default::default()
        },
    })
}

/// Which scalar parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    Rho,
    M,
    K,
    N,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rho" => Ok(SweepAxis::Rho),
            "m" => Ok(SweepAxis::M),
            "k" => Ok(SweepAxis::K),
            "n" => Ok(SweepAxis::N),
            other => Err(Error::Domain(format!("unknown sweep axis '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::M => "m",
            SweepAxis::K => "k",
            SweepAxis::N => "n",
        }
    }

    pub fn apply(&self, base: &ModelSpec, value: f64) -> Result<ModelSpec> {
        let mut spec = *base;
        match self {
            SweepAxis::Rho => spec.rho = value,
            SweepAxis::M => spec.m = value as usize,
            SweepAxis::K => spec.k = value as usize,
            SweepAxis::N => spec.n = value as usize,
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Threshold policy applied at each sweep grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdPolicy {
    /// Paper formula recomputed from the point's parameters.
    Analytic,
    /// Null-quantile recalibrated at each point.
    Calibrated { level: f64, trials: usize },
    /// One fixed value for the whole sweep.
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub rows: Vec<(f64, Threshold, RiskEstimate)>,
}

/// One risk estimate per grid point; the threshold is re-derived per
/// point according to the policy.
pub fn sweep(
    base_spec: &ModelSpec,
    detector: Detector,
    axis: SweepAxis,
    grid: &[f64],
    policy: ThresholdPolicy,
    trials: usize,
    master_seed: u64,
) -> Result<SweepResult> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("sweep grid must be non-empty and strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (gi, &v) in grid.iter().enumerate() {
        let spec = axis.apply(base_spec, v)?;
        let point_seed = derive_seed(master_seed, StreamTag::Generic, gi as u64);
        let thr = match policy {
            ThresholdPolicy::Analytic => detector.analytic_threshold(&spec)?,
            ThresholdPolicy::Calibrated { level, trials } => {
                calibrate_threshold(&spec, detector, level, trials, point_seed)?
            }
            ThresholdPolicy::Fixed(value) => Threshold {
                test_name: detector.stat_name(),
                value,
                kind: ThresholdKind::Analytic,
                inputs: ThresholdInputs::default(),
            },
        };
        let est = estimate_risk(&spec, detector, &thr, trials, point_seed)?;
        rows.push((v, thr, est));
    }
    Ok(SweepResult { axis, grid: grid.to_vec(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassKind;
    use crate::numeric::{bisect_increasing, chi2_cdf};

    fn thr(name: StatName, value: f64) -> Threshold {
        Threshold {
            test_name: name,
            value,
            kind: ThresholdKind::Analytic,
            inputs: ThresholdInputs::default(),
        }
    }

    #[test]
    fn extreme_thresholds() {
        let spec = ModelSpec::new(ClassKind::Clique, 6, 2, 2, 0.5).unwrap();
        let always = estimate_risk(&spec, Detector::SquaredSum,
            &thr(StatName::SquaredSum, f64::NEG_INFINITY), 200, 1).unwrap();
        assert_eq!(always.type1, 1.0);
        assert_eq!(always.type2, 0.0);
        assert_eq!(always.risk, 1.0);
        let never = estimate_risk(&spec, Detector::SquaredSum,
            &thr(StatName::SquaredSum, f64::INFINITY), 200, 1).unwrap();
        assert_eq!(never.type1, 0.0);
        assert_eq!(never.type2, 1.0);
    }

    #[test]
    fn rho_zero_degenerate_risk_is_one_in_expectation() {
        let spec = ModelSpec::new(ClassKind::Clique, 10, 4, 2, 0.0).unwrap();
        let t = calibrate_threshold(&spec, Detector::SquaredSum, 0.5, 2000, 7).unwrap();
        let r = estimate_risk(&spec, Detector::SquaredSum, &t, 2000, 11).unwrap();
        assert!((r.risk - 1.0).abs() < 0.06, "risk = {}", r.risk);
    }

    #[test]
    fn threshold_detector_mismatch() {
        let spec = ModelSpec::new(ClassKind::Clique, 6, 2, 2, 0.5).unwrap();
        assert!(estimate_risk(&spec, Detector::MaxCorrelation,
            &thr(StatName::SquaredSum, 0.0), 10, 1).is_err());
    }

    #[test]
    fn determinism_across_runs() {
        let spec = ModelSpec::new(ClassKind::Clique, 8, 3, 2, 0.4).unwrap();
        let t = thr(StatName::SquaredSum, 30.0);
        let a = estimate_risk(&spec, Detector::SquaredSum, &t, 500, 99).unwrap();
        let b = estimate_risk(&spec, Detector::SquaredSum, &t, 500, 99).unwrap();
        assert_eq!(a.type1, b.type1);
        assert_eq!(a.type2, b.type2);
        // and across thread counts
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| estimate_risk(&spec, Detector::SquaredSum, &t, 500, 99).unwrap());
        assert_eq!(a.type1, c.type1);
        assert_eq!(a.type2, c.type2);
    }

    #[test]
    fn calibration_median_and_determinism() {
        let spec = ModelSpec::new(ClassKind::Clique, 10, 4, 2, 0.0).unwrap();
        let t1 = calibrate_threshold(&spec, Detector::SquaredSum, 0.5, 1000, 3).unwrap();
        let t2 = calibrate_threshold(&spec, Detector::SquaredSum, 0.5, 1000, 3).unwrap();
        assert_eq!(t1.value, t2.value);
        assert_eq!(t1.kind, ThresholdKind::Calibrated);
        // median of n chi^2_4 is about n * 3.357
        assert!((t1.value / 10.0 - 3.357).abs() < 0.4, "median = {}", t1.value);
    }

    #[test]
    fn calibrated_quantile_matches_chi2() {
        // squared_sum null quantile at level 0.05, (n, m) = (50, 20):
        // n * (0.95 quantile of chi^2_20) = 50 * 31.41
        let spec = ModelSpec::new(ClassKind::Clique, 50, 20, 2, 0.0).unwrap();
        let t = calibrate_threshold(&spec, Detector::SquaredSum, 0.05, 20_000, 5).unwrap();
        let q = bisect_increasing(|x| chi2_cdf(20, x).unwrap(), 0.0, 200.0, 0.95, 1e-10).unwrap();
        let expect = 50.0 * q;
        assert!((t.value - expect).abs() < 0.03 * expect, "{} vs {expect}", t.value);
    }

    #[test]
    fn calibration_needs_enough_trials() {
        let spec = ModelSpec::new(ClassKind::Clique, 10, 4, 2, 0.0).unwrap();
        assert!(calibrate_threshold(&spec, Detector::SquaredSum, 0.01, 500, 1).is_err());
    }

    #[test]
    fn sweep_shapes_and_monotonicity() {
        let base = ModelSpec::new(ClassKind::Clique, 10, 4, 2, 0.1).unwrap();
        let single = sweep(&base, Detector::SquaredSum, SweepAxis::Rho, &[0.5],
            ThresholdPolicy::Calibrated { level: 0.5, trials: 500 }, 500, 21).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!(sweep(&base, Detector::SquaredSum, SweepAxis::Rho, &[0.5, 0.2],
            ThresholdPolicy::Fixed(1.0), 10, 1).is_err());
        // risk non-increasing in rho within MC slack
        let s = sweep(&base, Detector::MaxCorrelation, SweepAxis::Rho,
            &[0.1, 0.5, 0.9], ThresholdPolicy::Calibrated { level: 0.2, trials: 1000 },
            2000, 23).unwrap();
        let risks: Vec<f64> = s.rows.iter().map(|r| r.2.risk).collect();
        assert!(risks[1] <= risks[0] + 0.06, "{risks:?}");
        assert!(risks[2] <= risks[1] + 0.06, "{risks:?}");
    }

    #[test]
    fn fixed_first_mode_matches_uniform_for_exchangeable_class() {
        let spec = ModelSpec::new(ClassKind::Clique, 8, 6, 2, 0.6).unwrap();
        let t = calibrate_threshold(&spec, Detector::MaxCorrelation, 0.1, 1000, 31).unwrap();
        let u = estimate_risk_with_mode(&spec, Detector::MaxCorrelation, &t, 4000, 33,
            AlternativeMode::UniformRandom).unwrap();
        let f = estimate_risk_with_mode(&spec, Detector::MaxCorrelation, &t, 4000, 33,
            AlternativeMode::FixedFirst).unwrap();
        assert!((u.type2 - f.type2).abs() < 4.0 * (u.half_width_95 + f.half_width_95),
            "{} vs {}", u.type2, f.type2);
    }
}
