//! Monte Carlo engine: scenario presets, paired trials, ROC curves and
//! histograms.
//!
//! Every trial index `i` owns the ChaCha stream `(seed, i)`, so results do not
//! depend on thread count or scheduling. Within one trial all detectors see
//! the same H0 and H1 datasets.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{self, DetectorId};
use crate::error::{invalid, Error, Result};
use crate::hetero_glrt::{self, AdmmParams};
use crate::linalg::{pd_repair_relative, sample_covariance, ComplexMatrix, ComplexVector, HermitianPd, DEFAULT_RELATIVE_FLOOR};
use crate::model::{
    build_subspaces, default_phi, heterogeneous_test_cov, theta_for_snr, DataGenerator, Dataset,
    Hypothesis, NoiseSpec, SubspaceSpec,
};

pub const DESK_TRIALS: usize = 500;
pub const DESK_SECONDARY: usize = 100;
pub const DEFAULT_SEED: u64 = 20240917;
/// A detector run is aborted when more than this fraction of trials fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Diagonal level of the presets' base covariances.
pub const PRESET_DIAGONAL: f64 = 0.44;
pub const DEFAULT_DECAY: f64 = 0.95;
/// ADMM step used by the presets. The nominal `1e-4` drives `R` singular and
/// then diverges within the 2000-iteration budget on every HE trial.
pub const PRESET_ETA: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioName {
    /// Homogeneous, large K.
    #[serde(rename = "HE")]
    He,
    /// Partially homogeneous, medium K.
    #[serde(rename = "PHE")]
    Phe,
    /// Non-stationary partially homogeneous: two secondary scales.
    #[serde(rename = "NSPHE")]
    Nsphe,
    /// Heterogeneous test covariance.
    #[serde(rename = "HET")]
    Het,
    #[serde(rename = "CUSTOM")]
    Custom,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::He => "HE",
            ScenarioName::Phe => "PHE",
            ScenarioName::Nsphe => "NSPHE",
            ScenarioName::Het => "HET",
            ScenarioName::Custom => "CUSTOM",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace(['-', '_'], "").as_str() {
            "HE" => Ok(ScenarioName::He),
            "PHE" => Ok(ScenarioName::Phe),
            "NSPHE" => Ok(ScenarioName::Nsphe),
            "HET" | "HETEROGENEOUS" => Ok(ScenarioName::Het),
            "CUSTOM" => Ok(ScenarioName::Custom),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: ScenarioName,
    pub subspace: SubspaceSpec,
    pub noise: NoiseSpec,
    pub snr_db: f64,
    pub admm: AdmmParams,
    pub trials: usize,
    pub seed: u64,
    /// Strength of the correlated bump added to the test covariance.
    pub alpha: f64,
    pub decay: f64,
    /// Interference coordinates `φ`.
    pub phi: ComplexVector,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.subspace.validate()?;
        self.noise.validate(self.subspace.n)?;
        self.admm.validate()?;
        if self.trials == 0 {
            return Err(invalid("trials", "must be ≥ 1"));
        }
        if !self.snr_db.is_finite() {
            return Err(invalid("snr_db", "must be finite"));
        }
        if self.phi.len() != self.subspace.t {
            return Err(Error::DimensionMismatch {
                expected: self.subspace.t,
                got: self.phi.len(),
            });
        }
        Ok(())
    }

    /// Redistributes `k` secondary samples evenly over the existing groups.
    pub fn with_secondary_count(mut self, k: usize) -> Result<Self> {
        let groups = self.noise.group_sizes.len();
        if k < groups {
            return Err(invalid("k", format!("{k} samples cannot fill {groups} groups")));
        }
        self.noise.group_sizes = split_evenly(k, groups);
        Ok(self)
    }

    /// CI-sized campaign: at most [`DESK_TRIALS`] trials and [`DESK_SECONDARY`]
    /// secondary samples.
    pub fn desk_scale(mut self) -> Result<Self> {
        self.trials = self.trials.min(DESK_TRIALS);
        let k = self.noise.total_secondary();
        if k > DESK_SECONDARY {
            self = self.with_secondary_count(DESK_SECONDARY)?;
        }
        Ok(self)
    }

    /// Rebuilds the test covariance from the base covariance, `alpha` and `decay`.
    pub fn refresh_test_covariance(&mut self) -> Result<()> {
        self.noise.r_test = heterogeneous_test_cov(&self.noise.rs_base, self.alpha, self.decay)?;
        Ok(())
    }

    /// `σ²R`, the covariance the clairvoyant AMF whitens with.
    pub fn true_test_covariance(&self) -> HermitianPd {
        self.noise.r_test.scaled(self.noise.sigma2_test)
    }
}

pub fn split_evenly(k: usize, groups: usize) -> Vec<usize> {
    (0..groups)
        .map(|j| k / groups + usize::from(j < k % groups))
        .collect()
}

pub fn preset(name: ScenarioName) -> Result<Scenario> {
    let subspace = SubspaceSpec::new(5, 2, 1)?;
    let base = HermitianPd::scaled_identity(subspace.n, PRESET_DIAGONAL)?;
    let (group_sizes, group_scales, sigma2_test) = match name {
        ScenarioName::He | ScenarioName::Custom => (vec![500], vec![5.0], 5.0),
        ScenarioName::Phe => (vec![40], vec![5.0], 20.0),
        ScenarioName::Nsphe | ScenarioName::Het => (vec![250, 250], vec![5.0, 15.0], 30.0),
    };
    let (alpha, epsilon) = match name {
        ScenarioName::Het => (2.0, 0.2),
        _ => (0.0, 0.0),
    };
    let mut scenario = Scenario {
        name,
        subspace,
        noise: NoiseSpec {
            rs_base: base.clone(),
            r_test: base,
            sigma2_test,
            group_sizes,
            group_scales,
        },
        snr_db: 8.0,
        admm: AdmmParams {
            epsilon,
            eta: PRESET_ETA,
            ..AdmmParams::default()
        },
        trials: 2000,
        seed: DEFAULT_SEED,
        alpha,
        decay: DEFAULT_DECAY,
        phi: default_phi(subspace.t),
    };
    scenario.refresh_test_covariance()?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn preset_by_name(name: &str) -> Result<Scenario> {
    preset(name.parse()?)
}

/// Detector values collected over a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct StatSamples {
    pub detector_id: DetectorId,
    pub h0_values: Vec<f64>,
    pub h1_values: Vec<f64>,
    /// Trials dropped because the detector failed on either dataset.
    pub failures: usize,
    pub trials: usize,
}

/// Everything that stays fixed across the trials of one scenario.
pub struct TrialContext {
    pub h: ComplexMatrix,
    pub b: ComplexMatrix,
    pub theta: ComplexVector,
    pub generator: DataGenerator,
    pub true_cov: HermitianPd,
    pub admm: AdmmParams,
}

impl TrialContext {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let (h, b) = build_subspaces(&scenario.subspace)?;
        let theta = theta_for_snr(&h, &scenario.noise.r_test, scenario.noise.sigma2_test, scenario.snr_db);
        let generator = DataGenerator::new(&h, &b, &scenario.noise, &theta, &scenario.phi)?;
        Ok(Self {
            h,
            b,
            theta,
            generator,
            true_cov: scenario.true_test_covariance(),
            admm: scenario.admm,
        })
    }

    /// Independent stream for trial `index`.
    pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        rng
    }

    /// The H0 and H1 datasets of trial `index`.
    pub fn trial_datasets(&self, seed: u64, index: usize) -> (Dataset, Dataset) {
        let mut rng = Self::trial_rng(seed, index);
        let d0 = self.generator.generate(Hypothesis::H0, &mut rng);
        let d1 = self.generator.generate(Hypothesis::H1, &mut rng);
        (d0, d1)
    }

    /// Evaluates each detector on `dataset`, sharing the sample covariance.
    /// The heterogeneous GLRT reports its log statistic.
    pub fn evaluate(&self, detectors: &[DetectorId], dataset: &Dataset) -> Vec<Result<f64>> {
        let mut sample_cov: Option<Result<HermitianPd>> = None;
        detectors
            .iter()
            .map(|&id| match id {
                DetectorId::Asd | DetectorId::Amf => {
                    let s = sample_cov.get_or_insert_with(|| {
                        sample_covariance(&dataset.pooled_secondary())
                            .map(|s| pd_repair_relative(&s, DEFAULT_RELATIVE_FLOOR))
                    });
                    let s = match s {
                        Ok(s) => s,
                        Err(e) => return Err(Error::InsufficientSecondaryData(e.to_string())),
                    };
                    if id == DetectorId::Asd {
                        detectors::asd_statistic(&dataset.y, &self.h, &self.b, s)
                    } else {
                        detectors::amf_statistic(&dataset.y, &self.h, &self.b, s)
                    }
                }
                DetectorId::AmfKnown => detectors::amf_known(&dataset.y, &self.h, &self.b, &self.true_cov),
                DetectorId::HeteroGlrt => hetero_glrt::hetero_glrt_statistic(
                    &dataset.y,
                    &self.h,
                    &self.b,
                    &dataset.secondary,
                    &self.admm,
                )
                .map(|out| out.log_statistic),
            })
            .map(|r| match r {
                Ok(v) if !v.is_finite() => Err(invalid("statistic", format!("non-finite value {v}"))),
                other => other,
            })
            .collect()
    }
}

/// Outcome of one detector within a paired campaign.
#[derive(Debug)]
pub struct DetectorRun {
    pub detector_id: DetectorId,
    pub result: Result<StatSamples>,
}

/// Runs `scenario.trials` paired trials for all `detectors` on a pool of
/// `threads` workers (0 = rayon default).
pub fn run_paired_trials(
    scenario: &Scenario,
    detectors: &[DetectorId],
    threads: usize,
) -> Result<Vec<DetectorRun>> {
    if detectors.is_empty() {
        return Err(invalid("detectors", "need at least one detector"));
    }
    let context = TrialContext::new(scenario)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    type TrialValues = Vec<(Result<f64>, Result<f64>)>;
    let per_trial: Vec<TrialValues> = pool.install(|| {
        (0..scenario.trials)
            .into_par_iter()
            .map(|i| {
                let (d0, d1) = context.trial_datasets(scenario.seed, i);
                context
                    .evaluate(detectors, &d0)
                    .into_iter()
                    .zip(context.evaluate(detectors, &d1))
                    .collect()
            })
            .collect()
    });

    let runs = detectors
        .iter()
        .enumerate()
        .map(|(slot, &detector_id)| {
            let mut samples = StatSamples {
                detector_id,
                h0_values: Vec::with_capacity(scenario.trials),
                h1_values: Vec::with_capacity(scenario.trials),
                failures: 0,
                trials: scenario.trials,
            };
            let mut first_error = None;
            for trial in &per_trial {
                match &trial[slot] {
                    (Ok(v0), Ok(v1)) => {
                        samples.h0_values.push(*v0);
                        samples.h1_values.push(*v1);
                    }
                    (a, b) => {
                        samples.failures += 1;
                        if first_error.is_none() {
                            first_error = a.as_ref().err().or(b.as_ref().err()).map(|e| e.to_string());
                        }
                    }
                }
            }
            if let Some(e) = &first_error {
                log::warn!("{detector_id}: {} failed trials, first error: {e}", samples.failures);
            }
            let result = if samples.failures as f64 > MAX_FAILURE_FRACTION * scenario.trials as f64
                || samples.h0_values.is_empty()
            {
                Err(Error::TooManyFailures {
                    detector: detector_id.to_string(),
                    scenario: scenario.name.to_string(),
                    failures: samples.failures,
                    trials: scenario.trials,
                })
            } else {
                Ok(samples)
            };
            DetectorRun { detector_id, result }
        })
        .collect();
    Ok(runs)
}

pub fn run_trials(scenario: &Scenario, detector: DetectorId) -> Result<StatSamples> {
    run_paired_trials(scenario, &[detector], 0)?
        .pop()
        .expect("one detector requested")
        .result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub pfa: f64,
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Sorted by `pfa`, from (0, 0) to (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Trapezoidal area under a polyline of ROC points.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].pfa - w[0].pfa) * (w[0].pd + w[1].pd))
        .sum()
}

/// Sweeps thresholds `τ` over the distinct values, high to low, with
/// `pfa = #{h0 ≥ τ}/n0` and `pd = #{h1 ≥ τ}/n1`.
pub fn empirical_roc(samples: &StatSamples) -> RocCurve {
    roc_from_values(&samples.h0_values, &samples.h1_values)
}

pub fn roc_from_values(h0: &[f64], h1: &[f64]) -> RocCurve {
    let (n0, n1) = (h0.len() as f64, h1.len() as f64);
    let mut labelled: Vec<(f64, bool)> = h0
        .iter()
        .map(|&v| (v, false))
        .chain(h1.iter().map(|&v| (v, true)))
        .collect();
    labelled.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint { pfa: 0.0, pd: 0.0 }];
    let (mut false_alarms, mut detections) = (0usize, 0usize);
    let mut i = 0;
    while i < labelled.len() {
        let tau = labelled[i].0;
        while i < labelled.len() && labelled[i].0 == tau {
            if labelled[i].1 {
                detections += 1;
            } else {
                false_alarms += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            pfa: if n0 > 0.0 { false_alarms as f64 / n0 } else { 0.0 },
            pd: if n1 > 0.0 { detections as f64 / n1 } else { 0.0 },
        });
    }
    let last = *points.last().expect("non-empty");
    if last.pfa < 1.0 || last.pd < 1.0 {
        points.push(RocPoint { pfa: 1.0, pd: 1.0 });
    }
    let auc = trapezoid_auc(&points);
    RocCurve { points, auc }
}

/// Whether `a` beats `b` by at least `margin` in AUC.
pub fn auc_pair_test(a: &RocCurve, b: &RocCurve, margin: f64) -> bool {
    a.auc >= b.auc + margin
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub h0_counts: Vec<usize>,
    pub h1_counts: Vec<usize>,
}

/// Equal-width bins over the pooled range of both hypotheses.
pub fn histogram(samples: &StatSamples, bins: usize) -> Histogram {
    let bins = bins.max(1);
    let all = samples.h0_values.iter().chain(&samples.h1_values);
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (lo, width) = if lo.is_finite() && hi > lo {
        (lo, (hi - lo) / bins as f64)
    } else if lo.is_finite() {
        (lo, 1.0 / bins as f64)
    } else {
        (0.0, 1.0 / bins as f64)
    };
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let count = |values: &[f64]| {
        let mut counts = vec![0usize; bins];
        for &v in values {
            let idx = (((v - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
            counts[idx] += 1;
        }
        counts
    };
    Histogram {
        edges,
        h0_counts: count(&samples.h0_values),
        h1_counts: count(&samples.h1_values),
    }
}

/// Unit-norm `(1/√t)·1` scaled by `amplitude`.
pub fn scaled_phi(t: usize, amplitude: f64) -> ComplexVector {
    default_phi(t) * Complex64::from(amplitude)
}
