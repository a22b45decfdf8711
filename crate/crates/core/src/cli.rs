//! Command-line front end: JSON configs, campaign orchestration and the
//! CSV/JSON result files.
//!
//! A config names a preset and may override any of its parameters. The
//! resolved config is echoed to `manifest.json`, which parses back to the
//! same scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorId;
use crate::error::{invalid, Error, Result};
use crate::experiments::{
    empirical_roc, histogram, preset, run_paired_trials, split_evenly, Histogram, RocCurve, Scenario,
    ScenarioName, StatSamples, PRESET_DIAGONAL,
};
use crate::linalg::HermitianPd;
use crate::model::{default_phi, SubspaceSpec};

pub const FORMAT_VERSION: &str = "1";
pub const HISTOGRAM_BINS: usize = 50;
pub const THREADS_ENV: &str = "HETERODET_THREADS";

/// On-disk configuration. Every key except `scenario` is an optional
/// override of the named preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_test: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detectors: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub scenario: ScenarioName,
    pub detectors: Vec<DetectorId>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub format_version: String,
    /// Fully resolved config, written as `manifest.json`.
    pub resolved: Config,
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be non-negative, got {v}")))
    }
}

fn at_least_one(name: &'static str, v: usize) -> Result<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(invalid(name, "must be ≥ 1"))
    }
}

pub fn parse_detectors<S: AsRef<str>>(names: &[S]) -> Result<Vec<DetectorId>> {
    if names.is_empty() {
        return Err(invalid("detectors", "need at least one detector"));
    }
    let mut ids = Vec::with_capacity(names.len());
    for name in names {
        let id: DetectorId = name.as_ref().parse()?;
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    Ok(ids)
}

fn default_out_dir(name: ScenarioName) -> PathBuf {
    PathBuf::from("results").join(name.as_str().to_ascii_lowercase())
}

/// Resolves `config` against its preset. Desk scale is applied first unless
/// `paper_scale`; explicit keys always win.
pub fn parse_config(config: &Config, paper_scale: bool) -> Result<(RunManifest, Scenario)> {
    let name: ScenarioName = config
        .scenario
        .as_deref()
        .ok_or_else(|| Error::Config("missing required key `scenario`".into()))?
        .parse()?;
    let mut s = preset(name)?;
    if !paper_scale {
        s = s.desk_scale()?;
    }

    if config.n.is_some() || config.p.is_some() || config.t.is_some() {
        let n = at_least_one("n", config.n.unwrap_or(s.subspace.n))?;
        let p = at_least_one("p", config.p.unwrap_or(s.subspace.p))?;
        let t = at_least_one("t", config.t.unwrap_or(s.subspace.t))?;
        s.subspace = SubspaceSpec::new(n, p, t)?;
        // Keep the preset's Frobenius norm (0.44·√5 ≈ 1) at any size.
        let diagonal = PRESET_DIAGONAL * (s.noise.rs_base.dim() as f64 / n as f64).sqrt();
        s.noise.rs_base = HermitianPd::scaled_identity(n, diagonal)?;
        s.phi = default_phi(t);
    }
    if let Some(scales) = &config.group_scales {
        for &v in scales {
            positive("group_scales", v)?;
        }
        if config.group_sizes.is_none() && scales.len() != s.noise.group_sizes.len() {
            let k = config.k.unwrap_or_else(|| s.noise.total_secondary());
            s.noise.group_sizes = split_evenly(k, scales.len());
        }
        s.noise.group_scales = scales.clone();
    }
    match (&config.group_sizes, config.k) {
        (Some(sizes), k) => {
            for &v in sizes {
                at_least_one("group_sizes", v)?;
            }
            if let Some(k) = k {
                if k != sizes.iter().sum::<usize>() {
                    return Err(invalid("k", format!("{k} disagrees with group_sizes {sizes:?}")));
                }
            }
            s.noise.group_sizes = sizes.clone();
        }
        (None, Some(k)) => s = s.with_secondary_count(at_least_one("k", k)?)?,
        (None, None) => {}
    }
    if let Some(v) = config.sigma2_test {
        s.noise.sigma2_test = positive("sigma2_test", v)?;
    }
    if let Some(v) = config.snr_db {
        if !v.is_finite() {
            return Err(invalid("snr_db", "must be finite"));
        }
        s.snr_db = v;
    }
    if let Some(v) = config.epsilon {
        s.admm.epsilon = non_negative("epsilon", v)?;
    }
    if let Some(v) = config.rho {
        s.admm.rho = positive("rho", v)?;
    }
    if let Some(v) = config.eta {
        s.admm.eta = positive("eta", v)?;
    }
    if let Some(v) = config.max_iter {
        s.admm.max_iter = at_least_one("max_iter", v)?;
    }
    if let Some(v) = config.outer_iters {
        s.admm.outer_iters = at_least_one("outer_iters", v)?;
    }
    if let Some(v) = config.trials {
        s.trials = at_least_one("trials", v)?;
    }
    if let Some(v) = config.seed {
        s.seed = v;
    }
    if let Some(v) = config.alpha {
        s.alpha = non_negative("alpha", v)?;
    }
    if let Some(v) = config.decay {
        s.decay = positive("decay", v)?;
    }
    s.refresh_test_covariance()?;
    s.validate()?;

    let detectors = match &config.detectors {
        Some(names) => parse_detectors(names)?,
        None => DetectorId::ALL.to_vec(),
    };
    let out_dir = config.out_dir.clone().unwrap_or_else(|| default_out_dir(name));
    let format_version = config.format_version.clone().unwrap_or_else(|| FORMAT_VERSION.to_string());
    let resolved = Config {
        format_version: Some(format_version.clone()),
        scenario: Some(name.as_str().to_string()),
        n: Some(s.subspace.n),
        p: Some(s.subspace.p),
        t: Some(s.subspace.t),
        k: Some(s.noise.total_secondary()),
        group_sizes: Some(s.noise.group_sizes.clone()),
        group_scales: Some(s.noise.group_scales.clone()),
        sigma2_test: Some(s.noise.sigma2_test),
        snr_db: Some(s.snr_db),
        epsilon: Some(s.admm.epsilon),
        rho: Some(s.admm.rho),
        eta: Some(s.admm.eta),
        max_iter: Some(s.admm.max_iter),
        outer_iters: Some(s.admm.outer_iters),
        trials: Some(s.trials),
        seed: Some(s.seed),
        detectors: Some(detectors.iter().map(|d| d.name().to_string()).collect()),
        alpha: Some(s.alpha),
        decay: Some(s.decay),
        out_dir: Some(out_dir.clone()),
    };
    let manifest = RunManifest {
        scenario: name,
        detectors,
        out_dir,
        seed: s.seed,
        format_version,
        resolved,
    };
    Ok((manifest, s))
}

/// Finished (or aborted) run of one detector.
#[derive(Debug)]
pub struct DetectorResult {
    pub detector_id: DetectorId,
    pub outcome: Result<(StatSamples, RocCurve, Histogram)>,
}

#[derive(Debug)]
pub struct CampaignReport {
    pub results: Vec<DetectorResult>,
}

impl CampaignReport {
    pub fn all_succeeded(&self) -> bool {
        self.results.iter().all(|r| r.outcome.is_ok())
    }

    pub fn auc(&self, id: DetectorId) -> Option<f64> {
        self.results
            .iter()
            .find(|r| r.detector_id == id)
            .and_then(|r| r.outcome.as_ref().ok())
            .map(|(_, roc, _)| roc.auc)
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<10} {:>8} {:>8} {:>9}\n", "detector", "auc", "trials", "failures");
        for r in &self.results {
            match &r.outcome {
                Ok((samples, roc, _)) => {
                    let _ = writeln!(
                        out,
                        "{:<10} {:>8.4} {:>8} {:>9}",
                        r.detector_id.name(),
                        roc.auc,
                        samples.trials,
                        samples.failures
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "{:<10} aborted: {e}", r.detector_id.name());
                }
            }
        }
        out
    }
}

/// Worker count from `HETERODET_THREADS` (0 or unset = automatic).
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        _ => Ok(0),
    }
}

/// Runs every detector of `manifest` on `scenario` and writes the outputs.
/// Aborted detectors are reported in the returned value, not as an error.
pub fn run_campaign(manifest: &RunManifest, scenario: &Scenario, threads: usize) -> Result<CampaignReport> {
    let runs = run_paired_trials(scenario, &manifest.detectors, threads)?;
    let results = runs
        .into_iter()
        .map(|run| DetectorResult {
            detector_id: run.detector_id,
            outcome: run.result.map(|samples| {
                let roc = empirical_roc(&samples);
                let hist = histogram(&samples, HISTOGRAM_BINS);
                (samples, roc, hist)
            }),
        })
        .collect();
    let report = CampaignReport { results };
    write_outputs(&report, manifest, &manifest.out_dir)?;
    Ok(report)
}

/// Shortest decimal form with 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("pfa,pd\n");
    for pt in &roc.points {
        let _ = writeln!(out, "{},{}", num(pt.pfa), num(pt.pd));
    }
    out
}

pub fn stats_csv(samples: &StatSamples) -> String {
    let mut out = String::from("hypothesis,value\n");
    for v in &samples.h0_values {
        let _ = writeln!(out, "h0,{}", num(*v));
    }
    for v in &samples.h1_values {
        let _ = writeln!(out, "h1,{}", num(*v));
    }
    out
}

pub fn histogram_csv(hist: &Histogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,h0,h1\n");
    for (i, w) in hist.edges.windows(2).enumerate() {
        let _ = writeln!(out, "{},{},{},{}", num(w[0]), num(w[1]), hist.h0_counts[i], hist.h1_counts[i]);
    }
    out
}

/// Parses an `x,y` CSV with a header line, as written by [`roc_csv`].
pub fn parse_pairs_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("malformed row {line:?}")))?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("{s:?}: {e}")));
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_outputs(report: &CampaignReport, manifest: &RunManifest, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut summary = String::from("detector,auc,trials,failures\n");
    for r in &report.results {
        let Ok((samples, roc, hist)) = &r.outcome else {
            continue;
        };
        let name = r.detector_id.name();
        write_file(&out_dir.join(format!("roc_{name}.csv")), &roc_csv(roc))?;
        write_file(&out_dir.join(format!("stats_{name}.csv")), &stats_csv(samples))?;
        write_file(&out_dir.join(format!("hist_{name}.csv")), &histogram_csv(hist))?;
        let _ = writeln!(summary, "{name},{},{},{}", num(roc.auc), samples.trials, samples.failures);
    }
    write_file(&out_dir.join("summary.csv"), &summary)?;
    let mut json = serde_json::to_string_pretty(&manifest.resolved).map_err(|e| Error::Config(e.to_string()))?;
    json.push('\n');
    write_file(&out_dir.join("manifest.json"), &json)
}

#[derive(Debug, Parser)]
#[command(name = "heterodet", version, about = "Monte Carlo ROC campaigns for adaptive subspace detectors")]
pub struct Args {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset name: HE, PHE, NSPHE, HET or CUSTOM.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated list of amf, asd, hetero, amf_known.
    #[arg(long, value_delimiter = ',')]
    pub detectors: Option<Vec<String>>,
    /// Use K=500 and 2000 trials instead of the desk-scale defaults.
    #[arg(long)]
    pub paper_scale: bool,
}

impl Args {
    pub fn to_config(&self) -> Result<Config> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(v) = &self.scenario {
            config.scenario = Some(v.clone());
        }
        if let Some(v) = &self.out {
            config.out_dir = Some(v.clone());
        }
        if let Some(v) = self.seed {
            config.seed = Some(v);
        }
        if let Some(v) = self.trials {
            config.trials = Some(v);
        }
        if let Some(v) = &self.detectors {
            config.detectors = Some(v.clone());
        }
        Ok(config)
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn run(args: &Args) -> Result<i32> {
    let config = args.to_config()?;
    let (manifest, scenario) = parse_config(&config, args.paper_scale)?;
    let threads = threads_from_env()?;
    log::info!(
        "{}: {} trials, K={}, detectors {:?}",
        manifest.scenario,
        scenario.trials,
        scenario.noise.total_secondary(),
        manifest.detectors
    );
    let report = run_campaign(&manifest, &scenario, threads)?;
    print!("{}", report.summary_table());
    println!("outputs in {}", manifest.out_dir.display());
    Ok(if report.all_succeeded() { 0 } else { 1 })
}
