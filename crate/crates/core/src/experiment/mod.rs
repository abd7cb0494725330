//! Configuration-driven Monte Carlo runs of the standardized log-determinant.

mod plot;
mod verify;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::clt::{cov_constants, ks_test, summary_moments, KsResult, LawConstants, SummaryMoments};
use crate::error::{Error, Result};
use crate::matrix::{correlation_from_normalized, log_det_spd, sample_covariance, self_normalize};
use crate::sampling::{fill_matrix, RngStream, TailLaw};

pub use plot::{emit_plot, freedman_diaconis, silverman_kde, Histogram, Kde};
pub use verify::{run_asymptotics, verify_girko, verify_moments, CheckResult, VerificationReport};

/// Environment variable that overrides the configured thread count.
pub const THREADS_ENV: &str = "THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    CorrLogdet,
    CovLogdet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Auto,
    Threads(usize),
}

impl Serialize for Parallelism {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Parallelism::Auto => s.serialize_str("auto"),
            Parallelism::Threads(t) => s.serialize_u64(*t as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Parallelism {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("parallelism must be at least 1")),
            Raw::Count(t) => Ok(Parallelism::Threads(t)),
            Raw::Word(w) if w == "auto" => Ok(Parallelism::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("unknown parallelism `{w}`"))),
        }
    }
}

impl fmt::Display for Parallelism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parallelism::Auto => f.write_str("auto"),
            Parallelism::Threads(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg_path: Option<PathBuf>,
}

/// One simulation run. See the repository README for the JSON schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub law: TailLaw,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_statistic")]
    pub statistic: Statistic,
    /// `E X^4` of the standardized entries for the covariance law; taken from
    /// the law when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourth_moment: Option<f64>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub parallelism: Parallelism,
}

fn default_statistic() -> Statistic {
    Statistic::CorrLogdet
}

impl ExperimentConfig {
    pub fn new(law: TailLaw, p: usize, n: usize, reps: usize, seed: u64, statistic: Statistic) -> Self {
        ExperimentConfig {
            law,
            p,
            n,
            reps,
            seed,
            statistic,
            fourth_moment: None,
            outputs: Outputs::default(),
            parallelism: Parallelism::Auto,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.p == 0 || self.p >= self.n {
            return Err(Error::Config(format!("need 0 < p < n, got p = {}, n = {}", self.p, self.n)));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.statistic == Statistic::CovLogdet {
            self.cov_setup()?;
        }
        Ok(())
    }

    /// Entry standard deviation and fourth moment for the covariance law.
    fn cov_setup(&self) -> Result<(f64, f64)> {
        let var = self
            .law
            .variance()
            .ok_or_else(|| Error::Config("covariance statistic needs finite-variance entries".into()))?;
        let kappa = match self.fourth_moment {
            Some(k) => k,
            None => self.law.standardized_fourth_moment().ok_or_else(|| {
                Error::Config("law has no finite fourth moment; set fourth_moment".into())
            })?,
        };
        cov_constants(self.p, self.n, kappa).map_err(|e| Error::Config(e.to_string()))?;
        Ok((var.sqrt(), kappa))
    }

    /// Thread count: `THREADS` if set, else the configured value, else all cores.
    pub fn resolve_threads(&self) -> Result<usize> {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            return match v.trim().parse::<usize>() {
                Ok(t) if t > 0 => Ok(t),
                _ => Err(Error::Config(format!("{THREADS_ENV}={v} is not a positive integer"))),
            };
        }
        Ok(match self.parallelism {
            Parallelism::Threads(t) => t,
            Parallelism::Auto => std::thread::available_parallelism().map_or(1, |v| v.get()),
        })
    }
}

/// Outcome of a single replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep_index: usize,
    #[serde(with = "nan_as_null")]
    pub logdet_raw: f64,
    #[serde(with = "nan_as_null")]
    pub standardized: f64,
    pub flagged: bool,
}

/// Flagged replications carry NaN, which JSON writes as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Centering and scale used to standardize the statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub centering: f64,
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourth_moment: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub per_rep_seconds: f64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub standardization: Standardization,
    pub reps: usize,
    pub flagged: usize,
    pub records: Vec<RepRecord>,
    /// Absent when fewer than eight replications succeeded.
    pub summary: Option<SummaryMoments>,
    pub ks: Option<KsResult>,
    pub histogram: Histogram,
    pub kde: Kde,
    pub timing: Timing,
}

impl ExperimentReport {
    /// Standardized statistics of the unflagged replications, in order.
    pub fn statistics(&self) -> Vec<f64> {
        self.records.iter().filter(|r| !r.flagged).map(|r| r.standardized).collect()
    }

    /// `rep_index,logdet_raw,standardized,flagged`, shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rep_index,logdet_raw,standardized,flagged")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.rep_index, r.logdet_raw, r.standardized, u8::from(r.flagged))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }

    /// Writes every output named in the configuration.
    pub fn write_outputs(&self) -> Result<()> {
        let out = &self.config.outputs;
        if let Some(p) = &out.csv_path {
            let mut buf = Vec::new();
            self.write_csv(&mut buf)?;
            std::fs::write(p, buf)?;
        }
        if let Some(p) = &out.json_path {
            std::fs::write(p, self.to_json()?)?;
        }
        if let Some(p) = &out.svg_path {
            std::fs::write(p, emit_plot(self))?;
        }
        Ok(())
    }
}

/// Log-determinant of the replication's matrix, before standardization.
fn replicate(cfg: &ExperimentConfig, r: usize, sd: f64) -> Result<f64> {
    let stream = RngStream::new(cfg.seed, r as u64);
    let x = fill_matrix(&cfg.law, cfg.p, cfg.n, &stream)?;
    match cfg.statistic {
        Statistic::CorrLogdet => {
            let y = self_normalize(&x)?;
            log_det_spd(correlation_from_normalized(&y).as_symmetric())
        }
        Statistic::CovLogdet => {
            let x = x.map(|v| v / sd)?;
            log_det_spd(&sample_covariance(&x))
        }
    }
}

/// Runs every replication and aggregates the report.
///
/// Replication `r` draws from stream `(seed, r)`, so the statistics do not
/// depend on the thread count. Replications whose determinant cannot be
/// computed are flagged; more than 0.1% flagged fails the run.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let threads = cfg.resolve_threads()?;
    let standardization = match cfg.statistic {
        Statistic::CorrLogdet => {
            let c = LawConstants::new(cfg.p, cfg.n)?;
            Standardization { centering: c.mu_n, variance: c.sigma2_n, fourth_moment: None }
        }
        Statistic::CovLogdet => {
            let (_, kappa) = cfg.cov_setup()?;
            let (centering, variance) = cov_constants(cfg.p, cfg.n, kappa)?;
            Standardization { centering, variance, fourth_moment: Some(kappa) }
        }
    };
    let sd = match cfg.statistic {
        Statistic::CovLogdet => cfg.cov_setup()?.0,
        Statistic::CorrLogdet => 1.0,
    };
    let scale = standardization.variance.sqrt();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Resource(e.to_string()))?;
    let start = Instant::now();
    let records: Vec<RepRecord> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| match replicate(cfg, r, sd) {
                Ok(v) if v.is_finite() => Ok(RepRecord {
                    rep_index: r,
                    logdet_raw: v,
                    standardized: (v - standardization.centering) / scale,
                    flagged: false,
                }),
                Ok(_)
                | Err(Error::NotPositiveDefinite { .. })
                | Err(Error::DegenerateInput { .. }) => Ok(RepRecord {
                    rep_index: r,
                    logdet_raw: f64::NAN,
                    standardized: f64::NAN,
                    flagged: true,
                }),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let wall = start.elapsed().as_secs_f64();

    let flagged = records.iter().filter(|r| r.flagged).count();
    let budget = cfg.reps / 1000;
    if flagged > budget {
        return Err(Error::FlagBudget { flagged, reps: cfg.reps, budget });
    }
    let stats: Vec<f64> = records.iter().filter(|r| !r.flagged).map(|r| r.standardized).collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        standardization,
        reps: cfg.reps,
        flagged,
        summary: summary_moments(&stats).ok(),
        ks: ks_test(&stats).ok(),
        histogram: freedman_diaconis(&stats),
        kde: silverman_kde(&stats, plot::KDE_POINTS),
        records,
        timing: Timing { wall_seconds: wall, per_rep_seconds: wall / cfg.reps as f64, threads },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let text = r#"{
            "law": {"family": "student_t", "df": 3.5},
            "p": 50, "n": 100, "reps": 20, "seed": 7,
            "statistic": "corr_logdet",
            "outputs": {"csv_path": "out.csv"},
            "parallelism": 2
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.parallelism, Parallelism::Threads(2));
        assert_eq!(cfg.outputs.csv_path.as_deref(), Some(Path::new("out.csv")));
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        let auto = text.replace("\"parallelism\": 2", "\"parallelism\": \"auto\"");
        assert_eq!(ExperimentConfig::from_json(&auto).unwrap().parallelism, Parallelism::Auto);
    }

    #[test]
    fn invalid_configs() {
        let base = ExperimentConfig::new(TailLaw::Gaussian, 10, 10, 5, 1, Statistic::CorrLogdet);
        assert!(matches!(base.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::new(TailLaw::StudentT { df: 2.5 }, 5, 10, 5, 1, Statistic::CovLogdet);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.fourth_moment = Some(9.0);
        assert!(cfg.validate().is_ok());
        let mut t = ExperimentConfig::new(TailLaw::StudentT { df: 1.5 }, 5, 10, 5, 1, Statistic::CovLogdet);
        t.fourth_moment = Some(9.0);
        assert!(matches!(t.validate(), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"law":{"family":"gaussian"},"p":1,"n":2,"reps":1,"seed":0,"bogus":1}"#).is_err());
    }

    #[test]
    fn small_gaussian_run() {
        let mut cfg = ExperimentConfig::new(TailLaw::Gaussian, 20, 40, 64, 3, Statistic::CorrLogdet);
        cfg.parallelism = Parallelism::Threads(2);
        let report = run_simulation(&cfg).unwrap();
        assert_eq!(report.records.len(), 64);
        assert_eq!(report.flagged, 0);
        assert_eq!(report.histogram.counts.iter().sum::<usize>(), 64);
        assert!(report.records.iter().enumerate().all(|(i, r)| r.rep_index == i));
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("rep_index,logdet_raw,standardized,flagged\n0,"));
        let back = ExperimentReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back.records, report.records);
    }

    #[test]
    fn flagged_records_survive_json() {
        let r = RepRecord { rep_index: 3, logdet_raw: f64::NAN, standardized: f64::NAN, flagged: true };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"rep_index":3,"logdet_raw":null,"standardized":null,"flagged":true}"#);
        let back: RepRecord = serde_json::from_str(&s).unwrap();
        assert!(back.logdet_raw.is_nan() && back.flagged);
    }

    #[test]
    fn tiny_runs_have_no_summary() {
        let cfg = ExperimentConfig::new(TailLaw::Gaussian, 2, 5, 3, 1, Statistic::CorrLogdet);
        let report = run_simulation(&cfg).unwrap();
        assert!(report.summary.is_none() && report.ks.is_none());
    }

    #[test]
    fn covariance_run_is_standardized_by_sd() {
        let law = TailLaw::StudentT { df: 8.0 };
        let cfg = ExperimentConfig::new(law, 10, 40, 16, 5, Statistic::CovLogdet);
        let report = run_simulation(&cfg).unwrap();
        assert_eq!(report.standardization.fourth_moment, law.standardized_fourth_moment());
        assert!(report.summary.unwrap().mean.abs() < 3.0);
    }
}
