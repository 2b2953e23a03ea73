//! Inference latency measurement.
//!
//! A pipeline is any per-cube closure (reduction plus forward pass). Each
//! call is timed on its own with a monotonic clock after a number of untimed
//! warmup passes; the report gives seconds per sample.

use std::fmt::Write as _;
use std::fs;
use std::hint::black_box;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable that overrides the worker thread count.
pub const THREADS_ENV: &str = "SPECTRA_THREADS";

pub const CSV_HEADER: &str = "method,sec_per_sample,std,min,max";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no inputs to time")]
    EmptyInput,
    #[error("repetitions must be at least 1")]
    ZeroReps,
    #[error("candidate mean latency is zero")]
    ZeroCandidate,
    #[error("pipeline failed: {0}")]
    Pipeline(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentNote {
    pub threads: usize,
    pub thread_override: Option<String>,
    pub build_profile: String,
    pub timer_resolution_ns: u64,
}

impl EnvironmentNote {
    pub fn capture() -> Self {
        Self {
            threads: rayon::current_num_threads(),
            thread_override: std::env::var(THREADS_ENV).ok(),
            build_profile: if cfg!(debug_assertions) { "debug" } else { "release" }.to_string(),
            timer_resolution_ns: u64::try_from(timer_resolution().as_nanos()).unwrap_or(u64::MAX),
        }
    }
}

/// Smallest nonzero step observed between consecutive clock reads.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..1000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub method: String,
    /// Timed calls: repetitions times inputs.
    pub samples: usize,
    pub warmup: usize,
    pub reps: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub environment: EnvironmentNote,
}

impl LatencyReport {
    fn from_samples(method: &str, warmup: usize, reps: usize, secs: &mut [f64], environment: EnvironmentNote) -> Self {
        let n = secs.len() as f64;
        let mean = secs.iter().sum::<f64>() / n;
        let var = if secs.len() > 1 { secs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        secs.sort_by(f64::total_cmp);
        let mid = secs.len() / 2;
        let median = if secs.len() % 2 == 1 { secs[mid] } else { 0.5 * (secs[mid - 1] + secs[mid]) };
        Self {
            method: method.to_string(),
            samples: secs.len(),
            warmup,
            reps,
            mean,
            std: var.sqrt(),
            min: secs[0],
            max: secs[secs.len() - 1],
            median,
            environment,
        }
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.9},{:.9},{:.9},{:.9}", self.method, self.mean, self.std, self.min, self.max)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), BenchError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn write_csv(path: &Path, reports: &[LatencyReport]) -> Result<(), BenchError> {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    fs::write(path, s)?;
    Ok(())
}

/// Timing report plus the outputs of the last timed pass, so callers can
/// confirm that timing did not change the results.
#[derive(Debug, Clone)]
pub struct Timed<O> {
    pub report: LatencyReport,
    pub outputs: Vec<O>,
}

/// Runs `warmup` untimed passes and `reps` timed passes over `inputs`.
pub fn time_pipeline<I, O, E, F>(method: &str, inputs: &[I], warmup: usize, reps: usize, mut pipeline: F) -> Result<Timed<O>, BenchError>
where
    F: FnMut(&I) -> Result<O, E>,
    E: std::fmt::Display,
{
    if inputs.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    if reps == 0 {
        return Err(BenchError::ZeroReps);
    }
    let environment = EnvironmentNote::capture();
    let fail = |e: E| BenchError::Pipeline(e.to_string());
    for _ in 0..warmup {
        for x in inputs {
            black_box(pipeline(black_box(x)).map_err(fail)?);
        }
    }
    let mut secs = Vec::with_capacity(reps * inputs.len());
    let mut outputs = Vec::with_capacity(inputs.len());
    for r in 0..reps {
        for x in inputs {
            let start = Instant::now();
            let out = black_box(pipeline(black_box(x)));
            secs.push(start.elapsed().as_secs_f64());
            let out = out.map_err(fail)?;
            if r + 1 == reps {
                outputs.push(out);
            }
        }
    }
    Ok(Timed { report: LatencyReport::from_samples(method, warmup, reps, &mut secs, environment), outputs })
}

/// `baseline.mean / candidate.mean`.
pub fn speedup(baseline: &LatencyReport, candidate: &LatencyReport) -> Result<f64, BenchError> {
    if baseline.samples == 0 || candidate.samples == 0 {
        return Err(BenchError::EmptyInput);
    }
    if candidate.mean <= 0.0 {
        return Err(BenchError::ZeroCandidate);
    }
    Ok(baseline.mean / candidate.mean)
}
