//! Ensemble driver: replicates on a worker pool, one writer, CSV output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use scls_core::aedes::{build_ecosystem, census, AedesHandler, Census, ClimateSchedule};
use scls_core::dsl::parse_model;
use scls_core::rules::Ecosystem;
use scls_core::ssa::SimState;

use crate::climate::ingest_climate;
use crate::config::RunConfig;
use crate::CliError;

pub const RNG_ID: &str = "ChaCha8Rng (rand_chacha 0.3), seeded with seed_from_u64(seed + replicate)";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const METADATA_FILE: &str = "metadata.json";

pub fn replicate_seed(base: u64, replicate: u32) -> u64 {
    base.wrapping_add(replicate as u64)
}

/// Column names of the trajectory CSV for containers `inds`.
pub fn trajectory_header(inds: &[i64]) -> Vec<String> {
    let mut h: Vec<String> = ["replicate", "time", "eggs"].map(String::from).to_vec();
    h.extend((1..=4).map(|i| format!("larvae{i}")));
    h.push("pupae".into());
    h.extend((1..=8).map(|i| format!("adults_cycle{i}")));
    h.push("adults".into());
    h.extend(inds.iter().map(|i| format!("vol_{i}")));
    h.push("temp".into());
    h.push("daylight".into());
    h
}

fn trajectory_row(replicate: u32, time: f64, c: &Census) -> Vec<String> {
    let mut r = vec![replicate.to_string(), time.to_string(), c.eggs.to_string()];
    r.extend(c.larvae.iter().map(u64::to_string));
    r.push(c.pupae.to_string());
    r.extend(c.adults.iter().map(u64::to_string));
    r.push(c.adults_total().to_string());
    r.extend(c.volumes.iter().map(|(_, v)| v.token().to_string()));
    r.push(c.temp.to_string());
    r.push(c.daylight.to_string());
    r
}

pub const SUMMARY_HEADER: [&str; 6] = ["time", "replicates", "mean_adults", "min_adults", "max_adults", "sd_adults"];

/// Statistics of one column of adult counts; `sd` uses n − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AdultStats {
    pub mean: f64,
    pub min: u64,
    pub max: u64,
    pub sd: f64,
}

impl AdultStats {
    pub fn of(xs: &[u64]) -> AdultStats {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<u64>() as f64 / n;
        let ss: f64 = xs.iter().map(|x| (*x as f64 - mean).powi(2)).sum();
        AdultStats {
            mean,
            min: xs.iter().copied().min().unwrap_or(0),
            max: xs.iter().copied().max().unwrap_or(0),
            sd: if xs.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 },
        }
    }
}

/// Everything a replicate needs besides its seed.
#[derive(Clone)]
pub struct Prepared {
    pub ecosystem: Ecosystem,
    pub config: RunConfig,
    pub model_text: Option<String>,
    pub climate_text: String,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Prepared, CliError> {
        let climate_text = fs::read_to_string(&cfg.climate).map_err(|e| CliError::io(&cfg.climate, e))?;
        let climate: ClimateSchedule = ingest_climate(
            climate_text.as_bytes(),
            cfg.rain_thresholds.light_mm,
            cfg.rain_thresholds.heavy_mm,
            cfg.sunrise,
            cfg.sunset,
        )?;
        let mut ecosystem = build_ecosystem(&cfg.container_specs()?, &cfg.tables(), &climate, &cfg.population())?;
        let model_text = match &cfg.model {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                ecosystem.rules = parse_model(&text).map_err(|e| CliError::Model(format!("{}: {e}", p.display())))?;
                Some(text)
            }
            None => None,
        };
        Ok(Prepared {
            ecosystem,
            config: cfg.clone(),
            model_text,
            climate_text,
        })
    }

    /// Census at every multiple of the sample interval up to maxtime.
    pub fn run_replicate(&self, replicate: u32) -> Result<Vec<(f64, Census)>, CliError> {
        let cfg = &self.config;
        let mut sim = SimState::new(
            self.ecosystem.clone(),
            cfg.tables(),
            replicate_seed(cfg.seed, replicate),
        )?;
        Ok(sim.run(cfg.maxtime, cfg.sample_interval, &mut AedesHandler, |t, term| (t, census(term)))?)
    }
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    seed: u64,
    rng: &'a str,
    config_sha256: String,
    model_sha256: Option<String>,
    climate_sha256: String,
    replicates: u32,
    wall_time_s: f64,
    engine_version: &'a str,
    config: &'a RunConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
    pub metadata: PathBuf,
    /// Mean adults at each sample time.
    pub mean_adults: Vec<(f64, f64)>,
    pub wall_time_s: f64,
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn worker_count(replicates: u32) -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    cores.min(replicates as usize).max(1)
}

/// Runs all replicates and writes `trajectory.csv`, `summary.csv` and
/// `metadata.json` into the output directory.
pub fn run_ensemble(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let prepared = Prepared::new(cfg)?;
    fs::create_dir_all(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    let traj_path = cfg.output.join(TRAJECTORY_FILE);
    let mut traj = csv::Writer::from_path(&traj_path).map_err(|e| CliError::csv(&traj_path, e))?;
    let inds: Vec<i64> = census(&prepared.ecosystem.initial).volumes.iter().map(|(i, _)| *i).collect();
    traj.write_record(trajectory_header(&inds)).map_err(|e| CliError::csv(&traj_path, e))?;

    let next = AtomicU32::new(0);
    let (tx, rx) = mpsc::channel();
    let mut adults: Vec<(f64, Vec<u64>)> = Vec::new();
    let mut failure = None;
    std::thread::scope(|s| {
        for _ in 0..worker_count(cfg.replicates) {
            let tx = tx.clone();
            let (next, prepared) = (&next, &prepared);
            s.spawn(move || loop {
                let r = next.fetch_add(1, Ordering::SeqCst);
                if r >= cfg.replicates {
                    break;
                }
                if tx.send((r, prepared.run_replicate(r))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut due = 0;
        for (r, result) in rx {
            pending.insert(r, result);
            while let Some(result) = pending.remove(&due) {
                let written = result.and_then(|samples| {
                    for (k, (t, c)) in samples.iter().enumerate() {
                        traj.write_record(trajectory_row(due, *t, c)).map_err(|e| CliError::csv(&traj_path, e))?;
                        if adults.len() <= k {
                            adults.push((*t, Vec::new()));
                        }
                        adults[k].1.push(c.adults_total());
                    }
                    Ok(())
                });
                if let Err(e) = written {
                    failure.get_or_insert(e);
                    next.store(cfg.replicates, Ordering::SeqCst);
                }
                due += 1;
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    traj.flush().map_err(|e| CliError::io(&traj_path, e))?;

    let summary_path = cfg.output.join(SUMMARY_FILE);
    let mut summary = csv::Writer::from_path(&summary_path).map_err(|e| CliError::csv(&summary_path, e))?;
    summary.write_record(SUMMARY_HEADER).map_err(|e| CliError::csv(&summary_path, e))?;
    let mut mean_adults = Vec::new();
    for (t, xs) in &adults {
        let st = AdultStats::of(xs);
        summary
            .write_record([
                t.to_string(),
                xs.len().to_string(),
                st.mean.to_string(),
                st.min.to_string(),
                st.max.to_string(),
                st.sd.to_string(),
            ])
            .map_err(|e| CliError::csv(&summary_path, e))?;
        mean_adults.push((*t, st.mean));
    }
    summary.flush().map_err(|e| CliError::io(&summary_path, e))?;

    let wall_time_s = start.elapsed().as_secs_f64();
    let meta_path = cfg.output.join(METADATA_FILE);
    let meta = Metadata {
        seed: cfg.seed,
        rng: RNG_ID,
        config_sha256: cfg.hash(),
        model_sha256: prepared.model_text.as_deref().map(sha256),
        climate_sha256: sha256(&prepared.climate_text),
        replicates: cfg.replicates,
        wall_time_s,
        engine_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    };
    write_json(&meta_path, &meta)?;
    Ok(RunOutput {
        trajectory: traj_path,
        summary: summary_path,
        metadata: meta_path,
        mean_adults,
        wall_time_s,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(f).map_err(|e| CliError::io(path, e))
}
