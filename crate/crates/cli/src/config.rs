//! Run configuration: a JSON document with a versioned schema.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scls_core::aedes::{ContainerSpec, InitialPopulation, MosquitoPhase, StageTables, Volume};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainerConfig {
    pub ind: u32,
    /// Density thresholds p1 < p2 < p3.
    pub phi: [u64; 3],
    pub dtime: f64,
    pub initial_vol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTablesConfig {
    pub dd: [f64; 6],
    pub bdr: [f64; 14],
    pub d_blood: f64,
    pub d_cycle: [f64; 8],
    pub phi: u64,
    pub mtd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub adults: u64,
    pub eggs: u64,
    pub larvae: [u64; 4],
    pub pupae: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RainThresholds {
    pub light_mm: f64,
    pub heavy_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// `.cls` model file; the bundled model when absent.
    #[serde(default)]
    pub model: Option<PathBuf>,
    pub containers: Vec<ContainerConfig>,
    pub stage_tables: StageTablesConfig,
    pub initial_population: PopulationConfig,
    pub climate: PathBuf,
    pub rain_thresholds: RainThresholds,
    pub sunrise: f64,
    pub sunset: f64,
    pub seed: u64,
    pub replicates: u32,
    pub maxtime: f64,
    pub sample_interval: f64,
    pub output: PathBuf,
}

impl RunConfig {
    /// Reads and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = cfg.model.as_mut() {
            resolve(m);
        }
        resolve(&mut cfg.climate);
        resolve(&mut cfg.output);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return bad("sample_interval must be positive".into());
        }
        if !(self.maxtime >= 0.0 && self.maxtime.is_finite()) {
            return bad("maxtime must be nonnegative".into());
        }
        let r = &self.rain_thresholds;
        if !(r.light_mm > 0.0 && r.light_mm <= r.heavy_mm && r.heavy_mm.is_finite()) {
            return bad("rain thresholds must satisfy 0 < light_mm <= heavy_mm".into());
        }
        if !(0.0 < self.sunrise && self.sunrise < self.sunset && self.sunset < 1.0) {
            return bad("need 0 < sunrise < sunset < 1".into());
        }
        if self.containers.is_empty() {
            return bad("at least one container is required".into());
        }
        self.container_specs()?;
        self.tables().validate()?;
        Ok(())
    }

    pub fn tables(&self) -> StageTables {
        let s = &self.stage_tables;
        StageTables {
            dd: s.dd,
            bdr: s.bdr,
            d_blood: s.d_blood,
            d_cycle: s.d_cycle,
            phi: s.phi,
            mtd: s.mtd,
        }
    }

    pub fn container_specs(&self) -> Result<Vec<ContainerSpec>, CliError> {
        self.containers
            .iter()
            .map(|c| {
                let vol = Volume::from_token(&c.initial_vol).ok_or_else(|| {
                    CliError::Config(format!("container {}: unknown volume {:?}", c.ind, c.initial_vol))
                })?;
                Ok(ContainerSpec {
                    ind: c.ind,
                    phi: c.phi,
                    dtime: c.dtime,
                    initial_vol: vol,
                    initial_temp: 0.0,
                })
            })
            .collect()
    }

    pub fn population(&self) -> InitialPopulation {
        let p = &self.initial_population;
        let mut per_container = vec![(MosquitoPhase::Egg, p.eggs)];
        for (i, n) in p.larvae.iter().enumerate() {
            per_container.push((MosquitoPhase::Larva(i as u8 + 1), *n));
        }
        per_container.push((MosquitoPhase::Pupa, p.pupae));
        per_container.retain(|(_, n)| *n > 0);
        InitialPopulation {
            adults: p.adults,
            per_container,
        }
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// The 2009 field season setting with illustrative stage tables.
    pub fn field_season(climate: PathBuf, output: PathBuf) -> RunConfig {
        let t = StageTables::illustrative();
        RunConfig {
            schema_version: SCHEMA_VERSION,
            model: None,
            containers: ContainerSpec::field_defaults()
                .into_iter()
                .map(|c| ContainerConfig {
                    ind: c.ind,
                    phi: c.phi,
                    dtime: c.dtime,
                    initial_vol: c.initial_vol.token().to_string(),
                })
                .collect(),
            stage_tables: StageTablesConfig {
                dd: t.dd,
                bdr: t.bdr,
                d_blood: t.d_blood,
                d_cycle: t.d_cycle,
                phi: t.phi,
                mtd: t.mtd,
            },
            initial_population: PopulationConfig {
                adults: 4,
                eggs: 6,
                larvae: [2, 1, 1, 0],
                pupae: 0,
            },
            climate,
            rain_thresholds: RainThresholds {
                light_mm: 1.0,
                heavy_mm: 20.0,
            },
            sunrise: 0.25,
            sunset: 0.8,
            seed: 20090508,
            replicates: 20,
            maxtime: 190.0,
            sample_interval: 1.0,
            output,
        }
    }
}
