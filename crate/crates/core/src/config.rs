//! Run configuration: one TOML file drives every stage.
//!
//! Any key can also be overridden as `dotted.key=value`, where the value is a
//! TOML literal (`seed=7`, `noise.r_uwb=0.02`, `mode="perfect"`).

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::Deserialize;

use crate::ekf::{Attitude, Covariance, GammaModel, NoiseConfig};
use crate::error::{Error, Result};
use crate::map::{load_map, EnvironmentMap};
use crate::montecarlo::{Jitter, MeasurementMode, MeasurementOptions, TrialSettings};
use crate::planner::{BeliefModel, KinematicProfile, PecNorm};
use crate::roadmap::ForwardBias;
use crate::trajectory::RateSchedule;

/// Annotated default configuration.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../assets/default_config.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    #[serde(default)]
    q: Option<Vec<f64>>,
    #[serde(default)]
    r_alt: Option<f64>,
    #[serde(default)]
    r_uwb: Option<f64>,
    #[serde(default)]
    r_cam: Option<Vec<f64>>,
    #[serde(default)]
    r_lidar: Option<Vec<f64>>,
    #[serde(default)]
    gamma: Option<GammaModel>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    map: Option<PathBuf>,
    seed: Option<u64>,
    #[serde(default = "defaults::nodes")]
    nodes: usize,
    #[serde(default = "defaults::knn")]
    knn: usize,
    #[serde(default = "defaults::candidates")]
    candidates: usize,
    #[serde(default = "defaults::forward_bias")]
    forward_bias: f64,
    #[serde(default = "defaults::cruise")]
    cruise_mps: f64,
    #[serde(default)]
    pitch_deg: f64,
    #[serde(default)]
    roll_deg: f64,
    rho_s: Option<f64>,
    #[serde(default)]
    delta_m2: Option<f64>,
    #[serde(default = "defaults::mc_runs")]
    mc_runs: usize,
    #[serde(default)]
    pec_norm: PecNorm,
    #[serde(default = "defaults::mode")]
    mode: MeasurementMode,
    #[serde(default = "defaults::out")]
    out: PathBuf,
    #[serde(default)]
    rates: Option<RateSchedule>,
    #[serde(default)]
    noise: Option<NoiseFile>,
    #[serde(default)]
    jitter: Option<Jitter>,
    #[serde(default)]
    sim: Option<MeasurementOptions>,
}

mod defaults {
    use super::*;
    pub fn nodes() -> usize {
        12
    }
    pub fn knn() -> usize {
        5
    }
    pub fn candidates() -> usize {
        80
    }
    pub fn forward_bias() -> f64 {
        ForwardBias::default().0
    }
    pub fn cruise() -> f64 {
        0.5
    }
    pub fn mc_runs() -> usize {
        10
    }
    pub fn mode() -> MeasurementMode {
        MeasurementMode::Noisy
    }
    pub fn out() -> PathBuf {
        PathBuf::from("out")
    }
}

/// Where the environment comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    /// The bundled tunnel.
    Builtin,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub map: MapSource,
    pub seed: u64,
    pub nodes: usize,
    pub knn: usize,
    pub candidates: usize,
    pub forward_bias: f64,
    pub kin: KinematicProfile,
    pub rho_s: f64,
    pub delta_m2: Option<f64>,
    pub mc_runs: usize,
    pub pec_norm: PecNorm,
    pub mode: MeasurementMode,
    pub out: PathBuf,
    pub rates: RateSchedule,
    pub noise: NoiseConfig,
    pub jitter: Jitter,
    pub measurement: MeasurementOptions,
}

fn matrix3(key: &str, v: &[f64]) -> Result<Matrix3<f64>> {
    match v.len() {
        3 => Ok(Matrix3::from_diagonal(&Vector3::from_column_slice(v))),
        9 => Ok(Matrix3::from_row_slice(v)),
        n => Err(Error::Config(format!(
            "noise.{key} needs 3 diagonal or 9 row-major values, got {n}"
        ))),
    }
}

fn matrix6(key: &str, v: &[f64]) -> Result<Covariance> {
    match v.len() {
        6 => Ok(Covariance::from_diagonal(&Vector6::from_column_slice(v))),
        36 => Ok(Covariance::from_row_slice(v)),
        n => Err(Error::Config(format!(
            "noise.{key} needs 6 diagonal or 36 row-major values, got {n}"
        ))),
    }
}

/// `s` as a TOML string literal, for building overrides.
pub fn string_literal(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Set `dotted.key` in `table` to the TOML literal `value`.
fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed: toml::Table = toml::from_str(&format!("v = {value}"))
        .or_else(|_| toml::from_str(&format!("v = {:?}", value)))
        .map_err(|e| Error::parse("config override", format!("{key}: {e}")))?;
    let value = parsed.get("v").cloned().expect("parsed override");
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// The bundled default with no file behind it.
    pub fn default_config() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML, Path::new("."), &[]).expect("bundled config is valid")
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parse("config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base, overrides)
    }

    /// Parse config text; a relative `map` path is resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::parse("config", e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let file: ConfigFile = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::parse("config", e.to_string()))?;
        Self::from_file(file, base_dir)
    }

    fn from_file(f: ConfigFile, base_dir: &Path) -> Result<Self> {
        let seed = f
            .seed
            .ok_or_else(|| Error::Config("`seed` is required; there is no time-based default".into()))?;
        let rho_s = f
            .rho_s
            .ok_or_else(|| Error::Config("`rho_s` (flight-time budget, seconds) is required".into()))?;

        let mut noise = NoiseConfig::default();
        if let Some(n) = f.noise {
            if let Some(q) = n.q {
                noise.q = matrix6("q", &q)?;
            }
            if let Some(v) = n.r_alt {
                noise.r_alt = v;
            }
            if let Some(v) = n.r_uwb {
                noise.r_uwb = v;
            }
            if let Some(r) = n.r_cam {
                noise.r_cam = matrix3("r_cam", &r)?;
            }
            if let Some(r) = n.r_lidar {
                noise.r_lidar = matrix3("r_lidar", &r)?;
            }
            if let Some(g) = n.gamma {
                noise.gamma_model = g;
            }
        }
        let map = match f.map {
            None => MapSource::Builtin,
            Some(p) if p.is_absolute() => MapSource::File(p),
            Some(p) => MapSource::File(base_dir.join(p)),
        };
        let cfg = RunConfig {
            map,
            seed,
            nodes: f.nodes,
            knn: f.knn,
            candidates: f.candidates,
            forward_bias: f.forward_bias,
            kin: KinematicProfile {
                cruise: f.cruise_mps,
                attitude: Attitude {
                    pitch: f.pitch_deg.to_radians(),
                    roll: f.roll_deg.to_radians(),
                },
            },
            rho_s,
            delta_m2: f.delta_m2,
            mc_runs: f.mc_runs,
            pec_norm: f.pec_norm,
            mode: f.mode,
            out: f.out,
            rates: f.rates.unwrap_or_default(),
            noise,
            jitter: f.jitter.unwrap_or_default(),
            measurement: f.sim.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.nodes < 2 {
            return bad(format!("nodes must be at least 2, got {}", self.nodes));
        }
        for (name, v) in [
            ("knn", self.knn),
            ("candidates", self.candidates),
            ("mc_runs", self.mc_runs),
        ] {
            if v < 1 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !(self.forward_bias.is_finite() && self.forward_bias >= 1.0) {
            return bad(format!("forward_bias must be >= 1, got {}", self.forward_bias));
        }
        if !(self.rho_s.is_finite() && self.rho_s > 0.0) {
            return bad(format!("rho_s must be positive, got {}", self.rho_s));
        }
        if let Some(d) = self.delta_m2 {
            if d.is_nan() || d <= 0.0 {
                return bad(format!("delta_m2 must be positive, got {d}"));
            }
        }
        self.jitter.validate().map_err(Error::Config)?;
        self.measurement.validate().map_err(Error::Config)?;
        self.belief_model().map(|_| ())
    }

    pub fn load_map(&self) -> Result<EnvironmentMap> {
        match &self.map {
            MapSource::Builtin => Ok(EnvironmentMap::tunnel_default()),
            MapSource::File(p) => load_map(p),
        }
    }

    pub fn belief_model(&self) -> Result<BeliefModel> {
        BeliefModel::new(self.kin, self.rates, self.noise.clone(), self.pec_norm)
    }

    pub fn trial_settings(&self) -> TrialSettings {
        TrialSettings {
            jitter: self.jitter,
            mode: self.mode,
            measurement: self.measurement,
            runs: self.mc_runs,
            master_seed: self.seed,
        }
    }
}
