//! Experiment configuration: profiles, TOML files and command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, LossWeights, NetworkLayout, TrainConfig};
use crate::error::{Error, Result};
use crate::link::{PACoeffs, PaModel};
use crate::nn::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 64×8, K = 320 and the full Table II widths. Hours per sweep.
    #[default]
    Paper,
    /// Reduced widths, short blocks and short patience for desk runs.
    Smoke,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(Profile::Paper),
            "smoke" => Ok(Profile::Smoke),
            other => Err(Error::config("profile", format!("expected paper or smoke, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    #[default]
    Rayleigh,
    Rician,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSettings {
    pub model: ChannelModel,
    /// Used only by the Rician model.
    pub rician_k_db: f64,
    pub doppler_hz: f64,
    pub symbol_rate_hz: f64,
    pub oscillators: usize,
}

impl Default for ChannelSettings {
    fn default() -> Self {
        Self {
            model: ChannelModel::Rayleigh,
            rician_k_db: 10.0,
            doppler_hz: 926.0,
            symbol_rate_hz: 1e6,
            oscillators: 16,
        }
    }
}

/// `rayleigh` or `rician:<K>db`, as accepted by `--channel`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub model: ChannelModel,
    pub rician_k_db: Option<f64>,
}

impl FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "rayleigh" {
            return Ok(Self {
                model: ChannelModel::Rayleigh,
                rician_k_db: None,
            });
        }
        let bad = || Error::config("channel", format!("expected rayleigh or rician:<K>db, got {s:?}"));
        let rest = lower.strip_prefix("rician").ok_or_else(bad)?;
        let k = match rest.strip_prefix(':') {
            None if rest.is_empty() => None,
            None => return Err(bad()),
            Some(v) => {
                let v = v.strip_suffix("db").unwrap_or(v);
                Some(v.parse::<f64>().map_err(|_| bad())?)
            }
        };
        Ok(Self {
            model: ChannelModel::Rician,
            rician_k_db: k,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaSettings {
    pub enabled: bool,
    pub coeffs: Vec<f64>,
    pub model: PaModel,
}

impl Default for PaSettings {
    fn default() -> Self {
        let p = PACoeffs::paper();
        Self {
            enabled: true,
            coeffs: p.coeffs,
            model: p.model,
        }
    }
}

impl PaSettings {
    pub fn coeffs(&self) -> Result<Option<PACoeffs>> {
        if !self.enabled {
            return Ok(None);
        }
        PACoeffs::new(self.coeffs.clone(), self.model)
            .map(Some)
            .map_err(|e| Error::config("pa.coeffs", e.to_string()))
    }
}

/// Everything `run_experiment` needs. Field names double as the TOML keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    /// Transmit antennas `N_s`.
    pub n_tx: usize,
    /// Receive antennas `N_r`.
    pub n_rx: usize,
    pub streams: usize,
    /// Symbols per block `K`.
    pub block_len: usize,
    pub pilots: usize,
    pub payload: usize,
    pub ebn0_db: Vec<f64>,
    pub blocks_per_point: usize,
    pub detectors: Vec<DetectorKind>,
    pub channel: ChannelSettings,
    pub pa: PaSettings,
    pub network: NetworkLayout,
    pub train: TrainConfig,
    pub adam: AdamConfig,
    pub pilot_weights: LossWeights,
    pub data_weights: LossWeights,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub aggregate_out: Option<PathBuf>,
    /// Report rate with ρ = 1 instead of ρ = D/K.
    pub full_payload_rate: bool,
    /// Write measured seconds into `wallclock_s`; off keeps the CSV a pure
    /// function of the config.
    pub record_wallclock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl ExperimentConfig {
    pub fn paper() -> Self {
        Self {
            profile: Profile::Paper,
            n_tx: 64,
            n_rx: 8,
            streams: 8,
            block_len: 320,
            pilots: 64,
            payload: 256,
            ebn0_db: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            blocks_per_point: 100,
            detectors: DetectorKind::ALL.to_vec(),
            channel: ChannelSettings::default(),
            pa: PaSettings::default(),
            network: NetworkLayout::paper(),
            train: TrainConfig::default(),
            adam: AdamConfig::default(),
            pilot_weights: LossWeights::default(),
            data_weights: LossWeights::default(),
            seed: 0,
            out: None,
            aggregate_out: None,
            full_payload_rate: false,
            record_wallclock: false,
        }
    }

    /// Same antenna array and PA operating point as the paper profile, with halved
    /// widths, 80-symbol blocks and patience 20.
    pub fn smoke() -> Self {
        Self {
            profile: Profile::Smoke,
            block_len: 80,
            pilots: 16,
            payload: 64,
            ebn0_db: vec![15.0, 20.0, 25.0],
            blocks_per_point: 10,
            network: NetworkLayout::smoke(),
            train: TrainConfig {
                epoch_cap: 500,
                patience: 20,
                ..TrainConfig::default()
            },
            ..Self::paper()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => Self::paper(),
            Profile::Smoke => Self::smoke(),
        }
    }

    /// Fraction of the block that carries payload, used by the rate metric.
    pub fn payload_fraction(&self) -> f64 {
        if self.full_payload_rate {
            1.0
        } else {
            self.payload as f64 / self.block_len as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
            ("streams", self.streams),
            ("block_len", self.block_len),
            ("payload", self.payload),
            ("blocks_per_point", self.blocks_per_point),
            ("channel.oscillators", self.channel.oscillators),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.streams > self.n_rx.min(self.n_tx) {
            return Err(Error::config(
                "streams",
                format!("{} streams exceed min(n_rx, n_tx) = {}", self.streams, self.n_rx.min(self.n_tx)),
            ));
        }
        if self.pilots + self.payload != self.block_len {
            return Err(Error::config(
                "payload",
                format!(
                    "pilots ({}) + payload ({}) must equal block_len ({})",
                    self.pilots, self.payload, self.block_len
                ),
            ));
        }
        if self.pilots < 4 {
            return Err(Error::config("pilots", "at least 4 pilots are needed for the 3:1 split"));
        }
        if self.ebn0_db.is_empty() || self.ebn0_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("ebn0_db", "needs at least one finite value"));
        }
        if self.detectors.is_empty() {
            return Err(Error::config("detectors", "needs at least one detector"));
        }
        for (i, d) in self.detectors.iter().enumerate() {
            if self.detectors[..i].contains(d) {
                return Err(Error::config("detectors", format!("{d} listed twice")));
            }
        }
        if self.detectors.iter().any(|d| d.is_neural()) && self.streams != self.n_rx {
            return Err(Error::config(
                "streams",
                format!("neural detectors map all n_rx = {} received features, so streams must equal n_rx", self.n_rx),
            ));
        }
        let ch = &self.channel;
        if !(ch.doppler_hz >= 0.0) || !ch.doppler_hz.is_finite() {
            return Err(Error::config("channel.doppler_hz", "must be finite and >= 0"));
        }
        if !(ch.symbol_rate_hz > 0.0) || !ch.symbol_rate_hz.is_finite() {
            return Err(Error::config("channel.symbol_rate_hz", "must be finite and > 0"));
        }
        if !ch.rician_k_db.is_finite() {
            return Err(Error::config("channel.rician_k_db", "must be finite"));
        }
        self.pa.coeffs()?;
        for (field, w) in [("network.generator_hidden", self.network.generator_hidden), ("network.discriminator_hidden", self.network.discriminator_hidden)] {
            if w.contains(&0) {
                return Err(Error::config(field, "widths must be at least 1"));
            }
        }
        self.train.validate().map_err(|e| prefix(e, "train"))?;
        self.pilot_weights.validate().map_err(|e| prefix(e, "pilot_weights"))?;
        self.data_weights.validate().map_err(|e| prefix(e, "data_weights"))?;
        let a = &self.adam;
        if !(a.learning_rate > 0.0) || !a.learning_rate.is_finite() {
            return Err(Error::config("adam.learning_rate", "must be finite and > 0"));
        }
        for (field, b) in [("adam.beta1", a.beta1), ("adam.beta2", a.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(field, "must lie in [0, 1)"));
            }
        }
        if !(a.epsilon > 0.0) || !(a.l2_coeff >= 0.0) {
            return Err(Error::config("adam", "epsilon must be > 0 and l2_coeff >= 0"));
        }
        Ok(())
    }
}

fn prefix(e: Error, section: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::config(format!("{section}.{field}"), message),
        other => other,
    }
}

/// Command-line overrides applied on top of the profile and file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub ebn0_db: Option<Vec<f64>>,
    pub blocks: Option<usize>,
    /// Also moves the payload so that `P + D = K` still holds.
    pub pilots: Option<usize>,
    pub detectors: Option<Vec<DetectorKind>>,
    pub pa: Option<bool>,
    pub channel: Option<ChannelSpec>,
    pub doppler_hz: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub aggregate_out: Option<PathBuf>,
    pub record_wallclock: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.ebn0_db {
            cfg.ebn0_db = v.clone();
        }
        if let Some(v) = self.blocks {
            cfg.blocks_per_point = v;
        }
        if let Some(p) = self.pilots {
            cfg.pilots = p;
            cfg.payload = cfg.block_len.saturating_sub(p);
        }
        if let Some(v) = &self.detectors {
            cfg.detectors = v.clone();
        }
        if let Some(v) = self.pa {
            cfg.pa.enabled = v;
        }
        if let Some(spec) = self.channel {
            cfg.channel.model = spec.model;
            if let Some(k) = spec.rician_k_db {
                cfg.channel.rician_k_db = k;
            }
        }
        if let Some(v) = self.doppler_hz {
            cfg.channel.doppler_hz = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = &self.aggregate_out {
            cfg.aggregate_out = Some(v.clone());
        }
        if let Some(v) = self.record_wallclock {
            cfg.record_wallclock = v;
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn toml_error(e: impl fmt::Display) -> Error {
    Error::config("config", e.to_string().trim().replace('\n', " "))
}

/// Parses TOML text over the profile it names (or `profile`, which takes
/// precedence). Missing keys keep the profile values. When the file sets
/// `pilots` or `block_len` without `payload`, the payload fills the rest of
/// the block.
pub fn parse_config_str(text: &str, profile: Option<Profile>) -> Result<ExperimentConfig> {
    let table: toml::Table = toml::from_str(text).map_err(toml_error)?;
    let named = match table.get("profile") {
        Some(toml::Value::String(s)) => Some(s.parse::<Profile>()?),
        Some(_) => return Err(Error::config("profile", "must be a string")),
        None => None,
    };
    let base = ExperimentConfig::for_profile(profile.or(named).unwrap_or_default());
    let derive_payload = !table.contains_key("payload") && (table.contains_key("pilots") || table.contains_key("block_len"));
    let mut merged = toml::Table::try_from(&base).map_err(toml_error)?;
    merge(&mut merged, table);
    if let Some(p) = profile {
        merged.insert("profile".into(), toml::Value::try_from(p).map_err(toml_error)?);
    }
    let mut cfg: ExperimentConfig = toml::Value::Table(merged).try_into().map_err(toml_error)?;
    if derive_payload {
        cfg.payload = cfg.block_len.saturating_sub(cfg.pilots);
    }
    Ok(cfg)
}

/// Profile defaults, then the optional file, then the overrides; the result
/// is validated.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::from(e).context(format!("reading {}", p.display())))?;
            parse_config_str(&text, overrides.profile)?
        }
        None => ExperimentConfig::for_profile(overrides.profile.unwrap_or_default()),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_ebn0_list(s: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::config("ebn0", format!("{m} in {s:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("not a number"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, step, b] = parts.as_slice() else {
            return Err(bad("expected start:step:stop"));
        };
        let (a, step, b) = (num(a)?, num(step)?, num(b)?);
        if !(step > 0.0) || b < a {
            return Err(bad("step must be > 0 and stop >= start"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| a + i as f64 * step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

pub fn parse_detector_list(s: &str) -> Result<Vec<DetectorKind>> {
    s.split(',').map(str::parse).collect()
}
