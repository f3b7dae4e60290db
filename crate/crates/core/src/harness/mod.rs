//! Seeded Monte-Carlo sweeps over Eb/N0 and blocks for every configured
//! detector, with BER / rate metrics and CSV output.

mod config;
mod csv;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{
    load_config, parse_config_str, parse_detector_list, parse_ebn0_list, ChannelModel, ChannelSettings, ChannelSpec,
    ExperimentConfig, Overrides, PaSettings, Profile,
};
pub use csv::{aggregate, format_float, read_records, write_aggregate, write_csv, write_records, AGGREGATE_HEADER, HEADER};

use crate::channel::{gen_rayleigh_sequence, gen_rician_sequence, ChannelConfig, ChannelRealization, LosComponent};
use crate::detectors::{
    detect, lmmse_detect, train_semisupervised, train_supervised, DetectorEnsemble, DetectorKind, PilotPair,
};
use crate::error::{Error, Result};
use crate::link::{generate_block, qpsk_hard_bits, LinkConfig, QPSK_BITS_PER_SYMBOL};

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub ebn0_db: f64,
    pub block_index: usize,
    pub detector: DetectorKind,
    pub ber: f64,
    pub achievable_rate_bits_per_use: f64,
    pub epochs_run: usize,
    pub used_previous_pilots: bool,
    pub pseudo_label_refreshes: usize,
    pub wallclock_s: f64,
    pub seed: u64,
}

/// A record plus the payload BER measured between the pilot phase and the
/// payload phase (semi-supervised detectors only).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub record: MetricsRecord,
    pub supervised_ber: Option<f64>,
}

/// Hamming distance over length.
pub fn ber(detected: &[u8], truth: &[u8]) -> Result<f64> {
    if detected.len() != truth.len() || truth.is_empty() {
        return Err(Error::Domain(format!(
            "BER needs equal non-empty sequences, got {} and {}",
            detected.len(),
            truth.len()
        )));
    }
    let errors = detected.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / truth.len() as f64)
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// `ρ · n · m · (1 − H_b(min(p, 1−p)))` bits per channel use.
pub fn achievable_rate(p: f64, bits_per_symbol: usize, streams: usize, payload_fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("BER {p} outside [0, 1]")));
    }
    let q = p.min(1.0 - p);
    Ok(payload_fraction * (streams * bits_per_symbol) as f64 * (1.0 - binary_entropy(q)))
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based seed derivation:
/// `h₀ = mix64(master + γ)`, `h_{i+1} = mix64(h_i ^ mix64(path_i + γ))`
/// with wrapping arithmetic and `γ = 0x9e3779b97f4a7c15`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master.wrapping_add(GOLDEN_GAMMA)), |h, &x| {
        mix64(h ^ mix64(x.wrapping_add(GOLDEN_GAMMA)))
    })
}

/// Purpose tags in the seed path.
mod purpose {
    pub const CHANNEL: u64 = 0;
    pub const LOS: u64 = 1;
    pub const DATA: u64 = 2;
    pub const INIT: u64 = 3;
    pub const TRAIN: u64 = 4;
}

fn detector_id(kind: DetectorKind) -> u64 {
    match kind {
        DetectorKind::Lmmse => 0,
        DetectorKind::Dnn => 1,
        DetectorKind::CycleDnn => 2,
        DetectorKind::CycleGan => 3,
    }
}

/// The `blocks_per_point` channel matrices used at Eb/N0 index `point`.
pub fn channel_sequence(cfg: &ExperimentConfig, point: usize) -> Result<Vec<ChannelRealization>> {
    let ch_cfg = ChannelConfig {
        n_rx: cfg.n_rx,
        n_tx: cfg.n_tx,
        blocks: cfg.blocks_per_point,
        max_doppler_hz: cfg.channel.doppler_hz,
        oscillators: cfg.channel.oscillators,
        block_period_s: ChannelConfig::block_period(cfg.block_len, cfg.channel.symbol_rate_hz),
    };
    let seed = derive_seed(cfg.seed, &[point as u64, purpose::CHANNEL]);
    match cfg.channel.model {
        ChannelModel::Rayleigh => gen_rayleigh_sequence(&ch_cfg, seed),
        ChannelModel::Rician => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[point as u64, purpose::LOS]));
            let los = LosComponent::draw(cfg.n_rx, cfg.n_tx, &mut rng);
            let k = 10f64.powf(cfg.channel.rician_k_db / 10.0);
            gen_rician_sequence(&ch_cfg, k, &los, seed)
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    Ok(run_experiment_detailed(cfg, |_| {})?.into_iter().map(|o| o.record).collect())
}

/// [`run_experiment`] keeping the pilot-phase BER, with a callback per
/// finished record. Records come out ordered by Eb/N0, block, then detector
/// in config order.
///
/// Neural ensembles start fresh at every Eb/N0 point and are warm-started
/// from block to block within it. Every detector sees the same channel,
/// symbols and noise for a given (Eb/N0, block).
pub fn run_experiment_detailed(
    cfg: &ExperimentConfig,
    mut on_outcome: impl FnMut(&BlockOutcome),
) -> Result<Vec<BlockOutcome>> {
    cfg.validate()?;
    let pa = cfg.pa.coeffs()?;
    let mut out = Vec::with_capacity(cfg.ebn0_db.len() * cfg.blocks_per_point * cfg.detectors.len());
    for (point, &ebn0_db) in cfg.ebn0_db.iter().enumerate() {
        let p = point as u64;
        let channels = channel_sequence(cfg, point).map_err(|e| e.context(format!("channel at {ebn0_db} dB")))?;
        let mut ensembles: Vec<Option<DetectorEnsemble>> = cfg
            .detectors
            .iter()
            .map(|&kind| {
                if !kind.is_neural() {
                    return Ok(None);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[p, purpose::INIT, detector_id(kind)]));
                let mut ens = DetectorEnsemble::new(kind, cfg.streams, &cfg.network, cfg.adam, &mut rng)?;
                ens.pilot_weights = cfg.pilot_weights;
                ens.data_weights = cfg.data_weights;
                Ok(Some(ens))
            })
            .collect::<Result<_>>()?;
        let link = LinkConfig {
            streams: cfg.streams,
            pilots: cfg.pilots,
            payload: cfg.payload,
            pa: pa.clone(),
            ebn0_db,
        };
        let mut previous: Option<PilotPair> = None;
        for (b, ch) in channels.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[p, purpose::DATA, b as u64]));
            let block = generate_block(ch, &link, &mut rng)?;
            let pilots = PilotPair::from_block(&block);
            for (di, &kind) in cfg.detectors.iter().enumerate() {
                let started = Instant::now();
                let ctx = || format!("{kind} at {ebn0_db} dB, block {b}");
                let mut epochs_run = 0;
                let mut used_previous_pilots = false;
                let mut refreshes = 0;
                let mut supervised_ber = None;
                let bits = match &mut ensembles[di] {
                    None => {
                        let est = lmmse_detect(&block.y_d, ch, cfg.streams, block.noise_variance, 1.0)
                            .map_err(|e| e.context(ctx()))?;
                        qpsk_hard_bits(&est)
                    }
                    Some(ens) => {
                        let mut trng =
                            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[p, purpose::TRAIN, b as u64, detector_id(kind)]));
                        let (sup, sets) =
                            train_supervised(ens, &pilots, previous.as_ref(), &block.y_d, &cfg.train, &mut trng)
                                .map_err(|e| e.context(ctx()))?;
                        epochs_run += sup.epochs_run;
                        used_previous_pilots = sup.used_previous_pilots;
                        if kind.semi_supervised() {
                            let (_, bits) = detect(ens, &block.y_d)?;
                            supervised_ber = Some(ber(&bits, &block.bits)?);
                            let semi = train_semisupervised(ens, &sets, &block.y_d, &cfg.train, &mut trng)
                                .map_err(|e| e.context(ctx()))?;
                            epochs_run += semi.epochs_run;
                            refreshes = semi.pseudo_label_refreshes;
                        }
                        detect(ens, &block.y_d)?.1
                    }
                };
                let error_rate = ber(&bits, &block.bits)?;
                let record = MetricsRecord {
                    ebn0_db,
                    block_index: b,
                    detector: kind,
                    ber: error_rate,
                    achievable_rate_bits_per_use: achievable_rate(
                        error_rate,
                        QPSK_BITS_PER_SYMBOL,
                        cfg.streams,
                        cfg.payload_fraction(),
                    )?,
                    epochs_run,
                    used_previous_pilots,
                    pseudo_label_refreshes: refreshes,
                    wallclock_s: if cfg.record_wallclock { started.elapsed().as_secs_f64() } else { 0.0 },
                    seed: cfg.seed,
                };
                let outcome = BlockOutcome { record, supervised_ber };
                on_outcome(&outcome);
                out.push(outcome);
            }
            previous = Some(pilots);
        }
    }
    Ok(out)
}

/// Runs the experiment and writes the CSV (and aggregate CSV) named in the
/// config, if any.
pub fn run_and_write(cfg: &ExperimentConfig, on_outcome: impl FnMut(&BlockOutcome)) -> Result<Vec<MetricsRecord>> {
    let records: Vec<MetricsRecord> = run_experiment_detailed(cfg, on_outcome)?.into_iter().map(|o| o.record).collect();
    if let Some(path) = &cfg.out {
        write_csv(&records, path)?;
    }
    if let Some(path) = &cfg.aggregate_out {
        let mut buf = Vec::new();
        write_aggregate(&records, &mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))?;
    }
    Ok(records)
}
