//! Pilot-phase and payload-phase training.
//!
//! Each epoch walks a fresh permutation of the training rows in batches.
//! Per batch the discriminators are updated first (CycleGAN only), then
//! the generators on the combined objective. After every epoch `G_y2s` is
//! scored on the held-out pilots; the best checkpoint is restored at the
//! end and training stops after `patience` epochs without a strict
//! improvement.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ensemble::{DetectorEnsemble, DetectorKind};
use super::losses::{d_loss_from_outputs, l1_mean, mean_square, targets, LossWeights};
use super::preprocess::{augment, fit_scales, flatten, unflatten, ScaleMode};
use crate::error::{Error, Result};
use crate::link::{qpsk_hard_bits, ComplexFrame, TransmissionBlock};
use crate::nn::{AdamState, NeuralNet, RealMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epoch_cap: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub label_invert_prob: f64,
    pub pilot_augment: usize,
    pub payload_augment: usize,
    pub augment_noise_std: f64,
    pub scale_mode: ScaleMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epoch_cap: 5000,
            patience: 100,
            batch_size: 128,
            label_invert_prob: 0.05,
            pilot_augment: 10,
            payload_augment: 5,
            augment_noise_std: 0.05,
            scale_mode: ScaleMode::PerDomain,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::config("patience", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.label_invert_prob) {
            return Err(Error::config("label_invert_prob", "must lie in [0, 1]"));
        }
        if self.pilot_augment == 0 {
            return Err(Error::config("pilot_augment", "must be at least 1"));
        }
        if self.payload_augment == 0 {
            return Err(Error::config("payload_augment", "must be at least 1"));
        }
        if !(self.augment_noise_std >= 0.0) || !self.augment_noise_std.is_finite() {
            return Err(Error::config("augment_noise_std", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    EpochCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_val_ber: f64,
    pub stopped_by: StopReason,
    pub used_previous_pilots: bool,
    pub pseudo_label_refreshes: usize,
}

/// Known pilot symbols and what arrived for them.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPair {
    pub s: ComplexFrame,
    pub y: ComplexFrame,
}

impl PilotPair {
    pub fn from_block(block: &TransmissionBlock) -> Self {
        Self {
            s: block.s_p.clone(),
            y: block.y_p.clone(),
        }
    }
}

/// Paired, normalized rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub s: RealMatrix,
    pub y: RealMatrix,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.s.rows()
    }

    fn concat(&self, other: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            s: self.s.vstack(&other.s)?,
            y: self.y.vstack(&other.y)?,
        })
    }
}

/// Augmented pilot training and validation rows kept from the pilot phase
/// for the payload phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSets {
    pub train: Dataset,
    pub val: Dataset,
}

/// Independent generator streams for every random consumer in a phase, so
/// that two candidates started from the same seed see identical draws.
struct TrainRngs {
    shuffle: ChaCha8Rng,
    label: ChaCha8Rng,
    augment: ChaCha8Rng,
    nets: [ChaCha8Rng; 4],
}

impl TrainRngs {
    fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            shuffle: stream(0),
            label: stream(1),
            augment: stream(2),
            nets: [stream(3), stream(4), stream(5), stream(6)],
        }
    }
}

struct PhaseResult {
    epochs: usize,
    best_val_ber: f64,
    best_val_l1: f64,
    stopped_by: StopReason,
    refreshes: usize,
}

struct PayloadContext<'a> {
    pilot_train: &'a Dataset,
    y_d: &'a RealMatrix,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hard-decision BER and mean ℓ1 error of `G_y2s` on `val`.
pub fn validation_metrics(g_y2s: &NeuralNet, val: &Dataset) -> Result<(f64, f64)> {
    if val.rows() == 0 {
        return Err(Error::State("empty validation set".into()));
    }
    let out = g_y2s.predict(&val.y)?;
    let errors = out
        .data()
        .iter()
        .zip(val.s.data())
        .filter(|(a, b)| (**a < 0.0) != (**b < 0.0))
        .count();
    Ok((errors as f64 / out.data().len() as f64, l1_mean(&out, &val.s)))
}

/// One least-squares update of `d` on stacked real and fake pairs. Returns
/// the pre-update loss.
pub fn discriminator_step<R: Rng + ?Sized>(
    d: &mut NeuralNet,
    adam: &mut AdamState,
    real: &RealMatrix,
    fake: &RealMatrix,
    inverted: bool,
    rng: &mut R,
) -> Result<f64> {
    let x = real.vstack(fake)?;
    let (out, tape) = d.forward_tape(&x, rng)?;
    let (tr, tf) = targets(inverted);
    let nr = real.rows();
    let nf = fake.rows();
    let mut grad = RealMatrix::zeros(out.rows(), 1);
    for i in 0..out.rows() {
        let v = out.get(i, 0);
        let g = if i < nr { 2.0 * (v - tr) / nr as f64 } else { 2.0 * (v - tf) / nf as f64 };
        grad.set(i, 0, g);
    }
    let loss = d_loss_from_outputs(&RealMatrix::from_vec(nr, 1, out.data()[..nr].to_vec())?, &RealMatrix::from_vec(nf, 1, out.data()[nr..].to_vec())?, inverted);
    d.backward_tape(&tape, &grad)?;
    adam.step(d);
    Ok(loss)
}

/// Accumulates gradients of the generator objective into both generators
/// and returns its train-mode value. Terms with zero weight and absent
/// discriminators are skipped entirely, including their forward passes.
#[allow(clippy::too_many_arguments)]
pub(crate) fn generator_grads(
    g_s2y: &mut NeuralNet,
    g_y2s: &mut NeuralNet,
    d_s2y: Option<&NeuralNet>,
    d_y2s: Option<&NeuralNet>,
    s: &RealMatrix,
    y: &RealMatrix,
    w: &LossWeights,
    rngs: &mut [ChaCha8Rng; 4],
) -> Result<f64> {
    let m = s.rows() as f64;
    let width = s.cols();
    let [r_gs, r_gy, r_ds, r_dy] = rngs;
    let mut loss = 0.0;

    let need_y_hat = d_s2y.is_some() || w.alpha != 0.0 || w.gamma != 0.0;
    let need_s_hat = d_y2s.is_some() || w.beta != 0.0 || w.delta != 0.0;
    let y_hat = if need_y_hat { Some(g_s2y.forward_tape(s, r_gs)?) } else { None };
    let s_hat = if need_s_hat { Some(g_y2s.forward_tape(y, r_gy)?) } else { None };

    if let Some((y_hat, tape)) = &y_hat {
        let mut g = RealMatrix::zeros(y_hat.rows(), width);
        if let Some(d) = d_s2y {
            let (o, t) = d.forward_tape(&s.hstack(y_hat)?, r_ds)?;
            loss += mean_square(&o);
            let gx = d.input_grad(&t, &o.map(|v| 2.0 * v / m))?;
            g.add_assign(&gx.columns(width, 2 * width));
        }
        if w.alpha != 0.0 {
            loss += w.alpha * l1_mean(y_hat, y);
            g.add_assign(&y_hat.sub(y).map(|v| w.alpha * sign(v) / m));
        }
        if w.gamma != 0.0 {
            let (c, tc) = g_y2s.forward_tape(y_hat, r_gy)?;
            loss += w.gamma * l1_mean(&c, s);
            let gc = c.sub(s).map(|v| w.gamma * sign(v) / m);
            g.add_assign(&g_y2s.backward_tape(&tc, &gc)?);
        }
        g_s2y.backward_tape(tape, &g)?;
    }

    if let Some((s_hat, tape)) = &s_hat {
        let mut g = RealMatrix::zeros(s_hat.rows(), width);
        if let Some(d) = d_y2s {
            let (o, t) = d.forward_tape(&y.hstack(s_hat)?, r_dy)?;
            loss += mean_square(&o);
            let gx = d.input_grad(&t, &o.map(|v| 2.0 * v / m))?;
            g.add_assign(&gx.columns(width, 2 * width));
        }
        if w.beta != 0.0 {
            loss += w.beta * l1_mean(s_hat, s);
            g.add_assign(&s_hat.sub(s).map(|v| w.beta * sign(v) / m));
        }
        if w.delta != 0.0 {
            let (c, tc) = g_s2y.forward_tape(s_hat, r_gs)?;
            loss += w.delta * l1_mean(&c, y);
            let gc = c.sub(y).map(|v| w.delta * sign(v) / m);
            g.add_assign(&g_s2y.backward_tape(&tc, &gc)?);
        }
        g_y2s.backward_tape(tape, &g)?;
    }
    Ok(loss)
}

fn train_batch(
    ens: &mut DetectorEnsemble,
    s: &RealMatrix,
    y: &RealMatrix,
    w: &LossWeights,
    inverted: bool,
    rngs: &mut TrainRngs,
) -> Result<()> {
    let kind = ens.kind;
    let DetectorEnsemble {
        g_s2y,
        g_y2s,
        d_s2y,
        d_y2s,
        adam,
        ..
    } = ens;
    let [a_gs, a_gy, a_ds, a_dy] = adam;
    if kind.adversarial() {
        let fake_y = g_s2y.predict(s)?;
        discriminator_step(d_s2y, a_ds, &s.hstack(y)?, &s.hstack(&fake_y)?, inverted, &mut rngs.nets[2])?;
        let fake_s = g_y2s.predict(y)?;
        discriminator_step(d_y2s, a_dy, &y.hstack(s)?, &y.hstack(&fake_s)?, inverted, &mut rngs.nets[3])?;
    }
    match kind {
        DetectorKind::Dnn => {
            let only_beta = LossWeights {
                alpha: 0.0,
                beta: w.beta,
                gamma: 0.0,
                delta: 0.0,
            };
            generator_grads(g_s2y, g_y2s, None, None, s, y, &only_beta, &mut rngs.nets)?;
            a_gy.step(g_y2s);
        }
        DetectorKind::CycleDnn => {
            generator_grads(g_s2y, g_y2s, None, None, s, y, w, &mut rngs.nets)?;
            a_gs.step(g_s2y);
            a_gy.step(g_y2s);
        }
        DetectorKind::CycleGan => {
            generator_grads(g_s2y, g_y2s, Some(d_s2y), Some(d_y2s), s, y, w, &mut rngs.nets)?;
            a_gs.step(g_s2y);
            a_gy.step(g_y2s);
        }
        DetectorKind::Lmmse => return Err(Error::State("LMMSE is not trainable".into())),
    }
    Ok(())
}

fn train_epoch(
    ens: &mut DetectorEnsemble,
    data: &Dataset,
    w: &LossWeights,
    cfg: &TrainConfig,
    rngs: &mut TrainRngs,
) -> Result<()> {
    let mut order: Vec<usize> = (0..data.rows()).collect();
    order.shuffle(&mut rngs.shuffle);
    for chunk in order.chunks(cfg.batch_size) {
        let s = data.s.select_rows(chunk);
        let y = data.y.select_rows(chunk);
        let inverted = rngs.label.random::<f64>() < cfg.label_invert_prob;
        train_batch(ens, &s, &y, w, inverted, rngs)?;
    }
    Ok(())
}

fn payload_dataset(
    ens: &DetectorEnsemble,
    ctx: &PayloadContext<'_>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Dataset, RealMatrix)> {
    let labels = ens.g_y2s.predict(ctx.y_d)?;
    let (s, y) = augment(&labels, ctx.y_d, cfg.payload_augment, cfg.augment_noise_std, rng)?;
    let data = ctx.pilot_train.concat(&Dataset { s, y })?;
    Ok((data, labels))
}

fn run_phase(
    ens: &mut DetectorEnsemble,
    train: &Dataset,
    val: &Dataset,
    w: &LossWeights,
    cfg: &TrainConfig,
    rngs: &mut TrainRngs,
    payload: Option<PayloadContext<'_>>,
) -> Result<PhaseResult> {
    let (mut best_ber, mut best_l1) = validation_metrics(&ens.g_y2s, val)?;
    let mut best = ens.snapshot();
    let mut data = train.clone();
    let mut refreshes = 0;
    if let Some(ctx) = &payload {
        let (d, labels) = payload_dataset(ens, ctx, cfg, &mut rngs.augment)?;
        data = d;
        ens.pseudo_labels = Some(labels);
    }
    let mut since_best = 0;
    let mut epochs = 0;
    let mut stopped_by = StopReason::EpochCap;
    while epochs < cfg.epoch_cap {
        train_epoch(ens, &data, w, cfg, rngs)?;
        epochs += 1;
        let (ber, l1) = validation_metrics(&ens.g_y2s, val)?;
        if ber < best_ber {
            best_ber = ber;
            best_l1 = l1;
            best = ens.snapshot();
            since_best = 0;
            if let Some(ctx) = &payload {
                if ctx.y_d.rows() > 0 {
                    let (d, labels) = payload_dataset(ens, ctx, cfg, &mut rngs.augment)?;
                    data = d;
                    ens.pseudo_labels = Some(labels);
                    refreshes += 1;
                }
            }
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_by = StopReason::Patience;
                break;
            }
        }
    }
    ens.restore(best);
    ens.val_history.push(best_ber);
    Ok(PhaseResult {
        epochs,
        best_val_ber: best_ber,
        best_val_l1: best_l1,
        stopped_by,
        refreshes,
    })
}

fn check_trainable(ens: &DetectorEnsemble, frame: &ComplexFrame) -> Result<()> {
    if 2 * frame.rows() != ens.width() {
        return Err(Error::Dimension {
            op: "ensemble input",
            left: (frame.rows(), frame.symbols()),
            right: (ens.width() / 2, frame.symbols()),
        });
    }
    Ok(())
}

/// Pilot-phase training (current pilots, and in a second candidate current
/// plus previous pilots). Leaves the better candidate in `ens` and returns
/// the pilot sets for the payload phase.
///
/// Normalization maxima are refitted every block: the transmitted domain
/// over the training pilots, the received domain over every received vector
/// the block's training touches (all pilots, the payload and any previous
/// pilots), so every network input stays inside `[−1, 1]` before
/// augmentation noise.
pub fn train_supervised<R: Rng + ?Sized>(
    ens: &mut DetectorEnsemble,
    current: &PilotPair,
    previous: Option<&PilotPair>,
    y_d: &ComplexFrame,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(TrainReport, PilotSets)> {
    cfg.validate()?;
    let p = current.s.symbols();
    if p < 4 || current.y.symbols() != p {
        return Err(Error::InsufficientData(format!(
            "{p} pilot pairs cannot be split 3:1 into training and validation sets"
        )));
    }
    check_trainable(ens, &current.s)?;
    check_trainable(ens, &current.y)?;
    check_trainable(ens, y_d)?;

    let s_all = flatten(&current.s);
    let y_all = flatten(&current.y);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let n_val = p / 4;
    let (val_idx, train_idx) = order.split_at(n_val);
    let s_train = s_all.select_rows(train_idx);
    let y_train = y_all.select_rows(train_idx);
    let s_val = s_all.select_rows(val_idx);
    let y_val = y_all.select_rows(val_idx);

    let prev = match previous {
        Some(pp) => {
            check_trainable(ens, &pp.s)?;
            Some((flatten(&pp.s), flatten(&pp.y)))
        }
        None => None,
    };
    let mut s_fit = s_train.clone();
    let mut y_fit = y_all.vstack(&flatten(y_d))?;
    if let Some((ps, py)) = &prev {
        s_fit = s_fit.vstack(ps)?;
        y_fit = y_fit.vstack(py)?;
    }
    let scales = fit_scales(&s_fit, &y_fit, cfg.scale_mode)?;
    ens.scales = Some(scales.clone());

    let norm = |s: &RealMatrix, y: &RealMatrix| -> Result<(RealMatrix, RealMatrix)> {
        Ok((scales.normalize_s(s)?, scales.normalize_y(y)?))
    };
    let (s_tr, y_tr) = norm(&s_train, &y_train)?;
    let (s_tr, y_tr) = augment(&s_tr, &y_tr, cfg.pilot_augment, cfg.augment_noise_std, rng)?;
    let (s_va, y_va) = norm(&s_val, &y_val)?;
    let (s_va, y_va) = augment(&s_va, &y_va, cfg.pilot_augment, cfg.augment_noise_std, rng)?;
    let train = Dataset { s: s_tr, y: y_tr };
    let val = Dataset { s: s_va, y: y_va };
    let prev_aug = match &prev {
        Some((ps, py)) => {
            let (s, y) = norm(ps, py)?;
            let (s, y) = augment(&s, &y, cfg.pilot_augment, cfg.augment_noise_std, rng)?;
            Some(Dataset { s, y })
        }
        None => None,
    };

    let seed: u64 = rng.random();
    let w = ens.pilot_weights;
    let mut only_current = ens.clone();
    let res_current = run_phase(&mut only_current, &train, &val, &w, cfg, &mut TrainRngs::new(seed), None)?;

    let (winner, result, used_previous, train_set) = match prev_aug {
        Some(prev_set) => {
            let extended = train.concat(&prev_set)?;
            let mut with_prev = ens.clone();
            let res_prev = run_phase(&mut with_prev, &extended, &val, &w, cfg, &mut TrainRngs::new(seed), None)?;
            let better = (res_prev.best_val_ber, res_prev.best_val_l1) < (res_current.best_val_ber, res_current.best_val_l1);
            if better {
                (with_prev, res_prev, true, extended)
            } else {
                (only_current, res_current, false, train)
            }
        }
        None => (only_current, res_current, false, train),
    };
    *ens = winner;
    let report = TrainReport {
        epochs_run: result.epochs,
        best_val_ber: result.best_val_ber,
        stopped_by: result.stopped_by,
        used_previous_pilots: used_previous,
        pseudo_label_refreshes: 0,
    };
    Ok((report, PilotSets { train: train_set, val }))
}

/// Payload-phase training on pilots plus pseudo-labelled payload.
pub fn train_semisupervised<R: Rng + ?Sized>(
    ens: &mut DetectorEnsemble,
    sets: &PilotSets,
    y_d: &ComplexFrame,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    cfg.validate()?;
    if !ens.kind.semi_supervised() {
        return Err(Error::State(format!("{} has no payload phase", ens.kind)));
    }
    if sets.val.rows() == 0 {
        return Err(Error::State("payload phase needs the pilot validation set".into()));
    }
    check_trainable(ens, y_d)?;
    let scales = ens
        .scales
        .as_ref()
        .ok_or_else(|| Error::State("scales not fitted; run the pilot phase first".into()))?;
    let y_norm = scales.normalize_y(&flatten(y_d))?;
    let seed: u64 = rng.random();
    let w = ens.data_weights;
    let ctx = PayloadContext {
        pilot_train: &sets.train,
        y_d: &y_norm,
    };
    let res = run_phase(ens, &sets.train, &sets.val, &w, cfg, &mut TrainRngs::new(seed), Some(ctx))?;
    Ok(TrainReport {
        epochs_run: res.epochs,
        best_val_ber: res.best_val_ber,
        stopped_by: res.stopped_by,
        used_previous_pilots: false,
        pseudo_label_refreshes: res.refreshes,
    })
}

/// `G_y2s(Y_D)` on normalized inputs, left in the normalized domain.
pub fn pseudo_label(ens: &DetectorEnsemble, y_d: &ComplexFrame) -> Result<RealMatrix> {
    let scales = ens
        .scales
        .as_ref()
        .ok_or_else(|| Error::State("scales not fitted".into()))?;
    ens.g_y2s.predict(&scales.normalize_y(&flatten(y_d))?)
}

/// Payload estimate and hard bits from `G_y2s`.
pub fn detect(ens: &DetectorEnsemble, y_d: &ComplexFrame) -> Result<(ComplexFrame, Vec<u8>)> {
    let scales = ens
        .scales
        .as_ref()
        .ok_or_else(|| Error::State("scales not fitted".into()))?;
    let est = unflatten(&scales.denormalize_s(&pseudo_label(ens, y_d)?)?)?;
    let bits = qpsk_hard_bits(&est);
    Ok((est, bits))
}

/// Both phases for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub supervised: TrainReport,
    pub semi_supervised: Option<TrainReport>,
}

impl BlockReport {
    pub fn epochs_run(&self) -> usize {
        self.supervised.epochs_run + self.semi_supervised.as_ref().map_or(0, |r| r.epochs_run)
    }

    pub fn pseudo_label_refreshes(&self) -> usize {
        self.semi_supervised.as_ref().map_or(0, |r| r.pseudo_label_refreshes)
    }
}

/// The pilot phase, then the payload phase when the ensemble's kind has
/// one.
pub fn train_block<R: Rng + ?Sized>(
    ens: &mut DetectorEnsemble,
    current: &PilotPair,
    previous: Option<&PilotPair>,
    y_d: &ComplexFrame,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<BlockReport> {
    let (supervised, sets) = train_supervised(ens, current, previous, y_d, cfg, rng)?;
    let semi_supervised = if ens.kind.semi_supervised() {
        Some(train_semisupervised(ens, &sets, y_d, cfg, rng)?)
    } else {
        None
    };
    Ok(BlockReport {
        supervised,
        semi_supervised,
    })
}

/// DNN or CycleDNN training for one block.
pub fn train_baseline<R: Rng + ?Sized>(
    ens: &mut DetectorEnsemble,
    current: &PilotPair,
    previous: Option<&PilotPair>,
    y_d: &ComplexFrame,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<BlockReport> {
    if !matches!(ens.kind, DetectorKind::Dnn | DetectorKind::CycleDnn) {
        return Err(Error::State(format!("{} is not a baseline detector", ens.kind)));
    }
    train_block(ens, current, previous, y_d, cfg, rng)
}
