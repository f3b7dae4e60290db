//! The four-network detector state and its checkpoint format.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::losses::{g_loss_nets, LossWeights};
use super::preprocess::PreprocScales;
use crate::error::{Error, Result};
use crate::nn::{checkpoint, AdamConfig, AdamState, LayerSpec, NeuralNet, RealMatrix};

/// Which trainer drives an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Lmmse,
    Dnn,
    CycleDnn,
    CycleGan,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [Self::Lmmse, Self::Dnn, Self::CycleDnn, Self::CycleGan];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lmmse => "lmmse",
            Self::Dnn => "dnn",
            Self::CycleDnn => "cyclednn",
            Self::CycleGan => "cyclegan",
        }
    }

    pub fn is_neural(self) -> bool {
        self != Self::Lmmse
    }

    /// Whether the payload phase (pseudo-labelled training) runs.
    pub fn semi_supervised(self) -> bool {
        matches!(self, Self::CycleDnn | Self::CycleGan)
    }

    pub fn adversarial(self) -> bool {
        self == Self::CycleGan
    }

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(t: u8) -> Option<Self> {
        Self::ALL.get(t as usize).copied()
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::config("detectors", format!("unknown detector {s:?}")))
    }
}

/// Hidden widths of the generator and discriminator stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkLayout {
    pub generator_hidden: [usize; 2],
    pub discriminator_hidden: [usize; 2],
}

impl NetworkLayout {
    /// G: 16→256→512→16, D: 32→512→256→1.
    pub fn paper() -> Self {
        Self {
            generator_hidden: [256, 512],
            discriminator_hidden: [512, 256],
        }
    }

    /// Half-width variant for desk-scale runs.
    pub fn smoke() -> Self {
        Self {
            generator_hidden: [128, 256],
            discriminator_hidden: [256, 128],
        }
    }

    pub fn generator_specs(&self, width: usize) -> Vec<LayerSpec> {
        let [h1, h2] = self.generator_hidden;
        vec![
            LayerSpec::dense(h1),
            LayerSpec::leaky_relu(),
            LayerSpec::dropout(),
            LayerSpec::dense(h2),
            LayerSpec::leaky_relu(),
            LayerSpec::dropout(),
            LayerSpec::dense(width),
            LayerSpec::Tanh,
        ]
    }

    pub fn discriminator_specs(&self) -> Vec<LayerSpec> {
        let [h1, h2] = self.discriminator_hidden;
        vec![
            LayerSpec::dense(h1),
            LayerSpec::leaky_relu(),
            LayerSpec::dropout(),
            LayerSpec::dense(h2),
            LayerSpec::leaky_relu(),
            LayerSpec::dropout(),
            LayerSpec::dense(1),
        ]
    }
}

/// `G_s2y, G_y2s, D_s2y, D_y2s` with their optimizers and per-block
/// bookkeeping. The baselines use the same container: DNN touches only
/// `G_y2s`, CycleDNN only the two generators.
#[derive(Debug, Clone)]
pub struct DetectorEnsemble {
    pub kind: DetectorKind,
    pub g_s2y: NeuralNet,
    pub g_y2s: NeuralNet,
    pub d_s2y: NeuralNet,
    pub d_y2s: NeuralNet,
    /// Weights for the pilot phase.
    pub pilot_weights: LossWeights,
    /// Weights for the payload phase.
    pub data_weights: LossWeights,
    pub adam: [AdamState; 4],
    pub scales: Option<PreprocScales>,
    /// Best validation BER at the end of every training phase.
    pub val_history: Vec<f64>,
    /// Current normalized `G_y2s(Y_D)`.
    pub pseudo_labels: Option<RealMatrix>,
}

impl DetectorEnsemble {
    pub const G_S2Y: usize = 0;
    pub const G_Y2S: usize = 1;
    pub const D_S2Y: usize = 2;
    pub const D_Y2S: usize = 3;

    /// Fresh Glorot-initialized networks for `streams` complex streams
    /// (flattened width `2·streams`).
    pub fn new<R: Rng + ?Sized>(
        kind: DetectorKind,
        streams: usize,
        layout: &NetworkLayout,
        adam: AdamConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if !kind.is_neural() {
            return Err(Error::Domain("LMMSE has no trainable ensemble".into()));
        }
        let width = 2 * streams;
        let g_s2y = NeuralNet::new(width, &layout.generator_specs(width), rng)?;
        let g_y2s = NeuralNet::new(width, &layout.generator_specs(width), rng)?;
        let d_s2y = NeuralNet::new(2 * width, &layout.discriminator_specs(), rng)?;
        let d_y2s = NeuralNet::new(2 * width, &layout.discriminator_specs(), rng)?;
        Self::from_nets(kind, [g_s2y, g_y2s, d_s2y, d_y2s], adam)
    }

    /// Wraps existing networks; the generators must map `w → w` and the
    /// discriminators `2w → 1`.
    pub fn from_nets(kind: DetectorKind, nets: [NeuralNet; 4], adam: AdamConfig) -> Result<Self> {
        let [g_s2y, g_y2s, d_s2y, d_y2s] = nets;
        let w = g_s2y.input_width();
        let shapes = [
            ("g_s2y", &g_s2y, (w, w)),
            ("g_y2s", &g_y2s, (w, w)),
            ("d_s2y", &d_s2y, (2 * w, 1)),
            ("d_y2s", &d_y2s, (2 * w, 1)),
        ];
        for (name, net, want) in shapes {
            let got = (net.input_width(), net.output_width());
            if got != want {
                return Err(Error::Dimension {
                    op: name,
                    left: got,
                    right: want,
                });
            }
        }
        let adam = [
            AdamState::new(&g_s2y, adam),
            AdamState::new(&g_y2s, adam),
            AdamState::new(&d_s2y, adam),
            AdamState::new(&d_y2s, adam),
        ];
        Ok(Self {
            kind,
            g_s2y,
            g_y2s,
            d_s2y,
            d_y2s,
            pilot_weights: LossWeights::default(),
            data_weights: LossWeights::default(),
            adam,
            scales: None,
            val_history: Vec::new(),
            pseudo_labels: None,
        })
    }

    /// Flattened signal width (16 for eight streams).
    pub fn width(&self) -> usize {
        self.g_s2y.input_width()
    }

    pub fn nets(&self) -> [&NeuralNet; 4] {
        [&self.g_s2y, &self.g_y2s, &self.d_s2y, &self.d_y2s]
    }

    pub(crate) fn snapshot(&self) -> [NeuralNet; 4] {
        [self.g_s2y.clone(), self.g_y2s.clone(), self.d_s2y.clone(), self.d_y2s.clone()]
    }

    pub(crate) fn restore(&mut self, nets: [NeuralNet; 4]) {
        let [a, b, c, d] = nets;
        self.g_s2y = a;
        self.g_y2s = b;
        self.d_s2y = c;
        self.d_y2s = d;
    }

    /// Generator objective with this ensemble's discriminators in eval mode.
    pub fn g_loss(&self, s: &RealMatrix, y: &RealMatrix, w: &LossWeights) -> Result<f64> {
        let adv = self.kind.adversarial();
        g_loss_nets(
            &self.g_s2y,
            &self.g_y2s,
            adv.then_some(&self.d_s2y),
            adv.then_some(&self.d_y2s),
            s,
            y,
            w,
        )
    }
}

impl PartialEq for DetectorEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.nets() == other.nets()
            && self.pilot_weights == other.pilot_weights
            && self.data_weights == other.data_weights
            && self.scales == other.scales
    }
}

const MAGIC: &[u8; 4] = b"CMEN";
const VERSION: u32 = 1;

/// Header (kind, eight loss weights, optional scales) followed by four
/// network records. Optimizer state is not stored.
pub fn write_ensemble<W: Write>(ens: &DetectorEnsemble, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[ens.kind.tag()])?;
    for v in ens.pilot_weights.as_array().iter().chain(&ens.data_weights.as_array()) {
        w.write_all(&v.to_le_bytes())?;
    }
    match &ens.scales {
        None => w.write_all(&[0])?,
        Some(sc) => {
            w.write_all(&[1])?;
            for part in [&sc.s_max, &sc.y_max] {
                w.write_all(&(part.len() as u64).to_le_bytes())?;
                for v in part {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    for net in ens.nets() {
        checkpoint::write_net(net, w)?;
    }
    Ok(())
}

pub fn read_ensemble<R: Read>(r: &mut R, adam: AdamConfig) -> Result<DetectorEnsemble> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad ensemble magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported ensemble version {version}")));
    }
    let kind = DetectorKind::from_tag(read_u8(r)?)
        .filter(|k| k.is_neural())
        .ok_or_else(|| Error::Checkpoint("bad detector kind".into()))?;
    let mut ws = [0.0; 8];
    for v in ws.iter_mut() {
        *v = read_f64(r)?;
    }
    let weights = |o: usize| LossWeights {
        alpha: ws[o],
        beta: ws[o + 1],
        gamma: ws[o + 2],
        delta: ws[o + 3],
    };
    let scales = match read_u8(r)? {
        0 => None,
        1 => {
            let mut parts = Vec::with_capacity(2);
            for _ in 0..2 {
                let mut b8 = [0u8; 8];
                r.read_exact(&mut b8)?;
                let n = u64::from_le_bytes(b8);
                if n > 1 << 16 {
                    return Err(Error::Checkpoint(format!("scale length {n} out of range")));
                }
                parts.push((0..n).map(|_| read_f64(r)).collect::<Result<Vec<f64>>>()?);
            }
            let y_max = parts.pop().unwrap_or_default();
            let s_max = parts.pop().unwrap_or_default();
            Some(PreprocScales { s_max, y_max })
        }
        t => return Err(Error::Checkpoint(format!("bad scales flag {t}"))),
    };
    let nets = [
        checkpoint::read_net(r)?,
        checkpoint::read_net(r)?,
        checkpoint::read_net(r)?,
        checkpoint::read_net(r)?,
    ];
    let mut ens = DetectorEnsemble::from_nets(kind, nets, adam)?;
    ens.pilot_weights = weights(0);
    ens.data_weights = weights(4);
    ens.scales = scales;
    Ok(ens)
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
