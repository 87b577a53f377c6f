//! Network definitions. Parameters live in one [`ParamSet`] under the
//! prefixes `m.`, `d_int.` and `d_out.` so a single graph can span the
//! localization model and both discriminators.

use hlad_core::{Graph, Init, NodeId, ParamId, ParamSet, Result, Scalar};
use serde::{Deserialize, Serialize};

pub const MODEL_PREFIX: &str = "m.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// Merged encoder latent.
    Int,
    /// Output heatmap.
    Out,
}

impl Level {
    pub fn prefix(self) -> &'static str {
        match self {
            Level::Int => "d_int.",
            Level::Out => "d_out.",
        }
    }

    /// Tag on the discriminator's first layer, used for pass counting.
    pub fn tag(self) -> &'static str {
        match self {
            Level::Int => "d_int",
            Level::Out => "d_out",
        }
    }
}

/// Sizes of the localization network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// `[channels, bins, frames]` of one array's features.
    pub feature_shape: [usize; 3],
    pub arrays: usize,
    pub conv_channels: [usize; 3],
    pub latent: usize,
    /// Heatmap side length; must be a multiple of 4.
    pub grid: usize,
    pub decoder_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { feature_shape: [8, 257, 9], arrays: 2, conv_channels: [8, 16, 16], latent: 64, grid: 24, decoder_channels: 8 }
    }
}

fn conv_out(n: usize, stride: usize) -> usize {
    // 3x3 kernel, padding 1
    (n + 2 - 3) / stride + 1
}

impl ModelConfig {
    pub fn merged(&self) -> usize {
        self.arrays * self.latent
    }

    /// Per-array input volume.
    pub fn feature_len(&self) -> usize {
        self.feature_shape.iter().product()
    }

    pub fn heatmap_len(&self) -> usize {
        self.grid * self.grid
    }

    fn encoder_spatial(&self) -> (usize, usize) {
        let [_, h, w] = self.feature_shape;
        let (h, w) = (conv_out(conv_out(h, 2), 2), conv_out(conv_out(w, 2), 2));
        (conv_out(h, 1), conv_out(w, 1))
    }

    fn flat(&self) -> usize {
        let (h, w) = self.encoder_spatial();
        self.conv_channels[2] * h * w
    }

    fn seed_side(&self) -> usize {
        self.grid / 4
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    w: ParamId,
    b: ParamId,
}

fn add_dense<T: Scalar>(p: &mut ParamSet<T>, name: &str, inp: usize, out: usize, relu: bool) -> Result<Layer> {
    let init = if relu { Init::HeUniform { fan_in: inp } } else { Init::GlorotUniform { fan_in: inp, fan_out: out } };
    Ok(Layer { w: p.add(&format!("{name}.w"), vec![out, inp], init)?, b: p.add(&format!("{name}.b"), vec![out], Init::Zeros)? })
}

fn add_conv<T: Scalar>(p: &mut ParamSet<T>, name: &str, inp: usize, out: usize, k: usize, relu: bool) -> Result<Layer> {
    let fan_in = inp * k * k;
    let init = if relu { Init::HeUniform { fan_in } } else { Init::GlorotUniform { fan_in, fan_out: out * k * k } };
    Ok(Layer { w: p.add(&format!("{name}.w"), vec![out, inp, k, k], init)?, b: p.add(&format!("{name}.b"), vec![out], Init::Zeros)? })
}

fn dense<T: Scalar>(g: &mut Graph, p: &ParamSet<T>, l: Layer, x: NodeId) -> Result<NodeId> {
    let (w, b) = (g.param(p, l.w), g.param(p, l.b));
    g.dense(x, w, b)
}

fn conv<T: Scalar>(g: &mut Graph, p: &ParamSet<T>, l: Layer, x: NodeId, stride: usize, padding: usize) -> Result<NodeId> {
    let (w, b) = (g.param(p, l.w), g.param(p, l.b));
    g.conv2d(x, w, b, stride, padding)
}

/// Localization model M: shared array encoder, concatenation, heatmap decoder.
#[derive(Clone, Debug)]
pub struct LocalizationModel {
    pub config: ModelConfig,
    enc: [Layer; 3],
    enc_dense: Layer,
    dec_dense: Layer,
    dec_conv: [Layer; 2],
    head: Layer,
}

/// Graph nodes of one application of M.
#[derive(Clone, Copy, Debug)]
pub struct ModelNodes {
    /// `[batch, arrays * latent]`, the encoder stage G's output.
    pub latent: NodeId,
    /// `[batch, 1, grid, grid]` in (0, 1).
    pub heatmap: NodeId,
}

impl LocalizationModel {
    pub fn register<T: Scalar>(params: &mut ParamSet<T>, config: ModelConfig) -> Result<Self> {
        let [c0, _, _] = config.feature_shape;
        let [c1, c2, c3] = config.conv_channels;
        let dc = config.decoder_channels;
        let s = config.seed_side();
        Ok(Self {
            config,
            enc: [
                add_conv(params, "m.enc.conv1", c0, c1, 3, true)?,
                add_conv(params, "m.enc.conv2", c1, c2, 3, true)?,
                add_conv(params, "m.enc.conv3", c2, c3, 3, true)?,
            ],
            enc_dense: add_dense(params, "m.enc.dense", config.flat(), config.latent, true)?,
            dec_dense: add_dense(params, "m.dec.dense", config.merged(), dc * s * s, true)?,
            dec_conv: [add_conv(params, "m.dec.conv1", dc, dc, 3, true)?, add_conv(params, "m.dec.conv2", dc, dc, 3, true)?],
            head: add_conv(params, "m.dec.head", dc, 1, 1, false)?,
        })
    }

    /// θ_m.
    pub fn param_ids<T: Scalar>(params: &ParamSet<T>) -> Vec<ParamId> {
        params.ids_with_prefix(MODEL_PREFIX)
    }

    /// θ_g, the encoder-and-merge portion of θ_m.
    pub fn encoder_param_ids<T: Scalar>(params: &ParamSet<T>) -> Vec<ParamId> {
        params.ids_with_prefix("m.enc.")
    }

    /// Encoder G applied to one array input `[batch, c, bins, frames]`.
    pub fn encode<T: Scalar>(&self, g: &mut Graph, p: &ParamSet<T>, x: NodeId) -> Result<NodeId> {
        let batch = g.shape(x)[0];
        let mut h = x;
        for (i, l) in self.enc.iter().enumerate() {
            let stride = if i < 2 { 2 } else { 1 };
            h = conv(g, p, *l, h, stride, 1)?;
            h = g.relu(h)?;
        }
        let h = g.reshape(h, vec![batch, self.config.flat()])?;
        let h = dense(g, p, self.enc_dense, h)?;
        g.relu(h)
    }

    /// Full forward of M over one input node per array.
    pub fn build<T: Scalar>(&self, g: &mut Graph, p: &ParamSet<T>, arrays: &[NodeId]) -> Result<ModelNodes> {
        let encoded = arrays.iter().map(|&x| self.encode(g, p, x)).collect::<Result<Vec<_>>>()?;
        let latent = g.concat(&encoded, 1)?;
        let batch = g.shape(latent)[0];
        let (dc, s) = (self.config.decoder_channels, self.config.seed_side());
        let h = dense(g, p, self.dec_dense, latent)?;
        let h = g.relu(h)?;
        let mut h = g.reshape(h, vec![batch, dc, s, s])?;
        for l in self.dec_conv {
            h = g.upsample2(h)?;
            h = conv(g, p, l, h, 1, 1)?;
            h = g.relu(h)?;
        }
        let h = conv(g, p, self.head, h, 1, 0)?;
        let heatmap = g.sigmoid(h)?;
        Ok(ModelNodes { latent, heatmap })
    }
}

/// Domain discriminator at one level; outputs `[batch, 1]` in (0, 1),
/// read as the probability of the synthetic domain.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub level: Level,
    convs: Vec<Layer>,
    dense: Vec<Layer>,
}

const D_INT_WIDTHS: [usize; 4] = [64, 32, 16, 1];
const D_OUT_CONV: [(usize, usize); 4] = [(8, 2), (16, 2), (16, 1), (16, 1)];
const D_OUT_DENSE: [usize; 3] = [64, 32, 1];

impl Discriminator {
    pub fn register<T: Scalar>(params: &mut ParamSet<T>, level: Level, model: &ModelConfig) -> Result<Self> {
        let pre = level.prefix();
        let mut convs = Vec::new();
        let mut dense = Vec::new();
        match level {
            Level::Int => {
                let mut inp = model.merged();
                for (i, &w) in D_INT_WIDTHS.iter().enumerate() {
                    dense.push(add_dense(params, &format!("{pre}dense{}", i + 1), inp, w, i + 1 < D_INT_WIDTHS.len())?);
                    inp = w;
                }
            }
            Level::Out => {
                let (mut ch, mut side) = (1, model.grid);
                for (i, &(w, stride)) in D_OUT_CONV.iter().enumerate() {
                    convs.push(add_conv(params, &format!("{pre}conv{}", i + 1), ch, w, 3, true)?);
                    ch = w;
                    side = conv_out(side, stride);
                }
                let mut inp = ch * side * side;
                for (i, &w) in D_OUT_DENSE.iter().enumerate() {
                    dense.push(add_dense(params, &format!("{pre}dense{}", i + 1), inp, w, i + 1 < D_OUT_DENSE.len())?);
                    inp = w;
                }
            }
        }
        Ok(Self { level, convs, dense })
    }

    pub fn param_ids<T: Scalar>(&self, params: &ParamSet<T>) -> Vec<ParamId> {
        params.ids_with_prefix(self.level.prefix())
    }

    /// Applies D to `x` (`[batch, merged]` or `[batch, 1, grid, grid]`).
    pub fn build<T: Scalar>(&self, g: &mut Graph, p: &ParamSet<T>, x: NodeId) -> Result<NodeId> {
        let batch = g.shape(x)[0];
        let mut h = x;
        let mut first = true;
        for (l, &(_, stride)) in self.convs.iter().zip(&D_OUT_CONV) {
            h = conv(g, p, *l, h, stride, 1)?;
            if first {
                g.set_tag(h, self.level.tag());
                first = false;
            }
            h = g.relu(h)?;
        }
        if !self.convs.is_empty() {
            let n: usize = g.shape(h)[1..].iter().product();
            h = g.reshape(h, vec![batch, n])?;
        }
        let last = self.dense.len() - 1;
        for (i, l) in self.dense.iter().enumerate() {
            h = dense(g, p, *l, h)?;
            if first {
                g.set_tag(h, self.level.tag());
                first = false;
            }
            h = if i == last { g.sigmoid(h)? } else { g.relu(h)? };
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_parameter_groups() {
        let mut p = ParamSet::<f32>::new(1);
        let cfg = ModelConfig::default();
        let m = LocalizationModel::register(&mut p, cfg).unwrap();
        let di = Discriminator::register(&mut p, Level::Int, &cfg).unwrap();
        let dout = Discriminator::register(&mut p, Level::Out, &cfg).unwrap();
        let mut g = Graph::new();
        let xa = g.input(vec![3, 8, 257, 9]);
        let xb = g.input(vec![3, 8, 257, 9]);
        let nodes = m.build(&mut g, &p, &[xa, xb]).unwrap();
        assert_eq!(g.shape(nodes.latent), &[3, 128]);
        assert_eq!(g.shape(nodes.heatmap), &[3, 1, 24, 24]);
        let a = di.build(&mut g, &p, nodes.latent).unwrap();
        let b = dout.build(&mut g, &p, nodes.heatmap).unwrap();
        assert_eq!(g.shape(a), &[3, 1]);
        assert_eq!(g.shape(b), &[3, 1]);
        let theta_m = LocalizationModel::param_ids(&p);
        assert_eq!(theta_m.len(), 16);
        assert_eq!(di.param_ids(&p).len(), 8);
        assert_eq!(dout.param_ids(&p).len(), 14);
        assert!(LocalizationModel::encoder_param_ids(&p).iter().all(|id| theta_m.contains(id)));
        assert_eq!(p.get(p.id("d_out.dense1.w").unwrap()).shape(), &[64, 576]);
        assert_eq!(p.get(p.id("m.enc.dense.w").unwrap()).shape(), &[64, 3120]);
    }
}
