//! U-net, dilated U-net and MFP-Unet topologies.
//!
//! All three share one encoder/decoder body with four pooling stages. The
//! MFP-Unet adds a pyramid branch: every decoder level `upᵏ` goes through a
//! 3×3 convolution to 16 channels, is upsampled to full resolution, and the
//! four maps are concatenated into the 64-channel input of the classifier.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::data::image::Mask;
use crate::error::{ensure, Error, Result};
use crate::nn::init::glorot_uniform;
use crate::nn::ConvSpec;
use crate::tensor::{chw, Real, Tensor};

/// Number of pooling stages; input extents must be divisible by `2^DEPTH`.
pub const DEPTH: usize = 4;
/// Channels produced by each pyramid convolution.
pub const PYRAMID_CHANNELS: usize = 16;
/// Input channels: raw image and its thresholded copy.
pub const INPUT_CHANNELS: usize = 2;
pub const OUTPUT_CHANNELS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    Unet,
    DilatedUnet,
    MfpUnet,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Unet => "unet",
            Architecture::DilatedUnet => "dilated-unet",
            Architecture::MfpUnet => "mfp-unet",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unet" => Ok(Architecture::Unet),
            "dilated-unet" => Ok(Architecture::DilatedUnet),
            "mfp-unet" => Ok(Architecture::MfpUnet),
            other => Err(Error::contract(format!(
                "unknown architecture {other:?} (expected unet, dilated-unet or mfp-unet)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub arch: Architecture,
    /// Square input extent `N`.
    pub input_extent: usize,
    /// Channel width `B` of the first level.
    pub base_width: usize,
    /// Dilation of the body's 3×3 convolutions (forced to 1 for plain U-net).
    pub dilation: usize,
}

impl ModelConfig {
    pub fn new(arch: Architecture, input_extent: usize, base_width: usize, dilation: usize) -> Self {
        ModelConfig {
            arch,
            input_extent,
            base_width,
            dilation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.input_extent > 0 && self.input_extent % (1 << DEPTH) == 0,
            "input extent {} must be a positive multiple of 16",
            self.input_extent
        );
        ensure!(
            self.base_width >= 2,
            "base width must be at least 2, got {}",
            self.base_width
        );
        ensure!(self.dilation >= 1, "dilation must be at least 1");
        Ok(())
    }

    fn body_dilation(&self) -> usize {
        match self.arch {
            Architecture::Unet => 1,
            _ => self.dilation,
        }
    }

    /// Channel width of decoder level `upᵏ`, `k = 1..=4` (`up⁴` is full resolution).
    pub fn decoder_width(&self, level: usize) -> usize {
        self.base_width << (DEPTH - level)
    }

    /// Extent of decoder level `upᵏ`.
    pub fn decoder_extent(&self, level: usize) -> usize {
        self.input_extent >> (DEPTH - level)
    }
}

/// Nearest-upsampling factor that brings `upᵏ` to full resolution: 8, 4, 2, 1.
pub fn pyramid_upsample_factor(level: usize) -> usize {
    1 << (DEPTH - level)
}

#[derive(Clone, Copy, Debug)]
struct ConvLayer {
    spec: ConvSpec,
    weight: ParamId,
    bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct DoubleConv {
    first: ConvLayer,
    second: ConvLayer,
}

#[derive(Clone, Copy, Debug)]
struct DecoderLevel {
    upconv: ConvLayer,
    convs: DoubleConv,
}

#[derive(Clone, Debug)]
struct Topology {
    encoder: Vec<DoubleConv>,
    bottleneck: DoubleConv,
    decoder: Vec<DecoderLevel>,
    pyramid: Vec<ConvLayer>,
    classifier: ConvLayer,
}

/// Intermediate handles of a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub logits: Var,
    /// Decoder outputs `up¹..up⁴`.
    pub decoder: Vec<Var>,
    /// Input of the final 1×1 classifier.
    pub pre_classifier: Var,
}

#[derive(Clone, Debug)]
pub struct Model<T> {
    config: ModelConfig,
    pub params: ParamStore<T>,
    topology: Topology,
}

struct Builder<'a, T, R> {
    params: ParamStore<T>,
    rng: &'a mut R,
}

impl<T: Real, R: rand::Rng> Builder<'_, T, R> {
    fn conv(&mut self, name: &str, spec: ConvSpec) -> Result<ConvLayer> {
        let weight = self
            .params
            .add(format!("{name}.weight"), glorot_uniform(&spec.weight_shape(), self.rng))?;
        let bias = self
            .params
            .add(format!("{name}.bias"), Tensor::zeros(vec![spec.out_channels]))?;
        Ok(ConvLayer { spec, weight, bias })
    }

    fn transposed(&mut self, name: &str, spec: ConvSpec) -> Result<ConvLayer> {
        let weight = self.params.add(
            format!("{name}.weight"),
            glorot_uniform(&spec.transposed_weight_shape(), self.rng),
        )?;
        let bias = self
            .params
            .add(format!("{name}.bias"), Tensor::zeros(vec![spec.out_channels]))?;
        Ok(ConvLayer { spec, weight, bias })
    }

    fn double(&mut self, name: &str, cin: usize, cout: usize, d: usize) -> Result<DoubleConv> {
        Ok(DoubleConv {
            first: self.conv(&format!("{name}.conv1"), ConvSpec::same(cin, cout, 3, d))?,
            second: self.conv(&format!("{name}.conv2"), ConvSpec::same(cout, cout, 3, d))?,
        })
    }
}

impl<T: Real> Model<T> {
    /// Builds a freshly initialized model. Initialization is a pure function
    /// of `(config, seed)`.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder {
            params: ParamStore::new(),
            rng: &mut rng,
        };
        let d = config.body_dilation();
        let w = config.base_width;

        let mut encoder = Vec::with_capacity(DEPTH);
        let mut cin = INPUT_CHANNELS;
        for level in 0..DEPTH {
            let cout = w << level;
            encoder.push(b.double(&format!("enc{}", level + 1), cin, cout, d)?);
            cin = cout;
        }
        let bottleneck = b.double("bottleneck", cin, w << DEPTH, d)?;

        let mut decoder = Vec::with_capacity(DEPTH);
        for level in 1..=DEPTH {
            let c = config.decoder_width(level);
            let name = format!("up{level}");
            let upconv = b.transposed(
                &format!("{name}.upconv"),
                ConvSpec::new(2 * c, c, 2).with_stride(2),
            )?;
            let convs = b.double(&name, 2 * c, c, d)?;
            decoder.push(DecoderLevel { upconv, convs });
        }

        let (pyramid, classifier_in) = if config.arch == Architecture::MfpUnet {
            let mut pyramid = Vec::with_capacity(DEPTH);
            for level in 1..=DEPTH {
                pyramid.push(b.conv(
                    &format!("pyramid{level}"),
                    ConvSpec::same(config.decoder_width(level), PYRAMID_CHANNELS, 3, 1),
                )?);
            }
            (pyramid, DEPTH * PYRAMID_CHANNELS)
        } else {
            (Vec::new(), w)
        };
        let classifier = b.conv("classifier", ConvSpec::new(classifier_in, OUTPUT_CHANNELS, 1))?;

        Ok(Model {
            config,
            params: b.params,
            topology: Topology {
                encoder,
                bottleneck,
                decoder,
                pyramid,
                classifier,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn arch(&self) -> Architecture {
        self.config.arch
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Same topology and values in another numeric profile.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut params = ParamStore::new();
        for (_, p) in self.params.iter() {
            params
                .add(p.name.clone(), p.tensor.cast())
                .expect("names are unique in the source store");
        }
        Model {
            config: self.config,
            params,
            topology: self.topology.clone(),
        }
    }

    fn conv(&self, tape: &mut Tape<T>, layer: &ConvLayer, x: Var) -> Result<Var> {
        let w = tape.param(&self.params, layer.weight);
        let b = tape.param(&self.params, layer.bias);
        tape.conv2d(x, w, b, layer.spec)
    }

    fn conv_relu(&self, tape: &mut Tape<T>, layer: &ConvLayer, x: Var) -> Result<Var> {
        let y = self.conv(tape, layer, x)?;
        Ok(tape.relu(y))
    }

    fn double(&self, tape: &mut Tape<T>, block: &DoubleConv, x: Var) -> Result<Var> {
        let y = self.conv_relu(tape, &block.first, x)?;
        self.conv_relu(tape, &block.second, y)
    }

    /// Records the full forward pass for a `2×N×N` input.
    pub fn forward(&self, tape: &mut Tape<T>, input: Var) -> Result<ForwardOutput> {
        let n = self.config.input_extent;
        ensure!(
            tape.shape(input) == [INPUT_CHANNELS, n, n],
            "model expects a {INPUT_CHANNELS}×{n}×{n} input, got {:?}",
            tape.shape(input)
        );
        let topo = &self.topology;
        let mut skips = Vec::with_capacity(DEPTH);
        let mut x = input;
        for block in &topo.encoder {
            let y = self.double(tape, block, x)?;
            skips.push(y);
            x = tape.max_pool2d(y)?;
        }
        x = self.double(tape, &topo.bottleneck, x)?;

        let mut decoder = Vec::with_capacity(DEPTH);
        for level in &topo.decoder {
            let skip = skips.pop().expect("one skip per level");
            let w = tape.param(&self.params, level.upconv.weight);
            let b = tape.param(&self.params, level.upconv.bias);
            let up = tape.conv_transpose2d(x, w, b, level.upconv.spec)?;
            let up = tape.relu(up);
            let merged = tape.concat_channels(&[skip, up])?;
            x = self.double(tape, &level.convs, merged)?;
            decoder.push(x);
        }

        let pre_classifier = if topo.pyramid.is_empty() {
            x
        } else {
            let mut maps = Vec::with_capacity(DEPTH);
            for (i, layer) in topo.pyramid.iter().enumerate().rev() {
                let y = self.conv_relu(tape, layer, decoder[i])?;
                maps.push(tape.upsample_nearest(y, pyramid_upsample_factor(i + 1))?);
            }
            tape.concat_channels(&maps)?
        };
        let logits = self.conv(tape, &topo.classifier, pre_classifier)?;
        Ok(ForwardOutput {
            logits,
            decoder,
            pre_classifier,
        })
    }

    /// Logits for a `2×N×N` image tensor.
    pub fn logits(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let x = tape.input(image);
        let out = self.forward(&mut tape, x)?;
        Ok(tape.tensor(out.logits))
    }

    /// Per-pixel argmax over the two output channels; channel 1 is foreground.
    pub fn forward_segment(&self, image: &Tensor<T>) -> Result<Mask> {
        logits_to_mask(&self.logits(image)?)
    }
}

/// Argmax of a `2×H×W` logit map; ties resolve to background.
pub fn logits_to_mask<T: Real>(logits: &Tensor<T>) -> Result<Mask> {
    let (c, h, w) = chw(logits.shape())?;
    ensure!(c == 2, "expected 2 logit channels, got {c}");
    let z = logits.data();
    let data = (0..h * w).map(|p| (z[h * w + p] > z[p]) as u8).collect();
    Mask::new(w, h, data)
}

pub fn build_unet<T: Real>(n: usize, base_width: usize, seed: u64) -> Result<Model<T>> {
    Model::build(ModelConfig::new(Architecture::Unet, n, base_width, 1), seed)
}

pub fn build_dilated_unet<T: Real>(n: usize, base_width: usize, dilation: usize, seed: u64) -> Result<Model<T>> {
    Model::build(
        ModelConfig::new(Architecture::DilatedUnet, n, base_width, dilation),
        seed,
    )
}

pub fn build_mfp_unet<T: Real>(n: usize, base_width: usize, dilation: usize, seed: u64) -> Result<Model<T>> {
    Model::build(
        ModelConfig::new(Architecture::MfpUnet, n, base_width, dilation),
        seed,
    )
}
