//! Dual-encoder, two-head network.
//!
//! ```text
//! visual ─ conv3x3/2 ─ conv3x3/2 ─┐ top-down 1x1 + lateral 1x1 ─ P_C ─┐
//!                                                                   ├─ concat ─┬─ height head (1x1, 1x1, softplus)
//! radar  ─ conv3x3/2 ─ conv3x3/2 ─┘ top-down 1x1 + lateral 1x1 ─ P_R ─┘          └─ seg head (1x1, 1x1, sigmoid)
//! ```
//!
//! Each decoder is a two-level feature pyramid: the coarsest encoder map is
//! projected and bilinearly upsampled, then summed with 1×1 projections of the
//! finer encoder map and of the input. Parameters live in one flat vector so
//! the optimizer, checkpoints and gradient checks can treat them uniformly.

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    concat, relu_backward_inplace, relu_inplace, sigmoid, softplus, upsample2, upsample2_backward, Conv,
};
use crate::error::{Error, Result};
use crate::ground_truth::{HeightMap, RegionPartition, SegMask};
use crate::loss::{region_loss_with_grad, seg_bce_with_grad, LossSpec, RegionLosses};
use crate::radar::RadarImage;

pub const VISUAL_CHANNELS: usize = 3;
pub const RADAR_CHANNELS: usize = 4;

/// Layer widths and input scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub enc1_channels: usize,
    pub enc2_channels: usize,
    pub pyramid_channels: usize,
    pub head_hidden: usize,
    /// Per-channel multipliers applied to (rcs, distance, vx, vy).
    pub radar_scale: [f64; 4],
    /// Initial bias of the height output before the softplus.
    pub height_bias_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            enc1_channels: 8,
            enc2_channels: 16,
            pyramid_channels: 8,
            head_hidden: 8,
            radar_scale: [0.05, 0.025, 0.1, 0.1],
            height_bias_init: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    CamConv1,
    CamConv2,
    CamTop,
    CamLat1,
    CamLat0,
    RadarConv1,
    RadarConv2,
    RadarTop,
    RadarLat1,
    RadarLat0,
    HeightHidden,
    HeightOut,
    SegHidden,
    SegOut,
}

impl Layer {
    pub const ALL: [Layer; 14] = [
        Layer::CamConv1,
        Layer::CamConv2,
        Layer::CamTop,
        Layer::CamLat1,
        Layer::CamLat0,
        Layer::RadarConv1,
        Layer::RadarConv2,
        Layer::RadarTop,
        Layer::RadarLat1,
        Layer::RadarLat0,
        Layer::HeightHidden,
        Layer::HeightOut,
        Layer::SegHidden,
        Layer::SegOut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layer::CamConv1 => "camera.conv1",
            Layer::CamConv2 => "camera.conv2",
            Layer::CamTop => "camera.top",
            Layer::CamLat1 => "camera.lateral1",
            Layer::CamLat0 => "camera.lateral0",
            Layer::RadarConv1 => "radar.conv1",
            Layer::RadarConv2 => "radar.conv2",
            Layer::RadarTop => "radar.top",
            Layer::RadarLat1 => "radar.lateral1",
            Layer::RadarLat0 => "radar.lateral0",
            Layer::HeightHidden => "height.hidden",
            Layer::HeightOut => "height.out",
            Layer::SegHidden => "seg.hidden",
            Layer::SegOut => "seg.out",
        }
    }

    fn is_output(self) -> bool {
        matches!(self, Layer::HeightOut | Layer::SegOut)
    }
}

/// Where one layer's weights and bias live in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub layer: Layer,
    pub conv: (usize, usize, usize, usize),
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl Slot {
    fn conv(&self) -> Conv {
        let (i, o, k, s) = self.conv;
        Conv::new(i, o, k, s)
    }

    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.weight_offset + self.conv().weight_len()
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.conv.1
    }

    /// Weight shape `[out, in, k, k]`.
    pub fn weight_shape(&self) -> [usize; 4] {
        let (i, o, k, _) = self.conv;
        [o, i, k, k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    slots: Vec<Slot>,
    len: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (c1, c2, f, hh) = (
            cfg.enc1_channels,
            cfg.enc2_channels,
            cfg.pyramid_channels,
            cfg.head_hidden,
        );
        let spec = |layer: Layer| -> (usize, usize, usize, usize) {
            match layer {
                Layer::CamConv1 => (VISUAL_CHANNELS, c1, 3, 2),
                Layer::RadarConv1 => (RADAR_CHANNELS, c1, 3, 2),
                Layer::CamConv2 | Layer::RadarConv2 => (c1, c2, 3, 2),
                Layer::CamTop | Layer::RadarTop => (c2, f, 1, 1),
                Layer::CamLat1 | Layer::RadarLat1 => (c1, f, 1, 1),
                Layer::CamLat0 => (VISUAL_CHANNELS, f, 1, 1),
                Layer::RadarLat0 => (RADAR_CHANNELS, f, 1, 1),
                Layer::HeightHidden | Layer::SegHidden => (2 * f, hh, 1, 1),
                Layer::HeightOut => (hh, 1, 1, 1),
                Layer::SegOut => (hh, 2, 1, 1),
            }
        };
        let mut offset = 0;
        let slots = Layer::ALL
            .iter()
            .map(|&layer| {
                let conv = spec(layer);
                let c = Conv::new(conv.0, conv.1, conv.2, conv.3);
                let weight_offset = offset;
                offset += c.weight_len();
                let bias_offset = offset;
                offset += c.out_c;
                Slot {
                    layer,
                    conv,
                    weight_offset,
                    bias_offset,
                }
            })
            .collect();
        Self { slots, len: offset }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, layer: Layer) -> &Slot {
        &self.slots[Layer::ALL.iter().position(|l| *l == layer).expect("every layer has a slot")]
    }

    /// Layer owning a flat parameter index.
    pub fn layer_of(&self, index: usize) -> Option<Layer> {
        self.slots
            .iter()
            .find(|s| s.weight_range().contains(&index) || s.bias_range().contains(&index))
            .map(|s| s.layer)
    }
}

/// Model weights: architecture, expected input size and flat parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub config: ModelConfig,
    pub height: usize,
    pub width: usize,
    layout: Layout,
    pub params: Vec<f64>,
}

/// Height map and free-space probabilities produced by the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub height: HeightMap,
    pub seg: SegMask,
}

/// One training example with all targets.
#[derive(Debug, Clone)]
pub struct Sample {
    pub visual: Array3<f64>,
    pub radar: RadarImage,
    pub gt: HeightMap,
    pub partition: RegionPartition,
    pub mask: SegMask,
}

/// Loss terms of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_bg: f64,
    pub l_fg: f64,
    pub l_rad: f64,
    pub l_reg: f64,
    pub seg: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub(crate) fn new(reg: &RegionLosses, seg: f64, seg_weight: f64) -> Self {
        Self {
            l_bg: reg.l_bg,
            l_fg: reg.l_fg,
            l_rad: reg.l_rad,
            l_reg: reg.l_reg,
            seg,
            total: reg.l_reg + seg_weight * seg,
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &LossBreakdown, s: f64) {
        self.l_bg += s * other.l_bg;
        self.l_fg += s * other.l_fg;
        self.l_rad += s * other.l_rad;
        self.l_reg += s * other.l_reg;
        self.seg += s * other.seg;
        self.total += s * other.total;
    }
}

/// How the objective combines the two tasks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub loss: LossSpec,
    /// Weight of the segmentation BCE; 0 disables the branch.
    pub seg_weight: f64,
}

struct EncoderCache {
    input: Array3<f64>,
    a1: Array3<f64>,
    a2: Array3<f64>,
    p: Array3<f64>,
}

struct ForwardCache {
    cam: EncoderCache,
    radar: EncoderCache,
    features: Array3<f64>,
    height_hidden: Array3<f64>,
    height_z: Array3<f64>,
    seg_hidden: Array3<f64>,
    seg_prob: Array3<f64>,
}

impl ToyModel {
    /// Fan-in scaled uniform initialization with zeroed output layers.
    pub fn init(config: ModelConfig, height: usize, width: usize, seed: u64) -> Result<Self> {
        if !height.is_multiple_of(4) || !width.is_multiple_of(4) || height == 0 || width == 0 {
            return Err(Error::Config(format!(
                "image dims {height}x{width} must be positive multiples of 4"
            )));
        }
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in layout.slots() {
            if slot.layer.is_output() {
                continue;
            }
            let (i, _, k, _) = slot.conv;
            let bound = (6.0 / (i * k * k) as f64).sqrt();
            for w in &mut params[slot.weight_range()] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        let hb = layout.slot(Layer::HeightOut).bias_offset;
        params[hb] = config.height_bias_init;
        Ok(Self {
            config,
            height,
            width,
            layout,
            params,
        })
    }

    /// Rebuild from stored parameters, checking the length against the layout.
    pub fn from_params(config: ModelConfig, height: usize, width: usize, params: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(&config);
        if params.len() != layout.len() {
            return Err(Error::shape(format!("{} parameters", layout.len()), params.len()));
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(Self {
            config,
            height,
            width,
            layout,
            params,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.len()
    }

    fn weights(&self, layer: Layer) -> (Conv, &[f64], &[f64]) {
        let s = self.layout.slot(layer);
        (s.conv(), &self.params[s.weight_range()], &self.params[s.bias_range()])
    }

    fn apply(&self, layer: Layer, x: &Array3<f64>) -> Array3<f64> {
        let (conv, w, b) = self.weights(layer);
        conv.forward(w, b, x)
    }

    fn check_inputs(&self, visual: &Array3<f64>, radar: &RadarImage) -> Result<()> {
        let want_v = (VISUAL_CHANNELS, self.height, self.width);
        if visual.dim() != want_v {
            return Err(Error::shape(format!("visual {want_v:?}"), format!("{:?}", visual.dim())));
        }
        let want_r = (RADAR_CHANNELS, self.height, self.width);
        if radar.data.dim() != want_r {
            return Err(Error::shape(format!("radar {want_r:?}"), format!("{:?}", radar.data.dim())));
        }
        Ok(())
    }

    fn encode(&self, input: Array3<f64>, layers: [Layer; 5]) -> EncoderCache {
        let [conv1, conv2, top, lat1, lat0] = layers;
        let mut a1 = self.apply(conv1, &input);
        relu_inplace(&mut a1);
        let mut a2 = self.apply(conv2, &a1);
        relu_inplace(&mut a2);
        let t1 = upsample2(&self.apply(top, &a2)) + self.apply(lat1, &a1);
        let mut p = upsample2(&t1) + self.apply(lat0, &input);
        relu_inplace(&mut p);
        EncoderCache { input, a1, a2, p }
    }

    fn scaled_radar(&self, radar: &RadarImage) -> Array3<f64> {
        let mut x = radar.data.as_standard_layout().into_owned();
        for (c, s) in self.config.radar_scale.iter().enumerate() {
            x.index_axis_mut(Axis(0), c).mapv_inplace(|v| v * s);
        }
        x
    }

    fn forward_cached(&self, visual: &Array3<f64>, radar: &RadarImage) -> Result<ForwardCache> {
        self.check_inputs(visual, radar)?;
        let cam = self.encode(
            visual.as_standard_layout().into_owned(),
            [Layer::CamConv1, Layer::CamConv2, Layer::CamTop, Layer::CamLat1, Layer::CamLat0],
        );
        let radar = self.encode(
            self.scaled_radar(radar),
            [
                Layer::RadarConv1,
                Layer::RadarConv2,
                Layer::RadarTop,
                Layer::RadarLat1,
                Layer::RadarLat0,
            ],
        );
        let features = concat(&cam.p, &radar.p);
        let mut height_hidden = self.apply(Layer::HeightHidden, &features);
        relu_inplace(&mut height_hidden);
        let height_z = self.apply(Layer::HeightOut, &height_hidden);
        let mut seg_hidden = self.apply(Layer::SegHidden, &features);
        relu_inplace(&mut seg_hidden);
        let seg_prob = self.apply(Layer::SegOut, &seg_hidden).mapv(sigmoid);
        Ok(ForwardCache {
            cam,
            radar,
            features,
            height_hidden,
            height_z,
            seg_hidden,
            seg_prob,
        })
    }

    fn prediction_of(cache: &ForwardCache) -> Prediction {
        let height = cache.height_z.index_axis(Axis(0), 0).mapv(softplus);
        Prediction {
            height: HeightMap { values: height },
            seg: SegMask {
                data: cache.seg_prob.clone(),
            },
        }
    }

    /// Deterministic inference.
    pub fn forward(&self, visual: &Array3<f64>, radar: &RadarImage) -> Result<Prediction> {
        Ok(Self::prediction_of(&self.forward_cached(visual, radar)?))
    }

    /// Which ReLU units are active, in a fixed order. Two parameter vectors
    /// with the same pattern lie on one smooth piece of the network, so a
    /// finite-difference stencil is only trusted when its ends agree.
    pub fn relu_pattern(&self, visual: &Array3<f64>, radar: &RadarImage) -> Result<Vec<bool>> {
        let c = self.forward_cached(visual, radar)?;
        Ok([&c.cam.a1, &c.cam.a2, &c.cam.p, &c.radar.a1, &c.radar.a2, &c.radar.p, &c.height_hidden, &c.seg_hidden]
            .into_iter()
            .flat_map(|t| t.iter().map(|v| *v > 0.0))
            .collect())
    }

    /// Loss value only (used by finite-difference checks and validation).
    pub fn loss(&self, sample: &Sample, objective: &Objective) -> Result<LossBreakdown> {
        let pred = self.forward(&sample.visual, &sample.radar)?;
        let reg = crate::loss::region_loss(&objective.loss, &sample.gt, &pred.height, &sample.partition)?;
        let seg = if objective.seg_weight > 0.0 {
            crate::loss::seg_bce(&pred.seg, &sample.mask)?
        } else {
            0.0
        };
        Ok(LossBreakdown::new(&reg, seg, objective.seg_weight))
    }

    /// Loss terms and the gradient of `l_reg + seg_weight·BCE` with respect
    /// to every parameter.
    pub fn backward(&self, sample: &Sample, objective: &Objective) -> Result<(LossBreakdown, Vec<f64>)> {
        let cache = self.forward_cached(&sample.visual, &sample.radar)?;
        let pred = Self::prediction_of(&cache);
        let (reg, d_height) = region_loss_with_grad(&objective.loss, &sample.gt, &pred.height, &sample.partition)?;
        let mut grads = vec![0.0; self.layout.len()];

        // Height head: softplus' = sigmoid.
        let dz: Array2<f64> = ndarray::Zip::from(&d_height)
            .and(cache.height_z.index_axis(Axis(0), 0))
            .map_collect(|g, z| g * sigmoid(*z));
        let dz = dz.insert_axis(Axis(0));
        let mut d_features = Array3::<f64>::zeros(cache.features.dim());
        let mut d_hidden = Array3::<f64>::zeros(cache.height_hidden.dim());
        self.conv_backward(Layer::HeightOut, &cache.height_hidden, &dz, &mut grads, Some(&mut d_hidden));
        relu_backward_inplace(&mut d_hidden, &cache.height_hidden);
        self.conv_backward(Layer::HeightHidden, &cache.features, &d_hidden, &mut grads, Some(&mut d_features));

        let seg = if objective.seg_weight > 0.0 {
            let (seg, dp) = seg_bce_with_grad(&pred.seg, &sample.mask)?;
            let dz = ndarray::Zip::from(&dp)
                .and(&cache.seg_prob)
                .map_collect(|g, p| objective.seg_weight * g * p * (1.0 - p));
            let mut d_hidden = Array3::<f64>::zeros(cache.seg_hidden.dim());
            self.conv_backward(Layer::SegOut, &cache.seg_hidden, &dz, &mut grads, Some(&mut d_hidden));
            relu_backward_inplace(&mut d_hidden, &cache.seg_hidden);
            self.conv_backward(Layer::SegHidden, &cache.features, &d_hidden, &mut grads, Some(&mut d_features));
            seg
        } else {
            0.0
        };

        let f = self.config.pyramid_channels;
        let d_cam = d_features.slice(ndarray::s![..f, .., ..]).to_owned();
        let d_radar = d_features.slice(ndarray::s![f.., .., ..]).to_owned();
        self.encoder_backward(
            &cache.cam,
            d_cam,
            [Layer::CamConv1, Layer::CamConv2, Layer::CamTop, Layer::CamLat1, Layer::CamLat0],
            &mut grads,
        );
        self.encoder_backward(
            &cache.radar,
            d_radar,
            [
                Layer::RadarConv1,
                Layer::RadarConv2,
                Layer::RadarTop,
                Layer::RadarLat1,
                Layer::RadarLat0,
            ],
            &mut grads,
        );
        Ok((LossBreakdown::new(&reg, seg, objective.seg_weight), grads))
    }

    fn conv_backward(
        &self,
        layer: Layer,
        input: &Array3<f64>,
        dout: &Array3<f64>,
        grads: &mut [f64],
        dinput: Option<&mut Array3<f64>>,
    ) {
        let slot = *self.layout.slot(layer);
        let conv = slot.conv();
        let w = &self.params[slot.weight_range()];
        // Weight and bias ranges are adjacent: split once to borrow both.
        let (dw, rest) = grads[slot.weight_offset..].split_at_mut(conv.weight_len());
        let db = &mut rest[..conv.out_c];
        conv.backward(w, input, dout, dw, db, dinput);
    }

    fn encoder_backward(&self, cache: &EncoderCache, mut d_p: Array3<f64>, layers: [Layer; 5], grads: &mut [f64]) {
        let [conv1, conv2, top, lat1, lat0] = layers;
        relu_backward_inplace(&mut d_p, &cache.p);
        // p = up(t1) + lat0(input)
        self.conv_backward(lat0, &cache.input, &d_p, grads, None);
        let d_t1 = upsample2_backward(&d_p);
        // t1 = up(top(a2)) + lat1(a1)
        let mut d_a1 = Array3::<f64>::zeros(cache.a1.dim());
        self.conv_backward(lat1, &cache.a1, &d_t1, grads, Some(&mut d_a1));
        let d_top = upsample2_backward(&d_t1);
        let mut d_a2 = Array3::<f64>::zeros(cache.a2.dim());
        self.conv_backward(top, &cache.a2, &d_top, grads, Some(&mut d_a2));
        relu_backward_inplace(&mut d_a2, &cache.a2);
        self.conv_backward(conv2, &cache.a1, &d_a2, grads, Some(&mut d_a1));
        relu_backward_inplace(&mut d_a1, &cache.a1);
        self.conv_backward(conv1, &cache.input, &d_a1, grads, None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_truth::Region;

    fn zero_sample(h: usize, w: usize) -> Sample {
        Sample {
            visual: Array3::zeros((3, h, w)),
            radar: RadarImage {
                data: Array3::zeros((4, h, w)),
            },
            gt: HeightMap::zeros(h, w),
            partition: RegionPartition {
                labels: Array2::default((h, w)),
                radar_pixels: vec![],
            },
            mask: SegMask {
                data: Array3::zeros((2, h, w)),
            },
        }
    }

    #[test]
    fn zero_inputs_give_activation_of_zero() {
        let m = ToyModel::init(ModelConfig::default(), 8, 12, 7).unwrap();
        let s = zero_sample(8, 12);
        let p = m.forward(&s.visual, &s.radar).unwrap();
        assert!(p.height.values.iter().all(|v| *v == softplus(0.0)));
        assert!(p.seg.data.iter().all(|v| *v == 0.5));
        assert_eq!(p.height.dims(), (8, 12));
        assert_eq!(p.seg.data.dim(), (2, 8, 12));
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(ToyModel::init(ModelConfig::default(), 10, 12, 0).is_err());
        let m = ToyModel::init(ModelConfig::default(), 8, 12, 7).unwrap();
        let s = zero_sample(8, 16);
        assert!(matches!(m.forward(&s.visual, &s.radar), Err(Error::Shape { .. })));
    }

    #[test]
    fn layout_is_contiguous() {
        let layout = Layout::new(&ModelConfig::default());
        let mut expected = 0;
        for s in layout.slots() {
            assert_eq!(s.weight_offset, expected);
            assert_eq!(s.bias_offset, s.weight_range().end);
            expected = s.bias_range().end;
        }
        assert_eq!(expected, layout.len());
        assert_eq!(layout.layer_of(0), Some(Layer::CamConv1));
        assert_eq!(layout.layer_of(layout.len() - 1), Some(Layer::SegOut));
    }

    #[test]
    fn perfect_prediction_has_no_regression_gradient() {
        // With the output layer zeroed the prediction is softplus(b) everywhere;
        // a ground truth equal to it gives zero residuals.
        let mut m = ToyModel::init(ModelConfig::default(), 8, 12, 3).unwrap();
        let hb = m.layout().slot(Layer::HeightOut).bias_offset;
        m.params[hb] = 0.3;
        let mut s = zero_sample(8, 12);
        s.gt.values.fill(softplus(0.3));
        s.partition.labels[[2, 3]] = Region::Radar;
        s.partition.labels[[4, 4]] = Region::Foreground;
        let obj = Objective {
            loss: LossSpec::default(),
            seg_weight: 0.0,
        };
        let (l, g) = m.backward(&s, &obj).unwrap();
        assert_eq!(l.l_reg, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }
}
