//! Pointwise regression losses, the region-weighted composite and the
//! free-space BCE.
//!
//! All pointwise losses are functions of `Δh = |h_true − h_pred|`. The weighted
//! variants multiply by `ln(Δh + 1)`, which is below 1 for `Δh < e − 1` and
//! above it beyond, so small residuals are damped and large ones amplified.
//! Huber and the enhanced Huber loss switch from the quadratic to the linear
//! branch at `Δh = 1/σ²`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_truth::{HeightMap, Region, RegionPartition, SegMask};

/// Lower/upper clamp applied to probabilities inside the BCE.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    L1,
    L2,
    Wl1,
    Wl2,
    #[serde(rename = "hl")]
    Huber,
    Ehl,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::L1,
        LossKind::L2,
        LossKind::Wl1,
        LossKind::Wl2,
        LossKind::Huber,
        LossKind::Ehl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
            LossKind::Wl1 => "wl1",
            LossKind::Wl2 => "wl2",
            LossKind::Huber => "hl",
            LossKind::Ehl => "ehl",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("huber") && *k == LossKind::Huber))
            .ok_or_else(|| Error::Config(format!("unknown loss '{s}' (expected l1, l2, wl1, wl2, hl, ehl)")))
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name().to_uppercase())
    }
}

/// Which pointwise loss to use and how to weight the three regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Quadratic/linear breakpoint parameter; the switch happens at `1/σ²`.
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            kind: LossKind::Ehl,
            sigma: 3.0,
            alpha: 0.5,
            beta: 1.0,
            gamma: 2.0,
        }
    }
}

impl LossSpec {
    pub fn with_kind(kind: LossKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("loss.sigma must be > 0, got {}", self.sigma)));
        }
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("loss.{name} must be finite and >= 0, got {w}")));
            }
        }
        Ok(())
    }

    /// `Δh` at which Huber-style losses switch branch.
    pub fn breakpoint(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }

    /// Loss as a function of the absolute residual, and its derivative in `Δh`.
    pub fn of_residual(&self, dh: f64) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        let w = dh.ln_1p();
        let dw = 1.0 / (dh + 1.0);
        match self.kind {
            LossKind::L1 => (dh, 1.0),
            LossKind::L2 => (dh * dh, 2.0 * dh),
            LossKind::Wl1 => (dh * w, w + dh * dw),
            LossKind::Wl2 => (dh * dh * w, 2.0 * dh * w + dh * dh * dw),
            LossKind::Huber => {
                if dh < 1.0 / s2 {
                    (0.5 * s2 * dh * dh, s2 * dh)
                } else {
                    (dh - 0.5 / s2, 1.0)
                }
            }
            LossKind::Ehl => {
                if dh < 1.0 / s2 {
                    let q = 0.5 * s2 * dh * dh;
                    (q * w, s2 * dh * w + q * dw)
                } else {
                    let lin = dh - 0.5 / s2;
                    (lin * w, w + lin * dw)
                }
            }
        }
    }
}

/// Pointwise loss and its derivative with respect to `h_pred`.
///
/// The derivative at `Δh = 0` is taken as 0.
pub fn pointwise_loss(spec: &LossSpec, h_true: f64, h_pred: f64) -> (f64, f64) {
    let diff = h_pred - h_true;
    let (value, d_residual) = spec.of_residual(diff.abs());
    let grad = if diff > 0.0 {
        d_residual
    } else if diff < 0.0 {
        -d_residual
    } else {
        0.0
    };
    (value, grad)
}

/// Per-region mean losses and their weighted composite.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionLosses {
    pub l_bg: f64,
    pub l_fg: f64,
    pub l_rad: f64,
    pub l_reg: f64,
}

fn check_same_dims(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("{what} {a:?}"), format!("{b:?}")));
    }
    Ok(())
}

fn region_index(r: Region) -> usize {
    match r {
        Region::Background => 0,
        Region::Foreground => 1,
        Region::Radar => 2,
    }
}

fn region_pass(
    spec: &LossSpec,
    gt: &HeightMap,
    pred: &HeightMap,
    part: &RegionPartition,
    mut grad: Option<&mut Array2<f64>>,
) -> Result<RegionLosses> {
    check_same_dims(gt.dims(), pred.dims(), "prediction dims vs ground truth")?;
    check_same_dims(gt.dims(), part.dims(), "partition dims vs ground truth")?;

    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for ((t, p), r) in gt.values.iter().zip(pred.values.iter()).zip(part.labels.iter()) {
        let k = region_index(*r);
        sums[k] += pointwise_loss(spec, *t, *p).0;
        counts[k] += 1;
    }
    let mean = |k: usize| if counts[k] == 0 { 0.0 } else { sums[k] / counts[k] as f64 };
    let (l_bg, l_fg, l_rad) = (mean(0), mean(1), mean(2));
    let weights = [spec.alpha, spec.beta, spec.gamma];

    if let Some(g) = grad.as_mut() {
        check_same_dims(gt.dims(), g.dim(), "gradient buffer vs ground truth")?;
        let scale: Vec<f64> = (0..3)
            .map(|k| if counts[k] == 0 { 0.0 } else { weights[k] / counts[k] as f64 })
            .collect();
        for (((g, t), p), r) in g
            .iter_mut()
            .zip(gt.values.iter())
            .zip(pred.values.iter())
            .zip(part.labels.iter())
        {
            *g = scale[region_index(*r)] * pointwise_loss(spec, *t, *p).1;
        }
    }

    Ok(RegionLosses {
        l_bg,
        l_fg,
        l_rad,
        l_reg: spec.alpha * l_bg + spec.beta * l_fg + spec.gamma * l_rad,
    })
}

/// Region means of the pointwise loss and the weighted composite. Empty
/// regions contribute 0.
pub fn region_loss(
    spec: &LossSpec,
    gt: &HeightMap,
    pred: &HeightMap,
    part: &RegionPartition,
) -> Result<RegionLosses> {
    region_pass(spec, gt, pred, part, None)
}

/// Same as [`region_loss`], also returning `∂l_reg/∂pred` per pixel.
pub fn region_loss_with_grad(
    spec: &LossSpec,
    gt: &HeightMap,
    pred: &HeightMap,
    part: &RegionPartition,
) -> Result<(RegionLosses, Array2<f64>)> {
    let mut grad = Array2::zeros(gt.dims());
    let losses = region_pass(spec, gt, pred, part, Some(&mut grad))?;
    Ok((losses, grad))
}

fn bce_pass(pred: &SegMask, gt: &SegMask, mut grad: Option<&mut ndarray::Array3<f64>>) -> Result<f64> {
    if pred.data.dim() != gt.data.dim() {
        return Err(Error::shape(
            format!("seg mask {:?}", gt.data.dim()),
            format!("{:?}", pred.data.dim()),
        ));
    }
    let n = gt.data.len() as f64;
    let mut total = 0.0;
    for (p, y) in pred.data.iter().zip(gt.data.iter()) {
        let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        total -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
    }
    if let Some(g) = grad.as_mut() {
        for ((g, p), y) in g.iter_mut().zip(pred.data.iter()).zip(gt.data.iter()) {
            *g = if *p > BCE_EPS && *p < 1.0 - BCE_EPS {
                (-y / p + (1.0 - y) / (1.0 - p)) / n
            } else {
                0.0
            };
        }
    }
    Ok(total / n)
}

/// Mean binary cross-entropy over both mask channels.
pub fn seg_bce(pred: &SegMask, gt: &SegMask) -> Result<f64> {
    bce_pass(pred, gt, None)
}

/// BCE plus `∂BCE/∂p` for every predicted probability.
pub fn seg_bce_with_grad(pred: &SegMask, gt: &SegMask) -> Result<(f64, ndarray::Array3<f64>)> {
    let mut grad = ndarray::Array3::zeros(pred.data.dim());
    let v = bce_pass(pred, gt, Some(&mut grad))?;
    Ok((v, grad))
}

/// Height and segmentation objectives weighted equally.
pub fn total_loss(reg: &RegionLosses, seg: f64) -> f64 {
    reg.l_reg + seg
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub kind: LossKind,
    pub samples: usize,
    pub max_rel_err: f64,
    /// `(h_true, h_pred)` at the worst sample.
    pub worst: (f64, f64),
    pub passed: bool,
}

/// Denominator floor for relative errors, so vanishing derivatives are
/// compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare analytic derivatives with central differences at random
/// `(h_true, h_pred)` pairs, keeping `10·step` away from `Δh = 0` and from the
/// branch point.
pub fn grad_check(spec: &LossSpec, samples: usize, step: f64, tol: f64) -> GradCheckReport {
    grad_check_seeded(spec, samples, step, tol, 0x5eed)
}

pub fn grad_check_seeded(spec: &LossSpec, samples: usize, step: f64, tol: f64, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 10.0 * step;
    let bp = spec.breakpoint();
    let mut max_rel_err = 0.0f64;
    let mut worst = (0.0, 0.0);
    let mut taken = 0;
    while taken < samples {
        let h_true: f64 = rng.gen_range(0.0..3.0);
        // Mix small residuals around the breakpoint with large ones.
        let dh: f64 = if rng.gen_bool(0.5) {
            rng.gen_range(0.0..4.0 * bp)
        } else {
            rng.gen_range(0.0..4.0)
        };
        if dh < margin || (dh - bp).abs() < margin {
            continue;
        }
        let h_pred = if rng.gen_bool(0.5) { h_true + dh } else { h_true - dh };
        let analytic = pointwise_loss(spec, h_true, h_pred).1;
        let numeric = (pointwise_loss(spec, h_true, h_pred + step).0
            - pointwise_loss(spec, h_true, h_pred - step).0)
            / (2.0 * step);
        let err = relative_error(analytic, numeric, REL_ERR_FLOOR);
        if err > max_rel_err {
            max_rel_err = err;
            worst = (h_true, h_pred);
        }
        taken += 1;
    }
    GradCheckReport {
        kind: spec.kind,
        samples,
        max_rel_err,
        worst,
        passed: max_rel_err <= tol,
    }
}
