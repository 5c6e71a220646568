use serde::{Deserialize, Serialize};

use super::prototypes::PrototypeBank;
use crate::error::{Error, Result};
use crate::label::{LabelMap, IGNORE_LABEL};
use crate::probmap::ProbMap;
use crate::tensor::DenseTensor;

/// Settings for the prototype contrastive loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    /// Divisor applied to similarities.
    pub temperature: f64,
    /// Weight of the prototype loss in [`total_loss`].
    pub lambda: f64,
    /// ℓ2-normalize projected features before the dot product.
    pub normalize_projected: bool,
    /// Drop absent classes from the softmax instead of scoring them 0.
    pub exclude_absent: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            temperature: 0.1,
            lambda: 0.1,
            normalize_projected: true,
            exclude_absent: false,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// A per-pixel linear map `z = Wᵀ f + b`, with `W` stored C_enc × C_proto.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl ProjectionHead {
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::DimensionMismatch(format!(
                "head {in_dim}x{out_dim} got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection head".into()));
        }
        Ok(ProjectionHead {
            in_dim,
            out_dim,
            weight,
            bias,
        })
    }

    /// From a C_enc × C_proto weight tensor and a C_proto bias tensor.
    pub fn from_tensors(weight: &DenseTensor, bias: &DenseTensor) -> Result<Self> {
        let (in_dim, out_dim) = match weight.shape() {
            &[i, o] => (i, o),
            other => {
                return Err(Error::DimensionMismatch(format!(
                    "head weight must be rank 2, got {other:?}"
                )))
            }
        };
        ProjectionHead::new(in_dim, out_dim, weight.to_f64_vec(), bias.to_f64_vec())
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }
}

/// Applies `head` to every pixel of an H′×W′×C_enc map; output is `f64`.
pub fn project(features: &DenseTensor, head: &ProjectionHead) -> Result<DenseTensor> {
    let (h, w, c) = features.dims3()?;
    if c != head.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "features have {c} channels, head expects {}",
            head.in_dim
        )));
    }
    let f = features.to_f64_vec();
    let o = head.out_dim;
    let mut out = Vec::with_capacity(h * w * o);
    for px in f.chunks_exact(c) {
        let start = out.len();
        out.extend_from_slice(&head.bias);
        let z = &mut out[start..start + o];
        for (k, &fk) in px.iter().enumerate() {
            let row = &head.weight[k * o..(k + 1) * o];
            for (zj, &wkj) in z.iter_mut().zip(row) {
                *zj += wkj * fk;
            }
        }
    }
    DenseTensor::new(vec![h, w, o], out)
}

fn check_bank(z_channels: usize, bank: &PrototypeBank) -> Result<()> {
    if z_channels != bank.dim() {
        return Err(Error::DimensionMismatch(format!(
            "features have {z_channels} channels, prototypes have {}",
            bank.dim()
        )));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Similarities of one pixel vector against every prototype.
fn pixel_similarities(
    z: &[f64],
    bank: &PrototypeBank,
    cfg: &AlignConfig,
    scale: f64,
    out: &mut [f64],
) {
    for (k, s) in out.iter_mut().enumerate() {
        *s = if !bank.present()[k] && cfg.exclude_absent {
            f64::NEG_INFINITY
        } else {
            let dot: f64 = z
                .iter()
                .zip(bank.row(k))
                .map(|(a, &b)| a * f64::from(b))
                .sum();
            dot * scale / cfg.temperature
        };
    }
}

/// Temperature-scaled similarities, H′×W′×K, `f64`.
///
/// With `normalize_projected`, pixel vectors are unit-normalized first so
/// entries lie in `[-1/T, 1/T]`. Absent classes score 0, or `-inf` when
/// `exclude_absent` is set.
pub fn similarity(z: &DenseTensor, bank: &PrototypeBank, cfg: &AlignConfig) -> Result<DenseTensor> {
    cfg.validate()?;
    let (h, w, c) = z.dims3()?;
    check_bank(c, bank)?;
    let k = bank.classes();
    let values = z.to_f64_vec();
    let mut out = vec![0.0; h * w * k];
    for (i, px) in values.chunks_exact(c).enumerate() {
        let scale = if cfg.normalize_projected {
            let n = norm(px);
            if n == 0.0 {
                return Err(Error::ZeroNormFeature(i));
            }
            1.0 / n
        } else {
            1.0
        };
        pixel_similarities(px, bank, cfg, scale, &mut out[i * k..(i + 1) * k]);
    }
    DenseTensor::new(vec![h, w, k], out)
}

/// Stable `(log Σ exp(s), softmax(s))`.
fn log_softmax_parts(s: &[f64], probs: &mut [f64]) -> f64 {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &v) in probs.iter_mut().zip(s) {
        *p = (v - max).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    max + sum.ln()
}

/// Mean over non-ignore pixels of `-log softmax(s_i)[y_i]`.
pub fn proto_loss(similarities: &DenseTensor, labels: &LabelMap) -> Result<f64> {
    let (h, w, k) = similarities.dims3()?;
    if (h, w) != (labels.height(), labels.width()) {
        return Err(Error::DimensionMismatch(format!(
            "similarities are {h}x{w}, labels are {}x{}",
            labels.height(),
            labels.width()
        )));
    }
    labels.validate(k)?;
    let s = similarities.to_f64_vec();
    let mut probs = vec![0.0; k];
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, &y) in labels.labels().iter().enumerate() {
        if y == IGNORE_LABEL {
            continue;
        }
        let row = &s[i * k..(i + 1) * k];
        let y = usize::from(y);
        if row[y] == f64::NEG_INFINITY {
            return Err(Error::AbsentClass(y));
        }
        total += log_softmax_parts(row, &mut probs) - row[y];
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoLabeledPixels);
    }
    Ok(total / n as f64)
}

/// Loss and, optionally, its gradient with respect to `z`.
fn loss_and_grad(
    z: &DenseTensor,
    bank: &PrototypeBank,
    labels: &LabelMap,
    cfg: &AlignConfig,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    cfg.validate()?;
    let (h, w, c) = z.dims3()?;
    check_bank(c, bank)?;
    if (h, w) != (labels.height(), labels.width()) {
        return Err(Error::DimensionMismatch(format!(
            "features are {h}x{w}, labels are {}x{}",
            labels.height(),
            labels.width()
        )));
    }
    let k = bank.classes();
    labels.validate(k)?;
    if let Some(&y) = labels
        .labels()
        .iter()
        .find(|&&y| y != IGNORE_LABEL && !bank.present()[usize::from(y)])
    {
        return Err(Error::AbsentClass(usize::from(y)));
    }
    let n = labels.labeled_count();
    if n == 0 {
        return Err(Error::NoLabeledPixels);
    }

    let values = z.to_f64_vec();
    let mut grad = want_grad.then(|| vec![0.0; values.len()]);
    let mut s = vec![0.0; k];
    let mut probs = vec![0.0; k];
    let mut du = vec![0.0; c];
    let mut total = 0.0;
    let inv_n = 1.0 / n as f64;
    for (i, &y) in labels.labels().iter().enumerate() {
        if y == IGNORE_LABEL {
            continue;
        }
        let y = usize::from(y);
        let px = &values[i * c..(i + 1) * c];
        let len = if cfg.normalize_projected {
            let n = norm(px);
            if n == 0.0 {
                return Err(Error::ZeroNormFeature(i));
            }
            n
        } else {
            1.0
        };
        pixel_similarities(px, bank, cfg, 1.0 / len, &mut s);
        total += log_softmax_parts(&s, &mut probs) - s[y];

        let Some(grad) = grad.as_mut() else { continue };
        // dL/du = Σ_c (softmax_c - [c = y]) p_c / (N T)
        du.iter_mut().for_each(|v| *v = 0.0);
        for (class, &p) in probs.iter().enumerate() {
            let coeff = (p - f64::from(u8::from(class == y))) * inv_n / cfg.temperature;
            if coeff == 0.0 {
                continue;
            }
            for (d, &pc) in du.iter_mut().zip(bank.row(class)) {
                *d += coeff * f64::from(pc);
            }
        }
        let g = &mut grad[i * c..(i + 1) * c];
        if cfg.normalize_projected {
            // d(z/|z|)/dz = (I - u uᵀ) / |z|
            let dot: f64 = px.iter().zip(&du).map(|(a, b)| a * b).sum::<f64>() / len;
            for ((gj, &dj), &zj) in g.iter_mut().zip(&du).zip(px) {
                *gj = (dj - dot * zj / len) / len;
            }
        } else {
            g.copy_from_slice(&du);
        }
    }
    Ok((total * inv_n, grad))
}

/// Prototype contrastive loss computed straight from projected features.
///
/// Unlike [`proto_loss`], this sees the bank and rejects labels whose
/// prototype is absent regardless of `exclude_absent`.
pub fn prototype_loss(
    z: &DenseTensor,
    bank: &PrototypeBank,
    labels: &LabelMap,
    cfg: &AlignConfig,
) -> Result<f64> {
    loss_and_grad(z, bank, labels, cfg, false).map(|(l, _)| l)
}

/// Analytic `∂L/∂z`, same shape as `z`, `f64`. Ignore pixels get zero.
pub fn proto_loss_grad(
    z: &DenseTensor,
    bank: &PrototypeBank,
    labels: &LabelMap,
    cfg: &AlignConfig,
) -> Result<DenseTensor> {
    let (_, grad) = loss_and_grad(z, bank, labels, cfg, true)?;
    DenseTensor::new(z.shape().to_vec(), grad.expect("gradient requested"))
}

/// Loss and gradient in one pass.
pub fn proto_loss_with_grad(
    z: &DenseTensor,
    bank: &PrototypeBank,
    labels: &LabelMap,
    cfg: &AlignConfig,
) -> Result<(f64, DenseTensor)> {
    let (loss, grad) = loss_and_grad(z, bank, labels, cfg, true)?;
    Ok((
        loss,
        DenseTensor::new(z.shape().to_vec(), grad.expect("gradient requested"))?,
    ))
}

/// `l_s + l_t + lambda * l_proto`.
pub fn total_loss(l_s: f64, l_t: f64, l_proto: f64, lambda: f64) -> Result<f64> {
    for (name, v) in [
        ("l_s", l_s),
        ("l_t", l_t),
        ("l_proto", l_proto),
        ("lambda", lambda),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{name} = {v}")));
        }
    }
    Ok(l_s + l_t + lambda * l_proto)
}

/// Probability floor used by [`pixel_cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean negative log-likelihood over labeled pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Labeled pixels whose probability was raised to [`PROB_FLOOR`].
    pub clamped: usize,
}

pub fn pixel_cross_entropy(p: &ProbMap, labels: &LabelMap) -> Result<CrossEntropy> {
    if (p.height(), p.width()) != (labels.height(), labels.width()) {
        return Err(Error::DimensionMismatch(format!(
            "probmap is {}x{}, labels are {}x{}",
            p.height(),
            p.width(),
            labels.height(),
            labels.width()
        )));
    }
    labels.validate(p.classes())?;
    let mut total = 0.0;
    let mut n = 0usize;
    let mut clamped = 0usize;
    for (i, &y) in labels.labels().iter().enumerate() {
        if y == IGNORE_LABEL {
            continue;
        }
        let mut prob = f64::from(p.pixel(i)[usize::from(y)]);
        if prob < PROB_FLOOR {
            prob = PROB_FLOOR;
            clamped += 1;
        }
        total -= prob.ln();
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoLabeledPixels);
    }
    Ok(CrossEntropy {
        loss: total / n as f64,
        clamped,
    })
}
