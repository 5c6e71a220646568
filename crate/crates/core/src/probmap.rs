use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, TensorData};

/// Default tolerance on per-pixel probability sums.
pub const DEFAULT_SUM_TOLERANCE: f64 = 1e-4;

/// Per-pixel class distributions of shape H×W×C, stored as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    classes: usize,
    probs: Vec<f32>,
}

impl ProbMap {
    /// Wraps a buffer without checking normalization; see [`validate_probmap`].
    pub fn new(height: usize, width: usize, classes: usize, probs: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || classes == 0 || probs.len() != height * width * classes {
            return Err(Error::DimensionMismatch(format!(
                "probability buffer of {} entries for {height}x{width}x{classes}",
                probs.len()
            )));
        }
        Ok(ProbMap {
            height,
            width,
            classes,
            probs,
        })
    }

    /// Converts an H×W×C tensor. `float64` tensors are narrowed to `float32`.
    pub fn from_tensor(tensor: DenseTensor) -> Result<Self> {
        let (h, w, c) = tensor.dims3()?;
        let probs = match tensor.into_data() {
            TensorData::F32(v) => v,
            TensorData::F64(v) => v.into_iter().map(|x| x as f32).collect(),
            other => {
                return Err(Error::DtypeMismatch {
                    expected: "float32",
                    found: other.dtype().name(),
                })
            }
        };
        ProbMap::new(h, w, c, probs)
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor::new(
            vec![self.height, self.width, self.classes],
            self.probs.clone(),
        )
        .expect("probmap dimensions are valid")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn probs(&self) -> &[f32] {
        &self.probs
    }

    /// The class distribution at row-major pixel index `idx`.
    pub fn pixel(&self, idx: usize) -> &[f32] {
        &self.probs[idx * self.classes..(idx + 1) * self.classes]
    }
}

/// Checks that every entry lies in `[0, 1]` and every pixel sums to 1 within
/// `tolerance`. Reports the first offending pixel in row-major order.
pub fn validate_probmap(p: &ProbMap, tolerance: f64) -> Result<()> {
    for idx in 0..p.pixels() {
        let (row, col) = (idx / p.width, idx % p.width);
        let dist = p.pixel(idx);
        if let Some((class, &value)) = dist
            .iter()
            .enumerate()
            .find(|(_, &v)| !(0.0..=1.0).contains(&v))
        {
            return Err(Error::ProbabilityOutOfRange {
                row,
                col,
                class,
                value,
            });
        }
        let sum: f64 = dist.iter().map(|&v| f64::from(v)).sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::NotNormalized { row, col, sum });
        }
    }
    Ok(())
}
