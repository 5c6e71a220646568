use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, TensorData};

/// Default teacher momentum.
pub const DEFAULT_ALPHA: f64 = 0.99;

/// `teacher = alpha * teacher + (1 - alpha) * student`, element-wise.
pub fn ema_update(teacher: &mut [f64], student: &[f64], alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if teacher.len() != student.len() {
        return Err(Error::DimensionMismatch(format!(
            "teacher has {} values, student has {}",
            teacher.len(),
            student.len()
        )));
    }
    for (t, &s) in teacher.iter_mut().zip(student) {
        *t = alpha * *t + (1.0 - alpha) * s;
    }
    Ok(())
}

/// Tensor form of [`ema_update`]. Shapes must match; the result keeps the
/// teacher's float dtype.
pub fn ema_update_tensor(
    teacher: &DenseTensor,
    student: &DenseTensor,
    alpha: f64,
) -> Result<DenseTensor> {
    if teacher.shape() != student.shape() {
        return Err(Error::DimensionMismatch(format!(
            "teacher {:?} vs student {:?}",
            teacher.shape(),
            student.shape()
        )));
    }
    let mut values = teacher.to_f64_vec();
    ema_update(&mut values, &student.to_f64_vec(), alpha)?;
    let shape = teacher.shape().to_vec();
    match teacher.data() {
        TensorData::F32(_) => DenseTensor::new(
            shape,
            values.into_iter().map(|v| v as f32).collect::<Vec<_>>(),
        ),
        TensorData::F64(_) => DenseTensor::new(shape, values),
        _ => Err(Error::DtypeMismatch {
            expected: "float",
            found: teacher.dtype().name(),
        }),
    }
}
