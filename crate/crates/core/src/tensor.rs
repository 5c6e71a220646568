//! Dense row-major tensors and their `.npy` (format version 1.0) serialization.
//!
//! Only little-endian, C-order arrays of `float32`, `float64`, `uint8` and
//! `uint16` are supported. Headers of format versions 2.0 and 3.0 are
//! accepted on read; writes always produce version 1.0.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// The npy magic string.
pub const NPY_MAGIC: [u8; 6] = *b"\x93NUMPY";

const HEADER_ALIGN: usize = 64;

/// Element type of a [`DenseTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dtype {
    F32,
    F64,
    U8,
    U16,
}

impl Dtype {
    /// The numpy type descriptor written to headers.
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
            Dtype::U8 => "|u1",
            Dtype::U16 => "<u2",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "float32",
            Dtype::F64 => "float64",
            Dtype::U8 => "uint8",
            Dtype::U16 => "uint16",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::U8 => 1,
            Dtype::U16 => 2,
        }
    }

    fn from_descr(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F32),
            "<f8" => Ok(Dtype::F64),
            "|u1" | "<u1" | "u1" => Ok(Dtype::U8),
            "<u2" => Ok(Dtype::U16),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }
}

/// Flat row-major element buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
    U16(Vec<u16>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::F32(_) => Dtype::F32,
            TensorData::F64(_) => Dtype::F64,
            TensorData::U8(_) => Dtype::U8,
            TensorData::U16(_) => Dtype::U16,
        }
    }
}

impl From<Vec<f32>> for TensorData {
    fn from(v: Vec<f32>) -> Self {
        TensorData::F32(v)
    }
}

impl From<Vec<f64>> for TensorData {
    fn from(v: Vec<f64>) -> Self {
        TensorData::F64(v)
    }
}

impl From<Vec<u8>> for TensorData {
    fn from(v: Vec<u8>) -> Self {
        TensorData::U8(v)
    }
}

impl From<Vec<u16>> for TensorData {
    fn from(v: Vec<u16>) -> Self {
        TensorData::U16(v)
    }
}

/// A row-major array with an explicit shape and element type.
///
/// Every dimension is at least 1 and the buffer length always equals the
/// product of the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: TensorData,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: impl Into<TensorData>) -> Result<Self> {
        let data = data.into();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidShape(shape));
        }
        let expected = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape(shape.clone()))?;
        if expected != data.len() {
            return Err(Error::LengthMismatch {
                shape,
                len: data.len(),
            });
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            TensorData::F64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.data {
            TensorData::U8(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u16(&self) -> Option<&[u16]> {
        match &self.data {
            TensorData::U16(v) => Some(v),
            _ => None,
        }
    }

    /// Copies the elements into a `f64` buffer, whatever the dtype.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::U16(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }

    /// Checks that the tensor is rank 3 and returns `(d0, d1, d2)`.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[a, b, c] => Ok((a, b, c)),
            other => Err(Error::DimensionMismatch(format!(
                "expected a rank-3 tensor, got shape {other:?}"
            ))),
        }
    }
}

/// Reads a tensor in npy format from `path`.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_npy(&mut BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Writes `tensor` to `path` in npy version 1.0 format.
pub fn save_tensor(tensor: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_npy(&mut writer, tensor).map_err(|e| Error::io(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Serializes `tensor` as npy bytes.
pub fn write_npy<W: Write>(writer: &mut W, tensor: &DenseTensor) -> std::io::Result<()> {
    writer.write_all(&npy_header(tensor.dtype(), tensor.shape()))?;
    match &tensor.data {
        TensorData::F32(v) => v
            .iter()
            .try_for_each(|x| writer.write_all(&x.to_le_bytes())),
        TensorData::F64(v) => v
            .iter()
            .try_for_each(|x| writer.write_all(&x.to_le_bytes())),
        TensorData::U8(v) => writer.write_all(v),
        TensorData::U16(v) => v
            .iter()
            .try_for_each(|x| writer.write_all(&x.to_le_bytes())),
    }
}

fn npy_header(dtype: Dtype, shape: &[usize]) -> Vec<u8> {
    let shape_str = match shape {
        [single] => format!("({single},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    );
    // magic + version + u16 length + dict + '\n' must be a multiple of 64
    let unpadded = NPY_MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (HEADER_ALIGN - unpadded % HEADER_ALIGN) % HEADER_ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(unpadded + pad);
    out.extend_from_slice(&NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

/// Parses npy bytes into a tensor.
///
/// The payload must be exactly as long as the header promises; trailing
/// bytes are rejected as well as short payloads.
pub fn read_npy<R: Read>(reader: &mut R) -> Result<DenseTensor> {
    let io_err = |e| Error::io("<npy stream>", e);

    let mut preamble = [0u8; 8];
    reader
        .read_exact(&mut preamble)
        .map_err(|_| Error::MalformedHeader("file shorter than npy preamble".into()))?;
    if preamble[..6] != NPY_MAGIC {
        return Err(Error::MalformedHeader("bad magic".into()));
    }
    let header_len = match preamble[6] {
        1 => {
            let mut b = [0u8; 2];
            reader
                .read_exact(&mut b)
                .map_err(|_| Error::MalformedHeader("missing header length".into()))?;
            u16::from_le_bytes(b) as usize
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            reader
                .read_exact(&mut b)
                .map_err(|_| Error::MalformedHeader("missing header length".into()))?;
            u32::from_le_bytes(b) as usize
        }
        v => return Err(Error::MalformedHeader(format!("unsupported version {v}"))),
    };
    let mut header = vec![0u8; header_len];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::MalformedHeader("header shorter than declared".into()))?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::MalformedHeader("header is not valid UTF-8".into()))?;
    let parsed = HeaderDict::parse(header)?;
    if parsed.fortran_order {
        return Err(Error::MalformedHeader(
            "fortran order is not supported".into(),
        ));
    }
    let dtype = Dtype::from_descr(&parsed.descr)?;
    if parsed.shape.is_empty() || parsed.shape.contains(&0) {
        return Err(Error::InvalidShape(parsed.shape));
    }
    let count = parsed
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidShape(parsed.shape.clone()))?;
    let expected = count * dtype.size();

    let mut payload = Vec::with_capacity(expected);
    reader.read_to_end(&mut payload).map_err(io_err)?;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::MalformedHeader(format!(
            "payload has {} trailing bytes",
            payload.len() - expected
        )));
    }

    let data = match dtype {
        Dtype::F32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        Dtype::F64 => TensorData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        ),
        Dtype::U8 => TensorData::U8(payload),
        Dtype::U16 => TensorData::U16(
            payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
    };
    DenseTensor::new(parsed.shape, data)
}

#[derive(Debug)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl HeaderDict {
    fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            chars: text.trim_end().as_bytes(),
            pos: 0,
        };
        let mut descr = None;
        let mut fortran_order = None;
        let mut shape = None;

        p.expect(b'{')?;
        loop {
            p.skip_ws();
            if p.eat(b'}') {
                break;
            }
            let key = p.string()?;
            p.skip_ws();
            p.expect(b':')?;
            p.skip_ws();
            match key.as_str() {
                "descr" => descr = Some(p.string()?),
                "fortran_order" => fortran_order = Some(p.boolean()?),
                "shape" => shape = Some(p.tuple()?),
                other => return Err(Error::MalformedHeader(format!("unknown key '{other}'"))),
            }
            p.skip_ws();
            if !p.eat(b',') {
                p.skip_ws();
                p.expect(b'}')?;
                break;
            }
        }

        Ok(HeaderDict {
            descr: descr.ok_or_else(|| Error::MalformedHeader("missing 'descr'".into()))?,
            fortran_order: fortran_order
                .ok_or_else(|| Error::MalformedHeader("missing 'fortran_order'".into()))?,
            shape: shape.ok_or_else(|| Error::MalformedHeader("missing 'shape'".into()))?,
        })
    }
}

struct Parser<'a> {
    chars: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::MalformedHeader(format!(
                "expected '{}' at offset {}",
                c as char, self.pos
            )))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => {
                return Err(Error::MalformedHeader(format!(
                    "expected string at offset {}",
                    self.pos
                )))
            }
        };
        self.pos += 1;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == quote {
                let s = String::from_utf8_lossy(&self.chars[start..self.pos]).into_owned();
                self.pos += 1;
                return Ok(s);
            }
            self.pos += 1;
        }
        Err(Error::MalformedHeader("unterminated string".into()))
    }

    fn boolean(&mut self) -> Result<bool> {
        let rest = &self.chars[self.pos..];
        if rest.starts_with(b"True") {
            self.pos += 4;
            Ok(true)
        } else if rest.starts_with(b"False") {
            self.pos += 5;
            Ok(false)
        } else {
            Err(Error::MalformedHeader("expected True or False".into()))
        }
    }

    fn tuple(&mut self) -> Result<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(b')') {
                return Ok(dims);
            }
            let start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(Error::MalformedHeader("expected integer in shape".into()));
            }
            let digits = std::str::from_utf8(&self.chars[start..self.pos]).expect("ascii digits");
            dims.push(
                digits
                    .parse()
                    .map_err(|_| Error::MalformedHeader(format!("bad dimension {digits}")))?,
            );
            // python 2 long suffix
            self.eat(b'L');
            self.skip_ws();
            if !self.eat(b',') {
                self.skip_ws();
                self.expect(b')')?;
                return Ok(dims);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(t: &DenseTensor) -> DenseTensor {
        let mut buf = Vec::new();
        write_npy(&mut buf, t).unwrap();
        read_npy(&mut buf.as_slice()).unwrap()
    }

    #[test]
    fn reads_2x2_float32() {
        // hand-built file, header as numpy writes it
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"\x93NUMPY\x01\x00");
        let mut dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }".to_string();
        while !(10 + dict.len() + 1).is_multiple_of(64) {
            dict.push(' ');
        }
        dict.push('\n');
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let t = read_npy(&mut bytes.as_slice()).unwrap();
        assert_eq!(t.shape(), &[2, 2]);
        assert_eq!(t.as_f32().unwrap(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn header_is_aligned() {
        let t = DenseTensor::new(vec![7, 5, 3], vec![0.0f32; 105]).unwrap();
        let mut buf = Vec::new();
        write_npy(&mut buf, &t).unwrap();
        let header_len = u16::from_le_bytes([buf[8], buf[9]]) as usize;
        assert_eq!((10 + header_len) % 64, 0);
        assert_eq!(buf[10 + header_len - 1], b'\n');
        assert_eq!(buf.len(), 10 + header_len + 105 * 4);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_npy(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(
            read_npy(&mut buf.as_slice()),
            Err(Error::TruncatedPayload {
                expected: 16,
                found: 12
            })
        ));
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(
            DenseTensor::new(vec![0], Vec::<f32>::new()),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn single_uint8_roundtrip() {
        let t = DenseTensor::new(vec![1, 1], vec![7u8]).unwrap();
        assert_eq!(roundtrip(&t), t);
    }

    #[test]
    fn one_dimensional_shape_uses_trailing_comma() {
        let header = npy_header(Dtype::U16, &[5]);
        let text = String::from_utf8_lossy(&header[10..]);
        assert!(text.contains("'shape': (5,)"), "{text}");
        let t = DenseTensor::new(vec![5], vec![1u16, 2, 3, 4, 65535]).unwrap();
        assert_eq!(roundtrip(&t), t);
    }

    #[test]
    fn rejects_unsupported_dtype_and_fortran_order() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"\x93NUMPY\x01\x00");
        let dict = "{'descr': '<i8', 'fortran_order': False, 'shape': (1,), }\n";
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&[0u8; 8]);
        assert!(matches!(
            read_npy(&mut bytes.as_slice()),
            Err(Error::UnsupportedDtype(d)) if d == "<i8"
        ));

        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"\x93NUMPY\x01\x00");
        let dict = "{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }\n";
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&[0u8; 4]);
        assert!(matches!(
            read_npy(&mut bytes.as_slice()),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"\x93NUMPX\x01\x00\x00\x00".to_vec();
        assert!(matches!(
            read_npy(&mut bytes.as_slice()),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn header_keys_in_any_order() {
        let parsed =
            HeaderDict::parse("{\"shape\": (3, 4L), \"fortran_order\": False, \"descr\": \"<f8\"}")
                .unwrap();
        assert_eq!(parsed.shape, vec![3, 4]);
        assert_eq!(parsed.descr, "<f8");
        assert!(!parsed.fortran_order);
    }
}
