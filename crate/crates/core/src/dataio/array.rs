//! Self-describing little-endian arrays.
//!
//! Header, 16 bytes: magic `PM4D`, `u16` element type, `u32` height,
//! `u32` width, `u16` channels. Row-major payload follows.

use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"PM4D";
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u16)]
pub enum ElemType {
    F32 = 1,
    U16 = 2,
    U8 = 3,
    F64 = 4,
}

impl ElemType {
    pub fn size(self) -> usize {
        match self {
            ElemType::F32 => 4,
            ElemType::U16 => 2,
            ElemType::U8 => 1,
            ElemType::F64 => 8,
        }
    }

    fn from_code(code: u16) -> Option<Self> {
        Some(match code {
            1 => ElemType::F32,
            2 => ElemType::U16,
            3 => ElemType::U8,
            4 => ElemType::F64,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    pub elem: ElemType,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(elem: ElemType, height: usize, width: usize, channels: usize) -> Self {
        Self {
            elem,
            height,
            width,
            channels,
        }
    }

    pub fn elements(&self) -> usize {
        self.height * self.width * self.channels
    }
}

#[derive(Debug, Error)]
pub enum ArrayError {
    #[error("bad magic {0:?}")]
    Magic([u8; 4]),
    #[error("unknown element type code {0}")]
    ElemType(u16),
    #[error("truncated header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("payload has {found} bytes, header implies {expected}")]
    PayloadLength { expected: usize, found: usize },
    #[error("header declares {found:?}, expected {expected:?}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode_header(shape: &Shape) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..6].copy_from_slice(&(shape.elem as u16).to_le_bytes());
    h[6..10].copy_from_slice(&(shape.height as u32).to_le_bytes());
    h[10..14].copy_from_slice(&(shape.width as u32).to_le_bytes());
    h[14..16].copy_from_slice(&(shape.channels as u16).to_le_bytes());
    h
}

pub fn decode_header(bytes: &[u8]) -> Result<Shape, ArrayError> {
    if bytes.len() < HEADER_LEN {
        return Err(ArrayError::TruncatedHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("length checked");
    if magic != MAGIC {
        return Err(ArrayError::Magic(magic));
    }
    let code = u16::from_le_bytes([bytes[4], bytes[5]]);
    let elem = ElemType::from_code(code).ok_or(ArrayError::ElemType(code))?;
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("length checked")) as usize;
    Ok(Shape {
        elem,
        height: u32_at(6),
        width: u32_at(10),
        channels: u16::from_le_bytes([bytes[14], bytes[15]]) as usize,
    })
}

/// Element payloads, one variant per storage type.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    U16(Vec<u16>),
    U8(Vec<u8>),
    F64(Vec<f64>),
}

impl Payload {
    fn elem(&self) -> ElemType {
        match self {
            Payload::F32(_) => ElemType::F32,
            Payload::U16(_) => ElemType::U16,
            Payload::U8(_) => ElemType::U8,
            Payload::F64(_) => ElemType::F64,
        }
    }

    fn len(&self) -> usize {
        match self {
            Payload::F32(v) => v.len(),
            Payload::U16(v) => v.len(),
            Payload::U8(v) => v.len(),
            Payload::F64(v) => v.len(),
        }
    }
}

pub fn encode(height: usize, width: usize, channels: usize, payload: &Payload) -> Vec<u8> {
    let shape = Shape::new(payload.elem(), height, width, channels);
    assert_eq!(payload.len(), shape.elements(), "payload matches shape");
    let mut out = Vec::with_capacity(HEADER_LEN + shape.elements() * shape.elem.size());
    out.extend_from_slice(&encode_header(&shape));
    match payload {
        Payload::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Payload::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Payload::U8(v) => out.extend_from_slice(v),
        Payload::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

/// Decodes an array whose header must equal `expected`.
pub fn decode(bytes: &[u8], expected: &Shape) -> Result<Payload, ArrayError> {
    let shape = decode_header(bytes)?;
    if shape != *expected {
        return Err(ArrayError::ShapeMismatch {
            expected: expected.clone(),
            found: shape,
        });
    }
    let body = &bytes[HEADER_LEN..];
    let need = shape.elements() * shape.elem.size();
    if body.len() != need {
        return Err(ArrayError::PayloadLength {
            expected: need,
            found: body.len(),
        });
    }
    Ok(match shape.elem {
        ElemType::F32 => Payload::F32(body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect()),
        ElemType::U16 => Payload::U16(body.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()),
        ElemType::U8 => Payload::U8(body.to_vec()),
        ElemType::F64 => Payload::F64(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()),
    })
}

pub fn write_file(path: &Path, height: usize, width: usize, channels: usize, payload: &Payload) -> std::io::Result<()> {
    std::fs::File::create(path)?.write_all(&encode(height, width, channels, payload))
}

pub fn read_file(path: &Path, expected: &Shape) -> Result<Payload, ArrayError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, expected)
}
