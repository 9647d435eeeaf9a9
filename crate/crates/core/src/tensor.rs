//! Dense little-endian tensors as stored in dataset files.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    U32,
    U8,
}

impl DType {
    pub fn size(&self) -> usize {
        match self {
            DType::F32 | DType::U32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U32(Vec<u32>),
    U8(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

/// Number of elements of a shape; the empty shape is a scalar.
pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(
            numel(&shape),
            data.len(),
            "shape {shape:?} vs {} values",
            data.len()
        );
        Self {
            shape,
            data: TensorData::F32(data),
        }
    }

    pub fn u8(shape: Vec<usize>, data: Vec<u8>) -> Self {
        assert_eq!(
            numel(&shape),
            data.len(),
            "shape {shape:?} vs {} values",
            data.len()
        );
        Self {
            shape,
            data: TensorData::U8(data),
        }
    }

    pub fn scalar_u32(v: u32) -> Self {
        Self {
            shape: vec![],
            data: TensorData::U32(vec![v]),
        }
    }

    pub fn empty(dtype: DType) -> Self {
        let data = match dtype {
            DType::F32 => TensorData::F32(vec![]),
            DType::U32 => TensorData::U32(vec![]),
            DType::U8 => TensorData::U8(vec![]),
        };
        Self {
            shape: vec![0],
            data,
        }
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F32(_) => DType::F32,
            TensorData::U32(_) => DType::U32,
            TensorData::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            TensorData::F32(v) => v.len(),
            TensorData::U32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_len(&self) -> usize {
        self.len() * self.dtype().size()
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u32(&self) -> Option<&[u32]> {
        match &self.data {
            TensorData::U32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.data {
            TensorData::U8(v) => Some(v),
            _ => None,
        }
    }

    /// Values widened to `f32`; `u8` is read as `v / 255`.
    pub fn to_f32_vec(&self) -> Vec<f32> {
        match &self.data {
            TensorData::F32(v) => v.clone(),
            TensorData::U32(v) => v.iter().map(|x| *x as f32).collect(),
            TensorData::U8(v) => v.iter().map(|x| *x as f32 / 255.0).collect(),
        }
    }

    /// Rows along the outer dimension of a rank-2 `f32` tensor.
    pub fn rows(&self) -> Option<std::slice::Chunks<'_, f32>> {
        let data = self.as_f32()?;
        let width = *self.shape.get(1)?;
        (self.shape.len() == 2 && width > 0).then(|| data.chunks(width))
    }

    pub fn write_le<W: Write>(&self, w: &mut W) -> io::Result<()> {
        match &self.data {
            TensorData::F32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
            TensorData::U32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
            TensorData::U8(v) => w.write_all(v),
        }
    }

    pub fn read_le<R: Read>(r: &mut R, shape: &[usize], dtype: DType) -> io::Result<Self> {
        let n = numel(shape);
        let mut bytes = vec![0u8; n * dtype.size()];
        r.read_exact(&mut bytes)?;
        let data = match dtype {
            DType::F32 => TensorData::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::U32 => TensorData::U32(
                bytes
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::U8 => TensorData::U8(bytes),
        };
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_has_empty_shape() {
        let t = Tensor::scalar_u32(7);
        assert_eq!(numel(&t.shape), 1);
        assert_eq!(t.byte_len(), 4);
    }

    #[test]
    fn rows_of_matrix() {
        let t = Tensor::f32(vec![2, 3], vec![1., 2., 3., 4., 5., 6.]);
        let rows: Vec<_> = t.rows().unwrap().collect();
        assert_eq!(rows, vec![&[1., 2., 3.][..], &[4., 5., 6.][..]]);
        assert!(Tensor::scalar_u32(1).rows().is_none());
    }

    proptest! {
        #[test]
        fn le_round_trip(values in proptest::collection::vec(any::<f32>(), 0..64)) {
            let t = Tensor::f32(vec![values.len()], values);
            let mut buf = Vec::new();
            t.write_le(&mut buf).unwrap();
            prop_assert_eq!(buf.len(), t.byte_len());
            let back = Tensor::read_le(&mut &buf[..], &t.shape, DType::F32).unwrap();
            // Bitwise comparison so NaN payloads count too.
            let a: Vec<u32> = t.as_f32().unwrap().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u32> = back.as_f32().unwrap().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
