//! Binary parameter checkpoints.
//!
//! Layout (little-endian): `b"HLAD"`, version `u32`, param count `u32`, then
//! per parameter: name length `u32`, UTF-8 name bytes, rank `u32`, `rank`
//! dims as `u32`, and the values as `f32`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{GradError, Result};
use crate::param::ParamSet;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"HLAD";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(params: &ParamSet<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (_, name, t) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| GradError::Checkpoint(format!("truncated: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads `(name, tensor)` pairs in stored order.
pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<Vec<(String, Tensor<T>)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| GradError::Checkpoint(format!("truncated: {e}")))?;
    if &magic != MAGIC {
        return Err(GradError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(GradError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|e| GradError::Checkpoint(format!("truncated: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| GradError::Checkpoint("name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes).map_err(|e| GradError::Checkpoint(format!("truncated: {e}")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| T::from_f64_lossy(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

pub fn save<T: Scalar>(params: &ParamSet<T>, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(params, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Overwrites the values of `params` from a checkpoint; every stored name must
/// exist with the same shape.
pub fn load_into<T: Scalar>(params: &mut ParamSet<T>, path: &Path) -> Result<()> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    for (name, tensor) in read_checkpoint::<T, _>(f)? {
        let id = params.id(&name).ok_or_else(|| GradError::UnknownParam(name.clone()))?;
        tensor.expect_shape(params.get(id).shape(), &name)?;
        *params.get_mut(id) = tensor;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::Init;

    #[test]
    fn round_trip_preserves_names_ids_and_values() {
        let mut p = ParamSet::<f32>::new(9);
        p.add("enc.conv1.w", vec![2, 1, 3, 3], Init::HeUniform { fan_in: 9 }).unwrap();
        p.add("enc.conv1.b", vec![2], Init::Zeros).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        let back = read_checkpoint::<f32, _>(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for ((id, name, t), (n2, t2)) in p.iter().zip(&back) {
            assert_eq!(name, n2);
            assert_eq!(t, t2);
            assert_eq!(p.id(n2), Some(id));
        }
    }

    #[test]
    fn truncation_and_bad_magic_detected() {
        let mut p = ParamSet::<f32>::new(1);
        p.add("w", vec![4], Init::HeUniform { fan_in: 4 }).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        for cut in 0..buf.len() {
            assert!(read_checkpoint::<f32, _>(&buf[..cut]).is_err(), "cut at {cut}");
        }
        buf[0] = b'X';
        assert!(read_checkpoint::<f32, _>(buf.as_slice()).is_err());
    }
}
