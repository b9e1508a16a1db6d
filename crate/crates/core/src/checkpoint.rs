//! Model checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"COHM1"
//! u32 number of widths (2 for linear, 3 for MLP)
//! u32 widths...            input, [hidden,] classes
//! f32 parameters...        per layer: weight (in × out, row-major), then bias
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{Layer, Model};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 5] = b"COHM1";

pub fn write_model<T: Scalar, W: Write>(model: &Model<T>, mut out: W) -> Result<()> {
    out.write_all(MODEL_MAGIC)?;
    let widths = model.widths();
    out.write_all(&(widths.len() as u32).to_le_bytes())?;
    for w in widths {
        out.write_all(&(w as u32).to_le_bytes())?;
    }
    for v in model.params() {
        out.write_all(&v.to_f32_lossy().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_model<T: Scalar, R: Read>(mut input: R) -> Result<Model<T>> {
    let mut magic = [0u8; 5];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let count = read_u32(&mut input)? as usize;
    if !(2..=3).contains(&count) {
        return Err(Error::Checkpoint(format!("unsupported width count {count}")));
    }
    let widths = (0..count)
        .map(|_| read_u32(&mut input).map(|w| w as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(count - 1);
    for pair in widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let weight = read_floats::<T, _>(&mut input, fan_in * fan_out)?;
        let bias = read_floats::<T, _>(&mut input, fan_out)?;
        layers.push(Layer {
            weight: Array2::from_shape_vec((fan_in, fan_out), weight).expect("sized read"),
            bias: Array1::from_vec(bias),
        });
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Model::from_layers(layers)
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_model(bytes.as_slice())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input
        .read_exact(&mut b)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_floats<T: Scalar, R: Read>(input: &mut R, count: usize) -> Result<Vec<T>> {
    let mut bytes = vec![0u8; count * 4];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::Checkpoint("truncated parameters".into()))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| T::from_f32_exact(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}
