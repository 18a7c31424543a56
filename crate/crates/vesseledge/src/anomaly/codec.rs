//! Versioned binary model file.
//!
//! Layout (little-endian): magic `M3FP`, version u16, cell size f64,
//! component budget u16, cell count u32, then per cell: cell id i64,
//! component count u8, and per component: weight f64, mean 3xf64,
//! covariance as 6xf64 upper-triangular. Size is proportional to populated
//! cells times the component budget, independent of how many records were
//! absorbed.
//!
//! The file carries the statistical content only; sample counters and the
//! calibration threshold are runtime state and are re-established after
//! loading (`calibrate_threshold`).

use super::gmm::{GaussianComponent, Sym3};
use super::{CellId, CellPrototype, ModelError, PrototypeModel};

pub const MODEL_MAGIC: &[u8; 4] = b"M3FP";
pub const MODEL_VERSION: u16 = 1;

pub fn serialize(model: &PrototypeModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + model.cell_count() * 256);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&model.cell_size_deg().to_le_bytes());
    out.extend_from_slice(&(model.max_components() as u16).to_le_bytes());
    out.extend_from_slice(&(model.cell_count() as u32).to_le_bytes());
    for (id, cell) in model.cells() {
        out.extend_from_slice(&id.0.to_le_bytes());
        out.push(cell.components.len() as u8);
        for c in &cell.components {
            out.extend_from_slice(&c.weight.to_le_bytes());
            for m in &c.mean {
                out.extend_from_slice(&m.to_le_bytes());
            }
            for v in &c.cov.0 {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.pos + n > self.bytes.len() {
            return Err(ModelError::Format(format!(
                "truncated at byte {} (need {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, ModelError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<PrototypeModel, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(ModelError::Format("bad magic".into()));
    }
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(ModelError::Format(format!("unsupported version {version}")));
    }
    let cell_size = r.f64()?;
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(ModelError::Format(format!("bad cell size {cell_size}")));
    }
    let k = r.u16()? as usize;
    if k == 0 {
        return Err(ModelError::Format("component budget zero".into()));
    }
    let cell_count = r.u32()?;

    let mut model = PrototypeModel::empty(cell_size, k);
    for _ in 0..cell_count {
        let id = CellId(r.i64()?);
        let n_comp = r.u8()? as usize;
        if n_comp == 0 || n_comp > k {
            return Err(ModelError::Format(format!(
                "cell {:?} has {n_comp} components (budget {k})",
                id.0
            )));
        }
        let mut components = Vec::with_capacity(n_comp);
        for _ in 0..n_comp {
            let weight = r.f64()?;
            let mean = [r.f64()?, r.f64()?, r.f64()?];
            let cov = Sym3([r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?]);
            if !weight.is_finite() || weight <= 0.0 {
                return Err(ModelError::Format(format!("bad weight {weight}")));
            }
            components.push(GaussianComponent { weight, mean, cov });
        }
        model.insert_cell(
            id,
            CellPrototype {
                components,
                sample_count: 0,
            },
        );
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(model)
}
