//! The `NLH1` binary field format.
//!
//! Layout (little endian): magic `NLH1`, `u32` dimension `d`, `d × u32`
//! grid sizes, `d × f64` origin, `f64` spacing, row-major `f64` values,
//! row-major `u8` mask.

use std::fs;
use std::path::Path;

use crate::energy::GridField;
use crate::geometry::{BoxGrid, BoxRegion, MAX_DIM};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"NLH1";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub dims: Vec<u32>,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub values: Vec<f64>,
    pub mask: Vec<u8>,
}

/// Summary printed by `dump-field`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpStats {
    pub nodes: usize,
    pub masked: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl FieldDump {
    pub fn from_field(u: &GridField) -> Self {
        let g = u.grid();
        Self {
            dims: g.shape().dims().iter().map(|&n| n as u32).collect(),
            origin: g.region().origin.clone(),
            spacing: g.spacing(),
            values: u.values().to_vec(),
            mask: u.mask().iter().map(|&b| b as u8).collect(),
        }
    }

    /// Boolean payload: values and mask both hold 0/1.
    pub fn from_mask(dims: &[usize], origin: Vec<f64>, spacing: f64, mask: &[bool]) -> Self {
        Self {
            dims: dims.iter().map(|&n| n as u32).collect(),
            origin,
            spacing,
            values: mask.iter().map(|&b| b as u8 as f64).collect(),
            mask: mask.iter().map(|&b| b as u8).collect(),
        }
    }

    pub fn to_field(&self) -> Result<GridField> {
        let extent = self.dims.iter().map(|&n| n as f64 * self.spacing).collect();
        let region = BoxRegion::new(self.origin.clone(), extent)?;
        let grid = BoxGrid::new(region, self.spacing)?;
        GridField::new(grid, self.values.clone(), self.mask.iter().map(|&b| b != 0).collect())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.values.len() + self.mask.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for n in &self.dims {
            out.extend_from_slice(&n.to_le_bytes());
        }
        for o in &self.origin {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.spacing.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.mask);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("missing NLH1 magic".into()));
        }
        let d = r.u32()? as usize;
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::Format(format!("dimension {d} not in 1..=3")));
        }
        let dims: Vec<u32> = (0..d).map(|_| r.u32()).collect::<Result<_>>()?;
        let origin: Vec<f64> = (0..d).map(|_| r.f64()).collect::<Result<_>>()?;
        let spacing = r.f64()?;
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n as usize))
            .ok_or_else(|| Error::Format("grid size overflows".into()))?;
        if bytes.len() - r.pos != len * 9 {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {} for {len} nodes",
                bytes.len() - r.pos,
                len * 9
            )));
        }
        let values: Vec<f64> = (0..len).map(|_| r.f64()).collect::<Result<_>>()?;
        let mask = r.take(len)?.to_vec();
        if mask.iter().any(|&b| b > 1) {
            return Err(Error::Format("mask bytes must be 0 or 1".into()));
        }
        Ok(Self { dims, origin, spacing, values, mask })
    }

    pub fn stats(&self) -> DumpStats {
        let masked: Vec<f64> = self.values.iter().zip(&self.mask).filter(|(_, &m)| m != 0).map(|(&v, _)| v).collect();
        let (min, max) = masked.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mean = if masked.is_empty() { f64::NAN } else { crate::par::ordered_sum(&masked) / masked.len() as f64 };
        DumpStats { nodes: self.values.len(), masked: masked.len(), min, max, mean }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn write_dump(path: &Path, dump: &FieldDump) -> Result<()> {
    fs::write(path, dump.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_dump(path: &Path) -> Result<FieldDump> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FieldDump::decode(&bytes)
}
