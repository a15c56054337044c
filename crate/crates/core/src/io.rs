//! Binary snapshot files and number formatting for CSV output.
//!
//! Snapshot file layout, all integers and floats little-endian:
//!
//! | field      | type                      |
//! |------------|---------------------------|
//! | magic      | `b"PSDS"`                 |
//! | version    | `u32`, currently 1        |
//! | rows       | `u64`                     |
//! | cols       | `u64`                     |
//! | payload    | `rows·cols` `f64`, column-major |
//! | count      | `u64`, 0 or `cols`        |
//! | records    | `count` × (`u32` byte length, `u32` d, d × `f64` μ, `f64` t) |
//!
//! Basis files carry no provenance (`count = 0`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::psd::SnapshotMatrix;

pub const MAGIC: &[u8; 4] = b"PSDS";
pub const VERSION: u32 = 1;

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A matrix with optional per-column `(μ, t)` records.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotFile {
    pub data: DMatrix<f64>,
    pub provenance: Vec<(Vec<f64>, f64)>,
}

impl SnapshotFile {
    pub fn from_matrix(data: DMatrix<f64>) -> Self {
        SnapshotFile {
            data,
            provenance: Vec::new(),
        }
    }

    pub fn from_snapshots(m: &SnapshotMatrix) -> Self {
        SnapshotFile {
            data: m.data().clone(),
            provenance: m.provenance().to_vec(),
        }
    }

    pub fn into_snapshots(self) -> Result<SnapshotMatrix> {
        if self.provenance.is_empty() {
            SnapshotMatrix::from_matrix(self.data)
        } else {
            SnapshotMatrix::new(self.data, self.provenance)
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let (rows, cols) = self.data.shape();
        if !self.provenance.is_empty() && self.provenance.len() != cols {
            return Err(Error::Format(format!(
                "{} provenance records for {cols} columns",
                self.provenance.len()
            )));
        }
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(rows as u64)?;
        w.write_u64::<LittleEndian>(cols as u64)?;
        for x in self.data.as_slice() {
            w.write_f64::<LittleEndian>(*x)?;
        }
        w.write_u64::<LittleEndian>(self.provenance.len() as u64)?;
        for (mu, t) in &self.provenance {
            let d = u32::try_from(mu.len()).map_err(|_| Error::Format("parameter too long".into()))?;
            w.write_u32::<LittleEndian>(4 + 8 * d + 8)?;
            w.write_u32::<LittleEndian>(d)?;
            for x in mu {
                w.write_f64::<LittleEndian>(*x)?;
            }
            w.write_f64::<LittleEndian>(*t)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, not a snapshot file".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let rows = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let cols = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
        let mut payload = Vec::new();
        // Grow with the data actually present instead of trusting the header.
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf).map_err(truncated)?;
            payload.push(f64::from_le_bytes(buf));
        }
        let data = DMatrix::from_vec(rows as usize, cols as usize, payload);
        let count = r.read_u64::<LittleEndian>().map_err(truncated)?;
        if count != 0 && count != cols {
            return Err(Error::Format(format!("{count} provenance records for {cols} columns")));
        }
        let mut provenance = Vec::new();
        for _ in 0..count {
            let bytes = r.read_u32::<LittleEndian>().map_err(truncated)?;
            let d = r.read_u32::<LittleEndian>().map_err(truncated)?;
            if u64::from(bytes) != 4 + 8 * u64::from(d) + 8 {
                return Err(Error::Format("inconsistent provenance record length".into()));
            }
            let mu = (0..d)
                .map(|_| r.read_f64::<LittleEndian>().map_err(truncated))
                .collect::<Result<Vec<_>>>()?;
            let t = r.read_f64::<LittleEndian>().map_err(truncated)?;
            provenance.push((mu, t));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after provenance".into()));
        }
        Ok(SnapshotFile { data, provenance })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated snapshot file".into())
    } else {
        Error::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_provenance() {
        let data = DMatrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * 0.1f64.powi(j as i32) + f64::EPSILON);
        let file = SnapshotFile {
            data,
            provenance: vec![(vec![1.0], 0.0), (vec![1.0], 0.1), (vec![2.0, -0.25], 0.2)],
        };
        let mut buf = Vec::new();
        file.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"PSDS");
        assert_eq!(buf.len(), 4 + 4 + 16 + 12 * 8 + 8 + 2 * (8 + 16) + (8 + 24));
        let back = SnapshotFile::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn rejects_malformed() {
        let file = SnapshotFile::from_matrix(DMatrix::identity(2, 2));
        let mut buf = Vec::new();
        file.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(SnapshotFile::read_from(&mut bad.as_slice()), Err(Error::Format(_))));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(SnapshotFile::read_from(&mut &short[..]), Err(Error::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(SnapshotFile::read_from(&mut long.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
