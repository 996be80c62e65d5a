//! MPS serialization: a binary container and a lossless text debug dump.
//!
//! Binary layout (all integers little-endian u64, all floats little-endian
//! f64):
//!
//! ```text
//! magic   8 bytes  "MPSBIN01"
//! n       u64      number of sites
//! gauge   u64      gauge center, u64::MAX when unset
//! chi     u64      configured bond ceiling, u64::MAX when unlimited
//! per core: left u64, phys u64, right u64,
//!           then left*phys*right (re, im) f64 pairs in row-major order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use num_complex::Complex64;

use super::Mps;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MPSBIN01";

impl Mps {
    /// Writes the binary container.
    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_binary(&mut w).map_err(|e| Error::io(path, e))
    }

    /// Reads an MPS from the binary container.
    pub fn load_binary(path: impl AsRef<Path>) -> Result<Mps> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        Mps::read_binary(&mut r).map_err(|e| match e {
            ReadError::Io(e) => Error::io(path, e),
            ReadError::Format(msg) => Error::ShapeMismatch(format!("{}: {msg}", path.display())),
        })
    }

    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.cores.len() as u64).to_le_bytes())?;
        let gauge = self.gauge_center.map_or(u64::MAX, |c| c as u64);
        w.write_all(&gauge.to_le_bytes())?;
        let chi = self.chi_max.map_or(u64::MAX, |c| c as u64);
        w.write_all(&chi.to_le_bytes())?;
        for core in &self.cores {
            let (l, p, r) = core.dim();
            for dim in [l, p, r] {
                w.write_all(&(dim as u64).to_le_bytes())?;
            }
            for z in core.iter() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> std::result::Result<Mps, ReadError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ReadError::Format("bad magic header".into()));
        }
        let n = read_u64(r)? as usize;
        if n == 0 || n > 64 {
            return Err(ReadError::Format(format!("implausible site count {n}")));
        }
        let gauge = read_u64(r)?;
        let chi = read_u64(r)?;
        let mut cores = Vec::with_capacity(n);
        let mut prev_right = 1usize;
        for i in 0..n {
            let l = read_u64(r)? as usize;
            let p = read_u64(r)? as usize;
            let right = read_u64(r)? as usize;
            if p != 2 {
                return Err(ReadError::Format(format!(
                    "core {i} physical dimension {p}, expected 2"
                )));
            }
            if l != prev_right {
                return Err(ReadError::Format(format!(
                    "core {i} left bond {l} does not match previous right bond {prev_right}"
                )));
            }
            let len = l * p * right;
            if len == 0 || len > (1 << 28) {
                return Err(ReadError::Format(format!("core {i} has implausible size")));
            }
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let re = read_f64(r)?;
                let im = read_f64(r)?;
                data.push(Complex64::new(re, im));
            }
            cores.push(Array3::from_shape_vec((l, p, right), data).expect("length checked"));
            prev_right = right;
        }
        if prev_right != 1 {
            return Err(ReadError::Format("final bond dimension must be 1".into()));
        }
        Ok(Mps {
            cores,
            gauge_center: if gauge == u64::MAX {
                None
            } else {
                Some(gauge as usize)
            },
            chi_max: if chi == u64::MAX {
                None
            } else {
                Some(chi as usize)
            },
        })
    }

    /// Full-precision text dump of shapes and entries, for debugging.
    pub fn text_dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let gauge = self
            .gauge_center
            .map_or("none".to_string(), |c| c.to_string());
        let chi = self
            .chi_max
            .map_or("unlimited".to_string(), |c| c.to_string());
        writeln!(
            out,
            "mps sites={} gauge_center={gauge} chi_max={chi}",
            self.cores.len()
        )
        .unwrap();
        for (i, core) in self.cores.iter().enumerate() {
            let (l, p, r) = core.dim();
            writeln!(out, "core {i} shape {l} {p} {r}").unwrap();
            for z in core.iter() {
                writeln!(out, "{:.17e} {:.17e}", z.re, z.im).unwrap();
            }
        }
        out
    }
}

#[derive(Debug)]
pub enum ReadError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for ReadError {
    fn from(e: std::io::Error) -> Self {
        ReadError::Io(e)
    }
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binary_round_trip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mps = Mps::random(6, 4, &mut rng);
        let mut buf = Vec::new();
        mps.write_binary(&mut buf).unwrap();
        let back = Mps::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.num_qubits(), 6);
        assert_eq!(back.gauge_center(), mps.gauge_center());
        assert_eq!(back.chi_max(), mps.chi_max());
        for (a, b) in mps.cores().iter().zip(back.cores()) {
            assert_eq!(a.dim(), b.dim());
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x, y, "bit-exact round trip expected");
            }
        }
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let mps = Mps::ghz(3);
        let mut buf = Vec::new();
        mps.write_binary(&mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(
            Mps::read_binary(&mut buf.as_slice()),
            Err(ReadError::Format(_))
        ));
    }

    #[test]
    fn text_dump_mentions_every_core() {
        let mps = Mps::ghz(4);
        let dump = mps.text_dump();
        for i in 0..4 {
            assert!(dump.contains(&format!("core {i} shape")));
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.mps");
        let mps = Mps::ghz(5);
        mps.save_binary(&path).unwrap();
        let back = Mps::load_binary(&path).unwrap();
        assert_eq!(back.num_qubits(), 5);
        assert!((crate::mps::fidelity(&back, &mps).unwrap() - 1.0).abs() < 1e-12);
    }
}
