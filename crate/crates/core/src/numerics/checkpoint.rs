//! Versioned binary parameter checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic  b"PMCK"
//! u32    format version (1)
//! u32    entry count
//! entry: u16 name length, utf-8 name bytes,
//!        u8 rank, u32 dim per axis,
//!        f64 values (row-major)
//! ```
//!
//! Values round-trip bit-exactly.

use std::io::{Read, Write};

use super::NumericArray;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"PMCK";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, entries: &[(&str, &NumericArray)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, arr) in entries {
        let bytes = name.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::contract("checkpoint entry name too long"));
        }
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&[arr.shape().len() as u8])?;
        for d in arr.shape() {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        for v in arr.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, NumericArray)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse { line: 0, msg: "not a parameter checkpoint".into() });
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Parse {
            line: 0,
            msg: format!("unsupported checkpoint version {version}"),
        });
    }
    let count = read_u32(&mut r)? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u16(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Parse { line: 0, msg: "non-utf8 entry name".into() })?;
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            shape.push(read_u32(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        entries.push((name, NumericArray::new(shape, values)));
    }
    Ok(entries)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

/// Pull a named entry out of a loaded checkpoint.
pub fn take_entry(
    entries: &mut Vec<(String, NumericArray)>,
    name: &str,
) -> Result<NumericArray> {
    match entries.iter().position(|(n, _)| n == name) {
        Some(i) => Ok(entries.remove(i).1),
        None => Err(Error::validation(format!("checkpoint missing entry {name:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = NumericArray::matrix(3, 4, (0..12).map(|_| rng.gen::<f64>()).collect());
        // Include awkward values: subnormal, negative zero, extremes.
        let b = NumericArray::vector(vec![f64::MIN_POSITIVE / 2.0, -0.0, 1e308, -1e-308]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("w", &a), ("b", &b)]).unwrap();
        let mut loaded = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(loaded.len(), 2);
        let wa = take_entry(&mut loaded, "w").unwrap();
        let wb = take_entry(&mut loaded, "b").unwrap();
        assert_eq!(wa.shape(), a.shape());
        for (x, y) in wa.values().iter().zip(a.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in wb.values().iter().zip(b.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOPE"[..]).is_err());
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[]).unwrap();
        buf[4] = 99; // corrupt version
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
