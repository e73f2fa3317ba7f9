//! Flat binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    b"LANECKPT"
//! version  u32 = 1
//! manifest u64 length + UTF-8 bytes (free-form, typically JSON)
//! count    u32
//! per parameter:
//!   name   u32 length + UTF-8 bytes
//!   group  u8 (0 composer, 1 solver)
//!   ndim   u32, then ndim × u64 dims
//!   values product(dims) × f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::{Group, ParamStore, Result, Tensor, TensorError};

const MAGIC: &[u8; 8] = b"LANECKPT";
const VERSION: u32 = 1;

pub fn write_to<W: Write>(mut w: W, store: &ParamStore, manifest: &str) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(manifest.len() as u64).to_le_bytes())?;
    w.write_all(manifest.as_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for id in store.ids() {
        let name = store.name(id).as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[store.group(id).tag()])?;
        let t = store.value(id);
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save(path: &Path, store: &ParamStore, manifest: &str) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_to(std::io::BufWriter::new(f), store, manifest)
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| TensorError::Checkpoint(format!("truncated file: {e}")))?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r)?))
}

fn read_string<R: Read>(r: &mut R, len: usize) -> Result<String> {
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)
        .map_err(|e| TensorError::Checkpoint(format!("truncated string: {e}")))?;
    String::from_utf8(b).map_err(|_| TensorError::Checkpoint("non UTF-8 string".into()))
}

pub fn read_from<R: Read>(mut r: R) -> Result<(ParamStore, String)> {
    if &read_exact::<_, 8>(&mut r)? != MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(TensorError::Checkpoint(format!("unsupported version {version}")));
    }
    let mlen = read_u64(&mut r)? as usize;
    let manifest = read_string(&mut r, mlen)?;
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let nlen = read_u32(&mut r)? as usize;
        let name = read_string(&mut r, nlen)?;
        let [tag] = read_exact::<_, 1>(&mut r)?;
        let group = Group::from_tag(tag)
            .ok_or_else(|| TensorError::Checkpoint(format!("bad group tag {tag} for `{name}`")))?;
        let ndim = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)
            .map_err(|e| TensorError::Checkpoint(format!("truncated values of `{name}`: {e}")))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        store.add(&name, group, Tensor::new(shape, data)?)?;
    }
    Ok((store, manifest))
}

pub fn load(path: &Path) -> Result<(ParamStore, String)> {
    let f = std::fs::File::open(path)?;
    read_from(std::io::BufReader::new(f))
}

/// Copy every parameter of `src` into the same-named, same-shaped
/// parameter of `dst`.
pub fn restore_into(dst: &mut ParamStore, src: &ParamStore) -> Result<()> {
    if dst.len() != src.len() {
        return Err(TensorError::Checkpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            src.len(),
            dst.len()
        )));
    }
    for id in src.ids() {
        let target = dst.id(src.name(id))?;
        dst.set(target, src.value(id).clone())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let mut s = ParamStore::new();
        s.add("a", Group::Composer, Tensor::new(vec![2, 3], vec![0.1, -2.5, 3.0, f64::MIN_POSITIVE, 1e300, -0.0]).unwrap())
            .unwrap();
        s.add("b", Group::Solver, Tensor::scalar(7.25)).unwrap();
        let mut buf = Vec::new();
        write_to(&mut buf, &s, "{\"seed\":3}").unwrap();
        let (back, manifest) = read_from(buf.as_slice()).unwrap();
        assert_eq!(manifest, "{\"seed\":3}");
        assert_eq!(back.len(), 2);
        for id in s.ids() {
            let other = back.id(s.name(id)).unwrap();
            assert_eq!(back.group(other), s.group(id));
            assert_eq!(back.value(other).shape(), s.value(id).shape());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(back.value(other)), bits(s.value(id)));
        }
    }

    #[test]
    fn truncated_file_is_an_error() {
        let mut s = ParamStore::new();
        s.add("a", Group::Composer, Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut buf = Vec::new();
        write_to(&mut buf, &s, "").unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_from(buf.as_slice()), Err(TensorError::Checkpoint(_))));
        assert!(read_from(&b"NOTACKPT"[..]).is_err());
    }
}
