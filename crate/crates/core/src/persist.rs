//! Binary model container.
//!
//! ```text
//! magic    4 bytes   "SPCA" (sparse PCA) or "PCAM" (PCA)
//! version  u32 LE    1
//! p        u32 LE
//! dim      u32 LE
//! mu       p × f64 LE
//! loadings p·dim × f64 LE, column-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pca::PcaModel;
use crate::spca::SparsePcaModel;

pub const SPCA_MAGIC: [u8; 4] = *b"SPCA";
pub const PCA_MAGIC: [u8; 4] = *b"PCAM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Sparse(SparsePcaModel),
    Pca(PcaModel),
}

impl StoredModel {
    pub fn mean_and_weights(&self) -> (&[f64], &Matrix) {
        match self {
            StoredModel::Sparse(m) => (&m.mu, &m.loadings),
            StoredModel::Pca(m) => (&m.mu, &m.components),
        }
    }
}

fn write_container<W: Write>(w: &mut W, magic: [u8; 4], mu: &[f64], weights: &Matrix) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::ModelFormat(format!("{what} = {v} does not fit in u32")))
    };
    w.write_all(&magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(weights.rows(), "p")?.to_le_bytes())?;
    w.write_all(&to_u32(weights.cols(), "dim")?.to_le_bytes())?;
    for v in mu {
        w.write_all(&v.to_le_bytes())?;
    }
    for j in 0..weights.cols() {
        for i in 0..weights.rows() {
            w.write_all(&weights[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::ModelFormat(format!("truncated payload: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_model<W: Write>(w: &mut W, model: &StoredModel) -> Result<()> {
    match model {
        StoredModel::Sparse(m) => write_container(w, SPCA_MAGIC, &m.mu, &m.loadings),
        StoredModel::Pca(m) => write_container(w, PCA_MAGIC, &m.mu, &m.components),
    }
}

pub fn read_model<R: Read>(r: &mut R) -> Result<StoredModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::ModelFormat("file too short for magic bytes".into()))?;
    if magic != SPCA_MAGIC && magic != PCA_MAGIC {
        return Err(Error::ModelFormat(format!("unknown magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let p = read_u32(r)? as usize;
    let dim = read_u32(r)? as usize;
    if p == 0 || dim == 0 {
        return Err(Error::ModelFormat(format!("empty model ({p} x {dim})")));
    }
    let mu = read_f64s(r, p)?;
    let col_major = read_f64s(r, p * dim)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::ModelFormat("trailing bytes after payload".into()));
    }
    let mut weights = Matrix::zeros(p, dim);
    for j in 0..dim {
        for i in 0..p {
            weights[(i, j)] = col_major[j * p + i];
        }
    }
    if magic == SPCA_MAGIC {
        Ok(StoredModel::Sparse(SparsePcaModel::new(mu, weights)?))
    } else {
        Ok(StoredModel::Pca(PcaModel::new(mu, weights)?))
    }
}

pub fn save(path: impl AsRef<Path>, model: &StoredModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<StoredModel> {
    read_model(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparsePcaModel {
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -0.6], vec![0.0, 0.8]]).unwrap();
        SparsePcaModel::new(vec![0.5, f64::MIN_POSITIVE, -3.25], w).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_model(&mut buf, &StoredModel::Sparse(sample())).unwrap();
        assert_eq!(&buf[..4], b"SPCA");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(&buf[12..16], &2u32.to_le_bytes());
        assert_eq!(buf.len(), 16 + 8 * (3 + 6));
        // first loading column follows mu
        let first = f64::from_le_bytes(buf[16 + 24..16 + 32].try_into().unwrap());
        assert_eq!(first, 1.0);
        let second = f64::from_le_bytes(buf[16 + 32..16 + 40].try_into().unwrap());
        assert_eq!(second, 0.0);
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut buf = Vec::new();
        write_model(&mut buf, &StoredModel::Sparse(sample())).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_model(&mut bad_magic.as_slice()).is_err());
        let mut bad_version = buf.clone();
        bad_version[4] = 2;
        assert!(read_model(&mut bad_version.as_slice()).is_err());
        assert!(read_model(&mut &buf[..buf.len() - 1]).is_err());
        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(read_model(&mut trailing.as_slice()).is_err());
    }

    #[test]
    fn pca_magic() {
        let m = PcaModel::new(vec![0.0], Matrix::new(1, 1, vec![1.0]).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &StoredModel::Pca(m.clone())).unwrap();
        assert_eq!(&buf[..4], b"PCAM");
        assert_eq!(read_model(&mut buf.as_slice()).unwrap(), StoredModel::Pca(m));
    }
}
