//! Binary model files.
//!
//! ```text
//! "CSCD"            4 bytes
//! version           u32 LE (currently 1)
//! input_dim d       u32 LE
//! components k      u32 LE
//! classes C         u32 LE
//! mean              d   x f64 LE
//! components        k*d x f64 LE (row-major)
//! eigenvalues       k   x f64 LE
//! weights           C*(k+1) x f64 LE (row-major, intercept first)
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::LogisticModel;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, PcaModel};

pub const MODEL_MAGIC: [u8; 4] = *b"CSCD";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &LogisticModel) -> Vec<u8> {
    let pca = model.pca();
    let (d, k, c) = (
        pca.input_dim(),
        pca.num_components(),
        model.weights().rows(),
    );
    let mut out = Vec::with_capacity(20 + 8 * (d + k * d + k + c * (k + 1)));
    out.extend_from_slice(&MODEL_MAGIC);
    for v in [MODEL_VERSION, d as u32, k as u32, c as u32] {
        out.write_u32::<LittleEndian>(v).unwrap();
    }
    let payload = pca
        .mean()
        .iter()
        .chain(pca.components().data())
        .chain(pca.eigenvalues())
        .chain(model.weights().data());
    for &v in payload {
        out.write_f64::<LittleEndian>(v).unwrap();
    }
    out
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<LogisticModel> {
    let truncated = |what: &str| Error::Truncated {
        path: path.to_path_buf(),
        detail: format!("file ends inside {what}"),
    };
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
    if magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: u32::from_be_bytes(magic),
            expected: u32::from_be_bytes(MODEL_MAGIC),
        });
    }
    let mut header = [0u32; 4];
    for h in header.iter_mut() {
        *h = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| truncated("header"))?;
    }
    let [version, d, k, c] = header.map(|v| v as usize);
    if version as u32 != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version as u32,
            expected: MODEL_VERSION,
        });
    }
    if d == 0 || k == 0 || c == 0 || k > d {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("invalid dimensions d={d} k={k} classes={c}"),
        });
    }
    let needed = 8 * (d + k * d + k + c * (k + 1));
    let remaining = bytes.len() - cur.position() as usize;
    if remaining < needed {
        return Err(truncated("payload"));
    }
    if remaining > needed {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("{} trailing bytes", remaining - needed),
        });
    }
    let mut read = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| cur.read_f64::<LittleEndian>().expect("length checked"))
            .collect()
    };
    let mean = read(d);
    let components = Matrix::new(k, d, read(k * d))?;
    let eigenvalues = read(k);
    let weights = Matrix::new(c, k + 1, read(c * (k + 1)))?;
    LogisticModel::new(
        PcaModel::from_parts(mean, components, eigenvalues)?,
        weights,
    )
}

pub fn save_model(model: &LogisticModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LogisticModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Classifier;
    use crate::imaging::Image;

    fn toy_model() -> LogisticModel {
        let d = 4;
        let comps = Matrix::new(2, d, vec![0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5]).unwrap();
        let pca = PcaModel::from_parts(vec![1.0, 2.0, 3.0, 4.0], comps, vec![2.5, 0.125]).unwrap();
        let weights: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin() * 0.01).collect();
        LogisticModel::new(pca, Matrix::new(10, 3, weights).unwrap()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = toy_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.cscd");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        for i in 0..100 {
            let px: Vec<f64> = (0..4).map(|j| ((i * 31 + j * 17) % 256) as f64).collect();
            let img = Image::new(2, 2, 1, px).unwrap();
            assert_eq!(
                loaded.classify(&img).unwrap(),
                model.classify(&img).unwrap()
            );
        }
    }

    #[test]
    fn corrupt_files() {
        let bytes = encode_model(&toy_model());
        let p = Path::new("m");
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(matches!(
                decode_model(&bytes[..cut], p),
                Err(Error::Truncated { .. })
            ));
        }
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_model(&bad, p), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            decode_model(&bad, p),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode_model(&long, p), Err(Error::Format { .. })));
    }
}
