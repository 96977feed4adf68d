//! Parameter checkpoints: a JSON manifest of names/shapes plus one
//! little-endian f64 blob per parameter. Round-trips are byte-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matrix::Matrix;
use super::store::ParamStore;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("blob {file} has {got} bytes, expected {expected}")]
    BlobSize { file: String, got: usize, expected: usize },
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    meta: serde_json::Value,
    params: Vec<ParamDesc>,
}

#[derive(Serialize, Deserialize)]
struct ParamDesc {
    name: String,
    rows: usize,
    cols: usize,
    file: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io { path: path.display().to_string(), source }
}

/// Write `store` under `dir` (created if absent) with caller-supplied meta.
pub fn save_store(
    dir: &Path,
    store: &ParamStore,
    meta: &serde_json::Value,
) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut descs = Vec::new();
    for (i, name) in store.names().enumerate() {
        let value = store.value(name);
        let sanitized: String = name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let file = format!("p{i:03}_{sanitized}.bin");
        let mut bytes = Vec::with_capacity(value.len() * 8);
        for &v in value.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(&file);
        let tmp = dir.join(format!("{file}.tmp"));
        {
            let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(&bytes).map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        descs.push(ParamDesc {
            name: name.to_string(),
            rows: value.rows(),
            cols: value.cols(),
            file,
        });
    }
    let manifest = Manifest { meta: meta.clone(), params: descs };
    let text = serde_json::to_string_pretty(&manifest)?;
    let path = dir.join("manifest.json");
    let tmp = dir.join("manifest.json.tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(())
}

/// Load a checkpoint directory; returns the store and its meta value.
pub fn load_store(dir: &Path) -> Result<(ParamStore, serde_json::Value), CheckpointError> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut store = ParamStore::new();
    for desc in &manifest.params {
        let path = dir.join(&desc.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let expected = desc.rows * desc.cols * 8;
        if bytes.len() != expected {
            return Err(CheckpointError::BlobSize {
                file: desc.file.clone(),
                got: bytes.len(),
                expected,
            });
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store.insert(&desc.name, Matrix::from_vec(desc.rows, desc.cols, data));
    }
    Ok((store, manifest.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::{sample_gaussian_matrix, StreamRng};

    #[test]
    fn roundtrip_is_byte_exact() {
        let root = StreamRng::new(12);
        let mut store = ParamStore::new();
        store.insert("layer.w", sample_gaussian_matrix(&mut root.stream("a", 0), 7, 3, 0.0, 2.0));
        store.insert("layer.b", sample_gaussian_matrix(&mut root.stream("b", 0), 1, 3, -1.0, 0.5));
        // exercise non-representable decimals and specials
        store.value_mut("layer.b").data_mut()[0] = 0.1 + 0.2;
        store.value_mut("layer.b").data_mut()[1] = f64::MIN_POSITIVE;

        let dir = std::env::temp_dir().join(format!("baed-ckpt-{}", std::process::id()));
        let meta = serde_json::json!({"kind": "test", "seed": 12});
        save_store(&dir, &store, &meta).unwrap();
        let (loaded, loaded_meta) = load_store(&dir).unwrap();
        assert_eq!(loaded_meta, meta);
        for name in store.names() {
            let a = store.value(name);
            let b = loaded.value(name);
            assert_eq!(a.shape(), b.shape());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.to_bits(), y.to_bits(), "bit mismatch in {name}");
            }
        }
        fs::remove_dir_all(&dir).ok();
    }
}
