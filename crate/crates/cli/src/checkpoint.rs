//! Checkpoint persistence: a text manifest (format version, configuration
//! echo, named array table) plus one raw little-endian blob holding every
//! array back to back, row-major. Writes are atomic (temp file then
//! rename); every array carries a CRC32 verified on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use molmae_core::model::ParamStore;
use molmae_core::real::Real;

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Parameter arrays at either precision, as read back from disk.
#[derive(Debug)]
pub enum LoadedParams {
    F32(ParamStore<f32>),
    F64(ParamStore<f64>),
}

#[derive(Debug)]
pub struct Checkpoint {
    pub params: LoadedParams,
    pub config_pairs: BTreeMap<String, String>,
    /// Free-form extra manifest entries (`meta.` keys).
    pub meta: BTreeMap<String, String>,
}

pub fn manifest_path(prefix: &Path) -> PathBuf {
    prefix.with_extension("manifest")
}

pub fn blob_path(prefix: &Path) -> PathBuf {
    prefix.with_extension("blob")
}

fn scalar_width<R: Real>() -> usize {
    core::mem::size_of::<R>()
}

fn to_le_bytes<R: Real>(data: &[R], out: &mut Vec<u8>) {
    if scalar_width::<R>() == 4 {
        for &v in data {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    } else {
        for &v in data {
            out.extend_from_slice(&v.to_f64().to_le_bytes());
        }
    }
}

/// Save a parameter store with its configuration echo and metadata.
pub fn save<R: Real>(
    prefix: &Path,
    store: &ParamStore<R>,
    config_pairs: &[(String, String)],
    meta: &[(String, String)],
) -> Result<(), CliError> {
    let width = scalar_width::<R>();
    let mut blob = Vec::new();
    let mut table = Vec::with_capacity(store.len());
    for entry in store.entries() {
        let offset = blob.len();
        let mut bytes = Vec::with_capacity(entry.data.len() * width);
        to_le_bytes(&entry.data, &mut bytes);
        let crc = crc32fast::hash(&bytes);
        blob.extend_from_slice(&bytes);
        let shape = if entry.shape.is_empty() {
            "scalar".to_string()
        } else {
            entry
                .shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x")
        };
        table.push(format!(
            "array = {} {} {} {} {:08x}",
            entry.name,
            width,
            offset,
            shape,
            crc
        ));
    }

    let mut manifest = String::new();
    manifest += &format!("format_version = {FORMAT_VERSION}\n");
    manifest += &format!("scalar_width = {width}\n");
    for (k, v) in config_pairs {
        manifest += &format!("config.{k} = {v}\n");
    }
    for (k, v) in meta {
        manifest += &format!("meta.{k} = {v}\n");
    }
    for line in &table {
        manifest += line;
        manifest.push('\n');
    }

    if let Some(parent) = prefix.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    // atomic: write temp files, then rename blob before manifest
    let blob_tmp = blob_path(prefix).with_extension("blob.tmp");
    let man_tmp = manifest_path(prefix).with_extension("manifest.tmp");
    {
        let mut f = fs::File::create(&blob_tmp)?;
        f.write_all(&blob)?;
        f.sync_all()?;
    }
    {
        let mut f = fs::File::create(&man_tmp)?;
        f.write_all(manifest.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&blob_tmp, blob_path(prefix))?;
    fs::rename(&man_tmp, manifest_path(prefix))?;
    Ok(())
}

fn parse_shape(s: &str) -> Result<Vec<usize>, CliError> {
    if s == "scalar" {
        return Ok(Vec::new());
    }
    s.split('x')
        .map(|d| {
            d.parse::<usize>()
                .map_err(|_| CliError::Data(format!("bad shape component {d}")))
        })
        .collect()
}

pub fn load(prefix: &Path) -> Result<Checkpoint, CliError> {
    let manifest = fs::read_to_string(manifest_path(prefix)).map_err(|e| {
        CliError::Data(format!(
            "cannot read checkpoint manifest {}: {e}",
            manifest_path(prefix).display()
        ))
    })?;
    let blob = fs::read(blob_path(prefix)).map_err(|e| {
        CliError::Data(format!(
            "cannot read checkpoint blob {}: {e}",
            blob_path(prefix).display()
        ))
    })?;

    let mut width = 0usize;
    let mut config_pairs = BTreeMap::new();
    let mut meta = BTreeMap::new();
    let mut arrays: Vec<(String, usize, Vec<usize>, u32)> = Vec::new();
    let mut names = std::collections::BTreeSet::new();

    for (lineno, raw) in manifest.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Data(format!("manifest line {}: not key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "format_version" => {
                let v: u32 = value
                    .parse()
                    .map_err(|_| CliError::Data("bad format_version".into()))?;
                if v != FORMAT_VERSION {
                    return Err(CliError::Data(format!(
                        "unsupported checkpoint format version {v}"
                    )));
                }
            }
            "scalar_width" => {
                width = value
                    .parse()
                    .map_err(|_| CliError::Data("bad scalar_width".into()))?;
            }
            "array" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 5 {
                    return Err(CliError::Data(format!(
                        "manifest line {}: malformed array entry",
                        lineno + 1
                    )));
                }
                let name = parts[0].to_string();
                if !names.insert(name.clone()) {
                    return Err(CliError::Data(format!("duplicate array name {name}")));
                }
                let w: usize = parts[1]
                    .parse()
                    .map_err(|_| CliError::Data("bad array width".into()))?;
                if w != width {
                    return Err(CliError::Data(format!(
                        "array {name} width {w} disagrees with manifest width {width}"
                    )));
                }
                let offset: usize = parts[2]
                    .parse()
                    .map_err(|_| CliError::Data("bad array offset".into()))?;
                let shape = parse_shape(parts[3])?;
                let crc = u32::from_str_radix(parts[4], 16)
                    .map_err(|_| CliError::Data("bad array checksum".into()))?;
                arrays.push((name, offset, shape, crc));
            }
            k if k.starts_with("config.") => {
                config_pairs.insert(k["config.".len()..].to_string(), value.to_string());
            }
            k if k.starts_with("meta.") => {
                meta.insert(k["meta.".len()..].to_string(), value.to_string());
            }
            other => {
                return Err(CliError::Data(format!("unknown manifest key {other}")));
            }
        }
    }

    let params = match width {
        4 => {
            let mut store = ParamStore::<f32>::new();
            for (name, offset, shape, crc) in &arrays {
                let n: usize = shape.iter().product();
                let end = offset + n * 4;
                let bytes = blob.get(*offset..end).ok_or_else(|| {
                    CliError::Data(format!("array {name} extends past blob end"))
                })?;
                if crc32fast::hash(bytes) != *crc {
                    return Err(CliError::Data(format!("array {name} fails checksum")));
                }
                let data: Vec<f32> = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                store.insert(name, shape, data);
            }
            LoadedParams::F32(store)
        }
        8 => {
            let mut store = ParamStore::<f64>::new();
            for (name, offset, shape, crc) in &arrays {
                let n: usize = shape.iter().product();
                let end = offset + n * 8;
                let bytes = blob.get(*offset..end).ok_or_else(|| {
                    CliError::Data(format!("array {name} extends past blob end"))
                })?;
                if crc32fast::hash(bytes) != *crc {
                    return Err(CliError::Data(format!("array {name} fails checksum")));
                }
                let data: Vec<f64> = bytes
                    .chunks_exact(8)
                    .map(|c| {
                        f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
                    })
                    .collect();
                store.insert(name, shape, data);
            }
            LoadedParams::F64(store)
        }
        other => {
            return Err(CliError::Data(format!("unsupported scalar width {other}")));
        }
    };

    Ok(Checkpoint {
        params,
        config_pairs,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_store() -> ParamStore<f32> {
        let mut s = ParamStore::new();
        s.insert("a.w", &[2, 3], vec![1.0, -2.5, 0.125, 3.75, 0.0, 9.5]);
        s.insert("a.b", &[3], vec![0.5, 0.25, -0.125]);
        s
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("ck");
        let store = sample_store();
        let pairs = vec![("hidden".to_string(), "100".to_string())];
        save(&prefix, &store, &pairs, &[("kind".into(), "test".into())]).unwrap();
        let loaded = load(&prefix).unwrap();
        match loaded.params {
            LoadedParams::F32(s) => {
                for (a, b) in store.entries().iter().zip(s.entries()) {
                    assert_eq!(a.name, b.name);
                    assert_eq!(a.shape, b.shape);
                    let ab: Vec<u32> = a.data.iter().map(|v| v.to_bits()).collect();
                    let bb: Vec<u32> = b.data.iter().map(|v| v.to_bits()).collect();
                    assert_eq!(ab, bb);
                }
            }
            _ => panic!("expected f32"),
        }
        assert_eq!(loaded.config_pairs.get("hidden").unwrap(), "100");
        assert_eq!(loaded.meta.get("kind").unwrap(), "test");
    }

    #[test]
    fn f64_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("ck64");
        let mut store = ParamStore::<f64>::new();
        store.insert("x", &[2], vec![core::f64::consts::PI, -1.0 / 3.0]);
        save(&prefix, &store, &[], &[]).unwrap();
        match load(&prefix).unwrap().params {
            LoadedParams::F64(s) => {
                assert_eq!(s.get("x").unwrap().data[0].to_bits(), core::f64::consts::PI.to_bits());
            }
            _ => panic!("expected f64"),
        }
    }

    #[test]
    fn corrupted_blob_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("ck");
        save(&prefix, &sample_store(), &[], &[]).unwrap();
        let blob = blob_path(&prefix);
        let mut bytes = fs::read(&blob).unwrap();
        bytes[2] ^= 0xFF;
        fs::write(&blob, bytes).unwrap();
        match load(&prefix) {
            Err(CliError::Data(msg)) => assert!(msg.contains("checksum"), "{msg}"),
            other => panic!("expected checksum failure, got {other:?}"),
        }
    }

    #[test]
    fn save_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("one");
        let p2 = dir.path().join("two");
        let store = sample_store();
        save(&p1, &store, &[("k".into(), "v".into())], &[]).unwrap();
        save(&p2, &store, &[("k".into(), "v".into())], &[]).unwrap();
        assert_eq!(fs::read(blob_path(&p1)).unwrap(), fs::read(blob_path(&p2)).unwrap());
        assert_eq!(
            fs::read(manifest_path(&p1)).unwrap(),
            fs::read(manifest_path(&p2)).unwrap()
        );
    }
}
