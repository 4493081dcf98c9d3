//! Instance storage. Each matrix lives in its own file: the 8-byte magic
//! `BSCAMAT1`, rows and columns as little-endian `u32`, then row-major
//! little-endian `f64` entries. Vectors are stored as `n x 1`. A directory
//! holds the matrices plus `instance.toml` naming them and the scalars.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::applications::anomaly::AnomalyInstance;
use crate::applications::phase_retrieval::PhaseRetrievalInstance;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BSCAMAT1";
pub const MANIFEST_NAME: &str = "instance.toml";

fn format_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

pub fn write_matrix<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::InvalidArgument("too many rows".into()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::InvalidArgument("too many columns".into()))?;
    let mut buf = Vec::with_capacity(16 + 8 * m.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for v in m.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R, path: &Path) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(format_err(path, "missing BSCAMAT1 header"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != 8 * rows * cols {
        return Err(format_err(
            path,
            format!("expected {} payload bytes for {rows}x{cols}, found {}", 8 * rows * cols, body.len()),
        ));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| format_err(path, e.to_string()))
}

pub fn save_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_matrix(std::io::BufWriter::new(fs::File::create(path)?), m)
}

pub fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    read_matrix(fs::File::open(path)?, path)
}

pub fn save_vector(path: &Path, v: &Array1<f64>) -> Result<()> {
    save_matrix(path, &v.clone().insert_axis(ndarray::Axis(1)))
}

pub fn load_vector(path: &Path) -> Result<Array1<f64>> {
    let m = load_matrix(path)?;
    if m.ncols() != 1 {
        return Err(format_err(path, format!("expected a column vector, found {} columns", m.ncols())));
    }
    Ok(m.column(0).to_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Pr,
    Anomaly,
}

/// Contents of `instance.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub kind: InstanceKind,
    pub seed: u64,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<usize>,
    /// Logical name to file name, relative to the manifest.
    pub files: BTreeMap<String, String>,
    /// Generator parameters, informational.
    #[serde(default)]
    pub generator: BTreeMap<String, f64>,
}

impl InstanceManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path)?;
        toml::from_str(&text).map_err(|e| format_err(&path, e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let text = toml::to_string(self).map_err(|e| format_err(&path, e.to_string()))?;
        fs::write(&path, text)?;
        Ok(path)
    }

    fn file(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        self.files
            .get(name)
            .map(|f| dir.join(f))
            .ok_or_else(|| format_err(&dir.join(MANIFEST_NAME), format!("no file entry for `{name}`")))
    }
}

/// Writes `A.bin`, `y.bin` (and `x_true.bin` when known) plus the manifest.
pub fn save_pr_instance(
    dir: &Path,
    inst: &PhaseRetrievalInstance,
    seed: u64,
    generator: BTreeMap<String, f64>,
) -> Result<InstanceManifest> {
    fs::create_dir_all(dir)?;
    let mut files = BTreeMap::new();
    save_matrix(&dir.join("A.bin"), &inst.a)?;
    files.insert("a".to_string(), "A.bin".to_string());
    save_vector(&dir.join("y.bin"), &inst.y)?;
    files.insert("y".to_string(), "y.bin".to_string());
    if let Some(x) = &inst.x_true {
        save_vector(&dir.join("x_true.bin"), x)?;
        files.insert("x_true".to_string(), "x_true.bin".to_string());
    }
    let manifest = InstanceManifest {
        kind: InstanceKind::Pr,
        seed,
        mu: inst.mu,
        lambda: None,
        rho: None,
        files,
        generator,
    };
    manifest.write(dir)?;
    Ok(manifest)
}

pub fn load_pr_instance(dir: &Path, manifest: &InstanceManifest, blocks: usize) -> Result<PhaseRetrievalInstance> {
    let a = load_matrix(&manifest.file(dir, "a")?)?;
    let y = load_vector(&manifest.file(dir, "y")?)?;
    let mut inst = PhaseRetrievalInstance::new(a, y, manifest.mu, blocks)?;
    if manifest.files.contains_key("x_true") {
        inst.x_true = Some(load_vector(&manifest.file(dir, "x_true")?)?);
    }
    Ok(inst)
}

/// Writes `Y.bin`, `D.bin` plus the manifest.
pub fn save_anomaly_instance(
    dir: &Path,
    inst: &AnomalyInstance,
    seed: u64,
    generator: BTreeMap<String, f64>,
) -> Result<InstanceManifest> {
    fs::create_dir_all(dir)?;
    let mut files = BTreeMap::new();
    save_matrix(&dir.join("Y.bin"), &inst.y)?;
    files.insert("y".to_string(), "Y.bin".to_string());
    save_matrix(&dir.join("D.bin"), &inst.d)?;
    files.insert("d".to_string(), "D.bin".to_string());
    let manifest = InstanceManifest {
        kind: InstanceKind::Anomaly,
        seed,
        mu: inst.mu,
        lambda: Some(inst.lambda),
        rho: Some(inst.rho),
        files,
        generator,
    };
    manifest.write(dir)?;
    Ok(manifest)
}

pub fn load_anomaly_instance(dir: &Path, manifest: &InstanceManifest) -> Result<AnomalyInstance> {
    let path = dir.join(MANIFEST_NAME);
    let lambda = manifest.lambda.ok_or_else(|| format_err(&path, "anomaly manifest lacks lambda"))?;
    let rho = manifest.rho.ok_or_else(|| format_err(&path, "anomaly manifest lacks rho"))?;
    let y = load_matrix(&manifest.file(dir, "y")?)?;
    let d = load_matrix(&manifest.file(dir, "d")?)?;
    AnomalyInstance::new(y, d, lambda, manifest.mu, rho)
}

#[derive(Debug, Clone)]
pub enum Instance {
    Pr(PhaseRetrievalInstance),
    Anomaly(AnomalyInstance),
}

/// Loads whichever instance `dir/instance.toml` describes. `blocks` only
/// affects phase retrieval.
pub fn load_instance(dir: &Path, blocks: usize) -> Result<(Instance, InstanceManifest)> {
    let manifest = InstanceManifest::read(dir)?;
    let inst = match manifest.kind {
        InstanceKind::Pr => Instance::Pr(load_pr_instance(dir, &manifest, blocks)?),
        InstanceKind::Anomaly => Instance::Anomaly(load_anomaly_instance(dir, &manifest)?),
    };
    Ok((inst, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::anomaly::generate_anomaly_instance;
    use crate::applications::phase_retrieval::generate_pr_instance;
    use ndarray::array;

    #[test]
    fn matrix_round_trip_and_header() {
        let m = array![[1.0, -2.5, 3.0], [f64::MIN_POSITIVE, 0.0, -0.0]];
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(&buf[..8], b"BSCAMAT1");
        assert_eq!(&buf[8..16], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(buf.len(), 16 + 6 * 8);
        let back = read_matrix(buf.as_slice(), Path::new("m")).unwrap();
        assert_eq!(back, m);
        assert!(back[[1, 2]].is_sign_negative());
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(read_matrix(&b"NOTAMAT1"[..], Path::new("x")), Err(Error::Format { .. })));
        let mut buf = Vec::new();
        write_matrix(&mut buf, &array![[1.0, 2.0]]).unwrap();
        buf.pop();
        assert!(matches!(read_matrix(buf.as_slice(), Path::new("x")), Err(Error::Format { .. })));
    }

    #[test]
    fn instances_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pr = generate_pr_instance(10, 20, 0.2, 2, 3).unwrap();
        save_pr_instance(dir.path(), &pr, 3, BTreeMap::new()).unwrap();
        let (loaded, manifest) = load_instance(dir.path(), 2).unwrap();
        assert_eq!(manifest.seed, 3);
        match loaded {
            Instance::Pr(p) => {
                assert_eq!(p.a, pr.a);
                assert_eq!(p.y, pr.y);
                assert_eq!(p.mu.to_bits(), pr.mu.to_bits());
                assert_eq!(p.x_true, pr.x_true);
            }
            Instance::Anomaly(_) => panic!("wrong kind"),
        }

        let dir = tempfile::tempdir().unwrap();
        let an = generate_anomaly_instance(6, 7, 8, 2, 0.1, 1e-4, 5).unwrap();
        save_anomaly_instance(dir.path(), &an, 5, BTreeMap::new()).unwrap();
        match load_instance(dir.path(), 1).unwrap().0 {
            Instance::Anomaly(a) => {
                assert_eq!(a.y, an.y);
                assert_eq!(a.d, an.d);
                assert_eq!(a.lambda.to_bits(), an.lambda.to_bits());
                assert_eq!(a.rho, 2);
            }
            Instance::Pr(_) => panic!("wrong kind"),
        }
    }
}
