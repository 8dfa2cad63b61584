//! Binary dataset container with a JSON metadata sidecar.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "RSRK1"          5 bytes
//! d, n, r*         u64 each
//! epsilon          f64
//! X                d·n f64, column-major
//! inlier mask      n bytes, 1 = inlier
//! ```
//!
//! The sidecar `<path>.json` carries the planted basis, eigenvalues, noise
//! model, adversary and seed, so that a dataset can be reloaded in full.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datagen::{AdversaryStrategy, CleanModel, CorruptedDataset, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::SubspaceBasis;

pub const MAGIC: &[u8; 5] = b"RSRK1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub d: usize,
    pub r_star: usize,
    /// Column-major `d × r*` planted basis.
    pub basis: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub noise: NoiseModel,
    pub adversary: AdversaryStrategy,
    pub seed: u64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_dataset(path: &Path, dataset: &CorruptedDataset) -> Result<()> {
    let (d, n) = dataset.x.shape();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(MAGIC)?;
    write(&(d as u64).to_le_bytes())?;
    write(&(n as u64).to_le_bytes())?;
    write(&(dataset.clean_model.r_star() as u64).to_le_bytes())?;
    write(&dataset.epsilon.to_le_bytes())?;
    for v in dataset.x.iter() {
        write(&v.to_le_bytes())?;
    }
    let mask: Vec<u8> = dataset.inlier_mask.iter().map(|&m| m as u8).collect();
    write(&mask)?;
    w.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = Sidecar {
        d,
        r_star: dataset.clean_model.r_star(),
        basis: dataset.clean_model.basis().columns().as_slice().to_vec(),
        eigenvalues: dataset.clean_model.eigenvalues().to_vec(),
        noise: dataset.noise_model.clone(),
        adversary: dataset.adversary.clone(),
        seed: dataset.seed,
    };
    let side = sidecar_path(path);
    let file = File::create(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &sidecar)?;
    Ok(())
}

/// Header, matrix and mask of a container file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawContainer {
    pub r_star: usize,
    pub epsilon: f64,
    pub x: DMatrix<f64>,
    pub inlier_mask: Vec<bool>,
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| truncated(path, e))?;
    Ok(u64::from_le_bytes(buf))
}

fn truncated(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Container(format!("{} is truncated", path.display()))
    } else {
        Error::io(path, e)
    }
}

pub fn read_container(path: &Path) -> Result<RawContainer> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|e| truncated(path, e))?;
    if &magic != MAGIC {
        return Err(Error::Container(format!(
            "{} is not an RSRK1 container",
            path.display()
        )));
    }
    let d = read_u64(&mut r, path)? as usize;
    let n = read_u64(&mut r, path)? as usize;
    let r_star = read_u64(&mut r, path)? as usize;
    let epsilon = f64::from_le_bytes(read_u64(&mut r, path)?.to_le_bytes());
    let len = d
        .checked_mul(n)
        .filter(|&len| len <= isize::MAX as usize / 8)
        .ok_or_else(|| Error::Container(format!("implausible shape {d}x{n}")))?;
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes).map_err(|e| truncated(path, e))?;
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let mut mask = vec![0u8; n];
    r.read_exact(&mut mask).map_err(|e| truncated(path, e))?;
    if mask.iter().any(|&b| b > 1) {
        return Err(Error::Container("inlier mask bytes must be 0 or 1".into()));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(Error::Container(format!(
            "{} trailing bytes after the mask",
            rest.len()
        )));
    }
    Ok(RawContainer {
        r_star,
        epsilon,
        x: DMatrix::from_vec(d, n, data),
        inlier_mask: mask.into_iter().map(|b| b == 1).collect(),
    })
}

pub fn load_dataset(path: &Path) -> Result<CorruptedDataset> {
    let raw = read_container(path)?;
    let side = sidecar_path(path);
    let file = File::open(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_reader(BufReader::new(file))?;
    let d = raw.x.nrows();
    if meta.d != d || meta.r_star != raw.r_star || meta.basis.len() != d * meta.r_star {
        return Err(Error::Container("sidecar does not match the container header".into()));
    }
    let basis = SubspaceBasis::new(DMatrix::from_vec(d, meta.r_star, meta.basis))?;
    Ok(CorruptedDataset {
        x: raw.x,
        epsilon: raw.epsilon,
        inlier_mask: raw.inlier_mask,
        clean_model: CleanModel::new(basis, meta.eigenvalues)?,
        noise_model: meta.noise,
        adversary: meta.adversary,
        seed: meta.seed,
    })
}
