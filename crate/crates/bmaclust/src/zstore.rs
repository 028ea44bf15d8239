//! On-disk store for responsibility matrices: one flat little-endian f64
//! file per model plus a JSON sidecar with the shape, so consensus runs can
//! reuse a sweep without refitting.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cov::CovarianceSpec;
use crate::error::{Error, Result};
use crate::params::ResponsibilityMatrix;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n: usize,
    g: usize,
    spec: String,
    dtype: String,
}

fn base_name(spec: CovarianceSpec, g: usize) -> String {
    format!("z_{}_{g}", spec.name())
}

pub fn matrix_path(dir: &Path, spec: CovarianceSpec, g: usize) -> PathBuf {
    dir.join(format!("{}.bin", base_name(spec, g)))
}

fn sidecar_path(dir: &Path, spec: CovarianceSpec, g: usize) -> PathBuf {
    dir.join(format!("{}.json", base_name(spec, g)))
}

/// Write one matrix (row-major f64, little endian) and its sidecar.
/// Returns the two paths written.
pub fn save(dir: &Path, spec: CovarianceSpec, g: usize, z: &ResponsibilityMatrix) -> Result<[PathBuf; 2]> {
    fs::create_dir_all(dir)?;
    let m = z.matrix();
    let mut bytes = Vec::with_capacity(8 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            bytes.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    let bin = matrix_path(dir, spec, g);
    fs::write(&bin, bytes)?;
    let side = sidecar_path(dir, spec, g);
    let sidecar = Sidecar {
        n: z.n_rows(),
        g: z.n_components(),
        spec: spec.name().to_string(),
        dtype: "f64le".to_string(),
    };
    fs::write(&side, serde_json::to_string_pretty(&sidecar)?)?;
    Ok([bin, side])
}

/// Load one matrix back; validates the sidecar shape and the row sums.
pub fn load(dir: &Path, spec: CovarianceSpec, g: usize) -> Result<ResponsibilityMatrix> {
    let side = sidecar_path(dir, spec, g);
    let text = fs::read_to_string(&side).map_err(|e| {
        Error::InvalidInput(format!("missing responsibility store {}: {e}", side.display()))
    })?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    if sidecar.dtype != "f64le" {
        return Err(Error::InvalidInput(format!("unsupported dtype {}", sidecar.dtype)));
    }
    if sidecar.g != g || sidecar.spec != spec.name() {
        return Err(Error::InvalidInput(format!(
            "sidecar {} does not describe {}/{g}",
            side.display(),
            spec.name()
        )));
    }
    let bytes = fs::read(matrix_path(dir, spec, g))?;
    if bytes.len() != 8 * sidecar.n * sidecar.g {
        return Err(Error::InvalidInput(format!(
            "matrix file has {} bytes, expected {}",
            bytes.len(),
            8 * sidecar.n * sidecar.g
        )));
    }
    let mut m = DMatrix::zeros(sidecar.n, sidecar.g);
    for i in 0..sidecar.n {
        for j in 0..sidecar.g {
            let off = 8 * (i * sidecar.g + j);
            m[(i, j)] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        }
    }
    ResponsibilityMatrix::new(m)
}
