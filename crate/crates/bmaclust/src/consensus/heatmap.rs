//! Consensus heatmap emission: CSV (normative) plus raster renderings.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numeric::level_u8;

use super::ConsensusMatrix;

/// The emitted forms of one reordered consensus matrix. The CSV is the
/// artifact of record; the rasters are for eyeballing.
#[derive(Debug, Clone)]
pub struct HeatmapArtifacts {
    /// Header row of observation ids (the permutation), then the reordered
    /// matrix, shortest round-trip decimal formatting.
    pub csv: String,
    /// Binary PGM, one 8-bit gray level per cell: level = round(255 * s).
    pub pgm: Vec<u8>,
    /// Binary PPM on a white -> yellow -> red ramp (1 maps to red).
    pub ppm: Vec<u8>,
}

/// Render the matrix under a leaf ordering (any permutation of 0..N).
pub fn heatmap_render(s: &ConsensusMatrix, order: &[usize]) -> Result<HeatmapArtifacts> {
    let n = s.n();
    if order.len() != n {
        return Err(Error::InvalidInput(format!(
            "order has {} entries for an {n}-point matrix",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return Err(Error::InvalidInput("order is not a permutation".into()));
        }
        seen[i] = true;
    }

    let m = s.matrix();
    let mut csv = String::new();
    let ids: Vec<String> = order.iter().map(|i| i.to_string()).collect();
    let _ = writeln!(csv, "{}", ids.join(","));

    let mut levels = Vec::with_capacity(n * n);
    for &i in order {
        let mut cells = Vec::with_capacity(n);
        for &j in order {
            let v = m[(i, j)];
            cells.push(format!("{v}"));
            levels.push(level_u8(v));
        }
        let _ = writeln!(csv, "{}", cells.join(","));
    }

    let mut pgm = format!("P5\n{n} {n}\n255\n").into_bytes();
    pgm.extend_from_slice(&levels);

    let mut ppm = format!("P6\n{n} {n}\n255\n").into_bytes();
    for &l in &levels {
        ppm.extend_from_slice(&ramp(l));
    }

    Ok(HeatmapArtifacts { csv, pgm, ppm })
}

/// White (0) -> yellow (mid) -> red (255).
fn ramp(level: u8) -> [u8; 3] {
    let u = level as f64 / 255.0;
    if u <= 0.5 {
        let s = 2.0 * u;
        [255, 255, (255.0 * (1.0 - s) + 0.5).floor() as u8]
    } else {
        let s = 2.0 * u - 1.0;
        [255, (255.0 * (1.0 - s) + 0.5).floor() as u8, 0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::Provenance;
    use nalgebra::DMatrix;

    fn diag_matrix(n: usize) -> ConsensusMatrix {
        ConsensusMatrix::new(DMatrix::identity(n, n), Provenance::External).unwrap()
    }

    #[test]
    fn identity_matrix_renders_bright_diagonal() {
        let s = diag_matrix(3);
        let art = heatmap_render(&s, &[0, 1, 2]).unwrap();
        let header = b"P5\n3 3\n255\n";
        assert_eq!(&art.pgm[..header.len()], header);
        let pix = &art.pgm[header.len()..];
        assert_eq!(pix, &[255, 0, 0, 0, 255, 0, 0, 0, 255]);
        assert!(art.csv.starts_with("0,1,2\n1,0,0\n"));
    }

    #[test]
    fn half_probability_renders_as_128() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 0.5;
        m[(1, 0)] = 0.5;
        let s = ConsensusMatrix::new(m, Provenance::External).unwrap();
        let art = heatmap_render(&s, &[0, 1]).unwrap();
        let pix = &art.pgm[b"P5\n2 2\n255\n".len()..];
        assert_eq!(pix, &[255, 128, 128, 255]);
    }

    #[test]
    fn ramp_endpoints_are_white_and_red() {
        assert_eq!(ramp(0), [255, 255, 255]);
        assert_eq!(ramp(255), [255, 0, 0]);
        // the hot half has no blue
        assert_eq!(ramp(200)[2], 0);
    }

    #[test]
    fn reordering_permutes_rows_and_columns() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 0.25;
        m[(1, 0)] = 0.25;
        let s = ConsensusMatrix::new(m, Provenance::External).unwrap();
        let art = heatmap_render(&s, &[1, 0]).unwrap();
        assert!(art.csv.starts_with("1,0\n"));
        assert!(heatmap_render(&s, &[0, 0]).is_err());
        assert!(heatmap_render(&s, &[0]).is_err());
    }
}
