//! Small bundled datasets.

use crate::data::DataMatrix;

/// Fisher's iris measurements (150 x 4, centimetres) with the species label
/// of each row. Values follow the corrected version distributed with R,
/// which fixes two transcription errors in the UCI copy.
pub fn iris() -> (DataMatrix, Vec<String>) {
    let text = include_str!("../data/iris.csv");
    let mut rows = Vec::with_capacity(150);
    let mut species = Vec::with_capacity(150);
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        rows.push(
            cells[..4]
                .iter()
                .map(|c| c.parse::<f64>().expect("bundled data is numeric"))
                .collect::<Vec<f64>>(),
        );
        species.push(cells[4].to_string());
    }
    (
        DataMatrix::from_rows(&rows).expect("bundled data is valid"),
        species,
    )
}

/// The bundled iris file verbatim, for examples and tests that want a CSV
/// on disk.
pub fn iris_csv() -> &'static str {
    include_str!("../data/iris.csv")
}
