//! Small floating-point helpers shared across modules.

/// log(sum(exp(xs))) without overflow. Returns -inf for an empty slice or
/// when every entry is -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Pairwise (balanced-tree) summation. The association is a function of the
/// slice length alone, so accumulating per-batch partial sums in index order
/// gives the same bits whether the batches were produced serially or in
/// parallel.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// round(255*v) with half-up ties, clamped to [0, 255].
pub fn level_u8(v: f64) -> u8 {
    let x = 255.0 * v;
    let r = (x + 0.5).floor();
    r.clamp(0.0, 255.0) as u8
}
