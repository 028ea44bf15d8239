//! Gruvaeus-Wainer leaf ordering.

use nalgebra::DMatrix;

use crate::hclust::Dendrogram;

/// Orient every merge of the dendrogram so that the two objects meeting at
/// the junction are as close as possible in `d` (the dissimilarity the tree
/// was built from). At a merge of ordered blocks A and B the candidates are
/// (A,B), (A',B), (A,B') and (A',B') with X' the reversal of X; the first
/// candidate attaining the minimal boundary dissimilarity wins, so ties
/// prefer the unreversed order. Returns the leaf permutation; the tree
/// topology is untouched.
pub fn seriate(dend: &Dendrogram, d: &DMatrix<f64>) -> Vec<usize> {
    let n = dend.n_leaves();
    assert_eq!(d.nrows(), n, "dissimilarity must match the tree");
    if n == 1 {
        return vec![0];
    }
    let mut orders: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    orders.resize(n + dend.merges().len(), None);

    for (step, m) in dend.merges().iter().enumerate() {
        let a = orders[m.left].take().expect("child order computed");
        let b = orders[m.right].take().expect("child order computed");
        let rev_a: Vec<usize> = a.iter().rev().cloned().collect();
        let rev_b: Vec<usize> = b.iter().rev().cloned().collect();

        let boundary = |left: &[usize], right: &[usize]| d[(left[left.len() - 1], right[0])];
        let candidates: [(&[usize], &[usize]); 4] =
            [(&a, &b), (&rev_a, &b), (&a, &rev_b), (&rev_a, &rev_b)];

        let mut best = 0;
        let mut best_d = boundary(candidates[0].0, candidates[0].1);
        for (k, (l, r)) in candidates.iter().enumerate().skip(1) {
            let v = boundary(l, r);
            if v < best_d {
                best_d = v;
                best = k;
            }
        }
        let (l, r) = candidates[best];
        let mut merged = Vec::with_capacity(l.len() + r.len());
        merged.extend_from_slice(l);
        merged.extend_from_slice(r);
        orders[n + step] = Some(merged);
    }
    orders[n + dend.merges().len() - 1].take().expect("root order computed")
}
