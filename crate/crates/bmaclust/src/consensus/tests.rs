use approx::assert_relative_eq;
use nalgebra::DMatrix;

use crate::consensus::*;
use crate::params::ResponsibilityMatrix;
use crate::rng::{StreamKey, StreamRole};

/// The six-point fixture with two equally weighted hard clusterings,
/// {A,B,C | D,E,F} and {A,C,E | B,D,F}.
pub(crate) fn toy_consensus() -> ConsensusMatrix {
    let z1 = ResponsibilityMatrix::hard(&[0, 0, 0, 1, 1, 1], 2).unwrap();
    let z2 = ResponsibilityMatrix::hard(&[0, 1, 0, 1, 0, 1], 2).unwrap();
    weighted_consensus(&[(0.5, &z1), (0.5, &z2)]).unwrap()
}

#[rustfmt::skip]
pub(crate) const TOY_EXPECTED: [f64; 36] = [
    1.0, 0.5, 1.0, 0.0, 0.5, 0.0,
    0.5, 1.0, 0.5, 0.5, 0.0, 0.5,
    1.0, 0.5, 1.0, 0.0, 0.5, 0.0,
    0.0, 0.5, 0.0, 1.0, 0.5, 1.0,
    0.5, 0.0, 0.5, 0.5, 1.0, 0.5,
    0.0, 0.5, 0.0, 1.0, 0.5, 1.0,
];

fn random_consensus(n: usize, rng: &mut crate::rng::CounterRng) -> ConsensusMatrix {
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.next_f64();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    ConsensusMatrix::new(m, Provenance::External).unwrap()
}

/// Complete linkage recomputed from scratch at every step: groups are kept
/// explicitly and the inter-group distance is re-derived as the max over
/// the original matrix, with the same lexicographic tie-break.
fn bruteforce_complete(s: &ConsensusMatrix) -> Vec<(Vec<usize>, f64)> {
    let n = s.n();
    let d = s.dissimilarity();
    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut steps = Vec::new();
    while groups.len() > 1 {
        let mut best: Option<(f64, usize, usize, (usize, usize))> = None;
        for a in 0..groups.len() {
            for b in (a + 1)..groups.len() {
                let mut dist = f64::NEG_INFINITY;
                for &i in &groups[a] {
                    for &j in &groups[b] {
                        dist = dist.max(d[(i, j)]);
                    }
                }
                let (ma, mb) = (groups[a][0], groups[b][0]); // members stay sorted
                let key = (ma.min(mb), ma.max(mb));
                let better = match &best {
                    None => true,
                    Some((bd, _, _, bkey)) => dist < *bd || (dist == *bd && key < *bkey),
                };
                if better {
                    best = Some((dist, a, b, key));
                }
            }
        }
        let (h, a, b, _) = best.unwrap();
        let mut merged = groups[a].clone();
        merged.extend(groups[b].iter().cloned());
        merged.sort_unstable();
        steps.push((merged.clone(), h));
        groups.remove(b);
        groups.remove(a);
        groups.push(merged);
        groups.sort_by_key(|g| g[0]);
    }
    steps
}

fn leaves_under(dend: &Dendrogram, node: usize) -> Vec<usize> {
    if node < dend.n_leaves() {
        return vec![node];
    }
    let m = &dend.merges()[node - dend.n_leaves()];
    let mut l = leaves_under(dend, m.left);
    l.extend(leaves_under(dend, m.right));
    l.sort_unstable();
    l
}

// ---------------------------------------------------------------------

#[test]
fn hard_partition_similarity() {
    let z = ResponsibilityMatrix::hard(&[0, 0, 1], 2).unwrap();
    let s = similarity(&z);
    let want = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(s.matrix(), &want);
}

#[test]
fn even_split_gives_half() {
    let z = ResponsibilityMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
    let s = similarity(&z);
    assert_eq!(s.matrix()[(0, 1)], 0.5);
    assert_eq!(s.matrix()[(0, 0)], 1.0);
}

#[test]
fn similarity_matches_bruteforce_double_loop() {
    let mut rng = StreamKey::new(3, 0, StreamRole::Init).rng();
    let mut z = DMatrix::zeros(7, 3);
    for i in 0..7 {
        let mut row = [0.0; 3];
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = rng.next_f64();
            total += *v;
        }
        for (j, v) in row.iter().enumerate() {
            z[(i, j)] = v / total;
        }
    }
    let z = ResponsibilityMatrix::new(z).unwrap();
    let s = similarity(&z);
    for i in 0..7 {
        for j in 0..7 {
            if i == j {
                continue;
            }
            let direct: f64 = (0..3).map(|g| z.matrix()[(i, g)] * z.matrix()[(j, g)]).sum();
            assert_relative_eq!(s.matrix()[(i, j)], direct, epsilon = 1e-12);
        }
    }
}

#[test]
fn toy_average_reproduces_printed_matrix_exactly() {
    let s = toy_consensus();
    let want = DMatrix::from_row_slice(6, 6, &TOY_EXPECTED);
    assert_eq!(s.matrix(), &want);
}

#[test]
fn single_model_average_is_its_similarity() {
    let z = ResponsibilityMatrix::new(DMatrix::from_row_slice(
        3,
        2,
        &[0.9, 0.1, 0.4, 0.6, 0.25, 0.75],
    ))
    .unwrap();
    let avg = weighted_consensus(&[(1.0, &z)]).unwrap();
    let direct = similarity(&z);
    assert_eq!(avg.matrix(), direct.matrix());
}

#[test]
fn three_model_average_matches_independent_loop() {
    let zs = [
        ResponsibilityMatrix::hard(&[0, 0, 1, 1], 2).unwrap(),
        ResponsibilityMatrix::hard(&[0, 1, 1, 0], 2).unwrap(),
        ResponsibilityMatrix::hard(&[0, 0, 0, 1], 2).unwrap(),
    ];
    let weights = [0.2, 0.3, 0.5];
    let items: Vec<(f64, &ResponsibilityMatrix)> = weights.iter().cloned().zip(zs.iter()).collect();
    let s = weighted_consensus(&items).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            let mut want = 0.0;
            for (w, z) in weights.iter().zip(&zs) {
                let zm = z.matrix();
                want += w * (0..2).map(|g| zm[(i, g)] * zm[(j, g)]).sum::<f64>();
            }
            assert_relative_eq!(s.matrix()[(i, j)], want, epsilon = 1e-15);
        }
    }
}

#[test]
fn averaging_is_affine_in_weights() {
    // weights (1, 0) reproduce the first model's matrix exactly
    let z1 = ResponsibilityMatrix::new(DMatrix::from_row_slice(
        3,
        2,
        &[0.7, 0.3, 0.2, 0.8, 0.5, 0.5],
    ))
    .unwrap();
    let z2 = ResponsibilityMatrix::hard(&[0, 1, 1], 2).unwrap();
    let avg = weighted_consensus(&[(1.0, &z1), (0.0, &z2)]).unwrap();
    assert_eq!(avg.matrix(), similarity(&z1).matrix());
}

#[test]
fn mismatched_sizes_are_rejected() {
    let z1 = ResponsibilityMatrix::hard(&[0, 1], 2).unwrap();
    let z2 = ResponsibilityMatrix::hard(&[0, 1, 0], 2).unwrap();
    assert!(weighted_consensus(&[(0.5, &z1), (0.5, &z2)]).is_err());
}

#[test]
fn toy_tree_cut_above_half_gives_four_groups() {
    let s = toy_consensus();
    let dend = complete_linkage(&s);
    let groups = cut(&dend, 0.51).unwrap();
    assert_eq!(groups, vec![vec![0, 2], vec![1], vec![3, 5], vec![4]]);
}

#[test]
fn toy_tree_cut_points_match_expected_partitions() {
    let s = toy_consensus();
    let dend = complete_linkage(&s);
    // at 0.8: only the certain pairs stay together
    assert_eq!(cut(&dend, 0.8).unwrap(), vec![vec![0, 2], vec![1], vec![3, 5], vec![4]]);
    // at 0.2: the two original clusterings' intersection structure
    assert_eq!(cut(&dend, 0.2).unwrap(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    // the {A,B,C} block forms exactly at height 0.5
    let h: Vec<f64> = dend.merges().iter().map(|m| m.height).collect();
    assert_eq!(h, vec![0.0, 0.0, 0.5, 0.5, 1.0]);
    // probability 1 keeps exactly the certain pairs together
    assert_eq!(cut(&dend, 1.0).unwrap(), vec![vec![0, 2], vec![1], vec![3, 5], vec![4]]);
    assert!(cut(&dend, 1.5).is_err());
}

#[test]
fn all_dissimilar_points_merge_at_height_one() {
    let s = ConsensusMatrix::new(DMatrix::identity(5, 5), Provenance::External).unwrap();
    let dend = complete_linkage(&s);
    for m in dend.merges() {
        assert_eq!(m.height, 1.0);
    }
}

#[test]
fn linkage_matches_bruteforce_reference() {
    let mut rng = StreamKey::new(8, 0, StreamRole::Init).rng();
    for trial in 0..30 {
        let s = random_consensus(8, &mut rng);
        let dend = complete_linkage(&s);
        let brute = bruteforce_complete(&s);
        assert_eq!(dend.merges().len(), brute.len());
        for (k, (want_members, want_h)) in brute.iter().enumerate() {
            let got = leaves_under(&dend, s.n() + k);
            assert_eq!(&got, want_members, "trial {trial}, merge {k}");
            assert_eq!(dend.merges()[k].height, *want_h, "trial {trial}, merge {k}");
        }
    }
}

#[test]
fn heights_are_monotone_and_equal_max_within_group() {
    let mut rng = StreamKey::new(21, 0, StreamRole::Init).rng();
    for _ in 0..20 {
        let s = random_consensus(9, &mut rng);
        let d = s.dissimilarity();
        let dend = complete_linkage(&s);
        let mut prev = f64::NEG_INFINITY;
        for (k, m) in dend.merges().iter().enumerate() {
            assert!(m.height >= prev);
            prev = m.height;
            // complete linkage: the merge height is the max pairwise
            // dissimilarity inside the newly formed group
            let members = leaves_under(&dend, s.n() + k);
            let mut mx = f64::NEG_INFINITY;
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    mx = mx.max(d[(i, j)]);
                }
            }
            assert_eq!(mx, m.height);
        }
    }
}

#[test]
fn cut_guarantee_holds_on_random_matrices() {
    let mut rng = StreamKey::new(34, 0, StreamRole::Init).rng();
    for _ in 0..60 {
        let n = 3 + (rng.next_f64() * 9.0) as usize;
        let s = random_consensus(n, &mut rng);
        let dend = complete_linkage(&s);
        for &p in &[0.1, 0.3, 0.5, 0.77, 0.95] {
            for group in cut(&dend, p).unwrap() {
                assert!(
                    s.min_within(&group) >= p,
                    "group {group:?} violates the level-{p} guarantee"
                );
            }
        }
    }
}

#[test]
fn linkage_is_permutation_equivariant() {
    let mut rng = StreamKey::new(55, 0, StreamRole::Init).rng();
    let s = random_consensus(7, &mut rng);
    let perm = [3, 0, 6, 2, 5, 1, 4];
    let m = s.matrix();
    let pm = DMatrix::from_fn(7, 7, |i, j| m[(perm[i], perm[j])]);
    let sp = ConsensusMatrix::new(pm, Provenance::External).unwrap();
    let a: Vec<f64> = complete_linkage(&s).merges().iter().map(|x| x.height).collect();
    let b: Vec<f64> = complete_linkage(&sp).merges().iter().map(|x| x.height).collect();
    assert_eq!(a, b);
}

#[test]
fn two_leaf_seriation_prefers_identity() {
    let s = ConsensusMatrix::new(DMatrix::identity(2, 2), Provenance::External).unwrap();
    let dend = complete_linkage(&s);
    assert_eq!(seriate(&dend, &s.dissimilarity()), vec![0, 1]);
}

#[test]
fn chain_seriation_recovers_line_order() {
    // four points on a line, dissimilarity proportional to separation
    let n = 4;
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[(i, j)] = 1.0 - (i as f64 - j as f64).abs() * 0.3;
            }
        }
    }
    let s = ConsensusMatrix::new(m, Provenance::External).unwrap();
    let dend = complete_linkage(&s);
    let order = seriate(&dend, &s.dissimilarity());
    assert!(order == vec![0, 1, 2, 3] || order == vec![3, 2, 1, 0], "order {order:?}");
}

#[test]
fn seriation_matches_independent_enumeration_and_keeps_topology() {
    let mut rng = StreamKey::new(89, 0, StreamRole::Init).rng();
    for _ in 0..25 {
        let s = random_consensus(6, &mut rng);
        let d = s.dissimilarity();
        let dend = complete_linkage(&s);
        let got = seriate(&dend, &d);

        // independent bottom-up enumeration of the four orientations
        let n = 6;
        let mut orders: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        orders.resize(n + dend.merges().len(), Vec::new());
        for (k, m) in dend.merges().iter().enumerate() {
            let a = orders[m.left].clone();
            let b = orders[m.right].clone();
            let mut best: Option<(f64, Vec<usize>)> = None;
            for (la, lb) in [(false, false), (true, false), (false, true), (true, true)] {
                let mut left = a.clone();
                if la {
                    left.reverse();
                }
                let mut right = b.clone();
                if lb {
                    right.reverse();
                }
                let v = d[(left[left.len() - 1], right[0])];
                if best.as_ref().map(|(bv, _)| v < *bv).unwrap_or(true) {
                    let mut o = left;
                    o.extend(right);
                    best = Some((v, o));
                }
            }
            orders[n + k] = best.unwrap().1;
        }
        let want = orders[n + dend.merges().len() - 1].clone();
        assert_eq!(got, want);

        // orientation only: sorted permutation is the identity, and the
        // member set under every internal node is unchanged
        let mut sorted = got.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn consensus_matrix_validation() {
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.6, 1.0]);
    assert!(ConsensusMatrix::new(asym, Provenance::External).is_err());
    let out_of_range = DMatrix::from_row_slice(2, 2, &[1.0, 1.4, 1.4, 1.0]);
    assert!(ConsensusMatrix::new(out_of_range, Provenance::External).is_err());
}

#[test]
fn dendrogram_text_is_nested_parens_with_heights() {
    let s = toy_consensus();
    let dend = complete_linkage(&s);
    let text = dendrogram_text(&dend);
    assert_eq!(text, "(((0,2):0,1):0.5,((3,5):0,4):0.5):1");
}
