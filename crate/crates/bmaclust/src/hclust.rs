//! Agglomerative merge engine shared by the consensus dendrograms
//! (complete linkage) and the Ward initializer.

/// One merge: `left` and `right` are node ids, with leaves `0..n` and the
/// k-th merge creating node `n + k`. `left` always holds the smaller
/// minimum leaf index of the two children.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// A full agglomeration history over `n` leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub(crate) fn new(n_leaves: usize, merges: Vec<Merge>) -> Self {
        debug_assert_eq!(merges.len(), n_leaves.saturating_sub(1));
        Dendrogram { n_leaves, merges }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Leaves in tree order (left subtree before right subtree).
    pub fn leaf_order(&self) -> Vec<usize> {
        if self.n_leaves == 1 {
            return vec![0];
        }
        let mut order = Vec::with_capacity(self.n_leaves);
        let root = self.n_leaves + self.merges.len() - 1;
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            if node < self.n_leaves {
                order.push(node);
            } else {
                let m = &self.merges[node - self.n_leaves];
                // right pushed first so left is visited first
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        order
    }

    /// Groups formed by applying every merge with height <= `h`. Groups are
    /// ordered by their smallest member; members ascend.
    pub fn cut_at_height(&self, h: f64) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n_leaves).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        // collect the leaves under each node lazily through union-find
        let mut reps: Vec<usize> = (0..self.n_leaves).collect(); // node -> representative leaf
        for m in &self.merges {
            let a = reps[m.left];
            let b = reps[m.right];
            reps.push(a);
            if m.height <= h {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                parent[rb.max(ra)] = ra.min(rb);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of_root: Vec<Option<usize>> = vec![None; self.n_leaves];
        for i in 0..self.n_leaves {
            let r = find(&mut parent, i);
            match group_of_root[r] {
                Some(gi) => groups[gi].push(i),
                None => {
                    group_of_root[r] = Some(groups.len());
                    groups.push(vec![i]);
                }
            }
        }
        groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LinkageMethod {
    /// Group distance = max pairwise distance.
    Complete,
    /// Ward's criterion via the Lance-Williams update on squared
    /// Euclidean distances.
    Ward,
}

/// Run agglomeration over a dense symmetric dissimilarity matrix (row-major,
/// n x n). Ties in the minimum group distance are broken toward the pair
/// whose (smaller min leaf, larger min leaf) key is lexicographically least,
/// which makes the sequence deterministic.
pub(crate) fn agglomerate(dist: &[f64], n: usize, method: LinkageMethod) -> Dendrogram {
    assert_eq!(dist.len(), n * n);
    if n == 1 {
        return Dendrogram::new(1, Vec::new());
    }
    let mut d = dist.to_vec();
    let mut active: Vec<bool> = vec![true; n];
    let mut node_id: Vec<usize> = (0..n).collect();
    let mut min_leaf: Vec<usize> = (0..n).collect();
    let mut size: Vec<f64> = vec![1.0; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        // find the closest active pair
        let mut best: Option<(f64, usize, usize, (usize, usize))> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let dij = d[i * n + j];
                let key = (min_leaf[i].min(min_leaf[j]), min_leaf[i].max(min_leaf[j]));
                let better = match &best {
                    None => true,
                    Some((bd, _, _, bkey)) => dij < *bd || (dij == *bd && key < *bkey),
                };
                if better {
                    best = Some((dij, i, j, key));
                }
            }
        }
        let (h, i, j, _) = best.expect("at least one active pair");

        // update distances to the merged group, stored in slot i
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let dki = d[k * n + i];
            let dkj = d[k * n + j];
            let new = match method {
                LinkageMethod::Complete => dki.max(dkj),
                LinkageMethod::Ward => {
                    let (si, sj, sk) = (size[i], size[j], size[k]);
                    ((si + sk) * dki + (sj + sk) * dkj - sk * d[i * n + j]) / (si + sj + sk)
                }
            };
            d[k * n + i] = new;
            d[i * n + k] = new;
        }

        let (na, nb) = (node_id[i], node_id[j]);
        let (la, lb) = (min_leaf[i], min_leaf[j]);
        let (left, right) = if la <= lb { (na, nb) } else { (nb, na) };
        merges.push(Merge { left, right, height: h });

        active[j] = false;
        node_id[i] = n + step;
        min_leaf[i] = la.min(lb);
        size[i] += size[j];
    }
    Dendrogram::new(n, merges)
}

/// Cluster labels after stopping the merge sequence at `k` groups. Labels
/// are assigned by first occurrence, so group 0 contains leaf 0.
pub(crate) fn labels_at(dend: &Dendrogram, k: usize) -> Vec<usize> {
    let n = dend.n_leaves();
    assert!(k >= 1 && k <= n);
    let mut parent: Vec<usize> = (0..n + dend.merges().len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (step, m) in dend.merges()[..n - k].iter().enumerate() {
        let node = n + step;
        let ra = find(&mut parent, m.left);
        let rb = find(&mut parent, m.right);
        parent[ra] = node;
        parent[rb] = node;
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut label_of_root: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let l = *label_of_root.entry(r).or_insert_with(|| {
            let l = next;
            next += 1;
            l
        });
        labels[i] = l;
    }
    labels
}
