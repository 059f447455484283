//! Minimal sparse symmetric linear algebra: triplet assembly, a sparse
//! LDL^T factorization with elimination-tree symbolic analysis, and a
//! reverse Cuthill-McKee ordering used to keep fill-in low on 2D meshes.

use crate::{EitError, Result};

/// Symmetric matrix stored as the upper triangle (including the diagonal)
/// in compressed sparse column format, rows sorted within each column.
#[derive(Debug, Clone)]
pub struct SymCsc {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_ind: Vec<usize>,
    pub values: Vec<f64>,
}

/// Accumulates (i, j, v) contributions for a symmetric matrix. Entries with
/// i > j are mirrored into the upper triangle; duplicates are summed.
pub struct SymTripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymTripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v == 0.0 {
            return;
        }
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((r, c, v));
    }

    pub fn build(mut self) -> SymCsc {
        self.entries.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0usize; self.n + 1];
        let mut row_ind: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ind.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..self.n {
            col_ptr[c + 1] += col_ptr[c];
        }
        SymCsc {
            n: self.n,
            col_ptr,
            row_ind,
            values,
        }
    }
}

impl SymCsc {
    /// Quadratic/bilinear form x^T A y using the stored upper triangle.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_ind[p];
                let v = self.values[p];
                if i == j {
                    s += v * x[i] * y[j];
                } else {
                    s += v * (x[i] * y[j] + x[j] * y[i]);
                }
            }
        }
        s
    }

    /// y = A x with A the full symmetric matrix.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_ind[p];
                let v = self.values[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }

    /// Dense copy of the full symmetric matrix.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_ind[p];
                let v = self.values[p];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// Reverse Cuthill-McKee ordering of an undirected graph given by adjacency
/// lists. Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.sort_unstable_by_key(|&v| adj[v].len());
    for &start in &nodes {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_unstable();
            nbrs.dedup();
            nbrs.sort_by_key(|&w| adj[w].len());
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Sparse LDL^T factorization of a symmetric positive definite matrix,
/// following the up-looking algorithm with an elimination tree.
pub struct LdlFactor {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    /// Factorizes `a` using the given ordering (`perm[new] = old`). Fails if
    /// a non-positive pivot is encountered.
    pub fn new(a: &SymCsc, perm: Vec<usize>) -> Result<Self> {
        let n = a.n;
        assert_eq!(perm.len(), n);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Permuted upper triangle in CSC: entry (i, j) of the permuted
        // matrix is (iperm[r], iperm[c]) or its transpose.
        let mut counts = vec![0usize; n + 1];
        for j in 0..n {
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                let i = a.row_ind[p];
                let (pi, pj) = (iperm[i], iperm[j]);
                let c = pi.max(pj);
                counts[c + 1] += 1;
            }
        }
        for c in 0..n {
            counts[c + 1] += counts[c];
        }
        let nnz = counts[n];
        let mut ap = counts.clone();
        let mut ai = vec![0usize; nnz];
        let mut ax = vec![0f64; nnz];
        for j in 0..a.n {
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                let i = a.row_ind[p];
                let (pi, pj) = (iperm[i], iperm[j]);
                let (r, c) = if pi <= pj { (pi, pj) } else { (pj, pi) };
                let slot = ap[c];
                ap[c] += 1;
                ai[slot] = r;
                ax[slot] = a.values[p];
            }
        }
        let ap = counts;

        // Symbolic: elimination tree and column counts of L.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            parent[k] = usize::MAX;
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                while i < k && flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let lnz_total = lp[n];
        let mut li = vec![0usize; lnz_total];
        let mut lx = vec![0f64; lnz_total];
        let mut d = vec![0f64; n];

        // Numeric factorization.
        let mut y = vec![0f64; n];
        let mut pattern = vec![0usize; n];
        let mut lnz_done = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                if i > k {
                    continue;
                }
                y[i] += ax[p];
                let mut len = 0usize;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for t in top..n {
                let i = pattern[t];
                let yi = y[i];
                y[i] = 0.0;
                let p_end = lp[i] + lnz_done[i];
                for p in lp[i]..p_end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p_end] = k;
                lx[p_end] = l_ki;
                lnz_done[i] += 1;
            }
            if d[k] <= 0.0 || !d[k].is_finite() {
                return Err(EitError::LinearSolve(format!(
                    "non-positive pivot {} at column {k}",
                    d[k]
                )));
            }
        }

        Ok(Self {
            n,
            perm,
            lp,
            li,
            lx,
            d,
        })
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0f64; n];
        for k in 0..n {
            z[k] = b[self.perm[k]];
        }
        // L z' = z
        for k in 0..n {
            let zk = z[k];
            for p in self.lp[k]..self.lp[k + 1] {
                z[self.li[p]] -= self.lx[p] * zk;
            }
        }
        for k in 0..n {
            z[k] /= self.d[k];
        }
        // L^T x = z
        for k in (0..n).rev() {
            let mut zk = z[k];
            for p in self.lp[k]..self.lp[k + 1] {
                zk -= self.lx[p] * z[self.li[p]];
            }
            z[k] = zk;
        }
        let mut x = vec![0f64; n];
        for k in 0..n {
            x[self.perm[k]] = z[k];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(a: &SymCsc, b: &[f64]) -> Vec<f64> {
        let m = a.to_dense();
        let chol = m.cholesky().expect("spd");
        let x = chol.solve(&nalgebra::DVector::from_column_slice(b));
        x.as_slice().to_vec()
    }

    fn random_spd(n: usize, seed: u64) -> SymCsc {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = SymTripletBuilder::new(n);
        for i in 0..n {
            t.add(i, i, 4.0 + rng.random::<f64>());
            if i + 1 < n {
                t.add(i, i + 1, -1.0 + 0.1 * rng.random::<f64>());
            }
            if i + 7 < n {
                t.add(i, i + 7, -0.5);
            }
        }
        t.build()
    }

    #[test]
    fn ldl_matches_dense_cholesky() {
        for seed in 0..5u64 {
            let a = random_spd(60, seed);
            let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
            let perm: Vec<usize> = (0..60).collect();
            let f = LdlFactor::new(&a, perm).unwrap();
            let x = f.solve(&b);
            let xd = dense_solve(&a, &b);
            for (u, v) in x.iter().zip(&xd) {
                assert!((u - v).abs() < 1e-10, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn ldl_with_rcm_permutation() {
        let a = random_spd(80, 3);
        // adjacency from sparsity
        let mut adj = vec![Vec::new(); a.n];
        for j in 0..a.n {
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                let i = a.row_ind[p];
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        let perm = reverse_cuthill_mckee(&adj);
        let b: Vec<f64> = (0..80).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let f = LdlFactor::new(&a, perm).unwrap();
        let x = f.solve(&b);
        let xd = dense_solve(&a, &b);
        for (u, v) in x.iter().zip(&xd) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn triplets_merge_duplicates() {
        let mut t = SymTripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(0, 0, 2.0);
        t.add(1, 0, 0.5);
        t.add(0, 1, 0.5);
        t.add(1, 1, 4.0);
        let a = t.build();
        let d = a.to_dense();
        assert_eq!(d[(0, 0)], 3.0);
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(1, 1)], 4.0);
    }

    #[test]
    fn ldl_rejects_indefinite() {
        let mut t = SymTripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(1, 1, -1.0);
        let a = t.build();
        assert!(LdlFactor::new(&a, vec![0, 1]).is_err());
    }
}
