//! Gram system of the constraint matrices: G_ij = ⟨A_i, A_j⟩.
//!
//! Projecting onto the affine family {Σ y_i A_i − C} and recovering y from a
//! slack matrix both reduce to solving G y = t. The constraint matrices are
//! sparse and mostly cell-disjoint, so G splits into small independent
//! diagonal blocks; the direct path detects the blocks by connected
//! components of the sparsity pattern and caches one dense Cholesky factor
//! per block. A matrix-free BiCGSTAB path over the same sparse G serves as
//! the optional iterative solver with warm starts.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::sdp::StandardFormSdp;

#[derive(Debug)]
struct GramBlock {
    /// Constraint indices covered by this block, ascending.
    indices: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
}

#[derive(Debug)]
pub(crate) struct GramSolver {
    m: usize,
    /// Full symmetric sparse rows of G for matrix-vector products.
    rows: Vec<Vec<(usize, f64)>>,
    blocks: Vec<GramBlock>,
}

impl GramSolver {
    /// Builds and factors the Gram system. Fails with [`Error::SingularGram`]
    /// when the constraint matrices are linearly dependent.
    pub(crate) fn build(sdp: &StandardFormSdp) -> Result<Self> {
        let m = sdp.m();
        // Cell → (constraint, value) buckets; BTreeMap keeps accumulation
        // order deterministic.
        let mut buckets: BTreeMap<(u32, u32), Vec<(usize, f64)>> = BTreeMap::new();
        for (k, a) in sdp.constraints().iter().enumerate() {
            for &(i, j, v) in a.entries() {
                buckets.entry((i, j)).or_default().push((k, v));
            }
        }

        let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut components: UnionFind<usize> = UnionFind::new(m);
        for ((i, j), bucket) in &buckets {
            // An off-diagonal cell (i, j) stands for E_ij + E_ji, which has
            // squared Frobenius norm 2.
            let weight = if i == j { 1.0 } else { 2.0 };
            for (p, &(ka, va)) in bucket.iter().enumerate() {
                for &(kb, vb) in &bucket[p..] {
                    let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
                    *entries.entry((lo, hi)).or_insert(0.0) += weight * va * vb;
                    components.union(lo, hi);
                }
            }
        }

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (&(i, j), &v) in &entries {
            if v != 0.0 {
                rows[i].push((j, v));
                if i != j {
                    rows[j].push((i, v));
                }
            }
        }

        // Group constraints into blocks by component representative,
        // preserving ascending index order inside each block.
        let labels = components.into_labeling();
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (idx, root) in labels.into_iter().enumerate() {
            by_root.entry(root).or_default().push(idx);
        }

        let mut blocks = Vec::with_capacity(by_root.len());
        for (_, indices) in by_root {
            let k = indices.len();
            let mut dense = DMatrix::<f64>::zeros(k, k);
            for (a, &ia) in indices.iter().enumerate() {
                for (b, &ib) in indices.iter().enumerate().skip(a) {
                    if let Some(&v) = entries.get(&(ia, ib)) {
                        dense[(a, b)] = v;
                        dense[(b, a)] = v;
                    }
                }
            }
            let chol = Cholesky::new(dense).ok_or(Error::SingularGram)?;
            blocks.push(GramBlock { indices, chol });
        }

        Ok(Self { m, rows, blocks })
    }

    pub(crate) fn m(&self) -> usize {
        self.m
    }

    /// Direct solve G y = t through the cached per-block factors.
    pub(crate) fn solve(&self, t: &DVector<f64>) -> DVector<f64> {
        assert_eq!(t.len(), self.m);
        let mut y = DVector::zeros(self.m);
        for block in &self.blocks {
            let mut sub = DVector::from_fn(block.indices.len(), |r, _| t[block.indices[r]]);
            block.chol.solve_mut(&mut sub);
            for (r, &idx) in block.indices.iter().enumerate() {
                y[idx] = sub[r];
            }
        }
        y
    }

    pub(crate) fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Matrix-free BiCGSTAB on G y = t, warm-started from `warm` when given.
    /// Returns the iterate and whether the residual converged to
    /// `rel_tol·‖t‖`.
    pub(crate) fn bicgstab(
        &self,
        t: &DVector<f64>,
        warm: Option<&DVector<f64>>,
        rel_tol: f64,
        max_iter: usize,
    ) -> (DVector<f64>, bool) {
        let b_norm = t.norm();
        if b_norm == 0.0 {
            return (DVector::zeros(self.m), true);
        }
        let tol = rel_tol * b_norm;

        let mut x = warm.cloned().unwrap_or_else(|| DVector::zeros(self.m));
        let mut r = t - self.matvec(&x);
        if r.norm() <= tol {
            return (x, true);
        }
        let r_hat = r.clone();
        let mut rho = 1.0f64;
        let mut alpha = 1.0f64;
        let mut omega = 1.0f64;
        let mut v = DVector::zeros(self.m);
        let mut p = DVector::zeros(self.m);

        for _ in 0..max_iter {
            let rho_new = r_hat.dot(&r);
            if rho_new.abs() < f64::MIN_POSITIVE * 1e4 {
                return (x, false); // breakdown
            }
            let beta = (rho_new / rho) * (alpha / omega);
            p = &r + (&p - &v * omega) * beta;
            v = self.matvec(&p);
            let denom = r_hat.dot(&v);
            if denom.abs() < f64::MIN_POSITIVE * 1e4 {
                return (x, false);
            }
            alpha = rho_new / denom;
            let s = &r - &v * alpha;
            if s.norm() <= tol {
                x += &p * alpha;
                return (x, true);
            }
            let t_vec = self.matvec(&s);
            let tt = t_vec.dot(&t_vec);
            if tt == 0.0 {
                return (x, false);
            }
            omega = t_vec.dot(&s) / tt;
            x += &p * alpha + &s * omega;
            r = &s - &t_vec * omega;
            if r.norm() <= tol {
                return (x, true);
            }
            rho = rho_new;
        }
        (x, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::SparseSymMat;

    fn toy_sdp() -> StandardFormSdp {
        // 3x3 matrices: two diagonal units sharing nothing, one chain-style
        // constraint overlapping a third diagonal unit.
        let n = 3;
        let c = DMatrix::zeros(n, n);
        let constraints = vec![
            SparseSymMat::from_entries(n, vec![(0, 0, 1.0)]).unwrap(),
            SparseSymMat::from_entries(n, vec![(1, 1, 1.0)]).unwrap(),
            SparseSymMat::from_entries(n, vec![(2, 2, 1.0), (0, 1, 1.0)]).unwrap(),
            SparseSymMat::from_entries(n, vec![(0, 1, 1.0), (0, 2, -1.0)]).unwrap(),
        ];
        let b = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        StandardFormSdp::new(c, constraints, b).unwrap()
    }

    fn dense_gram(sdp: &StandardFormSdp) -> DMatrix<f64> {
        let m = sdp.m();
        DMatrix::from_fn(m, m, |i, j| {
            sdp.constraints()[i].frob_inner(&sdp.constraints()[j].to_dense())
        })
    }

    #[test]
    fn direct_solve_matches_dense_reference() {
        let sdp = toy_sdp();
        let gram = GramSolver::build(&sdp).unwrap();
        let g = dense_gram(&sdp);
        let t = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = gram.solve(&t);
        let reference = g.lu().solve(&t).unwrap();
        assert!((y - reference).norm() < 1e-12);
    }

    #[test]
    fn matvec_matches_dense_reference() {
        let sdp = toy_sdp();
        let gram = GramSolver::build(&sdp).unwrap();
        let g = dense_gram(&sdp);
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7]);
        assert!((gram.matvec(&x) - g * x).norm() < 1e-12);
    }

    #[test]
    fn bicgstab_agrees_with_direct() {
        let sdp = toy_sdp();
        let gram = GramSolver::build(&sdp).unwrap();
        let t = DVector::from_vec(vec![0.2, 1.0, -0.4, 0.9]);
        let direct = gram.solve(&t);
        let (iterative, converged) = gram.bicgstab(&t, None, 1e-14, 200);
        assert!(converged);
        assert!((direct - iterative).norm() < 1e-10);
    }

    #[test]
    fn dependent_constraints_are_rejected() {
        let n = 2;
        let c = DMatrix::zeros(n, n);
        let constraints = vec![
            SparseSymMat::from_entries(n, vec![(0, 0, 1.0)]).unwrap(),
            SparseSymMat::from_entries(n, vec![(0, 0, 2.0)]).unwrap(),
        ];
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let sdp = StandardFormSdp::new(c, constraints, b).unwrap();
        assert!(matches!(
            GramSolver::build(&sdp),
            Err(Error::SingularGram)
        ));
    }
}
