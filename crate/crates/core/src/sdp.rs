//! Standard-form SDP container, its dual view, and dual-feasibility
//! certification.
//!
//! Primal:  max ⟨C, X⟩  s.t.  ⟨A_i, X⟩ = b_i (i = 1..m),  X ⪰ 0.
//! Dual:    min b·y     s.t.  Z(y) = Σ_i y_i A_i − C ⪰ 0.
//!
//! Weak duality makes every dual-feasible y an upper bound certificate on the
//! primal optimum. A slightly infeasible y is repaired by shifting Z by
//! ε·I, realized through the unit diagonal constraints at an objective cost
//! of n·ε — so certified bounds stay rigorous even before full convergence.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gram::GramSolver;

/// Sparse symmetric matrix stored as upper-triangle entries `(i, j, v)` with
/// `i ≤ j`; an off-diagonal entry represents `v·(E_ij + E_ji)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMat {
    n: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl SparseSymMat {
    pub fn from_entries(n: usize, entries: Vec<(u32, u32, f64)>) -> Result<Self> {
        for &(i, j, v) in &entries {
            if i > j || j as usize >= n {
                return Err(Error::Dimension(format!(
                    "sparse entry ({i}, {j}) outside upper triangle of a {n}x{n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse matrix entry".into()));
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Upper-triangle entries.
    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Frobenius inner product against a dense symmetric matrix.
    pub fn frob_inner(&self, m: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            let cell = m[(i as usize, j as usize)];
            acc += if i == j { v * cell } else { 2.0 * v * cell };
        }
        acc
    }

    /// Adds `scale` times this matrix into a dense accumulator.
    pub fn add_scaled_into(&self, scale: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            out[(i as usize, j as usize)] += scale * v;
            if i != j {
                out[(j as usize, i as usize)] += scale * v;
            }
        }
    }

    /// Dense copy (test and export convenience).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        self.add_scaled_into(1.0, &mut out);
        out
    }
}

/// Standard-form primal SDP data: dense symmetric objective `C`, sparse
/// symmetric constraint matrices `A_i`, and right-hand side `b`.
///
/// Invariant: the `A_i` are linearly independent (the NPA assembly
/// guarantees this; for hand-built problems it is checked when the Gram
/// system is first factored, which fails on dependent constraints).
#[derive(Debug, Clone)]
pub struct StandardFormSdp {
    n: usize,
    objective: DMatrix<f64>,
    constraints: Vec<SparseSymMat>,
    rhs: DVector<f64>,
}

impl StandardFormSdp {
    pub fn new(
        objective: DMatrix<f64>,
        constraints: Vec<SparseSymMat>,
        rhs: DVector<f64>,
    ) -> Result<Self> {
        let n = objective.nrows();
        if objective.ncols() != n {
            return Err(Error::Dimension("objective matrix must be square".into()));
        }
        if !objective.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("objective matrix".into()));
        }
        if constraints.len() != rhs.len() {
            return Err(Error::Dimension(format!(
                "{} constraint matrices vs {} right-hand sides",
                constraints.len(),
                rhs.len()
            )));
        }
        for a in &constraints {
            if a.n() != n {
                return Err(Error::Dimension(
                    "constraint matrix side differs from objective".into(),
                ));
            }
        }
        Ok(Self {
            n,
            objective,
            constraints,
            rhs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &DMatrix<f64> {
        &self.objective
    }

    pub fn constraints(&self) -> &[SparseSymMat] {
        &self.constraints
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn total_nnz(&self) -> usize {
        self.constraints.iter().map(SparseSymMat::nnz).sum()
    }
}

/// Dual view of a standard-form SDP: minimize b·y over the spectrahedron
/// Z(y) = Σ y_i A_i − C ⪰ 0. Shares the primal data; cloning is cheap and
/// the cached Gram factorization is shared across clones.
#[derive(Debug, Clone)]
pub struct DualSdp {
    inner: Arc<StandardFormSdp>,
    gram: Arc<OnceLock<Arc<GramSolver>>>,
}

/// Dual view of the SDP; no numeric transformation, the data is shared.
pub fn dualize(p: StandardFormSdp) -> DualSdp {
    DualSdp {
        inner: Arc::new(p),
        gram: Arc::new(OnceLock::new()),
    }
}

impl DualSdp {
    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn m(&self) -> usize {
        self.inner.m()
    }

    pub fn primal(&self) -> &StandardFormSdp {
        &self.inner
    }

    pub fn objective(&self) -> &DMatrix<f64> {
        self.inner.objective()
    }

    pub fn constraints(&self) -> &[SparseSymMat] {
        self.inner.constraints()
    }

    pub fn rhs(&self) -> &DVector<f64> {
        self.inner.rhs()
    }

    /// Dual objective b·y.
    pub fn objective_value(&self, y: &DVector<f64>) -> f64 {
        self.inner.rhs().dot(y)
    }

    /// Slack matrix Z(y) = Σ y_i A_i − C, dense symmetric.
    pub fn slack(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        if y.len() != self.m() {
            return Err(Error::Dimension(format!(
                "dual vector length {} vs {} constraints",
                y.len(),
                self.m()
            )));
        }
        let mut z = -self.inner.objective().clone();
        for (i, a) in self.inner.constraints().iter().enumerate() {
            a.add_scaled_into(y[i], &mut z);
        }
        Ok(z)
    }

    /// Cached Gram factorization of the constraint system (built on first
    /// use, shared afterwards).
    pub(crate) fn gram(&self) -> Result<Arc<GramSolver>> {
        if let Some(g) = self.gram.get() {
            return Ok(g.clone());
        }
        let solver = Arc::new(GramSolver::build(&self.inner)?);
        Ok(self.gram.get_or_init(|| solver).clone())
    }

    /// Least-squares recovery of the dual vector from a (near-)member of the
    /// affine family: solves min_y ‖Σ y_i A_i − (W + C)‖_F via the cached
    /// Gram factorization; exact when W = Z(y).
    pub fn recover_y(&self, w: &DMatrix<f64>) -> Result<DVector<f64>> {
        if w.nrows() != self.n() || w.ncols() != self.n() {
            return Err(Error::Dimension("matrix side differs from SDP".into()));
        }
        let gram = self.gram()?;
        let target = w + self.inner.objective();
        let mut t = DVector::zeros(self.m());
        for (i, a) in self.inner.constraints().iter().enumerate() {
            t[i] = a.frob_inner(&target);
        }
        Ok(gram.solve(&t))
    }

    /// Certifies a dual vector: the certified bound adds n·max(0, −λ_min) to
    /// b·y, the objective cost of shifting Z(y) onto the PSD cone through the
    /// unit diagonal constraints. Valid upper bound on the primal optimum for
    /// any y.
    pub fn certify(&self, y: &DVector<f64>) -> Result<Certificate> {
        let z = self.slack(y)?;
        let eigenvalues = z.symmetric_eigenvalues();
        let min_eigenvalue = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let raw_bound = self.objective_value(y);
        let certified_bound = raw_bound + self.n() as f64 * (-min_eigenvalue).max(0.0);
        Ok(Certificate {
            y: y.clone(),
            raw_bound,
            min_eigenvalue,
            certified_bound,
        })
    }
}

/// A dual point together with the rigorous bound it certifies.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// Dual vector.
    pub y: DVector<f64>,
    /// b·y at the dual vector.
    pub raw_bound: f64,
    /// Smallest eigenvalue of Z(y).
    pub min_eigenvalue: f64,
    /// raw_bound + n·max(0, −min_eigenvalue); equals raw_bound when Z(y) ⪰ 0.
    pub certified_bound: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{chsh, BellFunctional, Scenario};
    use crate::npa::{assemble_primal, build_basis, build_moment_matrix};

    fn chsh_dual() -> DualSdp {
        let basis = build_basis(Scenario::new(2, 2).unwrap(), 1).unwrap();
        let mm = build_moment_matrix(&basis);
        dualize(assemble_primal(&chsh(), &mm).unwrap())
    }

    fn small_random_dual(seed: u64) -> DualSdp {
        let f = crate::bell::random_rxx22(3, seed).unwrap();
        let basis = build_basis(f.scenario(), 2).unwrap();
        let mm = build_moment_matrix(&basis);
        dualize(assemble_primal(&f, &mm).unwrap())
    }

    fn seeded_vector(m: usize, seed: u64) -> DVector<f64> {
        use rand_core::{RngCore, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
        DVector::from_fn(m, |_, _| {
            2.0 * ((rng.next_u64() >> 11) as f64 * 2f64.powi(-53)) - 1.0
        })
    }

    #[test]
    fn dualize_preserves_dimensions() {
        let d = chsh_dual();
        assert_eq!(d.n(), 5);
        assert_eq!(d.m(), 5);
    }

    #[test]
    fn slack_at_zero_is_minus_objective() {
        let d = chsh_dual();
        let z = d.slack(&DVector::zeros(d.m())).unwrap();
        assert_eq!(z, -d.objective().clone());
    }

    #[test]
    fn slack_with_zero_objective_picks_out_constraint() {
        let zero = BellFunctional::zero(Scenario::new(2, 2).unwrap());
        let mm = build_moment_matrix(&build_basis(zero.scenario(), 1).unwrap());
        let d = dualize(assemble_primal(&zero, &mm).unwrap());
        for j in 0..d.m() {
            let mut y = DVector::zeros(d.m());
            y[j] = 1.0;
            let z = d.slack(&y).unwrap();
            assert_eq!(z, d.constraints()[j].to_dense());
        }
    }

    #[test]
    fn slack_is_affine() {
        let d = small_random_dual(3);
        let y1 = seeded_vector(d.m(), 10);
        let y2 = seeded_vector(d.m(), 11);
        let lhs = d.slack(&(&y1 + &y2)).unwrap();
        let rhs = d.slack(&y1).unwrap() + d.slack(&y2).unwrap() + d.objective();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn slack_rejects_wrong_length() {
        let d = chsh_dual();
        assert!(d.slack(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn recover_round_trips_slack() {
        for seed in 0..5 {
            let d = small_random_dual(seed);
            let y = seeded_vector(d.m(), 100 + seed);
            let z = d.slack(&y).unwrap();
            let back = d.recover_y(&z).unwrap();
            let rel = (&back - &y).norm() / (1.0 + y.norm());
            assert!(rel < 1e-12, "seed {seed}: relative error {rel}");
        }
    }

    #[test]
    fn recover_of_minus_objective_is_zero() {
        let d = chsh_dual();
        let y = d.recover_y(&(-d.objective().clone())).unwrap();
        assert!(y.norm() < 1e-12);
    }

    #[test]
    fn identity_shift_costs_n_epsilon() {
        // The identity lies in the span of the n unit diagonal constraints
        // (each with b_i = 1), so W = Z(y) + ε·I recovers to a vector whose
        // objective is b·y + n·ε.
        let d = small_random_dual(7);
        let y = seeded_vector(d.m(), 42);
        let eps = 0.37;
        let shifted = d.slack(&y).unwrap() + DMatrix::identity(d.n(), d.n()) * eps;
        let recovered = d.recover_y(&shifted).unwrap();
        let raw = d.objective_value(&recovered);
        let expected = d.objective_value(&y) + d.n() as f64 * eps;
        assert!((raw - expected).abs() < 1e-9 * (1.0 + expected.abs()));
    }

    #[test]
    fn certify_exactly_feasible_point() {
        // diag(y) − C with C = 0 is PSD for y ≥ 0, so the certificate must
        // not shift.
        let zero = BellFunctional::zero(Scenario::new(2, 2).unwrap());
        let mm = build_moment_matrix(&build_basis(zero.scenario(), 1).unwrap());
        let d = dualize(assemble_primal(&zero, &mm).unwrap());
        let y = DVector::from_element(d.m(), 1.0);
        let cert = d.certify(&y).unwrap();
        assert_eq!(cert.certified_bound, cert.raw_bound);
        assert!(cert.min_eigenvalue >= 0.0);
    }

    #[test]
    fn certify_shift_formula() {
        let d = chsh_dual();
        let y = DVector::zeros(d.m());
        // Z(0) = −C has a negative eigenvalue for CHSH.
        let cert = d.certify(&y).unwrap();
        assert!(cert.min_eigenvalue < 0.0);
        let expected = cert.raw_bound + d.n() as f64 * (-cert.min_eigenvalue);
        assert!((cert.certified_bound - expected).abs() < 1e-14);
        assert!(cert.certified_bound >= cert.raw_bound);
    }
}
