//! Nearest-point maps onto the PSD cone and the dual affine family, plus the
//! plain alternating-projection loop and Dykstra's algorithm (used as a
//! small-instance oracle: unlike plain alternation it converges to the
//! nearest intersection point).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gram::GramSolver;
use crate::par;
use crate::sdp::DualSdp;

/// Result of projecting a symmetric matrix onto the PSD cone.
#[derive(Debug, Clone)]
pub struct PsdProjection {
    /// Frobenius-nearest PSD matrix.
    pub matrix: DMatrix<f64>,
    /// Frobenius distance ‖W − matrix‖ = √(Σ min(λ_i, 0)²).
    pub distance: f64,
    /// Smallest eigenvalue of the input.
    pub min_eigenvalue: f64,
}

/// Projects a symmetric matrix onto the PSD cone by eigenvalue clipping:
/// W = Σ λ_i v_i v_iᵀ ↦ Σ max(λ_i, 0) v_i v_iᵀ.
pub fn project_psd(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(psd_projection(w)?.matrix)
}

/// PSD projection together with the distance and the minimum eigenvalue
/// (one eigendecomposition for all three).
pub fn psd_projection(w: &DMatrix<f64>) -> Result<PsdProjection> {
    check_symmetric_input(w)?;
    let n = w.nrows();
    let eig = w.clone().symmetric_eigen();
    let mut dist2 = 0.0;
    let mut min_eigenvalue = f64::INFINITY;
    let mut clipped = 0usize;
    for &l in eig.eigenvalues.iter() {
        min_eigenvalue = min_eigenvalue.min(l);
        if l < 0.0 {
            dist2 += l * l;
            clipped += 1;
        }
    }
    if clipped == 0 {
        // Already PSD: the projection is the input itself, exactly.
        return Ok(PsdProjection {
            matrix: w.clone(),
            distance: 0.0,
            min_eigenvalue,
        });
    }

    // Reconstruct Σ_{λ>0} λ v vᵀ as B Bᵀ with B = V₊ √Λ₊, row-parallel.
    let positive: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    let p = positive.len();
    let mut b = DMatrix::<f64>::zeros(n, p);
    for (col, &k) in positive.iter().enumerate() {
        let scale = eig.eigenvalues[k].sqrt();
        for i in 0..n {
            b[(i, col)] = eig.eigenvectors[(i, k)] * scale;
        }
    }
    let rows: Vec<Vec<f64>> = par::map_range(n, |i| {
        (i..n)
            .map(|j| {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += b[(i, k)] * b[(j, k)];
                }
                acc
            })
            .collect()
    });
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(PsdProjection {
        matrix,
        distance: dist2.sqrt(),
        min_eigenvalue,
    })
}

/// Frobenius distance to the PSD cone (eigenvalues only, no reconstruction).
pub fn dist_psd(w: &DMatrix<f64>) -> Result<f64> {
    check_symmetric_input(w)?;
    let evs = w.symmetric_eigenvalues();
    Ok(evs.iter().map(|&l| l.min(0.0) * l.min(0.0)).sum::<f64>().sqrt())
}

fn check_symmetric_input(w: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != w.ncols() {
        return Err(Error::Dimension("PSD projection needs a square matrix".into()));
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("matrix entry in PSD projection".into()));
    }
    Ok(())
}

/// Which linear-solve path the affine projection uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AffineSolveMode {
    /// Cached direct factorization of the Gram matrix (the default).
    #[default]
    Direct,
    /// Warm-started BiCGSTAB on the normal equations, falling back to the
    /// direct factorization if it does not converge.
    Iterative,
}

/// Path actually taken by one affine projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffinePath {
    Direct,
    Iterative,
    /// The iterative solver did not converge; the cached factorization
    /// produced the result.
    IterativeFallback,
}

/// One affine projection: the nearest family member, its dual vector, and
/// which solve path produced it.
#[derive(Debug, Clone)]
pub struct AffineProjection {
    pub matrix: DMatrix<f64>,
    pub y: DVector<f64>,
    pub path: AffinePath,
}

/// The affine family {Z(y) = Σ y_i A_i − C} of a dual SDP, with the Gram
/// factorization of the constraint system prepared once. Immutable after
/// construction and cheap to share across threads.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    dual: DualSdp,
    gram: Arc<GramSolver>,
    mode: AffineSolveMode,
    iter_rel_tol: f64,
    iter_max: usize,
}

impl AffineFamily {
    /// Prepares the family with the direct solve path.
    pub fn prepare(dual: &DualSdp) -> Result<Self> {
        Self::prepare_with_mode(dual, AffineSolveMode::Direct)
    }

    pub fn prepare_with_mode(dual: &DualSdp, mode: AffineSolveMode) -> Result<Self> {
        let gram = dual.gram()?;
        let iter_max = (2 * gram.m()).max(100);
        Ok(Self {
            dual: dual.clone(),
            gram,
            mode,
            iter_rel_tol: 1e-13,
            iter_max,
        })
    }

    pub fn dual(&self) -> &DualSdp {
        &self.dual
    }

    pub fn mode(&self) -> AffineSolveMode {
        self.mode
    }

    /// Orthogonal (Frobenius) projection of `w` onto the family.
    pub fn project(&self, w: &DMatrix<f64>) -> Result<AffineProjection> {
        self.project_warm(w, None)
    }

    /// Projection with a warm start for the iterative path (the dual vector
    /// of the point being projected, when the caller tracks it).
    pub fn project_warm(
        &self,
        w: &DMatrix<f64>,
        warm: Option<&DVector<f64>>,
    ) -> Result<AffineProjection> {
        let n = self.dual.n();
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::Dimension("matrix side differs from the family".into()));
        }
        // Normal equations: G y = t with t_i = ⟨A_i, W + C⟩.
        let target = w + self.dual.objective();
        let mut t = DVector::zeros(self.dual.m());
        for (i, a) in self.dual.constraints().iter().enumerate() {
            t[i] = a.frob_inner(&target);
        }
        let (y, path) = match self.mode {
            AffineSolveMode::Direct => (self.gram.solve(&t), AffinePath::Direct),
            AffineSolveMode::Iterative => {
                let (y, converged) = self.gram.bicgstab(&t, warm, self.iter_rel_tol, self.iter_max);
                if converged {
                    (y, AffinePath::Iterative)
                } else {
                    (self.gram.solve(&t), AffinePath::IterativeFallback)
                }
            }
        };
        let matrix = self.dual.slack(&y)?;
        Ok(AffineProjection { matrix, y, path })
    }
}

/// Outcome of the plain alternating-projection loop.
#[derive(Debug, Clone)]
pub struct AlternationOutcome {
    /// Final affine-family point.
    pub point: DMatrix<f64>,
    /// Its dual vector.
    pub y: DVector<f64>,
    /// Alternation rounds performed.
    pub iterations: usize,
    pub converged: bool,
    /// dist_psd before each round plus the final value; non-increasing (Fejér).
    pub dist_history: Vec<f64>,
}

/// Plain alternating projections Z ← P_affine(P_psd(Z)) from a family member
/// until dist_psd(Z) ≤ tol or `max_iter` rounds (non-convergence is a flag,
/// not an error).
pub fn alternate_project(
    fam: &AffineFamily,
    start: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<AlternationOutcome> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut point = start.clone();
    let mut y = fam.dual().recover_y(&point)?;
    let mut dist_history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let proj = psd_projection(&point)?;
        dist_history.push(proj.distance);
        if let [.., prev, last] = dist_history[..] {
            debug_assert!(
                last <= prev * (1.0 + 1e-9) + 1e-12,
                "alternation distance increased: {prev} -> {last}"
            );
        }
        if proj.distance <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        let aff = fam.project_warm(&proj.matrix, Some(&y))?;
        point = aff.matrix;
        y = aff.y;
        iterations += 1;
    }
    Ok(AlternationOutcome {
        point,
        y,
        iterations,
        converged,
        dist_history,
    })
}

/// Outcome of Dykstra's projection algorithm.
#[derive(Debug, Clone)]
pub struct DykstraOutcome {
    pub point: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Dykstra's correction-variable iteration between the PSD cone and the
/// affine family; converges to the intersection point nearest to `w`.
pub fn dykstra_project(
    fam: &AffineFamily,
    w: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DykstraOutcome> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = fam.dual().n();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Dimension("matrix side differs from the family".into()));
    }
    let mut x = w.clone();
    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut warm: Option<DVector<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let psd = psd_projection(&(&x + &p))?.matrix;
        p = &x + &p - &psd;
        let aff = fam.project_warm(&(&psd + &q), warm.as_ref())?;
        q = &psd + &q - &aff.matrix;
        x = aff.matrix;
        warm = Some(aff.y);
        iterations += 1;
        if dist_psd(&x)? <= tol {
            converged = true;
            break;
        }
    }
    Ok(DykstraOutcome {
        point: x,
        iterations,
        converged,
    })
}
