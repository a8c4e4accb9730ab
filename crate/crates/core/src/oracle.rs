//! Search-based check of the geometric-function property for small maps.
//!
//! This is deliberately independent of the spectral decision in
//! [`crate::geometric`]: the kernel comes from Gaussian elimination, the
//! kernel complement from Gram–Schmidt, and the Conf subspace is found by
//! Levenberg–Marquardt over graphs `{u + M u : u ∈ K⊥}` of linear maps
//! `M: K⊥ → K`. With `U` a metric-orthonormal basis of `K⊥` and `N` one of
//! `K`, the candidate complement has Gram `I + MᵀM` and pulled-back range Gram
//! `S = (TU)* (TU)`; the map is geometric iff
//! `min_{M, r>0} ‖S − r(I + MᵀM)‖_F = 0`.
//!
//! A small residual certifies the property; a large one is only evidence
//! against it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{MapBetween, TolerancePolicy};

/// Maximum domain dimension accepted by the oracle.
pub const MAX_ORACLE_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub restarts: usize,
    pub iterations: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            restarts: 12,
            iterations: 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub verdict: bool,
    /// Best relative residual `‖S − r(I + MᵀM)‖_F / ‖S‖_F` found.
    pub residual: f64,
    /// Factor attaining the best residual.
    pub factor: f64,
    pub rank: usize,
}

/// Searches for a Conf subspace of `t`.
///
/// # Panics
///
/// If the domain dimension exceeds [`MAX_ORACLE_DIM`].
pub fn oracle_is_geometric<R: Rng + ?Sized>(
    t: &MapBetween,
    tol: &TolerancePolicy,
    budget: OracleBudget,
    rng: &mut R,
) -> OracleResult {
    let n = t.domain().dim();
    assert!(
        n <= MAX_ORACLE_DIM,
        "oracle is limited to domain dimension {MAX_ORACLE_DIM}, got {n}"
    );
    let gv = t.domain().gram();
    let gw = t.codomain().gram();

    let kernel = rref_kernel(t.matrix(), tol.rank_rel_tol);
    let kernel = gram_schmidt(&kernel, &DMatrix::zeros(n, 0), gv, n);
    let m = kernel.ncols();
    let k = n - m;
    if k == 0 {
        return OracleResult {
            verdict: true,
            residual: 0.0,
            factor: 1.0,
            rank: 0,
        };
    }
    let perp = gram_schmidt(&DMatrix::identity(n, n), &kernel, gv, k);

    let image = t.matrix() * &perp;
    let s = image.transpose() * gw * &image;
    let g0 = perp.transpose() * gv * &perp;
    let s_norm = s.norm();
    let problem = Problem {
        s: &s / s_norm,
        g0,
        m,
        k,
    };

    let mut best = problem.evaluate(&DMatrix::zeros(m, k));
    let stop = tol.residual_tol * 1e-3;
    if m > 0 && best.0 > stop {
        // Magnitude of MᵀM ≈ S/r − I is governed by the spread of S.
        let eig = problem.s.clone().symmetric_eigenvalues();
        let spread = (eig.max() / eig.min().max(1e-300)).sqrt().min(1e6);
        for restart in 0..budget.restarts.max(1) {
            let start = if restart == 0 {
                DMatrix::zeros(m, k)
            } else {
                let amp = spread * 10f64.powf(rng.gen_range(-1.0..1.0));
                DMatrix::from_fn(m, k, |_, _| rng.gen_range(-amp..amp))
            };
            let found = problem.refine(start, budget.iterations, stop);
            if found.0 < best.0 {
                best = found;
            }
            if best.0 <= stop {
                break;
            }
        }
    }
    let (residual, factor) = best;
    OracleResult {
        verdict: residual < tol.residual_tol,
        residual,
        factor: factor * s_norm,
        rank: k,
    }
}

struct Problem {
    s: DMatrix<f64>,
    g0: DMatrix<f64>,
    m: usize,
    k: usize,
}

impl Problem {
    fn complement_gram(&self, mm: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g0 + mm.transpose() * mm
    }

    fn best_factor(&self, b: &DMatrix<f64>) -> f64 {
        (self.s.dot(b) / b.dot(b)).max(f64::MIN_POSITIVE)
    }

    /// Residual norm and factor at `mm` with `r` chosen optimally.
    fn evaluate(&self, mm: &DMatrix<f64>) -> (f64, f64) {
        let b = self.complement_gram(mm);
        let r = self.best_factor(&b);
        ((&self.s - b * r).norm(), r)
    }

    fn residual_vec(&self, mm: &DMatrix<f64>, r: f64) -> DVector<f64> {
        let e = &self.s - self.complement_gram(mm) * r;
        upper_entries(&e)
    }

    /// Jacobian of the residual vector w.r.t. (vec(M), r).
    fn jacobian(&self, mm: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
        let nres = self.k * (self.k + 1) / 2;
        let np = self.m * self.k + 1;
        let mut jac = DMatrix::zeros(nres, np);
        for a in 0..self.m {
            for b in 0..self.k {
                // d(MᵀM)/dM_ab = E_abᵀ M + Mᵀ E_ab
                let mut d = DMatrix::zeros(self.k, self.k);
                for j in 0..self.k {
                    d[(b, j)] += mm[(a, j)];
                    d[(j, b)] += mm[(a, j)];
                }
                jac.set_column(a * self.k + b, &(upper_entries(&d) * -r));
            }
        }
        jac.set_column(np - 1, &(-upper_entries(&self.complement_gram(mm))));
        jac
    }

    fn refine(&self, mut mm: DMatrix<f64>, iterations: usize, stop: f64) -> (f64, f64) {
        let mut r = self.best_factor(&self.complement_gram(&mm));
        let mut err = self.residual_vec(&mm, r);
        let mut cost = err.norm();
        let mut damping = 1e-3;
        let np = self.m * self.k + 1;
        for _ in 0..iterations {
            if cost <= stop {
                break;
            }
            let jac = self.jacobian(&mm, r);
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * &err;
            let mut lhs = jtj.clone();
            for i in 0..np {
                lhs[(i, i)] += damping * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = lhs.lu().solve(&(-grad)) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = mm.clone();
            for a in 0..self.m {
                for b in 0..self.k {
                    trial[(a, b)] += step[a * self.k + b];
                }
            }
            let trial_r = (r + step[np - 1]).max(f64::MIN_POSITIVE);
            let trial_err = self.residual_vec(&trial, trial_r);
            let trial_cost = trial_err.norm();
            if trial_cost < cost {
                let improvement = cost - trial_cost;
                mm = trial;
                r = trial_r;
                err = trial_err;
                cost = trial_cost;
                damping = (damping / 3.0).max(1e-12);
                if improvement < 1e-14 * cost && damping <= 1e-9 {
                    break;
                }
            } else {
                damping *= 4.0;
                if damping > 1e12 {
                    break;
                }
            }
        }
        let projected = self.evaluate(&mm);
        if projected.0 < cost {
            projected
        } else {
            (cost, r)
        }
    }
}

/// Upper-triangular entries with off-diagonals weighted by √2, so the
/// Euclidean norm equals the Frobenius norm of a symmetric matrix.
fn upper_entries(e: &DMatrix<f64>) -> DVector<f64> {
    let k = e.nrows();
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        out.push(e[(i, i)]);
        for j in (i + 1)..k {
            out.push(std::f64::consts::SQRT_2 * 0.5 * (e[(i, j)] + e[(j, i)]));
        }
    }
    DVector::from_vec(out)
}

/// Kernel basis from reduced row echelon form with partial pivoting.
fn rref_kernel(matrix: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let mut a = matrix.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax();
    let eps = rel_tol * scale.max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let (p, pv) = (row..rows)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv <= eps {
            continue;
        }
        a.swap_rows(row, p);
        let piv = a[(row, col)];
        for j in 0..cols {
            a[(row, j)] /= piv;
        }
        for r in 0..rows {
            if r != row {
                let f = a[(r, col)];
                if f != 0.0 {
                    for j in 0..cols {
                        a[(r, j)] -= f * a[(row, j)];
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut kernel = DMatrix::zeros(cols, free.len());
    for (idx, &f) in free.iter().enumerate() {
        kernel[(f, idx)] = 1.0;
        for (r, &p) in pivots.iter().enumerate() {
            kernel[(p, idx)] = -a[(r, f)];
        }
    }
    kernel
}

/// Metric Gram–Schmidt: orthonormalizes candidate columns against `against`
/// (assumed orthonormal) and each other, keeping at most `want` vectors.
fn gram_schmidt(
    candidates: &DMatrix<f64>,
    against: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    want: usize,
) -> DMatrix<f64> {
    let n = candidates.nrows();
    let mut kept: Vec<DVector<f64>> = against.column_iter().map(|c| c.into_owned()).collect();
    let skip = kept.len();
    for cand in candidates.column_iter() {
        if kept.len() - skip == want {
            break;
        }
        let mut v = cand.into_owned();
        let before = (v.transpose() * gram * &v)[(0, 0)].sqrt();
        // two passes for stability
        for _ in 0..2 {
            for q in &kept {
                let c = (q.transpose() * gram * &v)[(0, 0)];
                v -= q * c;
            }
        }
        let norm = (v.transpose() * gram * &v)[(0, 0)].max(0.0).sqrt();
        if norm > 1e-8 * before.max(f64::MIN_POSITIVE) {
            kept.push(v / norm);
        }
    }
    let out = &kept[skip..];
    DMatrix::from_fn(n, out.len(), |i, j| out[j][i])
}
