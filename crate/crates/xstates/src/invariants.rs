//! Invariant function chains on the truncated coordinates.
//!
//! Every edge block `M` of a truncated point carries four left-rotation
//! invariants: the determinant `delta`, half the trace of `M^T M`, and the
//! entries `(a, b)` of the traceless symmetric part of `M^T M`. They
//! satisfy a single relation `delta^2 = t^2 - a^2 - b^2`, and over the
//! locus `delta != 0` they cut out a torsor: the rotation carrying one
//! matrix to another with equal invariants is unique and recoverable.
//!
//! Diagonalizing the residual rotation action on `(a, b)` leads to the
//! null-basis components `w± = (a ∓ ib)/2` and the pairings
//! `u[j][k] = 4 w_j^+ w_k^-`, whose diagonal and loop products reduce to
//! polynomials in `t` and `delta`. Splitting `u` into its symmetric and
//! antisymmetric parts in the basepoint row gives `s_j`, `v_j`, and the
//! final change of variables multiplies in longitudinal coefficients to
//! absorb all residual reflection signs:
//!
//! ```text
//! t~_k   = t_k                      k = 1 .. n-1
//! d~_k   = alpha_k alpha_n delta_k  k = 1 .. n-1
//! s~_j   = s_j                      j = 2 .. n-1
//! v~_j   = alpha_n v_j              j = 2 .. n-1
//! eta_1  = alpha_1^2,   eta_n = alpha_n^2
//! ```
//!
//! These `4n - 4` functions are invariant under the full normalizer of the
//! longitudinal system (rotations and reflections on every transversal
//! plane) and are algebraically independent; the discarded squares
//! `alpha_j^2` for interior `j` are recovered by the rational formula in
//! [`eta_reconstruct`]. For two qubits the five classical polynomial
//! invariants [`p_invariants`] separate generic orbits outright.

use nalgebra::{DMatrix, Matrix2};

use crate::bloch::{c64, scalar_product, BlochState, C64, ONE};
use crate::error::{Error, Result};
use crate::geometry::XTPoint;
use crate::group::{ortho_residual2, ORTHO_TOL};

/// The four left-rotation invariants of a 2x2 block and their relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxInvariants {
    pub delta: C64,
    pub t: C64,
    pub a: C64,
    pub b: C64,
}

impl AuxInvariants {
    /// Scale-normalized residual of `delta^2 - t^2 + a^2 + b^2`.
    pub fn relation_residual(&self) -> f64 {
        let terms = [
            self.delta * self.delta,
            self.t * self.t,
            self.a * self.a,
            self.b * self.b,
        ];
        let scale = 1.0 + terms.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (terms[0] - terms[1] + terms[2] + terms[3]).norm() / scale
    }
}

/// Invariants of `M` under rotations acting from the left:
/// `delta = det M`, `t = tr(M^T M)/2`, and `M^T M - tI = [[a, b], [b, -a]]`.
pub fn aux_dtab(m: &Matrix2<C64>) -> AuxInvariants {
    let delta = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let mtm = m.transpose() * m;
    let t = (mtm[(0, 0)] + mtm[(1, 1)]) * c64(0.5, 0.0);
    AuxInvariants {
        delta,
        t,
        a: mtm[(0, 0)] - t,
        b: mtm[(0, 1)],
    }
}

/// Recovers the unique rotation with `g M = M'`, given that both matrices
/// carry the same invariants (checked to `tol`, scale-normalized) and `M`
/// is nondegenerate (`|det M| > tol`).
pub fn torsor_recover(m: &Matrix2<C64>, m_prime: &Matrix2<C64>, tol: f64) -> Result<Matrix2<C64>> {
    let inv_m = aux_dtab(m);
    let inv_p = aux_dtab(m_prime);
    let scale = 1.0
        + [inv_m.delta, inv_m.t, inv_m.a, inv_m.b]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
    let disagree = [
        (inv_m.delta - inv_p.delta).norm(),
        (inv_m.t - inv_p.t).norm(),
        (inv_m.a - inv_p.a).norm(),
        (inv_m.b - inv_p.b).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if disagree > tol * scale {
        return Err(Error::NotSameOrbit);
    }
    if inv_m.delta.norm() <= tol {
        return Err(Error::Degenerate(format!(
            "|det M| = {:.3e} below tolerance",
            inv_m.delta.norm()
        )));
    }
    let m_inv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / inv_m.delta;
    let g = m_prime * m_inv;
    let res = ortho_residual2(&g);
    let det_err = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)] - ONE).norm();
    if res > 1e-8 || det_err > 1e-8 {
        return Err(Error::NotSameOrbit);
    }
    Ok(g)
}

/// Null-basis components of `(a, b)`: returns `(w_minus, w_plus)` with
/// `w- = (a + ib)/2` and `w+ = (a - ib)/2`, so `4 w- w+ = a^2 + b^2`.
pub fn wpm(a: C64, b: C64) -> (C64, C64) {
    let ib = c64(0.0, 1.0) * b;
    ((a + ib) * c64(0.5, 0.0), (a - ib) * c64(0.5, 0.0))
}

/// The pairing matrix `u[j][k] = 4 w_j^+ w_k^-` over the edge invariants.
/// Its diagonal satisfies `u[k][k] = t_k^2 - delta_k^2` and every loop
/// product collapses to the product of `t^2 - delta^2` over the loop's
/// vertices.
pub fn u_matrix(aux: &[AuxInvariants]) -> DMatrix<C64> {
    let w: Vec<(C64, C64)> = aux.iter().map(|i| wpm(i.a, i.b)).collect();
    DMatrix::from_fn(aux.len(), aux.len(), |j, k| {
        c64(4.0, 0.0) * w[j].1 * w[k].0
    })
}

/// The `4n - 4` normalizer-invariant coordinates of a truncated point.
///
/// Indexing: `t_tilde[k]` and `delta_tilde[k]` run over edges
/// `k = 0 .. n-2` (edge `k` joins qubit `k+1` to the center in 1-based
/// terms); `s_tilde[i]` and `v_tilde[i]` run over the non-basepoint edges
/// `j = i + 2` in 1-based terms.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientCoords {
    pub t_tilde: Vec<C64>,
    pub delta_tilde: Vec<C64>,
    pub s_tilde: Vec<C64>,
    pub v_tilde: Vec<C64>,
    pub eta_1: C64,
    pub eta_n: C64,
}

impl QuotientCoords {
    pub fn count(&self) -> usize {
        self.t_tilde.len() + self.delta_tilde.len() + self.s_tilde.len() + self.v_tilde.len() + 2
    }

    /// Canonical flattening (t~, d~, s~, v~, eta_1, eta_n).
    pub fn as_vec(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.count());
        out.extend(&self.t_tilde);
        out.extend(&self.delta_tilde);
        out.extend(&self.s_tilde);
        out.extend(&self.v_tilde);
        out.push(self.eta_1);
        out.push(self.eta_n);
        out
    }

    /// Componentwise max distance, scale-normalized by the larger entry.
    pub fn max_relative_difference(&self, other: &QuotientCoords) -> f64 {
        self.as_vec()
            .iter()
            .zip(other.as_vec().iter())
            .map(|(x, y)| (x - y).norm() / (1.0 + x.norm().max(y.norm())))
            .fold(0.0, f64::max)
    }
}

/// Per-edge invariants of a truncated point.
pub fn edge_invariants(p: &XTPoint) -> Vec<AuxInvariants> {
    p.blocks().iter().map(aux_dtab).collect()
}

/// Evaluates the full invariant chain at a truncated point. All outputs
/// are polynomial, so no localization is required here.
pub fn quotient_coords(p: &XTPoint) -> QuotientCoords {
    let n = p.n();
    let aux = edge_invariants(p);
    let u = u_matrix(&aux);
    let alpha_1 = p.alpha(0);
    let alpha_n = p.alpha(n - 1);

    let t_tilde = aux.iter().map(|i| i.t).collect();
    let delta_tilde = aux
        .iter()
        .enumerate()
        .map(|(k, i)| p.alpha(k) * alpha_n * i.delta)
        .collect();

    let mut s_tilde = Vec::with_capacity(n.saturating_sub(2));
    let mut v_tilde = Vec::with_capacity(n.saturating_sub(2));
    for j in 1..n - 1 {
        let s_j = (u[(0, j)] + u[(j, 0)]) * c64(0.5, 0.0);
        let v_j = (u[(0, j)] - u[(j, 0)]) / c64(0.0, 2.0);
        s_tilde.push(s_j);
        v_tilde.push(alpha_n * v_j);
    }

    QuotientCoords {
        t_tilde,
        delta_tilde,
        s_tilde,
        v_tilde,
        eta_1: alpha_1 * alpha_1,
        eta_n: alpha_n * alpha_n,
    }
}

/// The relation `rho_j = s_j^2 + v_j^2 - (t_j^2 - delta_j^2)(t_1^2 - delta_1^2)`
/// from raw chain values; vanishes identically on points of the chain.
pub fn rho_from_parts(s_j: C64, v_j: C64, aux_j: &AuxInvariants, aux_1: &AuxInvariants) -> C64 {
    s_j * s_j + v_j * v_j
        - (aux_j.t * aux_j.t - aux_j.delta * aux_j.delta)
            * (aux_1.t * aux_1.t - aux_1.delta * aux_1.delta)
}

/// Evaluates `rho_j` through the chain at a truncated point, for a
/// non-basepoint edge index `2 <= j <= n-1` (1-based).
pub fn relation_rho(p: &XTPoint, j: usize) -> Result<C64> {
    let n = p.n();
    if !(2..=n - 1).contains(&j) {
        return Err(Error::InvalidArgument(format!(
            "edge index {j} out of range 2..={}",
            n - 1
        )));
    }
    let aux = edge_invariants(p);
    let u = u_matrix(&aux);
    let s_j = (u[(0, j - 1)] + u[(j - 1, 0)]) * c64(0.5, 0.0);
    let v_j = (u[(0, j - 1)] - u[(j - 1, 0)]) / c64(0.0, 2.0);
    Ok(rho_from_parts(s_j, v_j, &aux[j - 1], &aux[0]))
}

/// Recovers the discarded longitudinal square `eta_j = alpha_j^2` for an
/// interior qubit `2 <= j <= n-1` (1-based) from the invariant coordinates:
///
/// ```text
///            d~_j^2 (t~_1^2 eta_1 eta_n - d~_1^2)
/// eta_j = ------------------------------------------------------------
///         eta_n [ t~_j^2 (t~_1^2 eta_1 eta_n - d~_1^2)
///                 - eta_1 (s~_j^2 eta_n + v~_j^2) ]
/// ```
///
/// Fails with `LocalizationViolated` when the denominator is numerically
/// zero (scale-normalized threshold `1e-12`).
pub fn eta_reconstruct(q: &QuotientCoords, j: usize) -> Result<C64> {
    let n = q.t_tilde.len() + 1;
    if !(2..=n - 1).contains(&j) {
        return Err(Error::InvalidArgument(format!(
            "interior qubit index {j} out of range 2..={}",
            n - 1
        )));
    }
    let d1 = q.delta_tilde[0];
    let t1 = q.t_tilde[0];
    let dj = q.delta_tilde[j - 1];
    let tj = q.t_tilde[j - 1];
    let sj = q.s_tilde[j - 2];
    let vj = q.v_tilde[j - 2];

    let k_factor = t1 * t1 * q.eta_1 * q.eta_n - d1 * d1;
    let term_a = tj * tj * k_factor;
    let term_b = q.eta_1 * (sj * sj * q.eta_n + vj * vj);
    let den = q.eta_n * (term_a - term_b);
    let scale = 1.0
        + [term_a.norm(), term_b.norm(), q.eta_n.norm()]
            .into_iter()
            .fold(0.0, f64::max);
    if den.norm() <= 1e-12 * scale {
        return Err(Error::LocalizationViolated(den.norm()));
    }
    Ok(dj * dj * k_factor / den)
}

/// The five polynomial invariants of a 2-qubit state: with `v`, `w` the
/// one-point vectors and `C` the two-point matrix (rows indexed by qubit 1),
///
/// `(  <v,v>,  <w,w>,  v^T C w,  tr(C^T C),  det C  )`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants2 {
    pub p: [C64; 5],
}

impl Invariants2 {
    pub fn max_relative_difference(&self, other: &Invariants2) -> f64 {
        self.p
            .iter()
            .zip(other.p.iter())
            .map(|(x, y)| (x - y).norm() / (1.0 + x.norm().max(y.norm())))
            .fold(0.0, f64::max)
    }
}

pub fn p_invariants(b: &BlochState) -> Result<Invariants2> {
    if b.n() != 2 {
        return Err(Error::InvalidArgument(
            "the five-invariant family is defined for 2 qubits".into(),
        ));
    }
    let v = b.one_point(0)?;
    let w = b.one_point(1)?;
    let c = b.two_point(0, 1)?;
    let p3 = (v.transpose() * c * w)[(0, 0)];
    let ctc = c.transpose() * c;
    let p4 = ctc[(0, 0)] + ctc[(1, 1)] + ctc[(2, 2)];
    Ok(Invariants2 {
        p: [
            scalar_product(&v, &v),
            scalar_product(&w, &w),
            p3,
            p4,
            c.determinant(),
        ],
    })
}

/// Left-multiplies block `M` by a planar orthogonal matrix; helper for
/// invariance tests (the residual orthogonality check is the caller's
/// responsibility).
pub fn left_multiply(g: &Matrix2<C64>, m: &Matrix2<C64>) -> Matrix2<C64> {
    debug_assert!(ortho_residual2(g) < ORTHO_TOL * 10.0);
    g * m
}
