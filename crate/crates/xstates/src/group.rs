//! The local symmetry group and its action on Bloch states.
//!
//! Conjugating a state by an invertible operator on one qubit rotates that
//! qubit's Pauli coordinates by a complex special-orthogonal 3x3 matrix, and
//! every such rotation arises this way. The full local symmetry group is
//! therefore the product of one copy of `SO_3(C)` per qubit, acting
//! componentwise on correlation tensors. This module provides:
//!
//! * [`LocalRotation`] — a group element, with [`LocalRotation::act`];
//! * [`from_sl2`] — the conjugation homomorphism from per-qubit 2x2
//!   matrices (scalars act trivially);
//! * [`LieTangent`] and the infinitesimal action, the derivative of `act`
//!   at the identity, used for orbit-dimension checks;
//! * the explicit isomorphism between `SO_2(C)` and the multiplicative
//!   group of nonzero scalars ([`so2_from_gm`] / [`gm_from_so2`]);
//! * [`WeylElement`] — per-qubit transversal-plane orthogonal matrices,
//!   the normalizer of a fixed longitudinal system, embedding into the
//!   group by placing the planar determinant in the longitudinal slot.
//!
//! Complex orthogonal groups are not compact, so random sampling draws
//! bounded antisymmetric matrices (default scale 0.7) and exponentiates;
//! this keeps the condition numbers of sampled elements small enough for
//! the crate's 1e-9 orthogonality tolerances.

use nalgebra::{Matrix2, Matrix3};

use crate::bloch::{BlochState, C64, PauliLetter, c64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Absolute residual below which a matrix counts as orthogonal.
pub const ORTHO_TOL: f64 = 1e-9;

/// Max-norm of `g^T g - I` (plain transpose; the form is bilinear).
pub fn ortho_residual3(g: &Matrix3<C64>) -> f64 {
    let r = g.transpose() * g - Matrix3::identity();
    r.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn ortho_residual2(a: &Matrix2<C64>) -> f64 {
    let r = a.transpose() * a - Matrix2::identity();
    r.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Scaling-and-squaring Taylor exponential for 3x3 complex matrices.
pub(crate) fn mat_exp3(x: &Matrix3<C64>) -> Matrix3<C64> {
    let norm = x.iter().map(|z| z.norm()).fold(0.0, f64::max) * 3.0;
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = x / c64(2f64.powi(squarings as i32), 0.0);
    let mut term = Matrix3::<C64>::identity();
    let mut sum = Matrix3::<C64>::identity();
    for k in 1..=24 {
        term = (term * scaled) / c64(k as f64, 0.0);
        sum += term;
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = out * out;
    }
    out
}

/// An element of the local symmetry group: one complex special-orthogonal
/// 3x3 block per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRotation {
    blocks: Vec<Matrix3<C64>>,
}

impl LocalRotation {
    /// Validates `g^T g = I` and `det g = 1` on every block to `1e-9`.
    pub fn new(blocks: Vec<Matrix3<C64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("need at least one block".into()));
        }
        for (i, g) in blocks.iter().enumerate() {
            let ortho = ortho_residual3(g);
            if ortho > ORTHO_TOL {
                return Err(Error::InvalidArgument(format!(
                    "block {i} is not orthogonal (residual {ortho:.3e})"
                )));
            }
            let det_err = (g.determinant() - ONE).norm();
            if det_err > ORTHO_TOL {
                return Err(Error::InvalidArgument(format!(
                    "block {i} has determinant off by {det_err:.3e}"
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            blocks: vec![Matrix3::identity(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &Matrix3<C64> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Matrix3<C64>] {
        &self.blocks
    }

    /// Blockwise product `self * other`.
    pub fn compose(&self, other: &LocalRotation) -> Result<LocalRotation> {
        if self.n() != other.n() {
            return Err(Error::InvalidArgument("qubit counts differ".into()));
        }
        Ok(LocalRotation {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// Blockwise inverse; for orthogonal blocks this is the transpose.
    pub fn inverse(&self) -> LocalRotation {
        LocalRotation {
            blocks: self.blocks.iter().map(|g| g.transpose()).collect(),
        }
    }

    /// Act componentwise on the correlation tensors of `b`: the tensor over
    /// a qubit set is transformed by the corresponding blocks on its axes.
    /// The support of each word is preserved.
    pub fn act(&self, b: &BlochState) -> Result<BlochState> {
        if self.n() != b.n() {
            return Err(Error::InvalidArgument(format!(
                "rotation on {} qubits applied to a {}-qubit state",
                self.n(),
                b.n()
            )));
        }
        let mut out = BlochState::new(b.n())?;
        let mut acc: Vec<(crate::bloch::PauliWord, C64)> = Vec::new();
        for (word, coeff) in b.components() {
            let support = word.support();
            // Spread word -> sum over replacement letters on each axis.
            acc.clear();
            acc.push((word.clone(), *coeff));
            for &pos in &support {
                let g = &self.blocks[pos];
                let mut next = Vec::with_capacity(acc.len() * 3);
                for (w, v) in acc.drain(..) {
                    let src = w.letter(pos).axis().expect("support letter");
                    for dst in 0..3 {
                        let factor = g[(dst, src)];
                        if factor != ZERO {
                            next.push((w.with_letter(pos, PauliLetter::from_axis(dst)), v * factor));
                        }
                    }
                }
                acc = next;
            }
            for (w, v) in acc.drain(..) {
                let prev = out.component(&w);
                let s = prev + v;
                out.insert(w, s)?;
            }
        }
        Ok(out)
    }
}

/// Builds the rotation blocks of per-qubit conjugation `A -> M A M^-1`
/// restricted to traceless matrices, in Pauli coordinates. Scalar multiples
/// of the identity are in the kernel, so only the line through each matrix
/// matters.
pub fn from_sl2(mats: &[Matrix2<C64>]) -> Result<LocalRotation> {
    if mats.is_empty() {
        return Err(Error::InvalidArgument("need at least one matrix".into()));
    }
    let mut blocks = Vec::with_capacity(mats.len());
    for (i, m) in mats.iter().enumerate() {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        if det.norm() <= 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "matrix {i} is singular (|det| = {:.3e})",
                det.norm()
            )));
        }
        let inv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det;
        let mut block = Matrix3::from_element(ZERO);
        for (src, letter) in [PauliLetter::X, PauliLetter::Y, PauliLetter::Z]
            .into_iter()
            .enumerate()
        {
            let conj = m * letter.matrix() * inv;
            for (dst, out_letter) in [PauliLetter::X, PauliLetter::Y, PauliLetter::Z]
                .into_iter()
                .enumerate()
            {
                block[(dst, src)] = crate::bloch::half_trace_product(&out_letter.matrix(), &conj);
            }
        }
        blocks.push(block);
    }
    LocalRotation::new(blocks)
}

/// A tangent vector to the group at the identity: one complex antisymmetric
/// 3x3 block per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct LieTangent {
    blocks: Vec<Matrix3<C64>>,
}

impl LieTangent {
    /// Builds blocks from 3 coordinates per qubit. The coordinate order is
    /// (rotation moving y to z, rotation moving z to x, rotation moving x
    /// to y); the last generator satisfies `J e_x = e_y`, which fixes the
    /// sign convention for the whole basis.
    pub fn from_coordinates(n: usize, coords: &[C64]) -> Result<Self> {
        if coords.len() != 3 * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                3 * n,
                coords.len()
            )));
        }
        let blocks = (0..n)
            .map(|i| {
                let (a, b, c) = (coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]);
                Matrix3::new(
                    ZERO, -c, b, //
                    c, ZERO, -a, //
                    -b, a, ZERO,
                )
            })
            .collect();
        Ok(Self { blocks })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            blocks: vec![Matrix3::from_element(ZERO); n],
        }
    }

    /// The 3n coordinate basis tangents for `n` qubits.
    pub fn basis(n: usize) -> Vec<LieTangent> {
        (0..3 * n)
            .map(|k| {
                let mut coords = vec![ZERO; 3 * n];
                coords[k] = ONE;
                Self::from_coordinates(n, &coords).expect("basis coords are well formed")
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &Matrix3<C64> {
        &self.blocks[i]
    }

    /// Blockwise exponential, landing in the group.
    pub fn exp(&self) -> LocalRotation {
        LocalRotation {
            blocks: self.blocks.iter().map(mat_exp3).collect(),
        }
    }

    /// Derivative of the action at the identity: the Leibniz sum applying
    /// each block to its axis of every correlation tensor. Matches
    /// `d/ds act(exp(sX), b)` at `s = 0`.
    pub fn apply(&self, b: &BlochState) -> Result<BlochState> {
        if self.n() != b.n() {
            return Err(Error::InvalidArgument(format!(
                "tangent on {} qubits applied to a {}-qubit state",
                self.n(),
                b.n()
            )));
        }
        let mut out = BlochState::new(b.n())?;
        for (word, coeff) in b.components() {
            for pos in word.support() {
                let x = &self.blocks[pos];
                let src = word.letter(pos).axis().expect("support letter");
                for dst in 0..3 {
                    let factor = x[(dst, src)];
                    if factor != ZERO {
                        let w = word.with_letter(pos, PauliLetter::from_axis(dst));
                        let s = out.component(&w) + *coeff * factor;
                        out.insert(w, s)?;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Random group element: per-qubit exponential of a complex antisymmetric
/// matrix with entries of standard deviation `scale`. Deterministic per
/// seed; `scale = 0` yields the identity.
pub fn random_rotation(n: usize, seed: u64, scale: f64) -> Result<LocalRotation> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument("scale must be finite and >= 0".into()));
    }
    let mut rng = SeededRng::new(seed);
    Ok(random_rotation_rng(n, &mut rng, scale))
}

pub fn random_rotation_rng(n: usize, rng: &mut SeededRng, scale: f64) -> LocalRotation {
    let coords: Vec<C64> = (0..3 * n).map(|_| rng.complex_normal(scale)).collect();
    LieTangent::from_coordinates(n, &coords)
        .expect("coordinate count matches")
        .exp()
}

/// The special-orthogonal 2x2 matrix corresponding to the nonzero scalar
/// `lambda`:
///
/// ```text
/// [ (l + 1/l)/2    (l - 1/l)/2i ]
/// [ -(l - 1/l)/2i  (l + 1/l)/2  ]
/// ```
pub fn so2_from_gm(lambda: C64) -> Result<Matrix2<C64>> {
    if lambda.norm() == 0.0 {
        return Err(Error::InvalidArgument("lambda must be nonzero".into()));
    }
    let inv = ONE / lambda;
    let a = (lambda + inv) * c64(0.5, 0.0);
    let b = (lambda - inv) / c64(0.0, 2.0);
    Ok(Matrix2::new(a, b, -b, a))
}

/// Inverse of [`so2_from_gm`]: reads `a + ib` off a special-orthogonal
/// 2x2 matrix, where `b` is the (1,2) entry.
pub fn gm_from_so2(m: &Matrix2<C64>) -> Result<C64> {
    let ortho = ortho_residual2(m);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if ortho > ORTHO_TOL || (det - ONE).norm() > ORTHO_TOL {
        return Err(Error::InvalidArgument(format!(
            "matrix is not special orthogonal (ortho {ortho:.3e}, det err {:.3e})",
            (det - ONE).norm()
        )));
    }
    Ok(m[(0, 0)] + c64(0.0, 1.0) * m[(0, 1)])
}

/// An element of the normalizer of a longitudinal system: one orthogonal
/// 2x2 matrix per qubit, acting on the transversal plane. Reflections are
/// the blocks with determinant -1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylElement {
    planar: Vec<Matrix2<C64>>,
}

impl WeylElement {
    /// Validates `A^T A = I` (to `1e-9`) on each planar block.
    pub fn new(planar: Vec<Matrix2<C64>>) -> Result<Self> {
        if planar.is_empty() {
            return Err(Error::InvalidArgument("need at least one block".into()));
        }
        for (i, a) in planar.iter().enumerate() {
            let res = ortho_residual2(a);
            if res > ORTHO_TOL {
                return Err(Error::InvalidArgument(format!(
                    "planar block {i} is not orthogonal (residual {res:.3e})"
                )));
            }
        }
        Ok(Self { planar })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            planar: vec![Matrix2::identity(); n],
        }
    }

    /// The element acting as minus the identity on every transversal plane.
    /// It is a rotation (determinant +1 per block) and acts trivially on
    /// every X-state fiber, since admissible words carry an even number of
    /// transversal letters.
    pub fn central(n: usize) -> Self {
        Self {
            planar: vec![-Matrix2::<C64>::identity(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.planar.len()
    }

    pub fn planar(&self, i: usize) -> &Matrix2<C64> {
        &self.planar[i]
    }

    pub fn planar_det(&self, i: usize) -> C64 {
        let a = &self.planar[i];
        a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]
    }
}

/// Embeds a Weyl element into the rotation group: block `i` becomes
/// `[[A_i, 0], [0, det A_i]]` in (x, y | z) coordinates. Each longitudinal
/// axis is mapped to itself as a line, with sign `det A_i`.
pub fn weyl_embed(w: &WeylElement) -> LocalRotation {
    let blocks = (0..w.n())
        .map(|i| {
            let a = w.planar(i);
            let det = w.planar_det(i);
            Matrix3::new(
                a[(0, 0)],
                a[(0, 1)],
                ZERO,
                a[(1, 0)],
                a[(1, 1)],
                ZERO,
                ZERO,
                ZERO,
                det,
            )
        })
        .collect();
    LocalRotation::new(blocks).expect("embedded Weyl blocks are special orthogonal")
}

/// Samples a normalizer element: per qubit a planar rotation
/// `so2_from_gm(exp(scale * z))` with `z` complex normal, composed with the
/// reflection `diag(1, -1)` with probability 1/2 when `with_reflection` is
/// set. Deterministic per seed; `scale = 0` without reflections yields the
/// identity.
pub fn weyl_sample(n: usize, seed: u64, scale: f64, with_reflection: bool) -> WeylElement {
    let mut rng = SeededRng::new(seed);
    weyl_sample_rng(n, &mut rng, scale, with_reflection)
}

pub fn weyl_sample_rng(
    n: usize,
    rng: &mut SeededRng,
    scale: f64,
    with_reflection: bool,
) -> WeylElement {
    let reflection = Matrix2::new(ONE, ZERO, ZERO, -ONE);
    let planar = (0..n)
        .map(|_| {
            let lambda = (rng.complex_normal(1.0) * c64(scale, 0.0)).exp();
            let mut a = so2_from_gm(lambda).expect("exp(z) is nonzero");
            if with_reflection && rng.bool() {
                a *= reflection;
            }
            a
        })
        .collect();
    WeylElement::new(planar).expect("sampled blocks are orthogonal")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{all_words, scalar_product, PauliWord};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn cv(re: f64, im: f64) -> C64 {
        c64(re, im)
    }

    fn random_state(n: usize, rng: &mut SeededRng) -> BlochState {
        let mut b = BlochState::new(n).unwrap();
        for w in all_words(n) {
            b.insert(w, rng.complex_normal(1.0)).unwrap();
        }
        b
    }

    #[test]
    fn identity_acts_trivially() {
        let mut rng = SeededRng::new(1);
        let b = random_state(2, &mut rng);
        let out = LocalRotation::identity(2).act(&b).unwrap();
        assert!(b.max_difference(&out) < 1e-15);
    }

    #[test]
    fn single_qubit_sign_flip() {
        let g = LocalRotation::new(vec![Matrix3::from_diagonal(&Vector3::new(
            -ONE, -ONE, ONE,
        ))])
        .unwrap();
        let mut b = BlochState::new(1).unwrap();
        b.insert(PauliWord::parse("X").unwrap(), ONE).unwrap();
        let out = g.act(&b).unwrap();
        assert_eq!(out.component_str("X").unwrap(), -ONE);
        assert_eq!(out.component_str("Y").unwrap(), ZERO);
    }

    #[test]
    fn act_size_mismatch_rejected() {
        let b = BlochState::new(2).unwrap();
        assert!(LocalRotation::identity(3).act(&b).is_err());
    }

    #[test]
    fn act_preserves_one_point_norms() {
        for seed in 0..20 {
            let mut rng = SeededRng::new(seed);
            let b = random_state(2, &mut rng);
            let g = random_rotation(2, seed + 1000, 0.7).unwrap();
            let gb = g.act(&b).unwrap();
            for i in 0..2 {
                let v = b.one_point(i).unwrap();
                let w = gb.one_point(i).unwrap();
                let diff = (scalar_product(&v, &v) - scalar_product(&w, &w)).norm();
                assert!(diff < 1e-9, "seed {seed} qubit {i}: {diff:.3e}");
            }
        }
    }

    #[test]
    fn act_is_a_group_action() {
        for seed in 0..10 {
            let mut rng = SeededRng::new(seed);
            let b = random_state(2, &mut rng);
            let g = random_rotation_rng(2, &mut rng, 0.7);
            let h = random_rotation_rng(2, &mut rng, 0.7);
            let lhs = g.act(&h.act(&b).unwrap()).unwrap();
            let rhs = g.compose(&h).unwrap().act(&b).unwrap();
            assert!(lhs.max_difference(&rhs) < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn act_preserves_tensor_scalar_products() {
        // Isometry on each correlation component: check the 2-point tensors
        // of two independent states under the same rotation.
        for seed in 0..10 {
            let mut rng = SeededRng::new(seed);
            let b1 = random_state(2, &mut rng);
            let b2 = random_state(2, &mut rng);
            let g = random_rotation_rng(2, &mut rng, 0.7);
            let pair = |x: &BlochState, y: &BlochState| {
                let cx = x.two_point(0, 1).unwrap();
                let cy = y.two_point(0, 1).unwrap();
                cx.iter().zip(cy.iter()).map(|(a, b)| a * b).sum::<C64>()
            };
            let before = pair(&b1, &b2);
            let after = pair(&g.act(&b1).unwrap(), &g.act(&b2).unwrap());
            assert!((before - after).norm() < 1e-9 * (1.0 + before.norm()));
        }
    }

    #[test]
    fn from_sl2_identity_and_kernel() {
        let id = from_sl2(&[Matrix2::identity()]).unwrap();
        assert!((id.block(0) - Matrix3::identity()).iter().all(|z| z.norm() < 1e-14));

        // Scalars act trivially through conjugation.
        let lam = from_sl2(&[Matrix2::identity() * cv(0.3, -1.7)]).unwrap();
        assert!((lam.block(0) - Matrix3::identity()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn from_sl2_diag_i() {
        // Conjugation oracle: diag(i, -i) sends sx -> -sx, sy -> -sy, sz -> sz.
        let m = Matrix2::new(cv(0.0, 1.0), ZERO, ZERO, cv(0.0, -1.0));
        let g = from_sl2(&[m]).unwrap();
        let expected = Matrix3::from_diagonal(&Vector3::new(-ONE, -ONE, ONE));
        assert!((g.block(0) - expected).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn from_sl2_rejects_singular() {
        assert!(from_sl2(&[Matrix2::from_element(ZERO)]).is_err());
    }

    #[test]
    fn from_sl2_is_a_homomorphism() {
        let mut rng = SeededRng::new(5);
        for _ in 0..20 {
            let m = rng.complex_normal_mat2(1.0) + Matrix2::identity();
            let n = rng.complex_normal_mat2(1.0) + Matrix2::identity();
            let det = |x: &Matrix2<C64>| x[(0, 0)] * x[(1, 1)] - x[(0, 1)] * x[(1, 0)];
            if det(&m).norm() < 1e-3 || det(&n).norm() < 1e-3 {
                continue;
            }
            let gm = from_sl2(&[m]).unwrap();
            let gn = from_sl2(&[n]).unwrap();
            let gmn = from_sl2(&[m * n]).unwrap();
            let prod = gm.block(0) * gn.block(0);
            assert!((gmn.block(0) - prod).iter().all(|z| z.norm() < 1e-9));
        }
    }

    #[test]
    fn random_rotation_zero_scale_is_identity() {
        let g = random_rotation(3, 9, 0.0).unwrap();
        for i in 0..3 {
            assert!((g.block(i) - Matrix3::identity()).iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn random_rotation_invariants_over_seeds() {
        for seed in 0..100 {
            let g = random_rotation(2, seed, 0.7).unwrap();
            for i in 0..2 {
                assert!(ortho_residual3(g.block(i)) < 1e-9, "seed {seed}");
                assert!((g.block(i).determinant() - ONE).norm() < 1e-9, "seed {seed}");
            }
        }
    }

    #[test]
    fn random_rotation_is_seeded() {
        let a = random_rotation(2, 42, 0.7).unwrap();
        let b = random_rotation(2, 42, 0.7).unwrap();
        assert_eq!(a, b);
        let c = random_rotation(2, 43, 0.7).unwrap();
        let diff: f64 = (a.block(0) - c.block(0)).iter().map(|z| z.norm()).sum();
        assert!(diff > 1e-3);
    }

    #[test]
    fn infinitesimal_action_zero() {
        let mut rng = SeededRng::new(3);
        let b = random_state(2, &mut rng);
        let t = LieTangent::zero(2).apply(&b).unwrap();
        assert!(t.components().is_empty());
    }

    #[test]
    fn infinitesimal_rotation_in_xy_plane() {
        // Generator with J e_x = e_y: {"X": 1} flows to {"Y": 1}.
        let coords = [ZERO, ZERO, ONE];
        let x = LieTangent::from_coordinates(1, &coords).unwrap();
        let mut b = BlochState::new(1).unwrap();
        b.insert(PauliWord::parse("X").unwrap(), ONE).unwrap();
        let t = x.apply(&b).unwrap();
        assert_eq!(t.component_str("Y").unwrap(), ONE);
        assert_eq!(t.component_str("X").unwrap(), ZERO);
    }

    #[test]
    fn infinitesimal_action_matches_finite_differences() {
        let h = 1e-6;
        for seed in 0..10 {
            let mut rng = SeededRng::new(seed);
            let b = random_state(2, &mut rng);
            let coords: Vec<C64> = (0..6).map(|_| rng.complex_normal(1.0)).collect();
            let x = LieTangent::from_coordinates(2, &coords).unwrap();
            let exact = x.apply(&b).unwrap();

            // Forward difference per the documented contract.
            let xh = LieTangent::from_coordinates(
                2,
                &coords.iter().map(|z| z * cv(h, 0.0)).collect::<Vec<_>>(),
            )
            .unwrap();
            let fwd = xh.exp().act(&b).unwrap();
            let mut max_err = 0.0f64;
            for w in all_words(2) {
                let fd = (fwd.component(&w) - b.component(&w)) / cv(h, 0.0);
                max_err = max_err.max((fd - exact.component(&w)).norm());
            }
            assert!(max_err < 1e-5, "seed {seed}: forward error {max_err:.3e}");

            // Central difference is tighter.
            let xm = LieTangent::from_coordinates(
                2,
                &coords.iter().map(|z| z * cv(-h, 0.0)).collect::<Vec<_>>(),
            )
            .unwrap();
            let bwd = xm.exp().act(&b).unwrap();
            let mut max_cerr = 0.0f64;
            for w in all_words(2) {
                let fd = (fwd.component(&w) - bwd.component(&w)) / cv(2.0 * h, 0.0);
                max_cerr = max_cerr.max((fd - exact.component(&w)).norm());
            }
            assert!(max_cerr < 1e-5, "seed {seed}: central error {max_cerr:.3e}");
        }
    }

    #[test]
    fn so2_examples() {
        let id = so2_from_gm(ONE).unwrap();
        assert!((id - Matrix2::identity()).iter().all(|z| z.norm() < 1e-15));

        let m = so2_from_gm(cv(2.0, 0.0)).unwrap();
        assert!((m[(0, 0)] - cv(1.25, 0.0)).norm() < 1e-15);
        assert!((m[(0, 1)] - cv(0.0, -0.75)).norm() < 1e-15);
        assert!((m[(1, 0)] - cv(0.0, 0.75)).norm() < 1e-15);
        // a^2 + b^2 = 25/16 - 9/16 = 1.
        let a2b2 = m[(0, 0)] * m[(0, 0)] + m[(0, 1)] * m[(0, 1)];
        assert!((a2b2 - ONE).norm() < 1e-15);

        assert!(so2_from_gm(ZERO).is_err());
    }

    #[test]
    fn gm_so2_round_trip() {
        let mut rng = SeededRng::new(21);
        for _ in 0..100 {
            let lambda = rng.complex_normal(1.0).exp();
            let m = so2_from_gm(lambda).unwrap();
            let back = gm_from_so2(&m).unwrap();
            assert!((back - lambda).norm() < 1e-12 * lambda.norm());
        }
    }

    #[test]
    fn gm_from_so2_examples() {
        assert_eq!(gm_from_so2(&Matrix2::identity()).unwrap(), ONE);
        let rot = Matrix2::new(ZERO, ONE, -ONE, ZERO);
        assert_eq!(gm_from_so2(&rot).unwrap(), cv(0.0, 1.0));
        // Non-orthogonal input is rejected.
        assert!(gm_from_so2(&(Matrix2::identity() * cv(2.0, 0.0))).is_err());
    }

    #[test]
    fn gm_is_multiplicative() {
        let mut rng = SeededRng::new(23);
        for _ in 0..50 {
            let l1 = rng.complex_normal(1.0).exp();
            let l2 = rng.complex_normal(1.0).exp();
            let a = so2_from_gm(l1).unwrap();
            let b = so2_from_gm(l2).unwrap();
            let gm_ab = gm_from_so2(&(a * b)).unwrap();
            let prod = gm_from_so2(&a).unwrap() * gm_from_so2(&b).unwrap();
            assert!((gm_ab - prod).norm() < 1e-10 * prod.norm());
        }
    }

    #[test]
    fn weyl_embed_examples() {
        let id = weyl_embed(&WeylElement::identity(2));
        for i in 0..2 {
            assert!((id.block(i) - Matrix3::identity()).iter().all(|z| z.norm() < 1e-15));
        }

        let refl = WeylElement::new(vec![Matrix2::new(ONE, ZERO, ZERO, -ONE)]).unwrap();
        let g = weyl_embed(&refl);
        let expected = Matrix3::from_diagonal(&Vector3::new(ONE, -ONE, -ONE));
        assert!((g.block(0) - expected).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn weyl_sample_properties() {
        let id = weyl_sample(2, 1, 0.0, false);
        for i in 0..2 {
            assert!((id.planar(i) - Matrix2::identity()).iter().all(|z| z.norm() < 1e-15));
        }
        for seed in 0..50 {
            let w = weyl_sample(3, seed, 0.6, true);
            let g = weyl_embed(&w);
            for i in 0..3 {
                assert!(ortho_residual3(g.block(i)) < 1e-9);
                // Longitudinal axis is preserved as a line: the z column is
                // (0, 0, +-1).
                let col = g.block(i).column(2);
                assert!(col[0].norm() < 1e-12 && col[1].norm() < 1e-12);
                assert!((col[2].norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mat_exp_of_zero_and_known_rotation() {
        assert_eq!(mat_exp3(&Matrix3::from_element(ZERO)), Matrix3::identity());
        // exp(t J_z) is the rotation by t in the (x, y) plane.
        let t = 0.37f64;
        let j = Matrix3::new(ZERO, -ONE, ZERO, ONE, ZERO, ZERO, ZERO, ZERO, ZERO);
        let r = mat_exp3(&(j * cv(t, 0.0)));
        assert!((r[(0, 0)] - cv(t.cos(), 0.0)).norm() < 1e-14);
        assert!((r[(1, 0)] - cv(t.sin(), 0.0)).norm() < 1e-14);
        assert!((r[(2, 2)] - ONE).norm() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn prop_sampled_rotations_are_isometries(seed in 0u64..500) {
            let g = random_rotation(1, seed, 0.7).unwrap();
            let mut rng = SeededRng::new(seed ^ 0xabcd);
            let v = Vector3::new(rng.complex_normal(1.0), rng.complex_normal(1.0), rng.complex_normal(1.0));
            let gv = g.block(0) * v;
            let diff = (scalar_product(&gv, &gv) - scalar_product(&v, &v)).norm();
            prop_assert!(diff < 1e-10 * (1.0 + v.iter().map(|z| z.norm()).sum::<f64>()));
        }
    }
}
