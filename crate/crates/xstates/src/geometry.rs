//! X-state geometry: parity patterns, fibers over a longitudinal system,
//! dimension bookkeeping, the star-tree truncation, and the two-qubit
//! normal form.
//!
//! Fixing a non-degenerate axis in each qubit's coordinate space (a
//! *longitudinal system*) splits every correlation axis into a
//! longitudinal line and a transversal plane. The X-states attached to
//! that system are the states whose Bloch support uses an even number of
//! transversal letters per word; equivalently, in the matrix picture the
//! state preserves the parity grading of the computational basis. All
//! fibers in this crate are realized over the standard system (the z-axis
//! on every qubit) and moved around by the symmetry group, which acts
//! transitively on systems.
//!
//! For two qubits there is a five-parameter section: one longitudinal
//! coefficient per qubit plus a diagonal two-point block. A generic
//! 2-qubit X-state is carried onto the section by a pair of rotations
//! recovered from the eigenvectors of `C C^T` and `C^T C`, where `C` is
//! the two-point correlation matrix; the recovered section point is unique
//! up to the finite normalizer orbit computed by [`weyl_orbit_section2`].

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::bloch::{
    c64, scalar_product, BlochState, C64, DensityMatrix, PauliLetter, PauliWord, ONE,
    ZERO,
};
use crate::error::{Error, Result};
use crate::group::{weyl_embed, LocalRotation, WeylElement};
use crate::rng::SeededRng;

/// A choice of non-degenerate longitudinal axis per qubit, each normalized
/// to `scalar_product(z, z) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalSystem {
    axes: Vec<Vector3<C64>>,
}

impl LongitudinalSystem {
    /// The standard system: the z-axis on every qubit.
    pub fn standard(n: usize) -> Self {
        Self {
            axes: vec![Vector3::new(ZERO, ZERO, ONE); n],
        }
    }

    /// Normalizes each axis by a square root of its self scalar product;
    /// rejects degenerate (isotropic) axes.
    pub fn from_axes(axes: Vec<Vector3<C64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(axes.len());
        for (i, z) in axes.into_iter().enumerate() {
            let q = scalar_product(&z, &z);
            let scale = z.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if q.norm() <= 1e-12 * (1.0 + scale * scale) {
                return Err(Error::Degenerate(format!(
                    "axis {i} is isotropic (|<z,z>| = {:.3e})",
                    q.norm()
                )));
            }
            out.push(z / q.sqrt());
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("need at least one axis".into()));
        }
        Ok(Self { axes: out })
    }

    pub fn n(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &Vector3<C64> {
        &self.axes[i]
    }
}

/// True when a word may carry a nonzero coefficient on a fiber over the
/// standard system: an even number of transversal letters and not the
/// identity.
pub fn is_admissible(word: &PauliWord) -> bool {
    !word.is_identity() && word.transversal_count().is_multiple_of(2)
}

/// A point of the X-state fiber over the standard longitudinal system:
/// a sparse coefficient map supported on admissible words only.
#[derive(Debug, Clone, PartialEq)]
pub struct XFiberPoint {
    n: usize,
    coefficients: BTreeMap<PauliWord, C64>,
}

impl XFiberPoint {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("qubit count must be positive".into()));
        }
        Ok(Self {
            n,
            coefficients: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, word: PauliWord, value: C64) -> Result<()> {
        if word.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "word {word} has length {} but the fiber has {} qubits",
                word.len(),
                self.n
            )));
        }
        if !is_admissible(&word) {
            return Err(Error::InvalidArgument(format!(
                "word {word} is not admissible on the fiber"
            )));
        }
        if value == ZERO {
            self.coefficients.remove(&word);
        } else {
            self.coefficients.insert(word, value);
        }
        Ok(())
    }

    pub fn coefficient(&self, word: &PauliWord) -> C64 {
        self.coefficients.get(word).copied().unwrap_or(ZERO)
    }

    pub fn coefficients(&self) -> &BTreeMap<PauliWord, C64> {
        &self.coefficients
    }

    /// Reads a Bloch state back into the fiber. Coefficients on
    /// inadmissible words must not exceed `tol` (they are dropped).
    pub fn from_bloch_state(b: &BlochState, tol: f64) -> Result<Self> {
        let mut p = Self::new(b.n())?;
        for (w, v) in b.components() {
            if is_admissible(w) {
                p.insert(w.clone(), *v)?;
            } else if v.norm() > tol {
                return Err(Error::MalformedState(format!(
                    "coefficient {:.3e} on inadmissible word {w}",
                    v.norm()
                )));
            }
        }
        Ok(p)
    }

    /// Every admissible word of length `n`, sorted.
    pub fn admissible_words(n: usize) -> Vec<PauliWord> {
        crate::bloch::all_words(n)
            .into_iter()
            .filter(is_admissible)
            .collect()
    }

    /// Dense fiber point with complex normal coefficients on every
    /// admissible word.
    pub fn random(n: usize, rng: &mut SeededRng) -> Result<Self> {
        let mut p = Self::new(n)?;
        for w in Self::admissible_words(n) {
            p.insert(w, rng.complex_normal(1.0))?;
        }
        Ok(p)
    }
}

/// Parity of the binary string encoded by a basis index.
fn parity(index: usize) -> usize {
    index.count_ones() as usize & 1
}

/// True when every entry of `d` connecting basis kets of opposite parity
/// has magnitude at most `tol`.
pub fn is_x_pattern(d: &DensityMatrix, tol: f64) -> bool {
    let dim = d.dim();
    for r in 0..dim {
        for c in 0..dim {
            if parity(r) != parity(c) && d.matrix()[(r, c)].norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Includes a fiber point into the space of Bloch states.
pub fn fiber_embed(p: &XFiberPoint) -> BlochState {
    let mut b = BlochState::new(p.n()).expect("fiber has positive qubit count");
    for (w, v) in p.coefficients() {
        b.insert(w.clone(), *v).expect("admissible words are valid components");
    }
    b
}

/// Witness of how a sampled X-state was produced.
#[derive(Debug, Clone)]
pub struct XStateWitness {
    pub rotation: LocalRotation,
    pub fiber: XFiberPoint,
}

/// Samples a random X-state: a dense random fiber point over the standard
/// system pushed by a random rotation. Resamples (up to 16 times) until
/// every one-point correlation has squared norm of magnitude above `1e-8`,
/// so the returned state lies in the open stratum where the fiber
/// structure is recoverable.
pub fn random_xstate(n: usize, seed: u64) -> Result<(BlochState, XStateWitness)> {
    let mut rng = SeededRng::new(seed);
    random_xstate_rng(n, &mut rng)
}

pub fn random_xstate_rng(n: usize, rng: &mut SeededRng) -> Result<(BlochState, XStateWitness)> {
    for _ in 0..16 {
        let fiber = XFiberPoint::random(n, rng)?;
        let ok = (0..n).all(|i| {
            let w = PauliWord::single(n, i, PauliLetter::Z).expect("index in range");
            let alpha = fiber.coefficient(&w);
            (alpha * alpha).norm() > 1e-8
        });
        if !ok {
            continue;
        }
        let rotation = crate::group::random_rotation_rng(n, rng, 0.7);
        let state = rotation.act(&fiber_embed(&fiber))?;
        return Ok((state, XStateWitness { rotation, fiber }));
    }
    Err(Error::DegenerateSample)
}

/// Closed-form dimension data for the `n`-qubit X-state variety.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimFormulas {
    /// Dimension of one fiber: `2^(2n-1) - 1`.
    pub dim_fiber: u64,
    /// Dimension of the variety: `2^(2n-1) + 2n - 1`.
    pub dim_variety: u64,
    /// Transcendence degree of the invariant field: `2^(2n-1) - n - 1`.
    pub trdeg: u64,
    /// Dimension of the star-tree truncation: `5n - 4`.
    pub dim_xt: u64,
    /// Dimension of the truncation kernel: `2^(2n-1) - 5n + 3`.
    pub dim_f: u64,
}

/// Counts the admissible words of length `n` by the multinomial sum over
/// support patterns: choose `s` longitudinal and `t` transversal positions
/// with `1 <= s + t <= n` and `t` even; each transversal position
/// contributes a factor 2. Exact integer arithmetic.
pub fn fiber_dim_sum(n: u32) -> u64 {
    let mut total: u64 = 0;
    for s in 0..=n {
        for t in 0..=(n - s) {
            if s + t == 0 || t % 2 != 0 {
                continue;
            }
            total += multinomial(n, s, t) * (1u64 << t);
        }
    }
    total
}

fn multinomial(n: u32, s: u32, t: u32) -> u64 {
    // n! / (s! t! (n-s-t)!) via a binomial product to stay in range.
    binom(n as u64, s as u64) * binom((n - s) as u64, t as u64)
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num: u64 = 1;
    for i in 0..k {
        num = num * (n - i) / (i + 1);
    }
    num
}

/// Evaluates the dimension formulas at `n >= 2` and cross-checks the fiber
/// dimension against the multinomial count.
pub fn dim_formulas(n: u32) -> Result<DimFormulas> {
    if n < 2 {
        return Err(Error::InvalidArgument("dimension formulas need n >= 2".into()));
    }
    let pow = 1u64 << (2 * n - 1);
    let out = DimFormulas {
        dim_fiber: pow - 1,
        dim_variety: pow + 2 * n as u64 - 1,
        trdeg: pow - n as u64 - 1,
        dim_xt: 5 * n as u64 - 4,
        dim_f: pow + 3 - 5 * n as u64,
    };
    let counted = fiber_dim_sum(n);
    if counted != out.dim_fiber {
        return Err(Error::Internal(format!(
            "fiber dimension mismatch: multinomial sum {counted} vs closed form {}",
            out.dim_fiber
        )));
    }
    Ok(out)
}

/// A point of the two-qubit section: longitudinal coefficients `x`, `y`
/// and the diagonal two-point block `(lambda_1, lambda_2, lambda_3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint2 {
    pub x: C64,
    pub y: C64,
    pub lambda: [C64; 3],
}

impl SectionPoint2 {
    pub fn new(x: C64, y: C64, lambda: [C64; 3]) -> Self {
        Self { x, y, lambda }
    }

    pub fn coords(&self) -> [C64; 5] {
        [self.x, self.y, self.lambda[0], self.lambda[1], self.lambda[2]]
    }

    pub fn max_coord(&self) -> f64 {
        self.coords().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Componentwise max distance to `other`.
    pub fn distance(&self, other: &SectionPoint2) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Embeds a section point as the 2-qubit state with one-point correlations
/// `(0,0,x)`, `(0,0,y)` and two-point matrix `diag(lambda)`.
pub fn section_embed2(s: &SectionPoint2) -> BlochState {
    let mut b = BlochState::new(2).expect("two qubits");
    let mut put = |w: &str, v: C64| {
        if v != ZERO {
            b.insert(PauliWord::parse(w).expect("valid word"), v)
                .expect("valid component");
        }
    };
    put("ZI", s.x);
    put("IZ", s.y);
    put("XX", s.lambda[0]);
    put("YY", s.lambda[1]);
    put("ZZ", s.lambda[2]);
    b
}

/// Complex cross product (formal determinant, no conjugation).
fn cross(a: &Vector3<C64>, b: &Vector3<C64>) -> Vector3<C64> {
    Vector3::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

fn sq_mag(v: &Vector3<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Roots of the monic cubic `z^3 + c2 z^2 + c1 z + c0` by the classical
/// radical formula, each polished with two Newton steps.
fn cubic_roots(c2: C64, c1: C64, c0: C64) -> [C64; 3] {
    let third = c64(1.0 / 3.0, 0.0);
    let shift = c2 * third;
    let p = c1 - c2 * c2 * third;
    let q = c2 * c2 * c2 * c64(2.0 / 27.0, 0.0) - c2 * c1 * third + c0;

    let half_q = q * c64(0.5, 0.0);
    let disc = half_q * half_q + p * p * p / c64(27.0, 0.0);
    let sqrt_disc = disc.sqrt();
    // Pick the larger branch for numerical stability of the cube root.
    let mut u3 = -half_q + sqrt_disc;
    if u3.norm() < (-half_q - sqrt_disc).norm() {
        u3 = -half_q - sqrt_disc;
    }

    let mut roots = [ZERO; 3];
    if u3.norm() < 1e-300 {
        // Triple root (p ~ q ~ 0).
        for r in &mut roots {
            *r = -shift;
        }
    } else {
        let u = u3.cbrt();
        let omega = C64::new(-0.5, 3f64.sqrt() / 2.0);
        let mut w = ONE;
        for slot in &mut roots {
            let uk = u * w;
            *slot = uk - p / (uk * c64(3.0, 0.0)) - shift;
            w *= omega;
        }
    }

    // Newton polish on the original cubic.
    for r in &mut roots {
        for _ in 0..2 {
            let f = ((*r + c2) * *r + c1) * *r + c0;
            let df = (*r * c64(3.0, 0.0) + c2 * c64(2.0, 0.0)) * *r + c1;
            if df.norm() > 1e-300 {
                *r -= f / df;
            }
        }
    }
    roots
}

/// Eigen data of a complex symmetric 3x3 matrix with distinct eigenvalues:
/// values sorted by (Re, Im), and eigenvectors normalized to unit bilinear
/// self product. Eigenvectors of a symmetric matrix at distinct eigenvalues
/// are automatically orthogonal for the bilinear form.
fn eigen_sym3(s: &Matrix3<C64>, tol: f64) -> Result<([C64; 3], [Vector3<C64>; 3])> {
    let tr = s[(0, 0)] + s[(1, 1)] + s[(2, 2)];
    let m2 = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)]
        + s[(0, 0)] * s[(2, 2)] - s[(0, 2)] * s[(2, 0)]
        + s[(1, 1)] * s[(2, 2)] - s[(1, 2)] * s[(2, 1)];
    let det = s.determinant();
    let mut vals = cubic_roots(-tr, m2, -det);
    vals.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });

    let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let mut vecs = [Vector3::from_element(ZERO); 3];
    for (k, &mu) in vals.iter().enumerate() {
        let m = s - Matrix3::identity() * mu;
        let rows: [Vector3<C64>; 3] = [
            Vector3::new(m[(0, 0)], m[(0, 1)], m[(0, 2)]),
            Vector3::new(m[(1, 0)], m[(1, 1)], m[(1, 2)]),
            Vector3::new(m[(2, 0)], m[(2, 1)], m[(2, 2)]),
        ];
        let mut best = Vector3::from_element(ZERO);
        let mut best_mag = 0.0;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let cand = cross(&rows[i], &rows[j]);
            let mag = sq_mag(&cand);
            if mag > best_mag {
                best_mag = mag;
                best = cand;
            }
        }
        if best_mag <= (tol * scale * scale).powi(2) {
            return Err(Error::NotGeneric(format!(
                "eigenvector for eigenvalue {k} is numerically undetermined"
            )));
        }
        let q = scalar_product(&best, &best);
        if q.norm() <= tol * best_mag {
            return Err(Error::NotGeneric(format!(
                "eigenvector for eigenvalue {k} is isotropic"
            )));
        }
        vecs[k] = best / q.sqrt();
    }
    Ok((vals, vecs))
}

/// Relative alignment defect of `v` against the line through `u`:
/// the residual of `v` after projecting onto `u`, over `|v|`.
fn alignment_defect(v: &Vector3<C64>, u: &Vector3<C64>) -> f64 {
    let uu = scalar_product(u, u);
    let proj = *u * (scalar_product(v, u) / uu);
    (sq_mag(&(v - proj)) / sq_mag(v)).sqrt()
}

/// Carries a generic 2-qubit X-state onto the section.
///
/// The two-point matrix `C` (rows indexed by qubit 1) satisfies
/// `C C^T = g1 D^2 g1^T` and `C^T C = g2 D^2 g2^T` for an X-state
/// `act((g1, g2), section_embed2(s))`, so the qubit-1 frame is read off the
/// eigenvectors of `C C^T` (aligning the one-point vector `v` with the
/// longitudinal slot) and the qubit-2 frame off `C^T C` with `w`. Signs are
/// fixed only to make each frame special orthogonal; the remaining
/// ambiguity is exactly the normalizer orbit.
///
/// Fails with `NotGeneric` when a genericity factor (`<v,v>`, `<w,w>`,
/// `det(C^T C)`, or the eigenvalue discriminant) falls below `tol` after
/// scale normalization, and with `ReductionFailed` when the candidate
/// frames do not reproduce the input to `1e-8` — the signature of a state
/// outside the X-variety.
pub fn reduce_to_section2(
    b: &BlochState,
    tol: f64,
) -> Result<(LocalRotation, SectionPoint2)> {
    if b.n() != 2 {
        return Err(Error::InvalidArgument(
            "the section reduction is defined for 2 qubits".into(),
        ));
    }
    let scale = b.max_component();
    if scale == 0.0 {
        return Err(Error::NotGeneric("zero state".into()));
    }
    let v = b.one_point(0)?;
    let w = b.one_point(1)?;
    let c = b.two_point(0, 1)?;

    let s2 = scale * scale;
    let qv = scalar_product(&v, &v);
    let qw = scalar_product(&w, &w);
    if qv.norm() <= tol * s2 {
        return Err(Error::NotGeneric(format!(
            "one-point norm of qubit 1 too small ({:.3e})",
            qv.norm() / s2
        )));
    }
    if qw.norm() <= tol * s2 {
        return Err(Error::NotGeneric(format!(
            "one-point norm of qubit 2 too small ({:.3e})",
            qw.norm() / s2
        )));
    }

    let s_v = c * c.transpose();
    let s_w = c.transpose() * c;
    let det_stc = s_w.determinant();
    if det_stc.norm() <= tol * s2.powi(3) {
        return Err(Error::NotGeneric(format!(
            "det(C^T C) too small ({:.3e})",
            det_stc.norm() / s2.powi(3)
        )));
    }

    let (vals_v, vecs_v) = eigen_sym3(&s_v, tol)?;
    let (vals_w, vecs_w) = eigen_sym3(&s_w, tol)?;

    // Discriminant of the shared eigenvalue triple.
    let disc = (vals_v[0] - vals_v[1])
        * (vals_v[0] - vals_v[2])
        * (vals_v[1] - vals_v[2]);
    let disc = disc * disc;
    if disc.norm() <= tol * s2.powi(6) {
        return Err(Error::NotGeneric(format!(
            "eigenvalue discriminant too small ({:.3e})",
            disc.norm() / s2.powi(6)
        )));
    }

    // Both matrices share a characteristic polynomial; pair the frames by
    // eigenvalue index. The longitudinal slot is the eigenvalue whose
    // eigenvector aligns with the one-point vector.
    let a_star = (0..3)
        .min_by(|&a, &b| {
            alignment_defect(&v, &vecs_v[a])
                .partial_cmp(&alignment_defect(&v, &vecs_v[b]))
                .expect("finite defects")
        })
        .expect("three candidates");
    let b_star = (0..3)
        .min_by(|&a, &b| {
            alignment_defect(&w, &vecs_w[a])
                .partial_cmp(&alignment_defect(&w, &vecs_w[b]))
                .expect("finite defects")
        })
        .expect("three candidates");

    let mut order: Vec<usize> = (0..3).filter(|&k| k != a_star).collect();
    order.push(a_star);
    let mut order_w: Vec<usize> = (0..3).filter(|&k| k != b_star).collect();
    order_w.push(b_star);
    // Eigenvalues are sorted identically on both sides, so matching slots
    // pair matching eigenvalues whenever the state is a generic X-state.
    let _ = vals_w;

    let frame = |vecs: &[Vector3<C64>; 3], order: &[usize]| -> Matrix3<C64> {
        let mut f = Matrix3::from_element(ZERO);
        for (slot, &k) in order.iter().enumerate() {
            f.set_column(slot, &vecs[k]);
        }
        // Make the frame special orthogonal by flipping the first column
        // if needed; the sign lands in the normalizer orbit.
        let det = f.determinant();
        if (det + ONE).norm() < (det - ONE).norm() {
            let flipped = -f.column(0);
            f.set_column(0, &flipped);
        }
        f
    };
    let f1 = frame(&vecs_v, &order);
    let f2 = frame(&vecs_w, &order_w);

    let g = LocalRotation::new(vec![f1.transpose(), f2.transpose()]).map_err(|_| {
        Error::NotGeneric("candidate frame is not numerically orthogonal".into())
    })?;

    let moved = g.act(b)?;
    let section = SectionPoint2::new(
        moved.component_str("ZI")?,
        moved.component_str("IZ")?,
        [
            moved.component_str("XX")?,
            moved.component_str("YY")?,
            moved.component_str("ZZ")?,
        ],
    );
    let residual = moved.max_difference(&section_embed2(&section)) / scale;
    if residual > 1e-8 {
        return Err(Error::ReductionFailed { residual });
    }
    Ok((g, section))
}

/// The 32 normalizer elements of the two-qubit section: all pairs of
/// signed 2x2 permutation matrices sharing the same permutation part.
pub fn section_normalizer2() -> Vec<WeylElement> {
    let mut out = Vec::with_capacity(32);
    for swap in [false, true] {
        for signs in 0..16u32 {
            let e = |bit: u32| -> C64 {
                if signs & (1 << bit) != 0 {
                    -ONE
                } else {
                    ONE
                }
            };
            let block = |s0: C64, s1: C64| -> Matrix2<C64> {
                if swap {
                    Matrix2::new(ZERO, s0, s1, ZERO)
                } else {
                    Matrix2::new(s0, ZERO, ZERO, s1)
                }
            };
            let w = WeylElement::new(vec![block(e(0), e(1)), block(e(2), e(3))])
                .expect("signed permutation blocks are orthogonal");
            out.push(w);
        }
    }
    out
}

/// Pushes `s` through every element of the section normalizer and collects
/// the distinct images, sorted canonically. Generic points have 16 distinct
/// images: the normalizer has order 32 but its central element (minus the
/// identity on both transversal planes) fixes the section pointwise.
pub fn weyl_orbit_section2(s: &SectionPoint2) -> Vec<SectionPoint2> {
    let embedded = section_embed2(s);
    let mut images: Vec<SectionPoint2> = Vec::with_capacity(32);
    for w in section_normalizer2() {
        let moved = weyl_embed(&w)
            .act(&embedded)
            .expect("normalizer acts on 2-qubit states");
        let img = SectionPoint2::new(
            moved.component_str("ZI").expect("valid word"),
            moved.component_str("IZ").expect("valid word"),
            [
                moved.component_str("XX").expect("valid word"),
                moved.component_str("YY").expect("valid word"),
                moved.component_str("ZZ").expect("valid word"),
            ],
        );
        images.push(img);
    }
    // Signed permutations act by exact sign flips and swaps, so exact
    // deduplication is sound.
    images.sort_by(|a, b| {
        let ka: Vec<(f64, f64)> = a.coords().iter().map(|z| (z.re, z.im)).collect();
        let kb: Vec<(f64, f64)> = b.coords().iter().map(|z| (z.re, z.im)).collect();
        ka.partial_cmp(&kb).expect("finite coordinates")
    });
    images.dedup_by(|a, b| a.coords() == b.coords());
    images
}

/// True when `candidate` lies in the normalizer orbit of `base`, up to the
/// componentwise tolerance `tol` (scale-normalized).
pub fn in_section_orbit2(base: &SectionPoint2, candidate: &SectionPoint2, tol: f64) -> bool {
    let scale = 1.0 + base.max_coord().max(candidate.max_coord());
    weyl_orbit_section2(base)
        .iter()
        .any(|img| img.distance(candidate) <= tol * scale)
}

/// Truncated star-tree coordinates: the longitudinal coefficient of every
/// qubit plus one transversal 2x2 block per edge from qubit `j` to the
/// center qubit `n` (the last one).
#[derive(Debug, Clone, PartialEq)]
pub struct XTPoint {
    alphas: Vec<C64>,
    blocks: Vec<Matrix2<C64>>,
}

impl XTPoint {
    pub fn new(alphas: Vec<C64>, blocks: Vec<Matrix2<C64>>) -> Result<Self> {
        let n = alphas.len();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "truncated coordinates need n >= 2".into(),
            ));
        }
        if blocks.len() != n - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} edge blocks, got {}",
                n - 1,
                blocks.len()
            )));
        }
        Ok(Self { alphas, blocks })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::new(vec![ZERO; n], vec![Matrix2::from_element(ZERO); n - 1])
    }

    pub fn random(n: usize, rng: &mut SeededRng) -> Result<Self> {
        Self::new(
            (0..n).map(|_| rng.complex_normal(1.0)).collect(),
            (0..n - 1).map(|_| rng.complex_normal_mat2(1.0)).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn alpha(&self, i: usize) -> C64 {
        self.alphas[i]
    }

    pub fn alphas(&self) -> &[C64] {
        &self.alphas
    }

    /// Edge block for the edge from qubit `j` (0-based, `j < n-1`) to the
    /// center; rows indexed by the letter at `j`, columns by the letter at
    /// the center.
    pub fn block(&self, j: usize) -> &Matrix2<C64> {
        &self.blocks[j]
    }

    pub fn blocks(&self) -> &[Matrix2<C64>] {
        &self.blocks
    }

    /// Canonical coordinate flattening: alphas then blocks row-major.
    pub fn coords(&self) -> Vec<C64> {
        let mut out = self.alphas.clone();
        for b in &self.blocks {
            out.extend([b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]]);
        }
        out
    }

    pub fn from_coords(n: usize, coords: &[C64]) -> Result<Self> {
        if coords.len() != 5 * n - 4 {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                5 * n - 4,
                coords.len()
            )));
        }
        let alphas = coords[..n].to_vec();
        let blocks = (0..n - 1)
            .map(|j| {
                let o = n + 4 * j;
                Matrix2::new(coords[o], coords[o + 1], coords[o + 2], coords[o + 3])
            })
            .collect();
        Self::new(alphas, blocks)
    }

    /// Section of the truncation: the fiber point with exactly these
    /// coordinates and zeros elsewhere.
    pub fn lift(&self) -> XFiberPoint {
        let n = self.n();
        let mut p = XFiberPoint::new(n).expect("n >= 2");
        for (i, &alpha) in self.alphas.iter().enumerate() {
            if alpha != ZERO {
                let w = PauliWord::single(n, i, PauliLetter::Z).expect("index in range");
                p.insert(w, alpha).expect("longitudinal word is admissible");
            }
        }
        let letters = [PauliLetter::X, PauliLetter::Y];
        for (j, block) in self.blocks.iter().enumerate() {
            for (r, lr) in letters.iter().enumerate() {
                for (cidx, lc) in letters.iter().enumerate() {
                    let vbl = block[(r, cidx)];
                    if vbl != ZERO {
                        let w = PauliWord::single(n, j, *lr)
                            .expect("index in range")
                            .with_letter(n - 1, *lc);
                        p.insert(w, vbl).expect("two-transversal word is admissible");
                    }
                }
            }
        }
        p
    }
}

/// Projects a fiber point to its star-tree truncation: longitudinal
/// coefficients and the transversal blocks of edges into the center qubit.
pub fn truncate_to_xt(p: &XFiberPoint) -> Result<XTPoint> {
    let n = p.n();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "truncation needs at least 2 qubits".into(),
        ));
    }
    let alphas = (0..n)
        .map(|i| {
            let w = PauliWord::single(n, i, PauliLetter::Z).expect("index in range");
            p.coefficient(&w)
        })
        .collect();
    let letters = [PauliLetter::X, PauliLetter::Y];
    let blocks = (0..n - 1)
        .map(|j| {
            Matrix2::from_fn(|r, c| {
                let w = PauliWord::single(n, j, letters[r])
                    .expect("index in range")
                    .with_letter(n - 1, letters[c]);
                p.coefficient(&w)
            })
        })
        .collect();
    XTPoint::new(alphas, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{from_bloch, to_bloch};
    use crate::group::random_rotation;
    use nalgebra::DMatrix;

    #[test]
    fn longitudinal_system_normalization() {
        let std = LongitudinalSystem::standard(3);
        for i in 0..3 {
            let z = std.axis(i);
            assert_eq!(scalar_product(z, z), ONE);
        }

        // Raw axes are normalized by a square root of the self pairing.
        let raw = vec![Vector3::new(c64(3.0, 0.0), c64(0.0, 0.0), c64(4.0, 0.0))];
        let sys = LongitudinalSystem::from_axes(raw).unwrap();
        let z = sys.axis(0);
        assert!((scalar_product(z, z) - ONE).norm() < 1e-12);

        // Isotropic axes are rejected.
        let iso = vec![Vector3::new(ONE, c64(0.0, 1.0), c64(0.0, 0.0))];
        assert!(matches!(
            LongitudinalSystem::from_axes(iso),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn diag_matrices_are_x_patterned() {
        for n in 1..=3 {
            let dim = 1usize << n;
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            for i in 0..dim {
                m[(i, i)] = c64(1.0 / dim as f64, 0.3 * i as f64);
            }
            // Normalize the imaginary part away from the trace.
            let tr: C64 = m.diagonal().iter().sum();
            let m = m / tr;
            assert!(is_x_pattern(&DensityMatrix::new(n, m).unwrap(), 1e-12));
        }
    }

    #[test]
    fn classic_two_qubit_pattern() {
        // The anti-diagonal-plus-diagonal matrix that names the whole family.
        let mut m = DMatrix::<C64>::zeros(4, 4);
        for i in 0..4 {
            m[(i, i)] = c64(0.25, 0.0);
        }
        m[(0, 3)] = c64(0.1, 0.2);
        m[(3, 0)] = c64(0.1, -0.2);
        m[(1, 2)] = c64(-0.3, 0.05);
        m[(2, 1)] = c64(0.07, 0.0);
        let d = DensityMatrix::new(2, m.clone()).unwrap();
        assert!(is_x_pattern(&d, 1e-12));

        // Parity oracle: indices 0 (|00>) and 1 (|01>) have parities 0, 1.
        assert_eq!(parity(0), 0);
        assert_eq!(parity(1), 1);
        let mut bad = m;
        bad[(0, 1)] = c64(0.01, 0.0);
        let d = DensityMatrix::new(2, bad).unwrap();
        assert!(!is_x_pattern(&d, 1e-12));
    }

    #[test]
    fn fiber_embed_zero_is_mixed() {
        let p = XFiberPoint::new(2).unwrap();
        let b = fiber_embed(&p);
        assert!(b.components().is_empty());
    }

    #[test]
    fn fiber_rejects_inadmissible_words() {
        let mut p = XFiberPoint::new(2).unwrap();
        assert!(p.insert(PauliWord::parse("XI").unwrap(), ONE).is_err());
        assert!(p.insert(PauliWord::parse("XZ").unwrap(), ONE).is_err());
        assert!(p.insert(PauliWord::parse("XX").unwrap(), ONE).is_ok());
        assert!(p.insert(PauliWord::parse("ZI").unwrap(), ONE).is_ok());
        assert!(p.insert(PauliWord::parse("ZZ").unwrap(), ONE).is_ok());
    }

    #[test]
    fn n2_fiber_matches_block_structure() {
        // The 2-qubit fiber: longitudinal lines, the transversal (x) block,
        // and the longitudinal-longitudinal word.
        let words = XFiberPoint::admissible_words(2);
        let names: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        assert_eq!(
            names,
            ["IZ", "XX", "XY", "YX", "YY", "ZI", "ZZ"]
        );
        assert_eq!(words.len(), 7);
    }

    #[test]
    fn fiber_points_pass_the_pattern_both_ways() {
        for seed in 0..25 {
            let mut rng = SeededRng::new(seed);
            let n = 2 + (seed as usize) % 2;
            let p = XFiberPoint::random(n, &mut rng).unwrap();
            let d = from_bloch(&fiber_embed(&p));
            assert!(is_x_pattern(&d, 1e-12), "seed {seed}");

            // Converse: a random X-patterned matrix has admissible support.
            let dim = 1usize << n;
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            for r in 0..dim {
                for c in 0..dim {
                    if parity(r) == parity(c) {
                        m[(r, c)] = rng.complex_normal(1.0);
                    }
                }
            }
            let tr: C64 = m.diagonal().iter().sum();
            if tr.norm() < 1e-6 {
                continue;
            }
            let m = m / tr;
            let b = to_bloch(&DensityMatrix::new(n, m).unwrap()).unwrap();
            for (w, v) in b.components() {
                assert!(
                    is_admissible(w) || v.norm() <= 1e-12,
                    "seed {seed}: inadmissible {w} carries {:.3e}",
                    v.norm()
                );
            }
        }
    }

    #[test]
    fn random_xstate_is_seeded_and_generic() {
        let (a, _) = random_xstate(2, 7).unwrap();
        let (b, _) = random_xstate(2, 7).unwrap();
        assert_eq!(a, b);

        for seed in 0..100 {
            for n in [2usize, 3] {
                let (state, witness) = random_xstate(n, seed).unwrap();
                for i in 0..n {
                    let v = state.one_point(i).unwrap();
                    let q = scalar_product(&v, &v);
                    assert!(q.norm() > 1e-8, "seed {seed} n {n} qubit {i}");
                }
                // The witness reproduces the state.
                let rebuilt = witness.rotation.act(&fiber_embed(&witness.fiber)).unwrap();
                assert!(state.max_difference(&rebuilt) < 1e-10);
            }
        }
    }

    #[test]
    fn dimension_table() {
        let d2 = dim_formulas(2).unwrap();
        assert_eq!(
            (d2.dim_fiber, d2.dim_variety, d2.trdeg, d2.dim_xt, d2.dim_f),
            (7, 11, 5, 6, 1)
        );
        let d3 = dim_formulas(3).unwrap();
        assert_eq!(
            (d3.dim_fiber, d3.dim_variety, d3.trdeg, d3.dim_xt, d3.dim_f),
            (31, 37, 28, 11, 20)
        );
        let d4 = dim_formulas(4).unwrap();
        assert_eq!(
            (d4.dim_fiber, d4.dim_variety, d4.trdeg, d4.dim_xt, d4.dim_f),
            (127, 135, 123, 16, 111)
        );
        assert!(dim_formulas(1).is_err());
    }

    #[test]
    fn fiber_dimension_multinomial_vs_closed_form() {
        for n in 1..=8u32 {
            assert_eq!(fiber_dim_sum(n), (1u64 << (2 * n - 1)) - 1, "n = {n}");
        }
        // The count also matches the explicit word enumeration.
        for n in 1..=4u32 {
            assert_eq!(
                XFiberPoint::admissible_words(n as usize).len() as u64,
                fiber_dim_sum(n)
            );
        }
    }

    #[test]
    fn section_embed_examples() {
        let zero = section_embed2(&SectionPoint2::new(ZERO, ZERO, [ZERO; 3]));
        assert!(zero.components().is_empty());

        let s = SectionPoint2::new(
            c64(2.0, 0.0),
            c64(3.0, 0.0),
            [c64(1.0, 0.0), c64(2.0, 0.0), c64(5.0, 0.0)],
        );
        let b = section_embed2(&s);
        let v = b.one_point(0).unwrap();
        assert_eq!((v[0], v[1], v[2]), (ZERO, ZERO, c64(2.0, 0.0)));
        let c2 = b.two_point(0, 1).unwrap();
        assert_eq!(c2[(0, 0)], c64(1.0, 0.0));
        assert_eq!(c2[(1, 1)], c64(2.0, 0.0));
        assert_eq!(c2[(2, 2)], c64(5.0, 0.0));
        assert_eq!(c2[(0, 1)], ZERO);

        assert!(is_x_pattern(&from_bloch(&b), 1e-12));
    }

    #[test]
    fn eigen_sym3_recovers_diagonal() {
        let m = Matrix3::from_diagonal(&Vector3::new(
            c64(1.0, 0.5),
            c64(4.0, 0.0),
            c64(25.0, -1.0),
        ));
        let (vals, vecs) = eigen_sym3(&m, 1e-10).unwrap();
        assert!((vals[0] - c64(1.0, 0.5)).norm() < 1e-12);
        assert!((vals[1] - c64(4.0, 0.0)).norm() < 1e-12);
        assert!((vals[2] - c64(25.0, -1.0)).norm() < 1e-12);
        for (k, mu) in vals.iter().enumerate() {
            let resid = m * vecs[k] - vecs[k] * *mu;
            assert!(sq_mag(&resid).sqrt() < 1e-10);
            assert!((scalar_product(&vecs[k], &vecs[k]) - ONE).norm() < 1e-10);
        }
    }

    #[test]
    fn eigen_sym3_random_symmetric() {
        for seed in 0..50 {
            let mut rng = SeededRng::new(seed);
            let a = rng.complex_normal_mat3(1.0);
            let s = a + a.transpose();
            let (vals, vecs) = match eigen_sym3(&s, 1e-10) {
                Ok(x) => x,
                Err(_) => continue, // degenerate draw
            };
            for k in 0..3 {
                let resid = s * vecs[k] - vecs[k] * vals[k];
                let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(
                    sq_mag(&resid).sqrt() < 1e-9 * (1.0 + scale),
                    "seed {seed} eigenpair {k}"
                );
            }
        }
    }

    #[test]
    fn reduce_identity_on_section_points() {
        let s = SectionPoint2::new(
            c64(2.0, 0.0),
            c64(3.0, 0.0),
            [c64(1.0, 0.0), c64(2.0, 0.0), c64(5.0, 0.0)],
        );
        let b = section_embed2(&s);
        let (g, got) = reduce_to_section2(&b, 1e-8).unwrap();
        assert!(in_section_orbit2(&s, &got, 1e-8));
        // The recovered frame is the identity here (eigenvectors of a real
        // diagonal matrix in sorted order).
        for i in 0..2 {
            assert!((g.block(i) - Matrix3::identity())
                .iter()
                .all(|z| z.norm() < 1e-9));
        }
    }

    #[test]
    fn reduce_round_trip_100_seeds() {
        let mut failures = 0;
        for seed in 0..100u64 {
            let mut rng = SeededRng::new(seed);
            let s = SectionPoint2::new(
                rng.complex_normal(1.0),
                rng.complex_normal(1.0),
                [
                    rng.complex_normal(1.0),
                    rng.complex_normal(1.0),
                    rng.complex_normal(1.0),
                ],
            );
            let g = random_rotation(2, seed ^ 0x5eed, 0.7).unwrap();
            let b = g.act(&section_embed2(&s)).unwrap();
            match reduce_to_section2(&b, 1e-8) {
                Ok((_, got)) => {
                    assert!(
                        in_section_orbit2(&s, &got, 1e-7),
                        "seed {seed}: {got:?} not in orbit of {s:?}"
                    );
                }
                Err(Error::NotGeneric(_)) => failures += 1,
                Err(e) => panic!("seed {seed}: unexpected error {e}"),
            }
        }
        // Degenerate draws are possible but must be rare.
        assert!(failures <= 2, "{failures} non-generic draws out of 100");
    }

    #[test]
    fn reduce_rejects_non_x_states() {
        for seed in 0..20 {
            let mut rng = SeededRng::new(seed);
            let mut b = BlochState::new(2).unwrap();
            for w in crate::bloch::all_words(2) {
                b.insert(w, rng.complex_normal(1.0)).unwrap();
            }
            match reduce_to_section2(&b, 1e-8) {
                Err(Error::ReductionFailed { .. }) => {}
                Err(Error::NotGeneric(_)) => {}
                other => panic!("seed {seed}: expected failure, got {other:?}"),
            }
        }
    }

    #[test]
    fn reduce_flags_degenerate_inputs() {
        // Equal lambda_1 = lambda_2 kills the discriminant.
        let s = SectionPoint2::new(
            c64(2.0, 0.0),
            c64(3.0, 0.0),
            [c64(1.0, 0.0), c64(1.0, 0.0), c64(5.0, 0.0)],
        );
        assert!(matches!(
            reduce_to_section2(&section_embed2(&s), 1e-8),
            Err(Error::NotGeneric(_))
        ));

        // Zero one-point vector.
        let s = SectionPoint2::new(ZERO, c64(3.0, 0.0), [ONE, c64(2.0, 0.0), c64(5.0, 0.0)]);
        assert!(matches!(
            reduce_to_section2(&section_embed2(&s), 1e-8),
            Err(Error::NotGeneric(_))
        ));
    }

    #[test]
    fn orbit_of_zero_is_zero() {
        let orbit = weyl_orbit_section2(&SectionPoint2::new(ZERO, ZERO, [ZERO; 3]));
        assert_eq!(orbit.len(), 1);
    }

    #[test]
    fn orbit_cardinality_at_generic_point() {
        let s = SectionPoint2::new(
            c64(2.0, 0.0),
            c64(3.0, 0.0),
            [c64(1.0, 0.0), c64(2.0, 0.0), c64(5.0, 0.0)],
        );
        let orbit = weyl_orbit_section2(&s);
        // 32 normalizer elements, but the central element acts trivially on
        // the section: 16 distinct images at a generic point.
        assert_eq!(orbit.len(), 16);
        // Every image satisfies the sign/permutation structure.
        for img in &orbit {
            let sx = img.x / s.x;
            let sy = img.y / s.y;
            let s3 = img.lambda[2] / s.lambda[2];
            for z in [sx, sy, s3] {
                assert!((z - ONE).norm() < 1e-12 || (z + ONE).norm() < 1e-12);
            }
            // Product of the three visible signs is +1, and the product of
            // the planar pair's signs equals the sign on lambda_3.
            let prod = sx * sy * s3;
            let planar = (img.lambda[0] * img.lambda[1]) / (s.lambda[0] * s.lambda[1]);
            // lambda_1, lambda_2 may be swapped; their squared sum is fixed.
            let sum_sq = img.lambda[0] * img.lambda[0] + img.lambda[1] * img.lambda[1];
            let base_sq = s.lambda[0] * s.lambda[0] + s.lambda[1] * s.lambda[1];
            assert!((sum_sq - base_sq).norm() < 1e-12);
            assert!((prod - ONE).norm() < 1e-12);
            assert!((planar - s3).norm() < 1e-12);
        }
    }

    #[test]
    fn all_32_normalizer_elements_preserve_the_section() {
        let s = SectionPoint2::new(
            c64(0.4, 1.1),
            c64(-0.3, 0.2),
            [c64(1.0, -0.5), c64(2.0, 0.3), c64(-0.7, 0.9)],
        );
        let b = section_embed2(&s);
        let elems = section_normalizer2();
        assert_eq!(elems.len(), 32);
        for w in &elems {
            let moved = weyl_embed(w).act(&b).unwrap();
            // Support stays within the section words.
            for (word, v) in moved.components() {
                let name = word.to_string();
                assert!(
                    ["ZI", "IZ", "XX", "YY", "ZZ"].contains(&name.as_str()) || v.norm() < 1e-14,
                    "element moved mass to {name}"
                );
            }
        }
    }

    #[test]
    fn truncate_examples() {
        let p = XFiberPoint::new(2).unwrap();
        let t = truncate_to_xt(&p).unwrap();
        assert!(t.alphas().iter().all(|z| *z == ZERO));
        assert!(t.block(0).iter().all(|z| *z == ZERO));

        let mut p = XFiberPoint::new(2).unwrap();
        let a = c64(0.3, -0.1);
        let b = c64(1.5, 0.2);
        p.insert(PauliWord::parse("ZI").unwrap(), a).unwrap();
        p.insert(PauliWord::parse("IZ").unwrap(), b).unwrap();
        p.insert(PauliWord::parse("XX").unwrap(), c64(1.0, 0.0)).unwrap();
        p.insert(PauliWord::parse("XY").unwrap(), c64(2.0, 0.0)).unwrap();
        p.insert(PauliWord::parse("YX").unwrap(), c64(3.0, 0.0)).unwrap();
        p.insert(PauliWord::parse("YY").unwrap(), c64(4.0, 0.0)).unwrap();
        let t = truncate_to_xt(&p).unwrap();
        assert_eq!(t.alpha(0), a);
        assert_eq!(t.alpha(1), b);
        assert_eq!(t.block(0)[(0, 0)], c64(1.0, 0.0));
        assert_eq!(t.block(0)[(0, 1)], c64(2.0, 0.0));
        assert_eq!(t.block(0)[(1, 0)], c64(3.0, 0.0));
        assert_eq!(t.block(0)[(1, 1)], c64(4.0, 0.0));
    }

    #[test]
    fn truncation_lift_round_trip() {
        for seed in 0..20 {
            let mut rng = SeededRng::new(seed);
            let n = 2 + (seed as usize) % 3;
            let t = XTPoint::random(n, &mut rng).unwrap();
            let back = truncate_to_xt(&t.lift()).unwrap();
            assert_eq!(t, back, "seed {seed}");
        }
    }

    #[test]
    fn coords_round_trip() {
        let mut rng = SeededRng::new(4);
        for n in 2..=4 {
            let t = XTPoint::random(n, &mut rng).unwrap();
            let back = XTPoint::from_coords(n, &t.coords()).unwrap();
            assert_eq!(t, back);
        }
    }
}
