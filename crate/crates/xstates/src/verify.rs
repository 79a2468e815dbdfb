//! Numerical verification harness.
//!
//! Each suite turns one family of structural claims into a reproducible
//! rank or residual computation over seeded random points:
//!
//! * `dims` — the rank of the parametrization Jacobian equals the variety
//!   dimension `2^(2n-1) + 2n - 1`, the infinitesimal orbit rank equals
//!   `3n`, and their difference reproduces the invariant-field
//!   transcendence degree `2^(2n-1) - n - 1`;
//! * `invariance` — the five 2-qubit invariants do not move under random
//!   rotations, and the tilde coordinates do not move under normalizer
//!   elements (rotations, reflections, the central element);
//! * `independence` — Jacobian ranks of the invariant families are full:
//!   5 for the 2-qubit family, `4n-4` for the tilde coordinates on the
//!   truncation, `3n-4` for the rotation-stage coordinates on the edge
//!   blocks, with the orbit rank `n` closing the dimension count;
//! * `torsor` — the determinant/trace invariants of edge blocks satisfy
//!   their defining relation and planted left rotations are recovered;
//! * `separation` — equal invariants on generic 2-qubit states imply equal
//!   orbits, matched explicitly through the 16-image section orbit;
//! * `relations` — diagonal, loop, and `rho` identities of the pairing
//!   matrix hold, and interior longitudinal squares are reconstructed by
//!   the rational formula;
//! * `pattern` — the matrix parity pattern and the admissible-word support
//!   characterize each other.
//!
//! All maps under differentiation are polynomial (hence holomorphic), so
//! complex central differences converge at second order in the step. Rank
//! decisions use a relative singular-value threshold plus a gap audit: the
//! ratio of the last accepted to the first rejected singular value must
//! exceed `10^3`, and points failing the audit are resampled (the claims
//! hold only in general position).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix2, Matrix3};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bloch::{c64, BlochState, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::geometry::{
    dim_formulas, fiber_embed, random_xstate_rng, truncate_to_xt, XFiberPoint,
    XTPoint,
};
use crate::group::{so2_from_gm, weyl_embed, LieTangent, WeylElement};
use crate::invariants::{
    aux_dtab, edge_invariants, eta_reconstruct, p_invariants, quotient_coords,
    torsor_recover, u_matrix, AuxInvariants,
};
use crate::rng::SeededRng;

/// Minimum singular-value gap ratio for a trusted rank decision.
pub const GAP_AUDIT_MIN: f64 = 1e3;

/// Cap used to report audits when no singular value was rejected.
pub const GAP_AUDIT_CAP: f64 = 1e12;

/// Retry budget when a sampled point fails a genericity or audit check.
const RESAMPLE_LIMIT: u32 = 16;

/// Tolerances, trial counts and the base seed of a verification run.
#[derive(Debug, Clone, Copy)]
pub struct ToleranceConfig {
    /// Central-difference step for Jacobians.
    pub fd_step: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_rel_tol: f64,
    /// Residual/deviation tolerance for invariance and identity checks.
    pub residual_tol: f64,
    pub trials: u32,
    pub seed: u64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            fd_step: 1e-6,
            rank_rel_tol: 1e-6,
            residual_tol: 1e-8,
            trials: 20,
            seed: 1,
        }
    }
}

impl ToleranceConfig {
    pub fn with_seed_trials(seed: u64, trials: u32) -> Self {
        Self {
            seed,
            trials,
            ..Self::default()
        }
    }
}

/// Outcome of one suite at one qubit count.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub n: u32,
    pub seed: u64,
    pub trials: u32,
    pub expected: BTreeMap<String, Value>,
    pub observed: BTreeMap<String, Value>,
    pub gap_audit: f64,
    pub pass: bool,
}

impl SuiteReport {
    /// One-line human-readable form, stable across runs.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{:<12} n={} seed={} trials={} ",
            self.suite, self.n, self.seed, self.trials
        );
        let mut parts: Vec<String> = Vec::new();
        for (k, v) in &self.observed {
            parts.push(format!("{k}={v}"));
        }
        let _ = write!(line, "{} ", parts.join(" "));
        let _ = write!(line, "=> {}", if self.pass { "PASS" } else { "FAIL" });
        line
    }
}

/// Finite-difference Jacobian of a holomorphic map: column `k` is
/// `(f(p + h e_k) - f(p - h e_k)) / 2h`.
pub fn jacobian<F>(f: F, point: &[C64], step: f64) -> Result<DMatrix<C64>>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let base = f(point)?;
    let m = base.len();
    let d = point.len();
    let mut out = DMatrix::<C64>::zeros(m, d);
    let h = c64(step, 0.0);
    let two_h = c64(2.0 * step, 0.0);
    let mut shifted = point.to_vec();
    for k in 0..d {
        shifted[k] = point[k] + h;
        let plus = f(&shifted)?;
        shifted[k] = point[k] - h;
        let minus = f(&shifted)?;
        shifted[k] = point[k];
        if plus.len() != m || minus.len() != m {
            return Err(Error::EvaluationError(
                "map output dimension is not constant".into(),
            ));
        }
        for r in 0..m {
            let v = (plus[r] - minus[r]) / two_h;
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::EvaluationError(format!(
                    "non-finite derivative at column {k}"
                )));
            }
            out[(r, k)] = v;
        }
    }
    Ok(out)
}

/// Sorted (descending) singular values.
fn singular_values(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EvaluationError("SVD did not converge".into()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    Ok(sv)
}

/// Number of singular values above `rel_tol` times the largest one;
/// zero for the zero matrix.
pub fn numeric_rank(m: &DMatrix<C64>, rel_tol: f64) -> usize {
    rank_with_audit(m, rel_tol).map(|(r, _)| r).unwrap_or(0)
}

/// Rank decision plus its gap audit: the ratio of the last accepted to the
/// first rejected singular value ([`GAP_AUDIT_CAP`] when nothing was
/// rejected). Small audits flag borderline decisions.
pub fn rank_with_audit(m: &DMatrix<C64>, rel_tol: f64) -> Result<(usize, f64)> {
    let sv = singular_values(m)?;
    if sv.is_empty() || sv[0] == 0.0 {
        return Ok((0, GAP_AUDIT_CAP));
    }
    let threshold = rel_tol * sv[0];
    let rank = sv.iter().take_while(|s| **s > threshold).count();
    let audit = if rank == 0 {
        GAP_AUDIT_CAP
    } else if rank < sv.len() && sv[rank] > 0.0 {
        (sv[rank - 1] / sv[rank]).min(GAP_AUDIT_CAP)
    } else {
        GAP_AUDIT_CAP
    };
    Ok((rank, audit))
}

// ---------------------------------------------------------------------------
// Dense state evaluation for the heavy Jacobians.
//
// A state on n qubits is stored as a vector over base-4 word ids (digit 0 =
// identity letter, 1..3 = x, y, z), qubit 0 in the lowest digit. Acting by
// per-qubit 3x3 blocks is then a strided tensor contraction.
// ---------------------------------------------------------------------------

fn dense_len(n: usize) -> usize {
    4usize.pow(n as u32)
}

fn word_id(word: &crate::bloch::PauliWord) -> usize {
    word.letters()
        .iter()
        .enumerate()
        .map(|(q, l)| l.axis().map_or(0, |a| a + 1) << (2 * q))
        .sum()
}

/// Apply `block` on the letter slot of qubit `q`, sending the identity
/// digit to itself (`keep_identity`) or to zero (the Leibniz term of the
/// infinitesimal action).
fn dense_apply_site(
    n: usize,
    q: usize,
    block: &Matrix3<C64>,
    state: &[C64],
    keep_identity: bool,
) -> Vec<C64> {
    let len = dense_len(n);
    let stride = 1usize << (2 * q);
    let mut out = vec![ZERO; len];
    for i in 0..len {
        let digit = (i >> (2 * q)) & 3;
        if digit != 0 {
            continue;
        }
        if keep_identity {
            out[i] = state[i];
        }
        for dst in 0..3 {
            let mut acc = ZERO;
            for src in 0..3 {
                let v = state[i + (src + 1) * stride];
                if v != ZERO {
                    acc += block[(dst, src)] * v;
                }
            }
            out[i + (dst + 1) * stride] = acc;
        }
    }
    out
}

fn dense_act(n: usize, blocks: &[Matrix3<C64>], state: Vec<C64>) -> Vec<C64> {
    let mut s = state;
    for (q, block) in blocks.iter().enumerate() {
        s = dense_apply_site(n, q, block, &s, true);
    }
    s
}

fn dense_infinitesimal(n: usize, blocks: &[Matrix3<C64>], state: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; dense_len(n)];
    for (q, block) in blocks.iter().enumerate() {
        let term = dense_apply_site(n, q, block, state, false);
        for (o, t) in out.iter_mut().zip(term) {
            *o += t;
        }
    }
    out
}

/// Strip the identity-word slot, keeping ascending word-id order. Note the
/// id order differs from the lexicographic word order; rank computations do
/// not care, but reconstruction must go through [`word_id`].
fn dense_flatten(n: usize, state: &[C64]) -> Vec<C64> {
    state[1..dense_len(n)].to_vec()
}

/// Rebuild a sparse state from a dense id-indexed vector.
fn dense_to_state(n: usize, state: &[C64]) -> Result<BlochState> {
    let mut b = BlochState::new(n)?;
    for w in crate::bloch::all_words(n) {
        let v = state[word_id(&w)];
        if v != ZERO {
            b.insert(w, v)?;
        }
    }
    Ok(b)
}

fn dense_from_fiber_coords(n: usize, words: &[crate::bloch::PauliWord], coords: &[C64]) -> Vec<C64> {
    let mut s = vec![ZERO; dense_len(n)];
    for (w, v) in words.iter().zip(coords) {
        s[word_id(w)] = *v;
    }
    s
}

/// The parametrization map: `(lie coords, fiber coords) -> flattened state
/// act(exp(X), embed(fiber))`. Drives the dimension and transcendence
/// degree checks.
fn param_map(n: usize) -> impl Fn(&[C64]) -> Result<Vec<C64>> {
    let words = XFiberPoint::admissible_words(n);
    move |coords: &[C64]| {
        let lie = LieTangent::from_coordinates(n, &coords[..3 * n])?;
        let g = lie.exp();
        let state = dense_from_fiber_coords(n, &words, &coords[3 * n..]);
        let moved = dense_act(n, g.blocks(), state);
        Ok(dense_flatten(n, &moved))
    }
}

/// Random base point of the parametrization domain: a small random group
/// coordinate plus a dense random fiber.
fn param_base_point(n: usize, rng: &mut SeededRng) -> Vec<C64> {
    let fiber_dim = XFiberPoint::admissible_words(n).len();
    let mut coords = Vec::with_capacity(3 * n + fiber_dim);
    for _ in 0..3 * n {
        coords.push(rng.complex_normal(0.3));
    }
    for _ in 0..fiber_dim {
        coords.push(rng.complex_normal(1.0));
    }
    coords
}

/// Columns are the infinitesimal actions of the coordinate basis tangents
/// at the state reached by `coords`; exact, no finite differences.
fn orbit_matrix(n: usize, coords: &[C64]) -> Result<DMatrix<C64>> {
    let words = XFiberPoint::admissible_words(n);
    let lie = LieTangent::from_coordinates(n, &coords[..3 * n])?;
    let state = dense_act(
        n,
        lie.exp().blocks(),
        dense_from_fiber_coords(n, &words, &coords[3 * n..]),
    );
    let rows = dense_len(n) - 1;
    let mut m = DMatrix::<C64>::zeros(rows, 3 * n);
    for (k, tangent) in LieTangent::basis(n).iter().enumerate() {
        let blocks: Vec<Matrix3<C64>> = (0..n).map(|q| *tangent.block(q)).collect();
        let col = dense_flatten(n, &dense_infinitesimal(n, &blocks, &state));
        for (r, v) in col.into_iter().enumerate() {
            m[(r, k)] = v;
        }
    }
    Ok(m)
}

struct AuditTracker {
    min: f64,
}

impl AuditTracker {
    fn new() -> Self {
        Self { min: GAP_AUDIT_CAP }
    }

    fn record(&mut self, audit: f64) {
        self.min = self.min.min(audit);
    }
}

fn report(
    suite: &str,
    n: u32,
    cfg: &ToleranceConfig,
    expected: BTreeMap<String, Value>,
    observed: BTreeMap<String, Value>,
    gap_audit: f64,
    pass: bool,
) -> SuiteReport {
    SuiteReport {
        suite: suite.into(),
        n,
        seed: cfg.seed,
        trials: cfg.trials,
        expected,
        observed,
        gap_audit,
        pass,
    }
}

/// Dimension suite: parametrization rank, orbit rank, their difference,
/// and the integer identity `dim_F + (4n - 4) = trdeg`.
pub fn suite_dims(n: u32, cfg: &ToleranceConfig) -> Result<SuiteReport> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidArgument("dims suite supports n = 2..4".into()));
    }
    let dims = dim_formulas(n)?;
    let map = param_map(n as usize);
    let mut audits = AuditTracker::new();

    let mut param_min = usize::MAX;
    let mut param_max = 0usize;
    let mut orbit_min = usize::MAX;
    let mut orbit_max = 0usize;
    let mut trdeg_ok = 0u32;
    let mut fd_stable = true;

    for trial in 0..cfg.trials {
        let mut rng = SeededRng::for_trial(cfg.seed, trial as u64);
        let mut accepted = None;
        for _ in 0..RESAMPLE_LIMIT {
            let point = param_base_point(n as usize, &mut rng);
            let jac = jacobian(&map, &point, cfg.fd_step)?;
            let (p_rank, p_audit) = rank_with_audit(&jac, cfg.rank_rel_tol)?;
            let orbit = orbit_matrix(n as usize, &point)?;
            let (o_rank, o_audit) = rank_with_audit(&orbit, cfg.rank_rel_tol)?;
            if p_audit >= GAP_AUDIT_MIN && o_audit >= GAP_AUDIT_MIN {
                accepted = Some((point, p_rank, p_audit, o_rank, o_audit));
                break;
            }
        }
        let (point, p_rank, p_audit, o_rank, o_audit) =
            accepted.ok_or(Error::DegenerateSample)?;
        audits.record(p_audit);
        audits.record(o_audit);
        param_min = param_min.min(p_rank);
        param_max = param_max.max(p_rank);
        orbit_min = orbit_min.min(o_rank);
        orbit_max = orbit_max.max(o_rank);
        if p_rank as u64 - o_rank as u64 == dims.trdeg {
            trdeg_ok += 1;
        }

        if trial == 0 {
            // Rank decisions must be stable across a decade of steps.
            for factor in [0.1, 10.0] {
                let jac = jacobian(&map, &point, cfg.fd_step * factor)?;
                let (r, _) = rank_with_audit(&jac, cfg.rank_rel_tol)?;
                if r != p_rank {
                    fd_stable = false;
                }
            }
        }
    }

    let dim_identity = dims.dim_f + (4 * n as u64 - 4) == dims.trdeg;
    let pass = param_min == param_max
        && param_max as u64 == dims.dim_variety
        && orbit_min == orbit_max
        && orbit_max as u64 == 3 * n as u64
        && trdeg_ok == cfg.trials
        && dim_identity
        && fd_stable;

    let expected = BTreeMap::from([
        ("param_rank".into(), json!(dims.dim_variety)),
        ("orbit_rank".into(), json!(3 * n)),
        ("trdeg".into(), json!(dims.trdeg)),
        ("dim_identity".into(), json!(true)),
        ("fd_stable".into(), json!(true)),
    ]);
    let observed = BTreeMap::from([
        ("param_rank_min".into(), json!(param_min)),
        ("param_rank_max".into(), json!(param_max)),
        ("orbit_rank_min".into(), json!(orbit_min)),
        ("orbit_rank_max".into(), json!(orbit_max)),
        ("trdeg_ok".into(), json!(trdeg_ok)),
        ("dim_identity".into(), json!(dim_identity)),
        ("fd_stable".into(), json!(fd_stable)),
    ]);
    Ok(report("dims", n, cfg, expected, observed, audits.min, pass))
}

/// Invariance suite: deviation of the 2-qubit invariants under random
/// rotations (n = 2 only) and of the tilde coordinates under normalizer
/// elements, with the reflection generators and the central element
/// explicitly included.
pub fn suite_invariance(n: u32, cfg: &ToleranceConfig) -> Result<SuiteReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("invariance suite needs n >= 2".into()));
    }
    let nn = n as usize;
    let mut max_p_dev = 0.0f64;
    let mut max_q_dev = 0.0f64;
    let mut central_dev = 0.0f64;

    for trial in 0..cfg.trials {
        let mut rng = SeededRng::for_trial(cfg.seed, trial as u64);

        if n == 2 {
            let (state, _) = random_xstate_rng(2, &mut rng)?;
            let g = crate::group::random_rotation_rng(2, &mut rng, 0.7);
            let before = p_invariants(&state)?;
            let after = p_invariants(&g.act(&state)?)?;
            max_p_dev = max_p_dev.max(before.max_relative_difference(&after));
        }

        let fiber = XFiberPoint::random(nn, &mut rng)?;
        let base = quotient_coords(&truncate_to_xt(&fiber)?);
        let w = match trial % 8 {
            0 => WeylElement::central(nn),
            1 => {
                let mut blocks = vec![Matrix2::identity(); nn];
                blocks[0] = Matrix2::new(ONE, ZERO, ZERO, -ONE);
                WeylElement::new(blocks)?
            }
            2 => {
                let mut blocks = vec![Matrix2::identity(); nn];
                blocks[nn - 1] = Matrix2::new(ONE, ZERO, ZERO, -ONE);
                WeylElement::new(blocks)?
            }
            _ => crate::group::weyl_sample_rng(nn, &mut rng, 0.6, true),
        };
        let moved = weyl_embed(&w).act(&fiber_embed(&fiber))?;
        let moved_fiber = XFiberPoint::from_bloch_state(&moved, 1e-12)?;
        let got = quotient_coords(&truncate_to_xt(&moved_fiber)?);
        max_q_dev = max_q_dev.max(base.max_relative_difference(&got));

        if trial == 0 {
            // The central element must fix the fiber itself, not only the
            // invariants.
            let fixed = weyl_embed(&WeylElement::central(nn)).act(&fiber_embed(&fiber))?;
            central_dev = fiber_embed(&fiber).max_difference(&fixed);
        }
    }

    let pass = max_p_dev < cfg.residual_tol
        && max_q_dev < cfg.residual_tol
        && central_dev < 1e-14;
    let expected = BTreeMap::from([
        ("max_p_dev".into(), json!(format!("<{:e}", cfg.residual_tol))),
        ("max_q_dev".into(), json!(format!("<{:e}", cfg.residual_tol))),
        ("central_dev".into(), json!("<1e-14")),
    ]);
    let observed = BTreeMap::from([
        ("max_p_dev".into(), json!(max_p_dev)),
        ("max_q_dev".into(), json!(max_q_dev)),
        ("central_dev".into(), json!(central_dev)),
    ]);
    Ok(report(
        "invariance",
        n,
        cfg,
        expected,
        observed,
        GAP_AUDIT_CAP,
        pass,
    ))
}

/// Values of the rotation-stage coordinates `(t_k, delta_k, u~_j)` on the
/// edge blocks; requires `delta_1^2 != t_1^2` (localization).
fn wprime_stage_coords(aux: &[AuxInvariants]) -> Result<Vec<C64>> {
    let u = u_matrix(aux);
    let base = aux[0].delta * aux[0].delta - aux[0].t * aux[0].t;
    let scale = 1.0 + (aux[0].delta.norm() + aux[0].t.norm()).powi(2);
    if base.norm() <= 1e-10 * scale {
        return Err(Error::LocalizationViolated(base.norm()));
    }
    let mut out = Vec::with_capacity(3 * (aux.len() + 1) - 4);
    out.extend(aux.iter().map(|i| i.t));
    out.extend(aux.iter().map(|i| i.delta));
    for j in 1..aux.len() {
        out.push(u[(0, j)] / base);
    }
    Ok(out)
}

/// Independence suite: full Jacobian ranks for the invariant families and
/// the orbit/coordinate dimension split on the truncation.
pub fn suite_independence(n: u32, cfg: &ToleranceConfig) -> Result<SuiteReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("independence suite needs n >= 2".into()));
    }
    let nn = n as usize;
    let mut audits = AuditTracker::new();

    let tilde_expected = (4 * n - 4) as usize;
    let wprime_expected = (3 * n - 4) as usize;
    let mut tilde_min = usize::MAX;
    let mut tilde_max = 0usize;
    let mut wprime_min = usize::MAX;
    let mut wprime_max = 0usize;
    let mut worbit_min = usize::MAX;
    let mut worbit_max = 0usize;
    let mut p_rank_common: Option<usize> = None;
    let mut dup_rank_common: Option<usize> = None;
    let mut rank_sum_ok = true;

    // Map from truncated coordinates to the tilde invariants.
    let tilde_map = |coords: &[C64]| -> Result<Vec<C64>> {
        let p = XTPoint::from_coords(nn, coords)?;
        Ok(quotient_coords(&p).as_vec())
    };
    // Map from edge-block coordinates to the rotation-stage coordinates.
    let wprime_map = |coords: &[C64]| -> Result<Vec<C64>> {
        let aux: Vec<AuxInvariants> = (0..nn - 1)
            .map(|j| {
                let o = 4 * j;
                aux_dtab(&Matrix2::new(
                    coords[o],
                    coords[o + 1],
                    coords[o + 2],
                    coords[o + 3],
                ))
            })
            .collect();
        wprime_stage_coords(&aux)
    };

    for trial in 0..cfg.trials {
        let mut rng = SeededRng::for_trial(cfg.seed.wrapping_add(0x1000), trial as u64);
        let mut accepted = false;
        for _ in 0..RESAMPLE_LIMIT {
            let pt = XTPoint::random(nn, &mut rng)?;
            let coords = pt.coords();

            let jac_tilde = jacobian(tilde_map, &coords, cfg.fd_step)?;
            let (t_rank, t_audit) = rank_with_audit(&jac_tilde, cfg.rank_rel_tol)?;

            let block_coords = &coords[nn..];
            let jac_w = match jacobian(wprime_map, block_coords, cfg.fd_step) {
                Ok(j) => j,
                Err(Error::LocalizationViolated(_)) => continue,
                Err(e) => return Err(e),
            };
            let (w_rank, w_audit) = rank_with_audit(&jac_w, cfg.rank_rel_tol)?;

            // Infinitesimal rotation-orbit directions on the truncation:
            // one generator per qubit, exact columns.
            let gen = Matrix2::new(ZERO, -ONE, ONE, ZERO);
            let mut orbit = DMatrix::<C64>::zeros(5 * nn - 4, nn);
            for q in 0..nn {
                let mut blocks: Vec<Matrix2<C64>> =
                    vec![Matrix2::from_element(ZERO); nn - 1];
                if q < nn - 1 {
                    blocks[q] = gen * pt.block(q);
                } else {
                    for (j, b) in blocks.iter_mut().enumerate() {
                        *b = pt.block(j) * gen.transpose();
                    }
                }
                let d = XTPoint::new(vec![ZERO; nn], blocks)?;
                for (r, v) in d.coords().into_iter().enumerate() {
                    orbit[(r, q)] = v;
                }
            }
            let (o_rank, o_audit) = rank_with_audit(&orbit, cfg.rank_rel_tol)?;

            if t_audit < GAP_AUDIT_MIN || w_audit < GAP_AUDIT_MIN || o_audit < GAP_AUDIT_MIN {
                continue;
            }
            audits.record(t_audit);
            audits.record(w_audit);
            audits.record(o_audit);
            tilde_min = tilde_min.min(t_rank);
            tilde_max = tilde_max.max(t_rank);
            wprime_min = wprime_min.min(w_rank);
            wprime_max = wprime_max.max(w_rank);
            worbit_min = worbit_min.min(o_rank);
            worbit_max = worbit_max.max(o_rank);
            if t_rank + o_rank != 5 * nn - 4 {
                rank_sum_ok = false;
            }
            accepted = true;
            break;
        }
        if !accepted {
            return Err(Error::DegenerateSample);
        }

        if n == 2 && trial == 0 {
            // The five-invariant chain on the parametrization domain.
            let words2 = XFiberPoint::admissible_words(2);
            let chain = move |coords: &[C64]| -> Result<Vec<C64>> {
                let lie = LieTangent::from_coordinates(2, &coords[..6])?;
                let state = dense_act(
                    2,
                    lie.exp().blocks(),
                    dense_from_fiber_coords(2, &words2, &coords[6..]),
                );
                let b = dense_to_state(2, &state)?;
                Ok(p_invariants(&b)?.p.to_vec())
            };
            let dup_chain = |coords: &[C64]| -> Result<Vec<C64>> {
                let mut vals = chain(coords)?;
                vals.push(vals[0]);
                Ok(vals)
            };
            let mut rng2 = SeededRng::for_trial(cfg.seed.wrapping_add(0x2000), trial as u64);
            for _ in 0..RESAMPLE_LIMIT {
                let point = param_base_point(2, &mut rng2);
                let jac = jacobian(&chain, &point, cfg.fd_step)?;
                let (r, audit) = rank_with_audit(&jac, cfg.rank_rel_tol)?;
                if audit < GAP_AUDIT_MIN {
                    continue;
                }
                let jac_dup = jacobian(dup_chain, &point, cfg.fd_step)?;
                let (r_dup, audit_dup) = rank_with_audit(&jac_dup, cfg.rank_rel_tol)?;
                if audit_dup < GAP_AUDIT_MIN {
                    continue;
                }
                audits.record(audit);
                audits.record(audit_dup);
                p_rank_common = Some(r);
                dup_rank_common = Some(r_dup);
                break;
            }
        }
    }

    let p_rank_ok = n != 2 || (p_rank_common == Some(5) && dup_rank_common == Some(5));
    let pass = tilde_min == tilde_max
        && tilde_max == tilde_expected
        && wprime_min == wprime_max
        && wprime_max == wprime_expected
        && worbit_min == worbit_max
        && worbit_max == nn
        && rank_sum_ok
        && p_rank_ok;

    let mut expected = BTreeMap::from([
        ("tilde_rank".into(), json!(tilde_expected)),
        ("wprime_rank".into(), json!(wprime_expected)),
        ("worbit_rank".into(), json!(nn)),
        ("rank_sum".into(), json!(5 * nn - 4)),
    ]);
    let mut observed = BTreeMap::from([
        ("tilde_rank_min".into(), json!(tilde_min)),
        ("tilde_rank_max".into(), json!(tilde_max)),
        ("wprime_rank_min".into(), json!(wprime_min)),
        ("wprime_rank_max".into(), json!(wprime_max)),
        ("worbit_rank_min".into(), json!(worbit_min)),
        ("worbit_rank_max".into(), json!(worbit_max)),
        ("rank_sum_ok".into(), json!(rank_sum_ok)),
    ]);
    if n == 2 {
        expected.insert("p_rank".into(), json!(5));
        expected.insert("dup_control_rank".into(), json!(5));
        observed.insert("p_rank".into(), json!(p_rank_common));
        observed.insert("dup_control_rank".into(), json!(dup_rank_common));
    }
    Ok(report(
        "independence",
        n,
        cfg,
        expected,
        observed,
        audits.min,
        pass,
    ))
}

/// Torsor suite: the defining relation of the block invariants and the
/// recovery of planted left rotations over the nondegenerate locus.
pub fn suite_torsor(cfg: &ToleranceConfig) -> Result<SuiteReport> {
    let mut max_relation = 0.0f64;
    let mut max_recovery = 0.0f64;
    let mut degenerate_rejected = false;

    for trial in 0..cfg.trials {
        let mut rng = SeededRng::for_trial(cfg.seed.wrapping_add(0x3000), trial as u64);
        let m = rng.complex_normal_mat2(1.0);
        max_relation = max_relation.max(aux_dtab(&m).relation_residual());

        if aux_dtab(&m).delta.norm() > 1e-3 {
            let lambda = rng.complex_normal(1.0).exp();
            let rot = so2_from_gm(lambda)?;
            let m_prime = rot * m;
            let got = torsor_recover(&m, &m_prime, 1e-8)?;
            let scale = 1.0 + rot.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let err = (got - rot).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale;
            max_recovery = max_recovery.max(err);
        }

        if trial == 0 {
            // A rank-one matrix has delta = 0 and must be rejected.
            let rank1 = Matrix2::new(ONE, c64(2.0, 0.0), c64(3.0, 0.0), c64(6.0, 0.0));
            degenerate_rejected =
                matches!(torsor_recover(&rank1, &rank1, 1e-8), Err(Error::Degenerate(_)));
        }
    }

    let pass = max_relation < 1e-10 && max_recovery < 1e-9 && degenerate_rejected;
    let expected = BTreeMap::from([
        ("max_relation_residual".into(), json!("<1e-10")),
        ("max_recovery_error".into(), json!("<1e-9")),
        ("degenerate_rejected".into(), json!(true)),
    ]);
    let observed = BTreeMap::from([
        ("max_relation_residual".into(), json!(max_relation)),
        ("max_recovery_error".into(), json!(max_recovery)),
        ("degenerate_rejected".into(), json!(degenerate_rejected)),
    ]);
    Ok(report(
        "torsor",
        2,
        cfg,
        expected,
        observed,
        GAP_AUDIT_CAP,
        pass,
    ))
}

/// Separation suite (two qubits): states in one orbit share invariants and
/// reduce into one section orbit; independent generic states are told
/// apart by the invariants alone.
pub fn suite_separation2(cfg: &ToleranceConfig) -> Result<SuiteReport> {
    let mut planted_matched = 0u32;
    let mut false_matches = 0u32;
    let match_tol = 1e-6;

    for trial in 0..cfg.trials {
        let mut rng = SeededRng::for_trial(cfg.seed.wrapping_add(0x4000), trial as u64);

        // Planted pair: two pushes of one state.
        let mut planted_ok = false;
        for _ in 0..RESAMPLE_LIMIT {
            let (base, _) = random_xstate_rng(2, &mut rng)?;
            let g1 = crate::group::random_rotation_rng(2, &mut rng, 0.7);
            let g2 = crate::group::random_rotation_rng(2, &mut rng, 0.7);
            let b1 = g1.act(&base)?;
            let b2 = g2.act(&base)?;
            let p1 = p_invariants(&b1)?;
            let p2 = p_invariants(&b2)?;
            if p1.max_relative_difference(&p2) > match_tol {
                continue;
            }
            let r1 = reduce_section_retryable(&b1);
            let r2 = reduce_section_retryable(&b2);
            match (r1, r2) {
                (Some(s1), Some(s2)) => {
                    if crate::geometry::in_section_orbit2(&s1, &s2, match_tol) {
                        planted_ok = true;
                    }
                    break;
                }
                _ => continue, // non-generic draw; resample
            }
        }
        if planted_ok {
            planted_matched += 1;
        }

        // Independent pair: invariants must differ.
        let (c1, _) = random_xstate_rng(2, &mut rng)?;
        let (c2, _) = random_xstate_rng(2, &mut rng)?;
        let q1 = p_invariants(&c1)?;
        let q2 = p_invariants(&c2)?;
        if q1.max_relative_difference(&q2) <= match_tol {
            false_matches += 1;
        }
    }

    let pass = planted_matched == cfg.trials && false_matches == 0;
    let expected = BTreeMap::from([
        ("planted_matched".into(), json!(cfg.trials)),
        ("false_matches".into(), json!(0)),
    ]);
    let observed = BTreeMap::from([
        ("planted_matched".into(), json!(planted_matched)),
        ("false_matches".into(), json!(false_matches)),
    ]);
    Ok(report(
        "separation",
        2,
        cfg,
        expected,
        observed,
        GAP_AUDIT_CAP,
        pass,
    ))
}

fn reduce_section_retryable(b: &BlochState) -> Option<crate::geometry::SectionPoint2> {
    match crate::geometry::reduce_to_section2(b, 1e-8) {
        Ok((_, s)) => Some(s),
        Err(_) => None,
    }
}

/// Relations suite: diagonal and loop identities of the pairing matrix,
/// the vanishing of `rho`, and the reconstruction of interior longitudinal
/// squares on random truncated points.
pub fn suite_relations(n: u32, cfg: &ToleranceConfig) -> Result<SuiteReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("relations suite needs n >= 2".into()));
    }
    let nn = n as usize;
    let edges = nn - 1;
    let mut max_diag = 0.0f64;
    let mut max_loop2 = 0.0f64;
    let mut max_loop3 = 0.0f64;
    let mut max_rho = 0.0f64;
    let mut max_eta = 0.0f64;

    for trial in 0..cfg.trials {
        let mut rng = SeededRng::for_trial(cfg.seed.wrapping_add(0x5000), trial as u64);
        let p = XTPoint::random(nn, &mut rng)?;
        let aux = edge_invariants(&p);
        let u = u_matrix(&aux);
        let td = |k: usize| aux[k].t * aux[k].t - aux[k].delta * aux[k].delta;

        for k in 0..edges {
            let rhs = td(k);
            let res = (u[(k, k)] - rhs).norm() / (1.0 + rhs.norm());
            max_diag = max_diag.max(res);
        }
        for j in 0..edges {
            for k in j + 1..edges {
                let lhs = u[(j, k)] * u[(k, j)];
                let rhs = td(j) * td(k);
                max_loop2 = max_loop2.max((lhs - rhs).norm() / (1.0 + rhs.norm()));
            }
        }
        if edges >= 3 {
            for j in 0..edges {
                for k in j + 1..edges {
                    for l in k + 1..edges {
                        let lhs = u[(j, k)] * u[(k, l)] * u[(l, j)];
                        let rhs = td(j) * td(k) * td(l);
                        max_loop3 = max_loop3.max((lhs - rhs).norm() / (1.0 + rhs.norm()));
                    }
                }
            }
        }
        for j in 2..=edges {
            let rho = crate::invariants::relation_rho(&p, j)?;
            let scale = 1.0 + (td(j - 1) * td(0)).norm();
            max_rho = max_rho.max(rho.norm() / scale);
        }

        if nn >= 3 {
            let q = quotient_coords(&p);
            for j in 2..nn {
                match eta_reconstruct(&q, j) {
                    Ok(eta) => {
                        let expected = p.alpha(j - 1) * p.alpha(j - 1);
                        max_eta = max_eta
                            .max((eta - expected).norm() / (1.0 + expected.norm()));
                    }
                    Err(Error::LocalizationViolated(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let pass = max_diag < 1e-10
        && max_loop2 < 1e-10
        && max_loop3 < 1e-10
        && max_rho < 1e-10
        && max_eta < cfg.residual_tol.max(1e-8);
    let expected = BTreeMap::from([
        ("max_diag_residual".into(), json!("<1e-10")),
        ("max_loop2_residual".into(), json!("<1e-10")),
        ("max_loop3_residual".into(), json!("<1e-10")),
        ("max_rho_residual".into(), json!("<1e-10")),
        ("max_eta_error".into(), json!("<1e-8")),
    ]);
    let observed = BTreeMap::from([
        ("max_diag_residual".into(), json!(max_diag)),
        ("max_loop2_residual".into(), json!(max_loop2)),
        ("max_loop3_residual".into(), json!(max_loop3)),
        ("max_rho_residual".into(), json!(max_rho)),
        ("max_eta_error".into(), json!(max_eta)),
    ]);
    Ok(report(
        "relations",
        n,
        cfg,
        expected,
        observed,
        GAP_AUDIT_CAP,
        pass,
    ))
}

/// Pattern suite: fibers produce parity-patterned matrices and
/// parity-patterned matrices have admissible Bloch support, both exactly.
pub fn suite_pattern(n: u32, cfg: &ToleranceConfig) -> Result<SuiteReport> {
    if n < 1 {
        return Err(Error::InvalidArgument("pattern suite needs n >= 1".into()));
    }
    let nn = n as usize;
    let dim = 1usize << nn;
    let mut fiber_failures = 0u32;
    let mut matrix_failures = 0u32;
    let mut max_offparity = 0.0f64;
    let mut max_inadmissible = 0.0f64;

    for trial in 0..cfg.trials {
        let mut rng = SeededRng::for_trial(cfg.seed.wrapping_add(0x6000), trial as u64);

        let fiber = XFiberPoint::random(nn, &mut rng)?;
        let d = crate::bloch::from_bloch(&fiber_embed(&fiber));
        if !crate::geometry::is_x_pattern(&d, 1e-12) {
            fiber_failures += 1;
        }
        for r in 0..dim {
            for c in 0..dim {
                if (r.count_ones() + c.count_ones()) % 2 == 1 {
                    max_offparity = max_offparity.max(d.matrix()[(r, c)].norm());
                }
            }
        }

        // Random parity-patterned matrix, trace-normalized.
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                if (r.count_ones() + c.count_ones()) % 2 == 0 {
                    m[(r, c)] = rng.complex_normal(1.0);
                }
            }
        }
        let tr: C64 = m.diagonal().iter().sum();
        if tr.norm() < 1e-6 {
            continue;
        }
        let m = m / tr;
        let b = crate::bloch::to_bloch(&crate::bloch::DensityMatrix::new(nn, m)?)?;
        let mut bad = 0.0f64;
        for (w, v) in b.components() {
            if !crate::geometry::is_admissible(w) {
                bad = bad.max(v.norm());
            }
        }
        max_inadmissible = max_inadmissible.max(bad);
        if bad > 1e-12 {
            matrix_failures += 1;
        }
    }

    let pass = fiber_failures == 0
        && matrix_failures == 0
        && max_offparity <= 1e-12
        && max_inadmissible <= 1e-12;
    let expected = BTreeMap::from([
        ("fiber_failures".into(), json!(0)),
        ("matrix_failures".into(), json!(0)),
        ("max_offparity".into(), json!("<=1e-12")),
        ("max_inadmissible".into(), json!("<=1e-12")),
    ]);
    let observed = BTreeMap::from([
        ("fiber_failures".into(), json!(fiber_failures)),
        ("matrix_failures".into(), json!(matrix_failures)),
        ("max_offparity".into(), json!(max_offparity)),
        ("max_inadmissible".into(), json!(max_inadmissible)),
    ]);
    Ok(report(
        "pattern",
        n,
        cfg,
        expected,
        observed,
        GAP_AUDIT_CAP,
        pass,
    ))
}

/// Suite names accepted by the command-line runner, in canonical order.
pub fn suite_names() -> &'static [&'static str] {
    &[
        "dims",
        "independence",
        "invariance",
        "pattern",
        "relations",
        "separation",
        "torsor",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::all_words;
    use crate::geometry::{section_embed2, SectionPoint2};

    fn cv(re: f64, im: f64) -> C64 {
        c64(re, im)
    }

    #[test]
    fn jacobian_of_linear_map() {
        let a = DMatrix::<C64>::from_row_slice(
            2,
            3,
            &[
                cv(1.0, 0.0),
                cv(2.0, -1.0),
                cv(0.0, 3.0),
                cv(-1.0, 0.5),
                cv(4.0, 0.0),
                cv(0.0, 0.0),
            ],
        );
        let a2 = a.clone();
        let f = move |z: &[C64]| -> Result<Vec<C64>> {
            let v = nalgebra::DVector::from_column_slice(z);
            Ok((&a2 * v).iter().copied().collect())
        };
        let point = [cv(0.3, 0.1), cv(-0.2, 0.4), cv(1.0, -1.0)];
        let jac = jacobian(f, &point, 1e-6).unwrap();
        assert!((jac - a).iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn jacobian_of_square() {
        let f = |z: &[C64]| -> Result<Vec<C64>> { Ok(vec![z[0] * z[0]]) };
        let jac = jacobian(f, &[cv(3.0, 0.0)], 1e-6).unwrap();
        assert!((jac[(0, 0)] - cv(6.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn jacobian_matches_hand_derivatives_of_section_invariants() {
        // On the section the five invariants restrict to
        // (x^2, y^2, l3 x y, l1^2 + l2^2 + l3^2, l1 l2 l3); differentiate
        // by hand and compare.
        let f = |z: &[C64]| -> Result<Vec<C64>> {
            let s = SectionPoint2::new(z[0], z[1], [z[2], z[3], z[4]]);
            Ok(p_invariants(&section_embed2(&s))?.p.to_vec())
        };
        let (x, y) = (cv(2.0, 0.5), cv(3.0, -0.2));
        let l = [cv(1.0, 0.1), cv(2.0, -0.3), cv(5.0, 0.0)];
        let point = [x, y, l[0], l[1], l[2]];
        let jac = jacobian(f, &point, 1e-6).unwrap();
        let two = cv(2.0, 0.0);
        // Row 0: d(x^2) = (2x, 0, 0, 0, 0).
        assert!((jac[(0, 0)] - two * x).norm() < 1e-8);
        assert!(jac[(0, 1)].norm() < 1e-8);
        // Row 2: d(l3 x y) = (l3 y, l3 x, 0, 0, x y).
        assert!((jac[(2, 0)] - l[2] * y).norm() < 1e-7);
        assert!((jac[(2, 1)] - l[2] * x).norm() < 1e-7);
        assert!((jac[(2, 4)] - x * y).norm() < 1e-7);
        // Row 3: d(sum of squares) = 2 l_i in the lambda slots.
        for k in 0..3 {
            assert!((jac[(3, 2 + k)] - two * l[k]).norm() < 1e-7);
        }
        // Row 4: d(l1 l2 l3).
        assert!((jac[(4, 2)] - l[1] * l[2]).norm() < 1e-7);
        assert!((jac[(4, 3)] - l[0] * l[2]).norm() < 1e-7);
        assert!((jac[(4, 4)] - l[0] * l[1]).norm() < 1e-7);
    }

    #[test]
    fn numeric_rank_basics() {
        let id = DMatrix::<C64>::identity(5, 5);
        assert_eq!(numeric_rank(&id, 1e-6), 5);

        // Outer product: rank one.
        let u = nalgebra::DVector::from_fn(7, |i, _| cv(1.0 + i as f64, 0.5));
        let v = nalgebra::DVector::from_fn(4, |i, _| cv(1.0, -(i as f64)));
        let m = &u * v.transpose();
        assert_eq!(numeric_rank(&m, 1e-6), 1);

        let zero = DMatrix::<C64>::zeros(3, 3);
        assert_eq!(numeric_rank(&zero, 1e-6), 0);
    }

    #[test]
    fn dense_evaluation_matches_sparse_ops() {
        for n in [2usize, 3] {
            let mut rng = SeededRng::new(5 + n as u64);
            let fiber = XFiberPoint::random(n, &mut rng).unwrap();
            let g = crate::group::random_rotation_rng(n, &mut rng, 0.7);

            let words = XFiberPoint::admissible_words(n);
            let coords: Vec<C64> = words.iter().map(|w| fiber.coefficient(w)).collect();
            let dense = dense_act(
                n,
                g.blocks(),
                dense_from_fiber_coords(n, &words, &coords),
            );
            let sparse = g.act(&fiber_embed(&fiber)).unwrap();
            for w in all_words(n) {
                assert!(
                    (sparse.component(&w) - dense[word_id(&w)]).norm() < 1e-12,
                    "n {n} word {w}"
                );
            }

            // Infinitesimal action agreement.
            let coords_lie: Vec<C64> = (0..3 * n).map(|_| rng.complex_normal(1.0)).collect();
            let tangent = LieTangent::from_coordinates(n, &coords_lie).unwrap();
            let blocks: Vec<Matrix3<C64>> = (0..n).map(|q| *tangent.block(q)).collect();
            let state = dense_from_fiber_coords(n, &words, &coords);
            let dense_inf = dense_infinitesimal(n, &blocks, &state);
            let sparse_inf = tangent.apply(&fiber_embed(&fiber)).unwrap();
            for w in all_words(n) {
                assert!((sparse_inf.component(&w) - dense_inf[word_id(&w)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn word_id_is_a_bijection_onto_nonzero_ids() {
        for n in [2usize, 3] {
            let words = all_words(n);
            let mut ids: Vec<usize> = words.iter().map(word_id).collect();
            ids.sort_unstable();
            let expected: Vec<usize> = (1..dense_len(n)).collect();
            assert_eq!(ids, expected);
        }
    }

    #[test]
    fn suite_dims_n2() {
        let cfg = ToleranceConfig::with_seed_trials(1, 5);
        let rep = suite_dims(2, &cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.observed["param_rank_max"], json!(11));
        assert_eq!(rep.observed["orbit_rank_max"], json!(6));
        assert!(rep.gap_audit >= GAP_AUDIT_MIN);
    }

    #[test]
    fn suite_dims_n3() {
        let cfg = ToleranceConfig::with_seed_trials(1, 3);
        let rep = suite_dims(3, &cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.observed["param_rank_max"], json!(37));
        assert_eq!(rep.observed["orbit_rank_max"], json!(9));
    }

    #[test]
    fn suite_invariance_n2() {
        let cfg = ToleranceConfig::with_seed_trials(1, 25);
        let rep = suite_invariance(2, &cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn suite_independence_n2_and_n3() {
        let cfg = ToleranceConfig::with_seed_trials(1, 5);
        let rep = suite_independence(2, &cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.observed["tilde_rank_max"], json!(4));
        assert_eq!(rep.observed["p_rank"], json!(5));

        let rep = suite_independence(3, &cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.observed["tilde_rank_max"], json!(8));
        assert_eq!(rep.observed["wprime_rank_max"], json!(5));
    }

    #[test]
    fn suite_torsor_small() {
        let cfg = ToleranceConfig::with_seed_trials(1, 100);
        let rep = suite_torsor(&cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn suite_separation_small() {
        let cfg = ToleranceConfig::with_seed_trials(1, 20);
        let rep = suite_separation2(&cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn suite_relations_n3_n4() {
        let cfg = ToleranceConfig::with_seed_trials(1, 30);
        for n in [2, 3, 4] {
            let rep = suite_relations(n, &cfg).unwrap();
            assert!(rep.pass, "n {n}: {rep:?}");
        }
    }

    #[test]
    fn suite_pattern_small() {
        let cfg = ToleranceConfig::with_seed_trials(1, 50);
        for n in [2, 3] {
            let rep = suite_pattern(n, &cfg).unwrap();
            assert!(rep.pass, "n {n}: {rep:?}");
            assert_eq!(rep.observed["max_offparity"], json!(0.0));
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = ToleranceConfig::with_seed_trials(7, 4);
        let a = serde_json::to_string(&suite_dims(2, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&suite_dims(2, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
