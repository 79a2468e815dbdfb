//! Tensor algebra of the Bloch model.
//!
//! A mixed state on `n` qubits is a trace-one endomorphism of the tensor
//! product of `n` two-dimensional complex spaces. Splitting each
//! endomorphism algebra into scalars plus traceless parts expands the state
//! over products of Pauli matrices; the coefficients of that expansion are
//! the *Bloch components* and the groups of coefficients supported on a
//! fixed set of qubits are the *correlation tensors*. Everything here is
//! complex-bilinear: no Hermiticity or positivity is assumed anywhere, and
//! the relevant pairing on coefficient vectors is the trace form
//! `<A,B> = tr(AB)/2`, which in Pauli coordinates is the plain (unconjugated)
//! dot product.
//!
//! Conventions fixed by this module and used throughout the crate:
//!
//! * qubit 1 is the leftmost Kronecker factor; basis kets are ordered
//!   left-lexicographically, so row/column index `i` encodes the binary
//!   string of `i` with qubit 1 as the most significant bit;
//! * extraction does not divide by `2^n`: `component[w] = tr(rho * P_w)`,
//!   and reconstruction is `rho = 2^-n (I + sum_w component[w] P_w)`, so
//!   one-point components are ordinary Bloch-vector entries;
//! * states are sparse maps from Pauli words to coefficients; a missing
//!   word means coefficient zero and the all-identity word is implicitly 1
//!   (trace normalization).

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, Matrix2, Vector3};

use crate::error::{Error, Result};

/// Complex scalar used everywhere in the crate.
pub type C64 = num_complex::Complex<f64>;

/// Shorthand constructor, mostly for tests and tables.
pub const fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub const ZERO: C64 = c64(0.0, 0.0);
pub const ONE: C64 = c64(1.0, 0.0);
pub const I_UNIT: C64 = c64(0.0, 1.0);

/// One letter of a Pauli word. The ordering `I < X < Y < Z` matches the
/// ASCII order of the letters, so sorted words agree with sorted strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    pub fn from_char(ch: char) -> Result<Self> {
        match ch {
            'I' => Ok(Self::I),
            'X' => Ok(Self::X),
            'Y' => Ok(Self::Y),
            'Z' => Ok(Self::Z),
            other => Err(Error::InvalidArgument(format!(
                "invalid Pauli letter '{other}'"
            ))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Self::I => 'I',
            Self::X => 'X',
            Self::Y => 'Y',
            Self::Z => 'Z',
        }
    }

    /// Axis index in the (x, y, z) coordinate frame; `None` for the identity.
    pub fn axis(self) -> Option<usize> {
        match self {
            Self::I => None,
            Self::X => Some(0),
            Self::Y => Some(1),
            Self::Z => Some(2),
        }
    }

    pub fn from_axis(axis: usize) -> Self {
        match axis {
            0 => Self::X,
            1 => Self::Y,
            2 => Self::Z,
            _ => unreachable!("axis index must be 0..3"),
        }
    }

    /// Transversal letters flip the computational basis bit.
    pub fn is_transversal(self) -> bool {
        matches!(self, Self::X | Self::Y)
    }

    /// The 2x2 matrix of the letter.
    pub fn matrix(self) -> Matrix2<C64> {
        match self {
            Self::I => Matrix2::identity(),
            Self::X => Matrix2::new(ZERO, ONE, ONE, ZERO),
            Self::Y => Matrix2::new(ZERO, -I_UNIT, I_UNIT, ZERO),
            Self::Z => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        }
    }
}

/// A word over `{I, X, Y, Z}` naming one product of Pauli matrices.
///
/// The word length is the ambient qubit count; its *support* is the set of
/// positions carrying a non-identity letter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliWord(Vec<PauliLetter>);

impl PauliWord {
    pub fn new(letters: Vec<PauliLetter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli word".into()));
        }
        Ok(Self(letters))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(PauliLetter::from_char)
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters)
    }

    /// All-identity word of length `n`.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![PauliLetter::I; n])
    }

    /// Word with `letter` at position `pos` (0-based) and identity elsewhere.
    pub fn single(n: usize, pos: usize, letter: PauliLetter) -> Result<Self> {
        if pos >= n {
            return Err(Error::InvalidArgument(format!(
                "position {pos} out of range for {n} qubits"
            )));
        }
        let mut letters = vec![PauliLetter::I; n];
        letters[pos] = letter;
        Self::new(letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn letter(&self, pos: usize) -> PauliLetter {
        self.0[pos]
    }

    pub fn letters(&self) -> &[PauliLetter] {
        &self.0
    }

    /// 0-based positions with a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, l)| (*l != PauliLetter::I).then_some(i))
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|l| *l == PauliLetter::I)
    }

    /// Number of letters in `{X, Y}`.
    pub fn transversal_count(&self) -> usize {
        self.0.iter().filter(|l| l.is_transversal()).count()
    }

    pub fn with_letter(&self, pos: usize, letter: PauliLetter) -> Self {
        let mut letters = self.0.clone();
        letters[pos] = letter;
        Self(letters)
    }

    /// Bit mask of transversal positions, qubit 1 as the most significant
    /// bit. Transversal letters are exactly the basis-flipping ones, so a
    /// Pauli word connects kets `|phi>` and `|psi>` iff
    /// `phi XOR psi` equals this mask.
    pub fn transversal_mask(&self) -> usize {
        let n = self.len();
        self.0.iter().enumerate().fold(0usize, |m, (i, l)| {
            if l.is_transversal() {
                m | (1 << (n - 1 - i))
            } else {
                m
            }
        })
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

/// Enumerate every non-identity word of length `n` in sorted order.
pub fn all_words(n: usize) -> Vec<PauliWord> {
    let mut out = Vec::with_capacity(4usize.pow(n as u32) - 1);
    let mut letters = vec![PauliLetter::I; n];
    fn rec(pos: usize, letters: &mut Vec<PauliLetter>, out: &mut Vec<PauliWord>) {
        if pos == letters.len() {
            let w = PauliWord(letters.clone());
            if !w.is_identity() {
                out.push(w);
            }
            return;
        }
        for l in [PauliLetter::I, PauliLetter::X, PauliLetter::Y, PauliLetter::Z] {
            letters[pos] = l;
            rec(pos + 1, letters, out);
        }
    }
    rec(0, &mut letters, &mut out);
    out.sort();
    out
}

/// The Kronecker product of the single-qubit matrices named by `word`,
/// tensor factor of qubit 1 leftmost. Not trace-normalized: the identity
/// word yields the full `2^n x 2^n` identity.
pub fn pauli_string(word: &PauliWord) -> DMatrix<C64> {
    let mut m = DMatrix::identity(1, 1);
    for letter in word.letters() {
        let block: DMatrix<C64> = DMatrix::from_iterator(2, 2, letter.matrix().iter().cloned());
        m = m.kronecker(&block);
    }
    m
}

/// Sparse Bloch expansion of a trace-one state.
///
/// Keys are Pauli words of length `n`; the all-identity word is excluded
/// (its coefficient is fixed to 1 by trace normalization) and absent words
/// carry coefficient zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochState {
    n: usize,
    components: BTreeMap<PauliWord, C64>,
}

impl BlochState {
    /// The maximally mixed state: every component zero.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("qubit count must be positive".into()));
        }
        Ok(Self {
            n,
            components: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, word: PauliWord, value: C64) -> Result<()> {
        if word.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "word {word} has length {} but the state has {} qubits",
                word.len(),
                self.n
            )));
        }
        if word.is_identity() {
            return Err(Error::InvalidArgument(
                "the all-identity component is implicitly 1 and cannot be set".into(),
            ));
        }
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::MalformedState(format!(
                "non-finite coefficient at {word}"
            )));
        }
        if value == ZERO {
            self.components.remove(&word);
        } else {
            self.components.insert(word, value);
        }
        Ok(())
    }

    /// Coefficient of `word`; zero when absent.
    pub fn component(&self, word: &PauliWord) -> C64 {
        self.components.get(word).copied().unwrap_or(ZERO)
    }

    pub fn components(&self) -> &BTreeMap<PauliWord, C64> {
        &self.components
    }

    /// Convenience lookup by string.
    pub fn component_str(&self, word: &str) -> Result<C64> {
        Ok(self.component(&PauliWord::parse(word)?))
    }

    /// Largest coefficient magnitude; zero for the maximally mixed state.
    pub fn max_component(&self) -> f64 {
        self.components
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Componentwise maximum difference against `other`.
    pub fn max_difference(&self, other: &BlochState) -> f64 {
        let mut m = 0.0f64;
        for (w, v) in &self.components {
            m = m.max((v - other.component(w)).norm());
        }
        for (w, v) in &other.components {
            m = m.max((v - self.component(w)).norm());
        }
        m
    }

    /// One-point correlation of qubit `i` (0-based) as a coordinate vector.
    pub fn one_point(&self, i: usize) -> Result<Vector3<C64>> {
        if i >= self.n {
            return Err(Error::InvalidArgument(format!(
                "qubit index {i} out of range"
            )));
        }
        let mut v = Vector3::from_element(ZERO);
        for a in 0..3 {
            let w = PauliWord::single(self.n, i, PauliLetter::from_axis(a))?;
            v[a] = self.component(&w);
        }
        Ok(v)
    }

    /// Two-point correlation of qubits `i < j` with rows indexed by the
    /// letter at `i` and columns by the letter at `j`.
    pub fn two_point(&self, i: usize, j: usize) -> Result<nalgebra::Matrix3<C64>> {
        if i >= j || j >= self.n {
            return Err(Error::InvalidArgument(format!(
                "need qubit indices i < j < n, got ({i}, {j})"
            )));
        }
        let mut m = nalgebra::Matrix3::from_element(ZERO);
        for a in 0..3 {
            for b in 0..3 {
                let w = PauliWord::single(self.n, i, PauliLetter::from_axis(a))?
                    .with_letter(j, PauliLetter::from_axis(b));
                m[(a, b)] = self.component(&w);
            }
        }
        Ok(m)
    }
}

/// Dense matrix form of a trace-one state.
///
/// `new` validates only shape and finiteness; operations that require unit
/// trace (such as [`to_bloch`]) check it themselves. Matrices produced by
/// [`from_bloch`] have trace exactly one up to floating-point rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(n: usize, matrix: DMatrix<C64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("qubit count must be positive".into()));
        }
        let dim = 1usize << n;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::MalformedState(format!(
                "expected a {dim}x{dim} matrix for {n} qubits, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::MalformedState("non-finite matrix entry".into()));
        }
        Ok(Self { n, matrix })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diagonal().iter().sum()
    }
}

/// Entry `P_w[(r, c)]` without materializing the Kronecker product. The
/// matrix of a Pauli word has exactly one nonzero per column, at
/// `r = c XOR transversal_mask`.
fn pauli_entry(word: &PauliWord, r: usize, c: usize) -> C64 {
    let n = word.len();
    let mut v = ONE;
    for (q, letter) in word.letters().iter().enumerate() {
        let shift = n - 1 - q;
        let rb = (r >> shift) & 1;
        let cb = (c >> shift) & 1;
        let factor = match (letter, rb, cb) {
            (PauliLetter::I, a, b) if a == b => ONE,
            (PauliLetter::X, a, b) if a != b => ONE,
            (PauliLetter::Y, 1, 0) => I_UNIT,
            (PauliLetter::Y, 0, 1) => -I_UNIT,
            (PauliLetter::Z, 0, 0) => ONE,
            (PauliLetter::Z, 1, 1) => -ONE,
            _ => return ZERO,
        };
        v *= factor;
    }
    v
}

/// Extract the Bloch components of `d`: `component[w] = tr(d * P_w)` over
/// every non-identity word. Requires `tr(d) = 1` to within `1e-9`.
pub fn to_bloch(d: &DensityMatrix) -> Result<BlochState> {
    let trace_err = (d.trace() - ONE).norm();
    if trace_err > 1e-9 {
        return Err(Error::MalformedState(format!(
            "trace differs from 1 by {trace_err:.3e}"
        )));
    }
    let mut b = BlochState::new(d.n())?;
    for word in all_words(d.n()) {
        // tr(d P_w) touches only the entries paired by the word's
        // transversal mask.
        let mask = word.transversal_mask();
        let mut t = ZERO;
        for i in 0..d.dim() {
            let j = i ^ mask;
            t += d.matrix[(i, j)] * pauli_entry(&word, j, i);
        }
        if t != ZERO {
            b.insert(word, t)?;
        }
    }
    Ok(b)
}

/// Reassemble the dense matrix `2^-n (I + sum_w component[w] P_w)`.
pub fn from_bloch(b: &BlochState) -> DensityMatrix {
    let dim = 1usize << b.n();
    let mut m = DMatrix::<C64>::identity(dim, dim);
    for (word, coeff) in b.components() {
        let mask = word.transversal_mask();
        for c in 0..dim {
            let r = c ^ mask;
            m[(r, c)] += *coeff * pauli_entry(word, r, c);
        }
    }
    m /= c64(dim as f64, 0.0);
    DensityMatrix::new(b.n(), m).expect("reconstructed matrix has valid shape")
}

/// The trace form `tr(AB)/2` in Pauli coordinates: the complex bilinear
/// dot product, with no conjugation. Vectors with `scalar_product(v, v) = 0`
/// are the degenerate (isotropic) directions.
pub fn scalar_product(u: &Vector3<C64>, v: &Vector3<C64>) -> C64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

/// Matrix-level form of the same pairing: `tr(ab)/2`.
pub fn half_trace_product(a: &Matrix2<C64>, b: &Matrix2<C64>) -> C64 {
    let prod = a * b;
    (prod[(0, 0)] + prod[(1, 1)]) * c64(0.5, 0.0)
}

/// Commutator in Pauli coordinates: `bracket(a, b) = 2i (a x b)`, matching
/// the matrix bracket `[a.sigma, b.sigma]`. The induced triple product is
/// `<bracket(a,b), c> = 2i det[a b c]`.
pub fn bracket(a: &Vector3<C64>, b: &Vector3<C64>) -> Vector3<C64> {
    let two_i = c64(0.0, 2.0);
    Vector3::new(
        two_i * (a[1] * b[2] - a[2] * b[1]),
        two_i * (a[2] * b[0] - a[0] * b[2]),
        two_i * (a[0] * b[1] - a[1] * b[0]),
    )
}

/// Correlation tensor of a state over a set of qubits.
///
/// `data` is stored row-major with the axis of the smallest qubit index
/// slowest; every axis runs over (x, y, z).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrTensor {
    qubits: Vec<usize>,
    data: Vec<C64>,
}

impl CorrTensor {
    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn rank(&self) -> usize {
        self.qubits.len()
    }

    /// Entry at the given per-axis coordinates (each in 0..3).
    pub fn entry(&self, axes: &[usize]) -> C64 {
        assert_eq!(axes.len(), self.qubits.len());
        let mut idx = 0;
        for &a in axes {
            idx = idx * 3 + a;
        }
        self.data[idx]
    }
}

/// The `I`-correlation tensor of `b`: all coefficients of words supported
/// exactly on the qubit set `qubits` (0-based, need not be sorted).
pub fn correlation(b: &BlochState, qubits: &[usize]) -> Result<CorrTensor> {
    if qubits.is_empty() {
        return Err(Error::InvalidArgument(
            "correlation requires a non-empty qubit set".into(),
        ));
    }
    let mut sorted = qubits.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != qubits.len() {
        return Err(Error::InvalidArgument("repeated qubit index".into()));
    }
    if *sorted.last().unwrap() >= b.n() {
        return Err(Error::InvalidArgument("qubit index out of range".into()));
    }
    let k = sorted.len();
    let size = 3usize.pow(k as u32);
    let mut data = vec![ZERO; size];
    for (flat, slot) in data.iter_mut().enumerate() {
        let mut letters = vec![PauliLetter::I; b.n()];
        let mut rem = flat;
        for ax in (0..k).rev() {
            letters[sorted[ax]] = PauliLetter::from_axis(rem % 3);
            rem /= 3;
        }
        *slot = b.component(&PauliWord(letters));
    }
    Ok(CorrTensor {
        qubits: sorted,
        data,
    })
}
