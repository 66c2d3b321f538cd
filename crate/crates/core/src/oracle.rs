//! Exact combinatorial moments: non-crossing partitions, nested multiplicative
//! maps, free cumulants and mixed moments of free variables.
//!
//! Everything here is brute force over partitions and serves as ground truth
//! for the analytic solvers. Evaluation is generic over an [`Algebra`] so the
//! scalar cases can run in exact rational arithmetic.

use std::collections::HashMap;
use std::fmt;

use num_rational::Rational64;
use thiserror::Error;

use crate::matalg::{hermitian_eigenvalues, kron, ComplexMatrix, C64, ONE, ZERO};
use crate::ncexpr::NCPolynomial;

pub const MAX_PAIRING_POINTS: usize = 16;
pub const MAX_PARTITION_POINTS: usize = 10;
pub const MAX_SEMICIRCULAR_ORDER: usize = 12;
pub const MAX_CUMULANT_ORDER: usize = 8;
pub const MAX_MIXED_WORD: usize = 8;
pub const MAX_SCALAR_WORD: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{what} of size {n} exceeds the cap {cap}")]
    TooLarge { what: &'static str, n: usize, cap: usize },
    #[error("argument mismatch: {0}")]
    Arguments(String),
    #[error("covariance map is not completely positive (Choi eigenvalue {0:.3e})")]
    NotCompletelyPositive(f64),
}

/// Minimal unital ring interface used by the oracle.
pub trait Algebra: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
}

impl Algebra for ComplexMatrix {
    fn zero_like(&self) -> Self {
        ComplexMatrix::zeros(self.rows(), self.cols())
    }
    fn one_like(&self) -> Self {
        ComplexMatrix::identity(self.rows())
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

macro_rules! field_algebra {
    ($t:ty, $zero:expr, $one:expr) => {
        impl Algebra for $t {
            fn zero_like(&self) -> Self {
                $zero
            }
            fn one_like(&self) -> Self {
                $one
            }
            fn add(&self, other: &Self) -> Self {
                *self + *other
            }
            fn sub(&self, other: &Self) -> Self {
                *self - *other
            }
            fn mul(&self, other: &Self) -> Self {
                *self * *other
            }
        }
    };
}

field_algebra!(f64, 0.0, 1.0);
field_algebra!(C64, ZERO, ONE);
field_algebra!(Rational64, Rational64::from_integer(0), Rational64::from_integer(1));

/// Non-crossing partition of `{0, …, n−1}` (printed 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NCPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl NCPartition {
    /// Validates coverage, disjointness and the non-crossing condition.
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self, OracleError> {
        let mut seen = vec![false; n];
        for b in &mut blocks {
            b.sort_unstable();
            if b.is_empty() {
                return Err(OracleError::Arguments("empty block".into()));
            }
            for &i in b.iter() {
                if i >= n || seen[i] {
                    return Err(OracleError::Arguments(format!("index {i} repeated or out of range")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(OracleError::Arguments("blocks do not cover all points".into()));
        }
        blocks.sort();
        let p = Self { n, blocks };
        if p.has_crossing() {
            return Err(OracleError::Arguments("partition is crossing".into()));
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn is_pairing(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 2)
    }

    fn has_crossing(&self) -> bool {
        let mut owner = vec![0; self.n];
        for (k, b) in self.blocks.iter().enumerate() {
            for &i in b {
                owner[i] = k;
            }
        }
        for a in 0..self.n {
            for b in a + 1..self.n {
                for c in b + 1..self.n {
                    for d in c + 1..self.n {
                        if owner[a] == owner[c] && owner[b] == owner[d] && owner[a] != owner[b] {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

impl fmt::Display for NCPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, b) in self.blocks.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            let items: Vec<String> = b.iter().map(|i| (i + 1).to_string()).collect();
            write!(f, "{{{}}}", items.join(","))?;
        }
        write!(f, "}}")
    }
}

/// All non-crossing partitions (or pairings) of `n` points.
pub fn enumerate_nc(n: usize, pairings_only: bool) -> Result<Vec<NCPartition>, OracleError> {
    let cap = if pairings_only { MAX_PAIRING_POINTS } else { MAX_PARTITION_POINTS };
    if n > cap {
        return Err(OracleError::TooLarge { what: "non-crossing enumeration", n, cap });
    }
    let points: Vec<usize> = (0..n).collect();
    let mut out: Vec<NCPartition> = nc_rec(&points, pairings_only)
        .into_iter()
        .map(|mut blocks| {
            blocks.sort();
            NCPartition { n, blocks }
        })
        .collect();
    out.sort_by(|a, b| a.blocks.cmp(&b.blocks));
    Ok(out)
}

/// Partitions of an ordered point list, decomposed by the block of its first point.
fn nc_rec(points: &[usize], pairings_only: bool) -> Vec<Vec<Vec<usize>>> {
    if points.is_empty() {
        return vec![vec![]];
    }
    let m = points.len();
    let mut out = Vec::new();
    // Choose the other members of the first block by a bitmask over points[1..].
    for mask in 0u32..(1u32 << (m - 1)) {
        let size = 1 + mask.count_ones() as usize;
        if pairings_only && size != 2 {
            continue;
        }
        let mut idx = vec![0];
        idx.extend((1..m).filter(|j| mask & (1 << (j - 1)) != 0));
        let block: Vec<usize> = idx.iter().map(|&j| points[j]).collect();
        // Gaps between consecutive block members, then the tail.
        let mut segments: Vec<&[usize]> = idx.windows(2).map(|w| &points[w[0] + 1..w[1]]).collect();
        segments.push(&points[idx[idx.len() - 1] + 1..]);
        let mut partial: Vec<Vec<Vec<usize>>> = vec![vec![block]];
        for seg in segments {
            let sub = nc_rec(seg, pairings_only);
            if sub.is_empty() {
                partial.clear();
                break;
            }
            let mut next = Vec::with_capacity(partial.len() * sub.len());
            for p in &partial {
                for s in &sub {
                    let mut q = p.clone();
                    q.extend(s.iter().cloned());
                    next.push(q);
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out
}

/// Nested evaluation of a multiplicative family along a non-crossing
/// partition: `b` holds the `n − 1` algebra elements between the points and
/// `f` maps the elements strictly inside one block to its value. Interval
/// blocks are stripped leftmost first and their value is absorbed into the
/// surrounding elements.
pub fn nested_map<T: Algebra>(pi: &NCPartition, b: &[T], one: &T, f: &mut dyn FnMut(&[T]) -> T) -> T {
    assert_eq!(b.len() + 1, pi.n, "need n − 1 interleaved elements");
    let mut positions: Vec<usize> = (0..pi.n).collect();
    let mut gaps: Vec<T> = b.to_vec();
    let mut blocks: Vec<Vec<usize>> = pi.blocks.clone();
    let mut left = one.clone();
    let mut right = one.clone();
    loop {
        // Leftmost block occupying consecutive remaining positions.
        let (k, s, e) = blocks
            .iter()
            .enumerate()
            .filter_map(|(k, blk)| {
                let s = positions.iter().position(|&p| p == blk[0])?;
                let e = s + blk.len() - 1;
                (e < positions.len() && positions[s..=e] == blk[..]).then_some((k, s, e))
            })
            .min_by_key(|&(_, s, _)| s)
            .expect("a non-crossing partition always has an interval block");
        let value = f(&gaps[s..e]);
        let last = positions.len() - 1;
        blocks.remove(k);
        if s == 0 && e == last {
            return left.mul(&value).mul(&right);
        } else if s == 0 {
            left = left.mul(&value).mul(&gaps[e]);
            gaps.drain(0..=e);
        } else if e == last {
            right = gaps[s - 1].mul(&value).mul(&right);
            gaps.drain(s - 1..e);
        } else {
            let merged = gaps[s - 1].mul(&value).mul(&gaps[e]);
            gaps.splice(s - 1..=e, std::iter::once(merged));
        }
        positions.drain(s..=e);
    }
}

/// Completely positive covariance map on `M_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKernel {
    /// `b ↦ Σ_j a_j b a_j`.
    ExplicitList(Vec<ComplexMatrix>),
    /// `n² × n²` matrix acting on row-major `vec(b)`.
    LinearAction(ComplexMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMap {
    dim: usize,
    kernel: CovarianceKernel,
}

impl CovarianceMap {
    /// `b ↦ Σ_j a_j b a_j` for Hermitian `a_j` (completely positive by construction).
    pub fn explicit(list: Vec<ComplexMatrix>) -> Result<Self, OracleError> {
        let dim = list.first().map_or(0, ComplexMatrix::rows);
        if dim == 0 || list.iter().any(|a| a.rows() != dim || !a.is_hermitian(1e-12)) {
            return Err(OracleError::Arguments("covariance list needs Hermitian matrices of equal size".into()));
        }
        Ok(Self { dim, kernel: CovarianceKernel::ExplicitList(list) })
    }

    /// `η = σ² · id` on `M_n`.
    pub fn scalar(dim: usize, variance: f64) -> Self {
        Self {
            dim,
            kernel: CovarianceKernel::ExplicitList(vec![ComplexMatrix::scalar_identity(dim, C64::new(variance.sqrt(), 0.0))]),
        }
    }

    /// Map given by its action on vectorized matrices; rejected unless its
    /// Choi matrix is positive semidefinite.
    pub fn linear_action(dim: usize, action: ComplexMatrix) -> Result<Self, OracleError> {
        if action.rows() != dim * dim || !action.is_square() {
            return Err(OracleError::Arguments(format!("linear action must be {0}x{0}", dim * dim)));
        }
        let map = Self { dim, kernel: CovarianceKernel::LinearAction(action) };
        let choi = map.choi_matrix();
        let lowest = hermitian_eigenvalues(&choi).map_err(|e| OracleError::Arguments(e.to_string()))?[0];
        if lowest < -1e-10 * choi.max_abs().max(1.0) || !choi.is_hermitian(1e-10 * choi.max_abs().max(1.0)) {
            return Err(OracleError::NotCompletelyPositive(lowest));
        }
        Ok(map)
    }

    /// Build from a closure (converted to its linear action).
    pub fn from_fn(dim: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<Self, OracleError> {
        let n2 = dim * dim;
        let mut action = ComplexMatrix::zeros(n2, n2);
        for col in 0..n2 {
            let mut e = ComplexMatrix::zeros(dim, dim);
            e[(col / dim, col % dim)] = ONE;
            let img = f(&e);
            for row in 0..n2 {
                action[(row, col)] = img[(row / dim, row % dim)];
            }
        }
        Self::linear_action(dim, action)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    pub fn apply(&self, b: &ComplexMatrix) -> ComplexMatrix {
        match &self.kernel {
            CovarianceKernel::ExplicitList(list) => {
                let mut out = ComplexMatrix::zeros(self.dim, self.dim);
                for a in list {
                    out += &(a * &(b * a));
                }
                out
            }
            CovarianceKernel::LinearAction(l) => {
                let n = self.dim;
                let v = b.as_slice();
                ComplexMatrix::from_fn(n, n, |r, c| l.row(r * n + c).iter().zip(v).map(|(x, y)| x * y).sum())
            }
        }
    }

    /// `1_m ⊗ η`: applies the map to every `n × n` block of an `mn × mn` matrix.
    pub fn apply_amplified(&self, w: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim;
        if w.rows() == n {
            return self.apply(w);
        }
        let m = w.rows() / n;
        if let CovarianceKernel::ExplicitList(list) = &self.kernel {
            let mut out = ComplexMatrix::zeros(w.rows(), w.cols());
            for a in list {
                let big = a.amplify(m);
                out += &(&big * &(w * &big));
            }
            return out;
        }
        let mut out = ComplexMatrix::zeros(w.rows(), w.cols());
        for i in 0..m {
            for j in 0..m {
                out.set_block(i * n, j * n, &self.apply(&w.block(i * n, j * n, n, n)));
            }
        }
        out
    }

    /// Choi matrix `Σ_{ij} E_ij ⊗ η(E_ij)`.
    pub fn choi_matrix(&self) -> ComplexMatrix {
        let n = self.dim;
        let mut choi = ComplexMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                let mut e = ComplexMatrix::zeros(n, n);
                e[(i, j)] = ONE;
                choi.set_block(i * n, j * n, &self.apply(&e));
            }
        }
        choi
    }

    /// Sum of two covariance maps on the same space.
    pub fn plus(&self, other: &CovarianceMap) -> Result<CovarianceMap, OracleError> {
        if self.dim != other.dim {
            return Err(OracleError::Arguments("covariance dimensions differ".into()));
        }
        Ok(match (&self.kernel, &other.kernel) {
            (CovarianceKernel::ExplicitList(a), CovarianceKernel::ExplicitList(b)) => CovarianceMap {
                dim: self.dim,
                kernel: CovarianceKernel::ExplicitList(a.iter().chain(b).cloned().collect()),
            },
            _ => CovarianceMap {
                dim: self.dim,
                kernel: CovarianceKernel::LinearAction(&self.linear_matrix() + &other.linear_matrix()),
            },
        })
    }

    /// The `n² × n²` matrix of the map on row-major vectorizations.
    pub fn linear_matrix(&self) -> ComplexMatrix {
        match &self.kernel {
            CovarianceKernel::LinearAction(l) => l.clone(),
            CovarianceKernel::ExplicitList(_) => {
                let n = self.dim;
                let mut action = ComplexMatrix::zeros(n * n, n * n);
                for col in 0..n * n {
                    let mut e = ComplexMatrix::zeros(n, n);
                    e[(col / n, col % n)] = ONE;
                    let img = self.apply(&e);
                    for row in 0..n * n {
                        action[(row, col)] = img[(row / n, row % n)];
                    }
                }
                action
            }
        }
    }

    /// Upper bound for `‖η‖`: `Σ‖a_j‖²` for lists, operator norm of the action otherwise.
    pub fn norm_estimate(&self) -> f64 {
        match &self.kernel {
            CovarianceKernel::ExplicitList(list) => list.iter().map(|a| crate::matalg::operator_norm(a).powi(2)).sum(),
            CovarianceKernel::LinearAction(l) => crate::matalg::operator_norm(l),
        }
    }
}

/// `η_π(b₁, …, b_{2m−1})` for a pairing `π`.
pub fn eta_pi(pi: &NCPartition, eta: &CovarianceMap, b: &[ComplexMatrix]) -> Result<ComplexMatrix, OracleError> {
    if !pi.is_pairing() {
        return Err(OracleError::Arguments("eta_pi needs a pairing".into()));
    }
    if b.len() + 1 != pi.n() || b.iter().any(|x| x.rows() != eta.dim() || !x.is_square()) {
        return Err(OracleError::Arguments("need 2m − 1 matrices of the covariance size".into()));
    }
    let one = ComplexMatrix::identity(eta.dim());
    Ok(nested_map(pi, b, &one, &mut |inner| eta.apply(&inner[0])))
}

/// `Σ_{π ∈ NC₂(k)} η_π(b₁, …, b_{k−1})` for any algebra and covariance closure.
pub fn semicircular_moment_with<T: Algebra>(eta: &dyn Fn(&T) -> T, b: &[T], one: &T) -> Result<T, OracleError> {
    let k = b.len() + 1;
    if k > MAX_SEMICIRCULAR_ORDER {
        return Err(OracleError::TooLarge { what: "semicircular moment order", n: k, cap: MAX_SEMICIRCULAR_ORDER });
    }
    let mut total = one.zero_like();
    if k % 2 == 1 {
        return Ok(total);
    }
    for pi in enumerate_nc(k, true)? {
        total = total.add(&nested_map(&pi, b, one, &mut |inner| eta(&inner[0])));
    }
    Ok(total)
}

pub fn semicircular_moment(eta: &CovarianceMap, b: &[ComplexMatrix]) -> Result<ComplexMatrix, OracleError> {
    if b.iter().any(|x| x.rows() != eta.dim() || !x.is_square()) {
        return Err(OracleError::Arguments("argument sizes differ from the covariance size".into()));
    }
    semicircular_moment_with(&|w: &ComplexMatrix| eta.apply(w), b, &ComplexMatrix::identity(eta.dim()))
}

/// A single non-commutative variable's `B`-valued moments.
pub trait MomentSource<T: Algebra> {
    /// `E[X c₁ X c₂ ⋯ c_{k−1} X]` with `k = cs.len() + 1`.
    fn moment(&self, cs: &[T]) -> T;
    /// The unit of `B`.
    fn unit(&self) -> T;
    /// Closed-form cumulant when the source knows one.
    fn cumulant(&self, _cs: &[T]) -> Option<T> {
        None
    }
}

/// Gap value between first-block members `p < q` and the tail after `last`.
fn gap_value<T: Algebra>(cs: &[T], p: usize, q: usize, inner: &mut dyn FnMut(usize, usize) -> T) -> T {
    if q == p + 1 {
        cs[p].clone()
    } else {
        cs[p].mul(&inner(p + 1, q - 1)).mul(&cs[q - 1])
    }
}

/// `κ_k(X c₁, …, X c_{k−1}, X)` by subtracting every first-block
/// decomposition other than the full block from the moment.
pub fn free_cumulant<T: Algebra>(src: &dyn MomentSource<T>, cs: &[T]) -> Result<T, OracleError> {
    let k = cs.len() + 1;
    if k > MAX_CUMULANT_ORDER {
        return Err(OracleError::TooLarge { what: "cumulant order", n: k, cap: MAX_CUMULANT_ORDER });
    }
    Ok(cumulant_rec(src, cs))
}

fn cumulant_rec<T: Algebra>(src: &dyn MomentSource<T>, cs: &[T]) -> T {
    if let Some(c) = src.cumulant(cs) {
        return c;
    }
    let k = cs.len() + 1;
    let mut value = src.moment(cs);
    let full = (1u32 << (k - 1)) - 1;
    for mask in 0..full {
        let mut block = vec![0];
        block.extend((1..k).filter(|j| mask & (1 << (j - 1)) != 0));
        let mut segment = |a: usize, b: usize| src.moment(&cs[a..b]);
        let gaps: Vec<T> = block.windows(2).map(|w| gap_value(cs, w[0], w[1], &mut segment)).collect();
        let kappa = cumulant_rec(src, &gaps);
        let last = *block.last().unwrap();
        let term = if last == k - 1 { kappa } else { kappa.mul(&cs[last]).mul(&src.moment(&cs[last + 1..])) };
        value = value.sub(&term);
    }
    value
}

/// `κ_π` assembled from cumulants by the nested map.
pub fn cumulant_pi<T: Algebra>(pi: &NCPartition, src: &dyn MomentSource<T>, cs: &[T]) -> T {
    nested_map(pi, cs, &src.unit(), &mut |inner| cumulant_rec(src, inner))
}

/// `E_π` assembled from moments by the nested map.
pub fn moment_pi<T: Algebra>(pi: &NCPartition, src: &dyn MomentSource<T>, cs: &[T]) -> T {
    nested_map(pi, cs, &src.unit(), &mut |inner| src.moment(inner))
}

/// `E[X_{l₁} c₁ X_{l₂} ⋯ c_{k−1} X_{l_k}]` for free variables: sums over
/// non-crossing partitions whose blocks are monochromatic, organized by the
/// block of the first letter.
pub fn mixed_moment_free<T: Algebra>(
    sources: &[&dyn MomentSource<T>],
    labels: &[usize],
    cs: &[T],
) -> Result<T, OracleError> {
    if labels.is_empty() || cs.len() + 1 != labels.len() {
        return Err(OracleError::Arguments("need k letters and k − 1 interleaved elements".into()));
    }
    if labels.len() > MAX_MIXED_WORD {
        return Err(OracleError::TooLarge { what: "mixed word", n: labels.len(), cap: MAX_MIXED_WORD });
    }
    if labels.iter().any(|&l| l >= sources.len()) {
        return Err(OracleError::Arguments("label without a moment source".into()));
    }
    Ok(mixed_rec(sources, labels, cs))
}

fn mixed_rec<T: Algebra>(sources: &[&dyn MomentSource<T>], labels: &[usize], cs: &[T]) -> T {
    let k = labels.len();
    let l0 = labels[0];
    let same: Vec<usize> = (1..k).filter(|&j| labels[j] == l0).collect();
    let src = sources[l0];
    let mut total: Option<T> = None;
    for mask in 0u32..(1u32 << same.len()) {
        let mut block = vec![0];
        block.extend(same.iter().enumerate().filter(|(t, _)| mask & (1 << t) != 0).map(|(_, &j)| j));
        let mut segment = |a: usize, b: usize| mixed_rec(sources, &labels[a..=b], &cs[a..b]);
        let gaps: Vec<T> = block.windows(2).map(|w| gap_value(cs, w[0], w[1], &mut segment)).collect();
        let kappa = cumulant_rec(src, &gaps);
        let last = *block.last().unwrap();
        let term = if last == k - 1 {
            kappa
        } else {
            kappa.mul(&cs[last]).mul(&mixed_rec(sources, &labels[last + 1..], &cs[last + 1..]))
        };
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term),
        });
    }
    total.expect("at least the singleton first block")
}

/// `a ⊗ x` with `x` a scalar-distributed variable, `E = id ⊗ φ`:
/// `E[(a⊗x) c₁ ⋯ (a⊗x)] = φ(x^k) · a c₁ a ⋯ c_{k−1} a`.
#[derive(Debug, Clone)]
pub struct ScalarTensor {
    pub coefficient: ComplexMatrix,
    /// `φ(x^m)` for `m = 0, 1, …`.
    pub moments: Vec<f64>,
    cumulants: Option<Vec<f64>>,
}

impl ScalarTensor {
    pub fn new(coefficient: ComplexMatrix, moments: Vec<f64>) -> Self {
        Self { coefficient, moments, cumulants: None }
    }

    /// Same source, answering cumulant queries from precomputed scalar free
    /// cumulants instead of the generic recursion.
    pub fn with_cumulant_shortcut(mut self) -> Self {
        self.cumulants = Some(scalar_free_cumulants(&self.moments));
        self
    }

    fn sandwich(&self, scale: f64, cs: &[ComplexMatrix]) -> ComplexMatrix {
        let a = &self.coefficient;
        let mut out = a.clone();
        for c in cs {
            out = &(&out * c) * a;
        }
        out.scale_real(scale)
    }
}

impl MomentSource<ComplexMatrix> for ScalarTensor {
    fn moment(&self, cs: &[ComplexMatrix]) -> ComplexMatrix {
        let k = cs.len() + 1;
        let m = *self.moments.get(k).unwrap_or_else(|| panic!("moment of order {k} not supplied"));
        self.sandwich(m, cs)
    }

    fn unit(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.coefficient.rows())
    }

    fn cumulant(&self, cs: &[ComplexMatrix]) -> Option<ComplexMatrix> {
        let kappa = self.cumulants.as_ref()?;
        let k = cs.len() + 1;
        Some(self.sandwich(kappa[k], cs))
    }
}

/// Operator-valued semicircular with covariance `η`.
pub struct SemicircularSource {
    pub eta: CovarianceMap,
}

impl MomentSource<ComplexMatrix> for SemicircularSource {
    fn moment(&self, cs: &[ComplexMatrix]) -> ComplexMatrix {
        semicircular_moment(&self.eta, cs).expect("semicircular moment within caps")
    }

    fn unit(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.eta.dim())
    }
}

/// A fixed matrix `X ∈ M_n ⊗ M_k` with conditional expectation `id ⊗ tr_k`.
pub struct PartialTraceModel {
    pub n: usize,
    pub k: usize,
    pub matrix: ComplexMatrix,
}

impl PartialTraceModel {
    fn expectation(&self, y: &ComplexMatrix) -> ComplexMatrix {
        let (n, k) = (self.n, self.k);
        ComplexMatrix::from_fn(n, n, |i, j| (0..k).map(|a| y[(i * k + a, j * k + a)]).sum::<C64>() / k as f64)
    }
}

impl MomentSource<ComplexMatrix> for PartialTraceModel {
    fn moment(&self, cs: &[ComplexMatrix]) -> ComplexMatrix {
        let id = ComplexMatrix::identity(self.k);
        let mut y = self.matrix.clone();
        for c in cs {
            y = &(&y * &kron(c, &id)) * &self.matrix;
        }
        self.expectation(&y)
    }

    fn unit(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.n)
    }
}

/// Scalar moments `φ(x^m)` given by a table.
pub struct ScalarMoments<T>(pub Vec<T>);

impl<T: Algebra> MomentSource<T> for ScalarMoments<T> {
    fn moment(&self, cs: &[T]) -> T {
        let k = cs.len() + 1;
        cs.iter().fold(self.0[k].clone(), |acc, c| acc.mul(c))
    }

    fn unit(&self) -> T {
        self.0[0].one_like()
    }
}

/// `P[s][r] = Σ_{i₁+⋯+i_s = r} m_{i₁} ⋯ m_{i_s}`.
fn composition_table<T: Algebra>(moments: &[T], max_s: usize, max_r: usize) -> Vec<Vec<T>> {
    let zero = moments[0].zero_like();
    let one = moments[0].one_like();
    let mut table = vec![vec![zero.clone(); max_r + 1]; max_s + 1];
    table[0][0] = one;
    for s in 1..=max_s {
        for r in 0..=max_r {
            let mut acc = zero.clone();
            for i in 0..=r.min(moments.len() - 1) {
                acc = acc.add(&moments[i].mul(&table[s - 1][r - i]));
            }
            table[s][r] = acc;
        }
    }
    table
}

/// Scalar free cumulants `κ₀ = 0, κ₁, …` from moments `m₀ = 1, m₁, …` via
/// `m_n = Σ_s κ_s Σ_{i₁+⋯+i_s = n−s} m_{i₁}⋯m_{i_s}`.
pub fn scalar_free_cumulants<T: Algebra>(moments: &[T]) -> Vec<T> {
    let n_max = moments.len() - 1;
    let table = composition_table(moments, n_max, n_max);
    let mut kappa = vec![moments[0].zero_like(); n_max + 1];
    for n in 1..=n_max {
        let mut acc = moments[n].clone();
        for s in 1..n {
            acc = acc.sub(&kappa[s].mul(&table[s][n - s]));
        }
        kappa[n] = acc;
    }
    kappa
}

/// Inverse of [`scalar_free_cumulants`]: moments `m₀ … m_{max_order}`.
pub fn scalar_moments_from_cumulants<T: Algebra>(kappa: &[T], max_order: usize) -> Vec<T> {
    let one = kappa[0].one_like();
    let zero = kappa[0].zero_like();
    let mut m = vec![one.clone()];
    for n in 1..=max_order {
        // The s = 1 term needs m_{n−1}, already known; all terms use orders < n.
        let table = composition_table(&m, n, n);
        let mut acc = zero.clone();
        for s in 1..=n.min(kappa.len() - 1) {
            acc = acc.add(&kappa[s].mul(&table[s][n - s]));
        }
        m.push(acc);
    }
    m
}

/// Memoized scalar mixed moments of free variables, each given by its free
/// cumulants. Handles words far longer than the operator-valued engine.
pub struct ScalarFreeOracle<T> {
    cumulants: Vec<Vec<T>>,
    memo: HashMap<Vec<usize>, T>,
    one: T,
}

impl<T: Algebra> ScalarFreeOracle<T> {
    /// `moments[v][m] = φ(x_v^m)`, starting with `m = 0`.
    pub fn from_moments(moments: &[Vec<T>]) -> Self {
        let one = moments[0][0].one_like();
        Self { cumulants: moments.iter().map(|m| scalar_free_cumulants(m)).collect(), memo: HashMap::new(), one }
    }

    pub fn moment(&mut self, word: &[usize]) -> Result<T, OracleError> {
        if word.len() > MAX_SCALAR_WORD {
            return Err(OracleError::TooLarge { what: "scalar word", n: word.len(), cap: MAX_SCALAR_WORD });
        }
        for &v in word {
            if v >= self.cumulants.len() {
                return Err(OracleError::Arguments(format!("variable {v} has no distribution")));
            }
            if self.cumulants[v].len() <= word.len() {
                return Err(OracleError::Arguments(format!("variable {v} needs moments up to order {}", word.len())));
            }
        }
        Ok(self.moment_rec(word))
    }

    fn moment_rec(&mut self, word: &[usize]) -> T {
        if word.is_empty() {
            return self.one.clone();
        }
        if let Some(v) = self.memo.get(word) {
            return v.clone();
        }
        let k = word.len();
        let l = word[0];
        let zero = self.one.zero_like();
        // chains[i][s]: first-block chains ending at position i with s members.
        let mut chains: Vec<Vec<T>> = vec![vec![zero.clone(); k + 1]; k];
        chains[0][1] = self.one.clone();
        for j in 1..k {
            if word[j] != l {
                continue;
            }
            for i in 0..j {
                if word[i] != l {
                    continue;
                }
                let gap = self.moment_rec(&word[i + 1..j]);
                for s in 1..=i + 1 {
                    let add = chains[i][s].mul(&gap);
                    chains[j][s + 1] = chains[j][s + 1].add(&add);
                }
            }
        }
        let mut total = zero;
        for i in 0..k {
            if word[i] != l {
                continue;
            }
            let tail = self.moment_rec(&word[i + 1..]);
            for s in 1..=i + 1 {
                let term = chains[i][s].mul(&self.cumulants[l][s]).mul(&tail);
                total = total.add(&term);
            }
        }
        self.memo.insert(word.to_vec(), total.clone());
        total
    }
}

/// `φ(p^k)` for `k = 0 … max_order` with free scalar variables.
pub fn polynomial_moments(
    p: &NCPolynomial,
    oracle: &mut ScalarFreeOracle<f64>,
    max_order: usize,
) -> Result<Vec<C64>, OracleError> {
    let mut out = vec![ONE];
    let mut power: HashMap<Vec<usize>, C64> = HashMap::from([(vec![], ONE)]);
    for _ in 1..=max_order {
        let mut next: HashMap<Vec<usize>, C64> = HashMap::new();
        for (w, c) in &power {
            for t in p.terms() {
                let mut word = w.clone();
                word.extend_from_slice(&t.word);
                *next.entry(word).or_insert(ZERO) += c * t.coefficient;
            }
        }
        power = next;
        let mut total = ZERO;
        for (w, c) in &power {
            total += c * oracle.moment(w)?;
        }
        out.push(total);
    }
    Ok(out)
}

/// `E[S^k]` for `S = b₀ + Σ_j Y_j` with `Y_j` free over `B`: expands the power
/// into words and sums mixed moments, folding runs of `b₀` into the
/// interleaved elements.
pub fn pencil_moment(
    b0: &ComplexMatrix,
    sources: &[&dyn MomentSource<ComplexMatrix>],
    k: usize,
) -> Result<ComplexMatrix, OracleError> {
    let one = ComplexMatrix::identity(b0.rows());
    let d = sources.len();
    let mut total = ComplexMatrix::zeros(b0.rows(), b0.rows());
    // Each factor chooses b₀ (index d) or one of the variables.
    let count = (d + 1).pow(k as u32);
    for code in 0..count {
        let mut choice = Vec::with_capacity(k);
        let mut c = code;
        for _ in 0..k {
            choice.push(c % (d + 1));
            c /= d + 1;
        }
        let mut prefix = one.clone();
        let mut labels = Vec::new();
        let mut cs: Vec<ComplexMatrix> = Vec::new();
        let mut pending = one.clone();
        for &ch in &choice {
            if ch == d {
                pending = &pending * b0;
            } else {
                if labels.is_empty() {
                    prefix = pending;
                } else {
                    cs.push(pending);
                }
                pending = one.clone();
                labels.push(ch);
            }
        }
        let term = if labels.is_empty() {
            pending
        } else {
            let m = mixed_moment_free(sources, &labels, &cs)?;
            &(&prefix * &m) * &pending
        };
        total += &term;
    }
    Ok(total)
}

/// Catalan number `C_m`.
pub fn catalan(m: usize) -> u64 {
    let mut c: u64 = 1;
    for i in 0..m as u64 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational64 {
        Rational64::from_integer(n)
    }

    fn sym(seed: u64, n: usize) -> ComplexMatrix {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let g = ComplexMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        (&g + &g.adjoint()).scale_real(0.5)
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
    }

    #[test]
    fn catalan_counts() {
        for m in 0..=8 {
            assert_eq!(enumerate_nc(2 * m, true).unwrap().len() as u64, catalan(m));
        }
        for n in 0..=10 {
            assert_eq!(enumerate_nc(n, false).unwrap().len() as u64, catalan(n));
        }
        assert!(matches!(enumerate_nc(11, false), Err(OracleError::TooLarge { .. })));
        assert!(matches!(enumerate_nc(18, true), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn fourth_order_pairings() {
        let p = enumerate_nc(4, true).unwrap();
        let shown: Vec<String> = p.iter().map(ToString::to_string).collect();
        assert_eq!(shown, vec!["{{1,2},{3,4}}", "{{1,4},{2,3}}"]);
        assert_eq!(enumerate_nc(2, true).unwrap().len(), 1);
        assert_eq!(enumerate_nc(4, false).unwrap().len(), 14);
    }

    #[test]
    fn enumerated_partitions_are_valid_and_distinct() {
        let all = enumerate_nc(7, false).unwrap();
        let set: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), all.len());
        for p in &all {
            assert!(NCPartition::new(p.n(), p.blocks().to_vec()).is_ok());
        }
        assert!(NCPartition::new(4, vec![vec![0, 2], vec![1, 3]]).is_err());
    }

    #[test]
    fn eta_pi_nesting() {
        let eta = CovarianceMap::explicit(vec![sym(1, 2), sym(2, 2)]).unwrap();
        let b = [sym(3, 2), sym(4, 2), sym(5, 2)];
        let flat = NCPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let nested = NCPartition::new(4, vec![vec![0, 3], vec![1, 2]]).unwrap();
        let expected_flat = &(&eta.apply(&b[0]) * &b[1]) * &eta.apply(&b[2]);
        let expected_nested = eta.apply(&(&(&b[0] * &eta.apply(&b[1])) * &b[2]));
        assert!(close(&eta_pi(&flat, &eta, &b).unwrap(), &expected_flat, 1e-14));
        assert!(close(&eta_pi(&nested, &eta, &b).unwrap(), &expected_nested, 1e-14));

        let id = CovarianceMap::scalar(1, 1.0);
        let single = NCPartition::new(2, vec![vec![0, 1]]).unwrap();
        assert_eq!(eta_pi(&single, &id, &[ComplexMatrix::scalar(ONE)]).unwrap()[(0, 0)], ONE);
    }

    #[test]
    fn catalan_moments_exact() {
        let one = r(1);
        for (k, expected) in [(2, 1), (4, 2), (6, 5), (8, 14), (3, 0)] {
            let b = vec![one; k - 1];
            let m = semicircular_moment_with(&|w: &Rational64| *w, &b, &one).unwrap();
            assert_eq!(m, r(expected));
        }
    }

    #[test]
    fn scalar_semicircle_moments_scale_with_variance() {
        let var = 2.5;
        let eta = CovarianceMap::scalar(1, var);
        for m in 1..=5 {
            let b = vec![ComplexMatrix::scalar(ONE); 2 * m - 1];
            let v = semicircular_moment(&eta, &b).unwrap()[(0, 0)].re;
            let expected = var.powi(m as i32) * catalan(m) as f64;
            assert!((v - expected).abs() < 1e-10 * expected);
        }
    }

    /// Direct evaluation of the covariance of a 2x2 matrix.
    fn exercise_covariance() -> CovarianceMap {
        CovarianceMap::from_fn(2, |b| {
            ComplexMatrix::from_rows(&[vec![b[(1, 1)], b[(1, 0)]], vec![b[(0, 1)], b[(0, 0)] + b[(1, 1)]]])
        })
        .unwrap()
    }

    #[test]
    fn exercise_covariance_equals_explicit_list() {
        let e1 = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e2 = ComplexMatrix::from_real_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]);
        let list = CovarianceMap::explicit(vec![e1, e2]).unwrap();
        let action = exercise_covariance();
        for s in 0..5 {
            let b = sym(s, 2);
            assert!(close(&list.apply(&b), &action.apply(&b), 1e-14));
        }
        // Fourth moment: η(1)² + η(η(1)).
        let one = ComplexMatrix::identity(2);
        let m4 = semicircular_moment(&list, &[one.clone(), one.clone(), one.clone()]).unwrap();
        let e1 = list.apply(&one);
        let expected = &(&e1 * &e1) + &list.apply(&e1);
        assert!(close(&m4, &expected, 1e-14));
        assert!((m4.normalized_trace().re - 5.0).abs() < 1e-14);
    }

    #[test]
    fn non_cp_action_rejected() {
        // Transpose is positive but not completely positive.
        let t = CovarianceMap::from_fn(2, ComplexMatrix::transpose);
        assert!(matches!(t, Err(OracleError::NotCompletelyPositive(_))));
    }

    #[test]
    fn semicircular_norm_bound() {
        let eta = CovarianceMap::explicit(vec![sym(7, 3), sym(8, 3)]).unwrap();
        let norm = eta.norm_estimate();
        for m in 1..=4 {
            let b: Vec<ComplexMatrix> = (0..2 * m - 1).map(|j| sym(20 + j as u64, 3)).collect();
            let bound = (2.0 * norm).powi(2 * m as i32) * b.iter().map(crate::matalg::operator_norm).product::<f64>();
            let v = crate::matalg::operator_norm(&semicircular_moment(&eta, &b).unwrap());
            assert!(v <= bound, "order {}: {v} > {bound}", 2 * m);
        }
    }

    fn model(seed: u64) -> PartialTraceModel {
        PartialTraceModel { n: 2, k: 3, matrix: sym(seed, 6) }
    }

    #[test]
    fn low_order_cumulant_formulas() {
        let src = model(11);
        let e1 = src.moment(&[]);
        let b1 = sym(12, 2);
        let b2 = sym(13, 2);
        assert!(close(&free_cumulant(&src, &[]).unwrap(), &e1, 1e-14));
        let k2 = free_cumulant(&src, &[b1.clone()]).unwrap();
        let expected = &src.moment(&[b1.clone()]) - &(&(&e1 * &b1) * &e1);
        assert!(close(&k2, &expected, 1e-13));
        // κ₃ = E[a₁a₂a₃] − E[a₁]E[a₂a₃] − E[a₁E[a₂]a₃] − E[a₁a₂]E[a₃] + 2E[a₁]E[a₂]E[a₃]
        // with a₁ = X b₁, a₂ = X b₂, a₃ = X.
        let k3 = free_cumulant(&src, &[b1.clone(), b2.clone()]).unwrap();
        let e_a1 = &e1 * &b1;
        let e_a2 = &e1 * &b2;
        let e_a1a2 = &src.moment(&[b1.clone()]) * &b2;
        let e_a2a3 = src.moment(&[b2.clone()]);
        let e_a1_ea2_a3 = src.moment(&[&b1 * &e_a2]);
        let expected = &(&(&(&src.moment(&[b1.clone(), b2.clone()]) - &(&e_a1 * &e_a2a3)) - &e_a1_ea2_a3)
            - &(&e_a1a2 * &e1))
            + &(&(&e_a1 * &e_a2) * &e1).scale_real(2.0);
        assert!(close(&k3, &expected, 1e-12));
    }

    #[test]
    fn moment_cumulant_round_trip() {
        let src = model(21);
        for n in 1..=6 {
            let cs: Vec<ComplexMatrix> = (0..n - 1).map(|j| sym(30 + j as u64, 2)).collect();
            let mut total = ComplexMatrix::zeros(2, 2);
            for pi in enumerate_nc(n, false).unwrap() {
                total += &cumulant_pi(&pi, &src, &cs);
            }
            assert!(close(&total, &src.moment(&cs), 1e-11), "order {n}");
        }
    }

    #[test]
    fn moment_cumulant_round_trip_exact() {
        // A rational scalar distribution: uniform on {0, 1, 3}.
        let moments: Vec<Rational64> =
            (0..=7).map(|m| (r(0i64.pow(m)) + r(1) + r(3i64.pow(m))) / r(3)).collect();
        let src = ScalarMoments(moments.clone());
        for n in 1..=7 {
            let cs = vec![r(1); n - 1];
            let mut total = r(0);
            for pi in enumerate_nc(n, false).unwrap() {
                total += cumulant_pi(&pi, &src, &cs);
            }
            assert_eq!(total, moments[n]);
        }
        let kappa = scalar_free_cumulants(&moments);
        assert_eq!(scalar_moments_from_cumulants(&kappa, 7), moments);
        for n in 1..=7 {
            assert_eq!(free_cumulant(&src, &vec![r(1); n - 1]).unwrap(), kappa[n]);
        }
    }

    #[test]
    fn moment_pi_multiplicativity() {
        let src = model(41);
        let b = [sym(42, 2), sym(43, 2), sym(44, 2)];
        let pi = NCPartition::new(4, vec![vec![0, 3], vec![1, 2]]).unwrap();
        let expected = src.moment(&[&(&b[0] * &src.moment(&[b[1].clone()])) * &b[2]]);
        assert!(close(&moment_pi(&pi, &src, &b), &expected, 1e-13));
    }

    fn tensor(seed: u64, atoms: &[(f64, f64)]) -> ScalarTensor {
        let moments = (0..=8).map(|m| atoms.iter().map(|(w, t)| w * t.powi(m)).sum()).collect();
        ScalarTensor::new(sym(seed, 2), moments)
    }

    #[test]
    fn free_factorization_rules() {
        let x = tensor(51, &[(0.5, -1.0), (0.25, 0.5), (0.25, 2.0)]);
        let y = tensor(52, &[(0.3, 1.0), (0.7, -0.4)]);
        let sources: [&dyn MomentSource<ComplexMatrix>; 2] = [&x, &y];
        let b = sym(53, 2);
        let b2 = sym(54, 2);
        let ex = x.moment(&[]);
        let ey = y.moment(&[]);

        let xby = mixed_moment_free(&sources, &[0, 1], &[b.clone()]).unwrap();
        assert!(close(&xby, &(&(&ex * &b) * &ey), 1e-13));

        let xbybx = mixed_moment_free(&sources, &[0, 1, 0], &[b.clone(), b2.clone()]).unwrap();
        assert!(close(&xbybx, &x.moment(&[&(&b * &ey) * &b2]), 1e-13));

        let one = ComplexMatrix::identity(2);
        let xyxy = mixed_moment_free(&sources, &[0, 1, 0, 1], &[one.clone(), one.clone(), one.clone()]).unwrap();
        let expected = &(&(&ex * &y.moment(&[ex.clone()])) + &(&x.moment(&[ey.clone()]) * &ey))
            - &(&(&ex * &ey) * &(&ex * &ey));
        assert!(close(&xyxy, &expected, 1e-12));
    }

    #[test]
    fn cumulant_shortcut_agrees_with_generic_recursion() {
        let plain = tensor(61, &[(0.5, -2.0), (0.25, -1.0), (0.25, 1.0)]);
        let fast = plain.clone().with_cumulant_shortcut();
        for n in 1..=6 {
            let cs: Vec<ComplexMatrix> = (0..n - 1).map(|j| sym(70 + j as u64, 2)).collect();
            assert!(close(&free_cumulant(&plain, &cs).unwrap(), &free_cumulant(&fast, &cs).unwrap(), 1e-11));
        }
    }

    #[test]
    fn scalar_oracle_matches_operator_engine() {
        let atoms = [(0.5, -1.0), (0.5, 1.0)];
        let x = ScalarTensor::new(ComplexMatrix::scalar(ONE), (0..=8).map(|m| atoms.iter().map(|(w, t)| w * f64::powi(*t, m)).sum()).collect());
        let semi: Vec<f64> = (0..=8).map(|m| if m % 2 == 0 { catalan(m / 2) as f64 } else { 0.0 }).collect();
        let y = ScalarTensor::new(ComplexMatrix::scalar(ONE), semi.clone());
        let sources: [&dyn MomentSource<ComplexMatrix>; 2] = [&x, &y];
        let mut oracle = ScalarFreeOracle::from_moments(&[x.moments.clone(), semi]);
        for word in [vec![0, 1, 0, 1], vec![0, 0, 1, 1, 0, 1], vec![1, 0, 1, 1, 0, 1, 0, 0]] {
            let one = ComplexMatrix::scalar(ONE);
            let op = mixed_moment_free(&sources, &word, &vec![one; word.len() - 1]).unwrap()[(0, 0)].re;
            let sc = oracle.moment(&word).unwrap();
            assert!((op - sc).abs() < 1e-12, "{word:?}: {op} vs {sc}");
        }
    }

    #[test]
    fn free_sum_of_bernoullis_is_arcsine() {
        // Moments of x + y for free symmetric Bernoullis are the central binomials.
        let bern: Vec<f64> = (0..=10).map(|m| if m % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let mut oracle = ScalarFreeOracle::from_moments(&[bern.clone(), bern]);
        let p = crate::ncexpr::parse("x1 + x2", 2).unwrap().to_polynomial(2).unwrap();
        let m = polynomial_moments(&p, &mut oracle, 8).unwrap();
        for j in 0..=4 {
            let binom = (1..=j).fold(1.0, |acc, i| acc * (j + i) as f64 / i as f64);
            assert!((m[2 * j].re - binom).abs() < 1e-12);
            if j > 0 {
                assert!(m[2 * j - 1].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn free_semicircles_mixed() {
        let semi: Vec<f64> = (0..=8).map(|m| if m % 2 == 0 { catalan(m / 2) as f64 } else { 0.0 }).collect();
        let mut oracle = ScalarFreeOracle::from_moments(&[semi.clone(), semi]);
        assert!(oracle.moment(&[0, 1, 0, 1]).unwrap().abs() < 1e-15);
        assert!((oracle.moment(&[0, 0, 1, 1]).unwrap() - 1.0).abs() < 1e-15);
        assert!((oracle.moment(&[0; 8]).unwrap() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn pencil_moment_single_semicircle_tensor() {
        let a = sym(81, 2);
        let semi: Vec<f64> = (0..=6).map(|m| if m % 2 == 0 { catalan(m / 2) as f64 } else { 0.0 }).collect();
        let y = ScalarTensor::new(a.clone(), semi);
        let b0 = sym(82, 2);
        let s: [&dyn MomentSource<ComplexMatrix>; 1] = [&y];
        // E[(b₀ + a⊗s)²] = b₀² + a².
        let m2 = pencil_moment(&b0, &s, 2).unwrap();
        assert!(close(&m2, &(&(&b0 * &b0) + &(&a * &a)), 1e-13));
        // Versus the semicircular engine with η(c) = a c a.
        let eta = CovarianceMap::explicit(vec![a]).unwrap();
        let one = ComplexMatrix::identity(2);
        let zero_b0 = ComplexMatrix::zeros(2, 2);
        let m4 = pencil_moment(&zero_b0, &s, 4).unwrap();
        assert!(close(&m4, &semicircular_moment(&eta, &[one.clone(), one.clone(), one]).unwrap(), 1e-13));
    }
}
