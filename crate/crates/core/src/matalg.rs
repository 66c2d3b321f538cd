//! Dense complex matrices and the half-plane geometry used by every solver.
//!
//! Matrices are stored row-major. Amplification follows the convention
//! `M_m(M_n(C))`: the entry `(a, b)` of block `(i, j)` lives at row `i * n + a`,
//! column `j * n + b`, so `1_m ⊗ c` is block-diagonal with `m` copies of `c`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative pivot threshold below which elimination declares a matrix singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-14;
/// Off-diagonal Frobenius norm at which cyclic Jacobi stops.
pub const JACOBI_TOL: f64 = 1e-12;
/// Membership in a strict half-plane requires the certificate to exceed this.
pub const HALF_PLANE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is numerically singular (pivot magnitude {pivot:.3e})")]
    Singular { pivot: f64 },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, MatError> {
        if rows == 0 || cols == 0 {
            return Err(MatError::Dimension("matrices must have at least one row and column".into()));
        }
        if data.len() != rows * cols {
            return Err(MatError::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MatError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar_identity(n, ONE)
    }

    /// `c · 1_n`.
    pub fn scalar_identity(n: usize, c: C64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = c;
        }
        m
    }

    pub fn scalar(c: C64) -> Self {
        Self { rows: 1, cols: 1, data: vec![c] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// Build from nested rows; panics on ragged input (test and literal convenience).
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let rows: Vec<Vec<C64>> =
            rows.iter().map(|row| row.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(C64::conj).collect() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Trace divided by the dimension.
    pub fn normalized_trace(&self) -> C64 {
        self.trace() / self.rows as f64
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|r| (r..self.cols).all(|c| (self[(r, c)] - self[(c, r)].conj()).norm() <= tol))
    }

    /// Exact structural check used for assembled pencils.
    pub fn is_exactly_hermitian(&self) -> bool {
        self.is_square() && (0..self.rows).all(|r| (r..self.cols).all(|c| self[(r, c)] == self[(c, r)].conj()))
    }

    pub fn is_diagonal(&self) -> bool {
        self.is_square()
            && self.data.iter().enumerate().all(|(k, z)| k / self.cols == k % self.cols || *z == ZERO)
    }

    /// `1_m ⊗ self`.
    pub fn amplify(&self, m: usize) -> Self {
        kron(&Self::identity(m), self)
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self[(r0 + r, c0 + c)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &ComplexMatrix) {
        for r in 0..b.rows {
            for c in 0..b.cols {
                self[(r0 + r, c0 + c)] = b[(r, c)];
            }
        }
    }

    /// `(a − a*)/(2i)`, exactly Hermitian; panics if not square. See [`imaginary_part`] for the checked form.
    pub fn im_part(&self) -> Self {
        assert!(self.is_square(), "imaginary part of a non-square matrix");
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for r in 0..n {
            out[(r, r)] = C64::new(self[(r, r)].im, 0.0);
            for c in r + 1..n {
                let v = (self[(r, c)] - self[(c, r)].conj()) * C64::new(0.0, -0.5);
                out[(r, c)] = v;
                out[(c, r)] = v.conj();
            }
        }
        out
    }

    /// `(a + a*)/2`, exactly Hermitian.
    pub fn re_part(&self) -> Self {
        assert!(self.is_square(), "real part of a non-square matrix");
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for r in 0..n {
            out[(r, r)] = C64::new(self[(r, r)].re, 0.0);
            for c in r + 1..n {
                let v = (self[(r, c)] + self[(c, r)].conj()) * 0.5;
                out[(r, c)] = v;
                out[(c, r)] = v.conj();
            }
        }
        out
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self, MatError> {
        if !self.is_square() {
            return Err(MatError::Dimension(format!("cannot invert a {}x{} matrix", self.rows, self.cols)));
        }
        let n = self.rows;
        let scale = self.max_abs();
        if scale == 0.0 {
            return Err(MatError::Singular { pivot: 0.0 });
        }
        let threshold = SINGULAR_PIVOT_RTOL * scale;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let (piv_row, piv_abs) = (col..n)
                .map(|r| (r, a[r * n + col].norm()))
                .fold((col, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
            if piv_abs < threshold {
                return Err(MatError::Singular { pivot: piv_abs });
            }
            if piv_row != col {
                for k in 0..n {
                    a.swap(col * n + k, piv_row * n + k);
                    inv.swap(col * n + k, piv_row * n + k);
                }
            }
            let p = a[col * n + col].inv();
            for k in 0..n {
                a[col * n + k] *= p;
                inv[col * n + k] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == ZERO {
                    continue;
                }
                for k in 0..n {
                    let ak = a[col * n + k];
                    let ik = inv[col * n + k];
                    a[r * n + k] -= f * ak;
                    inv[r * n + k] -= f * ik;
                }
            }
        }
        Ok(Self { rows: n, cols: n, data: inv })
    }

    /// Matrix product; diagonal operands take an `O(n²)` path.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<Self, MatError> {
        if self.cols != rhs.rows {
            return Err(MatError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        if self.is_square() && self.rows > 8 && self.is_diagonal() {
            let mut out = rhs.clone();
            for r in 0..out.rows {
                let d = self.data[r * self.cols + r];
                out.data[r * rhs.cols..(r + 1) * rhs.cols].iter_mut().for_each(|z| *z *= d);
            }
            return Ok(out);
        }
        if rhs.is_square() && rhs.rows > 8 && rhs.is_diagonal() {
            let mut out = self.clone();
            for r in 0..out.rows {
                for c in 0..out.cols {
                    out.data[r * out.cols + c] *= rhs.data[c * rhs.cols + c];
                }
            }
            return Ok(out);
        }
        Ok(matmul_dense(self, rhs))
    }

    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>, MatError> {
        hermitian_eigenvalues(self)
    }
}

fn matmul_dense(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    use rayon::prelude::*;
    const ROWS: usize = 4;
    let (m, k, n) = (a.rows, a.cols, b.cols);
    // Split planes so the inner loops are plain f64 and vectorize.
    let b_re: Vec<f64> = b.data.iter().map(|z| z.re).collect();
    let b_im: Vec<f64> = b.data.iter().map(|z| z.im).collect();
    let mut out = vec![ZERO; m * n];
    let kernel = |(blk, out_rows): (usize, &mut [C64])| {
        let r0 = blk * ROWS;
        let rows = out_rows.len() / n.max(1);
        let mut re = vec![0.0; rows * n];
        let mut im = vec![0.0; rows * n];
        for p in 0..k {
            let br = &b_re[p * n..(p + 1) * n];
            let bi = &b_im[p * n..(p + 1) * n];
            for i in 0..rows {
                let av = a.data[(r0 + i) * k + p];
                if av == ZERO {
                    continue;
                }
                let (ar, ai) = (av.re, av.im);
                let ore = &mut re[i * n..(i + 1) * n];
                let oim = &mut im[i * n..(i + 1) * n];
                for j in 0..n {
                    ore[j] += ar * br[j] - ai * bi[j];
                    oim[j] += ar * bi[j] + ai * br[j];
                }
            }
        }
        for (o, (x, y)) in out_rows.iter_mut().zip(re.iter().zip(&im)) {
            *o = C64::new(*x, *y);
        }
    };
    if n == 0 {
        return ComplexMatrix { rows: m, cols: n, data: out };
    }
    if m * n * k > 1 << 18 {
        out.par_chunks_mut(ROWS * n).enumerate().for_each(kernel);
    } else {
        out.chunks_mut(ROWS * n).enumerate().for_each(kernel);
    }
    ComplexMatrix { rows: m, cols: n, data: out }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:>10.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

macro_rules! elementwise {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                ComplexMatrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $tr<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                (&self).$method(rhs)
            }
        }
    };
}

elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Matrix product; panics on shape mismatch. Use [`ComplexMatrix::matmul`] to get an error instead.
impl Mul<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Mul<ComplexMatrix> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self * &rhs
    }
}

impl Mul<&ComplexMatrix> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        &self * rhs
    }
}

impl Mul<ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        self * &rhs
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    ComplexMatrix::from_fn(a.rows * br, a.cols * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Block-diagonal `a ⊕ b`.
pub fn direct_sum(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows + b.rows, a.cols + b.cols);
    out.set_block(0, 0, a);
    out.set_block(a.rows, a.cols, b);
    out
}

fn require_square(a: &ComplexMatrix, what: &str) -> Result<(), MatError> {
    if a.is_square() {
        Ok(())
    } else {
        Err(MatError::Dimension(format!("{what} needs a square matrix, got {}x{}", a.rows, a.cols)))
    }
}

/// `Im(a) = (a − a*)/(2i)`, Hermitian by construction.
pub fn imaginary_part(a: &ComplexMatrix) -> Result<ComplexMatrix, MatError> {
    require_square(a, "imaginary_part")?;
    Ok(a.im_part())
}

pub fn solve_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix, MatError> {
    a.inverse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfPlane {
    Upper,
    Lower,
}

/// Witness that `±Im(matrix) ⪰ epsilon · 1`.
#[derive(Debug, Clone)]
pub struct HalfPlaneCertificate {
    pub matrix: ComplexMatrix,
    pub sign: HalfPlane,
    pub epsilon: f64,
}

impl HalfPlaneCertificate {
    pub fn is_member(&self) -> bool {
        self.epsilon > HALF_PLANE_TOL
    }
}

/// Largest `ε ≥ 0` with `±Im(a) ⪰ ε·1`; panics if `a` is not square.
pub fn half_plane_membership(a: &ComplexMatrix, sign: HalfPlane) -> HalfPlaneCertificate {
    let im = a.im_part();
    let im = match sign {
        HalfPlane::Upper => im,
        HalfPlane::Lower => -im,
    };
    let lowest = hermitian_eigenvalues(&im).map(|ev| ev[0]).unwrap_or(f64::NEG_INFINITY);
    HalfPlaneCertificate { matrix: a.clone(), sign, epsilon: lowest.max(0.0) }
}

/// Smallest eigenvalue of `Im(a)`, signed (no flooring); diagnostics for Loewner-order checks.
pub fn min_imaginary_eigenvalue(a: &ComplexMatrix) -> f64 {
    hermitian_eigenvalues(&a.im_part()).map(|ev| ev[0]).unwrap_or(f64::NEG_INFINITY)
}

/// Largest singular value via power iteration on `a* a`.
pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    let n = a.cols;
    if a.max_abs() == 0.0 {
        return 0.0;
    }
    let ata = &a.adjoint() * a;
    // Deterministic, non-degenerate start vector.
    let mut x: Vec<C64> = (0..n).map(|k| C64::new(1.0 + 0.1 * k as f64, 0.05 * k as f64)).collect();
    let mut lambda = 0.0_f64;
    for _ in 0..20_000 {
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|z| *z /= norm);
        let y: Vec<C64> = (0..n).map(|r| ata.row(r).iter().zip(&x).map(|(m, v)| m * v).sum()).collect();
        let next = x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        x = y;
        if (next - lambda).abs() <= 1e-10 * next.abs().max(f64::MIN_POSITIVE) {
            return next.max(0.0).sqrt();
        }
        lambda = next;
    }
    // Nearly degenerate top singular values: fall back to the full spectrum.
    hermitian_eigenvalues(&ata).map(|ev| ev.last().copied().unwrap_or(0.0).max(0.0).sqrt()).unwrap_or(lambda.sqrt())
}

/// Eigenvalues (ascending) of a Hermitian matrix. Uses cyclic Jacobi up to
/// dimension 64 and Householder tridiagonalization with implicit QL above.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>, MatError> {
    require_square(a, "hermitian_eigenvalues")?;
    if a.rows <= 64 {
        Ok(eigvalsh_jacobi(a))
    } else {
        Ok(eigvalsh_householder(a))
    }
}

/// Cyclic Jacobi on a complex Hermitian matrix.
pub fn eigvalsh_jacobi(a: &ComplexMatrix) -> Vec<f64> {
    let n = a.rows;
    let mut m = a.re_part();
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 =
            (0..n).flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c))).map(|(r, c)| m[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        if off <= JACOBI_TOL * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                // Make the (p, q) entry real by rephasing index q.
                let phase = apq / r;
                for k in 0..n {
                    m[(k, q)] *= phase.conj();
                }
                for k in 0..n {
                    m[(q, k)] *= phase;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = mkp * c - mkq * s;
                    m[(k, q)] = mkp * s + mkq * c;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = mpk * c - mqk * s;
                    m[(q, k)] = mpk * s + mqk * c;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Householder reduction of a Hermitian matrix to real symmetric tridiagonal
/// form (diagonal, sub-diagonal).
pub fn hermitian_tridiagonalize(a: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    use rayon::prelude::*;
    let n = a.rows;
    let mut m = a.re_part().data;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for k in 0..n.saturating_sub(1) {
        let len = n - k - 1;
        // Column k below the diagonal.
        let alpha = m[(k + 1) * n + k];
        let xnorm_sq: f64 = (k + 2..n).map(|r| m[r * n + k].norm_sqr()).sum();
        diag[k] = m[k * n + k].re;
        if xnorm_sq == 0.0 && alpha.im == 0.0 {
            off[k] = alpha.re;
            continue;
        }
        let beta = -alpha.re.signum_nonzero() * (alpha.norm_sqr() + xnorm_sq).sqrt();
        let tau = C64::new((beta - alpha.re) / beta, -alpha.im / beta);
        let inv = (alpha - beta).inv();
        let v = &mut v[..len];
        v[0] = ONE;
        for (i, r) in (k + 2..n).enumerate() {
            v[i + 1] = m[r * n + k] * inv;
        }
        off[k] = beta;
        // w = tau * A22 v
        let w = &mut w[..len];
        let base = k + 1;
        {
            let mref = &m;
            let vref = &*v;
            w.par_iter_mut().with_min_len(64).enumerate().for_each(|(i, wi)| {
                let row = &mref[(base + i) * n + base..(base + i) * n + n];
                let s: C64 = row.iter().zip(vref).map(|(a, b)| a * b).sum();
                *wi = tau * s;
            });
        }
        // w -= (tau/2) (w^H v) v
        let dot: C64 = w.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        let corr = -0.5 * tau * dot;
        for (wi, vi) in w.iter_mut().zip(v.iter()) {
            *wi += corr * vi;
        }
        // A22 -= v w^H + w v^H
        {
            let vref = &*v;
            let wref = &*w;
            m[base * n..].par_chunks_mut(n).with_min_len(16).enumerate().for_each(|(i, row)| {
                let (vi, wi) = (vref[i], wref[i]);
                for ((x, vj), wj) in row[base..].iter_mut().zip(vref).zip(wref) {
                    *x -= vi * wj.conj() + wi * vj.conj();
                }
            });
        }
    }
    if n > 0 {
        diag[n - 1] = m[(n - 1) * n + (n - 1)].re;
    }
    (diag, off)
}

trait SignumNonZero {
    fn signum_nonzero(self) -> f64;
}

impl SignumNonZero for f64 {
    fn signum_nonzero(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Eigenvalues of a real symmetric tridiagonal matrix by implicit-shift QL.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..off.len()].copy_from_slice(off);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

pub fn eigvalsh_householder(a: &ComplexMatrix) -> Vec<f64> {
    let (d, e) = hermitian_tridiagonalize(a);
    tridiagonal_eigenvalues(&d, &e)
}
