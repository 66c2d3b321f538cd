//! Linearizations of polynomials and linear representations of rational
//! expressions.
//!
//! A *bordered* pencil `P̂ = [[0, u], [v, q]]` of size `1 + n` represents the
//! scalar-valued expression `−u q⁻¹ v`, i.e. the `(1,1)` Schur complement of
//! `P̂`. For polynomials `u` and `v` may contain variables; for rational
//! representations they are constant.

use thiserror::Error;

use crate::matalg::{kron, ComplexMatrix, MatError, C64, ONE, ZERO};
use crate::ncexpr::{ExprError, NCPolynomial, RationalExpr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizeError {
    #[error("the zero polynomial has no linearization; its distribution is the point mass at 0")]
    ZeroPolynomial,
    #[error("expression is not selfadjoint")]
    NotSelfadjoint,
    #[error("pencil coefficients must all be {size}x{size} ({detail})")]
    Shape { size: usize, detail: String },
    #[error("{0}")]
    Expr(#[from] ExprError),
    #[error("pencil block is singular at this point although the expression is defined: {0}")]
    RepresentationSingular(MatError),
}

/// Affine matrix tuple `b₀ ⊗ 1 + Σ_k b_k ⊗ x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPencil {
    num_vars: usize,
    size: usize,
    coefficients: Vec<ComplexMatrix>,
}

impl LinearPencil {
    /// `coefficients[0]` is the constant part, `coefficients[k]` multiplies `x_k`.
    pub fn new(coefficients: Vec<ComplexMatrix>) -> Result<Self, LinearizeError> {
        let size = coefficients.first().map_or(0, ComplexMatrix::rows);
        if size == 0 || coefficients.iter().any(|b| !b.is_square() || b.rows() != size) {
            return Err(LinearizeError::Shape { size, detail: "coefficient shapes differ".into() });
        }
        Ok(Self { num_vars: coefficients.len() - 1, size, coefficients })
    }

    pub fn zeros(num_vars: usize, size: usize) -> Self {
        Self { num_vars, size, coefficients: vec![ComplexMatrix::zeros(size, size); num_vars + 1] }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coefficients(&self) -> &[ComplexMatrix] {
        &self.coefficients
    }

    pub fn constant_term(&self) -> &ComplexMatrix {
        &self.coefficients[0]
    }

    /// Coefficient of `x_k` (0-based variable index).
    pub fn linear_term(&self, k: usize) -> &ComplexMatrix {
        &self.coefficients[k + 1]
    }

    /// Every coefficient exactly Hermitian.
    pub fn is_selfadjoint(&self) -> bool {
        self.coefficients.iter().all(ComplexMatrix::is_exactly_hermitian)
    }

    /// Entry `(r, c)` of coefficient `k` (0 = constant, `j + 1` = variable `j`).
    fn set(&mut self, k: usize, r: usize, c: usize, value: C64) {
        self.coefficients[k][(r, c)] = value;
    }

    fn entry(&self, k: usize, r: usize, c: usize) -> C64 {
        self.coefficients[k][(r, c)]
    }

    /// Coefficientwise conjugate transpose (variables are selfadjoint).
    pub fn adjoint(&self) -> Self {
        Self {
            num_vars: self.num_vars,
            size: self.size,
            coefficients: self.coefficients.iter().map(ComplexMatrix::adjoint).collect(),
        }
    }

    /// `Σ b_k ⊗ X_k` with `b₀ ⊗ 1_N`, using the block convention of `kron`.
    pub fn evaluate(&self, xs: &[ComplexMatrix]) -> Result<ComplexMatrix, LinearizeError> {
        if xs.len() < self.num_vars {
            return Err(LinearizeError::Shape {
                size: self.size,
                detail: format!("{} variables needed, {} supplied", self.num_vars, xs.len()),
            });
        }
        let n = xs.first().map_or(1, ComplexMatrix::rows);
        let mut out = kron(&self.coefficients[0], &ComplexMatrix::identity(n));
        for (b, x) in self.coefficients[1..].iter().zip(xs) {
            if b.max_abs() != 0.0 {
                out += &kron(b, x);
            }
        }
        Ok(out)
    }

    pub fn evaluate_scalar(&self, xs: &[C64]) -> ComplexMatrix {
        let mut out = self.coefficients[0].clone();
        for (b, &x) in self.coefficients[1..].iter().zip(xs) {
            out += &b.scale(x);
        }
        out
    }

    /// `(1,1)` Schur complement of the pencil evaluated at `xs`:
    /// `a − b d⁻¹ c` with `a` the leading `N × N` block.
    pub fn schur_complement(&self, xs: &[ComplexMatrix]) -> Result<ComplexMatrix, LinearizeError> {
        let n = xs.first().map_or(1, ComplexMatrix::rows);
        let full = self.evaluate(xs)?;
        let rest = full.rows() - n;
        let a = full.block(0, 0, n, n);
        if rest == 0 {
            return Ok(a);
        }
        let b = full.block(0, n, n, rest);
        let c = full.block(n, 0, rest, n);
        let d = full.block(n, n, rest, rest);
        let dinv = d.inverse().map_err(LinearizeError::RepresentationSingular)?;
        Ok(&a - &(&b * &(&dinv * &c)))
    }

    /// Selfadjoint doubling of a bordered pencil `[[0,u],[v,q]]` of size `1 + n`:
    /// `½[[0, u, v*], [u*, 0, q*], [v, q, 0]]` of size `2n + 1`, whose Schur
    /// complement is `½(p + p*)`.
    pub fn double(&self) -> LinearPencil {
        let n = self.size - 1;
        let mut out = LinearPencil::zeros(self.num_vars, 2 * n + 1);
        for k in 0..=self.num_vars {
            for j in 0..n {
                let u = self.entry(k, 0, 1 + j) * 0.5;
                let v = self.entry(k, 1 + j, 0) * 0.5;
                // Row 0: (0, u, v*); column 0: (0, u*, v).
                out.set(k, 0, 1 + j, u);
                out.set(k, 1 + j, 0, u.conj());
                out.set(k, 0, 1 + n + j, v.conj());
                out.set(k, 1 + n + j, 0, v);
                for i in 0..n {
                    let q = self.entry(k, 1 + i, 1 + j) * 0.5;
                    out.set(k, 1 + n + i, 1 + j, q);
                    out.set(k, 1 + j, 1 + n + i, q.conj());
                }
            }
        }
        out
    }
}

/// Bordered pencil for one monomial `α x_{i₁} ⋯ x_{i_k}`: size 2 for `k ≤ 1`,
/// the `k × k` staircase otherwise.
fn monomial_block(num_vars: usize, alpha: C64, word: &[usize]) -> LinearPencil {
    let k = word.len();
    if k <= 1 {
        // [[0, α or α x_i], [1, −1]]
        let mut p = LinearPencil::zeros(num_vars, 2);
        match word.first() {
            None => p.set(0, 0, 1, alpha),
            Some(&i) => p.set(i + 1, 0, 1, alpha),
        }
        p.set(0, 1, 0, ONE);
        p.set(0, 1, 1, -ONE);
        return p;
    }
    let mut p = LinearPencil::zeros(num_vars, k);
    p.set(word[0] + 1, 0, k - 1, alpha);
    for j in 1..k {
        p.set(word[j] + 1, j, k - 1 - j, ONE);
        p.set(0, j, k - j, -ONE);
    }
    p
}

/// Bordered linearization `[[0, u], [v, q]]` with `p = −u q⁻¹ v`: one block
/// per monomial, stacked along the diagonal of `q`. The size is
/// `1 + Σ max(kᵢ − 1, 1)` for monomial degrees `kᵢ`.
pub fn linearize_polynomial(p: &NCPolynomial) -> Result<LinearPencil, LinearizeError> {
    if p.is_zero() {
        return Err(LinearizeError::ZeroPolynomial);
    }
    let d = p.num_vars();
    let blocks: Vec<LinearPencil> =
        p.terms().iter().map(|t| monomial_block(d, t.coefficient, &t.word)).collect();
    let inner: usize = blocks.iter().map(|b| b.size - 1).sum();
    let mut out = LinearPencil::zeros(d, 1 + inner);
    let mut offset = 1;
    for b in &blocks {
        let m = b.size - 1;
        for k in 0..=d {
            for j in 0..m {
                out.set(k, 0, offset + j, b.entry(k, 0, 1 + j));
                out.set(k, offset + j, 0, b.entry(k, 1 + j, 0));
                for i in 0..m {
                    out.set(k, offset + i, offset + j, b.entry(k, 1 + i, 1 + j));
                }
            }
        }
        offset += m;
    }
    Ok(out)
}

/// Selfadjoint pencil for a selfadjoint polynomial from its bordered linearization.
pub fn symmetrize(p: &NCPolynomial, bordered: &LinearPencil) -> Result<LinearPencil, LinearizeError> {
    if !p.is_selfadjoint() {
        return Err(LinearizeError::NotSelfadjoint);
    }
    Ok(bordered.double())
}

/// Linear representation `(u, q, v)` with `r = −u q⁻¹ v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRepresentation {
    pub u: Vec<C64>,
    pub q: LinearPencil,
    pub v: Vec<C64>,
}

impl LinearRepresentation {
    pub fn size(&self) -> usize {
        self.q.size()
    }

    /// The pencil `[[0, u], [v, q]]`.
    pub fn bordered(&self) -> LinearPencil {
        let n = self.size();
        let mut out = LinearPencil::zeros(self.q.num_vars(), n + 1);
        for j in 0..n {
            out.set(0, 0, 1 + j, self.u[j]);
            out.set(0, 1 + j, 0, self.v[j]);
        }
        for k in 0..=self.q.num_vars() {
            out.coefficients[k].set_block(1, 1, &self.q.coefficients[k]);
        }
        out
    }

    /// `−(u ⊗ 1) q(X)⁻¹ (v ⊗ 1)`.
    pub fn evaluate(&self, xs: &[ComplexMatrix]) -> Result<ComplexMatrix, LinearizeError> {
        self.bordered().schur_complement(xs)
    }
}

fn leaf_representation(num_vars: usize, coefficient_index: usize, value: C64) -> LinearRepresentation {
    let mut q = LinearPencil::zeros(num_vars, 2);
    q.set(coefficient_index, 0, 0, value);
    q.set(0, 0, 1, -ONE);
    q.set(0, 1, 0, -ONE);
    LinearRepresentation { u: vec![ZERO, ONE], q, v: vec![ZERO, ONE] }
}

/// Linear representation built recursively: leaves, block-diagonal sums,
/// the product rule and the inverse rule.
pub fn represent_rational(r: &RationalExpr, num_vars: usize) -> LinearRepresentation {
    match r {
        RationalExpr::Constant(c) => leaf_representation(num_vars, 0, *c),
        RationalExpr::Variable(j) => leaf_representation(num_vars, j + 1, ONE),
        RationalExpr::Sum(a, b) => {
            let (ra, rb) = (represent_rational(a, num_vars), represent_rational(b, num_vars));
            let (n1, n2) = (ra.size(), rb.size());
            let mut q = LinearPencil::zeros(num_vars, n1 + n2);
            for k in 0..=num_vars {
                q.coefficients[k].set_block(0, 0, &ra.q.coefficients[k]);
                q.coefficients[k].set_block(n1, n1, &rb.q.coefficients[k]);
            }
            let u = ra.u.iter().chain(&rb.u).copied().collect();
            let v = ra.v.iter().chain(&rb.v).copied().collect();
            LinearRepresentation { u, q, v }
        }
        RationalExpr::Product(a, b) => {
            // ((0, u₁), [[v₁u₂, q₁], [q₂, 0]], (0; v₂))
            let (r1, r2) = (represent_rational(a, num_vars), represent_rational(b, num_vars));
            let (n1, n2) = (r1.size(), r2.size());
            let mut q = LinearPencil::zeros(num_vars, n1 + n2);
            for k in 0..=num_vars {
                q.coefficients[k].set_block(0, n2, &r1.q.coefficients[k]);
                q.coefficients[k].set_block(n1, 0, &r2.q.coefficients[k]);
            }
            for i in 0..n1 {
                for j in 0..n2 {
                    q.set(0, i, j, r1.v[i] * r2.u[j]);
                }
            }
            let mut u = vec![ZERO; n2];
            u.extend_from_slice(&r1.u);
            let mut v = vec![ZERO; n1];
            v.extend_from_slice(&r2.v);
            LinearRepresentation { u, q, v }
        }
        RationalExpr::Inverse(a) => {
            // ((1, 0), [[0, u], [v, −q]], (1; 0))
            let inner = represent_rational(a, num_vars);
            let n = inner.size();
            let mut q = LinearPencil::zeros(num_vars, n + 1);
            for j in 0..n {
                q.set(0, 0, 1 + j, inner.u[j]);
                q.set(0, 1 + j, 0, inner.v[j]);
            }
            for k in 0..=num_vars {
                q.coefficients[k].set_block(1, 1, &-&inner.q.coefficients[k]);
            }
            let mut u = vec![ZERO; n + 1];
            u[0] = ONE;
            LinearRepresentation { u: u.clone(), q, v: u }
        }
    }
}

/// `‖r(X) + u q(X)⁻¹ v‖` (Frobenius, over the amplified matrices).
pub fn schur_check(r: &RationalExpr, rep: &LinearRepresentation, xs: &[ComplexMatrix]) -> Result<f64, LinearizeError> {
    let direct = r.evaluate(xs)?;
    let via_pencil = rep.evaluate(xs)?;
    Ok((&direct - &via_pencil).frobenius_norm())
}

/// Same residual for a bordered polynomial linearization.
pub fn polynomial_schur_check(
    p: &NCPolynomial,
    bordered: &LinearPencil,
    xs: &[ComplexMatrix],
) -> Result<f64, LinearizeError> {
    let direct = p.evaluate(xs)?;
    let via_pencil = bordered.schur_complement(xs)?;
    Ok((&direct - &via_pencil).frobenius_norm())
}

/// Which construction produced a selfadjoint pencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilSource {
    Polynomial,
    Rational,
}

/// Selfadjoint pencil whose `(1,1)` Schur complement is the given selfadjoint
/// expression: polynomial linearization when possible, linear representation
/// otherwise, doubled at the root.
pub fn selfadjoint_pencil(expr: &RationalExpr, num_vars: usize) -> Result<(LinearPencil, PencilSource), LinearizeError> {
    if !expr.is_selfadjoint() {
        return Err(LinearizeError::NotSelfadjoint);
    }
    match expr.to_polynomial(num_vars) {
        Some(p) => {
            let bordered = linearize_polynomial(&p)?;
            Ok((symmetrize(&p, &bordered)?, PencilSource::Polynomial))
        }
        None => Ok((represent_rational(expr, num_vars).bordered().double(), PencilSource::Rational)),
    }
}
