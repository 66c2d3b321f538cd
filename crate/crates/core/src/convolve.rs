//! Operator-valued additive free convolution through the subordination fixed
//! point, folded pairwise over the summands of a pencil.

use crate::cauchy::{
    check_argument, damped_iterate, summand_evaluator, CauchyEvaluator, ConstantEvaluator, Evaluation, FreeVariableSpec,
    IterationControl, SemicircularEvaluator, SolverError, WarmState,
};
use crate::linearize::LinearPencil;
use crate::matalg::{min_imaginary_eigenvalue, ComplexMatrix};
use crate::oracle::CovarianceMap;

fn invert(a: &ComplexMatrix, stage: &str) -> Result<ComplexMatrix, SolverError> {
    a.inverse().map_err(|source| SolverError::Singular { stage: stage.to_string(), source })
}

/// `h(z) = G(z)⁻¹ − z`.
pub fn h_transform(g: &dyn CauchyEvaluator, z: &ComplexMatrix) -> Result<ComplexMatrix, SolverError> {
    check_argument(g.dim(), z)?;
    Ok(&invert(&g.evaluate(z)?, "h-transform")? - z)
}

fn h_warm(
    g: &dyn CauchyEvaluator,
    z: &ComplexMatrix,
    warm: &mut WarmState,
    stats: &mut (usize, f64),
) -> Result<(ComplexMatrix, ComplexMatrix), SolverError> {
    let ev = g.evaluate_warm(z, warm)?;
    stats.0 += ev.iterations;
    stats.1 = stats.1.max(ev.residual);
    let h = &invert(&ev.g, "h-transform")? - z;
    Ok((h, ev.g))
}

#[derive(Debug, Clone)]
pub struct SubordinationState {
    pub omega1: ComplexMatrix,
    pub omega2: ComplexMatrix,
    /// `G₁(ω₁)`, the value of the convolution.
    pub g: ComplexMatrix,
    /// `‖f_z(ω₁) − ω₁‖`.
    pub residual: f64,
    /// `‖G₁(ω₁) − G₂(ω₂)‖`.
    pub consistency: f64,
    /// Outer iterations only.
    pub iterations: usize,
    /// Outer plus nested iterations.
    pub total_iterations: usize,
}

impl SubordinationState {
    /// Smallest eigenvalue of `Im ω_j − Im z` over both subordination functions.
    pub fn min_imaginary_gain(&self, z: &ComplexMatrix) -> f64 {
        let imz = z.im_part();
        let a = min_imaginary_eigenvalue(&(&self.omega1 - &imz.scale(crate::matalg::I)));
        let b = min_imaginary_eigenvalue(&(&self.omega2 - &imz.scale(crate::matalg::I)));
        a.min(b)
    }
}

fn subordinate_warm(
    left: &dyn CauchyEvaluator,
    right: &dyn CauchyEvaluator,
    z: &ComplexMatrix,
    control: IterationControl,
    warm: &mut WarmState,
) -> Result<SubordinationState, SolverError> {
    let start = warm.point.as_ref().filter(|p| p.rows() == z.rows()).cloned().unwrap_or_else(|| z.clone());
    let mut left_warm = std::mem::take(warm.child(0));
    let mut right_warm = std::mem::take(warm.child(1));
    let mut nested = (0usize, 0.0f64);
    let mut f = |w: &ComplexMatrix| -> Result<ComplexMatrix, SolverError> {
        let (h1, _) = h_warm(left, w, &mut left_warm, &mut nested).map_err(|e| e.within("left summand"))?;
        let (h2, _) = h_warm(right, &(&h1 + z), &mut right_warm, &mut nested).map_err(|e| e.within("right summand"))?;
        Ok(&h2 + z)
    };
    let (omega1, stats) = damped_iterate(&mut f, start, control, "subordination")?;
    let (h1, g1) = h_warm(left, &omega1, &mut left_warm, &mut nested)?;
    let omega2 = &h1 + z;
    let (h2, g2) = h_warm(right, &omega2, &mut right_warm, &mut nested)?;
    let residual = (&(&h2 + z) - &omega1).frobenius_norm();
    let consistency = (&g1 - &g2).frobenius_norm();
    warm.point = Some(omega1.clone());
    warm.children[0] = left_warm;
    warm.children[1] = right_warm;
    Ok(SubordinationState {
        omega1,
        omega2,
        g: g1,
        residual,
        consistency,
        iterations: stats.iterations,
        total_iterations: stats.iterations + nested.0,
    })
}

/// Subordination functions of `X₁ + X₂` at `z` for free `X₁`, `X₂` with the
/// given Cauchy transforms.
pub fn subordinate(
    left: &dyn CauchyEvaluator,
    right: &dyn CauchyEvaluator,
    z: &ComplexMatrix,
) -> Result<SubordinationState, SolverError> {
    if left.dim() != right.dim() {
        return Err(SolverError::Dimension(format!("summand sizes {} and {}", left.dim(), right.dim())));
    }
    check_argument(left.dim(), z)?;
    subordinate_warm(left, right, z, IterationControl::default(), &mut WarmState::default())
}

/// Cauchy transform of the free sum of two evaluators.
pub struct ConvolvedEvaluator {
    pub left: Box<dyn CauchyEvaluator>,
    pub right: Box<dyn CauchyEvaluator>,
    pub control: IterationControl,
}

impl ConvolvedEvaluator {
    pub fn new(left: Box<dyn CauchyEvaluator>, right: Box<dyn CauchyEvaluator>) -> Result<Self, SolverError> {
        if left.dim() != right.dim() {
            return Err(SolverError::Dimension(format!("summand sizes {} and {}", left.dim(), right.dim())));
        }
        Ok(Self { left, right, control: IterationControl::default() })
    }

    pub fn subordinate_warm(&self, z: &ComplexMatrix, warm: &mut WarmState) -> Result<SubordinationState, SolverError> {
        subordinate_warm(self.left.as_ref(), self.right.as_ref(), z, self.control, warm)
    }
}

impl CauchyEvaluator for ConvolvedEvaluator {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    fn evaluate_warm(&self, z: &ComplexMatrix, warm: &mut WarmState) -> Result<Evaluation, SolverError> {
        let s = self.subordinate_warm(z, warm).map_err(|e| e.within(&self.label()))?;
        Ok(Evaluation { g: s.g, iterations: s.total_iterations, residual: s.residual })
    }

    fn label(&self) -> String {
        format!("({} ⊞ {})", self.left.label(), self.right.label())
    }
}

/// Cauchy transform of `b₀ ⊗ 1 + Σ_k b_k ⊗ X_k`: the fold of the summands with
/// the argument shifted by `b₀`.
pub struct PencilEvaluator {
    b0: ComplexMatrix,
    fold: Option<Box<dyn CauchyEvaluator>>,
}

impl PencilEvaluator {
    pub fn constant_term(&self) -> &ComplexMatrix {
        &self.b0
    }

    /// `G_fold(z − 1_m ⊗ b₀)`; also used directly by callers that have
    /// already formed `z`.
    pub fn evaluate_checked(&self, z: &ComplexMatrix, warm: &mut WarmState) -> Result<Evaluation, SolverError> {
        check_argument(self.dim(), z)?;
        self.evaluate_warm(z, warm)
    }
}

impl CauchyEvaluator for PencilEvaluator {
    fn dim(&self) -> usize {
        self.b0.rows()
    }

    fn evaluate_warm(&self, z: &ComplexMatrix, warm: &mut WarmState) -> Result<Evaluation, SolverError> {
        match &self.fold {
            None => ConstantEvaluator { b0: self.b0.clone() }.evaluate_warm(z, warm),
            Some(fold) => {
                let shifted = z - &self.b0.amplify(z.rows() / self.dim());
                fold.evaluate_warm(&shifted, warm)
            }
        }
    }

    fn label(&self) -> String {
        match &self.fold {
            None => "constant".into(),
            Some(f) => format!("shift ∘ {}", f.label()),
        }
    }
}

/// Left fold `((S₁ ⊞ S₂) ⊞ S₃) ⊞ …` shifted by `b₀`.
pub fn convolve_pencil(b0: &ComplexMatrix, summands: Vec<Box<dyn CauchyEvaluator>>) -> Result<PencilEvaluator, SolverError> {
    if summands.is_empty() {
        return Err(SolverError::Dimension("at least one summand is required".into()));
    }
    if !b0.is_hermitian(1e-12) {
        return Err(SolverError::InvalidSpec("constant term must be Hermitian".into()));
    }
    let n = b0.rows();
    if summands.iter().any(|s| s.dim() != n) {
        return Err(SolverError::Dimension(format!("all summands must act on M_{n}")));
    }
    let mut it = summands.into_iter();
    let mut acc = it.next().unwrap();
    for s in it {
        acc = Box::new(ConvolvedEvaluator::new(acc, s)?);
    }
    Ok(PencilEvaluator { b0: b0.clone(), fold: Some(acc) })
}

/// Evaluator for a linear pencil with free variables of the given
/// distributions. Zero coefficients are dropped and all semicircular
/// summands are merged into one covariance; atomic summands are folded
/// first, the semicircular part last.
pub fn pencil_evaluator(pencil: &LinearPencil, specs: &[FreeVariableSpec]) -> Result<PencilEvaluator, SolverError> {
    if specs.len() != pencil.num_vars() {
        return Err(SolverError::Dimension(format!(
            "pencil has {} variables but {} distributions were given",
            pencil.num_vars(),
            specs.len()
        )));
    }
    let b0 = pencil.constant_term().clone();
    let mut summands: Vec<Box<dyn CauchyEvaluator>> = Vec::new();
    let mut semicircular: Vec<ComplexMatrix> = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let c = pencil.linear_term(k);
        if c.max_abs() == 0.0 {
            continue;
        }
        match spec {
            FreeVariableSpec::Semicircular { variance } => {
                if !c.is_hermitian(1e-12) {
                    return Err(SolverError::InvalidSpec("pencil coefficients must be Hermitian".into()));
                }
                semicircular.push(c.scale_real(variance.sqrt()));
            }
            FreeVariableSpec::Atomic { .. } => summands.push(summand_evaluator(c, spec)?),
        }
    }
    if !semicircular.is_empty() {
        let eta = CovarianceMap::explicit(semicircular).map_err(|e| SolverError::InvalidSpec(e.to_string()))?;
        summands.push(Box::new(SemicircularEvaluator::new(eta)));
    }
    if summands.is_empty() {
        if !b0.is_hermitian(1e-12) {
            return Err(SolverError::InvalidSpec("constant term must be Hermitian".into()));
        }
        return Ok(PencilEvaluator { b0, fold: None });
    }
    convolve_pencil(&b0, summands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::{hrs_fixed_point, semicircle_closed_form, AtomicEvaluator};
    use crate::matalg::{C64, I, ONE};

    fn scalar(z: C64) -> ComplexMatrix {
        ComplexMatrix::scalar(z)
    }

    fn one() -> ComplexMatrix {
        ComplexMatrix::scalar(ONE)
    }

    #[test]
    fn h_transform_examples() {
        let z = scalar(C64::new(0.3, 0.8));
        let delta0 = AtomicEvaluator { coefficient: one(), atoms: vec![(1.0, 0.0)] };
        assert!(h_transform(&delta0, &z).unwrap().max_abs() < 1e-15);
        let semi = SemicircularEvaluator::new(CovarianceMap::scalar(1, 1.0));
        let h = h_transform(&semi, &z).unwrap()[(0, 0)];
        // F = 1/G = z − G, so h = −G.
        assert!((h + semicircle_closed_form(z[(0, 0)], 1.0)).norm() < 1e-10);
        let bern = AtomicEvaluator { coefficient: one(), atoms: vec![(0.5, -1.0), (0.5, 1.0)] };
        let h = h_transform(&bern, &z).unwrap()[(0, 0)];
        // F = (z² − 1)/z, so h = −1/z.
        assert!((h + 1.0 / z[(0, 0)]).norm() < 1e-14);
    }

    #[test]
    fn convolving_with_delta_zero_is_identity() {
        let z = scalar(C64::new(-0.4, 0.5));
        let left = AtomicEvaluator { coefficient: one(), atoms: vec![(0.3, -1.0), (0.7, 2.0)] };
        let right = AtomicEvaluator { coefficient: one(), atoms: vec![(1.0, 0.0)] };
        let s = subordinate(&left, &right, &z).unwrap();
        assert!((&s.omega1 - &z).max_abs() < 1e-14);
        assert!((&s.g - &left.evaluate(&z).unwrap()).max_abs() < 1e-14);
    }

    #[test]
    fn two_semicirculars_add_variances() {
        let z = C64::new(0.0, 2.0 * 2f64.sqrt());
        let a = SemicircularEvaluator::new(CovarianceMap::scalar(1, 1.0));
        let b = SemicircularEvaluator::new(CovarianceMap::scalar(1, 1.0));
        let s = subordinate(&a, &b, &scalar(z)).unwrap();
        let expected = (z - (z * z - 8.0).sqrt()) / 4.0;
        assert!((s.g[(0, 0)] - expected).norm() < 1e-10);
        assert!(s.consistency < 1e-9);
        assert!(s.min_imaginary_gain(&scalar(z)) > -1e-9);
    }

    #[test]
    fn bernoulli_sum_is_arcsine() {
        // X + Y for free symmetric Bernoullis: G(z) = 1/√(z² − 4).
        let bern = || Box::new(AtomicEvaluator { coefficient: one(), atoms: vec![(0.5, -1.0), (0.5, 1.0)] });
        let conv = ConvolvedEvaluator::new(bern(), bern()).unwrap();
        for z in [C64::new(0.0, 1.0), C64::new(1.5, 0.3), C64::new(-3.0, 0.5)] {
            let g = conv.evaluate(&scalar(z)).unwrap()[(0, 0)];
            let mut expected = 1.0 / (z * z - 4.0).sqrt();
            if expected.im > 0.0 {
                expected = -expected;
            }
            assert!((g - expected).norm() < 1e-9, "{z}: {g} vs {expected}");
        }
    }

    #[test]
    fn single_semicircular_pencil_matches_hrs() {
        let c = ComplexMatrix::from_real_rows(&[vec![1.0, 0.5], vec![0.5, -1.0]]);
        let pencil = LinearPencil::new(vec![ComplexMatrix::zeros(2, 2), c.clone()]).unwrap();
        let ev = pencil_evaluator(&pencil, &[FreeVariableSpec::standard_semicircular()]).unwrap();
        let z = ComplexMatrix::scalar_identity(2, C64::new(0.2, 0.7));
        let (w, _) = hrs_fixed_point(&CovarianceMap::explicit(vec![c]).unwrap(), &z, None).unwrap();
        assert!((&ev.evaluate(&z).unwrap() - &w).max_abs() < 1e-12);
    }

    #[test]
    fn block_semicircular_matches_printed_covariance() {
        let e12 = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e22 = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let summands: Vec<Box<dyn CauchyEvaluator>> = vec![
            Box::new(SemicircularEvaluator::tensor(&e12, 1.0).unwrap()),
            Box::new(SemicircularEvaluator::tensor(&e22, 1.0).unwrap()),
        ];
        let ev = convolve_pencil(&ComplexMatrix::zeros(2, 2), summands).unwrap();
        let eta = CovarianceMap::from_fn(2, |b| {
            ComplexMatrix::from_rows(&[vec![b[(1, 1)], b[(1, 0)]], vec![b[(0, 1)], b[(0, 0)] + b[(1, 1)]]])
        })
        .unwrap();
        for z in [C64::new(0.0, 1.0), C64::new(0.8, 0.2), C64::new(-2.0, 0.5)] {
            let zz = ComplexMatrix::scalar_identity(2, z);
            let (w, _) = hrs_fixed_point(&eta, &zz, None).unwrap();
            assert!((&ev.evaluate(&zz).unwrap() - &w).max_abs() < 1e-9);
        }
    }

    #[test]
    fn shift_by_constant_term() {
        let b0 = ComplexMatrix::from_real_diag(&[1.0, -0.5]);
        let c = ComplexMatrix::identity(2);
        let pencil = LinearPencil::new(vec![b0.clone(), c]).unwrap();
        let spec = FreeVariableSpec::atomic(vec![(0.5, -1.0), (0.5, 1.0)]).unwrap();
        let ev = pencil_evaluator(&pencil, &[spec]).unwrap();
        let z = C64::new(0.1, 0.4);
        let g = ev.evaluate(&ComplexMatrix::scalar_identity(2, z)).unwrap();
        for (k, shift) in [1.0, -0.5].into_iter().enumerate() {
            let w = z - shift;
            assert!((g[(k, k)] - w / (w * w - 1.0)).norm() < 1e-14);
        }
        let zero = LinearPencil::new(vec![b0, ComplexMatrix::zeros(2, 2)]).unwrap();
        let ev = pencil_evaluator(&zero, &[FreeVariableSpec::standard_semicircular()]).unwrap();
        let g = ev.evaluate(&ComplexMatrix::scalar_identity(2, I)).unwrap();
        assert!((g[(0, 0)] - 1.0 / (I - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn fold_errors_name_the_stage() {
        assert!(convolve_pencil(&ComplexMatrix::zeros(1, 1), vec![]).is_err());
        let pencil = LinearPencil::new(vec![ComplexMatrix::zeros(1, 1), one()]).unwrap();
        assert!(pencil_evaluator(&pencil, &[]).is_err());
    }
}
