//! Operator-valued Cauchy transforms `G(z) = E[(z − X)⁻¹]` of the building
//! blocks of a pencil: constants, coefficient matrices times scalar-distributed
//! variables, and matrix-valued semicirculars.
//!
//! Evaluators take `z ∈ M_m(M_n)` for any amplification level `m`, with the
//! coefficient embedded as `1_m ⊗ c`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matalg::{hermitian_eigenvalues, ComplexMatrix, MatError, C64};
use crate::oracle::{catalan, CovarianceMap};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
pub const HRS_RESIDUAL_TOL: f64 = 1e-11;
const DAMPING_WINDOW: usize = 50;
const DAMPING_MIN_DECAY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{stage}: no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { stage: String, iterations: usize, residual: f64 },
    #[error("{stage}: {source}")]
    Singular { stage: String, source: MatError },
    #[error("argument is not in the strict upper half-plane (smallest Im eigenvalue {0:.3e})")]
    NotUpperHalfPlane(f64),
    #[error("invalid distribution: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl SolverError {
    /// Prefix the stage label, used as errors propagate out of nested solves.
    pub fn within(self, outer: &str) -> Self {
        match self {
            SolverError::NonConvergence { stage, iterations, residual } => {
                SolverError::NonConvergence { stage: format!("{outer} > {stage}"), iterations, residual }
            }
            SolverError::Singular { stage, source } => SolverError::Singular { stage: format!("{outer} > {stage}"), source },
            other => other,
        }
    }
}

/// Distribution of one scalar free variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FreeVariableSpec {
    /// `(weight, atom)` pairs.
    Atomic { atoms: Vec<(f64, f64)> },
    Semicircular { variance: f64 },
}

impl FreeVariableSpec {
    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self, SolverError> {
        let spec = FreeVariableSpec::Atomic { atoms };
        spec.validate()?;
        Ok(spec)
    }

    pub fn semicircular(variance: f64) -> Result<Self, SolverError> {
        let spec = FreeVariableSpec::Semicircular { variance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn standard_semicircular() -> Self {
        FreeVariableSpec::Semicircular { variance: 1.0 }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        match self {
            FreeVariableSpec::Atomic { atoms } => {
                if atoms.is_empty() {
                    return Err(SolverError::InvalidSpec("atomic distribution without atoms".into()));
                }
                if atoms.iter().any(|(w, t)| !(w.is_finite() && *w > 0.0 && t.is_finite())) {
                    return Err(SolverError::InvalidSpec("weights must be positive and atoms finite".into()));
                }
                let total: f64 = atoms.iter().map(|(w, _)| w).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(SolverError::InvalidSpec(format!("weights sum to {total}, not 1")));
                }
                if atoms.windows(2).any(|p| p[0].1 >= p[1].1) {
                    return Err(SolverError::InvalidSpec("atoms must be strictly increasing".into()));
                }
                Ok(())
            }
            FreeVariableSpec::Semicircular { variance } => {
                if variance.is_finite() && *variance > 0.0 {
                    Ok(())
                } else {
                    Err(SolverError::InvalidSpec(format!("variance must be positive, got {variance}")))
                }
            }
        }
    }

    /// `φ(x^k)`.
    pub fn moment(&self, k: usize) -> f64 {
        match self {
            FreeVariableSpec::Atomic { atoms } => atoms.iter().map(|(w, t)| w * t.powi(k as i32)).sum(),
            FreeVariableSpec::Semicircular { variance } => {
                if k % 2 == 1 {
                    0.0
                } else {
                    variance.powi(k as i32 / 2) * catalan(k / 2) as f64
                }
            }
        }
    }

    /// `φ(x^k)` for `k = 0 … max_order`.
    pub fn moments(&self, max_order: usize) -> Vec<f64> {
        (0..=max_order).map(|k| self.moment(k)).collect()
    }

    /// Radius of a centered interval containing the support.
    pub fn support_radius(&self) -> f64 {
        match self {
            FreeVariableSpec::Atomic { atoms } => atoms.iter().map(|(_, t)| t.abs()).fold(0.0, f64::max),
            FreeVariableSpec::Semicircular { variance } => 2.0 * variance.sqrt(),
        }
    }

    pub fn is_semicircular(&self) -> bool {
        matches!(self, FreeVariableSpec::Semicircular { .. })
    }
}

/// Warm-start data mirroring the evaluator tree: the last fixed point of this
/// node and the states of its children.
#[derive(Debug, Clone, Default)]
pub struct WarmState {
    pub point: Option<ComplexMatrix>,
    pub children: Vec<WarmState>,
}

impl WarmState {
    pub fn child(&mut self, k: usize) -> &mut WarmState {
        if self.children.len() <= k {
            self.children.resize_with(k + 1, WarmState::default);
        }
        &mut self.children[k]
    }

    /// Drop warm data whose size no longer matches the argument.
    fn point_for(&self, size: usize) -> Option<&ComplexMatrix> {
        self.point.as_ref().filter(|p| p.rows() == size)
    }
}

/// Cauchy transform value plus solver bookkeeping.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub g: ComplexMatrix,
    /// Fixed-point iterations spent, summed over nested solves.
    pub iterations: usize,
    /// Largest final residual of any solve involved.
    pub residual: f64,
}

impl Evaluation {
    fn exact(g: ComplexMatrix) -> Self {
        Self { g, iterations: 0, residual: 0.0 }
    }
}

/// Map from the matrix upper half-plane to the lower half-plane at any
/// amplification level of the base size [`CauchyEvaluator::dim`].
pub trait CauchyEvaluator: Send + Sync {
    fn dim(&self) -> usize;

    fn evaluate_warm(&self, z: &ComplexMatrix, warm: &mut WarmState) -> Result<Evaluation, SolverError>;

    fn evaluate(&self, z: &ComplexMatrix) -> Result<ComplexMatrix, SolverError> {
        check_argument(self.dim(), z)?;
        Ok(self.evaluate_warm(z, &mut WarmState::default())?.g)
    }

    fn label(&self) -> String;
}

/// Verifies size compatibility and strict upper half-plane membership.
pub fn check_argument(dim: usize, z: &ComplexMatrix) -> Result<(), SolverError> {
    if !z.is_square() || z.rows() % dim != 0 {
        return Err(SolverError::Dimension(format!("argument {}x{} is not a multiple of {dim}", z.rows(), z.cols())));
    }
    let lowest = min_im_eigenvalue(z);
    if lowest <= 0.0 {
        return Err(SolverError::NotUpperHalfPlane(lowest));
    }
    Ok(())
}

fn min_im_eigenvalue(z: &ComplexMatrix) -> f64 {
    hermitian_eigenvalues(&z.im_part()).map(|ev| ev[0]).unwrap_or(f64::NEG_INFINITY)
}

fn invert(a: &ComplexMatrix, stage: &str) -> Result<ComplexMatrix, SolverError> {
    a.inverse().map_err(|source| SolverError::Singular { stage: stage.to_string(), source })
}

/// `(z − 1_m ⊗ b₀)⁻¹`.
pub fn cauchy_constant(b0: &ComplexMatrix, z: &ComplexMatrix) -> Result<ComplexMatrix, SolverError> {
    check_argument(b0.rows(), z)?;
    invert(&(z - &b0.amplify(z.rows() / b0.rows())), "constant resolvent")
}

/// `Σ_k w_k (z − t_k · 1_m ⊗ c)⁻¹`.
pub fn cauchy_atomic(c: &ComplexMatrix, atoms: &[(f64, f64)], z: &ComplexMatrix) -> Result<ComplexMatrix, SolverError> {
    check_argument(c.rows(), z)?;
    atomic_sum(&c.amplify(z.rows() / c.rows()), atoms, z)
}

fn atomic_sum(c_big: &ComplexMatrix, atoms: &[(f64, f64)], z: &ComplexMatrix) -> Result<ComplexMatrix, SolverError> {
    let mut g = ComplexMatrix::zeros(z.rows(), z.cols());
    for &(w, t) in atoms {
        let r = invert(&(z - &c_big.scale_real(t)), "atomic resolvent")?;
        g += &r.scale_real(w);
    }
    Ok(g)
}

/// Iteration policy for [`damped_iterate`].
#[derive(Debug, Clone, Copy)]
pub struct IterationControl {
    /// Stop when `‖Δw‖ < tolerance · max(1, ‖w‖)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Fixed damping; `None` starts undamped and switches to `½` when the
    /// step size shrinks by less than 1% over 50 iterations.
    pub alpha: Option<f64>,
}

impl Default for IterationControl {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, max_iterations: DEFAULT_MAX_ITERATIONS, alpha: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iterations: usize,
    /// Norm of the last step.
    pub residual: f64,
    pub final_alpha: f64,
}

/// Averaged iteration `w ← (1 − α) w + α F(w)`.
pub fn damped_iterate(
    mut f: impl FnMut(&ComplexMatrix) -> Result<ComplexMatrix, SolverError>,
    w0: ComplexMatrix,
    control: IterationControl,
    stage: &str,
) -> Result<(ComplexMatrix, IterationStats), SolverError> {
    let mut alpha = control.alpha.unwrap_or(1.0);
    let auto = control.alpha.is_none();
    let mut w = w0;
    let mut window_start = f64::INFINITY;
    let mut step = f64::INFINITY;
    for it in 1..=control.max_iterations {
        let fw = f(&w)?;
        let next = if alpha == 1.0 { fw } else { &w.scale_real(1.0 - alpha) + &fw.scale_real(alpha) };
        step = (&next - &w).frobenius_norm();
        w = next;
        if !step.is_finite() || !w.is_finite() {
            return Err(SolverError::NonConvergence { stage: stage.into(), iterations: it, residual: step });
        }
        if step < control.tolerance * w.frobenius_norm().max(1.0) {
            return Ok((w, IterationStats { iterations: it, residual: step, final_alpha: alpha }));
        }
        if auto && alpha == 1.0 && it % DAMPING_WINDOW == 0 {
            if step > DAMPING_MIN_DECAY * window_start {
                alpha = 0.5;
            }
            window_start = step;
        }
    }
    Err(SolverError::NonConvergence { stage: stage.into(), iterations: control.max_iterations, residual: step })
}

/// Default start `−i ‖(Im z)⁻¹‖ / 2 · 1`.
pub fn default_hrs_start(z: &ComplexMatrix) -> ComplexMatrix {
    let lowest = min_im_eigenvalue(z).max(f64::MIN_POSITIVE);
    ComplexMatrix::scalar_identity(z.rows(), C64::new(0.0, -0.5 / lowest))
}

/// `‖z w − 1 − η(w) w‖`.
pub fn hrs_residual(eta: &CovarianceMap, z: &ComplexMatrix, w: &ComplexMatrix) -> f64 {
    let lhs = z * w;
    let rhs = &ComplexMatrix::identity(z.rows()) + &(&eta.apply_amplified(w) * w);
    (&lhs - &rhs).frobenius_norm()
}

fn hrs_solve(
    eta: &CovarianceMap,
    z: &ComplexMatrix,
    w0: ComplexMatrix,
    control: IterationControl,
) -> Result<(ComplexMatrix, IterationStats), SolverError> {
    let map = |w: &ComplexMatrix| invert(&(z - &eta.apply_amplified(w)), "semicircular fixed point");
    let (mut w, mut stats) = damped_iterate(map, w0, control, "semicircular fixed point")?;
    let mut residual = hrs_residual(eta, z, &w);
    // A tiny step can still leave a residual above tolerance; keep polishing.
    while residual >= HRS_RESIDUAL_TOL && stats.iterations < control.max_iterations {
        let more = IterationControl {
            tolerance: control.tolerance * 0.01,
            max_iterations: control.max_iterations - stats.iterations,
            alpha: Some(stats.final_alpha),
        };
        let (w2, s2) = damped_iterate(map, w, more, "semicircular fixed point")?;
        w = w2;
        stats.iterations += s2.iterations;
        stats.residual = s2.residual;
        residual = hrs_residual(eta, z, &w);
        if more.tolerance < 1e-18 {
            break;
        }
    }
    if residual >= HRS_RESIDUAL_TOL {
        return Err(SolverError::NonConvergence {
            stage: "semicircular fixed point".into(),
            iterations: stats.iterations,
            residual,
        });
    }
    stats.residual = residual;
    Ok((w, stats))
}

/// Solution `w` in the lower half-plane of `z w = 1 + η(w) w`, i.e. the
/// Cauchy transform of the semicircular with covariance `η` at `z`.
pub fn hrs_fixed_point(
    eta: &CovarianceMap,
    z: &ComplexMatrix,
    w0: Option<&ComplexMatrix>,
) -> Result<(ComplexMatrix, IterationStats), SolverError> {
    check_argument(eta.dim(), z)?;
    let start = w0.cloned().unwrap_or_else(|| default_hrs_start(z));
    hrs_solve(eta, z, start, IterationControl::default())
}

/// `b₀`: a point mass at a Hermitian matrix.
pub struct ConstantEvaluator {
    pub b0: ComplexMatrix,
}

impl CauchyEvaluator for ConstantEvaluator {
    fn dim(&self) -> usize {
        self.b0.rows()
    }

    fn evaluate_warm(&self, z: &ComplexMatrix, _warm: &mut WarmState) -> Result<Evaluation, SolverError> {
        let m = z.rows() / self.dim();
        Ok(Evaluation::exact(invert(&(z - &self.b0.amplify(m)), "constant resolvent")?))
    }

    fn label(&self) -> String {
        "constant".into()
    }
}

/// `c ⊗ x` with `x` atomic.
pub struct AtomicEvaluator {
    pub coefficient: ComplexMatrix,
    pub atoms: Vec<(f64, f64)>,
}

impl CauchyEvaluator for AtomicEvaluator {
    fn dim(&self) -> usize {
        self.coefficient.rows()
    }

    fn evaluate_warm(&self, z: &ComplexMatrix, _warm: &mut WarmState) -> Result<Evaluation, SolverError> {
        let m = z.rows() / self.dim();
        Ok(Evaluation::exact(atomic_sum(&self.coefficient.amplify(m), &self.atoms, z)?))
    }

    fn label(&self) -> String {
        format!("atomic ({} atoms)", self.atoms.len())
    }
}

/// Matrix-valued semicircular with covariance `η`, solved by the fixed point.
pub struct SemicircularEvaluator {
    pub eta: CovarianceMap,
    pub control: IterationControl,
}

impl SemicircularEvaluator {
    pub fn new(eta: CovarianceMap) -> Self {
        Self { eta, control: IterationControl::default() }
    }

    /// `c ⊗ s` for a semicircular `s` of the given variance: `η(b) = σ² c b c`.
    pub fn tensor(coefficient: &ComplexMatrix, variance: f64) -> Result<Self, SolverError> {
        let eta = CovarianceMap::explicit(vec![coefficient.scale_real(variance.sqrt())])
            .map_err(|e| SolverError::InvalidSpec(e.to_string()))?;
        Ok(Self::new(eta))
    }
}

impl CauchyEvaluator for SemicircularEvaluator {
    fn dim(&self) -> usize {
        self.eta.dim()
    }

    fn evaluate_warm(&self, z: &ComplexMatrix, warm: &mut WarmState) -> Result<Evaluation, SolverError> {
        let start = warm.point_for(z.rows()).cloned().unwrap_or_else(|| default_hrs_start(z));
        let (w, stats) = hrs_solve(&self.eta, z, start, self.control)?;
        warm.point = Some(w.clone());
        Ok(Evaluation { g: w, iterations: stats.iterations, residual: stats.residual })
    }

    fn label(&self) -> String {
        "semicircular".into()
    }
}

/// Evaluator for `c ⊗ x` given the scalar distribution of `x`.
pub fn summand_evaluator(coefficient: &ComplexMatrix, spec: &FreeVariableSpec) -> Result<Box<dyn CauchyEvaluator>, SolverError> {
    spec.validate()?;
    if !coefficient.is_hermitian(1e-12) {
        return Err(SolverError::InvalidSpec("pencil coefficients must be Hermitian".into()));
    }
    Ok(match spec {
        FreeVariableSpec::Atomic { atoms } => {
            Box::new(AtomicEvaluator { coefficient: coefficient.clone(), atoms: atoms.clone() })
        }
        FreeVariableSpec::Semicircular { variance } => Box::new(SemicircularEvaluator::tensor(coefficient, *variance)?),
    })
}

/// Scalar standard-semicircle Cauchy transform `(z − √(z² − 4))/2` on the
/// branch with `G(z) ~ 1/z`.
pub fn semicircle_closed_form(z: C64, variance: f64) -> C64 {
    let s = (z * z - 4.0 * variance).sqrt();
    let g1 = (z - s) / (2.0 * variance);
    let g2 = (z + s) / (2.0 * variance);
    if g1.im <= 0.0 && (g2.im > 0.0 || g1.norm() <= g2.norm()) {
        g1
    } else {
        g2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::{half_plane_membership, operator_norm, HalfPlane, I, ONE, ZERO};

    fn cz(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn spec_validation() {
        assert!(FreeVariableSpec::atomic(vec![(0.5, -2.0), (0.25, -1.0), (0.25, 1.0)]).is_ok());
        assert!(FreeVariableSpec::atomic(vec![(0.5, 1.0), (0.5, -1.0)]).is_err());
        assert!(FreeVariableSpec::atomic(vec![(0.5, 1.0), (0.4, 2.0)]).is_err());
        assert!(FreeVariableSpec::semicircular(0.0).is_err());
        let json = r#"{"kind":"atomic","atoms":[[0.5,-2],[0.25,-1],[0.25,1]]}"#;
        let spec: FreeVariableSpec = serde_json_like(json);
        assert_eq!(spec, FreeVariableSpec::Atomic { atoms: vec![(0.5, -2.0), (0.25, -1.0), (0.25, 1.0)] });
    }

    fn serde_json_like(s: &str) -> FreeVariableSpec {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn constant_examples() {
        let z = ComplexMatrix::scalar_identity(2, I);
        let g = cauchy_constant(&ComplexMatrix::zeros(2, 2), &z).unwrap();
        assert!((&g - &ComplexMatrix::scalar_identity(2, -I)).max_abs() < 1e-15);
        let g = cauchy_constant(&ComplexMatrix::zeros(1, 1), &ComplexMatrix::scalar(cz(0.0, 2.0))).unwrap();
        assert!((g[(0, 0)] - cz(0.0, -0.5)).norm() < 1e-15);
        let b0 = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
        let g = cauchy_constant(&b0, &z).unwrap();
        assert!((g[(0, 0)] - 1.0 / (I - 1.0)).norm() < 1e-15);
        assert!((g[(1, 1)] - 1.0 / (I + 1.0)).norm() < 1e-15);
        assert!(matches!(cauchy_constant(&b0, &ComplexMatrix::identity(2)), Err(SolverError::NotUpperHalfPlane(_))));
    }

    #[test]
    fn atomic_examples() {
        let one = ComplexMatrix::scalar(ONE);
        let z = ComplexMatrix::scalar(cz(0.3, 0.7));
        let g = cauchy_atomic(&one, &[(1.0, 0.0)], &z).unwrap();
        assert!((g[(0, 0)] - 1.0 / z[(0, 0)]).norm() < 1e-15);
        for y in [0.5, 1.0, 4.0] {
            let g = cauchy_atomic(&one, &[(0.5, -1.0), (0.5, 1.0)], &ComplexMatrix::scalar(cz(0.0, y))).unwrap();
            assert!((g[(0, 0)] - cz(0.0, -y / (y * y + 1.0))).norm() < 1e-15);
        }
        let atoms = [(0.5, -2.0), (0.25, -1.0), (0.25, 1.0)];
        let zz = cz(0.4, 0.9);
        let g = cauchy_atomic(&one, &atoms, &ComplexMatrix::scalar(zz)).unwrap()[(0, 0)];
        let expected = 0.5 / (zz + 2.0) + 0.25 / (zz + 1.0) + 0.25 / (zz - 1.0);
        assert!((g - expected).norm() < 1e-15);
    }

    #[test]
    fn hrs_scalar_examples() {
        let id = CovarianceMap::scalar(1, 1.0);
        let (w, _) = hrs_fixed_point(&id, &ComplexMatrix::scalar(cz(0.0, 2.0)), None).unwrap();
        assert!((w[(0, 0)] - cz(0.0, 1.0 - 2f64.sqrt())).norm() < 1e-10);

        let zero = CovarianceMap::scalar(2, 0.0);
        let z = ComplexMatrix::from_rows(&[vec![cz(0.5, 1.0), cz(0.2, 0.1)], vec![cz(-0.3, 0.1), cz(-1.0, 2.0)]]);
        let (w, _) = hrs_fixed_point(&zero, &z, None).unwrap();
        assert!((&w - &z.inverse().unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn hrs_block_diagonal_picks_lower_branches() {
        let id = CovarianceMap::scalar(2, 1.0);
        let (z1, z2) = (cz(0.7, 0.4), cz(-1.5, 0.2));
        let z = ComplexMatrix::from_diag(&[z1, z2]);
        let (w, _) = hrs_fixed_point(&id, &z, None).unwrap();
        // η = id on M₂ is not diagonal-preserving in general, but w stays diagonal here.
        assert!((w[(0, 0)] - semicircle_closed_form(z1, 1.0)).norm() < 1e-9);
        assert!((w[(1, 1)] - semicircle_closed_form(z2, 1.0)).norm() < 1e-9);
        assert!(w[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn damping_helps_near_the_axis() {
        let z = ComplexMatrix::scalar(cz(0.01, 1e-6));
        let id = CovarianceMap::scalar(1, 1.0);
        let w0 = default_hrs_start(&z);
        let map = |w: &ComplexMatrix| invert(&(&z - &id.apply(w)), "test");
        let plain = damped_iterate(map, w0.clone(), IterationControl { alpha: Some(1.0), ..Default::default() }, "t");
        let (_, damped) = damped_iterate(map, w0, IterationControl { alpha: Some(0.5), ..Default::default() }, "t").unwrap();
        match plain {
            Ok((_, s)) => assert!(s.iterations > 10 * damped.iterations),
            Err(SolverError::NonConvergence { .. }) => {}
            Err(e) => panic!("{e}"),
        }
        // The automatic policy switches to averaging.
        let (w, auto) = hrs_fixed_point(&id, &z, None).unwrap();
        assert_eq!(auto.final_alpha, 0.5);
        assert!((w[(0, 0)] - semicircle_closed_form(z[(0, 0)], 1.0)).norm() < 1e-8);
    }

    #[test]
    fn damped_constant_map() {
        let c = ComplexMatrix::scalar(cz(1.0, -2.0));
        let (w, s) =
            damped_iterate(|_| Ok(c.clone()), ComplexMatrix::scalar(ZERO), IterationControl::default(), "t").unwrap();
        assert_eq!(w, c);
        assert!(s.iterations <= 2);
    }

    #[test]
    fn hrs_invariants_on_random_points() {
        let a = ComplexMatrix::from_real_rows(&[vec![1.0, 0.5], vec![0.5, -0.3]]);
        let b = ComplexMatrix::from_real_rows(&[vec![0.2, -0.7], vec![-0.7, 1.1]]);
        let eta = CovarianceMap::explicit(vec![a, b]).unwrap();
        for k in 0..10 {
            let t = k as f64 * 0.37 - 1.5;
            let z = ComplexMatrix::from_rows(&[
                vec![cz(t, 0.8), cz(0.1, 0.05)],
                vec![cz(0.1, 0.05), cz(-t * 0.5, 0.3 + 0.1 * k as f64)],
            ]);
            let (w, _) = hrs_fixed_point(&eta, &z, None).unwrap();
            assert!(half_plane_membership(&w, HalfPlane::Lower).is_member());
            let im_inv = operator_norm(&z.im_part().inverse().unwrap());
            assert!(operator_norm(&w) <= im_inv * (1.0 + 1e-8));
            assert!(hrs_residual(&eta, &z, &w) < HRS_RESIDUAL_TOL);
        }
    }

    #[test]
    fn closed_form_branch() {
        let g = semicircle_closed_form(cz(0.0, 1e-9), 1.0);
        assert!((g - cz(0.0, -1.0)).norm() < 1e-8);
        let g = semicircle_closed_form(cz(3.0, 1e-9), 1.0);
        assert!((g.re - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-8);
        let g = semicircle_closed_form(cz(-3.0, 1e-9), 1.0);
        assert!((g.re + (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-8);
    }
}
