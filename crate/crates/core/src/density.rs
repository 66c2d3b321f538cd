//! Scalar Cauchy transforms of linearized expressions and Stieltjes inversion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cauchy::{CauchyEvaluator, SolverError, WarmState};
use crate::convolve::PencilEvaluator;
use crate::matalg::{ComplexMatrix, C64};

pub const DEFAULT_EPS_Z: f64 = 1e-3;
pub const DEFAULT_EPS_PENCIL: f64 = 1e-7;
pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-10;
pub const NEGATIVE_WARN_TOL: f64 = 1e-8;
/// Grid points solved in sequence with warm starts; chunks run in parallel.
pub const SWEEP_CHUNK: usize = 64;

/// `Λ_ε(z) = diag(z, iε, …, iε)`.
pub fn lambda_eps(z: C64, n: usize, eps_pencil: f64) -> ComplexMatrix {
    let mut d = vec![C64::new(0.0, eps_pencil); n];
    d[0] = z;
    ComplexMatrix::from_diag(&d)
}

/// `[G(Λ_ε(z))]₁₁` with a caller-held warm start.
pub fn scalar_cauchy_warm(
    evaluator: &PencilEvaluator,
    z: C64,
    eps_pencil: f64,
    warm: &mut WarmState,
) -> Result<(C64, usize, f64), SolverError> {
    if !(z.im > 0.0) || !(eps_pencil > 0.0) {
        return Err(SolverError::NotUpperHalfPlane(z.im.min(eps_pencil)));
    }
    let ev = evaluator.evaluate_warm(&lambda_eps(z, evaluator.dim(), eps_pencil), warm)?;
    Ok((ev.g[(0, 0)], ev.iterations, ev.residual))
}

/// `[G(Λ_ε(z))]₁₁`.
pub fn scalar_cauchy(evaluator: &PencilEvaluator, z: C64, eps_pencil: f64) -> Result<C64, SolverError> {
    scalar_cauchy_warm(evaluator, z, eps_pencil, &mut WarmState::default()).map(|r| r.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    /// Small negative value set to zero.
    Clamped,
    /// Negative beyond the warning level; set to zero.
    Negative,
    Failed,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Clamped => "clamped",
            PointStatus::Negative => "negative",
            PointStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub t: f64,
    /// `None` when the solve failed.
    pub rho: Option<f64>,
    pub status: PointStatus,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub eps_z: f64,
    pub eps_pencil: f64,
    /// Combine `2ρ(ε/2) − ρ(ε)` to cancel the first-order smoothing bias.
    pub richardson: bool,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self { eps_z: DEFAULT_EPS_Z, eps_pencil: DEFAULT_EPS_PENCIL, richardson: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub points: Vec<DensityPoint>,
    pub epsilon: f64,
    pub eps_pencil: f64,
    /// Trapezoid integral of the density, failed points counted as zero.
    pub mass: f64,
}

impl SpectralDensity {
    /// Builds a density from samples, clamping and computing the mass.
    pub fn from_samples(grid: &[f64], values: &[f64], epsilon: f64) -> Self {
        let points = grid
            .iter()
            .zip(values)
            .map(|(&t, &v)| {
                let (rho, status) = classify(v);
                DensityPoint { t, rho: Some(rho), status, iterations: 0, residual: 0.0 }
            })
            .collect();
        Self::finish(points, epsilon, 0.0)
    }

    fn finish(points: Vec<DensityPoint>, epsilon: f64, eps_pencil: f64) -> Self {
        let mut d = Self { points, epsilon, eps_pencil, mass: 0.0 };
        d.mass = trapezoid(&d.grid(), &d.values());
        d
    }

    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// Density values with failed points as zero.
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rho.unwrap_or(0.0)).collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.status == PointStatus::Failed).count()
    }

    pub fn negative_warnings(&self) -> usize {
        self.points.iter().filter(|p| p.status == PointStatus::Negative).count()
    }

    pub fn max_residual(&self) -> f64 {
        self.points.iter().map(|p| p.residual).fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.points.iter().map(|p| p.iterations).sum()
    }

    /// Cumulative trapezoid integral at each grid point, normalized by the mass.
    pub fn cdf(&self) -> Vec<f64> {
        let (t, v) = (self.grid(), self.values());
        let mut out = Vec::with_capacity(t.len());
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..t.len() {
            acc += 0.5 * (v[k] + v[k - 1]) * (t[k] - t[k - 1]);
            out.push(acc);
        }
        if acc > 0.0 {
            out.iter_mut().for_each(|c| *c /= acc);
        }
        out
    }
}

fn classify(v: f64) -> (f64, PointStatus) {
    if v >= 0.0 {
        (v, PointStatus::Ok)
    } else if v >= -NEGATIVE_WARN_TOL {
        (0.0, if v >= -NEGATIVE_CLAMP_TOL { PointStatus::Ok } else { PointStatus::Clamped })
    } else {
        (0.0, PointStatus::Negative)
    }
}

pub fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2).zip(v.windows(2)).map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0])).sum()
}

/// `n` equally spaced points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Solver returning a scalar Cauchy transform value, its iteration count
/// and residual at a point of the upper half-plane.
pub type ScalarSolver<'a> = dyn Fn(C64, &mut WarmState) -> Result<(C64, usize, f64), SolverError> + Sync + 'a;

fn sample_point(
    solve: &ScalarSolver<'_>,
    t: f64,
    opts: &InversionOptions,
    warm: &mut WarmState,
    half_warm: &mut WarmState,
) -> DensityPoint {
    let rho_at = |eps: f64, warm: &mut WarmState| {
        solve(C64::new(t, eps), warm).map(|(g, it, res)| (-g.im / std::f64::consts::PI, it, res))
    };
    let result = rho_at(opts.eps_z, warm).and_then(|(rho, it, res)| {
        if opts.richardson {
            let (half, it2, res2) = rho_at(opts.eps_z / 2.0, half_warm)?;
            Ok((2.0 * half - rho, it + it2, res.max(res2)))
        } else {
            Ok((rho, it, res))
        }
    });
    match result {
        Ok((v, iterations, residual)) => {
            let (rho, status) = classify(v);
            DensityPoint { t, rho: Some(rho), status, iterations, residual }
        }
        Err(e) => {
            *warm = WarmState::default();
            *half_warm = WarmState::default();
            let (iterations, residual) = match e {
                SolverError::NonConvergence { iterations, residual, .. } => (iterations, residual),
                _ => (0, f64::NAN),
            };
            DensityPoint { t, rho: None, status: PointStatus::Failed, iterations, residual }
        }
    }
}

/// Stieltjes inversion of an arbitrary scalar solver. Chunks of consecutive
/// points are swept with warm starts and solved in parallel; the result does
/// not depend on the number of workers.
pub fn invert_with(solve: &ScalarSolver<'_>, grid: &[f64], opts: &InversionOptions) -> SpectralDensity {
    let points: Vec<DensityPoint> = grid
        .par_chunks(SWEEP_CHUNK)
        .flat_map_iter(|chunk| {
            let mut warm = WarmState::default();
            let mut half_warm = WarmState::default();
            chunk.iter().map(|&t| sample_point(solve, t, opts, &mut warm, &mut half_warm)).collect::<Vec<_>>()
        })
        .collect();
    SpectralDensity::finish(points, opts.eps_z, opts.eps_pencil)
}

/// `ρ(t) = −Im [G(Λ_ε(t + i·eps_z))]₁₁ / π` over the grid.
pub fn invert_stieltjes(evaluator: &PencilEvaluator, grid: &[f64], opts: &InversionOptions) -> SpectralDensity {
    let solve = |z: C64, warm: &mut WarmState| scalar_cauchy_warm(evaluator, z, opts.eps_pencil, warm);
    invert_with(&solve, grid, opts)
}

/// `tr_n G(z·1)` under the normalized trace.
pub fn trace_cauchy_warm(
    evaluator: &dyn CauchyEvaluator,
    z: C64,
    warm: &mut WarmState,
) -> Result<(C64, usize, f64), SolverError> {
    let ev = evaluator.evaluate_warm(&ComplexMatrix::scalar_identity(evaluator.dim(), z), warm)?;
    Ok((ev.g.normalized_trace(), ev.iterations, ev.residual))
}

/// Density of a matrix-valued element under `tr_n ⊗ φ`: `ρ(t) = −Im tr_n G((t + i·eps_z)·1) / π`.
pub fn invert_stieltjes_trace(evaluator: &dyn CauchyEvaluator, grid: &[f64], opts: &InversionOptions) -> SpectralDensity {
    let solve = |z: C64, warm: &mut WarmState| trace_cauchy_warm(evaluator, z, warm);
    invert_with(&solve, grid, opts)
}

/// `E[S^k]` for `k = 0 … max_order` from `G(ζ·1) = Σ E[S^k] ζ^{−k−1}` on the
/// circle `|ζ| = radius`, which must enclose the spectrum.
pub fn matrix_moments_from_cauchy(
    evaluator: &dyn CauchyEvaluator,
    max_order: usize,
    radius: f64,
    samples: usize,
) -> Result<Vec<ComplexMatrix>, SolverError> {
    let n = evaluator.dim();
    let mut out = vec![ComplexMatrix::zeros(n, n); max_order + 1];
    let mut warm = WarmState::default();
    for j in 0..samples {
        let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / samples as f64;
        let z = C64::from_polar(radius, theta);
        let g = if z.im > 0.0 {
            evaluator.evaluate_warm(&ComplexMatrix::scalar_identity(n, z), &mut warm)?.g
        } else {
            // G(z̄) = G(z)* for selfadjoint elements.
            evaluator.evaluate_warm(&ComplexMatrix::scalar_identity(n, z.conj()), &mut warm)?.g.adjoint()
        };
        for (k, m) in out.iter_mut().enumerate() {
            *m += &g.scale(C64::from_polar(radius.powi(k as i32 + 1) / samples as f64, theta * (k as f64 + 1.0)));
        }
    }
    Ok(out)
}

/// `∫ t^j ρ(t) dt` for `j = 0 … max_order`.
pub fn moments_from_density(d: &SpectralDensity, max_order: usize) -> Vec<f64> {
    let (t, v) = (d.grid(), d.values());
    (0..=max_order)
        .map(|j| {
            let f: Vec<f64> = t.iter().zip(&v).map(|(x, r)| x.powi(j as i32) * r).collect();
            trapezoid(&t, &f)
        })
        .collect()
}

/// Scalar moments `φ(p^k)` for `k = 0 … max_order` from the expansion
/// `G(z) = Σ φ(p^k) z^{−k−1}` sampled on the circle `|z| = radius`. The
/// radius must exceed the spectral radius; the aliasing error is of order
/// `(‖p‖/radius)^{samples}`.
pub fn moments_from_cauchy(
    evaluator: &PencilEvaluator,
    max_order: usize,
    radius: f64,
    samples: usize,
    eps_pencil: f64,
) -> Result<Vec<C64>, SolverError> {
    // G(z̄) = conj G(z) for a selfadjoint pencil, so the lower half circle is free.
    let half = samples / 2;
    let mut values = vec![C64::new(0.0, 0.0); samples];
    let mut warm = WarmState::default();
    for j in 0..half {
        let theta = std::f64::consts::PI * (j as f64 + 0.5) / half as f64;
        let z = C64::from_polar(radius, theta);
        let (g, _, _) = scalar_cauchy_warm(evaluator, z, eps_pencil, &mut warm)?;
        values[j] = g;
        values[samples - 1 - j] = g.conj();
    }
    let mut out = Vec::with_capacity(max_order + 1);
    for k in 0..=max_order {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..samples {
            let theta = if j < half {
                std::f64::consts::PI * (j as f64 + 0.5) / half as f64
            } else {
                -std::f64::consts::PI * ((samples - 1 - j) as f64 + 0.5) / half as f64
            };
            acc += values[j] * C64::from_polar(radius.powi(k as i32 + 1), theta * (k as f64 + 1.0));
        }
        out.push(acc / samples as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::{semicircle_closed_form, FreeVariableSpec};
    use crate::convolve::pencil_evaluator;
    use crate::linearize::{selfadjoint_pencil, LinearPencil};
    use crate::ncexpr::parse;
    use std::f64::consts::PI;

    fn evaluator(expr: &str, specs: &[FreeVariableSpec]) -> PencilEvaluator {
        let e = parse(expr, specs.len()).unwrap();
        let (pencil, _) = selfadjoint_pencil(&e, specs.len()).unwrap();
        pencil_evaluator(&pencil, specs).unwrap()
    }

    #[test]
    fn constant_and_semicircle() {
        let c = ComplexMatrix::scalar(C64::new(0.7, 0.0));
        let ev = pencil_evaluator(&LinearPencil::new(vec![c, ComplexMatrix::zeros(1, 1)]).unwrap(), &[FreeVariableSpec::standard_semicircular()])
            .unwrap();
        let z = C64::new(0.2, 0.5);
        assert!((scalar_cauchy(&ev, z, 1e-7).unwrap() - 1.0 / (z - 0.7)).norm() < 1e-14);

        let ev = evaluator("x1", &[FreeVariableSpec::standard_semicircular()]);
        for z in [C64::new(0.0, 1.0), C64::new(1.3, 0.05), C64::new(-2.5, 0.2)] {
            let g = scalar_cauchy(&ev, z, 1e-7).unwrap();
            assert!((g - semicircle_closed_form(z, 1.0)).norm() < 1e-6, "{z}: {g}");
        }
    }

    #[test]
    fn square_of_semicircle_moments() {
        let ev = evaluator("x1^2", &[FreeVariableSpec::standard_semicircular()]);
        let m = moments_from_cauchy(&ev, 4, 12.0, 64, 1e-9).unwrap();
        for (k, want) in [1.0, 1.0, 2.0, 5.0, 14.0].into_iter().enumerate() {
            assert!((m[k].re - want).abs() < 1e-5 * want, "order {k}: {}", m[k]);
        }
    }

    #[test]
    fn point_mass_gives_poisson_kernel() {
        let ev = pencil_evaluator(
            &LinearPencil::new(vec![ComplexMatrix::zeros(1, 1), ComplexMatrix::zeros(1, 1)]).unwrap(),
            &[FreeVariableSpec::standard_semicircular()],
        )
        .unwrap();
        let eps = 1e-2;
        let grid = uniform_grid(-0.5, 0.5, 11);
        let d = invert_stieltjes(&ev, &grid, &InversionOptions { eps_z: eps, ..Default::default() });
        for p in &d.points {
            let want = eps / (p.t * p.t + eps * eps) / PI;
            assert!((p.rho.unwrap() - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn semicircle_density_and_moments() {
        let ev = evaluator("x1", &[FreeVariableSpec::standard_semicircular()]);
        let grid = uniform_grid(-3.0, 3.0, 601);
        let d = invert_stieltjes(&ev, &grid, &InversionOptions::default());
        assert_eq!(d.failures(), 0);
        let at0 = d.points[300].rho.unwrap();
        assert!((at0 - 1.0 / PI).abs() < 1e-3);
        assert!(d.points[0].rho.unwrap() < 1e-3);
        assert!((d.mass - 1.0).abs() < 0.02);
        let m = moments_from_density(&d, 4);
        assert!(m[1].abs() < 1e-3);
        assert!((m[2] - 1.0).abs() < 0.02);
        assert!((m[4] - 2.0).abs() < 0.05);
    }

    #[test]
    fn chunked_sweep_is_deterministic() {
        let ev = evaluator("x1", &[FreeVariableSpec::standard_semicircular()]);
        let grid = uniform_grid(-2.5, 2.5, 150);
        let a = invert_stieltjes(&ev, &grid, &InversionOptions::default());
        let b = invert_stieltjes(&ev, &grid, &InversionOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn clamping() {
        let d = SpectralDensity::from_samples(&[0.0, 1.0, 2.0], &[-1e-11, -1e-9, -1e-6], 1e-3);
        let s: Vec<_> = d.points.iter().map(|p| p.status).collect();
        assert_eq!(s, vec![PointStatus::Ok, PointStatus::Clamped, PointStatus::Negative]);
        assert!(d.values().iter().all(|&v| v == 0.0));
    }
}
