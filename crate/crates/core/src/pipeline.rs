//! End-to-end jobs: parse, linearize, solve, invert and optionally compare
//! with the moment oracle and with random matrices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cauchy::{FreeVariableSpec, SolverError};
use crate::convolve::{pencil_evaluator, PencilEvaluator};
use crate::density::{
    invert_stieltjes, moments_from_cauchy, moments_from_density, uniform_grid, InversionOptions, SpectralDensity,
    DEFAULT_EPS_PENCIL, DEFAULT_EPS_Z, DEFAULT_GRID_POINTS,
};
use crate::linearize::{selfadjoint_pencil, LinearPencil, LinearizeError, PencilSource};
use crate::matalg::operator_norm;
use crate::ncexpr::{parse, ExprError, NCPolynomial, RationalExpr};
use crate::oracle::{polynomial_moments, OracleError, ScalarFreeOracle};
use crate::rmt::{assemble_and_spectrum, ks_distance, EnsembleSpec, Histogram, RmtError, SpectrumSource};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_SINGULAR: i32 = 4;

pub const DEFAULT_KS_THRESHOLD: f64 = 0.05;
pub const MAX_MOMENT_WORD: usize = 8;
const ORACLE_CHECK_RTOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Rmt(#[from] RmtError),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Solver(SolverError::NonConvergence { .. }) => EXIT_CONVERGENCE,
            PipelineError::Solver(SolverError::Singular { .. }) => EXIT_CONVERGENCE,
            PipelineError::Rmt(RmtError::AllTrialsSingular(_)) => EXIT_SINGULAR,
            PipelineError::Expr(ExprError::Singular { .. }) => EXIT_SINGULAR,
            PipelineError::Linearize(LinearizeError::RepresentationSingular(_)) => EXIT_SINGULAR,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Density,
    Moments,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(PipelineError::Config(format!("grid needs min < max, got {} and {}", self.min, self.max)));
        }
        if self.points < 3 {
            return Err(PipelineError::Config(format!("grid needs at least 3 points, got {}", self.points)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmtOptions {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Per-variable models; defaults follow [`EnsembleSpec::defaults_for`].
    pub ensembles: Option<Vec<EnsembleSpec>>,
}

impl Default for RmtOptions {
    fn default() -> Self {
        Self { n: 1000, trials: 1, seed: 7, ensembles: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OutputPaths {
    pub density_csv: Option<String>,
    pub histogram_csv: Option<String>,
    pub report_json: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JobConfig {
    pub expression: String,
    /// Defaults to the number of entries in `variables`.
    pub num_vars: Option<usize>,
    /// Keyed `x1 … xd`.
    pub variables: BTreeMap<String, FreeVariableSpec>,
    pub grid: Option<GridSpec>,
    pub eps_z: f64,
    pub eps_pencil: f64,
    pub richardson: bool,
    pub mode: Mode,
    pub rmt: RmtOptions,
    pub ks_threshold: f64,
    pub oracle_check: bool,
    pub oracle_order: usize,
    /// Word or polynomial for moments mode; defaults to the expression.
    pub word: Option<String>,
    pub output: OutputPaths,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            expression: String::new(),
            num_vars: None,
            variables: BTreeMap::new(),
            grid: None,
            eps_z: DEFAULT_EPS_Z,
            eps_pencil: DEFAULT_EPS_PENCIL,
            richardson: false,
            mode: Mode::Density,
            rmt: RmtOptions::default(),
            ks_threshold: DEFAULT_KS_THRESHOLD,
            oracle_check: false,
            oracle_order: 6,
            word: None,
            output: OutputPaths::default(),
        }
    }
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars.unwrap_or(self.variables.len())
    }

    /// Distributions ordered `x1 … xd`; exactly one per variable.
    pub fn specs(&self) -> Result<Vec<FreeVariableSpec>, PipelineError> {
        let d = self.num_vars();
        if self.variables.len() != d {
            return Err(PipelineError::Config(format!("{d} variables but {} distributions", self.variables.len())));
        }
        (1..=d)
            .map(|k| {
                let spec = self
                    .variables
                    .get(&format!("x{k}"))
                    .ok_or_else(|| PipelineError::Config(format!("no distribution for x{k}")))?;
                spec.validate().map_err(|e| PipelineError::Config(format!("x{k}: {e}")))?;
                Ok(spec.clone())
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.specs()?;
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if !(self.eps_z > 0.0 && self.eps_pencil > 0.0) {
            return Err(PipelineError::Config("eps values must be positive".into()));
        }
        if self.mode == Mode::Validate && (self.rmt.n == 0 || self.rmt.trials == 0) {
            return Err(PipelineError::Config("random-matrix size and trials must be positive".into()));
        }
        Ok(())
    }

    fn inversion(&self) -> InversionOptions {
        InversionOptions { eps_z: self.eps_z, eps_pencil: self.eps_pencil, richardson: self.richardson }
    }
}

/// Parsed expression with its selfadjoint pencil and solver.
pub struct Problem {
    pub expr: RationalExpr,
    pub specs: Vec<FreeVariableSpec>,
    pub pencil: LinearPencil,
    pub source: PencilSource,
    pub evaluator: PencilEvaluator,
}

impl Problem {
    pub fn new(expression: &str, specs: Vec<FreeVariableSpec>) -> Result<Self, PipelineError> {
        let expr = parse(expression, specs.len())?;
        if !expr.is_selfadjoint() {
            return Err(PipelineError::Config(format!("expression {expr} is not selfadjoint")));
        }
        let (pencil, source) = selfadjoint_pencil(&expr, specs.len())?;
        let evaluator = pencil_evaluator(&pencil, &specs)?;
        Ok(Self { expr, specs, pencil, source, evaluator })
    }

    pub fn polynomial(&self) -> Option<NCPolynomial> {
        self.expr.to_polynomial(self.specs.len())
    }

    /// Bound on the spectral radius used for default windows: the monomial
    /// bound `Σ |α| Π r_i` for polynomials, else `Σ ‖b_k‖ r_k` over the pencil.
    pub fn radius_bound(&self) -> f64 {
        let radii: Vec<f64> = self.specs.iter().map(|s| s.support_radius()).collect();
        match self.polynomial() {
            Some(p) => p
                .terms()
                .iter()
                .map(|t| t.coefficient.norm() * t.word.iter().map(|&v| radii[v]).product::<f64>())
                .sum(),
            None => (0..self.pencil.num_vars()).map(|k| operator_norm(self.pencil.linear_term(k)) * radii[k]).sum(),
        }
    }

    /// `2001` points on `[−R, R]` with `R = 1 + radius_bound`.
    pub fn default_grid(&self) -> GridSpec {
        let r = 1.0 + self.radius_bound();
        GridSpec { min: -r, max: r, points: DEFAULT_GRID_POINTS }
    }

    /// Oracle moments `φ(p^k)` for polynomial problems.
    pub fn oracle_moments(&self, max_order: usize) -> Result<Option<Vec<f64>>, PipelineError> {
        let Some(p) = self.polynomial() else { return Ok(None) };
        let degree = p.degree().max(1);
        let moments: Vec<Vec<f64>> = self.specs.iter().map(|s| s.moments(degree * max_order + 1)).collect();
        let mut oracle = ScalarFreeOracle::from_moments(&moments);
        Ok(Some(polynomial_moments(&p, &mut oracle, max_order)?.into_iter().map(|c| c.re).collect()))
    }

    /// `φ(p^k)` from the Cauchy transform on a circle well outside the spectrum.
    pub fn solver_moments(&self, max_order: usize) -> Result<Vec<f64>, PipelineError> {
        // Errors in G are amplified by radius^{k+1}; stay close to the spectrum.
        let radius = 1.2 * self.radius_bound() + 0.5;
        let m = moments_from_cauchy(&self.evaluator, max_order, radius, 256, 1e-12)?;
        Ok(m.into_iter().map(|c| c.re).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentComparison {
    pub order: usize,
    pub oracle: f64,
    pub solver: f64,
    pub relative_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub grid_points: usize,
    pub failed_points: usize,
    pub negative_warnings: usize,
    pub total_iterations: usize,
    pub max_residual: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ks_distance: f64,
    pub ks_threshold: f64,
    pub pass: bool,
    pub n: usize,
    pub trials: usize,
    pub singular_trials: usize,
    pub seed: u64,
    pub generator: String,
    pub ensembles: Vec<EnsembleSpec>,
    /// Histogram density minus the computed density at each bin center.
    pub bin_residuals: Vec<f64>,
    #[serde(skip)]
    pub histogram: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsReport {
    pub word: String,
    pub value: f64,
    pub comparisons: Vec<MomentComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub mode: Mode,
    pub expression: String,
    pub pencil_size: Option<usize>,
    pub pencil_source: Option<String>,
    pub density: Option<SpectralDensity>,
    pub density_moments: Option<Vec<f64>>,
    pub stats: Option<SolverStats>,
    pub oracle_check: Option<Vec<MomentComparison>>,
    pub moments: Option<MomentsReport>,
    pub validation: Option<ValidationReport>,
    pub warnings: Vec<String>,
}

impl JobReport {
    fn new(mode: Mode, expression: String) -> Self {
        Self {
            mode,
            expression,
            pencil_size: None,
            pencil_source: None,
            density: None,
            density_moments: None,
            stats: None,
            oracle_check: None,
            moments: None,
            validation: None,
            warnings: Vec::new(),
        }
    }

    /// `0` only when every requested quantity converged and passed.
    pub fn exit_code(&self) -> i32 {
        if self.stats.as_ref().is_some_and(|s| s.failed_points > 0) {
            return EXIT_CONVERGENCE;
        }
        if let Some(v) = &self.validation {
            if v.singular_trials > 0 {
                return EXIT_SINGULAR;
            }
            if !v.pass {
                return EXIT_VALIDATION_FAILED;
            }
        }
        let comparisons = self.oracle_check.iter().flatten().chain(self.moments.iter().flat_map(|m| &m.comparisons));
        if comparisons.into_iter().any(|c| !c.pass) {
            return EXIT_VALIDATION_FAILED;
        }
        EXIT_OK
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn compare(oracle: &[f64], solver: &[f64]) -> Vec<MomentComparison> {
    oracle
        .iter()
        .zip(solver)
        .enumerate()
        .map(|(order, (&o, &s))| {
            let rel = (o - s).abs() / o.abs().max(1.0);
            MomentComparison { order, oracle: o, solver: s, relative_error: rel, pass: rel < ORACLE_CHECK_RTOL }
        })
        .collect()
}

fn oracle_check(problem: &Problem, order: usize, report: &mut JobReport) -> Result<(), PipelineError> {
    match problem.oracle_moments(order)? {
        Some(oracle) => {
            let solver = problem.solver_moments(order)?;
            report.oracle_check = Some(compare(&oracle, &solver));
        }
        None => report.warnings.push("oracle check skipped: expression is not a polynomial".into()),
    }
    Ok(())
}

pub fn run_density(cfg: &JobConfig) -> Result<JobReport, PipelineError> {
    cfg.validate()?;
    let problem = Problem::new(&cfg.expression, cfg.specs()?)?;
    let mut report = JobReport::new(cfg.mode, problem.expr.to_string());
    report.pencil_size = Some(problem.pencil.size());
    report.pencil_source = Some(format!("{:?}", problem.source).to_lowercase());
    let grid = cfg.grid.unwrap_or_else(|| problem.default_grid());
    let density = invert_stieltjes(&problem.evaluator, &grid.points(), &cfg.inversion());
    if density.negative_warnings() > 0 {
        report.warnings.push(format!(
            "{} grid points had density below −1e-8 before clamping",
            density.negative_warnings()
        ));
    }
    if density.failures() > 0 {
        report.warnings.push(format!("{} grid points did not converge", density.failures()));
    }
    report.stats = Some(SolverStats {
        grid_points: density.points.len(),
        failed_points: density.failures(),
        negative_warnings: density.negative_warnings(),
        total_iterations: density.total_iterations(),
        max_residual: density.max_residual(),
        mass: density.mass,
    });
    report.density_moments = Some(moments_from_density(&density, cfg.oracle_order));
    report.density = Some(density);
    if cfg.oracle_check {
        oracle_check(&problem, cfg.oracle_order, &mut report)?;
    }
    Ok(report)
}

pub fn run_validate(cfg: &JobConfig) -> Result<JobReport, PipelineError> {
    let mut report = run_density(cfg)?;
    let specs = cfg.specs()?;
    let expr = parse(&cfg.expression, specs.len())?;
    let ensembles = cfg.rmt.ensembles.clone().unwrap_or_else(|| EnsembleSpec::defaults_for(&specs));
    let spectrum =
        assemble_and_spectrum(SpectrumSource::Expression(&expr), &ensembles, cfg.rmt.n, cfg.rmt.trials, cfg.rmt.seed)?;
    let density = report.density.as_ref().expect("density computed");
    let ks = ks_distance(&spectrum.histogram, density);
    let (grid, values) = (density.grid(), density.values());
    let bin_residuals = spectrum
        .histogram
        .rows()
        .iter()
        .map(|&(l, r, _, est)| {
            let mid = 0.5 * (l + r);
            let k = grid.partition_point(|&t| t < mid).min(grid.len() - 1);
            est - values[k]
        })
        .collect();
    report.validation = Some(ValidationReport {
        ks_distance: ks,
        ks_threshold: cfg.ks_threshold,
        pass: ks < cfg.ks_threshold,
        n: cfg.rmt.n,
        trials: cfg.rmt.trials,
        singular_trials: spectrum.singular_trials,
        seed: spectrum.seed,
        generator: spectrum.generator,
        ensembles,
        bin_residuals,
        histogram: Some(spectrum.histogram),
    });
    Ok(report)
}

/// `φ(word)` from the oracle; with `oracle_check`, also `φ(p^k)` from oracle
/// and solver side by side when the expression is a selfadjoint polynomial.
pub fn run_moments(cfg: &JobConfig) -> Result<JobReport, PipelineError> {
    let specs = cfg.specs()?;
    let text = cfg.word.clone().unwrap_or_else(|| cfg.expression.clone());
    let expr = parse(&text, specs.len())?;
    let poly = expr
        .to_polynomial(specs.len())
        .ok_or_else(|| PipelineError::Config(format!("{expr} is not a polynomial")))?;
    let degree = poly.degree();
    if degree > MAX_MOMENT_WORD {
        return Err(PipelineError::Oracle(OracleError::TooLarge { what: "moment word", n: degree, cap: MAX_MOMENT_WORD }));
    }
    let moments: Vec<Vec<f64>> = specs.iter().map(|s| s.moments(MAX_MOMENT_WORD.max(degree * cfg.oracle_order) + 1)).collect();
    let mut oracle = ScalarFreeOracle::from_moments(&moments);
    let value = polynomial_moments(&poly, &mut oracle, 1)?[1].re;
    let mut report = JobReport::new(Mode::Moments, expr.to_string());
    let mut comparisons = Vec::new();
    if cfg.oracle_check {
        if poly.is_selfadjoint() {
            let problem = Problem::new(&text, specs)?;
            let want = problem.oracle_moments(cfg.oracle_order)?.expect("polynomial");
            comparisons = compare(&want, &problem.solver_moments(cfg.oracle_order)?);
        } else {
            report.warnings.push("solver comparison skipped: word is not selfadjoint".into());
        }
    }
    report.moments = Some(MomentsReport { word: expr.to_string(), value, comparisons });
    Ok(report)
}

pub fn run(cfg: &JobConfig) -> Result<JobReport, PipelineError> {
    match cfg.mode {
        Mode::Density => run_density(cfg),
        Mode::Validate => run_validate(cfg),
        Mode::Moments => run_moments(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(expr: &str, vars: &str) -> JobConfig {
        let mut cfg = JobConfig::default();
        cfg.expression = expr.into();
        cfg.variables = serde_json::from_str(vars).unwrap();
        cfg
    }

    const SEMI: &str = r#"{"x1":{"kind":"semicircular","variance":1.0}}"#;
    const TWO_SEMI: &str =
        r#"{"x1":{"kind":"semicircular","variance":1.0},"x2":{"kind":"semicircular","variance":1.0}}"#;

    #[test]
    fn config_round_trip() {
        let mut cfg = config("x1*x2+x2*x1", TWO_SEMI);
        cfg.grid = Some(GridSpec { min: -3.0, max: 3.0, points: 11 });
        let back = JobConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(run_density(&cfg).unwrap(), run_density(&back).unwrap());
    }

    #[test]
    fn config_errors() {
        let cfg = config("x1", r#"{"x2":{"kind":"semicircular","variance":1.0}}"#);
        assert_eq!(run_density(&cfg).unwrap_err().exit_code(), EXIT_CONFIG);
        let cfg = config("x1*x2", TWO_SEMI);
        assert_eq!(run_density(&cfg).unwrap_err().exit_code(), EXIT_CONFIG);
        let mut cfg = config("x1", SEMI);
        cfg.grid = Some(GridSpec { min: 1.0, max: -1.0, points: 11 });
        assert_eq!(run_density(&cfg).unwrap_err().exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn semicircle_density_at_origin() {
        let mut cfg = config("x1", SEMI);
        cfg.eps_z = 1e-4;
        cfg.grid = Some(GridSpec { min: -1.0, max: 1.0, points: 3 });
        let r = run_density(&cfg).unwrap();
        let rho0 = r.density.as_ref().unwrap().points[1].rho.unwrap();
        assert!((rho0 - 1.0 / std::f64::consts::PI).abs() < 1e-3);
        assert_eq!(r.exit_code(), EXIT_OK);
    }

    #[test]
    fn moments_mode() {
        let mut cfg = config("x1", SEMI);
        cfg.word = Some("x1^8".into());
        assert_eq!(run_moments(&cfg).unwrap().moments.unwrap().value, 14.0);
        let mut cfg = config("x1", TWO_SEMI);
        cfg.word = Some("x1*x2*x1*x2".into());
        assert_eq!(run_moments(&cfg).unwrap().moments.unwrap().value, 0.0);
        cfg.word = Some("x1^9".into());
        assert!(run_moments(&cfg).is_err());
    }

    #[test]
    fn alternating_atomic_moment() {
        // φ(XYXY) = φ(X²)φ(Y)² + φ(X)²φ(Y²) − φ(X)²φ(Y)².
        let vars = r#"{"x1":{"kind":"atomic","atoms":[[0.3,-1],[0.7,2]]},"x2":{"kind":"atomic","atoms":[[0.5,0],[0.5,3]]}}"#;
        let mut cfg = config("x1", vars);
        cfg.word = Some("x1*x2*x1*x2".into());
        let v = run_moments(&cfg).unwrap().moments.unwrap().value;
        let (m1x, m2x) = (0.3 * -1.0 + 0.7 * 2.0, 0.3 + 0.7 * 4.0);
        let (m1y, m2y) = (1.5, 4.5);
        let want = m2x * m1y * m1y + m1x * m1x * m2y - m1x * m1x * m1y * m1y;
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn oracle_check_on_commutator_square() {
        let mut cfg = config("x1*x2+x2*x1", TWO_SEMI);
        cfg.grid = Some(GridSpec { min: -3.0, max: 3.0, points: 5 });
        cfg.oracle_check = true;
        let r = run_density(&cfg).unwrap();
        let checks = r.oracle_check.as_ref().unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        assert_eq!(r.exit_code(), EXIT_OK);
    }

    #[test]
    fn default_grid_contains_spectrum() {
        let specs: BTreeMap<String, FreeVariableSpec> = serde_json::from_str(
            r#"{"x1":{"kind":"atomic","atoms":[[0.5,-2],[0.25,-1],[0.25,1]]},"x2":{"kind":"semicircular","variance":1.0}}"#,
        )
        .unwrap();
        let problem = Problem::new("x1*x2+x2*x1+x1^2", specs.into_values().collect()).unwrap();
        assert!((problem.radius_bound() - 12.0).abs() < 1e-12);
    }
}
