//! Random-matrix models for free variables: GUE, Haar-rotated and
//! deterministic diagonal matrices, spectra of expressions and pencils in
//! them, histograms and Kolmogorov–Smirnov distances to computed densities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cauchy::FreeVariableSpec;
use crate::density::SpectralDensity;
use crate::linearize::LinearPencil;
use crate::matalg::{eigvalsh_householder, ComplexMatrix, C64, ZERO};
use crate::ncexpr::RationalExpr;

pub const GENERATOR: &str = "ChaCha8";

#[derive(Debug, Error)]
pub enum RmtError {
    #[error("invalid ensemble: {0}")]
    Invalid(String),
    #[error("all {0} trials hit singular evaluations")]
    AllTrialsSingular(usize),
}

/// Random-matrix model of one variable at size `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleSpec {
    /// `σ · A` with `A` a GUE matrix with entry variance `1/N`.
    Gue { scale: f64 },
    /// `U D U*` with `U` Haar and `D` the diagonal with atoms at the given
    /// `(weight, atom)` multiplicity fractions.
    HaarConjugatedDiagonal { atoms: Vec<(f64, f64)> },
    /// The diagonal matrix `D` itself.
    Deterministic { atoms: Vec<(f64, f64)> },
}

impl EnsembleSpec {
    /// Asymptotically free models: semicircular variables become scaled GUE,
    /// the first atomic variable a fixed diagonal, later atomic ones
    /// Haar-rotated diagonals.
    pub fn defaults_for(specs: &[FreeVariableSpec]) -> Vec<EnsembleSpec> {
        let mut seen_atomic = false;
        specs
            .iter()
            .map(|s| match s {
                FreeVariableSpec::Semicircular { variance } => EnsembleSpec::Gue { scale: variance.sqrt() },
                FreeVariableSpec::Atomic { atoms } if !seen_atomic => {
                    seen_atomic = true;
                    EnsembleSpec::Deterministic { atoms: atoms.clone() }
                }
                FreeVariableSpec::Atomic { atoms } => EnsembleSpec::HaarConjugatedDiagonal { atoms: atoms.clone() },
            })
            .collect()
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        match self {
            EnsembleSpec::Gue { scale } => sample_gue_with(n, rng).scale_real(*scale),
            EnsembleSpec::Deterministic { atoms } => ComplexMatrix::from_real_diag(&diagonal_atoms(atoms, n)),
            EnsembleSpec::HaarConjugatedDiagonal { atoms } => {
                let u = sample_haar_unitary_with(n, rng);
                let d = ComplexMatrix::from_real_diag(&diagonal_atoms(atoms, n));
                &(&u * &d) * &u.adjoint()
            }
        }
    }
}

/// Atom multiplicities `round(w·N)`, with the last atom absorbing rounding.
pub fn diagonal_atoms(atoms: &[(f64, f64)], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for (k, &(w, t)) in atoms.iter().enumerate() {
        let count = if k + 1 == atoms.len() { n - out.len().min(n) } else { ((w * n as f64).round() as usize).min(n - out.len()) };
        out.extend(std::iter::repeat(t).take(count));
    }
    out
}

/// Generator for a trial: the seed fixes the key, the trial index the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn sample_gue_with(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(n, n);
    let diag_sd = (1.0 / n as f64).sqrt();
    let off_sd = (0.5 / n as f64).sqrt();
    for r in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        a[(r, r)] = C64::new(diag_sd * x, 0.0);
        for c in r + 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let v = C64::new(off_sd * re, off_sd * im);
            a[(r, c)] = v;
            a[(c, r)] = v.conj();
        }
    }
    a
}

/// GUE matrix with entry variance `1/N`.
pub fn sample_gue(n: usize, seed: u64) -> ComplexMatrix {
    sample_gue_with(n, &mut trial_rng(seed, 0))
}

/// Haar unitary from the QR factorization of a complex Ginibre matrix,
/// with the diagonal of `R` made positive.
pub fn sample_haar_unitary_with(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major working copy: cols[j] is column j.
    let mut cols: Vec<Vec<C64>> = (0..n)
        .map(|_| (0..n).map(|_| C64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))).collect())
        .collect();
    // Householder vectors v_j (on rows j..n) and the phases of R's diagonal.
    let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut phases = vec![C64::new(1.0, 0.0); n];
    for j in 0..n {
        let x = &cols[j][j..];
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let alpha = x[0];
        let phase = if alpha.norm() > 0.0 { alpha / alpha.norm() } else { C64::new(1.0, 0.0) };
        // H x = −phase·‖x‖ e₁, so R_jj = −phase·‖x‖.
        let mut v: Vec<C64> = x.to_vec();
        v[0] += phase * norm;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            v.iter_mut().for_each(|z| *z /= vnorm);
        }
        phases[j] = -phase;
        let apply = |col: &mut Vec<C64>| {
            let dot: C64 = v.iter().zip(&col[j..]).map(|(a, b)| a.conj() * b).sum();
            for (c, a) in col[j..].iter_mut().zip(&v) {
                *c -= 2.0 * a * dot;
            }
        };
        cols[j + 1..].par_iter_mut().for_each(apply);
        reflectors.push(v);
    }
    // Q = H₀ H₁ ⋯ H_{n−1}; apply to the identity columns from the right end.
    let mut q: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    q.par_iter_mut().for_each(|col| {
        for j in (0..n).rev() {
            let v = &reflectors[j];
            let dot: C64 = v.iter().zip(&col[j..]).map(|(a, b)| a.conj() * b).sum();
            if dot != ZERO {
                for (c, a) in col[j..].iter_mut().zip(v) {
                    *c -= 2.0 * a * dot;
                }
            }
        }
    });
    // U = Q · diag(phase(R_jj)).
    ComplexMatrix::from_fn(n, n, |r, c| q[c][r] * phases[c])
}

pub fn sample_haar_unitary(n: usize, seed: u64) -> ComplexMatrix {
    sample_haar_unitary_with(n, &mut trial_rng(seed, 0))
}

/// What to diagonalize in each trial.
#[derive(Debug, Clone, Copy)]
pub enum SpectrumSource<'a> {
    Expression(&'a RationalExpr),
    /// `b₀ ⊗ 1 + Σ b_k ⊗ X_k`.
    Pencil(&'a LinearPencil),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// All collected eigenvalues, sorted.
    pub samples: Vec<f64>,
}

impl Histogram {
    /// Freedman–Diaconis bins `2·IQR·n^{−1/3}` over the sample range.
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.total_cmp(b));
        let n = samples.len();
        if n == 0 {
            return Self { bin_edges: vec![0.0, 1.0], counts: vec![0], samples };
        }
        let (lo, hi) = (samples[0], samples[n - 1]);
        let q = |f: f64| samples[((n - 1) as f64 * f).round() as usize];
        let width = 2.0 * (q(0.75) - q(0.25)) / (n as f64).cbrt();
        let bins = if width > 0.0 && hi > lo { (((hi - lo) / width).ceil() as usize).clamp(1, 10_000) } else { 1 };
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let bin_edges: Vec<f64> = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
        let mut counts = vec![0u64; bins];
        for &x in &samples {
            let k = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
            counts[k.min(bins - 1)] += 1;
        }
        Self { bin_edges, counts, samples }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `count / (total · width)` per bin.
    pub fn density_estimate(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
            .collect()
    }

    /// `(bin_left, bin_right, count, density_estimate)` rows.
    pub fn rows(&self) -> Vec<(f64, f64, u64, f64)> {
        self.bin_edges
            .windows(2)
            .zip(&self.counts)
            .zip(self.density_estimate())
            .map(|((e, &c), d)| (e[0], e[1], c, d))
            .collect()
    }

    /// Normalized trace moments `(1/n) Σ λ^k` of the collected spectrum.
    pub fn moment(&self, k: usize) -> f64 {
        self.samples.iter().map(|x| x.powi(k as i32)).sum::<f64>() / self.samples.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub histogram: Histogram,
    pub trials: usize,
    pub singular_trials: usize,
    pub seed: u64,
    pub generator: String,
}

/// Draws the matrices of one trial.
pub fn sample_trial(ensembles: &[EnsembleSpec], n: usize, seed: u64, trial: u64) -> Vec<ComplexMatrix> {
    let mut rng = trial_rng(seed, trial);
    ensembles.iter().map(|e| e.sample(n, &mut rng)).collect()
}

/// Spectrum of the expression or pencil over `trials` independent draws.
/// Trials with singular evaluations are skipped and counted.
pub fn assemble_and_spectrum(
    source: SpectrumSource<'_>,
    ensembles: &[EnsembleSpec],
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<SpectrumReport, RmtError> {
    if n == 0 || trials == 0 {
        return Err(RmtError::Invalid("matrix size and trial count must be positive".into()));
    }
    let needed = match source {
        SpectrumSource::Expression(e) => e.min_num_vars(),
        SpectrumSource::Pencil(p) => p.num_vars(),
    };
    if ensembles.len() < needed {
        return Err(RmtError::Invalid(format!("{needed} variables but {} ensembles", ensembles.len())));
    }
    let spectra: Vec<Option<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let xs = sample_trial(ensembles, n, seed, trial as u64);
            let m = match source {
                SpectrumSource::Expression(e) => e.evaluate(&xs).ok()?,
                SpectrumSource::Pencil(p) => p.evaluate(&xs).ok()?,
            };
            // Round-off leaves tiny anti-Hermitian parts; keep the Hermitian part.
            let h = &(&m + &m.adjoint()).scale_real(0.5);
            Some(eigvalsh_householder(h))
        })
        .collect();
    let singular = spectra.iter().filter(|s| s.is_none()).count();
    if singular == trials {
        return Err(RmtError::AllTrialsSingular(trials));
    }
    let samples: Vec<f64> = spectra.into_iter().flatten().flatten().collect();
    Ok(SpectrumReport {
        histogram: Histogram::from_samples(samples),
        trials,
        singular_trials: singular,
        seed,
        generator: GENERATOR.into(),
    })
}

/// Density CDF at `x` by linear interpolation of the normalized trapezoid CDF.
fn density_cdf_at(grid: &[f64], cdf: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return 0.0;
    }
    if x >= grid[grid.len() - 1] {
        return 1.0;
    }
    let k = grid.partition_point(|&t| t <= x) - 1;
    let f = (x - grid[k]) / (grid[k + 1] - grid[k]);
    cdf[k] + f * (cdf[k + 1] - cdf[k])
}

/// `sup_x |F_emp(x) − F_ρ(x)|`, checked on both sides of every jump of the
/// empirical CDF.
pub fn ks_distance(h: &Histogram, d: &SpectralDensity) -> f64 {
    let n = h.samples.len();
    if n == 0 || d.points.len() < 2 {
        return 1.0;
    }
    let grid = d.grid();
    let cdf = d.cdf();
    let mut sup: f64 = 0.0;
    for (i, &x) in h.samples.iter().enumerate() {
        let f = density_cdf_at(&grid, &cdf, x);
        sup = sup.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    sup
}
