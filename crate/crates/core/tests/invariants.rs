use ncdist::cauchy::{AtomicEvaluator, CauchyEvaluator, SemicircularEvaluator};
use ncdist::convolve::ConvolvedEvaluator;
use ncdist::density::matrix_moments_from_cauchy;
use ncdist::linearize::{represent_rational, schur_check};
use ncdist::matalg::{min_imaginary_eigenvalue, ComplexMatrix, C64};
use ncdist::ncexpr::{parse, NCMonomial, NCPolynomial};
use ncdist::oracle::{catalan, polynomial_moments, semicircular_moment, CovarianceMap, ScalarFreeOracle};
use proptest::prelude::*;

fn hermitian(n: usize, entries: &[f64]) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = C64::new(entries[i * n + i], 0.0);
        for j in 0..i {
            let v = C64::new(entries[i * n + j], entries[j * n + i]);
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
    a
}

fn arb_hermitian(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |e| hermitian(n, &e))
}

/// `H + i(C C* + δ)`.
fn arb_upper(n: usize, delta: f64) -> impl Strategy<Value = ComplexMatrix> {
    (arb_hermitian(n), prop::collection::vec(-1.0..1.0f64, 2 * n * n)).prop_map(move |(h, e)| {
        let c = ComplexMatrix::from_fn(n, n, |i, j| C64::new(e[i * n + j], e[n * n + i * n + j]));
        let im = &(&c * &c.adjoint()) + &ComplexMatrix::scalar_identity(n, C64::new(delta, 0.0));
        &h + &im.scale(C64::i())
    })
}

fn arb_atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::btree_set(-20i32..20, 2..4).prop_flat_map(|set| {
        let atoms: Vec<f64> = set.into_iter().map(|a| a as f64 / 10.0).collect();
        prop::collection::vec(0.2..1.0f64, atoms.len()).prop_map(move |w| {
            let total: f64 = w.iter().sum();
            let mut pairs: Vec<(f64, f64)> = w.iter().zip(&atoms).map(|(w, a)| (w / total, *a)).collect();
            let head: f64 = pairs[..pairs.len() - 1].iter().map(|p| p.0).sum();
            pairs.last_mut().unwrap().0 = 1.0 - head;
            pairs
        })
    })
}

fn atomic(c: &ComplexMatrix, atoms: &[(f64, f64)]) -> Box<dyn CauchyEvaluator> {
    Box::new(AtomicEvaluator { coefficient: c.clone(), atoms: atoms.to_vec() })
}

fn semicircular(c: &ComplexMatrix, variance: f64) -> Box<dyn CauchyEvaluator> {
    Box::new(SemicircularEvaluator::tensor(c, variance).unwrap())
}

fn pencil_case() -> impl Strategy<Value = (ComplexMatrix, ComplexMatrix, Vec<(f64, f64)>, f64, ComplexMatrix)> {
    (1usize..=3).prop_flat_map(|n| (arb_hermitian(n), arb_hermitian(n), arb_atoms(), 0.3..2.0f64, arb_upper(n, 0.3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn free_convolution_is_commutative((a, b, atoms, variance, z) in pencil_case()) {
        let ab = ConvolvedEvaluator::new(atomic(&a, &atoms), semicircular(&b, variance)).unwrap();
        let ba = ConvolvedEvaluator::new(semicircular(&b, variance), atomic(&a, &atoms)).unwrap();
        let diff = (&ab.evaluate(&z).unwrap() - &ba.evaluate(&z).unwrap()).frobenius_norm();
        prop_assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn free_sum_of_semicirculars_is_semicircular((a, b, _atoms, variance, z) in pencil_case()) {
        let conv = ConvolvedEvaluator::new(semicircular(&a, variance), semicircular(&b, 1.0)).unwrap();
        let eta = CovarianceMap::explicit(vec![a.scale_real(variance.sqrt()), b.clone()]).unwrap();
        let joint = SemicircularEvaluator::new(eta);
        let diff = (&conv.evaluate(&z).unwrap() - &joint.evaluate(&z).unwrap()).frobenius_norm();
        prop_assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn cauchy_transforms_map_into_the_lower_half_plane((a, b, atoms, variance, z) in pencil_case()) {
        let evaluators = [
            atomic(&a, &atoms),
            semicircular(&b, variance),
            Box::new(ConvolvedEvaluator::new(atomic(&a, &atoms), semicircular(&b, variance)).unwrap()),
        ];
        for ev in &evaluators {
            let g = ev.evaluate(&z).unwrap();
            prop_assert!(min_imaginary_eigenvalue(&(-&g)) > 0.0);
        }
    }

    #[test]
    fn rational_representations_satisfy_the_schur_identity(
        x in arb_hermitian(3),
        y in arb_hermitian(3),
        shift in 2.5..4.0f64,
        text in prop::sample::select(vec![
            "inv(inv(x1)+inv(x2))",
            "x1*inv(x2)*x1",
            "inv(x1*x1+1)*x2 - x2*x1",
            "inv(x1 + inv(x2))",
            "x1^3 - 2*x1*x2 + 0.5",
        ]),
    ) {
        // Shifting keeps every inverse well conditioned.
        let s = ComplexMatrix::scalar_identity(3, C64::new(shift, 0.0));
        let xs = [&x + &s, &y + &s];
        let r = parse(text, 2).unwrap();
        let rep = represent_rational(&r, 2);
        let residual = schur_check(&r, &rep, &xs).unwrap();
        prop_assert!(residual < 1e-9, "{text}: {residual}");
    }

    #[test]
    fn oracle_sum_of_free_semicirculars(a in 0.1..3.0f64, b in 0.1..3.0f64) {
        let p = NCPolynomial::new(2, vec![
            NCMonomial::new(C64::new(1.0, 0.0), vec![0]),
            NCMonomial::new(C64::new(1.0, 0.0), vec![1]),
        ]);
        let semi = |v: f64| (0..=8).map(|k| if k % 2 == 1 { 0.0 } else { v.powi(k / 2) * catalan(k as usize / 2) as f64 }).collect::<Vec<_>>();
        let mut oracle = ScalarFreeOracle::from_moments(&[semi(a), semi(b)]);
        let got = polynomial_moments(&p, &mut oracle, 8).unwrap();
        let want = semi(a + b);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g.re - w).abs() < 1e-10 * w.abs().max(1.0), "{g} vs {w}");
        }
    }
}

#[test]
fn block_diagonal_semicircular_fourth_moment() {
    // diag(S₁, 2S₂): η(b) = e₁₁ b e₁₁ + 4 e₂₂ b e₂₂.
    let eta = CovarianceMap::explicit(vec![
        ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]),
        ComplexMatrix::from_real_rows(&[vec![0.0, 0.0], vec![0.0, 2.0]]),
    ])
    .unwrap();
    let one = ComplexMatrix::identity(2);
    let oracle = semicircular_moment(&eta, &[one.clone(), one.clone(), one]).unwrap().normalized_trace().re;
    assert!((oracle - 17.0).abs() < 1e-12);

    let solved = matrix_moments_from_cauchy(&SemicircularEvaluator::new(eta), 4, 5.5, 256).unwrap();
    assert!((solved[4].normalized_trace().re - 17.0).abs() < 1e-6);
}
