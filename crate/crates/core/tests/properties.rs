mod common;

use me2ph::deconv::{choose_mu, deconvolve, recompose, zero_multiplicity};
use me2ph::linalg::{eigenvalues, mat_norm_inf, matrix_exp, to_complex, vec_norm1};
use me2ph::monocyclic::{build_generator, FEBlock, MonocyclicRep};
use me2ph::rep::{apply_transformation, pdf_eval};
use me2ph::spectral::{analyze_spectrum, check_dec, minimal_representation};
use me2ph::tail::Evaluator;
use me2ph::validate::{check_markovian_ph, check_positive_density, eliminate_redundant};
use me2ph::{convert, corpus, ConvertOptions, MERep, PHRep, ToleranceConfig};
use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 200, ..ProptestConfig::default() }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale))
}

fn ph_pdf(ph: &PHRep, xs: &[f64]) -> Vec<f64> {
    let x_max = xs.iter().copied().fold(0.0, f64::max);
    Evaluator::new(ph, x_max).unwrap().pdf_many(xs).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn infinity_norm_is_submultiplicative(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = common::rng(seed);
        let a = random_matrix(&mut rng, n, 3.0);
        let b = random_matrix(&mut rng, n, 3.0);
        prop_assert!(mat_norm_inf(&(&a * &b)) <= mat_norm_inf(&a) * mat_norm_inf(&b));
    }

    #[test]
    fn bilinear_form_bound(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = common::rng(seed);
        let a = random_matrix(&mut rng, n, 3.0);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let form = (RowDVector::from_row_slice(&v) * &a * &w)[0];
        let bound = vec_norm1(&v) * mat_norm_inf(&a) * w.amax();
        prop_assert!(form.abs() <= bound * (1.0 + 1e-14));
    }

    #[test]
    fn matrix_exp_inverse(seed in any::<u64>(), n in 1usize..8, r in 0.0f64..5.0) {
        let mut rng = common::rng(seed);
        let mut h = random_matrix(&mut rng, n, 1.0);
        let norm = mat_norm_inf(&h);
        if norm > 0.0 {
            h *= r / norm;
        }
        let prod = matrix_exp(&h) * matrix_exp(&(-&h));
        prop_assert!((prod - DMatrix::identity(n, n)).amax() <= 1e-10);
    }

    #[test]
    fn similarity_transformation_preserves_pdf(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = common::rng(seed);
        let (beta, g) = common::random_markovian(&mut rng, n);
        // W with W 1 = 1, A = W G W^-1, so A W = W G
        let mut w = DMatrix::from_fn(n, n, |i, j| {
            let v: f64 = rng.random_range(-0.4..0.4);
            if i == j { 1.0 + v } else { v }
        });
        for i in 0..n {
            let s: f64 = w.row(i).sum();
            w[(i, i)] += 1.0 - s;
        }
        let winv = w.clone().try_inverse().unwrap();
        // rounding in building A grows with the conditioning of W
        prop_assume!(mat_norm_inf(&w) * mat_norm_inf(&winv) < 1e3);
        let a = &w * &g * &winv;
        let alpha = RowDVector::from_row_slice(&beta) * &winv;
        let rep = MERep::from_real(alpha.as_slice(), &a).unwrap();
        let moved = apply_transformation(&rep, &to_complex(&w), &to_complex(&g), &tol()).unwrap();
        let peak = (0..=50).map(|i| pdf_eval(&rep, 0.1 * i as f64).unwrap().abs()).fold(0.0, f64::max);
        for x in common::grid(0.0, 5.0, 50) {
            let (p, q) = (pdf_eval(&rep, x).unwrap(), pdf_eval(&moved, x).unwrap());
            prop_assert!((p - q).abs() <= 1e-9 * peak.max(1.0), "x={x}: {p} vs {q}");
        }
    }

    #[test]
    fn fe_dominant_eigenvalue_matches_eigensolver(
        b in 1usize..=12,
        sigma in 1e-3f64..=10.0,
        z in 0.0f64..0.99,
    ) {
        let blk = FEBlock { b, sigma, z };
        let eig = eigenvalues(&to_complex(&blk.matrix())).unwrap();
        let top = eig.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((blk.r() - top).abs() <= 1e-10, "r={} eig={}", blk.r(), top);
    }

    #[test]
    fn stable_matrix_euler_bound(seed in any::<u64>(), ri in 0usize..3, ni in 0usize..3, m in 2usize..6) {
        let r = [0.5, 1.0, 5.0][ri];
        let n = [10usize, 100, 1000][ni];
        let mut rng = common::rng(seed);
        let (_, g) = common::random_markovian(&mut rng, m);
        let h = &g * (r / mat_norm_inf(&g));
        let step = DMatrix::identity(m, m) + &h / n as f64;
        let mut pow = DMatrix::identity(m, m);
        for _ in 0..n {
            pow = &pow * &step;
        }
        let err = mat_norm_inf(&(matrix_exp(&h) - pow));
        prop_assert!(err <= r * r * r.exp() / (2.0 * n as f64));
    }

    #[test]
    fn markovian_inputs_satisfy_positivity_and_dec(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = common::rng(seed);
        let rep = common::random_markovian_rep(&mut rng, n);
        for i in 1..=300 {
            let x = 0.1 * i as f64;
            prop_assert!(pdf_eval(&rep, x).unwrap() > 0.0, "x={x}");
        }
        let spec = analyze_spectrum(&rep, &tol()).unwrap();
        let dec = check_dec(&spec);
        prop_assert!(dec.holds, "{dec}");
        let min = minimal_representation(&spec).unwrap();
        let pos = check_positive_density(&min, &spec, &tol());
        prop_assert!(pos.pass, "{}", pos.describe());
    }

    #[test]
    fn appendix_generator_with_positive_alpha(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let a = corpus::ten_state_generator();
        let mut alpha: Vec<f64> = (0..10).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = alpha.iter().sum();
        alpha.iter_mut().for_each(|x| *x /= s);
        let rep = MERep::from_real(&alpha, &a).unwrap();
        let spec = analyze_spectrum(&rep, &tol()).unwrap();
        prop_assert!(check_dec(&spec).holds);
        prop_assert!((spec.lambda1() - 1.0).abs() < 1e-9);
        let min = minimal_representation(&spec).unwrap();
        prop_assert!(check_positive_density(&min, &spec, &tol()).pass);
    }

    #[test]
    fn minimal_representation_preserves_pdf(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = common::rng(seed);
        let rep = common::random_markovian_rep(&mut rng, n);
        let spec = analyze_spectrum(&rep, &tol()).unwrap();
        let min = minimal_representation(&spec).unwrap();
        for x in common::grid(0.0, 20.0, 100) {
            let (p, q) = (pdf_eval(&rep, x).unwrap(), pdf_eval(&min, x).unwrap());
            prop_assert!((p - q).abs() <= 1e-7 * p.abs(), "x={x}: {p} vs {q}");
        }
        // minimizing again keeps the order
        let again = analyze_spectrum(&min, &tol()).unwrap();
        prop_assert_eq!(again.order(), min.order());
    }

    #[test]
    fn equivalent_representations_share_jordan_structure(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = common::rng(seed);
        let (alpha, a) = common::random_markovian(&mut rng, n);
        // pad with an unreachable state, then scramble
        let mut big = DMatrix::zeros(n + 1, n + 1);
        big.view_mut((0, 0), (n, n)).copy_from(&a);
        big[(n, n)] = -rng.random_range(0.5..5.0);
        big[(n, 0)] = 0.3;
        // a near-coincident extra eigenvalue makes the zero coefficient
        // numerically indistinguishable from a small one
        let gap = eigenvalues(&to_complex(&a)).unwrap().iter().map(|e| (e - big[(n, n)]).norm()).fold(f64::INFINITY, f64::min);
        prop_assume!(gap > 0.05);
        let mut padded = alpha.clone();
        padded.push(0.0);
        let first = analyze_spectrum(&MERep::from_real(&alpha, &a).unwrap(), &tol()).unwrap();
        let second = analyze_spectrum(&common::scrambled(&mut rng, &padded, &big), &tol()).unwrap();
        prop_assert_eq!(first.terms.len(), second.terms.len());
        for (s, t) in first.terms.iter().zip(&second.terms) {
            prop_assert_eq!(s.multiplicity, t.multiplicity);
            prop_assert!((s.eigenvalue - t.eigenvalue).norm() <= 1e-6 * first.scale);
        }
    }

    #[test]
    fn density_follows_dominant_term(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = common::rng(seed);
        let rep = common::random_markovian_rep(&mut rng, n);
        let spec = analyze_spectrum(&rep, &tol()).unwrap();
        let (l1, n1) = (spec.lambda1(), spec.n1() as i32);
        // convergence at x = 30/lambda1 needs some spectral gap
        let next = spec.terms.iter().skip(1).map(|t| -t.eigenvalue.re).fold(f64::INFINITY, f64::min);
        prop_assume!(n1 == 1 && next >= 1.5 * l1);
        let ratio = |x: f64| spec.pdf(x) / (x.powi(n1 - 1) * (-l1 * x).exp());
        let (r30, r40) = (ratio(30.0 / l1), ratio(40.0 / l1));
        prop_assert!(r30 > 0.0 && r40 > 0.0);
        prop_assert!((r30 / r40 - 1.0).abs() <= 0.05, "{r30} vs {r40}");
    }

    #[test]
    fn redundant_states_can_be_removed(seed in any::<u64>(), n in 2usize..6, extra in 1usize..3) {
        let mut rng = common::rng(seed);
        let (alpha, a) = common::random_markovian(&mut rng, n);
        // states that are never entered
        let m = n + extra;
        let mut big = DMatrix::zeros(m, m);
        big.view_mut((0, 0), (n, n)).copy_from(&a);
        for i in n..m {
            big[(i, i)] = -rng.random_range(0.5..5.0);
            big[(i, rng.random_range(0..n))] = 0.2;
        }
        let mut padded = alpha.clone();
        padded.resize(m, 0.0);
        let rep = MERep::from_real(&padded, &big).unwrap();
        let reduced = eliminate_redundant(&rep, &tol()).unwrap();
        prop_assert_eq!(reduced.order(), n);
        for x in common::grid(0.0, 10.0, 50) {
            let (p, q) = (pdf_eval(&rep, x).unwrap(), pdf_eval(&reduced, x).unwrap());
            prop_assert!((p - q).abs() <= 1e-10 * p.abs().max(1e-3));
        }
    }

    #[test]
    fn deconvolution_round_trip(seed in any::<u64>(), n in 2usize..6, l in 1usize..3) {
        let mut rng = common::rng(seed);
        let x_rep = common::erlang_damped(&mut rng, n, l);

        let spec = analyze_spectrum(&x_rep, &tol()).unwrap();
        let min = minimal_representation(&spec).unwrap();
        prop_assert_eq!(zero_multiplicity(&min, &tol()).unwrap(), l);
        // the smallest accepted rate leaves f_Y close to zero somewhere, which
        // can make the tail extremely long
        let mu = 2.0 * choose_mu(&min, l, &spec, &tol()).unwrap();
        let y = deconvolve(&min, l, mu).unwrap();
        prop_assert_eq!(y.matrix(), min.matrix());
        // f(0) of the minimal form is zero only up to rounding, which moves
        // alpha_Y 1 = 1 - f(0)/mu off one by about that much
        let opts = ConvertOptions { tol: ToleranceConfig { alpha_sum: tol().mass_drift, ..tol() }, ..Default::default() };
        let ph_y = convert(&y, &opts).unwrap().ph;
        let ph = recompose(&ph_y, l, mu, &tol()).unwrap();
        prop_assert!(check_markovian_ph(&ph, &tol()).markovian);
        let xs = common::grid(0.0, 10.0, 50);
        let got = ph_pdf(&ph, &xs);
        for (x, g) in xs.iter().zip(got) {
            let want = pdf_eval(&x_rep, *x).unwrap();
            prop_assert!((g - want).abs() <= 1e-5 * want.abs(), "x={x}: {g} vs {want}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn tail_weights_sample_the_density(seed in any::<u64>(), n in 3usize..=6) {
        let mut rng = common::rng(seed);
        let opts = ConvertOptions { max_order: 200_000, ..ConvertOptions::default() };
        // draw until a candidate converts with a tail of moderate length
        let conv = (0..10_000)
            .find_map(|_| convert(&common::signed_candidate(&mut rng, n), &opts).ok().filter(|c| c.ph.tail.is_some()))
            .expect("no candidate needed a tail");
        let mono = MonocyclicRep { blocks: conv.report.blocks.clone(), gamma: Some(conv.report.gamma.clone()) };
        let bounds = conv.report.bounds.unwrap();
        let tail = conv.ph.tail.as_ref().unwrap();
        let (lambda, len) = (tail.lambda, tail.n);
        let g = mono.generator();
        let exit = mono.exit_vector();
        let step = matrix_exp(&(&g / lambda));
        let mut v = RowDVector::from_row_slice(&conv.report.gamma);
        for k in 0..len {
            let f = (&v * &exit)[0];
            let sampled = lambda * tail.weights[len - 1 - k];
            prop_assert!((sampled - f).abs() <= bounds.eps2, "k={k}: {sampled} vs {f}");
            v = &v * &step;
        }
    }
}

#[test]
fn scalar_euler_bound_attained_at_r() {
    for &r in &[0.5f64, 1.0, 5.0] {
        for &n in &[10usize, 100, 1000] {
            let bound = r * r * r.exp() / (2.0 * n as f64);
            let err = |z: Complex64| (z.exp() - (Complex64::from(1.0) + z / n as f64).powu(n as u32)).norm();
            let mut worst = (0.0, Complex64::from(0.0));
            for i in 0..64 {
                // 48 points on the circle |z| = r and 16 inside
                let z = if i < 48 {
                    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * i as f64 / 48.0)
                } else {
                    Complex64::from_polar(r * (i - 47) as f64 / 17.0, 0.7 * i as f64)
                };
                let e = err(z);
                assert!(e <= bound, "r={r} n={n} z={z}: {e} > {bound}");
                if e > worst.0 {
                    worst = (e, z);
                }
            }
            assert!((worst.1 - r).norm() < 1e-9, "r={r} n={n}: max at {}", worst.1);
        }
    }
}

#[test]
fn first_row_of_worked_generator_dominates() {
    let spec = analyze_spectrum(&corpus::worked_example(), &tol()).unwrap();
    let g = build_generator(&spec).unwrap().generator();
    let (l1, n1) = (spec.lambda1(), spec.n1() as i32);
    let e40 = matrix_exp(&(&g * 40.0));
    let e50 = matrix_exp(&(&g * 50.0));
    for j in 0..g.ncols() {
        for i in 1..g.nrows() {
            assert!(e40[(i, j)] / e40[(0, j)] < 0.05, "({i},{j})");
        }
    }
    let scaled = |e: &DMatrix<f64>, x: f64, j: usize| e[(0, j)] / (x.powi(n1 - 1) * (-l1 * x).exp());
    for j in spec.n1()..g.ncols() {
        let (a, b) = (scaled(&e40, 40.0, j), scaled(&e50, 50.0, j));
        assert!((a / b - 1.0).abs() < 0.1, "column {j}: {a} vs {b}");
    }
}
