use bandmeso::cheb::{a_coefficients, cheb_u, cheb_u_all, cheb_u_matrices, gamma_truncated_all, nb_power_direct};
use bandmeso::ensemble::{sample, EnsembleSpec, Law};
use bandmeso::lattice::{
    build_general_profile, build_step_profile, s_spectrum, Damping, Density, LatticeSpec, Phase,
};
use bandmeso::linalg::{hermitian_eigen, hermitian_eigenvalues, CMat};
use bandmeso::stats::{log_log_fit, pairing_sum};
use bandmeso::testfn::TestFunction;
use bandmeso::Complex64;
use proptest::prelude::*;

fn lattice() -> impl Strategy<Value = LatticeSpec> {
    (1usize..=3)
        .prop_flat_map(|d| {
            let lmax = [0, 40, 12, 7][d];
            (Just(d), 4usize..=lmax)
        })
        .prop_flat_map(|(d, l)| (Just(d), Just(l), 1usize..=l / 2))
        .prop_map(|(d, l, w)| LatticeSpec::new(d, l, w).unwrap())
}

fn hermitian(n: usize, seed: u64) -> CMat {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut a = CMat::zeros(n);
    for i in 0..n {
        a.set(i, i, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
        for j in i + 1..n {
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            a.set(i, j, v);
            a.set(j, i, v.conj());
        }
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn periodic_norm_is_even(lat in lattice()) {
        for x in 0..lat.n() {
            prop_assert_eq!(lat.periodic_norm(x), lat.periodic_norm(lat.neg(x)));
            prop_assert_eq!(lat.add(lat.diff(x, 7 % lat.n()), 7 % lat.n()), x);
        }
    }

    #[test]
    fn profiles_are_translation_invariant(lat in lattice(), x in any::<usize>(), y in any::<usize>(), lambda in 0.0..=1.0f64) {
        let (x, y) = (x % lat.n(), y % lat.n());
        let s = build_step_profile(lat).unwrap();
        prop_assert_eq!(s.s(x, y), s.s(lat.diff(x, y), 0));
        prop_assert_eq!(s.s(x, y), s.s(y, x));
        let g = match build_general_profile(lat, &Density::Exponential, &Phase::ClippedSine, &Damping::Zero, lambda, 0.0) {
            Ok(g) => g,
            Err(_) => return Ok(()),
        };
        prop_assert!((g.t(x, y) - g.t(y, x).conj()).norm() < 1e-15);
        prop_assert!((g.t(x, y) - g.t(lat.diff(x, y), 0)).norm() < 1e-15);
    }

    #[test]
    fn parseval(lat in lattice()) {
        let p = build_step_profile(lat).unwrap();
        let spec = s_spectrum(&p);
        let lhs: f64 = spec.iter().map(|v| v * v).sum();
        let rhs = lat.n() as f64 * p.row().iter().map(|v| v * v).sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        let i = p.row_sum();
        prop_assert!(spec.iter().all(|v| v.abs() <= i * (1.0 + 1e-12)));
    }

    #[test]
    fn unimodular_samples_are_exact(l in 6usize..24, w in 1usize..3, seed in any::<u64>(), index in 0u64..1000, real in any::<bool>()) {
        let p = build_step_profile(LatticeSpec::new(1, l, w).unwrap()).unwrap();
        let law = if real { Law::UnimodularReal } else { Law::UnimodularComplex };
        let spec = EnsembleSpec::new(p.clone(), law, seed);
        let m = sample(&spec, index);
        prop_assert_eq!(m.h.hermiticity_residual(), 0.0);
        for x in 0..l {
            for y in 0..l {
                prop_assert!((m.h.get(x, y).norm_sqr() - p.s(x, y)).abs() <= 1e-15 * p.s(x, y).max(1e-300));
            }
        }
        prop_assert_eq!(sample(&spec, index).h.max_abs_diff(&m.h), 0.0);
    }

    #[test]
    fn chebyshev_identity(l in 8usize..14, w in 1usize..=3, seed in any::<u64>(), real in any::<bool>()) {
        let p = build_step_profile(LatticeSpec::new(1, l, w).unwrap()).unwrap();
        let r = 1.0 / (p.m - 1.0);
        let law = if real { Law::UnimodularReal } else { Law::UnimodularComplex };
        let h = sample(&EnsembleSpec::new(p, law, seed), 0).h;
        let u = cheb_u_matrices(7, &h.scale(Complex64::new(0.5, 0.0)));
        for n in 0..=7 {
            let nb = nb_power_direct(&h, n).unwrap();
            prop_assert!(nb.hermiticity_residual() < 1e-12);
            let want = if n >= 2 { u[n].sub(&u[n - 2].scale(Complex64::new(r, 0.0))) } else { u[n].clone() };
            prop_assert!(nb.max_abs_diff(&want) < 1e-9);
        }
    }

    #[test]
    fn chebyshev_recurrence_matches_trigonometric_form(x in -0.999..0.999f64, n in 0usize..40) {
        let th = x.acos();
        let want = ((n as f64 + 1.0) * th).sin() / th.sin();
        prop_assert!((cheb_u(n, x) - want).abs() < 1e-12 * (n as f64 + 1.0).powi(2));
        prop_assert_eq!(cheb_u_all(n, x)[n], cheb_u(n, x));
    }

    #[test]
    fn coefficient_completeness(m in 10.0..500.0f64, t in 0.0..20.0f64) {
        let a = a_coefficients(t, t as usize + 80, 1.0 / (m - 1.0));
        let total: f64 = a.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((total - 1.0).abs() <= 5.0 / m);
    }

    #[test]
    fn gamma_tilde_is_linear_in_phi(e in -0.8..0.8f64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let (c, g) = (TestFunction::Cauchy, TestFunction::Gaussian);
        let mix = TestFunction::Combination { parts: vec![(a, c.clone()), (b, g.clone())] };
        let (eta, t_end, r) = (0.4, 80.0, 1.0 / 29.0);
        let lhs = gamma_truncated_all(6, e, &mix, eta, t_end, r).unwrap();
        let gc = gamma_truncated_all(6, e, &c, eta, t_end, r).unwrap();
        let gg = gamma_truncated_all(6, e, &g, eta, t_end, r).unwrap();
        for n in 0..=6 {
            prop_assert!((lhs[n] - (gc[n] * a + gg[n] * b)).norm() < 1e-8);
        }
    }

    #[test]
    fn hermitian_eigen_solver(n in 1usize..14, seed in any::<u64>()) {
        let a = hermitian(n, seed);
        let ev = hermitian_eigenvalues(&a).unwrap();
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        let tr: f64 = ev.iter().sum();
        prop_assert!((tr - a.trace().re).abs() < 1e-10);
        let frob: f64 = a.as_slice().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((ev.iter().map(|v| v * v).sum::<f64>() - frob).abs() < 1e-10 * frob.max(1.0));
        let (vals, vecs) = hermitian_eigen(&a).unwrap();
        for (k, &lam) in vals.iter().enumerate() {
            let v: Vec<Complex64> = (0..n).map(|i| vecs.get(i, k)).collect();
            let av = a.mat_vec(&v);
            let res: f64 = av.iter().zip(&v).map(|(x, y)| (x - y * lam).norm()).fold(0.0, f64::max);
            prop_assert!(res < 1e-10);
        }
    }

    #[test]
    fn pairing_sum_is_permutation_invariant(vals in proptest::collection::vec(-1.0..1.0f64, 21), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let mut pair = vec![vec![0.0; 6]; 6];
        let mut it = vals.iter();
        for i in 0..6 {
            for j in i..6 {
                let v = *it.next().unwrap();
                pair[i][j] = v;
                pair[j][i] = v;
            }
        }
        let id: Vec<usize> = (0..6).collect();
        prop_assert!((pairing_sum(&pair, &id) - pairing_sum(&pair, &perm)).abs() < 1e-12);
    }

    #[test]
    fn slope_of_exact_power_law(slope in -3.0..3.0f64, scale in 0.01..100.0f64) {
        let x = [0.05, 0.1, 0.2, 0.4, 0.8];
        let y: Vec<f64> = x.iter().map(|v: &f64| scale * v.powf(slope)).collect();
        let f = log_log_fit(&x, &y, None).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-9);
        prop_assert!((f.intercept - scale.ln()).abs() < 1e-9);
    }
}
