use proptest::prelude::*;

use qf3delta::arith::{factorize, gcd, gcd_i, iota, is_prime, jacobi, QuarticRootOfUnity};
use qf3delta::characters::enumerate_characters;
use qf3delta::counter::{count, CountOptions, Weight};
use qf3delta::delta::{BumpWeight, DeltaKernel};
use qf3delta::densities::{count_mod_prime_power, mod_p_count, sigma_p};
use qf3delta::expsums::shat::{s_hat, s_hat_gauss};
use qf3delta::forms::{new_form, new_problem, CountingProblem, TernaryForm, Vec3};
use qf3delta::predictor::fit_b_log_b;

fn form() -> impl Strategy<Value = TernaryForm> {
    (prop::array::uniform3(-4i64..=4), prop::array::uniform3(-2i64..=2))
        .prop_filter_map("indefinite nondegenerate", |(d, o)| new_form([d[0], d[1], d[2], 2 * o[0], 2 * o[1], 2 * o[2]]).ok())
}

fn problem() -> impl Strategy<Value = CountingProblem> {
    (form(), 1u64..=4, prop::array::uniform3(0i64..4), -8i64..=8).prop_filter_map("m nonzero", |(f, l, g, k)| {
        let gamma: Vec3 = g.map(|x| x % l as i64);
        let m = f.eval(&gamma) + l as i64 * k;
        (m != 0).then(|| new_problem(f, m, l, gamma, 0.5).ok()).flatten()
    })
}

fn small_c() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-6i64..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factorization_reconstructs(n in 1u64..1_000_000_000) {
        let f = factorize(n).unwrap();
        prop_assert_eq!(f.value(), n);
        prop_assert!(f.pairs().windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(f.pairs().iter().all(|&(p, e)| e >= 1 && is_prime(p)));
    }

    #[test]
    fn iota_by_residue(k in 0u64..10_000) {
        let q = 2 * k + 1;
        let want = if q % 4 == 1 { QuarticRootOfUnity::One } else { QuarticRootOfUnity::I };
        prop_assert_eq!(iota(q).unwrap(), want);
    }

    #[test]
    fn adjoint_inverts(f in form()) {
        let (a, adj) = (f.half_hessian(), f.adjoint());
        for i in 0..3 {
            for j in 0..3 {
                let s: i64 = (0..3).map(|k| a[i][k] * adj[k][j]).sum();
                prop_assert_eq!(s, if i == j { f.discriminant() } else { 0 });
            }
        }
    }

    #[test]
    fn problem_invariants(p in problem()) {
        prop_assert_eq!((p.form.eval(&p.lambda) - p.m) % p.l as i64, 0);
        prop_assert!(p.omega >= 2);
        if p.square_case {
            prop_assert_eq!((p.d0 * p.d0) as i64, -p.m * p.form.discriminant());
        }
    }

    #[test]
    fn characters_are_multiplicative(q in 1u64..60, a in 0i64..200, b in 0i64..200) {
        for chi in enumerate_characters(q).unwrap() {
            let coprime = |n: i64| gcd_i(n, q as i64) == 1;
            prop_assert_eq!(chi.evaluate(a).norm() == 0.0, !coprime(a));
            if coprime(a) && coprime(b) {
                prop_assert!((chi.evaluate(a * b) - chi.evaluate(a) * chi.evaluate(b)).norm() < 1e-12);
            }
            let f = chi.conductor();
            prop_assert_eq!(q % f, 0);
            prop_assert_eq!(chi.is_principal(), f == 1);
            prop_assert_eq!(&chi.primitive_part().unwrap().induce(q).unwrap(), &chi);
        }
    }

    #[test]
    fn s_hat_within_trivial_bound(p in problem(), q in 1u64..=12, c in small_c()) {
        let n = (q * p.l) as f64;
        let g = s_hat_gauss(&p, q, &c).value;
        prop_assert!(g.norm() <= n.powi(3) * (1.0 + 1e-12));
        if q * p.l <= 24 {
            let b = s_hat(&p, q, &c).unwrap().value;
            prop_assert!((g - b).norm() <= 1e-9 * n.powi(3));
        }
    }

    #[test]
    fn mod_p_count_matches_character_formula(f in form(), m in -30i64..=30, p in 3u64..60) {
        prop_assume!(m != 0 && is_prime(p));
        prop_assume!(gcd(p, 2 * m.unsigned_abs() * f.discriminant().unsigned_abs()) == 1);
        let chi = jacobi(-m * f.discriminant(), p).unwrap() as i64;
        prop_assert_eq!(mod_p_count(&f, m, p) as i64, (p * p) as i64 + chi * p as i64);
    }

    #[test]
    fn local_density_is_normalized_count(p in problem(), idx in 0usize..3) {
        let prime = [2u64, 3, 5][idx];
        let d = sigma_p(&p, prime).unwrap();
        prop_assert!(d.value >= 0.into());
        let scale = (prime as i128).pow(2 * d.level);
        prop_assert_eq!(scale % d.value.denom(), 0);
        if prime.pow(d.level) <= 256 {
            let n = count_mod_prime_power(&p, prime, d.level).unwrap() as i128;
            prop_assert_eq!(d.value * scale, n.into());
        }
    }

    #[test]
    fn kernel_vanishes_beyond_two(q in 2.0f64..40.0, x in 2.0f64..10.0, y in -1.0f64..=1.0) {
        let k = DeltaKernel::new(q).unwrap();
        prop_assert!(k.h(x + 1e-9, y) == 0.0);
    }

    #[test]
    fn fit_recovers_exact_coefficients(alpha in -5.0f64..5.0, beta in -5.0f64..5.0, b0 in 10u64..1000) {
        let bs: Vec<f64> = (0..6).map(|k| (b0 << k) as f64).collect();
        let ys: Vec<f64> = bs.iter().map(|b| alpha * b * b.ln() + beta * b).collect();
        let (a, b) = fit_b_log_b(&bs, &ys).unwrap();
        let scale = alpha.abs() + beta.abs() + 1.0;
        prop_assert!((a - alpha).abs() < 1e-9 * scale && (b - beta).abs() < 1e-9 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sharp_count_on_box_weight(p in problem(), b in 2u64..40) {
        let r = count(&p, b, &Weight::SharpBox, &CountOptions::default()).unwrap();
        prop_assert_eq!(r.weighted_count, r.sharp_count as f64);
    }

    #[test]
    fn weighted_count_is_linear_and_deterministic(amp in 0.0f64..4.0, b in 50u64..400) {
        let p = new_problem(new_form([1, 1, -1, 0, 0, 0]).unwrap(), 1, 1, [0, 0, 0], 0.5).unwrap();
        let w = BumpWeight::new([0.6, 0.8, 1.0], 0.25, amp).unwrap();
        let opts = CountOptions { workers: 2, sample: 0 };
        let one = count(&p, b, &Weight::Bump(w), &opts).unwrap().weighted_count;
        let again = count(&p, b, &Weight::Bump(w), &opts).unwrap().weighted_count;
        let two = count(&p, b, &Weight::Bump(w.scaled(2.0)), &opts).unwrap().weighted_count;
        prop_assert!(one >= 0.0);
        prop_assert_eq!(one.to_bits(), again.to_bits());
        prop_assert!((two - 2.0 * one).abs() <= 1e-12 * one.max(1.0));
    }
}
