use brnn::checkpoint;
use brnn::loss::{total_cost, LossWeights, StateLossKind};
use brnn::model::{apply_nonlinearity, forward, BrnnParams, Nonlinearity, Sequence};
use brnn::rng::SplitMix64;
use brnn::stability::{lyapunov_region, make_stable_a, spectral_norm, StableScheme};
use brnn::tasks::{read_csv_from, write_csv_to};
use brnn::trainer::Aggregation;
use brnn::{DMatrix, DVector};
use proptest::prelude::*;

fn random_params(seed: u64, n: usize, m: usize, r: usize, sigma: Nonlinearity) -> BrnnParams {
    let mut rng = SplitMix64::new(seed);
    let mut p = BrnnParams::zeros(n, m, r, sigma);
    p.a = DMatrix::from_fn(n, n, |_, _| rng.symmetric(0.4 / n as f64));
    for g in p.trainable_mut() {
        for v in g.iter_mut() {
            *v = rng.symmetric(0.5);
        }
    }
    p
}

fn random_seq(seed: u64, m: usize, r: usize, steps: usize, amp: f64) -> Sequence {
    let mut rng = SplitMix64::new(seed);
    let s = (0..steps)
        .map(|_| DVector::from_fn(m, |_, _| rng.symmetric(amp)))
        .collect();
    let d = (0..steps)
        .map(|_| DVector::from_fn(r, |_, _| rng.symmetric(amp)))
        .collect();
    Sequence::new(s, d).unwrap()
}

fn sigma_strategy() -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![
        Just(Nonlinearity::Tanh),
        Just(Nonlinearity::Logistic),
        Just(Nonlinearity::Relu),
        Just(Nonlinearity::Identity),
    ]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_satisfies_model_equations(
        seed in any::<u64>(),
        n in 1usize..6, m in 1usize..4, r in 1usize..3, steps in 2usize..20,
        sigma in sigma_strategy(),
    ) {
        let p = random_params(seed, n, m, r, sigma);
        let seq = random_seq(seed ^ 1, m, r, steps, 1.0);
        let x0 = DVector::from_element(n, 0.1);
        let t = forward(&p, &seq, &x0).unwrap();
        prop_assert_eq!(&t.x[0], &x0);
        for k in 0..steps {
            prop_assert_eq!(&t.h[k], &apply_nonlinearity(sigma, &t.x[k]));
            let y = &p.v * &t.h[k] + &p.dft * &seq.s[k] + &p.c;
            prop_assert_eq!(&t.y[k], &y);
            prop_assert_eq!(&t.e[k], &(&y - &seq.d[k]));
            if k + 1 < steps {
                let next = &p.a * &t.x[k] + &p.u * &t.h[k] + &p.w * &seq.s[k] + &p.b;
                prop_assert_eq!(&t.x[k + 1], &next);
            }
        }
    }

    #[test]
    fn identity_network_is_linear_in_state_and_input(
        seed in any::<u64>(), n in 1usize..5, m in 1usize..3, steps in 2usize..12,
        alpha in -2.0f64..2.0,
    ) {
        let mut p = random_params(seed, n, m, 1, Nonlinearity::Identity);
        p.b.fill(0.0);
        p.c.fill(0.0);
        let one = random_seq(seed ^ 2, m, 1, steps, 1.0);
        let two = random_seq(seed ^ 3, m, 1, steps, 1.0);
        let x1 = DVector::from_element(n, 0.3);
        let x2 = DVector::from_fn(n, |i, _| i as f64 * 0.1 - 0.2);
        let mixed = Sequence::new(
            one.s.iter().zip(&two.s).map(|(a, b)| a * alpha + b).collect(),
            one.d.clone(),
        ).unwrap();
        let t1 = forward(&p, &one, &x1).unwrap();
        let t2 = forward(&p, &two, &x2).unwrap();
        let tm = forward(&p, &mixed, &(&x1 * alpha + &x2)).unwrap();
        for k in 0..steps {
            let want = &t1.y[k] * alpha + &t2.y[k];
            prop_assert!((&tm.y[k] - &want).norm() <= 1e-10 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn cost_is_nonnegative_and_sums_its_parts(
        seed in any::<u64>(), n in 1usize..5, steps in 2usize..12,
        sigma in sigma_strategy(),
        beta in 0.0f64..1.0, gamma1 in 0.0f64..1.0, gamma2 in 0.0f64..1.0,
        kind in prop_oneof![
            Just(StateLossKind::L1), Just(StateLossKind::TanhApprox), Just(StateLossKind::None)
        ],
    ) {
        let p = random_params(seed, n, 2, 2, sigma);
        let seq = random_seq(seed ^ 4, 2, 2, steps, 1.0);
        let w = LossWeights { beta, beta0: beta / 2.0, gamma1, gamma2, state_loss_kind: kind, alpha_ent: 2.0 };
        let t = forward(&p, &seq, &DVector::zeros(n)).unwrap();
        let c = total_cost(&t, &seq, &p, &w).unwrap();
        let parts = [c.phi_n, c.output_sum, c.state_sum, c.hidden_sum, c.reg_theta, c.reg_nu];
        prop_assert!(parts.iter().all(|v| *v >= 0.0));
        prop_assert!(close(c.total, parts.iter().sum(), 1e-12));
    }

    #[test]
    fn output_cost_is_quadratically_homogeneous(
        seed in any::<u64>(), n in 1usize..5, steps in 2usize..12, scale in 0.1f64..10.0,
    ) {
        // identity σ, no biases: scaling x0, s and d by t scales every error by t
        let mut p = random_params(seed, n, 2, 1, Nonlinearity::Identity);
        p.b.fill(0.0);
        p.c.fill(0.0);
        let seq = random_seq(seed ^ 5, 2, 1, steps, 1.0);
        let scaled = Sequence::new(
            seq.s.iter().map(|v| v * scale).collect(),
            seq.d.iter().map(|v| v * scale).collect(),
        ).unwrap();
        let x0 = DVector::from_element(n, 0.2);
        let w = LossWeights::default();
        let base = total_cost(&forward(&p, &seq, &x0).unwrap(), &seq, &p, &w).unwrap().total;
        let big = total_cost(&forward(&p, &scaled, &(&x0 * scale)).unwrap(), &scaled, &p, &w)
            .unwrap()
            .total;
        prop_assert!(close(big, scale * scale * base, 1e-10));
    }

    #[test]
    fn aggregation_picks_sensible_values(values in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let sum: f64 = values.iter().sum();
        prop_assert_eq!(Aggregation::Sum.reduce(&mut values.clone()), sum);
        let mean = Aggregation::Mean.reduce(&mut values.clone());
        prop_assert!(close(mean * values.len() as f64, sum, 1e-12));

        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let median = Aggregation::Median.reduce(&mut values.clone());
        prop_assert!(lo <= median && median <= hi);
        let below = values.iter().filter(|v| **v < median).count();
        let above = values.iter().filter(|v| **v > median).count();
        prop_assert!(below <= values.len() / 2 && above <= values.len() / 2);

        let min_abs = Aggregation::MinAbs.reduce(&mut values.clone());
        prop_assert!(values.contains(&min_abs));
        prop_assert!(values.iter().all(|v| v.abs() >= min_abs.abs()));
    }

    #[test]
    fn stable_a_respects_alpha(
        n in 1usize..10, alpha in 0.01f64..=1.0, seed in any::<u64>(),
        scheme in prop_oneof![
            Just(StableScheme::ScaledIdentity),
            Just(StableScheme::RandomDiagonal),
            Just(StableScheme::RandomOrthogonalScaled),
        ],
    ) {
        let a = make_stable_a(n, scheme, alpha, seed).unwrap();
        prop_assert!(spectral_norm(&a) <= alpha + 1e-12);
    }

    #[test]
    fn lyapunov_factor_solves_the_gram_equation(
        n in 1usize..=12, alpha in 0.05f64..0.99, seed in any::<u64>(),
    ) {
        let a = make_stable_a(n, StableScheme::RandomOrthogonalScaled, alpha, seed).unwrap();
        let region = lyapunov_region(&a, 1.0).unwrap();
        let residual = region.g.transpose() * &region.g - (DMatrix::identity(n, n) - a.transpose() * &a);
        prop_assert!(residual.norm() < 1e-10);
        prop_assert!((&region.g - region.g.transpose()).norm() < 1e-12);
    }

    #[test]
    fn worst_forcing_maximizes_the_offset(
        n in 1usize..8, alpha in 0.05f64..0.95, seed in any::<u64>(), m_sup in 0.1f64..5.0,
    ) {
        let a = make_stable_a(n, StableScheme::RandomOrthogonalScaled, alpha, seed).unwrap();
        let region = lyapunov_region(&a, m_sup).unwrap();
        prop_assert!(close(region.worst_forcing.norm(), m_sup, 1e-12));
        prop_assert!(close(region.offset_for(&region.worst_forcing), region.d_lyap, 1e-10));
        let mut rng = SplitMix64::new(seed ^ 0xF0);
        for _ in 0..20 {
            let v = DVector::from_fn(n, |_, _| rng.symmetric(1.0));
            let m = &v * (m_sup / v.norm().max(1e-12));
            prop_assert!(region.offset_for(&m) <= region.d_lyap * (1.0 + 1e-10));
        }
    }

    #[test]
    fn dataset_csv_round_trips(
        rows in prop::collection::vec(
            (prop::num::f64::NORMAL | prop::num::f64::ZERO, prop::num::f64::NORMAL, prop::num::f64::NORMAL),
            2..30,
        ),
    ) {
        let seq = Sequence::new(
            rows.iter().map(|(a, b, _)| DVector::from_vec(vec![*a, *b])).collect(),
            rows.iter().map(|(_, _, c)| DVector::from_vec(vec![*c])).collect(),
        ).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&seq, &mut buf).unwrap();
        prop_assert_eq!(read_csv_from(buf.as_slice()).unwrap(), seq);
    }

    #[test]
    fn checkpoint_round_trips(
        seed in any::<u64>(), n in 1usize..6, m in 1usize..4, r in 1usize..3,
        sigma in sigma_strategy(), extreme in prop::num::f64::NORMAL,
    ) {
        let mut p = random_params(seed, n, m, r, sigma);
        p.b[0] = extreme;
        prop_assert_eq!(checkpoint::from_str(&checkpoint::to_string(&p)).unwrap(), p);
    }
}
