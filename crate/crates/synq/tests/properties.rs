//! Property suites: structural invariants of the exponents, the root
//! solver, the transforms and the simulators, on randomized models.

use proptest::prelude::*;

use synq::model::{
    validate, JumpComponent, JumpLaw, LevyModel, Marginal, ValidatedModel,
};
use synq::psi::{psi, psi_value, PsiQuery};
use synq::sim::{simulate, simulate_path, SimConfig};
use synq::steady_state::{
    decomposition, f, lst_2d_closed, lst_w, mean_w_by_differencing, moments_w, TransformSpace,
};
use synq::test_models::{m1, m2, m3};

fn arb_marginal() -> impl Strategy<Value = Marginal> {
    prop_oneof![
        Just(Marginal::Zero),
        (0.1f64..2.0).prop_map(|value| Marginal::Deterministic { value }),
        (0.5f64..8.0).prop_map(|rate| Marginal::Exponential { rate }),
        ((1u32..4), (0.5f64..8.0)).prop_map(|(shape, rate)| Marginal::Erlang { shape, rate }),
    ]
}

fn arb_law(n: usize) -> impl Strategy<Value = JumpLaw> {
    prop_oneof![
        prop::collection::vec(0.0f64..1.5, n).prop_filter_map("nonzero", |mut values| {
            if values.iter().all(|v| *v == 0.0) {
                values[0] = 0.5;
            }
            Some(JumpLaw::Deterministic { values })
        }),
        prop::collection::vec(arb_marginal(), n).prop_filter_map("nonzero", |marginals| {
            let any = marginals.iter().any(|m| !matches!(m, Marginal::Zero));
            any.then_some(JumpLaw::Independent { marginals })
        }),
        (prop::collection::vec(0.0f64..1.5, n), 0.5f64..8.0).prop_filter_map(
            "nonzero",
            |(mut weights, rate)| {
                if weights.iter().all(|w| *w == 0.0) {
                    weights[0] = 1.0;
                }
                Some(JumpLaw::Comonotone { weights, rate })
            }
        ),
    ]
}

/// A random valid, stable model: a coverage component keeps every
/// subordinator coordinate nonzero, and the first drift is lowered until
/// E Y_n(1) <= -0.1.
fn arb_model(n: usize, allow_sigma: bool) -> impl Strategy<Value = ValidatedModel> {
    let comps = prop::collection::vec((0.2f64..2.0, arb_law(n)), 1..3);
    let drift_tail = prop::collection::vec(0.0f64..0.4, n - 1);
    let sigma = if allow_sigma {
        prop_oneof![Just(0.0f64), 0.2f64..1.0].boxed()
    } else {
        Just(0.0f64).boxed()
    };
    (comps, drift_tail, sigma, 0.3f64..2.0).prop_map(move |(comps, tail, sigma, c1mag)| {
        let mut components: Vec<JumpComponent> = comps
            .into_iter()
            .map(|(rate, law)| JumpComponent { rate, law })
            .collect();
        let coverage = JumpLaw::Independent {
            marginals: (0..n)
                .map(|i| {
                    if i == 0 {
                        Marginal::Zero
                    } else {
                        Marginal::Exponential {
                            rate: 2.0 + i as f64,
                        }
                    }
                })
                .collect(),
        };
        components.push(JumpComponent {
            rate: 0.5,
            law: coverage,
        });
        let mut drift = Vec::with_capacity(n);
        drift.push(-c1mag);
        drift.extend(tail);
        let mut model = LevyModel {
            n,
            drift,
            sigma,
            components,
        };
        // Stabilize with a real margin: near-critical models have huge
        // stationary workloads and are exercised separately.
        let total_jump_mean: f64 = model
            .components
            .iter()
            .map(|c| c.rate * (0..n).map(|i| c.law.mean(i)).sum::<f64>())
            .sum();
        let ey_n = model.drift.iter().sum::<f64>() + total_jump_mean;
        let margin = 0.25 * (total_jump_mean + 0.5);
        if ey_n > -margin {
            model.drift[0] -= ey_n + margin;
        }
        validate(model).expect("constructed to be valid")
    })
}

// Laws need mean() visible for the stabilization above.
trait LawMean {
    fn mean(&self, i: usize) -> f64;
}
impl LawMean for JumpLaw {
    fn mean(&self, i: usize) -> f64 {
        match self {
            JumpLaw::Deterministic { values } => values[i],
            JumpLaw::Independent { marginals } => match &marginals[i] {
                Marginal::Zero => 0.0,
                Marginal::Deterministic { value } => *value,
                Marginal::Exponential { rate } => 1.0 / rate,
                Marginal::Erlang { shape, rate } => f64::from(*shape) / rate,
            },
            JumpLaw::Comonotone { weights, rate } => weights[i] / rate,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phi_is_exactly_zero_at_origin(model in arb_model(3, true)) {
        let v = vec![0.0; model.n()];
        prop_assert_eq!(model.phi(&v).unwrap().to_bits(), 0f64.to_bits());
    }

    #[test]
    fn phi_is_convex_along_the_diagonal(model in arb_model(3, true)) {
        // Nonnegative second differences, step 1e-3, tolerance 1e-8.
        let h = 1e-3;
        for tail in [[0.0, 0.0], [0.5, 0.0], [1.0, 2.0]] {
            for i in 0..30 {
                let b = 0.2 * i as f64;
                let g = |x: f64| model.phi(&[x, x + tail[0], x + tail[1]]).unwrap();
                let second = g(b + 2.0 * h) - 2.0 * g(b + h) + g(b);
                prop_assert!(second >= -1e-8, "b={b}, second={second}");
            }
        }
    }

    #[test]
    fn phi_slopes_at_zero_match_means(model in arb_model(3, true)) {
        // One-sided second-order differences (the domain has no negative
        // side), step 1e-5, tolerance 1e-6 on -dphi/dv_i(0) = E X_i(1).
        let h = 1e-5;
        let n = model.n();
        for i in 0..n {
            let mut v1 = vec![0.0; n];
            let mut v2 = vec![0.0; n];
            v1[i] = h;
            v2[i] = 2.0 * h;
            let slope = (4.0 * model.phi(&v1).unwrap() - model.phi(&v2).unwrap()) / (2.0 * h);
            prop_assert!(
                (-slope - model.mean_x()[i]).abs() < 1e-6,
                "coordinate {i}: fd {} vs mean {}",
                -slope,
                model.mean_x()[i]
            );
        }
    }

    #[test]
    fn eta_is_minus_phi_with_leading_zero(model in arb_model(3, true)) {
        for tail in [[0.0, 0.0], [0.3, 1.7], [4.0, 0.2]] {
            let eta = model.eta(&tail).unwrap();
            let phi = model.phi(&[0.0, tail[0], tail[1]]).unwrap();
            prop_assert_eq!(eta.to_bits(), (-phi).to_bits());
            prop_assert!(eta >= 0.0);
        }
    }

    #[test]
    fn phi_tilde_is_phi_at_reverse_cumsums(model in arb_model(3, true)) {
        for alpha in [[0.5, -0.2, 1.0], [1.0, 1.0, 1.0], [-0.5, 0.5, 0.5]] {
            let lhs = model.phi_tilde(&alpha).unwrap();
            let rc = [alpha[0] + alpha[1] + alpha[2], alpha[1] + alpha[2], alpha[2]];
            let rhs = model.phi(&rc).unwrap();
            prop_assert_eq!(lhs.to_bits(), rhs.to_bits());
        }
    }

    #[test]
    fn psi_root_and_uniqueness(model in arb_model(3, false)) {
        for tail in [[0.5f64, 0.0], [0.0, 2.0], [1.0, 1.0], [3.0, 0.7]] {
            let r = psi(&model, &PsiQuery::new(1, tail.to_vec())).unwrap();
            prop_assert!(r.residual.abs() <= 1e-12);
            prop_assert!(r.beta > 0.0);
            let g = |b: f64| model.phi(&[b, tail[0], tail[1]]).unwrap();
            prop_assert!(g(r.beta / 2.0) < 0.0, "beta={}", r.beta);
            prop_assert!(g(2.0 * r.beta) > 0.0);
        }
    }

    #[test]
    fn psi_is_monotone_in_the_tail(model in arb_model(3, false)) {
        let grid = [0.0, 0.5, 1.5, 4.0];
        for k in 1..=2usize {
            let mut prev = -1.0;
            for a in grid {
                let tail: Vec<f64> = if k == 1 { vec![a, 1.0] } else { vec![a] };
                let v = psi_value(&model, k, &tail).unwrap();
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn psi1_fd_first_derivative_matches_closed_form(model in arb_model(2, false)) {
        let h = 1e-4;
        let p1 = psi_value(&model, 1, &[h]).unwrap();
        let p2 = psi_value(&model, 1, &[2.0 * h]).unwrap();
        let fd = (4.0 * p1 - p2) / (2.0 * h);
        let closed = -model.mean_x()[1] / model.mean_x()[0];
        prop_assert!((fd - closed).abs() < 1e-6, "fd {fd} vs {closed}");
    }

    #[test]
    fn lst_w_bounds_and_monotonicity(model in arb_model(2, false)) {
        let grid = [0.0, 0.25, 0.75, 1.5, 3.0, 5.0];
        for &a1 in &grid {
            let mut prev = f64::INFINITY;
            for &a2 in &grid {
                let v = lst_w(&model, &[a1, a2]).unwrap();
                prop_assert!(v > 0.0 && v <= 1.0, "lst_w({a1},{a2}) = {v}");
                prop_assert!(v <= prev + 1e-12, "not nonincreasing in a2");
                prev = v;
            }
        }
        for &a2 in &grid {
            let mut prev = f64::INFINITY;
            for &a1 in &grid {
                let v = lst_w(&model, &[a1, a2]).unwrap();
                prop_assert!(v <= prev + 1e-12, "not nonincreasing in a1");
                prev = v;
            }
        }
    }

    #[test]
    fn lst_w_alternating_differences(model in arb_model(2, false)) {
        // First four forward differences of a completely monotone function
        // alternate in sign: step 0.25 along each axis.
        let h = 0.25;
        for i in 0..2usize {
            for base in [0.0, 0.5, 1.25] {
                let g = |x: f64| {
                    let mut a = [0.0, 0.0];
                    a[i] = x;
                    lst_w(&model, &a).unwrap()
                };
                let mut vals: Vec<f64> = (0..5).map(|j| g(base + h * j as f64)).collect();
                for order in 1..=4usize {
                    for j in 0..vals.len() - 1 {
                        vals[j] = vals[j + 1] - vals[j];
                    }
                    vals.pop();
                    let sign = if order % 2 == 1 { -1.0 } else { 1.0 };
                    for v in &vals {
                        prop_assert!(sign * v >= -1e-10, "order {order}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn f_scaled_values_are_transforms(model in arb_model(3, false)) {
        // f_k / (-E Y_k(1)) is a joint transform: in (0, 1] and
        // nonincreasing in each tail coordinate on nonnegative tails.
        let ey = model.mean_y();
        let grid = [0.0, 0.5, 1.5, 4.0];
        for k in 1..=2usize {
            for &a in &grid {
                let mut prev = f64::INFINITY;
                for &b in &grid {
                    let tail: Vec<f64> = if k == 1 { vec![a, b] } else { vec![b] };
                    let scaled = f(&model, k, &tail).unwrap().value / (-ey[k - 1]);
                    prop_assert!(scaled > 0.0 && scaled <= 1.0 + 1e-12, "scaled {scaled}");
                    prop_assert!(scaled <= prev + 1e-12);
                    prev = scaled;
                }
            }
        }
    }

    #[test]
    fn recursion_agrees_with_closed_form(model in arb_model(2, false)) {
        for a1 in [0.0, 0.7, 2.5] {
            for a2 in [0.0, 1.1, 4.0] {
                let rec = lst_w(&model, &[a1, a2]).unwrap();
                let closed = lst_2d_closed(&model, a1, a2, TransformSpace::W).unwrap();
                prop_assert!((rec - closed).abs() < 1e-9, "({a1},{a2}): {rec} vs {closed}");
            }
        }
    }

    #[test]
    fn factor_product_matches_transform(model in arb_model(3, false)) {
        for alpha in [[0.5, 0.5, 0.5], [2.0, 1.0, 0.0], [0.0, 1.5, 3.0]] {
            let d = decomposition(&model, &alpha).unwrap();
            let w = lst_w(&model, &alpha).unwrap();
            prop_assert!((d.product - w).abs() < 1e-6, "{alpha:?}: {} vs {w}", d.product);
            for &fac in &d.factors {
                prop_assert!(fac > 0.0 && fac <= 1.0 + 1e-9, "factor {fac}");
            }
        }
    }

    #[test]
    fn transform_slopes_match_closed_moments(model in arb_model(2, false)) {
        // Tolerance scales with the mean: the finite-difference truncation
        // grows with the workload's higher moments.
        let closed = moments_w(&model).unwrap();
        let fd = mean_w_by_differencing(&model).unwrap();
        let tol1 = 1e-4 * closed.mean_w1.abs().max(1.0);
        let tol2 = 1e-4 * closed.mean_w2.abs().max(1.0);
        prop_assert!((fd[0] - closed.mean_w1).abs() < tol1, "{} vs {}", fd[0], closed.mean_w1);
        prop_assert!((fd[1] - closed.mean_w2).abs() < tol2, "{} vs {}", fd[1], closed.mean_w2);
    }

    #[test]
    fn simulated_paths_stay_ordered(model in arb_model(3, false), seed in 0u64..1000) {
        let cfg = SimConfig::new(50.0, 4, seed);
        let est = simulate(&model, &cfg).unwrap();
        prop_assert_eq!(est.ordering_violations, 0);
        prop_assert!(est.min_w >= 0.0);
    }
}

#[test]
fn local_time_grows_only_at_the_boundary() {
    // Event-driven paths: Z = Y + L everywhere, and between consecutive
    // records L_i increased only if the coordinate finished the segment at
    // zero (records are written both before and after each jump).
    let model = m1();
    let cfg = SimConfig::new(200.0, 1, 3);
    let path = simulate_path(&model, &cfg, 0).unwrap();
    assert!(path.states.len() > 100);
    for s in &path.states {
        for i in 0..2 {
            assert!(
                (s.z[i] - (s.y[i] + s.local_time[i])).abs() < 1e-9,
                "Z = Y + L violated at t = {}",
                s.t
            );
        }
    }
    for pair in path.states.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for i in 0..2 {
            if b.local_time[i] > a.local_time[i] {
                assert!(b.t > a.t, "local time must not grow inside a jump");
                assert_eq!(b.z[i], 0.0, "L_{i} grew while Z_{i} > 0 at t = {}", b.t);
            }
        }
    }
}

#[test]
fn three_queue_model_recursion_is_internally_consistent() {
    // Setting a head coordinate to zero in Z-space must reproduce the
    // marginal recursion of the remaining coordinates.
    let model = m2();
    let full = synq::steady_state::lst_z(&model, &[0.0, 0.5, 1.0]).unwrap();
    // Z_2, Z_3 of the 3-queue system have the law of the 2-queue system
    // driven by (X_1 + X_2, X_3); check against that reduced model.
    let reduced = validate(LevyModel {
        n: 2,
        drift: vec![-1.0, 0.0],
        sigma: 0.0,
        components: vec![
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![Marginal::Exponential { rate: 4.0 }, Marginal::Zero],
                },
            },
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![Marginal::Exponential { rate: 2.0 }, Marginal::Zero],
                },
            },
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![Marginal::Zero, Marginal::Exponential { rate: 8.0 }],
                },
            },
        ],
    })
    .unwrap();
    let red = synq::steady_state::lst_z(&reduced, &[0.5, 1.0]).unwrap();
    assert!(
        (full - red).abs() < 1e-10,
        "3-queue marginal {full} vs reduced model {red}"
    );
}

#[test]
fn m3_dependence_changes_the_transform() {
    // The comonotone model shares means with an independent counterpart but
    // the joint transform must differ (the covariance term is real).
    let dep = m3();
    let indep = validate(LevyModel {
        n: 2,
        drift: vec![-1.0, 0.0],
        sigma: 0.0,
        components: vec![
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![Marginal::Exponential { rate: 4.0 }, Marginal::Zero],
                },
            },
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![Marginal::Zero, Marginal::Exponential { rate: 8.0 }],
                },
            },
        ],
    })
    .unwrap();
    assert_eq!(dep.mean_x(), indep.mean_x());
    let a = lst_w(&dep, &[1.0, 2.0]).unwrap();
    let b = lst_w(&indep, &[1.0, 2.0]).unwrap();
    assert!((a - b).abs() > 1e-3, "dependence must matter: {a} vs {b}");
    // Positive covariance raises E W_2* (17/120 against 1/24 here): big
    // second-station jumps arrive exactly when the first station gets busy.
    let wa = moments_w(&dep).unwrap();
    let wb = moments_w(&indep).unwrap();
    assert!((wa.mean_w2 - 17.0 / 120.0).abs() < 1e-12);
    assert!((wb.mean_w2 - 1.0 / 24.0).abs() < 1e-12);
    assert!(wa.mean_w2 > wb.mean_w2);
}
