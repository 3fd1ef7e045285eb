//! Invariant checks on grid-sampled and randomized inputs: ordering and
//! cooperativity of the bounding reactions, finite-difference agreement of
//! the analytic Jacobians, Perron-Frobenius identities, small-mutation
//! convergence of the minimal speed, and the invariant region of the
//! simulator.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use morphfront::equilibria::{
    equilibria_of_g, find_equilibria_of_f, perturbation_theta, SearchBox,
};
use morphfront::model::{
    check_conditions, cutoff_gamma, density_bounds, jacobian_f, jacobian_g, reaction_f,
    reaction_f_minus, reaction_f_plus, reaction_g,
};
use morphfront::pde::{heaviside_ic, simulate, Grid1D, SimConfig};
use morphfront::spectral::{
    classify_regime, dispersion, limit_summary, min_speed, mu_curve, pf_eigenpair, speed_limits,
};
use morphfront::{Density2, EquilibriumKind, Mat2, ModelParams, MutationScaling, Vec2};

/// Benchmark parameter set: establisher grows fast and moves slowly,
/// disperser the other way round, weak asymmetric mutation.
fn p1() -> ModelParams {
    ModelParams::new(0.3, 1.5, 1.1, 0.2, 1.0 / 1.2, 1.0, 0.8, 0.7, 0.001, 0.00025).unwrap()
}

/// Same rates with weak inter-morph competition, so the lower-bound
/// equilibrium construction applies.
fn p2() -> ModelParams {
    ModelParams::new(0.3, 1.5, 1.1, 0.2, 1.0, 1.0, 0.1, 0.1, 0.001, 0.00025).unwrap()
}

fn mutation(mu: f64) -> MutationScaling {
    MutationScaling::new(mu, 0.001, 0.00025).unwrap()
}

/// Central finite-difference Jacobian of `f` at `n` with step `h`.
fn fd_jacobian(f: impl Fn(Density2) -> Vec2, n: Density2, h: f64) -> Mat2 {
    let at = |n_e: f64, n_d: f64| f(Density2::new(n_e, n_d).unwrap());
    let col_e = (at(n.n_e + h, n.n_d) - at(n.n_e - h, n.n_d)).scale(1.0 / (2.0 * h));
    let col_d = (at(n.n_e, n.n_d + h) - at(n.n_e, n.n_d - h)).scale(1.0 / (2.0 * h));
    Mat2::new(col_e.x, col_d.x, col_e.y, col_d.y)
}

fn mat_diff(a: Mat2, b: Mat2) -> f64 {
    (a.a11 - b.a11)
        .abs()
        .max((a.a12 - b.a12).abs())
        .max((a.a21 - b.a21).abs())
        .max((a.a22 - b.a22).abs())
}

fn g_coexistence(p: &ModelParams) -> Density2 {
    equilibria_of_g(p)
        .unwrap()
        .into_iter()
        .find(|eq| eq.kind == EquilibriumKind::Coexistence)
        .unwrap()
        .point
}

#[test]
fn lower_and_upper_reactions_bracket_f() {
    for p in [p1(), p2()] {
        let (cap_e, cap_d) = density_bounds(&p);
        for i in 0..=100 {
            for j in 0..=100 {
                let n = Density2::new(cap_e * i as f64 / 100.0, cap_d * j as f64 / 100.0).unwrap();
                let lo = reaction_f_minus(&p, n).unwrap();
                let mid = reaction_f(&p, n);
                let hi = reaction_f_plus(&p, n);
                assert!(
                    lo.x <= mid.x && mid.x <= hi.x,
                    "first component out of order at {n:?}: {lo:?} {mid:?} {hi:?}"
                );
                assert!(
                    lo.y <= mid.y && mid.y <= hi.y,
                    "second component out of order at {n:?}: {lo:?} {mid:?} {hi:?}"
                );
            }
        }
    }
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a61636f);
    for p in [p1(), p2()] {
        let (cap_e, cap_d) = density_bounds(&p);
        let h = 1e-6 * cap_e.max(cap_d);
        for _ in 0..100 {
            let n = Density2::new(rng.gen::<f64>() * cap_e, rng.gen::<f64>() * cap_d).unwrap();
            let pairs = [
                (jacobian_f(&p, n), fd_jacobian(|m| reaction_f(&p, m), n, h)),
                (jacobian_g(&p, n), fd_jacobian(|m| reaction_g(&p, m), n, h)),
            ];
            for (analytic, fd) in pairs {
                let scale = analytic.norm_inf().max(1.0);
                assert!(
                    mat_diff(analytic, fd) <= 1e-6 * scale,
                    "Jacobian mismatch at {n:?}: {analytic:?} vs {fd:?}"
                );
            }
        }
    }
}

#[test]
fn bound_reactions_keep_cooperative_coupling() {
    for p in [p1(), p2()] {
        let (cap_e, cap_d) = density_bounds(&p);
        let h = 1e-6 * cap_e.max(cap_d);
        for i in 0..=20 {
            for j in 0..=20 {
                let n = Density2::new(cap_e * i as f64 / 20.0, cap_d * j as f64 / 20.0).unwrap();
                // The upper bound couples the morphs through the mutation
                // exchange alone, so its cross partials are the exchange
                // rates up to the rounding of the flanking evaluations.
                let plus = fd_jacobian(|m| reaction_f_plus(&p, m), n, h);
                assert!((plus.a12 - p.mu_d).abs() <= 1e-9, "at {n:?}: {plus:?}");
                assert!((plus.a21 - p.mu_e).abs() <= 1e-9, "at {n:?}: {plus:?}");
                let minus = fd_jacobian(|m| reaction_f_minus(&p, m).unwrap(), n, h);
                assert!(minus.a12 >= -1e-10, "at {n:?}: {minus:?}");
                assert!(minus.a21 >= -1e-10, "at {n:?}: {minus:?}");
            }
        }
    }
}

#[test]
fn bound_reactions_share_linearisation_at_zero() {
    for p in [p1(), p2()] {
        let (cap_e, cap_d) = density_bounds(&p);
        let h = 1e-6 * cap_e.max(cap_d);
        let j_f = fd_jacobian(|m| reaction_f(&p, m), Density2::ZERO, h);
        let j_plus = fd_jacobian(|m| reaction_f_plus(&p, m), Density2::ZERO, h);
        let j_minus = fd_jacobian(|m| reaction_f_minus(&p, m).unwrap(), Density2::ZERO, h);
        let scale = j_f.norm_inf().max(1.0);
        assert!(mat_diff(j_f, j_plus) <= 1e-6 * scale);
        assert!(mat_diff(j_f, j_minus) <= 1e-6 * scale);
        assert!(mat_diff(j_f, jacobian_f(&p, Density2::ZERO)) <= 1e-6 * scale);
    }
}

#[test]
fn upper_bound_reaction_lies_under_scaled_linearisation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x71736d70);
    for p in [p1(), p2()] {
        let lin = jacobian_f(&p, Density2::ZERO);
        for _ in 0..50 {
            let q = Vec2::new(rng.gen_range(1e-3..1.0), rng.gen_range(1e-3..1.0));
            for alpha in [0.1, 0.5, 1.0, 2.0, 10.0] {
                let lhs = reaction_f_plus(&p, Density2::from(q.scale(alpha)));
                let rhs = lin.mul_vec(q).scale(alpha);
                let slack = 1e-12 * (1.0 + rhs.norm_inf());
                assert!(
                    lhs.x <= rhs.x + slack && lhs.y <= rhs.y + slack,
                    "alpha={alpha}, q={q:?}: {lhs:?} vs {rhs:?}"
                );
            }
        }
    }
}

#[test]
fn full_reaction_equilibria_pass_residual_budget_and_count() {
    for p_base in [p1(), p2()] {
        for mu in [1.0, 1e-3] {
            let p = p_base.with_mutation(&mutation(mu));
            let eqs = find_equilibria_of_f(&p, &SearchBox::default_for(&p), 25).unwrap();
            let budget = 1e-9 * (p.r_e + p.r_d);
            for eq in &eqs {
                assert!(
                    eq.residual <= budget,
                    "residual {} at {:?}",
                    eq.residual,
                    eq.point
                );
            }
            // Newton can land on the extinction root a rounding error below
            // zero; the genuinely negative roots sit many orders further out.
            let nonneg = eqs
                .iter()
                .filter(|eq| eq.point.n_e >= -1e-9 && eq.point.n_d >= -1e-9)
                .count();
            assert_eq!(nonneg, 2, "mu={mu}: {eqs:?}");
        }
    }
}

#[test]
fn coexistence_shift_is_first_order_in_mutation() {
    let p0 = p1().without_mutation();
    let coex_g = g_coexistence(&p0);
    let theta = perturbation_theta(&p0, &mutation(1.0), coex_g).unwrap();

    let mut ratios = Vec::new();
    for mu in [1e-4, 1e-5, 1e-6] {
        let p = p1().with_mutation(&mutation(mu));
        let eqs = find_equilibria_of_f(&p, &SearchBox::default_for(&p), 25).unwrap();
        let coex_f = eqs
            .iter()
            .find(|eq| {
                eq.kind == EquilibriumKind::Coexistence && eq.point.n_e > 0.0 && eq.point.n_d > 0.0
            })
            .unwrap()
            .point;
        let predicted = coex_g.as_vec() + theta.scale(mu);
        ratios.push((coex_f.as_vec() - predicted).norm() / mu);
    }
    assert!(ratios[1] <= ratios[0] / 5.0, "{ratios:?}");
    assert!(ratios[2] <= ratios[1] / 5.0, "{ratios:?}");
}

#[test]
fn min_speed_sits_at_a_local_minimum() {
    let families = [
        p1(),
        p2(),
        p1().with_mutation(&mutation(100.0)),
        ModelParams::new(0.3, 1.5, 1.1, 0.5, 1.0, 1.0, 0.1, 0.1, 0.001, 0.00025).unwrap(),
    ];
    for p in families {
        let sp = min_speed(&p).unwrap();
        for factor in [1.0 - 1e-4, 1.0 + 1e-4] {
            let probe = dispersion(&p, sp.beta_min * factor).unwrap();
            assert!(
                probe.eta >= sp.c_star - 1e-12,
                "probe at {} undercuts the minimum: {} vs {}",
                sp.beta_min * factor,
                probe.eta,
                sp.c_star
            );
        }
    }
}

#[test]
fn speed_curves_fall_as_mutation_grows() {
    let grid: Vec<f64> = (0..13)
        .map(|i| 1e-6 * 10f64.powf(i as f64 * 7.0 / 12.0))
        .collect();
    let cases = [
        (p1(), mutation(1.0)),
        (
            ModelParams::new(0.3, 1.5, 1.1, 0.5, 1.0, 1.0, 0.1, 0.1, 0.001, 0.00025).unwrap(),
            mutation(1.0),
        ),
        (
            ModelParams::new(0.6, 1.5, 1.1, 0.2, 1.0, 1.0, 0.1, 0.1, 0.001, 0.00025).unwrap(),
            mutation(1.0),
        ),
        (p1(), MutationScaling::new(1.0, 0.01, 0.01).unwrap()),
    ];
    for (p, s) in cases {
        let curve = mu_curve(&p, &s, &grid).unwrap();
        for pair in curve.rows.windows(2) {
            assert!(
                pair[1].eta <= pair[0].eta + 1e-9,
                "speed rises from mu={} to mu={}: {} -> {}",
                pair[0].mu,
                pair[1].mu,
                pair[0].eta,
                pair[1].eta
            );
        }
    }
}

#[test]
fn speed_error_against_tangent_line_shrinks_quadratically() {
    let p = p1();
    let s = mutation(1.0);
    let ls = limit_summary(&p, &s).unwrap();
    let curve = mu_curve(&p, &s, &[1e-4, 5e-4]).unwrap();
    let err_lo = (curve.rows[0].eta - (ls.eta_0 + 1e-4 * ls.eta_prime_0)).abs();
    let err_hi = (curve.rows[1].eta - (ls.eta_0 + 5e-4 * ls.eta_prime_0)).abs();
    // The quadratic remainder at mu = 1e-4 is 7.5e-16, about two ulps of the
    // speed itself, so the 25x contraction needs a pinch of rounding
    // head-room to stay testable.
    assert!(err_hi >= 1e-14, "remainder at mu=5e-4 vanished: {err_hi}");
    assert!(err_lo <= err_hi / 25.0 + 2.5e-15, "{err_lo} vs {err_hi}");
}

#[test]
fn leading_edge_ratio_converges_to_its_limit() {
    let p = p1();
    let limit = limit_summary(&p, &mutation(1.0)).unwrap().q_ratio;
    for (mu, tol) in [(1e-5, 1e-2), (1e-6, 1e-3)] {
        let sp = min_speed(&p.with_mutation(&mutation(mu))).unwrap();
        let ratio = sp.q_ratio().unwrap();
        assert!((ratio - limit).abs() <= tol, "mu={mu}: {ratio} vs {limit}");
    }
}

#[test]
fn regime_labels_match_the_envelope_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7265676d);
    for _ in 0..50 {
        let r_ratio = rng.gen_range(0.02..0.98);
        let d_ratio = rng.gen_range(0.02..0.98);
        let p = ModelParams::new(
            d_ratio,
            1.0,
            1.0,
            r_ratio,
            1.0 / 1.2,
            1.0,
            0.8,
            0.7,
            1e-4,
            1e-4,
        )
        .unwrap();
        // classify_regime re-derives the label from the mutation-free
        // envelope minimum internally and errors on any mismatch, so a plain
        // Ok here already covers the cross-check.
        let regime = classify_regime(&p).unwrap();
        let expected = regime.limit_speed(&speed_limits(&p)).unwrap();
        let envelope = min_speed(&p.without_mutation()).unwrap().c_star;
        assert!(
            (envelope - expected).abs() <= 1e-10,
            "({r_ratio}, {d_ratio}) {regime:?}: envelope {envelope} vs {expected}"
        );
    }
}

#[test]
fn lower_competition_run_stays_in_bounds() {
    let p = p2();
    let coex = g_coexistence(&p);
    let grid = Grid1D::new(60.0, 601).unwrap();
    let cfg = SimConfig::new(10.0, 0.1 * coex.total()).unwrap();
    let ic = heaviside_ic(&grid, 10.0, coex).unwrap();
    let (_, trace, bounds) = simulate(&p, &grid, &cfg, &ic).unwrap();
    assert!(!bounds.violated, "{bounds:?}");
    assert!(
        bounds.min_e >= -1e-10 && bounds.min_d >= -1e-10,
        "{bounds:?}"
    );
    assert!(trace.samples.len() > 20);
}

#[test]
fn establisher_profile_overshoots_behind_the_front() {
    let p = p1();
    let coex = g_coexistence(&p);
    let grid = Grid1D::new(200.0, 2001).unwrap();
    let cfg = SimConfig::new(80.0, 0.1 * coex.total()).unwrap();
    let ic = heaviside_ic(&grid, 30.0, coex).unwrap();
    let (state, _, bounds) = simulate(&p, &grid, &cfg, &ic).unwrap();
    assert!(!bounds.violated, "{bounds:?}");
    // By t = 80 the front sits near x = 152; x = 60 has long since relaxed
    // onto the plateau, while the establisher spikes above it at the front.
    let plateau = state.n_e[600];
    let peak = state.n_e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let overshoot = peak - plateau;
    assert!(
        overshoot > 0.0,
        "no overshoot: peak {peak} vs plateau {plateau}"
    );
    // Regression value frozen from the first converged run.
    assert!(
        (overshoot - 0.19933463366304893).abs() < 1e-9,
        "overshoot drifted: {overshoot}"
    );
}

proptest! {
    #[test]
    fn cutoff_profile_is_monotone_and_bounded(lo in 1e-3f64..2.0, width in 1e-3f64..3.0) {
        let hi = lo + width;
        prop_assert_eq!(cutoff_gamma(lo, lo, hi).unwrap(), 1.0);
        prop_assert_eq!(cutoff_gamma(hi, lo, hi).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for i in 0..=400 {
            let x = lo - 0.5 + (width + 1.0) * i as f64 / 400.0;
            let g = cutoff_gamma(x, lo, hi).unwrap();
            prop_assert!((0.0..=1.0).contains(&g), "gamma({}) = {}", x, g);
            prop_assert!(g <= prev + 1e-15, "gamma rises at {}: {} -> {}", x, prev, g);
            prev = g;
        }
    }

    #[test]
    fn perron_frobenius_pair_satisfies_defining_identities(
        a11 in -5.0f64..5.0,
        a22 in -5.0f64..5.0,
        a12 in 0.01f64..5.0,
        a21 in 0.01f64..5.0,
        shift in -10.0f64..10.0,
    ) {
        let h = Mat2::new(a11, a12, a21, a22);
        let (eta, q) = pf_eigenpair(&h).unwrap();
        let residual = (h.mul_vec(q) - q.scale(eta)).norm_inf();
        prop_assert!(residual <= 1e-12 * h.norm_inf(), "residual {}", residual);
        prop_assert!(eta >= a11.max(a22));
        prop_assert!(q.x >= 0.0 && q.y >= 0.0);
        prop_assert!((q.norm() - 1.0).abs() <= 1e-14);

        let (eta_s, q_s) = pf_eigenpair(&h.add_diag(shift)).unwrap();
        prop_assert!(
            (eta_s - (eta + shift)).abs() <= 1e-12 * (1.0 + h.norm_inf() + shift.abs()),
            "shifted eigenvalue {} vs {}", eta_s, eta + shift
        );
        prop_assert!((q_s - q).norm() <= 1e-11, "eigenvector moved under shift");
    }

    #[test]
    fn condition_margins_agree_with_flags(
        d_e in 0.05f64..2.0,
        extra_d in 0.01f64..2.0,
        r_d in 0.05f64..2.0,
        extra_r in 0.01f64..2.0,
        m_ee in 0.1f64..2.0,
        m_dd in 0.1f64..2.0,
        m_ed in 0.01f64..2.0,
        m_de in 0.01f64..2.0,
        mu_e in 1e-6f64..0.05,
        mu_d in 1e-6f64..0.05,
    ) {
        let p = ModelParams::new(
            d_e, d_e + extra_d, r_d + extra_r, r_d, m_ee, m_dd, m_ed, m_de, mu_e, mu_d,
        ).unwrap();
        let rep = check_conditions(&p);
        for c in [
            rep.parms_rd, rep.compe, rep.asymproot, rep.fastersp,
            rep.intersmall, rep.musmall, rep.rootswitch,
        ] {
            prop_assert_eq!(c.satisfied, c.margin > 0.0);
        }
        prop_assert_eq!(
            rep.theorem3_satisfied,
            rep.intersmall.satisfied && rep.musmall.satisfied
        );
        let (cap_e, cap_d) = density_bounds(&p);
        prop_assert_eq!(rep.n_e_bound, cap_e);
        prop_assert_eq!(rep.n_d_bound, cap_d);
    }

    #[test]
    fn g_equilibria_and_axis_perturbations_check_out(
        d_e in 0.05f64..2.0,
        d_d in 0.05f64..2.0,
        r_e in 0.1f64..2.0,
        r_d in 0.1f64..2.0,
        m_ee in 0.3f64..2.0,
        m_dd in 0.3f64..2.0,
        gap_ed in 0.05f64..0.9,
        gap_de in 0.05f64..0.9,
        e in 1e-4f64..0.1,
        d in 1e-4f64..0.1,
    ) {
        // Intra-morph competition strictly dominates, so the four equilibria
        // are distinct and the axis Jacobians invert.
        let m_ed = m_dd * (1.0 - gap_ed);
        let m_de = m_ee * (1.0 - gap_de);
        let p = ModelParams::new(d_e, d_d, r_e, r_d, m_ee, m_dd, m_ed, m_de, 0.0, 0.0).unwrap();
        let eqs = equilibria_of_g(&p).unwrap();
        prop_assert_eq!(eqs.len(), 4);
        let budget = 1e-9 * (r_e + r_d);
        for eq in &eqs {
            prop_assert!(eq.residual <= budget, "residual {} at {:?}", eq.residual, eq.point);
            prop_assert!(reaction_g(&p, eq.point).norm() <= budget);
        }

        let s = MutationScaling::new(1.0, e, d).unwrap();
        let on_e_axis =
            perturbation_theta(&p, &s, Density2::new(1.0 / m_ee, 0.0).unwrap()).unwrap();
        let th_d = -e / (r_d * (m_ee - m_de));
        let th_e = -e / (r_e * m_ee) - (m_ed / m_ee) * th_d;
        prop_assert!(
            (on_e_axis - Vec2::new(th_e, th_d)).norm() <= 1e-9 * (1.0 + th_e.abs() + th_d.abs()),
            "e-axis shift {:?} vs ({}, {})", on_e_axis, th_e, th_d
        );

        let on_d_axis =
            perturbation_theta(&p, &s, Density2::new(0.0, 1.0 / m_dd).unwrap()).unwrap();
        let tt_e = -d / (r_e * (m_dd - m_ed));
        let tt_d = -d / (r_d * m_dd) - (m_de / m_dd) * tt_e;
        prop_assert!(
            (on_d_axis - Vec2::new(tt_e, tt_d)).norm() <= 1e-9 * (1.0 + tt_e.abs() + tt_d.abs()),
            "d-axis shift {:?} vs ({}, {})", on_d_axis, tt_e, tt_d
        );
    }
}
