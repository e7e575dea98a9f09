//! Invariances and inequalities of the moduli, bound, backward error and alignment.

use jbdp_core::block;
use jbdp_core::moduli::DiagonalizedSet;
use jbdp_core::perturbation::{
    self, bound_terms, forward_bound, AnalysisInput, QFactors, Reference,
};
use jbdp_core::random;
use jbdp_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn taus() -> Vec<Partition> {
    vec![
        Partition::new(vec![1, 2, 3]).unwrap(),
        Partition::new(vec![3, 3, 3]).unwrap(),
        Partition::new(vec![2, 2]).unwrap(),
        Partition::new(vec![2, 1, 2, 1]).unwrap(),
    ]
}

fn tau_strategy() -> impl Strategy<Value = Partition> {
    (0usize..4).prop_map(|i| taus().swap_remove(i))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(25))]

    #[test]
    fn moduli_and_cond_invariant_under_equivalence(seed in any::<u64>(), tau in tau_strategy()) {
        let b = generate(&tau, 6, 0.0, seed).unwrap();
        let mut rng = random::stream(seed, 99);
        let d = random::block_orthogonal(&mut rng, &tau);
        let p = random::block_permutation(&mut rng, &tau);
        let w2 = apply_equivalence(&b.w_true, &tau, &d, &p).unwrap();
        prop_assert!(is_member_w(&w2, &tau, 1e-12));
        let m1 = compute_moduli(&DiagonalizedSet::from_diagonalizer(&b.a_clean, &b.w_true, &tau).unwrap()).unwrap();
        let m2 = compute_moduli(&DiagonalizedSet::from_diagonalizer(&b.a_clean, &w2, &tau).unwrap()).unwrap();
        prop_assert!((m1.omega_uniq - m2.omega_uniq).abs() <= 1e-10 * m1.omega_uniq.max(1.0));
        prop_assert!((m1.omega_robu - m2.omega_robu).abs() <= 1e-10 * m1.omega_robu.max(1.0));
        let c1 = condition_number(&b.a_clean, &b.w_true, &tau).unwrap();
        let c2 = condition_number(&b.a_clean, &w2, &tau).unwrap();
        prop_assert!((c1 - c2).abs() <= 1e-10 * c1);
    }

    #[test]
    fn moduli_do_not_decrease_when_matrices_are_added(seed in any::<u64>(), tau in tau_strategy(), extra in 1usize..4) {
        let b = generate(&tau, 3 + extra, 0.0, seed).unwrap();
        let small = DiagonalizedSet::from_diagonalizer(&b.a_clean[..3], &b.w_true, &tau).unwrap();
        let rest = DiagonalizedSet::from_diagonalizer(&b.a_clean[3..], &b.w_true, &tau).unwrap();
        let mut big = small.clone();
        big.extend(&rest).unwrap();
        let ms = compute_moduli(&small).unwrap();
        let mb = compute_moduli(&big).unwrap();
        prop_assert!(mb.omega_uniq >= ms.omega_uniq * (1.0 - 1e-12));
        if ms.omega_robu.is_finite() {
            prop_assert!(mb.omega_robu >= ms.omega_robu * (1.0 - 1e-12));
        }
    }

    #[test]
    fn robu_paths_agree_on_certified_sets(seed in any::<u64>(), tau in tau_strategy()) {
        let b = generate(&tau, 4, 0.0, seed).unwrap();
        let rep = compute_moduli(&DiagonalizedSet::from_diagonalizer(&b.a_clean, &b.w_true, &tau).unwrap()).unwrap();
        prop_assert!(rep.nondivisible_certified);
        if rep.omega_robu.is_finite() {
            prop_assert!((rep.omega_robu - rep.omega_robu_complement).abs() <= 1e-10 * rep.omega_robu.max(1.0));
        }
    }

    #[test]
    fn residual_blocks_scale_by_weight_gaps(seed in any::<u64>(), tau in tau_strategy()) {
        let b = generate(&tau, 3, 1e-3, seed).unwrap();
        let w = random::member_w(&mut random::stream(seed, 7), &tau);
        let gamma = perturbation::random_gamma(&mut random::stream(seed, 8), tau.t()).unwrap();
        let (rs, r) = residuals(&b.a_noisy, &w, &gamma, &tau).unwrap();
        let labels = tau.labels();
        let mut off_sq = 0.0;
        for (ri, ai) in rs.iter().zip(&b.a_noisy) {
            let bi = w.transpose() * ai * &w;
            for q in 0..tau.n() {
                for p in 0..tau.n() {
                    let expect = (gamma.gammas()[labels[q]] - gamma.gammas()[labels[p]]) * bi[(p, q)];
                    prop_assert!((ri[(p, q)] - expect).abs() <= 1e-12 * bi.amax());
                }
            }
            off_sq += block::offbdiag_norm_sq(&bi, &tau);
        }
        prop_assert!(r <= 2.0 * off_sq.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn backward_perturbation_is_exact(seed in any::<u64>(), tau in tau_strategy()) {
        let b = generate(&tau, 5, 1e-4, seed).unwrap();
        let w = normalize_to_w(&(&b.w_true + random::normal_matrix(&mut random::stream(seed, 5), tau.n(), tau.n()) * 1e-3), &tau).unwrap();
        let gamma = default_gamma(&tau).unwrap();
        let be = backward_error(&b.a_noisy, &w, &gamma, &tau).unwrap();
        let mut e_sq = 0.0;
        for (ai, ei) in b.a_noisy.iter().zip(&be.perturbation) {
            let fixed = w.transpose() * (ai + ei) * &w;
            prop_assert!(block::offbdiag_norm_sq(&fixed, &tau).sqrt() <= 1e-12 * ai.norm());
            e_sq += ei.norm_squared();
        }
        prop_assert!(e_sq.sqrt() / set_norm(&b.a_noisy) <= be.eps_berr * (1.0 + 1e-12));
        prop_assert!(be.eps_berr >= 0.0);
    }

    #[test]
    fn bound_increases_with_delta(r1 in 1e-12f64..1e-4, factor in 1.0f64..10.0, t in 2usize..8) {
        let q = QFactors::unit(1.0);
        let a = bound_terms(t, 1.0, r1, 0.0, &q, 1.0, f64::INFINITY);
        let b = bound_terms(t, 1.0, r1 * factor, 0.0, &q, 1.0, f64::INFINITY);
        prop_assert!(a.eps_ub.unwrap() >= 0.0);
        if let Some(ub) = b.eps_ub {
            prop_assert!(ub >= a.eps_ub.unwrap());
        }
    }

    #[test]
    fn q_factor_solves_exactly(seed in any::<u64>(), tau in tau_strategy()) {
        let mut rng = random::rng(seed);
        let w = random::member_w(&mut rng, &tau);
        let wt = random::member_w(&mut rng, &tau);
        let q = linalg::solve(&w, &wt).unwrap();
        prop_assert!((&w * q - &wt).norm() <= 1e-12 * wt.norm() * linalg::spectral_norm(&linalg::inverse(&w).unwrap()).unwrap().max(1.0));
    }

    #[test]
    fn alignment_is_a_minimum(seed in any::<u64>(), tau in tau_strategy()) {
        let mut rng = random::rng(seed);
        let w = random::member_w(&mut rng, &tau);
        let wt = normalize_to_w(&(&w + random::normal_matrix(&mut rng, tau.n(), tau.n()) * 0.1), &tau).unwrap();
        let res = align(&w, &wt, &tau).unwrap();
        for blk in res.d.blocks() {
            let s = blk.ncols();
            prop_assert!((blk.transpose() * blk - DMatrix::identity(s, s)).norm() <= 1e-12 * s as f64);
        }
        let realized = (&w - apply_equivalence(&wt, &tau, &res.d, &res.p).unwrap()).norm() / wt.norm();
        prop_assert!((realized - res.error).abs() <= 1e-14);
        for _ in 0..10 {
            let d = random::block_orthogonal(&mut rng, &tau);
            let p = random::block_permutation(&mut rng, &tau);
            let other = (&w - apply_equivalence(&wt, &tau, &d, &p).unwrap()).norm() / wt.norm();
            prop_assert!(other >= res.error - 1e-12);
        }
    }

    #[test]
    fn alignment_recovers_equivalent_diagonalizers(seed in any::<u64>(), tau in tau_strategy()) {
        let mut rng = random::rng(seed);
        let w = random::member_w(&mut rng, &tau);
        let d = random::block_orthogonal(&mut rng, &tau);
        let p = random::block_permutation(&mut rng, &tau);
        let wt = apply_equivalence(&w, &tau, &d, &p).unwrap();
        prop_assert!(align(&w, &wt, &tau).unwrap().error <= 1e-12);
        prop_assert!(align(&wt, &w, &tau).unwrap().error <= 1e-12);
    }
}

#[test]
fn first_order_expansion_of_the_bound() {
    for t in 2..=9usize {
        let lead = (t as f64).sqrt() + ((t - 1) as f64).sqrt();
        for eps in [1e-6, 1e-5, 1e-4] {
            let ub = forward_bound(eps, t).unwrap();
            assert!(
                (ub - lead * eps).abs() <= 10.0 * t as f64 * eps * eps,
                "t={t} eps={eps}"
            );
        }
    }
}

#[test]
fn bound_domain_ends_at_tau() {
    for t in 2..=9usize {
        let (tau_c, alpha_c) = perturbation::bound_constants(t);
        assert!(alpha_c > 0.0 && alpha_c < 0.5);
        assert!(forward_bound(tau_c * (1.0 - 1e-9), t).unwrap().is_finite());
        assert!(forward_bound(tau_c * (1.0 + 1e-9), t).is_none());
    }
    let (tau2, alpha2) = perturbation::bound_constants(2);
    assert!((tau2 - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    assert!((alpha2 - 0.247_799).abs() < 1e-6);
}

#[test]
fn generated_instances_are_uniquely_diagonalizable() {
    let tau = Partition::new(vec![3, 3, 3]).unwrap();
    for seed in 0..100 {
        let b = generate(&tau, 16, 0.0, seed).unwrap();
        let ds = DiagonalizedSet::from_diagonalizer(&b.a_clean, &b.w_true, &tau).unwrap();
        let rep = compute_moduli(&ds).unwrap();
        assert!(rep.omega_uniq > 0.0, "seed {seed}");
        assert!(rep.nondivisible_certified, "seed {seed}");
    }
}

#[test]
fn exact_diagonalizer_gives_zero_residual_and_bound() {
    let tau = Partition::new(vec![1, 2, 3]).unwrap();
    let b = generate(&tau, 6, 0.0, 4).unwrap();
    let ds = DiagonalizedSet::from_block_diagonal(
        &b.a_clean
            .iter()
            .map(|a| bdiag(&(b.w_true.transpose() * a * &b.w_true), &tau).unwrap())
            .collect::<Vec<_>>(),
        &tau,
    )
    .unwrap();
    let rep = compute_moduli(&ds).unwrap();
    let gamma = default_gamma(&tau).unwrap();
    let (_, r) = residuals(&b.a_clean, &b.w_true, &gamma, &tau).unwrap();
    assert!(r <= 1e-12 * set_norm(&b.a_clean));
    let bt = forward_error_terms(
        &b.w_true,
        &b.w_true,
        0.0,
        0.0,
        &gamma,
        &tau,
        rep.omega_uniq,
        rep.omega_robu,
    )
    .unwrap();
    assert!(bt.condition_holds);
    assert_eq!(bt.eps_ub, Some(0.0));
}

#[test]
fn analysis_over_many_weights_prefers_smallest_bound() {
    let tau = Partition::new(vec![3, 3, 3]).unwrap();
    let b = generate(&tau, 16, 1e-10, 21).unwrap();
    let input = AnalysisInput {
        a_tilde: &b.a_noisy,
        w_tilde: &b.w_true,
        tau: &tau,
        reference: Some(Reference {
            w: &b.w_true,
            a_clean: &b.a_clean,
        }),
    };
    let base = perturbation::analyze(&input).unwrap();
    let (gamma, best) = select_gamma(&input, 49, 3).unwrap();
    assert_eq!(best.gamma, gamma.gammas().to_vec());
    assert!(best.eps_ub.unwrap() <= base.eps_ub.unwrap());
    assert!(best.g >= perturbation::MIN_RANDOM_GAP);
    assert!(best.error.unwrap() <= 1e-14);
    assert!(best.eps_berr >= 0.0);
}
