//! Property tests over seeded random models.

use std::collections::BTreeSet;

use proptest::prelude::*;

use smp_perturb::expansions::{phi_expansion, EpsSeries};
use smp_perturb::generate::random_models;
use smp_perturb::hitting::{solidarity_residual, solve_hitting, solve_phi};
use smp_perturb::linalg::vec_inf_norm;
use smp_perturb::model::validation_grid;
use smp_perturb::moments::{moment_p, sojourn_moments};
use smp_perturb::oracle::{dp_g, renewal_residual};
use smp_perturb::root::characteristic_root;
use smp_perturb::verify::{expansion_rho, occupation_sum_error, oracle_excess, verify_model, DEFAULT_VERIFY_K};
use smp_perturb::{Error, SemiMarkovModel};

fn model(seed: u64) -> SemiMarkovModel {
    random_models(seed, 1).remove(0)
}

/// Half the root at `eps`, or half the largest finite `rho` without one.
fn half_root(model: &SemiMarkovModel, eps: f64) -> f64 {
    match characteristic_root(model, eps, 1) {
        Ok(r) => 0.5 * r.rho_root,
        Err(Error::NoRoot { delta_proxy, .. }) => 0.5 * delta_proxy,
        Err(e) => panic!("root search failed: {e}"),
    }
}

fn series(coeffs: Vec<f64>) -> EpsSeries<f64> {
    EpsSeries::new(coeffs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_rows_are_distributions(seed in any::<u64>()) {
        let m = model(seed);
        for eps in validation_grid(m.eps_max(), 9) {
            let k = m.eval_kernel(eps).unwrap();
            for i in 1..=m.n_states() {
                prop_assert!((k.row_sum(i) - 1.0).abs() <= 1e-12);
                for j in 0..=m.n_states() {
                    for kk in 1..=m.k_max() {
                        let q = k.get(i, j, kk);
                        prop_assert!((0.0..=1.0).contains(&q));
                    }
                }
            }
        }
    }

    #[test]
    fn unperturbed_kernel_is_the_constant_part(seed in any::<u64>()) {
        let m = model(seed);
        let k = m.eval_kernel(0.0).unwrap();
        for i in 1..=m.n_states() {
            for j in 0..=m.n_states() {
                for kk in 1..=m.k_max() {
                    prop_assert_eq!(k.get(i, j, kk), m.kernel().get(i, j, kk).coeff(0));
                }
            }
        }
    }

    #[test]
    fn reachability_matches_taboo_series(seed in any::<u64>()) {
        let m = model(seed);
        let reach = m.reachability_at_zero();
        let horizon = m.n_states() * m.k_max() * 4;
        for j in 1..=m.n_states() {
            let g = dp_g(&m, 0.0, j, horizon).unwrap();
            for i in 1..=m.n_states() {
                let total: f64 = g.values[i - 1].iter().sum();
                prop_assert_eq!(total > 0.0, reach[i - 1][j - 1], "i={} j={}", i, j);
            }
        }
    }

    #[test]
    fn taboo_series_totals_match_linear_solve(seed in any::<u64>()) {
        let m = model(seed);
        for j in 1..=m.n_states() {
            let g = dp_g(&m, 0.0, j, 4000).unwrap();
            let phi = solve_phi(&m, 0.0, 0.0, j, 0).unwrap();
            for i in 1..=m.n_states() {
                let total: f64 = g.values[i - 1].iter().sum();
                prop_assert!(total <= 1.0 + 1e-12);
                prop_assert!((total - phi.phi[0][i - 1]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn sojourn_relations_hold(seed in any::<u64>(), rho in -1.0f64..0.5) {
        prop_assume!(rho.abs() > 1e-3);
        let m = model(seed);
        let eps = 0.5 * m.eps_max();
        let s = sojourn_moments(&m, eps, rho, 4).unwrap();
        let e = rho.exp();
        for i in 0..m.n_states() {
            prop_assert!((s.psi[i][0] - (e - 1.0) * s.varphi[i][0] - 1.0).abs() <= 1e-12);
            for r in 1..=4usize {
                let lower: f64 = (0..r).map(|q| smp_perturb::moments::binomial(r, q) * s.varphi[i][q]).sum();
                let residual = s.psi[i][r] - (e - 1.0) * s.varphi[i][r] - e * lower;
                prop_assert!(residual.abs() <= 1e-10 * (1.0 + s.psi[i][r].abs()));
            }
        }
    }

    #[test]
    fn sojourn_moment_is_continuous_at_zero(seed in any::<u64>()) {
        let m = model(seed);
        let at = |rho: f64| sojourn_moments(&m, 0.0, rho, 0).unwrap();
        let (lo, mid, hi) = (at(-1e-6), at(0.0), at(1e-6));
        for i in 0..m.n_states() {
            let (a, b, c) = (lo.varphi[i][0], mid.varphi[i][0], hi.varphi[i][0]);
            prop_assert!(a.min(c) - 1e-5 <= b && b <= a.max(c) + 1e-5);
        }
    }

    #[test]
    fn kernel_moment_derivative_matches_difference(seed in any::<u64>(), rho in -1.0f64..0.5) {
        prop_assume!(rho.abs() > 1e-3);
        let m = model(seed);
        let eps = 0.5 * m.eps_max();
        let h = 1e-4;
        for r in 0..3u32 {
            let up = moment_p(&m, eps, rho + h, r, &BTreeSet::new()).unwrap();
            let dn = moment_p(&m, eps, rho - h, r, &BTreeSet::new()).unwrap();
            let exact = moment_p(&m, eps, rho, r + 1, &BTreeSet::new()).unwrap();
            for i in 1..=m.n_states() {
                for j in 0..=m.n_states() {
                    let fd = (up.get(i, j) - dn.get(i, j)) / (2.0 * h);
                    let want = exact.get(i, j);
                    prop_assert!((fd - want).abs() <= 1e-6 * want.abs().max(1e-3));
                }
            }
        }
    }

    #[test]
    fn hitting_moments_grow_with_order(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let m = model(seed);
        let eps = 0.5 * m.eps_max();
        let rho = frac * half_root(&m, eps);
        for j in 1..=m.n_states() {
            let states: Vec<usize> = (1..=m.n_states()).collect();
            let h = solve_hitting(&m, eps, rho, j, &states, 3, true).unwrap();
            for r in 0..3 {
                for i in 0..m.n_states() {
                    prop_assert!(h.phi[r][i] >= 0.0);
                    prop_assert!(h.phi[r + 1][i] >= h.phi[r][i] - 1e-12);
                }
            }
            for s in &states {
                prop_assert!(h.omega[s].iter().all(|v| v.iter().all(|x| x.is_finite() && *x >= -1e-12)));
            }
        }
    }

    #[test]
    fn linear_systems_match_oracle(seed in any::<u64>()) {
        let m = model(seed);
        let eps = 0.5 * m.eps_max();
        for rho in [0.0, half_root(&m, eps)] {
            prop_assert!(oracle_excess(&m, eps, rho, 2).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn occupation_moments_sum_to_exit_moment(seed in any::<u64>()) {
        let m = model(seed);
        let eps = 0.5 * m.eps_max();
        for rho in [0.0, half_root(&m, eps)] {
            prop_assert!(occupation_sum_error(&m, eps, rho).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn solidarity_relation_holds(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let m = model(seed);
        let eps = frac * m.eps_max();
        let rho = half_root(&m, eps);
        for i in 1..=m.n_states() {
            for j in (1..=m.n_states()).filter(|&j| j != i) {
                prop_assert!(solidarity_residual(&m, eps, rho, i, j).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn root_is_shared_by_every_state(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let m = model(seed);
        let eps = frac * m.eps_max();
        if let Ok(r) = characteristic_root(&m, eps, 1) {
            prop_assert!(r.rho_root >= 0.0);
            prop_assert!(r.residual.abs() <= 1e-12);
            prop_assert!(r.solidarity_spread() <= 1e-10);
        }
    }

    #[test]
    fn no_absorption_means_zero_root(seed in any::<u64>()) {
        let m = model(seed);
        let absorbing = (1..=m.n_states()).any(|i| m.kernel().limiting_jump_prob(i, 0) > 0.0);
        prop_assume!(!absorbing);
        let r = characteristic_root(&m, 0.0, 1).unwrap();
        prop_assert!(r.rho_root.abs() <= 1e-12);
    }

    #[test]
    fn renewal_identity_holds(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let m = model(seed);
        let eps = frac * m.eps_max();
        for i in 1..=m.n_states() {
            prop_assert!(renewal_residual(&m, eps, i, 50).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn leading_coefficients_are_unperturbed_solves(seed in any::<u64>()) {
        let m = model(seed);
        let rho = expansion_rho(&m).unwrap();
        let k = 3;
        for j in 1..=m.n_states() {
            let table = phi_expansion(&m, rho, j, k).unwrap();
            let solved = solve_phi(&m, 0.0, rho, j, k).unwrap();
            let phi = table.phi.as_ref().unwrap();
            for r in 0..=k {
                prop_assert_eq!(phi.solution[r].coeffs().len(), k - r + 1);
                let diff = vec_inf_norm(&(phi.solution[r].coeff(0) - &solved.phi[r]));
                prop_assert!(diff <= 1e-10 * (1.0 + vec_inf_norm(&solved.phi[r])));
            }
        }
    }

    #[test]
    fn series_products_reassociate(
        a in prop::collection::vec(-2.0f64..2.0, 1..6),
        b in prop::collection::vec(-2.0f64..2.0, 1..6),
        c in prop::collection::vec(-2.0f64..2.0, 1..6),
    ) {
        let (a, b, c) = (series(a), series(b), series(c));
        let left: EpsSeries<f64> = a.mul_series::<f64, f64>(&b).mul_series(&c);
        let right: EpsSeries<f64> = a.mul_series::<f64, f64>(&b.mul_series::<f64, f64>(&c));
        let order = a.order().min(b.order()).min(c.order());
        prop_assert_eq!(left.order(), order);
        prop_assert_eq!(right.order(), order);
        for n in 0..=order {
            prop_assert!((left.coeff(n) - right.coeff(n)).abs() <= 1e-12);
        }
        let sum = a.add_series(&b);
        prop_assert_eq!(sum.order(), a.order().min(b.order()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn random_models_pass_verification(seed in any::<u64>()) {
        let m = model(seed);
        for check in verify_model(&m, DEFAULT_VERIFY_K) {
            prop_assert!(check.pass, "{}: residual {} > {}", check.name, check.residual, check.tolerance);
        }
    }
}
