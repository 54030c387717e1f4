//! Power-series expansions in `eps` of the hitting and occupation
//! functionals.
//!
//! Kernel moments are exact polynomials in `eps`, so their coefficients are
//! read off directly. Everything downstream follows the triangular scheme:
//! with a base order `k`, quantities of derivative order `r` are expanded to
//! order `k - r`. The inverse `U = (I - jP(rho))^{-1}` is expanded through
//!
//! ```text
//! U[0] = (I - jP[rho, 0, 0])^{-1}
//! U[n] = U[0] sum_{q=1..n} jP[rho, 0, q] U[n - q]
//! ```
//!
//! and each solution table is `X[r] = U * (b[r] + sum_{m=1..r} C(r, m) jP[m] X[r - m])`
//! as a truncated product, with `b` either `p_j` (hitting) or the
//! indicator-weighted sojourn vector (occupation).

pub mod series;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use series::EpsSeries;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, neumann_probe, vec_inf_norm, Factorization, Mat, Vector};
use crate::model::{power_exp_weight, PerturbedKernel, SemiMarkovModel};
use crate::moments::{binomial, is_zero_rho, taboo_block};

/// Kernel moment coefficients `p_ij[rho, r, n]`, `n = 0..=k-r`, as an
/// `N x (N+1)` matrix series (columns are `j = 0..N`).
pub fn p_expansion(model: &SemiMarkovModel, rho: f64, r: usize, k: usize) -> Result<EpsSeries<Mat>> {
    if r > k {
        return Err(Error::InvalidArgument(format!(
            "derivative order {r} exceeds expansion order {k}"
        )));
    }
    Ok(kernel_moment_series(model.kernel(), rho, r, k - r))
}

fn kernel_moment_series(kernel: &PerturbedKernel, rho: f64, r: usize, order: usize) -> EpsSeries<Mat> {
    let n_states = kernel.n_states();
    let weights: Vec<f64> = (1..=kernel.k_max())
        .map(|kk| power_exp_weight(kk, rho, r as u32))
        .collect();
    EpsSeries::from_fn(order, |n| {
        Mat::from_fn(n_states, n_states + 1, |row, j| {
            weights
                .iter()
                .enumerate()
                .map(|(kk, w)| w * kernel.get(row + 1, j, kk + 1).coeff(n))
                .sum()
        })
    })
}

/// Coefficients `U[n]` of `(I - P(eps))^{-1}` for `n = 0..=min(k, order of P)`.
///
/// `p` must be square. Fails with `SingularAtZero` when the Neumann series of
/// `P[0]` does not converge or `I - P[0]` has a vanishing pivot.
pub fn inverse_expansion(p: &EpsSeries<Mat>, k: usize) -> Result<EpsSeries<Mat>> {
    let p0 = p.coeff(0);
    let probe = neumann_probe(p0);
    let factor = Factorization::of_identity_minus(p0);
    if !probe.decays() || factor.is_singular() {
        return Err(Error::SingularAtZero(format!(
            "I - P at eps = 0 is not Neumann-invertible (spectral radius proxy {:.6}, min pivot {:.3e})",
            probe.spectral_radius_proxy(),
            factor.min_pivot()
        )));
    }
    let order = k.min(p.order());
    let u0 = factor.inverse();
    let mut u: Vec<Mat> = vec![u0.clone()];
    for n in 1..=order {
        let mut acc = p.coeff(1) * &u[n - 1];
        for q in 2..=n {
            acc += p.coeff(q) * &u[n - q];
        }
        u.push(&u0 * acc);
    }
    Ok(EpsSeries::new(u))
}

/// `||sum_q (I delta_{q0} - P[q]) U[n - q] - delta_{n0} I||_inf / (1 + ||U[n]||_inf)`
/// per `n`, on the same scale as [`order_residuals`].
pub fn inverse_identity_residuals(p: &EpsSeries<Mat>, u: &EpsSeries<Mat>) -> Vec<f64> {
    let dim = p.coeff(0).nrows();
    let identity = EpsSeries::from_fn(p.order(), |n| {
        if n == 0 {
            Mat::identity(dim, dim)
        } else {
            Mat::zeros(dim, dim)
        }
    });
    let product: EpsSeries<Mat> = identity.sub_series(p).mul_series(u);
    product
        .coeffs()
        .iter()
        .zip(identity.coeffs())
        .zip(u.coeffs())
        .map(|((lhs, rhs), un)| inf_norm(&(lhs - rhs)) / (1.0 + inf_norm(un)))
        .collect()
}

/// Expansions of `psi_i(rho, r)` and `varphi_i(rho, r)`, indexed `[i-1][r]`,
/// each of order `k - r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SojournExpansion {
    pub rho: f64,
    pub k: usize,
    pub psi: Vec<Vec<EpsSeries<f64>>>,
    pub varphi: Vec<Vec<EpsSeries<f64>>>,
}

/// Sojourn expansions. At `rho = 0` the recursion consumes `psi(0, r + 1)`,
/// so the kernel is expanded one order further; the model's kernel is an
/// exact polynomial, so that extra order is always available.
pub fn varphi_expansion(model: &SemiMarkovModel, rho: f64, k: usize) -> SojournExpansion {
    let kernel = model.kernel();
    let n_states = kernel.n_states();
    let k_max = kernel.k_max();
    let zero = is_zero_rho(rho);
    let rho_eff = if zero { 0.0 } else { rho };
    let top = if zero { k + 1 } else { k };

    // Coefficients of P_i{kappa = kk}: sum over destinations of q_ijk[n].
    let sojourn_coeff = |i: usize, kk: usize, n: usize| -> f64 {
        (0..=n_states).map(|j| kernel.get(i, j, kk).coeff(n)).sum()
    };

    let mut psi_all = Vec::with_capacity(n_states);
    let mut varphi_all = Vec::with_capacity(n_states);
    for i in 1..=n_states {
        let psi: Vec<EpsSeries<f64>> = (0..=top)
            .map(|r| {
                EpsSeries::from_fn(top - r, |n| {
                    (1..=k_max)
                        .map(|kk| power_exp_weight(kk, rho_eff, r as u32) * sojourn_coeff(i, kk, n))
                        .sum()
                })
            })
            .collect();

        let mut varphi: Vec<EpsSeries<f64>> = Vec::with_capacity(k + 1);
        if zero {
            for r in 0..=k {
                varphi.push(EpsSeries::from_fn(k - r, |n| {
                    let lower: f64 = (0..r).map(|m| binomial(r + 1, m) * varphi[m].coeff(n)).sum();
                    (psi[r + 1].coeff(n) - lower) / (r + 1) as f64
                }));
            }
        } else {
            let denom = rho.exp_m1();
            let e = rho.exp();
            // (psi[rho, 0, n] - delta_{n0}) written as a sum of expm1 terms
            // plus the coefficient's mass defect, which avoids cancellation.
            varphi.push(EpsSeries::from_fn(k, |n| {
                let mass: f64 = (1..=k_max).map(|kk| sojourn_coeff(i, kk, n)).sum();
                let defect = mass - if n == 0 { 1.0 } else { 0.0 };
                let excess: f64 = (1..=k_max)
                    .map(|kk| (rho * kk as f64).exp_m1() * sojourn_coeff(i, kk, n))
                    .sum();
                (excess + defect) / denom
            }));
            for r in 1..=k {
                varphi.push(EpsSeries::from_fn(k - r, |n| {
                    let lower: f64 = (0..r).map(|m| binomial(r, m) * varphi[m].coeff(n)).sum();
                    (psi[r].coeff(n) - e * lower) / denom
                }));
            }
        }
        psi_all.push(
            psi.into_iter()
                .take(k + 1)
                .enumerate()
                .map(|(r, s)| s.truncated(k - r))
                .collect(),
        );
        varphi_all.push(varphi);
    }
    SojournExpansion {
        rho,
        k,
        psi: psi_all,
        varphi: varphi_all,
    }
}

/// One recursively solved family: forcing base `b[r]`, assembled forcing
/// (`lambda` or `theta`) and solution (`Phi` or `omega`), for `r = 0..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedSeries {
    pub base: Vec<EpsSeries<Vector>>,
    pub forcing: Vec<EpsSeries<Vector>>,
    pub solution: Vec<EpsSeries<Vector>>,
}

/// Expansion coefficients for one target `j`.
///
/// `solution[r]` (and `forcing[r]`, `base[r]`, `taboo_p[r]`) carries exactly
/// `k - r + 1` coefficients. Vectors are indexed by start state `i - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTable {
    pub rho: f64,
    pub target: usize,
    pub k: usize,
    /// `jP[rho, r, .]` for `r = 0..=k`.
    pub taboo_p: Vec<EpsSeries<Mat>>,
    pub u: EpsSeries<Mat>,
    pub phi: Option<SolvedSeries>,
    pub omega: BTreeMap<usize, SolvedSeries>,
    pub sojourn: Option<SojournExpansion>,
}

fn check_state(model: &SemiMarkovModel, s: usize) -> Result<()> {
    if s == 0 || s > model.n_states() {
        return Err(Error::InvalidArgument(format!(
            "state {s} is not in 1..={}",
            model.n_states()
        )));
    }
    Ok(())
}

/// `X[r] = U * (b[r] + sum_{m=1..r} C(r, m) jP[m] X[r - m])`.
fn solve_series(taboo_p: &[EpsSeries<Mat>], u: &EpsSeries<Mat>, base: Vec<EpsSeries<Vector>>) -> SolvedSeries {
    let mut forcing: Vec<EpsSeries<Vector>> = Vec::with_capacity(base.len());
    let mut solution: Vec<EpsSeries<Vector>> = Vec::with_capacity(base.len());
    for (r, b) in base.iter().enumerate() {
        let mut f = b.clone();
        for m in 1..=r {
            let term: EpsSeries<Vector> = taboo_p[m].mul_series(&solution[r - m]);
            f = f.add_series(&term.scaled(binomial(r, m)));
        }
        let x: EpsSeries<Vector> = u.mul_series(&f);
        solution.push(x.truncated(f.order()));
        forcing.push(f);
    }
    SolvedSeries {
        base,
        forcing,
        solution,
    }
}

/// Builds the hitting expansion for target `j` and, for every `s` in
/// `occupied`, the occupation expansion.
pub fn hitting_expansion(
    model: &SemiMarkovModel,
    rho: f64,
    j: usize,
    occupied: &[usize],
    k: usize,
    with_phi: bool,
) -> Result<ExpansionTable> {
    check_state(model, j)?;
    for &s in occupied {
        check_state(model, s)?;
    }
    let full: Vec<EpsSeries<Mat>> = (0..=k)
        .map(|r| kernel_moment_series(model.kernel(), rho, r, k - r))
        .collect();
    let taboo = BTreeSet::from([j]);
    let taboo_p: Vec<EpsSeries<Mat>> = full.iter().map(|s| s.map(|m| taboo_block(m, &taboo))).collect();
    let u = inverse_expansion(&taboo_p[0], k).map_err(|e| match e {
        Error::SingularAtZero(reason) => Error::SingularAtZero(format!("target {j}, rho {rho}: {reason}")),
        other => other,
    })?;

    let phi = with_phi.then(|| {
        let base = full.iter().map(|s| s.map(|m| m.column(j).into_owned())).collect();
        solve_series(&taboo_p, &u, base)
    });

    let sojourn = (!occupied.is_empty()).then(|| varphi_expansion(model, rho, k));
    let n_states = model.n_states();
    let omega = occupied
        .iter()
        .map(|&s| {
            let varphi = &sojourn.as_ref().expect("built when occupied is non-empty").varphi[s - 1];
            let base = varphi
                .iter()
                .map(|series| {
                    series.map(|&c| {
                        let mut v = Vector::zeros(n_states);
                        v[s - 1] = c;
                        v
                    })
                })
                .collect();
            (s, solve_series(&taboo_p, &u, base))
        })
        .collect();

    Ok(ExpansionTable {
        rho,
        target: j,
        k,
        taboo_p,
        u,
        phi,
        omega,
        sojourn,
    })
}

/// Expansions of `Phi_j[rho, r, n]` for `r = 0..=k`, `n = 0..=k-r`.
pub fn phi_expansion(model: &SemiMarkovModel, rho: f64, j: usize, k: usize) -> Result<ExpansionTable> {
    hitting_expansion(model, rho, j, &[], k, true)
}

/// Expansions of `omega_js[rho, r, n]` (alongside `Phi_j`).
pub fn omega_expansion(model: &SemiMarkovModel, rho: f64, j: usize, s: usize, k: usize) -> Result<ExpansionTable> {
    hitting_expansion(model, rho, j, &[s], k, true)
}

/// Order-by-order residuals of the defining systems.
///
/// Entry `[r][n]` is `||res[n]||_inf / (1 + ||X[r][n]||_inf)` where
/// `res = X[r] - b[r] - sum_{m=1..r} C(r,m) jP[m] X[r-m] - jP[0] X[r]`
/// is formed with truncated series products.
pub fn order_residuals(table: &ExpansionTable, solved: &SolvedSeries) -> Vec<Vec<f64>> {
    let x = &solved.solution;
    (0..x.len())
        .map(|r| {
            let mut rhs = solved.base[r].add_series(&table.taboo_p[0].mul_series(&x[r]));
            for m in 1..=r {
                let term: EpsSeries<Vector> = table.taboo_p[m].mul_series(&x[r - m]);
                rhs = rhs.add_series(&term.scaled(binomial(r, m)));
            }
            let res = x[r].sub_series(&rhs);
            res.coeffs()
                .iter()
                .zip(x[r].coeffs())
                .map(|(d, v)| vec_inf_norm(d) / (1.0 + vec_inf_norm(v)))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{m1, m2, three_state};
    use crate::hitting::{solve_hitting, solve_phi};
    use crate::model::{EpsPoly, PerturbedKernel};
    use crate::moments::sojourn_moments;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn assert_coeffs(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len(), "{actual:?} vs {expected:?}");
        for (a, e) in actual.iter().zip(expected) {
            assert!(close(*a, *e, tol), "{actual:?} vs {expected:?}");
        }
    }

    fn entry(series: &EpsSeries<Vector>, i: usize) -> Vec<f64> {
        series.coeffs().iter().map(|v| v[i - 1]).collect()
    }

    #[test]
    fn p_expansion_examples() {
        let p = p_expansion(&m1(), 0.0, 0, 2).unwrap();
        assert_coeffs(&p.coeffs().iter().map(|m| m[(0, 1)]).collect::<Vec<_>>(), &[0.5, -1.0, 0.0], 1e-15);

        let e = 0.1f64.exp();
        let p = p_expansion(&m2(), 0.1, 0, 1).unwrap();
        assert_coeffs(&p.coeffs().iter().map(|m| m[(1, 1)]).collect::<Vec<_>>(), &[e, -e], 1e-15);

        let p = p_expansion(&m1(), 0.2, 1, 1).unwrap();
        assert_eq!(p.order(), 0);
        assert!(close(p.coeff(0)[(0, 1)], 0.5 * 0.2f64.exp(), 1e-15));

        assert!(p_expansion(&m1(), 0.0, 3, 2).is_err());
    }

    #[test]
    fn inverse_expansion_examples() {
        // M2 with target 1: jP has no eps dependence.
        for rho in [0.0, 0.3, -0.4] {
            let table = phi_expansion(&m2(), rho, 1, 2).unwrap();
            let u = &table.u;
            let expected = Mat::from_row_slice(2, 2, &[1.0, rho.exp(), 0.0, 1.0]);
            assert!((u.coeff(0) - expected).amax() < 1e-14);
            assert!(u.coeff(1).amax() == 0.0 && u.coeff(2).amax() == 0.0);
        }

        // 1x1: P = p0 + p1 eps.
        let (p0, p1) = (0.3, 0.2);
        let p = EpsSeries::new(vec![Mat::from_element(1, 1, p0), Mat::from_element(1, 1, p1)]);
        let u = inverse_expansion(&p, 1).unwrap();
        assert!(close(u.coeff(0)[(0, 0)], 1.0 / (1.0 - p0), 1e-15));
        assert!(close(u.coeff(1)[(0, 0)], p1 / (1.0 - p0).powi(2), 1e-15));

        // Not invertible at eps = 0.
        let p = EpsSeries::new(vec![Mat::from_element(1, 1, 1.0)]);
        assert!(matches!(inverse_expansion(&p, 0), Err(Error::SingularAtZero(_))));
    }

    #[test]
    fn inverse_identity_on_three_state() {
        let model = three_state();
        for j in 1..=3 {
            for rho in [0.0, 0.2] {
                let table = phi_expansion(&model, rho, j, 3).unwrap();
                let res = inverse_identity_residuals(&table.taboo_p[0], &table.u);
                assert_eq!(res.len(), 4);
                assert!(res.iter().all(|r| *r < 1e-12), "{res:?}");
            }
        }
    }

    #[test]
    fn phi_expansion_examples() {
        let table = phi_expansion(&m2(), 0.1, 1, 1).unwrap();
        let e = 0.2f64.exp();
        assert_coeffs(&entry(&table.phi.as_ref().unwrap().solution[0], 1), &[e, -e], 1e-14);

        let table = phi_expansion(&m1(), 0.0, 1, 2).unwrap();
        assert_coeffs(&entry(&table.phi.as_ref().unwrap().solution[0], 1), &[0.5, -1.0, 0.0], 1e-14);

        // k = 0 reproduces the unperturbed solve.
        let model = three_state();
        for j in 1..=3 {
            let table = phi_expansion(&model, 0.3, j, 0).unwrap();
            let direct = solve_phi(&model, 0.0, 0.3, j, 0).unwrap();
            let sol = &table.phi.unwrap().solution[0];
            assert_eq!(sol.order(), 0);
            assert!((sol.coeff(0) - &direct.phi[0]).amax() < 1e-10);
        }
    }

    #[test]
    fn tables_are_triangular_with_unperturbed_leading_terms() {
        let model = three_state();
        let k = 3;
        for rho in [0.0, -0.5, 0.25] {
            let table = omega_expansion(&model, rho, 2, 3, k).unwrap();
            let direct = solve_hitting(&model, 0.0, rho, 2, &[3], k, true).unwrap();
            let phi = table.phi.as_ref().unwrap();
            let omega = &table.omega[&3];
            for r in 0..=k {
                assert_eq!(phi.solution[r].coeffs().len(), k - r + 1);
                assert_eq!(omega.solution[r].coeffs().len(), k - r + 1);
                assert_eq!(phi.forcing[r].coeffs().len(), k - r + 1);
                assert!((phi.solution[r].coeff(0) - &direct.phi[r]).amax() < 1e-10);
                assert!((omega.solution[r].coeff(0) - &direct.omega[&3][r]).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn varphi_expansion_examples() {
        let e = 0.3f64.exp();
        let sj = varphi_expansion(&m1(), 0.3, 1);
        assert_coeffs(sj.psi[0][0].coeffs(), &[e, 0.0], 1e-15);
        assert_coeffs(sj.varphi[0][0].coeffs(), &[1.0, 0.0], 1e-14);

        let sj = varphi_expansion(&m1(), 0.0, 1);
        assert_coeffs(sj.varphi[0][0].coeffs(), &[1.0, 0.0], 1e-15);

        // Q_11(1) = 1 - eps, Q_11(2) = eps: E kappa = 1 + eps.
        let mut kernel = PerturbedKernel::zeros(1, 2);
        kernel.set(1, 1, 1, EpsPoly::new(vec![1.0, -1.0]));
        kernel.set(1, 1, 2, EpsPoly::new(vec![0.0, 1.0]));
        let model = SemiMarkovModel::new("stretch", kernel, 0.5, 5).unwrap();
        let sj = varphi_expansion(&model, 0.0, 1);
        assert_coeffs(sj.varphi[0][0].coeffs(), &[1.0, 1.0], 1e-15);
    }

    #[test]
    fn varphi_leading_terms_match_concrete() {
        let model = three_state();
        for rho in [0.0, 0.4, -0.9] {
            let sj = varphi_expansion(&model, rho, 3);
            let direct = sojourn_moments(&model, 0.0, rho, 3).unwrap();
            for i in 0..3 {
                for r in 0..=3 {
                    assert_eq!(sj.varphi[i][r].order(), 3 - r);
                    assert!(close(*sj.varphi[i][r].coeff(0), direct.varphi[i][r], 1e-12));
                    assert!(close(*sj.psi[i][r].coeff(0), direct.psi[i][r], 1e-12));
                }
            }
        }
    }

    #[test]
    fn omega_expansion_examples() {
        for rho in [0.0, 0.4] {
            let table = omega_expansion(&m1(), rho, 1, 1, 2).unwrap();
            assert_coeffs(&entry(&table.omega[&1].solution[0], 1), &[1.0, 0.0, 0.0], 1e-14);
        }
        let table = omega_expansion(&m2(), 0.2, 1, 2, 1).unwrap();
        assert_coeffs(&entry(&table.omega[&2].solution[0], 1), &[0.2f64.exp(), 0.0], 1e-14);

        let model = three_state();
        let table = omega_expansion(&model, 0.1, 3, 1, 0).unwrap();
        let direct = solve_hitting(&model, 0.0, 0.1, 3, &[1], 0, false).unwrap();
        assert!((table.omega[&1].solution[0].coeff(0) - &direct.omega[&1][0]).amax() < 1e-10);
    }

    #[test]
    fn order_residuals_vanish() {
        let model = three_state();
        for rho in [0.0, 0.2] {
            let table = omega_expansion(&model, rho, 1, 2, 3).unwrap();
            for solved in [table.phi.as_ref().unwrap(), &table.omega[&2]] {
                let res = order_residuals(&table, solved);
                for (r, row) in res.iter().enumerate() {
                    assert_eq!(row.len(), 3 - r + 1);
                    assert!(row.iter().all(|x| *x <= 1e-12), "r={r}: {row:?}");
                }
            }
        }
    }

    #[test]
    fn polynomial_models_have_zero_remainder() {
        // M1 and M2 hitting functionals are polynomials of degree <= 1 in eps.
        for (model, j, rho) in [(m1(), 1, 0.3), (m2(), 1, 0.1), (m2(), 2, -0.2)] {
            // k = 3 keeps every r <= 2 table at order >= 1.
            let table = phi_expansion(&model, rho, j, 3).unwrap();
            let phi = table.phi.unwrap();
            for eps in [0.05, 0.1] {
                let direct = solve_phi(&model, eps, rho, j, 2).unwrap();
                for r in 0..=2 {
                    let approx = phi.solution[r].eval(eps);
                    assert!((approx - &direct.phi[r]).amax() <= 1e-10, "r={r} eps={eps}");
                }
            }
        }
    }

    #[test]
    fn series_evaluation_tracks_concrete_solution() {
        // Remainder of a k-th order expansion shrinks like eps^{k+1}.
        let model = three_state();
        let k = 2;
        let table = phi_expansion(&model, 0.1, 1, k).unwrap();
        let sol = &table.phi.as_ref().unwrap().solution[0];
        let rem = |eps: f64| {
            let direct = solve_phi(&model, eps, 0.1, 1, 0).unwrap();
            (sol.eval(eps) - &direct.phi[0]).amax()
        };
        let h = model.eps_max() / 8.0;
        let ratio = rem(h) / rem(h / 2.0);
        assert!(ratio > 4.0 && ratio < 16.0, "ratio {ratio}");
    }
}
