//! Cross-checks between the solvers, the expansions and the oracles.
//!
//! Every check reports a worst-case residual and the tolerance it was held
//! to. A check that cannot be evaluated (a solve failed) is reported as a
//! failure with an infinite residual and the error text.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansions::{hitting_expansion, inverse_identity_residuals, order_residuals, ExpansionTable};
use crate::hitting::{finiteness_check, occupation_total, solidarity_residual, solve_hitting, solve_omega, solve_phi, taboo_phi};
use crate::linalg::{vec_inf_norm, Mat, Vector};
use crate::model::{validate_conditions, SemiMarkovModel};
use crate::moments::{kernel_moments, taboo_block};
use crate::oracle::{certified_moment, default_fit_step, dp_g, dp_h, fd_expansion_coeffs, renewal_residual};
use crate::root::characteristic_root;

/// Slack on top of the oracle's tail bound.
pub const ORACLE_SLACK: f64 = 1e-9;
/// Relative error allowed between derivative systems and finite differences.
pub const FD_REL_TOL: f64 = 1e-6;
/// Coarse step for the extrapolated first central difference.
pub const FD_STEP_FIRST: f64 = 1e-4;
/// Coarse step for the extrapolated second central difference.
pub const FD_STEP_SECOND: f64 = 1e-3;
pub const EXPANSION_RESIDUAL_TOL: f64 = 1e-9;
pub const INVERSE_IDENTITY_TOL: f64 = 1e-10;
pub const FIT_REL_TOL: f64 = 1e-4;
/// Coefficients smaller than this fraction of the leading one (scaled by
/// `eps_max^n`) are compared on that scale rather than their own.
pub const FIT_FLOOR: f64 = 1e-3;
pub const SOLIDARITY_TOL: f64 = 1e-10;
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;
pub const RENEWAL_TOL: f64 = 1e-12;
pub const RENEWAL_HORIZON: usize = 50;
pub const OCCUPATION_TOL: f64 = 1e-10;
/// Default expansion order used by [`verify_model`].
pub const DEFAULT_VERIFY_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: residual <= tolerance,
            residual,
            tolerance,
            detail: None,
        }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, err: &Error) -> Self {
        Self {
            name: name.into(),
            pass: false,
            residual: f64::INFINITY,
            tolerance,
            detail: Some(err.to_string()),
        }
    }

    fn from_result(name: &str, tolerance: f64, res: Result<f64>) -> Self {
        match res {
            Ok(residual) => Self::new(name, residual, tolerance),
            Err(e) => Self::failed(name, tolerance, &e),
        }
    }
}

/// `||a - b|| / max(||b||, ||base||)`. The base value keeps structurally
/// zero derivatives (an `omega` that does not depend on `rho`) from turning
/// rounding noise into a huge relative error.
fn fd_err(a: &Vector, b: &Vector, base: &Vector) -> f64 {
    let scale = vec_inf_norm(b).max(vec_inf_norm(base));
    let diff = vec_inf_norm(&(a - b));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn rel_err(a: &Vector, b: &Vector) -> f64 {
    let scale = vec_inf_norm(b);
    let diff = vec_inf_norm(&(a - b));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Worst `|linear system - oracle sum| - tail_bound` over targets `j`,
/// occupied states `s` and `r <= max_order`.
pub fn oracle_excess(model: &SemiMarkovModel, eps: f64, rho: f64, max_order: usize) -> Result<f64> {
    let n = model.n_states();
    let states: Vec<usize> = (1..=n).collect();
    let mut worst = f64::NEG_INFINITY;
    for j in 1..=n {
        let solved = solve_hitting(model, eps, rho, j, &states, max_order, true)?;
        for r in 0..=max_order {
            let g = certified_moment(|n_max| dp_g(model, eps, j, n_max), rho, r as u32)?;
            let diff = vec_inf_norm(&(Vector::from_vec(g.values) - &solved.phi[r]));
            worst = worst.max(diff - g.tail_bound);
            for &s in &states {
                let h = certified_moment(|n_max| dp_h(model, eps, j, s, n_max), rho, r as u32)?;
                let diff = vec_inf_norm(&(Vector::from_vec(h.values) - &solved.omega[&s][r]));
                worst = worst.max(diff - h.tail_bound);
            }
        }
    }
    Ok(worst)
}

/// `r = 0` solutions for target `j`: `Phi_j` followed by `omega_js` for
/// every `s`, or the order-`r` derivatives when `order = r`.
fn stacked_solutions(model: &SemiMarkovModel, eps: f64, rho: f64, j: usize, order: usize) -> Result<Vec<Vec<Vector>>> {
    let states: Vec<usize> = (1..=model.n_states()).collect();
    let solved = solve_hitting(model, eps, rho, j, &states, order, true)?;
    let mut out = vec![solved.phi];
    out.extend(states.iter().map(|s| solved.omega[s].clone()));
    Ok(out)
}

/// Central differences in `rho` of the `r = 0` solutions, Richardson
/// extrapolated from steps `h` and `h / 2` so the truncation error is
/// `O(h^4)`.
fn richardson_derivative(
    at: &mut impl FnMut(f64) -> Result<Vec<Vector>>,
    rho: f64,
    mid: &[Vector],
    h: f64,
    second: bool,
) -> Result<Vec<Vector>> {
    let mut estimate = |h: f64| -> Result<Vec<Vector>> {
        let (up, dn) = (at(rho + h)?, at(rho - h)?);
        Ok(up
            .iter()
            .zip(&dn)
            .zip(mid)
            .map(|((u, d), m)| if second { (u - 2.0 * m + d) / (h * h) } else { (u - d) / (2.0 * h) })
            .collect())
    };
    let (coarse, fine) = (estimate(h)?, estimate(0.5 * h)?);
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// Worst normwise error of `Phi(rho, 1)`, `omega(rho, 1)` against a central
/// first difference of the `r = 0` solution, and of `r = 2` against a
/// central second difference, relative to the larger of the derivative and
/// the `r = 0` value.
pub fn derivative_fd_error(model: &SemiMarkovModel, eps: f64, rho: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 1..=model.n_states() {
        let exact = stacked_solutions(model, eps, rho, j, 2)?;
        let mid: Vec<Vector> = exact.iter().map(|v| v[0].clone()).collect();
        let mut at = |rho: f64| -> Result<Vec<Vector>> {
            Ok(stacked_solutions(model, eps, rho, j, 0)?.into_iter().map(|mut v| v.swap_remove(0)).collect())
        };
        let first = richardson_derivative(&mut at, rho, &mid, FD_STEP_FIRST, false)?;
        let second = richardson_derivative(&mut at, rho, &mid, FD_STEP_SECOND, true)?;
        for (idx, family) in exact.iter().enumerate() {
            worst = worst.max(fd_err(&first[idx], &family[1], &family[0]));
            worst = worst.max(fd_err(&second[idx], &family[2], &family[0]));
        }
    }
    Ok(worst)
}

/// `max_j ||sum_s omega_js(rho) - omega_j(rho)||` relative, where the total
/// comes from the exit-time transform.
pub fn occupation_sum_error(model: &SemiMarkovModel, eps: f64, rho: f64) -> Result<f64> {
    let n = model.n_states();
    let states: Vec<usize> = (1..=n).collect();
    let mut worst: f64 = 0.0;
    for j in 1..=n {
        let solved = solve_hitting(model, eps, rho, j, &states, 0, false)?;
        let sum = states
            .iter()
            .fold(Vector::zeros(n), |acc, s| acc + &solved.omega[s][0]);
        worst = worst.max(rel_err(&sum, &occupation_total(model, eps, rho, j)?));
    }
    Ok(worst)
}

/// Worst solidarity residual over `i != j` at each `rho` in `rhos`.
pub fn solidarity_error(model: &SemiMarkovModel, eps: f64, rhos: &[f64]) -> Result<f64> {
    let n = model.n_states();
    let mut worst: f64 = 0.0;
    for &rho in rhos {
        for i in 1..=n {
            for j in 1..=n {
                if i != j {
                    worst = worst.max(solidarity_residual(model, eps, rho, i, j)?.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `max |(1 - phi_jj)(1 - _j phi_ii)|` at the characteristic root.
pub fn degenerate_solidarity_error(model: &SemiMarkovModel, eps: f64, root: f64) -> Result<f64> {
    let n = model.n_states();
    let mut worst: f64 = 0.0;
    for j in 1..=n {
        let phi_jj = solve_phi(model, eps, root, j, 0)?.phi[0][j - 1];
        for i in (1..=n).filter(|&i| i != j) {
            let j_phi_ii = taboo_phi(model, eps, root, i, &BTreeSet::from([j]))?[i - 1];
            worst = worst.max(((1.0 - phi_jj) * (1.0 - j_phi_ii)).abs());
        }
    }
    Ok(worst)
}

/// Expansion tables for every target, with every state occupied.
pub fn all_expansions(model: &SemiMarkovModel, rho: f64, k: usize) -> Result<Vec<ExpansionTable>> {
    let states: Vec<usize> = (1..=model.n_states()).collect();
    states
        .iter()
        .map(|&j| hitting_expansion(model, rho, j, &states, k, true))
        .collect()
}

/// Worst order-by-order residual over all tables.
pub fn expansion_residual(tables: &[ExpansionTable]) -> f64 {
    let mut worst: f64 = 0.0;
    for table in tables {
        let families = table.phi.iter().chain(table.omega.values());
        for solved in families {
            for row in order_residuals(table, solved) {
                worst = row.into_iter().fold(worst, f64::max);
            }
        }
    }
    worst
}

/// Worst coefficient of `sum_q (I delta_q0 - P[q]) U[n - q] - delta_n0 I`.
pub fn inverse_identity_error(tables: &[ExpansionTable]) -> f64 {
    tables
        .iter()
        .flat_map(|t| inverse_identity_residuals(&t.taboo_p[0], &t.u))
        .fold(0.0, f64::max)
}

/// Relative error of a fitted coefficient vector against the recursion.
/// Coefficients far below the leading one are measured against
/// `FIT_FLOOR scale / eps_max^n` instead of their own size, where `scale`
/// is the larger leading coefficient of `X[r]` and `X[0]`.
pub fn fit_coefficient_error(fitted: &Vector, exact: &Vector, scale: f64, n: usize, eps_max: f64) -> f64 {
    let floor = FIT_FLOOR * scale / eps_max.powi(n as i32);
    vec_inf_norm(&(fitted - exact)) / vec_inf_norm(exact).max(floor).max(f64::MIN_POSITIVE)
}

/// Worst relative error of the polynomial-fit oracle against the expansion
/// coefficients of every `Phi` and `omega` table.
pub fn expansion_fit_error(model: &SemiMarkovModel, tables: &[ExpansionTable]) -> Result<f64> {
    let step = default_fit_step(model.eps_max());
    let mut worst: f64 = 0.0;
    for table in tables {
        let (rho, j, k) = (table.rho, table.target, table.k);
        for r in 0..=k {
            let order = k - r;
            if let Some(phi) = &table.phi {
                let fit = fd_expansion_coeffs(|eps| Ok(solve_phi(model, eps, rho, j, r)?.phi.swap_remove(r)), order, step)?;
                let series = &phi.solution[r];
                let scale = vec_inf_norm(series.coeff(0)).max(vec_inf_norm(phi.solution[0].coeff(0)));
                for n in 0..=order {
                    let err = fit_coefficient_error(&fit.coeffs[n], series.coeff(n), scale, n, model.eps_max());
                    worst = worst.max(err);
                }
            }
            for (&s, omega) in &table.omega {
                let fit = fd_expansion_coeffs(
                    |eps| {
                        let mut h = solve_omega(model, eps, rho, j, s, r)?;
                        Ok(h.omega.remove(&s).expect("requested state").swap_remove(r))
                    },
                    order,
                    step,
                )?;
                let series = &omega.solution[r];
                let scale = vec_inf_norm(series.coeff(0)).max(vec_inf_norm(omega.solution[0].coeff(0)));
                for n in 0..=order {
                    let err = fit_coefficient_error(&fit.coeffs[n], series.coeff(n), scale, n, model.eps_max());
                    worst = worst.max(err);
                }
            }
        }
    }
    Ok(worst)
}

/// Spectral radius of `jP(rho)` from its eigenvalues.
pub fn taboo_spectral_radius(model: &SemiMarkovModel, eps: f64, rho: f64, j: usize) -> Result<f64> {
    let kernel = model.eval_kernel(eps)?;
    let block: Mat = taboo_block(&kernel_moments(&kernel, rho, 0), &BTreeSet::from([j]));
    Ok(block
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// The `rho` at which the spectral radius of `jP(rho)` reaches one, or
/// `None` if it stays below one up to `rho = 64`.
pub fn divergence_threshold(model: &SemiMarkovModel, eps: f64, j: usize) -> Result<Option<f64>> {
    const CEILING: f64 = 64.0;
    let radius = |rho: f64| taboo_spectral_radius(model, eps, rho, j);
    if radius(CEILING)? < 1.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (-CEILING, CEILING);
    if radius(lo)? >= 1.0 {
        return Ok(Some(lo));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radius(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Verdicts on the finiteness of the target-`j` functionals at `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinitenessVerdicts {
    /// Spectral radius of `jP(rho)` below one.
    pub spectral: bool,
    pub finiteness_check: bool,
    /// `solve_phi` returned nonnegative finite values (up to rounding).
    pub phi_bounded: bool,
    /// `solve_omega` returned nonnegative finite values for every `s`.
    pub omega_bounded: bool,
}

impl FinitenessVerdicts {
    pub fn agree(&self) -> bool {
        let v = self.spectral;
        self.finiteness_check == v && self.phi_bounded == v && self.omega_bounded == v
    }
}

/// Finite and nonnegative up to rounding in structurally zero entries.
fn bounded(v: &Vector) -> bool {
    let slack = 1e-12 * (1.0 + vec_inf_norm(v));
    v.iter().all(|x| x.is_finite() && *x >= -slack)
}

pub fn finiteness_verdicts(model: &SemiMarkovModel, eps: f64, rho: f64, j: usize) -> Result<FinitenessVerdicts> {
    let spectral = taboo_spectral_radius(model, eps, rho, j)? < 1.0;
    let finiteness = finiteness_check(model, eps, rho, j)?.invertible;
    let phi_bounded = match solve_phi(model, eps, rho, j, 0) {
        Ok(h) => bounded(&h.phi[0]),
        Err(Error::NotFinite { .. }) => false,
        Err(e) => return Err(e),
    };
    let mut omega_bounded = true;
    for s in 1..=model.n_states() {
        match solve_omega(model, eps, rho, j, s, 0) {
            Ok(h) => omega_bounded &= bounded(&h.omega[&s][0]),
            Err(Error::NotFinite { .. }) => omega_bounded = false,
            Err(e) => return Err(e),
        }
    }
    Ok(FinitenessVerdicts {
        spectral,
        finiteness_check: finiteness,
        phi_bounded,
        omega_bounded,
    })
}

/// Number of disagreements among the finiteness verdicts at
/// `rho* (1 - margin)` and `rho* (1 + margin)` for every target with a
/// finite threshold `rho*`.
pub fn finiteness_disagreements(model: &SemiMarkovModel, eps: f64, margin: f64) -> Result<usize> {
    let mut count = 0;
    for j in 1..=model.n_states() {
        if let Some(t) = divergence_threshold(model, eps, j)? {
            for rho in [t - margin * t.abs().max(1e-3), t + margin * t.abs().max(1e-3)] {
                if !finiteness_verdicts(model, eps, rho, j)?.agree() {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

/// Half the unperturbed characteristic root, or half the largest `rho`
/// seen finite when there is no root.
pub fn expansion_rho(model: &SemiMarkovModel) -> Result<f64> {
    match characteristic_root(model, 0.0, 1) {
        Ok(r) => Ok(0.5 * r.rho_root),
        Err(Error::NoRoot { delta_proxy, .. }) => Ok(0.5 * delta_proxy),
        Err(e) => Err(e),
    }
}

/// The full check suite on one model.
///
/// Concrete-`eps` checks run at `eps = eps_max / 2` with
/// `rho in {0, rho^(eps) / 2}`; expansions use order `k` at
/// [`expansion_rho`]. Without a root, half the largest `rho` seen finite
/// stands in for `rho^(eps) / 2`.
pub fn verify_model(model: &SemiMarkovModel, k: usize) -> Vec<Check> {
    let mut checks = Vec::new();
    let conditions = validate_conditions(model);
    checks.push(Check::new(
        "conditions",
        if conditions.all_hold() { 0.0 } else { 1.0 },
        0.0,
    ));

    let eps = model.eps_max() / 2.0;
    let rho_half = match characteristic_root(model, eps, 1) {
        Ok(r) => {
            checks.push(Check::new("root_residual", r.residual.abs(), ROOT_RESIDUAL_TOL));
            checks.push(Check::new("root_solidarity", r.solidarity_spread(), SOLIDARITY_TOL));
            checks.push(Check::from_result(
                "root_degenerate_solidarity",
                SOLIDARITY_TOL,
                degenerate_solidarity_error(model, eps, r.rho_root),
            ));
            0.5 * r.rho_root
        }
        Err(Error::NoRoot { delta_proxy, reason }) => {
            let mut check = Check::new("root_residual", 0.0, ROOT_RESIDUAL_TOL);
            check.detail = Some(format!("no root: {reason}"));
            checks.push(check);
            0.5 * delta_proxy
        }
        Err(e) => {
            checks.push(Check::failed("root_residual", ROOT_RESIDUAL_TOL, &e));
            0.0
        }
    };
    let rhos = [0.0, rho_half];

    let oracle = rhos
        .iter()
        .map(|&rho| oracle_excess(model, eps, rho, 2))
        .try_fold(f64::NEG_INFINITY, |acc, r| r.map(|v| acc.max(v)));
    checks.push(Check::from_result("oracle_equivalence", ORACLE_SLACK, oracle));

    let fd = rhos
        .iter()
        .map(|&rho| derivative_fd_error(model, eps, rho))
        .try_fold(0.0f64, |acc, r| r.map(|v| acc.max(v)));
    checks.push(Check::from_result("derivative_systems", FD_REL_TOL, fd));

    let occ = rhos
        .iter()
        .map(|&rho| occupation_sum_error(model, eps, rho))
        .try_fold(0.0f64, |acc, r| r.map(|v| acc.max(v)));
    checks.push(Check::from_result("occupation_sum", OCCUPATION_TOL, occ));

    checks.push(Check::from_result(
        "solidarity_relation",
        SOLIDARITY_TOL,
        solidarity_error(model, eps, &rhos),
    ));

    match expansion_rho(model).and_then(|rho| all_expansions(model, rho, k)) {
        Ok(tables) => {
            checks.push(Check::new(
                "expansion_residual",
                expansion_residual(&tables),
                EXPANSION_RESIDUAL_TOL,
            ));
            checks.push(Check::new(
                "inverse_identity",
                inverse_identity_error(&tables),
                INVERSE_IDENTITY_TOL,
            ));
            checks.push(Check::from_result(
                "expansion_fit",
                FIT_REL_TOL,
                expansion_fit_error(model, &tables),
            ));
        }
        Err(e) => checks.push(Check::failed("expansion_residual", EXPANSION_RESIDUAL_TOL, &e)),
    }

    let renewal = (1..=model.n_states())
        .map(|i| renewal_residual(model, eps, i, RENEWAL_HORIZON))
        .try_fold(0.0f64, |acc, r| r.map(|v| acc.max(v)));
    checks.push(Check::from_result("renewal_identity", RENEWAL_TOL, renewal));

    checks.push(match finiteness_disagreements(model, eps, 0.05) {
        Ok(count) => Check::new("finiteness_trichotomy", count as f64, 0.0),
        Err(e) => Check::failed("finiteness_trichotomy", 0.0, &e),
    });
    checks
}
