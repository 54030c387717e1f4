//! First-hitting functionals at a concrete `eps`.
//!
//! For a target `j != 0` the vectors `Phi_j(rho, r)` (indexed by the start
//! state) solve
//!
//! ```text
//! Phi_j(rho, 0) = p_j(rho, 0) + jP(rho) Phi_j(rho, 0)
//! Phi_j(rho, r) = lambda_j(rho, r) + jP(rho) Phi_j(rho, r)
//! lambda_j(rho, r) = p_j(rho, r) + sum_{m=1..r} C(r, m) jP(rho, m) Phi_j(rho, r - m)
//! ```
//!
//! where `jP` is the `N x N` moment matrix with column `j` zeroed. The
//! occupation functionals `omega_js(rho, r)` solve the same systems with the
//! forcing `delta(i, s) varphi_i(rho, r)` in place of `p_j(rho, r)`. One LU
//! factorization of `I - jP(rho)` serves every order `r`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{neumann_probe, vec_inf_norm, Factorization, Mat, NeumannProbe, Vector};
use crate::model::{ConcreteKernel, SemiMarkovModel};
use crate::moments::{binomial, check_states, kernel_moments, sojourn_from_kernel, taboo_block};

/// `Phi_j(rho, r)` and `omega_js(rho, r)` for one target `j`. Vectors are
/// indexed by start state `i - 1`; the outer index is `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingMoments {
    pub rho: f64,
    pub target: usize,
    pub max_order: usize,
    pub phi: Vec<Vector>,
    pub omega: BTreeMap<usize, Vec<Vector>>,
}

/// Whether the Neumann series `I + jP + jP^2 + ...` converges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitenessReport {
    pub invertible: bool,
    /// `||jP^m||_inf^{1/m}` at the last power examined.
    pub spectral_radius_proxy: f64,
    /// `||jP^m||_inf` at the last power examined.
    pub power_norm: f64,
    /// Power `m` at which `||jP^m||_inf` fell below one (0 if it never did).
    pub neumann_terms: usize,
    pub min_pivot: f64,
    /// `||(I - jP) x - 1||_inf` for the LU solution `x` of `(I - jP) x = 1`.
    pub lu_residual: f64,
}

impl FinitenessReport {
    fn from_parts(probe: &NeumannProbe, factor: &Factorization, block: &Mat) -> Self {
        let n = block.nrows();
        let ones = Vector::from_element(n, 1.0);
        let x = factor.solve(&ones);
        let residual = (Mat::identity(n, n) - block) * &x - &ones;
        Self {
            invertible: probe.decays() && !factor.is_singular(),
            spectral_radius_proxy: probe.spectral_radius_proxy(),
            power_norm: probe.power_norm,
            neumann_terms: probe.decay_power.unwrap_or(0),
            min_pivot: factor.min_pivot(),
            lu_residual: vec_inf_norm(&residual),
        }
    }
}

/// The factorized taboo system for one `(eps, rho, taboo set)`.
#[derive(Debug, Clone)]
pub(crate) struct TabooSystem {
    /// Full moment matrices `p(rho, r)`, `N x (N+1)`, for `r = 0..=max_order`.
    pub full: Vec<Mat>,
    /// `jP(rho, r)` with the taboo columns zeroed.
    pub block: Vec<Mat>,
    pub factor: Factorization,
    pub report: FinitenessReport,
}

impl TabooSystem {
    pub fn new(kernel: &ConcreteKernel, rho: f64, taboo: &BTreeSet<usize>, max_order: usize) -> Self {
        let full: Vec<Mat> = (0..=max_order)
            .map(|r| kernel_moments(kernel, rho, r as u32))
            .collect();
        let block: Vec<Mat> = full.iter().map(|m| taboo_block(m, taboo)).collect();
        let probe = neumann_probe(&block[0]);
        let factor = Factorization::of_identity_minus(&block[0]);
        let report = FinitenessReport::from_parts(&probe, &factor, &block[0]);
        Self {
            full,
            block,
            factor,
            report,
        }
    }

    pub fn ensure_finite(&self, target: usize, rho: f64) -> Result<()> {
        if self.report.invertible {
            return Ok(());
        }
        let reason = if self.factor.is_singular() {
            format!("I - jP is singular (min pivot {:.3e})", self.report.min_pivot)
        } else {
            format!(
                "Neumann series does not decay (spectral radius proxy {:.6})",
                self.report.spectral_radius_proxy
            )
        };
        Err(Error::NotFinite { target, rho, reason })
    }

    /// Solves `x_r = base_r + sum_{m=1..r} C(r,m) jP(m) x_{r-m} + jP x_r`
    /// for `r = 0..base.len()`.
    pub fn solve_recursive(&self, base: &[Vector]) -> Vec<Vector> {
        let mut sol: Vec<Vector> = Vec::with_capacity(base.len());
        for (r, b) in base.iter().enumerate() {
            let mut forcing = b.clone();
            for m in 1..=r {
                forcing += binomial(r, m) * (&self.block[m] * &sol[r - m]);
            }
            sol.push(self.factor.solve(&forcing));
        }
        sol
    }

    /// Column `j` of `p(rho, r)` for each order.
    pub fn column(&self, j: usize) -> Vec<Vector> {
        self.full.iter().map(|m| m.column(j).into_owned()).collect()
    }
}

fn check_target(model: &SemiMarkovModel, j: usize) -> Result<()> {
    if j == 0 || j > model.n_states() {
        return Err(Error::InvalidArgument(format!(
            "target state {j} is not in 1..={}",
            model.n_states()
        )));
    }
    Ok(())
}

pub fn finiteness_check(model: &SemiMarkovModel, eps: f64, rho: f64, j: usize) -> Result<FinitenessReport> {
    check_target(model, j)?;
    let kernel = model.eval_kernel(eps)?;
    Ok(TabooSystem::new(&kernel, rho, &BTreeSet::from([j]), 0).report)
}

/// `Phi_j(rho, r)` for `r = 0..=max_order`.
pub fn solve_phi(model: &SemiMarkovModel, eps: f64, rho: f64, j: usize, max_order: usize) -> Result<HittingMoments> {
    check_target(model, j)?;
    let kernel = model.eval_kernel(eps)?;
    let system = TabooSystem::new(&kernel, rho, &BTreeSet::from([j]), max_order);
    system.ensure_finite(j, rho)?;
    Ok(HittingMoments {
        rho,
        target: j,
        max_order,
        phi: system.solve_recursive(&system.column(j)),
        omega: BTreeMap::new(),
    })
}

/// `omega_js(rho, r)` for `r = 0..=max_order`.
pub fn solve_omega(
    model: &SemiMarkovModel,
    eps: f64,
    rho: f64,
    j: usize,
    s: usize,
    max_order: usize,
) -> Result<HittingMoments> {
    check_target(model, s)?;
    let mut all = solve_hitting(model, eps, rho, j, &[s], max_order, false)?;
    all.phi.clear();
    Ok(all)
}

/// `Phi_j` and `omega_js` for every `s` in `occupied`, sharing one
/// factorization.
pub fn solve_hitting(
    model: &SemiMarkovModel,
    eps: f64,
    rho: f64,
    j: usize,
    occupied: &[usize],
    max_order: usize,
    with_phi: bool,
) -> Result<HittingMoments> {
    check_target(model, j)?;
    for &s in occupied {
        check_target(model, s)?;
    }
    let kernel = model.eval_kernel(eps)?;
    let system = TabooSystem::new(&kernel, rho, &BTreeSet::from([j]), max_order);
    system.ensure_finite(j, rho)?;
    let phi = if with_phi {
        system.solve_recursive(&system.column(j))
    } else {
        Vec::new()
    };
    let sojourn = sojourn_from_kernel(&kernel, rho, max_order);
    let n = model.n_states();
    let omega = occupied
        .iter()
        .map(|&s| {
            let base: Vec<Vector> = (0..=max_order)
                .map(|r| {
                    let mut v = Vector::zeros(n);
                    v[s - 1] = sojourn.varphi[s - 1][r];
                    v
                })
                .collect();
            (s, system.solve_recursive(&base))
        })
        .collect();
    Ok(HittingMoments {
        rho,
        target: j,
        max_order,
        phi,
        omega,
    })
}

/// `_T phi_ij(rho) = E_i e^{rho mu_j} chi(nu_0 and nu_t for t in T all exceed
/// nu_j)`, indexed by start state `i - 1`.
pub fn taboo_phi(model: &SemiMarkovModel, eps: f64, rho: f64, j: usize, taboo: &BTreeSet<usize>) -> Result<Vector> {
    check_target(model, j)?;
    check_states(model, taboo)?;
    if taboo.contains(&j) {
        return Err(Error::InvalidArgument(format!("target {j} is in the taboo set")));
    }
    let kernel = model.eval_kernel(eps)?;
    let mut columns = taboo.clone();
    columns.insert(j);
    let system = TabooSystem::new(&kernel, rho, &columns, 0);
    system.ensure_finite(j, rho)?;
    Ok(system.factor.solve(&system.full[0].column(j).into_owned()))
}

/// Hypothesis slack on `phi_ii(rho) <= 1` for the solidarity relation.
const SOLIDARITY_HYPOTHESIS_TOL: f64 = 1e-9;

/// `(1 - phi_ii)(1 - _i phi_jj) - (1 - phi_jj)(1 - _j phi_ii)`, valid when
/// `phi_ii(rho) <= 1`.
pub fn solidarity_residual(model: &SemiMarkovModel, eps: f64, rho: f64, i: usize, j: usize) -> Result<f64> {
    check_target(model, i)?;
    check_target(model, j)?;
    if i == j {
        return Ok(0.0);
    }
    let phi_ii = solve_phi(model, eps, rho, i, 0)?.phi[0][i - 1];
    if phi_ii > 1.0 + SOLIDARITY_HYPOTHESIS_TOL {
        return Err(Error::InvalidArgument(format!(
            "solidarity relation needs phi_ii(rho) <= 1, got phi_{i}{i}({rho}) = {phi_ii}"
        )));
    }
    let phi_jj = solve_phi(model, eps, rho, j, 0)?.phi[0][j - 1];
    let i_phi_jj = taboo_phi(model, eps, rho, j, &BTreeSet::from([i]))?[j - 1];
    let j_phi_ii = taboo_phi(model, eps, rho, i, &BTreeSet::from([j]))?[i - 1];
    Ok((1.0 - phi_ii) * (1.0 - i_phi_jj) - (1.0 - phi_jj) * (1.0 - j_phi_ii))
}

/// `E_i e^{rho (mu_0 ^ mu_j)} = sum_k U_ik (p_kj(rho) + p_k0(rho))` with
/// `U = (I - jP(rho))^{-1}`.
pub fn exp_exit_moment(model: &SemiMarkovModel, eps: f64, rho: f64, j: usize) -> Result<Vector> {
    check_target(model, j)?;
    let kernel = model.eval_kernel(eps)?;
    let system = TabooSystem::new(&kernel, rho, &BTreeSet::from([j]), 0);
    system.ensure_finite(j, rho)?;
    let exits = system.full[0].column(j) + system.full[0].column(0);
    Ok(system.factor.solve(&exits))
}

/// `omega_ij(rho) = sum_n e^{rho n} P_i{mu_0 ^ mu_j > n}`, reconstructed from
/// the exit-time transform: `E_i (mu_0 ^ mu_j)` at `rho = 0`, otherwise
/// `(E_i e^{rho (mu_0 ^ mu_j)} - 1) / (e^rho - 1)`.
pub fn occupation_total(model: &SemiMarkovModel, eps: f64, rho: f64, j: usize) -> Result<Vector> {
    check_target(model, j)?;
    let kernel = model.eval_kernel(eps)?;
    let zero = crate::moments::is_zero_rho(rho);
    let order = usize::from(zero);
    let rho_eff = if zero { 0.0 } else { rho };
    let system = TabooSystem::new(&kernel, rho_eff, &BTreeSet::from([j]), order);
    system.ensure_finite(j, rho)?;
    let exits: Vec<Vector> = system
        .full
        .iter()
        .map(|m| m.column(j) + m.column(0))
        .collect();
    let transform = system.solve_recursive(&exits);
    if zero {
        Ok(transform[1].clone())
    } else {
        Ok(transform[0].map(|e| (e - 1.0) / rho.exp_m1()))
    }
}
