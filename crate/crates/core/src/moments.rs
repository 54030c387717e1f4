//! Power-exponential moments of the transition kernel and of the sojourn
//! time `kappa_1`, at a concrete `eps`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{ConcreteKernel, SemiMarkovModel};

/// `|rho|` below this takes the `rho = 0` branch of the sojourn functional.
pub const RHO_ZERO_TOL: f64 = 1e-12;

pub fn is_zero_rho(rho: f64) -> bool {
    rho.abs() < RHO_ZERO_TOL
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

/// `p_ij(rho, r) = sum_k k^r e^{rho k} Q_ij(k)` for `i = 1..N` (rows) and
/// `j = 0..N` (columns), with the columns in `taboo` zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    pub rho: f64,
    pub r: u32,
    pub entries: Mat,
    pub taboo: BTreeSet<usize>,
}

impl MomentMatrix {
    pub fn n_states(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i - 1, j)]
    }

    /// The `N x N` block over columns `1..N`.
    pub fn block(&self) -> Mat {
        let n = self.n_states();
        self.entries.columns(1, n).into_owned()
    }

    pub fn column(&self, j: usize) -> Vector {
        self.entries.column(j).into_owned()
    }
}

/// Full `N x (N+1)` moment matrix of a concrete kernel, no taboo.
pub fn kernel_moments(kernel: &ConcreteKernel, rho: f64, r: u32) -> Mat {
    let n = kernel.n_states();
    Mat::from_fn(n, n + 1, |row, j| kernel.moment(row + 1, j, rho, r))
}

/// The taboo block `jP(rho, r)`: columns `1..N` of `full` with the columns in
/// `taboo` set to zero.
pub fn taboo_block(full: &Mat, taboo: &BTreeSet<usize>) -> Mat {
    let n = full.nrows();
    let mut block = full.columns(1, n).into_owned();
    for &t in taboo {
        block.column_mut(t - 1).fill(0.0);
    }
    block
}

pub fn moment_p(
    model: &SemiMarkovModel,
    eps: f64,
    rho: f64,
    r: u32,
    taboo: &BTreeSet<usize>,
) -> Result<MomentMatrix> {
    check_states(model, taboo)?;
    let kernel = model.eval_kernel(eps)?;
    let mut entries = kernel_moments(&kernel, rho, r);
    for &t in taboo {
        entries.column_mut(t).fill(0.0);
    }
    Ok(MomentMatrix {
        rho,
        r,
        entries,
        taboo: taboo.clone(),
    })
}

pub(crate) fn check_states(model: &SemiMarkovModel, states: &BTreeSet<usize>) -> Result<()> {
    match states.iter().find(|&&s| s == 0 || s > model.n_states()) {
        Some(s) => Err(Error::InvalidArgument(format!(
            "state {s} is not in 1..={}",
            model.n_states()
        ))),
        None => Ok(()),
    }
}

/// Moments of the first sojourn: `psi_i(rho, r) = E_i kappa^r e^{rho kappa}`
/// and the derivatives `varphi_i(rho, r)` of
/// `varphi_i(rho) = (E_i e^{rho kappa} - 1) / (e^rho - 1)` (`E_i kappa` at 0).
///
/// Both are indexed `[i-1][r]` for `r = 0..=max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct SojournMoments {
    pub rho: f64,
    pub psi: Vec<Vec<f64>>,
    pub varphi: Vec<Vec<f64>>,
}

impl SojournMoments {
    pub fn max_order(&self) -> usize {
        self.psi.first().map_or(0, |row| row.len() - 1)
    }
}

pub fn sojourn_moments(
    model: &SemiMarkovModel,
    eps: f64,
    rho: f64,
    max_order: usize,
) -> Result<SojournMoments> {
    let kernel = model.eval_kernel(eps)?;
    Ok(sojourn_from_kernel(&kernel, rho, max_order))
}

/// `varphi` is summed as `sum_{n < k_max} n^r e^{rho n} P_i(kappa > n)`,
/// which is exact for a kernel of finite support. The quotient form
/// `(psi(rho, r) - e^rho sum_m C(r,m) varphi(rho, m)) / (e^rho - 1)` loses a
/// factor `1/rho` per order to cancellation when `rho` is small but nonzero.
pub(crate) fn sojourn_from_kernel(kernel: &ConcreteKernel, rho: f64, max_order: usize) -> SojournMoments {
    let n = kernel.n_states();
    let rho_eff = if is_zero_rho(rho) { 0.0 } else { rho };
    let k_max = kernel.k_max();
    let mut psi = Vec::with_capacity(n);
    let mut varphi = Vec::with_capacity(n);
    for i in 1..=n {
        psi.push(
            (0..=max_order)
                .map(|r| (0..=n).map(|j| kernel.moment(i, j, rho_eff, r as u32)).sum())
                .collect(),
        );
        // tail[t] = P_i(kappa > t), accumulated from the top.
        let mut tail = vec![0.0; k_max];
        let mut acc = 0.0;
        for t in (0..k_max).rev() {
            acc += kernel.sojourn_prob(i, t + 1);
            tail[t] = acc;
        }
        varphi.push(
            (0..=max_order)
                .map(|r| {
                    tail.iter()
                        .enumerate()
                        .map(|(t, p)| {
                            let weight = if r == 0 { 1.0 } else { (t as f64).powi(r as i32) };
                            weight * (rho_eff * t as f64).exp() * p
                        })
                        .sum()
                })
                .collect(),
        );
    }
    SojournMoments { rho, psi, varphi }
}
