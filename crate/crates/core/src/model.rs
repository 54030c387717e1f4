//! Perturbed semi-Markov models on the state space `{0, 1, ..., N}`.
//!
//! The kernel `Q_ij(k)` (probability of jumping from `i` to `j` after a
//! holding time of `k` steps) is given for `i = 1..N`, `j = 0..N` and
//! `k = 1..k_max` as an exact polynomial in the perturbation parameter `eps`.
//! Jump probabilities `p_ij = sum_k Q_ij(k)` and holding-time distributions
//! `f_ij(k) = Q_ij(k) / p_ij` are derived views.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};
use crate::hitting;

/// Tolerance on row sums and entry ranges during validation.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Default number of points in the validation grid over `[0, eps_max]`.
pub const DEFAULT_GRID_POINTS: usize = 5;

/// An exact polynomial `a_0 + a_1 eps + ... + a_m eps^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsPoly {
    coeffs: Vec<f64>,
}

impl EpsPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `eps^n`; zero past the stored degree.
    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, eps: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * eps + c)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

/// `Q_ij(k)` as polynomials in `eps`, for `i in 1..=N`, `j in 0..=N`,
/// `k in 1..=k_max`. `Q_ij(0) = 0` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedKernel {
    n_states: usize,
    k_max: usize,
    q: Vec<EpsPoly>,
}

impl PerturbedKernel {
    pub fn zeros(n_states: usize, k_max: usize) -> Self {
        Self {
            n_states,
            k_max,
            q: vec![EpsPoly::zero(); n_states * (n_states + 1) * k_max],
        }
    }

    /// Number of non-absorbing states `N`.
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!((1..=self.n_states).contains(&i));
        debug_assert!(j <= self.n_states);
        debug_assert!((1..=self.k_max).contains(&k));
        ((i - 1) * (self.n_states + 1) + j) * self.k_max + (k - 1)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &EpsPoly {
        &self.q[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, poly: EpsPoly) {
        let idx = self.index(i, j, k);
        self.q[idx] = poly;
    }

    /// Highest polynomial degree over all entries.
    pub fn max_order(&self) -> usize {
        self.q.iter().map(EpsPoly::order).max().unwrap_or(0)
    }

    /// Constant part of `p_ij`, i.e. the unperturbed jump probability.
    pub fn limiting_jump_prob(&self, i: usize, j: usize) -> f64 {
        (1..=self.k_max).map(|k| self.get(i, j, k).coeff(0)).sum()
    }
}

/// A validated perturbed semi-Markov model.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiMarkovModel {
    kernel: PerturbedKernel,
    eps_max: f64,
    label: String,
}

/// On-disk layout of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub label: String,
    pub n_states: usize,
    pub k_max: usize,
    pub eps_max: f64,
    #[serde(default)]
    pub entries: Vec<KernelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub coeffs: Vec<f64>,
}

impl SemiMarkovModel {
    pub fn from_model_file(file: ModelFile) -> Result<Self> {
        Self::from_model_file_with_grid(file, DEFAULT_GRID_POINTS)
    }

    pub fn from_model_file_with_grid(file: ModelFile, grid_points: usize) -> Result<Self> {
        if file.n_states == 0 {
            return Err(ValidationError::Header("n_states must be at least 1".into()).into());
        }
        if file.k_max == 0 {
            return Err(ValidationError::Header("k_max must be at least 1".into()).into());
        }
        if !(file.eps_max.is_finite() && file.eps_max > 0.0) {
            return Err(ValidationError::Header(format!(
                "eps_max must be positive and finite, got {}",
                file.eps_max
            ))
            .into());
        }
        let mut kernel = PerturbedKernel::zeros(file.n_states, file.k_max);
        let mut seen = BTreeSet::new();
        for e in file.entries {
            let (i, j, k) = (e.i, e.j, e.k);
            if i == 0 || i > file.n_states || j > file.n_states || k == 0 || k > file.k_max {
                return Err(ValidationError::IndexOutOfBounds {
                    i,
                    j,
                    k,
                    n_states: file.n_states,
                    k_max: file.k_max,
                }
                .into());
            }
            if !seen.insert((i, j, k)) {
                return Err(ValidationError::DuplicateEntry { i, j, k }.into());
            }
            if e.coeffs.is_empty() || e.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(ValidationError::BadCoefficients { i, j, k }.into());
            }
            kernel.set(i, j, k, EpsPoly::new(e.coeffs));
        }
        Self::new(file.label, kernel, file.eps_max, grid_points)
    }

    /// Builds a model from an in-memory kernel, validating it on a grid of
    /// `grid_points` equally spaced values of `eps` in `[0, eps_max]`.
    pub fn new(
        label: impl Into<String>,
        kernel: PerturbedKernel,
        eps_max: f64,
        grid_points: usize,
    ) -> Result<Self> {
        if grid_points < DEFAULT_GRID_POINTS {
            return Err(Error::InvalidArgument(format!(
                "validation grid needs at least {DEFAULT_GRID_POINTS} points, got {grid_points}"
            )));
        }
        let model = Self {
            kernel,
            eps_max,
            label: label.into(),
        };
        model.check_grid(&validation_grid(eps_max, grid_points))?;
        Ok(model)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json_str_with_grid(text, DEFAULT_GRID_POINTS)
    }

    pub fn from_json_str_with_grid(text: &str, grid_points: usize) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_model_file_with_grid(file, grid_points)
    }

    pub fn to_model_file(&self) -> ModelFile {
        let n = self.n_states();
        let mut entries = Vec::new();
        for i in 1..=n {
            for j in 0..=n {
                for k in 1..=self.k_max() {
                    let poly = self.kernel.get(i, j, k);
                    if !poly.is_zero() {
                        entries.push(KernelEntry {
                            i,
                            j,
                            k,
                            coeffs: poly.coeffs().to_vec(),
                        });
                    }
                }
            }
        }
        ModelFile {
            label: self.label.clone(),
            n_states: n,
            k_max: self.k_max(),
            eps_max: self.eps_max,
            entries,
        }
    }

    pub fn kernel(&self) -> &PerturbedKernel {
        &self.kernel
    }

    pub fn n_states(&self) -> usize {
        self.kernel.n_states
    }

    pub fn k_max(&self) -> usize {
        self.kernel.k_max
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn check_eps(&self, eps: f64) -> Result<()> {
        if eps.is_finite() && (0.0..=self.eps_max).contains(&eps) {
            Ok(())
        } else {
            Err(Error::EpsOutOfRange {
                eps,
                eps_max: self.eps_max,
            })
        }
    }

    /// Reports the worst violation of the first invariant (entry range, then
    /// row sum) that fails anywhere on `grid`.
    fn check_grid(&self, grid: &[f64]) -> Result<(), ValidationError> {
        let n = self.n_states();
        let mut worst_entry: Option<(f64, ValidationError)> = None;
        let mut worst_row: Option<(f64, ValidationError)> = None;
        for &eps in grid {
            let concrete = self.eval_unchecked(eps);
            for i in 1..=n {
                for j in 0..=n {
                    for k in 1..=self.k_max() {
                        let value = concrete.get(i, j, k);
                        let excess = (-value).max(value - 1.0);
                        if !value.is_finite() || excess > VALIDATION_TOL {
                            let excess = if value.is_finite() { excess } else { f64::INFINITY };
                            if worst_entry.as_ref().is_none_or(|(w, _)| excess > *w) {
                                worst_entry = Some((
                                    excess,
                                    ValidationError::EntryRange { i, j, k, eps, value },
                                ));
                            }
                        }
                    }
                }
                let sum = concrete.row_sum(i);
                let dev = (sum - 1.0).abs();
                if !dev.is_finite() || dev > VALIDATION_TOL {
                    let dev = if dev.is_finite() { dev } else { f64::INFINITY };
                    if worst_row.as_ref().is_none_or(|(w, _)| dev > *w) {
                        worst_row = Some((dev, ValidationError::RowSum { i, eps, sum }));
                    }
                }
            }
        }
        match worst_entry.or(worst_row) {
            Some((_, err)) => Err(err),
            None => Ok(()),
        }
    }

    /// Kernel values at a concrete `eps`.
    pub fn eval_kernel(&self, eps: f64) -> Result<ConcreteKernel> {
        self.check_eps(eps)?;
        Ok(self.eval_unchecked(eps))
    }

    fn eval_unchecked(&self, eps: f64) -> ConcreteKernel {
        ConcreteKernel {
            n_states: self.n_states(),
            k_max: self.k_max(),
            eps,
            q: self.kernel.q.iter().map(|p| p.eval(eps)).collect(),
        }
    }

    /// Whether `j` can be reached from `i` in one or more steps of the
    /// unperturbed embedded chain without passing through state 0.
    ///
    /// Decided on the graph of strictly positive constant coefficients, so no
    /// numeric threshold is involved. Indexed `[i-1][j-1]`.
    pub fn reachability_at_zero(&self) -> Vec<Vec<bool>> {
        let n = self.n_states();
        let succ: Vec<Vec<usize>> = (1..=n)
            .map(|l| {
                (1..=n)
                    .filter(|&m| (1..=self.k_max()).any(|k| self.kernel.get(l, m, k).coeff(0) > 0.0))
                    .collect()
            })
            .collect();
        let mut reach = vec![vec![false; n]; n];
        for i in 1..=n {
            let mut stack: Vec<usize> = succ[i - 1].clone();
            while let Some(m) = stack.pop() {
                if !reach[i - 1][m - 1] {
                    reach[i - 1][m - 1] = true;
                    stack.extend(succ[m - 1].iter().copied());
                }
            }
        }
        reach
    }
}

/// Equally spaced grid `{0, eps_max/(m-1), ..., eps_max}` with `m` points.
pub fn validation_grid(eps_max: f64, points: usize) -> Vec<f64> {
    let last = points.max(2) - 1;
    (0..=last)
        .map(|m| if m == last { eps_max } else { eps_max * m as f64 / last as f64 })
        .collect()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SemiMarkovModel> {
    load_model_with_grid(path, DEFAULT_GRID_POINTS)
}

pub fn load_model_with_grid(path: impl AsRef<Path>, grid_points: usize) -> Result<SemiMarkovModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    SemiMarkovModel::from_json_str_with_grid(&text, grid_points)
}

/// Kernel values `Q_ij(k)` at one concrete `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteKernel {
    n_states: usize,
    k_max: usize,
    eps: f64,
    q: Vec<f64>,
}

impl ConcreteKernel {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `Q_ij(k)`; zero for `k = 0` and `k > k_max`.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        if k == 0 || k > self.k_max {
            return 0.0;
        }
        self.q[((i - 1) * (self.n_states + 1) + j) * self.k_max + (k - 1)]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let start = (i - 1) * (self.n_states + 1) * self.k_max;
        self.q[start..start + (self.n_states + 1) * self.k_max].iter().sum()
    }

    /// Embedded-chain transition probability `p_ij`.
    pub fn jump_prob(&self, i: usize, j: usize) -> f64 {
        (1..=self.k_max).map(|k| self.get(i, j, k)).sum()
    }

    /// Conditional holding-time law `f_ij(k)`. When `p_ij = 0` the law is by
    /// convention concentrated at `k = 1`.
    pub fn holding_prob(&self, i: usize, j: usize, k: usize) -> f64 {
        let p = self.jump_prob(i, j);
        if p == 0.0 {
            if k == 1 {
                1.0
            } else {
                0.0
            }
        } else {
            self.get(i, j, k) / p
        }
    }

    /// `P_i{kappa_1 = k}`.
    pub fn sojourn_prob(&self, i: usize, k: usize) -> f64 {
        (0..=self.n_states).map(|j| self.get(i, j, k)).sum()
    }

    /// `sum_k k^r e^{rho k} Q_ij(k)`.
    pub fn moment(&self, i: usize, j: usize, rho: f64, r: u32) -> f64 {
        (1..=self.k_max)
            .map(|k| power_exp_weight(k, rho, r) * self.get(i, j, k))
            .sum()
    }
}

/// `k^r e^{rho k}` with the convention `0^0 = 1`.
pub(crate) fn power_exp_weight(k: usize, rho: f64, r: u32) -> f64 {
    let kf = k as f64;
    let power = if r == 0 { 1.0 } else { kf.powi(r as i32) };
    power * (rho * kf).exp()
}

/// Witness for condition C(b): `phi_ii(beta) in (1, inf)` at `eps = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthWitness {
    pub state: usize,
    pub beta: f64,
    pub phi: f64,
}

/// Outcome of checking conditions A, B and C on a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub a_holds: bool,
    pub b_holds: bool,
    pub c_holds: bool,
    /// Limits `p_ij^(0)` of the jump probabilities, `[i-1][j]`.
    pub limiting_jump_probs: Vec<Vec<f64>>,
    /// Reachability at `eps = 0` avoiding state 0, `[i-1][j-1]`.
    pub reachable: Vec<Vec<bool>>,
    pub growth_witness: Option<GrowthWitness>,
    /// Largest `beta` probed for condition C(b).
    pub beta_probed: f64,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.a_holds && self.b_holds && self.c_holds
    }
}

const BETA_START: f64 = 1.0;
const BETA_CEILING: f64 = 64.0;

pub fn validate_conditions(model: &SemiMarkovModel) -> ConditionReport {
    let n = model.n_states();
    let kernel = model.kernel();
    let limiting_jump_probs = (1..=n)
        .map(|i| (0..=n).map(|j| kernel.limiting_jump_prob(i, j)).collect())
        .collect();
    let reachable = model.reachability_at_zero();
    let b_holds = reachable.iter().all(|row| row.iter().all(|&r| r));

    let mut growth_witness = None;
    let mut beta = BETA_START;
    let mut beta_probed = 0.0;
    'probe: while beta <= BETA_CEILING {
        beta_probed = beta;
        for i in 1..=n {
            if let Some(w) = growth_at(model, i, beta) {
                growth_witness = Some(w);
                break 'probe;
            }
        }
        beta *= 2.0;
    }

    ConditionReport {
        // Polynomial entries are continuous at eps = 0.
        a_holds: true,
        b_holds,
        c_holds: growth_witness.is_some(),
        limiting_jump_probs,
        reachable,
        growth_witness,
        beta_probed,
    }
}

/// Looks for `beta' <= beta` with `phi_ii^(0)(beta') in (1, inf)`. When
/// `phi_ii` is already infinite at `beta`, bisects towards the divergence
/// threshold from below.
fn growth_at(model: &SemiMarkovModel, i: usize, beta: f64) -> Option<GrowthWitness> {
    let phi_ii = |rho: f64| hitting::solve_phi(model, 0.0, rho, i, 0).map(|h| h.phi[0][i - 1]);
    match phi_ii(beta) {
        Ok(phi) if phi > 1.0 => Some(GrowthWitness { state: i, beta, phi }),
        Ok(_) => None,
        Err(_) => {
            let (mut lo, mut hi) = (0.0, beta);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                match phi_ii(mid) {
                    Ok(phi) if phi > 1.0 => {
                        return Some(GrowthWitness {
                            state: i,
                            beta: mid,
                            phi,
                        })
                    }
                    Ok(_) => lo = mid,
                    Err(_) => hi = mid,
                }
            }
            None
        }
    }
}
