//! Brute-force references for the linear-system and expansion results.
//!
//! The hitting-time and occupation probabilities are tabulated by convolution
//! over time, moments are summed from the tables with a geometric tail
//! bound, and expansion coefficients are estimated by extrapolated
//! polynomial interpolation of concrete-`eps` solves. None of it shares code with the
//! solvers it checks beyond kernel evaluation.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{ConcreteKernel, SemiMarkovModel};

/// Default truncation point of the probability tables.
pub const DEFAULT_N_MAX: usize = 2000;
/// `n_max` is doubled up to this on `TailNotCertified`.
pub const MAX_N_MAX: usize = 32000;
/// Number of trailing blocks whose successive maxima must contract.
const DECAY_WINDOW: usize = 20;
/// Fits with a condition number above this are rejected.
pub const MAX_FIT_CONDITION: f64 = 1e10;

/// A table `values[i - 1][n]`, `n = 0..=n_max`, over start states `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesTable {
    pub values: Vec<Vec<f64>>,
    pub n_max: usize,
    /// Length of the blocks used for the decay estimate. Any `block_len`
    /// consecutive all-zero times (over every start state) force the rest
    /// of the table to vanish.
    pub block_len: usize,
}

fn target_ok(model: &SemiMarkovModel, s: usize) -> Result<()> {
    if s == 0 || s > model.n_states() {
        return Err(Error::InvalidArgument(format!(
            "state {s} is not in 1..={}",
            model.n_states()
        )));
    }
    Ok(())
}

/// Runs `x_i(n) = base_i(n) + sum_{l != 0, j} sum_{k <= n} Q_il(k) x_l(n - k)`.
fn taboo_convolution(kernel: &ConcreteKernel, j: usize, n_max: usize, base: impl Fn(usize, usize) -> f64) -> SeriesTable {
    let n_states = kernel.n_states();
    let k_max = kernel.k_max();
    let mut values = vec![vec![0.0; n_max + 1]; n_states];
    for n in 0..=n_max {
        for i in 1..=n_states {
            let mut acc = base(i, n);
            for l in (1..=n_states).filter(|&l| l != j) {
                for k in 1..=k_max.min(n) {
                    let q = kernel.get(i, l, k);
                    if q != 0.0 {
                        acc += q * values[l - 1][n - k];
                    }
                }
            }
            values[i - 1][n] = acc;
        }
    }
    SeriesTable {
        values,
        n_max,
        block_len: (n_states * k_max).max(k_max),
    }
}

/// `g_ij(n) = P_i{mu_j = n, nu_0 > nu_j}` for every start `i`.
pub fn dp_g(model: &SemiMarkovModel, eps: f64, j: usize, n_max: usize) -> Result<SeriesTable> {
    target_ok(model, j)?;
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let kernel = model.eval_kernel(eps)?;
    Ok(taboo_convolution(&kernel, j, n_max, |i, n| kernel.get(i, j, n)))
}

/// `h_ijs(n) = P_i{xi(n) = s, mu_0 ^ mu_j > n}` for every start `i`.
pub fn dp_h(model: &SemiMarkovModel, eps: f64, j: usize, s: usize, n_max: usize) -> Result<SeriesTable> {
    target_ok(model, j)?;
    target_ok(model, s)?;
    let kernel = model.eval_kernel(eps)?;
    let k_max = kernel.k_max();
    // P_s{kappa > n}
    let survival: Vec<f64> = (0..k_max)
        .map(|n| {
            let done: f64 = (1..=n).map(|k| kernel.sojourn_prob(s, k)).sum();
            (1.0 - done).max(0.0)
        })
        .collect();
    Ok(taboo_convolution(&kernel, j, n_max, |i, n| {
        if i == s && n < k_max {
            survival[n]
        } else {
            0.0
        }
    }))
}

/// Truncated moment `sum_{n <= n_max} n^r e^{rho n} x(n)` per start state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesMoment {
    pub values: Vec<f64>,
    /// Upper bound on the neglected tail, shared by all start states.
    pub tail_bound: f64,
    pub n_max: usize,
    /// Per-step decay ratio used for the bound.
    pub decay: f64,
}

/// `n^r e^{rho n} x`, formed in log space so that a huge `e^{rho n}` meeting a
/// tiny `x` does not overflow.
fn weighted(n: usize, rho: f64, r: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if n == 0 {
        return if r == 0 { x } else { 0.0 };
    }
    let nf = n as f64;
    let log = rho * nf + r as f64 * nf.ln() + x.abs().ln();
    log.exp().copysign(x)
}

/// Entries at or below this are treated as lost to underflow rather than as
/// structural zeros.
const UNDERFLOW_FLOOR: f64 = 1e-250;

/// Sums a table against `n^r e^{rho n}` and bounds the tail.
///
/// The table is cut into blocks of `block_len` times, each reduced to its
/// maximum `B_b` over all start states. If the last block is exactly zero and
/// no entry anywhere is near underflow, the zeros are structural and the
/// tail is zero. Otherwise take the last block `e` with `B_e` above the
/// underflow floor, ending at time `n_e`, and the `DECAY_WINDOW + 1` blocks
/// up to it. With `q_b` the largest ratio of successive maxima in that
/// window and `q = q_b^{1/L}`, every entry past `n_e` is taken to satisfy
/// `x(n) <= B_e q^{n - n_e}`, so with `x = q e^{rho + r / n_e}` the sum past
/// `n_e` is at most `B_e n_e^r e^{rho n_e} x / (1 - x)`. That also covers the
/// part of `(n_e, n_max]` already summed, so the bound is conservative.
pub fn series_moment(table: &SeriesTable, rho: f64, r: u32) -> Result<SeriesMoment> {
    let n_max = table.n_max;
    let values: Vec<f64> = table
        .values
        .iter()
        .map(|row| row.iter().enumerate().map(|(n, &x)| weighted(n, rho, r, x)).sum())
        .collect();

    let len = table.block_len.max(1);
    let not_certified = |reason: String| Error::TailNotCertified { n_max, reason };
    let blocks = (n_max + 1) / len;
    // Block b counts back from the end: b = 0 is the last block.
    let block_max = |b: usize| -> f64 {
        let end = n_max + 1 - b * len;
        table
            .values
            .iter()
            .flat_map(|row| row[end - len..end].iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    };
    if blocks == 0 {
        return Err(not_certified(format!("table shorter than one block of length {len}")));
    }
    let near_underflow = table
        .values
        .iter()
        .flatten()
        .any(|&x| x != 0.0 && x.abs() <= UNDERFLOW_FLOOR);
    if block_max(0) == 0.0 && !near_underflow {
        return Ok(SeriesMoment {
            values,
            tail_bound: 0.0,
            n_max,
            decay: 0.0,
        });
    }
    let Some(start) = (0..blocks).find(|&b| block_max(b) > UNDERFLOW_FLOOR) else {
        return Err(not_certified("table is lost to underflow".into()));
    };
    if start + DECAY_WINDOW >= blocks {
        return Err(not_certified(format!(
            "fewer than {} blocks of length {len} above underflow",
            DECAY_WINDOW + 1
        )));
    }
    let mut q_block: f64 = 0.0;
    for b in start..start + DECAY_WINDOW {
        let (newer, older) = (block_max(b), block_max(b + 1));
        if older == 0.0 {
            return Err(not_certified("table has not settled into geometric decay".into()));
        }
        q_block = q_block.max(newer / older);
    }
    if q_block >= 1.0 {
        return Err(not_certified(format!("block maxima do not contract (ratio {q_block:.6})")));
    }
    let q = q_block.powf(1.0 / len as f64);
    let n_end = n_max - start * len;
    let x = q * (rho + r as f64 / n_end as f64).exp();
    if x >= 1.0 {
        return Err(not_certified(format!(
            "decay {q:.6} per step does not dominate e^rho at rho = {rho}"
        )));
    }
    let tail_bound = weighted(n_end, rho, r, block_max(start)) * x / (1.0 - x);
    Ok(SeriesMoment {
        values,
        tail_bound,
        n_max,
        decay: q,
    })
}

/// Builds tables with `n_max = DEFAULT_N_MAX, 2 DEFAULT_N_MAX, ...` until the
/// tail is certified or `MAX_N_MAX` is exceeded.
pub fn certified_moment(
    mut build: impl FnMut(usize) -> Result<SeriesTable>,
    rho: f64,
    r: u32,
) -> Result<SeriesMoment> {
    let mut n_max = DEFAULT_N_MAX;
    loop {
        match series_moment(&build(n_max)?, rho, r) {
            Err(Error::TailNotCertified { .. }) if n_max < MAX_N_MAX => n_max *= 2,
            other => return other,
        }
    }
}

/// Coefficient estimates from polynomial interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// `coeffs[n]` estimates the `eps^n` coefficient, `n = 0..=k`.
    pub coeffs: Vec<Vector>,
    /// Size of the last extrapolation correction behind each `coeffs[n]`.
    pub error_estimate: Vec<f64>,
    /// 2-norm condition number of the (scaled) Vandermonde matrix.
    pub condition: f64,
    /// Coarsest grid step.
    pub step: f64,
}

/// Grid step used by the coefficient fit.
pub fn default_fit_step(eps_max: f64) -> f64 {
    eps_max / 32.0
}

/// Number of halved grids combined by the extrapolation.
pub const FIT_LEVELS: usize = 12;

fn interpolation_coeffs(
    evaluator: &mut impl FnMut(f64) -> Result<Vector>,
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    k: usize,
    step: f64,
) -> Result<Vec<Vector>> {
    let points = k + 3;
    let samples: Vec<Vector> = (0..points)
        .map(|m| evaluator(m as f64 * step))
        .collect::<Result<_>>()?;
    let dim = samples[0].len();
    let rhs = DMatrix::from_fn(points, dim, |m, c| samples[m][c]);
    let scaled = lu
        .solve(&rhs)
        .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    Ok((0..=k)
        .map(|n| scaled.row(n).transpose() / step.powi(n as i32))
        .collect())
}

/// Estimates the first `k + 1` Taylor coefficients of `evaluator` at zero.
///
/// On a grid `eps = m h`, `m = 0..=k+2`, the unique polynomial of degree
/// `d = k + 2` through the samples is formed in the scaled variable
/// `t = eps / h`. The two extra degrees absorb the leading truncation terms
/// that a degree-`k` fit would alias into the top coefficients. What is
/// left in coefficient `n` is a power series in `h` starting at
/// `h^(d + 1 - n)`, so the fit is repeated on `FIT_LEVELS` halved grids and
/// Richardson extrapolated. Each coefficient takes the diagonal entry whose
/// last correction was smallest, which stops before rounding (growing like
/// `h^-n`) takes over.
pub fn fd_expansion_coeffs(
    evaluator: impl FnMut(f64) -> Result<Vector>,
    k: usize,
    step: f64,
) -> Result<FitResult> {
    let mut evaluator = evaluator;
    let points = k + 3;
    let vandermonde = DMatrix::from_fn(points, points, |m, p| (m as f64).powi(p as i32));
    let singular = vandermonde.clone().svd(false, false).singular_values;
    let condition = singular.max() / singular.min();
    if !(condition <= MAX_FIT_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let lu = vandermonde.lu();
    let levels: Vec<Vec<Vector>> = (0..FIT_LEVELS)
        .map(|l| interpolation_coeffs(&mut evaluator, &lu, k, step / 2f64.powi(l as i32)))
        .collect::<Result<_>>()?;

    let degree = k + 2;
    let mut coeffs = Vec::with_capacity(k + 1);
    let mut error_estimate = Vec::with_capacity(k + 1);
    for n in 0..=k {
        let lead = (degree + 1 - n) as i32;
        // table[l][m]: level l after m eliminations.
        let mut table: Vec<Vec<Vector>> = Vec::with_capacity(FIT_LEVELS);
        for l in 0..FIT_LEVELS {
            let mut row = vec![levels[l][n].clone()];
            for m in 1..=l {
                let factor = 2f64.powi(lead + m as i32 - 1) - 1.0;
                let next = &row[m - 1] + (&row[m - 1] - &table[l - 1][m - 1]) / factor;
                row.push(next);
            }
            table.push(row);
        }
        let (mut best, mut best_err) = (table[0][0].clone(), f64::INFINITY);
        for l in 1..FIT_LEVELS {
            let err = (&table[l][l] - &table[l - 1][l - 1]).amax();
            if err < best_err {
                best = table[l][l].clone();
                best_err = err;
            }
        }
        coeffs.push(best);
        error_estimate.push(best_err);
    }
    Ok(FitResult {
        coeffs,
        error_estimate,
        condition,
        step,
    })
}

/// Scalar convenience form of [`fd_expansion_coeffs`].
pub fn fd_expansion_coeffs_scalar(
    mut evaluator: impl FnMut(f64) -> Result<f64>,
    k: usize,
    step: f64,
) -> Result<(Vec<f64>, f64)> {
    let fit = fd_expansion_coeffs(|eps| evaluator(eps).map(|v| Vector::from_element(1, v)), k, step)?;
    Ok((fit.coeffs.iter().map(|c| c[0]).collect(), fit.condition))
}

/// `P_ij(n) = P_i{xi(n) = j, mu_0 > n}` for `n = 0..=n_max`, indexed
/// `[j - 1][n]`, by forward propagation over (state, age) pairs.
///
/// Mass at `(l, a)` is the probability of being in `l` at time `n` with the
/// last jump `a` steps ago and the sojourn still running.
pub fn transition_probabilities(model: &SemiMarkovModel, eps: f64, i: usize, n_max: usize) -> Result<Vec<Vec<f64>>> {
    target_ok(model, i)?;
    let kernel = model.eval_kernel(eps)?;
    let n_states = kernel.n_states();
    let k_max = kernel.k_max();
    // survival[l - 1][a] = P_l{kappa > a}
    let survival: Vec<Vec<f64>> = (1..=n_states)
        .map(|l| {
            let mut acc = 1.0;
            (0..=k_max)
                .map(|a| {
                    if a > 0 {
                        acc -= kernel.sojourn_prob(l, a);
                    }
                    acc.max(0.0)
                })
                .collect()
        })
        .collect();

    let mut mass = vec![vec![0.0; k_max]; n_states];
    mass[i - 1][0] = 1.0;
    let mut out = vec![vec![0.0; n_max + 1]; n_states];
    for n in 0..=n_max {
        for l in 0..n_states {
            out[l][n] = mass[l].iter().sum();
        }
        if n == n_max {
            break;
        }
        let mut next = vec![vec![0.0; k_max]; n_states];
        for l in 1..=n_states {
            for a in 0..k_max {
                let m = mass[l - 1][a];
                let alive = survival[l - 1][a];
                if m == 0.0 || alive == 0.0 {
                    continue;
                }
                // Jump at age a + 1 into each destination.
                for dest in 1..=n_states {
                    next[dest - 1][0] += m * kernel.get(l, dest, a + 1) / alive;
                }
                if a + 1 < k_max {
                    next[l - 1][a + 1] += m * survival[l - 1][a + 1] / alive;
                }
            }
        }
        mass = next;
    }
    Ok(out)
}

/// `max_n |P_ij(n) - h_iij(n) - sum_{k=1..n} P_ij(n - k) g_ii(k)|` over `j`
/// and `n <= n_max`.
pub fn renewal_residual(model: &SemiMarkovModel, eps: f64, i: usize, n_max: usize) -> Result<f64> {
    let p = transition_probabilities(model, eps, i, n_max)?;
    let g = dp_g(model, eps, i, n_max.max(1))?;
    let g_ii = &g.values[i - 1];
    let mut worst: f64 = 0.0;
    for j in 1..=model.n_states() {
        let h = dp_h(model, eps, i, j, n_max)?;
        let h_iij = &h.values[i - 1];
        let p_ij = &p[j - 1];
        for n in 0..=n_max {
            let conv: f64 = (1..=n).map(|k| p_ij[n - k] * g_ii[k]).sum();
            worst = worst.max((p_ij[n] - h_iij[n] - conv).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{m1, m2, three_state};
    use crate::hitting::{solve_hitting, solve_phi};

    #[test]
    fn dp_g_examples() {
        let g = dp_g(&m1(), 0.0, 1, 10).unwrap();
        assert_eq!(g.values[0][1], 0.5);
        assert!(g.values[0].iter().enumerate().all(|(n, &x)| n == 1 || x == 0.0));

        let g = dp_g(&m2(), 0.2, 1, 10).unwrap();
        assert!((g.values[0][2] - 0.8).abs() < 1e-15);
        assert!(g.values[0].iter().enumerate().all(|(n, &x)| n == 2 || x == 0.0));

        let g = dp_g(&m2(), 0.0, 2, 10).unwrap();
        assert_eq!(g.values[0][1], 1.0);
    }

    #[test]
    fn dp_h_examples() {
        for eps in [0.0, 0.2, 0.4] {
            let h = dp_h(&m1(), eps, 1, 1, 10).unwrap();
            assert_eq!(h.values[0][0], 1.0);
            assert!(h.values[0][1..].iter().all(|&x| x == 0.0));
        }
        let h = dp_h(&m2(), 0.3, 1, 2, 10).unwrap();
        assert_eq!(h.values[0][1], 1.0);
        assert!(h.values[0].iter().enumerate().all(|(n, &x)| n == 1 || x == 0.0));

        // From state 2, state 1 is never occupied before hitting 1.
        let h = dp_h(&m2(), 0.3, 1, 1, 10).unwrap();
        assert!(h.values[1].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn series_moment_examples() {
        let g = dp_g(&m1(), 0.1, 1, 2000).unwrap();
        let m = series_moment(&g, 0.0, 0).unwrap();
        assert!((m.values[0] - 0.4).abs() < 1e-15);
        assert_eq!(m.tail_bound, 0.0);

        let g = dp_g(&m2(), 0.0, 1, 2000).unwrap();
        let m = series_moment(&g, 0.0, 2).unwrap();
        assert!((m.values[0] - 4.0).abs() < 1e-15);

        for rho in [-1.0, 0.0, 2.0] {
            let h = dp_h(&m1(), 0.1, 1, 1, 2000).unwrap();
            let m = series_moment(&h, rho, 0).unwrap();
            assert_eq!(m.values[0], 1.0);
        }
    }

    #[test]
    fn tables_stay_in_unit_interval() {
        let m = three_state();
        for j in 1..=3 {
            let g = dp_g(&m, 0.05, j, 500).unwrap();
            for row in &g.values {
                assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
                assert!(row.iter().sum::<f64>() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn moments_agree_with_linear_systems() {
        let m = three_state();
        for (eps, rho) in [(0.0, 0.0), (0.05, 0.2), (0.1, -0.3)] {
            for j in 1..=3 {
                let direct = solve_hitting(&m, eps, rho, j, &[1, 2, 3], 2, true).unwrap();
                for r in 0..=2u32 {
                    let g = certified_moment(|n| dp_g(&m, eps, j, n), rho, r).unwrap();
                    let diff = (Vector::from_vec(g.values.clone()) - &direct.phi[r as usize]).amax();
                    assert!(diff <= g.tail_bound + 1e-9, "phi eps={eps} rho={rho} j={j} r={r}: {diff}");
                    for s in 1..=3 {
                        let h = certified_moment(|n| dp_h(&m, eps, j, s, n), rho, r).unwrap();
                        let diff = (Vector::from_vec(h.values.clone()) - &direct.omega[&s][r as usize]).amax();
                        assert!(diff <= h.tail_bound + 1e-9, "omega s={s}: {diff}");
                    }
                }
            }
        }
    }

    #[test]
    fn tail_bound_dominates_truncation_error() {
        // A slowly leaking 2 <-> 3 loop keeps the tail visible at n = 300.
        let text = r#"{"n_states": 3, "k_max": 2, "eps_max": 0.1, "entries": [
            {"i": 1, "j": 0, "k": 1, "coeffs": [0.5]},
            {"i": 1, "j": 2, "k": 2, "coeffs": [0.5]},
            {"i": 2, "j": 3, "k": 1, "coeffs": [0.97]},
            {"i": 2, "j": 1, "k": 2, "coeffs": [0.02]},
            {"i": 2, "j": 0, "k": 1, "coeffs": [0.01]},
            {"i": 3, "j": 2, "k": 2, "coeffs": [0.98]},
            {"i": 3, "j": 0, "k": 1, "coeffs": [0.02]}
        ]}"#;
        let m = SemiMarkovModel::from_json_str(text).unwrap();
        for (rho, r) in [(0.0, 0u32), (0.005, 1), (-0.005, 2)] {
            let exact = solve_phi(&m, 0.0, rho, 1, 2).unwrap();
            let short = series_moment(&dp_g(&m, 0.0, 1, 300).unwrap(), rho, r).unwrap();
            let err = (Vector::from_vec(short.values.clone()) - &exact.phi[r as usize]).amax();
            assert!(err > 1e-12, "rho={rho} r={r}: {err}");
            assert!(err <= short.tail_bound, "err {err} bound {}", short.tail_bound);
        }
    }

    #[test]
    fn short_or_growing_tables_are_not_certified() {
        let m = three_state();
        let g = dp_g(&m, 0.0, 1, 10).unwrap();
        assert!(matches!(series_moment(&g, 0.0, 0), Err(Error::TailNotCertified { .. })));
        // rho far beyond the decay rate.
        let g = dp_g(&m, 0.0, 1, 2000).unwrap();
        assert!(matches!(series_moment(&g, 5.0, 0), Err(Error::TailNotCertified { .. })));
    }

    #[test]
    fn fit_examples() {
        let (c, cond) = fd_expansion_coeffs_scalar(|e| Ok(0.5 - e), 2, default_fit_step(0.4)).unwrap();
        assert!(cond < MAX_FIT_CONDITION);
        for (a, b) in c.iter().zip([0.5, -1.0, 0.0]) {
            assert!((a - b).abs() <= 1e-10, "{c:?}");
        }

        let e2 = 0.2f64.exp();
        let (c, _) = fd_expansion_coeffs_scalar(|e| Ok((1.0 - e) * e2), 1, default_fit_step(0.5)).unwrap();
        assert!((c[0] - e2).abs() <= 1e-10 && (c[1] + e2).abs() <= 1e-10);

        let (c, _) = fd_expansion_coeffs_scalar(|e| Ok(1.0 / (1.0 - e)), 2, default_fit_step(0.1)).unwrap();
        for a in &c {
            assert!((a - 1.0).abs() <= 1e-4, "{c:?}");
        }

        // Pole at eps = 0.1 with eps_max = 0.2: the grid reaches half way to
        // the singularity, coefficients grow like 10^n.
        let (c, _) = fd_expansion_coeffs_scalar(|e| Ok(1.0 / (1.0 - 10.0 * e)), 3, default_fit_step(0.2)).unwrap();
        for (n, a) in c.iter().enumerate() {
            let exact = 10f64.powi(n as i32);
            assert!(((a - exact) / exact).abs() <= 1e-6, "{c:?}");
        }
    }

    #[test]
    fn fit_rejects_huge_degree() {
        let res = fd_expansion_coeffs_scalar(|e| Ok(e.exp()), 12, 0.01);
        assert!(matches!(res, Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn renewal_identity_on_fixtures() {
        for model in [m1(), m2(), three_state()] {
            for i in 1..=model.n_states() {
                let res = renewal_residual(&model, model.eps_max() / 2.0, i, 50).unwrap();
                assert!(res <= 1e-12, "{} i={i}: {res}", model.label());
            }
        }
    }

    #[test]
    fn transition_probabilities_small_cases() {
        // M2 at eps = 0: deterministic 1 -> 2 -> 1 -> ...
        let p = transition_probabilities(&m2(), 0.0, 1, 4).unwrap();
        assert_eq!(p[0], vec![1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(p[1], vec![0.0, 1.0, 0.0, 1.0, 0.0]);
        // M1: survive each step with probability 0.5 - eps.
        let p = transition_probabilities(&m1(), 0.1, 1, 3).unwrap();
        for (n, x) in p[0].iter().enumerate() {
            assert!((x - 0.4f64.powi(n as i32)).abs() < 1e-15);
        }
    }
}
