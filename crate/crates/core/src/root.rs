//! The characteristic equation `phi_ii(rho) = 1` at a concrete `eps`.
//!
//! `phi_ii(rho)` is increasing in `rho` up to the divergence threshold of the
//! taboo system, with `phi_ii(0) = g_ii <= 1`. The root is bracketed by
//! doubling from `rho = 1`, then bisected and polished with Newton steps that
//! use the exact derivative `phi_ii(rho, 1)` from the `r = 1` system.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hitting::solve_phi;
use crate::model::SemiMarkovModel;

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOL: f64 = 1e-14;
pub const MAX_NEWTON_STEPS: usize = 5;
/// `|phi_ii(0) - 1|` below this is read as `phi_ii(0) = 1`, giving root zero.
pub const ZERO_ROOT_TOL: f64 = 1e-13;
/// Doubling stops at this `rho`.
const BRACKET_CEILING: f64 = 1024.0;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootResult {
    pub eps: f64,
    pub reference_state: usize,
    pub rho_root: f64,
    /// `phi_ii(rho_root) - 1` for the reference state.
    pub residual: f64,
    /// Root of `phi_ii(rho) = 1` for each `i = 1..N`, indexed `i - 1`.
    pub per_state_roots: Vec<f64>,
    /// Largest `rho` at which the taboo system was finite while bracketing
    /// the reference root.
    pub delta_proxy: f64,
}

impl RootResult {
    /// `max_i |per_state_roots[i] - rho_root|`.
    pub fn solidarity_spread(&self) -> f64 {
        self.per_state_roots
            .iter()
            .map(|r| (r - self.rho_root).abs())
            .fold(0.0, f64::max)
    }
}

struct SingleRoot {
    rho: f64,
    residual: f64,
    delta_proxy: f64,
}

/// `(phi_ii(rho) - 1, phi_ii(rho, 1))`.
fn characteristic(model: &SemiMarkovModel, eps: f64, i: usize, rho: f64) -> Result<(f64, f64)> {
    let h = solve_phi(model, eps, rho, i, 1)?;
    Ok((h.phi[0][i - 1] - 1.0, h.phi[1][i - 1]))
}

fn is_not_finite(err: &Error) -> bool {
    matches!(err, Error::NotFinite { .. })
}

fn single_root(model: &SemiMarkovModel, eps: f64, i: usize) -> Result<SingleRoot> {
    let f0 = characteristic(model, eps, i, 0.0)?.0;
    if f0.abs() <= ZERO_ROOT_TOL {
        return Ok(SingleRoot {
            rho: 0.0,
            residual: f0,
            delta_proxy: 0.0,
        });
    }
    if f0 > 0.0 {
        return Err(Error::NoRoot {
            delta_proxy: 0.0,
            reason: format!("phi_{i}{i}(0) - 1 = {f0:e} > 0"),
        });
    }

    // Bracket [lo, hi] with f(lo) < 0 < f(hi).
    let mut lo = 0.0;
    let mut delta_proxy: f64 = 0.0;
    let mut b = 1.0;
    let hi = loop {
        match characteristic(model, eps, i, b) {
            Ok((f, _)) => {
                delta_proxy = delta_proxy.max(b);
                if f > 0.0 {
                    break b;
                }
                lo = b;
                if b >= BRACKET_CEILING {
                    return Err(Error::NoRoot {
                        delta_proxy,
                        reason: format!("phi_{i}{i} stays below 1 up to rho = {b}"),
                    });
                }
                b *= 2.0;
            }
            Err(e) if is_not_finite(&e) => {
                // Search (lo, b) for a finite point above one.
                let mut finite = lo;
                let mut infinite = b;
                let mut found = None;
                for _ in 0..MAX_BISECTIONS {
                    if infinite - finite <= BISECTION_TOL * (1.0 + finite) {
                        break;
                    }
                    let mid = 0.5 * (finite + infinite);
                    match characteristic(model, eps, i, mid) {
                        Ok((f, _)) => {
                            delta_proxy = delta_proxy.max(mid);
                            if f > 0.0 {
                                found = Some(mid);
                                break;
                            }
                            finite = mid;
                            lo = mid;
                        }
                        Err(e) if is_not_finite(&e) => infinite = mid,
                        Err(e) => return Err(e),
                    }
                }
                match found {
                    Some(mid) => break mid,
                    None => {
                        return Err(Error::NoRoot {
                            delta_proxy,
                            reason: format!(
                                "phi_{i}{i} stays below 1 up to the divergence threshold near rho = {infinite}"
                            ),
                        })
                    }
                }
            }
            Err(e) => return Err(e),
        }
    };

    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (f, _) = characteristic(model, eps, i, mid)?;
        if f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut rho = 0.5 * (lo + hi);
    let (mut f, mut df) = characteristic(model, eps, i, rho)?;
    for _ in 0..MAX_NEWTON_STEPS {
        if f == 0.0 || df <= 0.0 {
            break;
        }
        let next = rho - f / df;
        if !(next.is_finite() && next >= 0.0) {
            break;
        }
        let Ok((f_next, df_next)) = characteristic(model, eps, i, next) else {
            break;
        };
        if f_next.abs() >= f.abs() {
            break;
        }
        rho = next;
        f = f_next;
        df = df_next;
    }
    Ok(SingleRoot {
        rho,
        residual: f,
        delta_proxy: delta_proxy.max(rho),
    })
}

/// Root of `phi_ii(rho) = 1` for the reference state `i`, with the roots for
/// every other state alongside.
pub fn characteristic_root(model: &SemiMarkovModel, eps: f64, i: usize) -> Result<RootResult> {
    if i == 0 || i > model.n_states() {
        return Err(Error::InvalidArgument(format!(
            "reference state {i} is not in 1..={}",
            model.n_states()
        )));
    }
    model.check_eps(eps)?;
    let reference = single_root(model, eps, i)?;
    let per_state_roots = (1..=model.n_states())
        .map(|s| {
            if s == i {
                Ok(reference.rho)
            } else {
                single_root(model, eps, s).map(|r| r.rho)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RootResult {
        eps,
        reference_state: i,
        rho_root: reference.rho,
        residual: reference.residual,
        per_state_roots,
        delta_proxy: reference.delta_proxy,
    })
}

/// One point of a convergence scan.
#[derive(Debug)]
pub struct ScanPoint {
    pub eps: f64,
    pub root: Result<RootResult>,
    /// `|rho^(eps) - rho^(0)|` when both roots exist.
    pub gap: Option<f64>,
}

/// Roots at each `eps` (reference state 1), with the gap to the unperturbed
/// root. Failures are recorded per point.
pub fn root_convergence_scan(model: &SemiMarkovModel, eps_values: &[f64]) -> Vec<ScanPoint> {
    let unperturbed = characteristic_root(model, 0.0, 1).ok().map(|r| r.rho_root);
    eps_values
        .iter()
        .map(|&eps| {
            let root = characteristic_root(model, eps, 1);
            let gap = match (&root, unperturbed) {
                (Ok(r), Some(r0)) => Some((r.rho_root - r0).abs()),
                _ => None,
            };
            ScanPoint { eps, root, gap }
        })
        .collect()
}
