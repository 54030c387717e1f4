//! Seeded random models for property checks.
//!
//! Each row of the unperturbed kernel is a normalized draw of `-ln(u)`
//! weights over the `(j, k)` cells, some of them zeroed for sparsity. The
//! perturbation moves the row linearly towards a second such draw `W`:
//! `Q(eps) = Q0 + eps c (W - Q0)` with `c eps_max <= 1`, so every row stays a
//! probability distribution on `[0, eps_max]`. Draws that break the
//! communication or growth conditions are rejected and redrawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{validate_conditions, EpsPoly, PerturbedKernel, SemiMarkovModel, DEFAULT_GRID_POINTS};

/// Chance that the unperturbed model has no absorption at all.
const NO_ABSORPTION_PROB: f64 = 0.2;
/// Chance that a non-absorbing cell is dropped from the unperturbed row.
const SPARSITY: f64 = 0.4;
const MAX_ATTEMPTS: usize = 1000;

/// Size limits for generated models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub min_states: usize,
    pub max_states: usize,
    pub max_k: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            min_states: 2,
            max_states: 4,
            max_k: 5,
        }
    }
}

/// Normalized `-ln(u)` weights over `cells`; cells where `keep` is false get
/// zero weight.
fn exponential_draw(rng: &mut impl Rng, cells: usize, keep: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..cells)
        .map(|c| {
            if keep(c) {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                -u.ln()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    }
    w
}

fn draw_candidate(rng: &mut impl Rng, cfg: &GeneratorConfig, label: &str) -> Option<SemiMarkovModel> {
    let n = rng.gen_range(cfg.min_states..=cfg.max_states);
    let k_max = rng.gen_range(1..=cfg.max_k);
    let eps_max = rng.gen_range(0.05..0.25);
    let no_absorption = rng.gen_bool(NO_ABSORPTION_PROB);
    let cells = (n + 1) * k_max;
    let mut kernel = PerturbedKernel::zeros(n, k_max);
    for i in 1..=n {
        let keep: Vec<bool> = (0..cells)
            .map(|c| {
                let j = c / k_max;
                if j == 0 {
                    !no_absorption
                } else {
                    !rng.gen_bool(SPARSITY)
                }
            })
            .collect();
        let q0 = exponential_draw(rng, cells, |c| keep[c]);
        if q0.iter().all(|&x| x == 0.0) {
            return None;
        }
        let w = exponential_draw(rng, cells, |_| true);
        let c = rng.gen_range(0.2..=1.0) / eps_max;
        for (cell, (&a, &b)) in q0.iter().zip(&w).enumerate() {
            let (j, k) = (cell / k_max, cell % k_max + 1);
            let slope = c * (b - a);
            if a != 0.0 || slope != 0.0 {
                kernel.set(i, j, k, EpsPoly::new(vec![a, slope]));
            }
        }
    }
    let model = SemiMarkovModel::new(label, kernel, eps_max, DEFAULT_GRID_POINTS).ok()?;
    validate_conditions(&model).all_hold().then_some(model)
}

/// One model satisfying conditions A-C, drawn from `rng`.
pub fn random_model(rng: &mut impl Rng, cfg: &GeneratorConfig, label: &str) -> SemiMarkovModel {
    for _ in 0..MAX_ATTEMPTS {
        if let Some(model) = draw_candidate(rng, cfg, label) {
            return model;
        }
    }
    panic!("no valid model after {MAX_ATTEMPTS} draws");
}

/// `count` models from a single seeded stream; labels are `random-<seed>-<index>`.
pub fn random_models(seed: u64, count: usize) -> Vec<SemiMarkovModel> {
    random_models_with(seed, count, &GeneratorConfig::default())
}

pub fn random_models_with(seed: u64, count: usize, cfg: &GeneratorConfig) -> Vec<SemiMarkovModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|idx| random_model(&mut rng, cfg, &format!("random-{seed}-{idx}")))
        .collect()
}
