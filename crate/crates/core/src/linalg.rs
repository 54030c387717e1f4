//! Dense helpers shared by the concrete solves and the expansion engine.

use nalgebra::{DMatrix, DVector, Dyn, LU};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Pivots smaller than this mark `I - P` as numerically singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Largest power `m = 2^t` of the taboo matrix examined by [`neumann_probe`].
pub const NEUMANN_MAX_POWER: usize = 256;

/// `||P^m||_inf` must fall below this for the Neumann series to count as
/// convergent.
pub const NEUMANN_DECAY: f64 = 1.0 - 1e-10;

pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Result of squaring `P` up to [`NEUMANN_MAX_POWER`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannProbe {
    /// Power at which `||P^m||` first dropped below [`NEUMANN_DECAY`].
    pub decay_power: Option<usize>,
    /// Last power examined.
    pub power: usize,
    /// `||P^power||_inf`.
    pub power_norm: f64,
}

impl NeumannProbe {
    pub fn decays(&self) -> bool {
        self.decay_power.is_some()
    }

    /// `||P^m||^{1/m}`, an upper estimate of the spectral radius.
    pub fn spectral_radius_proxy(&self) -> f64 {
        self.power_norm.powf(1.0 / self.power as f64)
    }
}

pub fn neumann_probe(p: &Mat) -> NeumannProbe {
    let mut power = p.clone();
    let mut m = 1;
    loop {
        let norm = inf_norm(&power);
        if norm < NEUMANN_DECAY {
            return NeumannProbe {
                decay_power: Some(m),
                power: m,
                power_norm: norm,
            };
        }
        if !norm.is_finite() || m >= NEUMANN_MAX_POWER {
            return NeumannProbe {
                decay_power: None,
                power: m,
                power_norm: norm,
            };
        }
        power = &power * &power;
        m *= 2;
    }
}

/// LU factorization of `I - P` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: LU<f64, Dyn, Dyn>,
    min_pivot: f64,
}

impl Factorization {
    pub fn of_identity_minus(p: &Mat) -> Self {
        let n = p.nrows();
        let a = Mat::identity(n, n) - p;
        let lu = a.lu();
        let min_pivot = lu
            .u()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
        Self { lu, min_pivot }
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn is_singular(&self) -> bool {
        !(self.min_pivot >= PIVOT_TOL)
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        self.lu
            .solve(b)
            .unwrap_or_else(|| Vector::from_element(b.len(), f64::NAN))
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        self.lu
            .solve(b)
            .unwrap_or_else(|| Mat::from_element(b.nrows(), b.ncols(), f64::NAN))
    }

    pub fn inverse(&self) -> Mat {
        let n = self.lu.l().nrows();
        self.solve_mat(&Mat::identity(n, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_decays_immediately() {
        let probe = neumann_probe(&Mat::zeros(2, 2));
        assert_eq!(probe.decay_power, Some(1));
    }

    #[test]
    fn stochastic_block_never_decays() {
        let p = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let probe = neumann_probe(&p);
        assert!(!probe.decays());
        assert_eq!(probe.power, NEUMANN_MAX_POWER);
    }

    #[test]
    fn nilpotent_matrix_decays_at_square() {
        // ||P|| = e^0.4 > 1 but P^2 = 0.
        let p = Mat::from_row_slice(2, 2, &[0.0, 0.4f64.exp(), 0.0, 0.0]);
        let probe = neumann_probe(&p);
        assert_eq!(probe.decay_power, Some(2));
    }

    #[test]
    fn factorization_solves_and_flags_singularity() {
        let p = Mat::from_row_slice(2, 2, &[0.5, 0.25, 0.0, 0.5]);
        let f = Factorization::of_identity_minus(&p);
        assert!(!f.is_singular());
        let x = f.solve(&Vector::from_vec(vec![1.0, 1.0]));
        let back = (Mat::identity(2, 2) - &p) * &x;
        assert!((back[0] - 1.0).abs() < 1e-15 && (back[1] - 1.0).abs() < 1e-15);
        let singular = Factorization::of_identity_minus(&Mat::identity(2, 2));
        assert!(singular.is_singular());
    }
}
