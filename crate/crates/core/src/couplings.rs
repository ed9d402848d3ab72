//! Collective damping rates `gamma_ij` and dipole-dipole shifts `Omega_ij`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::ChainConfig;
use crate::error::{Error, Result};

/// Below this `xi` the combination `(sin xi - xi cos xi) / xi^3` is summed as a
/// power series; the direct form loses about `eps / xi^3` to cancellation.
const SERIES_CUTOFF: f64 = 0.05;

/// Phase separation `xi = 2 pi r / lambda`.
pub fn xi(separation_over_lambda: f64) -> Result<f64> {
    if separation_over_lambda.is_nan() || separation_over_lambda <= 0.0 {
        return Err(Error::NonPositiveSeparation(separation_over_lambda));
    }
    Ok(2.0 * PI * separation_over_lambda)
}

/// `(sin x - x cos x) / x^3`, tending to 1/3 at the origin.
fn sin_minus_cos(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        // sum_{k>=1} (-1)^(k+1) 2k x^(2k-2) / (2k+1)!
        let x2 = x * x;
        let mut sum = 0.0;
        let mut power = 1.0;
        let mut fact = 6.0; // (2k+1)! at k = 1
        for k in 1..=8u32 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * 2.0 * k as f64 * power / fact;
            power *= x2;
            fact *= ((2 * k + 2) * (2 * k + 3)) as f64;
        }
        sum
    } else {
        (x.sin() - x * x.cos()) / (x * x * x)
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveSeparation(xi))
    }
}

/// Collective decay rate `gamma_ij / gamma` for phase separation `xi` and
/// dipole/axis projection `mu_dot_rhat`.
pub fn collective_decay(xi: f64, mu_dot_rhat: f64) -> Result<f64> {
    check_xi(xi)?;
    let m2 = mu_dot_rhat * mu_dot_rhat;
    let sinc = if xi < SERIES_CUTOFF {
        1.0 - xi * xi / 6.0 + xi.powi(4) / 120.0 - xi.powi(6) / 5040.0
    } else {
        xi.sin() / xi
    };
    // cos/xi^2 - sin/xi^3 = -(sin - xi cos)/xi^3
    Ok(1.5 * ((1.0 - m2) * sinc - (1.0 - 3.0 * m2) * sin_minus_cos(xi)))
}

/// Dipole-dipole level shift `Omega_ij / gamma`. Diverges like `(3/4)(1 - 3 m^2)/xi^3`.
pub fn dipole_shift(xi: f64, mu_dot_rhat: f64) -> Result<f64> {
    check_xi(xi)?;
    let m2 = mu_dot_rhat * mu_dot_rhat;
    let (s, c) = xi.sin_cos();
    Ok(0.75 * (-(1.0 - m2) * c / xi + (1.0 - 3.0 * m2) * (s / (xi * xi) + c / (xi * xi * xi))))
}

/// Pairwise couplings of a chain, in units of gamma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrices {
    pub gamma: DMatrix<f64>,
    /// Zero on the diagonal: the single-atom shift is absorbed in the transition frequency.
    pub omega: DMatrix<f64>,
}

impl CouplingMatrices {
    pub fn n_atoms(&self) -> usize {
        self.gamma.nrows()
    }

    /// Smallest eigenvalue of the damping matrix.
    pub fn min_gamma_eigenvalue(&self) -> f64 {
        self.gamma
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn gamma_is_psd(&self) -> bool {
        self.min_gamma_eigenvalue() >= -1e-10
    }
}

/// Couplings for the equidistant chain with dipoles perpendicular to the axis.
pub fn build_couplings(cfg: &ChainConfig) -> Result<CouplingMatrices> {
    let cfg = cfg.validate()?;
    let n = cfg.n_atoms;
    let mut gamma = DMatrix::identity(n, n);
    let mut omega = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let x = xi((j - i) as f64 * cfg.spacing_over_lambda)?;
            let g = collective_decay(x, 0.0)?;
            let w = dipole_shift(x, 0.0)?;
            gamma[(i, j)] = g;
            gamma[(j, i)] = g;
            omega[(i, j)] = w;
            omega[(j, i)] = w;
        }
    }
    Ok(CouplingMatrices { gamma, omega })
}
