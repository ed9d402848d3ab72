//! Atomic expectation values and the angular photon correlation functions
//! built from them.
//!
//! All angular quantities are divided by the constant dipole pattern `u` (and
//! `u^2`) and by gamma, so `g1_angular` is `G1 / (u gamma)` and `g2_angular` is
//! `G2 / (u1 u2 gamma^2)`.
//!
//! Phase convention: with atom `i` at `x_i = (i - 1) d` the first-order sum is
//! `sum_ij <S_i^+ S_j^-> exp(i k (x_i - x_j) cos theta)` and the second-order sum
//! pairs detector 1 with `(i, l)` and detector 2 with `(j, k)`:
//! `sum <S_i^+ S_j^+ S_k^- S_l^-> exp(i k [(x_i - x_l) cos th1 + (x_j - x_k) cos th2])`.
//! For two atoms this reduces to `2 G_1212 {1 + cos[k d (cos th1 - cos th2)]}`.
//!
//! Three-atom pair decomposition of the equal-angle `G2 / (4 u^2)`: each term is
//! `(G_a + G_b)[1/2 + sigma cos(k s cos theta - phi)]` with a positive offset `s`.
//! The phase `phi` is the argument of the element whose annihilation pair sits
//! further along the chain than its creation pair:
//!
//! | term | `G` (for `sigma`) | `s`  | `phi`          |
//! |------|-------------------|------|----------------|
//! | 12   | `G_1312`          | `d`  | `arg G_1213`   |
//! | 23   | `G_2313`          | `d`  | `arg G_1323`   |
//! | 31   | `G_3221`          | `2d` | `arg G_1223`   |

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{ChainConfig, WAVE_NUMBER};
use crate::error::{Error, Result};
use crate::liouvillian::DensityMatrix;

/// Below this `(G1/u)^2` the normalised correlation is reported as undefined.
pub const G1_SQUARED_FLOOR: f64 = 1e-30;
/// Coherences smaller than this have no meaningful phase.
pub const COHERENCE_FLOOR: f64 = 1e-15;
const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// `<S_i^+ S_j^->` and `<S_i^+ S_j^+ S_k^- S_l^->` of a state.
///
/// Accessors take 1-based atom indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicCorrelations {
    n_atoms: usize,
    first_order: DMatrix<Complex64>,
    /// Flattened `N^4` table, index `((i N + j) N + k) N + l` (0-based).
    second_order: Vec<Complex64>,
}

impl AtomicCorrelations {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    fn idx4(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let n = self.n_atoms;
        (((i - 1) * n + (j - 1)) * n + (k - 1)) * n + (l - 1)
    }

    /// `<S_i^+ S_j^->`.
    pub fn first(&self, i: usize, j: usize) -> Complex64 {
        self.first_order[(i - 1, j - 1)]
    }

    /// `<S_i^+ S_j^+ S_k^- S_l^->`.
    pub fn second(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        self.second_order[self.idx4(i, j, k, l)]
    }

    /// Excited-state population `I_i = <S_i^+ S_i^->`.
    pub fn population(&self, i: usize) -> f64 {
        self.first(i, i).re
    }

    pub fn first_order_matrix(&self) -> &DMatrix<Complex64> {
        &self.first_order
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n_atoms {
            Err(Error::AtomIndexOutOfRange {
                index: i,
                n_atoms: self.n_atoms,
            })
        } else {
            Ok(())
        }
    }
}

/// Reads every one- and two-atom dipole correlation off a density matrix.
pub fn expectations(rho: &DensityMatrix) -> AtomicCorrelations {
    let n = rho.n_atoms();
    let d = rho.dim();
    let m = rho.matrix();
    let bit = |i: usize| 1usize << (n - 1 - i); // 0-based atom i

    // tr(rho A) = sum_c rho[c][A c] for a basis-permuting A.
    let first_order = DMatrix::from_fn(n, n, |i, j| {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..d {
            if c & bit(j) == 0 {
                continue;
            }
            let b = c & !bit(j);
            if b & bit(i) != 0 {
                continue;
            }
            acc += m[(c, b | bit(i))];
        }
        acc
    });

    let mut second_order = vec![Complex64::new(0.0, 0.0); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 0..n {
                for l in 0..n {
                    if k == l {
                        continue;
                    }
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..d {
                        if c & bit(l) == 0 || c & bit(k) == 0 {
                            continue;
                        }
                        let b = c & !bit(l) & !bit(k);
                        if b & bit(j) != 0 || b & bit(i) != 0 {
                            continue;
                        }
                        acc += m[(c, b | bit(i) | bit(j))];
                    }
                    second_order[((i * n + j) * n + k) * n + l] = acc;
                }
            }
        }
    }

    AtomicCorrelations {
        n_atoms: n,
        first_order,
        second_order,
    }
}

fn real_part(sum: Complex64, magnitude: f64) -> Result<f64> {
    if sum.im.abs() > IMAGINARY_TOLERANCE * magnitude.max(1e-300) && sum.im.abs() > 1e-300 {
        return Err(Error::ImaginaryResidual { value: sum.im });
    }
    Ok(sum.re)
}

/// `G1(theta) / (u gamma)`.
pub fn g1_angular(corr: &AtomicCorrelations, cfg: &ChainConfig, theta: f64) -> Result<f64> {
    let n = corr.n_atoms;
    let kc = WAVE_NUMBER * theta.cos();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for i in 1..=n {
        for j in 1..=n {
            let c = corr.first(i, j);
            let phase = kc * (cfg.atom_position(i) - cfg.atom_position(j));
            sum += c * Complex64::from_polar(1.0, phase);
            magnitude += c.norm();
        }
    }
    real_part(sum, magnitude)
}

/// `G2(theta1, theta2) / (u1 u2 gamma^2)` at equal times.
pub fn g2_angular(
    corr: &AtomicCorrelations,
    cfg: &ChainConfig,
    theta1: f64,
    theta2: f64,
) -> Result<f64> {
    let n = corr.n_atoms;
    let c1 = WAVE_NUMBER * theta1.cos();
    let c2 = WAVE_NUMBER * theta2.cos();
    let x = |i: usize| cfg.atom_position(i);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for i in 1..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            for k in 1..=n {
                for l in 1..=n {
                    if k == l {
                        continue;
                    }
                    let g = corr.second(i, j, k, l);
                    let phase = c1 * (x(i) - x(l)) + c2 * (x(j) - x(k));
                    sum += g * Complex64::from_polar(1.0, phase);
                    magnitude += g.norm();
                }
            }
        }
    }
    real_part(sum, magnitude)
}

/// `g2 = G2(theta, theta) / G1(theta)^2`, or `None` where `G1` vanishes.
pub fn g2_normalized(
    corr: &AtomicCorrelations,
    cfg: &ChainConfig,
    theta: f64,
) -> Result<Option<f64>> {
    let g1 = g1_angular(corr, cfg, theta)?;
    let g2 = g2_angular(corr, cfg, theta, theta)?;
    Ok(normalise(g2, g1))
}

fn normalise(g2: f64, g1: f64) -> Option<f64> {
    let denom = g1 * g1;
    (denom >= G1_SQUARED_FLOOR).then(|| g2 / denom)
}

/// `C2 = G2(theta, theta)/u^2 - (G1(theta)/u)^2`.
pub fn c2(corr: &AtomicCorrelations, cfg: &ChainConfig, theta: f64) -> Result<f64> {
    let g1 = g1_angular(corr, cfg, theta)?;
    Ok(g2_angular(corr, cfg, theta, theta)? - g1 * g1)
}

/// Degree `v_ij` and phase `psi_ij` of the first-order coherence of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCoherence {
    pub i: usize,
    pub j: usize,
    /// `2 |<S_i^+ S_j^->| / (I_i + I_j)`.
    pub v: f64,
    /// `arg <S_i^+ S_j^->` in `(-pi, pi]`.
    pub psi: f64,
    pub defined: bool,
}

/// Quadrant-resolved phase of a complex number, in `(-pi, pi]`.
pub fn coherence_phase(z: Complex64) -> f64 {
    let (re, im) = (z.re, z.im);
    if re == 0.0 && im == 0.0 {
        return 0.0;
    }
    if re == 0.0 {
        return if im > 0.0 { PI / 2.0 } else { -PI / 2.0 };
    }
    let base = (im / re).abs().atan();
    match (re > 0.0, im >= 0.0) {
        (true, true) => base,
        (false, true) => PI - base,
        (true, false) => -base,
        (false, false) => -PI + base,
    }
}

pub fn pair_coherence(corr: &AtomicCorrelations, i: usize, j: usize) -> Result<PairCoherence> {
    corr.check_index(i)?;
    corr.check_index(j)?;
    if i == j {
        return Err(Error::Unsupported(format!(
            "pair coherence needs two distinct atoms, got ({i}, {j})"
        )));
    }
    let c = corr.first(i, j);
    let populations = corr.population(i) + corr.population(j);
    let defined = c.norm() >= COHERENCE_FLOOR && populations > 0.0;
    Ok(PairCoherence {
        i,
        j,
        v: if defined {
            2.0 * c.norm() / populations
        } else {
            0.0
        },
        psi: if defined { coherence_phase(c) } else { 0.0 },
        defined,
    })
}

/// Second-order coherence `eta_ijij = 4 G_ijij / (I_i + I_j)^2` of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEta {
    pub i: usize,
    pub j: usize,
    pub eta: Option<f64>,
}

/// One pair term of the three-atom decomposition (see the module docs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaTerm {
    /// Pair label, e.g. `(1, 2)`.
    pub label: (usize, usize),
    /// `G_a + G_b`, the sum of the two diagonal pair terms.
    pub weight: f64,
    pub sigma: Option<f64>,
    pub phi: f64,
    /// Positive offset `s` in wavelengths.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCoherences {
    pub eta: Vec<PairEta>,
    /// Present for three-atom chains only.
    pub sigma: Option<[SigmaTerm; 3]>,
}

pub fn second_order_coherences(
    corr: &AtomicCorrelations,
    cfg: &ChainConfig,
) -> SecondOrderCoherences {
    let n = corr.n_atoms;
    let mut eta = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            let pops = corr.population(i) + corr.population(j);
            let g = corr.second(i, j, i, j).re;
            let value =
                (pops > 0.0 && pops * pops >= G1_SQUARED_FLOOR).then(|| 4.0 * g / (pops * pops));
            eta.push(PairEta { i, j, eta: value });
        }
    }

    let sigma = (n == 3).then(|| {
        let diag = |a: usize, b: usize| corr.second(a, b, a, b).re;
        let (g1, g2, g3) = (diag(1, 2), diag(2, 3), diag(3, 1));
        let d = cfg.spacing_over_lambda;
        let term = |label, weight: f64, g: Complex64, conj_partner: Complex64, offset| SigmaTerm {
            label,
            weight,
            sigma: (weight > 0.0).then(|| 2.0 * g.norm() / weight),
            phi: conj_partner.arg(),
            offset,
        };
        [
            term(
                (1, 2),
                g1 + g2,
                corr.second(1, 3, 1, 2),
                corr.second(1, 2, 1, 3),
                d,
            ),
            term(
                (2, 3),
                g2 + g3,
                corr.second(2, 3, 1, 3),
                corr.second(1, 3, 2, 3),
                d,
            ),
            term(
                (3, 1),
                g3 + g1,
                corr.second(3, 2, 2, 1),
                corr.second(1, 2, 2, 3),
                2.0 * d,
            ),
        ]
    });

    SecondOrderCoherences { eta, sigma }
}

/// Per-angle correlation functions on a uniform grid over `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularScan {
    /// Radians.
    pub theta: Vec<f64>,
    pub g1_over_u: Vec<f64>,
    pub g2_over_u2: Vec<f64>,
    /// `None` where `G1` underflows.
    pub g2_norm: Vec<Option<f64>>,
    pub c2: Vec<f64>,
}

pub const DEFAULT_GRID_POINTS: usize = 3600;

/// Expansion of the equal-angle correlators in powers of `exp(i k d cos theta)`:
/// both depend on the atoms only through integer multiples of the spacing.
struct OffsetSeries {
    /// `coefficients[m + max_offset]` multiplies `exp(i m k d cos theta)`.
    first: Vec<Complex64>,
    second: Vec<Complex64>,
    max_offset: i64,
}

impl OffsetSeries {
    fn new(corr: &AtomicCorrelations) -> Self {
        let n = corr.n_atoms as i64;
        let max_offset = 2 * (n - 1);
        let len = (2 * max_offset + 1) as usize;
        let mut first = vec![Complex64::new(0.0, 0.0); len];
        let mut second = vec![Complex64::new(0.0, 0.0); len];
        for i in 1..=n {
            for j in 1..=n {
                first[(i - j + max_offset) as usize] += corr.first(i as usize, j as usize);
                if i == j {
                    continue;
                }
                for k in 1..=n {
                    for l in 1..=n {
                        if k != l {
                            let m = i + j - k - l;
                            second[(m + max_offset) as usize] +=
                                corr.second(i as usize, j as usize, k as usize, l as usize);
                        }
                    }
                }
            }
        }
        OffsetSeries {
            first,
            second,
            max_offset,
        }
    }

    fn evaluate(&self, phase_step: f64) -> (f64, f64) {
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for (idx, (a, b)) in self.first.iter().zip(&self.second).enumerate() {
            let m = idx as i64 - self.max_offset;
            let e = Complex64::from_polar(1.0, m as f64 * phase_step);
            g1 += (a * e).re;
            g2 += (b * e).re;
        }
        (g1, g2)
    }
}

impl AngularScan {
    /// Evaluates the scan at `points` equally spaced angles `2 pi k / points`.
    pub fn compute(corr: &AtomicCorrelations, cfg: &ChainConfig, points: usize) -> Self {
        let theta: Vec<f64> = (0..points)
            .map(|k| 2.0 * PI * k as f64 / points as f64)
            .collect();
        Self::at_angles(corr, cfg, theta)
    }

    pub fn at_angles(corr: &AtomicCorrelations, cfg: &ChainConfig, theta: Vec<f64>) -> Self {
        let series = OffsetSeries::new(corr);
        let kd = WAVE_NUMBER * cfg.spacing_over_lambda;
        let mut g1_over_u = Vec::with_capacity(theta.len());
        let mut g2_over_u2 = Vec::with_capacity(theta.len());
        let mut g2_norm = Vec::with_capacity(theta.len());
        let mut c2 = Vec::with_capacity(theta.len());
        for &t in &theta {
            let (g1, g2) = series.evaluate(kd * t.cos());
            g1_over_u.push(g1);
            g2_over_u2.push(g2);
            g2_norm.push(normalise(g2, g1));
            c2.push(g2 - g1 * g1);
        }
        AngularScan {
            theta,
            g1_over_u,
            g2_over_u2,
            g2_norm,
            c2,
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta_deg(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.to_degrees()).collect()
    }
}

#[cfg(test)]
mod tests;
