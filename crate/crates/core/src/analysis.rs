//! Extremum prediction for the two-atom intensity pattern and peak detection on
//! normalised correlation scans.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::config::{ChainConfig, WAVE_NUMBER};
use crate::correlations::{AngularScan, PairCoherence};
use crate::error::{Error, Result};

/// Peaks closer than this (radians) are merged.
pub const MERGE_DISTANCE: f64 = 0.5 * PI / 180.0;
/// Step for the central difference of `G1`.
pub const DERIVATIVE_STEP: f64 = 1e-5;
/// Relative derivative bound for a confirmed extremum.
pub const EXTREMUM_TOLERANCE: f64 = 1e-6;

const ANGLE_DEDUP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `sin theta = 0`: along the chain axis.
    Axis,
    /// `sin(k r cos theta - psi) = 0`.
    Interference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremumPrediction {
    /// Radians in `[0, 2 pi)`.
    pub theta: f64,
    pub branch: Branch,
    /// Interference order `n`; `None` on the axis branch.
    pub order_n: Option<i64>,
}

/// Stationary points of the two-atom intensity
/// `G1 ~ 1 + v cos(k r cos theta - psi)`.
pub fn predict_g1_extrema(
    cfg: &ChainConfig,
    pc: &PairCoherence,
) -> Result<Vec<ExtremumPrediction>> {
    if cfg.n_atoms != 2 {
        return Err(Error::Unsupported(format!(
            "closed-form extrema need a two-atom chain, got {} atoms",
            cfg.n_atoms
        )));
    }
    let kr = WAVE_NUMBER * cfg.separation(1, 2);
    let mut out = vec![
        ExtremumPrediction {
            theta: 0.0,
            branch: Branch::Axis,
            order_n: None,
        },
        ExtremumPrediction {
            theta: PI,
            branch: Branch::Axis,
            order_n: None,
        },
    ];

    let lo = ((-kr - pc.psi) / PI).ceil() as i64;
    let hi = ((kr - pc.psi) / PI).floor() as i64;
    for n in lo..=hi {
        let c = (n as f64 * PI + pc.psi) / kr;
        if c.abs() > 1.0 {
            continue;
        }
        let theta = c.acos();
        for t in [theta, (TAU - theta).rem_euclid(TAU)] {
            let duplicate = out
                .iter()
                .any(|p| circular_distance(p.theta, t) < ANGLE_DEDUP);
            if !duplicate {
                out.push(ExtremumPrediction {
                    theta: t,
                    branch: Branch::Interference,
                    order_n: Some(n),
                });
            }
        }
    }
    out.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(out)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonStatistics {
    Antibunched,
    /// Exactly one.
    Coherent,
    Bunched,
    Superbunched,
}

impl PhotonStatistics {
    pub fn classify(g2: f64) -> Self {
        if g2 < 1.0 {
            PhotonStatistics::Antibunched
        } else if g2 == 1.0 {
            PhotonStatistics::Coherent
        } else if g2 <= 2.0 {
            PhotonStatistics::Bunched
        } else {
            PhotonStatistics::Superbunched
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Radians.
    pub theta: f64,
    pub value: f64,
    /// Full width at half maximum in radians; `None` if the peak never drops to half.
    pub width_fwhm: Option<f64>,
    pub class: PhotonStatistics,
}

/// A run of scan points where `g2` is undefined because `G1` vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergentCandidate {
    /// Centre of the run, radians.
    pub theta: f64,
    pub points: usize,
    /// `C2` at the centre.
    pub c2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    pub divergent: Vec<DivergentCandidate>,
}

impl PeakSet {
    pub fn superbunched(&self) -> impl Iterator<Item = &Peak> {
        self.peaks
            .iter()
            .filter(|p| p.class == PhotonStatistics::Superbunched)
    }

    pub fn max_value(&self) -> Option<f64> {
        self.peaks.iter().map(|p| p.value).reduce(f64::max)
    }
}

/// Local maxima of `g2_norm` above one on a scan that covers the full circle
/// with uniform spacing.
pub fn find_peaks(scan: &AngularScan) -> PeakSet {
    let n = scan.len();
    if n < 3 {
        return PeakSet::default();
    }
    let step = TAU / n as f64;
    let values = &scan.g2_norm;
    let at = |k: isize| values[k.rem_euclid(n as isize) as usize];

    let mut peaks = Vec::new();
    for k in 0..n as isize {
        let (Some(prev), Some(here), Some(next)) = (at(k - 1), at(k), at(k + 1)) else {
            continue;
        };
        if !(here > prev && here >= next && here > 1.0) {
            continue;
        }
        let (offset, value) = refine(prev, here, next);
        let theta = (scan.theta[k as usize] + offset * step).rem_euclid(TAU);
        peaks.push(Peak {
            theta,
            value,
            width_fwhm: fwhm(values, k as usize, value / 2.0, step),
            class: PhotonStatistics::classify(value),
        });
    }

    PeakSet {
        peaks: merge(peaks),
        divergent: divergent_runs(scan),
    }
}

/// Vertex of the parabola through three samples in log space, as an offset in
/// grid steps and the interpolated value.
fn refine(prev: f64, here: f64, next: f64) -> (f64, f64) {
    let (a, b, c) = if prev > 0.0 && next > 0.0 {
        (prev.ln(), here.ln(), next.ln())
    } else {
        return quadratic_vertex(prev, here, next);
    };
    let (offset, log_value) = quadratic_vertex(a, b, c);
    (offset, log_value.exp())
}

fn quadratic_vertex(a: f64, b: f64, c: f64) -> (f64, f64) {
    let curvature = a - 2.0 * b + c;
    if curvature >= 0.0 {
        return (0.0, b);
    }
    let offset = 0.5 * (a - c) / curvature;
    (offset, b - 0.25 * (a - c) * offset)
}

fn fwhm(values: &[Option<f64>], k: usize, half: f64, step: f64) -> Option<f64> {
    let n = values.len() as isize;
    let at = |j: isize| values[j.rem_euclid(n) as usize];
    let crossing = |dir: isize| -> Option<f64> {
        let mut inner = at(k as isize)?;
        for s in 1..n {
            let outer = at(k as isize + dir * s)?;
            if outer < half {
                let frac = (inner - half) / (inner - outer);
                return Some((s - 1) as f64 + frac);
            }
            inner = outer;
        }
        None
    };
    let left = crossing(-1)?;
    let right = crossing(1)?;
    Some((left + right) * step)
}

fn merge(mut peaks: Vec<Peak>) -> Vec<Peak> {
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    let mut kept: Vec<Peak> = Vec::new();
    for p in peaks {
        if kept
            .iter()
            .all(|q| circular_distance(p.theta, q.theta) >= MERGE_DISTANCE)
        {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    kept
}

fn divergent_runs(scan: &AngularScan) -> Vec<DivergentCandidate> {
    let n = scan.len();
    let undefined: Vec<bool> = scan.g2_norm.iter().map(Option::is_none).collect();
    if undefined.iter().all(|&u| u) {
        return vec![];
    }
    // start at a defined point so runs never straddle the wrap
    let start = undefined.iter().position(|&u| !u).unwrap_or(0);
    let mut runs = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for s in 1..=n {
        let k = (start + s) % n;
        match (undefined[k], current) {
            (true, None) => current = Some((k, 1)),
            (true, Some((first, len))) => current = Some((first, len + 1)),
            (false, Some((first, len))) => {
                let centre = (first + len / 2) % n;
                runs.push(DivergentCandidate {
                    theta: scan.theta[centre],
                    points: len,
                    c2: scan.c2[centre],
                });
                current = None;
            }
            (false, None) => {}
        }
    }
    runs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremumCheck {
    pub prediction: ExtremumPrediction,
    pub derivative: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaReport {
    pub max_derivative: f64,
    pub checks: Vec<ExtremumCheck>,
}

impl ExtremaReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn central_difference(g1: &impl Fn(f64) -> f64, theta: f64) -> f64 {
    (g1(theta + DERIVATIVE_STEP) - g1(theta - DERIVATIVE_STEP)) / (2.0 * DERIVATIVE_STEP)
}

/// Checks that `dG1/dtheta` vanishes at each predicted angle, relative to its
/// largest magnitude over the scan grid.
pub fn verify_extrema(
    g1: impl Fn(f64) -> f64,
    scan: &AngularScan,
    predictions: &[ExtremumPrediction],
) -> ExtremaReport {
    let max_derivative = scan
        .theta
        .iter()
        .map(|&t| central_difference(&g1, t).abs())
        .fold(0.0, f64::max);
    let bound = EXTREMUM_TOLERANCE * max_derivative;
    let checks = predictions
        .iter()
        .map(|&prediction| {
            let derivative = central_difference(&g1, prediction.theta);
            ExtremumCheck {
                prediction,
                derivative,
                passed: derivative.abs() <= bound,
            }
        })
        .collect();
    ExtremaReport {
        max_derivative,
        checks,
    }
}

/// Grid indices of circular local minima of a sampled curve.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    if n < 3 {
        return vec![];
    }
    (0..n)
        .filter(|&k| {
            let prev = values[(k + n - 1) % n];
            let next = values[(k + 1) % n];
            values[k] < prev && values[k] <= next
        })
        .collect()
}

/// How closely a superbunched peak sits on a dark direction of `G1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarknessCheck {
    pub peak_theta: f64,
    /// Nearest local minimum of `G1` on the grid.
    pub minimum_theta: f64,
    pub offset: f64,
    /// `G1` at that minimum divided by the scan maximum of `G1`.
    pub relative_depth: f64,
}

pub fn darkness_checks(scan: &AngularScan, peaks: &PeakSet) -> Vec<DarknessCheck> {
    let minima = local_minima(&scan.g1_over_u);
    let g1_max = scan
        .g1_over_u
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    peaks
        .superbunched()
        .filter_map(|p| {
            let &k = minima.iter().min_by(|&&a, &&b| {
                circular_distance(scan.theta[a], p.theta)
                    .total_cmp(&circular_distance(scan.theta[b], p.theta))
            })?;
            Some(DarknessCheck {
                peak_theta: p.theta,
                minimum_theta: scan.theta[k],
                offset: circular_distance(scan.theta[k], p.theta),
                relative_depth: scan.g1_over_u[k] / g1_max,
            })
        })
        .collect()
}
