//! End-to-end runs, parameter sweeps and their file formats.
//!
//! Angles are radians inside the crate and degrees in every file written here.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{find_peaks, PeakSet};
use crate::config::ChainConfig;
use crate::correlations::{
    expectations, pair_coherence, second_order_coherences, AngularScan, SecondOrderCoherences,
};
use crate::couplings::CouplingMatrices;
use crate::error::{Error, Result};
use crate::liouvillian::{generator_for, steady_state, DensityMatrix};

pub const MIN_GRID_POINTS: usize = 360;
pub const DEFAULT_GRID_POINTS: usize = crate::correlations::DEFAULT_GRID_POINTS;

pub const SCAN_HEADER: [&str; 5] = ["theta_deg", "g1_over_u", "g2_over_u2", "g2_norm", "c2"];
pub const SUMMARY_HEADER: [&str; 5] =
    ["swept_value", "n_peaks", "max_g2", "peak_angles_deg", "v12"];

const HERMITICITY_TOLERANCE: f64 = 1e-12;
const TRACE_TOLERANCE: f64 = 1e-12;
const EIGENVALUE_FLOOR: f64 = -1e-10;

/// `<S_i^+ S_j^->` for `i < j` with its magnitude and phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceEntry {
    pub i: usize,
    pub j: usize,
    pub value: Complex64,
    pub v: f64,
    pub psi: f64,
    pub defined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub residual: f64,
    pub kernel_dimension: usize,
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    pub gamma_min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub config: ChainConfig,
    pub couplings: CouplingMatrices,
    pub populations: Vec<f64>,
    pub coherences: Vec<CoherenceEntry>,
    pub second_order: SecondOrderCoherences,
    pub scan: AngularScan,
    pub peaks: PeakSet,
    pub diagnostics: SolverDiagnostics,
}

impl ResultDocument {
    pub fn coherence(&self, i: usize, j: usize) -> Option<&CoherenceEntry> {
        self.coherences.iter().find(|c| c.i == i && c.j == j)
    }

    /// Degree of first-order coherence between the first two atoms, when defined.
    pub fn v12(&self) -> Option<f64> {
        self.coherence(1, 2).filter(|c| c.defined).map(|c| c.v)
    }
}

/// Steady state of a validated config together with its state checks.
pub fn solve(cfg: &ChainConfig) -> Result<(CouplingMatrices, DensityMatrix, SolverDiagnostics)> {
    let cfg = cfg.validate()?;
    let (couplings, _, generator) = generator_for(&cfg)?;
    let gamma_min_eigenvalue = couplings.min_gamma_eigenvalue();
    if !couplings.gamma_is_psd() {
        return Err(Error::InvariantViolated(format!(
            "damping matrix has eigenvalue {gamma_min_eigenvalue:e}"
        )));
    }
    let ss = steady_state(&generator)?;
    let checks = ss.rho.checks();
    if !checks.passes(HERMITICITY_TOLERANCE, TRACE_TOLERANCE, EIGENVALUE_FLOOR) {
        return Err(Error::InvariantViolated(format!("{checks:?}")));
    }
    let diagnostics = SolverDiagnostics {
        residual: ss.residual,
        kernel_dimension: ss.kernel_dimension,
        hermiticity_error: checks.hermiticity_error,
        trace_error: checks.trace_error,
        min_eigenvalue: checks.min_eigenvalue,
        gamma_min_eigenvalue,
    };
    Ok((couplings, ss.rho, diagnostics))
}

/// Couplings, steady state, correlations, angular scan and peaks for one config.
pub fn run_scan(cfg: &ChainConfig, grid_points: usize) -> Result<ResultDocument> {
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::GridTooCoarse {
            points: grid_points,
            minimum: MIN_GRID_POINTS,
        });
    }
    let (couplings, rho, diagnostics) = solve(cfg)?;
    let corr = expectations(&rho);
    let n = cfg.n_atoms;
    let populations = (1..=n).map(|i| corr.population(i)).collect();
    let mut coherences = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            let pc = pair_coherence(&corr, i, j)?;
            coherences.push(CoherenceEntry {
                i,
                j,
                value: corr.first(i, j),
                v: pc.v,
                psi: pc.psi,
                defined: pc.defined,
            });
        }
    }
    let scan = AngularScan::compute(&corr, cfg, grid_points);
    let peaks = find_peaks(&scan);
    Ok(ResultDocument {
        config: *cfg,
        couplings,
        populations,
        coherences,
        second_order: second_order_coherences(&corr, cfg),
        scan,
        peaks,
        diagnostics,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Per-angle table with the header in [`SCAN_HEADER`]; undefined `g2_norm` is left empty.
pub fn write_scan_csv<W: Write>(scan: &AngularScan, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCAN_HEADER).map_err(csv_error)?;
    for k in 0..scan.len() {
        w.write_record([
            format!("{:e}", scan.theta[k].to_degrees()),
            format!("{:e}", scan.g1_over_u[k]),
            format!("{:e}", scan.g2_over_u2[k]),
            fmt_opt(scan.g2_norm[k]),
            format!("{:e}", scan.c2[k]),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_document(doc: &ResultDocument, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(doc).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn read_document(path: &Path) -> Result<ResultDocument> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Contents of a run configuration file: the chain plus an optional grid size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    #[serde(flatten)]
    pub chain: ChainConfig,
    pub grid_points: Option<usize>,
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_run_file(path: &Path) -> Result<RunFile> {
    parse_toml(path)
}

/// Command-line replacements for individual config fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfigOverrides {
    pub atoms: Option<usize>,
    pub spacing: Option<f64>,
    pub drive_index: Option<usize>,
    pub rabi: Option<f64>,
}

impl ConfigOverrides {
    /// Applies the overrides to `base`, or builds a config from them alone when
    /// there is no base; every field must then be given.
    pub fn resolve(&self, base: Option<ChainConfig>) -> Result<ChainConfig> {
        let cfg = match base {
            Some(mut cfg) => {
                if let Some(n) = self.atoms {
                    cfg.n_atoms = n;
                }
                if let Some(d) = self.spacing {
                    cfg.spacing_over_lambda = d;
                }
                if let Some(l) = self.drive_index {
                    cfg.driven_atom = l;
                }
                if let Some(r) = self.rabi {
                    cfg.rabi_over_gamma = r;
                }
                cfg
            }
            None => {
                let missing: Vec<&str> = [
                    ("--atoms", self.atoms.is_none()),
                    ("--spacing", self.spacing.is_none()),
                    ("--drive-index", self.drive_index.is_none()),
                    ("--rabi", self.rabi.is_none()),
                ]
                .iter()
                .filter(|(_, m)| *m)
                .map(|(f, _)| *f)
                .collect();
                if !missing.is_empty() {
                    return Err(Error::Config(format!(
                        "no --config given and missing {}",
                        missing.join(", ")
                    )));
                }
                ChainConfig::new(
                    self.atoms.unwrap_or_default(),
                    self.spacing.unwrap_or_default(),
                    self.drive_index.unwrap_or_default(),
                    self.rabi.unwrap_or_default(),
                )
            }
        };
        cfg.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    SpacingOverLambda,
    RabiOverGamma,
    DrivenAtom,
    NAtoms,
}

impl SweptParameter {
    pub fn apply(self, base: &ChainConfig, value: f64) -> Result<ChainConfig> {
        let as_index = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!(
                    "{self:?} needs a positive integer, got {v}"
                )))
            }
        };
        let mut cfg = *base;
        match self {
            SweptParameter::SpacingOverLambda => cfg.spacing_over_lambda = value,
            SweptParameter::RabiOverGamma => cfg.rabi_over_gamma = value,
            SweptParameter::DrivenAtom => cfg.driven_atom = as_index(value)?,
            SweptParameter::NAtoms => cfg.n_atoms = as_index(value)?,
        }
        cfg.validate()
    }
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ChainConfig,
    pub parameter: SweptParameter,
    pub values: Vec<f64>,
    pub output_dir: PathBuf,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        parse_toml(path)
    }

    /// Fails on the first swept value that does not give a valid config.
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        for &v in &self.values {
            self.parameter.apply(&self.base, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: std::result::Result<ResultDocument, Error>,
}

pub const SUMMARY_FILE: &str = "summary.csv";

pub fn point_stem(index: usize) -> String {
    format!("point_{index:03}")
}

/// Runs every swept value in parallel. Each point writes `point_NNN.json` and
/// `point_NNN.csv`; `summary.csv` lists all points in input order, with
/// failures reported in the `peak_angles_deg` column as `error: ...`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    if spec.values.is_empty() {
        return Ok(vec![]);
    }
    spec.base.validate()?;
    fs::create_dir_all(&spec.output_dir)?;

    let run_point = |(index, &value): (usize, &f64)| -> SweepPoint {
        let outcome = spec
            .parameter
            .apply(&spec.base, value)
            .and_then(|cfg| run_scan(&cfg, spec.grid_points))
            .and_then(|doc| {
                let stem = spec.output_dir.join(point_stem(index));
                write_document(&doc, &stem.with_extension("json"))?;
                write_scan_csv(&doc.scan, fs::File::create(stem.with_extension("csv"))?)?;
                Ok(doc)
            });
        SweepPoint { value, outcome }
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = spec.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Io(e.to_string()))?;
    let points: Vec<SweepPoint> =
        pool.install(|| spec.values.par_iter().enumerate().map(run_point).collect());

    write_summary_csv(
        &points,
        fs::File::create(spec.output_dir.join(SUMMARY_FILE))?,
    )?;
    Ok(points)
}

pub fn write_summary_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for p in points {
        let record = match &p.outcome {
            Ok(doc) => {
                let angles: Vec<String> = doc
                    .peaks
                    .peaks
                    .iter()
                    .map(|q| format!("{:e}", q.theta.to_degrees()))
                    .collect();
                [
                    format!("{:e}", p.value),
                    doc.peaks.peaks.len().to_string(),
                    fmt_opt(doc.peaks.max_value()),
                    angles.join(";"),
                    fmt_opt(doc.v12()),
                ]
            }
            Err(e) => [
                format!("{:e}", p.value),
                String::new(),
                String::new(),
                format!("error: {e}"),
                String::new(),
            ],
        };
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One expected peak of a regression file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedPeak {
    pub theta_deg: f64,
    pub tolerance_deg: f64,
    #[serde(default)]
    pub min_value: Option<f64>,
}

/// Assertions on a [`PeakSet`], read from TOML:
///
/// ```toml
/// superbunched_count = 2
/// [[peak]]
/// theta_deg = 71.0
/// tolerance_deg = 2.0
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectedPeaks {
    #[serde(default)]
    pub superbunched_count: Option<usize>,
    #[serde(default, rename = "peak")]
    pub peaks: Vec<ExpectedPeak>,
}

impl ExpectedPeaks {
    pub fn load(path: &Path) -> Result<Self> {
        parse_toml(path)
    }

    /// Human-readable violations; empty when every assertion holds.
    pub fn violations(&self, set: &PeakSet) -> Vec<String> {
        let mut out = Vec::new();
        let superbunched = set.superbunched().count();
        if let Some(expected) = self.superbunched_count {
            if superbunched != expected {
                out.push(format!(
                    "expected {expected} superbunched peaks, found {superbunched}"
                ));
            }
        }
        for e in &self.peaks {
            let hit = set.peaks.iter().find(|p| {
                let d = (p.theta.to_degrees() - e.theta_deg).rem_euclid(360.0);
                d.min(360.0 - d) <= e.tolerance_deg
            });
            match hit {
                None => out.push(format!(
                    "no peak within {} deg of {} deg",
                    e.tolerance_deg, e.theta_deg
                )),
                Some(p) => {
                    if let Some(min) = e.min_value {
                        if p.value < min {
                            out.push(format!(
                                "peak at {:.3} deg has g2 {:e}, below {min:e}",
                                p.theta.to_degrees(),
                                p.value
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}
