//! CSV serialization of states, spectra, profiles and diagnostics.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::designer::DesignResult;
use crate::dynamics::AmplitudePoint;
use crate::error::Result;
use crate::lattice::{SiteTag, StateVector, C64};
use crate::localizer::{InvariantScan, ProtectionReport};
use crate::nl_eigen::SpectrumSweep;
use crate::zeromode::CobwebTrajectory;

pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

pub fn write_rows_to<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    write_rows(File::create(path)?, rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub site_index: usize,
    pub cell: usize,
    pub sublattice: String,
    pub re: f64,
    pub im: f64,
}

/// Rows use 1-based site and cell labels.
pub fn state_rows(state: &StateVector) -> Vec<StateRow> {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let tag = SiteTag::of(j);
            StateRow { site_index: j + 1, cell: tag.cell, sublattice: tag.sublattice.label().to_string(), re: z.re, im: z.im }
        })
        .collect()
}

pub fn state_from_rows(rows: &[StateRow]) -> StateVector {
    let mut sorted: Vec<&StateRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.site_index);
    StateVector::new(sorted.iter().map(|r| C64::new(r.re, r.im)).collect())
}

pub fn write_state<W: Write>(writer: W, state: &StateVector) -> Result<()> {
    write_rows(writer, state_rows(state))
}

pub fn read_state<R: Read>(reader: R) -> Result<StateVector> {
    Ok(state_from_rows(&read_rows(reader)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub intensity: f64,
    pub eigenvalue_index: usize,
    pub omega: f64,
}

pub fn spectrum_rows(sweep: &SpectrumSweep) -> Vec<SpectrumRow> {
    sweep
        .intensities
        .iter()
        .zip(&sweep.spectra)
        .flat_map(|(&i, spec)| spec.iter().enumerate().map(move |(k, &w)| SpectrumRow { intensity: i, eigenvalue_index: k, omega: w }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub intensity: f64,
    pub omega: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
}

pub fn branch_rows(sweep: &SpectrumSweep) -> Vec<BranchRow> {
    sweep
        .intensities
        .iter()
        .zip(&sweep.tzm_branch)
        .map(|(&i, p)| BranchRow {
            intensity: i,
            omega: p.as_ref().map(|p| p.omega),
            residual: p.as_ref().map(|p| p.residual),
            iterations: p.as_ref().map(|p| p.iterations),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub site_index: usize,
    pub sublattice: String,
    pub amplitude: f64,
}

/// Real amplitudes of a full-chain state (imaginary parts dropped); use
/// after gauge fixing.
pub fn profile_rows(state: &StateVector) -> Vec<ProfileRow> {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(j, z)| ProfileRow { site_index: j + 1, sublattice: SiteTag::of(j).sublattice.label().to_string(), amplitude: z.re })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CobwebRow {
    pub step: usize,
    pub a_i: f64,
    pub a_next: f64,
}

pub fn cobweb_rows(traj: &CobwebTrajectory) -> Vec<CobwebRow> {
    traj.samples.iter().enumerate().map(|(k, &(a, b))| CobwebRow { step: k, a_i: a, a_next: b }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub bond_index: usize,
    pub kappa_tilde: f64,
    pub feasible: bool,
}

pub fn design_rows(design: &DesignResult) -> Vec<DesignRow> {
    design
        .kappa_tilde
        .iter()
        .zip(&design.feasible)
        .enumerate()
        .map(|(k, (&kt, &f))| DesignRow { bond_index: k + 1, kappa_tilde: kt, feasible: f })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub x: f64,
    /// Empty at a gap closing.
    pub invariant: Option<f64>,
    pub mu: f64,
    pub min_eigenvalue: f64,
}

pub fn scan_rows(scan: &InvariantScan) -> Vec<ScanRow> {
    scan.points.iter().map(|p| ScanRow { x: p.x, invariant: p.c, mu: p.mu, min_eigenvalue: p.min_eigenvalue }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectionRow {
    pub trial: usize,
    pub mu_max: f64,
    pub perturbation_norm: f64,
    pub bound_satisfied: bool,
    pub omega: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

pub fn protection_rows(reports: &[ProtectionReport]) -> Vec<ProtectionRow> {
    reports
        .iter()
        .map(|r| ProtectionRow {
            trial: r.trial,
            mu_max: r.mu_max,
            perturbation_norm: r.perturbation_norm,
            bound_satisfied: r.bound_satisfied,
            omega: r.post_perturbation_omega,
            residual: r.residual,
            error: r.error.clone(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub site_index: usize,
    pub re: f64,
    pub im: f64,
}

pub fn trajectory_rows(times: &[f64], states: &[StateVector]) -> Vec<TrajectoryRow> {
    times
        .iter()
        .zip(states)
        .flat_map(|(&t, s)| s.amplitudes().iter().enumerate().map(move |(j, z)| TrajectoryRow { t, site_index: j + 1, re: z.re, im: z.im }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiRow {
    pub t: f64,
    pub chi: f64,
}

pub fn chi_rows(series: &[(f64, f64)]) -> Vec<ChiRow> {
    series.iter().map(|&(t, chi)| ChiRow { t, chi }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    pub intensity: f64,
    pub converged: bool,
    pub residual: f64,
}

pub fn sweep_rows(points: &[AmplitudePoint]) -> Vec<SweepRow> {
    points
        .iter()
        .map(|p| SweepRow { amplitude: p.amplitude, intensity: p.intensity, converged: p.converged, residual: p.residual })
        .collect()
}
