//! Inverse design of the linear intercell couplings so that the saturated
//! zero mode follows a prescribed magnitude profile.
//!
//! With the gauge `a_i = (-1)^(n - i) m_i` the recurrence inverts bond by bond:
//! `kappa_tilde_i = nu_i m_i / m_{i+1} - alpha m_{i+1}^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::nl_eigen::{sweep_spectrum, SolverOptions};
use crate::zeromode::construct_tzm;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape", deny_unknown_fields)]
pub enum Shape {
    Uniform { level: f64 },
    /// `high` on the central `duty` fraction of the segment, `low` elsewhere.
    Square { low: f64, high: f64, duty: f64 },
    /// Linear ramp from `base` at both ends to `peak` in the middle.
    Triangle { base: f64, peak: f64 },
    /// `offset + amplitude cos(2 pi (i - 1) / (n - 1))`.
    Cosine { offset: f64, amplitude: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeTag {
    Uniform,
    Square,
    Triangle,
    Cosine,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetProfile {
    pub magnitudes: Vec<f64>,
    pub tag: ShapeTag,
}

impl TargetProfile {
    pub fn custom(magnitudes: Vec<f64>) -> Result<Self> {
        check_positive(&magnitudes)?;
        Ok(TargetProfile { magnitudes, tag: ShapeTag::Custom })
    }

    /// Signed amplitudes in the design gauge (`a_n > 0`, alternating).
    pub fn signed(&self) -> Vec<f64> {
        let n = self.magnitudes.len();
        self.magnitudes
            .iter()
            .enumerate()
            .map(|(i, m)| if (n - 1 - i) % 2 == 0 { *m } else { -*m })
            .collect()
    }
}

fn check_positive(m: &[f64]) -> Result<()> {
    match m.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        Some((i, v)) => Err(Error::NonpositiveTarget { cell: i + 1, value: *v }),
        None => Ok(()),
    }
}

pub fn make_target(shape: Shape, n: usize) -> Result<TargetProfile> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("target length {n} must be at least 2")));
    }
    let u = |i: usize| i as f64 / (n - 1) as f64;
    let (magnitudes, tag): (Vec<f64>, ShapeTag) = match shape {
        Shape::Uniform { level } => (vec![level; n], ShapeTag::Uniform),
        Shape::Square { low, high, duty } => {
            if !(0.0..=1.0).contains(&duty) {
                return Err(Error::InvalidParameter(format!("duty {duty} must lie in [0, 1]")));
            }
            let m = (0..n)
                .map(|i| if (u(i) - 0.5).abs() <= 0.5 * duty + 1e-12 { high } else { low })
                .collect();
            (m, ShapeTag::Square)
        }
        Shape::Triangle { base, peak } => {
            let m = (0..n).map(|i| base + (peak - base) * (1.0 - (2.0 * u(i) - 1.0).abs())).collect();
            (m, ShapeTag::Triangle)
        }
        Shape::Cosine { offset, amplitude } => {
            if !(offset > amplitude.abs()) {
                return Err(Error::InvalidParameter(format!(
                    "cosine offset {offset} must exceed |amplitude| = {}",
                    amplitude.abs()
                )));
            }
            let m = (0..n)
                .map(|i| offset + amplitude * (2.0 * std::f64::consts::PI * u(i)).cos())
                .collect();
            (m, ShapeTag::Cosine)
        }
    };
    check_positive(&magnitudes)?;
    Ok(TargetProfile { magnitudes, tag })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignResult {
    pub kappa_tilde: Vec<f64>,
    /// `0 < kappa_tilde_i < nu_i` per bond.
    pub feasible: Vec<bool>,
    /// Intensity of the designed zero mode: target plus linear tail.
    pub design_intensity: f64,
    /// Base spec with the designed couplings substituted.
    pub spec: LatticeSpec,
}

impl DesignResult {
    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }

    pub fn infeasible_bonds(&self) -> Vec<usize> {
        self.feasible.iter().enumerate().filter(|(_, f)| !**f).map(|(i, _)| i + 1).collect()
    }
}

pub fn design_couplings(base: &LatticeSpec, target: &TargetProfile) -> Result<DesignResult> {
    let m = &target.magnitudes;
    check_positive(m)?;
    let n = base.n_nl;
    if m.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.len() });
    }
    let alpha = base.alpha;
    let kappa_tilde: Vec<f64> = (0..n - 1)
        .map(|i| base.nu[i] * m[i] / m[i + 1] - alpha * m[i + 1] * m[i + 1])
        .collect();
    let feasible: Vec<bool> = kappa_tilde
        .iter()
        .zip(&base.nu)
        .map(|(&k, &nu)| k > 0.0 && k < nu)
        .collect();
    for (i, ok) in feasible.iter().enumerate() {
        if !ok {
            log::warn!("designed bond {} has kappa_tilde = {} outside (0, nu)", i + 1, kappa_tilde[i]);
        }
    }

    let tail0 = base.nu[n - 1] * m[n - 1] / base.kappa_d;
    let r2 = (base.t / base.tau).powi(2);
    let tail: f64 = (0..base.n_lin_a).map(|k| tail0 * tail0 * r2.powi(k as i32)).sum();
    let design_intensity = m.iter().map(|x| x * x).sum::<f64>() + tail;

    let mut spec = base.clone();
    spec.kappa_tilde = kappa_tilde.clone();
    Ok(DesignResult {
        kappa_tilde,
        feasible,
        design_intensity,
        spec,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignReport {
    pub design_intensity: f64,
    /// 1-based inclusive cell range used for the deviation.
    pub interior: (usize, usize),
    /// Sup-norm relative deviation of the recurrence profile from the target.
    pub recurrence_deviation: f64,
    /// Same for the self-consistent eigenmode.
    pub eigen_deviation: f64,
    pub omega: f64,
    pub residual: f64,
}

/// Default interior: cells `5 ..= n - 1`.
pub fn default_interior(n: usize) -> (usize, usize) {
    (5.min(n), n.saturating_sub(1).max(1))
}

fn deviation(a: &[f64], m: &[f64], (lo, hi): (usize, usize)) -> f64 {
    (lo..=hi)
        .map(|c| (a[c - 1].abs() - m[c - 1]).abs() / m[c - 1])
        .fold(0.0, f64::max)
}

/// Checks a design with both the exact recurrence and the self-consistent
/// solver at the design intensity. The solver is reached by continuation
/// from the linear zero mode.
pub fn verify_design(designed: &LatticeSpec, target: &TargetProfile, opts: &SolverOptions) -> Result<DesignReport> {
    verify_design_on(designed, target, opts, default_interior(designed.n_nl))
}

pub fn verify_design_on(
    designed: &LatticeSpec,
    target: &TargetProfile,
    opts: &SolverOptions,
    interior: (usize, usize),
) -> Result<DesignReport> {
    let design = design_couplings(designed, target)?;
    let i_design = design.design_intensity;
    let m = &target.magnitudes;
    if interior.0 < 1 || interior.1 > m.len() || interior.0 > interior.1 {
        return Err(Error::InvalidParameter(format!("interior {interior:?} outside 1..={}", m.len())));
    }

    let profile = construct_tzm(designed, i_design)?;
    let recurrence_deviation = deviation(&profile.a, m, interior);

    let sweep = sweep_spectrum(designed, &[i_design], opts)?;
    let pair = match sweep.tzm_branch.into_iter().next().flatten() {
        Some(p) => p,
        None => {
            let msg = sweep.failures.first().map(|f| f.1.clone()).unwrap_or_default();
            return Err(Error::InvalidParameter(format!("self-consistent solve failed: {msg}")));
        }
    };
    let a: Vec<f64> = pair.state.real_gauge().iter().step_by(2).copied().collect();
    let eigen_deviation = deviation(&a, m, interior);
    Ok(DesignReport {
        design_intensity: i_design,
        interior,
        recurrence_deviation,
        eigen_deviation,
        omega: pair.omega,
        residual: pair.residual,
    })
}
