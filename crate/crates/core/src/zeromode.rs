//! Exact zero modes from the a-sublattice recurrence.
//!
//! A zero mode with all `b_i = 0` must satisfy, on every b-site equation of
//! the nonlinear segment,
//!
//! ```text
//! nu_i a_i + (kappa_tilde_i + alpha a_{i+1}^2) a_{i+1} = 0,
//! ```
//!
//! a cubic in `a_{i+1}` that is strictly monotone when `kappa_tilde_i > 0`.
//! Its nonzero fixed point `|a| = sqrt((nu - kappa_tilde) / alpha)` is the
//! plateau. The linear segment adds `nu_n a_n + kappa_d a_{n+1} = 0` at the
//! interface and `t a_j + tau a_{j+1} = 0` beyond it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, StateVector};

/// Solves `alpha x^3 + kt x + nu a = 0` for the unique real root `x`.
pub fn forward_step(nu: f64, kt: f64, alpha: f64, a: f64) -> Result<f64> {
    if kt < 0.0 || alpha < 0.0 || (kt == 0.0 && alpha == 0.0) {
        return Err(Error::NonMonotone { kappa_tilde: kt, alpha });
    }
    let c = nu * a;
    if c == 0.0 {
        return Ok(0.0);
    }
    if alpha == 0.0 {
        return Ok(-c / kt);
    }
    // Solve g(y) = alpha y^3 + kt y - s = 0 for y = |x| > 0. g is convex on
    // y > 0, so Newton started from the right of the root decreases
    // monotonically onto it.
    let s = c.abs();
    let cube = (s / alpha).cbrt();
    let mut y = if kt > 0.0 { cube.min(s / kt) } else { cube };
    for _ in 0..200 {
        let g = alpha * y * y * y + kt * y - s;
        let dg = 3.0 * alpha * y * y + kt;
        let step = g / dg;
        if !(step > 0.0) {
            break;
        }
        y -= step;
        if step <= 1e-16 * y {
            break;
        }
    }
    Ok(-c.signum() * y)
}

/// Explicit inverse of [`forward_step`]: `a_i = -(kt + alpha a_{i+1}^2) a_{i+1} / nu`.
pub fn backward_step(nu: f64, kt: f64, alpha: f64, a_next: f64) -> f64 {
    -(kt + alpha * a_next * a_next) * a_next / nu
}

/// Nonzero fixed-point magnitude `sqrt((nu - kt) / alpha)`.
pub fn plateau_height(nu: f64, kt: f64, alpha: f64) -> Result<f64> {
    if !(nu > kt) || !(alpha > 0.0) {
        return Err(Error::NoPlateau { nu, kappa_tilde: kt, alpha });
    }
    Ok(((nu - kt) / alpha).sqrt())
}

/// Scaled residual of the recurrence on one bond.
pub fn bond_residual(nu: f64, kt: f64, alpha: f64, a: f64, a_next: f64) -> f64 {
    let t1 = nu * a;
    let t2 = kt * a_next;
    let t3 = alpha * a_next * a_next * a_next;
    (t1 + t2 + t3).abs() / 1f64.max(t1.abs()).max(t2.abs()).max(t3.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Exponential,
    PartialPlateau,
    FullPlateau,
    BoundaryConcentrated,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Exponential => "exponential",
            Regime::PartialPlateau => "partial_plateau",
            Regime::FullPlateau => "full_plateau",
            Regime::BoundaryConcentrated => "boundary_concentrated",
        }
    }
}

/// Thresholds for regime classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeThresholds {
    /// A cell sits on the plateau when `||a_i| - P_i| <= plateau_tol * P_i`.
    pub plateau_tol: f64,
    /// Consecutive plateau cells needed for a partial plateau.
    pub min_plateau_cells: usize,
    /// Full coverage when `|a_1| / P` lies within `1 +- full_tol`.
    pub full_tol: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            plateau_tol: 0.01,
            min_plateau_cells: 3,
            full_tol: 0.02,
        }
    }
}

/// Zero mode supported on the a-sublattice. `a` lists `a_1 ... a_{n_nl + n_lin_a}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceProfile {
    pub a: Vec<f64>,
    pub intensity: f64,
    pub regime: Regime,
}

impl RecurrenceProfile {
    /// Full-chain state with `b = 0` everywhere.
    pub fn to_state(&self, spec: &LatticeSpec) -> StateVector {
        let mut v = vec![0.0; spec.n_sites()];
        for (i, &a) in self.a.iter().enumerate() {
            v[2 * i] = a;
        }
        StateVector::from_real(&v)
    }

    /// Largest scaled recurrence residual over the nonlinear bonds.
    pub fn max_bond_residual(&self, spec: &LatticeSpec) -> f64 {
        (0..spec.n_nl - 1)
            .map(|i| bond_residual(spec.nu[i], spec.kappa_tilde[i], spec.alpha, self.a[i], self.a[i + 1]))
            .fold(0.0, f64::max)
    }
}

fn require_zero_mode_termination(spec: &LatticeSpec) -> Result<()> {
    spec.validate()?;
    if spec.n_lin_a != spec.n_lin_b + 1 {
        return Err(Error::InvalidParameter(format!(
            "an a-only zero mode needs an a-terminated linear segment (n_lin_a = n_lin_b + 1), got {} and {}",
            spec.n_lin_a, spec.n_lin_b
        )));
    }
    Ok(())
}

/// Plateau magnitude seen by each nonlinear cell (the last cell reuses the
/// preceding bond). `None` where the bond has no plateau.
fn cell_plateaus(spec: &LatticeSpec) -> Vec<Option<f64>> {
    let n = spec.n_nl;
    (0..n)
        .map(|i| {
            let b = i.min(n.saturating_sub(2));
            if n < 2 {
                return None;
            }
            plateau_height(spec.nu[b], spec.kappa_tilde[b], spec.alpha).ok()
        })
        .collect()
}

/// Amplitudes generated from a left-edge value `a_1`, without sign fixing.
pub fn profile_from_edge(spec: &LatticeSpec, a1: f64) -> Result<Vec<f64>> {
    let n = spec.n_nl;
    let mut a = Vec::with_capacity(n + spec.n_lin_a);
    a.push(a1);
    for i in 0..n - 1 {
        let next = forward_step(spec.nu[i], spec.kappa_tilde[i], spec.alpha, a[i])?;
        a.push(next);
    }
    a.push(-spec.nu[n - 1] * a[n - 1] / spec.kappa_d);
    let ratio = -spec.t / spec.tau;
    for _ in 1..spec.n_lin_a {
        let last = *a.last().unwrap();
        a.push(ratio * last);
    }
    Ok(a)
}

fn sum_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

fn classify(spec: &LatticeSpec, a: &[f64], th: &RegimeThresholds) -> Regime {
    let plateaus = cell_plateaus(spec);
    let Some(p1) = plateaus[0] else {
        return Regime::Exponential;
    };
    let edge = a[0].abs() / p1;
    if edge > 1.0 + th.full_tol {
        return Regime::BoundaryConcentrated;
    }
    if edge >= 1.0 - th.full_tol {
        return Regime::FullPlateau;
    }
    let mut run = 0;
    let mut best = 0;
    for (ai, p) in a.iter().zip(&plateaus) {
        match p {
            Some(p) if (ai.abs() - p).abs() <= th.plateau_tol * p => {
                run += 1;
                best = best.max(run);
            }
            _ => run = 0,
        }
    }
    if best >= th.min_plateau_cells {
        Regime::PartialPlateau
    } else {
        Regime::Exponential
    }
}

/// Zero mode of total intensity `intensity` with default classification thresholds.
pub fn construct_tzm(spec: &LatticeSpec, intensity: f64) -> Result<RecurrenceProfile> {
    construct_tzm_with(spec, intensity, &RegimeThresholds::default())
}

pub fn construct_tzm_with(spec: &LatticeSpec, intensity: f64, th: &RegimeThresholds) -> Result<RecurrenceProfile> {
    require_zero_mode_termination(spec)?;
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(Error::InvalidParameter(format!("intensity {intensity} must be positive")));
    }
    let total = |ln_a1: f64| -> Result<f64> { Ok(sum_sq(&profile_from_edge(spec, ln_a1.exp())?)) };

    // The forward map amplifies small amplitudes geometrically, so a_1 spans
    // hundreds of decades; bracket and bisect in log space.
    let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
    let floor = (1e-300_f64).ln();
    while total(lo)? >= intensity {
        lo -= 23.0;
        if lo < floor {
            return Err(Error::RootBracketFailure { lo: lo.exp(), hi: 1.0, target: intensity });
        }
    }
    while total(hi)? <= intensity {
        hi += 1.0;
        if hi > 40.0 {
            return Err(Error::RootBracketFailure { lo: lo.exp(), hi: hi.exp(), target: intensity });
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid)? < intensity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a_lo = profile_from_edge(spec, lo.exp())?;
    let a_hi = profile_from_edge(spec, hi.exp())?;
    let mut a = if (sum_sq(&a_lo) - intensity).abs() <= (sum_sq(&a_hi) - intensity).abs() { a_lo } else { a_hi };

    if a[spec.n_nl - 1] < 0.0 {
        a.iter_mut().for_each(|x| *x = -*x);
    }
    let regime = classify(spec, &a, th);
    Ok(RecurrenceProfile { intensity: sum_sq(&a), a, regime })
}

/// Intensity at which the left edge reaches `(1 - epsilon)` of the plateau.
/// Total intensity is strictly increasing in `|a_1|`, so this is the unique
/// root in `I` of `a_1(I) = (1 - epsilon) P`.
pub fn find_i2(spec: &LatticeSpec, epsilon: f64) -> Result<f64> {
    require_zero_mode_termination(spec)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must lie in (0, 1)")));
    }
    if spec.n_nl < 2 {
        return Err(Error::InvalidParameter("need at least two nonlinear cells".into()));
    }
    let p = plateau_height(spec.nu[0], spec.kappa_tilde[0], spec.alpha)?;
    Ok(sum_sq(&profile_from_edge(spec, (1.0 - epsilon) * p)?))
}

/// Smallest intensity at which `min_plateau_cells` consecutive cells sit on
/// the plateau. Descriptive only.
pub fn plateau_onset(spec: &LatticeSpec, th: &RegimeThresholds) -> Result<f64> {
    require_zero_mode_termination(spec)?;
    let p = plateau_height(spec.nu[0], spec.kappa_tilde[0], spec.alpha)?;
    let has_plateau = |ln_a1: f64| -> Result<bool> {
        let a = profile_from_edge(spec, ln_a1.exp())?;
        let strict = RegimeThresholds { full_tol: 0.0, ..*th };
        Ok(classify(spec, &a, &strict) != Regime::Exponential)
    };
    let mut lo = (1e-300_f64).ln();
    let mut hi = p.ln();
    if has_plateau(lo)? || !has_plateau(hi)? {
        return Err(Error::RootBracketFailure { lo: lo.exp(), hi: hi.exp(), target: f64::NAN });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if has_plateau(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(sum_sq(&profile_from_edge(spec, hi.exp())?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConvergedToPlateau,
    ConvergedToZero,
    Diverged,
    /// None of the stopping tests fired within `max_steps`.
    Undecided,
}

/// Iterates of the recurrence map; every sample is a pair `(a_i, a_{i+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct CobwebTrajectory {
    pub direction: Direction,
    pub samples: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

/// Iterates the map from `a_start`. Increasing runs walk the bonds from the
/// left edge, decreasing runs from the interface; past the segment end the
/// edge bond is reused.
pub fn cobweb(spec: &LatticeSpec, a_start: f64, direction: Direction, max_steps: usize) -> Result<CobwebTrajectory> {
    if max_steps == 0 {
        return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
    }
    if spec.n_nl < 2 {
        return Err(Error::InvalidParameter("need at least two nonlinear cells".into()));
    }
    let nb = spec.n_nl - 1;
    let bond = |k: usize| match direction {
        Direction::Increasing => k.min(nb - 1),
        Direction::Decreasing => nb - 1 - k.min(nb - 1),
    };
    let p_ref = plateau_height(spec.nu[bond(0)], spec.kappa_tilde[bond(0)], spec.alpha)?;
    let mut samples = Vec::with_capacity(max_steps);
    let mut current = a_start;
    let mut verdict = Verdict::Undecided;
    for k in 0..max_steps {
        let b = bond(k);
        let (nu, kt) = (spec.nu[b], spec.kappa_tilde[b]);
        let p = plateau_height(nu, kt, spec.alpha).unwrap_or(p_ref);
        let next = match direction {
            Direction::Increasing => {
                let x = forward_step(nu, kt, spec.alpha, current)?;
                samples.push((current, x));
                x
            }
            Direction::Decreasing => {
                let x = backward_step(nu, kt, spec.alpha, current);
                samples.push((x, current));
                x
            }
        };
        current = next;
        if !current.is_finite() || current.abs() > 1e3 * p {
            verdict = Verdict::Diverged;
            break;
        }
        if (current.abs() - p).abs() < 1e-8 {
            verdict = Verdict::ConvergedToPlateau;
            break;
        }
        if current.abs() < 1e-12 {
            verdict = Verdict::ConvergedToZero;
            break;
        }
    }
    Ok(CobwebTrajectory { direction, samples, verdict })
}
