//! Driven-dissipative excitation of zero modes.
//!
//! The field obeys
//!
//! ```text
//! d phi / dt = -i (H(phi) + H0) phi + A S exp(-i w t),   H0 = -i diag(l),
//! ```
//!
//! with loss `l_a` on a-sites and `l_b` on b-sites. In the rotating frame
//! `phi = phi~ exp(-i w t)` a steady state solves
//! `(H(phi~) + H0 - w) phi~ = -i A S`, which implies the power balance
//! `sum_j l_j |phi~_j|^2 = A Re <phi~|S>`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Couplings, LatticeSpec, StateVector, Sublattice, C64};
use crate::zeromode::forward_step;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub amplitude: f64,
    pub source: Vec<C64>,
    pub omega_tilde: f64,
    pub l_a: f64,
    pub l_b: f64,
}

impl DriveConfig {
    /// Unit source on the first linear a-site, default losses, `w = 0`.
    pub fn single_source(spec: &LatticeSpec, amplitude: f64) -> Self {
        let mut source = vec![ZERO; spec.n_sites()];
        source[spec.first_linear_site()] = C64::new(1.0, 0.0);
        DriveConfig {
            amplitude,
            source,
            omega_tilde: 0.0,
            l_a: 0.01,
            l_b: 0.5,
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        DriveConfig { amplitude, ..self.clone() }
    }

    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        if self.source.len() != spec.n_sites() {
            return Err(Error::DimensionMismatch { expected: spec.n_sites(), got: self.source.len() });
        }
        if let Some(j) = (0..spec.first_linear_site()).find(|&j| self.source[j] != ZERO) {
            return Err(Error::InvalidParameter(format!(
                "source has weight on nonlinear site {j}; sources must sit in the linear segment"
            )));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!("amplitude {} must be non-negative", self.amplitude)));
        }
        if !(self.l_a >= 0.0 && self.l_b >= 0.0) {
            return Err(Error::InvalidParameter(format!("losses ({}, {}) must be non-negative", self.l_a, self.l_b)));
        }
        if !self.omega_tilde.is_finite() {
            return Err(Error::InvalidParameter("omega_tilde must be finite".into()));
        }
        Ok(())
    }

    /// Per-site loss vector.
    pub fn losses(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| match Sublattice::of_site(j) {
                Sublattice::A => self.l_a,
                Sublattice::B => self.l_b,
            })
            .collect()
    }
}

/// Right-hand side of the equation of motion.
struct Rhs<'a> {
    couplings: &'a Couplings,
    losses: Vec<f64>,
    drive: &'a DriveConfig,
}

impl Rhs<'_> {
    fn eval(&self, t: f64, phi: &[C64], out: &mut [C64]) {
        let h = self.couplings.hamiltonian_complex(phi);
        let hp = h.apply(phi);
        let phase = C64::from_polar(self.drive.amplitude, -self.drive.omega_tilde * t);
        for j in 0..phi.len() {
            out[j] = -I * hp[j] - phi[j] * self.losses[j] + self.drive.source[j] * phase;
        }
    }
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Fixed-step classical RK4 integration. `observe(t, phi)` is called at
/// `t = 0` and after every `stride`-th step; returning `false` stops early.
/// Returns the final time and state.
pub fn integrate<F>(spec: &LatticeSpec, drive: &DriveConfig, psi0: &[C64], t_end: f64, dt: f64, stride: usize, mut observe: F) -> Result<(f64, Vec<C64>)>
where
    F: FnMut(f64, &[C64]) -> bool,
{
    drive.validate(spec)?;
    let couplings = spec.couplings();
    couplings.check_len(psi0.len())?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and t_end >= 0 (dt = {dt}, t_end = {t_end})")));
    }
    let limit = 0.05 / couplings.max_linear_coupling().max(f64::MIN_POSITIVE);
    if dt > limit {
        return Err(Error::InvalidParameter(format!("dt = {dt} exceeds the stability guard {limit:.4}")));
    }
    let stride = stride.max(1);
    let rhs = Rhs { couplings: &couplings, losses: drive.losses(psi0.len()), drive };
    let n = psi0.len();
    let steps = (t_end / dt).round() as usize;
    let mut phi = psi0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let mut tmp = vec![ZERO; n];
    let mut t = 0.0;
    if !observe(t, &phi) {
        return Ok((t, phi));
    }
    for step in 1..=steps {
        rhs.eval(t, &phi, &mut k1);
        for j in 0..n {
            tmp[j] = phi[j] + k1[j] * (0.5 * dt);
        }
        rhs.eval(t + 0.5 * dt, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = phi[j] + k2[j] * (0.5 * dt);
        }
        rhs.eval(t + 0.5 * dt, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = phi[j] + k3[j] * dt;
        }
        rhs.eval(t + dt, &tmp, &mut k4);
        for j in 0..n {
            phi[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (dt / 6.0);
        }
        t = step as f64 * dt;
        let norm = l2(&phi);
        if !norm.is_finite() || norm > 1e6 {
            return Err(Error::StepSizeTooLarge { time: t, norm });
        }
        if step % stride == 0 && !observe(t, &phi) {
            break;
        }
    }
    Ok((t, phi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

pub fn evolve(spec: &LatticeSpec, drive: &DriveConfig, psi0: &StateVector, t_end: f64, dt: f64, stride: usize) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord { times: Vec::new(), states: Vec::new() };
    integrate(spec, drive, psi0.amplitudes(), t_end, dt, stride, |t, phi| {
        rec.times.push(t);
        rec.states.push(StateVector::new(phi.to_vec()));
        true
    })?;
    Ok(rec)
}

/// Integrates from `psi0` until the rotating-frame state changes by less
/// than `tol` (sup-norm) over one comparison window: one drive period, or
/// one time unit at `w = 0`. Returns the rotating-frame state and the time.
pub fn relax_to_steady(spec: &LatticeSpec, drive: &DriveConfig, psi0: &StateVector, t_max: f64, dt: f64, tol: f64) -> Result<(StateVector, f64)> {
    let window = if drive.omega_tilde == 0.0 { 1.0 } else { 2.0 * std::f64::consts::PI / drive.omega_tilde.abs() };
    let stride = ((window / dt).round() as usize).max(1);
    let mut previous: Option<Vec<C64>> = None;
    let mut settled: Option<(Vec<C64>, f64)> = None;
    integrate(spec, drive, psi0.amplitudes(), t_max, dt, stride, |t, phi| {
        let rot = C64::from_polar(1.0, drive.omega_tilde * t);
        let frame: Vec<C64> = phi.iter().map(|z| z * rot).collect();
        if let Some(prev) = &previous {
            let change = frame.iter().zip(prev).fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()));
            if change < tol {
                settled = Some((frame, t));
                return false;
            }
        }
        previous = Some(frame);
        true
    })?;
    match settled {
        Some((phi, t)) => Ok((StateVector::new(phi), t)),
        None => Err(Error::NoConvergence { iterations: (t_max / window) as usize, residual: f64::NAN }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mixing: f64,
    /// Fall back to Newton's method on the real `2N` system.
    pub newton: bool,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions { tol: 1e-10, max_iter: 2000, mixing: 0.5, newton: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub phi_tilde: StateVector,
    pub amplitude: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl SteadyState {
    pub fn intensity(&self) -> f64 {
        self.phi_tilde.intensity()
    }
}

/// `||(H(phi) + H0 - w) phi + i A S||_2`.
pub fn steady_residual(spec: &LatticeSpec, drive: &DriveConfig, phi: &[C64]) -> f64 {
    let c = spec.couplings();
    l2(&stationarity(&c, &drive.losses(phi.len()), drive, phi))
}

fn stationarity(c: &Couplings, losses: &[f64], drive: &DriveConfig, phi: &[C64]) -> Vec<C64> {
    let hp = c.hamiltonian_complex(phi).apply(phi);
    (0..phi.len())
        .map(|j| hp[j] - I * losses[j] * phi[j] - phi[j] * drive.omega_tilde + I * drive.amplitude * drive.source[j])
        .collect()
}

/// Scale for the stationarity residual.
fn steady_scale(drive: &DriveConfig) -> f64 {
    1f64.max(drive.amplitude * l2(&drive.source))
}

fn green_update(c: &Couplings, losses: &[f64], drive: &DriveConfig, phi: &[C64]) -> Option<Vec<C64>> {
    let h = c.hamiltonian_complex(phi);
    let n = phi.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (k, &b) in h.bonds().iter().enumerate() {
        m[(k, k + 1)] = C64::new(b, 0.0);
        m[(k + 1, k)] = C64::new(b, 0.0);
    }
    for j in 0..n {
        m[(j, j)] = C64::new(-drive.omega_tilde, -losses[j]);
    }
    let rhs = DVector::from_iterator(n, drive.source.iter().map(|s| -I * drive.amplitude * s));
    m.lu().solve(&rhs).map(|v| v.iter().copied().collect())
}

/// Newton's method on `F(phi) = (H(phi) + H0 - w) phi + i A S = 0` split into
/// real and imaginary parts.
fn steady_newton(c: &Couplings, losses: &[f64], drive: &DriveConfig, phi0: &[C64], tol: f64) -> Option<(Vec<C64>, usize)> {
    let n = phi0.len();
    let alpha = c.alpha();
    let kerr = c.kerr_mask();
    let scale = steady_scale(drive);
    let mut phi = phi0.to_vec();
    let mut f = stationarity(c, losses, drive, &phi);
    let mut fnorm = l2(&f);
    let mut iterations = 0;
    for _ in 0..60 {
        if fnorm <= 1e-3 * tol * scale {
            break;
        }
        iterations += 1;
        let h = c.hamiltonian_complex(&phi);
        // d F_r / d u_s and d F_r / d v_s as complex numbers
        let mut du = DMatrix::<C64>::zeros(n, n);
        let mut dv = DMatrix::<C64>::zeros(n, n);
        for (k, &b) in h.bonds().iter().enumerate() {
            du[(k, k + 1)] += b;
            du[(k + 1, k)] += b;
            dv[(k, k + 1)] += I * b;
            dv[(k + 1, k)] += I * b;
            if kerr[k] {
                let (p, q) = (k, k + 1);
                for (row, other) in [(p, phi[q]), (q, phi[p])] {
                    for s in [p, q] {
                        du[(row, s)] += other * (2.0 * alpha * phi[s].re);
                        dv[(row, s)] += other * (2.0 * alpha * phi[s].im);
                    }
                }
            }
        }
        for j in 0..n {
            let d = C64::new(-drive.omega_tilde, -losses[j]);
            du[(j, j)] += d;
            dv[(j, j)] += I * d;
        }
        let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for r in 0..n {
            for s in 0..n {
                jac[(r, s)] = du[(r, s)].re;
                jac[(n + r, s)] = du[(r, s)].im;
                jac[(r, n + s)] = dv[(r, s)].re;
                jac[(n + r, n + s)] = dv[(r, s)].im;
            }
        }
        let rhs = DVector::from_iterator(2 * n, f.iter().map(|z| -z.re).chain(f.iter().map(|z| -z.im)));
        let delta = jac.lu().solve(&rhs)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1e-4 {
            let trial: Vec<C64> = (0..n).map(|j| phi[j] + C64::new(delta[j], delta[n + j]) * lambda).collect();
            let ft = stationarity(c, losses, drive, &trial);
            let ftn = l2(&ft);
            if ftn.is_finite() && ftn <= (1.0 - 1e-4 * lambda) * fnorm {
                phi = trial;
                f = ft;
                fnorm = ftn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (fnorm <= tol * scale).then_some((phi, iterations))
}

/// Steady state by damped Green's-function iteration
/// `phi <- mix(-i A (H(phi) + H0 - w)^{-1} S, phi)`, polished by Newton's
/// method when the iteration stalls. Without a seed, a failed direct solve
/// is retried by ramping the amplitude up from zero.
pub fn steady_state(spec: &LatticeSpec, drive: &DriveConfig, seed: Option<&StateVector>, opts: &SteadyOptions) -> Result<SteadyState> {
    drive.validate(spec)?;
    if !(drive.l_a > 0.0 && drive.l_b > 0.0) {
        return Err(Error::InvalidParameter("steady states need strictly positive losses".into()));
    }
    if !(opts.mixing > 0.0 && opts.mixing <= 1.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("steady options need tol > 0 and mixing in (0, 1]".into()));
    }
    let direct = solve_direct(spec, drive, seed, opts);
    if direct.is_ok() || seed.is_some() || !opts.newton {
        return direct;
    }
    const RAMP: usize = 16;
    let mut current: Option<SteadyState> = None;
    for k in 1..=RAMP {
        let a = drive.amplitude * k as f64 / RAMP as f64;
        current = Some(continue_amplitude(spec, drive, current.as_ref(), a, opts)?);
    }
    Ok(current.expect("ramp has at least one step"))
}

fn solve_direct(spec: &LatticeSpec, drive: &DriveConfig, seed: Option<&StateVector>, opts: &SteadyOptions) -> Result<SteadyState> {
    let c = spec.couplings();
    let n = spec.n_sites();
    let losses = drive.losses(n);
    if drive.amplitude == 0.0 {
        return Ok(SteadyState { phi_tilde: StateVector::zeros(n), amplitude: 0.0, residual: 0.0, iterations: 0 });
    }
    let scale = steady_scale(drive);
    let mut phi: Vec<C64> = match seed {
        Some(s) => {
            c.check_len(s.len())?;
            s.amplitudes().to_vec()
        }
        None => vec![ZERO; n],
    };
    let mut best = (l2(&stationarity(&c, &losses, drive, &phi)), phi.clone());
    let mut since_best = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let Some(target) = green_update(&c, &losses, drive, &phi) else {
            break;
        };
        let next: Vec<C64> = target.iter().zip(&phi).map(|(t, p)| t * opts.mixing + p * (1.0 - opts.mixing)).collect();
        phi = next;
        let res = l2(&stationarity(&c, &losses, drive, &phi));
        if !res.is_finite() {
            break;
        }
        if res < best.0 {
            best = (res, phi.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if res <= opts.tol * scale {
            break;
        }
        if opts.newton && since_best > 20 {
            break;
        }
    }
    if best.0 > opts.tol * scale {
        if !opts.newton {
            return Err(Error::NoConvergence { iterations, residual: best.0 });
        }
        match steady_newton(&c, &losses, drive, &best.1, opts.tol) {
            Some((p, k)) => {
                iterations += k;
                best = (l2(&stationarity(&c, &losses, drive, &p)), p);
            }
            None => return Err(Error::NoConvergence { iterations, residual: best.0 }),
        }
    } else if opts.newton {
        // tighten to the Newton floor
        if let Some((p, k)) = steady_newton(&c, &losses, drive, &best.1, opts.tol) {
            iterations += k;
            let r = l2(&stationarity(&c, &losses, drive, &p));
            if r <= best.0 {
                best = (r, p);
            }
        }
    }
    Ok(SteadyState {
        phi_tilde: StateVector::new(best.1),
        amplitude: drive.amplitude,
        residual: best.0,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudePoint {
    pub amplitude: f64,
    pub intensity: f64,
    pub converged: bool,
    pub residual: f64,
    pub state: Option<StateVector>,
}

/// Steady states along `amplitudes` (ascending) with continuation in the
/// given direction. Failed points are flagged and the sweep continues from
/// the last converged state.
pub fn sweep_amplitude(
    spec: &LatticeSpec,
    template: &DriveConfig,
    amplitudes: &[f64],
    direction: SweepDirection,
    opts: &SteadyOptions,
) -> Result<Vec<AmplitudePoint>> {
    template.validate(spec)?;
    if amplitudes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("amplitude list must be sorted ascending".into()));
    }
    let order: Vec<usize> = match direction {
        SweepDirection::Up => (0..amplitudes.len()).collect(),
        SweepDirection::Down => (0..amplitudes.len()).rev().collect(),
    };
    let mut points: Vec<Option<AmplitudePoint>> = vec![None; amplitudes.len()];
    let mut anchor: Option<SteadyState> = None;
    for k in order {
        let a = amplitudes[k];
        let result = continue_amplitude(spec, template, anchor.as_ref(), a, opts);
        points[k] = Some(match result {
            Ok(s) => {
                let p = AmplitudePoint {
                    amplitude: a,
                    intensity: s.intensity(),
                    converged: true,
                    residual: s.residual,
                    state: Some(s.phi_tilde.clone()),
                };
                anchor = Some(s);
                p
            }
            Err(e) => {
                log::warn!("steady state at A = {a} failed: {e}");
                let residual = match e {
                    Error::NoConvergence { residual, .. } => residual,
                    _ => f64::NAN,
                };
                AmplitudePoint { amplitude: a, intensity: f64::NAN, converged: false, residual, state: None }
            }
        });
    }
    Ok(points.into_iter().map(|p| p.expect("every point visited")).collect())
}

/// Continuation from `from` to amplitude `target`, bisecting the step on
/// failure down to a depth floor.
fn continue_amplitude(spec: &LatticeSpec, template: &DriveConfig, from: Option<&SteadyState>, target: f64, opts: &SteadyOptions) -> Result<SteadyState> {
    const MAX_DEPTH: usize = 10;
    let Some(from) = from else {
        return solve_direct(spec, &template.with_amplitude(target), None, opts);
    };
    let mut current = from.clone();
    let mut stack = vec![(target, 0usize)];
    while let Some(&(goal, depth)) = stack.last() {
        let drive = template.with_amplitude(goal);
        match solve_direct(spec, &drive, Some(&current.phi_tilde), opts) {
            Ok(s) => {
                current = s;
                stack.pop();
            }
            Err(e) => {
                if depth >= MAX_DEPTH {
                    return Err(e);
                }
                stack.push((0.5 * (current.amplitude + goal), depth + 1));
            }
        }
    }
    Ok(current)
}

/// a-sublattice profile of the nonlinear segment from the loss-corrected
/// recurrence
/// `alpha x^3 + (kt + alpha (l_a a / nu)^2) x + (nu + l_b l_a / nu) a = 0`,
/// started from the left-edge amplitude `a1`.
pub fn approx_excited_profile(spec: &LatticeSpec, drive: &DriveConfig, a1: f64) -> Result<Vec<f64>> {
    let n = spec.n_nl;
    if let Some(nu) = spec.nu.iter().find(|&&nu| drive.l_a / nu > 0.1) {
        log::warn!("l_a / nu = {} is not small; the loss-corrected profile is unreliable", drive.l_a / nu);
    }
    let mut a = Vec::with_capacity(n);
    a.push(a1);
    for i in 0..n - 1 {
        let nu = spec.nu[i];
        let b = drive.l_a * a[i] / nu;
        let kt = spec.kappa_tilde[i] + spec.alpha * b * b;
        let v = nu + drive.l_b * drive.l_a / nu;
        a.push(forward_step(v, kt, spec.alpha, a[i])?);
    }
    Ok(a)
}

/// a-sublattice amplitudes of the nonlinear segment, rotated so the
/// interface cell `a_n` is real and positive.
pub fn a_profile_real(spec: &LatticeSpec, phi: &StateVector) -> Vec<f64> {
    let amps = phi.amplitudes();
    let pivot = amps[2 * spec.n_nl - 2];
    let rot = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { C64::new(1.0, 0.0) };
    (0..spec.n_nl).map(|i| (amps[2 * i] * rot).re).collect()
}

/// `|<phi|varphi>| / sqrt(<phi|phi> <varphi|varphi>)`.
pub fn similarity(phi: &StateVector, varphi: &StateVector) -> Result<f64> {
    let (x, y) = (phi.amplitudes(), varphi.amplitudes());
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let (nx, ny) = (l2(x), l2(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroState);
    }
    let overlap: C64 = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    Ok((overlap.norm() / (nx * ny)).min(1.0))
}

/// Power injected by the source at a stationary state, `A Re <phi|S>`, and
/// the dissipated power `sum_j l_j |phi_j|^2`.
pub fn power_balance(drive: &DriveConfig, phi: &StateVector) -> (f64, f64) {
    let amps = phi.amplitudes();
    let injected: C64 = amps.iter().zip(&drive.source).map(|(p, s)| p.conj() * s).sum();
    let losses = drive.losses(amps.len());
    let dissipated = amps.iter().zip(&losses).map(|(p, l)| l * p.norm_sqr()).sum();
    (drive.amplitude * injected.re, dissipated)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Independent real and imaginary parts.
    Complex,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityOptions {
    pub noise_amplitude: f64,
    pub noise: NoiseKind,
    pub t_end: f64,
    pub dt: f64,
    /// Time between samples of the similarity series.
    pub sample_every: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions { noise_amplitude: 3.0, noise: NoiseKind::Complex, t_end: 500.0, dt: 0.01, sample_every: 1.0 }
    }
}

/// Uniform noise in `(-amplitude, amplitude)` on every site.
pub fn noise_vector(n: usize, amplitude: f64, kind: NoiseKind, rng_seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    if amplitude == 0.0 {
        return vec![ZERO; n];
    }
    (0..n)
        .map(|_| {
            let re = rng.random_range(-amplitude..amplitude);
            let im = match kind {
                NoiseKind::Complex => rng.random_range(-amplitude..amplitude),
                NoiseKind::Real => 0.0,
            };
            C64::new(re, im)
        })
        .collect()
}

/// Adds noise to a steady state, evolves and returns `(t, chi(t))` against
/// the unperturbed state in the rotating frame.
pub fn stability_test(spec: &LatticeSpec, drive: &DriveConfig, steady: &SteadyState, rng_seed: u64, opts: &StabilityOptions) -> Result<Vec<(f64, f64)>> {
    let reference = &steady.phi_tilde;
    let noise = noise_vector(reference.len(), opts.noise_amplitude, opts.noise, rng_seed);
    let start: Vec<C64> = reference.amplitudes().iter().zip(&noise).map(|(a, e)| a + e).collect();
    let stride = ((opts.sample_every / opts.dt).round() as usize).max(1);
    let mut series = Vec::new();
    let mut failure: Option<Error> = None;
    let drive = drive.with_amplitude(steady.amplitude);
    integrate(spec, &drive, &start, opts.t_end, opts.dt, stride, |t, phi| {
        let rot = C64::from_polar(1.0, drive.omega_tilde * t);
        let frame = StateVector::new(phi.iter().map(|z| z * rot).collect());
        match similarity(&frame, reference) {
            Ok(chi) => {
                series.push((t, chi));
                true
            }
            Err(e) => {
                failure = Some(e);
                false
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(series),
    }
}
