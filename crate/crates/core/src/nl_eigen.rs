//! Nonlinear eigenproblem `H(psi) psi = omega psi` at fixed total intensity.
//!
//! The solver runs the damped self-consistent iteration (diagonalize the
//! frozen Hamiltonian, pick a mode, mix, renormalize). Along the plateau the
//! zero mode is a repelling fixed point of that map, so once the iteration
//! stalls the best iterate is polished by Newton's method on the bordered
//! system `[H(psi) psi - omega psi; (psi.psi - I) / 2] = 0`. Any root of the
//! bordered system is a fixed point of the self-consistent map.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Couplings, LatticeSpec, StateVector};
use crate::linalg::symmetric_eigen;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "target")]
pub enum ModeSelect {
    /// Eigenvector with the largest overlap with the current iterate.
    Overlap,
    /// Eigenvector whose eigenvalue is closest to the given frequency.
    ClosestTo(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Convergence threshold on the relative state change per iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Damping `theta` in `psi <- theta new + (1 - theta) old`.
    pub mixing: f64,
    pub mode_select: ModeSelect,
    /// Polish with Newton's method when the plain iteration stalls.
    pub newton: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
            mixing: 0.5,
            mode_select: ModeSelect::Overlap,
            newton: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {} must be positive", self.tol)));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::InvalidParameter(format!("mixing = {} must lie in (0, 1]", self.mixing)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub omega: f64,
    pub state: StateVector,
    pub intensity: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// `||H(psi) psi - omega psi||_2` recomputed from the state.
pub fn residual(spec: &LatticeSpec, pair: &Eigenpair) -> f64 {
    residual_with(&spec.couplings(), pair)
}

/// [`residual`] for an explicit bond description.
pub fn residual_with(c: &Couplings, pair: &Eigenpair) -> f64 {
    let psi = pair.state.amplitudes();
    let h = c.hamiltonian_complex(psi);
    h.apply(psi)
        .iter()
        .zip(psi)
        .map(|(hp, p)| (hp - p * pair.omega).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn real_residual(c: &Couplings, psi: &[f64], omega: f64) -> f64 {
    let hp = c.hamiltonian_real(psi).apply_real(psi);
    hp.iter().zip(psi).map(|(h, p)| (h - omega * p).powi(2)).sum::<f64>().sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled_to(v: &[f64], intensity: f64) -> Vec<f64> {
    let s = intensity.sqrt() / norm(v);
    v.iter().map(|x| x * s).collect()
}

fn rayleigh(c: &Couplings, psi: &[f64]) -> f64 {
    let hp = c.hamiltonian_real(psi).apply_real(psi);
    dot(psi, &hp) / dot(psi, psi)
}

/// Convergence scale for residuals: `max(1, ||H|| ||psi||)` with `||H||`
/// bounded by twice the largest bond.
fn residual_scale(c: &Couplings, psi: &[f64]) -> f64 {
    let h = c.hamiltonian_real(psi);
    let hmax = h.bonds().iter().fold(0.0_f64, |m, b| m.max(b.abs()));
    1f64.max(2.0 * hmax * norm(psi))
}

struct Selection {
    index: usize,
    vector: Vec<f64>,
}

fn select_mode(values: &[f64], vectors: &DMatrix<f64>, current: &[f64], mode: ModeSelect) -> Result<Selection> {
    let n = values.len();
    let cn = norm(current);
    let overlap = |k: usize| -> f64 { vectors.column(k).iter().zip(current).map(|(v, c)| v * c).sum::<f64>() / cn };
    let index = match mode {
        ModeSelect::Overlap => {
            let mut best = (0usize, -1.0_f64);
            let mut second = -1.0_f64;
            for k in 0..n {
                let o = overlap(k).abs();
                if o > best.1 {
                    second = best.1;
                    best = (k, o);
                } else if o > second {
                    second = o;
                }
            }
            if n > 1 && best.1 - second < 1e-6 {
                return Err(Error::DegenerateSelection { first: best.1, second });
            }
            best.0
        }
        ModeSelect::ClosestTo(target) => (0..n)
            .min_by(|&a, &b| (values[a] - target).abs().total_cmp(&(values[b] - target).abs()))
            .unwrap_or(0),
    };
    let mut vector: Vec<f64> = vectors.column(index).iter().copied().collect();
    if overlap(index) < 0.0 {
        vector.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(Selection { index, vector })
}

/// Eigenvector of the linear Hamiltonian `H(0)` whose eigenvalue is closest
/// to zero.
pub fn linear_zero_mode(spec: &LatticeSpec) -> StateVector {
    let h = spec.couplings().hamiltonian_real(&vec![0.0; spec.n_sites()]);
    let (values, vectors) = symmetric_eigen(&h.to_dense());
    let k = (0..values.len())
        .min_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()))
        .unwrap_or(0);
    let mut v: Vec<f64> = vectors.column(k).iter().copied().collect();
    // positive amplitude on the interface a-site
    let pivot = v[2 * spec.n_nl - 2];
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    StateVector::from_real(&v)
}

/// Newton iteration on the bordered system. Returns `(psi, omega,
/// iterations)` when the residual meets `tol` relative to its scale.
fn newton(c: &Couplings, psi0: &[f64], omega0: f64, intensity: f64, tol: f64) -> Option<(Vec<f64>, f64, usize)> {
    let n = psi0.len();
    let alpha = c.alpha();
    let kerr = c.kerr_mask();
    let eval = |psi: &[f64], omega: f64| -> Vec<f64> {
        let hp = c.hamiltonian_real(psi).apply_real(psi);
        let mut f: Vec<f64> = hp.iter().zip(psi).map(|(h, p)| h - omega * p).collect();
        f.push(0.5 * (dot(psi, psi) - intensity));
        f
    };
    let mut psi = psi0.to_vec();
    let mut omega = omega0;
    let mut f = eval(&psi, omega);
    let mut fnorm = norm(&f);
    let mut iterations = 0;
    for _ in 0..60 {
        iterations += 1;
        let h = c.hamiltonian_real(&psi);
        let mut j = DMatrix::<f64>::zeros(n + 1, n + 1);
        for (k, &b) in h.bonds().iter().enumerate() {
            j[(k, k + 1)] = b;
            j[(k + 1, k)] = b;
            if kerr[k] {
                let (p, q) = (psi[k], psi[k + 1]);
                j[(k, k)] += 2.0 * alpha * p * q;
                j[(k + 1, k + 1)] += 2.0 * alpha * p * q;
                j[(k, k + 1)] += 2.0 * alpha * q * q;
                j[(k + 1, k)] += 2.0 * alpha * p * p;
            }
        }
        for i in 0..n {
            j[(i, i)] -= omega;
            j[(i, n)] = -psi[i];
            j[(n, i)] = psi[i];
        }
        let rhs = DVector::from_iterator(n + 1, f.iter().map(|x| -x));
        let delta = j.lu().solve(&rhs)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1e-4 {
            let trial: Vec<f64> = psi.iter().zip(delta.iter()).map(|(p, d)| p + lambda * d).collect();
            let trial_omega = omega + lambda * delta[n];
            let ft = eval(&trial, trial_omega);
            let ftn = norm(&ft);
            if ftn.is_finite() && ftn <= (1.0 - 1e-4 * lambda) * fnorm {
                psi = trial;
                omega = trial_omega;
                f = ft;
                fnorm = ftn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        let step = delta.iter().take(n).map(|d| d * d).sum::<f64>().sqrt();
        if !accepted || step <= 1e-14 * norm(&psi) {
            break;
        }
    }
    let psi = scaled_to(&psi, intensity);
    let res = real_residual(c, &psi, omega);
    (res <= tol * residual_scale(c, &psi)).then_some((psi, omega, iterations))
}

/// Solves for the mode at intensity `intensity`, starting from `seed`.
pub fn solve_self_consistent(spec: &LatticeSpec, intensity: f64, seed: &StateVector, opts: &SolverOptions) -> Result<Eigenpair> {
    solve_with(&spec.couplings(), intensity, seed, opts)
}

/// [`solve_self_consistent`] for an explicit bond description, e.g. a chain
/// with per-bond perturbations.
pub fn solve_with(c: &Couplings, intensity: f64, seed: &StateVector, opts: &SolverOptions) -> Result<Eigenpair> {
    opts.validate()?;
    let c = c.clone();
    c.check_len(seed.len())?;
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::InvalidParameter(format!("intensity {intensity} must be non-negative")));
    }
    let seed_real = seed.real_gauge();
    if norm(&seed_real) == 0.0 {
        return Err(Error::ZeroState);
    }
    if intensity == 0.0 {
        // linear problem; the zero state is the only state of zero intensity
        let h = c.hamiltonian_real(&vec![0.0; c.n_sites()]);
        let (values, vectors) = symmetric_eigen(&h.to_dense());
        let sel = select_mode(&values, &vectors, &seed_real, opts.mode_select)?;
        return Ok(Eigenpair {
            omega: values[sel.index],
            state: StateVector::zeros(c.n_sites()),
            intensity: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }

    let mut psi = scaled_to(&seed_real, intensity);
    let mut omega = rayleigh(&c, &psi);
    let mut best = (real_residual(&c, &psi, omega) / residual_scale(&c, &psi), psi.clone(), omega);
    let mut since_best = 0usize;
    let mut iterations = 0usize;
    let mut last_change = f64::INFINITY;

    let mut selection_error: Option<Error> = None;
    while iterations < opts.max_iter {
        iterations += 1;
        let h = c.hamiltonian_real(&psi);
        let (values, vectors) = symmetric_eigen(&h.to_dense());
        let sel = match select_mode(&values, &vectors, &psi, opts.mode_select) {
            Ok(sel) => sel,
            Err(e) if opts.newton => {
                selection_error = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        let target = scaled_to(&sel.vector, intensity);
        let mixed: Vec<f64> = target
            .iter()
            .zip(&psi)
            .map(|(t, p)| opts.mixing * t + (1.0 - opts.mixing) * p)
            .collect();
        let next = scaled_to(&mixed, intensity);
        last_change = norm(&next.iter().zip(&psi).map(|(a, b)| a - b).collect::<Vec<_>>()) / intensity.sqrt();
        psi = next;
        omega = rayleigh(&c, &psi);

        let rel = real_residual(&c, &psi, omega) / residual_scale(&c, &psi);
        if rel < best.0 {
            best = (rel, psi.clone(), omega);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if last_change < opts.tol {
            break;
        }
        // the iteration is drifting away from its best point
        if opts.newton && since_best > 20 {
            break;
        }
    }

    let scf_converged = last_change < opts.tol;
    let (final_psi, final_omega) = if opts.newton {
        let mut attempt = None;
        if scf_converged {
            attempt = newton(&c, &psi, omega, intensity, opts.tol);
        }
        if attempt.is_none() {
            attempt = newton(&c, &best.1, best.2, intensity, opts.tol);
        }
        match attempt {
            Some((p, w, k)) => {
                iterations += k;
                (p, w)
            }
            None => {
                return Err(selection_error.unwrap_or(Error::NoConvergence {
                    iterations,
                    residual: best.0 * residual_scale(&c, &best.1),
                }))
            }
        }
    } else if scf_converged {
        (psi, omega)
    } else {
        return Err(Error::NoConvergence {
            iterations,
            residual: real_residual(&c, &psi, omega),
        });
    };

    if let ModeSelect::ClosestTo(target) = opts.mode_select {
        // the polished state must still be the mode the selection rule picks
        let values = c.hamiltonian_real(&final_psi).eigenvalues();
        let closest = values
            .iter()
            .copied()
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .unwrap_or(final_omega);
        if (closest - final_omega).abs() > 1e-6 * (1.0 + final_omega.abs()) {
            return Err(Error::NoConvergence {
                iterations,
                residual: real_residual(&c, &final_psi, final_omega),
            });
        }
    }

    let mut final_psi = scaled_to(&final_psi, intensity);
    if dot(&final_psi, &seed_real) < 0.0 {
        final_psi.iter_mut().for_each(|x| *x = -*x);
    }
    let state = StateVector::from_real(&final_psi);
    let mut pair = Eigenpair {
        omega: final_omega,
        intensity: state.intensity(),
        state,
        residual: 0.0,
        iterations,
    };
    pair.residual = residual_with(&c, &pair);
    Ok(pair)
}

/// Full spectrum of `H` at the converged mode plus the tracked branch.
#[derive(Clone, Debug, Default)]
pub struct SpectrumSweep {
    pub intensities: Vec<f64>,
    /// Eigenvalues of `H(psi(I))`, ascending; empty for failed points.
    pub spectra: Vec<Vec<f64>>,
    pub tzm_branch: Vec<Option<Eigenpair>>,
    /// `(point index, error message)` for points that did not converge.
    pub failures: Vec<(usize, String)>,
}

impl SpectrumSweep {
    pub fn converged(&self) -> impl Iterator<Item = (f64, &Eigenpair)> {
        self.intensities
            .iter()
            .zip(&self.tzm_branch)
            .filter_map(|(&i, p)| p.as_ref().map(|p| (i, p)))
    }
}

/// Minimum normalized overlap between consecutive continuation steps.
const BRANCH_OVERLAP: f64 = 0.9;

fn normalized_overlap(a: &StateVector, b: &StateVector) -> f64 {
    let (x, y) = (a.real_gauge(), b.real_gauge());
    (dot(&x, &y) / (norm(&x) * norm(&y))).abs()
}

/// One continuation step from `from` (a converged pair) to `target`,
/// bisecting the intensity step when the solver fails or leaves the branch.
pub fn continue_to(spec: &LatticeSpec, from: &Eigenpair, target: f64, opts: &SolverOptions) -> Result<Eigenpair> {
    continue_with(&spec.couplings(), from, target, opts)
}

pub fn continue_with(c: &Couplings, from: &Eigenpair, target: f64, opts: &SolverOptions) -> Result<Eigenpair> {
    const MAX_DEPTH: usize = 14;
    let mut stack: Vec<(f64, usize)> = vec![(target, 0)];
    let mut current = from.clone();
    let mut last_err: Option<Error> = None;
    while let Some(&(goal, depth)) = stack.last() {
        let attempt = solve_with(c, goal, &current.state, opts).and_then(|p| {
            if current.intensity > 0.0 && normalized_overlap(&p.state, &current.state) < BRANCH_OVERLAP {
                Err(Error::NoConvergence { iterations: p.iterations, residual: p.residual })
            } else {
                Ok(p)
            }
        });
        match attempt {
            Ok(p) => {
                current = p;
                stack.pop();
            }
            Err(e) => {
                if depth >= MAX_DEPTH {
                    return Err(last_err.unwrap_or(e));
                }
                last_err = Some(e);
                let mid = 0.5 * (current.intensity + goal);
                stack.push((mid, depth + 1));
            }
        }
    }
    Ok(current)
}

/// Sweeps the mode over ascending intensities with continuation, starting
/// from the zero mode of the linear Hamiltonian.
pub fn sweep_spectrum(spec: &LatticeSpec, intensities: &[f64], opts: &SolverOptions) -> Result<SpectrumSweep> {
    sweep_spectrum_from(spec, intensities, &linear_zero_mode(spec), opts)
}

pub fn sweep_spectrum_from(spec: &LatticeSpec, intensities: &[f64], seed: &StateVector, opts: &SolverOptions) -> Result<SpectrumSweep> {
    opts.validate()?;
    spec.validate()?;
    if intensities.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("intensity list must be sorted ascending".into()));
    }
    let c = spec.couplings();
    c.check_len(seed.len())?;
    let mut out = SpectrumSweep {
        intensities: intensities.to_vec(),
        ..Default::default()
    };

    // start at a tiny intensity where the linear mode is an excellent seed
    let first = intensities.iter().copied().find(|&i| i > 0.0).unwrap_or(1.0);
    let start = (1e-4_f64).min(first);
    let mut anchor = solve_self_consistent(spec, start, seed, opts).ok();

    for (k, &i) in intensities.iter().enumerate() {
        let result = match &anchor {
            Some(prev) if i > 0.0 => continue_to(spec, prev, i, opts),
            _ => solve_self_consistent(spec, i, seed, opts),
        };
        match result {
            Ok(pair) => {
                out.spectra.push(c.hamiltonian(&pair.state)?.eigenvalues());
                if pair.intensity > 0.0 {
                    anchor = Some(pair.clone());
                }
                out.tzm_branch.push(Some(pair));
            }
            Err(e) => {
                log::warn!("sweep point I = {i} failed: {e}");
                out.spectra.push(Vec::new());
                out.tzm_branch.push(None);
                out.failures.push((k, e.to_string()));
            }
        }
    }
    Ok(out)
}
