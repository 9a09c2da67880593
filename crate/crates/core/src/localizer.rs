//! Spectral localizer of a frozen nonlinear Hamiltonian: local invariant,
//! local gap and the perturbation-protection check.
//!
//! Two localizers are built from the frozen `H` and the position operator `X`:
//!
//! * the Clifford localizer
//!   `L = beta (X - x) (x) sigma_x + (H - w) (x) sigma_y`, a `2N x 2N`
//!   Hermitian matrix with off-diagonal blocks `beta (X - x) -+ i (H - w)`.
//!   Its smallest absolute eigenvalue is the local gap. Its spectrum is
//!   symmetric about zero, so its signature always vanishes.
//! * the sublattice-graded localizer `L_c = beta (X - x) Pi + (H - w)`, with
//!   `Pi = +1` on a-sites and `-1` on b-sites. This is the localizer of the
//!   chiral symmetry class the chain belongs to; half its signature is the
//!   local invariant `C`. For `w = 0` it is unitarily equivalent to
//!   `(beta (X - x) + i H) Pi`, so its eigenvalue moduli are the singular
//!   values of the Clifford off-diagonal block: both share the same local gap
//!   and the invariant jumps exactly where that gap closes.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{position_operator, HamiltonianMatrix, LatticeSpec, StateVector, C64};
use crate::linalg::{hermitian_eigenvalues, hermitian_inertia, symmetric_eigenvalues, tridiagonal_count_below, tridiagonal_inertia};
use crate::nl_eigen::{solve_with, Eigenpair, SolverOptions};

pub const DEFAULT_BETA: f64 = 0.2;

/// Relative zero tolerance for signature counting.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizerProbe {
    pub x: f64,
    pub omega_tilde: f64,
    pub beta: f64,
}

impl LocalizerProbe {
    pub fn new(x: f64, omega_tilde: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
        }
        Ok(LocalizerProbe { x, omega_tilde, beta })
    }

    pub fn at(x: f64) -> Self {
        LocalizerProbe { x, omega_tilde: 0.0, beta: DEFAULT_BETA }
    }
}

/// Clifford localizer for a general Hermitian `h` and diagonal position `x`.
pub fn build_localizer(x: &[f64], h: &DMatrix<C64>, probe: &LocalizerProbe) -> Result<DMatrix<C64>> {
    let n = x.len();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: h.nrows() });
    }
    let i = C64::new(0.0, 1.0);
    let mut l = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let mut shifted = h[(r, c)];
            let mut pos = 0.0;
            if r == c {
                shifted -= probe.omega_tilde;
                pos = probe.beta * (x[r] - probe.x);
            }
            // upper-right block: beta (X - x) - i (H - w)
            let upper = C64::new(pos, 0.0) - i * shifted;
            l[(r, n + c)] = upper;
            l[(n + c, r)] = upper.conj();
        }
    }
    Ok(l)
}

/// Clifford localizer of the chain Hamiltonian.
pub fn chain_localizer(x: &[f64], h: &HamiltonianMatrix, probe: &LocalizerProbe) -> Result<DMatrix<C64>> {
    build_localizer(x, &h.to_dense().map(|v| C64::new(v, 0.0)), probe)
}

/// Sublattice-graded localizer of a nearest-neighbour chain, stored as a
/// real symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiralLocalizer {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl ChiralLocalizer {
    pub fn new(x: &[f64], grading: &[f64], h: &HamiltonianMatrix, probe: &LocalizerProbe) -> Result<Self> {
        let n = h.dim();
        if x.len() != n || grading.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len().min(grading.len()) });
        }
        let diag = (0..n)
            .map(|j| probe.beta * (x[j] - probe.x) * grading[j] - probe.omega_tilde)
            .collect();
        Ok(ChiralLocalizer { diag, off: h.bonds().to_vec() })
    }

    /// Row-sum bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|j| {
                let left = if j > 0 { self.off[j - 1].abs() } else { 0.0 };
                let right = if j + 1 < n { self.off[j].abs() } else { 0.0 };
                self.diag[j].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// `C = signature / 2`, or [`Error::AtGapClosing`] when eigenvalues fall
    /// inside `ZERO_TOL * ||L||`.
    pub fn invariant(&self) -> Result<f64> {
        let tol = ZERO_TOL * self.norm_bound();
        let inertia = tridiagonal_inertia(&self.diag, &self.off, tol);
        if inertia.zero > 0 {
            return Err(Error::AtGapClosing { count: inertia.zero });
        }
        Ok(0.5 * inertia.signature() as f64)
    }

    /// Signature ignoring the zero tolerance (eigenvalues counted against 0).
    pub fn raw_signature(&self) -> i64 {
        let below = tridiagonal_count_below(&self.diag, &self.off, 0.0) as i64;
        self.diag.len() as i64 - 2 * below
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            }
        })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.to_dense())
    }
}

/// Max row sum of moduli, an upper bound on the spectral norm.
fn inf_norm(l: &DMatrix<C64>) -> f64 {
    (0..l.nrows())
        .map(|r| l.row(r).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Half the signature of a Hermitian matrix by inertia, with eigenvalues
/// inside `ZERO_TOL * ||L||` reported as a gap closing.
pub fn local_invariant(l: &DMatrix<C64>) -> Result<f64> {
    local_invariant_with(l, ZERO_TOL * inf_norm(l))
}

pub fn local_invariant_with(l: &DMatrix<C64>, zero_tol: f64) -> Result<f64> {
    let n = l.nrows();
    let shifted = |s: f64| {
        let mut m = l.clone();
        for i in 0..n {
            m[(i, i)] -= s;
        }
        hermitian_inertia(&m, 0.0).negative
    };
    let below_plus = shifted(zero_tol);
    let below_minus = if zero_tol > 0.0 { shifted(-zero_tol) } else { below_plus };
    let zero = below_plus - below_minus;
    if zero > 0 {
        return Err(Error::AtGapClosing { count: zero });
    }
    let positive = n - below_plus;
    Ok(0.5 * (positive as f64 - below_minus as f64))
}

/// Smallest absolute eigenvalue.
pub fn local_gap(l: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(l).iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizerResult {
    /// `None` at a gap closing.
    pub c: Option<f64>,
    pub mu: f64,
    /// Eigenvalues of the Clifford localizer, ascending.
    pub spectrum: Vec<f64>,
    /// Spectral norm of the Clifford localizer.
    pub norm: f64,
    /// Eigenvalue of smallest modulus of the graded localizer (signed).
    pub min_eigenvalue: f64,
}

/// Frozen chain data shared by all probes of a scan.
#[derive(Clone, Debug)]
pub struct FrozenChain {
    pub x: Vec<f64>,
    pub grading: Vec<f64>,
    pub h: HamiltonianMatrix,
}

impl FrozenChain {
    pub fn new(spec: &LatticeSpec, state: &StateVector) -> Result<Self> {
        let c = spec.couplings();
        Ok(FrozenChain {
            x: position_operator(spec),
            grading: c.chirality(),
            h: c.hamiltonian(state)?,
        })
    }

    /// Left-vacuum value `(n_a - n_b) / 2` of the graded invariant.
    pub fn vacuum_invariant(&self) -> f64 {
        0.5 * self.grading.iter().sum::<f64>()
    }

    pub fn chiral(&self, probe: &LocalizerProbe) -> Result<ChiralLocalizer> {
        ChiralLocalizer::new(&self.x, &self.grading, &self.h, probe)
    }

    pub fn evaluate(&self, probe: &LocalizerProbe) -> Result<LocalizerResult> {
        let chiral = self.chiral(probe)?;
        let c = chiral.invariant().ok();
        let graded = chiral.eigenvalues();
        let min_eigenvalue = graded
            .iter()
            .copied()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        let spectrum = hermitian_eigenvalues(&chain_localizer(&self.x, &self.h, probe)?);
        let mu = spectrum.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let norm = spectrum.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(LocalizerResult { c, mu, spectrum, norm, min_eigenvalue })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub x: f64,
    pub c: Option<f64>,
    pub mu: f64,
    pub min_eigenvalue: f64,
    pub norm: f64,
}

/// A change of the invariant between two neighbouring defined grid points,
/// with the crossing `x0` located by bisection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantStep {
    pub x_left: f64,
    pub x_right: f64,
    pub x0: f64,
    pub from: f64,
    pub to: f64,
    pub mu_at_x0: f64,
    pub norm_at_x0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantScan {
    pub omega_tilde: f64,
    pub beta: f64,
    pub points: Vec<ScanPoint>,
    pub steps: Vec<InvariantStep>,
}

pub fn scan_invariant(spec: &LatticeSpec, state: &StateVector, x_grid: &[f64], omega_tilde: f64, beta: f64) -> Result<InvariantScan> {
    scan_frozen(&FrozenChain::new(spec, state)?, x_grid, omega_tilde, beta)
}

pub fn scan_frozen(chain: &FrozenChain, x_grid: &[f64], omega_tilde: f64, beta: f64) -> Result<InvariantScan> {
    LocalizerProbe::new(0.0, omega_tilde, beta)?;
    let points: Vec<ScanPoint> = x_grid
        .par_iter()
        .map(|&x| {
            let r = chain.evaluate(&LocalizerProbe { x, omega_tilde, beta })?;
            Ok(ScanPoint { x, c: r.c, mu: r.mu, min_eigenvalue: r.min_eigenvalue, norm: r.norm })
        })
        .collect::<Result<_>>()?;

    let defined: Vec<(f64, f64)> = points.iter().filter_map(|p| p.c.map(|c| (p.x, c))).collect();
    let mut steps = Vec::new();
    for w in defined.windows(2) {
        let ((xl, cl), (xr, cr)) = (w[0], w[1]);
        if cl == cr {
            continue;
        }
        let sig_left = (2.0 * cl).round() as i64;
        let (mut lo, mut hi) = (xl, xr);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let sig = chain.chiral(&LocalizerProbe { x: mid, omega_tilde, beta })?.raw_signature();
            if sig == sig_left {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x0 = 0.5 * (lo + hi);
        let at = chain.evaluate(&LocalizerProbe { x: x0, omega_tilde, beta })?;
        steps.push(InvariantStep {
            x_left: xl,
            x_right: xr,
            x0,
            from: cl,
            to: cr,
            mu_at_x0: at.mu,
            norm_at_x0: at.norm,
        });
    }
    Ok(InvariantScan { omega_tilde, beta, points, steps })
}

/// Largest local gap over probes inside the chain whose invariant differs
/// from the vacuum value. Returns `(mu_max, x at the maximum)`.
pub fn mu_max_from_scan(chain: &FrozenChain, scan: &InvariantScan) -> Result<(f64, f64)> {
    let (x_min, x_max) = (chain.x[0], chain.x[chain.x.len() - 1]);
    let vacuum = chain.vacuum_invariant();
    scan.points
        .iter()
        .filter(|p| p.x >= x_min && p.x <= x_max)
        .filter(|p| matches!(p.c, Some(c) if c != vacuum))
        .map(|p| (p.mu, p.x))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(Error::EmptyTopologicalDomain)
}

/// `mu_max` at `w = 0` on a uniform grid with `points_per_site` probes per
/// unit length across the chain.
pub fn mu_max(spec: &LatticeSpec, state: &StateVector, beta: f64, points_per_site: usize) -> Result<f64> {
    let chain = FrozenChain::new(spec, state)?;
    let grid = chain_grid(&chain, points_per_site.max(1));
    let scan = scan_frozen(&chain, &grid, 0.0, beta)?;
    Ok(mu_max_from_scan(&chain, &scan)?.0)
}

/// Uniform grid from the first to the last site.
pub fn chain_grid(chain: &FrozenChain, points_per_site: usize) -> Vec<f64> {
    let (x0, x1) = (chain.x[0], chain.x[chain.x.len() - 1]);
    let count = ((x1 - x0) as usize) * points_per_site + 1;
    (0..count).map(|k| x0 + (x1 - x0) * k as f64 / (count - 1) as f64).collect()
}

/// Largest singular value of the bond perturbation `Delta H` with the given
/// bond offsets.
pub fn perturbation_norm(offsets: &[f64]) -> f64 {
    let h = HamiltonianMatrix::from_bonds(offsets.to_vec());
    h.norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaSpec {
    /// Target `||Delta H||` as a multiple of `mu_max`.
    pub fraction_of_mu_max: f64,
}

impl Default for DeltaSpec {
    fn default() -> Self {
        DeltaSpec { fraction_of_mu_max: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtectionReport {
    pub trial: usize,
    pub mu_max: f64,
    /// Evaluated with the unperturbed state.
    pub perturbation_norm: f64,
    pub bound_satisfied: bool,
    pub post_perturbation_omega: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

/// Random bond offsets, uniform in `[-1, 1]` and rescaled to the requested
/// spectral norm. Trial `k` draws from stream `k` of the seeded generator.
pub fn random_offsets(n_bonds: usize, target_norm: f64, rng_seed: u64, trial: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(trial as u64);
    let raw: Vec<f64> = (0..n_bonds).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let norm = perturbation_norm(&raw);
    if norm == 0.0 || target_norm == 0.0 {
        return vec![0.0; n_bonds];
    }
    raw.iter().map(|v| v * target_norm / norm).collect()
}

/// For each trial, perturbs every bond, re-solves the nonlinear mode at the
/// same intensity from the unperturbed one and records its frequency.
pub fn verify_protection(
    spec: &LatticeSpec,
    tzm: &Eigenpair,
    mu_max: f64,
    delta: &DeltaSpec,
    trials: usize,
    rng_seed: u64,
    opts: &SolverOptions,
) -> Vec<ProtectionReport> {
    let base = spec.couplings();
    let n_bonds = base.linear_bonds().len();
    let target = delta.fraction_of_mu_max * mu_max;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let offsets = random_offsets(n_bonds, target, rng_seed, trial);
            let norm = perturbation_norm(&offsets);
            let mut report = ProtectionReport {
                trial,
                mu_max,
                perturbation_norm: norm,
                bound_satisfied: norm <= mu_max,
                post_perturbation_omega: None,
                residual: None,
                error: None,
            };
            let solved = base
                .with_offsets(&offsets)
                .and_then(|c| solve_with(&c, tzm.intensity, &tzm.state, opts));
            match solved {
                Ok(p) => {
                    report.post_perturbation_omega = Some(p.omega);
                    report.residual = Some(p.residual);
                }
                Err(e) => report.error = Some(e.to_string()),
            }
            report
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_site(h: f64) -> DMatrix<C64> {
        DMatrix::from_element(1, 1, C64::new(h, 0.0))
    }

    #[test]
    fn one_site_closed_form() {
        let probe = LocalizerProbe::new(0.0, 0.0, 0.2).unwrap();
        let l = build_localizer(&[3.0], &one_site(0.4), &probe).unwrap();
        let e = hermitian_eigenvalues(&l);
        let r = (0.04 * 9.0 + 0.16f64).sqrt();
        assert!((e[0] + r).abs() < 1e-12 && (e[1] - r).abs() < 1e-12);
        assert!((local_gap(&l) - r).abs() < 1e-12);
        let zero = build_localizer(&[2.0], &one_site(0.7), &LocalizerProbe::new(2.0, 0.7, 0.2).unwrap()).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn far_probe_gap_exceeds_position_term() {
        let spec = LatticeSpec::default();
        let chain = FrozenChain::new(&spec, &StateVector::zeros(161)).unwrap();
        let r = chain.evaluate(&LocalizerProbe::new(-50.0, 0.0, 0.2).unwrap()).unwrap();
        assert!(r.mu >= 0.2 * 51.0 - 1e-9);
        let clifford = chain_localizer(&chain.x, &chain.h, &LocalizerProbe::new(-50.0, 0.0, 0.2).unwrap()).unwrap();
        assert_eq!(local_invariant(&clifford).unwrap(), 0.0);
    }

    #[test]
    fn graded_and_clifford_gaps_agree_at_zero_frequency() {
        let spec = LatticeSpec::default();
        let chain = FrozenChain::new(&spec, &StateVector::zeros(161)).unwrap();
        for x in [10.0, 82.5, 120.25] {
            let probe = LocalizerProbe::new(x, 0.0, 0.2).unwrap();
            let r = chain.evaluate(&probe).unwrap();
            assert!((r.mu - r.min_eigenvalue.abs()).abs() < 1e-10);
        }
    }

    #[test]
    fn single_bond_perturbation_norm() {
        let mut d = vec![0.0; 20];
        d[7] = 0.37;
        assert!((perturbation_norm(&d) - 0.37).abs() < 1e-14);
    }

    #[test]
    fn random_offsets_hit_target_norm() {
        let d = random_offsets(160, 0.25, 9, 3);
        assert!((perturbation_norm(&d) - 0.25).abs() < 1e-12);
        assert_eq!(d, random_offsets(160, 0.25, 9, 3));
        assert_ne!(d, random_offsets(160, 0.25, 9, 4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn clifford_localizer_is_hermitian(seed in any::<u64>(), n in 1usize..12, x in -5.0f64..15.0, w in -1.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut h = DMatrix::zeros(n, n);
            for i in 0..n {
                h[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
                for j in 0..i {
                    let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    h[(i, j)] = z;
                    h[(j, i)] = z.conj();
                }
            }
            let pos: Vec<f64> = (1..=n).map(|j| j as f64).collect();
            let l = build_localizer(&pos, &h, &LocalizerProbe::new(x, w, 0.2).unwrap()).unwrap();
            prop_assert_eq!((&l - l.adjoint()).norm(), 0.0);
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(l[(i, j)], C64::new(0.0, 0.0));
                    prop_assert_eq!(l[(n + i, n + j)], C64::new(0.0, 0.0));
                }
            }
        }
    }
}
