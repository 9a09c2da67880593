//! Hybrid nonlinear/linear SSH chain and its state-dependent Hamiltonian.
//!
//! Sites are stored in interleaved order `a_1, b_1, a_2, b_2, ...` across both
//! segments. Bond `k` (0-based) joins sites `k` and `k + 1`:
//!
//! * even `k`: intracell bond of cell `k / 2 + 1` (`nu_i` in the nonlinear
//!   segment, `t` in the linear one);
//! * odd `k`: intercell bond `b_c -- a_{c+1}` with `c = (k + 1) / 2`; for
//!   `c < n_nl` it carries the Kerr term
//!   `kappa_c = kappa_tilde_c + alpha (|a_{c+1}|^2 + |b_c|^2)`, `c = n_nl` is the
//!   interface bond `kappa_d`, beyond that the linear bond `tau`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn of_site(index: usize) -> Self {
        if index % 2 == 0 {
            Sublattice::A
        } else {
            Sublattice::B
        }
    }

    /// Chiral grading: `+1` on `a`, `-1` on `b`.
    pub fn grading(self) -> f64 {
        match self {
            Sublattice::A => 1.0,
            Sublattice::B => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sublattice::A => "a",
            Sublattice::B => "b",
        }
    }
}

/// Position of a site in the chain. `index` is 0-based storage order, `cell`
/// is the 1-based unit-cell number shared by both segments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteTag {
    pub index: usize,
    pub cell: usize,
    pub sublattice: Sublattice,
}

impl SiteTag {
    pub fn of(index: usize) -> Self {
        SiteTag {
            index,
            cell: index / 2 + 1,
            sublattice: Sublattice::of_site(index),
        }
    }
}

/// Model constants for the hybrid chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLatticeSpec")]
pub struct LatticeSpec {
    pub n_nl: usize,
    pub nu: Vec<f64>,
    pub kappa_tilde: Vec<f64>,
    pub alpha: f64,
    pub t: f64,
    pub tau: f64,
    pub kappa_d: f64,
    pub n_lin_a: usize,
    pub n_lin_b: usize,
}

/// Config-file form: `nu` and `kappa_tilde` may be given as a scalar that is
/// broadcast over the nonlinear segment. Missing fields take the reference
/// values.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawLatticeSpec {
    n_nl: usize,
    nu: ScalarOrList,
    kappa_tilde: ScalarOrList,
    alpha: f64,
    t: f64,
    tau: f64,
    kappa_d: f64,
    n_lin_a: usize,
    n_lin_b: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl Default for RawLatticeSpec {
    fn default() -> Self {
        RawLatticeSpec {
            n_nl: 41,
            nu: ScalarOrList::Scalar(2.5),
            kappa_tilde: ScalarOrList::Scalar(1.0),
            alpha: 0.05,
            t: 2.0,
            tau: 2.5,
            kappa_d: 2.5,
            n_lin_a: 40,
            n_lin_b: 39,
        }
    }
}

impl ScalarOrList {
    fn expand(self, len: usize) -> Vec<f64> {
        match self {
            ScalarOrList::Scalar(v) => vec![v; len],
            ScalarOrList::List(v) => v,
        }
    }
}

impl TryFrom<RawLatticeSpec> for LatticeSpec {
    type Error = Error;

    fn try_from(raw: RawLatticeSpec) -> Result<Self> {
        let spec = LatticeSpec {
            n_nl: raw.n_nl,
            nu: raw.nu.expand(raw.n_nl),
            kappa_tilde: raw.kappa_tilde.expand(raw.n_nl.saturating_sub(1)),
            alpha: raw.alpha,
            t: raw.t,
            tau: raw.tau,
            kappa_d: raw.kappa_d,
            n_lin_a: raw.n_lin_a,
            n_lin_b: raw.n_lin_b,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Default for LatticeSpec {
    /// The reference configuration: 41 nonlinear cells, 161 sites.
    fn default() -> Self {
        LatticeSpec::uniform(41, 2.5, 1.0, 0.05, 2.0, 2.5, 2.5, 40, 39)
    }
}

impl LatticeSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        n_nl: usize,
        nu: f64,
        kappa_tilde: f64,
        alpha: f64,
        t: f64,
        tau: f64,
        kappa_d: f64,
        n_lin_a: usize,
        n_lin_b: usize,
    ) -> Self {
        LatticeSpec {
            n_nl,
            nu: vec![nu; n_nl],
            kappa_tilde: vec![kappa_tilde; n_nl.saturating_sub(1)],
            alpha,
            t,
            tau,
            kappa_d,
            n_lin_a,
            n_lin_b,
        }
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_nl + self.n_lin_a + self.n_lin_b
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites() - 1
    }

    /// Number of sites on each sublattice `(a, b)`.
    pub fn sublattice_counts(&self) -> (usize, usize) {
        (self.n_nl + self.n_lin_a, self.n_nl + self.n_lin_b)
    }

    /// 0-based storage indices of the interface bond `b_n -- a_{n+1}`.
    pub fn interface_sites(&self) -> (usize, usize) {
        (2 * self.n_nl - 1, 2 * self.n_nl)
    }

    /// 0-based index of the first linear-segment site `a_{n+1}`.
    pub fn first_linear_site(&self) -> usize {
        2 * self.n_nl
    }

    pub fn is_nonlinear_site(&self, index: usize) -> bool {
        index < 2 * self.n_nl
    }

    /// Hard validation. Returns the list of soft warnings (topological
    /// configuration) on success.
    pub fn validate(&self) -> Result<Vec<String>> {
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_nl == 0 {
            return invalid("n_nl must be at least 1".into());
        }
        if self.nu.len() != self.n_nl {
            return invalid(format!("nu has {} entries, expected n_nl = {}", self.nu.len(), self.n_nl));
        }
        if self.kappa_tilde.len() != self.n_nl - 1 {
            return invalid(format!(
                "kappa_tilde has {} entries, expected n_nl - 1 = {}",
                self.kappa_tilde.len(),
                self.n_nl - 1
            ));
        }
        if let Some((i, v)) = self.nu.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return invalid(format!("nu[{i}] = {v} must be positive"));
        }
        if let Some((i, v)) = self.kappa_tilde.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return invalid(format!("kappa_tilde[{i}] = {v} must be positive"));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return invalid(format!("alpha = {} must be non-negative", self.alpha));
        }
        for (name, v) in [("t", self.t), ("tau", self.tau), ("kappa_d", self.kappa_d)] {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("{name} = {v} must be positive"));
            }
        }
        if self.n_lin_a != self.n_lin_b && self.n_lin_a != self.n_lin_b + 1 {
            return invalid(format!(
                "n_lin_a = {} must equal n_lin_b = {} or n_lin_b + 1",
                self.n_lin_a, self.n_lin_b
            ));
        }
        if self.n_lin_a == 0 {
            return invalid("the linear segment needs at least one a-site".into());
        }

        let mut warnings = Vec::new();
        for (i, (nu, kt)) in self.nu.iter().zip(&self.kappa_tilde).enumerate() {
            if nu <= kt {
                warnings.push(format!(
                    "cell {}: nu = {nu} <= kappa_tilde = {kt}, nonlinear segment not trivial at low intensity",
                    i + 1
                ));
            }
        }
        if self.tau <= self.t {
            warnings.push(format!("tau = {} <= t = {}, linear segment is trivial", self.tau, self.t));
        }
        Ok(warnings)
    }

    pub fn couplings(&self) -> Couplings {
        Couplings::from_spec(self)
    }
}

/// Bond-level description of the chain: the state-independent part of every
/// bond and which bonds carry the Kerr term.
#[derive(Clone, Debug, PartialEq)]
pub struct Couplings {
    linear: Vec<f64>,
    kerr: Vec<bool>,
    alpha: f64,
    n_nl: usize,
}

impl Couplings {
    pub fn from_spec(spec: &LatticeSpec) -> Self {
        let n = spec.n_nl;
        let n_bonds = spec.n_bonds();
        let mut linear = Vec::with_capacity(n_bonds);
        let mut kerr = Vec::with_capacity(n_bonds);
        for k in 0..n_bonds {
            if k % 2 == 0 {
                let cell = k / 2 + 1;
                linear.push(if cell <= n { spec.nu[cell - 1] } else { spec.t });
                kerr.push(false);
            } else {
                let cell = (k + 1) / 2;
                let (value, nonlinear) = match cell.cmp(&n) {
                    std::cmp::Ordering::Less => (spec.kappa_tilde[cell - 1], true),
                    std::cmp::Ordering::Equal => (spec.kappa_d, false),
                    std::cmp::Ordering::Greater => (spec.tau, false),
                };
                linear.push(value);
                kerr.push(nonlinear);
            }
        }
        Couplings {
            linear,
            kerr,
            alpha: spec.alpha,
            n_nl: n,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.linear.len() + 1
    }

    pub fn n_nl(&self) -> usize {
        self.n_nl
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn linear_bonds(&self) -> &[f64] {
        &self.linear
    }

    pub fn kerr_mask(&self) -> &[bool] {
        &self.kerr
    }

    /// Largest state-independent coupling.
    pub fn max_linear_coupling(&self) -> f64 {
        self.linear.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Adds a fixed offset to every bond's linear part.
    pub fn with_offsets(&self, offsets: &[f64]) -> Result<Couplings> {
        if offsets.len() != self.linear.len() {
            return Err(Error::DimensionMismatch {
                expected: self.linear.len(),
                got: offsets.len(),
            });
        }
        let mut out = self.clone();
        for (l, d) in out.linear.iter_mut().zip(offsets) {
            *l += d;
        }
        Ok(out)
    }

    /// Chiral grading vector (`+1` on a-sites, `-1` on b-sites).
    pub fn chirality(&self) -> Vec<f64> {
        (0..self.n_sites()).map(|j| Sublattice::of_site(j).grading()).collect()
    }

    /// Bond values for a given site density `|psi_j|^2`.
    pub fn bonds_for_density(&self, density: &[f64]) -> Vec<f64> {
        debug_assert_eq!(density.len(), self.n_sites());
        self.linear
            .iter()
            .zip(&self.kerr)
            .enumerate()
            .map(|(k, (&lin, &kerr))| {
                if kerr {
                    lin + self.alpha * (density[k] + density[k + 1])
                } else {
                    lin
                }
            })
            .collect()
    }

    pub fn hamiltonian(&self, state: &StateVector) -> Result<HamiltonianMatrix> {
        self.check_len(state.len())?;
        let density: Vec<f64> = state.amplitudes().iter().map(|z| z.norm_sqr()).collect();
        Ok(HamiltonianMatrix::from_bonds(self.bonds_for_density(&density)))
    }

    pub fn hamiltonian_complex(&self, psi: &[C64]) -> HamiltonianMatrix {
        let density: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        HamiltonianMatrix::from_bonds(self.bonds_for_density(&density))
    }

    pub fn hamiltonian_real(&self, psi: &[f64]) -> HamiltonianMatrix {
        let density: Vec<f64> = psi.iter().map(|x| x * x).collect();
        HamiltonianMatrix::from_bonds(self.bonds_for_density(&density))
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Nearest-neighbour real symmetric Hamiltonian with zero diagonal, stored by
/// its bond values.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    bonds: Vec<f64>,
}

impl HamiltonianMatrix {
    pub fn from_bonds(bonds: Vec<f64>) -> Self {
        HamiltonianMatrix { bonds }
    }

    pub fn dim(&self) -> usize {
        self.bonds.len() + 1
    }

    pub fn bonds(&self) -> &[f64] {
        &self.bonds
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (k, &b) in self.bonds.iter().enumerate() {
            m[(k, k + 1)] = b;
            m[(k + 1, k)] = b;
        }
        m
    }

    pub fn apply_real(&self, psi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; psi.len()];
        for (k, &b) in self.bonds.iter().enumerate() {
            out[k] += b * psi[k + 1];
            out[k + 1] += b * psi[k];
        }
        out
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for (k, &b) in self.bonds.iter().enumerate() {
            out[k] += psi[k + 1] * b;
            out[k + 1] += psi[k] * b;
        }
        out
    }

    /// Spectral norm (largest singular value).
    pub fn norm(&self) -> f64 {
        crate::linalg::symmetric_eigenvalues(&self.to_dense())
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::linalg::symmetric_eigenvalues(&self.to_dense())
    }
}

/// Complex site amplitudes in interleaved storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Self {
        StateVector { amps }
    }

    pub fn zeros(n: usize) -> Self {
        StateVector {
            amps: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_real(values: &[f64]) -> Self {
        StateVector {
            amps: values.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn tag(&self, index: usize) -> SiteTag {
        SiteTag::of(index)
    }

    pub fn intensity(&self) -> f64 {
        intensity(self)
    }

    /// Real representative up to a global phase: rotates so the first
    /// component of (nearly) maximal modulus is real and positive, then drops
    /// imaginary parts.
    pub fn real_gauge(&self) -> Vec<f64> {
        let max = self.amps.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let pivot = self
            .amps
            .iter()
            .copied()
            .find(|z| z.norm() >= (1.0 - 1e-6) * max)
            .unwrap_or(C64::new(0.0, 0.0));
        if pivot.norm() == 0.0 {
            return vec![0.0; self.amps.len()];
        }
        let phase = pivot.conj() / pivot.norm();
        self.amps.iter().map(|z| (z * phase).re).collect()
    }

    /// Amplitudes of `a`-sites of cells `1..=count`.
    pub fn a_profile(&self, count: usize) -> Vec<C64> {
        (0..count).map(|c| self.amps[2 * c]).collect()
    }
}

/// Total intensity `sum_j |psi_j|^2`.
pub fn intensity(state: &StateVector) -> f64 {
    state.amps.iter().map(|z| z.norm_sqr()).sum()
}

pub fn build_hamiltonian(spec: &LatticeSpec, state: &StateVector) -> Result<HamiltonianMatrix> {
    spec.couplings().hamiltonian(state)
}

/// Diagonal of the position operator: site `j` (0-based) sits at `x = j + 1`.
pub fn position_operator(spec: &LatticeSpec) -> Vec<f64> {
    (1..=spec.n_sites()).map(|j| j as f64).collect()
}
