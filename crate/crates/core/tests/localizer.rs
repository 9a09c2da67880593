use std::sync::OnceLock;

use nltzm::error::Error;
use nltzm::lattice::{LatticeSpec, StateVector};
use nltzm::localizer::{
    chain_grid, mu_max_from_scan, scan_frozen, verify_protection, DeltaSpec, FrozenChain, LocalizerProbe,
};
use nltzm::nl_eigen::{sweep_spectrum, Eigenpair, SolverOptions};

fn mode_625() -> &'static Eigenpair {
    static MODE: OnceLock<Eigenpair> = OnceLock::new();
    MODE.get_or_init(|| {
        let s = sweep_spectrum(&LatticeSpec::default(), &[625.0], &SolverOptions::default()).unwrap();
        s.tzm_branch[0].clone().unwrap()
    })
}

fn chain() -> FrozenChain {
    FrozenChain::new(&LatticeSpec::default(), &mode_625().state).unwrap()
}

fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

fn trivial_junction() -> LatticeSpec {
    // balanced chain; the linear segment is trivial (tau < t)
    LatticeSpec::uniform(41, 2.5, 1.0, 0.0, 2.5, 2.0, 2.5, 40, 40)
}

#[test]
fn mode_site_carries_a_single_unit_step_with_a_gap_closing() {
    let c = chain();
    let scan = scan_frozen(&c, &grid(-20.0, 180.0, 200), 0.0, 0.2).unwrap();
    assert_eq!(scan.steps.len(), 1, "{:?}", scan.steps);
    let step = &scan.steps[0];
    assert_eq!((step.to - step.from).abs(), 1.0);
    assert!(step.mu_at_x0 < 1e-6 * step.norm_at_x0);
    // piecewise constant: the invariant is defined everywhere on the grid and
    // changes only at the step
    let defined: Vec<f64> = scan.points.iter().map(|p| p.c.unwrap()).collect();
    let changes = defined.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(changes, 1);
    assert!(defined.iter().all(|v| (2.0 * v).fract() == 0.0));
}

#[test]
fn far_probes_are_gapped_by_their_distance() {
    let c = chain();
    let beta = 0.2;
    for x in [-30.0, -5.0, 170.0, 200.0] {
        let r = c.evaluate(&LocalizerProbe::new(x, 0.0, beta).unwrap()).unwrap();
        let distance = if x < 1.0 { 1.0 - x } else { x - 161.0 };
        assert!(r.mu >= beta * distance - 1e-12, "x = {x}: mu = {}", r.mu);
    }
}

#[test]
fn mu_max_is_positive_and_grid_stable() {
    let c = chain();
    let coarse = mu_max_from_scan(&c, &scan_frozen(&c, &chain_grid(&c, 1), 0.0, 0.2).unwrap()).unwrap().0;
    let fine = mu_max_from_scan(&c, &scan_frozen(&c, &chain_grid(&c, 2), 0.0, 0.2).unwrap()).unwrap().0;
    assert!(coarse > 0.0);
    assert!(((fine - coarse) / coarse).abs() <= 0.01, "{coarse} vs {fine}");
}

#[test]
fn mu_max_vanishes_with_the_position_weight() {
    let c = chain();
    let values: Vec<f64> = [0.2, 0.02, 2e-3, 2e-4]
        .iter()
        .map(|&beta| mu_max_from_scan(&c, &scan_frozen(&c, &chain_grid(&c, 1), 0.0, beta).unwrap()).unwrap().0)
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    assert!(values[3] < 0.05 * values[0], "{values:?}");
}

#[test]
fn trivial_junction_has_no_step_and_no_domain() {
    let spec = trivial_junction();
    let c = FrozenChain::new(&spec, &StateVector::zeros(spec.n_sites())).unwrap();
    let scan = scan_frozen(&c, &grid(-20.0, 182.0, 120), 0.0, 0.2).unwrap();
    assert!(scan.steps.is_empty(), "{:?}", scan.steps);
    let first = scan.points.first().unwrap().c.unwrap();
    let last = scan.points.last().unwrap().c.unwrap();
    assert_eq!((first, last), (0.0, 0.0));
    assert!(matches!(mu_max_from_scan(&c, &scan), Err(Error::EmptyTopologicalDomain)));
}

#[test]
fn unperturbed_and_oversized_perturbations() {
    let spec = LatticeSpec::default();
    let mode = mode_625();
    let none = verify_protection(&spec, mode, 0.9, &DeltaSpec { fraction_of_mu_max: 0.0 }, 1, 7, &SolverOptions::default());
    assert_eq!(none[0].perturbation_norm, 0.0);
    assert!(none[0].bound_satisfied);
    assert!(none[0].post_perturbation_omega.unwrap().abs() <= 1e-8);
    let big = verify_protection(&spec, mode, 0.9, &DeltaSpec { fraction_of_mu_max: 3.0 }, 2, 7, &SolverOptions::default());
    assert!(big.iter().all(|r| !r.bound_satisfied && (r.perturbation_norm - 2.7).abs() < 1e-9));
}
