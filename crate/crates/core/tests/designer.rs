use nltzm::designer::{design_couplings, make_target, verify_design, Shape};
use nltzm::lattice::LatticeSpec;
use nltzm::nl_eigen::SolverOptions;

fn verify(shape: Shape) -> nltzm::designer::DesignReport {
    let base = LatticeSpec::default();
    let target = make_target(shape, 41).unwrap();
    let design = design_couplings(&base, &target).unwrap();
    assert!(design.all_feasible(), "infeasible bonds {:?}", design.infeasible_bonds());
    verify_design(&design.spec, &target, &SolverOptions::default()).unwrap()
}

#[test]
fn cosine_couplings_match_per_bond_inversion() {
    let base = LatticeSpec::default();
    let target = make_target(Shape::Cosine { offset: 4.0, amplitude: 2.0 }, 41).unwrap();
    let d = design_couplings(&base, &target).unwrap();
    for i in 0..40 {
        let m = 4.0 + 2.0 * (2.0 * std::f64::consts::PI * i as f64 / 40.0).cos();
        let m_next = 4.0 + 2.0 * (2.0 * std::f64::consts::PI * (i + 1) as f64 / 40.0).cos();
        let expected = 2.5 * m / m_next - 0.05 * m_next * m_next;
        assert!((d.kappa_tilde[i] - expected).abs() < 1e-12);
    }
}

#[test]
fn uniform_design_reproduces_its_plateau() {
    let r = verify(Shape::Uniform { level: 30f64.sqrt() });
    assert!(r.recurrence_deviation <= 1e-10, "{}", r.recurrence_deviation);
    assert!(r.omega.abs() <= 1e-8);
}

#[test]
fn square_design_verifies() {
    let r = verify(Shape::Square { low: 4.0, high: 5.0, duty: 0.5 });
    assert!(r.recurrence_deviation <= 0.02 && r.eigen_deviation <= 0.02, "{r:?}");
    assert!(r.omega.abs() <= 1e-8);
}

#[test]
fn triangle_design_verifies() {
    let r = verify(Shape::Triangle { base: 3.0, peak: 6.0 });
    assert!(r.recurrence_deviation <= 0.02 && r.eigen_deviation <= 0.02, "{r:?}");
    assert!(r.omega.abs() <= 1e-8);
}

#[test]
fn cosine_design_verifies() {
    let r = verify(Shape::Cosine { offset: 4.0, amplitude: 2.0 });
    assert!(r.recurrence_deviation <= 0.02 && r.eigen_deviation <= 0.02, "{r:?}");
    assert!(r.omega.abs() <= 1e-8);
}
