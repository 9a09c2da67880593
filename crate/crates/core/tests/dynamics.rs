use std::sync::OnceLock;

use nltzm::designer::{design_couplings, make_target, Shape};
use nltzm::dynamics::{
    a_profile_real, evolve, integrate, power_balance, relax_to_steady, stability_test, steady_state, sweep_amplitude,
    DriveConfig, StabilityOptions, SteadyOptions, SteadyState, SweepDirection,
};
use nltzm::lattice::{LatticeSpec, StateVector, C64};

/// Reference lattice with a cosine-shaped plateau `4 + 2 cos`.
fn cosine_lattice() -> &'static LatticeSpec {
    static SPEC: OnceLock<LatticeSpec> = OnceLock::new();
    SPEC.get_or_init(|| {
        let target = make_target(Shape::Cosine { offset: 4.0, amplitude: 2.0 }, 41).unwrap();
        design_couplings(&LatticeSpec::default(), &target).unwrap().spec
    })
}

fn steady_one() -> &'static SteadyState {
    static STATE: OnceLock<SteadyState> = OnceLock::new();
    STATE.get_or_init(|| {
        let spec = cosine_lattice();
        steady_state(spec, &DriveConfig::single_source(spec, 1.0), None, &SteadyOptions::default()).unwrap()
    })
}

fn sup(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

fn small_chain() -> LatticeSpec {
    LatticeSpec::uniform(8, 2.5, 1.0, 0.05, 2.0, 2.5, 2.5, 6, 5)
}

#[test]
fn integrated_state_relaxes_onto_the_fixed_point() {
    let spec = cosine_lattice();
    let drive = DriveConfig::single_source(spec, 1.0);
    let (relaxed, _) = relax_to_steady(spec, &drive, &StateVector::zeros(spec.n_sites()), 5000.0, 0.01, 1e-8).unwrap();
    assert!(sup(relaxed.amplitudes(), steady_one().phi_tilde.amplitudes()) < 1e-4);
}

#[test]
fn steady_state_is_stationary_under_evolution() {
    let spec = cosine_lattice();
    let drive = DriveConfig::single_source(spec, 1.0);
    let s = steady_one();
    let rec = evolve(spec, &drive, &s.phi_tilde, 50.0, 0.01, 500).unwrap();
    for st in &rec.states {
        assert!(sup(st.amplitudes(), s.phi_tilde.amplitudes()) < 1e-6);
    }
}

#[test]
fn rotating_frame_at_finite_frequency() {
    let spec = small_chain();
    let mut drive = DriveConfig::single_source(&spec, 0.8);
    drive.omega_tilde = 0.3;
    let s = steady_state(&spec, &drive, None, &SteadyOptions::default()).unwrap();
    let rec = evolve(&spec, &drive, &s.phi_tilde, 50.0, 0.01, 100).unwrap();
    for (t, st) in rec.times.iter().zip(&rec.states) {
        let phase = C64::from_polar(1.0, -drive.omega_tilde * t);
        let expected: Vec<C64> = s.phi_tilde.amplitudes().iter().map(|z| z * phase).collect();
        assert!(sup(st.amplitudes(), &expected) < 1e-6, "t = {t}");
    }
}

#[test]
fn power_balance_holds_at_steady_states() {
    let s = steady_one();
    let drive = DriveConfig::single_source(cosine_lattice(), 1.0);
    let (injected, dissipated) = power_balance(&drive, &s.phi_tilde);
    assert!(((injected - dissipated) / dissipated).abs() <= 1e-8);

    let spec = small_chain();
    for (a, w) in [(0.3, 0.0), (1.5, 0.4), (2.0, -0.7)] {
        let mut drive = DriveConfig::single_source(&spec, a);
        drive.omega_tilde = w;
        let s = steady_state(&spec, &drive, None, &SteadyOptions::default()).unwrap();
        let (injected, dissipated) = power_balance(&drive, &s.phi_tilde);
        assert!(((injected - dissipated) / dissipated).abs() <= 1e-8);
    }
}

#[test]
fn rk4_is_fourth_order() {
    let spec = small_chain();
    let drive = DriveConfig::single_source(&spec, 1.0);
    let psi0: Vec<C64> = (0..spec.n_sites()).map(|j| C64::new((0.3 * j as f64).cos(), 0.1)).collect();
    let run = |dt: f64| integrate(&spec, &drive, &psi0, 4.0, dt, usize::MAX, |_, _| true).unwrap().1;
    let dt = 0.02;
    let reference = run(dt / 4.0);
    let coarse = sup(&run(dt), &reference);
    let fine = sup(&run(dt / 2.0), &reference);
    let ratio = coarse / fine;
    assert!((ratio - 16.0).abs() <= 0.3 * 16.0, "ratio {ratio}");
}

#[test]
fn zero_amplitude_sweep() {
    let spec = small_chain();
    let pts = sweep_amplitude(&spec, &DriveConfig::single_source(&spec, 1.0), &[0.0], SweepDirection::Up, &SteadyOptions::default()).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].intensity, 0.0);
}

#[test]
fn sweeps_agree_and_intensity_grows_with_amplitude() {
    let spec = cosine_lattice();
    let drive = DriveConfig::single_source(spec, 1.0);
    let amps: Vec<f64> = (0..=24).map(|k| 0.25 * k as f64).collect();
    let up = sweep_amplitude(spec, &drive, &amps, SweepDirection::Up, &SteadyOptions::default()).unwrap();
    let down = sweep_amplitude(spec, &drive, &amps, SweepDirection::Down, &SteadyOptions::default()).unwrap();
    assert!(up.iter().all(|p| p.converged));
    for (u, d) in up.iter().zip(&down).filter(|(u, d)| u.converged && d.converged) {
        assert!((u.intensity - d.intensity).abs() <= 1e-6 * 1f64.max(u.intensity));
    }
    assert!(up.windows(2).all(|w| w[1].intensity >= w[0].intensity));

    // decay at small drive, a filling plateau, then the left edge overshoots
    let edge: Vec<f64> = up.iter().map(|p| a_profile_real(spec, p.state.as_ref().unwrap())[0]).collect();
    let m1 = 6.0;
    assert!(edge[1] < 1e-6 * m1);
    let full = edge.iter().position(|&a| a >= 0.99 * m1).expect("full coverage reached");
    assert!(edge[full..].iter().any(|&a| a > 1.05 * m1));
    let interior = a_profile_real(spec, up[8].state.as_ref().unwrap());
    assert!((20..40).all(|i| (interior[i].abs() - (4.0 + 2.0 * (2.0 * std::f64::consts::PI * i as f64 / 40.0).cos())).abs() < 0.1 * m1));
}

#[test]
fn noisy_start_recovers_and_seeds_differ() {
    let spec = cosine_lattice();
    let drive = DriveConfig::single_source(spec, 1.0);
    let opts = StabilityOptions { t_end: 400.0, ..Default::default() };
    let a = stability_test(spec, &drive, steady_one(), 11, &opts).unwrap();
    let b = stability_test(spec, &drive, steady_one(), 12, &opts).unwrap();
    assert!(a.last().unwrap().1 >= 0.999 && b.last().unwrap().1 >= 0.999);
    assert!(a[1].1 != b[1].1);
    assert!(a.iter().all(|&(_, chi)| (0.0..=1.0).contains(&chi)));
}
