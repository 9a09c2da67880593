//! The runnable experiments.

use anyhow::Result;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use nltzm::designer::{design_couplings, verify_design};
use nltzm::dynamics::{
    a_profile_real, approx_excited_profile, power_balance, relax_to_steady, stability_test, steady_state, sweep_amplitude,
    StabilityOptions, SweepDirection,
};
use nltzm::io;
use nltzm::lattice::{LatticeSpec, StateVector};
use nltzm::localizer::{chain_grid, mu_max_from_scan, scan_frozen, verify_protection, DeltaSpec, FrozenChain};
use nltzm::nl_eigen::sweep_spectrum;
use nltzm::zeromode::{cobweb, construct_tzm, find_i2, plateau_height, plateau_onset, profile_from_edge, RegimeThresholds};

use crate::config::{
    DesignExperiment, DriveExperiment, Experiment, ExperimentConfig, LocalizerExperiment, SpectrumExperiment,
    StabilityExperiment, TargetConfig, ZeromodeExperiment,
};
use crate::manifest::Outputs;

/// Name, description and config block of every experiment, in listing order.
pub const CATALOG: [(&str, &str, &str); 6] = [
    ("spectrum", "nonlinear spectrum versus intensity with the pinned zero-mode branch", "[experiment] intensities"),
    ("zeromode", "recurrence profiles, regimes, full-coverage intensity and cobweb maps", "[experiment] intensities, epsilon, cobweb"),
    ("design", "couplings for a target plateau shape and their verification", "[experiment.target]"),
    ("localizer", "local invariant and gap scan, mu_max and the perturbation test", "[experiment] intensity, beta, points"),
    ("drive", "driven-dissipative steady states, amplitude sweeps and profile comparison", "[experiment.drive], [experiment.target]"),
    ("stability", "recovery of the similarity after random noise on steady states", "[experiment.drive], amplitudes, trials"),
];

/// Seed of task `index`, drawn from stream `index` of the master generator.
pub fn task_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

pub fn run_experiment(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    match &cfg.experiment {
        Experiment::Spectrum(e) => spectrum(cfg, e, out),
        Experiment::Zeromode(e) => zeromode(cfg, e, out),
        Experiment::Design(e) => design(cfg, e, out),
        Experiment::Localizer(e) => localizer(cfg, e, out),
        Experiment::Drive(e) => drive(cfg, e, out),
        Experiment::Stability(e) => stability(cfg, e, out),
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, v| m.max(v.abs()))
}

fn gauge_fixed(state: &StateVector) -> StateVector {
    StateVector::from_real(&state.real_gauge())
}

#[derive(Serialize)]
struct SpectrumSummary {
    converged: usize,
    failed: usize,
    max_abs_omega: f64,
    max_residual: f64,
}

fn spectrum(cfg: &ExperimentConfig, e: &SpectrumExperiment, out: &mut Outputs) -> Result<()> {
    let Some(sweep) = out.track("sweep", sweep_spectrum(&cfg.lattice, &e.intensities, &cfg.solver)) else {
        return Ok(());
    };
    for (k, &i) in e.intensities.iter().enumerate() {
        let task = format!("I={}", fmt_value(i));
        match &sweep.tzm_branch[k] {
            Some(pair) => {
                out.ok(task);
                out.csv(&format!("mode_I{}.csv", fmt_value(i)), io::profile_rows(&gauge_fixed(&pair.state)))?;
            }
            None => {
                let msg = sweep.failures.iter().find(|f| f.0 == k).map(|f| f.1.clone()).unwrap_or_default();
                out.fail(task, msg);
            }
        }
    }
    out.csv("spectrum.csv", io::spectrum_rows(&sweep))?;
    out.csv("branch.csv", io::branch_rows(&sweep))?;
    let summary = SpectrumSummary {
        converged: sweep.converged().count(),
        failed: sweep.failures.len(),
        max_abs_omega: max_abs(sweep.converged().map(|(_, p)| p.omega)),
        max_residual: max_abs(sweep.converged().map(|(_, p)| p.residual)),
    };
    out.json("summary.json", &summary)
}

#[derive(Serialize)]
struct ProfileSummary {
    intensity: f64,
    regime: &'static str,
    edge_amplitude: f64,
    interface_amplitude: f64,
    max_bond_residual: f64,
}

#[derive(Serialize)]
struct CobwebSummary {
    file: String,
    start: f64,
    verdict: nltzm::zeromode::Verdict,
}

#[derive(Serialize)]
struct ZeromodeSummary {
    plateau_height: Option<f64>,
    full_coverage_intensity: Option<f64>,
    plateau_onset_intensity: Option<f64>,
    profiles: Vec<ProfileSummary>,
    cobwebs: Vec<CobwebSummary>,
}

fn zeromode(cfg: &ExperimentConfig, e: &ZeromodeExperiment, out: &mut Outputs) -> Result<()> {
    let spec = &cfg.lattice;
    let mut summary = ZeromodeSummary {
        plateau_height: None,
        full_coverage_intensity: None,
        plateau_onset_intensity: None,
        profiles: Vec::new(),
        cobwebs: Vec::new(),
    };
    for &i in &e.intensities {
        let Some(p) = out.track(format!("profile I={}", fmt_value(i)), construct_tzm(spec, i)) else { continue };
        out.csv(&format!("profile_I{}.csv", fmt_value(i)), io::profile_rows(&p.to_state(spec)))?;
        summary.profiles.push(ProfileSummary {
            intensity: i,
            regime: p.regime.label(),
            edge_amplitude: p.a[0],
            interface_amplitude: p.a[spec.n_nl - 1],
            max_bond_residual: p.max_bond_residual(spec),
        });
    }
    summary.full_coverage_intensity = out.track("full coverage", find_i2(spec, e.epsilon));
    summary.plateau_onset_intensity = out.track("plateau onset", plateau_onset(spec, &RegimeThresholds::default()));
    // cobweb starts are scaled by the first bond's plateau
    summary.plateau_height = out.track("plateau height", plateau_height(spec.nu[0], spec.kappa_tilde[0], spec.alpha));
    if let Some(p) = summary.plateau_height {
        for (k, run) in e.cobweb.iter().enumerate() {
            let start = run.start_fraction * p;
            let Some(traj) = out.track(format!("cobweb {k}"), cobweb(spec, start, run.direction, run.max_steps)) else {
                continue;
            };
            let file = format!("cobweb_{k}.csv");
            out.csv(&file, io::cobweb_rows(&traj))?;
            summary.cobwebs.push(CobwebSummary { file, start, verdict: traj.verdict });
        }
    }
    out.json("summary.json", &summary)
}

fn designed_lattice(base: &LatticeSpec, target: &TargetConfig) -> nltzm::Result<LatticeSpec> {
    Ok(design_couplings(base, &target.profile(base.n_nl)?)?.spec)
}

#[derive(Serialize)]
struct DesignSummary {
    design_intensity: f64,
    infeasible_bonds: Vec<usize>,
    verification: Option<nltzm::designer::DesignReport>,
}

fn design(cfg: &ExperimentConfig, e: &DesignExperiment, out: &mut Outputs) -> Result<()> {
    let Some(target) = out.track("target", e.target.profile(cfg.lattice.n_nl)) else { return Ok(()) };
    let Some(d) = out.track("design", design_couplings(&cfg.lattice, &target)) else { return Ok(()) };
    out.csv("design.csv", io::design_rows(&d))?;
    out.write("lattice.toml", toml::to_string(&d.spec)?.as_bytes())?;
    if let Some(p) = out.track("profile", construct_tzm(&d.spec, d.design_intensity)) {
        out.csv("design_profile.csv", io::profile_rows(&p.to_state(&d.spec)))?;
    }
    let verification = if e.verify { out.track("verify", verify_design(&d.spec, &target, &cfg.solver)) } else { None };
    let summary = DesignSummary {
        design_intensity: d.design_intensity,
        infeasible_bonds: d.infeasible_bonds(),
        verification,
    };
    out.json("design_report.json", &summary)
}

#[derive(Serialize)]
struct LocalizerSummary {
    intensity: f64,
    omega: f64,
    steps: Vec<nltzm::localizer::InvariantStep>,
    vacuum_invariant: f64,
    mu_max: Option<f64>,
    mu_max_position: Option<f64>,
    max_perturbed_abs_omega: Option<f64>,
}

fn localizer(cfg: &ExperimentConfig, e: &LocalizerExperiment, out: &mut Outputs) -> Result<()> {
    let spec = &cfg.lattice;
    let Some(sweep) = out.track("solve", sweep_spectrum(spec, &[e.intensity], &cfg.solver)) else { return Ok(()) };
    let Some(mode) = sweep.tzm_branch[0].clone() else {
        out.fail("mode", sweep.failures.first().map(|f| f.1.clone()).unwrap_or_default());
        return Ok(());
    };
    out.csv("mode.csv", io::profile_rows(&gauge_fixed(&mode.state)))?;
    let Some(chain) = out.track("freeze", FrozenChain::new(spec, &mode.state)) else { return Ok(()) };
    let grid: Vec<f64> = (0..e.points).map(|k| e.x_min + (e.x_max - e.x_min) * k as f64 / (e.points - 1) as f64).collect();
    let Some(scan) = out.track("scan", scan_frozen(&chain, &grid, e.omega_tilde, e.beta)) else { return Ok(()) };
    out.csv("scan.csv", io::scan_rows(&scan))?;

    let mu = scan_frozen(&chain, &chain_grid(&chain, e.mu_max_points_per_site), e.omega_tilde, e.beta)
        .and_then(|s| mu_max_from_scan(&chain, &s));
    let mu = out.track("mu_max", mu);
    let mut max_perturbed = None;
    if let Some((mu_max, _)) = mu {
        let delta = DeltaSpec { fraction_of_mu_max: e.fraction_of_mu_max };
        let reports = verify_protection(spec, &mode, mu_max, &delta, e.protection_trials, cfg.seed, &cfg.solver);
        for r in &reports {
            match &r.error {
                None => out.ok(format!("protection trial {}", r.trial)),
                Some(msg) => out.fail(format!("protection trial {}", r.trial), msg),
            }
        }
        max_perturbed = Some(max_abs(reports.iter().filter_map(|r| r.post_perturbation_omega)));
        out.csv("protection.csv", io::protection_rows(&reports))?;
    }
    let summary = LocalizerSummary {
        intensity: e.intensity,
        omega: mode.omega,
        steps: scan.steps.clone(),
        vacuum_invariant: chain.vacuum_invariant(),
        mu_max: mu.map(|m| m.0),
        mu_max_position: mu.map(|m| m.1),
        max_perturbed_abs_omega: max_perturbed,
    };
    out.json("summary.json", &summary)
}

#[derive(Serialize)]
struct ComparisonRow {
    cell: usize,
    steady: f64,
    loss_corrected: f64,
    lossless: f64,
}

#[derive(Serialize)]
struct DriveSummary {
    amplitude: f64,
    intensity: Option<f64>,
    residual: Option<f64>,
    injected_power: Option<f64>,
    dissipated_power: Option<f64>,
    loss_corrected_deviation: Option<f64>,
    lossless_deviation: Option<f64>,
    relaxation_time: Option<f64>,
    relaxed_sup_distance: Option<f64>,
}

fn drive_lattice(cfg: &ExperimentConfig, use_design: bool, target: &TargetConfig, out: &mut Outputs) -> Option<LatticeSpec> {
    if use_design {
        out.track("design", designed_lattice(&cfg.lattice, target))
    } else {
        Some(cfg.lattice.clone())
    }
}

fn drive(cfg: &ExperimentConfig, e: &DriveExperiment, out: &mut Outputs) -> Result<()> {
    let Some(spec) = drive_lattice(cfg, e.use_design, &e.target, out) else { return Ok(()) };
    let template = e.drive.drive(&spec, e.amplitude);
    for (direction, name) in [(SweepDirection::Up, "up"), (SweepDirection::Down, "down")] {
        let task = format!("sweep {name}");
        let Some(points) = out.track(task.clone(), sweep_amplitude(&spec, &template, &e.amplitudes, direction, &e.steady)) else {
            continue;
        };
        let failed: Vec<String> = points.iter().filter(|p| !p.converged).map(|p| fmt_value(p.amplitude)).collect();
        if !failed.is_empty() {
            out.fail(format!("{task} points"), format!("no steady state at A = {}", failed.join(", ")));
        }
        out.csv(&format!("sweep_{name}.csv"), io::sweep_rows(&points))?;
    }

    let mut summary = DriveSummary {
        amplitude: e.amplitude,
        intensity: None,
        residual: None,
        injected_power: None,
        dissipated_power: None,
        loss_corrected_deviation: None,
        lossless_deviation: None,
        relaxation_time: None,
        relaxed_sup_distance: None,
    };
    if let Some(s) = out.track("steady state", steady_state(&spec, &template, None, &e.steady)) {
        out.csv("steady_state.csv", io::state_rows(&s.phi_tilde))?;
        let (injected, dissipated) = power_balance(&template, &s.phi_tilde);
        summary.intensity = Some(s.intensity());
        summary.residual = Some(s.residual);
        summary.injected_power = Some(injected);
        summary.dissipated_power = Some(dissipated);

        let steady = a_profile_real(&spec, &s.phi_tilde);
        let approx = approx_excited_profile(&spec, &template, steady[0]);
        let lossless = profile_from_edge(&spec, steady[0]);
        if let (Some(approx), Some(lossless)) = (out.track("loss-corrected profile", approx), out.track("lossless profile", lossless)) {
            let scale = max_abs(steady.iter().copied());
            let dev = |p: &[f64]| max_abs(steady.iter().zip(p).map(|(a, b)| a - b)) / scale;
            summary.loss_corrected_deviation = Some(dev(&approx));
            let (lo, hi) = nltzm::designer::default_interior(spec.n_nl);
            summary.lossless_deviation = Some(max_abs((lo - 1..hi).map(|i| approx[i] - lossless[i])) / scale);
            let rows = (0..spec.n_nl).map(|i| ComparisonRow { cell: i + 1, steady: steady[i], loss_corrected: approx[i], lossless: lossless[i] });
            out.csv("profile_comparison.csv", rows)?;
        }
        if e.relax {
            let start = StateVector::zeros(spec.n_sites());
            if let Some((relaxed, t)) = out.track("relax", relax_to_steady(&spec, &template, &start, e.relax_t_max, e.dt, 1e-8)) {
                out.csv("relaxed_state.csv", io::state_rows(&relaxed))?;
                summary.relaxation_time = Some(t);
                summary.relaxed_sup_distance =
                    Some(max_abs(relaxed.amplitudes().iter().zip(s.phi_tilde.amplitudes()).map(|(a, b)| (a - b).norm())));
            }
        }
    }
    out.json("summary.json", &summary)
}

#[derive(Serialize)]
struct TrialSummary {
    amplitude: f64,
    trial: usize,
    seed: u64,
    file: String,
    min_chi: f64,
    final_chi: f64,
    /// First sample time after which the similarity stays above the threshold.
    recovery_time: Option<f64>,
}

fn stability(cfg: &ExperimentConfig, e: &StabilityExperiment, out: &mut Outputs) -> Result<()> {
    let Some(spec) = drive_lattice(cfg, e.use_design, &e.target, out) else { return Ok(()) };
    let mut steadies = Vec::new();
    for &a in &e.amplitudes {
        let drive = e.drive.drive(&spec, a);
        if let Some(s) = out.track(format!("steady A={}", fmt_value(a)), steady_state(&spec, &drive, None, &e.steady)) {
            steadies.push((a, drive, s));
        }
    }
    let opts = StabilityOptions { noise_amplitude: e.noise_amplitude, noise: e.noise, t_end: e.t_end, dt: e.dt, sample_every: e.sample_every };
    let jobs: Vec<(usize, usize)> = (0..steadies.len()).flat_map(|k| (0..e.trials).map(move |t| (k, t))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(k, trial)| {
            let (a, drive, s) = &steadies[k];
            let index = e.amplitudes.iter().position(|x| x == a).unwrap_or(k) * e.trials + trial;
            let seed = task_seed(cfg.seed, index as u64);
            (*a, trial, seed, stability_test(&spec, drive, s, seed, &opts))
        })
        .collect();
    let mut trials = Vec::new();
    for (a, trial, seed, result) in results {
        let task = format!("noise A={} trial {trial}", fmt_value(a));
        let Some(series) = out.track(task, result) else { continue };
        let file = format!("chi_A{}_trial{trial}.csv", fmt_value(a));
        out.csv(&file, io::chi_rows(&series))?;
        let recovery_time = series.iter().rposition(|&(_, c)| c < e.threshold).map_or(series.first().map(|s| s.0), |k| series.get(k + 1).map(|s| s.0));
        trials.push(TrialSummary {
            amplitude: a,
            trial,
            seed,
            file,
            min_chi: series.iter().fold(1.0, |m, s| f64::min(m, s.1)),
            final_chi: series.last().map_or(f64::NAN, |s| s.1),
            recovery_time,
        });
    }
    out.json("summary.json", &trials)
}
