//! Acceptance suite: one test per criterion, each printing a single
//! `[PASS]`/`[FAIL]` line with the measured values.
//!
//! Run with `cargo test -p stirap-core --test acceptance -- --nocapture`
//! to see every line.

use num_complex::Complex64;
use std::time::Instant;

use stirap_core::dynamics::{ModelVariant, PulsePair, SystemParams};
use stirap_core::hilbert::{label, Basis, StateLabel};
use stirap_core::observables::{
    leakage, parity_expectation, stirap_subspace_labels, transfer_efficiency, LeakageMode,
};
use stirap_core::propagator::{
    converge_cutoff, propagate, propagate_oracle, IntegratorOpts, Trajectory,
};
use stirap_core::sweep::{
    record_csv_line, run_sweep, AxisParam, KappaRule, SweepAxis, SweepSpec, TauRule, WidthRule,
};

/// Pulse area gT used throughout the suite.
const AREA: f64 = 10.0;

/// Efficiency of the degraded transfer at g = 0.5, kappa = 0.005 (full
/// model, converged cutoff 12). Recorded from the matrix-exponential oracle
/// run (8192 slices agreed to 2.4e-8); pinned as a regression fixture.
const EFF_FULL_G05_K0005: f64 = 0.9092806046;

/// Converged Fock cutoff for g = 0.5 transfers at gT = 10 (both with and
/// without loss), from the +4 ladder started at 4.
const CUTOFF_G05: usize = 12;

fn report(criterion: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {criterion}: {detail}");
    assert!(pass, "criterion {criterion}: {detail}");
}

fn pulses_for(g: f64) -> PulsePair {
    let width = AREA / g;
    PulsePair::with_default_span(g, width, 0.7 * width).unwrap()
}

fn resonant(variant: ModelVariant, kappa: f64) -> SystemParams {
    SystemParams::resonant(variant).with_kappa(kappa)
}

fn run(
    params: &SystemParams,
    pulses: &PulsePair,
    n_max: usize,
    psi0: &[(StateLabel, Complex64)],
    n_out: usize,
) -> (Trajectory, Basis) {
    let basis = Basis::new(n_max).unwrap();
    let psi = basis.state_vector(psi0).unwrap();
    let grid = pulses.time_grid(n_out);
    let traj = propagate(params, pulses, &basis, &psi, &grid, &IntegratorOpts::default())
        .expect("propagation succeeds");
    (traj, basis)
}

fn ket_0ge() -> Vec<(StateLabel, Complex64)> {
    vec![(label(0, 'g', 'e'), Complex64::new(1.0, 0.0))]
}

#[test]
fn criterion_1_rwa_ideal_transfer() {
    let start = Instant::now();
    let (traj, basis) = run(
        &resonant(ModelVariant::Rwa, 0.0),
        &pulses_for(0.15),
        4,
        &ket_0ge(),
        51,
    );
    let eff = transfer_efficiency(&traj, &basis);
    let elapsed = start.elapsed();
    let pass = eff > 0.99 && elapsed.as_secs_f64() < 1.0;
    report(
        "1 (RWA ideal transfer)",
        pass,
        &format!("efficiency = {eff:.6} (> 0.99), runtime = {elapsed:.2?} (< 1 s)"),
    );
}

#[test]
fn criterion_2_ground_state_invariance() {
    let psi0 = vec![(label(0, 'g', 'g'), Complex64::new(1.0, 0.0))];
    let mut finals = Vec::new();
    for variant in [ModelVariant::Rwa, ModelVariant::FullRabi] {
        let (traj, basis) = run(&resonant(variant, 0.0), &pulses_for(0.15), 4, &psi0, 51);
        let i = basis.index_of(label(0, 'g', 'g')).unwrap();
        finals.push(traj.final_state()[i].norm_sqr());
    }
    let pass = finals.iter().all(|p| *p > 0.999);
    report(
        "2 (ground-state invariance)",
        pass,
        &format!(
            "final P_0gg: RWA = {:.9}, full = {:.9} (both > 0.999)",
            finals[0], finals[1]
        ),
    );
}

#[test]
fn criterion_3_gt_scaling_law() {
    let base_g = 0.15;
    let reference = {
        let (traj, basis) = run(
            &resonant(ModelVariant::Rwa, 0.0),
            &pulses_for(base_g),
            4,
            &ket_0ge(),
            11,
        );
        transfer_efficiency(&traj, &basis)
    };
    let mut worst: f64 = 0.0;
    for c in [2.0, 5.0] {
        let (traj, basis) = run(
            &resonant(ModelVariant::Rwa, 0.0),
            &pulses_for(c * base_g),
            4,
            &ket_0ge(),
            11,
        );
        worst = worst.max((transfer_efficiency(&traj, &basis) - reference).abs());
    }
    let pass = worst < 1e-4;
    report(
        "3 (gT-scaling law)",
        pass,
        &format!("max |eff(c g, T/c) - eff(g, T)| = {worst:.2e} for c in {{2, 5}} (< 1e-4)"),
    );
}

#[test]
fn criterion_4_parity_conservation() {
    let params = resonant(ModelVariant::FullRabi, 0.0);
    let pulses = pulses_for(0.5);
    let cutoff = converge_cutoff(
        &params,
        &pulses,
        &ket_0ge(),
        4,
        1e-6,
        &IntegratorOpts::default(),
        transfer_efficiency,
    )
    .expect("ladder converges");
    let (traj, basis) = run(&params, &pulses, cutoff.n_max + 2, &ket_0ge(), 201);
    let par = parity_expectation(&traj, &basis).unwrap();
    let drift = par
        .iter()
        .fold(0.0f64, |m, p| m.max((p - par[0]).abs()));
    let pass = drift < 1e-7;
    report(
        "4 (parity conservation)",
        pass,
        &format!(
            "cutoff = {} (+2), max |<parity>(t) - <parity>(0)| = {drift:.2e} (< 1e-7)",
            cutoff.n_max
        ),
    );
}

#[test]
fn criterion_5_norm_laws() {
    // Lossless: the binding run is the bare ground state under the full
    // model (fastest phase rotation). propagate() itself enforces the same
    // 1e-8 bound on every lossless run in this suite.
    let psi_gg = vec![(label(0, 'g', 'g'), Complex64::new(1.0, 0.0))];
    let (traj, _) = run(
        &resonant(ModelVariant::FullRabi, 0.0),
        &pulses_for(0.15),
        4,
        &psi_gg,
        101,
    );
    let drift = traj
        .norm_sq
        .iter()
        .fold(0.0f64, |m, n| m.max((n - 1.0).abs()));

    // Lossy control: bare photon under pure decay has closed-form norm.
    let kappa = 0.005;
    let pulses = PulsePair::with_default_span(0.0, AREA / 0.15, 0.7 * AREA / 0.15).unwrap();
    let psi_1gg = vec![(label(1, 'g', 'g'), Complex64::new(1.0, 0.0))];
    let (traj_decay, _) = run(
        &resonant(ModelVariant::FullRabi, kappa),
        &pulses,
        2,
        &psi_1gg,
        51,
    );
    let window = pulses.t_end() - pulses.t_start();
    let expected = (-2.0 * kappa * window).exp();
    let decay_err = (traj_decay.final_norm_sq() - expected).abs();
    let monotone = traj_decay
        .norm_sq
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-10);

    let pass = drift < 1e-8 && decay_err < 1e-8 && monotone;
    report(
        "5 (norm laws)",
        pass,
        &format!(
            "lossless max |norm^2 - 1| = {drift:.2e} (< 1e-8); decay control |norm^2 - exp(-2 k dt)| = {decay_err:.2e} (< 1e-8); lossy series non-increasing: {monotone}"
        ),
    );
}

#[test]
fn criterion_6_oracle_equivalence() {
    let start = Instant::now();
    let params = resonant(ModelVariant::FullRabi, 0.005);
    let pulses = pulses_for(0.15);
    let basis = Basis::new(8).unwrap();
    let psi0_spec = vec![
        (label(0, 'g', 'g'), Complex64::new(0.2f64.sqrt(), 0.0)),
        (label(0, 'g', 'e'), Complex64::new(0.0, 0.8f64.sqrt())),
    ];
    let psi0 = basis.state_vector(&psi0_spec).unwrap();

    let traj = propagate(
        &params,
        &pulses,
        &basis,
        &psi0,
        &pulses.time_grid(2),
        &IntegratorOpts::default(),
    )
    .unwrap();
    let oracle = propagate_oracle(&params, &pulses, &basis, &psi0, 4096).unwrap();

    let mut worst: f64 = 0.0;
    for (a, b) in traj.final_state().iter().zip(oracle.iter()) {
        worst = worst.max((a.norm_sqr() - b.norm_sqr()).abs());
    }
    // Restated at the observable level: tracked populations agree too.
    let mut worst_tracked: f64 = 0.0;
    for lbl in stirap_subspace_labels() {
        let i = basis.index_of(lbl).unwrap();
        worst_tracked = worst_tracked
            .max((traj.final_state()[i].norm_sqr() - oracle[i].norm_sqr()).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-6 && elapsed.as_secs_f64() < 30.0;
    report(
        "6 (oracle equivalence)",
        pass,
        &format!(
            "max final-population diff = {worst:.2e} (tracked: {worst_tracked:.2e}) (< 1e-6), runtime = {elapsed:.2?} (< 30 s)"
        ),
    );
}

#[test]
fn criterion_7_usc_advantage_and_dce_degradation() {
    // Lossy iso-gT comparison.
    let eff_015 = {
        let (traj, basis) = run(
            &resonant(ModelVariant::FullRabi, 0.005),
            &pulses_for(0.15),
            8,
            &ket_0ge(),
            11,
        );
        transfer_efficiency(&traj, &basis)
    };
    let eff_05 = {
        let (traj, basis) = run(
            &resonant(ModelVariant::FullRabi, 0.005),
            &pulses_for(0.5),
            CUTOFF_G05,
            &ket_0ge(),
            11,
        );
        transfer_efficiency(&traj, &basis)
    };

    // Lossless: counterrotating terms do not move the RWA result below
    // g = 0.15.
    let eff_rwa = {
        let (traj, basis) = run(
            &resonant(ModelVariant::Rwa, 0.0),
            &pulses_for(0.15),
            4,
            &ket_0ge(),
            11,
        );
        transfer_efficiency(&traj, &basis)
    };
    let mut worst_rwa_gap: f64 = 0.0;
    for g in [0.05, 0.10, 0.15] {
        let (traj, basis) = run(
            &resonant(ModelVariant::FullRabi, 0.0),
            &pulses_for(g),
            8,
            &ket_0ge(),
            11,
        );
        worst_rwa_gap = worst_rwa_gap.max((transfer_efficiency(&traj, &basis) - eff_rwa).abs());
    }

    let regression = (eff_05 - EFF_FULL_G05_K0005).abs();
    let pass = eff_015 > eff_05 && worst_rwa_gap < 0.02 && regression < 1e-4;
    report(
        "7 (USC advantage / DCE degradation)",
        pass,
        &format!(
            "eff(g=0.15) = {eff_015:.6} > eff(g=0.5) = {eff_05:.6}; max |full - RWA| for g <= 0.15 at kappa=0: {worst_rwa_gap:.4} (< 0.02); |eff(0.5) - {EFF_FULL_G05_K0005}| = {regression:.2e} (< 1e-4)"
        ),
    );
}

#[test]
fn criterion_8_detuning_robustness() {
    let eff_at = |delta: f64, delta_p: f64| -> f64 {
        let params = resonant(ModelVariant::FullRabi, 0.005).with_detunings(delta, delta_p);
        let (traj, basis) = run(&params, &pulses_for(0.15), 8, &ket_0ge(), 11);
        transfer_efficiency(&traj, &basis)
    };

    let eff_center = eff_at(0.0, 0.0);
    let eff_plus = eff_at(0.0, 0.05);
    let positive_detuning_helps = eff_plus >= eff_center;

    // Neighborhood |delta| <= 0.02, |delta_p| <= 0.05, sampled on a 3x3 grid.
    let mut samples = Vec::new();
    for delta in [-0.02, 0.0, 0.02] {
        for delta_p in [-0.05, 0.0, 0.05] {
            samples.push(eff_at(delta, delta_p));
        }
    }
    let peak = samples.iter().cloned().fold(eff_plus, f64::max);
    let min = samples.iter().cloned().fold(f64::MAX, f64::min);
    let neighborhood_robust = min > 0.9 * peak;

    let pass = positive_detuning_helps && neighborhood_robust;
    report(
        "8 (detuning robustness)",
        pass,
        &format!(
            "eff(delta_p=+0.05) = {eff_plus:.6} vs eff(0,0) = {eff_center:.6} (claim: >=; measured improvement occurs at delta_p = -0.05: {:.6}); neighborhood min = {min:.6} > 0.9 * peak = {:.6}: {neighborhood_robust}",
            eff_at(0.0, -0.05),
            0.9 * peak
        ),
    );
}

#[test]
fn criterion_9_determinism_and_throughput() {
    // Bitwise determinism across worker counts on a full 41x41 grid
    // (physically light configuration to keep the suite fast).
    let spec = SweepSpec {
        axis1: SweepAxis {
            param: AxisParam::Delta,
            min: -0.1,
            max: 0.1,
            n_points: 41,
        },
        axis2: SweepAxis {
            param: AxisParam::DeltaP,
            min: -0.1,
            max: 0.1,
            n_points: 41,
        },
        base_params: resonant(ModelVariant::Rwa, 0.0),
        base_g_peak: 0.3,
        base_width: 5.0,
        psi0: ket_0ge(),
        n_max: 1,
        tau_rule: TauRule::FractionOfWidth(0.7),
        width_rule: WidthRule::Base,
        kappa_rule: KappaRule::Base,
        integrator: IntegratorOpts::default(),
        n_out: 21,
    };
    let csv_of = |workers: usize| -> Vec<String> {
        run_sweep(&spec, workers)
            .unwrap()
            .records
            .iter()
            .map(record_csv_line)
            .collect()
    };
    let serial = csv_of(1);
    let parallel = csv_of(8);
    let identical = serial == parallel;

    // Throughput: extrapolate the full map runtime from a stratified sample
    // of the production grid (g x T at n_max = 8 with loss), assuming the
    // embarrassingly parallel scaling onto 4 cores.
    let grid_n = 41;
    let sample_g = [0.05, 0.1625, 0.325, 0.4875, 0.6];
    let sample_t = [10.0, 80.0, 150.0];
    let basis = Basis::new(8).unwrap();
    let psi0 = basis.state_vector(&ket_0ge()).unwrap();
    let start = Instant::now();
    for &g in &sample_g {
        for &t in &sample_t {
            let pulses = PulsePair::with_default_span(g, t, 0.7 * t).unwrap();
            let params = resonant(ModelVariant::FullRabi, 0.005);
            propagate(
                &params,
                &pulses,
                &basis,
                &psi0,
                &pulses.time_grid(21),
                &IntegratorOpts::default(),
            )
            .unwrap();
        }
    }
    let per_point = start.elapsed().as_secs_f64() / (sample_g.len() * sample_t.len()) as f64;
    let projected_4core_min = per_point * (grid_n * grid_n) as f64 / 4.0 / 60.0;
    let fast_enough = projected_4core_min < 15.0;

    let pass = identical && fast_enough;
    report(
        "9 (determinism and throughput)",
        pass,
        &format!(
            "41x41 CSV identical for 1 vs 8 workers: {identical}; projected full 41x41 map at n_max=8 on 4 cores: {projected_4core_min:.1} min (< 15)"
        ),
    );
}

/// Leakage trends behind the efficiency map: larger coupling leaks more out
/// of the low-excitation subspaces, and losslessly the leakage reverses by
/// protocol end.
#[test]
fn leakage_reversibility_and_trend() {
    let mut finals = Vec::new();
    let mut ratios = Vec::new();
    for (g, n_max) in [(0.15, 8usize), (0.5, 14)] {
        let (traj, basis) = run(
            &resonant(ModelVariant::FullRabi, 0.0),
            &pulses_for(g),
            n_max,
            &ket_0ge(),
            801,
        );
        let stirap_leak = leakage(&traj, &basis, LeakageMode::StirapSubspace).unwrap();
        let peak = stirap_leak.iter().cloned().fold(f64::MIN, f64::max);
        let final_leak = *stirap_leak.last().unwrap();
        ratios.push(final_leak / peak);
        let n_above = leakage(&traj, &basis, LeakageMode::NAbove(1)).unwrap();
        finals.push(*n_above.last().unwrap());
    }
    // Measured final/peak ratios are ~1e-7: the intra-protocol leakage is
    // almost perfectly reversible without loss.
    assert!(
        ratios.iter().all(|r| *r < 0.2),
        "final leakage should be far below its intra-protocol peak: {ratios:?}"
    );
    assert!(
        finals[1] > finals[0],
        "multiphoton leakage should grow with coupling: {finals:?}"
    );
    println!(
        "[PASS] leakage diagnostics: final/peak ratios = {:?}, N>1 finals = {:?}",
        ratios.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>(),
        finals.iter().map(|f| format!("{f:.2e}")).collect::<Vec<_>>()
    );
}
