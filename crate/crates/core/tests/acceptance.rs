//! Acceptance criteria, one report line each.
//!
//! Runs every criterion at its stated tolerance, prints `PASS`/`FAIL` with
//! the measured figures, and exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use esdiag_core::channels::{ChannelKind, QubitChannel};
use esdiag_core::diagnose::{classify, DiagnosisKind};
use esdiag_core::sampler::{
    estimate_witness, hom_calibrate, simulate_counts, sub_seed, BootstrapConfig, SamplerConfig,
};
use esdiag_core::swapnet::{run_swap, BsmModel};
use esdiag_core::witness::{
    analytic_curve, analytic_probabilities, analytic_witness, collectibility, probabilities, Normalization,
};
use rayon::prelude::*;

struct Report {
    id: u32,
    title: &'static str,
    failures: Vec<String>,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

impl Report {
    fn passed(&self) -> bool {
        self.failures.is_empty() && !self.over_budget()
    }

    fn over_budget(&self) -> bool {
        self.budget.is_some_and(|b| self.elapsed > b)
    }

    fn print(&self) {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let budget = self.budget.map(|b| format!(" of {b:?}")).unwrap_or_default();
        let mut line =
            format!("[{status}] criterion {}: {} ({}; {:.2?}{budget})", self.id, self.title, self.detail, self.elapsed);
        if self.over_budget() {
            line.push_str("; over time budget");
        }
        if !self.failures.is_empty() {
            line.push_str(&format!("; {} failing point(s): {}", self.failures.len(), self.failures.join(", ")));
        }
        println!("{line}");
    }
}

fn timed(
    id: u32,
    title: &'static str,
    budget: Option<Duration>,
    body: impl FnOnce(&mut Vec<String>) -> String,
) -> Report {
    let start = Instant::now();
    let mut failures = Vec::new();
    let detail = body(&mut failures);
    Report { id, title, failures, detail, elapsed: start.elapsed(), budget }
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        failures.push(what());
    }
}

fn pipeline(kind: ChannelKind, d: f64, bsm: BsmModel, mode: Normalization) -> [f64; 5] {
    let out = run_swap(&QubitChannel::new(kind, d).unwrap(), &bsm).unwrap();
    probabilities(&out, mode).unwrap().as_array()
}

fn pipeline_witness(kind: ChannelKind, d: f64) -> f64 {
    let out = run_swap(&QubitChannel::new(kind, d).unwrap(), &BsmModel::ideal()).unwrap();
    collectibility(&probabilities(&out, Normalization::Conditioned).unwrap()).value
}

fn analytic_endpoints() -> Report {
    timed(1, "analytic endpoints", Some(Duration::from_secs(1)), |failures| {
        let tol = 1e-10;
        let cases = [
            ("perfect", ChannelKind::Identity, 0.0, -0.25),
            ("depolarizing d=3/4", ChannelKind::Depolarizing, 0.75, 0.75),
            ("phase d=1", ChannelKind::PhaseDamping, 1.0, 0.25),
            ("amplitude d=1", ChannelKind::AmplitudeDamping, 1.0, 0.0),
        ];
        let mut worst: f64 = 0.0;
        for (name, kind, d, want) in cases {
            for (route, got) in [("closed form", analytic_witness(kind, d).unwrap()), ("pipeline", pipeline_witness(kind, d))] {
                let err = (got - want).abs();
                worst = worst.max(err);
                check(failures, err <= tol, || format!("{name} {route} W={got}"));
            }
        }
        format!("max |ΔW| = {worst:.1e}, tol {tol:.0e}")
    })
}

fn signature_table() -> Report {
    timed(2, "signature table", None, |failures| {
        let tol = 1e-10;
        let cases = [
            ("perfect", ChannelKind::Identity, 0.0, [0.0, 0.5, 0.0, 0.0, 0.5]),
            ("depolarizing d=3/4", ChannelKind::Depolarizing, 0.75, [0.25, 0.25, 0.25, 0.25, 0.5]),
            ("phase d=1", ChannelKind::PhaseDamping, 1.0, [0.0, 0.5, 0.0, 0.25, 0.5]),
            ("amplitude d=1", ChannelKind::AmplitudeDamping, 1.0, [0.0, 0.5, 0.0, 0.0, 1.0]),
        ];
        let mut worst: f64 = 0.0;
        for (name, kind, d, want) in cases {
            let got = pipeline(kind, d, BsmModel::ideal(), Normalization::Conditioned);
            for (g, w) in got.iter().zip(want) {
                worst = worst.max((g - w).abs());
            }
            check(failures, got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol), || format!("{name} {got:?}"));
        }
        format!("max |Δp| = {worst:.1e}, tol {tol:.0e}")
    })
}

fn imperfect_bsm() -> Report {
    timed(3, "imperfect-BSM reproduction", None, |failures| {
        // p_HH = (1 − v)/2 in calibrated mode
        let v = 1.0 - 2.0 * 0.28;
        let out = run_swap(&QubitChannel::identity(), &BsmModel::new(v).unwrap()).unwrap();
        let p = probabilities(&out, Normalization::GenuineRateCalibrated).unwrap();
        let want = [0.28, 0.50, 0.28, 0.28];
        for (name, (got, w)) in ["p_HH", "p_HV", "p_VV", "p_++"].iter().zip(p.as_array().iter().zip(want)) {
            check(failures, (got - w).abs() <= 0.02, || format!("{name}={got}"));
        }
        let w = collectibility(&p).value;
        // |W − 0.75| sits on the 0.02 boundary; allow float round-off only
        check(failures, (w - 0.75).abs() <= 0.02 + 1e-12, || format!("W={w}"));
        let measured = [0.29, 0.49, 0.27, 0.29];
        let agrees_with_measured = p.as_array()[..4].iter().zip(measured).all(|(g, m)| (g - m).abs() <= 0.02);
        check(failures, agrees_with_measured, || "differs from measured set by more than 0.02".into());
        check(failures, (w - 0.75).abs() <= 0.06, || format!("W={w} outside measured 0.75 ± 0.06"));

        let mut worst_hv: f64 = 0.0;
        for i in 0..=100 {
            let v = i as f64 / 100.0;
            let out = run_swap(&QubitChannel::identity(), &BsmModel::new(v).unwrap()).unwrap();
            let hv = probabilities(&out, Normalization::GenuineRateCalibrated).unwrap().hv;
            worst_hv = worst_hv.max((hv - 0.5).abs());
        }
        check(failures, worst_hv <= 1e-10, || format!("max |p_HV − 1/2| = {worst_hv:e}"));
        format!("v = {v:.2}, p = {:.4?}, W = {w:.4}, max |p_HV − 1/2| over 101 v = {worst_hv:.1e}", &p.as_array()[..4])
    })
}

fn closed_form_vs_pipeline() -> Report {
    timed(4, "closed form vs pipeline", Some(Duration::from_secs(1)), |failures| {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let mut worst: f64 = 0.0;
        for kind in ChannelKind::NOISY {
            for (d, w) in analytic_curve(kind, &grid).unwrap() {
                let err = (w - pipeline_witness(kind, d)).abs();
                worst = worst.max(err);
                check(failures, err <= 1e-12, || format!("{} d={d} |ΔW|={err:e}", kind.name()));
            }
        }
        format!("33 points, max |ΔW| = {worst:.1e}, tol 1e-12")
    })
}

/// Visibility of the BSM in the Monte Carlo runs: the value that reproduces
/// the uncompensated probabilities of criterion 3.
const MC_VISIBILITY: f64 = 0.44;

fn monte_carlo_convergence() -> Report {
    timed(5, "Monte Carlo convergence", Some(Duration::from_secs(120)), |failures| {
        let cfg = SamplerConfig { shots: 100, sequences: 60, ..SamplerConfig::default() };
        let boot = BootstrapConfig { resamples: 1000, seed: 0 };
        let bsm = BsmModel::new(MC_VISIBILITY).unwrap();
        let mut widths = Vec::new();
        let mut summary = Vec::new();
        for (k, kind) in ChannelKind::NOISY.into_iter().enumerate() {
            for (j, d) in [0.0, 0.25, 0.5, 0.75, 1.0].into_iter().enumerate() {
                let channel = QubitChannel::new(kind, d).unwrap();
                let truth = analytic_witness(kind, d).unwrap();
                let outcomes: Vec<Option<(f64, f64)>> = (0..100u64)
                    .into_par_iter()
                    .map(|t| {
                        let seed = sub_seed(1_000 * k as u64 + 100 * j as u64, t);
                        let exp = simulate_counts(&channel, &bsm, &cfg.with_seed(seed)).ok()?;
                        let cal = hom_calibrate(MC_VISIBILITY, 100_000, sub_seed(seed, 1)).ok()?;
                        let est = estimate_witness(&exp, &cal, Normalization::Conditioned, &BootstrapConfig { seed, ..boot }).ok()?;
                        Some((est.witness.value, est.witness.uncertainty))
                    })
                    .collect();
                let estimable = outcomes.iter().flatten().count();
                let within = outcomes.iter().flatten().filter(|(w, s)| (w - truth).abs() <= 3.0 * s).count();
                let point_widths: Vec<f64> = outcomes.iter().flatten().map(|&(_, s)| s).collect();
                let (lo, hi) = point_widths.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
                let out_of_range = point_widths.iter().filter(|s| !(0.02..=0.15).contains(*s)).count();
                widths.extend(point_widths);
                let name = format!("{} d={d}", kind.name());
                check(failures, within >= 99, || format!("{name} coverage {within}/100 ({} estimable)", estimable));
                check(failures, out_of_range == 0, || {
                    format!("{name} {out_of_range} width(s) outside [0.02, 0.15] (range {lo:.3}..{hi:.3})")
                });
                summary.push(within);
            }
        }
        widths.sort_by(f64::total_cmp);
        let median = widths.get(widths.len() / 2).copied().unwrap_or(f64::NAN);
        format!(
            "v = {MC_VISIBILITY}, 16×60×100 trials, coverage per point {summary:?}, median bootstrap width {median:.3}"
        )
    })
}

fn classifier_round_trip() -> Report {
    timed(6, "classifier round trip", Some(Duration::from_secs(300)), |failures| {
        let exact = [0.0; 5];
        let mut worst: f64 = 0.0;
        for i in 1..=9 {
            let d = i as f64 / 10.0;
            for kind in ChannelKind::NOISY {
                let p = analytic_probabilities(kind, d).unwrap();
                let diag = classify(&p, &exact);
                let want = DiagnosisKind::from_channel(kind).unwrap();
                let err = diag.strength.map(|s| (s - d).abs()).unwrap_or(f64::INFINITY);
                if diag.kind == want {
                    worst = worst.max(err);
                }
                check(failures, diag.kind == want && err < 1e-9, || {
                    format!("exact {} d={d} → {} {:?}", kind.name(), diag.kind.name(), diag.strength)
                });
            }
            // the BSM hypothesis is parameterized by v; error strength is 1 − v
            let v = 1.0 - d;
            let p = pipeline(ChannelKind::Identity, 0.0, BsmModel::new(v).unwrap(), Normalization::GenuineRateCalibrated);
            let p = esdiag_core::witness::ProbabilitySet::new(
                p,
                Normalization::GenuineRateCalibrated,
                esdiag_core::witness::Source::Analytic,
            )
            .unwrap();
            let diag = classify(&p, &exact);
            let err = diag.strength.map(|s| (s - v).abs()).unwrap_or(f64::INFINITY);
            check(failures, diag.kind == DiagnosisKind::ImperfectBsm && err < 1e-9, || {
                format!("exact imperfect_bsm v={v:.1} → {} {:?}", diag.kind.name(), diag.strength)
            });
        }

        let kinds = [
            DiagnosisKind::Depolarizing,
            DiagnosisKind::PhaseDamping,
            DiagnosisKind::AmplitudeDamping,
            DiagnosisKind::ImperfectBsm,
        ];
        let mut accuracy = Vec::new();
        for (k, kind) in kinds.into_iter().enumerate() {
            let correct = (0..200u64)
                .into_par_iter()
                .filter(|&t| {
                    // d cycles through 0.2, 0.3, …, 0.9
                    let d = 0.2 + 0.1 * (t % 8) as f64;
                    let (channel, v, mode) = match kind {
                        DiagnosisKind::ImperfectBsm => {
                            (QubitChannel::identity(), 1.0 - d, Normalization::GenuineRateCalibrated)
                        }
                        _ => {
                            let ch = match kind {
                                DiagnosisKind::Depolarizing => ChannelKind::Depolarizing,
                                DiagnosisKind::PhaseDamping => ChannelKind::PhaseDamping,
                                _ => ChannelKind::AmplitudeDamping,
                            };
                            (QubitChannel::new(ch, d).unwrap(), 1.0, Normalization::Conditioned)
                        }
                    };
                    let seed = sub_seed(50_000 + k as u64, t);
                    // 100 sequences × 100 trials = 1e4 trials per configuration
                    let cfg = SamplerConfig { shots: 100, sequences: 100, seed, ..SamplerConfig::default() };
                    let Ok(exp) = simulate_counts(&channel, &BsmModel::new(v).unwrap(), &cfg) else { return false };
                    let Ok(cal) = hom_calibrate(v, 100_000, sub_seed(seed, 1)) else { return false };
                    let boot = BootstrapConfig { resamples: 300, seed };
                    let Ok(est) = estimate_witness(&exp, &cal, mode, &boot) else { return false };
                    classify(&est.witness.inputs, &est.probability_sigma).kind == kind
                })
                .count();
            check(failures, correct * 100 >= 95 * 200, || format!("sampled {} accuracy {correct}/200", kind.name()));
            accuracy.push(format!("{} {correct}/200", kind.name()));
        }
        format!("exact max |Δd| = {worst:.1e} where kind matched; sampled {}", accuracy.join(", "))
    })
}

fn hardware_values_substitution(bsm: &Report, convergence: &Report) -> Report {
    timed(7, "measured values via criteria 3 and 5", None, |failures| {
        check(failures, bsm.passed(), || "criterion 3 failed".into());
        check(failures, convergence.passed(), || "criterion 5 failed".into());
        let measured = [
            (ChannelKind::Identity, 0.0, -0.24, 0.06),
            (ChannelKind::Depolarizing, 0.75, 0.80, 0.09),
            (ChannelKind::PhaseDamping, 1.0, 0.32, 0.09),
            (ChannelKind::AmplitudeDamping, 1.0, -0.05, 0.09),
        ];
        let inside = measured
            .iter()
            .filter(|(kind, d, w, err)| (w - analytic_witness(*kind, *d).unwrap()).abs() <= *err)
            .count();
        format!("model inside {inside}/4 measured error bars (informational)")
    })
}

fn main() -> ExitCode {
    let mut reports = vec![
        analytic_endpoints(),
        signature_table(),
        imperfect_bsm(),
        closed_form_vs_pipeline(),
        monte_carlo_convergence(),
        classifier_round_trip(),
    ];
    reports.push(hardware_values_substitution(&reports[2], &reports[4]));
    for r in &reports {
        r.print();
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    println!("acceptance: {} of {} criteria passed", reports.len() - failed, reports.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
