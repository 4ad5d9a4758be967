//! The four commands as plain functions over resolved settings.

use std::path::Path;

use esdiag_core::channels::ChannelKind;
use esdiag_core::diagnose::{classify, ChannelDiagnosis};
use esdiag_core::sampler::{
    estimate_witness, hom_calibrate, simulate_counts, sub_seed, BootstrapConfig, Estimate, Experiment,
    HomCalibration, ObservedRates, RateTable,
};
use esdiag_core::swapnet::{evolve_pairs, LOCAL_PHOTONS};
use esdiag_core::witness::{analytic_witness, ProbabilitySet, Source};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{shot_model_name, Format, RunConfig};
use crate::error::CliError;
use crate::format::{csv_text, document, number, pretty, CalibrationDoc, ProbabilityDoc};

/// Uncertainty assumed for each probability of a bare probability set.
pub const DEFAULT_SIGMA: f64 = 0.03;

const HOM_STREAM: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub kind: &'static str,
    pub d: f64,
    #[serde(rename = "W_analytic")]
    pub w_analytic: f64,
}

pub fn curves(kinds: &[ChannelKind], grid: &[f64]) -> Result<Vec<CurveRow>, CliError> {
    let points: Vec<(ChannelKind, f64)> = kinds.iter().flat_map(|&k| grid.iter().map(move |&d| (k, d))).collect();
    points
        .par_iter()
        .map(|&(kind, d)| Ok(CurveRow { kind: kind.name(), d, w_analytic: analytic_witness(kind, d)? }))
        .collect()
}

pub fn render_curves(rows: &[CurveRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> =
                rows.iter().map(|r| vec![r.kind.to_string(), number(r.d), number(r.w_analytic)]).collect();
            csv_text(&["kind", "d", "W_analytic"], &rows)
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                command: &'static str,
                rows: &'a [CurveRow],
            }
            pretty(&document(&Doc { command: "curves", rows }))
        }
    }
}

pub struct Simulation {
    pub config: RunConfig,
    pub experiment: Experiment,
    pub calibration: HomCalibration,
    pub estimate: Estimate,
    pub exact: RateTable,
    pub observed: ObservedRates,
    pub channel_success: f64,
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation, CliError> {
    cfg.validate()?;
    let channel = cfg.channel()?;
    let bsm = cfg.bsm()?;
    let experiment = simulate_counts(&channel, &bsm, &cfg.sampler)?;
    let calibration = hom_calibrate(cfg.visibility, cfg.hom_shots, sub_seed(cfg.sampler.seed, HOM_STREAM))?;
    let estimate = estimate_witness(&experiment, &calibration, cfg.normalization, &cfg.bootstrap())?;
    let evolved = evolve_pairs(&channel, &channel)?;
    let channel_success = evolved.weight();
    let exact = RateTable::exact(&evolved.with_weight(1.0), &bsm)?;
    let observed = ObservedRates::from_experiment(&experiment)?;
    Ok(Simulation { config: cfg.clone(), experiment, calibration, estimate, exact, observed, channel_success })
}

#[derive(Serialize)]
struct ConfigDoc {
    channel: &'static str,
    strength: f64,
    visibility: f64,
    shots: u64,
    sequences: usize,
    singles_shots: u64,
    seed: u64,
    shot_model: &'static str,
    normalization: &'static str,
    resamples: usize,
    hom_shots: u64,
}

#[derive(Serialize)]
struct WitnessDoc {
    value: f64,
    uncertainty: f64,
    clamped: bool,
    certifies_entanglement: bool,
    /// Closed-form value for the channel with an ideal BSM.
    analytic: f64,
}

#[derive(Serialize)]
struct RatesDoc {
    coincidence_exact: Vec<f64>,
    coincidence_observed: Vec<f64>,
    singles_exact: [[f64; 4]; 2],
    singles_observed: [[f64; 4]; 2],
    singles_photons: [u8; 2],
    channel_success: f64,
}

#[derive(Serialize)]
struct SummaryDoc {
    command: &'static str,
    config: ConfigDoc,
    calibration: CalibrationDoc,
    probabilities: ProbabilityDoc,
    probability_sigma: ProbabilityDoc,
    witness: WitnessDoc,
    rates: RatesDoc,
    over_subtracted: bool,
    failed_resamples: usize,
}

pub fn summary(sim: &Simulation) -> Result<Value, CliError> {
    let c = &sim.config;
    let w = &sim.estimate.witness;
    let doc = SummaryDoc {
        command: "simulate",
        config: ConfigDoc {
            channel: c.channel.name(),
            strength: c.strength,
            visibility: c.visibility,
            shots: c.sampler.shots,
            sequences: c.sampler.sequences,
            singles_shots: c.sampler.singles_shots,
            seed: c.sampler.seed,
            shot_model: shot_model_name(c.sampler.shot_model),
            normalization: c.normalization.name(),
            resamples: c.resamples,
            hom_shots: c.hom_shots,
        },
        calibration: CalibrationDoc::from_calibration(&sim.calibration),
        probabilities: ProbabilityDoc::from_set(&w.inputs),
        probability_sigma: ProbabilityDoc::from_array(sim.estimate.probability_sigma),
        witness: WitnessDoc {
            value: w.value,
            uncertainty: w.uncertainty,
            clamped: w.clamped,
            certifies_entanglement: w.certifies_entanglement(),
            analytic: analytic_witness(c.channel, c.strength)?,
        },
        rates: RatesDoc {
            coincidence_exact: sim.exact.coincidences.to_vec(),
            coincidence_observed: sim.observed.rates.coincidences.to_vec(),
            singles_exact: sim.exact.singles,
            singles_observed: sim.observed.rates.singles,
            singles_photons: LOCAL_PHOTONS,
            channel_success: sim.channel_success,
        },
        over_subtracted: sim.estimate.over_subtracted,
        failed_resamples: sim.estimate.failed_resamples,
    };
    Ok(document(&doc))
}

pub fn summary_csv(sim: &Simulation) -> String {
    let c = &sim.config;
    let w = &sim.estimate.witness;
    let p = w.inputs.as_array();
    let s = sim.estimate.probability_sigma;
    let mut row = vec![c.channel.name().to_string(), number(c.strength), number(c.visibility), c.sampler.seed.to_string()];
    row.extend(p.iter().map(|&x| number(x)));
    row.extend(s.iter().map(|&x| number(x)));
    row.push(number(w.value));
    row.push(number(w.uncertainty));
    csv_text(
        &[
            "channel", "d", "visibility", "seed", "p_hh", "p_hv", "p_vv", "p_pp", "p_h", "sigma_hh", "sigma_hv",
            "sigma_vv", "sigma_pp", "sigma_h", "W", "W_sigma",
        ],
        &[row],
    )
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SigmaSpec {
    Scalar(f64),
    Vector([f64; 5]),
}

#[derive(Deserialize)]
struct BareInput {
    #[serde(flatten)]
    probabilities: ProbabilityDoc,
    #[serde(default)]
    sigma: Option<SigmaSpec>,
}

#[derive(Deserialize)]
struct SummaryInput {
    probabilities: ProbabilityDoc,
    #[serde(default)]
    probability_sigma: Option<ProbabilityDoc>,
}

/// What `diagnose` read: probabilities with optional uncertainties, or
/// raw records to be estimated first.
pub enum DiagnoseInput {
    Probabilities { set: ProbabilitySet, sigma: Option<[f64; 5]> },
    Records(crate::format::LoadedRecords),
}

/// Accepts a simulate summary, a bare probability object
/// `{p_hh, p_hv, p_vv, p_pp, p_h[, normalization][, sigma]}`, or a
/// JSON-lines records file.
pub fn load_diagnose_input(path: &Path) -> Result<DiagnoseInput, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let source = Source::Sampled;
    match serde_json::from_str::<Value>(&text) {
        Ok(value @ Value::Object(_)) => {
            if value.get("probabilities").is_some() {
                let s: SummaryInput = serde_json::from_value(value).map_err(|e| CliError::malformed(path, e))?;
                let set = s.probabilities.to_set(source).map_err(|e| CliError::malformed(path, e))?;
                Ok(DiagnoseInput::Probabilities { set, sigma: s.probability_sigma.map(|p| p.as_array()) })
            } else if value.get("record").is_some() {
                Ok(DiagnoseInput::Records(crate::format::parse_records(&text, path)?))
            } else {
                let b: BareInput = serde_json::from_value(value).map_err(|e| CliError::malformed(path, e))?;
                let set = b.probabilities.to_set(Source::Analytic).map_err(|e| CliError::malformed(path, e))?;
                let sigma = b.sigma.map(|s| match s {
                    SigmaSpec::Scalar(x) => [x; 5],
                    SigmaSpec::Vector(v) => v,
                });
                Ok(DiagnoseInput::Probabilities { set, sigma })
            }
        }
        Ok(_) => Err(CliError::malformed(path, "expected a JSON object or JSON-lines records")),
        Err(_) => Ok(DiagnoseInput::Records(crate::format::parse_records(&text, path)?)),
    }
}

pub struct Diagnosis {
    pub diagnosis: ChannelDiagnosis,
    pub input: ProbabilitySet,
    pub sigma: [f64; 5],
}

pub fn diagnose(input: DiagnoseInput, sigma: Option<f64>, boot: &BootstrapConfig) -> Result<Diagnosis, CliError> {
    if let Some(s) = sigma {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(CliError::Config(format!("sigma {s} must be a non-negative number")));
        }
    }
    let (set, file_sigma) = match input {
        DiagnoseInput::Probabilities { set, sigma } => (set, sigma.unwrap_or([DEFAULT_SIGMA; 5])),
        DiagnoseInput::Records(r) => {
            let est = estimate_witness(&r.experiment, &r.calibration, r.normalization, boot)?;
            (est.witness.inputs, est.probability_sigma)
        }
    };
    let sigma = sigma.map(|s| [s; 5]).unwrap_or(file_sigma);
    Ok(Diagnosis { diagnosis: classify(&set, &sigma), input: set, sigma })
}

#[derive(Serialize)]
pub struct CalibrateDoc {
    pub command: &'static str,
    pub overlap: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub calibration: CalibrationDoc,
}

pub fn calibrate(overlap: f64, shots: u64, seed: u64) -> Result<CalibrateDoc, CliError> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(CliError::Config(format!("overlap {overlap} must lie in [0, 1]")));
    }
    if shots == 0 {
        return Err(CliError::Config("calibration shots must be positive".into()));
    }
    let cal = hom_calibrate(overlap, shots, seed)?;
    Ok(CalibrateDoc { command: "calibrate", overlap, seed, calibration: CalibrationDoc::from_calibration(&cal) })
}

pub fn render_calibration(doc: &CalibrateDoc, format: Format) -> String {
    match format {
        Format::Json => pretty(&document(doc)),
        Format::Csv => {
            let c = &doc.calibration;
            csv_text(
                &["overlap", "shots", "seed", "visibility", "dip_counts", "reference_counts"],
                &[vec![
                    number(doc.overlap),
                    c.shots.to_string(),
                    doc.seed.to_string(),
                    number(c.visibility),
                    c.dip_counts.to_string(),
                    c.reference_counts.to_string(),
                ]],
            )
        }
    }
}
