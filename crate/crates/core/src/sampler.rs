//! Finite-statistics emulation of the coincidence experiment.
//!
//! Photons 2 and 4 are analyzed in all sixteen combinations of the `H`, `V`,
//! `D`, `A` settings. Each configuration is recorded as a number of
//! sequences, each sequence a fixed number of trials with a binomial count of
//! four-fold coincidences. Single-photon counts for each analyzer setting are
//! recorded alongside; they fix `p_H` and the accidental background of
//! non-interfering photon pairs.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::channels::QubitChannel;
use crate::error::{check_unit, Error, Result};
use crate::qmat::polarization::Setting;
use crate::qmat::DensityState;
use crate::swapnet::{evolve_pairs, fourfold_rate, prepare_pairs, BsmModel, LOCAL_PHOTONS};
use crate::witness::{collectibility, Normalization, ProbabilitySet, Source, WitnessResult};

pub const CONFIGS: usize = 16;

/// Analyzer settings `(photon 2, photon 4)` of a configuration.
pub fn config_settings(config_id: u8) -> (Setting, Setting) {
    let id = config_id as usize % CONFIGS;
    (Setting::ALL[id / 4], Setting::ALL[id % 4])
}

pub fn config_id(photon2: Setting, photon4: Setting) -> u8 {
    (photon2.index() * 4 + photon4.index()) as u8
}

/// Four-fold coincidence counts of one analyzer configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoincidenceRecord {
    pub config_id: u8,
    pub sequence_counts: Vec<u64>,
    pub shots_per_sequence: u64,
    pub seed: u64,
}

/// Single-photon counts of photon 2 or 4 behind one analyzer setting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SinglesRecord {
    pub photon: u8,
    pub setting: Setting,
    pub sequence_counts: Vec<u64>,
    pub shots_per_sequence: u64,
    pub seed: u64,
}

/// All records of one simulated run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Experiment {
    pub coincidences: Vec<CoincidenceRecord>,
    pub singles: Vec<SinglesRecord>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShotModel {
    /// Binomial draw with the channel-averaged four-fold rate.
    Averaged,
    /// Each trial first draws the wave-plate setting of both channels from
    /// their unitary mixtures, then a Bernoulli outcome for that setting.
    MixtureResolved,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub shots: u64,
    pub sequences: usize,
    pub singles_shots: u64,
    pub seed: u64,
    pub shot_model: ShotModel,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { shots: 100, sequences: 60, singles_shots: 100_000, seed: 0, shot_model: ShotModel::Averaged }
    }
}

impl SamplerConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        SamplerConfig { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidSampler("shots per sequence must be at least 1"));
        }
        if self.sequences == 0 {
            return Err(Error::InvalidSampler("sequence count must be at least 1"));
        }
        if self.singles_shots == 0 {
            return Err(Error::InvalidSampler("singles shots must be at least 1"));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` derived from a master seed.
pub fn sub_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(1)))
}

const COINCIDENCE_STREAM: u64 = 0;
const SINGLES_STREAM: u64 = 16;
const BOOTSTRAP_STREAM: u64 = 1 << 32;

/// Exact per-trial probabilities behind the records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateTable {
    pub coincidences: [f64; CONFIGS],
    /// `[photon 2, photon 4]` × setting.
    pub singles: [[f64; 4]; 2],
}

impl RateTable {
    pub fn exact(source: &DensityState, bsm: &BsmModel) -> Result<Self> {
        let mut coincidences = [0.0; CONFIGS];
        for (id, rate) in coincidences.iter_mut().enumerate() {
            let (a, b) = config_settings(id as u8);
            *rate = fourfold_rate(source, bsm, &a.projector(), &b.projector()).clamp(0.0, 1.0);
        }
        let mut singles = [[0.0; 4]; 2];
        for (k, photon) in LOCAL_PHOTONS.iter().enumerate() {
            let m = source.partial_trace(&[*photon])?;
            for s in Setting::ALL {
                singles[k][s.index()] = m.expectation(&s.projector(), &[*photon])?.clamp(0.0, 1.0);
            }
        }
        Ok(RateTable { coincidences, singles })
    }
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0)).expect("p clamped to [0, 1]").sample(rng)
}

/// Draw records for `channel` on both pairs and the given BSM.
pub fn simulate_counts(channel: &QubitChannel, bsm: &BsmModel, cfg: &SamplerConfig) -> Result<Experiment> {
    cfg.validate()?;
    let source = evolve_pairs(channel, channel)?.with_weight(1.0);
    let rates = RateTable::exact(&source, bsm)?;

    let resolved = match cfg.shot_model {
        ShotModel::MixtureResolved if !channel.is_filter() => Some(MixtureRates::new(channel, bsm)?),
        _ => None,
    };

    let mut coincidences = Vec::with_capacity(CONFIGS);
    for id in 0..CONFIGS {
        let seed = sub_seed(cfg.seed, COINCIDENCE_STREAM + id as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sequence_counts = (0..cfg.sequences)
            .map(|_| match &resolved {
                Some(m) => m.draw(&mut rng, id, cfg.shots),
                None => binomial(&mut rng, cfg.shots, rates.coincidences[id]),
            })
            .collect();
        coincidences.push(CoincidenceRecord { config_id: id as u8, sequence_counts, shots_per_sequence: cfg.shots, seed });
    }

    let mut singles = Vec::with_capacity(8);
    for (k, photon) in LOCAL_PHOTONS.iter().enumerate() {
        for s in Setting::ALL {
            let seed = sub_seed(cfg.seed, SINGLES_STREAM + (4 * k + s.index()) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = rates.singles[k][s.index()];
            let sequence_counts = (0..cfg.sequences).map(|_| binomial(&mut rng, cfg.singles_shots, p)).collect();
            singles.push(SinglesRecord {
                photon: *photon,
                setting: s,
                sequence_counts,
                shots_per_sequence: cfg.singles_shots,
                seed,
            });
        }
    }
    Ok(Experiment { coincidences, singles, seed: cfg.seed })
}

/// Four-fold rates for every pair of wave-plate settings of the two channels.
struct MixtureRates {
    cumulative: Vec<f64>,
    rates: Vec<[f64; CONFIGS]>,
    terms: usize,
}

impl MixtureRates {
    fn new(channel: &QubitChannel, bsm: &BsmModel) -> Result<Self> {
        let mix = channel.unitary_mixture();
        let terms = mix.terms.len();
        let mut cumulative = Vec::with_capacity(terms);
        let mut acc = 0.0;
        for (p, _) in &mix.terms {
            acc += p;
            cumulative.push(acc);
        }
        let pairs = prepare_pairs();
        let mut rates = Vec::with_capacity(terms * terms);
        for (_, u2) in &mix.terms {
            let rho = pairs.conjugate(u2.matrix(), &[LOCAL_PHOTONS[0]])?;
            for (_, u4) in &mix.terms {
                let rho = rho.conjugate(u4.matrix(), &[LOCAL_PHOTONS[1]])?;
                rates.push(RateTable::exact(&rho, bsm)?.coincidences);
            }
        }
        Ok(MixtureRates { cumulative, rates, terms })
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = rng.random::<f64>() * self.cumulative[self.terms - 1];
        self.cumulative.iter().position(|&c| u < c).unwrap_or(self.terms - 1)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, config: usize, shots: u64) -> u64 {
        let mut hits = 0;
        for _ in 0..shots {
            let i = self.pick(rng);
            let j = self.pick(rng);
            if rng.random::<f64>() < self.rates[i * self.terms + j][config] {
                hits += 1;
            }
        }
        hits
    }
}

/// Hong–Ou–Mandel calibration of the BSM visibility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomCalibration {
    pub visibility: f64,
    /// Coincidences `(at the dip, far from the dip)` out of `shots` each.
    pub raw_dip_counts: (u64, u64),
    pub shots: u64,
}

impl HomCalibration {
    /// A calibration taken as known, without counting statistics.
    pub fn assumed(visibility: f64) -> Result<Self> {
        Ok(HomCalibration { visibility: check_unit("visibility", visibility)?, raw_dip_counts: (0, 0), shots: 0 })
    }
}

/// Simulate the HOM dip for two `H` photons with interfering fraction
/// `overlap`: the coincidence probability is `(1−overlap)/2` at the dip and
/// `1/2` outside it.
pub fn hom_calibrate(overlap: f64, shots: u64, seed: u64) -> Result<HomCalibration> {
    let overlap = check_unit("overlap", overlap)?;
    if shots == 0 {
        return Err(Error::InvalidSampler("calibration shots must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dip = binomial(&mut rng, shots, (1.0 - overlap) / 2.0);
    let reference = binomial(&mut rng, shots, 0.5);
    let visibility = if reference == 0 { 0.0 } else { (1.0 - dip as f64 / reference as f64).clamp(0.0, 1.0) };
    Ok(HomCalibration { visibility, raw_dip_counts: (dip, reference), shots })
}

/// Per-trial rates estimated from records, optionally restricted to a
/// resampled list of sequence indices.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedRates {
    pub rates: RateTable,
    /// Trials behind each coincidence rate (infinite for exact tables).
    pub trials: [f64; CONFIGS],
}

impl ObservedRates {
    pub fn exact(rates: RateTable) -> Self {
        ObservedRates { rates, trials: [f64::INFINITY; CONFIGS] }
    }

    pub fn from_experiment(exp: &Experiment) -> Result<Self> {
        let n = check_shape(exp)?;
        let all: Vec<usize> = (0..n).collect();
        Ok(Self::from_sequences(exp, &all))
    }

    fn from_sequences(exp: &Experiment, picks: &[usize]) -> Self {
        let mut coincidences = [0.0; CONFIGS];
        let mut trials = [0.0; CONFIGS];
        for rec in &exp.coincidences {
            let id = rec.config_id as usize;
            let hits: u64 = picks.iter().map(|&i| rec.sequence_counts[i]).sum();
            let n = (rec.shots_per_sequence * picks.len() as u64) as f64;
            coincidences[id] = hits as f64 / n;
            trials[id] = n;
        }
        let mut singles = [[0.0; 4]; 2];
        for rec in &exp.singles {
            let k = if rec.photon == LOCAL_PHOTONS[0] { 0 } else { 1 };
            let hits: u64 = picks.iter().map(|&i| rec.sequence_counts[i]).sum();
            singles[k][rec.setting.index()] = hits as f64 / (rec.shots_per_sequence * picks.len() as u64) as f64;
        }
        ObservedRates { rates: RateTable { coincidences, singles }, trials }
    }
}

/// Checks that every configuration and single is present with a common
/// sequence count, which is returned.
fn check_shape(exp: &Experiment) -> Result<usize> {
    let n = exp.coincidences.first().map(|r| r.sequence_counts.len()).unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidSampler("experiment has no sequences"));
    }
    let mut seen = [false; CONFIGS];
    for rec in &exp.coincidences {
        let id = rec.config_id as usize;
        if id >= CONFIGS || seen[id] {
            return Err(Error::InvalidSampler("coincidence configurations must be 0..15, each once"));
        }
        seen[id] = true;
        if rec.sequence_counts.len() != n || rec.shots_per_sequence == 0 {
            return Err(Error::InvalidSampler("coincidence records disagree on sequence count"));
        }
        if rec.sequence_counts.iter().any(|&c| c > rec.shots_per_sequence) {
            return Err(Error::InvalidSampler("count exceeds shots per sequence"));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidSampler("missing coincidence configuration"));
    }
    let mut singles_seen = [[false; 4]; 2];
    for rec in &exp.singles {
        let k = LOCAL_PHOTONS
            .iter()
            .position(|&p| p == rec.photon)
            .ok_or(Error::InvalidSampler("singles must be recorded on photon 2 or 4"))?;
        singles_seen[k][rec.setting.index()] = true;
        if rec.sequence_counts.len() != n || rec.shots_per_sequence == 0 {
            return Err(Error::InvalidSampler("singles records disagree on sequence count"));
        }
    }
    if singles_seen.iter().flatten().any(|s| !s) {
        return Err(Error::InvalidSampler("missing singles record"));
    }
    Ok(n)
}

/// Probabilities recovered from observed rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Corrected {
    pub probabilities: ProbabilitySet,
    /// Some configuration lost more counts to background subtraction than
    /// counting statistics allow.
    pub over_subtracted: bool,
}

const RECTILINEAR: [Setting; 2] = [Setting::H, Setting::V];
const DIAGONAL: [Setting; 2] = [Setting::D, Setting::A];

/// Turn observed rates into witness probabilities.
///
/// Background for configuration `(a, b)` is `(1−v̂)/2 · P₂(a) · P₄(b)` from the
/// singles. In `Conditioned` mode the subtracted rates are normalized within
/// each analyzer basis. In `GenuineRateCalibrated` mode the raw rates are
/// divided by the ideal singlet rate `Σ_basis(raw − background)/v̂`.
pub fn correct(observed: &ObservedRates, cal: &HomCalibration, mode: Normalization) -> Result<Corrected> {
    let v = cal.visibility;
    if !(v > 0.0) {
        return Err(Error::InvalidSampler("calibration visibility must be positive"));
    }
    let r = &observed.rates;
    let background = |a: Setting, b: Setting| (1.0 - v) / 2.0 * r.singles[0][a.index()] * r.singles[1][b.index()];
    let raw = |a: Setting, b: Setting| r.coincidences[config_id(a, b) as usize];

    let mut over_subtracted = false;
    let mut corrected = [0.0; CONFIGS];
    for id in 0..CONFIGS {
        let (a, b) = config_settings(id as u8);
        let bg = background(a, b);
        let c = raw(a, b) - bg;
        let n = observed.trials[id];
        let tolerance = if n.is_finite() { (3.0 * libm::sqrt(bg * n) + 1.0) / n } else { 1e-12 };
        if c < -tolerance {
            over_subtracted = true;
        }
        corrected[id] = c;
    }
    let genuine = |basis: [Setting; 2]| -> f64 {
        basis.iter().flat_map(|&a| basis.iter().map(move |&b| (a, b))).map(|(a, b)| corrected[config_id(a, b) as usize]).sum()
    };
    let g_rect = genuine(RECTILINEAR);
    let g_diag = genuine(DIAGONAL);
    if !(g_rect > 0.0) || !(g_diag > 0.0) {
        return Err(Error::ZeroRate);
    }

    let value = |a: Setting, b: Setting, g: f64| -> f64 {
        match mode {
            Normalization::Conditioned => corrected[config_id(a, b) as usize] / g,
            Normalization::GenuineRateCalibrated => raw(a, b) / (g / v),
        }
    };
    let values = [
        value(Setting::H, Setting::H, g_rect),
        value(Setting::H, Setting::V, g_rect),
        value(Setting::V, Setting::V, g_rect),
        value(Setting::D, Setting::D, g_diag),
        r.singles[0][Setting::H.index()],
    ];
    let probabilities = ProbabilitySet::from_array_unchecked(values.map(|x| x.clamp(0.0, 1.0)), mode, Source::Sampled);
    Ok(Corrected { probabilities, over_subtracted })
}

/// Background-subtracted, conditioned probabilities from recorded counts.
pub fn subtract_noise(exp: &Experiment, cal: &HomCalibration) -> Result<Corrected> {
    correct(&ObservedRates::from_experiment(exp)?, cal, Normalization::Conditioned)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { resamples: 1000, seed: 0 }
    }
}

/// Point estimate with bootstrap spread.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    /// `uncertainty` is the bootstrap standard deviation of `W`.
    pub witness: WitnessResult,
    /// Bootstrap standard deviations of `p_HH, p_HV, p_VV, p_++, p_H`.
    pub probability_sigma: [f64; 5],
    pub over_subtracted: bool,
    /// Resamples whose genuine rate vanished and were skipped.
    pub failed_resamples: usize,
}

/// Witness estimate from records, with a nonparametric bootstrap over
/// sequences (the same resampled indices for every record).
pub fn estimate_witness(
    exp: &Experiment,
    cal: &HomCalibration,
    mode: Normalization,
    boot: &BootstrapConfig,
) -> Result<Estimate> {
    let n = check_shape(exp)?;
    let all: Vec<usize> = (0..n).collect();
    let point = correct(&ObservedRates::from_sequences(exp, &all), cal, mode)?;
    let mut witness = collectibility(&point.probabilities);

    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(boot.seed ^ exp.seed, BOOTSTRAP_STREAM));
    let mut stats = Moments::default();
    let mut prob_stats = [Moments::default(); 5];
    let mut failed = 0;
    let mut picks = vec![0usize; n];
    for _ in 0..boot.resamples {
        for p in picks.iter_mut() {
            *p = rng.random_range(0..n);
        }
        match correct(&ObservedRates::from_sequences(exp, &picks), cal, mode) {
            Ok(c) => {
                stats.push(collectibility(&c.probabilities).value);
                for (m, x) in prob_stats.iter_mut().zip(c.probabilities.as_array()) {
                    m.push(x);
                }
            }
            Err(Error::ZeroRate) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if boot.resamples > 0 && failed * 2 > boot.resamples {
        return Err(Error::ZeroRate);
    }
    witness.uncertainty = stats.std_dev();
    Ok(Estimate {
        witness,
        probability_sigma: prob_stats.map(|m| m.std_dev()),
        over_subtracted: point.over_subtracted,
        failed_resamples: failed,
    })
}

/// Infinite-statistics passthrough: the estimator applied to exact rates.
pub fn exact_estimate(channel: &QubitChannel, bsm: &BsmModel, mode: Normalization) -> Result<Estimate> {
    let source = evolve_pairs(channel, channel)?.with_weight(1.0);
    let observed = ObservedRates::exact(RateTable::exact(&source, bsm)?);
    let cal = HomCalibration::assumed(bsm.visibility())?;
    let point = correct(&observed, &cal, mode)?;
    let mut witness = collectibility(&point.probabilities);
    witness.inputs.source = Source::Analytic;
    Ok(Estimate { witness, probability_sigma: [0.0; 5], over_subtracted: point.over_subtracted, failed_resamples: 0 })
}

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std_dev(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            libm::sqrt(self.m2 / (self.n - 1) as f64)
        }
    }
}
