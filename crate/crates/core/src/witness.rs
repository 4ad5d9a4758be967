//! Collectibility from the four local projections and the unconditioned
//! `p_H`.

use alloc::vec::Vec;

use crate::channels::ChannelKind;
use crate::error::{check_unit, Error, Result};
use crate::qmat::polarization::Setting;
use crate::swapnet::{is_degenerate, SwapOutcome, LOCAL_PHOTONS};

/// How the four conditioned probabilities were normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// True conditional probabilities given a BSM coincidence.
    Conditioned,
    /// Four-fold rates divided by the ideal-BSM singlet rate, the way
    /// uncompensated data behaves: with non-interfering photons every
    /// probability approaches 1/2.
    GenuineRateCalibrated,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::Conditioned => "conditioned",
            Normalization::GenuineRateCalibrated => "genuine_rate_calibrated",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "conditioned" => Some(Normalization::Conditioned),
            "genuine_rate_calibrated" | "calibrated" => Some(Normalization::GenuineRateCalibrated),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Analytic,
    Sampled,
}

/// `p_HH, p_HV, p_VV, p_++` (conditioned on the BSM) and the unconditioned `p_H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbabilitySet {
    pub hh: f64,
    pub hv: f64,
    pub vv: f64,
    pub pp: f64,
    pub h: f64,
    pub normalization: Normalization,
    pub source: Source,
}

impl ProbabilitySet {
    pub fn new(values: [f64; 5], normalization: Normalization, source: Source) -> Result<Self> {
        let names = ["p_HH", "p_HV", "p_VV", "p_++", "p_H"];
        for (n, v) in names.iter().zip(values) {
            check_unit(n, v)?;
        }
        Ok(Self::from_array_unchecked(values, normalization, source))
    }

    pub(crate) fn from_array_unchecked(v: [f64; 5], normalization: Normalization, source: Source) -> Self {
        ProbabilitySet { hh: v[0], hv: v[1], vv: v[2], pp: v[3], h: v[4], normalization, source }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.hh, self.hv, self.vv, self.pp, self.h]
    }
}

/// Collectibility value with its inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessResult {
    pub value: f64,
    /// Zero for analytic inputs.
    pub uncertainty: f64,
    pub inputs: ProbabilitySet,
    /// `p_HH·p_VV` came out slightly negative and was clamped to zero.
    pub clamped: bool,
}

impl WitnessResult {
    /// Negative collectibility certifies entanglement of the heralded pair.
    pub fn certifies_entanglement(&self) -> bool {
        self.value < 0.0
    }
}

const HH: (Setting, Setting) = (Setting::H, Setting::H);
const HV: (Setting, Setting) = (Setting::H, Setting::V);
const VV: (Setting, Setting) = (Setting::V, Setting::V);
const PP: (Setting, Setting) = (Setting::D, Setting::D);

/// The five witness probabilities of a swap outcome.
pub fn probabilities(outcome: &SwapOutcome, mode: Normalization) -> Result<ProbabilitySet> {
    let scale = match mode {
        Normalization::Conditioned => 1.0,
        Normalization::GenuineRateCalibrated if outcome.limit => 1.0,
        Normalization::GenuineRateCalibrated => {
            if is_degenerate(outcome.ideal_rate) {
                return Err(Error::ZeroRate);
            }
            outcome.singlet_rate / outcome.ideal_rate
        }
    };
    let local = |(a, b): (Setting, Setting)| -> Result<f64> {
        let op = a.projector().kron(&b.projector());
        Ok(scale * outcome.conditional.expectation(&op, &LOCAL_PHOTONS)?)
    };
    let h = outcome.marginal(LOCAL_PHOTONS[0])?.expectation(&Setting::H.projector(), &[LOCAL_PHOTONS[0]])?;
    let values = [local(HH)?, local(HV)?, local(VV)?, local(PP)?, h];
    // round-off can leave values a hair outside [0, 1]
    Ok(ProbabilitySet::from_array_unchecked(values.map(|x| x.clamp(0.0, 1.0)), mode, Source::Analytic))
}

/// `W = ½[η + p_H²(1−2p_HH) + (1−p_H)²(1−2p_VV) + 2p_H(1−p_H)(1−2p_HV) − 1]`
/// with `η = 16 p_H(1−p_H)√(p_HH p_VV) + 4 p_++`.
pub fn collectibility(p: &ProbabilitySet) -> WitnessResult {
    let product = p.hh * p.vv;
    let clamped = product < 0.0;
    if clamped {
        log::warn!("p_HH·p_VV = {product:e} clamped to zero");
    }
    let h = p.h;
    let eta = 16.0 * h * (1.0 - h) * libm::sqrt(product.max(0.0)) + 4.0 * p.pp;
    let value = 0.5
        * (eta + h * h * (1.0 - 2.0 * p.hh) + (1.0 - h) * (1.0 - h) * (1.0 - 2.0 * p.vv)
            + 2.0 * h * (1.0 - h) * (1.0 - 2.0 * p.hv)
            - 1.0);
    WitnessResult { value, uncertainty: 0.0, inputs: *p, clamped }
}

/// Bell weights of the heralded pair under the depolarizing channel:
/// `(q_e, q_c)` for each non-singlet Bell state and for the singlet.
fn depolarizing_weights(d: f64) -> (f64, f64) {
    let q_e = 2.0 * d / 3.0 - 4.0 * d * d / 9.0;
    let q_c = 1.0 - 2.0 * d + 4.0 * d * d / 3.0;
    (q_e, q_c)
}

/// Closed-form witness probabilities for a channel applied to both pairs
/// with an ideal BSM.
pub fn analytic_probabilities(kind: ChannelKind, d: f64) -> Result<ProbabilitySet> {
    let d = check_unit("channel strength", d)?;
    let values = match kind {
        ChannelKind::Identity => [0.0, 0.5, 0.0, 0.0, 0.5],
        ChannelKind::Depolarizing => {
            let (q_e, q_c) = depolarizing_weights(d);
            [q_e, (q_c + q_e) / 2.0, q_e, q_e, 0.5]
        }
        ChannelKind::PhaseDamping => [0.0, 0.5, 0.0, (d - d * d / 2.0) / 2.0, 0.5],
        ChannelKind::AmplitudeDamping => [0.0, 0.5, 0.0, 0.0, 1.0 / (2.0 - d)],
    };
    Ok(ProbabilitySet::from_array_unchecked(values, Normalization::Conditioned, Source::Analytic))
}

/// Closed-form collectibility of the swapped pair.
pub fn analytic_witness(kind: ChannelKind, d: f64) -> Result<f64> {
    let d = check_unit("channel strength", d)?;
    Ok(match kind {
        ChannelKind::Identity => -0.25,
        ChannelKind::Depolarizing => {
            let (q_e, q_c) = depolarizing_weights(d);
            (13.0 * q_e - q_c) / 4.0
        }
        ChannelKind::PhaseDamping => d - d * d / 2.0 - 0.25,
        ChannelKind::AmplitudeDamping => -(1.0 - d) / ((2.0 - d) * (2.0 - d)),
    })
}

/// `(d, W)` pairs of the closed-form curve over `grid`.
pub fn analytic_curve(kind: ChannelKind, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    grid.iter().map(|&d| Ok((d, analytic_witness(kind, d)?))).collect()
}
