//! Which error source produced a probability set.
//!
//! Each hypothesis is a one-parameter family of probability sets (the
//! perfect protocol has none). A set is fitted to every family by weighted
//! least squares and the best fit wins, unless even the best is too far off.

use crate::channels::ChannelKind;
use crate::error::{Error, Result};
use crate::witness::{analytic_probabilities, ProbabilitySet};

/// Smallest per-probability uncertainty used in residuals.
pub const SIGMA_FLOOR: f64 = 0.005;

/// Best-fit chi-square above which no hypothesis is accepted.
pub const REJECTION_THRESHOLD: f64 = 25.0;

/// Chi-square gap within which two fits count as tied.
pub const TIE_TOLERANCE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagnosisKind {
    Perfect,
    Depolarizing,
    PhaseDamping,
    AmplitudeDamping,
    ImperfectBsm,
    Unmodeled,
}

impl DiagnosisKind {
    /// Fitted hypotheses, fewest free parameters first.
    pub const HYPOTHESES: [DiagnosisKind; 5] = [
        DiagnosisKind::Perfect,
        DiagnosisKind::Depolarizing,
        DiagnosisKind::PhaseDamping,
        DiagnosisKind::AmplitudeDamping,
        DiagnosisKind::ImperfectBsm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiagnosisKind::Perfect => "perfect",
            DiagnosisKind::Depolarizing => "depolarizing",
            DiagnosisKind::PhaseDamping => "phase_damping",
            DiagnosisKind::AmplitudeDamping => "amplitude_damping",
            DiagnosisKind::ImperfectBsm => "imperfect_bsm",
            DiagnosisKind::Unmodeled => "unmodeled",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "perfect" | "identity" => Some(DiagnosisKind::Perfect),
            "unmodeled" => Some(DiagnosisKind::Unmodeled),
            "imperfect_bsm" | "bsm" => Some(DiagnosisKind::ImperfectBsm),
            other => ChannelKind::from_name(other).and_then(Self::from_channel),
        }
    }

    pub fn from_channel(kind: ChannelKind) -> Option<Self> {
        match kind {
            ChannelKind::Identity => Some(DiagnosisKind::Perfect),
            ChannelKind::Depolarizing => Some(DiagnosisKind::Depolarizing),
            ChannelKind::PhaseDamping => Some(DiagnosisKind::PhaseDamping),
            ChannelKind::AmplitudeDamping => Some(DiagnosisKind::AmplitudeDamping),
        }
    }

    /// Reported parameter range. Depolarizing probabilities depend on `d`
    /// only through `(1 − 4d/3)²`, so `d` and `3/2 − d` cannot be told apart
    /// and the lower branch is reported.
    pub fn parameter_range(self) -> (f64, f64) {
        match self {
            DiagnosisKind::Depolarizing => (0.0, 0.75),
            DiagnosisKind::Perfect | DiagnosisKind::Unmodeled => (0.0, 0.0),
            _ => (0.0, 1.0),
        }
    }

    pub fn free_parameters(self) -> usize {
        match self {
            DiagnosisKind::Perfect | DiagnosisKind::Unmodeled => 0,
            _ => 1,
        }
    }

    /// Predicted `p_HH, p_HV, p_VV, p_++, p_H` at `strength` (the channel
    /// strength `d`, or the visibility `v` for the BSM).
    pub fn signature(self, strength: f64) -> Result<[f64; 5]> {
        let channel = match self {
            DiagnosisKind::Perfect => ChannelKind::Identity,
            DiagnosisKind::Depolarizing => ChannelKind::Depolarizing,
            DiagnosisKind::PhaseDamping => ChannelKind::PhaseDamping,
            DiagnosisKind::AmplitudeDamping => ChannelKind::AmplitudeDamping,
            DiagnosisKind::ImperfectBsm => {
                let v = crate::error::check_unit("visibility", strength)?;
                let e = (1.0 - v) / 2.0;
                return Ok([e, 0.5, e, e, 0.5]);
            }
            DiagnosisKind::Unmodeled => return Err(Error::InvalidSampler("unmodeled has no signature")),
        };
        Ok(analytic_probabilities(channel, strength)?.as_array())
    }
}

/// Outcome of [`classify`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelDiagnosis {
    pub kind: DiagnosisKind,
    /// Fitted `d`, or `v` for the BSM; `None` when unmodeled.
    pub strength: Option<f64>,
    /// `1 − exp(−Δχ²/2)` with `Δχ²` the gap to the runner-up; 0 when
    /// unmodeled.
    pub confidence: f64,
    /// Best-fit chi-square of each hypothesis, in [`DiagnosisKind::HYPOTHESES`] order.
    pub residuals: [Fit; 5],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub kind: DiagnosisKind,
    pub strength: f64,
    pub chi_square: f64,
}

fn chi_square(p: &[f64; 5], model: &[f64; 5], sigma: &[f64; 5]) -> f64 {
    p.iter()
        .zip(model)
        .zip(sigma)
        .map(|((x, m), s)| {
            let r = (x - m) / s.max(SIGMA_FLOOR);
            r * r
        })
        .sum()
}

/// Closed-form inverse of a hypothesis signature from one probability.
pub fn estimate_parameter(kind: DiagnosisKind, p: &ProbabilitySet) -> Result<f64> {
    // round-off allowance at the edges of the invertible ranges
    const EDGE: f64 = 1e-12;
    let within = |family: &'static str, value: f64, lo: f64, hi: f64| -> Result<f64> {
        if value < lo - EDGE || value > hi + EDGE || value.is_nan() {
            Err(Error::NotInvertible { family, value })
        } else {
            Ok(value.clamp(lo, hi))
        }
    };
    match kind {
        DiagnosisKind::Perfect => Ok(0.0),
        DiagnosisKind::Depolarizing => {
            // smaller root of 2d/3 − 4d²/9 = p_HH
            let x = within("depolarizing", p.hh, 0.0, 0.25)?;
            Ok(0.75 * (1.0 - libm::sqrt(1.0 - 4.0 * x)))
        }
        DiagnosisKind::PhaseDamping => {
            let x = within("phase damping", p.pp, 0.0, 0.25)?;
            Ok(1.0 - libm::sqrt(1.0 - 4.0 * x))
        }
        DiagnosisKind::AmplitudeDamping => {
            let x = within("amplitude damping", p.h, 0.5, 1.0)?;
            Ok(2.0 - 1.0 / x)
        }
        DiagnosisKind::ImperfectBsm => {
            let x = within("imperfect BSM", p.hh, 0.0, 0.5)?;
            Ok(1.0 - 2.0 * x)
        }
        DiagnosisKind::Unmodeled => Err(Error::InvalidSampler("unmodeled has no parameter")),
    }
}

/// Least-squares fit of one hypothesis over its parameter range.
pub fn fit(kind: DiagnosisKind, p: &ProbabilitySet, sigma: &[f64; 5]) -> Fit {
    let x = p.as_array();
    let cost = |s: f64| chi_square(&x, &kind.signature(s).expect("strength in [0, 1]"), sigma);
    if kind.free_parameters() == 0 {
        return Fit { kind, strength: 0.0, chi_square: cost(0.0) };
    }

    const GRID: usize = 400;
    let (start, end) = kind.parameter_range();
    let at = |i: usize| start + (end - start) * i as f64 / GRID as f64;
    let (mut best_s, mut best_c) = (0.0, f64::INFINITY);
    let mut best_i = 0;
    for i in 0..=GRID {
        let s = at(i);
        let c = cost(s);
        if c < best_c {
            (best_s, best_c, best_i) = (s, c, i);
        }
    }
    let lo = at(best_i.saturating_sub(1));
    let hi = at((best_i + 1).min(GRID));
    let (s, c) = golden_section(&cost, lo, hi);
    if c < best_c {
        (best_s, best_c) = (s, c);
    }
    if let Ok(s) = estimate_parameter(kind, p) {
        let c = cost(s);
        if c < best_c {
            (best_s, best_c) = (s, c);
        }
    }
    Fit { kind, strength: best_s, chi_square: best_c }
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 {
        if fc < fd {
            (b, d, fd) = (d, c, fc);
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            (a, c, fc) = (c, d, fd);
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Classify `p` given per-probability uncertainties (floored at
/// [`SIGMA_FLOOR`]).
pub fn classify(p: &ProbabilitySet, sigma: &[f64; 5]) -> ChannelDiagnosis {
    let residuals = DiagnosisKind::HYPOTHESES.map(|k| fit(k, p, sigma));

    let mut order: [usize; 5] = [0, 1, 2, 3, 4];
    order.sort_by(|&a, &b| residuals[a].chi_square.total_cmp(&residuals[b].chi_square));
    let mut winner = residuals[order[0]];
    // near-ties go to the hypothesis with fewer parameters
    for f in &residuals {
        if f.kind.free_parameters() < winner.kind.free_parameters()
            && f.chi_square - winner.chi_square <= TIE_TOLERANCE
        {
            winner = *f;
        }
    }

    if !(winner.chi_square <= REJECTION_THRESHOLD) {
        return ChannelDiagnosis { kind: DiagnosisKind::Unmodeled, strength: None, confidence: 0.0, residuals };
    }
    let runner_up = order
        .iter()
        .map(|&i| residuals[i])
        .find(|f| f.kind != winner.kind)
        .map(|f| f.chi_square)
        .unwrap_or(f64::INFINITY);
    let gap = (runner_up - winner.chi_square).max(0.0);
    ChannelDiagnosis {
        kind: winner.kind,
        strength: Some(winner.strength),
        confidence: 1.0 - libm::exp(-gap / 2.0),
        residuals,
    }
}
