//! Single-qubit noise channels acting on one photon of an EPR pair.
//!
//! Depolarizing and phase-damping channels are trace preserving Pauli
//! channels. Amplitude damping is the polarization-dependent filter
//! `diag(1, √(1−d))`, which keeps pure states pure and reports the surviving
//! weight instead of being completed to a CPTP map.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_unit, Result};
use crate::qmat::{CMatrix, DensityState, LinearOp, OpKind, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Identity,
    Depolarizing,
    PhaseDamping,
    AmplitudeDamping,
}

impl ChannelKind {
    pub const NOISY: [ChannelKind; 3] =
        [ChannelKind::Depolarizing, ChannelKind::PhaseDamping, ChannelKind::AmplitudeDamping];

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Identity => "identity",
            ChannelKind::Depolarizing => "depolarizing",
            ChannelKind::PhaseDamping => "phase_damping",
            ChannelKind::AmplitudeDamping => "amplitude_damping",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "identity" | "perfect" => ChannelKind::Identity,
            "depolarizing" => ChannelKind::Depolarizing,
            "phase_damping" | "phase" => ChannelKind::PhaseDamping,
            "amplitude_damping" | "amplitude" => ChannelKind::AmplitudeDamping,
            _ => return None,
        })
    }
}

pub mod pauli {
    use super::*;

    pub fn x() -> CMatrix {
        CMatrix::from_real(&[0.0, 1.0, 1.0, 0.0])
    }

    /// `σ_y = i·((0, −1), (1, 0))`.
    pub fn y() -> CMatrix {
        CMatrix::from_real(&[0.0, -1.0, 1.0, 0.0]).scale(C64::new(0.0, 1.0))
    }

    pub fn z() -> CMatrix {
        CMatrix::from_real(&[1.0, 0.0, 0.0, -1.0])
    }
}

/// A single-qubit channel in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitChannel {
    kind: ChannelKind,
    strength: f64,
    kraus: Vec<LinearOp>,
    trace_preserving: bool,
}

/// Random-unitary (or filter) realization of a channel, as implemented by
/// randomly switching wave plates.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMixture {
    pub terms: Vec<(f64, LinearOp)>,
}

fn unitary(m: CMatrix) -> LinearOp {
    LinearOp::new(m, OpKind::Unitary).expect("Pauli matrices are unitary")
}

fn kraus(weight: f64, m: CMatrix) -> LinearOp {
    LinearOp::new(m.scale_real(libm::sqrt(weight)), OpKind::Kraus).expect("2x2 Kraus operator")
}

impl QubitChannel {
    pub fn identity() -> Self {
        QubitChannel {
            kind: ChannelKind::Identity,
            strength: 0.0,
            kraus: vec![kraus(1.0, CMatrix::identity(2))],
            trace_preserving: true,
        }
    }

    pub fn new(kind: ChannelKind, strength: f64) -> Result<Self> {
        match kind {
            ChannelKind::Identity => Ok(Self::identity()),
            ChannelKind::Depolarizing => Self::depolarizing(strength),
            ChannelKind::PhaseDamping => Self::phase_damping(strength),
            ChannelKind::AmplitudeDamping => Self::amplitude_damping(strength),
        }
    }

    /// `E₀ = √(1−d)·𝟙`, `E_i = √(d/3)·σ_i`.
    pub fn depolarizing(d: f64) -> Result<Self> {
        let d = check_unit("depolarization probability", d)?;
        Ok(Self::pauli_channel(ChannelKind::Depolarizing, d, &[
            (1.0 - d, CMatrix::identity(2)),
            (d / 3.0, pauli::x()),
            (d / 3.0, pauli::y()),
            (d / 3.0, pauli::z()),
        ]))
    }

    /// `E₀ = √(1−d/2)·𝟙`, `E₁ = √(d/2)·σ_z`.
    pub fn phase_damping(d: f64) -> Result<Self> {
        let d = check_unit("dephasing probability", d)?;
        Ok(Self::pauli_channel(ChannelKind::PhaseDamping, d, &[
            (1.0 - d / 2.0, CMatrix::identity(2)),
            (d / 2.0, pauli::z()),
        ]))
    }

    /// Single filter `diag(1, √(1−d))`; not trace preserving.
    pub fn amplitude_damping(d: f64) -> Result<Self> {
        let d = check_unit("amplitude damping", d)?;
        let filter = CMatrix::diagonal(&[1.0, libm::sqrt(1.0 - d)]);
        Ok(QubitChannel {
            kind: ChannelKind::AmplitudeDamping,
            strength: d,
            kraus: vec![LinearOp::new(filter, OpKind::Kraus)?],
            trace_preserving: d == 0.0,
        })
    }

    fn pauli_channel(kind: ChannelKind, d: f64, terms: &[(f64, CMatrix)]) -> Self {
        // zero-weight terms are dropped so that d = 0 is literally the identity
        let kraus = terms.iter().filter(|(w, _)| *w > 0.0).map(|(w, m)| kraus(*w, m.clone())).collect();
        QubitChannel { kind, strength: d, kraus, trace_preserving: true }
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn kraus(&self) -> &[LinearOp] {
        &self.kraus
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    pub fn is_filter(&self) -> bool {
        self.kind == ChannelKind::AmplitudeDamping
    }

    /// `Σ E_k† E_k`.
    pub fn completeness(&self) -> CMatrix {
        self.kraus.iter().fold(CMatrix::zeros(2), |acc, k| &acc + &(&k.matrix().adjoint() * k.matrix()))
    }

    /// Apply the channel to qubit `target`. For the filter channel the matrix
    /// is renormalized and the surviving fraction multiplies `weight`.
    pub fn apply(&self, rho: &DensityState, target: u8) -> Result<DensityState> {
        let out = rho.apply_kraus(&self.kraus, target)?;
        if self.trace_preserving {
            Ok(out)
        } else {
            let tr_in = rho.trace();
            let out = out.normalized()?;
            // normalized() folded tr_out into the weight; rescale relative to the input trace
            let w = out.weight() / tr_in;
            Ok(out.with_weight(w))
        }
    }

    /// Wave-plate form of the channel: `(probability, operator)` terms whose
    /// average reproduces the Kraus action.
    pub fn unitary_mixture(&self) -> UnitaryMixture {
        let d = self.strength;
        let terms = match self.kind {
            ChannelKind::Identity => vec![(1.0, LinearOp::identity(2))],
            ChannelKind::Depolarizing => vec![
                (1.0 - d, LinearOp::identity(2)),
                (d / 3.0, unitary(pauli::x())),
                (d / 3.0, unitary(pauli::y())),
                (d / 3.0, unitary(pauli::z())),
            ],
            ChannelKind::PhaseDamping => {
                vec![(1.0 - d / 2.0, LinearOp::identity(2)), (d / 2.0, unitary(pauli::z()))]
            }
            ChannelKind::AmplitudeDamping => vec![(1.0, self.kraus[0].clone())],
        };
        UnitaryMixture { terms: terms.into_iter().filter(|(p, _)| *p > 0.0).collect() }
    }
}

impl UnitaryMixture {
    pub fn total_probability(&self) -> f64 {
        self.terms.iter().map(|(p, _)| p).sum()
    }

    /// Average of `U ρ U†` over the mixture (no renormalization).
    pub fn apply(&self, rho: &DensityState, target: u8) -> Result<DensityState> {
        let mut acc = CMatrix::zeros(rho.matrix().dim());
        for (p, op) in &self.terms {
            let branch = rho.conjugate(op.matrix(), &[target])?;
            acc = &acc + &branch.matrix().scale_real(*p);
        }
        DensityState::from_matrix(acc, rho.labels().to_vec()).map(|s| s.with_weight(rho.weight()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{BellState, PureState};
    use approx::assert_abs_diff_eq;

    fn phi_plus() -> DensityState {
        PureState::bell(BellState::PhiPlus, 1, 2).unwrap().to_density()
    }

    /// Independent Bell-diagonal oracle: `Σ w_k |B_k⟩⟨B_k|`.
    fn bell_mixture(weights: [f64; 4]) -> CMatrix {
        BellState::ALL
            .iter()
            .zip(weights)
            .fold(CMatrix::zeros(4), |acc, (b, w)| &acc + &b.projector().scale_real(w))
    }

    fn bell_weights(rho: &DensityState) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, b) in BellState::ALL.iter().enumerate() {
            out[i] = rho.expectation(&b.projector(), &[1, 2]).unwrap();
        }
        out
    }

    #[test]
    fn zero_strength_is_identity() {
        for kind in ChannelKind::NOISY {
            let ch = QubitChannel::new(kind, 0.0).unwrap();
            assert_eq!(ch.kraus().len(), 1);
            assert!(ch.kraus()[0].matrix().max_abs_diff(&CMatrix::identity(2)) < 1e-15);
            let out = ch.apply(&phi_plus(), 2).unwrap();
            assert!(out.matrix().max_abs_diff(phi_plus().matrix()) < 1e-15);
        }
    }

    #[test]
    fn out_of_range_strength_is_rejected() {
        assert!(QubitChannel::depolarizing(1.2).is_err());
        assert!(QubitChannel::phase_damping(-0.1).is_err());
        assert!(QubitChannel::amplitude_damping(f64::NAN).is_err());
    }

    #[test]
    fn full_depolarization_gives_white_noise() {
        let ch = QubitChannel::depolarizing(0.75).unwrap();
        let out = ch.apply(&phi_plus(), 2).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::identity(4).scale_real(0.25)) < 1e-14);
        let w = bell_weights(&out);
        for x in w {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn depolarizing_spreads_weight_evenly() {
        for d in [0.1, 0.4, 0.9] {
            let out = QubitChannel::depolarizing(d).unwrap().apply(&phi_plus(), 2).unwrap();
            let oracle = bell_mixture([1.0 - d, d / 3.0, d / 3.0, d / 3.0]);
            assert!(out.matrix().max_abs_diff(&oracle) < 1e-14, "d = {d}");
        }
    }

    #[test]
    fn full_dephasing_kills_coherence() {
        let out = QubitChannel::phase_damping(1.0).unwrap().apply(&phi_plus(), 2).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::diagonal(&[0.5, 0.0, 0.0, 0.5])) < 1e-15);
        // equal mixture of the two Φ states, built from the phase-flip form directly
        let flipped = phi_plus().conjugate(&pauli::z(), &[2]).unwrap();
        let oracle = &phi_plus().matrix().scale_real(0.5) + &flipped.matrix().scale_real(0.5);
        assert!(out.matrix().max_abs_diff(&oracle) < 1e-15);
    }

    #[test]
    fn half_dephasing_weights() {
        let out = QubitChannel::phase_damping(0.5).unwrap().apply(&phi_plus(), 2).unwrap();
        assert!(out.matrix().max_abs_diff(&bell_mixture([0.75, 0.25, 0.0, 0.0])) < 1e-15);
    }

    #[test]
    fn full_filter_leaves_hh() {
        let out = QubitChannel::amplitude_damping(1.0).unwrap().apply(&phi_plus(), 2).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::diagonal(&[1.0, 0.0, 0.0, 0.0])) < 1e-15);
        assert_abs_diff_eq!(out.weight(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn half_filter_matches_amplitude_oracle() {
        let out = QubitChannel::amplitude_damping(0.5).unwrap().apply(&phi_plus(), 2).unwrap();
        // V amplitude scaled by √(1/2), then renormalized by hand
        let a = libm::sqrt(0.5);
        let norm = libm::sqrt(1.0 + a * a);
        let ket = [C64::new(1.0 / norm, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(a / norm, 0.0)];
        assert!(out.matrix().max_abs_diff(&CMatrix::outer(&ket)) < 1e-15);
        assert_abs_diff_eq!(out.weight(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn kraus_completeness_on_grid() {
        for i in 0..=10 {
            let d = i as f64 / 10.0;
            for kind in [ChannelKind::Depolarizing, ChannelKind::PhaseDamping] {
                let ch = QubitChannel::new(kind, d).unwrap();
                assert!(ch.completeness().max_abs_diff(&CMatrix::identity(2)) < 1e-12);
                assert!(ch.is_trace_preserving());
            }
            let amp = QubitChannel::amplitude_damping(d).unwrap();
            assert!(amp.completeness().max_eigenvalue() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn mixture_forms() {
        let d = 0.3;
        let dep = QubitChannel::depolarizing(d).unwrap().unitary_mixture();
        let probs: Vec<f64> = dep.terms.iter().map(|(p, _)| *p).collect();
        assert_eq!(probs, vec![1.0 - d, d / 3.0, d / 3.0, d / 3.0]);
        let ph = QubitChannel::phase_damping(d).unwrap().unitary_mixture();
        assert_eq!(ph.terms.len(), 2);
        assert_abs_diff_eq!(ph.terms[1].0, d / 2.0);
        assert!(ph.terms[1].1.matrix().max_abs_diff(&pauli::z()) < 1e-15);
        let none = QubitChannel::depolarizing(0.0).unwrap().unitary_mixture();
        assert_eq!(none.terms.len(), 1);
        assert_abs_diff_eq!(none.total_probability(), 1.0);
    }

    #[test]
    fn full_depolarizer_maps_anything_to_white() {
        let ch = QubitChannel::depolarizing(0.75).unwrap();
        for s in [PureState::h(1), PureState::v(1), PureState::plus(1)] {
            let out = ch.apply(&s.to_density(), 1).unwrap();
            assert!(out.matrix().max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-12);
        }
    }
}
