//! Entanglement swapping between two `|Φ+⟩` pairs.
//!
//! Photons are labelled as in the lab: pair one is (1, 2), pair two is
//! (3, 4). The Bell-state measurement acts on photons 1 and 3; the noisy
//! channels and the local analyzers act on photons 2 and 4.

use crate::channels::QubitChannel;
use crate::error::{check_unit, Error, Result};
use crate::qmat::{BellState, CMatrix, DensityState, LinearOp, OpKind, PureState, DEGENERACY_THRESHOLD};

pub const BSM_PHOTONS: [u8; 2] = [1, 3];
pub const LOCAL_PHOTONS: [u8; 2] = [2, 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsmMode {
    Ideal,
    Partial,
    NonInterfering,
}

/// Beam-splitter Bell-state measurement with a fraction `visibility` of
/// genuinely interfering photon pairs.
///
/// Distinguishable photons leave a balanced splitter through different
/// ports half of the time whatever their polarization, so the coincidence
/// effect is `v·|ψ−⟩⟨ψ−| + (1−v)·𝟙/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsmModel {
    visibility: f64,
}

impl Default for BsmModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl BsmModel {
    pub fn ideal() -> Self {
        BsmModel { visibility: 1.0 }
    }

    pub fn non_interfering() -> Self {
        BsmModel { visibility: 0.0 }
    }

    pub fn new(visibility: f64) -> Result<Self> {
        Ok(BsmModel { visibility: check_unit("BSM visibility", visibility)? })
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn mode(&self) -> BsmMode {
        if self.visibility == 1.0 {
            BsmMode::Ideal
        } else if self.visibility == 0.0 {
            BsmMode::NonInterfering
        } else {
            BsmMode::Partial
        }
    }

    /// POVM element for a coincidence on photons (1, 3).
    pub fn coincidence_operator(&self) -> LinearOp {
        let singlet = BellState::PsiMinus.projector();
        if self.mode() == BsmMode::Ideal {
            return LinearOp::new(singlet, OpKind::Projector).expect("singlet projector");
        }
        let v = self.visibility;
        let m = &singlet.scale_real(v) + &CMatrix::identity(4).scale_real((1.0 - v) / 2.0);
        LinearOp::new(m, OpKind::Effect).expect("convex mix of effects is an effect")
    }
}

/// `|Φ+⟩₁₂ ⊗ |Φ+⟩₃₄`.
pub fn prepare_pairs() -> DensityState {
    let a = PureState::bell(BellState::PhiPlus, 1, 2).expect("labels 1, 2");
    let b = PureState::bell(BellState::PhiPlus, 3, 4).expect("labels 3, 4");
    a.tensor(&b).expect("disjoint labels").to_density()
}

/// Send photon 2 through `first` and photon 4 through `second`.
///
/// Returns the renormalized four-photon state; its `weight` is the fraction
/// that survives any filter channel.
pub fn evolve_pairs(first: &QubitChannel, second: &QubitChannel) -> Result<DensityState> {
    let rho = first.apply(&prepare_pairs(), LOCAL_PHOTONS[0])?;
    second.apply(&rho, LOCAL_PHOTONS[1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwapOutcome {
    /// Heralded state of photons (2, 4), unit trace.
    pub conditional: DensityState,
    /// Probability of a BSM coincidence, `Tr[(Π_v ⊗ 𝟙) ρ]`.
    pub singlet_rate: f64,
    /// Part of `singlet_rate` due to the singlet projector, `v·Tr[(ψ− ⊗ 𝟙) ρ]`.
    pub genuine_rate: f64,
    /// `Tr[(ψ− ⊗ 𝟙) ρ]`: coincidence rate an ideal BSM would see.
    pub ideal_rate: f64,
    /// Surviving fraction after the filter channels (1 for Pauli channels).
    pub channel_success: f64,
    /// Set when the herald rate vanished and `conditional` is the analytic
    /// limit of the filter family.
    pub limit: bool,
    /// Four-photon state after the channels, unit trace.
    pub source: DensityState,
    pub bsm: BsmModel,
}

impl SwapOutcome {
    /// `Tr[(Π_v ⊗ P₂ ⊗ P₄) ρ]`: probability of a four-fold coincidence.
    pub fn fourfold_rate(&self, photon2: &CMatrix, photon4: &CMatrix) -> f64 {
        fourfold_rate(&self.source, &self.bsm, photon2, photon4)
    }

    /// Single-photon marginal of photon `label` before any post-selection.
    pub fn marginal(&self, label: u8) -> Result<DensityState> {
        self.source.partial_trace(&[label])
    }
}

pub fn fourfold_rate(source: &DensityState, bsm: &BsmModel, photon2: &CMatrix, photon4: &CMatrix) -> f64 {
    let op = bsm.coincidence_operator().matrix().kron(&photon2.kron(photon4));
    source.expectation(&op, &[1, 3, 2, 4]).expect("four-photon source")
}

/// Run the protocol with the same channel on both pairs.
pub fn run_swap(channel: &QubitChannel, bsm: &BsmModel) -> Result<SwapOutcome> {
    run_swap_with(channel, channel, bsm)
}

pub fn run_swap_with(first: &QubitChannel, second: &QubitChannel, bsm: &BsmModel) -> Result<SwapOutcome> {
    let evolved = evolve_pairs(first, second)?;
    let channel_success = evolved.weight();
    let source = evolved.with_weight(1.0);

    let singlet = BellState::PsiMinus.projector();
    let ideal_rate = source.expectation(&singlet, &BSM_PHOTONS)?;
    let genuine_rate = bsm.visibility() * ideal_rate;

    match source.project(&bsm.coincidence_operator(), &BSM_PHOTONS) {
        Ok(branch) => {
            let conditional = branch.conditional.partial_trace(&LOCAL_PHOTONS)?.with_weight(1.0);
            Ok(SwapOutcome {
                conditional,
                singlet_rate: branch.probability,
                genuine_rate,
                ideal_rate,
                channel_success,
                limit: false,
                source,
                bsm: *bsm,
            })
        }
        Err(Error::ImpossibleBranch(rate)) => {
            // Equal filters diag(1, a) on photons 2 and 4 scale the heralded
            // singlet by a², so the normalized state stays ψ− as a → 0.
            let symmetric_filters = first.is_filter() && first == second && bsm.mode() == BsmMode::Ideal;
            if !symmetric_filters {
                return Err(Error::ImpossibleBranch(rate));
            }
            let conditional = PureState::bell(BellState::PsiMinus, 2, 4)?.to_density();
            Ok(SwapOutcome {
                conditional,
                singlet_rate: rate.max(0.0),
                genuine_rate: genuine_rate.max(0.0),
                ideal_rate: ideal_rate.max(0.0),
                channel_success,
                limit: true,
                source,
                bsm: *bsm,
            })
        }
        Err(e) => Err(e),
    }
}

/// Whether `rate` is too small to condition on.
pub fn is_degenerate(rate: f64) -> bool {
    rate < DEGENERACY_THRESHOLD
}
