use crate::qmat::OpKind;

/// Errors raised anywhere in the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("operand kinds differ: {0:?} vs {1:?}")]
    KindMismatch(OpKind, OpKind),
    #[error("qubit label {0} appears more than once")]
    DuplicateLabel(u8),
    #[error("qubit label {0} is not carried by this state")]
    UnknownLabel(u8),
    #[error("partial trace must keep at least one qubit")]
    EmptyKeep,
    #[error("dimension {dim} does not match {qubits} qubit label(s)")]
    DimensionMismatch { dim: usize, qubits: usize },
    #[error("state vector has zero norm")]
    ZeroNorm,
    #[error("operator violates the {kind:?} invariant (defect {defect:e})")]
    InvalidOperator { kind: OpKind, defect: f64 },
    #[error("branch probability {0:e} is below the degeneracy threshold")]
    ImpossibleBranch(f64),
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("normalizing rate is zero")]
    ZeroRate,
    #[error("invalid sampler setting: {0}")]
    InvalidSampler(&'static str),
    #[error("probability {value} is outside the invertible range of the {family} family")]
    NotInvertible { family: &'static str, value: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange { name, value })
    }
}
