use std::fmt;

use fixattn::data::DataError;
use fixattn::eval::EvalError;
use fixattn::model::ModelError;
use fixattn::patterns::PatternError;
use fixattn::system::SystemError;
use fixattn::tensor::TensorError;
use fixattn::train::TrainError;

/// Failure category, which decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Numerical => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn tensor_kind(e: &TensorError) -> Kind {
    match e {
        TensorError::Numerical(_) => Kind::Numerical,
        TensorError::Checkpoint(_) | TensorError::Io(_) => Kind::Data,
        _ => Kind::Usage,
    }
}

fn model_kind(e: &ModelError) -> Kind {
    match e {
        ModelError::Config(_) | ModelError::Json { .. } => Kind::Usage,
        ModelError::Tensor(t) => tensor_kind(t),
        ModelError::Pattern(PatternError::UsageError(_)) => Kind::Usage,
        _ => Kind::Data,
    }
}

fn system_kind(e: &SystemError) -> Kind {
    match e {
        SystemError::Model(m) => model_kind(m),
        SystemError::Data(_) | SystemError::Eval(_) => Kind::Data,
        SystemError::Train(TrainError::Numerical { .. }) => Kind::Numerical,
        SystemError::Train(TrainError::Model(m)) => model_kind(m),
        SystemError::Train(TrainError::Config(_)) | SystemError::Config(_) => Kind::Usage,
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        Self {
            kind: system_kind(&e),
            message: e.to_string(),
        }
    }
}

macro_rules! via_system {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                SystemError::from(e).into()
            }
        })*
    };
}

via_system!(ModelError, DataError, EvalError, TrainError);

impl From<PatternError> for CliError {
    fn from(e: PatternError) -> Self {
        let kind = match e {
            PatternError::UsageError(_) | PatternError::InvalidKind(_) | PatternError::InvalidLength(_) => Kind::Usage,
            _ => Kind::Data,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(e.to_string())
    }
}
