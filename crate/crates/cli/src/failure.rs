//! CLI error classification. Every failure prints exactly one line,
//! `ipsim-error: <kind>: <message>`, and maps to a fixed exit code.

use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad command line.
    Usage,
    /// File missing or unreadable.
    Io,
    /// File present but not in the expected encoding.
    Format,
    /// Input dimensions that do not fit together.
    Shape,
    /// Configuration that fails validation.
    Config,
    /// Any other violated precondition at run time.
    Invariant,
    /// `compare` found an error above tolerance.
    Tolerance,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Io => "io",
            Kind::Format => "format",
            Kind::Shape => "shape",
            Kind::Config => "config",
            Kind::Invariant => "invariant",
            Kind::Tolerance => "tolerance",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Tolerance => 1,
            Kind::Usage | Kind::Io | Kind::Format | Kind::Shape => 2,
            Kind::Config | Kind::Invariant => 3,
        }
    }

    /// Core error raised while reading `path`.
    pub fn reading(path: &Path, err: ipsim_core::Error) -> Self {
        let mut f = Self::from(err);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "ipsim-error: {}: {one_line}", self.kind.name())
    }
}

impl From<ipsim_core::Error> for Failure {
    fn from(err: ipsim_core::Error) -> Self {
        use ipsim_core::Error;
        let kind = match &err {
            Error::InvalidArgument(_) => Kind::Invariant,
            Error::Format { what: "config", .. } => Kind::Config,
            Error::Format { .. } | Error::Image(_) => Kind::Format,
            Error::Io(_) => Kind::Io,
        };
        Self::new(kind, err.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;
