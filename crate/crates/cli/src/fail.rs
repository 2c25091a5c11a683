//! Error classes and their exit codes.

use std::fmt;

use lmgen_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Usage,
    Io,
    Remote,
    Numerical,
}

impl Class {
    pub fn exit_code(self) -> i32 {
        match self {
            Class::Usage => 2,
            Class::Io => 3,
            Class::Remote => 4,
            Class::Numerical => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Usage => "usage",
            Class::Io => "io",
            Class::Remote => "remote",
            Class::Numerical => "numerical",
        }
    }
}

/// A CLI-level error with an explicit class.
#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            class: Class::Io,
            message: message.into(),
        }
    }

    pub fn remote(message: impl Into<String>) -> Self {
        Failure {
            class: Class::Remote,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn usage(message: impl Into<String>) -> Failure {
    Failure {
        class: Class::Usage,
        message: message.into(),
    }
}

pub fn classify_core(e: &Error) -> Class {
    match e {
        Error::Input(_) | Error::Config(_) => Class::Usage,
        Error::Parse { .. } | Error::Version { .. } | Error::Io { .. } => Class::Io,
        Error::Probe(_) => Class::Remote,
        Error::Numerical(_) => Class::Numerical,
    }
}

/// The class of the innermost recognised cause.
pub fn classify(e: &anyhow::Error) -> Class {
    for cause in e.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.class;
        }
        if let Some(c) = cause.downcast_ref::<Error>() {
            return classify_core(c);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return Class::Io;
        }
    }
    Class::Io
}
