use curefit::{Error, ErrorKind};

/// A diagnostic plus the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "config",
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            kind: "data",
            message: message.into(),
        }
    }

    pub fn convergence(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            kind: "convergence",
            message: message.into(),
        }
    }

    pub fn io(e: std::io::Error) -> Self {
        Self::data(format!("i/o: {e}"))
    }

    /// `error[kind]: message` on one line.
    pub fn diagnostic(&self) -> String {
        let msg = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {}", self.kind, msg)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Config => Self::config(msg),
            ErrorKind::Data => Self::data(msg),
            ErrorKind::Convergence => Self::convergence(msg),
        }
    }
}
