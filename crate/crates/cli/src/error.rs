use std::fmt;

use maslov_core::error::Error;
use serde_json::{json, Value};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Config(String),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    /// 2: index undefined, 3: bad input, 4: numerical or output failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::LeftMaSpace { .. }) => 2,
            CliError::Core(Error::Config(_) | Error::NotTuring(_) | Error::InvalidDegree(_)) | CliError::Config(_) => 3,
            CliError::Core(_) | CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                Error::InvalidDegree(_) => "invalid_degree",
                Error::DegenerateFrame => "degenerate_frame",
                Error::NoSuchVector => "no_such_vector",
                Error::Config(_) => "config",
                Error::InvalidPoint => "invalid_point",
                Error::Undersampled { .. } => "undersampled",
                Error::LeftMaSpace { .. } => "left_ma_space",
                Error::Numerical(_) => "numerical",
                Error::Degenerate(_) => "degenerate",
                Error::NotApplicable(_) => "not_applicable",
                Error::NotTuring(_) => "not_turing",
            },
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> Value {
        let mut body = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Core(Error::LeftMaSpace { side, x, lambda }) => {
                body["side"] = json!(side);
                body["x"] = json!(x);
                body["lambda"] = json!(lambda);
            }
            CliError::Core(Error::Undersampled { t0, t1 }) => {
                body["t0"] = json!(t0);
                body["t1"] = json!(t1);
            }
            _ => {}
        }
        json!({ "error": body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let left = CliError::from(Error::LeftMaSpace { side: "bottom".into(), x: 1.0, lambda: 0.0 });
        assert_eq!(left.exit_code(), 2);
        assert_eq!(left.to_json()["error"]["side"], "bottom");
        assert_eq!(CliError::from(Error::NotTuring("tr".into())).exit_code(), 3);
        assert_eq!(CliError::Config("x".into()).exit_code(), 3);
        assert_eq!(CliError::from(Error::Undersampled { t0: 0.0, t1: 1.0 }).exit_code(), 4);
        assert_eq!(CliError::from(Error::Numerical("x".into())).exit_code(), 4);
    }
}
