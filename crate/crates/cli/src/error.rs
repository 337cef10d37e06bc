//! Exit codes and machine-readable error reports.

use std::fmt;

use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Malformed or inconsistent user input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input error: {}", self.0)
    }
}

impl std::error::Error for InputError {}

/// A computed result failed its own post-check.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantError(pub String);

impl fmt::Display for InvariantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invariant violated: {}", self.0)
    }
}

impl std::error::Error for InvariantError {}

fn core_code(err: &levi_hull::Error) -> i32 {
    use levi_hull::Error as E;
    match err {
        E::Parse(_) | E::Io(_) => EXIT_INPUT,
        E::Alias { .. } => EXIT_INVARIANT,
        E::Domain(_)
        | E::SingularValue { .. }
        | E::Convergence { .. }
        | E::Inversion { .. }
        | E::NearPole(_)
        | E::Foliation(_)
        | E::Graph(_)
        | E::Frame(_)
        | E::GridTooCoarse { .. }
        | E::Locus(_) => EXIT_NUMERIC,
    }
}

/// Exit code for an error chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<InputError>().is_some() {
            return EXIT_INPUT;
        }
        if cause.downcast_ref::<InvariantError>().is_some() {
            return EXIT_INVARIANT;
        }
        if let Some(e) = cause.downcast_ref::<levi_hull::Error>() {
            return core_code(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_INPUT;
        }
    }
    EXIT_INVARIANT
}

/// JSON object describing an error for stderr.
pub fn error_report(err: &anyhow::Error) -> Value {
    let mut kind = "InternalError";
    let mut details = Value::Null;
    for cause in err.chain() {
        if cause.downcast_ref::<InputError>().is_some() {
            kind = "InputError";
            break;
        }
        if cause.downcast_ref::<InvariantError>().is_some() {
            kind = "InvariantError";
            break;
        }
        if let Some(e) = cause.downcast_ref::<levi_hull::Error>() {
            kind = e.kind();
            if let levi_hull::Error::Convergence {
                iterations,
                last_residual,
                history,
            } = e
            {
                details = json!({
                    "iterations": iterations,
                    "last_residual": last_residual,
                    "history": history,
                });
            }
            break;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            kind = "IoError";
            break;
        }
    }
    json!({
        "error": kind,
        "message": format!("{err:#}"),
        "exit_code": exit_code(err),
        "details": details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_the_contract() {
        let e = anyhow::Error::new(InputError("x".into()));
        assert_eq!(exit_code(&e), EXIT_INPUT);
        let e = anyhow::Error::new(levi_hull::Error::NearPole("x".into())).context("solving");
        assert_eq!(exit_code(&e), EXIT_NUMERIC);
        assert_eq!(error_report(&e)["error"], "NearPoleError");
        let e = anyhow::Error::new(InvariantError("x".into()));
        assert_eq!(exit_code(&e), EXIT_INVARIANT);
        let e: anyhow::Result<()> = Err(levi_hull::Error::Parse("bad".into())).context("spec");
        assert_eq!(exit_code(&e.unwrap_err()), EXIT_INPUT);
    }

    #[test]
    fn convergence_details_are_reported() {
        let e = anyhow::Error::new(levi_hull::Error::Convergence {
            iterations: 3,
            last_residual: 0.5,
            history: vec![1.0, 0.5],
        });
        let r = error_report(&e);
        assert_eq!(r["details"]["iterations"], 3);
        assert_eq!(r["exit_code"], EXIT_NUMERIC);
    }
}
