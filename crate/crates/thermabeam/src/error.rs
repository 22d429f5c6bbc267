//! Crate-wide error type.
//!
//! Errors fall into three families that the command-line frontend maps to
//! distinct process exit codes: configuration / validation problems (exit 2),
//! numerical failures (exit 3), and I/O or file-format problems (exit 4).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user configuration: unknown keys, out-of-range values, missing files
    /// referenced by a config.
    #[error("config: {0}")]
    Config(String),

    /// Geometric preconditions violated (regions outside the grid, overlapping
    /// scenario regions, antennas inside the PML, ...).
    #[error("geometry: {0}")]
    Geometry(String),

    /// Field update produced non-finite values.
    #[error("numerical instability at step {step}: {detail}")]
    Instability { step: usize, detail: String },

    /// Channel acquisition produced unusable recordings.
    #[error("acquisition: {0}")]
    Acquisition(String),

    /// Constraint system too close to singular for a trustworthy solve.
    #[error(
        "ill-conditioned constraints (reciprocal condition estimate {rcond:.3e}); \
         objective columns {col_a} and {col_b} are nearly dependent"
    )]
    IllConditioned {
        rcond: f64,
        col_a: usize,
        col_b: usize,
    },

    /// Power-to-temperature calibration could not bracket or verify the target.
    #[error("calibration: {0}")]
    Calibration(String),

    /// An operation was asked to digest less data than it needs.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Malformed binary or text artifact.
    #[error("format: {0}")]
    Format(String),

    /// Two run bundles cannot be compared.
    #[error("comparison: {0}")]
    Comparison(String),

    /// A scenario stage failed; the wrapped error says why.
    #[error("stage '{stage}': {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 I/O or format.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Geometry(_) | Error::Comparison(_) => 2,
            Error::Instability { .. }
            | Error::Acquisition(_)
            | Error::IllConditioned { .. }
            | Error::Calibration(_)
            | Error::InsufficientData(_) => 3,
            Error::Format(_) | Error::Io(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_error_families() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(
            Error::Instability {
                step: 3,
                detail: "nan".into()
            }
            .exit_code(),
            3
        );
        assert_eq!(Error::Format("bad magic".into()).exit_code(), 4);
        let nested = Error::Stage {
            stage: "acquire",
            source: Box::new(Error::Acquisition("silent probes".into())),
        };
        assert_eq!(nested.exit_code(), 3, "stage wrapper forwards inner code");
    }
}
