// Copyright 2026 The stv-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::ballot::CandidateId;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A function was called with arguments outside of its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A ballot file could not be parsed. Line numbers are 1-based; line 0
    /// is used for whole-document (JSON) errors.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The linear form of an assertion is non-negative on every ballot, so
    /// there is nothing to audit.
    #[error("degenerate assertion: its linear form is never negative")]
    DegenerateAssertion,

    /// The reported winners disagree with our own tabulation.
    #[error("reported winners {reported:?} differ from tabulated winners {tabulated:?}")]
    WinnerMismatch {
        reported: Vec<CandidateId>,
        tabulated: Vec<CandidateId>,
    },

    /// No set of assertions could be found to rule out the given alternate
    /// outcome.
    #[error("not auditable: no assertions rule out the outcome {0:?}")]
    NotAuditable(Vec<CandidateId>),

    /// Inconsistent audit data (e.g. CVR and MVR lists of different length).
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
