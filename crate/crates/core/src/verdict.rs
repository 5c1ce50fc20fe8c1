//! Shared verdict type for decision and verification procedures.
//!
//! A `yes` must carry a witness that was re-verified by the producing
//! operation; a `no` carries a finite refutation in its notes (and sometimes
//! witness data for the failing quantity); `unknown` is reserved for budget
//! exhaustion in searches and never pretends to be a decision.

use serde::{Deserialize, Serialize};

use crate::cmatrix::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

impl Answer {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Answer::Yes => 0,
            Answer::No => 1,
            Answer::Unknown => 2,
        }
    }
}

/// Named matrices and scalars certifying a verdict.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Witness {
    pub matrices: Vec<(String, CMatrix)>,
    pub scalars: Vec<(String, f64)>,
}

impl Witness {
    pub fn matrix(&self, name: &str) -> Option<&CMatrix> {
        self.matrices
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(n, _)| n == name).map(|&(_, s)| s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub answer: Answer,
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn yes() -> Self {
        Verdict {
            answer: Answer::Yes,
            witness: None,
            notes: Vec::new(),
        }
    }

    pub fn no() -> Self {
        Verdict {
            answer: Answer::No,
            witness: None,
            notes: Vec::new(),
        }
    }

    pub fn unknown() -> Self {
        Verdict {
            answer: Answer::Unknown,
            witness: None,
            notes: Vec::new(),
        }
    }

    pub fn is_yes(&self) -> bool {
        self.answer == Answer::Yes
    }

    pub fn is_no(&self) -> bool {
        self.answer == Answer::No
    }

    pub fn with_matrix(mut self, name: impl Into<String>, m: CMatrix) -> Self {
        self.witness
            .get_or_insert_with(Witness::default)
            .matrices
            .push((name.into(), m));
        self
    }

    pub fn with_scalar(mut self, name: impl Into<String>, s: f64) -> Self {
        self.witness
            .get_or_insert_with(Witness::default)
            .scalars
            .push((name.into(), s));
        self
    }

    pub fn note(mut self, msg: impl Into<String>) -> Self {
        self.notes.push(msg.into());
        self
    }

    pub fn notes_from(mut self, other: &Verdict) -> Self {
        self.notes.extend(other.notes.iter().cloned());
        self
    }

    pub fn witness_matrix(&self, name: &str) -> Option<&CMatrix> {
        self.witness.as_ref().and_then(|w| w.matrix(name))
    }

    pub fn witness_scalar(&self, name: &str) -> Option<f64> {
        self.witness.as_ref().and_then(|w| w.scalar(name))
    }
}
