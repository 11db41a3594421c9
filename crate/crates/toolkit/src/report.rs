//! Shared error and violation reporting used by every verifier and operation.

use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::fmt;

/// A single broken clause found by a verifier. `clause` is a stable
/// machine-readable identifier, `indices` points at the offending
/// sub-objects (path numbers, cycle numbers, ...) and `detail` is for humans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: String,
    pub indices: Vec<i64>,
    pub detail: String,
}

impl Violation {
    pub fn new(clause: &str, indices: Vec<i64>, detail: impl Into<String>) -> Self {
        Violation { clause: clause.to_string(), indices, detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::json!({
            "clause": self.clause,
            "indices": self.indices,
            "detail": self.detail,
        }))
    }
}

/// Outcome of a verification run: either clean or a list of violations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Report {
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn ok() -> Self {
        Report { violations: Vec::new() }
    }

    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn add(&mut self, clause: &str, indices: Vec<i64>, detail: impl Into<String>) {
        self.violations.push(Violation::new(clause, indices, detail));
    }

    /// Absorbs the violations of `other`, prefixing each clause with `prefix.`.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut v in other.violations {
            v.clause = format!("{prefix}.{}", v.clause);
            self.violations.push(v);
        }
    }

    pub fn into_result(self) -> Result<(), Vec<Violation>> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(self.violations)
        }
    }
}

/// Errors raised by operations (as opposed to verification findings).
#[derive(Debug, thiserror::Error)]
pub enum OpError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("search budget exhausted after {visited} nodes")]
    BudgetExhausted { visited: u64 },
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("internal invariant failed: {0}")]
    Internal(String),
}

impl OpError {
    pub fn pre(msg: impl Into<String>) -> Self {
        OpError::Precondition(msg.into())
    }
}

/// Node budget for exhaustive searches. A `limit` of `u64::MAX` means
/// unbounded, in which case a negative search answer is exact.
#[derive(Debug, Clone)]
pub struct Budget {
    limit: u64,
    used: Cell<u64>,
}

impl Budget {
    pub const DEFAULT_LIMIT: u64 = 10_000_000;

    pub fn new(limit: u64) -> Self {
        Budget { limit, used: Cell::new(0) }
    }

    pub fn unbounded() -> Self {
        Budget::new(u64::MAX)
    }

    pub fn is_unbounded(&self) -> bool {
        self.limit == u64::MAX
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    /// Counts one search node; errs once the limit is crossed.
    pub fn tick(&self) -> Result<(), OpError> {
        let n = self.used.get() + 1;
        self.used.set(n);
        if n > self.limit {
            Err(OpError::BudgetExhausted { visited: n })
        } else {
            Ok(())
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(Self::DEFAULT_LIMIT)
    }
}
