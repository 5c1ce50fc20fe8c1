use serde::{Deserialize, Serialize};

use crate::error::{OatError, Result};

/// Comparison thresholds used throughout the toolkit.
///
/// Every numerical comparison is routed through one of these three fields;
/// no operation hides its own constants. `eq_eps` decides matrix and scalar
/// equality, `rank_eps` decides numerical rank (relative to the largest
/// singular value), and `series_eps` is the term-size cutoff for power
/// series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub eq_eps: f64,
    pub rank_eps: f64,
    pub series_eps: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eq_eps: 1e-9,
            rank_eps: 1e-8,
            series_eps: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(eq_eps: f64, rank_eps: f64, series_eps: f64) -> Result<Self> {
        let t = Tolerance {
            eq_eps,
            rank_eps,
            series_eps,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eq_eps > 0.0 && self.rank_eps > 0.0 && self.series_eps > 0.0) {
            return Err(OatError::invalid("tolerances must be strictly positive"));
        }
        if self.eq_eps < self.series_eps {
            return Err(OatError::invalid("eq_eps must be at least series_eps"));
        }
        Ok(())
    }

    /// Equality threshold scaled by the size of the operands: eq_eps * (1 + s).
    pub fn eq_scaled(&self, scale: f64) -> f64 {
        self.eq_eps * (1.0 + scale)
    }

    /// The looser threshold used by equivalence checks (10x eq_eps).
    pub fn verify_eps(&self) -> f64 {
        10.0 * self.eq_eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        Tolerance::default().validate().unwrap();
    }

    #[test]
    fn rejects_nonpositive_and_inverted() {
        assert!(Tolerance::new(0.0, 1e-8, 1e-12).is_err());
        assert!(Tolerance::new(1e-9, -1.0, 1e-12).is_err());
        assert!(Tolerance::new(1e-13, 1e-8, 1e-12).is_err());
    }
}
