//! Tolerance policy shared by all structural checks.
//!
//! Every residual comparison in the crate is scale-invariant: a residual is
//! accepted when it does not exceed `scale * (1 + magnitude)`, where
//! `magnitude` is a norm of the data being checked. The default scale is
//! 1e-9; rank decisions use a tighter relative cutoff.

/// Relative cutoff below which singular/eigen values count as zero.
pub const RANK_CUTOFF_REL: f64 = 1e-10;

/// Relative threshold for span re-expression residuals (algebra closure).
pub const SPAN_RESIDUAL_REL: f64 = 1e-8;

/// Scale-invariant tolerance used by all residual checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    scale: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { scale: 1e-9 }
    }
}

impl Tol {
    pub fn new(scale: f64) -> Self {
        assert!(scale > 0.0, "tolerance scale must be positive");
        Tol { scale }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Absolute tolerance for data of the given magnitude.
    pub fn abs(&self, magnitude: f64) -> f64 {
        self.scale * (1.0 + magnitude)
    }

    /// True when `residual` is acceptable for data of the given magnitude.
    pub fn ok(&self, residual: f64, magnitude: f64) -> bool {
        residual <= self.abs(magnitude)
    }

    /// Span re-expression tolerance, `1e-8 * (1 + magnitude)`.
    pub fn span(&self, magnitude: f64) -> f64 {
        SPAN_RESIDUAL_REL * (1.0 + magnitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_invariance() {
        let tol = Tol::default();
        assert!(tol.ok(5e-10, 0.0));
        assert!(!tol.ok(5e-9, 0.0));
        // a residual of 5e-7 is fine against data of magnitude 1e3
        assert!(tol.ok(5e-7, 1e3));
    }

    #[test]
    #[should_panic]
    fn rejects_zero_scale() {
        Tol::new(0.0);
    }
}
