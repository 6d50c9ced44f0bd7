//! Process-wide tolerance for exact algebraic identities.

use std::sync::atomic::{AtomicU64, Ordering};

const DEFAULT_ALGEBRAIC: f64 = 1e-12;

static ALGEBRAIC: AtomicU64 = AtomicU64::new(0x3D71_9799_812D_EA11); // 1e-12

/// Tolerance used when checking orthonormality, isotropy and similar
/// identities that hold exactly in exact arithmetic.
pub fn algebraic() -> f64 {
    f64::from_bits(ALGEBRAIC.load(Ordering::Relaxed))
}

/// Overrides the algebraic tolerance. Non-positive or non-finite values
/// restore the default.
pub fn set_algebraic(tol: f64) {
    let tol = if tol.is_finite() && tol > 0.0 { tol } else { DEFAULT_ALGEBRAIC };
    ALGEBRAIC.store(tol.to_bits(), Ordering::Relaxed);
}

/// Threshold below which `J_V f` is treated as degenerate.
pub const DEGENERATE_JACOBIAN: f64 = 1e-8;

/// Residual accepted by the implicit solver.
pub const SOLVER_RESIDUAL: f64 = 1e-10;
