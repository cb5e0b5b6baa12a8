//! Exactly integrated discretization weights for the singular kernels
//! (t−s)^{α−1} and (t−s)^{α−1} ln(t−s) on a uniform grid.
//!
//! The per-step weight against evaluation node t_k over the cell
//! [t_j, t_{j+1}] depends only on the lag k − j, so weights are stored by
//! lag: the full lower-triangular matrix w_{k,j} is recovered through
//! [`KernelWeights::weight`].

use crate::error::{Error, Result};
use crate::paths::TimeGrid;

/// Which kernel the weights integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// (t−s)^{α−1}; antiderivative s ↦ s^α/α.
    Plain,
    /// (t−s)^{α−1} ln(t−s); antiderivative s ↦ s^α ln s/α − s^α/α².
    Log,
}

/// Lower-triangular table of per-step integrated kernel weights
/// w_{k,j} = ∫_{t_j}^{t_{j+1}} K(t_k − s) ds for j < k.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    order: f64,
    kind: KernelKind,
    steps: usize,
    /// lag[d] = w_{k,j} for d = k − j ≥ 1; lag[0] is unused and zero.
    lag: Vec<f64>,
}

impl KernelWeights {
    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// w_{k,j} for j < k ≤ n.
    pub fn weight(&self, k: usize, j: usize) -> f64 {
        assert!(j < k && k <= self.steps, "weight index out of range");
        self.lag[k - j]
    }

    /// Σ_{j<k} w_{k,j}; for the plain kernel this telescopes to t_k^α/α.
    pub fn row_sum(&self, k: usize) -> f64 {
        assert!(k <= self.steps);
        self.lag[1..=k].iter().sum()
    }

    /// Weights indexed by lag d = k − j (entry 0 unused).
    pub fn lags(&self) -> &[f64] {
        &self.lag
    }
}

/// Integrate the kernel of the given order exactly over every grid cell.
///
/// The order may be any exponent in (0, 1]: the SDE modules use
/// α ∈ (1/2, 1] while the Gronwall checker needs the full singular range
/// η ∈ (0, 1).
pub fn kernel_weights(order: f64, grid: &TimeGrid, kind: KernelKind) -> Result<KernelWeights> {
    if !order.is_finite() || order <= 0.0 || order > 1.0 {
        return Err(Error::Domain(format!(
            "kernel_weights: order must lie in (0, 1], got {order}"
        )));
    }
    let n = grid.steps();
    let h = grid.step_size();
    let ha = h.powf(order);
    let mut lag = vec![0.0; n + 1];
    match kind {
        KernelKind::Plain => {
            let mut prev = 0.0; // (d−1)^α, telescoped
            for (d, slot) in lag.iter_mut().enumerate().skip(1) {
                let cur = (d as f64).powf(order);
                *slot = ha * (cur - prev) / order;
                prev = cur;
            }
        }
        KernelKind::Log => {
            // ∫_B^A u^{α−1} ln u du with A = dh, B = (d−1)h:
            //   (A^α ln A − B^α ln B)/α − (A^α − B^α)/α²
            let inv_a = 1.0 / order;
            let inv_a2 = inv_a * inv_a;
            let mut prev_pow = 0.0; // B^α
            let mut prev_pow_log = 0.0; // B^α ln B, with the B = 0 limit 0
            for (d, slot) in lag.iter_mut().enumerate().skip(1) {
                let a = d as f64 * h;
                let pow = ha * (d as f64).powf(order);
                let pow_log = pow * a.ln();
                *slot = (pow_log - prev_pow_log) * inv_a - (pow - prev_pow) * inv_a2;
                prev_pow = pow;
                prev_pow_log = pow_log;
            }
        }
    }
    Ok(KernelWeights {
        order,
        kind,
        steps: n,
        lag,
    })
}
