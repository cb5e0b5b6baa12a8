//! Uniform time grids and reproducible Brownian increments.
//!
//! Increments are generated counter-based: the value of cell (replica r,
//! step j) is a pure function of (seed, r, j), so any sub-rectangle of the
//! batch can be regenerated bit-identically, in any order, on any number
//! of threads. Uniform bits are turned into Gaussians through the AS241
//! inverse normal CDF, which is plain rational arithmetic and therefore
//! reproducible across platforms.

use crate::error::{Error, Result};

/// Uniform discretization of [0, T] with nodes t_k = kT/n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step size h = T/n.
    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node t_k = kT/n for k = 0..=n; the product is formed before the
    /// division so that t_n = T exactly.
    pub fn node(&self, k: usize) -> f64 {
        assert!(k <= self.steps, "node index {k} out of range");
        (k as f64 * self.horizon) / self.steps as f64
    }

    /// All n+1 nodes.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// Index of the node equal to `t` (up to rounding), or a domain error
    /// when `t` does not sit on the grid.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let k = (t / self.step_size()).round();
        if k < 0.0 || k > self.steps as f64 {
            return Err(Error::Domain(format!(
                "time {t} outside grid [0, {}]",
                self.horizon
            )));
        }
        let k = k as usize;
        if (self.node(k) - t).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(Error::Domain(format!(
                "time {t} is not a node of the grid (nearest node {})",
                self.node(k)
            )));
        }
        Ok(k)
    }
}

/// Build the uniform grid over [0, T] with n steps.
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::Domain(format!(
            "make_grid: horizon must be positive, got {horizon}"
        )));
    }
    if steps == 0 {
        return Err(Error::Domain("make_grid: need at least one step".into()));
    }
    Ok(TimeGrid { horizon, steps })
}

/// Reproducible batch of Brownian increments ΔB_j ~ N(0, h) for m replicas.
///
/// The batch is a generator, not an array: rows are produced on demand so
/// million-replica experiments never materialize the full m×n table.
/// Immutable after creation; disjoint replica ranges may be generated
/// concurrently.
#[derive(Debug, Clone)]
pub struct NoiseBatch {
    step: f64,
    steps: usize,
    replicas: usize,
    seed: u64,
}

const WEYL_R: u64 = 0x9E37_79B9_7F4A_7C15;
const WEYL_J: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer; full-avalanche 64-bit mix.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl NoiseBatch {
    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// Per-replica substream key; cell values depend on (seed, r, j) only
    /// through this key and j.
    pub fn substream(&self, replica: usize) -> u64 {
        mix64(self.seed ^ mix64((replica as u64 + 1).wrapping_mul(WEYL_R)))
    }

    /// The increment ΔB_j of one replica.
    pub fn increment(&self, replica: usize, step: usize) -> f64 {
        assert!(replica < self.replicas && step < self.steps);
        self.cell(self.substream(replica), step)
    }

    /// Fill `out` (length n) with the increments of one replica.
    pub fn fill_replica(&self, replica: usize, out: &mut [f64]) {
        assert!(replica < self.replicas, "replica index out of range");
        assert_eq!(out.len(), self.steps, "buffer length must equal step count");
        let key = self.substream(replica);
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self.cell(key, j);
        }
    }

    /// The increments of one replica as a fresh vector.
    pub fn replica_increments(&self, replica: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.steps];
        self.fill_replica(replica, &mut v);
        v
    }

    fn cell(&self, substream_key: u64, step: usize) -> f64 {
        let bits = mix64(substream_key ^ mix64((step as u64 + 1).wrapping_mul(WEYL_J)));
        // 53 random bits, offset to the open interval (0, 1)
        let u = ((bits >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0);
        self.step.sqrt() * inverse_normal_cdf(u)
    }
}

/// Deterministic stream of uniform(0, 1) draws, for parameter sweeps and
/// spot checks that need reproducible randomness outside a noise batch.
pub fn uniform_sequence(seed: u64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let bits = mix64(seed ^ mix64((i as u64 + 1).wrapping_mul(WEYL_R)));
            ((bits >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
        })
        .collect()
}

/// Generate the noise batch for a grid: m replicas of n increments with
/// variance h each, keyed by a 64-bit seed.
pub fn sample_noise(grid: &TimeGrid, replicas: usize, seed: u64) -> Result<NoiseBatch> {
    if replicas == 0 {
        return Err(Error::Domain(
            "sample_noise: need at least one replica".into(),
        ));
    }
    Ok(NoiseBatch {
        step: grid.step_size(),
        steps: grid.steps(),
        replicas,
        seed,
    })
}

/// Inverse of the standard normal CDF (Wichura's AS241, PPND16 variant),
/// accurate to ~1e−16 relative for p in (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(r, &PPND_A) / horner(r, &PPND_B);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        let r = r - 1.6;
        horner(r, &PPND_C) / horner(r, &PPND_D)
    } else {
        let r = r - 5.0;
        horner(r, &PPND_E) / horner(r, &PPND_F)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

fn horner(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[allow(clippy::excessive_precision)] // published table digits kept verbatim
const PPND_A: [f64; 8] = [
    3.3871328727963666080,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
#[allow(clippy::excessive_precision)] // published table digits kept verbatim
const PPND_B: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
#[allow(clippy::excessive_precision)] // published table digits kept verbatim
const PPND_C: [f64; 8] = [
    1.42343711074968357734,
    4.63033784615654529590,
    5.76949722146069140550,
    3.64784832476320460504,
    1.27045825245236838258,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
#[allow(clippy::excessive_precision)] // published table digits kept verbatim
const PPND_D: [f64; 8] = [
    1.0,
    2.05319162663775882187,
    1.67638483018380384940,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
#[allow(clippy::excessive_precision)] // published table digits kept verbatim
const PPND_E: [f64; 8] = [
    6.65790464350110377720,
    5.46378491116411436990,
    1.78482653991729133580,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
#[allow(clippy::excessive_precision)] // published table digits kept verbatim
const PPND_F: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-6,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];
