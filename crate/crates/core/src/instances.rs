//! Seeded random constructions.
//!
//! Every generator draws from [`ChaCha8Rng`] seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`, so a seed fixes the instance on every
//! platform.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::TruncationGrid;
use crate::hardy::{HardyElement, InnerFunction};
use crate::numkernel::CMatrix;
use crate::theorems::Factor;
use crate::C64;

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point of the disc `|z| ≤ max_modulus`.
pub fn disc_point<R: Rng>(rng: &mut R, max_modulus: f64) -> C64 {
    let r = max_modulus * rng.random::<f64>().sqrt();
    C64::from_polar(r, 2.0 * PI * rng.random::<f64>())
}

pub fn unimodular<R: Rng>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
}

/// Re and Im uniform in `[-1, 1]`.
pub fn unit_box<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
}

/// `count` points of the disc with pairwise distance at least `min_sep`, by
/// rejection.
pub fn separated_points<R: Rng>(rng: &mut R, count: usize, max_modulus: f64, min_sep: f64) -> Result<Vec<C64>> {
    let mut out: Vec<C64> = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::DomainError(format!(
                "cannot place {count} points with separation {min_sep} in radius {max_modulus}"
            )));
        }
        let p = disc_point(rng, max_modulus);
        if out.iter().all(|q| (p - q).norm() >= min_sep) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Polynomial with every grid coefficient drawn from [`unit_box`].
pub fn polynomial<R: Rng>(rng: &mut R, grid: &TruncationGrid) -> HardyElement {
    let coeffs = (0..grid.size()).map(|_| unit_box(rng)).collect();
    HardyElement::new(grid.clone(), coeffs).expect("sized to the grid")
}

/// Blaschke product in `var` with `1..=max_zeros` zeros of modulus at most
/// `max_modulus`.
pub fn blaschke<R: Rng>(
    rng: &mut R,
    grid: &TruncationGrid,
    var: usize,
    max_zeros: usize,
    max_modulus: f64,
) -> Result<InnerFunction> {
    let count = rng.random_range(1..=max_zeros.max(1));
    let zeros = (0..count).map(|_| disc_point(rng, max_modulus)).collect();
    InnerFunction::blaschke(grid, var, zeros)
}

/// Random square matrix with orthonormal columns.
pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| unit_box(rng));
    a.qr().q()
}

/// Data of a constructed mixed invariant subspace
/// `Θ H^2(D^k) ⊗ Q_1 ⊗ … ⊗ Q_{n−k}`.
#[derive(Clone, Debug)]
pub struct MixedInstance {
    pub grid: TruncationGrid,
    pub k: usize,
    pub theta: InnerFunction,
    pub factors: Vec<Factor>,
}

/// Parameters of [`mixed_instance`].
#[derive(Clone, Debug)]
pub struct MixedParams {
    pub max_theta_zeros: usize,
    pub max_factor_zeros: usize,
    pub max_modulus: f64,
    /// Minimum distance between distinct zeros of one factor.
    pub min_separation: f64,
    /// Probability that a factor gets one doubled zero.
    pub repeat_probability: f64,
}

impl Default for MixedParams {
    fn default() -> Self {
        MixedParams {
            max_theta_zeros: 3,
            max_factor_zeros: 3,
            max_modulus: 0.6,
            min_separation: 0.1,
            repeat_probability: 0.25,
        }
    }
}

/// `Θ` is a product of one-variable Blaschke products, one per leading
/// variable; each trailing factor is a model space with separated zeros.
pub fn mixed_instance<R: Rng>(rng: &mut R, grid: &TruncationGrid, k: usize, p: &MixedParams) -> Result<MixedInstance> {
    let n = grid.nvars();
    if k == 0 || k >= n {
        return Err(Error::DomainError(format!("split {k} on {n} variables")));
    }
    let mut parts = Vec::with_capacity(k);
    for var in 0..k {
        parts.push(blaschke(rng, grid, var, p.max_theta_zeros, p.max_modulus)?);
    }
    let theta = if parts.len() == 1 { parts.pop().expect("one part") } else { InnerFunction::tensor(grid, parts)? };
    let mut factors = Vec::with_capacity(n - k);
    for var in k..n {
        let cap = grid.cap(var);
        let count = rng.random_range(1..=p.max_factor_zeros.min(cap).max(1));
        let mut zeros = separated_points(rng, count, p.max_modulus, p.min_separation)?;
        if zeros.len() < cap && rng.random::<f64>() < p.repeat_probability {
            let z = zeros[0];
            zeros.push(z);
        }
        factors.push(Factor::Model { zeros });
    }
    Ok(MixedInstance { grid: grid.clone(), k, theta, factors })
}
