//! The disturbed discrete-time plant `x(t+1) = A x(t) + B u(t) + d(t)`
//! with disturbance sources bounded in norm by D.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{EtpcError, Result};
use crate::linalg::{Mat, Vector};

/// A norm-bounded disturbance sequence. Every source is a pure function of
/// (its parameters, t), so trajectory rollouts are reproducible and can run
/// in parallel.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSource {
    Zero { dim: usize },
    /// `d_i(t) = amplitude_i * sin(frequency_i * t)`, arguments in radians.
    Sinusoid {
        amplitude: Vector,
        frequency: Vector,
    },
    /// Uniform sample from the ball of radius `bound`, derived from
    /// (seed, t) through a counter-seeded ChaCha8 stream.
    UniformBall { dim: usize, bound: f64, seed: u64 },
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl DisturbanceSource {
    pub fn dim(&self) -> usize {
        match self {
            DisturbanceSource::Zero { dim } => *dim,
            DisturbanceSource::Sinusoid { amplitude, .. } => amplitude.len(),
            DisturbanceSource::UniformBall { dim, .. } => *dim,
        }
    }

    /// The disturbance at time index t.
    pub fn disturbance_at(&self, t: usize) -> Vector {
        match self {
            DisturbanceSource::Zero { dim } => Vector::zeros(*dim),
            DisturbanceSource::Sinusoid {
                amplitude,
                frequency,
            } => Vector::from_fn(amplitude.len(), |i, _| {
                amplitude[i] * (frequency[i] * t as f64).sin()
            }),
            DisturbanceSource::UniformBall { dim, bound, seed } => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(splitmix64(seed.wrapping_add(splitmix64(t as u64))));
                let mut v = Vector::from_fn(*dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = v.norm();
                if norm == 0.0 {
                    return Vector::zeros(*dim);
                }
                let u: f64 = rng.random();
                let radius = bound * u.powf(1.0 / *dim as f64);
                v *= radius / norm;
                v
            }
        }
    }

    /// The tightest bound D this source is guaranteed to respect.
    pub fn norm_bound(&self) -> f64 {
        match self {
            DisturbanceSource::Zero { .. } => 0.0,
            DisturbanceSource::Sinusoid { amplitude, .. } => amplitude.norm(),
            DisturbanceSource::UniformBall { bound, .. } => *bound,
        }
    }
}

/// The plant: matrices A (n x n), B (n x m), disturbance bound D and the
/// disturbance source.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub a: Mat,
    pub b: Mat,
    pub d_bound: f64,
    pub disturbance: DisturbanceSource,
}

impl SystemModel {
    pub fn new(a: Mat, b: Mat, d_bound: f64, disturbance: DisturbanceSource) -> Result<Self> {
        if !a.is_square() {
            return Err(EtpcError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if b.nrows() != a.nrows() {
            return Err(EtpcError::DimensionMismatch {
                context: format!("B has {} rows, A is {1}x{1}", b.nrows(), a.nrows()),
            });
        }
        if d_bound < 0.0 {
            return Err(EtpcError::InvalidParameter {
                context: format!("disturbance bound D = {d_bound} must be nonnegative"),
            });
        }
        if disturbance.dim() != a.nrows() {
            return Err(EtpcError::DimensionMismatch {
                context: format!(
                    "disturbance dimension {} does not match state dimension {}",
                    disturbance.dim(),
                    a.nrows()
                ),
            });
        }
        if disturbance.norm_bound() > d_bound + 1e-15 {
            return Err(EtpcError::InvalidParameter {
                context: format!(
                    "disturbance source bound {} exceeds configured D = {}",
                    disturbance.norm_bound(),
                    d_bound
                ),
            });
        }
        Ok(SystemModel {
            a,
            b,
            d_bound,
            disturbance,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// One step of the plant: `A x + B u + d(t)`.
    pub fn step(&self, x: &Vector, u: &Vector, t: usize) -> Result<Vector> {
        if x.len() != self.state_dim() || u.len() != self.input_dim() {
            return Err(EtpcError::DimensionMismatch {
                context: format!(
                    "step: x has {} entries (need {}), u has {} (need {})",
                    x.len(),
                    self.state_dim(),
                    u.len(),
                    self.input_dim()
                ),
            });
        }
        Ok(&self.a * x + &self.b * u + self.disturbance.disturbance_at(t))
    }
}

/// The Example-1 sinusoid `(0.01/sqrt(3)) [sin(50t), sin(20t), sin(10t)]`.
pub fn example1_disturbance() -> DisturbanceSource {
    let amp = 0.01 / 3.0f64.sqrt();
    DisturbanceSource::Sinusoid {
        amplitude: Vector::from_column_slice(&[amp, amp, amp]),
        frequency: Vector::from_column_slice(&[50.0, 20.0, 10.0]),
    }
}
