//! Phase-space points and the standard symplectic structure.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// A point `z = (q, p)` in the phase space `R^d × R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                got: p.len(),
            });
        }
        if q.is_empty() {
            return Err(Error::InvalidInput("phase space dimension must be positive".into()));
        }
        Ok(Self { q, p })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            q: vec![0.0; d],
            p: vec![0.0; d],
        }
    }

    /// Spatial dimension `d` (the phase space has dimension `2d`).
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Build from a flat `[q, p]` slice of length `2d`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) || flat.is_empty() {
            return Err(Error::InvalidInput(format!(
                "flat phase vector must have positive even length, got {}",
                flat.len()
            )));
        }
        let d = flat.len() / 2;
        Ok(Self {
            q: flat[..d].to_vec(),
            p: flat[d..].to_vec(),
        })
    }

    /// Flatten to `[q_1..q_d, p_1..p_d]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.dim());
        out.extend_from_slice(&self.q);
        out.extend_from_slice(&self.p);
        out
    }

    /// Squared phase-space distance `|z - w|²`.
    pub fn dist_sq(&self, other: &PhasePoint) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Squared norm `|z|²`.
    pub fn norm_sq(&self) -> f64 {
        crate::util::norm_sq(&self.q) + crate::util::norm_sq(&self.p)
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }
}

/// The canonical symplectic structure `J = [[0, I], [-I, 0]]` on `R^{2d}`,
/// acting on `(q, p)` as `J(q, p) = (p, -q)`.
#[derive(Debug, Clone, Copy)]
pub struct SymplecticStructure {
    d: usize,
}

impl SymplecticStructure {
    pub fn new(d: usize) -> Self {
        Self { d }
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// `J z`.
    pub fn apply(&self, z: &PhasePoint) -> PhasePoint {
        PhasePoint {
            q: z.p.clone(),
            p: z.q.iter().map(|x| -x).collect(),
        }
    }

    /// The symplectic pairing `σ(a, b) = (J a) · b = a_p·b_q − a_q·b_p`.
    pub fn pairing(&self, a: &PhasePoint, b: &PhasePoint) -> f64 {
        crate::util::dot(&a.p, &b.q) - crate::util::dot(&a.q, &b.p)
    }

    /// Dense `2d × 2d` matrix representation.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut j = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            j[(i, d + i)] = 1.0;
            j[(d + i, i)] = -1.0;
        }
        j
    }
}
