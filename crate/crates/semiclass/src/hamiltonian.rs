//! The classical Hamiltonian `h(z) = |p|²/2 + V(q)` and its ε-corrected
//! companion `h_ε(z) = h(z) − (ε/4)(d + ΔV(q))`.
//!
//! Transporting phase-space samples with the flow of `h_ε` instead of `h` is
//! what upgrades the naive particle estimator from O(ε) to O(ε²) accuracy; the
//! `(ε/4)(d + ΔV)` term is the subprincipal correction of the Weyl symbol of
//! the Hamiltonian operator acting on phase-space densities.

use crate::error::{Error, Result};
use crate::phase::PhasePoint;
use crate::potential::SharedPotential;

/// Which Hamiltonian drives the classical transport.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceField {
    /// Flow of `h_ε`: force `−∇V + (ε/4)∇(ΔV)`. The default.
    Corrected,
    /// Flow of the bare `h`: force `−∇V`. Used by the uncorrected estimator
    /// and for like-for-like comparisons.
    Plain,
}

impl ForceField {
    /// Parse the identifiers used in config files: `h_eps` or `h`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "h_eps" => Ok(Self::Corrected),
            "h" => Ok(Self::Plain),
            other => Err(Error::InvalidInput(format!(
                "unknown force field '{other}' (expected 'h_eps' or 'h')"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Corrected => "h_eps",
            Self::Plain => "h",
        }
    }
}

/// A potential paired with a semiclassical parameter ε.
#[derive(Clone)]
pub struct HamiltonianModel {
    potential: SharedPotential,
    epsilon: f64,
}

impl HamiltonianModel {
    pub fn new(potential: SharedPotential, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self { potential, epsilon })
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn potential(&self) -> &SharedPotential {
        &self.potential
    }

    /// Same potential, different ε.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.potential.clone(), epsilon)
    }

    /// `h(z) = |p|²/2 + V(q)`.
    pub fn h(&self, z: &PhasePoint) -> f64 {
        0.5 * crate::util::norm_sq(&z.p) + self.potential.value(&z.q)
    }

    /// `h_ε(z) = h(z) − (ε/4)(d + ΔV(q))`.
    pub fn h_eps(&self, z: &PhasePoint) -> f64 {
        self.h(z) - 0.25 * self.epsilon * self.laplacian_h(&z.q)
    }

    /// `Δh(q) = d + ΔV(q)` (phase-space Laplacian of `h`).
    pub fn laplacian_h(&self, q: &[f64]) -> f64 {
        self.dim() as f64 + self.potential.laplacian(q)
    }

    /// Gradient of `h_ε`: `(∇V − (ε/4)∇(ΔV), p)` written into `(out_q, out_p)`.
    pub fn grad_h_eps(&self, z: &PhasePoint, out_q: &mut [f64], out_p: &mut [f64]) {
        self.potential.gradient(&z.q, out_q);
        let d = self.dim();
        let mut lg = vec![0.0; d];
        self.potential.laplacian_gradient(&z.q, &mut lg);
        for (o, l) in out_q.iter_mut().zip(&lg) {
            *o -= 0.25 * self.epsilon * l;
        }
        out_p.copy_from_slice(&z.p);
    }

    /// The force `ṗ = −∂_q h` for the selected field, written into `out`.
    pub fn force_into(&self, q: &[f64], field: ForceField, out: &mut [f64]) {
        self.potential.gradient(q, out);
        match field {
            ForceField::Plain => {
                for o in out.iter_mut() {
                    *o = -*o;
                }
            }
            ForceField::Corrected => {
                let d = self.dim();
                let mut lg = vec![0.0; d];
                self.potential.laplacian_gradient(q, &mut lg);
                for (o, l) in out.iter_mut().zip(&lg) {
                    *o = -*o + 0.25 * self.epsilon * l;
                }
            }
        }
    }

    /// Hamiltonian vector field `ż = J ∇h` for the selected force:
    /// `q̇ = p`, `ṗ = force(q)`.
    pub fn vector_field(
        &self,
        z: &PhasePoint,
        field: ForceField,
        out_q: &mut [f64],
        out_p: &mut [f64],
    ) {
        out_q.copy_from_slice(&z.p);
        self.force_into(&z.q, field, out_p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{PotentialExt, TorsionalPotential};
    use approx::assert_abs_diff_eq;

    fn torsional_model(d: usize, eps: f64) -> HamiltonianModel {
        HamiltonianModel::new(TorsionalPotential::new(d).into_shared(), eps).unwrap()
    }

    #[test]
    fn corrected_energy_torsional_example() {
        // d=2, ε=0.1, z=((π/2, 0), (0, 0)):
        //   h   = 2 − cos(π/2) − cos 0 = 1
        //   Δh  = 2 + cos(π/2) + cos 0 = 3
        //   h_ε = 1 − 0.025·3 = 0.925
        let m = torsional_model(2, 0.1);
        let z = PhasePoint::new(vec![std::f64::consts::FRAC_PI_2, 0.0], vec![0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(m.h(&z), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.h_eps(&z), 0.925, epsilon = 1e-15);
    }

    #[test]
    fn corrected_gradient_torsional_example() {
        // Same point: ∂_q h_ε = sin q + (ε/4) sin q = 1.025 · sin q.
        let m = torsional_model(2, 0.1);
        let z = PhasePoint::new(vec![std::f64::consts::FRAC_PI_2, 0.0], vec![0.0, 0.0]).unwrap();
        let mut gq = vec![0.0; 2];
        let mut gp = vec![0.0; 2];
        m.grad_h_eps(&z, &mut gq, &mut gp);
        assert_abs_diff_eq!(gq[0], 1.025, epsilon = 1e-15);
        assert_abs_diff_eq!(gq[1], 0.0, epsilon = 1e-15);
        assert_eq!(gp, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_difference_of_h_eps() {
        let m = torsional_model(2, 0.07);
        let z = PhasePoint::new(vec![0.8, -0.3], vec![0.5, 1.1]).unwrap();
        let mut gq = vec![0.0; 2];
        let mut gp = vec![0.0; 2];
        m.grad_h_eps(&z, &mut gq, &mut gp);
        let h = 1e-6;
        for i in 0..2 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp.q[i] += h;
            zm.q[i] -= h;
            assert_abs_diff_eq!(gq[i], (m.h_eps(&zp) - m.h_eps(&zm)) / (2.0 * h), epsilon = 1e-8);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp.p[i] += h;
            zm.p[i] -= h;
            assert_abs_diff_eq!(gp[i], (m.h_eps(&zp) - m.h_eps(&zm)) / (2.0 * h), epsilon = 1e-8);
        }
    }

    #[test]
    fn vector_field_is_j_times_gradient() {
        let m = torsional_model(2, 0.05);
        let z = PhasePoint::new(vec![0.4, 1.2], vec![-0.6, 0.2]).unwrap();
        let mut fq = vec![0.0; 2];
        let mut fp = vec![0.0; 2];
        m.vector_field(&z, ForceField::Corrected, &mut fq, &mut fp);
        let mut gq = vec![0.0; 2];
        let mut gp = vec![0.0; 2];
        m.grad_h_eps(&z, &mut gq, &mut gp);
        // J ∇h = (∂_p h, −∂_q h)
        for i in 0..2 {
            assert_abs_diff_eq!(fq[i], gp[i], epsilon = 1e-15);
            assert_abs_diff_eq!(fp[i], -gq[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn plain_force_drops_the_correction() {
        let m = torsional_model(1, 0.1);
        let q = [std::f64::consts::FRAC_PI_2];
        let mut f = vec![0.0; 1];
        m.force_into(&q, ForceField::Plain, &mut f);
        assert_abs_diff_eq!(f[0], -1.0, epsilon = 1e-15);
        m.force_into(&q, ForceField::Corrected, &mut f);
        assert_abs_diff_eq!(f[0], -1.025, epsilon = 1e-15);
    }

    #[test]
    fn force_field_labels_round_trip() {
        for f in [ForceField::Corrected, ForceField::Plain] {
            assert_eq!(ForceField::parse(f.label()).unwrap(), f);
        }
        assert!(ForceField::parse("verlet").is_err());
    }

    #[test]
    fn epsilon_must_be_positive() {
        let p = TorsionalPotential::new(1).into_shared();
        assert!(HamiltonianModel::new(p.clone(), 0.0).is_err());
        assert!(HamiltonianModel::new(p.clone(), -0.1).is_err());
        assert!(HamiltonianModel::new(p, f64::NAN).is_err());
    }
}
