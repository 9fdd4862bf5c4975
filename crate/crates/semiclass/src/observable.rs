//! Phase-space observables `a(q, p)` with optional derivative callbacks, and
//! the ε-corrected symbol `a_ε = a − (ε/4) Δa`.
//!
//! The corrected transport estimator needs, per observable:
//! * the value (always),
//! * the phase-space Laplacian `Δa` (to form `a_ε`),
//! * the gradient and Hessian (to evaluate the Λ/Γ correction term).
//!
//! Partially-specified observables still work with the uncorrected methods;
//! asking the corrected method for a missing derivative is a capability error
//! rather than a silent fallback.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::phase::PhasePoint;
use nalgebra::DMatrix;
use std::sync::Arc;

pub type ValueFn = Arc<dyn Fn(&PhasePoint) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&PhasePoint, &mut [f64]) + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&PhasePoint, &mut DMatrix<f64>) + Send + Sync>;
pub type LaplacianFn = Arc<dyn Fn(&PhasePoint) -> f64 + Send + Sync>;

/// Classification of the built-in observables; lets oracles and reference
/// solvers recognise what a symbol measures without inspecting closures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    Position(usize),
    Momentum(usize),
    Kinetic,
    Potential,
    TotalEnergy,
}

/// A scalar observable on phase space with optional analytic derivatives.
#[derive(Clone)]
pub struct ObservableSymbol {
    name: String,
    dim: usize,
    kind: Option<ObservableKind>,
    value: ValueFn,
    gradient: Option<GradientFn>,
    hessian: Option<HessianFn>,
    laplacian: Option<LaplacianFn>,
}

impl ObservableSymbol {
    /// Observable with value only. Usable by the uncorrected estimators.
    pub fn from_value(name: impl Into<String>, dim: usize, value: ValueFn) -> Self {
        Self {
            name: name.into(),
            dim,
            kind: None,
            value,
            gradient: None,
            hessian: None,
            laplacian: None,
        }
    }

    /// Fully-specified observable (value, gradient, Hessian, Laplacian).
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: ValueFn,
        gradient: GradientFn,
        hessian: HessianFn,
        laplacian: LaplacianFn,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            kind: None,
            value,
            gradient: Some(gradient),
            hessian: Some(hessian),
            laplacian: Some(laplacian),
        }
    }

    fn with_kind(mut self, kind: ObservableKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Spatial dimension `d`; gradients have length `2d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> Option<ObservableKind> {
        self.kind
    }

    pub fn has_derivatives(&self) -> bool {
        self.gradient.is_some() && self.hessian.is_some()
    }

    pub fn has_laplacian(&self) -> bool {
        self.laplacian.is_some()
    }

    /// `a(z)`.
    pub fn eval(&self, z: &PhasePoint) -> f64 {
        (self.value)(z)
    }

    /// `∇a(z)` into `out` (length `2d`, ordered `[∂q, ∂p]`).
    pub fn gradient_into(&self, z: &PhasePoint, out: &mut [f64]) -> Result<()> {
        let g = self.gradient.as_ref().ok_or_else(|| {
            Error::MissingCapability(format!("observable '{}' has no gradient", self.name))
        })?;
        g(z, out);
        Ok(())
    }

    /// `D²a(z)` into `out` (`2d × 2d`).
    pub fn hessian_into(&self, z: &PhasePoint, out: &mut DMatrix<f64>) -> Result<()> {
        let h = self.hessian.as_ref().ok_or_else(|| {
            Error::MissingCapability(format!("observable '{}' has no Hessian", self.name))
        })?;
        h(z, out);
        Ok(())
    }

    /// Phase-space Laplacian `Δa(z) = Σ_i ∂²_{ii} a(z)`.
    pub fn laplacian(&self, z: &PhasePoint) -> Result<f64> {
        let l = self.laplacian.as_ref().ok_or_else(|| {
            Error::MissingCapability(format!("observable '{}' has no Laplacian", self.name))
        })?;
        Ok(l(z))
    }
}

impl std::fmt::Debug for ObservableSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObservableSymbol")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("has_derivatives", &self.has_derivatives())
            .field("has_laplacian", &self.has_laplacian())
            .finish()
    }
}

/// The ε-corrected symbol `a_ε = a − (ε/4) Δa`, value-only.
///
/// The correction flattens the symbol by a quarter-ε multiple of its
/// curvature; with ε = 0 the returned symbol evaluates identically to `a`.
pub fn correct_symbol(a: &ObservableSymbol, epsilon: f64) -> Result<ObservableSymbol> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidInput(format!(
            "epsilon must be non-negative and finite, got {epsilon}"
        )));
    }
    if !a.has_laplacian() {
        return Err(Error::MissingCapability(format!(
            "observable '{}' has no Laplacian; cannot form the corrected symbol",
            a.name
        )));
    }
    let value = a.value.clone();
    let lap = a.laplacian.clone().expect("checked above");
    Ok(ObservableSymbol::from_value(
        a.name.clone(),
        a.dim,
        Arc::new(move |z: &PhasePoint| value(z) - 0.25 * epsilon * lap(z)),
    ))
}

/// The five standard observable families for a model: each position `q_j`,
/// each momentum `p_j`, kinetic energy `|p|²/2`, potential energy `V(q)`, and
/// total energy — all with analytic derivatives.
pub fn builtin_observables(model: &HamiltonianModel) -> Vec<ObservableSymbol> {
    let d = model.dim();
    let mut out = Vec::with_capacity(2 * d + 3);

    for j in 0..d {
        out.push(
            ObservableSymbol::new(
                format!("q{}", j + 1),
                d,
                Arc::new(move |z: &PhasePoint| z.q[j]),
                Arc::new(move |_z: &PhasePoint, g: &mut [f64]| {
                    g.fill(0.0);
                    g[j] = 1.0;
                }),
                Arc::new(move |_z: &PhasePoint, h: &mut DMatrix<f64>| h.fill(0.0)),
                Arc::new(|_z: &PhasePoint| 0.0),
            )
            .with_kind(ObservableKind::Position(j)),
        );
    }
    for j in 0..d {
        out.push(
            ObservableSymbol::new(
                format!("p{}", j + 1),
                d,
                Arc::new(move |z: &PhasePoint| z.p[j]),
                Arc::new(move |_z: &PhasePoint, g: &mut [f64]| {
                    g.fill(0.0);
                    g[d + j] = 1.0;
                }),
                Arc::new(move |_z: &PhasePoint, h: &mut DMatrix<f64>| h.fill(0.0)),
                Arc::new(|_z: &PhasePoint| 0.0),
            )
            .with_kind(ObservableKind::Momentum(j)),
        );
    }

    out.push(
        ObservableSymbol::new(
            "kinetic",
            d,
            Arc::new(|z: &PhasePoint| 0.5 * crate::util::norm_sq(&z.p)),
            Arc::new(move |z: &PhasePoint, g: &mut [f64]| {
                g[..d].fill(0.0);
                g[d..].copy_from_slice(&z.p);
            }),
            Arc::new(move |_z: &PhasePoint, h: &mut DMatrix<f64>| {
                h.fill(0.0);
                for i in 0..d {
                    h[(d + i, d + i)] = 1.0;
                }
            }),
            Arc::new(move |_z: &PhasePoint| d as f64),
        )
        .with_kind(ObservableKind::Kinetic),
    );

    let pot = model.potential().clone();
    out.push(
        ObservableSymbol::new(
            "potential",
            d,
            {
                let pot = pot.clone();
                Arc::new(move |z: &PhasePoint| pot.value(&z.q))
            },
            {
                let pot = pot.clone();
                Arc::new(move |z: &PhasePoint, g: &mut [f64]| {
                    pot.gradient(&z.q, &mut g[..d]);
                    g[d..].fill(0.0);
                })
            },
            {
                let pot = pot.clone();
                Arc::new(move |z: &PhasePoint, h: &mut DMatrix<f64>| {
                    h.fill(0.0);
                    let mut hq = DMatrix::zeros(d, d);
                    pot.hessian(&z.q, &mut hq);
                    for r in 0..d {
                        for c in 0..d {
                            h[(r, c)] = hq[(r, c)];
                        }
                    }
                })
            },
            {
                let pot = pot.clone();
                Arc::new(move |z: &PhasePoint| pot.laplacian(&z.q))
            },
        )
        .with_kind(ObservableKind::Potential),
    );

    let pot = model.potential().clone();
    out.push(
        ObservableSymbol::new(
            "total",
            d,
            {
                let pot = pot.clone();
                Arc::new(move |z: &PhasePoint| {
                    0.5 * crate::util::norm_sq(&z.p) + pot.value(&z.q)
                })
            },
            {
                let pot = pot.clone();
                Arc::new(move |z: &PhasePoint, g: &mut [f64]| {
                    pot.gradient(&z.q, &mut g[..d]);
                    g[d..].copy_from_slice(&z.p);
                })
            },
            {
                let pot = pot.clone();
                Arc::new(move |z: &PhasePoint, h: &mut DMatrix<f64>| {
                    h.fill(0.0);
                    let mut hq = DMatrix::zeros(d, d);
                    pot.hessian(&z.q, &mut hq);
                    for r in 0..d {
                        for c in 0..d {
                            h[(r, c)] = hq[(r, c)];
                        }
                    }
                    for i in 0..d {
                        h[(d + i, d + i)] = 1.0;
                    }
                })
            },
            {
                let pot = pot.clone();
                Arc::new(move |z: &PhasePoint| d as f64 + pot.laplacian(&z.q))
            },
        )
        .with_kind(ObservableKind::TotalEnergy),
    );

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{PotentialExt, TorsionalPotential};
    use approx::assert_abs_diff_eq;

    fn model() -> HamiltonianModel {
        HamiltonianModel::new(TorsionalPotential::new(2).into_shared(), 0.1).unwrap()
    }

    fn zpt(q: &[f64], p: &[f64]) -> PhasePoint {
        PhasePoint::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn builtin_names_and_count() {
        let obs = builtin_observables(&model());
        let names: Vec<&str> = obs.iter().map(|o| o.name()).collect();
        assert_eq!(names, vec!["q1", "q2", "p1", "p2", "kinetic", "potential", "total"]);
        assert!(obs.iter().all(|o| o.has_derivatives() && o.has_laplacian()));
    }

    #[test]
    fn builtin_derivatives_match_finite_differences() {
        let obs = builtin_observables(&model());
        let z = zpt(&[0.8, -0.4], &[0.3, 1.1]);
        let h = 1e-6;
        for o in &obs {
            let mut g = vec![0.0; 4];
            o.gradient_into(&z, &mut g).unwrap();
            let mut hess = DMatrix::zeros(4, 4);
            o.hessian_into(&z, &mut hess).unwrap();
            for i in 0..4 {
                let mut flat_p = z.to_flat();
                let mut flat_m = z.to_flat();
                flat_p[i] += h;
                flat_m[i] -= h;
                let zp = PhasePoint::from_flat(&flat_p).unwrap();
                let zm = PhasePoint::from_flat(&flat_m).unwrap();
                assert_abs_diff_eq!(g[i], (o.eval(&zp) - o.eval(&zm)) / (2.0 * h), epsilon = 1e-8);
                // Hessian row i from gradient differences.
                let mut gp = vec![0.0; 4];
                let mut gm = vec![0.0; 4];
                o.gradient_into(&zp, &mut gp).unwrap();
                o.gradient_into(&zm, &mut gm).unwrap();
                for k in 0..4 {
                    assert_abs_diff_eq!(
                        hess[(k, i)],
                        (gp[k] - gm[k]) / (2.0 * h),
                        epsilon = 1e-8
                    );
                }
            }
            // Laplacian equals Hessian trace.
            assert_abs_diff_eq!(o.laplacian(&z).unwrap(), hess.trace(), epsilon = 1e-12);
        }
    }

    #[test]
    fn total_is_sum_of_kinetic_and_potential() {
        let obs = builtin_observables(&model());
        let z = zpt(&[0.5, 0.2], &[-0.7, 0.9]);
        let val = |name: &str| obs.iter().find(|o| o.name() == name).unwrap().eval(&z);
        assert_abs_diff_eq!(val("total"), val("kinetic") + val("potential"), epsilon = 1e-14);
    }

    #[test]
    fn corrected_symbol_shifts_by_quarter_epsilon_laplacian() {
        let obs = builtin_observables(&model());
        let z = zpt(&[0.3, -0.9], &[0.1, 0.4]);
        let eps = 0.07;
        for o in &obs {
            let oc = correct_symbol(o, eps).unwrap();
            let expect = o.eval(&z) - 0.25 * eps * o.laplacian(&z).unwrap();
            assert_abs_diff_eq!(oc.eval(&z), expect, epsilon = 1e-14);
            assert_eq!(oc.name(), o.name());
        }
    }

    #[test]
    fn corrected_symbol_with_zero_epsilon_is_identity() {
        let obs = builtin_observables(&model());
        let z = zpt(&[1.2, 0.6], &[-0.2, 0.8]);
        for o in &obs {
            let oc = correct_symbol(o, 0.0).unwrap();
            assert_eq!(oc.eval(&z), o.eval(&z));
        }
    }

    #[test]
    fn corrected_symbol_is_linear_in_the_observable() {
        // a_ε is linear: (αa + βb)_ε = α a_ε + β b_ε.
        let m = model();
        let obs = builtin_observables(&m);
        let (a, b) = (obs[4].clone(), obs[5].clone()); // kinetic, potential
        let (alpha, beta) = (1.7, -0.35);
        let av = a.value.clone();
        let bv = b.value.clone();
        let al = a.laplacian.clone().unwrap();
        let bl = b.laplacian.clone().unwrap();
        let combo = ObservableSymbol {
            name: "combo".into(),
            dim: 2,
            kind: None,
            value: Arc::new(move |z: &PhasePoint| alpha * av(z) + beta * bv(z)),
            gradient: None,
            hessian: None,
            laplacian: Some(Arc::new(move |z: &PhasePoint| alpha * al(z) + beta * bl(z))),
        };
        let eps = 0.05;
        let cc = correct_symbol(&combo, eps).unwrap();
        let ca = correct_symbol(&a, eps).unwrap();
        let cb = correct_symbol(&b, eps).unwrap();
        for zz in [zpt(&[0.0, 0.0], &[0.0, 0.0]), zpt(&[0.7, -1.1], &[0.25, 0.5])] {
            assert_abs_diff_eq!(
                cc.eval(&zz),
                alpha * ca.eval(&zz) + beta * cb.eval(&zz),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn missing_capabilities_are_reported() {
        let bare = ObservableSymbol::from_value("bare", 1, Arc::new(|z: &PhasePoint| z.q[0]));
        let z = zpt(&[1.0], &[0.0]);
        assert_eq!(bare.eval(&z), 1.0);
        let mut g = vec![0.0; 2];
        assert!(matches!(
            bare.gradient_into(&z, &mut g),
            Err(Error::MissingCapability(_))
        ));
        assert!(matches!(bare.laplacian(&z), Err(Error::MissingCapability(_))));
        assert!(matches!(correct_symbol(&bare, 0.1), Err(Error::MissingCapability(_))));
    }
}
