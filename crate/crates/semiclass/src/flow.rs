//! Classical transport: the 6th-order symplectic flow for leading-order
//! trajectories, and the Strang-split integrator for the correction ODEs.
//!
//! Along a trajectory `Φ^t(z0)` of the (corrected) Hamiltonian flow, the
//! second-order correction to transported expectation values is assembled
//! from a matrix ODE and a vector ODE driven by the curvature of the *bare*
//! Hamiltonian evaluated along the trajectory:
//!
//! * `Λ' = M + MΛ + ΛMᵀ`, `Λ(0) = 0`, with `M(q) = J·D²h = [[0, I], [−D²V(q), 0]]`;
//! * `Γ' = MΓ + c(Λ)`, `Γ(0) = 0`, where the momentum components of `c` are
//!   contractions of third potential derivatives with the position block of Λ:
//!   `c_{d+i} = −Σ_{jk} ∂³V/∂q_i∂q_j∂q_k · Λ_{jk}`.
//!
//! The integrator splits each step into a frozen-coefficient affine update of
//! `(p, Λ, Γ)` (half step), an exact position drift (full step), and a second
//! affine half update — a Strang composition whose `(q, p)` part is exactly
//! Störmer–Verlet. Each affine half-step is realized with one Heun (explicit
//! trapezoid) update: with frozen coefficients the momentum field is constant,
//! so Heun leaves `(q, p)` untouched relative to the leapfrog while making the
//! `(Λ, Γ)` update second-order accurate, which the whole composition needs to
//! be globally second order.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::phase::PhasePoint;
use nalgebra::{DMatrix, DVector};

pub use crate::hamiltonian::ForceField;

/// `out += a · x` for dynamically sized matrices (the BLAS-style `axpy` in
/// nalgebra is defined for vectors only).
fn mat_axpy(out: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    out.zip_apply(x, |o, v| *o += a * v);
}

// ---------------------------------------------------------------------------
// Row-wise vectorization and Kronecker products
// ---------------------------------------------------------------------------

/// Row-wise vectorization: `vec(A)[i·cols + j] = A[i, j]`.
pub fn vec_rowwise(m: &DMatrix<f64>) -> DVector<f64> {
    let (rows, cols) = m.shape();
    DVector::from_fn(rows * cols, |k, _| m[(k / cols, k % cols)])
}

/// Inverse of [`vec_rowwise`].
pub fn unvec_rowwise(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), rows * cols);
    DMatrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Coefficient matrices
// ---------------------------------------------------------------------------

/// `M(q) = J·D²h(q) = [[0, I], [−K, 0]]` with `K` the potential Hessian:
/// the bare Hessian for [`ForceField::Plain`], or the Hessian of
/// `V − (ε/4)ΔV` for [`ForceField::Corrected`].
///
/// The correction ODEs are driven by the **bare** variant even when the
/// trajectory itself follows the corrected flow; the corrected variant is the
/// linearization matrix of the corrected flow (used by the variational
/// oracle below).
pub fn jacobian_coefficient(model: &HamiltonianModel, q: &[f64], field: ForceField) -> DMatrix<f64> {
    let d = model.dim();
    let mut k = DMatrix::zeros(d, d);
    model.potential().hessian(q, &mut k);
    if field == ForceField::Corrected {
        let mut lh = DMatrix::zeros(d, d);
        model.potential().laplacian_hessian(q, &mut lh);
        k -= lh * (0.25 * model.epsilon());
    }
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        m[(i, d + i)] = 1.0;
        for j in 0..d {
            m[(d + i, j)] = -k[(i, j)];
        }
    }
    m
}

/// The third-derivative coupling matrices `C_1, ..., C_{2d}` at `q`: all zero
/// except that for `i > d` the position block is
/// `(C_{d+r})_{jk} = −∂³V/∂q_r∂q_j∂q_k`. Only the non-trivial `d` slices are
/// returned (index `r` ↔ component `d + r`).
pub fn third_derivative_slices(model: &HamiltonianModel, q: &[f64]) -> Vec<DMatrix<f64>> {
    let d = model.dim();
    let mut out = Vec::with_capacity(d);
    for r in 0..d {
        let mut t = DMatrix::zeros(d, d);
        model.potential().third_derivative(q, r, &mut t);
        out.push(-t);
    }
    out
}

// ---------------------------------------------------------------------------
// Correction state and its Strang integrator
// ---------------------------------------------------------------------------

/// Trajectory state transported by the correction integrator: the phase point
/// plus the auxiliary tensors `Λ ∈ R^{2d×2d}` and `Γ ∈ R^{2d}`.
#[derive(Debug, Clone)]
pub struct CorrectionState {
    pub z: PhasePoint,
    pub lambda: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub time: f64,
}

impl CorrectionState {
    /// Initial data: `Λ(0) = 0`, `Γ(0) = 0`.
    pub fn new(z0: PhasePoint) -> Self {
        let d2 = 2 * z0.dim();
        Self {
            z: z0,
            lambda: DMatrix::zeros(d2, d2),
            gamma: DVector::zeros(d2),
            time: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite()
            && self.lambda.iter().all(|x| x.is_finite())
            && self.gamma.iter().all(|x| x.is_finite())
    }
}

/// The split-vector view of a [`CorrectionState`]: the first group collects
/// everything updated by the frozen-coefficient affine half-steps
/// (`p`, row-wise `vec Λ`, `Γ`), the second group the position drift.
#[derive(Debug, Clone)]
pub struct SplitVector {
    /// `[p (d) | vec Λ (4d²) | Γ (2d)]`
    pub affine_part: DVector<f64>,
    /// `[q (d)]`
    pub drift_part: DVector<f64>,
}

impl SplitVector {
    pub fn from_state(s: &CorrectionState) -> Self {
        let d = s.z.dim();
        let d2 = 2 * d;
        let mut affine = DVector::zeros(d + 4 * d * d + d2);
        affine.rows_mut(0, d).copy_from_slice(&s.z.p);
        affine
            .rows_mut(d, 4 * d * d)
            .copy_from(&vec_rowwise(&s.lambda));
        affine.rows_mut(d + 4 * d * d, d2).copy_from(&s.gamma);
        Self {
            affine_part: affine,
            drift_part: DVector::from_row_slice(&s.z.q),
        }
    }

    pub fn to_state(&self, time: f64) -> CorrectionState {
        let d = self.drift_part.len();
        let d2 = 2 * d;
        let p = self.affine_part.rows(0, d).iter().copied().collect();
        let lambda = unvec_rowwise(
            &self.affine_part.rows(d, 4 * d * d).into_owned(),
            d2,
            d2,
        );
        let gamma = self.affine_part.rows(d + 4 * d * d, d2).into_owned();
        CorrectionState {
            z: PhasePoint::new(self.drift_part.iter().copied().collect(), p)
                .expect("consistent dimensions"),
            lambda,
            gamma,
            time,
        }
    }
}

/// Reusable integrator for [`CorrectionState`] trajectories (owns scratch
/// buffers so per-step allocation stays out of the hot loop).
pub struct CorrectionPropagator<'a> {
    model: &'a HamiltonianModel,
    force: ForceField,
    q_bound: f64,
    m: DMatrix<f64>,
    mt: DMatrix<f64>,
    thirds: Vec<DMatrix<f64>>,
    f: Vec<f64>,
    // Heun stage storage
    r1_l: DMatrix<f64>,
    r2_l: DMatrix<f64>,
    mid_l: DMatrix<f64>,
    tmp: DMatrix<f64>,
    r1_g: DVector<f64>,
    r2_g: DVector<f64>,
    mid_g: DVector<f64>,
}

/// `out = M·Λ + Λ·Mᵀ + M` (`tmp` is scratch).
fn lambda_rhs_into(
    m: &DMatrix<f64>,
    mt: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    tmp: &mut DMatrix<f64>,
    out: &mut DMatrix<f64>,
) {
    out.gemm(1.0, m, lambda, 0.0);
    tmp.gemm(1.0, lambda, mt, 0.0);
    *out += &*tmp;
    *out += m;
}

/// `out = M·Γ + c(Λ)` with `c_{d+r} = Σ_{jk} (C_{d+r})_{jk} Λ_{jk}` (the
/// slices already carry the minus sign of the third derivatives).
fn gamma_rhs_into(
    d: usize,
    m: &DMatrix<f64>,
    thirds: &[DMatrix<f64>],
    lambda: &DMatrix<f64>,
    gamma: &DVector<f64>,
    out: &mut DVector<f64>,
) {
    out.gemv(1.0, m, gamma, 0.0);
    for (r, c_slice) in thirds.iter().enumerate() {
        let mut acc = 0.0;
        for j in 0..d {
            for k in 0..d {
                acc += c_slice[(j, k)] * lambda[(j, k)];
            }
        }
        out[d + r] += acc;
    }
}

/// Default guard: a trajectory leaving `|q|_∞ or |p|_∞ > 1e3` (or any
/// non-finite value) is reported as unstable instead of polluting averages.
pub const DEFAULT_Q_BOUND: f64 = 1e3;

impl<'a> CorrectionPropagator<'a> {
    pub fn new(model: &'a HamiltonianModel, force: ForceField) -> Self {
        Self::with_bound(model, force, DEFAULT_Q_BOUND)
    }

    pub fn with_bound(model: &'a HamiltonianModel, force: ForceField, q_bound: f64) -> Self {
        let d = model.dim();
        let d2 = 2 * d;
        Self {
            model,
            force,
            q_bound,
            m: DMatrix::zeros(d2, d2),
            mt: DMatrix::zeros(d2, d2),
            thirds: (0..d).map(|_| DMatrix::zeros(d, d)).collect(),
            f: vec![0.0; d],
            r1_l: DMatrix::zeros(d2, d2),
            r2_l: DMatrix::zeros(d2, d2),
            mid_l: DMatrix::zeros(d2, d2),
            tmp: DMatrix::zeros(d2, d2),
            r1_g: DVector::zeros(d2),
            r2_g: DVector::zeros(d2),
            mid_g: DVector::zeros(d2),
        }
    }

    /// Refresh `M`, `Mᵀ`, the third-derivative slices, and the force at `q`.
    fn load_coefficients(&mut self, q: &[f64]) {
        let d = self.model.dim();
        let mut k = DMatrix::zeros(d, d);
        self.model.potential().hessian(q, &mut k);
        self.m.fill(0.0);
        for i in 0..d {
            self.m[(i, d + i)] = 1.0;
            for j in 0..d {
                self.m[(d + i, j)] = -k[(i, j)];
            }
        }
        self.mt.tr_copy_from(&self.m);
        for (r, t) in self.thirds.iter_mut().enumerate() {
            self.model.potential().third_derivative(q, r, t);
            t.neg_mut();
        }
        self.model.force_into(q, self.force, &mut self.f);
    }

    /// Affine half-step of size `s` at frozen `q` (coefficients already
    /// loaded): one Heun update of `(Λ, Γ)`, exact update of `p`.
    fn affine_half_step(&mut self, state: &mut CorrectionState, s: f64) {
        let d = self.model.dim();
        // Stage 1 at the current state.
        lambda_rhs_into(&self.m, &self.mt, &state.lambda, &mut self.tmp, &mut self.r1_l);
        gamma_rhs_into(d, &self.m, &self.thirds, &state.lambda, &state.gamma, &mut self.r1_g);
        // Prediction at s.
        self.mid_l.copy_from(&state.lambda);
        mat_axpy(&mut self.mid_l, s, &self.r1_l);
        self.mid_g.copy_from(&state.gamma);
        self.mid_g.axpy(s, &self.r1_g, 1.0);
        // Stage 2 at the prediction (same frozen coefficients).
        lambda_rhs_into(&self.m, &self.mt, &self.mid_l, &mut self.tmp, &mut self.r2_l);
        gamma_rhs_into(d, &self.m, &self.thirds, &self.mid_l, &self.mid_g, &mut self.r2_g);
        // Trapezoid combination.
        mat_axpy(&mut state.lambda, 0.5 * s, &self.r1_l);
        mat_axpy(&mut state.lambda, 0.5 * s, &self.r2_l);
        state.gamma.axpy(0.5 * s, &self.r1_g, 1.0);
        state.gamma.axpy(0.5 * s, &self.r2_g, 1.0);
        // Momentum: the field is constant at frozen q, so Heun degenerates to
        // the exact half-kick of Störmer–Verlet.
        for (p, f) in state.z.p.iter_mut().zip(&self.f) {
            *p += s * f;
        }
    }

    /// One Strang step of size `h`: affine half-step, position drift, affine
    /// half-step (coefficients refreshed at the drifted position).
    pub fn step(&mut self, state: &mut CorrectionState, h: f64) -> Result<()> {
        let q0 = state.z.q.clone();
        self.load_coefficients(&q0);
        self.affine_half_step(state, 0.5 * h);
        for (q, p) in state.z.q.iter_mut().zip(&state.z.p) {
            *q += h * p;
        }
        let q1 = state.z.q.clone();
        self.load_coefficients(&q1);
        self.affine_half_step(state, 0.5 * h);
        state.time += h;
        self.check(state)
    }

    fn check(&self, state: &CorrectionState) -> Result<()> {
        let bounded = state
            .z
            .q
            .iter()
            .chain(&state.z.p)
            .all(|x| x.is_finite() && x.abs() <= self.q_bound);
        if !bounded || !state.is_finite() {
            return Err(Error::Unstable(format!(
                "correction trajectory left the trusted range at t = {:.6}",
                state.time
            )));
        }
        Ok(())
    }
}

/// Convenience wrapper: one Strang step with a freshly allocated propagator.
pub fn strang_step(
    state: &mut CorrectionState,
    model: &HamiltonianModel,
    h: f64,
    force: ForceField,
) -> Result<()> {
    CorrectionPropagator::new(model, force).step(state, h)
}

/// Transport `(z, Λ, Γ)` from `z0` over `[0, t]` with step `h` (a final
/// partial step covers any remainder).
pub fn propagate_correction(
    z0: &PhasePoint,
    model: &HamiltonianModel,
    t: f64,
    h: f64,
    force: ForceField,
) -> Result<CorrectionState> {
    if !(h > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "propagation needs h > 0 and t ≥ 0, got h = {h}, t = {t}"
        )));
    }
    let mut state = CorrectionState::new(z0.clone());
    let mut prop = CorrectionPropagator::new(model, force);
    let n = (t / h).floor() as u64;
    let n = if ((n + 1) as f64 * h - t).abs() < 1e-9 * t.max(1.0) {
        n + 1
    } else {
        n
    };
    for _ in 0..n {
        prop.step(&mut state, h)?;
    }
    let rest = t - n as f64 * h;
    if rest > 1e-9 * t.max(1.0) {
        prop.step(&mut state, rest)?;
    }
    state.time = t;
    Ok(state)
}

// ---------------------------------------------------------------------------
// 6th-order symplectic composition (leading-order trajectories)
// ---------------------------------------------------------------------------

/// Composition weights (triple-jump coefficients, solution "B"): the step is
/// the palindromic product of seven velocity-Verlet substeps with sizes
/// `w3, w2, w1, w0, w1, w2, w3` — sixth order with noticeably smaller error
/// constants than the alternative real solutions.
const W1: f64 = -2.13228522200144;
const W2: f64 = 0.00426068187079180;
const W3: f64 = 1.43984816797678;
const W0: f64 = 1.0 - 2.0 * (W1 + W2 + W3);

/// Substep sizes (drift coefficients).
const DRIFT: [f64; 7] = [W3, W2, W1, W0, W1, W2, W3];

/// Kick coefficients: half-sums of adjacent drifts (adjacent half-kicks of
/// the velocity-Verlet substeps merged into one force evaluation).
const KICK: [f64; 8] = [
    0.5 * W3,
    0.5 * (W3 + W2),
    0.5 * (W2 + W1),
    0.5 * (W1 + W0),
    0.5 * (W0 + W1),
    0.5 * (W1 + W2),
    0.5 * (W2 + W3),
    0.5 * W3,
];

/// Reusable 6th-order symplectic stepper for `(q, p)` trajectories.
pub struct Yoshida6<'a> {
    model: &'a HamiltonianModel,
    force: ForceField,
    q_bound: f64,
    f: Vec<f64>,
}

impl<'a> Yoshida6<'a> {
    pub fn new(model: &'a HamiltonianModel, force: ForceField) -> Self {
        Self::with_bound(model, force, DEFAULT_Q_BOUND)
    }

    pub fn with_bound(model: &'a HamiltonianModel, force: ForceField, q_bound: f64) -> Self {
        Self { model, force, q_bound, f: vec![0.0; model.dim()] }
    }

    #[inline]
    fn kick(&mut self, q: &[f64], p: &mut [f64], s: f64) {
        self.model.force_into(q, self.force, &mut self.f);
        for (pi, fi) in p.iter_mut().zip(&self.f) {
            *pi += s * fi;
        }
    }

    /// One full composition step of size `h`.
    pub fn step(&mut self, q: &mut [f64], p: &mut [f64], h: f64) {
        self.kick(q, p, KICK[0] * h);
        for k in 0..7 {
            let dk = DRIFT[k] * h;
            for (qi, pi) in q.iter_mut().zip(p.iter()) {
                *qi += dk * pi;
            }
            if k < 6 {
                self.kick(q, p, KICK[k + 1] * h);
            }
        }
        self.kick(q, p, KICK[7] * h);
    }

    /// `n` steps of size `h` with the boundary kicks between consecutive
    /// steps merged (7 force evaluations per inner step instead of 8).
    pub fn propagate(&mut self, q: &mut [f64], p: &mut [f64], h: f64, n: u64) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        self.kick(q, p, KICK[0] * h);
        for step in 0..n {
            for k in 0..7 {
                let dk = DRIFT[k] * h;
                for (qi, pi) in q.iter_mut().zip(p.iter()) {
                    *qi += dk * pi;
                }
                if k < 6 {
                    self.kick(q, p, KICK[k + 1] * h);
                }
            }
            let last = step + 1 == n;
            // KICK[7] of this step and KICK[0] of the next share the same q.
            let s = if last { KICK[7] } else { KICK[7] + KICK[0] };
            self.kick(q, p, s * h);
            self.check(q, p)?;
        }
        Ok(())
    }

    fn check(&self, q: &[f64], p: &[f64]) -> Result<()> {
        let ok = q
            .iter()
            .chain(p)
            .all(|x| x.is_finite() && x.abs() <= self.q_bound);
        if ok {
            Ok(())
        } else {
            Err(Error::Unstable("trajectory left the trusted range".into()))
        }
    }
}

/// Flow map `Φ^t(z0)` by the 6th-order composition with step `h` (plus a
/// final partial step for any remainder of `t/h`).
pub fn yoshida6_flow(
    z0: &PhasePoint,
    model: &HamiltonianModel,
    t: f64,
    h: f64,
    force: ForceField,
) -> Result<PhasePoint> {
    if !(h > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "propagation needs h > 0 and t ≥ 0, got h = {h}, t = {t}"
        )));
    }
    let mut z = z0.clone();
    let mut stepper = Yoshida6::new(model, force);
    let n = (t / h).floor() as u64;
    let n = if ((n + 1) as f64 * h - t).abs() < 1e-9 * t.max(1.0) {
        n + 1
    } else {
        n
    };
    stepper.propagate(&mut z.q, &mut z.p, h, n)?;
    let rest = t - n as f64 * h;
    if rest > 1e-9 * t.max(1.0) {
        stepper.propagate(&mut z.q, &mut z.p, rest, 1)?;
    }
    Ok(z)
}

// ---------------------------------------------------------------------------
// Variational quadrature oracle for (Λ, Γ)
// ---------------------------------------------------------------------------

/// Independent reconstruction of `(Λ(t), Γ(t))` from flow derivatives:
///
/// `Λ̃(t) = ∫₀ᵗ [DΦ^τ · (J D²h) · (DΦ^τ)ᵀ] ∘ Φ^{t−τ}(z0) dτ`
/// `Γ̃_i(t) = ∫₀ᵗ Σ_{kl} (J D²h)_{kl} ∂²_{kl} Φ^τ_i ∘ Φ^{t−τ}(z0) dτ`
///
/// where `Φ` is the corrected flow, `DΦ` its Jacobian (standard convention:
/// `DΦ_{ij} = ∂Φ_i/∂z_j`), `∂²Φ` its second variation, and `J D²h` uses the
/// bare Hamiltonian. First and second variational equations are integrated
/// with classical RK4 at step `fine_h`; the τ-integral uses the trapezoid
/// rule on `quad_nodes + 1` equally spaced nodes. Strictly a test oracle —
/// cost grows like `quad_nodes × t/fine_h × d³`.
pub fn lambda_gamma_quadrature_oracle(
    z0: &PhasePoint,
    model: &HamiltonianModel,
    t: f64,
    quad_nodes: usize,
    fine_h: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let d = model.dim();
    let d2 = 2 * d;
    let mut lambda = DMatrix::zeros(d2, d2);
    let mut gamma = DVector::zeros(d2);
    if t == 0.0 {
        return Ok((lambda, gamma));
    }
    let dt = t / quad_nodes as f64;
    for k in 0..=quad_nodes {
        let tau = k as f64 * dt;
        let weight = if k == 0 || k == quad_nodes { 0.5 } else { 1.0 };
        // Base point u = Φ^{t−τ}(z0) via the production flow.
        let u = yoshida6_flow(z0, model, t - tau, fine_h, ForceField::Corrected)?;
        // J·D²h at the base point (bare Hamiltonian).
        let g = jacobian_coefficient(model, &u.q, ForceField::Plain);
        // First and second variations of Φ^τ at u.
        let (dphi, second) = flow_variations(&u, model, tau, fine_h);
        // Λ integrand: DΦ · G · DΦᵀ.
        let integrand = &dphi * &g * dphi.transpose();
        mat_axpy(&mut lambda, weight * dt, &integrand);
        // Γ integrand: component-wise contraction of G with ∂²Φ_i.
        for i in 0..d2 {
            let mut acc = 0.0;
            for r in 0..d2 {
                for c in 0..d2 {
                    acc += g[(r, c)] * second[i][(r, c)];
                }
            }
            gamma[i] += weight * dt * acc;
        }
    }
    Ok((lambda, gamma))
}

/// Jacobian and second variation of the corrected flow `Φ^τ` at base point
/// `u`, by RK4 on the joint system (trajectory, first variation, second
/// variation).
fn flow_variations(
    u: &PhasePoint,
    model: &HamiltonianModel,
    tau: f64,
    fine_h: f64,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let d = model.dim();
    let d2 = 2 * d;

    #[derive(Clone)]
    struct VarState {
        z: PhasePoint,
        dphi: DMatrix<f64>,
        second: Vec<DMatrix<f64>>,
    }

    // RHS of the joint system:
    //   z' = X(z), D' = A(z) D,
    //   T_i' = Σ_j A_{ij} T_j + Q_i,  Q_i[k,l] = Σ_{mn} ∂²X_i[m,n] D[m,k] D[n,l].
    // For the corrected field the only curvature sits in the force rows:
    //   ∂²X_{d+r}[m,n] = −∂³V_ε[r][m,n] on the position block.
    let rhs = |s: &VarState| -> VarState {
        let a = jacobian_coefficient(model, &s.z.q, ForceField::Corrected);
        let mut fq = vec![0.0; d];
        let mut fp = vec![0.0; d];
        model.vector_field(&s.z, ForceField::Corrected, &mut fq, &mut fp);
        let dphi_dot = &a * &s.dphi;
        let eps = model.epsilon();
        // Corrected third derivatives: D³V − (ε/4)·D³(ΔV).
        let mut thirds = Vec::with_capacity(d);
        for r in 0..d {
            let mut t3 = DMatrix::zeros(d, d);
            model.potential().third_derivative(&s.z.q, r, &mut t3);
            let mut lt = DMatrix::zeros(d, d);
            model.potential().laplacian_third(&s.z.q, r, &mut lt);
            t3 -= lt * (0.25 * eps);
            thirds.push(t3);
        }
        let dq = s.dphi.rows(0, d); // position rows of the Jacobian
        let mut second_dot: Vec<DMatrix<f64>> = (0..d2).map(|_| DMatrix::zeros(d2, d2)).collect();
        for i in 0..d2 {
            for j in 0..d2 {
                let aij = a[(i, j)];
                if aij != 0.0 {
                    let term = s.second[j].clone();
                    mat_axpy(&mut second_dot[i], aij, &term);
                }
            }
        }
        for r in 0..d {
            // Q_{d+r} = −(Dq)ᵀ · ∂³V_ε[r] · Dq, with the sign folded into X.
            let q_term = dq.transpose() * (-&thirds[r]) * dq;
            second_dot[d + r] += q_term;
        }
        VarState {
            z: PhasePoint::new(fq, fp).expect("dims"),
            dphi: dphi_dot,
            second: second_dot,
        }
    };

    let add = |a: &VarState, b: &VarState, s: f64| -> VarState {
        VarState {
            z: PhasePoint::new(
                a.z.q.iter().zip(&b.z.q).map(|(x, y)| x + s * y).collect(),
                a.z.p.iter().zip(&b.z.p).map(|(x, y)| x + s * y).collect(),
            )
            .expect("dims"),
            dphi: &a.dphi + &b.dphi * s,
            second: a
                .second
                .iter()
                .zip(&b.second)
                .map(|(x, y)| x + y * s)
                .collect(),
        }
    };

    let mut state = VarState {
        z: u.clone(),
        dphi: DMatrix::identity(d2, d2),
        second: (0..d2).map(|_| DMatrix::zeros(d2, d2)).collect(),
    };
    if tau == 0.0 {
        return (state.dphi, state.second);
    }
    let n = (tau / fine_h).ceil().max(1.0) as u64;
    let h = tau / n as f64;
    for _ in 0..n {
        let k1 = rhs(&state);
        let k2 = rhs(&add(&state, &k1, 0.5 * h));
        let k3 = rhs(&add(&state, &k2, 0.5 * h));
        let k4 = rhs(&add(&state, &k3, h));
        let mut incr = add(&k1, &k2, 2.0);
        incr = add(&incr, &k3, 2.0);
        incr = add(&incr, &k4, 1.0);
        state = add(&state, &incr, h / 6.0);
    }
    (state.dphi, state.second)
}
