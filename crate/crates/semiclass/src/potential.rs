//! Potential models: values, derivatives up to third order, and derivatives of
//! the Laplacian (needed by the ε-corrected Hamiltonian `h - (ε/4)(d + ΔV)`).
//!
//! Implementors supply `value`/`gradient`/`hessian`; everything else has a
//! finite-difference fallback so user-defined potentials work out of the box,
//! while the built-in models override the fallbacks with analytic expressions.

use nalgebra::DMatrix;
use std::sync::Arc;

/// Shared, thread-safe handle to a potential.
pub type SharedPotential = Arc<dyn Potential>;

/// Step used by the finite-difference fallbacks: cube root of machine epsilon
/// scaled by the local coordinate magnitude, the usual optimum for central
/// differences of a twice-differentiable function.
fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * f64::max(1.0, x.abs())
}

/// A smooth potential `V: R^d → R`, bounded below, with derivatives.
pub trait Potential: Send + Sync {
    /// Spatial dimension `d`.
    fn dim(&self) -> usize;

    /// Short identifier used in reports and output files.
    fn name(&self) -> &'static str;

    /// `V(q)`.
    fn value(&self, q: &[f64]) -> f64;

    /// `∇V(q)` written into `out` (length `d`).
    fn gradient(&self, q: &[f64], out: &mut [f64]);

    /// `D²V(q)` written into `out` (`d × d`).
    fn hessian(&self, q: &[f64], out: &mut DMatrix<f64>);

    /// `∂_i D²V(q)` (the third-derivative slice along coordinate `i`),
    /// central finite difference of the Hessian by default.
    fn third_derivative(&self, q: &[f64], i: usize, out: &mut DMatrix<f64>) {
        let d = self.dim();
        let h = fd_step(q[i]);
        let mut qp = q.to_vec();
        let mut hp = DMatrix::zeros(d, d);
        let mut hm = DMatrix::zeros(d, d);
        qp[i] = q[i] + h;
        self.hessian(&qp, &mut hp);
        qp[i] = q[i] - h;
        self.hessian(&qp, &mut hm);
        // Use the actually-realized step width for correct rounding behaviour.
        let two_h = (q[i] + h) - (q[i] - h);
        for r in 0..d {
            for c in 0..d {
                out[(r, c)] = (hp[(r, c)] - hm[(r, c)]) / two_h;
            }
        }
    }

    /// `ΔV(q) = tr D²V(q)`.
    fn laplacian(&self, q: &[f64]) -> f64 {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        self.hessian(q, &mut h);
        h.trace()
    }

    /// `∇(ΔV)(q)`; component `i` is the trace of the third-derivative slice.
    fn laplacian_gradient(&self, q: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut t = DMatrix::zeros(d, d);
        for (i, component) in out.iter_mut().enumerate() {
            self.third_derivative(q, i, &mut t);
            *component = t.trace();
        }
    }

    /// `D²(ΔV)(q)`, central finite difference of `∇(ΔV)` by default.
    fn laplacian_hessian(&self, q: &[f64], out: &mut DMatrix<f64>) {
        let d = self.dim();
        let mut qp = q.to_vec();
        let mut gp = vec![0.0; d];
        let mut gm = vec![0.0; d];
        for i in 0..d {
            let h = fd_step(q[i]);
            qp[i] = q[i] + h;
            self.laplacian_gradient(&qp, &mut gp);
            qp[i] = q[i] - h;
            self.laplacian_gradient(&qp, &mut gm);
            qp[i] = q[i];
            let two_h = (q[i] + h) - (q[i] - h);
            for r in 0..d {
                out[(r, i)] = (gp[r] - gm[r]) / two_h;
            }
        }
        // Symmetrize: mixed partials commute, finite differences don't quite.
        for r in 0..d {
            for c in (r + 1)..d {
                let s = 0.5 * (out[(r, c)] + out[(c, r)]);
                out[(r, c)] = s;
                out[(c, r)] = s;
            }
        }
    }

    /// `∂_i D²(ΔV)(q)`, central finite difference of `D²(ΔV)` by default.
    fn laplacian_third(&self, q: &[f64], i: usize, out: &mut DMatrix<f64>) {
        let d = self.dim();
        let h = fd_step(q[i]);
        let mut qp = q.to_vec();
        let mut hp = DMatrix::zeros(d, d);
        let mut hm = DMatrix::zeros(d, d);
        qp[i] = q[i] + h;
        self.laplacian_hessian(&qp, &mut hp);
        qp[i] = q[i] - h;
        self.laplacian_hessian(&qp, &mut hm);
        let two_h = (q[i] + h) - (q[i] - h);
        for r in 0..d {
            for c in 0..d {
                out[(r, c)] = (hp[(r, c)] - hm[(r, c)]) / two_h;
            }
        }
    }

    /// Closed-form `E[V(q)]` for `q ~ N(mean, var·I)` when available.
    /// Used as an independent oracle for sampled expectations.
    fn gaussian_mean(&self, _mean: &[f64], _var: f64) -> Option<f64> {
        None
    }
}

/// Extension helpers available on any sized potential.
pub trait PotentialExt: Potential + Sized + 'static {
    /// Wrap into the shared handle used throughout the crate.
    fn into_shared(self) -> SharedPotential {
        Arc::new(self)
    }
}

impl<T: Potential + Sized + 'static> PotentialExt for T {}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

/// `V ≡ 0`: free motion.
#[derive(Debug, Clone, Copy)]
pub struct FreePotential {
    d: usize,
}

impl FreePotential {
    pub fn new(d: usize) -> Self {
        assert!(d > 0, "dimension must be positive");
        Self { d }
    }
}

impl Potential for FreePotential {
    fn dim(&self) -> usize {
        self.d
    }
    fn name(&self) -> &'static str {
        "free"
    }
    fn value(&self, _q: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
    fn third_derivative(&self, _q: &[f64], _i: usize, out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
    fn laplacian(&self, _q: &[f64]) -> f64 {
        0.0
    }
    fn laplacian_gradient(&self, _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn laplacian_hessian(&self, _q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
    fn laplacian_third(&self, _q: &[f64], _i: usize, out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
    fn gaussian_mean(&self, _mean: &[f64], _var: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// Isotropic harmonic oscillator `V(q) = |q|²/2`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicPotential {
    d: usize,
}

impl HarmonicPotential {
    pub fn new(d: usize) -> Self {
        assert!(d > 0, "dimension must be positive");
        Self { d }
    }
}

impl Potential for HarmonicPotential {
    fn dim(&self) -> usize {
        self.d
    }
    fn name(&self) -> &'static str {
        "harmonic"
    }
    fn value(&self, q: &[f64]) -> f64 {
        0.5 * crate::util::norm_sq(q)
    }
    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        out.copy_from_slice(q);
    }
    fn hessian(&self, _q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out.fill_diagonal(1.0);
    }
    fn third_derivative(&self, _q: &[f64], _i: usize, out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
    fn laplacian(&self, _q: &[f64]) -> f64 {
        self.d as f64
    }
    fn laplacian_gradient(&self, _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn laplacian_hessian(&self, _q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
    fn laplacian_third(&self, _q: &[f64], _i: usize, out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
    fn gaussian_mean(&self, mean: &[f64], var: f64) -> Option<f64> {
        // E[q_j²] = μ_j² + var
        Some(0.5 * (crate::util::norm_sq(mean) + self.d as f64 * var))
    }
}

/// Torsional chain `V(q) = Σ_j (1 − cos q_j)`: bounded, fully nonlinear, with
/// every derivative available in closed form. The workhorse test potential.
#[derive(Debug, Clone, Copy)]
pub struct TorsionalPotential {
    d: usize,
}

impl TorsionalPotential {
    pub fn new(d: usize) -> Self {
        assert!(d > 0, "dimension must be positive");
        Self { d }
    }
}

impl Potential for TorsionalPotential {
    fn dim(&self) -> usize {
        self.d
    }
    fn name(&self) -> &'static str {
        "torsional"
    }
    fn value(&self, q: &[f64]) -> f64 {
        q.iter().map(|x| 1.0 - x.cos()).sum()
    }
    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(q) {
            *o = x.sin();
        }
    }
    fn hessian(&self, q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for (i, x) in q.iter().enumerate() {
            out[(i, i)] = x.cos();
        }
    }
    fn third_derivative(&self, q: &[f64], i: usize, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(i, i)] = -q[i].sin();
    }
    fn laplacian(&self, q: &[f64]) -> f64 {
        q.iter().map(|x| x.cos()).sum()
    }
    fn laplacian_gradient(&self, q: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(q) {
            *o = -x.sin();
        }
    }
    fn laplacian_hessian(&self, q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for (i, x) in q.iter().enumerate() {
            out[(i, i)] = -x.cos();
        }
    }
    fn laplacian_third(&self, q: &[f64], i: usize, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(i, i)] = q[i].sin();
    }
    fn gaussian_mean(&self, mean: &[f64], var: f64) -> Option<f64> {
        // E[cos(x)] = cos(μ) e^{-var/2} for x ~ N(μ, var).
        let damp = (-0.5 * var).exp();
        Some(mean.iter().map(|m| 1.0 - m.cos() * damp).sum())
    }
}

/// Nearest-neighbour Hénon–Heiles chain with a confining quartic term:
///
/// `V(q) = Σ_j q_j²/2 + Σ_{j<d} [ σ (q_j q_{j+1}² − q_j³/3)
///                                + (σ²/16)(q_j² + q_{j+1}²)² ]`.
///
/// The default coupling is `σ = 1/√80`. All derivatives through third order
/// are analytic; the Laplacian of the cubic part vanishes identically, so
/// `ΔV = d + σ² Σ_{j<d}(q_j² + q_{j+1}²)`.
#[derive(Debug, Clone, Copy)]
pub struct HenonHeilesChain {
    d: usize,
    sigma: f64,
}

impl HenonHeilesChain {
    pub fn new(d: usize) -> Self {
        Self::with_coupling(d, 1.0 / 80f64.sqrt())
    }

    pub fn with_coupling(d: usize, sigma: f64) -> Self {
        assert!(d > 0, "dimension must be positive");
        Self { d, sigma }
    }

    pub fn coupling(&self) -> f64 {
        self.sigma
    }

    /// Multiplicity of coordinate `j` across the chain terms `(j, j+1)`.
    fn chain_multiplicity(&self, j: usize) -> f64 {
        let mut m = 0.0;
        if j + 1 < self.d {
            m += 1.0;
        }
        if j >= 1 {
            m += 1.0;
        }
        m
    }
}

impl Potential for HenonHeilesChain {
    fn dim(&self) -> usize {
        self.d
    }
    fn name(&self) -> &'static str {
        "henon-heiles"
    }

    fn value(&self, q: &[f64]) -> f64 {
        let s = self.sigma;
        let c = s * s / 16.0;
        let mut v = 0.5 * crate::util::norm_sq(q);
        for j in 0..self.d - 1 {
            let (x, y) = (q[j], q[j + 1]);
            let r2 = x * x + y * y;
            v += s * (x * y * y - x * x * x / 3.0) + c * r2 * r2;
        }
        v
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let s = self.sigma;
        let c = s * s / 16.0;
        out.copy_from_slice(q);
        for j in 0..self.d - 1 {
            let (x, y) = (q[j], q[j + 1]);
            let r2 = x * x + y * y;
            out[j] += s * (y * y - x * x) + 4.0 * c * r2 * x;
            out[j + 1] += 2.0 * s * x * y + 4.0 * c * r2 * y;
        }
    }

    fn hessian(&self, q: &[f64], out: &mut DMatrix<f64>) {
        let s = self.sigma;
        let c = s * s / 16.0;
        out.fill(0.0);
        out.fill_diagonal(1.0);
        for j in 0..self.d - 1 {
            let (x, y) = (q[j], q[j + 1]);
            let r2 = x * x + y * y;
            out[(j, j)] += -2.0 * s * x + 4.0 * c * (r2 + 2.0 * x * x);
            out[(j + 1, j + 1)] += 2.0 * s * x + 4.0 * c * (r2 + 2.0 * y * y);
            let off = 2.0 * s * y + 8.0 * c * x * y;
            out[(j, j + 1)] += off;
            out[(j + 1, j)] += off;
        }
    }

    fn third_derivative(&self, q: &[f64], i: usize, out: &mut DMatrix<f64>) {
        let s = self.sigma;
        let c = s * s / 16.0;
        out.fill(0.0);
        // Per chain term (x = q_j, y = q_{j+1}) the non-zero third partials are
        //   ∂³/∂x³  = −2σ + 24 c x,   ∂³/∂x∂y² = 2σ + 8 c x,
        //   ∂³/∂y³  = 24 c y,         ∂³/∂x²∂y = 8 c y.
        for j in 0..self.d - 1 {
            let (x, y) = (q[j], q[j + 1]);
            let xxx = -2.0 * s + 24.0 * c * x;
            let xyy = 2.0 * s + 8.0 * c * x;
            let xxy = 8.0 * c * y;
            let yyy = 24.0 * c * y;
            if i == j {
                out[(j, j)] += xxx;
                out[(j + 1, j + 1)] += xyy;
                out[(j, j + 1)] += xxy;
                out[(j + 1, j)] += xxy;
            } else if i == j + 1 {
                out[(j, j)] += xxy;
                out[(j + 1, j + 1)] += yyy;
                out[(j, j + 1)] += xyy;
                out[(j + 1, j)] += xyy;
            }
        }
    }

    fn laplacian(&self, q: &[f64]) -> f64 {
        // The cubic part is harmonic (its Laplacian vanishes term by term).
        let s2 = self.sigma * self.sigma;
        let mut sum = self.d as f64;
        for j in 0..self.d - 1 {
            sum += s2 * (q[j] * q[j] + q[j + 1] * q[j + 1]);
        }
        sum
    }

    fn laplacian_gradient(&self, q: &[f64], out: &mut [f64]) {
        let s2 = self.sigma * self.sigma;
        for j in 0..self.d {
            out[j] = 2.0 * s2 * q[j] * self.chain_multiplicity(j);
        }
    }

    fn laplacian_hessian(&self, q: &[f64], out: &mut DMatrix<f64>) {
        let s2 = self.sigma * self.sigma;
        let _ = q;
        out.fill(0.0);
        for j in 0..self.d {
            out[(j, j)] = 2.0 * s2 * self.chain_multiplicity(j);
        }
    }

    fn laplacian_third(&self, _q: &[f64], _i: usize, out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }

    fn gaussian_mean(&self, mean: &[f64], var: f64) -> Option<f64> {
        // Independent coordinates q_j ~ N(μ_j, s). Moments:
        //   E[x²]   = μ² + s
        //   E[x³]   = μ³ + 3μs
        //   E[x⁴]   = μ⁴ + 6μ²s + 3s²
        //   E[x y²] = μ_x (μ_y² + s)          (independence)
        //   E[(x²+y²)²] = E[x⁴] + 2E[x²]E[y²] + E[y⁴]
        let s = var;
        let sig = self.sigma;
        let c = sig * sig / 16.0;
        let m2 = |m: f64| m * m + s;
        let m3 = |m: f64| m * m * m + 3.0 * m * s;
        let m4 = |m: f64| m.powi(4) + 6.0 * m * m * s + 3.0 * s * s;
        let mut v = 0.5 * mean.iter().map(|&m| m2(m)).sum::<f64>();
        for j in 0..self.d - 1 {
            let (mx, my) = (mean[j], mean[j + 1]);
            v += sig * (mx * m2(my) - m3(mx) / 3.0);
            v += c * (m4(mx) + 2.0 * m2(mx) * m2(my) + m4(my));
        }
        Some(v)
    }
}
