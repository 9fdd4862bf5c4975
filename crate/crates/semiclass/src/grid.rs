//! Grid-based reference solver: split-step Fourier propagation of the full
//! wavefunction on a periodic box, for validating the particle estimators in
//! one and two dimensions.
//!
//! The equation `iε ∂_t ψ = −(ε²/2)Δψ + Vψ` is advanced by the Strang
//! composition
//!
//! ```text
//! ψ ← e^{−iVh/(2ε)} · F⁻¹[ e^{−iεh|ξ|²/2} · F[ e^{−iVh/(2ε)} ψ ] ]
//! ```
//!
//! on `[−L, L)^d` with wavenumbers `ξ_m = π m′ / L` (`m′ = m` for
//! `m < n/2`, else `m − n`). Expectation values of position-side observables
//! are plain grid sums; momentum-side observables are spectral sums over
//! `|ψ̂|²`. Each step is unitary to rounding, so norm drift is a direct
//! integrator health check.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::states::GaussianSuperposition;
use crate::util::KahanSum;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::io::{BufRead, Read, Write};
use std::sync::Arc;

/// Discretized wavefunction on `[−L, L)^d` with `n` points per axis
/// (`d ≤ 2`, `n` even). Values are stored row-major (`index = ix·n + iy` in
/// two dimensions).
#[derive(Debug, Clone)]
pub struct GridState {
    dim: usize,
    points: usize,
    half_width: f64,
    epsilon: f64,
    pub time: f64,
    psi: Vec<Complex64>,
}

impl GridState {
    /// Sample a Gaussian state on the grid and normalize. The box must be
    /// large enough that the truncated tails are negligible — callers should
    /// keep packet centers several widths away from the boundary.
    pub fn from_state(
        state: &GaussianSuperposition,
        half_width: f64,
        points_per_axis: usize,
    ) -> Result<Self> {
        let d = state.dim();
        if d > 2 {
            return Err(Error::MissingCapability(format!(
                "grid reference supports d ≤ 2, got d = {d}"
            )));
        }
        if points_per_axis < 8 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "grid needs an even number of points ≥ 8 per axis, got {points_per_axis}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidInput(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        let n = points_per_axis;
        let dx = 2.0 * half_width / n as f64;
        let total = n.pow(d as u32);
        let mut psi = Vec::with_capacity(total);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            match d {
                1 => x[0] = -half_width + idx as f64 * dx,
                _ => {
                    x[0] = -half_width + (idx / n) as f64 * dx;
                    x[1] = -half_width + (idx % n) as f64 * dx;
                }
            }
            psi.push(state.psi(&x));
        }
        let mut out = Self {
            dim: d,
            points: n,
            half_width,
            epsilon: state.epsilon(),
            time: 0.0,
            psi,
        };
        let ns = out.norm_sq();
        if !(ns > 0.0) || !ns.is_finite() {
            return Err(Error::InvalidInput(
                "state has no mass on the grid; enlarge the box".into(),
            ));
        }
        let scale = 1.0 / ns.sqrt();
        for v in &mut out.psi {
            *v *= scale;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Mesh spacing `dx = 2L/n`.
    pub fn step_size(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    fn volume_element(&self) -> f64 {
        self.step_size().powi(self.dim as i32)
    }

    /// `∫|ψ|² ≈ Σ|ψ|² dx^d`.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = KahanSum::new();
        for v in &self.psi {
            acc.add(v.norm_sqr());
        }
        acc.value() * self.volume_element()
    }

    fn position(&self, axis: usize, idx: usize) -> f64 {
        debug_assert!(axis < self.dim);
        let i = if self.dim == 1 {
            idx
        } else if axis == 0 {
            idx / self.points
        } else {
            idx % self.points
        };
        -self.half_width + i as f64 * self.step_size()
    }

    /// `ξ = π m′ / L` with the symmetric index `m′ ∈ [−n/2, n/2)`.
    fn wavenumber(&self, axis: usize, idx: usize) -> f64 {
        debug_assert!(axis < self.dim);
        let n = self.points;
        let m = if self.dim == 1 {
            idx
        } else if axis == 0 {
            idx / n
        } else {
            idx % n
        };
        let m_signed = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
        std::f64::consts::PI * m_signed as f64 / self.half_width
    }
}

/// One 1D FFT over every axis of a row-major d-dimensional array (d ≤ 2);
/// `n` is the per-axis length. Rows are contiguous; the leading axis is
/// handled by transposing, transforming rows, and transposing back.
fn fft_all_axes(psi: &mut [Complex64], dim: usize, n: usize, fft: &Arc<dyn Fft<f64>>) {
    if dim == 1 {
        fft.process(psi);
        return;
    }
    psi.par_chunks_exact_mut(n).for_each(|row| {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(row, &mut scratch);
    });
    let mut tmp = vec![Complex64::default(); psi.len()];
    transpose_square(psi, &mut tmp, n);
    tmp.par_chunks_exact_mut(n).for_each(|row| {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(row, &mut scratch);
    });
    transpose_square(&tmp, psi, n);
}

fn transpose_square(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    dst.par_chunks_exact_mut(n).enumerate().for_each(|(j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            *out = src[i * n + j];
        }
    });
}

/// Split-step propagator with precomputed phase tables for one fixed grid
/// geometry, potential, ε and step size.
pub struct SplitStepPropagator {
    dim: usize,
    points: usize,
    half_width: f64,
    epsilon: f64,
    h: f64,
    potential_half: Vec<Complex64>,
    kinetic_full: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SplitStepPropagator {
    /// Build tables for stepping states with the geometry of `prototype`.
    pub fn new(model: &HamiltonianModel, prototype: &GridState, h: f64) -> Result<Self> {
        if model.dim() != prototype.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: prototype.dim(),
            });
        }
        if model.epsilon() != prototype.epsilon() {
            return Err(Error::InvalidInput(format!(
                "grid state has ε = {} but the model has ε = {}",
                prototype.epsilon(),
                model.epsilon()
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "step size must be positive, got {h}"
            )));
        }
        let eps = model.epsilon();
        let d = prototype.dim();
        let n = prototype.points_per_axis();
        let total = prototype.psi.len();
        let mut potential_half = Vec::with_capacity(total);
        let mut kinetic_full = Vec::with_capacity(total);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            for (axis, coord) in x.iter_mut().enumerate() {
                *coord = prototype.position(axis, idx);
            }
            let phase = -model.potential().value(&x) * h / (2.0 * eps);
            potential_half.push(Complex64::from_polar(1.0, phase));
            let mut xi_sq = 0.0;
            for axis in 0..d {
                let xi = prototype.wavenumber(axis, idx);
                xi_sq += xi * xi;
            }
            kinetic_full.push(Complex64::from_polar(1.0, -0.5 * eps * h * xi_sq));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim: d,
            points: n,
            half_width: prototype.half_width(),
            epsilon: eps,
            h,
            potential_half,
            kinetic_full,
            forward: planner.plan_fft(n, FftDirection::Forward),
            inverse: planner.plan_fft(n, FftDirection::Inverse),
        })
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn check_geometry(&self, state: &GridState) -> Result<()> {
        if state.dim != self.dim
            || state.points != self.points
            || state.half_width != self.half_width
            || state.epsilon != self.epsilon
        {
            return Err(Error::InvalidInput(
                "grid state does not match the propagator's geometry".into(),
            ));
        }
        Ok(())
    }

    /// One Strang step: half potential phase, full kinetic phase in Fourier
    /// space, half potential phase.
    pub fn step(&self, state: &mut GridState) -> Result<()> {
        self.check_geometry(state)?;
        let n_total = state.psi.len() as f64;
        state
            .psi
            .par_iter_mut()
            .zip(self.potential_half.par_iter())
            .for_each(|(v, w)| *v *= w);
        fft_all_axes(&mut state.psi, self.dim, self.points, &self.forward);
        state
            .psi
            .par_iter_mut()
            .zip(self.kinetic_full.par_iter())
            .for_each(|(v, w)| *v *= w);
        fft_all_axes(&mut state.psi, self.dim, self.points, &self.inverse);
        // rustfft transforms are unnormalized; one 1/N after the inverse.
        let scale = 1.0 / n_total;
        state
            .psi
            .par_iter_mut()
            .zip(self.potential_half.par_iter())
            .for_each(|(v, w)| *v *= w * scale);
        state.time += self.h;
        Ok(())
    }

    pub fn propagate(&self, state: &mut GridState, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }
}

/// Expectation values of the standard observable set, in the same order and
/// under the same names as [`crate::observable::builtin_observables`]:
/// positions and the potential on the grid side, momenta and the kinetic
/// energy on the spectral side.
pub fn grid_expectations(
    state: &GridState,
    model: &HamiltonianModel,
) -> Result<Vec<(String, f64)>> {
    if model.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: state.dim() });
    }
    let d = state.dim();
    let eps = state.epsilon();
    // Position side.
    let mut weight_pos = KahanSum::new();
    let mut pos_acc = vec![KahanSum::new(); d];
    let mut pot_acc = KahanSum::new();
    let mut x = vec![0.0; d];
    for (idx, v) in state.psi.iter().enumerate() {
        let w = v.norm_sqr();
        weight_pos.add(w);
        for axis in 0..d {
            x[axis] = state.position(axis, idx);
            pos_acc[axis].add(x[axis] * w);
        }
        pot_acc.add(model.potential().value(&x) * w);
    }
    // Spectral side.
    let mut psi_hat = state.psi.clone();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft(state.points, FftDirection::Forward);
    fft_all_axes(&mut psi_hat, d, state.points, &forward);
    let mut weight_mom = KahanSum::new();
    let mut mom_acc = vec![KahanSum::new(); d];
    let mut kin_acc = KahanSum::new();
    for (idx, v) in psi_hat.iter().enumerate() {
        let w = v.norm_sqr();
        weight_mom.add(w);
        let mut xi_sq = 0.0;
        for (axis, acc) in mom_acc.iter_mut().enumerate() {
            let xi = state.wavenumber(axis, idx);
            acc.add(eps * xi * w);
            xi_sq += xi * xi;
        }
        kin_acc.add(0.5 * eps * eps * xi_sq * w);
    }
    let wp = weight_pos.value();
    let wm = weight_mom.value();
    if wp <= 0.0 || wm <= 0.0 {
        return Err(Error::Unstable("grid state has lost all mass".into()));
    }
    let mut out = Vec::with_capacity(2 * d + 3);
    for (axis, acc) in pos_acc.iter().enumerate() {
        out.push((format!("q{}", axis + 1), acc.value() / wp));
    }
    for (axis, acc) in mom_acc.iter().enumerate() {
        out.push((format!("p{}", axis + 1), acc.value() / wm));
    }
    let kinetic = kin_acc.value() / wm;
    let potential = pot_acc.value() / wp;
    out.push(("kinetic".into(), kinetic));
    out.push(("potential".into(), potential));
    out.push(("total".into(), kinetic + potential));
    Ok(out)
}

/// Fraction of spectral mass in the outer wavenumber band
/// (`|m′| ≥ 0.9·n/2` on any axis) — an aliasing alarm. A resolved state
/// keeps this far below 1e-10; values above that mean the grid is too coarse
/// or too small for the dynamics.
pub fn high_wavenumber_fraction(state: &GridState) -> f64 {
    let n = state.points;
    let band = 0.9 * (n as f64 / 2.0);
    let mut psi_hat = state.psi.clone();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft(n, FftDirection::Forward);
    fft_all_axes(&mut psi_hat, state.dim, n, &forward);
    let mut total = KahanSum::new();
    let mut outer = KahanSum::new();
    for (idx, v) in psi_hat.iter().enumerate() {
        let w = v.norm_sqr();
        total.add(w);
        let mut in_band = false;
        for axis in 0..state.dim {
            let m = if state.dim == 1 {
                idx
            } else if axis == 0 {
                idx / n
            } else {
                idx % n
            };
            let m_signed = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
            if m_signed.unsigned_abs() as f64 >= band {
                in_band = true;
            }
        }
        if in_band {
            outer.add(w);
        }
    }
    outer.value() / total.value()
}

const CHECKPOINT_MAGIC: &str = "semiclass-grid v1";

/// Serialize a grid state: a short text header followed by the samples as
/// little-endian `f32` re/im pairs (half the size of `f64` at far more
/// precision than any propagation run carries).
pub fn write_checkpoint<W: Write>(state: &GridState, mut w: W) -> Result<()> {
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    writeln!(w, "dim {}", state.dim)?;
    writeln!(w, "points {}", state.points)?;
    writeln!(w, "half_width {:.17e}", state.half_width)?;
    writeln!(w, "epsilon {:.17e}", state.epsilon)?;
    writeln!(w, "time {:.17e}", state.time)?;
    writeln!(w, "data f32le {}", state.psi.len())?;
    let mut buf = Vec::with_capacity(state.psi.len() * 8);
    for v in &state.psi {
        buf.extend_from_slice(&(v.re as f32).to_le_bytes());
        buf.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<GridState> {
    let mut reader = std::io::BufReader::new(r);
    let mut line = String::new();

    let next_line = |reader: &mut std::io::BufReader<R>, line: &mut String| -> Result<String> {
        line.clear();
        if reader.read_line(line)? == 0 {
            return Err(Error::MalformedCheckpoint("unexpected end of header".into()));
        }
        Ok(line.trim_end().to_string())
    };

    let magic = next_line(&mut reader, &mut line)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::MalformedCheckpoint(format!(
            "bad magic line '{magic}'"
        )));
    }
    let field = |reader: &mut std::io::BufReader<R>,
                 line: &mut String,
                 key: &str|
     -> Result<String> {
        let l = next_line(reader, line)?;
        let (k, v) = l
            .split_once(' ')
            .ok_or_else(|| Error::MalformedCheckpoint(format!("malformed line '{l}'")))?;
        if k != key {
            return Err(Error::MalformedCheckpoint(format!(
                "expected field '{key}', found '{k}'"
            )));
        }
        Ok(v.to_string())
    };
    let parse_usize = |s: String, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::MalformedCheckpoint(format!("bad {what} '{s}'")))
    };
    let parse_f64 = |s: String, what: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::MalformedCheckpoint(format!("bad {what} '{s}'")))
    };

    let dim = parse_usize(field(&mut reader, &mut line, "dim")?, "dim")?;
    let points = parse_usize(field(&mut reader, &mut line, "points")?, "points")?;
    let half_width = parse_f64(field(&mut reader, &mut line, "half_width")?, "half width")?;
    let epsilon = parse_f64(field(&mut reader, &mut line, "epsilon")?, "epsilon")?;
    let time = parse_f64(field(&mut reader, &mut line, "time")?, "time")?;
    let data = field(&mut reader, &mut line, "data")?;
    let (encoding, count) = data
        .split_once(' ')
        .ok_or_else(|| Error::MalformedCheckpoint(format!("malformed data line '{data}'")))?;
    if encoding != "f32le" {
        return Err(Error::MalformedCheckpoint(format!(
            "unsupported encoding '{encoding}'"
        )));
    }
    let count: usize = parse_usize(count.to_string(), "sample count")?;
    if dim == 0 || dim > 2 || count != points.pow(dim as u32) {
        return Err(Error::MalformedCheckpoint(format!(
            "inconsistent geometry: dim {dim}, points {points}, count {count}"
        )));
    }
    let mut raw = vec![0u8; count * 8];
    reader
        .read_exact(&mut raw)
        .map_err(|_| Error::MalformedCheckpoint("truncated sample data".into()))?;
    let mut psi = Vec::with_capacity(count);
    for chunk in raw.chunks_exact(8) {
        let re = f32::from_le_bytes(chunk[..4].try_into().unwrap());
        let im = f32::from_le_bytes(chunk[4..].try_into().unwrap());
        psi.push(Complex64::new(re as f64, im as f64));
    }
    Ok(GridState { dim, points, half_width, epsilon, time, psi })
}
