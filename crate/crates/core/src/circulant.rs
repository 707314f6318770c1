//! Periodic compact-difference operators and the coupled implicit line solve.
//!
//! Every deterministic substage of both splitting methods updates one
//! (E, H) component pair line by line. With `u' = (e', h')` the unknown
//! pair and `u = (e, h)` the input, the stage equation
//!
//! ```text
//! diag(eps, mu) (u' - u) = s * (tau / h) * Minv * D * (u' + u) / 2
//! ```
//!
//! couples the pair through `Minv * D`, where `M` is the block-diagonal
//! averaging operator and `D` the off-diagonal centered-difference
//! coupling. Multiplying through by `M` gives the assembled real system
//!
//! ```text
//! eps A e' - s c B h' = eps A e + s c B h
//! mu  A h' - s c B e' = mu  A h + s c B e ,      c = tau / (2 h),
//! ```
//!
//! with `A = circ(1, 2, 1)/2` (averaging) and `B = circ(-1, 0, +1)`
//! (centered difference), both periodic. `A` and `B` are circulant and
//! share the Fourier eigenbasis, so the system diagonalizes into 2x2
//! complex blocks per frequency: the solve is direct and the per-line
//! weighted energy identity holds to machine precision. The 2x2 block
//! determinant `eps*mu*a^2 + c^2*b^2` is strictly positive because odd
//! sizes keep every eigenvalue `a = 1 + cos(2 pi k / n)` positive.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Sweep orientation: which of the two one-dimensional subsystems a line
/// solve belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Fourier symbols of the averaging and difference stencils of size `n`.
///
/// `mass[k] = 1 + cos(2 pi k / n)` is the k-th eigenvalue of the averaging
/// stencil; the k-th eigenvalue of the difference stencil is purely
/// imaginary and stored by its imaginary part `diff[k] = 2 sin(2 pi k / n)`.
/// Both arrays are built by mirroring `k <-> n - k`, so the conjugate
/// symmetry `mass[k] == mass[n-k]`, `diff[k] == -diff[n-k]` is bitwise.
#[derive(Clone, Debug)]
pub struct CirculantSpectra {
    n: usize,
    mass: Vec<f64>,
    diff: Vec<f64>,
}

impl CirculantSpectra {
    pub fn new(n: usize) -> Result<Self> {
        validate_size(n)?;
        let mut mass = vec![0.0; n];
        let mut diff = vec![0.0; n];
        mass[0] = 2.0;
        for k in 1..=n / 2 {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            mass[k] = 1.0 + theta.cos();
            mass[n - k] = mass[k];
            diff[k] = 2.0 * theta.sin();
            diff[n - k] = -diff[k];
        }
        Ok(CirculantSpectra { n, mass, diff })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Eigenvalues of the averaging stencil; strictly positive for odd `n`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Imaginary parts of the difference-stencil eigenvalues.
    pub fn diff(&self) -> &[f64] {
        &self.diff
    }
}

fn validate_size(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidPointCount {
            count: n,
            reason: "too small",
        });
    }
    if n.is_multiple_of(2) {
        return Err(Error::InvalidPointCount {
            count: n,
            reason: "even",
        });
    }
    Ok(())
}

/// The two periodic stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// Averaging: `(u[i-1] + 2 u[i] + u[i+1]) / 2`, indices mod n.
    Average,
    /// Centered difference: `u[i+1] - u[i-1]`, indices mod n.
    Difference,
}

/// Direct stencil application with periodic wrap.
pub fn apply_stencil(line: &[f64], stencil: Stencil) -> Result<Vec<f64>> {
    let n = line.len();
    if n < 3 {
        return Err(Error::LineLength {
            expected: 3,
            actual: n,
        });
    }
    let mut out = vec![0.0; n];
    for i in 0..n {
        let prev = line[(i + n - 1) % n];
        let next = line[(i + 1) % n];
        out[i] = match stencil {
            Stencil::Average => 0.5 * (prev + 2.0 * line[i] + next),
            Stencil::Difference => next - prev,
        };
    }
    Ok(out)
}

/// Parameters of one coupled line solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSystemParams {
    pub sign: Sign,
    /// Coupling ratio `tau / (2 h)` of the sweep axis.
    pub c: f64,
    pub eps: f64,
    pub mu: f64,
}

impl LineSystemParams {
    pub fn new(sign: Sign, c: f64, eps: f64, mu: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidCoefficient {
                name: "c",
                value: c,
            });
        }
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidCoefficient {
                name: "eps",
                value: eps,
            });
        }
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidCoefficient {
                name: "mu",
                value: mu,
            });
        }
        Ok(LineSystemParams { sign, c, eps, mu })
    }
}

/// Reusable per-worker buffers for [`LineSolver::solve_pair`].
#[derive(Clone, Debug)]
pub struct SolveScratch {
    freq_e: Vec<Complex64>,
    freq_h: Vec<Complex64>,
    fft: Vec<Complex64>,
}

/// Spectral solver for the coupled two-component line systems of one line
/// length. Transform plans are built once and reused across all sweeps;
/// the solver is immutable and safe to share between worker threads, each
/// worker carrying its own [`SolveScratch`].
pub struct LineSolver {
    spectra: CirculantSpectra,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl LineSolver {
    pub fn new(n: usize) -> Result<Self> {
        let spectra = CirculantSpectra::new(n)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(LineSolver {
            spectra,
            forward,
            inverse,
            scratch_len,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spectra(&self) -> &CirculantSpectra {
        &self.spectra
    }

    pub fn make_scratch(&self) -> SolveScratch {
        SolveScratch {
            freq_e: vec![Complex64::default(); self.len()],
            freq_h: vec![Complex64::default(); self.len()],
            fft: vec![Complex64::default(); self.scratch_len],
        }
    }

    /// Solves the assembled pair system
    ///
    /// ```text
    /// eps A e' - s c B h' = eps A e + s c B h
    /// mu  A h' - s c B e' = mu  A h + s c B e
    /// ```
    ///
    /// into `e_out`, `h_out`. For `c = 0` the system decouples into the
    /// identity and the inputs are copied through unchanged.
    pub fn solve_pair(
        &self,
        e_in: &[f64],
        h_in: &[f64],
        e_out: &mut [f64],
        h_out: &mut [f64],
        params: LineSystemParams,
        scratch: &mut SolveScratch,
    ) -> Result<()> {
        let n = self.len();
        for len in [e_in.len(), h_in.len(), e_out.len(), h_out.len()] {
            if len != n {
                return Err(Error::LineLength {
                    expected: n,
                    actual: len,
                });
            }
        }
        if !e_in.iter().chain(h_in.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "line solve input",
            });
        }

        if params.c == 0.0 {
            e_out.copy_from_slice(e_in);
            h_out.copy_from_slice(h_in);
            return Ok(());
        }

        for k in 0..n {
            scratch.freq_e[k] = Complex64::new(e_in[k], 0.0);
            scratch.freq_h[k] = Complex64::new(h_in[k], 0.0);
        }
        self.forward
            .process_with_scratch(&mut scratch.freq_e, &mut scratch.fft);
        self.forward
            .process_with_scratch(&mut scratch.freq_h, &mut scratch.fft);

        let s = params.sign.value();
        let em = params.eps * params.mu;
        for k in 0..n {
            let a = self.spectra.mass[k];
            let b = self.spectra.diff[k];
            let w = params.c * b;
            let det = em * a * a + w * w;
            // Per-mode map x = g e + i te h, y = i th e + g h (factors carry
            // the 1/det). It is unitary in the (eps, mu)-weighted norm, which
            // is what makes the stage conserve the discrete energy.
            let g = (em * a * a - w * w) / det;
            let te = 2.0 * s * params.c * b * params.mu * a / det;
            let th = 2.0 * s * params.c * b * params.eps * a / det;
            let eh = scratch.freq_e[k];
            let hh = scratch.freq_h[k];
            scratch.freq_e[k] = Complex64::new(g * eh.re - te * hh.im, g * eh.im + te * hh.re);
            scratch.freq_h[k] = Complex64::new(g * hh.re - th * eh.im, g * hh.im + th * eh.re);
        }

        self.inverse
            .process_with_scratch(&mut scratch.freq_e, &mut scratch.fft);
        self.inverse
            .process_with_scratch(&mut scratch.freq_h, &mut scratch.fft);
        let inv_n = 1.0 / n as f64;
        for k in 0..n {
            e_out[k] = scratch.freq_e[k].re * inv_n;
            h_out[k] = scratch.freq_h[k].re * inv_n;
        }

        #[cfg(debug_assertions)]
        self.check_residual(e_in, h_in, e_out, h_out, params);

        Ok(())
    }

    /// Allocating convenience wrapper around [`Self::solve_pair`].
    pub fn solve_pair_line(
        &self,
        e_line: &[f64],
        h_line: &[f64],
        params: LineSystemParams,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut e_out = vec![0.0; self.len()];
        let mut h_out = vec![0.0; self.len()];
        let mut scratch = self.make_scratch();
        self.solve_pair(e_line, h_line, &mut e_out, &mut h_out, params, &mut scratch)?;
        Ok((e_out, h_out))
    }

    /// Compact-difference derivative `(1/h) A^{-1} B u`, the approximation
    /// of `du/dx` the implicit stages are built from.
    pub fn compact_derivative(&self, line: &[f64], h: f64) -> Result<Vec<f64>> {
        let n = self.len();
        if line.len() != n {
            return Err(Error::LineLength {
                expected: n,
                actual: line.len(),
            });
        }
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::InvalidCoefficient {
                name: "h",
                value: h,
            });
        }
        let mut scratch = self.make_scratch();
        for (slot, &v) in scratch.freq_e.iter_mut().zip(line) {
            *slot = Complex64::new(v, 0.0);
        }
        self.forward
            .process_with_scratch(&mut scratch.freq_e, &mut scratch.fft);
        for k in 0..n {
            let t = self.spectra.diff[k] / (self.spectra.mass[k] * h);
            let z = scratch.freq_e[k];
            scratch.freq_e[k] = Complex64::new(-t * z.im, t * z.re);
        }
        self.inverse
            .process_with_scratch(&mut scratch.freq_e, &mut scratch.fft);
        let inv_n = 1.0 / n as f64;
        Ok(scratch.freq_e.iter().map(|z| z.re * inv_n).collect())
    }

    #[cfg(debug_assertions)]
    fn check_residual(
        &self,
        e_in: &[f64],
        h_in: &[f64],
        e_out: &[f64],
        h_out: &[f64],
        params: LineSystemParams,
    ) {
        let sc = params.sign.value() * params.c;
        let ae_out = apply_stencil(e_out, Stencil::Average).unwrap();
        let ah_out = apply_stencil(h_out, Stencil::Average).unwrap();
        let be_out = apply_stencil(e_out, Stencil::Difference).unwrap();
        let bh_out = apply_stencil(h_out, Stencil::Difference).unwrap();
        let ae_in = apply_stencil(e_in, Stencil::Average).unwrap();
        let ah_in = apply_stencil(h_in, Stencil::Average).unwrap();
        let be_in = apply_stencil(e_in, Stencil::Difference).unwrap();
        let bh_in = apply_stencil(h_in, Stencil::Difference).unwrap();
        let mut max_res = 0.0_f64;
        let mut max_in = 0.0_f64;
        for k in 0..self.len() {
            let r1 = params.eps * (ae_out[k] - ae_in[k]) - sc * (bh_out[k] + bh_in[k]);
            let r2 = params.mu * (ah_out[k] - ah_in[k]) - sc * (be_out[k] + be_in[k]);
            max_res = max_res.max(r1.abs()).max(r2.abs());
            max_in = max_in.max(e_in[k].abs()).max(h_in[k].abs());
        }
        let tol = 1e-12 * (1.0 + max_in);
        debug_assert!(
            max_res <= tol,
            "line solve residual {max_res:.3e} exceeds {tol:.3e}"
        );
    }
}
