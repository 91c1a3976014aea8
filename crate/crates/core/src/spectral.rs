//! DFT-domain closed forms of the refocused-image errors.
//!
//! With `E_s` the (non-unitary) spectrum of the error of view `s`, refocusing
//! at `r` multiplies `E_s` by `e^{j r ω'·s}`. Averaging the squared error over
//! `r` therefore only touches the phase difference of each view pair:
//!
//! ```text
//!   UCRIE₂ = 1/(V²·M·HW) Σ_{s,t} Σ_ω E_s(ω) conj(E_t(ω)) · K(ω'·(s − t))
//! ```
//!
//! with `V = (2N+1)²`, `M = H·W·C`, `K(x) = sinc(D·x)` for UCRIE₂ and
//! `K(x) = (√π / 2D) e^{-x²/4}` for CRIE₂. The extra `1/HW` relative to the
//! per-pixel mean comes from Parseval for the non-unitary transform.
//!
//! On self-conjugate Nyquist bins the spectral shift engine applies
//! `cos(r ω'·s)` instead of a phase, so those bins contribute
//! `½[K(ω'·(s − t)) + K(ω'·(s + t))]`. The extra `½[K(s + t) − K(s − t)]`
//! part is reported separately as `nyquist_term`; it vanishes for odd sizes.
//!
//! The `literal` value evaluates the product `E_s(ω) E_t(ω)` (no conjugate)
//! with `K(ω'·(s + t))`. It is reported for comparison only.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fft::Fft2;
use crate::lightfield::{angular_indices, AngularIndex, LightField, View};

/// Per-view, per-channel error spectra `E_s = DFT(L̂_s − L_s)`.
#[derive(Clone, Debug)]
pub struct ErrorSpectra {
    radius: usize,
    height: usize,
    width: usize,
    channels: usize,
    /// `[view][channel * H·W + bin]`
    spectra: Vec<Vec<Complex64>>,
}

pub fn view_error_spectra(lhat: &LightField, l: &LightField) -> Result<ErrorSpectra> {
    let err = lhat.sub(l)?;
    let (h, w, c) = err.view_dims();
    let plan = Fft2::plan(h, w);
    let spectra = err
        .views()
        .iter()
        .map(|v| {
            (0..c)
                .flat_map(|ch| plan.forward_real_channel(v.data(), c, ch))
                .collect()
        })
        .collect();
    Ok(ErrorSpectra {
        radius: err.radius(),
        height: h,
        width: w,
        channels: c,
        spectra,
    })
}

impl ErrorSpectra {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Spectrum value of view `view` (storage order), channel `c`, bin `(ky, kx)`.
    pub fn get(&self, view: usize, c: usize, ky: usize, kx: usize) -> Complex64 {
        let hw = self.height * self.width;
        self.spectra[view][c * hw + ky * self.width + kx]
    }

    /// Inverse transform back to the error light field.
    pub fn inverse(&self) -> LightField {
        let (h, w, c) = self.dims();
        let hw = h * w;
        let plan = Fft2::plan(h, w);
        let views = self
            .spectra
            .iter()
            .map(|spec| {
                let mut out = View::zeros(h, w, c);
                for ch in 0..c {
                    let mut buf = spec[ch * hw..(ch + 1) * hw].to_vec();
                    plan.inverse(&mut buf);
                    for (i, z) in buf.iter().enumerate() {
                        out.data_mut()[i * c + ch] = z.re;
                    }
                }
                out
            })
            .collect();
        LightField::new(self.radius, views).expect("spectra have light-field shape")
    }

    /// Largest `|E(−ω) − conj(E(ω))|` over all views, channels and bins.
    pub fn hermitian_residual(&self) -> f64 {
        let (h, w, c) = self.dims();
        let hw = h * w;
        let plan = Fft2::plan(h, w);
        let grid = plan.grid();
        let mut worst: f64 = 0.0;
        for spec in &self.spectra {
            for ch in 0..c {
                for bin in 0..hw {
                    let a = spec[ch * hw + bin];
                    let b = spec[ch * hw + grid.partner(bin)];
                    worst = worst.max((b - a.conj()).norm());
                }
            }
        }
        worst
    }
}

/// Weighting filter of a view pair in the DFT domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpectralFilter {
    /// `sinc(D·x)`, from the unweighted integral over `[-D, D]`.
    Sinc,
    /// `(√π / 2D) e^{-x²/4}`, from the Gaussian-weighted integral.
    Gauss,
}

impl SpectralFilter {
    pub fn eval(self, d: f64, x: f64) -> f64 {
        match self {
            SpectralFilter::Sinc => sinc(d * x),
            SpectralFilter::Gauss => PI.sqrt() / (2.0 * d) * (-0.25 * x * x).exp(),
        }
    }
}

/// Unnormalized sinc, `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Closed-form evaluation of a refocused-image error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralIdentity {
    /// Hermitian form; equals the quadrature of the spectral-phase engine.
    pub canonical: f64,
    /// Imaginary residue of the canonical double sum before it is dropped.
    pub canonical_imag: f64,
    /// Product without conjugation, filter evaluated at `ω'·(s + t)`.
    pub literal: f64,
    /// Canonical double sum (without the Nyquist correction) restricted to `s = t`.
    pub diagonal: f64,
    /// Correction carried by self-conjugate Nyquist bins; included in `canonical`.
    pub nyquist_term: f64,
}

fn dot(omega: (f64, f64), idx: (f64, f64)) -> f64 {
    // ω' = (ω_y, ω_x) pairs with (t, s).
    omega.1 * idx.0 + omega.0 * idx.1
}

fn spectral_identity(spectra: &ErrorSpectra, filter: SpectralFilter, d: f64) -> SpectralIdentity {
    let (h, w, c) = spectra.dims();
    let hw = h * w;
    let plan = Fft2::plan(h, w);
    let grid = plan.grid();
    let idx: Vec<(f64, f64)> = angular_indices(spectra.radius)
        .map(AngularIndex::as_f64)
        .collect();
    let views = idx.len();

    let mut principal = Complex64::default();
    let mut nyquist = Complex64::default();
    let mut literal = Complex64::default();
    let mut diagonal = 0.0;
    for ch in 0..c {
        for bin in 0..hw {
            let omega = grid.omega(bin);
            let self_conj = grid.is_self_conjugate(bin);
            for (a, ia) in idx.iter().enumerate() {
                let ea = spectra.spectra[a][ch * hw + bin];
                for (b, ib) in idx.iter().enumerate() {
                    let eb = spectra.spectra[b][ch * hw + bin];
                    let diff = filter.eval(d, dot(omega, (ia.0 - ib.0, ia.1 - ib.1)));
                    let sum = filter.eval(d, dot(omega, (ia.0 + ib.0, ia.1 + ib.1)));
                    let hermitian = ea * eb.conj();
                    principal += hermitian * diff;
                    if self_conj {
                        nyquist += hermitian * (0.5 * (sum - diff));
                    }
                    literal += ea * eb * sum;
                    if a == b {
                        diagonal += hermitian.re * diff;
                    }
                }
            }
        }
    }
    let norm = 1.0 / ((views * views) as f64 * (c * hw) as f64 * hw as f64);
    let canonical = (principal + nyquist) * norm;
    debug_assert!(
        canonical.im.abs() <= 1e-9 * canonical.re.abs().max(1.0),
        "canonical double sum is not real: {canonical}"
    );
    SpectralIdentity {
        canonical: canonical.re,
        canonical_imag: canonical.im,
        literal: literal.re * norm,
        diagonal: diagonal * norm,
        nyquist_term: nyquist.re * norm,
    }
}

/// UCRIE₂ in closed form (sinc filter).
pub fn ucrie2_spectral(lhat: &LightField, l: &LightField, d: f64) -> Result<SpectralIdentity> {
    check_d(d)?;
    Ok(spectral_identity(
        &view_error_spectra(lhat, l)?,
        SpectralFilter::Sinc,
        d,
    ))
}

/// CRIE₂ in closed form (Gaussian filter).
pub fn crie2_spectral(lhat: &LightField, l: &LightField, d: f64) -> Result<SpectralIdentity> {
    check_d(d)?;
    Ok(spectral_identity(
        &view_error_spectra(lhat, l)?,
        SpectralFilter::Gauss,
        d,
    ))
}

/// Either closed form from precomputed spectra.
pub fn spectral_identity_from(
    spectra: &ErrorSpectra,
    filter: SpectralFilter,
    d: f64,
) -> Result<SpectralIdentity> {
    check_d(d)?;
    Ok(spectral_identity(spectra, filter, d))
}

fn check_d(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("D must be positive, got {d}")))
    }
}

/// VWE₂ through Parseval: `1/(M·HW) Σ_s Σ_ω |E_s(ω)|²`.
pub fn vwe2_spectral(lhat: &LightField, l: &LightField) -> Result<f64> {
    let spectra = view_error_spectra(lhat, l)?;
    let (h, w, c) = spectra.dims();
    let power: f64 = spectra
        .spectra
        .iter()
        .flat_map(|s| s.iter())
        .map(|z| z.norm_sqr())
        .sum();
    Ok(power / ((h * w * c) as f64 * (h * w) as f64))
}

/// Samples `K(ω·u)` over the square `[-π, π]²` as a `size × size` image.
///
/// Columns run from `ω_x = -π` (left) to `π` (right) and rows from
/// `ω_y = π` (top) to `-π` (bottom), so `u = (1, 1)` draws its ridge
/// `ω·u = 0` from top-left to bottom-right.
pub fn directional_weight_map(
    u: (f64, f64),
    d: f64,
    filter: SpectralFilter,
    size: usize,
) -> Result<View> {
    if size.is_multiple_of(2) {
        return Err(invalid(format!("weight map size must be odd, got {size}")));
    }
    check_d(d)?;
    let axis = |i: usize| -> f64 {
        if size == 1 {
            0.0
        } else {
            -PI + 2.0 * PI * i as f64 / (size - 1) as f64
        }
    };
    Ok(View::from_fn(size, size, 1, |row, col, _| {
        let wx = axis(col);
        let wy = -axis(row);
        filter.eval(d, wx * u.0 + wy * u.1)
    }))
}
