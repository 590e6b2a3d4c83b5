//! Hermite-Gaussian fields, their angular spectra, Gaussian-beam geometry and
//! the diagonal (45°-rotated) HG expansion.
//!
//! Everything here is a pure function of its arguments. Lengths are SI meters,
//! transverse wave vectors are 1/m.
//!
//! Phase conventions:
//! * the field is `C_nm / w · H_n(√2x/w) H_m(√2y/w) · exp(-r²/w²) · exp(-i k r²/2R - i(N+1)ε)`;
//! * the angular spectrum is its unitary 2D Fourier transform at `z = 0`, which
//!   fixes `D_nm = (-i)^(n+m) · C_nm / 2`;
//! * the radius of curvature is the standard `R(z) = z (1 + z_R²/z²)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{finite, Error, Result};

pub type ComplexAmplitude = Complex64;

/// Largest n for which `n!` is tabulated exactly.
const EXACT_FACTORIAL_MAX: u32 = 20;

/// Largest diagonal-mode order whose polynomial coefficients fit in `i128`.
const DHG_MAX_ORDER: u32 = 120;

/// HG mode label `(n, m)`: `n` counts x nodes, `m` counts y nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub n: u32,
    pub m: u32,
}

impl ModeIndex {
    pub const fn new(n: u32, m: u32) -> Self {
        Self { n, m }
    }

    pub const fn order(&self) -> u32 {
        self.n + self.m
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n < 10 && self.m < 10 {
            write!(f, "HG{}{}", self.n, self.m)
        } else {
            write!(f, "HG{},{}", self.n, self.m)
        }
    }
}

/// Wavelength and waist of a Gaussian beam focused at `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    wavelength: f64,
    waist: f64,
}

impl BeamGeometry {
    pub fn new(wavelength: f64, waist: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidInput(format!("wavelength must be positive, got {wavelength}")));
        }
        if !(waist.is_finite() && waist > 0.0) {
            return Err(Error::InvalidInput(format!("waist must be positive, got {waist}")));
        }
        Ok(Self { wavelength, waist })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn rayleigh_range(&self) -> f64 {
        self.wavenumber() * self.waist * self.waist / 2.0
    }

    /// `w(z) = w0 √(1 + z²/z_R²)`
    pub fn beam_width(&self, z: f64) -> f64 {
        let zr = self.rayleigh_range();
        self.waist * (1.0 + (z / zr).powi(2)).sqrt()
    }

    /// `R(z) = z (1 + z_R²/z²)`; the wavefront is flat at the waist, so `z = 0` is rejected.
    pub fn radius_of_curvature(&self, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Err(Error::Domain("radius of curvature is infinite at z = 0".into()));
        }
        let zr = self.rayleigh_range();
        Ok(z * (1.0 + (zr / z).powi(2)))
    }

    /// `ε(z) = arctan(z / z_R)`
    pub fn gouy_phase(&self, z: f64) -> f64 {
        (z / self.rayleigh_range()).atan()
    }
}

const FACTORIALS: [u64; 21] = {
    let mut table = [1u64; 21];
    let mut i = 1;
    while i < 21 {
        table[i] = table[i - 1] * i as u64;
        i += 1;
    }
    table
};

/// `ln(n!)`, exact-table below 21 and log-gamma above.
pub fn ln_factorial(n: u32) -> f64 {
    if n <= EXACT_FACTORIAL_MAX {
        (FACTORIALS[n as usize] as f64).ln()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `n!` as a float; range error once it overflows `f64`.
pub fn factorial(n: u32) -> Result<f64> {
    if n <= EXACT_FACTORIAL_MAX {
        Ok(FACTORIALS[n as usize] as f64)
    } else {
        finite(ln_factorial(n).exp(), || format!("{n}! overflows f64"))
    }
}

/// Binomial coefficient `C(n, k)` as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Physicists' Hermite polynomial `H_n(x)` by the three-term recurrence
/// `H_{k+1} = 2x H_k - 2k H_{k-1}`.
pub fn hermite_poly(n: u32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("hermite argument must be finite, got {x}")));
    }
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    finite(cur, || format!("H_{n}({x}) overflows f64"))
}

/// `H_n(0)`: zero for odd `n`, `(-1)^(n/2) n! / (n/2)!` for even `n`.
pub fn hermite_at_origin(n: u32) -> Result<f64> {
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let sign = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let magnitude = (ln_factorial(n) - ln_factorial(n / 2)).exp();
    finite(sign * magnitude, || format!("H_{n}(0) overflows f64"))
}

/// `C_nm = √(2 / (2^(n+m) π n! m!))`
pub fn normalization_c(mode: ModeIndex) -> Result<f64> {
    let order = mode.order();
    let value = if mode.n <= EXACT_FACTORIAL_MAX && mode.m <= EXACT_FACTORIAL_MAX {
        let (lo, hi) = (mode.n.min(mode.m), mode.n.max(mode.m));
        let denom = 2f64.powi(order as i32) * PI * factorial(lo)? * factorial(hi)?;
        (2.0 / denom).sqrt()
    } else {
        let ln = 0.5
            * ((1.0 - order as f64) * std::f64::consts::LN_2
                - PI.ln()
                - ln_factorial(mode.n.min(mode.m))
                - ln_factorial(mode.n.max(mode.m)));
        ln.exp()
    };
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Range(format!("normalization constant of {mode} underflows")))
    }
}

/// `(-i)^k`
pub(crate) fn neg_i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Complex field amplitude of `HG_nm` at `(x, y, z)`. At the waist plane the
/// curvature phase is dropped (`R → ∞`).
pub fn hg_field(mode: ModeIndex, geom: &BeamGeometry, x: f64, y: f64, z: f64) -> Result<ComplexAmplitude> {
    let w = geom.beam_width(z);
    let hx = hermite_poly(mode.n, SQRT_2 * x / w)?;
    let hy = hermite_poly(mode.m, SQRT_2 * y / w)?;
    let r2 = x * x + y * y;
    let amplitude = normalization_c(mode)? / w * hx * hy * (-r2 / (w * w)).exp();

    let curvature = if z == 0.0 {
        0.0
    } else {
        geom.wavenumber() * r2 / (2.0 * geom.radius_of_curvature(z)?)
    };
    let phase = -curvature - (mode.order() + 1) as f64 * geom.gouy_phase(z);
    Ok(Complex64::from_polar(amplitude, phase))
}

/// One transverse factor of the angular spectrum: `H_n(w q / √2) · exp(-w² q² / 4)`.
pub fn spectrum_axis_factor(n: u32, width: f64, q: f64) -> Result<f64> {
    let h = hermite_poly(n, width * q * FRAC_1_SQRT_2)?;
    Ok(h * (-width * width * q * q / 4.0).exp())
}

/// Everything in `v_nm` that does not depend on `q`: `w(z) · D_nm · exp(-i(N+1)ε(z))`
/// with `D_nm = (-i)^(n+m) C_nm / 2`.
pub fn spectrum_prefactor(mode: ModeIndex, geom: &BeamGeometry, z: f64) -> Result<Complex64> {
    let w = geom.beam_width(z);
    let gouy = Complex64::from_polar(1.0, -((mode.order() + 1) as f64) * geom.gouy_phase(z));
    Ok(neg_i_pow(mode.order()) * (w * normalization_c(mode)? / 2.0) * gouy)
}

/// Normalized angular spectrum `v_nm(q)` of the mode, as seen at plane `z`.
pub fn angular_spectrum(
    mode: ModeIndex,
    geom: &BeamGeometry,
    qx: f64,
    qy: f64,
    z: f64,
) -> Result<ComplexAmplitude> {
    let w = geom.beam_width(z);
    let fx = spectrum_axis_factor(mode.n, w, qx)?;
    let fy = spectrum_axis_factor(mode.m, w, qy)?;
    Ok(spectrum_prefactor(mode, geom, z)? * (fx * fy))
}

/// Coefficients of `(1 - t)^n (1 + t)^m`, lowest power first.
fn dhg_polynomial(n: u32, m: u32) -> Result<Vec<i128>> {
    if n + m > DHG_MAX_ORDER {
        return Err(Error::Range(format!(
            "diagonal-mode order {} exceeds {DHG_MAX_ORDER}",
            n + m
        )));
    }
    let mut poly = vec![1i128];
    let factors = std::iter::repeat_n(-1i128, n as usize).chain(std::iter::repeat_n(1, m as usize));
    for slope in factors {
        let mut next = vec![0i128; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] += slope * c;
        }
        poly = next;
    }
    Ok(poly)
}

/// `b(n, m, k)`: weight of `HG_{N-k,k}` in the diagonal mode `DHG_nm`.
pub fn dhg_coefficient(n: u32, m: u32, k: u32) -> Result<f64> {
    let order = n + m;
    if k > order {
        return Err(Error::Domain(format!("b({n},{m},{k}) needs k <= n+m = {order}")));
    }
    let coeff = dhg_polynomial(n, m)?[k as usize];
    if coeff == 0 {
        return Ok(0.0);
    }
    let scale = if order <= EXACT_FACTORIAL_MAX {
        let num = factorial(order - k)? * factorial(k)?;
        let den = 2f64.powi(order as i32) * factorial(n)? * factorial(m)?;
        (num / den).sqrt()
    } else {
        (0.5 * (ln_factorial(order - k) + ln_factorial(k)
            - order as f64 * std::f64::consts::LN_2
            - ln_factorial(n)
            - ln_factorial(m)))
        .exp()
    };
    finite(coeff as f64 * scale, || format!("b({n},{m},{k}) overflows"))
}

/// Expansion of `DHG_nm` over the same-order HG modes `HG_{N-k,k}`, `k = 0..=N`.
pub fn dhg_expand(mode: ModeIndex) -> Result<Vec<(ModeIndex, f64)>> {
    let order = mode.order();
    (0..=order)
        .map(|k| Ok((ModeIndex::new(order - k, k), dhg_coefficient(mode.n, mode.m, k)?)))
        .collect()
}
