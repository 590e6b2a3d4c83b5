//! Two-photon HG expansion coefficients `C^{nm}_{jkut}`.
//!
//! The coefficient of `|v_jk⟩_s |v_ut⟩_i` in the state produced by an `HG_nm`
//! pump is the overlap
//!
//! ```text
//! C = (1/π) √(2L/K) ∫∫ v*_jk(q_s) v*_ut(q_i) V_nm(q_s + q_i) sinc(L |q_s - q_i|² / 4K)
//! ```
//!
//! with signal/idler modes of wavelength `2λ_p` and waist `√2 w_0p`. Two
//! closed forms are provided: the exact finite sum and the thin-crystal limit
//! (`sinc → 1`). Both are pinned to the overlap integral by [`CALIBRATION`];
//! see the `oracle` module for the quadrature that fixes it.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::gaussian_modes::{binomial, dhg_coefficient, hg_field, ln_factorial, BeamGeometry, ModeIndex};
use crate::oracle::{self, QuadratureSpec};

/// Ratio between the overlap integral and the bare closed-form sum
/// (`C_exact = CALIBRATION × closed_form_uncalibrated`).
pub const CALIBRATION: f64 = 2.0;

/// Factor applied to the dimensionless origin value `w_0p · HG_ab(0,0,0)` in
/// the thin-crystal formula.
pub const THIN_ORIGIN_SCALE: f64 = 1.772_453_850_905_516; // √π

pub const DEFAULT_MAX_ORDER: u32 = 6;
pub const MAX_ORDER_CEILING: u32 = 40;

/// Tolerance on `Σ|weight|² = 1` for a pump superposition.
const PUMP_NORM_TOL: f64 = 1e-12;

/// Nonlinear crystal and pump parameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalConfig {
    length: f64,
    pump_wavelength: f64,
    pump_waist: f64,
}

impl CrystalConfig {
    pub fn new(length: f64, pump_wavelength: f64, pump_waist: f64) -> Result<Self> {
        for (name, v) in [("crystal length", length), ("pump wavelength", pump_wavelength), ("pump waist", pump_waist)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { length, pump_wavelength, pump_waist })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn pump_wavelength(&self) -> f64 {
        self.pump_wavelength
    }

    pub fn pump_waist(&self) -> f64 {
        self.pump_waist
    }

    /// `K = 2π / λ_p`
    pub fn pump_wavenumber(&self) -> f64 {
        2.0 * PI / self.pump_wavelength
    }

    /// Focusing parameter `A = L / (K w_0p²)`.
    pub fn param_a(&self) -> f64 {
        self.length / (self.pump_wavenumber() * self.pump_waist * self.pump_waist)
    }

    pub fn pump_geometry(&self) -> BeamGeometry {
        BeamGeometry::new(self.pump_wavelength, self.pump_waist).expect("validated on construction")
    }

    /// Signal/idler beams: `λ_c = 2λ_p`, `w_0c = √2 w_0p`.
    pub fn down_converted_geometry(&self) -> BeamGeometry {
        BeamGeometry::new(2.0 * self.pump_wavelength, SQRT_2 * self.pump_waist).expect("validated on construction")
    }
}

impl Default for CrystalConfig {
    /// λ_p = 351 nm, w_0p = 0.1 mm, L = 1 mm.
    fn default() -> Self {
        Self { length: 1e-3, pump_wavelength: 351e-9, pump_waist: 0.1e-3 }
    }
}

pub fn param_a(config: &CrystalConfig) -> f64 {
    config.param_a()
}

/// Coherent superposition of HG pump modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    components: Vec<(ModeIndex, Complex64)>,
}

impl PumpSpec {
    pub fn single(mode: ModeIndex) -> Self {
        Self { components: vec![(mode, Complex64::new(1.0, 0.0))] }
    }

    pub fn superposition(components: Vec<(ModeIndex, Complex64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("pump needs at least one component".into()));
        }
        let norm: f64 = components.iter().map(|(_, w)| w.norm_sqr()).sum();
        if (norm - 1.0).abs() > PUMP_NORM_TOL {
            return Err(Error::InvalidInput(format!("pump weights must satisfy Σ|w|² = 1, got {norm}")));
        }
        Ok(Self { components })
    }

    /// Rescales arbitrary nonzero weights to unit norm.
    pub fn normalized(components: Vec<(ModeIndex, Complex64)>) -> Result<Self> {
        let norm: f64 = components.iter().map(|(_, w)| w.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidInput("pump weights must not all vanish".into()));
        }
        Self::superposition(components.into_iter().map(|(m, w)| (m, w / norm)).collect())
    }

    pub fn components(&self) -> &[(ModeIndex, Complex64)] {
        &self.components
    }

    /// The pump mode when there is exactly one component.
    pub fn single_mode(&self) -> Option<ModeIndex> {
        match self.components.as_slice() {
            [(mode, _)] => Some(*mode),
            _ => None,
        }
    }
}

impl fmt::Display for PumpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let [(mode, w)] = self.components.as_slice() {
            if *w == Complex64::new(1.0, 0.0) {
                return write!(f, "{mode}");
            }
        }
        for (i, (mode, w)) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)·{}", w.re, w.im, mode)?;
        }
        Ok(())
    }
}

/// Signal `(j, k)` and idler `(u, t)` mode indices. Ordering is lexicographic in `(j, k, u, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoeffKey {
    pub j: u32,
    pub k: u32,
    pub u: u32,
    pub t: u32,
}

impl CoeffKey {
    pub const fn new(j: u32, k: u32, u: u32, t: u32) -> Self {
        Self { j, k, u, t }
    }

    pub const fn order(&self) -> u32 {
        self.j + self.k + self.u + self.t
    }

    /// `N = j + u`
    pub const fn x_sum(&self) -> u32 {
        self.j + self.u
    }

    /// `M = k + t`
    pub const fn y_sum(&self) -> u32 {
        self.k + self.t
    }

    pub const fn signal(&self) -> ModeIndex {
        ModeIndex::new(self.j, self.k)
    }

    pub const fn idler(&self) -> ModeIndex {
        ModeIndex::new(self.u, self.t)
    }

    /// Signal and idler exchanged.
    pub const fn swapped(&self) -> Self {
        Self::new(self.u, self.t, self.j, self.k)
    }

    /// All keys with `j + k + u + t ≤ max_order`, lexicographically.
    pub fn up_to_order(max_order: u32) -> impl Iterator<Item = CoeffKey> {
        (0..=max_order).flat_map(move |j| {
            (0..=max_order - j).flat_map(move |k| {
                (0..=max_order - j - k).flat_map(move |u| (0..=max_order - j - k - u).map(move |t| CoeffKey::new(j, k, u, t)))
            })
        })
    }
}

impl fmt::Display for CoeffKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.j, self.k, self.u, self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Thin,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Thin => "thin",
            Method::Oracle => "oracle",
        })
    }
}

/// Order and parity rules: `j+u ≥ n`, `k+t ≥ m`, `j+u ≡ n`, `k+t ≡ m (mod 2)`.
pub fn conservation_allowed(pump_mode: ModeIndex, key: CoeffKey) -> bool {
    let (nx, my) = (key.x_sum(), key.y_sum());
    nx >= pump_mode.n && my >= pump_mode.m && (nx - pump_mode.n).is_multiple_of(2) && (my - pump_mode.m).is_multiple_of(2)
}

/// `(1/2)^((α+β)/2) √(α! β!) / ((α/2)! (β/2)!)` for even α, β.
fn even_order_weight(alpha: u32, beta: u32) -> f64 {
    let ln = 0.5 * (ln_factorial(alpha) + ln_factorial(beta))
        - ((alpha + beta) / 2) as f64 * std::f64::consts::LN_2
        - ln_factorial(alpha / 2)
        - ln_factorial(beta / 2);
    ln.exp()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// The closed-form sum without the calibration factor.
pub fn closed_form_uncalibrated(config: &CrystalConfig, pump_mode: ModeIndex, key: CoeffKey) -> Result<f64> {
    if !conservation_allowed(pump_mode, key) {
        return Ok(0.0);
    }
    let alpha = key.x_sum() - pump_mode.n;
    let beta = key.y_sum() - pump_mode.m;
    let b = dhg_coefficient(key.j, key.u, alpha)? * dhg_coefficient(key.k, key.t, beta)?;
    if b == 0.0 {
        return Ok(0.0);
    }

    let a = config.param_a();
    let theta = a.atan();
    let half = (alpha + beta) / 2;
    let ratio = -2.0 / (1.0 + a * a).sqrt();
    let series: f64 = (0..=half)
        .map(|r| binomial(half, r) * ratio.powi(r as i32) * sinc(r as f64 * theta))
        .sum();

    let value = (1.0 / (a * PI)).sqrt() * even_order_weight(alpha, beta) * theta * b * series;
    finite(value, || format!("C^{pump_mode}_{key} overflows"))
}

/// Exact two-photon coefficient for a single HG pump mode.
pub fn coeff_exact(config: &CrystalConfig, pump_mode: ModeIndex, key: CoeffKey) -> Result<f64> {
    Ok(CALIBRATION * closed_form_uncalibrated(config, pump_mode, key)?)
}

/// Thin-crystal (`sinc → 1`) approximation of [`coeff_exact`].
pub fn coeff_thin(config: &CrystalConfig, pump_mode: ModeIndex, key: CoeffKey) -> Result<f64> {
    if !conservation_allowed(pump_mode, key) {
        return Ok(0.0);
    }
    let alpha = key.x_sum() - pump_mode.n;
    let beta = key.y_sum() - pump_mode.m;
    let b = dhg_coefficient(key.j, key.u, alpha)? * dhg_coefficient(key.k, key.t, beta)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    let pump = config.pump_geometry();
    let origin = hg_field(ModeIndex::new(alpha, beta), &pump, 0.0, 0.0, 0.0)?.re * pump.waist();
    let value = (2.0 * config.param_a() / PI).sqrt() * b * THIN_ORIGIN_SCALE * origin;
    finite(value, || format!("thin C^{pump_mode}_{key} overflows"))
}

/// Knobs for [`build_state_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub order_ceiling: u32,
    /// Used when the method is [`Method::Oracle`].
    pub quadrature: QuadratureSpec,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { order_ceiling: MAX_ORDER_CEILING, quadrature: QuadratureSpec::default() }
    }
}

/// Truncated two-photon state: sparse map from allowed keys to amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPhotonAmplitudes {
    pump: PumpSpec,
    config: CrystalConfig,
    max_order: u32,
    method: Method,
    amplitudes: BTreeMap<CoeffKey, Complex64>,
}

impl TwoPhotonAmplitudes {
    /// Assembles a state from explicit amplitudes; non-finite amplitudes are rejected.
    pub fn from_amplitudes(
        pump: PumpSpec,
        config: CrystalConfig,
        max_order: u32,
        method: Method,
        amplitudes: BTreeMap<CoeffKey, Complex64>,
    ) -> Result<Self> {
        if let Some((key, _)) = amplitudes.iter().find(|(_, a)| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::Range(format!("amplitude for {key} is not finite")));
        }
        if let Some(key) = amplitudes.keys().find(|k| k.order() > max_order) {
            return Err(Error::InvalidInput(format!("{key} exceeds truncation order {max_order}")));
        }
        Ok(Self { pump, config, max_order, method, amplitudes })
    }

    pub fn pump(&self) -> &PumpSpec {
        &self.pump
    }

    pub fn config(&self) -> &CrystalConfig {
        &self.config
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn amplitudes(&self) -> &BTreeMap<CoeffKey, Complex64> {
        &self.amplitudes
    }

    /// Amplitude of `key`; zero when absent.
    pub fn amplitude(&self, key: CoeffKey) -> Complex64 {
        self.amplitudes.get(&key).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// `Σ |amplitude|²` in key order.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// Same state rescaled to unit norm over its truncation.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm.is_nan() || norm == 0.0 {
            return Err(Error::EmptyPostselection);
        }
        let mut out = self.clone();
        out.amplitudes.values_mut().for_each(|a| *a /= norm);
        Ok(out)
    }

    /// Keeps only keys matching `keep`. Not renormalized.
    pub fn filtered(&self, mut keep: impl FnMut(&CoeffKey) -> bool) -> Self {
        let mut out = self.clone();
        out.amplitudes.retain(|k, _| keep(k));
        out
    }
}

/// `Σ |amplitude|²` over keys of order ≤ `up_to_order`.
pub fn total_probability(state: &TwoPhotonAmplitudes, up_to_order: u32) -> Result<f64> {
    if up_to_order > state.max_order {
        return Err(Error::InvalidInput(format!(
            "order {up_to_order} exceeds the state's truncation {}",
            state.max_order
        )));
    }
    Ok(state
        .amplitudes
        .iter()
        .filter(|(k, _)| k.order() <= up_to_order)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// Cumulative probabilities for orders `0..=state.max_order()`.
pub fn cumulative_probabilities(state: &TwoPhotonAmplitudes) -> Vec<f64> {
    let mut per_order = vec![0.0; state.max_order as usize + 1];
    for (k, a) in &state.amplitudes {
        per_order[k.order() as usize] += a.norm_sqr();
    }
    per_order
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

/// True iff `C(j,k,u,t) = C(u,t,j,k)` for every stored key, to 1e-12.
/// Meaningful for single-mode pumps.
pub fn exchange_symmetry_check(state: &TwoPhotonAmplitudes) -> bool {
    state
        .amplitudes
        .iter()
        .all(|(k, a)| (*a - state.amplitude(k.swapped())).norm() <= 1e-12)
}

pub fn build_state(config: &CrystalConfig, pump: &PumpSpec, max_order: u32, method: Method) -> Result<TwoPhotonAmplitudes> {
    build_state_with(config, pump, max_order, method, &BuildOptions::default())
}

/// Amplitudes of every allowed key up to `max_order`, summed over pump components.
pub fn build_state_with(
    config: &CrystalConfig,
    pump: &PumpSpec,
    max_order: u32,
    method: Method,
    options: &BuildOptions,
) -> Result<TwoPhotonAmplitudes> {
    if max_order > options.order_ceiling {
        return Err(Error::InvalidInput(format!(
            "max order {max_order} exceeds the ceiling {}",
            options.order_ceiling
        )));
    }
    let keys: Vec<CoeffKey> = CoeffKey::up_to_order(max_order)
        .filter(|key| pump.components().iter().any(|(mode, _)| conservation_allowed(*mode, *key)))
        .collect();

    let values: Vec<Complex64> = keys
        .par_iter()
        .map(|key| {
            pump.components().iter().try_fold(Complex64::default(), |acc, (mode, weight)| {
                let c = match method {
                    Method::Exact => coeff_exact(config, *mode, *key)?,
                    Method::Thin => coeff_thin(config, *mode, *key)?,
                    Method::Oracle => {
                        if conservation_allowed(*mode, *key) {
                            oracle::coeff_quadrature_2d(config, *mode, *key, &options.quadrature)?.value
                        } else {
                            0.0
                        }
                    }
                };
                Ok(acc + weight * c)
            })
        })
        .collect::<Result<_>>()?;

    TwoPhotonAmplitudes::from_amplitudes(
        pump.clone(),
        *config,
        max_order,
        method,
        keys.into_iter().zip(values).collect(),
    )
}
