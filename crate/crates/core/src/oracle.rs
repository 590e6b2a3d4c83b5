//! Brute-force quadrature of the defining overlap integrals.
//!
//! These routines never touch the closed forms: they integrate products of
//! angular spectra directly and are used to pin [`CALIBRATION`] and to check
//! the closed forms key by key.
//!
//! Two tensor rules are available. `TensorGaussHermite` factors out the
//! Gaussian envelope (the sinc phase-matching term is smooth for the crystal
//! lengths of interest); `AdaptiveCartesian` is a composite Gauss-Legendre rule
//! on a truncated box. Both refine by doubling the point count until two
//! successive levels agree to `target_rel_error`.
//!
//! [`CALIBRATION`]: crate::spdc_coeffs::CALIBRATION

use std::f64::consts::{PI, SQRT_2};
use std::num::NonZeroUsize;

use gauss_quad::{GaussHermite, GaussLegendre};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_modes::{spectrum_axis_factor, spectrum_prefactor, BeamGeometry, ModeIndex};
use crate::spdc_coeffs::{closed_form_uncalibrated, CoeffKey, CrystalConfig};

/// Highest key order the oracle accepts.
pub const MAX_ORACLE_ORDER: u32 = 8;

const GL_PANEL_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    TensorGaussHermite,
    AdaptiveCartesian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    /// Starting points per axis; doubled on each refinement.
    pub points_per_axis: usize,
    /// Box half-width for the cartesian scheme, in units of `1/w_0c`.
    pub domain_halfwidth: f64,
    pub target_rel_error: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::TensorGaussHermite,
            points_per_axis: 24,
            domain_halfwidth: 8.0,
            target_rel_error: 1e-9,
        }
    }
}

impl QuadratureSpec {
    pub fn cartesian() -> Self {
        Self { scheme: Scheme::AdaptiveCartesian, points_per_axis: 32, target_rel_error: 1e-7, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 8 {
            return Err(Error::InvalidInput(format!("points_per_axis must be >= 8, got {}", self.points_per_axis)));
        }
        if self.target_rel_error.is_nan() || self.target_rel_error <= 0.0 {
            return Err(Error::InvalidInput("target_rel_error must be positive".into()));
        }
        if !(self.domain_halfwidth > 0.0 && self.domain_halfwidth.is_finite()) {
            return Err(Error::InvalidInput("domain_halfwidth must be positive".into()));
        }
        Ok(())
    }

    /// Largest per-axis point count refinement may reach.
    fn cap(&self, dims: usize) -> usize {
        match (self.scheme, dims) {
            (Scheme::TensorGaussHermite, 2) => 256,
            (Scheme::TensorGaussHermite, _) => 192,
            (Scheme::AdaptiveCartesian, 2) => 1024,
            (Scheme::AdaptiveCartesian, _) => 128,
        }
        .max(self.points_per_axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub est_error: f64,
    /// Tensor-rule nodes summed over all refinement levels. Separable factors are
    /// tabulated, so the integrand itself is evaluated far fewer times.
    pub evaluations: u64,
}

/// Nodes and weights for `∫ f(x) dx` on one axis.
#[derive(Debug, Clone)]
struct AxisRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AxisRule {
    /// Gauss-Hermite nodes scaled by `scale`, with the `e^{-s²}` weight folded back in.
    fn gauss_hermite(n: usize, scale: f64) -> Self {
        let rule = GaussHermite::new(NonZeroUsize::new(n).expect("n >= 8"));
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        symmetrize(&mut pairs);
        let (nodes, weights) = pairs
            .into_iter()
            .map(|(s, w)| {
                let weight = if w > 0.0 { (w.ln() + s * s).exp() * scale } else { 0.0 };
                (s * scale, weight)
            })
            .unzip();
        Self { nodes, weights }
    }

    /// Composite Gauss-Legendre on `[-half, half]` with at least `n` points.
    fn composite_legendre(n: usize, half: f64) -> Self {
        let panels = n.div_ceil(GL_PANEL_POINTS);
        let rule = GaussLegendre::new(NonZeroUsize::new(GL_PANEL_POINTS).unwrap());
        let mut base: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        base.sort_by(|a, b| a.0.total_cmp(&b.0));
        symmetrize(&mut base);
        let width = 2.0 * half / panels as f64;
        let mut nodes = Vec::with_capacity(panels * GL_PANEL_POINTS);
        let mut weights = Vec::with_capacity(panels * GL_PANEL_POINTS);
        for p in 0..panels {
            let centre = -half + (p as f64 + 0.5) * width;
            for &(x, w) in &base {
                nodes.push(centre + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        // Mirror-exact node set.
        let len = nodes.len();
        for i in 0..len / 2 {
            let x = 0.5 * (nodes[len - 1 - i] - nodes[i]);
            nodes[i] = -x;
            nodes[len - 1 - i] = x;
        }
        Self { nodes, weights }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }
}

/// Forces `x_i = -x_{n-1-i}` and equal mirrored weights on a sorted rule.
fn symmetrize(pairs: &mut [(f64, f64)]) {
    let n = pairs.len();
    for i in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[n - 1 - i].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
}

/// One level of a tensor rule: complex estimate, `Σ|w f|` and the tensor size.
struct Level {
    value: Complex64,
    l1: f64,
    evaluations: u64,
}

/// Doubles the per-axis point count until two successive levels agree.
fn refine(spec: &QuadratureSpec, dims: usize, mut level: impl FnMut(usize) -> Result<Level>) -> Result<QuadratureResult> {
    spec.validate()?;
    let cap = spec.cap(dims);
    let mut n = spec.points_per_axis;
    let mut coarse = level(n)?;
    let mut evaluations = coarse.evaluations;
    loop {
        let fine = level(2 * n)?;
        evaluations += fine.evaluations;
        let diff = (fine.value - coarse.value).norm();
        let floor = 64.0 * f64::EPSILON * fine.l1;
        let est_error = diff.max(floor) + fine.value.im.abs();
        if diff <= (spec.target_rel_error * fine.value.re.abs()).max(floor) {
            return Ok(QuadratureResult { value: fine.value.re, est_error, evaluations });
        }
        if 2 * n >= cap {
            return Err(Error::NonConvergence { value: fine.value.re, est_error, evaluations });
        }
        n *= 2;
        coarse = fine;
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

fn check_cost(key: CoeffKey) -> Result<()> {
    if key.order() > MAX_ORACLE_ORDER {
        return Err(Error::InvalidInput(format!(
            "oracle accepts keys of order <= {MAX_ORACLE_ORDER}, got {key}"
        )));
    }
    Ok(())
}

/// `(1/π) √(2L/K) ∫∫ v*_jk(q_s) v*_ut(q_i) V_nm(q_s+q_i) sinc(L|q_s-q_i|²/4K) d²q_s d²q_i`
/// integrated directly in four dimensions.
pub fn coeff_quadrature_4d(
    config: &CrystalConfig,
    pump_mode: ModeIndex,
    key: CoeffKey,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    check_cost(key)?;
    let pump = config.pump_geometry();
    let dc = config.down_converted_geometry();
    let (wp, wc) = (pump.waist(), dc.waist());
    let kappa = config.length() / (4.0 * config.pump_wavenumber());

    let prefactor = (2.0 * config.length() / config.pump_wavenumber()).sqrt() / PI
        * spectrum_prefactor(key.signal(), &dc, 0.0)?.conj()
        * spectrum_prefactor(key.idler(), &dc, 0.0)?.conj()
        * spectrum_prefactor(pump_mode, &pump, 0.0)?;

    // Real part of the integrand along one transverse axis, as a function of
    // (signal q, idler q): signal factor · idler factor · pump factor at the sum.
    let axis = |sig: u32, idl: u32, pmp: u32, qs: f64, qi: f64| -> Result<f64> {
        Ok(spectrum_axis_factor(sig, wc, qs)? * spectrum_axis_factor(idl, wc, qi)? * spectrum_axis_factor(pmp, wp, qs + qi)?)
    };

    match spec.scheme {
        Scheme::TensorGaussHermite => refine(spec, 4, |n| {
            // Sum/difference coordinates Q = q_s + q_i, P = q_s - q_i diagonalize the
            // Gaussian envelope; d²q_s d²q_i = d²Q d²P / 4.
            let q_rule = AxisRule::gauss_hermite(n, SQRT_2 / wp);
            let p_rule = AxisRule::gauss_hermite(n, 2.0 / wp);
            // Q-integrated factor for each P node, with its absolute-value companion
            // (the cancellation scale for keys whose integral vanishes).
            let table = |sig: u32, idl: u32, pmp: u32| -> Result<(Vec<f64>, Vec<f64>)> {
                let mut value = Vec::with_capacity(n);
                let mut magnitude = Vec::with_capacity(n);
                for &p in &p_rule.nodes {
                    let (mut v, mut m) = (0.0, 0.0);
                    for (&q, &w) in q_rule.nodes.iter().zip(&q_rule.weights) {
                        let f = w * axis(sig, idl, pmp, 0.5 * (q + p), 0.5 * (q - p))?;
                        v += f;
                        m += f.abs();
                    }
                    value.push(v);
                    magnitude.push(m);
                }
                Ok((value, magnitude))
            };
            let (x, x_abs) = table(key.j, key.u, pump_mode.n)?;
            let (y, y_abs) = table(key.k, key.t, pump_mode.m)?;
            let mut sum = 0.0;
            let mut l1 = 0.0;
            for (b, &px) in p_rule.nodes.iter().enumerate() {
                for (d, &py) in p_rule.nodes.iter().enumerate() {
                    let w = p_rule.weights[b] * p_rule.weights[d];
                    let s = sinc(kappa * (px * px + py * py));
                    sum += w * x[b] * y[d] * s;
                    l1 += w * x_abs[b] * y_abs[d] * s.abs();
                }
            }
            let scale = 0.25 * prefactor;
            Ok(Level { value: scale * sum, l1: scale.norm() * l1, evaluations: (n as u64).pow(4) })
        }),
        Scheme::AdaptiveCartesian => refine(spec, 4, |n| {
            let rule = AxisRule::composite_legendre(n, spec.domain_halfwidth / wc);
            let m = rule.len();
            let grid = |sig: u32, idl: u32, pmp: u32| -> Result<Vec<f64>> {
                let mut out = Vec::with_capacity(m * m);
                for (a, &qs) in rule.nodes.iter().enumerate() {
                    for (b, &qi) in rule.nodes.iter().enumerate() {
                        out.push(rule.weights[a] * rule.weights[b] * axis(sig, idl, pmp, qs, qi)?);
                    }
                }
                Ok(out)
            };
            let x = grid(key.j, key.u, pump_mode.n)?;
            let y = grid(key.k, key.t, pump_mode.m)?;
            let dx: Vec<f64> = rule
                .nodes
                .iter()
                .flat_map(|&qs| rule.nodes.iter().map(move |&qi| (qs - qi) * (qs - qi)))
                .collect();
            // Partial sums per x-cell, reduced in a fixed order.
            let partials: Vec<(f64, f64)> = (0..m * m)
                .into_par_iter()
                .map(|ab| {
                    let (mut s, mut l) = (0.0, 0.0);
                    if x[ab] != 0.0 {
                        for cd in 0..m * m {
                            let term = x[ab] * y[cd] * sinc(kappa * (dx[ab] + dx[cd]));
                            s += term;
                            l += term.abs();
                        }
                    }
                    (s, l)
                })
                .collect();
            let (sum, l1) = partials.iter().fold((0.0, 0.0), |(s, l), (a, b)| (s + a, l + b));
            Ok(Level { value: prefactor * sum, l1: prefactor.norm() * l1, evaluations: (m as u64).pow(4) })
        }),
    }
}

/// Same coefficient after the sum-coordinate integral has collapsed onto the
/// pump mode: `(1/π) √(L/2K) b(j,u,α) b(k,t,β) ∫ V*_{αβ}(P) sinc(L P²/4K) d²P`,
/// integrated over the P plane.
pub fn coeff_quadrature_2d(
    config: &CrystalConfig,
    pump_mode: ModeIndex,
    key: CoeffKey,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    check_cost(key)?;
    spec.validate()?;
    if key.x_sum() < pump_mode.n || key.y_sum() < pump_mode.m {
        // The Q-plane overlap with the pump vanishes identically.
        return Ok(QuadratureResult { value: 0.0, est_error: 0.0, evaluations: 0 });
    }
    let alpha = key.x_sum() - pump_mode.n;
    let beta = key.y_sum() - pump_mode.m;
    let b = crate::gaussian_modes::dhg_coefficient(key.j, key.u, alpha)?
        * crate::gaussian_modes::dhg_coefficient(key.k, key.t, beta)?;
    let pump = config.pump_geometry();
    let wp = pump.waist();
    let kappa = config.length() / (4.0 * config.pump_wavenumber());
    let difference_mode = ModeIndex::new(alpha, beta);
    let prefactor = (config.length() / (2.0 * config.pump_wavenumber())).sqrt() / PI
        * b
        * spectrum_prefactor(difference_mode, &pump, 0.0)?.conj();

    let rule_for = |n: usize| match spec.scheme {
        Scheme::TensorGaussHermite => AxisRule::gauss_hermite(n, 2.0 / wp),
        // P = q_s - q_i spans twice the single-photon box.
        Scheme::AdaptiveCartesian => AxisRule::composite_legendre(n, 2.0 * spec.domain_halfwidth / config.down_converted_geometry().waist()),
    };
    refine(spec, 2, |n| {
        let rule = rule_for(n);
        let fx: Vec<f64> = rule.nodes.iter().map(|&p| spectrum_axis_factor(alpha, wp, p)).collect::<Result<_>>()?;
        let fy: Vec<f64> = rule.nodes.iter().map(|&p| spectrum_axis_factor(beta, wp, p)).collect::<Result<_>>()?;
        let mut sum = 0.0;
        let mut l1 = 0.0;
        for (a, &px) in rule.nodes.iter().enumerate() {
            for (c, &py) in rule.nodes.iter().enumerate() {
                let term = rule.weights[a] * rule.weights[c] * fx[a] * fy[c] * sinc(kappa * (px * px + py * py));
                sum += term;
                l1 += term.abs();
            }
        }
        Ok(Level { value: prefactor * sum, l1: prefactor.norm() * l1, evaluations: (rule.len() as u64).pow(2) })
    })
}

/// `∫ v*_a(q) v_b(q) d²q` at the waist plane.
pub fn overlap_quadrature(
    mode_a: ModeIndex,
    mode_b: ModeIndex,
    geom: &BeamGeometry,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    let w = geom.waist();
    let prefactor = spectrum_prefactor(mode_a, geom, 0.0)?.conj() * spectrum_prefactor(mode_b, geom, 0.0)?;
    refine(spec, 2, |n| {
        let rule = match spec.scheme {
            Scheme::TensorGaussHermite => AxisRule::gauss_hermite(n, SQRT_2 / w),
            Scheme::AdaptiveCartesian => AxisRule::composite_legendre(n, spec.domain_halfwidth / w),
        };
        let axis = |p: u32, r: u32| -> Result<Vec<f64>> {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&q, &wt)| Ok(wt * spectrum_axis_factor(p, w, q)? * spectrum_axis_factor(r, w, q)?))
                .collect()
        };
        let fx = axis(mode_a.n, mode_b.n)?;
        let fy = axis(mode_a.m, mode_b.m)?;
        let mut sum = 0.0;
        let mut l1 = 0.0;
        for a in &fx {
            for c in &fy {
                sum += a * c;
                l1 += (a * c).abs();
            }
        }
        Ok(Level { value: prefactor * sum, l1: prefactor.norm() * l1, evaluations: (rule.len() as u64).pow(2) })
    })
}

/// Ratio of the 4D quadrature to the bare closed form for the Gaussian pump's
/// `(0,0,0,0)` coefficient; this is what fixes the calibration constant.
pub fn calibration_constant(config: &CrystalConfig, spec: &QuadratureSpec) -> Result<f64> {
    let pump = ModeIndex::new(0, 0);
    let key = CoeffKey::new(0, 0, 0, 0);
    let quadrature = coeff_quadrature_4d(config, pump, key, spec)?;
    Ok(quadrature.value / closed_form_uncalibrated(config, pump, key)?)
}
