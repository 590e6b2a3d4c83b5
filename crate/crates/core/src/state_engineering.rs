//! Optics on the first-order subspace.
//!
//! Each photon is restricted to `span(HG01, HG10)`, in that order, so a
//! two-photon state is a 2×2 amplitude matrix `Ψ[signal][idler]`. A single-arm
//! element `U` acts as `U Ψ` on the signal and `Ψ Uᵀ` on the idler.
//!
//! A Dove prism at angle `φ` is an image reflection. On `(HG01, HG10)` it acts
//! as `[[cos 2φ, sin 2φ], [sin 2φ, -cos 2φ]]`: at 45° it swaps the two modes and
//! at 90° it flips the sign of HG01.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::{first_order, postselect};
use crate::error::{Error, Result};
use crate::gaussian_modes::ModeIndex;
use crate::spdc_coeffs::{build_state, coeff_exact, CoeffKey, CrystalConfig, Method, PumpSpec, TwoPhotonAmplitudes};

const NORM_TOL: f64 = 1e-12;

/// Basis order of each single-photon factor.
pub const FIRST_ORDER_BASIS: [ModeIndex; 2] = [ModeIndex::new(0, 1), ModeIndex::new(1, 0)];

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn basis_index(mode: ModeIndex) -> Option<usize> {
    FIRST_ORDER_BASIS.iter().position(|&m| m == mode)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderState {
    amplitudes: Matrix2<Complex64>,
}

impl FirstOrderState {
    pub fn new(amplitudes: Matrix2<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// Reads the first-order block of a post-selected state.
    pub fn from_postselected(state: &TwoPhotonAmplitudes) -> Result<Self> {
        let mut amplitudes = Matrix2::zeros();
        for (key, amp) in state.amplitudes() {
            match (basis_index(key.signal()), basis_index(key.idler())) {
                (Some(s), Some(i)) => amplitudes[(s, i)] = *amp,
                _ if amp.norm() == 0.0 => {}
                _ => return Err(Error::InvalidInput(format!("{key} lies outside the first-order subspace"))),
            }
        }
        Self::new(amplitudes)
    }

    pub fn bell(target: BellState) -> Self {
        let h = FRAC_1_SQRT_2;
        let m = match target {
            BellState::PhiPlus => Matrix2::new(c(h), c(0.0), c(0.0), c(h)),
            BellState::PhiMinus => Matrix2::new(c(h), c(0.0), c(0.0), c(-h)),
            BellState::PsiPlus => Matrix2::new(c(0.0), c(h), c(h), c(0.0)),
            BellState::PsiMinus => Matrix2::new(c(0.0), c(h), c(-h), c(0.0)),
        };
        Self { amplitudes: m }
    }

    /// `cos θ |01,01⟩ + e^{iφ} sin θ |10,10⟩`
    pub fn nonmax(theta: f64, phi: f64) -> Self {
        let m = Matrix2::new(c(theta.cos()), c(0.0), c(0.0), Complex64::from_polar(theta.sin(), phi));
        Self { amplitudes: m }
    }

    pub fn amplitudes(&self) -> &Matrix2<Complex64> {
        &self.amplitudes
    }

    /// Amplitude of `|signal, idler⟩`; zero outside the subspace.
    pub fn amplitude(&self, signal: ModeIndex, idler: ModeIndex) -> Complex64 {
        match (basis_index(signal), basis_index(idler)) {
            (Some(s), Some(i)) => self.amplitudes[(s, i)],
            _ => Complex64::default(),
        }
    }

    /// `(signal, idler, amplitude)` in basis order.
    pub fn entries(&self) -> impl Iterator<Item = (ModeIndex, ModeIndex, Complex64)> + '_ {
        (0..2).flat_map(move |s| (0..2).map(move |i| (FIRST_ORDER_BASIS[s], FIRST_ORDER_BASIS[i], self.amplitudes[(s, i)])))
    }

    /// Signal reduced density `Ψ Ψ†`.
    pub fn reduced_signal(&self) -> Matrix2<Complex64> {
        self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn purity(&self) -> f64 {
        self.reduced_signal().norm_squared()
    }

    /// Reduced-state eigenvalues, descending.
    pub fn schmidt_weights(&self) -> [f64; 2] {
        let mut e: Vec<f64> = self.reduced_signal().symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0)).collect();
        e.sort_by(|a, b| b.total_cmp(a));
        [e[0], e[1]]
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }

    /// Largest entrywise deviation after removing the best global phase.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        let overlap = other.amplitudes.dotc(&self.amplitudes);
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c(1.0) };
        (self.amplitudes - other.amplitudes * phase).iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    /// Prism axis angle in radians.
    Dove(f64),
    Mirror,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderElement {
    kind: ElementKind,
    matrix: Matrix2<Complex64>,
}

impl FirstOrderElement {
    pub fn dove_prism(phi: f64) -> Self {
        let (s, co) = (2.0 * phi).sin_cos();
        Self { kind: ElementKind::Dove(phi), matrix: Matrix2::new(c(co), c(s), c(s), c(-co)) }
    }

    /// HG10 → HG10, HG01 → −HG01.
    pub fn mirror() -> Self {
        Self { kind: ElementKind::Mirror, matrix: Matrix2::new(c(-1.0), c(0.0), c(0.0), c(1.0)) }
    }

    pub fn identity() -> Self {
        Self { kind: ElementKind::Identity, matrix: Matrix2::identity() }
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.matrix
    }

    /// `‖U†U − 1‖_max`
    pub fn unitarity_defect(&self) -> f64 {
        (self.matrix.adjoint() * self.matrix - Matrix2::identity()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

impl fmt::Display for FirstOrderElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            // Rounded so that 45° prints as 45, not 45.00000000000001.
            ElementKind::Dove(phi) => write!(f, "dove({}°)", (phi.to_degrees() * 1e9).round() / 1e9),
            ElementKind::Mirror => write!(f, "mirror"),
            ElementKind::Identity => write!(f, "identity"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Signal,
    Idler,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Signal => "signal",
            Arm::Idler => "idler",
        })
    }
}

pub fn apply(state: &FirstOrderState, element: &FirstOrderElement, arm: Arm) -> FirstOrderState {
    let amplitudes = match arm {
        Arm::Signal => element.matrix * state.amplitudes,
        Arm::Idler => state.amplitudes * element.matrix.transpose(),
    };
    FirstOrderState { amplitudes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        })
    }
}

/// Pump mode feeding a Bell recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellSource {
    Hg00,
    Hg11,
}

impl BellSource {
    pub fn pump_mode(self) -> ModeIndex {
        match self {
            BellSource::Hg00 => ModeIndex::new(0, 0),
            BellSource::Hg11 => ModeIndex::new(1, 1),
        }
    }

    /// Bell state produced before any optics.
    pub fn native(self) -> BellState {
        match self {
            BellSource::Hg00 => BellState::PhiPlus,
            BellSource::Hg11 => BellState::PsiPlus,
        }
    }
}

pub type Pipeline = Vec<(FirstOrderElement, Arm)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub pipeline: Pipeline,
    pub state: FirstOrderState,
}

pub fn run_pipeline(state: &FirstOrderState, pipeline: &[(FirstOrderElement, Arm)]) -> FirstOrderState {
    pipeline.iter().fold(*state, |s, (e, arm)| apply(&s, e, *arm))
}

/// Post-selected first-order state of an SPDC run with the given pump.
pub fn postselected_first_order(config: &CrystalConfig, pump: &PumpSpec) -> Result<FirstOrderState> {
    let state = build_state(config, pump, 2, Method::Exact)?;
    FirstOrderState::from_postselected(&postselect(&state, first_order)?)
}

/// Signal-arm optics taking the source's native Bell state to `target`.
pub fn bell_pipeline(target: BellState, source: BellSource) -> Pipeline {
    let dove = (FirstOrderElement::dove_prism(FRAC_PI_4), Arm::Signal);
    let mirror = (FirstOrderElement::mirror(), Arm::Signal);
    // Same-family targets need at most a sign flip; crossing families needs the swap.
    let same_family = matches!(
        (source.native(), target),
        (BellState::PhiPlus, BellState::PhiPlus | BellState::PhiMinus) | (BellState::PsiPlus, BellState::PsiPlus | BellState::PsiMinus)
    );
    let minus = matches!(target, BellState::PhiMinus | BellState::PsiMinus);
    let mut pipeline = Vec::new();
    if !same_family {
        pipeline.push(dove);
    }
    if minus {
        pipeline.push(mirror);
    }
    pipeline
}

pub fn bell_recipe(target: BellState, source: BellSource, config: &CrystalConfig) -> Result<Recipe> {
    let start = postselected_first_order(config, &PumpSpec::single(source.pump_mode()))?;
    let pipeline = bell_pipeline(target, source);
    let state = run_pipeline(&start, &pipeline);
    Ok(Recipe { pipeline, state })
}

/// Pump `cos θ HG02 + e^{iφ} sin θ HG20` through SPDC and first-order post-selection.
pub fn nonmax_pipeline(theta: f64, phi: f64, config: &CrystalConfig) -> Result<FirstOrderState> {
    let pump = PumpSpec::superposition(vec![
        (ModeIndex::new(0, 2), c(theta.cos())),
        (ModeIndex::new(2, 0), Complex64::from_polar(theta.sin(), phi)),
    ])?;
    let state = postselected_first_order(config, &pump)?;
    // Both pump blocks give the same real first-order amplitude; its sign is a global phase.
    let sign = coeff_exact(config, ModeIndex::new(0, 2), CoeffKey::new(0, 1, 0, 1))?.signum();
    Ok(FirstOrderState { amplitudes: state.amplitudes * c(sign) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const ALL: [BellState; 4] = [BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus];

    fn close(a: &FirstOrderState, b: &FirstOrderState, tol: f64) -> bool {
        a.distance_up_to_phase(b) < tol
    }

    #[test]
    fn dove_actions() {
        let swap = FirstOrderElement::dove_prism(FRAC_PI_4);
        assert!((swap.matrix() - Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0))).norm() < 1e-15);
        let flip = FirstOrderElement::dove_prism(FRAC_PI_2);
        assert!((flip.matrix() - FirstOrderElement::mirror().matrix()).norm() < 1e-15);
        for phi in [0.0, 0.3, 1.1, -2.0, 7.0] {
            let d = FirstOrderElement::dove_prism(phi);
            assert!(d.unitarity_defect() < 1e-12);
            assert!((d.matrix() * d.matrix() - Matrix2::identity()).norm() < 1e-12);
        }
        let m = FirstOrderElement::mirror();
        assert!((m.matrix() * m.matrix() - Matrix2::identity()).norm() < 1e-15);
        assert_eq!(swap.to_string(), "dove(45°)");
    }

    #[test]
    fn single_arm_examples() {
        let phi = FirstOrderState::bell(BellState::PhiPlus);
        let psi = FirstOrderState::bell(BellState::PsiPlus);
        let m = FirstOrderElement::mirror();
        assert!(close(&apply(&phi, &m, Arm::Signal), &FirstOrderState::bell(BellState::PhiMinus), 1e-12));
        assert!(close(&apply(&psi, &m, Arm::Idler), &FirstOrderState::bell(BellState::PsiMinus), 1e-12));
        let d = FirstOrderElement::dove_prism(FRAC_PI_4);
        assert!(close(&apply(&phi, &d, Arm::Signal), &psi, 1e-12));
        assert_eq!(apply(&phi, &FirstOrderElement::identity(), Arm::Idler), phi);
        let out = apply(&FirstOrderState::nonmax(0.4, 1.0), &FirstOrderElement::dove_prism(0.7), Arm::Idler);
        assert!((out.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recipes_reach_targets() {
        let cfg = CrystalConfig::default();
        for source in [BellSource::Hg00, BellSource::Hg11] {
            for target in ALL {
                let r = bell_recipe(target, source, &cfg).unwrap();
                assert!(close(&r.state, &FirstOrderState::bell(target), 1e-10), "{target} from {source:?}");
                assert!((r.state.purity() - 0.5).abs() < 1e-10);
            }
        }
        assert!(bell_pipeline(BellState::PhiPlus, BellSource::Hg00).is_empty());
        assert!(bell_pipeline(BellState::PsiPlus, BellSource::Hg11).is_empty());
        let p = bell_pipeline(BellState::PsiPlus, BellSource::Hg00);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].1, Arm::Signal);
        assert_eq!(p[0].0.kind(), ElementKind::Dove(FRAC_PI_4));
    }

    #[test]
    fn nonmax_examples() {
        let cfg = CrystalConfig::default();
        let s = nonmax_pipeline(FRAC_PI_4, 0.0, &cfg).unwrap();
        assert!(close(&s, &FirstOrderState::bell(BellState::PhiPlus), 1e-10));
        let s = nonmax_pipeline(0.0, 0.0, &cfg).unwrap();
        assert!((s.amplitude(FIRST_ORDER_BASIS[0], FIRST_ORDER_BASIS[0]).norm() - 1.0).abs() < 1e-10);
        assert!((s.purity() - 1.0).abs() < 1e-10);
        let theta = 30f64.to_radians();
        let s = nonmax_pipeline(theta, FRAC_PI_2, &cfg).unwrap();
        assert!((s.amplitude(FIRST_ORDER_BASIS[0], FIRST_ORDER_BASIS[0]) - c(3f64.sqrt() / 2.0)).norm() < 1e-10);
        assert!((s.amplitude(FIRST_ORDER_BASIS[1], FIRST_ORDER_BASIS[1]) - Complex64::new(0.0, 0.5)).norm() < 1e-10);
        for (theta, phi) in [(0.2, 0.0), (1.0, -2.0), (2.5, 3.0)] {
            let s = nonmax_pipeline(theta, phi, &cfg).unwrap();
            let direct = FirstOrderState::nonmax(theta, phi);
            assert!((s.amplitudes() - direct.amplitudes()).iter().all(|z| z.norm() < 1e-10), "{theta} {phi}");
            let [a, b] = s.schmidt_weights();
            let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
            assert!((a - c2.max(s2)).abs() < 1e-10 && (b - c2.min(s2)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_outside_subspace() {
        let cfg = CrystalConfig::default();
        let s = build_state(&cfg, &PumpSpec::single(ModeIndex::new(0, 0)), 2, Method::Exact).unwrap();
        assert!(FirstOrderState::from_postselected(&s.normalized().unwrap()).is_err());
    }
}
