//! Signal-photon reduced density matrix, purity and the parity argument.
//!
//! With amplitudes `C_{jkut}` the reduced state of the signal photon is
//! `F[jk][df] = Σ_{ut} C_{jkut} C*_{dfut}`. For a single HG pump mode the
//! conservation rule forces `F` to vanish between signal modes of different
//! index parity, while both diagonal entries are populated; the Cauchy-Schwarz
//! inequality `|F[a][b]|² ≤ F[a][a] F[b][b]` is then strict, which rules out a
//! rank-one (pure, product) reduced state.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian_modes::ModeIndex;
use crate::spdc_coeffs::{CoeffKey, TwoPhotonAmplitudes};

const NORM_TOL: f64 = 1e-10;
const ZERO_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    basis: Vec<ModeIndex>,
    matrix: DMatrix<Complex64>,
}

impl ReducedDensity {
    /// Wraps an explicit matrix; it must be square, Hermitian and match the basis.
    pub fn from_matrix(basis: Vec<ModeIndex>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = basis.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{} but basis has {n} modes",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if (0..n).any(|a| (0..n).any(|b| (matrix[(a, b)] - matrix[(b, a)].conj()).norm() > ZERO_TOL)) {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &[ModeIndex] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// `F[a][b]` by mode label; zero outside the basis.
    pub fn entry(&self, a: ModeIndex, b: ModeIndex) -> Complex64 {
        match (self.position(a), self.position(b)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => Complex64::default(),
        }
    }

    fn position(&self, mode: ModeIndex) -> Option<usize> {
        self.basis.binary_search(&mode).ok()
    }

    /// Eigenvalues in descending order; tiny negative round-off is clamped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|&v| if v < 0.0 && v > -ZERO_TOL { 0.0 } else { v })
            .collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values
    }

    /// True when the largest eigenvalue carries the whole trace.
    pub fn is_rank_one(&self) -> bool {
        let top = self.eigenvalues().first().copied().unwrap_or(0.0);
        (self.trace() - top).abs() <= RANK_TOL
    }
}

/// Builds `F` over the signal modes that appear in the stored keys.
pub fn reduce(state: &TwoPhotonAmplitudes) -> Result<ReducedDensity> {
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    let basis: Vec<ModeIndex> = state
        .amplitudes()
        .keys()
        .map(CoeffKey::signal)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<ModeIndex, usize> = basis.iter().enumerate().map(|(i, m)| (*m, i)).collect();

    // Group amplitudes by idler mode, then accumulate outer products.
    let mut by_idler: BTreeMap<ModeIndex, Vec<(usize, Complex64)>> = BTreeMap::new();
    for (key, amp) in state.amplitudes() {
        by_idler.entry(key.idler()).or_default().push((index[&key.signal()], *amp));
    }
    let mut matrix = DMatrix::<Complex64>::zeros(basis.len(), basis.len());
    for column in by_idler.values() {
        for &(a, ca) in column {
            for &(b, cb) in column {
                matrix[(a, b)] += ca * cb.conj();
            }
        }
    }
    Ok(ReducedDensity { basis, matrix })
}

/// `tr F² = Σ |F[a][b]|²`
pub fn purity(rho: &ReducedDensity) -> f64 {
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}

fn same_parity(a: ModeIndex, b: ModeIndex) -> bool {
    a.n % 2 == b.n % 2 && a.m % 2 == b.m % 2
}

/// True iff `F` vanishes between signal modes whose x or y indices differ in parity.
pub fn parity_block_check(rho: &ReducedDensity) -> bool {
    rho.basis.iter().enumerate().all(|(a, &ma)| {
        rho.basis
            .iter()
            .enumerate()
            .all(|(b, &mb)| same_parity(ma, mb) || rho.matrix[(a, b)].norm() < ZERO_TOL)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementVerdict {
    pub entangled: bool,
    /// Pair `(a, b)` with both diagonals populated and `|F[a][b]|² < F[a][a] F[b][b]`.
    pub witness: Option<(ModeIndex, ModeIndex)>,
    pub purity: f64,
}

/// Looks for a strict Cauchy-Schwarz pair, preferring pairs of mismatched parity.
/// Diagonals are scanned in basis order so the reported pair is deterministic.
pub fn csb_entanglement_witness(rho: &ReducedDensity) -> EntanglementVerdict {
    let p = purity(rho);
    let populated: Vec<usize> = (0..rho.dim()).filter(|&a| rho.matrix[(a, a)].re > ZERO_TOL).collect();
    let strict = |a: usize, b: usize| {
        let bound = rho.matrix[(a, a)].re * rho.matrix[(b, b)].re;
        bound - rho.matrix[(a, b)].norm_sqr() > ZERO_TOL * bound.max(ZERO_TOL)
    };
    let pairs = || {
        populated
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| populated[i + 1..].iter().map(move |&b| (a, b)))
    };
    let found = pairs()
        .find(|&(a, b)| !same_parity(rho.basis[a], rho.basis[b]) && strict(a, b))
        .or_else(|| pairs().find(|&(a, b)| strict(a, b)));
    EntanglementVerdict {
        entangled: found.is_some() || p < 1.0 - RANK_TOL,
        witness: found.map(|(a, b)| (rho.basis[a], rho.basis[b])),
        purity: p,
    }
}

/// Drops keys rejected by `keep` and renormalizes.
pub fn postselect(state: &TwoPhotonAmplitudes, keep: impl FnMut(&CoeffKey) -> bool) -> Result<TwoPhotonAmplitudes> {
    let kept = state.filtered(keep);
    if kept.norm_sqr() == 0.0 {
        return Err(Error::EmptyPostselection);
    }
    kept.normalized()
}

/// Keeps one photon in each first-order mode: `j + k = 1` and `u + t = 1`.
pub fn first_order(key: &CoeffKey) -> bool {
    key.j + key.k == 1 && key.u + key.t == 1
}
