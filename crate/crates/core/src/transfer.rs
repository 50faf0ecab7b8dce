//! The transfer quantity `⟨w⟩ = ΔF_W` and the necessary condition `⟨w⟩ ≤ F(ρ_S) − F(ρ'_S)`.

use crate::density::DensityMatrix;
use crate::error::Result;
use crate::math;
use crate::model::{self, DiagonalState, Spectrum, ThermalContext};

/// Slack on the verdict: a transfer is "not ruled out" when `margin ≥ −ALLOWED_TOLERANCE`.
pub const ALLOWED_TOLERANCE: f64 = 1e-9;

/// Off-diagonal magnitude below which a matrix is treated as diagonal for classification.
const DIAGONAL_TOLERANCE: f64 = 1e-12;

/// A state given either by its populations in the energy basis or as a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Diagonal(DiagonalState),
    Dense(DensityMatrix),
}

impl From<DiagonalState> for State {
    fn from(s: DiagonalState) -> Self {
        State::Diagonal(s)
    }
}

impl From<DensityMatrix> for State {
    fn from(m: DensityMatrix) -> Self {
        State::Dense(m)
    }
}

impl State {
    pub fn free_energy(&self, spectrum: &Spectrum, ctx: ThermalContext) -> Result<f64> {
        match self {
            State::Diagonal(d) => model::free_energy(d, spectrum, ctx),
            State::Dense(m) => m.free_energy(spectrum, ctx),
        }
    }

    /// Populations when the state is diagonal (up to 1e-12 coherences).
    pub fn populations(&self) -> Option<DiagonalState> {
        match self {
            State::Diagonal(d) => Some(d.clone()),
            State::Dense(m) => m.as_diagonal(DIAGONAL_TOLERANCE),
        }
    }
}

/// `F(σ'_W) − F(σ_W)`.
pub fn transfer_quantity(sigma_w: &State, sigma_w_final: &State, weight: &Spectrum, ctx: ThermalContext) -> Result<f64> {
    Ok(sigma_w_final.free_energy(weight, ctx)? - sigma_w.free_energy(weight, ctx)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CaseTag {
    /// Energy eigenstate to energy eigenstate.
    SingleLevel,
    /// Energy eigenstate to a diagonal state on several levels.
    SingleToWindow,
    /// Diagonal populations moved rigidly upward.
    Shift,
    General,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::SingleLevel => "single-level",
            CaseTag::SingleToWindow => "single-to-window",
            CaseTag::Shift => "shift",
            CaseTag::General => "general",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransferVerdict {
    /// `⟨w⟩ = ΔF_W`.
    pub transfer_quantity: f64,
    /// `F(ρ_S) − F(ρ'_S)`.
    pub bound: f64,
    pub margin: f64,
    /// Necessary condition only: `true` means "not ruled out".
    pub allowed: bool,
    pub case_tag: CaseTag,
}

impl TransferVerdict {
    pub fn label(&self) -> &'static str {
        if self.allowed {
            "not ruled out"
        } else {
            "ruled out"
        }
    }
}

/// Evaluates both sides of `⟨w⟩ ≤ F(ρ_S) − F(ρ'_S)`.
pub fn check_transfer(
    rho_s: &State,
    rho_s_final: &State,
    system: &Spectrum,
    sigma_w: &State,
    sigma_w_final: &State,
    weight: &Spectrum,
    ctx: ThermalContext,
) -> Result<TransferVerdict> {
    let transfer = transfer_quantity(sigma_w, sigma_w_final, weight, ctx)?;
    let bound = rho_s.free_energy(system, ctx)? - rho_s_final.free_energy(system, ctx)?;
    let margin = bound - transfer;
    Ok(TransferVerdict {
        transfer_quantity: transfer,
        bound,
        margin,
        allowed: margin >= -ALLOWED_TOLERANCE,
        case_tag: classify(sigma_w, sigma_w_final),
    })
}

fn classify(initial: &State, fin: &State) -> CaseTag {
    let (Some(a), Some(b)) = (initial.populations(), fin.populations()) else {
        return CaseTag::General;
    };
    let (a, b) = (a.populations(), b.populations());
    let pure = |p: &[f64]| p.iter().any(|&x| x > 1.0 - DIAGONAL_TOLERANCE);
    if pure(a) && pure(b) {
        return CaseTag::SingleLevel;
    }
    if a.len() == b.len() {
        for k in 1..a.len() {
            let shifted = (0..a.len()).all(|i| {
                let src = if i >= k { a[i - k] } else { 0.0 };
                let tail_ok = i + k < a.len() || a[i] <= DIAGONAL_TOLERANCE;
                math::fabs(b[i] - src) <= DIAGONAL_TOLERANCE && tail_ok
            });
            if shifted {
                return CaseTag::Shift;
            }
        }
    }
    if pure(a) {
        return CaseTag::SingleToWindow;
    }
    CaseTag::General
}
