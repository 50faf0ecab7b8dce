//! Work of formation of a diagonal state from the thermal state, exact and ε-relaxed.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{contract, Result};
use crate::math::{self, KahanSum};
use crate::model::{self, DiagonalState, LevelState, Spectrum, ThermalContext};

/// Absolute tolerance of the bisection for `μ^ε`.
pub const BISECTION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FormationReport {
    /// `μ = max s/t`.
    pub mu: f64,
    /// `(1/β) ln μ`.
    pub w_min: f64,
    pub binding_level: LevelState,
    pub binding_position: usize,
    pub epsilon: Option<f64>,
    /// Smallest `λ` with `Σ max(s − λt, 0) ≤ ε`, by bisection.
    pub mu_epsilon: Option<f64>,
    /// The same from the piecewise-linear closed form over the active set.
    pub mu_epsilon_closed_form: Option<f64>,
    pub w_min_epsilon: Option<f64>,
    /// A state within trace distance ε of the target with `relaxed ≤ μ^ε·τ`.
    pub relaxed_state: Option<DiagonalState>,
}

struct Ratios {
    target: Vec<f64>,
    thermal: Vec<f64>,
}

impl Ratios {
    fn new(target: &DiagonalState, spectrum: &Spectrum, ctx: ThermalContext) -> Result<Self> {
        target.check_against(spectrum)?;
        let thermal = model::thermal_state(spectrum, ctx)?;
        Ok(Ratios { target: target.populations().to_vec(), thermal: thermal.populations().to_vec() })
    }

    fn ratio(&self, i: usize) -> f64 {
        self.target[i] / self.thermal[i]
    }

    /// Mass above the cap `λ·t`.
    fn excess(&self, lambda: f64) -> f64 {
        let mut r = KahanSum::default();
        for (s, t) in self.target.iter().zip(&self.thermal) {
            let d = s - lambda * t;
            if d > 0.0 {
                r.add(d);
            }
        }
        r.value()
    }
}

/// `μ = max s(E_S,g)/t(E_S)` over populated levels and `w_min = (1/β) ln μ`.
pub fn formation_mu(target: &DiagonalState, spectrum: &Spectrum, ctx: ThermalContext) -> Result<FormationReport> {
    let r = Ratios::new(target, spectrum, ctx)?;
    let mut best = 0usize;
    for i in 1..r.target.len() {
        if r.ratio(i) > r.ratio(best) {
            best = i;
        }
    }
    // Σs = Σt = 1 forces max s/t ≥ 1; clamp rounding below it.
    let mu = r.ratio(best).max(1.0);
    let binding_level = spectrum.basis().nth(best).expect("position within spectrum");
    Ok(FormationReport {
        mu,
        w_min: math::log(mu) / ctx.beta(),
        binding_level,
        binding_position: best,
        epsilon: None,
        mu_epsilon: None,
        mu_epsilon_closed_form: None,
        w_min_epsilon: None,
        relaxed_state: None,
    })
}

/// `μ^ε`: the smallest `λ ≥ 1` such that some diagonal state within trace distance `ε`
/// of the target lies below `λ·τ`.
pub fn formation_mu_epsilon(
    target: &DiagonalState,
    spectrum: &Spectrum,
    ctx: ThermalContext,
    epsilon: f64,
) -> Result<FormationReport> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(contract!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    let mut report = formation_mu(target, spectrum, ctx)?;
    let r = Ratios::new(target, spectrum, ctx)?;
    let (bisected, closed) = if epsilon == 0.0 {
        (report.mu, report.mu)
    } else if r.excess(1.0) <= epsilon {
        (1.0, 1.0)
    } else {
        (bisect(&r, report.mu, epsilon), closed_form(&r, epsilon))
    };
    let relaxed = if epsilon == 0.0 { target.clone() } else { relax(&r, bisected)? };
    report.epsilon = Some(epsilon);
    report.mu_epsilon = Some(bisected);
    report.mu_epsilon_closed_form = Some(closed);
    report.w_min_epsilon = Some(math::log(bisected) / ctx.beta());
    report.relaxed_state = Some(relaxed);
    Ok(report)
}

/// Bisection on `[1, μ]` for the smallest `λ` with `R(λ) ≤ ε`; returns the upper end.
fn bisect(r: &Ratios, mu: f64, epsilon: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, mu);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if r.excess(mid) <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Solves `Σ_{active} (s − λt) = ε` with the active set grown in order of decreasing ratio.
fn closed_form(r: &Ratios, epsilon: f64) -> f64 {
    let mut order: Vec<usize> = (0..r.target.len()).collect();
    order.sort_by(|&a, &b| r.ratio(b).partial_cmp(&r.ratio(a)).unwrap_or(Ordering::Equal));
    let mut s = KahanSum::default();
    let mut t = KahanSum::default();
    for (k, &i) in order.iter().enumerate() {
        s.add(r.target[i]);
        t.add(r.thermal[i]);
        let lambda = (s.value() - epsilon) / t.value();
        let next = order.get(k + 1).map_or(0.0, |&j| r.ratio(j));
        if lambda >= next {
            return lambda.max(1.0);
        }
    }
    1.0
}

/// Caps every entry at `λ·t` and pours the removed mass into the lowest-ratio entries.
fn relax(r: &Ratios, lambda: f64) -> Result<DiagonalState> {
    let n = r.target.len();
    let mut out: Vec<f64> = (0..n).map(|i| r.target[i].min(lambda * r.thermal[i])).collect();
    let mut removed = KahanSum::default();
    for i in 0..n {
        removed.add(r.target[i] - out[i]);
    }
    let mut left = removed.value();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r.ratio(a).partial_cmp(&r.ratio(b)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    for i in order {
        if left <= 0.0 {
            break;
        }
        let room = (lambda * r.thermal[i] - out[i]).max(0.0);
        let add = room.min(left);
        out[i] += add;
        left -= add;
    }
    DiagonalState::from_populations(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelMargin {
    pub level: LevelState,
    pub target: f64,
    /// `e^{−β(E_S − w)}/Z_S`.
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibilityVerdict {
    pub w: f64,
    pub feasible: bool,
    pub margins: Vec<LevelMargin>,
}

/// Checks `s(E_S,g) ≤ e^{−β(E_S−w)}/Z_S` at every level (tolerance 1e-12).
pub fn formation_feasible(
    target: &DiagonalState,
    w: f64,
    spectrum: &Spectrum,
    ctx: ThermalContext,
) -> Result<FeasibilityVerdict> {
    let r = Ratios::new(target, spectrum, ctx)?;
    let lift = math::exp(ctx.beta() * w);
    let margins: Vec<LevelMargin> = spectrum
        .basis()
        .enumerate()
        .map(|(i, level)| {
            let bound = r.thermal[i] * lift;
            LevelMargin { level, target: r.target[i], bound, margin: bound - r.target[i] }
        })
        .collect();
    let feasible = margins.iter().all(|m| m.margin >= -1e-12);
    Ok(FeasibilityVerdict { w, feasible, margins })
}
