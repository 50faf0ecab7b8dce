//! Maximal single-shot work: the ε-cut over eigenvalue blocks, `F_min^ε`, `w_max^ε`,
//! perfect work, and the surplus gained by accepting a window of weight levels.

use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::math::{self, log_sum_exp, KahanSum};
use crate::model::{self, LevelState, Spectrum, ThermalContext};
use crate::shells::{self, BathModel, BlockCount, BlockTable, CompositeModel, Dimension};

/// Inclusion factor `h` of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Inclusion {
    /// `num` of the block's `den` eigenvalues are kept (concrete bath).
    Rational { num: u128, den: u128 },
    /// Kept mass fraction (ideal bath).
    Real(f64),
}

impl Inclusion {
    pub fn value(self) -> f64 {
        match self {
            Inclusion::Rational { num, den } => num as f64 / den as f64,
            Inclusion::Real(h) => h,
        }
    }

    pub fn is_zero(self) -> bool {
        self.value() == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HEntry {
    pub level: LevelState,
    pub position: usize,
    pub h: Inclusion,
}

/// Per system basis state inclusion factors, in block order. Unpopulated basis states
/// have no entry and count as `h = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HMap {
    pub entries: Vec<HEntry>,
}

impl HMap {
    pub fn get(&self, level: LevelState) -> f64 {
        self.entries.iter().find(|e| e.level == level).map_or(0.0, |e| e.h.value())
    }

    /// `Σ_g h(E_S, g)` per level of `spectrum`, in level order.
    pub fn level_sums(&self, spectrum: &Spectrum) -> Vec<(u64, f64)> {
        spectrum
            .levels()
            .iter()
            .map(|l| {
                let mut s = KahanSum::default();
                self.entries.iter().filter(|e| e.level.energy == l.energy).for_each(|e| s.add(e.h.value()));
                (l.energy, s.value())
            })
            .collect()
    }
}

/// Outcome of the ε-cut in one shell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CutResult {
    pub shell_energy: u64,
    pub epsilon: f64,
    /// Exact count for a concrete bath; in units of `M_B(E)` for an ideal one.
    pub d_ini: Dimension,
    pub h_map: HMap,
    pub population: f64,
    pub included_mass: f64,
    /// `1 − included/population`; at most `epsilon`.
    pub realized_failure: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(contract!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    Ok(())
}

/// Keeps blocks in descending order until the retained mass reaches `(1−ε)·P`.
///
/// With a concrete bath the block that crosses the threshold contributes the smallest
/// number of eigenvalues that reaches it, so `d_ini` is the minimal integer dimension.
/// With an ideal bath that block contributes the exact real fraction.
pub fn epsilon_cut(table: &BlockTable, epsilon: f64) -> Result<CutResult> {
    check_epsilon(epsilon)?;
    let p = table.population;
    let target = (1.0 - epsilon) * p;
    let tol = 1e-12 * p;
    let mut kept = KahanSum::default();
    let mut d_exact = 0u128;
    let mut d_real = KahanSum::default();
    let mut entries = Vec::with_capacity(table.blocks.len());
    for b in &table.blocks {
        let needed = target - kept.value();
        let h = if epsilon == 0.0 || b.mass <= needed + tol {
            match b.count {
                BlockCount::Exact(n) => Inclusion::Rational { num: n, den: n },
                BlockCount::Relative(_) => Inclusion::Real(1.0),
            }
        } else if needed <= tol {
            match b.count {
                BlockCount::Exact(n) => Inclusion::Rational { num: 0, den: n },
                BlockCount::Relative(_) => Inclusion::Real(0.0),
            }
        } else {
            match b.count {
                BlockCount::Exact(n) => {
                    let k = libm::ceil((needed - tol) / b.value).max(1.0);
                    let k = if k >= n as f64 { n } else { k as u128 };
                    Inclusion::Rational { num: k, den: n }
                }
                BlockCount::Relative(_) => Inclusion::Real((needed / b.mass).min(1.0)),
            }
        };
        match (h, b.count) {
            (Inclusion::Rational { num, .. }, _) => {
                d_exact += num;
                kept.add(num as f64 * b.value);
            }
            (Inclusion::Real(x), count) => {
                d_real.add(x * count.as_f64());
                kept.add(x * b.mass);
            }
        }
        entries.push(HEntry { level: b.level, position: b.position, h });
    }
    let d_ini = if table.is_exact() { Dimension::Exact(d_exact) } else { Dimension::Real(d_real.value()) };
    let included = kept.value().min(p);
    Ok(CutResult {
        shell_energy: table.shell_energy,
        epsilon,
        d_ini,
        h_map: HMap { entries },
        population: p,
        included_mass: included,
        realized_failure: if p > 0.0 { (1.0 - included / p).max(0.0) } else { 0.0 },
    })
}

/// Shell-independent h-map computed with the analytic bath law.
pub fn ideal_cut(model: &CompositeModel, epsilon: f64) -> Result<CutResult> {
    let ideal = model.ideal_counterpart();
    epsilon_cut(&shells::initial_blocks(&ideal, 0)?, epsilon)
}

/// `−(1/β) ln Σ_levels e^{−βE_S}·Σ_g h`, summed per level in the log domain.
fn weighted_free_energy(spectrum: &Spectrum, ctx: ThermalContext, sums: &[(u64, f64)]) -> Result<f64> {
    let mut terms = Vec::with_capacity(sums.len());
    for &(e, h) in sums {
        if h > 0.0 {
            terms.push(math::log(h) - ctx.exponent(spectrum, e)?);
        }
    }
    Ok(-log_sum_exp(terms) / ctx.beta())
}

/// `F_min^ε = −(1/β) ln Σ e^{−βE_S} h(E_S, g, ε)`.
pub fn f_min_epsilon(model: &CompositeModel, epsilon: f64) -> Result<f64> {
    let cut = ideal_cut(model, epsilon)?;
    weighted_free_energy(model.system(), model.ctx(), &cut.h_map.level_sums(model.system()))
}

/// The ε-cut and dimension condition in one shell of a concrete model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShellCut {
    pub cut: CutResult,
    /// `d_fin` with the weight at level 0, i.e. every populated state of the shell.
    pub d_fin_ground: u128,
    /// `d_fin` with the weight at the grid-achievable level.
    pub d_fin_at_grid_w: u128,
    /// `(1/β) ln(d_fin_ground / d_ini)`: the work bound implied by this shell's rounded cut.
    pub shell_w_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorkReport {
    pub epsilon: f64,
    /// `F_min^ε − F(τ_S)`, in energy units.
    pub w_max: f64,
    /// The same bound evaluated as `−(1/β) ln Σ t(E_S)·h`.
    pub w_max_thermal_form: f64,
    pub f_min: f64,
    pub f_thermal: f64,
    pub h_map: HMap,
    /// Largest ladder level (quanta) whose final subspace is at least as large as the
    /// retained initial subspace in every enforced shell.
    pub grid_achievable_w: u64,
    pub grid_achievable_energy: f64,
    /// Per-shell cuts (concrete bath only).
    pub shells: Vec<ShellCut>,
    /// Population-weighted failure probability actually realized over the window shells.
    pub realized_failure: f64,
    /// Smallest per-shell bound `(1/β) ln(d_fin/d_ini)` (concrete bath only).
    pub concrete_w_bound: Option<f64>,
}

/// Maximal extractable work into a single weight level with failure probability `ε`.
pub fn max_work(model: &CompositeModel, epsilon: f64) -> Result<WorkReport> {
    let ctx = model.ctx();
    let system = model.system();
    let cut = ideal_cut(model, epsilon)?;
    let sums = cut.h_map.level_sums(system);
    let f_min = weighted_free_energy(system, ctx, &sums)?;
    let f_thermal = model::thermal_free_energy(system, ctx)?;
    let w_max = f_min - f_thermal;

    let thermal = model::thermal_state(system, ctx)?;
    let mut th = KahanSum::default();
    for e in &cut.h_map.entries {
        th.add(thermal.populations()[e.position] * e.h.value());
    }
    let w_max_thermal_form = -math::log(th.value()) / ctx.beta();

    let weight = model.weight();
    let quantum = model.quantum();
    let (grid_w, shell_cuts, realized, concrete_bound) = match model.bath() {
        BathModel::Ideal { .. } => {
            let limit = w_max / quantum + 1e-9;
            let w = weight.energies().rev().find(|&w| (w as f64) <= limit).unwrap_or(0);
            (w, Vec::new(), cut.realized_failure, None)
        }
        BathModel::Concrete(_) => concrete_shell_cuts(model, epsilon)?,
    };
    Ok(WorkReport {
        epsilon,
        w_max,
        w_max_thermal_form,
        f_min,
        f_thermal,
        h_map: cut.h_map,
        grid_achievable_w: grid_w,
        grid_achievable_energy: grid_w as f64 * quantum,
        shells: shell_cuts,
        realized_failure: realized,
        concrete_w_bound: concrete_bound,
    })
}

type ConcreteCuts = (u64, Vec<ShellCut>, f64, Option<f64>);

fn concrete_shell_cuts(model: &CompositeModel, epsilon: f64) -> Result<ConcreteCuts> {
    let beta = model.ctx().beta();
    let mut cuts = Vec::new();
    for e in model.window_shells()? {
        let cut = epsilon_cut(&shells::initial_blocks(model, e)?, epsilon)?;
        let d_fin_ground = exact_final_dimension(model, e, 0)?;
        cuts.push((cut, d_fin_ground));
    }
    let feasible = |w: u64| -> Result<bool> {
        for (cut, _) in &cuts {
            let d_ini = cut.d_ini.exact().unwrap_or(u128::MAX);
            if exact_final_dimension(model, cut.shell_energy, w)? < d_ini {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut grid_w = 0;
    for w in model.weight().energies().rev() {
        if feasible(w)? {
            grid_w = w;
            break;
        }
    }
    let mut lost = KahanSum::default();
    let mut total = KahanSum::default();
    let mut bound = f64::INFINITY;
    let mut out = Vec::with_capacity(cuts.len());
    for (cut, d_fin_ground) in cuts {
        lost.add(cut.population - cut.included_mass);
        total.add(cut.population);
        let d_ini = cut.d_ini.as_f64();
        let shell_w_bound = if d_ini > 0.0 { math::log(d_fin_ground as f64 / d_ini) / beta } else { f64::INFINITY };
        bound = bound.min(shell_w_bound);
        let d_fin_at_grid_w = exact_final_dimension(model, cut.shell_energy, grid_w)?;
        out.push(ShellCut { cut, d_fin_ground, d_fin_at_grid_w, shell_w_bound });
    }
    let realized = if total.value() > 0.0 { (lost.value() / total.value()).max(0.0) } else { 0.0 };
    Ok((grid_w, out, realized, Some(bound)))
}

fn exact_final_dimension(model: &CompositeModel, shell: u64, w: u64) -> Result<u128> {
    let d = shells::final_dimension(model, shell, (w, w))?;
    d.exact().ok_or_else(|| contract!("expected an exact dimension"))
}

/// `−(1/β) ln tr[τ_S Π_ρ]` with `Π_ρ` the projector onto the support of the state.
pub fn perfect_work(model: &CompositeModel) -> Result<f64> {
    let system = model.system();
    let ctx = model.ctx();
    let mut sums: Vec<(u64, f64)> = system.levels().iter().map(|l| (l.energy, 0.0)).collect();
    for (s, &p) in system.basis().zip(model.state().populations()) {
        if p > 0.0 {
            if let Some(slot) = sums.iter_mut().find(|(e, _)| *e == s.energy) {
                slot.1 += 1.0;
            }
        }
    }
    Ok(weighted_free_energy(system, ctx, &sums)? - model::thermal_free_energy(system, ctx)?)
}

fn check_window_width(delta: f64, spacing: f64) -> Result<()> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(contract!("weight level spacing must be positive, got {spacing}"));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(contract!("window width must be nonnegative, got {delta}"));
    }
    let steps = delta / spacing;
    if math::fabs(steps - libm::round(steps)) > 1e-9 * steps.max(1.0) {
        return Err(contract!("window width {delta} is not a multiple of the level spacing {spacing}"));
    }
    Ok(())
}

/// Extra work `(1/β) ln[(1−e^{−β(δ+ΔE)})/(1−e^{−βΔE})]` gained by accepting any weight
/// level in `[w, w+δ]` instead of `w` alone.
pub fn multilevel_surplus(ctx: ThermalContext, delta: f64, spacing: f64) -> Result<f64> {
    check_window_width(delta, spacing)?;
    if delta == 0.0 {
        return Ok(0.0);
    }
    let b = ctx.beta();
    Ok((math::log(-math::expm1(-b * (delta + spacing))) - math::log(-math::expm1(-b * spacing))) / b)
}

/// The surplus evaluated as `(1/β) ln Σ_{n=0}^{δ/ΔE} e^{−βnΔE}` term by term.
pub fn multilevel_surplus_direct(ctx: ThermalContext, delta: f64, spacing: f64) -> Result<f64> {
    check_window_width(delta, spacing)?;
    let n = libm::round(delta / spacing) as u64;
    let b = ctx.beta();
    let mut s = KahanSum::default();
    for k in 0..=n {
        s.add(math::exp(-b * k as f64 * spacing));
    }
    Ok(math::log(s.value()) / b)
}

/// Large-window limit `−ln(βΔE)/β` of the surplus.
pub fn multilevel_asymptote(ctx: ThermalContext, spacing: f64) -> f64 {
    -math::log(ctx.beta() * spacing) / ctx.beta()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultilevelReport {
    pub epsilon: f64,
    pub delta: f64,
    pub spacing: f64,
    pub w_max: f64,
    pub surplus: f64,
    pub w_max_window: f64,
    pub asymptote: f64,
}

/// `w_max^ε` plus the window surplus, with the spacing taken from the weight ladder.
pub fn multilevel_max_work(model: &CompositeModel, epsilon: f64, delta: f64) -> Result<MultilevelReport> {
    let spacing = model.weight().spacing() as f64 * model.quantum();
    let w_max = max_work(model, epsilon)?.w_max;
    let surplus = multilevel_surplus(model.ctx(), delta, spacing)?;
    Ok(MultilevelReport {
        epsilon,
        delta,
        spacing,
        w_max,
        surplus,
        w_max_window: w_max + surplus,
        asymptote: multilevel_asymptote(model.ctx(), spacing),
    })
}
