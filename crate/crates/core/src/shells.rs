//! Composite system⊗bath⊗weight models and their total-energy shells.
//!
//! A global energy-conserving unitary is block diagonal over shells of fixed
//! `E = E_S + E_B + E_W`, so every dimension count and eigenvalue table here is
//! per shell. Two bath flavours exist:
//!
//! * [`BathModel::Ideal`]: `M_B(E) = M0·e^{βE}` is never enumerated. Block tables are
//!   normalized by the shell population and counts are relative to `M_B(E)`.
//! * [`BathModel::Concrete`]: an explicit spectrum whose multiplicities grow by the
//!   integer factor `k = e^{βΔE}` per quantum, so every count is an exact integer.
//!
//! For a concrete bath the exponential law only holds inside the bath's energy range.
//! The dimension conditions are therefore enforced on the *shell window*: the shells
//! in which every bath energy `E − E_S − E_W` (any system level, any weight level of
//! the ladder) lies inside that range. Population outside the window is reported, not
//! silently dropped.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{contract, Error, Result};
use crate::math::{self, KahanSum};
use crate::model::{self, DiagonalState, LevelState, Spectrum, ThermalContext};

/// Default cap on the dimension of a single enumerated shell.
pub const DEFAULT_SHELL_DIM_CAP: usize = 4096;
/// Default cap on the number of entries of one dense matrix.
pub const DEFAULT_MATRIX_ENTRY_CAP: usize = 200_000;

/// Non-degenerate weight ladder `E_W = 0, Δ, 2Δ, …, max_level·Δ` (in quanta).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightModel {
    spacing: u64,
    max_level: u64,
}

impl WeightModel {
    pub fn new(spacing: u64, max_level: u64) -> Result<Self> {
        if spacing == 0 || max_level == 0 {
            return Err(contract!("weight needs positive spacing and max_level (got {spacing}, {max_level})"));
        }
        Ok(WeightModel { spacing, max_level })
    }

    pub fn spacing(&self) -> u64 {
        self.spacing
    }

    pub fn max_level(&self) -> u64 {
        self.max_level
    }

    /// Highest weight energy in quanta.
    pub fn top(&self) -> u64 {
        self.spacing * self.max_level
    }

    /// Ladder energies in quanta, ascending.
    pub fn energies(&self) -> impl DoubleEndedIterator<Item = u64> + Clone {
        let s = self.spacing;
        (0..=self.max_level).map(move |j| j * s)
    }

    pub fn contains(&self, energy: u64) -> bool {
        energy.is_multiple_of(self.spacing) && energy <= self.top()
    }

    pub fn spectrum(&self, quantum: f64) -> Spectrum {
        Spectrum::ladder(quantum, self.spacing, self.max_level).expect("validated ladder")
    }
}

/// An explicit bath spectrum with exact exponential multiplicity growth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConcreteBath {
    spectrum: Spectrum,
    base: u64,
}

impl ConcreteBath {
    /// Validates that levels are consecutive grid energies and that each multiplicity is
    /// `k` times the previous one, with `k = e^{β·quantum}` an integer ≥ 2.
    pub fn new(spectrum: Spectrum, ctx: ThermalContext) -> Result<Self> {
        let growth = math::exp(ctx.beta() * spectrum.quantum());
        let base = libm::round(growth);
        if base < 2.0 || math::fabs(growth - base) > 1e-9 * base {
            return Err(contract!(
                "concrete bath needs e^(beta*quantum) to be an integer >= 2, got {growth}"
            ));
        }
        let base = base as u64;
        for pair in spectrum.levels().windows(2) {
            if pair[1].energy != pair[0].energy + 1 {
                return Err(contract!(
                    "bath levels must be consecutive grid energies ({} then {})",
                    pair[0].energy,
                    pair[1].energy
                ));
            }
            if pair[0].multiplicity.checked_mul(base) != Some(pair[1].multiplicity) {
                return Err(contract!(
                    "bath multiplicity at {} quanta is {}, expected {} x {} (exact growth M_B(n) = M0*k^n)",
                    pair[1].energy,
                    pair[1].multiplicity,
                    base,
                    pair[0].multiplicity
                ));
            }
        }
        Ok(ConcreteBath { spectrum, base })
    }

    /// Bath with levels `lowest..=highest` and multiplicity `m_lowest·k^{n−lowest}`.
    pub fn exponential(
        quantum: f64,
        ctx: ThermalContext,
        m_lowest: u64,
        lowest: u64,
        highest: u64,
    ) -> Result<Self> {
        let base = libm::round(math::exp(ctx.beta() * quantum)) as u64;
        let mut levels = Vec::new();
        let mut m = m_lowest;
        for e in lowest..=highest {
            levels.push(model::Level::new(e, m));
            if e < highest {
                m = m.checked_mul(base).ok_or_else(|| contract!("bath multiplicity overflows u64"))?;
            }
        }
        Self::new(Spectrum::new(quantum, levels)?, ctx)
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Integer growth factor `k = e^{βΔE}`.
    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn lowest(&self) -> u64 {
        self.spectrum.min_energy()
    }

    pub fn highest(&self) -> u64 {
        self.spectrum.max_energy()
    }

    /// `M_B(E)`; zero outside the bath's energy range (including negative energies).
    pub fn multiplicity(&self, energy: i128) -> u128 {
        if energy < self.lowest() as i128 || energy > self.highest() as i128 {
            0
        } else {
            self.spectrum.multiplicity_at(energy as u64) as u128
        }
    }

    /// `M0 = M_B(lowest)/k^{lowest}`, the multiplicity extrapolated to zero energy.
    pub fn m0(&self) -> f64 {
        self.spectrum.levels()[0].multiplicity as f64 / libm::pow(self.base as f64, self.lowest() as f64)
    }
}

/// Bath description.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BathModel {
    /// `M_B(E) = m0·e^{βE}`, used only in ratios.
    Ideal { m0: f64 },
    Concrete(ConcreteBath),
}

/// Size limits for enumerated constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Caps {
    pub shell_dim: usize,
    pub matrix_entries: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { shell_dim: DEFAULT_SHELL_DIM_CAP, matrix_entries: DEFAULT_MATRIX_ENTRY_CAP }
    }
}

/// System (spectrum and diagonal state), bath, weight and temperature.
///
/// The weight starts in its ground level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompositeModel {
    system: Spectrum,
    state: DiagonalState,
    bath: BathModel,
    weight: WeightModel,
    ctx: ThermalContext,
    truncation: Option<u64>,
    caps: Caps,
}

impl CompositeModel {
    pub fn new(
        system: Spectrum,
        state: DiagonalState,
        bath: BathModel,
        weight: WeightModel,
        ctx: ThermalContext,
    ) -> Result<Self> {
        state.check_against(&system)?;
        model::log_partition_function(&system, ctx)?;
        match &bath {
            BathModel::Ideal { m0 } => {
                if !(m0.is_finite() && *m0 > 0.0) {
                    return Err(contract!("ideal bath needs a positive M0, got {m0}"));
                }
            }
            BathModel::Concrete(b) => {
                if !b.spectrum.same_grid(&system) {
                    return Err(contract!(
                        "bath quantum {} differs from system quantum {}",
                        b.spectrum.quantum(),
                        system.quantum()
                    ));
                }
                // Re-validate against this temperature.
                ConcreteBath::new(b.spectrum.clone(), ctx)?;
            }
        }
        let model = CompositeModel { system, state, bath, weight, ctx, truncation: None, caps: Caps::default() };
        model.check_window()?;
        Ok(model)
    }

    /// Restricts shells to total energies `≤ max_total` quanta.
    pub fn with_truncation(mut self, max_total: u64) -> Result<Self> {
        self.truncation = Some(max_total);
        self.check_window()?;
        Ok(self)
    }

    pub fn with_caps(mut self, caps: Caps) -> Self {
        self.caps = caps;
        self
    }

    /// Same model with a different system state.
    pub fn with_state(&self, state: DiagonalState) -> Result<Self> {
        state.check_against(&self.system)?;
        Ok(CompositeModel { state, ..self.clone() })
    }

    fn check_window(&self) -> Result<()> {
        if matches!(self.bath, BathModel::Concrete(_)) {
            let (lo, hi) = self.shell_window()?;
            if lo > hi {
                return Err(contract!(
                    "no complete shell: the bath range must cover every system level and weight lift \
                     (window would be {lo}..={hi} quanta)"
                ));
            }
        }
        Ok(())
    }

    pub fn system(&self) -> &Spectrum {
        &self.system
    }

    pub fn state(&self) -> &DiagonalState {
        &self.state
    }

    pub fn bath(&self) -> &BathModel {
        &self.bath
    }

    pub fn weight(&self) -> WeightModel {
        self.weight
    }

    pub fn ctx(&self) -> ThermalContext {
        self.ctx
    }

    pub fn truncation(&self) -> Option<u64> {
        self.truncation
    }

    pub fn caps(&self) -> Caps {
        self.caps
    }

    pub fn quantum(&self) -> f64 {
        self.system.quantum()
    }

    pub fn concrete_bath(&self) -> Result<&ConcreteBath> {
        match &self.bath {
            BathModel::Concrete(b) => Ok(b),
            BathModel::Ideal { .. } => Err(contract!("operation requires a concrete bath")),
        }
    }

    pub fn weight_spectrum(&self) -> Spectrum {
        self.weight.spectrum(self.quantum())
    }

    /// Inclusive range of shell energies on which dimension conditions are enforced.
    pub fn shell_window(&self) -> Result<(u64, u64)> {
        let bath = self.concrete_bath()?;
        let lo = bath.lowest() + self.system.max_energy() + self.weight.top();
        let mut hi = bath.highest() + self.system.min_energy();
        if let Some(t) = self.truncation {
            hi = hi.min(t);
        }
        Ok((lo, hi))
    }

    pub fn window_shells(&self) -> Result<Vec<u64>> {
        let (lo, hi) = self.shell_window()?;
        Ok((lo..=hi).collect())
    }

    /// Highest total energy reachable in the (truncated) product space.
    pub fn max_shell_energy(&self) -> Result<u64> {
        let bath = self.concrete_bath()?;
        let top = self.system.max_energy() + bath.highest() + self.weight.top();
        Ok(self.truncation.map_or(top, |t| top.min(t)))
    }

    /// `ln Z_B` of the concrete bath.
    pub fn log_bath_partition(&self) -> Result<f64> {
        model::log_partition_function(self.concrete_bath()?.spectrum(), self.ctx)
    }

    /// Thermal probability of one bath basis state at `energy` quanta.
    pub(crate) fn bath_state_weight(&self, energy: u64, log_zb: f64) -> Result<f64> {
        let bath = self.concrete_bath()?;
        Ok(math::exp(-self.ctx.exponent(bath.spectrum(), energy)? - log_zb))
    }

    /// The same system, weight and temperature with the bath replaced by its analytic
    /// exponential law. Shell ratios of a concrete model inside its window coincide with it.
    pub fn ideal_counterpart(&self) -> CompositeModel {
        let m0 = match &self.bath {
            BathModel::Ideal { m0 } => *m0,
            BathModel::Concrete(b) => b.m0(),
        };
        CompositeModel { bath: BathModel::Ideal { m0 }, ..self.clone() }
    }
}

/// A shell dimension: exact in concrete mode, real-valued in ideal mode.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Dimension {
    Exact(u128),
    Real(f64),
}

impl Dimension {
    pub fn as_f64(self) -> f64 {
        match self {
            Dimension::Exact(n) => n as f64,
            Dimension::Real(x) => x,
        }
    }

    pub fn exact(self) -> Option<u128> {
        match self {
            Dimension::Exact(n) => Some(n),
            Dimension::Real(_) => None,
        }
    }
}

/// Summary of one shell of the enumerated product space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShellInfo {
    pub energy: u64,
    /// Number of product basis states with this total energy (all weight levels).
    pub dimension: u128,
    /// Initial population `P^E_ini` (weight in its ground level).
    pub population: f64,
    /// Whether the shell lies in the enforced window.
    pub in_window: bool,
}

/// Lists every shell of a concrete model up to the truncation.
pub fn enumerate_shells(model: &CompositeModel) -> Result<Vec<ShellInfo>> {
    let bath = model.concrete_bath()?;
    let (wlo, whi) = model.shell_window()?;
    let log_zb = model.log_bath_partition()?;
    let level_pops = level_populations(model);
    let lowest = model.system.min_energy() + bath.lowest();
    let mut shells = Vec::new();
    for e in lowest..=model.max_shell_energy()? {
        let mut dim = 0u128;
        for l in model.system.levels() {
            for w in model.weight.energies() {
                dim += l.multiplicity as u128 * bath.multiplicity(e as i128 - l.energy as i128 - w as i128);
            }
        }
        if dim == 0 {
            continue;
        }
        if dim > model.caps.shell_dim as u128 {
            return Err(Error::Size(alloc::format!(
                "shell E={e} has dimension {dim}, cap is {}",
                model.caps.shell_dim
            )));
        }
        shells.push(ShellInfo {
            energy: e,
            dimension: dim,
            population: shell_population_with(model, e, &level_pops, log_zb)?,
            in_window: (wlo..=whi).contains(&e),
        });
    }
    Ok(shells)
}

/// Initial population `P^E_ini` of shell `energy` (concrete bath).
pub fn shell_population(model: &CompositeModel, energy: u64) -> Result<f64> {
    shell_population_with(model, energy, &level_populations(model), model.log_bath_partition()?)
}

fn shell_population_with(model: &CompositeModel, energy: u64, level_pops: &[(u64, f64)], log_zb: f64) -> Result<f64> {
    let bath = model.concrete_bath()?;
    let mut p = KahanSum::default();
    for &(es, lam) in level_pops {
        let eb = energy as i128 - es as i128;
        let m = bath.multiplicity(eb);
        if m > 0 && lam > 0.0 {
            p.add(lam * m as f64 * model.bath_state_weight(eb as u64, log_zb)?);
        }
    }
    Ok(p.value())
}

/// Total system population per level energy.
fn level_populations(model: &CompositeModel) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = Vec::new();
    for (s, &p) in model.system.basis().zip(model.state.populations()) {
        match out.last_mut() {
            Some((e, acc)) if *e == s.energy => *acc += p,
            _ => out.push((s.energy, p)),
        }
    }
    out
}

/// Mass accounting for the enforced window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowDiagnostics {
    pub window: (u64, u64),
    /// Initial mass inside the window shells.
    pub window_mass: f64,
    /// Initial mass in shells outside the window (including truncated shells).
    pub excluded_mass: f64,
    /// Initial mass in shells above the truncation energy.
    pub truncated_mass: f64,
}

pub fn window_diagnostics(model: &CompositeModel) -> Result<WindowDiagnostics> {
    let bath = model.concrete_bath()?;
    let window = model.shell_window()?;
    let log_zb = model.log_bath_partition()?;
    let pops = level_populations(model);
    let mut inside = KahanSum::default();
    let mut truncated = KahanSum::default();
    let top = model.system.max_energy() + bath.highest();
    for e in model.system.min_energy() + bath.lowest()..=top {
        let p = shell_population_with(model, e, &pops, log_zb)?;
        if (window.0..=window.1).contains(&e) {
            inside.add(p);
        }
        if model.truncation.is_some_and(|t| e > t) {
            truncated.add(p);
        }
    }
    Ok(WindowDiagnostics {
        window,
        window_mass: inside.value(),
        excluded_mass: 1.0 - inside.value(),
        truncated_mass: truncated.value(),
    })
}

/// Validates that `(w_lo, w_hi)` lies on the weight ladder.
pub(crate) fn check_weight_window(weight: &WeightModel, w_lo: u64, w_hi: u64) -> Result<()> {
    if w_lo > w_hi {
        return Err(contract!("weight window ({w_lo}, {w_hi}) is reversed"));
    }
    for w in [w_lo, w_hi] {
        if !weight.contains(w) {
            return Err(contract!(
                "weight energy {w} quanta is not on the ladder (spacing {}, top {})",
                weight.spacing(),
                weight.top()
            ));
        }
    }
    Ok(())
}

/// `ln Σ_{E_W = w_lo, w_lo+Δ, …, w_hi} e^{−βE_W}` via the closed geometric form.
pub(crate) fn log_weight_window_sum(model: &CompositeModel, w_lo: u64, w_hi: u64) -> f64 {
    let b = model.ctx.beta();
    let q = model.quantum();
    let step = b * (model.weight.spacing() as f64) * q;
    let span = b * ((w_hi - w_lo) as f64) * q;
    -b * (w_lo as f64) * q + math::log(-math::expm1(-(span + step))) - math::log(-math::expm1(-step))
}

/// Dimension of the final subspace in shell `shell_energy` with the weight anywhere in
/// `[w_lo, w_hi]` (quanta, on the ladder).
///
/// Concrete mode counts states exactly; inside the window this equals
/// `M_B(E)·Z_S·Σ e^{−βE_W}`. Ideal mode evaluates that closed form.
pub fn final_dimension(model: &CompositeModel, shell_energy: u64, weight_window: (u64, u64)) -> Result<Dimension> {
    let (w_lo, w_hi) = weight_window;
    check_weight_window(&model.weight, w_lo, w_hi)?;
    match &model.bath {
        BathModel::Concrete(bath) => {
            let mut d = 0u128;
            let mut w = w_lo;
            while w <= w_hi {
                for l in model.system.levels() {
                    d += l.multiplicity as u128
                        * bath.multiplicity(shell_energy as i128 - l.energy as i128 - w as i128);
                }
                w += model.weight.spacing();
            }
            Ok(Dimension::Exact(d))
        }
        BathModel::Ideal { m0 } => {
            let log_d = math::log(*m0)
                + model.ctx.beta() * model.quantum() * shell_energy as f64
                + model::log_partition_function(&model.system, model.ctx)?
                + log_weight_window_sum(model, w_lo, w_hi);
            Ok(Dimension::Real(math::exp(log_d)))
        }
    }
}

/// Multiplicity attached to a block.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BlockCount {
    /// Exact bath multiplicity `M_B(E − E_S)`.
    Exact(u128),
    /// `M_B(E − E_S)/M_B(E) = e^{−βE_S}` (ideal mode).
    Relative(f64),
}

impl BlockCount {
    pub fn as_f64(self) -> f64 {
        match self {
            BlockCount::Exact(n) => n as f64,
            BlockCount::Relative(x) => x,
        }
    }
}

/// A run of equal eigenvalues of the initial state belonging to one system basis state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Block {
    pub level: LevelState,
    /// Position of `level` in the system basis.
    pub position: usize,
    pub value: f64,
    pub count: BlockCount,
    pub mass: f64,
    /// `ln λ + βE_S`, the shell-independent ordering key.
    pub key: f64,
}

/// Non-zero eigenvalues of the initial state in one shell, sorted descending.
///
/// In ideal mode values and masses are normalized by the shell population.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockTable {
    pub shell_energy: u64,
    pub population: f64,
    pub blocks: Vec<Block>,
}

impl BlockTable {
    pub fn is_exact(&self) -> bool {
        self.blocks.iter().all(|b| matches!(b.count, BlockCount::Exact(_)))
    }
}

/// Builds the descending eigenvalue blocks of `ρ_S ⊗ τ_B ⊗ |0⟩⟨0|` in one shell.
pub fn initial_blocks(model: &CompositeModel, shell_energy: u64) -> Result<BlockTable> {
    let beta_q = model.ctx.beta() * model.quantum();
    let mut blocks = Vec::new();
    let log_zb = match &model.bath {
        BathModel::Concrete(_) => Some(model.log_bath_partition()?),
        BathModel::Ideal { .. } => None,
    };
    for (pos, (s, &lam)) in model.system.basis().zip(model.state.populations()).enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let key = math::log(lam) + beta_q * s.energy as f64;
        let block = match (&model.bath, log_zb) {
            (BathModel::Concrete(bath), Some(log_zb)) => {
                let eb = shell_energy as i128 - s.energy as i128;
                let count = bath.multiplicity(eb);
                if count == 0 {
                    continue;
                }
                let value = lam * model.bath_state_weight(eb as u64, log_zb)?;
                Block { level: s, position: pos, value, count: BlockCount::Exact(count), mass: value * count as f64, key }
            }
            _ => {
                let rel = math::exp(-beta_q * s.energy as f64);
                Block {
                    level: s,
                    position: pos,
                    value: lam / rel,
                    count: BlockCount::Relative(rel),
                    mass: lam,
                    key,
                }
            }
        };
        blocks.push(block);
    }
    order_blocks(&mut blocks);
    let mut pop = KahanSum::default();
    blocks.iter().for_each(|b| pop.add(b.mass));
    Ok(BlockTable { shell_energy, population: pop.value(), blocks })
}

/// Relative width within which two ordering keys count as tied.
const KEY_TIE_TOLERANCE: f64 = 1e-12;

/// Sorts by descending key; runs of keys equal up to rounding are ordered by
/// ascending `(E_S, g_S)`.
fn order_blocks(blocks: &mut [Block]) {
    blocks.sort_by(|a, b| b.key.partial_cmp(&a.key).unwrap_or(Ordering::Equal).then_with(|| a.level.cmp(&b.level)));
    let mut start = 0;
    while start < blocks.len() {
        let mut end = start + 1;
        while end < blocks.len() {
            let (x, y) = (blocks[end - 1].key, blocks[end].key);
            if math::fabs(x - y) > KEY_TIE_TOLERANCE * (1.0 + math::fabs(x)) {
                break;
            }
            end += 1;
        }
        blocks[start..end].sort_by_key(|b| b.level);
        start = end;
    }
}

/// One basis state of the product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProductState {
    /// Weight energy in quanta.
    pub weight: u64,
    /// Position in the system basis.
    pub system: usize,
    /// Bath energy in quanta.
    pub bath_energy: u64,
    /// Bath degeneracy index.
    pub bath_index: u64,
}

/// Enumerates every product basis state of shell `energy`, ordered by weight energy,
/// then system position, then bath index.
pub fn shell_basis(model: &CompositeModel, energy: u64) -> Result<Vec<ProductState>> {
    let bath = model.concrete_bath()?;
    let mut dim = 0u128;
    for l in model.system.levels() {
        for w in model.weight.energies() {
            dim += l.multiplicity as u128 * bath.multiplicity(energy as i128 - l.energy as i128 - w as i128);
        }
    }
    if dim > model.caps.shell_dim as u128 {
        return Err(Error::Size(alloc::format!(
            "shell E={energy} has dimension {dim}, cap is {}",
            model.caps.shell_dim
        )));
    }
    let mut states = Vec::with_capacity(dim as usize);
    for w in model.weight.energies() {
        for (pos, s) in model.system.basis().enumerate() {
            let eb = energy as i128 - s.energy as i128 - w as i128;
            let m = bath.multiplicity(eb);
            for f in 0..m as u64 {
                states.push(ProductState { weight: w, system: pos, bath_energy: eb as u64, bath_index: f });
            }
        }
    }
    Ok(states)
}
