//! Spectra, diagonal states and the scalar thermodynamic quantities built on them.

use alloc::vec::Vec;

use crate::error::{contract, Error, Result};
use crate::math::{self, log_sum_exp, xlogx, KahanSum};
use crate::NORMALIZATION_TOLERANCE;

/// One energy level: `energy` in grid quanta and its degeneracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Level {
    pub energy: u64,
    pub multiplicity: u64,
}

impl Level {
    pub const fn new(energy: u64, multiplicity: u64) -> Self {
        Level { energy, multiplicity }
    }
}

/// A basis state `|E, g⟩` of a spectrum, with `g` the 0-based degeneracy index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelState {
    pub energy: u64,
    pub index: u64,
}

/// A discrete energy ladder on an integer grid.
///
/// Energies are strictly increasing; the basis is ordered level by level with the
/// degeneracy index running fastest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spectrum {
    quantum: f64,
    levels: Vec<Level>,
}

impl Spectrum {
    pub fn new(quantum: f64, levels: Vec<Level>) -> Result<Self> {
        if !(quantum.is_finite() && quantum > 0.0) {
            return Err(contract!("energy quantum must be positive and finite, got {quantum}"));
        }
        if levels.is_empty() {
            return Err(contract!("spectrum needs at least one level"));
        }
        for pair in levels.windows(2) {
            if pair[1].energy <= pair[0].energy {
                return Err(contract!(
                    "energies must be strictly increasing ({} then {})",
                    pair[0].energy,
                    pair[1].energy
                ));
            }
        }
        if let Some(l) = levels.iter().find(|l| l.multiplicity == 0) {
            return Err(contract!("level at {} quanta has multiplicity 0", l.energy));
        }
        Ok(Spectrum { quantum, levels })
    }

    /// Convenience constructor from `(energy_quanta, multiplicity)` pairs.
    pub fn from_pairs(quantum: f64, pairs: &[(u64, u64)]) -> Result<Self> {
        Self::new(quantum, pairs.iter().map(|&(e, m)| Level::new(e, m)).collect())
    }

    /// Non-degenerate ladder `0, spacing, 2·spacing, …, max_level·spacing`.
    pub fn ladder(quantum: f64, spacing: u64, max_level: u64) -> Result<Self> {
        if spacing == 0 {
            return Err(contract!("ladder spacing must be positive"));
        }
        Self::new(quantum, (0..=max_level).map(|j| Level::new(j * spacing, 1)).collect())
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn dimension(&self) -> usize {
        self.levels.iter().map(|l| l.multiplicity as usize).sum()
    }

    pub fn max_energy(&self) -> u64 {
        self.levels.last().map_or(0, |l| l.energy)
    }

    pub fn min_energy(&self) -> u64 {
        self.levels.first().map_or(0, |l| l.energy)
    }

    /// Energy in physical units of a grid energy.
    pub fn energy_of(&self, quanta: u64) -> f64 {
        quanta as f64 * self.quantum
    }

    /// Multiplicity at `energy` quanta, zero when the energy is not a level.
    pub fn multiplicity_at(&self, energy: u64) -> u64 {
        self.levels
            .binary_search_by_key(&energy, |l| l.energy)
            .map_or(0, |i| self.levels[i].multiplicity)
    }

    /// Basis states in canonical order.
    pub fn basis(&self) -> impl Iterator<Item = LevelState> + '_ {
        self.levels
            .iter()
            .flat_map(|l| (0..l.multiplicity).map(move |g| LevelState { energy: l.energy, index: g }))
    }

    /// Position of a basis state in [`Spectrum::basis`].
    pub fn position(&self, state: LevelState) -> Option<usize> {
        let mut offset = 0usize;
        for l in &self.levels {
            if l.energy == state.energy {
                return (state.index < l.multiplicity).then(|| offset + state.index as usize);
            }
            offset += l.multiplicity as usize;
        }
        None
    }

    /// Energy (quanta) of each basis position.
    pub fn basis_energies(&self) -> Vec<u64> {
        self.basis().map(|s| s.energy).collect()
    }

    pub(crate) fn same_grid(&self, other: &Spectrum) -> bool {
        math::fabs(self.quantum - other.quantum) <= 1e-12 * self.quantum.max(other.quantum)
    }
}

/// Inverse temperature `β` in inverse energy units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThermalContext {
    beta: f64,
}

impl ThermalContext {
    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 {
            Ok(ThermalContext { beta })
        } else {
            Err(contract!("inverse temperature must be positive and finite, got {beta}"))
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    /// `β·E` for a grid energy; errors once the Boltzmann exponent leaves the guard band.
    pub(crate) fn exponent(&self, spectrum: &Spectrum, quanta: u64) -> Result<f64> {
        let x = self.beta * spectrum.energy_of(quanta);
        if x > math::EXP_GUARD {
            Err(Error::Range(alloc::format!(
                "beta*E = {x} exceeds the log-domain guard {}",
                math::EXP_GUARD
            )))
        } else {
            Ok(x)
        }
    }
}

/// Populations of a state that is diagonal in a spectrum's basis.
///
/// Entry `i` is the population of the `i`-th state of [`Spectrum::basis`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagonalState {
    populations: Vec<f64>,
}

impl DiagonalState {
    pub fn new(spectrum: &Spectrum, populations: Vec<f64>) -> Result<Self> {
        if populations.len() != spectrum.dimension() {
            return Err(contract!(
                "state has {} populations but the spectrum has dimension {}",
                populations.len(),
                spectrum.dimension()
            ));
        }
        Self::from_populations(populations)
    }

    /// Builds a state without a spectrum; the caller guarantees the basis.
    pub fn from_populations(populations: Vec<f64>) -> Result<Self> {
        if let Some(p) = populations.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(contract!("population {p} is negative or not finite"));
        }
        let mut total = KahanSum::default();
        populations.iter().for_each(|&p| total.add(p));
        if math::fabs(total.value() - 1.0) > NORMALIZATION_TOLERANCE {
            return Err(contract!("populations sum to {}, expected 1", total.value()));
        }
        Ok(DiagonalState { populations })
    }

    /// Pure state on basis position `position`.
    pub fn pure(spectrum: &Spectrum, position: usize) -> Result<Self> {
        let dim = spectrum.dimension();
        if position >= dim {
            return Err(contract!("basis position {position} out of range for dimension {dim}"));
        }
        let mut p = alloc::vec![0.0; dim];
        p[position] = 1.0;
        Ok(DiagonalState { populations: p })
    }

    pub fn uniform(spectrum: &Spectrum) -> Self {
        let dim = spectrum.dimension();
        DiagonalState { populations: alloc::vec![1.0 / dim as f64; dim] }
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn dimension(&self) -> usize {
        self.populations.len()
    }

    pub fn get(&self, spectrum: &Spectrum, state: LevelState) -> Option<f64> {
        spectrum.position(state).and_then(|i| self.populations.get(i).copied())
    }

    /// True when every basis state carries nonzero population.
    pub fn is_full_rank(&self) -> bool {
        self.populations.iter().all(|&p| p > 0.0)
    }

    pub(crate) fn check_against(&self, spectrum: &Spectrum) -> Result<()> {
        if self.populations.len() == spectrum.dimension() {
            Ok(())
        } else {
            Err(contract!(
                "state dimension {} does not match spectrum dimension {}",
                self.populations.len(),
                spectrum.dimension()
            ))
        }
    }
}

/// `ln Z` computed in the log domain.
pub fn log_partition_function(spectrum: &Spectrum, ctx: ThermalContext) -> Result<f64> {
    let mut terms = Vec::with_capacity(spectrum.levels().len());
    for l in spectrum.levels() {
        terms.push(math::log(l.multiplicity as f64) - ctx.exponent(spectrum, l.energy)?);
    }
    Ok(log_sum_exp(terms))
}

/// `Z = Σ M(E) e^{-βE}`.
pub fn partition_function(spectrum: &Spectrum, ctx: ThermalContext) -> Result<f64> {
    let z = math::exp(log_partition_function(spectrum, ctx)?);
    if z.is_finite() && z > 0.0 {
        Ok(z)
    } else {
        Err(Error::Range(alloc::format!("partition function {z} is not representable")))
    }
}

/// Thermal populations `t(E) = e^{-βE}/Z`, identical within a level.
pub fn thermal_state(spectrum: &Spectrum, ctx: ThermalContext) -> Result<DiagonalState> {
    let log_z = log_partition_function(spectrum, ctx)?;
    let mut pops = Vec::with_capacity(spectrum.dimension());
    for l in spectrum.levels() {
        let t = math::exp(-ctx.exponent(spectrum, l.energy)? - log_z);
        pops.extend(core::iter::repeat_n(t, l.multiplicity as usize));
    }
    Ok(DiagonalState { populations: pops })
}

/// Thermal population of a single basis state at `energy` quanta.
pub fn thermal_weight(spectrum: &Spectrum, ctx: ThermalContext, energy: u64) -> Result<f64> {
    Ok(math::exp(-ctx.exponent(spectrum, energy)? - log_partition_function(spectrum, ctx)?))
}

/// Shannon entropy in nats.
pub fn entropy(state: &DiagonalState) -> f64 {
    let mut s = KahanSum::default();
    state.populations.iter().for_each(|&p| s.add(-xlogx(p)));
    s.value()
}

/// `Σ p(E,g)·E` in energy units.
pub fn mean_energy(state: &DiagonalState, spectrum: &Spectrum) -> Result<f64> {
    state.check_against(spectrum)?;
    let mut u = KahanSum::default();
    for (p, s) in state.populations.iter().zip(spectrum.basis()) {
        u.add(p * spectrum.energy_of(s.energy));
    }
    Ok(u.value())
}

/// `F = U − S/β`.
pub fn free_energy(state: &DiagonalState, spectrum: &Spectrum, ctx: ThermalContext) -> Result<f64> {
    Ok(mean_energy(state, spectrum)? - entropy(state) / ctx.beta())
}

/// `F(τ) = −ln Z / β`.
pub fn thermal_free_energy(spectrum: &Spectrum, ctx: ThermalContext) -> Result<f64> {
    Ok(-log_partition_function(spectrum, ctx)? / ctx.beta())
}

/// Trace distance `½ Σ |a − b|` between diagonal states on the same basis.
pub fn trace_distance_diag(a: &DiagonalState, b: &DiagonalState) -> Result<f64> {
    if a.populations.len() != b.populations.len() {
        return Err(contract!(
            "trace distance between states of dimension {} and {}",
            a.populations.len(),
            b.populations.len()
        ));
    }
    let mut d = KahanSum::default();
    for (x, y) in a.populations.iter().zip(&b.populations) {
        d.add(math::fabs(x - y));
    }
    Ok(0.5 * d.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_level() -> Spectrum {
        Spectrum::from_pairs(1.0, &[(0, 1), (1, 1)]).unwrap()
    }

    fn ctx(beta: f64) -> ThermalContext {
        ThermalContext::new(beta).unwrap()
    }

    #[test]
    fn partition_function_examples() {
        let single = Spectrum::from_pairs(1.0, &[(0, 1)]).unwrap();
        assert_eq!(partition_function(&single, ctx(1.0)).unwrap(), 1.0);
        let deg = Spectrum::from_pairs(1.0, &[(0, 3)]).unwrap();
        assert!((partition_function(&deg, ctx(1.0)).unwrap() - 3.0).abs() < 1e-15);
        let z = partition_function(&two_level(), ctx(1.0)).unwrap();
        assert!((z - (1.0 + libm::exp(-1.0))).abs() < 1e-15);
    }

    #[test]
    fn partition_function_range_guard() {
        let s = Spectrum::from_pairs(1.0, &[(0, 1), (1000, 1)]).unwrap();
        assert!(matches!(partition_function(&s, ctx(1.0)), Err(Error::Range(_))));
    }

    #[test]
    fn thermal_state_examples() {
        let deg = Spectrum::from_pairs(1.0, &[(0, 2)]).unwrap();
        assert_eq!(thermal_state(&deg, ctx(1.0)).unwrap().populations(), &[0.5, 0.5]);
        let t = thermal_state(&two_level(), ctx(1.0)).unwrap();
        assert!((t.populations()[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((t.populations()[1] - 0.268_941_421_369_995_1).abs() < 1e-12);
        let hot = thermal_state(&two_level(), ctx(1e-9)).unwrap();
        assert!((hot.populations()[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn entropy_examples() {
        let s4 = Spectrum::from_pairs(1.0, &[(0, 4)]).unwrap();
        assert_eq!(entropy(&DiagonalState::pure(&s4, 2).unwrap()), 0.0);
        assert!((entropy(&DiagonalState::uniform(&s4)) - libm::log(4.0)).abs() < 1e-15);
        let t = thermal_state(&two_level(), ctx(1.0)).unwrap();
        assert!((entropy(&t) - 0.582_203_108_888_217_9).abs() < 1e-12);
    }

    #[test]
    fn free_energy_examples() {
        let s = two_level();
        assert_eq!(free_energy(&DiagonalState::pure(&s, 0).unwrap(), &s, ctx(1.0)).unwrap(), 0.0);
        let t = thermal_state(&s, ctx(1.0)).unwrap();
        let f = free_energy(&t, &s, ctx(1.0)).unwrap();
        assert!((f + libm::log(1.0 + libm::exp(-1.0))).abs() < 1e-12);
        assert!((f - thermal_free_energy(&s, ctx(1.0)).unwrap()).abs() < 1e-12);
        let deg = Spectrum::from_pairs(1.0, &[(0, 2)]).unwrap();
        let f = free_energy(&DiagonalState::uniform(&deg), &deg, ctx(1.0)).unwrap();
        assert!((f + libm::log(2.0)).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_examples() {
        let s = two_level();
        let a = DiagonalState::new(&s, vec![0.5, 0.5]).unwrap();
        let b = DiagonalState::new(&s, vec![0.6, 0.4]).unwrap();
        assert_eq!(trace_distance_diag(&a, &a).unwrap(), 0.0);
        assert!((trace_distance_diag(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        let g = DiagonalState::pure(&s, 0).unwrap();
        let e = DiagonalState::pure(&s, 1).unwrap();
        assert_eq!(trace_distance_diag(&g, &e).unwrap(), 1.0);
        let three = DiagonalState::from_populations(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(trace_distance_diag(&a, &three), Err(Error::Contract(_))));
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::from_pairs(1.0, &[(1, 1), (1, 2)]).is_err());
        assert!(Spectrum::from_pairs(1.0, &[(0, 0)]).is_err());
        assert!(Spectrum::from_pairs(0.0, &[(0, 1)]).is_err());
        assert!(Spectrum::from_pairs(1.0, &[]).is_err());
        assert!(DiagonalState::new(&two_level(), vec![0.5, 0.4]).is_err());
        assert!(DiagonalState::new(&two_level(), vec![1.0]).is_err());
        assert!(ThermalContext::new(0.0).is_err());
        assert!(ThermalContext::new(f64::INFINITY).is_err());
    }

    #[test]
    fn basis_order_and_positions() {
        let s = Spectrum::from_pairs(1.0, &[(0, 2), (3, 1)]).unwrap();
        let b: Vec<_> = s.basis().collect();
        assert_eq!(b.len(), 3);
        assert_eq!(b[2], LevelState { energy: 3, index: 0 });
        assert_eq!(s.position(LevelState { energy: 0, index: 1 }), Some(1));
        assert_eq!(s.position(LevelState { energy: 0, index: 2 }), None);
        assert_eq!(s.multiplicity_at(3), 1);
        assert_eq!(s.multiplicity_at(2), 0);
    }
}
