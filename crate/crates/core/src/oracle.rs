//! Brute-force cross-checks built from explicit product-state enumeration.
//!
//! Nothing here goes through the block tables or closed forms of the other modules: bath
//! weights are summed directly, eigenvalues are sorted one by one, and feasibility is
//! decided by exact integer counts with an explicit permutation as witness.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::density::DensityMatrix;
use crate::error::{contract, Error, Result};
use crate::linalg::CMatrix;
use crate::math::{self, KahanSum};
use crate::model::{self, DiagonalState};
use crate::shells::{self, CompositeModel, ProductState};
use crate::typicality::{haar_unitary, sample_rng};

/// Tolerance for the trace condition of a constructed permutation.
pub const TRACE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Transferability {
    pub d_ini: usize,
    pub d_fin: usize,
    pub feasible: bool,
    /// Basis indices of the retained eigenvectors, largest eigenvalue first.
    pub retained: Vec<usize>,
    /// Image of every basis index under the constructed permutation.
    pub permutation: Option<Vec<usize>>,
    /// Mass the permutation places in the final subspace.
    pub transferred_mass: Option<f64>,
}

/// Decides whether the eigenvalues of one shell (indexed by basis state) can be moved
/// into `final_subspace` up to failure probability `epsilon`.
///
/// The retained subspace is the smallest set of largest eigenvalues whose mass reaches
/// `(1−ε)·P`. When it fits, the permutation sends the retained states in order onto the
/// first final states and pairs up the remaining states in index order; the resulting
/// trace condition is verified before the permutation is returned.
pub fn transferable(eigenvalues: &[f64], final_subspace: &[usize], epsilon: f64) -> Result<Transferability> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(contract!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    let n = eigenvalues.len();
    if final_subspace.iter().any(|&i| i >= n) {
        return Err(contract!("final subspace index out of range"));
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| eigenvalues[i] > 0.0).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut total = KahanSum::default();
    order.iter().for_each(|&i| total.add(eigenvalues[i]));
    let p = total.value();
    let threshold = (1.0 - epsilon) * p - TRACE_TOLERANCE * p;
    let mut kept = KahanSum::default();
    let mut retained = Vec::new();
    for &i in &order {
        if epsilon > 0.0 && kept.value() >= threshold {
            break;
        }
        kept.add(eigenvalues[i]);
        retained.push(i);
    }
    let d_ini = retained.len();
    let d_fin = final_subspace.len();
    if d_fin < d_ini {
        return Ok(Transferability { d_ini, d_fin, feasible: false, retained, permutation: None, transferred_mass: None });
    }
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (k, &i) in retained.iter().enumerate() {
        image[i] = final_subspace[k];
        used[final_subspace[k]] = true;
    }
    let mut free = (0..n).filter(|&j| !used[j]);
    for slot in image.iter_mut() {
        if *slot == usize::MAX {
            *slot = free.next().expect("bijection: equal counts on both sides");
        }
    }
    let mut in_final = vec![false; n];
    final_subspace.iter().for_each(|&j| in_final[j] = true);
    let mut hit = vec![false; n];
    let mut moved = KahanSum::default();
    for (i, &j) in image.iter().enumerate() {
        if hit[j] {
            return Err(contract!("constructed map is not a permutation"));
        }
        hit[j] = true;
        if in_final[j] {
            moved.add(eigenvalues[i]);
        }
    }
    let moved = moved.value();
    if moved < (1.0 - epsilon) * p - TRACE_TOLERANCE {
        return Err(contract!(
            "permutation places {moved} in the final subspace, below the required {}",
            (1.0 - epsilon) * p
        ));
    }
    Ok(Transferability {
        d_ini,
        d_fin,
        feasible: true,
        retained,
        permutation: Some(image),
        transferred_mass: Some(moved),
    })
}

/// Thermal probability of each bath basis state, by bath energy, from a direct sum.
fn bath_weights(model: &CompositeModel) -> Result<Vec<(u64, f64)>> {
    let bath = model.concrete_bath()?;
    let bq = model.ctx().beta() * model.quantum();
    let mut z = KahanSum::default();
    let raw: Vec<(u64, f64, u64)> = bath
        .spectrum()
        .levels()
        .iter()
        .map(|l| (l.energy, math::exp(-bq * l.energy as f64), l.multiplicity))
        .collect();
    raw.iter().for_each(|&(_, x, m)| z.add(x * m as f64));
    Ok(raw.into_iter().map(|(e, x, _)| (e, x / z.value())).collect())
}

fn lookup(weights: &[(u64, f64)], energy: u64) -> f64 {
    weights.iter().find(|(e, _)| *e == energy).map_or(0.0, |w| w.1)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleShell {
    pub energy: u64,
    pub d_ini: usize,
    pub d_fin: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleWork {
    /// Largest feasible ladder level in quanta.
    pub w: u64,
    pub w_energy: f64,
    /// Retained and final dimensions at `w`.
    pub shells: Vec<OracleShell>,
}

/// Scans the weight ladder downward for the largest level into which every window shell
/// can be transferred.
pub fn brute_force_max_work(model: &CompositeModel, epsilon: f64) -> Result<OracleWork> {
    let tau_b = bath_weights(model)?;
    let lambda = model.state().populations();
    let mut shell_data = Vec::new();
    for e in model.window_shells()? {
        let basis = shells::shell_basis(model, e)?;
        let eig: Vec<f64> = basis
            .iter()
            .map(|s| if s.weight == 0 { lambda[s.system] * lookup(&tau_b, s.bath_energy) } else { 0.0 })
            .collect();
        shell_data.push((e, basis, eig));
    }
    'ladder: for w in model.weight().energies().rev() {
        let mut shells_out = Vec::with_capacity(shell_data.len());
        for (e, basis, eig) in &shell_data {
            let fin: Vec<usize> = (0..basis.len()).filter(|&i| basis[i].weight == w).collect();
            let t = transferable(eig, &fin, epsilon)?;
            if !t.feasible {
                continue 'ladder;
            }
            shells_out.push(OracleShell { energy: *e, d_ini: t.d_ini, d_fin: t.d_fin });
        }
        return Ok(OracleWork { w, w_energy: w as f64 * model.quantum(), shells: shells_out });
    }
    Err(Error::Dimension("no weight level is reachable, not even the ground level".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum WitnessStatus {
    /// A permutation reproducing the target marginal was built and checked.
    Witnessed,
    /// The level-wise bound holds but the target populations are not whole multiples of
    /// the initial eigenvalue, so no permutation witness exists at this resolution.
    BoundFeasibleWitnessNotConstructed,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleFormation {
    pub w: u64,
    pub w_energy: f64,
    pub status: WitnessStatus,
}

/// Smallest ladder level `w` from which `τ_S ⊗ τ_B ⊗ |w⟩` can be mapped onto a state with
/// system marginal `target` and the weight in its ground level.
///
/// In each window shell every initial eigenvalue equals `r_E`; a unitary cannot create a
/// diagonal entry above `r_E`, so the target entry `s(E_S,g)·τ_B(E−E_S)` of every final
/// product state must not exceed it.
pub fn brute_force_formation(model: &CompositeModel, target: &DiagonalState) -> Result<OracleFormation> {
    if model.system().dimension() > 4 {
        return Err(Error::Size(format!("formation oracle limited to system dimension 4, got {}", model.system().dimension())));
    }
    target.check_against(model.system())?;
    let tau_b = bath_weights(model)?;
    let tau_s = model::thermal_state(model.system(), model.ctx())?;
    let s = target.populations();
    let mut shell_data = Vec::new();
    for e in model.window_shells()? {
        let basis = shells::shell_basis(model, e)?;
        if basis.len() > 256 {
            return Err(Error::Size(format!("formation oracle limited to shells of dimension 256, shell E={e} has {}", basis.len())));
        }
        shell_data.push(basis);
    }
    for w in model.weight().energies() {
        let mut bound_ok = true;
        let mut witnessed = true;
        for basis in &shell_data {
            let initial: Vec<f64> = basis
                .iter()
                .map(|st| if st.weight == w { tau_s.populations()[st.system] * lookup(&tau_b, st.bath_energy) } else { 0.0 })
                .collect();
            let r = initial.iter().cloned().fold(0.0, f64::max);
            let final_diag: Vec<f64> = basis
                .iter()
                .map(|st| if st.weight == 0 { s[st.system] * lookup(&tau_b, st.bath_energy) } else { 0.0 })
                .collect();
            if final_diag.iter().any(|&x| x > r * (1.0 + 1e-12)) {
                bound_ok = false;
                break;
            }
            if witnessed && !formation_witness(basis, &initial, &final_diag, r) {
                witnessed = false;
            }
        }
        if bound_ok {
            let status =
                if witnessed { WitnessStatus::Witnessed } else { WitnessStatus::BoundFeasibleWitnessNotConstructed };
            return Ok(OracleFormation { w, w_energy: w as f64 * model.quantum(), status });
        }
    }
    Err(Error::Dimension("target cannot be formed from any level of the weight ladder".into()))
}

/// Builds a permutation sending the `r`-valued initial eigenvectors onto final states so
/// that the system marginal in this shell matches the target exactly. Requires every
/// per-system-state target mass to be a whole number of eigenvalues.
fn formation_witness(basis: &[ProductState], initial: &[f64], final_diag: &[f64], r: f64) -> bool {
    let n_sys = basis.iter().map(|s| s.system).max().map_or(0, |m| m + 1);
    let mut need = vec![0usize; n_sys];
    for s in 0..n_sys {
        let mass: f64 = basis.iter().zip(final_diag).filter(|(st, _)| st.system == s).map(|(_, x)| x).sum();
        let k = mass / r;
        let kr = libm::round(k);
        if math::fabs(k - kr) > 1e-9 {
            return false;
        }
        need[s] = kr as usize;
    }
    let sources: Vec<usize> = (0..basis.len()).filter(|&i| initial[i] > 0.0).collect();
    if need.iter().sum::<usize>() != sources.len() {
        return false;
    }
    let mut image = Vec::with_capacity(sources.len());
    for (s, &k) in need.iter().enumerate() {
        let slots: Vec<usize> = (0..basis.len()).filter(|&i| basis[i].weight == 0 && basis[i].system == s).collect();
        if slots.len() < k {
            return false;
        }
        image.extend_from_slice(&slots[..k]);
    }
    let mut got = vec![0.0; n_sys];
    for (&src, &dst) in sources.iter().zip(&image) {
        got[basis[dst].system] += initial[src];
    }
    (0..n_sys).all(|s| {
        let want: f64 = basis.iter().zip(final_diag).filter(|(st, _)| st.system == s).map(|(_, x)| x).sum();
        math::fabs(got[s] - want) <= TRACE_TOLERANCE
    })
}

/// One unitary block per shell of the full product space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUnitary {
    pub blocks: Vec<UnitaryBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryBlock {
    pub energy: u64,
    pub basis: Vec<ProductState>,
    pub unitary: CMatrix,
}

fn full_space_shells(model: &CompositeModel) -> Result<Vec<(u64, Vec<ProductState>)>> {
    if model.truncation().is_some() {
        return Err(contract!("the full product space is required; remove the energy truncation"));
    }
    let cap = model.caps().matrix_entries;
    let mut out = Vec::new();
    for info in shells::enumerate_shells(model)? {
        let d = info.dimension as usize;
        if d.saturating_mul(d) > cap {
            return Err(Error::Size(format!("shell E={} has dimension {d}; a dense block exceeds {cap} entries", info.energy)));
        }
        out.push((info.energy, shells::shell_basis(model, info.energy)?));
    }
    Ok(out)
}

impl BlockUnitary {
    pub fn identity(model: &CompositeModel) -> Result<Self> {
        let blocks = full_space_shells(model)?
            .into_iter()
            .map(|(energy, basis)| {
                let n = basis.len();
                UnitaryBlock { energy, basis, unitary: CMatrix::identity(n) }
            })
            .collect();
        Ok(BlockUnitary { blocks })
    }

    pub fn dimension(&self) -> usize {
        self.blocks.iter().map(|b| b.basis.len()).sum()
    }

    /// The global matrix on the concatenated shell bases, with the total energy of
    /// every basis state.
    pub fn to_dense(&self, max_entries: usize) -> Result<(Vec<u64>, CMatrix)> {
        let n = self.dimension();
        if n * n > max_entries {
            return Err(Error::Size(format!("dense unitary {n}x{n} exceeds the cap of {max_entries} entries")));
        }
        let mut m = CMatrix::zeros(n, n);
        let mut energies = Vec::with_capacity(n);
        let mut off = 0;
        for b in &self.blocks {
            let d = b.basis.len();
            for c in 0..d {
                for r in 0..d {
                    m[(off + r, off + c)] = b.unitary[(r, c)];
                }
            }
            energies.extend(core::iter::repeat_n(b.energy, d));
            off += d;
        }
        Ok((energies, m))
    }

    /// `max |[H, V]_{rc}| = max |(E_r − E_c)·V_{rc}|` over the dense matrix, in quanta.
    pub fn energy_commutator_defect(&self, max_entries: usize) -> Result<f64> {
        let (e, m) = self.to_dense(max_entries)?;
        let mut worst = 0.0f64;
        for c in 0..e.len() {
            for r in 0..e.len() {
                worst = worst.max(math::fabs(e[r] as f64 - e[c] as f64) * m[(r, c)].norm());
            }
        }
        Ok(worst)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.blocks.iter().map(|b| b.unitary.isometry_defect()).fold(0.0, f64::max)
    }
}

/// Independent Haar block on every shell of the full product space, drawn from stream 0
/// of `seed`.
pub fn random_energy_conserving_unitary(model: &CompositeModel, seed: u64) -> Result<BlockUnitary> {
    sample_block_unitary(model, &full_space_shells(model)?, seed, 0)
}

fn sample_block_unitary(
    _model: &CompositeModel,
    shells: &[(u64, Vec<ProductState>)],
    seed: u64,
    index: u64,
) -> Result<BlockUnitary> {
    let mut rng = sample_rng(seed, index);
    let blocks = shells
        .iter()
        .map(|(energy, basis)| UnitaryBlock { energy: *energy, basis: basis.clone(), unitary: haar_unitary(basis.len(), &mut rng) })
        .collect();
    Ok(BlockUnitary { blocks })
}

/// Initial states for the free-energy bound check.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplerOptions {
    /// Initial bath populations; thermal when absent.
    pub bath_state: Option<DiagonalState>,
    /// Initial weight populations; ground level when absent.
    pub weight_state: Option<DiagonalState>,
    /// Accept a non-thermal initial bath, for which the bound need not hold.
    pub allow_non_thermal_bath: bool,
}

/// Marginals and free energies of the global state, needed for one statistic.
struct Marginals {
    f_system: f64,
    f_weight: f64,
    bath: Option<DensityMatrix>,
}

struct Setup {
    shells: Vec<(u64, Vec<ProductState>)>,
    /// Initial eigenvalue of every basis state, per shell.
    eigen: Vec<Vec<f64>>,
    bath_offset: Vec<(u64, usize)>,
    bath_dim: usize,
    thermal_bath: DiagonalState,
    initial: Marginals,
}

impl Setup {
    fn new(model: &CompositeModel, opts: &SamplerOptions) -> Result<Self> {
        let bath = model.concrete_bath()?;
        let thermal_bath = model::thermal_state(bath.spectrum(), model.ctx())?;
        let bath_pops = match &opts.bath_state {
            Some(b) => {
                b.check_against(bath.spectrum())?;
                let dist = model::trace_distance_diag(b, &thermal_bath)?;
                if dist > 1e-12 && !opts.allow_non_thermal_bath {
                    return Err(contract!(
                        "initial bath is not thermal (trace distance {dist:e}); the bound assumes a thermal bath. \
                         Set the override to sample anyway"
                    ));
                }
                b.clone()
            }
            None => thermal_bath.clone(),
        };
        let weight_levels = model.weight_spectrum();
        let weight_pops = match &opts.weight_state {
            Some(w) => {
                w.check_against(&weight_levels)?;
                w.clone()
            }
            None => DiagonalState::pure(&weight_levels, 0)?,
        };
        let mut bath_offset = Vec::new();
        let mut off = 0usize;
        for l in bath.spectrum().levels() {
            bath_offset.push((l.energy, off));
            off += l.multiplicity as usize;
        }
        let bath_index = |e: u64, f: u64| bath_offset.iter().find(|x| x.0 == e).map(|x| x.1).unwrap_or(0) + f as usize;
        let weight_slot = |w: u64| model.weight().energies().position(|x| x == w).expect("weight level on ladder");
        let shells = full_space_shells(model)?;
        let eigen: Vec<Vec<f64>> = shells
            .iter()
            .map(|(_, basis)| {
                basis
                    .iter()
                    .map(|s| {
                        model.state().populations()[s.system]
                            * bath_pops.populations()[bath_index(s.bath_energy, s.bath_index)]
                            * weight_pops.populations()[weight_slot(s.weight)]
                    })
                    .collect()
            })
            .collect();
        let mut setup = Setup {
            shells,
            eigen,
            bath_offset,
            bath_dim: off,
            thermal_bath,
            initial: Marginals { f_system: 0.0, f_weight: 0.0, bath: None },
        };
        let id: Vec<CMatrix> = setup.shells.iter().map(|(_, b)| CMatrix::identity(b.len())).collect();
        setup.initial = setup.marginals(model, &id, false)?;
        Ok(setup)
    }

    fn bath_index(&self, e: u64, f: u64) -> usize {
        self.bath_offset.iter().find(|x| x.0 == e).map(|x| x.1).unwrap_or(0) + f as usize
    }

    fn marginals(&self, model: &CompositeModel, unitaries: &[CMatrix], with_bath: bool) -> Result<Marginals> {
        let n_sys = model.system().dimension();
        let weights: Vec<u64> = model.weight().energies().collect();
        let mut rho_s = CMatrix::zeros(n_sys, n_sys);
        let mut sigma_w = vec![0.0; weights.len()];
        let mut rho_b = if with_bath { Some(CMatrix::zeros(self.bath_dim, self.bath_dim)) } else { None };
        for (((_, basis), eig), u) in self.shells.iter().zip(&self.eigen).zip(unitaries) {
            let rho = u.congruence_diag(eig);
            for (a, sa) in basis.iter().enumerate() {
                let wa = weights.iter().position(|&x| x == sa.weight).expect("ladder level");
                sigma_w[wa] += rho[(a, a)].re;
                for (b, sb) in basis.iter().enumerate() {
                    if sa.weight != sb.weight {
                        continue;
                    }
                    if sa.bath_energy == sb.bath_energy && sa.bath_index == sb.bath_index {
                        rho_s[(sa.system, sb.system)] += rho[(a, b)];
                    }
                    if let Some(rb) = rho_b.as_mut() {
                        if sa.system == sb.system {
                            let ia = self.bath_index(sa.bath_energy, sa.bath_index);
                            let ib = self.bath_index(sb.bath_energy, sb.bath_index);
                            rb[(ia, ib)] += rho[(a, b)];
                        }
                    }
                }
            }
        }
        let rho_s = DensityMatrix::new_unchecked(rho_s);
        let total: f64 = sigma_w.iter().sum();
        sigma_w.iter_mut().for_each(|x| *x = x.max(0.0) / total);
        let sigma_w = DiagonalState::from_populations(sigma_w)?;
        Ok(Marginals {
            f_system: rho_s.free_energy(model.system(), model.ctx())?,
            f_weight: model::free_energy(&sigma_w, &model.weight_spectrum(), model.ctx())?,
            bath: rho_b.map(DensityMatrix::new_unchecked),
        })
    }
}

/// `⟨w⟩ + ΔF_S` for one global unitary; the bound states it is never positive.
pub fn second_law_statistic(model: &CompositeModel, unitary: &BlockUnitary, opts: &SamplerOptions) -> Result<f64> {
    let setup = Setup::new(model, opts)?;
    let us: Vec<CMatrix> = unitary.blocks.iter().map(|b| b.unitary.clone()).collect();
    if us.len() != setup.shells.len() {
        return Err(contract!("unitary has {} blocks, model has {} shells", us.len(), setup.shells.len()));
    }
    let fin = setup.marginals(model, &us, false)?;
    Ok((fin.f_weight - setup.initial.f_weight) + (fin.f_system - setup.initial.f_system))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SecondLawReport {
    pub n_samples: usize,
    pub seed: u64,
    /// `max (⟨w⟩ + ΔF_S)` over samples.
    pub max_statistic: f64,
    pub argmax_sample: usize,
    /// Samples with statistic ≥ −1e-6.
    pub saturating_samples: usize,
    /// Largest trace distance between the final bath marginal and the thermal bath over
    /// saturating samples.
    pub max_bath_distance_at_saturation: Option<f64>,
    /// Every saturating sample left the bath within 1e-3 of thermal.
    pub equality_diagnostics_ok: bool,
}

/// Applies `n_samples` random energy-conserving unitaries (sample `i` from stream `i`).
pub fn second_law_sampler(
    model: &CompositeModel,
    n_samples: usize,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<SecondLawReport> {
    let setup = Setup::new(model, opts)?;
    let thermal_bath = DensityMatrix::from_diagonal(&setup.thermal_bath);
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    let mut saturating = 0;
    let mut worst_bath: Option<f64> = None;
    for i in 0..n_samples {
        let mut rng = sample_rng(seed, i as u64);
        let us: Vec<CMatrix> = setup.shells.iter().map(|(_, b)| haar_unitary(b.len(), &mut rng)).collect();
        let fin = setup.marginals(model, &us, false)?;
        let stat = (fin.f_weight - setup.initial.f_weight) + (fin.f_system - setup.initial.f_system);
        if stat > best {
            best = stat;
            arg = i;
        }
        if stat >= -1e-6 {
            saturating += 1;
            let with_bath = setup.marginals(model, &us, true)?;
            let dist = with_bath.bath.expect("bath marginal requested").trace_distance(&thermal_bath)?;
            worst_bath = Some(worst_bath.map_or(dist, |d: f64| d.max(dist)));
        }
    }
    Ok(SecondLawReport {
        n_samples,
        seed,
        max_statistic: best,
        argmax_sample: arg,
        saturating_samples: saturating,
        max_bath_distance_at_saturation: worst_bath,
        equality_diagnostics_ok: worst_bath.is_none_or(|d| d <= 1e-3),
    })
}
