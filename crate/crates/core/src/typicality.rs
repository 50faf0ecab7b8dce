//! Haar-random shell unitaries, full simulation of the extraction map and the Monte
//! Carlo statistics of the final reduced states.
//!
//! Only shells inside the enforced window are simulated; the initial state is conditioned
//! on the window (each shell keeps its relative population). In every shell the retained
//! eigenvectors of the initial state are sent by a Haar-random isometry into the
//! subspace with the weight at level `w`. For `w > 0` the discarded eigenvectors keep
//! the weight at its ground level; for `w = 0` the isometry acts on every populated state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::extraction;
use crate::linalg::{orthonormalize_columns, CMatrix, C64};
use crate::math::{self, xlogx, KahanSum};
use crate::model::{self, DiagonalState, LevelState};
use crate::shells::{self, check_weight_window, CompositeModel, ProductState};

/// Minimum sample count accepted by [`typicality_experiment`].
pub const MIN_SAMPLES: usize = 100;

/// Generator for sample `index` of a run seeded with `master`: independent streams, so
/// results do not depend on the order in which samples are drawn.
pub fn sample_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

fn gaussian<R: RngCore>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// First `cols` columns of a Haar unitary on `C^rows`.
///
/// Standard complex Gaussian entries are orthonormalized column by column; the positive
/// diagonal of the implied triangular factor makes the decomposition unique, which is what
/// makes the result invariant under left multiplication by any fixed unitary.
pub fn haar_isometry<R: RngCore>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    assert!(cols <= rows && rows >= 1, "isometry shape {rows}x{cols}");
    loop {
        let data = (0..rows * cols).map(|_| gaussian(rng)).collect();
        let mut m = CMatrix::from_columns(rows, cols, data);
        // Rank deficiency has probability zero; redraw if rounding ever produces it.
        if orthonormalize_columns(&mut m) {
            return m;
        }
    }
}

pub fn haar_unitary<R: RngCore>(dim: usize, rng: &mut R) -> CMatrix {
    haar_isometry(dim, dim, rng)
}

/// Haar unitary drawn from stream 0 of `seed`.
pub fn haar_unitary_seeded(dim: usize, seed: u64) -> CMatrix {
    haar_unitary(dim, &mut sample_rng(seed, 0))
}

/// Subspaces of one shell used by an extraction map.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellLayout {
    pub energy: u64,
    /// Initial population `P^E` (unconditioned).
    pub population: f64,
    pub basis: Vec<ProductState>,
    /// Retained eigenvectors: basis index and eigenvalue (unconditioned).
    pub initial: Vec<(usize, f64)>,
    /// Populated eigenvectors outside the retained subspace.
    pub excluded: Vec<(usize, f64)>,
    /// Basis indices spanning the final subspace (weight at `w`).
    pub target: Vec<usize>,
}

impl ShellLayout {
    pub fn d_ini(&self) -> usize {
        self.initial.len()
    }

    pub fn d_fin(&self) -> usize {
        self.target.len()
    }
}

/// Deterministic part of a plan: the subspaces of every window shell.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanLayout {
    pub epsilon: f64,
    pub w: u64,
    pub window_mass: f64,
    pub shells: Vec<ShellLayout>,
}

/// A layout together with one sampled isometry per shell (`d_fin × d_ini`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShellUnitaryPlan {
    pub layout: PlanLayout,
    pub isometries: Vec<CMatrix>,
}

impl ShellUnitaryPlan {
    /// Largest deviation from column orthonormality over all shells.
    pub fn isometry_defect(&self) -> f64 {
        self.isometries.iter().map(CMatrix::isometry_defect).fold(0.0, f64::max)
    }
}

/// Selects retained and final subspaces per window shell.
///
/// Fails with a dimension error naming the first shell whose final subspace is smaller
/// than the retained one, and with a size error when an isometry would exceed the caps.
pub fn plan_layout(model: &CompositeModel, epsilon: f64, w: u64) -> Result<PlanLayout> {
    check_weight_window(&model.weight(), w, w)?;
    let caps = model.caps();
    let mut shells_out = Vec::new();
    let mut mass = KahanSum::default();
    for e in model.window_shells()? {
        let table = shells::initial_blocks(model, e)?;
        let cut = extraction::epsilon_cut(&table, epsilon)?;
        let basis = shells::shell_basis(model, e)?;
        let mut keep = vec![0u64; model.system().dimension()];
        for entry in &cut.h_map.entries {
            if let extraction::Inclusion::Rational { num, .. } = entry.h {
                keep[entry.position] = num as u64;
            }
        }
        let mut eigen = vec![0.0; model.system().dimension()];
        for b in &table.blocks {
            eigen[b.position] = b.value;
        }
        let mut initial = Vec::new();
        let mut excluded = Vec::new();
        let mut target = Vec::new();
        for (i, st) in basis.iter().enumerate() {
            if st.weight == w {
                target.push(i);
            }
            if st.weight == 0 && eigen[st.system] > 0.0 {
                if w == 0 || st.bath_index < keep[st.system] {
                    initial.push((i, eigen[st.system]));
                } else {
                    excluded.push((i, eigen[st.system]));
                }
            }
        }
        if target.len() < initial.len() {
            return Err(Error::Dimension(format!(
                "shell E={e}: final subspace at w={w} has dimension {}, retained initial subspace needs {}",
                target.len(),
                initial.len()
            )));
        }
        if target.len() * initial.len() > caps.matrix_entries {
            return Err(Error::Size(format!(
                "shell E={e}: isometry {}x{} exceeds the cap of {} entries",
                target.len(),
                initial.len(),
                caps.matrix_entries
            )));
        }
        mass.add(table.population);
        shells_out.push(ShellLayout { energy: e, population: table.population, basis, initial, excluded, target });
    }
    Ok(PlanLayout { epsilon, w, window_mass: mass.value(), shells: shells_out })
}

/// Draws one isometry per shell from `rng`, in shell order.
pub fn sample_plan<R: RngCore>(layout: &PlanLayout, rng: &mut R) -> ShellUnitaryPlan {
    let isometries = layout.shells.iter().map(|s| haar_isometry(s.d_fin(), s.d_ini(), rng)).collect();
    ShellUnitaryPlan { layout: layout.clone(), isometries }
}

/// Layout plus isometries drawn from stream 0 of `seed`.
pub fn build_plan(model: &CompositeModel, epsilon: f64, w: u64, seed: u64) -> Result<ShellUnitaryPlan> {
    let layout = plan_layout(model, epsilon, w)?;
    Ok(sample_plan(&layout, &mut sample_rng(seed, 0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShellOutcome {
    pub energy: u64,
    /// Conditioned probability of the shell.
    pub probability: f64,
    /// Probability of finding the weight at `w` within the shell (conditioned).
    pub success_mass: f64,
    /// Final state on the target subspace, normalized to unit trace.
    pub final_state: DensityMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppliedPlan {
    pub window_mass: f64,
    pub shells: Vec<ShellOutcome>,
    /// Reduced final system state.
    pub sigma_s: DensityMatrix,
    /// Final weight populations over the ladder.
    pub sigma_w: DiagonalState,
    pub entropy_initial: f64,
    pub entropy_final: f64,
}

/// Applies the plan to the window-conditioned initial state.
pub fn apply_plan(model: &CompositeModel, plan: &ShellUnitaryPlan) -> Result<AppliedPlan> {
    let layout = &plan.layout;
    let n_sys = model.system().dimension();
    let weights: Vec<u64> = model.weight().energies().collect();
    let norm = layout.window_mass;
    let mut sigma_s = CMatrix::zeros(n_sys, n_sys);
    let mut sigma_w = vec![0.0; weights.len()];
    let mut s_ini = KahanSum::default();
    let mut s_fin = KahanSum::default();
    let mut outcomes = Vec::with_capacity(layout.shells.len());
    let w_slot = weights.iter().position(|&x| x == layout.w).expect("w on the ladder");
    for (shell, u) in layout.shells.iter().zip(&plan.isometries) {
        let d_fin = shell.d_fin();
        if d_fin * d_fin > model.caps().matrix_entries {
            return Err(Error::Size(format!(
                "shell E={}: final state {d_fin}x{d_fin} exceeds the cap of {} entries",
                shell.energy,
                model.caps().matrix_entries
            )));
        }
        let p: Vec<f64> = shell.initial.iter().map(|&(_, v)| v / norm).collect();
        for x in p.iter().copied().chain(shell.excluded.iter().map(|&(_, v)| v / norm)) {
            s_ini.add(-xlogx(x));
        }
        let rho = u.congruence_diag(&p);
        // Nonzero spectrum of U·diag(p)·U† equals that of diag(√p)·U†U·diag(√p).
        let mut gram = u.adjoint().matmul(u);
        for c in 0..p.len() {
            for r in 0..p.len() {
                gram[(r, c)] *= math::sqrt(p[r] * p[c]);
            }
        }
        for ev in crate::linalg::hermitian_eigenvalues(&gram) {
            if ev > crate::density::EIGENVALUE_FLOOR {
                s_fin.add(-xlogx(ev));
            }
        }
        for &(_, v) in &shell.excluded {
            let x = v / norm;
            s_fin.add(-xlogx(x));
        }
        for (a, &ia) in shell.target.iter().enumerate() {
            let sa = shell.basis[ia];
            for (b, &ib) in shell.target.iter().enumerate() {
                let sb = shell.basis[ib];
                if sa.bath_energy == sb.bath_energy && sa.bath_index == sb.bath_index {
                    sigma_s[(sa.system, sb.system)] += rho[(a, b)];
                }
            }
        }
        let success = rho.trace().re;
        sigma_w[w_slot] += success;
        let mut shell_prob = success;
        for &(i, v) in &shell.excluded {
            let x = v / norm;
            sigma_s[(shell.basis[i].system, shell.basis[i].system)] += C64::new(x, 0.0);
            sigma_w[0] += x;
            shell_prob += x;
        }
        let mut normalized = rho;
        if success > 0.0 {
            for c in 0..d_fin {
                for r in 0..d_fin {
                    normalized[(r, c)] /= success;
                }
            }
        }
        outcomes.push(ShellOutcome {
            energy: shell.energy,
            probability: shell_prob,
            success_mass: success,
            final_state: DensityMatrix::new_unchecked(normalized),
        });
    }
    Ok(AppliedPlan {
        window_mass: norm,
        shells: outcomes,
        sigma_s: DensityMatrix::new_unchecked(sigma_s),
        sigma_w: DiagonalState::from_populations(sigma_w)?,
        entropy_initial: s_ini.value(),
        entropy_final: s_fin.value(),
    })
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        math::sqrt(self.variance())
    }

    pub fn standard_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            math::sqrt(self.variance() / self.n as f64)
        }
    }
}

/// Statistics of `P_fin(E, E_S, g)`, the probability of shell `E`, weight `w` and system
/// basis state `(E_S, g)` after the map.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FinalPopulationStats {
    pub shell_energy: u64,
    pub level: LevelState,
    /// `M_B(E − E_S − w)`.
    pub bath_multiplicity: u128,
    pub mean: f64,
    pub std: f64,
    pub relative_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GibbsComparison {
    pub level: LevelState,
    pub mean: f64,
    pub standard_error: f64,
    pub gibbs: f64,
    /// `|mean − gibbs| / standard_error` (0 when both vanish).
    pub deviation_in_standard_errors: f64,
}

/// RMS magnitude of the coherences of `σ_S` generated in one shell between degenerate
/// states of one system level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoherenceStats {
    pub shell_energy: u64,
    pub level_energy: u64,
    pub bath_multiplicity: u128,
    pub rms: f64,
    /// `rms` divided by the mean final population of one state of the level in the shell.
    pub relative_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
}

/// Least-squares fit of `y = c·x^a` in log-log space. Needs two distinct `x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<PowerLawFit> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|&(x, y)| (math::log(x), math::log(y))).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some(PowerLawFit { exponent: a, prefactor: math::exp(my - a * mx) })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TypicalityReport {
    pub epsilon: f64,
    pub w: u64,
    pub n_samples: usize,
    pub seed: u64,
    pub window_mass: f64,
    pub final_populations: Vec<FinalPopulationStats>,
    pub sigma_s: Vec<GibbsComparison>,
    pub coherences: Vec<CoherenceStats>,
    /// Fit of relative std against `M_B(E − E_S − w)` when several multiplicities occur.
    pub relative_std_fit: Option<PowerLawFit>,
}

/// Samples `n_samples` independent plans and collects the final-state statistics.
pub fn typicality_experiment(
    model: &CompositeModel,
    epsilon: f64,
    w: u64,
    n_samples: usize,
    seed: u64,
) -> Result<TypicalityReport> {
    if n_samples < MIN_SAMPLES {
        return Err(crate::error::contract!("typicality needs at least {MIN_SAMPLES} samples, got {n_samples}"));
    }
    let layout = plan_layout(model, epsilon, w)?;
    let system = model.system();
    let n_sys = system.dimension();
    let levels: Vec<LevelState> = system.basis().collect();
    let bath = model.concrete_bath()?;
    let norm = layout.window_mass;

    // Per shell: for each target row its system position, and the groups of target rows
    // sharing a bath state (the only pairs that feed coherences of σ_S).
    struct ShellIndex {
        rows_system: Vec<usize>,
        pairs: Vec<(usize, usize, usize)>,
        p: Vec<f64>,
        excluded_diag: Vec<f64>,
    }
    let mut index = Vec::with_capacity(layout.shells.len());
    for shell in &layout.shells {
        let rows_system: Vec<usize> = shell.target.iter().map(|&i| shell.basis[i].system).collect();
        let mut pairs = Vec::new();
        for (a, &ia) in shell.target.iter().enumerate() {
            for (b, &ib) in shell.target.iter().enumerate().skip(a + 1) {
                let (sa, sb) = (shell.basis[ia], shell.basis[ib]);
                if sa.bath_energy == sb.bath_energy && sa.bath_index == sb.bath_index {
                    pairs.push((a, b, sa.system));
                }
            }
        }
        let mut excluded_diag = vec![0.0; n_sys];
        for &(i, v) in &shell.excluded {
            excluded_diag[shell.basis[i].system] += v / norm;
        }
        let p = shell.initial.iter().map(|&(_, v)| v / norm).collect();
        index.push(ShellIndex { rows_system, pairs, p, excluded_diag });
    }

    let mut pop_stats = vec![vec![Moments::default(); n_sys]; layout.shells.len()];
    let mut sigma_stats = vec![Moments::default(); n_sys];
    // Sum of |coherence|² and number of terms per (shell, level index).
    let n_levels = system.levels().len();
    let mut coh = vec![vec![(0.0f64, 0u64); n_levels]; layout.shells.len()];
    let level_of: Vec<usize> = levels
        .iter()
        .map(|l| system.levels().iter().position(|x| x.energy == l.energy).expect("level exists"))
        .collect();

    for sample in 0..n_samples {
        let mut rng = sample_rng(seed, sample as u64);
        let mut sigma_diag = vec![0.0; n_sys];
        for (k, (shell, ix)) in layout.shells.iter().zip(&index).enumerate() {
            let u = haar_isometry(shell.d_fin(), shell.d_ini(), &mut rng);
            let mut pops = vec![0.0; n_sys];
            for (j, &pj) in ix.p.iter().enumerate() {
                for (a, z) in u.column(j).iter().enumerate() {
                    pops[ix.rows_system[a]] += pj * z.norm_sqr();
                }
            }
            for s in 0..n_sys {
                pop_stats[k][s].push(pops[s]);
                sigma_diag[s] += pops[s] + ix.excluded_diag[s];
            }
            for &(a, b, sa) in &ix.pairs {
                let mut o = C64::new(0.0, 0.0);
                for (j, &pj) in ix.p.iter().enumerate() {
                    let col = u.column(j);
                    o += col[a] * col[b].conj() * pj;
                }
                let slot = &mut coh[k][level_of[sa]];
                slot.0 += o.norm_sqr();
                slot.1 += 1;
            }
        }
        for s in 0..n_sys {
            sigma_stats[s].push(sigma_diag[s]);
        }
    }

    let mut final_populations = Vec::new();
    let mut points = Vec::new();
    for (k, shell) in layout.shells.iter().enumerate() {
        for (s, level) in levels.iter().enumerate() {
            let m = bath.multiplicity(shell.energy as i128 - level.energy as i128 - w as i128);
            let st = pop_stats[k][s];
            let rel = if st.mean() > 0.0 { st.std() / st.mean() } else { 0.0 };
            if m > 0 && st.mean() > 0.0 {
                points.push((m as f64, rel));
            }
            final_populations.push(FinalPopulationStats {
                shell_energy: shell.energy,
                level: *level,
                bath_multiplicity: m,
                mean: st.mean(),
                std: st.std(),
                relative_std: rel,
            });
        }
    }
    let gibbs = model::thermal_state(system, model.ctx())?;
    let sigma_s = levels
        .iter()
        .enumerate()
        .map(|(s, level)| {
            let st = sigma_stats[s];
            let g = gibbs.populations()[s];
            let diff = math::fabs(st.mean() - g);
            let se = st.standard_error();
            GibbsComparison {
                level: *level,
                mean: st.mean(),
                standard_error: se,
                gibbs: g,
                deviation_in_standard_errors: if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY },
            }
        })
        .collect();
    let mut coherences = Vec::new();
    for (k, shell) in layout.shells.iter().enumerate() {
        for (li, l) in system.levels().iter().enumerate() {
            let (sum, n) = coh[k][li];
            if n == 0 {
                continue;
            }
            let rms = math::sqrt(sum / n as f64);
            let first = levels.iter().position(|x| x.energy == l.energy).expect("level exists");
            let mean_pop = pop_stats[k][first].mean();
            coherences.push(CoherenceStats {
                shell_energy: shell.energy,
                level_energy: l.energy,
                bath_multiplicity: bath.multiplicity(shell.energy as i128 - l.energy as i128 - w as i128),
                rms,
                relative_rms: if mean_pop > 0.0 { rms / mean_pop } else { 0.0 },
            });
        }
    }
    Ok(TypicalityReport {
        epsilon,
        w,
        n_samples,
        seed,
        window_mass: norm,
        final_populations,
        sigma_s,
        coherences,
        relative_std_fit: fit_power_law(&points),
    })
}

/// Sample moments of `s = Σ_{n<m} ⟨n|VAV†|n⟩` and `o = ⟨0|VAV†|1⟩` over Haar `V`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentCheck {
    pub dim: usize,
    pub m: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub mean_standard_error: f64,
    /// `m·tr[A]/d`.
    pub expected_mean: f64,
    pub variance: f64,
    /// `m(1−m/d)·tr[A]²/(d(d+1))`, exact for rank-one `A` with unit trace.
    pub variance_formula: f64,
    /// `m(1−m/d)·(tr[A²] − tr[A]²/d)/(d²−1)`, the exact second moment for any Hermitian `A`.
    pub variance_exact: f64,
    pub offdiag_second_moment: f64,
    /// `(d·tr[A²] − tr[A]²)/(d(d²−1))`; equals `1/(d(d+1))` for rank-one `A` with unit trace.
    pub offdiag_expected: f64,
}

/// Compares Haar sample moments against their closed forms. `a` must be Hermitian.
pub fn haar_moment_check(a: &CMatrix, m: usize, n_samples: usize, seed: u64) -> Result<MomentCheck> {
    let d = a.rows();
    if a.cols() != d || d < 2 {
        return Err(crate::error::contract!("operator must be square with dimension at least 2"));
    }
    if m == 0 || m > d {
        return Err(crate::error::contract!("need 1 <= m <= {d}, got {m}"));
    }
    if a.hermiticity_defect() > 1e-12 {
        return Err(crate::error::contract!("operator is not Hermitian"));
    }
    let mut s_stats = Moments::default();
    let mut o2 = KahanSum::default();
    for sample in 0..n_samples {
        let v = haar_unitary(d, &mut sample_rng(seed, sample as u64));
        let va = v.matmul(a);
        let entry = |r: usize, c: usize| -> C64 {
            let mut z = C64::new(0.0, 0.0);
            for k in 0..d {
                z += va[(r, k)] * v[(c, k)].conj();
            }
            z
        };
        let mut s = 0.0;
        for n in 0..m {
            s += entry(n, n).re;
        }
        s_stats.push(s);
        o2.add(entry(0, 1).norm_sqr());
    }
    let tr = a.trace().re;
    let tr2 = a.matmul(a).trace().re;
    let (df, mf) = (d as f64, m as f64);
    let spread = mf * (1.0 - mf / df);
    Ok(MomentCheck {
        dim: d,
        m,
        n_samples,
        mean: s_stats.mean(),
        mean_standard_error: s_stats.standard_error(),
        expected_mean: mf * tr / df,
        variance: s_stats.variance(),
        variance_formula: spread * tr * tr / (df * (df + 1.0)),
        variance_exact: spread * (tr2 - tr * tr / df) / (df * df - 1.0),
        offdiag_second_moment: o2.value() / n_samples as f64,
        offdiag_expected: (df * tr2 - tr * tr) / (df * (df * df - 1.0)),
    })
}
