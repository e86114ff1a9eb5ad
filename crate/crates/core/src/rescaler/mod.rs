//! Rescaling a PSD factorization by a congruence pair `(AUA, A⁻¹VA⁻¹)` so
//! that both sides have operator norm at most about `√(dΔ)`, where `d` is
//! the dimension of the common image space and `Δ` the largest slack.
//!
//! The search works on the reduced factorization (sides restricted to the
//! common space), keeps the sides balanced by a scalar, and takes
//! monotone line-search steps along John-ellipsoid directions built from
//! the top eigenspaces of the row factors.

mod john;

pub use john::{john_decompose, JohnDecomposition, MVEE_MAX_ITERS, MVEE_TOL, WEIGHT_FLOOR};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::SlackMatrix;
use crate::psdfact::{potential, verify_factorization, PsdFactorization};
use crate::symcore::{self, eigh, SpectralDecomposition, Subspace, SymMatrix};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RescaleConfig {
    /// Target slack: stop once `lmax ≤ √(dΔ)·(1 + tol)`.
    pub tol: f64,
    pub max_iters: usize,
    /// Step sizes as multiples of `1/‖Z‖`.
    pub eps_grid: Vec<f64>,
    /// Random unit vectors drawn from each top eigenspace of dimension ≥ 2.
    pub sphere_samples: usize,
    pub rank_tol: f64,
    /// Row factors within this relative distance of the top norm are active.
    pub mu_tol: f64,
    /// Wider activity thresholds tried alongside `mu_tol`; the best step wins.
    pub active_widening: Vec<f64>,
    /// Minimum relative decrease of the potential for a step to count.
    pub min_decrease: f64,
    /// Tolerance for the input factorization check.
    pub verify_tol: f64,
    /// Hard ceiling on the condition number of the transform.
    pub condition_cap: f64,
    pub seed: u64,
}

/// `2⁻²⁰, 2⁻¹⁹, …, 2⁻¹`.
pub fn default_eps_grid() -> Vec<f64> {
    (1..=20).rev().map(|e| 2f64.powi(-e)).collect()
}

impl Default for RescaleConfig {
    fn default() -> Self {
        Self {
            tol: 0.05,
            max_iters: 500,
            eps_grid: default_eps_grid(),
            sphere_samples: 64,
            rank_tol: symcore::DEFAULT_RANK_TOL,
            mu_tol: 1e-6,
            active_widening: vec![1e-4, 1e-3, 1e-2, 5e-2],
            min_decrease: 1e-12,
            verify_tol: 1e-6,
            condition_cap: 1e12,
            seed: 7,
        }
    }
}

impl RescaleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Invalid("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Invalid("max_iters must be at least 1".into()));
        }
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::Invalid("eps grid must be nonempty and positive".into()));
        }
        if !(self.mu_tol >= 0.0 && self.mu_tol < 1.0) {
            return Err(Error::Invalid("mu_tol must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// A factorization restricted to the common image space `W` of its means.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub subspace: Subspace,
    /// `(OᵀUᵢO, OᵀVʲO)`; `None` when `W = {0}`.
    pub reduced: Option<PsdFactorization>,
}

impl Reduction {
    pub fn dim(&self) -> usize {
        self.subspace.dim()
    }
}

/// Restricts to `W = P_{Im Ū}(Im V̄)`, on which both reduced means are
/// nonsingular. The reduced factorization has the same products.
pub fn reduce_to_common_space(f: &PsdFactorization, rank_tol: f64) -> Result<Reduction> {
    let mean = |ms: &[SymMatrix]| {
        let mut acc = SymMatrix::zeros(f.side());
        for m in ms {
            acc = acc.add(m);
        }
        acc.scale(1.0 / ms.len() as f64)
    };
    let u_bar = mean(f.row_factors());
    let v_bar = mean(f.col_factors());
    let w1 = symcore::image_basis(&u_bar, rank_tol)?;
    let w2 = symcore::image_basis(&v_bar, rank_tol)?;
    let w = w1.project_subspace(&w2, rank_tol);
    if w.dim() == 0 {
        return Ok(Reduction {
            subspace: w,
            reduced: None,
        });
    }
    let o = w.basis();
    let restrict = |ms: &[SymMatrix]| ms.iter().map(|m| m.restrict(o)).collect::<Vec<_>>();
    let reduced = PsdFactorization::from_parts(
        w.dim(),
        restrict(f.row_factors()),
        restrict(f.col_factors()),
    );
    for (side, m) in [("row", &u_bar), ("column", &v_bar)] {
        let dec = eigh(&m.restrict(o));
        if dec.min() <= rank_tol * dec.max() {
            return Err(Error::Numeric(format!(
                "reduced {side} mean is singular (eigenvalues {:e}..{:e})",
                dec.min(),
                dec.max()
            )));
        }
    }
    Ok(Reduction {
        subspace: w,
        reduced: Some(reduced),
    })
}

/// The factor `s²` with `lmax(s²U) = lmax(V/s²)`.
fn balance_multiplier(f: &PsdFactorization) -> Result<f64> {
    let (lu, lv) = (f.lmax_u(), f.lmax_v());
    match (lu > 0.0, lv > 0.0) {
        (true, true) => Ok((lv / lu).sqrt()),
        (false, false) => Ok(1.0),
        _ => Err(Error::Inconsistent(format!(
            "one side vanishes (lmax_U = {lu:e}, lmax_V = {lv:e}); no scalar balances it"
        ))),
    }
}

/// Scales `U` by `s²` and `V` by `s⁻²` so both sides have norm `√Φ`.
pub fn balance_scalar(f: &PsdFactorization) -> Result<PsdFactorization> {
    Ok(f.scaled(balance_multiplier(f)?))
}

#[derive(Clone, Debug)]
pub struct Direction {
    /// `Z = Σ p(z) zzᵀ`.
    pub z: SymMatrix,
    pub john: JohnDecomposition,
    /// Row factors whose norm is within the activity threshold of the top.
    pub active: Vec<usize>,
    pub mu: f64,
}

/// Descent direction for the row side: the John decomposition of the
/// symmetric hull of unit vectors from the top eigenspaces of the active
/// row factors. Spaces of dimension ≥ 2 contribute their eigenbasis plus
/// `samples` random unit vectors.
pub fn perturbation_direction(
    f: &PsdFactorization,
    mu_tol: f64,
    samples: usize,
    seed: u64,
) -> Result<Direction> {
    let mu = f.lmax_u();
    if !(mu > 0.0) {
        return Err(Error::Inconsistent("row factors are all zero".into()));
    }
    let threshold = mu * (1.0 - mu_tol);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut active = Vec::new();
    for (i, u) in f.row_factors().iter().enumerate() {
        let dec = eigh(u);
        if dec.max() < threshold {
            continue;
        }
        active.push(i);
        let q = dec.eigenvalues.iter().take_while(|&&l| l >= threshold).count();
        let basis = dec.eigenvectors.columns(0, q);
        for k in 0..q {
            points.push(basis.column(k).into_owned());
        }
        if q >= 2 {
            for _ in 0..samples {
                let g = DVector::from_fn(q, |_, _| StandardNormal.sample(&mut rng));
                let g: DVector<f64> = g;
                let norm = g.norm();
                if norm > 0.0 {
                    points.push(basis * (g / norm));
                }
            }
        }
    }
    if active.is_empty() {
        return Err(Error::Inconsistent("no row factor attains the top norm".into()));
    }
    let john = john_decompose(&points, symcore::DEFAULT_RANK_TOL)?;
    Ok(Direction {
        z: john.moment(),
        john,
        active,
        mu,
    })
}

#[derive(Clone, Debug)]
pub struct DescentStep {
    /// Balanced factorization after the step.
    pub factorization: PsdFactorization,
    /// Accepted step, absolute (already divided by `‖Z‖`).
    pub eps: f64,
    pub phi_before: f64,
    pub phi_after: f64,
}

/// `(e^{−εZ}Ue^{−εZ}, e^{εZ}Ve^{εZ})` for the `ε` on the grid (multiples of
/// `1/‖Z‖`) with the smallest potential, ties to the smaller `ε`. Returns
/// `None` when no step lowers `Φ` by the relative margin `min_decrease`.
pub fn descent_step(
    f: &PsdFactorization,
    z: &SymMatrix,
    eps_grid: &[f64],
    min_decrease: f64,
) -> Result<Option<DescentStep>> {
    if z.side() != f.side() {
        return Err(Error::Dimension {
            context: "direction side",
            expected: f.side(),
            found: z.side(),
        });
    }
    if !symcore::is_psd(z, 1e-12) {
        return Err(Error::NotPsd {
            min_eigenvalue: symcore::min_eigenvalue(z),
        });
    }
    let zdec = eigh(z);
    let phi_before = potential(f);
    let Some((eps, _)) = line_search(f, &zdec, eps_grid, phi_before, min_decrease) else {
        return Ok(None);
    };
    let (e, e_inv) = exp_pair(&zdec, eps);
    let stepped = PsdFactorization::from_parts(
        f.side(),
        f.row_factors().iter().map(|u| u.sandwich(&e)).collect(),
        f.col_factors().iter().map(|v| v.sandwich(&e_inv)).collect(),
    );
    let factorization = balance_scalar(&stepped)?;
    let phi_after = potential(&factorization);
    Ok(Some(DescentStep {
        factorization,
        eps,
        phi_before,
        phi_after,
    }))
}

fn exp_pair(zdec: &SpectralDecomposition, eps: f64) -> (SymMatrix, SymMatrix) {
    (zdec.map(|l| (-eps * l).exp()), zdec.map(|l| (eps * l).exp()))
}

/// Best `(ε, Φ)` over the grid, or `None` without sufficient decrease.
fn line_search(
    f: &PsdFactorization,
    zdec: &SpectralDecomposition,
    eps_grid: &[f64],
    phi_before: f64,
    min_decrease: f64,
) -> Option<(f64, f64)> {
    let znorm = zdec.spectral_radius();
    if znorm == 0.0 {
        return None;
    }
    let eval = |&mult: &f64| {
        let eps = mult / znorm;
        let (e, e_inv) = exp_pair(zdec, eps);
        let lu = max_norm(f.row_factors().iter().map(|u| u.sandwich(&e)));
        let lv = max_norm(f.col_factors().iter().map(|v| v.sandwich(&e_inv)));
        (eps, lu * lv)
    };
    #[cfg(feature = "parallel")]
    let evals: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        eps_grid.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let evals: Vec<(f64, f64)> = eps_grid.iter().map(eval).collect();

    let limit = phi_before * (1.0 - min_decrease);
    evals
        .into_iter()
        .filter(|&(_, phi)| phi.is_finite() && phi < limit)
        .fold(None, |best: Option<(f64, f64)>, (eps, phi)| match best {
            Some((be, bp)) if bp < phi || (bp == phi && be <= eps) => Some((be, bp)),
            _ => Some((eps, phi)),
        })
}

fn max_norm(ms: impl Iterator<Item = SymMatrix>) -> f64 {
    ms.map(|m| symcore::operator_norm(&m)).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetMet,
    /// No step lowered the potential, even after doubling the samples.
    Stalled,
    MaxIters,
    /// The common space is `{0}`: the slack matrix vanishes.
    ZeroSpace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub phi: f64,
    pub lmax_u: f64,
    pub lmax_v: f64,
    /// Step taken to reach this point (0 for the start).
    pub eps: f64,
    /// Activity threshold whose direction won the line search.
    pub active_threshold: f64,
    pub active_rows: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JohnCheck {
    pub iteration: usize,
    pub k: usize,
    pub contact_points: usize,
    pub identity_residual: f64,
    pub boundary_residual: f64,
    pub weight_sum: f64,
    pub min_weight: f64,
}

impl JohnCheck {
    fn of(iteration: usize, j: &JohnDecomposition) -> Self {
        Self {
            iteration,
            k: j.k,
            contact_points: j.contact_points.len(),
            identity_residual: j.identity_residual(),
            boundary_residual: j.boundary_residual(),
            weight_sum: j.weight_sum(),
            min_weight: j.weights.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RescaleResult {
    /// Side of the input factorization.
    pub r: usize,
    /// Dimension of the common image space.
    pub d: usize,
    pub delta_eff: f64,
    /// `A = O Ã Oᵀ` on the input space.
    pub transform: SymMatrix,
    /// `A⁺ = O Ã⁻¹ Oᵀ`.
    pub pseudo_inverse: SymMatrix,
    /// `Ã` on the common space.
    pub reduced_transform: Option<SymMatrix>,
    /// Orthonormal basis `O` of the common space, one row per input coordinate.
    pub basis: Vec<Vec<f64>>,
    /// `(AUᵢA, A⁺VʲA⁺)`, side `r`.
    pub rescaled: PsdFactorization,
    /// `(ÃOᵀUᵢOÃ, Ã⁻¹OᵀVʲOÃ⁻¹)`, side `d`.
    pub reduced: Option<PsdFactorization>,
    pub lmax_u: f64,
    pub lmax_v: f64,
    pub potential: f64,
    /// `√(dΔ)·(1 + tol)`.
    pub target_lmax: f64,
    pub certificate: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    pub input_residual: f64,
    pub max_residual: f64,
    /// `max_residual ≤ input_residual + 1e-8·(1 + Δ)`.
    pub residual_preserved: bool,
    /// Smallest eigenvalue of the reduced means.
    pub sigma: f64,
    /// Potential of the reduced input.
    pub tau: f64,
    pub condition: f64,
    pub john_checks: Vec<JohnCheck>,
}

/// Rescales `f` towards `lmax ≤ √(dΔ)` on both sides, `Δ` the largest
/// entry of `s`.
pub fn rescale(f: &PsdFactorization, s: &SlackMatrix, cfg: &RescaleConfig) -> Result<RescaleResult> {
    cfg.validate()?;
    let input = verify_factorization(f, s, cfg.verify_tol)?;
    if !input.passed {
        return Err(Error::Precondition(format!(
            "factorization does not match the slack matrix: residual {:e} at {:?} exceeds {:e}",
            input.max_abs_residual, input.residual_location, input.threshold
        )));
    }
    let delta = s.delta_eff();
    let r = f.side();
    let reduction = reduce_to_common_space(f, cfg.rank_tol)?;
    let o = reduction.subspace.basis().clone();
    let d = reduction.dim();
    let basis = (0..r).map(|i| (0..d).map(|j| o[(i, j)]).collect()).collect();

    let Some(base) = reduction.reduced else {
        let lmax_u = f.lmax_u();
        let lmax_v = f.lmax_v();
        return Ok(RescaleResult {
            r,
            d: 0,
            delta_eff: delta,
            transform: SymMatrix::identity(r),
            pseudo_inverse: SymMatrix::identity(r),
            reduced_transform: None,
            basis,
            rescaled: f.clone(),
            reduced: None,
            lmax_u,
            lmax_v,
            potential: lmax_u * lmax_v,
            target_lmax: 0.0,
            certificate: lmax_u == 0.0 && lmax_v == 0.0,
            termination: Termination::ZeroSpace,
            iterations: 0,
            trajectory: Vec::new(),
            input_residual: input.max_abs_residual,
            max_residual: input.max_abs_residual,
            residual_preserved: true,
            sigma: 0.0,
            tau: input.potential,
            condition: 1.0,
            john_checks: Vec::new(),
        });
    };

    let tau = potential(&base);
    let sigma = reduced_sigma(&base);
    let condition_bound = (tau / (sigma * sigma)).min(cfg.condition_cap);
    let target_phi = d as f64 * delta * (1.0 + cfg.tol);

    let mut a = SymMatrix::identity(d).scale(balance_multiplier(&base)?.sqrt());
    let mut current = apply(&base, &a)?;
    let mut phi = potential(&current);
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        phi,
        lmax_u: current.lmax_u(),
        lmax_v: current.lmax_v(),
        eps: 0.0,
        active_threshold: 0.0,
        active_rows: 0,
    }];
    let mut john_checks = Vec::new();
    let mut samples = cfg.sphere_samples;
    let mut doubled = false;
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    let thresholds: Vec<f64> = std::iter::once(cfg.mu_tol)
        .chain(cfg.active_widening.iter().copied())
        .collect();

    while iterations < cfg.max_iters {
        if phi <= target_phi {
            termination = Termination::TargetMet;
            break;
        }
        let step_seed = cfg.seed ^ ((iterations as u64 + 1) << 20) ^ samples as u64;
        let mut best: Option<(f64, f64, f64, SymMatrix, usize)> = None;
        for &threshold in &thresholds {
            let dir = perturbation_direction(&current, threshold, samples, step_seed)?;
            john_checks.push(JohnCheck::of(iterations + 1, &dir.john));
            let zdec = eigh(&dir.z);
            if let Some((eps, cand_phi)) =
                line_search(&current, &zdec, &cfg.eps_grid, phi, cfg.min_decrease)
            {
                if best.as_ref().map_or(true, |b| cand_phi < b.1) {
                    best = Some((eps, cand_phi, threshold, dir.z.clone(), dir.active.len()));
                }
            }
        }
        let accepted = match best {
            Some((eps, _, threshold, z, active_rows)) => {
                let next_a = advance(&a, &z, eps)?;
                let next_a = next_a.scale(balance_multiplier(&apply(&base, &next_a)?)?.sqrt());
                let next = apply(&base, &next_a)?;
                let next_phi = potential(&next);
                if next_phi < phi * (1.0 - cfg.min_decrease) {
                    Some((next_a, next, next_phi, eps, threshold, active_rows))
                } else {
                    None
                }
            }
            None => None,
        };
        match accepted {
            Some((next_a, next, next_phi, eps, threshold, active_rows)) => {
                let condition = condition_number(&next_a);
                if condition > condition_bound * (1.0 + 1e-6) {
                    return Err(Error::ConditionBlowup {
                        condition,
                        bound: condition_bound,
                    });
                }
                a = next_a;
                current = next;
                phi = next_phi;
                iterations += 1;
                trajectory.push(TrajectoryPoint {
                    iteration: iterations,
                    phi,
                    lmax_u: current.lmax_u(),
                    lmax_v: current.lmax_v(),
                    eps,
                    active_threshold: threshold,
                    active_rows,
                });
            }
            None if !doubled => {
                doubled = true;
                samples = samples.max(1) * 2;
            }
            None => {
                termination = Termination::Stalled;
                break;
            }
        }
    }
    if termination == Termination::MaxIters && phi <= target_phi {
        termination = Termination::TargetMet;
    }

    let a_inv = inverse_psd(&a)?;
    let transform = SymMatrix::symmetrize(&o * a.as_matrix() * o.transpose());
    let pseudo_inverse = SymMatrix::symmetrize(&o * a_inv.as_matrix() * o.transpose());
    let lift = |m: &SymMatrix| m.congruence(&o);
    let rescaled = PsdFactorization::from_parts(
        r,
        current.row_factors().iter().map(lift).collect(),
        current.col_factors().iter().map(lift).collect(),
    );
    let check = verify_factorization(&rescaled, s, cfg.verify_tol)?;
    let target_lmax = (d as f64 * delta).sqrt() * (1.0 + cfg.tol);
    let certificate = check.lmax_u <= target_lmax && check.lmax_v <= target_lmax;
    Ok(RescaleResult {
        r,
        d,
        delta_eff: delta,
        transform,
        pseudo_inverse,
        reduced_transform: Some(a.clone()),
        basis,
        rescaled,
        reduced: Some(current),
        lmax_u: check.lmax_u,
        lmax_v: check.lmax_v,
        potential: check.potential,
        target_lmax,
        certificate,
        termination,
        iterations,
        trajectory,
        input_residual: input.max_abs_residual,
        max_residual: check.max_abs_residual,
        residual_preserved: check.max_abs_residual
            <= input.max_abs_residual + 1e-8 * (1.0 + delta),
        sigma,
        tau,
        condition: condition_number(&a),
        john_checks,
    })
}

fn reduced_sigma(f: &PsdFactorization) -> f64 {
    let mean_min = |ms: &[SymMatrix]| {
        let mut acc = SymMatrix::zeros(f.side());
        for m in ms {
            acc = acc.add(m);
        }
        symcore::min_eigenvalue(&acc.scale(1.0 / ms.len() as f64))
    };
    mean_min(f.row_factors()).min(mean_min(f.col_factors()))
}

/// `(AUA, A⁻¹VA⁻¹)`.
fn apply(base: &PsdFactorization, a: &SymMatrix) -> Result<PsdFactorization> {
    let a_inv = inverse_psd(a)?;
    Ok(PsdFactorization::from_parts(
        base.side(),
        base.row_factors().iter().map(|u| u.sandwich(a)).collect(),
        base.col_factors().iter().map(|v| v.sandwich(&a_inv)).collect(),
    ))
}

/// Polar PSD part of `e^{−εZ}A`: `(A e^{−2εZ} A)^{1/2}`.
fn advance(a: &SymMatrix, z: &SymMatrix, eps: f64) -> Result<SymMatrix> {
    let e2 = eigh(z).map(|l| (-2.0 * eps * l).exp());
    let product = e2.sandwich(a);
    let root = symcore::psd_sqrt(&product);
    if root.as_matrix().iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite transform".into()));
    }
    Ok(root)
}

fn inverse_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let dec = eigh(a);
    if !(dec.min() > 0.0) {
        return Err(Error::Numeric(format!(
            "transform lost definiteness (min eigenvalue {:e})",
            dec.min()
        )));
    }
    Ok(dec.map(|l| 1.0 / l))
}

fn condition_number(a: &SymMatrix) -> f64 {
    let dec = eigh(a);
    dec.max() / dec.min()
}
