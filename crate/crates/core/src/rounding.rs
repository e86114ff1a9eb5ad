//! Rounding a rescaled factorization onto a fine grid and recovering the
//! 0/1 points of the polytope from the rounded system
//! `|bᵢ − aᵢᵀx − ⟨Ūᵢ, Y⟩| ≤ 1/(4(n+r²))`, `Y ⪰ 0`, `‖Y‖ ≤ √(rΔ)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{cube_points, HPolytope};
use crate::psdfact::PsdFactorization;
use crate::symcore::{self, eigh, SymMatrix};

/// Largest dimension accepted by [`reconstruct`].
pub const MAX_RECONSTRUCT_DIM: usize = 20;
/// Largest `n` for which the worst-case `Δ = (n+1)^{(n+1)/2}` is offered.
pub const MAX_WORST_CASE_DIM: usize = 12;

/// `(16r³(n+r²))⁻¹`, the largest admissible grid parameter.
pub fn grid_delta(n: usize, r: usize) -> f64 {
    let (n, r) = (n as f64, r as f64);
    1.0 / (16.0 * r.powi(3) * (n + r * r))
}

/// `(n+1)^{(n+1)/2}` in floating point.
pub fn worst_case_delta(n: usize) -> Result<f64> {
    if n > MAX_WORST_CASE_DIM {
        return Err(Error::TooLarge {
            what: "dimension for the worst-case coefficient bound",
            value: n,
            limit: MAX_WORST_CASE_DIM,
        });
    }
    let m = n as f64 + 1.0;
    Ok(m.powf(m / 2.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub n: usize,
    pub r: usize,
    /// `Δ`: bound on the slack entries.
    pub big_delta: f64,
    /// Whether `Δ` is the worst-case bound rather than the observed maximum.
    pub worst_case: bool,
    pub delta: f64,
    /// `δ/Δ`.
    pub step: f64,
    /// `1/(4(n+r²))`.
    pub budget: f64,
}

impl GridParams {
    pub fn new(n: usize, r: usize, big_delta: f64, delta: f64, worst_case: bool) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::Invalid("n and r must be positive".into()));
        }
        if !(big_delta >= 1.0) || !big_delta.is_finite() {
            return Err(Error::Invalid(format!("Δ must be at least 1, got {big_delta}")));
        }
        let cap = grid_delta(n, r);
        if !(delta > 0.0) || delta > cap * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!(
                "δ = {delta:e} must lie in (0, {cap:e}]"
            )));
        }
        Ok(Self {
            n,
            r,
            big_delta,
            worst_case,
            delta,
            step: delta / big_delta,
            budget: 1.0 / (4.0 * (n as f64 + (r * r) as f64)),
        })
    }

    /// Largest admissible `δ` divided by `divisor`.
    pub fn with_divisor(n: usize, r: usize, big_delta: f64, divisor: f64, worst_case: bool) -> Result<Self> {
        Self::new(n, r, big_delta, grid_delta(n, r) / divisor, worst_case)
    }

    /// `√(rΔ)`, the norm bound on witnesses and rescaled factors.
    pub fn alpha(&self) -> f64 {
        (self.r as f64 * self.big_delta).sqrt()
    }

    /// `4δr²/√Δ`.
    pub fn error_bound(&self) -> f64 {
        4.0 * self.delta * (self.r * self.r) as f64 / self.big_delta.sqrt()
    }

    /// `8r^{3/2}√Δ`.
    pub fn entry_bound(&self) -> f64 {
        8.0 * (self.r as f64).powf(1.5) * self.big_delta.sqrt()
    }

    pub fn rows(&self) -> usize {
        self.n + self.r * self.r
    }
}

/// Nearest multiple of `step`, ties toward +∞.
pub fn round_to_grid(x: f64, step: f64) -> f64 {
    (x / step + 0.5).floor() * step
}

/// Whether `x` is a multiple of `step` within `1e-12`.
pub fn on_grid(x: f64, step: f64) -> bool {
    (x - (x / step).round() * step).abs() <= 1e-12
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundedFactor {
    pub matrix: SymMatrix,
    /// `‖Ū − U‖_F`.
    pub error: f64,
    pub within_error_bound: bool,
    pub within_entry_bound: bool,
    /// The grid step is at least twice the norm: rounding erased the matrix.
    pub degenerate_grid: bool,
}

/// Rounds eigenvalues and eigenvector entries to the grid and reassembles
/// `Σ λ̄ₖ ūₖūₖᵀ`; the entries of the result are then snapped to the grid
/// as well, which adds at most `r·step/2` to the Frobenius error.
pub fn round_factor(u: &SymMatrix, g: &GridParams) -> Result<RoundedFactor> {
    let dec = eigh(u);
    let lmax = dec.max().max(0.0);
    // eigenvalues above −step/2 round to zero, so roundoff negativity is harmless
    if dec.min() < -(1e-9 * (1.0 + lmax)).max(0.5 * g.step) {
        return Err(Error::NotPsd {
            min_eigenvalue: dec.min(),
        });
    }
    let h = g.step;
    let side = u.side();
    let mut acc = DMatrix::zeros(side, side);
    for k in 0..side {
        let lambda = round_to_grid(dec.eigenvalues[k], h);
        if lambda == 0.0 {
            continue;
        }
        let v = dec.eigenvectors.column(k).map(|x| round_to_grid(x, h));
        acc += &v * v.transpose() * lambda;
    }
    let snapped = SymMatrix::symmetrize(acc.map(|x| round_to_grid(x, h)));
    let error = symcore::frobenius_norm(&snapped.sub(u));
    Ok(RoundedFactor {
        within_error_bound: error <= g.error_bound(),
        within_entry_bound: snapped.max_abs_entry() <= g.entry_bound(),
        degenerate_grid: h >= 2.0 * lmax,
        matrix: snapped,
        error,
    })
}

/// Greedy maximum-volume subsystem of the vectors `(aᵢ, vec Uᵢ)`: each
/// step takes the row with the largest component orthogonal to the rows
/// chosen so far (smallest index on ties), until every remaining squared
/// component is below `rank_tol` times the largest squared norm.
pub fn select_subsystem(h: &HPolytope, f: &PsdFactorization, rank_tol: f64) -> Result<Vec<usize>> {
    if h.is_empty() {
        return Err(Error::Empty("inequality system"));
    }
    if h.len() != f.rows() {
        return Err(Error::Dimension {
            context: "inequalities vs row factors",
            expected: h.len(),
            found: f.rows(),
        });
    }
    let mut residual: Vec<Vec<f64>> = h
        .rows()
        .iter()
        .zip(f.row_factors())
        .map(|(row, u)| {
            row.a
                .iter()
                .map(|&x| x as f64)
                .chain(u.as_matrix().iter().copied())
                .collect()
        })
        .collect();
    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let scale = residual.iter().map(|v| norm2(v)).fold(0.0, f64::max);
    let limit = h.dim() + f.side() * f.side();
    let mut chosen: Vec<usize> = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in residual.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let n2 = norm2(v);
            if best.map_or(true, |(_, b)| n2 > b) {
                best = Some((i, n2));
            }
        }
        let Some((pick, n2)) = best else { break };
        if !(n2 > rank_tol * scale) || scale == 0.0 {
            break;
        }
        chosen.push(pick);
        let pivot: Vec<f64> = residual[pick].iter().map(|x| x / n2.sqrt()).collect();
        for (i, v) in residual.iter_mut().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let c: f64 = v.iter().zip(&pivot).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(&pivot).for_each(|(a, b)| *a -= c * b);
        }
    }
    if chosen.len() > limit {
        return Err(Error::Inconsistent(format!(
            "selected {} rows, more than n + r² = {limit}",
            chosen.len()
        )));
    }
    Ok(chosen)
}

/// Gram-determinant volume of the chosen rows, for diagnostics and tests.
pub fn subsystem_volume(h: &HPolytope, f: &PsdFactorization, rows: &[usize]) -> f64 {
    let vecs: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            h.rows()[i]
                .a
                .iter()
                .map(|&x| x as f64)
                .chain(f.row_factors()[i].as_matrix().iter().copied())
                .collect()
        })
        .collect();
    let k = vecs.len();
    let gram = DMatrix::from_fn(k, k, |a, b| vecs[a].iter().zip(&vecs[b]).map(|(x, y)| x * y).sum::<f64>());
    gram.determinant().max(0.0).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundedRow {
    pub a: Vec<i64>,
    pub b: i64,
    pub u: SymMatrix,
    /// Row of the original system; `None` for padding.
    pub source: Option<usize>,
}

/// A rounded system padded to `n + r²` rows, ready for [`reconstruct`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundedSystem {
    pub grid: GridParams,
    pub rows: Vec<RoundedRow>,
    /// Starting points for the witness search, typically the column factors.
    #[serde(default)]
    pub warm_starts: Vec<SymMatrix>,
    pub max_rounding_error: f64,
    pub error_bound_violations: usize,
    pub entry_bound_violations: usize,
    pub degenerate_factors: usize,
}

impl RoundedSystem {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn r(&self) -> usize {
        self.grid.r
    }

    fn validate(&self) -> Result<()> {
        let (n, r) = (self.n(), self.r());
        if self.rows.len() != self.grid.rows() {
            return Err(Error::Dimension {
                context: "padded system rows",
                expected: self.grid.rows(),
                found: self.rows.len(),
            });
        }
        for row in &self.rows {
            if row.a.len() != n {
                return Err(Error::Dimension {
                    context: "inequality length",
                    expected: n,
                    found: row.a.len(),
                });
            }
            if row.u.side() != r {
                return Err(Error::Dimension {
                    context: "rounded factor side",
                    expected: r,
                    found: row.u.side(),
                });
            }
        }
        if let Some(w) = self.warm_starts.iter().find(|w| w.side() != r) {
            return Err(Error::Dimension {
                context: "warm start side",
                expected: r,
                found: w.side(),
            });
        }
        Ok(())
    }
}

/// Selects a subsystem, rounds its row factors and pads with zero rows.
pub fn build_rounded_system(
    h: &HPolytope,
    f: &PsdFactorization,
    g: &GridParams,
    rank_tol: f64,
) -> Result<RoundedSystem> {
    if g.n != h.dim() || g.r != f.side() {
        return Err(Error::Invalid(format!(
            "grid built for (n, r) = ({}, {}) but system has ({}, {})",
            g.n,
            g.r,
            h.dim(),
            f.side()
        )));
    }
    let chosen = select_subsystem(h, f, rank_tol)?;
    let mut rows = Vec::with_capacity(g.rows());
    let mut max_err = 0.0f64;
    let (mut err_viol, mut entry_viol, mut degenerate) = (0, 0, 0);
    for &i in &chosen {
        let rounded = round_factor(&f.row_factors()[i], g)?;
        max_err = max_err.max(rounded.error);
        err_viol += usize::from(!rounded.within_error_bound);
        entry_viol += usize::from(!rounded.within_entry_bound);
        degenerate += usize::from(rounded.degenerate_grid);
        let ineq = &h.rows()[i];
        rows.push(RoundedRow {
            a: ineq.a.clone(),
            b: ineq.b,
            u: rounded.matrix,
            source: Some(i),
        });
    }
    while rows.len() < g.rows() {
        rows.push(RoundedRow {
            a: vec![0; g.n],
            b: 0,
            u: SymMatrix::zeros(g.r),
            source: None,
        });
    }
    Ok(RoundedSystem {
        grid: g.clone(),
        rows,
        warm_starts: f.col_factors().to_vec(),
        max_rounding_error: max_err,
        error_bound_violations: err_viol,
        entry_bound_violations: entry_viol,
        degenerate_factors: degenerate,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipConfig {
    /// Target is `|residual| ≤ margin · budget`; witnesses are validated at
    /// the full budget.
    pub margin: f64,
    pub max_iters: usize,
    pub random_restarts: usize,
    /// A start has settled once its best objective improved by less than
    /// this relative amount over `window` iterations.
    pub stall_tol: f64,
    pub window: usize,
    pub seed: u64,
}

impl Default for MembershipConfig {
    fn default() -> Self {
        Self {
            margin: 0.9,
            max_iters: 3000,
            random_restarts: 5,
            stall_tol: 1e-6,
            window: 200,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Member,
    Rejected,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub point: Vec<i64>,
    pub verdict: Verdict,
    /// Present exactly for members; re-validated against every row.
    pub witness: Option<SymMatrix>,
    /// `max |bᵢ − aᵢᵀx − ⟨Ūᵢ,Y⟩|` at the best `Y` found.
    pub max_violation: f64,
    /// Best objective per start.
    pub trace: Vec<f64>,
}

/// `max |cᵢ − ⟨Ūᵢ,Y⟩|`.
fn violation(system: &RoundedSystem, c: &[f64], y: &DMatrix<f64>) -> f64 {
    system
        .rows
        .iter()
        .zip(c)
        .map(|(row, &ci)| (ci - row.u.as_matrix().dot(y)).abs())
        .fold(0.0, f64::max)
}

/// Searches for `Y ⪰ 0`, `‖Y‖ ≤ √(rΔ)` meeting every row within budget by
/// projected gradient on the squared hinge excess. Acceptance is certified
/// by the witness; rejection means every start settled with objective at
/// least `budget²`.
pub fn membership_test(
    x: &[i64],
    system: &RoundedSystem,
    cfg: &MembershipConfig,
) -> Result<MembershipVerdict> {
    system.validate()?;
    if x.len() != system.n() {
        return Err(Error::Dimension {
            context: "point length",
            expected: system.n(),
            found: x.len(),
        });
    }
    let g = &system.grid;
    let r = g.r;
    let alpha = g.alpha();
    let budget = g.budget;
    let target = cfg.margin * budget;
    let c: Vec<f64> = system
        .rows
        .iter()
        .map(|row| (row.b - row.a.iter().zip(x).map(|(a, xi)| a * xi).sum::<i64>()) as f64)
        .collect();
    let lipschitz = 2.0
        * system
            .rows
            .iter()
            .map(|row| row.u.as_matrix().norm_squared())
            .sum::<f64>();
    let project = |m: DMatrix<f64>| {
        symcore::project_psd(&SymMatrix::symmetrize(m), Some(alpha)).into_matrix()
    };
    let objective_and_grad = |y: &DMatrix<f64>| {
        let mut f = 0.0;
        let mut grad = DMatrix::zeros(r, r);
        for (row, &ci) in system.rows.iter().zip(&c) {
            let t = row.u.as_matrix().dot(y) - ci;
            let excess = t.abs() - target;
            if excess > 0.0 {
                f += excess * excess;
                grad += row.u.as_matrix() * (2.0 * excess * t.signum());
            }
        }
        (f, grad)
    };
    let certify = |y: &DMatrix<f64>| -> Option<f64> {
        let v = violation(system, &c, y);
        let norm = symcore::operator_norm(&SymMatrix::symmetrize(y.clone()));
        let psd = symcore::min_eigenvalue(&SymMatrix::symmetrize(y.clone())) >= -1e-12;
        (v <= budget && norm <= alpha * (1.0 + 1e-9) && psd).then_some(v)
    };

    let mut starts: Vec<DMatrix<f64>> = system
        .warm_starts
        .iter()
        .map(|w| project(w.as_matrix().clone()))
        .collect();
    starts.push(DMatrix::identity(r, r) * (alpha / 2.0));
    starts.push(DMatrix::zeros(r, r));
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed ^ x.iter().fold(0u64, |h, &xi| h.wrapping_mul(31).wrapping_add(xi as u64 + 1)),
    );
    for _ in 0..cfg.random_restarts {
        let m = DMatrix::from_fn(r, r, |_, _| StandardNormal.sample(&mut rng));
        let m: DMatrix<f64> = m;
        starts.push(project(&m * m.transpose() * (alpha / (2.0 * r as f64))));
    }

    let mut trace = Vec::with_capacity(starts.len());
    let mut best_violation = f64::INFINITY;
    let mut all_settled = true;
    for start in starts {
        if let Some(v) = certify(&start) {
            return Ok(member(x, start, v, trace));
        }
        if lipschitz == 0.0 {
            // every row is constant in Y
            let v = violation(system, &c, &start);
            trace.push(objective_and_grad(&start).0);
            best_violation = best_violation.min(v);
            continue;
        }
        let step = 1.0 / lipschitz;
        let mut y = start.clone();
        let mut z = start;
        let mut momentum = 1.0f64;
        let mut best = f64::INFINITY;
        let mut best_at_window = f64::INFINITY;
        let mut settled = false;
        for it in 0..cfg.max_iters {
            let (fz, grad) = objective_and_grad(&z);
            if !fz.is_finite() {
                return Err(Error::Numeric("NaN in membership iterate".into()));
            }
            let next = project(&z - grad * step);
            let (f_next, _) = objective_and_grad(&next);
            if f_next < best {
                best = f_next;
            }
            if let Some(v) = certify(&next) {
                trace.push(f_next);
                return Ok(member(x, next, v, trace));
            }
            best_violation = best_violation.min(violation(system, &c, &next));
            // restart momentum when the objective goes up
            let next_momentum = if f_next > fz {
                1.0
            } else {
                0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt())
            };
            z = &next + (&next - &y) * ((momentum - 1.0) / next_momentum);
            y = next;
            momentum = next_momentum;
            if (it + 1) % cfg.window == 0 {
                if best >= best_at_window * (1.0 - cfg.stall_tol) {
                    settled = true;
                    break;
                }
                best_at_window = best;
            }
        }
        all_settled &= settled;
        trace.push(best);
    }
    let floor = trace.iter().copied().fold(f64::INFINITY, f64::min);
    let verdict = if all_settled && floor >= budget * budget {
        Verdict::Rejected
    } else {
        Verdict::Inconclusive
    };
    Ok(MembershipVerdict {
        point: x.to_vec(),
        verdict,
        witness: None,
        max_violation: best_violation,
        trace,
    })
}

fn member(x: &[i64], y: DMatrix<f64>, violation: f64, trace: Vec<f64>) -> MembershipVerdict {
    MembershipVerdict {
        point: x.to_vec(),
        verdict: Verdict::Member,
        witness: Some(SymMatrix::symmetrize(y)),
        max_violation: violation,
        trace,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Reconstruction {
    pub n: usize,
    pub accepted: Vec<Vec<i64>>,
    pub rejected: Vec<Vec<i64>>,
    pub inconclusive: Vec<Vec<i64>>,
    /// False when any point is inconclusive.
    pub complete: bool,
    pub verdicts: Vec<MembershipVerdict>,
}

/// Runs [`membership_test`] on every point of `{0,1}ⁿ`, in lexicographic order.
pub fn reconstruct(system: &RoundedSystem, cfg: &MembershipConfig) -> Result<Reconstruction> {
    system.validate()?;
    let n = system.n();
    if n > MAX_RECONSTRUCT_DIM {
        return Err(Error::TooLarge {
            what: "dimension for reconstruction",
            value: n,
            limit: MAX_RECONSTRUCT_DIM,
        });
    }
    let points: Vec<Vec<i64>> = cube_points(n).collect();
    #[cfg(feature = "parallel")]
    let verdicts: Vec<MembershipVerdict> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|x| membership_test(x, system, cfg))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let verdicts: Vec<MembershipVerdict> = points
        .iter()
        .map(|x| membership_test(x, system, cfg))
        .collect::<Result<_>>()?;

    let pick = |kind: Verdict| -> Vec<Vec<i64>> {
        verdicts
            .iter()
            .filter(|v| v.verdict == kind)
            .map(|v| v.point.clone())
            .collect()
    };
    let inconclusive = pick(Verdict::Inconclusive);
    Ok(Reconstruction {
        n,
        accepted: pick(Verdict::Member),
        rejected: pick(Verdict::Rejected),
        complete: inconclusive.is_empty(),
        inconclusive,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{build_slack, builtin_instance, Inequality, Instance};
    use crate::psdfact::diagonal_embed;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_delta_examples() {
        assert_eq!(grid_delta(2, 2), 1.0 / 768.0);
        assert_eq!(grid_delta(1, 1), 1.0 / 32.0);
        assert_eq!(grid_delta(3, 4), 1.0 / 19456.0);
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(round_to_grid(1.13, 0.25), 1.25);
        assert_eq!(round_to_grid(1.125, 0.25), 1.25);
        assert_eq!(round_to_grid(-1.125, 0.25), -1.0);
        assert_eq!(round_to_grid(0.1, 0.25), 0.0);
    }

    #[test]
    fn grid_aligned_factor_is_unchanged() {
        let g = GridParams::new(2, 2, 1.0, grid_delta(2, 2), false).unwrap();
        let u = SymMatrix::from_diagonal(&[3.0 * g.step, 17.0 * g.step]);
        let rf = round_factor(&u, &g).unwrap();
        assert_eq!(rf.matrix, u);
        assert_eq!(rf.error, 0.0);
    }

    #[test]
    fn degenerate_grid_is_flagged() {
        let g = GridParams::new(1, 1, 1.0, grid_delta(1, 1), false).unwrap();
        let rf = round_factor(&SymMatrix::from_diagonal(&[0.001]), &g).unwrap();
        assert!(rf.degenerate_grid);
    }

    #[test]
    fn grid_params_validation() {
        assert!(GridParams::new(2, 2, 1.0, 1.0, false).is_err());
        assert!(GridParams::new(2, 2, 0.5, 1e-4, false).is_err());
        let g = GridParams::with_divisor(2, 2, 4.0, 10.0, false).unwrap();
        assert_relative_eq!(g.step, 1.0 / 768.0 / 10.0 / 4.0, max_relative = 1e-15);
        assert_relative_eq!(g.budget, 1.0 / 24.0, max_relative = 1e-15);
        assert_relative_eq!(worst_case_delta(3).unwrap(), 16.0, max_relative = 1e-15);
        assert!(worst_case_delta(13).is_err());
    }

    fn h_of(rows: Vec<(Vec<i64>, i64)>, n: usize) -> HPolytope {
        HPolytope::new(n, rows.into_iter().map(|(a, b)| Inequality::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn subsystem_of_basis_rows() {
        let h = h_of(vec![(vec![1, 0], 1), (vec![0, 1], 1)], 2);
        let f = PsdFactorization::new(
            1,
            vec![SymMatrix::zeros(1), SymMatrix::zeros(1)],
            vec![SymMatrix::identity(1)],
        )
        .unwrap();
        let mut s = select_subsystem(&h, &f, 1e-9).unwrap();
        s.sort();
        assert_eq!(s, vec![0, 1]);
    }

    #[test]
    fn duplicate_direction_is_skipped() {
        let h = h_of(vec![(vec![1, 0], 1), (vec![2, 0], 2), (vec![0, 1], 1)], 2);
        let f = PsdFactorization::new(1, vec![SymMatrix::zeros(1); 3], vec![SymMatrix::identity(1)])
            .unwrap();
        let s = select_subsystem(&h, &f, 1e-9).unwrap();
        assert_eq!(s.len(), 2);
        assert!(!(s.contains(&0) && s.contains(&1)));
    }

    #[test]
    fn unit_square_subsystem_matches_exhaustive_search() {
        let (h, v) = builtin_instance(Instance::Cube, 2).unwrap();
        let f = diagonal_embed(&build_slack(&h, &v).unwrap());
        let greedy = select_subsystem(&h, &f, 1e-9).unwrap();
        let mut best = (0usize, 0.0f64);
        for mask in 1u32..16 {
            let rows: Vec<usize> = (0..4).filter(|k| mask >> k & 1 == 1).collect();
            let vol = subsystem_volume(&h, &f, &rows);
            if vol > 1e-9 && (rows.len() > best.0 || (rows.len() == best.0 && vol > best.1)) {
                best = (rows.len(), vol);
            }
        }
        assert_eq!(greedy.len(), best.0);
        assert_relative_eq!(subsystem_volume(&h, &f, &greedy), best.1, max_relative = 1e-9);
    }

    #[test]
    fn point_instance_reconstruction() {
        let (h, v) = builtin_instance(Instance::Point, 2).unwrap();
        let s = build_slack(&h, &v).unwrap();
        let f = diagonal_embed(&s);
        let g = GridParams::with_divisor(2, f.side(), 1.0, 1.0, false).unwrap();
        let sys = build_rounded_system(&h, &f, &g, 1e-9).unwrap();
        let rec = reconstruct(&sys, &MembershipConfig::default()).unwrap();
        assert_eq!(rec.accepted, vec![vec![0, 0]]);
        assert!(rec.complete);
        assert!(rec.rejected.contains(&vec![1, 1]));
    }

    #[test]
    fn unit_square_reconstruction() {
        let (h, v) = builtin_instance(Instance::Cube, 2).unwrap();
        let s = build_slack(&h, &v).unwrap();
        let f = diagonal_embed(&s);
        let g = GridParams::with_divisor(2, f.side(), s.delta_eff(), 1.0, false).unwrap();
        let sys = build_rounded_system(&h, &f, &g, 1e-9).unwrap();
        assert_eq!(sys.rows.len(), 2 + 16);
        for row in &sys.rows {
            assert!(row.u.to_row_major().iter().all(|&x| on_grid(x, g.step)));
        }
        let rec = reconstruct(&sys, &MembershipConfig::default()).unwrap();
        assert_eq!(rec.accepted.len(), 4);
        assert!(rec.complete);
        for v in &rec.verdicts {
            let y = v.witness.as_ref().unwrap();
            assert!(symcore::operator_norm(y) <= g.alpha() * (1.0 + 1e-9));
            assert!(v.max_violation <= g.budget);
        }
    }

    #[test]
    fn vertex_warm_start_is_within_budget() {
        // residual at Y = Vʲ is bounded by ‖Ū − U‖_F ‖Vʲ‖_F ≤ 4δr³
        let (h, v) = builtin_instance(Instance::Simplex, 2).unwrap();
        let s = build_slack(&h, &v).unwrap();
        let f = diagonal_embed(&s);
        let g = GridParams::with_divisor(2, f.side(), s.delta_eff(), 1.0, false).unwrap();
        let sys = build_rounded_system(&h, &f, &g, 1e-9).unwrap();
        for (j, x) in v.points().iter().enumerate() {
            let c: Vec<f64> = sys
                .rows
                .iter()
                .map(|row| (row.b - row.a.iter().zip(x).map(|(a, b)| a * b).sum::<i64>()) as f64)
                .collect();
            let viol = violation(&sys, &c, f.col_factors()[j].as_matrix());
            let r = f.side() as f64;
            assert!(viol <= 4.0 * g.delta * r.powi(3) + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rounding_error_and_grid(seed in any::<u64>(), r in 1usize..5, n in 1usize..5,
                                   delta_exp in 0u32..3, divisor in prop::sample::select(vec![1.0, 10.0])) {
            let big_delta = 4f64.powi(delta_exp as i32);
            let g = GridParams::with_divisor(n, r, big_delta, divisor, false).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(r, r, |_, _| StandardNormal.sample(&mut rng));
            let m: DMatrix<f64> = m;
            let u = SymMatrix::symmetrize(&m * m.transpose());
            let u = u.scale(g.alpha() / symcore::operator_norm(&u).max(1e-300));
            let rf = round_factor(&u, &g).unwrap();
            prop_assert!(rf.within_error_bound, "error {} bound {}", rf.error, g.error_bound());
            prop_assert!(rf.within_entry_bound);
            prop_assert!(rf.matrix.to_row_major().iter().all(|&x| on_grid(x, g.step)));
        }
    }
}
