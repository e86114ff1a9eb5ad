//! Semidefinite factorizations `Sᵢⱼ = ⟨Uᵢ, Vʲ⟩` with PSD factors of a
//! common side `r`: the data model, verification against a slack matrix,
//! two ways of producing one, and the potential `Φ = lmax(U) · lmax(V)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::SlackMatrix;
use crate::symcore::{self, eigh, SymMatrix};

/// Factors count as PSD when `min eigenvalue ≥ −PSD_TOL · (1 + λmax)`.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactorizationFile", into = "FactorizationFile")]
pub struct PsdFactorization {
    r: usize,
    u: Vec<SymMatrix>,
    v: Vec<SymMatrix>,
}

/// Wire form: `{"r": …, "U": [matrix…], "V": [matrix…]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct FactorizationFile {
    r: usize,
    #[serde(rename = "U")]
    u: Vec<SymMatrix>,
    #[serde(rename = "V")]
    v: Vec<SymMatrix>,
}

impl TryFrom<FactorizationFile> for PsdFactorization {
    type Error = Error;

    fn try_from(f: FactorizationFile) -> Result<Self> {
        PsdFactorization::new(f.r, f.u, f.v)
    }
}

impl From<PsdFactorization> for FactorizationFile {
    fn from(f: PsdFactorization) -> Self {
        FactorizationFile {
            r: f.r,
            u: f.u,
            v: f.v,
        }
    }
}

impl PsdFactorization {
    /// Validates sides and positive semidefiniteness of every factor.
    pub fn new(r: usize, u: Vec<SymMatrix>, v: Vec<SymMatrix>) -> Result<Self> {
        if r == 0 {
            return Err(Error::Invalid("factorization side must be positive".into()));
        }
        if u.is_empty() {
            return Err(Error::Empty("row factors"));
        }
        if v.is_empty() {
            return Err(Error::Empty("column factors"));
        }
        for m in u.iter().chain(&v) {
            if m.side() != r {
                return Err(Error::Dimension {
                    context: "factor side",
                    expected: r,
                    found: m.side(),
                });
            }
            let dec = eigh(m);
            if dec.min() < -PSD_TOL * (1.0 + dec.max().max(0.0)) {
                return Err(Error::NotPsd {
                    min_eigenvalue: dec.min(),
                });
            }
        }
        Ok(Self { r, u, v })
    }

    /// For factors that are PSD by construction (congruences of PSD factors).
    pub(crate) fn from_parts(r: usize, u: Vec<SymMatrix>, v: Vec<SymMatrix>) -> Self {
        debug_assert!(u.iter().chain(&v).all(|m| m.side() == r));
        Self { r, u, v }
    }

    pub fn side(&self) -> usize {
        self.r
    }

    pub fn row_factors(&self) -> &[SymMatrix] {
        &self.u
    }

    pub fn col_factors(&self) -> &[SymMatrix] {
        &self.v
    }

    pub fn rows(&self) -> usize {
        self.u.len()
    }

    pub fn cols(&self) -> usize {
        self.v.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.u[i].as_matrix().dot(self.v[j].as_matrix())
    }

    /// `(c·U, V/c)`; the product matrix is unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            r: self.r,
            u: self.u.iter().map(|m| m.scale(c)).collect(),
            v: self.v.iter().map(|m| m.scale(1.0 / c)).collect(),
        }
    }

    /// `(T Uᵢ Tᵀ, T⁻ᵀ Vʲ T⁻¹)` for invertible `T`; still factorizes the same matrix.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("transform is singular".into()))?;
        let t_inv_t = t_inv.transpose();
        Ok(Self {
            r: self.r,
            u: self.u.iter().map(|m| m.congruence(t)).collect(),
            v: self.v.iter().map(|m| m.congruence(&t_inv_t)).collect(),
        })
    }

    pub fn lmax_u(&self) -> f64 {
        max_norm(&self.u)
    }

    pub fn lmax_v(&self) -> f64 {
        max_norm(&self.v)
    }
}

fn max_norm(factors: &[SymMatrix]) -> f64 {
    factors
        .iter()
        .map(symcore::operator_norm)
        .fold(0.0, f64::max)
}

/// `max ‖Mᵢ‖` over a nonempty list.
pub fn lmax(factors: &[SymMatrix]) -> Result<f64> {
    if factors.is_empty() {
        return Err(Error::Empty("factor list"));
    }
    Ok(max_norm(factors))
}

/// `Φ = lmax(U) · lmax(V)`.
pub fn potential(f: &PsdFactorization) -> f64 {
    f.lmax_u() * f.lmax_v()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub max_abs_residual: f64,
    pub residual_location: (usize, usize),
    pub lmax_u: f64,
    pub lmax_v: f64,
    pub potential: f64,
    /// Absolute threshold `tol · (1 + Δ_eff)`.
    pub threshold: f64,
    pub passed: bool,
}

/// `max |⟨Uᵢ,Vʲ⟩ − Sᵢⱼ|`; passes iff it is at most `tol · (1 + Δ_eff)`.
pub fn verify_factorization(
    f: &PsdFactorization,
    s: &SlackMatrix,
    tol: f64,
) -> Result<FactorizationReport> {
    if f.rows() != s.rows() {
        return Err(Error::Dimension {
            context: "row factors vs slack rows",
            expected: s.rows(),
            found: f.rows(),
        });
    }
    if f.cols() != s.cols() {
        return Err(Error::Dimension {
            context: "column factors vs slack columns",
            expected: s.cols(),
            found: f.cols(),
        });
    }
    let mut worst = (0.0, (0, 0));
    for i in 0..s.rows() {
        for j in 0..s.cols() {
            let res = (f.entry(i, j) - s.value(i, j)).abs();
            if res.is_nan() {
                return Err(Error::Numeric(format!("NaN residual at ({i}, {j})")));
            }
            if res > worst.0 {
                worst = (res, (i, j));
            }
        }
    }
    let lmax_u = f.lmax_u();
    let lmax_v = f.lmax_v();
    let threshold = tol * (1.0 + s.delta_eff());
    Ok(FactorizationReport {
        max_abs_residual: worst.0,
        residual_location: worst.1,
        lmax_u,
        lmax_v,
        potential: lmax_u * lmax_v,
        threshold,
        passed: worst.0 <= threshold,
    })
}

/// The diagonal certificate of side `min(|I|, |J|)`: with `|I| ≤ |J|`,
/// `Uᵢ = eᵢeᵢᵀ` and `Vʲ = diag(S₁ⱼ, …, S_{|I|j})`; otherwise transposed.
pub fn diagonal_embed(s: &SlackMatrix) -> PsdFactorization {
    let (rows, cols) = (s.rows(), s.cols());
    let unit = |r: usize, k: usize| {
        let mut d = vec![0.0; r];
        d[k] = 1.0;
        SymMatrix::from_diagonal(&d)
    };
    if rows <= cols {
        let u = (0..rows).map(|i| unit(rows, i)).collect();
        let v = (0..cols)
            .map(|j| {
                let col: Vec<f64> = (0..rows).map(|i| s.value(i, j)).collect();
                SymMatrix::from_diagonal(&col)
            })
            .collect();
        PsdFactorization::from_parts(rows, u, v)
    } else {
        let u = (0..rows)
            .map(|i| {
                let row: Vec<f64> = s.row(i).iter().map(|&x| x as f64).collect();
                SymMatrix::from_diagonal(&row)
            })
            .collect();
        let v = (0..cols).map(|j| unit(cols, j)).collect();
        PsdFactorization::from_parts(cols, u, v)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitConfig {
    /// Success threshold, relative as in [`verify_factorization`].
    pub tol: f64,
    /// Alternating sweeps used as a warm start.
    pub max_outer: usize,
    /// Accelerated projected-gradient steps per block update.
    pub inner_iters: usize,
    /// Levenberg–Marquardt iterations on square-root factors.
    pub refine_iters: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_outer: 200,
            inner_iters: 25,
            refine_iters: 200,
            seed: 7,
        }
    }
}

/// Outcome of [`alternating_fit`]. Failing to find a factorization says
/// nothing about whether one exists.
#[derive(Clone, Debug)]
pub enum FitOutcome {
    Found {
        factorization: PsdFactorization,
        report: FactorizationReport,
        iterations: usize,
    },
    NotFound {
        best_residual: f64,
        /// Max absolute residual after each sweep, then after each
        /// refinement iteration.
        trace: Vec<f64>,
    },
}

impl FitOutcome {
    pub fn factorization(&self) -> Option<&PsdFactorization> {
        match self {
            FitOutcome::Found { factorization, .. } => Some(factorization),
            FitOutcome::NotFound { .. } => None,
        }
    }
}

/// Local search for a side-`r` factorization minimizing
/// `Σ(⟨Uᵢ,Vʲ⟩ − Sᵢⱼ)²`: alternating projected-gradient sweeps (one block at
/// a time, PSD projection by eigenvalue clipping) from a fixed-seed
/// Gaussian start, then Levenberg–Marquardt on `Uᵢ = LᵢLᵢᵀ`, `Vʲ = MⱼMⱼᵀ`.
pub fn alternating_fit(s: &SlackMatrix, r: usize, cfg: &FitConfig) -> Result<FitOutcome> {
    if r == 0 {
        return Err(Error::Invalid("fit side must be positive".into()));
    }
    let (rows, cols) = (s.rows(), s.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut random_psd = || {
        let g = DMatrix::from_fn(r, r, |_, _| StandardNormal.sample(&mut rng));
        let g: DMatrix<f64> = g;
        symcore::project_psd(&SymMatrix::symmetrize(g), None)
    };
    let mut u: Vec<SymMatrix> = (0..rows).map(|_| random_psd()).collect();
    let mut v: Vec<SymMatrix> = (0..cols).map(|_| random_psd()).collect();

    // scale so that the mean product matches the mean target
    let mean_target = s.to_rows().iter().flatten().sum::<i64>() as f64 / (rows * cols) as f64;
    let mean_now = {
        let f = PsdFactorization::from_parts(r, u.clone(), v.clone());
        let mut total = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                total += f.entry(i, j);
            }
        }
        total / (rows * cols) as f64
    };
    if mean_now > 0.0 && mean_target > 0.0 {
        let c = (mean_target / mean_now).sqrt();
        u.iter_mut().for_each(|m| *m = m.scale(c));
        v.iter_mut().for_each(|m| *m = m.scale(c));
    }

    let threshold = cfg.tol * (1.0 + s.delta_eff());
    let mut trace = Vec::new();
    let found = |u: Vec<SymMatrix>, v: Vec<SymMatrix>, iterations: usize| -> Result<FitOutcome> {
        let f = PsdFactorization::from_parts(r, u, v);
        let balanced = crate::rescaler::balance_scalar(&f).unwrap_or(f);
        let report = verify_factorization(&balanced, s, cfg.tol)?;
        Ok(FitOutcome::Found {
            factorization: balanced,
            report,
            iterations,
        })
    };
    for outer in 0..cfg.max_outer {
        for i in 0..rows {
            let targets: Vec<f64> = (0..cols).map(|j| s.value(i, j)).collect();
            u[i] = block_update(&u[i], &v, &targets, cfg.inner_iters)?;
        }
        for j in 0..cols {
            let targets: Vec<f64> = (0..rows).map(|i| s.value(i, j)).collect();
            v[j] = block_update(&v[j], &u, &targets, cfg.inner_iters)?;
        }
        let res = max_residual(&u, &v, s);
        trace.push(res);
        if res <= threshold {
            return found(u, v, outer + 1);
        }
    }

    let mut ls: Vec<DMatrix<f64>> = u.iter().map(|m| symcore::psd_sqrt(m).into_matrix()).collect();
    let mut ms: Vec<DMatrix<f64>> = v.iter().map(|m| symcore::psd_sqrt(m).into_matrix()).collect();
    let mut damping = None;
    for it in 0..cfg.refine_iters {
        if !lm_step(&mut ls, &mut ms, s, &mut damping)? {
            break;
        }
        let u: Vec<SymMatrix> = ls.iter().map(gram).collect();
        let v: Vec<SymMatrix> = ms.iter().map(gram).collect();
        let res = max_residual(&u, &v, s);
        trace.push(res);
        if res <= threshold {
            // polish towards machine precision while it keeps improving
            for _ in 0..20 {
                if !lm_step(&mut ls, &mut ms, s, &mut damping)? {
                    break;
                }
            }
            let u: Vec<SymMatrix> = ls.iter().map(gram).collect();
            let v: Vec<SymMatrix> = ms.iter().map(gram).collect();
            return found(u, v, cfg.max_outer + it + 1);
        }
    }
    Ok(FitOutcome::NotFound {
        best_residual: trace.iter().copied().fold(f64::INFINITY, f64::min),
        trace,
    })
}

fn gram(l: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::symmetrize(l * l.transpose())
}

fn max_residual(u: &[SymMatrix], v: &[SymMatrix], s: &SlackMatrix) -> f64 {
    let mut worst = 0.0f64;
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            worst = worst.max((ui.as_matrix().dot(vj.as_matrix()) - s.value(i, j)).abs());
        }
    }
    worst
}

/// Residuals `‖LᵢᵀMⱼ‖²_F − Sᵢⱼ` in row-major order.
fn lm_residuals(ls: &[DMatrix<f64>], ms: &[DMatrix<f64>], s: &SlackMatrix) -> DVector<f64> {
    let cols = ms.len();
    DVector::from_fn(ls.len() * cols, |k, _| {
        let (i, j) = (k / cols, k % cols);
        (ls[i].transpose() * &ms[j]).norm_squared() - s.value(i, j)
    })
}

/// One damped Gauss–Newton step in the underdetermined form
/// `δ = −Jᵀ(JJᵀ + λI)⁻¹e`. Returns false once no damping level helps.
fn lm_step(
    ls: &mut [DMatrix<f64>],
    ms: &mut [DMatrix<f64>],
    s: &SlackMatrix,
    damping: &mut Option<f64>,
) -> Result<bool> {
    let (rows, cols) = (ls.len(), ms.len());
    let r = ls[0].nrows();
    let block = r * r;
    let params = (rows + cols) * block;
    let e = lm_residuals(ls, ms, s);
    let cost = e.norm_squared();
    if cost == 0.0 {
        return Ok(false);
    }
    let mut jac = DMatrix::zeros(rows * cols, params);
    for i in 0..rows {
        for j in 0..cols {
            let k = i * cols + j;
            let dl = (&ms[j] * ms[j].transpose()) * &ls[i] * 2.0;
            let dm = (&ls[i] * ls[i].transpose()) * &ms[j] * 2.0;
            for (t, x) in dl.iter().enumerate() {
                jac[(k, i * block + t)] = *x;
            }
            for (t, x) in dm.iter().enumerate() {
                jac[(k, (rows + j) * block + t)] = *x;
            }
        }
    }
    let jjt = &jac * jac.transpose();
    let lambda = damping.get_or_insert_with(|| 1e-3 * jjt.diagonal().mean().max(1e-12));
    for _ in 0..40 {
        let mut system = jjt.clone();
        for d in 0..system.nrows() {
            system[(d, d)] += *lambda;
        }
        let Some(chol) = system.cholesky() else {
            *lambda *= 4.0;
            continue;
        };
        let delta = -(jac.transpose() * chol.solve(&e));
        let apply = |mats: &[DMatrix<f64>], offset: usize| -> Vec<DMatrix<f64>> {
            mats.iter()
                .enumerate()
                .map(|(q, m)| {
                    let start = (offset + q) * block;
                    m + DMatrix::from_column_slice(r, r, &delta.as_slice()[start..start + block])
                })
                .collect()
        };
        let new_ls = apply(ls, 0);
        let new_ms = apply(ms, rows);
        let new_cost = lm_residuals(&new_ls, &new_ms, s).norm_squared();
        if !new_cost.is_finite() {
            return Err(Error::Numeric("NaN in factorization refinement".into()));
        }
        if new_cost < cost {
            ls.clone_from_slice(&new_ls);
            ms.clone_from_slice(&new_ms);
            *lambda = (*lambda / 3.0).max(1e-15);
            return Ok(true);
        }
        *lambda *= 4.0;
    }
    Ok(false)
}

/// Approximately solves `min_{X ⪰ 0} Σₖ (⟨X, Mₖ⟩ − tₖ)²` from `start`.
fn block_update(
    start: &SymMatrix,
    others: &[SymMatrix],
    targets: &[f64],
    iters: usize,
) -> Result<SymMatrix> {
    let lipschitz: f64 = 2.0 * others.iter().map(|m| m.as_matrix().norm_squared()).sum::<f64>();
    if lipschitz == 0.0 {
        return Ok(start.clone());
    }
    let step = 1.0 / lipschitz;
    let grad = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let mut g = DMatrix::zeros(x.nrows(), x.ncols());
        for (m, &t) in others.iter().zip(targets) {
            let res = x.dot(m.as_matrix()) - t;
            g += m.as_matrix() * (2.0 * res);
        }
        g
    };
    let mut x = start.as_matrix().clone();
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    for _ in 0..iters {
        let g = grad(&y);
        let next = symcore::project_psd(&SymMatrix::symmetrize(&y - g * step), None).into_matrix();
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        y = &next + (&next - &x) * ((momentum - 1.0) / next_momentum);
        x = next;
        momentum = next_momentum;
    }
    if x.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("NaN in alternating_fit iterate".into()));
    }
    Ok(SymMatrix::symmetrize(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{build_slack, builtin_instance, Instance};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn unit_square() -> SlackMatrix {
        let (h, v) = builtin_instance(Instance::Cube, 2).unwrap();
        build_slack(&h, &v).unwrap()
    }

    #[test]
    fn trivial_verification() {
        let s = SlackMatrix::from_entries(vec![vec![1]]).unwrap();
        let f = PsdFactorization::new(1, vec![SymMatrix::identity(1)], vec![SymMatrix::identity(1)])
            .unwrap();
        let rep = verify_factorization(&f, &s, 1e-12).unwrap();
        assert_eq!(rep.max_abs_residual, 0.0);
        assert!(rep.passed);
        assert_eq!(rep.potential, rep.lmax_u * rep.lmax_v);
    }

    #[test]
    fn perturbed_entry_fails() {
        let s = unit_square();
        let f = diagonal_embed(&s);
        let mut rows = s.to_rows();
        rows[2][1] += 1;
        let bumped = SlackMatrix::from_entries(rows).unwrap();
        let tol = 1e-6;
        let rep = verify_factorization(&f, &bumped, tol).unwrap();
        assert!(!rep.passed);
        assert!(rep.max_abs_residual >= 1.0 - tol);
        assert_eq!(rep.residual_location, (2, 1));
    }

    #[test]
    fn dimension_mismatch() {
        let s = unit_square();
        let f = PsdFactorization::new(1, vec![SymMatrix::identity(1)], vec![SymMatrix::identity(1)])
            .unwrap();
        assert!(matches!(
            verify_factorization(&f, &s, 1e-9),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn diagonal_embed_examples() {
        let s = SlackMatrix::from_entries(vec![vec![2]]).unwrap();
        let f = diagonal_embed(&s);
        assert_eq!(f.side(), 1);
        assert_eq!(f.row_factors()[0].get(0, 0), 1.0);
        assert_eq!(f.col_factors()[0].get(0, 0), 2.0);
        assert_eq!(f.entry(0, 0), 2.0);

        let s = SlackMatrix::from_entries(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let f = diagonal_embed(&s);
        assert_eq!(f.side(), 2);
        assert_eq!(f.row_factors()[1], SymMatrix::from_diagonal(&[0.0, 1.0]));
        assert_eq!(verify_factorization(&f, &s, 0.0).unwrap().max_abs_residual, 0.0);

        let s = unit_square();
        let f = diagonal_embed(&s);
        assert_eq!(f.side(), 4);
        assert_eq!(verify_factorization(&f, &s, 0.0).unwrap().max_abs_residual, 0.0);
    }

    #[test]
    fn diagonal_embed_takes_smaller_side() {
        let s = SlackMatrix::from_entries(vec![vec![1, 2], vec![3, 0], vec![0, 5]]).unwrap();
        let f = diagonal_embed(&s);
        assert_eq!(f.side(), 2);
        assert!(verify_factorization(&f, &s, 0.0).unwrap().passed);
    }

    #[test]
    fn lmax_and_potential() {
        let m = [SymMatrix::from_diagonal(&[2.0, 0.0]), SymMatrix::from_diagonal(&[0.0, 3.0])];
        assert_eq!(lmax(&m).unwrap(), 3.0);
        assert!(matches!(lmax(&[]), Err(Error::Empty(_))));
        let f = PsdFactorization::new(
            2,
            vec![SymMatrix::identity(2).scale(2.0); 3],
            vec![SymMatrix::identity(2).scale(3.0); 2],
        )
        .unwrap();
        assert_abs_diff_eq!(potential(&f), 6.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_indefinite_factor() {
        let err = PsdFactorization::new(
            2,
            vec![SymMatrix::from_diagonal(&[1.0, -0.1])],
            vec![SymMatrix::identity(2)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
    }

    #[test]
    fn json_round_trip() {
        let f = diagonal_embed(&unit_square());
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.starts_with(r#"{"r":4,"U":[{"side":4"#));
        let back: PsdFactorization = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn fit_unit_square_side_three() {
        // a quadrilateral has PSD rank 3 = dimension + 1
        let s = unit_square();
        let cfg = FitConfig::default();
        let f = alternating_fit(&s, 3, &cfg).unwrap();
        let f = f.factorization().expect("side 3 exists");
        let rep = verify_factorization(f, &s, 1e-9).unwrap();
        assert!(rep.passed, "residual {:e}", rep.max_abs_residual);
        assert_relative_eq!(rep.lmax_u, rep.lmax_v, max_relative = 1e-10);
        assert!(alternating_fit(&s, 2, &cfg).unwrap().factorization().is_none());
    }

    #[test]
    fn fit_unit_square() {
        let s = unit_square();
        let out = alternating_fit(&s, 4, &FitConfig::default()).unwrap();
        let f = out.factorization().expect("diagonal embedding exists, fit should find one");
        let cfg = FitConfig::default();
        assert!(verify_factorization(f, &s, cfg.tol).unwrap().passed);
    }

    #[test]
    fn fit_identity_rank_one_not_found() {
        let s = SlackMatrix::from_entries(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let cfg = FitConfig::default();
        match alternating_fit(&s, 1, &cfg).unwrap() {
            FitOutcome::NotFound { best_residual, trace } => {
                assert!(best_residual > 0.1);
                assert!(trace.len() >= cfg.max_outer);
            }
            FitOutcome::Found { .. } => panic!("uv = I has no nonnegative scalar solution"),
        }
    }

    #[test]
    fn fit_all_ones_rank_one() {
        let s = SlackMatrix::from_entries(vec![vec![1; 3]; 3]).unwrap();
        let out = alternating_fit(&s, 1, &FitConfig::default()).unwrap();
        let f = out.factorization().unwrap();
        for m in f.row_factors().iter().chain(f.col_factors()) {
            assert_abs_diff_eq!(m.get(0, 0), 1.0, epsilon = 1e-5);
        }
    }
}
