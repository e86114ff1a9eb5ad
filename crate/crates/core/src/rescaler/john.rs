//! Minimum-volume origin-centred ellipsoid of a finite symmetric point set
//! and the resulting decomposition `Σ p(z) zzᵀ = TTᵀ/k`.
//!
//! Weights are computed with Khachiyan's barycentric coordinate ascent on
//! `log det Σ uᵢ yᵢyᵢᵀ`, with Todd–Yildirim away steps so that points off
//! the boundary lose their weight entirely.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symcore::{self, eigh, psd_sqrt, SymMatrix};

/// Stop once every point satisfies `yᵀ(kX)⁻¹y ≤ 1 + tol` and every
/// supported point `≥ 1 − tol`.
pub const MVEE_TOL: f64 = 1e-7;
pub const MVEE_MAX_ITERS: usize = 200_000;
/// Weights at or below this are discarded before renormalizing.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JohnDecomposition {
    /// Dimension of the span of the point set.
    pub k: usize,
    /// Ellipsoid map, `ambient × k`; the ellipsoid is `T · (unit ball)`.
    pub t: Vec<Vec<f64>>,
    pub contact_points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub iterations: usize,
}

impl JohnDecomposition {
    pub fn ambient(&self) -> usize {
        self.t.len()
    }

    pub fn t_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.ambient(), self.k, |i, j| self.t[i][j])
    }

    /// `Σ p(z) zzᵀ`.
    pub fn moment(&self) -> SymMatrix {
        let n = self.ambient();
        let mut m = DMatrix::zeros(n, n);
        for (z, &p) in self.contact_points.iter().zip(&self.weights) {
            let z = DVector::from_column_slice(z);
            m += &z * z.transpose() * p;
        }
        SymMatrix::symmetrize(m)
    }

    /// `‖Σ p(z) zzᵀ − TTᵀ/k‖_F`.
    pub fn identity_residual(&self) -> f64 {
        let t = self.t_matrix();
        let target = SymMatrix::symmetrize(&t * t.transpose() / self.k as f64);
        symcore::frobenius_norm(&self.moment().sub(&target))
    }

    /// `max |‖T⁺z‖ − 1|` over contact points.
    pub fn boundary_residual(&self) -> f64 {
        let t = self.t_matrix();
        let pinv = match t.clone().pseudo_inverse(1e-12) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        self.contact_points
            .iter()
            .map(|z| ((&pinv * DVector::from_column_slice(z)).norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// John decomposition of the symmetric hull of `points` (each point is
/// identified with its negation). Points of norm at most `rank_tol` times
/// the largest norm are ignored, and contact points are reported as their
/// projections onto the numerical span.
pub fn john_decompose(points: &[DVector<f64>], rank_tol: f64) -> Result<JohnDecomposition> {
    let ambient = match points.first() {
        Some(p) => p.len(),
        None => return Err(Error::Empty("point set")),
    };
    if points.iter().any(|p| p.len() != ambient) {
        return Err(Error::Invalid("points have mixed dimensions".into()));
    }
    if points.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("point set"));
    }
    let largest = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let folded = fold_pairs(points, rank_tol * largest);
    if folded.is_empty() {
        return Err(Error::Empty("point set spans the zero subspace"));
    }

    let mut moment = DMatrix::zeros(ambient, ambient);
    for z in &folded {
        moment += z * z.transpose();
    }
    let span = symcore::image_basis(&SymMatrix::symmetrize(moment), rank_tol)?;
    let k = span.dim();
    let basis = span.basis();
    let coords: Vec<DVector<f64>> = folded.iter().map(|z| basis.transpose() * z).collect();

    let (weights, iterations) = khachiyan(&coords, k)?;

    let mut contact_points = Vec::new();
    let mut kept = Vec::new();
    let mut kept_coords = Vec::new();
    for (y, &w) in coords.iter().zip(&weights) {
        if w > WEIGHT_FLOOR {
            // drop the part outside the numerical span so the identity is exact
            contact_points.push((basis * y).as_slice().to_vec());
            kept.push(w);
            kept_coords.push(y);
        }
    }
    let total: f64 = kept.iter().sum();
    kept.iter_mut().for_each(|w| *w /= total);

    // T = O (kX)^{1/2} makes the identity exact for the kept weights
    let mut x = DMatrix::zeros(k, k);
    for (y, &w) in kept_coords.iter().zip(&kept) {
        x += *y * y.transpose() * w;
    }
    let root = symcore::psd_sqrt(&SymMatrix::symmetrize(x * k as f64));
    let t = basis * root.as_matrix();
    Ok(JohnDecomposition {
        k,
        t: (0..ambient)
            .map(|i| (0..k).map(|j| t[(i, j)]).collect())
            .collect(),
        contact_points,
        weights: kept,
        iterations,
    })
}

/// Canonical sign (first clearly nonzero entry positive), drops short
/// vectors and exact repeats.
fn fold_pairs(points: &[DVector<f64>], min_norm: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for p in points {
        let norm = p.norm();
        if norm <= min_norm || norm == 0.0 {
            continue;
        }
        let mut z = p.clone();
        if let Some(first) = z.iter().find(|x| x.abs() > 1e-12 * norm) {
            if *first < 0.0 {
                z.neg_mut();
            }
        }
        if !out.iter().any(|q| (q - &z).amax() <= 1e-14 * norm) {
            out.push(z);
        }
    }
    out
}

/// Weights maximizing `log det Σ uᵢ yᵢyᵢᵀ` over the simplex. Returns the
/// weights and the iteration count.
///
/// Coordinate ascent alone can crawl when the optimal weights are not
/// unique (contact along whole circles of a sampled body). If it has not
/// converged after [`ASCENT_ITERS`] steps, a log-barrier Newton method
/// produces an enclosing ellipsoid close to optimal, interior points are
/// stripped from the barrier weights and coordinate ascent resumes.
/// Acceptance is by [`volume_gap`], a duality bound on the relative volume
/// excess.
fn khachiyan(coords: &[DVector<f64>], k: usize) -> Result<(Vec<f64>, usize)> {
    let m = coords.len();
    if k == 1 {
        // log det is linear along every step: all weight on the longest point
        let (best, _) = argmax(coords.iter().map(|y| y[0].abs()).enumerate());
        let mut u = vec![0.0; m];
        u[best] = 1.0;
        return Ok((u, 0));
    }
    let u = vec![1.0 / m as f64; m];
    let (u, iters, done) = ascent(coords, k, u, ASCENT_ITERS, None)?;
    if done {
        return Ok((u, iters));
    }
    let (mut u, newton, primal) = barrier_polish(coords, k, &u)?;
    for (w, y) in u.iter_mut().zip(coords) {
        if y.dot(&(&primal * y)) < 1.0 - CONTACT_SLACK {
            *w = 0.0;
        }
    }
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|w| *w /= total);
    let (u, more, _) = ascent(coords, k, u, ASCENT_ITERS, Some(&primal))?;
    let iterations = iters + newton + more;
    let gap = volume_gap(coords, k, &u, Some(&primal))?;
    if gap <= MVEE_TOL {
        Ok((u, iterations))
    } else {
        Err(Error::MveeNonConvergence { iterations, gap })
    }
}

/// Barrier weights of points with `yᵀMy` below `1 − CONTACT_SLACK` are dropped.
const CONTACT_SLACK: f64 = 1e-6;

/// `½ log(vol E / vol E*)` bounded from above, `E` the better of the
/// scaled ellipsoid of `u` and `primal` (an enclosing `{yᵀMy ≤ 1}`).
fn volume_gap(coords: &[DVector<f64>], k: usize, u: &[f64], primal: Option<&DMatrix<f64>>) -> Result<f64> {
    let kf = k as f64;
    let x_inv = inverse_moment(coords, u)?;
    let g_max = coords
        .iter()
        .map(|y| y.dot(&(&x_inv * y)))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut gap = 0.5 * kf * (g_max / kf).ln().max(0.0);
    if let Some(m) = primal {
        let encloses = coords.iter().all(|y| y.dot(&(m * y)) <= 1.0);
        if let (true, Some(chol_m)) = (encloses, m.clone().cholesky()) {
            // log det (kX) = k log k − log det X⁻¹
            let chol_x = x_inv
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Numeric("ellipsoid moment matrix is not definite".into()))?;
            let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let dual = kf * kf.ln() - logdet(&chol_x.l());
            let primal_value = -logdet(&chol_m.l());
            gap = gap.min(0.5 * (primal_value - dual).max(0.0));
        }
    }
    Ok(gap)
}

/// Iterations of plain coordinate ascent before the barrier polish.
const ASCENT_ITERS: usize = MVEE_MAX_ITERS / 10;

/// Wolfe–Atwood steps with away steps. The flag reports whether both the
/// outer and the inner gap fell below [`MVEE_TOL`]; with a primal
/// ellipsoid at hand the run also stops once [`volume_gap`] does.
fn ascent(
    coords: &[DVector<f64>],
    k: usize,
    mut u: Vec<f64>,
    budget: usize,
    primal: Option<&DMatrix<f64>>,
) -> Result<(Vec<f64>, usize, bool)> {
    let kf = k as f64;
    let mut x_inv = inverse_moment(coords, &u)?;
    let mut g: Vec<f64> = coords.iter().map(|y| y.dot(&(&x_inv * y))).collect();
    for iter in 0..budget {
        if iter % 500 == 499 {
            if primal.is_some() && volume_gap(coords, k, &u, primal)? <= MVEE_TOL {
                return Ok((u, iter, false));
            }
            // refresh to keep rank-one updates from drifting
            x_inv = inverse_moment(coords, &u)?;
            for (gi, y) in g.iter_mut().zip(coords) {
                *gi = y.dot(&(&x_inv * y));
            }
        }
        let (up, g_up) = argmax(g.iter().copied().enumerate());
        let (down, g_down) = argmax(
            g.iter()
                .enumerate()
                .filter(|&(i, _)| u[i] > 0.0)
                .map(|(i, &gi)| (i, -gi)),
        );
        let g_down = -g_down;
        let up_gap = g_up / kf - 1.0;
        let down_gap = 1.0 - g_down / kf;
        if up_gap <= MVEE_TOL && down_gap <= MVEE_TOL {
            return Ok((u, iter, true));
        }
        let (j, alpha) = if up_gap >= down_gap {
            (up, (g_up - kf) / (kf * (g_up - 1.0)))
        } else {
            // negative step removes weight from a point inside the ellipsoid;
            // for g ≤ 1 the objective decreases all the way to the floor
            let floor = -u[down] / (1.0 - u[down]);
            if g_down > 1.0 {
                let alpha = (g_down - kf) / (kf * (g_down - 1.0));
                if alpha > floor {
                    (down, alpha)
                } else {
                    (down, floor)
                }
            } else {
                (down, floor)
            }
        };
        let drops = alpha < 0.0 && u[j] <= -alpha / (1.0 - alpha) * (1.0 + 1e-12);
        if !alpha.is_finite() {
            return Err(Error::Numeric("non-finite ellipsoid step".into()));
        }
        for w in u.iter_mut() {
            *w *= 1.0 - alpha;
        }
        u[j] += alpha;
        if drops || u[j] < 0.0 {
            u[j] = 0.0;
        }
        // X' = (1−α)X + α yyᵀ, updated through Sherman–Morrison
        let xy = &x_inv * &coords[j];
        let gj = g[j];
        let denom = (1.0 - alpha) + alpha * gj;
        let c = alpha / denom;
        for (gi, y) in g.iter_mut().zip(coords) {
            let s = y.dot(&xy);
            *gi = (*gi - c * s * s) / (1.0 - alpha);
        }
        x_inv = (&x_inv - &xy * xy.transpose() * c) / (1.0 - alpha);
    }
    Ok((u, budget, false))
}

/// Minimizes `−t log det M − Σ log(1 − yᵢᵀMyᵢ)` along the central path,
/// starting from the ellipsoid of `u`. Returns the dual weights
/// `1/(t(1 − yᵢᵀMyᵢ))`, normalized, the number of Newton steps and the
/// final `M` in the input coordinates.
fn barrier_polish(coords: &[DVector<f64>], k: usize, u: &[f64]) -> Result<(Vec<f64>, usize, DMatrix<f64>)> {
    let m = coords.len();
    // the weights are invariant under linear maps; whitening by the current
    // moment keeps the Newton systems well conditioned
    let whiten = psd_sqrt(&SymMatrix::symmetrize(inverse_moment(coords, u)?));
    let coords: Vec<DVector<f64>> = coords.iter().map(|y| whiten.as_matrix() * y).collect();
    let coords = &coords[..];
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
    let p = pairs.len();
    // φᵢ = coordinates of yᵢyᵢᵀ against the basis Eₐₐ, Eₐᵦ + Eᵦₐ
    let phi: Vec<DVector<f64>> = coords
        .iter()
        .map(|y| {
            DVector::from_iterator(
                p,
                pairs
                    .iter()
                    .map(|&(a, b)| if a == b { y[a] * y[a] } else { 2.0 * y[a] * y[b] }),
            )
        })
        .collect();
    let to_matrix = |theta: &DVector<f64>| {
        let mut mm = DMatrix::zeros(k, k);
        for (q, &(a, b)) in pairs.iter().enumerate() {
            mm[(a, b)] = theta[q];
            mm[(b, a)] = theta[q];
        }
        mm
    };

    let x_inv = inverse_moment(coords, u)?;
    let g_max = coords.iter().map(|y| y.dot(&(&x_inv * y))).fold(0.0, f64::max);
    let start = &x_inv * (0.99 / g_max);
    let mut theta = DVector::from_iterator(p, pairs.iter().map(|&(a, b)| start[(a, b)]));

    let feasible = |theta: &DVector<f64>| {
        to_matrix(theta).cholesky().is_some() && phi.iter().all(|ph| ph.dot(theta) < 1.0)
    };

    // the central point at t is within m/(2t) of the optimal half log volume
    let t_final = 10.0 * m as f64 / MVEE_TOL;
    let mut t = (m as f64).max(1.0);
    let mut steps = 0;
    loop {
        for _ in 0..100 {
            let mm = to_matrix(&theta);
            let minv = mm
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Numeric("barrier iterate left the PSD cone".into()))?
                .inverse();
            let mut grad = DVector::zeros(p);
            let mut hess = DMatrix::zeros(p, p);
            let basis: Vec<DMatrix<f64>> = pairs
                .iter()
                .map(|&(a, b)| {
                    let mut e = DMatrix::zeros(k, k);
                    e[(a, b)] = 1.0;
                    e[(b, a)] = 1.0;
                    &minv * e
                })
                .collect();
            for q in 0..p {
                grad[q] = -t * basis[q].trace();
                for r in q..p {
                    let h = t * (&basis[q] * &basis[r]).trace();
                    hess[(q, r)] = h;
                    hess[(r, q)] = h;
                }
            }
            for ph in &phi {
                let slack = 1.0 - ph.dot(&theta);
                grad += ph / slack;
                hess += ph * ph.transpose() / (slack * slack);
            }
            let step = match hess.clone().cholesky() {
                Some(c) => c.solve(&(-&grad)),
                None => hess
                    .clone()
                    .lu()
                    .solve(&(-&grad))
                    .ok_or_else(|| Error::Numeric("singular barrier Hessian".into()))?,
            };
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            // damped Newton keeps a self-concordant barrier inside its domain
            let lambda = decrement.max(0.0).sqrt();
            let mut s = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
            while !feasible(&(&theta + &step * s)) {
                s *= 0.5;
                if s < 1e-16 {
                    return Err(Error::Numeric("barrier step left the domain".into()));
                }
            }
            theta += &step * s;
            steps += 1;
        }
        if t >= t_final {
            break;
        }
        t = (t * 10.0).min(t_final);
    }
    let mut w: Vec<f64> = phi.iter().map(|ph| 1.0 / (t * (1.0 - ph.dot(&theta)))).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let primal = whiten.as_matrix() * to_matrix(&theta) * whiten.as_matrix();
    Ok((w, steps, primal))
}

fn inverse_moment(coords: &[DVector<f64>], u: &[f64]) -> Result<DMatrix<f64>> {
    let k = coords[0].len();
    let mut x = DMatrix::zeros(k, k);
    for (y, &w) in coords.iter().zip(u) {
        x += y * y.transpose() * w;
    }
    let dec = eigh(&SymMatrix::symmetrize(x));
    if dec.min() <= 0.0 {
        return Err(Error::Numeric(format!(
            "ellipsoid moment matrix became singular (min eigenvalue {:e})",
            dec.min()
        )));
    }
    Ok(dec.map(|l| 1.0 / l).into_matrix())
}

fn argmax(it: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    it.fold((0, f64::NEG_INFINITY), |best, (i, v)| {
        if v > best.1 {
            (i, v)
        } else {
            best
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn segment() {
        let j = john_decompose(&[v(&[1.0, 0.0]), v(&[-1.0, 0.0])], 1e-9).unwrap();
        assert_eq!(j.k, 1);
        assert_eq!(j.contact_points, vec![vec![1.0, 0.0]]);
        assert_abs_diff_eq!(j.weights[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.t[0][0].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j.t[1][0], 0.0, epsilon = 1e-12);
        assert!(j.identity_residual() < 1e-12);
    }

    #[test]
    fn cross() {
        let pts = [v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, -1.0])];
        let j = john_decompose(&pts, 1e-9).unwrap();
        assert_eq!(j.k, 2);
        for &w in &j.weights {
            assert_abs_diff_eq!(w, 0.5, epsilon = 1e-9);
        }
        let m = j.moment();
        assert_abs_diff_eq!(m.get(0, 0), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.get(1, 1), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.get(0, 1), 0.0, epsilon = 1e-9);
        assert!(j.identity_residual() < 1e-12);
        assert!(j.boundary_residual() < 1e-6);
    }

    #[test]
    fn circle_sample() {
        let pts: Vec<_> = (0..40)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 40.0;
                v(&[a.cos(), a.sin()])
            })
            .collect();
        let j = john_decompose(&pts, 1e-9).unwrap();
        let t = j.t_matrix();
        let tt = &t * t.transpose();
        for (a, b) in [(0, 0), (1, 1)] {
            assert_abs_diff_eq!(tt[(a, b)], 1.0, epsilon = 1e-3);
        }
        assert_abs_diff_eq!(tt[(0, 1)], 0.0, epsilon = 1e-3);
        let m = j.moment();
        assert_abs_diff_eq!(m.get(0, 0), 0.5, epsilon = 1e-3);
        assert_abs_diff_eq!(m.get(0, 1), 0.0, epsilon = 1e-3);
        assert!(j.identity_residual() < 1e-6);
        assert!(j.boundary_residual() < 1e-6);
    }

    #[test]
    fn interior_points_get_no_weight() {
        let pts = [
            v(&[2.0, 0.0]),
            v(&[0.0, 1.0]),
            v(&[0.5, 0.25]),
            v(&[-0.1, 0.2]),
        ];
        let j = john_decompose(&pts, 1e-9).unwrap();
        assert_eq!(j.contact_points.len(), 2);
        assert!(j.boundary_residual() < 1e-6);
        // the axis-aligned ellipse through (±2,0) and (0,±1)
        let t = j.t_matrix();
        let tt = &t * t.transpose();
        assert_abs_diff_eq!(tt[(0, 0)], 4.0, epsilon = 1e-6);
        assert_abs_diff_eq!(tt[(1, 1)], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn lower_dimensional_span_in_r3() {
        let pts = [v(&[1.0, 1.0, 0.0]), v(&[1.0, -1.0, 0.0])];
        let j = john_decompose(&pts, 1e-9).unwrap();
        assert_eq!(j.k, 2);
        assert_eq!(j.ambient(), 3);
        assert!(j.identity_residual() < 1e-10);
        let t = j.t_matrix();
        assert!(t.row(2).amax() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(john_decompose(&[], 1e-9), Err(Error::Empty(_))));
        assert!(matches!(
            john_decompose(&[v(&[0.0, 0.0])], 1e-9),
            Err(Error::Empty(_))
        ));
        assert!(john_decompose(&[v(&[f64::NAN, 0.0])], 1e-9).is_err());
    }
}
