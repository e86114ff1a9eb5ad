//! Dense symmetric matrices and the spectral toolkit built on them.
//!
//! Everything here works through one symmetric eigensolver (Householder
//! tridiagonalization followed by implicit-shift QR, as provided by
//! `nalgebra`). Pseudo-inverses, exponentials, square roots, PSD projections
//! and eigenspace extraction are all functions of a [`SpectralDecomposition`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue is treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Eigenvalues within this fraction of the spectral radius form one eigenspace.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Reconstruction tolerance checked by [`spectral_decompose`], relative to `1 + ‖m‖_F`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Largest eigenvalue accepted by [`matrix_exponential`].
pub const EXP_CAP: f64 = 700.0;
/// Iteration cap handed to the QR sweep.
pub const EIGEN_MAX_ITERS: usize = 10_000;

const SYMMETRY_TOL: f64 = 1e-9;

/// Real symmetric matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

/// Wire form: `{"side": r, "entries": [row-major reals]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct MatrixRepr {
    side: usize,
    entries: Vec<f64>,
}

impl TryFrom<MatrixRepr> for SymMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        SymMatrix::from_row_major(repr.side, repr.entries)
    }
}

impl From<SymMatrix> for MatrixRepr {
    fn from(m: SymMatrix) -> Self {
        MatrixRepr {
            side: m.side(),
            entries: m.to_row_major(),
        }
    }
}

impl SymMatrix {
    pub fn zeros(side: usize) -> Self {
        Self {
            inner: DMatrix::zeros(side, side),
        }
    }

    pub fn identity(side: usize) -> Self {
        Self {
            inner: DMatrix::identity(side, side),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    /// `v vᵀ`.
    pub fn outer(v: &DVector<f64>) -> Self {
        Self {
            inner: v * v.transpose(),
        }
    }

    /// Builds from row-major entries, symmetrizing away rounding-level asymmetry.
    pub fn from_row_major(side: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != side * side {
            return Err(Error::Dimension {
                context: "row-major entries",
                expected: side * side,
                found: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(side, side, &entries))
    }

    /// Checks squareness, finiteness and symmetry (relative 1e-9), then
    /// stores `(m + mᵀ)/2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                context: "square matrix",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let scale = 1.0 + m.amax();
        let asymmetry = (&m - m.transpose()).amax();
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self::symmetrize(m))
    }

    /// Stores `(m + mᵀ)/2` without validation. For products that are
    /// symmetric in exact arithmetic.
    pub(crate) fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self {
            inner: (m + t) * 0.5,
        }
    }

    pub fn side(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        // symmetric: column-major storage equals row-major order
        self.inner.as_slice().to_vec()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: &self.inner * s,
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self {
            inner: &self.inner + &other.inner,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self {
            inner: &self.inner - &other.inner,
        }
    }

    /// `T M Tᵀ` for any (possibly rectangular) `T`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> Self {
        Self::symmetrize(t * &self.inner * t.transpose())
    }

    /// `Tᵀ M T`, the restriction to the column span of `T`.
    pub fn restrict(&self, t: &DMatrix<f64>) -> Self {
        Self::symmetrize(t.transpose() * &self.inner * t)
    }

    /// `A M A` for symmetric `A`.
    pub fn sandwich(&self, a: &SymMatrix) -> Self {
        Self::symmetrize(&a.inner * &self.inner * &a.inner)
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.inner * x)[(0, 0)]
    }

    pub fn max_abs_entry(&self) -> f64 {
        if self.side() == 0 {
            0.0
        } else {
            self.inner.amax()
        }
    }

    /// CSV form: a `side,r` header line followed by `r` comma-separated rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("side,{}\n", self.side());
        for i in 0..self.side() {
            let row: Vec<String> = (0..self.side())
                .map(|j| format!("{:e}", self.get(i, j)))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or(Error::Empty("matrix csv"))?;
        let side: usize = header
            .strip_prefix("side,")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Invalid(format!("bad csv header `{header}`")))?;
        let mut entries = Vec::with_capacity(side * side);
        for line in lines {
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad csv value `{field}`")))?;
                entries.push(v);
            }
        }
        Self::from_row_major(side, entries)
    }
}

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn side(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.max().abs().max(self.min().abs())
    }

    /// `Σ f(λₖ) uₖuₖᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.side();
        let mut scaled = self.eigenvectors.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(k).scale_mut(w);
        }
        if n == 0 {
            return SymMatrix::zeros(0);
        }
        SymMatrix::symmetrize(scaled * self.eigenvectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|l| l)
    }

    /// Orthonormal basis of the top eigenvalue cluster: all `k` with
    /// `λ₁ − λₖ ≤ tol · ρ`, `ρ` the spectral radius. The zero matrix yields
    /// the whole space.
    pub fn top_eigenspace(&self, tol: f64) -> Subspace {
        let threshold = self.max() - tol * self.spectral_radius();
        let count = self
            .eigenvalues
            .iter()
            .take_while(|&&l| l >= threshold)
            .count();
        Subspace {
            basis: self.eigenvectors.columns(0, count).into_owned(),
        }
    }
}

/// Eigendecomposition without the reconstruction check. Used on hot paths.
pub fn eigh(m: &SymMatrix) -> SpectralDecomposition {
    let n = m.side();
    if n == 0 {
        return SpectralDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = m
        .inner
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITERS)
        .unwrap_or_else(|| m.inner.clone().symmetric_eigen());
    sorted(eig.eigenvalues, eig.eigenvectors)
}

fn sorted(values: DVector<f64>, vectors: DMatrix<f64>) -> SpectralDecomposition {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut eigenvectors = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(values[src]);
        let mut col = vectors.column(src).into_owned();
        // sign convention: the largest-magnitude component is positive
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Spectral decomposition with a reconstruction guarantee: fails when the
/// solver does not converge within [`EIGEN_MAX_ITERS`] or when
/// `‖Σ λₖuₖuₖᵀ − m‖_F > tol · (1 + ‖m‖_F)`.
pub fn spectral_decompose(m: &SymMatrix, tol: f64) -> Result<SpectralDecomposition> {
    let n = m.side();
    if n == 0 {
        return Ok(eigh(m));
    }
    let eig = m
        .inner
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITERS)
        .ok_or(Error::EigenNonConvergence {
            side: n,
            residual: f64::NAN,
        })?;
    let dec = sorted(eig.eigenvalues, eig.eigenvectors);
    let residual = frobenius_norm(&dec.reconstruct().sub(m));
    if residual > tol * (1.0 + frobenius_norm(m)) {
        return Err(Error::EigenNonConvergence { side: n, residual });
    }
    Ok(dec)
}

/// Moore–Penrose pseudo-inverse; eigenvalues with `|λ| ≤ rank_tol · ρ` are dropped.
pub fn pseudo_inverse(m: &SymMatrix, rank_tol: f64) -> SymMatrix {
    let dec = eigh(m);
    let cutoff = rank_tol * dec.spectral_radius();
    dec.map(|l| if l.abs() > cutoff && l != 0.0 { 1.0 / l } else { 0.0 })
}

/// Largest absolute eigenvalue.
pub fn operator_norm(m: &SymMatrix) -> f64 {
    eigh(m).spectral_radius()
}

pub fn max_eigenvalue(m: &SymMatrix) -> f64 {
    eigh(m).max()
}

pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    eigh(m).min()
}

/// `e^M` through the eigendecomposition.
pub fn matrix_exponential(m: &SymMatrix) -> Result<SymMatrix> {
    matrix_exponential_capped(m, EXP_CAP)
}

pub fn matrix_exponential_capped(m: &SymMatrix, cap: f64) -> Result<SymMatrix> {
    let dec = eigh(m);
    if dec.max() > cap {
        return Err(Error::ExpOverflow {
            lambda_max: dec.max(),
            cap,
        });
    }
    Ok(dec.map(f64::exp))
}

pub fn frobenius_norm(m: &SymMatrix) -> f64 {
    m.inner.norm()
}

/// `⟨A, B⟩ = Tr[AᵀB]`.
pub fn trace_inner_product(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.side() != b.side() {
        return Err(Error::Dimension {
            context: "trace inner product",
            expected: a.side(),
            found: b.side(),
        });
    }
    Ok(a.inner.dot(&b.inner))
}

/// PSD square root; negative eigenvalues are clipped to zero.
pub fn psd_sqrt(m: &SymMatrix) -> SymMatrix {
    eigh(m).map(|l| l.max(0.0).sqrt())
}

/// Euclidean projection onto `{X ⪰ 0, ‖X‖ ≤ upper}` by eigenvalue clipping.
pub fn project_psd(m: &SymMatrix, upper: Option<f64>) -> SymMatrix {
    let cap = upper.unwrap_or(f64::INFINITY);
    eigh(m).map(|l| l.clamp(0.0, cap))
}

/// Whether `m` is PSD up to `min eigenvalue ≥ −tol · (1 + λmax)`.
pub fn is_psd(m: &SymMatrix, tol: f64) -> bool {
    let dec = eigh(m);
    dec.min() >= -tol * (1.0 + dec.max().max(0.0))
}

/// Orthonormal basis of a subspace of `R^r`.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Validates `OᵀO = I` within 1e-10.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let d = basis.ncols();
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::<f64>::identity(d, d)).amax_or_zero();
        if err > 1e-10 {
            return Err(Error::Invalid(format!(
                "basis is not orthonormal (deviation {err:e})"
            )));
        }
        Ok(Self { basis })
    }

    pub fn full(ambient: usize) -> Self {
        Self {
            basis: DMatrix::identity(ambient, ambient),
        }
    }

    pub fn zero(ambient: usize) -> Self {
        Self {
            basis: DMatrix::zeros(ambient, 0),
        }
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `P_W = OOᵀ`.
    pub fn projector(&self) -> SymMatrix {
        SymMatrix::symmetrize(&self.basis * self.basis.transpose())
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * x)
    }

    /// Orthonormal basis of the column span of `m`, ignoring directions whose
    /// squared singular value is below `rank_tol` times the largest.
    pub fn column_span(m: &DMatrix<f64>, rank_tol: f64) -> Self {
        let gram = SymMatrix::symmetrize(m * m.transpose());
        let dec = eigh(&gram);
        let cutoff = rank_tol * dec.max().max(0.0);
        let count = dec
            .eigenvalues
            .iter()
            .take_while(|&&l| l > cutoff && l > 0.0)
            .count();
        Self {
            basis: dec.eigenvectors.columns(0, count).into_owned(),
        }
    }

    /// `P_self(other)`: the image of `other` under the projection onto `self`.
    pub fn project_subspace(&self, other: &Subspace, rank_tol: f64) -> Subspace {
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(self.ambient());
        }
        let projected = &self.basis * (self.basis.transpose() * &other.basis);
        Self::column_span(&projected, rank_tol)
    }
}

/// Image of a PSD matrix: eigenvectors with `λ > rank_tol · λmax`.
pub fn image_basis(m: &SymMatrix, rank_tol: f64) -> Result<Subspace> {
    let dec = eigh(m);
    let lmax = dec.max().max(0.0);
    if dec.min() < -rank_tol * lmax && dec.min() < -f64::EPSILON * (1.0 + lmax) {
        return Err(Error::NotPsd {
            min_eigenvalue: dec.min(),
        });
    }
    let count = dec
        .eigenvalues
        .iter()
        .take_while(|&&l| l > rank_tol * lmax && l > 0.0)
        .count();
    Ok(Subspace {
        basis: dec.eigenvectors.columns(0, count).into_owned(),
    })
}

/// `P_W x`.
pub fn project_point(s: &Subspace, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != s.ambient() {
        return Err(Error::Dimension {
            context: "project_point",
            expected: s.ambient(),
            found: x.len(),
        });
    }
    Ok(s.project(x))
}

trait AmaxOrZero {
    fn amax_or_zero(&self) -> f64;
}

impl AmaxOrZero for DMatrix<f64> {
    fn amax_or_zero(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.amax()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrize(m)
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymMatrix {
        let b = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrize(&b * b.transpose())
    }

    // independent oracle: plain power iteration on M² (dominant |λ|)
    fn power_iteration_norm(m: &SymMatrix) -> f64 {
        let n = m.side();
        let mut x = DVector::from_fn(n, |i, _| 1.0 + i as f64 * 0.37);
        x.normalize_mut();
        let sq = m.as_matrix() * m.as_matrix();
        let mut est = 0.0;
        for _ in 0..20_000 {
            let y = &sq * &x;
            let norm = y.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = y / norm;
            est = norm;
            if (&next - &x).norm() < 1e-15 {
                break;
            }
            x = next;
        }
        est.sqrt()
    }

    fn series_exp(m: &SymMatrix, terms: usize) -> DMatrix<f64> {
        let n = m.side();
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..terms {
            term = term * m.as_matrix() / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn diagonal_decomposition() {
        let m = SymMatrix::from_diagonal(&[1.0, 3.0]);
        let dec = spectral_decompose(&m, RECONSTRUCTION_TOL).unwrap();
        assert_eq!(dec.eigenvalues, vec![3.0, 1.0]);
        assert_abs_diff_eq!(dec.eigenvector(0)[1].abs(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dec.eigenvector(1)[0].abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_matrix_decomposition() {
        let dec = spectral_decompose(&SymMatrix::zeros(2), RECONSTRUCTION_TOL).unwrap();
        assert_eq!(dec.eigenvalues, vec![0.0, 0.0]);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_sym(&mut rng, 5);
        let dec = spectral_decompose(&m, RECONSTRUCTION_TOL).unwrap();
        // oracle: explicit Σ λ u uᵀ re-multiplication
        let mut sum = DMatrix::zeros(5, 5);
        for k in 0..5 {
            let u = dec.eigenvector(k);
            sum += dec.eigenvalues[k] * &u * u.transpose();
        }
        assert!((sum - m.as_matrix()).norm() <= 1e-10);
        for w in dec.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn pseudo_inverse_examples() {
        let p = pseudo_inverse(&SymMatrix::from_diagonal(&[2.0, 0.0]), DEFAULT_RANK_TOL);
        assert_abs_diff_eq!(p.get(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(1, 1), 0.0);
        let id = pseudo_inverse(&SymMatrix::identity(3), DEFAULT_RANK_TOL);
        assert!((id.as_matrix() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);

        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0;
        let a = SymMatrix::outer(&v).scale(4.0);
        let pinv = pseudo_inverse(&a, DEFAULT_RANK_TOL);
        // oracle: rank-one formula (4vvᵀ)⁺ = vvᵀ/4
        let expected = SymMatrix::outer(&v).scale(0.25);
        assert!((pinv.as_matrix() - expected.as_matrix()).amax() < 1e-12);
        let proj = pinv.as_matrix() * a.as_matrix();
        assert!((proj - SymMatrix::outer(&v).as_matrix()).amax() < 1e-8);
    }

    #[test]
    fn zero_pseudo_inverse() {
        let p = pseudo_inverse(&SymMatrix::zeros(3), DEFAULT_RANK_TOL);
        assert_eq!(p, SymMatrix::zeros(3));
    }

    #[test]
    fn operator_norm_examples() {
        assert_abs_diff_eq!(operator_norm(&SymMatrix::from_diagonal(&[3.0, 1.0])), 3.0);
        assert_abs_diff_eq!(operator_norm(&SymMatrix::from_diagonal(&[-5.0, 2.0])), 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_psd(&mut rng, 6, 6);
        assert_abs_diff_eq!(operator_norm(&m), power_iteration_norm(&m), epsilon = 1e-9);
    }

    #[test]
    fn exponential_examples() {
        let e = matrix_exponential(&SymMatrix::zeros(3)).unwrap();
        assert!((e.as_matrix() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        let e = matrix_exponential(&SymMatrix::from_diagonal(&[0.5, -2.0])).unwrap();
        assert_abs_diff_eq!(e.get(0, 0), 0.5f64.exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(e.get(1, 1), (-2.0f64).exp(), epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_sym(&mut rng, 4);
        let m = m.scale(1.0 / operator_norm(&m));
        let series = series_exp(&m, 20);
        let e = matrix_exponential(&m).unwrap();
        assert!((e.as_matrix() - series).amax() < 1e-10);
    }

    #[test]
    fn exponential_overflow() {
        let err = matrix_exponential(&SymMatrix::from_diagonal(&[800.0])).unwrap_err();
        assert!(matches!(err, Error::ExpOverflow { .. }));
    }

    #[test]
    fn inner_products() {
        let i2 = SymMatrix::identity(2);
        assert_eq!(trace_inner_product(&i2, &i2).unwrap(), 2.0);
        let a = SymMatrix::from_diagonal(&[1.0, 2.0]);
        let b = SymMatrix::from_diagonal(&[3.0, 4.0]);
        assert_eq!(trace_inner_product(&a, &b).unwrap(), 11.0);
        assert!(trace_inner_product(&a, &SymMatrix::identity(3)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_sym(&mut rng, 4);
        let y = random_sym(&mut rng, 4);
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                oracle += x.get(i, j) * y.get(i, j);
            }
        }
        assert_abs_diff_eq!(trace_inner_product(&x, &y).unwrap(), oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(frobenius_norm(&x).powi(2), trace_inner_product(&x, &x).unwrap(), epsilon = 1e-13);
    }

    #[test]
    fn image_and_projection() {
        let s = image_basis(&SymMatrix::from_diagonal(&[1.0, 0.0]), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.dim(), 1);
        assert_abs_diff_eq!(s.basis()[(0, 0)].abs(), 1.0);
        let s = image_basis(&SymMatrix::identity(3), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.dim(), 3);

        let w1 = image_basis(&SymMatrix::from_diagonal(&[1.0, 1.0, 0.0]), DEFAULT_RANK_TOL).unwrap();
        let v = DVector::from_vec(vec![1.0, 0.0, 1.0]) / 2f64.sqrt();
        let w2 = image_basis(&SymMatrix::outer(&v), DEFAULT_RANK_TOL).unwrap();
        let w = w1.project_subspace(&w2, DEFAULT_RANK_TOL);
        assert_eq!(w.dim(), 1);
        // hand projection: P_{W1}(1,0,1)/√2 = (1,0,0)/√2, so W = span e₁
        let p = project_point(&w, &DVector::from_vec(vec![3.0, 4.0, 5.0])).unwrap();
        assert!((p - DVector::from_vec(vec![3.0, 0.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn image_rejects_indefinite() {
        let err = image_basis(&SymMatrix::from_diagonal(&[1.0, -0.5]), DEFAULT_RANK_TOL).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        assert!(matches!(
            SymMatrix::from_row_major(2, vec![1.0, 2.0, 3.0, 4.0]),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            SymMatrix::from_row_major(1, vec![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(SymMatrix::from_row_major(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn json_and_csv_forms() {
        let m = SymMatrix::from_row_major(2, vec![1.0, 0.5, 0.5, 2.0]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"side":2,"entries":[1.0,0.5,0.5,2.0]}"#);
        let back: SymMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let csv = m.to_csv();
        assert!(csv.starts_with("side,2\n"));
        assert_eq!(SymMatrix::from_csv(&csv).unwrap(), m);
    }

    #[test]
    fn top_eigenspace_clusters() {
        let m = SymMatrix::from_diagonal(&[2.0, 2.0 - 1e-12, 1.0]);
        assert_eq!(eigh(&m).top_eigenspace(CLUSTER_TOL).dim(), 2);
        let m = SymMatrix::from_diagonal(&[2.0, 1.9, 1.0]);
        assert_eq!(eigh(&m).top_eigenspace(CLUSTER_TOL).dim(), 1);
    }
}
