//! Right derivatives of the operator norm along additive and congruence
//! perturbations of a PSD matrix, with finite-difference checks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symcore::{self, eigh, SymMatrix, CLUSTER_TOL};

pub const DEFAULT_LADDER: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

fn top_space(x: &SymMatrix, z: &SymMatrix) -> Result<(f64, DMatrix<f64>)> {
    if x.side() != z.side() {
        return Err(Error::Dimension {
            context: "perturbation side",
            expected: x.side(),
            found: z.side(),
        });
    }
    let dec = eigh(x);
    if dec.min() < -1e-9 * (1.0 + dec.max().max(0.0)) {
        return Err(Error::NotPsd {
            min_eigenvalue: dec.min(),
        });
    }
    if !(dec.max() > 0.0) {
        return Err(Error::Precondition("matrix must be nonzero".into()));
    }
    let w = dec.top_eigenspace(CLUSTER_TOL);
    Ok((dec.max(), w.basis().clone()))
}

/// `d₊/dε ‖X + εZ‖` at 0: the largest eigenvalue of `Z` restricted to the
/// top eigenspace of `X`.
pub fn dplus_opnorm_additive(x: &SymMatrix, z: &SymMatrix) -> Result<f64> {
    let (_, o) = top_space(x, z)?;
    Ok(symcore::max_eigenvalue(&z.restrict(&o)))
}

/// `d₊/dε ‖e^{εZ} X e^{εZ}‖` at 0, which is `2λ₁` times the additive value.
pub fn dplus_opnorm_congruence(x: &SymMatrix, z: &SymMatrix) -> Result<f64> {
    let (lambda, o) = top_space(x, z)?;
    Ok(2.0 * lambda * symcore::max_eigenvalue(&z.restrict(&o)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub analytic: f64,
    /// `(ε, (f(ε) − f(0))/ε)`, ε strictly decreasing.
    pub slopes: Vec<(f64, f64)>,
    pub max_deviation: f64,
}

impl DerivativeCheck {
    /// Deviation at the smallest step.
    pub fn final_deviation(&self) -> f64 {
        self.slopes
            .last()
            .map_or(0.0, |&(_, s)| (s - self.analytic).abs())
    }
}

/// Forward-difference slopes of `f` at 0 over `ladder`.
pub fn fd_ladder(f: impl Fn(f64) -> f64, ladder: &[f64], analytic: f64) -> Result<DerivativeCheck> {
    if ladder.is_empty() {
        return Err(Error::Empty("step ladder"));
    }
    if ladder.iter().any(|&e| !(e > 0.0)) || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("step ladder must be positive and strictly decreasing".into()));
    }
    let f0 = f(0.0);
    if f0.is_nan() {
        return Err(Error::Numeric("function is NaN at 0".into()));
    }
    let mut slopes = Vec::with_capacity(ladder.len());
    let mut max_deviation = 0.0f64;
    for &eps in ladder {
        let fe = f(eps);
        if fe.is_nan() {
            return Err(Error::Numeric(format!("function is NaN at eps = {eps:e}")));
        }
        let slope = (fe - f0) / eps;
        max_deviation = max_deviation.max((slope - analytic).abs());
        slopes.push((eps, slope));
    }
    Ok(DerivativeCheck {
        analytic,
        slopes,
        max_deviation,
    })
}

/// A random PSD `X` with `λ₁ = 1` and gap `λ₁ − λ₂ = gap`, and a random
/// symmetric `Z` with `‖Z‖ = 1`, both in a random orthonormal frame.
pub fn random_pair(rng: &mut impl Rng, side: usize, gap: f64) -> (SymMatrix, SymMatrix) {
    let q = random_orthogonal(rng, side);
    let mut eig = vec![1.0];
    for _ in 1..side {
        eig.push(rng.random_range(0.0..=(1.0 - gap)));
    }
    if side > 1 {
        eig[1] = 1.0 - gap;
    }
    let x = SymMatrix::from_diagonal(&eig).congruence(&q);
    let g = DMatrix::from_fn(side, side, |_, _| StandardNormal.sample(rng));
    let g: DMatrix<f64> = g;
    let z = SymMatrix::symmetrize(g);
    let norm = symcore::operator_norm(&z);
    let z = if norm > 0.0 { z.scale(1.0 / norm) } else { z };
    (x, z)
}

/// Haar-ish orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut impl Rng, side: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(side, side, |_, _| StandardNormal.sample(rng));
    let g: DMatrix<f64> = g;
    g.qr().q()
}

/// Both derivative checks for one pair, at the default ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairCheck {
    pub side: usize,
    pub gap: f64,
    pub additive: DerivativeCheck,
    pub congruence: DerivativeCheck,
    /// `|d₊cong(X,Z) − d₊add(X, XZ + ZX)|`.
    pub relation_error: f64,
}

pub fn check_pair(x: &SymMatrix, z: &SymMatrix, ladder: &[f64]) -> Result<PairCheck> {
    let dec = eigh(x);
    let gap = if x.side() > 1 {
        dec.eigenvalues[0] - dec.eigenvalues[1]
    } else {
        f64::INFINITY
    };
    let add = dplus_opnorm_additive(x, z)?;
    let additive = fd_ladder(
        |e| symcore::operator_norm(&x.add(&z.scale(e))),
        ladder,
        add,
    )?;
    let cong = dplus_opnorm_congruence(x, z)?;
    let zdec = eigh(z);
    let congruence = fd_ladder(
        |e| symcore::operator_norm(&x.sandwich(&zdec.map(|l| (e * l).exp()))),
        ladder,
        cong,
    )?;
    let xz = x.as_matrix() * z.as_matrix();
    let sym = SymMatrix::symmetrize(&xz + xz.transpose());
    let relation_error = (cong - dplus_opnorm_additive(x, &sym)?).abs();
    Ok(PairCheck {
        side: x.side(),
        gap,
        additive,
        congruence,
        relation_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(d: &[f64]) -> SymMatrix {
        SymMatrix::from_diagonal(d)
    }

    #[test]
    fn additive_examples() {
        assert_eq!(dplus_opnorm_additive(&diag(&[2.0, 1.0]), &diag(&[5.0, -3.0])).unwrap(), 5.0);
        let z = SymMatrix::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(
            dplus_opnorm_additive(&SymMatrix::identity(2), &z).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn congruence_examples() {
        let x = diag(&[2.0, 1.0]);
        assert_eq!(dplus_opnorm_congruence(&x, &diag(&[0.7, -4.0])).unwrap(), 4.0 * 0.7);
        assert_eq!(dplus_opnorm_congruence(&x, &SymMatrix::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let z = SymMatrix::identity(2);
        assert!(matches!(
            dplus_opnorm_additive(&SymMatrix::zeros(2), &z),
            Err(Error::Precondition(_))
        ));
        assert!(dplus_opnorm_congruence(&SymMatrix::zeros(2), &z).is_err());
    }

    #[test]
    fn ladder_examples() {
        let c = fd_ladder(|e| 3.0 * e, &DEFAULT_LADDER, 3.0).unwrap();
        assert!(c.slopes.iter().all(|&(_, s)| (s - 3.0).abs() < 1e-9));
        let c = fd_ladder(|e| e + e * e, &DEFAULT_LADDER, 1.0).unwrap();
        for &(e, s) in &c.slopes {
            assert_abs_diff_eq!(s, 1.0 + e, epsilon = 1e-9);
        }
        assert!(c.final_deviation() < 2e-6);
        assert!(fd_ladder(|e| if e > 0.0 { f64::NAN } else { 0.0 }, &DEFAULT_LADDER, 0.0).is_err());
        assert!(fd_ladder(|e| e, &[1e-6, 1e-3], 1.0).is_err());
    }

    #[test]
    fn repeated_top_eigenvalue() {
        // X = Q diag(1, 1, 0.3) Qᵀ: the derivative is λmax of Z on span(q₁, q₂)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let q = random_orthogonal(&mut rng, 3);
            let x = diag(&[1.0, 1.0, 0.3]).congruence(&q);
            let (_, z) = random_pair(&mut rng, 3, 0.5);
            let plane = q.columns(0, 2).into_owned();
            let expected = symcore::max_eigenvalue(&z.restrict(&plane));
            assert_abs_diff_eq!(dplus_opnorm_additive(&x, &z).unwrap(), expected, epsilon = 1e-9);
            let fd = (symcore::operator_norm(&x.add(&z.scale(1e-7))) - 1.0) / 1e-7;
            assert_abs_diff_eq!(fd, expected, epsilon = 1e-5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn finite_differences_match(seed in any::<u64>(), side in 2usize..6, gap in 0.1f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, z) = random_pair(&mut rng, side, gap);
            let c = check_pair(&x, &z, &DEFAULT_LADDER).unwrap();
            prop_assert!(c.additive.final_deviation() <= 1e-4 / gap);
            prop_assert!(c.congruence.final_deviation() <= 1e-4 / gap);
            prop_assert!(c.relation_error <= 1e-8);
        }

        #[test]
        fn congruence_is_twice_scaled_additive(seed in any::<u64>(), side in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, z) = random_pair(&mut rng, side, 0.2);
            let x = x.scale(3.0);
            let add = dplus_opnorm_additive(&x, &z).unwrap();
            let cong = dplus_opnorm_congruence(&x, &z).unwrap();
            prop_assert!((cong - 6.0 * add).abs() <= 1e-9 * (1.0 + cong.abs()));
        }
    }
}
